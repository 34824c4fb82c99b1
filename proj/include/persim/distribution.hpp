#pragma once

#include <string>
#include <vector>

namespace persim {

// Probability vector over the admissible integer responses of one question.
// Invariants (enforced by make): options are consecutive integers, probs
// align one-to-one, every prob >= 0, and the probs sum to 1 within 1e-12.
class ResponseDistribution {
 public:
  // Empty placeholder (size() == 0); only make() produces a valid distribution.
  ResponseDistribution() = default;
  static ResponseDistribution make(std::string question_id, std::vector<int> options,
                                   std::vector<double> probs);

  const std::string& question_id() const { return question_id_; }
  const std::vector<int>& options() const { return options_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double prob_of(int option) const;  // 0 for options outside the scale

  bool operator==(const ResponseDistribution&) const = default;

 private:
  std::string question_id_;
  std::vector<int> options_;
  std::vector<double> probs_;
};

// E[r] = sum_k r_k p_k.
double expected_response(const ResponseDistribution& d);

// Var[r] under d.
double response_variance(const ResponseDistribution& d);

}  // namespace persim
