#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace persim {

// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(std::string_view data);
// SHA-256 of a file's contents. Throws Error if the file cannot be read.
std::string sha256_hex_file(const std::string& path);

// Deterministic random source. Bounded draws are implemented by rejection
// sampling on raw 64-bit output because std::uniform_int_distribution is
// implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform index in [0, n). Pre: n > 0.
  std::size_t uniform_index(std::size_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool replace_all(std::string& s, std::string_view from, std::string_view to);
std::size_t count_occurrences(std::string_view s, std::string_view needle);

// Shortest decimal text that round-trips a double ("%.17g" fallback).
std::string format_double(double x);

// Whole-file read/write. write_file_atomic stages to `path + ".partial"` and
// renames into place so readers never observe half-written output.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
void write_file_atomic(const std::string& path, std::string_view content);

// Runs fn(0..n-1) on `workers` threads. Results are ordered by the caller;
// if any call throws, the exception for the lowest index is rethrown after
// all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// log(sum(exp(x))) evaluated stably; x must be non-empty.
double log_sum_exp(const std::vector<double>& x);

// exp-normalize of logits (stable softmax); result sums to 1.
std::vector<double> softmax(const std::vector<double>& logits);

}  // namespace persim
