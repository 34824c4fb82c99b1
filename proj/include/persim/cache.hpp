#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "persim/backend.hpp"

namespace persim {

// Stable identity of a score request: SHA-256 over a canonical, length-
// prefixed rendering of (model, prompt texts, candidates, decode params).
std::string score_cache_key(const ScoreRequest& req);

// Short human-readable summary stored next to each cache record.
std::string score_cache_digest(const ScoreRequest& req);

// Append-only JSON-lines cache. Each line holds {key, digest, logprobs, ts};
// on reload the last record for a key wins. A malformed final line (torn
// append) is skipped; malformed interior lines are corruption and throw.
class ScoreCache {
 public:
  explicit ScoreCache(std::string path);

  std::optional<std::vector<double>> lookup(const std::string& key) const;
  void append(const std::string& key, const std::string& digest,
              const std::vector<double>& logprobs);
  std::size_t size() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::vector<double>> entries_;
  std::ofstream out_;
};

// Serves hits from the cache and forwards misses to the inner backend,
// appending fresh results. Counts how many calls reached the inner backend.
class CachedBackend : public Backend {
 public:
  CachedBackend(Backend& inner, ScoreCache& cache);
  ScoreResult score(const ScoreRequest& req) override;
  const std::string& model_id() const override { return inner_.model_id(); }
  const std::string& id() const override { return inner_.id(); }
  std::uint64_t inner_calls() const;
  std::uint64_t cache_hits() const;

 private:
  Backend& inner_;
  ScoreCache& cache_;
  mutable std::mutex counter_mu_;
  std::uint64_t inner_calls_ = 0;
  std::uint64_t cache_hits_ = 0;
};

}  // namespace persim
