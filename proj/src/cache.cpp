#include "persim/cache.hpp"

#include <chrono>
#include <sstream>

#include "json.hpp"
#include "persim/errors.hpp"
#include "persim/util.hpp"

namespace persim {

using nlohmann::json;

namespace {

// name=<decimal length>:<bytes>\n  -- length prefixes make the encoding
// injective, so distinct requests can never collide textually.
void put_field(std::string& out, std::string_view name, std::string_view value) {
  out.append(name);
  out.push_back('=');
  out.append(std::to_string(value.size()));
  out.push_back(':');
  out.append(value);
  out.push_back('\n');
}

}  // namespace

std::string score_cache_key(const ScoreRequest& req) {
  std::string canon;
  put_field(canon, "model", req.model_id);
  put_field(canon, "system", req.bundle.system_text);
  put_field(canon, "user", req.bundle.user_text);
  std::string cands;
  for (const std::string& c : req.candidates) put_field(cands, "c", c);
  put_field(canon, "candidates", cands);
  std::string params;
  for (const auto& [k, v] : req.decode_params) put_field(params, k, format_double(v));
  put_field(canon, "params", params);
  return sha256_hex(canon);
}

std::string score_cache_digest(const ScoreRequest& req) {
  return req.model_id + "|" + req.bundle.question_id + "|" +
         std::to_string(req.candidates.size()) + " candidates";
}

ScoreCache::ScoreCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (in) {
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      json j;
      try {
        j = json::parse(line);
        const std::string key = j.at("key").get<std::string>();
        entries_[key] = j.at("logprobs").get<std::vector<double>>();
      } catch (const json::exception& e) {
        // An interrupted append can leave one torn record at the end of the
        // file; anything earlier is corruption and must not pass silently.
        if (in.peek() == EOF) break;
        throw ParseError(path_, line_no, 1, std::string("bad cache record: ") + e.what());
      }
    }
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open cache for appending: " + path_);
}

std::optional<std::vector<double>> ScoreCache::lookup(const std::string& key) const {
  std::shared_lock<std::shared_mutex> lk(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::append(const std::string& key, const std::string& digest,
                        const std::vector<double>& logprobs) {
  const auto ts = std::chrono::duration_cast<std::chrono::seconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  json record{{"key", key}, {"digest", digest}, {"logprobs", logprobs}, {"ts", ts}};
  std::unique_lock<std::shared_mutex> lk(mu_);
  entries_[key] = logprobs;
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw Error("cache append failed: " + path_);
}

std::size_t ScoreCache::size() const {
  std::shared_lock<std::shared_mutex> lk(mu_);
  return entries_.size();
}

CachedBackend::CachedBackend(Backend& inner, ScoreCache& cache) : inner_(inner), cache_(cache) {}

ScoreResult CachedBackend::score(const ScoreRequest& req) {
  validate_request(req);
  const std::string key = score_cache_key(req);
  if (auto hit = cache_.lookup(key)) {
    {
      std::lock_guard<std::mutex> lk(counter_mu_);
      ++cache_hits_;
    }
    ScoreResult res;
    res.logprobs = std::move(*hit);
    res.backend_id = inner_.id();
    res.cached = true;
    return res;
  }
  ScoreResult res = inner_.score(req);
  {
    std::lock_guard<std::mutex> lk(counter_mu_);
    ++inner_calls_;
  }
  cache_.append(key, score_cache_digest(req), res.logprobs);
  res.cached = false;
  return res;
}

std::uint64_t CachedBackend::inner_calls() const {
  std::lock_guard<std::mutex> lk(counter_mu_);
  return inner_calls_;
}

std::uint64_t CachedBackend::cache_hits() const {
  std::lock_guard<std::mutex> lk(counter_mu_);
  return cache_hits_;
}

}  // namespace persim
