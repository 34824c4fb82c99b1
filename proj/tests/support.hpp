#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "persim/dataset.hpp"
#include "persim/distribution.hpp"

namespace support {

inline std::string data_dir() { return PERSIM_DATA_DIR; }

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
      auto candidate = base / (tag + "-" + std::to_string(rd()));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("TempDir: could not create scratch directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Four-point importance item matching the shipped catalog's Q6.
inline persim::QuestionSpec q4(const std::string& id = "Q6") {
  persim::QuestionSpec q;
  q.id = id;
  q.text = "How important is Religion in your life?";
  q.scale_min = 1;
  q.scale_max = 4;
  q.labels = {{1, "Very important"},
              {2, "Rather important"},
              {3, "Not very important"},
              {4, "Not at all important"}};
  return q;
}

inline persim::QuestionSpec q_scale(const std::string& id, int lo, int hi) {
  persim::QuestionSpec q;
  q.id = id;
  q.text = "Synthetic item " + id;
  q.scale_min = lo;
  q.scale_max = hi;
  return q;
}

// Distribution over lo..lo+probs.size()-1.
inline persim::ResponseDistribution dist(const std::string& qid, int lo,
                                         const std::vector<double>& probs) {
  std::vector<int> options(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) options[i] = lo + static_cast<int>(i);
  return persim::ResponseDistribution::make(qid, options, probs);
}

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr, interleaved
};

// Runs the installed CLI binary with `args`, capturing combined output.
inline CliResult run_cli(const std::string& args, const std::string& workdir = "") {
  std::string cmd;
  if (!workdir.empty()) cmd += "cd '" + workdir + "' && ";
  cmd += std::string("'") + PERSIM_CLI_PATH + "' " + args + " 2>&1";
  CliResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return result;
  std::array<char, 4096> buf;
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    result.output.append(buf.data(), got);
  }
  const int status = pclose(pipe);
  result.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  return result;
}

}  // namespace support
