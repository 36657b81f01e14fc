#pragma once

// Scratch directories and toy JSONL corpora for CLI-level tests. Records pass
// the dataset filter: questions open with "what" and end in "?", answers have
// at least 8 words.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbqg/rng.hpp"

namespace cbqg::testing {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cbqg-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream f(path);
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(f, line);)
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

inline std::vector<std::size_t> toy_words(Rng& rng, std::size_t min_len, std::size_t max_len) {
  std::vector<std::size_t> w(min_len + rng.below(max_len - min_len + 1));
  for (auto& x : w) x = rng.below(12);
  return w;
}

/// "what b.. ?" / "a.. a.." records; the question copies the answer word by word.
inline std::string toy_qa_jsonl(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "toy");
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string q = "what", a;
    for (std::size_t w : toy_words(rng, 8, 10)) {
      q += " b" + std::to_string(w);
      a += (a.empty() ? "a" : " a") + std::to_string(w);
    }
    out += nlohmann::json{{"question", q + " ?"}, {"answer", a}}.dump() + "\n";
  }
  return out;
}

/// Summaries of `sentences` toy sentences each, every sentence 8..10 words.
inline std::string toy_summaries_jsonl(std::size_t n, std::size_t sentences, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "toy");
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    for (std::size_t k = 0; k < sentences; ++k) {
      std::string sent;
      for (std::size_t w : toy_words(rng, 8, 10)) sent += (sent.empty() ? "a" : " a") + std::to_string(w);
      s += (s.empty() ? "" : " ") + sent + ".";
    }
    out += nlohmann::json{{"title", "s" + std::to_string(i)}, {"summary", s}}.dump() + "\n";
  }
  return out;
}

/// Config JSON with the toy architecture (d_model 32, one layer).
inline nlohmann::json toy_config_json(int epochs, double lambda_cl = 0.1, double lambda_ar = 0.1) {
  return {{"model",
           {{"num_layers", 1},
            {"d_model", 32},
            {"num_heads", 4},
            {"ffn_dim", 64},
            {"vocab_size", 64},
            {"max_src_len", 32},
            {"max_tgt_len", 32},
            {"dropout_rate", 0.1}}},
          {"train",
           {{"lambda_qg", 1.0},
            {"lambda_cl", lambda_cl},
            {"lambda_ar", lambda_ar},
            {"learning_rate", 0.003},
            {"epochs", epochs},
            {"batch_size", 16},
            {"tau_cl", 0.3},
            {"tau_gs", 1.0},
            {"cl_strategy", "cl_t"},
            {"ar_enabled", true},
            {"seed", 0}}}};
}

}  // namespace cbqg::testing
