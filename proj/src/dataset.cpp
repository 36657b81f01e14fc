#include "cbqg/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cbqg/errors.hpp"
#include "cbqg/rng.hpp"
#include "cbqg/vocab.hpp"

namespace cbqg {

namespace {

constexpr std::array<std::string_view, 29> kQuestionWords{
    "how",   "what",  "can", "is",    "do", "why", "are",   "does",  "where", "when",
    "should", "will", "did", "which", "who", "would", "if", "about", "for",   "as",
    "could", "in",    "after", "at",  "while", "to", "am",  "has",   "any"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw DataError("line " + std::to_string(line_no) + ": missing string field \"" + key + "\"");
  return it->get<std::string>();
}

template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw DataError("line " + std::to_string(line_no) + ": expected a JSON object");
    fn(obj, line_no);
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

std::span<const std::string_view> question_words() { return kQuestionWords; }

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t n = 0;
  bool in_tok = false;
  for (char c : text) {
    const bool sp = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!sp && !in_tok) ++n;
    in_tok = !sp;
  }
  return n;
}

bool is_meaningless_answer(std::string_view answer) {
  const std::string low = lower(trim(answer));
  if (low.starts_with("please refer to")) return true;
  const bool has_url = low.find("http://") != std::string::npos || low.find("https://") != std::string::npos;
  return has_url && whitespace_token_count(low) < 12;
}

std::vector<QAPair> filter_pairs(std::span<const QAPair> pairs, FilterStats* stats) {
  FilterStats local;
  local.input = pairs.size();
  std::vector<QAPair> kept;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    const auto words = word_tokenize(p.question);
    if (words.empty() ||
        std::find(kQuestionWords.begin(), kQuestionWords.end(), words.front()) == kQuestionWords.end()) {
      ++local.dropped_question_word;
      continue;
    }
    if (!trim(p.question).ends_with('?')) {
      ++local.dropped_question_mark;
      continue;
    }
    if (whitespace_token_count(p.answer) < kMinAnswerTokens) {
      ++local.dropped_answer_length;
      continue;
    }
    if (is_meaningless_answer(p.answer)) {
      ++local.dropped_meaningless;
      continue;
    }
    if (!seen.emplace(p.question, p.answer).second) {
      ++local.dropped_duplicate;
      continue;
    }
    kept.push_back(p);
  }
  local.kept = kept.size();
  if (stats) *stats = local;
  return kept;
}

DatasetSplit split_dataset(std::vector<QAPair> pairs, std::uint64_t seed) {
  const std::size_t n = pairs.size();
  if (n < 10) throw ArgumentError("split_dataset: need at least 10 pairs, got " + std::to_string(n));
  Rng rng = Rng::stream(seed, "split");
  for (std::size_t i = n - 1; i > 0; --i) std::swap(pairs[i], pairs[rng.below(i + 1)]);
  const std::size_t n_val = n / 10;
  const std::size_t n_test = n / 10;
  const std::size_t n_train = n - n_val - n_test;
  DatasetSplit split;
  auto first = std::make_move_iterator(pairs.begin());
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(first + static_cast<std::ptrdiff_t>(n_train),
                   first + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(pairs.end()));
  return split;
}

std::vector<QAPair> read_qa_jsonl(std::istream& in) {
  std::vector<QAPair> out;
  for_each_json_line(in, [&](const nlohmann::json& obj, std::size_t line_no) {
    out.push_back({required_string(obj, "question", line_no), required_string(obj, "answer", line_no)});
  });
  return out;
}

std::vector<QAPair> read_qa_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_qa_jsonl(in);
}

std::vector<SummaryRecord> read_summary_jsonl(std::istream& in) {
  std::vector<SummaryRecord> out;
  for_each_json_line(in, [&](const nlohmann::json& obj, std::size_t line_no) {
    SummaryRecord r;
    if (auto it = obj.find("title"); it != obj.end() && it->is_string()) r.title = it->get<std::string>();
    r.summary = required_string(obj, "summary", line_no);
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<SummaryRecord> read_summary_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_summary_jsonl(in);
}

void write_qa_jsonl(std::ostream& out, std::span<const QAPair> pairs) {
  for (const auto& p : pairs) {
    nlohmann::ordered_json obj;
    obj["question"] = p.question;
    obj["answer"] = p.answer;
    out << obj.dump() << '\n';
  }
}

void write_qa_jsonl(const std::filesystem::path& path, std::span<const QAPair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_qa_jsonl(out, pairs);
}

}  // namespace cbqg
