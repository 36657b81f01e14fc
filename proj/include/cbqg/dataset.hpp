#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cbqg {

struct QAPair {
  std::string question;
  std::string answer;
  bool operator==(const QAPair&) const = default;
};

struct SummaryRecord {
  std::string title;
  std::string summary;
};

struct DatasetSplit {
  std::vector<QAPair> train;
  std::vector<QAPair> val;
  std::vector<QAPair> test;
};

/// Per-rule drop counts. A pair is charged to the first rule it fails, in
/// declaration order.
struct FilterStats {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t dropped_question_word = 0;
  std::size_t dropped_question_mark = 0;
  std::size_t dropped_answer_length = 0;
  std::size_t dropped_meaningless = 0;
  std::size_t dropped_duplicate = 0;
};

inline constexpr std::size_t kMinAnswerTokens = 8;

/// Words a kept question may start with.
std::span<const std::string_view> question_words();

std::size_t whitespace_token_count(std::string_view text);

/// URL-only or "please refer to ..." answers.
bool is_meaningless_answer(std::string_view answer);

std::vector<QAPair> filter_pairs(std::span<const QAPair> pairs, FilterStats* stats = nullptr);

/// Seeded Fisher-Yates shuffle, then a contiguous cut:
/// val = test = floor(n / 10), train = the rest.
DatasetSplit split_dataset(std::vector<QAPair> pairs, std::uint64_t seed);

// JSON-lines I/O. Malformed lines throw DataError naming the line number;
// unreadable files throw IoError.
std::vector<QAPair> read_qa_jsonl(std::istream& in);
std::vector<QAPair> read_qa_jsonl(const std::filesystem::path& path);
std::vector<SummaryRecord> read_summary_jsonl(std::istream& in);
std::vector<SummaryRecord> read_summary_jsonl(const std::filesystem::path& path);
void write_qa_jsonl(std::ostream& out, std::span<const QAPair> pairs);
void write_qa_jsonl(const std::filesystem::path& path, std::span<const QAPair> pairs);

}  // namespace cbqg
