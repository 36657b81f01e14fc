#pragma once

// Synthetic QA corpus construction: every summary sentence becomes an
// answer and the trained question generator supplies its question.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbqg/checkpoint.hpp"
#include "cbqg/dataset.hpp"
#include "cbqg/model.hpp"

namespace cbqg {

inline constexpr std::size_t kMinSentenceTokens = 4;

/// Splits after '.', '!' or '?' when followed by whitespace or end of text.
/// Terminators stay with their sentence; fragments are trimmed and empty
/// ones dropped.
std::vector<std::string> split_sentences(std::string_view text);

struct SynthReport {
  std::size_t input_summaries = 0;
  std::size_t sentences_extracted = 0;
  std::size_t sentences_skipped = 0;  // shorter than kMinSentenceTokens
  std::size_t empty_questions = 0;    // generator produced no tokens
  std::size_t pairs_emitted = 0;

  nlohmann::ordered_json to_json() const;
};

/// A question generator restored from a checkpoint.
class QuestionGenerator {
 public:
  explicit QuestionGenerator(const Checkpoint& ckpt);

  /// Throws ArgumentError on an empty answer.
  std::string generate(std::string_view answer) const;
  std::vector<std::string> generate(std::span<const std::string> answers) const;

  const Seq2Seq& model() const { return model_; }
  const Vocab& vocab() const { return vocab_; }

 private:
  Vocab vocab_;
  Seq2Seq model_;
};

std::string generate_question(std::string_view answer, const QuestionGenerator& qg);

/// One pair per kept sentence, in article then sentence order.
std::vector<QAPair> build_synthetic_corpus(std::span<const SummaryRecord> summaries, const QuestionGenerator& qg,
                                           SynthReport* report = nullptr);

}  // namespace cbqg
