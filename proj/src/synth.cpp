#include "cbqg/synth.hpp"

#include <cctype>

#include "cbqg/errors.hpp"
#include "cbqg/generation.hpp"

namespace cbqg {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trimmed(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

bool blank(std::string_view s) {
  for (char c : s)
    if (!is_space(c)) return false;
  return true;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || is_space(text[i + 1]))) {
      std::string s = trimmed(text.substr(start, i + 1 - start));
      if (!s.empty()) out.push_back(std::move(s));
      start = i + 1;
    }
  }
  if (start < text.size()) {
    std::string s = trimmed(text.substr(start));
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

nlohmann::ordered_json SynthReport::to_json() const {
  nlohmann::ordered_json j;
  j["input_summaries"] = input_summaries;
  j["sentences_extracted"] = sentences_extracted;
  j["sentences_skipped"] = sentences_skipped;
  j["empty_questions"] = empty_questions;
  j["pairs_emitted"] = pairs_emitted;
  return j;
}

QuestionGenerator::QuestionGenerator(const Checkpoint& ckpt) : vocab_(ckpt.vocab), model_(ckpt.instantiate()) {
  if (ckpt.task != Task::question_generation)
    throw ConfigError("question generator: checkpoint was trained for task '" + std::string(to_string(ckpt.task)) +
                          "'",
                      "checkpoint");
  model_.set_trainable(false);
}

std::string QuestionGenerator::generate(std::string_view answer) const {
  if (blank(answer)) throw ArgumentError("generate_question: empty answer");
  const std::string a(answer);
  return generate_texts(model_, vocab_, Task::question_generation, std::span(&a, 1)).front();
}

std::vector<std::string> QuestionGenerator::generate(std::span<const std::string> answers) const {
  for (const auto& a : answers)
    if (blank(a)) throw ArgumentError("generate_question: empty answer");
  return generate_texts(model_, vocab_, Task::question_generation, answers);
}

std::string generate_question(std::string_view answer, const QuestionGenerator& qg) { return qg.generate(answer); }

std::vector<QAPair> build_synthetic_corpus(std::span<const SummaryRecord> summaries, const QuestionGenerator& qg,
                                           SynthReport* report) {
  SynthReport r;
  r.input_summaries = summaries.size();
  std::vector<std::string> answers;
  for (const auto& s : summaries) {
    for (auto& sentence : split_sentences(s.summary)) {
      ++r.sentences_extracted;
      if (whitespace_token_count(sentence) < kMinSentenceTokens) {
        ++r.sentences_skipped;
        continue;
      }
      answers.push_back(std::move(sentence));
    }
  }
  const auto questions = qg.generate(answers);
  std::vector<QAPair> out;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (blank(questions[i])) {
      ++r.empty_questions;
      continue;
    }
    out.push_back({questions[i], answers[i]});
  }
  r.pairs_emitted = out.size();
  if (report) *report = r;
  return out;
}

}  // namespace cbqg
