#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cbqg {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static RougeScore from_counts(double hits, double candidate_total, double reference_total);
  bool operator==(const RougeScore&) const = default;
};

/// Lowercase, split on runs of non-alphanumeric ASCII characters.
std::vector<std::string> rouge_tokenize(std::string_view text);

RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n);
RougeScore rouge_l(std::string_view candidate, std::string_view reference);
/// Newline-split union-LCS (summary-level ROUGE-L).
RougeScore rouge_lsum(std::string_view candidate, std::string_view reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
/// Reference positions of one LCS, recovered by the standard backtrack.
std::vector<std::size_t> lcs_reference_positions(std::span<const std::string> reference,
                                                 std::span<const std::string> candidate);

struct CorpusRouge {
  RougeScore rouge1, rouge2, rouge_l, rouge_lsum;
};

struct ExampleRouge {
  RougeScore rouge1, rouge2, rouge_l, rouge_lsum;
};

ExampleRouge score_example(std::string_view candidate, std::string_view reference);

/// Unweighted mean of per-example precision, recall and F1.
CorpusRouge corpus_rouge(std::span<const std::pair<std::string, std::string>> pairs);

}  // namespace cbqg
