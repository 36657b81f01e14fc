#include "cbqg/rouge.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "cbqg/errors.hpp"

namespace cbqg {

namespace {

using Tokens = std::vector<std::string>;

std::map<Tokens, std::size_t> ngram_counts(const Tokens& toks, std::size_t n) {
  std::map<Tokens, std::size_t> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[Tokens(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

std::vector<std::vector<std::size_t>> lcs_table(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  return t;
}

std::vector<Tokens> split_lines(std::string_view text) {
  std::vector<Tokens> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    Tokens toks = rouge_tokenize(text.substr(start, end - start));
    if (!toks.empty()) out.push_back(std::move(toks));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

}  // namespace

RougeScore RougeScore::from_counts(double hits, double candidate_total, double reference_total) {
  RougeScore s;
  s.precision = candidate_total > 0 ? hits / candidate_total : 0.0;
  s.recall = reference_total > 0 ? hits / reference_total : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

std::vector<std::string> rouge_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n) {
  if (n != 1 && n != 2) throw ArgumentError("rouge_n: n must be 1 or 2");
  const auto cand = ngram_counts(rouge_tokenize(candidate), static_cast<std::size_t>(n));
  const auto ref = ngram_counts(rouge_tokenize(reference), static_cast<std::size_t>(n));
  std::size_t cand_total = 0, ref_total = 0, hits = 0;
  for (const auto& [g, c] : cand) cand_total += c;
  for (const auto& [g, c] : ref) {
    ref_total += c;
    if (auto it = cand.find(g); it != cand.end()) hits += std::min(c, it->second);
  }
  if (cand_total == 0 || ref_total == 0) return {};
  return RougeScore::from_counts(static_cast<double>(hits), static_cast<double>(cand_total),
                                 static_cast<double>(ref_total));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  return lcs_table(a, b)[a.size()][b.size()];
}

std::vector<std::size_t> lcs_reference_positions(std::span<const std::string> reference,
                                                 std::span<const std::string> candidate) {
  const auto t = lcs_table(reference, candidate);
  std::vector<std::size_t> pos;
  std::size_t i = reference.size(), j = candidate.size();
  while (i > 0 && j > 0) {
    if (reference[i - 1] == candidate[j - 1]) {
      pos.push_back(i - 1);
      --i;
      --j;
    } else if (t[i][j - 1] > t[i - 1][j]) {
      --j;
    } else {
      --i;
    }
  }
  std::reverse(pos.begin(), pos.end());
  return pos;
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  const auto cand = rouge_tokenize(candidate);
  const auto ref = rouge_tokenize(reference);
  if (cand.empty() || ref.empty()) return {};
  return RougeScore::from_counts(static_cast<double>(lcs_length(cand, ref)), static_cast<double>(cand.size()),
                                 static_cast<double>(ref.size()));
}

RougeScore rouge_lsum(std::string_view candidate, std::string_view reference) {
  const auto cand_sents = split_lines(candidate);
  const auto ref_sents = split_lines(reference);
  std::map<std::string, std::size_t> cand_counts, ref_counts;
  std::size_t cand_total = 0, ref_total = 0;
  for (const auto& s : cand_sents)
    for (const auto& t : s) ++cand_counts[t], ++cand_total;
  for (const auto& s : ref_sents)
    for (const auto& t : s) ++ref_counts[t], ++ref_total;
  if (cand_total == 0 || ref_total == 0) return {};

  std::size_t hits = 0;
  for (const auto& r : ref_sents) {
    std::set<std::size_t> uni;
    for (const auto& c : cand_sents) {
      const auto pos = lcs_reference_positions(r, c);
      uni.insert(pos.begin(), pos.end());
    }
    // Each matched reference token is consumed once against both sides' counts.
    for (std::size_t p : uni) {
      const std::string& tok = r[p];
      if (cand_counts[tok] > 0 && ref_counts[tok] > 0) {
        --cand_counts[tok];
        --ref_counts[tok];
        ++hits;
      }
    }
  }
  return RougeScore::from_counts(static_cast<double>(hits), static_cast<double>(cand_total),
                                 static_cast<double>(ref_total));
}

ExampleRouge score_example(std::string_view candidate, std::string_view reference) {
  return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2), rouge_l(candidate, reference),
          rouge_lsum(candidate, reference)};
}

CorpusRouge corpus_rouge(std::span<const std::pair<std::string, std::string>> pairs) {
  if (pairs.empty()) throw ArgumentError("corpus_rouge: empty list");
  CorpusRouge acc;
  auto add = [](RougeScore& into, const RougeScore& s) {
    into.precision += s.precision;
    into.recall += s.recall;
    into.f1 += s.f1;
  };
  for (const auto& [cand, ref] : pairs) {
    const ExampleRouge e = score_example(cand, ref);
    add(acc.rouge1, e.rouge1);
    add(acc.rouge2, e.rouge2);
    add(acc.rouge_l, e.rouge_l);
    add(acc.rouge_lsum, e.rouge_lsum);
  }
  const double n = static_cast<double>(pairs.size());
  for (RougeScore* s : {&acc.rouge1, &acc.rouge2, &acc.rouge_l, &acc.rouge_lsum}) {
    s->precision /= n;
    s->recall /= n;
    s->f1 /= n;
  }
  return acc;
}

}  // namespace cbqg
