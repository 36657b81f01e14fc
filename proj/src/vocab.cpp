#include "cbqg/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "cbqg/errors.hpp"

namespace cbqg {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials{"[PAD]", "[BOS]", "[EOS]", "[CLS]", "[UNK]"};
  return specials;
}

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

std::vector<std::string> word_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& tok : word_tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

Vocab Vocab::build(std::span<const std::string> corpus, std::size_t max_size) {
  if (max_size < kNumSpecials + 1)
    throw ArgumentError("build_vocab: max_size must be at least " + std::to_string(kNumSpecials + 1));
  if (corpus.empty()) throw ArgumentError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& line : corpus)
    for (auto& tok : word_tokenize(line)) ++freq[std::move(tok)];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  // std::map iteration is lexicographic, so a stable sort on count keeps the tie rule.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = special_tokens();
  for (const auto& [tok, count] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < kNumSpecials || !std::equal(specials.begin(), specials.end(), tokens.begin()))
    throw ConfigError("vocab: token table must start with the five special tokens");
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second)
      throw ConfigError("vocab: duplicate token '" + v.tokens_[i] + "'");
  }
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ArgumentError("vocab: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::size_t TokenSequence::content_length() const {
  std::size_t n = ids.size();
  while (n > 0 && ids[n - 1] == kPad) --n;
  return n;
}

TokenSequence encode(std::string_view text, const Vocab& vocab, std::size_t max_len, EncodeMode mode) {
  TokenSequence seq;
  if (mode == EncodeMode::cls_prefixed) seq.ids.push_back(kCls);
  seq.ids.push_back(kBos);
  if (max_len < seq.ids.size())
    throw ArgumentError("encode: max_len " + std::to_string(max_len) + " cannot hold the sequence prefix");
  if (max_len > seq.ids.size()) {
    const std::size_t body_cap = max_len - seq.ids.size() - 1;
    const auto words = word_tokenize(text);
    for (std::size_t i = 0; i < words.size() && i < body_cap; ++i) seq.ids.push_back(vocab.id(words[i]));
    seq.ids.push_back(kEos);
  }
  seq.ids.resize(max_len, kPad);
  return seq;
}

std::string decode(std::span<const int> ids, const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos || id == kCls) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

}  // namespace cbqg
