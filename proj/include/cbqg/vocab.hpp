#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cbqg {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kCls = 3;
inline constexpr int kUnk = 4;
inline constexpr std::size_t kNumSpecials = 5;

/// Lowercased, whitespace-split words with every ASCII punctuation
/// character split off as its own token.
std::vector<std::string> word_tokenize(std::string_view text);

/// Tokens of `text` joined by single spaces.
std::string normalize_text(std::string_view text);

class Vocab {
 public:
  /// Specials plus the (max_size - 5) most frequent words; ties broken
  /// lexicographically.
  static Vocab build(std::span<const std::string> corpus, std::size_t max_size);

  /// Rebuilds a vocabulary from its id-ordered token table (specials first).
  static Vocab from_tokens(std::vector<std::string> tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class EncodeMode { question, answer, cls_prefixed };

/// Fixed-length id sequence: [CLS]? [BOS] body [EOS] [PAD]...
struct TokenSequence {
  std::vector<int> ids;

  std::size_t size() const { return ids.size(); }
  /// Number of leading non-pad ids.
  std::size_t content_length() const;
  bool operator==(const TokenSequence&) const = default;
};

TokenSequence encode(std::string_view text, const Vocab& vocab, std::size_t max_len, EncodeMode mode);

/// Body tokens up to the first [EOS], specials dropped, joined by spaces.
std::string decode(std::span<const int> ids, const Vocab& vocab);

}  // namespace cbqg
