#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cqa {

inline constexpr std::size_t kDefaultMaxLen = 100;

// A preprocessed document. `ids` and `overlaps` are filled by later stages
// and, once filled, have the same length as `tokens`.
struct TokenizedText {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> overlaps;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

// Lowercases, splits on whitespace and peels leading/trailing punctuation
// into single-character tokens. Subject tokens come first; the result is
// truncated to the first `max_len` tokens.
TokenizedText preprocess(std::optional<std::string_view> subject, std::string_view body,
                         std::size_t max_len = kDefaultMaxLen);

// Token list only; same rules as preprocess() without truncation.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  // Tokens in id order, excluding the reserved ids. Throws DataError on
  // duplicates.
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  std::int32_t lookup(std::string_view token) const;
  std::optional<std::int32_t> find(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const { return tokens_.size(); }

  // All entries including <pad> and <unk>, in id order.
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Fills text.ids from text.tokens.
  void assign_ids(TokenizedText& text) const;

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// Every token seen at least `min_count` times. Ids are assigned by
// descending frequency, ties broken lexicographically.
Vocabulary build_vocabulary(std::span<const TokenizedText> corpus, std::size_t min_count = 1);

// Position j is 1 iff target.tokens[j] appears in any of `others`. The
// <pad> placeholder never overlaps.
std::vector<std::uint8_t> overlap_indicators(const TokenizedText& target,
                                             std::span<const TokenizedText* const> others);

}  // namespace cqa
