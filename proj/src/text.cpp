#include "cqa/text.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include "cqa/error.hpp"

namespace cqa {
namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

// Length in bytes of the whitespace sequence starting at `pos`, or 0.
// Covers ASCII whitespace and the Unicode space separators commonly found
// in forum text.
std::size_t whitespace_length(std::string_view s, std::size_t pos) {
  const auto c = static_cast<unsigned char>(s[pos]);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return 1;
  auto byte = [&](std::size_t i) -> unsigned {
    return pos + i < s.size() ? static_cast<unsigned char>(s[pos + i]) : 0u;
  };
  if (c == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) return 2;  // NEL, NBSP
  if (c == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;   // U+1680
  if (c == 0xE2 && byte(1) == 0x80) {
    const unsigned b = byte(2);
    if ((b >= 0x80 && b <= 0x8A) || b == 0xA8 || b == 0xA9 || b == 0xAF) return 3;
  }
  if (c == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

void emit_word(std::string_view word, std::vector<std::string>& out) {
  std::size_t begin = 0;
  std::size_t end = word.size();
  while (begin < end && is_ascii_punct(static_cast<unsigned char>(word[begin]))) {
    out.emplace_back(1, word[begin]);
    ++begin;
  }
  std::size_t trail = end;
  while (trail > begin && is_ascii_punct(static_cast<unsigned char>(word[trail - 1]))) --trail;
  if (trail > begin) {
    std::string core(word.substr(begin, trail - begin));
    std::transform(core.begin(), core.end(), core.begin(), [](unsigned char c) {
      return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    });
    out.push_back(std::move(core));
  }
  for (std::size_t i = trail; i < end; ++i) out.emplace_back(1, word[i]);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  std::size_t word_start = 0;
  while (pos < text.size()) {
    const std::size_t ws = whitespace_length(text, pos);
    if (ws == 0) {
      ++pos;
      continue;
    }
    if (pos > word_start) emit_word(text.substr(word_start, pos - word_start), out);
    pos += ws;
    word_start = pos;
  }
  if (pos > word_start) emit_word(text.substr(word_start, pos - word_start), out);
  return out;
}

TokenizedText preprocess(std::optional<std::string_view> subject, std::string_view body,
                         std::size_t max_len) {
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  TokenizedText text;
  if (subject) text.tokens = tokenize(*subject);
  auto body_tokens = tokenize(body);
  text.tokens.insert(text.tokens.end(), std::make_move_iterator(body_tokens.begin()),
                     std::make_move_iterator(body_tokens.end()));
  if (text.tokens.size() > max_len) text.tokens.resize(max_len);
  return text;
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

void Vocabulary::add(std::string token) {
  const auto id = static_cast<std::int32_t>(tokens_.size());
  if (!index_.emplace(token, id).second) throw DataError("duplicate vocabulary entry: " + token);
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary vocab;
  for (const auto& t : tokens) vocab.add(t);
  return vocab;
}

std::int32_t Vocabulary::lookup(std::string_view token) const {
  return find(token).value_or(kUnk);
}

std::optional<std::int32_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DimensionError("vocabulary id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::assign_ids(TokenizedText& text) const {
  text.ids.resize(text.tokens.size());
  for (std::size_t i = 0; i < text.tokens.size(); ++i) text.ids[i] = lookup(text.tokens[i]);
}

Vocabulary build_vocabulary(std::span<const TokenizedText> corpus, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus)
    for (const auto& tok : text.tokens) ++counts[tok];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != Vocabulary::kPadToken && tok != Vocabulary::kUnkToken)
      kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> ordered;
  ordered.reserve(kept.size());
  for (auto& entry : kept) ordered.push_back(std::move(entry.first));
  return Vocabulary::from_tokens(ordered);
}

std::vector<std::uint8_t> overlap_indicators(const TokenizedText& target,
                                             std::span<const TokenizedText* const> others) {
  std::unordered_set<std::string_view> seen;
  for (const auto* other : others)
    for (const auto& tok : other->tokens) seen.insert(tok);
  seen.erase(Vocabulary::kPadToken);
  std::vector<std::uint8_t> out(target.tokens.size(), 0);
  for (std::size_t j = 0; j < target.tokens.size(); ++j)
    out[j] = seen.contains(target.tokens[j]) ? 1 : 0;
  return out;
}

}  // namespace cqa
