#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace expctr::prompting {

using TokenId = std::uint32_t;

/// Structural and sentiment tokens occupy the first ids; attribute tokens
/// and title words follow.
///
///   [0, 14)              structural + POS/NEG markers
///   [14, 14+A)           attribute tokens
///   [14+A, 14+A+A*S)     title words, S synonyms per attribute
namespace token {
inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kLiked = 2;
inline constexpr TokenId kDisliked = 3;
inline constexpr TokenId kTarget = 4;
inline constexpr TokenId kExplain = 5;
inline constexpr TokenId kThought = 6;
inline constexpr TokenId kQuery = 7;
inline constexpr TokenId kYes = 8;
inline constexpr TokenId kNo = 9;
inline constexpr TokenId kSep = 10;
inline constexpr TokenId kPad = 11;
inline constexpr TokenId kPos = 12;
inline constexpr TokenId kNeg = 13;
inline constexpr TokenId kFirstContent = 14;
}  // namespace token

class Vocabulary {
 public:
  Vocabulary(std::size_t attributes, std::size_t synonyms_per_attribute);

  std::size_t size() const noexcept { return token::kFirstContent + attributes_ * (1 + synonyms_); }
  std::size_t attributes() const noexcept { return attributes_; }
  std::size_t synonyms() const noexcept { return synonyms_; }

  TokenId attribute(std::size_t a) const;
  TokenId title_word(std::size_t a, std::size_t synonym) const;

  bool is_attribute(TokenId t) const noexcept;
  bool is_title_word(TokenId t) const noexcept;
  std::size_t attribute_of(TokenId t) const;
  bool contains(TokenId t) const noexcept { return t < size(); }

  std::string name(TokenId t) const;

 private:
  std::size_t attributes_;
  std::size_t synonyms_;
};

}  // namespace expctr::prompting
