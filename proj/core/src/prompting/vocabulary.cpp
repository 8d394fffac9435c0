#include "expctr/prompting/vocabulary.hpp"

#include <array>

#include "expctr/error.hpp"

namespace expctr::prompting {

Vocabulary::Vocabulary(std::size_t attributes, std::size_t synonyms_per_attribute)
    : attributes_(attributes), synonyms_(synonyms_per_attribute) {
  if (attributes == 0) throw ValidationError("vocabulary: need at least one attribute");
  if (synonyms_per_attribute == 0) throw ValidationError("vocabulary: need at least one title word per attribute");
}

TokenId Vocabulary::attribute(std::size_t a) const {
  if (a >= attributes_) throw ValidationError("vocabulary: attribute " + std::to_string(a) + " out of range");
  return static_cast<TokenId>(token::kFirstContent + a);
}

TokenId Vocabulary::title_word(std::size_t a, std::size_t synonym) const {
  if (a >= attributes_ || synonym >= synonyms_) throw ValidationError("vocabulary: title word out of range");
  return static_cast<TokenId>(token::kFirstContent + attributes_ + a * synonyms_ + synonym);
}

bool Vocabulary::is_attribute(TokenId t) const noexcept {
  return t >= token::kFirstContent && t < token::kFirstContent + attributes_;
}

bool Vocabulary::is_title_word(TokenId t) const noexcept {
  return t >= token::kFirstContent + attributes_ && t < size();
}

std::size_t Vocabulary::attribute_of(TokenId t) const {
  if (is_attribute(t)) return t - token::kFirstContent;
  if (is_title_word(t)) return (t - token::kFirstContent - attributes_) / synonyms_;
  throw ValidationError("vocabulary: token " + std::to_string(t) + " carries no attribute");
}

std::string Vocabulary::name(TokenId t) const {
  static constexpr std::array<const char*, token::kFirstContent> kNames = {
      "<bos>", "<eos>", "<liked>", "<disliked>", "<target>", "<explain>", "<thought>",
      "<query>", "<yes>", "<no>", "<sep>", "<pad>", "+", "-"};
  if (t < token::kFirstContent) return kNames[t];
  if (is_attribute(t)) return "a" + std::to_string(attribute_of(t));
  if (is_title_word(t)) {
    const std::size_t offset = t - token::kFirstContent - attributes_;
    return "w" + std::to_string(offset / synonyms_) + "." + std::to_string(offset % synonyms_);
  }
  return "<unk:" + std::to_string(t) + ">";
}

}  // namespace expctr::prompting
