#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "expctr/prompting/vocabulary.hpp"

namespace expctr::data {

using prompting::TokenId;

struct WorldConfig {
  std::size_t n_users = 2500;
  std::size_t n_items = 300;
  std::size_t attributes = 12;
  std::size_t attributes_per_item = 3;
  std::size_t title_synonyms = 1;
  // Preference weights are sign * U(low, high).
  double preference_low = 0.5;
  double preference_high = 1.5;
  // Signs follow one of `archetypes` patterns, drawn as antipodal pairs so
  // the weight distribution stays zero-mean; each sign then flips with
  // probability `sign_flip`. Zero archetypes means independent fair signs.
  std::size_t archetypes = 0;
  double sign_flip = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Item {
  std::uint32_t id = 0;
  std::vector<std::uint32_t> attributes;  // sorted attribute indices
  std::vector<TokenId> title;
};

struct UserProfile {
  std::uint32_t id = 0;
  std::vector<double> preferences;  // one weight per attribute index
};

struct World {
  std::size_t attributes = 0;
  std::size_t title_synonyms = 0;
  std::vector<Item> items;
  std::vector<UserProfile> users;

  prompting::Vocabulary vocabulary() const { return {attributes, title_synonyms}; }
  const Item& item(std::uint32_t id) const;
  const UserProfile& user(std::uint32_t id) const;
};

World generate_world(const WorldConfig& cfg);

/// Mean preference weight over the item's attributes, without noise.
double affinity(const UserProfile& user, const Item& item);

/// [attribute, marker] per item attribute, in attribute order.
std::vector<TokenId> oracle_explanation(const UserProfile& user, const Item& item,
                                        const prompting::Vocabulary& vocab);

/// Independent stream from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace expctr::data
