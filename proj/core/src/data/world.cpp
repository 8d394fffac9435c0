#include "expctr/data/world.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "expctr/error.hpp"

namespace expctr::data {

void WorldConfig::validate() const {
  if (n_users == 0 || n_items == 0 || attributes == 0 || attributes_per_item == 0 || title_synonyms == 0)
    throw ValidationError("world: all counts must be positive");
  if (attributes_per_item >= attributes)
    throw ValidationError("world: attributes_per_item (" + std::to_string(attributes_per_item) +
                          ") must be smaller than attributes (" + std::to_string(attributes) + ")");
  if (!(preference_low >= 0.0 && preference_high > preference_low))
    throw ValidationError("world: need 0 <= preference_low < preference_high");
  if (archetypes % 2 != 0) throw ValidationError("world: archetypes must be even (antipodal pairs)");
  if (!(sign_flip >= 0.0 && sign_flip <= 0.5)) throw ValidationError("world: sign_flip must lie in [0, 0.5]");
}

const Item& World::item(std::uint32_t id) const {
  if (id >= items.size()) throw ValidationError("world: unknown item " + std::to_string(id));
  return items[id];
}

const UserProfile& World::user(std::uint32_t id) const {
  if (id >= users.size()) throw ValidationError("world: unknown user " + std::to_string(id));
  return users[id];
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finaliser
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  World world;
  world.attributes = cfg.attributes;
  world.title_synonyms = cfg.title_synonyms;
  const prompting::Vocabulary vocab = world.vocabulary();

  std::mt19937_64 item_rng(derive_seed(cfg.seed, 0));
  std::vector<std::uint32_t> pool(cfg.attributes);
  std::iota(pool.begin(), pool.end(), 0u);
  std::uniform_int_distribution<std::size_t> synonym(0, cfg.title_synonyms - 1);
  world.items.resize(cfg.n_items);
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    Item& item = world.items[i];
    item.id = static_cast<std::uint32_t>(i);
    // partial Fisher-Yates
    for (std::size_t k = 0; k < cfg.attributes_per_item; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, cfg.attributes - 1);
      std::swap(pool[k], pool[pick(item_rng)]);
    }
    item.attributes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.attributes_per_item));
    std::sort(item.attributes.begin(), item.attributes.end());
    for (std::uint32_t a : item.attributes) item.title.push_back(vocab.title_word(a, synonym(item_rng)));
  }

  std::mt19937_64 user_rng(derive_seed(cfg.seed, 1));
  std::uniform_real_distribution<double> magnitude(cfg.preference_low, cfg.preference_high);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution flip(cfg.sign_flip);
  std::vector<std::vector<int>> patterns(cfg.archetypes, std::vector<int>(cfg.attributes));
  for (std::size_t c = 0; c < cfg.archetypes / 2; ++c) {
    for (std::size_t a = 0; a < cfg.attributes; ++a) {
      patterns[2 * c][a] = coin(user_rng) ? 1 : -1;
      patterns[2 * c + 1][a] = -patterns[2 * c][a];
    }
  }
  std::uniform_int_distribution<std::size_t> archetype(0, cfg.archetypes ? cfg.archetypes - 1 : 0);
  world.users.resize(cfg.n_users);
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    UserProfile& user = world.users[u];
    user.id = static_cast<std::uint32_t>(u);
    user.preferences.resize(cfg.attributes);
    const std::vector<int>* pattern = cfg.archetypes ? &patterns[archetype(user_rng)] : nullptr;
    for (std::size_t a = 0; a < cfg.attributes; ++a) {
      int sign = pattern ? (*pattern)[a] : (coin(user_rng) ? 1 : -1);
      if (pattern && flip(user_rng)) sign = -sign;
      user.preferences[a] = sign * magnitude(user_rng);
    }
  }
  return world;
}

double affinity(const UserProfile& user, const Item& item) {
  double total = 0.0;
  for (std::uint32_t a : item.attributes) total += user.preferences.at(a);
  return total / static_cast<double>(item.attributes.size());
}

std::vector<TokenId> oracle_explanation(const UserProfile& user, const Item& item,
                                        const prompting::Vocabulary& vocab) {
  std::vector<TokenId> out;
  out.reserve(2 * item.attributes.size());
  for (std::uint32_t a : item.attributes) {
    out.push_back(vocab.attribute(a));
    out.push_back(user.preferences.at(a) > 0.0 ? prompting::token::kPos : prompting::token::kNeg);
  }
  return out;
}

}  // namespace expctr::data
