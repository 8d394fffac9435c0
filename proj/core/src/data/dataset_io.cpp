#include "expctr/data/dataset_io.hpp"

#include <fstream>
#include <json.hpp>

#include "expctr/error.hpp"

namespace expctr::data {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  return in;
}

template <class Fn>
void for_each_line(const std::filesystem::path& path, Fn fn) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

void write_samples(const std::filesystem::path& path, const std::vector<InteractionSample>& samples) {
  std::ofstream out = open_out(path);
  for (const InteractionSample& s : samples) {
    json j = {{"user", s.user},         {"target_item", s.target_item},
              {"liked", s.liked},       {"disliked", s.disliked},
              {"label", s.label},       {"rating", s.target_rating},
              {"oracle_explanation", s.oracle_explanation}};
    out << j.dump() << '\n';
  }
}

std::vector<InteractionSample> read_samples(const std::filesystem::path& path) {
  std::vector<InteractionSample> samples;
  for_each_line(path, [&](const json& j) {
    InteractionSample s;
    s.user = j.at("user").get<std::uint32_t>();
    s.target_item = j.at("target_item").get<std::uint32_t>();
    s.liked = j.at("liked").get<std::vector<std::uint32_t>>();
    s.disliked = j.at("disliked").get<std::vector<std::uint32_t>>();
    s.label = j.at("label").get<int>();
    s.target_rating = j.value("rating", 0);
    s.oracle_explanation = j.at("oracle_explanation").get<std::vector<TokenId>>();
    if (s.label != 0 && s.label != 1) throw ValidationError(path.string() + ": label must be 0 or 1");
    samples.push_back(std::move(s));
  });
  return samples;
}

void write_world(const std::filesystem::path& path, const World& world) {
  json items = json::array();
  for (const Item& it : world.items) items.push_back({{"id", it.id}, {"attributes", it.attributes}, {"title", it.title}});
  json users = json::array();
  for (const UserProfile& u : world.users) users.push_back({{"id", u.id}, {"preferences", u.preferences}});
  json j = {{"attributes", world.attributes},
            {"title_synonyms", world.title_synonyms},
            {"items", std::move(items)},
            {"users", std::move(users)}};
  std::ofstream out = open_out(path);
  out << j.dump() << '\n';
}

World read_world(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    const json j = json::parse(in);
    World w;
    w.attributes = j.at("attributes").get<std::size_t>();
    w.title_synonyms = j.at("title_synonyms").get<std::size_t>();
    for (const json& it : j.at("items")) {
      Item item;
      item.id = it.at("id").get<std::uint32_t>();
      item.attributes = it.at("attributes").get<std::vector<std::uint32_t>>();
      item.title = it.at("title").get<std::vector<TokenId>>();
      if (item.id != w.items.size()) throw ValidationError(path.string() + ": item ids must be dense and ordered");
      w.items.push_back(std::move(item));
    }
    for (const json& ju : j.at("users")) {
      UserProfile u;
      u.id = ju.at("id").get<std::uint32_t>();
      u.preferences = ju.at("preferences").get<std::vector<double>>();
      if (u.id != w.users.size()) throw ValidationError(path.string() + ": user ids must be dense and ordered");
      if (u.preferences.size() != w.attributes) throw ValidationError(path.string() + ": preference length mismatch");
      w.users.push_back(std::move(u));
    }
    return w;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_interactions(const std::filesystem::path& path, const std::vector<Interaction>& interactions) {
  std::ofstream out = open_out(path);
  for (const Interaction& x : interactions) {
    json j = {{"user", x.user},
              {"item", x.item},
              {"rating", x.rating},
              {"timestamp", x.timestamp},
              {"oracle_explanation", x.oracle_explanation}};
    out << j.dump() << '\n';
  }
}

std::vector<Interaction> read_interactions(const std::filesystem::path& path) {
  std::vector<Interaction> log;
  for_each_line(path, [&](const json& j) {
    Interaction x;
    x.user = j.at("user").get<std::uint32_t>();
    x.item = j.at("item").get<std::uint32_t>();
    x.rating = j.at("rating").get<int>();
    x.timestamp = j.at("timestamp").get<std::int64_t>();
    x.oracle_explanation = j.at("oracle_explanation").get<std::vector<TokenId>>();
    log.push_back(std::move(x));
  });
  return log;
}

}  // namespace expctr::data
