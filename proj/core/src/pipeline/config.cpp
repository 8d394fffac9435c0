#include "expctr/pipeline/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "expctr/error.hpp"
#include "expctr/io/csv.hpp"
#include "expctr/prompting/vocabulary.hpp"

namespace expctr::pipeline {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* expected) {
  throw ValidationError("config: " + key + " = '" + value + "' is not " + expected);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) bad(key, value, "a non-negative integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) bad(key, value, "a number");
  return out;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad(key, value, "true or false");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) bad(key, value, "a non-empty comma-separated list");
  return out;
}

std::string show(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + io::format_double(v[k]);
  return out;
}

struct Binding {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define EXPCTR_SIZE(KEY, FIELD)                                                          \
  Binding {                                                                              \
    KEY, [](const RunConfig& c) { return std::to_string(c.FIELD); },                     \
        [](RunConfig& c, const std::string& v) { c.FIELD = parse_integer<std::size_t>(KEY, v); } \
  }
#define EXPCTR_SEED(KEY, FIELD)                                                            \
  Binding {                                                                                \
    KEY, [](const RunConfig& c) { return std::to_string(c.FIELD); },                       \
        [](RunConfig& c, const std::string& v) { c.FIELD = parse_integer<std::uint64_t>(KEY, v); } \
  }
#define EXPCTR_REAL(KEY, FIELD)                                                     \
  Binding {                                                                         \
    KEY, [](const RunConfig& c) { return io::format_double(c.FIELD); },             \
        [](RunConfig& c, const std::string& v) { c.FIELD = parse_real(KEY, v); }    \
  }
#define EXPCTR_FLAG(KEY, FIELD)                                                          \
  Binding {                                                                              \
    KEY, [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); },     \
        [](RunConfig& c, const std::string& v) { c.FIELD = parse_flag(KEY, v); }         \
  }
#define EXPCTR_LIST(KEY, FIELD)                                                     \
  Binding {                                                                         \
    KEY, [](const RunConfig& c) { return show(c.FIELD); },                          \
        [](RunConfig& c, const std::string& v) { c.FIELD = parse_list(KEY, v); }    \
  }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      EXPCTR_SIZE("world.users", world.n_users),
      EXPCTR_SIZE("world.items", world.n_items),
      EXPCTR_SIZE("world.attributes", world.attributes),
      EXPCTR_SIZE("world.attributes_per_item", world.attributes_per_item),
      EXPCTR_SIZE("world.title_synonyms", world.title_synonyms),
      EXPCTR_REAL("world.preference_low", world.preference_low),
      EXPCTR_REAL("world.preference_high", world.preference_high),
      EXPCTR_SIZE("world.archetypes", world.archetypes),
      EXPCTR_REAL("world.sign_flip", world.sign_flip),
      EXPCTR_SEED("world.seed", world.seed),
      EXPCTR_SIZE("interactions.per_user", interactions.per_user_count),
      EXPCTR_REAL("interactions.noise", interactions.noise_scale),
      EXPCTR_SEED("interactions.seed", interactions.seed),
      Binding{"samples.threshold", [](const RunConfig& c) { return std::to_string(c.samples.rule.threshold); },
              [](RunConfig& c, const std::string& v) {
                c.samples.rule.threshold = static_cast<int>(parse_integer<unsigned>("samples.threshold", v));
              }},
      EXPCTR_FLAG("samples.tie_positive", samples.rule.tie_is_positive),
      EXPCTR_SIZE("samples.max_history", samples.max_history),
      EXPCTR_SIZE("samples.passes", samples.passes),
      EXPCTR_SEED("samples.seed", samples.seed),
      EXPCTR_SEED("split.seed", split_seed),
      EXPCTR_SIZE("model.d_model", model.d_model),
      EXPCTR_SIZE("model.layers", model.layers),
      EXPCTR_SIZE("model.heads", model.heads),
      EXPCTR_SIZE("model.ffn_multiplier", model.ffn_multiplier),
      EXPCTR_SIZE("model.context", model.context),
      EXPCTR_SEED("model.seed", model.seed),
      EXPCTR_SIZE("adapter.rank", adapter.rank),
      EXPCTR_REAL("adapter.alpha", adapter.alpha),
      EXPCTR_SEED("adapter.seed", adapter.seed),
      EXPCTR_SEED("value.seed", value_seed),
      EXPCTR_SIZE("pretrain.epochs", pretrain.epochs),
      EXPCTR_REAL("pretrain.lr", pretrain.learning_rate),
      EXPCTR_SIZE("pretrain.batch_size", pretrain.batch_size),
      EXPCTR_REAL("pretrain.max_grad_norm", pretrain.max_grad_norm),
      EXPCTR_REAL("pretrain.loss_margin", pretrain.loss_margin),
      EXPCTR_REAL("pretrain.min_accuracy", pretrain.min_accuracy),
      EXPCTR_FLAG("pretrain.loss_on_prompt", pretrain.loss_on_prompt),
      EXPCTR_SEED("pretrain.seed", pretrain.seed),
      EXPCTR_SIZE("pretrain.passes", pretrain_passes),
      EXPCTR_SEED("pretrain.pass_seed", pretrain_pass_seed),
      EXPCTR_SIZE("pretrain.rounds", pretrain_rounds),
      EXPCTR_REAL("scorer.temperature", scorer_temperature),
      EXPCTR_SIZE("encoder.dim", encoder.dim),
      EXPCTR_SEED("encoder.seed", encoder.seed),
      EXPCTR_SIZE("ctr.embed_dim", ctr.embed_dim),
      EXPCTR_SIZE("ctr.hidden1", ctr.hidden1),
      EXPCTR_SIZE("ctr.hidden2", ctr.hidden2),
      EXPCTR_REAL("ctr.embedding_std", ctr.embedding_std),
      EXPCTR_SEED("ctr.seed", ctr.seed),
      EXPCTR_SIZE("ctr.epochs", ctr_train.epochs),
      EXPCTR_REAL("ctr.lr", ctr_train.learning_rate),
      EXPCTR_SIZE("ctr.batch_size", ctr_train.batch_size),
      EXPCTR_REAL("ctr.max_grad_norm", ctr_train.max_grad_norm),
      EXPCTR_SEED("ctr.train_seed", ctr_train.seed),
      EXPCTR_REAL("ppo.beta", ppo.beta),
      EXPCTR_REAL("ppo.delta", ppo.delta),
      EXPCTR_REAL("ppo.clip_ratio", ppo.clip_ratio),
      EXPCTR_REAL("ppo.lr", ppo.learning_rate),
      EXPCTR_SIZE("ppo.epochs_per_batch", ppo.epochs_per_batch),
      EXPCTR_SIZE("ppo.batch_size", ppo.batch_size),
      EXPCTR_SIZE("ppo.minibatch_size", ppo.minibatch_size),
      EXPCTR_REAL("ppo.gae_lambda", ppo.gae_lambda),
      EXPCTR_REAL("ppo.gamma", ppo.gamma),
      EXPCTR_REAL("ppo.value_coef", ppo.value_coef),
      EXPCTR_REAL("ppo.max_grad_norm", ppo.max_grad_norm),
      EXPCTR_SIZE("ppo.max_tokens", ppo.max_tokens),
      EXPCTR_REAL("ppo.temperature", ppo.temperature),
      EXPCTR_SEED("ppo.seed", ppo.seed),
      EXPCTR_FLAG("reward.ic_signed", ic_signed),
      EXPCTR_SIZE("schedule.stage1_iterations", schedule.stage1_iterations),
      EXPCTR_SIZE("schedule.stage23_repeats", schedule.stage23_repeats),
      EXPCTR_SIZE("schedule.stage3_iterations", schedule.stage3_iterations),
      EXPCTR_FLAG("buffer.append", buffer_append),
      EXPCTR_FLAG("buffer.regenerate", regenerate),
      EXPCTR_SIZE("run.train_limit", train_limit),
      EXPCTR_SEED("run.seed", seed),
      Binding{"run.output", [](const RunConfig& c) { return c.output; },
              [](RunConfig& c, const std::string& v) { c.output = v; }},
      EXPCTR_LIST("sweep.beta", sweep_beta),
      EXPCTR_LIST("sweep.delta", sweep_delta),
      EXPCTR_SIZE("sweep.stage1_iterations", sweep_schedule.stage1_iterations),
      EXPCTR_SIZE("sweep.stage23_repeats", sweep_schedule.stage23_repeats),
      EXPCTR_SIZE("sweep.stage3_iterations", sweep_schedule.stage3_iterations),
      EXPCTR_SIZE("sweep.train_limit", sweep_train_limit),
  };
  return table;
}

#undef EXPCTR_SIZE
#undef EXPCTR_SEED
#undef EXPCTR_REAL
#undef EXPCTR_FLAG
#undef EXPCTR_LIST

const Binding& find(const std::string& key) {
  for (const Binding& b : bindings()) {
    if (key == b.key) return b;
  }
  throw ValidationError("config: unknown key '" + key + "'");
}

std::string section_text(const RunConfig& c, std::initializer_list<std::string_view> prefixes) {
  std::string out;
  for (const Binding& b : bindings()) {
    const std::string_view key = b.key;
    for (std::string_view p : prefixes) {
      if (key.starts_with(p)) {
        out += std::string(key) + " = " + b.get(c) + "\n";
        break;
      }
    }
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  world.validate();
  if (interactions.per_user_count < 2) throw ValidationError("config: interactions.per_user must be >= 2");
  if (!(interactions.noise_scale >= 0.0)) throw ValidationError("config: interactions.noise must be >= 0");
  if (samples.rule.threshold < 1 || samples.rule.threshold > 5) {
    throw ValidationError("config: samples.threshold must lie in 1..5");
  }
  if (samples.max_history == 0 || samples.passes == 0) {
    throw ValidationError("config: samples.max_history and samples.passes must be >= 1");
  }
  const lm::ModelConfig m = model_config();
  if (m.d_model == 0 || m.layers == 0 || m.heads == 0 || m.d_model % m.heads != 0) {
    throw ValidationError("config: model.d_model must be a positive multiple of model.heads");
  }
  if (adapter.rank == 0 || !(adapter.alpha > 0.0)) throw ValidationError("config: adapter rank and alpha must be > 0");
  if (pretrain.epochs == 0 || pretrain.batch_size == 0 || pretrain_rounds == 0) {
    throw ValidationError("config: pretrain epochs, batch_size and rounds must be >= 1");
  }
  if (!(pretrain.learning_rate > 0.0)) throw ValidationError("config: pretrain.lr must be > 0");
  if (!(scorer_temperature > 0.0)) throw ValidationError("config: scorer.temperature must be > 0");
  if (encoder.dim == 0) throw ValidationError("config: encoder.dim must be >= 1");
  ctr_config().validate();
  if (ctr_train.batch_size == 0 || !(ctr_train.learning_rate > 0.0)) {
    throw ValidationError("config: ctr.batch_size and ctr.lr must be positive");
  }
  ppo.validate();
  if (ppo.max_tokens + 8 > m.context) throw ValidationError("config: ppo.max_tokens leaves no room for a prompt");
  if (sweep_beta.empty() || sweep_delta.empty()) throw ValidationError("config: sweep grids must be non-empty");
  for (double b : sweep_beta) {
    if (!(b >= 0.0)) throw ValidationError("config: sweep.beta values must be >= 0");
  }
  for (double d : sweep_delta) {
    if (!(d > 0.0)) throw ValidationError("config: sweep.delta values must be > 0");
  }
  if (output.empty()) throw ValidationError("config: run.output must not be empty");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Binding& b : bindings()) out += std::string(b.key) + " = " + b.get(*this) + "\n";
  return out;
}

void RunConfig::apply_text(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config: line " + std::to_string(line_no) + " is not 'key = value'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) { find(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return find(key).get(*this); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const Binding& b : bindings()) out.emplace_back(b.key);
  return out;
}

lm::ModelConfig RunConfig::model_config() const {
  lm::ModelConfig m = model;
  m.vocab = prompting::Vocabulary(world.attributes, world.title_synonyms).size();
  return m;
}

encoder::EncoderConfig RunConfig::encoder_config() const {
  encoder::EncoderConfig e = encoder;
  e.vocab = model_config().vocab;
  return e;
}

ctr::CtrConfig RunConfig::ctr_config() const {
  ctr::CtrConfig c = ctr;
  c.n_users = world.n_users;
  c.n_items = world.n_items;
  c.text_dim = encoder.dim;
  return c;
}

std::size_t RunConfig::prompt_budget() const { return model.context - ppo.max_tokens; }

std::string RunConfig::data_fingerprint() const {
  return section_text(*this, {"world.", "interactions.", "samples.", "split."});
}

std::string RunConfig::base_fingerprint() const {
  return data_fingerprint() + section_text(*this, {"model.", "pretrain.", "ppo.max_tokens"});
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  cfg.apply_text(io::read_text(path));
  return cfg;
}

}  // namespace expctr::pipeline
