#include "expctr/pipeline/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "expctr/error.hpp"
#include "expctr/io/checkpoint.hpp"
#include "expctr/lm/inference.hpp"
#include "expctr/prompting/prompts.hpp"
#include "expctr/rewards/rewards.hpp"

namespace expctr::pipeline {

namespace fs = std::filesystem;
using io::format_double;
using io::format_optional;
using nlohmann::json;

namespace {

const std::vector<std::string> kCurveHeader = {
    "stage",        "iteration",     "update",     "kind",       "raw_mean",    "raw_std",
    "norm_min",     "norm_max",      "mean_kl",    "clip_fraction", "policy_loss", "value_loss",
    "mean_length",  "degenerate",    "skipped",    "ctr_train_loss", "ctr_val_auc"};
const std::vector<std::string> kMetricHeader = {"mode",  "split",    "auc",       "logloss", "mae",
                                                "rmse", "stage", "iteration", "seed"};
const std::vector<std::string> kLogHeader = {"stage", "iteration", "update", "purpose", "split", "user", "item"};

std::vector<int> labels_of(const std::vector<data::InteractionSample>& samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<TokenId> stripped(std::span<const TokenId> tokens) {
  const auto e = prompting::strip_eos(tokens);
  return {e.begin(), e.end()};
}

}  // namespace

std::vector<Step> build_schedule(const StageSchedule& s) {
  std::vector<Step> out;
  for (std::size_t i = 1; i <= s.stage1_iterations; ++i) out.push_back({StepKind::kStage1, 0, i});
  for (std::size_t r = 1; r <= s.stage23_repeats; ++r) {
    out.push_back({StepKind::kStage2, r, 1});
    for (std::size_t i = 1; i <= s.stage3_iterations; ++i) out.push_back({StepKind::kStage3, r, i});
  }
  if (s.stage23_repeats > 0) out.push_back({StepKind::kStage2, s.stage23_repeats + 1, 1});
  out.push_back({StepKind::kFinal, 0, 0});
  return out;
}

int stage_number(StepKind kind) {
  switch (kind) {
    case StepKind::kStage1: return 1;
    case StepKind::kStage2: return 2;
    case StepKind::kStage3: return 3;
    case StepKind::kFinal: return 0;
  }
  return 0;
}

void ExplanationBuffer::put(std::uint32_t user, std::uint32_t item, BufferRecord record) {
  auto& slot = records_[{user, item}];
  if (!append_) slot.clear();
  slot.push_back(std::move(record));
}

const BufferRecord* ExplanationBuffer::latest(std::uint32_t user, std::uint32_t item) const {
  const auto it = records_.find({user, item});
  return it == records_.end() || it->second.empty() ? nullptr : &it->second.back();
}

const std::vector<BufferRecord>* ExplanationBuffer::all(std::uint32_t user, std::uint32_t item) const {
  const auto it = records_.find({user, item});
  return it == records_.end() ? nullptr : &it->second;
}

Orchestrator::Orchestrator(const RunConfig& cfg, const Dataset& data, lm::BaseLanguageModel& base)
    : cfg_(cfg),
      data_(data),
      base_(base),
      schedule_(build_schedule(cfg.schedule)),
      adapters_(cfg.model_config(), {cfg.adapter.rank, cfg.adapter.alpha, data::derive_seed(cfg.adapter.seed, cfg.seed)}),
      value_head_(cfg.model.d_model, data::derive_seed(cfg.value_seed, cfg.seed)),
      trainer_({&base_, &adapters_, &value_head_}, cfg.ppo),
      encoder_(cfg.encoder_config()),
      buffer_(cfg.buffer_append),
      rng_(data::derive_seed(cfg.ppo.seed, cfg.seed)),
      curves_(kCurveHeader),
      metrics_(kMetricHeader),
      sampling_log_(kLogHeader) {
  cfg.validate();
  if (base.config().vocab != cfg.model_config().vocab || base.config().d_model != cfg.model.d_model) {
    throw ValidationError("orchestrator: base model does not match the config");
  }
  train_ = data.split.train;
  if (cfg.train_limit > 0 && cfg.train_limit < train_.size()) train_.resize(cfg.train_limit);
  if (train_.empty()) throw ValidationError("orchestrator: empty train split");
}

const std::vector<data::InteractionSample>& Orchestrator::samples_of(const std::string& split) const {
  if (split == "train") return train_;
  if (split == "val") return data_.split.validation;
  if (split == "test") return data_.split.test;
  throw ValidationError("unknown split '" + split + "' (expected train, val or test)");
}

void Orchestrator::log_samples(int stage, std::size_t iteration, std::size_t update, const char* purpose,
                               const char* split, const data::InteractionSample& s) {
  sampling_log_.add_row({std::to_string(stage), std::to_string(iteration), std::to_string(update), purpose, split,
                         std::to_string(s.user), std::to_string(s.target_item)});
}

std::vector<double> Orchestrator::embed(std::span<const TokenId> explanation) const {
  if (explanation.empty()) return {};
  return encoder_.encode(explanation);
}

double Orchestrator::llm_score(const data::InteractionSample& sample, std::span<const TokenId> explanation) const {
  const auto prompt =
      prompting::build_scorer_prompt(explanation, data_.world.item(sample.target_item).title, cfg_.model.context);
  return lm::score_yes(base_, prompt.tokens, cfg_.scorer_temperature);
}

void Orchestrator::ppo_iteration(int stage, std::size_t iteration, rewards::RewardKind kind,
                                 const RewardOf& reward) {
  if (iteration == 1) stage_trace_.push_back(stage);
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  const ppo::Policy policy{&base_, &adapters_, &value_head_};

  for (std::size_t start = 0; start < order.size(); start += cfg_.ppo.batch_size) {
    const std::size_t n = std::min(cfg_.ppo.batch_size, order.size() - start);
    std::vector<std::vector<TokenId>> prompts;
    prompts.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      prompts.push_back(
          prompting::build_explanation_prompt(train_[order[start + k]], data_.world, cfg_.prompt_budget()).tokens);
    }
    const ppo::RewardFn fn = [&](std::size_t k, std::span<const TokenId> explanation) {
      return reward(train_[order[start + k]], explanation);
    };
    const ppo::RolloutBatch batch = ppo::collect_rollouts(policy, prompts, fn, kind, cfg_.ppo, rng_);
    const std::size_t version = ppo_updates_;
    const ppo::UpdateDiagnostics d = trainer_.update(batch);
    ++ppo_updates_;

    for (std::size_t k = 0; k < n; ++k) {
      const auto& s = train_[order[start + k]];
      BufferRecord rec;
      rec.tokens = stripped(batch.rollouts[k].tokens);
      rec.embedding = embed(rec.tokens);
      rec.adapter_version = version;
      rec.stage = stage;
      rec.iteration = iteration;
      buffer_.put(s.user, s.target_item, std::move(rec));
      log_samples(stage, iteration, ppo_updates_, "rollout", "train", s);
    }
    curves_.add_row({std::to_string(stage), std::to_string(iteration), std::to_string(ppo_updates_),
                     std::string(rewards::to_string(kind)), format_double(d.mean_raw_reward),
                     format_double(d.raw_reward_std), format_double(d.norm_min), format_double(d.norm_max),
                     format_double(d.mean_kl), format_double(d.clip_fraction), format_double(d.policy_loss),
                     format_double(d.value_loss), format_double(d.mean_length), std::to_string(d.degenerate),
                     d.skipped ? "1" : "0", "NA", "NA"});
  }
}

void Orchestrator::run_stage1_iteration(std::size_t iteration) {
  ppo_iteration(1, iteration, rewards::RewardKind::kLc,
                [this](const data::InteractionSample& s, std::span<const TokenId> explanation) {
                  return rewards::lc_reward(llm_score(s, explanation), s.label);
                });
}

void Orchestrator::run_stage3_iteration(std::size_t round, std::size_t iteration) {
  (void)round;
  if (!ctr_) throw ValidationError("stage 3 needs a CTR model from stage 2");
  const ctr::CtrModel& model = *ctr_;
  ppo_iteration(3, iteration, rewards::RewardKind::kIc,
                [&](const data::InteractionSample& s, std::span<const TokenId> explanation) {
                  const std::vector<double> z = encoder_.encode(explanation);
                  const double with_text = model.forward(s.user, s.target_item, z);
                  const double without = model.forward_no_text(s.user, s.target_item);
                  return rewards::ic_reward(s.label, with_text, without, cfg_.ic_signed);
                });
}

std::vector<std::vector<TokenId>> Orchestrator::greedy_explanations(
    const std::vector<data::InteractionSample>& samples, const lm::AdapterSet* adapters) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(samples.size());
  std::mt19937_64 unused(0);
  const lm::GenerationConfig gen{cfg_.ppo.max_tokens, 0.0, false};
  for (const auto& s : samples) {
    const auto prompt = prompting::build_explanation_prompt(s, data_.world, cfg_.prompt_budget());
    out.push_back(stripped(lm::generate(base_, adapters, prompt.tokens, gen, unused).tokens));
  }
  return out;
}

void Orchestrator::run_stage2(std::size_t round) {
  if (buffer_.empty()) {
    throw ValidationError(
        "stage 2 needs explanations in the buffer; run at least one stage 1 iteration "
        "(schedule.stage1_iterations >= 1)");
  }
  stage_trace_.push_back(2);
  if (cfg_.regenerate) {
    const lm::GenerationConfig gen{cfg_.ppo.max_tokens, cfg_.ppo.temperature, false};
    for (const auto& s : train_) {
      const auto prompt = prompting::build_explanation_prompt(s, data_.world, cfg_.prompt_budget());
      BufferRecord rec;
      rec.tokens = stripped(lm::generate(base_, &adapters_, prompt.tokens, gen, rng_).tokens);
      rec.embedding = embed(rec.tokens);
      rec.adapter_version = ppo_updates_;
      rec.stage = 2;
      rec.iteration = round;
      buffer_.put(s.user, s.target_item, std::move(rec));
    }
  }

  std::vector<ctr::CtrExample> train;
  substitutions_ = 0;
  for (const auto& s : train_) {
    const auto* recs = buffer_.all(s.user, s.target_item);
    if (!recs || recs->empty()) {
      train.push_back({s.user, s.target_item, s.label, {}});
      ++substitutions_;
    } else {
      for (const auto& r : *recs) train.push_back({s.user, s.target_item, s.label, r.embedding});
    }
    log_samples(2, round, ppo_updates_, "ctr_train", "train", s);
  }
  const auto& val_samples = data_.split.validation;
  const auto val_expl = greedy_explanations(val_samples, &adapters_);
  std::vector<ctr::CtrExample> val;
  for (std::size_t k = 0; k < val_samples.size(); ++k) {
    const auto& s = val_samples[k];
    val.push_back({s.user, s.target_item, s.label, embed(val_expl[k])});
    log_samples(2, round, ppo_updates_, "ctr_select", "val", s);
  }

  ctr::CtrConfig cc = cfg_.ctr_config();
  cc.seed = data::derive_seed(cfg_.ctr.seed, cfg_.seed);
  ctr::CtrTrainConfig tc = cfg_.ctr_train;
  tc.seed = data::derive_seed(cfg_.ctr_train.seed, cfg_.seed);
  ctr_ = std::make_unique<ctr::CtrModel>(cc);
  const ctr::CtrTrainReport report = ctr::train_ctr(*ctr_, train, val, tc);
  for (const auto& e : report.epochs) {
    curves_.add_row({"2", std::to_string(round), std::to_string(e.epoch), "ctr", "NA", "NA", "NA", "NA", "NA", "NA",
                     "NA", "NA", "NA", "NA", "0", format_double(e.train_loss), format_optional(e.validation_auc)});
  }
  add_metrics({kModeAug, "val", ctr::compute_metrics(ctr_->predict(val), labels_of(val_samples))}, "2", round);
}

std::vector<ModeMetrics> Orchestrator::evaluate(const std::string& split) {
  const auto& samples = samples_of(split);
  const auto expl = greedy_explanations(samples, &adapters_);
  const auto labels = labels_of(samples);
  std::vector<double> llm;
  std::vector<ctr::CtrExample> examples;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    // An empty explanation carries no evidence either way.
    llm.push_back(expl[k].empty() ? 0.5 : llm_score(s, expl[k]));
    examples.push_back({s.user, s.target_item, s.label, embed(expl[k])});
  }
  std::vector<ModeMetrics> out;
  out.push_back({kModeLlm, split, ctr::compute_metrics(llm, labels)});
  if (ctr_) out.push_back({kModeAug, split, ctr::compute_metrics(ctr_->predict(examples), labels)});
  else out.push_back({kModeAug, split, std::nullopt});
  return out;
}

void Orchestrator::add_metrics(const ModeMetrics& m, const std::string& stage, std::size_t iteration) {
  std::vector<std::string> row = {m.mode, m.split};
  if (m.metrics) {
    for (const auto& v : {format_optional(m.metrics->auc), format_double(m.metrics->logloss),
                          format_double(m.metrics->mae), format_double(m.metrics->rmse)}) {
      row.push_back(v);
    }
  } else {
    row.insert(row.end(), {"NA", "NA", "NA", "NA"});
  }
  row.insert(row.end(), {stage, std::to_string(iteration), std::to_string(cfg_.seed)});
  metrics_.add_row(std::move(row));
}

void Orchestrator::run_final() {
  // Baseline CTR model without text, same sizes and seeds.
  ctr::CtrConfig cc = cfg_.ctr_config();
  cc.seed = data::derive_seed(cfg_.ctr.seed, cfg_.seed);
  ctr::CtrTrainConfig tc = cfg_.ctr_train;
  tc.seed = data::derive_seed(cfg_.ctr_train.seed, cfg_.seed);
  ctr::CtrModel no_text(cc);
  std::vector<ctr::CtrExample> train, val;
  for (const auto& s : train_) train.push_back({s.user, s.target_item, s.label, {}});
  for (const auto& s : data_.split.validation) val.push_back({s.user, s.target_item, s.label, {}});
  ctr::train_ctr(no_text, train, val, tc);

  for (const std::string split : {"val", "test"}) {
    const auto& samples = samples_of(split);
    for (const auto& s : samples) log_samples(0, 0, ppo_updates_, "eval", split.c_str(), s);
    for (const auto& m : evaluate(split)) add_metrics(m, "final", 0);

    const auto init_expl = greedy_explanations(samples, nullptr);
    std::vector<double> init_llm;
    std::vector<ctr::CtrExample> plain;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      init_llm.push_back(init_expl[k].empty() ? 0.5 : llm_score(samples[k], init_expl[k]));
      plain.push_back({samples[k].user, samples[k].target_item, samples[k].label, {}});
    }
    const auto labels = labels_of(samples);
    add_metrics({kModeInitLlm, split, ctr::compute_metrics(init_llm, labels)}, "final", 0);
    add_metrics({kModeNoText, split, ctr::compute_metrics(no_text.predict(plain, false), labels)}, "final", 0);
  }
}

void Orchestrator::step() {
  if (finished()) throw ValidationError("orchestrator: schedule already finished");
  const Step s = schedule_[cursor_];
  switch (s.kind) {
    case StepKind::kStage1: run_stage1_iteration(s.iteration); break;
    case StepKind::kStage2: run_stage2(s.round); break;
    case StepKind::kStage3: run_stage3_iteration(s.round, s.iteration); break;
    case StepKind::kFinal: run_final(); break;
  }
  ++cursor_;
}

void Orchestrator::run(const fs::path& dir, std::size_t max_steps) {
  for (std::size_t n = 0; n < max_steps && !finished(); ++n) {
    step();
    if (!dir.empty()) save(dir);
  }
}

void Orchestrator::write_tables(const fs::path& dir) const {
  fs::create_directories(dir);
  curves_.write(dir / "curves.csv");
  metrics_.write(dir / "metrics.csv");
  sampling_log_.write(dir / "sampling_log.csv");
}

void Orchestrator::save(const fs::path& dir) const {
  fs::create_directories(dir);
  io::write_text(dir / "config.txt", cfg_.to_text());

  auto* self = const_cast<Orchestrator*>(this);
  numerics::ParameterRefs policy = self->adapters_.parameters();
  for (auto* p : self->value_head_.parameters()) policy.push_back(p);
  std::vector<io::NamedBlock> blocks = io::to_blocks(policy);
  const auto& st = trainer_.optimizer().state();
  for (std::size_t k = 0; k < st.first_moment.size(); ++k) {
    blocks.push_back({"adam.m." + std::to_string(k), st.first_moment[k]});
    blocks.push_back({"adam.v." + std::to_string(k), st.second_moment[k]});
  }
  io::write_blocks(dir / "policy.ckpt", blocks);
  io::write_blocks(dir / "encoder.ckpt", io::to_blocks(self->encoder_.parameters()));
  if (ctr_) io::write_blocks(dir / "ctr.ckpt", io::to_blocks(self->ctr_->parameters()));

  std::ostringstream buffer_text;
  for (const auto& [key, recs] : buffer_.records()) {
    json line = {{"user", key.first}, {"item", key.second}, {"records", json::array()}};
    for (const auto& r : recs) {
      line["records"].push_back(
          {{"tokens", r.tokens}, {"version", r.adapter_version}, {"stage", r.stage}, {"iteration", r.iteration}});
    }
    buffer_text << line.dump() << '\n';
  }
  io::write_text(dir / "buffer.jsonl", buffer_text.str());
  write_tables(dir);

  std::ostringstream rng_text;
  rng_text << rng_;
  const json state = {{"cursor", cursor_},
                      {"ppo_updates", ppo_updates_},
                      {"substitutions", substitutions_},
                      {"skipped", trainer_.skipped_batches()},
                      {"adam_step", st.step},
                      {"rng", rng_text.str()},
                      {"stage_trace", stage_trace_},
                      {"has_ctr", static_cast<bool>(ctr_)}};
  // The state file goes last, through a rename, so a crash mid-save leaves
  // the previous complete state in place.
  io::write_text(dir / "state.json.tmp", state.dump(2) + "\n");
  fs::rename(dir / "state.json.tmp", dir / "state.json");
}

void Orchestrator::load(const fs::path& dir) {
  for (const char* name : {"state.json", "config.txt", "policy.ckpt", "buffer.jsonl", "curves.csv", "metrics.csv",
                           "sampling_log.csv"}) {
    if (!fs::exists(dir / name)) throw ValidationError("missing checkpoint file: " + (dir / name).string());
  }
  if (io::read_text(dir / "config.txt") != cfg_.to_text()) {
    throw ValidationError("checkpoint in " + dir.string() + " was written with a different config");
  }
  json state;
  try {
    state = json::parse(io::read_text(dir / "state.json"));
  } catch (const json::exception& e) {
    throw ValidationError("corrupt checkpoint state " + (dir / "state.json").string() + ": " + e.what());
  }

  numerics::ParameterRefs policy = adapters_.parameters();
  for (auto* p : value_head_.parameters()) policy.push_back(p);
  const auto blocks = io::read_blocks(dir / "policy.ckpt");
  io::load_blocks(blocks, policy);
  numerics::OptimizerState st;
  for (std::size_t k = 0; k < trainer_.parameters().size(); ++k) {
    st.first_moment.push_back(io::find_block(blocks, "adam.m." + std::to_string(k)).tensor);
    st.second_moment.push_back(io::find_block(blocks, "adam.v." + std::to_string(k)).tensor);
  }
  st.step = state.at("adam_step").get<std::uint64_t>();
  trainer_.optimizer().set_state(std::move(st));
  trainer_.set_skipped_batches(state.at("skipped").get<std::size_t>());

  if (state.at("has_ctr").get<bool>()) {
    ctr::CtrConfig cc = cfg_.ctr_config();
    ctr_ = std::make_unique<ctr::CtrModel>(cc);
    io::load_blocks(io::read_blocks(dir / "ctr.ckpt"), ctr_->parameters());
  } else {
    ctr_.reset();
  }

  buffer_ = ExplanationBuffer(cfg_.buffer_append);
  std::istringstream lines(io::read_text(dir / "buffer.jsonl"));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    for (const auto& r : j.at("records")) {
      BufferRecord rec;
      rec.tokens = r.at("tokens").get<std::vector<TokenId>>();
      rec.embedding = embed(rec.tokens);
      rec.adapter_version = r.at("version").get<std::size_t>();
      rec.stage = r.at("stage").get<int>();
      rec.iteration = r.at("iteration").get<std::size_t>();
      buffer_.put(j.at("user").get<std::uint32_t>(), j.at("item").get<std::uint32_t>(), std::move(rec));
    }
  }

  curves_ = io::CsvTable::read(dir / "curves.csv");
  metrics_ = io::CsvTable::read(dir / "metrics.csv");
  sampling_log_ = io::CsvTable::read(dir / "sampling_log.csv");
  cursor_ = state.at("cursor").get<std::size_t>();
  ppo_updates_ = state.at("ppo_updates").get<std::size_t>();
  substitutions_ = state.at("substitutions").get<std::size_t>();
  stage_trace_ = state.at("stage_trace").get<std::vector<int>>();
  std::istringstream rng_text(state.at("rng").get<std::string>());
  rng_text >> rng_;
  if (cursor_ > schedule_.size()) throw ValidationError("checkpoint cursor lies beyond the schedule");
}

LeakageAudit audit_sampling_log(const fs::path& log_path, const std::vector<data::InteractionSample>& test) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> test_keys;
  for (const auto& s : test) test_keys.insert({s.user, s.target_item});
  const io::CsvTable log = io::CsvTable::read(log_path);
  const auto& h = log.header();
  const auto col = [&](const char* name) {
    const auto it = std::find(h.begin(), h.end(), name);
    if (it == h.end()) throw ValidationError("sampling log lacks column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - h.begin());
  };
  const std::size_t purpose = col("purpose"), user = col("user"), item = col("item");
  LeakageAudit audit;
  for (const auto& row : log.rows()) {
    ++audit.rows;
    if (row[purpose] != "rollout" && row[purpose] != "ctr_train") continue;
    ++audit.training_rows;
    const auto u = static_cast<std::uint32_t>(std::stoul(row[user]));
    const auto i = static_cast<std::uint32_t>(std::stoul(row[item]));
    if (test_keys.count({u, i})) ++audit.test_training_rows;
  }
  return audit;
}

}  // namespace expctr::pipeline
