#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "expctr/ctr/ctr_model.hpp"
#include "expctr/data/interactions.hpp"
#include "expctr/data/samples.hpp"
#include "expctr/data/world.hpp"
#include "expctr/encoder/text_encoder.hpp"
#include "expctr/lm/model.hpp"
#include "expctr/lm/pretrain.hpp"
#include "expctr/ppo/ppo.hpp"

namespace expctr::pipeline {

struct StageSchedule {
  std::size_t stage1_iterations = 4;
  std::size_t stage23_repeats = 3;
  std::size_t stage3_iterations = 2;
};

struct RunConfig {
  data::WorldConfig world;
  data::InteractionConfig interactions;
  data::SampleConfig samples;
  std::uint64_t split_seed = 4;

  lm::ModelConfig model;  // vocab is filled in from the world
  lm::AdapterConfig adapter;
  std::uint64_t value_seed = 13;
  lm::PretrainConfig pretrain;
  std::size_t pretrain_passes = 3;  // extra samples drawn per train-split user
  std::uint64_t pretrain_pass_seed = 22;
  std::size_t pretrain_rounds = 1;  // pretraining repeated with fresh shuffles

  double scorer_temperature = 1.0;
  encoder::EncoderConfig encoder;
  ctr::CtrConfig ctr;  // user/item counts and text width come from elsewhere
  ctr::CtrTrainConfig ctr_train;
  ppo::PpoConfig ppo;
  bool ic_signed = false;

  StageSchedule schedule;
  bool buffer_append = false;
  bool regenerate = false;
  std::size_t train_limit = 0;  // 0 uses every train sample
  std::uint64_t seed = 7;

  std::string output = "expctr-out";
  std::vector<double> sweep_beta = {0.01, 0.05, 0.1, 0.5};
  std::vector<double> sweep_delta = {0.5, 1.0, 2.0, 5.0};
  StageSchedule sweep_schedule = {1, 1, 1};
  std::size_t sweep_train_limit = 512;

  /// Throws ValidationError naming the first bad field.
  void validate() const;

  /// Every key as "key = value", one per line, in a fixed order.
  std::string to_text() const;
  /// Applies "key = value" lines over the current values. Blank lines and
  /// lines starting with '#' are skipped. Unknown keys are rejected.
  void apply_text(std::string_view text);
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  /// Model sizes with the vocabulary filled in.
  lm::ModelConfig model_config() const;
  encoder::EncoderConfig encoder_config() const;
  ctr::CtrConfig ctr_config() const;
  /// Prompts leave room for max_tokens of generation inside the context.
  std::size_t prompt_budget() const;

  /// Text of the keys that determine the dataset and the base model, used
  /// to check that stored artifacts match a config.
  std::string data_fingerprint() const;
  std::string base_fingerprint() const;
};

RunConfig load_config(const std::string& path);

}  // namespace expctr::pipeline
