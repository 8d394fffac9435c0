#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "expctr/ctr/ctr_model.hpp"
#include "expctr/ctr/metrics.hpp"
#include "expctr/encoder/text_encoder.hpp"
#include "expctr/io/csv.hpp"
#include "expctr/pipeline/artifacts.hpp"
#include "expctr/ppo/ppo.hpp"

namespace expctr::pipeline {

using prompting::TokenId;

enum class StepKind { kStage1, kStage2, kStage3, kFinal };

struct Step {
  StepKind kind = StepKind::kStage1;
  std::size_t round = 0;      // Stage 2/3 repeat index, 1-based; 0 for Stage 1
  std::size_t iteration = 0;  // 1-based within the stage
};

/// Stage 1 iterations, then (Stage 2, Stage 3 iterations) per repeat, a final
/// Stage 2 when any repeat ran, then evaluation.
std::vector<Step> build_schedule(const StageSchedule& schedule);
int stage_number(StepKind kind);

struct BufferRecord {
  std::vector<TokenId> tokens;    // explanation without EOS; empty if degenerate
  std::vector<double> embedding;  // empty when tokens is empty
  std::size_t adapter_version = 0;
  int stage = 0;
  std::size_t iteration = 0;
};

/// Latest explanation per train (user, item) pair, or every explanation in
/// append mode.
class ExplanationBuffer {
 public:
  explicit ExplanationBuffer(bool append = false) : append_(append) {}

  void put(std::uint32_t user, std::uint32_t item, BufferRecord record);
  const BufferRecord* latest(std::uint32_t user, std::uint32_t item) const;
  const std::vector<BufferRecord>* all(std::uint32_t user, std::uint32_t item) const;
  std::size_t pairs() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  bool append_mode() const noexcept { return append_; }

  const std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<BufferRecord>>& records() const {
    return records_;
  }

 private:
  bool append_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<BufferRecord>> records_;
};

struct ModeMetrics {
  std::string mode;
  std::string split;
  std::optional<ctr::MetricSet> metrics;  // empty when the mode is unavailable
};

inline constexpr const char* kModeLlm = "ExpCTR-LLM";
inline constexpr const char* kModeAug = "ExpCTR-Aug";
inline constexpr const char* kModeInitLlm = "Init-LLM";
inline constexpr const char* kModeNoText = "CTR-NoText";

/// Runs the three-stage schedule one step at a time. After every step the
/// whole state can be saved and a later load resumes bit-identically.
class Orchestrator {
 public:
  Orchestrator(const RunConfig& cfg, const Dataset& data, lm::BaseLanguageModel& base);

  const std::vector<Step>& schedule() const noexcept { return schedule_; }
  std::size_t cursor() const noexcept { return cursor_; }
  bool finished() const noexcept { return cursor_ >= schedule_.size(); }

  /// Executes the next scheduled step.
  void step();
  /// Runs until finished or `max_steps` steps were executed; saves after each
  /// step when `dir` is non-empty.
  void run(const std::filesystem::path& dir = {}, std::size_t max_steps = static_cast<std::size_t>(-1));

  void save(const std::filesystem::path& dir) const;
  /// Restores a state written by save() under the same config.
  void load(const std::filesystem::path& dir);
  void write_tables(const std::filesystem::path& dir) const;

  /// ExpCTR-LLM and ExpCTR-Aug on a split with fresh greedy explanations.
  std::vector<ModeMetrics> evaluate(const std::string& split);

  // Building blocks, exposed for tests.
  void run_stage1_iteration(std::size_t iteration);
  void run_stage2(std::size_t round);
  void run_stage3_iteration(std::size_t round, std::size_t iteration);
  void run_final();

  const ExplanationBuffer& buffer() const noexcept { return buffer_; }
  lm::AdapterSet& adapters() noexcept { return adapters_; }
  lm::ValueHead& value_head() noexcept { return value_head_; }
  const ctr::CtrModel* ctr_model() const noexcept { return ctr_ ? ctr_.get() : nullptr; }
  const encoder::TextEncoder& text_encoder() const noexcept { return encoder_; }
  const io::CsvTable& curves() const noexcept { return curves_; }
  const io::CsvTable& metrics() const noexcept { return metrics_; }
  const io::CsvTable& sampling_log() const noexcept { return sampling_log_; }
  const std::vector<int>& stage_trace() const noexcept { return stage_trace_; }
  std::size_t ppo_updates() const noexcept { return ppo_updates_; }
  std::size_t substitutions() const noexcept { return substitutions_; }
  const std::vector<data::InteractionSample>& train_samples() const noexcept { return train_; }

 private:
  using RewardOf = std::function<double(const data::InteractionSample&, std::span<const TokenId>)>;
  void ppo_iteration(int stage, std::size_t iteration, rewards::RewardKind kind, const RewardOf& reward);
  std::vector<std::vector<TokenId>> greedy_explanations(const std::vector<data::InteractionSample>& samples,
                                                        const lm::AdapterSet* adapters);
  std::vector<double> embed(std::span<const TokenId> explanation) const;
  double llm_score(const data::InteractionSample& sample, std::span<const TokenId> explanation) const;
  const std::vector<data::InteractionSample>& samples_of(const std::string& split) const;
  void log_samples(int stage, std::size_t iteration, std::size_t update, const char* purpose, const char* split,
                   const data::InteractionSample& s);
  void add_metrics(const ModeMetrics& m, const std::string& stage, std::size_t iteration);

  RunConfig cfg_;
  const Dataset& data_;
  lm::BaseLanguageModel& base_;
  std::vector<data::InteractionSample> train_;
  std::vector<Step> schedule_;
  std::size_t cursor_ = 0;

  lm::AdapterSet adapters_;
  lm::ValueHead value_head_;
  ppo::PpoTrainer trainer_;
  encoder::TextEncoder encoder_;
  std::unique_ptr<ctr::CtrModel> ctr_;
  ExplanationBuffer buffer_;
  std::mt19937_64 rng_;
  std::size_t ppo_updates_ = 0;
  std::size_t substitutions_ = 0;
  std::vector<int> stage_trace_;

  io::CsvTable curves_;
  io::CsvTable metrics_;
  io::CsvTable sampling_log_;
};

/// Re-reads a run's sampling log and counts rows where a test-split sample
/// was used for a PPO rollout or a CTR gradient step.
struct LeakageAudit {
  std::size_t rows = 0;
  std::size_t training_rows = 0;
  std::size_t test_training_rows = 0;
};
LeakageAudit audit_sampling_log(const std::filesystem::path& log_path,
                                const std::vector<data::InteractionSample>& test);

}  // namespace expctr::pipeline
