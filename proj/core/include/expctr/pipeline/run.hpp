#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "expctr/io/csv.hpp"
#include "expctr/pipeline/orchestrator.hpp"

namespace expctr::pipeline {

struct RunOptions {
  bool resume = false;
  std::size_t stop_after = static_cast<std::size_t>(-1);  // steps to execute in this call
};

/// Runs (or resumes) the full schedule into `dir`, checkpointing after every
/// step. Returns true when the schedule is complete.
bool run_full(const RunConfig& cfg, const Dataset& data, lm::BaseLanguageModel& base,
              const std::filesystem::path& dir, const RunOptions& options = {});

/// AUC of the last metrics row for (mode, split), if present and defined.
std::optional<double> final_auc(const io::CsvTable& metrics, const std::string& mode, const std::string& split);

/// Value of a numeric column per row of the curves table, for rows of `kind`.
std::vector<double> curve_column(const io::CsvTable& curves, const std::string& kind, const std::string& column);

struct SweepPoint {
  std::string parameter;  // "beta" or "delta"
  double value = 0.0;
  std::string status;     // "ok" or the failure message
  std::optional<double> llm_auc, aug_auc, init_llm_auc, no_text_auc;
};

/// One-dimensional sweeps over sweep.beta and sweep.delta with the short
/// sweep schedule. Each point runs into dir/<parameter>_<value>; failures
/// are recorded and the sweep continues. Writes dir/sweep.csv.
std::vector<SweepPoint> run_sweep(const RunConfig& cfg, const Dataset& data, lm::BaseLanguageModel& base,
                                  const std::filesystem::path& dir);

}  // namespace expctr::pipeline
