#include "expctr/pipeline/run.hpp"

#include <algorithm>

#include "expctr/error.hpp"

namespace expctr::pipeline {

namespace fs = std::filesystem;

bool run_full(const RunConfig& cfg, const Dataset& data, lm::BaseLanguageModel& base, const fs::path& dir,
              const RunOptions& options) {
  Orchestrator orch(cfg, data, base);
  if (options.resume) {
    orch.load(dir);
  } else {
    for (const char* name : {"state.json", "policy.ckpt", "ctr.ckpt", "encoder.ckpt", "buffer.jsonl", "curves.csv",
                             "metrics.csv", "sampling_log.csv", "config.txt"}) {
      fs::remove(dir / name);
    }
    orch.save(dir);
  }
  orch.run(dir, options.stop_after);
  return orch.finished();
}

std::optional<double> final_auc(const io::CsvTable& metrics, const std::string& mode, const std::string& split) {
  const auto& h = metrics.header();
  const auto col = [&](const char* name) { return std::find(h.begin(), h.end(), name) - h.begin(); };
  const auto m = col("mode"), s = col("split"), a = col("auc");
  for (auto it = metrics.rows().rbegin(); it != metrics.rows().rend(); ++it) {
    if ((*it)[m] == mode && (*it)[s] == split) {
      if ((*it)[a] == "NA") return std::nullopt;
      return std::stod((*it)[a]);
    }
  }
  return std::nullopt;
}

std::vector<double> curve_column(const io::CsvTable& curves, const std::string& kind, const std::string& column) {
  const auto& h = curves.header();
  const auto k = std::find(h.begin(), h.end(), "kind") - h.begin();
  const auto c = std::find(h.begin(), h.end(), column) - h.begin();
  if (c == static_cast<std::ptrdiff_t>(h.size())) throw ValidationError("curves: no column '" + column + "'");
  std::vector<double> out;
  for (const auto& row : curves.rows()) {
    if (row[k] == kind) out.push_back(std::stod(row[c]));
  }
  return out;
}

std::vector<SweepPoint> run_sweep(const RunConfig& cfg, const Dataset& data, lm::BaseLanguageModel& base,
                                  const fs::path& dir) {
  std::vector<SweepPoint> points;
  for (const char* parameter : {"beta", "delta"}) {
    const auto& grid = std::string(parameter) == "beta" ? cfg.sweep_beta : cfg.sweep_delta;
    for (double value : grid) {
      SweepPoint p{parameter, value, "ok", {}, {}, {}, {}};
      RunConfig point = cfg;
      point.schedule = cfg.sweep_schedule;
      point.train_limit = cfg.sweep_train_limit;
      (std::string(parameter) == "beta" ? point.ppo.beta : point.ppo.delta) = value;
      const fs::path point_dir = dir / (std::string(parameter) + "_" + io::format_double(value));
      try {
        point.validate();
        run_full(point, data, base, point_dir);
        const auto metrics = io::CsvTable::read(point_dir / "metrics.csv");
        p.llm_auc = final_auc(metrics, kModeLlm, "test");
        p.aug_auc = final_auc(metrics, kModeAug, "test");
        p.init_llm_auc = final_auc(metrics, kModeInitLlm, "test");
        p.no_text_auc = final_auc(metrics, kModeNoText, "test");
      } catch (const std::exception& e) {
        p.status = std::string("failed: ") + e.what();
      }
      points.push_back(p);
    }
  }
  io::CsvTable table({"parameter", "value", "status", "llm_test_auc", "aug_test_auc", "init_llm_test_auc",
                      "no_text_test_auc"});
  for (const auto& p : points) {
    std::string status = p.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    table.add_row({p.parameter, io::format_double(p.value), status, io::format_optional(p.llm_auc),
                   io::format_optional(p.aug_auc), io::format_optional(p.init_llm_auc),
                   io::format_optional(p.no_text_auc)});
  }
  fs::create_directories(dir);
  table.write(dir / "sweep.csv");
  return points;
}

}  // namespace expctr::pipeline
