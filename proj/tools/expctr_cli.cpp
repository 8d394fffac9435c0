#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "expctr/error.hpp"
#include "expctr/lm/pretrain.hpp"
#include "expctr/numerics/tensor.hpp"
#include "expctr/pipeline/run.hpp"

namespace fs = std::filesystem;
using namespace expctr;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output;
  long long seed = -1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "key = value config file");
  cmd->add_option("--set", c.overrides, "override one key, as key=value (repeatable)");
  cmd->add_option("-o,--out", c.output, "output directory (relative paths go under $EXPCTR_OUTPUT_ROOT)");
  cmd->add_option("--seed", c.seed, "run seed");
}

pipeline::RunConfig resolve(const Common& c) {
  pipeline::RunConfig cfg;
  if (!c.config_path.empty()) cfg = pipeline::load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.output.empty()) cfg.output = c.output;
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  cfg.validate();
  return cfg;
}

void print_metrics(const io::CsvTable& table) { std::cout << table.to_string(); }

int gen_data(const pipeline::RunConfig& cfg) {
  const auto dataset = pipeline::make_dataset(cfg);
  const fs::path dir = pipeline::data_dir(cfg);
  pipeline::write_dataset(dir, dataset, cfg);
  std::cout << "wrote " << dir.string() << ": train " << dataset.split.train.size() << ", val "
            << dataset.split.validation.size() << ", test " << dataset.split.test.size() << " samples\n";
  if (const auto warning = data::imbalance_warning(dataset.split.train)) std::cerr << "warning: " << *warning << "\n";
  return 0;
}

int pretrain(const pipeline::RunConfig& cfg) {
  const auto dataset = pipeline::read_dataset(pipeline::data_dir(cfg), cfg);
  lm::BaseLanguageModel model(cfg.model_config());
  const fs::path dir = pipeline::base_dir(cfg);
  try {
    const auto report = pipeline::pretrain(cfg, dataset, model);
    pipeline::write_base(dir, model, report, cfg);
    std::cout << "wrote " << dir.string() << ": held-out loss " << report.final_loss() << " (uniform "
              << report.uniform_loss << "), scorer accuracy " << report.final_accuracy() << "\n";
  } catch (const lm::PretrainError& e) {
    // Keep the curve for diagnosis, but no checkpoint.
    fs::create_directories(dir);
    io::CsvTable table({"epoch", "train_loss", "heldout_loss", "heldout_accuracy"});
    for (const auto& ep : e.report().curve) {
      table.add_row({std::to_string(ep.epoch), io::format_double(ep.train_loss), io::format_double(ep.heldout_loss),
                     io::format_double(ep.heldout_accuracy)});
    }
    table.write(dir / "pretrain_failed.csv");
    throw;
  }
  return 0;
}

int train(const pipeline::RunConfig& cfg, bool resume, long long stop_after) {
  const auto dataset = pipeline::read_dataset(pipeline::data_dir(cfg), cfg);
  lm::BaseLanguageModel base(cfg.model_config());
  pipeline::read_base(pipeline::base_dir(cfg), base, cfg);
  pipeline::RunOptions options;
  options.resume = resume;
  if (stop_after >= 0) options.stop_after = static_cast<std::size_t>(stop_after);
  const fs::path dir = pipeline::run_dir(cfg);
  const bool done = pipeline::run_full(cfg, dataset, base, dir, options);
  if (!done) {
    std::cout << "stopped early; resume with --resume. Checkpoint in " << dir.string() << "\n";
    return 0;
  }
  std::cout << "run complete in " << dir.string() << "\n";
  print_metrics(io::CsvTable::read(dir / "metrics.csv"));
  return 0;
}

int eval(const pipeline::RunConfig& cfg, const std::string& split) {
  const auto dataset = pipeline::read_dataset(pipeline::data_dir(cfg), cfg);
  lm::BaseLanguageModel base(cfg.model_config());
  pipeline::read_base(pipeline::base_dir(cfg), base, cfg);
  const fs::path dir = pipeline::run_dir(cfg);
  pipeline::Orchestrator orch(cfg, dataset, base);
  orch.load(dir);
  io::CsvTable table({"mode", "split", "auc", "logloss", "mae", "rmse", "stage", "iteration", "seed"});
  for (const auto& m : orch.evaluate(split)) {
    std::vector<std::string> row = {m.mode, m.split};
    if (m.metrics) {
      row.insert(row.end(), {io::format_optional(m.metrics->auc), io::format_double(m.metrics->logloss),
                             io::format_double(m.metrics->mae), io::format_double(m.metrics->rmse)});
    } else {
      row.insert(row.end(), {"NA", "NA", "NA", "NA"});
    }
    row.insert(row.end(), {"eval", "0", std::to_string(cfg.seed)});
    table.add_row(std::move(row));
  }
  table.write(dir / ("eval_" + split + ".csv"));
  print_metrics(table);
  return 0;
}

int sweep(const pipeline::RunConfig& cfg) {
  const auto dataset = pipeline::read_dataset(pipeline::data_dir(cfg), cfg);
  lm::BaseLanguageModel base(cfg.model_config());
  pipeline::read_base(pipeline::base_dir(cfg), base, cfg);
  const fs::path dir = pipeline::resolve_output(cfg) / "sweep";
  const auto points = pipeline::run_sweep(cfg, dataset, base, dir);
  std::cout << io::read_text(dir / "sweep.csv");
  for (const auto& p : points) {
    if (p.status != "ok") std::cerr << "point " << p.parameter << "=" << p.value << " " << p.status << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explanation-aligned CTR training pipeline"};
  app.require_subcommand(1);

  Common common;
  auto* config_cmd = app.add_subcommand("config", "print the full config with every default");
  add_common(config_cmd, common);
  auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic world and the 8:1:1 split");
  add_common(gen_cmd, common);
  auto* pre_cmd = app.add_subcommand("pretrain", "pretrain and freeze the base language model");
  add_common(pre_cmd, common);
  auto* train_cmd = app.add_subcommand("train", "run the three-stage schedule");
  add_common(train_cmd, common);
  bool resume = false;
  long long stop_after = -1;
  train_cmd->add_flag("--resume", resume, "continue from the checkpoint in the run directory");
  train_cmd->add_option("--stop-after", stop_after, "execute at most this many schedule steps");
  auto* eval_cmd = app.add_subcommand("eval", "score a finished run on one split");
  add_common(eval_cmd, common);
  std::string split = "test";
  eval_cmd->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  auto* sweep_cmd = app.add_subcommand("sweep", "one-dimensional beta and delta sweeps");
  add_common(sweep_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const pipeline::RunConfig cfg = resolve(common);
    if (*config_cmd) {
      std::cout << cfg.to_text();
      return 0;
    }
    if (*gen_cmd) return gen_data(cfg);
    if (*pre_cmd) return pretrain(cfg);
    if (*train_cmd) return train(cfg, resume, stop_after);
    if (*eval_cmd) return eval(cfg, split);
    if (*sweep_cmd) return sweep(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
