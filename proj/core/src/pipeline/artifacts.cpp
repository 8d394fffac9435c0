#include "expctr/pipeline/artifacts.hpp"

#include <cstdlib>
#include <set>

#include "expctr/data/dataset_io.hpp"
#include "expctr/error.hpp"
#include "expctr/io/checkpoint.hpp"
#include "expctr/io/csv.hpp"

namespace expctr::pipeline {

namespace fs = std::filesystem;

namespace {

void require(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("missing file: " + path.string());
}

void check_fingerprint(const fs::path& dir, const std::string& expected, const char* what) {
  const fs::path path = dir / "fingerprint.txt";
  require(path);
  if (io::read_text(path) != expected) {
    throw ValidationError(std::string(what) + " in " + dir.string() +
                          " was produced with a different config; regenerate it");
  }
}

}  // namespace

fs::path resolve_output(const RunConfig& cfg) {
  const fs::path out(cfg.output);
  if (out.is_absolute()) return out;
  if (const char* root = std::getenv("EXPCTR_OUTPUT_ROOT"); root && *root) return fs::path(root) / out;
  return out;
}

Dataset make_dataset(const RunConfig& cfg) {
  Dataset d;
  d.world = data::generate_world(cfg.world);
  d.interactions = data::simulate_interactions(d.world, cfg.interactions);
  auto built = data::build_samples(d.interactions, cfg.samples);
  d.skipped_users = built.skipped_users;
  d.split = data::split(std::move(built.samples), cfg.split_seed);
  return d;
}

void write_dataset(const fs::path& dir, const Dataset& dataset, const RunConfig& cfg) {
  fs::create_directories(dir);
  data::write_world(dir / "world.json", dataset.world);
  data::write_interactions(dir / "interactions.jsonl", dataset.interactions);
  data::write_samples(dir / "train.jsonl", dataset.split.train);
  data::write_samples(dir / "val.jsonl", dataset.split.validation);
  data::write_samples(dir / "test.jsonl", dataset.split.test);
  io::write_text(dir / "fingerprint.txt", cfg.data_fingerprint());
}

Dataset read_dataset(const fs::path& dir, const RunConfig& cfg) {
  for (const char* name : {"world.json", "interactions.jsonl", "train.jsonl", "val.jsonl", "test.jsonl"}) {
    require(dir / name);
  }
  check_fingerprint(dir, cfg.data_fingerprint(), "dataset");
  Dataset d;
  d.world = data::read_world(dir / "world.json");
  d.interactions = data::read_interactions(dir / "interactions.jsonl");
  d.split.train = data::read_samples(dir / "train.jsonl");
  d.split.validation = data::read_samples(dir / "val.jsonl");
  d.split.test = data::read_samples(dir / "test.jsonl");
  return d;
}

PretrainCorpora pretrain_corpora(const RunConfig& cfg, const Dataset& dataset) {
  std::vector<data::InteractionSample> samples = dataset.split.train;
  if (cfg.pretrain_passes > 0) {
    std::set<std::uint32_t> train_users;
    for (const auto& s : dataset.split.train) train_users.insert(s.user);
    std::vector<data::Interaction> own;
    for (const auto& x : dataset.interactions) {
      if (train_users.count(x.user)) own.push_back(x);
    }
    data::SampleConfig extra = cfg.samples;
    extra.passes = cfg.pretrain_passes;
    extra.seed = cfg.pretrain_pass_seed;
    const auto built = data::build_samples(own, extra);
    samples.insert(samples.end(), built.samples.begin(), built.samples.end());
  }
  const std::size_t context = cfg.model.context;
  return {lm::build_corpus(samples, dataset.world, context, cfg.ppo.max_tokens),
          lm::build_corpus(dataset.split.validation, dataset.world, context, cfg.ppo.max_tokens)};
}

lm::PretrainReport pretrain(const RunConfig& cfg, const Dataset& dataset, lm::BaseLanguageModel& model) {
  const PretrainCorpora corpora = pretrain_corpora(cfg, dataset);
  lm::PretrainReport total;
  for (std::size_t round = 0; round < cfg.pretrain_rounds; ++round) {
    const auto merge = [&](const lm::PretrainReport& r) {
      if (round == 0) {
        total = r;
        return;
      }
      const std::size_t offset = total.curve.size();
      for (auto ep : r.curve) {
        ep.epoch += offset;
        total.curve.push_back(ep);
      }
    };
    lm::PretrainConfig pc = cfg.pretrain;
    pc.seed = data::derive_seed(cfg.pretrain.seed, round);
    try {
      merge(lm::pretrain_base(model, corpora.train, corpora.heldout, pc));
    } catch (const lm::PretrainError& e) {
      merge(e.report());
      if (round + 1 == cfg.pretrain_rounds) throw lm::PretrainError(e.what(), total);
    }
  }
  return total;
}

void write_base(const fs::path& dir, lm::BaseLanguageModel& model, const lm::PretrainReport& report,
                const RunConfig& cfg) {
  fs::create_directories(dir);
  io::write_blocks(dir / "base.ckpt", io::to_blocks(model.parameters()));
  io::CsvTable table({"epoch", "train_loss", "heldout_loss", "heldout_accuracy", "uniform_loss"});
  table.add_row({"0", "NA", io::format_double(report.initial_heldout_loss), "NA",
                 io::format_double(report.uniform_loss)});
  for (const auto& e : report.curve) {
    table.add_row({std::to_string(e.epoch), io::format_double(e.train_loss), io::format_double(e.heldout_loss),
                   io::format_double(e.heldout_accuracy), io::format_double(report.uniform_loss)});
  }
  table.write(dir / "pretrain.csv");
  io::write_text(dir / "fingerprint.txt", cfg.base_fingerprint());
}

void read_base(const fs::path& dir, lm::BaseLanguageModel& model, const RunConfig& cfg) {
  require(dir / "base.ckpt");
  check_fingerprint(dir, cfg.base_fingerprint(), "base model");
  model.set_trainable(true);
  io::load_blocks(io::read_blocks(dir / "base.ckpt"), model.parameters());
  model.set_trainable(false);
}

}  // namespace expctr::pipeline
