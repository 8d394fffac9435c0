#pragma once

#include <filesystem>
#include <vector>

#include "expctr/data/interactions.hpp"
#include "expctr/data/samples.hpp"
#include "expctr/data/world.hpp"
#include "expctr/lm/model.hpp"
#include "expctr/lm/pretrain.hpp"
#include "expctr/pipeline/config.hpp"

namespace expctr::pipeline {

struct Dataset {
  data::World world;
  std::vector<data::Interaction> interactions;
  data::DatasetSplit split;
  std::size_t skipped_users = 0;
};

/// World, interaction log, samples and the 8:1:1 split, all from config seeds.
Dataset make_dataset(const RunConfig& cfg);

// Directory layout: world.json, interactions.jsonl, train.jsonl, val.jsonl,
// test.jsonl and fingerprint.txt (the dataset keys of the config).
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset, const RunConfig& cfg);
/// Throws ValidationError naming the path when a file is missing or the
/// stored fingerprint differs from `cfg`.
Dataset read_dataset(const std::filesystem::path& dir, const RunConfig& cfg);

struct PretrainCorpora {
  std::vector<lm::CorpusSequence> train;
  std::vector<lm::CorpusSequence> heldout;
};

/// Train-split samples plus `pretrain.passes` extra samples per train-split
/// user drawn from those users' own interactions; the validation split is
/// held out. Test users never appear.
PretrainCorpora pretrain_corpora(const RunConfig& cfg, const Dataset& dataset);

/// Pretrains a fresh base for `pretrain.rounds` rounds and returns it frozen.
/// Throws lm::PretrainError when the final round misses the criteria.
lm::PretrainReport pretrain(const RunConfig& cfg, const Dataset& dataset, lm::BaseLanguageModel& model);

// Layout: base.ckpt, pretrain.csv and fingerprint.txt.
void write_base(const std::filesystem::path& dir, lm::BaseLanguageModel& model, const lm::PretrainReport& report,
                const RunConfig& cfg);
void read_base(const std::filesystem::path& dir, lm::BaseLanguageModel& model, const RunConfig& cfg);

std::filesystem::path resolve_output(const RunConfig& cfg);
inline std::filesystem::path data_dir(const RunConfig& cfg) { return resolve_output(cfg) / "data"; }
inline std::filesystem::path base_dir(const RunConfig& cfg) { return resolve_output(cfg) / "base"; }
inline std::filesystem::path run_dir(const RunConfig& cfg) { return resolve_output(cfg) / "run"; }

}  // namespace expctr::pipeline
