#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "expctr/numerics/tape.hpp"

namespace expctr::ctr {

using numerics::Parameter;
using numerics::Tensor;
using numerics::Var;

struct CtrConfig {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t text_dim = 32;
  std::size_t embed_dim = 16;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  double embedding_std = 0.05;
  std::uint64_t seed = 41;

  void validate() const;
};

/// One labelled (user, item) pair with its explanation embedding. An empty
/// `text` stands for the zero vector.
struct CtrExample {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  int label = 0;
  std::vector<double> text;
};

/// Factorization machine over user and item fields plus a deep tower on
/// [user emb, item emb, text]. The output bias of the tower doubles as the
/// global bias.
class CtrModel {
 public:
  explicit CtrModel(const CtrConfig& cfg);

  const CtrConfig& config() const noexcept { return cfg_; }

  /// Click probability. Throws ValidationError on bad ids or text width.
  double forward(std::uint32_t user, std::uint32_t item, std::span<const double> text) const;
  double forward_no_text(std::uint32_t user, std::uint32_t item) const;
  double logit(std::uint32_t user, std::uint32_t item, std::span<const double> text) const;

  std::vector<double> predict(std::span<const CtrExample> examples, bool use_text = true) const;

  /// Batched logits [n x 1] on a tape. `text` is [n x text_dim].
  Var logits(numerics::Tape& tape, std::span<const std::size_t> users,
             std::span<const std::size_t> items, const Tensor& text);
  Var logits(numerics::Tape& tape, std::span<const std::size_t> users,
             std::span<const std::size_t> items, const Var& text);

  numerics::ParameterRefs parameters();
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

  Parameter user_embedding;  // [n_users x embed_dim]
  Parameter item_embedding;  // [n_items x embed_dim]
  Parameter user_bias;       // [n_users x 1]
  Parameter item_bias;       // [n_items x 1]
  Parameter w1, b1, w2, b2, w3, b3;

 private:
  void check_ids(std::uint32_t user, std::uint32_t item) const;

  CtrConfig cfg_;
};

struct CtrTrainConfig {
  std::size_t epochs = 20;
  double learning_rate = 3e-3;
  std::size_t batch_size = 64;
  double max_grad_norm = 5.0;
  std::uint64_t seed = 43;
};

struct CtrEpoch {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation_auc;
};

struct CtrTrainReport {
  std::vector<CtrEpoch> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  std::optional<double> best_validation_auc;
};

/// Mean binary cross-entropy training with Adam. Keeps the parameters of
/// the epoch with the highest validation AUC (the last epoch when AUC is
/// undefined). Throws NonFiniteError naming epoch and batch on a non-finite
/// loss.
CtrTrainReport train_ctr(CtrModel& model, std::span<const CtrExample> train,
                         std::span<const CtrExample> validation, const CtrTrainConfig& cfg);

}  // namespace expctr::ctr
