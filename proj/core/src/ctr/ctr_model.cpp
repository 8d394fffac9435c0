#include "expctr/ctr/ctr_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "expctr/ctr/metrics.hpp"
#include "expctr/error.hpp"
#include "expctr/numerics/kernels.hpp"
#include "expctr/numerics/ops.hpp"
#include "expctr/numerics/optimizer.hpp"

namespace expctr::ctr {

namespace kernels = numerics::kernels;

void CtrConfig::validate() const {
  if (n_users == 0 || n_items == 0) throw ValidationError("ctr: need at least one user and one item");
  if (text_dim == 0 || embed_dim == 0 || hidden1 == 0 || hidden2 == 0) {
    throw ValidationError("ctr: layer sizes must be positive");
  }
  if (!(embedding_std >= 0.0)) throw ValidationError("ctr: embedding_std must be non-negative");
}

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, double sd, std::mt19937_64& rng) {
  Tensor t({rows, cols});
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : t.values()) v = sd * dist(rng);
  return t;
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

}  // namespace

CtrModel::CtrModel(const CtrConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const std::size_t in = 2 * cfg.embed_dim + cfg.text_dim;
  user_embedding = Parameter("ctr.user_emb", gaussian(cfg.n_users, cfg.embed_dim, cfg.embedding_std, rng));
  item_embedding = Parameter("ctr.item_emb", gaussian(cfg.n_items, cfg.embed_dim, cfg.embedding_std, rng));
  user_bias = Parameter("ctr.user_bias", Tensor({cfg.n_users, 1}));
  item_bias = Parameter("ctr.item_bias", Tensor({cfg.n_items, 1}));
  w1 = Parameter("ctr.w1", gaussian(in, cfg.hidden1, std::sqrt(2.0 / in), rng));
  b1 = Parameter("ctr.b1", Tensor({1, cfg.hidden1}));
  w2 = Parameter("ctr.w2", gaussian(cfg.hidden1, cfg.hidden2, std::sqrt(2.0 / cfg.hidden1), rng));
  b2 = Parameter("ctr.b2", Tensor({1, cfg.hidden2}));
  w3 = Parameter("ctr.w3", gaussian(cfg.hidden2, 1, 1.0 / std::sqrt(static_cast<double>(cfg.hidden2)), rng));
  b3 = Parameter("ctr.b3", Tensor({1, 1}));
}

numerics::ParameterRefs CtrModel::parameters() {
  return {&user_embedding, &item_embedding, &user_bias, &item_bias, &w1, &b1, &w2, &b2, &w3, &b3};
}

std::vector<Tensor> CtrModel::snapshot() const {
  auto* self = const_cast<CtrModel*>(this);
  std::vector<Tensor> out;
  for (Parameter* p : self->parameters()) out.push_back(p->value);
  return out;
}

void CtrModel::restore(const std::vector<Tensor>& values) {
  auto params = parameters();
  if (values.size() != params.size()) throw ValidationError("ctr: snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!values[i].same_shape(params[i]->value)) throw ValidationError("ctr: snapshot shape mismatch");
    params[i]->value = values[i];
  }
}

void CtrModel::check_ids(std::uint32_t user, std::uint32_t item) const {
  if (user >= cfg_.n_users) throw ValidationError("ctr: user " + std::to_string(user) + " out of range");
  if (item >= cfg_.n_items) throw ValidationError("ctr: item " + std::to_string(item) + " out of range");
}

double CtrModel::logit(std::uint32_t user, std::uint32_t item, std::span<const double> text) const {
  check_ids(user, item);
  if (text.size() != cfg_.text_dim) {
    throw ValidationError("ctr: text embedding has width " + std::to_string(text.size()) + ", expected " +
                          std::to_string(cfg_.text_dim));
  }
  const auto eu = user_embedding.value.row(user);
  const auto ei = item_embedding.value.row(item);
  std::vector<double> x;
  x.reserve(2 * cfg_.embed_dim + cfg_.text_dim);
  x.insert(x.end(), eu.begin(), eu.end());
  x.insert(x.end(), ei.begin(), ei.end());
  x.insert(x.end(), text.begin(), text.end());
  std::vector<double> h1(cfg_.hidden1), h2(cfg_.hidden2), out(1);
  kernels::affine_row(x, w1.value, b1.value.values(), h1);
  relu_inplace(h1);
  kernels::affine_row(h1, w2.value, b2.value.values(), h2);
  relu_inplace(h2);
  kernels::affine_row(h2, w3.value, b3.value.values(), out);
  const double first = user_bias.value[user] + item_bias.value[item];
  const double second = kernels::dot(eu, ei);
  return first + second + out[0];
}

double CtrModel::forward(std::uint32_t user, std::uint32_t item, std::span<const double> text) const {
  return kernels::sigmoid(logit(user, item, text));
}

double CtrModel::forward_no_text(std::uint32_t user, std::uint32_t item) const {
  const std::vector<double> zero(cfg_.text_dim, 0.0);
  return forward(user, item, zero);
}

std::vector<double> CtrModel::predict(std::span<const CtrExample> examples, bool use_text) const {
  std::vector<double> out;
  out.reserve(examples.size());
  const std::vector<double> zero(cfg_.text_dim, 0.0);
  for (const CtrExample& e : examples) {
    const bool has_text = use_text && !e.text.empty();
    out.push_back(forward(e.user, e.item, has_text ? std::span<const double>(e.text) : zero));
  }
  return out;
}

Var CtrModel::logits(numerics::Tape& tape, std::span<const std::size_t> users,
                     std::span<const std::size_t> items, const Tensor& text) {
  return logits(tape, users, items, tape.constant(text));
}

Var CtrModel::logits(numerics::Tape& tape, std::span<const std::size_t> users,
                     std::span<const std::size_t> items, const Var& text) {
  using namespace numerics;
  if (users.size() != items.size() || text.rows() != users.size() || text.cols() != cfg_.text_dim) {
    throw ValidationError("ctr: batch shape mismatch");
  }
  for (std::size_t k = 0; k < users.size(); ++k) {
    check_ids(static_cast<std::uint32_t>(users[k]), static_cast<std::uint32_t>(items[k]));
  }
  const Var eu = embedding(tape.parameter(user_embedding), users);
  const Var ei = embedding(tape.parameter(item_embedding), items);
  const Var first = add(embedding(tape.parameter(user_bias), users), embedding(tape.parameter(item_bias), items));
  const Var second = dot_rows(eu, ei);
  const Var x = concat_cols({eu, ei, text});
  const Var h1 = relu(affine(x, tape.parameter(w1), tape.parameter(b1)));
  const Var h2 = relu(affine(h1, tape.parameter(w2), tape.parameter(b2)));
  const Var deep = affine(h2, tape.parameter(w3), tape.parameter(b3));
  return add(add(first, second), deep);
}

namespace {

std::optional<double> validation_auc(const CtrModel& model, std::span<const CtrExample> validation) {
  if (validation.size() < 2) return std::nullopt;
  const std::vector<double> preds = model.predict(validation);
  std::vector<int> labels;
  for (const CtrExample& e : validation) labels.push_back(e.label);
  return auc(preds, labels);
}

}  // namespace

CtrTrainReport train_ctr(CtrModel& model, std::span<const CtrExample> train,
                         std::span<const CtrExample> validation, const CtrTrainConfig& cfg) {
  CtrTrainReport report;
  if (cfg.epochs == 0) return report;
  if (train.empty()) throw ValidationError("ctr: empty training set");
  if (cfg.batch_size == 0) throw ValidationError("ctr: batch_size must be positive");
  const std::size_t width = model.config().text_dim;
  for (const CtrExample& e : train) {
    if (!e.text.empty() && e.text.size() != width) throw ValidationError("ctr: training text width mismatch");
    if (e.label != 0 && e.label != 1) throw ValidationError("ctr: labels must be 0 or 1");
  }

  auto params = model.parameters();
  numerics::Adam adam(params, {.learning_rate = cfg.learning_rate});
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Tensor> best;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      std::vector<std::size_t> users(n), items(n);
      std::vector<int> labels(n);
      Tensor text({n, width});
      for (std::size_t k = 0; k < n; ++k) {
        const CtrExample& e = train[order[start + k]];
        users[k] = e.user;
        items[k] = e.item;
        labels[k] = e.label;
        if (!e.text.empty()) std::copy(e.text.begin(), e.text.end(), text.row(k).begin());
      }
      numerics::Tape tape;
      adam.zero_grad();
      const Var loss = numerics::bce_with_logits(model.logits(tape, users, items, text), labels);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw numerics::NonFiniteError("ctr: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(batches));
      }
      tape.backward(loss);
      if (cfg.max_grad_norm > 0.0) adam.clip_grad_norm(cfg.max_grad_norm);
      adam.step();
      loss_sum += value;
      ++batches;
    }
    CtrEpoch record{epoch, loss_sum / static_cast<double>(batches), validation_auc(model, validation)};
    const bool better = !report.best_validation_auc
                            ? (record.validation_auc.has_value() || epoch == cfg.epochs || best.empty())
                            : (record.validation_auc && *record.validation_auc > *report.best_validation_auc);
    if (better) {
      best = model.snapshot();
      report.best_epoch = epoch;
      report.best_validation_auc = record.validation_auc;
    }
    report.epochs.push_back(record);
  }
  if (!report.best_validation_auc) {
    report.best_epoch = cfg.epochs;  // AUC undefined throughout: keep the final epoch
  } else {
    model.restore(best);
  }
  return report;
}

}  // namespace expctr::ctr
