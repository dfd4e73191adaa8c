#pragma once

// End-to-end training: upstream scores -> perturb-and-MAP mask -> masked
// downstream forward -> cross entropy. Downstream parameters get exact
// autodiff gradients; upstream parameters get the I-MLE estimate chained
// through the edge-score construction.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "l2x/checkpoint.hpp"
#include "l2x/error.hpp"
#include "l2x/gnn.hpp"
#include "l2x/graph.hpp"
#include "l2x/rng.hpp"
#include "l2x/sampler.hpp"
#include "l2x/tensor.hpp"

namespace l2x {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 1e-3;
  int hidden_dim = 64;
  int num_layers = 3;
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int jobs = 1;  // worker threads per batch; results reduce in a fixed order
  // Epochs over which the keep-ratio is annealed linearly from 1.0 down to
  // sampler.ratio. At ratio 1.0 the solver keeps every edge, making the
  // I-MLE gradient identically zero, so the downstream model forms on full
  // graphs before sparsification starts. Joint training from a cold start
  // is unstable without this: gradient noise from constantly changing
  // masks kills the relu units (no normalization layers in this
  // architecture to recenter them). 0 disables the ramp.
  int anneal_epochs = -1;  // -1: default to 30% of epochs

  int effective_anneal_epochs() const {
    return anneal_epochs >= 0 ? anneal_epochs : (3 * epochs) / 10;
  }

  double ratio_at(int epoch) const {
    const int ramp = effective_anneal_epochs();
    if (epoch >= ramp) return sampler.ratio;
    const double t = static_cast<double>(epoch) / static_cast<double>(ramp);
    return 1.0 - (1.0 - sampler.ratio) * t;
  }

  void validate() const {
    if (epochs <= 0 || hidden_dim <= 0 || num_layers <= 0 || batch_size <= 0 || jobs <= 0) {
      throw ContractError("TrainConfig: counts must be positive");
    }
    if (!(learning_rate > 0.0)) throw ContractError("TrainConfig: learning rate must be positive");
    sampler.validate();
  }
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;
  std::vector<double> test_accuracy;
  double wall_clock_seconds = 0.0;
  int best_epoch = -1;
  ModelParams final_params;  // best checkpoint by validation accuracy
};

// Adam (with bias correction) or plain SGD over a fixed tensor list.
class Optimizer {
 public:
  Optimizer(std::vector<Tensor> params, const TrainConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.optimizer == OptimizerKind::adam) {
      m_.resize(params_.size());
      v_.resize(params_.size());
      for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].numel(), 0.0);
        v_[i].assign(params_[i].numel(), 0.0);
      }
    }
  }

  void step() {
    if (cfg_.optimizer == OptimizerKind::sgd) {
      for (auto& p : params_) {
        auto& data = p.data();
        const auto& grad = p.grad();
        for (std::size_t i = 0; i < data.size(); ++i) data[i] -= cfg_.learning_rate * grad[i];
      }
      return;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      auto& data = params_[pi].data();
      const auto& grad = params_[pi].grad();
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double g = grad[i];
        m[i] = cfg_.adam_beta1 * m[i] + (1.0 - cfg_.adam_beta1) * g;
        v[i] = cfg_.adam_beta2 * v[i] + (1.0 - cfg_.adam_beta2) * g * g;
        data[i] -= cfg_.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.adam_eps);
      }
    }
  }

 private:
  std::vector<Tensor> params_;
  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

struct TrainStepResult {
  double loss = 0.0;
  // Gradient contribution per parameter tensor, keyed by node. Kept apart
  // from the persistent grad buffers so per-graph work can run on worker
  // threads and reduce deterministically afterwards.
  detail::AdjointMap grads;
};

// One Monte-Carlo sample of the loss (Z = opt(theta + eps)) and gradients
// for both parameter groups.
inline TrainStepResult train_step(const Graph& g, const ModelParams& params,
                                  const TrainConfig& cfg, Rng& rng) {
  auto theta = upstream_scores_tensor(g, params);
  const EdgeScores scores{&g, theta.data()};
  auto sample = sample_mask(scores, cfg.sampler, rng, /*train_mode=*/true);

  auto dense = dense_adjacency(g, sample.mask, /*requires_grad=*/true);
  auto loss = softmax_cross_entropy(downstream_forward_dense(g, dense, params),
                                    static_cast<std::size_t>(g.label));
  auto adjoints = compute_adjoints(loss);

  // dL/dZ per undirected edge, read off the dense mask's adjoint.
  std::vector<double> mask_grad(g.edges.size(), 0.0);
  if (auto it = adjoints.find(dense.node()); it != adjoints.end()) {
    mask_grad = edge_mask_gradient(it->second, g);
  }
  auto theta_grad = imle_gradient(scores, mask_grad, sample.noise, cfg.sampler, sample.k);

  // chain rule into the upstream tower: seed theta's adjoint with the
  // I-MLE estimate via a surrogate inner product
  auto surrogate = reduce_sum(mul(theta, Tensor::from_data({theta.numel()}, theta_grad)));
  auto upstream_adjoints = compute_adjoints(surrogate);

  TrainStepResult result;
  result.loss = loss.item();
  std::unordered_set<const detail::TensorNode*> param_nodes;
  for (const auto& t : params.all_tensors()) param_nodes.insert(t.node());
  auto harvest = [&](detail::AdjointMap& src) {
    for (auto& [node, grad] : src) {
      if (!param_nodes.count(node)) continue;
      auto& dst = result.grads[node];
      if (dst.empty()) {
        dst = std::move(grad);
      } else {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += grad[i];
      }
    }
  };
  harvest(adjoints);
  harvest(upstream_adjoints);
  return result;
}

// Eval-mode accuracy: unperturbed MAP masks, argmax prediction with ties
// resolved to the lowest class index.
inline double evaluate(const Dataset& ds, const std::vector<int>& split,
                       const ModelParams& params, const SamplerConfig& sampler_cfg) {
  if (split.empty()) throw ContractError("evaluate: empty split");
  Rng unused(0);
  int correct = 0;
  for (int idx : split) {
    const Graph& g = ds.graphs[idx];
    const auto scores = upstream_scores(g, params);
    const auto sample = sample_mask(scores, sampler_cfg, unused, /*train_mode=*/false);
    const auto logits = downstream_forward(g, sample.mask, params);
    if (argmax_class(logits) == g.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

namespace detail {

template <typename Fn>
inline void parallel_for(int jobs, int n, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min(jobs, n);
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace detail

// Epoch loop with per-epoch reshuffle, minibatch gradient accumulation and
// best-checkpoint tracking by validation accuracy. Deterministic given the
// seed at any number of jobs: per-graph rng streams depend only on
// (seed, epoch, graph index) and reduction follows batch order.
inline TrainReport fit(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.splits.train.empty()) throw ContractError("fit: empty train split");
  const auto t_start = std::chrono::steady_clock::now();

  ModelParams params = ModelParams::init(ds.feature_dim, cfg.hidden_dim, cfg.num_layers,
                                         ds.num_classes, derive_seed(cfg.seed, 0x1417));
  auto tensors = params.all_tensors();
  Optimizer optimizer(tensors, cfg);

  TrainReport report;
  double best_val = -1.0;
  std::vector<std::vector<double>> best_snapshot;

  std::vector<int> order = ds.splits.train;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5u, epoch));
    shuffle_rng.shuffle(order);

    TrainConfig epoch_cfg = cfg;
    epoch_cfg.sampler.ratio = cfg.ratio_at(epoch);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const int batch = static_cast<int>(
          std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size)));
      std::vector<TrainStepResult> results(batch);
      detail::parallel_for(cfg.jobs, batch, [&](int b) {
        const int graph_idx = order[start + b];
        Rng rng(derive_seed(cfg.seed, 0x9000u + epoch, graph_idx));
        results[b] = train_step(ds.graphs[graph_idx], params, epoch_cfg, rng);
      });
      // serialized reduction in batch order
      for (int b = 0; b < batch; ++b) {
        epoch_loss += results[b].loss;
        for (auto& t : tensors) {
          auto it = results[b].grads.find(t.node());
          if (it == results[b].grads.end()) continue;
          auto& grad = t.grad();
          for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += it->second[i];
        }
      }
      const double inv_batch = 1.0 / batch;
      for (auto& t : tensors) {
        for (double& v : t.grad()) v *= inv_batch;
      }
      optimizer.step();
      params.zero_grad();
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    }
    report.train_loss.push_back(epoch_loss);

    const double train_acc = evaluate(ds, ds.splits.train, params, cfg.sampler);
    const double val_acc =
        ds.splits.val.empty() ? train_acc : evaluate(ds, ds.splits.val, params, cfg.sampler);
    const double test_acc =
        ds.splits.test.empty() ? 0.0 : evaluate(ds, ds.splits.test, params, cfg.sampler);
    report.train_accuracy.push_back(train_acc);
    report.val_accuracy.push_back(ds.splits.val.empty() ? 0.0 : val_acc);
    report.test_accuracy.push_back(test_acc);

    if (val_acc > best_val) {
      best_val = val_acc;
      report.best_epoch = epoch;
      best_snapshot.clear();
      for (const auto& t : tensors) best_snapshot.push_back(t.data());
    }
  }

  report.final_params = ModelParams::init(ds.feature_dim, cfg.hidden_dim, cfg.num_layers,
                                          ds.num_classes, derive_seed(cfg.seed, 0x1417));
  auto final_tensors = report.final_params.all_tensors();
  for (std::size_t i = 0; i < final_tensors.size(); ++i) {
    const_cast<Tensor&>(final_tensors[i]).data() = best_snapshot[i];
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

// One JSON object per epoch.
inline void write_report_jsonl(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write report " + path.string());
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    nlohmann::json j{{"epoch", e},
                     {"train_loss", report.train_loss[e]},
                     {"train_accuracy", report.train_accuracy[e]},
                     {"val_accuracy", report.val_accuracy[e]},
                     {"test_accuracy", report.test_accuracy[e]}};
    out << j.dump() << "\n";
  }
}

}  // namespace l2x
