#pragma once

// Combinatorial subgraph solvers, noise perturbation for approximate
// sampling from the constrained exponential family, and the I-MLE gradient
// estimator. Sampling works per undirected edge, so the selected adjacency
// is symmetric by construction. Ties are always broken toward the
// lexicographically smallest edge to keep runs reproducible.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "l2x/error.hpp"
#include "l2x/gnn.hpp"
#include "l2x/graph.hpp"
#include "l2x/rng.hpp"

namespace l2x {

enum class SamplerStrategy { topk, connected };
enum class NoiseKind { sum_of_gamma, gumbel, none };

struct SamplerConfig {
  SamplerStrategy strategy = SamplerStrategy::connected;
  double ratio = 0.5;        // fraction R of edges to keep
  double lambda = 100.0;     // target-distribution perturbation strength
  NoiseKind noise = NoiseKind::sum_of_gamma;
  int sog_iterations = 10;   // s in the sum-of-gamma construction
  double temperature = 1.0;  // tau

  void validate() const {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
      throw ContractError("sampler ratio must be in (0,1], got " + std::to_string(ratio));
    }
    if (!(lambda > 0.0)) throw ContractError("sampler lambda must be positive");
    if (sog_iterations < 1) throw ContractError("sog_iterations must be >= 1");
    if (!(temperature > 0.0)) throw ContractError("temperature must be positive");
  }
};

namespace instrumentation {

// Number of noise-sampling calls that actually drew randomness. Evaluation
// paths must leave this untouched.
inline std::atomic<std::uint64_t> noise_draws{0};

inline std::uint64_t noise_draw_count() { return noise_draws.load(); }
inline void reset_noise_draws() { noise_draws.store(0); }

}  // namespace instrumentation

// Edge budget from the keep-ratio: round half up, floor of one for any
// graph that has edges at all.
inline int k_from_ratio(int num_edges, double ratio) {
  if (num_edges < 0) throw ContractError("k_from_ratio: negative edge count");
  if (num_edges == 0) return 0;
  const int k = static_cast<int>(std::floor(ratio * num_edges + 0.5));
  return std::max(1, std::min(k, num_edges));
}

// The k highest-scoring edges (maximum-weight k-edge subgraph).
inline EdgeMask opt_topk(const EdgeScores& scores, int k) {
  const Graph& g = *scores.graph;
  const int m = g.num_edges();
  k = std::max(0, std::min(k, m));
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  // stable under ties: edges are stored in lexicographic order
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return scores.values[a] > scores.values[b]; });
  EdgeMask mask = EdgeMask::none_of(g);
  for (int i = 0; i < k; ++i) mask.selected[idx[i]] = 1;
  mask.count = k;
  return mask;
}

// Greedy maximum-weight k-edge connected subgraph: seed with the best edge,
// then repeatedly take the best-scoring edge adjacent to the selection.
// Returns min(k, edges reachable from the seed) edges; the result is
// connected by construction but not globally optimal.
inline EdgeMask opt_connected(const EdgeScores& scores, int k,
                              std::vector<int>* selection_order = nullptr) {
  const Graph& g = *scores.graph;
  const int m = g.num_edges();
  EdgeMask mask = EdgeMask::none_of(g);
  if (selection_order) selection_order->clear();
  if (m == 0 || k <= 0) return mask;

  std::vector<std::vector<int>> incident(g.num_nodes);
  for (int e = 0; e < m; ++e) {
    incident[g.edges[e].first].push_back(e);
    incident[g.edges[e].second].push_back(e);
  }

  int seed = 0;
  for (int e = 1; e < m; ++e) {
    if (scores.values[e] > scores.values[seed]) seed = e;
  }

  std::vector<char> in_frontier(m, 0);
  auto extend_frontier = [&](int e) {
    for (int endpoint : {g.edges[e].first, g.edges[e].second}) {
      for (int adj : incident[endpoint]) {
        if (!mask.selected[adj]) in_frontier[adj] = 1;
      }
    }
  };

  auto take = [&](int e) {
    mask.selected[e] = 1;
    ++mask.count;
    in_frontier[e] = 0;
    if (selection_order) selection_order->push_back(e);
    extend_frontier(e);
  };

  take(seed);
  while (mask.count < k) {
    int best = -1;
    for (int e = 0; e < m; ++e) {
      if (in_frontier[e] && (best < 0 || scores.values[e] > scores.values[best])) best = e;
    }
    if (best < 0) break;  // frontier exhausted
    take(best);
  }
  return mask;
}

inline EdgeMask run_opt(const EdgeScores& scores, int k, SamplerStrategy strategy) {
  switch (strategy) {
    case SamplerStrategy::topk:
      return opt_topk(scores, k);
    case SamplerStrategy::connected:
      return opt_connected(scores, k);
  }
  throw ContractError("unknown sampler strategy");
}

// True when the selected edges form one connected component (an empty
// selection counts as connected).
inline bool mask_is_connected(const EdgeMask& mask) {
  const Graph& g = *mask.graph;
  if (mask.count <= 1) return true;
  std::vector<std::vector<int>> adj(g.num_nodes);
  int start = -1;
  for (std::size_t e = 0; e < mask.selected.size(); ++e) {
    if (!mask.selected[e]) continue;
    adj[g.edges[e].first].push_back(g.edges[e].second);
    adj[g.edges[e].second].push_back(g.edges[e].first);
    if (start < 0) start = g.edges[e].first;
  }
  std::vector<char> seen(g.num_nodes, 0);
  std::vector<int> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
    }
  }
  for (std::size_t e = 0; e < mask.selected.size(); ++e) {
    if (mask.selected[e] && (!seen[g.edges[e].first] || !seen[g.edges[e].second])) return false;
  }
  return true;
}

// Independent per-edge perturbations. The sum-of-gamma variant follows
//   eps = (tau/k) * (sum_{i=1..s} Gamma(1/k, k/i) - log s)
// with k bound to the current selection budget.
inline std::vector<double> sample_noise(int num_edges, int k, const SamplerConfig& config,
                                        Rng& rng) {
  config.validate();
  if (num_edges < 0) throw ContractError("sample_noise: negative edge count");
  std::vector<double> eps(num_edges, 0.0);
  if (config.noise == NoiseKind::none || num_edges == 0 || k <= 0) return eps;
  instrumentation::noise_draws.fetch_add(1, std::memory_order_relaxed);
  const double tau = config.temperature;
  if (config.noise == NoiseKind::gumbel) {
    for (double& e : eps) e = tau * rng.gumbel();
    return eps;
  }
  const double kd = static_cast<double>(k);
  const int s = config.sog_iterations;
  const double log_s = std::log(static_cast<double>(s));
  for (double& e : eps) {
    double acc = 0.0;
    for (int i = 1; i <= s; ++i) acc += rng.gamma(1.0 / kd, kd / static_cast<double>(i));
    e = (tau / kd) * (acc - log_s);
  }
  return eps;
}

struct SampleResult {
  EdgeMask mask;
  std::vector<double> noise;  // the eps actually used (zeros in eval mode)
  int k = 0;
};

// Perturb-and-MAP: Z = opt(theta + eps) during training, Z = opt(theta) at
// evaluation time (no perturbation).
inline SampleResult sample_mask(const EdgeScores& scores, const SamplerConfig& config, Rng& rng,
                                bool train_mode) {
  config.validate();
  const int m = scores.graph->num_edges();
  const int k = k_from_ratio(m, config.ratio);
  SampleResult result;
  result.k = k;
  if (train_mode) {
    result.noise = sample_noise(m, k, config, rng);
    std::vector<double> perturbed(scores.values);
    for (int e = 0; e < m; ++e) perturbed[e] += result.noise[e];
    result.mask = run_opt(EdgeScores{scores.graph, std::move(perturbed)}, k, config.strategy);
  } else {
    result.noise.assign(m, 0.0);
    result.mask = run_opt(scores, k, config.strategy);
  }
  return result;
}

// I-MLE gradient of the expected loss w.r.t. theta: the target parameters
// theta' = theta - lambda * dL/dZ define an implicit target distribution,
// and the gradient estimate is the difference of the two MAP states under
// the same noise,
//   (1/lambda) * (opt(theta + eps) - opt(theta' + eps)).
inline std::vector<double> imle_gradient(const EdgeScores& scores,
                                         const std::vector<double>& mask_grad,
                                         const std::vector<double>& eps,
                                         const SamplerConfig& config, int k) {
  config.validate();
  const std::size_t m = scores.values.size();
  if (mask_grad.size() != m || eps.size() != m) {
    throw ContractError("imle_gradient: edge sets disagree (" + std::to_string(m) + " scores, " +
                        std::to_string(mask_grad.size()) + " gradients, " +
                        std::to_string(eps.size()) + " noise values)");
  }
  std::vector<double> forward_scores(m), target_scores(m);
  for (std::size_t e = 0; e < m; ++e) {
    forward_scores[e] = scores.values[e] + eps[e];
    target_scores[e] = scores.values[e] - config.lambda * mask_grad[e] + eps[e];
  }
  const EdgeMask sample = run_opt(EdgeScores{scores.graph, std::move(forward_scores)}, k,
                                  config.strategy);
  const EdgeMask target = run_opt(EdgeScores{scores.graph, std::move(target_scores)}, k,
                                  config.strategy);
  std::vector<double> grad(m, 0.0);
  for (std::size_t e = 0; e < m; ++e) {
    grad[e] = (static_cast<double>(sample.selected[e]) -
               static_cast<double>(target.selected[e])) /
              config.lambda;
  }
  return grad;
}

inline SamplerStrategy parse_strategy(const std::string& name) {
  if (name == "topk") return SamplerStrategy::topk;
  if (name == "connected") return SamplerStrategy::connected;
  throw UsageError("unknown sampler strategy '" + name + "' (expected topk or connected)");
}

inline NoiseKind parse_noise(const std::string& name) {
  if (name == "sog") return NoiseKind::sum_of_gamma;
  if (name == "gumbel") return NoiseKind::gumbel;
  if (name == "none") return NoiseKind::none;
  throw UsageError("unknown noise kind '" + name + "' (expected sog, gumbel or none)");
}

inline std::string strategy_name(SamplerStrategy s) {
  return s == SamplerStrategy::topk ? "topk" : "connected";
}

inline std::string noise_name(NoiseKind n) {
  switch (n) {
    case NoiseKind::sum_of_gamma:
      return "sog";
    case NoiseKind::gumbel:
      return "gumbel";
    case NoiseKind::none:
      return "none";
  }
  return "none";
}

}  // namespace l2x
