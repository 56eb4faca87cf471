#pragma once
// The core training loop: per-sample selection of the k_s best/worst member
// outputs, reciprocal-LOF weighting, the weighted least-squares loss, one
// adaptive-moment step per batch, and the per-device metrics behind the
// selection-frequency / loss-contribution / weight-heatmap diagnostics.
//
// LOF scores are computed over all N member outputs of a sample; the weights
// entering the loss are then renormalized over the selected subset. Weights
// depend only on member outputs, never on the prediction, so they are
// constants in the gradient and every sample's target can be precomputed.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "orsa/aggnet.hpp"
#include "orsa/ensemble.hpp"
#include "orsa/lof.hpp"

namespace orsa {

struct OrsaConfig {
  int k_s = 6;
  int k_lof = 6;
  Mode mode = Mode::soft_min;
  int batch_size = 64;
  long steps = 25000;
  std::uint64_t seed = 0;
  int metric_window = 5000;
};

inline void validate(const OrsaConfig& cfg, int n_devices) {
  if (cfg.k_s < 1 || cfg.k_s > n_devices)
    throw std::invalid_argument("orsa: k_s must be in [1, " + std::to_string(n_devices) +
                                "], got " + std::to_string(cfg.k_s));
  if (cfg.k_lof < 1 || cfg.k_lof > n_devices - 1)
    throw std::invalid_argument("orsa: k_lof must be in [1, " + std::to_string(n_devices - 1) +
                                "], got " + std::to_string(cfg.k_lof));
  if (cfg.batch_size < 1) throw std::invalid_argument("orsa: batch_size must be >= 1");
  if (cfg.steps < 1) throw std::invalid_argument("orsa: steps must be >= 1");
  if (cfg.metric_window < 1) throw std::invalid_argument("orsa: metric_window must be >= 1");
}

// L = sum_i w_i (y_i - y_pred)^2
inline double orsa_loss(double y_pred, std::span<const double> values,
                        std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty())
    throw std::invalid_argument("orsa_loss: values and weights must be non-empty, equal length");
  double loss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double e = values[i] - y_pred;
    loss += weights[i] * e * e;
  }
  return loss;
}

// dL/dy_pred = 2 sum_i w_i (y_pred - y_i); the weights are constants here.
inline double orsa_loss_grad(double y_pred, std::span<const double> values,
                             std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty())
    throw std::invalid_argument("orsa_loss_grad: values and weights must be non-empty, equal length");
  double g = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) g += weights[i] * (y_pred - values[i]);
  return 2.0 * g;
}

// Everything the loss needs for one sample, precomputable because it is
// independent of the network parameters.
struct SampleTarget {
  std::vector<int> selected;
  std::vector<double> values;
  std::vector<double> weights;
  double target = 0.0;  // sum_i w_i y_i, the unique minimizer of the loss
};

inline SampleTarget sample_target(std::span<const double> y_out, const OrsaConfig& cfg) {
  validate(cfg, static_cast<int>(y_out.size()));
  SampleTarget tg;
  Selection sel = select_k(y_out, cfg.k_s, cfg.mode);
  const std::vector<double> scores = lof_scores(y_out, cfg.k_lof);
  tg.weights = lof_weights(scores, sel.indices);
  tg.selected = std::move(sel.indices);
  tg.values = std::move(sel.values);
  for (std::size_t i = 0; i < tg.values.size(); ++i) tg.target += tg.weights[i] * tg.values[i];
  return tg;
}

inline double oracle_target(std::span<const double> y_out, const OrsaConfig& cfg) {
  return sample_target(y_out, cfg).target;
}

struct StepMetrics {
  double loss = 0.0;                  // batch mean of the per-sample losses
  std::vector<int> selection_count;   // per device
  std::vector<double> weighted_loss;  // per device, batch-mean normalized
  std::vector<double> equal_loss;     // same with w_i = 1/k
  std::vector<std::vector<double>> batch_weights;  // device x batch sample, when captured
};

namespace detail {

inline void set_zero(Gradients& g) {
  for (auto& layer : g.layers) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
}

// One optimizer step on a batch whose targets are already known.
inline StepMetrics step_with_targets(NetParams& params, AdamState& adam,
                                     std::span<const Sample> batch,
                                     std::span<const SampleTarget> targets, int n_devices,
                                     bool capture_weights, NetWorkspace& ws, Gradients& grads) {
  if (batch.empty() || batch.size() != targets.size())
    throw std::invalid_argument("train step: batch and targets must be non-empty, equal length");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  set_zero(grads);
  StepMetrics m;
  m.selection_count.assign(static_cast<std::size_t>(n_devices), 0);
  m.weighted_loss.assign(static_cast<std::size_t>(n_devices), 0.0);
  m.equal_loss.assign(static_cast<std::size_t>(n_devices), 0.0);
  if (capture_weights)
    m.batch_weights.assign(static_cast<std::size_t>(n_devices),
                           std::vector<double>(batch.size(), 0.0));
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const SampleTarget& tg = targets[b];
    const double y_pred = forward_ws(params, batch[b], ws);
    loss_sum += orsa_loss(y_pred, tg.values, tg.weights);
    const double upstream = orsa_loss_grad(y_pred, tg.values, tg.weights) * inv_b;
    backward_ws(params, ws, upstream, grads);
    const double inv_k = 1.0 / static_cast<double>(tg.selected.size());
    for (std::size_t j = 0; j < tg.selected.size(); ++j) {
      const auto dev = static_cast<std::size_t>(tg.selected[j]);
      const double e = tg.values[j] - y_pred;
      m.selection_count[dev] += 1;
      m.weighted_loss[dev] += tg.weights[j] * e * e * inv_b;
      m.equal_loss[dev] += inv_k * e * e * inv_b;
      if (capture_weights) m.batch_weights[dev][b] = tg.weights[j];
    }
  }
  m.loss = loss_sum * inv_b;
  adam_update(params, grads, adam);
  return m;
}

}  // namespace detail

// Member outputs, selection, and weights are computed on the fly here; the
// full training loop below caches them instead.
inline StepMetrics train_step(NetParams& params, AdamState& adam,
                              std::span<const EnsembleMember> members,
                              std::span<const Sample> batch, const OrsaConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  validate(cfg, static_cast<int>(members.size()));
  std::vector<SampleTarget> targets;
  targets.reserve(batch.size());
  for (const Sample& s : batch) targets.push_back(sample_target(predict_ensemble(members, s), cfg));
  NetWorkspace ws;
  Gradients grads = zero_like(params);
  return detail::step_with_targets(params, adam, batch, targets, static_cast<int>(members.size()),
                                   true, ws, grads);
}

// Per-step training records over the whole run, row-major steps x devices.
struct RunMetrics {
  int n_devices = 0;
  int batch_size = 0;
  int k_s = 0;
  long steps = 0;
  std::vector<double> loss_trace;
  std::vector<int> selection;
  std::vector<double> weighted;
  std::vector<double> equal;
  std::vector<std::vector<double>> final_batch_weights;  // device x batch sample
};

struct TrainOutcome {
  NetParams params;
  RunMetrics metrics;
};

// Trains on uniformly drawn batches (with replacement) from the pooled
// samples of all device tables. Deterministic from the seeds in the configs.
inline TrainOutcome train(std::span<const EnsembleMember> members,
                          std::span<const DeviceTable> dataset, const NetConfig& net_cfg,
                          const OrsaConfig& cfg) {
  const int n_devices = static_cast<int>(members.size());
  validate(cfg, n_devices);
  if (dataset.size() != members.size())
    throw std::invalid_argument("train: dataset has " + std::to_string(dataset.size()) +
                                " device tables for " + std::to_string(members.size()) +
                                " ensemble members");
  std::vector<Sample> pool;
  for (const DeviceTable& table : dataset) {
    for (const Sample& s : table.samples) {
      if (static_cast<int>(s.size()) != net_cfg.input_dim)
        throw std::invalid_argument("train: device " + std::to_string(table.device_id) +
                                    " sample dimension " + std::to_string(s.size()) +
                                    " does not match net input_dim " +
                                    std::to_string(net_cfg.input_dim));
      pool.push_back(s);
    }
  }
  if (pool.empty()) throw std::invalid_argument("train: dataset has no samples");

  // Targets are parameter-independent, so compute them once per pooled sample.
  std::vector<SampleTarget> targets;
  targets.reserve(pool.size());
  for (const Sample& s : pool) targets.push_back(sample_target(predict_ensemble(members, s), cfg));

  NetParams params = init_net(net_cfg);
  AdamState adam = make_adam_state(params);
  Rng batch_rng = derive_stream(cfg.seed, 0x42617463ull);

  RunMetrics metrics;
  metrics.n_devices = n_devices;
  metrics.batch_size = cfg.batch_size;
  metrics.k_s = cfg.k_s;
  metrics.steps = cfg.steps;
  metrics.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));
  metrics.selection.assign(static_cast<std::size_t>(cfg.steps) * n_devices, 0);
  metrics.weighted.assign(static_cast<std::size_t>(cfg.steps) * n_devices, 0.0);
  metrics.equal.assign(static_cast<std::size_t>(cfg.steps) * n_devices, 0.0);

  NetWorkspace ws;
  Gradients grads = zero_like(params);
  std::vector<Sample> batch(static_cast<std::size_t>(cfg.batch_size));
  std::vector<SampleTarget> batch_targets(static_cast<std::size_t>(cfg.batch_size));
  for (long step = 0; step < cfg.steps; ++step) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = batch_rng.uniform_index(pool.size());
      batch[static_cast<std::size_t>(b)] = pool[idx];
      batch_targets[static_cast<std::size_t>(b)] = targets[idx];
    }
    const bool last = (step + 1 == cfg.steps);
    StepMetrics sm = detail::step_with_targets(params, adam, batch, batch_targets, n_devices,
                                               last, ws, grads);
    metrics.loss_trace.push_back(sm.loss);
    const std::size_t row = static_cast<std::size_t>(step) * n_devices;
    for (int dev = 0; dev < n_devices; ++dev) {
      metrics.selection[row + dev] = sm.selection_count[static_cast<std::size_t>(dev)];
      metrics.weighted[row + dev] = sm.weighted_loss[static_cast<std::size_t>(dev)];
      metrics.equal[row + dev] = sm.equal_loss[static_cast<std::size_t>(dev)];
    }
    if (last) metrics.final_batch_weights = std::move(sm.batch_weights);
  }
  return {std::move(params), std::move(metrics)};
}

namespace detail {

inline void check_window(const RunMetrics& m, long window) {
  if (window < 1 || window > m.steps)
    throw std::invalid_argument("metrics window must be in [1, " + std::to_string(m.steps) +
                                "], got " + std::to_string(window));
}

}  // namespace detail

// Number of (sample, step) pairs in the last `window` steps where each device
// was in the selected set.
inline std::vector<long> selection_frequency(const RunMetrics& m, long window) {
  detail::check_window(m, window);
  std::vector<long> counts(static_cast<std::size_t>(m.n_devices), 0);
  for (long step = m.steps - window; step < m.steps; ++step) {
    const std::size_t row = static_cast<std::size_t>(step) * m.n_devices;
    for (int dev = 0; dev < m.n_devices; ++dev)
      counts[static_cast<std::size_t>(dev)] += m.selection[row + dev];
  }
  return counts;
}

struct DeviceLoss {
  double weighted = 0.0;
  double equal = 0.0;
};

inline std::vector<DeviceLoss> loss_contributions(const RunMetrics& m, long window) {
  detail::check_window(m, window);
  std::vector<DeviceLoss> totals(static_cast<std::size_t>(m.n_devices));
  for (long step = m.steps - window; step < m.steps; ++step) {
    const std::size_t row = static_cast<std::size_t>(step) * m.n_devices;
    for (int dev = 0; dev < m.n_devices; ++dev) {
      totals[static_cast<std::size_t>(dev)].weighted += m.weighted[row + dev];
      totals[static_cast<std::size_t>(dev)].equal += m.equal[row + dev];
    }
  }
  return totals;
}

// Weight matrix (device rows, batch-sample columns): renormalized reciprocal
// LOF weights at selected rows, zeros elsewhere. Every column sums to 1.
inline std::vector<std::vector<double>> weight_heatmap(std::span<const EnsembleMember> members,
                                                       std::span<const Sample> batch,
                                                       const OrsaConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("weight_heatmap: empty batch");
  validate(cfg, static_cast<int>(members.size()));
  std::vector<std::vector<double>> heat(members.size(), std::vector<double>(batch.size(), 0.0));
  for (std::size_t col = 0; col < batch.size(); ++col) {
    const SampleTarget tg = sample_target(predict_ensemble(members, batch[col]), cfg);
    for (std::size_t j = 0; j < tg.selected.size(); ++j)
      heat[static_cast<std::size_t>(tg.selected[j])][col] = tg.weights[j];
  }
  return heat;
}

}  // namespace orsa
