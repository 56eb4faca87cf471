#pragma once
// The stacked feedforward aggregation network: rectifier hidden layers, a
// linear scalar output, exact reverse-mode gradients, and the adaptive-moment
// optimizer used to train it.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "orsa/rng.hpp"

namespace orsa {

struct NetConfig {
  int input_dim = 0;
  std::vector<int> hidden{64, 32};
  std::uint64_t init_seed = 0;
};

struct NetParams {
  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major, w[o * in + i]
    std::vector<double> b;
  };
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
};

using Gradients = NetParams;

inline bool same_shape(const NetParams& a, const NetParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].in != b.layers[l].in || a.layers[l].out != b.layers[l].out) return false;
  return true;
}

inline Gradients zero_like(const NetParams& params) {
  Gradients g;
  g.layers.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    NetParams::Layer z;
    z.in = layer.in;
    z.out = layer.out;
    z.w.assign(layer.w.size(), 0.0);
    z.b.assign(layer.b.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

// Zero-mean uniform weights bounded by sqrt(6 / fan_in), zero biases.
inline NetParams init_net(const NetConfig& cfg) {
  if (cfg.input_dim < 1) throw std::invalid_argument("net: input_dim must be >= 1");
  for (int w : cfg.hidden)
    if (w < 1) throw std::invalid_argument("net: hidden widths must be >= 1");
  std::vector<int> dims;
  dims.push_back(cfg.input_dim);
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(1);

  Rng rng = derive_stream(cfg.init_seed, 0x4e657473ull);
  NetParams params;
  params.layers.reserve(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    NetParams::Layer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
    layer.w.resize(static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out));
    for (double& w : layer.w) w = rng.uniform(-bound, bound);
    layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

// Reusable activation buffers for the training hot path.
struct NetWorkspace {
  std::vector<std::vector<double>> acts;   // acts[0] = input, acts[L] = {output}
  std::vector<std::vector<double>> delta;  // per-layer back-propagated signal
};

namespace detail {

inline void check_input_dim(const NetParams& params, std::span<const double> s) {
  if (params.layers.empty()) throw std::invalid_argument("net: uninitialized parameters");
  if (params.layers.back().out != 1)
    throw std::invalid_argument("net: output width must be 1");
  if (static_cast<int>(s.size()) != params.layers.front().in)
    throw std::invalid_argument("net: input has dimension " + std::to_string(s.size()) +
                                ", expected " + std::to_string(params.layers.front().in));
}

}  // namespace detail

// Fills ws.acts and returns the scalar output. Hidden layers apply the
// rectifier, the final layer is linear.
inline double forward_ws(const NetParams& params, std::span<const double> s, NetWorkspace& ws) {
  detail::check_input_dim(params, s);
  const std::size_t n_layers = params.layers.size();
  ws.acts.resize(n_layers + 1);
  ws.acts[0].assign(s.begin(), s.end());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = params.layers[l];
    const std::vector<double>& prev = ws.acts[l];
    std::vector<double>& out = ws.acts[l + 1];
    out.assign(static_cast<std::size_t>(layer.out), 0.0);
    const bool last = (l + 1 == n_layers);
    for (int o = 0; o < layer.out; ++o) {
      double z = layer.b[static_cast<std::size_t>(o)];
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) z += wrow[i] * prev[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(o)] = last ? z : (z > 0.0 ? z : 0.0);
    }
  }
  return ws.acts[n_layers][0];
}

inline double forward(const NetParams& params, std::span<const double> s) {
  NetWorkspace ws;
  return forward_ws(params, s, ws);
}

// Accumulates d(output * upstream)/d(param) into grads, using the activations
// cached by the matching forward_ws call. Rectifier subgradient at 0 is 0.
inline void backward_ws(const NetParams& params, NetWorkspace& ws, double upstream,
                        Gradients& grads) {
  const std::size_t n_layers = params.layers.size();
  if (!same_shape(params, grads)) throw std::invalid_argument("net: gradient shape mismatch");
  ws.delta.resize(n_layers);
  ws.delta[n_layers - 1].assign(1, upstream);
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    auto& glayer = grads.layers[l];
    const std::vector<double>& prev = ws.acts[l];
    const std::vector<double>& delta = ws.delta[l];
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      if (d == 0.0) continue;
      glayer.b[static_cast<std::size_t>(o)] += d;
      double* grow = glayer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) grow[i] += d * prev[static_cast<std::size_t>(i)];
    }
    if (l == 0) break;
    std::vector<double>& dprev = ws.delta[l - 1];
    dprev.assign(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      if (d == 0.0) continue;
      const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) dprev[static_cast<std::size_t>(i)] += d * wrow[i];
    }
    // gate by the rectifier mask of the layer below (acts[l] is post-rectifier)
    for (int i = 0; i < layer.in; ++i)
      if (prev[static_cast<std::size_t>(i)] <= 0.0) dprev[static_cast<std::size_t>(i)] = 0.0;
  }
}

inline Gradients backward(const NetParams& params, std::span<const double> s, double upstream) {
  NetWorkspace ws;
  forward_ws(params, s, ws);
  Gradients grads = zero_like(params);
  backward_ws(params, ws, upstream, grads);
  return grads;
}

struct AdamState {
  Gradients m;
  Gradients v;
  long step = 0;
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState make_adam_state(const NetParams& params, double step_size = 1e-3) {
  AdamState st;
  st.m = zero_like(params);
  st.v = zero_like(params);
  st.step_size = step_size;
  return st;
}

inline void adam_update(NetParams& params, const Gradients& grads, AdamState& st) {
  if (!same_shape(params, grads) || !same_shape(params, st.m))
    throw std::invalid_argument("adam: shape mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  auto update = [&](double& p, double& m, double& v, double g) {
    m = st.beta1 * m + (1.0 - st.beta1) * g;
    v = st.beta2 * v + (1.0 - st.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    p -= st.step_size * m_hat / (std::sqrt(v_hat) + st.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& pl = params.layers[l];
    auto& ml = st.m.layers[l];
    auto& vl = st.v.layers[l];
    const auto& gl = grads.layers[l];
    for (std::size_t i = 0; i < pl.w.size(); ++i) update(pl.w[i], ml.w[i], vl.w[i], gl.w[i]);
    for (std::size_t i = 0; i < pl.b.size(); ++i) update(pl.b[i], ml.b[i], vl.b[i], gl.b[i]);
  }
}

}  // namespace orsa
