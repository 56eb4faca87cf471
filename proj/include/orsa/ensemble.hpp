#pragma once
// The fixed set of per-device models and the per-sample best/worst selection.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "orsa/preprocess.hpp"
#include "orsa/synthgen.hpp"

namespace orsa {

enum class Mode { soft_min, soft_max };

inline std::string to_string(Mode m) { return m == Mode::soft_min ? "min" : "max"; }

inline Mode mode_from_string(const std::string& s) {
  if (s == "min") return Mode::soft_min;
  if (s == "max") return Mode::soft_max;
  throw std::invalid_argument("mode must be 'min' or 'max', got '" + s + "'");
}

struct EnsembleMember {
  int device_id = 0;
  std::function<double(std::span<const double>)> model;
};

// Members that replay the generator's noise-free response exactly.
inline std::vector<EnsembleMember> synthetic_members(const SynthConfig& cfg,
                                                     std::span<const DeviceSpec> specs) {
  std::vector<EnsembleMember> members;
  members.reserve(specs.size());
  for (const DeviceSpec& spec : specs) {
    members.push_back({spec.device_id, [spec, cfg](std::span<const double> s) {
                         return deterministic_output(spec, cfg, s);
                       }});
  }
  return members;
}

// Fit-free stand-in for an externally trained device model: the output of the
// nearest stored sample in normalized feature space, ties to the lowest row.
inline EnsembleMember table_member(int device_id, std::vector<Sample> samples,
                                   std::vector<double> outputs) {
  if (samples.empty() || samples.size() != outputs.size())
    throw std::invalid_argument("table member " + std::to_string(device_id) +
                                ": needs equally many samples and outputs");
  const std::size_t dim = samples.front().size();
  for (const Sample& s : samples)
    if (s.size() != dim)
      throw std::invalid_argument("table member " + std::to_string(device_id) +
                                  ": inconsistent sample dimensions");
  auto lookup = [device_id, dim, samples = std::move(samples),
                 outputs = std::move(outputs)](std::span<const double> q) {
    if (q.size() != dim)
      throw std::invalid_argument("table member " + std::to_string(device_id) +
                                  ": query has dimension " + std::to_string(q.size()) +
                                  ", table has " + std::to_string(dim));
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_row = 0;
    for (std::size_t r = 0; r < samples.size(); ++r) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double diff = samples[r][i] - q[i];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        best_row = r;
      }
    }
    return outputs[best_row];
  };
  return {device_id, std::move(lookup)};
}

inline std::vector<double> predict_ensemble(std::span<const EnsembleMember> members,
                                            std::span<const double> s) {
  if (members.empty()) throw std::invalid_argument("predict_ensemble: no members");
  std::vector<double> y_out;
  y_out.reserve(members.size());
  for (const EnsembleMember& m : members) {
    if (!m.model)
      throw std::runtime_error("ensemble member " + std::to_string(m.device_id) + ": no model");
    double y;
    try {
      y = m.model(s);
    } catch (const std::exception& e) {
      throw std::runtime_error("ensemble member " + std::to_string(m.device_id) + ": " + e.what());
    }
    if (!std::isfinite(y))
      throw std::runtime_error("ensemble member " + std::to_string(m.device_id) +
                               ": non-finite output");
    y_out.push_back(y);
  }
  return y_out;
}

struct Selection {
  std::vector<int> indices;
  std::vector<double> values;  // ascending for soft_min, descending for soft_max
};

// The k_s smallest (soft_min) or largest (soft_max) outputs. Ties are broken
// by the lower device index so replays are total-ordered.
inline Selection select_k(std::span<const double> y_out, int k_s, Mode mode) {
  const std::size_t n = y_out.size();
  if (n == 0) throw std::invalid_argument("select_k: empty output vector");
  if (k_s < 1 || static_cast<std::size_t>(k_s) > n)
    throw std::invalid_argument("select_k: k_s must be in [1, " + std::to_string(n) + "], got " +
                                std::to_string(k_s));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (mode == Mode::soft_min) {
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double ya = y_out[static_cast<std::size_t>(a)];
      const double yb = y_out[static_cast<std::size_t>(b)];
      return ya < yb || (ya == yb && a < b);
    });
  } else {
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double ya = y_out[static_cast<std::size_t>(a)];
      const double yb = y_out[static_cast<std::size_t>(b)];
      return ya > yb || (ya == yb && a < b);
    });
  }
  Selection sel;
  sel.indices.assign(order.begin(), order.begin() + k_s);
  sel.values.reserve(static_cast<std::size_t>(k_s));
  for (int i : sel.indices) sel.values.push_back(y_out[static_cast<std::size_t>(i)]);
  return sel;
}

}  // namespace orsa
