#pragma once
// Synthetic multi-device dataset generator. Every device shares one smooth
// base response; outlier devices distort it in one of four ways:
//   type1  constant offset everywhere
//   type2  smooth bump offset inside a random box of the input space
//   type3  the type2 bump, applied with probability p1 per sample
//   type4  the type3 offset, additionally scaled by a random factor a
// Regular devices get additive Gaussian noise, outliers by default do not.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "orsa/preprocess.hpp"
#include "orsa/rng.hpp"

namespace orsa {

enum class OutlierType { regular, type1, type2, type3, type4 };

inline std::string to_string(OutlierType t) {
  switch (t) {
    case OutlierType::regular: return "regular";
    case OutlierType::type1: return "type1";
    case OutlierType::type2: return "type2";
    case OutlierType::type3: return "type3";
    case OutlierType::type4: return "type4";
  }
  throw std::invalid_argument("unknown outlier type");
}

inline OutlierType outlier_type_from_string(const std::string& s) {
  if (s == "regular") return OutlierType::regular;
  if (s == "type1") return OutlierType::type1;
  if (s == "type2") return OutlierType::type2;
  if (s == "type3") return OutlierType::type3;
  if (s == "type4") return OutlierType::type4;
  throw std::invalid_argument("unknown outlier type '" + s + "'");
}

// Coefficients of the shared base response: per-dimension sinusoids plus a
// sinusoid and low-order polynomial in the coordinate mean. All terms bounded,
// so |f| <= dim_amp + mean_amp + quad + |lin| = 1.25 on the input cube.
struct BaseCoeffs {
  double dim_amp = 0.55;
  double dim_freq = 2.3;
  double phase0 = 0.4;
  double phase_step = 0.9;
  double mean_amp = 0.35;
  double mean_freq = 3.1;
  double mean_phase = -0.7;
  double quad = 0.25;
  double lin = -0.1;
};

struct SynthConfig {
  int n_devices = 30;
  int samples_per_device = 10000;
  int input_dim = 2;
  std::map<int, OutlierType> outlier_assignment;  // must cover [0, n_devices)
  double noise_sigma = 0.1;
  double p1 = 0.3;
  double scale_lo = -1.0;  // range for the type4 factor a
  double scale_hi = 1.0;
  double constant_offset = -1.0;  // type1 magnitude
  bool noise_on_outliers = false;
  std::uint64_t seed = 0;
  BaseCoeffs base;
};

inline void validate(const SynthConfig& cfg) {
  if (cfg.n_devices < 2) throw std::invalid_argument("synth: n_devices must be >= 2");
  if (cfg.samples_per_device < 1)
    throw std::invalid_argument("synth: samples_per_device must be >= 1");
  if (cfg.input_dim < 1) throw std::invalid_argument("synth: input_dim must be >= 1");
  if (!(cfg.p1 >= 0.0 && cfg.p1 <= 1.0)) throw std::invalid_argument("synth: p1 must be in [0, 1]");
  if (cfg.noise_sigma < 0.0) throw std::invalid_argument("synth: noise_sigma must be >= 0");
  if (!(cfg.scale_lo <= cfg.scale_hi))
    throw std::invalid_argument("synth: scale range lower bound exceeds upper bound");
  for (const auto& [dev, type] : cfg.outlier_assignment)
    if (dev < 0 || dev >= cfg.n_devices)
      throw std::invalid_argument("synth: outlier_assignment names device " + std::to_string(dev) +
                                  " outside [0, " + std::to_string(cfg.n_devices) + ")");
  for (int dev = 0; dev < cfg.n_devices; ++dev)
    if (cfg.outlier_assignment.find(dev) == cfg.outlier_assignment.end())
      throw std::invalid_argument("synth: outlier_assignment missing device " +
                                  std::to_string(dev));
}

// Axis-aligned box with b_l < b_u per dimension, inside [-1, 1].
struct OffsetArea {
  std::vector<double> lo;
  std::vector<double> hi;
};

inline void validate(const OffsetArea& area) {
  if (area.lo.size() != area.hi.size() || area.lo.empty())
    throw std::invalid_argument("offset area: bound vectors must be non-empty and equal length");
  for (std::size_t i = 0; i < area.lo.size(); ++i)
    if (!(area.lo[i] < area.hi[i]))
      throw std::invalid_argument("offset area: lower bound must be < upper bound in dim " +
                                  std::to_string(i));
}

struct DeviceTable {
  int device_id = 0;
  std::vector<Sample> samples;
  std::vector<double> outputs;
  OutlierType label = OutlierType::regular;
};

// Everything needed to replay a device's noise-free response exactly.
struct DeviceSpec {
  int device_id = 0;
  OutlierType label = OutlierType::regular;
  OffsetArea area;            // empty unless type2..type4
  std::uint64_t draw_key = 0; // keys the per-sample draws of type3/type4
};

struct SynthDataset {
  std::vector<DeviceTable> tables;
  std::vector<DeviceSpec> specs;
};

inline double base_function(std::span<const double> s, const BaseCoeffs& c) {
  const double d = static_cast<double>(s.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    acc += std::sin(c.dim_freq * s[i] + c.phase0 + c.phase_step * static_cast<double>(i));
  double m = 0.0;
  for (double v : s) m += v;
  m /= d;
  return c.dim_amp * acc / d + c.mean_amp * std::sin(c.mean_freq * m + c.mean_phase) +
         c.quad * m * m + c.lin * m;
}

// Gaussian-profile bump: exactly 0 on and outside the area boundary, exactly
// -1 at the area center; smooth in between (product of per-dimension profiles
// built from a truncated normal shape).
inline double smooth_offset(const OffsetArea& area, std::span<const double> s) {
  if (area.lo.size() != s.size())
    throw std::invalid_argument("smooth_offset: area dimension mismatch");
  constexpr double z_cut = 3.0;  // profile truncated at three sigma
  const double tail = std::exp(-0.5 * z_cut * z_cut);
  double prod = 1.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] <= area.lo[i] || s[i] >= area.hi[i]) return 0.0;
    const double center = area.lo[i] + (area.hi[i] - area.lo[i]) / 2.0;
    const double sigma = (area.hi[i] - area.lo[i]) / (2.0 * z_cut);
    const double z = (s[i] - center) / sigma;
    prod *= (std::exp(-0.5 * z * z) - tail) / (1.0 - tail);
  }
  return -prod;
}

// Per dimension: width uniform in [0.3, 0.8] of the normalized span (2.0),
// position uniform so the box fits inside [-1, 1].
inline OffsetArea draw_offset_area(Rng& rng, int dim) {
  OffsetArea area;
  area.lo.resize(static_cast<std::size_t>(dim));
  area.hi.resize(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    const double width = rng.uniform(0.3, 0.8) * 2.0;
    const double lo = rng.uniform(-1.0, 1.0 - width);
    area.lo[static_cast<std::size_t>(i)] = lo;
    area.hi[static_cast<std::size_t>(i)] = lo + width;
  }
  return area;
}

// The noise-free part of a device's response. The probabilistic choices of
// type3/type4 are derived from the sample's bit pattern, so the same point
// always gets the same draw and the map stays a deterministic function.
inline double deterministic_output(const DeviceSpec& spec, const SynthConfig& cfg,
                                   std::span<const double> s) {
  const double b = base_function(s, cfg.base);
  switch (spec.label) {
    case OutlierType::regular:
      return b;
    case OutlierType::type1:
      return b + cfg.constant_offset;
    case OutlierType::type2:
      return b + smooth_offset(spec.area, s);
    case OutlierType::type3: {
      const std::uint64_t h = hash_sample(spec.draw_key, s);
      const bool hit = hash_to_unit(hash2(h, 1)) < cfg.p1;
      return b + (hit ? smooth_offset(spec.area, s) : 0.0);
    }
    case OutlierType::type4: {
      const std::uint64_t h = hash_sample(spec.draw_key, s);
      const bool hit = hash_to_unit(hash2(h, 1)) < cfg.p1;
      const double a = cfg.scale_lo + (cfg.scale_hi - cfg.scale_lo) * hash_to_unit(hash2(h, 2));
      return b + (hit ? a * smooth_offset(spec.area, s) : 0.0);
    }
  }
  throw std::invalid_argument("unknown outlier type");
}

inline double device_output(const DeviceSpec& spec, const SynthConfig& cfg,
                            std::span<const double> s, Rng& noise_rng) {
  double y = deterministic_output(spec, cfg, s);
  if (spec.label == OutlierType::regular || cfg.noise_on_outliers)
    y += noise_rng.normal(0.0, cfg.noise_sigma);
  return y;
}

namespace detail {
// substream ids per device
inline constexpr std::uint64_t kStreamInputs = 0;
inline constexpr std::uint64_t kStreamNoise = 1;
inline constexpr std::uint64_t kStreamArea = 2;
inline constexpr std::uint64_t kStreamDrawKey = 3;
}  // namespace detail

inline DeviceSpec make_device_spec(const SynthConfig& cfg, int device_id) {
  const auto it = cfg.outlier_assignment.find(device_id);
  if (it == cfg.outlier_assignment.end())
    throw std::invalid_argument("synth: outlier_assignment missing device " +
                                std::to_string(device_id));
  DeviceSpec spec;
  spec.device_id = device_id;
  spec.label = it->second;
  spec.draw_key = hash2(hash2(cfg.seed, static_cast<std::uint64_t>(device_id)),
                        detail::kStreamDrawKey);
  if (spec.label == OutlierType::type2 || spec.label == OutlierType::type3 ||
      spec.label == OutlierType::type4) {
    Rng area_rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(device_id),
                                 detail::kStreamArea);
    spec.area = draw_offset_area(area_rng, cfg.input_dim);
  }
  return spec;
}

// Inputs are drawn uniformly over the normalized cube [-1, 1]^d, each device
// from its own derived stream, so devices can be generated in any order.
inline SynthDataset generate_dataset(const SynthConfig& cfg) {
  validate(cfg);
  SynthDataset ds;
  ds.tables.reserve(static_cast<std::size_t>(cfg.n_devices));
  ds.specs.reserve(static_cast<std::size_t>(cfg.n_devices));
  for (int dev = 0; dev < cfg.n_devices; ++dev) {
    const DeviceSpec spec = make_device_spec(cfg, dev);
    Rng input_rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(dev),
                                  detail::kStreamInputs);
    Rng noise_rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(dev),
                                  detail::kStreamNoise);
    DeviceTable table;
    table.device_id = dev;
    table.label = spec.label;
    table.samples.reserve(static_cast<std::size_t>(cfg.samples_per_device));
    table.outputs.reserve(static_cast<std::size_t>(cfg.samples_per_device));
    for (int row = 0; row < cfg.samples_per_device; ++row) {
      Sample s(static_cast<std::size_t>(cfg.input_dim));
      for (double& v : s) v = input_rng.uniform(-1.0, 1.0);
      table.outputs.push_back(device_output(spec, cfg, s, noise_rng));
      table.samples.push_back(std::move(s));
    }
    ds.tables.push_back(std::move(table));
    ds.specs.push_back(spec);
  }
  return ds;
}

}  // namespace orsa
