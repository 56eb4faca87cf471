#pragma once
// Conversion of raw heterogeneous inputs (reals and categorical labels) into
// normalized feature vectors with every entry in [-1, 1].

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace orsa {

// A normalized input vector, one entry per non-metadata feature.
using Sample = std::vector<double>;

enum class FeatureKind { real, categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::real;
  double x_min = -1.0;  // real features
  double x_max = 1.0;
  std::vector<std::string> categories;  // categorical features, declared order
  bool metadata = false;                // excluded from Sample construction
};

using FeatureValue = std::variant<double, std::string>;

inline void validate_feature_spec(const FeatureSpec& spec) {
  if (spec.name.empty())
    throw std::invalid_argument("feature spec has empty name");
  if (spec.kind == FeatureKind::real) {
    if (!(spec.x_min < spec.x_max))
      throw std::invalid_argument("feature '" + spec.name + "': x_min must be < x_max");
  } else {
    if (spec.categories.empty())
      throw std::invalid_argument("feature '" + spec.name + "': no categories declared");
    for (std::size_t i = 0; i < spec.categories.size(); ++i)
      for (std::size_t j = i + 1; j < spec.categories.size(); ++j)
        if (spec.categories[i] == spec.categories[j])
          throw std::invalid_argument("feature '" + spec.name + "': duplicate category '" +
                                      spec.categories[i] + "'");
  }
}

// Real values pass through; a categorical label maps to its zero-based index
// in the declared category order.
inline double encode_mixed(const FeatureValue& raw, const FeatureSpec& spec) {
  if (spec.kind == FeatureKind::real) {
    if (const double* v = std::get_if<double>(&raw)) return *v;
    throw std::invalid_argument("feature '" + spec.name + "': expected a real value, got label '" +
                                std::get<std::string>(raw) + "'");
  }
  const std::string* label = std::get_if<std::string>(&raw);
  if (label == nullptr)
    throw std::invalid_argument("feature '" + spec.name + "': expected a category label");
  for (std::size_t i = 0; i < spec.categories.size(); ++i)
    if (spec.categories[i] == *label) return static_cast<double>(i);
  throw std::invalid_argument("feature '" + spec.name + "': unknown category '" + *label + "'");
}

// x' = -1 + 2 (x - x_min) / (x_max - x_min)
inline double minmax_normalize(double x, double x_min, double x_max) {
  if (!(x_min < x_max))
    throw std::invalid_argument("minmax_normalize: x_min must be < x_max");
  return -1.0 + 2.0 * (x - x_min) / (x_max - x_min);
}

inline double minmax_denormalize(double v, double x_min, double x_max) {
  if (!(x_min < x_max))
    throw std::invalid_argument("minmax_denormalize: x_min must be < x_max");
  return x_min + (v + 1.0) * (x_max - x_min) / 2.0;
}

// Encodes and normalizes one raw row. Metadata features are skipped, so the
// output length is the number of non-metadata specs. Out-of-range reals are
// clamped to [-1, 1] after normalization; *clamped counts the clamps.
inline Sample normalize_sample(std::span<const FeatureValue> raw,
                               std::span<const FeatureSpec> specs,
                               std::size_t* clamped = nullptr) {
  if (raw.size() != specs.size())
    throw std::invalid_argument("normalize_sample: got " + std::to_string(raw.size()) +
                                " values for " + std::to_string(specs.size()) + " features");
  Sample out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const FeatureSpec& spec = specs[i];
    if (spec.metadata) continue;
    const std::string where = "feature " + std::to_string(i) + " ('" + spec.name + "')";
    double x = encode_mixed(raw[i], spec);
    if (!std::isfinite(x)) throw std::invalid_argument(where + ": non-finite value");
    double lo = spec.x_min, hi = spec.x_max;
    if (spec.kind == FeatureKind::categorical) {
      lo = 0.0;
      hi = static_cast<double>(spec.categories.size()) - 1.0;
    }
    if (!(lo < hi))
      throw std::invalid_argument(where + ": degenerate range (x_min = x_max)");
    double v = minmax_normalize(x, lo, hi);
    if (v < -1.0) {
      v = -1.0;
      if (clamped != nullptr) ++*clamped;
    } else if (v > 1.0) {
      v = 1.0;
      if (clamped != nullptr) ++*clamped;
    }
    out.push_back(v);
  }
  return out;
}

inline std::size_t sample_dim(std::span<const FeatureSpec> specs) {
  std::size_t n = 0;
  for (const FeatureSpec& s : specs)
    if (!s.metadata) ++n;
  return n;
}

}  // namespace orsa
