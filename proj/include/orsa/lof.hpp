#pragma once
// Local Outlier Factor over scalar point sets (the per-sample ensemble
// outputs), and the reciprocal-LOF weights used by the weighted loss.
//
// Neighborhoods follow the classic definition: every point whose distance is
// at most the k-th nearest distance belongs to N_k, so ties can push |N_k|
// above k_lof. The mean reachability distance is floored at kLrdEpsilon
// before inversion, which drives the LOF of co-located duplicates to 1.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace orsa {

inline constexpr double kLrdEpsilon = 1e-12;

// Scalar metric, kept behind one function so vector-valued points stay possible.
inline double point_distance(double a, double b) { return std::abs(a - b); }

namespace detail {

inline void check_lof_args(std::size_t n, int k_lof) {
  if (n < 2) throw std::invalid_argument("lof: need at least 2 points, got " + std::to_string(n));
  if (k_lof < 1 || static_cast<std::size_t>(k_lof) > n - 1)
    throw std::invalid_argument("lof: k_lof must be in [1, " + std::to_string(n - 1) + "], got " +
                                std::to_string(k_lof));
}

inline void check_point_index(std::size_t n, int idx) {
  if (idx < 0 || static_cast<std::size_t>(idx) >= n)
    throw std::invalid_argument("lof: point index " + std::to_string(idx) + " out of range");
}

}  // namespace detail

struct Neighborhood {
  double k_distance = 0.0;
  std::vector<int> neighbors;  // all points with distance <= k_distance, in index order
};

inline Neighborhood k_distance(std::span<const double> points, int idx, int k_lof) {
  const std::size_t n = points.size();
  detail::check_lof_args(n, k_lof);
  detail::check_point_index(n, idx);

  std::vector<double> dists;
  dists.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    if (static_cast<int>(j) != idx) dists.push_back(point_distance(points[idx], points[j]));
  std::nth_element(dists.begin(), dists.begin() + (k_lof - 1), dists.end());
  const double d_k = dists[static_cast<std::size_t>(k_lof) - 1];

  Neighborhood nb;
  nb.k_distance = d_k;
  for (std::size_t j = 0; j < n; ++j)
    if (static_cast<int>(j) != idx && point_distance(points[idx], points[j]) <= d_k)
      nb.neighbors.push_back(static_cast<int>(j));
  return nb;
}

inline double reachability_distance(double k_dist_b, double dist_ab) {
  if (k_dist_b < 0.0 || dist_ab < 0.0)
    throw std::invalid_argument("reachability_distance: distances must be non-negative");
  return std::max(k_dist_b, dist_ab);
}

inline double local_reachability_density(std::span<const double> points, int idx, int k_lof) {
  const Neighborhood nb = k_distance(points, idx, k_lof);
  double sum = 0.0;
  for (int b : nb.neighbors) {
    const Neighborhood nb_b = k_distance(points, b, k_lof);
    sum += reachability_distance(nb_b.k_distance, point_distance(points[idx], points[b]));
  }
  const double mean_rd = sum / static_cast<double>(nb.neighbors.size());
  return 1.0 / std::max(mean_rd, kLrdEpsilon);
}

// One score per point: the mean ratio of the neighbors' local reachability
// density to the point's own. Inliers land near 1, outliers above.
inline std::vector<double> lof_scores(std::span<const double> points, int k_lof) {
  const std::size_t n = points.size();
  detail::check_lof_args(n, k_lof);
  for (double p : points)
    if (!std::isfinite(p)) throw std::invalid_argument("lof: points must be finite");

  std::vector<Neighborhood> nbs(n);
  for (std::size_t i = 0; i < n; ++i) nbs[i] = k_distance(points, static_cast<int>(i), k_lof);

  std::vector<double> lrd(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int b : nbs[i].neighbors)
      sum += std::max(nbs[static_cast<std::size_t>(b)].k_distance,
                      point_distance(points[i], points[static_cast<std::size_t>(b)]));
    const double mean_rd = sum / static_cast<double>(nbs[i].neighbors.size());
    lrd[i] = 1.0 / std::max(mean_rd, kLrdEpsilon);
  }

  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int b : nbs[i].neighbors) sum += lrd[static_cast<std::size_t>(b)] / lrd[i];
    scores[i] = sum / static_cast<double>(nbs[i].neighbors.size());
  }
  return scores;
}

// w_i = (1 / LOF_i) / sum_j (1 / LOF_j) over the selected indices.
inline std::vector<double> lof_weights(std::span<const double> scores,
                                       std::span<const int> selected) {
  if (selected.empty()) throw std::invalid_argument("lof_weights: empty selection");
  double denom = 0.0;
  for (int i : selected) {
    if (i < 0 || static_cast<std::size_t>(i) >= scores.size())
      throw std::invalid_argument("lof_weights: selected index " + std::to_string(i) +
                                  " out of range");
    const double s = scores[static_cast<std::size_t>(i)];
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("lof_weights: scores must be positive and finite");
    denom += 1.0 / s;
  }
  std::vector<double> weights;
  weights.reserve(selected.size());
  for (int i : selected) weights.push_back((1.0 / scores[static_cast<std::size_t>(i)]) / denom);
  return weights;
}

}  // namespace orsa
