#include <doctest.h>

#include <cmath>
#include <vector>

#include "lof_bruteforce.hpp"
#include "orsa/lof.hpp"
#include "orsa/rng.hpp"

using namespace orsa;

TEST_SUITE("lof") {

TEST_CASE("k_distance on small fixtures") {
  const std::vector<double> pts{0.0, 1.0, 3.0};
  SUBCASE("nearest neighbor") {
    const Neighborhood nb = k_distance(pts, 0, 1);
    CHECK(nb.k_distance == 1.0);
    CHECK(nb.neighbors == std::vector<int>{1});
  }
  SUBCASE("two neighbors") {
    const Neighborhood nb = k_distance(pts, 0, 2);
    CHECK(nb.k_distance == 3.0);
    CHECK(nb.neighbors == std::vector<int>{1, 2});
  }
  SUBCASE("ties at the k-th distance are all included") {
    const std::vector<double> tied{0.0, 1.0, 1.0, 5.0};
    const Neighborhood nb = k_distance(tied, 0, 1);
    CHECK(nb.k_distance == 1.0);
    CHECK(nb.neighbors == std::vector<int>{1, 2});
  }
  SUBCASE("argument validation") {
    CHECK_THROWS_AS(k_distance(std::vector<double>{1.0}, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(k_distance(pts, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(k_distance(pts, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(k_distance(pts, 7, 1), std::invalid_argument);
  }
}

TEST_CASE("reachability_distance is the max of its inputs") {
  CHECK(reachability_distance(2.0, 1.0) == 2.0);
  CHECK(reachability_distance(2.0, 3.0) == 3.0);
  CHECK(reachability_distance(0.0, 0.0) == 0.0);
  CHECK_THROWS_AS(reachability_distance(-1.0, 0.0), std::invalid_argument);
}

TEST_CASE("local_reachability_density fixtures") {
  SUBCASE("unit grid interior point has lrd 1") {
    const std::vector<double> grid{0.0, 1.0, 2.0, 3.0, 4.0};
    CHECK(local_reachability_density(grid, 2, 2) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("duplicates floor the mean reachability distance") {
    const std::vector<double> dup{5.0, 5.0, 5.0};
    CHECK(local_reachability_density(dup, 0, 1) == 1.0 / kLrdEpsilon);
  }
  SUBCASE("single far neighbor") {
    const std::vector<double> pair{0.0, 10.0};
    CHECK(local_reachability_density(pair, 0, 1) == doctest::Approx(0.1).epsilon(1e-12));
  }
}

TEST_CASE("lof_scores fixtures") {
  SUBCASE("identical points all score 1") {
    const std::vector<double> same{2.5, 2.5, 2.5, 2.5};
    for (double s : lof_scores(same, 2)) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("dense cluster plus far point, validated against the brute force") {
    const std::vector<double> pts{0.0, 0.1, 0.2, 0.3, 10.0};
    const std::vector<double> scores = lof_scores(pts, 2);
    const std::vector<double> expected = lof_bruteforce::scores(pts, 2);
    for (std::size_t i = 0; i < pts.size(); ++i)
      CHECK(scores[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    CHECK(scores[4] > 1.5);
    for (std::size_t i = 0; i < 4; ++i) CHECK(scores[i] < 1.3);
  }
  SUBCASE("evenly spaced points stay near 1") {
    std::vector<double> grid;
    for (int i = 0; i < 12; ++i) grid.push_back(static_cast<double>(i));
    const std::vector<double> scores = lof_scores(grid, 2);
    const std::vector<double> expected = lof_bruteforce::scores(grid, 2);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(scores[i] == doctest::Approx(expected[i]).epsilon(1e-12));
      CHECK(scores[i] >= 0.8);
      CHECK(scores[i] <= 1.3);
    }
  }
  SUBCASE("non-finite points are rejected") {
    CHECK_THROWS_AS(lof_scores(std::vector<double>{0.0, std::nan(""), 1.0}, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("lof matches the brute force on random point sets for every valid k") {
  Rng rng(101);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(20));
    std::vector<double> pts;
    for (int i = 0; i < n; ++i) pts.push_back(rng.uniform(-5.0, 5.0));
    for (int k = 1; k < n; ++k) {
      const std::vector<double> got = lof_scores(pts, k);
      const std::vector<double> expected = lof_bruteforce::scores(pts, k);
      for (int i = 0; i < n; ++i)
        CHECK(std::abs(got[static_cast<std::size_t>(i)] -
                       expected[static_cast<std::size_t>(i)]) <= 1e-9);
    }
  }
}

TEST_CASE("moving a point away from a cluster never lowers its score") {
  const std::vector<double> cluster{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  for (int k = 1; k <= 3; ++k) {
    double prev = 0.0;
    for (double offset = 1.5; offset <= 20.0; offset += 0.5) {
      std::vector<double> pts = cluster;
      pts.push_back(offset);
      const double score = lof_scores(pts, k).back();
      if (offset > 1.5) CHECK(score >= prev - 1e-12);
      prev = score;
    }
  }
}

TEST_CASE("lof is invariant under translation and positive scaling") {
  Rng rng(102);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_index(15));
    std::vector<double> pts;
    for (int i = 0; i < n; ++i) pts.push_back(rng.uniform(-2.0, 2.0));
    const double shift = rng.uniform(-50.0, 50.0);
    const double scale = rng.uniform(0.1, 20.0);
    const int k = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n - 1)));
    std::vector<double> shifted = pts, scaled = pts;
    for (double& v : shifted) v += shift;
    for (double& v : scaled) v *= scale;
    const std::vector<double> base = lof_scores(pts, k);
    const std::vector<double> s1 = lof_scores(shifted, k);
    const std::vector<double> s2 = lof_scores(scaled, k);
    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      CHECK(s1[u] == doctest::Approx(base[u]).epsilon(1e-9));
      CHECK(s2[u] == doctest::Approx(base[u]).epsilon(1e-9));
    }
  }
}

TEST_CASE("lof_weights fixtures") {
  SUBCASE("equal scores give the uniform 1/k weighting") {
    const std::vector<double> scores{1.7, 1.7, 1.7, 1.7};
    const std::vector<int> sel{0, 2, 3};
    for (double w : lof_weights(scores, sel))
      CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("reciprocal normalization of {1, 1, 100}") {
    const std::vector<double> scores{1.0, 1.0, 100.0};
    const std::vector<int> sel{0, 1, 2};
    const std::vector<double> w = lof_weights(scores, sel);
    CHECK(w[0] == doctest::Approx(100.0 / 201.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(100.0 / 201.0).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(1.0 / 201.0).epsilon(1e-12));
  }
  SUBCASE("single selected index gets the whole weight") {
    const std::vector<double> scores{3.0, 5.0};
    const std::vector<int> sel{1};
    CHECK(lof_weights(scores, sel) == std::vector<double>{1.0});
  }
  SUBCASE("rejections") {
    const std::vector<double> scores{1.0, 2.0};
    CHECK_THROWS_AS(lof_weights(scores, std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(lof_weights(scores, std::vector<int>{5}), std::invalid_argument);
    CHECK_THROWS_AS(lof_weights(std::vector<double>{1.0, 0.0}, std::vector<int>{1}),
                    std::invalid_argument);
  }
}

TEST_CASE("weight properties on random scores") {
  Rng rng(103);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(12));
    std::vector<double> scores;
    std::vector<int> sel;
    for (int i = 0; i < n; ++i) {
      scores.push_back(rng.uniform(0.5, 8.0));
      sel.push_back(i);
    }
    const std::vector<double> w = lof_weights(scores, sel);
    double sum = 0.0, mean_score = 0.0;
    for (double v : w) sum += v;
    for (double s : scores) mean_score += s;
    mean_score /= n;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      CHECK(w[ui] >= 0.0);
      // strict reciprocal ordering
      for (int j = 0; j < n; ++j)
        if (scores[ui] < scores[static_cast<std::size_t>(j)])
          CHECK(w[ui] > w[static_cast<std::size_t>(j)]);
      // above-average outlyingness implies a below-uniform weight
      if (scores[ui] > mean_score) CHECK(w[ui] < 1.0 / n);
    }
  }
}

}  // TEST_SUITE
