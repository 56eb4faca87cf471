// Acceptance suite. Runs every criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion; the exit code is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lof_bruteforce.hpp"
#include "orsa/harness.hpp"

using namespace orsa;

namespace {

struct CriterionResult {
  bool pass = false;
  std::string detail;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::vector<Sample> draw_probes(int count, int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> probes(static_cast<std::size_t>(count));
  for (Sample& s : probes) {
    s.resize(static_cast<std::size_t>(dim));
    for (double& v : s) v = rng.uniform(-1.0, 1.0);
  }
  return probes;
}

// ---------------------------------------------------------------------------

CriterionResult lof_oracle_equivalence() {
  const double t0 = now_seconds();
  Rng rng(2024);
  double max_diff = 0.0;
  for (int set = 0; set < 200; ++set) {
    const int n = 3 + static_cast<int>(rng.uniform_index(48));
    std::vector<double> pts;
    for (int i = 0; i < n; ++i) pts.push_back(rng.uniform(-10.0, 10.0));
    for (int k = 1; k < n; ++k) {
      const std::vector<double> got = lof_scores(pts, k);
      const std::vector<double> expected = lof_bruteforce::scores(pts, k);
      for (int i = 0; i < n; ++i)
        max_diff = std::max(max_diff, std::abs(got[static_cast<std::size_t>(i)] -
                                               expected[static_cast<std::size_t>(i)]));
    }
  }
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = max_diff <= 1e-9 && elapsed < 10.0;
  r.detail = "200 point sets, all valid k_lof, max |diff| = " + fmt(max_diff) + ", " +
             fmt(elapsed) + "s";
  return r;
}

CriterionResult planted_outlier_scores() {
  // 20-point jittered grid on [0, 1] (diameter ~1) plus a point 5 diameters out
  Rng rng(77);
  std::vector<double> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(i / 19.0 + rng.uniform(-0.005, 0.005));
  pts.push_back(6.0);
  const int k = 3;
  const std::vector<double> scores = lof_scores(pts, k);
  const std::vector<double> oracle = lof_bruteforce::scores(pts, k);
  double max_cluster = 0.0, oracle_diff = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) max_cluster = std::max(max_cluster, scores[i]);
  for (std::size_t i = 0; i < pts.size(); ++i)
    oracle_diff = std::max(oracle_diff, std::abs(scores[i] - oracle[i]));
  CriterionResult r;
  r.pass = scores.back() > 1.5 && max_cluster < 1.3 && oracle_diff <= 1e-9;
  r.detail = "far point LOF = " + fmt(scores.back()) + " (> 1.5), max cluster LOF = " +
             fmt(max_cluster) + " (< 1.3), oracle diff = " + fmt(oracle_diff);
  return r;
}

CriterionResult gradient_check() {
  const double t0 = now_seconds();
  Rng rng(31);
  double worst_rel = 0.0;
  long checked = 0, skipped = 0;
  auto mask_of = [](const NetParams& params, const Sample& s) {
    NetWorkspace ws;
    forward_ws(params, s, ws);
    std::vector<bool> mask;
    for (std::size_t l = 1; l + 1 < ws.acts.size(); ++l)
      for (double a : ws.acts[l]) mask.push_back(a > 0.0);
    return mask;
  };
  for (int trial = 0; trial < 24; ++trial) {
    NetConfig cfg;
    cfg.input_dim = 1 + static_cast<int>(rng.uniform_index(5));
    cfg.hidden = {2 + static_cast<int>(rng.uniform_index(8)),
                  2 + static_cast<int>(rng.uniform_index(6))};
    cfg.init_seed = 4000 + static_cast<std::uint64_t>(trial);
    NetParams params = init_net(cfg);
    Sample s(static_cast<std::size_t>(cfg.input_dim));
    for (double& v : s) v = rng.uniform(-1.0, 1.0);
    const double upstream = rng.uniform(-2.0, 2.0);
    const Gradients grads = backward(params, s, upstream);

    std::vector<double*> ptrs;
    std::vector<double> flat;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      for (std::size_t i = 0; i < params.layers[l].w.size(); ++i) {
        ptrs.push_back(&params.layers[l].w[i]);
        flat.push_back(grads.layers[l].w[i]);
      }
      for (std::size_t i = 0; i < params.layers[l].b.size(); ++i) {
        ptrs.push_back(&params.layers[l].b[i]);
        flat.push_back(grads.layers[l].b[i]);
      }
    }
    const std::vector<bool> base_mask = mask_of(params, s);
    const double h = 1e-5;
    for (std::size_t p = 0; p < ptrs.size(); ++p) {
      const double saved = *ptrs[p];
      *ptrs[p] = saved + h;
      const double up = forward(params, s) * upstream;
      const bool stable_up = mask_of(params, s) == base_mask;
      *ptrs[p] = saved - h;
      const double down = forward(params, s) * upstream;
      const bool stable_down = mask_of(params, s) == base_mask;
      *ptrs[p] = saved;
      if (!stable_up || !stable_down) {
        ++skipped;  // difference quotient straddles a rectifier kink
        continue;
      }
      ++checked;
      const double fd = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(flat[p]), 1e-8});
      if (std::abs(fd) < 1e-8 && std::abs(flat[p]) < 1e-8) continue;
      worst_rel = std::max(worst_rel, std::abs(flat[p] - fd) / scale);
    }
  }
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = worst_rel <= 1e-4 && elapsed < 30.0 && checked > 100 * (skipped + 1);
  r.detail = "24 nets, " + std::to_string(checked) + " parameters, worst rel err = " +
             fmt(worst_rel) + ", " + fmt(elapsed) + "s";
  return r;
}

// shared replication state
struct Replication {
  RunConfig cfg;
  SynthDataset data;
  std::vector<EnsembleMember> members;
  NetConfig net_cfg;
};

Replication make_replication() {
  Replication rep;
  rep.cfg = default_run_config();
  rep.data = generate_dataset(rep.cfg.dataset);
  rep.members = synthetic_members(rep.cfg.dataset, rep.data.specs);
  rep.net_cfg.input_dim = rep.cfg.dataset.input_dim;
  rep.net_cfg.hidden = rep.cfg.hidden;
  rep.net_cfg.init_seed = rep.cfg.init_seed;
  return rep;
}

CriterionResult hard_minimum_limit(const Replication& rep) {
  const double t0 = now_seconds();
  OrsaConfig cfg = rep.cfg.orsa;
  cfg.k_s = 1;
  cfg.k_lof = 1;

  // (a) the oracle target is exactly the per-sample minimum on every sample
  long mismatches = 0, samples = 0;
  for (const DeviceTable& table : rep.data.tables) {
    for (const Sample& s : table.samples) {
      const std::vector<double> y = predict_ensemble(rep.members, s);
      const double target = oracle_target(y, cfg);
      const double lo = *std::min_element(y.begin(), y.end());
      if (target != lo) ++mismatches;
      ++samples;
    }
  }

  // (b) the trained net tracks the hard minimum on a probe grid
  const TrainOutcome out = train(rep.members, rep.data.tables, rep.net_cfg, cfg);
  const std::vector<Sample> probes = draw_probes(1000, rep.cfg.dataset.input_dim, 555);
  double sq = 0.0;
  for (const Sample& s : probes) {
    const std::vector<double> y = predict_ensemble(rep.members, s);
    const double lo = *std::min_element(y.begin(), y.end());
    const double pred = forward(out.params, s);
    sq += (pred - lo) * (pred - lo);
  }
  const double rmse = std::sqrt(sq / static_cast<double>(probes.size()));
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = mismatches == 0 && rmse <= 0.05 && elapsed <= 600.0;
  r.detail = std::to_string(mismatches) + "/" + std::to_string(samples) +
             " oracle mismatches, probe RMSE vs hard min = " + fmt(rmse) + " (<= 0.05), " +
             fmt(elapsed) + "s";
  return r;
}

CriterionResult average_limit() {
  SynthConfig synth;
  synth.n_devices = 30;
  synth.samples_per_device = 1000;
  synth.input_dim = 2;
  synth.seed = 99;
  for (int d = 0; d < synth.n_devices; ++d) synth.outlier_assignment[d] = OutlierType::regular;
  const SynthDataset ds = generate_dataset(synth);
  const std::vector<EnsembleMember> members = synthetic_members(synth, ds.specs);
  OrsaConfig cfg;
  cfg.k_s = 30;
  cfg.k_lof = 29;
  long within = 0, total = 0;
  double worst = 0.0;
  for (const DeviceTable& table : ds.tables) {
    for (const Sample& s : table.samples) {
      const std::vector<double> y = predict_ensemble(members, s);
      double mean = 0.0;
      for (double v : y) mean += v;
      mean /= static_cast<double>(y.size());
      const double target = oracle_target(y, cfg);
      const double rel = std::abs(target - mean) <= 1e-300
                             ? 0.0
                             : std::abs(target - mean) / std::max(std::abs(mean), 1e-300);
      if (std::abs(target - mean) <= 0.05 * std::abs(mean) || target == mean) ++within;
      worst = std::max(worst, rel);
      ++total;
    }
  }
  const double frac = static_cast<double>(within) / static_cast<double>(total);
  CriterionResult r;
  r.pass = frac >= 0.99;
  r.detail = fmt(100.0 * frac) + "% of " + std::to_string(total) +
             " samples within 5% of the plain mean (worst rel dev = " + fmt(worst) + ")";
  return r;
}

CriterionResult qualitative_replication(const Replication& rep, TrainOutcome& out) {
  const double t0 = now_seconds();
  out = train(rep.members, rep.data.tables, rep.net_cfg, rep.cfg.orsa);
  const long window = 5000;
  const std::vector<long> counts = selection_frequency(out.metrics, window);
  const std::vector<DeviceLoss> losses = loss_contributions(out.metrics, window);
  const long pairs = window * rep.cfg.orsa.batch_size;

  int type1 = -1, type2 = -1, type3 = -1;
  for (const DeviceSpec& spec : rep.data.specs) {
    if (spec.label == OutlierType::type1) type1 = spec.device_id;
    if (spec.label == OutlierType::type2) type2 = spec.device_id;
    if (spec.label == OutlierType::type3) type3 = spec.device_id;
  }
  const auto u1 = static_cast<std::size_t>(type1);
  const auto u2 = static_cast<std::size_t>(type2);
  const auto u3 = static_cast<std::size_t>(type3);

  const double sel_frac = static_cast<double>(counts[u1]) / static_cast<double>(pairs);
  auto ratio = [&](std::size_t dev) {
    return losses[dev].weighted > 0.0 ? losses[dev].equal / losses[dev].weighted
                                      : (losses[dev].equal > 0.0 ? 1e300 : 0.0);
  };
  const double r1 = ratio(u1), r2 = ratio(u2), r3 = ratio(u3);

  // outlier-sensitive weighting over a seeded probe batch
  const std::vector<Sample> probes = draw_probes(512, rep.cfg.dataset.input_dim, 888);
  const auto heat = weight_heatmap(rep.members, probes, rep.cfg.orsa);
  double t1_mean = 0.0;
  for (double w : heat[u1]) t1_mean += w;
  t1_mean /= static_cast<double>(probes.size());

  const OffsetArea& area = rep.data.specs[u2].area;
  double inside_sum = 0.0, outside_sum = 0.0;
  long inside_n = 0, outside_n = 0;
  for (std::size_t col = 0; col < probes.size(); ++col) {
    bool inside = true;
    for (std::size_t d = 0; d < area.lo.size(); ++d)
      if (probes[col][d] <= area.lo[d] || probes[col][d] >= area.hi[d]) inside = false;
    if (inside) {
      inside_sum += heat[u2][col];
      ++inside_n;
    } else {
      outside_sum += heat[u2][col];
      ++outside_n;
    }
  }
  const double inside_mean = inside_n > 0 ? inside_sum / static_cast<double>(inside_n) : 0.0;
  const double outside_mean = outside_n > 0 ? outside_sum / static_cast<double>(outside_n) : 0.0;

  const bool pass_sel = sel_frac >= 0.95;
  const bool pass_r1 = r1 >= 10.0;
  const bool pass_r23 = r2 >= 2.0 && r3 >= 2.0;
  const bool pass_heat1 = t1_mean <= 0.02;
  const bool pass_area = inside_n >= 10 && outside_n >= 10 && inside_mean <= 0.5 * outside_mean;
  const double elapsed = now_seconds() - t0;

  CriterionResult r;
  r.pass = pass_sel && pass_r1 && pass_r23 && pass_heat1 && pass_area;
  r.detail = "type1 selected " + fmt(100.0 * sel_frac) + "% (>= 95), ratios t1 = " + fmt(r1) +
             " (>= 10), t2 = " + fmt(r2) + ", t3 = " + fmt(r3) + " (>= 2), t1 mean weight = " +
             fmt(t1_mean) + " (<= 0.02), t2 weight inside/outside = " + fmt(inside_mean) + "/" +
             fmt(outside_mean) + ", " + fmt(elapsed) + "s";
  return r;
}

CriterionResult oracle_tracking(const Replication& rep, const TrainOutcome& out) {
  const std::vector<Sample> probes = draw_probes(1000, rep.cfg.dataset.input_dim, 321);
  double sq = 0.0;
  for (const Sample& s : probes) {
    const std::vector<double> y = predict_ensemble(rep.members, s);
    const double target = oracle_target(y, rep.cfg.orsa);
    const double pred = forward(out.params, s);
    sq += (pred - target) * (pred - target);
  }
  const double rmse = std::sqrt(sq / static_cast<double>(probes.size()));
  CriterionResult r;
  r.pass = rmse <= 0.1;
  r.detail = "probe RMSE vs closed-form oracle = " + fmt(rmse) + " (<= 0.1)";
  return r;
}

CriterionResult determinism() {
  RunConfig cfg = default_run_config();
  cfg.dataset.n_devices = 8;
  cfg.dataset.samples_per_device = 400;
  cfg.dataset.seed = 5;
  cfg.dataset.outlier_assignment.clear();
  for (int d = 0; d < 8; ++d) cfg.dataset.outlier_assignment[d] = OutlierType::regular;
  cfg.dataset.outlier_assignment[2] = OutlierType::type1;
  cfg.dataset.outlier_assignment[5] = OutlierType::type3;
  cfg.orsa.k_s = 3;
  cfg.orsa.k_lof = 3;
  cfg.orsa.steps = 600;
  cfg.orsa.batch_size = 32;
  cfg.orsa.metric_window = 200;
  cfg.hidden = {16, 8};

  const fs::path root = fs::temp_directory_path() / "orsa_acceptance" / "determinism";
  fs::remove_all(root);
  for (const char* side : {"a", "b"}) {
    const fs::path base = root / side;
    cmd_generate(cfg, base / "data");
    cmd_train(base / "data", cfg, base / "run");
    cmd_report(base / "run");
  }
  long compared = 0, mismatched = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    if (read_text(entry.path()) != read_text(root / "b" / rel)) ++mismatched;
    ++compared;
  }
  CriterionResult r;
  r.pass = compared >= 12 && mismatched == 0;
  r.detail = std::to_string(compared) + " CSV artifacts compared, " + std::to_string(mismatched) +
             " byte mismatches";
  return r;
}

CriterionResult mode_duality(const Replication& rep) {
  const std::vector<Sample> probes = draw_probes(1000, rep.cfg.dataset.input_dim, 246);
  OrsaConfig min_cfg = rep.cfg.orsa;
  OrsaConfig max_cfg = min_cfg;
  max_cfg.mode = Mode::soft_max;
  double worst = 0.0;
  for (const Sample& s : probes) {
    const std::vector<double> y = predict_ensemble(rep.members, s);
    std::vector<double> neg(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
    worst = std::max(worst,
                     std::abs(oracle_target(neg, max_cfg) - (-oracle_target(y, min_cfg))));
  }
  CriterionResult r;
  r.pass = worst <= 1e-12;
  r.detail = "1000 samples, max |target(max, -y) + target(min, y)| = " + fmt(worst);
  return r;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&failures](int id, const char* name, const CriterionResult& r) {
    std::printf("%s  %d  %-28s %s\n", r.pass ? "PASS" : "FAIL", id, name, r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass) ++failures;
  };

  report(1, "lof-oracle-equivalence", lof_oracle_equivalence());
  report(2, "planted-outlier-scores", planted_outlier_scores());
  report(3, "gradient-check", gradient_check());

  const Replication rep = make_replication();
  report(4, "hard-minimum-limit", hard_minimum_limit(rep));
  report(5, "average-limit", average_limit());

  TrainOutcome va_outcome;
  report(6, "qualitative-replication", qualitative_replication(rep, va_outcome));
  report(7, "oracle-tracking", oracle_tracking(rep, va_outcome));
  report(8, "determinism", determinism());
  report(9, "mode-duality", mode_duality(rep));

  if (failures == 0)
    std::printf("all 9 acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", failures);
  return failures;
}
