#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "orsa/harness.hpp"

using namespace orsa;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "orsa_integration" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig ten_device_config(bool with_outlier) {
  RunConfig cfg = default_run_config();
  cfg.dataset.n_devices = 10;
  cfg.dataset.samples_per_device = 800;
  cfg.dataset.seed = 404;
  cfg.dataset.outlier_assignment.clear();
  for (int d = 0; d < 10; ++d) cfg.dataset.outlier_assignment[d] = OutlierType::regular;
  if (with_outlier) cfg.dataset.outlier_assignment[3] = OutlierType::type1;
  cfg.orsa.batch_size = 64;
  cfg.orsa.seed = 1234;
  cfg.orsa.metric_window = 1000;
  cfg.hidden = {48, 24};
  return cfg;
}

double summary_rmse(const fs::path& summary_csv, std::size_t column) {
  const std::vector<std::string> lines = read_lines(summary_csv);
  REQUIRE(lines.size() == 2);
  return parse_double(split_csv_line(lines.at(1)).at(column), "sweep_summary");
}

}  // namespace

TEST_SUITE("integration") {

TEST_CASE("sweep at (1,1) tracks the hard minimum") {
  RunConfig cfg = ten_device_config(true);
  cfg.orsa.steps = 8000;
  cfg.sweep_grid = {{1, 1}};
  const fs::path data = fresh_dir("hardmin_data");
  cmd_generate(cfg, data);
  const SweepArtifacts art = cmd_sweep(data, cfg, fresh_dir("hardmin_sweep"));
  CHECK(summary_rmse(art.summary, 2) <= 0.05);  // rmse_extreme
}

TEST_CASE("sweep at (N, N-1) on outlier-free data tracks the mean") {
  RunConfig cfg = ten_device_config(false);
  cfg.orsa.steps = 4000;
  cfg.sweep_grid = {{10, 9}};
  const fs::path data = fresh_dir("mean_data");
  cmd_generate(cfg, data);
  const SweepArtifacts art = cmd_sweep(data, cfg, fresh_dir("mean_sweep"));
  CHECK(summary_rmse(art.summary, 3) <= 0.05);  // rmse_mean
}

TEST_CASE("intermediate k with fitted table members lands between min and mean") {
  // 30 devices with the stock outlier assignment; the members are table
  // lookups over the noisy per-device CSVs, so regular outputs spread the way
  // fitted models would instead of tying exactly
  RunConfig cfg = default_run_config();
  cfg.dataset.samples_per_device = 500;
  cfg.dataset.seed = 505;
  cfg.members.kind = MemberSource::Kind::table_self;
  cfg.orsa.steps = 6000;
  cfg.orsa.seed = 1234;
  cfg.orsa.metric_window = 1000;
  cfg.hidden = {48, 24};
  cfg.sweep_grid = {{6, 6}};
  const fs::path data = fresh_dir("tradeoff_data");
  cmd_generate(cfg, data);
  const SweepArtifacts art = cmd_sweep(data, cfg, fresh_dir("tradeoff_sweep"));

  const std::vector<std::string> dump = read_lines(art.run_dirs.at(0) / "probe_predictions.csv");
  REQUIRE(dump.size() == static_cast<std::size_t>(kSweepProbeCount) + 1);
  int between = 0;
  for (std::size_t row = 1; row < dump.size(); ++row) {
    const std::vector<std::string> cells = split_csv_line(dump.at(row));
    const double pred = parse_double(cells.at(3), "dump");
    const double extreme = parse_double(cells.at(4), "dump");
    const double mean = parse_double(cells.at(5), "dump");
    if (pred > extreme && pred < mean) ++between;
  }
  CHECK(between >= 90);

  SUBCASE("the smoothed loss trace is non-increasing end to end") {
    const std::vector<std::string> trace = read_lines(art.run_dirs.at(0) / "loss_trace.csv");
    REQUIRE(trace.size() == 6001);
    std::vector<double> windows;
    for (std::size_t start = 1; start + 500 <= trace.size(); start += 500) {
      double sum = 0.0;
      for (std::size_t i = start; i < start + 500; ++i)
        sum += parse_double(split_csv_line(trace.at(i)).at(1), "trace");
      windows.push_back(sum / 500.0);
    }
    REQUIRE(windows.size() == 12);
    CHECK(windows.back() <= windows.front());
    for (std::size_t i = 0; i + 1 < windows.size(); ++i)
      CHECK(windows[i + 1] <= 1.05 * windows[i]);
  }

  SUBCASE("the merged report ranks the constant-offset outlier as most down-weighted") {
    const fs::path report = cmd_report(art.run_dirs.at(0));
    const std::vector<std::string> lines = read_lines(report);
    REQUIRE(lines.size() == 31);
    double best_ratio = -1.0;
    std::string best_label;
    for (std::size_t row = 1; row < lines.size(); ++row) {
      const std::vector<std::string> cells = split_csv_line(lines.at(row));
      const double ratio = parse_double(cells.at(5), "report");
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best_label = cells.at(1);
      }
    }
    CHECK(best_label == "type1");
  }
}

}  // TEST_SUITE
