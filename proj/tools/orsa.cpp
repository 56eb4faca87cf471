// Command line front end: generate / train / sweep / lof / report.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "orsa/harness.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<long> seed;
  std::optional<int> k_s;
  std::optional<int> k_lof;
  std::optional<std::string> mode;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run config file (JSON)");
  cmd->add_option("--seed", flags.seed, "override the relevant seed");
  cmd->add_option("--k-s", flags.k_s, "selection size");
  cmd->add_option("--k-lof", flags.k_lof, "LOF neighbor count");
  cmd->add_option("--mode", flags.mode, "aggregation mode: min or max")
      ->check(CLI::IsMember({"min", "max"}));
}

orsa::RunConfig resolve_config(const CommonFlags& flags, bool seed_is_dataset_seed) {
  orsa::RunConfig cfg = flags.config_path.empty() ? orsa::default_run_config()
                                                  : orsa::load_run_config(flags.config_path);
  if (flags.seed) {
    if (seed_is_dataset_seed)
      cfg.dataset.seed = static_cast<std::uint64_t>(*flags.seed);
    else
      cfg.orsa.seed = static_cast<std::uint64_t>(*flags.seed);
  }
  if (flags.k_s) cfg.orsa.k_s = *flags.k_s;
  if (flags.k_lof) cfg.orsa.k_lof = *flags.k_lof;
  if (flags.mode) cfg.orsa.mode = orsa::mode_from_string(*flags.mode);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"outlier-robust soft-min/soft-max ensemble aggregation"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, sweep_flags;
  std::string gen_out, train_dataset, train_out, sweep_dataset, sweep_out;
  std::string lof_input, lof_out, report_dir;
  int lof_k = 0;

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic multi-device dataset");
  add_common(gen, gen_flags);
  gen->add_option("--out", gen_out, "output dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "train the aggregation net on a dataset");
  train->add_option("dataset", train_dataset, "dataset directory")->required();
  add_common(train, train_flags);
  train->add_option("--out", train_out, "output run directory")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "train one run per (k_s, k_lof) grid point");
  sweep->add_option("dataset", sweep_dataset, "dataset directory")->required();
  add_common(sweep, sweep_flags);
  sweep->add_option("--out", sweep_out, "output sweep directory")->required();

  CLI::App* lof = app.add_subcommand("lof", "score a column of reals with LOF");
  lof->add_option("input", lof_input, "file with one real per line")->required();
  lof->add_option("--k-lof", lof_k, "neighbor count")->required();
  lof->add_option("--out", lof_out, "output directory (default: print to stdout)");

  CLI::App* report = app.add_subcommand("report", "merge a run's artifacts into report.csv");
  report->add_option("run", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const orsa::RunConfig cfg = resolve_config(gen_flags, true);
      const auto art = orsa::cmd_generate(cfg, gen_out);
      std::printf("wrote %zu device tables and %s\n", art.device_csvs.size(),
                  art.manifest.string().c_str());
    } else if (train->parsed()) {
      const orsa::RunConfig cfg = resolve_config(train_flags, false);
      const auto art = orsa::cmd_train(train_dataset, cfg, train_out);
      std::printf("trained %ld steps, final loss %s, artifacts in %s\n",
                  art.outcome.metrics.steps,
                  orsa::format_double(art.outcome.metrics.loss_trace.back()).c_str(),
                  art.dir.string().c_str());
    } else if (sweep->parsed()) {
      orsa::RunConfig cfg = resolve_config(sweep_flags, false);
      if (cfg.sweep_grid.empty() && sweep_flags.k_s && sweep_flags.k_lof)
        cfg.sweep_grid.emplace_back(*sweep_flags.k_s, *sweep_flags.k_lof);
      const auto art = orsa::cmd_sweep(sweep_dataset, cfg, sweep_out);
      std::printf("swept %zu grid points, table in %s\n", art.run_dirs.size(),
                  art.summary.string().c_str());
    } else if (lof->parsed()) {
      std::optional<orsa::fs::path> out;
      if (!lof_out.empty()) out = orsa::fs::path(lof_out) / "lof_scores.txt";
      const auto scores = orsa::cmd_lof(lof_input, lof_k, out);
      if (out) {
        std::printf("wrote %zu scores to %s\n", scores.size(), out->string().c_str());
      } else {
        for (double s : scores) std::printf("%s\n", orsa::format_double(s).c_str());
      }
    } else if (report->parsed()) {
      const auto out = orsa::cmd_report(report_dir);
      std::printf("wrote %s\n", out.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
