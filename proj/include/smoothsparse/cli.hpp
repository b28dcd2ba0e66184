// Command-line driver: svf-check, path, gd-failure, highdim, mlp-demo, gradcheck.
#pragma once

#include "smoothsparse/config.hpp"
#include "smoothsparse/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace smoothsparse {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2 };

namespace detail {

struct GlobalOptions {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

inline std::ofstream open_output(const GlobalOptions& g, const std::string& name) {
  const std::filesystem::path dir(g.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::invalid_argument("cannot create output directory: " + dir.string());
  std::ofstream os(dir / name);
  if (!os) throw std::invalid_argument("cannot open output file: " + (dir / name).string());
  return os;
}

inline std::vector<ParamKind> parse_kind_list(const std::string& text) {
  if (text.empty() || text == "all") return {kAllParamKinds.begin(), kAllParamKinds.end()};
  std::vector<ParamKind> kinds;
  for (const auto& name : split_list(text)) {
    const auto kind = parse_param_kind(name);
    if (!kind) throw std::invalid_argument("unknown parametrization kind: " + name);
    kinds.push_back(*kind);
  }
  return kinds;
}

}  // namespace detail

/// Runs the command line; returns 0 on success, 1 on validation errors and
/// 2 on numerical failures.
inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Smooth sparse regularization through Hadamard overparametrization", "smoothsparse"};
  app.require_subcommand(1);
  app.fallthrough();
  detail::GlobalOptions g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "Run configuration file");
  app.add_option("--out", g.out, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed_value, "Global seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  // svf-check
  auto* svf = app.add_subcommand("svf-check", "Compare svf_numeric_min with the closed-form induced regularizers");
  std::string svf_kinds = "all";
  double svf_k = 3.0, svf_k1 = 1.0;
  Index svf_dims = 4;
  int svf_trials = 100;
  double svf_tol = 1e-6;
  svf->add_option("--kinds", svf_kinds, "Comma-separated kinds or 'all'");
  svf->add_option("--k", svf_k, "Depth k (fixed-depth kinds ignore it)");
  svf->add_option("--k1", svf_k1, "Depth k1 of the split-depth kinds");
  svf->add_option("--dims", svf_dims, "Dimension of beta (at most 8)")->check(CLI::Range(1, 8));
  svf->add_option("--trials", svf_trials, "Random vectors per kind")->check(CLI::PositiveNumber);
  svf->add_option("--tol", svf_tol, "Relative tolerance");

  // path
  auto* path = app.add_subcommand("path", "Regularization path from a configuration file; writes path.csv");

  // gd-failure
  auto* gdf = app.add_subcommand("gd-failure", "Direct subgradient GD versus smooth surrogate versus oracle");
  GdFailureConfig gdf_cfg;
  gdf->add_option("--n", gdf_cfg.n, "Samples");
  gdf->add_option("--d", gdf_cfg.d, "Features");
  gdf->add_option("--groups", gdf_cfg.groups, "Number of equal groups");
  gdf->add_option("--num-lambdas", gdf_cfg.num_lambdas, "Grid size");
  gdf->add_option("--epochs", gdf_cfg.l1_optim.epochs, "Epochs for the lasso runs");
  gdf->add_option("--group-epochs", gdf_cfg.l21_optim.epochs, "Epochs for the group-lasso runs");

  // highdim
  auto* hd = app.add_subcommand("highdim", "Estimation error across depths on sparse synthetic designs");
  HighdimConfig hd_cfg;
  hd->add_option("--n", hd_cfg.base.n, "Samples per split");
  hd->add_option("--d", hd_cfg.base.d, "Features");
  hd->add_option("--s", hd_cfg.base.s, "True support size");
  hd->add_option("--sigma", hd_cfg.base.sigma, "Noise sd");
  hd->add_option("--rhos", hd_cfg.rhos, "Toeplitz correlations")->delimiter(',');
  hd->add_option("--depths", hd_cfg.depths, "Depths k")->delimiter(',');
  hd->add_option("--reps", hd_cfg.repetitions, "Repetitions per design")->check(CLI::PositiveNumber);
  hd->add_option("--num-lambdas", hd_cfg.num_lambdas, "Grid size");
  hd->add_option("--epochs", hd_cfg.optim.epochs, "Epochs per run");

  // mlp-demo
  auto* mlp = app.add_subcommand("mlp-demo", "Sparsity of an overparametrized MLP layer");
  MlpDemoConfig mlp_cfg;
  mlp->add_option("--width", mlp_cfg.width, "Hidden width");
  mlp->add_option("--k", mlp_cfg.k, "Depth of the overparametrization");
  mlp->add_option("--lambdas", mlp_cfg.lambdas, "Penalty strengths")->delimiter(',');
  mlp->add_option("--epochs", mlp_cfg.optim.epochs, "Epochs per run");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every surrogate gradient");
  int gc_points = 20;
  gc->add_option("--points", gc_points, "Random points per kind")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*svf) {
      out << std::left << std::setw(12) << "kind" << std::setw(6) << "k" << std::setw(6) << "k1" << std::setw(8)
          << "trials" << std::setw(14) << "max_rel_err" << std::setw(10) << "failures"
          << "seconds\n";
      bool ok = true;
      for (ParamKind kind : detail::parse_kind_list(svf_kinds)) {
        const ParamSpec spec = ParamSpec::make(kind, sweep_partition(svf_dims), svf_k, svf_k1);
        const SvfCheckRow r = svf_check(spec, svf_trials, g.seed.value_or(0), svf_tol);
        ok = ok && r.failures == 0;
        out << std::setw(12) << to_string(kind) << std::setw(6) << spec.k << std::setw(6) << spec.k1 << std::setw(8)
            << r.trials << std::setw(14) << r.max_rel_err << std::setw(10) << r.failures << std::fixed
            << std::setprecision(2) << r.seconds << std::defaultfloat << std::setprecision(6) << "\n";
      }
      return ok ? kExitOk : kExitNumerical;
    }
    if (*path) {
      if (g.config.empty()) throw std::invalid_argument("path: --config is required");
      RunConfig cfg = load_run_config(g.config);
      if (g.seed) {
        cfg.design.seed = *g.seed;
        cfg.path.optim.seed = *g.seed;
      }
      const ParamSpec spec = cfg.param_spec();
      const SyntheticData data = cfg.make_data();
      PathConfig pc = cfg.path;
      pc.lambdas = cfg.lambdas(spec, data.train);
      const PathResult res = run_path(data.train, &data.val, &data.test, spec, pc);
      std::ofstream os = detail::open_output(g, "path.csv");
      write_path_csv(os, res);
      std::size_t failed = 0;
      for (const auto& r : res.records) failed += r.failed;
      out << "path: " << res.records.size() << " lambdas, " << failed << " failed, wrote "
          << (std::filesystem::path(g.out) / "path.csv").string() << "\n";
      for (const auto& r : res.records)
        if (r.failed) err << "lambda " << fmt_num(r.lambda) << ": " << r.message << "\n";
      return failed ? kExitNumerical : kExitOk;
    }
    if (*gdf) {
      if (g.seed) gdf_cfg.seed = *g.seed;
      const auto rows = experiment_gd_failure(gdf_cfg, g.threads);
      std::ofstream os = detail::open_output(g, "gd_failure.csv");
      write_gd_failure_csv(os, rows);
      out << "gd-failure: " << rows.size() << " rows written\n";
      return kExitOk;
    }
    if (*hd) {
      if (g.seed) hd_cfg.seed = *g.seed;
      hd_cfg.base.validate();
      const auto rows = experiment_highdim(hd_cfg, g.threads);
      std::ofstream os = detail::open_output(g, "highdim.csv");
      write_highdim_csv(os, rows);
      out << "k  median_est_err\n";
      for (int k : hd_cfg.depths) {
        std::vector<double> e;
        for (const auto& r : rows)
          if (r.k == k && r.m.est_err) e.push_back(*r.m.est_err);
        out << k << "  " << median(e) << "\n";
      }
      std::vector<double> lasso;
      for (const auto& r : rows)
        if (r.k == hd_cfg.depths.front()) lasso.push_back(r.lasso_est_err);
      out << "lasso  " << median(lasso) << "\n";
      return kExitOk;
    }
    if (*mlp) {
      if (g.seed) mlp_cfg.seed = *g.seed;
      const auto rows = experiment_mlp_sparsity(mlp_cfg, g.threads);
      std::ofstream os = detail::open_output(g, "mlp_demo.csv");
      write_mlp_demo_csv(os, rows);
      out << "lambda  test_accuracy  sparsity\n";
      for (const auto& r : rows) out << r.lambda << "  " << r.test_accuracy << "  " << r.sparsity << "\n";
      return kExitOk;
    }
    if (*gc) {
      const std::uint64_t seed = g.seed.value_or(0);
      bool ok = true;
      out << std::left << std::setw(14) << "objective" << "max_rel_err\n";
      for (ParamKind kind : kAllParamKinds) {
        const double e = gradcheck_surrogate(sweep_spec(kind, GroupPartition(std::vector<Index>{2, 1, 3})), gc_points, seed);
        ok = ok && e <= 1e-5;
        out << std::setw(14) << to_string(kind) << e << "\n";
      }
      const double e_mlp = std::max(gradcheck_mlp(MlpSpec{5, 4, 3, MlpLayer::Hidden}, 3, gc_points, seed),
                                    gradcheck_mlp(MlpSpec{5, 4, 3, MlpLayer::Output}, 2, gc_points, seed));
      ok = ok && e_mlp <= 1e-4;
      out << std::setw(14) << "mlp" << e_mlp << "\n";
      return ok ? kExitOk : kExitNumerical;
    }
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace smoothsparse
