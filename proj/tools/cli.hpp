#pragma once

#include "hsi/hsi.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace hsi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

namespace fs = std::filesystem;

inline Cube load(const fs::path &path, bool normalize) {
  Cube c = read_cube(path);
  return normalize ? normalize_bands(std::move(c)) : c;
}

inline void ensure_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

inline void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

struct SimulateArgs {
  std::string truth, out_dir, config;
  int case_id = 1;
  std::uint64_t seed = 0;
  bool normalize = false;
};

inline void simulate(const SimulateArgs &a, std::ostream &out) {
  KeyValues kv{{"case_id", std::to_string(a.case_id)}};
  if (!a.config.empty()) {
    for (auto &entry : read_key_values(a.config)) {
      if (entry.first == "case_id" || entry.first == "seed") {
        throw std::invalid_argument("'" + entry.first + "' is set on the command line, not in the config");
      }
      if (is_noise_key(entry.first)) {
        kv.push_back(std::move(entry));
      } else if (!is_solver_key(entry.first)) {
        throw std::invalid_argument("unknown config key '" + entry.first + "'");
      }
    }
  }
  kv.emplace_back("seed", std::to_string(a.seed));
  const NoiseSpec spec = noise_spec_from(kv);
  const Cube truth = load(a.truth, a.normalize);
  const Simulation sim = simulate_case(truth, spec);

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  write_cube(dir / "noisy.cube", sim.noisy);
  write_cube(dir / "gaussian.cube", sim.gaussian);
  write_cube(dir / "stripe_field.cube", sim.stripe_field);
  write_cube(dir / "impulse_mask.cube", sim.impulse_mask);
  write_cube(dir / "deadline_mask.cube", sim.deadline_mask);
  write_key_values(dir / "manifest.txt", simulation_manifest(spec, sim));
  out << "wrote " << (dir / "noisy.cube").string() << '\n';
}

struct DenoiseArgs {
  std::string in, out_dir, config;
  bool normalize = false;
};

inline void denoise(const DenoiseArgs &a, std::ostream &out) {
  SolverConfig cfg;
  if (!a.config.empty()) cfg = read_run_config(a.config).solver;
  const Cube y = load(a.in, a.normalize);
  const SolveResult r = solve(y, cfg);
  const auto &dg = r.diagnostics;

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  write_cube(dir / "clean.cube", r.decomposition.clean);
  write_cube(dir / "sparse.cube", r.decomposition.sparse);
  write_cube(dir / "stripes.cube", r.decomposition.stripes);
  write_cube(dir / "residual.cube", r.decomposition.residual);
  {
    std::ofstream csv(dir / "diagnostics.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot open '" + (dir / "diagnostics.csv").string() + "' for writing");
    write_diagnostics_csv(csv, dg);
    if (!csv) throw IoError("write to diagnostics.csv failed");
  }
  SolverConfig resolved = cfg;
  resolved.ranks_x = dg.ranks_x;
  resolved.ranks_b = dg.ranks_b;
  KeyValues manifest = to_key_values(resolved);
  manifest.emplace_back("exponents", hsi::detail::join(dg.exponents));
  manifest.emplace_back("iterations", std::to_string(dg.iterations));
  manifest.emplace_back("converged", dg.converged ? "true" : "false");
  write_key_values(dir / "manifest.txt", manifest);

  out << "iterations=" << dg.iterations << '\n'
      << "converged=" << (dg.converged ? "true" : "false") << '\n'
      << "p_h=" << format_double(dg.exponents[0]) << '\n'
      << "p_w=" << format_double(dg.exponents[1]) << '\n'
      << "p_p=" << format_double(dg.exponents[2]) << '\n'
      << "wall_seconds=" << std::fixed << std::setprecision(3) << dg.wall_seconds << std::defaultfloat << '\n';
}

struct EvaluateArgs {
  std::string ref, test, out_csv;
};

inline void evaluate_cmd(const EvaluateArgs &a, std::ostream &out) {
  const MetricsReport r = evaluate(read_cube(a.ref), read_cube(a.test));
  if (!a.out_csv.empty()) {
    std::ofstream csv(a.out_csv, std::ios::trunc);
    if (!csv) throw IoError("cannot open '" + a.out_csv + "' for writing");
    write_metrics_csv(csv, r);
    if (!csv) throw IoError("write to '" + a.out_csv + "' failed");
  }
  out << "mpsnr=" << format_double(r.mpsnr) << '\n'
      << "mssim=" << format_double(r.mssim) << '\n'
      << "msam=" << format_double(r.msam) << '\n'
      << "sam_min=" << format_double(r.sam_min) << '\n'
      << "sam_max=" << format_double(r.sam_max) << '\n';
}

struct FitArgs {
  std::string in;
  bool normalize = false;
};

inline void fit_p(const FitArgs &a, std::ostream &out) {
  const HyperLaplacianFit fit = estimate_p(load(a.in, a.normalize));
  const char *names[3] = {"h", "w", "p"};
  for (std::size_t n = 0; n < 3; ++n) out << "p_" << names[n] << '=' << format_double(fit.directions[n].p) << '\n';
  for (std::size_t n = 0; n < 3; ++n) out << "k_" << names[n] << '=' << format_double(fit.directions[n].k) << '\n';
  for (std::size_t n = 0; n < 3; ++n) out << "sigma_" << names[n] << '=' << format_double(fit.directions[n].sigma) << '\n';
}

}  // namespace detail

///
/// Runs one subcommand. `args` excludes the program name.
/// Returns 0 on success, 2 for usage or configuration errors, 1 for I/O
/// and other runtime failures; failures print one line to `err`.
///
inline int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Hyperspectral cube restoration"};
  app.name("hsi-restore");
  app.require_subcommand(1);

  detail::SimulateArgs sim;
  auto *simulate = app.add_subcommand("simulate", "Add a benchmark noise case to a clean cube");
  simulate->add_option("--truth", sim.truth, "Clean input cube")->required();
  simulate->add_option("--case", sim.case_id, "Noise case 1-6")->required()->check(CLI::Range(1, 6));
  simulate->add_option("--seed", sim.seed, "Random seed")->required();
  simulate->add_option("--out-dir", sim.out_dir, "Output directory")->required();
  simulate->add_option("--config", sim.config, "key = value overrides for noise parameters");
  simulate->add_flag("--normalize", sim.normalize, "Min-max normalize each band of the input first");

  detail::DenoiseArgs den;
  auto *denoise = app.add_subcommand("denoise", "Restore a noisy cube");
  denoise->add_option("--in", den.in, "Noisy cube")->required();
  denoise->add_option("--out-dir", den.out_dir, "Output directory")->required();
  denoise->add_option("--config", den.config, "key = value solver configuration");
  denoise->add_flag("--normalize", den.normalize, "Min-max normalize each band of the input first");

  detail::EvaluateArgs ev;
  auto *evaluate = app.add_subcommand("evaluate", "Compare a restored cube to a reference");
  evaluate->add_option("--ref", ev.ref, "Reference cube")->required();
  evaluate->add_option("--test", ev.test, "Cube under test")->required();
  evaluate->add_option("--out", ev.out_csv, "Per-band CSV report");

  detail::FitArgs fit;
  auto *fitp = app.add_subcommand("fit-p", "Estimate hyper-Laplacian exponents of a cube");
  fitp->add_option("--in", fit.in, "Input cube")->required();
  fitp->add_flag("--normalize", fit.normalize, "Min-max normalize each band of the input first");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) detail::simulate(sim, out);
    if (denoise->parsed()) detail::denoise(den, out);
    if (evaluate->parsed()) detail::evaluate_cmd(ev, out);
    if (fitp->parsed()) detail::fit_p(fit, out);
  } catch (const IoError &e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace hsi::cli
