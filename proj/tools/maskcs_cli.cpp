// maskcs: command-line front end for analysis, recovery and the Monte Carlo
// protocols. Every subcommand writes its outputs under --output-dir and prints
// a single summary line on stdout.
//
// Exit codes: 0 success, 1 usage or invalid input, 2 I/O, 3 non-convergence.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskcs/maskcs.hpp"

namespace fs = std::filesystem;
using namespace maskcs;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNonConvergence = 3 };

struct Common {
  std::uint64_t seed = 1;
  unsigned workers = default_workers();
  std::string output_dir = ".";
};

const std::map<std::string, FilterModel> kFilters{{"allpass", FilterModel::AllPass},
                                                  {"lowpass", FilterModel::LowPass}};
const std::map<std::string, MaskAlphabet> kAlphabets{{"signed", MaskAlphabet::Signed},
                                                     {"binary", MaskAlphabet::Binary}};
const std::map<std::string, Projection> kProjections{
    {"auto", Projection::Auto}, {"cg", Projection::InnerCg}, {"dense", Projection::DenseQr}};
const std::map<std::string, RipMode> kRipModes{{"exhaustive", RipMode::Exhaustive},
                                               {"randomized", RipMode::Randomized}};

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw io_error("failed writing " + path.string());
}

std::string image_extension(const PlanarImage& img) { return img.channels() == 1 ? ".pgm" : ".ppm"; }

// ---------------------------------------------------------------------------
// 1D model options shared by analyze / recover-*

struct ModelOptions {
  Index L = 256;
  Index N = 4;
  Index K = 64;
  std::string filter = "allpass";
  Index bandwidth = 31;
  std::string masks = "signed";

  void add(CLI::App& app) {
    app.add_option("--L", L, "Signal length")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--N", N, "Sensors per mask (uniform subsampling)")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--K", K, "Number of masks")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--filter", filter, "Random kernel model")
        ->capture_default_str()
        ->check(CLI::IsMember({"allpass", "lowpass"}));
    app.add_option("--bandwidth", bandwidth, "Low-pass bandwidth in DFT bins")->capture_default_str();
    app.add_option("--masks", masks, "Mask alphabet")->capture_default_str()->check(CLI::IsMember({"signed", "binary"}));
  }

  ForwardModel build(std::uint64_t seed) const {
    const FilterSpec spec{kFilters.at(filter), bandwidth};
    return ForwardModel(make_kernel(spec, L, derive_seed(seed, {0})), SamplingPattern::uniform(L, N),
                        generate_masks(L, K, kAlphabets.at(masks), derive_seed(seed, {1})));
  }
};

struct SolverOptions {
  double tol = 1e-6;
  Index max_iters = 0;
  double penalty = 1.0;
  std::string projection = "auto";
  Index inner_max_iters = 0;

  void add(CLI::App& app, bool admm) {
    app.add_option("--tol", tol, "Relative stopping tolerance")->capture_default_str();
    app.add_option("--max-iters", max_iters, "Iteration cap (0: 5000 for basis pursuit, 2L for least squares)")
        ->capture_default_str();
    if (!admm) return;
    app.add_option("--penalty", penalty, "Initial ADMM penalty")->capture_default_str();
    app.add_option("--projection", projection, "Constraint projection: auto, cg, dense")
        ->capture_default_str()
        ->check(CLI::IsMember({"auto", "cg", "dense"}));
    app.add_option("--inner-max-iters", inner_max_iters, "Inner CG cap (0: number of measurements)")
        ->capture_default_str();
  }

  SolverConfig config() const {
    SolverConfig c;
    c.tol = tol;
    c.max_iters = max_iters;
    c.admm_penalty = penalty;
    c.projection = kProjections.at(projection);
    c.inner_max_iters = inner_max_iters;
    return c;
  }
};

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  ModelOptions model;
  double delta = 0.5;
  double beta = 1.0;
  Index S = 1;
  Index rip_S = 0;
  std::string rip_mode = "randomized";
  Index rip_trials = 1000;
};

int run_analyze(const Common& common, const AnalyzeOptions& opt) {
  const ForwardModel model = opt.model.build(common.seed);
  KeyValueRecord rec;
  rec.add("L", model.signal_size()).add("N", model.sensors()).add("K", model.mask_count());
  rec.add("filter", opt.model.filter).add("masks", opt.model.masks).add("seed", common.seed);
  const SpectralReport report = spectral_report(model);
  rec.append(report.to_record());

  BoundEvaluation bounds;
  bool defined = true;
  try {
    bounds = conditioning_bounds(report.rho, report.theta_min, report.theta_max, model.signal_size(),
                             opt.delta, opt.beta);
    bounds = rip_mask_scale(report.mu, opt.S, model.signal_size(), opt.delta, bounds);
  } catch (const std::domain_error& e) {
    defined = false;
    std::cerr << "warning: " << e.what() << "\n";
  }
  rec.add("bounds_defined", defined);
  if (defined) {
    rec.add("S", opt.S);
    rec.append(bounds.to_record());
    rec.add("cond_within_guarantee", report.cond <= bounds.cond_guarantee);
  }
  if (opt.rip_S > 0) {
    const auto est = empirical_rip(model, opt.rip_S, kRipModes.at(opt.rip_mode), opt.rip_trials,
                                   derive_seed(common.seed, {2}));
    rec.add("rip_S", opt.rip_S).add("rip_mode", opt.rip_mode).add("rip_supports", est.supports);
    rec.add("rip_delta_lower", est.delta_lower).add("rip_delta_upper", est.delta_upper);
  }
  const fs::path out = prepare_dir(common.output_dir) / "analysis.txt";
  write_text(out, rec.str());
  std::cout << "analyze: cond=" << format_double(report.cond) << " mu=" << format_double(report.mu)
            << " rho=" << format_double(report.rho) << " -> " << out.string() << "\n";
  if (!report.converged) {
    std::cerr << "iterative eigenvalue estimate did not reach its tolerance\n";
    return kNonConvergence;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// recover-ls / recover-bp

struct RecoverOptions {
  ModelOptions model;
  SolverOptions solver;
  Index S = 0;
};

void write_vector_csv(const fs::path& path, const Vector& truth, const Vector& estimate) {
  std::ostringstream s;
  s << "index,truth,estimate\n";
  for (Index i = 0; i < truth.size(); ++i)
    s << i << "," << format_double(truth[i], 17) << "," << format_double(estimate[i], 17) << "\n";
  write_text(path, s.str());
}

int run_recover(const Common& common, const RecoverOptions& opt, SolverVariant variant) {
  const ForwardModel acquisition = opt.model.build(common.seed);
  const ForwardModel model = acquisition.with_masks(acquisition.masks().to_signed());
  const Index L = model.signal_size();
  const Index S = opt.S > 0 ? opt.S : L;
  const Vector x = sparse_signal(L, S, derive_seed(common.seed, {3}));
  const Vector y = acquisition.masks().alphabet() == MaskAlphabet::Binary
                       ? measurements_binary_to_signed(acquisition.measure(x), acquisition.apply_G(x))
                       : model.apply_H(x);
  RecoveryResult res = variant == SolverVariant::LeastSquares
                           ? least_squares(model, y, opt.solver.config())
                           : basis_pursuit(model, y, SynthesisBasis::canonical(), opt.solver.config());
  score(res, x);

  KeyValueRecord rec;
  rec.add("variant", std::string(variant == SolverVariant::LeastSquares ? "least_squares" : "basis_pursuit"));
  rec.add("L", L).add("N", model.sensors()).add("K", model.mask_count()).add("S", S);
  rec.add("filter", opt.model.filter).add("masks", opt.model.masks).add("seed", common.seed);
  rec.append(res.to_record());
  const fs::path dir = prepare_dir(common.output_dir);
  const std::string stem = variant == SolverVariant::LeastSquares ? "recover_ls" : "recover_bp";
  write_text(dir / (stem + ".txt"), rec.str());
  write_vector_csv(dir / (stem + ".csv"), x, res.estimate);
  std::cout << stem << ": rel_error=" << format_double(res.rel_error) << " iterations=" << res.iterations
            << " converged=" << (res.converged ? "true" : "false") << " -> "
            << (dir / (stem + ".txt")).string() << "\n";
  return res.converged ? kOk : kNonConvergence;
}

// ---------------------------------------------------------------------------
// sweep-cond / phase-transition

struct SweepOptions {
  std::string preset = "desk";
  Index L = 0, N = 0;
  Index K_start = 0, K_stop = 0, K_step = 0;
  Index trials = 0;
  std::string filter = "both";
  Index bandwidth = 0;
  std::vector<double> quantiles{0.10, 0.50, 0.90};
  bool svg = false;
  // Phase transition only.
  Index S_first = -1, S_step = 0, S_max = -1;
  double threshold = 0.05;
  SolverOptions solver;
};

// Preset values are overridden field by field by whatever the user supplied.
ExperimentConfig make_experiment(const SweepOptions& o, ExperimentConfig base, const Common& common) {
  if (o.L > 0) base.L = o.L;
  if (o.N > 0) base.N = o.N;
  if (o.K_start > 0) base.K.start = o.K_start;
  if (o.K_stop > 0) base.K.stop = o.K_stop;
  if (o.K_step > 0) base.K.step = o.K_step;
  if (o.trials > 0) base.trials = o.trials;
  if (o.bandwidth > 0) base.filter.bandwidth = o.bandwidth;
  if (o.S_first >= 0) base.S_first = o.S_first;
  if (o.S_step > 0) base.S_step = o.S_step;
  if (o.S_max >= 0) base.S_max = o.S_max;
  base.success_threshold = o.threshold;
  base.quantile_probs = o.quantiles;
  base.base_seed = common.seed;
  base.workers = common.workers;
  base.solver = o.solver.config();
  return base;
}

void add_sweep_options(CLI::App& app, SweepOptions& o, bool phase) {
  app.add_option("--preset", o.preset, "Base configuration: desk or full")
      ->capture_default_str()
      ->check(CLI::IsMember({"desk", "full"}));
  app.add_option("--L", o.L, "Signal length (0: preset)")->capture_default_str();
  app.add_option("--N", o.N, "Sensors per mask (0: preset)")->capture_default_str();
  app.add_option("--K-start", o.K_start, "First K (0: preset)")->capture_default_str();
  app.add_option("--K-stop", o.K_stop, "Last K, inclusive (0: preset)")->capture_default_str();
  app.add_option("--K-step", o.K_step, "K increment (0: preset)")->capture_default_str();
  app.add_option("--trials", o.trials, "Trials per K or per cell (0: preset)")->capture_default_str();
  app.add_option("--bandwidth", o.bandwidth, "Low-pass bandwidth (0: preset)")->capture_default_str();
  app.add_flag("--svg", o.svg, "Also write an SVG figure")->capture_default_str();
  if (!phase) {
    app.add_option("--filter", o.filter, "Kernel model: allpass, lowpass or both")
        ->capture_default_str()
        ->check(CLI::IsMember({"allpass", "lowpass", "both"}));
    app.add_option("--quantiles", o.quantiles, "Quantile probabilities")->capture_default_str()->delimiter(',');
    return;
  }
  o.filter = "allpass";
  app.add_option("--filter", o.filter, "Kernel model: allpass or lowpass")
      ->capture_default_str()
      ->check(CLI::IsMember({"allpass", "lowpass"}));
  app.add_option("--S-first", o.S_first, "First sparsity level (-1: preset)")->capture_default_str();
  app.add_option("--S-step", o.S_step, "Sparsity increment (0: preset)")->capture_default_str();
  app.add_option("--S-max", o.S_max, "Largest sparsity, 0 for L (-1: preset)")->capture_default_str();
  app.add_option("--threshold", o.threshold, "Success threshold on the relative error")->capture_default_str();
  o.solver.add(app, true);
}

int run_sweep(const Common& common, const SweepOptions& o) {
  const ExperimentConfig base =
      o.preset == "full" ? ExperimentConfig::full_condition_sweep() : ExperimentConfig::desk_condition_sweep();
  const fs::path dir = prepare_dir(common.output_dir);
  std::vector<std::string> models;
  if (o.filter == "both")
    models = {"allpass", "lowpass"};
  else
    models = {o.filter};
  std::vector<svg::Series> series;
  std::string summary;
  for (const auto& name : models) {
    ExperimentConfig cfg = make_experiment(o, base, common);
    cfg.filter.model = kFilters.at(name);
    const auto rows = condition_sweep(cfg);
    std::ostringstream csv;
    write_condition_csv(csv, rows, cfg.quantile_probs);
    const fs::path path = dir / ("cond_" + name + ".csv");
    write_text(path, csv.str());
    Index flagged = 0;
    for (const auto& r : rows) flagged += r.rank_deficient ? 1 : 0;
    if (flagged > 0)
      std::cerr << name << ": " << flagged << " K values with K*N < L reported as inf\n";
    const auto& last = rows.back();
    summary += " " + name + ".median_cond@K=" + std::to_string(last.K) + "=" +
               format_double(last.q[last.q.size() / 2]) + " -> " + path.string();
    series.push_back({name, name == "allpass" ? "#1f77b4" : "#d62728", rows});
  }
  if (o.svg) write_text(dir / "cond.svg", svg::condition_plot(series));
  std::cout << "sweep-cond:" << summary << "\n";
  return kOk;
}

int run_phase(const Common& common, const SweepOptions& o) {
  const ExperimentConfig base = o.preset == "full" ? ExperimentConfig::full_phase_transition()
                                                    : ExperimentConfig::desk_phase_transition();
  ExperimentConfig cfg = make_experiment(o, base, common);
  cfg.filter.model = kFilters.at(o.filter);
  const auto cells = phase_transition(cfg);
  std::ostringstream csv;
  write_phase_csv(csv, cells);
  const fs::path dir = prepare_dir(common.output_dir);
  const fs::path path = dir / "phase.csv";
  write_text(path, csv.str());
  if (o.svg) write_text(dir / "phase.svg", svg::phase_heatmap(cells));
  Index nonconverged = 0, infeasible = 0;
  for (const auto& c : cells) {
    nonconverged += c.nonconverged;
    infeasible += c.infeasible_successes;
  }
  if (nonconverged > 0) std::cerr << nonconverged << " solves hit the iteration cap (counted as failures)\n";
  if (infeasible > 0) std::cerr << infeasible << " successes had a feasibility gap above tol\n";
  std::cout << "phase-transition: cells=" << cells.size() << " nonconverged=" << nonconverged << " -> "
            << path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// demo-2d

struct DemoOptions {
  std::string image;
  std::string psf;
  Index K = 50;
  Index stride = 11;
  std::string masks = "binary";
  SolverOptions solver;
};

int run_demo(const Common& common, const DemoOptions& o) {
  const PlanarImage scene = read_pnm(o.image);
  const PlanarImage psf = read_pnm(o.psf);
  if (psf.channels() != 1) throw std::invalid_argument("PSF must be a single-channel (PGM) image");
  DemoConfig cfg;
  cfg.K = o.K;
  cfg.stride = o.stride;
  cfg.alphabet = kAlphabets.at(o.masks);
  cfg.seed = common.seed;
  cfg.workers = common.workers;
  cfg.solver = o.solver.config();
  const DemoResult res = image_demo_2d(scene, psf.planes.front(), cfg);
  const fs::path dir = prepare_dir(common.output_dir);
  const std::string ext = image_extension(res.estimate);
  write_pnm((dir / ("estimate" + ext)).string(), res.estimate);
  write_pnm((dir / ("abserr" + ext)).string(), res.abs_error);
  write_text(dir / "metrics.txt", res.metrics().str());
  std::cout << "demo-2d: rel_error=" << format_double(res.rel_error)
            << " undersampling=" << format_double(res.undersampling(), 4)
            << " converged=" << (res.converged ? "true" : "false") << " -> " << (dir / "metrics.txt").string()
            << "\n";
  return res.converged ? kOk : kNonConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-mask compressive deconvolution: analysis, recovery and experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI file with one [subcommand] section; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.get_formatter()->column_width(40);

  Common common;
  app.add_option("--seed", common.seed, "Base seed for every random draw")->capture_default_str();
  app.add_option("--workers", common.workers, "Worker threads for Monte Carlo trials")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--output-dir", common.output_dir, "Directory for output files")->capture_default_str();

  AnalyzeOptions analyze;
  auto* a = app.add_subcommand("analyze", "Conditioning quantities, eigenvalue extremes and mask-count bounds");
  analyze.model.add(*a);
  a->add_option("--delta", analyze.delta, "Deviation parameter in (0, 1)")->capture_default_str();
  a->add_option("--beta", analyze.beta, "Failure-probability exponent")->capture_default_str();
  a->add_option("--S", analyze.S, "Sparsity for the RIP mask-count scale")->capture_default_str();
  a->add_option("--rip-S", analyze.rip_S, "Order of the empirical RIP estimate (0: skip)")->capture_default_str();
  a->add_option("--rip-mode", analyze.rip_mode, "exhaustive or randomized")
      ->capture_default_str()
      ->check(CLI::IsMember({"exhaustive", "randomized"}));
  a->add_option("--rip-trials", analyze.rip_trials, "Supports drawn in randomized mode")->capture_default_str();

  RecoverOptions ls;
  auto* rls = app.add_subcommand("recover-ls", "Least-squares recovery of a random signal");
  ls.model.add(*rls);
  ls.solver.add(*rls, false);
  rls->add_option("--S", ls.S, "Nonzeros in the test signal (0: dense)")->capture_default_str();

  RecoverOptions bp;
  bp.model.K = 16;
  bp.S = 8;
  auto* rbp = app.add_subcommand("recover-bp", "Basis-pursuit recovery of a random sparse signal");
  bp.model.add(*rbp);
  bp.solver.add(*rbp, true);
  rbp->add_option("--S", bp.S, "Nonzeros in the test signal (0: dense)")->capture_default_str();

  SweepOptions sweep;
  auto* sc = app.add_subcommand("sweep-cond", "Condition number of H^T H versus K (quantiles over trials)");
  add_sweep_options(*sc, sweep, false);

  SweepOptions phase;
  auto* pt = app.add_subcommand("phase-transition", "Basis-pursuit success rate over (K, S)");
  add_sweep_options(*pt, phase, true);

  DemoOptions demo;
  demo.solver.tol = DemoConfig::default_solver().tol;
  demo.solver.max_iters = DemoConfig::default_solver().max_iters;
  demo.solver.inner_max_iters = DemoConfig::default_solver().inner_max_iters;
  demo.solver.projection = "cg";
  auto* d = app.add_subcommand("demo-2d", "Masked, blurred, subsampled image recovery in the 2D DCT basis");
  d->add_option("--image", demo.image, "Scene, PGM or PPM")->required();
  d->add_option("--psf", demo.psf, "Point spread function, PGM")->required();
  d->add_option("--K", demo.K, "Number of masks")->capture_default_str()->check(CLI::PositiveNumber);
  d->add_option("--stride", demo.stride, "Sensor stride in each direction")->capture_default_str()->check(CLI::PositiveNumber);
  d->add_option("--masks", demo.masks, "Mask alphabet")->capture_default_str()->check(CLI::IsMember({"signed", "binary"}));
  demo.solver.add(*d, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (a->parsed()) return run_analyze(common, analyze);
    if (rls->parsed()) return run_recover(common, ls, SolverVariant::LeastSquares);
    if (rbp->parsed()) return run_recover(common, bp, SolverVariant::BasisPursuit);
    if (sc->parsed()) return run_sweep(common, sweep);
    if (pt->parsed()) return run_phase(common, phase);
    if (d->parsed()) return run_demo(common, demo);
  } catch (const io_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const convergence_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const resource_limit_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
