#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "maskcs/experiments.hpp"
#include "maskcs/image_io.hpp"
#include "maskcs/synthetic.hpp"
#include "oracles.hpp"

using namespace maskcs;

namespace {

std::vector<std::complex<double>> naive_dft(const Vector& x) {
  const Index L = x.size();
  std::vector<std::complex<double>> out(static_cast<std::size_t>(L));
  for (Index f = 0; f < L; ++f) {
    std::complex<double> acc = 0.0;
    for (Index t = 0; t < L; ++t)
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double((f * t) % L) / double(L));
    out[static_cast<std::size_t>(f)] = acc;
  }
  return out;
}

ExperimentConfig tiny_phase_config() {
  ExperimentConfig c;
  c.L = 64;
  c.N = 4;
  c.K = {4, 16, 6};
  c.S_first = 0;
  c.S_step = 4;
  c.trials = 8;
  c.base_seed = 5;
  return c;
}

}  // namespace

TEST(Kernels, AllpassMeanConcentrates) {
  const Index L = 4096;
  for (std::uint64_t seed = 1; seed <= 8; ++seed)
    EXPECT_LE(std::abs(make_allpass_kernel(L, seed).values().mean()), 4.0 / std::sqrt(double(L)));
}

TEST(Kernels, AllpassSeedDeterminism) {
  EXPECT_EQ(make_allpass_kernel(100, 3).values(), make_allpass_kernel(100, 3).values());
  EXPECT_NE(make_allpass_kernel(100, 3).values(), make_allpass_kernel(100, 4).values());
}

TEST(Kernels, AllpassFullSamplingHasUnitMu) {
  const ForwardModel m(make_allpass_kernel(33, 2), SamplingPattern::uniform(33, 33),
                       generate_masks(33, 1, MaskAlphabet::Signed, 1));
  EXPECT_NEAR(column_norm_stats(m).mu, 1.0, 1e-12);
}

TEST(Kernels, LowpassZeroesTheStatedBins) {
  const Index L = 2048, bw = 127;
  const auto draw = lowpass_draw(L, bw, 42);
  EXPECT_LE(draw.max_imag_residue, 1e-10 * draw.values.norm());
  const auto spec = naive_dft(draw.values);
  const double scale = draw.values.norm() * std::sqrt(double(L));
  for (Index f = 128; f <= 1920; ++f) EXPECT_LE(std::abs(spec[f]), 1e-10 * scale) << f;
  // Edges of the pass band survive.
  EXPECT_GT(std::abs(spec[127]), 1e-6 * scale);
  EXPECT_GT(std::abs(spec[1921]), 1e-6 * scale);
}

TEST(Kernels, LowpassBandwidthValidated) {
  EXPECT_THROW(make_lowpass_kernel(64, 0, 1), std::invalid_argument);
  EXPECT_THROW(make_lowpass_kernel(64, 32, 1), std::invalid_argument);
  EXPECT_NO_THROW(make_lowpass_kernel(64, 31, 1));
}

TEST(Quantiles, Conventions) {
  EXPECT_DOUBLE_EQ(quantiles({5, 1, 4, 2, 3}, {0.5})[0], 3.0);
  for (double p : {0.0, 0.1, 0.5, 0.9, 1.0}) EXPECT_DOUBLE_EQ(quantiles({7, 7, 7}, {p})[0], 7.0);
  EXPECT_NEAR(quantiles({1, 2, 3, 4}, {0.10})[0], 1.3, 1e-15);
  const auto q = quantiles({1, 2, 3, 4}, {0.0, 1.0});
  EXPECT_EQ(q[0], 1.0);
  EXPECT_EQ(q[1], 4.0);
}

TEST(Quantiles, InfinitySortsLast) {
  const auto q = quantiles({1.0, kInf, 2.0, 3.0, kInf}, {0.1, 0.5, 0.9});
  EXPECT_NEAR(q[0], 1.4, 1e-15);
  EXPECT_EQ(q[1], 3.0);
  EXPECT_TRUE(std::isinf(q[2]));
}

TEST(Quantiles, Errors) {
  EXPECT_THROW(quantiles({}, {0.5}), std::invalid_argument);
  EXPECT_THROW(quantiles({1.0}, {1.5}), std::invalid_argument);
  EXPECT_THROW(quantiles({NAN}, {0.5}), std::invalid_argument);
}

TEST(ExperimentConfig, Presets) {
  const auto full = ExperimentConfig::full_condition_sweep();
  EXPECT_EQ(full.L, 2048);
  EXPECT_EQ(full.trials, 100);
  EXPECT_EQ(full.K.values().front(), 512);
  EXPECT_EQ(full.K.values().back(), 2048);
  EXPECT_EQ(full.K.values().size(), 49u);
  const auto desk = ExperimentConfig::desk_condition_sweep();
  EXPECT_EQ(desk.L, 512);
  EXPECT_EQ(desk.trials, 25);
  const auto pt = ExperimentConfig::full_phase_transition();
  EXPECT_EQ(pt.K.values().size(), 32u);
  EXPECT_EQ(pt.success_threshold, 0.05);
  EXPECT_NO_THROW(pt.validate());
  EXPECT_NO_THROW(ExperimentConfig::desk_phase_transition().validate());
}

TEST(ExperimentConfig, SparsityGrid) {
  ExperimentConfig c;
  c.L = 40;
  c.S_first = 1;
  c.S_step = 8;
  EXPECT_EQ(c.sparsity_grid(), (std::vector<Index>{1, 8, 16, 24, 32, 40}));
  c.S_first = 8;
  c.S_max = 20;
  EXPECT_EQ(c.sparsity_grid(), (std::vector<Index>{8, 16}));
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig c;
  c.trials = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.success_threshold = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.K = {64, 32, 8};
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ConditionSweep, FlagsRankDeficientRowsAndWritesCsv) {
  ExperimentConfig c;
  c.L = 64;
  c.N = 4;
  c.K = {8, 40, 8};
  c.trials = 5;
  const auto rows = condition_sweep(c);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_TRUE(rows[0].rank_deficient);  // 8*4 < 64
  EXPECT_TRUE(std::isinf(rows[0].q[1]));
  EXPECT_FALSE(rows[2].rank_deficient);  // 24*4 >= 64
  for (std::size_t i = 2; i < rows.size(); ++i)
    for (double q : rows[i].q) EXPECT_GE(q, 1.0);
  std::ostringstream csv;
  write_condition_csv(csv, rows, c.quantile_probs);
  const std::string text = csv.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "K,q10,q50,q90");
  EXPECT_NE(text.find("\n8,inf,inf,inf\n"), std::string::npos);
}

TEST(ConditionSweep, IndependentOfWorkerCount) {
  ExperimentConfig c;
  c.L = 48;
  c.K = {12, 24, 4};
  c.trials = 6;
  c.filter.model = FilterModel::LowPass;
  c.filter.bandwidth = 5;
  std::ostringstream a, b;
  write_condition_csv(a, condition_sweep(c), c.quantile_probs);
  c.workers = 3;
  write_condition_csv(b, condition_sweep(c), c.quantile_probs);
  EXPECT_EQ(a.str(), b.str());
}

TEST(PhaseTransition, CellsAreSortedAndStopAtOnePercent) {
  const auto c = tiny_phase_config();
  const auto cells = phase_transition(c);
  ASSERT_FALSE(cells.empty());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    EXPECT_LE(cell.successes, cell.trials);
    EXPECT_GE(cell.successes, 0);
    if (cell.S == 0) EXPECT_EQ(cell.success_rate, 1.0);
    if (i > 0 && cells[i - 1].K == cell.K) {
      EXPECT_GT(cell.S, cells[i - 1].S);
      EXPECT_GE(cells[i - 1].success_rate, 0.01);
    }
    if (i > 0) EXPECT_GE(cell.K, cells[i - 1].K);
    EXPECT_EQ(cell.infeasible_successes, 0);
  }
  // Every K ends either below 1% or at the top of the grid.
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (i + 1 == cells.size() || cells[i + 1].K != cells[i].K)
      EXPECT_TRUE(cells[i].success_rate < 0.01 || cells[i].S == c.sparsity_grid().back());
}

TEST(PhaseTransition, DeterministicAcrossWorkers) {
  auto c = tiny_phase_config();
  c.K = {8, 12, 4};
  std::ostringstream a, b;
  write_phase_csv(a, phase_transition(c));
  c.workers = 4;
  write_phase_csv(b, phase_transition(c));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "K,S,successes,trials,success_rate");
}

TEST(PhaseTransition, SparseSignalHasExactSupport) {
  for (Index S : {0, 1, 5, 64}) {
    const Vector x = sparse_signal(64, S, 9);
    EXPECT_EQ((x.array() != 0.0).count(), S);
  }
  EXPECT_EQ(sparse_signal(64, 5, 9), sparse_signal(64, 5, 9));
}

TEST(PhaseTransition, BoundaryHelper) {
  std::vector<PhaseCell> cells{{8, 1, 10, 10, 1.0}, {8, 8, 6, 10, 0.6}, {8, 16, 0, 10, 0.0},
                               {16, 1, 10, 10, 1.0}};
  EXPECT_EQ(success_boundary(cells, 8), 8);
  EXPECT_EQ(success_boundary(cells, 16), 1);
  EXPECT_EQ(success_boundary(cells, 24), 0);
}

TEST(ImageDemo, IdentityPathIsExact) {
  SceneOptions so;
  so.rows = 12;
  so.cols = 16;
  so.cells = 1;
  so.min_radius = 3;
  so.max_radius = 4;
  const auto scene = make_cell_scene(so, 3);
  DemoConfig cfg;
  cfg.stride = 1;
  cfg.solver.tol = 1e-10;
  cfg.masks = MaskEnsemble::from_entries(so.rows * so.cols, MaskAlphabet::Binary,
                                         std::vector<std::int8_t>(so.rows * so.cols, 1));
  const auto res = image_demo_2d(scene, Image::Ones(1, 1), cfg);
  EXPECT_LE(res.rel_error, 1e-8);
  EXPECT_EQ(res.K, 1);
  EXPECT_EQ(res.N, so.rows * so.cols);
  EXPECT_TRUE(res.converged);
}

TEST(ImageDemo, SmallSceneRecoversAndMasksAgree) {
  SceneOptions so;
  so.rows = 32;
  so.cols = 40;
  so.cells = 2;
  so.min_radius = 5;
  so.max_radius = 7;
  so.ring_width = 1.5;
  const auto scene = make_cell_scene(so, 11);
  PsfOptions po;
  po.size = 8;
  po.pupil_radius = 3;
  po.defocus = 1;
  const Image psf = make_defocus_psf(po);
  DemoConfig cfg;
  cfg.K = 6;
  cfg.stride = 3;
  cfg.solver.tol = 1e-3;
  const auto bin = image_demo_2d(scene, psf, cfg);
  cfg.alphabet = MaskAlphabet::Signed;
  const auto sgn = image_demo_2d(scene, psf, cfg);
  EXPECT_EQ(bin.measurement_layout, (GridShape{11, 14}));
  EXPECT_LT(bin.rel_error, 0.1);
  EXPECT_LE(std::abs(bin.rel_error - sgn.rel_error), 0.02);
  EXPECT_EQ(bin.abs_error.channels(), 3);
  const std::string m = bin.metrics().str();
  EXPECT_NE(m.find("rel_error="), std::string::npos);
  EXPECT_NE(m.find("masks=binary"), std::string::npos);
}

TEST(ImageDemo, InputValidation) {
  PlanarImage scene;
  scene.planes.assign(1, Image::Ones(8, 8));
  DemoConfig cfg;
  EXPECT_THROW(image_demo_2d(scene, Image::Ones(9, 9), cfg), std::invalid_argument);
  EXPECT_THROW(image_demo_2d(scene, Image::Zero(3, 3), cfg), std::invalid_argument);
  cfg.masks = generate_masks(10, 1, MaskAlphabet::Binary, 1);
  EXPECT_THROW(image_demo_2d(scene, Image::Ones(1, 1), cfg), std::invalid_argument);
}

TEST(Synthetic, SceneIsMostlyZero) {
  const auto scene = make_cell_scene({}, 7);
  ASSERT_EQ(scene.channels(), 3);
  EXPECT_EQ(scene.rows(), 188);
  EXPECT_EQ(scene.cols(), 256);
  Index zero = 0;
  for (Index r = 0; r < scene.rows(); ++r)
    for (Index c = 0; c < scene.cols(); ++c)
      zero += scene.planes[0](r, c) == 0 && scene.planes[1](r, c) == 0 && scene.planes[2](r, c) == 0;
  const double frac = double(zero) / double(scene.rows() * scene.cols());
  EXPECT_GT(frac, 0.75);
  EXPECT_LT(frac, 0.9);
  EXPECT_EQ(scene.planes[2].norm(), 0.0);
  EXPECT_LE(scene.planes[0].maxCoeff(), 1.0);
  EXPECT_GE(scene.planes[0].minCoeff(), 0.0);
}

TEST(Synthetic, PsfIsCenteredAndNormalized) {
  const Image psf = make_defocus_psf({});
  EXPECT_EQ(psf.rows(), 128);
  EXPECT_DOUBLE_EQ(psf.maxCoeff(), 1.0);
  EXPECT_GE(psf.minCoeff(), 0.0);
  // Radially symmetric pupil: symmetric about the center.
  EXPECT_NEAR(psf(64, 60), psf(64, 68), 1e-12);
  EXPECT_NEAR(psf(60, 64), psf(68, 64), 1e-12);
}

TEST(ImageIo, RoundTripAndErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "maskcs_io_test";
  std::filesystem::create_directories(dir);
  PlanarImage rgb;
  rgb.planes.assign(3, Image::Zero(5, 7));
  for (Index r = 0; r < 5; ++r)
    for (Index c = 0; c < 7; ++c) {
      rgb.planes[0](r, c) = (r * 7 + c) / 255.0;
      rgb.planes[1](r, c) = 1.0;
      rgb.planes[2](r, c) = 2.0;  // clamped
    }
  write_pnm((dir / "a.ppm").string(), rgb);
  const auto back = read_pnm((dir / "a.ppm").string());
  ASSERT_EQ(back.channels(), 3);
  EXPECT_LE((back.planes[0] - rgb.planes[0]).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(back.planes[2].minCoeff(), 1.0);

  PlanarImage gray;
  gray.planes.assign(1, Image::Constant(3, 4, 0.5));
  write_pnm((dir / "g.pgm").string(), gray);
  const auto g = read_pnm((dir / "g.pgm").string());
  EXPECT_EQ(g.channels(), 1);
  EXPECT_NEAR(g.planes[0](0, 0), 128.0 / 255.0, 1e-12);

  EXPECT_THROW(read_pnm((dir / "missing.ppm").string()), io_error);
  std::filesystem::remove_all(dir);
}
