// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "oracles.hpp"
#include "transit/calib.hpp"
#include "transit/curves.hpp"
#include "transit/detrend.hpp"
#include "transit/io.hpp"
#include "transit/model.hpp"
#include "transit/scoring.hpp"
#include "transit/simgen.hpp"

using namespace transit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("violated: ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return out;
}

std::size_t nearest_index(const std::vector<double>& grid, double v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (std::abs(std::log(grid[i] / v)) < std::abs(std::log(grid[best] / v))) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------

Outcome gll_suite() {
  Outcome o;
  const double unit = scoring::gll(0.013, 0.013, 1.0);
  const double ideal = scoring::gll(0.013, 0.013, 1e-5);
  o.require(std::abs(unit - (-0.918938533204672742)) < 1e-9, "gll(y=mu, sigma=1) = -0.918938...");
  o.require(std::abs(ideal - 10.59397) < 1e-4, "gll(y=mu, sigma=1e-5) = 10.59397...");
  o.note("gll(sigma=1) = " + fmt("%.12f", unit) + ", gll(sigma=1e-5) = " + fmt("%.6f", ideal));

  std::size_t hits = 0;
  const auto errors = logspace(1e-6, 1e-2, 10);
  for (double e : errors) {
    const auto grid = logspace(e / 30.0, e * 30.0, 200);
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (scoring::gll(0.0, e, grid[i]) > scoring::gll(0.0, e, grid[best])) best = i;
    }
    const std::size_t expect = nearest_index(grid, e);
    if (best + 1 >= expect && best <= expect + 1) ++hits;
  }
  o.require(hits == errors.size(), "argmax over sigma at sigma = |error|");
  o.note("argmax at |error| for " + std::to_string(hits) + "/10 error values");
  return o;
}

Outcome score_normalization() {
  Outcome o;
  o.require(scoring::score(-12.5, 40.0, -12.5) == 0.0, "score(L_ref) == 0");
  o.require(scoring::score(40.0, 40.0, -12.5) == 1.0, "score(L_ideal) == 1");

  simgen::Rng rng(17);
  std::vector<TargetSpectrum> train;
  for (int i = 0; i < 40; ++i) {
    auto t = simgen::sample_spectrum(simgen::SpectrumModel{}, rng);
    t.planet_id = "p" + std::to_string(i);
    t.star_id = i % 2 ? "a" : "b";
    train.push_back(std::move(t));
  }
  const scoring::ScoreConfig cfg;
  const auto baseline = scoring::fit_reference(train);
  const auto report = scoring::evaluate(scoring::baseline_predictions(baseline, train), train, baseline, cfg);
  o.require(std::abs(report.score) < 1e-12, "baseline on its own training set scores 0");
  std::vector<SpectrumPrediction> perfect;
  for (const auto& t : train) perfect.push_back({t.planet_id, t.depth, std::vector<double>(kSpectrumLength, 1e-5)});
  const double one = scoring::evaluate(perfect, train, baseline, cfg).score;
  o.require(one == 1.0, "perfect predictions at sigma_ideal score 1");
  o.note("baseline score " + fmt("%.3g", report.score) + ", perfect score " + fmt("%.17g", one));
  return o;
}

Outcome binning_arithmetic() {
  Outcome o;
  bool all = true;
  for (std::size_t n = 1; n <= kAirsColumns; ++n) {
    const auto s = curves::make_binning(n);
    std::size_t next = 0;
    bool ok = s.edges.size() == n;
    for (std::size_t b = 0; ok && b < n; ++b) {
      const std::size_t width = b + 1 < n ? kAirsColumns / n : kAirsColumns / n + kAirsColumns % n;
      ok = s.edges[b].begin == next && s.edges[b].size() == width;
      next = s.edges[b].end;
    }
    all = all && ok && next == kAirsColumns;
  }
  o.require(all, "every n in 1..356 partitions 356 columns with the remainder last");
  auto widths = [](std::size_t n) {
    std::vector<std::size_t> w;
    for (const auto& e : curves::make_binning(n).edges) w.push_back(e.size());
    return w;
  };
  std::vector<std::size_t> eight(7, 44), ten(9, 35);
  eight.push_back(48);
  ten.push_back(41);
  o.require(widths(8) == eight, "n=8 -> 44x7, 48");
  o.require(widths(10) == ten, "n=10 -> 35x9, 41");
  o.note("356 partitions checked");
  return o;
}

Outcome calibration_round_trip() {
  Outcome o;
  std::mt19937_64 pick(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    simgen::DetectorModel d;
    d.airs_rows = 1 + static_cast<std::size_t>(u(pick) * 4);
    d.fgs_rows = 2 + static_cast<std::size_t>(u(pick) * 6);
    d.fgs_cols = 2 + static_cast<std::size_t>(u(pick) * 6);
    d.gain = 0.2 + 1.5 * u(pick);
    d.offset = 2000.0 * u(pick);
    d.nonlinearity = 5e-6 * u(pick);
    d.dark_level = 100.0 * u(pick);
    d.flat_std = 0.05 * u(pick);
    d.hot_fraction = 0.02 * u(pick);
    d.read_offset = 1000.0 * u(pick);
    simgen::StarProfile star;
    star.baseline_flux = 2e3 + 5e4 * u(pick);
    const std::size_t frames = 32 + static_cast<std::size_t>(u(pick) * 48);
    simgen::TimingModel timing;
    timing.n_frames = frames;
    simgen::Rng rng(pick());
    const auto spectrum = simgen::sample_spectrum(simgen::SpectrumModel{}, rng);
    const auto t = simgen::sample_timing(timing, rng);
    const auto planet = simgen::render_cube(spectrum, star, t, d, frames, rng, false);
    for (int channel = 0; channel < 2; ++channel) {
      const auto& raw = channel == 0 ? planet.airs_raw : planet.fgs_raw;
      const auto& cal = channel == 0 ? planet.airs_calib : planet.fgs_calib;
      const auto& truth = channel == 0 ? planet.airs_physical : planet.fgs_physical;
      const auto out = calib::calibrate(raw, cal);
      if (out.frames() != truth.frames() || !(out.mask() == truth.mask())) {
        o.require(false, "calibrated shape and mask match the physical cube");
        continue;
      }
      for (std::size_t f = 0; f < out.frames(); ++f) {
        for (std::size_t r = 0; r < out.rows(); ++r) {
          for (std::size_t c = 0; c < out.cols(); ++c) {
            if (truth.mask()(r, c)) continue;
            const double ref = truth.data()(f, r, c);
            worst = std::max(worst, std::abs(out.data()(f, r, c) - ref) / std::abs(ref));
          }
        }
      }
    }
  }
  o.require(worst < 1e-9, "relative error < 1e-9");
  o.note("20 configurations, worst relative error " + fmt("%.3g", worst));
  return o;
}

Outcome kernel_ridge_oracle() {
  Outcome o;
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    model::RidgeConfig c;
    c.alpha = std::pow(10.0, -4.0 + 4.0 * u(rng));
    c.gamma = std::pow(10.0, -4.0 + 3.0 * u(rng));
    c.degree = 1 + static_cast<int>(u(rng) * 3);
    const auto n = static_cast<Eigen::Index>(2 + u(rng) * 49);
    const auto d = static_cast<Eigen::Index>(1 + u(rng) * 10);
    Matrix X(n, d), Y(n, static_cast<Eigen::Index>(kSpectrumLength)), Q(5, d);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = n01(rng);
    for (Eigen::Index i = 0; i < Q.size(); ++i) Q.data()[i] = n01(rng);
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = 0.01 + 0.003 * n01(rng);

    auto rows = [](const Matrix& m) {
      std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
      }
      return out;
    };
    std::vector<std::vector<double>> query = rows(X);
    const auto extra = rows(Q);
    query.insert(query.end(), extra.begin(), extra.end());

    const auto member = model::fit_member(X, Y, c);
    Matrix all(X.rows() + Q.rows(), d);
    all << X, Q;
    const Matrix got = member.predict(all, c);
    const auto ref = oracle::krr_predict(rows(X), rows(Y), query, c.alpha, c.gamma, c.coef0, c.degree);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      for (std::size_t j = 0; j < kSpectrumLength; ++j) {
        worst = std::max(worst, std::abs(got(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                                         static_cast<double>(ref[i][j])));
      }
    }
  }
  o.require(worst < 1e-8, "max abs error < 1e-8");
  o.note("50 instances, worst abs error " + fmt("%.3g", worst));
  return o;
}

struct SyntheticCurve {
  LightCurve curve;
  detrend::TransitSegmentation seg;
  double depth;
};

// Trapezoid with per-zone slopes and a global linear drift on top.
SyntheticCurve drifting_curve(std::mt19937_64& rng, double jitter) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto T = static_cast<std::size_t>(120 + u(rng) * 280);
  const double Td = static_cast<double>(T);
  const double t1 = std::round(Td * (0.26 + 0.1 * u(rng)));
  const double t2 = std::round(Td * (0.64 + 0.1 * u(rng)));
  const double duration = 2.0 + 3.0 * u(rng);
  const double depth = 0.003 + 0.027 * u(rng);
  const auto guard = std::max(detrend::default_guard(T), static_cast<std::size_t>(std::ceil(duration / 2)) + 1);
  const auto seg =
      detrend::TransitSegmentation::make(static_cast<std::size_t>(t1), static_cast<std::size_t>(t2), guard, T);
  auto flux = oracle::trapezoid_curve(T, t1, t2, duration, depth);
  const double global = (u(rng) - 0.5) * 4e-3 / Td;
  for (std::size_t t = 0; t < T; ++t) flux[t] += global * (static_cast<double>(t) - Td / 2);
  for (auto z : {detrend::Zone::Left, detrend::Zone::Middle, detrend::Zone::Right}) {
    const auto r = seg.zone(z);
    const double slope = (u(rng) - 0.5) * 1e-5;
    const double centre = 0.5 * static_cast<double>(r.begin + r.end - 1);
    for (std::size_t t = r.begin; t < r.end; ++t) flux[t] += slope * (static_cast<double>(t) - centre);
  }
  if (jitter > 0.0) {
    for (double& f : flux) f += jitter * noise(rng);
  }
  return {{flux, "synthetic"}, seg, depth};
}

Outcome detrend_recovery() {
  Outcome o;
  std::mt19937_64 rng(606);
  double worst_clean = 0.0;
  for (int i = 0; i < 100; ++i) {
    // known segmentation: the breakpoints are exact in the noiseless case
    const auto c = drifting_curve(rng, 0.0);
    const double got = detrend::transit_depth(detrend::geometric_correction(c.curve, c.seg), c.seg);
    worst_clean = std::max(worst_clean, std::abs(got - c.depth));
  }
  std::vector<double> errors;
  for (int i = 0; i < 100; ++i) {
    auto c = drifting_curve(rng, 1e-4);
    const auto found = detrend::find_breakpoints(c.curve, detrend::kDefaultSmoothWindow, c.seg.guard);
    errors.push_back(std::abs(detrend::transit_depth(detrend::geometric_correction(c.curve, found), found) - c.depth));
  }
  std::nth_element(errors.begin(), errors.begin() + 50, errors.end());
  const double median = errors[50];
  o.require(worst_clean < 1e-9, "noiseless depth error < 1e-9");
  o.require(median < 5e-4, "median depth error with jitter 1e-4 < 5e-4");
  o.note("noiseless worst " + fmt("%.3g", worst_clean) + ", jittered median " + fmt("%.3g", median));
  return o;
}

// ---------------------------------------------------------------------------

struct RunArtifacts {
  std::string predictions;
  std::string report;
  double seconds = 0.0;
  bool ok = false;
  std::string log;
};

RunArtifacts simulate_and_cv(const fs::path& dir, const char* threads) {
  RunArtifacts a;
  ::setenv("TRANSIT_RETRIEVE_THREADS", threads, 1);
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream out, err;
  int code = cli::run_command({"simulate", "--n-planets", "200", "--seed", "1", "--out", (dir / "data").string()},
                              out, err);
  if (code == 0) {
    code = cli::run_command({"cv", "--preset", "iter7", "--data", (dir / "data").string(), "--k", "4", "--seed", "7",
                             "--out", (dir / "cv.json").string(), "--pred-out", (dir / "oof.csv").string()},
                            out, err);
  }
  ::unsetenv("TRANSIT_RETRIEVE_THREADS");
  a.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  a.ok = code == 0;
  a.log = err.str();
  if (a.ok) {
    a.predictions = oracle::slurp(dir / "oof.csv");
    a.report = oracle::slurp(dir / "cv.json");
  }
  return a;
}

Outcome end_to_end(const fs::path& dir, const RunArtifacts& run) {
  Outcome o;
  if (!run.ok) {
    o.require(false, "simulate + cv ran (" + run.log + ")");
    return o;
  }
  const auto report = nlohmann::json::parse(run.report);
  const double macro = report.at("macro_score").get<double>();
  o.require(macro > 0.0, "macro score > 0");

  const auto preds = io::read_predictions_csv(dir / "oof.csv");
  const auto truth_all = io::read_targets_csv(dir / "data" / "targets.csv");
  std::map<std::string, const TargetSpectrum*> by_id;
  for (const auto& t : truth_all) by_id[t.planet_id] = &t;
  std::vector<TargetSpectrum> truth;
  for (const auto& p : preds) truth.push_back(*by_id.at(p.planet_id));
  o.require(preds.size() == 200, "200 out-of-fold predictions");

  const double bagged = scoring::sum_gll(preds, truth);
  double best_fixed = -1e300;
  double best_sigma = 0.0;
  for (double s : logspace(1e-6, 1e-2, 20)) {
    auto fixed = preds;
    for (auto& p : fixed) p.sigma.assign(kSpectrumLength, s);
    const double L = scoring::sum_gll(fixed, truth);
    if (L > best_fixed) {
      best_fixed = L;
      best_sigma = s;
    }
  }
  o.require(bagged >= best_fixed, "bagged-sigma GLL >= best fixed-sigma GLL");

  std::vector<double> sig, err;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t w = 0; w < kSpectrumLength; ++w) {
      sig.push_back(preds[i].sigma[w]);
      err.push_back(std::abs(preds[i].mu[w] - truth[i].depth[w]));
    }
  }
  const double rho = oracle::spearman(sig, err);
  o.require(run.seconds < 600.0, "runtime < 10 min");
  o.note("macro score " + fmt("%.4f", macro) + ", bagged GLL " + fmt("%.1f", bagged) + " vs best fixed " +
         fmt("%.1f", best_fixed) + " at sigma " + fmt("%.3g", best_sigma) + ", spearman(sigma,|err|) " +
         fmt("%.3f", rho));
  return o;
}

Outcome determinism(const RunArtifacts& first, const RunArtifacts& second) {
  Outcome o;
  o.require(first.ok && second.ok, "both runs completed");
  o.require(!first.predictions.empty() && first.predictions == second.predictions,
            "prediction CSVs byte-identical");
  o.require(!first.report.empty() && first.report == second.report, "score JSONs byte-identical");
  o.note("second run with a different worker count, " + fmt("%.1f", second.seconds) + " s");
  return o;
}

Outcome landscape_structure() {
  Outcome o;
  const auto errors = logspace(1e-5, 1e-2, 10);
  const auto sigmas = logspace(1e-7, 1e-1, 241);
  const Matrix g = scoring::score_landscape(errors, sigmas);
  bool argmax_ok = true, shape_ok = true, steep_ok = true;
  for (std::size_t r = 0; r < errors.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    Eigen::Index best = 0;
    g.row(row).maxCoeff(&best);
    const auto expect = static_cast<Eigen::Index>(nearest_index(sigmas, errors[r]));
    argmax_ok = argmax_ok && std::abs(best - expect) <= 1;
    for (Eigen::Index j = 1; j <= best; ++j) shape_ok = shape_ok && g(row, j) > g(row, j - 1);
    for (Eigen::Index j = best + 1; j < g.cols(); ++j) shape_ok = shape_ok && g(row, j) < g(row, j - 1);
    // a decade below the error costs far more than a decade above it
    const double top = g(row, best);
    const double below = top - g(row, expect - 40);
    const double above = top - g(row, expect + 40);
    steep_ok = steep_ok && below > 10.0 * above;
  }
  o.require(argmax_ok, "row maximum at sigma = error within one cell");
  o.require(shape_ok, "rows rise up to the maximum and fall after it");
  o.require(steep_ok, "drop below the error is steep relative to the drop above it");
  o.note("10 x 241 grid");
  return o;
}

}  // namespace

int main() {
  struct Row {
    int id;
    const char* name;
    double budget;  // seconds
    std::function<Outcome()> run;
    double seconds = 0.0;
  };

  oracle::TempDir scratch("acceptance");
  RunArtifacts first, second;

  std::vector<Row> rows;
  rows.push_back({1, "GLL analytic suite", 1.0, gll_suite});
  rows.push_back({2, "score normalization", 1.0, score_normalization});
  rows.push_back({3, "binning arithmetic", 1.0, binning_arithmetic});
  rows.push_back({4, "calibration round-trip", 30.0, calibration_round_trip});
  rows.push_back({5, "kernel ridge oracle", 60.0, kernel_ridge_oracle});
  rows.push_back({6, "detrend recovery", 30.0, detrend_recovery});
  rows.push_back({7, "end-to-end synthetic retrieval", 600.0, [&] {
                    first = simulate_and_cv(scratch / "run1", "1");
                    return end_to_end(scratch / "run1", first);
                  }});
  rows.push_back({8, "determinism", 600.0, [&] {
                    second = simulate_and_cv(scratch / "run2", "3");
                    return determinism(first, second);
                  }});
  rows.push_back({9, "landscape structure", 1.0, landscape_structure});

  int failures = 0;
  for (auto& row : rows) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = row.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (row.seconds > row.budget) o.require(false, "runtime budget " + fmt("%.0f", row.budget) + " s");
    if (!o.pass) ++failures;
    std::printf("criterion %d %s: %s (%.2f s) %s\n", row.id, row.name, o.pass ? "PASS" : "FAIL", row.seconds,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(rows.size()) - failures, rows.size());
  return failures == 0 ? 0 : 1;
}
