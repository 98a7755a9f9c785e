#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "transit/scoring.hpp"

using namespace transit;
using namespace transit::scoring;

namespace {

std::vector<TargetSpectrum> random_targets(std::mt19937_64& rng, std::size_t n, const std::string& star = "s") {
  std::uniform_real_distribution<double> u(0.005, 0.02);
  std::vector<TargetSpectrum> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].planet_id = "p" + std::to_string(i);
    out[i].star_id = (i % 2 == 0) ? star : star + "b";
    for (std::size_t w = 0; w < kSpectrumLength; ++w) out[i].depth.push_back(u(rng));
  }
  return out;
}

std::vector<SpectrumPrediction> noisy(std::mt19937_64& rng, const std::vector<TargetSpectrum>& truth) {
  std::normal_distribution<double> n(0.0, 2e-4);
  std::uniform_real_distribution<double> s(5e-5, 5e-4);
  std::vector<SpectrumPrediction> out;
  for (const auto& t : truth) {
    SpectrumPrediction p{t.planet_id, {}, {}};
    for (double y : t.depth) {
      p.mu.push_back(y + n(rng));
      p.sigma.push_back(s(rng));
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("gll values") {
  CHECK(gll(0.3, 0.3, 1.0) == doctest::Approx(-0.9189385332046727).epsilon(1e-15));
  CHECK(gll(0.01, 0.01, 1e-5) == doctest::Approx(10.593986932).epsilon(1e-10));
  CHECK(std::abs(gll(0.01, 0.01, 1e-5) - 10.59397) < 1e-4);
  CHECK(gll(0.01, 0.01, 1e-5) == doctest::Approx(static_cast<double>(oracle::gll(0.01L, 0.01L, 1e-5L))));
  CHECK_THROWS_AS(gll(0.0, 0.0, 0.0), ScoreError);
  CHECK_THROWS_AS(gll(0.0, 0.0, -1.0), ScoreError);

  // argmax over sigma sits at |y - mu|
  for (double e : {1e-5, 3e-4, 0.002}) {
    double best = -1e300;
    double at = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      const double s = e * std::pow(10.0, -1.0 + i * 0.0005);
      const double v = gll(0.0, e, s);
      if (v > best) {
        best = v;
        at = s;
      }
    }
    CHECK(at == doctest::Approx(e).epsilon(2e-3));
  }
}

TEST_CASE("sum_gll matches a scalar loop") {
  std::mt19937_64 rng(1);
  const auto truth = random_targets(rng, 6);
  const auto pred = noisy(rng, truth);
  long double ref = 0.0L;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t w = 0; w < kSpectrumLength; ++w) {
      ref += oracle::gll(truth[i].depth[w], pred[i].mu[w], pred[i].sigma[w]);
    }
  }
  CHECK(sum_gll(pred, truth) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-13));

  const std::vector<TargetSpectrum> twice = {truth[0], truth[0]};
  auto two_pred = std::vector<SpectrumPrediction>{pred[0], pred[0]};
  two_pred[1].planet_id = twice[1].planet_id;
  CHECK(sum_gll(two_pred, twice) ==
        doctest::Approx(2.0 * sum_gll(std::vector{pred[0]}, std::vector{truth[0]})).epsilon(1e-15));

  auto swapped = pred;
  std::swap(swapped[0], swapped[1]);
  CHECK_THROWS_AS(sum_gll(swapped, truth), ScoreError);
}

TEST_CASE("score normalization") {
  CHECK(score(5.0, 5.0, 1.0) == 1.0);
  CHECK(score(1.0, 5.0, 1.0) == 0.0);
  CHECK(score(3.0, 5.0, 1.0) == 0.5);
  CHECK_THROWS_AS(score(1.0, 2.0, 2.0), ScoreError);
  CHECK(clip_unit(-0.3) == 0.0);
  CHECK(clip_unit(1.7) == 1.0);
  CHECK(clip_unit(0.25) == 0.25);
}

TEST_CASE("reference baseline and ideal likelihood") {
  std::mt19937_64 rng(3);
  const auto train = random_targets(rng, 12);
  const ScoreConfig cfg;
  CHECK(l_ideal(train, cfg) == doctest::Approx(12.0 * kSpectrumLength * 10.593987).epsilon(1e-7));

  const auto base = fit_reference(train);
  for (std::size_t w : {0u, 100u, 282u}) {
    long double m = 0.0L;
    for (const auto& t : train) m += t.depth[w];
    m /= train.size();
    long double v = 0.0L;
    for (const auto& t : train) v += (t.depth[w] - m) * (t.depth[w] - m);
    v /= train.size();
    CHECK(base.mu_ref[w] == doctest::Approx(static_cast<double>(m)).epsilon(1e-14));
    CHECK(base.sigma_ref[w] == doctest::Approx(std::sqrt(static_cast<double>(v))).epsilon(1e-12));
  }
  CHECK_FALSE(base.degenerate);

  // the baseline scored on its own training set lands exactly at zero
  const auto report = evaluate(baseline_predictions(base, train), train, base, cfg);
  CHECK(report.score == 0.0);
  CHECK(report.L == report.L_ref);

  // perfect predictions with sigma_ideal score exactly one
  std::vector<SpectrumPrediction> perfect;
  for (const auto& t : train) perfect.push_back({t.planet_id, t.depth, std::vector<double>(kSpectrumLength, 1e-5)});
  CHECK(evaluate(perfect, train, base, cfg).score == doctest::Approx(1.0).epsilon(1e-15));

  const std::vector<TargetSpectrum> same(3, train[0]);
  const auto flat = fit_reference(same);
  for (std::size_t w = 0; w < kSpectrumLength; ++w) {
    CHECK(flat.mu_ref[w] == doctest::Approx(train[0].depth[w]).epsilon(1e-15));
  }
  CHECK(flat.degenerate);
  for (double s : flat.sigma_ref) CHECK(s >= kSigmaFloor);
  CHECK_THROWS_AS(fit_reference(std::vector<TargetSpectrum>{train[0]}), ScoreError);
  CHECK(ReferenceBaseline::from_json(base.to_json()).mu_ref == base.mu_ref);
}

TEST_CASE("evaluate breaks scores down by star and planet") {
  std::mt19937_64 rng(5);
  const auto train = random_targets(rng, 10);
  const auto truth = random_targets(rng, 8);
  const auto pred = noisy(rng, truth);
  const auto base = fit_reference(train);
  const auto r = evaluate(pred, truth, base, ScoreConfig{});
  CHECK(r.score == (r.L - r.L_ref) / (r.L_ideal - r.L_ref));
  CHECK(r.score_clipped == clip_unit(r.score));
  CHECK(r.per_star.size() == 2);
  REQUIRE(r.per_planet.size() == 8);
  double total = 0.0;
  for (const auto& [id, part] : r.per_planet) total += part.L;
  CHECK(total == doctest::Approx(r.L).epsilon(1e-13));
  CHECK(r.per_planet[3].first == "p3");
  CHECK(r.to_json().contains("per_star"));

  oracle::TempDir dir("score_csv");
  write_per_planet_csv(r, dir / "pp.csv");
  CHECK(oracle::slurp(dir / "pp.csv").find("p7") != std::string::npos);
}

TEST_CASE("weighted scores") {
  std::mt19937_64 rng(7);
  const auto truth = random_targets(rng, 3);
  const auto pred = noisy(rng, truth);
  const std::vector<double> ones(kSpectrumLength, 1.0);
  CHECK(sum_gll(pred, truth, ones) == doctest::Approx(sum_gll(pred, truth)).epsilon(1e-15));
  std::vector<double> half(kSpectrumLength, 0.5);
  CHECK(sum_gll(pred, truth, half) == doctest::Approx(0.5 * sum_gll(pred, truth)).epsilon(1e-14));
  CHECK_THROWS_AS(sum_gll(pred, truth, std::vector<double>(3, 1.0)), ScoreError);
  ScoreConfig bad;
  bad.sigma_ideal = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("stratified folds") {
  std::vector<std::string> ids, stars;
  for (int i = 0; i < 20; ++i) {
    ids.push_back("p" + std::to_string(100 + i));
    stars.push_back(i < 10 ? "a" : "b");
  }
  const auto folds = grouped_kfold(ids, stars, 5, 3);
  REQUIRE(folds.size() == 5);
  std::set<std::string> seen;
  for (const auto& f : folds) {
    CHECK(f.validation_ids.size() == 4);
    CHECK(f.train_ids.size() == 16);
    int a = 0;
    for (const auto& id : f.validation_ids) {
      CHECK(seen.insert(id).second);
      a += (std::stoi(id.substr(1)) < 110) ? 1 : 0;
      CHECK(std::find(f.train_ids.begin(), f.train_ids.end(), id) == f.train_ids.end());
    }
    CHECK(a == 2);
  }
  CHECK(seen.size() == 20);
  const auto again = grouped_kfold(ids, stars, 5, 3);
  for (std::size_t k = 0; k < 5; ++k) CHECK(again[k].validation_ids == folds[k].validation_ids);
  const auto other = grouped_kfold(ids, stars, 5, 4);
  bool differs = false;
  for (std::size_t k = 0; k < 5; ++k) differs = differs || other[k].validation_ids != folds[k].validation_ids;
  CHECK(differs);
  CHECK_THROWS_AS(grouped_kfold(ids, stars, 11, 3), ConfigError);
  CHECK_THROWS_AS(grouped_kfold(ids, stars, 1, 3), ConfigError);
}

TEST_CASE("score landscape") {
  const std::vector<double> errors = {1e-5, 1e-4, 1e-3};
  std::vector<double> sigmas;
  for (int i = 0; i < 61; ++i) sigmas.push_back(1e-6 * std::pow(10.0, i / 15.0));
  const Matrix g = score_landscape(errors, sigmas);
  CHECK(g.rows() == 3);
  CHECK(g.cols() == 61);
  for (Eigen::Index r = 0; r < 3; ++r) {
    Eigen::Index best = 0;
    g.row(r).maxCoeff(&best);
    CHECK(sigmas[static_cast<std::size_t>(best)] ==
          doctest::Approx(errors[static_cast<std::size_t>(r)]).epsilon(1e-9));
    CHECK(g(r, 30) == doctest::Approx(static_cast<double>(oracle::gll(0.0L, errors[r], sigmas[30]))).epsilon(1e-14));
  }
  oracle::TempDir dir("landscape");
  write_landscape_csv(g, errors, sigmas, dir / "l.csv");
  CHECK(!oracle::slurp(dir / "l.csv").empty());
}
