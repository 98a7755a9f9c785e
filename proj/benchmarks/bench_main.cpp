#include <benchmark/benchmark.h>

#include <random>

#include "transit/calib.hpp"
#include "transit/features.hpp"
#include "transit/model.hpp"
#include "transit/simgen.hpp"

using namespace transit;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void BM_FitMember(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Matrix X = random_matrix(rng, n, 324);
  const Matrix Y = random_matrix(rng, n, static_cast<Eigen::Index>(kSpectrumLength));
  const model::RidgeConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(model::fit_member(X, Y, config));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitMember)->Arg(40)->Arg(80)->Arg(160)->Unit(benchmark::kMillisecond);

void BM_Calibrate(benchmark::State& state) {
  simgen::Rng rng(2);
  const auto spectrum = simgen::sample_spectrum(simgen::SpectrumModel{}, rng);
  const auto timing = simgen::sample_timing(simgen::TimingModel{}, rng);
  const auto planet = simgen::render_cube(spectrum, simgen::StarProfile{}, timing, simgen::DetectorModel{},
                                          static_cast<std::size_t>(state.range(0)), rng, true);
  for (auto _ : state) benchmark::DoNotOptimize(calib::calibrate(planet.airs_raw, planet.airs_calib));
}
BENCHMARK(BM_Calibrate)->Arg(150)->Unit(benchmark::kMillisecond);

void BM_ExtractFeatures(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(1.0, 1e-4);
  const std::size_t T = 150;
  curves::LightCurveSet set;
  auto curve = [&](const std::string& label) {
    std::vector<double> f(T);
    for (double& v : f) v = noise(rng);
    return LightCurve{f, label};
  };
  set.fgs = curve("fgs");
  set.airs_mean = curve("airs_mean");
  for (std::size_t b = 0; b < 10; ++b) set.airs_bins.push_back(curve(curves::bin_label(b)));
  const auto seg = detrend::TransitSegmentation::make(45, 105, 3, T);
  const auto schema = features::FeatureSchema::full();
  for (auto _ : state) benchmark::DoNotOptimize(features::extract_features(set, seg, schema));
}
BENCHMARK(BM_ExtractFeatures)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
