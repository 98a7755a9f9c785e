#include "transit/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "transit/parallel.hpp"

namespace transit::simgen {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class T>
void read_field(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

json star_json(const StarProfile& s) {
  return {{"star_id", s.star_id},
          {"baseline_flux", s.baseline_flux},
          {"jitter", s.jitter},
          {"drift_min", s.drift_min},
          {"drift_max", s.drift_max}};
}

StarProfile star_from_json(const json& j) {
  StarProfile s;
  read_field(j, "star_id", s.star_id);
  read_field(j, "baseline_flux", s.baseline_flux);
  read_field(j, "jitter", s.jitter);
  read_field(j, "drift_min", s.drift_min);
  read_field(j, "drift_max", s.drift_max);
  return s;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw SimError("invalid simulation config: " + what);
}

}  // namespace

void SimConfig::validate() const {
  require(n_planets >= 1, "n_planets must be >= 1");
  require(stars.size() >= 2, "at least 2 star profiles are required");
  std::set<std::string> ids;
  for (const auto& s : stars) {
    require(!s.star_id.empty() && ids.insert(s.star_id).second, "star ids must be non-empty and unique");
    require(s.baseline_flux > 0.0, "baseline_flux must be positive");
    require(s.jitter >= 0.0 && s.jitter < 0.5, "jitter must lie in [0, 0.5)");
    require(s.drift_min <= s.drift_max && std::abs(s.drift_min) < 0.5 && std::abs(s.drift_max) < 0.5,
            "drift range must be ordered and small");
  }

  const auto& sp = spectrum;
  require(sp.base_min > 0.0 && sp.base_min <= sp.base_max, "spectrum base range must be positive and ordered");
  require(sp.width_min > 0.0 && sp.width_min <= sp.width_max, "bump width range must be positive and ordered");
  require(sp.amp_min >= 0.0 && sp.amp_min <= sp.amp_max, "bump amplitude range must be ordered");
  require(sp.n_bumps == 0 || !sp.line_centers.empty(), "bumps need at least one line centre");
  require(sp.base_max + static_cast<double>(sp.n_bumps) * sp.amp_max < 0.05,
          "base_max + n_bumps * amp_max must stay below 0.05");

  const auto& tm = timing;
  const double T = static_cast<double>(tm.n_frames);
  require(tm.n_frames >= 32, "n_frames must be >= 32");
  require(tm.t1_min <= tm.t1_max && tm.t2_min <= tm.t2_max, "timing ranges must be ordered");
  require(tm.ingress_min >= 0.0 && tm.ingress_min <= tm.ingress_max, "ingress duration range must be ordered");
  require(tm.edge_margin >= 0.15, "edge_margin must be at least 0.15");
  require(tm.t1_min * T - 0.5 * tm.ingress_max >= tm.edge_margin * T, "ingress too close to the start");
  require(tm.t2_max * T + 0.5 * tm.ingress_max <= (1.0 - tm.edge_margin) * T, "egress too close to the end");
  require(tm.t1_max < 0.6, "ingress centre must lie in the first 60% of the curve");
  require(tm.t1_max * T + tm.ingress_max + 8.0 < tm.t2_min * T - tm.ingress_max, "transit too short");

  const auto& d = detector;
  require(d.airs_rows >= 1 && d.fgs_rows >= 1 && d.fgs_cols >= 1, "detector dimensions must be positive");
  require(d.gain != 0.0, "gain must be non-zero");
  require(d.nonlinearity >= 0.0, "nonlinearity must be >= 0");
  require(d.dark_level >= 0.0 && d.read_offset >= 0.0, "dark and read levels must be >= 0");
  require(d.flat_std >= 0.0 && d.flat_std < 0.2, "flat_std must lie in [0, 0.2)");
  require(d.hot_fraction >= 0.0 && d.hot_fraction < 0.2, "hot_fraction must lie in [0, 0.2)");
  require(d.fgs_flux_scale > 0.0, "fgs_flux_scale must be positive");
}

json SimConfig::to_json() const {
  json star_list = json::array();
  for (const auto& s : stars) star_list.push_back(star_json(s));
  return {
      {"n_planets", n_planets},
      {"stars", star_list},
      {"spectrum",
       {{"base_min", spectrum.base_min},
        {"base_max", spectrum.base_max},
        {"n_bumps", spectrum.n_bumps},
        {"width_min", spectrum.width_min},
        {"width_max", spectrum.width_max},
        {"amp_min", spectrum.amp_min},
        {"amp_max", spectrum.amp_max},
        {"line_centers", spectrum.line_centers},
        {"center_jitter", spectrum.center_jitter}}},
      {"timing",
       {{"n_frames", timing.n_frames},
        {"t1_min", timing.t1_min},
        {"t1_max", timing.t1_max},
        {"t2_min", timing.t2_min},
        {"t2_max", timing.t2_max},
        {"ingress_min", timing.ingress_min},
        {"ingress_max", timing.ingress_max},
        {"edge_margin", timing.edge_margin}}},
      {"detector",
       {{"airs_rows", detector.airs_rows},
        {"fgs_rows", detector.fgs_rows},
        {"fgs_cols", detector.fgs_cols},
        {"fgs_flux_scale", detector.fgs_flux_scale},
        {"gain", detector.gain},
        {"offset", detector.offset},
        {"nonlinearity", detector.nonlinearity},
        {"dark_level", detector.dark_level},
        {"flat_std", detector.flat_std},
        {"hot_fraction", detector.hot_fraction},
        {"hot_excess", detector.hot_excess},
        {"read_offset", detector.read_offset}}},
      {"noise", noise},
      {"seed", seed},
  };
}

SimConfig SimConfig::from_json(const json& j) {
  SimConfig c;
  try {
    read_field(j, "n_planets", c.n_planets);
    if (j.contains("stars")) {
      c.stars.clear();
      for (const auto& s : j["stars"]) c.stars.push_back(star_from_json(s));
    }
    if (j.contains("spectrum")) {
      const auto& s = j["spectrum"];
      read_field(s, "base_min", c.spectrum.base_min);
      read_field(s, "base_max", c.spectrum.base_max);
      read_field(s, "n_bumps", c.spectrum.n_bumps);
      read_field(s, "width_min", c.spectrum.width_min);
      read_field(s, "width_max", c.spectrum.width_max);
      read_field(s, "amp_min", c.spectrum.amp_min);
      read_field(s, "amp_max", c.spectrum.amp_max);
      read_field(s, "line_centers", c.spectrum.line_centers);
      read_field(s, "center_jitter", c.spectrum.center_jitter);
    }
    if (j.contains("timing")) {
      const auto& t = j["timing"];
      read_field(t, "n_frames", c.timing.n_frames);
      read_field(t, "t1_min", c.timing.t1_min);
      read_field(t, "t1_max", c.timing.t1_max);
      read_field(t, "t2_min", c.timing.t2_min);
      read_field(t, "t2_max", c.timing.t2_max);
      read_field(t, "ingress_min", c.timing.ingress_min);
      read_field(t, "ingress_max", c.timing.ingress_max);
      read_field(t, "edge_margin", c.timing.edge_margin);
    }
    if (j.contains("detector")) {
      const auto& d = j["detector"];
      read_field(d, "airs_rows", c.detector.airs_rows);
      read_field(d, "fgs_rows", c.detector.fgs_rows);
      read_field(d, "fgs_cols", c.detector.fgs_cols);
      read_field(d, "fgs_flux_scale", c.detector.fgs_flux_scale);
      read_field(d, "gain", c.detector.gain);
      read_field(d, "offset", c.detector.offset);
      read_field(d, "nonlinearity", c.detector.nonlinearity);
      read_field(d, "dark_level", c.detector.dark_level);
      read_field(d, "flat_std", c.detector.flat_std);
      read_field(d, "hot_fraction", c.detector.hot_fraction);
      read_field(d, "hot_excess", c.detector.hot_excess);
      read_field(d, "read_offset", c.detector.read_offset);
    }
    read_field(j, "noise", c.noise);
    read_field(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("simulation config: ") + e.what());
  }
  c.validate();
  return c;
}

double trapezoid(double t, const TransitTiming& timing) {
  const double half = 0.5 * timing.duration;
  const double in_start = timing.t1 - half;
  const double in_end = timing.t1 + half;
  const double out_start = timing.t2 - half;
  const double out_end = timing.t2 + half;
  if (t <= in_start || t >= out_end) return 0.0;
  if (t < in_end) return (t - in_start) / timing.duration;
  if (t <= out_start) return 1.0;
  return (out_end - t) / timing.duration;
}

std::size_t column_to_target_index(std::size_t column) {
  return 1 + static_cast<std::size_t>(std::lround(static_cast<double>(column) * 281.0 / 355.0));
}

TargetSpectrum sample_spectrum(const SpectrumModel& model, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  TargetSpectrum t;
  const double base = uniform(model.base_min, model.base_max);
  t.depth.assign(kSpectrumLength, base);
  for (std::size_t b = 0; b < model.n_bumps; ++b) {
    const auto line = static_cast<std::size_t>(unit(rng) * static_cast<double>(model.line_centers.size()));
    const double center = model.line_centers[std::min(line, model.line_centers.size() - 1)] +
                          uniform(-model.center_jitter, model.center_jitter);
    const double width = uniform(model.width_min, model.width_max);
    const double amp = uniform(model.amp_min, model.amp_max);
    for (std::size_t i = 0; i < kSpectrumLength; ++i) {
      const double z = (static_cast<double>(i) - center) / width;
      t.depth[i] += amp * std::exp(-0.5 * z * z);
    }
  }
  for (double d : t.depth) {
    if (!(d > 0.0 && d < 0.05)) throw SimError("sampled depth outside (0, 0.05)");
  }
  return t;
}

TransitTiming sample_timing(const TimingModel& model, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double T = static_cast<double>(model.n_frames);
  TransitTiming timing;
  timing.t1 = T * (model.t1_min + (model.t1_max - model.t1_min) * unit(rng));
  timing.t2 = T * (model.t2_min + (model.t2_max - model.t2_min) * unit(rng));
  timing.duration = model.ingress_min + (model.ingress_max - model.ingress_min) * unit(rng);
  return timing;
}

namespace {

// Inverse of the correction polynomial y + a y^2, i.e. the detector response.
double forward_nonlinearity(double x, double a) {
  if (a == 0.0) return x;
  return 2.0 * x / (1.0 + std::sqrt(1.0 + 4.0 * a * x));
}

struct Detector {
  std::size_t rows;
  std::size_t cols;
  Channel channel;
};

calib::CalibrationSet make_calibration(const Detector& det, const DetectorModel& model, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  calib::CalibrationSet c;
  c.gain = Array3(1, 1, 1, model.gain);
  c.offset = Array3(1, 1, 1, model.offset);
  c.linearity = Array3(3, det.rows, det.cols, 0.0);
  c.dark = Array3(1, det.rows, det.cols);
  c.flat = Array3(1, det.rows, det.cols);
  c.hot_dead_mask = PixelMask(det.rows, det.cols);
  for (std::size_t r = 0; r < det.rows; ++r) {
    for (std::size_t col = 0; col < det.cols; ++col) {
      c.linearity(1, r, col) = 1.0;
      c.linearity(2, r, col) = model.nonlinearity * (0.8 + 0.4 * unit(rng));
      c.dark(0, r, col) = model.dark_level * (0.5 + unit(rng));
      c.flat(0, r, col) = std::clamp(1.0 + model.flat_std * normal(rng), 0.5, 1.5);
    }
  }
  // Hot pixels, never masking a full spatial column (AIRS) or the whole detector (FGS).
  for (std::size_t col = 0; col < det.cols; ++col) {
    for (std::size_t r = 0; r < det.rows; ++r) {
      if (unit(rng) >= model.hot_fraction) continue;
      std::size_t live_in_col = 0;
      for (std::size_t rr = 0; rr < det.rows; ++rr) live_in_col += c.hot_dead_mask(rr, col) ? 0 : 1;
      const bool keeps_column = det.channel != Channel::Airs || live_in_col > 1;
      const bool keeps_detector = c.hot_dead_mask.count() + 1 < det.rows * det.cols;
      if (keeps_column && keeps_detector) c.hot_dead_mask.set(r, col);
    }
  }
  return c;
}

struct Channels {
  SpectralCube raw;
  calib::CalibrationSet calib;
  SpectralCube physical;
};

// physical(t, r, c) -> raw reads, following the calibration chain backwards.
Channels render_channel(const Detector& det, const DetectorModel& model, const Array3& physical_in,
                        const std::vector<double>& pair_levels, Rng& rng) {
  calib::CalibrationSet c = make_calibration(det, model, rng);
  const std::size_t T = physical_in.frames();
  Array3 raw(2 * T, det.rows, det.cols);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t r = 0; r < det.rows; ++r) {
      for (std::size_t col = 0; col < det.cols; ++col) {
        double signal = physical_in(t, r, col) * c.flat(0, r, col);
        if (c.hot_dead_mask(r, col)) signal += model.hot_excess;
        const double start = pair_levels[t];
        const double end = pair_levels[t] + signal;
        const double dark = c.dark(0, r, col);
        const double a = c.linearity(2, r, col);
        raw(2 * t, r, col) = model.gain * forward_nonlinearity(start + dark, a) + model.offset;
        raw(2 * t + 1, r, col) = model.gain * forward_nonlinearity(end + dark, a) + model.offset;
      }
    }
  }
  SpectralCube raw_cube(std::move(raw), det.channel, false);
  SpectralCube physical(physical_in, c.hot_dead_mask, det.channel, true);
  return {std::move(raw_cube), std::move(c), std::move(physical)};
}

}  // namespace

RenderedPlanet render_cube(const TargetSpectrum& spectrum, const StarProfile& star, const TransitTiming& timing,
                           const DetectorModel& detector, std::size_t n_frames, Rng& rng, bool noise) {
  if (spectrum.depth.size() != kSpectrumLength) throw SimError("spectrum must have 283 depths");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double drift = star.drift_min + (star.drift_max - star.drift_min) * unit(rng);
  const double T = static_cast<double>(n_frames);
  std::vector<double> envelope(n_frames);
  std::vector<double> transit(n_frames);
  for (std::size_t t = 0; t < n_frames; ++t) {
    envelope[t] = 1.0 + drift * static_cast<double>(t) / T;
    transit[t] = trapezoid(static_cast<double>(t), timing);
  }

  const std::size_t airs_rows = detector.airs_rows;
  Array3 airs(n_frames, airs_rows, kAirsColumns);
  for (std::size_t t = 0; t < n_frames; ++t) {
    for (std::size_t r = 0; r < airs_rows; ++r) {
      for (std::size_t w = 0; w < kAirsColumns; ++w) {
        const double depth = spectrum.depth[column_to_target_index(w)];
        double v = star.baseline_flux * (1.0 - depth * transit[t]) * envelope[t];
        if (noise) v *= 1.0 + star.jitter * normal(rng);
        airs(t, r, w) = v;
      }
    }
  }
  Array3 fgs(n_frames, detector.fgs_rows, detector.fgs_cols);
  const double fgs_base = star.baseline_flux * detector.fgs_flux_scale;
  for (std::size_t t = 0; t < n_frames; ++t) {
    for (std::size_t r = 0; r < detector.fgs_rows; ++r) {
      for (std::size_t c = 0; c < detector.fgs_cols; ++c) {
        double v = fgs_base * (1.0 - spectrum.depth[0] * transit[t]) * envelope[t];
        if (noise) v *= 1.0 + star.jitter * normal(rng);
        fgs(t, r, c) = v;
      }
    }
  }

  std::vector<double> pair_levels(n_frames);
  for (double& p : pair_levels) p = detector.read_offset * (0.5 + unit(rng));

  Channels a = render_channel({airs_rows, kAirsColumns, Channel::Airs}, detector, airs, pair_levels, rng);
  Channels f = render_channel({detector.fgs_rows, detector.fgs_cols, Channel::Fgs}, detector, fgs, pair_levels, rng);
  return {std::move(a.raw), std::move(f.raw), std::move(a.calib), std::move(f.calib),
          std::move(a.physical), std::move(f.physical)};
}

io::DatasetManifest generate_dataset(const SimConfig& config, const fs::path& out_root) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_root / "planets", ec);
  if (ec) throw IoError("cannot create " + out_root.string() + ": " + ec.message());

  const std::size_t n = config.n_planets;
  io::DatasetManifest manifest;
  manifest.root = out_root;
  manifest.targets = fs::path("targets.csv");
  manifest.wavelength_grid = {{"n_targets", kSpectrumLength},
                              {"fgs_index", 0},
                              {"airs_columns", kAirsColumns},
                              {"mapping", "1 + round(column * 281 / 355)"}};
  manifest.planets.resize(n);
  std::vector<TargetSpectrum> targets(n);
  std::vector<TransitTiming> timings(n);

  parallel_for(n, [&](std::size_t i) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(config.seed >> 32), static_cast<std::uint32_t>(i)};
    Rng rng(seq);
    char id_buf[16];
    std::snprintf(id_buf, sizeof id_buf, "p%04zu", i);
    const std::string id = id_buf;
    const StarProfile& star = config.stars[i % config.stars.size()];

    TargetSpectrum spectrum = sample_spectrum(config.spectrum, rng);
    spectrum.planet_id = id;
    spectrum.star_id = star.star_id;
    const TransitTiming timing = sample_timing(config.timing, rng);
    const RenderedPlanet planet =
        render_cube(spectrum, star, timing, config.detector, config.timing.n_frames, rng, config.noise);

    const fs::path rel = fs::path("planets") / id;
    std::error_code dir_ec;
    fs::create_directories(out_root / rel, dir_ec);
    if (dir_ec) throw IoError("cannot create " + (out_root / rel).string());
    io::save_cube(planet.airs_raw, out_root / rel / "airs.bin");
    io::save_cube(planet.fgs_raw, out_root / rel / "fgs.bin");
    calib::save_calibration(planet.airs_calib, out_root / rel / "calib_airs");
    calib::save_calibration(planet.fgs_calib, out_root / rel / "calib_fgs");

    manifest.planets[i] = {id, star.star_id, rel / "airs.bin", rel / "fgs.bin", rel / "calib_airs", rel / "calib_fgs"};
    targets[i] = std::move(spectrum);
    timings[i] = timing;
  });

  io::write_targets_csv(targets, out_root / "targets.csv");
  {
    std::ofstream out(out_root / "truth_timing.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write truth_timing.csv");
    out << "planet_id,star_id,t1,t2,duration\n";
    for (std::size_t i = 0; i < n; ++i) {
      out << manifest.planets[i].planet_id << ',' << manifest.planets[i].star_id << ','
          << io::format_double(timings[i].t1) << ',' << io::format_double(timings[i].t2) << ','
          << io::format_double(timings[i].duration) << '\n';
    }
  }
  io::write_json(config.to_json(), out_root / "sim_config.json");
  io::save_manifest(manifest);
  return io::load_manifest(out_root);
}

}  // namespace transit::simgen
