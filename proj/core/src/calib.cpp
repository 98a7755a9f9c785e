#include "transit/calib.hpp"

#include <algorithm>

#include "transit/io.hpp"

namespace transit::calib {

namespace fs = std::filesystem;

namespace {

bool is_scalar(const Array3& a) { return a.frames() == 1 && a.rows() == 1 && a.cols() == 1; }

bool matches_detector(const Array3& a, std::size_t rows, std::size_t cols) {
  return a.frames() == 1 && a.rows() == rows && a.cols() == cols;
}

// Value of a per-pixel or scalar plane at (r, c).
double pixel_value(const Array3& a, std::size_t r, std::size_t c) {
  return is_scalar(a) ? a(0, 0, 0) : a(0, r, c);
}

void require_plane(const Array3& a, const SpectralCube& cube, const char* name, bool allow_scalar) {
  if (allow_scalar && is_scalar(a)) return;
  if (!matches_detector(a, cube.rows(), cube.cols())) {
    throw CalibError(std::string(name) + " shape does not match the detector");
  }
}

}  // namespace

CalibrationSet CalibrationSet::identity(std::size_t rows, std::size_t cols) {
  CalibrationSet c;
  c.gain = Array3(1, 1, 1, 1.0);
  c.offset = Array3(1, 1, 1, 0.0);
  c.linearity = Array3(2, rows, cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t col = 0; col < cols; ++col) c.linearity(1, r, col) = 1.0;
  }
  c.dark = Array3(1, rows, cols, 0.0);
  c.flat = Array3(1, rows, cols, 1.0);
  c.hot_dead_mask = PixelMask(rows, cols);
  return c;
}

void CalibrationSet::validate(std::size_t rows, std::size_t cols) const {
  auto plane_ok = [&](const Array3& a, bool allow_scalar) {
    return (allow_scalar && is_scalar(a)) || matches_detector(a, rows, cols);
  };
  if (!plane_ok(gain, true)) throw CalibError("gain shape does not match the detector");
  if (!plane_ok(offset, true)) throw CalibError("offset shape does not match the detector");
  if (!plane_ok(dark, false)) throw CalibError("dark shape does not match the detector");
  if (!plane_ok(flat, false)) throw CalibError("flat shape does not match the detector");
  if (linearity.frames() == 0) throw CalibError("missing linearity coefficients");
  if (linearity.rows() != rows || linearity.cols() != cols) {
    throw CalibError("linearity shape does not match the detector");
  }
  if (hot_dead_mask.rows() != rows || hot_dead_mask.cols() != cols) {
    throw CalibError("hot/dead mask shape does not match the detector");
  }
  for (double g : gain.values()) {
    if (g == 0.0) throw CalibError("zero gain");
  }
}

void save_calibration(const CalibrationSet& calib, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  io::write_array(calib.gain, dir / "gain.bin");
  io::write_array(calib.offset, dir / "offset.bin");
  io::write_array(calib.linearity, dir / "linearity.bin", {{"axis0", "coefficient"}});
  io::write_array(calib.dark, dir / "dark.bin");
  io::write_array(calib.flat, dir / "flat.bin");
  Array3 mask(1, calib.hot_dead_mask.rows(), calib.hot_dead_mask.cols());
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c) mask(0, r, c) = calib.hot_dead_mask(r, c) ? 1.0 : 0.0;
  }
  io::write_array(mask, dir / "mask.bin");
  io::write_json({{"rows", mask.rows()},
                  {"cols", mask.cols()},
                  {"linearity_degree", calib.linearity.frames() == 0 ? 0 : calib.linearity.frames() - 1},
                  {"files", {"gain.bin", "offset.bin", "linearity.bin", "dark.bin", "flat.bin", "mask.bin"}}},
                 dir / "calib.json");
}

CalibrationSet load_calibration(const fs::path& dir) {
  const auto meta = io::read_json(dir / "calib.json");
  const auto rows = meta.at("rows").get<std::size_t>();
  const auto cols = meta.at("cols").get<std::size_t>();
  CalibrationSet c;
  c.gain = io::read_array(dir / "gain.bin");
  c.offset = io::read_array(dir / "offset.bin");
  c.linearity = io::read_array(dir / "linearity.bin");
  c.dark = io::read_array(dir / "dark.bin");
  c.flat = io::read_array(dir / "flat.bin");
  const Array3 mask = io::read_array(dir / "mask.bin");
  if (!matches_detector(mask, rows, cols)) throw FormatError(dir.string() + ": mask.bin shape mismatch");
  c.hot_dead_mask = PixelMask(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t col = 0; col < cols; ++col) c.hot_dead_mask.set(r, col, mask(0, r, col) != 0.0);
  }
  try {
    c.validate(rows, cols);
  } catch (const CalibError& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  return c;
}

void CalibConfig::validate() const {
  std::vector<std::string> expected;
  const bool has_bin = std::find(steps.begin(), steps.end(), "time_bin") != steps.end();
  for (const auto& s : kCanonicalSteps) {
    if (s != "time_bin" || has_bin) expected.push_back(s);
  }
  if (steps != expected) {
    std::string got;
    for (const auto& s : steps) got += (got.empty() ? "" : ",") + s;
    throw ConfigError("calibration steps must follow the fixed order revert_adc, apply_mask, "
                      "correct_linearity, subtract_dark, correlated_double_sampling, [time_bin], "
                      "flat_field; got " + got);
  }
  if (time_bin == 0) throw ConfigError("time_bin factor must be >= 1");
  if (!(flat_min > 0.0)) throw ConfigError("flat_min must be positive");
}

SpectralCube revert_adc(const SpectralCube& cube, const CalibrationSet& calib) {
  require_plane(calib.gain, cube, "gain", true);
  require_plane(calib.offset, cube, "offset", true);
  Array3 out = cube.data();
  for (std::size_t r = 0; r < cube.rows(); ++r) {
    for (std::size_t c = 0; c < cube.cols(); ++c) {
      const double gain = pixel_value(calib.gain, r, c);
      if (gain == 0.0) throw CalibError("zero gain at pixel (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      const double offset = pixel_value(calib.offset, r, c);
      for (std::size_t t = 0; t < cube.frames(); ++t) out(t, r, c) = (out(t, r, c) - offset) / gain;
    }
  }
  return SpectralCube(std::move(out), cube.mask(), cube.channel(), cube.calibrated());
}

SpectralCube apply_mask(const SpectralCube& cube, const CalibrationSet& calib) {
  if (calib.hot_dead_mask.rows() != cube.rows() || calib.hot_dead_mask.cols() != cube.cols()) {
    throw CalibError("hot/dead mask shape does not match the detector");
  }
  return SpectralCube(cube.data(), cube.mask().united(calib.hot_dead_mask), cube.channel(),
                      cube.calibrated());
}

SpectralCube correct_linearity(const SpectralCube& cube, const CalibrationSet& calib) {
  const Array3& coeffs = calib.linearity;
  if (coeffs.frames() == 0) throw CalibError("missing linearity coefficients");
  if (coeffs.rows() != cube.rows() || coeffs.cols() != cube.cols()) {
    throw CalibError("linearity shape does not match the detector");
  }
  const std::size_t terms = coeffs.frames();
  Array3 out = cube.data();
  for (std::size_t t = 0; t < cube.frames(); ++t) {
    for (std::size_t r = 0; r < cube.rows(); ++r) {
      for (std::size_t c = 0; c < cube.cols(); ++c) {
        const double x = out(t, r, c);
        double acc = coeffs(terms - 1, r, c);
        for (std::size_t k = terms - 1; k-- > 0;) acc = acc * x + coeffs(k, r, c);
        out(t, r, c) = acc;
      }
    }
  }
  return SpectralCube(std::move(out), cube.mask(), cube.channel(), cube.calibrated());
}

SpectralCube subtract_dark(const SpectralCube& cube, const CalibrationSet& calib) {
  require_plane(calib.dark, cube, "dark", false);
  Array3 out = cube.data();
  const auto dark = calib.dark.frame(0);
  for (std::size_t t = 0; t < out.frames(); ++t) {
    auto frame = out.frame(t);
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] -= dark[i];
  }
  return SpectralCube(std::move(out), cube.mask(), cube.channel(), cube.calibrated());
}

SpectralCube correlated_double_sampling(const SpectralCube& cube) {
  if (cube.frames() % 2 != 0) {
    throw CalibError("correlated double sampling needs an even frame count, got " +
                     std::to_string(cube.frames()));
  }
  const std::size_t pairs = cube.frames() / 2;
  Array3 out(pairs, cube.rows(), cube.cols());
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto start = cube.data().frame(2 * i);
    const auto end = cube.data().frame(2 * i + 1);
    auto dst = out.frame(i);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = end[k] - start[k];
  }
  return SpectralCube(std::move(out), cube.mask(), cube.channel(), cube.calibrated());
}

SpectralCube time_bin(const SpectralCube& cube, std::size_t factor) {
  if (factor == 0) throw CalibError("time_bin factor must be >= 1");
  if (factor > cube.frames()) {
    throw CalibError("time_bin factor " + std::to_string(factor) + " exceeds frame count " +
                     std::to_string(cube.frames()));
  }
  if (factor == 1) return cube;
  const std::size_t groups = cube.frames() / factor;
  Array3 out(groups, cube.rows(), cube.cols());
  for (std::size_t g = 0; g < groups; ++g) {
    auto dst = out.frame(g);
    for (std::size_t j = 0; j < factor; ++j) {
      const auto src = cube.data().frame(g * factor + j);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    for (double& v : dst) v /= static_cast<double>(factor);
  }
  return SpectralCube(std::move(out), cube.mask(), cube.channel(), cube.calibrated());
}

SpectralCube flat_field(const SpectralCube& cube, const CalibrationSet& calib, double flat_min) {
  require_plane(calib.flat, cube, "flat", false);
  for (std::size_t r = 0; r < cube.rows(); ++r) {
    for (std::size_t c = 0; c < cube.cols(); ++c) {
      if (!cube.mask()(r, c) && calib.flat(0, r, c) < flat_min) {
        throw CalibError("flat value below flat_min at unmasked pixel (" + std::to_string(r) + ", " +
                         std::to_string(c) + "); mask the pixel instead");
      }
    }
  }
  Array3 out = cube.data();
  for (std::size_t t = 0; t < out.frames(); ++t) {
    for (std::size_t r = 0; r < cube.rows(); ++r) {
      for (std::size_t c = 0; c < cube.cols(); ++c) {
        if (!cube.mask()(r, c)) out(t, r, c) /= calib.flat(0, r, c);
      }
    }
  }
  return SpectralCube(std::move(out), cube.mask(), cube.channel(), cube.calibrated());
}

SpectralCube calibrate(const SpectralCube& raw, const CalibrationSet& calib, const CalibConfig& config) {
  config.validate();
  if (raw.calibrated()) throw CalibError("cube is already calibrated");
  const bool binning = std::find(config.steps.begin(), config.steps.end(), "time_bin") != config.steps.end();

  SpectralCube cube = revert_adc(raw, calib);
  cube = apply_mask(cube, calib);
  cube = correct_linearity(cube, calib);
  cube = subtract_dark(cube, calib);
  cube = correlated_double_sampling(cube);
  if (binning) cube = time_bin(cube, config.time_bin);
  cube = flat_field(cube, calib, config.flat_min);
  return SpectralCube(cube.data(), cube.mask(), cube.channel(), true);
}

}  // namespace transit::calib
