#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "transit/core.hpp"

namespace transit::calib {

/// Per-detector calibration products. Per-pixel arrays are stored as
/// Array3 with a single frame (shape [1, H, W]); gain and offset may also be
/// a [1, 1, 1] scalar that broadcasts over the detector. Linearity holds one
/// coefficient plane per power: shape [K, H, W], plane k multiplies x^k.
struct CalibrationSet {
  Array3 gain;
  Array3 offset;
  Array3 linearity;
  Array3 dark;
  Array3 flat;
  PixelMask hot_dead_mask;

  /// gain 1, offset 0, identity linearity [0, 1], zero dark, unit flat, empty mask.
  static CalibrationSet identity(std::size_t rows, std::size_t cols);

  /// Throws CalibError if any array does not match (rows, cols) or a gain is zero.
  void validate(std::size_t rows, std::size_t cols) const;
};

/// Directory layout: gain.bin, offset.bin, linearity.bin, dark.bin, flat.bin,
/// mask.bin (each in the cube array format) plus calib.json.
void save_calibration(const CalibrationSet& calib, const std::filesystem::path& dir);
CalibrationSet load_calibration(const std::filesystem::path& dir);

inline constexpr double kFlatMin = 0.05;

/// Step names in the only order calibrate accepts. "time_bin" may be omitted.
inline const std::vector<std::string> kCanonicalSteps = {
    "revert_adc", "apply_mask", "correct_linearity", "subtract_dark",
    "correlated_double_sampling", "time_bin", "flat_field"};

struct CalibConfig {
  std::vector<std::string> steps = kCanonicalSteps;
  std::size_t time_bin = 1;
  double flat_min = kFlatMin;

  /// ConfigError on unknown, repeated, missing or reordered steps.
  void validate() const;
};

SpectralCube revert_adc(const SpectralCube& cube, const CalibrationSet& calib);
SpectralCube apply_mask(const SpectralCube& cube, const CalibrationSet& calib);
SpectralCube correct_linearity(const SpectralCube& cube, const CalibrationSet& calib);
SpectralCube subtract_dark(const SpectralCube& cube, const CalibrationSet& calib);
/// Frames are (start0, end0, start1, end1, ...); output[i] = end_i - start_i.
SpectralCube correlated_double_sampling(const SpectralCube& cube);
/// Averages consecutive groups of `factor` frames, dropping the remainder.
SpectralCube time_bin(const SpectralCube& cube, std::size_t factor);
SpectralCube flat_field(const SpectralCube& cube, const CalibrationSet& calib,
                        double flat_min = kFlatMin);

/// Full chain in fixed order; the result is flagged calibrated.
SpectralCube calibrate(const SpectralCube& raw, const CalibrationSet& calib,
                       const CalibConfig& config = {});

}  // namespace transit::calib
