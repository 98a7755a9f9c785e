#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "transit/core.hpp"

namespace transit::curves {

/// Contiguous partition of the 356 AIRS columns. Every bin but the last has
/// width floor(356 / n); the last one also takes the remainder.
struct BinningScheme {
  std::size_t n_bins = 0;
  std::vector<IndexRange> edges;
};

BinningScheme make_binning(std::size_t n_bins);

/// "airs_bin_00", "airs_bin_01", ...
std::string bin_label(std::size_t index);

/// Entry (t, w) is the mean over unmasked pixels of spatial column w at frame t.
Matrix cube_to_column_curves(const SpectralCube& cube);

/// Mean of all unmasked pixels per frame, normalized with the edge fallback.
LightCurve cube_to_scalar_curve(const SpectralCube& cube);

struct BinnedCurves {
  std::vector<LightCurve> bins;
  LightCurve mean;  // "airs_mean"
};

/// Averages column curves per bin and over all columns, then normalizes each
/// output with the edge fallback.
BinnedCurves bin_curves(const Matrix& column_curves, const BinningScheme& scheme);

/// Divides by the median of the out-of-transit samples. With no ranges the
/// first and last 10% of the samples stand in for the out-of-transit region.
LightCurve normalize_curve(std::span<const double> flux, std::span<const IndexRange> out_of_transit,
                           std::string label);
LightCurve normalize_curve(std::span<const double> flux, std::string label);

/// The edge ranges used when no segmentation is known yet.
std::vector<IndexRange> fallback_out_of_transit(std::size_t length);

struct LightCurveSet {
  LightCurve fgs;
  LightCurve airs_mean;
  std::vector<LightCurve> airs_bins;

  /// fgs, airs_mean, then bins in ascending column order.
  std::vector<const LightCurve*> signals() const;
  std::vector<LightCurve*> signals();
};

/// Header: time_index, fgs, airs_mean, airs_bin_00, ... All curves must share one length.
void write_curves_csv(const LightCurveSet& set, const std::filesystem::path& path);

}  // namespace transit::curves
