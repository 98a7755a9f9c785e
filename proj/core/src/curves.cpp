#include "transit/curves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "transit/io.hpp"

namespace transit::curves {

BinningScheme make_binning(std::size_t n_bins) {
  if (n_bins < 1 || n_bins > kAirsColumns) {
    throw ConfigError("n_bins must lie in [1, 356], got " + std::to_string(n_bins));
  }
  const std::size_t width = kAirsColumns / n_bins;
  BinningScheme scheme;
  scheme.n_bins = n_bins;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t begin = b * width;
    const std::size_t end = (b + 1 == n_bins) ? kAirsColumns : begin + width;
    scheme.edges.push_back({begin, end});
  }
  return scheme;
}

std::string bin_label(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "airs_bin_%02zu", index);
  return buf;
}

Matrix cube_to_column_curves(const SpectralCube& cube) {
  if (cube.channel() != Channel::Airs) throw DataError("column curves need an AIRS cube");
  const std::size_t T = cube.frames();
  const std::size_t H = cube.rows();
  const std::size_t W = cube.cols();
  std::vector<std::size_t> live(W, 0);
  for (std::size_t c = 0; c < W; ++c) {
    for (std::size_t r = 0; r < H; ++r) live[c] += cube.mask()(r, c) ? 0 : 1;
    if (live[c] == 0) throw DataError("spatial column " + std::to_string(c) + " is entirely masked");
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(W));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < W; ++c) {
      double sum = 0.0;
      for (std::size_t r = 0; r < H; ++r) {
        if (!cube.mask()(r, c)) sum += cube.data()(t, r, c);
      }
      out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = sum / static_cast<double>(live[c]);
    }
  }
  return out;
}

LightCurve cube_to_scalar_curve(const SpectralCube& cube) {
  const std::size_t live = cube.rows() * cube.cols() - cube.mask().count();
  if (live == 0) throw DataError("every pixel of the cube is masked");
  std::vector<double> flux(cube.frames());
  for (std::size_t t = 0; t < cube.frames(); ++t) {
    double sum = 0.0;
    for (std::size_t r = 0; r < cube.rows(); ++r) {
      for (std::size_t c = 0; c < cube.cols(); ++c) {
        if (!cube.mask()(r, c)) sum += cube.data()(t, r, c);
      }
    }
    flux[t] = sum / static_cast<double>(live);
  }
  return normalize_curve(flux, cube.channel() == Channel::Fgs ? "fgs" : "airs_white");
}

BinnedCurves bin_curves(const Matrix& column_curves, const BinningScheme& scheme) {
  if (static_cast<std::size_t>(column_curves.cols()) != kAirsColumns) {
    throw DataError("bin_curves expects 356 columns, got " + std::to_string(column_curves.cols()));
  }
  const auto T = column_curves.rows();
  BinnedCurves out;
  for (std::size_t b = 0; b < scheme.edges.size(); ++b) {
    const auto& e = scheme.edges[b];
    const auto width = static_cast<Eigen::Index>(e.size());
    const Vector mean = column_curves.middleCols(static_cast<Eigen::Index>(e.begin), width).rowwise().mean();
    out.bins.push_back(normalize_curve({mean.data(), static_cast<std::size_t>(T)}, bin_label(b)));
  }
  const Vector mean = column_curves.rowwise().mean();
  out.mean = normalize_curve({mean.data(), static_cast<std::size_t>(T)}, "airs_mean");
  return out;
}

std::vector<IndexRange> fallback_out_of_transit(std::size_t length) {
  const std::size_t edge = std::max<std::size_t>(1, length / 10);
  return {{0, edge}, {length - edge, length}};
}

LightCurve normalize_curve(std::span<const double> flux, std::span<const IndexRange> out_of_transit,
                           std::string label) {
  std::vector<double> sample;
  for (const auto& r : out_of_transit) {
    if (r.end > flux.size()) throw DataError("out-of-transit range exceeds curve length");
    sample.insert(sample.end(), flux.begin() + static_cast<std::ptrdiff_t>(r.begin),
                  flux.begin() + static_cast<std::ptrdiff_t>(r.end));
  }
  if (sample.empty()) throw DataError(label + ": empty out-of-transit region");
  std::sort(sample.begin(), sample.end());
  const std::size_t n = sample.size();
  const double median = n % 2 == 1 ? sample[n / 2] : 0.5 * (sample[n / 2 - 1] + sample[n / 2]);
  if (!(median > 0.0)) throw DataError(label + ": non-positive out-of-transit median");

  LightCurve out{std::vector<double>(flux.begin(), flux.end()), std::move(label)};
  for (double& v : out.flux) v /= median;
  return out;
}

LightCurve normalize_curve(std::span<const double> flux, std::string label) {
  if (flux.empty()) throw DataError(label + ": empty curve");
  const auto ranges = fallback_out_of_transit(flux.size());
  return normalize_curve(flux, ranges, std::move(label));
}

std::vector<const LightCurve*> LightCurveSet::signals() const {
  std::vector<const LightCurve*> out{&fgs, &airs_mean};
  for (const auto& b : airs_bins) out.push_back(&b);
  return out;
}

std::vector<LightCurve*> LightCurveSet::signals() {
  std::vector<LightCurve*> out{&fgs, &airs_mean};
  for (auto& b : airs_bins) out.push_back(&b);
  return out;
}

void write_curves_csv(const LightCurveSet& set, const std::filesystem::path& path) {
  const auto signals = set.signals();
  const std::size_t T = set.airs_mean.size();
  for (const auto* s : signals) {
    if (s->size() != T) throw DataError("curve " + s->label + " has a different length");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "time_index";
  for (const auto* s : signals) out << ',' << s->label;
  out << '\n';
  for (std::size_t t = 0; t < T; ++t) {
    out << t;
    for (const auto* s : signals) out << ',' << io::format_double(s->flux[t]);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace transit::curves
