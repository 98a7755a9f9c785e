#include "transit/detrend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

namespace transit::detrend {

std::string_view to_string(Zone zone) {
  switch (zone) {
    case Zone::Left: return "left";
    case Zone::Ingress: return "ingress";
    case Zone::Middle: return "middle";
    case Zone::Egress: return "egress";
    case Zone::Right: return "right";
  }
  return "unknown";
}

Zone zone_from_string(std::string_view text) {
  for (Zone z : kAllZones) {
    if (to_string(z) == text) return z;
  }
  throw ConfigError("unknown zone '" + std::string(text) + "'");
}

TransitSegmentation TransitSegmentation::make(std::size_t t1, std::size_t t2, std::size_t guard,
                                              std::size_t length) {
  TransitSegmentation seg{t1, t2, guard, length};
  seg.validate();
  return seg;
}

void TransitSegmentation::validate() const {
  auto fail = [&](const std::string& why) {
    throw SegmentationError("invalid segmentation (t1=" + std::to_string(t1) + ", t2=" + std::to_string(t2) +
                            ", guard=" + std::to_string(guard) + ", T=" + std::to_string(length) + "): " + why);
  };
  if (guard == 0) fail("guard must be positive");
  if (t1 <= guard) fail("left zone is empty");
  if (t2 < guard || t1 + guard >= t2 - guard) fail("ingress and egress overlap");
  if (t2 + guard > length) fail("egress runs past the end of the curve");
  if ((t2 - guard) - (t1 + guard) < 4) fail("middle zone shorter than 4 frames");
}

IndexRange TransitSegmentation::zone(Zone z) const {
  switch (z) {
    case Zone::Left: return {0, t1 - guard};
    case Zone::Ingress: return {t1 - guard, t1 + guard};
    case Zone::Middle: return {t1 + guard, t2 - guard};
    case Zone::Egress: return {t2 - guard, t2 + guard};
    case Zone::Right: return {t2 + guard, length};
  }
  return {};
}

std::array<IndexRange, 5> TransitSegmentation::zones() const {
  return {zone(Zone::Left), zone(Zone::Ingress), zone(Zone::Middle), zone(Zone::Egress), zone(Zone::Right)};
}

std::size_t default_guard(std::size_t length) { return std::max<std::size_t>(3, length / 50); }

namespace {

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  const std::size_t n = x.size();
  const std::size_t half = window / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> s(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(n, t + half + 1);
    s[t] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return s;
}

// Extremum of d over [begin, end). sign = -1 finds the minimum, +1 the maximum.
// Returns the breakpoint frame: centre of the tied run holding the first
// extremum, shifted by half a frame because d[i] sits between i and i+1.
std::size_t locate_edge(const std::vector<double>& d, std::size_t begin, std::size_t end, double sign,
                        double& extremum) {
  std::size_t best = begin;
  for (std::size_t i = begin + 1; i < end; ++i) {
    if (sign * d[i] > sign * d[best]) best = i;
  }
  extremum = d[best];
  const double tol = 1e-9 * std::abs(extremum);
  std::size_t lo = best;
  std::size_t hi = best;
  while (lo > begin && std::abs(d[lo - 1] - extremum) <= tol) --lo;
  while (hi + 1 < end && std::abs(d[hi + 1] - extremum) <= tol) ++hi;
  return (lo + hi + 2) / 2;
}

struct LineFit {
  double t_mean;
  double slope;
};

LineFit fit_line(const std::vector<double>& y, IndexRange r) {
  double t_mean = 0.0;
  double y_mean = 0.0;
  for (std::size_t t = r.begin; t < r.end; ++t) {
    t_mean += static_cast<double>(t);
    y_mean += y[t];
  }
  const double n = static_cast<double>(r.size());
  t_mean /= n;
  y_mean /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t t = r.begin; t < r.end; ++t) {
    const double dt = static_cast<double>(t) - t_mean;
    sxy += dt * (y[t] - y_mean);
    sxx += dt * dt;
  }
  return {t_mean, sxx > 0.0 ? sxy / sxx : 0.0};
}

double zone_mean(const std::vector<double>& y, IndexRange r) {
  if (r.empty()) throw SegmentationError("empty zone");
  double s = 0.0;
  for (std::size_t t = r.begin; t < r.end; ++t) s += y[t];
  return s / static_cast<double>(r.size());
}

double time_mean(IndexRange r) { return 0.5 * static_cast<double>(r.begin + r.end - 1); }

void check_length(const LightCurve& curve, const TransitSegmentation& seg) {
  seg.validate();
  if (curve.size() != seg.length) {
    throw SegmentationError(curve.label + ": curve length " + std::to_string(curve.size()) +
                            " does not match segmentation length " + std::to_string(seg.length));
  }
}

}  // namespace

TransitSegmentation find_breakpoints(const LightCurve& curve, std::size_t smooth_window, std::size_t guard) {
  const std::size_t T = curve.size();
  if (T < kMinCurveLength) {
    throw SegmentationError(curve.label + ": need at least 16 samples, got " + std::to_string(T));
  }
  if (smooth_window == 0 || smooth_window % 2 == 0 || smooth_window >= T / 4) {
    throw ConfigError("smooth_window must be odd, positive and below T/4");
  }
  const auto s = moving_average(curve.flux, smooth_window);
  std::vector<double> d(T - 1);
  for (std::size_t t = 0; t + 1 < T; ++t) d[t] = s[t + 1] - s[t];

  const std::size_t ingress_end = std::min(d.size(), (T * 6) / 10);
  double descent = 0.0;
  const std::size_t t1 = locate_edge(d, 0, ingress_end, -1.0, descent);
  if (!(descent < 0.0)) throw SegmentationError(curve.label + ": no flux drop found (no transit)");
  if (t1 + 1 >= d.size()) throw SegmentationError(curve.label + ": ingress at the end of the curve");

  double ascent = 0.0;
  const std::size_t t2 = locate_edge(d, t1 + 1, d.size(), +1.0, ascent);
  if (!(ascent > 0.0)) throw SegmentationError(curve.label + ": no flux recovery found after ingress");

  return TransitSegmentation::make(t1, t2, guard, T);
}

LightCurve detrend_zones(const LightCurve& curve, const TransitSegmentation& seg) {
  check_length(curve, seg);
  LightCurve out = curve;
  for (Zone z : {Zone::Left, Zone::Middle, Zone::Right}) {
    const IndexRange r = seg.zone(z);
    if (r.size() < 3) {
      throw SegmentationError(curve.label + ": " + std::string(to_string(z)) + " zone shorter than 3 samples");
    }
    const LineFit fit = fit_line(curve.flux, r);
    for (std::size_t t = r.begin; t < r.end; ++t) {
      out.flux[t] -= fit.slope * (static_cast<double>(t) - fit.t_mean);
    }
  }
  return out;
}

double out_of_transit_baseline(const LightCurve& curve, const TransitSegmentation& seg) {
  check_length(curve, seg);
  const IndexRange left = seg.zone(Zone::Left);
  const IndexRange right = seg.zone(Zone::Right);
  const IndexRange middle = seg.zone(Zone::Middle);
  const double left_level = zone_mean(curve.flux, left);
  const double right_level = zone_mean(curve.flux, right);
  const double tl = time_mean(left);
  const double tr = time_mean(right);
  const double tm = time_mean(middle);
  return left_level + (right_level - left_level) * (tm - tl) / (tr - tl);
}

LightCurve align_baseline(const LightCurve& curve, const TransitSegmentation& seg) {
  check_length(curve, seg);
  const double baseline = out_of_transit_baseline(curve, seg);
  const IndexRange left = seg.zone(Zone::Left);
  const IndexRange right = seg.zone(Zone::Right);
  const double shift_left = baseline - zone_mean(curve.flux, left);
  const double shift_right = baseline - zone_mean(curve.flux, right);

  LightCurve out = curve;
  for (std::size_t t = left.begin; t < left.end; ++t) out.flux[t] += shift_left;
  for (std::size_t t = right.begin; t < right.end; ++t) out.flux[t] += shift_right;

  // Transition samples get a shift that ramps linearly between the neighbouring
  // zones (the middle zone is never shifted).
  const IndexRange ingress = seg.zone(Zone::Ingress);
  const double ni = static_cast<double>(ingress.size() + 1);
  for (std::size_t t = ingress.begin; t < ingress.end; ++t) {
    const double w = static_cast<double>(t - ingress.begin + 1) / ni;
    out.flux[t] += shift_left * (1.0 - w);
  }
  const IndexRange egress = seg.zone(Zone::Egress);
  const double ne = static_cast<double>(egress.size() + 1);
  for (std::size_t t = egress.begin; t < egress.end; ++t) {
    const double w = static_cast<double>(t - egress.begin + 1) / ne;
    out.flux[t] += shift_right * w;
  }
  return out;
}

double transit_depth(const LightCurve& curve, const TransitSegmentation& seg) {
  check_length(curve, seg);
  const std::array<IndexRange, 2> out_zones{seg.zone(Zone::Left), seg.zone(Zone::Right)};
  const std::array<IndexRange, 1> in_zone{seg.zone(Zone::Middle)};
  return mean_over(curve.flux, out_zones) - mean_over(curve.flux, in_zone);
}

LightCurve geometric_correction(const LightCurve& curve, const TransitSegmentation& seg) {
  return align_baseline(detrend_zones(curve, seg), seg);
}

void write_segmentation_csv(const TransitSegmentation& seg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "zone,start,end\n";
  for (Zone z : kAllZones) {
    const IndexRange r = seg.zone(z);
    out << to_string(z) << ',' << r.begin << ',' << r.end << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace transit::detrend
