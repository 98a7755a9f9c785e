#pragma once

#include <array>
#include <filesystem>
#include <string_view>

#include "transit/core.hpp"

namespace transit::detrend {

enum class Zone { Left, Ingress, Middle, Egress, Right };

inline constexpr std::array<Zone, 5> kAllZones = {Zone::Left, Zone::Ingress, Zone::Middle,
                                                  Zone::Egress, Zone::Right};

std::string_view to_string(Zone zone);
Zone zone_from_string(std::string_view text);

/// Ingress/egress breakpoints and the five zones they induce:
///   left [0, t1-g)  ingress [t1-g, t1+g)  middle [t1+g, t2-g)
///   egress [t2-g, t2+g)  right [t2+g, T)
struct TransitSegmentation {
  std::size_t t1 = 0;
  std::size_t t2 = 0;
  std::size_t guard = 0;
  std::size_t length = 0;

  /// Builds and validates; throws SegmentationError on violated invariants.
  static TransitSegmentation make(std::size_t t1, std::size_t t2, std::size_t guard, std::size_t length);

  IndexRange zone(Zone z) const;
  std::array<IndexRange, 5> zones() const;
  void validate() const;
};

inline constexpr std::size_t kDefaultSmoothWindow = 9;
inline constexpr std::size_t kMinCurveLength = 16;

/// max(3, T / 50).
std::size_t default_guard(std::size_t length);

/// Smoothed-gradient breakpoint search. The flux is smoothed with a centered
/// moving average (window shrinks at the edges); d[t] = s[t+1] - s[t]. The
/// ingress is the steepest descent within the first 60% of frames and the
/// egress the steepest ascent after it. A flat run of tied extrema resolves
/// to its centre; separate equal extrema resolve to the smallest index.
TransitSegmentation find_breakpoints(const LightCurve& curve, std::size_t smooth_window,
                                     std::size_t guard);

/// Removes the least-squares slope of each flat zone while keeping its mean.
/// Ingress and egress samples are untouched.
LightCurve detrend_zones(const LightCurve& curve, const TransitSegmentation& seg);

/// Moves the left and right zones onto a common out-of-transit baseline and
/// blends the shifts across ingress/egress so no step is introduced. See
/// out_of_transit_baseline for the baseline definition.
LightCurve align_baseline(const LightCurve& curve, const TransitSegmentation& seg);

/// Left and right zone levels interpolated linearly (over time) to the middle
/// zone's mean time. Equals the pooled left/right mean when the layout is
/// symmetric, and stays unbiased under a global linear drift otherwise.
double out_of_transit_baseline(const LightCurve& curve, const TransitSegmentation& seg);

/// mean(left U right) - mean(middle).
double transit_depth(const LightCurve& curve, const TransitSegmentation& seg);

/// detrend_zones followed by align_baseline.
LightCurve geometric_correction(const LightCurve& curve, const TransitSegmentation& seg);

/// CSV with header zone,start,end.
void write_segmentation_csv(const TransitSegmentation& seg, const std::filesystem::path& path);

}  // namespace transit::detrend
