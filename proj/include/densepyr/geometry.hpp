#ifndef DENSEPYR_GEOMETRY_HPP
#define DENSEPYR_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "densepyr/error.hpp"

namespace densepyr {

/// Half-open pixel box [x0,x1) x [y0,y1).
struct BoxPx {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool contains(const BoxPx& o) const {
    return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1;
  }
  bool intersects(const BoxPx& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
  BoxPx inflated(int by) const { return {x0 - by, y0 - by, x1 + by, y1 + by}; }
  BoxPx translated(int dx, int dy) const { return {x0 + dx, y0 + dy, x1 + dx, y1 + dy}; }

  friend bool operator==(const BoxPx&, const BoxPx&) = default;
};

inline std::string to_string(const BoxPx& b) {
  return "[" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," + std::to_string(b.x1) +
         "," + std::to_string(b.y1) + ")";
}

/// Rounds half-up; all scaled pixel dimensions in the library go through here.
inline std::int64_t roundHalfUp(double v) { return static_cast<std::int64_t>(std::floor(v + 0.5)); }

struct ScaleSchedule {
  std::vector<double> scales;  // descending, scales[0] == max_scale
  int interval = 1;
  double max_scale = 1.0;
  int min_size_px = 1;

  std::size_t size() const { return scales.size(); }
};

/// Scale of pyramid level `level`: max_scale * 2^(-level/interval).
inline double scaleAt(double max_scale, int interval, int level) {
  return max_scale * std::exp2(-static_cast<double>(level) / interval);
}

inline ScaleSchedule buildScaleSchedule(int img_w, int img_h, int interval, double max_scale,
                                        int min_size_px) {
  if (img_w < 1 || img_h < 1) fail(ErrorKind::InvalidArgument, "image dimensions must be >= 1");
  if (interval < 1) fail(ErrorKind::InvalidArgument, "interval must be >= 1");
  if (!(max_scale > 0.0) || !std::isfinite(max_scale))
    fail(ErrorKind::InvalidArgument, "max_scale must be positive");
  if (min_size_px < 1) fail(ErrorKind::InvalidArgument, "min_size_px must be >= 1");

  const int short_side = std::min(img_w, img_h);
  ScaleSchedule sched{{}, interval, max_scale, min_size_px};
  for (int i = 0;; ++i) {
    const double s = scaleAt(max_scale, interval, i);
    if (roundHalfUp(short_side * s) < min_size_px) break;
    sched.scales.push_back(s);
  }
  if (sched.scales.empty()) {
    fail(ErrorKind::EmptySchedule, "short side " + std::to_string(short_side) + " at scale " +
                                       std::to_string(max_scale) + " is below min size " +
                                       std::to_string(min_size_px));
  }
  return sched;
}

/// Spatial footprint of one layer. Pointwise layers (relu) are kernel 1, stride 1.
struct LayerShape {
  int kernel = 1;
  int stride = 1;
};

/// Image-space geometry of the final feature grid under valid convolution.
struct NetGeometry {
  int total_stride = 1;
  int receptive_field = 1;
  int offset = 0;  // image-space center of feature index 0

  /// Valid-mode output extent for an input extent; 0 when the input is smaller than the field.
  int outputExtent(int input_extent) const {
    if (input_extent < receptive_field) return 0;
    return (input_extent - receptive_field) / total_stride + 1;
  }
  int centerOf(int feature_index) const { return offset + feature_index * total_stride; }
  /// Supporting input interval of one feature index along an axis.
  std::pair<int, int> supportOf(int feature_index) const {
    const int start = feature_index * total_stride;
    return {start, start + receptive_field};
  }

  friend bool operator==(const NetGeometry&, const NetGeometry&) = default;
};

inline NetGeometry deriveNetGeometry(std::span<const LayerShape> layers) {
  if (layers.empty()) fail(ErrorKind::InvalidArgument, "network has no layers");
  std::int64_t jump = 1;
  std::int64_t rf = 1;
  for (const auto& l : layers) {
    if (l.kernel < 1 || l.stride < 1)
      fail(ErrorKind::InvalidArgument, "kernel and stride must be >= 1");
    rf += static_cast<std::int64_t>(l.kernel - 1) * jump;
    jump *= l.stride;
  }
  NetGeometry g;
  g.total_stride = static_cast<int>(jump);
  g.receptive_field = static_cast<int>(rf);
  g.offset = static_cast<int>((rf - 1) / 2);
  return g;
}

namespace detail {
inline int floorDiv(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
inline int ceilDiv(int a, int b) { return -floorDiv(-a, b); }
}  // namespace detail

/// Feature cells whose receptive-field centers fall inside `box`, clamped to
/// a feature grid of `feat_w` x `feat_h` cells.
inline BoxPx imageBoxToFeatureBox(const BoxPx& box, const NetGeometry& geom, int feat_w,
                                  int feat_h) {
  if (box.empty()) fail(ErrorKind::InvalidArgument, "box " + to_string(box) + " is empty");
  const int s = geom.total_stride;
  BoxPx f{detail::ceilDiv(box.x0 - geom.offset, s), detail::ceilDiv(box.y0 - geom.offset, s),
          detail::floorDiv(box.x1 - 1 - geom.offset, s) + 1,
          detail::floorDiv(box.y1 - 1 - geom.offset, s) + 1};
  f.x0 = std::max(f.x0, 0);
  f.y0 = std::max(f.y0, 0);
  f.x1 = std::min(f.x1, feat_w);
  f.y1 = std::min(f.y1, feat_h);
  if (f.empty()) {
    fail(ErrorKind::EmptyFeatureBox,
         "no feature center inside " + to_string(box) + " (stride " + std::to_string(s) + ")");
  }
  return f;
}

}  // namespace densepyr

#endif  // DENSEPYR_GEOMETRY_HPP
