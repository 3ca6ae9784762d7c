#ifndef DENSEPYR_PACKING_HPP
#define DENSEPYR_PACKING_HPP

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "densepyr/error.hpp"
#include "densepyr/geometry.hpp"
#include "densepyr/imaging.hpp"

namespace densepyr {

struct Extent {
  int width = 0;
  int height = 0;

  friend bool operator==(const Extent&, const Extent&) = default;
};

struct Placement {
  int level_index = 0;
  int canvas_index = 0;
  BoxPx inner_box;  // level content, canvas coordinates
  BoxPx outer_box;  // content plus border

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct CanvasPlan {
  int canvas_w = 0;
  int canvas_h = 0;
  int border_px = 0;
  int align = 1;
  int canvas_count = 0;
  std::vector<Placement> placements;  // ordered by level_index

  const Placement& placementFor(int level) const {
    return placements.at(static_cast<std::size_t>(level));
  }

  friend bool operator==(const CanvasPlan&, const CanvasPlan&) = default;
};

namespace detail {
inline int alignUp(int v, int align) { return (v + align - 1) / align * align; }
}  // namespace detail

/// Bottom-left-fill packing of bordered levels onto fixed-size canvases.
///
/// Levels are visited tallest first (ties: wider first, then lower index).
/// Each one goes to the first canvas that has a feasible anchor, at the
/// lowest then leftmost anchor. Anchors are the canvas origin and, for every
/// placed outer box, its right-top corner (x1, y0) and left-bottom corner
/// (x0, y1), rounded up to a multiple of `align`.
inline CanvasPlan packBLF(std::span<const Extent> level_dims, int canvas_w, int canvas_h,
                          int border_px, int align = 1) {
  if (canvas_w < 1 || canvas_h < 1) fail(ErrorKind::InvalidArgument, "canvas must be non-empty");
  if (border_px < 0) fail(ErrorKind::InvalidArgument, "border must be >= 0");
  if (align < 1) fail(ErrorKind::InvalidArgument, "alignment must be >= 1");

  const int n = static_cast<int>(level_dims.size());
  for (int i = 0; i < n; ++i) {
    const Extent& e = level_dims[static_cast<std::size_t>(i)];
    if (e.width < 1 || e.height < 1)
      fail(ErrorKind::InvalidArgument, "level " + std::to_string(i) + " has an empty extent");
    if (e.width + 2 * border_px > canvas_w || e.height + 2 * border_px > canvas_h) {
      fail(ErrorKind::LevelTooLarge,
           "level " + std::to_string(i) + " (" + std::to_string(e.width) + "x" +
               std::to_string(e.height) + " plus " + std::to_string(border_px) +
               "px border) does not fit a " + std::to_string(canvas_w) + "x" +
               std::to_string(canvas_h) + " canvas");
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Extent& ea = level_dims[static_cast<std::size_t>(a)];
    const Extent& eb = level_dims[static_cast<std::size_t>(b)];
    return std::make_tuple(-ea.height, -ea.width, a) < std::make_tuple(-eb.height, -eb.width, b);
  });

  CanvasPlan plan{canvas_w, canvas_h, border_px, align, 0, {}};
  plan.placements.resize(static_cast<std::size_t>(n));
  std::vector<std::vector<BoxPx>> occupied;  // outer boxes per canvas

  auto tryCanvas = [&](const std::vector<BoxPx>& boxes, int w, int h, BoxPx& out) {
    std::vector<std::pair<int, int>> anchors{{0, 0}};
    for (const BoxPx& b : boxes) {
      anchors.emplace_back(detail::alignUp(b.x1, align), detail::alignUp(b.y0, align));
      anchors.emplace_back(detail::alignUp(b.x0, align), detail::alignUp(b.y1, align));
    }
    bool found = false;
    for (const auto& [ax, ay] : anchors) {
      const BoxPx cand{ax, ay, ax + w, ay + h};
      if (cand.x1 > canvas_w || cand.y1 > canvas_h) continue;
      if (std::any_of(boxes.begin(), boxes.end(),
                      [&](const BoxPx& b) { return b.intersects(cand); }))
        continue;
      if (!found || std::tie(cand.y0, cand.x0) < std::tie(out.y0, out.x0)) {
        out = cand;
        found = true;
      }
    }
    return found;
  };

  for (int level : order) {
    const Extent& e = level_dims[static_cast<std::size_t>(level)];
    const int w = e.width + 2 * border_px;
    const int h = e.height + 2 * border_px;
    BoxPx outer;
    int canvas = 0;
    for (; canvas < static_cast<int>(occupied.size()); ++canvas) {
      if (tryCanvas(occupied[static_cast<std::size_t>(canvas)], w, h, outer)) break;
    }
    if (canvas == static_cast<int>(occupied.size())) {
      occupied.emplace_back();
      outer = {0, 0, w, h};
    }
    occupied[static_cast<std::size_t>(canvas)].push_back(outer);
    plan.placements[static_cast<std::size_t>(level)] = {level, canvas,
                                                        outer.inflated(-border_px), outer};
  }
  plan.canvas_count = static_cast<int>(occupied.size());
  return plan;
}

inline CanvasPlan packBLF(const std::vector<Extent>& level_dims, int canvas_w, int canvas_h,
                          int border_px, int align = 1) {
  return packBLF(std::span<const Extent>(level_dims), canvas_w, canvas_h, border_px, align);
}

/// Fills each canvas with the mean, blits the padded levels at their outer
/// boxes, then centers, so background samples come out exactly zero.
inline std::vector<Image> renderCanvases(const CanvasPlan& plan,
                                         std::span<const Image> padded_levels,
                                         const MeanPixel& mean) {
  if (padded_levels.size() != plan.placements.size())
    fail(ErrorKind::DimMismatch, std::to_string(padded_levels.size()) + " levels for " +
                                     std::to_string(plan.placements.size()) + " placements");
  const int channels = mean.channels();
  std::vector<Image> canvases;
  canvases.reserve(static_cast<std::size_t>(plan.canvas_count));
  for (int i = 0; i < plan.canvas_count; ++i) {
    Image canvas(plan.canvas_w, plan.canvas_h, channels);
    for (std::size_t k = 0; k < canvas.data.size(); ++k)
      canvas.data[k] = mean.values[k % static_cast<std::size_t>(channels)];
    canvases.push_back(std::move(canvas));
  }
  for (const Placement& p : plan.placements) {
    const Image& level = padded_levels[static_cast<std::size_t>(p.level_index)];
    if (level.width != p.outer_box.width() || level.height != p.outer_box.height() ||
        level.channels != channels || level.centered) {
      fail(ErrorKind::DimMismatch, "padded level " + std::to_string(p.level_index) +
                                       " does not match its outer box " +
                                       to_string(p.outer_box));
    }
    Image& canvas = canvases[static_cast<std::size_t>(p.canvas_index)];
    const auto row = static_cast<std::size_t>(level.width) * channels;
    for (int y = 0; y < level.height; ++y) {
      std::copy_n(level.data.begin() + static_cast<std::ptrdiff_t>(level.index(0, y)), row,
                  canvas.data.begin() +
                      static_cast<std::ptrdiff_t>(canvas.index(p.outer_box.x0, p.outer_box.y0 + y)));
    }
  }
  for (Image& canvas : canvases) canvas = centerImage(canvas, mean);
  return canvases;
}

inline std::vector<Image> renderCanvases(const CanvasPlan& plan,
                                         const std::vector<Image>& padded_levels,
                                         const MeanPixel& mean) {
  return renderCanvases(plan, std::span<const Image>(padded_levels), mean);
}

// ---------------------------------------------------------------------------
// Debug dump

inline nlohmann::json boxToJson(const BoxPx& b) { return {b.x0, b.y0, b.x1, b.y1}; }

inline nlohmann::json planToJson(const CanvasPlan& plan) {
  nlohmann::json j;
  j["canvas_w"] = plan.canvas_w;
  j["canvas_h"] = plan.canvas_h;
  j["border_px"] = plan.border_px;
  j["align"] = plan.align;
  j["canvas_count"] = plan.canvas_count;
  auto& ps = j["placements"] = nlohmann::json::array();
  for (const Placement& p : plan.placements) {
    ps.push_back({{"level", p.level_index},
                  {"canvas", p.canvas_index},
                  {"inner", boxToJson(p.inner_box)},
                  {"outer", boxToJson(p.outer_box)}});
  }
  return j;
}

/// Occupancy mask of one canvas: 255 inside level content, 128 in borders, 0 elsewhere.
inline Image occupancyMask(const CanvasPlan& plan, int canvas_index) {
  Image mask(plan.canvas_w, plan.canvas_h, 1);
  for (const Placement& p : plan.placements) {
    if (p.canvas_index != canvas_index) continue;
    for (int y = p.outer_box.y0; y < p.outer_box.y1; ++y)
      for (int x = p.outer_box.x0; x < p.outer_box.x1; ++x)
        mask.at(x, y) = p.inner_box.contains(x, y) ? 255.0f : 128.0f;
  }
  return mask;
}

}  // namespace densepyr

#endif  // DENSEPYR_PACKING_HPP
