#ifndef DENSEPYR_COSTMODEL_HPP
#define DENSEPYR_COSTMODEL_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "densepyr/convnet.hpp"
#include "densepyr/error.hpp"
#include "densepyr/geometry.hpp"
#include "densepyr/imaging.hpp"

namespace densepyr {

enum class RegionCount {
  Windows,       // ((N - M) / stride + 1)^2: every valid window origin
  NoFencepost,  // ((N - M) / stride)^2: the fencepost-free textbook count
};

/// Work of per-region versus single dense evaluation, counted in input pixels.
struct CostReport {
  std::int64_t regions = 0;
  double per_region_ops = 0.0;
  double dense_ops = 0.0;
  double speedup = 0.0;
};

inline CostReport analyticCost(std::int64_t image_side, std::int64_t window_side,
                               std::int64_t stride, RegionCount mode = RegionCount::Windows) {
  if (window_side < 1 || image_side < window_side || stride < 1)
    fail(ErrorKind::InvalidArgument, "need N >= M >= 1 and stride >= 1");
  std::int64_t per_axis = (image_side - window_side) / stride;
  if (mode == RegionCount::Windows) ++per_axis;
  CostReport r;
  r.regions = per_axis * per_axis;
  r.per_region_ops = static_cast<double>(r.regions * window_side * window_side);
  r.dense_ops = static_cast<double>(image_side * image_side);
  r.speedup = r.per_region_ops / r.dense_ops;
  return r;
}

inline nlohmann::json costToJson(const CostReport& r) {
  return {{"regions", r.regions},
          {"per_region_ops", r.per_region_ops},
          {"dense_ops", r.dense_ops},
          {"speedup", r.speedup}};
}

inline std::string costToText(const CostReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "regions         %14lld\n"
                "per_region_ops  %14.6g\n"
                "dense_ops       %14.6g\n"
                "speedup         %14.6g\n",
                static_cast<long long>(r.regions), r.per_region_ops, r.dense_ops, r.speedup);
  return buf;
}

struct BenchReport {
  int windows = 0;
  int image_w = 0;
  int image_h = 0;
  std::string spec_id;
  NetGeometry geom;
  int repeats = 0;
  double dense_seconds = 0.0;       // one dense forward plus all crops
  double per_region_seconds = 0.0;  // one patch forward per window
  double ratio = 0.0;               // per_region_seconds / dense_seconds
  bool outputs_identical = false;
  int mismatched_windows = 0;
};

/// Feature-grid cells used as benchmark windows. Distinct cells while the
/// grid has enough of them, otherwise drawn with replacement.
inline std::vector<std::pair<int, int>> sampleWindowCells(int feat_w, int feat_h, int count,
                                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int total = feat_w * feat_h;
  std::vector<std::pair<int, int>> out;
  if (total < 1 || count < 1) return out;
  if (count <= total) {
    std::vector<int> idx(static_cast<std::size_t>(total));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < count; ++i) {  // partial Fisher-Yates
      const auto j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(total - i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      out.emplace_back(idx[static_cast<std::size_t>(i)] % feat_w, idx[static_cast<std::size_t>(i)] / feat_w);
    }
  } else {
    for (int i = 0; i < count; ++i) {
      const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(total));
      out.emplace_back(k % feat_w, k / feat_w);
    }
  }
  return out;
}

/// Times (a) one dense forward followed by `window_count` cell reads against
/// (b) `window_count` independent receptive-field patch forwards, and checks
/// that both arms produce identical vectors. Both arms run single-threaded;
/// each time is the best of `repeats` runs.
inline BenchReport benchDenseVsPerRegion(const Image& centered, const ConvNetSpec& spec,
                                         int window_count, std::uint64_t seed = 0,
                                         int repeats = 3) {
  if (window_count < 1) fail(ErrorKind::InvalidArgument, "window_count must be >= 1");
  if (repeats < 1) fail(ErrorKind::InvalidArgument, "repeats must be >= 1");
  const NetGeometry g = deriveNetGeometry(spec);
  const int fw = g.outputExtent(centered.width);
  const int fh = g.outputExtent(centered.height);
  if (fw < 1 || fh < 1)
    fail(ErrorKind::InputTooSmall, "image is smaller than the receptive field");
  const auto cells = sampleWindowCells(fw, fh, window_count, seed);

  using Clock = std::chrono::steady_clock;
  std::vector<std::vector<float>> dense_out(cells.size());
  std::vector<std::vector<float>> patch_out(cells.size());
  double best_dense = 1e300;
  double best_patch = 1e300;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = Clock::now();
    const FeatureMap feat = forward(spec, centered);
    for (std::size_t i = 0; i < cells.size(); ++i)
      dense_out[i] = feat.cell(cells[i].first, cells[i].second);
    auto t1 = Clock::now();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const int x0 = cells[i].first * g.total_stride;
      const int y0 = cells[i].second * g.total_stride;
      patch_out[i] = forwardPatch(spec, centered,
                                  {x0, y0, x0 + g.receptive_field, y0 + g.receptive_field});
    }
    auto t2 = Clock::now();
    best_dense = std::min(best_dense, std::chrono::duration<double>(t1 - t0).count());
    best_patch = std::min(best_patch, std::chrono::duration<double>(t2 - t1).count());
  }

  BenchReport rep;
  rep.windows = window_count;
  rep.image_w = centered.width;
  rep.image_h = centered.height;
  rep.spec_id = spec.id();
  rep.geom = g;
  rep.repeats = repeats;
  rep.dense_seconds = best_dense;
  rep.per_region_seconds = best_patch;
  rep.ratio = best_dense > 0.0 ? best_patch / best_dense : 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (dense_out[i] != patch_out[i]) ++rep.mismatched_windows;
  rep.outputs_identical = rep.mismatched_windows == 0;
  return rep;
}

inline nlohmann::json benchToJson(const BenchReport& r) {
  return {{"windows", r.windows},
          {"image_dims", {r.image_w, r.image_h}},
          {"spec_id", r.spec_id},
          {"stride", r.geom.total_stride},
          {"rf", r.geom.receptive_field},
          {"repeats", r.repeats},
          {"threads", 1},
          {"dense_seconds", r.dense_seconds},
          {"per_region_seconds", r.per_region_seconds},
          {"ratio", r.ratio},
          {"outputs_identical", r.outputs_identical},
          {"mismatched_windows", r.mismatched_windows}};
}

inline std::string benchToText(const BenchReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "net             %s (stride %d, rf %d)\n"
                "image           %dx%d\n"
                "windows         %d\n"
                "threads         1 (each arm single-threaded, best of %d)\n"
                "dense+crop      %12.6f s\n"
                "per-window      %12.6f s\n"
                "ratio           %12.3f x\n"
                "identical       %s (%d mismatched)\n",
                r.spec_id.c_str(), r.geom.total_stride, r.geom.receptive_field, r.image_w,
                r.image_h, r.windows, r.repeats, r.dense_seconds, r.per_region_seconds, r.ratio,
                r.outputs_identical ? "yes" : "no", r.mismatched_windows);
  return buf;
}

}  // namespace densepyr

#endif  // DENSEPYR_COSTMODEL_HPP
