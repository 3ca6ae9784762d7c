#ifndef DENSEPYR_PYRAMID_HPP
#define DENSEPYR_PYRAMID_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "densepyr/convnet.hpp"
#include "densepyr/error.hpp"
#include "densepyr/geometry.hpp"
#include "densepyr/imaging.hpp"
#include "densepyr/packing.hpp"

namespace densepyr {

struct PyramidConfig {
  int interval = 5;
  double max_scale = 2.0;
  int min_size_px = 16;
  int canvas_w = 1200;
  int canvas_h = 1200;
  int border_px = 16;
  MeanPixel mean{104.0f, 117.0f, 123.0f};
  std::string net_preset = "tiny";
  std::uint64_t net_seed = 1;
  bool net_bias = false;
  int threads = 0;  // canvases run concurrently; 0 = hardware concurrency

  void validate() const {
    if (interval < 1) fail(ErrorKind::InvalidArgument, "interval must be >= 1");
    if (!(max_scale > 0.0)) fail(ErrorKind::InvalidArgument, "max_scale must be positive");
    if (min_size_px < 1) fail(ErrorKind::InvalidArgument, "min_size must be >= 1");
    if (canvas_w < 1 || canvas_h < 1) fail(ErrorKind::InvalidArgument, "canvas must be positive");
    if (border_px < 0) fail(ErrorKind::InvalidArgument, "border must be >= 0");
    if (mean.channels() < 1) fail(ErrorKind::InvalidArgument, "mean pixel is empty");
    if (threads < 0) fail(ErrorKind::InvalidArgument, "threads must be >= 0");
  }
};

inline nlohmann::json configToJson(const PyramidConfig& c) {
  return {{"interval", c.interval},       {"max_scale", c.max_scale},
          {"min_size", c.min_size_px},    {"canvas", {c.canvas_w, c.canvas_h}},
          {"border", c.border_px},        {"mean", c.mean.values},
          {"net", c.net_preset},          {"seed", c.net_seed},
          {"bias", c.net_bias},           {"threads", c.threads}};
}

/// Overlays the keys present in `j` onto `c`; absent keys keep their value.
inline void applyConfigJson(PyramidConfig& c, const nlohmann::json& j) {
  try {
    if (!j.is_object()) fail(ErrorKind::InvalidArgument, "config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      static const char* kKnown[] = {"interval", "max_scale", "min_size", "canvas", "border",
                                     "mean",     "net",       "seed",     "bias",   "threads"};
      if (std::find_if(std::begin(kKnown), std::end(kKnown),
                       [&](const char* k) { return key == k; }) == std::end(kKnown))
        fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
    }
    if (j.contains("interval")) c.interval = j["interval"].get<int>();
    if (j.contains("max_scale")) c.max_scale = j["max_scale"].get<double>();
    if (j.contains("min_size")) c.min_size_px = j["min_size"].get<int>();
    if (j.contains("canvas")) {
      const auto dims = j["canvas"].get<std::vector<int>>();
      if (dims.size() != 2) fail(ErrorKind::InvalidArgument, "canvas must be [w, h]");
      c.canvas_w = dims[0];
      c.canvas_h = dims[1];
    }
    if (j.contains("border")) c.border_px = j["border"].get<int>();
    if (j.contains("mean")) c.mean = MeanPixel(j["mean"].get<std::vector<float>>());
    if (j.contains("net")) c.net_preset = j["net"].get<std::string>();
    if (j.contains("seed")) c.net_seed = j["seed"].get<std::uint64_t>();
    if (j.contains("bias")) c.net_bias = j["bias"].get<bool>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("config: ") + e.what());
  }
}

struct PyramidLevel {
  double scale = 1.0;
  FeatureMap feat;
  NetGeometry geom;
  Extent image_dims;   // resampled level, before the border
  Extent padded_dims;  // with the border; the feature grid is relative to this raster

  friend bool operator==(const PyramidLevel&, const PyramidLevel&) = default;
};

struct FeaturePyramid {
  std::vector<PyramidLevel> levels;
  Extent source_dims;
  MeanPixel mean;
  std::string spec_id;
  nlohmann::json net;  // serialized ConvNetSpec header
  int border_px = 0;

  friend bool operator==(const FeaturePyramid&, const FeaturePyramid&) = default;
};

struct FeatureRegion {
  int level_index = 0;
  BoxPx box_feat;
  FeatureMap data;
  BoxPx source_box_px;

  friend bool operator==(const FeatureRegion&, const FeatureRegion&) = default;
};

/// Resampled and bordered level rasters for a schedule, still uncentered.
struct ImagePyramid {
  ScaleSchedule schedule;
  std::vector<Image> padded;
  std::vector<Extent> content_dims;
};

inline ImagePyramid buildImagePyramid(const Image& raw, const PyramidConfig& cfg) {
  const Image img = expandChannels(raw, cfg.mean.channels());
  ImagePyramid out;
  out.schedule = buildScaleSchedule(img.width, img.height, cfg.interval, cfg.max_scale,
                                    cfg.min_size_px);
  for (double s : out.schedule.scales) {
    Image level = resampleBilinear(img, s);
    out.content_dims.push_back({level.width, level.height});
    out.padded.push_back(padWithInterpolatedBorder(level, cfg.border_px, cfg.mean));
  }
  return out;
}

/// Dense multiscale descriptors for one image: schedule, resample, pad, pack
/// onto canvases, run the net once per canvas, then cut each level back out.
///
/// Placements are aligned to the net's total stride and only cells whose
/// receptive field lies inside a level's outer box are read back, so every
/// level equals the net run on that padded level alone.
inline FeaturePyramid convnetFeatPyramid(const Image& raw, const PyramidConfig& cfg) {
  cfg.validate();
  const int channels = cfg.mean.channels();
  const ConvNetSpec spec = makeToyNet(cfg.net_preset, cfg.net_seed, channels, cfg.net_bias);
  const NetGeometry geom = deriveNetGeometry(spec);

  const ImagePyramid ip = buildImagePyramid(raw, cfg);
  for (std::size_t i = 0; i < ip.padded.size(); ++i) {
    const Image& p = ip.padded[i];
    if (p.width < geom.receptive_field || p.height < geom.receptive_field)
      fail(ErrorKind::InputTooSmall,
           "level " + std::to_string(i) + " is " + std::to_string(p.width) + "x" +
               std::to_string(p.height) + " with border, below the " +
               std::to_string(geom.receptive_field) + "px receptive field; raise min_size");
  }

  const CanvasPlan plan =
      packBLF(ip.content_dims, cfg.canvas_w, cfg.canvas_h, cfg.border_px, geom.total_stride);
  const std::vector<Image> canvases = renderCanvases(plan, ip.padded, cfg.mean);

  std::vector<FeatureMap> canvas_feats(canvases.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(canvases.size(), cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw);
  if (workers <= 1) {
    for (std::size_t i = 0; i < canvases.size(); ++i) canvas_feats[i] = forward(spec, canvases[i]);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < canvases.size(); i += workers)
          canvas_feats[i] = forward(spec, canvases[i]);
      }));
    }
    for (auto& j : jobs) j.get();
  }

  FeaturePyramid pyra;
  pyra.source_dims = {raw.width, raw.height};
  pyra.mean = cfg.mean;
  pyra.spec_id = spec.id();
  pyra.net = specToJson(spec);
  pyra.border_px = cfg.border_px;
  for (const Placement& p : plan.placements) {
    const auto idx = static_cast<std::size_t>(p.level_index);
    const Image& padded = ip.padded[idx];
    const BoxPx cells{p.outer_box.x0 / geom.total_stride, p.outer_box.y0 / geom.total_stride,
                      p.outer_box.x0 / geom.total_stride + geom.outputExtent(padded.width),
                      p.outer_box.y0 / geom.total_stride + geom.outputExtent(padded.height)};
    PyramidLevel level;
    level.scale = ip.schedule.scales[idx];
    level.feat = canvas_feats[static_cast<std::size_t>(p.canvas_index)].crop(cells);
    level.geom = geom;
    level.image_dims = ip.content_dims[idx];
    level.padded_dims = {padded.width, padded.height};
    pyra.levels.push_back(std::move(level));
  }
  return pyra;
}

inline FeaturePyramid convnetFeatPyramid(const std::filesystem::path& image_path,
                                         const PyramidConfig& cfg) {
  return convnetFeatPyramid(decodeImage(image_path), cfg);
}

/// Maps a source-image box into a level's padded raster. Box edges lying on
/// the image boundary extend through the border to the raster edge.
inline BoxPx sourceBoxToLevelBox(const FeaturePyramid& pyra, int level_index, const BoxPx& box) {
  const PyramidLevel& l = pyra.levels.at(static_cast<std::size_t>(level_index));
  const double sx = static_cast<double>(l.image_dims.width) / pyra.source_dims.width;
  const double sy = static_cast<double>(l.image_dims.height) / pyra.source_dims.height;
  const int b = pyra.border_px;
  auto map = [b](int v, double s, int src_extent, int padded_extent) {
    if (v <= 0) return 0;
    if (v >= src_extent) return padded_extent;
    return static_cast<int>(roundHalfUp(v * s)) + b;
  };
  return {map(box.x0, sx, pyra.source_dims.width, l.padded_dims.width),
          map(box.y0, sy, pyra.source_dims.height, l.padded_dims.height),
          map(box.x1, sx, pyra.source_dims.width, l.padded_dims.width),
          map(box.y1, sy, pyra.source_dims.height, l.padded_dims.height)};
}

/// Picks the level where `box_px` spans closest to `target_cells` in
/// log-size distance (ties go to the larger scale) and crops its descriptors.
inline FeatureRegion cropRegion(const FeaturePyramid& pyra, const BoxPx& box_px,
                                Extent target_cells) {
  if (box_px.empty() || box_px.x0 < 0 || box_px.y0 < 0 || box_px.x1 > pyra.source_dims.width ||
      box_px.y1 > pyra.source_dims.height)
    fail(ErrorKind::InvalidArgument, "box " + to_string(box_px) + " is not inside the " +
                                         std::to_string(pyra.source_dims.width) + "x" +
                                         std::to_string(pyra.source_dims.height) + " image");
  if (target_cells.width < 1 || target_cells.height < 1)
    fail(ErrorKind::InvalidArgument, "target must be at least 1x1 cells");
  if (pyra.levels.empty()) fail(ErrorKind::BadLevel, "pyramid has no levels");

  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pyra.levels.size(); ++i) {
    const PyramidLevel& l = pyra.levels[i];
    const double sx = static_cast<double>(l.image_dims.width) / pyra.source_dims.width;
    const double sy = static_cast<double>(l.image_dims.height) / pyra.source_dims.height;
    const double mw = box_px.width() * sx / l.geom.total_stride;
    const double mh = box_px.height() * sy / l.geom.total_stride;
    const double dist = std::abs(std::log(mw / target_cells.width)) +
                        std::abs(std::log(mh / target_cells.height));
    if (dist < best_dist) {  // strict: earlier (larger-scale) levels win ties
      best_dist = dist;
      best = static_cast<int>(i);
    }
  }

  const PyramidLevel& l = pyra.levels[static_cast<std::size_t>(best)];
  const BoxPx level_box = sourceBoxToLevelBox(pyra, best, box_px);
  FeatureRegion r;
  r.level_index = best;
  r.box_feat = imageBoxToFeatureBox(level_box, l.geom, l.feat.width, l.feat.height);
  r.data = l.feat.crop(r.box_feat);
  r.source_box_px = box_px;
  return r;
}

struct WarpedPyramid {
  double aspect = 1.0;
  FeaturePyramid pyramid;
};

/// Area-preserving warp of the source to aspect ratio a.
inline Extent warpedDims(Extent src, double aspect) {
  if (!(aspect > 0.0)) fail(ErrorKind::InvalidArgument, "aspect ratio must be positive");
  const double area = static_cast<double>(src.width) * src.height;
  const auto w = roundHalfUp(std::sqrt(aspect * area));
  const auto h = roundHalfUp(std::sqrt(area / aspect));
  if (w < 1 || h < 1)
    fail(ErrorKind::ZeroOutputDim, "aspect " + std::to_string(aspect) + " collapses the image");
  return {static_cast<int>(w), static_cast<int>(h)};
}

inline std::vector<WarpedPyramid> warpedPyramids(const Image& raw,
                                                 const std::vector<double>& aspect_ratios,
                                                 const PyramidConfig& cfg) {
  std::vector<WarpedPyramid> out;
  out.reserve(aspect_ratios.size());
  for (double a : aspect_ratios) {
    const Extent d = warpedDims({raw.width, raw.height}, a);
    out.push_back({a, convnetFeatPyramid(resampleToSize(raw, d.width, d.height), cfg)});
  }
  return out;
}

inline std::vector<WarpedPyramid> warpedPyramids(const std::filesystem::path& image_path,
                                                 const std::vector<double>& aspect_ratios,
                                                 const PyramidConfig& cfg) {
  return warpedPyramids(decodeImage(image_path), aspect_ratios, cfg);
}

/// Per-cell sum over channels as a single-channel plane.
inline Image channelSumPlane(const FeatureMap& feat) {
  Image plane(feat.width, feat.height, 1);
  for (int y = 0; y < feat.height; ++y)
    for (int x = 0; x < feat.width; ++x) {
      float s = 0.0f;
      for (int c = 0; c < feat.channels; ++c) s += feat.at(x, y, c);
      plane.at(x, y) = s;
    }
  return plane;
}

inline void visualizeLevel(const FeaturePyramid& pyra, int level_index,
                           const std::filesystem::path& path) {
  if (level_index < 0 || level_index >= static_cast<int>(pyra.levels.size()))
    fail(ErrorKind::BadLevel, "level " + std::to_string(level_index) + " not in [0," +
                                  std::to_string(pyra.levels.size()) + ")");
  encodePgm(channelSumPlane(pyra.levels[static_cast<std::size_t>(level_index)].feat), path);
}

// ---------------------------------------------------------------------------
// Persistence: manifest.json plus one little-endian f32 tensor per level.

namespace detail {

inline std::string floatsToLeBytes(const std::vector<float>& v) {
  std::string out(v.size() * 4, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(v[i]);
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  return out;
}

inline std::vector<float> floatsFromLeBytes(const std::vector<unsigned char>& bytes) {
  if (bytes.size() % 4 != 0) fail(ErrorKind::CorruptFile, "tensor size is not a multiple of 4");
  std::vector<float> v(bytes.size() / 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    v[i] = std::bit_cast<float>(bits);
  }
  return v;
}

inline std::string levelFileName(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "level_%03zu.f32", i);
  return buf;
}

}  // namespace detail

inline void writeTensor(const std::filesystem::path& path, const FeatureMap& feat) {
  detail::writeFileBytes(path, detail::floatsToLeBytes(feat.data));
}

inline FeatureMap readTensor(const std::filesystem::path& path, int w, int h, int c) {
  FeatureMap f(w, h, c);
  auto data = detail::floatsFromLeBytes(detail::readFileBytes(path));
  if (data.size() != f.data.size())
    fail(ErrorKind::CorruptFile, "'" + path.string() + "' holds " + std::to_string(data.size()) +
                                     " floats, expected " + std::to_string(f.data.size()));
  f.data = std::move(data);
  return f;
}

inline nlohmann::json pyramidManifest(const FeaturePyramid& pyra) {
  nlohmann::json m;
  m["format"] = "densepyr-feature-pyramid";
  m["version"] = 1;
  m["source_dims"] = {pyra.source_dims.width, pyra.source_dims.height};
  m["mean"] = pyra.mean.values;
  m["spec_id"] = pyra.spec_id;
  m["net"] = pyra.net;
  m["border_px"] = pyra.border_px;
  m["element_type"] = "f32le";
  m["layout"] = "row-major channel-interleaved";
  auto& levels = m["levels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < pyra.levels.size(); ++i) {
    const PyramidLevel& l = pyra.levels[i];
    levels.push_back({{"index", i},
                      {"scale", l.scale},
                      {"image_dims", {l.image_dims.width, l.image_dims.height}},
                      {"padded_dims", {l.padded_dims.width, l.padded_dims.height}},
                      {"feat_dims", {l.feat.width, l.feat.height, l.feat.channels}},
                      {"stride", l.geom.total_stride},
                      {"rf", l.geom.receptive_field},
                      {"offset", l.geom.offset},
                      {"file", detail::levelFileName(i)}});
  }
  return m;
}

inline void savePyramid(const FeaturePyramid& pyra, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create '" + dir.string() + "': " + ec.message());
  for (std::size_t i = 0; i < pyra.levels.size(); ++i)
    writeTensor(dir / detail::levelFileName(i), pyra.levels[i].feat);
  detail::writeFileBytes(dir / "manifest.json", pyramidManifest(pyra).dump(2) + "\n");
}

inline FeaturePyramid loadPyramid(const std::filesystem::path& dir) {
  const auto bytes = detail::readFileBytes(dir / "manifest.json");
  FeaturePyramid pyra;
  try {
    const auto m = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (m.at("element_type") != "f32le")
      fail(ErrorKind::UnsupportedFormat, "element type " + m.at("element_type").dump());
    const auto src = m.at("source_dims").get<std::vector<int>>();
    pyra.source_dims = {src.at(0), src.at(1)};
    pyra.mean = MeanPixel(m.at("mean").get<std::vector<float>>());
    pyra.spec_id = m.at("spec_id").get<std::string>();
    pyra.net = m.at("net");
    pyra.border_px = m.at("border_px").get<int>();
    for (const auto& lj : m.at("levels")) {
      PyramidLevel l;
      l.scale = lj.at("scale").get<double>();
      const auto im = lj.at("image_dims").get<std::vector<int>>();
      const auto pd = lj.at("padded_dims").get<std::vector<int>>();
      const auto fd = lj.at("feat_dims").get<std::vector<int>>();
      l.image_dims = {im.at(0), im.at(1)};
      l.padded_dims = {pd.at(0), pd.at(1)};
      l.geom = {lj.at("stride").get<int>(), lj.at("rf").get<int>(), lj.at("offset").get<int>()};
      l.feat = readTensor(dir / lj.at("file").get<std::string>(), fd.at(0), fd.at(1), fd.at(2));
      pyra.levels.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptFile, "manifest: " + std::string(e.what()));
  } catch (const std::out_of_range&) {
    fail(ErrorKind::CorruptFile, "manifest: malformed dimension array");
  }
  return pyra;
}

}  // namespace densepyr

#endif  // DENSEPYR_PYRAMID_HPP
