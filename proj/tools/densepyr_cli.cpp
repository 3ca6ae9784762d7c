// densepyr command-line front end: extract, crop, visualize, bench, analytic, pack-debug.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "densepyr/densepyr.hpp"

namespace fs = std::filesystem;
using namespace densepyr;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::vector<std::string> splitList(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

template <typename T>
std::vector<T> parseNumbers(const std::string& s, char sep, std::size_t count, const char* what) {
  const auto parts = splitList(s, sep);
  if (parts.size() != count)
    fail(ErrorKind::InvalidArgument, std::string(what) + " needs " + std::to_string(count) +
                                         " values, got '" + s + "'");
  std::vector<T> out;
  for (const auto& p : parts) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_integral_v<T>) {
        out.push_back(static_cast<T>(std::stoll(p, &used)));
      } else {
        out.push_back(static_cast<T>(std::stod(p, &used)));
      }
      if (used != p.size()) throw std::invalid_argument(p);
    } catch (const std::logic_error&) {
      fail(ErrorKind::InvalidArgument, std::string(what) + ": '" + p + "' is not a number");
    }
  }
  return out;
}

// Flags layered over defaults and an optional --config file.
struct ConfigFlags {
  std::string config_path;
  int interval = 0;
  double max_scale = 0;
  int min_size = 0;
  std::string canvas;
  int border = 0;
  std::string mean;
  std::string net;
  std::uint64_t seed = 0;
  bool bias = false;
  int threads = 0;

  CLI::Option* o_interval = nullptr;
  CLI::Option* o_max_scale = nullptr;
  CLI::Option* o_min_size = nullptr;
  CLI::Option* o_canvas = nullptr;
  CLI::Option* o_border = nullptr;
  CLI::Option* o_mean = nullptr;
  CLI::Option* o_net = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_bias = nullptr;
  CLI::Option* o_threads = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file; explicit flags override it")
        ->check(CLI::ExistingFile);
    o_interval = app->add_option("--interval", interval, "scales per octave (default 5)");
    o_max_scale = app->add_option("--max-scale", max_scale, "largest scale factor (default 2.0)");
    o_min_size = app->add_option("--min-size", min_size,
                                 "smallest allowed short side of a level in px (default 16)");
    o_canvas = app->add_option("--canvas", canvas, "canvas size WxH (default 1200x1200)");
    o_border = app->add_option("--border", border, "border around each level in px (default 16)");
    o_mean = app->add_option("--mean", mean, "mean pixel r,g,b (default 104,117,123)");
    o_net = app->add_option("--net", net, "net preset: tiny, small, stride16 (default tiny)");
    o_seed = app->add_option("--seed", seed, "weight seed (default 1)");
    o_bias = app->add_flag("--bias", bias, "draw random conv biases (default off)");
    o_threads = app->add_option("--threads", threads,
                                "canvases processed concurrently, 0 = all cores (default 0)");
  }

  PyramidConfig resolve() const {
    PyramidConfig c;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidArgument, "config '" + config_path + "': " + e.what());
      }
      applyConfigJson(c, j);
    }
    if (o_interval->count()) c.interval = interval;
    if (o_max_scale->count()) c.max_scale = max_scale;
    if (o_min_size->count()) c.min_size_px = min_size;
    if (o_canvas->count()) {
      const auto wh = parseNumbers<int>(canvas, 'x', 2, "--canvas");
      c.canvas_w = wh[0];
      c.canvas_h = wh[1];
    }
    if (o_border->count()) c.border_px = border;
    if (o_mean->count()) c.mean = MeanPixel(parseNumbers<float>(mean, ',', 3, "--mean"));
    if (o_net->count()) c.net_preset = net;
    if (o_seed->count()) c.net_seed = seed;
    if (o_bias->count()) c.net_bias = bias;
    if (o_threads->count()) c.threads = threads;
    c.validate();
    return c;
  }
};

void printLevelTable(const FeaturePyramid& pyra) {
  std::printf("%5s %10s %11s %11s %15s\n", "level", "scale", "image", "padded", "features");
  for (std::size_t i = 0; i < pyra.levels.size(); ++i) {
    const auto& l = pyra.levels[i];
    const std::string img = std::to_string(l.image_dims.width) + "x" + std::to_string(l.image_dims.height);
    const std::string pad = std::to_string(l.padded_dims.width) + "x" + std::to_string(l.padded_dims.height);
    const std::string feat = std::to_string(l.feat.width) + "x" + std::to_string(l.feat.height) + "x" +
                             std::to_string(l.feat.channels);
    std::printf("%5zu %10.6f %11s %11s %15s\n", i, l.scale, img.c_str(), pad.c_str(), feat.c_str());
  }
}

void writeText(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write '" + p.string() + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense multiscale convolutional descriptor pyramids"};
  app.require_subcommand(1);

  // extract
  auto* extract = app.add_subcommand("extract", "build a feature pyramid and write it to a directory");
  std::string ex_image, ex_out;
  ConfigFlags ex_flags;
  extract->add_option("image", ex_image, "input PNG/PPM/PGM")->required();
  extract->add_option("--out,-o", ex_out, "output directory")->required();
  ex_flags.attach(extract);

  // crop
  auto* crop = app.add_subcommand("crop", "cut the descriptors of one image box out of a pyramid");
  std::string cr_dir, cr_box, cr_target, cr_out;
  crop->add_option("pyramid", cr_dir, "directory written by extract")->required();
  crop->add_option("--box", cr_box, "source-image box x0,y0,x1,y1 (half-open)")->required();
  crop->add_option("--target", cr_target, "desired size in cells w,h")->required();
  crop->add_option("--out,-o", cr_out, "output prefix; writes <out>.f32 and <out>.json")->required();

  // visualize
  auto* vis = app.add_subcommand("visualize", "write a level's channel-sum map as PGM");
  std::string vi_dir, vi_out;
  int vi_level = 0;
  vis->add_option("pyramid", vi_dir, "directory written by extract")->required();
  vis->add_option("--level", vi_level, "level index")->required();
  vis->add_option("--out,-o", vi_out, "output .pgm path")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "time dense+crop against per-window forwards");
  std::string be_image, be_net = "tiny", be_mean = "104,117,123";
  std::uint64_t be_seed = 1;
  int be_windows = 500, be_repeats = 3;
  bool be_json = false;
  bench->add_option("image", be_image, "input PNG/PPM/PGM")->required();
  bench->add_option("--net", be_net, "net preset (default tiny)");
  bench->add_option("--seed", be_seed, "weight seed (default 1)");
  bench->add_option("--windows", be_windows, "number of stride-aligned windows (default 500)");
  bench->add_option("--repeats", be_repeats, "timing repeats, best is kept (default 3)");
  bench->add_option("--mean", be_mean, "mean pixel r,g,b (default 104,117,123)");
  bench->add_flag("--json", be_json, "emit JSON instead of text");

  // analytic
  auto* analytic = app.add_subcommand("analytic", "region count and work-sharing arithmetic");
  std::int64_t an_n = 0, an_m = 0, an_stride = 0;
  bool an_nofence = false, an_json = false;
  analytic->add_option("N", an_n, "image side in px")->required();
  analytic->add_option("M", an_m, "window side in px")->required();
  analytic->add_option("stride", an_stride, "window stride in px")->required();
  analytic->add_flag("--no-fencepost", an_nofence, "count ((N-M)/stride)^2 regions, no +1");
  analytic->add_flag("--json", an_json, "emit JSON instead of text");

  // pack-debug
  auto* pack = app.add_subcommand("pack-debug", "dump the canvas plan for an image's pyramid");
  std::string pk_image, pk_out, pk_masks;
  ConfigFlags pk_flags;
  pack->add_option("image", pk_image, "input PNG/PPM/PGM")->required();
  pack->add_option("--out,-o", pk_out, "plan JSON path (default: stdout)");
  pack->add_option("--masks", pk_masks, "directory for per-canvas occupancy PGMs");
  pk_flags.attach(pack);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*extract) {
      const PyramidConfig cfg = ex_flags.resolve();
      const FeaturePyramid pyra = convnetFeatPyramid(fs::path(ex_image), cfg);
      savePyramid(pyra, ex_out);
      printLevelTable(pyra);
    } else if (*crop) {
      const auto box = parseNumbers<int>(cr_box, ',', 4, "--box");
      const auto target = parseNumbers<int>(cr_target, ',', 2, "--target");
      const FeaturePyramid pyra = loadPyramid(cr_dir);
      const FeatureRegion r = cropRegion(pyra, {box[0], box[1], box[2], box[3]}, {target[0], target[1]});
      writeTensor(cr_out + ".f32", r.data);
      const nlohmann::json side{{"level", r.level_index},
                                {"scale", pyra.levels[static_cast<std::size_t>(r.level_index)].scale},
                                {"source_box_px", boxToJson(r.source_box_px)},
                                {"box_feat", boxToJson(r.box_feat)},
                                {"dims", {r.data.width, r.data.height, r.data.channels}},
                                {"element_type", "f32le"},
                                {"layout", "row-major channel-interleaved"},
                                {"file", fs::path(cr_out + ".f32").filename().string()}};
      writeText(cr_out + ".json", side.dump(2) + "\n");
      std::printf("level %d  cells %s  -> %s.f32\n", r.level_index, to_string(r.box_feat).c_str(),
                  cr_out.c_str());
    } else if (*vis) {
      visualizeLevel(loadPyramid(vi_dir), vi_level, vi_out);
    } else if (*bench) {
      const MeanPixel mean(parseNumbers<float>(be_mean, ',', 3, "--mean"));
      const Image img = centerImage(expandChannels(decodeImage(be_image), 3), mean);
      const BenchReport rep = benchDenseVsPerRegion(img, makeToyNet(be_net, be_seed), be_windows,
                                                    be_seed, be_repeats);
      std::cout << (be_json ? benchToJson(rep).dump(2) + "\n" : benchToText(rep));
      if (!rep.outputs_identical) return kExitRuntime;
    } else if (*analytic) {
      const CostReport r = analyticCost(an_n, an_m, an_stride,
                                        an_nofence ? RegionCount::NoFencepost : RegionCount::Windows);
      if (an_json) {
        auto j = costToJson(r);
        j["mode"] = an_nofence ? "no-fencepost" : "windows";
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << costToText(r);
      }
    } else if (*pack) {
      const PyramidConfig cfg = pk_flags.resolve();
      const auto spec = makeToyNet(cfg.net_preset, cfg.net_seed, cfg.mean.channels(), cfg.net_bias);
      const ImagePyramid ip = buildImagePyramid(decodeImage(pk_image), cfg);
      const CanvasPlan plan = packBLF(ip.content_dims, cfg.canvas_w, cfg.canvas_h, cfg.border_px,
                                      deriveNetGeometry(spec).total_stride);
      const std::string text = planToJson(plan).dump(2) + "\n";
      if (pk_out.empty()) {
        std::cout << text;
      } else {
        writeText(pk_out, text);
      }
      if (!pk_masks.empty()) {
        fs::create_directories(pk_masks);
        for (int i = 0; i < plan.canvas_count; ++i) {
          char name[32];
          std::snprintf(name, sizeof(name), "canvas_%03d.pgm", i);
          encodePgm(occupancyMask(plan, i), fs::path(pk_masks) / name, PgmScaling::Raw);
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "densepyr: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "densepyr: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
