#ifndef DENSEPYR_CONVNET_HPP
#define DENSEPYR_CONVNET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "densepyr/error.hpp"
#include "densepyr/geometry.hpp"
#include "densepyr/imaging.hpp"

namespace densepyr {

enum class LayerKind { Conv, Relu, MaxPool };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
  }
  return "?";
}

inline LayerKind layerKindFromString(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "relu") return LayerKind::Relu;
  if (s == "maxpool" || s == "pool") return LayerKind::MaxPool;
  fail(ErrorKind::InvalidArgument, "unknown layer kind '" + s + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int kernel = 1;
  int stride = 1;
  int out_channels = 0;        // conv only
  std::vector<float> weights;  // conv only: out x in x k x k
  std::vector<float> bias;     // conv only: out

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ConvNetSpec {
  std::vector<LayerSpec> layers;
  int input_channels = 3;
  std::uint64_t seed = 0;
  std::string preset = "custom";
  bool with_bias = false;

  std::vector<LayerShape> shapes() const {
    std::vector<LayerShape> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back({l.kernel, l.stride});
    return out;
  }
  int outputChannels() const {
    int c = input_channels;
    for (const auto& l : layers)
      if (l.kind == LayerKind::Conv) c = l.out_channels;
    return c;
  }
  /// Identifier recorded in pyramid manifests.
  std::string id() const {
    return preset + "/seed=" + std::to_string(seed) + "/in=" + std::to_string(input_channels) +
           "/bias=" + (with_bias ? "1" : "0");
  }

  friend bool operator==(const ConvNetSpec&, const ConvNetSpec&) = default;
};

inline void validateSpec(const ConvNetSpec& spec) {
  if (spec.layers.empty()) fail(ErrorKind::InvalidArgument, "network has no layers");
  if (spec.input_channels < 1) fail(ErrorKind::InvalidArgument, "input_channels must be >= 1");
  int c = spec.input_channels;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    if (l.kernel < 1 || l.stride < 1)
      fail(ErrorKind::InvalidArgument, where + ": kernel and stride must be >= 1");
    if (l.kind == LayerKind::Relu && (l.kernel != 1 || l.stride != 1))
      fail(ErrorKind::InvalidArgument, where + ": relu has no spatial extent");
    if (l.kind == LayerKind::Conv) {
      if (l.out_channels < 1) fail(ErrorKind::InvalidArgument, where + ": out_channels must be >= 1");
      const auto expected = static_cast<std::size_t>(l.out_channels) * c * l.kernel * l.kernel;
      if (l.weights.size() != expected || l.bias.size() != static_cast<std::size_t>(l.out_channels))
        fail(ErrorKind::DimMismatch, where + ": weight tensor does not chain with " +
                                         std::to_string(c) + " input channels");
      c = l.out_channels;
    }
  }
}

inline NetGeometry deriveNetGeometry(const ConvNetSpec& spec) {
  validateSpec(spec);
  const auto shapes = spec.shapes();
  return deriveNetGeometry(std::span<const LayerShape>(shapes));
}

/// Row-major, channel-interleaved grid of feature vectors.
struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  std::vector<float> cell(int x, int y) const {
    const auto i = static_cast<std::ptrdiff_t>(index(x, y));
    return {data.begin() + i, data.begin() + i + channels};
  }
  FeatureMap crop(const BoxPx& box) const {
    if (box.empty() || box.x0 < 0 || box.y0 < 0 || box.x1 > width || box.y1 > height)
      fail(ErrorKind::InvalidArgument, "crop box " + to_string(box) + " outside " +
                                           std::to_string(width) + "x" + std::to_string(height));
    FeatureMap out(box.width(), box.height(), channels);
    const auto row = static_cast<std::size_t>(box.width()) * channels;
    for (int y = 0; y < box.height(); ++y)
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(index(box.x0, box.y0 + y)), row,
                  out.data.begin() + static_cast<std::ptrdiff_t>(out.index(0, y)));
    return out;
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

// ---------------------------------------------------------------------------
// Construction

struct LayerDesc {
  LayerKind kind = LayerKind::Relu;
  int kernel = 1;
  int stride = 1;
  int out_channels = 0;
};

namespace detail {
// Portable uniform draw in [0,1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
}  // namespace detail

/// Builds a network with weights drawn from `seed`. Conv weights are uniform
/// with variance 1/fan_in, so each conv maps unit-variance inputs to
/// unit-variance pre-activations.
inline ConvNetSpec makeNet(const std::vector<LayerDesc>& descs, int input_channels,
                           std::uint64_t seed, bool with_bias = false,
                           std::string preset = "custom") {
  ConvNetSpec spec;
  spec.input_channels = input_channels;
  spec.seed = seed;
  spec.preset = std::move(preset);
  spec.with_bias = with_bias;
  std::mt19937_64 rng(seed);
  int c = input_channels;
  for (const LayerDesc& d : descs) {
    LayerSpec l;
    l.kind = d.kind;
    l.kernel = d.kind == LayerKind::Relu ? 1 : d.kernel;
    l.stride = d.kind == LayerKind::Relu ? 1 : d.stride;
    if (d.kind == LayerKind::Conv) {
      if (d.out_channels < 1 || d.kernel < 1)
        fail(ErrorKind::InvalidArgument, "conv needs kernel >= 1 and out_channels >= 1");
      l.out_channels = d.out_channels;
      const int fan_in = c * d.kernel * d.kernel;
      const double a = std::sqrt(3.0 / fan_in);
      l.weights.resize(static_cast<std::size_t>(d.out_channels) * fan_in);
      for (float& w : l.weights) w = static_cast<float>((2.0 * detail::uniform01(rng) - 1.0) * a);
      l.bias.assign(static_cast<std::size_t>(d.out_channels), 0.0f);
      if (with_bias)
        for (float& b : l.bias) b = static_cast<float>(detail::uniform01(rng) - 0.5);
      c = d.out_channels;
    }
    spec.layers.push_back(std::move(l));
  }
  validateSpec(spec);
  return spec;
}

inline std::vector<LayerDesc> presetLayers(const std::string& preset) {
  using K = LayerKind;
  if (preset == "tiny") return {{K::Conv, 5, 2, 8}, {K::Relu}, {K::MaxPool, 2, 2}};
  if (preset == "small")
    return {{K::Conv, 7, 2, 16}, {K::Relu}, {K::MaxPool, 3, 2}, {K::Conv, 3, 1, 16}, {K::Relu}};
  if (preset == "stride16")
    return {{K::Conv, 7, 2, 16}, {K::Relu},       {K::MaxPool, 3, 2}, {K::Conv, 3, 1, 24},
            {K::Relu},           {K::MaxPool, 3, 2}, {K::Conv, 3, 1, 32}, {K::Relu},
            {K::MaxPool, 2, 2}};
  fail(ErrorKind::UnknownPreset, "unknown net preset '" + preset + "' (tiny, small, stride16)");
}

/// Desk-scale stand-ins for a classifier's convolutional trunk:
///   tiny     conv5/2 relu pool2/2                      stride 4,  rf 7
///   small    conv7/2 relu pool3/2 conv3/1 relu         stride 4,  rf 19
///   stride16 three conv/relu/pool stages               stride 16, rf 51
inline ConvNetSpec makeToyNet(const std::string& preset, std::uint64_t seed,
                              int input_channels = 3, bool with_bias = false) {
  return makeNet(presetLayers(preset), input_channels, seed, with_bias, preset);
}

// ---------------------------------------------------------------------------
// Serialization (weights are regenerated from the seed, never stored)

inline nlohmann::json specToJson(const ConvNetSpec& spec) {
  nlohmann::json j;
  j["preset"] = spec.preset;
  j["seed"] = spec.seed;
  j["input_channels"] = spec.input_channels;
  j["with_bias"] = spec.with_bias;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const LayerSpec& l : spec.layers) {
    nlohmann::json lj{{"kind", to_string(l.kind)}};
    if (l.kind != LayerKind::Relu) {
      lj["kernel"] = l.kernel;
      lj["stride"] = l.stride;
    }
    if (l.kind == LayerKind::Conv) lj["out_channels"] = l.out_channels;
    layers.push_back(std::move(lj));
  }
  return j;
}

inline ConvNetSpec specFromJson(const nlohmann::json& j) {
  try {
    std::vector<LayerDesc> descs;
    for (const auto& lj : j.at("layers")) {
      LayerDesc d;
      d.kind = layerKindFromString(lj.at("kind").get<std::string>());
      d.kernel = lj.value("kernel", 1);
      d.stride = lj.value("stride", 1);
      d.out_channels = lj.value("out_channels", 0);
      descs.push_back(d);
    }
    return makeNet(descs, j.at("input_channels").get<int>(), j.at("seed").get<std::uint64_t>(),
                   j.value("with_bias", false), j.value("preset", std::string("custom")));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptFile, std::string("net spec: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Forward pass

namespace detail {

inline int validExtent(int in, int kernel, int stride) {
  return in < kernel ? 0 : (in - kernel) / stride + 1;
}

// Each output value accumulates bias, then input channels, then kernel rows,
// then kernel columns, in that order, whatever its position in the grid.
inline FeatureMap convValid(const FeatureMap& in, const LayerSpec& l) {
  const int k = l.kernel;
  const int s = l.stride;
  const int out_c = l.out_channels;
  const int in_c = in.channels;
  FeatureMap out(validExtent(in.width, k, s), validExtent(in.height, k, s), out_c);

  // out x in x k x k  ->  in x k x k x out
  std::vector<float> wt(l.weights.size());
  for (int o = 0; o < out_c; ++o)
    for (int i = 0; i < in_c * k * k; ++i)
      wt[static_cast<std::size_t>(i) * out_c + o] =
          l.weights[static_cast<std::size_t>(o) * in_c * k * k + i];

  std::vector<float> acc(static_cast<std::size_t>(out_c));
  for (int oy = 0; oy < out.height; ++oy) {
    for (int ox = 0; ox < out.width; ++ox) {
      std::copy(l.bias.begin(), l.bias.end(), acc.begin());
      const float* w = wt.data();
      for (int ic = 0; ic < in_c; ++ic) {
        for (int ky = 0; ky < k; ++ky) {
          const float* src = &in.data[in.index(ox * s, oy * s + ky, ic)];
          for (int kx = 0; kx < k; ++kx, w += out_c) {
            const float v = src[static_cast<std::ptrdiff_t>(kx) * in_c];
            for (int o = 0; o < out_c; ++o) acc[static_cast<std::size_t>(o)] += w[o] * v;
          }
        }
      }
      std::copy(acc.begin(), acc.end(), out.data.begin() + static_cast<std::ptrdiff_t>(out.index(ox, oy)));
    }
  }
  return out;
}

inline FeatureMap maxPoolValid(const FeatureMap& in, const LayerSpec& l) {
  const int k = l.kernel;
  const int s = l.stride;
  FeatureMap out(validExtent(in.width, k, s), validExtent(in.height, k, s), in.channels);
  for (int oy = 0; oy < out.height; ++oy)
    for (int ox = 0; ox < out.width; ++ox)
      for (int c = 0; c < in.channels; ++c) {
        float m = -std::numeric_limits<float>::infinity();
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) m = std::max(m, in.at(ox * s + kx, oy * s + ky, c));
        out.at(ox, oy, c) = m;
      }
  return out;
}

}  // namespace detail

/// Runs the network over a centered image with valid (unpadded) windows.
inline FeatureMap forward(const ConvNetSpec& spec, const Image& img) {
  validateSpec(spec);
  if (!img.centered) fail(ErrorKind::InvalidArgument, "forward expects a centered image");
  if (img.channels != spec.input_channels)
    fail(ErrorKind::DimMismatch, "net expects " + std::to_string(spec.input_channels) +
                                     " channels, image has " + std::to_string(img.channels));
  const NetGeometry g = deriveNetGeometry(spec);
  if (img.width < g.receptive_field || img.height < g.receptive_field)
    fail(ErrorKind::InputTooSmall, std::to_string(img.width) + "x" + std::to_string(img.height) +
                                       " input is smaller than the " +
                                       std::to_string(g.receptive_field) + "px receptive field");

  FeatureMap x(img.width, img.height, img.channels);
  x.data = img.data;
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv: x = detail::convValid(x, l); break;
      case LayerKind::MaxPool: x = detail::maxPoolValid(x, l); break;
      case LayerKind::Relu:
        for (float& v : x.data) v = std::max(v, 0.0f);
        break;
    }
  }
  return x;
}

/// Crops one receptive-field-sized patch and returns its single feature vector.
inline std::vector<float> forwardPatch(const ConvNetSpec& spec, const Image& img, const BoxPx& box) {
  const NetGeometry g = deriveNetGeometry(spec);
  if (box.width() != g.receptive_field || box.height() != g.receptive_field)
    fail(ErrorKind::WrongPatchSize, "patch " + to_string(box) + " is not " +
                                        std::to_string(g.receptive_field) + "px square");
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > img.width || box.y1 > img.height)
    fail(ErrorKind::InvalidArgument, "patch " + to_string(box) + " leaves the image");
  Image patch(box.width(), box.height(), img.channels);
  patch.centered = img.centered;
  const auto row = static_cast<std::size_t>(box.width()) * img.channels;
  for (int y = 0; y < box.height(); ++y)
    std::copy_n(img.data.begin() + static_cast<std::ptrdiff_t>(img.index(box.x0, box.y0 + y)), row,
                patch.data.begin() + static_cast<std::ptrdiff_t>(patch.index(0, y)));
  return forward(spec, patch).data;
}

}  // namespace densepyr

#endif  // DENSEPYR_CONVNET_HPP
