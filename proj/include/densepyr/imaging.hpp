#ifndef DENSEPYR_IMAGING_HPP
#define DENSEPYR_IMAGING_HPP

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "densepyr/error.hpp"
#include "densepyr/geometry.hpp"

namespace densepyr {

/// Row-major, channel-interleaved float raster. Raw images hold samples in
/// [0,255]; centered images have had a mean pixel subtracted.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;
  bool centered = false;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Per-channel centering constant. Stored in float so that a canvas filled
/// with the mean centers to exact zeros.
struct MeanPixel {
  std::vector<float> values;

  MeanPixel() = default;
  MeanPixel(std::initializer_list<float> v) : values(v) {
    for (float x : values) {
      if (!(x >= 0.0f && x <= 255.0f))
        fail(ErrorKind::InvalidArgument, "mean components must lie in [0,255]");
    }
  }
  explicit MeanPixel(std::vector<float> v) : values(std::move(v)) {
    for (float x : values) {
      if (!(x >= 0.0f && x <= 255.0f))
        fail(ErrorKind::InvalidArgument, "mean components must lie in [0,255]");
    }
  }
  static MeanPixel zero(int channels) {
    return MeanPixel(std::vector<float>(static_cast<std::size_t>(channels), 0.0f));
  }

  int channels() const { return static_cast<int>(values.size()); }
  float operator[](int c) const { return values[static_cast<std::size_t>(c)]; }

  friend bool operator==(const MeanPixel&, const MeanPixel&) = default;
};

// ---------------------------------------------------------------------------
// Decode / encode

namespace detail {

inline std::vector<unsigned char> readFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::CorruptFile, "cannot open '" + path.string() + "' (not found)");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void writeFileBytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "short write to '" + path.string() + "'");
}

// Netpbm header token reader; skips whitespace and '#' comments.
class PnmHeader {
 public:
  explicit PnmHeader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  int nextInt() {
    skipSpace();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      fail(ErrorKind::CorruptFile, "malformed netpbm header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > std::numeric_limits<int>::max())
        fail(ErrorKind::CorruptFile, "netpbm header value overflow");
    }
    return static_cast<int>(v);
  }
  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t rasterStart() {
    if (pos_ >= bytes_.size()) fail(ErrorKind::CorruptFile, "netpbm raster missing");
    return pos_ + 1;
  }

 private:
  void skipSpace() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 2;
};

inline Image decodePnm(const std::vector<unsigned char>& bytes, int channels) {
  PnmHeader hdr(bytes);
  const int w = hdr.nextInt();
  const int h = hdr.nextInt();
  const int maxval = hdr.nextInt();
  if (w < 1 || h < 1) fail(ErrorKind::CorruptFile, "netpbm dimensions must be positive");
  if (maxval < 1 || maxval > 255)
    fail(ErrorKind::UnsupportedFormat, "only 8-bit netpbm is supported (maxval " +
                                           std::to_string(maxval) + ")");
  const std::size_t start = hdr.rasterStart();
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() < start + n) fail(ErrorKind::CorruptFile, "netpbm raster truncated");
  Image img(w, h, channels);
  const float norm = maxval == 255 ? 1.0f : 255.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < n; ++i) img.data[i] = static_cast<float>(bytes[start + i]) * norm;
  return img;
}

inline Image decodePng(const std::vector<unsigned char>& bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    fail(ErrorKind::CorruptFile, std::string("png: ") + png.message);
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<unsigned char> raster(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raster.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorKind::CorruptFile, "png: " + msg);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height), channels);
  std::transform(raster.begin(), raster.end(), img.data.begin(),
                 [](unsigned char b) { return static_cast<float>(b); });
  return img;
}

inline unsigned char toByte(float v) {
  return static_cast<unsigned char>(std::clamp<std::int64_t>(roundHalfUp(v), 0, 255));
}

}  // namespace detail

/// Reads PNG or binary PGM/PPM (P5/P6) into a raw (uncentered) image.
inline Image decodeImage(const std::filesystem::path& path) {
  const auto bytes = detail::readFileBytes(path);
  static constexpr std::array<unsigned char, 8> kPngSig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= kPngSig.size() && std::equal(kPngSig.begin(), kPngSig.end(), bytes.begin()))
    return detail::decodePng(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    if (bytes[1] == '5') return detail::decodePnm(bytes, 1);
    if (bytes[1] == '6') return detail::decodePnm(bytes, 3);
  }
  fail(ErrorKind::UnsupportedFormat, "'" + path.string() + "' is not PNG or binary PGM/PPM");
}

enum class PgmScaling {
  MinMax,  // (v - min) / (max - min) * 255; a constant plane maps to 0
  Raw,     // round and clamp to [0,255]
};

/// Binary P5 bytes for a single-channel plane.
inline std::string encodePgmBytes(const Image& plane, PgmScaling scaling = PgmScaling::MinMax) {
  if (plane.channels != 1)
    fail(ErrorKind::DimMismatch, "PGM output needs a single-channel plane");
  std::string out = "P5\n" + std::to_string(plane.width) + " " + std::to_string(plane.height) +
                    "\n255\n";
  out.reserve(out.size() + plane.data.size());
  if (scaling == PgmScaling::Raw) {
    for (float v : plane.data) out.push_back(static_cast<char>(detail::toByte(v)));
    return out;
  }
  float lo = std::numeric_limits<float>::infinity();
  float hi = -lo;
  for (float v : plane.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = static_cast<double>(hi) - lo;
  for (float v : plane.data) {
    const float scaled = range > 0.0 ? static_cast<float>((v - lo) / range * 255.0) : 0.0f;
    out.push_back(static_cast<char>(detail::toByte(scaled)));
  }
  return out;
}

inline void encodePgm(const Image& plane, const std::filesystem::path& path,
                      PgmScaling scaling = PgmScaling::MinMax) {
  detail::writeFileBytes(path, encodePgmBytes(plane, scaling));
}

/// Writes a raw image as P5 (1 channel) or P6 (3 channels), 8-bit.
inline void encodePnm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3)
    fail(ErrorKind::UnsupportedFormat, "netpbm output supports 1 or 3 channels");
  std::string out = std::string(img.channels == 1 ? "P5" : "P6") + "\n" +
                    std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  for (float v : img.data) out.push_back(static_cast<char>(detail::toByte(v)));
  detail::writeFileBytes(path, out);
}

inline Image extractChannel(const Image& img, int channel) {
  if (channel < 0 || channel >= img.channels)
    fail(ErrorKind::InvalidArgument, "channel " + std::to_string(channel) + " out of range");
  Image plane(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) plane.at(x, y) = img.at(x, y, channel);
  plane.centered = img.centered;
  return plane;
}

/// Replicates a grayscale image into `channels` identical channels.
inline Image expandChannels(const Image& img, int channels) {
  if (img.channels == channels) return img;
  if (img.channels != 1)
    fail(ErrorKind::DimMismatch, "cannot convert " + std::to_string(img.channels) + " to " +
                                     std::to_string(channels) + " channels");
  Image out(img.width, img.height, channels);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(i * channels), channels, img.data[i]);
  out.centered = img.centered;
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

/// Bilinear resampling onto an exact output size. Sample centers sit at
/// half-pixel positions; taps beyond the border clamp to the edge.
inline Image resampleToSize(const Image& img, int out_w, int out_h) {
  if (img.centered) fail(ErrorKind::AlreadyCentered, "resampling expects a raw image");
  if (out_w < 1 || out_h < 1)
    fail(ErrorKind::ZeroOutputDim, "output size " + std::to_string(out_w) + "x" +
                                       std::to_string(out_h) + " has a zero dimension");
  if (out_w == img.width && out_h == img.height) return img;

  const double rx = static_cast<double>(img.width) / out_w;
  const double ry = static_cast<double>(img.height) / out_h;
  struct Tap {
    int i0, i1;
    float frac;
  };
  auto taps = [](int n_out, int n_in, double ratio) {
    std::vector<Tap> t(static_cast<std::size_t>(n_out));
    for (int o = 0; o < n_out; ++o) {
      const double src = std::clamp((o + 0.5) * ratio - 0.5, 0.0, static_cast<double>(n_in - 1));
      const int i0 = static_cast<int>(std::floor(src));
      t[static_cast<std::size_t>(o)] = {i0, std::min(i0 + 1, n_in - 1),
                                        static_cast<float>(src - i0)};
    }
    return t;
  };
  const auto tx = taps(out_w, img.width, rx);
  const auto ty = taps(out_h, img.height, ry);

  Image out(out_w, out_h, img.channels);
  for (int y = 0; y < out_h; ++y) {
    const Tap& vy = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      const Tap& vx = tx[static_cast<std::size_t>(x)];
      for (int c = 0; c < img.channels; ++c) {
        // lerp form keeps constant regions exactly constant
        const float a = img.at(vx.i0, vy.i0, c);
        const float b = img.at(vx.i1, vy.i0, c);
        const float d = img.at(vx.i0, vy.i1, c);
        const float e = img.at(vx.i1, vy.i1, c);
        const float top = a + (b - a) * vx.frac;
        const float bottom = d + (e - d) * vx.frac;
        out.at(x, y, c) = top + (bottom - top) * vy.frac;
      }
    }
  }
  return out;
}

inline Image resampleBilinear(const Image& img, double scale) {
  if (!(scale > 0.0)) fail(ErrorKind::InvalidArgument, "scale must be positive");
  const auto w = roundHalfUp(img.width * scale);
  const auto h = roundHalfUp(img.height * scale);
  if (w < 1 || h < 1 || w > std::numeric_limits<int>::max() || h > std::numeric_limits<int>::max())
    fail(ErrorKind::ZeroOutputDim, "scale " + std::to_string(scale) + " maps " +
                                       std::to_string(img.width) + "x" +
                                       std::to_string(img.height) + " to an unusable size");
  return resampleToSize(img, static_cast<int>(w), static_cast<int>(h));
}

// ---------------------------------------------------------------------------
// Centering and borders

inline void checkMeanChannels(const Image& img, const MeanPixel& mean) {
  if (mean.channels() != img.channels)
    fail(ErrorKind::DimMismatch, "mean has " + std::to_string(mean.channels()) +
                                     " channels, image has " + std::to_string(img.channels));
}

inline Image centerImage(const Image& img, const MeanPixel& mean) {
  if (img.centered) fail(ErrorKind::AlreadyCentered, "image is already centered");
  checkMeanChannels(img, mean);
  Image out = img;
  const auto c = static_cast<std::size_t>(img.channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= mean.values[i % c];
  out.centered = true;
  return out;
}

/// Grows each side by `border_px`. A pad sample at depth d (Chebyshev distance
/// to the nearest image pixel) blends that edge pixel toward the mean with
/// weight d / (border_px + 1).
inline Image padWithInterpolatedBorder(const Image& img, int border_px, const MeanPixel& mean) {
  if (border_px < 0) fail(ErrorKind::InvalidArgument, "border must be >= 0");
  if (img.centered) fail(ErrorKind::AlreadyCentered, "padding operates on raw images");
  checkMeanChannels(img, mean);
  if (border_px == 0) return img;

  const int b = border_px;
  Image out(img.width + 2 * b, img.height + 2 * b, img.channels);
  const float denom = static_cast<float>(b + 1);
  for (int y = 0; y < out.height; ++y) {
    const int sy = y - b;
    const int cy = std::clamp(sy, 0, img.height - 1);
    for (int x = 0; x < out.width; ++x) {
      const int sx = x - b;
      const int cx = std::clamp(sx, 0, img.width - 1);
      const int depth = std::max(std::abs(sx - cx), std::abs(sy - cy));
      const float t = static_cast<float>(depth) / denom;
      for (int c = 0; c < img.channels; ++c) {
        const float edge = img.at(cx, cy, c);
        out.at(x, y, c) = depth == 0 ? edge : edge + (mean[c] - edge) * t;
      }
    }
  }
  return out;
}

}  // namespace densepyr

#endif  // DENSEPYR_IMAGING_HPP
