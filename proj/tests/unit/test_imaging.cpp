#include <gtest/gtest.h>

#include <png.h>

#include <cstring>
#include <fstream>

#include "densepyr/imaging.hpp"
#include "test_support.hpp"

using namespace densepyr;
using densepyr::testkit::TempDir;

namespace {

void writeBytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary).write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string readBytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ErrorKind kindOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(Decode, TwoByTwoPpm) {
  TempDir dir("decode");
  const unsigned char px[12] = {0, 1, 2, 10, 20, 30, 100, 150, 200, 253, 254, 255};
  writeBytes(dir / "a.ppm", "P6\n# comment\n2 2\n255\n" + std::string(reinterpret_cast<const char*>(px), 12));
  const Image img = decodeImage(dir / "a.ppm");
  ASSERT_EQ(img.width, 2);
  ASSERT_EQ(img.height, 2);
  ASSERT_EQ(img.channels, 3);
  EXPECT_FALSE(img.centered);
  for (int i = 0; i < 12; ++i) EXPECT_EQ(img.data[static_cast<std::size_t>(i)], px[i]);
}

TEST(Decode, PgmAndPng) {
  TempDir dir("decode_png");
  const Image src = testkit::randomImage(7, 5, 3, 4);
  // write a PNG through libpng's simplified API
  std::vector<unsigned char> raster(src.data.size());
  for (std::size_t i = 0; i < raster.size(); ++i) raster[i] = static_cast<unsigned char>(src.data[i]);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = 7;
  png.height = 5;
  png.format = PNG_FORMAT_RGB;
  ASSERT_TRUE(png_image_write_to_file(&png, (dir / "a.png").c_str(), 0, raster.data(), 0, nullptr));
  EXPECT_EQ(decodeImage(dir / "a.png"), src);

  encodePnm(extractChannel(src, 1), dir / "g.pgm");
  EXPECT_EQ(decodeImage(dir / "g.pgm"), extractChannel(src, 1));
}

TEST(Decode, Errors) {
  TempDir dir("decode_err");
  EXPECT_EQ(kindOf([&] { decodeImage(dir / "missing.png"); }), ErrorKind::CorruptFile);
  writeBytes(dir / "x.bmp", "BM not an image");
  EXPECT_EQ(kindOf([&] { decodeImage(dir / "x.bmp"); }), ErrorKind::UnsupportedFormat);
  writeBytes(dir / "short.ppm", "P6\n4 4\n255\nabc");
  EXPECT_EQ(kindOf([&] { decodeImage(dir / "short.ppm"); }), ErrorKind::CorruptFile);
  writeBytes(dir / "deep.pgm", "P5\n1 1\n65535\nab");
  EXPECT_EQ(kindOf([&] { decodeImage(dir / "deep.pgm"); }), ErrorKind::UnsupportedFormat);
  std::string png_head = "\x89PNG\r\n\x1a\n garbage";
  writeBytes(dir / "bad.png", png_head);
  EXPECT_EQ(kindOf([&] { decodeImage(dir / "bad.png"); }), ErrorKind::CorruptFile);
}

TEST(EncodePgm, ConstantPlaneIsZero) {
  Image plane(3, 2, 1, 42.0f);
  const std::string bytes = encodePgmBytes(plane);
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(bytes.substr(header.size()), std::string(6, '\0'));
}

TEST(EncodePgm, MinMaxStretch) {
  Image plane(3, 1, 1);
  plane.data = {-2.0f, 0.0f, 2.0f};
  const std::string bytes = encodePgmBytes(plane);
  EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 3]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 2]), 128);  // 127.5 rounds up
  EXPECT_EQ(static_cast<unsigned char>(bytes[bytes.size() - 1]), 255);
  EXPECT_EQ(kindOf([&] { encodePgmBytes(Image(2, 2, 3)); }), ErrorKind::DimMismatch);
}

TEST(EncodePgm, PpmChannelsRoundTripLosslessly) {
  TempDir dir("roundtrip");
  const Image src = testkit::randomImage(9, 4, 3, 8);
  encodePnm(src, dir / "src.ppm");
  const Image decoded = decodeImage(dir / "src.ppm");
  ASSERT_EQ(decoded, src);
  for (int c = 0; c < 3; ++c) {
    const auto name = "c" + std::to_string(c) + ".pgm";
    encodePgm(extractChannel(decoded, c), dir / name, PgmScaling::Raw);
    EXPECT_EQ(decodeImage(dir / name), extractChannel(src, c));
  }
  // PPM bytes are reproduced exactly as well
  encodePnm(decoded, dir / "again.ppm");
  EXPECT_EQ(readBytes(dir / "again.ppm"), readBytes(dir / "src.ppm"));
}

TEST(Resample, IdentityAtScaleOne) {
  const Image src = testkit::randomImage(31, 17, 3, 1);
  EXPECT_EQ(resampleBilinear(src, 1.0), src);
}

TEST(Resample, ConstantStaysConstant) {
  Image src(13, 9, 3);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 13; ++x) {
      src.at(x, y, 0) = 17.3f;
      src.at(x, y, 1) = 200.0f;
      src.at(x, y, 2) = 0.1f;
    }
  for (double s : {0.3, 0.5, 0.77, 1.3, 2.0, 3.7}) {
    const Image out = resampleBilinear(src, s);
    EXPECT_EQ(out.width, roundHalfUp(13 * s));
    EXPECT_EQ(out.height, roundHalfUp(9 * s));
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        ASSERT_EQ(out.at(x, y, 0), 17.3f);
        ASSERT_EQ(out.at(x, y, 1), 200.0f);
        ASSERT_EQ(out.at(x, y, 2), 0.1f);
      }
  }
}

TEST(Resample, UpsampleTwoPixelRow) {
  // Output centers map to source x = -0.25, 0.25, 0.75, 1.25, clamped to [0,1]:
  // 0, 0.25*255, 0.75*255, 255.
  Image src(2, 1, 1);
  src.data = {0.0f, 255.0f};
  const Image out = resampleBilinear(src, 2.0);
  ASSERT_EQ(out.width, 4);
  ASSERT_EQ(out.height, 2);
  const std::vector<float> expected{0.0f, 63.75f, 191.25f, 255.0f};
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(out.at(x, y), expected[static_cast<std::size_t>(x)]);
}

TEST(Resample, Errors) {
  const Image src = testkit::randomImage(4, 4, 1, 2);
  EXPECT_EQ(kindOf([&] { resampleBilinear(src, 0.1); }), ErrorKind::ZeroOutputDim);
  EXPECT_EQ(kindOf([&] { resampleToSize(src, 0, 3); }), ErrorKind::ZeroOutputDim);
  Image c = src;
  c.centered = true;
  EXPECT_EQ(kindOf([&] { resampleBilinear(c, 2.0); }), ErrorKind::AlreadyCentered);
}

TEST(Center, Examples) {
  const MeanPixel mean{104.0f, 117.0f, 123.0f};
  Image at_mean(5, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c) at_mean.at(x, y, c) = mean[c];
  const Image z = centerImage(at_mean, mean);
  EXPECT_TRUE(z.centered);
  for (float v : z.data) EXPECT_EQ(v, 0.0f);

  const Image src = testkit::randomImage(5, 4, 3, 3);
  Image same = centerImage(src, MeanPixel::zero(3));
  EXPECT_EQ(same.data, src.data);

  Image one(1, 1, 3);
  one.data = {130.0f, 117.0f, 0.0f};
  EXPECT_EQ(centerImage(one, mean).data, (std::vector<float>{26.0f, 0.0f, -123.0f}));

  EXPECT_EQ(kindOf([&] { centerImage(z, mean); }), ErrorKind::AlreadyCentered);
  EXPECT_EQ(kindOf([&] { centerImage(src, MeanPixel{1.0f}); }), ErrorKind::DimMismatch);
  EXPECT_THROW(MeanPixel({300.0f}), Error);
}

TEST(Pad, ZeroBorderIsIdentity) {
  const Image src = testkit::randomImage(6, 3, 3, 5);
  EXPECT_EQ(padWithInterpolatedBorder(src, 0, MeanPixel{1.0f, 2.0f, 3.0f}), src);
}

TEST(Pad, ConstantMeanImageStaysConstant) {
  const MeanPixel mean{104.0f, 117.0f, 123.0f};
  Image src(4, 3, 3);
  for (std::size_t i = 0; i < src.data.size(); ++i) src.data[i] = mean.values[i % 3];
  const Image out = padWithInterpolatedBorder(src, 16, mean);
  ASSERT_EQ(out.width, 36);
  ASSERT_EQ(out.height, 35);
  for (std::size_t i = 0; i < out.data.size(); ++i) ASSERT_EQ(out.data[i], mean.values[i % 3]);
}

TEST(Pad, SinglePixelHalfWay) {
  Image src(1, 1, 1, 255.0f);
  const Image out = padWithInterpolatedBorder(src, 1, MeanPixel{0.0f});
  ASSERT_EQ(out.width, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) EXPECT_EQ(out.at(x, y), (x == 1 && y == 1) ? 255.0f : 127.5f);
}

TEST(Pad, DepthWeightsAndMonotonicity) {
  const int b = 4;
  const Image src = testkit::randomImage(5, 6, 1, 9);
  const MeanPixel mean{90.0f};
  const Image out = padWithInterpolatedBorder(src, b, mean);
  // walking outward from every edge pixel moves monotonically toward the mean
  for (int y = 0; y < src.height; ++y) {
    const float edge = src.at(0, y);
    float prev = edge;
    for (int d = 1; d <= b; ++d) {
      const float v = out.at(b - d, b + y);
      const float expect = edge + (90.0f - edge) * (static_cast<float>(d) / (b + 1));
      EXPECT_FLOAT_EQ(v, expect);
      EXPECT_LE(std::abs(v - 90.0f), std::abs(prev - 90.0f));
      prev = v;
    }
  }
  // corners blend the corner pixel using Chebyshev depth
  const float corner = src.at(src.width - 1, src.height - 1);
  const float v = out.at(b + src.width - 1 + 3, b + src.height - 1 + 1);
  EXPECT_FLOAT_EQ(v, corner + (90.0f - corner) * (3.0f / (b + 1)));
  // outermost ring keeps weight b/(b+1) on the mean
  const float first = src.at(0, 0);
  EXPECT_FLOAT_EQ(out.at(0, 0), first + (90.0f - first) * (static_cast<float>(b) / (b + 1)));
}
