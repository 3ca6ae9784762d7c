#include <gtest/gtest.h>

#include <random>

#include "densepyr/packing.hpp"
#include "test_support.hpp"

using namespace densepyr;

namespace {

// Exhaustive pairwise checks of every plan invariant.
void expectPlanInvariants(const CanvasPlan& plan, const std::vector<Extent>& dims) {
  ASSERT_EQ(plan.placements.size(), dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const Placement& p = plan.placements[i];
    EXPECT_EQ(p.level_index, static_cast<int>(i));
    EXPECT_GE(p.canvas_index, 0);
    EXPECT_LT(p.canvas_index, plan.canvas_count);
    EXPECT_EQ(p.inner_box.width(), dims[i].width);
    EXPECT_EQ(p.inner_box.height(), dims[i].height);
    EXPECT_EQ(p.outer_box, p.inner_box.inflated(plan.border_px));
    EXPECT_TRUE((BoxPx{0, 0, plan.canvas_w, plan.canvas_h}).contains(p.outer_box));
    EXPECT_EQ(p.outer_box.x0 % plan.align, 0);
    EXPECT_EQ(p.outer_box.y0 % plan.align, 0);
    for (std::size_t j = i + 1; j < dims.size(); ++j) {
      const Placement& q = plan.placements[j];
      if (p.canvas_index != q.canvas_index) continue;
      EXPECT_FALSE(p.outer_box.intersects(q.outer_box)) << i << " vs " << j;
      const int gap_x = std::max(q.inner_box.x0 - p.inner_box.x1, p.inner_box.x0 - q.inner_box.x1);
      const int gap_y = std::max(q.inner_box.y0 - p.inner_box.y1, p.inner_box.y0 - q.inner_box.y1);
      EXPECT_GE(std::max(gap_x, gap_y), 2 * plan.border_px) << i << " vs " << j;
    }
  }
}

}  // namespace

TEST(PackBLF, SingleLevelAtOrigin) {
  const auto plan = packBLF(std::vector<Extent>{{40, 40}}, 100, 100, 16);
  EXPECT_EQ(plan.canvas_count, 1);
  EXPECT_EQ(plan.placements[0].outer_box, (BoxPx{0, 0, 72, 72}));
  EXPECT_EQ(plan.placements[0].inner_box, (BoxPx{16, 16, 56, 56}));
}

TEST(PackBLF, SecondLevelOverflowsToNewCanvas) {
  const auto plan = packBLF(std::vector<Extent>{{40, 40}, {40, 40}}, 100, 100, 16);
  EXPECT_EQ(plan.canvas_count, 2);
  EXPECT_EQ(plan.placements[1].canvas_index, 1);
  EXPECT_EQ(plan.placements[1].outer_box, (BoxPx{0, 0, 72, 72}));
}

TEST(PackBLF, SideBySide) {
  const auto plan = packBLF(std::vector<Extent>{{60, 60}, {60, 20}}, 200, 100, 16);
  EXPECT_EQ(plan.canvas_count, 1);
  EXPECT_EQ(plan.placements[0].outer_box, (BoxPx{0, 0, 92, 92}));
  EXPECT_EQ(plan.placements[1].outer_box, (BoxPx{92, 0, 184, 52}));
}

TEST(PackBLF, TallestFirstRegardlessOfInputOrder) {
  const auto plan = packBLF(std::vector<Extent>{{60, 20}, {60, 60}}, 200, 100, 16);
  EXPECT_EQ(plan.placements[1].outer_box, (BoxPx{0, 0, 92, 92}));
  EXPECT_EQ(plan.placements[0].outer_box, (BoxPx{92, 0, 184, 52}));
}

TEST(PackBLF, FillsBelowWhenRowIsFull) {
  // 30x30 outer boxes on a 70x70 canvas: two across, then the next row
  const auto plan = packBLF(std::vector<Extent>{{30, 30}, {30, 30}, {30, 30}, {30, 30}}, 70, 70, 0);
  EXPECT_EQ(plan.canvas_count, 1);
  EXPECT_EQ(plan.placements[0].outer_box, (BoxPx{0, 0, 30, 30}));
  EXPECT_EQ(plan.placements[1].outer_box, (BoxPx{30, 0, 60, 30}));
  EXPECT_EQ(plan.placements[2].outer_box, (BoxPx{0, 30, 30, 60}));
  EXPECT_EQ(plan.placements[3].outer_box, (BoxPx{30, 30, 60, 60}));
}

TEST(PackBLF, AlignmentSnapsAnchors) {
  const auto plan = packBLF(std::vector<Extent>{{10, 10}, {10, 10}}, 100, 100, 3, 8);
  EXPECT_EQ(plan.placements[0].outer_box, (BoxPx{0, 0, 16, 16}));
  EXPECT_EQ(plan.placements[1].outer_box, (BoxPx{16, 0, 32, 16}));
  const auto odd = packBLF(std::vector<Extent>{{11, 11}, {11, 11}}, 100, 100, 3, 8);
  EXPECT_EQ(odd.placements[1].outer_box.x0, 24);
}

TEST(PackBLF, LevelTooLargeNamesLevel) {
  try {
    packBLF(std::vector<Extent>{{10, 10}, {90, 10}}, 100, 100, 6);
    FAIL() << "expected LevelTooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LevelTooLarge);
    EXPECT_NE(std::string(e.what()).find("level 1"), std::string::npos);
  }
}

TEST(PackBLF, RandomSetsSatisfyInvariants) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> count(1, 30), side(1, 120), border(0, 16), align(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const int b = border(rng);
    const int a = 1 << (align(rng) - 1);
    std::vector<Extent> dims(static_cast<std::size_t>(count(rng)));
    for (auto& d : dims) d = {side(rng), side(rng)};
    const auto plan = packBLF(dims, 160 + 2 * b, 150 + 2 * b, b, a);
    expectPlanInvariants(plan, dims);
    EXPECT_EQ(packBLF(dims, 160 + 2 * b, 150 + 2 * b, b, a), plan);
  }
}

TEST(Render, EmptyPlan) {
  const auto plan = packBLF(std::vector<Extent>{}, 50, 50, 4);
  EXPECT_EQ(plan.canvas_count, 0);
  EXPECT_TRUE(renderCanvases(plan, std::vector<Image>{}, MeanPixel{1.0f, 2.0f, 3.0f}).empty());
}

TEST(Render, MeanLevelGivesZeroCanvas) {
  const MeanPixel mean{104.0f, 117.0f, 123.0f};
  Image level(10, 8, 3);
  for (std::size_t i = 0; i < level.data.size(); ++i) level.data[i] = mean.values[i % 3];
  const auto plan = packBLF(std::vector<Extent>{{10, 8}}, 64, 64, 5);
  const auto canvases =
      renderCanvases(plan, std::vector<Image>{padWithInterpolatedBorder(level, 5, mean)}, mean);
  ASSERT_EQ(canvases.size(), 1u);
  EXPECT_TRUE(canvases[0].centered);
  for (float v : canvases[0].data) ASSERT_EQ(v, 0.0f);
}

TEST(Render, BlitIndexArithmetic) {
  const MeanPixel mean{104.0f, 117.0f, 123.0f};
  std::vector<Image> padded;
  std::vector<Extent> dims{{20, 15}, {9, 30}, {25, 5}};
  for (std::size_t i = 0; i < dims.size(); ++i)
    padded.push_back(padWithInterpolatedBorder(
        testkit::randomImage(dims[i].width, dims[i].height, 3, 40 + i), 3, mean));
  const auto plan = packBLF(dims, 60, 60, 3);
  const auto canvases = renderCanvases(plan, padded, mean);
  for (const Placement& p : plan.placements) {
    const Image& lvl = padded[static_cast<std::size_t>(p.level_index)];
    const Image& cv = canvases[static_cast<std::size_t>(p.canvas_index)];
    for (int y = p.outer_box.y0; y < p.outer_box.y1; ++y)
      for (int x = p.outer_box.x0; x < p.outer_box.x1; ++x)
        for (int c = 0; c < 3; ++c)
          ASSERT_EQ(cv.at(x, y, c), lvl.at(x - p.outer_box.x0, y - p.outer_box.y0, c) - mean[c]);
  }
}

TEST(Render, DimMismatch) {
  const auto plan = packBLF(std::vector<Extent>{{10, 10}}, 64, 64, 2);
  EXPECT_THROW(renderCanvases(plan, std::vector<Image>{Image(10, 10, 3)}, MeanPixel{0, 0, 0}),
               Error);
  EXPECT_THROW(renderCanvases(plan, std::vector<Image>{}, MeanPixel{0, 0, 0}), Error);
}

TEST(Debug, PlanJsonAndMask) {
  const auto plan = packBLF(std::vector<Extent>{{60, 60}, {60, 20}}, 200, 100, 16);
  const auto j = planToJson(plan);
  EXPECT_EQ(j["canvas_count"], 1);
  EXPECT_EQ(j["placements"][1]["outer"], nlohmann::json({92, 0, 184, 52}));
  const Image mask = occupancyMask(plan, 0);
  EXPECT_EQ(mask.at(0, 0), 128.0f);
  EXPECT_EQ(mask.at(20, 20), 255.0f);
  EXPECT_EQ(mask.at(190, 90), 0.0f);
}
