#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using namespace flowsynth;
using flowsynth::testing::bilinear_ref;

TEST(IdentityGrid, CoordsEqualPixelPositions) {
  const CoordGrid g = make_identity_grid(2, 3);
  EXPECT_EQ(g(0, 0), (Vec2{0, 0}));
  EXPECT_EQ(g(0, 2), (Vec2{2, 0}));
  EXPECT_EQ(g(1, 1), (Vec2{1, 1}));
  const CoordGrid big = make_identity_grid(544, 1280);
  EXPECT_EQ(big(543, 1279), (Vec2{1279, 543}));
}

TEST(IdentityGrid, ZeroDimensionThrows) {
  EXPECT_THROW(make_identity_grid(0, 4), InvalidDimension);
  EXPECT_THROW(make_identity_grid(4, 0), InvalidDimension);
}

TEST(BilinearSample, IdentityGridIsBitExact) {
  Rng rng = make_rng(1);
  const Image img = flowsynth::testing::random_image(17, 23, 3, rng);
  EXPECT_EQ(bilinear_sample(img, make_identity_grid(17, 23)), img);
  EXPECT_EQ(bilinear_sample(img, make_identity_grid(17, 23), Border::kZero), img);
}

TEST(BilinearSample, HalfwayBetweenTwoPixels) {
  Image img(1, 2, 1);
  img.at(0, 1, 0) = 1.0f;
  CoordGrid g(1, 1, Vec2{0.5, 0.0});
  EXPECT_FLOAT_EQ(bilinear_sample(img, g).at(0, 0, 0), 0.5f);
}

TEST(BilinearSample, ConstantImageStaysConstant) {
  const Image img(9, 9, 3, 0.37f);
  Rng rng = make_rng(2);
  CoordGrid g(20, 20);
  std::uniform_real_distribution<double> d(0.0, 8.0);
  for (Vec2& p : g.data()) p = {d(rng), d(rng)};
  const Image out = bilinear_sample(img, g);
  for (float v : out.data()) EXPECT_NEAR(v, 0.37f, 1e-6);
}

TEST(BilinearSample, MatchesScalarOracleForBothBorders) {
  Rng rng = make_rng(3);
  const Image img = flowsynth::testing::random_image(12, 15, 3, rng);
  CoordGrid g(30, 30);
  std::uniform_real_distribution<double> d(-3.0, 17.0);
  for (Vec2& p : g.data()) p = {d(rng), d(rng)};
  for (Border b : {Border::kClamp, Border::kZero}) {
    const Image out = bilinear_sample(img, g, b);
    for (int y = 0; y < 30; ++y) {
      for (int x = 0; x < 30; ++x) {
        for (int c = 0; c < 3; ++c) {
          const double ref = std::clamp(bilinear_ref(img, g(y, x).x, g(y, x).y, c, b), 0.0, 1.0);
          ASSERT_NEAR(out.at(y, x, c), ref, 1e-5) << "at " << x << "," << y;
        }
      }
    }
  }
}

TEST(BilinearSample, NoOvershootOfNeighborhood) {
  Rng rng = make_rng(4);
  const Image img = flowsynth::testing::random_image(10, 10, 1, rng);
  CoordGrid g(50, 50);
  std::uniform_real_distribution<double> d(0.0, 9.0);
  for (Vec2& p : g.data()) p = {d(rng), d(rng)};
  const Image out = bilinear_sample(img, g);
  for (int i = 0; i < 2500; ++i) {
    const Vec2 p = g.data()[i];
    const int x0 = int(std::floor(p.x)), y0 = int(std::floor(p.y));
    float lo = 1, hi = 0;
    for (int yy = y0; yy <= std::min(y0 + 1, 9); ++yy) {
      for (int xx = x0; xx <= std::min(x0 + 1, 9); ++xx) {
        lo = std::min(lo, img.at(yy, xx, 0));
        hi = std::max(hi, img.at(yy, xx, 0));
      }
    }
    EXPECT_GE(out.data()[i], lo - 1e-6f);
    EXPECT_LE(out.data()[i], hi + 1e-6f);
  }
}

TEST(BilinearSample, EmptySourceThrows) {
  EXPECT_THROW(bilinear_sample(Image{}, make_identity_grid(2, 2)), InvalidDimension);
}

TEST(SampleMask, StepBoundaryMidpointIsHalf) {
  Mask m(1, 4, 0.0f);
  m(0, 2) = m(0, 3) = 1.0f;
  CoordGrid g(1, 1, Vec2{1.5, 0.0});
  EXPECT_FLOAT_EQ(sample_mask(m, g)(0, 0), 0.5f);
}

TEST(SampleMask, OutsideReadsZeroAndOnesStayOnes) {
  const Mask ones(6, 6, 1.0f);
  EXPECT_EQ(sample_mask(ones, make_identity_grid(6, 6)), ones);
  CoordGrid g(1, 2);
  g(0, 0) = {2.5, 2.5};
  g(0, 1) = {-0.5, 2.0};
  const Mask out = sample_mask(ones, g);
  EXPECT_FLOAT_EQ(out(0, 0), 1.0f);
  EXPECT_FLOAT_EQ(out(0, 1), 0.5f);
}

TEST(SampleLayer, MatchesSeparateResampling) {
  Rng rng = make_rng(5);
  Mask matte(8, 8, 0.0f);
  for (int y = 2; y < 6; ++y) {
    for (int x = 1; x < 7; ++x) matte(y, x) = 1.0f;
  }
  Image tex = flowsynth::testing::random_image(8, 8, 3, rng);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) tex.at(y, x, c) *= matte(y, x);
    }
  }
  CoordGrid g(12, 12);
  std::uniform_real_distribution<double> d(-2.0, 10.0);
  for (Vec2& p : g.data()) p = {d(rng), d(rng)};
  Image t_out;
  Mask m_out;
  sample_layer(tex, matte, g, {}, t_out, m_out);
  const Image t_ref = bilinear_sample(tex, g, Border::kZero);
  const Mask m_ref = sample_mask(matte, g);
  for (std::size_t i = 0; i < m_ref.size(); ++i) EXPECT_NEAR(m_out.data()[i], m_ref.data()[i], 1e-6);
  for (std::size_t i = 0; i < t_ref.data().size(); ++i) EXPECT_NEAR(t_out.data()[i], t_ref.data()[i], 1e-6);
}

TEST(AlphaComposite, LimitsAndBlend) {
  const Image fg(4, 5, 3, 1.0f), bg(4, 5, 3, 0.0f);
  EXPECT_EQ(alpha_composite(fg, Mask(4, 5, 0.0f), bg), bg);
  EXPECT_EQ(alpha_composite(fg, Mask(4, 5, 1.0f), bg), fg);
  const Image half = alpha_composite(fg, Mask(4, 5, 0.5f), bg);
  for (float v : half.data()) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(AlphaComposite, OverItselfIsIdentity) {
  Rng rng = make_rng(6);
  const Image img = flowsynth::testing::random_image(7, 9, 3, rng);
  Mask m(7, 9);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  for (float& v : m.data()) v = d(rng);
  const Image out = alpha_composite(img, m, img);
  for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_NEAR(out.data()[i], img.data()[i], 1e-6);
}

TEST(AlphaComposite, ShapeMismatchThrows) {
  EXPECT_THROW(alpha_composite(Image(3, 3, 3), Mask(3, 4), Image(3, 3, 3)), InvalidDimension);
}

TEST(Windows, SupportBoxCropAndPaste) {
  Mask m(10, 12, 0.0f);
  m(3, 4) = 0.2f;
  m(6, 9) = 1.0f;
  const Rect box = support_box(m);
  EXPECT_EQ(box, (Rect{4, 3, 10, 7}));
  EXPECT_EQ(count_set(m), 1);
  EXPECT_TRUE(support_box(Mask(3, 3, 0.0f)).empty());
  const Mask window = crop_plane(m, box);
  EXPECT_EQ(paste_window(window, box, 10, 12), m);
}
