#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "oracles.hpp"

using namespace flowsynth;
using flowsynth::testing::random_flow;
using flowsynth::testing::random_image;
using flowsynth::testing::read_bytes;
using flowsynth::testing::TempDir;

namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

template <class T>
T load_le(const std::string& bytes, std::size_t at) {
  T v;
  std::memcpy(&v, bytes.data() + at, sizeof v);
  return v;
}

}  // namespace

TEST(Flo, SinglePixelLayout) {
  FlowField f(1, 1);
  f(0, 0) = {1.5f, -2.25f};
  const std::string b = encode_flo(f);
  ASSERT_EQ(b.size(), 20u);
  EXPECT_EQ(load_le<float>(b, 0), 202021.25f);
  EXPECT_EQ(b.substr(0, 4), "PIEH");
  EXPECT_EQ(load_le<std::int32_t>(b, 4), 1);
  EXPECT_EQ(load_le<std::int32_t>(b, 8), 1);
  EXPECT_EQ(load_le<float>(b, 12), 1.5f);
  EXPECT_EQ(load_le<float>(b, 16), -2.25f);
}

TEST(Flo, RoundTripIsBitExact) {
  Rng rng = make_rng(1);
  TempDir dir;
  FlowField f = random_flow(17, 23, 300.0, rng);
  f(0, 0) = {-0.0f, 1e-30f};
  write_flo(f, dir / "a.flo");
  const FlowField g = read_flo(dir / "a.flo");
  ASSERT_EQ(g.width(), 23);
  ASSERT_EQ(g.height(), 17);
  EXPECT_EQ(std::memcmp(f.data().data(), g.data().data(), f.size() * sizeof(FlowVec)), 0);
  EXPECT_EQ(read_bytes(dir / "a.flo"), encode_flo(f));
  f(1, 1) = {std::numeric_limits<float>::quiet_NaN(), 0.0f};
  EXPECT_THROW(write_flo(f, dir / "b.flo"), EncodeError);
}

TEST(Flo, RejectsBadInput) {
  FlowField f(2, 3);
  std::string b = encode_flo(f);
  std::string bad_magic = b;
  bad_magic[0] ^= 1;
  EXPECT_THROW(decode_flo(bad_magic), FormatError);
  EXPECT_THROW(decode_flo(std::string_view(b).substr(0, b.size() - 1)), FormatError);
  EXPECT_THROW(decode_flo(std::string_view(b).substr(0, 8)), FormatError);
  std::string negative = b;
  const std::int32_t minus = -2;
  std::memcpy(negative.data() + 4, &minus, 4);
  EXPECT_THROW(decode_flo(negative), FormatError);
  EXPECT_THROW(read_flo("/nonexistent/x.flo"), IoError);
}

TEST(Kitti, ZeroFlowStoresOffsetAndValidity) {
  TempDir dir;
  Mask valid(3, 4, 1.0f);
  valid(1, 2) = 0.0f;
  write_kitti_png(FlowField(3, 4), valid, dir / "k.png");
  const cv::Mat raw = cv::imread((dir / "k.png").string(), cv::IMREAD_UNCHANGED);
  ASSERT_EQ(raw.type(), CV_16UC3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) {
      const cv::Vec3w p = raw.at<cv::Vec3w>(y, x);  // stored R, G, B = u, v, valid
      EXPECT_EQ(p[2], 32768);
      EXPECT_EQ(p[1], 32768);
      EXPECT_EQ(p[0], (y == 1 && x == 2) ? 0 : 1);
    }
  }
}

TEST(Kitti, RoundTripWithinQuantization) {
  Rng rng = make_rng(2);
  TempDir dir;
  const FlowField f = random_flow(20, 30, 511.0, rng);
  write_kitti_png(f, Mask(20, 30, 1.0f), dir / "k.png");
  const KittiFlow k = read_kitti_png(dir / "k.png");
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_LE(std::abs(k.flow.data()[i].u - f.data()[i].u), 1.0 / 128);
    EXPECT_LE(std::abs(k.flow.data()[i].v - f.data()[i].v), 1.0 / 128);
    EXPECT_EQ(k.valid.data()[i], 1.0f);
  }
}

TEST(Kitti, OutOfRangeOnValidPixelThrows) {
  TempDir dir;
  FlowField f(2, 2);
  f(0, 1) = {512.0f, 0.0f};
  EXPECT_THROW(write_kitti_png(f, Mask(2, 2, 1.0f), dir / "k.png"), EncodeError);
  f(0, 1) = {0.0f, -600.0f};
  EXPECT_THROW(write_kitti_png(f, Mask(2, 2, 1.0f), dir / "k.png"), EncodeError);
  f(0, 1) = {std::nanf(""), 0.0f};
  EXPECT_THROW(write_kitti_png(f, Mask(2, 2, 1.0f), dir / "k.png"), EncodeError);
  Mask valid(2, 2, 1.0f);
  valid(0, 1) = 0.0f;
  write_kitti_png(f, valid, dir / "k.png");
  const KittiFlow k = read_kitti_png(dir / "k.png");
  EXPECT_EQ(k.valid(0, 1), 0.0f);
  EXPECT_EQ(k.flow(0, 1), (FlowVec{0, 0}));
}

TEST(Png, EightBitRoundTrip) {
  Rng rng = make_rng(3);
  TempDir dir;
  const Image img = random_image(13, 17, 3, rng);
  write_png(img, dir / "a.png");
  const Image back = read_png(dir / "a.png");
  ASSERT_EQ(back.channels(), 3);
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    EXPECT_EQ(back.data()[i], std::round(img.data()[i] * 255.0f) / 255.0f);
  }
  const cv::Mat raw = cv::imread((dir / "a.png").string(), cv::IMREAD_UNCHANGED);
  ASSERT_EQ(raw.type(), CV_8UC3);
  EXPECT_EQ(raw.at<cv::Vec3b>(4, 5)[0], std::lround(img.at(4, 5, 2) * 255.0));
}

TEST(Png, GrayAndMasks) {
  TempDir dir;
  Image gray(4, 5, 1, 0.0f);
  gray.at(1, 1, 0) = 1.0f;
  gray.at(2, 3, 0) = 2.0f;
  gray.at(3, 4, 0) = -1.0f;
  write_png(gray, dir / "g.png");
  const Image back = read_png(dir / "g.png");
  EXPECT_EQ(back.at(1, 1, 1), 1.0f);
  EXPECT_EQ(back.at(2, 3, 0), 1.0f);
  EXPECT_EQ(back.at(3, 4, 2), 0.0f);
  Mask m(6, 7, 0.0f);
  m(2, 2) = 1.0f;
  write_mask_png(m, dir / "m.png");
  EXPECT_EQ(read_mask_png(dir / "m.png"), m);
  EXPECT_THROW(read_png(dir / "missing.png"), IoError);
  write_bytes(dir / "junk.png", "not a png");
  EXPECT_ANY_THROW(read_png(dir / "junk.png"));
}

TEST(Colorize, ZeroIsWhiteAndOppositeIsComplement) {
  FlowField f(1, 4);
  f(0, 1) = {3, 4};
  f(0, 2) = {-3, -4};
  f(0, 3) = {0, 5};
  const Image c = colorize_flow(f, 5.0);
  for (int ch = 0; ch < 3; ++ch) {
    EXPECT_NEAR(c.at(0, 0, ch), 1.0f, 1e-6);
    EXPECT_NEAR(c.at(0, 2, ch), 1.0f - c.at(0, 1, ch), 1e-5);
  }
  FlowField z(3, 3);
  const Image cz = colorize_flow(z);
  for (float v : cz.data()) EXPECT_NEAR(v, 1.0f, 1e-6);
}

TEST(Ingest, SizeFilterAndFit) {
  TempDir dir;
  write_png(procedural_texture(400, 1300, 1), dir / "b_big.png");
  write_png(procedural_texture(100, 120, 2), dir / "a_small.png");
  write_png(procedural_texture(600, 900, 3), dir / "c_tall.png");
  write_bytes(dir / "notes.txt", "hello");
  const ImageCorpus c = ingest_images(dir.path(), {200, 200}, Size2{1242, 375});
  ASSERT_EQ(c.images.size(), 2u);
  EXPECT_EQ(c.images[0].path.filename(), "b_big.png");
  for (const CorpusImage& im : c.images) {
    EXPECT_EQ(im.image.width(), 1242);
    EXPECT_EQ(im.image.height(), 375);
    EXPECT_EQ(im.image.channels(), 3);
  }
  ASSERT_GE(c.skipped.size(), 1u);
  EXPECT_THROW(ingest_images(dir.path(), {5000, 5000}), EmptyCorpus);
  EXPECT_THROW(ingest_images(dir / "missing"), IoError);
}

TEST(Ingest, FitToSizeCoversAndCenters) {
  Image img(10, 40, 1, 0.0f);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 40; ++x) img.at(y, x, 0) = float(x) / 39.0f;
  }
  const Image out = fit_to_size(img, {10, 10});
  ASSERT_EQ(out.width(), 10);
  ASSERT_EQ(out.height(), 10);
  // Center crop of columns 15..24.
  EXPECT_NEAR(out.at(5, 0, 0), 15.0 / 39.0, 0.02);
  EXPECT_NEAR(out.at(5, 9, 0), 24.0 / 39.0, 0.02);
}

TEST(Sample, WriteReadAndNaming) {
  TempDir dir;
  const Image img = procedural_texture(20, 24, 4);
  SceneSample s = flowsynth::testing::constant_flow_sample(img, {1.25f, -0.5f});
  s.occlusion(3, 3) = 1.0f;
  s.shadow_region(4, 4) = 1.0f;
  s.provenance.seed = 99;
  const SampleRecord r = write_sample(s, dir.path(), sample_id(7), {true, true});
  EXPECT_EQ(r.id, "000007");
  EXPECT_EQ(r.frame0, "000007_img1.png");
  EXPECT_EQ(r.flow_flo, "000007_flow.flo");
  EXPECT_EQ(r.flow_kitti, "000007_flow.png");
  EXPECT_EQ(r.width, 24);
  EXPECT_EQ(r.generator, generator_version());
  const SceneSample back = read_sample(r, dir.path());
  EXPECT_EQ(back.flow, s.flow);
  EXPECT_EQ(back.occlusion, s.occlusion);
  EXPECT_EQ(back.shadow_region, s.shadow_region);
  const SampleRecord parsed = record_from_json(record_to_json(r));
  EXPECT_EQ(record_to_json(parsed), record_to_json(r));
  EXPECT_EQ(parsed.provenance.seed, 99u);
  EXPECT_EQ(sample_id(1234567), "1234567");
}

TEST(Manifest, WriteSortedReadAndValidate) {
  TempDir dir;
  const Image img = procedural_texture(10, 12, 5);
  SceneSample s = flowsynth::testing::constant_flow_sample(img, {});
  {
    ManifestWriter w(dir.path(), R"({"seed":1})");
    for (int i : {3, 1, 2}) {
      s.provenance.seed = i;
      w.add(write_sample(s, dir.path(), sample_id(i)));
    }
    EXPECT_EQ(w.size(), 3u);
    w.finish();
  }
  const Manifest m = read_manifest(dir / kManifestName);
  EXPECT_EQ(m.schema_version, kManifestSchemaVersion);
  ASSERT_EQ(m.records.size(), 3u);
  EXPECT_EQ(m.records[0].id, "000001");
  EXPECT_EQ(m.records[2].id, "000003");
  EXPECT_NE(m.config_json.find("seed"), std::string::npos);
  EXPECT_TRUE(validate_manifest(dir / kManifestName).ok());

  fs::remove(dir / "000002_occ.png");
  const ManifestCheck bad = validate_manifest(dir / kManifestName);
  EXPECT_EQ(bad.n_records, 3u);
  ASSERT_EQ(bad.problems.size(), 1u);
  EXPECT_NE(bad.problems[0].find("000002"), std::string::npos);

  s.provenance.seed = 2;
  write_sample(s, dir.path(), sample_id(2));
  EXPECT_TRUE(validate_manifest(dir / kManifestName).ok());
}

TEST(Manifest, InterruptedTailIsIgnoredAndJunkRejected) {
  TempDir dir;
  const SceneSample s = flowsynth::testing::constant_flow_sample(Image(6, 6, 3, 0.5f), {});
  {
    ManifestWriter w(dir.path(), "{}");
    w.add(write_sample(s, dir.path(), sample_id(0)));
    w.finish();
  }
  const std::string text = read_bytes(dir / kManifestName);
  write_bytes(dir / kManifestName, text + R"({"id":"000001","fra)");
  EXPECT_EQ(read_manifest(dir / kManifestName).records.size(), 1u);
  write_bytes(dir / kManifestName, text + "garbage\n");
  EXPECT_THROW(read_manifest(dir / kManifestName), FormatError);
  EXPECT_THROW(read_manifest(dir / "nope.jsonl"), IoError);
}
