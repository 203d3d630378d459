#include <gtest/gtest.h>

#include <deque>
#include <fstream>
#include <set>

#include "oracles.hpp"

using namespace flowsynth;

namespace {

// Flood fill from the first pixel of each label; true if it reaches them all.
bool labels_connected(const SegmentationMap& seg) {
  const LabelMap& l = seg.labels;
  const int h = l.height(), w = l.width();
  std::vector<std::int64_t> reached(seg.n_segments, 0);
  std::vector<bool> started(seg.n_segments, false);
  Plane<std::uint8_t> seen(h, w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = l(y, x);
      if (started[id]) continue;
      started[id] = true;
      std::deque<std::pair<int, int>> q{{y, x}};
      seen(y, x) = 1;
      while (!q.empty()) {
        auto [cy, cx] = q.front();
        q.pop_front();
        ++reached[id];
        const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ny = cy + dy[k], nx = cx + dx[k];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w || seen(ny, nx) || l(ny, nx) != id) continue;
          seen(ny, nx) = 1;
          q.push_back({ny, nx});
        }
      }
    }
  }
  for (int i = 0; i < seg.n_segments; ++i) {
    if (reached[i] != seg.sizes[i]) return false;
  }
  return true;
}

bool mask_connected(const Mask& m) {
  const int h = m.height(), w = m.width();
  Plane<std::uint8_t> seen(h, w, 0);
  std::deque<std::pair<int, int>> q;
  for (int y = 0; y < h && q.empty(); ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask_set(m(y, x))) {
        q.push_back({y, x});
        seen(y, x) = 1;
        break;
      }
    }
  }
  std::int64_t n = 0;
  while (!q.empty()) {
    auto [cy, cx] = q.front();
    q.pop_front();
    ++n;
    const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int ny = cy + dy[k], nx = cx + dx[k];
      if (ny < 0 || ny >= h || nx < 0 || nx >= w || seen(ny, nx) || !mask_set(m(ny, nx))) continue;
      seen(ny, nx) = 1;
      q.push_back({ny, nx});
    }
  }
  return n == count_set(m);
}

SegmentationMap tile_map(int h, int w, int rows, int cols) {
  SegmentationMap s;
  s.labels = LabelMap(h, w);
  s.n_segments = rows * cols;
  s.sizes.assign(s.n_segments, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int id = (y * rows / h) * cols + x * cols / w;
      s.labels(y, x) = id;
      ++s.sizes[id];
    }
  }
  return s;
}

}  // namespace

TEST(Slic, UniformImageGivesEqualTiles) {
  const Image img(64, 64, 3, 0.5f);
  const SegmentationMap s = slic_segment(img, 4);
  ASSERT_EQ(s.n_segments, 4);
  for (std::int64_t n : s.sizes) {
    EXPECT_GE(n, 0.7 * 1024);
    EXPECT_LE(n, 1.3 * 1024);
  }
  EXPECT_TRUE(labels_connected(s));
}

TEST(Slic, SingleComponentCoversImage) {
  Rng rng = make_rng(1);
  const SegmentationMap s = slic_segment(flowsynth::testing::random_image(20, 30, 3, rng), 1);
  EXPECT_EQ(s.n_segments, 1);
  for (int v : s.labels.data()) EXPECT_EQ(v, 0);
}

TEST(Slic, BoundaryFollowsColorEdge) {
  Image img(40, 80, 3, 0.1f);
  for (int y = 0; y < 40; ++y) {
    for (int x = 37; x < 80; ++x) {
      img.at(y, x, 0) = 0.9f;
      img.at(y, x, 1) = 0.8f;
    }
  }
  SlicParams p;
  p.compactness = 0.01;
  const SegmentationMap s = slic_segment(img, 2, p);
  ASSERT_EQ(s.n_segments, 2);
  for (int y = 0; y < 40; ++y) {
    int change = -1;
    for (int x = 1; x < 80; ++x) {
      if (s.labels(y, x) != s.labels(y, x - 1)) change = x;
    }
    EXPECT_NEAR(change, 37, 1) << "row " << y;
  }
}

TEST(Slic, PartitionIsDenseAndConnected) {
  const Image img = procedural_texture(120, 160, 3);
  const SegmentationMap s = slic_segment(img, 100);
  std::set<int> seen(s.labels.data().begin(), s.labels.data().end());
  EXPECT_EQ(int(seen.size()), s.n_segments);
  EXPECT_EQ(*seen.begin(), 0);
  EXPECT_EQ(*seen.rbegin(), s.n_segments - 1);
  EXPECT_TRUE(labels_connected(s));
  EXPECT_GT(s.n_segments, 50);
  EXPECT_LT(s.n_segments, 200);
}

TEST(Slic, TooManyComponentsThrows) {
  EXPECT_THROW(slic_segment(Image(4, 4, 3), 17), InvalidParameter);
}

TEST(Slic, Deterministic) {
  const Image img = procedural_texture(60, 90, 4);
  EXPECT_EQ(slic_segment(img, 40).labels, slic_segment(img, 40).labels);
}

TEST(CieLab, ReferenceColors) {
  Image img(1, 3, 3);
  img.at(0, 0, 0) = img.at(0, 0, 1) = img.at(0, 0, 2) = 1.0f;  // white
  img.at(0, 1, 0) = 1.0f;                                        // sRGB red
  img.at(0, 2, 2) = 1.0f;                                        // sRGB blue
  const std::vector<float> lab = to_cielab(img);
  EXPECT_NEAR(lab[0], 100.0, 0.05);
  EXPECT_NEAR(lab[1], 0.0, 0.05);
  EXPECT_NEAR(lab[2], 0.0, 0.05);
  EXPECT_NEAR(lab[3], 53.24, 0.05);
  EXPECT_NEAR(lab[4], 80.09, 0.1);
  EXPECT_NEAR(lab[5], 67.20, 0.1);
  EXPECT_NEAR(lab[6], 32.30, 0.05);
  EXPECT_NEAR(lab[7], 79.19, 0.1);
  EXPECT_NEAR(lab[8], -107.86, 0.1);
}

TEST(Adjacency, BruteForceEdges) {
  const SegmentationMap one = tile_map(10, 10, 1, 1);
  EXPECT_EQ(build_adjacency(one).edge_count(), 0u);
  const SegmentationMap halves = tile_map(10, 10, 1, 2);
  EXPECT_EQ(build_adjacency(halves).edge_count(), 1u);
  const SegmentationMap quad = tile_map(10, 10, 2, 2);
  const RegionAdjacency adj = build_adjacency(quad);
  EXPECT_EQ(adj.edge_count(), 4u);
  EXPECT_TRUE(adj.has_edge(0, 1));
  EXPECT_TRUE(adj.has_edge(0, 2));
  EXPECT_FALSE(adj.has_edge(0, 3));
  EXPECT_FALSE(adj.has_edge(1, 2));

  const SegmentationMap s = slic_segment(procedural_texture(80, 100, 5), 60);
  std::set<std::pair<int, int>> brute;
  for (int y = 0; y < 80; ++y) {
    for (int x = 0; x < 100; ++x) {
      const int a = s.labels(y, x);
      if (x + 1 < 100 && s.labels(y, x + 1) != a) brute.insert(std::minmax(a, s.labels(y, x + 1)));
      if (y + 1 < 80 && s.labels(y + 1, x) != a) brute.insert(std::minmax(a, s.labels(y + 1, x)));
    }
  }
  const RegionAdjacency real = build_adjacency(s);
  EXPECT_EQ(real.edge_count(), brute.size());
  for (auto [a, b] : brute) {
    EXPECT_TRUE(real.has_edge(a, b));
    EXPECT_TRUE(real.has_edge(b, a));
  }
}

TEST(GrowRegion, SeedOnlyForTinyTarget) {
  const SegmentationMap s = tile_map(20, 20, 2, 2);
  Rng rng = make_rng(1);
  const Mask m = grow_region(s, build_adjacency(s), 3, 1, rng);
  EXPECT_EQ(count_set(m), 100);
  EXPECT_TRUE(mask_set(m(15, 15)));
}

TEST(GrowRegion, SeedPlusExactlyOneNeighbor) {
  const SegmentationMap s = tile_map(20, 20, 2, 2);
  Rng rng = make_rng(2);
  const Mask m = grow_region(s, build_adjacency(s), 0, 150, rng);
  EXPECT_EQ(count_set(m), 200);
  EXPECT_TRUE(mask_set(m(0, 0)));
  EXPECT_FALSE(mask_set(m(15, 15)));  // tile 3 is not a neighbor of tile 0
  EXPECT_TRUE(mask_connected(m));
}

TEST(GrowRegion, HugeTargetTakesWholeComponent) {
  const SegmentationMap s = tile_map(20, 20, 2, 2);
  Rng rng = make_rng(3);
  EXPECT_EQ(count_set(grow_region(s, build_adjacency(s), 1, 1 << 20, rng)), 400);
}

TEST(GrowRegion, InvalidSeedThrows) {
  const SegmentationMap s = tile_map(20, 20, 2, 2);
  Rng rng = make_rng(4);
  EXPECT_THROW(grow_region(s, build_adjacency(s), 4, 10, rng), InvalidParameter);
  EXPECT_THROW(grow_region(s, build_adjacency(s), -1, 10, rng), InvalidParameter);
}

TEST(GrowRegion, ConnectedAndLargeEnough) {
  const SegmentationMap s = slic_segment(procedural_texture(120, 160, 6), 200);
  const RegionAdjacency adj = build_adjacency(s);
  Rng rng = make_rng(5);
  for (int i = 0; i < 30; ++i) {
    const int seed = uniform_int(rng, 0, s.n_segments - 1);
    const std::int64_t target = uniform_int(rng, 1, 8000);
    const Mask m = grow_region(s, adj, seed, target, rng);
    EXPECT_GE(count_set(m), std::min<std::int64_t>(target, 120 * 160));
    EXPECT_TRUE(mask_connected(m));
  }
}

TEST(PickOccluder, SingleSegmentStack) {
  SegmentationStack stack;
  stack.component_counts = {1};
  stack.levels.push_back({tile_map(10, 12, 1, 1), {}});
  stack.levels[0].adjacency = build_adjacency(stack.levels[0].map);
  Rng rng = make_rng(6);
  const Occluder o = pick_occluder(stack, {6000, 50000}, rng);
  EXPECT_EQ(o.pixel_count, 120);
}

TEST(PickOccluder, DefaultStackDrawsAreReproducible) {
  const Image img = procedural_texture(200, 300, 7);
  const SegmentationStack stack = build_segmentation_stack(img, std::vector<int>{100, 1000});
  ASSERT_EQ(stack.levels.size(), 2u);
  for (int seed = 0; seed < 10; ++seed) {
    Rng a = make_rng(seed), b = make_rng(seed);
    const Occluder oa = pick_occluder(stack, {6000, 50000}, a);
    const Occluder ob = pick_occluder(stack, {6000, 50000}, b);
    EXPECT_EQ(oa.mask, ob.mask);
    EXPECT_GE(oa.target_size, 6000);
    EXPECT_LE(oa.target_size, 50000);
    EXPECT_GE(oa.pixel_count, std::min<std::int64_t>(oa.target_size, 200 * 300));
    EXPECT_TRUE(mask_connected(oa.mask));
  }
}

TEST(SegmentationCache, RoundTripAndReuse) {
  flowsynth::testing::TempDir dir("seg_cache");
  const Image img = procedural_texture(50, 70, 8);
  const SegmentationMap s = slic_segment(img, 30);
  write_segmentation_cache(s, dir / "a.slic");
  const std::string bytes = flowsynth::testing::read_bytes(dir / "a.slic");
  ASSERT_GE(bytes.size(), 20u);
  EXPECT_EQ(bytes.substr(0, 8), "SLICMAP1");
  const SegmentationMap back = read_segmentation_cache(dir / "a.slic");
  EXPECT_EQ(back.labels, s.labels);
  EXPECT_EQ(back.n_segments, s.n_segments);
  EXPECT_EQ(back.sizes, s.sizes);

  const std::vector<int> counts{10, 40};
  const SegmentationStack first = build_segmentation_stack(img, counts, {}, dir.path());
  const SegmentationStack second = build_segmentation_stack(img, counts, {}, dir.path());
  for (int k = 0; k < 2; ++k) EXPECT_EQ(first.levels[k].map.labels, second.levels[k].map.labels);
}

TEST(SegmentationCache, CorruptFileIsFormatError) {
  flowsynth::testing::TempDir dir("seg_bad");
  {
    std::ofstream(dir / "bad.slic", std::ios::binary) << "SLICMAP1garbage";
  }
  EXPECT_THROW(read_segmentation_cache(dir / "bad.slic"), FormatError);
}
