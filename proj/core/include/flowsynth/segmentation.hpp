#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flowsynth/image.hpp"
#include "flowsynth/random.hpp"

namespace flowsynth {

/// Superpixel labels at one granularity. Labels are dense in [0, n_segments)
/// and every segment is 4-connected.
struct SegmentationMap {
  LabelMap labels;
  int n_segments = 0;
  std::vector<std::int64_t> sizes;  ///< pixel count per segment
};

struct SlicParams {
  double compactness = 10.0;
  int iterations = 10;
  /// Fragments smaller than this fraction of s^2 (s = grid step) are merged
  /// into their dominant neighbor during connectivity enforcement.
  double min_fragment_fraction = 0.25;
};

/// SLIC superpixels: k-means in (CIELAB, x, y) with grid-seeded centers and
/// a 2s x 2s search window, followed by connectivity enforcement. The
/// resulting segment count can differ from `n_components`.
SegmentationMap slic_segment(const Image& img, int n_components, const SlicParams& params = {});
SegmentationMap slic_segment(const Image& img, int n_components, double compactness,
                             int iterations);

/// Converts normalized sRGB (or gray) intensities to CIELAB, 3 floats per
/// pixel. Gray images map to (L, 0, 0).
std::vector<float> to_cielab(const Image& img);

struct RegionAdjacency {
  int n_segments = 0;
  /// Sorted neighbor ids per segment.
  std::vector<std::vector<int>> neighbors;

  std::size_t edge_count() const;
  bool has_edge(int a, int b) const;
};

RegionAdjacency build_adjacency(const SegmentationMap& seg);

/// Breadth-first accretion of whole superpixels from `seed` until the union
/// holds at least `target_size` pixels or the seed's component is exhausted.
/// Newly discovered neighbors are shuffled before they are queued.
Mask grow_region(const SegmentationMap& seg, const RegionAdjacency& adj, int seed,
                 std::int64_t target_size, Rng& rng);

struct SegmentationLevel {
  SegmentationMap map;
  RegionAdjacency adjacency;
};

/// Coarse-to-fine family of segmentations of one image.
struct SegmentationStack {
  std::vector<int> component_counts;
  std::vector<SegmentationLevel> levels;
};

/// Segments `img` once per entry of `counts` (strictly increasing). When
/// `cache_dir` is non-empty, label maps are read from / written to it keyed by
/// image content and parameters.
SegmentationStack build_segmentation_stack(const Image& img, std::span<const int> counts,
                                           const SlicParams& params = {},
                                           const std::filesystem::path& cache_dir = {});

/// Inclusive pixel-count interval.
struct SizeRange {
  std::int64_t min = 0;
  std::int64_t max = 0;
};

struct Occluder {
  Mask mask;
  int granularity = 0;          ///< index into the stack
  std::int64_t target_size = 0; ///< drawn growth threshold
  int seed_segment = 0;
  std::int64_t pixel_count = 0;
};

/// Draws a granularity, a target size and a seed superpixel uniformly, then
/// grows the region.
Occluder pick_occluder(const SegmentationStack& stack, SizeRange size_range, Rng& rng);

// Label-map cache files: "SLICMAP1", then height, width, n_segments as
// little-endian int32, then zlib-compressed little-endian int32 labels.
void write_segmentation_cache(const SegmentationMap& seg, const std::filesystem::path& path);
SegmentationMap read_segmentation_cache(const std::filesystem::path& path);

/// FNV-1a over dimensions and pixel data.
std::uint64_t image_content_hash(const Image& img);

}  // namespace flowsynth
