#include "flowsynth/segmentation.hpp"

#include <zlib.h>

#include "fs_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace flowsynth {

namespace {

float srgb_to_linear(float c) {
  return c <= 0.04045f ? c / 12.92f : std::pow((c + 0.055f) / 1.055f, 2.4f);
}

float lab_f(float t) {
  constexpr float delta = 6.0f / 29.0f;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0f * delta * delta) + 4.0f / 29.0f;
}

// Disjoint-set forest over component ids.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
};

// Splits labels into 4-connected components, merges components smaller than
// min_size into the neighbor with the longest shared boundary, and relabels
// densely in scan order.
SegmentationMap enforce_connectivity(const LabelMap& raw, std::int64_t min_size) {
  const int h = raw.height(), w = raw.width();
  LabelMap comp(h, w, -1);
  std::vector<std::int64_t> comp_size;
  std::vector<int> queue;
  queue.reserve(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (comp(y, x) >= 0) continue;
      const int id = static_cast<int>(comp_size.size());
      const std::int32_t label = raw(y, x);
      queue.clear();
      queue.push_back(y * w + x);
      comp(y, x) = id;
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const int py = queue[head] / w, px = queue[head] % w;
        const int nbr[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
        for (const auto& n : nbr) {
          if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
          if (comp(n[1], n[0]) >= 0 || raw(n[1], n[0]) != label) continue;
          comp(n[1], n[0]) = id;
          queue.push_back(n[1] * w + n[0]);
        }
      }
      comp_size.push_back(static_cast<std::int64_t>(queue.size()));
    }
  }

  const int n_comp = static_cast<int>(comp_size.size());
  // Shared boundary lengths between components.
  std::vector<std::uint64_t> pairs;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int a = comp(y, x);
      if (x + 1 < w && comp(y, x + 1) != a) {
        const int b = comp(y, x + 1);
        pairs.push_back((std::uint64_t(std::min(a, b)) << 32) | std::uint32_t(std::max(a, b)));
      }
      if (y + 1 < h && comp(y + 1, x) != a) {
        const int b = comp(y + 1, x);
        pairs.push_back((std::uint64_t(std::min(a, b)) << 32) | std::uint32_t(std::max(a, b)));
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::vector<std::pair<int, int>>> boundary(n_comp);
  for (std::size_t i = 0; i < pairs.size();) {
    std::size_t j = i;
    while (j < pairs.size() && pairs[j] == pairs[i]) ++j;
    const int a = int(pairs[i] >> 32), b = int(pairs[i] & 0xffffffffu), len = int(j - i);
    boundary[a].push_back({b, len});
    boundary[b].push_back({a, len});
    i = j;
  }

  UnionFind uf(n_comp);
  std::vector<std::int64_t> root_size = comp_size;
  for (int c = 0; c < n_comp; ++c) {
    const int rc = uf.find(c);
    if (root_size[rc] >= min_size) continue;
    // Only c's own boundary is considered, not that of members merged into it.
    std::vector<std::pair<int, int>> by_root;
    for (auto [nb, len] : boundary[c]) {
      const int r = uf.find(nb);
      if (r != rc) by_root.push_back({r, len});
    }
    if (by_root.empty()) continue;
    std::sort(by_root.begin(), by_root.end());
    int best = -1, best_len = -1;
    for (std::size_t i = 0; i < by_root.size();) {
      std::size_t j = i;
      int total = 0;
      while (j < by_root.size() && by_root[j].first == by_root[i].first) total += by_root[j++].second;
      if (total > best_len) {
        best_len = total;
        best = by_root[i].first;
      }
      i = j;
    }
    uf.parent[rc] = best;
    root_size[best] += root_size[rc];
  }

  SegmentationMap seg;
  seg.labels = LabelMap(h, w);
  std::vector<int> dense(n_comp, -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int r = uf.find(comp(y, x));
      if (dense[r] < 0) {
        dense[r] = seg.n_segments++;
        seg.sizes.push_back(0);
      }
      seg.labels(y, x) = dense[r];
      ++seg.sizes[dense[r]];
    }
  }
  return seg;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

constexpr char kCacheMagic[8] = {'S', 'L', 'I', 'C', 'M', 'A', 'P', '1'};

}  // namespace

std::vector<float> to_cielab(const Image& img) {
  std::vector<float> lab(img.pixel_count() * 3);
  constexpr float xn = 0.95047f, yn = 1.0f, zn = 1.08883f;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const float* p = img.data().data() + i * img.channels();
    float r, g, b;
    if (img.channels() == 3) {
      r = srgb_to_linear(p[0]);
      g = srgb_to_linear(p[1]);
      b = srgb_to_linear(p[2]);
    } else {
      r = g = b = srgb_to_linear(p[0]);
    }
    const float fx = lab_f((0.4124564f * r + 0.3575761f * g + 0.1804375f * b) / xn);
    const float fy = lab_f((0.2126729f * r + 0.7151522f * g + 0.0721750f * b) / yn);
    const float fz = lab_f((0.0193339f * r + 0.1191920f * g + 0.9503041f * b) / zn);
    lab[3 * i] = 116.0f * fy - 16.0f;
    lab[3 * i + 1] = img.channels() == 3 ? 500.0f * (fx - fy) : 0.0f;
    lab[3 * i + 2] = img.channels() == 3 ? 200.0f * (fy - fz) : 0.0f;
  }
  return lab;
}

SegmentationMap slic_segment(const Image& img, int n_components, double compactness,
                             int iterations) {
  SlicParams params;
  params.compactness = compactness;
  params.iterations = iterations;
  return slic_segment(img, n_components, params);
}

SegmentationMap slic_segment(const Image& img, int n_components, const SlicParams& params) {
  if (img.empty()) throw InvalidDimension("slic_segment: empty image");
  const int h = img.height(), w = img.width();
  const std::int64_t n_pixels = std::int64_t{h} * w;
  if (n_components < 1 || n_components > n_pixels) {
    throw InvalidParameter("slic_segment: n_components must be in [1, " +
                           std::to_string(n_pixels) + "], got " + std::to_string(n_components));
  }
  if (!(params.compactness > 0.0)) throw InvalidParameter("slic_segment: compactness must be > 0");
  if (params.iterations < 1) throw InvalidParameter("slic_segment: iterations must be >= 1");

  const std::vector<float> lab = to_cielab(img);
  const double step = std::sqrt(double(n_pixels) / n_components);
  const int nx = std::clamp(int(std::lround(w / step)), 1, w);
  const int ny = std::clamp(int(std::lround(h / step)), 1, h);

  struct Center {
    double l, a, b, x, y;
  };
  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  auto gradient = [&](int x, int y) {
    if (x < 1 || y < 1 || x + 1 >= w || y + 1 >= h) return std::numeric_limits<double>::max();
    double g = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double dx = lab[3 * (y * w + x + 1) + c] - lab[3 * (y * w + x - 1) + c];
      const double dy = lab[3 * ((y + 1) * w + x) + c] - lab[3 * ((y - 1) * w + x) + c];
      g += dx * dx + dy * dy;
    }
    return g;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int cx = std::clamp(int((i + 0.5) * w / nx), 0, w - 1);
      int cy = std::clamp(int((j + 0.5) * h / ny), 0, h - 1);
      // Seed at the lowest-gradient position of the 3x3 neighborhood.
      double best = gradient(cx, cy);
      int bx = cx, by = cy;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double g = gradient(cx + dx, cy + dy);
          if (g < best) {
            best = g;
            bx = cx + dx;
            by = cy + dy;
          }
        }
      }
      const float* p = &lab[3 * (std::size_t(by) * w + bx)];
      centers.push_back({p[0], p[1], p[2], double(bx), double(by)});
    }
  }

  const double spatial = (params.compactness / step) * (params.compactness / step);
  const int window = static_cast<int>(std::ceil(step));
  LabelMap labels(h, w, -1);
  std::vector<float> dist(static_cast<std::size_t>(n_pixels));
  std::vector<double> acc;
  for (int it = 0; it < params.iterations; ++it) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<float>::max());
    for (int k = 0; k < int(centers.size()); ++k) {
      const Center& c = centers[k];
      const int x0 = std::max(0, int(c.x) - window), x1 = std::min(w - 1, int(c.x) + window);
      const int y0 = std::max(0, int(c.y) - window), y1 = std::min(h - 1, int(c.y) + window);
      for (int y = y0; y <= y1; ++y) {
        const double dy2 = (y - c.y) * (y - c.y);
        const float* row = &lab[3 * std::size_t(y) * w];
        float* drow = &dist[std::size_t(y) * w];
        auto lrow = labels.row(y);
        for (int x = x0; x <= x1; ++x) {
          const float dl = row[3 * x] - float(c.l);
          const float da = row[3 * x + 1] - float(c.a);
          const float db = row[3 * x + 2] - float(c.b);
          const double dx = x - c.x;
          const float d = dl * dl + da * da + db * db + float(spatial * (dx * dx + dy2));
          if (d < drow[x]) {
            drow[x] = d;
            lrow[x] = k;
          }
        }
      }
    }
    acc.assign(centers.size() * 6, 0.0);
    for (int y = 0; y < h; ++y) {
      auto lrow = labels.row(y);
      for (int x = 0; x < w; ++x) {
        const int k = lrow[x];
        if (k < 0) continue;
        const float* p = &lab[3 * (std::size_t(y) * w + x)];
        double* a = &acc[6 * std::size_t(k)];
        a[0] += p[0];
        a[1] += p[1];
        a[2] += p[2];
        a[3] += x;
        a[4] += y;
        a[5] += 1.0;
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double* a = &acc[6 * k];
      if (a[5] == 0.0) continue;
      centers[k] = {a[0] / a[5], a[1] / a[5], a[2] / a[5], a[3] / a[5], a[4] / a[5]};
    }
  }

  const auto min_size = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(params.min_fragment_fraction * step * step));
  return enforce_connectivity(labels, min_size);
}

std::size_t RegionAdjacency::edge_count() const {
  std::size_t n = 0;
  for (const auto& nb : neighbors) n += nb.size();
  return n / 2;
}

bool RegionAdjacency::has_edge(int a, int b) const {
  if (a < 0 || a >= n_segments) return false;
  return std::binary_search(neighbors[a].begin(), neighbors[a].end(), b);
}

RegionAdjacency build_adjacency(const SegmentationMap& seg) {
  RegionAdjacency adj;
  adj.n_segments = seg.n_segments;
  adj.neighbors.resize(seg.n_segments);
  const auto& l = seg.labels;
  for (int y = 0; y < l.height(); ++y) {
    for (int x = 0; x < l.width(); ++x) {
      const int a = l(y, x);
      if (x + 1 < l.width() && l(y, x + 1) != a) {
        adj.neighbors[a].push_back(l(y, x + 1));
        adj.neighbors[l(y, x + 1)].push_back(a);
      }
      if (y + 1 < l.height() && l(y + 1, x) != a) {
        adj.neighbors[a].push_back(l(y + 1, x));
        adj.neighbors[l(y + 1, x)].push_back(a);
      }
    }
  }
  for (auto& nb : adj.neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return adj;
}

Mask grow_region(const SegmentationMap& seg, const RegionAdjacency& adj, int seed,
                 std::int64_t target_size, Rng& rng) {
  if (seed < 0 || seed >= seg.n_segments) {
    throw InvalidParameter("grow_region: invalid seed superpixel " + std::to_string(seed));
  }
  if (target_size < 1) throw InvalidParameter("grow_region: target size must be >= 1");
  std::vector<char> chosen(seg.n_segments, 0), queued(seg.n_segments, 0);
  std::deque<int> frontier{seed};
  queued[seed] = 1;
  std::int64_t total = 0;
  std::vector<int> fresh;
  while (!frontier.empty() && total < target_size) {
    const int s = frontier.front();
    frontier.pop_front();
    chosen[s] = 1;
    total += seg.sizes[s];
    fresh.clear();
    for (int nb : adj.neighbors[s]) {
      if (!queued[nb]) {
        queued[nb] = 1;
        fresh.push_back(nb);
      }
    }
    std::shuffle(fresh.begin(), fresh.end(), rng);
    frontier.insert(frontier.end(), fresh.begin(), fresh.end());
  }
  Mask mask(seg.labels.height(), seg.labels.width());
  auto labels = seg.labels.data();
  auto alpha = mask.data();
  for (std::size_t i = 0; i < labels.size(); ++i) alpha[i] = chosen[labels[i]] ? 1.0f : 0.0f;
  return mask;
}

Occluder pick_occluder(const SegmentationStack& stack, SizeRange size_range, Rng& rng) {
  if (stack.levels.empty()) throw InvalidParameter("pick_occluder: empty segmentation stack");
  if (size_range.min < 1 || size_range.max < size_range.min) {
    throw InvalidParameter("pick_occluder: invalid size range");
  }
  Occluder occ;
  occ.granularity = uniform_int(rng, 0, int(stack.levels.size()) - 1);
  occ.target_size = uniform_int64(rng, size_range.min, size_range.max);
  const SegmentationLevel& level = stack.levels[occ.granularity];
  occ.seed_segment = uniform_int(rng, 0, level.map.n_segments - 1);
  occ.mask = grow_region(level.map, level.adjacency, occ.seed_segment, occ.target_size, rng);
  occ.pixel_count = count_set(occ.mask);
  return occ;
}

std::uint64_t image_content_hash(const Image& img) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto feed = [&hash](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= p[i];
      hash *= 0x100000001b3ULL;
    }
  };
  const std::int32_t dims[3] = {img.height(), img.width(), img.channels()};
  feed(dims, sizeof(dims));
  feed(img.data().data(), img.data().size_bytes());
  return hash;
}

void write_segmentation_cache(const SegmentationMap& seg, const std::filesystem::path& path) {
  std::string raw;
  raw.reserve(seg.labels.size() * 4);
  for (std::int32_t v : seg.labels.data()) put_u32(raw, static_cast<std::uint32_t>(v));
  uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_len,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                Z_BEST_SPEED) != Z_OK) {
    throw IoError("zlib compression failed for " + path.string());
  }
  packed.resize(packed_len);

  std::string header(kCacheMagic, sizeof(kCacheMagic));
  put_u32(header, static_cast<std::uint32_t>(seg.labels.height()));
  put_u32(header, static_cast<std::uint32_t>(seg.labels.width()));
  put_u32(header, static_cast<std::uint32_t>(seg.n_segments));

  detail::write_file_atomic(path, header + packed);
}

SegmentationMap read_segmentation_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCacheMagic, 8) != 0) {
    throw FormatError("not a segmentation cache file: " + path.string());
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const int h = int(get_u32(p + 8)), w = int(get_u32(p + 12)), n = int(get_u32(p + 16));
  if (h < 1 || w < 1 || n < 1) throw FormatError("bad segmentation cache header: " + path.string());
  std::string raw(std::size_t(h) * w * 4, '\0');
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(reinterpret_cast<Bytef*>(raw.data()), &raw_len, p + 20,
                 static_cast<uLong>(bytes.size() - 20)) != Z_OK ||
      raw_len != raw.size()) {
    throw FormatError("corrupt segmentation cache payload: " + path.string());
  }
  SegmentationMap seg;
  seg.labels = LabelMap(h, w);
  seg.n_segments = n;
  seg.sizes.assign(n, 0);
  auto labels = seg.labels.data();
  const auto* rp = reinterpret_cast<const unsigned char*>(raw.data());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = static_cast<std::int32_t>(get_u32(rp + 4 * i));
    if (v < 0 || v >= n) throw FormatError("label out of range in " + path.string());
    labels[i] = v;
    ++seg.sizes[v];
  }
  return seg;
}

SegmentationStack build_segmentation_stack(const Image& img, std::span<const int> counts,
                                           const SlicParams& params,
                                           const std::filesystem::path& cache_dir) {
  if (counts.empty()) throw InvalidParameter("segmentation stack needs at least one level");
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] <= counts[i - 1]) {
      throw InvalidParameter("segmentation component counts must be strictly increasing");
    }
  }
  SegmentationStack stack;
  stack.component_counts.assign(counts.begin(), counts.end());
  const std::uint64_t key = image_content_hash(img);
  for (int count : counts) {
    SegmentationLevel level;
    std::filesystem::path file;
    if (!cache_dir.empty()) {
      std::ostringstream name;
      name << std::hex << key << std::dec << "_n" << count << "_c" << params.compactness << "_i"
           << params.iterations << "_f" << params.min_fragment_fraction << ".slic";
      file = cache_dir / name.str();
    }
    bool loaded = false;
    if (!file.empty() && std::filesystem::exists(file)) {
      try {
        level.map = read_segmentation_cache(file);
        loaded = level.map.labels.same_shape(img.height(), img.width());
      } catch (const FormatError&) {
        loaded = false;
      }
    }
    if (!loaded) {
      level.map = slic_segment(img, count, params);
      if (!file.empty()) {
        std::filesystem::create_directories(cache_dir);
        write_segmentation_cache(level.map, file);
      }
    }
    level.adjacency = build_adjacency(level.map);
    stack.levels.push_back(std::move(level));
  }
  return stack;
}

}  // namespace flowsynth
