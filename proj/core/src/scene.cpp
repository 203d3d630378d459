#include "flowsynth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace flowsynth {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidParameter("synthesis config: " + what);
}

// Layer textures are only ever looked at inside the frame, shifted by the
// placement, plus whatever the frame-0 warp pulls from the frame-1 texture.
// The margin keeps that second lookup from running off the edge of what was
// rendered in all but extreme warps.
constexpr int kLayerDomainMargin = 128;

Rect layer_domain(int height, int width, Offset placement) {
  const Rect frame{0, 0, width, height};
  return frame.translated({-placement.x, -placement.y}).unite(frame).inflated(kLayerDomainMargin);
}

// Premultiplied texture and matte sampled from windowed sources.
struct WarpedWindow {
  Rect box;
  Image texture;
  Mask matte;
  CoordGrid grid;
};

// Rectangles (in the coordinates of `box`'s frame) covering every non-zero
// pixel of a windowed matte, built from horizontal runs of occupied cells.
std::vector<Rect> occupied_runs(const Mask& matte, const Rect& box, int cell) {
  std::vector<Rect> runs;
  const int w = matte.width();
  const int ncx = (w + cell - 1) / cell;
  for (int cy = 0; cy < matte.height(); cy += cell) {
    const int cy1 = std::min(cy + cell, matte.height());
    int start = -1;
    for (int i = 0; i <= ncx; ++i) {
      bool occupied = false;
      for (int y = cy; i < ncx && y < cy1 && !occupied; ++y) {
        auto row = matte.row(y).subspan(i * cell, std::min(cell, w - i * cell));
        occupied = std::any_of(row.begin(), row.end(), [](float a) { return a > 0.0f; });
      }
      if (occupied && start < 0) start = i;
      if (!occupied && start >= 0) {
        runs.push_back(Rect{start * cell, cy, std::min(i * cell, w), cy1}.translated({box.x0, box.y0}));
        start = -1;
      }
    }
  }
  return runs;
}

WarpedWindow warp_window(const TpsWarp& warp, const Rect& domain, const Image& texture,
                         const Mask& matte, const Rect& src_box) {
  WarpedWindow out;
  const std::vector<Rect> targets = occupied_runs(matte, src_box, 16);
  const TileCover cover = preimage_tiles(warp, domain, targets);
  if (cover.tiles.empty()) return out;
  out.box = cover.bounds;
  out.grid = evaluate_warp_tiles(warp, cover);
  sample_layer(texture, matte, out.grid, {src_box.x0, src_box.y0}, out.texture, out.matte);
  return out;
}

// Shrinks a window to the support of its matte.
void trim_window(WarpedWindow& w) {
  if (w.matte.empty()) return;
  const Rect s = support_box(w.matte);
  if (s.empty()) {
    w = WarpedWindow{};
    return;
  }
  if (s == w.matte.bounds()) return;
  if (!w.texture.empty()) w.texture = crop_image(w.texture, s);
  w.matte = crop_plane(w.matte, s);
  w.grid = crop_plane(w.grid, s);
  w.box = s.translated({w.box.x0, w.box.y0});
}

// over operator with a premultiplied foreground window placed at `box`.
void composite_window(Image& frame, const Image& tex, const Mask& matte, const Rect& box,
                      Mask& shadow) {
  const Rect clip = box.intersect(frame.bounds());
  const int nc = frame.channels();
  for (int y = clip.y0; y < clip.y1; ++y) {
    for (int x = clip.x0; x < clip.x1; ++x) {
      const float a = matte(y - box.y0, x - box.x0);
      if (a <= 0.0f) continue;
      const float* f = tex.pixel(y - box.y0, x - box.x0);
      float* o = frame.pixel(y, x);
      for (int c = 0; c < nc; ++c) o[c] = f[c] + (1.0f - a) * o[c];
      shadow(y, x) *= 1.0f - a;
    }
  }
}

void darken_window(Image& frame, const Mask& matte, const Rect& box, float opacity, Mask& shadow) {
  const Rect clip = box.intersect(frame.bounds());
  const int nc = frame.channels();
  for (int y = clip.y0; y < clip.y1; ++y) {
    for (int x = clip.x0; x < clip.x1; ++x) {
      const float a = opacity * matte(y - box.y0, x - box.x0);
      if (a <= 0.0f) continue;
      float* o = frame.pixel(y, x);
      for (int c = 0; c < nc; ++c) o[c] *= 1.0f - a;
      float& s = shadow(y, x);
      s = 1.0f - (1.0f - s) * (1.0f - a);
    }
  }
}

void stamp_labels(LabelMap& labels, const Mask& matte, const Rect& box, int label) {
  const Rect clip = box.intersect(labels.bounds());
  for (int y = clip.y0; y < clip.y1; ++y) {
    for (int x = clip.x0; x < clip.x1; ++x) {
      if (mask_set(matte(y - box.y0, x - box.x0))) labels(y, x) = label;
    }
  }
}

TpsWarp draw_warp(int height, int width, int grid_size, const SynthesisConfig& config, Rng& rng) {
  return fit_tps(sample_control_grid(height, width, grid_size, config.control_noise_sigma, rng,
                                     config.control_noise),
                 config.tps_regularization);
}

}  // namespace

void SynthesisConfig::validate() const {
  require(n_layers.min >= 0 && n_layers.max >= n_layers.min, "n_layers range is empty");
  require(occluder_size.min >= 1 && occluder_size.max >= occluder_size.min,
          "occluder_size range is empty");
  require(tps_grid.min >= 2 && tps_grid.max >= tps_grid.min, "tps_grid range must be within [2, inf)");
  require(std::isfinite(control_noise_sigma) && control_noise_sigma >= 0.0,
          "control_noise_sigma must be finite and non-negative");
  require(std::isfinite(global_shift_sigma) && global_shift_sigma >= 0.0,
          "global_shift_sigma must be finite and non-negative");
  require(shadow_prob >= 0.0 && shadow_prob <= 1.0, "shadow_prob must lie in [0, 1]");
  require(shadow_opacity.min >= 0.0 && shadow_opacity.max <= 1.0 &&
              shadow_opacity.min <= shadow_opacity.max,
          "shadow_opacity must be a non-empty range within [0, 1]");
  require(!component_counts.empty(), "component_counts is empty");
  for (std::size_t i = 0; i < component_counts.size(); ++i) {
    require(component_counts[i] >= 1, "component_counts must be positive");
    require(i == 0 || component_counts[i] > component_counts[i - 1],
            "component_counts must be strictly increasing");
  }
  require(std::isfinite(tps_regularization) && tps_regularization >= 0.0,
          "tps_regularization must be finite and non-negative");
  require(max_redraws >= 1, "max_redraws must be at least 1");
}

Image inpaint_with_auxiliary(const Image& base, const Mask& hole, const Image& aux) {
  if (!base.same_shape(aux) || !hole.same_shape(base.height(), base.width())) {
    throw InvalidDimension("inpaint_with_auxiliary: base, hole and aux must share dimensions");
  }
  Image out = base;
  const int nc = base.channels();
  for (int y = 0; y < base.height(); ++y) {
    for (int x = 0; x < base.width(); ++x) {
      const float m = hole(y, x);
      if (m <= 0.0f) continue;
      float* o = out.pixel(y, x);
      const float* a = aux.pixel(y, x);
      for (int c = 0; c < nc; ++c) o[c] = (1.0f - m) * o[c] + m * a[c];
    }
  }
  return out;
}

BackgroundPair synthesize_background(const Image& inpainted, const BackgroundSpec& spec) {
  if (!std::isfinite(spec.shift.x) || !std::isfinite(spec.shift.y)) {
    throw InvalidParameter("synthesize_background: shift must be finite");
  }
  const Rect frame = inpainted.bounds();
  BackgroundPair out;
  out.frame1 = bilinear_sample(inpainted, evaluate_warp_box(spec.warp1, frame));
  const CoordGrid grid0 = evaluate_warp_box(spec.warp0, frame, spec.shift);
  out.frame0 = bilinear_sample(out.frame1, grid0);
  out.flow = FlowField(frame.height(), frame.width());
  for (int y = 0; y < frame.height(); ++y) {
    auto g = grid0.row(y);
    auto f = out.flow.row(y);
    for (int x = 0; x < frame.width(); ++x) {
      f[x] = {static_cast<float>(g[x].x - x), static_cast<float>(g[x].y - y)};
    }
  }
  return out;
}

ForegroundLayer synthesize_foreground(const Image& source, const LayerSpec& layer) {
  const int h = source.height(), w = source.width();
  if (!layer.mask.same_shape(h, w)) {
    throw InvalidDimension("synthesize_foreground: mask does not match the source image");
  }
  const Rect support = support_box(layer.mask);
  // F = M * I, windowed to the mask support. Shadow layers are untextured.
  Mask matte = crop_plane(layer.mask, support);
  if (count_set(matte) == 0) throw DegenerateLayer("synthesize_foreground: empty layer mask");
  Image texture;
  if (layer.kind == LayerKind::kOpaque) {
    texture = crop_image(source, support);
    const int nc = texture.channels();
    for (int y = 0; y < support.height(); ++y) {
      for (int x = 0; x < support.width(); ++x) {
        float* p = texture.pixel(y, x);
        for (int c = 0; c < nc; ++c) p[c] *= matte(y, x);
      }
    }
  }

  ForegroundLayer out;
  WarpedWindow w1 = warp_window(layer.warp1, layer_domain(h, w, layer.p1), texture, matte, support);
  trim_window(w1);
  if (w1.matte.empty()) return out;
  out.box1 = w1.box;
  out.texture1 = std::move(w1.texture);
  out.matte1 = std::move(w1.matte);

  WarpedWindow w0 =
      warp_window(layer.warp0, layer_domain(h, w, layer.p0), out.texture1, out.matte1, out.box1);
  trim_window(w0);
  if (w0.matte.empty()) return out;
  out.box0 = w0.box;
  out.texture0 = std::move(w0.texture);
  out.matte0 = std::move(w0.matte);
  out.flow = FlowField(out.box0.height(), out.box0.width());
  for (int y = 0; y < out.box0.height(); ++y) {
    auto g = w0.grid.row(y);
    auto m = out.matte0.row(y);
    auto f = out.flow.row(y);
    for (int x = 0; x < out.box0.width(); ++x) {
      if (m[x] <= 0.0f) continue;
      f[x] = {static_cast<float>(g[x].x - (out.box0.x0 + x)),
              static_cast<float>(g[x].y - (out.box0.y0 + y))};
    }
  }
  return out;
}

SceneSample composite_scene(const BackgroundPair& bg, std::span<const LayerSpec> specs,
                            std::span<const ForegroundLayer> layers, LayerFlow layer_flow) {
  if (specs.size() != layers.size()) {
    throw InvalidParameter("composite_scene: layer specs and layer rasters differ in count");
  }
  if (!bg.frame0.same_shape(bg.frame1) ||
      !bg.flow.same_shape(bg.frame0.height(), bg.frame0.width())) {
    throw InvalidDimension("composite_scene: background frames and flow must share dimensions");
  }
  for (std::size_t i = 1; i < specs.size(); ++i) {
    if (specs[i].depth_rank < specs[i - 1].depth_rank) {
      throw InvalidParameter("composite_scene: layers must be sorted by ascending depth_rank");
    }
  }
  const int h = bg.frame0.height(), w = bg.frame0.width();

  SceneSample out;
  out.frame0 = bg.frame0;
  out.frame1 = bg.frame1;
  out.flow = bg.flow;
  LabelMap label0(h, w, 0), label1(h, w, 0);
  Mask shadow0(h, w, 0.0f), shadow1(h, w, 0.0f);

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& spec = specs[i];
    const ForegroundLayer& layer = layers[i];
    const Rect box0 = layer.box0.translated(spec.p0);
    const Rect box1 = layer.box1.translated(spec.p1);
    if (spec.kind == LayerKind::kShadow) {
      const auto alpha = static_cast<float>(spec.shadow_opacity);
      if (!layer.matte0.empty()) darken_window(out.frame0, layer.matte0, box0, alpha, shadow0);
      if (!layer.matte1.empty()) darken_window(out.frame1, layer.matte1, box1, alpha, shadow1);
      continue;
    }
    const int label = static_cast<int>(i) + 1;
    if (!layer.matte1.empty()) {
      composite_window(out.frame1, layer.texture1, layer.matte1, box1, shadow1);
      stamp_labels(label1, layer.matte1, box1, label);
    }
    if (layer.matte0.empty()) continue;
    composite_window(out.frame0, layer.texture0, layer.matte0, box0, shadow0);
    stamp_labels(label0, layer.matte0, box0, label);
    const Offset d = layer_flow == LayerFlow::kWithPlacementShift ? spec.delta() : Offset{};
    const Rect clip = box0.intersect(out.flow.bounds());
    for (int y = clip.y0; y < clip.y1; ++y) {
      for (int x = clip.x0; x < clip.x1; ++x) {
        if (!mask_set(layer.matte0(y - box0.y0, x - box0.x0))) continue;
        const FlowVec f = layer.flow(y - box0.y0, x - box0.x0);
        out.flow(y, x) = {f.u + static_cast<float>(d.x), f.v + static_cast<float>(d.y)};
      }
    }
  }

  // Occlusion from frame-1 labels at the rounded target; shadow coverage from
  // the frame-0 matte and the bilinear footprint of the target in frame 1.
  out.occlusion = Mask(h, w, 0.0f);
  out.shadow_region = Mask(h, w, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const FlowVec f = out.flow(y, x);
      const double tx = x + double(f.u), ty = y + double(f.v);
      if (shadow0(y, x) > 0.0f) out.shadow_region(y, x) = 1.0f;
      if (tx > -1.0 && tx < w && ty > -1.0 && ty < h) {
        // tx, ty > -1, so truncating the shifted value is floor().
        int x0 = static_cast<int>(tx + 1.0) - 1, y0 = static_cast<int>(ty + 1.0) - 1;
        x0 -= x0 > tx;
        y0 -= y0 > ty;
        const bool fx = tx > x0, fy = ty > y0;  // taps with zero weight are skipped
        for (int yy = y0; yy <= y0 + fy; ++yy) {
          for (int xx = x0; xx <= x0 + fx; ++xx) {
            if (xx >= 0 && xx < w && yy >= 0 && yy < h && shadow1(yy, xx) > 0.0f) {
              out.shadow_region(y, x) = 1.0f;
            }
          }
        }
      }
      bool occluded = !(tx >= 0.0 && tx <= w - 1 && ty >= 0.0 && ty <= h - 1);
      if (!occluded) {
        // Non-negative here, so truncation rounds half up.
        const int rx = static_cast<int>(tx + 0.5);
        const int ry = static_cast<int>(ty + 0.5);
        occluded = label1(ry, rx) != label0(y, x);
      }
      if (occluded) out.occlusion(y, x) = 1.0f;
    }
  }
  return out;
}

int draw_layer_count(const SynthesisConfig& config, Rng& rng) {
  return uniform_int(rng, config.n_layers.min, config.n_layers.max);
}

BackgroundDraw draw_background(const SynthesisConfig& config, Rng& rng) {
  BackgroundDraw d;
  d.grid_size1 = uniform_int(rng, config.tps_grid.min, config.tps_grid.max);
  d.grid_size0 = uniform_int(rng, config.tps_grid.min, config.tps_grid.max);
  d.shift.x = normal(rng, 0.0, config.global_shift_sigma);
  d.shift.y = normal(rng, 0.0, config.global_shift_sigma);
  return d;
}

LayerDraw draw_layer(const SynthesisConfig& config, Rng& rng) {
  LayerDraw d;
  if (bernoulli(rng, config.shadow_prob)) {
    d.kind = LayerKind::kShadow;
    d.shadow_opacity = uniform_real(rng, config.shadow_opacity.min, config.shadow_opacity.max);
  }
  d.grid_size1 = uniform_int(rng, config.tps_grid.min, config.tps_grid.max);
  d.grid_size0 = uniform_int(rng, config.tps_grid.min, config.tps_grid.max);
  d.raw_delta.x = normal(rng, 0.0, config.global_shift_sigma);
  d.raw_delta.y = normal(rng, 0.0, config.global_shift_sigma);
  d.delta = {static_cast<int>(std::lround(d.raw_delta.x)),
             static_cast<int>(std::lround(d.raw_delta.y))};
  return d;
}

SceneSample generate_sample(const Image& source, const Image& aux, const SegmentationStack& stack,
                            const SynthesisConfig& config, std::uint64_t seed) {
  config.validate();
  if (!source.same_shape(aux)) {
    throw InvalidDimension("generate_sample: source and auxiliary images must share dimensions");
  }
  for (const SegmentationLevel& level : stack.levels) {
    if (!level.map.labels.same_shape(source.height(), source.width())) {
      throw InvalidDimension("generate_sample: segmentation does not match the source image");
    }
  }
  const int h = source.height(), w = source.width();
  const std::int64_t frame_pixels = std::int64_t{h} * w;
  Rng rng = make_rng(seed);

  const int n_layers = draw_layer_count(config, rng);
  std::vector<Occluder> occluders;
  occluders.reserve(n_layers);
  for (int i = 0; i < n_layers; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == config.max_redraws) {
        throw DegenerateLayer("generate_sample: no usable occluder after " +
                              std::to_string(config.max_redraws) + " draws");
      }
      Occluder occ = pick_occluder(stack, config.occluder_size, rng);
      if (occ.pixel_count > 0 && occ.pixel_count < frame_pixels) {
        occluders.push_back(std::move(occ));
        break;
      }
    }
  }

  Mask hole(h, w, 0.0f);
  for (const Occluder& occ : occluders) {
    auto dst = hole.data();
    auto src = occ.mask.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = std::max(dst[k], src[k]);
  }
  const Image inpainted = inpaint_with_auxiliary(source, hole, aux);

  SceneSample sample;
  Provenance& prov = sample.provenance;
  prov.seed = seed;

  const BackgroundDraw bd = draw_background(config, rng);
  BackgroundSpec bg_spec;
  bg_spec.warp1 = draw_warp(h, w, bd.grid_size1, config, rng);
  bg_spec.warp0 = draw_warp(h, w, bd.grid_size0, config, rng);
  bg_spec.shift = bd.shift;
  prov.background = {bd.grid_size1, bd.grid_size0, bd.shift};

  std::vector<LayerSpec> specs(occluders.size());
  std::vector<ForegroundLayer> layers(occluders.size());
  for (std::size_t i = 0; i < occluders.size(); ++i) {
    const LayerDraw ld = draw_layer(config, rng);
    LayerSpec& spec = specs[i];
    spec.mask = std::move(occluders[i].mask);
    spec.kind = ld.kind;
    spec.shadow_opacity = ld.shadow_opacity;
    spec.warp1 = draw_warp(h, w, ld.grid_size1, config, rng);
    spec.warp0 = draw_warp(h, w, ld.grid_size0, config, rng);
    spec.p0 = {0, 0};
    spec.p1 = ld.delta;
    spec.depth_rank = static_cast<int>(i);
    layers[i] = synthesize_foreground(source, spec);

    LayerRecord rec;
    rec.granularity = occluders[i].granularity;
    rec.target_size = occluders[i].target_size;
    rec.seed_segment = occluders[i].seed_segment;
    rec.mask_pixels = occluders[i].pixel_count;
    rec.kind = ld.kind;
    rec.shadow_opacity = ld.shadow_opacity;
    rec.grid_size1 = ld.grid_size1;
    rec.grid_size0 = ld.grid_size0;
    rec.p0 = spec.p0;
    rec.p1 = spec.p1;
    prov.layers.push_back(rec);
  }

  const BackgroundPair bg = synthesize_background(inpainted, bg_spec);
  SceneSample composed = composite_scene(bg, specs, layers);
  composed.provenance = std::move(prov);
  return composed;
}

}  // namespace flowsynth
