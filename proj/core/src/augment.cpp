#include "flowsynth/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace flowsynth {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidParameter("augment config: " + what);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

inline float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

inline float luma(const float* p) { return 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2]; }

template <typename T>
void flip_rows(T* data, int height, int width, int stride, bool horizontal, bool vertical) {
  // stride = elements per pixel
  if (horizontal) {
    for (int y = 0; y < height; ++y) {
      T* row = data + std::size_t(y) * width * stride;
      for (int x = 0; x < width / 2; ++x) {
        std::swap_ranges(row + x * stride, row + (x + 1) * stride, row + (width - 1 - x) * stride);
      }
    }
  }
  if (vertical) {
    const std::size_t n = std::size_t(width) * stride;
    for (int y = 0; y < height / 2; ++y) {
      std::swap_ranges(data + y * n, data + (y + 1) * n, data + (height - 1 - y) * n);
    }
  }
}

template <typename T>
void flip_plane(Plane<T>& p, bool horizontal, bool vertical) {
  flip_rows(p.data().data(), p.height(), p.width(), 1, horizontal, vertical);
}

// Bilinear taps of one output axis under out = (in + 0.5) * ratio - 0.5.
struct AxisTaps {
  std::vector<int> i0;    // floor of the source coordinate, may be -1
  std::vector<float> w1;  // weight of tap i0 + 1
};

// Taps for output indices [begin, end).
AxisTaps axis_taps(int begin, int end, double ratio) {
  AxisTaps t;
  t.i0.resize(end - begin);
  t.w1.resize(end - begin);
  for (int i = begin; i < end; ++i) {
    const double s = (i + 0.5) / ratio - 0.5;
    const double f = std::floor(s);
    t.i0[i - begin] = static_cast<int>(f);
    t.w1[i - begin] = static_cast<float>(s - f);
  }
  return t;
}

// Clamp-to-edge bilinear resize of interleaved rows with `nc` values per
// pixel.
void resize_clamped(const float* src, int h, int w, int nc, const AxisTaps& ty, const AxisTaps& tx,
                    float* dst) {
  const int nh = static_cast<int>(ty.i0.size()), nw = static_cast<int>(tx.i0.size());
  std::vector<int> x0(nw), x1(nw);
  for (int x = 0; x < nw; ++x) {
    x0[x] = std::clamp(tx.i0[x], 0, w - 1) * nc;
    x1[x] = std::clamp(tx.i0[x] + 1, 0, w - 1) * nc;
  }
  for (int y = 0; y < nh; ++y) {
    const float* r0 = src + std::size_t(std::clamp(ty.i0[y], 0, h - 1)) * w * nc;
    const float* r1 = src + std::size_t(std::clamp(ty.i0[y] + 1, 0, h - 1)) * w * nc;
    const float wy = ty.w1[y];
    float* out = dst + std::size_t(y) * nw * nc;
    for (int x = 0; x < nw; ++x) {
      const float wx = tx.w1[x];
      const float w00 = (1 - wx) * (1 - wy), w10 = wx * (1 - wy), w01 = (1 - wx) * wy, w11 = wx * wy;
      for (int c = 0; c < nc; ++c) {
        out[x * nc + c] = w00 * r0[x0[x] + c] + w10 * r0[x1[x] + c] + w01 * r1[x0[x] + c] + w11 * r1[x1[x] + c];
      }
    }
  }
}

// Taps whose flows differ by more than this (source pixels, either
// component) straddle a motion boundary.
constexpr float kFlowEdge = 1.0f;

// Bilinear like resize_clamped, except across motion boundaries: there a
// blend is a motion neither surface has, so the heaviest tap is copied.
void resize_flow(const FlowField& src, const AxisTaps& ty, const AxisTaps& tx, FlowField& dst) {
  const int h = src.height(), w = src.width();
  const int nh = static_cast<int>(ty.i0.size()), nw = static_cast<int>(tx.i0.size());
  dst = FlowField(nh, nw);
  for (int y = 0; y < nh; ++y) {
    const FlowVec* r0 = src.row(std::clamp(ty.i0[y], 0, h - 1)).data();
    const FlowVec* r1 = src.row(std::clamp(ty.i0[y] + 1, 0, h - 1)).data();
    const float wy = ty.w1[y];
    FlowVec* out = dst.row(y).data();
    for (int x = 0; x < nw; ++x) {
      const int x0 = std::clamp(tx.i0[x], 0, w - 1), x1 = std::clamp(tx.i0[x] + 1, 0, w - 1);
      const float wx = tx.w1[x];
      const FlowVec taps[4] = {r0[x0], r0[x1], r1[x0], r1[x1]};
      const float wt[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
      float umin = INFINITY, umax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
      int heaviest = 0;
      for (int k = 0; k < 4; ++k) {
        if (wt[k] <= 0.0f) continue;
        umin = std::min(umin, taps[k].u);
        umax = std::max(umax, taps[k].u);
        vmin = std::min(vmin, taps[k].v);
        vmax = std::max(vmax, taps[k].v);
        if (wt[k] > wt[heaviest]) heaviest = k;
      }
      if (umax - umin > kFlowEdge || vmax - vmin > kFlowEdge) {
        out[x] = taps[heaviest];
      } else {
        out[x] = {wt[0] * taps[0].u + wt[1] * taps[1].u + wt[2] * taps[2].u + wt[3] * taps[3].u,
                  wt[0] * taps[0].v + wt[1] * taps[1].v + wt[2] * taps[2].v + wt[3] * taps[3].v};
      }
    }
  }
}

// 1 where any in-bounds tap with non-zero weight is set.
Mask resize_any(const Mask& src, const AxisTaps& ty, const AxisTaps& tx) {
  const int h = src.height(), w = src.width();
  const int nh = static_cast<int>(ty.i0.size()), nw = static_cast<int>(tx.i0.size());
  Mask out(nh, nw);
  auto set = [&](int y, int x) { return y >= 0 && y < h && x >= 0 && x < w && src(y, x) > 0.0f; };
  for (int y = 0; y < nh; ++y) {
    const int y0 = ty.i0[y], y1 = ty.w1[y] > 0.0f ? y0 + 1 : y0;
    for (int x = 0; x < nw; ++x) {
      const int x0 = tx.i0[x], x1 = tx.w1[x] > 0.0f ? x0 + 1 : x0;
      if (set(y0, x0) || set(y0, x1) || set(y1, x0) || set(y1, x1)) out(y, x) = 1.0f;
    }
  }
  return out;
}

void apply_color_map(Image& out, const ColorAffine& t, bool clamp) {
  const int nc = out.channels();
  auto px = out.data();
  if (nc == 3) {
    const auto& m = t.matrix;
    for (std::size_t i = 0; i < px.size(); i += 3) {
      const double r = px[i], g = px[i + 1], b = px[i + 2];
      for (int c = 0; c < 3; ++c) {
        const auto v = static_cast<float>(m[3 * c] * r + m[3 * c + 1] * g + m[3 * c + 2] * b + t.offset[c]);
        px[i + c] = clamp ? clamp01(v) : v;
      }
    }
  } else {
    for (float& v : px) {
      const auto w = static_cast<float>(t.matrix[0] * v + t.offset[0]);
      v = clamp ? clamp01(w) : w;
    }
  }
}

// Whether the bilinear footprint of (tx, ty) covers a set pixel of `m`
// (taps with zero weight are skipped).
bool footprint_hits(const Mask& m, double tx, double ty) {
  const double fx = std::floor(tx), fy = std::floor(ty);
  const int x0 = static_cast<int>(std::max(fx, -1.0)), y0 = static_cast<int>(std::max(fy, -1.0));
  const int x1 = tx > fx ? x0 + 1 : x0, y1 = ty > fy ? y0 + 1 : y0;
  for (int y = std::max(y0, 0); y <= std::min(y1, m.height() - 1); ++y) {
    for (int x = std::max(x0, 0); x <= std::min(x1, m.width() - 1); ++x) {
      if (m(y, x) > 0.0f) return true;
    }
  }
  return false;
}

// Square dilation of a binary mask.
Mask dilate(const Mask& m, int radius) {
  const int h = m.height(), w = m.width();
  Mask rows(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m(y, x) <= 0.0f) continue;
      for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) rows(y, xx) = 1.0f;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (rows(y, x) <= 0.0f) continue;
      for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy) out(yy, x) = 1.0f;
    }
  }
  return out;
}

// Undoes a recorded jitter in place and returns the pixels that had clipped.
Mask unjitter(Image& frame, const std::optional<JitterParams>& params) {
  Mask clipped(frame.height(), frame.width());
  if (!params) return clipped;
  const int nc = frame.channels();
  for (int y = 0; y < frame.height(); ++y) {
    const float* p = frame.pixel(y, 0);
    for (int x = 0; x < frame.width(); ++x) {
      for (int c = 0; c < nc; ++c) {
        if (p[x * nc + c] <= 0.0f || p[x * nc + c] >= 1.0f) clipped(y, x) = 1.0f;
      }
    }
  }
  apply_color_map(frame, inverse(jitter_transform(*params, nc)), false);
  return clipped;
}

// Occludes pixels whose flow target falls outside [0, W-1] x [0, H-1].
void occlude_out_of_bounds(SceneSample& s) {
  const int h = s.flow.height(), w = s.flow.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const FlowVec f = s.flow(y, x);
      const double tx = x + double(f.u), ty = y + double(f.v);
      if (!(tx >= 0.0 && tx <= w - 1 && ty >= 0.0 && ty <= h - 1)) s.occlusion(y, x) = 1.0f;
    }
  }
}

struct Dims {
  int width = 0;
  int height = 0;
};

void check_factor(double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw InvalidParameter("scale: factor must be positive, got " + std::to_string(factor));
  }
}

Dims scaled_size(int h, int w, double factor) {
  check_factor(factor);
  const auto nh = static_cast<int>(std::lround(h * factor));
  const auto nw = static_cast<int>(std::lround(w * factor));
  if (nh < 1 || nw < 1) {
    throw InvalidParameter("scale: factor " + std::to_string(factor) + " leaves an empty image");
  }
  return {nw, nh};
}

// crop(scale(sample, factor), window) without resampling outside the window.
SceneSample scale_window(SceneSample sample, double factor, const Rect& window) {
  const int h = sample.frame0.height(), w = sample.frame0.width();
  const Dims size = scaled_size(h, w, factor);
  if (window.empty() || window.intersect({0, 0, size.width, size.height}) != window) {
    throw InvalidParameter("crop: window must be non-empty and inside the frame");
  }
  // Per-axis factors after rounding keep the geometry exact.
  const double sx = double(size.width) / w, sy = double(size.height) / h;
  const AxisTaps tx = axis_taps(window.x0, window.x1, sx), ty = axis_taps(window.y0, window.y1, sy);
  const int nh = window.height(), nw = window.width();
  SceneSample out;
  out.provenance = std::move(sample.provenance);
  for (auto [src, dst] : {std::pair{&sample.frame0, &out.frame0}, std::pair{&sample.frame1, &out.frame1}}) {
    *dst = Image(nh, nw, src->channels());
    resize_clamped(src->data().data(), h, w, src->channels(), ty, tx, dst->data().data());
    for (float& v : dst->data()) v = clamp01(v);
  }
  resize_flow(sample.flow, ty, tx, out.flow);
  const auto fx = static_cast<float>(sx), fy = static_cast<float>(sy);
  for (FlowVec& f : out.flow.data()) {
    f.u *= fx;
    f.v *= fy;
  }
  out.occlusion = resize_any(sample.occlusion, ty, tx);
  out.shadow_region = resize_any(sample.shadow_region, ty, tx);
  occlude_out_of_bounds(out);
  return out;
}

}  // namespace

void AugmentConfig::validate() const {
  require(is_probability(jitter_prob) && is_probability(scale_prob) && is_probability(h_flip_prob) &&
              is_probability(v_flip_prob) && is_probability(erase_prob),
          "probabilities must lie in [0, 1]");
  require(brightness >= 0.0 && brightness < 1.0 && contrast >= 0.0 && contrast < 1.0 &&
              saturation >= 0.0 && saturation < 1.0,
          "brightness, contrast and saturation must lie in [0, 1)");
  require(hue >= 0.0 && hue <= 0.5, "hue must lie in [0, 0.5]");
  require(scale_range.min > 0.0 && scale_range.max >= scale_range.min,
          "scale_range must be a non-empty positive range");
  require(crop_height >= 0 && crop_width >= 0, "crop size must be non-negative");
  require(erase_area.min >= 0.0 && erase_area.max <= 1.0 && erase_area.min <= erase_area.max,
          "erase_area must be a non-empty range within [0, 1]");
}

JitterParams draw_jitter(const AugmentConfig& config, Rng& rng) {
  JitterParams p;
  p.brightness = uniform_real(rng, 1.0 - config.brightness, 1.0 + config.brightness);
  p.contrast = uniform_real(rng, 1.0 - config.contrast, 1.0 + config.contrast);
  p.saturation = uniform_real(rng, 1.0 - config.saturation, 1.0 + config.saturation);
  p.hue = uniform_real(rng, -config.hue, config.hue);
  return p;
}

JitterParams resolve_jitter(const Image& img, JitterParams params) {
  if (params.contrast_mean >= 0.0) return params;
  double sum = 0.0;
  const int nc = img.channels();
  auto px = img.data();
  for (std::size_t i = 0; i < px.size(); i += nc) sum += nc == 3 ? luma(&px[i]) : px[i];
  params.contrast_mean = img.pixel_count() > 0 ? params.brightness * sum / double(img.pixel_count()) : 0.0;
  return params;
}

ColorAffine jitter_transform(const JitterParams& params, int channels) {
  if (params.contrast_mean < 0.0) {
    throw InvalidParameter("jitter_transform: contrast_mean is unresolved");
  }
  using Mat3 = std::array<double, 9>;
  auto mul = [](const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) c[3 * i + j] += a[3 * i + k] * b[3 * k + j];
      }
    }
    return c;
  };
  const double gain = params.contrast * params.brightness;
  const double lift = (1.0 - params.contrast) * params.contrast_mean;
  ColorAffine t;
  if (channels != 3) {
    t.matrix = {gain, 0, 0, 0, gain, 0, 0, 0, gain};
    t.offset = {lift, lift, lift};
    return t;
  }
  // The contrast offset is gray, which saturation leaves alone.
  const double s = params.saturation;
  const Mat3 sat{s + (1 - s) * 0.299, (1 - s) * 0.587,     (1 - s) * 0.114,
                 (1 - s) * 0.299,     s + (1 - s) * 0.587, (1 - s) * 0.114,
                 (1 - s) * 0.299,     (1 - s) * 0.587,     s + (1 - s) * 0.114};
  Mat3 m = mul(sat, {gain, 0, 0, 0, gain, 0, 0, 0, gain});
  if (params.hue != 0.0) {
    // Rotation of the chroma plane in YIQ.
    const double cs = std::cos(kTwoPi * params.hue), sn = std::sin(kTwoPi * params.hue);
    const Mat3 to_yiq{0.299, 0.587, 0.114, 0.596, -0.274, -0.322, 0.211, -0.523, 0.312};
    const Mat3 from_yiq{1.0, 0.956, 0.621, 1.0, -0.272, -0.647, 1.0, -1.106, 1.703};
    const Mat3 rot{1, 0, 0, 0, cs, -sn, 0, sn, cs};
    const Mat3 hue_map = mul(from_yiq, mul(rot, to_yiq));
    m = mul(hue_map, m);
    for (int i = 0; i < 3; ++i) {
      t.offset[i] = (hue_map[3 * i] + hue_map[3 * i + 1] + hue_map[3 * i + 2]) * lift;
    }
  } else {
    t.offset = {lift, lift, lift};
  }
  t.matrix = m;
  return t;
}

ColorAffine inverse(const ColorAffine& t) {
  const auto& a = t.matrix;
  const double det = a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
                     a[2] * (a[3] * a[7] - a[4] * a[6]);
  if (!(std::abs(det) > 1e-12)) throw InvalidParameter("inverse: singular color map");
  ColorAffine inv;
  inv.matrix = {(a[4] * a[8] - a[5] * a[7]) / det, (a[2] * a[7] - a[1] * a[8]) / det,
                (a[1] * a[5] - a[2] * a[4]) / det, (a[5] * a[6] - a[3] * a[8]) / det,
                (a[0] * a[8] - a[2] * a[6]) / det, (a[2] * a[3] - a[0] * a[5]) / det,
                (a[3] * a[7] - a[4] * a[6]) / det, (a[1] * a[6] - a[0] * a[7]) / det,
                (a[0] * a[4] - a[1] * a[3]) / det};
  for (int i = 0; i < 3; ++i) {
    inv.offset[i] = -(inv.matrix[3 * i] * t.offset[0] + inv.matrix[3 * i + 1] * t.offset[1] +
                      inv.matrix[3 * i + 2] * t.offset[2]);
  }
  return inv;
}

Image apply_jitter(Image img, const JitterParams& params) {
  const JitterParams p = resolve_jitter(img, params);
  if (p.brightness == 1.0 && p.contrast == 1.0 && p.saturation == 1.0 && p.hue == 0.0) return img;
  apply_color_map(img, jitter_transform(p, img.channels()), true);
  return img;
}

SceneSample color_jitter(SceneSample sample, const JitterParams& frame0, const JitterParams& frame1) {
  sample.frame0 = apply_jitter(std::move(sample.frame0), frame0);
  sample.frame1 = apply_jitter(std::move(sample.frame1), frame1);
  return sample;
}

SceneSample scale(SceneSample sample, double factor) {
  if (factor == 1.0) {
    check_factor(factor);
    return sample;
  }
  const Dims size = scaled_size(sample.frame0.height(), sample.frame0.width(), factor);
  return scale_window(std::move(sample), factor, {0, 0, size.width, size.height});
}

SceneSample flip(SceneSample sample, bool horizontal, bool vertical) {
  if (!horizontal && !vertical) return sample;
  for (Image* f : {&sample.frame0, &sample.frame1}) {
    flip_rows(f->data().data(), f->height(), f->width(), f->channels(), horizontal, vertical);
  }
  flip_plane(sample.flow, horizontal, vertical);
  for (FlowVec& f : sample.flow.data()) {
    if (horizontal) f.u = -f.u;
    if (vertical) f.v = -f.v;
  }
  flip_plane(sample.occlusion, horizontal, vertical);
  flip_plane(sample.shadow_region, horizontal, vertical);
  return sample;
}

SceneSample crop(SceneSample sample, const Rect& window) {
  if (window.empty() || window.intersect(sample.frame0.bounds()) != window) {
    throw InvalidParameter("crop: window must be non-empty and inside the frame");
  }
  if (window == sample.frame0.bounds()) {
    occlude_out_of_bounds(sample);
    return sample;
  }
  SceneSample out;
  out.provenance = std::move(sample.provenance);
  out.frame0 = crop_image(sample.frame0, window);
  out.frame1 = crop_image(sample.frame1, window);
  out.flow = crop_plane(sample.flow, window);
  out.occlusion = crop_plane(sample.occlusion, window);
  out.shadow_region = crop_plane(sample.shadow_region, window);
  occlude_out_of_bounds(out);
  return out;
}

SceneSample erase(SceneSample sample, const Rect& rect, bool mark_occluded) {
  if (rect.empty()) return sample;
  Image& f1 = sample.frame1;
  if (rect.intersect(f1.bounds()) != rect) {
    throw InvalidParameter("erase: rectangle must lie inside frame 1");
  }
  const int nc = f1.channels();
  std::vector<double> mean(nc, 0.0);
  auto px = f1.data();
  for (std::size_t i = 0; i < px.size(); i += nc) {
    for (int c = 0; c < nc; ++c) mean[c] += px[i + c];
  }
  for (double& m : mean) m /= double(f1.pixel_count());
  for (int y = rect.y0; y < rect.y1; ++y) {
    for (int x = rect.x0; x < rect.x1; ++x) {
      float* p = f1.pixel(y, x);
      for (int c = 0; c < nc; ++c) p[c] = static_cast<float>(mean[c]);
    }
  }
  if (!mark_occluded) return sample;
  const int h = f1.height(), w = f1.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const FlowVec f = sample.flow(y, x);
      const double tx = x + double(f.u), ty = y + double(f.v);
      // Pixels read by the bilinear tap at the target (zero-weight taps skipped).
      const double fx = std::floor(tx), fy = std::floor(ty);
      const double ex = tx > fx ? fx + 1 : fx, ey = ty > fy ? fy + 1 : fy;
      if (ex >= rect.x0 && fx < rect.x1 && ey >= rect.y0 && fy < rect.y1) sample.occlusion(y, x) = 1.0f;
    }
  }
  return sample;
}

SceneSample photometric_reference(const SceneSample& sample) {
  if (!sample.provenance.augment) return sample;
  const AugmentRecord& a = *sample.provenance.augment;
  SceneSample out = sample;
  // A pixel clipped before scaling leaks into outputs up to `scale` pixels away.
  const int reach = static_cast<int>(std::ceil(2.0 * std::max(1.0, a.scale)));
  Mask bad0 = unjitter(out.frame0, a.jitter0);
  Mask bad1 = unjitter(out.frame1, a.jitter1);
  if (a.jitter0) bad0 = dilate(bad0, reach);
  if (a.jitter1) bad1 = dilate(bad1, reach);
  if (a.erase) {
    const Rect r = a.erase->intersect(bad1.bounds());
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) bad1(y, x) = 1.0f;
    }
  }
  const int h = out.flow.height(), w = out.flow.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const FlowVec f = out.flow(y, x);
      if (bad0(y, x) > 0.0f || footprint_hits(bad1, x + double(f.u), y + double(f.v))) {
        out.shadow_region(y, x) = 1.0f;
      }
    }
  }
  return out;
}

SceneSample augment(SceneSample sample, const AugmentConfig& config, Rng& rng) {
  config.validate();
  AugmentRecord rec;
  SceneSample s = std::move(sample);

  if (bernoulli(rng, config.jitter_prob)) {
    const JitterParams raw0 = draw_jitter(config, rng);
    const JitterParams raw1 = config.asymmetric_jitter ? draw_jitter(config, rng) : raw0;
    const JitterParams j0 = resolve_jitter(s.frame0, raw0);
    const JitterParams j1 = resolve_jitter(s.frame1, raw1);
    s = color_jitter(std::move(s), j0, j1);
    rec.jitter0 = j0;
    rec.jitter1 = j1;
  }

  const int h = s.frame0.height(), w = s.frame0.width();
  const int ch = config.crop_height > 0 ? config.crop_height : h;
  const int cw = config.crop_width > 0 ? config.crop_width : w;
  const double needed = std::max(double(ch) / h, double(cw) / w);
  double factor = 1.0;
  if (bernoulli(rng, config.scale_prob)) {
    factor = std::exp(uniform_real(rng, std::log(config.scale_range.min),
                                   std::log(config.scale_range.max)));
  }
  factor = std::max(factor, needed);
  rec.scale = factor;
  const Dims size = factor != 1.0 ? scaled_size(h, w, factor) : Dims{w, h};

  rec.h_flip = bernoulli(rng, config.h_flip_prob);
  rec.v_flip = bernoulli(rng, config.v_flip_prob);

  Rect window{0, 0, size.width, size.height};
  if (size.height != ch || size.width != cw) {
    const int y0 = uniform_int(rng, 0, size.height - ch);
    const int x0 = uniform_int(rng, 0, size.width - cw);
    rec.crop = Rect{x0, y0, x0 + cw, y0 + ch};
    // The crop is drawn on the flipped frame; mirror it back so the scale
    // only resamples what survives. Same bytes as scale, flip, crop.
    window = *rec.crop;
    if (rec.h_flip) window = {size.width - window.x1, window.y0, size.width - window.x0, window.y1};
    if (rec.v_flip) window = {window.x0, size.height - window.y1, window.x1, size.height - window.y0};
  }
  if (factor != 1.0) {
    s = scale_window(std::move(s), factor, window);
  } else if (rec.crop) {
    s = crop(std::move(s), window);
  }
  s = flip(std::move(s), rec.h_flip, rec.v_flip);

  if (bernoulli(rng, config.erase_prob)) {
    const double area = uniform_real(rng, config.erase_area.min, config.erase_area.max) * ch * cw;
    const double aspect = std::exp(uniform_real(rng, std::log(0.5), std::log(2.0)));
    const int rw = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, cw);
    const int rh = std::clamp(static_cast<int>(std::lround(area / rw)), 1, ch);
    const int x0 = uniform_int(rng, 0, cw - rw);
    const int y0 = uniform_int(rng, 0, ch - rh);
    rec.erase = Rect{x0, y0, x0 + rw, y0 + rh};
    s = erase(std::move(s), *rec.erase, config.erase_marks_occluded);
  }

  s.provenance.augment = rec;
  return s;
}

}  // namespace flowsynth
