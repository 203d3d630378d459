#include "flowsynth/image.hpp"

#include <cmath>
#include <string>

namespace flowsynth {

namespace {

// Four-tap bilinear footprint of one sampling location.
struct Footprint {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  float fx = 0.0f, fy = 0.0f;
  // Tap validity for zero-fill sampling (always true when clamping).
  bool v00 = true, v10 = true, v01 = true, v11 = true;
  bool any = true;
};

[[gnu::always_inline]] inline Footprint clamp_footprint(double x, double y, int width, int height) {
  Footprint f;
  if (!(x >= 0.0)) x = 0.0;  // also catches NaN
  if (!(y >= 0.0)) y = 0.0;
  x = std::min(x, static_cast<double>(width - 1));
  y = std::min(y, static_cast<double>(height - 1));
  f.x0 = static_cast<int>(x);
  f.y0 = static_cast<int>(y);
  f.fx = static_cast<float>(x - f.x0);
  f.fy = static_cast<float>(y - f.y0);
  f.x1 = std::min(f.x0 + 1, width - 1);
  f.y1 = std::min(f.y0 + 1, height - 1);
  return f;
}

// floor() for x > -1 without a libm call (baseline x86-64 has no roundsd).
inline int floor_above_minus_one(double x) {
  int i = static_cast<int>(x + 1.0) - 1;
  if (i > x) --i;  // x + 1 rounded up to the next integer
  return i;
}

[[gnu::always_inline]] inline Footprint zero_footprint(double x, double y, int width, int height) {
  Footprint f;
  if (!(x > -1.0 && x < width && y > -1.0 && y < height)) {
    f.any = false;
    return f;
  }
  f.x0 = floor_above_minus_one(x);
  f.y0 = floor_above_minus_one(y);
  f.fx = static_cast<float>(x - f.x0);
  f.fy = static_cast<float>(y - f.y0);
  f.x1 = f.x0 + 1;
  f.y1 = f.y0 + 1;
  const bool cx0 = f.x0 >= 0, cx1 = f.x1 < width, cy0 = f.y0 >= 0, cy1 = f.y1 < height;
  f.v00 = cx0 && cy0;
  f.v10 = cx1 && cy0;
  f.v01 = cx0 && cy1;
  f.v11 = cx1 && cy1;
  // Keep indices addressable; invalid taps are never read.
  f.x0 = std::max(f.x0, 0);
  f.y0 = std::max(f.y0, 0);
  f.x1 = std::min(f.x1, width - 1);
  f.y1 = std::min(f.y1, height - 1);
  return f;
}

inline float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

}  // namespace

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0) throw InvalidDimension("negative image dimension");
  if (channels != 1 && channels != 3) {
    throw InvalidDimension("image channels must be 1 or 3, got " + std::to_string(channels));
  }
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

CoordGrid make_identity_grid(int height, int width) {
  if (height < 1 || width < 1) {
    throw InvalidDimension("identity grid needs positive dimensions, got " + std::to_string(height) +
                           "x" + std::to_string(width));
  }
  return make_box_grid({0, 0, width, height});
}

CoordGrid make_box_grid(const Rect& box) {
  CoordGrid grid(box.height(), box.width());
  for (int y = 0; y < box.height(); ++y) {
    auto row = grid.row(y);
    for (int x = 0; x < box.width(); ++x) row[x] = {double(box.x0 + x), double(box.y0 + y)};
  }
  return grid;
}

namespace {

template <int NC>
void sample_rows(const Image& src, const CoordGrid& grid, Border border, Offset origin, Image& out) {
  const int w = src.width(), h = src.height();
  const int nc = NC > 0 ? NC : src.channels();
  for (int y = 0; y < grid.height(); ++y) {
    auto coords = grid.row(y);
    for (int x = 0; x < grid.width(); ++x) {
      const double sx = coords[x].x - origin.x;
      const double sy = coords[x].y - origin.y;
      float* dst = out.pixel(y, x);
      if (border == Border::kClamp) {
        const Footprint f = clamp_footprint(sx, sy, w, h);
        const float* p00 = src.pixel(f.y0, f.x0);
        const float* p10 = src.pixel(f.y0, f.x1);
        const float* p01 = src.pixel(f.y1, f.x0);
        const float* p11 = src.pixel(f.y1, f.x1);
        for (int c = 0; c < nc; ++c) {
          const float top = p00[c] + f.fx * (p10[c] - p00[c]);
          const float bot = p01[c] + f.fx * (p11[c] - p01[c]);
          dst[c] = clamp01(top + f.fy * (bot - top));
        }
        continue;
      }
      const Footprint f = zero_footprint(sx, sy, w, h);
      if (!f.any) continue;
      const float w00 = (1 - f.fx) * (1 - f.fy), w10 = f.fx * (1 - f.fy);
      const float w01 = (1 - f.fx) * f.fy, w11 = f.fx * f.fy;
      const float* p00 = src.pixel(f.y0, f.x0);
      const float* p10 = src.pixel(f.y0, f.x1);
      const float* p01 = src.pixel(f.y1, f.x0);
      const float* p11 = src.pixel(f.y1, f.x1);
      if (f.v00 && f.v10 && f.v01 && f.v11) {
        for (int c = 0; c < nc; ++c) {
          dst[c] = clamp01(w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c]);
        }
        continue;
      }
      for (int c = 0; c < nc; ++c) {
        float v = 0.0f;
        if (f.v00) v += w00 * p00[c];
        if (f.v10) v += w10 * p10[c];
        if (f.v01) v += w01 * p01[c];
        if (f.v11) v += w11 * p11[c];
        dst[c] = clamp01(v);
      }
    }
  }
}

}  // namespace

Image bilinear_sample(const Image& src, const CoordGrid& grid, Border border, Offset origin) {
  if (src.empty()) throw InvalidDimension("bilinear_sample: empty source image");
  Image out(grid.height(), grid.width(), src.channels());
  switch (src.channels()) {
    case 3: sample_rows<3>(src, grid, border, origin, out); break;
    case 1: sample_rows<1>(src, grid, border, origin, out); break;
    default: sample_rows<0>(src, grid, border, origin, out); break;
  }
  return out;
}

Mask sample_mask(const Mask& src, const CoordGrid& grid, Offset origin) {
  if (src.empty()) throw InvalidDimension("sample_mask: empty source mask");
  const int w = src.width(), h = src.height();
  Mask out(grid.height(), grid.width());
  for (int y = 0; y < grid.height(); ++y) {
    auto coords = grid.row(y);
    auto dst = out.row(y);
    for (int x = 0; x < grid.width(); ++x) {
      const Footprint f = zero_footprint(coords[x].x - origin.x, coords[x].y - origin.y, w, h);
      if (!f.any) continue;
      const float w00 = (1 - f.fx) * (1 - f.fy), w10 = f.fx * (1 - f.fy);
      const float w01 = (1 - f.fx) * f.fy, w11 = f.fx * f.fy;
      float v = 0.0f;
      if (f.v00) v += w00 * src(f.y0, f.x0);
      if (f.v10) v += w10 * src(f.y0, f.x1);
      if (f.v01) v += w01 * src(f.y1, f.x0);
      if (f.v11) v += w11 * src(f.y1, f.x1);
      dst[x] = clamp01(v);
    }
  }
  return out;
}

void sample_layer(const Image& texture, const Mask& matte, const CoordGrid& grid, Offset origin,
                  Image& texture_out, Mask& matte_out) {
  if (matte.empty()) throw InvalidDimension("sample_layer: empty matte");
  const bool with_texture = !texture.empty();
  if (with_texture && !matte.same_shape(texture.height(), texture.width())) {
    throw InvalidDimension("sample_layer: texture and matte differ in size");
  }
  const int w = matte.width(), h = matte.height();
  const int nc = with_texture ? texture.channels() : 0;
  matte_out = Mask(grid.height(), grid.width());
  texture_out = with_texture ? Image(grid.height(), grid.width(), nc) : Image{};
  for (int y = 0; y < grid.height(); ++y) {
    auto coords = grid.row(y);
    auto m_out = matte_out.row(y);
    for (int x = 0; x < grid.width(); ++x) {
      const Footprint f = zero_footprint(coords[x].x - origin.x, coords[x].y - origin.y, w, h);
      if (!f.any) continue;
      const float w00 = (1 - f.fx) * (1 - f.fy), w10 = f.fx * (1 - f.fy);
      const float w01 = (1 - f.fx) * f.fy, w11 = f.fx * f.fy;
      const float m00 = f.v00 ? matte(f.y0, f.x0) : 0.0f;
      const float m10 = f.v10 ? matte(f.y0, f.x1) : 0.0f;
      const float m01 = f.v01 ? matte(f.y1, f.x0) : 0.0f;
      const float m11 = f.v11 ? matte(f.y1, f.x1) : 0.0f;
      if (m00 == 0.0f && m10 == 0.0f && m01 == 0.0f && m11 == 0.0f) continue;
      float v = 0.0f;
      v += w00 * m00;
      v += w10 * m10;
      v += w01 * m01;
      v += w11 * m11;
      m_out[x] = clamp01(v);
      if (!with_texture) continue;
      const float* p00 = texture.pixel(f.y0, f.x0);
      const float* p10 = texture.pixel(f.y0, f.x1);
      const float* p01 = texture.pixel(f.y1, f.x0);
      const float* p11 = texture.pixel(f.y1, f.x1);
      float* dst = texture_out.pixel(y, x);
      for (int c = 0; c < nc; ++c) {
        float t = 0.0f;
        if (f.v00) t += w00 * p00[c];
        if (f.v10) t += w10 * p10[c];
        if (f.v01) t += w01 * p01[c];
        if (f.v11) t += w11 * p11[c];
        dst[c] = clamp01(t);
      }
    }
  }
}

FlowField sample_flow(const FlowField& src, const CoordGrid& grid) {
  if (src.empty()) throw InvalidDimension("sample_flow: empty source flow");
  FlowField out(grid.height(), grid.width());
  for (int y = 0; y < grid.height(); ++y) {
    auto coords = grid.row(y);
    auto dst = out.row(y);
    for (int x = 0; x < grid.width(); ++x) {
      const Footprint f = clamp_footprint(coords[x].x, coords[x].y, src.width(), src.height());
      const FlowVec a = src(f.y0, f.x0), b = src(f.y0, f.x1);
      const FlowVec c = src(f.y1, f.x0), d = src(f.y1, f.x1);
      const float tu = a.u + f.fx * (b.u - a.u), bu = c.u + f.fx * (d.u - c.u);
      const float tv = a.v + f.fx * (b.v - a.v), bv = c.v + f.fx * (d.v - c.v);
      dst[x] = {tu + f.fy * (bu - tu), tv + f.fy * (bv - tv)};
    }
  }
  return out;
}

Image alpha_composite(const Image& fg, const Mask& matte, const Image& bg) {
  if (!fg.same_shape(bg) || !matte.same_shape(fg.height(), fg.width())) {
    throw InvalidDimension("alpha_composite: inputs must share dimensions");
  }
  Image out = bg;
  const int nc = fg.channels();
  for (int y = 0; y < fg.height(); ++y) {
    for (int x = 0; x < fg.width(); ++x) {
      const float a = matte(y, x);
      if (a <= 0.0f) continue;
      const float* f = fg.pixel(y, x);
      float* o = out.pixel(y, x);
      for (int c = 0; c < nc; ++c) o[c] = a * f[c] + (1.0f - a) * o[c];
    }
  }
  return out;
}

Rect support_box(const Mask& mask) {
  Rect box{mask.width(), mask.height(), 0, 0};
  for (int y = 0; y < mask.height(); ++y) {
    auto row = mask.row(y);
    for (int x = 0; x < mask.width(); ++x) {
      if (row[x] > 0.0f) {
        box.x0 = std::min(box.x0, x);
        box.x1 = std::max(box.x1, x + 1);
        box.y0 = std::min(box.y0, y);
        box.y1 = std::max(box.y1, y + 1);
      }
    }
  }
  if (box.empty()) return {};
  return box;
}

std::int64_t count_set(const Mask& mask) {
  return std::count_if(mask.data().begin(), mask.data().end(), mask_set);
}

Image crop_image(const Image& src, const Rect& box) {
  if (box.intersect(src.bounds()) != box) throw InvalidParameter("crop window outside image");
  Image out(box.height(), box.width(), src.channels());
  const std::size_t row_len = static_cast<std::size_t>(box.width()) * src.channels();
  for (int y = 0; y < box.height(); ++y) {
    std::copy_n(src.pixel(box.y0 + y, box.x0), row_len, out.pixel(y, 0));
  }
  return out;
}

Image paste_window(const Image& window, const Rect& box, int height, int width) {
  Image out(height, width, window.channels() == 0 ? 3 : window.channels());
  const Rect clip = box.intersect(out.bounds());
  const int nc = out.channels();
  for (int y = clip.y0; y < clip.y1; ++y) {
    std::copy_n(window.pixel(y - box.y0, clip.x0 - box.x0), std::size_t(clip.width()) * nc,
                out.pixel(y, clip.x0));
  }
  return out;
}

}  // namespace flowsynth
