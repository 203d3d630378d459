#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flowsynth/error.hpp"

namespace flowsynth {

/// Continuous image-plane position. x is the column and y the row, both in
/// pixel units with the origin at the center of the top-left pixel.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
};

/// One forward displacement (frame 0 -> frame 1), pixels.
struct FlowVec {
  float u = 0.0f;
  float v = 0.0f;

  friend bool operator==(const FlowVec&, const FlowVec&) = default;
};

/// Integer pixel offset.
struct Offset {
  int x = 0;
  int y = 0;

  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return std::max(0, x1 - x0); }
  int height() const { return std::max(0, y1 - y0); }
  std::int64_t area() const { return std::int64_t{width()} * height(); }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  Rect intersect(const Rect& o) const {
    return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
  }
  Rect unite(const Rect& o) const {
    if (empty()) return o;
    if (o.empty()) return *this;
    return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
  }
  Rect translated(Offset d) const { return {x0 + d.x, y0 + d.y, x1 + d.x, y1 + d.y}; }
  Rect inflated(int margin) const { return {x0 - margin, y0 - margin, x1 + margin, y1 + margin}; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Dense row-major single-valued raster. Masks, flow fields, coordinate grids
/// and label maps are all planes of different element types.
template <typename T>
class Plane {
 public:
  using value_type = T;

  Plane() = default;
  Plane(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw InvalidDimension("negative raster dimension");
    data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  Rect bounds() const { return {0, 0, width_, height_}; }
  bool same_shape(int height, int width) const { return height_ == height && width_ == width; }

  T& operator()(int y, int x) { return data_[index(y, x)]; }
  const T& operator()(int y, int x) const { return data_[index(y, x)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::span<T> row(int y) { return {data_.data() + index(y, 0), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int y) const {
    return {data_.data() + index(y, 0), static_cast<std::size_t>(width_)};
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Soft matte in [0, 1]. Values >= 0.5 form the binary view.
using Mask = Plane<float>;
/// Per-pixel sampling location, possibly fractional or out of bounds.
using CoordGrid = Plane<Vec2>;
using FlowField = Plane<FlowVec>;
using LabelMap = Plane<std::int32_t>;

inline bool mask_set(float alpha) { return alpha >= 0.5f; }

/// Interleaved row-major raster of normalized intensities (1 or 3 channels).
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
  Rect bounds() const { return {0, 0, width_, height_}; }
  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  float& at(int y, int x, int c) { return data_[offset(y, x) + c]; }
  float at(int y, int x, int c) const { return data_[offset(y, x) + c]; }
  float* pixel(int y, int x) { return data_.data() + offset(y, x); }
  const float* pixel(int y, int x) const { return data_.data() + offset(y, x); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int y, int x) const {
    return (static_cast<std::size_t>(y) * width_ + x) * static_cast<std::size_t>(channels_);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

enum class Border {
  kClamp,  ///< replicate the nearest edge pixel
  kZero,   ///< taps outside the raster read as zero
};

CoordGrid make_identity_grid(int height, int width);

/// Identity coordinates of the pixels inside `box` (which may extend past any
/// image); the grid is box.height() x box.width().
CoordGrid make_box_grid(const Rect& box);

/// Backward warp: out(p) = src interpolated at grid(p). `origin` is the
/// position of src's top-left pixel in the grid's coordinate frame, which lets
/// a cropped window be sampled with full-frame coordinates. Output is clamped
/// to [0, 1].
Image bilinear_sample(const Image& src, const CoordGrid& grid, Border border = Border::kClamp,
                      Offset origin = {});

/// Bilinear resampling of a matte; taps outside the raster read as 0.
Mask sample_mask(const Mask& src, const CoordGrid& grid, Offset origin = {});

/// Zero-fill resampling of a premultiplied texture together with its matte.
/// Texture taps are only read where some matte tap is non-zero, which is exact
/// because a premultiplied texture vanishes wherever its matte does. An empty
/// `texture` samples the matte alone.
void sample_layer(const Image& texture, const Mask& matte, const CoordGrid& grid, Offset origin,
                  Image& texture_out, Mask& matte_out);

/// Bilinear resampling of a flow field with clamp-to-edge borders. Vectors are
/// interpolated, not rescaled.
FlowField sample_flow(const FlowField& src, const CoordGrid& grid);

/// out = matte * fg + (1 - matte) * bg, per pixel and channel.
Image alpha_composite(const Image& fg, const Mask& matte, const Image& bg);

/// Tight bounding box of all pixels with alpha > 0; empty if none.
Rect support_box(const Mask& mask);

std::int64_t count_set(const Mask& mask);

/// Copy of the pixels of `src` inside `box` (box must lie within src).
Image crop_image(const Image& src, const Rect& box);
template <typename T>
Plane<T> crop_plane(const Plane<T>& src, const Rect& box) {
  Plane<T> out(box.height(), box.width());
  for (int y = 0; y < box.height(); ++y) {
    auto s = src.row(box.y0 + y).subspan(box.x0, box.width());
    std::copy(s.begin(), s.end(), out.row(y).begin());
  }
  return out;
}

/// Full-size copy of a windowed raster: `window` is written at `box` and
/// everything else is zero. Parts of the box outside the frame are dropped.
Image paste_window(const Image& window, const Rect& box, int height, int width);
template <typename T>
Plane<T> paste_window(const Plane<T>& window, const Rect& box, int height, int width) {
  Plane<T> out(height, width);
  const Rect clip = box.intersect(out.bounds());
  for (int y = clip.y0; y < clip.y1; ++y) {
    for (int x = clip.x0; x < clip.x1; ++x) out(y, x) = window(y - box.y0, x - box.x0);
  }
  return out;
}

}  // namespace flowsynth
