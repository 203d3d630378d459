#include "flowsynth/texture.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "flowsynth/random.hpp"

namespace flowsynth {

namespace {

// Bilinearly interpolated random lattice with spacing `cell`, one value per
// pixel and channel, added to `out` scaled by `amp`.
void add_value_noise(Image& out, int cell, float amp, Rng& rng) {
  const int nc = out.channels();
  const int gw = out.width() / cell + 2, gh = out.height() / cell + 2;
  std::vector<float> lattice(std::size_t(gw) * gh * nc);
  for (float& v : lattice) v = static_cast<float>(uniform_real(rng, -1.0, 1.0));
  auto at = [&](int gy, int gx, int c) { return lattice[(std::size_t(gy) * gw + gx) * nc + c]; };
  for (int y = 0; y < out.height(); ++y) {
    const int gy = y / cell;
    const float fy = float(y % cell) / cell;
    for (int x = 0; x < out.width(); ++x) {
      const int gx = x / cell;
      const float fx = float(x % cell) / cell;
      float* p = out.pixel(y, x);
      for (int c = 0; c < nc; ++c) {
        const float top = at(gy, gx, c) + fx * (at(gy, gx + 1, c) - at(gy, gx, c));
        const float bot = at(gy + 1, gx, c) + fx * (at(gy + 1, gx + 1, c) - at(gy + 1, gx, c));
        p[c] += amp * (top + fy * (bot - top));
      }
    }
  }
}

}  // namespace

Image procedural_texture(int height, int width, std::uint64_t seed, int channels) {
  if (height < 1 || width < 1) throw InvalidDimension("procedural_texture: empty size");
  Rng rng = make_rng(seed);
  Image img(height, width, channels, 0.5f);
  float amp = 0.25f;
  for (int cell = 96; cell >= 3; cell /= 2) {
    add_value_noise(img, cell, amp, rng);
    amp *= 0.6f;
  }

  const int n_shapes = std::max(4, height * width / 6000);
  for (int s = 0; s < n_shapes; ++s) {
    const double cx = uniform_real(rng, 0, width), cy = uniform_real(rng, 0, height);
    const double r = uniform_real(rng, 3, std::max(4.0, std::min(height, width) / 8.0));
    const bool disk = bernoulli(rng, 0.5);
    float color[3];
    for (float& c : color) c = static_cast<float>(uniform_real(rng, 0.0, 1.0));
    const int y0 = std::max(0, int(cy - r)), y1 = std::min(height, int(cy + r) + 1);
    const int x0 = std::max(0, int(cx - r)), x1 = std::min(width, int(cx + r) + 1);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        if (disk && (x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
        float* p = img.pixel(y, x);
        for (int c = 0; c < channels; ++c) p[c] = 0.5f * p[c] + 0.5f * color[c];
      }
    }
  }
  for (float& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

}  // namespace flowsynth
