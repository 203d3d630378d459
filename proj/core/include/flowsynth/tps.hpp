#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "flowsynth/image.hpp"
#include "flowsynth/random.hpp"

namespace flowsynth {

enum class ControlNoise {
  kGaussian,  ///< N(0, sigma^2) per coordinate
  kUniform,   ///< U(-sqrt(3) sigma, sqrt(3) sigma) per coordinate (same variance)
};

/// L x L control points on a regular lattice spanning [0, W-1] x [0, H-1]
/// (source) and their displaced positions (target). Row-major in the lattice.
struct ControlGrid {
  int grid_size = 0;
  std::vector<Vec2> source_points;
  std::vector<Vec2> target_points;
};

/// Lattice with target == source.
ControlGrid make_control_lattice(int height, int width, int grid_size);

ControlGrid sample_control_grid(int height, int width, int grid_size, double noise_sigma, Rng& rng,
                                ControlNoise noise = ControlNoise::kGaussian);

/// A fitted thin-plate spline p -> affine(p) + sum_i w_i U(|p - s_i|) with
/// U(r) = r^2 log r^2. Warps are backward maps: they send an output pixel to
/// the location it is sampled from.
class TpsWarp {
 public:
  /// The identity transform (no control points).
  TpsWarp();

  const ControlGrid& control() const { return control_; }
  /// Row 0 maps to x, row 1 to y; columns are (constant, x, y).
  const std::array<std::array<double, 3>, 2>& affine() const { return affine_; }
  /// One weight vector per control point, in pixel units.
  std::span<const Vec2> kernel_weights() const { return weights_; }

  Vec2 operator()(Vec2 p) const;

 private:
  friend TpsWarp fit_tps(const ControlGrid&, double);

  ControlGrid control_;
  std::array<std::array<double, 3>, 2> affine_{};
  std::vector<Vec2> weights_;
};

inline constexpr double kDefaultTpsRegularization = 1e-10;

/// Solves the TPS system in normalized coordinates. `regularization` is added
/// to the kernel diagonal relative to the kernel block's largest entry.
TpsWarp fit_tps(const ControlGrid& control, double regularization = kDefaultTpsRegularization);

/// The TPS kernel r^2 log r^2 written in terms of r^2, with U(0) = 0.
inline double tps_kernel(double r2) { return r2 > 0.0 ? r2 * std::log(r2) : 0.0; }

CoordGrid evaluate_warp(const TpsWarp& warp, const CoordGrid& grid);

/// warp(p) + shift for every pixel p of `box`.
CoordGrid evaluate_warp_box(const TpsWarp& warp, const Rect& box, Vec2 shift = {});

/// Per-pixel warp(x) - x + shift over an H x W image.
FlowField displacement_field(const TpsWarp& warp, int height, int width, Vec2 shift = {});

/// Location written into grids for pixels that were culled; far enough out
/// that every sampler treats it as outside the source.
inline constexpr double kCulledCoord = -1.0e9;

/// Tiles of `domain` whose image under the warp (plus shift) may come within
/// one pixel of `target`. Decided from a coarse lattice evaluation with a
/// margin derived from the warp's second differences.
struct TileCover {
  Rect bounds;
  int tile_size = 16;
  std::vector<Rect> tiles;
};

TileCover preimage_tiles(const TpsWarp& warp, const Rect& domain, const Rect& target,
                         Vec2 shift = {}, int tile_size = 16);
/// Same, for a target made of several rectangles (e.g. the occupied tiles of
/// an irregular matte).
TileCover preimage_tiles(const TpsWarp& warp, const Rect& domain, std::span<const Rect> targets,
                         Vec2 shift = {}, int tile_size = 16);

/// Dense evaluation restricted to the tiles of `cover`; the grid spans
/// cover.bounds and pixels outside every tile hold kCulledCoord.
CoordGrid evaluate_warp_tiles(const TpsWarp& warp, const TileCover& cover, Vec2 shift = {});

namespace detail {
// acc += w * U(|p - c|) for n points. Lives in its own translation unit so it
// can be vectorized.
void accumulate_tps_kernel(const double* xs, const double* ys, std::size_t n, double cx,
                           double cy, double wx, double wy, double* acc_x, double* acc_y);
}  // namespace detail

}  // namespace flowsynth
