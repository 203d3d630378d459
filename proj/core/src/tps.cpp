#include "flowsynth/tps.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace flowsynth {

namespace {

// Evaluates warp + shift at n points given as separate coordinate arrays.
void evaluate_points(const TpsWarp& warp, const double* xs, const double* ys, std::size_t n,
                     Vec2 shift, double* out_x, double* out_y) {
  const auto& a = warp.affine();
  for (std::size_t i = 0; i < n; ++i) {
    out_x[i] = a[0][0] + shift.x + a[0][1] * xs[i] + a[0][2] * ys[i];
    out_y[i] = a[1][0] + shift.y + a[1][1] * xs[i] + a[1][2] * ys[i];
  }
  const auto& src = warp.control().source_points;
  const auto w = warp.kernel_weights();
  for (std::size_t k = 0; k < w.size(); ++k) {
    detail::accumulate_tps_kernel(xs, ys, n, src[k].x, src[k].y, w[k].x, w[k].y, out_x, out_y);
  }
}

// Row buffers reused across the rows of one dense evaluation.
struct RowScratch {
  std::vector<double> xs, ys, ox, oy;
  void resize(std::size_t n) {
    xs.resize(n);
    ys.resize(n);
    ox.resize(n);
    oy.resize(n);
  }
};

void evaluate_row_run(const TpsWarp& warp, int x0, int x1, int y, Vec2 shift, RowScratch& s,
                      Vec2* out) {
  const std::size_t n = static_cast<std::size_t>(x1 - x0);
  s.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.xs[i] = x0 + static_cast<double>(i);
    s.ys[i] = y;
  }
  evaluate_points(warp, s.xs.data(), s.ys.data(), n, shift, s.ox.data(), s.oy.data());
  for (std::size_t i = 0; i < n; ++i) out[i] = {s.ox[i], s.oy[i]};
}

}  // namespace

ControlGrid make_control_lattice(int height, int width, int grid_size) {
  if (grid_size < 2) {
    throw InvalidParameter("control grid size must be >= 2, got " + std::to_string(grid_size));
  }
  if (height < 1 || width < 1) throw InvalidDimension("control grid needs a non-empty image");
  ControlGrid grid;
  grid.grid_size = grid_size;
  grid.source_points.reserve(static_cast<std::size_t>(grid_size) * grid_size);
  for (int j = 0; j < grid_size; ++j) {
    for (int i = 0; i < grid_size; ++i) {
      grid.source_points.push_back({double(width - 1) * i / (grid_size - 1),
                                    double(height - 1) * j / (grid_size - 1)});
    }
  }
  grid.target_points = grid.source_points;
  return grid;
}

ControlGrid sample_control_grid(int height, int width, int grid_size, double noise_sigma, Rng& rng,
                                ControlNoise noise) {
  if (noise_sigma < 0.0) throw InvalidParameter("control noise sigma must be >= 0");
  ControlGrid grid = make_control_lattice(height, width, grid_size);
  if (noise_sigma == 0.0) return grid;
  const double half_width = std::sqrt(3.0) * noise_sigma;
  auto draw = [&] {
    return noise == ControlNoise::kGaussian ? normal(rng, 0.0, noise_sigma)
                                            : uniform_real(rng, -half_width, half_width);
  };
  for (auto& p : grid.target_points) {
    p.x += draw();
    p.y += draw();
  }
  return grid;
}

TpsWarp::TpsWarp() {
  affine_[0] = {0.0, 1.0, 0.0};
  affine_[1] = {0.0, 0.0, 1.0};
}

Vec2 TpsWarp::operator()(Vec2 p) const {
  Vec2 out{affine_[0][0] + affine_[0][1] * p.x + affine_[0][2] * p.y,
           affine_[1][0] + affine_[1][1] * p.x + affine_[1][2] * p.y};
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    const double dx = p.x - control_.source_points[k].x;
    const double dy = p.y - control_.source_points[k].y;
    const double u = tps_kernel(dx * dx + dy * dy);
    out.x += weights_[k].x * u;
    out.y += weights_[k].y * u;
  }
  return out;
}

TpsWarp fit_tps(const ControlGrid& control, double regularization) {
  const auto& src = control.source_points;
  const auto& dst = control.target_points;
  const std::size_t n = src.size();
  if (n != dst.size()) throw InvalidParameter("control grid source/target length mismatch");
  if (n < 3) throw DegenerateGeometry("thin-plate spline needs at least 3 control points");
  if (!(regularization >= 0.0)) throw InvalidParameter("regularization must be >= 0");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (src[i] == src[j]) throw DegenerateGeometry("duplicate control point");
    }
  }

  // Normalize to a unit-sized frame for conditioning.
  Vec2 center{};
  for (const auto& p : src) center = center + p;
  center.x /= double(n);
  center.y /= double(n);
  double scale = 0.0;
  for (const auto& p : src) {
    scale = std::max({scale, std::abs(p.x - center.x), std::abs(p.y - center.y)});
  }
  if (scale <= 0.0) throw DegenerateGeometry("control points are coincident");

  std::vector<Vec2> unit(n);
  for (std::size_t i = 0; i < n; ++i) {
    unit[i] = {(src[i].x - center.x) / scale, (src[i].y - center.y) / scale};
  }

  const Eigen::Index m = static_cast<Eigen::Index>(n) + 3;
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(m, m);
  double kernel_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = unit[i].x - unit[j].x, dy = unit[i].y - unit[j].y;
      const double k = tps_kernel(dx * dx + dy * dy);
      system(Eigen::Index(i), Eigen::Index(j)) = k;
      kernel_max = std::max(kernel_max, std::abs(k));
    }
  }
  const double lambda = regularization * kernel_max;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = Eigen::Index(i);
    system(r, r) += lambda;
    const Eigen::Index nn = Eigen::Index(n);
    system(r, nn) = system(nn, r) = 1.0;
    system(r, nn + 1) = system(nn + 1, r) = unit[i].x;
    system(r, nn + 2) = system(nn + 2, r) = unit[i].y;
    rhs(r, 0) = dst[i].x;
    rhs(r, 1) = dst[i].y;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw DegenerateGeometry("singular thin-plate spline system");
  const Eigen::MatrixXd sol = lu.solve(rhs);
  if (!sol.allFinite()) throw DegenerateGeometry("non-finite thin-plate spline solution");

  // Map the unit-frame solution back to pixel units. With s the scale,
  // U(r/s) = (U(r) - r^2 log s^2) / s^2, and under the side conditions
  // sum_i w_i r_i^2 collapses to the constant sum_i w_i |s_i|^2.
  TpsWarp warp;
  warp.control_ = control;
  warp.weights_.resize(n);
  const double inv_s2 = 1.0 / (scale * scale);
  const double log_s2 = std::log(scale * scale);
  for (int d = 0; d < 2; ++d) {
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = sol(Eigen::Index(i), d) * inv_s2;
      (d == 0 ? warp.weights_[i].x : warp.weights_[i].y) = w;
      quad += w * (src[i].x * src[i].x + src[i].y * src[i].y);
    }
    const Eigen::Index nn = Eigen::Index(n);
    const double a0 = sol(nn, d), ax = sol(nn + 1, d) / scale, ay = sol(nn + 2, d) / scale;
    warp.affine_[d] = {a0 - ax * center.x - ay * center.y - log_s2 * quad, ax, ay};
  }
  return warp;
}

CoordGrid evaluate_warp(const TpsWarp& warp, const CoordGrid& grid) {
  CoordGrid out(grid.height(), grid.width());
  RowScratch s;
  s.resize(static_cast<std::size_t>(grid.width()));
  for (int y = 0; y < grid.height(); ++y) {
    auto in = grid.row(y);
    for (int x = 0; x < grid.width(); ++x) {
      s.xs[x] = in[x].x;
      s.ys[x] = in[x].y;
    }
    evaluate_points(warp, s.xs.data(), s.ys.data(), in.size(), {}, s.ox.data(), s.oy.data());
    auto o = out.row(y);
    for (int x = 0; x < grid.width(); ++x) o[x] = {s.ox[x], s.oy[x]};
  }
  return out;
}

CoordGrid evaluate_warp_box(const TpsWarp& warp, const Rect& box, Vec2 shift) {
  CoordGrid out(box.height(), box.width());
  RowScratch s;
  for (int y = 0; y < box.height(); ++y) {
    evaluate_row_run(warp, box.x0, box.x1, box.y0 + y, shift, s, out.row(y).data());
  }
  return out;
}

FlowField displacement_field(const TpsWarp& warp, int height, int width, Vec2 shift) {
  if (height < 1 || width < 1) throw InvalidDimension("displacement_field: empty image");
  const CoordGrid mapped = evaluate_warp_box(warp, {0, 0, width, height}, shift);
  FlowField flow(height, width);
  for (int y = 0; y < height; ++y) {
    auto m = mapped.row(y);
    auto f = flow.row(y);
    for (int x = 0; x < width; ++x) {
      f[x] = {static_cast<float>(m[x].x - x), static_cast<float>(m[x].y - y)};
    }
  }
  return flow;
}

TileCover preimage_tiles(const TpsWarp& warp, const Rect& domain, const Rect& target, Vec2 shift,
                         int tile_size) {
  return preimage_tiles(warp, domain, std::span<const Rect>(&target, 1), shift, tile_size);
}

TileCover preimage_tiles(const TpsWarp& warp, const Rect& domain, std::span<const Rect> targets,
                         Vec2 shift, int tile_size) {
  TileCover cover;
  cover.tile_size = tile_size;
  Rect target;
  for (const Rect& t : targets) target = target.unite(t);
  if (domain.empty() || target.empty()) return cover;
  if (tile_size < 2) throw InvalidParameter("tile size must be >= 2");

  // Lattice through the tile corners (last row/column of pixels included).
  std::vector<int> lx, ly;
  for (int x = domain.x0; x < domain.x1 - 1; x += tile_size) lx.push_back(x);
  lx.push_back(domain.x1 - 1);
  for (int y = domain.y0; y < domain.y1 - 1; y += tile_size) ly.push_back(y);
  ly.push_back(domain.y1 - 1);
  const int nx = int(lx.size()), ny = int(ly.size());

  CoordGrid lattice(ny, nx);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) lattice(j, i) = {double(lx[i]), double(ly[j])};
  }
  CoordGrid mapped = evaluate_warp(warp, lattice);

  // Second differences bound how far the warp strays from the bilinear
  // interpolation of a cell's corners.
  double curvature = 0.0;
  auto second = [](Vec2 a, Vec2 b, Vec2 c) {
    return std::max(std::abs(a.x - 2 * b.x + c.x), std::abs(a.y - 2 * b.y + c.y));
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 1; i + 1 < nx; ++i) {
      curvature = std::max(curvature, second(mapped(j, i - 1), mapped(j, i), mapped(j, i + 1)));
    }
  }
  for (int j = 1; j + 1 < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      curvature = std::max(curvature, second(mapped(j - 1, i), mapped(j, i), mapped(j + 1, i)));
    }
  }
  const double margin = 2.0 + curvature;
  // A bilinear tap at p reads pixels floor(p) and floor(p) + 1, so p matters
  // to rect r when it lies within (r.x0 - 1, r.x1) before the margin.
  auto reaches = [&](const Rect& r, double x0, double x1, double y0, double y1) {
    return x1 >= r.x0 - 1.0 - margin && x0 <= r.x1 + margin && y1 >= r.y0 - 1.0 - margin &&
           y0 <= r.y1 + margin;
  };

  // Cells between lattice lines. A single lattice line (1-pixel domain) still
  // forms one degenerate cell.
  const int cx = std::max(1, nx - 1), cy = std::max(1, ny - 1);
  for (int j = 0; j < cy; ++j) {
    const int j1 = std::min(j + 1, ny - 1);
    const int py0 = ly[j];
    const int py1 = (j + 1 < cy) ? ly[j + 1] : domain.y1;
    int run_start = -1;
    auto flush = [&](int end_i) {
      if (run_start < 0) return;
      const int px0 = lx[run_start];
      const int px1 = (end_i < cx) ? lx[end_i] : domain.x1;
      Rect r{px0, py0, px1, py1};
      cover.tiles.push_back(r);
      cover.bounds = cover.bounds.unite(r);
      run_start = -1;
    };
    for (int i = 0; i < cx; ++i) {
      const int i1 = std::min(i + 1, nx - 1);
      double minx = 1e300, maxx = -1e300, miny = 1e300, maxy = -1e300;
      for (Vec2 p : {mapped(j, i), mapped(j, i1), mapped(j1, i), mapped(j1, i1)}) {
        minx = std::min(minx, p.x + shift.x);
        maxx = std::max(maxx, p.x + shift.x);
        miny = std::min(miny, p.y + shift.y);
        maxy = std::max(maxy, p.y + shift.y);
      }
      bool hit = reaches(target, minx, maxx, miny, maxy);
      if (hit && targets.size() > 1) {
        hit = std::any_of(targets.begin(), targets.end(),
                          [&](const Rect& r) { return reaches(r, minx, maxx, miny, maxy); });
      }
      if (hit && run_start < 0) run_start = i;
      if (!hit) flush(i);
    }
    flush(cx);
  }
  return cover;
}

CoordGrid evaluate_warp_tiles(const TpsWarp& warp, const TileCover& cover, Vec2 shift) {
  const Rect& b = cover.bounds;
  CoordGrid out(b.height(), b.width(), Vec2{kCulledCoord, kCulledCoord});
  RowScratch s;
  for (const Rect& t : cover.tiles) {
    for (int y = t.y0; y < t.y1; ++y) {
      evaluate_row_run(warp, t.x0, t.x1, y, shift, s, &out(y - b.y0, t.x0 - b.x0));
    }
  }
  return out;
}

}  // namespace flowsynth
