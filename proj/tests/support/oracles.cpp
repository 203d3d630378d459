#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <unistd.h>

namespace flowsynth::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

double bilinear_ref(const Image& img, double x, double y, int c, Border border) {
  const int w = img.width(), h = img.height();
  auto tap = [&](int yy, int xx) -> double {
    if (border == Border::kClamp) {
      xx = std::clamp(xx, 0, w - 1);
      yy = std::clamp(yy, 0, h - 1);
    } else if (xx < 0 || xx >= w || yy < 0 || yy >= h) {
      return 0.0;
    }
    return img.at(yy, xx, c);
  };
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  const int x0 = int(fx), y0 = int(fy);
  return (1 - ax) * (1 - ay) * tap(y0, x0) + ax * (1 - ay) * tap(y0, x0 + 1) +
         (1 - ax) * ay * tap(y0 + 1, x0) + ax * ay * tap(y0 + 1, x0 + 1);
}

Vec2 tps_ref(const TpsWarp& warp, Vec2 p) {
  const auto& a = warp.affine();
  long double ox = a[0][0] + a[0][1] * (long double)p.x + a[0][2] * (long double)p.y;
  long double oy = a[1][0] + a[1][1] * (long double)p.x + a[1][2] * (long double)p.y;
  const auto& src = warp.control().source_points;
  const auto w = warp.kernel_weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const long double dx = p.x - src[i].x, dy = p.y - src[i].y;
    const long double r2 = dx * dx + dy * dy;
    const long double u = r2 > 0 ? r2 * std::log(r2) : 0.0L;
    ox += w[i].x * u;
    oy += w[i].y * u;
  }
  return {double(ox), double(oy)};
}

WarpBackStats warp_back_ref(const SceneSample& s) {
  std::vector<double> d;
  const int nc = s.frame0.channels();
  for (int y = 0; y < s.frame0.height(); ++y) {
    for (int x = 0; x < s.frame0.width(); ++x) {
      if (s.occlusion(y, x) > 0 || s.shadow_region(y, x) > 0) continue;
      const FlowVec f = s.flow(y, x);
      double sum = 0.0;
      for (int c = 0; c < nc; ++c) {
        const double v = std::clamp(bilinear_ref(s.frame1, x + double(f.u), y + double(f.v), c, Border::kClamp), 0.0, 1.0);
        sum += std::abs(s.frame0.at(y, x, c) - v);
      }
      d.push_back(sum / nc);
    }
  }
  WarpBackStats st;
  st.n = static_cast<std::int64_t>(d.size());
  if (d.empty()) return st;
  for (double v : d) st.mean += v;
  st.mean /= double(d.size());
  std::sort(d.begin(), d.end());
  st.p99 = d[static_cast<std::size_t>(std::ceil(0.99 * double(d.size()))) - 1];
  return st;
}

double epe_ref(const FlowField& pred, const FlowField& gt, const Mask& valid) {
  double sum = 0.0;
  long n = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (valid(y, x) < 0.5f) continue;
      const double du = double(pred(y, x).u) - gt(y, x).u, dv = double(pred(y, x).v) - gt(y, x).v;
      sum += std::sqrt(du * du + dv * dv);
      ++n;
    }
  }
  return sum / double(n);
}

double f1_ref(const FlowField& pred, const FlowField& gt, const Mask& valid, bool conjunction) {
  long bad = 0, n = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (valid(y, x) < 0.5f) continue;
      const double du = double(pred(y, x).u) - gt(y, x).u, dv = double(pred(y, x).v) - gt(y, x).v;
      const double err = std::sqrt(du * du + dv * dv);
      const double mag = std::sqrt(double(gt(y, x).u) * gt(y, x).u + double(gt(y, x).v) * gt(y, x).v);
      const bool a = err > 3.0, b = err > 0.05 * mag;
      bad += conjunction ? (a && b) : (a || b);
      ++n;
    }
  }
  return 100.0 * double(bad) / double(n);
}

FlowField random_flow(int height, int width, double max_abs, Rng& rng) {
  std::uniform_real_distribution<float> d(float(-max_abs), float(max_abs));
  FlowField f(height, width);
  for (FlowVec& v : f.data()) v = {d(rng), d(rng)};
  return f;
}

Image random_image(int height, int width, int channels, Rng& rng) {
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  Image img(height, width, channels);
  for (float& v : img.data()) v = d(rng);
  return img;
}

SceneSample constant_flow_sample(const Image& img, FlowVec flow) {
  SceneSample s;
  s.frame0 = img;
  s.frame1 = img;
  s.flow = FlowField(img.height(), img.width(), flow);
  s.occlusion = Mask(img.height(), img.width(), 0.0f);
  s.shadow_region = Mask(img.height(), img.width(), 0.0f);
  return s;
}

void write_procedural_corpus(const fs::path& dir, int n, int height, int width, std::uint64_t seed) {
  fs::create_directories(dir);
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%03d.png", i);
    write_png(procedural_texture(height, width, seed + std::uint64_t(i)), dir / name);
  }
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> list_files(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace flowsynth::testing
