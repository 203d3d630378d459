#pragma once

// Independent scalar reimplementations used as test oracles. They trade speed
// for obviousness and share no code with the library beyond its containers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flowsynth/flowsynth.hpp"

namespace flowsynth::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "flowsynth");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Textbook bilinear interpolation of channel c at (x, y), in double.
double bilinear_ref(const Image& img, double x, double y, int c, Border border);

/// Direct evaluation of affine + sum w_i U(|p - s_i|) with std::log in long
/// double.
Vec2 tps_ref(const TpsWarp& warp, Vec2 p);

struct WarpBackStats {
  double mean = 0.0;
  double p99 = 0.0;
  std::int64_t n = 0;
};

/// frame0 vs frame1 pulled back through the flow (clamped bilinear), on
/// pixels with neither occlusion nor shadow set. Nearest-rank p99.
WarpBackStats warp_back_ref(const SceneSample& s);

double epe_ref(const FlowField& pred, const FlowField& gt, const Mask& valid);
double f1_ref(const FlowField& pred, const FlowField& gt, const Mask& valid, bool conjunction);

FlowField random_flow(int height, int width, double max_abs, Rng& rng);
Image random_image(int height, int width, int channels, Rng& rng);

/// Sample whose frames are `img`, with constant flow and empty masks.
SceneSample constant_flow_sample(const Image& img, FlowVec flow);

/// Writes n procedural textures as PNG files img_000.png ... into dir.
void write_procedural_corpus(const std::filesystem::path& dir, int n, int height, int width,
                             std::uint64_t seed = 1);

std::string read_bytes(const std::filesystem::path& p);

/// Relative paths of all regular files under root, sorted.
std::vector<std::string> list_files(const std::filesystem::path& root);

}  // namespace flowsynth::testing
