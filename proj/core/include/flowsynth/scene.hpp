#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flowsynth/image.hpp"
#include "flowsynth/random.hpp"
#include "flowsynth/segmentation.hpp"
#include "flowsynth/tps.hpp"

namespace flowsynth {

struct IntRange {
  int min = 0;
  int max = 0;
};

struct RealRange {
  double min = 0.0;
  double max = 0.0;
};

enum class LayerKind { kOpaque, kShadow };

/// One occluding layer: a region cut from the source image, deformed by
/// warp1 (psi_1) and then warp0 (psi_0), and placed at p0 in frame 0 and p1
/// in frame 1. Higher depth_rank is closer to the camera.
struct LayerSpec {
  Mask mask;
  LayerKind kind = LayerKind::kOpaque;
  double shadow_opacity = 0.5;
  TpsWarp warp1;
  TpsWarp warp0;
  Offset p0;
  Offset p1;
  int depth_rank = 0;

  Offset delta() const { return {p1.x - p0.x, p1.y - p0.y}; }
};

struct BackgroundSpec {
  TpsWarp warp1;  ///< phi_1
  TpsWarp warp0;  ///< phi_0
  Vec2 shift;     ///< global shift d
};

struct BackgroundPair {
  Image frame0;
  Image frame1;
  FlowField flow;
};

/// Warped texture and matte of one layer in layer coordinates (before
/// placement). Rasters are windows: texture1/matte1 cover box1 and
/// texture0/matte0/flow cover box0; everything outside a window is empty.
/// Textures are premultiplied by their matte (F = M * I) and are left empty
/// for shadow layers.
struct ForegroundLayer {
  Rect box1;
  Image texture1;
  Mask matte1;
  Rect box0;
  Image texture0;
  Mask matte0;
  /// psi_0(x) - x where matte0 > 0, zero elsewhere in the window.
  FlowField flow;
};

struct JitterParams {
  double brightness = 1.0;  ///< multiplicative factor
  double contrast = 1.0;    ///< blend factor towards the mean gray
  double saturation = 1.0;  ///< blend factor towards grayscale
  double hue = 0.0;         ///< hue rotation, fraction of a full turn
  /// Gray level contrast pivots around; negative means "mean luma of the
  /// brightness-adjusted frame", resolved when the jitter is applied.
  double contrast_mean = -1.0;
};

struct AugmentRecord {
  std::optional<JitterParams> jitter0;
  std::optional<JitterParams> jitter1;
  double scale = 1.0;
  bool h_flip = false;
  bool v_flip = false;
  std::optional<Rect> crop;
  std::optional<Rect> erase;
};

struct LayerRecord {
  int granularity = 0;
  std::int64_t target_size = 0;
  int seed_segment = 0;
  std::int64_t mask_pixels = 0;
  LayerKind kind = LayerKind::kOpaque;
  double shadow_opacity = 0.0;
  int grid_size1 = 0;
  int grid_size0 = 0;
  Offset p0;
  Offset p1;
};

struct BackgroundRecord {
  int grid_size1 = 0;
  int grid_size0 = 0;
  Vec2 shift;
};

/// Everything needed to explain how a sample was made.
struct Provenance {
  std::uint64_t seed = 0;
  int source_index = -1;
  int aux_index = -1;
  BackgroundRecord background;
  std::vector<LayerRecord> layers;
  std::optional<AugmentRecord> augment;
};

struct SceneSample {
  Image frame0;
  Image frame1;
  FlowField flow;       ///< frame0 -> frame1
  Mask occlusion;       ///< 1 where frame0 has no visible match in frame1
  Mask shadow_region;   ///< frame0 pixels darkened by a shadow in either frame
  Provenance provenance;
};

struct SynthesisConfig {
  IntRange n_layers{8, 14};
  SizeRange occluder_size{6000, 50000};
  IntRange tps_grid{3, 5};
  double control_noise_sigma = 25.0;
  ControlNoise control_noise = ControlNoise::kGaussian;
  double global_shift_sigma = 30.0;
  double shadow_prob = 0.2;
  RealRange shadow_opacity{0.4, 0.6};
  std::vector<int> component_counts{100, 1000};
  double tps_regularization = kDefaultTpsRegularization;
  int max_redraws = 10;

  /// Throws InvalidParameter on empty ranges or out-of-range probabilities.
  void validate() const;
};

/// out = (1 - hole) * base + hole * aux.
Image inpaint_with_auxiliary(const Image& base, const Mask& hole, const Image& aux);

/// B1 = inpainted(phi_1(x)), B0 = B1(phi_0(x) + d), flow = phi_0(x) - x + d.
BackgroundPair synthesize_background(const Image& inpainted, const BackgroundSpec& spec);

/// F = M * source; F1, M1 sampled at psi_1; F0, M0 sampled from (F1, M1) at
/// psi_0; flow = psi_0(x) - x. Only tiles that can reach the layer are
/// evaluated.
ForegroundLayer synthesize_foreground(const Image& source, const LayerSpec& layer);

enum class LayerFlow {
  kWithPlacementShift,  ///< flow = psi_0(x - p0) - (x - p0) + (p1 - p0)
  kWarpOnly,            ///< omits the placement shift; kept for regression tests
};

/// Stacks the layers (sorted by ascending depth_rank, last on top) over the
/// background pair and derives the flow, occlusion and shadow masks.
SceneSample composite_scene(const BackgroundPair& bg, std::span<const LayerSpec> specs,
                            std::span<const ForegroundLayer> layers,
                            LayerFlow layer_flow = LayerFlow::kWithPlacementShift);

// Per-sample parameter draws, in the order generate_sample consumes them.
int draw_layer_count(const SynthesisConfig& config, Rng& rng);

struct BackgroundDraw {
  int grid_size1 = 0;
  int grid_size0 = 0;
  Vec2 shift;
};
BackgroundDraw draw_background(const SynthesisConfig& config, Rng& rng);

struct LayerDraw {
  LayerKind kind = LayerKind::kOpaque;
  double shadow_opacity = 0.0;
  int grid_size1 = 0;
  int grid_size0 = 0;
  Vec2 raw_delta;  ///< continuous draw; placement uses the rounded value
  Offset delta;
};
LayerDraw draw_layer(const SynthesisConfig& config, Rng& rng);

/// Full pipeline for one sample; a pure function of its inputs and seed.
SceneSample generate_sample(const Image& source, const Image& aux, const SegmentationStack& stack,
                            const SynthesisConfig& config, std::uint64_t seed);

}  // namespace flowsynth
