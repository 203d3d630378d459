#pragma once

// Augmentations take the sample by value; move it in to avoid a copy.

#include <array>

#include "flowsynth/image.hpp"
#include "flowsynth/random.hpp"
#include "flowsynth/scene.hpp"

namespace flowsynth {

struct AugmentConfig {
  // Color jitter. Each factor is drawn from [1 - x, 1 + x]; hue from
  // [-hue, hue] in fractions of a full turn.
  double jitter_prob = 1.0;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.5 / 3.14159265358979323846;
  /// Draw independent parameters for the two frames.
  bool asymmetric_jitter = true;

  // Scale factor is log-uniform in scale_range, applied with scale_prob. It is
  // raised when needed so the crop still fits.
  double scale_prob = 0.8;
  RealRange scale_range{0.87, 1.52};

  double h_flip_prob = 0.5;
  double v_flip_prob = 0.1;

  /// Output size (height, width) after the random crop; 0 keeps the input
  /// size of that axis.
  int crop_height = 0;
  int crop_width = 0;

  double erase_prob = 0.5;
  /// Erased rectangle area as a fraction of the frame.
  RealRange erase_area{0.01, 0.04};
  /// Mark frame-0 pixels whose correspondence lands in the erased rectangle
  /// as occluded.
  bool erase_marks_occluded = true;

  /// Throws InvalidParameter on probabilities outside [0, 1], jitter strengths
  /// outside [0, 1) (the map must stay invertible) or empty ranges.
  void validate() const;
};

JitterParams draw_jitter(const AugmentConfig& config, Rng& rng);

/// out = matrix * in + offset per pixel (row-major 3x3). Gray images only use
/// matrix[0] and offset[0].
struct ColorAffine {
  std::array<double, 9> matrix{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> offset{};
};

/// Fills in contrast_mean from `img` if it is unset.
JitterParams resolve_jitter(const Image& img, JitterParams params);

/// Brightness, contrast, saturation and hue composed into one affine map.
/// Saturation and hue are skipped for gray images. Needs a resolved
/// contrast_mean.
ColorAffine jitter_transform(const JitterParams& params, int channels);
ColorAffine inverse(const ColorAffine& t);

/// Applies the composed jitter map and clamps to [0, 1] once at the end, so
/// the map can be undone wherever nothing clipped.
Image apply_jitter(Image img, const JitterParams& params);

/// Photometric jitter of each frame; geometry and masks are untouched.
SceneSample color_jitter(SceneSample sample, const JitterParams& frame0, const JitterParams& frame1);

/// Resamples every raster by `factor` (pixel-center aligned) and multiplies
/// the flow by it. A pixel is occluded (or shadowed) if any source tap was.
SceneSample scale(SceneSample sample, double factor);

/// Mirrors all rasters; horizontal negates u, vertical negates v.
SceneSample flip(SceneSample sample, bool horizontal, bool vertical);

/// Crops every raster to `window`; pixels whose target leaves the window
/// become occluded.
SceneSample crop(SceneSample sample, const Rect& window);

/// Replaces `rect` of frame 1 with frame 1's mean color. With
/// `mark_occluded`, frame-0 pixels whose bilinear target footprint touches the
/// rectangle become occluded.
SceneSample erase(SceneSample sample, const Rect& rect, bool mark_occluded = true);

/// View of an augmented sample for the photometric audit: recorded jitter is
/// inverted on both frames, and pixels that clipped (dilated by the
/// resampling reach) or whose target footprint touches a clipped or erased
/// frame-1 pixel are added to shadow_region so the audit skips them.
SceneSample photometric_reference(const SceneSample& sample);

/// jitter -> scale -> flip -> crop -> erase, each gated by its probability.
/// The draws are recorded in the sample's provenance.
SceneSample augment(SceneSample sample, const AugmentConfig& config, Rng& rng);

}  // namespace flowsynth
