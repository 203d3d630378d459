#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "flowsynth/image.hpp"
#include "flowsynth/scene.hpp"

namespace flowsynth {

// A pixel is evaluated where valid >= 0.5.

/// Mean endpoint error over valid pixels.
double epe(const FlowField& pred, const FlowField& gt, const Mask& valid);

enum class OutlierRule {
  kAnd,  ///< error > 3 px and > 5% of |gt| (KITTI devkit)
  kOr,   ///< error > 3 px or > 5% of |gt|
};

/// Percentage of valid pixels that are outliers under `rule`.
double f1_all(const FlowField& pred, const FlowField& gt, const Mask& valid,
              OutlierRule rule = OutlierRule::kAnd);

struct SampleEval {
  std::string id;
  double epe = 0.0;
  double f1_all = 0.0;
  std::int64_t n_valid = 0;
};

struct EvalReport {
  double epe_mean = 0.0;  ///< pooled over all valid pixels
  double f1_all = 0.0;    ///< pooled over all valid pixels
  std::int64_t n_valid = 0;
  std::vector<SampleEval> samples;
};

/// Sums that make a report; merging accumulators is order-independent.
class EvalAccumulator {
 public:
  explicit EvalAccumulator(OutlierRule rule = OutlierRule::kAnd) : rule_(rule) {}

  /// Adds one sample. Samples with no valid pixels contribute nothing to the
  /// pooled values but still appear in the breakdown.
  void add(const std::string& id, const FlowField& pred, const FlowField& gt, const Mask& valid);
  void merge(const EvalAccumulator& other);
  /// Throws EmptyEvaluation when no valid pixel was seen.
  EvalReport report() const;

 private:
  OutlierRule rule_;
  double epe_sum_ = 0.0;
  std::int64_t outliers_ = 0;
  std::int64_t n_valid_ = 0;
  std::vector<SampleEval> samples_;
};

struct AuditThresholds {
  double max_mean = 0.02;
  double max_p99 = 0.1;
};

struct AuditReport {
  double mean_abs_diff = 0.0;
  double p50 = 0.0;
  double p99 = 0.0;
  double max_abs_diff = 0.0;
  std::int64_t n_checked = 0;
  double occlusion_fraction = 0.0;
  double shadow_fraction = 0.0;
  /// Flow magnitude histogram with upper edges kFlowHistogramEdges (last bin
  /// is open).
  std::array<std::int64_t, 9> flow_histogram{};
  bool passed = false;
};

inline constexpr std::array<double, 8> kFlowHistogramEdges{1, 2, 4, 8, 16, 32, 64, 128};

/// Backward-warps frame1 by the flow and compares with frame0 on pixels that
/// are neither occluded nor shadowed. The per-pixel difference is the mean
/// over channels of |frame0 - warped frame1|.
AuditReport photometric_audit(const SceneSample& sample, const AuditThresholds& thresholds = {});

}  // namespace flowsynth
