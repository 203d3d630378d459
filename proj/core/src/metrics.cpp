#include "flowsynth/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace flowsynth {

namespace {

void check_shapes(const FlowField& pred, const FlowField& gt, const Mask& valid) {
  if (!pred.same_shape(gt.height(), gt.width()) || !valid.same_shape(gt.height(), gt.width())) {
    throw InvalidDimension("flow evaluation: pred, gt and valid must share dimensions");
  }
}

double endpoint_error(FlowVec p, FlowVec g) {
  return std::hypot(double(p.u) - g.u, double(p.v) - g.v);
}

bool is_outlier(double err, FlowVec g, OutlierRule rule) {
  const double rel = 0.05 * std::hypot(double(g.u), double(g.v));
  return rule == OutlierRule::kAnd ? (err > 3.0 && err > rel) : (err > 3.0 || err > rel);
}

struct Sums {
  double epe = 0.0;
  std::int64_t outliers = 0;
  std::int64_t n = 0;
};

Sums accumulate(const FlowField& pred, const FlowField& gt, const Mask& valid, OutlierRule rule) {
  check_shapes(pred, gt, valid);
  Sums s;
  auto p = pred.data(), g = gt.data();
  auto v = valid.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!mask_set(v[i])) continue;
    const double err = endpoint_error(p[i], g[i]);
    s.epe += err;
    s.outliers += is_outlier(err, g[i], rule);
    ++s.n;
  }
  return s;
}

}  // namespace

double epe(const FlowField& pred, const FlowField& gt, const Mask& valid) {
  const Sums s = accumulate(pred, gt, valid, OutlierRule::kAnd);
  if (s.n == 0) throw EmptyEvaluation("epe: no valid pixels");
  return s.epe / double(s.n);
}

double f1_all(const FlowField& pred, const FlowField& gt, const Mask& valid, OutlierRule rule) {
  const Sums s = accumulate(pred, gt, valid, rule);
  if (s.n == 0) throw EmptyEvaluation("f1_all: no valid pixels");
  return 100.0 * double(s.outliers) / double(s.n);
}

void EvalAccumulator::add(const std::string& id, const FlowField& pred, const FlowField& gt,
                          const Mask& valid) {
  const Sums s = accumulate(pred, gt, valid, rule_);
  epe_sum_ += s.epe;
  outliers_ += s.outliers;
  n_valid_ += s.n;
  SampleEval e;
  e.id = id;
  e.n_valid = s.n;
  if (s.n > 0) {
    e.epe = s.epe / double(s.n);
    e.f1_all = 100.0 * double(s.outliers) / double(s.n);
  }
  samples_.push_back(std::move(e));
}

void EvalAccumulator::merge(const EvalAccumulator& other) {
  epe_sum_ += other.epe_sum_;
  outliers_ += other.outliers_;
  n_valid_ += other.n_valid_;
  samples_.insert(samples_.end(), other.samples_.begin(), other.samples_.end());
}

EvalReport EvalAccumulator::report() const {
  if (n_valid_ == 0) throw EmptyEvaluation("evaluation: no valid pixels in any sample");
  EvalReport r;
  r.epe_mean = epe_sum_ / double(n_valid_);
  r.f1_all = 100.0 * double(outliers_) / double(n_valid_);
  r.n_valid = n_valid_;
  r.samples = samples_;
  std::sort(r.samples.begin(), r.samples.end(),
            [](const SampleEval& a, const SampleEval& b) { return a.id < b.id; });
  return r;
}

AuditReport photometric_audit(const SceneSample& sample, const AuditThresholds& thresholds) {
  const int h = sample.frame0.height(), w = sample.frame0.width();
  if (!sample.frame1.same_shape(sample.frame0) || !sample.flow.same_shape(h, w) ||
      !sample.occlusion.same_shape(h, w) || !sample.shadow_region.same_shape(h, w)) {
    throw InvalidDimension("photometric_audit: sample rasters must share dimensions");
  }
  CoordGrid targets(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const FlowVec f = sample.flow(y, x);
      targets(y, x) = {x + double(f.u), y + double(f.v)};
    }
  }
  const Image warped = bilinear_sample(sample.frame1, targets);

  AuditReport r;
  const int nc = sample.frame0.channels();
  std::vector<float> diffs;
  diffs.reserve(std::size_t(h) * w);
  std::int64_t occluded = 0, shadowed = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const FlowVec f = sample.flow(y, x);
      const double mag = std::hypot(double(f.u), double(f.v));
      const auto bin = std::upper_bound(kFlowHistogramEdges.begin(), kFlowHistogramEdges.end(), mag) -
                       kFlowHistogramEdges.begin();
      ++r.flow_histogram[bin];
      const bool occ = sample.occlusion(y, x) > 0.0f;
      const bool shd = sample.shadow_region(y, x) > 0.0f;
      occluded += occ;
      shadowed += shd;
      if (occ || shd) continue;
      const float* a = sample.frame0.pixel(y, x);
      const float* b = warped.pixel(y, x);
      float d = 0.0f;
      for (int c = 0; c < nc; ++c) d += std::abs(a[c] - b[c]);
      diffs.push_back(d / float(nc));
    }
  }
  const double total = double(h) * w;
  r.occlusion_fraction = total > 0 ? occluded / total : 0.0;
  r.shadow_fraction = total > 0 ? shadowed / total : 0.0;
  r.n_checked = static_cast<std::int64_t>(diffs.size());
  if (diffs.empty()) {
    // Nothing left to check; vacuous but not a failure of exactness.
    r.passed = true;
    return r;
  }
  double sum = 0.0;
  for (float d : diffs) sum += d;
  r.mean_abs_diff = sum / double(diffs.size());
  // Nearest-rank percentiles.
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * double(diffs.size()))) - 1;
    std::nth_element(diffs.begin(), diffs.begin() + k, diffs.end());
    return double(diffs[k]);
  };
  r.p50 = rank(0.5);
  r.p99 = rank(0.99);
  r.max_abs_diff = *std::max_element(diffs.begin(), diffs.end());
  r.passed = r.mean_abs_diff <= thresholds.max_mean && r.p99 <= thresholds.max_p99;
  return r;
}

}  // namespace flowsynth
