#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowsynth/flowsynth.hpp"

namespace flowsynth::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kDataError = 2, kIoError = 3 };

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path output;
  std::int64_t count = 1;
  std::uint64_t seed = 0;
  int workers = 1;
  /// Images are fit to this size; unset requires a corpus of equal sizes.
  std::optional<Size2> size;
  Size2 min_size;
  SynthesisConfig synthesis;
  SlicParams slic;
  bool augment = true;
  AugmentConfig augmentation;
  OutputFormats formats;
  std::filesystem::path cache_dir;
  AuditThresholds audit;

  /// Throws InvalidParameter on bad counts or nested config errors.
  void validate() const;
};

/// Everything that shapes the output bytes. Worker count and output path are
/// left out so the snapshot, like the data, does not depend on them.
std::string config_snapshot(const RunConfig& config);

/// Overlays the keys present in a JSON config document onto `config`.
/// Unknown keys are an error.
void apply_config_json(RunConfig& config, const std::string& json_text);

struct Progress {
  std::int64_t done = 0;
  std::int64_t total = 0;
  double seconds = 0.0;
};
using ProgressFn = std::function<void(const Progress&)>;

struct StageTimes {
  double segmentation = 0.0;  ///< summed over segmented images
  double synthesis = 0.0;
  double augmentation = 0.0;
  double writing = 0.0;
};

struct GenerateResult {
  std::int64_t written = 0;
  std::vector<std::string> failures;  ///< "<id>: <message>"
  int exit_code = kSuccess;
  double seconds = 0.0;
  std::int64_t images_segmented = 0;
  StageTimes stages;  ///< summed over workers
};

/// Per-sample draws: which corpus images feed sample `index`.
struct SourcePick {
  int source = 0;
  int aux = 0;
};
SourcePick pick_sources(std::uint64_t sample_seed, int corpus_size);

/// Seed of sample `index`; the synthesis stream of that sample.
std::uint64_t sample_seed(std::uint64_t global_seed, std::int64_t index);

/// Ingests config.input, then generates, augments and writes config.count
/// samples with config.workers threads.
GenerateResult run_generate(const RunConfig& config, const ProgressFn& progress = {});

/// Same, over an already loaded corpus.
GenerateResult run_generate(const RunConfig& config, const ImageCorpus& corpus,
                            const ProgressFn& progress = {});

struct ValidateResult {
  std::size_t n_samples = 0;
  std::vector<std::string> failures;  ///< "<id>: <reason>"
  std::vector<std::pair<std::string, AuditReport>> audits;
  int exit_code = kSuccess;
};

/// File checks plus the photometric audit of every sample (jitter undone via
/// photometric_reference). Throws EmptyCorpus on a manifest without samples.
ValidateResult run_validate(const std::filesystem::path& manifest, const AuditThresholds& thresholds,
                            int workers = 1);

struct EvalInputs {
  std::filesystem::path pred_dir;
  std::filesystem::path gt_dir;
  OutlierRule rule = OutlierRule::kAnd;
};

struct EvalResult {
  std::optional<EvalReport> report;
  std::vector<std::string> unmatched;  ///< ground truth files without a prediction
  int exit_code = kSuccess;
};

/// Pairs ground-truth flow files (.flo, or 16-bit KITTI .png) with the
/// prediction of the same stem. KITTI validity is honored; .flo ground truth
/// is valid everywhere.
EvalResult run_eval(const EvalInputs& inputs);

/// Horizontal montage frame0 | frame1 | colorized flow.
Image make_preview(const SceneSample& sample);
void run_preview(const std::filesystem::path& manifest, const std::string& id,
                 const std::filesystem::path& out);

struct BenchResult {
  std::int64_t samples = 0;
  int workers = 1;
  double seconds = 0.0;
  double samples_per_second_per_worker = 0.0;
  double segmentation_seconds_per_image = 0.0;
  StageTimes per_sample;
};

/// Generates `config.count` full samples (synthesis, augmentation, encoding
/// and writing) into a scratch directory and reports the steady-state rate.
/// Segmentation is done up front and reported per image. Without an input
/// directory, procedural textures at config.size (default 1280x544) are used.
BenchResult run_bench(RunConfig config, int n_procedural_images = 4);

std::string to_json(const ValidateResult& r);
std::string to_json(const EvalReport& r);
std::string to_json(const BenchResult& r);

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

}  // namespace flowsynth::cli
