#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowsynth/image.hpp"
#include "flowsynth/scene.hpp"

namespace flowsynth {

struct Size2 {
  int width = 0;
  int height = 0;

  friend bool operator==(const Size2&, const Size2&) = default;
};

struct CorpusImage {
  std::filesystem::path path;
  Image image;  ///< RGB
};

struct SkippedImage {
  std::filesystem::path path;
  std::string reason;
};

struct ImageCorpus {
  std::vector<CorpusImage> images;  ///< lexicographic by path
  std::vector<SkippedImage> skipped;
};

/// Loads every decodable raster directly inside `directory`. Images narrower
/// or shorter than `min_size` are skipped. With `target_size`, each image is
/// scaled to cover the target and center-cropped to it exactly.
/// Throws IoError if the directory cannot be listed and EmptyCorpus if
/// nothing usable is left.
ImageCorpus ingest_images(const std::filesystem::path& directory, Size2 min_size = {},
                          std::optional<Size2> target_size = std::nullopt);

/// Scale-to-cover then center crop.
Image fit_to_size(const Image& img, Size2 target);

// 8-bit PNG. Values are rounded from [0, 1]; gray images are written as gray.
// Compression level 1 trades a larger file for a much faster encode.
inline constexpr int kPngCompression = 1;
std::string encode_png(const Image& img);
void write_png(const Image& img, const std::filesystem::path& path);
/// Always returns 3 channels (RGB).
Image read_png(const std::filesystem::path& path);
void write_mask_png(const Mask& mask, const std::filesystem::path& path);
Mask read_mask_png(const std::filesystem::path& path);

// Middlebury .flo: float32 magic 202021.25, int32 width, int32 height, then
// (u, v) float32 pairs row-major. All little-endian.
inline constexpr float kFloMagic = 202021.25f;
std::string encode_flo(const FlowField& flow);
FlowField decode_flo(std::string_view bytes);
void write_flo(const FlowField& flow, const std::filesystem::path& path);
FlowField read_flo(const std::filesystem::path& path);

// KITTI 16-bit PNG flow: channel values round(c * 64 + 32768) for u and v,
// third channel 1 where valid. Invalid pixels store zero flow.
inline constexpr double kKittiScale = 64.0;
inline constexpr double kKittiMaxFlow = 512.0;
struct KittiFlow {
  FlowField flow;
  Mask valid;
};
/// Throws EncodeError if a valid pixel is non-finite or has |u| or |v| >= 512.
void write_kitti_png(const FlowField& flow, const Mask& valid, const std::filesystem::path& path);
KittiFlow read_kitti_png(const std::filesystem::path& path);

/// Color wheel rendering: hue from the flow direction, saturation from the
/// magnitude relative to `max_magnitude`, value dimmed beyond it. Zero flow is
/// white. Without `max_magnitude` the 99th percentile magnitude is used.
Image colorize_flow(const FlowField& flow, std::optional<double> max_magnitude = std::nullopt);

struct OutputFormats {
  bool flo = true;
  bool kitti = false;
};

inline constexpr int kManifestSchemaVersion = 1;

/// One manifest line. Paths are relative to the dataset root.
struct SampleRecord {
  std::string id;
  std::string frame0;
  std::string frame1;
  std::string flow_flo;    ///< empty if not written
  std::string flow_kitti;  ///< empty if not written
  std::string occlusion;
  std::string shadow;
  int width = 0;
  int height = 0;
  std::string generator;
  Provenance provenance;
};

std::string sample_id(std::int64_t index);

/// "flowsynth <version>", stored in every record.
std::string generator_version();

/// Writes the sample's files under `root` (each via temp file and rename).
/// In the KITTI file, pixels whose flow is not encodable are marked invalid.
SampleRecord write_sample(const SceneSample& sample, const std::filesystem::path& root,
                          const std::string& id, const OutputFormats& formats = {});

/// Loads a sample back. Flow comes from the .flo file when present.
SceneSample read_sample(const SampleRecord& record, const std::filesystem::path& root);

std::string record_to_json(const SampleRecord& record);
SampleRecord record_from_json(const std::string& line);

inline constexpr const char* kManifestName = "manifest.jsonl";

/// Appends records to <root>/manifest.jsonl, one JSON object per line,
/// after a header line carrying the schema version and `config_json`. Lines
/// are flushed as they are added; a record is only added once its files are
/// in place. finish() rewrites the file sorted by id. Thread-safe.
class ManifestWriter {
 public:
  ManifestWriter(const std::filesystem::path& root, const std::string& config_json);
  ~ManifestWriter();
  ManifestWriter(const ManifestWriter&) = delete;
  ManifestWriter& operator=(const ManifestWriter&) = delete;

  void add(const SampleRecord& record);
  void finish();
  std::size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct Manifest {
  int schema_version = 0;
  std::string config_json;
  std::vector<SampleRecord> records;
};

/// Parses a manifest; a trailing line without a newline (interrupted write)
/// is ignored. Throws FormatError on malformed lines and IoError if missing.
Manifest read_manifest(const std::filesystem::path& path);

/// Problems found by validate_manifest, one message each.
struct ManifestCheck {
  std::size_t n_records = 0;
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Checks that every referenced file exists and has the recorded dimensions.
ManifestCheck validate_manifest(const std::filesystem::path& path);

}  // namespace flowsynth
