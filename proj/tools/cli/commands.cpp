#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

#include <json.hpp>

namespace flowsynth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---- config JSON ----------------------------------------------------------

json size_json(Size2 s) { return json::array({s.width, s.height}); }

Size2 size_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidParameter("sizes are [width, height]");
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

template <typename R>
json range_json(const R& r) {
  return json::array({r.min, r.max});
}

template <typename R>
R range_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidParameter("ranges are [min, max]");
  R r;
  r.min = j.at(0).get<decltype(r.min)>();
  r.max = j.at(1).get<decltype(r.max)>();
  return r;
}

json synthesis_json(const SynthesisConfig& s) {
  return {{"n_layers", range_json(s.n_layers)},
          {"occluder_size", range_json(s.occluder_size)},
          {"tps_grid", range_json(s.tps_grid)},
          {"control_noise_sigma", s.control_noise_sigma},
          {"control_noise", s.control_noise == ControlNoise::kUniform ? "uniform" : "gaussian"},
          {"global_shift_sigma", s.global_shift_sigma},
          {"shadow_prob", s.shadow_prob},
          {"shadow_opacity", range_json(s.shadow_opacity)},
          {"component_counts", s.component_counts},
          {"tps_regularization", s.tps_regularization},
          {"max_redraws", s.max_redraws}};
}

json augmentation_json(const AugmentConfig& a) {
  return {{"jitter_prob", a.jitter_prob},
          {"brightness", a.brightness},
          {"contrast", a.contrast},
          {"saturation", a.saturation},
          {"hue", a.hue},
          {"asymmetric_jitter", a.asymmetric_jitter},
          {"scale_prob", a.scale_prob},
          {"scale_range", range_json(a.scale_range)},
          {"h_flip_prob", a.h_flip_prob},
          {"v_flip_prob", a.v_flip_prob},
          {"crop", size_json({a.crop_width, a.crop_height})},
          {"erase_prob", a.erase_prob},
          {"erase_area", range_json(a.erase_area)},
          {"erase_marks_occluded", a.erase_marks_occluded}};
}

// Calls fn(key, value) for every key and rejects keys not in `known`.
template <typename Fn>
void for_keys(const json& obj, const char* section, std::initializer_list<const char*> known, Fn&& fn) {
  if (!obj.is_object()) throw InvalidParameter(std::string(section) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw InvalidParameter("unknown config key " + std::string(section) + "." + key);
    }
    fn(key, value);
  }
}

void apply_synthesis(SynthesisConfig& s, const json& j) {
  for_keys(j, "synthesis",
           {"n_layers", "occluder_size", "tps_grid", "control_noise_sigma", "control_noise",
            "global_shift_sigma", "shadow_prob", "shadow_opacity", "component_counts",
            "tps_regularization", "max_redraws"},
           [&](const std::string& k, const json& v) {
             if (k == "n_layers") s.n_layers = range_from<IntRange>(v);
             if (k == "occluder_size") s.occluder_size = range_from<SizeRange>(v);
             if (k == "tps_grid") s.tps_grid = range_from<IntRange>(v);
             if (k == "control_noise_sigma") s.control_noise_sigma = v.get<double>();
             if (k == "control_noise") {
               const auto name = v.get<std::string>();
               if (name != "gaussian" && name != "uniform") {
                 throw InvalidParameter("control_noise is \"gaussian\" or \"uniform\"");
               }
               s.control_noise = name == "uniform" ? ControlNoise::kUniform : ControlNoise::kGaussian;
             }
             if (k == "global_shift_sigma") s.global_shift_sigma = v.get<double>();
             if (k == "shadow_prob") s.shadow_prob = v.get<double>();
             if (k == "shadow_opacity") s.shadow_opacity = range_from<RealRange>(v);
             if (k == "component_counts") s.component_counts = v.get<std::vector<int>>();
             if (k == "tps_regularization") s.tps_regularization = v.get<double>();
             if (k == "max_redraws") s.max_redraws = v.get<int>();
           });
}

void apply_augmentation(AugmentConfig& a, const json& j) {
  for_keys(j, "augmentation",
           {"jitter_prob", "brightness", "contrast", "saturation", "hue", "asymmetric_jitter",
            "scale_prob", "scale_range", "h_flip_prob", "v_flip_prob", "crop", "erase_prob",
            "erase_area", "erase_marks_occluded"},
           [&](const std::string& k, const json& v) {
             if (k == "jitter_prob") a.jitter_prob = v.get<double>();
             if (k == "brightness") a.brightness = v.get<double>();
             if (k == "contrast") a.contrast = v.get<double>();
             if (k == "saturation") a.saturation = v.get<double>();
             if (k == "hue") a.hue = v.get<double>();
             if (k == "asymmetric_jitter") a.asymmetric_jitter = v.get<bool>();
             if (k == "scale_prob") a.scale_prob = v.get<double>();
             if (k == "scale_range") a.scale_range = range_from<RealRange>(v);
             if (k == "h_flip_prob") a.h_flip_prob = v.get<double>();
             if (k == "v_flip_prob") a.v_flip_prob = v.get<double>();
             if (k == "crop") {
               const Size2 c = size_from(v);
               a.crop_width = c.width;
               a.crop_height = c.height;
             }
             if (k == "erase_prob") a.erase_prob = v.get<double>();
             if (k == "erase_area") a.erase_area = range_from<RealRange>(v);
             if (k == "erase_marks_occluded") a.erase_marks_occluded = v.get<bool>();
           });
}

json audit_json(const AuditReport& r) {
  return {{"passed", r.passed},
          {"mean_abs_diff", r.mean_abs_diff},
          {"p50", r.p50},
          {"p99", r.p99},
          {"max_abs_diff", r.max_abs_diff},
          {"n_checked", r.n_checked},
          {"occlusion_fraction", r.occlusion_fraction},
          {"shadow_fraction", r.shadow_fraction},
          {"flow_histogram", r.flow_histogram}};
}

json stages_json(const StageTimes& s) {
  return {{"segmentation", s.segmentation},
          {"synthesis", s.synthesis},
          {"augmentation", s.augmentation},
          {"writing", s.writing}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

// ---- generation -----------------------------------------------------------

// Segmentation stacks computed on first use, once per corpus image.
class Segmenter {
 public:
  Segmenter(const ImageCorpus& corpus, const RunConfig& config)
      : corpus_(corpus), config_(config), stacks_(corpus.images.size()),
        once_(std::make_unique<std::once_flag[]>(corpus.images.size())) {}

  const SegmentationStack& get(int i) {
    std::call_once(once_[i], [&] {
      const auto t0 = Clock::now();
      stacks_[i] = build_segmentation_stack(corpus_.images[i].image, config_.synthesis.component_counts,
                                            config_.slic, config_.cache_dir);
      const double dt = since(t0);
      std::lock_guard lock(mu_);
      seconds_ += dt;
      ++count_;
    });
    return stacks_[i];
  }

  double seconds() const {
    std::lock_guard lock(mu_);
    return seconds_;
  }
  std::int64_t count() const {
    std::lock_guard lock(mu_);
    return count_;
  }

 private:
  const ImageCorpus& corpus_;
  const RunConfig& config_;
  std::vector<SegmentationStack> stacks_;
  std::unique_ptr<std::once_flag[]> once_;
  mutable std::mutex mu_;
  double seconds_ = 0.0;
  std::int64_t count_ = 0;
};

void check_corpus(const ImageCorpus& corpus) {
  if (corpus.images.size() < 2) {
    throw EmptyCorpus("empty corpus: need at least two usable images (source and auxiliary), found " +
                      std::to_string(corpus.images.size()));
  }
  const Image& first = corpus.images.front().image;
  for (const CorpusImage& ci : corpus.images) {
    if (!ci.image.same_shape(first)) {
      throw InvalidDimension("corpus images differ in size (" + ci.path.string() +
                             "); set a target size");
    }
  }
}

GenerateResult generate_impl(const RunConfig& config, const ImageCorpus& corpus, Segmenter& segmenter,
                             const ProgressFn& progress) {
  config.validate();
  check_corpus(corpus);
  const auto t0 = Clock::now();
  const std::string snapshot = config_snapshot(config);
  ManifestWriter manifest(config.output, snapshot);
  write_text(config.output / "run_config.json", json::parse(snapshot).dump(2) + "\n");

  const int n_images = static_cast<int>(corpus.images.size());
  std::atomic<std::int64_t> next{0};
  std::mutex mu;
  GenerateResult result;
  bool io_failure = false;

  auto worker = [&] {
    StageTimes local;
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= config.count) break;
      const std::string id = sample_id(i);
      try {
        const std::uint64_t seed = sample_seed(config.seed, i);
        const SourcePick pick = pick_sources(seed, n_images);
        const SegmentationStack& stack = segmenter.get(pick.source);
        auto t = Clock::now();
        SceneSample sample = generate_sample(corpus.images[pick.source].image,
                                             corpus.images[pick.aux].image, stack, config.synthesis, seed);
        sample.provenance.source_index = pick.source;
        sample.provenance.aux_index = pick.aux;
        local.synthesis += since(t);
        if (config.augment) {
          t = Clock::now();
          Rng rng = make_rng(split_seed(seed, 2));
          sample = flowsynth::augment(std::move(sample), config.augmentation, rng);
          local.augmentation += since(t);
        }
        t = Clock::now();
        const SampleRecord rec = write_sample(sample, config.output, id, config.formats);
        manifest.add(rec);
        local.writing += since(t);
        std::lock_guard lock(mu);
        ++result.written;
        if (progress) progress({result.written, config.count, since(t0)});
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        result.failures.push_back(id + ": " + e.what());
        io_failure |= e.kind() == Error::Kind::kIo;
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        result.failures.push_back(id + ": " + e.what());
      }
    }
    std::lock_guard lock(mu);
    result.stages.synthesis += local.synthesis;
    result.stages.augmentation += local.augmentation;
    result.stages.writing += local.writing;
  };

  const int n_workers = static_cast<int>(std::min<std::int64_t>(config.workers, config.count));
  std::vector<std::jthread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();

  manifest.finish();
  std::sort(result.failures.begin(), result.failures.end());
  result.seconds = since(t0);
  result.stages.segmentation = segmenter.seconds();
  result.images_segmented = segmenter.count();
  if (!result.failures.empty()) result.exit_code = io_failure ? kIoError : kDataError;
  return result;
}

// ---- eval -----------------------------------------------------------------

struct FlowFile {
  FlowField flow;
  Mask valid;
};

std::optional<FlowFile> read_flow_file(const fs::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".flo") {
    FlowFile f{read_flo(p), {}};
    f.valid = Mask(f.flow.height(), f.flow.width(), 1.0f);
    return f;
  }
  if (ext == ".png") {
    try {
      KittiFlow k = read_kitti_png(p);
      return FlowFile{std::move(k.flow), std::move(k.valid)};
    } catch (const FormatError&) {
      return std::nullopt;  // an ordinary image, not a flow file
    }
  }
  return std::nullopt;
}

std::vector<fs::path> list_files(const fs::path& dir) {
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw IoError("cannot read directory " + dir.string() + ": " + ec.message());
  std::vector<fs::path> out;
  for (const auto& e : it) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (count < 1) throw InvalidParameter("count must be at least 1");
  if (workers < 1) throw InvalidParameter("workers must be at least 1");
  if (size && (size->width < 1 || size->height < 1)) throw InvalidParameter("size must be positive");
  if (!formats.flo && !formats.kitti) throw InvalidParameter("no flow output format selected");
  if (output.empty()) throw InvalidParameter("output directory is required");
  synthesis.validate();
  if (augment) augmentation.validate();
}

std::string config_snapshot(const RunConfig& c) {
  const json j = {{"input", c.input.generic_string()},
                  {"count", c.count},
                  {"seed", c.seed},
                  {"size", c.size ? size_json(*c.size) : json(nullptr)},
                  {"min_size", size_json(c.min_size)},
                  {"synthesis", synthesis_json(c.synthesis)},
                  {"slic",
                   {{"compactness", c.slic.compactness},
                    {"iterations", c.slic.iterations},
                    {"min_fragment_fraction", c.slic.min_fragment_fraction}}},
                  {"augment", c.augment},
                  {"augmentation", augmentation_json(c.augmentation)},
                  {"format", c.formats.flo && c.formats.kitti ? "both" : c.formats.kitti ? "kitti" : "flo"},
                  {"audit", {{"max_mean", c.audit.max_mean}, {"max_p99", c.audit.max_p99}}}};
  return j.dump();
}

void apply_config_json(RunConfig& c, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidParameter(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    for_keys(j, "config",
             {"input", "output", "count", "seed", "workers", "size", "min_size", "synthesis", "slic",
              "augment", "augmentation", "format", "cache_dir", "audit"},
             [&](const std::string& k, const json& v) {
               if (k == "input") c.input = v.get<std::string>();
               if (k == "output") c.output = v.get<std::string>();
               if (k == "count") c.count = v.get<std::int64_t>();
               if (k == "seed") c.seed = v.get<std::uint64_t>();
               if (k == "workers") c.workers = v.get<int>();
               if (k == "size") c.size = v.is_null() ? std::nullopt : std::optional(size_from(v));
               if (k == "min_size") c.min_size = size_from(v);
               if (k == "synthesis") apply_synthesis(c.synthesis, v);
               if (k == "slic") {
                 for_keys(v, "slic", {"compactness", "iterations", "min_fragment_fraction"},
                          [&](const std::string& sk, const json& sv) {
                            if (sk == "compactness") c.slic.compactness = sv.get<double>();
                            if (sk == "iterations") c.slic.iterations = sv.get<int>();
                            if (sk == "min_fragment_fraction") c.slic.min_fragment_fraction = sv.get<double>();
                          });
               }
               if (k == "augment") c.augment = v.get<bool>();
               if (k == "augmentation") apply_augmentation(c.augmentation, v);
               if (k == "format") {
                 const auto f = v.get<std::string>();
                 if (f != "flo" && f != "kitti" && f != "both") {
                   throw InvalidParameter("format is \"flo\", \"kitti\" or \"both\"");
                 }
                 c.formats = {f != "kitti", f != "flo"};
               }
               if (k == "cache_dir") c.cache_dir = v.get<std::string>();
               if (k == "audit") {
                 for_keys(v, "audit", {"max_mean", "max_p99"}, [&](const std::string& ak, const json& av) {
                   if (ak == "max_mean") c.audit.max_mean = av.get<double>();
                   if (ak == "max_p99") c.audit.max_p99 = av.get<double>();
                 });
               }
             });
  } catch (const json::exception& e) {
    throw InvalidParameter(std::string("bad config value: ") + e.what());
  }
}

std::uint64_t sample_seed(std::uint64_t global_seed, std::int64_t index) {
  return split_seed(global_seed, static_cast<std::uint64_t>(index));
}

SourcePick pick_sources(std::uint64_t seed, int corpus_size) {
  if (corpus_size < 2) throw InvalidParameter("pick_sources: need at least two images");
  Rng rng = make_rng(split_seed(seed, 1));
  SourcePick p;
  p.source = uniform_int(rng, 0, corpus_size - 1);
  p.aux = uniform_int(rng, 0, corpus_size - 2);
  if (p.aux >= p.source) ++p.aux;
  return p;
}

GenerateResult run_generate(const RunConfig& config, const ImageCorpus& corpus, const ProgressFn& progress) {
  Segmenter segmenter(corpus, config);
  return generate_impl(config, corpus, segmenter, progress);
}

GenerateResult run_generate(const RunConfig& config, const ProgressFn& progress) {
  config.validate();
  const ImageCorpus corpus = ingest_images(config.input, config.min_size, config.size);
  return run_generate(config, corpus, progress);
}

ValidateResult run_validate(const fs::path& manifest_path, const AuditThresholds& thresholds, int workers) {
  const Manifest manifest = read_manifest(manifest_path);
  if (manifest.records.empty()) {
    throw EmptyCorpus("empty corpus: manifest " + manifest_path.string() + " lists no samples");
  }
  ValidateResult result;
  result.n_samples = manifest.records.size();
  const ManifestCheck check = validate_manifest(manifest_path);
  result.failures = check.problems;

  const fs::path root = manifest_path.parent_path();
  std::vector<std::optional<AuditReport>> audits(manifest.records.size());
  std::vector<std::string> errors(manifest.records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= manifest.records.size()) break;
      try {
        const SceneSample s = read_sample(manifest.records[i], root);
        audits[i] = photometric_audit(photometric_reference(s), thresholds);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (int w = 1; w < std::max(1, workers); ++w) pool.emplace_back(worker);
  worker();
  pool.clear();

  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const std::string& id = manifest.records[i].id;
    if (!audits[i]) {
      result.failures.push_back(id + ": unreadable sample: " + errors[i]);
      continue;
    }
    const AuditReport& r = *audits[i];
    result.audits.emplace_back(id, r);
    if (!r.passed) {
      char buf[160];
      const bool mean_bad = r.mean_abs_diff > thresholds.max_mean;
      std::snprintf(buf, sizeof buf, ": photometric audit failed (%s %.4f > %.4f)", mean_bad ? "mean" : "p99",
                    mean_bad ? r.mean_abs_diff : r.p99, mean_bad ? thresholds.max_mean : thresholds.max_p99);
      result.failures.push_back(id + buf);
    }
  }
  if (!result.failures.empty()) result.exit_code = kDataError;
  return result;
}

EvalResult run_eval(const EvalInputs& in) {
  EvalResult result;
  const std::vector<fs::path> preds = list_files(in.pred_dir);
  EvalAccumulator acc(in.rule);
  std::int64_t n_gt = 0;
  for (const fs::path& gt_path : list_files(in.gt_dir)) {
    std::optional<FlowFile> gt = read_flow_file(gt_path);
    if (!gt) continue;
    ++n_gt;
    const std::string stem = gt_path.stem().string();
    // Same file name first, then the same stem with the other flow extension.
    std::optional<FlowFile> pred;
    for (const fs::path& cand : {in.pred_dir / gt_path.filename(), in.pred_dir / (stem + ".flo"),
                                 in.pred_dir / (stem + ".png")}) {
      if (std::find(preds.begin(), preds.end(), cand) == preds.end()) continue;
      pred = read_flow_file(cand);
      if (pred) break;
    }
    if (!pred) {
      result.unmatched.push_back(gt_path.filename().string());
      continue;
    }
    if (!pred->flow.same_shape(gt->flow.height(), gt->flow.width())) {
      throw InvalidDimension("eval: prediction for " + stem + " has a different size");
    }
    acc.add(stem, pred->flow, gt->flow, gt->valid);
  }
  if (n_gt == 0) throw EmptyEvaluation("eval: no ground-truth flow files in " + in.gt_dir.string());
  if (!result.unmatched.empty()) {
    result.exit_code = kDataError;
    return result;
  }
  result.report = acc.report();
  return result;
}

Image make_preview(const SceneSample& sample) {
  const Image color = colorize_flow(sample.flow);
  const int h = sample.frame0.height(), w = sample.frame0.width();
  Image out(h, 3 * w, 3);
  const Image* panels[3] = {&sample.frame0, &sample.frame1, &color};
  for (int k = 0; k < 3; ++k) {
    const Image& p = *panels[k];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) out.at(y, k * w + x, c) = p.at(y, x, p.channels() == 3 ? c : 0);
      }
    }
  }
  return out;
}

void run_preview(const fs::path& manifest_path, const std::string& id, const fs::path& out) {
  const Manifest manifest = read_manifest(manifest_path);
  const auto it = std::find_if(manifest.records.begin(), manifest.records.end(),
                               [&](const SampleRecord& r) { return r.id == id; });
  if (it == manifest.records.end()) throw InvalidParameter("unknown sample id " + id);
  write_png(make_preview(read_sample(*it, manifest_path.parent_path())), out);
}

BenchResult run_bench(RunConfig config, int n_procedural_images) {
  if (!config.size) config.size = Size2{1280, 544};
  ImageCorpus corpus;
  if (config.input.empty()) {
    for (int i = 0; i < std::max(2, n_procedural_images); ++i) {
      corpus.images.push_back({"procedural_" + std::to_string(i),
                               procedural_texture(config.size->height, config.size->width, 1000 + i)});
    }
  } else {
    corpus = ingest_images(config.input, config.min_size, config.size);
  }
  check_corpus(corpus);

  std::random_device rd;
  const fs::path scratch = fs::temp_directory_path() / ("flowsynth-bench-" + std::to_string(rd()));
  config.output = scratch;
  config.validate();

  Segmenter segmenter(corpus, config);
  for (int i = 0; i < static_cast<int>(corpus.images.size()); ++i) segmenter.get(i);

  GenerateResult g;
  try {
    g = generate_impl(config, corpus, segmenter, {});
  } catch (...) {
    std::error_code ec;
    fs::remove_all(scratch, ec);
    throw;
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  if (!g.failures.empty()) throw Error(Error::Kind::kData, "bench: " + g.failures.front());

  BenchResult r;
  r.samples = g.written;
  r.workers = static_cast<int>(std::min<std::int64_t>(config.workers, config.count));
  r.seconds = g.seconds;
  r.samples_per_second_per_worker = g.written / g.seconds / r.workers;
  r.segmentation_seconds_per_image = segmenter.seconds() / double(corpus.images.size());
  const double n = std::max<double>(1.0, double(g.written));
  r.per_sample = {0.0, g.stages.synthesis / n, g.stages.augmentation / n, g.stages.writing / n};
  return r;
}

std::string to_json(const ValidateResult& r) {
  json samples = json::array();
  for (const auto& [id, a] : r.audits) {
    json s = audit_json(a);
    s["id"] = id;
    samples.push_back(std::move(s));
  }
  return json{{"n_samples", r.n_samples},
              {"passed", r.failures.empty()},
              {"failures", r.failures},
              {"samples", samples}}
      .dump(2);
}

std::string to_json(const EvalReport& r) {
  json samples = json::array();
  for (const SampleEval& s : r.samples) {
    samples.push_back({{"id", s.id}, {"epe", s.epe}, {"f1_all", s.f1_all}, {"n_valid", s.n_valid}});
  }
  return json{{"epe", r.epe_mean}, {"f1_all", r.f1_all}, {"n_valid", r.n_valid}, {"samples", samples}}
      .dump(2);
}

std::string to_json(const BenchResult& r) {
  return json{{"samples", r.samples},
              {"workers", r.workers},
              {"seconds", r.seconds},
              {"samples_per_second_per_worker", r.samples_per_second_per_worker},
              {"segmentation_seconds_per_image", r.segmentation_seconds_per_image},
              {"seconds_per_sample", stages_json(r.per_sample)}}
      .dump(2);
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return err->kind() == Error::Kind::kIo ? kIoError : kDataError;
  }
  return kDataError;
}

}  // namespace flowsynth::cli
