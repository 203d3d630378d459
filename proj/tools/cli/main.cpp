#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace fs = std::filesystem;
using namespace flowsynth;
using namespace flowsynth::cli;

namespace {

Size2 parse_size(const std::string& text) {
  int w = 0, h = 0;
  char x = 0;
  std::istringstream in(text);
  if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || !in.eof() || w < 1 || h < 1) {
    throw CLI::ValidationError("size", "expected WIDTHxHEIGHT, got '" + text + "'");
  }
  return {w, h};
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_report(const std::string& json_text, const std::string& path) {
  if (path.empty()) {
    std::cout << json_text << "\n";
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << json_text << "\n";
  if (!out) throw IoError("cannot write " + path);
}

// The manifest argument may name the file or the dataset directory.
fs::path manifest_path(const std::string& arg) {
  fs::path p(arg);
  return fs::is_directory(p) ? p / kManifestName : p;
}

struct GenerateArgs {
  std::string input, output, config, format, size, min_size, cache_dir;
  std::int64_t count = 0;
  std::uint64_t seed = 0;
  int workers = 0;
  bool no_augment = false;
  bool quiet = false;
};

// Wires the options shared by generate and bench; flags and FLOWSYNTH_* env
// variables override the config file.
struct SharedOptions {
  CLI::Option* input;
  CLI::Option* output;
  CLI::Option* count;
  CLI::Option* seed;
  CLI::Option* workers;
  CLI::Option* config;
  CLI::Option* format;
  CLI::Option* size;
  CLI::Option* min_size;
  CLI::Option* cache_dir;
};

SharedOptions add_shared(CLI::App& cmd, GenerateArgs& a) {
  SharedOptions o;
  o.input = cmd.add_option("-i,--input", a.input, "Directory of source images")->envname("FLOWSYNTH_INPUT");
  o.output = cmd.add_option("-o,--output", a.output, "Dataset directory")->envname("FLOWSYNTH_OUTPUT");
  o.count = cmd.add_option("-n,--count", a.count, "Number of samples")
                ->envname("FLOWSYNTH_COUNT")
                ->check(CLI::PositiveNumber);
  o.seed = cmd.add_option("--seed", a.seed, "Global seed")->envname("FLOWSYNTH_SEED");
  o.workers = cmd.add_option("-j,--workers", a.workers, "Worker threads")
                  ->envname("FLOWSYNTH_WORKERS")
                  ->check(CLI::PositiveNumber);
  o.config = cmd.add_option("--config", a.config, "JSON config file")
                 ->envname("FLOWSYNTH_CONFIG")
                 ->check(CLI::ExistingFile);
  o.format = cmd.add_option("--format", a.format, "Flow file format")
                 ->envname("FLOWSYNTH_FORMAT")
                 ->check(CLI::IsMember({"flo", "kitti", "both"}));
  o.size = cmd.add_option("--size", a.size, "Fit every image to WIDTHxHEIGHT")->envname("FLOWSYNTH_SIZE");
  o.min_size = cmd.add_option("--min-size", a.min_size, "Skip images smaller than WIDTHxHEIGHT")
                   ->envname("FLOWSYNTH_MIN_SIZE");
  o.cache_dir = cmd.add_option("--cache-dir", a.cache_dir, "Segmentation cache directory")
                    ->envname("FLOWSYNTH_CACHE_DIR");
  cmd.add_flag("--no-augment", a.no_augment, "Skip augmentation");
  return o;
}

RunConfig build_config(const GenerateArgs& a, const SharedOptions& o) {
  RunConfig c;
  if (*o.config) apply_config_json(c, read_text(a.config));
  if (*o.input) c.input = a.input;
  if (*o.output) c.output = a.output;
  if (*o.count) c.count = a.count;
  if (*o.seed) c.seed = a.seed;
  if (*o.workers) c.workers = a.workers;
  if (*o.format) c.formats = {a.format != "kitti", a.format != "flo"};
  if (*o.size) c.size = parse_size(a.size);
  if (*o.min_size) c.min_size = parse_size(a.min_size);
  if (*o.cache_dir) c.cache_dir = a.cache_dir;
  if (a.no_augment) c.augment = false;
  return c;
}

int do_generate(const GenerateArgs& a, const SharedOptions& o) {
  RunConfig c = build_config(a, o);
  if (c.input.empty()) throw CLI::RequiredError("--input");
  if (c.output.empty()) throw CLI::RequiredError("--output");
  auto progress = [&](const Progress& p) {
    if (a.quiet) return;
    std::fprintf(stderr, "\r%lld/%lld samples, %.2f samples/s", static_cast<long long>(p.done),
                 static_cast<long long>(p.total), p.done / std::max(p.seconds, 1e-9));
    if (p.done == p.total) std::fputc('\n', stderr);
  };
  const ImageCorpus corpus = ingest_images(c.input, c.min_size, c.size);
  for (const SkippedImage& s : corpus.skipped) {
    std::fprintf(stderr, "skipped %s: %s\n", s.path.string().c_str(), s.reason.c_str());
  }
  const GenerateResult r = run_generate(c, corpus, progress);
  for (const std::string& f : r.failures) std::fprintf(stderr, "failed %s\n", f.c_str());
  std::printf("wrote %lld of %lld samples to %s in %.1f s (%.2f samples/s, %lld images segmented)\n",
              static_cast<long long>(r.written), static_cast<long long>(c.count), c.output.string().c_str(),
              r.seconds, r.written / std::max(r.seconds, 1e-9), static_cast<long long>(r.images_segmented));
  return r.exit_code;
}

int do_bench(const GenerateArgs& a, const SharedOptions& o) {
  RunConfig c = build_config(a, o);
  if (!*o.count && !*o.config) c.count = 20;
  const BenchResult r = run_bench(c);
  std::cout << to_json(r) << "\n";
  std::fprintf(stderr, "%.2f samples/s/worker at %dx%d (target 2.00)\n", r.samples_per_second_per_worker,
               c.size ? c.size->width : 1280, c.size ? c.size->height : 544);
  return kSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowsynth: optical flow training pairs with exact ground truth from single images"};
  app.require_subcommand(0, 1);
  bool bench_flag = false;
  app.add_flag("--bench", bench_flag, "Run the throughput benchmark with default settings");

  GenerateArgs gen_args;
  CLI::App* gen = app.add_subcommand("generate", "Generate a dataset");
  const SharedOptions gen_opts = add_shared(*gen, gen_args);
  gen->add_flag("-q,--quiet", gen_args.quiet, "No progress output");

  std::string v_manifest, v_report;
  int v_workers = 1;
  AuditThresholds v_thresholds;
  CLI::App* val = app.add_subcommand("validate", "Audit every sample of a dataset");
  val->add_option("manifest", v_manifest, "manifest.jsonl or its directory")->required();
  val->add_option("-j,--workers", v_workers, "Worker threads")
      ->envname("FLOWSYNTH_WORKERS")
      ->check(CLI::PositiveNumber);
  val->add_option("--max-mean", v_thresholds.max_mean, "Mean absolute difference threshold");
  val->add_option("--max-p99", v_thresholds.max_p99, "99th percentile threshold");
  val->add_option("--report", v_report, "Write the JSON report here instead of stdout");

  EvalInputs e_in;
  std::string e_rule = "and", e_report;
  CLI::App* ev = app.add_subcommand("eval", "Score predicted flow against ground truth");
  ev->add_option("--pred", e_in.pred_dir, "Directory of predicted flow files")->required();
  ev->add_option("--gt", e_in.gt_dir, "Directory of ground-truth flow files")->required();
  ev->add_option("--rule", e_rule, "F1-all outlier rule")->check(CLI::IsMember({"and", "or"}));
  ev->add_option("--report", e_report, "Write the JSON report here instead of stdout");

  std::string p_manifest, p_id, p_out;
  CLI::App* pv = app.add_subcommand("preview", "Render frame0 | frame1 | flow for one sample");
  pv->add_option("manifest", p_manifest, "manifest.jsonl or its directory")->required();
  pv->add_option("id", p_id, "Sample id")->required();
  pv->add_option("out", p_out, "Output PNG")->required();

  GenerateArgs bench_args;
  CLI::App* bn = app.add_subcommand("bench", "Measure full-sample throughput");
  const SharedOptions bench_opts = add_shared(*bn, bench_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (bench_flag || bn->parsed()) return do_bench(bench_args, bench_opts);
    if (gen->parsed()) return do_generate(gen_args, gen_opts);
    if (val->parsed()) {
      const ValidateResult r = run_validate(manifest_path(v_manifest), v_thresholds, v_workers);
      write_report(to_json(r), v_report);
      for (const std::string& f : r.failures) std::fprintf(stderr, "FAIL %s\n", f.c_str());
      std::fprintf(stderr, "%zu samples, %zu failures\n", r.n_samples, r.failures.size());
      return r.exit_code;
    }
    if (ev->parsed()) {
      e_in.rule = e_rule == "or" ? OutlierRule::kOr : OutlierRule::kAnd;
      const EvalResult r = run_eval(e_in);
      for (const std::string& u : r.unmatched) std::fprintf(stderr, "no prediction for %s\n", u.c_str());
      if (r.report) write_report(to_json(*r.report), e_report);
      return r.exit_code;
    }
    if (pv->parsed()) {
      run_preview(manifest_path(p_manifest), p_id, p_out);
      return kSuccess;
    }
    std::cout << app.help();
    return kUsage;
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
}
