#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include "commands.hpp"
#include "oracles.hpp"

using namespace flowsynth;
using namespace flowsynth::cli;
using flowsynth::testing::list_files;
using flowsynth::testing::read_bytes;
using flowsynth::testing::TempDir;

namespace fs = std::filesystem;

namespace {

RunConfig small_config(const fs::path& input, const fs::path& output) {
  RunConfig c;
  c.input = input;
  c.output = output;
  c.count = 6;
  c.seed = 11;
  c.synthesis.occluder_size = {300, 2000};
  c.synthesis.n_layers = {2, 4};
  c.synthesis.component_counts = {20, 60};
  c.augmentation.crop_height = 240;
  c.augmentation.crop_width = 336;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FLOWSYNTH_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, JsonOverlayAndUnknownKeys) {
  RunConfig c;
  apply_config_json(c, R"({"count": 9, "synthesis": {"shadow_prob": 0.5}, "augmentation": {"crop": [64, 48]}})");
  EXPECT_EQ(c.count, 9);
  EXPECT_EQ(c.synthesis.shadow_prob, 0.5);
  EXPECT_EQ(c.synthesis.n_layers.min, 8);
  EXPECT_THROW(apply_config_json(c, R"({"cuont": 3})"), InvalidParameter);
  EXPECT_THROW(apply_config_json(c, R"({"synthesis": {"shadow": 0.5}})"), InvalidParameter);
  EXPECT_THROW(apply_config_json(c, "{not json"), InvalidParameter);
  EXPECT_THROW(apply_config_json(c, R"({"synthesis": {"control_noise": "laplace"}})"), InvalidParameter);
}

TEST(Config, SnapshotIgnoresWorkersAndOutput) {
  RunConfig a, b;
  b.workers = 8;
  b.output = "/elsewhere";
  EXPECT_EQ(config_snapshot(a), config_snapshot(b));
  b.seed = 5;
  EXPECT_NE(config_snapshot(a), config_snapshot(b));
}

TEST(Seeds, DistinctSeedsAndSourcePicks) {
  std::set<std::uint64_t> seeds;
  for (int i = 0; i < 1000; ++i) seeds.insert(sample_seed(3, i));
  EXPECT_EQ(seeds.size(), 1000u);
  EXPECT_NE(sample_seed(3, 0), sample_seed(4, 0));
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 2000; ++i) {
    const SourcePick p = pick_sources(sample_seed(1, i), 5);
    ASSERT_NE(p.source, p.aux);
    ASSERT_GE(p.aux, 0);
    ASSERT_LT(p.aux, 5);
    ++hits[p.source];
  }
  for (int h : hits) EXPECT_GT(h, 300);
  EXPECT_THROW(pick_sources(1, 1), InvalidParameter);
}

TEST(Generate, WorkerCountDoesNotChangeBytesAndValidatePasses) {
  TempDir in("in"), out1("o1"), out3("o3");
  flowsynth::testing::write_procedural_corpus(in.path(), 3, 300, 400);
  RunConfig c = small_config(in.path(), out1.path());
  const GenerateResult r1 = run_generate(c);
  EXPECT_EQ(r1.exit_code, kSuccess);
  EXPECT_EQ(r1.written, 6);
  c.output = out3.path();
  c.workers = 3;
  const GenerateResult r3 = run_generate(c);
  EXPECT_EQ(r3.written, 6);
  const auto files = list_files(out1.path());
  ASSERT_EQ(files, list_files(out3.path()));
  for (const std::string& f : files) {
    EXPECT_EQ(read_bytes(out1 / f), read_bytes(out3 / f)) << f;
  }
  const ValidateResult v = run_validate(out1 / kManifestName, {});
  EXPECT_EQ(v.n_samples, 6u);
  EXPECT_EQ(v.exit_code, kSuccess);
  EXPECT_TRUE(v.failures.empty());
  EXPECT_NE(to_json(v).find("mean_abs_diff"), std::string::npos);

  const Manifest m = read_manifest(out1 / kManifestName);
  const SampleRecord& rec = m.records[2];
  EXPECT_NE(rec.provenance.source_index, rec.provenance.aux_index);
  const Image p = make_preview(read_sample(rec, out1.path()));
  EXPECT_EQ(p.width(), 3 * rec.width);
  EXPECT_EQ(p.height(), rec.height);
  run_preview(out1 / kManifestName, rec.id, out1 / "preview.png");
  EXPECT_EQ(read_png(out1 / "preview.png").width(), 3 * rec.width);
  EXPECT_THROW(run_preview(out1 / kManifestName, "999999", out1 / "x.png"), InvalidParameter);
}

TEST(Validate, CorruptedFlowIsNamed) {
  TempDir in("in"), out("out");
  flowsynth::testing::write_procedural_corpus(in.path(), 2, 300, 400, 5);
  RunConfig c = small_config(in.path(), out.path());
  c.count = 3;
  ASSERT_EQ(run_generate(c).exit_code, kSuccess);
  const fs::path flo = out / (sample_id(1) + "_flow.flo");
  FlowField f = read_flo(flo);
  for (FlowVec& v : f.data()) v.u += 10.0f;
  write_flo(f, flo);
  const ValidateResult v = run_validate(out / kManifestName, {}, 2);
  EXPECT_EQ(v.exit_code, kDataError);
  ASSERT_EQ(v.failures.size(), 1u);
  EXPECT_EQ(v.failures[0].rfind(sample_id(1), 0), 0u) << v.failures[0];
}

TEST(Validate, EmptyManifestIsAnError) {
  TempDir out("out");
  { ManifestWriter w(out.path(), "{}"); w.finish(); }
  EXPECT_THROW(run_validate(out / kManifestName, {}), EmptyCorpus);
}

TEST(Eval, MatchesByStemAndReportsUnmatched) {
  TempDir gt("gt"), pred("pred");
  Rng rng = make_rng(1);
  const FlowField a = flowsynth::testing::random_flow(10, 12, 5, rng);
  const FlowField b = flowsynth::testing::random_flow(10, 12, 5, rng);
  write_flo(a, gt / "a.flo");
  write_flo(b, gt / "b.flo");
  write_flo(a, pred / "a.flo");
  write_kitti_png(b, Mask(10, 12, 1.0f), pred / "b.png");
  const EvalResult r = run_eval({pred.path(), gt.path(), OutlierRule::kAnd});
  ASSERT_TRUE(r.report.has_value());
  EXPECT_EQ(r.exit_code, kSuccess);
  EXPECT_EQ(r.report->n_valid, 240);
  EXPECT_LT(r.report->epe_mean, 0.01);
  EXPECT_EQ(r.report->f1_all, 0.0);

  write_flo(b, gt / "c.flo");
  const EvalResult u = run_eval({pred.path(), gt.path(), OutlierRule::kAnd});
  EXPECT_EQ(u.exit_code, kDataError);
  EXPECT_EQ(u.unmatched, std::vector<std::string>{"c.flo"});
  EXPECT_THROW(run_eval({pred.path(), pred / "none", OutlierRule::kAnd}), Error);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(IoError("x")), kIoError);
  EXPECT_EQ(exit_code_for(FormatError("x")), kDataError);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), kDataError);
}

TEST(ExitCodes, Binary) {
  TempDir dir("bin");
  EXPECT_EQ(run_cli("--help"), kSuccess);
  EXPECT_EQ(run_cli(""), kUsage);
  EXPECT_EQ(run_cli("generate --bogus"), kUsage);
  EXPECT_EQ(run_cli("generate -o " + dir.path().string()), kUsage);
  EXPECT_EQ(run_cli("validate " + (dir / "missing.jsonl").string()), kIoError);
  fs::create_directories(dir / "empty");
  EXPECT_EQ(run_cli("generate -i " + (dir / "empty").string() + " -o " + (dir / "o").string() + " -n 1"),
            kDataError);
}
