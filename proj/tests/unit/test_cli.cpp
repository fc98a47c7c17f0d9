#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <sstream>

#include "posekit/audit.hpp"
#include "posekit/cli.hpp"
#include "posekit/data.hpp"
#include "posekit/metrics.hpp"
#include "test_support.hpp"

namespace posekit {
namespace {

namespace fs = std::filesystem;
using posekit::testing::TempDir;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun cli(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"posekit"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
}

// Two actions, 30 frames, and a network small enough to train in well under a second.
struct SmallCorpus {
  TempDir dir;
  fs::path config;
  fs::path data;

  SmallCorpus() : config(dir / "train.json"), data(dir / "data") {
    const nlohmann::json corpus = {{"corpus", {{"actions", {"Walking", "Sitting"}}, {"frames", 30}}}};
    const nlohmann::json train = {{"model", {{"channels", 8}, {"filter_widths", {3, 3}}}},
                                  {"train", {{"batch_size", 16}}}};
    spit(dir / "corpus.json", corpus.dump());
    spit(config, train.dump());
    const CliRun r = cli({"generate", "--out", data.string(), "--config", (dir / "corpus.json").string(), "--seed", "4"});
    EXPECT_EQ(r.code, kExitOk) << r.err;
  }
};

TEST(CliGenerate, DefaultCorpusHasAllSubjectActionPairs) {
  TempDir dir;
  const CliRun r = cli({"generate", "--out", (dir / "d").string(), "--frames", "5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("wrote 105 sequences and manifest.json"), std::string::npos);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "d")) files += e.path().extension() == ".pkseq";
  EXPECT_EQ(files, 105);
  EXPECT_EQ(read_manifest(dir / "d").entries.size(), 105u);
}

TEST(CliGenerate, SameSeedSameBytes) {
  TempDir dir;
  ASSERT_EQ(cli({"generate", "--out", (dir / "a").string(), "--frames", "12", "--seed", "9"}).code, kExitOk);
  ASSERT_EQ(cli({"generate", "--out", (dir / "b").string(), "--frames", "12", "--seed", "9"}).code, kExitOk);
  ASSERT_EQ(cli({"generate", "--out", (dir / "c").string(), "--frames", "12", "--seed", "10"}).code, kExitOk);
  EXPECT_EQ(slurp(dir / "a" / "manifest.json"), slurp(dir / "b" / "manifest.json"));
  EXPECT_EQ(slurp(dir / "a" / "S9_Walking.pkseq"), slurp(dir / "b" / "S9_Walking.pkseq"));
  EXPECT_NE(slurp(dir / "a" / "S9_Walking.pkseq"), slurp(dir / "c" / "S9_Walking.pkseq"));
}

TEST(CliGenerate, TooFewFramesIsUsageError) {
  TempDir dir;
  const CliRun r = cli({"generate", "--out", (dir / "d").string(), "--frames", "2"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("usage error"), std::string::npos);
}

TEST(CliArgs, MissingSubcommandOrUnknownFlag) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"topology", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--data", "x"}).code, kExitUsage);
  EXPECT_EQ(cli({"check-grads", "--terms", "q"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(CliTopology, ListsJointsAndJson) {
  const CliRun text = cli({"topology"});
  ASSERT_EQ(text.code, kExitOk);
  EXPECT_NE(text.out.find("RWrist"), std::string::npos);
  const CliRun js = cli({"topology", "--format", "json"});
  ASSERT_EQ(js.code, kExitOk);
  const auto j = nlohmann::json::parse(js.out);
  EXPECT_EQ(j.at("joints").size(), 17u);
  EXPECT_EQ(j.at("bones").size(), 16u);
}

TEST(CliTrain, BaselineOneEpochWritesLog) {
  SmallCorpus c;
  const fs::path out = c.dir / "run";
  const CliRun r = cli({"train", "--data", c.data.string(), "--out", out.string(), "--config", c.config.string(),
                     "--variant", "baseline", "--epochs", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("epoch 1"), std::string::npos);
  const std::string log = slurp(out / "train_log.jsonl");
  ASSERT_EQ(std::count(log.begin(), log.end(), '\n'), 1);
  EXPECT_EQ(nlohmann::json::parse(log).at("epoch"), 0);
  EXPECT_TRUE(fs::exists(out / "checkpoint.pkck"));
  EXPECT_TRUE(fs::exists(out / "curve.txt"));
}

TEST(CliTrain, JointAwarePrintsEveryTerm) {
  SmallCorpus c;
  const CliRun r = cli({"train", "--data", c.data.string(), "--out", (c.dir / "run").string(), "--config",
                     c.config.string(), "--epochs", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* t : {"theta=", "d=", "s=", "r=", "xdot=", "xddot=", "thetaddot="}) {
    EXPECT_NE(r.out.find(t), std::string::npos) << t;
  }
  EXPECT_NE(r.out.find("val MPJPE"), std::string::npos);
}

TEST(CliTrain, ResumeMatchesUninterruptedRun) {
  SmallCorpus c;
  const std::string data = c.data.string();
  const std::string cfg = c.config.string();
  ASSERT_EQ(cli({"train", "--data", data, "--out", (c.dir / "full").string(), "--config", cfg, "--epochs", "3"}).code,
            kExitOk);
  ASSERT_EQ(cli({"train", "--data", data, "--out", (c.dir / "half").string(), "--config", cfg, "--epochs", "1"}).code,
            kExitOk);
  const CliRun r = cli({"train", "--data", data, "--out", (c.dir / "half").string(), "--config", cfg, "--epochs", "3",
                     "--resume", (c.dir / "half" / "checkpoint.pkck").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.err.find("resuming"), std::string::npos);
  EXPECT_EQ(r.out.find("epoch 1 "), std::string::npos);
  EXPECT_EQ(slurp(c.dir / "full" / "train_log.jsonl"), slurp(c.dir / "half" / "train_log.jsonl"));
  EXPECT_EQ(slurp(c.dir / "full" / "checkpoint.pkck"), slurp(c.dir / "half" / "checkpoint.pkck"));
}

TEST(CliTrain, ResumeWithOtherWidthIsDataError) {
  SmallCorpus c;
  const std::string run = (c.dir / "run").string();
  ASSERT_EQ(cli({"train", "--data", c.data.string(), "--out", run, "--config", c.config.string(), "--epochs", "1"}).code,
            kExitOk);
  const CliRun r = cli({"train", "--data", c.data.string(), "--out", run, "--config", c.config.string(), "--epochs", "2",
                     "--channels", "16", "--resume", run + "/checkpoint.pkck"});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("data error"), std::string::npos);
}

TEST(CliTrain, CorruptedCheckpointIsDataError) {
  SmallCorpus c;
  const std::string run = (c.dir / "run").string();
  ASSERT_EQ(cli({"train", "--data", c.data.string(), "--out", run, "--config", c.config.string(), "--epochs", "1"}).code,
            kExitOk);
  std::string bytes = slurp(c.dir / "run" / "checkpoint.pkck");
  bytes[bytes.size() / 2] ^= 0x10;
  spit(c.dir / "run" / "checkpoint.pkck", bytes);
  const CliRun r = cli({"predict", "--data", c.data.string(), "--checkpoint", run + "/checkpoint.pkck", "--out",
                     (c.dir / "pred").string()});
  EXPECT_EQ(r.code, kExitData);
}

TEST(CliData, CorruptedSequenceIsDataError) {
  SmallCorpus c;
  std::string text = slurp(c.data / "S1_Walking.pkseq");
  text.resize(text.size() / 2);
  spit(c.data / "S1_Walking.pkseq", text);
  const CliRun r = cli({"train", "--data", c.data.string(), "--out", (c.dir / "run").string(), "--config",
                     c.config.string(), "--epochs", "1"});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("S1_Walking"), std::string::npos);
}

TEST(CliEvaluate, GroundTruthAgainstItselfIsZero) {
  SmallCorpus c;
  const CliRun r = cli({"evaluate", "--pred", c.data.string(), "--gt", c.data.string(), "--out",
                     (c.dir / "report.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("Wlk"), std::string::npos);
  EXPECT_NE(r.out.find("Sit"), std::string::npos);
  const MetricReport report = nlohmann::json::parse(slurp(c.dir / "report.json")).get<MetricReport>();
  EXPECT_EQ(report.overall.mpjpe, 0.0);
  EXPECT_LT(report.overall.p_mpjpe, 1e-9);
  EXPECT_EQ(report.overall.mpjve, 0.0);
  EXPECT_EQ(report.overall.mpjae, 0.0);

  const CliRun js = cli({"evaluate", "--pred", c.data.string(), "--gt", c.data.string(), "--format", "json", "--out",
                      (c.dir / "report2.json").string()});
  ASSERT_EQ(js.code, kExitOk);
  EXPECT_EQ(nlohmann::json::parse(js.out), nlohmann::json::parse(slurp(c.dir / "report.json")));
}

TEST(CliEvaluate, PredictThenEvaluate) {
  SmallCorpus c;
  const std::string run = (c.dir / "run").string();
  ASSERT_EQ(cli({"train", "--data", c.data.string(), "--out", run, "--config", c.config.string(), "--epochs", "1"}).code,
            kExitOk);
  const fs::path pred = c.dir / "pred";
  ASSERT_EQ(cli({"predict", "--data", c.data.string(), "--checkpoint", run + "/checkpoint.pkck", "--out",
                 pred.string()})
                .code,
            kExitOk);
  int files = 0;
  for (const auto& e : fs::directory_iterator(pred)) files += e.path().extension() == ".pkseq";
  EXPECT_EQ(files, 4);  // S9 and S11, two actions each

  // The corpus directory also holds training subjects.
  EXPECT_EQ(cli({"evaluate", "--pred", pred.string(), "--gt", c.data.string()}).code, kExitData);
  const CliRun r = cli({"evaluate", "--pred", pred.string(), "--gt", c.data.string(), "--ignore-extra-gt"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const MetricReport report = nlohmann::json::parse(slurp(pred / "report.json")).get<MetricReport>();
  EXPECT_GT(report.overall.mpjpe, 0.0);
  EXPECT_LE(report.overall.p_mpjpe, report.overall.mpjpe);
}

TEST(CliEvaluate, FrameCountMismatchIsDataError) {
  SmallCorpus c;
  const fs::path other = c.dir / "short";
  fs::create_directories(other);
  LabeledSequence s = load_sequence(c.data / "S9_Walking.pkseq");
  s.sequence.frames.pop_back();
  s.labels.root_trajectory.reset();
  save_sequence(s.sequence, s.labels, other / "S9_Walking.pkseq");
  const CliRun r = cli({"evaluate", "--pred", other.string(), "--gt", c.data.string(), "--ignore-extra-gt"});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("frames"), std::string::npos);
}

TEST(CliCheckGrads, SingleTermPasses) {
  const CliRun r = cli({"check-grads", "--terms", "d"});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  const CliRun js = cli({"check-grads", "--terms", "theta,model", "--model-probes", "20", "--format", "json"});
  ASSERT_EQ(js.code, kExitOk) << js.err;
  const auto j = nlohmann::json::parse(js.out);
  EXPECT_EQ(j.at("checks").size(), 2u);
}

TEST(CliCheckGrads, ImpossibleThresholdExitsNumerical) {
  const CliRun r = cli({"check-grads", "--terms", "xdot", "--threshold", "1e-300"});
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_NE(r.err.find("gradient check failed"), std::string::npos);
}

TEST(GradientAudit, DetectsSabotagedGradient) {
  AuditConfig config;
  config.terms = {Term::kBoneLength};
  config.include_model = false;
  const AuditReport clean = run_gradient_audit(config);
  EXPECT_TRUE(clean.passed());
  const AuditReport broken =
      run_gradient_audit(config, [](const std::string&, Eigen::VectorXd& g) { g = -g; });
  EXPECT_FALSE(broken.passed());
  EXPECT_GT(broken.max_rel_error, 0.5);
}

}  // namespace
}  // namespace posekit
