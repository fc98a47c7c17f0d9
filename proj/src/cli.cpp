#include "posekit/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "posekit/audit.hpp"
#include "posekit/data.hpp"
#include "posekit/metrics.hpp"
#include "posekit/skeleton.hpp"
#include "posekit/trainer.hpp"

namespace posekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err) {
    const char* env = std::getenv("POSEKIT_LOG");
    const std::string level = env ? env : "info";
    if (level == "quiet" || level == "0") level_ = 0;
    if (level == "debug" || level == "2") level_ = 2;
  }

  void info(const std::string& msg) const {
    if (level_ >= 1) err_ << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ >= 2) err_ << msg << '\n';
  }

 private:
  std::ostream& err_;
  int level_ = 1;
};

json read_config(const std::string& path, std::initializer_list<const char*> sections) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw UsageError(path + ": not valid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw UsageError(path + ": config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(sections.begin(), sections.end(), [&](const char* s) { return key == s; })) {
      throw UsageError(path + ": unknown config section '" + key + "'");
    }
  }
  return j;
}

template <typename T>
void apply_section(const json& config, const char* key, T& target) {
  if (!config.contains(key)) return;
  try {
    config.at(key).get_to(target);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config section '") + key + "': " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
  if (!os) throw DataError("failed writing " + path.string());
}

std::vector<std::string> sequence_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pkseq") names.push_back(entry.path().filename());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string format_breakdown(const EpochRecord& r) {
  std::ostringstream os;
  os.precision(6);
  os << "epoch " << r.epoch + 1 << "  lr " << r.lr << "  loss " << r.total_loss << "  position " << r.position_loss;
  os << "  [";
  for (int t = 0; t < kNumTerms; ++t) os << (t ? " " : "") << kTermNames[t] << "=" << r.constraint.terms[t];
  os << "]";
  if (r.validation) os << "  val MPJPE " << r.validation->mpjpe << " mm";
  if (r.wall_seconds) os << "  " << *r.wall_seconds << " s";
  return os.str();
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  Logger log;
};

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string out;
  std::string config;
  std::uint64_t seed = 0;
  int frames = 500;
  double noise_px = 3.0;
  double noise_mm = 0.0;
  std::string format = "text";
};

int cmd_generate(const GenerateArgs& a, const CLI::App& cmd, Context& ctx) {
  CorpusConfig cc;
  apply_section(read_config(a.config, {"corpus"}), "corpus", cc);
  if (cmd.count("--seed")) cc.seed = a.seed;
  if (cmd.count("--frames")) cc.frames = a.frames;
  if (cmd.count("--noise-px")) cc.noise_2d_px = a.noise_px;
  if (cmd.count("--noise-mm")) cc.noise_sigma_mm = a.noise_mm;
  const Manifest m = generate_corpus(cc, a.out);
  if (a.format == "json") {
    ctx.out << json(m).dump(2) << '\n';
  } else {
    ctx.out << "wrote " << m.entries.size() << " sequences and " << kManifestName << " to " << a.out << '\n';
  }
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string config;
  std::string variant = "joint-aware";
  std::string resume;
  std::uint64_t seed = 0;
  int epochs = 20;
  int channels = 64;
  int batch_size = 32;
  int workers = 1;
  double lr = 1e-3;
  bool timing = false;
  std::string format = "text";
};

int cmd_train(const TrainArgs& a, const CLI::App& cmd, Context& ctx) {
  const json config = read_config(a.config, {"model", "train"});
  ModelConfig mc;
  TrainConfig tc;
  apply_section(config, "model", mc);
  apply_section(config, "train", tc);
  if (cmd.count("--channels")) mc.channels = a.channels;
  if (cmd.count("--seed")) mc.seed = tc.seed = a.seed;
  if (cmd.count("--epochs")) tc.epochs = a.epochs;
  if (cmd.count("--batch-size")) tc.batch_size = a.batch_size;
  if (cmd.count("--lr")) tc.initial_lr = a.lr;
  if (cmd.count("--variant") || !config.contains("train") || !config.at("train").contains("loss_weights")) {
    tc.loss_weights = make_variant(a.variant, mc, tc).train.loss_weights;
  }

  TrainerState state = [&] {
    if (a.resume.empty()) return make_trainer_state(mc, tc);
    TrainerState s = load_checkpoint(a.resume);
    ModelConfig requested = s.model.config();
    apply_section(config, "model", requested);
    if (cmd.count("--channels")) requested.channels = a.channels;
    require_compatible(s.model.config(), requested);
    if (cmd.count("--epochs")) s.config.epochs = a.epochs;
    ctx.log.info("resuming from " + a.resume + " at epoch " + std::to_string(s.next_epoch + 1));
    return s;
  }();
  state.config.workers = a.workers;
  state.config.validate();

  const Dataset data = load_dataset(a.data);
  ctx.log.info("training on " + std::to_string(data.train.size()) + " sequences, validating on " +
               std::to_string(data.test.size()) + "; " + std::to_string(state.model.num_parameters()) +
               " parameters, receptive field " + std::to_string(state.model.receptive_field()));
  const fs::path out_dir = a.out;
  ensure_dir(out_dir);
  auto persist = [&](const TrainerState& s) {
    save_checkpoint(s, out_dir / "checkpoint.pkck");
    write_text(out_dir / "train_log.jsonl", s.log.to_jsonl());
    write_text(out_dir / "curve.txt", s.log.curve_table());
  };
  if (state.next_epoch >= state.config.epochs) ctx.log.info("nothing to do: all epochs already trained");
  train(
      state, data,
      [&](const EpochRecord& r, const TrainerState& s) {
        if (a.format == "json") {
          ctx.out << json(r).dump() << '\n';
        } else {
          ctx.out << format_breakdown(r) << '\n';
        }
        ctx.out.flush();
        persist(s);
      },
      a.timing);
  persist(state);
  ctx.log.info("wrote checkpoint.pkck, train_log.jsonl and curve.txt to " + a.out);
  return kExitOk;
}

struct PredictArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string split = "test";
  int workers = 1;
};

int cmd_predict(const PredictArgs& a, Context& ctx) {
  const TrainerState state = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.data);
  std::vector<Clip> clips;
  if (a.split != "test") clips.insert(clips.end(), data.train.begin(), data.train.end());
  if (a.split != "train") clips.insert(clips.end(), data.test.begin(), data.test.end());
  if (clips.empty()) throw DataError("no sequences in the requested split");
  ensure_dir(a.out);
  const auto preds = predict_clips(state.model, clips, a.workers);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    save_sequence(preds[i], {clips[i].action, clips[i].subject, std::nullopt}, fs::path(a.out) / clips[i].name);
  }
  ctx.log.info("wrote " + std::to_string(clips.size()) + " predicted sequences to " + a.out);
  return kExitOk;
}

struct EvaluateArgs {
  std::string pred;
  std::string gt;
  std::string out;
  std::string format = "text";
  bool ignore_extra_gt = false;
  int workers = 1;
};

int cmd_evaluate(const EvaluateArgs& a, Context& ctx) {
  const auto pred_names = sequence_files(a.pred);
  const auto gt_names = sequence_files(a.gt);
  const std::set<std::string> pred_set(pred_names.begin(), pred_names.end());
  const std::set<std::string> gt_set(gt_names.begin(), gt_names.end());
  std::vector<std::string> unmatched;
  for (const auto& n : pred_names) {
    if (!gt_set.count(n)) unmatched.push_back(n + " (no ground truth)");
  }
  if (!a.ignore_extra_gt) {
    for (const auto& n : gt_names) {
      if (!pred_set.count(n)) unmatched.push_back(n + " (no prediction)");
    }
  }
  if (!unmatched.empty()) {
    std::string msg = "prediction and ground-truth sets do not match:";
    for (const auto& u : unmatched) msg += "\n  " + u;
    throw DataError(msg);
  }
  if (pred_names.empty()) throw DataError("no .pkseq files in " + a.pred);

  std::vector<PoseSequence> preds;
  std::vector<PoseSequence> gts;
  std::vector<std::string> labels;
  for (const auto& name : pred_names) {
    LabeledSequence p = load_sequence(fs::path(a.pred) / name);
    LabeledSequence g = load_sequence(fs::path(a.gt) / name);
    if (p.sequence.size() != g.sequence.size()) {
      throw DataError(name + ": " + std::to_string(p.sequence.size()) + " predicted frames vs " +
                      std::to_string(g.sequence.size()) + " ground-truth frames");
    }
    preds.push_back(std::move(p.sequence));
    gts.push_back(std::move(g.sequence));
    labels.push_back(g.labels.action);
  }
  const MetricReport report = evaluate(preds, gts, labels, a.workers);
  const fs::path out_path = a.out.empty() ? fs::path(a.pred) / "report.json" : fs::path(a.out);
  write_text(out_path, json(report).dump(2) + "\n");
  if (a.format == "json") {
    ctx.out << json(report).dump(2) << '\n';
  } else {
    ctx.out << format_report_table(report);
  }
  ctx.log.info("wrote " + out_path.string());
  return kExitOk;
}

struct CheckGradsArgs {
  std::vector<std::string> terms;
  int pairs = 4;
  int probes = 8;
  int model_probes = 200;
  int channels = 4;
  bool no_model = false;
  double threshold = 1e-4;
  std::uint64_t seed = 0;
  std::string format = "text";
};

int cmd_check_grads(const CheckGradsArgs& a, Context& ctx) {
  AuditConfig config;
  if (!a.terms.empty()) {
    config.terms.clear();
    config.include_model = false;
    for (const auto& name : a.terms) {
      if (name == "all") {
        config.terms = AuditConfig{}.terms;
        config.include_model = true;
      } else if (name == "model") {
        config.include_model = true;
      } else if (auto t = term_from_name(name)) {
        if (std::find(config.terms.begin(), config.terms.end(), *t) == config.terms.end()) config.terms.push_back(*t);
      } else {
        throw UsageError("unknown loss term '" + name + "' (expected theta, d, s, r, xdot, xddot, thetaddot, model or all)");
      }
    }
  }
  if (a.no_model) config.include_model = false;
  config.pairs = a.pairs;
  config.probes_per_pair = a.probes;
  config.model_probes = a.model_probes;
  config.model_channels = a.channels;
  config.threshold = a.threshold;
  config.seed = a.seed;
  const AuditReport report = run_gradient_audit(config);
  if (a.format == "json") {
    ctx.out << report.to_json().dump(2) << '\n';
  } else {
    ctx.out << report.to_text();
  }
  if (!report.passed()) {
    ctx.err << "gradient check failed: relative error " << report.max_rel_error << " at " << report.worst << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

struct ExperimentArgs {
  std::string data;
  std::string out;
  std::string config;
  std::vector<std::string> variants{"baseline", "joint-aware"};
  std::uint64_t seed = 0;
  int epochs = 20;
  int channels = 64;
  int workers = 1;
  std::string format = "text";
};

int cmd_experiment(const ExperimentArgs& a, const CLI::App& cmd, Context& ctx) {
  const json config = read_config(a.config, {"model", "train"});
  ModelConfig mc;
  TrainConfig tc;
  apply_section(config, "model", mc);
  apply_section(config, "train", tc);
  if (cmd.count("--channels")) mc.channels = a.channels;
  if (cmd.count("--seed")) mc.seed = tc.seed = a.seed;
  if (cmd.count("--epochs")) tc.epochs = a.epochs;
  tc.workers = a.workers;
  std::vector<Variant> variants;
  for (const auto& name : a.variants) variants.push_back(make_variant(name, mc, tc));
  const Dataset data = load_dataset(a.data);
  std::size_t index = 0;
  int last_epoch = -1;
  const ExperimentResult result = run_experiment(variants, data, [&](const EpochRecord& r, const TrainerState&) {
    if (r.epoch <= last_epoch) ++index;
    last_epoch = r.epoch;
    ctx.log.info(variants[std::min(index, variants.size() - 1)].name + ": " + format_breakdown(r));
  });
  ensure_dir(a.out);
  write_text(fs::path(a.out) / "experiment.json", result.to_json().dump(2) + "\n");
  write_text(fs::path(a.out) / "experiment.txt", result.to_text());
  if (a.format == "json") {
    ctx.out << result.to_json().dump(2) << '\n';
  } else {
    ctx.out << result.to_text();
  }
  for (const auto& v : result.variants) {
    if (!v.error.empty()) {
      ctx.err << "variant " << v.name << " failed: " << v.error << '\n';
      return kExitNumerical;
    }
  }
  return kExitOk;
}

int cmd_topology(const std::string& format, Context& ctx) {
  const auto& topo = standard_topology();
  if (format == "json") {
    ctx.out << json(topo).dump(2) << '\n';
    return kExitOk;
  }
  ctx.out << "joints:\n";
  for (std::size_t j = 0; j < topo.joint_names.size(); ++j) ctx.out << "  " << j << " " << topo.joint_names[j] << '\n';
  ctx.out << "bones (parent -> child):\n";
  for (std::size_t b = 0; b < topo.bones.size(); ++b) {
    ctx.out << "  " << b << " " << topo.joint_names[topo.bones[b].parent] << " -> "
            << topo.joint_names[topo.bones[b].child] << '\n';
  }
  ctx.out << "symmetry pairs (left bone, right bone):\n";
  for (const auto& p : topo.symmetry_pairs) ctx.out << "  " << p.left_bone << " " << p.right_bone << '\n';
  ctx.out << "angles (a-b-c, limits in rad):\n";
  for (int k = 0; k < topo.num_angles(); ++k) {
    const auto& t = topo.angle_triples[k];
    ctx.out << "  " << topo.joint_names[t.a] << "-" << topo.joint_names[t.b] << "-" << topo.joint_names[t.c] << " ["
            << topo.rom_limits[k].min_angle << ", " << topo.rom_limits[k].max_angle << "]\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Context ctx{out, err, Logger(err)};
  CLI::App app{"posekit: temporal 3D human pose lifting with joint-aware losses"};
  app.require_subcommand(1);
  const auto formats = CLI::IsMember({"text", "json"});

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write the synthetic corpus and its manifest");
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--config", gen.config, "JSON config with a \"corpus\" section");
  generate->add_option("--seed", gen.seed, "Random seed");
  generate->add_option("--frames", gen.frames, "Frames per sequence (at least 3)");
  generate->add_option("--noise-px", gen.noise_px, "2D keypoint noise sigma in pixels");
  generate->add_option("--noise-mm", gen.noise_mm, "3D joint noise sigma in mm");
  generate->add_option("--format", gen.format, "Summary format")->check(formats);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the lifting network");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "Output directory for checkpoint and logs")->required();
  train_cmd->add_option("--config", tr.config, "JSON config with \"model\" and \"train\" sections");
  train_cmd->add_option("--variant", tr.variant, "Loss preset")->check(CLI::IsMember({"baseline", "joint-aware"}));
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from");
  train_cmd->add_option("--seed", tr.seed, "Random seed");
  train_cmd->add_option("--epochs", tr.epochs, "Total number of epochs");
  train_cmd->add_option("--channels", tr.channels, "Channels per convolution");
  train_cmd->add_option("--batch-size", tr.batch_size, "Windows per batch");
  train_cmd->add_option("--lr", tr.lr, "Initial learning rate");
  train_cmd->add_option("--workers", tr.workers, "Worker threads for validation");
  train_cmd->add_flag("--timing", tr.timing, "Record wall time per epoch in the log");
  train_cmd->add_option("--format", tr.format, "Per-epoch output format")->check(formats);

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Write model predictions as sequence files");
  predict->add_option("--data", pr.data, "Dataset directory")->required();
  predict->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  predict->add_option("--out", pr.out, "Output directory")->required();
  predict->add_option("--split", pr.split, "Subjects to predict")->check(CLI::IsMember({"test", "train", "all"}));
  predict->add_option("--workers", pr.workers, "Worker threads");

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare predicted and ground-truth sequences");
  evaluate_cmd->add_option("--pred", ev.pred, "Directory of predicted sequences")->required();
  evaluate_cmd->add_option("--gt", ev.gt, "Directory of ground-truth sequences")->required();
  evaluate_cmd->add_option("--out", ev.out, "JSON report path (default <pred>/report.json)");
  evaluate_cmd->add_option("--format", ev.format, "Output format")->check(formats);
  evaluate_cmd->add_option("--workers", ev.workers, "Worker threads");
  evaluate_cmd->add_flag("--ignore-extra-gt", ev.ignore_extra_gt, "Allow ground-truth sequences without predictions");

  CheckGradsArgs cg;
  auto* check = app.add_subcommand("check-grads", "Finite-difference audit of loss and network gradients");
  check->add_option("--terms", cg.terms, "Terms to audit (theta,d,s,r,xdot,xddot,thetaddot,model,all)")
      ->delimiter(',');
  check->add_option("--pairs", cg.pairs, "Random sequence pairs per term");
  check->add_option("--probes", cg.probes, "Coordinates probed per pair");
  check->add_option("--model-probes", cg.model_probes, "Network parameters probed");
  check->add_option("--channels", cg.channels, "Channels of the audited network");
  check->add_flag("--no-model", cg.no_model, "Skip the network audit");
  check->add_option("--threshold", cg.threshold, "Maximum relative error");
  check->add_option("--seed", cg.seed, "Random seed");
  check->add_option("--format", cg.format, "Output format")->check(formats);

  std::string topo_format = "text";
  auto* topology = app.add_subcommand("topology", "Print the skeleton definition");
  topology->add_option("--format", topo_format, "Output format")->check(formats);

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "Train and compare loss variants");
  experiment->add_option("--data", ex.data, "Dataset directory")->required();
  experiment->add_option("--out", ex.out, "Output directory")->required();
  experiment->add_option("--config", ex.config, "JSON config with \"model\" and \"train\" sections");
  experiment->add_option("--variants", ex.variants, "Variants to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"baseline", "joint-aware"}));
  experiment->add_option("--seed", ex.seed, "Random seed");
  experiment->add_option("--epochs", ex.epochs, "Epochs per variant");
  experiment->add_option("--channels", ex.channels, "Channels per convolution");
  experiment->add_option("--workers", ex.workers, "Worker threads for validation");
  experiment->add_option("--format", ex.format, "Output format")->check(formats);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(gen, *generate, ctx);
    if (*train_cmd) return cmd_train(tr, *train_cmd, ctx);
    if (*predict) return cmd_predict(pr, ctx);
    if (*evaluate_cmd) return cmd_evaluate(ev, ctx);
    if (*check) return cmd_check_grads(cg, ctx);
    if (*topology) return cmd_topology(topo_format, ctx);
    if (*experiment) return cmd_experiment(ex, *experiment, ctx);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const json::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace posekit
