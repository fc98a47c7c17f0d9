#include "posekit/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "posekit/parallel.hpp"

namespace posekit {

namespace {

const std::vector<std::pair<std::string, std::string>>& action_table() {
  static const std::vector<std::pair<std::string, std::string>> table{
      {"Directions", "Dir."}, {"Discussion", "Dis."},  {"Eating", "Eat"},      {"Greeting", "Grt"},
      {"Phoning", "Phn"},     {"Photo", "Pht"},        {"Posing", "Pos"},      {"Purchasing", "Pur"},
      {"Sitting", "Sit"},     {"SittingDown", "SitD"}, {"Smoking", "Smk"},     {"Waiting", "Wat"},
      {"WalkDog", "WD"},      {"Walking", "Wlk"},      {"WalkTogether", "WT"},
  };
  return table;
}

int action_rank(const std::string& label) {
  const auto& table = action_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].first == label) return static_cast<int>(i);
  }
  return static_cast<int>(table.size());
}

struct Accumulator {
  MetricValues sum;
  long frames = 0;

  void add(const MetricValues& v, long n) {
    const auto w = static_cast<double>(n);
    sum.mpjpe += w * v.mpjpe;
    sum.p_mpjpe += w * v.p_mpjpe;
    sum.n_mpjpe += w * v.n_mpjpe;
    sum.mpjve += w * v.mpjve;
    sum.mpjae += w * v.mpjae;
    frames += n;
  }

  [[nodiscard]] MetricValues mean() const {
    const auto w = static_cast<double>(frames);
    return {sum.mpjpe / w, sum.p_mpjpe / w, sum.n_mpjpe / w, sum.mpjve / w, sum.mpjae / w};
  }
};

}  // namespace

const std::vector<std::string>& canonical_actions() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, abbrev] : action_table()) out.push_back(name);
    return out;
  }();
  return names;
}

std::string action_abbreviation(const std::string& action) {
  for (const auto& [name, abbrev] : action_table()) {
    if (name == action) return abbrev;
  }
  return action;
}

MetricValues evaluate_sequence(const PoseSequence& pred, const PoseSequence& gt) {
  return {mpjpe(pred, gt), p_mpjpe(pred, gt), n_mpjpe(pred, gt), mpjve(pred, gt), mpjae(pred, gt)};
}

MetricReport evaluate(const std::vector<PoseSequence>& pred_set, const std::vector<PoseSequence>& gt_set,
                      const std::vector<std::string>& action_labels, int workers) {
  if (pred_set.size() != gt_set.size() || pred_set.size() != action_labels.size()) {
    throw DataError("evaluate: " + std::to_string(pred_set.size()) + " predictions, " +
                    std::to_string(gt_set.size()) + " ground-truth sequences and " +
                    std::to_string(action_labels.size()) + " labels do not match");
  }
  if (pred_set.empty()) throw DataError("evaluate: no sequences");

  const int n = static_cast<int>(pred_set.size());
  std::vector<MetricValues> per_sequence(static_cast<std::size_t>(n));
  parallel_for(n, workers, [&](int i) {
    try {
      per_sequence[static_cast<std::size_t>(i)] = evaluate_sequence(pred_set[i], gt_set[i]);
    } catch (const Error& e) {
      throw DataError("sequence " + std::to_string(i) + ": " + e.what());
    }
  });

  // Reduction runs in input order regardless of the worker count.
  std::map<std::string, Accumulator> by_action;
  Accumulator overall;
  for (int i = 0; i < n; ++i) {
    const long frames = gt_set[i].size();
    by_action[action_labels[i]].add(per_sequence[i], frames);
    overall.add(per_sequence[i], frames);
  }

  MetricReport report;
  report.fps = gt_set.front().fps;
  report.frames = overall.frames;
  report.overall = overall.mean();
  for (const auto& [label, acc] : by_action) report.per_action.push_back({label, acc.mean(), acc.frames});
  std::stable_sort(report.per_action.begin(), report.per_action.end(),
                   [](const ActionMetrics& a, const ActionMetrics& b) {
                     const int ra = action_rank(a.label);
                     const int rb = action_rank(b.label);
                     return ra != rb ? ra < rb : a.label < b.label;
                   });
  return report;
}

void to_json(nlohmann::json& j, const MetricValues& v) {
  j = {{"mpjpe", v.mpjpe}, {"p_mpjpe", v.p_mpjpe}, {"n_mpjpe", v.n_mpjpe}, {"mpjve", v.mpjve}, {"mpjae", v.mpjae}};
}

void from_json(const nlohmann::json& j, MetricValues& v) {
  v.mpjpe = j.at("mpjpe").get<double>();
  v.p_mpjpe = j.at("p_mpjpe").get<double>();
  v.n_mpjpe = j.at("n_mpjpe").get<double>();
  v.mpjve = j.at("mpjve").get<double>();
  v.mpjae = j.at("mpjae").get<double>();
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : r.per_action) {
    actions.push_back({{"label", a.label},
                       {"abbreviation", action_abbreviation(a.label)},
                       {"frames", a.frames},
                       {"metrics", a.values}});
  }
  j = {{"overall", r.overall}, {"frames", r.frames}, {"fps", r.fps}, {"actions", actions}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
  r.overall = j.at("overall").get<MetricValues>();
  r.frames = j.at("frames").get<long>();
  r.fps = j.at("fps").get<double>();
  r.per_action.clear();
  for (const auto& a : j.at("actions")) {
    r.per_action.push_back({a.at("label").get<std::string>(), a.at("metrics").get<MetricValues>(),
                            a.at("frames").get<long>()});
  }
}

std::string format_report_table(const MetricReport& report) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %8s %10s %10s %10s %10s %10s %12s %12s\n", "Action", "Frames", "MPJPE",
                "P-MPJPE", "N-MPJPE", "MPJVE", "MPJAE", "MPJVE/s", "MPJAE/s");
  os << line;
  const double fps = report.fps;
  auto row = [&](const std::string& name, long frames, const MetricValues& v) {
    std::snprintf(line, sizeof line, "%-8s %8ld %10.4f %10.4f %10.4f %10.4f %10.4f %12.4f %12.4f\n", name.c_str(),
                  frames, v.mpjpe, v.p_mpjpe, v.n_mpjpe, v.mpjve, v.mpjae, v.mpjve * fps, v.mpjae * fps * fps);
    os << line;
  };
  for (const auto& a : report.per_action) row(action_abbreviation(a.label), a.frames, a.values);
  row("Avg", report.frames, report.overall);
  return os.str();
}

}  // namespace posekit
