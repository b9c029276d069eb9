#include "longview/cli/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "longview/eval/distortion.hpp"
#include "longview/scaling/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace longview::cli {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llX", static_cast<unsigned long long>(v));
  return buf;
}

std::string iso_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string fraction_tag(double f) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", f);
  return buf;
}

json fit_to_json(const ReproRow& row) {
  json j;
  j["condition"] = row.condition;
  j["fit"] = {{"intercept", row.fit.intercept}, {"slope", row.fit.slope},
              {"resid_se", row.fit.resid_se},  {"n", row.fit.n},
              {"mean_x", row.fit.mean_x},      {"sxx", row.fit.sxx}};
  j["threshold"] = row.ex.threshold;
  j["ci_method"] = "pointwise mean-response band crossing (Student t, df=n-2)";
  if (row.ex.no_crossing) {
    j["no_crossing"] = true;
    return j;
  }
  j["hours_est"] = row.ex.hours_est;
  j["years_est"] = row.ex.years_est;
  j["years_ci"] = {row.ex.years_lo, row.ex.years_hi};
  j["sleep_adjusted_years"] = row.ex.sleep_adjusted_years;
  j["capped"] = row.ex.capped;
  j["ci_hi_capped"] = row.ex.ci_hi_capped;
  j["display"] = scaling::format_years(row.ex.years_est, row.ex.capped);
  return j;
}

}  // namespace

std::string default_fixture_path() {
  return std::string(LONGVIEW_SOURCE_DIR) + "/data/appendix_points.csv";
}

std::string results_csv_header() {
  return "condition,algorithm,protocol,hours,accuracy_top1,accuracy_top5,run_id,seed";
}

std::string to_csv_line(const ResultRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.9g,%.6f,%.6f,%s,%llu", row.condition.c_str(),
                row.algorithm.c_str(), row.protocol.c_str(), row.hours, row.top1, row.top5,
                row.run_id.c_str(), static_cast<unsigned long long>(row.seed));
  return buf;
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty CSV");
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 8) throw std::runtime_error(path + ": bad results row '" + line + "'");
    ResultRow r;
    r.condition = f[0];
    r.algorithm = f[1];
    r.protocol = f[2];
    r.hours = std::stod(f[3]);
    r.top1 = std::stod(f[4]);
    r.top5 = std::stod(f[5]);
    r.run_id = f[6];
    r.seed = std::stoull(f[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

ConditionPoints load_points_csv(const std::string& path, const std::string& metric) {
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty CSV");
  auto header = split_csv_line(line);
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  int c_cond = col("condition"), c_hours = col("hours"), c_run = col("run_id");
  int c_acc = col("accuracy");
  if (c_acc < 0) c_acc = col(metric == "top1" ? "accuracy_top1" : "accuracy_top5");
  if (c_cond < 0 || c_hours < 0 || c_acc < 0)
    throw std::runtime_error(path + ": CSV must have condition, hours and an accuracy column");

  ConditionPoints out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    scaling::ScalingPoint p;
    p.condition = f[static_cast<size_t>(c_cond)];
    p.hours = std::stod(f[static_cast<size_t>(c_hours)]);
    p.accuracy = std::stod(f[static_cast<size_t>(c_acc)]);
    if (c_run >= 0) p.run_id = f[static_cast<size_t>(c_run)];
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const auto& e) { return e.first == p.condition; });
    if (it == out.end()) {
      out.emplace_back(p.condition, std::vector<scaling::ScalingPoint>{p});
    } else {
      it->second.push_back(p);
    }
  }
  return out;
}

namespace {

struct EvalSets {
  eval::LabeledSet few_shot;      // k per class
  eval::LabeledSet few_shot_2x;   // 2k per class
  eval::LabeledSet test;
  eval::LabeledSet practice;
};

EvalSets build_eval_sets(const ExperimentConfig& cfg, const world::WorldPtr& w) {
  // Held out by construction: the windows start where the training stream
  // ends, so no training subset can overlap them.
  double window = std::max(120.0 * cfg.world.scene_dwell_s, 600.0);
  double t0 = cfg.total_duration_s;
  double t1 = t0 + window;
  double t2 = t1 + window;
  EvalSets sets;
  sets.few_shot = eval::stratified_labeled_set(w, t0, t1, cfg.eval_per_class,
                                               hash_mix(cfg.seed, 0xE1ULL));
  sets.few_shot_2x = eval::stratified_labeled_set(w, t0, t1, 2 * cfg.eval_per_class,
                                                  hash_mix(cfg.seed, 0xE2ULL));
  sets.test = eval::stratified_labeled_set(w, t1, t2, cfg.eval_test_per_class,
                                           hash_mix(cfg.seed, 0xE3ULL));
  int practice_per_class = std::max(1, cfg.practice_size / cfg.world.num_classes);
  sets.practice = eval::stratified_labeled_set(w, t0, t1, practice_per_class,
                                               hash_mix(cfg.seed, 0xE4ULL));
  return sets;
}

std::vector<ResultRow> evaluate_run(const ExperimentConfig& cfg, const EvalSets& sets,
                                    const train::ConvBackbone& backbone, double hours,
                                    const std::string& run_id, uint64_t run_seed) {
  std::vector<ResultRow> rows;
  eval::FinetuneConfig fcfg;
  fcfg.epochs = cfg.eval_finetune_epochs;
  fcfg.lr = cfg.eval_finetune_lr;

  auto make_row = [&](const std::string& protocol, double top1, double top5) {
    ResultRow r;
    r.condition = cfg.algorithm + "/" + protocol;
    r.algorithm = cfg.algorithm;
    r.protocol = protocol;
    r.hours = hours;
    r.top1 = top1;
    r.top5 = top5;
    r.run_id = run_id;
    r.seed = run_seed;
    return r;
  };

  for (const auto& protocol : cfg.protocols) {
    if (protocol == "few_shot") {
      auto model = eval::few_shot_finetune(backbone, cfg.input_size, sets.few_shot, fcfg,
                                           hash_mix(run_seed, 0xF5ULL));
      auto acc = eval::evaluate_model(model, cfg.input_size, sets.test);
      rows.push_back(make_row(protocol, acc.top1, acc.top5));
    } else if (protocol == "few_shot_2x") {
      auto model = eval::few_shot_finetune(backbone, cfg.input_size, sets.few_shot_2x, fcfg,
                                           hash_mix(run_seed, 0xF6ULL));
      auto acc = eval::evaluate_model(model, cfg.input_size, sets.test);
      rows.push_back(make_row(protocol, acc.top1, acc.top5));
    } else if (protocol == "linear_probe") {
      auto probe = eval::linear_probe(backbone, cfg.input_size, sets.few_shot_2x, sets.test,
                                      hash_mix(run_seed, 0xF7ULL));
      rows.push_back(make_row(protocol, probe.top1, probe.top5));
    } else if (protocol == "ood" || protocol == "ood_2pct") {
      const eval::LabeledSet* prior = protocol == "ood_2pct" ? &sets.few_shot_2x : nullptr;
      auto model = eval::practice_finetune(backbone, cfg.input_size, sets.practice, prior, fcfg,
                                           hash_mix(run_seed, 0xF8ULL));
      auto suite = eval::OodSuite::default_suite();
      suite.practice_size = cfg.practice_size;
      auto ood = eval::ood_eval(model, cfg.input_size, suite, sets.test,
                                hash_mix(run_seed, 0xF9ULL));
      // top1 carries the mean OOD accuracy; top5 carries the clean accuracy.
      rows.push_back(make_row(protocol, ood.mean_ood, ood.clean_accuracy));
    }
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);

  const std::string config_hash = hex64(cfg.hash());
  const std::string config_path = cfg.output_dir + "/config.txt";
  if (fs::exists(config_path)) {
    if (read_file(config_path) != cfg.serialize())
      throw std::runtime_error("run_experiment: " + cfg.output_dir +
                               " holds runs for a different config; refusing to mix results. "
                               "Use a fresh output_dir or restore the original config.");
  } else {
    write_file(config_path, cfg.serialize());
  }

  auto w = world::build_world(cfg.world);
  stream::StreamIndex full{cfg.total_duration_s, cfg.fps, 0.0};
  EvalSets sets = build_eval_sets(cfg, w);

  std::vector<ResultRow> all_rows;
  for (size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
    for (int rep = 0; rep < cfg.repeats; ++rep) {
      double fraction = cfg.fractions[fi];
      std::string run_id = cfg.algorithm + "_f" + fraction_tag(fraction) + "_r" + std::to_string(rep);
      std::string run_dir = cfg.output_dir + "/" + run_id;
      std::string manifest_path = run_dir + "/manifest.json";
      std::string points_path = run_dir + "/points.csv";

      if (fs::exists(manifest_path)) {
        json manifest = json::parse(read_file(manifest_path));
        if (manifest.value("config_hash", "") != config_hash)
          throw std::runtime_error("run_experiment: manifest " + manifest_path +
                                   " was produced by a different config (hash " +
                                   manifest.value("config_hash", "?") + " vs " + config_hash +
                                   "); refusing to resume");
        if (manifest.value("status", "") == "complete") {
          auto rows = read_results_csv(points_path);
          all_rows.insert(all_rows.end(), rows.begin(), rows.end());
          continue;
        }
      }
      fs::create_directories(run_dir);
      std::string started = iso_now();

      // The subset start is drawn uniformly from the valid offsets.
      uint64_t run_seed = hash_mix(cfg.seed, static_cast<uint64_t>(fi), static_cast<uint64_t>(rep));
      double duration = fraction * cfg.total_duration_s;
      Rng offset_rng(hash_mix(run_seed, 0x0FFULL));
      double offset = fraction < 1.0 ? offset_rng.uniform(0.0, cfg.total_duration_s - duration) : 0.0;
      auto subset = stream::contiguous_subset(full, {fraction, offset});

      std::map<std::string, std::string> meta{{"run_id", run_id}, {"config_hash", config_hash}};
      train::TrainResult tr;
      if (cfg.algorithm == "dino") {
        tr = train::train_dino(w, subset, cfg.dino_config(), run_seed, meta);
      } else {
        tr = train::train_temporal(w, subset, cfg.temporal_config(), run_seed, meta);
      }
      save_checkpoint(run_dir + "/checkpoint.bin", tr.checkpoint);
      train::write_trace_csv(run_dir + "/trace.csv", tr.trace);

      auto backbone = train::backbone_from_checkpoint(tr.checkpoint);
      double hours = subset.total_duration_s / 3600.0;
      auto rows = evaluate_run(cfg, sets, backbone, hours, run_id, run_seed);

      std::ostringstream pts;
      pts << results_csv_header() << "\n";
      for (const auto& r : rows) pts << to_csv_line(r) << "\n";
      write_file(points_path, pts.str());

      json manifest;
      manifest["run_id"] = run_id;
      manifest["config_hash"] = config_hash;
      manifest["status"] = "complete";
      manifest["checkpoint"] = run_dir + "/checkpoint.bin";
      manifest["trace"] = run_dir + "/trace.csv";
      manifest["points"] = points_path;
      manifest["hours"] = hours;
      manifest["start_offset_s"] = offset;
      manifest["epochs_run"] = tr.trace.size();
      manifest["started"] = started;
      manifest["finished"] = iso_now();
      write_file(manifest_path, manifest.dump(2) + "\n");

      all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    }
  }

  std::ostringstream os;
  os << results_csv_header() << "\n";
  for (const auto& r : all_rows) os << to_csv_line(r) << "\n";
  write_file(cfg.output_dir + "/results.csv", os.str());
  return all_rows;
}

ReproReport repro_paper(const std::string& fixture_path) {
  std::string bytes = read_file(fixture_path);
  uint64_t checksum = fnv1a(bytes.data(), bytes.size());
  if (checksum != kFixtureChecksum)
    throw std::runtime_error("repro_paper: fixture checksum mismatch for " + fixture_path +
                             " (got " + hex64(checksum) + ", expected " + hex64(kFixtureChecksum) +
                             "); the bundled data points were modified");

  auto conditions = load_points_csv(fixture_path, "accuracy");
  auto points_of = [&](const std::string& name) -> const std::vector<scaling::ScalingPoint>& {
    for (const auto& [cond, pts] : conditions)
      if (cond == name) return pts;
    throw std::runtime_error("repro_paper: fixture is missing condition '" + name + "'");
  };

  ReproReport report;
  const char* table1[] = {"temporal_classification/few_shot_1pct",
                          "temporal_classification/few_shot_2pct",
                          "temporal_classification/linear_probe",
                          "dino/few_shot_1pct",
                          "dino/few_shot_2pct",
                          "dino/linear_probe"};
  for (const char* cond : table1) {
    ReproRow row;
    row.condition = cond;
    row.fit = scaling::fit_loglinear(points_of(cond));
    row.ex = scaling::invert_threshold(row.fit, 90.0);
    report.table1.push_back(std::move(row));
  }

  auto theta = scaling::derive_ood_threshold(
      points_of("temporal_classification/ood_practice"), kTable2PracticeYears,
      points_of("temporal_classification/ood_practice_2pct"), kTable2Practice2pctYears);
  report.theta_first = theta.theta_first;
  report.theta_second = theta.theta_second;
  report.theta = theta.theta_mean;

  const char* table2[] = {"temporal_classification/ood_practice",
                          "temporal_classification/ood_practice_2pct", "dino/ood_practice",
                          "dino/ood_practice_2pct"};
  for (const char* cond : table2) {
    ReproRow row;
    row.condition = cond;
    row.fit = scaling::fit_loglinear(points_of(cond));
    row.ex = scaling::invert_threshold(row.fit, report.theta);
    report.table2.push_back(std::move(row));
  }
  return report;
}

std::string repro_report_json(const ReproReport& report) {
  json j;
  j["table1_threshold"] = 90.0;
  j["table1"] = json::array();
  for (const auto& row : report.table1) j["table1"].push_back(fit_to_json(row));
  j["derived_ood_threshold"] = {{"first", report.theta_first},
                                {"second", report.theta_second},
                                {"mean", report.theta}};
  j["table2"] = json::array();
  for (const auto& row : report.table2) j["table2"].push_back(fit_to_json(row));
  return j.dump(2) + "\n";
}

std::string repro_report_text(const ReproReport& report) {
  std::ostringstream os;
  char buf[256];
  auto print_rows = [&](const std::vector<ReproRow>& rows) {
    for (const auto& row : rows) {
      std::string est = scaling::format_years(row.ex.years_est, row.ex.capped);
      std::string lo = scaling::format_years(row.ex.years_lo, row.ex.years_lo > scaling::kYearsCap);
      std::string hi = scaling::format_years(row.ex.years_hi,
                                             row.ex.ci_hi_capped || row.ex.years_hi > scaling::kYearsCap);
      std::string sleep = scaling::format_years(row.ex.sleep_adjusted_years,
                                                row.ex.sleep_adjusted_years > scaling::kYearsCap);
      std::snprintf(buf, sizeof(buf), "  %-46s %>0s", "", "");
      os << "  " << row.condition;
      os << std::string(row.condition.size() < 46 ? 46 - row.condition.size() : 1, ' ');
      std::snprintf(buf, sizeof(buf), "%8s  (%s, %s)  sleep-adj %8s  [slope %.3f]\n", est.c_str(),
                    lo.c_str(), hi.c_str(), sleep.c_str(), row.fit.slope);
      os << buf;
    }
  };
  os << "Years of natural video to reach 90% top-5 accuracy (threshold = 90):\n";
  print_rows(report.table1);
  std::snprintf(buf, sizeof(buf),
                "Derived human-level OOD threshold: %.2f%% (row 1: %.2f, row 2: %.2f)\n",
                report.theta, report.theta_first, report.theta_second);
  os << buf;
  os << "Years of natural video to reach human-level OOD accuracy:\n";
  print_rows(report.table2);
  return os.str();
}

std::vector<std::string> emit_report(const ConditionPoints& conditions, const std::string& out_dir,
                                     double threshold, double ood_threshold) {
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  for (const auto& [condition, points] : conditions) {
    if (points.size() < 3) {
      std::fprintf(stderr, "emit_report: skipping '%s' (%zu points, need >= 3)\n",
                   condition.c_str(), points.size());
      continue;
    }
    scaling::FigureSpec spec;
    spec.title = condition;
    spec.points = points;
    spec.threshold = condition.find("ood") != std::string::npos ? ood_threshold : threshold;
    std::string name = condition;
    std::replace(name.begin(), name.end(), '/', '_');
    std::string path = out_dir + "/" + name + ".svg";
    write_file(path, scaling::render_figure_svg(spec));
    written.push_back(path);
  }
  return written;
}

}  // namespace longview::cli
