#include "longview/cli/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace longview::cli {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  world.validate();
  if (algorithm != "temporal_classification" && algorithm != "dino")
    throw std::invalid_argument("config: algorithm must be temporal_classification or dino, got '" +
                                algorithm + "'");
  if (!(total_duration_s > 0)) throw std::invalid_argument("config: total_duration_s must be > 0");
  if (!(fps > 0)) throw std::invalid_argument("config: fps must be > 0");
  if (fractions.empty()) throw std::invalid_argument("config: fractions must be nonempty");
  for (size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0) || fractions[i] > 1.0)
      throw std::invalid_argument("config: fractions must lie in (0,1]");
    if (i > 0 && fractions[i] >= fractions[i - 1])
      throw std::invalid_argument("config: fractions must be sorted descending");
  }
  if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
  if (train_epochs < 1) throw std::invalid_argument("config: train.epochs must be >= 1");
  if (eval_per_class < 1) throw std::invalid_argument("config: eval.per_class must be >= 1");
  for (const auto& p : protocols)
    if (p != "few_shot" && p != "few_shot_2x" && p != "linear_probe" && p != "ood" &&
        p != "ood_2pct")
      throw std::invalid_argument("config: unknown protocol '" + p + "'");
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "algorithm = " << algorithm << "\n";
  os << "fps = " << fmt_g(fps) << "\n";
  os << "fractions = ";
  for (size_t i = 0; i < fractions.size(); ++i) os << (i ? "," : "") << fmt_g(fractions[i]);
  os << "\n";
  os << "output_dir = " << output_dir << "\n";
  os << "repeats = " << repeats << "\n";
  os << "seed = " << seed << "\n";
  os << "total_duration_s = " << fmt_g(total_duration_s) << "\n";

  os << "dino.local_size = " << dino_local_size << "\n";
  os << "dino.n_local = " << dino_n_local << "\n";
  os << "dino.proj_dim = " << dino_proj_dim << "\n";
  os << "dino.proj_hidden = " << dino_proj_hidden << "\n";

  os << "eval.finetune_epochs = " << eval_finetune_epochs << "\n";
  os << "eval.finetune_lr = " << fmt_g(eval_finetune_lr) << "\n";
  os << "eval.per_class = " << eval_per_class << "\n";
  os << "eval.practice_size = " << practice_size << "\n";
  os << "eval.protocols = ";
  for (size_t i = 0; i < protocols.size(); ++i) os << (i ? "," : "") << protocols[i];
  os << "\n";
  os << "eval.test_per_class = " << eval_test_per_class << "\n";

  os << "scaling.ood_threshold = " << fmt_g(ood_threshold) << "\n";
  os << "scaling.threshold = " << fmt_g(threshold) << "\n";

  os << "train.backbone_stages = " << backbone_stages << "\n";
  os << "train.batch_size = " << train_batch_size << "\n";
  os << "train.embedding_dim = " << embedding_dim << "\n";
  os << "train.episode_length_s = " << fmt_g(episode_length_s) << "\n";
  os << "train.epochs = " << train_epochs << "\n";
  os << "train.grad_clip = " << fmt_g(grad_clip) << "\n";
  os << "train.input_size = " << input_size << "\n";
  os << "train.lr = " << fmt_g(lr) << "\n";
  os << "train.max_steps_per_epoch = " << train_max_steps_per_epoch << "\n";
  os << "train.weight_decay = " << fmt_g(weight_decay) << "\n";

  os << "world.camera_drift = " << fmt_g(world.camera_drift) << "\n";
  os << "world.frame_size = " << world.frame_height << "\n";
  os << "world.num_classes = " << world.num_classes << "\n";
  os << "world.num_scenes = " << world.num_scenes << "\n";
  os << "world.objects_per_scene = " << world.objects_per_scene << "\n";
  os << "world.palette_size = " << world.palette_size << "\n";
  os << "world.scene_dwell_s = " << fmt_g(world.scene_dwell_s) << "\n";
  os << "world.seed = " << world.seed << "\n";
  return os.str();
}

uint64_t ExperimentConfig::hash() const {
  std::string s = serialize();
  return fnv1a(s.data(), s.size());
}

train::TemporalClassConfig ExperimentConfig::temporal_config() const {
  train::TemporalClassConfig cfg;
  cfg.episode_length_s = episode_length_s;
  cfg.optimizer.kind = OptKind::adam;
  cfg.optimizer.lr = lr;
  cfg.batch_size = train_batch_size;
  cfg.epochs = train_epochs;
  cfg.input_size = input_size;
  cfg.backbone = train::BackboneSpec::parse(backbone_stages, 3, embedding_dim);
  cfg.max_steps_per_epoch = train_max_steps_per_epoch;
  return cfg;
}

train::DinoConfig ExperimentConfig::dino_config() const {
  train::DinoConfig cfg;
  cfg.optimizer.kind = OptKind::adamw;
  cfg.optimizer.lr = lr;
  cfg.optimizer.weight_decay = weight_decay;
  cfg.optimizer.grad_clip = grad_clip;
  cfg.batch_size = train_batch_size;
  cfg.epochs = train_epochs;
  cfg.backbone = train::BackboneSpec::parse(backbone_stages, 3, embedding_dim);
  cfg.max_steps_per_epoch = train_max_steps_per_epoch;
  cfg.proj_dim = dino_proj_dim;
  cfg.proj_hidden = dino_proj_hidden;
  cfg.multicrop.global_size = input_size;
  cfg.multicrop.n_local = dino_n_local;
  cfg.multicrop.local_size = dino_local_size;
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));

    if (key == "algorithm") cfg.algorithm = val;
    else if (key == "total_duration_s") cfg.total_duration_s = std::stod(val);
    else if (key == "fps") cfg.fps = std::stod(val);
    else if (key == "fractions") cfg.fractions = parse_double_list(val);
    else if (key == "repeats") cfg.repeats = std::stoi(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else if (key == "output_dir") cfg.output_dir = val;
    else if (key == "world.seed") cfg.world.seed = std::stoull(val);
    else if (key == "world.num_classes") cfg.world.num_classes = std::stoi(val);
    else if (key == "world.num_scenes") cfg.world.num_scenes = std::stoi(val);
    else if (key == "world.objects_per_scene") cfg.world.objects_per_scene = std::stoi(val);
    else if (key == "world.camera_drift") cfg.world.camera_drift = std::stod(val);
    else if (key == "world.scene_dwell_s") cfg.world.scene_dwell_s = std::stod(val);
    else if (key == "world.frame_size") cfg.world.frame_height = cfg.world.frame_width = std::stoi(val);
    else if (key == "world.palette_size") cfg.world.palette_size = std::stoi(val);
    else if (key == "train.epochs") cfg.train_epochs = std::stoi(val);
    else if (key == "train.batch_size") cfg.train_batch_size = std::stoi(val);
    else if (key == "train.max_steps_per_epoch") cfg.train_max_steps_per_epoch = std::stoi(val);
    else if (key == "train.input_size") cfg.input_size = std::stoi(val);
    else if (key == "train.embedding_dim") cfg.embedding_dim = std::stoi(val);
    else if (key == "train.backbone_stages") cfg.backbone_stages = val;
    else if (key == "train.episode_length_s") cfg.episode_length_s = std::stod(val);
    else if (key == "train.lr") cfg.lr = std::stof(val);
    else if (key == "train.weight_decay") cfg.weight_decay = std::stof(val);
    else if (key == "train.grad_clip") cfg.grad_clip = std::stof(val);
    else if (key == "dino.n_local") cfg.dino_n_local = std::stoi(val);
    else if (key == "dino.local_size") cfg.dino_local_size = std::stoi(val);
    else if (key == "dino.proj_dim") cfg.dino_proj_dim = std::stoi(val);
    else if (key == "dino.proj_hidden") cfg.dino_proj_hidden = std::stoi(val);
    else if (key == "eval.protocols") cfg.protocols = parse_string_list(val);
    else if (key == "eval.per_class") cfg.eval_per_class = std::stoi(val);
    else if (key == "eval.test_per_class") cfg.eval_test_per_class = std::stoi(val);
    else if (key == "eval.finetune_epochs") cfg.eval_finetune_epochs = std::stoi(val);
    else if (key == "eval.finetune_lr") cfg.eval_finetune_lr = std::stof(val);
    else if (key == "eval.practice_size") cfg.practice_size = std::stoi(val);
    else if (key == "scaling.threshold") cfg.threshold = std::stod(val);
    else if (key == "scaling.ood_threshold") cfg.ood_threshold = std::stod(val);
    else
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" +
                                  key + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_config: cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config_text(os.str());
}

}  // namespace longview::cli
