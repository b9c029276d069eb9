#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "longview/eval/protocols.hpp"
#include "longview/train/ssl.hpp"
#include "longview/world/world.hpp"

namespace longview::cli {

// Flat key=value experiment description; see docs/config reference in the
// README. Unknown keys are rejected.
struct ExperimentConfig {
  world::WorldSpec world;

  std::string algorithm = "temporal_classification";  // or "dino"
  double total_duration_s = 2000.0;
  double fps = 5.0;
  std::vector<double> fractions = {1.0, 0.1, 0.01, 0.001};  // sorted descending
  int repeats = 3;
  uint64_t seed = 1;
  std::string output_dir = "runs/default";

  // Training.
  int train_epochs = 12;
  int train_batch_size = 32;
  int train_max_steps_per_epoch = 0;
  int input_size = 32;
  int embedding_dim = 64;
  std::string backbone_stages = "12:2,24:2,48:2";
  double episode_length_s = 288.0;
  float lr = 5e-4f;
  float weight_decay = 1e-4f;
  float grad_clip = 0.3f;
  // Self-distillation.
  int dino_n_local = 8;
  int dino_local_size = 16;
  int dino_proj_dim = 64;
  int dino_proj_hidden = 64;

  // Evaluation.
  std::vector<std::string> protocols = {"few_shot", "linear_probe"};  // + few_shot_2x, ood
  int eval_per_class = 13;
  int eval_test_per_class = 16;
  int eval_finetune_epochs = 8;
  float eval_finetune_lr = 1e-4f;
  int practice_size = 320;

  // Scaling.
  double threshold = 90.0;
  double ood_threshold = 72.3;

  void validate() const;
  std::string serialize() const;  // canonical form, drives the config hash
  uint64_t hash() const;

  train::TemporalClassConfig temporal_config() const;
  train::DinoConfig dino_config() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace longview::cli
