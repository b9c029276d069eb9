#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "longview/augment/augment.hpp"
#include "longview/stream/pipeline.hpp"
#include "longview/tensor/checkpoint.hpp"
#include "longview/tensor/optim.hpp"
#include "longview/train/model.hpp"
#include "longview/world/world.hpp"

namespace longview::train {

struct TemporalClassConfig {
  double episode_length_s = 288.0;
  OptimizerConfig optimizer{OptKind::adam, 5e-4f};
  int batch_size = 64;
  int epochs = 12;
  int input_size = 64;
  bool augment_color_jitter = true;
  BackboneSpec backbone;
  int max_steps_per_epoch = 0;  // 0 = every frame each epoch
  double early_stop_delta = 1e-3;
  int early_stop_patience = 3;
};

struct DinoConfig {
  float student_temp = 0.1f;
  float teacher_temp = 0.04f;
  float center_momentum = 0.9f;
  // Teacher EMA momentum follows a cosine from base to final over training.
  float teacher_momentum_base = 0.996f;
  float teacher_momentum_final = 1.f;
  int proj_hidden = 256;
  int proj_dim = 256;
  OptimizerConfig optimizer{OptKind::adamw, 5e-4f, 0.9f, 0.999f, 1e-8f, 1e-4f, 0.3f};
  augment::MultiCropSpec multicrop;
  int batch_size = 16;
  int epochs = 12;
  BackboneSpec backbone;
  int max_steps_per_epoch = 0;
  double early_stop_delta = 1e-3;
  int early_stop_patience = 3;
};

struct TemporalClassModel {
  ConvBackbone backbone;
  LinearHead head;

  TensorPtr logits(const TensorPtr& images) const { return head.forward(backbone.forward(images)); }
  NamedTensors all_params() const;
};

struct DinoModel {
  ConvBackbone backbone;
  MlpHead head;

  TensorPtr forward(const TensorPtr& images) const { return head.forward(backbone.forward(images)); }
  NamedTensors all_params() const;
};

struct DinoTrainState {
  DinoModel student;
  DinoModel teacher;           // parameters never require grad
  std::vector<float> center;   // length proj_dim
  int64_t steps_done = 0;
  int64_t total_steps = 1;     // for the momentum schedule

  float teacher_momentum(const DinoConfig& cfg) const;
};

// One supervised step of the episode-classification pretext task on a batch
// of raw frames: augment, cross-entropy over episode labels, optimizer step.
float temporal_classification_step(TemporalClassModel& model, Optimizer& opt,
                                   const std::vector<Image>& frames,
                                   const std::vector<int>& episode_labels, int num_classes,
                                   const augment::AugmentPolicy& policy, uint64_t seed);

// Distillation distributions for one batch of teacher logits.
// P = softmax((logits - center) / temp), row-wise; plain float math, no tape.
std::vector<float> teacher_distribution(const TensorPtr& teacher_logits,
                                        const std::vector<float>& center, float temp);

// One self-distillation step: multicrop views, sharpened/centered teacher
// targets with gradients blocked, cross-entropy against student distributions
// over all (teacher global, student view) pairs with distinct views, AdamW
// step with clipping, teacher EMA, center update. Returns the loss.
float dino_step(DinoTrainState& state, Optimizer& opt, const std::vector<Image>& frames,
                const DinoConfig& cfg, uint64_t seed);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double wall_s = 0.0;
};

struct TrainResult {
  CheckpointData checkpoint;
  std::vector<EpochStats> trace;
};

TrainResult train_temporal(const world::WorldPtr& w, const stream::StreamIndex& subset,
                           const TemporalClassConfig& cfg, uint64_t seed,
                           const std::map<std::string, std::string>& extra_meta = {});

TrainResult train_dino(const world::WorldPtr& w, const stream::StreamIndex& subset,
                       const DinoConfig& cfg, uint64_t seed,
                       const std::map<std::string, std::string>& extra_meta = {});

// Deterministic eval-path embeddings: resize to the model input size if
// needed, normalize, forward. No augmentation, no gradient side effects.
TensorPtr embed(const ConvBackbone& backbone, const std::vector<Image>& frames, int input_size);

// Rebuilds the encoder (and input size) recorded in a checkpoint.
ConvBackbone backbone_from_checkpoint(const CheckpointData& ckpt, const std::string& prefix = "backbone.");
int checkpoint_input_size(const CheckpointData& ckpt);

void write_trace_csv(const std::string& path, const std::vector<EpochStats>& trace);

}  // namespace longview::train
