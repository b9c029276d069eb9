#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "longview/train/ssl.hpp"
#include "longview/world/world.hpp"

namespace longview::eval {

struct LabeledSet {
  std::vector<std::pair<Image, int>> items;
  int num_classes = 0;

  bool covers_all_classes() const;
};

// Stratified dominant-class sampling from the world over [t0, t1): up to
// `per_class` frames for each class. Throws if some class cannot be filled
// within the time budget.
LabeledSet stratified_labeled_set(const world::WorldPtr& w, double t0, double t1, int per_class,
                                  uint64_t seed);

// Percent of rows whose true label ranks in the top k scores. Ties rank the
// lower class index first.
double topk_accuracy(const std::vector<float>& scores, int n, int num_classes,
                     const std::vector<int>& labels, int k);

struct AccuracyResult {
  double top1 = 0.0;
  double top5 = 0.0;
  int n = 0;
};

struct FinetuneConfig {
  int epochs = 20;
  float lr = 1e-4f;
  int batch_size = 32;
  bool head_only = false;
  bool augment = true;  // episode-classification pipeline minus the color jitter
};

// Full-model finetune of a pretrained encoder with a fresh classifier head
// over the labeled vocabulary. Deterministic per seed.
train::TemporalClassModel few_shot_finetune(const train::ConvBackbone& pretrained, int input_size,
                                            const LabeledSet& labeled, const FinetuneConfig& cfg,
                                            uint64_t seed);

AccuracyResult evaluate_model(const train::TemporalClassModel& model, int input_size,
                              const LabeledSet& test);

struct ProbeResult {
  double top1 = 0.0;
  double top5 = 0.0;
};

// Multinomial logistic regression trained to convergence on frozen
// embeddings. Never mutates the encoder. Throws on a single-class train set.
ProbeResult linear_probe(const train::ConvBackbone& backbone, int input_size,
                         const LabeledSet& train_set, const LabeledSet& test_set, uint64_t seed);

// Two-stage protocol: optional full finetune on a larger labeled set (head
// then discarded), then a full finetune on the practice set with a fresh head
// over the reduced vocabulary. Missing practice categories are recorded as
// warnings, not errors.
train::TemporalClassModel practice_finetune(const train::ConvBackbone& pretrained, int input_size,
                                            const LabeledSet& practice,
                                            const LabeledSet* prior_labeled,
                                            const FinetuneConfig& cfg, uint64_t seed,
                                            std::vector<std::string>* warnings = nullptr);

}  // namespace longview::eval
