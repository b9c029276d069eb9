#include "longview/eval/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace longview::eval {

namespace {

constexpr int kEvalBatch = 64;

Image eval_preprocess(const Image& frame, int input_size) {
  Image img = (frame.height != input_size || frame.width != input_size)
                  ? resize_bilinear(frame, input_size, input_size)
                  : frame;
  return augment::normalize(img, augment::kNormalizeMean, augment::kNormalizeStd);
}

// Logits for a labeled set, batched, no gradients.
std::vector<float> model_scores(const train::TemporalClassModel& model, int input_size,
                                const LabeledSet& set) {
  NoGrad ng;
  const int n = static_cast<int>(set.items.size());
  const int c = model.head.out_dim();
  std::vector<float> scores(static_cast<size_t>(n) * c);
  for (int start = 0; start < n; start += kEvalBatch) {
    int stop = std::min(n, start + kEvalBatch);
    std::vector<Image> batch;
    batch.reserve(static_cast<size_t>(stop - start));
    for (int i = start; i < stop; ++i)
      batch.push_back(eval_preprocess(set.items[static_cast<size_t>(i)].first, input_size));
    auto logits = model.logits(train::images_to_batch(batch));
    std::copy(logits->data.begin(), logits->data.end(),
              scores.begin() + static_cast<size_t>(start) * c);
  }
  return scores;
}

train::TemporalClassModel finetune_on(const train::ConvBackbone& pretrained, int input_size,
                                      const LabeledSet& labeled, const FinetuneConfig& cfg,
                                      uint64_t seed) {
  if (labeled.items.empty()) throw std::invalid_argument("finetune: empty labeled set");
  train::TemporalClassModel model;
  model.backbone = pretrained;
  for (auto& [name, t] : model.backbone.params()) {
    t = Tensor::create(t->shape, t->data);  // private copy; finetune must not touch the source
    t->set_requires_grad(!cfg.head_only);
  }
  model.head = train::LinearHead(model.backbone.spec().embedding_dim, labeled.num_classes,
                                 hash_mix(seed, 0xF7ULL), /*zero_init=*/false);

  OptimizerConfig ocfg;
  ocfg.kind = OptKind::adam;
  ocfg.lr = cfg.lr;
  NamedTensors trainable = cfg.head_only ? train::prefixed("head.", model.head.params())
                                         : model.all_params();
  Optimizer opt(ocfg, trainable);

  auto policy = cfg.augment
                    ? augment::temporal_classification_policy(input_size, /*with_color_jitter=*/false)
                    : augment::AugmentPolicy{};
  const int n = static_cast<int>(labeled.items.size());
  std::vector<int> order(static_cast<size_t>(n));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng rng(hash_mix(seed, 0xF1EULL, static_cast<uint64_t>(epoch)));
    for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(i + 1))]);

    for (int start = 0; start < n; start += cfg.batch_size) {
      int stop = std::min(n, start + cfg.batch_size);
      std::vector<Image> batch;
      std::vector<int> labels;
      for (int i = start; i < stop; ++i) {
        const auto& [img, label] = labeled.items[static_cast<size_t>(order[static_cast<size_t>(i)])];
        if (cfg.augment) {
          Image view = augment::apply_policy(
              img, policy, hash_mix(seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(i)));
          batch.push_back(std::move(view));
        } else {
          batch.push_back(eval_preprocess(img, input_size));
        }
        labels.push_back(label);
      }
      Tape tape;
      auto loss = cross_entropy(model.logits(train::images_to_batch(batch)), labels);
      tape.backward(loss);
      opt.step();
      opt.zero_grad();
    }
  }
  return model;
}

}  // namespace

bool LabeledSet::covers_all_classes() const {
  std::vector<bool> seen(static_cast<size_t>(num_classes), false);
  for (const auto& [img, label] : items) seen[static_cast<size_t>(label)] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

LabeledSet stratified_labeled_set(const world::WorldPtr& w, double t0, double t1, int per_class,
                                  uint64_t seed) {
  if (!(t1 > t0)) throw std::invalid_argument("stratified_labeled_set: t1 must be > t0");
  if (per_class < 1) throw std::invalid_argument("stratified_labeled_set: per_class must be >= 1");
  const int num_classes = w->spec().num_classes;
  LabeledSet set;
  set.num_classes = num_classes;
  std::vector<int> counts(static_cast<size_t>(num_classes), 0);
  Rng rng(hash_mix(seed, 0x57A7ULL));
  int needed = per_class * num_classes;
  const int budget = needed * 200;
  for (int attempt = 0; attempt < budget && static_cast<int>(set.items.size()) < needed; ++attempt) {
    double t = rng.uniform(t0, t1);
    auto [frame, ann] = w->render(t);
    if (counts[static_cast<size_t>(ann.dominant_class)] >= per_class) continue;
    counts[static_cast<size_t>(ann.dominant_class)]++;
    set.items.emplace_back(std::move(frame.image), ann.dominant_class);
  }
  for (int c = 0; c < num_classes; ++c)
    if (counts[static_cast<size_t>(c)] < per_class)
      throw std::runtime_error("stratified_labeled_set: class " + std::to_string(c) + " has only " +
                               std::to_string(counts[static_cast<size_t>(c)]) + "/" +
                               std::to_string(per_class) +
                               " examples in the window; extend [t0,t1) or reduce per_class");
  return set;
}

double topk_accuracy(const std::vector<float>& scores, int n, int num_classes,
                     const std::vector<int>& labels, int k) {
  if (k < 1 || k > num_classes)
    throw std::invalid_argument("topk_accuracy: k must be in [1," + std::to_string(num_classes) +
                                "], got " + std::to_string(k));
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("topk_accuracy: label count mismatch");
  if (scores.size() != static_cast<size_t>(n) * num_classes)
    throw std::invalid_argument("topk_accuracy: score matrix size mismatch");
  int64_t correct = 0;
  for (int r = 0; r < n; ++r) {
    const float* row = scores.data() + static_cast<size_t>(r) * num_classes;
    int label = labels[static_cast<size_t>(r)];
    float ref = row[label];
    int rank = 0;
    for (int c = 0; c < num_classes; ++c) {
      if (row[c] > ref || (row[c] == ref && c < label)) ++rank;
    }
    if (rank < k) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

train::TemporalClassModel few_shot_finetune(const train::ConvBackbone& pretrained, int input_size,
                                            const LabeledSet& labeled, const FinetuneConfig& cfg,
                                            uint64_t seed) {
  return finetune_on(pretrained, input_size, labeled, cfg, seed);
}

AccuracyResult evaluate_model(const train::TemporalClassModel& model, int input_size,
                              const LabeledSet& test) {
  if (test.items.empty()) throw std::invalid_argument("evaluate_model: empty test set");
  const int n = static_cast<int>(test.items.size());
  const int c = model.head.out_dim();
  auto scores = model_scores(model, input_size, test);
  std::vector<int> labels;
  labels.reserve(test.items.size());
  for (const auto& [img, label] : test.items) labels.push_back(label);
  AccuracyResult res;
  res.n = n;
  res.top1 = topk_accuracy(scores, n, c, labels, 1);
  res.top5 = topk_accuracy(scores, n, c, labels, std::min(5, c));
  return res;
}

ProbeResult linear_probe(const train::ConvBackbone& backbone, int input_size,
                         const LabeledSet& train_set, const LabeledSet& test_set, uint64_t seed) {
  if (train_set.items.empty() || test_set.items.empty())
    throw std::invalid_argument("linear_probe: empty train or test set");
  {
    int first = train_set.items[0].second;
    bool degenerate = std::all_of(train_set.items.begin(), train_set.items.end(),
                                  [&](const auto& it) { return it.second == first; });
    if (degenerate)
      throw std::invalid_argument("linear_probe: train set contains a single class (" +
                                  std::to_string(first) + "), probe is undefined");
  }

  std::vector<Image> train_imgs, test_imgs;
  std::vector<int> train_labels, test_labels;
  for (const auto& [img, label] : train_set.items) {
    train_imgs.push_back(img);
    train_labels.push_back(label);
  }
  for (const auto& [img, label] : test_set.items) {
    test_imgs.push_back(img);
    test_labels.push_back(label);
  }
  auto train_emb = train::embed(backbone, train_imgs, input_size);
  auto test_emb = train::embed(backbone, test_imgs, input_size);

  const int c = train_set.num_classes;
  train::LinearHead head(backbone.spec().embedding_dim, c, hash_mix(seed, 0x9E0BEULL),
                         /*zero_init=*/true);
  OptimizerConfig ocfg;
  ocfg.kind = OptKind::adam;
  ocfg.lr = 1e-2f;
  Optimizer opt(ocfg, head.params());

  double prev = 1e300;
  int stalled = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    Tape tape;
    auto loss = cross_entropy(head.forward(train_emb), train_labels);
    tape.backward(loss);
    opt.step();
    opt.zero_grad();
    double v = loss->item();
    if (prev - v < 1e-6) {
      if (++stalled >= 10) break;
    } else {
      stalled = 0;
    }
    prev = v;
  }

  NoGrad ng;
  auto logits = head.forward(test_emb);
  ProbeResult res;
  int n = static_cast<int>(test_labels.size());
  res.top1 = topk_accuracy(logits->data, n, c, test_labels, 1);
  res.top5 = topk_accuracy(logits->data, n, c, test_labels, std::min(5, c));
  return res;
}

train::TemporalClassModel practice_finetune(const train::ConvBackbone& pretrained, int input_size,
                                            const LabeledSet& practice,
                                            const LabeledSet* prior_labeled,
                                            const FinetuneConfig& cfg, uint64_t seed,
                                            std::vector<std::string>* warnings) {
  if (practice.items.empty()) throw std::invalid_argument("practice_finetune: empty practice set");
  if (!practice.covers_all_classes() && warnings)
    warnings->push_back("practice set does not cover every category; proceeding anyway");

  const train::ConvBackbone* stage2_encoder = &pretrained;
  train::TemporalClassModel stage1;
  if (prior_labeled) {
    stage1 = finetune_on(pretrained, input_size, *prior_labeled, cfg, hash_mix(seed, 0x2E5ULL));
    stage2_encoder = &stage1.backbone;  // head discarded
  }
  return finetune_on(*stage2_encoder, input_size, practice, cfg, hash_mix(seed, 0x9ACULL));
}

}  // namespace longview::eval
