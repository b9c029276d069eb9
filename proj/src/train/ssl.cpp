#include "longview/train/ssl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace longview::train {

namespace {

constexpr int64_t kFrameCacheCap = 4096;

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

struct EpochSchedule {
  std::vector<int64_t> order;
};

EpochSchedule shuffled_epoch(int64_t frame_count, uint64_t seed, int epoch) {
  EpochSchedule s;
  s.order.resize(static_cast<size_t>(frame_count));
  for (int64_t i = 0; i < frame_count; ++i) s.order[static_cast<size_t>(i)] = i;
  Rng rng(hash_mix(seed, 0x5F0FFULL, static_cast<uint64_t>(epoch)));
  for (int64_t i = frame_count - 1; i > 0; --i) {
    int64_t j = static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(i + 1));
    std::swap(s.order[static_cast<size_t>(i)], s.order[static_cast<size_t>(j)]);
  }
  return s;
}

// Renders subset frames on demand, caching small subsets whole.
class FrameSource {
 public:
  FrameSource(const world::WorldPtr& w, const stream::StreamIndex& subset) : world_(w), subset_(subset) {
    count_ = subset.frame_count();
    if (count_ < 1) throw std::invalid_argument("train: subset contains no frames");
    if (count_ <= kFrameCacheCap) cache_.resize(static_cast<size_t>(count_));
  }

  int64_t count() const { return count_; }

  const Image& frame(int64_t k) {
    if (!cache_.empty()) {
      auto& slot = cache_[static_cast<size_t>(k)];
      if (slot.height == 0) slot = world_->render(subset_.timestamp(k)).first.image;
      return slot;
    }
    scratch_ = world_->render(subset_.timestamp(k)).first.image;
    return scratch_;
  }

 private:
  world::WorldPtr world_;
  stream::StreamIndex subset_;
  int64_t count_ = 0;
  std::vector<Image> cache_;
  Image scratch_;
};

int64_t steps_for_epoch(int64_t frame_count, int batch_size, int max_steps) {
  int64_t steps = (frame_count + batch_size - 1) / batch_size;
  if (max_steps > 0) steps = std::min<int64_t>(steps, max_steps);
  return std::max<int64_t>(steps, 1);
}

bool early_stop(const std::vector<EpochStats>& trace, double delta, int patience) {
  if (patience <= 0 || static_cast<int>(trace.size()) <= patience) return false;
  int stalled = 0;
  for (size_t i = trace.size() - static_cast<size_t>(patience); i < trace.size(); ++i) {
    double improvement = trace[i - 1].mean_loss - trace[i].mean_loss;
    if (improvement < delta) ++stalled;
  }
  return stalled == patience;
}

void abort_non_finite(const char* algo, int epoch, int64_t step, float lr, float grad_norm) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%s: non-finite loss at epoch %d step %lld (lr=%g, grad_norm=%g)", algo, epoch,
                static_cast<long long>(step), static_cast<double>(lr),
                static_cast<double>(grad_norm));
  throw std::runtime_error(buf);
}

std::map<std::string, std::string> base_meta(const char* algorithm,
                                             const stream::StreamIndex& subset,
                                             const BackboneSpec& backbone, int input_size,
                                             uint64_t seed, int epochs_run) {
  std::map<std::string, std::string> meta;
  char buf[64];
  meta["algorithm"] = algorithm;
  std::snprintf(buf, sizeof(buf), "%.9g", subset.total_duration_s / 3600.0);
  meta["hours"] = buf;
  std::snprintf(buf, sizeof(buf), "%.9g", subset.start_offset_s);
  meta["start_offset_s"] = buf;
  std::snprintf(buf, sizeof(buf), "%.9g", subset.fps);
  meta["fps"] = buf;
  meta["seed"] = std::to_string(seed);
  meta["epochs_run"] = std::to_string(epochs_run);
  meta["backbone_stages"] = backbone.to_string();
  meta["backbone_kernel"] = std::to_string(backbone.kernel);
  meta["embedding_dim"] = std::to_string(backbone.embedding_dim);
  meta["input_size"] = std::to_string(input_size);
  return meta;
}

}  // namespace

NamedTensors TemporalClassModel::all_params() const {
  NamedTensors all = prefixed("backbone.", backbone.params());
  for (const auto& [name, t] : head.params()) all.emplace_back("head." + name, t);
  return all;
}

NamedTensors DinoModel::all_params() const {
  NamedTensors all = prefixed("backbone.", backbone.params());
  for (const auto& [name, t] : head.params()) all.emplace_back("head." + name, t);
  return all;
}

float DinoTrainState::teacher_momentum(const DinoConfig& cfg) const {
  double progress = total_steps > 0
                        ? static_cast<double>(steps_done) / static_cast<double>(total_steps)
                        : 1.0;
  progress = std::clamp(progress, 0.0, 1.0);
  double m = cfg.teacher_momentum_final -
             (cfg.teacher_momentum_final - cfg.teacher_momentum_base) *
                 (std::cos(3.141592653589793 * progress) + 1.0) / 2.0;
  return static_cast<float>(m);
}

float temporal_classification_step(TemporalClassModel& model, Optimizer& opt,
                                   const std::vector<Image>& frames,
                                   const std::vector<int>& episode_labels, int num_classes,
                                   const augment::AugmentPolicy& policy, uint64_t seed) {
  if (frames.empty()) throw std::invalid_argument("temporal_classification_step: empty batch");
  if (frames.size() != episode_labels.size())
    throw std::invalid_argument("temporal_classification_step: frame/label count mismatch");
  for (int l : episode_labels)
    if (l < 0 || l >= num_classes)
      throw std::invalid_argument("temporal_classification_step: label " + std::to_string(l) +
                                  " out of [0," + std::to_string(num_classes) + ")");

  std::vector<Image> views;
  views.reserve(frames.size());
  for (size_t i = 0; i < frames.size(); ++i)
    views.push_back(augment::apply_policy(frames[i], policy, hash_mix(seed, 0x7CULL, i)));

  Tape tape;
  auto logits = model.logits(images_to_batch(views));
  auto loss = cross_entropy(logits, episode_labels);
  tape.backward(loss);
  opt.step();
  opt.zero_grad();
  return loss->item();
}

std::vector<float> teacher_distribution(const TensorPtr& teacher_logits,
                                        const std::vector<float>& center, float temp) {
  if (teacher_logits->rank() != 2)
    throw std::invalid_argument("teacher_distribution: logits must be (N,K)");
  const int n = teacher_logits->dim(0), k = teacher_logits->dim(1);
  if (static_cast<int>(center.size()) != k)
    throw std::invalid_argument("teacher_distribution: center length mismatch");
  std::vector<float> probs(static_cast<size_t>(n) * k);
  for (int r = 0; r < n; ++r) {
    double mx = -1e300;
    for (int c = 0; c < k; ++c) {
      double z = (teacher_logits->data[static_cast<size_t>(r) * k + c] - center[static_cast<size_t>(c)]) / temp;
      probs[static_cast<size_t>(r) * k + c] = static_cast<float>(z);
      mx = std::max(mx, z);
    }
    double denom = 0;
    for (int c = 0; c < k; ++c)
      denom += std::exp(static_cast<double>(probs[static_cast<size_t>(r) * k + c]) - mx);
    for (int c = 0; c < k; ++c) {
      double z = static_cast<double>(probs[static_cast<size_t>(r) * k + c]) - mx;
      probs[static_cast<size_t>(r) * k + c] = static_cast<float>(std::exp(z) / denom);
    }
  }
  return probs;
}

float dino_step(DinoTrainState& state, Optimizer& opt, const std::vector<Image>& frames,
                const DinoConfig& cfg, uint64_t seed) {
  cfg.multicrop.validate();
  if (frames.empty()) throw std::invalid_argument("dino_step: empty batch");
  const int n_global = cfg.multicrop.n_global;
  const int n_views = n_global + cfg.multicrop.n_local;
  const int n = static_cast<int>(frames.size());
  const int k = cfg.proj_dim;

  // Views, grouped per view index across the batch.
  std::vector<std::vector<Image>> view_batches(static_cast<size_t>(n_views));
  for (int i = 0; i < n; ++i) {
    auto views = augment::dino_multicrop(frames[static_cast<size_t>(i)], cfg.multicrop,
                                         hash_mix(seed, 0xD1ULL, static_cast<uint64_t>(i)));
    for (int v = 0; v < n_views; ++v) view_batches[static_cast<size_t>(v)].push_back(std::move(views[static_cast<size_t>(v)]));
  }

  // Teacher targets (no gradients anywhere near the teacher).
  std::vector<std::vector<float>> teacher_probs(static_cast<size_t>(n_global));
  std::vector<TensorPtr> teacher_logits(static_cast<size_t>(n_global));
  {
    NoGrad ng;
    for (int v = 0; v < n_global; ++v) {
      teacher_logits[static_cast<size_t>(v)] =
          state.teacher.forward(images_to_batch(view_batches[static_cast<size_t>(v)]));
      teacher_probs[static_cast<size_t>(v)] =
          teacher_distribution(teacher_logits[static_cast<size_t>(v)], state.center, cfg.teacher_temp);
    }
  }

  float loss_value;
  {
    Tape tape;
    std::vector<TensorPtr> student_logp(static_cast<size_t>(n_views));
    for (int v = 0; v < n_views; ++v) {
      auto out = state.student.forward(images_to_batch(view_batches[static_cast<size_t>(v)]));
      student_logp[static_cast<size_t>(v)] = log_softmax(scale(out, 1.f / cfg.student_temp));
    }

    TensorPtr total;
    int pairs = 0;
    for (int tv = 0; tv < n_global; ++tv) {
      auto target = Tensor::create({n, k}, teacher_probs[static_cast<size_t>(tv)]);
      for (int sv = 0; sv < n_views; ++sv) {
        if (sv == tv) continue;
        auto term = sum(mul(target, student_logp[static_cast<size_t>(sv)]));
        total = total ? add(total, term) : term;
        ++pairs;
      }
    }
    auto loss = scale(total, -1.f / (static_cast<float>(pairs) * static_cast<float>(n)));
    loss_value = loss->item();
    tape.backward(loss);
  }
  opt.step();
  opt.zero_grad();

  // Teacher follows the student with the scheduled momentum.
  float m = state.teacher_momentum(cfg);
  ema_update(values_of(state.teacher.backbone.params()), values_of(state.student.backbone.params()), m);
  ema_update(values_of(state.teacher.head.params()), values_of(state.student.head.params()), m);
  state.steps_done++;

  // Center tracks the batch-mean teacher output over global views.
  double inv = 1.0 / (static_cast<double>(n_global) * n);
  std::vector<double> batch_mean(static_cast<size_t>(k), 0.0);
  for (int v = 0; v < n_global; ++v)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < k; ++c)
        batch_mean[static_cast<size_t>(c)] +=
            teacher_logits[static_cast<size_t>(v)]->data[static_cast<size_t>(r) * k + c] * inv;
  for (int c = 0; c < k; ++c)
    state.center[static_cast<size_t>(c)] =
        cfg.center_momentum * state.center[static_cast<size_t>(c)] +
        (1.f - cfg.center_momentum) * static_cast<float>(batch_mean[static_cast<size_t>(c)]);

  return loss_value;
}

TrainResult train_temporal(const world::WorldPtr& w, const stream::StreamIndex& subset,
                           const TemporalClassConfig& cfg, uint64_t seed,
                           const std::map<std::string, std::string>& extra_meta) {
  subset.validate();
  FrameSource source(w, subset);
  stream::EpisodeLabeling labeling{cfg.episode_length_s};
  const int64_t num_classes64 = labeling.num_episodes(subset.total_duration_s);
  const int num_classes = static_cast<int>(num_classes64);

  TemporalClassModel model;
  model.backbone = ConvBackbone(cfg.backbone, hash_mix(seed, 0x1ULL));
  model.head = LinearHead(cfg.backbone.embedding_dim, num_classes, seed, /*zero_init=*/true);
  Optimizer opt(cfg.optimizer, model.all_params());
  auto policy = augment::temporal_classification_policy(cfg.input_size, cfg.augment_color_jitter);

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double t_start = now_s();
    auto schedule = shuffled_epoch(source.count(), seed, epoch);
    int64_t steps = steps_for_epoch(source.count(), cfg.batch_size, cfg.max_steps_per_epoch);
    double loss_sum = 0.0;
    for (int64_t s = 0; s < steps; ++s) {
      std::vector<Image> frames;
      std::vector<int> labels;
      for (int b = 0; b < cfg.batch_size; ++b) {
        int64_t pos = (s * cfg.batch_size + b) % source.count();
        int64_t idx = schedule.order[static_cast<size_t>(pos)];
        frames.push_back(source.frame(idx));
        labels.push_back(static_cast<int>(labeling.label_of(subset, idx)));
      }
      float loss = temporal_classification_step(model, opt, frames, labels, num_classes, policy,
                                                hash_mix(seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(s)));
      if (!std::isfinite(loss)) abort_non_finite("temporal_classification", epoch, s, cfg.optimizer.lr, 0.f);
      loss_sum += loss;
    }
    result.trace.push_back({epoch, loss_sum / static_cast<double>(steps), now_s() - t_start});
    if (early_stop(result.trace, cfg.early_stop_delta, cfg.early_stop_patience)) break;
  }

  CheckpointData ckpt;
  ckpt.params = clone_params(model.all_params());
  ckpt.optimizer = snapshot_optimizer(opt);
  ckpt.meta = base_meta("temporal_classification", subset, cfg.backbone, cfg.input_size, seed,
                        static_cast<int>(result.trace.size()));
  ckpt.meta["num_classes"] = std::to_string(num_classes);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", cfg.episode_length_s);
  ckpt.meta["episode_length_s"] = buf;
  for (const auto& [key, val] : extra_meta) ckpt.meta[key] = val;
  result.checkpoint = std::move(ckpt);
  return result;
}

TrainResult train_dino(const world::WorldPtr& w, const stream::StreamIndex& subset,
                       const DinoConfig& cfg, uint64_t seed,
                       const std::map<std::string, std::string>& extra_meta) {
  subset.validate();
  cfg.multicrop.validate();
  FrameSource source(w, subset);

  DinoTrainState state;
  state.student.backbone = ConvBackbone(cfg.backbone, hash_mix(seed, 0x2ULL));
  state.student.head = MlpHead(cfg.backbone.embedding_dim, cfg.proj_hidden, cfg.proj_dim, seed);
  // Teacher starts as an exact copy of the student and never receives grads.
  state.teacher.backbone = ConvBackbone(cfg.backbone, hash_mix(seed, 0x2ULL));
  state.teacher.head = MlpHead(cfg.backbone.embedding_dim, cfg.proj_hidden, cfg.proj_dim, seed);
  auto copy_params = [](NamedTensors& dst, const NamedTensors& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i].second->data = src[i].second->data;
  };
  copy_params(state.teacher.backbone.params(), state.student.backbone.params());
  copy_params(state.teacher.head.params(), state.student.head.params());
  set_requires_grad(state.teacher.backbone.params(), false);
  set_requires_grad(state.teacher.head.params(), false);
  state.center.assign(static_cast<size_t>(cfg.proj_dim), 0.f);

  int64_t steps_per_epoch = steps_for_epoch(source.count(), cfg.batch_size, cfg.max_steps_per_epoch);
  state.total_steps = std::max<int64_t>(steps_per_epoch * cfg.epochs, 1);

  Optimizer opt(cfg.optimizer, state.student.all_params());

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double t_start = now_s();
    auto schedule = shuffled_epoch(source.count(), seed, epoch);
    double loss_sum = 0.0;
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<Image> frames;
      for (int b = 0; b < cfg.batch_size; ++b) {
        int64_t pos = (s * cfg.batch_size + b) % source.count();
        frames.push_back(source.frame(schedule.order[static_cast<size_t>(pos)]));
      }
      float loss = dino_step(state, opt, frames, cfg,
                             hash_mix(seed, 0xD0ULL, static_cast<uint64_t>(epoch), static_cast<uint64_t>(s)));
      if (!std::isfinite(loss)) abort_non_finite("dino", epoch, s, cfg.optimizer.lr, 0.f);
      loss_sum += loss;
    }
    result.trace.push_back({epoch, loss_sum / static_cast<double>(steps_per_epoch), now_s() - t_start});
    if (early_stop(result.trace, cfg.early_stop_delta, cfg.early_stop_patience)) break;
  }

  CheckpointData ckpt;
  ckpt.params = clone_params(state.student.all_params());
  ckpt.extra = clone_params(state.teacher.all_params());
  for (auto& [name, t] : ckpt.extra) name = "teacher." + name;
  ckpt.extra.emplace_back("center", Tensor::create({cfg.proj_dim}, state.center));
  ckpt.optimizer = snapshot_optimizer(opt);
  ckpt.meta = base_meta("dino", subset, cfg.backbone, cfg.multicrop.global_size, seed,
                        static_cast<int>(result.trace.size()));
  ckpt.meta["proj_dim"] = std::to_string(cfg.proj_dim);
  ckpt.meta["proj_hidden"] = std::to_string(cfg.proj_hidden);
  for (const auto& [key, val] : extra_meta) ckpt.meta[key] = val;
  result.checkpoint = std::move(ckpt);
  return result;
}

TensorPtr embed(const ConvBackbone& backbone, const std::vector<Image>& frames, int input_size) {
  if (frames.empty()) throw std::invalid_argument("embed: empty frame list");
  std::vector<Image> prepared;
  prepared.reserve(frames.size());
  for (const auto& f : frames) {
    Image img = (f.height != input_size || f.width != input_size)
                    ? resize_bilinear(f, input_size, input_size)
                    : f;
    prepared.push_back(augment::normalize(img, augment::kNormalizeMean, augment::kNormalizeStd));
  }
  NoGrad ng;
  return backbone.forward(images_to_batch(prepared));
}

ConvBackbone backbone_from_checkpoint(const CheckpointData& ckpt, const std::string& prefix) {
  auto stages = ckpt.meta.find("backbone_stages");
  auto kernel = ckpt.meta.find("backbone_kernel");
  auto dim = ckpt.meta.find("embedding_dim");
  if (stages == ckpt.meta.end() || kernel == ckpt.meta.end() || dim == ckpt.meta.end())
    throw std::invalid_argument("backbone_from_checkpoint: missing backbone metadata");
  BackboneSpec spec = BackboneSpec::parse(stages->second, std::stoi(kernel->second),
                                          std::stoi(dim->second));
  ConvBackbone backbone(spec, /*seed=*/0);
  const NamedTensors& source = prefix.rfind("teacher.", 0) == 0 ? ckpt.extra : ckpt.params;
  backbone.load_params(source, prefix);
  return backbone;
}

int checkpoint_input_size(const CheckpointData& ckpt) {
  auto it = ckpt.meta.find("input_size");
  if (it == ckpt.meta.end())
    throw std::invalid_argument("checkpoint_input_size: missing input_size metadata");
  return std::stoi(it->second);
}

void write_trace_csv(const std::string& path, const std::vector<EpochStats>& trace) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_trace_csv: cannot open " + path);
  std::fprintf(f, "epoch,loss,wall_s\n");
  for (const auto& e : trace) std::fprintf(f, "%d,%.6f,%.3f\n", e.epoch, e.mean_loss, e.wall_s);
  std::fclose(f);
}

}  // namespace longview::train
