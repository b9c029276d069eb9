#include "longview/world/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace longview::world {

namespace {

constexpr int kNumShapeKinds = 8;
constexpr double kTwoPi = 6.283185307179586;

void hsv_to_rgb(double h, double s, double v, float out[3]) {
  h = h - std::floor(h);
  double r = 0, g = 0, b = 0;
  int i = static_cast<int>(h * 6.0);
  double f = h * 6.0 - i;
  double p = v * (1.0 - s);
  double q = v * (1.0 - f * s);
  double t = v * (1.0 - (1.0 - f) * s);
  switch (i % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    case 5: r = v; g = p; b = q; break;
  }
  out[0] = static_cast<float>(r);
  out[1] = static_cast<float>(g);
  out[2] = static_cast<float>(b);
}

void class_color(const WorldSpec& spec, int class_id, float out[3]) {
  int color_idx = class_id % spec.palette_size;
  hsv_to_rgb(static_cast<double>(color_idx) / spec.palette_size, 0.85, 0.9, out);
}

// Signed inside-margin (world units, positive inside) for each shape kind.
double shape_margin(int kind, double dx, double dy, double r) {
  double dist = std::sqrt(dx * dx + dy * dy);
  switch (kind) {
    case 0:  // disc
      return r - dist;
    case 1:  // square
      return 0.9 * r - std::max(std::abs(dx), std::abs(dy));
    case 2:  // triangle, apex up
      return std::min(0.7 * r - dy, (dy + r - 1.889 * std::abs(dx)) / 2.137);
    case 3:  // ring
      return std::min(r - dist, dist - 0.55 * r);
    case 4: {  // cross
      double horiz = std::min(r - std::abs(dx), 0.35 * r - std::abs(dy));
      double vert = std::min(0.35 * r - std::abs(dx), r - std::abs(dy));
      return std::max(horiz, vert);
    }
    case 5:  // diamond
      return (1.1 * r - (std::abs(dx) + std::abs(dy))) * 0.7071;
    case 6:  // striped square
      return 0.9 * r - std::max(std::abs(dx), std::abs(dy));
    case 7:  // checkered disc
      return r - dist;
  }
  return -1.0;
}

// Two-tone patterning in object-local coordinates.
bool secondary_tone(int kind, double dx, double dy, double r) {
  if (kind == 6) return std::sin(dy / r * 9.0) > 0.0;
  if (kind == 7) return (std::sin(dx / r * 7.0) * std::sin(dy / r * 7.0)) > 0.0;
  return false;
}

}  // namespace

void WorldSpec::validate() const {
  std::string violations;
  auto bad = [&](const std::string& msg) {
    if (!violations.empty()) violations += "; ";
    violations += msg;
  };
  if (num_classes < 2) bad("num_classes must be >= 2, got " + std::to_string(num_classes));
  if (num_scenes < 1) bad("num_scenes must be >= 1, got " + std::to_string(num_scenes));
  if (objects_per_scene < 1)
    bad("objects_per_scene must be >= 1, got " + std::to_string(objects_per_scene));
  if (!(scene_dwell_s > 0)) bad("scene_dwell_s must be > 0, got " + std::to_string(scene_dwell_s));
  if (camera_drift < 0) bad("camera_drift must be >= 0, got " + std::to_string(camera_drift));
  if (frame_height < 8 || frame_width < 8)
    bad("frame size must be at least 8x8, got " + std::to_string(frame_height) + "x" +
        std::to_string(frame_width));
  if (palette_size < 2) bad("palette_size must be >= 2, got " + std::to_string(palette_size));
  if (!violations.empty()) throw std::invalid_argument("WorldSpec: " + violations);
}

std::pair<int, int> class_appearance(const WorldSpec& spec, int class_id) {
  return {class_id % kNumShapeKinds, class_id % spec.palette_size};
}

World::World(WorldSpec spec) : spec_(spec), schedule_rng_(hash_mix(spec.seed, 0x5C4EDULL)) {
  spec_.validate();

  scenes_.resize(static_cast<size_t>(spec_.num_scenes));
  for (int s = 0; s < spec_.num_scenes; ++s) {
    Rng rng(hash_mix(spec_.seed, 0xACE5ULL, static_cast<uint64_t>(s)));
    Scene& scene = scenes_[static_cast<size_t>(s)];
    double bg_hue = rng.uniform();
    hsv_to_rgb(bg_hue, 0.25, rng.uniform(0.30, 0.45), scene.bg_top);
    hsv_to_rgb(bg_hue + 0.07, 0.25, rng.uniform(0.45, 0.60), scene.bg_bottom);

    scene.objects.resize(static_cast<size_t>(spec_.objects_per_scene));
    for (int j = 0; j < spec_.objects_per_scene; ++j) {
      ObjectInstance& o = scene.objects[static_cast<size_t>(j)];
      bool anchor = (j == 0);
      // The anchor stays near the scene center so every frame has at least
      // one fully visible object; its class cycles so all classes occur.
      o.class_id = anchor ? (s % spec_.num_classes) : rng.uniform_int(spec_.num_classes);
      o.radius = anchor ? rng.uniform(0.14, 0.18) : rng.uniform(0.09, 0.14);
      double base_r = anchor ? rng.uniform(0.0, 0.04) : rng.uniform(0.12, 0.34);
      double base_a = rng.uniform(0.0, kTwoPi);
      o.base_x = base_r * std::cos(base_a);
      o.base_y = base_r * std::sin(base_a);
      o.amp_x = anchor ? rng.uniform(0.01, 0.05) : rng.uniform(0.03, 0.12);
      o.amp_y = anchor ? rng.uniform(0.01, 0.05) : rng.uniform(0.03, 0.12);
      o.freq_x = rng.uniform(0.3, 1.6);
      o.freq_y = rng.uniform(0.3, 1.6);
      o.phase_x = rng.uniform(0.0, kTwoPi);
      o.phase_y = rng.uniform(0.0, kTwoPi);
    }
  }

  Rng cam_rng(hash_mix(spec_.seed, 0xCA3ULL));
  const double base_amp[3] = {0.12, 0.10, 0.08};
  const double base_freq[3] = {0.04, 0.09, 0.17};
  double freq_scale = spec_.camera_drift / 0.15;
  for (int i = 0; i < 3; ++i) {
    CameraWave w;
    w.amp_x = base_amp[i] * cam_rng.uniform(0.7, 1.0);
    w.amp_y = base_amp[i] * cam_rng.uniform(0.7, 1.0);
    w.freq = kTwoPi * base_freq[i] * freq_scale;
    w.phase_x = cam_rng.uniform(0.0, kTwoPi);
    w.phase_y = cam_rng.uniform(0.0, kTwoPi);
    camera_.push_back(w);
  }

  boundaries_.push_back(0.0);
  interval_scene_.push_back(spec_.num_scenes > 1 ? schedule_rng_.uniform_int(spec_.num_scenes) : 0);
}

void World::ensure_schedule(double t) const {
  while (boundaries_.back() <= t) {
    double dwell = schedule_rng_.exponential(spec_.scene_dwell_s);
    boundaries_.push_back(boundaries_.back() + dwell);
    int prev = interval_scene_.back();
    int next = spec_.num_scenes > 1 ? schedule_rng_.uniform_int(spec_.num_scenes) : 0;
    while (spec_.num_scenes > 1 && next == prev) next = schedule_rng_.uniform_int(spec_.num_scenes);
    interval_scene_.push_back(next);
  }
}

int World::scene_at(double t) const {
  if (t < 0) throw std::invalid_argument("World::scene_at: t must be >= 0");
  std::lock_guard<std::mutex> lock(schedule_mutex_);
  ensure_schedule(t);
  auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), t);
  size_t idx = static_cast<size_t>(it - boundaries_.begin()) - 1;
  return interval_scene_[idx];
}

std::pair<double, double> World::camera_at(double t) const {
  double cx = 0, cy = 0;
  for (const auto& w : camera_) {
    cx += w.amp_x * std::sin(w.freq * t + w.phase_x);
    cy += w.amp_y * std::sin(w.freq * t + w.phase_y);
  }
  return {cx, cy};
}

std::pair<Frame, FrameAnnotation> World::render(double t) const {
  if (t < 0) throw std::invalid_argument("World::render: t must be >= 0");
  const int scene_id = scene_at(t);
  const Scene& scene = scenes_[static_cast<size_t>(scene_id)];
  auto [cam_x, cam_y] = camera_at(t);

  const int H = spec_.frame_height, W = spec_.frame_width;
  Frame frame;
  frame.timestamp_s = t;
  frame.image = Image(H, W);

  const double aa = 1.5 / std::min(H, W);
  const int n_obj = spec_.objects_per_scene;

  // Current object centers.
  std::vector<double> ox(static_cast<size_t>(n_obj)), oy(static_cast<size_t>(n_obj));
  for (int j = 0; j < n_obj; ++j) {
    const ObjectInstance& o = scene.objects[static_cast<size_t>(j)];
    ox[static_cast<size_t>(j)] = o.base_x + o.amp_x * std::sin(o.freq_x * t + o.phase_x);
    oy[static_cast<size_t>(j)] = o.base_y + o.amp_y * std::sin(o.freq_y * t + o.phase_y);
  }

  std::vector<int64_t> coverage(static_cast<size_t>(n_obj), 0);
  for (int y = 0; y < H; ++y) {
    double py = (y + 0.5) / H - 0.5 + cam_y;
    for (int x = 0; x < W; ++x) {
      double px = (x + 0.5) / W - 0.5 + cam_x;

      double wave = 0.5 + 0.5 * std::sin(kTwoPi * (0.3 * px + 0.7 * py));
      float rgb[3];
      for (int c = 0; c < 3; ++c)
        rgb[c] = scene.bg_top[c] + static_cast<float>(wave) * (scene.bg_bottom[c] - scene.bg_top[c]);

      // Draw order: objects 1..n-1, anchor (object 0) on top, never occluded.
      int owner = -1;
      for (int pass = 1; pass <= n_obj; ++pass) {
        int j = pass % n_obj;  // 1, 2, ..., n-1, 0
        const ObjectInstance& o = scene.objects[static_cast<size_t>(j)];
        double dx = px - ox[static_cast<size_t>(j)];
        double dy = py - oy[static_cast<size_t>(j)];
        if (std::abs(dx) > o.radius * 1.3 || std::abs(dy) > o.radius * 1.3) continue;
        auto [kind, color_idx] = class_appearance(spec_, o.class_id);
        (void)color_idx;
        double m = shape_margin(kind, dx, dy, o.radius);
        double alpha = std::clamp(m / aa + 0.5, 0.0, 1.0);
        if (alpha <= 0.0) continue;
        float col[3];
        class_color(spec_, o.class_id, col);
        if (secondary_tone(kind, dx, dy, o.radius))
          for (float& v : col) v = 0.35f + 0.5f * v;
        for (int c = 0; c < 3; ++c)
          rgb[c] = rgb[c] + static_cast<float>(alpha) * (col[c] - rgb[c]);
        if (alpha >= 0.5) owner = j;
      }
      if (owner >= 0) ++coverage[static_cast<size_t>(owner)];

      for (int c = 0; c < 3; ++c)
        frame.image.at(y, x, c) = std::clamp(rgb[c], 0.f, 1.f);
    }
  }

  FrameAnnotation ann;
  ann.scene_id = scene_id;
  std::vector<int64_t> class_cov(static_cast<size_t>(spec_.num_classes), 0);
  for (int j = 0; j < n_obj; ++j)
    class_cov[static_cast<size_t>(scene.objects[static_cast<size_t>(j)].class_id)] +=
        coverage[static_cast<size_t>(j)];
  int64_t best = -1;
  for (int c = 0; c < spec_.num_classes; ++c) {
    if (class_cov[static_cast<size_t>(c)] >= 3) ann.visible_class_ids.push_back(c);
    if (class_cov[static_cast<size_t>(c)] > best) {
      best = class_cov[static_cast<size_t>(c)];
      ann.dominant_class = c;
    }
  }
  return {std::move(frame), ann};
}

WorldPtr build_world(const WorldSpec& spec) { return std::make_shared<const World>(spec); }

std::pair<Frame, FrameAnnotation> FrameStream::frame(int64_t k) const {
  if (k < 0 || k >= count)
    throw std::out_of_range("FrameStream::frame: index " + std::to_string(k) + " out of [0," +
                            std::to_string(count) + ")");
  return world->render(timestamp(k));
}

FrameStream generate_stream(WorldPtr world, double t0, double t1, double fps) {
  if (!(t1 > t0)) throw std::invalid_argument("generate_stream: t1 must be > t0");
  if (!(fps > 0)) throw std::invalid_argument("generate_stream: fps must be > 0");
  FrameStream s;
  s.world = std::move(world);
  s.t0 = t0;
  s.fps = fps;
  s.count = static_cast<int64_t>(std::floor((t1 - t0) * fps + 1e-9));
  return s;
}

}  // namespace longview::world
