#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "longview/image.hpp"
#include "longview/rng.hpp"

namespace longview::world {

struct WorldSpec {
  uint64_t seed = 0;
  int num_classes = 8;         // >= 2
  int num_scenes = 12;
  int objects_per_scene = 3;
  double camera_drift = 0.15;  // per-second camera displacement scale
  double scene_dwell_s = 60.0; // mean seconds per scene
  int frame_height = 64;
  int frame_width = 64;
  int palette_size = 6;

  // Throws std::invalid_argument listing every violated field.
  void validate() const;
};

struct Frame {
  Image image;
  double timestamp_s = 0.0;
};

struct FrameAnnotation {
  std::vector<int> visible_class_ids;  // sorted, unique
  int scene_id = 0;
  int dominant_class = 0;  // class with the largest rendered coverage
};

class World;
using WorldPtr = std::shared_ptr<const World>;

// Procedural egocentric-style video: a drifting camera over scenes of moving
// parametric shapes. Pixel content is a pure function of (spec, t).
class World : public std::enable_shared_from_this<World> {
 public:
  explicit World(WorldSpec spec);

  const WorldSpec& spec() const { return spec_; }

  std::pair<Frame, FrameAnnotation> render(double t) const;

  // Scene occupying time t. Dwell times are exponentially distributed; the
  // schedule extends lazily but deterministically.
  int scene_at(double t) const;

 private:
  struct ObjectInstance {
    int class_id;
    double base_x, base_y;
    double amp_x, amp_y;
    double freq_x, freq_y;
    double phase_x, phase_y;
    double radius;
  };
  struct Scene {
    std::vector<ObjectInstance> objects;
    float bg_top[3], bg_bottom[3];
  };
  struct CameraWave {
    double amp_x, amp_y, freq, phase_x, phase_y;
  };

  void ensure_schedule(double t) const;
  std::pair<double, double> camera_at(double t) const;

  WorldSpec spec_;
  std::vector<Scene> scenes_;
  std::vector<CameraWave> camera_;
  // Lazily extended cut schedule: boundaries_[i] is the start of interval i;
  // interval_scene_[i] its scene id.
  mutable std::vector<double> boundaries_;
  mutable std::vector<int> interval_scene_;
  mutable Rng schedule_rng_;
  mutable std::mutex schedule_mutex_;
};

WorldPtr build_world(const WorldSpec& spec);

// Lazily evaluated frame sequence: floor((t1-t0)*fps) frames at t0 + k/fps.
struct FrameStream {
  WorldPtr world;
  double t0 = 0.0;
  double fps = 5.0;
  int64_t count = 0;

  double timestamp(int64_t k) const { return t0 + static_cast<double>(k) / fps; }
  std::pair<Frame, FrameAnnotation> frame(int64_t k) const;
};

FrameStream generate_stream(WorldPtr world, double t0, double t1, double fps);

// The class id -> rendered appearance mapping, exposed for documentation and
// tests: shape kind index and palette color index for a class.
std::pair<int, int> class_appearance(const WorldSpec& spec, int class_id);

}  // namespace longview::world
