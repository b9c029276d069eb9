#include "longview/stream/pipeline.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace longview::stream {

namespace {
// Guards against representation error in products that are integers
// mathematically (e.g. 0.08h * 3600 * 5).
constexpr double kCountEps = 1e-9;
}  // namespace

int64_t StreamIndex::frame_count() const {
  return static_cast<int64_t>(std::floor(total_duration_s * fps + kCountEps));
}

void StreamIndex::validate() const {
  if (!(total_duration_s > 0))
    throw std::invalid_argument("StreamIndex: total_duration_s must be > 0");
  if (!(fps > 0)) throw std::invalid_argument("StreamIndex: fps must be > 0");
  if (start_offset_s < 0) throw std::invalid_argument("StreamIndex: start_offset_s must be >= 0");
}

int64_t frame_count(double duration_hours, double fps) {
  if (!(duration_hours > 0)) throw std::invalid_argument("frame_count: duration_hours must be > 0");
  if (!(fps > 0)) throw std::invalid_argument("frame_count: fps must be > 0");
  return static_cast<int64_t>(std::floor(duration_hours * 3600.0 * fps + kCountEps));
}

int64_t episode_label(double timestamp_s, double episode_length_s) {
  if (timestamp_s < 0) throw std::invalid_argument("episode_label: timestamp must be >= 0");
  if (!(episode_length_s > 0))
    throw std::invalid_argument("episode_label: episode_length_s must be > 0");
  return static_cast<int64_t>(std::floor(timestamp_s / episode_length_s));
}

int64_t EpisodeLabeling::num_episodes(double total_duration_s) const {
  if (!(total_duration_s > 0))
    throw std::invalid_argument("EpisodeLabeling: total_duration_s must be > 0");
  return static_cast<int64_t>(std::ceil(total_duration_s / episode_length_s - kCountEps));
}

int64_t EpisodeLabeling::label_of(const StreamIndex& index, int64_t k) const {
  double t_local = static_cast<double>(k) / index.fps;
  return episode_label(t_local, episode_length_s);
}

StreamIndex contiguous_subset(const StreamIndex& index, const SubsetSpec& spec) {
  index.validate();
  if (!(spec.fraction > 0.0) || spec.fraction > 1.0)
    throw std::invalid_argument("contiguous_subset: fraction must be in (0,1], got " +
                                std::to_string(spec.fraction));
  if (spec.start_offset_s < 0)
    throw std::invalid_argument("contiguous_subset: start_offset_s must be >= 0");
  double duration = spec.fraction * index.total_duration_s;
  if (spec.start_offset_s + duration > index.total_duration_s * (1.0 + 1e-12))
    throw std::invalid_argument(
        "contiguous_subset: window [" + std::to_string(spec.start_offset_s) + ", " +
        std::to_string(spec.start_offset_s + duration) + ") exceeds stream duration " +
        std::to_string(index.total_duration_s));
  StreamIndex out;
  out.total_duration_s = duration;
  out.fps = index.fps;
  out.start_offset_s = index.start_offset_s + spec.start_offset_s;
  return out;
}

Image resize_center_crop(const Image& frame, int resize_minor_edge, int crop) {
  if (frame.height < 1 || frame.width < 1)
    throw std::invalid_argument("resize_center_crop: empty frame");
  if (crop > resize_minor_edge)
    throw std::invalid_argument("resize_center_crop: crop " + std::to_string(crop) +
                                " exceeds resized minor edge " + std::to_string(resize_minor_edge));
  int minor = std::min(frame.height, frame.width);
  Image resized = frame;
  if (minor != resize_minor_edge) {
    double scale = static_cast<double>(resize_minor_edge) / minor;
    int oh, ow;
    if (frame.height <= frame.width) {
      oh = resize_minor_edge;
      ow = static_cast<int>(std::floor(frame.width * scale + 0.5));
    } else {
      ow = resize_minor_edge;
      oh = static_cast<int>(std::floor(frame.height * scale + 0.5));
    }
    resized = resize_bilinear(frame, oh, ow);
  }
  int top = (resized.height - crop) / 2;
  int left = (resized.width - crop) / 2;
  return longview::crop(resized, top, left, crop, crop);
}

}  // namespace longview::stream
