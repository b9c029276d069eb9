#pragma once

#include <cstdint>

#include "longview/image.hpp"

namespace longview::stream {

// Bookkeeping view of a continuous video: duration, sampling rate, and the
// offset of the window within the source stream. Frame k lives at
// start_offset_s + k/fps in source time.
struct StreamIndex {
  double total_duration_s = 0.0;
  double fps = 5.0;
  double start_offset_s = 0.0;

  int64_t frame_count() const;
  double timestamp(int64_t k) const { return start_offset_s + static_cast<double>(k) / fps; }
  void validate() const;
};

// floor(duration_hours * 3600 * fps)
int64_t frame_count(double duration_hours, double fps);

// floor(timestamp / episode_length); episodes are left-closed blocks
// [k*L, (k+1)*L).
int64_t episode_label(double timestamp_s, double episode_length_s);

struct EpisodeLabeling {
  double episode_length_s = 288.0;

  int64_t num_episodes(double total_duration_s) const;
  // Label of stream frame k, re-zeroed to the stream's own window.
  int64_t label_of(const StreamIndex& index, int64_t k) const;
};

struct SubsetSpec {
  double fraction = 1.0;        // in (0, 1]
  double start_offset_s = 0.0;  // relative to the parent stream start
};

// Temporally contiguous window of `fraction` of the stream, starting at
// start_offset_s into it. Episode labels over the result start again at 0.
StreamIndex contiguous_subset(const StreamIndex& index, const SubsetSpec& spec);

// Resize so the minor edge equals resize_minor_edge (aspect preserved,
// round-half-up on the other edge; no-op if already there), then take the
// central crop x crop window.
Image resize_center_crop(const Image& frame, int resize_minor_edge = 256, int crop = 224);

}  // namespace longview::stream
