#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "soel/rng.hpp"

namespace soel::events {

enum class Polarity : std::uint8_t { Off = 0, On = 1 };

struct Event {
  std::uint64_t t = 0;  // microseconds
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  Polarity polarity = Polarity::Off;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Events ordered by timestamp. All timestamps lie in [0, duration) when the
/// stream is non-empty, so binning with any dt covers every event.
struct EventStream {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<Event> events;
  std::uint64_t duration = 0;  // microseconds

  /// Throws Errc::InvalidStream when an invariant is broken.
  void validate() const;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Binary spike tensors, one per timestep, laid out [step][channel][y][x].
/// Channel index equals the polarity value (0 = OFF, 1 = ON).
struct SpikeFrameSequence {
  static constexpr int kChannels = 2;

  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint64_t dt = 1000;  // microseconds
  std::size_t n_steps = 0;
  std::vector<std::uint8_t> data;

  std::size_t frame_size() const { return std::size_t{kChannels} * width * height; }

  std::span<const std::uint8_t> frame(std::size_t step) const {
    return {data.data() + step * frame_size(), frame_size()};
  }

  std::uint8_t at(std::size_t step, int channel, int y, int x) const {
    return data[step * frame_size() + (static_cast<std::size_t>(channel) * height + y) * width + x];
  }

  friend bool operator==(const SpikeFrameSequence&, const SpikeFrameSequence&) = default;
};

enum class EventFormat { Csv, Bin };

/// Parses CSV (`w,h` header then `t_us,x,y,p`) or BIN (`AERS` container)
/// bytes. Out-of-order records are sorted stably by timestamp. The parsed
/// duration is one past the last timestamp (0 for an empty body).
EventStream parse_event_file(std::span<const std::uint8_t> bytes, EventFormat format);

std::vector<std::uint8_t> serialize_event_file(const EventStream& stream, EventFormat format);

/// Reads a file from disk, choosing the format from the extension
/// (.csv -> CSV, anything else -> BIN).
EventStream read_event_file(const std::string& path);
void write_event_file(const std::string& path, const EventStream& stream);

/// OR-bins events into `dt`-wide frames; n_steps = ceil(duration / dt).
SpikeFrameSequence bin_events(const EventStream& stream, std::uint64_t dt,
                              std::uint16_t out_width, std::uint16_t out_height);

/// One event per active frame cell, stamped at the start of its bin.
EventStream frames_to_events(const SpikeFrameSequence& frames);

/// Center-crops to the largest centered square and maps coordinates with
/// floor(coord * target / crop). The result is target x target.
EventStream downscale(const EventStream& stream, std::uint16_t target);

/// A concrete augmentation: rotate about the frame center, translate, then
/// keep [window_start, window_start + window) rebased to zero.
struct AugmentTransform {
  int dx = 0;
  int dy = 0;
  double rotation_deg = 0.0;
  std::uint64_t window_start = 0;
  std::uint64_t window = 0;
};

struct AugmentLimits {
  int xy_jitter_max = 8;
  double rotation_max_deg = 10.0;
  std::uint64_t window = 1'450'000;
};

/// Draws jitter uniformly in [-max, max], rotation uniformly in
/// [-rot, rot] degrees and the window start uniformly among valid offsets.
AugmentTransform sample_augment(const EventStream& stream, const AugmentLimits& limits, Rng& rng);

/// Applies `transform`; events leaving the frame are dropped.
EventStream apply_augment(const EventStream& stream, const AugmentTransform& transform);

inline EventStream augment(const EventStream& stream, const AugmentLimits& limits, Rng& rng) {
  return apply_augment(stream, sample_augment(stream, limits, rng));
}

/// Imports an AEDAT 3.1 recording as distributed with the IBM DVS Gesture
/// dataset (polarity packets only; other packet types are skipped).
/// Timestamps are rebased so the first event is at t = 0.
EventStream parse_dvs_gesture_aedat(std::span<const std::uint8_t> bytes);

}  // namespace soel::events
