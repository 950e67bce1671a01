#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "soel/events.hpp"

namespace soel::events {

struct GestureClass {
  int id;
  std::string_view name;
  std::string_view description;
};

/// The generator's class catalog; mirrored by data/gesture_catalog.csv.
std::span<const GestureClass> gesture_catalog();

struct SynthOptions {
  std::uint16_t width = 128;
  std::uint16_t height = 128;
  std::uint64_t duration_ms = 1450;
  double max_event_rate = 40'000.0;  // events/s, edge events are thinned above this
  double noise_rate = 300.0;         // events/s of uniform background activity
};

/// Deterministic-in-seed moving-shape stream. Pixels entering the shape
/// emit ON events (leading edge), pixels leaving it emit OFF events
/// (trailing edge). Throws Errc::UnknownClass outside the catalog.
EventStream synth_gesture(int class_id, std::uint64_t seed, const SynthOptions& options = {});

}  // namespace soel::events
