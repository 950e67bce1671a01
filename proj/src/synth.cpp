#include "soel/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "soel/error.hpp"

namespace soel::events {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr std::array<GestureClass, 11> kCatalog{{
    {0, "bar_right", "vertical bar sweeping left to right"},
    {1, "dot_clockwise", "dot orbiting the center clockwise on a small radius"},
    {2, "bar_down", "horizontal bar sweeping top to bottom"},
    {3, "oscillating_pair", "two dots oscillating horizontally in mirror image"},
    {4, "ring_expanding", "ring growing outward from the center"},
    {5, "dot_counterclockwise", "dot orbiting the center counterclockwise on a large radius"},
    {6, "bar_diagonal", "bar at 45 degrees sweeping toward the bottom right"},
    {7, "ring_contracting", "ring shrinking toward the center"},
    {8, "bar_antidiagonal", "bar at 135 degrees sweeping toward the bottom left"},
    {9, "random_walk_blob", "blob following a seeded random walk"},
    {10, "figure_eight", "dot tracing a figure eight"},
}};

double frac(double v) { return v - std::floor(v); }

// Per-sample variation drawn once from the seed.
struct Variation {
  double cx;
  double cy;
  double speed;
  double size;
  double phase;
};

// Occupancy test in normalized coordinates (u, v in [0, 1]) at time t (s).
using Shape = std::function<bool(double u, double v, double t)>;

Shape bar(double angle_deg, const Variation& var) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double nx = std::cos(a);
  const double ny = std::sin(a);
  const double half = 0.05 * var.size;
  const double rate = var.speed / 0.9;  // sweeps per second
  return [=](double u, double v, double t) {
    const double d = (u - var.cx) * nx + (v - var.cy) * ny;
    const double c = -0.8 + 1.6 * frac(var.phase + rate * t);
    return std::abs(d - c) < half;
  };
}

Shape orbit(double radius, double period_s, double direction, const Variation& var) {
  const double r_dot = 0.11 * var.size;
  const double omega = direction * kTwoPi * var.speed / period_s;
  return [=](double u, double v, double t) {
    const double ang = kTwoPi * var.phase + omega * t;
    const double px = var.cx + radius * std::cos(ang);
    const double py = var.cy + radius * std::sin(ang);
    return (u - px) * (u - px) + (v - py) * (v - py) < r_dot * r_dot;
  };
}

Shape ring(bool expanding, const Variation& var) {
  const double half = 0.045 * var.size;
  const double rate = var.speed / 0.7;
  return [=](double u, double v, double t) {
    const double f = frac(var.phase + rate * t);
    const double r = expanding ? 0.05 + 0.4 * f : 0.45 - 0.4 * f;
    const double d = std::hypot(u - var.cx, v - var.cy);
    return std::abs(d - r) < half;
  };
}

Shape oscillating_pair(const Variation& var) {
  const double r_dot = 0.1 * var.size;
  const double omega = kTwoPi * var.speed / 0.6;
  return [=](double u, double v, double t) {
    const double off = 0.05 + 0.22 * std::abs(std::sin(kTwoPi * var.phase + omega * t));
    const double dy = (v - var.cy) * (v - var.cy);
    const double d1 = (u - var.cx - off) * (u - var.cx - off) + dy;
    const double d2 = (u - var.cx + off) * (u - var.cx + off) + dy;
    return std::min(d1, d2) < r_dot * r_dot;
  };
}

Shape figure_eight(const Variation& var) {
  const double r_dot = 0.1 * var.size;
  const double omega = kTwoPi * var.speed / 1.2;
  return [=](double u, double v, double t) {
    const double ang = kTwoPi * var.phase + omega * t;
    const double px = var.cx + 0.3 * std::sin(ang);
    const double py = var.cy + 0.18 * std::sin(2.0 * ang);
    return (u - px) * (u - px) + (v - py) * (v - py) < r_dot * r_dot;
  };
}

// Piecewise-linear walk with a new heading every 50 ms, reflected at the
// [0.2, 0.8] box; the path is precomputed so the shape stays a pure
// function of time.
Shape random_walk(const Variation& var, double duration_s, Rng& rng) {
  constexpr double kLeg = 0.05;
  const std::size_t legs = static_cast<std::size_t>(std::ceil((duration_s + 0.002) / kLeg)) + 2;
  std::vector<double> xs{var.cx};
  std::vector<double> ys{var.cy};
  const double speed = 0.8 * var.speed;  // units per second
  auto reflect = [](double p) {
    if (p < 0.2) return 0.4 - p;
    if (p > 0.8) return 1.6 - p;
    return p;
  };
  for (std::size_t i = 0; i < legs; ++i) {
    const double heading = rng.uniform(0.0, kTwoPi);
    xs.push_back(reflect(xs.back() + speed * kLeg * std::cos(heading)));
    ys.push_back(reflect(ys.back() + speed * kLeg * std::sin(heading)));
  }
  const double r_dot = 0.12 * var.size;
  return [=](double u, double v, double t) {
    const double s = std::max(0.0, t + 0.002) / kLeg;
    const auto i = std::min(static_cast<std::size_t>(s), xs.size() - 2);
    const double w = s - static_cast<double>(i);
    const double px = xs[i] + w * (xs[i + 1] - xs[i]);
    const double py = ys[i] + w * (ys[i + 1] - ys[i]);
    return (u - px) * (u - px) + (v - py) * (v - py) < r_dot * r_dot;
  };
}

}  // namespace

std::span<const GestureClass> gesture_catalog() { return kCatalog; }

EventStream synth_gesture(int class_id, std::uint64_t seed, const SynthOptions& options) {
  if (class_id < 0 || class_id >= static_cast<int>(kCatalog.size())) {
    throw Error(Errc::UnknownClass, "class " + std::to_string(class_id) + " not in catalog");
  }
  if (options.width == 0 || options.height == 0 || options.duration_ms == 0) {
    throw Error(Errc::InvalidConfig, "synth dimensions and duration must be positive");
  }
  Rng rng = Rng::stream(seed, "synth/" + std::to_string(class_id));
  Variation var;
  var.cx = 0.5 + rng.uniform(-0.06, 0.06);
  var.cy = 0.5 + rng.uniform(-0.06, 0.06);
  var.speed = rng.uniform(0.85, 1.15);
  var.size = rng.uniform(0.85, 1.15);
  var.phase = rng.uniform();

  const double duration_s = static_cast<double>(options.duration_ms) / 1000.0;
  Shape shape;
  switch (class_id) {
    case 0: shape = bar(0.0, var); break;
    case 1: shape = orbit(0.2, 0.8, +1.0, var); break;
    case 2: shape = bar(90.0, var); break;
    case 3: shape = oscillating_pair(var); break;
    case 4: shape = ring(true, var); break;
    case 5: shape = orbit(0.33, 0.8, -1.0, var); break;
    case 6: shape = bar(45.0, var); break;
    case 7: shape = ring(false, var); break;
    case 8: shape = bar(135.0, var); break;
    case 9: shape = random_walk(var, duration_s, rng); break;
    default: shape = figure_eight(var); break;
  }

  const int w = options.width;
  const int h = options.height;
  const std::size_t n_steps = options.duration_ms;
  auto rasterize = [&](double t, std::vector<std::uint8_t>& grid) {
    for (int y = 0; y < h; ++y) {
      const double v = (y + 0.5) / h;
      for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = shape((x + 0.5) / w, v, t);
    }
  };

  struct Candidate {
    std::uint32_t step;
    std::uint16_t x, y;
    Polarity p;
  };
  std::vector<Candidate> candidates;
  std::vector<std::uint8_t> prev(static_cast<std::size_t>(w) * h);
  std::vector<std::uint8_t> cur(prev.size());
  rasterize(-0.001, prev);
  for (std::size_t k = 0; k < n_steps; ++k) {
    rasterize(static_cast<double>(k) / 1000.0, cur);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (cur[i] == prev[i]) continue;
      const auto x = static_cast<std::uint16_t>(i % w);
      const auto y = static_cast<std::uint16_t>(i / w);
      // An edge crossing keeps the pixel firing for a few milliseconds.
      const auto burst = static_cast<std::uint32_t>(rng.uniform_int(1, 3));
      for (std::uint32_t b = 0; b < burst && k + b < n_steps; ++b) {
        candidates.push_back({static_cast<std::uint32_t>(k + b), x, y, cur[i] ? Polarity::On : Polarity::Off});
      }
    }
    std::swap(prev, cur);
  }

  const double cap = options.max_event_rate * duration_s;
  const double keep = candidates.empty() ? 1.0 : std::min(1.0, cap / static_cast<double>(candidates.size()));

  EventStream stream;
  stream.width = options.width;
  stream.height = options.height;
  stream.duration = options.duration_ms * 1000;
  stream.events.reserve(candidates.size());
  for (const Candidate& c : candidates) {
    if (keep < 1.0 && !rng.bernoulli(keep)) continue;
    const auto t = static_cast<std::uint64_t>(c.step) * 1000 + static_cast<std::uint64_t>(rng.uniform_int(0, 999));
    stream.events.push_back({t, c.x, c.y, c.p});
  }
  const auto n_noise = static_cast<std::size_t>(std::llround(options.noise_rate * duration_s));
  for (std::size_t i = 0; i < n_noise; ++i) {
    Event e;
    e.t = static_cast<std::uint64_t>(rng.uniform_int(0, static_cast<std::int64_t>(stream.duration) - 1));
    e.x = static_cast<std::uint16_t>(rng.uniform_int(0, w - 1));
    e.y = static_cast<std::uint16_t>(rng.uniform_int(0, h - 1));
    e.polarity = rng.bernoulli(0.5) ? Polarity::On : Polarity::Off;
    stream.events.push_back(e);
  }
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

}  // namespace soel::events
