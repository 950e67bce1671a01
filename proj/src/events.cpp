#include "soel/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <string_view>

#include "soel/error.hpp"

namespace soel::events {

namespace {

constexpr char kBinMagic[4] = {'A', 'E', 'R', 'S'};
constexpr std::size_t kBinHeaderSize = 4 + 2 + 2 + 8;
constexpr std::size_t kBinRecordSize = 8 + 2 + 2 + 1;

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
  }
}

template <class T>
T get_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

void finalize(EventStream& stream) {
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  if (stream.events.empty()) {
    stream.duration = 0;
    return;
  }
  const std::uint64_t last = stream.events.back().t;
  if (last == UINT64_MAX) {
    throw Error(Errc::NonmonotonicTimestampOverflow, "timestamp leaves no room for a stream duration");
  }
  stream.duration = last + 1;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

template <class T>
T parse_field(std::string_view field, std::size_t line_no, Errc overflow_code) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec == std::errc::result_out_of_range) {
    throw Error(overflow_code, "line " + std::to_string(line_no) + ": value out of range");
  }
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw Error(Errc::MalformedRecord,
                "line " + std::to_string(line_no) + ": bad field '" + std::string(field) + "'");
  }
  return value;
}

EventStream parse_csv(std::string_view text) {
  EventStream stream;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto fields = split(line, ',');
    if (!have_header) {
      if (fields.size() != 2) throw Error(Errc::MalformedRecord, "header must be 'w,h'");
      const auto w = parse_field<std::uint16_t>(fields[0], line_no, Errc::MalformedRecord);
      const auto h = parse_field<std::uint16_t>(fields[1], line_no, Errc::MalformedRecord);
      if (w == 0 || h == 0) throw Error(Errc::MalformedRecord, "zero sensor dimension");
      stream.width = w;
      stream.height = h;
      have_header = true;
      continue;
    }
    if (fields.size() != 4) {
      throw Error(Errc::MalformedRecord, "line " + std::to_string(line_no) + ": expected 4 fields");
    }
    Event e;
    e.t = parse_field<std::uint64_t>(fields[0], line_no, Errc::NonmonotonicTimestampOverflow);
    e.x = parse_field<std::uint16_t>(fields[1], line_no, Errc::MalformedRecord);
    e.y = parse_field<std::uint16_t>(fields[2], line_no, Errc::MalformedRecord);
    const auto p = parse_field<unsigned>(fields[3], line_no, Errc::MalformedRecord);
    if (p > 1 || e.x >= stream.width || e.y >= stream.height) {
      throw Error(Errc::MalformedRecord, "line " + std::to_string(line_no) + ": field out of range");
    }
    e.polarity = static_cast<Polarity>(p);
    stream.events.push_back(e);
  }
  if (!have_header) throw Error(Errc::EmptyFile, "no header line");
  finalize(stream);
  return stream;
}

EventStream parse_bin(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kBinHeaderSize || std::memcmp(bytes.data(), kBinMagic, 4) != 0) {
    throw Error(Errc::MalformedRecord, "missing AERS header");
  }
  EventStream stream;
  stream.width = get_le<std::uint16_t>(bytes.data() + 4);
  stream.height = get_le<std::uint16_t>(bytes.data() + 6);
  const auto count = get_le<std::uint64_t>(bytes.data() + 8);
  const std::size_t body = bytes.size() - kBinHeaderSize;
  if (count > body / kBinRecordSize || body != count * kBinRecordSize) {
    throw Error(Errc::MalformedRecord, "record count does not match payload size");
  }
  if (stream.width == 0 || stream.height == 0) throw Error(Errc::MalformedRecord, "zero sensor dimension");
  stream.events.resize(count);
  const std::uint8_t* p = bytes.data() + kBinHeaderSize;
  for (std::size_t i = 0; i < count; ++i, p += kBinRecordSize) {
    Event& e = stream.events[i];
    e.t = get_le<std::uint64_t>(p);
    e.x = get_le<std::uint16_t>(p + 8);
    e.y = get_le<std::uint16_t>(p + 10);
    const std::uint8_t pol = p[12];
    if (pol > 1 || e.x >= stream.width || e.y >= stream.height) {
      throw Error(Errc::MalformedRecord, "record " + std::to_string(i) + ": field out of range");
    }
    e.polarity = static_cast<Polarity>(pol);
  }
  finalize(stream);
  return stream;
}

}  // namespace

void EventStream::validate() const {
  std::uint64_t prev = 0;
  for (const Event& e : events) {
    if (e.x >= width || e.y >= height) throw Error(Errc::InvalidStream, "event outside sensor");
    if (e.t < prev) throw Error(Errc::InvalidStream, "timestamps decrease");
    if (e.t >= duration) throw Error(Errc::InvalidStream, "event at or beyond stream duration");
    prev = e.t;
  }
}

EventStream parse_event_file(std::span<const std::uint8_t> bytes, EventFormat format) {
  if (bytes.empty()) throw Error(Errc::EmptyFile, "no bytes");
  if (format == EventFormat::Bin) return parse_bin(bytes);
  return parse_csv({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

std::vector<std::uint8_t> serialize_event_file(const EventStream& stream, EventFormat format) {
  std::vector<std::uint8_t> out;
  if (format == EventFormat::Bin) {
    out.reserve(kBinHeaderSize + stream.events.size() * kBinRecordSize);
    out.insert(out.end(), std::begin(kBinMagic), std::end(kBinMagic));
    put_le<std::uint16_t>(out, stream.width);
    put_le<std::uint16_t>(out, stream.height);
    put_le<std::uint64_t>(out, stream.events.size());
    for (const Event& e : stream.events) {
      put_le<std::uint64_t>(out, e.t);
      put_le<std::uint16_t>(out, e.x);
      put_le<std::uint16_t>(out, e.y);
      out.push_back(static_cast<std::uint8_t>(e.polarity));
    }
    return out;
  }
  std::string text = std::to_string(stream.width) + "," + std::to_string(stream.height) + "\n";
  for (const Event& e : stream.events) {
    text += std::to_string(e.t);
    text += ',';
    text += std::to_string(e.x);
    text += ',';
    text += std::to_string(e.y);
    text += ',';
    text += static_cast<char>('0' + static_cast<int>(e.polarity));
    text += '\n';
  }
  out.assign(text.begin(), text.end());
  return out;
}

EventStream read_event_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  return parse_event_file(bytes, csv ? EventFormat::Csv : EventFormat::Bin);
}

void write_event_file(const std::string& path, const EventStream& stream) {
  const bool csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
  const auto bytes = serialize_event_file(stream, csv ? EventFormat::Csv : EventFormat::Bin);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "short write to " + path);
}

SpikeFrameSequence bin_events(const EventStream& stream, std::uint64_t dt, std::uint16_t out_width,
                              std::uint16_t out_height) {
  if (stream.width != out_width || stream.height != out_height) {
    throw Error(Errc::DimensionMismatch, "stream is " + std::to_string(stream.width) + "x" +
                                             std::to_string(stream.height) + ", frames are " +
                                             std::to_string(out_width) + "x" + std::to_string(out_height));
  }
  if (dt == 0) throw Error(Errc::InvalidConfig, "dt must be positive");
  SpikeFrameSequence frames;
  frames.width = out_width;
  frames.height = out_height;
  frames.dt = dt;
  frames.n_steps = static_cast<std::size_t>((stream.duration + dt - 1) / dt);
  frames.data.assign(frames.n_steps * frames.frame_size(), 0);
  for (const Event& e : stream.events) {
    const std::size_t step = e.t / dt;
    if (step >= frames.n_steps) throw Error(Errc::InvalidStream, "event beyond stream duration");
    const std::size_t idx = step * frames.frame_size() +
                            (static_cast<std::size_t>(e.polarity) * out_height + e.y) * out_width + e.x;
    frames.data[idx] = 1;
  }
  return frames;
}

EventStream frames_to_events(const SpikeFrameSequence& frames) {
  EventStream stream;
  stream.width = frames.width;
  stream.height = frames.height;
  stream.duration = frames.n_steps * frames.dt;
  for (std::size_t k = 0; k < frames.n_steps; ++k) {
    for (int c = 0; c < SpikeFrameSequence::kChannels; ++c) {
      for (int y = 0; y < frames.height; ++y) {
        for (int x = 0; x < frames.width; ++x) {
          if (frames.at(k, c, y, x)) {
            stream.events.push_back({k * frames.dt, static_cast<std::uint16_t>(x),
                                     static_cast<std::uint16_t>(y), static_cast<Polarity>(c)});
          }
        }
      }
    }
  }
  return stream;
}

EventStream downscale(const EventStream& stream, std::uint16_t target) {
  if (stream.width < target || stream.height < target || target == 0) {
    throw Error(Errc::SourceSmallerThanTarget, "cannot downscale " + std::to_string(stream.width) + "x" +
                                                   std::to_string(stream.height) + " to " +
                                                   std::to_string(target));
  }
  const std::uint32_t crop = std::min(stream.width, stream.height);
  const std::uint32_t x0 = (stream.width - crop) / 2;
  const std::uint32_t y0 = (stream.height - crop) / 2;
  EventStream out;
  out.width = target;
  out.height = target;
  out.duration = stream.duration;
  out.events.reserve(stream.events.size());
  for (const Event& e : stream.events) {
    if (e.x < x0 || e.x >= x0 + crop || e.y < y0 || e.y >= y0 + crop) continue;
    Event m = e;
    m.x = static_cast<std::uint16_t>((e.x - x0) * target / crop);
    m.y = static_cast<std::uint16_t>((e.y - y0) * target / crop);
    out.events.push_back(m);
  }
  return out;
}

AugmentTransform sample_augment(const EventStream& stream, const AugmentLimits& limits, Rng& rng) {
  if (stream.duration < limits.window) {
    throw Error(Errc::StreamShorterThanWindow, "stream is " + std::to_string(stream.duration) +
                                                   " us, window is " + std::to_string(limits.window));
  }
  AugmentTransform t;
  t.dx = static_cast<int>(rng.uniform_int(-limits.xy_jitter_max, limits.xy_jitter_max));
  t.dy = static_cast<int>(rng.uniform_int(-limits.xy_jitter_max, limits.xy_jitter_max));
  t.rotation_deg = limits.rotation_max_deg > 0 ? rng.uniform(-limits.rotation_max_deg, limits.rotation_max_deg) : 0.0;
  t.window = limits.window;
  t.window_start = static_cast<std::uint64_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(stream.duration - limits.window)));
  return t;
}

EventStream apply_augment(const EventStream& stream, const AugmentTransform& transform) {
  if (transform.window_start > stream.duration || stream.duration - transform.window_start < transform.window) {
    throw Error(Errc::StreamShorterThanWindow, "window exceeds stream");
  }
  const double cx = (stream.width - 1) / 2.0;
  const double cy = (stream.height - 1) / 2.0;
  const double rad = transform.rotation_deg * std::numbers::pi / 180.0;
  const double cos_a = std::cos(rad);
  const double sin_a = std::sin(rad);
  const bool rotate = transform.rotation_deg != 0.0;
  const std::uint64_t begin = transform.window_start;
  const std::uint64_t end = begin + transform.window;

  EventStream out;
  out.width = stream.width;
  out.height = stream.height;
  out.duration = transform.window;
  for (const Event& e : stream.events) {
    if (e.t < begin || e.t >= end) continue;
    long x = e.x;
    long y = e.y;
    if (rotate) {
      const double rx = cx + cos_a * (e.x - cx) - sin_a * (e.y - cy);
      const double ry = cy + sin_a * (e.x - cx) + cos_a * (e.y - cy);
      x = std::lround(rx);
      y = std::lround(ry);
    }
    x += transform.dx;
    y += transform.dy;
    if (x < 0 || y < 0 || x >= stream.width || y >= stream.height) continue;
    out.events.push_back({e.t - begin, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), e.polarity});
  }
  return out;
}

EventStream parse_dvs_gesture_aedat(std::span<const std::uint8_t> bytes) {
#ifndef SOEL_DVSGESTURE_IMPORT
  (void)bytes;
  throw Error(Errc::InvalidConfig, "built without SOEL_DVSGESTURE_IMPORT");
#else
  if (bytes.empty()) throw Error(Errc::EmptyFile, "no bytes");
  constexpr std::string_view kEnd = "#!END-HEADER\r\n";
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto header_end = text.find(kEnd);
  if (header_end == std::string_view::npos) throw Error(Errc::MalformedRecord, "missing AEDAT header terminator");

  EventStream stream;
  stream.width = 128;
  stream.height = 128;
  std::size_t pos = header_end + kEnd.size();
  constexpr std::size_t kPacketHeader = 28;
  constexpr std::int16_t kPolarityEvent = 1;
  while (pos + kPacketHeader <= bytes.size()) {
    const std::uint8_t* h = bytes.data() + pos;
    const auto type = get_le<std::int16_t>(h);
    const auto size = get_le<std::int32_t>(h + 4);
    const auto ts_overflow = get_le<std::uint32_t>(h + 12);
    const auto number = get_le<std::int32_t>(h + 20);
    if (size <= 0 || number < 0) throw Error(Errc::MalformedRecord, "bad AEDAT packet header");
    const std::size_t payload = static_cast<std::size_t>(size) * static_cast<std::size_t>(number);
    pos += kPacketHeader;
    if (pos + payload > bytes.size()) throw Error(Errc::MalformedRecord, "truncated AEDAT packet");
    if (type == kPolarityEvent && size == 8) {
      for (std::int32_t i = 0; i < number; ++i) {
        const std::uint8_t* ev = bytes.data() + pos + static_cast<std::size_t>(i) * 8;
        const auto data = get_le<std::uint32_t>(ev);
        const auto ts = get_le<std::uint32_t>(ev + 4);
        if ((data & 1u) == 0) continue;  // invalidated event
        const auto x = static_cast<std::uint16_t>((data >> 17) & 0x1FFF);
        const auto y = static_cast<std::uint16_t>((data >> 2) & 0x1FFF);
        if (x >= stream.width || y >= stream.height) throw Error(Errc::MalformedRecord, "AEDAT event outside 128x128");
        const std::uint64_t t = (static_cast<std::uint64_t>(ts_overflow) << 31) | ts;
        stream.events.push_back({t, x, y, static_cast<Polarity>((data >> 1) & 1u)});
      }
    }
    pos += payload;
  }
  if (pos != bytes.size()) throw Error(Errc::MalformedRecord, "trailing bytes after last AEDAT packet");
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  if (!stream.events.empty()) {
    const std::uint64_t t0 = stream.events.front().t;
    for (Event& e : stream.events) e.t -= t0;
    stream.duration = stream.events.back().t + 1;
  }
  return stream;
#endif
}

}  // namespace soel::events
