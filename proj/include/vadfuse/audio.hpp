#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "vadfuse/bytes.hpp"
#include "vadfuse/error.hpp"

namespace vadfuse {

inline constexpr int kSampleRate = 16000;
inline constexpr int kFrameWindow = 400;  // 25 ms
inline constexpr int kFrameHop = 160;     // 10 ms

// Mono 16 kHz audio, samples scaled to [-1, 1).
struct SampleStream {
  std::vector<double> samples;
  int sample_rate_hz = kSampleRate;
};

struct Frame {
  std::int64_t index = 0;
  std::span<const double> window;  // kFrameWindow samples
};

inline std::int64_t frame_count(std::int64_t num_samples) {
  if (num_samples < kFrameWindow) return 0;
  return (num_samples - kFrameWindow) / kFrameHop + 1;
}

// Frames of a fully buffered stream. Throws TooShort below one window.
class FrameStream {
 public:
  explicit FrameStream(const SampleStream& s) : stream_(s) {
    if (static_cast<std::int64_t>(s.samples.size()) < kFrameWindow)
      throw Error(ErrorCode::kTooShort,
                  "need at least " + std::to_string(kFrameWindow) +
                      " samples, got " + std::to_string(s.samples.size()));
  }

  std::int64_t size() const {
    return frame_count(static_cast<std::int64_t>(stream_.samples.size()));
  }

  Frame operator[](std::int64_t i) const {
    return Frame{i, std::span<const double>(
                        stream_.samples.data() + i * kFrameHop, kFrameWindow)};
  }

 private:
  const SampleStream& stream_;
};

// Incremental framer for chunked input. Keeps only the window-minus-hop
// carryover between calls.
class StreamingFramer {
 public:
  template <typename Fn>
  void push(std::span<const double> chunk, Fn&& on_frame) {
    pending_.insert(pending_.end(), chunk.begin(), chunk.end());
    std::size_t pos = 0;
    while (pending_.size() - pos >= kFrameWindow) {
      on_frame(Frame{next_index_++,
                     std::span<const double>(pending_.data() + pos,
                                             kFrameWindow)});
      pos += kFrameHop;
    }
    pending_.erase(pending_.begin(), pending_.begin() + pos);
  }

  std::int64_t frames_emitted() const { return next_index_; }

 private:
  std::vector<double> pending_;
  std::int64_t next_index_ = 0;
};

// RIFF/WAVE, PCM 16-bit mono 16 kHz only. Samples come out divided by 32768.
inline SampleStream read_wav(std::istream& in) {
  unsigned char hdr[12];
  if (!in.read(reinterpret_cast<char*>(hdr), 12))
    throw Error(ErrorCode::kNotWav, "file shorter than RIFF header");
  if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0)
    throw Error(ErrorCode::kNotWav, "missing RIFF/WAVE magic");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<double> samples;
  bool have_data = false;

  unsigned char chdr[8];
  while (in.read(reinterpret_cast<char*>(chdr), 8)) {
    const std::uint32_t size = detail::read_u32le(chdr + 4);
    if (std::memcmp(chdr, "fmt ", 4) == 0) {
      std::vector<unsigned char> body(size);
      if (!in.read(reinterpret_cast<char*>(body.data()), size) || size < 16)
        throw Error(ErrorCode::kNotWav, "bad fmt chunk");
      format = detail::read_u16le(body.data());
      channels = detail::read_u16le(body.data() + 2);
      rate = detail::read_u32le(body.data() + 4);
      bits = detail::read_u16le(body.data() + 14);
      have_fmt = true;
    } else if (std::memcmp(chdr, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorCode::kNotWav, "data before fmt");
      if (format != 1)
        throw Error(ErrorCode::kUnsupportedFormat, "non-PCM encoding");
      if (bits != 16)
        throw Error(ErrorCode::kUnsupportedFormat,
                    std::to_string(bits) + "-bit samples, want 16");
      if (channels != 1)
        throw Error(ErrorCode::kUnsupportedFormat,
                    std::to_string(channels) + " channels, want mono");
      if (rate != kSampleRate)
        throw Error(ErrorCode::kWrongRate,
                    std::to_string(rate) + " Hz, want 16000");
      std::vector<unsigned char> body(size);
      if (!in.read(reinterpret_cast<char*>(body.data()), size))
        throw Error(ErrorCode::kNotWav, "truncated data chunk");
      const std::size_t n = size / 2;
      samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t s = static_cast<std::int16_t>(
            detail::read_u16le(body.data() + 2 * i));
        samples[i] = static_cast<double>(s) / 32768.0;
      }
      have_data = true;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);  // chunks are word-aligned
    }
  }
  if (!have_data) throw Error(ErrorCode::kNotWav, "no data chunk");
  return SampleStream{std::move(samples), static_cast<int>(rate)};
}

inline SampleStream read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return read_wav(in);
}

// Headerless 16-bit little-endian PCM, assumed 16 kHz mono.
inline SampleStream read_raw_pcm(std::istream& in) {
  std::vector<double> samples;
  char buf[8192];
  char carry = 0;
  bool have_carry = false;
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    std::streamsize n = in.gcount();
    std::streamsize i = 0;
    if (have_carry && n > 0) {
      const std::int16_t s = static_cast<std::int16_t>(
          static_cast<unsigned char>(carry) |
          (static_cast<unsigned char>(buf[0]) << 8));
      samples.push_back(static_cast<double>(s) / 32768.0);
      have_carry = false;
      i = 1;
    }
    for (; i + 1 < n; i += 2) {
      const std::int16_t s = static_cast<std::int16_t>(
          static_cast<unsigned char>(buf[i]) |
          (static_cast<unsigned char>(buf[i + 1]) << 8));
      samples.push_back(static_cast<double>(s) / 32768.0);
    }
    if (i < n) {
      carry = buf[i];
      have_carry = true;
    }
    if (!in) break;
  }
  return SampleStream{std::move(samples), kSampleRate};
}

inline void write_wav(std::ostream& out, const SampleStream& s) {
  std::string blob;
  blob.reserve(44 + s.samples.size() * 2);
  blob += "RIFF";
  detail::put_u32le(blob, static_cast<std::uint32_t>(36 + s.samples.size() * 2));
  blob += "WAVEfmt ";
  detail::put_u32le(blob, 16);
  detail::put_u16le(blob, 1);  // PCM
  detail::put_u16le(blob, 1);  // mono
  detail::put_u32le(blob, static_cast<std::uint32_t>(s.sample_rate_hz));
  detail::put_u32le(blob, static_cast<std::uint32_t>(s.sample_rate_hz * 2));
  detail::put_u16le(blob, 2);
  detail::put_u16le(blob, 16);
  blob += "data";
  detail::put_u32le(blob, static_cast<std::uint32_t>(s.samples.size() * 2));
  for (double v : s.samples) {
    double scaled = v * 32768.0;
    if (scaled > 32767.0) scaled = 32767.0;
    if (scaled < -32768.0) scaled = -32768.0;
    detail::put_u16le(blob, static_cast<std::uint16_t>(
                                static_cast<std::int16_t>(std::lrint(scaled))));
  }
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

inline void write_wav(const std::string& path, const SampleStream& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path);
  write_wav(out, s);
}

}  // namespace vadfuse
