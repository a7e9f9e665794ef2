#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "vadfuse/error.hpp"

namespace vadfuse {

struct EndpointConfig {
  int window = 30;          // begin window N, frames
  double rho = 0.7;         // speech fraction to trigger a beginning
  int traceback = 35;       // frames looked back from the begin trigger
  int end_window = 50;      // end window, frames
  double rho_end = 0.9;     // silence fraction to trigger an ending
  int end_traceback = 40;   // frames looked back from the end trigger
};

struct EndpointEvent {
  enum class Kind { kBegin, kEnd };
  Kind kind;
  std::int64_t at;       // begin frame (inclusive) or end frame (exclusive)
  std::int64_t trigger;  // frame index that completed the window condition
};

namespace detail {

// "count larger than rho*N" as an at-least-ceil(rho*N) count; the epsilon
// keeps products like 0.7*30 from ceiling to 22.
inline int window_threshold(double rho, int n) {
  return static_cast<int>(std::ceil(rho * n - 1e-9));
}

}  // namespace detail

// Sliding-window begin/end detector over the per-frame flag stream. The
// window resets on every mode transition.
class EndpointState {
 public:
  explicit EndpointState(const EndpointConfig& cfg) : cfg_(cfg) {
    if (cfg.window < 1 || cfg.end_window < 1)
      throw Error(ErrorCode::kBadConfig, "window lengths must be >= 1");
    if (detail::window_threshold(cfg.rho, cfg.window) < 1)
      throw Error(ErrorCode::kBadConfig, "rho * window must be >= 1");
    if (cfg.traceback < 0 || cfg.end_traceback < 0)
      throw Error(ErrorCode::kBadConfig, "traceback must be >= 0");
  }

  std::optional<EndpointEvent> push_flag(int flag, std::int64_t frame_index) {
    // In silence we count speech flags; in speech we count silence flags.
    const int hit = in_speech_ ? (flag ? 0 : 1) : (flag ? 1 : 0);
    const int n = in_speech_ ? cfg_.end_window : cfg_.window;
    window_.push_back(static_cast<std::uint8_t>(hit));
    count_ += hit;
    if (static_cast<int>(window_.size()) > n) {
      count_ -= window_.front();
      window_.pop_front();
    }
    const double rho = in_speech_ ? cfg_.rho_end : cfg_.rho;
    if (count_ < detail::window_threshold(rho, n)) return std::nullopt;
    if (!in_speech_) {
      std::int64_t at = frame_index - cfg_.traceback;
      if (at < 0) at = 0;
      if (at < prev_end_) at = prev_end_;
      begin_ = at;
      in_speech_ = true;
      reset_window();
      return EndpointEvent{EndpointEvent::Kind::kBegin, at, frame_index};
    }
    std::int64_t at = frame_index - cfg_.end_traceback;
    if (at < begin_ + 1) at = begin_ + 1;
    prev_end_ = at;
    in_speech_ = false;
    reset_window();
    return EndpointEvent{EndpointEvent::Kind::kEnd, at, frame_index};
  }

  // Abandons the current segment (used when the data buffer runs out).
  void force_end(std::int64_t at) {
    prev_end_ = at;
    in_speech_ = false;
    reset_window();
  }

  bool in_speech() const { return in_speech_; }
  std::int64_t segment_begin() const { return begin_; }
  int window_count() const { return count_; }

 private:
  void reset_window() {
    window_.clear();
    count_ = 0;
  }

  EndpointConfig cfg_;
  std::deque<std::uint8_t> window_;
  int count_ = 0;
  bool in_speech_ = false;
  std::int64_t begin_ = 0;
  std::int64_t prev_end_ = 0;
};

// Fixed-capacity frame store. Write position is an absolute frame count;
// slot = index % capacity.
class RingBuffer {
 public:
  RingBuffer(std::int64_t capacity_frames, int samples_per_frame)
      : capacity_(capacity_frames), frame_samples_(samples_per_frame) {
    if (capacity_frames < 1 || samples_per_frame < 1)
      throw Error(ErrorCode::kBadConfig, "ring buffer dimensions must be >= 1");
    data_.resize(static_cast<std::size_t>(capacity_frames) * samples_per_frame);
  }

  void write_frame(std::span<const double> samples) {
    if (static_cast<int>(samples.size()) != frame_samples_)
      throw Error(ErrorCode::kDimMismatch, "frame payload size mismatch");
    const std::int64_t slot = writes_ % capacity_;
    std::copy(samples.begin(), samples.end(),
              data_.begin() + slot * frame_samples_);
    ++writes_;
  }

  std::int64_t frames_written() const { return writes_; }
  std::int64_t capacity() const { return capacity_; }
  int samples_per_frame() const { return frame_samples_; }

  std::span<const double> slot(std::int64_t slot_index) const {
    return std::span<const double>(
        data_.data() + (slot_index % capacity_) * frame_samples_,
        static_cast<std::size_t>(frame_samples_));
  }

 private:
  std::vector<double> data_;
  std::int64_t capacity_;
  int frame_samples_;
  std::int64_t writes_ = 0;
};

// How the segment sat in the buffer when it was resolved.
enum class OverflowCase {
  kLinear,      // fits without crossing the buffer end
  kPulledBack,  // crossed, but the traceback pulls the end back before it
  kSplit,       // crossed; two physically contiguous parts
  kFlush,       // buffer exhausted before an ending was found
};

struct SpanPart {
  std::int64_t pos = 0;  // slot index
  std::int64_t len = 0;  // frames
};

struct SegmentSpan {
  std::array<SpanPart, 2> parts{};
  int num_parts = 0;
  bool truncated = false;
  OverflowCase overflow_case = OverflowCase::kLinear;

  std::int64_t total_frames() const {
    std::int64_t n = 0;
    for (int i = 0; i < num_parts; ++i) n += parts[i].len;
    return n;
  }
};

// Pointer arithmetic for pulling a segment out of the ring. p_begin is an
// absolute frame index, l_segment counts frames from p_begin to the write
// position, l_tb is the tail to discard. Callers must extract before any
// further write lands.
inline SegmentSpan resolve_segment(const RingBuffer& rb, std::int64_t p_begin,
                                   std::int64_t l_segment, std::int64_t l_tb) {
  if (l_tb > l_segment || l_tb < 0 || l_segment < 0 || p_begin < 0)
    throw Error(ErrorCode::kInvalidTraceback,
                "traceback " + std::to_string(l_tb) + " of segment " +
                    std::to_string(l_segment));
  const std::int64_t cap = rb.capacity();
  SegmentSpan out;
  if (l_segment >= cap) {
    // Exhausted: only the most recent capacity's worth of the segment is
    // still resident. Flush it whole, oldest surviving frame first, and
    // ignore the traceback.
    const std::int64_t start = p_begin + (l_segment - cap);
    const std::int64_t slot_s = start % cap;
    out.overflow_case = OverflowCase::kFlush;
    out.truncated = true;
    out.parts[out.num_parts++] = {slot_s, cap - slot_s};
    if (slot_s > 0) out.parts[out.num_parts++] = {0, slot_s};
    return out;
  }
  const std::int64_t slot_b = p_begin % cap;
  if (slot_b + l_segment <= cap) {
    out.overflow_case = OverflowCase::kLinear;
    out.parts[out.num_parts++] = {slot_b, l_segment - l_tb};
    return out;
  }
  const std::int64_t front_len = (p_begin + l_segment) % cap;
  if (front_len <= l_tb) {
    out.overflow_case = OverflowCase::kPulledBack;
    out.parts[out.num_parts++] = {slot_b, l_segment - l_tb};
    return out;
  }
  out.overflow_case = OverflowCase::kSplit;
  out.parts[out.num_parts++] = {slot_b, cap - slot_b};
  out.parts[out.num_parts++] = {0, front_len - l_tb};
  return out;
}

inline std::vector<double> extract(const RingBuffer& rb,
                                   const SegmentSpan& span) {
  const std::int64_t cap = rb.capacity();
  if (span.total_frames() > cap)
    throw Error(ErrorCode::kSpanOutOfRange, "span longer than the buffer");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(span.total_frames()) *
              rb.samples_per_frame());
  for (int i = 0; i < span.num_parts; ++i) {
    const SpanPart& part = span.parts[i];
    if (part.len == 0) continue;
    if (part.pos < 0 || part.pos >= cap || part.len < 0 || part.len > cap)
      throw Error(ErrorCode::kSpanOutOfRange,
                  "part at " + std::to_string(part.pos) + " length " +
                      std::to_string(part.len));
    for (std::int64_t f = 0; f < part.len; ++f) {
      const auto s = rb.slot(part.pos + f);  // slot() wraps
      out.insert(out.end(), s.begin(), s.end());
    }
  }
  return out;
}

struct ExtractedSegment {
  std::int64_t begin_frame = 0;
  std::int64_t end_frame = 0;  // exclusive
  bool truncated = false;
  OverflowCase overflow_case = OverflowCase::kLinear;
  std::vector<double> samples;
};

// Ties the flag-driven endpoint machine to the audio ring. Per frame the
// caller hands over the flag and the frame's hop worth of samples; completed
// segments come back already copied out of the ring.
class SegmentAssembler {
 public:
  SegmentAssembler(const EndpointConfig& cfg, std::int64_t buffer_frames,
                   int samples_per_frame)
      : endpoint_(cfg), ring_(buffer_frames, samples_per_frame) {}

  std::optional<ExtractedSegment> push(int flag,
                                       std::span<const double> samples) {
    ring_.write_frame(samples);
    const std::int64_t frame = next_frame_++;
    const std::int64_t p_t = ring_.frames_written();
    // The exhaustion check runs before the flag: once the segment fills the
    // whole buffer the next write would overwrite its first frame.
    if (endpoint_.in_speech() &&
        p_t - endpoint_.segment_begin() >= ring_.capacity()) {
      const std::int64_t begin = endpoint_.segment_begin();
      const SegmentSpan span = resolve_segment(ring_, begin, p_t - begin, 0);
      endpoint_.force_end(p_t);
      ExtractedSegment seg;
      seg.begin_frame = begin;
      seg.end_frame = p_t;
      seg.truncated = true;
      seg.overflow_case = span.overflow_case;
      seg.samples = extract(ring_, span);
      maybe_consume_flag(flag, frame);
      return seg;
    }
    return maybe_consume_flag(flag, frame);
  }

  // Closes a trailing open segment with no traceback.
  std::optional<ExtractedSegment> finish() {
    if (!endpoint_.in_speech()) return std::nullopt;
    const std::int64_t p_t = ring_.frames_written();
    const std::int64_t begin = endpoint_.segment_begin();
    if (p_t <= begin) {
      endpoint_.force_end(p_t);
      return std::nullopt;
    }
    const SegmentSpan span = resolve_segment(ring_, begin, p_t - begin, 0);
    endpoint_.force_end(p_t);
    ExtractedSegment seg;
    seg.begin_frame = begin;
    seg.end_frame = p_t;
    seg.truncated = span.truncated;
    seg.overflow_case = span.overflow_case;
    seg.samples = extract(ring_, span);
    return seg;
  }

  const EndpointState& endpoint() const { return endpoint_; }
  const RingBuffer& ring() const { return ring_; }

 private:
  std::optional<ExtractedSegment> maybe_consume_flag(int flag,
                                                     std::int64_t frame) {
    const auto ev = endpoint_.push_flag(flag, frame);
    if (!ev || ev->kind != EndpointEvent::Kind::kEnd) return std::nullopt;
    const std::int64_t p_t = ring_.frames_written();
    const std::int64_t begin = endpoint_.segment_begin();
    const std::int64_t l_segment = p_t - begin;
    const std::int64_t l_tb = p_t - ev->at;
    const SegmentSpan span = resolve_segment(ring_, begin, l_segment, l_tb);
    ExtractedSegment seg;
    seg.begin_frame = begin;
    seg.end_frame = ev->at;
    seg.truncated = span.truncated;
    seg.overflow_case = span.overflow_case;
    seg.samples = extract(ring_, span);
    return seg;
  }

  EndpointState endpoint_;
  RingBuffer ring_;
  std::int64_t next_frame_ = 0;
};

}  // namespace vadfuse
