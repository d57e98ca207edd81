#pragma once

// Trace-driven network model: piecewise-constant throughput between trace
// points, wrapping around when a simulation outlasts the trace. Only the
// transmission delay is modeled; propagation to an edge server is negligible
// next to DNN runtimes.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "batchsim/model.hpp"

namespace batchsim {

struct TracePoint {
  Ms time = 0;                // ms
  double bits_per_ms = 0;
};

class NetworkTrace {
 public:
  NetworkTrace() = default;
  explicit NetworkTrace(std::vector<TracePoint> points) : points_(std::move(points)) {
    validate();
  }

  bool empty() const { return points_.empty(); }
  const std::vector<TracePoint>& points() const { return points_; }

  // Throughput at an absolute time; the trace repeats with period
  // last.time - first.time (the final point marks the cycle end).
  double throughput_at(Ms t) const {
    const Ms local = wrap(t);
    std::size_t i = segment_at(local);
    return points_[i].bits_per_ms;
  }

  double span() const {
    return points_.size() < 2 ? 0 : points_.back().time - points_.front().time;
  }

 private:
  friend Ms transmission_delay(std::int64_t, Ms, const NetworkTrace&);

  void validate() const {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].bits_per_ms <= 0) {
        throw std::runtime_error("network trace throughput must be positive");
      }
      if (i > 0 && points_[i].time <= points_[i - 1].time) {
        throw std::runtime_error("network trace timestamps must be strictly increasing");
      }
    }
  }

  Ms wrap(Ms t) const {
    if (points_.size() < 2) return points_.front().time;
    const Ms base = points_.front().time;
    const Ms period = span();
    Ms local = t - base;
    local -= std::floor(local / period) * period;
    if (local < 0) local += period;
    return base + local;
  }

  std::size_t segment_at(Ms local) const {
    std::size_t i = 0;
    while (i + 1 < points_.size() && points_[i + 1].time <= local) ++i;
    if (i + 1 == points_.size() && points_.size() > 1) i = points_.size() - 2;
    return i;
  }

  std::vector<TracePoint> points_;
};

// Time to push `bits` onto the network starting at `start`, integrating the
// piecewise-constant throughput. Zero-size transfers take zero time.
inline Ms transmission_delay(std::int64_t bits, Ms start, const NetworkTrace& trace) {
  if (bits <= 0) return 0;
  if (trace.empty()) return 0;  // no trace: network modeled as instantaneous
  const auto& pts = trace.points();
  if (pts.size() == 1) {
    return static_cast<Ms>(bits) / pts[0].bits_per_ms;
  }
  double remaining = static_cast<double>(bits);
  Ms t = start;
  Ms delay = 0;
  // Guard against degenerate loops; each iteration consumes a trace segment.
  while (remaining > 0) {
    const Ms local = trace.wrap(t);
    const std::size_t seg = trace.segment_at(local);
    const double thr = pts[seg].bits_per_ms;
    const Ms seg_end = pts[seg + 1].time;
    const Ms width = seg_end - local;
    const double capacity = thr * width;
    if (capacity >= remaining) {
      delay += remaining / thr;
      remaining = 0;
    } else {
      remaining -= capacity;
      delay += width;
      t += width;
    }
  }
  return delay;
}

inline NetworkTrace scale_trace(const NetworkTrace& trace, double factor) {
  if (factor <= 0) throw std::invalid_argument("trace scale factor must be positive");
  std::vector<TracePoint> pts = trace.points();
  for (TracePoint& p : pts) p.bits_per_ms *= factor;
  return NetworkTrace(std::move(pts));
}

// CSV format: header "timestamp_s,throughput_mbps" then one row per point.
inline NetworkTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::string line;
  std::vector<TracePoint> pts;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.find("timestamp") != std::string::npos) continue;
    }
    std::istringstream row(line);
    std::string ts, thr;
    if (!std::getline(row, ts, ',') || !std::getline(row, thr, ',')) {
      throw std::runtime_error(path + ": malformed trace row: " + line);
    }
    TracePoint p;
    p.time = std::stod(ts) * 1000.0;             // s -> ms
    p.bits_per_ms = std::stod(thr) * 1e6 / 1e3;  // Mbit/s -> bits/ms
    pts.push_back(p);
  }
  if (pts.empty()) throw std::runtime_error(path + ": empty trace");
  return NetworkTrace(std::move(pts));
}

}  // namespace batchsim
