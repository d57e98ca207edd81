#pragma once

// Segments, schedules, and the layer sweep used to cost them.
//
// A segment is a set of requests executed together: the sweep starts at the
// newest member's layer and runs to the last layer, absorbing members into
// the batch as it reaches the layer each one currently occupies. All members
// finish together at the end of the sweep.

#include <cassert>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "batchsim/cost_model.hpp"
#include "batchsim/model.hpp"

namespace batchsim {

// A foreign request batched along through a shared stage: it rides the sweep
// over global layers [join_layer, leave_layer] of the segment's DNN, then is
// deposited at deposit_layer of its own DNN.
struct Rider {
  RequestId id = 0;
  int dnn = 0;            // the rider's own DNN
  int join_layer = 0;     // in the segment's DNN's layer space
  int leave_layer = 0;
  int deposit_layer = 0;  // in the rider's own DNN's layer space
};

struct ScheduledSegment {
  std::vector<RequestId> members;  // arrival order, newest last
  int dnn = 0;
  int start_layer = 1;   // the newest member's layer
  Ms duration = 0;
  Ms finish_offset = 0;  // from schedule start
  int max_layer_batch = 0;
  std::vector<Rider> riders;
};

struct Schedule {
  std::vector<ScheduledSegment> segments;  // execution order
  // Predicted completion per request, as an offset from schedule start.
  std::vector<std::pair<RequestId, Ms>> completion_offsets;
  Ms objective = 0;       // sum of members' completion offsets
  Ms total_duration = 0;  // makespan of the schedule
  int tardy_count = 0;    // deadline-aware schedulers only
  std::vector<RequestId> drop_marks;  // predicted-tardy requests to drop
  double solve_wall_ms = 0;

  Ms offset_of(RequestId id) const {
    for (const auto& [rid, off] : completion_offsets) {
      if (rid == id) return off;
    }
    return kInfeasible;
  }
};

// Incremental layer sweep for one DNN. Members are absorbed one at a time;
// the duration updates by the marginal cost of raising the batch count on the
// member's tail of layers. Rider counts (shared-stage batching) are applied
// up front via add_rider_counts.
class SegmentSweep {
 public:
  SegmentSweep(const ProfileSet& ps, int dnn, int batch_bound)
      : ps_(&ps), dnn_(dnn), bound_(batch_bound),
        num_layers_(ps.dnns[static_cast<std::size_t>(dnn)].num_layers()),
        count_(static_cast<std::size_t>(num_layers_) + 2, 0) {}

  void reset() {
    std::fill(count_.begin(), count_.end(), 0);
    start_layer_ = num_layers_ + 1;
    duration_ = 0;
    max_count_ = 0;
  }

  int start_layer() const { return start_layer_; }
  Ms duration() const { return duration_; }
  int max_count() const { return max_count_; }
  bool feasible() const { return max_count_ <= bound_; }
  int count_at(int layer) const { return count_[static_cast<std::size_t>(layer)]; }

  // Adds one request currently at `layer`; extends the sweep start downward
  // if needed. Returns the previous start layer so the call can be undone.
  int absorb(int layer) {
    assert(layer >= 1 && layer <= num_layers_);
    const int prev_start = start_layer_;
    if (layer < prev_start) {
      // Layers [layer, prev_start) become swept: charge their full runtime at
      // the count including any preloaded rider counts.
      const int upper = std::min(prev_start, num_layers_ + 1);
      for (int k = layer; k < upper; ++k) {
        auto& c = count_[static_cast<std::size_t>(k)];
        ++c;
        max_count_ = std::max(max_count_, c);
        duration_ += ps_->lookup(dnn_, k, c);
      }
      start_layer_ = layer;
      for (int k = prev_start; k <= num_layers_; ++k) duration_ += delta_up(k);
    } else {
      for (int k = layer; k <= num_layers_; ++k) duration_ += delta_up(k);
    }
    return prev_start;
  }

  // Inverse of absorb(layer) when it returned prev_start. Only valid as an
  // immediate rollback of the most recent absorb.
  void undo_absorb(int layer, int prev_start) {
    if (layer < prev_start) {
      for (int k = prev_start; k <= num_layers_; ++k) duration_ -= delta_down(k);
      const int upper = std::min(prev_start, num_layers_ + 1);
      for (int k = layer; k < upper; ++k) {
        auto& c = count_[static_cast<std::size_t>(k)];
        duration_ -= ps_->lookup(dnn_, k, c);
        --c;
      }
      start_layer_ = prev_start;
    } else {
      for (int k = layer; k <= num_layers_; ++k) duration_ -= delta_down(k);
    }
    recompute_max();
  }

  // Raises the batch count on layers [from, to]. Swept layers are charged the
  // marginal cost immediately; layers below the current start are recorded
  // and charged when the sweep extends down to them. Used to preload
  // shared-stage riders for a fixed segment end.
  void add_rider_counts(int from, int to) {
    for (int k = from; k <= to; ++k) {
      if (k >= start_layer_) {
        duration_ += delta_up(k);
      } else {
        ++count_[static_cast<std::size_t>(k)];
      }
    }
  }

 private:
  Ms delta_up(int k) {
    auto& c = count_[static_cast<std::size_t>(k)];
    const Ms before = c == 0 ? 0 : ps_->lookup(dnn_, k, c);
    ++c;
    max_count_ = std::max(max_count_, c);
    return ps_->lookup(dnn_, k, c) - before;
  }

  Ms delta_down(int k) {
    auto& c = count_[static_cast<std::size_t>(k)];
    const Ms before = ps_->lookup(dnn_, k, c);
    --c;
    return before - (c == 0 ? 0 : ps_->lookup(dnn_, k, c));
  }

  void recompute_max() {
    max_count_ = 0;
    for (int k = start_layer_; k <= num_layers_; ++k) {
      max_count_ = std::max(max_count_, count_[static_cast<std::size_t>(k)]);
    }
  }

  const ProfileSet* ps_;
  int dnn_;
  int bound_;
  int num_layers_;
  int start_layer_ = 0;
  Ms duration_ = 0;
  int max_count_ = 0;
  std::vector<int> count_;
};

struct SweepResult {
  Ms duration = kInfeasible;
  int max_layer_batch = 0;
  std::vector<int> layer_batch;  // batch size per layer from start_layer on
  int start_layer = 0;
  bool feasible = false;
};

// Direct (non-incremental) sweep over an explicit set of member layers.
// `layers` need not be sorted. Equation: duration = sum over swept layers k of
// h_k(#members with layer <= k).
inline SweepResult segment_duration(std::span<const int> layers, const ProfileSet& ps,
                                    int dnn, int batch_bound) {
  SweepResult res;
  if (layers.empty()) return res;
  const int n_layers = ps.dnns[static_cast<std::size_t>(dnn)].num_layers();
  int start = n_layers + 1;
  for (int l : layers) start = std::min(start, l);
  res.start_layer = start;
  res.layer_batch.assign(static_cast<std::size_t>(n_layers - start + 1), 0);
  res.duration = 0;
  res.max_layer_batch = 0;
  for (int k = start; k <= n_layers; ++k) {
    int b = 0;
    for (int l : layers) {
      if (l <= k) ++b;
    }
    res.layer_batch[static_cast<std::size_t>(k - start)] = b;
    res.max_layer_batch = std::max(res.max_layer_batch, b);
    if (b > batch_bound) {
      res.duration = kInfeasible;
      res.feasible = false;
      return res;
    }
    res.duration += ps.lookup(dnn, k, b);
  }
  res.feasible = res.duration < kInfeasible;
  return res;
}

}  // namespace batchsim
