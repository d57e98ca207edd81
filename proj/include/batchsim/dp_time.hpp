#pragma once

// Segment dynamic program minimizing total completion time for one DNN.
//
// Requests are sorted by arrival (request 1 earliest); FIFO processing keeps
// current layers non-increasing along that order. A schedule is a contiguous
// segmentation; segments run earliest-first and each segment sweeps from its
// newest member's layer to the last layer. With
//   cost(i,j)     = active(j) * duration(j..i)
//   active(j)     = |R| + extra - j + 1
//   min_cost(i)   = min_j { min_cost(j-1) + cost(i,j) }
// the table minimizes the sum of completion offsets; `extra` counts requests
// scheduled after this DNN (multi-DNN tails) so that their waiting time is
// charged to this DNN's makespan.
//
// Split points can be restricted to layer or layer-group boundaries, which
// compresses the table from |R| request entries to one entry per occupied
// layer/group ("unit") and bounds the table size by N or G.

#include <chrono>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "batchsim/cost_model.hpp"
#include "batchsim/model.hpp"
#include "batchsim/schedule.hpp"

namespace batchsim {

enum class SplitGranularity { per_request, per_layer, per_group };

struct DpOptions {
  SplitGranularity granularity = SplitGranularity::per_request;
  int groups = 5;        // per_group only
  int extra_active = 0;  // requests scheduled after this DNN's schedule
};

// Supplies the foreign requests dragged along through shared stages when a
// segment ending at `newest` sweeps from newest.layer. join/leave layers are
// in the scheduled DNN's layer space.
using RiderProvider = std::function<std::vector<Rider>(const Request& newest)>;

struct DpUnit {
  int first = 0;  // request index range [first, last], 0-based, arrival order
  int last = 0;
  long long key = 0;
};

// Cached state for incremental re-scheduling. Rows of segment durations are
// reusable as long as the (id, layer) prefix they cover is unchanged; the
// min_cost entries additionally require an unchanged snapshot size, since the
// active() weights shift when requests enter or leave the window.
struct DpTable {
  std::vector<std::pair<RequestId, int>> snapshot;  // (id, layer), arrival order
  int dnn = -1;
  int bound = 0;
  int extra_active = 0;
  SplitGranularity granularity = SplitGranularity::per_request;
  int groups = 0;
  std::vector<DpUnit> units;
  std::vector<std::vector<Ms>> durations;  // durations[e][s], s <= e, unit index
  std::vector<std::vector<int>> max_batch;
  std::vector<std::vector<Rider>> riders;  // per end unit
  std::vector<Ms> min_cost;                // size units+1
  std::vector<int> choice;                 // best split unit for prefix e (1-based)
  Schedule schedule;
  bool valid = false;
};

namespace detail {

inline std::vector<Request> sorted_snapshot(std::span<const Request> requests) {
  std::vector<Request> reqs(requests.begin(), requests.end());
  sort_by_arrival(reqs);
  return reqs;
}

inline std::vector<DpUnit> build_units(const std::vector<Request>& reqs,
                                       const ProfileSet& ps, int dnn,
                                       SplitGranularity granularity, int groups, int bound) {
  std::vector<DpUnit> units;
  if (reqs.empty()) return units;
  const int n = static_cast<int>(reqs.size());
  if (granularity == SplitGranularity::per_request) {
    units.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) units.push_back({i, i, i});
    return units;
  }
  std::vector<LayerGroup> layer_groups;
  if (granularity == SplitGranularity::per_group) {
    const int num_layers = ps.dnns[static_cast<std::size_t>(dnn)].num_layers();
    layer_groups = group_layers(ps, dnn, std::min(groups, num_layers));
  }
  auto key_of = [&](const Request& r) -> long long {
    if (granularity == SplitGranularity::per_layer) return r.layer;
    return group_of_layer(layer_groups, r.layer);
  };
  std::vector<DpUnit> raw;
  DpUnit current{0, 0, key_of(reqs[0])};
  for (int i = 1; i < n; ++i) {
    const long long key = key_of(reqs[static_cast<std::size_t>(i)]);
    if (key == current.key) {
      current.last = i;
    } else {
      raw.push_back(current);
      current = {i, i, key};
    }
  }
  raw.push_back(current);
  // A unit larger than the batch bound could never be scheduled whole; chop
  // it into bound-sized runs so a feasible segmentation always exists.
  for (const DpUnit& unit : raw) {
    int first = unit.first;
    while (unit.last - first + 1 > bound) {
      units.push_back({first, first + bound - 1, unit.key});
      first += bound;
    }
    units.push_back({first, unit.last, unit.key});
  }
  return units;
}

inline void throw_infeasible(const std::vector<Request>& reqs, const ProfileSet& ps,
                             int dnn, int bound, const DpUnit& unit) {
  // Identify a layer where even the smallest split exceeds the bound.
  SegmentSweep sweep(ps, dnn, bound);
  sweep.reset();
  for (int i = unit.last; i >= unit.first; --i) {
    sweep.absorb(reqs[static_cast<std::size_t>(i)].layer);
  }
  const int n_layers = ps.dnns[static_cast<std::size_t>(dnn)].num_layers();
  int bad_layer = sweep.start_layer();
  for (int k = sweep.start_layer(); k <= n_layers; ++k) {
    if (sweep.count_at(k) > bound) {
      bad_layer = k;
      break;
    }
  }
  throw std::runtime_error("no feasible segmentation: more than " + std::to_string(bound) +
                           " requests stacked at layer " + std::to_string(bad_layer));
}

}  // namespace detail

// Computes the optimal segmentation for one DNN's requests. `table`, when
// given, is filled for later incremental updates; if it already holds state
// for the same configuration, unchanged prefix entries are reused.
inline Schedule compute_schedule_dp(std::span<const Request> requests, const ProfileSet& ps,
                                    int dnn, int bound, const DpOptions& opts = {},
                                    DpTable* table = nullptr,
                                    const RiderProvider& riders = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Request> reqs = detail::sorted_snapshot(requests);
  Schedule out;
  if (reqs.empty()) {
    if (table) *table = DpTable{};
    return out;
  }
  const int n = static_cast<int>(reqs.size());

  std::vector<DpUnit> units =
      detail::build_units(reqs, ps, dnn, opts.granularity, opts.groups, bound);
  const int u = static_cast<int>(units.size());

  // Reusable prefix from a previous run: units whose request (id, layer)
  // ranges are unchanged keep their duration rows; min_cost entries are kept
  // only when the snapshot size and tail weights are unchanged as well.
  int stable_units = 0;
  bool reuse_values = false;
  if (table && table->valid && table->dnn == dnn && table->bound == bound &&
      table->granularity == opts.granularity && table->groups == opts.groups &&
      riders == nullptr) {
    int lcp = 0;
    const int common = std::min(n, static_cast<int>(table->snapshot.size()));
    while (lcp < common) {
      const auto& old = table->snapshot[static_cast<std::size_t>(lcp)];
      const Request& now = reqs[static_cast<std::size_t>(lcp)];
      if (old.first != now.id || old.second != now.layer) break;
      ++lcp;
    }
    const int old_units = static_cast<int>(table->units.size());
    while (stable_units < std::min(u, old_units)) {
      const DpUnit& a = units[static_cast<std::size_t>(stable_units)];
      const DpUnit& b = table->units[static_cast<std::size_t>(stable_units)];
      if (a.first != b.first || a.last != b.last || a.key != b.key || a.last >= lcp) break;
      ++stable_units;
    }
    reuse_values = (n == static_cast<int>(table->snapshot.size()) &&
                    table->extra_active == opts.extra_active);
  }

  std::vector<std::vector<Ms>> durations(static_cast<std::size_t>(u));
  std::vector<std::vector<int>> max_batches(static_cast<std::size_t>(u));
  std::vector<std::vector<Rider>> rider_sets(static_cast<std::size_t>(u));
  SegmentSweep sweep(ps, dnn, bound);
  for (int e = 0; e < u; ++e) {
    if (e < stable_units) {
      durations[static_cast<std::size_t>(e)] = table->durations[static_cast<std::size_t>(e)];
      max_batches[static_cast<std::size_t>(e)] = table->max_batch[static_cast<std::size_t>(e)];
      continue;
    }
    auto& row = durations[static_cast<std::size_t>(e)];
    auto& brow = max_batches[static_cast<std::size_t>(e)];
    row.assign(static_cast<std::size_t>(e) + 1, kInfeasible);
    brow.assign(static_cast<std::size_t>(e) + 1, 0);
    sweep.reset();
    const Request& newest = reqs[static_cast<std::size_t>(units[static_cast<std::size_t>(e)].last)];
    if (riders) {
      rider_sets[static_cast<std::size_t>(e)] = riders(newest);
      for (const Rider& r : rider_sets[static_cast<std::size_t>(e)]) {
        sweep.add_rider_counts(r.join_layer, r.leave_layer);
      }
    }
    for (int s = e; s >= 0; --s) {
      const DpUnit& unit = units[static_cast<std::size_t>(s)];
      for (int i = unit.last; i >= unit.first; --i) {
        sweep.absorb(reqs[static_cast<std::size_t>(i)].layer);
      }
      if (sweep.feasible()) {
        row[static_cast<std::size_t>(s)] = sweep.duration();
        brow[static_cast<std::size_t>(s)] = sweep.max_count();
      }
    }
  }

  std::vector<Ms> min_cost(static_cast<std::size_t>(u) + 1, kInfeasible);
  std::vector<int> choice(static_cast<std::size_t>(u) + 1, 0);
  min_cost[0] = 0;
  int first_value = 1;
  if (reuse_values) {
    for (int e = 1; e <= stable_units; ++e) {
      min_cost[static_cast<std::size_t>(e)] = table->min_cost[static_cast<std::size_t>(e)];
      choice[static_cast<std::size_t>(e)] = table->choice[static_cast<std::size_t>(e)];
    }
    first_value = stable_units + 1;
  }
  for (int e = first_value; e <= u; ++e) {
    Ms best = kInfeasible;
    int best_s = 0;
    for (int s = 1; s <= e; ++s) {
      const Ms prev = min_cost[static_cast<std::size_t>(s - 1)];
      const Ms dur = durations[static_cast<std::size_t>(e - 1)][static_cast<std::size_t>(s - 1)];
      if (prev >= kInfeasible || dur >= kInfeasible) continue;
      const int first_req = units[static_cast<std::size_t>(s - 1)].first;  // 0-based
      const Ms active = static_cast<Ms>(n + opts.extra_active - first_req);
      const Ms cost = prev + active * dur;
      if (cost < best) {
        best = cost;
        best_s = s;
      }
    }
    if (best_s == 0) {
      detail::throw_infeasible(reqs, ps, dnn, bound, units[static_cast<std::size_t>(e - 1)]);
    }
    min_cost[static_cast<std::size_t>(e)] = best;
    choice[static_cast<std::size_t>(e)] = best_s;
  }

  // Backtrack the split points, then emit segments earliest-first.
  std::vector<std::pair<int, int>> spans;  // unit ranges [s, e]
  for (int e = u; e >= 1; e = choice[static_cast<std::size_t>(e)] - 1) {
    spans.emplace_back(choice[static_cast<std::size_t>(e)], e);
  }
  std::reverse(spans.begin(), spans.end());

  Ms elapsed = 0;
  for (const auto& [s, e] : spans) {
    ScheduledSegment seg;
    seg.dnn = dnn;
    const int first_req = units[static_cast<std::size_t>(s - 1)].first;
    const int last_req = units[static_cast<std::size_t>(e - 1)].last;
    for (int i = first_req; i <= last_req; ++i) {
      seg.members.push_back(reqs[static_cast<std::size_t>(i)].id);
    }
    seg.start_layer = reqs[static_cast<std::size_t>(last_req)].layer;
    seg.duration = durations[static_cast<std::size_t>(e - 1)][static_cast<std::size_t>(s - 1)];
    seg.max_layer_batch =
        max_batches[static_cast<std::size_t>(e - 1)][static_cast<std::size_t>(s - 1)];
    seg.riders = rider_sets[static_cast<std::size_t>(e - 1)];
    elapsed += seg.duration;
    seg.finish_offset = elapsed;
    for (int i = first_req; i <= last_req; ++i) {
      out.completion_offsets.emplace_back(reqs[static_cast<std::size_t>(i)].id, elapsed);
      out.objective += elapsed;
    }
    out.segments.push_back(std::move(seg));
  }
  out.total_duration = elapsed;

  if (table) {
    table->snapshot.clear();
    table->snapshot.reserve(static_cast<std::size_t>(n));
    for (const Request& r : reqs) table->snapshot.emplace_back(r.id, r.layer);
    table->dnn = dnn;
    table->bound = bound;
    table->extra_active = opts.extra_active;
    table->granularity = opts.granularity;
    table->groups = opts.groups;
    table->units = std::move(units);
    table->durations = std::move(durations);
    table->max_batch = std::move(max_batches);
    table->riders = std::move(rider_sets);
    table->min_cost = std::move(min_cost);
    table->choice = std::move(choice);
    table->schedule = out;
    table->valid = true;
  }
  out.solve_wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline Schedule compute_schedule(std::span<const Request> requests, const ProfileSet& ps,
                                 int dnn, int bound, DpTable* table = nullptr) {
  return compute_schedule_dp(requests, ps, dnn, bound,
                             {SplitGranularity::per_request, 0, 0}, table);
}

inline Schedule compute_schedule_layer_units(std::span<const Request> requests,
                                             const ProfileSet& ps, int dnn, int bound,
                                             DpTable* table = nullptr) {
  return compute_schedule_dp(requests, ps, dnn, bound,
                             {SplitGranularity::per_layer, 0, 0}, table);
}

inline Schedule compute_schedule_grouped(std::span<const Request> requests,
                                         const ProfileSet& ps, int dnn, int bound, int groups,
                                         DpTable* table = nullptr) {
  return compute_schedule_dp(requests, ps, dnn, bound,
                             {SplitGranularity::per_group, groups, 0}, table);
}

// Re-schedules after layer completions / new arrivals, reusing table entries
// whose requests are unchanged. The result is identical to a from-scratch
// computation on the same snapshot.
inline Schedule incremental_update(DpTable& table, std::span<const Request> requests,
                                   const ProfileSet& ps, int dnn, int bound) {
  DpOptions opts{table.valid ? table.granularity : SplitGranularity::per_request,
                 table.valid ? table.groups : 0, table.valid ? table.extra_active : 0};
  // Unchanged snapshot: return the cached schedule outright.
  if (table.valid && static_cast<int>(table.snapshot.size()) ==
                         static_cast<int>(requests.size())) {
    std::vector<Request> reqs = detail::sorted_snapshot(requests);
    bool same = table.dnn == dnn && table.bound == bound;
    for (std::size_t i = 0; same && i < reqs.size(); ++i) {
      same = table.snapshot[i].first == reqs[i].id && table.snapshot[i].second == reqs[i].layer;
    }
    if (same) return table.schedule;
  }
  return compute_schedule_dp(requests, ps, dnn, bound, opts, &table);
}

// FIFO one-by-one baseline: every segment a singleton.
inline Schedule baseline_no_batch(std::span<const Request> requests, const ProfileSet& ps) {
  std::vector<Request> reqs = detail::sorted_snapshot(requests);
  Schedule out;
  Ms elapsed = 0;
  for (const Request& r : reqs) {
    ScheduledSegment seg;
    seg.dnn = r.dnn;
    seg.members.push_back(r.id);
    seg.start_layer = r.layer;
    seg.duration = ps.single_request_runtime(r.dnn, r.layer);
    seg.max_layer_batch = 1;
    elapsed += seg.duration;
    seg.finish_offset = elapsed;
    out.completion_offsets.emplace_back(r.id, elapsed);
    out.objective += elapsed;
    out.segments.push_back(std::move(seg));
  }
  out.total_duration = elapsed;
  return out;
}

// Greedy-fill baseline: batches the earliest up-to-B requests of the head
// request's DNN, repeated until exhaustion.
inline Schedule baseline_batch(std::span<const Request> requests, const ProfileSet& ps,
                               int bound) {
  std::vector<Request> reqs = detail::sorted_snapshot(requests);
  Schedule out;
  std::vector<bool> taken(reqs.size(), false);
  std::size_t head = 0;
  Ms elapsed = 0;
  while (head < reqs.size()) {
    const int dnn = reqs[head].dnn;
    ScheduledSegment seg;
    seg.dnn = dnn;
    std::vector<int> layers;
    for (std::size_t i = head; i < reqs.size() && static_cast<int>(layers.size()) < bound;
         ++i) {
      if (taken[i] || reqs[i].dnn != dnn) continue;
      taken[i] = true;
      seg.members.push_back(reqs[i].id);
      layers.push_back(reqs[i].layer);
    }
    const SweepResult sweep = segment_duration(layers, ps, dnn, bound);
    seg.start_layer = sweep.start_layer;
    seg.duration = sweep.duration;
    seg.max_layer_batch = sweep.max_layer_batch;
    elapsed += seg.duration;
    seg.finish_offset = elapsed;
    for (RequestId id : seg.members) {
      out.completion_offsets.emplace_back(id, elapsed);
      out.objective += elapsed;
    }
    out.segments.push_back(std::move(seg));
    while (head < reqs.size() && taken[head]) ++head;
  }
  out.total_duration = elapsed;
  return out;
}

}  // namespace batchsim
