#pragma once

// Scheduling across multiple DNNs: per-DNN segment DPs concatenated in the
// best order found by enumerating model-wise permutations. Each DNN's DP is
// weighted by the number of requests scheduled after it, so the permutation
// total equals the sum of completion offsets over all requests.
//
// With shared components, a DNN's segments drag along earlier-arriving
// foreign requests resident at the swept shared layers; the riders are
// carried to the shared-stage boundary and deposited at their own DNN's next
// layer. Absorption can only tie or beat the plain schedule here because the
// plain schedule is always evaluated alongside and the better one is kept.

#include <algorithm>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "batchsim/cost_model.hpp"
#include "batchsim/dp_time.hpp"
#include "batchsim/model.hpp"
#include "batchsim/schedule.hpp"

namespace batchsim {

struct MultiOptions {
  DpOptions dp;
  int permutation_guard = 6;     // enumerate up to guard! orders
  bool allow_heuristic = false;  // above the guard: fixed earliest-arrival order
};

// (i) a step finished and new requests arrived since the last schedule, or
// (ii) a request crossed a shared/non-shared stage boundary.
inline bool reschedule_trigger(bool step_completed, bool arrivals_pending_since_last,
                               bool crossed_shared_boundary) {
  return (step_completed && arrivals_pending_since_last) || crossed_shared_boundary;
}

namespace detail {

struct DnnGroup {
  int dnn = 0;
  std::vector<Request> requests;  // arrival order
};

inline std::vector<DnnGroup> group_by_dnn(std::span<const Request> requests) {
  std::vector<Request> reqs = sorted_snapshot(requests);
  std::vector<DnnGroup> groups;
  for (const Request& r : reqs) {
    DnnGroup* g = nullptr;
    for (DnnGroup& existing : groups) {
      if (existing.dnn == r.dnn) {
        g = &existing;
        break;
      }
    }
    if (!g) {
      groups.push_back({r.dnn, {}});
      g = &groups.back();
    }
    g->requests.push_back(r);
  }
  return groups;  // ordered by each DNN's earliest pending arrival
}

// Riders eligible for a segment of `dnn` whose sweep starts at newest.layer:
// pending requests of other DNNs, arrived before the segment's newest member,
// resident at a swept layer of a component shared with `dnn`.
inline std::vector<Rider> collect_riders(const Request& newest, int dnn, const ProfileSet& ps,
                                         const std::vector<Request>& foreign_pending) {
  std::vector<Rider> riders;
  const DnnProfile& prof = ps.dnns[static_cast<std::size_t>(dnn)];
  for (const Request& f : foreign_pending) {
    if (f.dnn == dnn || !arrives_before(f, newest)) continue;
    const DnnProfile& fprof = ps.dnns[static_cast<std::size_t>(f.dnn)];
    if (f.layer > fprof.num_layers()) continue;
    const auto fpos = fprof.resolve(f.layer);
    if (ps.component_users(fpos.component) < 2) continue;
    for (std::size_t s = 0; s < prof.stages().size(); ++s) {
      const StageRef& stage = prof.stages()[s];
      if (stage.component != fpos.component) continue;
      const int join = stage.first_layer + fpos.offset - 1;
      if (join < newest.layer) continue;  // the sweep never passes the rider
      const int leave = (s + 1 < prof.stages().size())
                            ? prof.stages()[s + 1].first_layer - 1
                            : prof.num_layers();
      Rider rider;
      rider.id = f.id;
      rider.dnn = f.dnn;
      rider.join_layer = join;
      rider.leave_layer = leave;
      rider.deposit_layer = fprof.stage_end(f.layer) + 1;
      riders.push_back(rider);
      break;
    }
  }
  return riders;
}

inline Schedule schedule_multi_impl(std::span<const Request> requests, const ProfileSet& ps,
                                    int bound, const MultiOptions& opts, bool absorb) {
  Schedule best;
  std::vector<DnnGroup> groups = group_by_dnn(requests);
  const int m = static_cast<int>(groups.size());
  if (m == 0) return best;

  std::vector<int> order(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;

  const bool enumerate = m <= opts.permutation_guard;
  if (!enumerate && !opts.allow_heuristic) {
    throw std::runtime_error(
        "permutation search over " + std::to_string(m) +
        " DNNs exceeds the guard; enable the earliest-arrival heuristic order");
  }

  std::map<std::pair<int, int>, Schedule> plain_cache;  // (group idx, tail) -> schedule
  bool have_best = false;
  Ms best_total = kInfeasible;

  std::vector<int> perm = order;
  do {
    // Tail counts: requests scheduled after each slot.
    std::vector<int> tail(static_cast<std::size_t>(m), 0);
    {
      int acc = 0;
      for (int i = m - 1; i >= 0; --i) {
        tail[static_cast<std::size_t>(i)] = acc;
        acc += static_cast<int>(groups[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])].requests.size());
      }
    }

    Schedule combined;
    Ms elapsed = 0;
    bool feasible = true;
    // Live positions; riders advanced as slots execute.
    std::vector<DnnGroup> live = groups;

    for (int slot = 0; slot < m && feasible; ++slot) {
      const int gi = perm[static_cast<std::size_t>(slot)];
      DnnGroup& group = live[static_cast<std::size_t>(gi)];
      if (group.requests.empty()) continue;
      const int dnn = group.dnn;

      DpOptions dp_opts = opts.dp;
      dp_opts.extra_active = tail[static_cast<std::size_t>(slot)];

      std::vector<Request> foreign;
      if (absorb) {
        for (int later = slot + 1; later < m; ++later) {
          const DnnGroup& fg = live[static_cast<std::size_t>(perm[static_cast<std::size_t>(later)])];
          foreign.insert(foreign.end(), fg.requests.begin(), fg.requests.end());
        }
        sort_by_arrival(foreign);
      }

      Schedule slot_schedule;
      try {
        if (absorb && !foreign.empty()) {
          RiderProvider provider = [&](const Request& newest) {
            return collect_riders(newest, dnn, ps, foreign);
          };
          slot_schedule =
              compute_schedule_dp(group.requests, ps, dnn, bound, dp_opts, nullptr, provider);
        } else if (!absorb) {
          auto key = std::make_pair(gi, dp_opts.extra_active);
          auto it = plain_cache.find(key);
          if (it == plain_cache.end()) {
            it = plain_cache
                     .emplace(key, compute_schedule_dp(group.requests, ps, dnn, bound, dp_opts))
                     .first;
          }
          slot_schedule = it->second;
        } else {
          slot_schedule = compute_schedule_dp(group.requests, ps, dnn, bound, dp_opts);
        }
      } catch (const std::runtime_error&) {
        feasible = false;
        break;
      }

      // Re-cost each segment against live positions: rider sets computed
      // inside the DP assume slot-start positions, but earlier segments may
      // already have advanced a rider past the stage it was seen at.
      for (ScheduledSegment seg : slot_schedule.segments) {
        std::vector<int> member_layers;
        Request newest{};
        bool have_newest = false;
        for (RequestId id : seg.members) {
          for (const Request& r : group.requests) {
            if (r.id == id) {
              member_layers.push_back(r.layer);
              if (!have_newest || arrives_before(newest, r)) {
                newest = r;
                have_newest = true;
              }
            }
          }
        }
        if (absorb) {
          seg.riders = collect_riders(newest, dnn, ps, foreign);
        }
        SweepResult sweep = segment_duration(member_layers, ps, dnn, bound);
        Ms duration = sweep.duration;
        int max_batch = sweep.max_layer_batch;
        if (!seg.riders.empty()) {
          SegmentSweep rs(ps, dnn, bound);
          rs.reset();
          for (const Rider& r : seg.riders) rs.add_rider_counts(r.join_layer, r.leave_layer);
          for (int l : member_layers) rs.absorb(l);
          duration = rs.feasible() ? rs.duration() : kInfeasible;
          max_batch = rs.max_count();
        }
        if (duration >= kInfeasible) {
          feasible = false;
          break;
        }
        seg.duration = duration;
        seg.max_layer_batch = max_batch;
        elapsed += duration;
        seg.finish_offset = elapsed;
        for (RequestId id : seg.members) {
          combined.completion_offsets.emplace_back(id, elapsed);
          combined.objective += elapsed;
        }
        // Advance riders; one whose shared stage was its own DNN's last stage
        // completes right here.
        for (const Rider& rider : seg.riders) {
          for (int later = slot + 1; later < m; ++later) {
            DnnGroup& fg = live[static_cast<std::size_t>(perm[static_cast<std::size_t>(later)])];
            for (std::size_t i = 0; i < fg.requests.size(); ++i) {
              if (fg.requests[i].id != rider.id) continue;
              const int own_layers =
                  ps.dnns[static_cast<std::size_t>(rider.dnn)].num_layers();
              if (rider.deposit_layer > own_layers) {
                combined.completion_offsets.emplace_back(rider.id, elapsed);
                combined.objective += elapsed;
                fg.requests.erase(fg.requests.begin() + static_cast<std::ptrdiff_t>(i));
              } else {
                fg.requests[i].layer = rider.deposit_layer;
              }
              break;
            }
          }
          // Keep the foreign snapshot in sync for later segments of this slot.
          for (std::size_t i = 0; i < foreign.size(); ++i) {
            if (foreign[i].id != rider.id) continue;
            const int own_layers = ps.dnns[static_cast<std::size_t>(rider.dnn)].num_layers();
            if (rider.deposit_layer > own_layers) {
              foreign.erase(foreign.begin() + static_cast<std::ptrdiff_t>(i));
            } else {
              foreign[i].layer = rider.deposit_layer;
            }
            break;
          }
        }
        combined.segments.push_back(std::move(seg));
        if (!feasible) break;
      }
      group.requests.clear();
    }

    if (feasible) {
      combined.total_duration = elapsed;
      if (!have_best || combined.objective < best_total) {
        best = std::move(combined);
        best_total = best.objective;
        have_best = true;
      }
    }
  } while (enumerate && std::next_permutation(perm.begin(), perm.end()));

  if (!have_best) {
    throw std::runtime_error("no feasible multi-DNN schedule under the batch bound");
  }
  return best;
}

}  // namespace detail

// Requests across multiple DNNs without shared-layer batching.
inline Schedule schedule_multi(std::span<const Request> requests, const ProfileSet& ps,
                               int bound, const MultiOptions& opts = {}) {
  return detail::schedule_multi_impl(requests, ps, bound, opts, false);
}

// Requests across multiple DNNs, batching earlier-arriving foreign requests
// through shared stages when that lowers the objective.
inline Schedule schedule_multi_shared(std::span<const Request> requests, const ProfileSet& ps,
                                      int bound, const MultiOptions& opts = {}) {
  Schedule plain = detail::schedule_multi_impl(requests, ps, bound, opts, false);
  Schedule shared;
  try {
    shared = detail::schedule_multi_impl(requests, ps, bound, opts, true);
  } catch (const std::runtime_error&) {
    return plain;
  }
  return shared.objective < plain.objective ? shared : plain;
}

}  // namespace batchsim
