#pragma once

// Deadline-aware scheduling: batching EDF and the tardy-minimizing DP.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "batchsim/cost_model.hpp"
#include "batchsim/dp_time.hpp"
#include "batchsim/model.hpp"
#include "batchsim/schedule.hpp"

namespace batchsim {

// Removes requests whose deadline already passed (strictly before `now`; a
// request whose deadline equals the clock can still finish on time). Order is
// preserved in both partitions.
inline std::pair<std::vector<Request>, std::vector<Request>> drop_expired(
    std::span<const Request> requests, Ms now) {
  std::vector<Request> kept;
  std::vector<Request> dropped;
  for (const Request& r : requests) {
    if (r.deadline < now) {
      Request d = r;
      d.state = RequestState::dropped;
      dropped.push_back(d);
    } else {
      kept.push_back(r);
    }
  }
  return {std::move(kept), std::move(dropped)};
}

// Batching EDF: walk jobs in deadline order; each pass opens a batch with the
// first still-unscheduled job and then admits later jobs as long as every job
// in the forming batch still meets its own deadline under the predicted
// timeline (and the batch stays within the bound). Jobs that do not fit start
// later batches in subsequent passes. Batches may mix layers but not DNNs.
inline Schedule edf_batch(std::span<const Request> requests, const ProfileSet& ps, int bound,
                          Ms now) {
  std::vector<Request> reqs(requests.begin(), requests.end());
  std::sort(reqs.begin(), reqs.end(), [](const Request& a, const Request& b) {
    if (a.deadline != b.deadline) return a.deadline < b.deadline;
    return arrives_before(a, b);
  });

  Schedule out;
  std::vector<bool> scheduled(reqs.size(), false);
  std::size_t remaining = reqs.size();
  Ms elapsed = 0;
  while (remaining > 0) {
    std::size_t head = 0;
    while (scheduled[head]) ++head;
    const int dnn = reqs[head].dnn;
    SegmentSweep sweep(ps, dnn, bound);
    sweep.reset();
    std::vector<std::size_t> batch;
    std::vector<Ms> batch_deadlines;

    // The pass opener is admitted unconditionally; this guarantees progress
    // even for jobs that can no longer make their deadline (they run late and
    // the caller's drop policy deals with them).
    sweep.absorb(reqs[head].layer);
    batch.push_back(head);
    batch_deadlines.push_back(reqs[head].deadline);

    for (std::size_t i = head + 1; i < reqs.size(); ++i) {
      if (scheduled[i] || reqs[i].dnn != dnn) continue;
      if (static_cast<int>(batch.size()) >= bound) break;
      const int prev_start = sweep.absorb(reqs[i].layer);
      const Ms finish = now + elapsed + sweep.duration();
      bool ok = sweep.feasible() && finish <= reqs[i].deadline;
      for (std::size_t b = 0; ok && b < batch_deadlines.size(); ++b) {
        ok = finish <= batch_deadlines[b];
      }
      if (ok) {
        batch.push_back(i);
        batch_deadlines.push_back(reqs[i].deadline);
      } else {
        sweep.undo_absorb(reqs[i].layer, prev_start);
      }
    }

    ScheduledSegment seg;
    seg.dnn = dnn;
    seg.start_layer = sweep.start_layer();
    seg.duration = sweep.duration();
    seg.max_layer_batch = sweep.max_count();
    std::sort(batch.begin(), batch.end(), [&](std::size_t a, std::size_t b) {
      return arrives_before(reqs[a], reqs[b]);
    });
    elapsed += seg.duration;
    seg.finish_offset = elapsed;
    for (std::size_t i : batch) {
      scheduled[i] = true;
      --remaining;
      seg.members.push_back(reqs[i].id);
      out.completion_offsets.emplace_back(reqs[i].id, elapsed);
      out.objective += elapsed;
      if (now + elapsed > reqs[i].deadline) {
        ++out.tardy_count;
      }
    }
    out.segments.push_back(std::move(seg));
  }
  out.total_duration = elapsed;
  return out;
}

namespace detail {

struct TardyState {
  Ms elapsed = 0;
  Ms sum_completion = 0;
  int parent_split = 0;  // unit index s of the segment [s..e]
  int parent_tardy = 0;
  int parent_state = -1;
};

}  // namespace detail

// Segment DP minimizing the number of tardy jobs, tie-broken by the smallest
// total completion. The table keeps, per prefix and tardy count, the Pareto
// set over (elapsed, total completion): a longer prefix timeline can trade
// against a smaller completion sum, and future deadline checks need both.
// Jobs predicted to finish past their deadline are listed in drop_marks.
inline Schedule tardy_dp(std::span<const Request> requests, const ProfileSet& ps, int dnn,
                         int bound, Ms now, const DpOptions& opts = {}, Ms start_offset = 0) {
  std::vector<Request> reqs = detail::sorted_snapshot(requests);
  Schedule out;
  if (reqs.empty()) return out;
  const int n = static_cast<int>(reqs.size());
  std::vector<DpUnit> units =
      detail::build_units(reqs, ps, dnn, opts.granularity, opts.groups, bound);
  const int u = static_cast<int>(units.size());

  // durations[e][s]: segment spanning units s..e.
  std::vector<std::vector<Ms>> durations(static_cast<std::size_t>(u));
  SegmentSweep sweep(ps, dnn, bound);
  for (int e = 0; e < u; ++e) {
    auto& row = durations[static_cast<std::size_t>(e)];
    row.assign(static_cast<std::size_t>(e) + 1, kInfeasible);
    sweep.reset();
    for (int s = e; s >= 0; --s) {
      const DpUnit& unit = units[static_cast<std::size_t>(s)];
      for (int i = unit.last; i >= unit.first; --i) {
        sweep.absorb(reqs[static_cast<std::size_t>(i)].layer);
      }
      if (sweep.feasible()) row[static_cast<std::size_t>(s)] = sweep.duration();
    }
  }

  using Front = std::vector<std::vector<detail::TardyState>>;  // [tardy] -> states
  std::vector<Front> fronts(static_cast<std::size_t>(u) + 1);
  fronts[0].assign(1, {detail::TardyState{0, 0, 0, 0, -1}});

  std::vector<Ms> seg_deadlines;
  for (int e = 1; e <= u; ++e) {
    Front& front = fronts[static_cast<std::size_t>(e)];
    front.assign(static_cast<std::size_t>(n) + 1, {});
    seg_deadlines.clear();
    for (int s = e; s >= 1; --s) {
      // Extend the segment down by unit s; keep member deadlines sorted.
      const DpUnit& unit = units[static_cast<std::size_t>(s - 1)];
      for (int i = unit.first; i <= unit.last; ++i) {
        const Ms d = reqs[static_cast<std::size_t>(i)].deadline;
        seg_deadlines.insert(std::lower_bound(seg_deadlines.begin(), seg_deadlines.end(), d),
                             d);
      }
      const Ms dur = durations[static_cast<std::size_t>(e - 1)][static_cast<std::size_t>(s - 1)];
      if (dur >= kInfeasible) continue;
      const int members =
          units[static_cast<std::size_t>(e - 1)].last - unit.first + 1;
      const Front& prev = fronts[static_cast<std::size_t>(s - 1)];
      for (int t = 0; t < static_cast<int>(prev.size()); ++t) {
        for (int si = 0; si < static_cast<int>(prev[static_cast<std::size_t>(t)].size()); ++si) {
          const detail::TardyState& st = prev[static_cast<std::size_t>(t)][static_cast<std::size_t>(si)];
          const Ms elapsed = st.elapsed + dur;
          const Ms finish_abs = now + start_offset + elapsed;
          const int newly_tardy = static_cast<int>(
              std::lower_bound(seg_deadlines.begin(), seg_deadlines.end(), finish_abs) -
              seg_deadlines.begin());
          const int t2 = t + newly_tardy;
          detail::TardyState next{elapsed, st.sum_completion + members * elapsed, s, t, si};
          front[static_cast<std::size_t>(t2)].push_back(next);
        }
      }
    }
    // Pareto-prune each tardy bucket over (elapsed, sum_completion).
    for (auto& bucket : front) {
      if (bucket.size() <= 1) continue;
      std::sort(bucket.begin(), bucket.end(),
                [](const detail::TardyState& a, const detail::TardyState& b) {
                  if (a.elapsed != b.elapsed) return a.elapsed < b.elapsed;
                  if (a.sum_completion != b.sum_completion)
                    return a.sum_completion < b.sum_completion;
                  if (a.parent_split != b.parent_split) return a.parent_split < b.parent_split;
                  return a.parent_tardy < b.parent_tardy;
                });
      std::vector<detail::TardyState> kept;
      Ms best_sum = kInfeasible;
      for (const detail::TardyState& st : bucket) {
        if (st.sum_completion < best_sum) {
          kept.push_back(st);
          best_sum = st.sum_completion;
        }
      }
      bucket = std::move(kept);
    }
  }

  const Front& last = fronts[static_cast<std::size_t>(u)];
  int best_t = -1;
  int best_state = -1;
  for (int t = 0; t < static_cast<int>(last.size()) && best_t < 0; ++t) {
    Ms best_sum = kInfeasible;
    for (int si = 0; si < static_cast<int>(last[static_cast<std::size_t>(t)].size()); ++si) {
      const detail::TardyState& st = last[static_cast<std::size_t>(t)][static_cast<std::size_t>(si)];
      if (st.sum_completion < best_sum ||
          (st.sum_completion == best_sum && best_state >= 0 &&
           st.elapsed < last[static_cast<std::size_t>(t)][static_cast<std::size_t>(best_state)].elapsed)) {
        best_sum = st.sum_completion;
        best_state = si;
        best_t = t;
      }
    }
  }
  if (best_t < 0) {
    detail::throw_infeasible(reqs, ps, dnn, bound, units[static_cast<std::size_t>(u - 1)]);
  }

  // Backtrack: collect (split, e) spans newest-first.
  std::vector<std::pair<int, int>> spans;
  {
    int e = u;
    int t = best_t;
    int si = best_state;
    while (e >= 1) {
      const detail::TardyState& st = fronts[static_cast<std::size_t>(e)][static_cast<std::size_t>(t)][static_cast<std::size_t>(si)];
      spans.emplace_back(st.parent_split, e);
      e = st.parent_split - 1;
      t = st.parent_tardy;
      si = st.parent_state;
    }
  }
  std::reverse(spans.begin(), spans.end());

  Ms elapsed = 0;
  for (const auto& [s, e] : spans) {
    ScheduledSegment seg;
    seg.dnn = dnn;
    const int first_req = units[static_cast<std::size_t>(s - 1)].first;
    const int last_req = units[static_cast<std::size_t>(e - 1)].last;
    SegmentSweep emit(ps, dnn, bound);
    emit.reset();
    for (int i = last_req; i >= first_req; --i) {
      emit.absorb(reqs[static_cast<std::size_t>(i)].layer);
    }
    seg.duration = emit.duration();
    seg.start_layer = emit.start_layer();
    seg.max_layer_batch = emit.max_count();
    elapsed += seg.duration;
    seg.finish_offset = elapsed;
    const Ms finish_abs = now + start_offset + elapsed;
    for (int i = first_req; i <= last_req; ++i) {
      const Request& r = reqs[static_cast<std::size_t>(i)];
      seg.members.push_back(r.id);
      out.completion_offsets.emplace_back(r.id, elapsed);
      out.objective += elapsed;
      if (finish_abs > r.deadline) {
        ++out.tardy_count;
        out.drop_marks.push_back(r.id);
      }
    }
    out.segments.push_back(std::move(seg));
  }
  out.total_duration = elapsed;
  return out;
}

}  // namespace batchsim
