#pragma once

// Reference implementations: exhaustive searches kept deliberately
// independent of the production schedulers. Used by the oracle-check command
// and the test suites to validate the DPs on small instances.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "batchsim/cost_model.hpp"
#include "batchsim/model.hpp"
#include "batchsim/rng.hpp"

namespace batchsim {

struct BruteForceResult {
  Ms objective = kInfeasible;
  int tardy = -1;
  std::uint64_t segmentations_checked = 0;
};

namespace reference_detail {

// Duration of one segment by direct summation: sweep from the shallowest
// member layer to the end, batching members whose layer has been reached.
inline Ms direct_segment_duration(std::span<const int> layers, const ProfileSet& ps, int dnn,
                                  int bound) {
  const int num_layers = ps.dnns[static_cast<std::size_t>(dnn)].num_layers();
  int lo = num_layers + 1;
  for (int l : layers) lo = std::min(lo, l);
  Ms duration = 0;
  for (int k = lo; k <= num_layers; ++k) {
    int batch = 0;
    for (int l : layers) {
      if (l <= k) ++batch;
    }
    if (batch > bound) return kInfeasible;
    duration += ps.lookup(dnn, k, batch);
  }
  return duration;
}

}  // namespace reference_detail

// Minimum total completion over all 2^(n-1) contiguous FIFO segmentations.
inline BruteForceResult brute_force_min_completion(std::span<const Request> requests,
                                                   const ProfileSet& ps, int dnn, int bound) {
  std::vector<Request> reqs(requests.begin(), requests.end());
  sort_by_arrival(reqs);
  const int n = static_cast<int>(reqs.size());
  BruteForceResult out;
  if (n == 0) {
    out.objective = 0;
    return out;
  }
  const std::uint64_t masks = 1ULL << (n - 1);
  for (std::uint64_t mask = 0; mask < masks; ++mask) {
    ++out.segmentations_checked;
    Ms elapsed = 0;
    Ms total = 0;
    bool ok = true;
    int seg_start = 0;
    for (int i = 0; i < n && ok; ++i) {
      const bool split_after = (i == n - 1) || ((mask >> i) & 1ULL);
      if (!split_after) continue;
      std::vector<int> layers;
      for (int j = seg_start; j <= i; ++j) {
        layers.push_back(reqs[static_cast<std::size_t>(j)].layer);
      }
      const Ms d = reference_detail::direct_segment_duration(layers, ps, dnn, bound);
      if (d >= kInfeasible) {
        ok = false;
        break;
      }
      elapsed += d;
      total += static_cast<Ms>(i - seg_start + 1) * elapsed;
      seg_start = i + 1;
    }
    if (ok && total < out.objective) out.objective = total;
  }
  return out;
}

// Minimum tardy count over all contiguous FIFO segmentations; finish times
// are offset by `now`, and a job is tardy when it finishes strictly after its
// deadline.
inline BruteForceResult brute_force_min_tardy(std::span<const Request> requests,
                                              const ProfileSet& ps, int dnn, int bound,
                                              Ms now) {
  std::vector<Request> reqs(requests.begin(), requests.end());
  sort_by_arrival(reqs);
  const int n = static_cast<int>(reqs.size());
  BruteForceResult out;
  if (n == 0) {
    out.objective = 0;
    out.tardy = 0;
    return out;
  }
  const std::uint64_t masks = 1ULL << (n - 1);
  for (std::uint64_t mask = 0; mask < masks; ++mask) {
    ++out.segmentations_checked;
    Ms elapsed = 0;
    Ms total = 0;
    int tardy = 0;
    bool ok = true;
    int seg_start = 0;
    for (int i = 0; i < n && ok; ++i) {
      const bool split_after = (i == n - 1) || ((mask >> i) & 1ULL);
      if (!split_after) continue;
      std::vector<int> layers;
      for (int j = seg_start; j <= i; ++j) {
        layers.push_back(reqs[static_cast<std::size_t>(j)].layer);
      }
      const Ms d = reference_detail::direct_segment_duration(layers, ps, dnn, bound);
      if (d >= kInfeasible) {
        ok = false;
        break;
      }
      elapsed += d;
      for (int j = seg_start; j <= i; ++j) {
        total += elapsed;
        if (now + elapsed > reqs[static_cast<std::size_t>(j)].deadline) ++tardy;
      }
      seg_start = i + 1;
    }
    if (!ok) continue;
    if (out.tardy < 0 || tardy < out.tardy ||
        (tardy == out.tardy && total < out.objective)) {
      out.tardy = tardy;
      out.objective = total;
    }
  }
  return out;
}

// Minimum total completion over every FIFO-finishing layer-step interleaving,
// including ones that pause a stack of requests mid-way. An action picks an
// occupied layer and runs all requests waiting there through that layer
// (co-resident requests always batch; letting proper subsets run alone admits
// free-rider schedules outside the segment model). Requests must finish in
// arrival order, simultaneous finishes allowed. Value iteration over position
// vectors: every unfinished request accrues each action's duration.
inline Ms interleaving_min_completion(std::span<const Request> requests, const ProfileSet& ps,
                                      int dnn) {
  std::vector<Request> reqs(requests.begin(), requests.end());
  sort_by_arrival(reqs);
  const int n = static_cast<int>(reqs.size());
  const int num_layers = ps.dnns[static_cast<std::size_t>(dnn)].num_layers();
  std::map<std::vector<int>, Ms> memo;

  auto prefix_finished = [&](const std::vector<int>& pos) {
    bool unfinished_seen = false;
    for (int i = 0; i < n; ++i) {
      const bool done = pos[static_cast<std::size_t>(i)] > num_layers;
      if (done && unfinished_seen) return false;
      if (!done) unfinished_seen = true;
    }
    return true;
  };

  std::function<Ms(const std::vector<int>&)> solve = [&](const std::vector<int>& pos) -> Ms {
    int unfinished = 0;
    for (int p : pos) {
      if (p <= num_layers) ++unfinished;
    }
    if (unfinished == 0) return 0;
    auto it = memo.find(pos);
    if (it != memo.end()) return it->second;
    Ms best = kInfeasible;
    for (int k = 1; k <= num_layers; ++k) {
      std::vector<int> next = pos;
      int batch = 0;
      for (int i = 0; i < n; ++i) {
        if (pos[static_cast<std::size_t>(i)] == k) {
          ++next[static_cast<std::size_t>(i)];
          ++batch;
        }
      }
      if (batch == 0) continue;
      if (!prefix_finished(next)) continue;
      const Ms d = ps.lookup(dnn, k, batch);
      if (d >= kInfeasible) continue;
      const Ms rest = solve(next);
      if (rest >= kInfeasible) continue;
      const Ms cost = static_cast<Ms>(unfinished) * d + rest;
      best = std::min(best, cost);
    }
    memo.emplace(pos, best);
    return best;
  };

  std::vector<int> start(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) start[static_cast<std::size_t>(i)] = reqs[static_cast<std::size_t>(i)].layer;
  return solve(start);
}

// Joint minimum over DNN permutations and per-DNN segmentations: DNNs run
// back to back, each DNN's requests FIFO-segmented.
inline BruteForceResult brute_force_multi(std::span<const Request> requests,
                                          const ProfileSet& ps, int bound) {
  std::vector<Request> reqs(requests.begin(), requests.end());
  sort_by_arrival(reqs);
  std::vector<int> dnns;
  for (const Request& r : reqs) {
    if (std::find(dnns.begin(), dnns.end(), r.dnn) == dnns.end()) dnns.push_back(r.dnn);
  }
  std::sort(dnns.begin(), dnns.end());
  BruteForceResult out;

  std::vector<std::vector<Request>> by_dnn(dnns.size());
  for (const Request& r : reqs) {
    for (std::size_t d = 0; d < dnns.size(); ++d) {
      if (dnns[d] == r.dnn) by_dnn[d].push_back(r);
    }
  }

  std::vector<int> perm(dnns.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  do {
    // Mixed-radix enumeration of segmentations per DNN.
    std::vector<std::uint64_t> mask(dnns.size(), 0);
    std::vector<std::uint64_t> mask_count(dnns.size());
    for (std::size_t d = 0; d < dnns.size(); ++d) {
      mask_count[d] = 1ULL << (by_dnn[d].size() - 1);
    }
    while (true) {
      ++out.segmentations_checked;
      Ms elapsed = 0;
      Ms total = 0;
      bool ok = true;
      for (std::size_t slot = 0; slot < perm.size() && ok; ++slot) {
        const std::size_t d = static_cast<std::size_t>(perm[slot]);
        const std::vector<Request>& group = by_dnn[d];
        const int gn = static_cast<int>(group.size());
        int seg_start = 0;
        for (int i = 0; i < gn && ok; ++i) {
          const bool split_after = (i == gn - 1) || ((mask[d] >> i) & 1ULL);
          if (!split_after) continue;
          std::vector<int> layers;
          for (int j = seg_start; j <= i; ++j) {
            layers.push_back(group[static_cast<std::size_t>(j)].layer);
          }
          const Ms dur =
              reference_detail::direct_segment_duration(layers, ps, group[0].dnn, bound);
          if (dur >= kInfeasible) {
            ok = false;
            break;
          }
          elapsed += dur;
          total += static_cast<Ms>(i - seg_start + 1) * elapsed;
          seg_start = i + 1;
        }
      }
      if (ok && total < out.objective) out.objective = total;
      // Advance the mixed-radix counter.
      std::size_t d = 0;
      while (d < dnns.size()) {
        if (++mask[d] < mask_count[d]) break;
        mask[d] = 0;
        ++d;
      }
      if (d == dnns.size()) break;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

// ---- Random instance generation for the oracle suites ----

enum class TableStyle {
  arbitrary,       // unconstrained positive runtimes
  subadditive,     // concave in batch size, hence sub-additive
  strong_batching  // concave with small marginal batch cost
};

struct RandomInstance {
  ProfileSet profile;
  std::vector<Request> requests;
  int dnn = 0;
};

inline CostTable random_cost_table(SplitMix64& rng, int num_layers, int grid_max,
                                   TableStyle style) {
  CostTable table(num_layers, grid_max);
  for (int k = 1; k <= num_layers; ++k) {
    if (style == TableStyle::arbitrary) {
      for (int b = 1; b <= grid_max; ++b) {
        table.add_point(k, b, static_cast<Ms>(rng.uniform_int(1, 30)));
      }
    } else {
      int delta = rng.uniform_int(5, 25);
      Ms value = static_cast<Ms>(delta);
      table.add_point(k, 1, value);
      for (int b = 2; b <= grid_max; ++b) {
        const int cap = style == TableStyle::strong_batching && b == 2 ? delta / 2 : delta;
        delta = rng.uniform_int(0, cap);
        value += static_cast<Ms>(delta);
        table.add_point(k, b, value);
      }
    }
  }
  table.finalize();
  return table;
}

inline RandomInstance random_instance(SplitMix64& rng, int max_requests, int max_layers,
                                      TableStyle style, bool with_deadlines = false,
                                      Ms now = 0) {
  const int n = rng.uniform_int(1, max_requests);
  const int num_layers = rng.uniform_int(1, max_layers);
  RandomInstance inst;
  SharedComponent comp;
  comp.id = "c0";
  comp.cost = random_cost_table(rng, num_layers, std::max(n, 2), style);
  comp.output_bits.assign(static_cast<std::size_t>(num_layers), 100000);
  inst.profile.components.push_back(std::move(comp));
  inst.profile.dnns.emplace_back("d0", std::vector<StageRef>{{0, 1}}, num_layers);
  inst.profile.max_batch = std::max(n, 2);

  std::vector<int> layers(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) layers[static_cast<std::size_t>(i)] = rng.uniform_int(1, num_layers);
  std::sort(layers.begin(), layers.end(), std::greater<int>());
  for (int i = 0; i < n; ++i) {
    Request r;
    r.id = i + 1;
    r.dnn = 0;
    r.arrival = static_cast<Ms>(i);
    r.layer = layers[static_cast<std::size_t>(i)];
    if (with_deadlines) {
      r.deadline = now + static_cast<Ms>(rng.uniform_int(10, 120));
    }
    inst.requests.push_back(r);
  }
  return inst;
}

}  // namespace batchsim
