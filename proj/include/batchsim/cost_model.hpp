#pragma once

// Per-layer batch-runtime profiles: cost tables, shared components, DNN
// stage layouts, layer grouping.

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "batchsim/model.hpp"

namespace batchsim {

// Measured runtime grid for one component: h_k(b) in ms for layer k and batch
// size b. The grid need not be dense; unmeasured batch sizes are linearly
// interpolated between the two nearest measured points. h is not assumed
// monotone in b. Batch sizes above max_batch are infeasible.
class CostTable {
 public:
  CostTable() = default;
  CostTable(int num_layers, int max_batch)
      : max_batch_(max_batch), layers_(static_cast<std::size_t>(num_layers)) {}

  int num_layers() const { return static_cast<int>(layers_.size()); }
  int max_batch() const { return max_batch_; }

  void add_point(int layer, int batch, Ms runtime_ms) {
    auto& grid = layers_.at(static_cast<std::size_t>(layer - 1));
    grid.emplace_back(batch, runtime_ms);
  }

  void finalize() {
    for (auto& grid : layers_) {
      std::sort(grid.begin(), grid.end());
      for (std::size_t i = 1; i < grid.size(); ++i) {
        if (grid[i].first == grid[i - 1].first) {
          throw std::invalid_argument("duplicate batch size " +
                                      std::to_string(grid[i].first) + " in cost table");
        }
      }
    }
  }

  const std::vector<std::pair<int, Ms>>& grid(int layer) const {
    return layers_.at(static_cast<std::size_t>(layer - 1));
  }

  // h_k(b): exact on grid points, linear between (and beyond) the two nearest
  // measured batch sizes, infeasible above the batch bound.
  Ms lookup(int layer, int batch) const {
    if (batch > max_batch_) return kInfeasible;
    assert(batch >= 1);
    const auto& grid = layers_[static_cast<std::size_t>(layer - 1)];
    auto it = std::lower_bound(grid.begin(), grid.end(), batch,
                               [](const std::pair<int, Ms>& p, int b) { return p.first < b; });
    if (it != grid.end() && it->first == batch) return it->second;
    // Pick the two nearest measured points (extrapolates outside the grid).
    const std::pair<int, Ms>* lo;
    const std::pair<int, Ms>* hi;
    if (it == grid.begin()) {
      lo = &grid[0];
      hi = &grid[1];
    } else if (it == grid.end()) {
      lo = &grid[grid.size() - 2];
      hi = &grid[grid.size() - 1];
    } else {
      lo = &*(it - 1);
      hi = &*it;
    }
    const double t = static_cast<double>(batch - lo->first) /
                     static_cast<double>(hi->first - lo->first);
    return lo->second + (hi->second - lo->second) * t;
  }

 private:
  int max_batch_ = 1;
  std::vector<std::vector<std::pair<int, Ms>>> layers_;
};

struct SubadditivityViolation {
  int layer;
  int b1;
  int b2;
  Ms excess;  // h(b1+b2) - h(b1) - h(b2) > 0
};

// Enumerates measured (k, b1, b2) with h_k(b1+b2) > h_k(b1) + h_k(b2).
// Report-only; the schedulers run regardless.
inline std::vector<SubadditivityViolation> check_subadditivity(const CostTable& table) {
  std::vector<SubadditivityViolation> out;
  for (int k = 1; k <= table.num_layers(); ++k) {
    const auto& grid = table.grid(k);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (std::size_t j = i; j < grid.size(); ++j) {
        const int sum = grid[i].first + grid[j].first;
        if (sum > table.max_batch()) continue;
        const Ms combined = table.lookup(k, sum);
        // Only flag sums that are themselves measured points.
        auto it = std::lower_bound(grid.begin(), grid.end(), sum,
                                   [](const std::pair<int, Ms>& p, int b) { return p.first < b; });
        if (it == grid.end() || it->first != sum) continue;
        const Ms separate = grid[i].second + grid[j].second;
        if (combined > separate) {
          out.push_back({k, grid[i].first, grid[j].first, combined - separate});
        }
      }
    }
  }
  return out;
}

// A block of layers reusable by multiple DNNs (e.g. a shared optical-flow
// backbone). A DNN without sharing references one private component.
struct SharedComponent {
  std::string id;
  CostTable cost;
  std::vector<std::int64_t> output_bits;  // per layer, after the layer runs

  int num_layers() const { return cost.num_layers(); }
};

struct StageRef {
  int component = 0;    // index into ProfileSet::components
  int first_layer = 0;  // 1-based global layer index of the stage start
};

struct LayerGroup {
  int first = 0;
  int last = 0;
};

class ProfileSet;

// Stage layout of one DNN over shared components. Global layer indices are
// 1-based and run over the concatenated stages.
class DnnProfile {
 public:
  DnnProfile() = default;
  DnnProfile(std::string name, std::vector<StageRef> stages, int num_layers)
      : name_(std::move(name)), stages_(std::move(stages)), num_layers_(num_layers) {}

  const std::string& name() const { return name_; }
  int num_layers() const { return num_layers_; }
  const std::vector<StageRef>& stages() const { return stages_; }

  // Maps a global layer to (stage index, component, in-component offset).
  struct Resolved {
    int stage;
    int component;
    int offset;  // 1-based within the component
  };

  Resolved resolve(int layer) const {
    assert(layer >= 1 && layer <= num_layers_);
    int s = static_cast<int>(stages_.size()) - 1;
    while (s > 0 && stages_[static_cast<std::size_t>(s)].first_layer > layer) --s;
    const StageRef& ref = stages_[static_cast<std::size_t>(s)];
    return {s, ref.component, layer - ref.first_layer + 1};
  }

  int stage_of(int layer) const { return resolve(layer).stage; }

  // Last global layer of the stage containing `layer`.
  int stage_end(int layer) const {
    const int s = stage_of(layer);
    if (s + 1 < static_cast<int>(stages_.size())) {
      return stages_[static_cast<std::size_t>(s + 1)].first_layer - 1;
    }
    return num_layers_;
  }

 private:
  std::string name_;
  std::vector<StageRef> stages_;
  int num_layers_ = 0;
};

// A loaded profile file: components plus the DNNs stitched from them.
class ProfileSet {
 public:
  std::vector<SharedComponent> components;
  std::vector<DnnProfile> dnns;
  int max_batch = 1;

  int dnn_index(const std::string& name) const {
    for (std::size_t i = 0; i < dnns.size(); ++i) {
      if (dnns[i].name() == name) return static_cast<int>(i);
    }
    throw std::invalid_argument("unknown dnn '" + name + "'");
  }

  // h_k(b) for a global layer of a DNN.
  Ms lookup(int dnn, int layer, int batch) const {
    const auto r = dnns[static_cast<std::size_t>(dnn)].resolve(layer);
    return components[static_cast<std::size_t>(r.component)].cost.lookup(r.offset, batch);
  }

  Ms single_request_runtime(int dnn, int from_layer = 1) const {
    const DnnProfile& p = dnns[static_cast<std::size_t>(dnn)];
    Ms total = 0;
    for (int k = from_layer; k <= p.num_layers(); ++k) total += lookup(dnn, k, 1);
    return total;
  }

  std::int64_t output_bits(int dnn, int layer) const {
    const auto r = dnns[static_cast<std::size_t>(dnn)].resolve(layer);
    return components[static_cast<std::size_t>(r.component)]
        .output_bits[static_cast<std::size_t>(r.offset - 1)];
  }

  // True when the layer belongs to a component referenced by >1 DNN.
  bool layer_is_shared(int dnn, int layer) const {
    const auto r = dnns[static_cast<std::size_t>(dnn)].resolve(layer);
    return component_users(r.component) > 1;
  }

  int component_users(int component) const {
    int users = 0;
    for (const DnnProfile& d : dnns) {
      for (const StageRef& s : d.stages()) {
        if (s.component == component) {
          ++users;
          break;
        }
      }
    }
    return users;
  }
};

// Contiguous partition of [1..N] into G groups with roughly equal
// single-request runtime: greedy accumulation closes a group once it reaches
// total/G, keeping one layer available for each group still to be formed;
// the last group absorbs the remainder.
inline std::vector<LayerGroup> group_layers(const ProfileSet& ps, int dnn, int groups) {
  const int n = ps.dnns[static_cast<std::size_t>(dnn)].num_layers();
  if (groups < 1) throw std::invalid_argument("group count must be >= 1");
  if (groups > n) {
    throw std::invalid_argument("cannot split " + std::to_string(n) + " layers into " +
                                std::to_string(groups) + " groups");
  }
  Ms total = 0;
  for (int k = 1; k <= n; ++k) total += ps.lookup(dnn, k, 1);
  const Ms target = total / groups;

  std::vector<LayerGroup> out;
  int layer = 1;
  for (int g = 0; g < groups; ++g) {
    const int remaining_groups = groups - g - 1;
    LayerGroup group{layer, layer};
    Ms sum = ps.lookup(dnn, layer, 1);
    ++layer;
    if (g == groups - 1) {
      group.last = n;
      layer = n + 1;
    } else {
      while (sum < target && (n - layer + 1) > remaining_groups) {
        sum += ps.lookup(dnn, layer, 1);
        group.last = layer;
        ++layer;
      }
    }
    out.push_back(group);
  }
  return out;
}

// The group (0-based) containing a layer.
inline int group_of_layer(const std::vector<LayerGroup>& groups, int layer) {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (layer >= groups[g].first && layer <= groups[g].last) return static_cast<int>(g);
  }
  return static_cast<int>(groups.size());  // past the last layer
}

}  // namespace batchsim
