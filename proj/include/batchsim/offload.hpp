#pragma once

// Client-side collaborative execution: EWMA network estimation, the binary
// run-local-or-offload decision, and partial offloading (run the first k
// layer groups locally, ship the intermediate output, let the server finish).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "batchsim/model.hpp"

namespace batchsim {

// EWMA throughput estimate with weight 0.3 on each new sample; the first
// sample initializes the estimate directly.
class NetworkEstimator {
 public:
  static constexpr double kNewSampleWeight = 0.3;

  bool primed() const { return primed_; }
  double bits_per_ms() const { return estimate_; }

  void update(double sample_bits_per_ms) {
    if (sample_bits_per_ms <= 0) return;
    if (!primed_) {
      estimate_ = sample_bits_per_ms;
      primed_ = true;
    } else {
      estimate_ = kNewSampleWeight * sample_bits_per_ms + (1.0 - kNewSampleWeight) * estimate_;
    }
  }

  void prime(double bits_per_ms) {
    if (!primed_ && bits_per_ms > 0) {
      estimate_ = bits_per_ms;
      primed_ = true;
    }
  }

  Ms estimate_delay(std::int64_t bits) const {
    if (bits <= 0) return 0;
    if (!primed_) return 0;
    return static_cast<double>(bits) / estimate_;
  }

 private:
  double estimate_ = 0;
  bool primed_ = false;
};

inline double ewma_update(double estimate, double sample) {
  return NetworkEstimator::kNewSampleWeight * sample +
         (1.0 - NetworkEstimator::kNewSampleWeight) * estimate;
}

// Per-DNN local execution costs on one client device.
struct ClientDnnProfile {
  std::string dnn;
  std::vector<Ms> group_runtime_ms;            // per layer group, front to back
  std::vector<std::int64_t> group_output_bits; // payload after each group (optional)

  Ms full_runtime() const {
    Ms total = 0;
    for (Ms g : group_runtime_ms) total += g;
    return total;
  }

  Ms prefix_runtime(int groups) const {
    Ms total = 0;
    for (int g = 0; g < groups; ++g) total += group_runtime_ms[static_cast<std::size_t>(g)];
    return total;
  }

  int group_count() const { return static_cast<int>(group_runtime_ms.size()); }
};

struct ClientProfile {
  Ms compress_ms = 1.5;    // H.264 intermediate compression at the client
  Ms decompress_ms = 0.6;  // decompression at the server
  std::vector<ClientDnnProfile> dnns;

  const ClientDnnProfile& for_dnn(const std::string& name) const {
    for (const auto& d : dnns) {
      if (d.dnn == name) return d;
    }
    throw std::invalid_argument("client profile has no entry for dnn '" + name + "'");
  }

  bool has_dnn(const std::string& name) const {
    for (const auto& d : dnns) {
      if (d.dnn == name) return true;
    }
    return false;
  }
};

enum class OffloadDecision { local, offload };

// Run locally when that meets the deadline; otherwise take the faster of the
// two estimates, preferring offload on a tie.
inline OffloadDecision decide_binary(Ms local_estimate, Ms transmission_estimate,
                                     Ms server_estimate, Ms deadline_remaining) {
  if (local_estimate <= deadline_remaining) return OffloadDecision::local;
  const Ms remote = transmission_estimate + server_estimate;
  return local_estimate < remote ? OffloadDecision::local : OffloadDecision::offload;
}

enum class PartialRule {
  min_completion,  // argmin over k of the estimated completion
  first_hide_wait  // smallest k whose local prefix covers the server wait
};

struct PartialDecision {
  int groups_local = 0;
  Ms estimate = kInfeasible;
};

// Chooses how many layer groups to run locally before shipping the
// intermediate output. All vectors are indexed by k in [0, G] and hold delays
// measured from now:
//   client_ready[k]  local backlog + first k groups of local compute
//   server_wait[k]   time until the server can start the request
//   server_rest[k]   server time for the remaining layers after k groups
//   payload_delay[k] compress + transmission + decompress for the k-boundary
//                    payload (k = 0 ships the raw image with no recoding)
// k = 0 is an immediate full offload; k = G runs fully local.
inline PartialDecision decide_partial(const std::vector<Ms>& client_ready,
                                      const std::vector<Ms>& server_wait,
                                      const std::vector<Ms>& server_rest,
                                      const std::vector<Ms>& payload_delay,
                                      PartialRule rule = PartialRule::min_completion) {
  const int groups = static_cast<int>(client_ready.size()) - 1;
  PartialDecision best;
  for (int k = 0; k <= groups; ++k) {
    const std::size_t i = static_cast<std::size_t>(k);
    Ms estimate;
    if (k == groups) {
      estimate = client_ready[i];  // fully local
    } else {
      const Ms arrival = client_ready[i] + payload_delay[i];
      estimate = std::max(arrival, server_wait[i]) + server_rest[i];
    }
    if (rule == PartialRule::min_completion) {
      if (estimate < best.estimate) {
        best.estimate = estimate;
        best.groups_local = k;
      }
    } else {
      best.estimate = estimate;
      best.groups_local = k;
      if (client_ready[i] >= server_wait[i]) break;
    }
  }
  return best;
}

// Client profile schema:
// {"compress_ms": 1.5, "decompress_ms": 0.6,
//  "dnns": [{"id": "vgg16", "group_runtime_ms": [46,46,46,46,46],
//            "group_output_bits": [2000000, 1200000, 600000, 300000, 0]}]}
inline ClientProfile parse_client_profile(const nlohmann::json& doc, const std::string& origin) {
  ClientProfile cp;
  cp.compress_ms = doc.value("compress_ms", 1.5);
  cp.decompress_ms = doc.value("decompress_ms", 0.6);
  for (const auto& dnn : doc.at("dnns")) {
    ClientDnnProfile d;
    d.dnn = dnn.at("id").get<std::string>();
    for (const auto& g : dnn.at("group_runtime_ms")) d.group_runtime_ms.push_back(g.get<double>());
    if (dnn.contains("group_output_bits")) {
      for (const auto& g : dnn.at("group_output_bits")) {
        d.group_output_bits.push_back(g.get<std::int64_t>());
      }
      if (d.group_output_bits.size() != d.group_runtime_ms.size()) {
        throw std::runtime_error(origin + ": dnn " + d.dnn +
                                 ": group_output_bits must match group_runtime_ms in length");
      }
    }
    if (d.group_runtime_ms.empty()) {
      throw std::runtime_error(origin + ": dnn " + d.dnn + " has no layer groups");
    }
    cp.dnns.push_back(std::move(d));
  }
  return cp;
}

inline ClientProfile load_client_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open client profile: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": client profile parse error: " + e.what());
  }
  return parse_client_profile(doc, path);
}

}  // namespace batchsim
