#pragma once

// Core domain types shared by the schedulers and the simulator.
//
// Time is kept in double milliseconds throughout the library. Cost tables are
// typically integer-valued milliseconds, so durations and objectives computed
// from them stay exact (sums and integer multiples of integers are exact in
// IEEE doubles). File and CSV interfaces convert to/from seconds at the edge.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace batchsim {

using Ms = double;
using RequestId = std::int64_t;

inline constexpr Ms kInfeasible = std::numeric_limits<double>::infinity();
inline constexpr Ms kNoDeadline = std::numeric_limits<double>::infinity();

enum class RequestState { pending, running, completed, dropped };

// origin < 0 means the request came from the background trace; otherwise it
// is the index of the client that generated it.
inline constexpr int kRemoteOrigin = -1;

struct Request {
  RequestId id = 0;
  int dnn = 0;          // dense index into ProfileSet::dnns
  Ms arrival = 0;       // absolute, ms
  Ms deadline = kNoDeadline;  // absolute, ms
  int layer = 1;        // 1-based; num_layers + 1 == finished
  RequestState state = RequestState::pending;
  int origin = kRemoteOrigin;
};

// Arrival order with ties broken by id (lower id arrived "first").
inline bool arrives_before(const Request& a, const Request& b) {
  if (a.arrival != b.arrival) return a.arrival < b.arrival;
  return a.id < b.id;
}

inline void sort_by_arrival(std::vector<Request>& reqs) {
  std::sort(reqs.begin(), reqs.end(), arrives_before);
}

struct ValidationIssue {
  enum class Kind { fifo_violation, layer_out_of_range, duplicate_id, bad_deadline };
  Kind kind;
  RequestId request = 0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Checks the FIFO layer property (sorted by arrival, current layers must be
// non-increasing), layer ranges and id uniqueness. Report-only.
inline ValidationReport validate_request_set(std::span<const Request> requests,
                                             int num_layers) {
  ValidationReport report;
  std::vector<Request> sorted(requests.begin(), requests.end());
  sort_by_arrival(sorted);

  std::vector<RequestId> ids;
  ids.reserve(sorted.size());
  for (const Request& r : sorted) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (ids[i] == ids[i - 1]) {
      report.issues.push_back({ValidationIssue::Kind::duplicate_id, ids[i],
                               "duplicate request id"});
    }
  }

  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Request& r = sorted[i];
    if (r.layer < 1 || r.layer > num_layers + 1) {
      report.issues.push_back({ValidationIssue::Kind::layer_out_of_range, r.id,
                               "layer " + std::to_string(r.layer) + " outside [1, " +
                                   std::to_string(num_layers + 1) + "]"});
    }
    if (r.deadline <= r.arrival) {
      report.issues.push_back(
          {ValidationIssue::Kind::bad_deadline, r.id, "deadline not after arrival"});
    }
    if (i > 0 && sorted[i - 1].layer < r.layer) {
      report.issues.push_back(
          {ValidationIssue::Kind::fifo_violation, r.id,
           "arrives after request " + std::to_string(sorted[i - 1].id) +
               " but sits at a deeper layer"});
    }
  }
  return report;
}

enum class CompletionLocation { server, client_full, client_partial };

struct RequestOutcome {
  RequestId id = 0;
  int dnn = 0;
  Ms arrival = 0;       // generation time
  Ms completion = kInfeasible;  // absolute; infeasible when dropped
  Ms deadline = kNoDeadline;
  bool on_time = false;
  bool dropped = false;
  CompletionLocation location = CompletionLocation::server;
  int offload_groups = 0;  // groups run locally before offloading (partial mode)
  Ms network_delay = 0;
  Ms server_time = 0;
  Ms client_time = 0;
};

}  // namespace batchsim
