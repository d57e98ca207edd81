#pragma once

// Deterministic discrete-event simulation of one edge server (plus optional
// clients) executing batched layer steps under a pluggable scheduler.
//
// The server runs one (batch, step) at a time; a step spans one layer or one
// layer group, matching the scheduler's split granularity. Re-scheduling
// happens only at step boundaries: when a step finishes and new requests
// arrived since the last schedule, when a request crosses a shared/non-shared
// stage boundary, or when the current plan is exhausted. Events at one
// timestamp are all applied before the server picks its next step, so
// simultaneous arrivals are scheduled together.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "batchsim/cost_model.hpp"
#include "batchsim/deadline.hpp"
#include "batchsim/dp_time.hpp"
#include "batchsim/model.hpp"
#include "batchsim/multi_dnn.hpp"
#include "batchsim/network.hpp"
#include "batchsim/offload.hpp"
#include "batchsim/workload.hpp"

namespace batchsim {

enum class SchedulerKind { ours_time, ours_tardy, edf, batch, no_batch };

inline SchedulerKind parse_scheduler(const std::string& name) {
  if (name == "ours-time") return SchedulerKind::ours_time;
  if (name == "ours-tardy") return SchedulerKind::ours_tardy;
  if (name == "edf") return SchedulerKind::edf;
  if (name == "batch") return SchedulerKind::batch;
  if (name == "no-batch") return SchedulerKind::no_batch;
  throw std::invalid_argument("unknown scheduler '" + name +
                              "' (expected ours-time, ours-tardy, edf, batch, no-batch)");
}

inline const char* scheduler_name(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::ours_time: return "ours-time";
    case SchedulerKind::ours_tardy: return "ours-tardy";
    case SchedulerKind::edf: return "edf";
    case SchedulerKind::batch: return "batch";
    default: return "no-batch";
  }
}

enum class OffloadMode { none, binary, partial };

inline OffloadMode parse_offload(const std::string& name) {
  if (name == "none") return OffloadMode::none;
  if (name == "binary") return OffloadMode::binary;
  if (name == "partial") return OffloadMode::partial;
  throw std::invalid_argument("unknown offload mode '" + name + "'");
}

struct SimConfig {
  SchedulerKind scheduler = SchedulerKind::ours_time;
  SplitGranularity granularity = SplitGranularity::per_group;
  int groups = 5;
  int max_batch = 90;
  int window_cap = 500;  // schedule at most this many pending requests per round
  Ms scheduler_latency = 0;  // charged before a fresh plan may start
  Ms step_overhead = 0;      // batch formation / memory copy per executed step
  OffloadMode offload = OffloadMode::none;
  PartialRule partial_rule = PartialRule::min_completion;
  int clients = 0;
  bool shared_batching = true;
};

struct SummaryMetrics {
  int generated = 0;
  int completed = 0;
  int dropped = 0;
  int on_time = 0;
  double on_time_ratio = 0;
  Ms mean_completion = 0;    // completion - generation, completed requests
  Ms median_completion = 0;
  Ms p95_completion = 0;
  int at_server = 0;
  int at_client_full = 0;
  int at_client_partial = 0;
  Ms mean_network_delay = 0;
  double mean_solve_wall_ms = 0;
  int schedules_computed = 0;
};

// On-time ratio counts dropped requests in the denominator; completion
// percentiles are nearest-rank over completed requests.
inline SummaryMetrics summarize(const std::vector<RequestOutcome>& outcomes) {
  SummaryMetrics m;
  m.generated = static_cast<int>(outcomes.size());
  std::vector<Ms> latencies;
  for (const RequestOutcome& o : outcomes) {
    if (o.dropped) {
      ++m.dropped;
    } else {
      ++m.completed;
      latencies.push_back(o.completion - o.arrival);
      m.mean_network_delay += o.network_delay;
      switch (o.location) {
        case CompletionLocation::server: ++m.at_server; break;
        case CompletionLocation::client_full: ++m.at_client_full; break;
        case CompletionLocation::client_partial: ++m.at_client_partial; break;
      }
    }
    if (o.on_time) ++m.on_time;
  }
  if (m.generated > 0) m.on_time_ratio = static_cast<double>(m.on_time) / m.generated;
  if (!latencies.empty()) {
    std::sort(latencies.begin(), latencies.end());
    Ms sum = 0;
    for (Ms v : latencies) sum += v;
    m.mean_completion = sum / static_cast<double>(latencies.size());
    m.median_completion = latencies[(latencies.size() - 1) / 2];
    const std::size_t rank =
        static_cast<std::size_t>(std::max<std::ptrdiff_t>(
            0, static_cast<std::ptrdiff_t>(
                   (latencies.size() * 95 + 99) / 100) - 1));
    m.p95_completion = latencies[std::min(rank, latencies.size() - 1)];
    m.mean_network_delay /= static_cast<double>(latencies.size());
  }
  return m;
}

struct SimResult {
  std::vector<RequestOutcome> outcomes;  // generation order
  SummaryMetrics metrics;
};

namespace detail {

enum class EvKind : int {
  step_complete = 0,
  client_complete = 1,
  transmission_complete = 2,
  request_arrival = 3,
};

struct Ev {
  Ms time = 0;
  EvKind kind = EvKind::request_arrival;
  RequestId id = 0;
  std::uint64_t seq = 0;
};

struct EvLater {
  bool operator()(const Ev& a, const Ev& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return static_cast<int>(a.kind) > static_cast<int>(b.kind);
    if (a.id != b.id) return a.id > b.id;
    return a.seq > b.seq;
  }
};

struct ExecStep {
  int segment = 0;
  int layer_from = 0;
  int layer_to = 0;
  Ms duration = 0;
};

struct ClientJob {
  RequestId id = 0;
  Ms compute_ms = 0;   // local work including compression for partial jobs
  bool partial = false;
};

struct ClientState {
  bool busy = false;
  Ms busy_until = 0;
  std::deque<ClientJob> queue;
  ClientJob current;
  NetworkEstimator estimator;

  Ms backlog(Ms now) const {
    Ms total = busy ? busy_until - now : 0;
    for (const ClientJob& j : queue) total += j.compute_ms;
    return total;
  }
};

}  // namespace detail

class Simulator {
 public:
  Simulator(const WorkloadSpec& spec, const ProfileSet& ps, const SimConfig& config,
            const NetworkTrace* trace = nullptr, const ClientProfile* client_profile = nullptr)
      : spec_(spec), ps_(ps), config_(config), trace_(trace), client_profile_(client_profile) {
    if (config_.offload != OffloadMode::none) {
      if (config_.clients < 1) {
        throw std::invalid_argument("offload modes need at least one client");
      }
      if (!client_profile_) {
        throw std::invalid_argument("offload modes need a client profile");
      }
    }
    mix_dnn_.clear();
    if (spec_.dnn_mix.empty()) {
      mix_dnn_.push_back(0);
    } else {
      for (const auto& [name, fraction] : spec_.dnn_mix) {
        mix_dnn_.push_back(ps_.dnn_index(name));
      }
    }
    has_shared_ = false;
    for (std::size_t c = 0; c < ps_.components.size() && !has_shared_; ++c) {
      has_shared_ = ps_.component_users(static_cast<int>(c)) > 1;
    }
  }

  SimResult run() {
    setup();
    while (!events_.empty()) {
      const Ms now = events_.top().time;
      while (!events_.empty() && events_.top().time == now) {
        const detail::Ev ev = events_.top();
        events_.pop();
        dispatch(ev);
      }
      end_of_instant(now);
    }
    SimResult result;
    result.outcomes.reserve(book_.size());
    for (const Book& b : book_) result.outcomes.push_back(b.outcome);
    result.metrics = summarize(result.outcomes);
    result.metrics.schedules_computed = schedules_computed_;
    if (schedules_computed_ > 0) {
      result.metrics.mean_solve_wall_ms = solve_wall_total_ / schedules_computed_;
    }
    return result;
  }

 private:
  struct Book {
    RequestOutcome outcome;
    std::int64_t size_bits = 0;
    Ms server_arrival = 0;
    int entry_layer = 1;
    bool resolved = false;
  };

  void setup() {
    const std::vector<ArrivalRecord> arrivals = generate_arrivals(spec_);
    book_.resize(arrivals.size());
    clients_.assign(static_cast<std::size_t>(std::max(0, config_.clients)),
                    detail::ClientState{});
    if (trace_ && !trace_->empty()) {
      for (auto& c : clients_) c.estimator.prime(trace_->throughput_at(0));
    }
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
      const ArrivalRecord& a = arrivals[i];
      const RequestId id = static_cast<RequestId>(i) + 1;
      Book& b = book_[i];
      b.outcome.id = id;
      b.outcome.dnn = mix_dnn_[static_cast<std::size_t>(a.dnn) % mix_dnn_.size()];
      b.outcome.arrival = a.time;
      b.outcome.deadline = spec_.relative_deadline >= kNoDeadline
                               ? kNoDeadline
                               : a.time + spec_.relative_deadline;
      b.size_bits = a.size_bits;
      push_event(a.time, detail::EvKind::request_arrival, id);
    }
  }

  void dispatch(const detail::Ev& ev) {
    switch (ev.kind) {
      case detail::EvKind::request_arrival: on_generated(ev); break;
      case detail::EvKind::transmission_complete: on_transmitted(ev); break;
      case detail::EvKind::client_complete: on_client_done(ev); break;
      case detail::EvKind::step_complete: on_step_complete(ev); break;
    }
  }

  // ---- request generation and routing ----

  void on_generated(const detail::Ev& ev) {
    Book& b = book(ev.id);
    const Ms now = ev.time;
    const int dnn = b.outcome.dnn;
    const std::string& dnn_name = ps_.dnns[static_cast<std::size_t>(dnn)].name();

    if (config_.offload == OffloadMode::none || clients_.empty()) {
      send_to_server(ev.id, now, 1);
      return;
    }

    const int client = static_cast<int>((ev.id - 1) % clients_.size());
    b.outcome.location = CompletionLocation::server;
    detail::ClientState& cs = clients_[static_cast<std::size_t>(client)];
    const bool can_run_locally = client_profile_->has_dnn(dnn_name);
    const Ms deadline_remaining =
        b.outcome.deadline >= kNoDeadline ? static_cast<Ms>(-1) : b.outcome.deadline - now;

    if (config_.offload == OffloadMode::binary) {
      OffloadDecision decision = OffloadDecision::offload;
      if (can_run_locally) {
        const ClientDnnProfile& local = client_profile_->for_dnn(dnn_name);
        const Ms local_est = cs.backlog(now) + local.full_runtime();
        const Ms tx_est = cs.estimator.estimate_delay(b.size_bits);
        const Ms server_est = server_remaining_makespan(now) + ps_.single_request_runtime(dnn);
        decision = decide_binary(local_est, tx_est, server_est, deadline_remaining);
      }
      if (decision == OffloadDecision::local) {
        const ClientDnnProfile& local = client_profile_->for_dnn(dnn_name);
        b.outcome.location = CompletionLocation::client_full;
        b.outcome.offload_groups = local.group_count();
        b.outcome.client_time = local.full_runtime();
        enqueue_client(client, {ev.id, local.full_runtime(), false}, now);
      } else {
        start_transmission(ev.id, b.size_bits, now, 1, 0);
      }
      return;
    }

    // Partial offloading.
    if (!can_run_locally) {
      start_transmission(ev.id, b.size_bits, now, 1, 0);
      return;
    }
    const ClientDnnProfile& local = client_profile_->for_dnn(dnn_name);
    const int groups = local.group_count();
    const std::vector<LayerGroup> boundaries = group_layers(ps_, dnn, groups);
    const Ms wait = server_remaining_makespan(now);
    std::vector<Ms> client_ready(static_cast<std::size_t>(groups) + 1);
    std::vector<Ms> server_wait(static_cast<std::size_t>(groups) + 1, wait);
    std::vector<Ms> server_rest(static_cast<std::size_t>(groups) + 1, 0);
    std::vector<Ms> payload(static_cast<std::size_t>(groups) + 1, 0);
    const Ms backlog = cs.backlog(now);
    for (int k = 0; k <= groups; ++k) {
      const std::size_t i = static_cast<std::size_t>(k);
      client_ready[i] = backlog + local.prefix_runtime(k);
      const int entry = k == 0 ? 1 : boundaries[static_cast<std::size_t>(k - 1)].last + 1;
      server_rest[i] = entry > ps_.dnns[static_cast<std::size_t>(dnn)].num_layers()
                           ? 0
                           : ps_.single_request_runtime(dnn, entry);
      if (k == 0) {
        payload[i] = cs.estimator.estimate_delay(b.size_bits);
      } else if (k < groups) {
        const std::int64_t bits = payload_bits(local, dnn, boundaries, k);
        payload[i] = client_profile_->compress_ms + cs.estimator.estimate_delay(bits) +
                     client_profile_->decompress_ms;
        server_rest[i] += 0;  // decompress folded into payload readiness
      }
    }
    const PartialDecision choice =
        decide_partial(client_ready, server_wait, server_rest, payload, config_.partial_rule);
    b.outcome.offload_groups = choice.groups_local;
    if (choice.groups_local == groups) {
      b.outcome.location = CompletionLocation::client_full;
      b.outcome.client_time = local.full_runtime();
      enqueue_client(client, {ev.id, local.full_runtime(), false}, now);
    } else if (choice.groups_local == 0) {
      start_transmission(ev.id, b.size_bits, now, 1, 0);
    } else {
      b.outcome.location = CompletionLocation::client_partial;
      const Ms compute = local.prefix_runtime(choice.groups_local) + client_profile_->compress_ms;
      b.outcome.client_time = compute;
      b.entry_layer = boundaries[static_cast<std::size_t>(choice.groups_local - 1)].last + 1;
      enqueue_client(client, {ev.id, compute, true}, now);
    }
  }

  std::int64_t payload_bits(const ClientDnnProfile& local, int dnn,
                            const std::vector<LayerGroup>& boundaries, int k) const {
    if (!local.group_output_bits.empty()) {
      return local.group_output_bits[static_cast<std::size_t>(k - 1)];
    }
    return ps_.output_bits(dnn, boundaries[static_cast<std::size_t>(k - 1)].last);
  }

  void enqueue_client(int client, detail::ClientJob job, Ms now) {
    detail::ClientState& cs = clients_[static_cast<std::size_t>(client)];
    if (cs.busy) {
      cs.queue.push_back(job);
    } else {
      cs.busy = true;
      cs.current = job;
      cs.busy_until = now + job.compute_ms;
      push_event(cs.busy_until, detail::EvKind::client_complete, job.id);
    }
  }

  void on_client_done(const detail::Ev& ev) {
    const int client = static_cast<int>((ev.id - 1) % clients_.size());
    detail::ClientState& cs = clients_[static_cast<std::size_t>(client)];
    const detail::ClientJob job = cs.current;
    cs.busy = false;
    if (!cs.queue.empty()) {
      cs.busy = true;
      cs.current = cs.queue.front();
      cs.queue.pop_front();
      cs.busy_until = ev.time + cs.current.compute_ms;
      push_event(cs.busy_until, detail::EvKind::client_complete, cs.current.id);
    }

    Book& b = book(job.id);
    if (!job.partial) {
      finish(job.id, ev.time);
      return;
    }
    // Ship the intermediate output; the request resumes at its entry layer.
    const int dnn = b.outcome.dnn;
    const ClientDnnProfile& local = client_profile_->for_dnn(
        ps_.dnns[static_cast<std::size_t>(dnn)].name());
    const std::vector<LayerGroup> boundaries = group_layers(ps_, dnn, local.group_count());
    const int k = b.outcome.offload_groups;
    const std::int64_t bits = payload_bits(local, dnn, boundaries, k);
    start_transmission(job.id, bits, ev.time, b.entry_layer, client_profile_->decompress_ms);
  }

  void start_transmission(RequestId id, std::int64_t bits, Ms now, int entry_layer,
                          Ms decompress) {
    Book& b = book(id);
    b.entry_layer = entry_layer;
    const Ms delay = trace_ ? transmission_delay(bits, now, *trace_) : 0;
    b.outcome.network_delay += delay;
    if (!clients_.empty() && delay > 0) {
      const int client = static_cast<int>((id - 1) % clients_.size());
      clients_[static_cast<std::size_t>(client)].estimator.update(
          static_cast<double>(bits) / delay);
    }
    push_event(now + delay + decompress, detail::EvKind::transmission_complete, id);
  }

  void on_transmitted(const detail::Ev& ev) { arrive_at_server(ev.id, ev.time); }

  void send_to_server(RequestId id, Ms now, int entry_layer) {
    Book& b = book(id);
    b.entry_layer = entry_layer;
    if (trace_) {
      start_transmission(id, b.size_bits, now, entry_layer, 0);
    } else {
      arrive_at_server(id, now);
    }
  }

  void arrive_at_server(RequestId id, Ms now) {
    Book& b = book(id);
    b.server_arrival = now;
    Request r;
    r.id = id;
    r.dnn = b.outcome.dnn;
    r.arrival = b.outcome.arrival;
    r.deadline = b.outcome.deadline;
    r.layer = b.entry_layer;
    r.origin = clients_.empty() ? kRemoteOrigin : static_cast<int>((id - 1) % clients_.size());
    const int num_layers = ps_.dnns[static_cast<std::size_t>(r.dnn)].num_layers();
    if (r.layer > num_layers) {  // degenerate: nothing left to run
      finish(id, now);
      return;
    }
    pending_.push_back(r);
    std::sort(pending_.begin(), pending_.end(), arrives_before);
    ++arrivals_since_schedule_;
  }

  // ---- server execution ----

  Ms server_remaining_makespan(Ms now) const {
    Ms total = executing_ ? busy_until_ - now : 0;
    for (std::size_t s = next_step_; s < steps_.size(); ++s) total += steps_[s].duration;
    return std::max<Ms>(total, 0);
  }

  void on_step_complete(const detail::Ev& ev) {
    executing_ = false;
    const detail::ExecStep& step = steps_[next_step_];
    const ScheduledSegment& seg = plan_.segments[static_cast<std::size_t>(step.segment)];
    bool crossed = false;

    // Advance members whose layer fell inside the step.
    for (RequestId id : seg.members) {
      Request* r = find_pending(id);
      if (!r || r->layer > step.layer_to) continue;
      const int old_layer = r->layer;
      r->layer = step.layer_to + 1;
      r->state = RequestState::running;
      const int num_layers = ps_.dnns[static_cast<std::size_t>(r->dnn)].num_layers();
      if (r->layer > num_layers) {
        finish(id, ev.time);
        erase_pending(id);
      } else if (has_shared_ &&
                 ps_.layer_is_shared(r->dnn, old_layer) != ps_.layer_is_shared(r->dnn, r->layer)) {
        crossed = true;
      }
    }
    // Deposit riders leaving their shared stage within this step.
    for (const Rider& rider : seg.riders) {
      if (rider.leave_layer > step.layer_to || rider.join_layer > step.layer_to) continue;
      Request* r = find_pending(rider.id);
      if (!r || r->dnn != rider.dnn) continue;
      if (r->layer >= rider.deposit_layer) continue;
      r->layer = rider.deposit_layer;
      r->state = RequestState::running;
      crossed = true;
      const int num_layers = ps_.dnns[static_cast<std::size_t>(r->dnn)].num_layers();
      if (r->layer > num_layers) {
        finish(rider.id, ev.time);
        erase_pending(rider.id);
      }
    }
    ++next_step_;
    if (reschedule_trigger(true, arrivals_since_schedule_ > 0, crossed)) {
      needs_schedule_ = true;
    }
  }

  void end_of_instant(Ms now) {
    if (executing_) return;
    if (needs_schedule_ && !pending_.empty()) compute_plan(now);
    // Deadline drops can empty a window while deeper requests still wait.
    while (next_step_ >= steps_.size() && !pending_.empty()) {
      const std::size_t before = pending_.size();
      compute_plan(now);
      if (next_step_ < steps_.size()) break;
      if (pending_.size() >= before) {
        throw std::logic_error("scheduler produced no steps for a non-empty window");
      }
    }
    if (next_step_ < steps_.size()) start_step(now);
  }

  void start_step(Ms now) {
    const Ms start = std::max(now, plan_ready_at_);
    const detail::ExecStep& step = steps_[next_step_];
    executing_ = true;
    busy_until_ = start + step.duration + config_.step_overhead;
    push_event(busy_until_, detail::EvKind::step_complete, 0);
  }

  void compute_plan(Ms now) {
    needs_schedule_ = false;
    arrivals_since_schedule_ = 0;
    plan_ = Schedule{};
    steps_.clear();
    next_step_ = 0;

    if (spec_.relative_deadline < kNoDeadline) {
      auto [kept, dropped] = drop_expired(pending_, now);
      for (const Request& d : dropped) {
        Book& b = book(d.id);
        b.outcome.dropped = true;
        b.outcome.on_time = false;
        b.resolved = true;
        ++resolved_;
      }
      pending_ = std::move(kept);
      if (pending_.empty()) return;
    }

    std::vector<Request> window(pending_.begin(),
                                pending_.begin() + std::min<std::size_t>(
                                                       pending_.size(),
                                                       static_cast<std::size_t>(config_.window_cap)));
    plan_ = run_scheduler(window, now);
    plan_ready_at_ = now + config_.scheduler_latency;
    ++schedules_computed_;
    solve_wall_total_ += plan_.solve_wall_ms;
    build_steps();
  }

  Schedule run_scheduler(std::vector<Request>& window, Ms now) {
    std::vector<int> dnns;
    for (const Request& r : window) {
      if (std::find(dnns.begin(), dnns.end(), r.dnn) == dnns.end()) dnns.push_back(r.dnn);
    }
    DpOptions dp{config_.granularity, config_.groups, 0};
    MultiOptions multi{dp, 6, true};

    switch (config_.scheduler) {
      case SchedulerKind::no_batch:
        return baseline_no_batch(window, ps_);
      case SchedulerKind::batch:
        return baseline_batch(window, ps_, config_.max_batch);
      case SchedulerKind::edf:
        return edf_batch(window, ps_, config_.max_batch, now);
      case SchedulerKind::ours_time:
        if (dnns.size() == 1) {
          return incremental_update_with_opts(window, dnns[0], dp);
        }
        return config_.shared_batching && has_shared_
                   ? schedule_multi_shared(window, ps_, config_.max_batch, multi)
                   : schedule_multi(window, ps_, config_.max_batch, multi);
      case SchedulerKind::ours_tardy:
      default:
        return tardy_with_drops(window, now, dp);
    }
  }

  Schedule incremental_update_with_opts(std::span<const Request> window, int dnn,
                                        const DpOptions& dp) {
    if (!dp_cache_.valid || dp_cache_.granularity != dp.granularity ||
        dp_cache_.groups != dp.groups || dp_cache_.dnn != dnn) {
      return compute_schedule_dp(window, ps_, dnn, config_.max_batch, dp, &dp_cache_);
    }
    return incremental_update(dp_cache_, window, ps_, dnn, config_.max_batch);
  }

  // Our-Tardy: schedule, drop the requests predicted to miss their deadline,
  // and re-schedule until the prediction is clean.
  Schedule tardy_with_drops(std::vector<Request>& window, Ms now, const DpOptions& dp) {
    while (true) {
      Schedule sched = tardy_multi(window, now, dp);
      if (sched.drop_marks.empty()) return sched;
      for (RequestId id : sched.drop_marks) {
        Book& b = book(id);
        b.outcome.dropped = true;
        b.outcome.on_time = false;
        b.resolved = true;
        ++resolved_;
        erase_pending(id);
        window.erase(std::remove_if(window.begin(), window.end(),
                                    [id](const Request& r) { return r.id == id; }),
                     window.end());
      }
      if (window.empty()) return Schedule{};
    }
  }

  Schedule tardy_multi(std::span<const Request> window, Ms now, const DpOptions& dp) {
    std::vector<detail::DnnGroup> groups = detail::group_by_dnn(window);
    if (groups.size() == 1) {
      return tardy_dp(window, ps_, groups[0].dnn, config_.max_batch, now, dp);
    }
    std::vector<int> perm(groups.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    const bool enumerate = groups.size() <= 6;
    Schedule best;
    int best_tardy = -1;
    do {
      Schedule combined;
      Ms elapsed = 0;
      for (int gi : perm) {
        const detail::DnnGroup& g = groups[static_cast<std::size_t>(gi)];
        Schedule s = tardy_dp(g.requests, ps_, g.dnn, config_.max_batch, now, dp, elapsed);
        for (ScheduledSegment seg : s.segments) {
          seg.finish_offset += elapsed;
          combined.segments.push_back(std::move(seg));
        }
        for (const auto& [id, off] : s.completion_offsets) {
          combined.completion_offsets.emplace_back(id, off + elapsed);
          combined.objective += off + elapsed;
        }
        combined.tardy_count += s.tardy_count;
        combined.drop_marks.insert(combined.drop_marks.end(), s.drop_marks.begin(),
                                   s.drop_marks.end());
        elapsed += s.total_duration;
      }
      combined.total_duration = elapsed;
      if (best_tardy < 0 || combined.tardy_count < best_tardy ||
          (combined.tardy_count == best_tardy && combined.objective < best.objective)) {
        best = std::move(combined);
        best_tardy = best.tardy_count;
      }
    } while (enumerate && std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

  // Expand the schedule into (segment, layer range) steps at the execution
  // granularity: whole layer groups under grouped scheduling, single layers
  // otherwise. Durations come from the live layer positions.
  void build_steps() {
    std::unordered_map<RequestId, int> layer_of;
    layer_of.reserve(pending_.size());
    for (const Request& r : pending_) layer_of.emplace(r.id, r.layer);
    for (std::size_t s = 0; s < plan_.segments.size(); ++s) {
      const ScheduledSegment& seg = plan_.segments[s];
      const int num_layers = ps_.dnns[static_cast<std::size_t>(seg.dnn)].num_layers();
      std::vector<int> cuts;  // step end layers
      if (config_.granularity == SplitGranularity::per_group) {
        const std::vector<LayerGroup> groups =
            group_layers(ps_, seg.dnn, std::min(config_.groups, num_layers));
        for (const LayerGroup& g : groups) {
          if (g.last >= seg.start_layer) cuts.push_back(g.last);
        }
      } else {
        for (int k = seg.start_layer; k <= num_layers; ++k) cuts.push_back(k);
      }
      int from = seg.start_layer;
      for (int cut : cuts) {
        detail::ExecStep step;
        step.segment = static_cast<int>(s);
        step.layer_from = from;
        step.layer_to = cut;
        step.duration = step_duration(seg, from, cut, layer_of);
        steps_.push_back(step);
        from = cut + 1;
      }
    }
  }

  Ms step_duration(const ScheduledSegment& seg, int from, int to,
                   const std::unordered_map<RequestId, int>& layer_of) const {
    Ms total = 0;
    for (int k = from; k <= to; ++k) {
      int batch = 0;
      for (RequestId id : seg.members) {
        const auto it = layer_of.find(id);
        if (it != layer_of.end() && it->second <= k) ++batch;
      }
      for (const Rider& rider : seg.riders) {
        if (rider.join_layer <= k && k <= rider.leave_layer) ++batch;
      }
      if (batch == 0) continue;
      if (batch > config_.max_batch) {
        throw std::logic_error("step batch exceeds the configured bound");
      }
      total += ps_.lookup(seg.dnn, k, batch);
    }
    return total;
  }

  // ---- bookkeeping ----

  Book& book(RequestId id) { return book_[static_cast<std::size_t>(id - 1)]; }

  Request* find_pending(RequestId id) {
    for (Request& r : pending_) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }

  void erase_pending(RequestId id) {
    pending_.erase(std::remove_if(pending_.begin(), pending_.end(),
                                  [id](const Request& r) { return r.id == id; }),
                   pending_.end());
  }

  void finish(RequestId id, Ms when) {
    Book& b = book(id);
    b.outcome.completion = when;
    b.outcome.on_time =
        b.outcome.deadline >= kNoDeadline || b.outcome.completion <= b.outcome.deadline;
    if (b.outcome.location == CompletionLocation::server ||
        b.outcome.location == CompletionLocation::client_partial) {
      b.outcome.server_time = when - b.server_arrival;
    }
    b.resolved = true;
    ++resolved_;
  }

  void push_event(Ms time, detail::EvKind kind, RequestId id) {
    events_.push({time, kind, id, seq_++});
  }

  const WorkloadSpec& spec_;
  const ProfileSet& ps_;
  SimConfig config_;
  const NetworkTrace* trace_;
  const ClientProfile* client_profile_;

  std::vector<int> mix_dnn_;
  bool has_shared_ = false;

  std::priority_queue<detail::Ev, std::vector<detail::Ev>, detail::EvLater> events_;
  std::uint64_t seq_ = 0;
  std::vector<Book> book_;
  std::vector<detail::ClientState> clients_;

  std::vector<Request> pending_;
  Schedule plan_;
  std::vector<detail::ExecStep> steps_;
  std::size_t next_step_ = 0;
  bool executing_ = false;
  Ms busy_until_ = 0;
  Ms plan_ready_at_ = 0;
  bool needs_schedule_ = false;
  int arrivals_since_schedule_ = 0;
  DpTable dp_cache_;

  int resolved_ = 0;
  int schedules_computed_ = 0;
  double solve_wall_total_ = 0;
};

inline SimResult run_sim(const WorkloadSpec& spec, const ProfileSet& ps, const SimConfig& config,
                         const NetworkTrace* trace = nullptr,
                         const ClientProfile* client_profile = nullptr) {
  Simulator sim(spec, ps, config, trace, client_profile);
  return sim.run();
}

struct RatePoint {
  double rate = 0;
  SummaryMetrics metrics;
};

struct CapacityCurve {
  std::vector<RatePoint> points;
  std::optional<double> capacity;  // largest rate with on-time ratio >= 0.90
};

inline constexpr double kCapacityThreshold = 0.90;

inline CapacityCurve capacity_sweep(WorkloadSpec spec, const std::vector<double>& rates,
                                    const ProfileSet& ps, const SimConfig& config,
                                    const NetworkTrace* trace = nullptr,
                                    const ClientProfile* client_profile = nullptr) {
  CapacityCurve curve;
  for (double rate : rates) {
    spec.rate = rate;
    SimResult result = run_sim(spec, ps, config, trace, client_profile);
    curve.points.push_back({rate, result.metrics});
    if (result.metrics.on_time_ratio >= kCapacityThreshold) {
      if (!curve.capacity || rate > *curve.capacity) curve.capacity = rate;
    }
  }
  return curve;
}

}  // namespace batchsim
