#pragma once

// Result emission: outcome CSV rows and summary JSON. Formatting is fixed so
// identical runs produce byte-identical files.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "batchsim/cost_model.hpp"
#include "batchsim/model.hpp"
#include "batchsim/simulator.hpp"

namespace batchsim {

inline std::string format_seconds(Ms ms) {
  if (ms >= kInfeasible) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9f", ms / 1000.0);
  return buf;
}

inline const char* location_name(const RequestOutcome& o) {
  if (o.dropped) return "dropped";
  switch (o.location) {
    case CompletionLocation::server: return "server";
    case CompletionLocation::client_full: return "client-full";
    default: return "client-partial";
  }
}

inline void write_outcomes_csv(std::ostream& out, const std::vector<RequestOutcome>& outcomes,
                               const ProfileSet& ps) {
  out << "id,dnn,arrival_s,completion_s,deadline_s,on_time,location,offload_k,network_delay_s\n";
  for (const RequestOutcome& o : outcomes) {
    out << o.id << ',' << ps.dnns[static_cast<std::size_t>(o.dnn)].name() << ','
        << format_seconds(o.arrival) << ','
        << (o.dropped ? "" : format_seconds(o.completion)) << ','
        << (o.deadline >= kNoDeadline ? "" : format_seconds(o.deadline)) << ','
        << (o.on_time ? 1 : 0) << ',' << location_name(o) << ',' << o.offload_groups << ','
        << format_seconds(o.network_delay) << '\n';
  }
}

inline nlohmann::json summary_json(const SummaryMetrics& m) {
  nlohmann::json j;
  j["generated"] = m.generated;
  j["completed"] = m.completed;
  j["dropped"] = m.dropped;
  j["on_time"] = m.on_time;
  j["on_time_ratio"] = m.on_time_ratio;
  j["mean_completion_s"] = m.mean_completion / 1000.0;
  j["median_completion_s"] = m.median_completion / 1000.0;
  j["p95_completion_s"] = m.p95_completion / 1000.0;
  j["locations"] = {{"server", m.at_server},
                    {"client_full", m.at_client_full},
                    {"client_partial", m.at_client_partial}};
  j["mean_network_delay_s"] = m.mean_network_delay / 1000.0;
  j["schedules_computed"] = m.schedules_computed;
  j["mean_solve_wall_ms"] = m.mean_solve_wall_ms;
  return j;
}

// One row per (scheduler, rate): mean and standard deviation across seeds.
struct SweepRow {
  std::string scheduler;
  double rate = 0;
  double ratio_mean = 0;
  double ratio_std = 0;
  double mean_completion_s_mean = 0;
  double mean_completion_s_std = 0;
};

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "scheduler,rate,on_time_ratio_mean,on_time_ratio_std,"
         "mean_completion_s_mean,mean_completion_s_std\n";
  char buf[160];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6f,%.6f,%.9f,%.9f", r.scheduler.c_str(), r.rate,
                  r.ratio_mean, r.ratio_std, r.mean_completion_s_mean, r.mean_completion_s_std);
    out << buf << '\n';
  }
}

}  // namespace batchsim
