// Command-line front end: trace-driven simulation, capacity sweeps, profile
// validation, and exhaustive-oracle self checks.
//
// Exit codes: 0 success, 1 oracle/assertion failure, 2 usage or config error.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <batchsim/batchsim.hpp>

namespace {

using namespace batchsim;

std::string resolve_profile_path(const std::string& arg) {
  namespace fs = std::filesystem;
  if (fs::exists(arg)) return arg;
  if (arg.find('/') == std::string::npos) {
    if (const char* dir = std::getenv("BATCHSIM_PROFILE_DIR")) {
      const std::string candidate = std::string(dir) + "/" + arg +
                                    (arg.ends_with(".json") ? "" : ".json");
      if (fs::exists(candidate)) return candidate;
    }
  }
  return arg;  // let the loader produce the error message
}

std::vector<double> parse_rates(const std::string& text) {
  std::vector<double> rates;
  const auto c1 = text.find(':');
  if (c1 != std::string::npos) {
    const auto c2 = text.find(':', c1 + 1);
    const double lo = std::stod(text.substr(0, c1));
    const double hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = c2 == std::string::npos ? 10.0 : std::stod(text.substr(c2 + 1));
    if (step <= 0 || hi < lo) throw CLI::ValidationError("--rates", "bad lo:hi:step range");
    for (double r = lo; r <= hi + 1e-9; r += step) rates.push_back(r);
    return rates;
  }
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) rates.push_back(std::stod(tok));
  if (rates.empty()) throw CLI::ValidationError("--rates", "no rates given");
  return rates;
}

struct SimArgs {
  std::string profile_path;
  std::string workload_path;
  std::string trace_path;
  std::string size_trace_path;
  std::string client_profile_path;
  std::string out_path;
  std::string scheduler = "ours-time";
  std::string process = "poisson";
  std::string offload = "none";
  std::string granularity = "group";
  std::string partial_rule = "min-completion";
  double rate = 100.0;
  int requests = 5000;
  double deadline_ms = 0.0;  // 0 = no deadline
  std::uint64_t seed = 1;
  double trace_scale = 1.0;
  int clients = 0;
  int groups = 5;
  int max_batch = 90;
  double sched_latency_ms = 0.0;
  double step_overhead_ms = 0.0;
  std::vector<std::pair<std::string, double>> dnn_mix;
};

void add_sim_options(CLI::App* cmd, SimArgs& a) {
  cmd->add_option("--profile", a.profile_path, "profile JSON (path or name under $BATCHSIM_PROFILE_DIR)")
      ->required();
  cmd->add_option("--workload", a.workload_path, "workload JSON; flags override its fields");
  cmd->add_option("--scheduler", a.scheduler,
                  "ours-time | ours-tardy | edf | batch | no-batch");
  cmd->add_option("--process", a.process, "poisson | pareto | constant");
  cmd->add_option("--rate", a.rate, "mean arrival rate, requests/second");
  cmd->add_option("--requests", a.requests, "number of requests to generate");
  cmd->add_option("--deadline-ms", a.deadline_ms, "relative deadline in ms (0 = none)");
  cmd->add_option("--seed", a.seed, "master seed for all randomness");
  cmd->add_option("--trace", a.trace_path, "network trace CSV (timestamp_s,throughput_mbps)");
  cmd->add_option("--trace-scale", a.trace_scale, "multiply trace throughput");
  cmd->add_option("--size-trace", a.size_trace_path, "image size trace CSV (size_bits)");
  cmd->add_option("--clients", a.clients, "number of clients (offload modes)");
  cmd->add_option("--offload", a.offload, "none | binary | partial");
  cmd->add_option("--client-profile", a.client_profile_path, "client profile JSON");
  cmd->add_option("--partial-rule", a.partial_rule, "min-completion | first-hide-wait");
  cmd->add_option("--granularity", a.granularity, "request | layer | group");
  cmd->add_option("--groups", a.groups, "layer groups for grouped scheduling");
  cmd->add_option("--max-batch", a.max_batch, "batch bound B in requests");
  cmd->add_option("--sched-latency-ms", a.sched_latency_ms, "charge per schedule computation");
  cmd->add_option("--step-overhead-ms", a.step_overhead_ms, "charge per executed batch step");
}

// Workload JSON fields mirror the flags; explicitly passed flags win.
void apply_workload_file(const CLI::App* cmd, SimArgs& a) {
  if (a.workload_path.empty()) return;
  std::ifstream in(a.workload_path);
  if (!in) throw std::runtime_error("cannot open workload file: " + a.workload_path);
  nlohmann::json doc;
  in >> doc;
  auto overridden = [&](const std::string& flag) { return cmd->count(flag) > 0; };
  if (doc.contains("process") && !overridden("--process")) a.process = doc["process"];
  if (doc.contains("rate") && !overridden("--rate")) a.rate = doc["rate"];
  if (doc.contains("requests") && !overridden("--requests")) a.requests = doc["requests"];
  if (doc.contains("deadline_ms") && !overridden("--deadline-ms")) a.deadline_ms = doc["deadline_ms"];
  if (doc.contains("seed") && !overridden("--seed")) a.seed = doc["seed"];
  if (doc.contains("clients") && !overridden("--clients")) a.clients = doc["clients"];
  if (doc.contains("offload") && !overridden("--offload")) a.offload = doc["offload"];
  if (doc.contains("scheduler") && !overridden("--scheduler")) a.scheduler = doc["scheduler"];
  if (doc.contains("dnn_mix")) {
    for (const auto& [name, fraction] : doc["dnn_mix"].items()) {
      a.dnn_mix.emplace_back(name, fraction.get<double>());
    }
  }
}

WorkloadSpec make_spec(const SimArgs& a) {
  WorkloadSpec spec;
  spec.process = parse_process(a.process);
  spec.rate = a.rate;
  spec.count = a.requests;
  spec.relative_deadline = a.deadline_ms > 0 ? a.deadline_ms : kNoDeadline;
  spec.seed = a.seed;
  spec.dnn_mix = a.dnn_mix;
  if (!a.size_trace_path.empty()) spec.size_trace = load_size_trace(a.size_trace_path);
  return spec;
}

SimConfig make_config(const SimArgs& a) {
  SimConfig config;
  config.scheduler = parse_scheduler(a.scheduler);
  if (a.granularity == "request") {
    config.granularity = SplitGranularity::per_request;
  } else if (a.granularity == "layer") {
    config.granularity = SplitGranularity::per_layer;
  } else if (a.granularity == "group") {
    config.granularity = SplitGranularity::per_group;
  } else {
    throw std::runtime_error("unknown granularity '" + a.granularity + "'");
  }
  config.groups = a.groups;
  config.max_batch = a.max_batch;
  config.scheduler_latency = a.sched_latency_ms;
  config.step_overhead = a.step_overhead_ms;
  config.offload = parse_offload(a.offload);
  config.clients = a.clients;
  config.partial_rule = a.partial_rule == "first-hide-wait" ? PartialRule::first_hide_wait
                                                            : PartialRule::min_completion;
  return config;
}

std::optional<NetworkTrace> load_trace_arg(const SimArgs& a) {
  if (a.trace_path.empty()) return std::nullopt;
  NetworkTrace trace = load_trace(a.trace_path);
  if (a.trace_scale != 1.0) trace = scale_trace(trace, a.trace_scale);
  return trace;
}

std::string summary_path_for(const std::string& out) {
  const auto dot = out.rfind('.');
  if (dot == std::string::npos) return out + ".summary.json";
  return out.substr(0, dot) + ".summary.json";
}

void print_summary(const SummaryMetrics& m) {
  std::printf("generated            %d\n", m.generated);
  std::printf("completed            %d\n", m.completed);
  std::printf("dropped              %d\n", m.dropped);
  std::printf("on-time ratio        %.4f\n", m.on_time_ratio);
  std::printf("mean completion      %.3f ms\n", m.mean_completion);
  std::printf("median completion    %.3f ms\n", m.median_completion);
  std::printf("p95 completion       %.3f ms\n", m.p95_completion);
  std::printf("locations            server=%d client-full=%d client-partial=%d\n",
              m.at_server, m.at_client_full, m.at_client_partial);
  std::printf("schedules computed   %d (mean solve %.3f ms)\n", m.schedules_computed,
              m.mean_solve_wall_ms);
}

int cmd_simulate(const CLI::App* cmd, SimArgs& a) {
  apply_workload_file(cmd, a);
  const ProfileSet ps = load_profile(resolve_profile_path(a.profile_path));
  const WorkloadSpec spec = make_spec(a);
  const SimConfig config = make_config(a);
  const auto trace = load_trace_arg(a);
  std::optional<ClientProfile> client;
  if (!a.client_profile_path.empty()) client = load_client_profile(a.client_profile_path);

  const SimResult result = run_sim(spec, ps, config, trace ? &*trace : nullptr,
                                   client ? &*client : nullptr);
  if (!a.out_path.empty()) {
    std::ofstream out(a.out_path);
    if (!out) throw std::runtime_error("cannot write " + a.out_path);
    write_outcomes_csv(out, result.outcomes, ps);
    std::ofstream summary(summary_path_for(a.out_path));
    summary << summary_json(result.metrics).dump(1) << "\n";
    std::printf("wrote %s and %s\n", a.out_path.c_str(), summary_path_for(a.out_path).c_str());
  }
  print_summary(result.metrics);
  return 0;
}

int cmd_sweep(const CLI::App* cmd, SimArgs& a, const std::string& rates_text,
              const std::string& schedulers_text, int seeds) {
  apply_workload_file(cmd, a);
  const ProfileSet ps = load_profile(resolve_profile_path(a.profile_path));
  const auto trace = load_trace_arg(a);
  std::optional<ClientProfile> client;
  if (!a.client_profile_path.empty()) client = load_client_profile(a.client_profile_path);
  const std::vector<double> rates = parse_rates(rates_text);

  std::vector<std::string> schedulers;
  {
    std::istringstream in(schedulers_text);
    std::string tok;
    while (std::getline(in, tok, ',')) schedulers.push_back(tok);
  }

  std::vector<SweepRow> rows;
  for (const std::string& sched : schedulers) {
    SimArgs sa = a;
    sa.scheduler = sched;
    const SimConfig config = make_config(sa);
    std::vector<std::vector<double>> ratios(rates.size());
    std::vector<std::vector<double>> completions(rates.size());
    std::optional<double> capacity;
    for (int s = 0; s < seeds; ++s) {
      WorkloadSpec spec = make_spec(sa);
      spec.seed = sa.seed + static_cast<std::uint64_t>(s);
      const auto curve = capacity_sweep(spec, rates, ps, config, trace ? &*trace : nullptr,
                                        client ? &*client : nullptr);
      for (std::size_t r = 0; r < rates.size(); ++r) {
        ratios[r].push_back(curve.points[r].metrics.on_time_ratio);
        completions[r].push_back(curve.points[r].metrics.mean_completion / 1000.0);
      }
    }
    for (std::size_t r = 0; r < rates.size(); ++r) {
      SweepRow row;
      row.scheduler = sched;
      row.rate = rates[r];
      double m = 0, m2 = 0;
      for (double v : ratios[r]) m += v;
      m /= static_cast<double>(seeds);
      for (double v : ratios[r]) m2 += (v - m) * (v - m);
      row.ratio_mean = m;
      row.ratio_std = seeds > 1 ? std::sqrt(m2 / (seeds - 1)) : 0.0;
      double c = 0, c2 = 0;
      for (double v : completions[r]) c += v;
      c /= static_cast<double>(seeds);
      for (double v : completions[r]) c2 += (v - c) * (v - c);
      row.mean_completion_s_mean = c;
      row.mean_completion_s_std = seeds > 1 ? std::sqrt(c2 / (seeds - 1)) : 0.0;
      if (row.ratio_mean >= kCapacityThreshold) {
        capacity = capacity ? std::max(*capacity, rates[r]) : rates[r];
      }
      rows.push_back(row);
    }
    if (capacity) {
      std::printf("capacity[%s] = %g req/s\n", sched.c_str(), *capacity);
    } else {
      std::printf("capacity[%s] = none (on-time ratio below %.2f at every tested rate)\n",
                  sched.c_str(), kCapacityThreshold);
    }
  }
  if (!a.out_path.empty()) {
    std::ofstream out(a.out_path);
    if (!out) throw std::runtime_error("cannot write " + a.out_path);
    write_sweep_csv(out, rows);
    std::printf("wrote %s\n", a.out_path.c_str());
  } else {
    write_sweep_csv(std::cout, rows);
  }
  return 0;
}

int cmd_validate_profile(const std::string& path) {
  const ProfileSet ps = load_profile(resolve_profile_path(path));
  int total = 0;
  for (const auto& comp : ps.components) {
    const auto violations = check_subadditivity(comp.cost);
    total += static_cast<int>(violations.size());
    std::printf("component %-20s layers=%-3d  sub-additivity violations: %zu\n",
                comp.id.c_str(), comp.num_layers(), violations.size());
    for (const auto& v : violations) {
      std::printf("  layer %d: h(%d+%d) exceeds h(%d)+h(%d) by %.4f ms\n", v.layer, v.b1,
                  v.b2, v.b1, v.b2, v.excess);
    }
  }
  std::printf("%d violation(s) across %zu component(s); schedulers do not require the "
              "property, batching gains may simply be absent there\n",
              total, ps.components.size());
  return 0;
}

int cmd_oracle_check(int instances, std::uint64_t seed, int max_requests, bool bounded,
                     const std::string& what) {
  SplitMix64 rng(seed);
  int failures = 0;
  const bool all = what == "all";

  auto dump_instance = [&](const RandomInstance& inst, int trial, const char* suite) {
    std::printf("oracle mismatch in %s (trial %d, seed %llu)\n", suite, trial,
                static_cast<unsigned long long>(seed));
    std::printf("  layers:");
    for (const auto& r : inst.requests) std::printf(" %d", r.layer);
    std::printf("\n  deadlines:");
    for (const auto& r : inst.requests) {
      if (r.deadline >= kNoDeadline) {
        std::printf(" -");
      } else {
        std::printf(" %.0f", r.deadline);
      }
    }
    std::printf("\n  table (layer: h(1..n)):\n");
    const int n_layers = inst.profile.dnns[0].num_layers();
    for (int k = 1; k <= n_layers; ++k) {
      std::printf("    %d:", k);
      for (int b = 1; b <= static_cast<int>(inst.requests.size()); ++b) {
        std::printf(" %g", inst.profile.lookup(0, k, b));
      }
      std::printf("\n");
    }
  };

  if (all || what == "time") {
    for (int trial = 0; trial < instances; ++trial) {
      const auto inst = random_instance(rng, max_requests, 5, TableStyle::arbitrary);
      const int n = static_cast<int>(inst.requests.size());
      const int bound = bounded ? rng.uniform_int(1, n) : n;
      const auto dp = compute_schedule(inst.requests, inst.profile, 0, bound);
      const auto brute = brute_force_min_completion(inst.requests, inst.profile, 0, bound);
      if (dp.objective != brute.objective) {
        dump_instance(inst, trial, "completion-time DP");
        std::printf("  expected %.6f got %.6f (bound %d)\n", brute.objective, dp.objective,
                    bound);
        ++failures;
      }
    }
    std::printf("completion-time DP: %d instance(s) checked\n", instances);
  }
  if (all || what == "tardy") {
    for (int trial = 0; trial < instances; ++trial) {
      const auto inst = random_instance(rng, max_requests, 5, TableStyle::arbitrary, true, 0.0);
      const int n = static_cast<int>(inst.requests.size());
      const int bound = bounded ? rng.uniform_int(1, n) : n;
      const auto dp = tardy_dp(inst.requests, inst.profile, 0, bound, 0.0);
      const auto brute = brute_force_min_tardy(inst.requests, inst.profile, 0, bound, 0.0);
      if (dp.tardy_count != brute.tardy || dp.objective != brute.objective) {
        dump_instance(inst, trial, "tardy DP");
        std::printf("  expected tardy=%d sum=%.6f got tardy=%d sum=%.6f\n", brute.tardy,
                    brute.objective, dp.tardy_count, dp.objective);
        ++failures;
      }
    }
    std::printf("tardy DP: %d instance(s) checked\n", instances);
  }
  if (all || what == "multi") {
    for (int trial = 0; trial < instances; ++trial) {
      ProfileSet ps;
      std::vector<Request> reqs;
      RequestId id = 1;
      Ms arrival = 0;
      for (int d = 0; d < 3; ++d) {
        SharedComponent comp;
        comp.id = "c" + std::to_string(d);
        comp.cost = random_cost_table(rng, 3, 9, TableStyle::arbitrary);
        comp.output_bits.assign(3, 100000);
        ps.components.push_back(std::move(comp));
        ps.dnns.emplace_back("m" + std::to_string(d), std::vector<StageRef>{{d, 1}}, 3);
        const int n = rng.uniform_int(1, 3);
        std::vector<int> layers(static_cast<std::size_t>(n));
        for (int& l : layers) l = rng.uniform_int(1, 3);
        std::sort(layers.begin(), layers.end(), std::greater<int>());
        for (int l : layers) {
          Request r;
          r.id = id++;
          r.dnn = d;
          r.arrival = arrival;
          r.layer = l;
          arrival += 1.0;
          reqs.push_back(r);
        }
      }
      ps.max_batch = 9;
      const auto sched = schedule_multi(reqs, ps, 9);
      const auto brute = brute_force_multi(reqs, ps, 9);
      if (sched.objective != brute.objective) {
        std::printf("oracle mismatch in multi-DNN search (trial %d, seed %llu): expected "
                    "%.6f got %.6f\n",
                    trial, static_cast<unsigned long long>(seed), brute.objective,
                    sched.objective);
        ++failures;
      }
    }
    std::printf("multi-DNN permutation search: %d instance(s) checked\n", instances);
  }
  if (all || what == "lemma") {
    for (int trial = 0; trial < instances; ++trial) {
      const auto inst = random_instance(rng, 4, 3, TableStyle::subadditive);
      const int n = static_cast<int>(inst.requests.size());
      const auto brute = brute_force_min_completion(inst.requests, inst.profile, 0, n);
      const Ms inter = interleaving_min_completion(inst.requests, inst.profile, 0);
      if (inter < brute.objective) {
        dump_instance(inst, trial, "run-to-completion check");
        std::printf("  interleaving %.6f beats segmentation %.6f\n", inter, brute.objective);
        ++failures;
      }
    }
    std::printf("run-to-completion check: %d instance(s) checked\n", instances);
  }
  if (failures > 0) {
    std::printf("%d failure(s); re-run with --seed %llu to reproduce\n", failures,
                static_cast<unsigned long long>(seed));
    return 1;
  }
  std::printf("all oracle checks passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batching-aware DNN inference scheduling simulator"};
  app.require_subcommand(1);

  SimArgs sim_args;
  CLI::App* simulate = app.add_subcommand("simulate", "run one trace-driven simulation");
  add_sim_options(simulate, sim_args);
  simulate->add_option("--out", sim_args.out_path, "outcome CSV path (summary JSON alongside)");

  SimArgs sweep_args;
  std::string rates_text = "10:350:10";
  std::string schedulers_text = "ours-time";
  int sweep_seeds = 1;
  CLI::App* sweep = app.add_subcommand("sweep-capacity", "on-time ratio across arrival rates");
  add_sim_options(sweep, sweep_args);
  sweep->add_option("--rates", rates_text, "lo:hi:step or comma list, requests/second");
  sweep->add_option("--schedulers", schedulers_text, "comma list of schedulers to sweep");
  sweep->add_option("--seeds", sweep_seeds, "seeds per rate; mean/stddev in the CSV");
  sweep->add_option("--out", sweep_args.out_path, "sweep CSV path");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate-profile", "sub-additivity report");
  validate->add_option("path", validate_path, "profile JSON")->required();

  int oracle_instances = 200;
  std::uint64_t oracle_seed = 1;
  int oracle_max_requests = 8;
  bool oracle_bounded = false;
  std::string oracle_what = "all";
  CLI::App* oracle = app.add_subcommand("oracle-check",
                                        "compare schedulers against exhaustive search");
  oracle->add_option("--instances", oracle_instances, "instances per suite");
  oracle->add_option("--seed", oracle_seed, "instance stream seed");
  oracle->add_option("--max-requests", oracle_max_requests, "requests per instance (<= 10)");
  oracle->add_flag("--bounded", oracle_bounded, "also randomize the batch bound");
  oracle->add_option("--what", oracle_what, "time | tardy | multi | lemma | all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(simulate, sim_args);
    if (sweep->parsed()) {
      return cmd_sweep(sweep, sweep_args, rates_text, schedulers_text, sweep_seeds);
    }
    if (validate->parsed()) return cmd_validate_profile(validate_path);
    if (oracle->parsed()) {
      if (oracle_max_requests < 1 || oracle_max_requests > 10) {
        throw std::runtime_error("--max-requests must be in [1, 10]");
      }
      return cmd_oracle_check(oracle_instances, oracle_seed, oracle_max_requests,
                              oracle_bounded, oracle_what);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
