#pragma once

// Request generation: Poisson / Pareto / constant inter-arrivals, DNN mix,
// image sizes. All randomness flows from one seed through per-purpose
// SplitMix64 streams, so changing e.g. the size range never perturbs the
// arrival sequence.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "batchsim/model.hpp"
#include "batchsim/rng.hpp"

namespace batchsim {

enum class ArrivalProcess { poisson, pareto, constant };

inline ArrivalProcess parse_process(const std::string& name) {
  if (name == "poisson") return ArrivalProcess::poisson;
  if (name == "pareto") return ArrivalProcess::pareto;
  if (name == "constant") return ArrivalProcess::constant;
  throw std::invalid_argument("unknown arrival process '" + name + "'");
}

inline const char* process_name(ArrivalProcess p) {
  switch (p) {
    case ArrivalProcess::poisson: return "poisson";
    case ArrivalProcess::pareto: return "pareto";
    default: return "constant";
  }
}

struct ArrivalRecord {
  Ms time = 0;  // generation time
  int dnn = 0;  // index into the mix (resolved to profile indices by callers)
  std::int64_t size_bits = 0;
};

struct WorkloadSpec {
  ArrivalProcess process = ArrivalProcess::poisson;
  double rate = 100.0;           // requests per second
  int count = 5000;
  double pareto_alpha = 1.25;    // scale kappa = (alpha - 1) / rate
  std::vector<std::pair<std::string, double>> dnn_mix = {};  // fractions, sum 1
  Ms relative_deadline = kNoDeadline;  // ms after generation
  std::uint64_t seed = 1;
  // Image sizes in bits, sampled uniformly unless a size trace overrides.
  std::int64_t size_lo_bits = 120000;   // 0.12 Mbit
  std::int64_t size_hi_bits = 330000;   // 0.33 Mbit
  std::vector<std::int64_t> size_trace; // cycled when non-empty
  // When non-empty, used verbatim instead of sampling (closed instances,
  // replayed traces); `count`, `process` and `rate` are ignored.
  std::vector<ArrivalRecord> explicit_arrivals;
};

// Stream tags; independent draws per concern.
inline constexpr std::uint64_t kArrivalStream = 1;
inline constexpr std::uint64_t kSizeStream = 2;
inline constexpr std::uint64_t kMixStream = 3;

inline std::vector<ArrivalRecord> generate_arrivals(const WorkloadSpec& spec) {
  if (!spec.explicit_arrivals.empty()) return spec.explicit_arrivals;
  if (spec.rate <= 0) throw std::invalid_argument("arrival rate must be positive");
  if (spec.count < 0) throw std::invalid_argument("request count must be >= 0");
  SplitMix64 arrivals = SplitMix64::stream(spec.seed, kArrivalStream);
  SplitMix64 sizes = SplitMix64::stream(spec.seed, kSizeStream);
  SplitMix64 mix = SplitMix64::stream(spec.seed, kMixStream);

  const double mean_gap_ms = 1000.0 / spec.rate;
  const double kappa_ms = (spec.pareto_alpha - 1.0) / spec.rate * 1000.0;

  std::vector<double> cumulative;
  double acc = 0;
  for (const auto& [name, fraction] : spec.dnn_mix) {
    acc += fraction;
    cumulative.push_back(acc);
  }
  if (!cumulative.empty() && (acc < 0.999 || acc > 1.001)) {
    throw std::invalid_argument("dnn mix fractions must sum to 1");
  }

  std::vector<ArrivalRecord> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  Ms t = 0;
  for (int i = 0; i < spec.count; ++i) {
    Ms gap = 0;
    switch (spec.process) {
      case ArrivalProcess::poisson:
        gap = arrivals.exponential(mean_gap_ms);
        break;
      case ArrivalProcess::pareto:
        gap = arrivals.pareto(spec.pareto_alpha, kappa_ms);
        break;
      case ArrivalProcess::constant:
        gap = mean_gap_ms;
        break;
    }
    t += gap;
    ArrivalRecord rec;
    rec.time = t;
    if (cumulative.size() > 1) {
      const double u = mix.next_double();
      rec.dnn = static_cast<int>(cumulative.size()) - 1;
      for (std::size_t d = 0; d < cumulative.size(); ++d) {
        if (u < cumulative[d]) {
          rec.dnn = static_cast<int>(d);
          break;
        }
      }
    }
    if (!spec.size_trace.empty()) {
      rec.size_bits = spec.size_trace[static_cast<std::size_t>(i) % spec.size_trace.size()];
    } else {
      rec.size_bits = static_cast<std::int64_t>(
          sizes.uniform(static_cast<double>(spec.size_lo_bits),
                        static_cast<double>(spec.size_hi_bits)));
    }
    out.push_back(rec);
  }
  return out;
}

// One integer per row, optionally headed by "size_bits".
inline std::vector<std::int64_t> load_size_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open size trace: " + path);
  std::vector<std::int64_t> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.find("size") != std::string::npos) continue;
    out.push_back(std::stoll(line));
  }
  if (out.empty()) throw std::runtime_error(path + ": empty size trace");
  return out;
}

}  // namespace batchsim
