#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace batchsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("splitmix64 golden sequence is stable") {
  SplitMix64 g(42);
  CHECK(g.next_u64() == 0xbdd732262feb6e95ULL);
  CHECK(g.next_u64() == 0x28efe333b266f103ULL);
  CHECK(g.next_u64() == 0x47526757130f9f52ULL);
  CHECK(g.next_u64() == 0x581ce1ff0e4ae394ULL);
}

TEST_CASE("per-purpose streams are independent and reproducible") {
  SplitMix64 a = SplitMix64::stream(42, kArrivalStream);
  SplitMix64 b = SplitMix64::stream(42, kSizeStream);
  CHECK_THAT(a.next_double(), WithinAbs(0.37516029192677325, 1e-15));
  CHECK_THAT(b.next_double(), WithinAbs(0.82004330904731693, 1e-15));
}

TEST_CASE("constant arrivals are evenly spaced") {
  WorkloadSpec spec;
  spec.process = ArrivalProcess::constant;
  spec.rate = 10.0;
  spec.count = 5;
  const auto arrivals = generate_arrivals(spec);
  REQUIRE(arrivals.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK_THAT(arrivals[static_cast<std::size_t>(i)].time, WithinAbs(100.0 * (i + 1), 1e-9));
  }
}

TEST_CASE("poisson arrivals hit the requested mean rate") {
  WorkloadSpec spec;
  spec.process = ArrivalProcess::poisson;
  spec.rate = 100.0;
  spec.count = 5000;
  spec.seed = 7;
  const auto arrivals = generate_arrivals(spec);
  const Ms mean_gap = arrivals.back().time / 5000.0;
  CHECK_THAT(mean_gap, WithinRel(10.0, 0.05));  // 10 ms at 100 req/s
}

TEST_CASE("pareto arrivals follow the documented scale parameterization") {
  WorkloadSpec spec;
  spec.process = ArrivalProcess::pareto;
  spec.rate = 100.0;
  spec.count = 20000;
  spec.seed = 11;
  const auto arrivals = generate_arrivals(spec);
  // kappa = (alpha-1)/rate, so E[gap] = alpha/rate = 12.5 ms. Heavy tails make
  // the sample mean noisy; allow a wide band.
  const Ms mean_gap = arrivals.back().time / 20000.0;
  CHECK_THAT(mean_gap, WithinRel(12.5, 0.25));
  // Minimum gap is the scale kappa.
  Ms prev = 0;
  Ms min_gap = 1e18;
  for (const auto& a : arrivals) {
    min_gap = std::min(min_gap, a.time - prev);
    prev = a.time;
  }
  CHECK(min_gap >= (spec.pareto_alpha - 1.0) / spec.rate * 1000.0 - 1e-9);
}

TEST_CASE("image sizes stay in the sampled range") {
  WorkloadSpec spec;
  spec.count = 2000;
  spec.seed = 3;
  const auto arrivals = generate_arrivals(spec);
  for (const auto& a : arrivals) {
    CHECK(a.size_bits >= 120000);
    CHECK(a.size_bits <= 330000);
  }
}

TEST_CASE("arrival times are non-decreasing") {
  for (auto process : {ArrivalProcess::poisson, ArrivalProcess::pareto, ArrivalProcess::constant}) {
    WorkloadSpec spec;
    spec.process = process;
    spec.count = 500;
    spec.seed = 5;
    const auto arrivals = generate_arrivals(spec);
    Ms prev = 0;
    for (const auto& a : arrivals) {
      CHECK(a.time >= prev);
      prev = a.time;
    }
  }
}

TEST_CASE("identical seeds give identical workloads, different seeds differ") {
  WorkloadSpec spec;
  spec.count = 100;
  spec.seed = 9;
  const auto a = generate_arrivals(spec);
  const auto b = generate_arrivals(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].time == b[i].time);
    CHECK(a[i].size_bits == b[i].size_bits);
  }
  spec.seed = 10;
  const auto c = generate_arrivals(spec);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_diff |= a[i].time != c[i].time;
  CHECK(any_diff);
}

TEST_CASE("dnn mix fractions are respected") {
  WorkloadSpec spec;
  spec.count = 8000;
  spec.seed = 21;
  spec.dnn_mix = {{"a", 0.25}, {"b", 0.75}};
  const auto arrivals = generate_arrivals(spec);
  int first = 0;
  for (const auto& a : arrivals) first += a.dnn == 0 ? 1 : 0;
  CHECK_THAT(static_cast<double>(first) / 8000.0, WithinAbs(0.25, 0.02));
}

TEST_CASE("transmission at constant throughput is size over rate") {
  NetworkTrace trace({{0.0, 10000.0}});  // 10 Mbps = 10000 bits/ms
  CHECK_THAT(transmission_delay(1000000, 0.0, trace), WithinAbs(100.0, 1e-9));
}

TEST_CASE("zero-size transfers take zero time") {
  NetworkTrace trace({{0.0, 10000.0}});
  CHECK(transmission_delay(0, 5.0, trace) == 0.0);
}

TEST_CASE("transfers integrate across a throughput step") {
  // 10 Mbps for 50 ms, then 4 Mbps: 2 Mbit leaves 1.5 Mbit after the step.
  NetworkTrace trace({{0.0, 10000.0}, {50.0, 4000.0}, {100000.0, 4000.0}});
  const Ms delay = transmission_delay(2000000, 0.0, trace);
  CHECK_THAT(delay, WithinAbs(50.0 + 1500000.0 / 4000.0, 1e-9));
}

TEST_CASE("the trace wraps around when exhausted") {
  // Period 100 ms: 10 Mbps on [0,50), 4 on [50,100).
  NetworkTrace trace({{0.0, 10000.0}, {50.0, 4000.0}, {100.0, 10000.0}});
  CHECK(trace.throughput_at(120.0) == 10000.0);
  CHECK(trace.throughput_at(170.0) == 4000.0);
  // A long transfer spans several cycles.
  const Ms delay = transmission_delay(7000000, 0.0, trace);  // 7 Mbit
  // One full cycle carries 10000*50 + 4000*50 = 0.7 Mbit; ten cycles needed.
  CHECK_THAT(delay, WithinAbs(1000.0, 1e-6));
}

TEST_CASE("delay grows with size at a fixed start") {
  NetworkTrace trace({{0.0, 8000.0}, {30.0, 5000.0}, {60.0, 12000.0}, {90.0, 8000.0}});
  SplitMix64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t a = rng.uniform_int(1, 4000000);
    const std::int64_t b = rng.uniform_int(1, 4000000);
    const Ms start = rng.uniform(0.0, 200.0);
    const Ms da = transmission_delay(std::min(a, b), start, trace);
    const Ms db = transmission_delay(std::max(a, b), start, trace);
    CHECK(da <= db);
  }
}

TEST_CASE("scaling a trace multiplies throughput only") {
  NetworkTrace trace({{0.0, 4000.0}, {10.0, 20000.0}, {20.0, 4000.0}});
  const auto same = scale_trace(trace, 1.0);
  CHECK(same.points()[1].bits_per_ms == 20000.0);
  const auto ten = scale_trace(trace, 10.0);
  CHECK(ten.points()[0].bits_per_ms == 40000.0);
  CHECK(ten.points()[1].bits_per_ms == 200000.0);
  CHECK(ten.points()[1].time == 10.0);
  const auto half = scale_trace(trace, 0.5);
  CHECK(half.points()[0].bits_per_ms == 2000.0);
  CHECK_THROWS(scale_trace(trace, 0.0));
}

TEST_CASE("trace files parse and validate") {
  const auto trace = load_trace(testsup::data_path("traces/lte_uplink.csv"));
  CHECK(trace.points().size() > 1000);
  for (const auto& p : trace.points()) {
    CHECK(p.bits_per_ms >= 4000.0 - 1e-9);
    CHECK(p.bits_per_ms <= 20000.0 + 1e-9);
  }
  CHECK_THROWS(NetworkTrace({{0.0, 1000.0}, {0.0, 2000.0}}));  // non-increasing time
  CHECK_THROWS(NetworkTrace({{0.0, -5.0}}));                   // bad throughput
}
