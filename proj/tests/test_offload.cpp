#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace batchsim;
using Catch::Matchers::WithinAbs;

TEST_CASE("ewma with an equal sample is a fixed point") {
  CHECK(ewma_update(10.0, 10.0) == 10.0);
}

TEST_CASE("ewma weighs a new sample by 0.3") {
  CHECK_THAT(ewma_update(10.0, 20.0), WithinAbs(13.0, 1e-12));
}

TEST_CASE("ewma converges geometrically to a constant input") {
  NetworkEstimator est;
  est.update(100.0);  // first sample initializes
  CHECK(est.bits_per_ms() == 100.0);
  double err = 60.0;
  est = NetworkEstimator{};
  est.update(40.0);
  for (int i = 0; i < 20; ++i) {
    const double before = std::abs(est.bits_per_ms() - 100.0);
    est.update(100.0);
    const double after = std::abs(est.bits_per_ms() - 100.0);
    CHECK_THAT(after, WithinAbs(0.7 * before, 1e-9));
  }
  (void)err;
}

TEST_CASE("a local run that meets the deadline stays local") {
  // Empty client queue, 230 ms local runtime, 300 ms deadline.
  CHECK(decide_binary(230.0, 20.0, 60.0, 300.0) == OffloadDecision::local);
}

TEST_CASE("a backlogged client offloads when the server is faster") {
  // 150 ms backlog + 230 ms runtime misses the deadline; remote is 80 ms.
  CHECK(decide_binary(380.0, 20.0, 60.0, 300.0) == OffloadDecision::offload);
}

TEST_CASE("a slow server loses to a late local run") {
  // Both miss the deadline; the lower delay wins.
  CHECK(decide_binary(380.0, 20.0, 400.0, 300.0) == OffloadDecision::local);
}

TEST_CASE("remote wins ties") {
  CHECK(decide_binary(100.0, 40.0, 60.0, 50.0) == OffloadDecision::offload);
}

TEST_CASE("the binary decision is scale-invariant") {
  SplitMix64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const Ms local = rng.uniform(1.0, 500.0);
    const Ms tx = rng.uniform(0.0, 100.0);
    const Ms server = rng.uniform(1.0, 500.0);
    const Ms deadline = rng.uniform(1.0, 500.0);
    const double c = rng.uniform(0.1, 10.0);
    CHECK(decide_binary(local, tx, server, deadline) ==
          decide_binary(c * local, c * tx, c * server, c * deadline));
  }
}

TEST_CASE("an infinitely fast client always runs locally") {
  CHECK(decide_binary(0.0, 1.0, 1.0, 100.0) == OffloadDecision::local);
  // And a uselessly slow client with a reachable server always offloads.
  CHECK(decide_binary(1e12, 1.0, 1.0, 100.0) == OffloadDecision::offload);
}

TEST_CASE("an idle server pulls the whole request when it is faster per layer") {
  // t_s(k) = 0 for all k, fast network, server much faster than the client.
  const int g = 5;
  std::vector<Ms> ready(g + 1), wait(g + 1, 0.0), rest(g + 1), payload(g + 1, 1.0);
  for (int k = 0; k <= g; ++k) {
    ready[static_cast<std::size_t>(k)] = 20.0 * k;
    rest[static_cast<std::size_t>(k)] = 2.0 * (g - k);
  }
  const auto d = decide_partial(ready, wait, rest, payload);
  CHECK(d.groups_local == 0);
}

TEST_CASE("local prefixes hide a server backlog") {
  // Server busy for 50 ms, client groups 20 ms each, server groups 15 ms,
  // negligible payload delays: k = 3 hides the wait.
  const int g = 5;
  std::vector<Ms> ready(g + 1), wait(g + 1, 50.0), rest(g + 1), payload(g + 1, 0.0);
  for (int k = 0; k <= g; ++k) {
    ready[static_cast<std::size_t>(k)] = 20.0 * k;
    rest[static_cast<std::size_t>(k)] = 15.0 * (g - k);
  }
  const auto d = decide_partial(ready, wait, rest, payload);
  CHECK(d.groups_local == 3);
  CHECK_THAT(d.estimate, WithinAbs(90.0, 1e-12));
  // The hide-the-wait rule picks the same k here.
  const auto alt = decide_partial(ready, wait, rest, payload, PartialRule::first_hide_wait);
  CHECK(alt.groups_local == 3);
}

TEST_CASE("k = G degenerates to fully local") {
  const int g = 3;
  std::vector<Ms> ready{0.0, 10.0, 20.0, 30.0};
  std::vector<Ms> wait(g + 1, 1000.0);
  std::vector<Ms> rest{40.0, 30.0, 20.0, 0.0};
  std::vector<Ms> payload(g + 1, 5.0);
  const auto d = decide_partial(ready, wait, rest, payload);
  CHECK(d.groups_local == g);
  CHECK(d.estimate == 30.0);
}

TEST_CASE("the chosen k is the argmin of the enumerated estimates") {
  SplitMix64 rng(15);
  for (int trial = 0; trial < 500; ++trial) {
    const int g = rng.uniform_int(1, 8);
    std::vector<Ms> ready(static_cast<std::size_t>(g) + 1);
    std::vector<Ms> wait(static_cast<std::size_t>(g) + 1);
    std::vector<Ms> rest(static_cast<std::size_t>(g) + 1);
    std::vector<Ms> payload(static_cast<std::size_t>(g) + 1);
    Ms acc = rng.uniform(0.0, 50.0);
    for (int k = 0; k <= g; ++k) {
      const std::size_t i = static_cast<std::size_t>(k);
      ready[i] = acc;
      acc += rng.uniform(1.0, 40.0);
      wait[i] = rng.uniform(0.0, 150.0);
      rest[i] = rng.uniform(0.0, 120.0);
      payload[i] = rng.uniform(0.0, 60.0);
    }
    const auto d = decide_partial(ready, wait, rest, payload);
    // Independent enumeration of the completion estimate.
    Ms best = kInfeasible;
    int best_k = -1;
    for (int k = 0; k <= g; ++k) {
      const std::size_t i = static_cast<std::size_t>(k);
      Ms est;
      if (k == g) {
        est = ready[i];
      } else {
        est = std::max(ready[i] + payload[i], wait[i]) + rest[i];
      }
      if (est < best) {
        best = est;
        best_k = k;
      }
    }
    INFO("trial " << trial);
    REQUIRE(d.groups_local == best_k);
    REQUIRE(d.estimate == best);
  }
}

TEST_CASE("client profiles load with group runtimes and payloads") {
  const auto cp = load_client_profile(testsup::data_path("clients/jetson_nano.json"));
  CHECK(cp.compress_ms == 1.5);
  CHECK(cp.decompress_ms == 0.6);
  const auto& vgg = cp.for_dnn("vgg16");
  CHECK(vgg.group_count() == 5);
  CHECK_THAT(vgg.full_runtime(), WithinAbs(230.0, 1e-9));
  CHECK(vgg.prefix_runtime(2) == 92.0);
  CHECK(cp.for_dnn("fcn").full_runtime() == 240.0);
  CHECK(cp.for_dnn("ssd").full_runtime() == 270.0);
  CHECK_THROWS(cp.for_dnn("nonexistent"));
}

TEST_CASE("group runtimes sum to the full runtime") {
  const auto cp = load_client_profile(testsup::data_path("clients/jetson_nano.json"));
  for (const auto& d : cp.dnns) {
    Ms sum = 0;
    for (int k = 0; k < d.group_count(); ++k) {
      sum += d.group_runtime_ms[static_cast<std::size_t>(k)];
    }
    CHECK_THAT(sum, WithinAbs(d.full_runtime(), d.full_runtime() * 0.01));
  }
}
