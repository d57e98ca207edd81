#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace batchsim;
using testsup::make_request;

namespace {

ProfileSet two_layer_1013() {
  // Two layers: h_k(1) = 10, h_k(2) = 13 each.
  return testsup::uniform_profile(2, {{1, 10.0}, {2, 13.0}}, 90);
}

}  // namespace

TEST_CASE("drop keeps a request whose deadline equals the clock") {
  std::vector<Request> reqs{make_request(1, 0.0, 1, 100.0)};
  auto [kept, dropped] = drop_expired(reqs, 100.0);
  CHECK(kept.size() == 1);
  CHECK(dropped.empty());
}

TEST_CASE("drop removes everything once deadlines pass") {
  std::vector<Request> reqs{make_request(1, 0.0, 1, 50.0), make_request(2, 0.0, 1, 60.0)};
  auto [kept, dropped] = drop_expired(reqs, 61.0);
  CHECK(kept.empty());
  REQUIRE(dropped.size() == 2);
  CHECK(dropped[0].state == RequestState::dropped);
}

TEST_CASE("drop partitions a mixed set preserving order") {
  std::vector<Request> reqs{make_request(1, 0.0, 1, 50.0), make_request(2, 0.0, 1, 150.0),
                            make_request(3, 0.0, 1, 40.0), make_request(4, 0.0, 1, 160.0)};
  auto [kept, dropped] = drop_expired(reqs, 100.0);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].id == 2);
  CHECK(kept[1].id == 4);
  REQUIRE(dropped.size() == 2);
  CHECK(dropped[0].id == 1);
  CHECK(dropped[1].id == 3);
}

TEST_CASE("drop is idempotent") {
  std::vector<Request> reqs{make_request(1, 0.0, 1, 50.0), make_request(2, 0.0, 1, 150.0)};
  auto [kept1, dropped1] = drop_expired(reqs, 100.0);
  auto [kept2, dropped2] = drop_expired(kept1, 100.0);
  REQUIRE(kept2.size() == kept1.size());
  for (std::size_t i = 0; i < kept1.size(); ++i) CHECK(kept2[i].id == kept1[i].id);
  CHECK(dropped2.empty());
}

TEST_CASE("edf batches jobs whose deadlines are loose") {
  const auto ps = two_layer_1013();
  std::vector<Request> reqs{make_request(1, 0.0, 1, 500.0), make_request(2, 0.0, 1, 600.0)};
  const auto sched = edf_batch(reqs, ps, 90, 0.0);
  REQUIRE(sched.segments.size() == 1);
  CHECK(sched.segments[0].members.size() == 2);
  CHECK(sched.tardy_count == 0);
}

TEST_CASE("edf keeps a tight job alone when batching would make it late") {
  const auto ps = two_layer_1013();
  // Solo finishes at 20; batching pushes both to 26 > 25.
  std::vector<Request> reqs{make_request(1, 0.0, 1, 25.0), make_request(2, 0.0, 1, 1000.0)};
  const auto sched = edf_batch(reqs, ps, 90, 0.0);
  REQUIRE(sched.segments.size() == 2);
  CHECK(sched.segments[0].members == std::vector<RequestId>{1});
  CHECK(sched.segments[0].finish_offset == 20.0);
  CHECK(sched.segments[1].members == std::vector<RequestId>{2});
  CHECK(sched.segments[1].finish_offset == 40.0);
  CHECK(sched.tardy_count == 0);
}

TEST_CASE("edf on an empty set is empty") {
  const auto ps = two_layer_1013();
  const auto sched = edf_batch(std::vector<Request>{}, ps, 90, 0.0);
  CHECK(sched.segments.empty());
  CHECK(sched.objective == 0.0);
}

TEST_CASE("edf never makes an admitted non-opener late") {
  SplitMix64 rng(321);
  for (int trial = 0; trial < 60; ++trial) {
    const auto inst = random_instance(rng, 7, 4, TableStyle::subadditive, true, 0.0);
    const auto sched = edf_batch(inst.requests, inst.profile, 90, 0.0);
    // Build deadline-sorted order to identify pass openers.
    std::vector<Request> order(inst.requests);
    std::sort(order.begin(), order.end(), [](const Request& a, const Request& b) {
      if (a.deadline != b.deadline) return a.deadline < b.deadline;
      return arrives_before(a, b);
    });
    for (const auto& seg : sched.segments) {
      // The opener is the member earliest in deadline order.
      RequestId opener = seg.members.front();
      std::size_t best_rank = order.size();
      for (RequestId id : seg.members) {
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
          if (order[rank].id == id && rank < best_rank) {
            best_rank = rank;
            opener = id;
          }
        }
      }
      for (RequestId id : seg.members) {
        if (id == opener) continue;
        for (const Request& r : inst.requests) {
          if (r.id == id) CHECK(seg.finish_offset <= r.deadline);
        }
      }
    }
  }
}

TEST_CASE("edf respects the batch bound") {
  const auto ps = testsup::uniform_profile(1, {{1, 5.0}, {2, 6.0}, {3, 7.0}}, 3);
  std::vector<Request> reqs;
  for (int i = 1; i <= 5; ++i) reqs.push_back(make_request(i, 0.0, 1, 1000.0));
  const auto sched = edf_batch(reqs, ps, 2, 0.0);
  for (const auto& seg : sched.segments) {
    CHECK(seg.max_layer_batch <= 2);
  }
}

TEST_CASE("with no deadlines the tardy DP matches the completion-time DP") {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = random_instance(rng, 7, 4, TableStyle::arbitrary);
    const int n = static_cast<int>(inst.requests.size());
    const auto tardy = tardy_dp(inst.requests, inst.profile, 0, n, 0.0);
    const auto time_opt = compute_schedule(inst.requests, inst.profile, 0, n);
    CHECK(tardy.tardy_count == 0);
    CHECK(tardy.objective == time_opt.objective);
  }
}

TEST_CASE("splitting saves a job that batching would make tardy") {
  const auto ps = two_layer_1013();
  // Merged both finish at 26: second job (deadline 25) tardy. Split: 20 / 40,
  // first job (deadline 45) fine, second tardy either way? No: sort by
  // arrival; job 1 deadline 25 finishes at 20 alone, job 2 deadline 45
  // finishes at 40. Tardy 0 versus 1 merged.
  std::vector<Request> reqs{make_request(1, 0.0, 1, 25.0), make_request(2, 1.0, 1, 45.0)};
  const auto sched = tardy_dp(reqs, ps, 0, 90, 0.0);
  CHECK(sched.tardy_count == 0);
  REQUIRE(sched.segments.size() == 2);
  CHECK(sched.drop_marks.empty());
}

TEST_CASE("tardy DP matches the brute-force minimum on random instances") {
  SplitMix64 rng(888);
  for (int trial = 0; trial < 60; ++trial) {
    const auto inst = random_instance(rng, 8, 4, TableStyle::arbitrary, true, 0.0);
    const int n = static_cast<int>(inst.requests.size());
    const auto dp = tardy_dp(inst.requests, inst.profile, 0, n, 0.0);
    const auto brute = brute_force_min_tardy(inst.requests, inst.profile, 0, n, 0.0);
    INFO("trial " << trial);
    REQUIRE(dp.tardy_count == brute.tardy);
    REQUIRE(dp.objective == brute.objective);
  }
}

TEST_CASE("predicted-tardy jobs are marked for dropping") {
  const auto ps = two_layer_1013();
  std::vector<Request> reqs{make_request(1, 0.0, 1, 15.0)};  // cannot make 20
  const auto sched = tardy_dp(reqs, ps, 0, 90, 0.0);
  CHECK(sched.tardy_count == 1);
  REQUIRE(sched.drop_marks.size() == 1);
  CHECK(sched.drop_marks[0] == 1);
}

TEST_CASE("tardy DP accounts for an elapsed prefix offset") {
  const auto ps = two_layer_1013();
  std::vector<Request> reqs{make_request(1, 0.0, 1, 25.0)};
  CHECK(tardy_dp(reqs, ps, 0, 90, 0.0).tardy_count == 0);
  CHECK(tardy_dp(reqs, ps, 0, 90, 0.0, {}, 10.0).tardy_count == 1);  // 10 + 20 > 25
}

TEST_CASE("tardy DP beats batching EDF in aggregate") {
  // Neither is optimal over all batched schedules: EDF may form batches from
  // non-adjacent arrivals, which occasionally saves a job the segment DP
  // cannot. The comparison is therefore statistical, and the DP should win
  // far more often than it loses.
  SplitMix64 rng(3666);
  int edf_better = 0;
  int dp_better = 0;
  double dp_total = 0;
  double edf_total = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const auto inst = random_instance(rng, 8, 4, TableStyle::subadditive, true, 0.0);
    const int n = static_cast<int>(inst.requests.size());
    const auto dp = tardy_dp(inst.requests, inst.profile, 0, n, 0.0);
    const auto edf = edf_batch(inst.requests, inst.profile, n, 0.0);
    if (edf.tardy_count < dp.tardy_count) ++edf_better;
    if (dp.tardy_count < edf.tardy_count) ++dp_better;
    dp_total += dp.tardy_count;
    edf_total += edf.tardy_count;
  }
  CHECK(dp_total <= edf_total);
  CHECK(dp_better > edf_better);
}
