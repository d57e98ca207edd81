#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace batchsim;
using testsup::make_request;

TEST_CASE("single request at layer 1 validates cleanly") {
  std::vector<Request> reqs{make_request(1, 1.0, 1)};
  const auto report = validate_request_set(reqs, 5);
  CHECK(report.ok());
}

TEST_CASE("later arrival at a deeper layer violates FIFO ordering") {
  std::vector<Request> reqs{make_request(1, 1.0, 1), make_request(2, 2.0, 3)};
  const auto report = validate_request_set(reqs, 5);
  REQUIRE(report.issues.size() == 1);
  CHECK(report.issues[0].kind == ValidationIssue::Kind::fifo_violation);
  CHECK(report.issues[0].request == 2);
}

TEST_CASE("non-increasing layers along arrival order are valid") {
  std::vector<Request> reqs{make_request(1, 1.0, 5), make_request(2, 2.0, 2),
                            make_request(3, 3.0, 2)};
  CHECK(validate_request_set(reqs, 5).ok());
}

TEST_CASE("duplicate ids and out-of-range layers are flagged") {
  std::vector<Request> reqs{make_request(7, 1.0, 9), make_request(7, 2.0, 1)};
  const auto report = validate_request_set(reqs, 5);
  bool saw_dup = false;
  bool saw_range = false;
  for (const auto& issue : report.issues) {
    saw_dup |= issue.kind == ValidationIssue::Kind::duplicate_id;
    saw_range |= issue.kind == ValidationIssue::Kind::layer_out_of_range;
  }
  CHECK(saw_dup);
  CHECK(saw_range);
}

TEST_CASE("layer N+1 means finished and stays in range") {
  std::vector<Request> reqs{make_request(1, 0.0, 6)};
  CHECK(validate_request_set(reqs, 5).ok());
}

TEST_CASE("arrival ties break by id") {
  std::vector<Request> reqs{make_request(2, 1.0, 3), make_request(1, 1.0, 3)};
  sort_by_arrival(reqs);
  CHECK(reqs[0].id == 1);
  CHECK(reqs[1].id == 2);
}

TEST_CASE("random valid request sets stay FIFO-ordered after sorting") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_instance(rng, 8, 6, TableStyle::arbitrary);
    CHECK(validate_request_set(inst.requests,
                               inst.profile.dnns[0].num_layers())
              .ok());
  }
}
