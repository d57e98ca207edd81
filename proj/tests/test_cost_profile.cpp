#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace batchsim;
using Catch::Matchers::WithinAbs;

TEST_CASE("lookup is exact on measured grid points") {
  const auto ps = testsup::uniform_profile(1, {{1, 10.0}, {10, 12.0}}, 90);
  CHECK(ps.lookup(0, 1, 1) == 10.0);
  CHECK(ps.lookup(0, 1, 10) == 12.0);
}

TEST_CASE("lookup interpolates linearly between measured batch sizes") {
  const auto ps = testsup::uniform_profile(1, {{1, 10.0}, {10, 12.0}}, 90);
  CHECK_THAT(ps.lookup(0, 1, 4), WithinAbs(10.0 + 2.0 * 3.0 / 9.0, 1e-12));
}

TEST_CASE("batch sizes above the bound are infeasible") {
  const auto ps = testsup::uniform_profile(1, {{1, 10.0}, {90, 12.0}}, 90);
  CHECK(ps.lookup(0, 1, 90) == 12.0);
  CHECK(ps.lookup(0, 1, 91) == kInfeasible);
}

TEST_CASE("sub-additivity report flags violating pairs only") {
  CostTable bad(1, 4);
  bad.add_point(1, 1, 10.0);
  bad.add_point(1, 2, 25.0);
  bad.finalize();
  auto violations = check_subadditivity(bad);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].layer == 1);
  CHECK(violations[0].b1 == 1);
  CHECK(violations[0].b2 == 1);
  CHECK(violations[0].excess == 5.0);

  CostTable good(1, 4);
  good.add_point(1, 1, 10.0);
  good.add_point(1, 2, 12.0);
  good.finalize();
  CHECK(check_subadditivity(good).empty());

  // Linear tables sit exactly on the boundary.
  CostTable linear(1, 8);
  for (int b = 1; b <= 8; ++b) linear.add_point(1, b, 3.0 * b);
  linear.finalize();
  CHECK(check_subadditivity(linear).empty());
}

TEST_CASE("profile files load with sparse grids") {
  const auto ps = load_profile_string(R"({
    "max_batch": 90,
    "components": [{"id": "c", "layers": [
      {"name": "a", "runtime_ms": [[1, 5.0], [10, 6.0]]},
      {"name": "b", "runtime_ms": [[1, 7.0], [10, 9.0]]}]}],
    "dnns": [{"id": "m", "stages": ["c"]}]})");
  CHECK(ps.dnns.size() == 1);
  CHECK(ps.dnns[0].num_layers() == 2);
  CHECK(ps.lookup(0, 2, 10) == 9.0);
}

TEST_CASE("a layer without a batch-1 measurement is rejected by name") {
  CHECK_THROWS_WITH(load_profile_string(R"({
    "max_batch": 90,
    "components": [{"id": "c", "layers": [
      {"name": "l1", "runtime_ms": [[1, 5.0]]},
      {"name": "l2", "runtime_ms": [[1, 5.0]]},
      {"name": "l3", "runtime_ms": [[2, 5.0]]}]}],
    "dnns": [{"id": "m", "stages": ["c"]}]})"),
                    Catch::Matchers::ContainsSubstring("l3"));
}

TEST_CASE("negative runtimes and unknown components are rejected") {
  CHECK_THROWS(load_profile_string(R"({
    "components": [{"id": "c", "layers": [{"runtime_ms": [[1, -5.0]]}]}],
    "dnns": [{"id": "m", "stages": ["c"]}]})"));
  CHECK_THROWS(load_profile_string(R"({
    "components": [{"id": "c", "layers": [{"runtime_ms": [[1, 5.0]]}]}],
    "dnns": [{"id": "m", "stages": ["zz"]}]})"));
}

TEST_CASE("a 24/28 ms profile reports those aggregate runtimes") {
  std::vector<std::vector<std::pair<int, Ms>>> layers;
  for (int k = 0; k < 4; ++k) {
    layers.push_back({{1, 6.0}, {10, 7.0}});
  }
  const auto ps = testsup::profile_from_grids(layers, 90);
  CHECK(ps.single_request_runtime(0) == 24.0);
  Ms batch10 = 0;
  for (int k = 1; k <= 4; ++k) batch10 += ps.lookup(0, k, 10);
  CHECK(batch10 == 28.0);
}

TEST_CASE("symmetric layers split into equal groups") {
  const auto ps = testsup::uniform_profile(4, {{1, 10.0}}, 90);
  const auto groups = group_layers(ps, 0, 2);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].first == 1);
  CHECK(groups[0].last == 2);
  CHECK(groups[1].first == 3);
  CHECK(groups[1].last == 4);
}

TEST_CASE("one group spans all layers") {
  const auto ps = testsup::uniform_profile(6, {{1, 3.0}}, 90);
  const auto groups = group_layers(ps, 0, 1);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].first == 1);
  CHECK(groups[0].last == 6);
}

TEST_CASE("greedy accumulation with uneven layers still yields G groups") {
  std::vector<std::vector<std::pair<int, Ms>>> layers;
  for (Ms h : {30.0, 5.0, 5.0, 20.0, 40.0}) layers.push_back({{1, h}});
  const auto ps = testsup::profile_from_grids(layers, 90);
  const auto groups = group_layers(ps, 0, 5);
  REQUIRE(groups.size() == 5);
  for (int g = 0; g < 5; ++g) {
    CHECK(groups[static_cast<std::size_t>(g)].first == g + 1);
    CHECK(groups[static_cast<std::size_t>(g)].last == g + 1);
  }
  // With the 100/3 ms target the greedy closes {1,2}, {3,4}, {5}.
  const auto three = group_layers(ps, 0, 3);
  REQUIRE(three.size() == 3);
  CHECK(three[0].last == 2);
  CHECK(three[1].last == 4);
  CHECK(three[2].last == 5);
}

TEST_CASE("more groups than layers is an error") {
  const auto ps = testsup::uniform_profile(3, {{1, 1.0}}, 90);
  CHECK_THROWS(group_layers(ps, 0, 4));
}

TEST_CASE("group boundaries always partition the layer range") {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = random_instance(rng, 4, 12, TableStyle::arbitrary);
    const int n_layers = inst.profile.dnns[0].num_layers();
    const int g = rng.uniform_int(1, n_layers);
    const auto groups = group_layers(inst.profile, 0, g);
    REQUIRE(static_cast<int>(groups.size()) == g);
    int expect = 1;
    for (const auto& grp : groups) {
      CHECK(grp.first == expect);
      CHECK(grp.last >= grp.first);
      expect = grp.last + 1;
    }
    CHECK(expect == n_layers + 1);
  }
}

TEST_CASE("reference profiles reproduce the measured batching reductions") {
  const struct {
    const char* name;
    double reduction;
  } expected[] = {{"vgg16", 0.63}, {"resnet50", 0.81}, {"fcn", 0.57},
                  {"googlenet", 0.88}, {"ssd", 0.67}};
  for (const auto& e : expected) {
    const auto ps = load_profile(testsup::data_path(std::string("profiles/") + e.name + ".json"));
    const int dnn = ps.dnn_index(e.name);
    const Ms h1 = ps.single_request_runtime(dnn);
    Ms h10 = 0;
    for (int k = 1; k <= ps.dnns[static_cast<std::size_t>(dnn)].num_layers(); ++k) {
      h10 += ps.lookup(dnn, k, 10);
    }
    const double reduction = 1.0 - (h10 / 10.0) / h1;
    INFO(e.name);
    CHECK_THAT(reduction, WithinAbs(e.reduction, 0.01));
  }
}

TEST_CASE("reference fcn and vgg16 profiles keep their non-monotonic jumps") {
  const auto fcn = load_profile(testsup::data_path("profiles/fcn.json"));
  Ms t10 = 0, t11 = 0;
  for (int k = 1; k <= fcn.dnns[0].num_layers(); ++k) {
    t10 += fcn.lookup(0, k, 10);
    t11 += fcn.lookup(0, k, 11);
  }
  CHECK(t11 / 11.0 > t10 / 10.0);

  const auto vgg = load_profile(testsup::data_path("profiles/vgg16.json"));
  Ms t17 = 0, t18 = 0;
  for (int k = 1; k <= vgg.dnns[0].num_layers(); ++k) {
    t17 += vgg.lookup(0, k, 17);
    t18 += vgg.lookup(0, k, 18);
  }
  CHECK(t18 / 18.0 > t17 / 17.0);
}
