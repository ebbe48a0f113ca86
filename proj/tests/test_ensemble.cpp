#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <vector>

#include "occlass/ensemble.hpp"
#include "occlass/hierarchy.hpp"
#include "occlass/rng.hpp"
#include "occlass/taxonomy.hpp"

using namespace occlass;

namespace {

Taxonomy toy2() {
  return Taxonomy::from_rows({{"1", "ROOT", "section a"},
                              {"2", "ROOT", "section b"},
                              {"11", "1", "a1"},
                              {"12", "1", "a2"},
                              {"21", "2", "b1"}},
                             Scheme::Ons2010);
}

MemberScorer always(std::vector<double> scores) {
  return [scores](const JobAd&) { return std::optional<std::vector<double>>(scores); };
}

MemberScorer never() {
  return [](const JobAd&) { return std::optional<std::vector<double>>(); };
}

JobAd ad() {
  JobAd a;
  a.id = "ad-1";
  a.title = "welder";
  return a;
}

std::vector<size_t> ranking(const std::vector<double>& scores) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return order;
}

EnsembleError::Kind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const EnsembleError& e) {
    return e.kind;
  }
  FAIL("expected an EnsembleError");
  return EnsembleError::Kind::Config;
}

}  // namespace

TEST_SUITE("ensemble") {
  TEST_CASE("single-member fusion is the member's own distribution") {
    std::vector<std::vector<double>> members{{0.2, 0.3, 0.5}};
    auto fused = fuse_scores(members);
    CHECK(fused[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(fused[1] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(fused[2] == doctest::Approx(0.5).epsilon(1e-12));

    // Unnormalized emissions are normalized before fusing.
    std::vector<std::vector<double>> raw{{2.0, 3.0, 5.0}};
    auto from_raw = fuse_scores(raw);
    for (size_t i = 0; i < fused.size(); ++i) {
      CHECK(from_raw[i] == doctest::Approx(fused[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("weighted fusion matches hand arithmetic and the heavier vote wins") {
    std::vector<std::vector<double>> members{{0.6, 0.4}, {0.2, 0.8}};
    std::vector<double> w{2.0, 1.0};
    auto fused = fuse_scores(members, w);
    CHECK(fused[0] == doctest::Approx(1.4 / 3.0).epsilon(1e-12));
    CHECK(fused[1] == doctest::Approx(1.6 / 3.0).epsilon(1e-12));

    std::vector<std::vector<double>> onehot{{1.0, 0.0}, {0.0, 1.0}};
    auto heavier = fuse_scores(onehot, w);
    CHECK(argmax_position(heavier) == 0);
    CHECK(heavier[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("scaling every weight by a constant changes nothing") {
    std::vector<std::vector<double>> members{{0.5, 0.1, 0.4}, {0.1, 0.6, 0.3}, {0.3, 0.3, 0.4}};
    std::vector<double> w{1.0, 2.0, 3.0};
    std::vector<double> w_scaled{0.25, 0.5, 0.75};
    auto a = fuse_scores(members, w);
    auto b = fuse_scores(members, w_scaled);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }

  TEST_CASE("fused scores form a distribution for random members") {
    Rng rng(0xf05e);
    for (int trial = 0; trial < 200; ++trial) {
      size_t n_members = 1 + rng.below(4);
      size_t n_classes = 2 + rng.below(6);
      std::vector<std::vector<double>> members(n_members);
      std::vector<double> w(n_members);
      for (size_t i = 0; i < n_members; ++i) {
        members[i].resize(n_classes);
        for (double& v : members[i]) v = rng.next_double() * 3.0;
        w[i] = 0.1 + rng.next_double() * 5.0;
      }
      auto fused = fuse_scores(members, w);
      double sum = 0.0;
      for (double v : fused) {
        REQUIRE(v >= 0.0);
        sum += v;
      }
      REQUIRE(std::fabs(sum - 1.0) < 1e-9);
    }
  }

  TEST_CASE("removing a uniform member never changes the ranking") {
    Rng rng(0xdead);
    for (int trial = 0; trial < 200; ++trial) {
      size_t n_classes = 3 + rng.below(5);
      std::vector<std::vector<double>> members(2);
      std::vector<double> w{0.5 + rng.next_double(), 0.5 + rng.next_double()};
      for (auto& m : members) {
        m.resize(n_classes);
        for (double& v : m) v = rng.next_open();
      }
      auto without = fuse_scores(members, w);

      members.push_back(std::vector<double>(n_classes, 1.0 / static_cast<double>(n_classes)));
      std::vector<double> w3 = w;
      w3.push_back(0.5 + rng.next_double());
      auto with = fuse_scores(members, w3);

      REQUIRE(ranking(with) == ranking(without));
    }
  }

  TEST_CASE("fusion rejects malformed input") {
    std::vector<std::vector<double>> none;
    CHECK(kind_of([&] { fuse_scores(none); }) == EnsembleError::Kind::Config);

    std::vector<std::vector<double>> two{{0.5, 0.5}, {0.5, 0.5}};
    std::vector<double> one_w{1.0};
    CHECK(kind_of([&] { fuse_scores(two, one_w); }) == EnsembleError::Kind::Config);
    std::vector<double> zero_w{1.0, 0.0};
    CHECK(kind_of([&] { fuse_scores(two, zero_w); }) == EnsembleError::Kind::Config);

    std::vector<std::vector<double>> ragged{{0.5, 0.5}, {0.2, 0.3, 0.5}};
    CHECK(kind_of([&] { fuse_scores(ragged); }) == EnsembleError::Kind::DimensionMismatch);
    std::vector<std::vector<double>> negative{{0.5, -0.5}};
    CHECK(kind_of([&] { fuse_scores(negative); }) == EnsembleError::Kind::DimensionMismatch);
    std::vector<std::vector<double>> empty_vec{{}};
    CHECK(kind_of([&] { fuse_scores(empty_vec); }) == EnsembleError::Kind::DimensionMismatch);
  }

  TEST_CASE("a single registered member predicts exactly like that member") {
    Taxonomy tax = toy2();
    Ensemble ens(&tax);
    ens.add_member({"title", 1.0, always({0.1, 0.7, 0.2})});
    auto pred = ens.predict(ad());
    CHECK(pred.leaf_code == "12");
    CHECK(pred.fused[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(pred.fused[1] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(pred.fused[2] == doctest::Approx(0.2).epsilon(1e-12));
    REQUIRE(pred.votes.size() == 1);
    CHECK(pred.votes[0].feature == "title");
    CHECK_FALSE(pred.votes[0].absent);
    CHECK(pred.votes[0].leaf_position == 1);
    CHECK(pred.votes[0].confidence == doctest::Approx(0.7));
  }

  TEST_CASE("the heavier of two opposed members carries the prediction") {
    Taxonomy tax = toy2();
    Ensemble ens(&tax);
    ens.add_member({"title", 2.0, always({0.0, 0.0, 1.0})});
    ens.add_member({"skills", 1.0, always({1.0, 0.0, 0.0})});
    auto pred = ens.predict(ad());
    CHECK(pred.leaf_code == "21");
    CHECK(pred.fused[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(pred.fused[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(pred.votes[0].leaf_position == 2);
    CHECK(pred.votes[1].leaf_position == 0);
  }

  TEST_CASE("an absent feature contributes a uniform distribution and is flagged") {
    Taxonomy tax = toy2();
    Ensemble ens(&tax);
    ens.add_member({"title", 1.0, always({0.0, 1.0, 0.0})});
    ens.add_member({"skills", 1.0, never()});
    auto pred = ens.predict(ad());
    // (one-hot + uniform)/2 over three leaves.
    CHECK(pred.fused[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(pred.fused[1] == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
    CHECK(pred.fused[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(pred.leaf_code == "12");
    REQUIRE(pred.votes.size() == 2);
    CHECK_FALSE(pred.votes[0].absent);
    CHECK(pred.votes[1].absent);
    CHECK(pred.votes[1].confidence == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("fused ties break toward the smaller code") {
    Taxonomy tax = toy2();
    Ensemble ens(&tax);
    ens.add_member({"title", 1.0, always({0.0, 0.0, 1.0})});
    ens.add_member({"skills", 1.0, always({1.0, 0.0, 0.0})});
    auto pred = ens.predict(ad());
    CHECK(pred.fused[0] == doctest::Approx(pred.fused[2]).epsilon(1e-12));
    CHECK(pred.leaf_code == "11");
  }

  TEST_CASE("member registration is validated") {
    Taxonomy tax = toy2();
    Ensemble ens(&tax);
    auto ok = always({0.5, 0.3, 0.2});
    CHECK(kind_of([&] { ens.add_member({"", 1.0, ok}); }) == EnsembleError::Kind::Config);
    CHECK(kind_of([&] { ens.add_member({"title", 0.0, ok}); }) == EnsembleError::Kind::Config);
    CHECK(kind_of([&] { ens.add_member({"title", -1.0, ok}); }) == EnsembleError::Kind::Config);
    CHECK(kind_of([&] {
            ens.add_member({"title", std::nan(""), ok});
          }) == EnsembleError::Kind::Config);
    CHECK(kind_of([&] { ens.add_member({"title", 1.0, nullptr}); }) ==
          EnsembleError::Kind::Config);
    CHECK(kind_of([&] { ens.predict(ad()); }) == EnsembleError::Kind::Config);

    ens.add_member({"title", 1.0, always({0.5, 0.5})});  // too narrow for 3 leaves
    CHECK(kind_of([&] { ens.predict(ad()); }) == EnsembleError::Kind::DimensionMismatch);
  }

  TEST_CASE("ensemble spec files round-trip through JSON") {
    EnsembleFileSpec spec;
    spec.scheme = "ons2010";
    spec.members.push_back({"title", {"models/title.model"}, 2.0, "none"});
    spec.members.push_back(
        {"description", {"models/d1.model", "models/d2.model"}, 1.5, "joint_prob"});

    auto parsed = EnsembleFileSpec::parse(spec.to_json());
    CHECK(parsed.scheme == "ons2010");
    REQUIRE(parsed.members.size() == 2);
    CHECK(parsed.members[0].feature == "title");
    CHECK(parsed.members[0].model_paths == std::vector<std::string>{"models/title.model"});
    CHECK(parsed.members[0].weight == 2.0);
    CHECK(parsed.members[0].postprocess == "none");
    CHECK(parsed.members[1].model_paths.size() == 2);
    CHECK(parsed.members[1].weight == 1.5);
    CHECK(parsed.members[1].postprocess == "joint_prob");

    std::string path = "/tmp/occlass_test_ensemble_spec.json";
    save_ensemble_spec(spec, path);
    auto loaded = load_ensemble_spec(path);
    CHECK(loaded.to_json() == spec.to_json());
    std::remove(path.c_str());

    // Serialized specs lead with the format tag; a foreign tag is rejected.
    CHECK(spec.to_json().find("\"format\": \"occlass.ensemble v1\"") != std::string::npos);
    CHECK(kind_of([&] {
            EnsembleFileSpec::parse(
                R"({"format": "occlass.ensemble v2", "members": [{"feature": "t", "model": "m"}]})");
          }) == EnsembleError::Kind::Config);
  }

  TEST_CASE("spec parsing defaults weight to one and accepts minimal members") {
    auto spec = EnsembleFileSpec::parse(
        R"({"members": [{"feature": "title", "model": "m.model"}]})");
    CHECK(spec.scheme.empty());
    REQUIRE(spec.members.size() == 1);
    CHECK(spec.members[0].weight == 1.0);
    CHECK(spec.members[0].postprocess == "none");
  }

  TEST_CASE("spec parsing fails loudly on malformed input") {
    auto rejects = [](const std::string& text) {
      return kind_of([&] { EnsembleFileSpec::parse(text); }) == EnsembleError::Kind::Config;
    };
    CHECK(rejects("not json"));
    CHECK(rejects("[1, 2]"));
    CHECK(rejects(R"({"members": []})"));
    CHECK(rejects(R"({"member": [{"feature": "t", "model": "m"}]})"));  // typo key
    CHECK(rejects(R"({"members": [{"feature": "t", "model": "m", "wieght": 2}]})"));
    CHECK(rejects(R"({"members": [{"model": "m"}]})"));                  // no feature
    CHECK(rejects(R"({"members": [{"feature": "", "model": "m"}]})"));
    CHECK(rejects(R"({"members": [{"feature": "t"}]})"));                // no model
    CHECK(rejects(R"({"members": [{"feature": "t", "model": "a", "models": ["b"]}]})"));
    CHECK(rejects(R"({"members": [{"feature": "t", "models": []}]})"));
    CHECK(rejects(R"({"members": [{"feature": "t", "model": "m", "weight": 0}]})"));
    CHECK(rejects(R"({"members": [{"feature": "t", "model": "m", "weight": "2"}]})"));
    CHECK(rejects(R"({"members": [{"feature": "t", "model": "m", "postprocess": "mean"}]})"));
    CHECK(rejects(R"({"members": [{"feature": "t", "models": ["a", "b"]}]})"));  // needs mode
    CHECK(rejects(R"({"scheme": "soc9999", "members": [{"feature": "t", "model": "m"}]})"));
    CHECK(kind_of([&] { load_ensemble_spec("/tmp/occlass_no_such_spec.json"); }) ==
          EnsembleError::Kind::Config);
  }
}
