#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <vector>

#include "occlass/rng.hpp"
#include "occlass/tune.hpp"

using namespace occlass;

namespace {

TuneError::Kind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const TuneError& e) {
    return e.kind;
  }
  FAIL("expected a TuneError");
  return TuneError::Kind::BadSpace;
}

// Exactly on the lo + k*step grid, bit for bit.
bool on_grid(double v, double lo, double hi, double step) {
  if (v < lo || v > hi) return false;
  long k = std::lround((v - lo) / step);
  return v == lo + static_cast<double>(k) * step;
}

TrialRecord fake_trial(size_t number, double x, double objective) {
  TrialRecord r;
  r.number = number;
  r.config["x"] = x;
  r.objective = objective;
  return r;
}

}  // namespace

TEST_SUITE("tune") {
  TEST_CASE("search spaces validate their dimensions") {
    SearchSpace empty;
    CHECK(kind_of([&] { empty.validate(); }) == TuneError::Kind::BadSpace);

    SearchSpace dup;
    dup.add_uniform("x", 0.0, 1.0).add_uniform("x", 0.0, 2.0);
    CHECK_THROWS_AS(dup.validate(), TuneError);

    SearchSpace inverted;
    inverted.add_uniform("x", 1.0, 0.0);
    CHECK_THROWS_AS(inverted.validate(), TuneError);

    SearchSpace log_zero;
    log_zero.add_log_uniform("x", 0.0, 1.0);
    CHECK_THROWS_AS(log_zero.validate(), TuneError);

    SearchSpace no_step;
    no_step.add_quantized("x", 0.0, 1.0, 0.0);
    CHECK_THROWS_AS(no_step.validate(), TuneError);

    SearchSpace off_grid;
    off_grid.add_quantized("epochs", 5.0, 99.0, 5.0);
    CHECK_THROWS_AS(off_grid.validate(), TuneError);

    SearchSpace no_room;
    no_room.add_quantized("x", 5.0, 6.0, 5.0);
    CHECK_THROWS_AS(no_room.validate(), TuneError);

    CHECK_NOTHROW(default_search_space().validate());
  }

  TEST_CASE("the default space carries the documented ranges") {
    SearchSpace space = default_search_space();
    REQUIRE(space.dims.size() == 4);
    CHECK(space.dims[0].name == "epochs");
    CHECK(space.dims[0].kind == Dimension::Kind::Quantized);
    CHECK(space.dims[0].lo == 5.0);
    CHECK(space.dims[0].hi == 100.0);
    CHECK(space.dims[0].step == 5.0);
    CHECK(space.dims[1].name == "hidden_dropout");
    CHECK(space.dims[1].step == 0.05);
    CHECK(space.dims[2].name == "weight_decay");
    CHECK(space.dims[2].kind == Dimension::Kind::LogUniform);
    CHECK(space.dims[2].lo == 1e-9);
    CHECK(space.dims[2].hi == 1e-2);
    CHECK(space.dims[3].name == "learning_rate");
    CHECK(space.dims[3].lo == 1e-6);
    CHECK(space.dims[3].hi == 1e-1);
  }

  TEST_CASE("uniform samples respect bounds and land exactly on grids") {
    SearchSpace space = default_search_space();
    Rng rng(0x5a5a);
    std::set<double> seen_epochs;
    for (int i = 0; i < 2000; ++i) {
      TrialConfig c = uniform_sample(space, rng);
      REQUIRE(on_grid(c["epochs"], 5.0, 100.0, 5.0));
      REQUIRE(on_grid(c["hidden_dropout"], 0.10, 0.60, 0.05));
      REQUIRE(c["weight_decay"] >= 1e-9);
      REQUIRE(c["weight_decay"] <= 1e-2);
      REQUIRE(c["learning_rate"] >= 1e-6);
      REQUIRE(c["learning_rate"] <= 1e-1);
      seen_epochs.insert(c["epochs"]);
    }
    CHECK(seen_epochs.size() == 20);  // every multiple of 5 shows up
  }

  TEST_CASE("log-uniform sampling is uniform in log space") {
    SearchSpace space;
    space.add_log_uniform("lr", 1e-6, 1e-1);
    Rng rng(0x109);
    const int n = 4000;
    const double lo = std::log(1e-6), hi = std::log(1e-1);
    std::vector<int> bins(8, 0);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      double v = uniform_sample(space, rng)["lr"];
      double t = std::log(v);
      mean += t;
      int b = std::min(7, static_cast<int>((t - lo) / (hi - lo) * 8));
      ++bins[b];
    }
    mean /= n;
    CHECK(mean == doctest::Approx((lo + hi) / 2).epsilon(0.02));
    for (int b = 0; b < 8; ++b) {
      double frac = static_cast<double>(bins[b]) / n;
      CHECK(frac > 0.09);
      CHECK(frac < 0.16);
    }
  }

  TEST_CASE("suggestions always satisfy bounds and quantization") {
    SearchSpace space = default_search_space();
    Rng rng(0x7e57);
    std::vector<TrialRecord> history;
    for (int t = 0; t < 80; ++t) {
      TrialConfig c = suggest(space, history, rng);
      REQUIRE(on_grid(c["epochs"], 5.0, 100.0, 5.0));
      REQUIRE(on_grid(c["hidden_dropout"], 0.10, 0.60, 0.05));
      REQUIRE(c["weight_decay"] >= 1e-9);
      REQUIRE(c["weight_decay"] <= 1e-2);
      REQUIRE(c["learning_rate"] >= 1e-6);
      REQUIRE(c["learning_rate"] <= 1e-1);
      TrialRecord r;
      r.number = history.size() + 1;
      r.config = c;
      // Arbitrary deterministic objective to shape the split.
      r.objective = std::sin(static_cast<double>(t)) - c["hidden_dropout"];
      history.push_back(r);
    }
  }

  TEST_CASE("the estimator closes in on an analytic optimum") {
    SearchSpace space;
    space.add_uniform("x", 0.0, 1.0);
    int close = 0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed);
      std::vector<TrialRecord> history;
      double best_x = -1.0, best_obj = -1e300;
      for (int t = 0; t < 100; ++t) {
        TrialConfig c = suggest(space, history, rng);
        double x = c["x"];
        double obj = -(x - 0.3) * (x - 0.3);
        if (obj > best_obj) {
          best_obj = obj;
          best_x = x;
        }
        history.push_back(fake_trial(history.size() + 1, x, obj));
      }
      if (std::fabs(best_x - 0.3) <= 0.05) ++close;
    }
    CHECK(close >= 4);
  }

  TEST_CASE("the estimator outperforms pure random search on average") {
    SearchSpace space;
    space.add_uniform("x", 0.0, 1.0);
    auto objective = [](double x) { return -(x - 0.3) * (x - 0.3); };
    double tpe_sum = 0.0, rand_sum = 0.0;
    for (uint64_t seed = 11; seed <= 15; ++seed) {
      Rng tpe_rng(seed);
      std::vector<TrialRecord> history;
      double tpe_best = -1e300;
      for (int t = 0; t < 40; ++t) {
        double x = suggest(space, history, tpe_rng)["x"];
        double obj = objective(x);
        tpe_best = std::max(tpe_best, obj);
        history.push_back(fake_trial(history.size() + 1, x, obj));
      }
      Rng rand_rng(seed);
      double rand_best = -1e300;
      for (int t = 0; t < 40; ++t) {
        rand_best = std::max(rand_best, objective(uniform_sample(space, rand_rng)["x"]));
      }
      tpe_sum += tpe_best;
      rand_sum += rand_best;
    }
    CHECK(tpe_sum / 5.0 >= rand_sum / 5.0 - 1e-6);
  }

  TEST_CASE("cross-validation folds are disjoint, balanced and deterministic") {
    const size_t n = 100;
    std::vector<std::vector<double>> xs(n, std::vector<double>{0.0});
    std::vector<size_t> ys(n);
    for (size_t i = 0; i < n; ++i) {
      xs[i][0] = static_cast<double>(i);
      ys[i] = i % 2;  // balanced binary labels
    }

    std::vector<size_t> fold_sizes;
    std::set<double> seen;
    FoldTrainer constant_zero = [&](const TrialConfig&, std::span<const std::vector<double>>,
                                    std::span<const size_t>,
                                    std::span<const std::vector<double>> vx,
                                    std::span<const size_t> vy) {
      fold_sizes.push_back(vx.size());
      size_t zeros = 0;
      for (size_t i = 0; i < vx.size(); ++i) {
        REQUIRE(seen.insert(vx[i][0]).second);  // disjoint validation folds
        zeros += vy[i] == 0 ? 1 : 0;
      }
      // A constant classifier predicting class 0.
      return static_cast<double>(zeros) / static_cast<double>(vy.size());
    };

    TrialConfig cfg{{"x", 0.5}};
    auto record = cross_validate(cfg, xs, ys, 5, constant_zero, 42);
    REQUIRE(record.fold_scores.size() == 5);
    CHECK(fold_sizes == std::vector<size_t>{20, 20, 20, 20, 20});
    CHECK(seen.size() == n);  // every sample validated exactly once
    // Chance level exactly: fold means average to the overall class rate.
    CHECK(record.objective == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(record.wall_seconds >= 0.0);

    fold_sizes.clear();
    seen.clear();
    auto again = cross_validate(cfg, xs, ys, 5, constant_zero, 42);
    CHECK(again.fold_scores == record.fold_scores);
    CHECK(again.objective == record.objective);
  }

  TEST_CASE("cross-validation refuses impossible setups") {
    std::vector<std::vector<double>> xs(4, std::vector<double>{0.0});
    std::vector<size_t> ys(4, 0);
    FoldTrainer noop = [](const TrialConfig&, std::span<const std::vector<double>>,
                          std::span<const size_t>, std::span<const std::vector<double>>,
                          std::span<const size_t>) { return 1.0; };
    CHECK(kind_of([&] { cross_validate({}, xs, ys, 5, noop, 1); }) ==
          TuneError::Kind::InsufficientData);
    CHECK(kind_of([&] { cross_validate({}, xs, ys, 1, noop, 1); }) ==
          TuneError::Kind::InsufficientData);
    std::vector<size_t> short_ys(3, 0);
    CHECK(kind_of([&] { cross_validate({}, xs, short_ys, 2, noop, 1); }) ==
          TuneError::Kind::InsufficientData);
  }

  TEST_CASE("trial records round-trip through the log line format") {
    TrialRecord ok;
    ok.number = 7;
    ok.config = {{"epochs", 20.0}, {"learning_rate", 3e-4}};
    ok.fold_scores = {0.9, 0.8, 0.85, 0.95, 0.9};
    ok.objective = 0.88;
    ok.wall_seconds = 1.25;
    auto parsed = trial_from_json(trial_to_json(ok));
    CHECK(parsed.number == 7);
    CHECK(parsed.config == ok.config);
    CHECK(parsed.fold_scores == ok.fold_scores);
    CHECK(parsed.objective == doctest::Approx(0.88));
    CHECK_FALSE(parsed.failed);

    TrialRecord failed;
    failed.number = 8;
    failed.config = {{"epochs", 95.0}};
    failed.failed = true;
    failed.objective = -std::numeric_limits<double>::infinity();
    auto parsed_failed = trial_from_json(trial_to_json(failed));
    CHECK(parsed_failed.failed);
    CHECK(std::isinf(parsed_failed.objective));
    CHECK(parsed_failed.objective < 0);

    CHECK(kind_of([&] { trial_from_json("not json"); }) == TuneError::Kind::Io);
    CHECK(kind_of([&] { trial_from_json(R"({"number": 1})"); }) == TuneError::Kind::Io);
    CHECK(kind_of([&] { load_study_log("/tmp/occlass_no_such_study.jsonl"); }) ==
          TuneError::Kind::Io);
  }

  TEST_CASE("studies run to budget, persist, and survive failing trials") {
    const std::string path = "/tmp/occlass_test_study.jsonl";
    std::remove(path.c_str());

    std::vector<std::vector<double>> xs(20, std::vector<double>{0.0});
    std::vector<size_t> ys(20, 0);
    SearchSpace space;
    space.add_uniform("x", 0.0, 1.0);

    // Configs in the doomed band throw; the study must absorb that.
    FoldTrainer trainer = [](const TrialConfig& c, std::span<const std::vector<double>>,
                             std::span<const size_t>, std::span<const std::vector<double>>,
                             std::span<const size_t>) {
      double x = c.at("x");
      if (x < 0.15) throw std::runtime_error("doomed configuration");
      return 1.0 - (x - 0.3) * (x - 0.3);
    };

    auto first = run_study(space, 15, xs, ys, trainer, 4, 99, path);
    REQUIRE(first.history.size() == 15);
    for (size_t i = 0; i < first.history.size(); ++i) {
      CHECK(first.history[i].number == i + 1);
    }
    CHECK_FALSE(first.best.failed);
    CHECK(first.best.objective <= 1.0);

    // Resuming appends: prior trials keep their numbers and configs.
    auto resumed = run_study(space, 25, xs, ys, trainer, 4, 99, path);
    REQUIRE(resumed.history.size() == 25);
    for (size_t i = 0; i < 15; ++i) {
      CHECK(trial_to_json(resumed.history[i]) == trial_to_json(first.history[i]));
    }
    CHECK(resumed.history[15].number == 16);
    CHECK(resumed.best.objective >= first.best.objective);

    // A third call with the budget already met changes nothing.
    auto done = run_study(space, 25, xs, ys, trainer, 4, 99, path);
    CHECK(done.history.size() == 25);
    std::remove(path.c_str());

    // All-failing trainer: the study still completes.
    FoldTrainer doomed = [](const TrialConfig&, std::span<const std::vector<double>>,
                            std::span<const size_t>, std::span<const std::vector<double>>,
                            std::span<const size_t>) -> double {
      throw std::runtime_error("always fails");
    };
    auto failed = run_study(space, 3, xs, ys, doomed, 4, 7);
    REQUIRE(failed.history.size() == 3);
    for (const auto& r : failed.history) CHECK(r.failed);
    CHECK(std::isinf(failed.best.objective));
  }

  TEST_CASE("a budget of one returns that single trial") {
    std::vector<std::vector<double>> xs(10, std::vector<double>{0.0});
    std::vector<size_t> ys(10, 0);
    SearchSpace space;
    space.add_uniform("x", 0.0, 1.0);
    FoldTrainer trainer = [](const TrialConfig&, std::span<const std::vector<double>>,
                             std::span<const size_t>, std::span<const std::vector<double>>,
                             std::span<const size_t>) { return 0.75; };
    auto result = run_study(space, 1, xs, ys, trainer, 2, 5);
    REQUIRE(result.history.size() == 1);
    CHECK(result.best.number == 1);
    CHECK(result.best.objective == doctest::Approx(0.75));
  }

  TEST_CASE("studies reproduce bit for bit from the seed") {
    std::vector<std::vector<double>> xs(12, std::vector<double>{0.0});
    std::vector<size_t> ys(12, 0);
    for (size_t i = 0; i < 12; ++i) {
      xs[i][0] = static_cast<double>(i) * 0.1;
      ys[i] = i % 3;
    }
    SearchSpace space = default_search_space();
    FoldTrainer trainer = [](const TrialConfig& c, std::span<const std::vector<double>> tx,
                             std::span<const size_t>, std::span<const std::vector<double>>,
                             std::span<const size_t>) {
      return 0.5 + 0.001 * static_cast<double>(tx.size()) + 1e-6 * c.at("epochs");
    };
    auto a = run_study(space, 14, xs, ys, trainer, 3, 1234);
    auto b = run_study(space, 14, xs, ys, trainer, 3, 1234);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
      // Wall time is the one field allowed to differ.
      CHECK(a.history[i].config == b.history[i].config);
      CHECK(a.history[i].fold_scores == b.history[i].fold_scores);
      CHECK(a.history[i].objective == b.history[i].objective);
      CHECK(a.history[i].number == b.history[i].number);
    }
    auto c = run_study(space, 14, xs, ys, trainer, 3, 4321);
    bool any_differs = false;
    for (size_t i = 0; i < c.history.size(); ++i) {
      if (c.history[i].config != a.history[i].config) any_differs = true;
    }
    CHECK(any_differs);
  }
}
