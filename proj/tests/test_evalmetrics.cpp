#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "occlass/evalmetrics.hpp"
#include "occlass/hierarchy.hpp"
#include "occlass/rng.hpp"
#include "occlass/taxonomy.hpp"

using namespace occlass;

namespace {

// Two majors, four levels, mirroring the trades example used throughout.
Taxonomy trades() {
  return Taxonomy::from_rows(
      {
          {"1", "ROOT", "Managers"},
          {"11", "1", "Corporate Managers"},
          {"111", "11", "Chief Executives"},
          {"1111", "111", "Chief Executives and Senior Officials"},
          {"5", "ROOT", "Skilled Trades"},
          {"52", "5", "Metal and Electrical Trades"},
          {"523", "52", "Vehicle Trades"},
          {"524", "52", "Electrical Trades"},
          {"5235", "523", "Aircraft Maintenance"},
          {"5242", "524", "Electrical Fitters"},
      },
      Scheme::Ons2010);
}

// Same quantity as macro_f1 but through the 2TP/(2TP+FP+FN) identity and a
// per-class scan, as an independent check.
double oracle_macro_f1(const std::vector<size_t>& preds, const std::vector<size_t>& golds,
                       size_t n_classes, bool present_only) {
  double sum = 0.0;
  size_t counted = 0;
  for (size_t c = 0; c < n_classes; ++c) {
    size_t tp = 0, fp = 0, fn = 0, sup = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
      if (golds[i] == c) {
        ++sup;
        preds[i] == c ? ++tp : ++fn;
      } else if (preds[i] == c) {
        ++fp;
      }
    }
    if (present_only && sup == 0) continue;
    double denom = static_cast<double>(2 * tp + fp + fn);
    sum += denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    ++counted;
  }
  return sum / static_cast<double>(counted);
}

// Rank-by-sort oracle for top-k membership.
bool oracle_in_topk(const std::vector<double>& scores, size_t gold, size_t k) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  for (size_t r = 0; r < std::min(k, order.size()); ++r) {
    if (order[r] == gold) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("evalmetrics") {
  TEST_CASE("macro F1 matches the two-class hand computation") {
    // Class 0: P=1, R=0.5; class 1: P=0.5, R=1; both F1 = 2/3.
    std::vector<size_t> golds{0, 0, 1};
    std::vector<size_t> preds{0, 1, 1};
    CHECK(macro_f1(preds, golds, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("macro F1 endpoints") {
    std::vector<size_t> golds{0, 1, 2, 1};
    CHECK(macro_f1(golds, golds, 3) == doctest::Approx(1.0));
    std::vector<size_t> wrong{1, 2, 0, 2};
    CHECK(macro_f1(wrong, golds, 3) == doctest::Approx(0.0));
  }

  TEST_CASE("absent classes drag the full-list average down but not the present-only one") {
    std::vector<size_t> golds{0, 0, 1};
    std::vector<size_t> preds{0, 1, 1};
    double full = macro_f1(preds, golds, 4);
    double present = macro_f1(preds, golds, 4, MacroAveraging::PresentOnly);
    CHECK(full == doctest::Approx((2.0 / 3.0 + 2.0 / 3.0) / 4.0).epsilon(1e-12));
    CHECK(present == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("macro F1 agrees with an independent oracle on random data") {
    Rng rng(0xf1f1);
    for (int trial = 0; trial < 300; ++trial) {
      size_t n_classes = 2 + rng.below(8);
      size_t n = 1 + rng.below(40);
      std::vector<size_t> preds(n), golds(n);
      for (size_t i = 0; i < n; ++i) {
        preds[i] = rng.below(n_classes);
        golds[i] = rng.below(n_classes);
      }
      REQUIRE(macro_f1(preds, golds, n_classes) ==
              doctest::Approx(oracle_macro_f1(preds, golds, n_classes, false)).epsilon(1e-12));
      REQUIRE(macro_f1(preds, golds, n_classes, MacroAveraging::PresentOnly) ==
              doctest::Approx(oracle_macro_f1(preds, golds, n_classes, true)).epsilon(1e-12));
    }
  }

  TEST_CASE("metrics ignore the order of evaluation pairs") {
    Rng rng(0xabba);
    std::vector<size_t> preds, golds;
    for (int i = 0; i < 60; ++i) {
      preds.push_back(rng.below(5));
      golds.push_back(rng.below(5));
    }
    double before = macro_f1(preds, golds, 5);
    std::vector<size_t> order(preds.size());
    std::iota(order.begin(), order.end(), size_t{0});
    rng.shuffle(order);
    std::vector<size_t> preds2, golds2;
    for (size_t i : order) {
      preds2.push_back(preds[i]);
      golds2.push_back(golds[i]);
    }
    CHECK(macro_f1(preds2, golds2, 5) == doctest::Approx(before).epsilon(1e-12));
  }

  TEST_CASE("top-k accuracy on the three-sample worked example") {
    // Eight classes with descending scores, so class j holds sorted rank
    // j+1; golds at ranks 1, 3 and 7.
    std::vector<double> descending(8);
    for (size_t j = 0; j < 8; ++j) descending[j] = 8.0 - static_cast<double>(j);
    std::vector<std::vector<double>> scores{descending, descending, descending};
    std::vector<size_t> golds{0, 2, 6};
    // Gold class holds ranks 0, 2 and 6 (0-based): two of three within top 5.
    CHECK(topk_accuracy(scores, golds, 5) == doctest::Approx(100.0 * 2 / 3).epsilon(1e-9));
    CHECK(topk_accuracy(scores, golds, 1) == doctest::Approx(100.0 / 3).epsilon(1e-9));
    CHECK(topk_accuracy(scores, golds, 8) == doctest::Approx(100.0));
  }

  TEST_CASE("top-1 equals plain accuracy and ties follow code order") {
    std::vector<std::vector<double>> scores{{0.5, 0.5}, {0.5, 0.5}};
    std::vector<size_t> golds_first{0, 0};
    std::vector<size_t> golds_second{1, 1};
    // The tie resolves toward position 0, the smaller code.
    CHECK(topk_accuracy(scores, golds_first, 1) == doctest::Approx(100.0));
    CHECK(topk_accuracy(scores, golds_second, 1) == doctest::Approx(0.0));
    CHECK(topk_accuracy(scores, golds_second, 2) == doctest::Approx(100.0));
  }

  TEST_CASE("top-k matches a sort-based oracle and is monotone in k") {
    Rng rng(0x70b0);
    for (int trial = 0; trial < 100; ++trial) {
      size_t n_classes = 2 + rng.below(7);
      size_t n = 1 + rng.below(20);
      std::vector<std::vector<double>> scores(n);
      std::vector<size_t> golds(n);
      for (size_t i = 0; i < n; ++i) {
        scores[i].resize(n_classes);
        for (double& v : scores[i]) v = rng.below(4) * 0.25;  // deliberate ties
        golds[i] = rng.below(n_classes);
      }
      double prev = 0.0;
      for (size_t k = 1; k <= n_classes; ++k) {
        size_t hits = 0;
        for (size_t i = 0; i < n; ++i) hits += oracle_in_topk(scores[i], golds[i], k) ? 1 : 0;
        double expect = 100.0 * static_cast<double>(hits) / static_cast<double>(n);
        double got = topk_accuracy(scores, golds, k);
        REQUIRE(got == doctest::Approx(expect).epsilon(1e-12));
        REQUIRE(got >= prev);
        prev = got;
      }
      REQUIRE(prev == doctest::Approx(100.0));  // k = class count always hits
    }
  }

  TEST_CASE("oversized k is capped with a warning") {
    std::vector<std::vector<double>> scores{{0.9, 0.1, 0.0}};
    std::vector<size_t> golds{2};
    std::ostringstream warn;
    CHECK(topk_accuracy(scores, golds, 50, &warn) == doctest::Approx(100.0));
    CHECK(warn.str().find("capped") != std::string::npos);
    CHECK(topk_accuracy(scores, golds, 50) == doctest::Approx(100.0));  // silent without a sink
  }

  TEST_CASE("hierarchical metrics on the trades example") {
    Taxonomy tax = trades();
    auto perfect = hierarchical_prf("5242", "5242", tax);
    CHECK(perfect.precision == doctest::Approx(1.0));
    CHECK(perfect.recall == doctest::Approx(1.0));
    CHECK(perfect.f1 == doctest::Approx(1.0));

    // Shared ancestors {5, 52} out of four levels on both sides.
    auto near = hierarchical_prf("5242", "5235", tax);
    CHECK(near.precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(near.recall == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(near.f1 == doctest::Approx(0.5).epsilon(1e-12));

    auto disjoint = hierarchical_prf("1111", "5235", tax);
    CHECK(disjoint.precision == doctest::Approx(0.0));
    CHECK(disjoint.recall == doctest::Approx(0.0));
    CHECK(disjoint.f1 == doctest::Approx(0.0));

    // Predicting an ancestor is precise but incomplete.
    auto shallow = hierarchical_prf("52", "5235", tax);
    CHECK(shallow.precision == doctest::Approx(1.0));
    CHECK(shallow.recall == doctest::Approx(0.5));
    CHECK(shallow.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(hierarchical_prf("9999", "5235", tax), TaxonomyError);
    CHECK_THROWS_AS(hierarchical_prf("524x", "5235", tax), CodeError);
  }

  TEST_CASE("equal-depth predictions give equal hierarchical precision and recall") {
    Taxonomy tax = trades();
    const std::vector<std::string> leaves{"1111", "5235", "5242"};
    Rng rng(0x6eaf);
    for (int trial = 0; trial < 50; ++trial) {
      const std::string& pred = leaves[rng.below(leaves.size())];
      const std::string& gold = leaves[rng.below(leaves.size())];
      auto prf = hierarchical_prf(pred, gold, tax);
      REQUIRE(prf.precision == doctest::Approx(prf.recall).epsilon(1e-12));
    }
  }

  TEST_CASE("corpus aggregation micro-sums the set sizes") {
    Taxonomy tax = trades();
    std::vector<std::string> preds{"5242", "52"};
    std::vector<std::string> golds{"5242", "5235"};
    auto agg = hierarchical_prf_corpus(preds, golds, tax);
    CHECK(agg.samples == 2);
    // Sample 1: |P|=|T|=4, shared 4. Sample 2: |P|=2, |T|=4, shared 2.
    CHECK(agg.micro.precision == doctest::Approx(6.0 / 6.0).epsilon(1e-12));
    CHECK(agg.micro.recall == doctest::Approx(6.0 / 8.0).epsilon(1e-12));
    CHECK(agg.micro.f1 ==
          doctest::Approx(2.0 * 1.0 * 0.75 / (1.0 + 0.75)).epsilon(1e-12));
    // Per-sample means: precision (1 + 1)/2, recall (1 + 0.5)/2,
    // F (1 + 2/3)/2.
    CHECK(agg.mean.precision == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(agg.mean.recall == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(agg.mean.f1 == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
  }

  TEST_CASE("error-vs-support table is sorted and omits unseen classes") {
    // Class 2 is starved (one sample, wrong); class 0 is abundant and clean.
    std::vector<size_t> golds{0, 0, 0, 0, 1, 1, 2};
    std::vector<size_t> preds{0, 0, 0, 0, 1, 0, 0};
    auto table = error_vs_support(preds, golds, 5);
    REQUIRE(table.size() == 3);  // classes 3 and 4 have no support
    CHECK(table[0].class_index == 2);
    CHECK(table[0].support == 1);
    CHECK(table[0].error_rate == doctest::Approx(1.0));
    CHECK(table[1].class_index == 1);
    CHECK(table[1].support == 2);
    CHECK(table[1].error_rate == doctest::Approx(0.5));
    CHECK(table[2].class_index == 0);
    CHECK(table[2].support == 4);
    CHECK(table[2].error_rate == doctest::Approx(0.0));
    // The starved class carries the worst error rate.
    CHECK(table[0].error_rate >= table[1].error_rate);
    CHECK(table[1].error_rate >= table[2].error_rate);

    auto clean = error_vs_support(golds, golds, 5);
    for (const auto& row : clean) CHECK(row.error_rate == doctest::Approx(0.0));
  }

  TEST_CASE("confusion matrices truncate labels to the requested level") {
    Taxonomy tax = trades();
    // Leaf order: 1111, 5235, 5242.
    std::vector<size_t> golds{0, 1, 2, 1};
    std::vector<size_t> preds{0, 2, 2, 0};
    auto m1 = confusion(tax, preds, golds, 1);
    CHECK(m1.level == 1);
    CHECK(m1.labels == std::vector<std::string>{"1", "5"});
    // Gold majors: 1, 5, 5, 5; predicted majors: 1, 5, 5, 1.
    CHECK(m1.counts[0][0] == 1);
    CHECK(m1.counts[0][1] == 0);
    CHECK(m1.counts[1][0] == 1);
    CHECK(m1.counts[1][1] == 2);
    CHECK(m1.total == 4);
    CHECK(m1.trace() == 3);

    auto m4 = confusion(tax, preds, golds, 4);
    CHECK(m4.labels == std::vector<std::string>{"1111", "5235", "5242"});
    CHECK(m4.trace() == 2);  // samples 0 and 2
    CHECK(m4.counts[1][2] == 1);
    CHECK(m4.counts[1][0] == 1);
    // Row sums equal per-class support.
    size_t row1 = m4.counts[1][0] + m4.counts[1][1] + m4.counts[1][2];
    CHECK(row1 == 2);

    auto diag = confusion(tax, golds, golds, 4);
    for (size_t i = 0; i < diag.counts.size(); ++i) {
      for (size_t j = 0; j < diag.counts[i].size(); ++j) {
        CHECK(diag.counts[i][j] == (i == j ? diag.counts[i][i] : 0));
      }
    }

    std::string csv = m1.to_csv();
    CHECK(csv == "true\\pred,1,5\n1,1,0\n5,1,2\n");
  }

  TEST_CASE("confusion from level positions matches leaf truncation") {
    Taxonomy tax = trades();
    std::vector<size_t> golds{0, 1, 2, 1};
    std::vector<size_t> preds{0, 2, 2, 0};
    for (int level = 1; level <= tax.depth(); ++level) {
      auto from_leaves = confusion(tax, preds, golds, level);
      std::vector<size_t> lp(preds.size()), lg(golds.size());
      for (size_t i = 0; i < preds.size(); ++i) {
        lp[i] = static_cast<size_t>(tax.leaf_ancestor_position(preds[i], level));
        lg[i] = static_cast<size_t>(tax.leaf_ancestor_position(golds[i], level));
      }
      auto direct = confusion_at_level(tax, level, lp, lg);
      CHECK(direct.labels == from_leaves.labels);
      CHECK(direct.counts == from_leaves.counts);
      CHECK(direct.total == from_leaves.total);
    }
    // Positions that no single leaf vector could produce are still accepted:
    // level-2 prediction 52 against gold 11.
    auto m = confusion_at_level(tax, 2, std::vector<size_t>{1}, std::vector<size_t>{0});
    CHECK(m.counts[0][1] == 1);
    CHECK(m.trace() == 0);
    CHECK_THROWS_AS(
        confusion_at_level(tax, 2, std::vector<size_t>{2}, std::vector<size_t>{0}),
        EvalError);
    CHECK_THROWS_AS(
        confusion_at_level(tax, 9, std::vector<size_t>{0}, std::vector<size_t>{0}),
        EvalError);
  }

  TEST_CASE("level scores take each branch's best leaf") {
    Taxonomy tax = trades();
    std::vector<double> leaf{0.2, 0.5, 0.3};  // 1111, 5235, 5242
    auto l1 = level_scores_from_leaves(tax, leaf, 1);
    REQUIRE(l1.size() == 2);
    CHECK(l1[0] == doctest::Approx(0.2));
    CHECK(l1[1] == doctest::Approx(0.5));
    auto l3 = level_scores_from_leaves(tax, leaf, 3);
    REQUIRE(l3.size() == 3);  // 111, 523, 524
    CHECK(l3[1] == doctest::Approx(0.5));
    CHECK(l3[2] == doctest::Approx(0.3));
  }

  TEST_CASE("level argmax equals the truncated leaf argmax") {
    Taxonomy tax = trades();
    Rng rng(0x1eaf);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> leaf(3);
      for (double& v : leaf) v = rng.next_open();
      size_t leaf_arg = argmax_position(leaf);
      for (int level = 1; level <= tax.depth(); ++level) {
        auto ls = level_scores_from_leaves(tax, leaf, level);
        REQUIRE(argmax_position(ls) ==
                static_cast<size_t>(tax.leaf_ancestor_position(leaf_arg, level)));
      }
    }
  }

  TEST_CASE("accuracy can only improve toward the root") {
    Taxonomy tax = trades();
    Rng rng(0x5eed);
    std::vector<std::vector<double>> scores;
    std::vector<size_t> golds;
    for (int i = 0; i < 150; ++i) {
      std::vector<double> s(3);
      for (double& v : s) v = rng.next_open();
      scores.push_back(s);
      golds.push_back(rng.below(3));
    }
    auto report = evaluate(tax, scores, golds);
    REQUIRE(report.levels.size() == 4);
    for (size_t i = 1; i < report.levels.size(); ++i) {
      CHECK(report.levels[i - 1].top1 >= report.levels[i].top1);
    }
  }

  TEST_CASE("the full report keeps its internal invariants") {
    Taxonomy tax = trades();
    std::vector<std::vector<double>> scores{
        {0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.2, 0.3, 0.5}, {0.5, 0.4, 0.1}, {0.1, 0.2, 0.7}};
    std::vector<size_t> golds{0, 1, 2, 1, 1};
    auto report = evaluate(tax, scores, golds);
    CHECK(report.samples == 5);
    REQUIRE(report.levels.size() == 4);
    for (const auto& lm : report.levels) {
      CHECK(lm.top1 <= lm.top5);
      CHECK(lm.top5 <= lm.top10);
      CHECK(lm.top10 <= 100.0);
      CHECK(lm.macro_f1 >= 0.0);
      CHECK(lm.macro_f1 <= 1.0);
      CHECK(lm.matrix.total == 5);
      // Level accuracy from the confusion matrix equals top-1: both come
      // from the truncated leaf argmax.
      double acc = 100.0 * static_cast<double>(lm.matrix.trace()) / 5.0;
      CHECK(lm.top1 == doctest::Approx(acc).epsilon(1e-9));
    }
    // Equal-depth leaves: micro and mean coincide.
    CHECK(report.hierarchy.micro.precision ==
          doctest::Approx(report.hierarchy.mean.precision).epsilon(1e-12));
    CHECK(report.hierarchy.micro.recall == doctest::Approx(report.hierarchy.micro.precision));

    auto parsed = nlohmann::json::parse(report.summary_json());
    CHECK(parsed["samples"] == 5);
    CHECK(parsed["levels"].size() == 4);
    CHECK(parsed["levels"][0].contains("macro_f1"));
    CHECK(parsed["hierarchical"]["micro"].contains("f1"));

    std::string text = report.render_text();
    CHECK(text.find("level") != std::string::npos);
    CHECK(text.find("hierarchical micro") != std::string::npos);
    CHECK(text.find("support") != std::string::npos);
  }

  TEST_CASE("misuse raises typed errors") {
    Taxonomy tax = trades();
    std::vector<size_t> preds{0}, golds{0, 1};
    CHECK_THROWS_AS(macro_f1(preds, golds, 3), EvalError);
    std::vector<size_t> none;
    try {
      macro_f1(none, none, 3);
      FAIL("expected a throw");
    } catch (const EvalError& e) {
      CHECK(e.kind == EvalError::Kind::EmptyEvaluation);
    }
    std::vector<size_t> big{7};
    std::vector<size_t> ok{0};
    CHECK_THROWS_AS(macro_f1(big, ok, 3), EvalError);

    std::vector<std::vector<double>> scores{{0.5, 0.5}};
    CHECK_THROWS_AS(topk_accuracy(scores, ok, 0), EvalError);
    std::vector<std::vector<double>> ragged{{0.5, 0.5}, {0.1, 0.2, 0.7}};
    std::vector<size_t> two{0, 1};
    CHECK_THROWS_AS(topk_accuracy(ragged, two, 1), EvalError);

    std::vector<size_t> leaf_ok{0};
    CHECK_THROWS_AS(confusion(tax, leaf_ok, leaf_ok, 0), EvalError);
    CHECK_THROWS_AS(confusion(tax, leaf_ok, leaf_ok, 5), EvalError);
    std::vector<double> short_leaf{0.5, 0.5};
    CHECK_THROWS_AS(level_scores_from_leaves(tax, short_leaf, 1), EvalError);
    std::vector<std::vector<double>> eval_scores{{0.5, 0.5}};
    CHECK_THROWS_AS(evaluate(tax, eval_scores, leaf_ok), EvalError);
  }
}
