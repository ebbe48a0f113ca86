#include <cmath>
#include <vector>

#include "doctest.h"
#include "occlass/nnet.hpp"
#include "occlass/rng.hpp"

using namespace occlass;

namespace {

std::vector<double> random_input(size_t n, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform(-scale, scale);
  return x;
}

// Scalar training loss used by the finite-difference oracle: cross-entropy
// for softmax heads, mean binary cross-entropy for one-vs-rest.
double loss_of(const HeadArchitecture& arch, const ModelParams& params,
               const std::vector<double>& x, size_t target) {
  auto out = forward(arch, params, x, Mode::Infer);
  if (arch.kind == HeadKind::OvrBinary) {
    std::vector<double> targets(out.size(), 0.0);
    targets[target] = 1.0;
    return ovr_bce(out, targets);
  }
  return cross_entropy(softmax(out), target);
}

ModelParams analytic_grads(const HeadArchitecture& arch, const ModelParams& params,
                           const std::vector<double>& x, size_t target) {
  ForwardCache cache;
  auto out = forward(arch, params, x, Mode::Infer, nullptr, &cache);
  std::vector<double> dout;
  if (arch.kind == HeadKind::OvrBinary) {
    std::vector<double> targets(out.size(), 0.0);
    targets[target] = 1.0;
    ovr_bce(out, targets, &dout);
  } else {
    dout = softmax_ce_grad(softmax(out), target);
  }
  return backward(arch, params, cache, dout);
}

// Central finite differences on up to 64 sampled parameters; returns the
// worst relative error against the analytic gradient.
double fd_check(const HeadArchitecture& arch, uint64_t seed, size_t target) {
  ModelParams params = ModelParams::init(arch, seed);
  auto x = random_input(arch.input_dim(), seed ^ 0xf00d);
  ModelParams grads = analytic_grads(arch, params, x, target);

  Rng pick(seed ^ 0xbeef);
  const double h = 1e-5;
  double worst = 0.0;
  size_t samples = std::min<size_t>(64, params.size());
  for (size_t s = 0; s < samples; ++s) {
    size_t i = static_cast<size_t>(pick.below(params.size()));
    double saved = params.data()[i];
    params.data()[i] = saved + h;
    double up = loss_of(arch, params, x, target);
    params.data()[i] = saved - h;
    double down = loss_of(arch, params, x, target);
    params.data()[i] = saved;
    double fd = (up - down) / (2.0 * h);
    double a = grads.data()[i];
    double rel = std::fabs(a - fd) / std::max(std::fabs(a) + std::fabs(fd), 1e-6);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace

TEST_SUITE("nnet") {

TEST_CASE("gelu matches the exact Gaussian CDF form") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
  CHECK(gelu(-1.0) == doctest::Approx(-0.15865525393145707).epsilon(1e-12));
  for (double x : {0.1, 0.5, 1.0, 2.0, 5.0}) CHECK(gelu(x) > 0.0);
}

TEST_CASE("gelu derivative matches finite differences") {
  const double h = 1e-6;
  for (double x : {-3.0, -1.2, -0.4, 0.0, 0.3, 1.1, 2.7}) {
    double fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
    CHECK(gelu_grad(x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("sigmoid is stable at extreme inputs") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == doctest::Approx(1.0));
  CHECK(sigmoid(-800.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(sigmoid(-5000.0)));
}

TEST_CASE("softmax closed forms and stability") {
  auto half = softmax(std::vector<double>{0.0, 0.0});
  CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(half[1] == doctest::Approx(0.5).epsilon(1e-12));

  auto big = softmax(std::vector<double>{1000.0, 1000.0});
  CHECK(big[0] == doctest::Approx(0.5).epsilon(1e-12));

  auto quarters = softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
  CHECK(quarters[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(quarters[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax is shift-invariant and order-preserving") {
  auto logits = random_input(9, 17, 4.0);
  auto base = softmax(logits);
  double sum = 0.0;
  for (double p : base) {
    CHECK(p > 0.0);
    sum += p;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  auto shifted_logits = logits;
  for (double& v : shifted_logits) v += 7.25;
  auto shifted = softmax(shifted_logits);
  for (size_t i = 0; i < base.size(); ++i) {
    CHECK(shifted[i] == doctest::Approx(base[i]).epsilon(1e-12));
  }

  auto arg = [](const std::vector<double>& v) {
    return std::max_element(v.begin(), v.end()) - v.begin();
  };
  CHECK(arg(base) == arg(logits));
}

TEST_CASE("cross entropy closed forms") {
  CHECK(cross_entropy(std::vector<double>{0.0, 1.0, 0.0}, 1) == 0.0);
  CHECK(cross_entropy(std::vector<double>(4, 0.25), 2) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // flooring keeps the zero-probability case finite
  double worst = cross_entropy(std::vector<double>{0.0, 1.0}, 0);
  CHECK(std::isfinite(worst));
  CHECK(worst == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{1.0}, 3), ShapeMismatch);
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
  auto logits = random_input(6, 23, 2.0);
  size_t target = 4;
  auto grad = softmax_ce_grad(softmax(logits), target);
  const double h = 1e-6;
  for (size_t i = 0; i < logits.size(); ++i) {
    auto up = logits, down = logits;
    up[i] += h;
    down[i] -= h;
    double fd = (cross_entropy(softmax(up), target) - cross_entropy(softmax(down), target)) /
                (2.0 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("distillation loss closed forms") {
  std::vector<double> teacher{std::log(3.0), 0.0};

  SUBCASE("uniform student at t=1") {
    std::vector<double> student{0.0, 0.0};
    CHECK(distill_loss(teacher, student, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("matching student attains the softened teacher entropy") {
    double t = 2.5;
    std::vector<double> scaled{teacher[0] / t, teacher[1] / t};
    auto p = softmax(scaled);
    double entropy = 0.0;
    for (double v : p) entropy -= v * std::log(v);
    CHECK(distill_loss(teacher, teacher, t) == doctest::Approx(entropy).epsilon(1e-12));
  }
  SUBCASE("high temperature approaches cross-entropy against uniform") {
    std::vector<double> student{1.4, -0.3};
    CHECK(distill_loss(teacher, student, 1e6) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  }
  SUBCASE("matching student is the minimum") {
    for (uint64_t s = 1; s <= 8; ++s) {
      auto other = random_input(2, s, 3.0);
      CHECK(distill_loss(teacher, teacher, 1.0) <= distill_loss(teacher, other, 1.0) + 1e-12);
    }
  }
}

TEST_CASE("distillation gradient matches finite differences") {
  auto teacher = random_input(5, 31, 2.0);
  auto student = random_input(5, 37, 2.0);
  for (double t : {1.0, 3.0}) {
    auto grad = distill_grad(teacher, student, t);
    const double h = 1e-6;
    for (size_t i = 0; i < student.size(); ++i) {
      auto up = student, down = student;
      up[i] += h;
      down[i] -= h;
      double fd = (distill_loss(teacher, up, t) - distill_loss(teacher, down, t)) / (2.0 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("architecture factories enforce their shape rules") {
  CHECK_NOTHROW(baseline_arch(10, 4).validate());
  CHECK_NOTHROW(simple_arch(10, 4).validate());
  CHECK_NOTHROW(skillnet_arch(10, 4).validate());
  CHECK_NOTHROW(ovr_arch(10, 4).validate());

  HeadArchitecture bad = skillnet_arch(10, 4);
  bad.layers[1].out_dim = 777;
  bad.layers[2].in_dim = 777;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  HeadArchitecture broken_chain = simple_arch(10, 4, 32, 0.0);
  broken_chain.layers[1].in_dim = 31;
  CHECK_THROWS_AS(broken_chain.validate(), std::invalid_argument);

  HeadArchitecture wrong_width = baseline_arch(10, 4);
  wrong_width.num_classes = 5;
  CHECK_THROWS_AS(wrong_width.validate(), std::invalid_argument);
}

TEST_CASE("baseline head with zero weights maps everything to zero logits") {
  auto arch = baseline_arch(6, 3);
  auto params = ModelParams::zeros(arch);
  auto out = forward(arch, params, random_input(6, 5), Mode::Infer);
  CHECK(out == std::vector<double>(3, 0.0));
}

TEST_CASE("inference is deterministic even with dropout configured") {
  auto arch = simple_arch(8, 4, 16, 0.3);
  auto params = ModelParams::init(arch, 99);
  auto x = random_input(8, 6);
  auto a = forward(arch, params, x, Mode::Infer);
  auto b = forward(arch, params, x, Mode::Infer);
  CHECK(a == b);
}

TEST_CASE("parameter init is deterministic in the seed") {
  auto arch = simple_arch(8, 4, 16, 0.0);
  auto a = ModelParams::init(arch, 123);
  auto b = ModelParams::init(arch, 123);
  auto c = ModelParams::init(arch, 124);
  CHECK(a.data() == b.data());
  CHECK(a.data() != c.data());
  CHECK(a.all_finite());
}

TEST_CASE("train-mode dropout masks scale kept units and zero dropped ones") {
  auto arch = simple_arch(8, 4, 32, 0.5);
  auto params = ModelParams::init(arch, 7);
  auto x = random_input(8, 8);

  Rng rng(42);
  ForwardCache cache;
  forward(arch, params, x, Mode::Train, &rng, &cache);
  const auto& mask = cache.layers[0].mask;
  REQUIRE(mask.size() == 32);
  size_t zeros = 0, doubled = 0;
  for (double m : mask) {
    CHECK((m == 0.0 || m == 2.0));
    zeros += m == 0.0;
    doubled += m == 2.0;
  }
  CHECK(zeros > 0);
  CHECK(doubled > 0);

  Rng rng2(42);
  ForwardCache cache2;
  forward(arch, params, x, Mode::Train, &rng2, &cache2);
  CHECK(cache2.layers[0].mask == mask);

  CHECK_THROWS_AS(forward(arch, params, x, Mode::Train, nullptr), std::invalid_argument);
}

TEST_CASE("layer norm standardizes non-constant vectors") {
  HeadArchitecture arch;
  arch.kind = HeadKind::Simple;
  arch.num_classes = 6;
  arch.layers = {{6, 6, Activation::Identity, true, 0.0}};
  auto params = ModelParams::zeros(arch);
  auto W = params.weight(0);
  for (size_t i = 0; i < 6; ++i) W[i * 6 + i] = 1.0;  // z = x
  for (double& g : params.gain(0)) g = 1.0;

  // variance far above the norm epsilon so standardization is tight
  std::vector<double> x{10.0, -20.0, 35.0, 5.0, -15.0, 42.0};
  auto out = forward(arch, params, x, Mode::Infer);
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= 6.0;
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= 6.0;
  CHECK(std::fabs(mean) < 1e-9);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-6));

  // with unit gain the output mean tracks the norm bias mean
  auto lb = params.ln_bias(0);
  for (size_t i = 0; i < 6; ++i) lb[i] = 0.25 * static_cast<double>(i);
  auto out_b = forward(arch, params, x, Mode::Infer);
  double mean_b = 0.0, bias_mean = 0.0;
  for (size_t i = 0; i < 6; ++i) {
    mean_b += out_b[i];
    bias_mean += lb[i];
  }
  CHECK(mean_b / 6.0 == doctest::Approx(bias_mean / 6.0).epsilon(1e-9));
}

TEST_CASE("forward rejects mismatched shapes") {
  auto arch = simple_arch(8, 4, 16, 0.0);
  auto params = ModelParams::init(arch, 1);
  CHECK_THROWS_AS(forward(arch, params, random_input(7, 2), Mode::Infer), ShapeMismatch);

  auto other = ModelParams::init(baseline_arch(8, 4), 1);
  CHECK_THROWS_AS(forward(arch, other, random_input(8, 2), Mode::Infer), ShapeMismatch);
}

TEST_CASE("backward rejects mismatched gradients and caches") {
  auto arch = simple_arch(8, 4, 16, 0.0);
  auto params = ModelParams::init(arch, 1);
  ForwardCache cache;
  forward(arch, params, random_input(8, 3), Mode::Infer, nullptr, &cache);
  CHECK_THROWS_AS(backward(arch, params, cache, std::vector<double>(5, 0.0)), ShapeMismatch);
  ModelParams wrong = ModelParams::zeros(baseline_arch(8, 4));
  std::vector<double> dout(4, 0.0);
  CHECK_THROWS_AS(backward_into(arch, params, cache, dout, wrong), ShapeMismatch);
}

TEST_CASE("zero output gradient produces zero parameter gradients") {
  auto arch = simple_arch(5, 3, 8, 0.0);
  auto params = ModelParams::init(arch, 11);
  ForwardCache cache;
  forward(arch, params, random_input(5, 12), Mode::Infer, nullptr, &cache);
  auto grads = backward(arch, params, cache, std::vector<double>(3, 0.0));
  CHECK(grads.data() == std::vector<double>(params.size(), 0.0));
}

TEST_CASE("backward accumulation is additive") {
  auto arch = simple_arch(5, 3, 8, 0.0);
  auto params = ModelParams::init(arch, 13);
  auto x = random_input(5, 14);
  ForwardCache cache;
  auto out = forward(arch, params, x, Mode::Infer, nullptr, &cache);
  auto dout = softmax_ce_grad(softmax(out), 1);

  auto once = backward(arch, params, cache, dout);
  ModelParams twice = params.zeros_like();
  backward_into(arch, params, cache, dout, twice);
  backward_into(arch, params, cache, dout, twice);
  for (size_t i = 0; i < once.size(); ++i) {
    CHECK(twice.data()[i] == doctest::Approx(2.0 * once.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  // worst sampled relative error must stay under 1e-4 for every head shape
  SUBCASE("baseline") { CHECK(fd_check(baseline_arch(7, 4), 101, 2) < 1e-4); }
  SUBCASE("simple with layer norm") { CHECK(fd_check(simple_arch(7, 5, 16, 0.0), 102, 3) < 1e-4); }
  SUBCASE("simple without layer norm") {
    HeadArchitecture arch;
    arch.kind = HeadKind::Simple;
    arch.num_classes = 5;
    arch.layers = {{7, 16, Activation::Gelu, false, 0.0},
                   {16, 5, Activation::Identity, false, 0.0}};
    CHECK(fd_check(arch, 103, 0) < 1e-4);
  }
  SUBCASE("three hidden layers") {
    HeadArchitecture arch;
    arch.kind = HeadKind::Simple;
    arch.num_classes = 5;
    arch.layers = {{7, 10, Activation::Gelu, true, 0.0},
                   {10, 8, Activation::Gelu, true, 0.0},
                   {8, 5, Activation::Identity, false, 0.0}};
    CHECK(fd_check(arch, 104, 4) < 1e-4);
  }
  SUBCASE("skillnet at full width") { CHECK(fd_check(skillnet_arch(12, 6), 105, 1) < 1e-4); }
  SUBCASE("one-vs-rest binary heads") { CHECK(fd_check(ovr_arch(7, 4), 106, 2) < 1e-4); }
}

TEST_CASE("one-vs-rest loss is a mean of per-class binary cross-entropies") {
  std::vector<double> scores{0.9, 0.2, 0.5};
  std::vector<double> targets{1.0, 0.0, 0.0};
  double expect = -(std::log(0.9) + std::log(0.8) + std::log(0.5)) / 3.0;
  CHECK(ovr_bce(scores, targets) == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(ovr_bce(scores, std::vector<double>{1.0}), ShapeMismatch);
}

TEST_CASE("head names round-trip") {
  for (HeadKind k : {HeadKind::Baseline, HeadKind::Simple, HeadKind::OvrBinary,
                     HeadKind::SkillNet}) {
    CHECK(head_kind_from_name(head_kind_name(k)) == k);
  }
  for (Activation a : {Activation::Identity, Activation::Gelu, Activation::Sigmoid}) {
    CHECK(activation_from_name(activation_name(a)) == a);
  }
  CHECK_THROWS_AS(head_kind_from_name("transformer"), std::invalid_argument);
  CHECK_THROWS_AS(activation_from_name("relu"), std::invalid_argument);
}

}  // TEST_SUITE
