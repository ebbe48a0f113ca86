#include "occlass/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "occlass/util.hpp"

namespace occlass {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) {
    throw TrainError(TrainError::Kind::BadConfig, what);
  };
  if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
  if (weight_decay < 0.0) bad("weight_decay must be non-negative");
  if (epochs == 0) bad("epochs must be positive");
  if (batch_size == 0) bad("batch_size must be positive");
  if (accumulation_steps == 0) bad("accumulation_steps must be at least 1");
  if (!(clip_norm > 0.0)) bad("clip_norm must be positive");
  if (eta_min < 0.0 || eta_min > learning_rate) bad("eta_min must lie in [0, learning_rate]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    bad("betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) bad("adam_eps must be positive");
}

void adamw_step(std::span<double> w, std::span<const double> g, AdamWState& state, double alpha,
                double lambda, double beta1, double beta2, double eps) {
  if (w.size() != g.size() || state.m.size() != w.size() || state.v.size() != w.size()) {
    throw ShapeMismatch("optimizer state does not match the parameter vector");
  }
  for (double v : g) {
    if (!std::isfinite(v)) {
      throw TrainError(TrainError::Kind::NonFiniteGradient,
                       "non-finite gradient at optimizer step " +
                           std::to_string(state.step + 1));
    }
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < w.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g[i] * g[i];
    double m_hat = state.m[i] / bc1;
    double v_hat = state.v[i] / bc2;
    w[i] -= alpha * m_hat / (std::sqrt(v_hat) + eps);
    w[i] -= alpha * lambda * w[i];
  }
}

double cosine_lr(size_t step, size_t total, double eta_max, double eta_min) {
  if (total == 0 || step > total) {
    throw TrainError(TrainError::Kind::BadConfig, "cosine schedule needs 0 <= step <= total");
  }
  if (step == 0) return eta_max;
  if (step == total) return eta_min;
  double c = std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total));
  return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + c);
}

double clip_gradients(std::span<double> grads, double clip_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm <= clip_norm || norm == 0.0) return 1.0;
  double scale = clip_norm / norm;
  for (double& g : grads) g *= scale;
  return scale;
}

namespace {

// Per-sample loss and output gradient: cross-entropy over softmax logits for
// softmax heads, mean binary cross-entropy for one-vs-rest heads.
double sample_loss_grad(const HeadArchitecture& arch, const std::vector<double>& out,
                        size_t label, std::vector<double>& dout) {
  if (arch.kind == HeadKind::OvrBinary) {
    std::vector<double> targets(out.size(), 0.0);
    targets[label] = 1.0;
    return ovr_bce(out, targets, &dout);
  }
  auto probs = softmax(out);
  dout = softmax_ce_grad(probs, label);
  return cross_entropy(probs, label);
}

double accuracy(const HeadArchitecture& arch, const ModelParams& params,
                std::span<const std::vector<double>> x, std::span<const size_t> y) {
  size_t hits = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    auto out = forward(arch, params, x[i], Mode::Infer);
    size_t pred = static_cast<size_t>(std::max_element(out.begin(), out.end()) - out.begin());
    hits += pred == y[i];
  }
  return static_cast<double>(hits) / static_cast<double>(x.size());
}

}  // namespace

TrainResult train_model(const HeadArchitecture& arch, std::span<const std::vector<double>> train_x,
                        std::span<const size_t> train_y,
                        std::span<const std::vector<double>> val_x,
                        std::span<const size_t> val_y, const TrainConfig& config,
                        std::ostream* log) {
  config.validate();
  arch.validate();
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size()) {
    throw TrainError(TrainError::Kind::BadConfig, "inputs and labels must align");
  }
  if (train_x.empty()) throw TrainError(TrainError::Kind::BadConfig, "training set is empty");
  if (val_x.empty()) throw TrainError(TrainError::Kind::BadConfig, "validation set is empty");
  for (size_t label : train_y) {
    if (label >= arch.num_classes) {
      throw TrainError(TrainError::Kind::BadConfig, "train label out of class range");
    }
  }
  for (size_t label : val_y) {
    if (label >= arch.num_classes) {
      throw TrainError(TrainError::Kind::BadConfig, "val label out of class range");
    }
  }

  TrainResult result;
  TrainReport& report = result.report;

  {
    std::set<size_t> train_classes(train_y.begin(), train_y.end());
    std::set<size_t> val_only;
    for (size_t label : val_y) {
      if (!train_classes.count(label)) val_only.insert(label);
    }
    for (size_t label : val_only) {
      std::string w = "class " + std::to_string(label) +
                      " appears in validation but never in training";
      report.warnings.push_back(w);
      if (log) *log << "warning: " << w << '\n';
    }
  }

  ModelParams params = ModelParams::init(arch, config.seed);
  AdamWState state(params.size());
  ModelParams grad_sum = params.zeros_like();

  const size_t n = train_x.size();
  const size_t effective = config.batch_size * config.accumulation_steps;
  const size_t steps_per_epoch = (n + effective - 1) / effective;
  const size_t total_steps = steps_per_epoch * config.epochs;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  Rng base(config.seed);
  double best_acc = -1.0;
  size_t bad_epochs = 0;
  size_t global_step = 0;

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng = base.fork(epoch);
    epoch_rng.shuffle(order);

    double loss_sum = 0.0;
    double lr_used = cosine_lr(global_step, total_steps, config.learning_rate, config.eta_min);
    for (size_t start = 0; start < n; start += effective) {
      size_t count = std::min(effective, n - start);
      std::fill(grad_sum.data().begin(), grad_sum.data().end(), 0.0);

      std::vector<double> dout;
      ForwardCache cache;
      for (size_t k = 0; k < count; ++k) {
        size_t idx = order[start + k];
        auto out = forward(arch, params, train_x[idx], Mode::Train, &epoch_rng, &cache);
        double loss = sample_loss_grad(arch, out, train_y[idx], dout);
        if (!std::isfinite(loss)) {
          throw TrainError(TrainError::Kind::NonFiniteLoss,
                           "non-finite loss at epoch " + std::to_string(epoch));
        }
        loss_sum += loss;
        backward_into(arch, params, cache, dout, grad_sum);
      }

      double inv = 1.0 / static_cast<double>(count);
      for (double& g : grad_sum.data()) g *= inv;
      clip_gradients(grad_sum.data(), config.clip_norm);

      lr_used = cosine_lr(global_step, total_steps, config.learning_rate, config.eta_min);
      adamw_step(params.data(), grad_sum.data(), state, lr_used, config.weight_decay,
                 config.beta1, config.beta2, config.adam_eps);
      ++global_step;
    }

    double val_acc = accuracy(arch, params, val_x, val_y);
    EpochStats stats{epoch, loss_sum / static_cast<double>(n), val_acc, lr_used};
    report.epochs.push_back(stats);
    if (log) {
      *log << "epoch=" << epoch << " train_loss=" << format_double(stats.train_loss)
           << " val_acc=" << format_double(stats.val_accuracy)
           << " lr=" << format_double(stats.lr) << '\n';
    }

    if (val_acc > best_acc) {
      best_acc = val_acc;
      report.best_epoch = epoch;
      report.best_val_accuracy = val_acc;
      result.params = params;  // snapshot
      bad_epochs = 0;
    } else {
      // ties do not reset patience: strict improvement required
      ++bad_epochs;
      if (bad_epochs >= config.patience) {
        report.stopped_epoch = epoch;
        report.early_stopped = true;
        return result;
      }
    }
    report.stopped_epoch = epoch;
  }
  return result;
}

}  // namespace occlass
