#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlass/nnet.hpp"

namespace occlass {

class TrainError : public std::runtime_error {
 public:
  enum class Kind { NonFiniteLoss, NonFiniteGradient, BadConfig };
  TrainError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

struct TrainConfig {
  double learning_rate = 1.26e-4;
  double weight_decay = 1.52e-6;
  size_t epochs = 75;
  size_t batch_size = 16;
  size_t accumulation_steps = 20;  // optimizer steps see batch_size * accumulation_steps samples
  double clip_norm = 1.0;
  size_t patience = 5;  // consecutive epochs without strict val-accuracy improvement
  uint64_t seed = 1;
  double eta_min = 0.0;  // cosine annealing floor
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;  // throws TrainError{BadConfig}
};

struct AdamWState {
  std::vector<double> m, v;
  size_t step = 0;

  AdamWState() = default;
  explicit AdamWState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Adam moment update with bias correction, then decoupled weight decay:
//   w -= alpha * m_hat / (sqrt(v_hat) + eps); w -= alpha * lambda * w.
// Throws TrainError{NonFiniteGradient} before touching any state.
void adamw_step(std::span<double> w, std::span<const double> g, AdamWState& state, double alpha,
                double lambda, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// eta_min + (eta_max - eta_min) * (1 + cos(pi t / T)) / 2, with the t=0 and
// t=T endpoints returned exactly.
double cosine_lr(size_t step, size_t total, double eta_max, double eta_min);

// Scales the whole gradient vector so its global L2 norm is at most
// clip_norm; returns the factor applied (1.0 when already within bounds).
double clip_gradients(std::span<double> grads, double clip_norm);

struct EpochStats {
  size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  size_t stopped_epoch = 0;  // epochs actually run
  size_t best_epoch = 0;     // epoch whose snapshot is returned
  double best_val_accuracy = 0.0;
  bool early_stopped = false;
  std::vector<std::string> warnings;
};

struct TrainResult {
  ModelParams params;  // snapshot at the best validation accuracy
  TrainReport report;
};

// Mini-batch training over pre-encoded input vectors. Gradients are averaged
// over the whole effective batch (accumulation_steps mini-batches) before
// each optimizer step, clipped, then stepped with cosine-annealed AdamW.
// Stops early after `patience` consecutive epochs without strict improvement
// in validation accuracy. Single-threaded and bit-deterministic in
// (seed, data order, config). A class present in val but absent from train
// is recorded as a warning. `log` receives one line per epoch:
// epoch=<k> train_loss=<v> val_acc=<v> lr=<v>
TrainResult train_model(const HeadArchitecture& arch, std::span<const std::vector<double>> train_x,
                        std::span<const size_t> train_y,
                        std::span<const std::vector<double>> val_x,
                        std::span<const size_t> val_y, const TrainConfig& config,
                        std::ostream* log = nullptr);

}  // namespace occlass
