#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlass/rng.hpp"

namespace occlass {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Activation { Identity, Gelu, Sigmoid };
enum class HeadKind { Baseline, Simple, OvrBinary, SkillNet };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);
const char* head_kind_name(HeadKind k);
HeadKind head_kind_from_name(const std::string& name);

// One dense block: z = Wx + b, optional layer norm (affine), activation,
// then dropout (train mode only).
struct LayerSpec {
  size_t in_dim = 0;
  size_t out_dim = 0;
  Activation activation = Activation::Identity;
  bool layer_norm = false;
  double dropout_rate = 0.0;
};

struct HeadArchitecture {
  HeadKind kind = HeadKind::Baseline;
  std::vector<LayerSpec> layers;
  size_t num_classes = 0;

  size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
  size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }
  void validate() const;  // throws std::invalid_argument on any inconsistency
};

// Factories for the four head shapes. The simple head's hidden width is a
// configuration knob (default 512); the skill head's widths are fixed.
HeadArchitecture baseline_arch(size_t in_dim, size_t num_classes);
HeadArchitecture simple_arch(size_t in_dim, size_t num_classes, size_t hidden = 512,
                             double dropout = 0.35);
HeadArchitecture skillnet_arch(size_t in_dim, size_t num_classes, double dropout = 0.3);
HeadArchitecture ovr_arch(size_t in_dim, size_t num_classes);

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kLogFloor = 1e-12;

// All parameters live in one flat buffer so the optimizer can treat the
// model as a single vector; spans select per-layer views. Gradients reuse
// the same layout via zeros_like().
class ModelParams {
 public:
  ModelParams() = default;

  static ModelParams init(const HeadArchitecture& arch, uint64_t seed);
  static ModelParams zeros(const HeadArchitecture& arch);
  ModelParams zeros_like() const;

  size_t size() const { return data_.size(); }
  size_t layer_count() const { return blocks_.size(); }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::span<double> weight(size_t layer);              // row-major out_dim x in_dim
  std::span<const double> weight(size_t layer) const;
  std::span<double> bias(size_t layer);
  std::span<const double> bias(size_t layer) const;
  std::span<double> gain(size_t layer);                // empty when no layer norm
  std::span<const double> gain(size_t layer) const;
  std::span<double> ln_bias(size_t layer);
  std::span<const double> ln_bias(size_t layer) const;

  bool all_finite() const;

 private:
  struct Block {
    size_t in = 0, out = 0;
    bool ln = false;
    size_t w = 0, b = 0, g = 0, lb = 0;  // offsets into data_
  };

  static ModelParams layout(const HeadArchitecture& arch);
  const Block& block(size_t layer) const;

  std::vector<double> data_;
  std::vector<Block> blocks_;
};

enum class Mode { Train, Infer };

struct LayerCache {
  std::vector<double> input;      // x fed to the layer
  std::vector<double> linear;     // Wx + b
  std::vector<double> normed;     // post layer-norm affine (== linear when ln off)
  std::vector<double> activated;  // post activation
  std::vector<double> mask;       // dropout multipliers; empty => identity
  double mean = 0.0;
  double inv_std = 0.0;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
};

// Returns the final layer's post-activation output: logits for softmax heads
// (identity last activation), per-class sigmoid scores for one-vs-rest.
// Train mode draws dropout masks from rng; infer mode is deterministic and
// never touches rng.
std::vector<double> forward(const HeadArchitecture& arch, const ModelParams& params,
                            std::span<const double> x, Mode mode, Rng* rng = nullptr,
                            ForwardCache* cache = nullptr);

// Accumulates d(loss)/d(params) into grads given d(loss)/d(output); returns
// d(loss)/d(input) for callers that chain further.
std::vector<double> backward_into(const HeadArchitecture& arch, const ModelParams& params,
                                  const ForwardCache& cache, std::span<const double> dout,
                                  ModelParams& grads);
ModelParams backward(const HeadArchitecture& arch, const ModelParams& params,
                     const ForwardCache& cache, std::span<const double> dout);

double gelu(double x);       // exact Gaussian CDF form: x * Phi(x)
double gelu_grad(double x);  // Phi(x) + x * phi(x)
double sigmoid(double x);

// Max-subtracted softmax; entries positive, sum 1.
std::vector<double> softmax(std::span<const double> logits);

// -log(probs[target]) with the probability floored at kLogFloor.
double cross_entropy(std::span<const double> probs, size_t target);

// Gradient of cross_entropy(softmax(logits), target) w.r.t. logits.
std::vector<double> softmax_ce_grad(std::span<const double> probs, size_t target);

// Cross-entropy between the temperature-softened teacher distribution and
// the student distribution at the same temperature. Minimized over students
// exactly when the student matches the teacher (value = softened teacher
// entropy).
double distill_loss(std::span<const double> teacher_logits,
                    std::span<const double> student_logits, double temperature);
std::vector<double> distill_grad(std::span<const double> teacher_logits,
                                 std::span<const double> student_logits, double temperature);

// Mean binary cross-entropy across per-class sigmoid scores against 0/1
// targets; optionally emits the gradient w.r.t. the scores.
double ovr_bce(std::span<const double> scores, std::span<const double> targets,
               std::vector<double>* grad_scores = nullptr);

}  // namespace occlass
