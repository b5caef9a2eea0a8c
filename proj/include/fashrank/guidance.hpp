#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fashrank {

inline constexpr std::size_t kNumClasses = 3;
// Flattened mid-block feature size (1280 channels x 8 x 8).
inline constexpr std::size_t kMidBlockFeatureDim = 1280 * 8 * 8;

using Logits = std::array<double, kNumClasses>;
// N x 3 class logits, one row per sample.
using LogitsBatch = std::vector<Logits>;

// Differentiable map from a flat latent to three class logits. Implementations
// must be safe to call concurrently from independent trajectories.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t dim() const = 0;
  virtual Logits evaluate(std::span<const double> latent) const = 0;
  // Vector-Jacobian product: J(latent)^T * cotangent, shaped like latent.
  virtual std::vector<double> vjp(std::span<const double> latent,
                                  const Logits& cotangent) const = 0;
};

// logits = W x + b with W stored 3 x D row-major.
class LinearClassifier final : public Classifier {
 public:
  LinearClassifier(std::vector<double> weights, Logits bias);

  std::size_t dim() const override { return dim_; }
  Logits evaluate(std::span<const double> latent) const override;
  std::vector<double> vjp(std::span<const double> latent,
                          const Logits& cotangent) const override;

  std::span<const double> weights() const { return weights_; }
  const Logits& bias() const { return bias_; }

 private:
  std::vector<double> weights_;
  Logits bias_;
  std::size_t dim_;
};

// Reads {"W": 3xD (flat row-major or nested rows), "b": [3], "dim": D}.
LinearClassifier read_linear_classifier(const std::filesystem::path& path);
std::string linear_classifier_json(const LinearClassifier& clf);

struct GuidanceConfig {
  double lambda = 0.1;
  // Ordinal weight of each class; must be strictly increasing.
  std::array<double, kNumClasses> class_weights{1.0, 2.0, 3.0};

  void validate() const;
};

struct GuidanceState {
  std::vector<double> latent;
  std::size_t step_index = 0;
  // Noise standard deviation used to reach this state.
  double sigma_step = 1.0;
  // Fashion loss evaluated at `latent`.
  double loss = 0.0;
};

// Softmax with max subtraction.
Logits softmax(const Logits& logits);

// Negative mean of the softmax-expected class weight. Lies in [-3, -1] for
// the default weights. Throws kNonFiniteInput.
double fashion_loss(const LogitsBatch& logits, const GuidanceConfig& cfg = {});

// Closed-form dL/dz: -(1/N) p_ij (w_j - E_i), with E_i the expected weight.
LogitsBatch fashion_loss_grad_logits(const LogitsBatch& logits,
                                     const GuidanceConfig& cfg = {});

// Expected class under the softmax of one logit row.
double expected_class(const Logits& logits, const GuidanceConfig& cfg = {});

// Scaled latent gradient lambda * dL/dx through the classifier (N = 1).
std::vector<double> latent_gradient(std::span<const double> latent,
                                    const Classifier& clf,
                                    const GuidanceConfig& cfg);

// One update x <- x - sigma^2 * lambda * dL/dx. The returned state has its
// loss evaluated at the new latent. Throws kNonFiniteLatent.
GuidanceState guidance_step(const GuidanceState& state, const Classifier& clf,
                            const GuidanceConfig& cfg);

// Applies one step per schedule entry; returns steps + 1 states, the first
// being `initial` with its loss evaluated. Step failures are rethrown as
// GuidanceStepError carrying the schedule index.
std::vector<GuidanceState> run_guidance(const GuidanceState& initial,
                                        const Classifier& clf,
                                        const GuidanceConfig& cfg,
                                        std::span<const double> sigma_schedule);

// `steps` values decaying geometrically from `start` to `end` inclusive.
std::vector<double> geometric_schedule(double start, double end, std::size_t steps);

// Parses "geometric:START:END" or "constant:SIGMA" into `steps` values.
std::vector<double> parse_schedule(std::string_view text, std::size_t steps);

// JSON list of {step, sigma, loss, expected_class}.
std::string trajectory_json(const std::vector<GuidanceState>& trajectory);

}  // namespace fashrank
