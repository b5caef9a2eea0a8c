#include "fashrank/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fashrank/errors.hpp"
#include "nlohmann/json.hpp"

namespace fashrank {
namespace {

void require_finite(const Logits& row) {
  for (double v : row) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteInput, "logits contain a non-finite value");
    }
  }
}

void require_batch(const LogitsBatch& logits) {
  if (logits.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "logits batch must not be empty");
  }
  for (const auto& row : logits) require_finite(row);
}

double dot_weights(const Logits& p, const GuidanceConfig& cfg) {
  double e = 0.0;
  for (std::size_t j = 0; j < kNumClasses; ++j) e += p[j] * cfg.class_weights[j];
  return e;
}

}  // namespace

LinearClassifier::LinearClassifier(std::vector<double> weights, Logits bias)
    : weights_(std::move(weights)), bias_(bias), dim_(weights_.size() / kNumClasses) {
  if (weights_.empty() || weights_.size() % kNumClasses != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "linear classifier weights must be 3 x D with D >= 1");
  }
}

Logits LinearClassifier::evaluate(std::span<const double> latent) const {
  if (latent.size() != dim_) {
    throw Error(ErrorCode::kLengthMismatch,
                "latent has " + std::to_string(latent.size()) + " entries, classifier expects " +
                    std::to_string(dim_));
  }
  Logits z = bias_;
  for (std::size_t j = 0; j < kNumClasses; ++j) {
    const double* row = weights_.data() + j * dim_;
    double acc = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) acc += row[k] * latent[k];
    z[j] += acc;
  }
  return z;
}

std::vector<double> LinearClassifier::vjp(std::span<const double> latent,
                                          const Logits& cotangent) const {
  if (latent.size() != dim_) {
    throw Error(ErrorCode::kLengthMismatch, "latent size does not match classifier");
  }
  std::vector<double> g(dim_, 0.0);
  for (std::size_t j = 0; j < kNumClasses; ++j) {
    const double* row = weights_.data() + j * dim_;
    for (std::size_t k = 0; k < dim_; ++k) g[k] += row[k] * cotangent[j];
  }
  return g;
}

LinearClassifier read_linear_classifier(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open classifier '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("classifier file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("W") || !doc.contains("b") ||
      !doc.contains("dim")) {
    throw Error(ErrorCode::kInvalidArgument, "classifier file needs W, b and dim");
  }
  std::vector<double> weights;
  std::vector<double> b;
  try {
    const auto dim = doc["dim"].get<std::size_t>();
    const auto& w = doc["W"];
    if (w.size() == kNumClasses && w[0].is_array()) {
      for (const auto& row : w) {
        if (row.size() != dim) {
          throw Error(ErrorCode::kLengthMismatch, "classifier row length != dim");
        }
        for (const auto& v : row) weights.push_back(v.get<double>());
      }
    } else {
      weights = w.get<std::vector<double>>();
    }
    if (weights.size() != kNumClasses * dim) {
      throw Error(ErrorCode::kLengthMismatch, "classifier W must hold 3 x dim values");
    }
    b = doc["b"].get<std::vector<double>>();
    if (b.size() != kNumClasses) {
      throw Error(ErrorCode::kLengthMismatch, "classifier b must have 3 entries");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("classifier file: ") + e.what());
  }
  return LinearClassifier(std::move(weights), Logits{b[0], b[1], b[2]});
}

std::string linear_classifier_json(const LinearClassifier& clf) {
  nlohmann::ordered_json doc;
  doc["dim"] = clf.dim();
  doc["W"] = std::vector<double>(clf.weights().begin(), clf.weights().end());
  doc["b"] = std::vector<double>(clf.bias().begin(), clf.bias().end());
  return doc.dump() + "\n";
}

void GuidanceConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidConfig, "lambda must be positive");
  }
  for (std::size_t j = 1; j < kNumClasses; ++j) {
    if (!(class_weights[j] > class_weights[j - 1])) {
      throw Error(ErrorCode::kInvalidConfig, "class weights must be strictly increasing");
    }
  }
}

Logits softmax(const Logits& logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  Logits p;
  double total = 0.0;
  for (std::size_t j = 0; j < kNumClasses; ++j) {
    p[j] = std::exp(logits[j] - peak);
    total += p[j];
  }
  for (double& v : p) v /= total;
  return p;
}

double expected_class(const Logits& logits, const GuidanceConfig& cfg) {
  require_finite(logits);
  return dot_weights(softmax(logits), cfg);
}

double fashion_loss(const LogitsBatch& logits, const GuidanceConfig& cfg) {
  require_batch(logits);
  double total = 0.0;
  for (const auto& row : logits) total += dot_weights(softmax(row), cfg);
  return -total / static_cast<double>(logits.size());
}

LogitsBatch fashion_loss_grad_logits(const LogitsBatch& logits,
                                     const GuidanceConfig& cfg) {
  require_batch(logits);
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  LogitsBatch grad(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Logits p = softmax(logits[i]);
    const double e = dot_weights(p, cfg);
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      grad[i][j] = -inv_n * p[j] * (cfg.class_weights[j] - e);
    }
  }
  return grad;
}

std::vector<double> latent_gradient(std::span<const double> latent,
                                    const Classifier& clf,
                                    const GuidanceConfig& cfg) {
  const Logits z = clf.evaluate(latent);
  const LogitsBatch dz = fashion_loss_grad_logits({z}, cfg);
  std::vector<double> g = clf.vjp(latent, dz[0]);
  for (double& v : g) v *= cfg.lambda;
  return g;
}

GuidanceState guidance_step(const GuidanceState& state, const Classifier& clf,
                            const GuidanceConfig& cfg) {
  if (!(state.sigma_step > 0.0) || !std::isfinite(state.sigma_step)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma_step must be positive");
  }
  const std::vector<double> grad = latent_gradient(state.latent, clf, cfg);
  const double scale = state.sigma_step * state.sigma_step;

  GuidanceState next;
  next.latent.resize(state.latent.size());
  for (std::size_t k = 0; k < state.latent.size(); ++k) {
    next.latent[k] = state.latent[k] - scale * grad[k];
    if (!std::isfinite(next.latent[k])) {
      throw Error(ErrorCode::kNonFiniteLatent,
                  "latent entry " + std::to_string(k) +
                      " became non-finite; step size lambda*sigma^2 too large");
    }
  }
  next.step_index = state.step_index + 1;
  next.sigma_step = state.sigma_step;
  next.loss = fashion_loss({clf.evaluate(next.latent)}, cfg);
  return next;
}

std::vector<GuidanceState> run_guidance(const GuidanceState& initial,
                                        const Classifier& clf,
                                        const GuidanceConfig& cfg,
                                        std::span<const double> sigma_schedule) {
  cfg.validate();
  if (sigma_schedule.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sigma schedule must not be empty");
  }
  std::vector<GuidanceState> trajectory;
  trajectory.reserve(sigma_schedule.size() + 1);
  trajectory.push_back(initial);
  trajectory.back().loss = fashion_loss({clf.evaluate(initial.latent)}, cfg);

  for (std::size_t i = 0; i < sigma_schedule.size(); ++i) {
    GuidanceState current = trajectory.back();
    current.sigma_step = sigma_schedule[i];
    try {
      trajectory.push_back(guidance_step(current, clf, cfg));
    } catch (const Error& e) {
      throw GuidanceStepError(i, e.what());
    }
  }
  return trajectory;
}

std::vector<double> geometric_schedule(double start, double end, std::size_t steps) {
  if (!(start > 0.0) || !(end > 0.0) || steps == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "geometric schedule needs positive endpoints and steps >= 1");
  }
  std::vector<double> sigmas(steps);
  if (steps == 1) {
    sigmas[0] = start;
    return sigmas;
  }
  const double ratio = std::log(end / start) / static_cast<double>(steps - 1);
  for (std::size_t i = 0; i < steps; ++i) {
    sigmas[i] = start * std::exp(ratio * static_cast<double>(i));
  }
  sigmas.back() = end;
  return sigmas;
}

std::vector<double> parse_schedule(std::string_view text, std::size_t steps) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const auto colon = text.find(':', pos);
    parts.emplace_back(text.substr(pos, colon - pos));
    if (colon == std::string_view::npos) break;
    pos = colon + 1;
  }
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad number '" + s + "' in schedule");
    }
  };
  if (parts[0] == "geometric" && parts.size() == 3) {
    return geometric_schedule(number(parts[1]), number(parts[2]), steps);
  }
  if (parts[0] == "constant" && parts.size() == 2) {
    const double sigma = number(parts[1]);
    if (!(sigma > 0.0) || steps == 0) {
      throw Error(ErrorCode::kInvalidArgument, "constant schedule needs sigma > 0");
    }
    return std::vector<double>(steps, sigma);
  }
  throw Error(ErrorCode::kInvalidArgument,
              "schedule must be geometric:START:END or constant:SIGMA");
}

std::string trajectory_json(const std::vector<GuidanceState>& trajectory) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& s : trajectory) {
    doc.push_back({{"step", s.step_index},
                   {"sigma", s.sigma_step},
                   {"loss", s.loss},
                   {"expected_class", -s.loss}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace fashrank
