#include "fashrank/rating.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fashrank/errors.hpp"

namespace fashrank {
namespace {

double pair_scale_squared(const Rating& a, const Rating& b,
                          const RatingConfig& cfg) {
  return a.sigma * a.sigma + b.sigma * b.sigma + 2.0 * cfg.beta() * cfg.beta();
}

// exp(mu_a/c) / (exp(mu_a/c) + exp(mu_b/c)) rewritten as a logistic so large
// rating gaps do not overflow.
double logistic_win(double mu_a, double mu_b, double c) {
  return 1.0 / (1.0 + std::exp((mu_b - mu_a) / c));
}

}  // namespace

RatingConfig::RatingConfig()
    : RatingConfig(25.0, 25.0 / 3.0, 25.0 / 6.0, 0.0001) {}

RatingConfig::RatingConfig(double mu0, double sigma0, double beta, double kappa)
    : mu0_(mu0), sigma0_(sigma0), beta_(beta), kappa_(kappa) {
  if (!std::isfinite(mu0)) {
    throw Error(ErrorCode::kInvalidConfig, "mu0 must be finite");
  }
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) {
    throw Error(ErrorCode::kInvalidConfig, "sigma0 must be positive");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kInvalidConfig, "beta must be positive");
  }
  if (!(kappa > 0.0 && kappa < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "kappa must lie in (0, 1)");
  }
}

Rating default_rating(const RatingConfig& cfg) {
  return Rating{cfg.mu0(), cfg.sigma0()};
}

std::pair<Rating, Rating> update_pair(const Rating& a, const Rating& b,
                                      MatchOutcome outcome,
                                      const RatingConfig& cfg) {
  const double c2 = pair_scale_squared(a, b, cfg);
  const double c = std::sqrt(c2);
  const double p_a = logistic_win(a.mu, b.mu, c);
  const double p_b = 1.0 - p_a;

  const double var_a = a.sigma * a.sigma;
  const double var_b = b.sigma * b.sigma;

  Rating a2;
  Rating b2;
  a2.mu = a.mu + (var_a / c) * (outcome.score_a() - p_a);
  b2.mu = b.mu + (var_b / c) * (outcome.score_b() - p_b);

  const double eta_a = (a.sigma / c) * (var_a / c2) * p_a * p_b;
  const double eta_b = (b.sigma / c) * (var_b / c2) * p_a * p_b;
  a2.sigma = std::sqrt(var_a * std::max(1.0 - eta_a, cfg.kappa()));
  b2.sigma = std::sqrt(var_b * std::max(1.0 - eta_b, cfg.kappa()));
  return {a2, b2};
}

double win_probability(const Rating& a, const Rating& b,
                       const RatingConfig& cfg) {
  return logistic_win(a.mu, b.mu, std::sqrt(pair_scale_squared(a, b, cfg)));
}

double match_quality(const Rating& a, const Rating& b,
                     const RatingConfig& cfg) {
  const double c2 = pair_scale_squared(a, b, cfg);
  const double gap = a.mu - b.mu;
  return std::sqrt(2.0 * cfg.beta() * cfg.beta() / c2) *
         std::exp(-gap * gap / (2.0 * c2));
}

}  // namespace fashrank
