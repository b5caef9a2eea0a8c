#pragma once

#include <utility>

namespace fashrank {

// Gaussian belief over an item's fashionability skill.
struct Rating {
  double mu = 0.0;
  double sigma = 1.0;

  friend bool operator==(const Rating&, const Rating&) = default;
};

// Constants of the two-player Bradley-Terry full-pairing model. Constructing
// a config with sigma0 <= 0, beta <= 0 or kappa outside (0, 1) throws
// Error(kInvalidConfig).
class RatingConfig {
 public:
  RatingConfig();
  RatingConfig(double mu0, double sigma0, double beta, double kappa);

  double mu0() const { return mu0_; }
  double sigma0() const { return sigma0_; }
  double beta() const { return beta_; }
  double kappa() const { return kappa_; }

 private:
  double mu0_;
  double sigma0_;
  double beta_;
  double kappa_;
};

// Score of the first player: 1 win, 0.5 draw, 0 loss.
class MatchOutcome {
 public:
  static MatchOutcome first_wins() { return MatchOutcome(1.0); }
  static MatchOutcome draw() { return MatchOutcome(0.5); }
  static MatchOutcome second_wins() { return MatchOutcome(0.0); }

  double score_a() const { return score_a_; }
  double score_b() const { return 1.0 - score_a_; }

 private:
  explicit MatchOutcome(double score_a) : score_a_(score_a) {}
  double score_a_;
};

Rating default_rating(const RatingConfig& cfg);

// Returns the posterior ratings of (a, b) after one comparison.
std::pair<Rating, Rating> update_pair(const Rating& a, const Rating& b,
                                      MatchOutcome outcome,
                                      const RatingConfig& cfg);

// Probability that `a` beats `b` under the Bradley-Terry link.
double win_probability(const Rating& a, const Rating& b,
                       const RatingConfig& cfg);

// Draw-likelihood proxy in (0, 1]; largest for evenly matched, certain items.
double match_quality(const Rating& a, const Rating& b, const RatingConfig& cfg);

// Conservative score mu - 3 sigma.
inline double ordinal(const Rating& r) { return r.mu - 3.0 * r.sigma; }

}  // namespace fashrank
