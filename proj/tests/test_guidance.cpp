#include <fstream>

#include "catch_amalgamated.hpp"
#include "fashrank/errors.hpp"
#include "fashrank/guidance.hpp"
#include "nlohmann/json.hpp"
#include "test_support.hpp"

using namespace fashrank;
using namespace fashrank::testing;
using Catch::Approx;

namespace {

// Logits that do not depend on the latent.
class ConstantClassifier final : public Classifier {
 public:
  ConstantClassifier(std::size_t dim, Logits z) : dim_(dim), z_(z) {}
  std::size_t dim() const override { return dim_; }
  Logits evaluate(std::span<const double>) const override { return z_; }
  std::vector<double> vjp(std::span<const double> latent, const Logits&) const override {
    return std::vector<double>(latent.size(), 0.0);
  }

 private:
  std::size_t dim_;
  Logits z_;
};

// dL/dx is the all-ones vector regardless of the cotangent.
class UnitGradientClassifier final : public Classifier {
 public:
  std::size_t dim() const override { return 4; }
  Logits evaluate(std::span<const double>) const override { return {0, 0, 0}; }
  std::vector<double> vjp(std::span<const double> latent, const Logits&) const override {
    return std::vector<double>(latent.size(), 1.0);
  }
};

class NanClassifier final : public Classifier {
 public:
  std::size_t dim() const override { return 2; }
  Logits evaluate(std::span<const double>) const override { return {0, 0, 0}; }
  std::vector<double> vjp(std::span<const double> latent, const Logits&) const override {
    return std::vector<double>(latent.size(), 1e307);
  }
};

LinearClassifier make(const LinearInstance& inst) {
  return LinearClassifier(inst.weights, inst.bias);
}

}  // namespace

TEST_CASE("fashion loss examples", "[guidance]") {
  CHECK(fashion_loss({{0, 0, 0}}) == Approx(-2.0));
  // mpmath, 40 digits.
  CHECK(fashion_loss({{0, 0, 10}}) == Approx(-2.9998638125765115).epsilon(1e-14));
  CHECK(fashion_loss({{0, 0, 0}, {0, 0, 0}}) == Approx(-2.0));
  const auto p = softmax({0, 0, 0});
  for (double v : p) CHECK(v == Approx(1.0 / 3.0));
  CHECK(expected_class({0, 0, 10}) == Approx(2.9998638125765115));
  // Huge logits stay finite through max subtraction.
  CHECK(fashion_loss({{1000, 0, -1000}}) == Approx(-1.0));
}

TEST_CASE("loss gradient examples", "[guidance]") {
  const auto g = fashion_loss_grad_logits({{0, 0, 0}});
  REQUIRE(g.size() == 1);
  CHECK(g[0][0] == Approx(1.0 / 3.0));
  CHECK(g[0][1] == Approx(0.0).margin(1e-15));
  CHECK(g[0][2] == Approx(-1.0 / 3.0));
  // Batch gradient is scaled by 1/N.
  const auto g2 = fashion_loss_grad_logits({{0, 0, 0}, {0, 0, 0}});
  CHECK(g2[1][0] == Approx(1.0 / 6.0));
}

TEST_CASE("non-finite logits are rejected", "[guidance]") {
  for (const LogitsBatch& bad : {LogitsBatch{{0, NAN, 0}}, LogitsBatch{{INFINITY, 0, 0}}}) {
    try {
      fashion_loss(bad);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNonFiniteInput);
    }
    CHECK_THROWS_AS(fashion_loss_grad_logits(bad), Error);
  }
  CHECK_THROWS_AS(fashion_loss({}), Error);
}

TEST_CASE("loss gradient properties", "[guidance][property]") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    LogitsBatch z(1 + trial % 6);
    for (auto& row : z) for (double& v : row) v = normal(rng);
    const double loss = fashion_loss(z);
    CHECK(loss >= -3.0);
    CHECK(loss <= -1.0);
    CHECK(loss == Approx(loss_oracle(z)).epsilon(1e-12));

    const auto g = fashion_loss_grad_logits(z);
    const auto fd = loss_grad_fd(z);
    std::vector<double> flat_g, flat_fd;
    for (std::size_t i = 0; i < z.size(); ++i) {
      // Rows sum to zero; shifting all logits leaves the loss unchanged.
      CHECK(g[i][0] + g[i][1] + g[i][2] == Approx(0.0).margin(1e-14));
      // Raising the high class lowers the loss, raising the low class raises it.
      CHECK(g[i][0] > 0.0);
      CHECK(g[i][2] < 0.0);
      for (int j = 0; j < 3; ++j) {
        flat_g.push_back(g[i][j]);
        flat_fd.push_back(fd[i][j]);
      }
    }
    CHECK(relative_error(flat_g, flat_fd) < 1e-5);
  }
}

TEST_CASE("latent gradient matches finite differences", "[guidance][property]") {
  const GuidanceConfig cfg;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto inst = gradient_instance(seed, 16 + seed % 20);
    const auto clf = make(inst);
    const auto analytic = latent_gradient(inst.latent, clf, cfg);
    CHECK(relative_error(analytic, latent_grad_fd(inst.weights, inst.bias, inst.latent,
                                                  cfg.lambda)) < 1e-5);
  }
}

TEST_CASE("linear classifier", "[guidance]") {
  const LinearClassifier clf({1, 2, 0, 0, 0, -1}, {0.5, 0, 0});
  CHECK(clf.dim() == 2);
  const std::vector<double> x{3, 4};
  CHECK(clf.evaluate(x) == Logits{11.5, 0, -4});
  CHECK(clf.vjp(x, {1, 0, 2}) == std::vector<double>{1, 0});
  CHECK_THROWS_AS(LinearClassifier({1, 2, 3, 4}, {0, 0, 0}), Error);
  CHECK_THROWS_AS(clf.evaluate(std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("classifier files", "[guidance]") {
  TempDir dir("guide");
  const LinearClassifier clf({1, 2, 3, 4, 5, 6}, {0.1, 0.2, 0.3});
  {
    std::ofstream out(dir / "flat.json");
    out << linear_classifier_json(clf);
    std::ofstream nested(dir / "nested.json");
    nested << R"({"W": [[1,2],[3,4],[5,6]], "b": [0.1,0.2,0.3], "dim": 2})";
    std::ofstream bad(dir / "bad.json");
    bad << R"({"W": [[1,2],[3,4],[5,6]], "b": [0.1,0.2,0.3], "dim": 3})";
    std::ofstream typed(dir / "typed.json");
    typed << R"({"W": "weights", "b": [0.1,0.2,0.3], "dim": 2})";
  }
  for (const char* name : {"flat.json", "nested.json"}) {
    const auto back = read_linear_classifier(dir / name);
    CHECK(back.dim() == 2);
    CHECK(std::vector<double>(back.weights().begin(), back.weights().end()) ==
          std::vector<double>{1, 2, 3, 4, 5, 6});
    CHECK(back.bias() == Logits{0.1, 0.2, 0.3});
  }
  CHECK_THROWS_AS(read_linear_classifier(dir / "bad.json"), Error);
  CHECK_THROWS_AS(read_linear_classifier(dir / "typed.json"), Error);
  CHECK_THROWS_AS(read_linear_classifier(dir / "absent.json"), Error);
}

TEST_CASE("guidance step arithmetic", "[guidance]") {
  GuidanceConfig cfg;
  const UnitGradientClassifier unit;
  GuidanceState s{{0.5, -1, 2, 0}, 0, 1.0, 0.0};
  const auto next = guidance_step(s, unit, cfg);
  CHECK(next.step_index == 1);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(next.latent[k] == Approx(s.latent[k] - 0.1).epsilon(1e-15));
  }
  s.sigma_step = 2.0;
  CHECK(guidance_step(s, unit, cfg).latent[0] == Approx(0.1));

  const ConstantClassifier constant(3, {1, 2, 3});
  GuidanceState c{{1, 2, 3}, 4, 1.0, 0.0};
  const auto same = guidance_step(c, constant, cfg);
  CHECK(same.latent == c.latent);
  CHECK(same.step_index == 5);
  CHECK(same.loss == Approx(fashion_loss({{1, 2, 3}})));
}

TEST_CASE("non-finite latents abort with the failing step", "[guidance]") {
  const NanClassifier nan;
  GuidanceConfig cfg;
  cfg.lambda = 10.0;
  // lambda * vjp is finite; the step is not once sigma^2 > 1.8.
  GuidanceState s{{0, 0}, 0, 2.0, 0.0};
  try {
    guidance_step(s, nan, cfg);
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFiniteLatent);
  }
  const std::vector<double> schedule{1e-200, 1e-200, 5.0};
  try {
    run_guidance(s, nan, cfg, schedule);
    FAIL("accepted");
  } catch (const GuidanceStepError& e) {
    CHECK(e.step() == 2);
    CHECK(e.code() == ErrorCode::kNonFiniteLatent);
  }
}

TEST_CASE("run_guidance trajectories", "[guidance]") {
  const GuidanceConfig cfg;
  const ConstantClassifier constant(2, {0, 1, 0});
  GuidanceState s{{0.25, 0.75}, 0, 1.0, 0.0};
  CHECK_THROWS_AS(run_guidance(s, constant, cfg, std::vector<double>{}), Error);
  const std::vector<double> one{1.0};
  const auto flat = run_guidance(s, constant, cfg, one);
  REQUIRE(flat.size() == 2);
  CHECK(flat[0].latent == flat[1].latent);

  const auto inst = guidance_instance(3);
  const auto clf = make(inst);
  const auto schedule = geometric_schedule(1.0, 0.1, 50);
  const auto traj = run_guidance({inst.latent, 0, 1.0, 0.0}, clf, cfg, schedule);
  REQUIRE(traj.size() == 51);
  CHECK(traj[0].loss == Approx(-2.0));
  for (std::size_t k = 1; k < traj.size(); ++k) {
    CHECK(traj[k].step_index == k);
    CHECK(traj[k].sigma_step == schedule[k - 1]);
    CHECK(traj[k].loss < traj[k - 1].loss);
  }
  CHECK(-traj.back().loss > -traj.front().loss + 0.5);

  const auto json = nlohmann::json::parse(trajectory_json(traj));
  REQUIRE(json.size() == 51);
  CHECK(json[50]["expected_class"].get<double>() == Approx(-traj.back().loss));
}

TEST_CASE("small steps descend on random linear classifiers", "[guidance][property]") {
  const GuidanceConfig cfg;
  for (std::uint64_t seed = 100; seed < 160; ++seed) {
    const auto inst = gradient_instance(seed, 24);
    const auto clf = make(inst);
    GuidanceState s{inst.latent, 0, 0.5, 0.0};
    s.loss = fashion_loss({clf.evaluate(s.latent)}, cfg);
    for (int k = 0; k < 20; ++k) {
      const auto next = guidance_step(s, clf, cfg);
      CHECK(next.loss < s.loss);
      s = next;
    }
  }
}

TEST_CASE("full-size mid-block latents", "[guidance]") {
  const std::size_t d = kMidBlockFeatureDim;
  std::vector<double> w(3 * d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    w[2 * d + k] = 1e-3;
    w[k] = -1e-3;
  }
  const LinearClassifier clf(std::move(w), {0, 0, 0});
  const std::vector<double> schedule{1.0, 0.5};
  const auto traj = run_guidance({std::vector<double>(d, 0.0), 0, 1.0, 0.0}, clf, {},
                                 schedule);
  REQUIRE(traj.size() == 3);
  CHECK(traj.back().latent.size() == d);
  CHECK(traj[2].loss < traj[0].loss);
}

TEST_CASE("schedules", "[guidance]") {
  const auto g = geometric_schedule(1.0, 0.1, 50);
  REQUIRE(g.size() == 50);
  CHECK(g.front() == Approx(1.0));
  CHECK(g.back() == Approx(0.1));
  for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k] < g[k - 1]);
  CHECK(geometric_schedule(2.0, 0.5, 1) == std::vector<double>{2.0});
  CHECK(parse_schedule("geometric:1.0:0.1", 50) == g);
  CHECK(parse_schedule("constant:0.3", 3) == std::vector<double>{0.3, 0.3, 0.3});
  for (const char* bad : {"", "geometric:1", "constant:-1", "linear:1:2", "constant:x",
                          "geometric:0:1"}) {
    CHECK_THROWS_AS(parse_schedule(bad, 5), Error);
  }
  CHECK_THROWS_AS(parse_schedule("constant:1", 0), Error);
}

TEST_CASE("guidance config validation", "[guidance]") {
  GuidanceConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.class_weights = {1, 1, 3};
  CHECK_THROWS_AS(cfg.validate(), Error);
}
