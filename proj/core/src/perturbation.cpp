#include "purc/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace purc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tensions beyond this would overflow the exponential conjugates. A feasible
// dual iterate never gets near it, so crossing it is treated as a bug signal
// rather than saturated arithmetic.
constexpr double kExpArgLimit = 700.0;

void check_exp_arg(double eta, const char* family) {
  if (eta > kExpArgLimit) {
    throw DivergingDualError(std::string(family) + " conjugate diverges at tension " +
                             std::to_string(eta));
  }
}

class QuadraticPerturbation final : public LinkPerturbation {
 public:
  double eval(double xi) const override {
    if (xi < 0.0) return kInf;
    return 0.5 * xi * xi;
  }
  double conj(double eta) const override {
    double p = std::max(0.0, eta);
    return 0.5 * p * p;
  }
  double grad_conj(double eta) const override { return std::max(0.0, eta); }
  Curvature hess_conj(double eta) const override {
    if (eta == 0.0) return {0.5, false};
    return {eta > 0.0 ? 1.0 : 0.0, true};
  }
  Curvature hess_primal(double) const override { return {1.0, true}; }
  double grad_primal_lower(double xi) const override { return xi > 0.0 ? xi : -kInf; }
  double grad_primal_upper(double xi) const override { return xi; }
  std::optional<double> strong_convexity_modulus() const override { return 1.0; }
  std::vector<double> kink_points() const override { return {0.0}; }
  std::string name() const override { return "quadratic"; }
};

class EntropyPerturbation final : public LinkPerturbation {
 public:
  double eval(double xi) const override {
    if (xi < 0.0) return kInf;
    if (xi == 0.0) return 0.0;
    return xi * std::log(xi);
  }
  double conj(double eta) const override {
    check_exp_arg(eta, "entropy");
    return std::exp(eta - 1.0);
  }
  double grad_conj(double eta) const override {
    check_exp_arg(eta, "entropy");
    return std::exp(eta - 1.0);
  }
  Curvature hess_conj(double eta) const override {
    check_exp_arg(eta, "entropy");
    return {std::exp(eta - 1.0), true};
  }
  Curvature hess_primal(double xi) const override { return {1.0 / xi, true}; }
  double grad_primal_lower(double xi) const override {
    return xi > 0.0 ? std::log(xi) + 1.0 : -kInf;
  }
  double grad_primal_upper(double xi) const override {
    // The subdifferential at zero is empty: an entropy link is never inactive.
    return xi > 0.0 ? std::log(xi) + 1.0 : -kInf;
  }
  std::string name() const override { return "entropy"; }
};

class EntropyLikePerturbation final : public LinkPerturbation {
 public:
  double eval(double xi) const override {
    if (xi < 0.0) return kInf;
    if (xi == 0.0) return 0.0;
    return (1.0 + xi) * std::log1p(xi) - xi;
  }
  double conj(double eta) const override {
    if (eta < 0.0) return 0.0;
    check_exp_arg(eta, "entropy_like");
    return std::exp(eta) - eta - 1.0;
  }
  double grad_conj(double eta) const override {
    if (eta < 0.0) return 0.0;
    check_exp_arg(eta, "entropy_like");
    return std::expm1(eta);
  }
  Curvature hess_conj(double eta) const override {
    if (eta == 0.0) return {0.5, false};
    if (eta < 0.0) return {0.0, true};
    check_exp_arg(eta, "entropy_like");
    return {std::exp(eta), true};
  }
  Curvature hess_primal(double xi) const override { return {1.0 / (1.0 + xi), true}; }
  double grad_primal_lower(double xi) const override {
    return xi > 0.0 ? std::log1p(xi) : -kInf;
  }
  double grad_primal_upper(double xi) const override { return std::log1p(xi); }
  std::vector<double> kink_points() const override { return {0.0}; }
  std::string name() const override { return "entropy_like"; }
};

class PiecewiseQuadraticPerturbation final : public LinkPerturbation {
 public:
  double eval(double xi) const override {
    if (xi < 0.0) return kInf;
    if (xi < 1.0) return 0.5 * xi * xi;
    double t = xi - 1.0;
    return 0.5 + 1.5 * t + 0.5 * t * t;
  }
  double conj(double eta) const override {
    if (eta < 0.0) return 0.0;
    if (eta < 1.0) return 0.5 * eta * eta;
    if (eta < 1.5) return eta - 0.5;
    return 0.5 * eta * eta - 0.5 * eta + 0.625;
  }
  double grad_conj(double eta) const override {
    if (eta < 0.0) return 0.0;
    if (eta < 1.0) return eta;
    if (eta < 1.5) return 1.0;
    return eta - 0.5;
  }
  Curvature hess_conj(double eta) const override {
    if (eta == 0.0 || eta == 1.0 || eta == 1.5) return {0.5, false};
    if (eta < 0.0) return {0.0, true};
    if (eta < 1.0) return {1.0, true};
    if (eta < 1.5) return {0.0, true};
    return {1.0, true};
  }
  Curvature hess_primal(double xi) const override {
    if (xi == 1.0) return {1.0, false};
    return {1.0, true};
  }
  double grad_primal_lower(double xi) const override {
    if (xi <= 0.0) return -kInf;
    if (xi < 1.0) return xi;
    if (xi == 1.0) return 1.0;
    return xi + 0.5;
  }
  double grad_primal_upper(double xi) const override {
    if (xi < 1.0) return xi;
    if (xi == 1.0) return 1.5;
    return xi + 0.5;
  }
  std::optional<double> strong_convexity_modulus() const override { return 1.0; }
  std::vector<double> kink_points() const override { return {0.0, 1.0, 1.5}; }
  std::vector<double> primal_kink_points() const override { return {1.0}; }
  std::string name() const override { return "piecewise_quadratic"; }
};

// beta * h(xi / gamma); the conjugate scales as beta * h*(gamma eta / beta).
class ScaledPerturbation final : public LinkPerturbation {
 public:
  ScaledPerturbation(PerturbationPtr base, double beta, double gamma)
      : base_(std::move(base)), beta_(beta), gamma_(gamma) {}

  double eval(double xi) const override { return beta_ * base_->eval(xi / gamma_); }
  double conj(double eta) const override { return beta_ * base_->conj(dual_arg(eta)); }
  double grad_conj(double eta) const override { return gamma_ * base_->grad_conj(dual_arg(eta)); }
  Curvature hess_conj(double eta) const override {
    Curvature c = base_->hess_conj(dual_arg(eta));
    return {gamma_ * gamma_ / beta_ * c.value, c.defined};
  }
  Curvature hess_primal(double xi) const override {
    Curvature c = base_->hess_primal(xi / gamma_);
    return {beta_ / (gamma_ * gamma_) * c.value, c.defined};
  }
  double grad_primal_lower(double xi) const override {
    return beta_ / gamma_ * base_->grad_primal_lower(xi / gamma_);
  }
  double grad_primal_upper(double xi) const override {
    return beta_ / gamma_ * base_->grad_primal_upper(xi / gamma_);
  }
  std::optional<double> strong_convexity_modulus() const override {
    auto mu = base_->strong_convexity_modulus();
    if (!mu) return std::nullopt;
    return *mu * beta_ / (gamma_ * gamma_);
  }
  std::vector<double> kink_points() const override {
    std::vector<double> ks = base_->kink_points();
    for (double& k : ks) k *= beta_ / gamma_;
    return ks;
  }
  std::vector<double> primal_kink_points() const override {
    std::vector<double> ks = base_->primal_kink_points();
    for (double& k : ks) k *= gamma_;
    return ks;
  }
  std::string name() const override {
    return base_->name() + "(beta=" + std::to_string(beta_) + ",gamma=" + std::to_string(gamma_) + ")";
  }

 private:
  double dual_arg(double eta) const { return gamma_ * eta / beta_; }

  PerturbationPtr base_;
  double beta_;
  double gamma_;
};

}  // namespace

PerturbationPtr quadratic() { return std::make_shared<QuadraticPerturbation>(); }
PerturbationPtr entropy() { return std::make_shared<EntropyPerturbation>(); }
PerturbationPtr entropy_like() { return std::make_shared<EntropyLikePerturbation>(); }
PerturbationPtr piecewise_quadratic() { return std::make_shared<PiecewiseQuadraticPerturbation>(); }

PerturbationPtr scaled(PerturbationPtr base, double beta, double gamma) {
  if (!(beta > 0.0) || !(gamma > 0.0)) {
    throw ParseError("perturbation scale parameters must be positive");
  }
  return std::make_shared<ScaledPerturbation>(std::move(base), beta, gamma);
}

PerturbationPtr make_perturbation(const std::string& family, double beta, double gamma) {
  PerturbationPtr base;
  if (family == "quadratic") {
    base = quadratic();
  } else if (family == "entropy") {
    base = entropy();
  } else if (family == "entropy_like") {
    base = entropy_like();
  } else if (family == "piecewise_quadratic") {
    base = piecewise_quadratic();
  } else {
    throw ParseError("unknown perturbation family '" + family + "'");
  }
  if (beta == 1.0 && gamma == 1.0) return base;
  return scaled(std::move(base), beta, gamma);
}

PerturbationPtr make_perturbation(const PerturbationSpec& spec) {
  return make_perturbation(spec.family, spec.beta, spec.gamma);
}

ValidationReport validate(const LinkPerturbation& p, const std::vector<double>& dual_grid,
                          const std::vector<double>& primal_grid, double tol) {
  ValidationReport rep;
  std::vector<double> grid = dual_grid;
  std::sort(grid.begin(), grid.end());

  double prev_grad = -kInf;
  for (double eta : grid) {
    double c = p.conj(eta);
    double g = p.grad_conj(eta);
    if (!std::isfinite(c)) {
      rep.conj_finite = false;
      rep.issues.push_back({"conj_finite", eta, c});
      continue;
    }
    double residual = std::abs(c - (g * eta - p.eval(g)));
    double rel = residual / std::max(1.0, std::abs(c));
    rep.max_conjugacy_residual = std::max(rep.max_conjugacy_residual, rel);
    if (rel > tol) {
      rep.issues.push_back({"conjugacy_identity", eta, rel});
    }
    if (g < prev_grad - 1e-12) {
      rep.monotone = false;
      rep.issues.push_back({"grad_conj_monotone", eta, g - prev_grad});
    }
    if (g < -1e-12) {
      rep.range_nonnegative = false;
      rep.issues.push_back({"grad_conj_nonnegative", eta, g});
    }
    prev_grad = g;
  }

  // Superlinearity trend: eval(xi)/xi must keep growing along the tail of
  // the primal grid.
  std::vector<double> pg = primal_grid;
  std::sort(pg.begin(), pg.end());
  double prev_slope = -kInf;
  size_t tail_start = pg.size() > 8 ? pg.size() - 8 : 0;
  for (size_t i = tail_start; i < pg.size(); ++i) {
    double xi = pg[i];
    if (xi <= 0.0) continue;
    double slope = p.eval(xi) / xi;
    if (slope <= prev_slope) {
      rep.superlinear = false;
      rep.issues.push_back({"superlinear", xi, slope - prev_slope});
    }
    prev_slope = slope;
  }
  return rep;
}

ValidationReport validate(const LinkPerturbation& p, double tol) {
  std::vector<double> dual_grid;
  for (int i = 0; i <= 200; ++i) dual_grid.push_back(-10.0 + 0.1 * i);
  std::vector<double> primal_grid;
  for (int i = 0; i < 120; ++i) {
    primal_grid.push_back(std::pow(10.0, -2.0 + 6.0 * i / 119.0));
  }
  return validate(p, dual_grid, primal_grid, tol);
}

}  // namespace purc
