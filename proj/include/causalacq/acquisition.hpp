#pragma once

// Acquisition functions over a candidate shift a'. Every closed form here drops
// additive and multiplicative constants that do not depend on a'; only the
// ordering of candidates is meaningful.
//
// Look-ahead: the candidate's plug-in outcome xbar' = (I - E[B])^{-1} a' is
// absorbed n times, which changes only M_i:
//   M_i(a') = M_i - n M_i x x^T M_i / (1 + n x^T M_i x),  x = xbar'_{pa(i)}
// and the per-node scalar that drives CIV is u_i = mu*_pa^T M_i(a') mu*_pa.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "causalacq/errors.hpp"
#include "causalacq/posterior.hpp"
#include "causalacq/rng.hpp"
#include "causalacq/scm.hpp"

namespace causalacq::acquisition {

using scm::Matrix;
using scm::Vector;

enum class MethodKind { Civ, CivOw, Random, Greedy, MaxV, Cv, Ucb, EiMc, MiMc };

inline constexpr MethodKind kAllMethods[] = {MethodKind::Civ,  MethodKind::CivOw, MethodKind::Random,
                                             MethodKind::Greedy, MethodKind::MaxV, MethodKind::Cv,
                                             MethodKind::Ucb,  MethodKind::EiMc,  MethodKind::MiMc};

inline std::string to_string(MethodKind k) {
  switch (k) {
    case MethodKind::Civ: return "civ";
    case MethodKind::CivOw: return "civ_ow";
    case MethodKind::Random: return "random";
    case MethodKind::Greedy: return "greedy";
    case MethodKind::MaxV: return "maxv";
    case MethodKind::Cv: return "cv";
    case MethodKind::Ucb: return "ucb";
    case MethodKind::EiMc: return "ei_mc";
    case MethodKind::MiMc: return "mi_mc";
  }
  return "?";
}

inline MethodKind parse_method(std::string_view s) {
  for (MethodKind k : kAllMethods)
    if (to_string(k) == s) return k;
  throw InputError("unknown acquisition method: " + std::string(s));
}

enum class GradientSource { Analytic, FiniteDifference };

/// Method choice plus its tuning knobs. Knobs irrelevant to `kind` are ignored.
struct AcqMethod {
  MethodKind kind = MethodKind::Civ;
  double kappa = 5.0;           // civ_ow, p = 3
  double ucb_beta = 0.5;        // ucb
  int mc_samples = 200;         // ei_mc, mi_mc
  int mc_candidates = 20;       // ei_mc, mi_mc
  double mc_noise = 0.25;       // candidate perturbation scale
  GradientSource spectral_gradient = GradientSource::Analytic;  // maxv, cv

  std::string name() const { return to_string(kind); }

  void validate() const {
    if (!(kappa > 0.0)) throw InputError("AcqMethod: kappa must be positive");
    if (!(ucb_beta >= 0.0)) throw InputError("AcqMethod: ucb beta must be non-negative");
    if (mc_samples < 1 || mc_candidates < 1) throw InputError("AcqMethod: Monte Carlo counts must be positive");
    if (!(mc_noise >= 0.0)) throw InputError("AcqMethod: candidate noise must be non-negative");
  }
};

/// Per-node quantities that stay fixed while a' varies within one time step.
struct NodeTerms {
  std::vector<int> parents;
  Vector mu_pa;
  Matrix M;
  Vector M_mu;        // M mu_pa
  double u0 = 0.0;    // mu_pa^T M mu_pa
  double alpha = 0.0; // unaugmented
  double beta = 0.0;
  double sigma2 = 0.0;  // known-variance mode only
};

class AcqContext {
 public:
  AcqContext(posterior::DagBlrPosterior post, Vector mu_star, int n)
      : post_(std::move(post)), mu_star_(std::move(mu_star)), n_(n) {
    const int p = post_.size();
    if (mu_star_.size() != p) throw InputError("AcqContext: mu* has wrong dimension");
    if (n_ < 1) throw InputError("AcqContext: n must be >= 1");
    mean_B_ = posterior::posterior_mean_B(post_);
    b_ = scm::optimal_intervention(mean_B_, mu_star_);
    const auto* known = std::get_if<posterior::KnownVariance>(&post_.mode);
    nodes_.reserve(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) {
      const auto& nb = post_.nodes[i];
      NodeTerms t;
      t.parents = post_.dag.parents(i);
      t.mu_pa = posterior::detail::gather(mu_star_, t.parents);
      t.M = nb.M;
      t.M_mu = nb.M * t.mu_pa;
      t.u0 = t.mu_pa.dot(t.M_mu);
      t.alpha = nb.alpha;
      t.beta = nb.beta;
      t.sigma2 = known ? known->sigma2[i] : 0.0;
      nodes_.push_back(std::move(t));
    }
  }

  int dim() const { return post_.size(); }
  int n() const { return n_; }
  bool known_variance() const { return posterior::is_known(post_.mode); }
  const posterior::DagBlrPosterior& posterior() const { return post_; }
  const graph::Dag& dag() const { return post_.dag; }
  const Vector& mu_star() const { return mu_star_; }
  const Matrix& mean_B() const { return mean_B_; }
  /// b = (I - E[B]) mu*, the current estimate of a*.
  const Vector& b() const { return b_; }
  const std::vector<NodeTerms>& nodes() const { return nodes_; }

  /// True when mu*_{pa(i)} = 0 for every node, i.e. a* targets only sinks.
  bool degenerate() const {
    return std::all_of(nodes_.begin(), nodes_.end(), [](const NodeTerms& t) { return t.u0 == 0.0; });
  }

  const std::vector<Matrix>& cholesky() const {
    if (!chol_) chol_ = posterior::cholesky_factors(post_);
    return *chol_;
  }

 private:
  posterior::DagBlrPosterior post_;
  Vector mu_star_;
  int n_;
  Matrix mean_B_;
  Vector b_;
  std::vector<NodeTerms> nodes_;
  mutable std::optional<std::vector<Matrix>> chol_;
};

namespace detail {

// u = q^T M(x) q for the downdated M(x), with Mq = M q and u0 = q^T M q.
// Optionally returns du/dx.
inline double downdated_form(const Matrix& M, const Vector& Mq, double u0, const Vector& x, int n,
                             Vector* du_dx) {
  Vector w = M * x;
  const double s = x.dot(w);
  const double r = Mq.dot(x);
  const double den = 1.0 + n * s;
  if (du_dx) *du_dx = (-2.0 * n * r / (den * den)) * (Mq * den - (n * r) * w);
  return u0 - n * r * r / den;
}

struct Lookahead {
  Vector xbar;
  Vector u;
  std::vector<Vector> du_dx;  // only filled when gradients are requested
};

inline Lookahead lookahead(const AcqContext& ctx, const Vector& a_prime, bool with_grad) {
  if (a_prime.size() != ctx.dim()) throw InputError("acquisition: a' has wrong dimension");
  if (!a_prime.allFinite()) throw InputError("acquisition: a' is not finite");
  Lookahead out;
  out.xbar = scm::solve_shift(ctx.dag(), ctx.mean_B(), a_prime);
  out.u = Vector::Zero(ctx.dim());
  if (with_grad) out.du_dx.resize(static_cast<std::size_t>(ctx.dim()));
  for (int i = 0; i < ctx.dim(); ++i) {
    const NodeTerms& t = ctx.nodes()[i];
    if (t.parents.empty() || t.u0 == 0.0) continue;
    Vector x = posterior::detail::gather(out.xbar, t.parents);
    out.u[i] = downdated_form(t.M, t.M_mu, t.u0, x, ctx.n(), with_grad ? &out.du_dx[i] : nullptr);
  }
  return out;
}

// Chains per-node dh/du_i through u_i(x_pa) and x = (I - E[B])^{-1} a'.
inline Vector chain_to_a_prime(const AcqContext& ctx, const Lookahead& la, const Vector& dh_du) {
  Vector gx = Vector::Zero(ctx.dim());
  for (int i = 0; i < ctx.dim(); ++i) {
    const NodeTerms& t = ctx.nodes()[i];
    if (t.parents.empty() || t.u0 == 0.0 || dh_du[i] == 0.0) continue;
    for (std::size_t j = 0; j < t.parents.size(); ++j)
      gx[t.parents[j]] += dh_du[i] * la.du_dx[i][static_cast<Eigen::Index>(j)];
  }
  return scm::solve_shift_transposed(ctx.dag(), ctx.mean_B(), gx);
}

// sum_i c2_i (u_i^2 + 2 u_i / n) + c1_i u_i, and its gradient in a'.
inline double quadratic_in_u(const AcqContext& ctx, const Vector& a_prime, const Vector& c2, const Vector& c1,
                             Vector* grad) {
  Lookahead la = lookahead(ctx, a_prime, grad != nullptr);
  const double inv_n = 1.0 / ctx.n();
  double h = 0.0;
  Vector dh_du(ctx.dim());
  for (int i = 0; i < ctx.dim(); ++i) {
    const double u = la.u[i];
    h += c2[i] * (u * u + 2.0 * inv_n * u) + c1[i] * u;
    dh_du[i] = c2[i] * (2.0 * u + 2.0 * inv_n) + c1[i];
  }
  if (grad) *grad = chain_to_a_prime(ctx, la, dh_du);
  return h;
}

// Inverse-gamma factors after n look-ahead samples: s_i = beta'/(alpha'-1) and
// q_i = s_i beta'(2alpha'-1)/((alpha'-1)(alpha'-2)).
struct InverseGammaFactors {
  Vector s;
  Vector q;
};

inline InverseGammaFactors inverse_gamma_factors(const AcqContext& ctx) {
  InverseGammaFactors f{Vector::Zero(ctx.dim()), Vector::Zero(ctx.dim())};
  for (int i = 0; i < ctx.dim(); ++i) {
    const NodeTerms& t = ctx.nodes()[i];
    if (t.parents.empty()) continue;
    const double alpha = t.alpha + 0.5 * ctx.n();
    if (!(alpha > 2.0))
      throw PreconditionError("unknown-variance acquisition needs alpha' > 2 at node " + std::to_string(i + 1) +
                              " (alpha' = " + std::to_string(alpha) + ")");
    f.s[i] = t.beta / (alpha - 1.0);
    f.q[i] = f.s[i] * t.beta * (2.0 * alpha - 1.0) / ((alpha - 1.0) * (alpha - 2.0));
  }
  return f;
}

// Builds (c2, c1) for the integrated forms given per-node integral weights W_i
// (W_i = int (a_i - b_i)^2 dnu).
inline std::pair<Vector, Vector> integrated_coefficients(const AcqContext& ctx, const Vector& W) {
  const int p = ctx.dim();
  Vector c2(p), c1(p);
  if (ctx.known_variance()) {
    for (int i = 0; i < p; ++i) {
      const double s2 = ctx.nodes()[i].sigma2;
      c2[i] = s2 * s2;
      c1[i] = 2.0 * s2 * W[i];
    }
  } else {
    auto f = inverse_gamma_factors(ctx);
    c2 = f.q;
    c1 = 4.0 * f.s.cwiseProduct(W);
  }
  return {std::move(c2), std::move(c1)};
}

// coth(k)/k - 1/k^2, with a series near zero.
inline double coth_over_k_minus_inv_sq(double k) {
  if (k < 1e-3) {
    const double k2 = k * k;
    return 1.0 / 3.0 - k2 / 45.0 + 2.0 * k2 * k2 / 945.0;
  }
  return 1.0 / (std::tanh(k) * k) - 1.0 / (k * k);
}

}  // namespace detail

/// Posterior variance of the optimality gap g(a) after the look-ahead at a',
/// up to an a'-independent constant.
inline double variance_g(const AcqContext& ctx, const Vector& a, const Vector& a_prime) {
  const int p = ctx.dim();
  if (a.size() != p) throw InputError("variance_g: a has wrong dimension");
  Vector d2 = (a - ctx.b()).array().square();
  Vector c2(p), c1(p);
  if (ctx.known_variance()) {
    for (int i = 0; i < p; ++i) {
      const double s2 = ctx.nodes()[i].sigma2;
      c2[i] = 2.0 * s2 * s2;
      c1[i] = 4.0 * s2 * d2[i];
    }
  } else {
    auto f = detail::inverse_gamma_factors(ctx);
    c2 = f.q;
    c1 = 4.0 * f.s.cwiseProduct(d2);
  }
  return detail::quadratic_in_u(ctx, a_prime, c2, c1, nullptr);
}

/// Uniform-sphere integral weights b_i^2 + 1/p.
inline Vector uniform_weights(const Vector& b) {
  return (b.array().square() + 1.0 / static_cast<double>(b.size())).matrix();
}

/// Output-weighted integral weights int (a_i - b_i)^2 dnu. p = 3 uses the
/// bimodal von Mises-Fisher moments with concentration kappa; p > 3 uses the
/// hyperspherical-cap ratio approximation normalised to 1 + |b|^2.
inline Vector output_weights(const Vector& b, double kappa) {
  const auto p = b.size();
  if (p < 3) throw InputError("output_weights: output weighting needs p >= 3");
  if (p == 3) {
    if (!(kappa > 0.0)) throw InputError("output_weights: kappa must be positive");
    const double c = detail::coth_over_k_minus_inv_sq(kappa);
    return (c + (2.0 - 3.0 * c) * b.array().square()).matrix();
  }
  const double nb2 = b.squaredNorm();
  if (nb2 == 0.0) return Vector::Constant(p, 1.0 / static_cast<double>(p));
  const double expo = (4.0 - static_cast<double>(p)) / 2.0;

  // log of b_i^2 (|b|^2 - b_i^2)^{(4-p)/2}; a vanishing gap with negative
  // exponent makes that coordinate absorb all the weight.
  std::vector<int> unbounded;
  Vector logt = Vector::Constant(p, -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < p; ++i) {
    const double bi2 = b[i] * b[i];
    if (bi2 == 0.0) continue;
    const double gap = nb2 - bi2;
    if (expo < 0.0 && gap <= nb2 * 1e-14) {
      unbounded.push_back(static_cast<int>(i));
      continue;
    }
    logt[i] = std::log(bi2) + (expo == 0.0 ? 0.0 : expo * std::log(gap));
  }
  Vector frac = Vector::Zero(p);
  if (!unbounded.empty()) {
    for (int i : unbounded) frac[i] = 1.0 / static_cast<double>(unbounded.size());
  } else {
    const double mx = logt.maxCoeff();
    for (Eigen::Index i = 0; i < p; ++i) frac[i] = std::isfinite(logt[i]) ? std::exp(logt[i] - mx) : 0.0;
    frac /= frac.sum();
  }
  return (1.0 + nb2) * frac;
}

/// CIV with the uniform measure on the unit sphere.
inline double civ(const AcqContext& ctx, const Vector& a_prime, Vector* grad = nullptr) {
  auto [c2, c1] = detail::integrated_coefficients(ctx, uniform_weights(ctx.b()));
  return detail::quadratic_in_u(ctx, a_prime, c2, c1, grad);
}

inline Vector civ_grad(const AcqContext& ctx, const Vector& a_prime) {
  Vector g;
  civ(ctx, a_prime, &g);
  return g;
}

/// CIV with the output-weighted measure centred on +-b.
inline double civ_ow(const AcqContext& ctx, const Vector& a_prime, double kappa, Vector* grad = nullptr) {
  if (ctx.dim() < 3) throw InputError("civ_ow: unsupported dimension p < 3");
  auto [c2, c1] = detail::integrated_coefficients(ctx, output_weights(ctx.b(), kappa));
  return detail::quadratic_in_u(ctx, a_prime, c2, c1, grad);
}

inline Vector civ_ow_grad(const AcqContext& ctx, const Vector& a_prime, double kappa) {
  Vector g;
  civ_ow(ctx, a_prime, kappa, &g);
  return g;
}

/// Current estimate of a*, pulled back onto the unit ball.
inline Vector acq_greedy(const AcqContext& ctx) { return ctx.b() / std::max(1.0, ctx.b().norm()); }

inline Vector acq_random(int p, std::uint64_t seed) {
  if (p < 1) throw InputError("acq_random: p must be positive");
  Rng rng(seed);
  return uniform_sphere(rng, p);
}

namespace detail {

// Scale turning mu^T M mu into a variance: sigma_i^2 or E[sigma_i^2] = beta/(alpha-1).
inline double variance_scale(const NodeTerms& t, bool known, double alpha_shift) {
  if (known) return t.sigma2;
  const double alpha = t.alpha + alpha_shift;
  if (!(alpha > 1.0)) throw PreconditionError("posterior noise mean undefined: alpha <= 1");
  return t.beta / (alpha - 1.0);
}

template <typename Fn>
Vector central_difference(Fn&& fn, const Vector& x) {
  const double h = 1e-6 * std::max(1.0, x.norm());
  Vector g(x.size()), xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp[k] = x[k] + h;
    xm[k] = x[k] - h;
    g[k] = (fn(xp) - fn(xm)) / (2.0 * h);
    xp[k] = xm[k] = x[k];
  }
  return g;
}

}  // namespace detail

/// max_i || Var(B_{i,pa(i)} | D(a')) ||_2. The analytic gradient uses the
/// top eigenvector of the maximising node (Hellmann-Feynman).
inline double acq_maxv(const AcqContext& ctx, const Vector& a_prime, Vector* grad = nullptr) {
  detail::Lookahead la;
  la.xbar = scm::solve_shift(ctx.dag(), ctx.mean_B(), a_prime);
  const double shift = 0.5 * ctx.n();
  double best = 0.0;
  int arg = -1;
  Vector arg_vec;
  for (int i = 0; i < ctx.dim(); ++i) {
    const NodeTerms& t = ctx.nodes()[i];
    if (t.parents.empty()) continue;
    Vector x = posterior::detail::gather(la.xbar, t.parents);
    Vector w = t.M * x;
    Matrix Ma = t.M - (ctx.n() * (w * w.transpose())) / (1.0 + ctx.n() * x.dot(w));
    Eigen::SelfAdjointEigenSolver<Matrix> es(Ma);
    const double val = detail::variance_scale(t, ctx.known_variance(), shift) * es.eigenvalues()(Ma.rows() - 1);
    if (arg < 0 || val > best) {
      best = val;
      arg = i;
      arg_vec = es.eigenvectors().col(Ma.rows() - 1);
    }
  }
  if (grad) {
    grad->setZero(ctx.dim());
    if (arg >= 0) {
      const NodeTerms& t = ctx.nodes()[arg];
      Vector Mv = t.M * arg_vec;
      Vector x = posterior::detail::gather(la.xbar, t.parents);
      Vector dl_dx;
      detail::downdated_form(t.M, Mv, arg_vec.dot(Mv), x, ctx.n(), &dl_dx);
      la.du_dx.resize(static_cast<std::size_t>(ctx.dim()));
      la.du_dx[arg] = detail::variance_scale(t, ctx.known_variance(), shift) * dl_dx;
      Vector gx = Vector::Zero(ctx.dim());
      for (std::size_t j = 0; j < t.parents.size(); ++j)
        gx[t.parents[j]] += la.du_dx[arg][static_cast<Eigen::Index>(j)];
      *grad = scm::solve_shift_transposed(ctx.dag(), ctx.mean_B(), gx);
    }
  }
  return best;
}

/// || Var((I - B) mu* | D(a')) ||_2; the covariance is diagonal, so this is
/// the largest per-node variance scale * u_i.
inline double acq_cv(const AcqContext& ctx, const Vector& a_prime, Vector* grad = nullptr) {
  detail::Lookahead la = detail::lookahead(ctx, a_prime, grad != nullptr);
  const double shift = 0.5 * ctx.n();
  double best = 0.0;
  int arg = -1;
  for (int i = 0; i < ctx.dim(); ++i) {
    const NodeTerms& t = ctx.nodes()[i];
    if (t.parents.empty() || t.u0 == 0.0) continue;
    const double val = detail::variance_scale(t, ctx.known_variance(), shift) * la.u[i];
    if (arg < 0 || val > best) {
      best = val;
      arg = i;
    }
  }
  if (grad) {
    Vector dh_du = Vector::Zero(ctx.dim());
    if (arg >= 0) dh_du[arg] = detail::variance_scale(ctx.nodes()[arg], ctx.known_variance(), shift);
    *grad = arg >= 0 ? detail::chain_to_a_prime(ctx, la, dh_du) : Vector::Zero(ctx.dim());
  }
  return best;
}

/// Upper confidence bound of the negative optimality gap (to be maximised):
/// -|b - a'|^2 + beta sqrt(4 sum_i w_i (a'_i - b_i)^2) with w_i built from
/// the current, un-augmented M_i.
inline double acq_ucb(const AcqContext& ctx, const Vector& a_prime, double beta_explore, Vector* grad = nullptr) {
  if (a_prime.size() != ctx.dim()) throw InputError("acq_ucb: a' has wrong dimension");
  Vector d = a_prime - ctx.b();
  Vector w(ctx.dim());
  for (int i = 0; i < ctx.dim(); ++i) {
    const NodeTerms& t = ctx.nodes()[i];
    w[i] = t.u0 == 0.0 ? 0.0 : detail::variance_scale(t, ctx.known_variance(), 0.0) * t.u0;
  }
  const double S = 4.0 * w.dot(d.cwiseProduct(d));
  const double root = std::sqrt(std::max(S, 0.0));
  if (grad) {
    *grad = -2.0 * d;
    if (root > 0.0 && beta_explore != 0.0) *grad += beta_explore * (4.0 * w.cwiseProduct(d)) / root;
  }
  return -d.squaredNorm() + beta_explore * root;
}

/// Monte Carlo expected improvement of |(I - B)^{-1} a' - mu*|^2 over f_best
/// (to be minimised). Draws are reproducible from `seed`, so candidates
/// evaluated with one seed share common random numbers.
inline double acq_ei_mc(const AcqContext& ctx, double f_best, const Vector& a_prime, int K, std::uint64_t seed) {
  if (!std::isfinite(f_best)) throw InputError("acq_ei_mc: f_best must be finite");
  if (K < 1) throw InputError("acq_ei_mc: K must be positive");
  if (a_prime.size() != ctx.dim()) throw InputError("acq_ei_mc: a' has wrong dimension");
  Rng rng(seed);
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    auto draw = posterior::draw_parameters(ctx.posterior(), ctx.cholesky(), rng);
    Vector mean = scm::solve_shift(ctx.dag(), draw.B, a_prime);
    acc += std::min((mean - ctx.mu_star()).squaredNorm() - f_best, 0.0);
  }
  return acc / K;
}

/// Monte Carlo expected posterior entropy of (I - B) mu* after observing n
/// samples x' ~ P(x' | D, a') (to be minimised). Nodes whose variance is
/// identically zero are left out of the log-determinant; if every node is
/// degenerate the result is -infinity.
inline double acq_mi_mc(const AcqContext& ctx, const Vector& a_prime, int K, std::uint64_t seed) {
  if (K < 1) throw InputError("acq_mi_mc: K must be positive");
  if (a_prime.size() != ctx.dim()) throw InputError("acq_mi_mc: a' has wrong dimension");
  if (ctx.degenerate()) return -std::numeric_limits<double>::infinity();
  const int p = ctx.dim();
  const double constant = 0.5 * p * (1.0 + std::log(2.0 * std::numbers::pi));
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    auto draw = posterior::draw_parameters(ctx.posterior(), ctx.cholesky(), rng);
    posterior::Batch batch{Matrix(ctx.n(), p), a_prime};
    for (int r = 0; r < ctx.n(); ++r) {
      Vector shifted(p);
      for (int i = 0; i < p; ++i) shifted[i] = a_prime[i] + std::sqrt(draw.sigma2[i]) * normal(rng);
      batch.X.row(r) = scm::solve_shift(ctx.dag(), draw.B, shifted).transpose();
    }
    auto next = posterior::update(ctx.posterior(), batch);
    double h = constant;
    for (int i = 0; i < p; ++i) {
      const NodeTerms& t = ctx.nodes()[i];
      if (t.u0 == 0.0) continue;
      const auto& nb = next.nodes[i];
      double scale;
      if (ctx.known_variance()) {
        scale = t.sigma2;
      } else {
        if (!(nb.alpha > 1.0)) throw PreconditionError("acq_mi_mc: alpha <= 1");
        scale = nb.beta / (nb.alpha - 1.0);
      }
      h += 0.5 * std::log(scale * t.mu_pa.dot(nb.M * t.mu_pa));
    }
    acc += h;
  }
  return acc / K;
}

/// Evaluates a gradient-capable acquisition in minimisation form
/// (UCB is negated). Used by the optimizer and by gradient checks.
inline double objective(const AcqMethod& method, const AcqContext& ctx, const Vector& a_prime, Vector* grad) {
  switch (method.kind) {
    case MethodKind::Civ: return civ(ctx, a_prime, grad);
    case MethodKind::CivOw:
      if (ctx.dim() < 3) return civ(ctx, a_prime, grad);
      return civ_ow(ctx, a_prime, method.kappa, grad);
    case MethodKind::MaxV:
    case MethodKind::Cv: {
      auto value = [&](const Vector& x) {
        return method.kind == MethodKind::MaxV ? acq_maxv(ctx, x) : acq_cv(ctx, x);
      };
      if (grad && method.spectral_gradient == GradientSource::FiniteDifference) {
        *grad = detail::central_difference(value, a_prime);
        return value(a_prime);
      }
      return method.kind == MethodKind::MaxV ? acq_maxv(ctx, a_prime, grad) : acq_cv(ctx, a_prime, grad);
    }
    case MethodKind::Ucb: {
      double v = acq_ucb(ctx, a_prime, method.ucb_beta, grad);
      if (grad) *grad = -*grad;
      return -v;
    }
    default: throw InputError("objective: method " + method.name() + " has no smooth objective");
  }
}

}  // namespace causalacq::acquisition
