#pragma once

// Projected gradient descent on the unit ball and per-step intervention choice.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "causalacq/acquisition.hpp"
#include "causalacq/errors.hpp"
#include "causalacq/rng.hpp"

namespace causalacq::optimizer {

using scm::Vector;

struct OptimizerConfig {
  int max_iters = 200;
  double grad_tol = 1e-7;  // on the projected-gradient mapping
  double step_init = 1.0;
  double backtrack_factor = 0.5;
  double armijo_c = 1e-4;
  bool dual_init = true;  // also start from the previous intervention

  void validate() const {
    if (max_iters < 1) throw InputError("OptimizerConfig: max_iters must be >= 1");
    if (!(grad_tol > 0.0) || !(step_init > 0.0) || !(armijo_c > 0.0))
      throw InputError("OptimizerConfig: grad_tol, step_init and armijo_c must be positive");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      throw InputError("OptimizerConfig: backtrack_factor must lie in (0, 1)");
  }
};

/// Value and (optionally) gradient in one call; `grad` may be null.
using Objective = std::function<double(const Vector&, Vector*)>;

struct Minimum {
  Vector x;
  double value = 0.0;
};

inline Vector project_to_ball(const Vector& x) {
  const double nrm = x.norm();
  return nrm > 1.0 ? Vector(x / nrm) : x;
}

namespace detail {

inline double checked_eval(const Objective& f, const Vector& x, Vector* g) {
  const double v = f(x, g);
  if (!std::isfinite(v)) throw OptimizationError("objective is not finite", x);
  if (g && !g->allFinite()) throw OptimizationError("gradient is not finite", x);
  return v;
}

constexpr int kMaxBacktracks = 60;

}  // namespace detail

/// Runs from a single start point. `trace`, when given, receives the value of
/// every accepted iterate (starting point included).
inline Minimum minimize_from(const Objective& f, const Vector& init, const OptimizerConfig& cfg,
                             std::vector<double>* trace = nullptr) {
  Vector x = project_to_ball(init);
  Vector g;
  double fx = detail::checked_eval(f, x, &g);
  if (trace) trace->push_back(fx);

  for (int it = 0; it < cfg.max_iters; ++it) {
    // Projected-gradient mapping at the nominal step; zero exactly at KKT points.
    const double mapping = (x - project_to_ball(x - cfg.step_init * g)).norm() / cfg.step_init;
    if (mapping < cfg.grad_tol) break;
    double t = cfg.step_init;
    bool accepted = false;
    Vector xn;
    double fn = 0.0;
    for (int bt = 0; bt < detail::kMaxBacktracks; ++bt, t *= cfg.backtrack_factor) {
      xn = project_to_ball(x - t * g);
      const Vector d = xn - x;
      if (d.squaredNorm() == 0.0) break;
      fn = detail::checked_eval(f, xn, nullptr);
      if (fn <= fx + cfg.armijo_c * g.dot(d)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    x = std::move(xn);
    fx = detail::checked_eval(f, x, &g);
    if (trace) trace->push_back(fx);
  }

  const double nrm = x.norm();
  if (nrm > 1.0 - 1e-6) {
    x /= nrm;
    fx = detail::checked_eval(f, x, nullptr);
  }
  return {std::move(x), fx};
}

/// Best local minimum over all starts. A later start must beat the incumbent
/// by more than 1e-12 to replace it.
inline Minimum minimize_on_ball(const Objective& f, const std::vector<Vector>& inits, const OptimizerConfig& cfg) {
  cfg.validate();
  if (inits.empty()) throw InputError("minimize_on_ball: no initial points");
  Minimum best;
  bool have = false;
  for (const Vector& x0 : inits) {
    if (x0.norm() > 1.0 + 1e-9) throw InputError("minimize_on_ball: initial point outside the unit ball");
    Minimum m = minimize_from(f, x0, cfg);
    if (!have || m.value < best.value - 1e-12) {
      best = std::move(m);
      have = true;
    }
  }
  return best;
}

inline Minimum minimize_on_ball(const std::function<double(const Vector&)>& value_fn,
                                const std::function<Vector(const Vector&)>& grad_fn,
                                const std::vector<Vector>& inits, const OptimizerConfig& cfg) {
  Objective f = [&](const Vector& x, Vector* g) {
    if (g) *g = grad_fn(x);
    return value_fn(x);
  };
  return minimize_on_ball(f, inits, cfg);
}

/// Candidate pool for the Monte Carlo baselines: normalize(b + noise * z).
inline std::vector<Vector> mc_candidates(const Vector& b, int count, double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    Vector c = b + noise * standard_normal(rng, static_cast<int>(b.size()));
    const double nrm = c.norm();
    if (nrm > 0.0) out.push_back(c / nrm);
  }
  return out;
}

/// Picks a^(t). `f_best` is only used by ei_mc.
inline Vector select_next(const acquisition::AcqMethod& method, const acquisition::AcqContext& ctx,
                          const Vector& prev_a, std::uint64_t seed, const OptimizerConfig& cfg = {},
                          double f_best = std::numeric_limits<double>::quiet_NaN()) {
  using acquisition::MethodKind;
  method.validate();
  if (prev_a.size() != ctx.dim()) throw InputError("select_next: previous intervention has wrong dimension");
  switch (method.kind) {
    case MethodKind::Random: return acquisition::acq_random(ctx.dim(), seed);
    case MethodKind::Greedy: return acquisition::acq_greedy(ctx);
    case MethodKind::EiMc:
    case MethodKind::MiMc: {
      auto cands = mc_candidates(ctx.b(), method.mc_candidates, method.mc_noise, derive_seed(seed, "candidates"));
      const std::uint64_t draw_seed = derive_seed(seed, "draws");
      std::size_t arg = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < cands.size(); ++c) {
        const double v = method.kind == MethodKind::EiMc
                             ? acquisition::acq_ei_mc(ctx, f_best, cands[c], method.mc_samples, draw_seed)
                             : acquisition::acq_mi_mc(ctx, cands[c], method.mc_samples, draw_seed);
        if (c == 0 || v < best) {
          best = v;
          arg = c;
        }
      }
      return cands[arg];
    }
    default: break;
  }
  Objective f = [&](const Vector& x, Vector* g) { return acquisition::objective(method, ctx, x, g); };
  std::vector<Vector> inits{project_to_ball(ctx.b())};
  if (cfg.dual_init) inits.push_back(project_to_ball(prev_a));
  return minimize_on_ball(f, inits, cfg).x;
}

}  // namespace causalacq::optimizer
