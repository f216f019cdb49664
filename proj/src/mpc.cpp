#include "lbmpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lbmpc {

namespace {

struct HalfSpace {
  VectorXd g;
  double f;
};

// Stacked decision vector z = (u_0; ...; u_N) in R^{(N+1)q}.
struct StackedProblem {
  int N = 0, q = 0, nv = 0;
  std::vector<HalfSpace> rows;
  bool trivially_infeasible = false;
};

VectorXd stack(const std::vector<VectorXd>& us) {
  if (us.empty()) return VectorXd();
  const int q = static_cast<int>(us[0].size());
  VectorXd z(static_cast<int>(us.size()) * q);
  for (size_t k = 0; k < us.size(); ++k) z.segment(static_cast<int>(k) * q, q) = us[k];
  return z;
}

std::vector<VectorXd> unstack(const VectorXd& z, int q) {
  std::vector<VectorXd> us(z.size() / q);
  for (size_t k = 0; k < us.size(); ++k) us[k] = z.segment(static_cast<int>(k) * q, q);
  return us;
}

StackedProblem build_constraints(const Scenario& scn, const VectorXd& x,
                                 const InvariantSetCertificate& cert, int N) {
  StackedProblem sp;
  sp.N = N;
  sp.q = scn.q();
  sp.nv = (N + 1) * sp.q;
  const int n = scn.n();

  // inputs in U, blockwise
  for (int k = 0; k <= N; ++k) {
    for (int i = 0; i < scn.U.num_rows(); ++i) {
      HalfSpace h;
      h.g = VectorXd::Zero(sp.nv);
      h.g.segment(k * sp.q, sp.q) = scn.U.normals().row(i).transpose();
      h.f = scn.U.offsets()(i);
      sp.rows.push_back(std::move(h));
    }
  }

  // first-step safety: A x + B u_0 in Omega ⊖ W
  const HPolytope S = pontryagin_diff(cert.omega, scn.W);
  const VectorXd ax = scn.A * x;
  for (int i = 0; i < S.num_rows(); ++i) {
    const VectorXd hs = S.normals().row(i).transpose();
    VectorXd gu = scn.B.transpose() * hs;
    const double f = S.offsets()(i) - hs.dot(ax);
    if (gu.norm() < 1e-14) {
      if (f < -1e-9) sp.trivially_infeasible = true;
      continue;
    }
    HalfSpace h;
    h.g = VectorXd::Zero(sp.nv);
    h.g.head(sp.q) = gu;
    h.f = f;
    sp.rows.push_back(std::move(h));
  }

  // nominal states x-_{t+k|t} for k in [N] within the nominal constraint set
  const HPolytope& XN = scn.nominal_state_set();
  std::vector<MatrixXd> Apow(N + 1);
  Apow[0] = MatrixXd::Identity(n, n);
  for (int k = 1; k <= N; ++k) Apow[k] = scn.A * Apow[k - 1];
  for (int k = 1; k <= N; ++k) {
    const VectorXd base = Apow[k] * x;
    for (int i = 0; i < XN.num_rows(); ++i) {
      const VectorXd hx = XN.normals().row(i).transpose();
      HalfSpace h;
      h.g = VectorXd::Zero(sp.nv);
      for (int j = 0; j < k; ++j) {
        h.g.segment(j * sp.q, sp.q) = (hx.transpose() * Apow[k - 1 - j] * scn.B).transpose();
      }
      h.f = XN.offsets()(i) - hx.dot(base);
      if (h.g.norm() < 1e-14) {
        if (h.f < -1e-9) sp.trivially_infeasible = true;
        continue;
      }
      sp.rows.push_back(std::move(h));
    }
  }
  return sp;
}

// Dykstra's alternating projection onto the intersection of half-spaces.
// Returns false when it failed to get feasible (set likely empty).
bool project(const StackedProblem& sp, VectorXd& z, double tol = 1e-12, int max_sweeps = 400) {
  const int m = static_cast<int>(sp.rows.size());
  if (m == 0) return true;
  MatrixXd corr = MatrixXd::Zero(m, sp.nv);
  VectorXd w(sp.nv);
  std::vector<double> gg(m);
  for (int i = 0; i < m; ++i) gg[i] = sp.rows[i].g.squaredNorm();

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0.0;
    for (int i = 0; i < m; ++i) {
      w = z + corr.row(i).transpose();
      const double viol = sp.rows[i].g.dot(w) - sp.rows[i].f;
      if (viol > 0.0) {
        const double step = viol / gg[i];
        moved += step * sp.rows[i].g.cwiseAbs().maxCoeff();
        corr.row(i) = (step * sp.rows[i].g).transpose();
        z = w - step * sp.rows[i].g;
      } else {
        moved += corr.row(i).cwiseAbs().maxCoeff();
        corr.row(i).setZero();
        z = w;
      }
    }
    if (moved <= tol) break;
  }
  double worst = 0.0;
  for (int i = 0; i < m; ++i) worst = std::max(worst, sp.rows[i].g.dot(z) - sp.rows[i].f);
  return worst <= 1e-8 * (1.0 + z.cwiseAbs().maxCoeff());
}

double max_violation(const StackedProblem& sp, const VectorXd& z) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : sp.rows) worst = std::max(worst, r.g.dot(z) - r.f);
  return worst;
}

// Objective and gradient of J over the stacked input vector via the adjoint
// recursion through the learned rollout. Missing Jacobians are replaced by
// forward differences with the configured step.
struct Objective {
  const Scenario* scn;
  VectorXd x;
  VectorXd theta;
  int t0 = 0;
  double fd = 1e-6;

  MatrixXd jac_g_x(const VectorXd& xx, const VectorXd& uu, int t) const {
    if (scn->residual.dg_dx) return scn->residual.dg_dx(xx, uu, theta, t);
    const int n = static_cast<int>(xx.size());
    MatrixXd J(n, n);
    const VectorXd g0 = scn->residual.g(xx, uu, theta, t);
    for (int j = 0; j < n; ++j) {
      VectorXd xp = xx;
      xp(j) += fd;
      J.col(j) = (scn->residual.g(xp, uu, theta, t) - g0) / fd;
    }
    return J;
  }
  MatrixXd jac_g_u(const VectorXd& xx, const VectorXd& uu, int t) const {
    if (scn->residual.dg_du) return scn->residual.dg_du(xx, uu, theta, t);
    const int n = static_cast<int>(xx.size());
    const int q = static_cast<int>(uu.size());
    MatrixXd J(n, q);
    const VectorXd g0 = scn->residual.g(xx, uu, theta, t);
    for (int j = 0; j < q; ++j) {
      VectorXd up = uu;
      up(j) += fd;
      J.col(j) = (scn->residual.g(xx, up, theta, t) - g0) / fd;
    }
    return J;
  }
  VectorXd grad_h_x(const VectorXd& xx, const VectorXd& uu, int t) const {
    if (scn->reward.dh_dx) return scn->reward.dh_dx(xx, uu, theta, t);
    const int n = static_cast<int>(xx.size());
    VectorXd g(n);
    const double h0 = scn->reward.mean_h(xx, uu, theta, t);
    for (int j = 0; j < n; ++j) {
      VectorXd xp = xx;
      xp(j) += fd;
      g(j) = (scn->reward.mean_h(xp, uu, theta, t) - h0) / fd;
    }
    return g;
  }
  VectorXd grad_h_u(const VectorXd& xx, const VectorXd& uu, int t) const {
    if (scn->reward.dh_du) return scn->reward.dh_du(xx, uu, theta, t);
    const int q = static_cast<int>(uu.size());
    VectorXd g(q);
    const double h0 = scn->reward.mean_h(xx, uu, theta, t);
    for (int j = 0; j < q; ++j) {
      VectorXd up = uu;
      up(j) += fd;
      g(j) = (scn->reward.mean_h(xx, up, theta, t) - h0) / fd;
    }
    return g;
  }

  bool scalar() const {
    return scn->scalar_fast_path() && scn->residual.dg1_dx && scn->residual.dg1_du &&
           scn->reward.dh1_dx && scn->reward.dh1_du;
  }

  double value(const VectorXd& z) const {
    if (scalar()) {
      const auto& g1 = scn->residual.g1;
      const auto& h1 = scn->reward.h1;
      const double a = scn->A(0, 0), b = scn->B(0, 0);
      double xs = x(0), J = 0.0;
      for (int k = 0; k < z.size(); ++k) {
        const double u = z(k);
        J += h1(xs, u, theta, t0 + k);
        xs = a * xs + b * u + g1(xs, u, theta, t0 + k);
      }
      return J;
    }
    const auto us = unstack(z, scn->q());
    return n_step_reward(*scn, x, us, theta, t0);
  }

  VectorXd gradient(const VectorXd& z) const {
    if (scalar()) {
      const int N = static_cast<int>(z.size()) - 1;
      const double a = scn->A(0, 0), b = scn->B(0, 0);
      std::vector<double> xs(N + 1);
      xs[0] = x(0);
      for (int k = 0; k < N; ++k) {
        xs[k + 1] = a * xs[k] + b * z(k) + scn->residual.g1(xs[k], z(k), theta, t0 + k);
      }
      VectorXd grad(N + 1);
      double lambda = scn->reward.dh1_dx(xs[N], z(N), theta, t0 + N);
      grad(N) = scn->reward.dh1_du(xs[N], z(N), theta, t0 + N);
      for (int k = N - 1; k >= 0; --k) {
        const int t = t0 + k;
        const double Fx = a + scn->residual.dg1_dx(xs[k], z(k), theta, t);
        const double Fu = b + scn->residual.dg1_du(xs[k], z(k), theta, t);
        grad(k) = scn->reward.dh1_du(xs[k], z(k), theta, t) + Fu * lambda;
        lambda = scn->reward.dh1_dx(xs[k], z(k), theta, t) + Fx * lambda;
      }
      return grad;
    }
    const auto us = unstack(z, scn->q());
    const int N = static_cast<int>(us.size()) - 1;
    const auto traj = rollout_learned(*scn, x, us, theta, t0);
    const int q = scn->q();
    VectorXd grad = VectorXd::Zero(z.size());

    VectorXd lambda = grad_h_x(traj[N], us[N], t0 + N);
    grad.segment(N * q, q) = grad_h_u(traj[N], us[N], t0 + N);
    for (int k = N - 1; k >= 0; --k) {
      const int t = t0 + k;
      const MatrixXd Fx = scn->A + jac_g_x(traj[k], us[k], t);
      const MatrixXd Fu = scn->B + jac_g_u(traj[k], us[k], t);
      grad.segment(k * q, q) = grad_h_u(traj[k], us[k], t) + Fu.transpose() * lambda;
      lambda = grad_h_x(traj[k], us[k], t) + Fx.transpose() * lambda;
    }
    return grad;
  }
};

struct StartResult {
  VectorXd z;
  double value = -std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

double stationarity_residual(const StackedProblem& sp, const Objective& obj, const VectorXd& z) {
  VectorXd probe = z + obj.gradient(z);
  project(sp, probe);
  return (z - probe).cwiseAbs().maxCoeff();
}

StartResult ascend(const StackedProblem& sp, const Objective& obj, VectorXd z,
                   const SolverOptions& opts) {
  StartResult out;
  project(sp, z);
  double J = obj.value(z);
  double alpha = 1.0;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    const VectorXd g = obj.gradient(z);
    // unit-step projected-gradient fixed-point residual
    VectorXd probe = z + g;
    project(sp, probe);
    const double res = (z - probe).cwiseAbs().maxCoeff();
    if (res <= opts.stationarity_tol) {
      out.residual = res;
      break;
    }
    // Armijo backtracking along the projected arc
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      VectorXd cand = z + alpha * g;
      project(sp, cand);
      const double Jc = obj.value(cand);
      const double decrease = g.dot(cand - z);
      if (Jc >= J + 1e-4 * decrease && Jc > J - 1e-18) {
        if (Jc <= J && (cand - z).cwiseAbs().maxCoeff() <= 1e-15) {
          accepted = false;  // pinned against the boundary
          break;
        }
        z = cand;
        J = Jc;
        accepted = true;
        alpha = std::min(alpha * 2.0, 1e6);
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-18) break;
    }
    if (!accepted) {
      out.residual = res;
      break;
    }
  }
  out.iterations = iter;
  if (!std::isfinite(out.residual)) out.residual = stationarity_residual(sp, obj, z);

  // Active-set Newton polish: restrict to the inactive subspace and take a
  // few damped Newton steps on the (FD) reduced Hessian of the gradient.
  const double scale = 1.0 + z.cwiseAbs().maxCoeff();
  for (int round = 0; round < 3; ++round) {
    std::vector<int> active;
    for (size_t i = 0; i < sp.rows.size(); ++i) {
      if (std::abs(sp.rows[i].g.dot(z) - sp.rows[i].f) <= 1e-9 * scale) {
        active.push_back(static_cast<int>(i));
      }
    }
    MatrixXd Zb;  // basis of the free subspace
    if (active.empty()) {
      Zb = MatrixXd::Identity(sp.nv, sp.nv);
    } else {
      MatrixXd Ga(active.size(), sp.nv);
      for (size_t i = 0; i < active.size(); ++i) Ga.row(i) = sp.rows[active[i]].g.transpose();
      Eigen::FullPivLU<MatrixXd> lu(Ga);
      lu.setThreshold(1e-10);
      Zb = lu.kernel();
      if (Zb.cols() == 0 || !Zb.allFinite()) break;  // at a vertex
    }
    const VectorXd g = obj.gradient(z);
    const VectorXd gred = Zb.transpose() * g;
    if (gred.cwiseAbs().maxCoeff() < 1e-13) break;
    // reduced Hessian by central differences of the gradient
    MatrixXd H(Zb.cols(), Zb.cols());
    const double hstep = 1e-6 * scale;
    for (int j = 0; j < Zb.cols(); ++j) {
      const VectorXd gp = obj.gradient(z + hstep * Zb.col(j));
      const VectorXd gm = obj.gradient(z - hstep * Zb.col(j));
      H.col(j) = Zb.transpose() * (gp - gm) / (2.0 * hstep);
    }
    H = 0.5 * (H + H.transpose());
    Eigen::LDLT<MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) break;
    const VectorXd p = Zb * ldlt.solve(-gred);
    if (!p.allFinite() || p.norm() > 1e3 * scale) break;
    double tau = 1.0;
    bool moved = false;
    const double J0 = obj.value(z);
    for (int ls = 0; ls < 20; ++ls) {
      VectorXd cand = z + tau * p;
      project(sp, cand);
      if (obj.value(cand) >= J0 - 1e-15) {
        if ((cand - z).norm() <= 1e-16) break;
        z = cand;
        moved = true;
        break;
      }
      tau *= 0.5;
    }
    if (!moved) break;
  }

  out.z = z;
  out.value = obj.value(z);
  out.residual = stationarity_residual(sp, obj, z);
  return out;
}

bool lex_less(const VectorXd& a, const VectorXd& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a(i) < b(i) - 1e-12) return true;
    if (a(i) > b(i) + 1e-12) return false;
  }
  return false;
}

}  // namespace

const char* to_string(MpcSolution::Status s) {
  switch (s) {
    case MpcSolution::Status::kOptimal:
      return "optimal";
    case MpcSolution::Status::kFeasibleSuboptimal:
      return "feasible-suboptimal";
    case MpcSolution::Status::kInfeasible:
      return "infeasible";
  }
  return "?";
}

double n_step_reward(const Scenario& scn, const VectorXd& x, const std::vector<VectorXd>& inputs,
                     const VectorXd& theta, int t) {
  if (inputs.empty()) throw ContractError("n_step_reward: empty input sequence");
  const auto traj = rollout_learned(scn, x, inputs, theta, t);
  double J = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    J += scn.reward.mean_h(traj[k], inputs[k], theta, t + static_cast<int>(k));
  }
  return J;
}

MpcSolution solve_vn(const Scenario& scn, const VectorXd& x, const VectorXd& theta, int N,
                     const InvariantSetCertificate& cert, int t, const SolverOptions& opts,
                     Rng& rng) {
  if (N < 0) throw ContractError("solve_vn: N must be nonnegative");
  MpcSolution sol;

  StackedProblem sp = build_constraints(scn, x, cert, N);
  if (sp.trivially_infeasible) return sol;

  HPolytope ubar;
  try {
    ubar = safe_input_set(x, scn.A, scn.B, cert.omega, scn.W, scn.U);
  } catch (const EmptySafeSetError&) {
    return sol;  // infeasible
  }

  // start points: center of U_bar(x) then uniform samples
  const int q = scn.q();
  VectorXd u_center;
  try {
    u_center = ubar.chebyshev_center().first;
  } catch (const ContractError&) {
    return sol;
  }
  VectorXd rest_center(q);
  {
    const auto cc = scn.U.chebyshev_center();
    rest_center = cc.first;
  }

  Objective obj{&scn, x, theta, t, opts.fd_step};

  bool have_best = false;
  StartResult best;
  int total_iters = 0;
  for (int s = 0; s < opts.multistarts; ++s) {
    VectorXd z(sp.nv);
    if (s == 0) {
      z.head(q) = u_center;
      for (int k = 1; k <= N; ++k) z.segment(k * q, q) = rest_center;
    } else {
      z.head(q) = sample_uniform(ubar, rng);
      for (int k = 1; k <= N; ++k) z.segment(k * q, q) = sample_uniform(scn.U, rng);
    }
    if (!project(sp, z)) {
      // could not reach the feasible set from this start
      if (s == 0 && max_violation(sp, z) > 1e-7) {
        // the stacked program itself appears empty
        VectorXd c = VectorXd::Zero(sp.nv);
        MatrixXd G(sp.rows.size(), sp.nv);
        VectorXd f(sp.rows.size());
        for (size_t i = 0; i < sp.rows.size(); ++i) {
          G.row(i) = sp.rows[i].g.transpose();
          f(i) = sp.rows[i].f;
        }
        if (solve_lp(c, G, f).status == LpResult::Status::kInfeasible) return sol;
      }
      continue;
    }
    StartResult r = ascend(sp, obj, z, opts);
    total_iters += r.iterations;
    if (!have_best || r.value > best.value + 1e-9 ||
        (std::abs(r.value - best.value) <= 1e-9 && lex_less(r.z, best.z))) {
      best = std::move(r);
      have_best = true;
    }
  }
  if (!have_best) return sol;

  sol.inputs = unstack(best.z, q);
  {
    auto traj = rollout_learned(scn, x, sol.inputs, theta, t);
    traj.pop_back();
    sol.learned_states = std::move(traj);
    auto nom = rollout_nominal(scn, x, sol.inputs, t);
    nom.pop_back();
    sol.nominal_states = std::move(nom);
  }
  sol.value = n_step_reward(scn, x, sol.inputs, theta, t);
  sol.solver_iterations = total_iters;
  sol.stationarity_residual = best.residual;
  sol.status = best.residual <= opts.stationarity_tol ? MpcSolution::Status::kOptimal
                                                      : MpcSolution::Status::kFeasibleSuboptimal;
  return sol;
}

FeasibilityReport check_recursive_feasibility(const Scenario& scn,
                                              const InvariantSetCertificate& cert,
                                              const VectorXd& x, const VectorXd& u, int N, int t) {
  FeasibilityReport rep;
  const HPolytope S = pontryagin_diff(cert.omega, scn.W);
  const VectorXd xbar_next = scn.A * x + scn.B * u;
  const MatrixXd M = scn.A + scn.B * cert.gain_K;
  const VectorXd Bk0 = scn.B * cert.offset_k0;
  const HPolytope& XN = scn.nominal_state_set();
  const double tol = 1e-9;

  for (const auto& w : scn.W.vertices()) {
    const VectorXd xp = xbar_next + w;
    ++rep.checks;
    if (!cert.omega.contains(xp, tol)) {
      rep.ok = false;
      rep.offending_w = w;
      rep.failure = "successor left Omega";
      return rep;
    }
    if (!scn.X.contains(xp, tol)) {
      rep.ok = false;
      rep.offending_w = w;
      rep.failure = "successor left X";
      return rep;
    }
    // Theorem-1 candidate sequence from x+: u = K x- + k0 down the horizon
    VectorXd xb = xp;
    for (int k = 0; k <= N; ++k) {
      const VectorXd uc = cert.gain_K * xb + cert.offset_k0;
      ++rep.checks;
      if (!scn.U.contains(uc, tol)) {
        rep.ok = false;
        rep.offending_w = w;
        rep.failure = "candidate input left U";
        return rep;
      }
      const VectorXd xb_next = M * xb + Bk0;
      if (k == 0 && !S.contains(xb_next, tol)) {
        rep.ok = false;
        rep.offending_w = w;
        rep.failure = "candidate first step left Omega ⊖ W";
        return rep;
      }
      if (k >= 1 && !XN.contains(xb, tol)) {
        rep.ok = false;
        rep.offending_w = w;
        rep.failure = "candidate nominal state left the state set";
        return rep;
      }
      xb = xb_next;
    }
  }
  return rep;
}

}  // namespace lbmpc
