#pragma once

#include <optional>

#include "lbmpc/dynamics.hpp"
#include "lbmpc/scenario.hpp"

namespace lbmpc {

struct EstimationOptions {
  int grid_per_dim = 11;            // coarse grid points per parameter dimension
  int refine_max_iterations = 200;  // compass direct-search budget
  double refine_step_floor = 1e-8;
  int full_recompute_every = 256;   // drift guard for the incremental accumulators
  double nll_clamp = 1e30;          // penalty for zero/underflowing densities
  double state_guard = 1e12;        // regenerated-state divergence guard
};

struct NllValue {
  double value = 0.0;
  bool clamped = false;
};

// -sum_i log p(r_i | x_i^theta, u_i, theta) with states regenerated from
// x_0 under theta and the recorded inputs. Uses the first `t_limit` rewards
// (all when negative).
NllValue neg_log_likelihood_full(const Scenario& scn, const History& hist, const VectorXd& theta,
                                 int t_limit = -1, const EstimationOptions& opts = {});
double neg_log_likelihood(const Scenario& scn, const History& hist, const VectorXd& theta,
                          int t_limit = -1);

// Eq.-(13)-style empirical log-likelihood-ratio average against theta_true.
double empirical_log_ratio_objective(const Scenario& scn, const History& hist,
                                     const VectorXd& theta, int t_limit = -1);

struct ParameterEstimate {
  VectorXd theta_hat;
  double nll = 0.0;
  VectorXd grid_best;
  int refine_iterations = 0;
  int t_fit = 0;
  bool degenerate = false;  // every evaluation hit the penalty clamp
};

// Coarse grid over Theta plus compass direct-search refinement, warm-started
// at the better of {grid winner, prev}. Deterministic given the history.
ParameterEstimate mle_fit(const Scenario& scn, const History& hist,
                          const std::optional<ParameterEstimate>& prev = std::nullopt,
                          const EstimationOptions& opts = {}, int t_limit = -1);

// Trajectory KL divergence of Definition-1 form: per-step closed-form KL of
// the reward distributions along the two regenerated state trajectories.
double trajectory_kl(const Scenario& scn, const VectorXd& theta_a, const VectorXd& theta_b,
                     const VectorXd& x0, const std::vector<VectorXd>& inputs, int t0 = 0);

struct ConcentrationPoint {
  int t;
  double kl_per_step;  // D_{Pi_t}(theta0 || theta_hat_t) / (t - 1)
  VectorXd theta_hat;
};

// Refits at each checkpoint prefix of the history and reports the per-step
// trajectory KL against theta_true.
std::vector<ConcentrationPoint> concentration_curve(const Scenario& scn, const History& hist,
                                                    const std::vector<int>& checkpoints,
                                                    const EstimationOptions& opts = {});

// Incrementally maintained grid NLLs for the policy loop: every observed
// (u, r) advances each tracked parameter point one step, keeping per-step
// refit cost at O(grid) instead of O(t * grid). A full recompute every
// `full_recompute_every` observations guards against float drift.
class EstimatorCache {
 public:
  EstimatorCache(const Scenario& scn, const VectorXd& x0, const EstimationOptions& opts = {});

  void observe(const VectorXd& u, double r);
  int t() const { return static_cast<int>(rewards_.size()); }

  // Cheap refit: better of {grid winner, previously refined point}.
  // `refine` additionally runs the compass search and re-tracks the result.
  ParameterEstimate fit(bool refine);

  const std::optional<ParameterEstimate>& last() const { return last_; }

 private:
  struct Tracked {
    VectorXd theta;
    VectorXd state;
    double nll = 0.0;
    bool clamped = false;
  };

  void advance(Tracked& tr, const VectorXd& u, double r, int t) const;
  void retrack(Tracked& tr) const;  // recompute from scratch over the stored history
  void full_recompute();

  const Scenario* scn_;
  EstimationOptions opts_;
  VectorXd x0_;
  std::vector<Tracked> grid_;
  std::optional<Tracked> refined_;
  std::optional<ParameterEstimate> last_;
  std::vector<VectorXd> inputs_;
  std::vector<double> rewards_;
};

// Grid over a box: grid_per_dim points per dimension (a single point for
// collapsed dimensions).
std::vector<VectorXd> parameter_grid(const HPolytope& box, int grid_per_dim);

}  // namespace lbmpc
