#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <optional>
#include <vector>

#include "lbmpc/errors.hpp"
#include "lbmpc/rng.hpp"

namespace lbmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Outcome of a tiny dense LP: max c'x subject to Gx <= f over free variables.
struct LpResult {
  enum class Status { kOptimal, kInfeasible, kUnbounded };
  Status status = Status::kInfeasible;
  double value = 0.0;
  VectorXd point;  // argmax when optimal
};

// Two-phase dense simplex with Bland's rule. Sized for the problems this
// library actually solves: a handful of variables, a few dozen rows.
LpResult solve_lp(const VectorXd& c, const MatrixXd& G, const VectorXd& f);

// Convex polytope in half-space representation {x : normals*x <= offsets}.
// Values are immutable after construction and safe to share across threads;
// the emptiness/boundedness caches only ever go from unknown to a fixed value.
class HPolytope {
 public:
  HPolytope() = default;
  HPolytope(MatrixXd normals, VectorXd offsets);
  HPolytope(const HPolytope& o);
  HPolytope(HPolytope&& o) noexcept;
  HPolytope& operator=(const HPolytope& o);
  HPolytope& operator=(HPolytope&& o) noexcept;

  // Axis-aligned box [lo, hi] (componentwise). lo == hi is permitted.
  static HPolytope box(const VectorXd& lo, const VectorXd& hi);
  static HPolytope interval(double lo, double hi);
  static HPolytope singleton(const VectorXd& point);

  const MatrixXd& normals() const { return normals_; }
  const VectorXd& offsets() const { return offsets_; }
  int dim() const { return dim_; }
  int num_rows() const { return static_cast<int>(normals_.rows()); }

  // Box structure when the polytope was constructed as one.
  bool is_box() const { return box_lo_.has_value(); }
  const VectorXd& box_lo() const { return *box_lo_; }
  const VectorXd& box_hi() const { return *box_hi_; }

  bool contains(const VectorXd& x, double tol = 0.0) const;

  // Support function h_P(c) = max {c'x : x in P}. Throws ContractError when
  // empty, UnsupportedError when unbounded in direction c.
  double support(const VectorXd& c) const;

  bool is_empty() const;
  bool is_bounded() const;  // 2*dim support problems, cached

  // Chebyshev center and radius (largest inscribed ball). Requires nonempty.
  std::pair<VectorXd, double> chebyshev_center() const;

  // Vertex enumeration for dim <= 3 (all d-subsets of active rows).
  std::vector<VectorXd> vertices() const;

  // Drop rows implied by the remaining ones.
  HPolytope without_redundant_rows(double tol = 1e-9) const;

  // Intersection (concatenates rows).
  HPolytope intersect(const HPolytope& other) const;

  // For 1-D sets: the interval [lo, hi].
  std::pair<double, double> as_interval() const;

 private:
  // 1-D sets: the interval [lo, hi] implied by the rows (+-inf when open,
  // lo > hi when empty). O(rows) arithmetic, bypasses the LP entirely.
  std::pair<double, double> interval1() const;

  MatrixXd normals_;
  VectorXd offsets_;
  int dim_ = 0;
  std::optional<VectorXd> box_lo_, box_hi_;

  // tri-state caches (-1 unknown): idempotent, safe for concurrent readers
  mutable std::atomic<int> empty_cache_{-1};
  mutable std::atomic<int> bounded_cache_{-1};
};

// ---- Set algebra --------------------------------------------------------

// {R u : u in P}. Invertible R uses normals * R^-1; singular R falls back to
// vertex enumeration + hull for dim <= 3 and errors above that.
HPolytope linear_map(const HPolytope& P, const MatrixXd& R);

// Exact H-representation of {p + q}. Supported: box + box in any dimension,
// translation by a singleton, and general pairs in dim <= 2 via vertex
// enumeration + hull. General sums in dim 3 would need edge-pair facet
// generation and are rejected.
HPolytope minkowski_sum(const HPolytope& P, const HPolytope& Q);

// {u : u + Q subseteq P}, computed by tightening every offset of P with the
// support of Q in that row's direction. Exact for H-polytopes; may be empty.
HPolytope pontryagin_diff(const HPolytope& P, const HPolytope& Q);

bool contains(const HPolytope& P, const VectorXd& x, double tol = 0.0);

// A point of P. Exactly uniform for boxes and 1-D sets; hit-and-run with
// 50*dim burn-in (one sample per chain) for general dim <= 3; degenerate
// lower-dimensional sets fall back to vertex interpolation.
VectorXd sample_uniform(const HPolytope& P, Rng& rng);

// Hausdorff distance between two bounded polytopes, evaluated over the facet
// normals of both plus coordinate directions (exact for intervals/boxes).
double hausdorff_distance(const HPolytope& P, const HPolytope& Q);

// ---- Disturbance-invariant set machinery --------------------------------

struct InvariantSetCertificate {
  HPolytope omega;
  MatrixXd gain_K;      // feedback gain, u = K x + k0
  VectorXd offset_k0;   // affine feedback term (zero for the plain u = K x)
  double residual_containment = 0.0;  // violation of (A+BK)·Omega (+Bk0) ⊕ W ⊆ Omega
  double residual_input = 0.0;        // violation of K·Omega + k0 ⊆ U
  bool converged = true;              // false when the iteration hit its cap
  int iterations = 0;
};

struct InvariantSetOptions {
  double tol = 1e-9;      // certification tolerance
  int max_iterations = 10000;
};

// Output admissible disturbance invariant set for x+ = (A+BK)x + B k0 + w,
// w in W, under x in X and Kx + k0 in U. Backward constraint-tightening
// iteration from {x in X : Kx + k0 in U} until finite determination.
// Residuals are computed exactly via support functions.
InvariantSetCertificate max_output_admissible_set(
    const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, const HPolytope& X,
    const HPolytope& U, const HPolytope& W, const InvariantSetOptions& opts = {},
    const VectorXd& k0 = VectorXd());

// Safe input set  U_bar(x) = {u in U : Ax + Bu in Omega ⊖ W}  as an
// H-polytope over u. Throws EmptySafeSetError when empty.
HPolytope safe_input_set(const VectorXd& x, const MatrixXd& A, const MatrixXd& B,
                         const HPolytope& omega, const HPolytope& W, const HPolytope& U);

}  // namespace lbmpc
