#include "lbmpc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <numeric>

namespace lbmpc {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kFeasTol = 1e-9;

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

}  // namespace

// ---------------------------------------------------------------------------
// Dense two-phase simplex, Bland's rule. Free variables are split x = x+ - x-.
// Problems here have at most a handful of variables and a few dozen rows.
// ---------------------------------------------------------------------------
LpResult solve_lp(const VectorXd& c, const MatrixXd& G, const VectorXd& f) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(G.rows());

  // Standard form columns: [x+ (n) | x- (n) | slack (m) | artificial (<=m)]
  const int n_struct = 2 * n + m;
  std::vector<int> art_col(m, -1);
  int n_art = 0;
  for (int i = 0; i < m; ++i) {
    if (f(i) < 0) art_col[i] = n_struct + n_art++;
  }
  const int n_total = n_struct + n_art;

  MatrixXd T = MatrixXd::Zero(m + 1, n_total + 1);
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) {
    const double sign = (f(i) < 0) ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) {
      T(i, j) = sign * G(i, j);
      T(i, n + j) = -sign * G(i, j);
    }
    T(i, 2 * n + i) = sign;  // slack
    T(i, n_total) = sign * f(i);
    if (art_col[i] >= 0) {
      T(i, art_col[i]) = 1.0;
      basis[i] = art_col[i];
    } else {
      basis[i] = 2 * n + i;
    }
  }

  auto pivot = [&](int row, int col) {
    T.row(row) /= T(row, col);
    for (int i = 0; i <= m; ++i) {
      if (i != row && std::abs(T(i, col)) > 0.0) T.row(i) -= T(i, col) * T.row(row);
    }
    basis[row] = col;
  };

  // Minimizes the objective encoded in row m via Bland's rule.
  // Returns false when unbounded below.
  auto run_simplex = [&](int num_cols) -> bool {
    for (;;) {
      int enter = -1;
      for (int j = 0; j < num_cols; ++j) {
        if (T(m, j) < -kPivotTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (T(i, enter) > kPivotTol) {
          const double ratio = T(i, n_total) / T(i, enter);
          if (ratio < best_ratio - kPivotTol ||
              (ratio < best_ratio + kPivotTol && (leave < 0 || basis[i] < basis[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  };

  LpResult res;

  if (n_art > 0) {
    // Phase 1: minimize the sum of artificials.
    for (int j = n_struct; j < n_total; ++j) T(m, j) = 1.0;
    for (int i = 0; i < m; ++i) {
      if (basis[i] >= n_struct) T.row(m) -= T.row(i);
    }
    run_simplex(n_total);
    if (T(m, n_total) < -kFeasTol) {
      res.status = LpResult::Status::kInfeasible;
      return res;
    }
    // Drive remaining artificials out of the basis.
    for (int i = 0; i < m; ++i) {
      if (basis[i] >= n_struct) {
        int col = -1;
        for (int j = 0; j < n_struct; ++j) {
          if (std::abs(T(i, j)) > kPivotTol) {
            col = j;
            break;
          }
        }
        if (col >= 0) pivot(i, col);
        // else: redundant row, its basic artificial stays at zero
      }
    }
  }

  // Phase 2: minimize -c'x.
  T.row(m).setZero();
  for (int j = 0; j < n; ++j) {
    T(m, j) = -c(j);
    T(m, n + j) = c(j);
  }
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n_struct && std::abs(T(m, basis[i])) > 0.0) {
      T.row(m) -= T(m, basis[i]) * T.row(i);
    }
  }
  if (!run_simplex(n_struct)) {
    res.status = LpResult::Status::kUnbounded;
    return res;
  }

  VectorXd v = VectorXd::Zero(n_struct);
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n_struct) v(basis[i]) = T(i, n_total);
  }
  res.status = LpResult::Status::kOptimal;
  res.point = v.head(n) - v.segment(n, n);
  res.value = c.dot(res.point);
  return res;
}

// ---------------------------------------------------------------------------
// HPolytope
// ---------------------------------------------------------------------------
HPolytope::HPolytope(MatrixXd normals, VectorXd offsets)
    : normals_(std::move(normals)), offsets_(std::move(offsets)) {
  if (normals_.rows() != offsets_.size()) {
    throw ContractError("HPolytope: one offset per normal row required");
  }
  if (!all_finite(normals_) || !offsets_.allFinite()) {
    throw ContractError("HPolytope: non-finite entries");
  }
  dim_ = static_cast<int>(normals_.cols());
  if (dim_ <= 0) throw ContractError("HPolytope: ambient dimension must be positive");
}

HPolytope::HPolytope(const HPolytope& o)
    : normals_(o.normals_),
      offsets_(o.offsets_),
      dim_(o.dim_),
      box_lo_(o.box_lo_),
      box_hi_(o.box_hi_) {
  empty_cache_.store(o.empty_cache_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  bounded_cache_.store(o.bounded_cache_.load(std::memory_order_relaxed),
                       std::memory_order_relaxed);
}

HPolytope::HPolytope(HPolytope&& o) noexcept
    : normals_(std::move(o.normals_)),
      offsets_(std::move(o.offsets_)),
      dim_(o.dim_),
      box_lo_(std::move(o.box_lo_)),
      box_hi_(std::move(o.box_hi_)) {
  empty_cache_.store(o.empty_cache_.load(std::memory_order_relaxed), std::memory_order_relaxed);
  bounded_cache_.store(o.bounded_cache_.load(std::memory_order_relaxed),
                       std::memory_order_relaxed);
}

HPolytope& HPolytope::operator=(const HPolytope& o) {
  if (this != &o) {
    normals_ = o.normals_;
    offsets_ = o.offsets_;
    dim_ = o.dim_;
    box_lo_ = o.box_lo_;
    box_hi_ = o.box_hi_;
    empty_cache_.store(o.empty_cache_.load(std::memory_order_relaxed),
                       std::memory_order_relaxed);
    bounded_cache_.store(o.bounded_cache_.load(std::memory_order_relaxed),
                         std::memory_order_relaxed);
  }
  return *this;
}

HPolytope& HPolytope::operator=(HPolytope&& o) noexcept {
  if (this != &o) {
    normals_ = std::move(o.normals_);
    offsets_ = std::move(o.offsets_);
    dim_ = o.dim_;
    box_lo_ = std::move(o.box_lo_);
    box_hi_ = std::move(o.box_hi_);
    empty_cache_.store(o.empty_cache_.load(std::memory_order_relaxed),
                       std::memory_order_relaxed);
    bounded_cache_.store(o.bounded_cache_.load(std::memory_order_relaxed),
                         std::memory_order_relaxed);
  }
  return *this;
}

std::pair<double, double> HPolytope::interval1() const {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < normals_.rows(); ++i) {
    const double g = normals_(i, 0);
    const double f = offsets_(i);
    if (std::abs(g) < 1e-300) {
      if (f < 0.0) return {1.0, -1.0};  // 0 <= f violated: empty
      continue;
    }
    const double bound = f / g;
    if (g > 0.0) {
      hi = std::min(hi, bound);
    } else {
      lo = std::max(lo, bound);
    }
  }
  return {lo, hi};
}

HPolytope HPolytope::box(const VectorXd& lo, const VectorXd& hi) {
  const int d = static_cast<int>(lo.size());
  if (hi.size() != d) throw ContractError("box: lo/hi dimension mismatch");
  for (int i = 0; i < d; ++i) {
    if (!(lo(i) <= hi(i))) throw ContractError("box: lo > hi");
  }
  MatrixXd N = MatrixXd::Zero(2 * d, d);
  VectorXd b(2 * d);
  for (int i = 0; i < d; ++i) {
    N(2 * i, i) = 1.0;
    b(2 * i) = hi(i);
    N(2 * i + 1, i) = -1.0;
    b(2 * i + 1) = -lo(i);
  }
  HPolytope P(std::move(N), std::move(b));
  P.box_lo_ = lo;
  P.box_hi_ = hi;
  P.empty_cache_.store(0, std::memory_order_relaxed);
  P.bounded_cache_.store(1, std::memory_order_relaxed);
  return P;
}

HPolytope HPolytope::interval(double lo, double hi) {
  VectorXd l(1), h(1);
  l << lo;
  h << hi;
  return box(l, h);
}

HPolytope HPolytope::singleton(const VectorXd& point) { return box(point, point); }

bool HPolytope::contains(const VectorXd& x, double tol) const {
  if (x.size() != dim_) throw ContractError("contains: dimension mismatch");
  return ((normals_ * x - offsets_).array() <= tol).all();
}

double HPolytope::support(const VectorXd& c) const {
  if (c.size() != dim_) throw ContractError("support: dimension mismatch");
  if (is_box()) {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += c(i) >= 0 ? c(i) * (*box_hi_)(i) : c(i) * (*box_lo_)(i);
    return s;
  }
  if (dim_ == 1) {
    const auto [lo, hi] = interval1();
    if (lo > hi) throw ContractError("support: empty polytope");
    const double side = c(0) >= 0 ? hi : lo;
    if (!std::isfinite(side) && c(0) != 0.0) {
      throw UnsupportedError("support: unbounded in requested direction");
    }
    return c(0) == 0.0 ? 0.0 : c(0) * side;
  }
  const LpResult lp = solve_lp(c, normals_, offsets_);
  if (lp.status == LpResult::Status::kInfeasible) throw ContractError("support: empty polytope");
  if (lp.status == LpResult::Status::kUnbounded) {
    throw UnsupportedError("support: unbounded in requested direction");
  }
  return lp.value;
}

bool HPolytope::is_empty() const {
  const int cached = empty_cache_.load(std::memory_order_relaxed);
  if (cached >= 0) return cached != 0;
  bool empty;
  if (dim_ == 1) {
    const auto [lo, hi] = interval1();
    empty = lo > hi;
  } else {
    empty = solve_lp(VectorXd::Zero(dim_), normals_, offsets_).status ==
            LpResult::Status::kInfeasible;
  }
  empty_cache_.store(empty ? 1 : 0, std::memory_order_relaxed);
  return empty;
}

bool HPolytope::is_bounded() const {
  const int cached = bounded_cache_.load(std::memory_order_relaxed);
  if (cached >= 0) return cached != 0;
  bool bounded = true;
  if (is_empty()) {
    bounded = true;
  } else if (dim_ == 1) {
    const auto [lo, hi] = interval1();
    bounded = std::isfinite(lo) && std::isfinite(hi);
  } else {
    for (int i = 0; i < dim_ && bounded; ++i) {
      for (double sign : {1.0, -1.0}) {
        VectorXd c = VectorXd::Zero(dim_);
        c(i) = sign;
        const LpResult lp = solve_lp(c, normals_, offsets_);
        if (lp.status == LpResult::Status::kUnbounded) {
          bounded = false;
          break;
        }
      }
    }
  }
  bounded_cache_.store(bounded ? 1 : 0, std::memory_order_relaxed);
  return bounded;
}

std::pair<VectorXd, double> HPolytope::chebyshev_center() const {
  if (dim_ == 1) {
    const auto [lo, hi] = interval1();
    if (lo > hi) throw ContractError("chebyshev_center: empty polytope");
    const double clo = std::isfinite(lo) ? lo : -1e9;
    const double chi = std::isfinite(hi) ? hi : 1e9;
    VectorXd c(1);
    c << 0.5 * (clo + chi);
    return {c, 0.5 * (chi - clo)};
  }
  // max r  s.t.  g_i'x + ||g_i|| r <= f_i,  0 <= r <= big
  const int m = num_rows();
  MatrixXd G(m + 2, dim_ + 1);
  VectorXd f(m + 2);
  for (int i = 0; i < m; ++i) {
    G.row(i).head(dim_) = normals_.row(i);
    G(i, dim_) = normals_.row(i).norm();
    f(i) = offsets_(i);
  }
  G.row(m).setZero();
  G(m, dim_) = -1.0;
  f(m) = 0.0;
  G.row(m + 1).setZero();
  G(m + 1, dim_) = 1.0;
  f(m + 1) = 1e9;
  VectorXd c = VectorXd::Zero(dim_ + 1);
  c(dim_) = 1.0;
  const LpResult lp = solve_lp(c, G, f);
  if (lp.status != LpResult::Status::kOptimal) {
    throw ContractError("chebyshev_center: empty polytope");
  }
  return {lp.point.head(dim_), lp.point(dim_)};
}

std::vector<VectorXd> HPolytope::vertices() const {
  if (dim_ > 3) throw UnsupportedError("vertices: enumeration limited to dim <= 3");
  if (is_box()) {
    std::vector<VectorXd> out;
    const int d = dim_;
    for (int mask = 0; mask < (1 << d); ++mask) {
      VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = (mask >> i) & 1 ? (*box_hi_)(i) : (*box_lo_)(i);
      bool dup = false;
      for (const auto& u : out) {
        if ((u - v).norm() <= 1e-12) {
          dup = true;
          break;
        }
      }
      if (!dup) out.push_back(v);
    }
    return out;
  }

  const int m = num_rows();
  std::vector<VectorXd> out;
  std::vector<int> idx(dim_);
  std::function<void(int, int)> rec = [&](int start, int k) {
    if (k == dim_) {
      MatrixXd Asub(dim_, dim_);
      VectorXd bsub(dim_);
      for (int i = 0; i < dim_; ++i) {
        Asub.row(i) = normals_.row(idx[i]);
        bsub(i) = offsets_(idx[i]);
      }
      Eigen::FullPivLU<MatrixXd> lu(Asub);
      lu.setThreshold(1e-10);
      if (lu.rank() < dim_) return;
      const VectorXd x = lu.solve(bsub);
      const double scale = 1.0 + x.norm();
      if (((normals_ * x - offsets_).array() <= kFeasTol * scale).all()) {
        for (const auto& u : out) {
          if ((u - x).norm() <= 1e-8 * scale) return;
        }
        out.push_back(x);
      }
      return;
    }
    for (int i = start; i <= m - (dim_ - k); ++i) {
      idx[k] = i;
      rec(i + 1, k + 1);
    }
  };
  rec(0, 0);
  return out;
}

HPolytope HPolytope::without_redundant_rows(double tol) const {
  MatrixXd N = normals_;
  VectorXd b = offsets_;
  bool changed = true;
  while (changed && N.rows() > 1) {
    changed = false;
    for (int i = 0; i < N.rows(); ++i) {
      MatrixXd No(N.rows() - 1, dim_);
      VectorXd bo(N.rows() - 1);
      int k = 0;
      for (int j = 0; j < N.rows(); ++j) {
        if (j == i) continue;
        No.row(k) = N.row(j);
        bo(k) = b(j);
        ++k;
      }
      const LpResult lp = solve_lp(N.row(i).transpose(), No, bo);
      if (lp.status == LpResult::Status::kOptimal && lp.value <= b(i) + tol) {
        N = No;
        b = bo;
        changed = true;
        break;
      }
    }
  }
  return HPolytope(N, b);
}

HPolytope HPolytope::intersect(const HPolytope& other) const {
  if (other.dim() != dim_) throw ContractError("intersect: dimension mismatch");
  MatrixXd N(num_rows() + other.num_rows(), dim_);
  VectorXd b(num_rows() + other.num_rows());
  N << normals_, other.normals_;
  b << offsets_, other.offsets_;
  return HPolytope(N, b);
}

std::pair<double, double> HPolytope::as_interval() const {
  if (dim_ != 1) throw ContractError("as_interval: requires dim == 1");
  const auto [lo, hi] = interval1();
  if (lo > hi) throw ContractError("as_interval: empty polytope");
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// Hulls for the vertex-based fallbacks (full-dim up to 2-D, plus degenerate
// lower-dimensional point sets embedded in up to 3-D).
// ---------------------------------------------------------------------------
namespace {

// Andrew's monotone chain; returns hull vertices in counterclockwise order.
std::vector<Eigen::Vector2d> hull_2d(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return (a - b).norm() <= 1e-12; }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n <= 2) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> h(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 1e-14) --k;
    h[k++] = pts[i];
  }
  for (int i = n - 2, lower = k + 1; i >= 0; --i) {
    while (k >= lower && cross(h[k - 2], h[k - 1], pts[i]) <= 1e-14) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

// H-representation of the convex hull of points whose affine hull may be
// lower-dimensional. Supports intrinsic rank <= 2 inside ambient dim <= 3.
HPolytope hull_from_points(const std::vector<VectorXd>& pts, int ambient_dim) {
  if (pts.empty()) throw ContractError("hull_from_points: no points");
  VectorXd mean = VectorXd::Zero(ambient_dim);
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());

  MatrixXd centered(ambient_dim, pts.size());
  for (size_t i = 0; i < pts.size(); ++i) centered.col(i) = pts[i] - mean;
  Eigen::JacobiSVD<MatrixXd> svd(centered, Eigen::ComputeFullU);
  const double scale = std::max(1.0, centered.cwiseAbs().maxCoeff());
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()(i) > 1e-10 * scale) ++rank;
  }

  std::vector<std::pair<VectorXd, double>> rows;
  const MatrixXd& Uf = svd.matrixU();

  // Equality pairs pin the affine hull along the degenerate directions.
  for (int i = rank; i < ambient_dim; ++i) {
    const VectorXd n = Uf.col(i);
    rows.push_back({n, n.dot(mean)});
    rows.push_back({-n, -n.dot(mean)});
  }

  if (rank == 0) {
    // single point; the equality pairs above already describe it
  } else if (rank == 1) {
    const VectorXd dir = Uf.col(0);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : pts) {
      const double t = dir.dot(p - mean);
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    rows.push_back({dir, dir.dot(mean) + hi});
    rows.push_back({-dir, -(dir.dot(mean) + lo)});
  } else if (rank == 2) {
    std::vector<Eigen::Vector2d> plane(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      plane[i] = {Uf.col(0).dot(pts[i] - mean), Uf.col(1).dot(pts[i] - mean)};
    }
    const auto hull = hull_2d(plane);
    if (hull.size() < 3) {
      // collinear after projection; fall back to the rank-1 treatment
      std::vector<VectorXd> lifted;
      for (const auto& q : hull) lifted.push_back(mean + Uf.col(0) * q.x() + Uf.col(1) * q.y());
      return hull_from_points(lifted, ambient_dim);
    }
    for (size_t i = 0; i < hull.size(); ++i) {
      const auto& p = hull[i];
      const auto& q = hull[(i + 1) % hull.size()];
      const Eigen::Vector2d edge = q - p;
      const Eigen::Vector2d n2(edge.y(), -edge.x());  // outward for CCW order
      const VectorXd n = Uf.col(0) * n2.x() + Uf.col(1) * n2.y();
      const double nn = n.norm();
      rows.push_back({n / nn, (n.dot(mean) + n2.dot(p)) / nn});
    }
  } else {
    throw UnsupportedError("hull_from_points: full-dimensional 3-D hulls not supported");
  }

  MatrixXd N(rows.size(), ambient_dim);
  VectorXd b(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    N.row(i) = rows[i].first.transpose();
    b(i) = rows[i].second;
  }
  return HPolytope(N, b);
}

}  // namespace

// ---------------------------------------------------------------------------
// Set algebra
// ---------------------------------------------------------------------------
HPolytope linear_map(const HPolytope& P, const MatrixXd& R) {
  if (R.rows() != P.dim() || R.cols() != P.dim()) {
    throw ContractError("linear_map: R must be square of the polytope dimension");
  }
  Eigen::FullPivLU<MatrixXd> lu(R);
  lu.setThreshold(1e-12);
  if (lu.isInvertible()) {
    return HPolytope(P.normals() * lu.inverse(), P.offsets());
  }
  if (P.dim() > 3) {
    throw UnsupportedError("linear_map: singular map above dim 3");
  }
  const auto verts = P.vertices();
  if (verts.empty()) throw ContractError("linear_map: empty or unbounded polytope");
  std::vector<VectorXd> image;
  image.reserve(verts.size());
  for (const auto& v : verts) image.push_back(R * v);
  return hull_from_points(image, P.dim());
}

HPolytope minkowski_sum(const HPolytope& P, const HPolytope& Q) {
  if (P.dim() != Q.dim()) throw ContractError("minkowski_sum: dimension mismatch");
  const int d = P.dim();

  if (P.is_box() && Q.is_box()) {
    return HPolytope::box(P.box_lo() + Q.box_lo(), P.box_hi() + Q.box_hi());
  }

  // Translation by a singleton: shift every offset.
  auto singleton_of = [](const HPolytope& S) -> std::optional<VectorXd> {
    if (S.is_box() && (S.box_hi() - S.box_lo()).norm() == 0.0) return S.box_lo();
    return std::nullopt;
  };
  if (auto t = singleton_of(Q)) return HPolytope(P.normals(), P.offsets() + P.normals() * *t);
  if (auto t = singleton_of(P)) return HPolytope(Q.normals(), Q.offsets() + Q.normals() * *t);

  if (d > 2) {
    throw UnsupportedError("minkowski_sum: general sums supported only for boxes or dim <= 2");
  }
  const auto vp = P.vertices();
  const auto vq = Q.vertices();
  if (vp.empty() || vq.empty()) throw ContractError("minkowski_sum: empty operand");
  std::vector<VectorXd> sums;
  sums.reserve(vp.size() * vq.size());
  for (const auto& a : vp) {
    for (const auto& b : vq) sums.push_back(a + b);
  }
  return hull_from_points(sums, d);
}

HPolytope pontryagin_diff(const HPolytope& P, const HPolytope& Q) {
  if (P.dim() != Q.dim()) throw ContractError("pontryagin_diff: dimension mismatch");
  if (!Q.is_bounded()) throw ContractError("pontryagin_diff: Q must be bounded");
  VectorXd b(P.num_rows());
  for (int i = 0; i < P.num_rows(); ++i) {
    b(i) = P.offsets()(i) - Q.support(P.normals().row(i).transpose());
  }
  return HPolytope(P.normals(), b);
}

bool contains(const HPolytope& P, const VectorXd& x, double tol) { return P.contains(x, tol); }

VectorXd sample_uniform(const HPolytope& P, Rng& rng) {
  if (P.is_empty()) throw ContractError("sample_uniform: empty polytope");
  if (!P.is_bounded()) throw ContractError("sample_uniform: unbounded polytope");

  if (P.is_box()) {
    VectorXd x(P.dim());
    for (int i = 0; i < P.dim(); ++i) x(i) = rng.uniform(P.box_lo()(i), P.box_hi()(i));
    return x;
  }
  if (P.dim() == 1) {
    const auto [lo, hi] = P.as_interval();
    VectorXd x(1);
    x << rng.uniform(lo, hi);
    return x;
  }
  if (P.dim() > 3) throw UnsupportedError("sample_uniform: dim > 3 not supported");

  const auto [center, radius] = P.chebyshev_center();
  if (radius < 1e-12) {
    // degenerate (lower-dimensional): random convex combination of vertices
    const auto verts = P.vertices();
    if (verts.empty()) return center;
    VectorXd w(verts.size());
    double total = 0.0;
    for (int i = 0; i < w.size(); ++i) {
      w(i) = -std::log(1.0 - rng.uniform());
      total += w(i);
    }
    VectorXd x = VectorXd::Zero(P.dim());
    for (size_t i = 0; i < verts.size(); ++i) x += (w(i) / total) * verts[i];
    return x;
  }

  // hit-and-run with 50*dim burn-in, one sample per chain
  VectorXd x = center;
  const int steps = 50 * P.dim();
  for (int s = 0; s < steps; ++s) {
    VectorXd dir(P.dim());
    for (int i = 0; i < P.dim(); ++i) dir(i) = rng.gaussian();
    const double nrm = dir.norm();
    if (nrm < 1e-300) continue;
    dir /= nrm;
    // chord extents along dir from x
    double t_lo = -std::numeric_limits<double>::infinity();
    double t_hi = std::numeric_limits<double>::infinity();
    const VectorXd gx = P.normals() * x;
    const VectorXd gd = P.normals() * dir;
    for (int i = 0; i < P.num_rows(); ++i) {
      const double slack = P.offsets()(i) - gx(i);
      if (std::abs(gd(i)) < 1e-14) {
        if (slack < -kFeasTol) t_hi = t_lo - 1.0;  // outside; will skip below
        continue;
      }
      const double t = slack / gd(i);
      if (gd(i) > 0) {
        t_hi = std::min(t_hi, t);
      } else {
        t_lo = std::max(t_lo, t);
      }
    }
    if (!(t_lo <= t_hi)) continue;
    x += dir * rng.uniform(t_lo, t_hi);
  }
  return x;
}

double hausdorff_distance(const HPolytope& P, const HPolytope& Q) {
  if (P.dim() != Q.dim()) throw ContractError("hausdorff_distance: dimension mismatch");
  std::vector<VectorXd> dirs;
  auto add_rows = [&](const HPolytope& S) {
    for (int i = 0; i < S.num_rows(); ++i) {
      const VectorXd n = S.normals().row(i).transpose();
      const double nn = n.norm();
      if (nn > 1e-14) dirs.push_back(n / nn);
    }
  };
  add_rows(P);
  add_rows(Q);
  for (int i = 0; i < P.dim(); ++i) {
    VectorXd e = VectorXd::Zero(P.dim());
    e(i) = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  double d = 0.0;
  for (const auto& c : dirs) d = std::max(d, std::abs(P.support(c) - Q.support(c)));
  return d;
}

// ---------------------------------------------------------------------------
// Invariant set machinery
// ---------------------------------------------------------------------------
InvariantSetCertificate max_output_admissible_set(const MatrixXd& A, const MatrixXd& B,
                                                  const MatrixXd& K, const HPolytope& X,
                                                  const HPolytope& U, const HPolytope& W,
                                                  const InvariantSetOptions& opts,
                                                  const VectorXd& k0_in) {
  const int n = static_cast<int>(A.rows());
  const int q = static_cast<int>(B.cols());
  VectorXd k0 = k0_in.size() == 0 ? VectorXd::Zero(q) : k0_in;
  if (A.cols() != n || B.rows() != n || K.rows() != q || K.cols() != n || k0.size() != q) {
    throw ContractError("max_output_admissible_set: inconsistent matrix dimensions");
  }
  if (!X.is_bounded() || !U.is_bounded() || !W.is_bounded()) {
    throw ContractError("max_output_admissible_set: X, U, W must be bounded");
  }

  const MatrixXd M = A + B * K;
  const double rho = Eigen::EigenSolver<MatrixXd>(M).eigenvalues().cwiseAbs().maxCoeff();
  if (rho >= 1.0 - 1e-12) {
    throw StabilityError("max_output_admissible_set: A+BK spectral radius >= 1");
  }

  struct Row {
    VectorXd g;
    double f;
  };
  std::vector<Row> rows;
  auto is_redundant = [&](const VectorXd& g, double f) {
    MatrixXd G(rows.size(), n);
    VectorXd b(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      G.row(i) = rows[i].g.transpose();
      b(i) = rows[i].f;
    }
    const LpResult lp = solve_lp(g, G, b);
    if (lp.status == LpResult::Status::kInfeasible) return true;  // already empty
    if (lp.status == LpResult::Status::kUnbounded) return false;
    return lp.value <= f + opts.tol;
  };

  // Omega_0 = {x in X : Kx + k0 in U}; zero rows from K = 0 are resolved now.
  std::vector<Row> frontier;
  for (int i = 0; i < X.num_rows(); ++i) {
    Row r{X.normals().row(i).transpose(), X.offsets()(i)};
    rows.push_back(r);
    frontier.push_back(r);
  }
  bool infeasible_input = false;
  for (int i = 0; i < U.num_rows(); ++i) {
    const VectorXd hu = U.normals().row(i).transpose();
    const VectorXd g = K.transpose() * hu;
    const double f = U.offsets()(i) - hu.dot(k0);
    if (g.norm() < 1e-14) {
      if (f < -opts.tol) infeasible_input = true;
      continue;
    }
    Row r{g, f};
    rows.push_back(r);
    frontier.push_back(r);
  }

  InvariantSetCertificate cert;
  cert.gain_K = K;
  cert.offset_k0 = k0;

  if (infeasible_input) {
    // K x + k0 can never satisfy U: the admissible set is empty.
    MatrixXd N = MatrixXd::Zero(2, n);
    N(0, 0) = 1.0;
    N(1, 0) = -1.0;
    VectorXd b(2);
    b << -1.0, -1.0;  // x0 <= -1 and -x0 <= -1
    cert.omega = HPolytope(N, b);
    cert.converged = true;
    return cert;
  }

  const VectorXd Bk0 = B * k0;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    std::vector<Row> fresh;
    for (const auto& r : frontier) {
      const VectorXd g_new = M.transpose() * r.g;
      const double f_new = r.f - r.g.dot(Bk0) - W.support(r.g);
      if (g_new.norm() < 1e-14) {
        if (f_new < -opts.tol) {
          throw ContractError("max_output_admissible_set: iteration emptied the set");
        }
        continue;
      }
      if (!is_redundant(g_new, f_new)) {
        rows.push_back({g_new, f_new});
        fresh.push_back({g_new, f_new});
      }
    }
    if (fresh.empty()) break;
    frontier = std::move(fresh);
  }
  cert.converged = iter < opts.max_iterations;
  cert.iterations = iter;

  MatrixXd G(rows.size(), n);
  VectorXd b(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    G.row(i) = rows[i].g.transpose();
    b(i) = rows[i].f;
  }
  cert.omega = HPolytope(G, b).without_redundant_rows(opts.tol);

  // Exact residuals via support functions.
  double rc = 0.0;
  for (int i = 0; i < cert.omega.num_rows(); ++i) {
    const VectorXd g = cert.omega.normals().row(i).transpose();
    const double lhs = cert.omega.support(M.transpose() * g) + g.dot(Bk0) + W.support(g);
    rc = std::max(rc, lhs - cert.omega.offsets()(i));
  }
  double ri = 0.0;
  for (int i = 0; i < U.num_rows(); ++i) {
    const VectorXd hu = U.normals().row(i).transpose();
    const double lhs = cert.omega.support(K.transpose() * hu) + hu.dot(k0);
    ri = std::max(ri, lhs - U.offsets()(i));
  }
  cert.residual_containment = std::max(0.0, rc);
  cert.residual_input = std::max(0.0, ri);
  return cert;
}

HPolytope safe_input_set(const VectorXd& x, const MatrixXd& A, const MatrixXd& B,
                         const HPolytope& omega, const HPolytope& W, const HPolytope& U) {
  const HPolytope S = pontryagin_diff(omega, W);
  if (S.is_empty()) throw EmptySafeSetError("safe_input_set: Omega ⊖ W is empty");
  const int q = static_cast<int>(B.cols());

  // H_S (A x + B u) <= b_S  becomes  (H_S B) u <= b_S - H_S A x
  std::vector<std::pair<VectorXd, double>> rows;
  const VectorXd ax = A * x;
  for (int i = 0; i < S.num_rows(); ++i) {
    const VectorXd hs = S.normals().row(i).transpose();
    const VectorXd g = B.transpose() * hs;
    const double f = S.offsets()(i) - hs.dot(ax);
    if (g.norm() < 1e-14) {
      if (f < -1e-9) {
        throw EmptySafeSetError("safe_input_set: nominal successor cannot reach Omega ⊖ W");
      }
      continue;
    }
    rows.push_back({g, f});
  }
  MatrixXd G(U.num_rows() + rows.size(), q);
  VectorXd b(U.num_rows() + rows.size());
  G.topRows(U.num_rows()) = U.normals();
  b.head(U.num_rows()) = U.offsets();
  for (size_t i = 0; i < rows.size(); ++i) {
    G.row(U.num_rows() + i) = rows[i].first.transpose();
    b(U.num_rows() + i) = rows[i].second;
  }
  HPolytope result(G, b);
  if (result.is_empty()) throw EmptySafeSetError("safe_input_set: empty safe input set");
  return result;
}

}  // namespace lbmpc
