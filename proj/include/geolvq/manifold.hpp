#pragma once

// Riemannian averaging: Karcher means on the sphere and the Grassmannian,
// the geometric mean of SPD matrices, and the rank-preserving mean and
// geodesic combinations of fixed-rank PSD matrices Lambda = U R^2 U'.

#include "geolvq/imbalance.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace geolvq {

inline constexpr double kRankThreshold = 1e-10;

// ---------------------------------------------------------------------------
// Symmetric matrix functions via the eigendecomposition.

template <class F>
Matrix sym_apply(const Matrix& a, F f) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  const Vector ev = es.eigenvalues().unaryExpr(f);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline Matrix spd_sqrt(const Matrix& a) { return sym_apply(a, [](double x) { return std::sqrt(x); }); }
inline Matrix spd_inv_sqrt(const Matrix& a) {
  return sym_apply(a, [](double x) { return 1.0 / std::sqrt(x); });
}
inline Matrix spd_log(const Matrix& a) { return sym_apply(a, [](double x) { return std::log(x); }); }
inline Matrix sym_exp(const Matrix& a) { return sym_apply(a, [](double x) { return std::exp(x); }); }
inline Matrix spd_pow(const Matrix& a, double t) {
  return sym_apply(a, [t](double x) { return std::pow(x, t); });
}

inline void require_spd(const Matrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() < 1) throw std::invalid_argument(std::string(what) + " is not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument(std::string(what) + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    throw std::invalid_argument(std::string(what) + " is not positive definite");
  }
}

/// Eigenvalues above 1e-10 times the largest count toward the rank.
inline Eigen::Index numerical_rank(const Matrix& psd) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (psd + psd.transpose()), Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0)) return 0;
  return (es.eigenvalues().array() > kRankThreshold * top).count();
}

// ---------------------------------------------------------------------------
// Sphere.

namespace detail {

/// Some z with z'p > 0 for every point, found as the minimum-norm point of
/// the convex hull (Gilbert's algorithm). Empty if the hull holds the origin.
inline std::optional<Vector> hemisphere_center(const std::vector<Vector>& pts) {
  Vector z = Vector::Zero(pts.front().size());
  for (const auto& p : pts) z += p;
  z /= static_cast<double>(pts.size());
  auto certifies = [&](const Vector& c) {
    for (const auto& p : pts) {
      if (!(c.dot(p) > 0.0)) return false;
    }
    return true;
  };
  if (z.norm() > 0.0 && certifies(z)) return z;
  z = pts.front();
  for (int it = 0; it < 100000; ++it) {
    size_t best = 0;
    double low = z.dot(pts[0]);
    for (size_t i = 1; i < pts.size(); ++i) {
      const double v = z.dot(pts[i]);
      if (v < low) {
        low = v;
        best = i;
      }
    }
    if (low > 0.0) return z;
    const Vector d = pts[best] - z;
    const double dd = d.squaredNorm();
    if (dd == 0.0) break;
    const double step = std::clamp(-z.dot(d) / dd, 0.0, 1.0);
    if (step == 0.0) break;
    z += step * d;
    if (z.norm() < 1e-14) break;
  }
  return std::nullopt;
}

}  // namespace detail

struct SphereMean {
  Vector point;
  int iterations = 0;
  double tangent_norm = 0.0;
};

/// Weighted Karcher mean on the unit sphere by the fixed-point iteration
/// m <- Exp_m(sum_i w_i Log_m(p_i)). Zero-weight points are ignored.
inline SphereMean karcher_mean_sphere_detailed(const std::vector<Vector>& points,
                                               const std::vector<double>& weights) {
  if (points.empty() || points.size() != weights.size()) {
    throw std::invalid_argument("points and weights must be nonempty and aligned");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("weights must sum to 1");
  std::vector<Vector> pts;
  std::vector<double> ws;
  for (size_t i = 0; i < points.size(); ++i) {
    detail::require_unit(points[i], "point");
    if (weights[i] > 0.0) {
      pts.push_back(points[i]);
      ws.push_back(weights[i]);
    }
  }
  if (pts.size() == 1) return {pts.front(), 0, 0.0};
  const auto center = detail::hemisphere_center(pts);
  if (!center) throw std::domain_error("points are not contained in an open half-sphere");

  Vector m = Vector::Zero(pts.front().size());
  for (size_t i = 0; i < pts.size(); ++i) m += ws[i] * pts[i];
  if (m.norm() < 1e-12) m = *center;
  m.normalize();
  SphereMean out;
  for (int it = 0; it <= 1000; ++it) {
    Vector t = Vector::Zero(m.size());
    for (size_t i = 0; i < pts.size(); ++i) t += ws[i] * sphere_log_map(m, pts[i]).components;
    out.tangent_norm = t.norm();
    out.iterations = it;
    if (out.tangent_norm < 1e-12) {
      out.point = m;
      return out;
    }
    m = sphere_exp_map(m, t);
  }
  throw std::runtime_error("sphere Karcher mean did not converge in 1000 iterations");
}

inline Vector karcher_mean_sphere(const std::vector<Vector>& points,
                                  const std::vector<double>& weights) {
  return karcher_mean_sphere_detailed(points, weights).point;
}

inline Vector karcher_mean_sphere(const std::vector<Vector>& points) {
  return karcher_mean_sphere(points,
                             std::vector<double>(points.size(), 1.0 / static_cast<double>(points.size())));
}

// ---------------------------------------------------------------------------
// Grassmannian, subspaces represented by D x M orthonormal bases.

inline void require_orthonormal(const Matrix& u) {
  if (u.cols() < 1 || u.cols() > u.rows()) throw std::invalid_argument("basis must be D x M, M <= D");
  const Matrix gram = u.transpose() * u;
  if ((gram - Matrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff() > 1e-6) {
    throw std::invalid_argument("basis columns are not orthonormal");
  }
}

/// Principal angles in ascending order. Cosines come from the SVD of U1'U2,
/// sines from the SVD of the part of U2 outside span(U1); each angle uses the
/// better conditioned of the two.
inline Vector grassmann_principal_angles(const Matrix& u1, const Matrix& u2) {
  require_orthonormal(u1);
  require_orthonormal(u2);
  if (u1.rows() != u2.rows() || u1.cols() != u2.cols()) {
    throw std::invalid_argument("subspaces differ in shape");
  }
  const Matrix c = u1.transpose() * u2;
  Eigen::JacobiSVD<Matrix> cs(c);
  const Vector cosv = cs.singularValues();  // descending
  Eigen::JacobiSVD<Matrix> ss(u2 - u1 * c);
  Vector sinv = ss.singularValues();  // descending
  std::sort(sinv.begin(), sinv.end());
  const auto m = cosv.size();
  Vector out(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double co = std::clamp(cosv(i), 0.0, 1.0);
    const double si = std::clamp(sinv(i), 0.0, 1.0);
    out(i) = co * co >= 0.5 ? std::asin(si) : std::acos(co);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double grassmann_distance(const Matrix& u1, const Matrix& u2) {
  return grassmann_principal_angles(u1, u2).norm();
}

inline Matrix orthonormalize(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  // Fix column signs so that diag(R) > 0, making the basis unique.
  const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Tangent at span(Y) pointing to span(X): U atan(S) V' from the thin SVD of
/// (I - YY') X (Y'X)^{-1}.
inline Matrix grassmann_log(const Matrix& y, const Matrix& x) {
  const Matrix yx = y.transpose() * x;
  Eigen::FullPivLU<Matrix> lu(yx);
  if (!lu.isInvertible()) throw std::domain_error("subspaces are at a right principal angle");
  const Matrix a = (x - y * yx) * lu.inverse();
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = svd.singularValues().unaryExpr([](double v) { return std::atan(v); });
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

inline Matrix grassmann_exp(const Matrix& y, const Matrix& h) {
  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = svd.singularValues();
  const Matrix& v = svd.matrixV();
  const Matrix moved = y * v * s.unaryExpr([](double t) { return std::cos(t); }).asDiagonal() *
                           v.transpose() +
                       svd.matrixU() * s.unaryExpr([](double t) { return std::sin(t); }).asDiagonal() *
                           v.transpose();
  return orthonormalize(moved);
}

struct SubspaceMean {
  Matrix basis;
  int iterations = 0;
  std::vector<std::string> warnings;
};

/// Karcher mean of subspaces, started at the input with the smallest sum of
/// squared distances to the others.
inline SubspaceMean subspace_karcher_mean(const std::vector<Matrix>& subspaces) {
  if (subspaces.empty()) throw std::invalid_argument("no subspaces to average");
  for (const auto& u : subspaces) require_orthonormal(u);
  const size_t k = subspaces.size();
  SubspaceMean out;
  Matrix dist = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  const double radius = std::numbers::pi / (4.0 * std::sqrt(2.0));
  bool wide = false;
  for (size_t i = 0; i < k; ++i) {
    for (size_t j = i + 1; j < k; ++j) {
      const double d = grassmann_distance(subspaces[i], subspaces[j]);
      dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
      dist(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
      wide = wide || d >= radius;
    }
  }
  if (wide) {
    out.warnings.push_back("pairwise Grassmann distance exceeds pi/(4 sqrt 2); the mean may not be unique");
  }
  Eigen::Index start = 0;
  dist.cwiseAbs2().rowwise().sum().minCoeff(&start);
  Matrix v = subspaces[static_cast<size_t>(start)];
  for (int it = 0; it <= 1000; ++it) {
    Matrix t = Matrix::Zero(v.rows(), v.cols());
    for (const auto& u : subspaces) t += grassmann_log(v, u);
    t /= static_cast<double>(k);
    out.iterations = it;
    if (t.norm() < 1e-10) {
      out.basis = v;
      return out;
    }
    v = grassmann_exp(v, t);
  }
  throw std::runtime_error("subspace Karcher mean did not converge in 1000 iterations");
}

// ---------------------------------------------------------------------------
// SPD and fixed-rank PSD matrices.

/// A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}; t = 1/2 is the geometric mean.
inline Matrix spd_geodesic(const Matrix& a, const Matrix& b, double t) {
  const Matrix ah = spd_sqrt(a);
  const Matrix aih = spd_inv_sqrt(a);
  const Matrix mid = spd_pow(aih * b * aih, t);
  const Matrix out = ah * mid * ah;
  return 0.5 * (out + out.transpose());
}

/// Closed form for two matrices; for more, the Karcher mean under the
/// affine-invariant metric, started from the log-Euclidean mean. The unit
/// fixed-point step oscillates for widely spread inputs, so the step is
/// halved until the sum of squared distances or the gradient norm decreases.
inline Matrix spd_geometric_mean(const std::vector<Matrix>& mats) {
  if (mats.empty()) throw std::invalid_argument("no matrices to average");
  for (const auto& a : mats) require_spd(a, "input");
  if (mats.size() == 1) return mats.front();
  if (mats.size() == 2) return spd_geodesic(mats[0], mats[1], 0.5);
  const double k = static_cast<double>(mats.size());
  Matrix x = Matrix::Zero(mats.front().rows(), mats.front().cols());
  for (const auto& a : mats) x += spd_log(a);
  x = sym_exp(x / k);

  // Returns the mean tangent direction at x and the cost sum_i |log(x^-1/2 A_i x^-1/2)|^2.
  auto tangent = [&](const Matrix& at, Matrix& s) {
    const Matrix ih = spd_inv_sqrt(at);
    s.setZero(at.rows(), at.cols());
    double cost = 0.0;
    for (const auto& a : mats) {
      const Matrix l = spd_log(ih * a * ih);
      s += l;
      cost += l.squaredNorm();
    }
    s /= k;
    return cost;
  };
  Matrix s;
  double cost = tangent(x, s);
  double step = 1.0;
  for (int it = 0; it < 1000; ++it) {
    if (s.norm() < 1e-10) return x;
    const Matrix xh = spd_sqrt(x);
    bool moved = false;
    // Near the minimizer the cost is flat to rounding, so a smaller gradient also counts as progress.
    while (step > 1e-12) {
      Matrix y = xh * sym_exp(step * s) * xh;
      y = 0.5 * (y + y.transpose());
      Matrix sy;
      const double cy = tangent(y, sy);
      if (cy < cost || sy.norm() < s.norm()) {
        x = std::move(y);
        s = std::move(sy);
        cost = cy;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      if (s.norm() < 1e-8) return x;  // rounding floor of an ill-conditioned set
      break;
    }
    step = std::min(1.0, 2.0 * step);
  }
  throw std::runtime_error("SPD Karcher mean did not converge in 1000 iterations");
}

/// Lambda = U R2 U' with U orthonormal (D x M) and R2 SPD (M x M).
struct PsdFactorization {
  Matrix u;
  Matrix r2;

  Matrix reconstruct() const { return u * r2 * u.transpose(); }
};

/// Top-rank eigenpairs of a PSD matrix. With rank 0 the numerical rank is used.
inline PsdFactorization factorize_psd(const Matrix& psd, Eigen::Index rank = 0) {
  if (psd.rows() != psd.cols()) throw std::invalid_argument("matrix is not square");
  const auto numeric = numerical_rank(psd);
  if (rank == 0) rank = numeric;
  if (rank < 1) throw std::invalid_argument("matrix has rank 0");
  if (numeric < rank) {
    throw std::invalid_argument("rank mismatch: matrix has numerical rank " + std::to_string(numeric) +
                                ", expected " + std::to_string(rank));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (psd + psd.transpose()));
  Matrix u = es.eigenvectors().rightCols(rank);
  PsdFactorization f{u, u.transpose() * psd * u};
  f.r2 = 0.5 * (f.r2 + f.r2.transpose());
  return f;
}

struct PsdMean {
  Matrix mean;
  Matrix basis;
  std::vector<std::string> warnings;
};

/// Rank-preserving geometric mean of PSD matrices of equal rank M: average
/// the ranges on the Grassmannian, rotate each M x M factor into the mean
/// basis, and take the SPD geometric mean there.
inline PsdMean psd_mean_detailed(const std::vector<Matrix>& tensors, Eigen::Index rank = 0) {
  if (tensors.empty()) throw std::invalid_argument("no tensors to average");
  const auto d = tensors.front().rows();
  if (rank == 0) rank = numerical_rank(tensors.front());
  std::vector<PsdFactorization> fac;
  std::vector<Matrix> bases;
  for (const auto& t : tensors) {
    if (t.rows() != d || t.cols() != d) throw std::invalid_argument("tensors differ in dimension");
    const auto r = numerical_rank(t);
    if (r != rank) {
      throw std::invalid_argument("rank mismatch: got " + std::to_string(r) + ", expected " +
                                  std::to_string(rank));
    }
    fac.push_back(factorize_psd(t, rank));
    bases.push_back(fac.back().u);
  }
  auto sub = subspace_karcher_mean(bases);
  const Matrix& v = sub.basis;
  std::vector<Matrix> t2;
  for (size_t i = 0; i < tensors.size(); ++i) {
    Eigen::JacobiSVD<Matrix> svd(fac[i].u.transpose() * v, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix y = fac[i].u * svd.matrixU();
    const Matrix psi2 = y.transpose() * tensors[i] * y;
    Matrix ti = svd.matrixV() * psi2 * svd.matrixV().transpose();
    ti = 0.5 * (ti + ti.transpose());
    try {
      require_spd(ti, "rotated factor");
    } catch (const std::invalid_argument&) {
      throw std::domain_error("rotated factor of tensor " + std::to_string(i) + " is singular");
    }
    t2.push_back(ti);
  }
  const Matrix a = spd_geometric_mean(t2);
  Matrix out = v * a * v.transpose();
  return {0.5 * (out + out.transpose()), v, std::move(sub.warnings)};
}

inline Matrix psd_mean(const std::vector<Matrix>& tensors, Eigen::Index rank = 0) {
  return psd_mean_detailed(tensors, rank).mean;
}

/// Point at t on the geodesic from L1 (t = 0) to L2 (t = 1) through the
/// fixed-rank PSD cone: ranges move along the Grassmann geodesic between
/// principal vectors, factors along the SPD geodesic.
inline Matrix psd_convex_combination(const Matrix& l1, const Matrix& l2, double t,
                                     Eigen::Index rank = 0) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("t must lie in [0, 1]");
  if (rank == 0) rank = numerical_rank(l1);
  if (numerical_rank(l1) != rank || numerical_rank(l2) != rank) {
    throw std::invalid_argument("rank mismatch between the two tensors");
  }
  const auto f1 = factorize_psd(l1, rank);
  const auto f2 = factorize_psd(l2, rank);
  Eigen::JacobiSVD<Matrix> svd(f1.u.transpose() * f2.u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix y1 = f1.u * svd.matrixU();
  const Matrix y2 = f2.u * svd.matrixV();
  const Vector cosv = svd.singularValues().cwiseMin(1.0);
  const Matrix resid = y2 - y1 * cosv.asDiagonal();
  Matrix x = Matrix::Zero(y1.rows(), rank);
  Vector angle(rank);
  for (Eigen::Index j = 0; j < rank; ++j) {
    const double s = resid.col(j).norm();
    angle(j) = std::atan2(s, cosv(j));
    if (angle(j) >= 1e-8) x.col(j) = resid.col(j) / s;
  }
  Matrix yt(y1.rows(), rank);
  for (Eigen::Index j = 0; j < rank; ++j) {
    yt.col(j) = std::cos(angle(j) * t) * y1.col(j) + std::sin(angle(j) * t) * x.col(j);
  }
  const Matrix psi1 = y1.transpose() * l1 * y1;
  const Matrix psi2 = y2.transpose() * l2 * y2;
  const Matrix psit = spd_geodesic(0.5 * (psi1 + psi1.transpose()), 0.5 * (psi2 + psi2.transpose()), t);
  const Matrix out = yt * psit * yt.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace geolvq
