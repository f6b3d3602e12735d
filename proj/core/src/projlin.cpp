#include "rp2ends/projlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "rp2ends/error.hpp"

namespace rp2ends {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Cluster {
  double value = 0.0;
  int size = 0;
};

// Smallest right singular vector of (M - alpha I) and the nullity at the
// given threshold.
struct NullInfo {
  Vec3 vector;
  int nullity = 0;
};

NullInfo null_info(const Mat3& m, double alpha, double threshold) {
  Eigen::JacobiSVD<Mat3> svd(m - alpha * Mat3::Identity(), Eigen::ComputeFullV);
  const Vec3& sv = svd.singularValues();
  NullInfo out;
  out.vector = svd.matrixV().col(2);
  for (int i = 0; i < 3; ++i) {
    if (sv[i] <= threshold) ++out.nullity;
  }
  return out;
}

struct Analysis {
  std::vector<Cluster> clusters;  // descending by value
  HolonomyKind kind = HolonomyKind::Hyperbolic;
};

Analysis analyse(const Mat3& m, double tol) {
  Eigen::EigenSolver<Mat3> es(m, true);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericallyAmbiguous, "eigensolver failed");
  }
  const Vec3c lam = es.eigenvalues();
  const Mat3c v = es.eigenvectors();
  const double norm = m.norm();

  // First-order eigenvalue sensitivity: |dlambda| <= cond_i * |dM|.
  std::array<double, 3> noise{};
  Eigen::FullPivLU<Mat3c> lu(v);
  const bool v_ok = lu.isInvertible() && v.allFinite();
  Mat3c w = Mat3c::Zero();
  if (v_ok) w = lu.inverse();
  for (int i = 0; i < 3; ++i) {
    double cond = std::numeric_limits<double>::infinity();
    if (v_ok && w.allFinite()) cond = w.row(i).norm() * v.col(i).norm();
    noise[i] = 64.0 * kEps * norm * cond;
    // A defective eigenvalue moves by at most the cube root of the perturbation.
    const double jordan_cap = 4.0 * std::cbrt(64.0 * kEps * norm * norm * norm);
    if (!std::isfinite(noise[i]) || noise[i] > jordan_cap) noise[i] = jordan_cap;
  }

  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return lam[a].real() > lam[b].real(); });

  for (int i = 0; i < 3; ++i) {
    const cplx l = lam[i];
    if (std::abs(l.imag()) > std::max(noise[i], tol * std::abs(l))) {
      std::ostringstream os;
      os << "complex eigenvalue " << l.real() << (l.imag() < 0 ? "" : "+") << l.imag() << "i";
      throw Error(ErrorCode::NonPositiveSpectrum, os.str());
    }
    if (l.real() <= 0.0) {
      std::ostringstream os;
      os << "non-positive eigenvalue " << l.real();
      throw Error(ErrorCode::NonPositiveSpectrum, os.str());
    }
  }

  Analysis out;
  double sum = lam[order[0]].real();
  int count = 1;
  for (int r = 1; r < 3; ++r) {
    const int a = order[r - 1];
    const int b = order[r];
    const double gap = std::abs(lam[a] - lam[b]);
    const double scale = std::max(std::abs(lam[a]), std::abs(lam[b]));
    const double rel = gap / scale;
    const bool merged = rel < tol || gap <= noise[a] + noise[b];
    if (!merged && rel <= 10.0 * tol) {
      std::ostringstream os;
      os << "relative eigenvalue gap " << rel << " lies in [tol, 10 tol] with tol = " << tol;
      throw Error(ErrorCode::NumericallyAmbiguous, os.str());
    }
    if (merged) {
      sum += lam[b].real();
      ++count;
    } else {
      out.clusters.push_back({sum / count, count});
      sum = lam[b].real();
      count = 1;
    }
  }
  out.clusters.push_back({sum / count, count});

  const double threshold = tol * m.operatorNorm();
  if (out.clusters.size() == 3) {
    out.kind = HolonomyKind::Hyperbolic;
  } else if (out.clusters.size() == 2) {
    for (const Cluster& c : out.clusters) {
      if (c.size == 2 && null_info(m, c.value, threshold).nullity != 1) {
        throw Error(ErrorCode::UnsupportedHolonomy,
                    "repeated eigenvalue with a diagonalizable block");
      }
    }
    out.kind = HolonomyKind::QuasiHyperbolic;
  } else {
    if (std::abs(out.clusters[0].value - 1.0) > 10.0 * tol) {
      throw Error(ErrorCode::NotUnimodular, "triple eigenvalue differs from 1");
    }
    if (null_info(m, out.clusters[0].value, threshold).nullity != 1) {
      throw Error(ErrorCode::UnsupportedHolonomy, "triple eigenvalue without a full Jordan block");
    }
    out.kind = HolonomyKind::Parabolic;
    out.clusters[0].value = 1.0;
  }
  return out;
}

std::array<int, 2> edge_indices(TriangleEdge e) {
  switch (e) {
    case TriangleEdge::PlusZero: return {0, 1};
    case TriangleEdge::ZeroMinus: return {1, 2};
    case TriangleEdge::PlusMinus: return {0, 2};
  }
  return {0, 1};
}

}  // namespace

ProjPoint project(const Vec3& v) {
  const double n = v.norm();
  if (!(n >= 1e-300) || !std::isfinite(n)) {
    throw Error(ErrorCode::ZeroVector, "cannot project a zero or non-finite vector");
  }
  Vec3 u = v / n;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(u[i]) > 1e-14) {
      if (u[i] < 0) u = -u;
      break;
    }
  }
  return ProjPoint(u);
}

double chart_distance(const ProjPoint& a, const ProjPoint& b) {
  return std::min((a.coords() - b.coords()).norm(), (a.coords() + b.coords()).norm());
}

double determinant_extended(const Mat3& m) {
  using L = __float128;
  auto e = [&](int i, int j) { return static_cast<L>(m(i, j)); };
  const L d = e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) -
              e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0)) +
              e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
  return static_cast<double>(d);
}

double determinant_rounding_floor(const Mat3& m) {
  const Mat3 a = m.cwiseAbs();
  double floor = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int r0 = (i + 1) % 3;
      const int r1 = (i + 2) % 3;
      const int c0 = (j + 1) % 3;
      const int c1 = (j + 2) % 3;
      const double cof = a(r0, c0) * a(r1, c1) + a(r0, c1) * a(r1, c0);
      floor += cof * a(i, j);
    }
  }
  return 0.5 * kEps * floor;
}

UnimodularMatrix::UnimodularMatrix(const Mat3& m, double tol_det) : m_(m) {
  const double d = determinant_extended(m);
  const double floor = determinant_rounding_floor(m);
  if (!m.allFinite() || !(std::abs(d - 1.0) <= tol_det + floor)) {
    std::ostringstream os;
    os << "det = " << d << " (tolerance " << tol_det << " + rounding floor " << floor << ")";
    throw Error(ErrorCode::NotUnimodular, os.str());
  }
}

std::string_view kind_name(HolonomyKind k) {
  switch (k) {
    case HolonomyKind::Hyperbolic: return "Hyperbolic";
    case HolonomyKind::QuasiHyperbolic: return "QuasiHyperbolic";
    case HolonomyKind::Parabolic: return "Parabolic";
  }
  return "?";
}

std::string_view stability_name(Stability s) {
  switch (s) {
    case Stability::Attracting: return "attracting";
    case Stability::Saddle: return "saddle";
    case Stability::Repelling: return "repelling";
    case Stability::Parabolic: return "parabolic";
  }
  return "?";
}

std::string_view edge_name(TriangleEdge e) {
  switch (e) {
    case TriangleEdge::PlusZero: return "G+0";
    case TriangleEdge::ZeroMinus: return "G0-";
    case TriangleEdge::PlusMinus: return "G+-";
  }
  return "?";
}

UnimodularMatrix twist_matrix(const TwistParams& p) {
  Mat3 d = Mat3::Zero();
  d(0, 0) = std::exp(-p.sigma - p.tau);
  d(1, 1) = std::exp(2.0 * p.tau);
  d(2, 2) = std::exp(p.sigma - p.tau);
  return UnimodularMatrix(d, 1e-12 * (1.0 + d.norm()));
}

HolonomyClass classify_matrix(const UnimodularMatrix& um, double tol) {
  const Analysis a = analyse(um.matrix(), tol);
  HolonomyClass out;
  out.kind = a.kind;
  int k = 0;
  for (const Cluster& c : a.clusters) {
    for (int j = 0; j < c.size; ++j) out.eigenvalues[k++] = c.value;
  }
  return out;
}

std::vector<FixedPoint> fixed_points(const UnimodularMatrix& um, double tol) {
  const Mat3& m = um.matrix();
  const Analysis a = analyse(m, tol);
  const double threshold = tol * m.operatorNorm();
  std::vector<FixedPoint> out;
  if (a.kind == HolonomyKind::Parabolic) {
    out.push_back({project(null_info(m, 1.0, threshold).vector), Stability::Parabolic, 1.0});
    return out;
  }
  const std::size_t n = a.clusters.size();
  for (std::size_t i = 0; i < n; ++i) {
    Stability s = Stability::Saddle;
    if (i == 0) s = Stability::Attracting;
    if (i + 1 == n) s = Stability::Repelling;
    const double alpha = a.clusters[i].value;
    out.push_back({project(null_info(m, alpha, threshold).vector), s, alpha});
  }
  return out;
}

Vec3 PrincipalTriangle::coordinates(const Vec3& p) const {
  return basis.fullPivLu().solve(p);
}

bool PrincipalTriangle::contains(const ProjPoint& p, double tol) const {
  Vec3 c = coordinates(p.coords());
  c /= c.norm();
  return (c.array() >= -tol).all() || (c.array() <= tol).all();
}

double PrincipalTriangle::distance_to_edge_line(const ProjPoint& p, TriangleEdge e) const {
  const auto [i, j] = edge_indices(e);
  const Vec3 c = coordinates(p.coords());
  const Vec3 q = c[i] * basis.col(i) + c[j] * basis.col(j);
  if (q.norm() < 1e-300) return std::sqrt(2.0);
  return chart_distance(p, project(q));
}

double PrincipalTriangle::distance_to_edge_ends(const ProjPoint& p, TriangleEdge e) const {
  const auto [i, j] = edge_indices(e);
  return std::min(chart_distance(p, vertices[i]), chart_distance(p, vertices[j]));
}

PrincipalTriangle principal_triangle(const UnimodularMatrix& um, const std::optional<Vec3>& hint,
                                     double tol) {
  const HolonomyClass cls = classify_matrix(um, tol);
  if (cls.kind != HolonomyKind::Hyperbolic) {
    throw Error(ErrorCode::NotHyperbolic, std::string("holonomy is ") +
                                              std::string(kind_name(cls.kind)));
  }
  const std::vector<FixedPoint> fp = fixed_points(um, tol);
  PrincipalTriangle t;
  for (int i = 0; i < 3; ++i) t.basis.col(i) = fp[i].point.coords();
  if (hint) {
    const Vec3 c = t.coordinates(*hint);
    for (int i = 0; i < 3; ++i) {
      if (c[i] < 0) t.basis.col(i) = -t.basis.col(i);
    }
  }
  for (int i = 0; i < 3; ++i) t.vertices[i] = project(t.basis.col(i));
  return t;
}

}  // namespace rp2ends
