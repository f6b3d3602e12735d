#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "rp2ends/types.hpp"

namespace rp2ends {

// A point of RP^2 stored as a unit vector whose first non-negligible
// coordinate is positive.
class ProjPoint {
 public:
  ProjPoint() : coords_(1.0, 0.0, 0.0) {}

  const Vec3& coords() const { return coords_; }
  double operator[](int i) const { return coords_[i]; }

 private:
  explicit ProjPoint(const Vec3& unit) : coords_(unit) {}
  friend ProjPoint project(const Vec3& v);

  Vec3 coords_;
};

ProjPoint project(const Vec3& v);

// Distance between the two unit representatives, minimised over sign.
double chart_distance(const ProjPoint& a, const ProjPoint& b);

inline constexpr double kDefaultDetTol = 1e-9;

// Cofactor expansion in binary128, where products of doubles are exact;
// ill-conditioned holonomies lose too much to cancellation in a double LU.
double determinant_extended(const Mat3& m);

// First-order bound on how far det can move when every entry is rounded to
// double: 1/2 eps sum |m_ij| |cofactor_ij|. UnimodularMatrix accepts
// |det - 1| <= tol + floor, which only matters for ill-conditioned input.
double determinant_rounding_floor(const Mat3& m);

class UnimodularMatrix {
 public:
  explicit UnimodularMatrix(const Mat3& m, double tol_det = kDefaultDetTol);

  const Mat3& matrix() const { return m_; }

 private:
  Mat3 m_;
};

enum class HolonomyKind { Hyperbolic, QuasiHyperbolic, Parabolic };

std::string_view kind_name(HolonomyKind k);

struct HolonomyClass {
  HolonomyKind kind = HolonomyKind::Parabolic;
  Triple eigenvalues{1.0, 1.0, 1.0};  // descending
};

struct TwistParams {
  double sigma = 0.0;
  double tau = 0.0;
};

UnimodularMatrix twist_matrix(const TwistParams& p);

inline constexpr double kDefaultMultiplicityTol = 1e-7;

HolonomyClass classify_matrix(const UnimodularMatrix& m, double tol = kDefaultMultiplicityTol);

enum class Stability { Attracting, Saddle, Repelling, Parabolic };

std::string_view stability_name(Stability s);

struct FixedPoint {
  ProjPoint point;
  Stability stability = Stability::Parabolic;
  double eigenvalue = 1.0;
};

// Fixed points of the column action v -> M v.
std::vector<FixedPoint> fixed_points(const UnimodularMatrix& m,
                                     double tol = kDefaultMultiplicityTol);

enum class TriangleEdge { PlusZero, ZeroMinus, PlusMinus };

std::string_view edge_name(TriangleEdge e);

struct PrincipalTriangle {
  std::array<ProjPoint, 3> vertices;  // Fix+, Fix0, Fix-
  Mat3 basis;                         // columns: signed vertex representatives

  Vec3 coordinates(const Vec3& p) const;
  bool contains(const ProjPoint& p, double tol = 0.0) const;

  // Chart distance from p to the projective line through the edge's vertices.
  double distance_to_edge_line(const ProjPoint& p, TriangleEdge e) const;
  // Smallest chart distance from p to either endpoint of the edge.
  double distance_to_edge_ends(const ProjPoint& p, TriangleEdge e) const;
};

// Vertices are oriented so that `hint` (when given) has non-negative
// eigenbasis coordinates.
PrincipalTriangle principal_triangle(const UnimodularMatrix& m,
                                     const std::optional<Vec3>& hint = std::nullopt,
                                     double tol = kDefaultMultiplicityTol);

}  // namespace rp2ends
