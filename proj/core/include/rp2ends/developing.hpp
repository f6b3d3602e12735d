#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rp2ends/projlin.hpp"
#include "rp2ends/residue_spectrum.hpp"
#include "rp2ends/types.hpp"
#include "rp2ends/wang_solver.hpp"

namespace rp2ends {

// Rows (f, f_w, f_wbar) of the complexified frame.
struct AffineFrame {
  Mat3c rows = Mat3c::Identity();
  double psi_at = 0.0;
};

struct FrameDrift {
  double reality = 0.0;    // |Im f| / scale
  double conjugacy = 0.0;  // |f_wbar - conj f_w| / scale
  double volume = 0.0;     // |det / (i e^psi / 2) - 1|
};

FrameDrift frame_drift(const AffineFrame& frame);

// Coefficient matrices of d/dx X = Ax X and d/dy X = Ay X.
struct FrameCoefficients {
  Mat3c ax;
  Mat3c ay;
  double psi = 0.0;
};

FrameCoefficients frame_coefficients(double psi, cplx psi_w, cplx u);

class TransportField {
 public:
  virtual ~TransportField() = default;
  virtual FrameCoefficients at(double x, double y) const = 0;
  virtual bool contains(double x, double y) const = 0;
  // Height of the default base point for rays and loops.
  virtual double base_y() const { return 0.0; }
  virtual std::string describe() const = 0;
};

// psi, psi_w and U constant on the whole plane.
class ConstantField : public TransportField {
 public:
  ConstantField(double psi, cplx u, double base_y = 0.0);

  // Flat end with a pure pole of residue R in the cylinder chart.
  static ConstantField model_end(cplx residue, double base_y = 0.0);
  // psi = log 2, U = 2: the triangle model in the nu coordinate.
  static ConstantField triangle_model();

  FrameCoefficients at(double x, double y) const override;
  bool contains(double, double) const override { return true; }
  double base_y() const override { return base_y_; }
  std::string describe() const override;

 private:
  double psi_;
  cplx u_;
  double base_y_;
};

// Arbitrary constant coefficient matrices (e.g. limits with e^psi -> 0).
class MatrixField : public TransportField {
 public:
  MatrixField(Mat3c ax, Mat3c ay);
  FrameCoefficients at(double, double) const override;
  bool contains(double, double) const override { return true; }
  std::string describe() const override { return "constant-matrix field"; }

 private:
  FrameCoefficients c_;
};

class PeriodicBicubic;

// Solved cylinder: phi and U from the background when it is attached
// (interpolated from the grid otherwise), bicubic u.
class GridField : public TransportField {
 public:
  // With extend_above, u is taken as 0 above the grid (zero Dirichlet top).
  explicit GridField(CylinderGrid grid, bool extend_above = false);

  FrameCoefficients at(double x, double y) const override;
  bool contains(double x, double y) const override;
  double base_y() const override { return grid_.y0(); }
  std::string describe() const override;

  struct Sample {
    double u = 0.0;
    double ux = 0.0;
    double uy = 0.0;
  };
  Sample interpolate(double x, double y) const;
  const CylinderGrid& grid() const { return grid_; }

 private:
  CylinderGrid grid_;
  bool extend_above_;
  std::shared_ptr<const PeriodicBicubic> u_;
  std::shared_ptr<const PeriodicBicubic> phi_;
  std::shared_ptr<const PeriodicBicubic> u_re_;
  std::shared_ptr<const PeriodicBicubic> u_im_;
};

// inner below y_cut, outer above.
class CutoffField : public TransportField {
 public:
  CutoffField(std::shared_ptr<const TransportField> inner, std::shared_ptr<const TransportField> outer,
              double y_cut);
  FrameCoefficients at(double x, double y) const override;
  bool contains(double x, double y) const override;
  double base_y() const override { return inner_->base_y(); }
  std::string describe() const override;
  double y_cut() const { return y_cut_; }

 private:
  std::shared_ptr<const TransportField> inner_;
  std::shared_ptr<const TransportField> outer_;
  double y_cut_;
};

// Model frame (1/sqrt3)[[1,1,1],[1,w^2,w],[1,w,w^2]] with rows 2, 3 scaled by
// sqrt(e^psi0 / 2) * phase and its conjugate.
AffineFrame initial_frame(double psi0, cplx phase = cplx(1.0, 0.0));

AffineFrame triangle_model_frame(double sigma, double tau);

using Path = std::vector<std::pair<double, double>>;

inline constexpr double kMaxStep = 0.01;

struct TransportResult {
  AffineFrame frame;
  std::vector<AffineFrame> trajectory;  // every RK4 node when requested
  FrameDrift max_drift;
};

TransportResult transport(const AffineFrame& frame, const TransportField& field, const Path& path,
                          double step, bool keep_trajectory = false);

double volume_drift(const std::vector<AffineFrame>& trajectory);

struct HolonomyLoop {
  Mat3 h;             // real frame {f, f_x, f_y}
  Mat3 h_inverse;
  double raw_det = 1.0;  // det of the long double solution before rounding
  Triple eigenvalues{};  // descending
};

inline constexpr double kDefaultLoopStep = 1e-3;

HolonomyLoop holonomy_loop_report(const TransportField& field, double y, double step = kDefaultLoopStep);
UnimodularMatrix holonomy_loop(const TransportField& field, double y, double step = kDefaultLoopStep);

// Holonomy based at (0, y) along (0,y) -> (0,y_top) -> (2pi,y_top) -> (2pi,y).
HolonomyLoop holonomy_rectangle(const TransportField& field, double y, double y_top,
                                double step = kDefaultLoopStep);

Mat3c limit_matrix(cplx residue);
// Cylinder-chart limit matrix of the model end (conjugate of limit_matrix).
Mat3c model_end_matrix(cplx residue);

// Column action on developing coordinates induced by a real-frame holonomy
// h at a base frame: f(x + 2pi) = f(x) G, returned as G^T.
Mat3 developing_action(const Mat3& h_real, const AffineFrame& base);

struct DevelopedCurve {
  std::vector<std::pair<double, ProjPoint>> samples;
  std::optional<ProjPoint> limit;
};

struct RayOptions {
  double step = 1e-3;
  double sample_spacing = 0.25;
  int window = 10;
  double cauchy_tol = 1e-6;
  double max_length = 200.0;
};

// Ray from (x0, y0) with direction angle theta, frame given at the start.
DevelopedCurve develop_ray_from(const TransportField& field, const AffineFrame& frame0, double x0,
                                double y0, double theta, double y_max, const RayOptions& opts = {});

// Ray from the field's base point (0, base_y) at angle iota in (0, pi),
// starting from initial_frame(psi(base), phase).
DevelopedCurve develop_ray(const TransportField& field, double iota, double y_max = 40.0,
                           double step = 1e-3, cplx phase = cplx(1.0, 0.0));

// Limit points of rays from the origin of the triangle model, listed
// counter-clockwise from theta = 0; vertices are the coordinate axes.
enum class LimitRow { V1, SegmentV1V2, V2, SegmentV2V3, V3, SegmentV3V1 };

std::string_view limit_row_name(LimitRow r);
// Multiples of pi/3 within tol select the segment rows.
LimitRow predicted_limit_row(double theta, double tol = 1e-12);
// Vertex rows need chart distance <= tol; segment rows need the third
// coordinate below tol and the other two of one sign.
std::optional<LimitRow> match_limit_row(const ProjPoint& p, double tol = 1e-6);
DevelopedCurve develop_model_ray(double theta, double step = 1e-3);

struct TwistWitness {
  double iota = 0.0;
  ProjPoint limit;
  TriangleEdge edge = TriangleEdge::PlusMinus;
  double distance_to_edge = 0.0;
  double distance_to_vertices = 0.0;
  Vec3 triangle_coordinates = Vec3::Zero();
};

struct TwistEvidence {
  TwistSign sign = TwistSign::Undefined;
  Mat3 action = Mat3::Identity();
  PrincipalTriangle triangle;
  std::vector<TwistWitness> witnesses;
  AffineFrame base_frame;
};

inline constexpr double kWitnessTol = 1e-4;

struct TwistOptions {
  double y_max = 40.0;
  double step = 1e-3;
  double witness_tol = kWitnessTol;
  // Loop height when the connection is not flat across a cut; the loop is
  // then conjugated back to the base point.
  std::optional<double> loop_y;
};

TwistEvidence detect_twist(const TransportField& field, cplx residue, const TwistOptions& opts = {});

void write_curve_csv(std::ostream& os, const DevelopedCurve& curve);
// Affine chart x1 = 1 with the triangle overlaid; returns the clipped count.
int write_curve_svg(std::ostream& os, const DevelopedCurve& curve,
                    const std::optional<PrincipalTriangle>& triangle);

}  // namespace rp2ends
