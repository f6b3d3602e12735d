#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rp2ends/model_geometry.hpp"
#include "rp2ends/types.hpp"

namespace rp2ends {

enum class CollarType { QuasiHyperbolic, Parabolic };

// Closed-form data on a cylinder chart: a rotationally symmetric log
// conformal factor phi(y) with y-derivatives, and the coefficient U(x, y)
// of dw^3.
struct CylinderBackground {
  std::function<double(double)> phi;
  std::function<double(double)> phi_y;
  std::function<double(double)> phi_yy;
  std::function<cplx(double, double)> U;
  CollarType type = CollarType::QuasiHyperbolic;
  std::string label;

  double kappa(double y) const;
};

std::shared_ptr<const CylinderBackground> end_background(const CubicLaurent& u,
                                                         const ConformalMetric& metric);
// Flat metric with a pure pole of residue R: the triangle-model collar.
std::shared_ptr<const CylinderBackground> flat_collar_background(cplx residue);
std::shared_ptr<const CylinderBackground> cusp_background();

class CylinderGrid {
 public:
  CylinderGrid() = default;
  CylinderGrid(int nx, int ny, double y0, double y1);

  static CylinderGrid sample(std::shared_ptr<const CylinderBackground> bg, int nx, int ny,
                             double y0, double y1);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double y0() const { return y0_; }
  double y1() const { return y1_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double x(int i) const { return hx_ * i; }
  double y(int j) const { return y0_ + hy_ * j; }
  int index(int i, int j) const { return j * nx_ + wrap(i); }
  int wrap(int i) const { return ((i % nx_) + nx_) % nx_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }

  std::vector<double> phi;
  std::vector<double> u;
  std::vector<cplx> U;
  std::vector<double> kappa;

  const std::shared_ptr<const CylinderBackground>& background() const { return background_; }
  void set_background(std::shared_ptr<const CylinderBackground> bg) { background_ = std::move(bg); }

  void validate() const;

 private:
  int nx_ = 0;
  int ny_ = 0;
  double y0_ = 0.0;
  double y1_ = 0.0;
  double hx_ = 0.0;
  double hy_ = 0.0;
  std::shared_ptr<const CylinderBackground> background_;
};

// Interior nodes use the 5-point stencil; boundary rows a one-sided
// second-order y-derivative.
std::vector<double> wang_residual(const CylinderGrid& grid);
std::vector<double> wang_residual(const CylinderGrid& grid, const std::vector<double>& u);

struct BarrierPair {
  std::vector<double> S;
  std::vector<double> s;
  double alpha = 0.0;
  double beta = 0.0;
  int doublings = 0;
};

inline constexpr double kDefaultBarrierTol = 1e-12;

// Nodewise L(S) <= tol and L(s) >= -tol on interior nodes, S >= 0 >= s.
bool barrier_pair_valid(const CylinderGrid& grid, const BarrierPair& b,
                        double tol_b = kDefaultBarrierTol);

// QH collars: S = beta e^{-2 alpha y}; parabolic collars: constants (M, -M)
// from the cubic inequality 4||U||^2 - 2E^3 - 2 kappa E^2 <= 0.
BarrierPair build_barriers(const CylinderGrid& grid, double alpha, double beta_init,
                           double tol_b = kDefaultBarrierTol);

// beta-doubling search over an arbitrary positive profile S = beta * shape.
BarrierPair tune_barriers(const CylinderGrid& grid, const std::vector<double>& shape,
                          double alpha, double beta_init, double tol_b = kDefaultBarrierTol);

// Smallest E >= 1 with 4 n2 - 2E^3 - 2 kappa E^2 <= 0 for every node.
double parabolic_barrier_level(const CylinderGrid& grid);

enum class BoundaryCondition { DirichletZero, DirichletField };

struct SolveOptions {
  int max_newton = 60;
  int max_halvings = 30;
  const BarrierPair* barriers = nullptr;
  const std::vector<double>* initial = nullptr;
  double bracket_slack = 1e-12;
  bool throw_on_bracket_violation = true;
};

struct SolveReport {
  std::vector<double> u;
  double residual_inf = 0.0;
  int newton_iters = 0;
  bool bracketed = false;
};

// Damped Newton for L(u) = 0 on interior nodes; writes the solution into grid.u.
SolveReport solve_wang(CylinderGrid& grid, BoundaryCondition bc, double tol,
                       const SolveOptions& opts = {});

// Three-piece neck profile in mu = Re ell.
struct NeckBarrier {
  double t_abs = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  double q() const;
  double value(double mu) const;
  double second_derivative(double mu) const;
};

NeckBarrier neck_barrier(cplx t, double alpha, double beta, double c = kDefaultCollar);

struct GradientReport {
  double max_weighted = 0.0;   // max e^{-phi/2} |grad u| e^{2 alpha y}
  double max_gradient = 0.0;   // max e^{-phi/2} |grad u|
  double decay_exponent = 0.0; // fitted on the middle half of the cylinder
};

GradientReport gradient_bound_check(const SolveReport& report, const CylinderGrid& grid,
                                    double alpha);

// CSV with header x,y,phi,u,U_re,U_im,kappa; one row per node, x fastest.
void write_grid_csv(std::ostream& os, const CylinderGrid& grid);
CylinderGrid read_grid_csv(std::istream& is);

}  // namespace rp2ends
