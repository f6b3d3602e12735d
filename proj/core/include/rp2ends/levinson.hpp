#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rp2ends/developing.hpp"
#include "rp2ends/types.hpp"

namespace rp2ends {

using VecXc = Eigen::VectorXcd;
using MatXc = Eigen::MatrixXcd;

// d/dy X = (c(s) B + R(s, y)) X on y >= T with B = diag(mu), mu descending.
class PerturbedSystem {
 public:
  using Scalar = std::function<double(double)>;
  using Term = std::function<MatXc(double s, double y)>;

  PerturbedSystem(Scalar c, std::vector<double> mu, Term r, double t_start);

  int n() const { return static_cast<int>(mu_.size()); }
  double c(double s) const;
  const std::vector<double>& mu() const { return mu_; }
  MatXc r(double s, double y) const { return r_(s, y); }
  double t_start() const { return t_start_; }

 private:
  Scalar c_;
  std::vector<double> mu_;
  Term r_;
  double t_start_;
};

// Largest q (1-based) with mu_q = mu_k.
int split_index(const std::vector<double>& mu, int k);

struct LevinsonOptions {
  double y_max = 30.0;
  double step = 1e-3;
  int m_max = 60;
  double tol = 1e-12;
};

struct AsymptoticSolution {
  int k = 1;
  int q = 1;
  double c = 1.0;
  double mu_k = 0.0;
  std::vector<double> y;        // uniform grid on [T, y_max]
  std::vector<VecXc> z;         // X e^{-c mu_k y}
  std::vector<double> differences;  // sup |Z^{m+1} - Z^m| per iterate
  int iterates = 0;
  double tail_bound = 0.0;      // bound on the truncated part of future integrals

  VecXc x_at(std::size_t j) const;
  // Cubic Hermite in y using the ODE for slopes.
  VecXc z_interpolate(const PerturbedSystem& sys, double s, double yq) const;
};

// k is 1-based.
AsymptoticSolution iterate_solution(const PerturbedSystem& sys, double s, int k,
                                    const LevinsonOptions& opts = {});

// Samples of X^(k) at the requested points.
std::vector<VecXc> sample_solution(const PerturbedSystem& sys, double s, const AsymptoticSolution& sol,
                                   const std::vector<double>& y_grid);

// max_i [ e^{-eps y} |R|_{L1} + 2 sum_j int_{max(y/2, T)}^inf |R_ij| ]
double error_bound(const PerturbedSystem& sys, double s, int k, double y,
                   std::optional<double> eps = std::nullopt, const LevinsonOptions& opts = {});

struct ContinuityScan {
  std::vector<double> s;
  std::vector<VecXc> values;  // X^(k)(s, y_probe)
  double max_adjacent = 0.0;
};

ContinuityScan parameter_continuity_scan(const PerturbedSystem& sys, const std::vector<double>& s_list,
                                         int k, double y_probe, const LevinsonOptions& opts = {});

// Finite-difference residual max |X' - (cB + R)X| / max |X| on interior nodes.
double solution_residual(const PerturbedSystem& sys, double s, const AsymptoticSolution& sol);

// Condition number of the matrix of all n solutions at y = T.
double basis_condition(const PerturbedSystem& sys, double s, const LevinsonOptions& opts = {});

// Frame system along the ray (x, y) = (r cos iota, base + r sin iota) of an
// end field, in the eigenbasis of the model direction matrix. The parameter
// s scales the perturbation.
PerturbedSystem ray_system(std::shared_ptr<const TransportField> field, cplx residue, double iota);

void write_solution_csv(std::ostream& os, const AsymptoticSolution& sol);

}  // namespace rp2ends
