#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "kfp/phase.hpp"

namespace kfp {

/// Alternating Dirichlet beta function for z > 0.
double dirichlet_beta(double z);

/// Analytic continuation of sum over Z^n \ {0} of |k|^{-sigma}, n in {1, 2}.
double lattice_zeta(int n, double sigma);

/// Coefficient w such that, for a kernel equal to c|h|^{-n-2s} near h = 0,
///   integral = lattice sum + w * c * h^{2-2s} * (discrete Laplacian of f).
/// Restores the excluded diagonal cell to leading order.
double diagonal_weight(int n, double s);

/// Cell-aligned box bounds: samples at -V + j h own [v - h/2, v + h/2).
double box_lo(const VBox& box);
double box_hi(const VBox& box);

/// Integral over directions leaving the cell-aligned box from v.
/// `radial(phi, rb)` must return the radial integral from rb to infinity including the
/// r^{n-1} Jacobian. In 1-D phi is 0 (right) or pi (left). Breakpoints are radii at
/// which the angular integrand has a kink.
double exterior_integral(const VBox& box, const Vec& v,
                         const std::function<double(double phi, double rb)>& radial,
                         const std::vector<double>& kink_radii = {});

/// Integral of |v-w|^{-n-2s} 1_{|v-w| <= r_max} over w outside the box.
double exterior_power_integral(const VBox& box, const Vec& v, double s,
                               double r_max = std::numeric_limits<double>::infinity());

/// Distance from v to the complement of the cell-aligned box.
double distance_to_exterior(const VBox& box, const Vec& v);

/// Gauss-Legendre rule on [a, b].
void gauss_legendre(int order, double a, double b, std::vector<double>& x,
                    std::vector<double>& w);

}  // namespace kfp
