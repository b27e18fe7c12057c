#pragma once

#include "spicymkl/kernel_engine.hpp"
#include "spicymkl/losses.hpp"
#include "spicymkl/state.hpp"

#include <vector>

namespace mkl {

struct GapReport
{
    double primal = 0.0;
    double dual = 0.0;
    /// (primal - dual) / |primal|, or the absolute difference when primal == 0.
    double relative_gap = 0.0;
    Vector projected_rho;
    /// Set when primal == 0 and the gap is reported as an absolute difference.
    bool absolute = false;
    /// max_m |rho~|_{K_m} / C after mean-centering; > 1 means the centering
    /// step pushed the point back outside the norm ball.
    double ball_ratio = 0.0;
    bool ball_reviolated() const noexcept { return ball_ratio > 1.0 + 1e-12; }
};

/// Kernel products of rho that the solvers already hold, so that the gap
/// needs no extra Gram products for smooth losses.
struct RhoKernelTerms
{
    Vector norms;      ///< |rho|_{K_m}
    Vector k_rho_sums; ///< 1^T K_m rho
    Vector k_one_sums; ///< 1^T K_m 1

    /// From the N x M matrix with columns K_m rho.
    static RhoKernelTerms from_products(const Vector& rho, const Matrix& k_rho, const Vector& k_one_sums);
};

/// 1^T K_m 1 for every kernel.
Vector kernel_total_sums(const GramStack& gram);

/// f_l(sum_m K_m alpha_m + b 1) + C sum_m |alpha_m|_{K_m}, over nonzero blocks.
double primal_objective(const std::vector<Vector>& alpha, double b, const GramStack& gram,
                        const LossSpec& loss, double C);
double primal_objective(const SolverState& state, const GramStack& gram, const LossSpec& loss,
                        double C);

/**
 * Feasible-ish dual point from rho:
 *   rho' = rho / max(max_m |rho|_{K_m} / C, 1),  rho~ = rho' - mean(rho') 1.
 * Hinge clips y_i rho_i into [0, 1] first and once more after centering.
 *
 * `rho_knorms`, when given, supplies |rho|_{K_m} for every kernel.
 */
Vector dual_projection(const Vector& rho, const GramStack& gram, double C, const LossSpec& loss,
                       const Vector* rho_knorms = nullptr);

/// -f*(-rho~). Logistic clamps y_i rho~_i into [1e-12, 1 - 1e-12] first;
/// hinge returns y^T rho~.
double dual_objective(const Vector& rho_tilde, const LossSpec& loss);

/// Primal, projected dual and relative gap at (alpha, b) and rho. With
/// `terms` the smooth-loss path uses no Gram products beyond the primal.
GapReport relative_gap(const std::vector<Vector>& alpha, double b, const GramStack& gram,
                       const LossSpec& loss, double C, const Vector& rho,
                       const RhoKernelTerms* terms = nullptr);
GapReport relative_gap(const SolverState& state, const GramStack& gram, const LossSpec& loss,
                       double C, const Vector& rho, const RhoKernelTerms* terms = nullptr);

} // namespace mkl
