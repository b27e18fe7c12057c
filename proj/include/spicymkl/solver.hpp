#pragma once

#include "spicymkl/augmented_lagrangian.hpp"
#include "spicymkl/kernel_engine.hpp"
#include "spicymkl/losses.hpp"
#include "spicymkl/state.hpp"

#include <functional>
#include <span>
#include <string_view>

namespace mkl {

/// Receives library warnings (degenerate models, unconverged runs). The
/// default sink writes to stderr; pass an empty function to silence.
void set_warning_sink(std::function<void(std::string_view)> sink);
void warn(std::string_view message);

/**
 * One proximal step given the inner minimizer rho*:
 *   alpha_m <- ST_{gamma_m C}(alpha_m + gamma_m rho*)
 *   b       <- b + gamma_b sum(rho*)
 *   xi_i    <- max(0, xi_i - gamma_xi (1 - y_i rho*_i))      (hinge)
 *   zeta_i  <- max(0, zeta_i - gamma_zeta y_i rho*_i)        (hinge)
 * followed by gamma <- min(gamma * gamma_growth, gamma_cap).
 *
 * Blocks with |alpha_m + gamma_m rho*|_{K_m} <= gamma_m C become exactly zero.
 */
SolverState outer_update(const SolverState& state, const Vector& rho_star, const GramStack& gram,
                         const LossSpec& loss, const SolverConfig& config);

/// Same update using the norms and caches of an inner-loop iterate.
SolverState outer_update(const SolverState& state, const DualIterate& rho_star,
                         const LossSpec& loss, const SolverConfig& config);

/// Smallest C for which alpha = 0 is optimal: max_m |grad f(b* 1)|_{K_m},
/// with b* the optimal bias of the kernel-free problem.
double zero_solution_threshold(const GramStack& gram, const LossSpec& loss);

/// Model from a primal state: nonzero blocks (K-norm above drop_tol) and
/// kernel weights proportional to block norms.
MklModel extract_model(const std::vector<Vector>& alpha, double b, const GramStack& gram,
                       LossKind loss, double C, double drop_tol);

struct TrainOptions
{
    KernelOpCounter* counter = nullptr;
};

/**
 * Proximal-minimization MKL training from alpha = 0, b = 0.
 *
 * Stops when the relative duality gap drops to config.outer_tol
 * (converged), or after max_outer iterations, stagnation at the penalty
 * cap, or an inner-loop failure (unconverged partial model).
 */
MklModel train(const GramStack& gram, const LossSpec& loss, const SolverConfig& config,
               const TrainOptions& options = {});

/// sum_j gram_rows[j] * alpha_j + b, where gram_rows[j] is the N_test x N
/// block of kernel model.kernel_indices[j]. `n_test` is only consulted for
/// a model without active kernels.
Vector predict(const MklModel& model, std::span<const Matrix> gram_rows, Eigen::Index n_test = -1);

/// Predictions on the training points (rows taken from the stack).
Vector predict(const MklModel& model, const GramStack& gram);

/// C * sum_m |alpha_m|_{K_m}. Zero model: returns 0 and warns.
double c_correspondence(const MklModel& model, double C);

} // namespace mkl
