#pragma once

#include "spicymkl/kernel_engine.hpp"
#include "spicymkl/losses.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace mkl {

/// Settings of the proximal (outer) loop and the Newton (inner) loop.
struct SolverConfig
{
    double C = 0.05;

    // Penalty schedule: gamma^(1) = gamma_init, gamma^(t+1) = min(gamma^(t) * gamma_growth, gamma_cap).
    double gamma_init = 1.0;
    double gamma_growth = 2.0;
    double gamma_cap = 1e8;

    double outer_tol = 0.01; ///< relative duality gap
    double inner_tol = 1e-6; ///< infinity norm of the AL gradient
    int max_outer = 200;
    int max_inner = 100;

    double armijo_c1 = 1e-4;
    double backtrack = 0.5;
    double min_step = 1e-12;

    /// Initial Levenberg damping on factorization failure; <= 0 selects
    /// 1e-8 * trace(H) / N. Escalated x10 up to 1e-2 * trace(H) / N.
    double hessian_damping = 0.0;

    /// Blocks whose K-norm falls below this are dropped from the model.
    double drop_tol = 1e-10;

    /// Once gamma is capped, stop when the gap changed by less than
    /// stagnation_rel (relative) over stagnation_window iterations.
    int stagnation_window = 5;
    double stagnation_rel = 1e-3;

    /// Throws ConfigError on invalid values.
    void validate() const;
};

/// Primal iterate of the proximal loop and its penalty parameters.
struct SolverState
{
    std::vector<Vector> alpha; ///< M blocks of length N; inactive blocks are exactly zero
    double b = 0.0;
    Vector xi;   ///< hinge slack, >= 0
    Vector zeta; ///< hinge slack, >= 0
    Vector gamma_kernel;
    double gamma_bias = 1.0;
    double gamma_xi = 1.0;
    double gamma_zeta = 1.0;
    int outer_iter = 0;

    /// alpha = 0, b = 0, xi = zeta = 0, every penalty = gamma_init.
    static SolverState zeros(std::size_t n_kernels, std::size_t n_samples, double gamma_init);

    std::size_t n_kernels() const noexcept { return alpha.size(); }
    bool block_is_zero(std::size_t m) const { return !alpha[m].any(); }
};

/// Products spent assembling one Newton system, with the point it was
/// assembled at.
struct NewtonStepRecord
{
    std::size_t gradient_products = 0;
    std::size_t hessian_blocks = 0;
    Vector rho;
};

/// Per-kernel matrix-vector product counts, split by purpose.
struct KernelOpCounter
{
    std::size_t gradient_products = 0;  ///< K_m * ST(v_m) terms in the AL gradient
    std::size_t hessian_blocks = 0;     ///< K_m blocks added into the AL Hessian
    std::size_t direction_products = 0; ///< K_m * delta_rho per Newton step
    std::size_t iterate_products = 0;   ///< K_m * rho when an iterate is built from scratch
    std::size_t setup_products = 0;     ///< K_m * alpha_m for nonzero blocks
    std::size_t linesearch_norms = 0;   ///< kernel norms evaluated during backtracking

    /// When set, newton_inner appends one record per Newton step.
    bool record_steps = false;
    std::vector<NewtonStepRecord> steps;

    void reset()
    {
        const bool keep = record_steps;
        *this = KernelOpCounter{};
        record_steps = keep;
    }
};

/// One row per outer iteration.
struct TraceRow
{
    int iter = 0;
    double primal = 0.0;
    double dual = 0.0;
    double rel_gap = 0.0;
    std::size_t active_kernels = 0;
    double seconds = 0.0;
    int inner_steps = 0;
};

struct ModelDiagnostics
{
    std::string solver;
    bool converged = false;
    int iterations = 0;
    double final_gap = 0.0;
    double final_primal = 0.0;
    std::vector<TraceRow> trace;
    std::vector<std::string> warnings;
};

/**
 * Trained MKL decision function
 *   f(x) = sum_m sum_i k_m(x, x_i) alpha_{m,i} + b.
 *
 * Only nonzero blocks are stored; `kernel_indices[j]` is the bank index of
 * `alpha[j]`. `weights` are the normalized block norms (sum to one).
 */
struct MklModel
{
    LossKind loss = LossKind::logistic;
    double C = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_bank_kernels = 0;
    std::vector<std::size_t> kernel_indices;
    std::vector<Vector> alpha;
    std::vector<double> block_norms;
    std::vector<double> weights;
    double b = 0.0;
    ModelDiagnostics diagnostics;

    std::size_t n_active() const noexcept { return kernel_indices.size(); }
};

} // namespace mkl
