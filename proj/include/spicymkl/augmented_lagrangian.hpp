#pragma once

#include "spicymkl/kernel_engine.hpp"
#include "spicymkl/losses.hpp"
#include "spicymkl/state.hpp"

#include <vector>

namespace mkl {

/// Block soft-thresholding in the K-norm:
///   v * max(|v|_K - threshold, 0) / |v|_K,  with ST(0) = 0.
Vector soft_threshold(const Vector& v, const Matrix& K, double threshold);

/**
 * A point rho of the inner problem with its per-kernel caches.
 *
 * `k_rho.col(m)` holds K_m rho; `v_norm(m)` is |alpha_m + gamma_m rho|_{K_m};
 * `active` lists the kernels with v_norm(m) > gamma_m C (ties are inactive).
 */
struct DualIterate
{
    Vector rho;
    Matrix k_rho;
    Vector v_norm;
    std::vector<std::size_t> active;
    /// Kernels certified inactive whose K_m rho column was not kept up to
    /// date; their v_norm entry is an upper bound. Empty: nothing stale.
    std::vector<char> stale;

    bool is_stale(std::size_t m) const { return !stale.empty() && stale[m]; }
};

/**
 * The augmented Lagrangian phi_gamma(rho; alpha, b [, xi, zeta]) of one
 * proximal step, bound to a fixed primal state.
 *
 * Smooth losses:
 *   f*(-rho) + sum_m |ST_{gamma_m C}(alpha_m + gamma_m rho)|^2_{K_m} / (2 gamma_m)
 *            + (b + gamma_b sum(rho))^2 / (2 gamma_b)
 * Hinge loss replaces f*(-rho) by -y^T rho and adds the two slack penalties
 *   sum max(0, xi_i - gamma_xi (1 - y_i rho_i))^2 / (2 gamma_xi)
 *   sum max(0, zeta_i - gamma_zeta y_i rho_i)^2 / (2 gamma_zeta).
 *
 * Holds references: the stack, loss and state must outlive it.
 */
class AugmentedLagrangian
{
  public:
    AugmentedLagrangian(const GramStack& gram, const LossSpec& loss, const SolverState& state,
                        double C, KernelOpCounter* counter = nullptr);

    /// Builds the caches for rho (one product per kernel unless `k_rho`,
    /// the N x M matrix of K_m rho, is supplied).
    DualIterate make_iterate(Vector rho, Matrix k_rho = Matrix()) const;

    /// Recomputes v_norm and the active set from the cached products
    /// (stale kernels keep their bound and stay inactive).
    void refresh(DualIterate& it) const;

    /// Recomputes the K_m rho columns of stale kernels.
    void sync(DualIterate& it) const;

    /// Logistic: throws DomainError outside the conjugate domain.
    double value(const DualIterate& it) const;
    Vector gradient(const DualIterate& it) const;
    /// Assembled Hessian without damping.
    Matrix hessian(const DualIterate& it) const;
    /// Gradient and Hessian in one pass over the active Gram blocks.
    void gradient_and_hessian(const DualIterate& it, Vector& gradient, Matrix& hessian) const;
    /// Gradient from the cached K_m alpha_m and K_m rho (no Gram products).
    Vector gradient_from_cache(const DualIterate& it) const;

    /// Norm of alpha_m + gamma_m rho evaluated with cached K_m rho.
    double v_norm(std::size_t m, const Vector& rho, const Eigen::Ref<const Vector>& k_rho_m) const;

    /// phi along rho + step * delta, evaluating only the kernels in
    /// `candidates`. Every other kernel must be inactive on the whole
    /// segment. `kv_dot_dir(m)` = (K_m v_m)^T delta and
    /// `dir_sq(m)` = delta^T K_m delta for the listed kernels.
    double value_along(const DualIterate& it, const Vector& delta, double step,
                       const std::vector<std::size_t>& candidates, const Vector& kv_dot_dir,
                       const Vector& dir_sq) const;

    /// K_m v_m from the caches.
    Vector kv(std::size_t m, const DualIterate& it) const;

    /// sqrt(trace K_m) >= |d|_{K_m} / |d|_2 for any d.
    double norm_bound(std::size_t m) const { return trace_root_(static_cast<Eigen::Index>(m)); }

    const GramStack& gram() const noexcept { return gram_; }
    const LossSpec& loss() const noexcept { return loss_; }
    const SolverState& state() const noexcept { return state_; }
    double C() const noexcept { return C_; }
    KernelOpCounter* counter() const noexcept { return counter_; }

  private:
    double threshold(std::size_t m) const { return state_.gamma_kernel(m) * C_; }
    double smooth_part(const Vector& rho) const;
    Vector gradient_base(const Vector& rho) const;
    Matrix hessian_base(const Vector& rho) const;
    void add_rank_one_terms(Matrix& H, const Matrix& W) const;

    const GramStack& gram_;
    const LossSpec& loss_;
    const SolverState& state_;
    double C_;
    KernelOpCounter* counter_;
    Matrix k_alpha_;  // column m = K_m alpha_m (zero for zero blocks)
    Vector alpha_sq_; // alpha_m^T K_m alpha_m
    Vector trace_root_;
};

/// phi_gamma(rho) for the given state (builds fresh caches).
double al_objective(const Vector& rho, const SolverState& state, const GramStack& gram,
                    const LossSpec& loss, double C);

/// Gradient of phi_gamma; only active kernels contribute a product.
Vector al_gradient(const Vector& rho, const SolverState& state, const GramStack& gram,
                   const LossSpec& loss, double C, KernelOpCounter* counter = nullptr);

/// Hessian of phi_gamma (undamped).
Matrix al_hessian(const Vector& rho, const SolverState& state, const GramStack& gram,
                  const LossSpec& loss, double C, KernelOpCounter* counter = nullptr);

/// Solution of H x = rhs with Levenberg damping added only if H is not
/// numerically positive definite.
struct DampedSolve
{
    Vector solution;
    double damping = 0.0;
};
DampedSolve solve_damped(const Matrix& H, const Vector& rhs, double initial_damping);

struct InnerResult
{
    DualIterate iterate;
    int newton_steps = 0;
    double grad_norm = 0.0;
    /// phi at every accepted iterate, starting point included.
    std::vector<double> objective_path;
};

/**
 * Minimizes phi_gamma by Newton's method with Armijo backtracking.
 *
 * Throws ConvergenceError after config.max_inner steps and NumericalError
 * when the line search stalls below config.min_step. For the logistic loss
 * `rho_start` must lie strictly inside the conjugate domain.
 */
InnerResult newton_inner(const SolverState& state, const GramStack& gram, const LossSpec& loss,
                         const SolverConfig& config, Vector rho_start,
                         KernelOpCounter* counter = nullptr, Matrix k_rho_start = Matrix());

} // namespace mkl
