#pragma once

#include "spicymkl/kernel_engine.hpp"
#include "spicymkl/losses.hpp"
#include "spicymkl/state.hpp"

#include <vector>

namespace mkl {

/// Iterate of the shrinkage/thresholding baseline. `step` is shared by the
/// kernel blocks, `step_bias` applies to b.
struct IstState
{
    std::vector<Vector> alpha;
    double b = 0.0;
    double step = 0.0;
    double step_bias = 0.0;
    int iter = 0;
    double objective = 0.0;
    std::vector<double> objective_trace;
};

struct IstOptions
{
    double tol = 1e-9; ///< relative objective decrease
    int max_iter = 200000;
    /// Compute the relative duality gap (with rho = -grad f(z)) every this
    /// many iterations and store it in the model trace; 0 disables.
    int gap_every = 0;
    /// With gap_every > 0: also stop once the relative gap is <= gap_tol.
    double gap_tol = 0.0;
    double min_step = 1e-30;
};

/// L_loss * lambda_max(sum_m K_m), the Lipschitz constant of the loss
/// with respect to the kernel blocks in the block K-metric. lambda_max by
/// power iteration.
double ist_lipschitz_estimate(const GramStack& gram, const LossSpec& loss);

/// alpha = 0, b = 0, step = 1 / (2 L), step_bias = 1 / (2 L_loss N), with
/// L from ist_lipschitz_estimate. Together they satisfy the majorization
/// for the joint (alpha, b) update.
IstState ist_init(const GramStack& gram, const LossSpec& loss, double C);

/**
 * One iterative shrinkage/thresholding step:
 *   alpha_m <- ST_{step C}(alpha_m - step grad f(z)),  b <- b - step_bias sum(grad f(z))
 * with z = sum_m K_m alpha_m + b 1. Both steps are halved until the
 * proximal-gradient majorization holds. Throws NumericalError when it
 * underflows. Logistic and squared losses only.
 */
IstState ist_step(const IstState& state, const GramStack& gram, const LossSpec& loss, double C,
                  double min_step = 1e-30);

/// Runs ist_step until the relative objective decrease falls below
/// options.tol. Unconverged models are flagged, not thrown.
MklModel ist_solve(const GramStack& gram, const LossSpec& loss, double C, const IstOptions& options = {});

} // namespace mkl
