#pragma once

#include "spicymkl/kernel_engine.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace mkl {

enum class LossKind
{
    logistic,
    squared,
    hinge
};

std::string_view to_string(LossKind kind);
/// Throws ConfigError on unknown names.
LossKind parse_loss_kind(std::string_view name);

/**
 * Loss family bound to the training targets.
 *
 * Classification losses (logistic, hinge) require labels in {-1, +1};
 * the squared loss accepts any finite target.
 */
class LossSpec
{
  public:
    LossSpec(LossKind kind, Vector labels);

    LossKind kind() const noexcept { return kind_; }
    const Vector& labels() const noexcept { return labels_; }
    Eigen::Index size() const noexcept { return labels_.size(); }

    /// True for logistic and squared: the conjugate is twice differentiable
    /// on the interior of its domain.
    bool smooth_conjugate() const noexcept { return kind_ != LossKind::hinge; }
    bool is_classification() const noexcept { return kind_ != LossKind::squared; }

  private:
    LossKind kind_;
    Vector labels_;
};

/// f(rho) = sum_i l*(y_i, -rho_i) together with its gradient and the
/// diagonal of its Hessian with respect to rho.
struct ConjugateEval
{
    double value = 0.0;
    Vector gradient;
    Vector hessian_diag;
};

/// sum_i l(y_i, z_i).
double loss_value(const LossSpec& spec, const Vector& z);

/// d/dz sum_i l(y_i, z_i). Hinge returns a subgradient.
Vector loss_gradient(const LossSpec& spec, const Vector& z);

/// Upper bound on the second derivative of l(y, .) (logistic 1/4, squared 2).
/// Throws ContractError for the hinge loss.
double loss_curvature_bound(const LossSpec& spec);

/// True when every u_i = y_i rho_i lies strictly inside (0, 1) (logistic);
/// always true for the squared loss.
bool in_conjugate_domain(const LossSpec& spec, const Vector& rho);

/// Conjugate value, gradient and Hessian diagonal at -rho. Logistic points
/// with y_i rho_i outside (0, 1) raise DomainError listing the indices.
/// Requires a smooth conjugate (ContractError for hinge).
ConjugateEval conjugate_eval(const LossSpec& spec, const Vector& rho);

/// -sum_i y_i rho_i, the linear part of the hinge conjugate. The box
/// 0 <= y_i rho_i <= 1 is not checked.
double hinge_conjugate_linear(const LossSpec& spec, const Vector& rho);

} // namespace mkl
