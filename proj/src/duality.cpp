#include "spicymkl/duality.hpp"

#include "spicymkl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mkl {

namespace {

constexpr double kLogisticClamp = 1e-12;

void clip_box(Vector& rho, const Vector& y)
{
    for (Eigen::Index i = 0; i < rho.size(); ++i)
        rho(i) = y(i) * std::clamp(y(i) * rho(i), 0.0, 1.0);
}

Vector knorms_of(const Vector& rho, const GramStack& gram)
{
    Vector out(static_cast<Eigen::Index>(gram.n_kernels()));
    for (std::size_t m = 0; m < gram.n_kernels(); ++m)
        out(static_cast<Eigen::Index>(m)) = k_norm(gram.K(m), rho, static_cast<std::ptrdiff_t>(m));
    return out;
}

double max_ratio(const Vector& rho, const GramStack& gram, double C)
{
    double r = 0.0;
    for (std::size_t m = 0; m < gram.n_kernels(); ++m)
        r = std::max(r, k_norm(gram.K(m), rho, static_cast<std::ptrdiff_t>(m)) / C);
    return r;
}

} // namespace

RhoKernelTerms RhoKernelTerms::from_products(const Vector& rho, const Matrix& k_rho, const Vector& k_one_sums)
{
    if (k_rho.rows() != rho.size() || k_rho.cols() != k_one_sums.size())
        throw ContractError("RhoKernelTerms: shape mismatch");
    RhoKernelTerms t;
    t.norms.resize(k_rho.cols());
    for (Eigen::Index m = 0; m < k_rho.cols(); ++m) {
        const double q = rho.dot(k_rho.col(m));
        t.norms(m) = q > 0.0 ? std::sqrt(q) : 0.0;
    }
    t.k_rho_sums = k_rho.colwise().sum().transpose();
    t.k_one_sums = k_one_sums;
    return t;
}

Vector kernel_total_sums(const GramStack& gram)
{
    Vector out(static_cast<Eigen::Index>(gram.n_kernels()));
    for (std::size_t m = 0; m < gram.n_kernels(); ++m)
        out(static_cast<Eigen::Index>(m)) = gram.K(m).sum();
    return out;
}

double primal_objective(const std::vector<Vector>& alpha, double b, const GramStack& gram,
                        const LossSpec& loss, double C)
{
    if (alpha.size() != gram.n_kernels())
        throw ContractError("primal_objective: alpha has the wrong number of blocks");
    Vector z = Vector::Constant(static_cast<Eigen::Index>(gram.n_samples()), b);
    double penalty = 0.0;
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        if (!alpha[m].any())
            continue;
        const Vector ka = gram.K(m) * alpha[m];
        z += ka;
        const double q = alpha[m].dot(ka);
        penalty += q > 0.0 ? std::sqrt(q) : 0.0;
    }
    return loss_value(loss, z) + C * penalty;
}

double primal_objective(const SolverState& state, const GramStack& gram, const LossSpec& loss, double C)
{
    return primal_objective(state.alpha, state.b, gram, loss, C);
}

Vector dual_projection(const Vector& rho, const GramStack& gram, double C, const LossSpec& loss,
                       const Vector* rho_knorms)
{
    if (!rho.allFinite())
        throw ContractError("dual_projection: rho is not finite");
    if (rho.size() != static_cast<Eigen::Index>(gram.n_samples()))
        throw ContractError("dual_projection: rho has the wrong length");
    const bool hinge = loss.kind() == LossKind::hinge;

    Vector out = rho;
    Vector norms;
    if (hinge) {
        clip_box(out, loss.labels());
        norms = knorms_of(out, gram);
    } else if (rho_knorms != nullptr) {
        norms = *rho_knorms;
    } else {
        norms = knorms_of(out, gram);
    }

    const double ratio = norms.size() > 0 ? norms.maxCoeff() / C : 0.0;
    out /= std::max(ratio, 1.0);
    out.array() -= out.mean();
    if (hinge)
        clip_box(out, loss.labels());
    return out;
}

double dual_objective(const Vector& rho_tilde, const LossSpec& loss)
{
    if (loss.kind() == LossKind::hinge)
        return -hinge_conjugate_linear(loss, rho_tilde);
    if (loss.kind() == LossKind::squared)
        return -conjugate_eval(loss, rho_tilde).value;

    const Vector& y = loss.labels();
    Vector clamped(rho_tilde.size());
    for (Eigen::Index i = 0; i < rho_tilde.size(); ++i)
        clamped(i) = y(i) * std::clamp(y(i) * rho_tilde(i), kLogisticClamp, 1.0 - kLogisticClamp);
    return -conjugate_eval(loss, clamped).value;
}

GapReport relative_gap(const std::vector<Vector>& alpha, double b, const GramStack& gram,
                       const LossSpec& loss, double C, const Vector& rho, const RhoKernelTerms* terms)
{
    GapReport r;
    r.primal = primal_objective(alpha, b, gram, loss, C);
    r.projected_rho = dual_projection(rho, gram, C, loss, terms ? &terms->norms : nullptr);
    r.dual = dual_objective(r.projected_rho, loss);
    if (terms && loss.kind() != LossKind::hinge) {
        // rho~ = s rho - c 1, so |rho~|^2 expands into cached quantities.
        const double s = 1.0 / std::max(terms->norms.maxCoeff() / C, 1.0);
        const double c = s * rho.mean();
        for (Eigen::Index m = 0; m < terms->norms.size(); ++m) {
            const double n = terms->norms(m);
            const double q = s * s * n * n - 2.0 * s * c * terms->k_rho_sums(m) + c * c * terms->k_one_sums(m);
            r.ball_ratio = std::max(r.ball_ratio, (q > 0.0 ? std::sqrt(q) : 0.0) / C);
        }
    } else {
        r.ball_ratio = max_ratio(r.projected_rho, gram, C);
    }
    const double diff = r.primal - r.dual;
    if (r.primal == 0.0) {
        r.absolute = true;
        r.relative_gap = std::abs(diff);
    } else {
        r.relative_gap = diff / std::abs(r.primal);
    }
    return r;
}

GapReport relative_gap(const SolverState& state, const GramStack& gram, const LossSpec& loss,
                       double C, const Vector& rho, const RhoKernelTerms* terms)
{
    return relative_gap(state.alpha, state.b, gram, loss, C, rho, terms);
}

} // namespace mkl
