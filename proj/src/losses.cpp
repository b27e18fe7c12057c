#include "spicymkl/losses.hpp"

#include "spicymkl/errors.hpp"

#include <cmath>

namespace mkl {

namespace {

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m)
{
    if (m > 0.0)
        return std::log1p(std::exp(-m));
    return -m + std::log1p(std::exp(m));
}

// sigma(-m) = 1 / (1 + exp(m)).
double sigmoid_neg(double m)
{
    if (m >= 0.0) {
        const double e = std::exp(-m);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(m));
}

void require_size(const LossSpec& spec, const Vector& v, const char* what)
{
    if (v.size() != spec.size())
        throw ContractError(std::string(what) + ": expected length " + std::to_string(spec.size()) +
                            ", got " + std::to_string(v.size()));
}

} // namespace

std::string_view to_string(LossKind kind)
{
    switch (kind) {
    case LossKind::logistic:
        return "logistic";
    case LossKind::squared:
        return "squared";
    case LossKind::hinge:
        return "hinge";
    }
    return "?";
}

LossKind parse_loss_kind(std::string_view name)
{
    if (name == "logistic")
        return LossKind::logistic;
    if (name == "squared")
        return LossKind::squared;
    if (name == "hinge")
        return LossKind::hinge;
    throw ConfigError("unknown loss '" + std::string(name) + "' (expected logistic, hinge or squared)");
}

LossSpec::LossSpec(LossKind kind, Vector labels) : kind_(kind), labels_(std::move(labels))
{
    if (!labels_.allFinite())
        throw InputError("labels contain non-finite values");
    if (is_classification())
        for (Eigen::Index i = 0; i < labels_.size(); ++i)
            if (labels_(i) != 1.0 && labels_(i) != -1.0)
                throw InputError("classification labels must be -1 or +1 (sample " + std::to_string(i) +
                                 " has " + std::to_string(labels_(i)) + ")");
}

double loss_value(const LossSpec& spec, const Vector& z)
{
    require_size(spec, z, "loss_value");
    const Vector& y = spec.labels();
    double total = 0.0;
    switch (spec.kind()) {
    case LossKind::hinge:
        for (Eigen::Index i = 0; i < z.size(); ++i)
            total += std::max(1.0 - y(i) * z(i), 0.0);
        break;
    case LossKind::logistic:
        for (Eigen::Index i = 0; i < z.size(); ++i)
            total += log1p_exp_neg(y(i) * z(i));
        break;
    case LossKind::squared:
        total = (y - z).squaredNorm();
        break;
    }
    return total;
}

Vector loss_gradient(const LossSpec& spec, const Vector& z)
{
    require_size(spec, z, "loss_gradient");
    const Vector& y = spec.labels();
    Vector g(z.size());
    switch (spec.kind()) {
    case LossKind::hinge:
        for (Eigen::Index i = 0; i < z.size(); ++i)
            g(i) = y(i) * z(i) < 1.0 ? -y(i) : 0.0;
        break;
    case LossKind::logistic:
        for (Eigen::Index i = 0; i < z.size(); ++i)
            g(i) = -y(i) * sigmoid_neg(y(i) * z(i));
        break;
    case LossKind::squared:
        g = 2.0 * (z - y);
        break;
    }
    return g;
}

double loss_curvature_bound(const LossSpec& spec)
{
    switch (spec.kind()) {
    case LossKind::logistic:
        return 0.25;
    case LossKind::squared:
        return 2.0;
    case LossKind::hinge:
        break;
    }
    throw ContractError("hinge loss is not differentiable");
}

bool in_conjugate_domain(const LossSpec& spec, const Vector& rho)
{
    if (spec.kind() != LossKind::logistic)
        return rho.allFinite();
    const Vector& y = spec.labels();
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
        const double u = y(i) * rho(i);
        if (!(u > 0.0 && u < 1.0))
            return false;
    }
    return true;
}

ConjugateEval conjugate_eval(const LossSpec& spec, const Vector& rho)
{
    require_size(spec, rho, "conjugate_eval");
    if (!spec.smooth_conjugate())
        throw ContractError("conjugate_eval requires a smooth conjugate (logistic or squared)");
    const Vector& y = spec.labels();
    const Eigen::Index n = rho.size();
    ConjugateEval out;
    out.gradient.resize(n);
    out.hessian_diag.resize(n);

    if (spec.kind() == LossKind::squared) {
        out.value = -rho.dot(y) + 0.25 * rho.squaredNorm();
        out.gradient = -y + 0.5 * rho;
        out.hessian_diag.setConstant(0.5);
        return out;
    }

    std::vector<std::size_t> bad;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = y(i) * rho(i);
        if (!(u > 0.0 && u < 1.0))
            bad.push_back(static_cast<std::size_t>(i));
    }
    if (!bad.empty())
        throw DomainError("logistic conjugate evaluated outside 0 < y*rho < 1 at " +
                              std::to_string(bad.size()) + " sample(s)",
                          std::move(bad));

    double value = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = y(i) * rho(i);
        const double w = 1.0 - u;
        value += u * std::log(u) + w * std::log(w);
        out.gradient(i) = y(i) * (std::log(u) - std::log(w));
        out.hessian_diag(i) = 1.0 / (u * w);
    }
    out.value = value;
    return out;
}

double hinge_conjugate_linear(const LossSpec& spec, const Vector& rho)
{
    require_size(spec, rho, "hinge_conjugate_linear");
    return -spec.labels().dot(rho);
}

} // namespace mkl
