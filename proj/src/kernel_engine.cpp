#include "spicymkl/kernel_engine.hpp"

#include "spicymkl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace mkl {

namespace {

Matrix select_features(const Matrix& X, const std::vector<std::size_t>& features)
{
    if (features.empty())
        return X;
    Matrix out(X.rows(), static_cast<Eigen::Index>(features.size()));
    for (std::size_t j = 0; j < features.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(features[j]));
    return out;
}

void require_finite(const Matrix& X)
{
    if (!X.allFinite())
        throw InputError("data matrix contains non-finite entries");
}

double gaussian_denominator(const KernelSpec& spec)
{
    const double s2 = spec.bandwidth * spec.bandwidth;
    return spec.gaussian_form == GaussianForm::two_sigma_sq ? 2.0 * s2 : s2;
}

// Pairwise inner products and squared distances of the rows of one feature
// block. Shared by every kernel reading the same subset.
struct PairwiseCache
{
    Matrix inner;
    Matrix sqdist;
};

PairwiseCache pairwise(const Matrix& Xs)
{
    PairwiseCache c;
    c.inner = Xs * Xs.transpose();
    const Eigen::Index n = Xs.rows();
    c.sqdist.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        c.sqdist(j, j) = 0.0;
        for (Eigen::Index i = 0; i < j; ++i) {
            const double d = (Xs.row(i) - Xs.row(j)).squaredNorm();
            c.sqdist(i, j) = d;
            c.sqdist(j, i) = d;
        }
    }
    return c;
}

GramMatrix gram_from_pairwise(const KernelSpec& spec, const PairwiseCache& pc, double jitter)
{
    const Eigen::Index n = pc.inner.rows();
    Matrix K(n, n);
    if (spec.family == KernelFamily::gaussian) {
        const double denom = gaussian_denominator(spec);
        K = (-pc.sqdist.array() / denom).exp().matrix();
    } else {
        K = (pc.inner.array() + 1.0).pow(static_cast<double>(spec.degree)).matrix();
    }
    // Force exact symmetry: inner products computed by GEMM are not
    // guaranteed to be bitwise symmetric.
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < j; ++i)
            K(j, i) = K(i, j);

    K.diagonal().array() += jitter;
    const double tr = K.trace();
    if (!(tr > 0.0) || !std::isfinite(tr))
        throw NumericalError("kernel " + spec.describe() + " has non-positive trace");
    const double scale = 1.0 / tr;
    K *= scale;
    return GramMatrix{std::move(K), spec, scale, jitter};
}

} // namespace

KernelSpec KernelSpec::gaussian(double sigma, std::vector<std::size_t> features)
{
    KernelSpec s;
    s.family = KernelFamily::gaussian;
    s.bandwidth = sigma;
    s.features = std::move(features);
    return s;
}

KernelSpec KernelSpec::polynomial(int degree, std::vector<std::size_t> features)
{
    KernelSpec s;
    s.family = KernelFamily::polynomial;
    s.degree = degree;
    s.features = std::move(features);
    return s;
}

void KernelSpec::validate(std::size_t dim) const
{
    if (family == KernelFamily::gaussian && !(bandwidth > 0.0 && std::isfinite(bandwidth)))
        throw ConfigError("gaussian bandwidth must be positive, got " + std::to_string(bandwidth));
    if (family == KernelFamily::polynomial && degree < 1)
        throw ConfigError("polynomial degree must be >= 1, got " + std::to_string(degree));
    if (dim == 0)
        throw ConfigError("data has no features");
    for (std::size_t f : features)
        if (f >= dim)
            throw ConfigError("feature index " + std::to_string(f) + " out of range for dimension " +
                              std::to_string(dim));
}

std::string KernelSpec::describe() const
{
    std::ostringstream os;
    if (family == KernelFamily::gaussian)
        os << "gaussian(sigma=" << bandwidth << ")";
    else
        os << "poly(degree=" << degree << ")";
    if (features.empty()) {
        os << "[all]";
    } else {
        os << "[";
        for (std::size_t i = 0; i < features.size(); ++i)
            os << (i ? "," : "") << features[i];
        os << "]";
    }
    return os.str();
}

double kernel_value(const KernelSpec& spec,
                    const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b)
{
    double dot = 0.0;
    double sq = 0.0;
    auto accumulate = [&](Eigen::Index j) {
        dot += a(j) * b(j);
        const double d = a(j) - b(j);
        sq += d * d;
    };
    if (spec.features.empty())
        for (Eigen::Index j = 0; j < a.size(); ++j)
            accumulate(j);
    else
        for (std::size_t f : spec.features)
            accumulate(static_cast<Eigen::Index>(f));

    if (spec.family == KernelFamily::gaussian)
        return std::exp(-sq / gaussian_denominator(spec));
    return std::pow(1.0 + dot, static_cast<double>(spec.degree));
}

GramStack::GramStack(std::vector<GramMatrix> matrices)
{
    for (auto& g : matrices)
        push_back(std::move(g));
}

void GramStack::push_back(GramMatrix gram)
{
    const auto n = static_cast<std::size_t>(gram.entries.rows());
    if (gram.entries.cols() != gram.entries.rows())
        throw ContractError("Gram matrix is not square");
    if (!matrices_.empty() && n != n_samples_)
        throw ContractError("Gram matrices in a stack must share dimension N");
    n_samples_ = n;
    matrices_.push_back(std::move(gram));
}

GramMatrix compute_gram(const KernelSpec& spec, const Matrix& X, double jitter)
{
    if (X.rows() < 1)
        throw InputError("compute_gram needs at least one sample");
    require_finite(X);
    spec.validate(static_cast<std::size_t>(X.cols()));
    return gram_from_pairwise(spec, pairwise(select_features(X, spec.features)), jitter);
}

Matrix cross_gram(const GramMatrix& gram, const Matrix& X_test, const Matrix& X_train)
{
    if (X_test.cols() != X_train.cols())
        throw ContractError("test and train data differ in dimension");
    require_finite(X_test);
    gram.source.validate(static_cast<std::size_t>(X_train.cols()));
    Matrix out(X_test.rows(), X_train.rows());
    for (Eigen::Index i = 0; i < X_test.rows(); ++i)
        for (Eigen::Index j = 0; j < X_train.rows(); ++j)
            out(i, j) = gram.scale * kernel_value(gram.source, X_test.row(i), X_train.row(j));
    return out;
}

double k_inner(const Matrix& K, const Vector& a, const Vector& c)
{
    if (K.rows() != a.size() || K.cols() != c.size())
        throw ContractError("k_inner: dimension mismatch");
    return a.dot(K * c);
}

double k_norm(const Matrix& K, const Vector& a, std::ptrdiff_t kernel_index)
{
    if (K.rows() != a.size() || K.cols() != a.size())
        throw ContractError("k_norm: dimension mismatch");
    const double q = a.dot(K * a);
    if (q >= 0.0)
        return std::sqrt(q);
    const double roundoff = 1e-12 * std::max(1.0, a.squaredNorm() * K.diagonal().cwiseAbs().maxCoeff());
    if (q > -roundoff)
        return 0.0;
    std::ostringstream os;
    os << "negative quadratic form " << q << " in K-norm";
    if (kernel_index >= 0)
        os << " of kernel " << kernel_index;
    throw NumericalError(os.str());
}

std::vector<double> BankConfig::default_bandwidths()
{
    std::vector<double> bw = {0.1, 0.25, 0.5, 0.75};
    for (int s = 1; s <= 20; ++s)
        bw.push_back(static_cast<double>(s));
    return bw;
}

std::vector<KernelSpec> bank_specs(const BankConfig& config, std::size_t dim)
{
    if (config.bandwidths.empty() && config.degrees.empty())
        throw ConfigError("kernel bank config lists no bandwidths and no degrees");
    if (dim == 0)
        throw ConfigError("data has no features");

    std::vector<std::vector<std::size_t>> subsets;
    if (config.subsets != SubsetPolicy::single)
        subsets.emplace_back();
    if (config.subsets != SubsetPolicy::joint)
        for (std::size_t j = 0; j < dim; ++j)
            subsets.push_back({j});

    std::vector<KernelSpec> specs;
    specs.reserve((config.bandwidths.size() + config.degrees.size()) * subsets.size());
    for (double bw : config.bandwidths)
        for (const auto& s : subsets) {
            auto k = KernelSpec::gaussian(bw, s);
            k.gaussian_form = config.gaussian_form;
            specs.push_back(std::move(k));
        }
    for (int d : config.degrees)
        for (const auto& s : subsets)
            specs.push_back(KernelSpec::polynomial(d, s));
    for (const auto& k : specs)
        k.validate(dim);
    return specs;
}

std::vector<KernelSpec> random_bank_specs(std::size_t dim, std::size_t count, std::uint64_t seed)
{
    if (count < 1)
        throw ConfigError("random kernel bank needs at least one kernel");
    if (dim == 0)
        throw ConfigError("data has no features");
    std::mt19937_64 rng(seed);
    std::chi_squared_distribution<double> chi2(1.0);
    std::uniform_int_distribution<std::size_t> subset_size(1, dim);

    std::vector<std::size_t> all(dim);
    std::iota(all.begin(), all.end(), std::size_t{0});

    std::vector<KernelSpec> specs;
    specs.reserve(count);
    for (std::size_t m = 0; m < count; ++m) {
        const std::size_t k = subset_size(rng);
        std::vector<std::size_t> pick;
        pick.reserve(k);
        std::sample(all.begin(), all.end(), std::back_inserter(pick), k, rng);
        if (k == dim)
            pick.clear();
        specs.push_back(KernelSpec::gaussian(5.0 * chi2(rng) + 0.1, std::move(pick)));
    }
    return specs;
}

GramStack build_gram_stack(const Matrix& X, std::span<const KernelSpec> specs, double jitter)
{
    if (X.rows() < 1)
        throw InputError("kernel bank needs at least one sample");
    if (specs.empty())
        throw ConfigError("kernel bank is empty");
    require_finite(X);

    std::map<std::vector<std::size_t>, PairwiseCache> cache;
    GramStack stack;
    for (const auto& spec : specs) {
        spec.validate(static_cast<std::size_t>(X.cols()));
        auto it = cache.find(spec.features);
        if (it == cache.end()) {
            // Random banks rarely share subsets; keep the cache from growing
            // to M * N^2 on top of the stack itself.
            if (cache.size() > 64)
                cache.clear();
            it = cache.emplace(spec.features, pairwise(select_features(X, spec.features))).first;
        }
        stack.push_back(gram_from_pairwise(spec, it->second, jitter));
    }
    return stack;
}

GramStack build_kernel_bank(const Matrix& X, const BankConfig& config)
{
    if (config.random_kernels > 0)
        return random_kernel_bank(X, config.random_kernels, config.seed, config.jitter);
    const auto specs = bank_specs(config, static_cast<std::size_t>(X.cols()));
    return build_gram_stack(X, specs, config.jitter);
}

GramStack random_kernel_bank(const Matrix& X, std::size_t count, std::uint64_t seed, double jitter)
{
    const auto specs = random_bank_specs(static_cast<std::size_t>(X.cols()), count, seed);
    return build_gram_stack(X, specs, jitter);
}

} // namespace mkl
