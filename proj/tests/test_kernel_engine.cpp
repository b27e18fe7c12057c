#include "doctest.h"
#include "oracles.hpp"

#include "spicymkl/errors.hpp"
#include "spicymkl/kernel_engine.hpp"

#include <Eigen/Eigenvalues>

using namespace mkl;

TEST_CASE("identical points give a constant gaussian gram")
{
    Matrix X(2, 1);
    X << 0.0, 0.0;
    const GramMatrix g = compute_gram(KernelSpec::gaussian(1.0), X);
    Matrix raw(2, 2);
    raw << 1.0 + 1e-8, 1.0, 1.0, 1.0 + 1e-8;
    CHECK(g.entries.trace() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((g.entries / g.scale - raw).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear polynomial kernel on opposite points")
{
    Matrix X(2, 1);
    X << 1.0, -1.0;
    const GramMatrix g = compute_gram(KernelSpec::polynomial(1), X, 0.0);
    Matrix raw(2, 2);
    raw << 2.0, 0.0, 0.0, 2.0;
    CHECK((g.entries / g.scale - raw).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(g.entries.trace() == doctest::Approx(1.0));
}

TEST_CASE("random gram matrices are symmetric, positive definite, unit trace and match the brute-force definition")
{
    oracle::Rng rng(11);
    const Matrix X = Matrix::Random(20, 5);
    const std::vector<KernelSpec> specs = {
        KernelSpec::gaussian(0.7), KernelSpec::gaussian(2.0, {1, 3}), KernelSpec::polynomial(3),
        KernelSpec::polynomial(2, {0}),
        [] {
            auto s = KernelSpec::gaussian(1.3);
            s.gaussian_form = GaussianForm::sigma_sq;
            return s;
        }()};
    for (const auto& spec : specs) {
        const GramMatrix g = compute_gram(spec, X);
        CHECK(g.entries == g.entries.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(g.entries);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
        CHECK(std::abs(g.entries.trace() - 1.0) < 1e-10);
        const Matrix ref = oracle::gram_brute(spec, X, kDefaultJitter);
        CHECK((g.entries - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("k_inner")
{
    const Matrix K = 0.5 * Matrix::Identity(2, 2);
    const Vector a = Vector::Ones(2);
    CHECK(k_inner(K, a, a) == doctest::Approx(1.0));
    oracle::Rng rng(3);
    const Matrix R = oracle::random_spd(10, rng);
    CHECK(k_inner(R, Vector::Zero(10), oracle::random_vector(10, rng)) == 0.0);
    const Vector x = oracle::random_vector(10, rng), y = oracle::random_vector(10, rng);
    double brute = 0.0;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            brute += x(i) * R(i, j) * y(j);
    CHECK(std::abs(k_inner(R, x, y) - brute) < 1e-12);
}

TEST_CASE("k_norm")
{
    oracle::Rng rng(4);
    const Matrix R = oracle::random_spd(8, rng);
    CHECK(k_norm(R, Vector::Zero(8)) == 0.0);
    Vector a(2);
    a << 3.0, 4.0;
    CHECK(k_norm(Matrix::Identity(2, 2), a) == doctest::Approx(5.0));
    const Vector x = oracle::random_vector(8, rng);
    CHECK(std::abs(k_norm(R, x) - std::sqrt(k_inner(R, x, x))) < 1e-12);
    CHECK(std::abs(k_norm(R, x) - oracle::knorm_eig(R, x)) < 1e-10);
    CHECK_THROWS_AS(k_norm(-Matrix::Identity(2, 2), a, 7), NumericalError);
}

TEST_CASE("grid bank sizes")
{
    CHECK(bank_specs(BankConfig{}, 2).size() == 81);
    BankConfig one;
    one.bandwidths = {1.0};
    one.degrees = {};
    one.subsets = SubsetPolicy::joint;
    CHECK(bank_specs(one, 7).size() == 1);

    const Matrix X = Matrix::Random(15, 4);
    const GramStack bank = build_kernel_bank(X, BankConfig{});
    CHECK(bank.n_kernels() == 135);
    for (const auto& g : bank)
        CHECK(std::abs(g.entries.trace() - 1.0) < 1e-10);
}

TEST_CASE("random bank")
{
    const Matrix X = Matrix::Random(30, 6);
    const GramStack a = random_kernel_bank(X, 50, 99);
    const GramStack b = random_kernel_bank(X, 50, 99);
    REQUIRE(a.n_kernels() == 50);
    for (std::size_t m = 0; m < 50; ++m) {
        CHECK(a[m].source.bandwidth >= 0.1);
        CHECK(a[m].source == b[m].source);
        CHECK(a.K(m) == b.K(m));
    }
    CHECK(a.memory_entries() == 50u * 30u * 30u);
}

TEST_CASE("cross gram uses the training scale")
{
    const Matrix X = Matrix::Random(12, 3);
    const GramMatrix g = compute_gram(KernelSpec::gaussian(1.5), X, 0.0);
    const Matrix cross = cross_gram(g, X, X);
    CHECK((cross - g.entries).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("invalid kernel specs are rejected")
{
    CHECK_THROWS_AS(KernelSpec::gaussian(-1.0).validate(3), ConfigError);
    CHECK_THROWS_AS(KernelSpec::gaussian(1.0, {5}).validate(3), ConfigError);
    CHECK_THROWS_AS(KernelSpec::polynomial(0).validate(3), ConfigError);
    CHECK_NOTHROW(KernelSpec::polynomial(2, {0, 2}).validate(3));
}
