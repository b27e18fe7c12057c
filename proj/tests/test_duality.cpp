#include "doctest.h"
#include "oracles.hpp"

#include "spicymkl/data_io.hpp"
#include "spicymkl/duality.hpp"
#include "spicymkl/solver.hpp"

#include <cmath>

using namespace mkl;

TEST_CASE("primal objective at the zero model")
{
    oracle::Rng rng(41);
    const GramStack gram = oracle::random_stack(12, 3, rng);
    const Vector y = oracle::random_labels(12, rng);
    const std::vector<Vector> zero(3, Vector::Zero(12));
    CHECK(primal_objective(zero, 0.0, gram, LossSpec(LossKind::logistic, y), 0.5) ==
          doctest::Approx(12.0 * std::log(2.0)));
    CHECK(primal_objective(zero, 0.0, gram, LossSpec(LossKind::hinge, y), 0.5) == doctest::Approx(12.0));
}

TEST_CASE("primal objective against the dense definition")
{
    oracle::Rng rng(42);
    for (LossKind kind : {LossKind::logistic, LossKind::squared, LossKind::hinge}) {
        const GramStack gram = oracle::random_stack(15, 4, rng);
        const LossSpec loss(kind, oracle::random_labels(15, rng));
        std::vector<Vector> alpha;
        for (int m = 0; m < 4; ++m)
            alpha.push_back(m == 2 ? Vector::Zero(15) : oracle::random_vector(15, rng));
        const double b = oracle::uniform(rng, -1.0, 1.0);
        const double ref = oracle::primal(alpha, b, gram, loss, 0.7);
        CHECK(std::abs(primal_objective(alpha, b, gram, loss, 0.7) - ref) < 1e-10 * std::abs(ref));
    }
}

TEST_CASE("dual projection")
{
    GramStack gram;
    gram.push_back(GramMatrix{Matrix::Identity(2, 2), KernelSpec{}, 1.0, 0.0});
    const LossSpec loss(LossKind::squared, Vector::Zero(2));
    Vector rho(2);
    rho << 2.0, 0.0;
    const Vector p = dual_projection(rho, gram, 1.0, loss);
    CHECK(p(0) == doctest::Approx(0.5));
    CHECK(p(1) == doctest::Approx(-0.5));

    Vector feasible(2);
    feasible << 0.3, -0.3;
    CHECK(dual_projection(feasible, gram, 1.0, loss) == feasible);

    oracle::Rng rng(43);
    const GramStack many = oracle::random_stack(20, 5, rng);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector r = oracle::random_vector(20, rng, 3.0);
        const LossSpec sq(LossKind::squared, oracle::random_vector(20, rng));
        CHECK(std::abs(dual_projection(r, many, 0.2, sq).sum()) < 1e-12);
    }
}

TEST_CASE("dual objective at simple points")
{
    oracle::Rng rng(44);
    const Vector y = oracle::random_labels(10, rng);
    CHECK(dual_objective(0.5 * y, LossSpec(LossKind::logistic, y)) == doctest::Approx(10.0 * std::log(2.0)));
    CHECK(dual_objective(Vector::Zero(10), LossSpec(LossKind::hinge, y)) == 0.0);
}

TEST_CASE("analytic ball ratio matches the direct computation")
{
    oracle::Rng rng(45);
    const GramStack gram = oracle::random_stack(25, 6, rng);
    const Vector y = oracle::random_labels(25, rng);
    const Vector k_one = kernel_total_sums(gram);
    for (LossKind kind : {LossKind::logistic, LossKind::squared}) {
        const LossSpec loss(kind, y);
        std::vector<Vector> alpha;
        for (int m = 0; m < 6; ++m)
            alpha.push_back(oracle::random_vector(25, rng, 0.3));
        for (double scale : {0.05, 3.0}) {
            Vector rho(25);
            for (Eigen::Index i = 0; i < 25; ++i)
                rho(i) = y(i) * oracle::uniform(rng, 0.1, 0.9) * scale;
            Matrix k_rho(25, 6);
            for (int m = 0; m < 6; ++m)
                k_rho.col(m) = gram.K(static_cast<std::size_t>(m)) * rho;
            const RhoKernelTerms terms = RhoKernelTerms::from_products(rho, k_rho, k_one);
            const GapReport a = relative_gap(alpha, 0.1, gram, loss, 0.5, rho);
            const GapReport b = relative_gap(alpha, 0.1, gram, loss, 0.5, rho, &terms);
            CHECK(a.ball_ratio == doctest::Approx(b.ball_ratio).epsilon(1e-9));
            CHECK(a.dual == doctest::Approx(b.dual).epsilon(1e-12));
            CHECK(a.primal == doctest::Approx(b.primal).epsilon(1e-12));
        }
    }
}

TEST_CASE("gap along a training run")
{
    const SyntheticMkl s = synth_sparse_mkl(60, 8, 2, 5);
    const LossSpec loss(LossKind::logistic, s.data.y);
    SolverConfig cfg;
    cfg.C = 0.05;
    const MklModel model = train(s.gram, loss, cfg);
    const auto& trace = model.diagnostics.trace;
    REQUIRE(!trace.empty());
    CHECK(std::isfinite(trace.front().rel_gap));
    CHECK(trace.front().rel_gap > 0.0);
    CHECK(model.diagnostics.converged);
    CHECK(trace.back().rel_gap <= 0.01);
    double best = trace.front().primal;
    for (const auto& row : trace) {
        CHECK(row.dual <= row.primal + 1e-10);
        best = std::min(best, row.primal);
    }
    // Every dual value bounds the optimum, so the last primal cannot exceed
    // the best one seen by more than its own gap.
    const auto& last = trace.back();
    CHECK(last.primal - best <= last.primal - last.dual + 1e-8);
}
