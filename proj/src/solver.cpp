#include "spicymkl/solver.hpp"

#include "spicymkl/duality.hpp"
#include "spicymkl/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

namespace mkl {

namespace {

std::function<void(std::string_view)>& warning_sink()
{
    static std::function<void(std::string_view)> sink = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return sink;
}

Vector initial_rho(const LossSpec& loss)
{
    if (loss.kind() == LossKind::logistic)
        return 0.5 * loss.labels();
    return Vector::Zero(loss.size());
}

// Warm start for the next inner loop; logistic points are pulled back
// inside the conjugate domain.
Vector warm_start(const LossSpec& loss, const Vector& rho)
{
    if (loss.kind() != LossKind::logistic)
        return rho;
    const Vector& y = loss.labels();
    Vector out(rho.size());
    for (Eigen::Index i = 0; i < rho.size(); ++i)
        out(i) = y(i) * std::clamp(y(i) * rho(i), 1e-6, 1.0 - 1e-6);
    return out;
}

// K_m rho_new from the cached K_m rho_old when the two differ in a few
// coordinates; an empty matrix (recompute) otherwise.
Matrix shifted_products(const GramStack& gram, const Vector& rho_old, Matrix k_rho_old, const Vector& rho_new,
                        KernelOpCounter* counter)
{
    std::vector<Eigen::Index> changed;
    for (Eigen::Index i = 0; i < rho_new.size(); ++i)
        if (rho_new(i) != rho_old(i))
            changed.push_back(i);
    if (changed.empty())
        return k_rho_old;
    if (4 * changed.size() > static_cast<std::size_t>(rho_new.size()))
        return Matrix();
    for (std::size_t m = 0; m < gram.n_kernels(); ++m) {
        const Matrix& K = gram.K(m);
        for (Eigen::Index i : changed)
            k_rho_old.col(static_cast<Eigen::Index>(m)) += (rho_new(i) - rho_old(i)) * K.col(i);
    }
    if (counter)
        counter->iterate_products += gram.n_kernels();
    return k_rho_old;
}

void grow_penalties(SolverState& s, const SolverConfig& config)
{
    auto grow = [&](double g) { return std::min(g * config.gamma_growth, config.gamma_cap); };
    s.gamma_kernel = s.gamma_kernel.unaryExpr(grow);
    s.gamma_bias = grow(s.gamma_bias);
    s.gamma_xi = grow(s.gamma_xi);
    s.gamma_zeta = grow(s.gamma_zeta);
}

void update_slacks(SolverState& next, const SolverState& state, const Vector& rho, const LossSpec& loss)
{
    if (loss.kind() != LossKind::hinge)
        return;
    const Vector& y = loss.labels();
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
        const double u = y(i) * rho(i);
        next.xi(i) = std::max(0.0, state.xi(i) - state.gamma_xi * (1.0 - u));
        next.zeta(i) = std::max(0.0, state.zeta(i) - state.gamma_zeta * u);
    }
}

} // namespace

void set_warning_sink(std::function<void(std::string_view)> sink)
{
    warning_sink() = std::move(sink);
}

void warn(std::string_view message)
{
    if (warning_sink())
        warning_sink()(message);
}

void SolverConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (!(C > 0.0))
        fail("C must be positive");
    if (!(gamma_init > 0.0))
        fail("gamma_init must be positive");
    if (!(gamma_growth >= 1.0))
        fail("gamma_growth must be >= 1");
    if (!(gamma_cap >= gamma_init))
        fail("gamma_cap must be >= gamma_init");
    if (!(outer_tol > 0.0) || !(inner_tol > 0.0))
        fail("tolerances must be positive");
    if (max_outer < 1 || max_inner < 1)
        fail("iteration limits must be >= 1");
    if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0))
        fail("armijo_c1 must lie in (0, 1)");
    if (!(backtrack > 0.0 && backtrack < 1.0))
        fail("backtrack factor must lie in (0, 1)");
    if (!(min_step > 0.0))
        fail("min_step must be positive");
    if (stagnation_window < 1)
        fail("stagnation_window must be >= 1");
}

SolverState SolverState::zeros(std::size_t n_kernels, std::size_t n_samples, double gamma_init)
{
    const auto N = static_cast<Eigen::Index>(n_samples);
    SolverState s;
    s.alpha.assign(n_kernels, Vector::Zero(N));
    s.b = 0.0;
    s.xi = Vector::Zero(N);
    s.zeta = Vector::Zero(N);
    s.gamma_kernel = Vector::Constant(static_cast<Eigen::Index>(n_kernels), gamma_init);
    s.gamma_bias = s.gamma_xi = s.gamma_zeta = gamma_init;
    s.outer_iter = 0;
    return s;
}

SolverState outer_update(const SolverState& state, const DualIterate& rho_star, const LossSpec& loss,
                         const SolverConfig& config)
{
    const Vector& rho = rho_star.rho;
    SolverState next = state;
    for (std::size_t m = 0; m < state.n_kernels(); ++m) {
        const auto col = static_cast<Eigen::Index>(m);
        const double g = state.gamma_kernel(col);
        const double norm = rho_star.v_norm(col);
        const double t = g * config.C;
        if (norm > t)
            next.alpha[m] = ((norm - t) / norm) * (state.alpha[m] + g * rho);
        else
            next.alpha[m].setZero();
    }
    next.b = state.b + state.gamma_bias * rho.sum();
    update_slacks(next, state, rho, loss);
    grow_penalties(next, config);
    ++next.outer_iter;
    return next;
}

SolverState outer_update(const SolverState& state, const Vector& rho_star, const GramStack& gram,
                         const LossSpec& loss, const SolverConfig& config)
{
    AugmentedLagrangian al(gram, loss, state, config.C);
    return outer_update(state, al.make_iterate(rho_star), loss, config);
}

double zero_solution_threshold(const GramStack& gram, const LossSpec& loss)
{
    const Vector& y = loss.labels();
    const Eigen::Index N = y.size();
    Vector rho(N);
    switch (loss.kind()) {
    case LossKind::squared: {
        const double b = y.mean();
        rho = -2.0 * (Vector::Constant(N, b) - y);
        break;
    }
    case LossKind::logistic: {
        const double pos = static_cast<double>((y.array() > 0).count());
        const double neg = static_cast<double>(N) - pos;
        if (pos == 0 || neg == 0)
            throw InputError("zero_solution_threshold: only one class present");
        const double b = std::log(pos / neg);
        rho = -loss_gradient(loss, Vector::Constant(N, b));
        break;
    }
    case LossKind::hinge: {
        // Balanced box-feasible point: weight 1 on the minority class.
        const double pos = static_cast<double>((y.array() > 0).count());
        const double neg = static_cast<double>(N) - pos;
        if (pos == 0 || neg == 0)
            throw InputError("zero_solution_threshold: only one class present");
        for (Eigen::Index i = 0; i < N; ++i)
            rho(i) = y(i) > 0 ? std::min(1.0, neg / pos) : -std::min(1.0, pos / neg);
        break;
    }
    }
    double best = 0.0;
    for (std::size_t m = 0; m < gram.n_kernels(); ++m)
        best = std::max(best, k_norm(gram.K(m), rho, static_cast<std::ptrdiff_t>(m)));
    return best;
}

MklModel extract_model(const std::vector<Vector>& alpha, double b, const GramStack& gram, LossKind loss,
                       double C, double drop_tol)
{
    MklModel model;
    model.loss = loss;
    model.C = C;
    model.b = b;
    model.n_samples = gram.n_samples();
    model.n_bank_kernels = gram.n_kernels();
    double total = 0.0;
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        if (!alpha[m].any())
            continue;
        const double norm = k_norm(gram.K(m), alpha[m], static_cast<std::ptrdiff_t>(m));
        if (norm <= drop_tol)
            continue;
        model.kernel_indices.push_back(m);
        model.alpha.push_back(alpha[m]);
        model.block_norms.push_back(norm);
        total += norm;
    }
    for (double n : model.block_norms)
        model.weights.push_back(n / total);
    return model;
}

MklModel train(const GramStack& gram, const LossSpec& loss, const SolverConfig& config,
               const TrainOptions& options)
{
    config.validate();
    if (gram.empty())
        throw ContractError("train: empty kernel bank");
    if (loss.size() != static_cast<Eigen::Index>(gram.n_samples()))
        throw ContractError("train: labels do not match the kernel bank");

    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const auto M = gram.n_kernels();

    SolverState state = SolverState::zeros(M, gram.n_samples(), config.gamma_init);
    Vector rho = initial_rho(loss);
    Matrix k_rho; // K_m rho for the next start point, when known
    const Vector k_one_sums = kernel_total_sums(gram);

    ModelDiagnostics diag;
    diag.solver = "spicy";
    std::vector<double> gaps;

    for (int t = 1; t <= config.max_outer; ++t) {
        InnerResult inner;
        try {
            inner = newton_inner(state, gram, loss, config, rho, options.counter, std::move(k_rho));
        } catch (const ConvergenceError& e) {
            diag.warnings.push_back(std::string("inner loop did not converge: ") + e.what());
            break;
        } catch (const NumericalError& e) {
            diag.warnings.push_back(std::string("inner loop failed: ") + e.what());
            break;
        }

        DualIterate& it = inner.iterate;
        state = outer_update(state, it, loss, config);

        const RhoKernelTerms terms = RhoKernelTerms::from_products(it.rho, it.k_rho, k_one_sums);
        const GapReport gap = relative_gap(state, gram, loss, config.C, it.rho, &terms);

        TraceRow row;
        row.iter = t;
        row.primal = gap.primal;
        row.dual = gap.dual;
        row.rel_gap = gap.relative_gap;
        row.active_kernels = it.active.size();
        row.seconds = std::chrono::duration<double>(clock::now() - start).count();
        row.inner_steps = inner.newton_steps;
        diag.trace.push_back(row);
        gaps.push_back(gap.relative_gap);
        diag.iterations = t;
        diag.final_gap = gap.relative_gap;
        diag.final_primal = gap.primal;

        if (gap.relative_gap <= config.outer_tol) {
            diag.converged = true;
            break;
        }
        const bool capped = state.gamma_bias >= config.gamma_cap;
        const auto w = static_cast<std::size_t>(config.stagnation_window);
        if (capped && gaps.size() > w) {
            const double then = gaps[gaps.size() - 1 - w];
            const double change = std::abs(gap.relative_gap - then) / std::max(std::abs(then), 1e-300);
            if (change < config.stagnation_rel) {
                diag.warnings.push_back("duality gap stagnated at the penalty cap");
                break;
            }
        }
        rho = warm_start(loss, it.rho);
        k_rho = shifted_products(gram, it.rho, std::move(it.k_rho), rho, options.counter);
    }

    if (!diag.converged && diag.warnings.empty()) {
        std::ostringstream os;
        os << "reached max_outer = " << config.max_outer << " with relative gap " << diag.final_gap;
        diag.warnings.push_back(os.str());
    }

    MklModel model = extract_model(state.alpha, state.b, gram, loss.kind(), config.C, config.drop_tol);
    if (model.n_active() == 0)
        diag.warnings.push_back("all kernel blocks are zero (C too large?)");
    for (const auto& w : diag.warnings)
        warn(w);
    model.diagnostics = std::move(diag);
    return model;
}

Vector predict(const MklModel& model, std::span<const Matrix> gram_rows, Eigen::Index n_test)
{
    if (gram_rows.size() != model.n_active())
        throw ContractError("predict: expected one Gram block per active kernel (" +
                            std::to_string(model.n_active()) + "), got " + std::to_string(gram_rows.size()));
    if (gram_rows.empty()) {
        if (n_test < 0)
            throw ContractError("predict: a model without active kernels needs n_test");
        return Vector::Constant(n_test, model.b);
    }
    n_test = gram_rows.front().rows();
    Vector f = Vector::Constant(n_test, model.b);
    for (std::size_t j = 0; j < gram_rows.size(); ++j) {
        const Matrix& rows = gram_rows[j];
        if (rows.rows() != n_test || rows.cols() != model.alpha[j].size())
            throw ContractError("predict: Gram block " + std::to_string(j) + " has the wrong shape");
        f.noalias() += rows * model.alpha[j];
    }
    return f;
}

Vector predict(const MklModel& model, const GramStack& gram)
{
    Vector f = Vector::Constant(static_cast<Eigen::Index>(gram.n_samples()), model.b);
    for (std::size_t j = 0; j < model.n_active(); ++j) {
        const std::size_t m = model.kernel_indices[j];
        if (m >= gram.n_kernels())
            throw ContractError("predict: kernel index out of range");
        f.noalias() += gram.K(m) * model.alpha[j];
    }
    return f;
}

double c_correspondence(const MklModel& model, double C)
{
    double total = 0.0;
    for (double n : model.block_norms)
        total += n;
    if (total == 0.0) {
        warn("C correspondence is degenerate for a zero model");
        return 0.0;
    }
    return C * total;
}

} // namespace mkl
