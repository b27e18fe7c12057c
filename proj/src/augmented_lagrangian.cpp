#include "spicymkl/augmented_lagrangian.hpp"

#include "spicymkl/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mkl {

Vector soft_threshold(const Vector& v, const Matrix& K, double threshold)
{
    if (threshold < 0.0)
        throw ContractError("soft_threshold: negative threshold");
    const double norm = k_norm(K, v);
    if (norm <= threshold || norm == 0.0)
        return Vector::Zero(v.size());
    return v * ((norm - threshold) / norm);
}

AugmentedLagrangian::AugmentedLagrangian(const GramStack& gram, const LossSpec& loss,
                                         const SolverState& state, double C,
                                         KernelOpCounter* counter)
    : gram_(gram), loss_(loss), state_(state), C_(C), counter_(counter)
{
    const auto M = gram.n_kernels();
    const auto N = static_cast<Eigen::Index>(gram.n_samples());
    if (state.n_kernels() != M || state.gamma_kernel.size() != static_cast<Eigen::Index>(M))
        throw ContractError("solver state does not match the kernel bank");
    if (loss.size() != N)
        throw ContractError("labels do not match the kernel bank");
    if (!loss.smooth_conjugate() && (state.xi.size() != N || state.zeta.size() != N))
        throw ContractError("hinge path needs slack vectors of length N");

    k_alpha_ = Matrix::Zero(N, static_cast<Eigen::Index>(M));
    alpha_sq_ = Vector::Zero(static_cast<Eigen::Index>(M));
    trace_root_.resize(static_cast<Eigen::Index>(M));
    for (std::size_t m = 0; m < M; ++m)
        trace_root_(static_cast<Eigen::Index>(m)) = std::sqrt(std::max(gram.K(m).trace(), 0.0));
    for (std::size_t m = 0; m < M; ++m) {
        if (state.block_is_zero(m))
            continue;
        const auto col = static_cast<Eigen::Index>(m);
        k_alpha_.col(col).noalias() = gram.K(m) * state.alpha[m];
        alpha_sq_(col) = state.alpha[m].dot(k_alpha_.col(col));
        if (counter_)
            ++counter_->setup_products;
    }
}

double AugmentedLagrangian::v_norm(std::size_t m, const Vector& rho,
                                   const Eigen::Ref<const Vector>& k_rho_m) const
{
    const auto col = static_cast<Eigen::Index>(m);
    const double g = state_.gamma_kernel(col);
    // |alpha + g rho|^2 = a'Ka + 2 g rho'Ka + g^2 rho'K rho
    const double q = alpha_sq_(col) + 2.0 * g * rho.dot(k_alpha_.col(col)) + g * g * rho.dot(k_rho_m);
    return q > 0.0 ? std::sqrt(q) : 0.0;
}

DualIterate AugmentedLagrangian::make_iterate(Vector rho, Matrix k_rho) const
{
    const auto M = gram_.n_kernels();
    if (rho.size() != static_cast<Eigen::Index>(gram_.n_samples()))
        throw ContractError("rho has the wrong length");
    DualIterate it;
    it.rho = std::move(rho);
    if (k_rho.size() > 0) {
        if (k_rho.rows() != it.rho.size() || k_rho.cols() != static_cast<Eigen::Index>(M))
            throw ContractError("make_iterate: K rho cache has the wrong shape");
        it.k_rho = std::move(k_rho);
    } else {
        it.k_rho.resize(it.rho.size(), static_cast<Eigen::Index>(M));
        for (std::size_t m = 0; m < M; ++m)
            it.k_rho.col(static_cast<Eigen::Index>(m)).noalias() = gram_.K(m) * it.rho;
        if (counter_)
            counter_->iterate_products += M;
    }
    refresh(it);
    return it;
}

void AugmentedLagrangian::refresh(DualIterate& it) const
{
    const auto M = gram_.n_kernels();
    if (it.v_norm.size() != static_cast<Eigen::Index>(M))
        it.v_norm = Vector::Zero(static_cast<Eigen::Index>(M));
    it.active.clear();
    for (std::size_t m = 0; m < M; ++m) {
        if (it.is_stale(m))
            continue;
        const double n = v_norm(m, it.rho, it.k_rho.col(static_cast<Eigen::Index>(m)));
        it.v_norm(static_cast<Eigen::Index>(m)) = n;
        if (n > threshold(m))
            it.active.push_back(m);
    }
}

void AugmentedLagrangian::sync(DualIterate& it) const
{
    std::size_t count = 0;
    for (std::size_t m = 0; m < it.stale.size(); ++m) {
        if (!it.stale[m])
            continue;
        it.k_rho.col(static_cast<Eigen::Index>(m)).noalias() = gram_.K(m) * it.rho;
        ++count;
    }
    it.stale.clear();
    if (counter_)
        counter_->iterate_products += count;
    refresh(it);
}

Vector AugmentedLagrangian::kv(std::size_t m, const DualIterate& it) const
{
    const auto col = static_cast<Eigen::Index>(m);
    return k_alpha_.col(col) + state_.gamma_kernel(col) * it.k_rho.col(col);
}

double AugmentedLagrangian::smooth_part(const Vector& rho) const
{
    const double bias = state_.b + state_.gamma_bias * rho.sum();
    double value = bias * bias / (2.0 * state_.gamma_bias);
    if (loss_.smooth_conjugate())
        return value + conjugate_eval(loss_, rho).value;

    const Vector& y = loss_.labels();
    value += hinge_conjugate_linear(loss_, rho);
    double xi_pen = 0.0;
    double zeta_pen = 0.0;
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
        const double u = y(i) * rho(i);
        const double a = state_.xi(i) - state_.gamma_xi * (1.0 - u);
        if (a > 0.0)
            xi_pen += a * a;
        const double c = state_.zeta(i) - state_.gamma_zeta * u;
        if (c > 0.0)
            zeta_pen += c * c;
    }
    return value + xi_pen / (2.0 * state_.gamma_xi) + zeta_pen / (2.0 * state_.gamma_zeta);
}

double AugmentedLagrangian::value(const DualIterate& it) const
{
    double value = smooth_part(it.rho);
    for (std::size_t m : it.active) {
        const auto col = static_cast<Eigen::Index>(m);
        const double excess = it.v_norm(col) - threshold(m);
        value += excess * excess / (2.0 * state_.gamma_kernel(col));
    }
    return value;
}

double AugmentedLagrangian::value_along(const DualIterate& it, const Vector& delta, double step,
                                        const std::vector<std::size_t>& candidates,
                                        const Vector& kv_dot_dir, const Vector& dir_sq) const
{
    const Vector rho = it.rho + step * delta;
    double value = smooth_part(rho);
    for (std::size_t m : candidates) {
        const auto col = static_cast<Eigen::Index>(m);
        const double g = state_.gamma_kernel(col);
        const double base = it.v_norm(col);
        const double q = base * base + 2.0 * step * g * kv_dot_dir(col) + step * step * g * g * dir_sq(col);
        const double excess = (q > 0.0 ? std::sqrt(q) : 0.0) - threshold(m);
        if (excess > 0.0)
            value += excess * excess / (2.0 * g);
    }
    if (counter_)
        counter_->linesearch_norms += candidates.size();
    return value;
}

Vector AugmentedLagrangian::gradient_base(const Vector& rho) const
{
    const Eigen::Index N = rho.size();
    Vector g(N);
    if (loss_.smooth_conjugate()) {
        g = conjugate_eval(loss_, rho).gradient;
    } else {
        const Vector& y = loss_.labels();
        g = -y;
        for (Eigen::Index i = 0; i < N; ++i) {
            const double u = y(i) * rho(i);
            const double a = state_.xi(i) - state_.gamma_xi * (1.0 - u);
            if (a > 0.0)
                g(i) += y(i) * a;
            const double c = state_.zeta(i) - state_.gamma_zeta * u;
            if (c > 0.0)
                g(i) -= y(i) * c;
        }
    }
    g.array() += state_.b + state_.gamma_bias * rho.sum();
    return g;
}

Matrix AugmentedLagrangian::hessian_base(const Vector& rho) const
{
    const Eigen::Index N = rho.size();
    Vector diag(N);
    if (loss_.smooth_conjugate()) {
        diag = conjugate_eval(loss_, rho).hessian_diag;
    } else {
        const Vector& y = loss_.labels();
        diag.setZero();
        for (Eigen::Index i = 0; i < N; ++i) {
            const double u = y(i) * rho(i);
            if (state_.xi(i) - state_.gamma_xi * (1.0 - u) > 0.0)
                diag(i) += state_.gamma_xi;
            if (state_.zeta(i) - state_.gamma_zeta * u > 0.0)
                diag(i) += state_.gamma_zeta;
        }
    }
    Matrix H = Matrix::Constant(N, N, state_.gamma_bias);
    H.diagonal() += diag;
    return H;
}

void AugmentedLagrangian::add_rank_one_terms(Matrix& H, const Matrix& W) const
{
    if (W.cols() == 0)
        return;
    Matrix R = Matrix::Zero(H.rows(), H.cols());
    R.selfadjointView<Eigen::Lower>().rankUpdate(W);
    R.triangularView<Eigen::StrictlyUpper>() = R.transpose();
    H += R;
}

Vector AugmentedLagrangian::gradient(const DualIterate& it) const
{
    Vector g = gradient_base(it.rho);
    for (std::size_t m : it.active) {
        const auto col = static_cast<Eigen::Index>(m);
        const double shrink = 1.0 - threshold(m) / it.v_norm(col);
        const Vector st = shrink * (state_.alpha[m] + state_.gamma_kernel(col) * it.rho);
        g.noalias() += gram_.K(m) * st;
        if (counter_)
            ++counter_->gradient_products;
    }
    return g;
}

Vector AugmentedLagrangian::gradient_from_cache(const DualIterate& it) const
{
    Vector g = gradient_base(it.rho);
    for (std::size_t m : it.active) {
        const double shrink = 1.0 - threshold(m) / it.v_norm(static_cast<Eigen::Index>(m));
        g += shrink * kv(m, it);
    }
    return g;
}

// Hessian of the kernel term for an active block:
//   gamma_m ((1 - q) K_m + q w w^T),  q = gamma_m C / |v_m|,  w = K_m v_m / |v_m|.
Matrix AugmentedLagrangian::hessian(const DualIterate& it) const
{
    Matrix H = hessian_base(it.rho);
    Matrix W(H.rows(), static_cast<Eigen::Index>(it.active.size()));
    Eigen::Index k = 0;
    for (std::size_t m : it.active) {
        const auto col = static_cast<Eigen::Index>(m);
        const double gm = state_.gamma_kernel(col);
        const double norm = it.v_norm(col);
        const double q = threshold(m) / norm;
        H.noalias() += (gm * (1.0 - q)) * gram_.K(m);
        W.col(k++) = (std::sqrt(gm * q) / norm) * kv(m, it);
        if (counter_)
            ++counter_->hessian_blocks;
    }
    add_rank_one_terms(H, W);
    return H;
}

void AugmentedLagrangian::gradient_and_hessian(const DualIterate& it, Vector& g, Matrix& H) const
{
    g = gradient_base(it.rho);
    H = hessian_base(it.rho);
    Matrix W(H.rows(), static_cast<Eigen::Index>(it.active.size()));
    Eigen::Index k = 0;
    for (std::size_t m : it.active) {
        const auto col = static_cast<Eigen::Index>(m);
        const double gm = state_.gamma_kernel(col);
        const double norm = it.v_norm(col);
        const double q = threshold(m) / norm;
        const Matrix& K = gram_.K(m);
        g.noalias() += K * ((1.0 - q) * (state_.alpha[m] + gm * it.rho));
        H.noalias() += (gm * (1.0 - q)) * K;
        W.col(k++) = (std::sqrt(gm * q) / norm) * kv(m, it);
        if (counter_) {
            ++counter_->gradient_products;
            ++counter_->hessian_blocks;
        }
    }
    add_rank_one_terms(H, W);
}

double al_objective(const Vector& rho, const SolverState& state, const GramStack& gram,
                    const LossSpec& loss, double C)
{
    AugmentedLagrangian al(gram, loss, state, C);
    return al.value(al.make_iterate(rho));
}

Vector al_gradient(const Vector& rho, const SolverState& state, const GramStack& gram,
                   const LossSpec& loss, double C, KernelOpCounter* counter)
{
    AugmentedLagrangian al(gram, loss, state, C, counter);
    return al.gradient(al.make_iterate(rho));
}

Matrix al_hessian(const Vector& rho, const SolverState& state, const GramStack& gram,
                  const LossSpec& loss, double C, KernelOpCounter* counter)
{
    AugmentedLagrangian al(gram, loss, state, C, counter);
    return al.hessian(al.make_iterate(rho));
}

DampedSolve solve_damped(const Matrix& H, const Vector& rhs, double initial_damping)
{
    const Eigen::Index N = H.rows();
    const double scale = std::max(H.trace() / static_cast<double>(N), std::numeric_limits<double>::min());
    {
        Eigen::LLT<Matrix> llt(H);
        if (llt.info() == Eigen::Success) {
            Vector x = llt.solve(rhs);
            if (x.allFinite())
                return {std::move(x), 0.0};
        }
    }
    double lambda = initial_damping > 0.0 ? initial_damping : 1e-8 * scale;
    const double limit = std::max(1e-2 * scale, lambda);
    Matrix damped = H;
    for (; lambda <= limit * (1.0 + 1e-12); lambda *= 10.0) {
        damped.diagonal() = H.diagonal().array() + lambda;
        Eigen::LLT<Matrix> llt(damped);
        if (llt.info() != Eigen::Success)
            continue;
        Vector x = llt.solve(rhs);
        if (x.allFinite())
            return {std::move(x), lambda};
    }
    std::ostringstream os;
    os << "Hessian factorization failed after damping up to " << limit << " (N=" << N
       << ", trace/N=" << scale << ", min diag=" << H.diagonal().minCoeff() << ")";
    throw NumericalError(os.str());
}

InnerResult newton_inner(const SolverState& state, const GramStack& gram, const LossSpec& loss,
                         const SolverConfig& config, Vector rho_start, KernelOpCounter* counter,
                         Matrix k_rho_start)
{
    if (loss.kind() == LossKind::logistic && !in_conjugate_domain(loss, rho_start))
        throw ContractError("newton_inner: logistic start point outside 0 < y*rho < 1");

    AugmentedLagrangian al(gram, loss, state, config.C, counter);
    const auto M = gram.n_kernels();
    const Eigen::Index N = static_cast<Eigen::Index>(gram.n_samples());

    InnerResult result;
    DualIterate it = al.make_iterate(std::move(rho_start), std::move(k_rho_start));
    double phi = al.value(it);
    result.objective_path.push_back(phi);

    Matrix k_dir(N, static_cast<Eigen::Index>(M));
    Vector kv_dot_dir = Vector::Zero(static_cast<Eigen::Index>(M));
    Vector dir_sq = Vector::Zero(static_cast<Eigen::Index>(M));
    std::vector<std::size_t> candidates;
    candidates.reserve(M);
    std::vector<char> skip(M, 0);

    for (int step_count = 0;; ++step_count) {
        // The stopping test reuses cached products; the Newton system is
        // assembled in one pass over the active blocks.
        const double gnorm = al.gradient_from_cache(it).lpNorm<Eigen::Infinity>();
        if (gnorm <= config.inner_tol) {
            al.sync(it);
            result.iterate = std::move(it);
            result.newton_steps = step_count;
            result.grad_norm = gnorm;
            return result;
        }
        if (step_count >= config.max_inner) {
            std::ostringstream os;
            os << "Newton inner loop reached " << config.max_inner << " steps with |grad|_inf = " << gnorm;
            throw ConvergenceError(os.str(), gnorm);
        }

        Vector g;
        Matrix H;
        const std::size_t grad_before = counter ? counter->gradient_products : 0;
        const std::size_t hess_before = counter ? counter->hessian_blocks : 0;
        al.gradient_and_hessian(it, g, H);
        if (counter && counter->record_steps)
            counter->steps.push_back({counter->gradient_products - grad_before,
                                      counter->hessian_blocks - hess_before, it.rho});
        Vector delta = solve_damped(H, -g, config.hessian_damping).solution;
        double slope = g.dot(delta);
        if (!(slope < 0.0)) {
            const double scale = H.trace() / static_cast<double>(N);
            delta = solve_damped(H + 1e-6 * scale * Matrix::Identity(N, N), -g, 0.0).solution;
            slope = g.dot(delta);
            if (!(slope < 0.0)) {
                delta = -g;
                slope = -g.squaredNorm();
            }
        }

        // A kernel that is inactive now stays inactive on the whole segment
        // when |v_m|_K + gamma_m |delta|_K <= gamma_m C; such kernels need no
        // product with the direction. Their K_m rho column goes stale and
        // v_norm keeps an upper bound instead.
        const double dnorm = delta.norm();
        std::size_t dir_count = 0;
        candidates.clear();
        for (std::size_t m = 0; m < M; ++m) {
            const auto col = static_cast<Eigen::Index>(m);
            const double gm = state.gamma_kernel(col);
            const double t = gm * config.C;
            const double reach = gm * al.norm_bound(m) * dnorm;
            skip[m] = 0;
            if (it.v_norm(col) <= t && it.v_norm(col) + reach <= t) {
                skip[m] = 1;
                continue;
            }
            if (it.is_stale(m)) {
                it.k_rho.col(col).noalias() = gram.K(m) * it.rho;
                it.stale[m] = 0;
                it.v_norm(col) = al.v_norm(m, it.rho, it.k_rho.col(col));
                if (counter)
                    ++counter->iterate_products;
                if (it.v_norm(col) <= t && it.v_norm(col) + reach <= t) {
                    skip[m] = 1;
                    continue;
                }
            }
            k_dir.col(col).noalias() = gram.K(m) * delta;
            ++dir_count;
            kv_dot_dir(col) = al.kv(m, it).dot(delta);
            dir_sq(col) = delta.dot(k_dir.col(col));
            const double base = it.v_norm(col);
            const double q_end = base * base + 2.0 * gm * kv_dot_dir(col) + gm * gm * dir_sq(col);
            if (base > t || (q_end > 0.0 && std::sqrt(q_end) > t))
                candidates.push_back(m);
        }
        if (counter)
            counter->direction_products += dir_count;

        auto advance = [&](DualIterate& target, double step) {
            target.rho += step * delta;
            if (target.stale.empty())
                target.stale.assign(M, 0);
            for (std::size_t m = 0; m < M; ++m) {
                const auto col = static_cast<Eigen::Index>(m);
                if (skip[m]) {
                    target.stale[m] = 1;
                    target.v_norm(col) += step * state.gamma_kernel(col) * al.norm_bound(m) * dnorm;
                } else {
                    target.k_rho.col(col) += step * k_dir.col(col);
                }
            }
            al.refresh(target);
        };

        double step = 1.0;
        bool accepted = false;
        while (!accepted) {
            if (step < config.min_step) {
                std::ostringstream os;
                os << "Armijo line search stalled (step < " << config.min_step << ", |grad|_inf = " << gnorm
                   << ", phi = " << phi << ")";
                throw NumericalError(os.str());
            }
            const Vector trial = it.rho + step * delta;
            if (loss.kind() == LossKind::logistic && !in_conjugate_domain(loss, trial)) {
                step *= config.backtrack;
                continue;
            }
            const double phi_trial = al.value_along(it, delta, step, candidates, kv_dot_dir, dir_sq);
            if (phi_trial <= phi + config.armijo_c1 * step * slope) {
                accepted = true;
                break;
            }
            // Near the solution the decrease can fall below the resolution
            // of phi; accept a full step that still shrinks the gradient.
            const double noise = 1e-13 * std::max(1.0, std::abs(phi));
            if (step == 1.0 && phi_trial <= phi + noise) {
                DualIterate probe = it;
                advance(probe, 1.0);
                if (al.gradient_from_cache(probe).lpNorm<Eigen::Infinity>() < gnorm) {
                    accepted = true;
                    break;
                }
            }
            step *= config.backtrack;
        }

        advance(it, step);
        phi = al.value(it);
        result.objective_path.push_back(phi);
    }
}

} // namespace mkl
