#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Vector random_labels(Eigen::Index n, Rng& rng)
{
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i)
        y(i) = (i % 2 == 0) ? 1.0 : -1.0;
    std::shuffle(y.begin(), y.end(), rng);
    return y;
}

mkl::GramStack random_stack(Eigen::Index n, std::size_t m, Rng& rng)
{
    mkl::GramStack stack;
    for (std::size_t k = 0; k < m; ++k) {
        mkl::GramMatrix g;
        g.entries = random_spd(n, rng);
        g.scale = 1.0 / g.entries.trace();
        g.entries *= g.scale;
        stack.push_back(std::move(g));
    }
    return stack;
}

Matrix random_spd(Eigen::Index n, Rng& rng, double min_eig)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix A(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            A(i, j) = nd(rng);
    Matrix K = A * A.transpose() / static_cast<double>(n);
    K.diagonal().array() += min_eig;
    return 0.5 * (K + K.transpose());
}

Vector random_vector(Eigen::Index n, Rng& rng, double scale)
{
    std::normal_distribution<double> nd(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = nd(rng);
    return v;
}

double knorm_eig(const Matrix& K, const Vector& v)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(K);
    const Vector c = es.eigenvectors().transpose() * v;
    double s = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i)
        s += std::max(es.eigenvalues()(i), 0.0) * c(i) * c(i);
    return std::sqrt(s);
}

Vector prox_numeric(const Matrix& K, const Vector& v, double t)
{
    const double eps = 1e-14;
    auto objective = [&](const Vector& u) {
        const Vector d = u - v;
        return t * std::sqrt(u.dot(K * u) + eps * eps) + 0.5 * d.dot(K * d);
    };
    Vector u = 0.5 * v;
    double f = objective(u);
    for (int iter = 0; iter < 500; ++iter) {
        const Vector Ku = K * u;
        const double s = std::sqrt(u.dot(Ku) + eps * eps);
        const Vector grad = t * Ku / s + K * (u - v);
        if (grad.lpNorm<Eigen::Infinity>() < 1e-13)
            break;
        Matrix H = K + (t / s) * K - (t / (s * s * s)) * (Ku * Ku.transpose());
        H.diagonal().array() += 1e-14;
        Vector step = -H.ldlt().solve(grad);
        if (!(grad.dot(step) < 0.0))
            step = -grad;
        double a = 1.0;
        while (a > 1e-20) {
            const Vector cand = u + a * step;
            const double fc = objective(cand);
            if (fc <= f + 1e-4 * a * grad.dot(step)) {
                u = cand;
                f = fc;
                break;
            }
            a *= 0.5;
        }
        if (a <= 1e-20)
            break;
    }
    return u;
}

Vector project_ellipsoid(const Matrix& K, const Vector& p, double r)
{
    if (p.dot(K * p) <= r * r)
        return p;
    // x(mu) = (I + mu K)^{-1} p; x(mu)'K x(mu) decreases in mu.
    auto at = [&](double mu) {
        Matrix A = mu * K;
        A.diagonal().array() += 1.0;
        return Vector(A.ldlt().solve(p));
    };
    double lo = 0.0;
    double hi = 1.0;
    while (at(hi).dot(K * at(hi)) > r * r)
        hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const Vector x = at(mid);
        if (x.dot(K * x) > r * r)
            lo = mid;
        else
            hi = mid;
    }
    return at(hi);
}

double ball_distance_numeric(const Matrix& K, const Vector& v, double gamma, double C)
{
    // Work in the eigenbasis of K, where the ellipsoid projection is a
    // one-dimensional root find in the multiplier.
    const double r = gamma * C;
    Eigen::SelfAdjointEigenSolver<Matrix> es(K);
    const Vector lam = es.eigenvalues().cwiseMax(0.0);
    const Vector c = es.eigenvectors().transpose() * v;
    auto quad_form = [&](const Vector& x) { return (lam.array() * x.array().square()).sum(); };
    auto project = [&](const Vector& p) -> Vector {
        if (quad_form(p) <= r * r)
            return p;
        auto at = [&](double mu) { return Vector(p.array() / (1.0 + mu * lam.array())); };
        double lo = 0.0, hi = 1.0;
        while (quad_form(at(hi)) > r * r)
            hi *= 2.0;
        for (int i = 0; i < 200 && hi - lo > 1e-300; ++i) {
            const double mid = 0.5 * (lo + hi);
            (quad_form(at(mid)) > r * r ? lo : hi) = mid;
        }
        return at(hi);
    };
    auto f = [&](const Vector& u) { return quad_form(u - c) / (2.0 * gamma); };
    const double L = lam.maxCoeff() / gamma;
    const double mu = lam.minCoeff() / gamma;
    Vector u = Vector::Zero(c.size());
    // Projected gradient contracts by 1 - mu / L per step.
    const int iters = static_cast<int>(std::ceil(60.0 * L / mu)) + 100;
    for (int k = 0; k < iters; ++k) {
        const Vector grad = (lam.array() * (u - c).array()).matrix() / gamma;
        const Vector next = project(u - grad / L);
        const double moved = (next - u).lpNorm<Eigen::Infinity>();
        u = next;
        if (moved < 1e-16)
            break;
    }
    return f(u);
}

double conjugate_sup(mkl::LossKind kind, double y, double s)
{
    if (kind == mkl::LossKind::squared) {
        // d/dz (s z - (y - z)^2) = s + 2 (y - z): solve by bisection anyway.
        double lo = -1e6, hi = 1e6;
        for (int i = 0; i < 300; ++i) {
            const double mid = 0.5 * (lo + hi);
            (s + 2.0 * (y - mid) > 0.0 ? lo : hi) = mid;
        }
        const double z = 0.5 * (lo + hi);
        return s * z - (y - z) * (y - z);
    }
    // Logistic: with w = y z, maximize t w - log(1 + e^{-w}), t = s y.
    const double t = s * y;
    if (!(t > -1.0 && t < 0.0))
        return std::numeric_limits<double>::infinity();
    double lo = -800.0, hi = 800.0;
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double g = t + 1.0 / (1.0 + std::exp(mid));
        (g > 0.0 ? lo : hi) = mid;
    }
    const double w = 0.5 * (lo + hi);
    return t * w - std::log1p(std::exp(-w));
}

Matrix kernel_brute(const mkl::KernelSpec& spec, const Matrix& A, const Matrix& B)
{
    std::vector<Eigen::Index> cols;
    if (spec.features.empty())
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            cols.push_back(j);
    else
        for (auto f : spec.features)
            cols.push_back(static_cast<Eigen::Index>(f));
    Matrix K(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j) {
            double sq = 0.0, dot = 0.0;
            for (auto c : cols) {
                sq += (A(i, c) - B(j, c)) * (A(i, c) - B(j, c));
                dot += A(i, c) * B(j, c);
            }
            if (spec.family == mkl::KernelFamily::gaussian) {
                const double s2 = spec.bandwidth * spec.bandwidth;
                K(i, j) = std::exp(-sq / (spec.gaussian_form == mkl::GaussianForm::two_sigma_sq ? 2.0 * s2 : s2));
            } else {
                K(i, j) = std::pow(1.0 + dot, spec.degree);
            }
        }
    return K;
}

Matrix gram_brute(const mkl::KernelSpec& spec, const Matrix& X, double jitter)
{
    Matrix K = kernel_brute(spec, X, X);
    K.diagonal().array() += jitter;
    return K / K.trace();
}

namespace {

double conj_value(const mkl::LossSpec& loss, const Vector& rho)
{
    const Vector& y = loss.labels();
    double v = 0.0;
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
        const double u = y(i) * rho(i);
        switch (loss.kind()) {
        case mkl::LossKind::logistic:
            if (!(u > 0.0 && u < 1.0))
                return std::numeric_limits<double>::infinity();
            v += u * std::log(u) + (1.0 - u) * std::log(1.0 - u);
            break;
        case mkl::LossKind::squared:
            v += -rho(i) * y(i) + rho(i) * rho(i) / 4.0;
            break;
        case mkl::LossKind::hinge:
            v += -y(i) * rho(i);
            break;
        }
    }
    return v;
}

double quad(const Matrix& K, const Vector& v) { return std::sqrt(std::max(v.dot(K * v), 0.0)); }

} // namespace

double al_phi(const Vector& rho, const mkl::SolverState& state, const mkl::GramStack& gram,
              const mkl::LossSpec& loss, double C)
{
    double phi = conj_value(loss, rho);
    for (std::size_t m = 0; m < gram.n_kernels(); ++m) {
        const double g = state.gamma_kernel(static_cast<Eigen::Index>(m));
        const double n = quad(gram.K(m), state.alpha[m] + g * rho);
        const double e = std::max(n - g * C, 0.0);
        phi += e * e / (2.0 * g);
    }
    const double bias = state.b + state.gamma_bias * rho.sum();
    phi += bias * bias / (2.0 * state.gamma_bias);
    if (loss.kind() == mkl::LossKind::hinge) {
        const Vector& y = loss.labels();
        for (Eigen::Index i = 0; i < rho.size(); ++i) {
            const double a = std::max(0.0, state.xi(i) - state.gamma_xi * (1.0 - y(i) * rho(i)));
            const double c = std::max(0.0, state.zeta(i) - state.gamma_zeta * y(i) * rho(i));
            phi += a * a / (2.0 * state.gamma_xi) + c * c / (2.0 * state.gamma_zeta);
        }
    }
    return phi;
}

Vector al_phi_gradient(const Vector& rho, const mkl::SolverState& state, const mkl::GramStack& gram,
                       const mkl::LossSpec& loss, double C)
{
    const Vector& y = loss.labels();
    const Eigen::Index n = rho.size();
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (loss.kind()) {
        case mkl::LossKind::logistic: {
            const double u = y(i) * rho(i);
            g(i) = y(i) * std::log(u / (1.0 - u));
            break;
        }
        case mkl::LossKind::squared:
            g(i) = -y(i) + rho(i) / 2.0;
            break;
        case mkl::LossKind::hinge: {
            g(i) = -y(i);
            const double a = state.xi(i) - state.gamma_xi * (1.0 - y(i) * rho(i));
            const double c = state.zeta(i) - state.gamma_zeta * y(i) * rho(i);
            if (a > 0.0)
                g(i) += a * y(i);
            if (c > 0.0)
                g(i) -= c * y(i);
            break;
        }
        }
    }
    for (std::size_t m = 0; m < gram.n_kernels(); ++m) {
        const double gm = state.gamma_kernel(static_cast<Eigen::Index>(m));
        const Vector v = state.alpha[m] + gm * rho;
        const double nv = quad(gram.K(m), v);
        if (nv > gm * C)
            g += gram.K(m) * (v * ((nv - gm * C) / nv));
    }
    g.array() += state.b + state.gamma_bias * rho.sum();
    return g;
}

double primal(const std::vector<Vector>& alpha, double b, const mkl::GramStack& gram, const mkl::LossSpec& loss,
              double C)
{
    Vector z = Vector::Constant(static_cast<Eigen::Index>(gram.n_samples()), b);
    double pen = 0.0;
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        z += gram.K(m) * alpha[m];
        pen += quad(gram.K(m), alpha[m]);
    }
    const Vector& y = loss.labels();
    double l = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        switch (loss.kind()) {
        case mkl::LossKind::logistic:
            l += std::log1p(std::exp(-y(i) * z(i)));
            break;
        case mkl::LossKind::squared:
            l += (y(i) - z(i)) * (y(i) - z(i));
            break;
        case mkl::LossKind::hinge:
            l += std::max(0.0, 1.0 - y(i) * z(i));
            break;
        }
    }
    return l + C * pen;
}

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h)
{
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        g(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& g, const Vector& x, double h)
{
    Matrix J(x.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        J.col(i) = (g(xp) - g(xm)) / (2.0 * h);
    }
    return 0.5 * (J + J.transpose());
}

BfgsResult bfgs(const std::function<double(const Vector&)>& f, const std::function<Vector(const Vector&)>& grad,
                Vector x0, double tol, int max_iter)
{
    const Eigen::Index n = x0.size();
    BfgsResult r;
    r.x = std::move(x0);
    r.value = f(r.x);
    Vector g = grad(r.x);
    Matrix Hinv = Matrix::Identity(n, n);
    int stalled = 0;
    for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
        r.grad_norm = g.lpNorm<Eigen::Infinity>();
        if (r.grad_norm <= tol)
            break;
        Vector p = -Hinv * g;
        if (!(g.dot(p) < 0.0)) {
            Hinv.setIdentity();
            p = -g;
        }
        double a = 1.0;
        Vector xn;
        double fn = 0.0;
        for (;;) {
            xn = r.x + a * p;
            fn = f(xn);
            if (std::isfinite(fn) && fn <= r.value + 1e-4 * a * g.dot(p))
                break;
            a *= 0.5;
            if (a < 1e-20)
                return r;
        }
        const Vector gn = grad(xn);
        const Vector s = xn - r.x;
        const Vector yv = gn - g;
        const double sy = s.dot(yv);
        if (sy > 1e-300) {
            const Matrix I = Matrix::Identity(n, n);
            const double rho = 1.0 / sy;
            Hinv = (I - rho * s * yv.transpose()) * Hinv * (I - rho * yv * s.transpose()) +
                   rho * s * s.transpose();
        }
        // Stop once the objective no longer moves beyond roundoff.
        stalled = (r.value - fn <= 1e-15 * std::abs(r.value)) ? stalled + 1 : 0;
        r.x = xn;
        r.value = fn;
        g = gn;
        if (stalled >= 10)
            break;
    }
    r.grad_norm = g.lpNorm<Eigen::Infinity>();
    return r;
}

double single_kernel_ridge_objective(const Matrix& K, const Vector& y, double C)
{
    const Eigen::Index n = y.size();
    auto solve = [&](double s, Vector& a, double& b) {
        Matrix A = Matrix::Zero(n + 1, n + 1);
        A.topLeftCorner(n, n) = 2.0 * K;
        A.topLeftCorner(n, n).diagonal().array() += C / s;
        A.topRightCorner(n, 1).setConstant(2.0);
        A.bottomLeftCorner(1, n) = (K * Vector::Ones(n)).transpose();
        A(n, n) = static_cast<double>(n);
        Vector rhs(n + 1);
        rhs.head(n) = 2.0 * y;
        rhs(n) = y.sum();
        const Vector sol = A.fullPivLu().solve(rhs);
        a = sol.head(n);
        b = sol(n);
    };
    auto objective = [&](const Vector& a, double b) {
        const Vector r = y - K * a - Vector::Constant(n, b);
        return r.squaredNorm() + C * std::sqrt(std::max(a.dot(K * a), 0.0));
    };
    auto h = [&](double s) {
        Vector a;
        double b;
        solve(s, a, b);
        return std::sqrt(std::max(a.dot(K * a), 0.0)) - s;
    };
    double lo = 1e-12;
    if (h(lo) <= 0.0)
        return (y.array() - y.mean()).matrix().squaredNorm();
    double hi = 1.0;
    while (h(hi) > 0.0)
        hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) > 0.0 ? lo : hi) = mid;
    }
    Vector a;
    double b;
    solve(0.5 * (lo + hi), a, b);
    return objective(a, b);
}

} // namespace oracle
