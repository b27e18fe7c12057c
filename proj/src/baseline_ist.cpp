#include "spicymkl/baseline_ist.hpp"

#include "spicymkl/duality.hpp"
#include "spicymkl/errors.hpp"
#include "spicymkl/solver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace mkl {

namespace {

// Keeps K_m alpha_m for every block so that a step costs one product per
// kernel (K_m grad f).
class IstEngine
{
  public:
    IstEngine(const GramStack& gram, const LossSpec& loss, double C, const IstState& s)
        : gram_(gram), loss_(loss), C_(C), state_(s)
    {
        const auto M = gram.n_kernels();
        const auto N = static_cast<Eigen::Index>(gram.n_samples());
        if (s.alpha.size() != M)
            throw ContractError("IST state does not match the kernel bank");
        if (loss.size() != N)
            throw ContractError("labels do not match the kernel bank");
        if (!loss.smooth_conjugate())
            throw ContractError("IST needs a differentiable loss (logistic or squared)");
        k_alpha_ = Matrix::Zero(N, static_cast<Eigen::Index>(M));
        k_grad_.resize(N, static_cast<Eigen::Index>(M));
        for (std::size_t m = 0; m < M; ++m)
            if (s.alpha[m].any())
                k_alpha_.col(static_cast<Eigen::Index>(m)).noalias() = gram.K(m) * s.alpha[m];
        z_ = k_alpha_.rowwise().sum();
        z_.array() += s.b;
        loss_value_ = loss_value(loss, z_);
        state_.objective = loss_value_ + C * penalty(state_.alpha, k_alpha_);
    }

    const IstState& state() const noexcept { return state_; }
    const Vector& z() const noexcept { return z_; }

    /// grad f(z) and |grad f(z)|_{K_m} for the current point (fills k_grad_).
    const Vector& prepare_gradient()
    {
        grad_ = loss_gradient(loss_, z_);
        for (std::size_t m = 0; m < gram_.n_kernels(); ++m)
            k_grad_.col(static_cast<Eigen::Index>(m)).noalias() = gram_.K(m) * grad_;
        return grad_;
    }

    /// Kernel terms of rho = -grad f(z).
    RhoKernelTerms dual_terms(const Vector& k_one_sums) const
    {
        return RhoKernelTerms::from_products(-grad_, -k_grad_, k_one_sums);
    }

    /// Proximal-gradient step from the gradient computed by prepare_gradient().
    void step(double min_step)
    {
        const auto M = gram_.n_kernels();
        const auto Mi = static_cast<Eigen::Index>(M);
        Vector aa(Mi), ag(Mi), gg(Mi);
        for (Eigen::Index m = 0; m < Mi; ++m) {
            aa(m) = state_.alpha[static_cast<std::size_t>(m)].dot(k_alpha_.col(m));
            ag(m) = grad_.dot(k_alpha_.col(m));
            gg(m) = grad_.dot(k_grad_.col(m));
        }
        const double grad_sum = grad_.sum();

        std::vector<Vector> alpha_new(M);
        Matrix k_alpha_new(k_alpha_.rows(), Mi);
        double step = state_.step;
        double step_bias = state_.step_bias;
        for (;;) {
            if (step < min_step) {
                std::ostringstream os;
                os << "IST step size underflow (" << step << ")";
                throw NumericalError(os.str());
            }
            double dist = 0.0;
            double pen = 0.0;
            for (std::size_t m = 0; m < M; ++m) {
                const auto col = static_cast<Eigen::Index>(m);
                const double q = aa(col) - 2.0 * step * ag(col) + step * step * gg(col);
                const double norm = q > 0.0 ? std::sqrt(q) : 0.0;
                const double t = step * C_;
                if (norm > t) {
                    const double s = (norm - t) / norm;
                    alpha_new[m] = s * (state_.alpha[m] - step * grad_);
                    k_alpha_new.col(col) = s * (k_alpha_.col(col) - step * k_grad_.col(col));
                    pen += norm - t;
                } else {
                    alpha_new[m] = Vector::Zero(grad_.size());
                    k_alpha_new.col(col).setZero();
                }
                const Vector da = alpha_new[m] - state_.alpha[m];
                dist += da.dot(k_alpha_new.col(col) - k_alpha_.col(col));
            }
            const double b_new = state_.b - step_bias * grad_sum;
            Vector z_new = k_alpha_new.rowwise().sum();
            z_new.array() += b_new;
            const double db = b_new - state_.b;
            const double f_new = loss_value(loss_, z_new);
            const double model =
                loss_value_ + grad_.dot(z_new - z_) + dist / (2.0 * step) + db * db / (2.0 * step_bias);
            if (f_new <= model + 1e-12 * std::max(1.0, std::abs(loss_value_))) {
                state_.alpha = std::move(alpha_new);
                state_.b = b_new;
                state_.step = step;
                state_.step_bias = step_bias;
                k_alpha_ = std::move(k_alpha_new);
                z_ = std::move(z_new);
                loss_value_ = f_new;
                state_.objective = f_new + C_ * pen;
                ++state_.iter;
                state_.objective_trace.push_back(state_.objective);
                return;
            }
            step *= 0.5;
            step_bias *= 0.5;
        }
    }

  private:
    double penalty(const std::vector<Vector>& alpha, const Matrix& k_alpha) const
    {
        double p = 0.0;
        for (std::size_t m = 0; m < alpha.size(); ++m) {
            const double q = alpha[m].dot(k_alpha.col(static_cast<Eigen::Index>(m)));
            p += q > 0.0 ? std::sqrt(q) : 0.0;
        }
        return p;
    }

    const GramStack& gram_;
    const LossSpec& loss_;
    double C_;
    IstState state_;
    Matrix k_alpha_;
    Matrix k_grad_;
    Vector z_;
    Vector grad_;
    double loss_value_ = 0.0;
};

} // namespace

double ist_lipschitz_estimate(const GramStack& gram, const LossSpec& loss)
{
    const auto N = static_cast<Eigen::Index>(gram.n_samples());
    auto apply = [&](const Vector& x) {
        Vector out = Vector::Zero(N);
        for (std::size_t m = 0; m < gram.n_kernels(); ++m)
            out.noalias() += gram.K(m) * x;
        return out;
    };
    Vector x = Vector::Ones(N);
    x(0) += 0.1;
    x.normalize();
    double lambda = 0.0;
    for (int k = 0; k < 100; ++k) {
        Vector y = apply(x);
        const double next = x.dot(y);
        const double ny = y.norm();
        if (ny == 0.0)
            break;
        x = y / ny;
        if (k > 5 && std::abs(next - lambda) <= 1e-10 * std::abs(next)) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return loss_curvature_bound(loss) * lambda;
}

IstState ist_init(const GramStack& gram, const LossSpec& loss, double C)
{
    if (!(C > 0.0))
        throw ConfigError("C must be positive");
    IstState s;
    s.alpha.assign(gram.n_kernels(), Vector::Zero(static_cast<Eigen::Index>(gram.n_samples())));
    s.b = 0.0;
    s.step = 0.5 / ist_lipschitz_estimate(gram, loss);
    s.step_bias = 0.5 / (loss_curvature_bound(loss) * static_cast<double>(gram.n_samples()));
    IstEngine engine(gram, loss, C, s);
    s.objective = engine.state().objective;
    return s;
}

IstState ist_step(const IstState& state, const GramStack& gram, const LossSpec& loss, double C,
                  double min_step)
{
    if (!(state.step > 0.0) || !(state.step_bias > 0.0))
        throw ContractError("IST step size must be positive");
    IstEngine engine(gram, loss, C, state);
    engine.prepare_gradient();
    engine.step(min_step);
    return engine.state();
}

MklModel ist_solve(const GramStack& gram, const LossSpec& loss, double C, const IstOptions& options)
{
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();

    IstEngine engine(gram, loss, C, ist_init(gram, loss, C));
    ModelDiagnostics diag;
    diag.solver = "ist";

    const Vector k_one_sums = kernel_total_sums(gram);
    auto record_gap = [&](int iter) {
        const RhoKernelTerms terms = engine.dual_terms(k_one_sums);
        const Vector rho = -loss_gradient(loss, engine.z());
        const GapReport gap = relative_gap(engine.state().alpha, engine.state().b, gram, loss, C, rho, &terms);
        TraceRow row;
        row.iter = iter;
        row.primal = gap.primal;
        row.dual = gap.dual;
        row.rel_gap = gap.relative_gap;
        for (const auto& a : engine.state().alpha)
            row.active_kernels += a.any() ? 1 : 0;
        row.seconds = std::chrono::duration<double>(clock::now() - start).count();
        diag.trace.push_back(row);
        diag.final_gap = gap.relative_gap;
        return gap.relative_gap;
    };

    for (int k = 0; k < options.max_iter; ++k) {
        const double before = engine.state().objective;
        engine.prepare_gradient();
        if (options.gap_every > 0 && k % options.gap_every == 0) {
            const double gap = record_gap(k);
            if (options.gap_tol > 0.0 && gap <= options.gap_tol) {
                diag.converged = true;
                break;
            }
        }
        try {
            engine.step(options.min_step);
        } catch (const NumericalError& e) {
            diag.warnings.push_back(e.what());
            break;
        }
        const double after = engine.state().objective;
        if (std::abs(before - after) <= options.tol * std::max(std::abs(before), 1e-300)) {
            diag.converged = true;
            break;
        }
    }
    if (diag.trace.empty() || diag.trace.back().iter != engine.state().iter) {
        engine.prepare_gradient();
        record_gap(engine.state().iter);
    }

    const IstState& s = engine.state();
    diag.iterations = s.iter;
    diag.final_primal = s.objective;
    if (!diag.converged && diag.warnings.empty())
        diag.warnings.push_back("IST reached max_iter = " + std::to_string(options.max_iter));

    MklModel model = extract_model(s.alpha, s.b, gram, loss.kind(), C, 1e-10);
    if (model.n_active() == 0)
        diag.warnings.push_back("all kernel blocks are zero (C too large?)");
    for (const auto& w : diag.warnings)
        warn(w);
    model.diagnostics = std::move(diag);
    return model;
}

} // namespace mkl
