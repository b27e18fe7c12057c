#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mkl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class KernelFamily
{
    gaussian,
    polynomial
};

/// Exponent convention of the Gaussian kernel.
///   two_sigma_sq: exp(-|x - x'|^2 / (2 sigma^2))
///   sigma_sq:     exp(-|x - x'|^2 / sigma^2)
enum class GaussianForm
{
    two_sigma_sq,
    sigma_sq
};

/**
 * A single base kernel: family, its parameter, and the input features it
 * reads. An empty feature list means "all features".
 */
struct KernelSpec
{
    KernelFamily family = KernelFamily::gaussian;
    double bandwidth = 1.0;
    int degree = 1;
    std::vector<std::size_t> features;
    GaussianForm gaussian_form = GaussianForm::two_sigma_sq;

    static KernelSpec gaussian(double sigma, std::vector<std::size_t> features = {});
    static KernelSpec polynomial(int degree, std::vector<std::size_t> features = {});

    /// Throws ConfigError when the parameters or the feature subset are invalid
    /// for data of dimension `dim`.
    void validate(std::size_t dim) const;
    std::string describe() const;

    bool operator==(const KernelSpec&) const = default;
};

/// Raw (unnormalized, unjittered) kernel evaluation on the spec's features.
double kernel_value(const KernelSpec& spec,
                    const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b);

/**
 * Gram matrix of one base kernel over the training points.
 *
 * entries = scale * (raw + jitter * I), with scale = 1 / trace(raw + jitter * I)
 * so that trace(entries) == 1. `scale` is kept so that test-time cross-Gram
 * blocks can be normalized identically.
 */
struct GramMatrix
{
    Matrix entries;
    KernelSpec source;
    double scale = 1.0;
    double jitter = 0.0;
};

/// The ordered bank K_1..K_M over one common set of N training points.
class GramStack
{
  public:
    GramStack() = default;
    explicit GramStack(std::vector<GramMatrix> matrices);

    void push_back(GramMatrix gram);

    std::size_t n_samples() const noexcept { return n_samples_; }
    std::size_t n_kernels() const noexcept { return matrices_.size(); }
    bool empty() const noexcept { return matrices_.empty(); }

    const GramMatrix& operator[](std::size_t m) const { return matrices_[m]; }
    const Matrix& K(std::size_t m) const { return matrices_[m].entries; }

    auto begin() const noexcept { return matrices_.begin(); }
    auto end() const noexcept { return matrices_.end(); }

    /// Number of stored doubles (M * N^2).
    std::size_t memory_entries() const noexcept
    {
        return matrices_.size() * n_samples_ * n_samples_;
    }

  private:
    std::vector<GramMatrix> matrices_;
    std::size_t n_samples_ = 0;
};

inline constexpr double kDefaultJitter = 1e-8;

/// Evaluates the kernel on every pair of rows of X, adds the jitter to the
/// diagonal and rescales to unit trace.
GramMatrix compute_gram(const KernelSpec& spec, const Matrix& X,
                        double jitter = kDefaultJitter);

/// Test-vs-train block k(x_test_i, x_train_j) scaled with the training
/// normalization constant of `gram`. No jitter (off-diagonal by definition).
Matrix cross_gram(const GramMatrix& gram, const Matrix& X_test, const Matrix& X_train);

/// a^T K c.
double k_inner(const Matrix& K, const Vector& a, const Vector& c);

/// sqrt(a^T K a). Throws NumericalError naming `kernel_index` when the
/// quadratic form is negative beyond roundoff.
double k_norm(const Matrix& K, const Vector& a, std::ptrdiff_t kernel_index = -1);

/// Which feature subsets each kernel function of the bank is applied to.
enum class SubsetPolicy
{
    joint,  ///< all variables together
    single, ///< each variable separately
    both    ///< joint plus every single variable
};

/// Declarative description of a kernel bank.
struct BankConfig
{
    std::vector<double> bandwidths = default_bandwidths();
    std::vector<int> degrees = {1, 2, 3};
    SubsetPolicy subsets = SubsetPolicy::both;
    double jitter = kDefaultJitter;
    GaussianForm gaussian_form = GaussianForm::two_sigma_sq;
    /// When > 0 the bank is random_kernel_bank(X, random_kernels, seed)
    /// instead of the bandwidth/degree grid.
    std::size_t random_kernels = 0;
    std::uint64_t seed = 0;

    /// 0.1, 0.25, 0.5, 0.75, 1, 2, 3, ..., 20 (24 values).
    static std::vector<double> default_bandwidths();
};

/// Kernel list of the grid bank, in bank order: for every kernel function
/// (Gaussians first, then polynomials), the joint kernel followed by one
/// kernel per variable.
std::vector<KernelSpec> bank_specs(const BankConfig& config, std::size_t dim);

/// Random Gaussian kernels on random feature subsets with width
/// 5 * chi2(1) + 0.1.
std::vector<KernelSpec> random_bank_specs(std::size_t dim, std::size_t count,
                                          std::uint64_t seed);

GramStack build_gram_stack(const Matrix& X, std::span<const KernelSpec> specs,
                           double jitter = kDefaultJitter);

GramStack build_kernel_bank(const Matrix& X, const BankConfig& config);

GramStack random_kernel_bank(const Matrix& X, std::size_t count, std::uint64_t seed,
                             double jitter = kDefaultJitter);

} // namespace mkl
