#pragma once

#include "spicymkl/kernel_engine.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mkl {

enum class DataFormat
{
    libsvm,
    csv
};

DataFormat parse_data_format(std::string_view name);

enum class TaskKind
{
    automatic,      ///< classification iff at most two distinct integer labels
    classification,
    regression
};

/// Source label values mapped to -1 and +1.
struct LabelMapping
{
    double negative = -1.0;
    double positive = 1.0;
    bool identity() const noexcept { return negative == -1.0 && positive == 1.0; }
};

struct Dataset
{
    Matrix X;
    Vector y;
    std::vector<std::string> feature_names;
    std::string provenance;
    bool classification = true;
    LabelMapping label_mapping;

    std::size_t size() const noexcept { return static_cast<std::size_t>(X.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(X.cols()); }

    /// Throws InputError on non-finite values, non +-1 classification
    /// labels or fewer than `min_samples` rows.
    void validate(std::size_t min_samples = 2) const;
};

struct LoadOptions
{
    TaskKind task = TaskKind::automatic;
    bool csv_header = false;
    /// Force the label mapping (e.g. the one a model was trained with).
    std::optional<LabelMapping> mapping;
    /// Pad libsvm data to at least this many features.
    std::size_t min_dim = 0;
};

/// Parses libsvm ("label idx:val ...", 1-based indices) or CSV (label in the
/// first column). Throws InputError with the line number on malformed input.
Dataset load(const std::filesystem::path& path, DataFormat format, const LoadOptions& options = {});
Dataset parse(std::istream& in, DataFormat format, const LoadOptions& options = {},
              std::string provenance = "<stream>");

/// Writes values with shortest round-trip formatting; load() reads them back
/// bit-identically.
void save(const Dataset& ds, const std::filesystem::path& path, DataFormat format);
void write(const Dataset& ds, std::ostream& out, DataFormat format);

/// Per-feature z-scoring; constant features keep scale 1.
struct Standardizer
{
    Vector mean;
    Vector scale;

    static Standardizer fit(const Matrix& X);
    Matrix apply(const Matrix& X) const;
};

struct Split
{
    Dataset train;
    Dataset test;
    Standardizer standardizer;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Seeded random split; round(fraction * N) training rows. Both parts are
/// standardized with training statistics.
Split split(const Dataset& ds, double fraction, std::uint64_t seed);

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows);

/// Fixture with known relevant kernels: M Gaussian kernels, each on its own
/// two-feature group; labels depend only on the groups of the informative
/// kernels and are split exactly at the median (balanced).
struct SyntheticMkl
{
    Dataset data;
    GramStack gram;
    std::vector<KernelSpec> specs;
    std::vector<std::size_t> informative;
};
SyntheticMkl synth_sparse_mkl(std::size_t n_samples, std::size_t n_kernels, std::size_t n_informative,
                              std::uint64_t seed);

/// Two Gaussian classes in `dim` dimensions: N(0, 4I) versus N(a 1, I) with
/// a = 2 / sqrt(dim). Alternating labels, exactly balanced for even N.
Dataset synth_ringnorm(std::size_t n_samples, std::size_t dim, std::uint64_t seed);

} // namespace mkl
