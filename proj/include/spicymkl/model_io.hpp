#pragma once

#include "spicymkl/data_io.hpp"
#include "spicymkl/kernel_engine.hpp"
#include "spicymkl/state.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace mkl {

/// What predict-time Gram rows need to be computed exactly like the
/// training blocks.
struct KernelRecord
{
    KernelSpec spec;
    double scale = 1.0;
    double jitter = 0.0;
};

/// A trained model with everything needed to evaluate it on new raw inputs.
struct ModelFile
{
    static constexpr int kFormatVersion = 1;

    MklModel model;
    std::vector<KernelRecord> kernels; ///< aligned with model.kernel_indices
    Standardizer standardizer;         ///< empty mean: inputs used as-is
    bool classification = true;
    LabelMapping label_mapping;
    Matrix X_train; ///< training inputs after standardization

    std::size_t dim() const noexcept { return static_cast<std::size_t>(X_train.cols()); }
};

ModelFile make_model_file(MklModel model, const GramStack& gram, const Matrix& X_train,
                          const Standardizer& standardizer, bool classification,
                          const LabelMapping& mapping);

void save_model(const ModelFile& file, const std::filesystem::path& path);
void write_model(const ModelFile& file, std::ostream& out);
/// Throws InputError on unreadable, malformed or wrong-version files.
ModelFile load_model(const std::filesystem::path& path);
ModelFile read_model(std::istream& in, const std::string& source = "<stream>");

/// Decision values on raw (unstandardized) inputs. Throws InputError on a
/// dimension mismatch.
Vector decision_values(const ModelFile& file, const Matrix& X_raw);

/// Trace CSV: iter,primal_obj,dual_obj,rel_gap,active_kernels,seconds
void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out);
void save_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);
std::vector<TraceRow> load_trace_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

} // namespace mkl
