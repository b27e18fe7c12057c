#pragma once

#include "spicymkl/kernel_engine.hpp"
#include "spicymkl/state.hpp"

#include <filesystem>
#include <string>

namespace mkl {

/// Solver and kernel-bank settings read from a JSON document of the form
///   { "solver": { "C": 0.05, "outer_tol": 0.01, ... },
///     "bank":   { "bandwidths": [...], "degrees": [...], "subsets": "both", ... } }
/// Keys that are absent keep their defaults; unknown keys are rejected.
struct ConfigFile
{
    SolverConfig solver;
    BankConfig bank;
};

ConfigFile parse_config(const std::string& text, const std::string& source = "<string>");
ConfigFile load_config(const std::filesystem::path& path);
std::string dump_config(const ConfigFile& config);

SubsetPolicy parse_subset_policy(std::string_view name);
std::string_view to_string(SubsetPolicy policy);

} // namespace mkl
