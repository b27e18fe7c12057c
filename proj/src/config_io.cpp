#include "spicymkl/config_io.hpp"

#include "spicymkl/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace mkl {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where)
{
    for (const auto& [key, value] : obj.items())
        if (!known.count(key))
            throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void take(const json& obj, const char* key, T& target)
{
    if (obj.contains(key))
        target = obj.at(key).get<T>();
}

} // namespace

SubsetPolicy parse_subset_policy(std::string_view name)
{
    if (name == "joint")
        return SubsetPolicy::joint;
    if (name == "single")
        return SubsetPolicy::single;
    if (name == "both")
        return SubsetPolicy::both;
    throw ConfigError("unknown subset policy '" + std::string(name) + "' (joint, single, both)");
}

std::string_view to_string(SubsetPolicy policy)
{
    switch (policy) {
    case SubsetPolicy::joint:
        return "joint";
    case SubsetPolicy::single:
        return "single";
    case SubsetPolicy::both:
        break;
    }
    return "both";
}

ConfigFile parse_config(const std::string& text, const std::string& source)
{
    ConfigFile cfg;
    try {
        const json j = json::parse(text);
        if (!j.is_object())
            throw ConfigError(source + ": expected a JSON object");
        reject_unknown(j, {"solver", "bank"}, source);
        if (j.contains("solver")) {
            const json& s = j["solver"];
            reject_unknown(s,
                           {"C", "gamma_init", "gamma_growth", "gamma_cap", "outer_tol", "inner_tol", "max_outer",
                            "max_inner", "armijo_c1", "backtrack", "min_step", "hessian_damping", "drop_tol",
                            "stagnation_window", "stagnation_rel"},
                           source + ": solver");
            SolverConfig& c = cfg.solver;
            take(s, "C", c.C);
            take(s, "gamma_init", c.gamma_init);
            take(s, "gamma_growth", c.gamma_growth);
            take(s, "gamma_cap", c.gamma_cap);
            take(s, "outer_tol", c.outer_tol);
            take(s, "inner_tol", c.inner_tol);
            take(s, "max_outer", c.max_outer);
            take(s, "max_inner", c.max_inner);
            take(s, "armijo_c1", c.armijo_c1);
            take(s, "backtrack", c.backtrack);
            take(s, "min_step", c.min_step);
            take(s, "hessian_damping", c.hessian_damping);
            take(s, "drop_tol", c.drop_tol);
            take(s, "stagnation_window", c.stagnation_window);
            take(s, "stagnation_rel", c.stagnation_rel);
        }
        if (j.contains("bank")) {
            const json& b = j["bank"];
            reject_unknown(b, {"bandwidths", "degrees", "subsets", "jitter", "gaussian_form", "random_kernels", "seed"},
                           source + ": bank");
            BankConfig& c = cfg.bank;
            take(b, "bandwidths", c.bandwidths);
            take(b, "degrees", c.degrees);
            take(b, "jitter", c.jitter);
            take(b, "random_kernels", c.random_kernels);
            take(b, "seed", c.seed);
            if (b.contains("subsets"))
                c.subsets = parse_subset_policy(b["subsets"].get<std::string>());
            if (b.contains("gaussian_form")) {
                const auto form = b["gaussian_form"].get<std::string>();
                if (form == "two_sigma_sq")
                    c.gaussian_form = GaussianForm::two_sigma_sq;
                else if (form == "sigma_sq")
                    c.gaussian_form = GaussianForm::sigma_sq;
                else
                    throw ConfigError(source + ": unknown gaussian_form '" + form + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
    cfg.solver.validate();
    return cfg;
}

ConfigFile load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string dump_config(const ConfigFile& config)
{
    const SolverConfig& s = config.solver;
    const BankConfig& b = config.bank;
    json j;
    j["solver"] = {{"C", s.C},
                   {"gamma_init", s.gamma_init},
                   {"gamma_growth", s.gamma_growth},
                   {"gamma_cap", s.gamma_cap},
                   {"outer_tol", s.outer_tol},
                   {"inner_tol", s.inner_tol},
                   {"max_outer", s.max_outer},
                   {"max_inner", s.max_inner},
                   {"armijo_c1", s.armijo_c1},
                   {"backtrack", s.backtrack},
                   {"min_step", s.min_step},
                   {"hessian_damping", s.hessian_damping},
                   {"drop_tol", s.drop_tol},
                   {"stagnation_window", s.stagnation_window},
                   {"stagnation_rel", s.stagnation_rel}};
    j["bank"] = {{"bandwidths", b.bandwidths},
                 {"degrees", b.degrees},
                 {"subsets", std::string(to_string(b.subsets))},
                 {"jitter", b.jitter},
                 {"gaussian_form", b.gaussian_form == GaussianForm::two_sigma_sq ? "two_sigma_sq" : "sigma_sq"},
                 {"random_kernels", b.random_kernels},
                 {"seed", b.seed}};
    return j.dump(2);
}

} // namespace mkl
