#include "spicymkl/model_io.hpp"

#include "spicymkl/errors.hpp"
#include "spicymkl/solver.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace mkl {

using nlohmann::json;

namespace {

constexpr const char* kFormatName = "spicymkl-model";

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector json_vector(const json& j)
{
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json spec_json(const KernelSpec& spec)
{
    json j;
    j["family"] = spec.family == KernelFamily::gaussian ? "gaussian" : "polynomial";
    if (spec.family == KernelFamily::gaussian) {
        j["bandwidth"] = spec.bandwidth;
        j["gaussian_form"] = spec.gaussian_form == GaussianForm::two_sigma_sq ? "two_sigma_sq" : "sigma_sq";
    } else {
        j["degree"] = spec.degree;
    }
    j["features"] = spec.features;
    return j;
}

KernelSpec json_spec(const json& j)
{
    KernelSpec spec;
    const auto family = j.at("family").get<std::string>();
    if (family == "gaussian") {
        spec.family = KernelFamily::gaussian;
        spec.bandwidth = j.at("bandwidth").get<double>();
        const auto form = j.value("gaussian_form", std::string("two_sigma_sq"));
        if (form == "two_sigma_sq")
            spec.gaussian_form = GaussianForm::two_sigma_sq;
        else if (form == "sigma_sq")
            spec.gaussian_form = GaussianForm::sigma_sq;
        else
            throw InputError("unknown gaussian_form '" + form + "'");
    } else if (family == "polynomial") {
        spec.family = KernelFamily::polynomial;
        spec.degree = j.at("degree").get<int>();
    } else {
        throw InputError("unknown kernel family '" + family + "'");
    }
    spec.features = j.value("features", std::vector<std::size_t>{});
    return spec;
}

} // namespace

std::string format_number(double value)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

ModelFile make_model_file(MklModel model, const GramStack& gram, const Matrix& X_train,
                          const Standardizer& standardizer, bool classification,
                          const LabelMapping& mapping)
{
    if (static_cast<std::size_t>(X_train.rows()) != gram.n_samples())
        throw ContractError("training inputs do not match the kernel bank");
    ModelFile file;
    for (std::size_t idx : model.kernel_indices) {
        const GramMatrix& g = gram[idx];
        file.kernels.push_back({g.source, g.scale, g.jitter});
    }
    file.model = std::move(model);
    file.standardizer = standardizer;
    file.classification = classification;
    file.label_mapping = mapping;
    file.X_train = X_train;
    return file;
}

void write_model(const ModelFile& file, std::ostream& out)
{
    const MklModel& m = file.model;
    json j;
    j["format"] = kFormatName;
    j["version"] = ModelFile::kFormatVersion;
    j["loss"] = std::string(to_string(m.loss));
    j["C"] = m.C;
    j["b"] = m.b;
    j["n_samples"] = m.n_samples;
    j["n_bank_kernels"] = m.n_bank_kernels;
    j["classification"] = file.classification;
    j["label_mapping"] = {{"negative", file.label_mapping.negative}, {"positive", file.label_mapping.positive}};
    if (file.standardizer.mean.size() > 0)
        j["standardizer"] = {{"mean", vector_json(file.standardizer.mean)},
                             {"scale", vector_json(file.standardizer.scale)}};

    json kernels = json::array();
    for (std::size_t k = 0; k < m.n_active(); ++k) {
        json e = spec_json(file.kernels[k].spec);
        e["bank_index"] = m.kernel_indices[k];
        e["scale"] = file.kernels[k].scale;
        e["jitter"] = file.kernels[k].jitter;
        e["weight"] = m.weights[k];
        e["norm"] = m.block_norms[k];
        e["alpha"] = vector_json(m.alpha[k]);
        kernels.push_back(std::move(e));
    }
    j["kernels"] = std::move(kernels);

    json rows = json::array();
    for (Eigen::Index i = 0; i < file.X_train.rows(); ++i)
        rows.push_back(vector_json(file.X_train.row(i).transpose()));
    j["X_train"] = std::move(rows);

    const ModelDiagnostics& d = m.diagnostics;
    j["diagnostics"] = {{"solver", d.solver},
                        {"converged", d.converged},
                        {"iterations", d.iterations},
                        {"final_gap", d.final_gap},
                        {"final_primal", d.final_primal},
                        {"warnings", d.warnings}};
    out << j.dump(1) << '\n';
}

void save_model(const ModelFile& file, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    write_model(file, out);
}

ModelFile read_model(std::istream& in, const std::string& source)
{
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(source + ": not a model file (" + e.what() + ")");
    }
    try {
        if (j.value("format", std::string()) != kFormatName)
            throw InputError(source + ": not a model file");
        const int version = j.at("version").get<int>();
        if (version != ModelFile::kFormatVersion)
            throw InputError(source + ": unsupported model version " + std::to_string(version));

        ModelFile file;
        MklModel& m = file.model;
        m.loss = parse_loss_kind(j.at("loss").get<std::string>());
        m.C = j.at("C").get<double>();
        m.b = j.at("b").get<double>();
        m.n_samples = j.at("n_samples").get<std::size_t>();
        m.n_bank_kernels = j.at("n_bank_kernels").get<std::size_t>();
        file.classification = j.at("classification").get<bool>();
        file.label_mapping.negative = j.at("label_mapping").at("negative").get<double>();
        file.label_mapping.positive = j.at("label_mapping").at("positive").get<double>();
        if (j.contains("standardizer")) {
            file.standardizer.mean = json_vector(j["standardizer"].at("mean"));
            file.standardizer.scale = json_vector(j["standardizer"].at("scale"));
        }

        const auto& rows = j.at("X_train");
        if (!rows.is_array() || rows.size() != m.n_samples || rows.empty())
            throw InputError(source + ": X_train does not have n_samples rows");
        const auto dim = static_cast<Eigen::Index>(rows.front().size());
        file.X_train.resize(static_cast<Eigen::Index>(rows.size()), dim);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Vector r = json_vector(rows[i]);
            if (r.size() != dim)
                throw InputError(source + ": ragged X_train");
            file.X_train.row(static_cast<Eigen::Index>(i)) = r.transpose();
        }
        if (file.standardizer.mean.size() != 0 &&
            (file.standardizer.mean.size() != dim || file.standardizer.scale.size() != dim))
            throw InputError(source + ": standardizer dimension mismatch");

        for (const auto& e : j.at("kernels")) {
            KernelRecord rec{json_spec(e), e.at("scale").get<double>(), e.value("jitter", 0.0)};
            rec.spec.validate(static_cast<std::size_t>(dim));
            file.kernels.push_back(std::move(rec));
            m.kernel_indices.push_back(e.at("bank_index").get<std::size_t>());
            m.weights.push_back(e.at("weight").get<double>());
            m.block_norms.push_back(e.at("norm").get<double>());
            m.alpha.push_back(json_vector(e.at("alpha")));
            if (m.alpha.back().size() != static_cast<Eigen::Index>(m.n_samples))
                throw InputError(source + ": alpha block has the wrong length");
        }

        if (j.contains("diagnostics")) {
            const auto& d = j["diagnostics"];
            m.diagnostics.solver = d.value("solver", std::string());
            m.diagnostics.converged = d.value("converged", false);
            m.diagnostics.iterations = d.value("iterations", 0);
            m.diagnostics.final_gap = d.value("final_gap", 0.0);
            m.diagnostics.final_primal = d.value("final_primal", 0.0);
            m.diagnostics.warnings = d.value("warnings", std::vector<std::string>{});
        }
        return file;
    } catch (const json::exception& e) {
        throw InputError(source + ": malformed model file (" + e.what() + ")");
    } catch (const ConfigError& e) {
        throw InputError(source + ": " + e.what());
    }
}

ModelFile load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open model file " + path.string());
    return read_model(in, path.string());
}

Vector decision_values(const ModelFile& file, const Matrix& X_raw)
{
    if (static_cast<std::size_t>(X_raw.cols()) != file.dim())
        throw InputError("data has " + std::to_string(X_raw.cols()) + " features, model expects " +
                         std::to_string(file.dim()));
    const Matrix X = file.standardizer.mean.size() > 0 ? file.standardizer.apply(X_raw) : X_raw;
    std::vector<Matrix> rows;
    rows.reserve(file.kernels.size());
    for (const auto& rec : file.kernels) {
        GramMatrix g;
        g.source = rec.spec;
        g.scale = rec.scale;
        rows.push_back(cross_gram(g, X, file.X_train));
    }
    return predict(file.model, rows, X.rows());
}

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out)
{
    out << "iter,primal_obj,dual_obj,rel_gap,active_kernels,seconds\n";
    for (const auto& r : trace)
        out << r.iter << ',' << format_number(r.primal) << ',' << format_number(r.dual) << ','
            << format_number(r.rel_gap) << ',' << r.active_kernels << ',' << format_number(r.seconds) << '\n';
}

void save_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    write_trace_csv(trace, out);
}

std::vector<TraceRow> load_trace_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("iter,primal_obj,dual_obj,rel_gap,active_kernels,seconds", 0) != 0)
        throw InputError(path.string() + ": missing trace header");
    std::vector<TraceRow> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::istringstream ss(line);
        TraceRow r;
        char c1, c2, c3, c4, c5;
        if (!(ss >> r.iter >> c1 >> r.primal >> c2 >> r.dual >> c3 >> r.rel_gap >> c4 >> r.active_kernels >> c5 >>
              r.seconds))
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": malformed trace row");
        out.push_back(r);
    }
    return out;
}

} // namespace mkl
