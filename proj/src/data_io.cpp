#include "spicymkl/data_io.hpp"

#include "spicymkl/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace mkl {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& msg)
{
    throw InputError(source + ":" + std::to_string(line) + ": " + msg);
}

double to_double(std::string_view tok, const std::string& source, std::size_t line)
{
    tok = trim(tok);
    if (!tok.empty() && tok.front() == '+')
        tok.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
        parse_fail(source, line, "cannot parse number '" + std::string(tok) + "'");
    if (!std::isfinite(v))
        parse_fail(source, line, "non-finite value '" + std::string(tok) + "'");
    return v;
}

std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::vector<std::string_view> split_on(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

struct RawRows
{
    std::vector<double> labels;
    std::vector<std::vector<std::pair<std::size_t, double>>> entries;
    std::size_t dim = 0;
    std::vector<std::string> names;
};

RawRows read_libsvm(std::istream& in, const std::string& source)
{
    RawRows raw;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s.front() == '#')
            continue;
        std::istringstream tokens{std::string(s)};
        std::string tok;
        tokens >> tok;
        raw.labels.push_back(to_double(tok, source, lineno));
        auto& row = raw.entries.emplace_back();
        std::size_t last = 0;
        while (tokens >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                parse_fail(source, lineno, "expected index:value, got '" + tok + "'");
            std::size_t idx = 0;
            const auto [p, ec] = std::from_chars(tok.data(), tok.data() + colon, idx);
            if (ec != std::errc() || p != tok.data() + colon || idx == 0)
                parse_fail(source, lineno, "invalid feature index in '" + tok + "'");
            if (idx <= last)
                parse_fail(source, lineno, "feature indices must be strictly increasing");
            last = idx;
            row.emplace_back(idx - 1, to_double(std::string_view(tok).substr(colon + 1), source, lineno));
            raw.dim = std::max(raw.dim, idx);
        }
    }
    return raw;
}

RawRows read_csv(std::istream& in, const std::string& source, bool header)
{
    RawRows raw;
    std::string line;
    std::size_t lineno = 0;
    bool need_header = header;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty())
            continue;
        const auto fields = split_on(s, ',');
        if (fields.size() < 2)
            parse_fail(source, lineno, "expected a label and at least one feature");
        if (need_header) {
            need_header = false;
            for (std::size_t j = 1; j < fields.size(); ++j)
                raw.names.emplace_back(trim(fields[j]));
            width = fields.size();
            continue;
        }
        if (width == 0)
            width = fields.size();
        else if (fields.size() != width)
            parse_fail(source, lineno,
                       "expected " + std::to_string(width) + " fields, got " + std::to_string(fields.size()));
        raw.labels.push_back(to_double(fields[0], source, lineno));
        auto& row = raw.entries.emplace_back();
        for (std::size_t j = 1; j < fields.size(); ++j)
            row.emplace_back(j - 1, to_double(fields[j], source, lineno));
    }
    raw.dim = width > 0 ? width - 1 : 0;
    return raw;
}

bool is_integer(double v) { return std::floor(v) == v; }

// Maps raw labels to +-1 and returns the mapping used.
LabelMapping infer_mapping(const std::set<double>& distinct, const std::string& source)
{
    if (distinct.size() > 2)
        throw InputError(source + ": " + std::to_string(distinct.size()) +
                         " distinct labels for a classification task");
    const double lo = *distinct.begin();
    const double hi = *distinct.rbegin();
    if (distinct.size() == 1) {
        if (lo == -1.0 || lo == 0.0)
            return {lo, 1.0};
        return {-1.0, lo};
    }
    if (lo == -1.0 && hi == 1.0)
        return {};
    return {lo, hi};
}

} // namespace

DataFormat parse_data_format(std::string_view name)
{
    if (name == "libsvm")
        return DataFormat::libsvm;
    if (name == "csv")
        return DataFormat::csv;
    throw ConfigError("unknown data format '" + std::string(name) + "' (expected libsvm or csv)");
}

void Dataset::validate(std::size_t min_samples) const
{
    if (size() < min_samples)
        throw InputError(provenance + ": need at least " + std::to_string(min_samples) + " samples, got " +
                         std::to_string(size()));
    if (y.size() != X.rows())
        throw InputError(provenance + ": label count does not match rows");
    if (!X.allFinite() || !y.allFinite())
        throw InputError(provenance + ": non-finite values");
    if (classification)
        for (Eigen::Index i = 0; i < y.size(); ++i)
            if (y(i) != 1.0 && y(i) != -1.0)
                throw InputError(provenance + ": classification label must be +-1");
}

Dataset parse(std::istream& in, DataFormat format, const LoadOptions& options, std::string provenance)
{
    RawRows raw = format == DataFormat::libsvm ? read_libsvm(in, provenance)
                                               : read_csv(in, provenance, options.csv_header);
    if (raw.labels.empty())
        throw InputError(provenance + ": no samples");
    const std::size_t dim = std::max(raw.dim, options.min_dim);
    if (dim == 0)
        throw InputError(provenance + ": no features");

    Dataset ds;
    ds.provenance = std::move(provenance);
    ds.feature_names = std::move(raw.names);
    const auto n = static_cast<Eigen::Index>(raw.labels.size());
    ds.X = Matrix::Zero(n, static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < n; ++i)
        for (const auto& [j, v] : raw.entries[static_cast<std::size_t>(i)])
            ds.X(i, static_cast<Eigen::Index>(j)) = v;
    ds.y = Eigen::Map<const Vector>(raw.labels.data(), n);

    const std::set<double> distinct(raw.labels.begin(), raw.labels.end());
    bool classification = options.task == TaskKind::classification;
    if (options.task == TaskKind::automatic)
        classification = distinct.size() <= 2 &&
                         std::all_of(distinct.begin(), distinct.end(), [](double v) { return is_integer(v); });
    ds.classification = classification;
    if (classification) {
        const LabelMapping map = options.mapping ? *options.mapping : infer_mapping(distinct, ds.provenance);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (ds.y(i) == map.negative)
                ds.y(i) = -1.0;
            else if (ds.y(i) == map.positive)
                ds.y(i) = 1.0;
            else
                throw InputError(ds.provenance + ": label " + format_double(ds.y(i)) +
                                 " does not match the label mapping");
        }
        ds.label_mapping = map;
    }
    return ds;
}

Dataset load(const std::filesystem::path& path, DataFormat format, const LoadOptions& options)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    return parse(in, format, options, path.string());
}

void write(const Dataset& ds, std::ostream& out, DataFormat format)
{
    const Eigen::Index d = ds.X.cols();
    if (format == DataFormat::csv) {
        if (!ds.feature_names.empty()) {
            out << "label";
            for (const auto& name : ds.feature_names)
                out << ',' << name;
            out << '\n';
        }
        for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
            out << format_double(ds.y(i));
            for (Eigen::Index j = 0; j < d; ++j)
                out << ',' << format_double(ds.X(i, j));
            out << '\n';
        }
        return;
    }
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        out << format_double(ds.y(i));
        for (Eigen::Index j = 0; j < d; ++j)
            // The last column is always written so that the dimension survives.
            if (ds.X(i, j) != 0.0 || j == d - 1)
                out << ' ' << (j + 1) << ':' << format_double(ds.X(i, j));
        out << '\n';
    }
}

void save(const Dataset& ds, const std::filesystem::path& path, DataFormat format)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    write(ds, out, format);
}

Standardizer Standardizer::fit(const Matrix& X)
{
    Standardizer s;
    const double n = static_cast<double>(X.rows());
    s.mean = X.colwise().mean().transpose();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double var = (X.col(j).array() - s.mean(j)).square().sum() / n;
        s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& X) const
{
    if (X.cols() != mean.size())
        throw ContractError("standardizer fitted on a different dimension");
    Matrix out = X;
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        out.col(j) = (X.col(j).array() - mean(j)) / scale(j);
    return out;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows)
{
    Dataset out;
    out.provenance = ds.provenance;
    out.feature_names = ds.feature_names;
    out.classification = ds.classification;
    out.label_mapping = ds.label_mapping;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= ds.size())
            throw ContractError("subset: row index out of range");
        out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(static_cast<Eigen::Index>(rows[i]));
        out.y(static_cast<Eigen::Index>(i)) = ds.y(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

Split split(const Dataset& ds, double fraction, std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("split fraction must lie in (0, 1)");
    const std::size_t n = ds.size();
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (n_train < 2)
        throw InputError("split leaves fewer than 2 training samples");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    Split out;
    out.train_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)));
    out.test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)), perm.end());
    std::sort(out.train_indices.begin(), out.train_indices.end());
    std::sort(out.test_indices.begin(), out.test_indices.end());

    out.train = subset(ds, out.train_indices);
    out.test = subset(ds, out.test_indices);
    out.standardizer = Standardizer::fit(out.train.X);
    out.train.X = out.standardizer.apply(out.train.X);
    if (!out.test_indices.empty())
        out.test.X = out.standardizer.apply(out.test.X);
    return out;
}

SyntheticMkl synth_sparse_mkl(std::size_t n_samples, std::size_t n_kernels, std::size_t n_informative,
                              std::uint64_t seed)
{
    if (n_informative > n_kernels)
        throw ConfigError("n_informative exceeds the number of kernels");
    if (n_samples < 2 || n_kernels < 1)
        throw ConfigError("synthetic problem needs N >= 2 and M >= 1");
    constexpr std::size_t group = 2;
    const auto N = static_cast<Eigen::Index>(n_samples);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticMkl out;
    std::vector<std::size_t> all(n_kernels);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::sample(all.begin(), all.end(), std::back_inserter(out.informative), n_informative, rng);

    Matrix X(N, static_cast<Eigen::Index>(n_kernels * group));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j)
            X(i, j) = normal(rng);

    Vector f = Vector::Zero(N);
    for (std::size_t m : out.informative) {
        const auto c = static_cast<Eigen::Index>(m * group);
        f += X.col(c) + 0.5 * X.col(c + 1);
    }
    std::vector<double> sorted(f.data(), f.data() + N);
    std::nth_element(sorted.begin(), sorted.begin() + N / 2, sorted.end());
    const double median = sorted[static_cast<std::size_t>(N / 2)];
    Vector y(N);
    // Exactly N/2 samples (the upper half) get +1.
    for (Eigen::Index i = 0; i < N; ++i)
        y(i) = f(i) >= median ? 1.0 : -1.0;

    for (std::size_t m = 0; m < n_kernels; ++m)
        out.specs.push_back(KernelSpec::gaussian(2.0, {m * group, m * group + 1}));

    out.data.X = std::move(X);
    out.data.y = std::move(y);
    out.data.provenance = "synth_sparse_mkl(seed=" + std::to_string(seed) + ")";
    out.data.classification = true;
    out.gram = build_gram_stack(out.data.X, out.specs);
    return out;
}

Dataset synth_ringnorm(std::size_t n_samples, std::size_t dim, std::uint64_t seed)
{
    if (n_samples < 2 || dim < 1)
        throw ConfigError("ringnorm needs N >= 2 and dim >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double shift = 2.0 / std::sqrt(static_cast<double>(dim));

    Dataset ds;
    ds.X.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(dim));
    ds.y.resize(static_cast<Eigen::Index>(n_samples));
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        const bool positive = i % 2 == 0;
        ds.y(i) = positive ? 1.0 : -1.0;
        for (Eigen::Index j = 0; j < ds.X.cols(); ++j)
            ds.X(i, j) = positive ? 2.0 * normal(rng) : shift + normal(rng);
    }
    ds.provenance = "ringnorm(seed=" + std::to_string(seed) + ")";
    ds.classification = true;
    return ds;
}

} // namespace mkl
