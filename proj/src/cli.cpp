#include "spicymkl/cli.hpp"

#include "spicymkl/baseline_ist.hpp"
#include "spicymkl/config_io.hpp"
#include "spicymkl/data_io.hpp"
#include "spicymkl/errors.hpp"
#include "spicymkl/model_io.hpp"
#include "spicymkl/solver.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace mkl {

namespace fs = std::filesystem;

namespace {

struct DataArgs
{
    std::string path;
    std::string format = "libsvm";
    bool csv_header = false;
    std::string task = "auto";
};

struct TrainArgs
{
    DataArgs data;
    std::string loss;
    std::vector<double> C = {0.05};
    std::string solver = "spicy";
    double split = 0.0;
    std::uint64_t seed = 0;
    std::string config;
    std::string out = ".";
    std::optional<double> tol;
    std::optional<int> max_outer;
    std::optional<std::size_t> random_kernels;
    std::vector<double> bandwidths;
    std::vector<int> degrees;
    std::string subsets;
    int ist_max_iter = 100000;
};

struct PredictArgs
{
    DataArgs data;
    std::string model;
    std::string out = "predictions.csv";
};

struct BenchArgs
{
    std::string axis = "M";
    std::vector<std::size_t> values = {50, 200, 800};
    int reps = 3;
    std::vector<std::string> solvers = {"spicy"};
    std::size_t n_samples = 200;
    std::size_t n_kernels = 50;
    std::size_t dim = 20;
    std::string loss = "logistic";
    double C = 0.05;
    double tol = 0.01;
    std::uint64_t seed = 0;
    std::string out = "bench";
    double max_memory_mb = 3000.0;
    int ist_max_iter = 20000;
};

TaskKind parse_task(const std::string& s)
{
    if (s == "auto")
        return TaskKind::automatic;
    if (s == "classification")
        return TaskKind::classification;
    return TaskKind::regression;
}

void add_data_options(CLI::App* cmd, DataArgs& a)
{
    cmd->add_option("--data", a.path, "Dataset file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--format", a.format, "Dataset format")->check(CLI::IsMember({"libsvm", "csv"}));
    cmd->add_flag("--csv-header", a.csv_header, "CSV file starts with a header row");
    cmd->add_option("--task", a.task, "Label interpretation")
        ->check(CLI::IsMember({"auto", "classification", "regression"}));
}

Dataset load_data(const DataArgs& a, std::optional<LabelMapping> mapping = std::nullopt,
                  std::optional<TaskKind> task = std::nullopt)
{
    LoadOptions opts;
    opts.task = task ? *task : parse_task(a.task);
    opts.csv_header = a.csv_header;
    opts.mapping = mapping;
    return load(a.path, parse_data_format(a.format), opts);
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"')
            q += '"';
        q += c == '\n' ? ' ' : c;
    }
    return q + "\"";
}

double accuracy(const Vector& decision, const Vector& y)
{
    if (y.size() == 0)
        return std::nan("");
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        hits += ((decision(i) >= 0.0) == (y(i) > 0.0)) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

double mse(const Vector& decision, const Vector& y)
{
    if (y.size() == 0)
        return std::nan("");
    return (decision - y).squaredNorm() / static_cast<double>(y.size());
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw InputError("cannot create output directory " + dir.string());
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f)
            throw InputError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err)
{
    ConfigFile cfg;
    if (!a.config.empty())
        cfg = load_config(a.config);
    if (a.tol)
        cfg.solver.outer_tol = *a.tol;
    if (a.max_outer)
        cfg.solver.max_outer = *a.max_outer;
    if (a.random_kernels)
        cfg.bank.random_kernels = *a.random_kernels;
    if (!a.bandwidths.empty())
        cfg.bank.bandwidths = a.bandwidths;
    if (!a.degrees.empty())
        cfg.bank.degrees = a.degrees;
    if (!a.subsets.empty())
        cfg.bank.subsets = parse_subset_policy(a.subsets);
    cfg.bank.seed = a.seed;
    for (double c : a.C)
        if (!(c > 0.0))
            throw ConfigError("C must be positive");

    const Dataset ds = load_data(a.data);
    const LossKind loss_kind =
        a.loss.empty() ? (ds.classification ? LossKind::logistic : LossKind::squared) : parse_loss_kind(a.loss);
    if (loss_kind != LossKind::squared && !ds.classification)
        throw InputError(std::string(to_string(loss_kind)) + " loss needs classification labels");
    if (a.solver == "ist" && loss_kind == LossKind::hinge)
        throw ConfigError("the ist solver supports logistic and squared losses only");
    ensure_dir(a.out);

    Dataset train_set;
    Dataset test_raw;
    Standardizer standardizer;
    if (a.split > 0.0) {
        const Split sp = split(ds, a.split, a.seed);
        train_set = sp.train;
        test_raw = subset(ds, sp.test_indices);
        standardizer = sp.standardizer;
    } else {
        train_set = ds;
        standardizer = Standardizer::fit(ds.X);
        train_set.X = standardizer.apply(ds.X);
    }
    train_set.validate();

    const GramStack gram = build_kernel_bank(train_set.X, cfg.bank);
    const LossSpec loss(loss_kind, train_set.y);
    out << "data: " << ds.provenance << " (" << train_set.size() << " train, " << test_raw.size()
        << " test, d = " << ds.dim() << "), kernels: " << gram.n_kernels() << ", loss: " << to_string(loss_kind)
        << ", solver: " << a.solver << '\n';

    const fs::path dir(a.out);
    std::ofstream summary(dir / "summary.csv");
    if (!summary)
        throw InputError("cannot write " + (dir / "summary.csv").string());
    const char* metric = ds.classification ? "accuracy" : "mse";
    summary << "C,solver,loss,n_train,n_test,bank_kernels,active_kernels,metric,train_value,test_value,final_gap,"
               "converged,iterations,seconds\n";

    bool all_converged = true;
    for (double c : a.C) {
        SolverConfig sc = cfg.solver;
        sc.C = c;
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        MklModel model;
        if (a.solver == "ist") {
            IstOptions io;
            io.gap_every = 10;
            io.gap_tol = sc.outer_tol;
            io.max_iter = a.ist_max_iter;
            model = ist_solve(gram, loss, c, io);
        } else {
            model = train(gram, loss, sc);
        }
        const double seconds = std::chrono::duration<double>(clock::now() - t0).count();

        const ModelFile file =
            make_model_file(model, gram, train_set.X, standardizer, ds.classification, ds.label_mapping);
        const std::string tag = format_number(c);
        save_model(file, dir / ("model_C" + tag + ".json"));
        save_trace_csv(model.diagnostics.trace, dir / ("trace_C" + tag + ".csv"));

        const Vector f_train = predict(model, gram);
        const double train_value = ds.classification ? accuracy(f_train, train_set.y) : mse(f_train, train_set.y);
        double test_value = std::nan("");
        if (test_raw.size() > 0) {
            const Vector f_test = decision_values(file, test_raw.X);
            test_value = ds.classification ? accuracy(f_test, test_raw.y) : mse(f_test, test_raw.y);
        }
        const auto& d = model.diagnostics;
        all_converged = all_converged && d.converged;
        summary << tag << ',' << a.solver << ',' << to_string(loss_kind) << ',' << train_set.size() << ','
                << test_raw.size() << ',' << gram.n_kernels() << ',' << model.n_active() << ',' << metric << ','
                << format_number(train_value) << ',' << format_number(test_value) << ','
                << format_number(d.final_gap) << ',' << (d.converged ? 1 : 0) << ',' << d.iterations << ','
                << format_number(seconds) << '\n';

        out << "C = " << tag << ": kernels " << model.n_active() << '/' << gram.n_kernels() << ", gap "
            << d.final_gap << ", iterations " << d.iterations << ", " << seconds << " s, train " << metric << ' '
            << train_value;
        if (test_raw.size() > 0)
            out << ", test " << metric << ' ' << test_value;
        out << (d.converged ? "" : " [not converged]") << '\n';
    }
    if (!all_converged) {
        err << "error: training did not reach the requested duality gap\n";
        return kExitNumerical;
    }
    return kExitOk;
}

int cmd_predict(const PredictArgs& a, std::ostream& out)
{
    const ModelFile file = load_model(a.model);
    const Dataset ds = file.classification
                           ? load_data(a.data, file.label_mapping, TaskKind::classification)
                           : load_data(a.data, std::nullopt, TaskKind::regression);
    const Vector f = decision_values(file, ds.X);

    std::ofstream pred(a.out);
    if (!pred)
        throw InputError("cannot write " + a.out);
    pred << (file.classification ? "row,decision,label\n" : "row,decision\n");
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        pred << i << ',' << format_number(f(i));
        if (file.classification)
            pred << ',' << format_number(f(i) >= 0.0 ? file.label_mapping.positive : file.label_mapping.negative);
        pred << '\n';
    }
    if (file.classification)
        out << "accuracy: " << accuracy(f, ds.y) << " (" << f.size() << " rows)\n";
    else
        out << "mse: " << mse(f, ds.y) << " (" << f.size() << " rows)\n";
    return kExitOk;
}

struct BenchRow
{
    std::size_t value = 0;
    int rep = 0;
    std::string solver;
    std::size_t n_samples = 0;
    std::size_t n_kernels = 0;
    double seconds = 0.0;
    std::size_t active = 0;
    double gap = 0.0;
    bool converged = false;
    int iterations = 0;
    bool ok = false;
    std::string message;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err)
{
    if (a.axis != "M" && a.axis != "N")
        throw ConfigError("--axis must be M or N");
    if (a.reps < 1 || a.values.empty())
        throw ConfigError("bench needs at least one value and one repetition");
    const LossKind loss_kind = parse_loss_kind(a.loss);
    for (const auto& s : a.solvers)
        if (s == "ist" && loss_kind == LossKind::hinge)
            throw ConfigError("the ist solver supports logistic and squared losses only");
    const fs::path dir(a.out);
    ensure_dir(dir);
    ensure_dir(dir / "traces");

    std::vector<BenchRow> rows;
    for (std::size_t value : a.values) {
        const std::size_t N = a.axis == "N" ? value : a.n_samples;
        const std::size_t M = a.axis == "M" ? value : a.n_kernels;
        for (int rep = 0; rep < a.reps; ++rep) {
            const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(rep);
            std::optional<GramStack> gram;
            std::optional<LossSpec> loss;
            std::string setup_error;
            const double bytes = 8.0 * static_cast<double>(M) * static_cast<double>(N) * static_cast<double>(N);
            if (bytes > a.max_memory_mb * 1024.0 * 1024.0) {
                setup_error = "kernel bank needs " + std::to_string(static_cast<long long>(bytes / 1048576.0)) +
                              " MB, budget is " + std::to_string(static_cast<long long>(a.max_memory_mb)) + " MB";
            } else {
                try {
                    Dataset ds = synth_ringnorm(N, a.dim, seed);
                    ds.X = Standardizer::fit(ds.X).apply(ds.X);
                    gram = random_kernel_bank(ds.X, M, seed);
                    loss.emplace(loss_kind, ds.y);
                } catch (const std::bad_alloc&) {
                    setup_error = "out of memory while building the kernel bank";
                } catch (const std::exception& e) {
                    setup_error = e.what();
                }
            }
            for (const auto& solver : a.solvers) {
                BenchRow r;
                r.value = value;
                r.rep = rep;
                r.solver = solver;
                r.n_samples = N;
                r.n_kernels = M;
                if (!setup_error.empty()) {
                    r.message = setup_error;
                    rows.push_back(r);
                    continue;
                }
                try {
                    using clock = std::chrono::steady_clock;
                    const auto t0 = clock::now();
                    MklModel model;
                    if (solver == "ist") {
                        IstOptions io;
                        io.gap_every = 10;
                        io.gap_tol = a.tol;
                        io.max_iter = a.ist_max_iter;
                        model = ist_solve(*gram, *loss, a.C, io);
                    } else {
                        SolverConfig sc;
                        sc.C = a.C;
                        sc.outer_tol = a.tol;
                        model = train(*gram, *loss, sc);
                    }
                    r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
                    r.active = model.n_active();
                    r.gap = model.diagnostics.final_gap;
                    r.converged = model.diagnostics.converged;
                    r.iterations = model.diagnostics.iterations;
                    r.ok = true;
                    save_trace_csv(model.diagnostics.trace, dir / "traces" /
                                                                (solver + "_" + a.axis + std::to_string(value) +
                                                                 "_rep" + std::to_string(rep) + ".csv"));
                } catch (const std::bad_alloc&) {
                    r.message = "out of memory";
                } catch (const std::exception& e) {
                    r.message = e.what();
                }
                out << solver << ' ' << a.axis << " = " << value << " rep " << rep << ": "
                    << (r.ok ? std::to_string(r.seconds) + " s, " + std::to_string(r.active) + " active"
                             : "failed (" + r.message + ")")
                    << '\n';
                rows.push_back(r);
            }
        }
    }

    std::ofstream res(dir / "results.csv");
    res << "axis,value,rep,solver,n_samples,n_kernels,seconds,active_kernels,final_gap,converged,iterations,status,"
           "message\n";
    for (const auto& r : rows)
        res << a.axis << ',' << r.value << ',' << r.rep << ',' << r.solver << ',' << r.n_samples << ','
            << r.n_kernels << ',' << format_number(r.seconds) << ',' << r.active << ',' << format_number(r.gap)
            << ',' << (r.converged ? 1 : 0) << ',' << r.iterations << ',' << (r.ok ? "ok" : "failed") << ','
            << csv_field(r.message) << '\n';

    std::ofstream agg(dir / "aggregate.csv");
    agg << "axis,value,solver,runs,failures,mean_seconds,std_seconds,mean_active,std_active,mean_final_gap\n";
    for (std::size_t value : a.values)
        for (const auto& solver : a.solvers) {
            std::vector<const BenchRow*> ok;
            int failures = 0;
            for (const auto& r : rows)
                if (r.value == value && r.solver == solver) {
                    if (r.ok)
                        ok.push_back(&r);
                    else
                        ++failures;
                }
            auto mean_std = [&](auto get) {
                if (ok.empty())
                    return std::pair{std::nan(""), std::nan("")};
                double s = 0.0;
                for (auto* r : ok)
                    s += get(*r);
                const double mean = s / static_cast<double>(ok.size());
                double v = 0.0;
                for (auto* r : ok)
                    v += (get(*r) - mean) * (get(*r) - mean);
                const double sd = ok.size() > 1 ? std::sqrt(v / static_cast<double>(ok.size() - 1)) : 0.0;
                return std::pair{mean, sd};
            };
            const auto [ms, ss] = mean_std([](const BenchRow& r) { return r.seconds; });
            const auto [ma, sa] = mean_std([](const BenchRow& r) { return static_cast<double>(r.active); });
            const auto [mg, sg] = mean_std([](const BenchRow& r) { return r.gap; });
            (void)sg;
            agg << a.axis << ',' << value << ',' << solver << ',' << (ok.size() + static_cast<std::size_t>(failures))
                << ',' << failures << ',' << format_number(ms) << ',' << format_number(ss) << ','
                << format_number(ma) << ',' << format_number(sa) << ',' << format_number(mg) << '\n';
        }
    if (!res || !agg)
        throw InputError("cannot write bench results in " + dir.string());
    (void)err;
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Sparse multiple kernel learning"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train a model (optionally over a grid of C values)");
    add_data_options(train_cmd, ta.data);
    train_cmd->add_option("--loss", ta.loss, "logistic, squared or hinge (default: by label type)")
        ->check(CLI::IsMember({"logistic", "squared", "hinge"}));
    train_cmd->add_option("--C", ta.C, "Regularization constant(s), comma separated")->delimiter(',');
    train_cmd->add_option("--solver", ta.solver, "spicy or ist")->check(CLI::IsMember({"spicy", "ist"}));
    train_cmd->add_option("--split", ta.split, "Training fraction; the rest is held out")
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--seed", ta.seed, "Seed for the split and random kernels");
    train_cmd->add_option("--config", ta.config, "JSON solver/bank configuration")->check(CLI::ExistingFile);
    train_cmd->add_option("--out", ta.out, "Output directory");
    train_cmd->add_option("--tol", ta.tol, "Relative duality gap tolerance");
    train_cmd->add_option("--max-outer", ta.max_outer, "Outer iteration limit");
    train_cmd->add_option("--random-kernels", ta.random_kernels, "Use this many random Gaussian kernels");
    train_cmd->add_option("--bandwidths", ta.bandwidths, "Gaussian widths, comma separated")->delimiter(',');
    train_cmd->add_option("--degrees", ta.degrees, "Polynomial degrees, comma separated")->delimiter(',');
    train_cmd->add_option("--subsets", ta.subsets, "joint, single or both")
        ->check(CLI::IsMember({"joint", "single", "both"}));
    train_cmd->add_option("--ist-max-iter", ta.ist_max_iter, "Iteration limit of the ist solver");

    PredictArgs pa;
    auto* predict_cmd = app.add_subcommand("predict", "Apply a trained model to a dataset");
    add_data_options(predict_cmd, pa.data);
    predict_cmd->add_option("--model", pa.model, "Model file")->required();
    predict_cmd->add_option("--out", pa.out, "Predictions CSV");

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "Timing sweep over the number of kernels or samples");
    bench_cmd->add_option("--axis", ba.axis, "Sweep axis")->check(CLI::IsMember({"M", "N"}));
    bench_cmd->add_option("--values", ba.values, "Axis values, comma separated")->delimiter(',');
    bench_cmd->add_option("--reps", ba.reps, "Repetitions per value");
    bench_cmd->add_option("--solvers", ba.solvers, "spicy and/or ist, comma separated")
        ->delimiter(',')
        ->check(CLI::IsMember({"spicy", "ist"}));
    bench_cmd->add_option("--N", ba.n_samples, "Samples when sweeping M");
    bench_cmd->add_option("--M", ba.n_kernels, "Kernels when sweeping N");
    bench_cmd->add_option("--dim", ba.dim, "Input dimension of the synthetic data");
    bench_cmd->add_option("--loss", ba.loss, "Loss")->check(CLI::IsMember({"logistic", "squared", "hinge"}));
    bench_cmd->add_option("--C", ba.C, "Regularization constant")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--tol", ba.tol, "Relative duality gap tolerance")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--seed", ba.seed, "Base seed (repetition r uses seed + r)");
    bench_cmd->add_option("--out", ba.out, "Output directory");
    bench_cmd->add_option("--max-memory-mb", ba.max_memory_mb, "Skip runs whose kernel bank exceeds this");
    bench_cmd->add_option("--ist-max-iter", ba.ist_max_iter, "Iteration limit of the ist solver");

    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*train_cmd)
            return cmd_train(ta, out, err);
        if (*predict_cmd)
            return cmd_predict(pa, out);
        return cmd_bench(ba, out, err);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

int run_cli(int argc, char** argv)
{
    std::vector<std::string> args(argv, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

} // namespace mkl
