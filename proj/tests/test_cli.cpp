#include "doctest.h"

#include "spicymkl/cli.hpp"
#include "spicymkl/data_io.hpp"
#include "spicymkl/model_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mkl;
namespace fs = std::filesystem;

namespace {

const fs::path data_dir = SPICYMKL_DATA_DIR;

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "spicymkl");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("spicymkl_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<std::string> read_lines(const fs::path& p)
{
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
        lines.push_back(line);
    return lines;
}

// Column value of a CSV row by header name (no quoted fields expected).
std::string column(const std::vector<std::string>& lines, std::size_t row, const std::string& name)
{
    auto split = [](const std::string& s) {
        std::vector<std::string> f;
        std::stringstream ss(s);
        for (std::string x; std::getline(ss, x, ',');)
            f.push_back(x);
        return f;
    };
    const auto head = split(lines.at(0));
    const auto vals = split(lines.at(row));
    for (std::size_t j = 0; j < head.size(); ++j)
        if (head[j] == name)
            return vals.at(j);
    FAIL("no column " << name);
    return {};
}

} // namespace

TEST_CASE("train over a C grid")
{
    const fs::path out = scratch("grid");
    const Run r = cli({"train", "--data", (data_dir / "toy_circles.libsvm").string(), "--C", "0.005,0.05,0.5",
                       "--bandwidths", "0.5,1,2", "--degrees", "2", "--out", out.string()});
    CHECK(r.code == 0);
    for (const char* c : {"0.005", "0.05", "0.5"}) {
        CHECK(fs::exists(out / (std::string("model_C") + c + ".json")));
        CHECK(fs::exists(out / (std::string("trace_C") + c + ".csv")));
    }
    const auto summary = read_lines(out / "summary.csv");
    REQUIRE(summary.size() == 4);
    for (std::size_t row = 1; row < 4; ++row) {
        CHECK(std::stod(column(summary, row, "final_gap")) <= 0.01);
        CHECK(column(summary, row, "converged") == "1");
    }
}

TEST_CASE("predict on the training data of a toy model")
{
    const fs::path out = scratch("predict");
    const std::string data = (data_dir / "toy_circles.libsvm").string();
    REQUIRE(cli({"train", "--data", data, "--C", "0.05", "--out", out.string()}).code == 0);
    const fs::path preds = out / "pred.csv";
    const Run r = cli({"predict", "--data", data, "--model", (out / "model_C0.05.json").string(), "--out",
                       preds.string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("accuracy: 1 ") != std::string::npos);
    const Dataset ds = load(data, DataFormat::libsvm);
    CHECK(read_lines(preds).size() == ds.size() + 1);
}

TEST_CASE("csv data with 0/1 labels and a held-out split")
{
    const fs::path out = scratch("blobs");
    const Run r = cli({"train", "--data", (data_dir / "toy_blobs.csv").string(), "--format", "csv",
                       "--csv-header", "--loss", "hinge", "--split", "0.8", "--seed", "3", "--out", out.string()});
    CHECK(r.code == 0);
    const auto summary = read_lines(out / "summary.csv");
    REQUIRE(summary.size() == 2);
    CHECK(column(summary, 1, "n_train") == "64");
    CHECK(column(summary, 1, "n_test") == "16");
    const ModelFile m = load_model(out / "model_C0.05.json");
    CHECK(m.label_mapping.negative == 0.0);
    CHECK(m.label_mapping.positive == 1.0);
}

TEST_CASE("usage errors exit with 2")
{
    const std::string data = (data_dir / "toy_circles.libsvm").string();
    const Run bad_loss = cli({"train", "--data", data, "--loss", "cubic"});
    CHECK(bad_loss.code == 2);
    CHECK(bad_loss.err.find("--loss") != std::string::npos);
    CHECK(cli({"predict", "--data", data, "--model", "/nonexistent/model.json"}).code == 2);
    CHECK(cli({"train", "--data", "/nonexistent.libsvm"}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"train", "--data", data, "--C", "-1"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("bench sweep")
{
    const fs::path out = scratch("bench");
    auto run = [&](const fs::path& dir) {
        return cli({"bench", "--axis", "M", "--values", "4,8,12", "--reps", "3", "--N", "40", "--dim", "5",
                    "--solvers", "spicy,ist", "--ist-max-iter", "300", "--out", dir.string()});
    };
    const Run r = run(out);
    CHECK(r.code == 0);
    const auto results = read_lines(out / "results.csv");
    const auto aggregate = read_lines(out / "aggregate.csv");
    CHECK(results.size() == 1 + 3 * 3 * 2);
    CHECK(aggregate.size() == 1 + 3 * 2);
    std::size_t spicy = 0, ist = 0;
    for (std::size_t row = 1; row < results.size(); ++row)
        (column(results, row, "solver") == "spicy" ? spicy : ist) += 1;
    CHECK(spicy == 9);
    CHECK(ist == 9);

    const fs::path again = scratch("bench_again");
    REQUIRE(run(again).code == 0);
    const auto rerun = read_lines(again / "results.csv");
    REQUIRE(rerun.size() == results.size());
    for (std::size_t row = 1; row < results.size(); ++row)
        CHECK(column(rerun, row, "active_kernels") == column(results, row, "active_kernels"));
}
