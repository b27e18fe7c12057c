#include "doctest.h"
#include "oracles.hpp"

#include "spicymkl/data_io.hpp"
#include "spicymkl/errors.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <sstream>

using namespace mkl;

namespace {

Dataset parse_text(const std::string& text, DataFormat format, const LoadOptions& opt = {})
{
    std::istringstream in(text);
    return parse(in, format, opt);
}

} // namespace

TEST_CASE("libsvm line")
{
    const Dataset ds = parse_text("+1 1:0.5 3:2.0\n-1 2:1\n", DataFormat::libsvm);
    REQUIRE(ds.dim() == 3);
    CHECK(ds.X(0, 0) == 0.5);
    CHECK(ds.X(0, 1) == 0.0);
    CHECK(ds.X(0, 2) == 2.0);
    CHECK(ds.y(0) == 1.0);
    CHECK(ds.y(1) == -1.0);
    CHECK(ds.classification);
}

TEST_CASE("malformed input is rejected with a line number")
{
    CHECK_THROWS_AS(parse_text("", DataFormat::libsvm), InputError);
    CHECK_THROWS_AS(parse_text("", DataFormat::csv), InputError);
    CHECK_THROWS_WITH_AS(parse_text("1 1:2\n1 3:1 2:4\n", DataFormat::libsvm), doctest::Contains(":2:"),
                         InputError);
    CHECK_THROWS_AS(parse_text("1 0:2\n", DataFormat::libsvm), InputError);
    CHECK_THROWS_AS(parse_text("1 1:x\n", DataFormat::libsvm), InputError);
    CHECK_THROWS_AS(parse_text("1,2,3\n0,1\n", DataFormat::csv), InputError);
    CHECK_THROWS_AS(parse_text("1,nan\n0,1\n", DataFormat::csv), InputError);
}

TEST_CASE("label mapping")
{
    const Dataset ds = parse_text("3,1\n7,2\n3,4\n", DataFormat::csv);
    CHECK(ds.classification);
    CHECK(ds.y == Vector{{-1.0, 1.0, -1.0}});
    CHECK(ds.label_mapping.negative == 3.0);
    CHECK(ds.label_mapping.positive == 7.0);

    const Dataset reg = parse_text("0.5,1\n1.5,2\n2.5,4\n", DataFormat::csv);
    CHECK_FALSE(reg.classification);

    LoadOptions cls;
    cls.task = TaskKind::classification;
    CHECK_THROWS_AS(parse_text("1,0\n2,0\n3,0\n", DataFormat::csv, cls), InputError);

    LoadOptions forced;
    forced.mapping = LabelMapping{0.0, 1.0};
    const Dataset one = parse_text("1,3\n1,4\n", DataFormat::csv, forced);
    CHECK(one.y == Vector{{1.0, 1.0}});
}

TEST_CASE("csv header")
{
    LoadOptions opt;
    opt.csv_header = true;
    const Dataset ds = parse_text("label,a,b\n1,0.5,2\n-1,1,1\n", DataFormat::csv, opt);
    CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(ds.size() == 2);
}

TEST_CASE("write and load round trip bit-identically")
{
    oracle::Rng rng(71);
    for (DataFormat format : {DataFormat::libsvm, DataFormat::csv}) {
        Dataset ds;
        ds.X = Matrix::Random(17, 4) * 1e3;
        ds.X(3, 1) = 0.0;
        ds.X(5, 2) = 1e-300;
        ds.y = oracle::random_labels(17, rng);
        const auto path = std::filesystem::temp_directory_path() / "spicymkl_roundtrip.dat";
        save(ds, path, format);
        const Dataset back = load(path, format);
        std::filesystem::remove(path);
        CHECK(back.X == ds.X);
        CHECK(back.y == ds.y);
    }
}

TEST_CASE("split")
{
    const Dataset ds = synth_ringnorm(100, 4, 3);
    const Split a = split(ds, 0.8, 12);
    const Split b = split(ds, 0.8, 12);
    CHECK(a.train.size() == 80);
    CHECK(a.test.size() == 20);
    CHECK(a.train_indices == b.train_indices);
    CHECK(a.train.X == b.train.X);
    std::vector<std::size_t> all = a.train_indices;
    all.insert(all.end(), a.test_indices.begin(), a.test_indices.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(100);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    CHECK(all == expected);
    // Training columns are standardized with their own statistics.
    const Vector mean = a.train.X.colwise().mean();
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(split(ds, 0.01, 1), InputError);
}

TEST_CASE("standardizer keeps constant features")
{
    Matrix X(3, 2);
    X << 1, 5, 2, 5, 3, 5;
    const Standardizer st = Standardizer::fit(X);
    CHECK(st.scale(1) == 1.0);
    const Matrix Z = st.apply(X);
    CHECK(Z.col(1).isZero(0.0));
    CHECK(Z.col(0).squaredNorm() / 3.0 == doctest::Approx(1.0));
}

TEST_CASE("synthetic fixture")
{
    const SyntheticMkl a = synth_sparse_mkl(80, 20, 2, 5);
    const SyntheticMkl b = synth_sparse_mkl(80, 20, 2, 5);
    CHECK(a.data.X == b.data.X);
    CHECK(a.informative == b.informative);
    CHECK(a.gram.n_kernels() == 20);
    CHECK(a.informative.size() == 2);
    const double pos = static_cast<double>((a.data.y.array() > 0).count());
    CHECK(pos / 80.0 >= 0.4);
    CHECK(pos / 80.0 <= 0.6);
    const Dataset r = synth_ringnorm(60, 5, 2);
    CHECK((r.y.array() > 0).count() == 30);
}

TEST_CASE("shipped toy data loads")
{
    const std::filesystem::path dir = SPICYMKL_DATA_DIR;
    CHECK(load(dir / "toy_ringnorm.libsvm", DataFormat::libsvm).size() == 120);
    LoadOptions header;
    header.csv_header = true;
    const Dataset blobs = load(dir / "toy_blobs.csv", DataFormat::csv, header);
    CHECK(blobs.classification);
    CHECK(blobs.label_mapping.negative == 0.0);
    CHECK_FALSE(load(dir / "toy_regression.csv", DataFormat::csv, header).classification);
    CHECK_THROWS_AS(load(dir / "missing.libsvm", DataFormat::libsvm), InputError);
}
