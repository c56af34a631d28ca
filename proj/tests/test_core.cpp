// Foundations: rng streams, matrix helpers, cost matrices, csv io.
#include "test_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace mbot;
using testutil::cloud_1d;
using testutil::cloud_2d;

TEST_CASE("derive_stream separates labels and indices", "[core]") {
    const std::uint64_t master = 42;
    CHECK(derive_stream(master, "pair", 0) != derive_stream(master, "pair", 1));
    CHECK(derive_stream(master, "pair", 0) != derive_stream(master, "flow", 0));
    CHECK(derive_stream(master, "pair", 7) == derive_stream(master, "pair", 7));
    CHECK(derive_stream(master, "pair", 0) != derive_stream(master + 1, "pair", 0));
}

TEST_CASE("rng uniform01 stays in [0,1) and is seed-deterministic", "[core]") {
    Rng r1(123), r2(123), r3(124);
    bool same = true, diff = false;
    for (int i = 0; i < 1000; ++i) {
        const double u = r1.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        same = same && (u == r2.uniform01());
        diff = diff || (u != r3.uniform01());
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("rng below is unbiased enough for sampling", "[core]") {
    Rng r(7);
    std::map<std::uint64_t, int> hist;
    const int draws = 30000;
    for (int i = 0; i < draws; ++i) ++hist[r.below(3)];
    for (const auto& kv : hist) {
        CHECK(kv.first < 3);
        CHECK(std::abs(kv.second - draws / 3) < 600);
    }
}

TEST_CASE("sample_cdf inverts the cumulative weights", "[core]") {
    const Vec w = {0.5, 0.0, 0.25, 0.25};
    const Vec cdf = cumulative(w);
    Rng r(99);
    Vec freq(4, 0.0);
    const int draws = 40000;
    for (int i = 0; i < draws; ++i) freq[sample_cdf(cdf, r)] += 1.0 / draws;
    CHECK(freq[1] == 0.0);
    CHECK(std::abs(freq[0] - 0.5) < 0.02);
    CHECK(std::abs(freq[2] - 0.25) < 0.02);
    CHECK(std::abs(freq[3] - 0.25) < 0.02);
}

TEST_CASE("tree_sum equals sequential sum on exact cases", "[core]") {
    Vec v(257);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 7) * 0.125;
    double seq = 0.0;
    for (double x : v) seq += x;
    CHECK(tree_sum(v) == seq);  // eighths are exact in binary
    CHECK(tree_sum(Vec{}) == 0.0);
    CHECK(tree_sum(Vec{3.5}) == 3.5);
}

TEST_CASE("matrix row and column sums", "[core]") {
    Matrix M(2, 3, 0.0);
    M(0, 0) = 1.0;
    M(0, 2) = 2.0;
    M(1, 1) = 4.0;
    const Vec r = M.row_sums(), c = M.col_sums();
    CHECK(r == Vec{3.0, 4.0});
    CHECK(c == Vec{1.0, 4.0, 2.0});
}

TEST_CASE("validate_prob accepts simplex vectors and rejects junk", "[core]") {
    validate_prob(uniform_weights(7));
    Rng r(5);
    for (int t = 0; t < 50; ++t) validate_prob(testutil::random_simplex(1 + t % 9, r));
    CHECK_THROWS_AS(validate_prob(Vec{0.5, 0.6}), ValidationError);
    CHECK_THROWS_AS(validate_prob(Vec{-0.1, 1.1}), ValidationError);
}

TEST_CASE("build_cost_matrix frozen examples", "[core]") {
    // single coincident pair, squared cost
    auto C = build_cost_matrix(cloud_1d({0.0}), cloud_1d({0.0}), 2.0);
    CHECK(C.entries(0, 0) == 0.0);
    CHECK(C.power_p == 2.0);

    // 1d absolute distances
    C = build_cost_matrix(cloud_1d({0.0, 1.0}), cloud_1d({0.0, 1.0}), 1.0);
    CHECK(C.entries(0, 0) == 0.0);
    CHECK(C.entries(0, 1) == 1.0);
    CHECK(C.entries(1, 0) == 1.0);
    CHECK(C.entries(1, 1) == 0.0);

    // 3-4-5 triangle, squared
    C = build_cost_matrix(cloud_2d({{0.0, 0.0}}), cloud_2d({{3.0, 4.0}}), 2.0);
    CHECK(C.entries(0, 0) == Catch::Approx(25.0).margin(1e-12));

    CHECK_THROWS_AS(build_cost_matrix(cloud_1d({0.0}), cloud_2d({{0.0, 0.0}}), 2.0),
                    ValidationError);
}

TEST_CASE("distance_matrix is symmetric with zero diagonal", "[core]") {
    Rng r(11);
    const PointCloud X = testutil::random_cloud(6, 3, r);
    const Matrix D = distance_matrix(X);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(D(i, i) == 0.0);
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(D(i, j) == D(j, i));
            CHECK(D(i, j) >= 0.0);
        }
    }
}

TEST_CASE("fmt_num round-trips doubles through text", "[core]") {
    const Vec vals = {0.0, 1.0, -1.5, 0.1, 1e-17, 3.141592653589793, 1e300};
    for (double v : vals) {
        const std::string s = fmt_num(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(fmt_num(std::uint64_t{18446744073709551615ull}) == "18446744073709551615");
    CHECK(fmt_num(std::int64_t{-42}) == "-42");
}

TEST_CASE("point cloud csv round trip is bit exact", "[core]") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mbot_test_core";
    fs::create_directories(dir);
    const std::string path = (dir / "cloud.csv").string();

    Rng r(3);
    const PointCloud X = testutil::random_cloud(17, 3, r);
    const Vec w = testutil::random_simplex(17, r);
    save_cloud_csv(path, X, &w);

    Vec w2;
    const PointCloud X2 = load_cloud_csv(path, w2);
    REQUIRE(X2.n == X.n);
    REQUIRE(X2.d == X.d);
    for (std::size_t i = 0; i < X.coords.size(); ++i) CHECK(X2.coords[i] == X.coords[i]);
    REQUIRE(w2.size() == w.size());
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w2[i] == w[i]);
    validate_prob(w2);
    fs::remove_all(dir);
}

TEST_CASE("cloud csv loader normalizes weights and validates input", "[core]") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mbot_test_core_b";
    fs::create_directories(dir);

    const std::string path = (dir / "w.csv").string();
    {
        std::ofstream f(path);
        f << "x0,w\n0.0,2\n1.0,6\n";
    }
    Vec w;
    const PointCloud X = load_cloud_csv(path, w);
    CHECK(X.n == 2);
    CHECK(w == Vec{0.25, 0.75});
    validate_prob(w);

    // default weights are uniform when no w column exists
    const std::string path2 = (dir / "nw.csv").string();
    {
        std::ofstream f(path2);
        f << "x0,x1\n0,0\n1,1\n2,2\n";
    }
    Vec w2;
    const PointCloud X2 = load_cloud_csv(path2, w2);
    CHECK(X2.d == 2);
    CHECK(w2 == uniform_weights(3));

    const std::string bad = (dir / "bad.csv").string();
    {
        std::ofstream f(bad);
        f << "x0\nnot_a_number\n";
    }
    CHECK_THROWS_AS(load_cloud_csv(bad), ValidationError);
    CHECK_THROWS_AS(load_cloud_csv((dir / "missing.csv").string()), IOError);
    fs::remove_all(dir);
}

TEST_CASE("csv writer emits header plus rows with trailing newline", "[core]") {
    std::ostringstream os;
    {
        CsvWriter w(os);
        w.row({"a", "b"});
        w.row({fmt_num(1.5), fmt_num(std::uint64_t{2})});
    }
    CHECK(os.str() == "a,b\n1.5,2\n");
}
