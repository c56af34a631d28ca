// End-to-end checks of the command line binary: output schemas, determinism,
// config precedence, and exit codes. The binary path is injected by the build.
#include "test_util.hpp"

#include <mbot/analytic1d.hpp>
#include <mbot/io.hpp>
#include <mbot/minibatch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace mbot;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mbot_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string sh_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'')
            q += "'\\''";
        else
            q += c;
    }
    q += "'";
    return q;
}

// Runs the binary with the given arguments, returns the exit code. stdout and
// stderr land in files under dir so failures can be inspected.
int run_cli(const TempDir& dir, const std::vector<std::string>& args,
            std::string* stdout_text = nullptr) {
    static int invocation = 0;
    const std::string out_file = dir.file("stdout_" + std::to_string(invocation) + ".txt");
    const std::string err_file = dir.file("stderr_" + std::to_string(invocation) + ".txt");
    ++invocation;
    std::string cmd = sh_quote(MBOT_CLI_PATH);
    for (const std::string& a : args) cmd += " " + sh_quote(a);
    cmd += " > " + sh_quote(out_file) + " 2> " + sh_quote(err_file);
    const int status = std::system(cmd.c_str());
    if (stdout_text) *stdout_text = testutil::slurp(out_file);
    if (status == -1) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return 128;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t pos = line.find(',', start);
            if (pos == std::string::npos) pos = line.size();
            cells.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

std::size_t col_index(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    FAIL("missing column " << name);
    return 0;
}

void save_cloud(const std::string& path, std::size_t n, std::size_t d, std::uint64_t seed,
                bool lumpy) {
    Rng rng(seed, "cli-cloud", 0);
    const PointCloud c = testutil::random_cloud(n, d, rng);
    if (lumpy) {
        const Vec w = testutil::random_simplex(n, rng);
        save_cloud_csv(path, c, &w);
    } else {
        save_cloud_csv(path, c);
    }
}

}  // namespace

TEST_CASE("cli estimate is deterministic and reports zero self distance", "[cli]") {
    TempDir td;
    save_cloud(td.file("a.csv"), 12, 2, 7, true);

    const std::vector<std::string> base = {
        "estimate",      "--source", td.file("a.csv"), "--target", td.file("a.csv"),
        "--kernel",      "w2sq",     "--law",          "without",  "--reweight",
        "uniform",       "--m",      "12",             "-k",       "40",
        "--estimator",   "incomplete", "--seed",       "7"};

    std::vector<std::string> run1 = base;
    run1.insert(run1.end(), {"-o", td.file("out1.csv")});
    REQUIRE(run_cli(td, run1) == 0);

    const auto rows = read_csv(td.file("out1.csv"));
    REQUIRE(rows.size() == 2);
    const std::vector<std::string> expect_header = {
        "kernel", "law",  "reweight", "estimator", "debias", "m",      "k",
        "p",      "eps",  "seed",     "value",     "std_error", "batches"};
    REQUIRE(rows[0] == expect_header);
    const auto& r = rows[1];
    CHECK(r[col_index(rows[0], "kernel")] == "w2sq");
    CHECK(r[col_index(rows[0], "m")] == "12");
    CHECK(r[col_index(rows[0], "k")] == "40");
    CHECK(r[col_index(rows[0], "seed")] == "7");
    // every batch pairs a subset with itself, so every batch value is zero
    CHECK(std::stod(r[col_index(rows[0], "value")]) == 0.0);
    CHECK(std::stod(r[col_index(rows[0], "std_error")]) == 0.0);

    std::vector<std::string> run2 = base;
    run2.insert(run2.end(), {"-o", td.file("out2.csv")});
    REQUIRE(run_cli(td, run2) == 0);
    CHECK(testutil::slurp(td.file("out1.csv")) == testutil::slurp(td.file("out2.csv")));

    // '-' sends the same bytes to stdout
    std::vector<std::string> run3 = base;
    run3.insert(run3.end(), {"-o", "-"});
    std::string captured;
    REQUIRE(run_cli(td, run3, &captured) == 0);
    CHECK(captured == testutil::slurp(td.file("out1.csv")));
}

TEST_CASE("cli estimate debias complete self loss is exactly zero", "[cli]") {
    TempDir td;
    save_cloud(td.file("b.csv"), 7, 2, 9, true);
    REQUIRE(run_cli(td, {"estimate", "--source", td.file("b.csv"), "--target",
                         td.file("b.csv"), "--kernel", "sinkhorn", "--eps", "0.7", "--law",
                         "with", "--reweight", "normalized", "--m", "3", "--estimator",
                         "complete", "--debias", "-o", td.file("dbg.csv")}) == 0);
    const auto rows = read_csv(td.file("dbg.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][col_index(rows[0], "estimator")] == "complete");
    CHECK(rows[1][col_index(rows[0], "debias")] == "1");
    CHECK(rows[1][col_index(rows[0], "value")] == "0");
}

TEST_CASE("cli plan writes a sorted sparse plan and a truthful audit", "[cli]") {
    TempDir td;
    save_cloud(td.file("a.csv"), 12, 2, 21, true);
    save_cloud(td.file("b.csv"), 10, 2, 22, false);

    REQUIRE(run_cli(td, {"plan", "--source", td.file("a.csv"), "--target", td.file("b.csv"),
                         "--mode", "incomplete", "--m", "4", "-k", "25", "--seed", "3",
                         "-o", td.file("plan.csv"), "--audit-out", td.file("audit.csv")}) ==
            0);

    const auto plan = read_csv(td.file("plan.csv"));
    REQUIRE(plan.size() >= 2);
    REQUIRE(plan[0] == std::vector<std::string>{"i", "j", "mass"});
    double mass = 0.0;
    std::pair<long, long> prev{-1, -1};
    for (std::size_t r = 1; r < plan.size(); ++r) {
        const long i = std::stol(plan[r][0]);
        const long j = std::stol(plan[r][1]);
        const double v = std::stod(plan[r][2]);
        CHECK(i >= 0);
        CHECK(i < 12);
        CHECK(j >= 0);
        CHECK(j < 10);
        CHECK(v > 0.0);
        CHECK(std::pair<long, long>{i, j} > prev);
        prev = {i, j};
        mass += v;
    }
    CHECK(mass == Catch::Approx(1.0).margin(1e-9));

    const auto audit = read_csv(td.file("audit.csv"));
    REQUIRE(audit.size() == 2);
    const auto& h = audit[0];
    REQUIRE(h == std::vector<std::string>{"n_rows", "n_cols", "batch_count", "total_mass",
                                          "nnz", "nnz_bound", "share", "row_l1", "col_l1",
                                          "max_row_dev"});
    CHECK(audit[1][0] == "12");
    CHECK(audit[1][1] == "10");
    CHECK(audit[1][2] == "25");
    const long nnz = std::stol(audit[1][4]);
    const long bound = std::stol(audit[1][5]);
    CHECK(bound == 25 * (2 * 4 - 1));
    CHECK(nnz <= bound);
    CHECK(nnz == static_cast<long>(plan.size()) - 1);
    CHECK(std::stod(audit[1][3]) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("cli oracle commands match the library closed forms", "[cli]") {
    TempDir td;

    SECTION("plan1d") {
        REQUIRE(run_cli(td, {"oracle", "plan1d", "--n", "5", "--m", "2", "-o",
                             td.file("p.csv")}) == 0);
        const auto rows = read_csv(td.file("p.csv"));
        REQUIRE(rows.size() == 1 + 25);
        REQUIRE(rows[0] == std::vector<std::string>{"i", "j", "mass"});
        const Matrix P = mb_plan_1d(5, 2);
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const std::size_t i = std::stoul(rows[r][0]);
            const std::size_t j = std::stoul(rows[r][1]);
            CHECK(std::stod(rows[r][2]) == Catch::Approx(P(i, j)).margin(1e-15));
        }
    }

    SECTION("reweight normalizes raw weights then enumerates") {
        REQUIRE(run_cli(td, {"oracle", "reweight", "--law", "without", "--reweight",
                             "normalized", "--weights", "2,1,1,4", "--m", "2", "-o",
                             td.file("rw.csv")}) == 0);
        const auto rows = read_csv(td.file("rw.csv"));
        REQUIRE(rows.size() == 5);
        const Vec a = {0.25, 0.125, 0.125, 0.5};
        const Vec ew = expected_reweight(Law::WithoutReplacement,
                                         Reweight::Normalized, a, 2);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(std::stod(rows[i + 1][1]) == Catch::Approx(ew[i]).margin(1e-15));
    }
}

TEST_CASE("cli config file fills defaults and flags win over it", "[cli]") {
    TempDir td;
    save_cloud(td.file("a.csv"), 10, 2, 31, false);
    save_cloud(td.file("b.csv"), 9, 2, 32, false);
    {
        std::ofstream cfg(td.file("cfg.json"));
        cfg << R"({"m": 4, "seed": 5, "kernel": "w1", "k": 11})";
    }
    REQUIRE(run_cli(td, {"--config", td.file("cfg.json"), "estimate", "--source",
                         td.file("a.csv"), "--target", td.file("b.csv"), "--m", "8", "-o",
                         td.file("out.csv")}) == 0);
    const auto rows = read_csv(td.file("out.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][col_index(rows[0], "m")] == "8");        // flag beats config
    CHECK(rows[1][col_index(rows[0], "kernel")] == "w1");  // config beats default
    CHECK(rows[1][col_index(rows[0], "k")] == "11");
    CHECK(rows[1][col_index(rows[0], "seed")] == "5");
}

TEST_CASE("cli seed falls back to the environment variable", "[cli]") {
    TempDir td;
    save_cloud(td.file("a.csv"), 10, 2, 41, true);
    save_cloud(td.file("b.csv"), 8, 2, 42, false);
    const std::vector<std::string> tail = {
        "--source", td.file("a.csv"), "--target", td.file("b.csv"),
        "--kernel", "w2sq", "--m", "4", "-k", "13", "--estimator", "incomplete"};

    ::setenv("MBOT_SEED", "123", 1);
    std::vector<std::string> env_run = {"estimate"};
    env_run.insert(env_run.end(), tail.begin(), tail.end());
    env_run.insert(env_run.end(), {"-o", td.file("env.csv")});
    REQUIRE(run_cli(td, env_run) == 0);
    ::unsetenv("MBOT_SEED");

    std::vector<std::string> flag_run = {"estimate"};
    flag_run.insert(flag_run.end(), tail.begin(), tail.end());
    flag_run.insert(flag_run.end(), {"--seed", "123", "-o", td.file("flag.csv")});
    REQUIRE(run_cli(td, flag_run) == 0);

    CHECK(testutil::slurp(td.file("env.csv")) == testutil::slurp(td.file("flag.csv")));
    const auto rows = read_csv(td.file("env.csv"));
    CHECK(rows[1][col_index(rows[0], "seed")] == "123");
}

TEST_CASE("cli maps failures to documented exit codes", "[cli]") {
    TempDir td;
    save_cloud(td.file("a.csv"), 8, 2, 51, false);
    const std::string ac = td.file("a.csv");

    SECTION("missing input file exits 1") {
        CHECK(run_cli(td, {"estimate", "--source", td.file("nope.csv"), "--target", ac,
                           "--m", "2"}) == 1);
    }
    SECTION("missing config file exits 1") {
        CHECK(run_cli(td, {"--config", td.file("nope.json"), "estimate", "--source", ac,
                           "--target", ac, "--m", "2"}) == 1);
    }
    SECTION("unknown kernel exits 2") {
        CHECK(run_cli(td, {"estimate", "--source", ac, "--target", ac, "--kernel",
                           "frobnicate", "--m", "2"}) == 2);
    }
    SECTION("unknown flag exits 2") {
        CHECK(run_cli(td, {"estimate", "--source", ac, "--target", ac, "--frobnicate"}) ==
              2);
    }
    SECTION("invalid batch size exits 2") {
        CHECK(run_cli(td, {"estimate", "--source", ac, "--target", ac, "--m", "0"}) == 2);
    }
    SECTION("malformed config json exits 2") {
        std::ofstream(td.file("bad.json")) << "{not json";
        CHECK(run_cli(td, {"--config", td.file("bad.json"), "estimate", "--source", ac,
                           "--target", ac}) == 2);
    }
    SECTION("missing subcommand exits 2") {
        CHECK(run_cli(td, {}) == 2);
    }
    SECTION("diverging flow exits 3") {
        save_cloud(td.file("t.csv"), 8, 2, 52, false);
        CHECK(run_cli(td, {"flow", "--source", ac, "--target", td.file("t.csv"), "--eta",
                           "10000", "--iterations", "200", "--m", "4", "-k", "2", "-o",
                           td.file("trace.csv")}) == 3);
    }
}
