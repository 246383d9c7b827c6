#include "commands.hpp"

#include "tpmgrit/errors.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace tpmgrit;
using namespace tpmgrit::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tpmgrit_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream f(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(f, l);) out.push_back(l);
    return out;
}

std::vector<std::string> fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
    return out;
}

ExperimentConfig small(const fs::path& out) {
    ExperimentConfig c;
    c.fine_points = 257;
    c.repeat = 1;
    c.out = out.string();
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TPMGRIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config keys") {
    ExperimentConfig c;
    c.set("relaxation", "F");
    c.set("workers", "4");
    c.set("bench_workers", "1,3");
    CHECK(c.relaxation == Relaxation::F);
    CHECK(c.executor().mode == ExecutionMode::threaded);
    CHECK(c.bench_workers == std::vector<std::size_t>{1, 3});
    CHECK_THROWS_AS(c.set("bogus", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("workers", "many"), ConfigError);
    CHECK_THROWS_AS(c.set("relaxation", "FFC"), ConfigError);
    CHECK(split_assignment("a=b=c") == std::pair<std::string, std::string>{"a", "b=c"});
    CHECK_THROWS_AS(split_assignment("novalue"), ConfigError);

    ExperimentConfig d;
    apply_text(d, "# comment\nresidual_tol = 1e-6\n\nbackend = heat  # trailing\n", "inline");
    CHECK(d.residual_tol == 1e-6);
    CHECK(d.backend == "heat");
    CHECK_THROWS_AS(apply_text(d, "no equals sign\n", "inline"), ConfigError);
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.0}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("run writes the documented files") {
    const fs::path dir = scratch("run");
    std::ostringstream out, err;
    REQUIRE(dispatch("run", small(dir), out, err) == exit_ok);
    const auto res = lines(dir / "residuals.csv");
    const auto sum = lines(dir / "summary.csv");
    REQUIRE(!res.empty());
    REQUIRE(!sum.empty());
    CHECK(res[0] == residuals_header);
    CHECK(sum[0] == summary_header);
    for (std::size_t i = 1; i < sum.size(); ++i) {
        const auto f = fields(sum[i]);
        REQUIRE(f.size() == 4);
        CHECK(std::stoul(f[0]) == i - 1);
    }
    for (std::size_t i = 1; i < res.size(); ++i) {
        const auto f = fields(res[i]);
        REQUIRE(f.size() == 3);
        CHECK(std::stoul(f[1]) % 8 == 0);
    }
    for (const auto& p : fs::directory_iterator(dir)) CHECK(p.path().extension() != ".tmp");

    // meta.txt reproduces the configuration.
    const ExperimentConfig back = load_meta(dir / "meta.txt");
    CHECK(back.entries() == small(dir).entries());
    const auto meta = lines(dir / "meta.txt");
    CHECK(std::find(meta.begin(), meta.end(), "result.converged_reason = ic_tol") != meta.end());
}

TEST_CASE("run is reproducible apart from wall-clock time") {
    const fs::path a = scratch("rep_a"), b = scratch("rep_b");
    std::ostringstream out, err;
    ExperimentConfig ca = small(a), cb = small(b);
    ca.workers = 4;
    REQUIRE(dispatch("run", ca, out, err) == exit_ok);
    REQUIRE(dispatch("run", cb, out, err) == exit_ok);
    CHECK(lines(a / "residuals.csv") == lines(b / "residuals.csv"));
    const auto sa = lines(a / "summary.csv"), sb = lines(b / "summary.csv");
    REQUIRE(sa.size() == sb.size());
    for (std::size_t i = 1; i < sa.size(); ++i) {
        const auto fa = fields(sa[i]), fb = fields(sb[i]);
        CHECK(fa[0] == fb[0]);
        CHECK(fa[1] == fb[1]);
        CHECK(fa[2] == fb[2]);
    }
}

TEST_CASE("a loose tolerance stops after the seed") {
    const fs::path dir = scratch("loose");
    ExperimentConfig c = small(dir);
    c.periodic = false;
    c.residual_tol = 1e6;
    std::ostringstream out, err;
    REQUIRE(dispatch("run", c, out, err) == exit_ok);
    CHECK(lines(dir / "summary.csv").size() == 2);
    const auto f = fields(lines(dir / "summary.csv")[1]);
    CHECK(std::stod(f[2]) > 0.0);  // |u(T) - u(0)| is reported for every run
}

TEST_CASE("residual spikes sit next to t = 0 in the CSV") {
    const fs::path dir = scratch("spike");
    ExperimentConfig c = small(dir);
    c.fine_points = 1025;
    std::ostringstream out, err;
    REQUIRE(dispatch("run", c, out, err) == exit_ok);
    std::map<std::size_t, std::pair<double, std::size_t>> top;
    const auto res = lines(dir / "residuals.csv");
    for (std::size_t i = 1; i < res.size(); ++i) {
        const auto f = fields(res[i]);
        const std::size_t it = std::stoul(f[0]);
        const double v = std::stod(f[2]);
        auto& t = top[it];
        if (v > t.first) t = {v, std::stoul(f[1])};
    }
    for (const auto& [it, t] : top) {
        if (it >= 1 && t.first > 0.0) CHECK(t.second <= 16);
    }
}

TEST_CASE("compare, oracle and bench") {
    const fs::path dir = scratch("cmp");
    ExperimentConfig c = small(dir);
    c.cycles = 1;
    std::ostringstream out, err;
    REQUIRE(dispatch("compare", c, out, err) == exit_ok);
    const auto conv = lines(dir / "convergence.csv");
    REQUIRE(conv.size() == 2);
    CHECK(conv[0] == convergence_header);
    CHECK(fields(conv[1])[0] == "1");

    c.reference = "cycle:3";
    CHECK(dispatch("compare", c, out, err) == exit_ok);

    std::ostringstream oracle;
    REQUIRE(dispatch("oracle", c, oracle, err) == exit_ok);
    CHECK(oracle.str().find("spectral_radius = ") != std::string::npos);

    c.bench_workers = {1};
    REQUIRE(dispatch("bench", c, out, err) == exit_ok);
    const auto sp = lines(dir / "speedup.csv");
    REQUIRE(sp.size() == 2);
    CHECK(sp[0] == speedup_header);
    CHECK(fields(sp[1])[0] == "1");
}

TEST_CASE("exit codes") {
    std::ostringstream out, err;
    ExperimentConfig bad = small(scratch("bad"));
    bad.workers = 0;
    CHECK(dispatch("run", bad, out, err) == exit_config);

    ExperimentConfig unstable = small(scratch("unstable"));
    unstable.backend = "scalar";
    unstable.lambda = -1.0;
    CHECK(dispatch("oracle", unstable, out, err) == exit_solver);

    CHECK(run_cli("run --set bogus=1") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("oracle --set backend=scalar --set lambda=-1 --set fine_points=65") == 3);
    CHECK(run_cli("oracle --set backend=scalar --set fine_points=65") == 0);
}
