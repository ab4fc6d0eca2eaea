#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cfset/cli.hpp"
#include "fig7_checks.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

fs::path temp_dir() {
    static std::mt19937_64 rng(std::random_device{}());
    fs::path p = fs::temp_directory_path() / ("cfset-cli-" + std::to_string(rng()));
    fs::create_directories(p);
    return p;
}

Run run(const fs::path& dir, std::vector<std::string> args) {
    args.insert(args.begin(), {"cfset", "--out", dir.string()});
    std::ostringstream out, err;
    int code = cfset::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("explore at depth zero") {
    fs::path d = temp_dir();
    Run r = run(d, {"explore", "--depth", "0"});
    CHECK(r.code == cfset::cli::kClean);
    CHECK(fs::exists(d / "manifest.json"));
    std::string m = slurp(d / "manifest.json");
    CHECK(m.find("\"explore\"") != std::string::npos);
    CHECK(m.find("\"exit_code\": 0") != std::string::npos);
    fs::remove_all(d);
}

TEST_CASE("usage errors") {
    fs::path d = temp_dir();
    CHECK(run(d, {"explore", "--bogus"}).code == cfset::cli::kUsage);
    CHECK(run(d, {}).code == cfset::cli::kUsage);
    CHECK(run(d, {"replay", (d / "missing.script").string()}).code == cfset::cli::kUsage);
    CHECK(run(d, {"stress", "--maintenance", "maybe"}).code == cfset::cli::kUsage);
    fs::remove_all(d);
}

TEST_CASE("replay of the figure 7 run") {
    fs::path d = temp_dir();
    Run r = run(d, {"replay", fig7::script_path("fig7.script")});
    CHECK(r.code == cfset::cli::kClean);
    auto at = r.out.find("[M_a]");
    REQUIRE(at != std::string::npos);
    CHECK(r.out.find("Set={10,14,15,17,18,22}", at) != std::string::npos);
    CHECK(fs::exists(d / "linearization.txt"));
    fs::remove_all(d);
}

TEST_CASE("replay of an empty and a corrupted script") {
    fs::path d = temp_dir();
    std::ofstream(d / "empty.script") << "workers 1\n";
    Run e = run(d, {"replay", (d / "empty.script").string()});
    CHECK(e.code == cfset::cli::kClean);
    CHECK(e.out.find("Set={}") != std::string::npos);

    std::ofstream(d / "bad.script") << "workers 1\n1 M0 InvokeInsert 5\n1 D2 Delete\n";
    Run b = run(d, {"replay", (d / "bad.script").string()});
    CHECK(b.code == cfset::cli::kViolation);
    CHECK(b.out.find("NOT ENABLED step 1") != std::string::npos);

    std::ofstream(d / "garbled.script") << "workers 1\nthis is not a step\n";
    Run g = run(d, {"replay", (d / "garbled.script").string()});
    CHECK(g.code == cfset::cli::kViolation);
    CHECK(g.out.find("MALFORMED") != std::string::npos);
    fs::remove_all(d);
}

TEST_CASE("explore with the original PT2 writes a counterexample") {
    fs::path d = temp_dir();
    Run r = run(d, {"explore", "--pt2", "original", "--depth", "20", "--no-lin"});
    CHECK(r.code == cfset::cli::kViolation);
    fs::path cex = d / "cex-0-sp_pdc-remains-pkc.script";
    REQUIRE(fs::exists(cex));
    Run again = run(d, {"replay", cex.string(), "--pt2", "original", "--no-lin"});
    CHECK(again.code == cfset::cli::kViolation);
    CHECK(again.out.find("sp:pdc-remains-pkc") != std::string::npos);
    CHECK(run(d, {"replay", cex.string(), "--no-lin"}).code == cfset::cli::kClean);
    fs::remove_all(d);
}

TEST_CASE("walk and stress") {
    fs::path d = temp_dir();
    CHECK(run(d, {"walk", "--walks", "20", "--len", "40", "--seed", "3"}).code == cfset::cli::kClean);

    Run s = run(d, {"stress", "--threads", "3", "--ops", "100"});
    CHECK(s.code == cfset::cli::kClean);
    CHECK(fs::exists(d / "history.txt"));

    auto det = [&](const std::string& name) {
        run(d, {"stress", "--deterministic", "--seed", "5", "--history", (d / name).string()});
        return slurp(d / name);
    };
    std::string h1 = det("h1.txt");
    CHECK_FALSE(h1.empty());
    CHECK(h1 == det("h2.txt"));
    fs::remove_all(d);
}
