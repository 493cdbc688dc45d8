#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "topicreg/cli.hpp"

using namespace topicreg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() / ("topicreg_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = cli::main_entry(args, out, err);
    return {code, out.str(), err.str()};
}

std::size_t data_rows(const std::string& csv)
{
    std::size_t lines = 0;
    for (char c : csv)
        lines += c == '\n';
    return lines - 1;
}

// Small, fast sampler settings shared by the round-trip tests.
const std::vector<std::string> quick{"--burnin", "60", "--iterations", "30", "--keep", "5"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("argument parsing")
{
    const auto c = cli::parse_args({"train", "--model", "lda", "--k", "26", "--in", "c.csv", "--out", "m.json"});
    CHECK(c.command == cli::Command::train);
    CHECK(c.model == ModelKind::lda);
    CHECK(c.k == 26);
    CHECK(c.input == "c.csv");
    CHECK(c.output == "m.json");

    const auto s = cli::parse_args({"select-k", "--model", "hmtm", "--k-min", "2", "--k-max", "40"});
    CHECK(s.command == cli::Command::select_k);
    CHECK(s.model == ModelKind::hmtm);
    const auto range = s.k_range();
    REQUIRE(range.size() == 39);
    CHECK(range.front() == 2);
    CHECK(range.back() == 40);

    const auto p = cli::parse_args({"evaluate", "--model", "hmtm-persistent", "--k", "3", "--in", "x", "--method",
                                    "loocv", "--regression-only", "--no-stem", "--threads", "4", "--seed", "77"});
    CHECK(p.model == ModelKind::hmtm_persistent);
    CHECK(p.method == "loocv");
    CHECK(p.regression_only);
    CHECK_FALSE(p.stem);
    CHECK(p.lowercase);
    CHECK(p.threads == 4);
    CHECK(p.seed == 77);
    CHECK(p.pipeline_config().hmtm.gamma == persistent_priors(3));

    CHECK_THROWS_AS(cli::parse_args({"train", "--model", "bogus"}), cli::UsageError);
    CHECK_THROWS_AS(cli::parse_args({"train", "--in", "a", "--out", "b", "--frobnicate"}), cli::UsageError);
    CHECK_THROWS_AS(cli::parse_args({"evaluate", "--in", "a", "--method", "bootstrap"}), cli::UsageError);
    CHECK_THROWS_AS(cli::parse_args({}), cli::UsageError);
}

TEST_CASE("exit codes")
{
    CHECK(run({"train", "--model", "bogus", "--in", "a", "--out", "b"}).code == 2);
    CHECK(run({"train", "--model", "bogus"}).code == 2);
    // paths are checked before any work starts
    CHECK(run({"train", "--in", "a"}).code == 2);
    CHECK(run({"select-k", "--in", "a", "--k-min", "5", "--k-max", "3"}).code == 2);
    CHECK(run({"predict", "--in", "a", "--out", "b"}).code == 2);
    const auto missing = run({"train", "--in", "/nonexistent/corpus.csv", "--out", "/tmp/never.json"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("/nonexistent/corpus.csv") != std::string::npos);

#ifdef TOPICREG_CLI_PATH
    const std::string exe = TOPICREG_CLI_PATH;
    auto status = [&](const std::string& args) {
        const int raw = std::system((exe + " " + args + " >/dev/null 2>&1").c_str());
        return WEXITSTATUS(raw);
    };
    CHECK(status("train --model bogus --in a --out b") == 2);
    CHECK(status("train --in /nonexistent/x.csv --out /tmp/y.json") == 1);
    CHECK(status("--help") == 0);
#endif
}

TEST_CASE("simulate, train and predict round trip")
{
    TempDir dir;
    REQUIRE(run({"simulate", "--model", "lda", "--k", "3", "--docs", "40", "--vocab", "30", "--out", dir / "c.csv",
                 "--truth", dir / "truth.json", "--seed", "5"})
                .code == 0);
    const std::string corpus = slurp(dir / "c.csv");
    CHECK(data_rows(corpus) == 40);
    CHECK(corpus.rfind("id,text,response\n", 0) == 0);
    const auto truth = nlohmann::json::parse(slurp(dir / "truth.json"));
    CHECK(truth["responses"].size() == 40);

    const auto trained = run(with({"train", "--model", "lda", "--k", "3", "--in", dir / "c.csv", "--out", dir / "m.json"}, quick));
    REQUIRE(trained.code == 0);
    const auto model = nlohmann::json::parse(slurp(dir / "m.json"));
    CHECK(model["config"]["kind"] == "lda");

    const auto predicted = run({"predict", "--model-file", dir / "m.json", "--in", dir / "c.csv", "--out", dir / "p.csv"});
    REQUIRE(predicted.code == 0);
    const std::string preds = slurp(dir / "p.csv");
    CHECK(data_rows(preds) == 40);
    CHECK(preds.rfind("doc_id,", 0) == 0);
    CHECK(predicted.err.find("skipped 0") != std::string::npos);
}

TEST_CASE("documents outside the model vocabulary are skipped, not fatal")
{
    TempDir dir;
    REQUIRE(run({"simulate", "--docs", "20", "--vocab", "15", "--out", dir / "c.csv"}).code == 0);
    REQUIRE(run(with({"train", "--in", dir / "c.csv", "--out", dir / "m.json"}, quick)).code == 0);
    {
        std::ofstream f(dir / "new.csv");
        f << "id,text\nn1,zebra quokka\nn2,axolotl\n";
    }
    const auto r = run({"predict", "--model-file", dir / "m.json", "--in", dir / "new.csv", "--out", dir / "p.csv"});
    CHECK(r.code == 0);
    CHECK(r.err.find("skipped 2") != std::string::npos);
    const std::string preds = slurp(dir / "p.csv");
    CHECK(data_rows(preds) == 2);
    CHECK(preds.find("no in-vocabulary tokens") != std::string::npos);
}

TEST_CASE("loocv on a simulated HMTM corpus")
{
    TempDir dir;
    // diffuse priors so that both classes occur
    REQUIRE(run({"simulate", "--model", "hmtm", "--gamma", "1", "--beta", "0.5", "--k", "2", "--docs", "16", "--vocab",
                 "20", "--length-min", "40", "--length-max", "60", "--response", "class", "--out", dir / "h.csv"})
                .code == 0);
    const auto r = run({"evaluate", "--model", "hmtm-persistent", "--k", "2", "--em-iterations", "20", "--method",
                        "loocv", "--in", dir / "h.csv", "--out", dir / "r.json", "--threads", "4"});
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "r.json"));
    REQUIRE(report.contains("brier"));
    CHECK(report["brier"].get<double>() >= 0.0);
    CHECK(report["brier"].get<double>() <= 2.0);
    CHECK(report["evaluated"].get<int>() + report["excluded"].get<int>() == 16);
}

TEST_CASE("outputs are byte-reproducible and inputs untouched")
{
    TempDir dir;
    REQUIRE(run({"simulate", "--docs", "30", "--vocab", "20", "--response", "binary", "--seed", "3", "--out",
                 dir / "c.csv"})
                .code == 0);
    REQUIRE(run({"simulate", "--docs", "30", "--vocab", "20", "--response", "binary", "--seed", "3", "--out",
                 dir / "c2.csv"})
                .code == 0);
    CHECK(slurp(dir / "c.csv") == slurp(dir / "c2.csv"));
    const std::string before = slurp(dir / "c.csv");
    const auto stamp = fs::last_write_time(dir / "c.csv");

    for (const char* name : {"m1.json", "m2.json"})
        REQUIRE(run(with({"train", "--in", dir / "c.csv", "--out", dir / name, "--threads", "2"}, quick)).code == 0);
    CHECK(slurp(dir / "m1.json") == slurp(dir / "m2.json"));

    for (const char* name : {"e1.json", "e2.json"})
        REQUIRE(run(with({"evaluate", "--in", dir / "c.csv", "--out", dir / name, "--repeats", "4", "--train-fraction",
                          "0.8", "--threads", "3"},
                         quick))
                    .code == 0);
    CHECK(slurp(dir / "e1.json") == slurp(dir / "e2.json"));

    for (const char* name : {"s1.json", "s2.json"})
        REQUIRE(run(with({"select-k", "--in", dir / "c.csv", "--out", dir / name, "--k-min", "2", "--k-max", "3",
                          "--folds", "3"},
                         quick))
                    .code == 0);
    CHECK(slurp(dir / "s1.json") == slurp(dir / "s2.json"));

    CHECK(slurp(dir / "c.csv") == before);
    CHECK(fs::last_write_time(dir / "c.csv") == stamp);
}

TEST_CASE("clean writes the normalised text")
{
    TempDir dir;
    {
        std::ofstream f(dir / "raw.jsonl");
        f << R"({"id":"a","text":"The Runners were RUNNING, 42 times!","response":"1"})" << '\n';
    }
    const auto r = run({"clean", "--in", dir / "raw.jsonl", "--out", dir / "clean.jsonl"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "clean.jsonl"));
    CHECK(j["text"] == "runner run time");
    CHECK(j["response"] == "1");
}
