#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Sandbox {
    fs::path dir;

    Sandbox()
    {
        dir = fs::temp_directory_path() / "spnx_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }

    // Runs the CLI with `args`, stdout to out.txt, stderr to err.txt.
    int run(const std::string &args) const
    {
        const std::string cmd = "cd '" + dir.string() + "' && '" SPNX_CLI_PATH "' " + args + " >out.txt 2>err.txt";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string read(const std::string &name) const
    {
        std::ifstream in(dir / name, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write(const std::string &name, const std::string &text) const
    {
        std::ofstream(dir / name, std::ios::binary) << text;
    }
};

std::size_t count_lines(const std::string &s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST_CASE("gen, train, score, explain, eval pipeline")
{
    Sandbox sb;
    REQUIRE(sb.run("gen --n-features 8 --n-samples 400 --n-outliers 10 --seed 3 -o d.csv") == 0);
    CHECK(fs::exists(sb.dir / "d.labels.json"));
    const std::string csv = sb.read("d.csv");
    CHECK(count_lines(csv) == 401);

    REQUIRE(sb.run("train --seed 3 -d d.csv -o m.json") == 0);
    CHECK(sb.read("err.txt").find("nodes") != std::string::npos);
    const auto model = nlohmann::json::parse(sb.read("m.json"));
    CHECK(model["version"] == 1);

    REQUIRE(sb.run("score -m m.json -d d.csv") == 0);
    const std::string scores = sb.read("out.txt");
    CHECK(scores.rfind("row,score\n", 0) == 0);
    CHECK(count_lines(scores) == 401);

    REQUIRE(sb.run("score -m m.json -d d.csv --contamination 0.025 -o s.csv") == 0);
    CHECK(sb.read("s.csv").rfind("row,score,outlier\n", 0) == 0);

    REQUIRE(sb.run("explain -m m.json -d d.csv --labels d.labels.json -o e.jsonl") == 0);
    const std::string lines = sb.read("e.jsonl");
    CHECK(count_lines(lines) == 10);
    {
        std::istringstream in(lines);
        std::string line;
        std::size_t prev = 0;
        bool first = true;
        while (std::getline(in, line)) {
            const auto j = nlohmann::json::parse(line);
            CHECK(j["strategy"] == "backward");
            CHECK(j["evals"] == 8 * 9 / 2 - 1);
            const auto row = j["row"].get<std::size_t>();
            CHECK((first || row > prev));
            prev = row;
            first = false;
        }
    }

    REQUIRE(sb.run("eval -e e.jsonl -d d.csv") == 0);
    const std::string tsv = sb.read("out.txt");
    CHECK(tsv.rfind("n_features\tstrategy\tselection\tmean_f1\tmean_evals\ttrain_s\texplain_s\n", 0) == 0);
    CHECK(tsv.find("\n8\tbackward\telbow\t") != std::string::npos);

    REQUIRE(sb.run("explain -m m.json -d d.csv --rows 5,1,5 --strategy forward --beam-width 3 --selection zscore") ==
            0);
    const std::string two = sb.read("out.txt");
    CHECK(count_lines(two) == 2);
    CHECK(nlohmann::json::parse(two.substr(0, two.find('\n')))["row"] == 1);
    CHECK(two.find("\"strategy\":\"forward\"") != std::string::npos);
    CHECK(two.find("\"selection\":\"zscore\"") != std::string::npos);

    // Flags accept both spellings.
    CHECK(sb.run("explain -m m.json -d d.csv --rows 0 --beam_width 2 --strategy forward") == 0);
}

TEST_CASE("gen is reproducible from the command line")
{
    Sandbox sb;
    REQUIRE(sb.run("gen --n-features 10 --seed 9 -o a.csv") == 0);
    REQUIRE(sb.run("gen --n_features 10 --seed 9 -o b.csv --labels b.json") == 0);
    CHECK(sb.read("a.csv") == sb.read("b.csv"));
    CHECK(sb.read("a.labels.json") == sb.read("b.json"));
}

TEST_CASE("bench writes a summary row per strategy")
{
    Sandbox sb;
    REQUIRE(sb.run("bench --n-features 10 --n-samples 500 --n-outliers 10 --seed 2 -e e.jsonl -s s.tsv") == 0);
    const std::string tsv = sb.read("s.tsv");
    CHECK(count_lines(tsv) == 3);
    CHECK(tsv.find("\n10\tforward\telbow\t") != std::string::npos);
    CHECK(tsv.find("\n10\tbackward\telbow\t") != std::string::npos);
    CHECK(count_lines(sb.read("e.jsonl")) == 20);

    // Same seed, same explanations.
    const std::string first = sb.read("e.jsonl");
    REQUIRE(sb.run("bench --n-features 10 --n-samples 500 --n-outliers 10 --seed 2 -e e.jsonl -s s.tsv") == 0);
    CHECK(sb.read("e.jsonl") == first);

    REQUIRE(sb.run("gen --n-features 6 --n-samples 300 --n-outliers 5 --seed 1 -o g.csv") == 0);
    REQUIRE(sb.run("bench --seed 1 -d g.csv --strategies backward --selections elbow,zscore") == 0);
    const std::string out = sb.read("out.txt");
    CHECK(count_lines(out) == 3);
    CHECK(out.find("\n6\tbackward\tzscore\t") != std::string::npos);
}

TEST_CASE("exit codes")
{
    Sandbox sb;
    sb.write("ok.csv", "a,b\n1,2\n3,4\n5,6\n");
    sb.write("hole.csv", "a,b\n1,\n3,4\n");
    sb.write("bad.json", "{\"version\":1,\"schema\":[],\"root\":0,\"nodes\":[]}");

    CHECK(sb.run("") == 2);
    CHECK(sb.run("frobnicate") == 2);
    CHECK(sb.run("gen -o x.csv") == 2); // --seed is mandatory
    CHECK(sb.run("train -d ok.csv -o m.json") == 2);
    CHECK(sb.run("gen --seed 1 --n-features 3 --subspace-min 4 --subspace-max 4 -o x.csv") == 2);
    CHECK(sb.run("train --seed 1 --alpha 2 -d ok.csv -o m.json") == 2);

    CHECK(sb.run("train --seed 1 -d hole.csv -o m.json") == 3);
    CHECK(sb.read("err.txt").find("row 1, column 2") != std::string::npos);
    CHECK(sb.run("train --seed 1 -d missing.csv -o m.json") == 3);

    CHECK(sb.run("score -m bad.json -d ok.csv") == 4);
    CHECK(sb.run("score -m nothere.json -d ok.csv") == 4);

    REQUIRE(sb.run("train --seed 1 -d ok.csv -o m.json") == 0);
    CHECK(sb.run("explain -m m.json -d ok.csv --strategy sideways") == 2);
    CHECK(sb.run("explain -m m.json -d ok.csv --rows 1 --labels l.json") == 2);
    CHECK(sb.run("explain -m m.json -d ok.csv --rows 7") == 3);
    CHECK(sb.run("score -m m.json -d ok.csv --contamination 1.5") == 2);
    CHECK(sb.run("--help") == 0);
}
