#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

CmdResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out_file = dir / "cmd_output.txt";
    const std::string cmd = std::string(EVOCAF_CLI_PATH) + " " + args + " > " +
                            out_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CmdResult res;
    res.exit_code = WEXITSTATUS(status);
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    res.output = ss.str();
    return res;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int count_lines(const fs::path& file) {
    std::ifstream in(file);
    std::string line;
    int n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

} // namespace

TEST_CASE("run: tiny campaign aggregates per configuration") {
    const fs::path dir = fresh_dir("evocaf_cli_run");
    {
        json config;
        config["instances"] = {"ackley2"};
        config["budgets"] = {5.0};
        config["afs"] = {"ei"};
        config["seeds"] = {1, 2};
        config["output_dir"] = (dir / "out").string();
        std::ofstream out(dir / "campaign.json");
        out << config.dump();
    }
    const CmdResult res =
        run_cli("run --config " + (dir / "campaign.json").string() + " --jobs 2", dir);
    CHECK(res.exit_code == 0);

    const fs::path summary = dir / "out" / "summary.csv";
    REQUIRE(fs::exists(summary));
    std::ifstream in(summary);
    std::string header, row, extra;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "instance,budget,af,mean_gap,mean_evals,std_gap");
    CHECK(row.rfind("ackley2,5,ei,", 0) == 0);
    CHECK(!std::getline(in, extra)); // one aggregated row

    CHECK(fs::exists(dir / "out" / "ackley2_b5_ei_s1.jsonl"));
    CHECK(fs::exists(dir / "out" / "ackley2_b5_ei_s2.jsonl"));
    CHECK(fs::exists(dir / "out" / "ackley2_b5_ei_s1.summary.json"));

    // the csv mean is the arithmetic mean of the per-run summaries
    double gap_sum = 0.0;
    for (int seed : {1, 2}) {
        std::ifstream sj(dir / "out" / ("ackley2_b5_ei_s" + std::to_string(seed) +
                                        ".summary.json"));
        json j;
        sj >> j;
        gap_sum += j["gap"].get<double>();
    }
    std::stringstream ss(row.substr(row.find(",ei,") + 4));
    double mean_gap = 0.0;
    ss >> mean_gap;
    CHECK(mean_gap == doctest::Approx(gap_sum / 2.0).epsilon(1e-5));
}

TEST_CASE("run: invalid config exits with the usage code") {
    const fs::path dir = fresh_dir("evocaf_cli_badcfg");
    {
        std::ofstream out(dir / "bad.json");
        out << R"({"instances": [], "budgets": [5], "afs": ["ei"], "seeds": [1]})";
    }
    CHECK(run_cli("run --config " + (dir / "bad.json").string(), dir).exit_code == 2);
    CHECK(run_cli("run --config " + (dir / "missing.json").string(), dir).exit_code == 2);
    {
        std::ofstream out(dir / "badaf.json");
        out << R"({"instances": ["ackley2"], "budgets": [5], "afs": ["ucb"], "seeds": [1]})";
    }
    CHECK(run_cli("run --config " + (dir / "badaf.json").string(), dir).exit_code == 2);
}

TEST_CASE("hist: hand-checked binning") {
    const fs::path dir = fresh_dir("evocaf_cli_hist");
    {
        std::ofstream out(dir / "run.jsonl");
        for (double z : {0.2, 0.2, 0.9})
            out << json{{"x", {0.0, 0.0}}, {"y", 1.0}, {"z", z}, {"cum_budget", 0.0},
                        {"wall_ms", 0.0}}
                       .dump()
                << "\n";
    }
    const CmdResult res = run_cli("hist " + (dir / "run.jsonl").string() +
                                      " --bins 2 --lo 0 --hi 1 --output " +
                                      (dir / "hist.csv").string(),
                                  dir);
    CHECK(res.exit_code == 0);
    std::ifstream in(dir / "hist.csv");
    std::string header, b0, b1;
    std::getline(in, header);
    std::getline(in, b0);
    std::getline(in, b1);
    CHECK(header == "bin_lo,bin_hi,count");
    CHECK(b0 == "0,0.5,2");
    CHECK(b1 == "0.5,1,1");

    // a single bin holds every evaluation
    const CmdResult one = run_cli("hist " + (dir / "run.jsonl").string() +
                                      " --bins 1 --output " + (dir / "one.csv").string(),
                                  dir);
    CHECK(one.exit_code == 0);
    std::ifstream in1(dir / "one.csv");
    std::getline(in1, header);
    std::getline(in1, b0);
    CHECK(b0.substr(b0.rfind(',') + 1) == "3");

    CHECK(run_cli("hist " + (dir / "nothere.jsonl").string() + " --bins 2", dir).exit_code == 2);
}

TEST_CASE("hist: counts are conserved on generated runs") {
    const fs::path dir = fresh_dir("evocaf_cli_hist_conserve");
    {
        json config;
        config["instances"] = {"rastrigin2"};
        config["budgets"] = {4.0};
        config["afs"] = {"eipu"};
        config["seeds"] = {3};
        config["output_dir"] = (dir / "out").string();
        std::ofstream out(dir / "campaign.json");
        out << config.dump();
    }
    REQUIRE(run_cli("run --config " + (dir / "campaign.json").string(), dir).exit_code == 0);
    const fs::path run_file = dir / "out" / "rastrigin2_b4_eipu_s3.jsonl";
    REQUIRE(fs::exists(run_file));
    const int evals = count_lines(run_file);

    const CmdResult res = run_cli("hist " + run_file.string() + " --bins 7 --output " +
                                      (dir / "h.csv").string(),
                                  dir);
    CHECK(res.exit_code == 0);
    std::ifstream in(dir / "h.csv");
    std::string line;
    std::getline(in, line); // header
    long total = 0;
    while (std::getline(in, line))
        if (!line.empty()) total += std::stol(line.substr(line.rfind(',') + 1));
    CHECK(total == evals);
}

TEST_CASE("validate-program") {
    const fs::path dir = fresh_dir("evocaf_cli_validate");
    const std::string golden = std::string(EVOCAF_SOURCE_DIR) + "/programs/evolcaf.dsl";
    const CmdResult good = run_cli("validate-program " + golden, dir);
    CHECK(good.exit_code == 0);
    CHECK(good.output.find("pass") == 0);

    {
        std::ofstream out(dir / "bad.dsl");
        out << "best_y"; // scalar result: fails the batch-vector contract
    }
    const CmdResult bad = run_cli("validate-program " + (dir / "bad.dsl").string(), dir);
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("fail") == 0);

    CHECK(run_cli("validate-program " + (dir / "missing.dsl").string(), dir).exit_code == 2);
}

TEST_CASE("evolve: mock run writes the audit directory") {
    const fs::path dir = fresh_dir("evocaf_cli_evolve");
    {
        json script;
        script["init"] = {"a\n```\nmean_test_y - best_y\n```",
                          "b\n```\nmean_test_y + std_test_y\n```"};
        script["crossover"] = {"c\n```\nmean_test_y + std_test_y - cost_test_y\n```",
                               "d\n```\nmean_test_y + 2 * std_test_y\n```",
                               "e\n```\nmean_test_y - cost_test_y\n```"};
        script["mutation"] = {"f\n```\nmean_test_y * 1.5 + std_test_y\n```"};
        std::ofstream out(dir / "script.json");
        out << script.dump();
    }
    const std::string run_dir = (dir / "run").string();
    const CmdResult res = run_cli(
        "evolve --provider mock --script " + (dir / "script.json").string() + " --output " +
            run_dir +
            " --generations 3 --pop 2 --seed 5 --instances ackley2 --seeds-per-instance 1 "
            "--budget 5 --prompts " +
            std::string(EVOCAF_SOURCE_DIR) + "/prompts",
        dir);
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(fs::path(run_dir) / "config.json"));
    CHECK(fs::exists(fs::path(run_dir) / "llm_log.jsonl"));
    CHECK(fs::exists(fs::path(run_dir) / "best_program.dsl"));
    CHECK(fs::exists(fs::path(run_dir) / "generation_3.json"));

    std::ifstream trace(fs::path(run_dir) / "fitness_trace.csv");
    std::string header, line;
    std::getline(trace, header);
    double prev_best = std::numeric_limits<double>::infinity();
    int rows = 0;
    while (std::getline(trace, line)) {
        if (line.empty()) continue;
        ++rows;
        const auto first_comma = line.find(',');
        const auto second_comma = line.find(',', first_comma + 1);
        const double best = std::stod(line.substr(first_comma + 1, second_comma - first_comma));
        CHECK(best <= prev_best);
        prev_best = best;
    }
    CHECK(rows == 3);
}

TEST_CASE("evolve: http provider without credentials exits before any run") {
    const fs::path dir = fresh_dir("evocaf_cli_nokey");
    const CmdResult res = run_cli(
        "evolve --provider http --output " + (dir / "run").string() + " --generations 1 --pop 1",
        dir);
    CHECK(res.exit_code == 2);
}

TEST_CASE("evolve: defaults follow the experimental settings") {
    const fs::path dir = fresh_dir("evocaf_cli_help");
    const CmdResult res = run_cli("evolve --help", dir);
    CHECK(res.exit_code == 0);
    // pop 10, 20 generations, 60 s threshold
    CHECK(res.output.find("generations") != std::string::npos);
}
