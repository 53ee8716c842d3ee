#include "evocaf/bench.hpp"
#include "evocaf/bo.hpp"
#include "evocaf/errors.hpp"
#include "evocaf/evolve.hpp"
#include "evocaf/llm.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

struct CampaignConfig {
    std::vector<std::string> instances;
    std::vector<double> budgets;
    std::vector<std::string> afs;
    std::vector<std::uint64_t> seeds;
    std::string output_dir = "campaign_out";
};

CampaignConfig load_campaign(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw evocaf::ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw evocaf::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    CampaignConfig cfg;
    try {
        cfg.instances = j.at("instances").get<std::vector<std::string>>();
        cfg.budgets = j.at("budgets").get<std::vector<double>>();
        cfg.afs = j.at("afs").get<std::vector<std::string>>();
        cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        cfg.output_dir = j.value("output_dir", cfg.output_dir);
    } catch (const json::exception& e) {
        throw evocaf::ConfigError(std::string("config schema error: ") + e.what());
    }
    return cfg;
}

void validate_campaign(const CampaignConfig& cfg) {
    if (cfg.instances.empty() || cfg.budgets.empty() || cfg.afs.empty() || cfg.seeds.empty())
        throw evocaf::ConfigError("instances, budgets, afs and seeds must be non-empty");
    for (const auto& name : cfg.instances) evocaf::bench::make_instance(name, 0);
    for (const auto& af : cfg.afs) evocaf::bo::AfChoice::parse_spec(af); // throws on bad specs
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ':' || c == '/' || c == '\\' || c == ' ') c = '-';
    return s;
}

std::mutex io_mutex;

struct RunOutcome {
    std::string instance;
    double budget = 0.0;
    std::string af;
    std::uint64_t seed = 0;
    double gap = 0.0;
    int evals = 0;
    bool ok = false;
};

int cmd_run(const std::string& config_path, std::uint64_t seed_offset, int jobs, bool pretty,
            const std::string& output_override) {
    CampaignConfig cfg = load_campaign(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    validate_campaign(cfg);
    fs::create_directories(cfg.output_dir);

    struct Job {
        std::string instance;
        double budget;
        std::string af;
        std::uint64_t seed;
    };
    std::vector<Job> jobs_list;
    for (const auto& inst : cfg.instances)
        for (const double budget : cfg.budgets)
            for (const auto& af : cfg.afs)
                for (const auto seed : cfg.seeds)
                    jobs_list.push_back({inst, budget, af, seed + seed_offset});

    std::vector<RunOutcome> outcomes(jobs_list.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= jobs_list.size()) return;
            const Job& job = jobs_list[i];
            RunOutcome& out = outcomes[i];
            out.instance = job.instance;
            out.budget = job.budget;
            out.af = job.af;
            out.seed = job.seed;
            try {
                const evocaf::bench::BenchmarkInstance inst =
                    evocaf::bench::make_instance(job.instance, job.seed);
                evocaf::bo::Problem problem;
                problem.objective = [inst](const Eigen::VectorXd& x) {
                    return evocaf::bench::eval_objective(inst, x);
                };
                problem.cost = [inst](const Eigen::VectorXd& x) {
                    return evocaf::bench::eval_cost(inst, x);
                };
                problem.lo = inst.lo;
                problem.hi = inst.hi;
                problem.f_star = inst.f_star;
                problem.x_star = evocaf::bench::from_unit(inst, inst.x_star_unit);
                const evocaf::bo::AfChoice af = evocaf::bo::AfChoice::parse_spec(job.af);
                const evocaf::bo::RunRecord rec =
                    evocaf::bo::run(problem, af, job.budget, job.seed);

                const std::string stem = sanitize(job.instance) + "_b" +
                                         std::to_string(static_cast<long>(job.budget)) + "_" +
                                         sanitize(job.af) + "_s" + std::to_string(job.seed);
                std::ofstream hist_out(fs::path(cfg.output_dir) / (stem + ".jsonl"));
                evocaf::bo::write_history_jsonl(rec, hist_out);
                std::ofstream summary_out(fs::path(cfg.output_dir) / (stem + ".summary.json"));
                evocaf::bo::write_summary_json(rec, summary_out);

                out.ok = rec.status == evocaf::bo::RunStatus::ok;
                out.evals = rec.T;
                out.gap = rec.optimal_gap.value_or(std::numeric_limits<double>::quiet_NaN());
            } catch (const std::exception& e) {
                out.ok = false;
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cerr << "run failed (" << job.instance << ", " << job.af << ", seed "
                          << job.seed << "): " << e.what() << "\n";
            }
        }
    };
    const int n_threads =
        std::max(1, std::min<int>(jobs, static_cast<int>(jobs_list.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    // Aggregate in deterministic (config) order.
    std::ofstream csv(fs::path(cfg.output_dir) / "summary.csv");
    csv << "instance,budget,af,mean_gap,mean_evals,std_gap\n";
    bool any_failed = false;
    std::map<std::pair<std::string, double>, std::map<std::string, std::string>> pretty_cells;
    for (const auto& inst : cfg.instances) {
        for (const double budget : cfg.budgets) {
            for (const auto& af : cfg.afs) {
                std::vector<const RunOutcome*> rows;
                for (const auto& out : outcomes)
                    if (out.instance == inst && out.budget == budget && out.af == af)
                        rows.push_back(&out);
                double gap_sum = 0.0, evals_sum = 0.0;
                int n_ok = 0;
                for (const auto* r : rows) {
                    if (!r->ok) {
                        any_failed = true;
                        continue;
                    }
                    gap_sum += r->gap;
                    evals_sum += r->evals;
                    ++n_ok;
                }
                if (n_ok == 0) {
                    csv << inst << ',' << budget << ',' << af << ",nan,nan,nan\n";
                    continue;
                }
                const double mean_gap = gap_sum / n_ok;
                const double mean_evals = evals_sum / n_ok;
                double ss = 0.0;
                for (const auto* r : rows)
                    if (r->ok) ss += (r->gap - mean_gap) * (r->gap - mean_gap);
                const double std_gap = n_ok > 1 ? std::sqrt(ss / (n_ok - 1)) : 0.0;
                csv << inst << ',' << budget << ',' << af << ',' << mean_gap << ','
                    << mean_evals << ',' << std_gap << '\n';
                if (pretty) {
                    std::ostringstream cell;
                    cell.precision(4);
                    cell << std::fixed << mean_gap << '('
                         << static_cast<long>(std::llround(mean_evals)) << ')';
                    pretty_cells[{inst, budget}][af] = cell.str();
                }
            }
        }
    }
    if (pretty) {
        std::cout << "instance/budget";
        for (const auto& af : cfg.afs) std::cout << '\t' << af;
        std::cout << '\n';
        for (const auto& inst : cfg.instances)
            for (const double budget : cfg.budgets) {
                std::cout << inst << '@' << budget;
                for (const auto& af : cfg.afs)
                    std::cout << '\t' << pretty_cells[{inst, budget}][af];
                std::cout << '\n';
            }
    }
    std::cout << "summary written to " << (fs::path(cfg.output_dir) / "summary.csv").string()
              << "\n";
    return any_failed ? kExitRunFailure : kExitOk;
}

int cmd_evolve(const std::string& provider_name, const std::string& script_path,
               const std::string& output_dir, int generations, int pop, std::uint64_t seed,
               int jobs, double time_threshold, const std::string& instances_csv,
               int seeds_per_instance, double budget, const std::string& prompts_dir,
               const std::vector<std::string>& seed_programs) {
    std::unique_ptr<evocaf::llm::Provider> provider;
    if (provider_name == "mock") {
        provider = evocaf::llm::make_provider(evocaf::llm::ProviderKind::mock, script_path);
    } else if (provider_name == "http") {
        // ConfigError here, before any run, when credentials are missing
        provider = evocaf::llm::make_provider(evocaf::llm::ProviderKind::http);
    } else {
        throw evocaf::ConfigError("unknown provider: " + provider_name);
    }

    evocaf::evolve::EvolveConfig config;
    config.generations = generations;
    config.pop_size = pop;
    config.rng_seed = seed;
    config.jobs = jobs;
    config.time_threshold_s = time_threshold;
    config.run_dir = output_dir;
    config.prompts_dir = prompts_dir;
    config.seed_program_files = seed_programs;
    config.fitness_instances.clear();
    std::stringstream names(instances_csv);
    std::string name;
    while (std::getline(names, name, ',')) {
        if (name.empty()) continue;
        evocaf::evolve::FitnessInstance fi;
        fi.bench_name = name;
        fi.b_total = budget;
        for (int s = 1; s <= seeds_per_instance; ++s)
            fi.seeds.push_back(static_cast<std::uint64_t>(s));
        config.fitness_instances.push_back(std::move(fi));
    }
    if (config.fitness_instances.empty())
        throw evocaf::ConfigError("no fitness instances configured");
    for (const auto& fi : config.fitness_instances)
        evocaf::bench::make_instance(fi.bench_name, 0);

    try {
        const evocaf::evolve::EvolveResult result = evocaf::evolve::evolve(config, *provider);
        std::cout << "best fitness " << result.best.fitness << " after " << generations
                  << " generations; run directory: " << output_dir << "\n";
    } catch (const evocaf::InitFailure& e) {
        std::cerr << "evolution failed: " << e.what() << "\n";
        return kExitRunFailure;
    }
    return kExitOk;
}

int cmd_hist(const std::vector<std::string>& files, int bins, double lo, double hi,
             bool range_given, const std::string& output) {
    if (files.empty()) throw evocaf::ConfigError("no input files");
    if (bins < 1) throw evocaf::ConfigError("--bins must be >= 1");
    std::vector<double> costs;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw evocaf::ConfigError("cannot open run file: " + file);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("z"))
                throw evocaf::ConfigError("not a run JSONL file: " + file);
            costs.push_back(j["z"].get<double>());
        }
    }
    if (costs.empty()) throw evocaf::ConfigError("input files contain no evaluations");

    if (!range_given) {
        lo = *std::min_element(costs.begin(), costs.end());
        hi = *std::max_element(costs.begin(), costs.end());
        if (hi <= lo) hi = lo + 1.0;
    }
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    const double width = (hi - lo) / bins;
    for (const double z : costs) {
        int b = static_cast<int>(std::floor((z - lo) / width));
        b = std::max(0, std::min(bins - 1, b));
        ++counts[static_cast<std::size_t>(b)];
    }

    std::ostream* os = &std::cout;
    std::ofstream file_out;
    if (!output.empty()) {
        file_out.open(output);
        os = &file_out;
    }
    *os << "bin_lo,bin_hi,count\n";
    for (int b = 0; b < bins; ++b)
        *os << (lo + b * width) << ',' << (lo + (b + 1) * width) << ',' <<
            counts[static_cast<std::size_t>(b)] << '\n';
    return kExitOk;
}

int cmd_validate(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw evocaf::ConfigError("cannot open program: " + path);
    std::string source((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        const evocaf::afdsl::AfProgram program = evocaf::afdsl::parse(source);
        const auto probe = evocaf::afdsl::make_probe_context();
        const evocaf::afdsl::ValidationReport report = evocaf::afdsl::validate(program, *probe);
        if (report.pass) {
            std::cout << "pass: result shape " << evocaf::afdsl::to_string(program.result_shape)
                      << ", " << program.node_count << " nodes\n";
            return kExitOk;
        }
        std::cout << "fail: " << report.reason << "\n";
        return kExitRunFailure;
    } catch (const evocaf::Error& e) {
        std::cout << "fail: " << e.what() << "\n";
        return kExitRunFailure;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cost-aware Bayesian optimization experiment runner"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "execute a benchmark campaign");
    std::string run_config;
    std::uint64_t run_seed = 0;
    int run_jobs = static_cast<int>(std::thread::hardware_concurrency());
    bool run_pretty = false;
    std::string run_output;
    run->add_option("--config", run_config, "campaign config JSON")->required();
    run->add_option("--seed", run_seed, "offset added to every config seed");
    run->add_option("--jobs", run_jobs, "parallel runs");
    run->add_option("--output", run_output, "override output directory");
    run->add_flag("--pretty", run_pretty, "print a mean(evals) table");

    // evolve
    auto* ev = app.add_subcommand("evolve", "evolve acquisition programs with an LLM provider");
    std::string ev_provider = "http";
    std::string ev_script;
    std::string ev_output = "evolve_run";
    int ev_generations = 20;
    int ev_pop = 10;
    std::uint64_t ev_seed = 0;
    int ev_jobs = static_cast<int>(std::thread::hardware_concurrency());
    double ev_threshold = 60.0;
    std::string ev_instances = "ackley2,rastrigin2";
    int ev_seeds = 10;
    double ev_budget = 30.0;
    std::string ev_prompts = "prompts";
    ev->add_option("--provider", ev_provider, "http or mock");
    ev->add_option("--script", ev_script, "mock provider script (JSON)");
    ev->add_option("--output", ev_output, "run directory");
    ev->add_option("--generations", ev_generations, "generations to run");
    ev->add_option("--pop", ev_pop, "population size");
    ev->add_option("--seed", ev_seed, "rng seed");
    ev->add_option("--jobs", ev_jobs, "parallel fitness runs");
    ev->add_option("--time-threshold", ev_threshold, "seconds allowed per fitness BO run");
    ev->add_option("--instances", ev_instances, "comma-separated fitness benchmarks");
    ev->add_option("--seeds-per-instance", ev_seeds, "seeds per fitness benchmark");
    ev->add_option("--budget", ev_budget, "B_total per fitness run");
    ev->add_option("--prompts", ev_prompts, "prompt template directory");
    std::vector<std::string> ev_seed_programs;
    ev->add_option("--seed-programs", ev_seed_programs,
                   "DSL files injected into the initial population");

    // hist
    auto* hist = app.add_subcommand("hist", "cost-frequency histogram from run files");
    std::vector<std::string> hist_files;
    int hist_bins = 20;
    double hist_lo = 0.0, hist_hi = 1.0;
    std::string hist_output;
    hist->add_option("files", hist_files, "run JSONL files")->required();
    hist->add_option("--bins", hist_bins, "bin count");
    auto* lo_opt = hist->add_option("--lo", hist_lo, "histogram lower edge");
    auto* hi_opt = hist->add_option("--hi", hist_hi, "histogram upper edge");
    hist->add_option("--output", hist_output, "output CSV (default stdout)");

    // validate-program
    auto* val = app.add_subcommand("validate-program", "parse and probe a DSL program");
    std::string val_path;
    val->add_option("path", val_path, "program file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(run_config, run_seed, run_jobs, run_pretty, run_output);
        if (*ev)
            return cmd_evolve(ev_provider, ev_script, ev_output, ev_generations, ev_pop, ev_seed,
                              ev_jobs, ev_threshold, ev_instances, ev_seeds, ev_budget,
                              ev_prompts, ev_seed_programs);
        if (*hist)
            return cmd_hist(hist_files, hist_bins, hist_lo, hist_hi,
                            lo_opt->count() > 0 || hi_opt->count() > 0, hist_output);
        if (*val) return cmd_validate(val_path);
    } catch (const evocaf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const evocaf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRunFailure;
    }
    return kExitConfigError;
}
