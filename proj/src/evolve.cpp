#include "evocaf/evolve.hpp"

#include "evocaf/bench.hpp"
#include "evocaf/errors.hpp"
#include "evocaf/sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

namespace evocaf::evolve {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

const char* kDefaultSystemPrompt =
    "You are an expert in designing utility functions for selecting evaluation points in "
    "budget-constrained black-box optimization with heterogeneous evaluation costs. Reply with a "
    "one-paragraph description of your idea followed by exactly one fenced code block containing "
    "a single expression in the utility language described in the request.";

const char* kDefaultInitPrompt = R"(Task description: design a brand-new utility expression for choosing the next evaluation point in a budget-constrained optimization loop where every evaluation has a location-dependent cost. The loop maximizes the objective; at each step the candidate with the highest utility is evaluated next.

Code instructions: write exactly one expression in the closed utility language below. The expression must evaluate to a vector with one utility value per candidate point, the same length as mean_test_y. The available named inputs are: train_x, train_y, best_x, best_y, test_x, mean_test_y, std_test_y, cost_test_y, budget_used, budget_total.

Grammar (EBNF):
{{grammar}}

Interpretations of inputs and output:
- train_x: matrix (t x d), already evaluated locations in the unit cube.
- train_y: vector (t), observed objective values (maximization).
- best_x: vector (d), location of the best observation so far.
- best_y: scalar, best observed objective value so far.
- test_x: matrix (m x d), candidate locations in the unit cube.
- mean_test_y: vector (m), surrogate posterior mean of the objective at test_x.
- std_test_y: vector (m), surrogate posterior standard deviation at test_x.
- cost_test_y: vector (m), surrogate posterior mean of the evaluation cost at test_x.
- budget_used: scalar, cumulative cost spent so far.
- budget_total: scalar, total cost budget.
- Output: vector (m) of utilities; higher means evaluate sooner.

Hints: the expression must be executable under the grammar exactly as written; use as much of the available information as possible (historical data, model predictions and uncertainties, costs and budget) and combine it in novel ways. Create a completely new utility rather than restating a well-known formula.

Reply with a one-paragraph description of the idea, then the expression inside one fenced code block.)";

const char* kDefaultCrossoverPrompt = R"(Task description: design an improved utility expression for choosing the next evaluation point in a budget-constrained optimization loop with location-dependent evaluation costs. You are given parent utility expressions; combine the selected parent expressions so the strong components of each survive.

Parents:
{{parents}}

Code instructions: write exactly one expression in the closed utility language below. The expression must evaluate to a vector with one utility value per candidate point, the same length as mean_test_y. The available named inputs are: train_x, train_y, best_x, best_y, test_x, mean_test_y, std_test_y, cost_test_y, budget_used, budget_total.

Grammar (EBNF):
{{grammar}}

Interpretations of inputs and output:
- train_x: matrix (t x d), already evaluated locations in the unit cube.
- train_y: vector (t), observed objective values (maximization).
- best_x: vector (d), location of the best observation so far.
- best_y: scalar, best observed objective value so far.
- test_x: matrix (m x d), candidate locations in the unit cube.
- mean_test_y: vector (m), surrogate posterior mean of the objective at test_x.
- std_test_y: vector (m), surrogate posterior standard deviation at test_x.
- cost_test_y: vector (m), surrogate posterior mean of the evaluation cost at test_x.
- budget_used: scalar, cumulative cost spent so far.
- budget_total: scalar, total cost budget.
- Output: vector (m) of utilities; higher means evaluate sooner.

Hints: keep what looks effective in the parents, drop what looks redundant, and make sure the result is one executable expression under the grammar.

Reply with a one-paragraph description of the idea, then the expression inside one fenced code block.)";

const char* kDefaultMutationPrompt = R"(Task description: explore a better utility expression for choosing the next evaluation point in a budget-constrained optimization loop with location-dependent evaluation costs, starting from the parent expression below. Modify it meaningfully rather than reproducing it.

Parent:
{{parents}}

Code instructions: write exactly one expression in the closed utility language below. The expression must evaluate to a vector with one utility value per candidate point, the same length as mean_test_y. The available named inputs are: train_x, train_y, best_x, best_y, test_x, mean_test_y, std_test_y, cost_test_y, budget_used, budget_total.

Grammar (EBNF):
{{grammar}}

Interpretations of inputs and output:
- train_x: matrix (t x d), already evaluated locations in the unit cube.
- train_y: vector (t), observed objective values (maximization).
- best_x: vector (d), location of the best observation so far.
- best_y: scalar, best observed objective value so far.
- test_x: matrix (m x d), candidate locations in the unit cube.
- mean_test_y: vector (m), surrogate posterior mean of the objective at test_x.
- std_test_y: vector (m), surrogate posterior standard deviation at test_x.
- cost_test_y: vector (m), surrogate posterior mean of the evaluation cost at test_x.
- budget_used: scalar, cumulative cost spent so far.
- budget_total: scalar, total cost budget.
- Output: vector (m) of utilities; higher means evaluate sooner.

Hints: change the structure of the expression (new terms, different balance between improvement, uncertainty, cost and budget), not just constants. The result must be one executable expression under the grammar.

Reply with a one-paragraph description of the idea, then the expression inside one fenced code block.)";

std::string load_template(const std::string& prompts_dir, const std::string& name,
                          const char* fallback) {
    const fs::path path = fs::path(prompts_dir) / (name + ".txt");
    std::ifstream in(path);
    if (!in) return fallback;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void replace_all(std::string& text, const std::string& token, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
}

std::string parents_block(const std::vector<Individual>& parents) {
    std::string out;
    for (std::size_t i = 0; i < parents.size(); ++i) {
        out += "Parent " + std::to_string(i + 1) + " description: " +
               (parents[i].program.description.empty() ? "(none)"
                                                       : parents[i].program.description) +
               "\n";
        out += "Parent " + std::to_string(i + 1) + " expression:\n```\n" +
               parents[i].program.source + "\n```\n";
    }
    return out;
}

const char* kind_tag(PromptKind kind) {
    switch (kind) {
        case PromptKind::init: return "init";
        case PromptKind::crossover: return "crossover";
        case PromptKind::mutation: return "mutation";
    }
    return "?";
}

double temperature_for(PromptKind kind) { return kind == PromptKind::init ? 1.0 : 0.7; }

std::string fitness_key(const afdsl::AfProgram& program) { return afdsl::print(program); }

} // namespace

// ----------------------------------------------------------------- logger ---

class RunLogger {
public:
    explicit RunLogger(const std::string& dir) : dir_(dir) {
        fs::create_directories(dir_);
        llm_log_.open(dir_ / "llm_log.jsonl", std::ios::app);
        trace_.open(dir_ / "fitness_trace.csv");
        trace_ << "generation,best,mean\n";
        trace_.flush();
    }

    void log_llm(const llm::InteractionLog& entry) {
        std::lock_guard<std::mutex> lock(mutex_);
        json j;
        j["tag"] = entry.tag;
        j["prompt"] = entry.prompt;
        j["response"] = entry.response;
        j["status"] = entry.status;
        j["latency_s"] = entry.latency_s;
        llm_log_ << j.dump() << '\n';
        llm_log_.flush();
    }

    void write_config(const EvolveConfig& config) {
        json j;
        j["pop_size"] = config.pop_size;
        j["generations"] = config.generations;
        j["parents_per_offspring"] = config.parents_per_offspring;
        j["offspring_per_generation"] = config.offspring_per_generation;
        j["crossover_prob"] = config.crossover_prob;
        j["mutation_prob"] = config.mutation_prob;
        j["time_threshold_s"] = config.time_threshold_s;
        j["rng_seed"] = config.rng_seed;
        j["parse_retry_budget"] = config.parse_retry_budget;
        j["jobs"] = config.jobs;
        j["fitness_instances"] = json::array();
        for (const auto& inst : config.fitness_instances)
            j["fitness_instances"].push_back(
                {{"bench", inst.bench_name}, {"b_total", inst.b_total}, {"seeds", inst.seeds}});
        std::ofstream out(dir_ / "config.json");
        out << j.dump(2) << '\n';
    }

    void snapshot(const Population& pop) {
        json j;
        j["generation"] = pop.generation;
        j["individuals"] = json::array();
        for (const auto& ind : pop.individuals) {
            json ji;
            ji["source"] = ind.program.source;
            ji["description"] = ind.program.description;
            ji["fitness"] = std::isfinite(ind.fitness) ? json(ind.fitness) : json();
            ji["eval_wall_s"] = ind.eval_wall_s;
            ji["provenance"] = ind.provenance == Provenance::init
                                   ? "init"
                                   : ind.provenance == Provenance::crossover ? "crossover"
                                                                             : "mutation";
            j["individuals"].push_back(std::move(ji));
        }
        std::ofstream out(dir_ / ("generation_" + std::to_string(pop.generation) + ".json"));
        out << j.dump(2) << '\n';
    }

    void trace_row(const TraceRow& row) {
        trace_ << row.generation << ',' << row.best << ',' << row.mean << '\n';
        trace_.flush();
    }

    void write_best(const Individual& best) {
        std::ofstream out(dir_ / "best_program.dsl");
        out << best.program.source << '\n';
    }

private:
    fs::path dir_;
    std::ofstream llm_log_;
    std::ofstream trace_;
    std::mutex mutex_;
};

// ------------------------------------------------------------------ logic ---

std::vector<FitnessInstance> default_fitness_instances() {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
    return {{"ackley2", 30.0, seeds}, {"rastrigin2", 30.0, seeds}};
}

std::string system_prompt(const std::string& prompts_dir) {
    return load_template(prompts_dir, "system", kDefaultSystemPrompt);
}

std::string build_prompt(PromptKind kind, const std::vector<Individual>& parents,
                         const std::string& prompts_dir) {
    if (kind != PromptKind::init && parents.empty())
        throw InvalidRequest("crossover and mutation prompts require parents");
    std::string text;
    switch (kind) {
        case PromptKind::init:
            text = load_template(prompts_dir, "init", kDefaultInitPrompt);
            break;
        case PromptKind::crossover:
            text = load_template(prompts_dir, "crossover", kDefaultCrossoverPrompt);
            break;
        case PromptKind::mutation:
            text = load_template(prompts_dir, "mutation", kDefaultMutationPrompt);
            break;
    }
    replace_all(text, "{{grammar}}", afdsl::grammar_ebnf());
    replace_all(text, "{{parents}}", parents_block(parents));
    return text;
}

double evaluate_fitness(const afdsl::AfProgram& program, const EvolveConfig& config) {
    struct Task {
        bench::BenchmarkInstance inst;
        double b_total;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto& spec : config.fitness_instances)
        for (const auto seed : spec.seeds)
            tasks.push_back({bench::make_instance(spec.bench_name, seed), spec.b_total, seed});
    if (tasks.empty()) throw InvalidRequest("no fitness instances configured");

    bo::AfChoice af;
    af.kind = bo::AfChoice::Kind::dsl;
    af.program = std::make_shared<const afdsl::AfProgram>(program);
    af.limits = config.limits;

    std::vector<double> gaps(tasks.size(), kSentinelFitness);
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> bad{false};
    auto worker = [&] {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= tasks.size() || bad.load()) return;
            const Task& task = tasks[i];
            bo::Problem problem;
            const bench::BenchmarkInstance inst = task.inst;
            problem.objective = [inst](const Eigen::VectorXd& x) {
                return bench::eval_objective(inst, x);
            };
            problem.cost = [inst](const Eigen::VectorXd& x) {
                return bench::eval_cost(inst, x);
            };
            problem.lo = inst.lo;
            problem.hi = inst.hi;
            problem.f_star = inst.f_star;
            problem.x_star = bench::from_unit(inst, inst.x_star_unit);
            bo::RunOptions options;
            options.gp_config = config.gp_config;
            options.acq = config.acq;
            options.wall_clock_limit_s = config.time_threshold_s;
            const bo::RunRecord rec = bo::run(problem, af, task.b_total, task.seed, options);
            if (rec.status != bo::RunStatus::ok || !rec.optimal_gap) {
                bad.store(true);
                return;
            }
            gaps[i] = *rec.optimal_gap;
        }
    };
    const int n_threads = std::max(1, std::min<int>(config.jobs, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    if (bad.load()) return kSentinelFitness;
    double total = 0.0;
    for (const double g : gaps) {
        if (!std::isfinite(g)) return kSentinelFitness;
        total += g;
    }
    return total / static_cast<double>(gaps.size());
}

namespace {

void sort_population(Population& pop) {
    std::stable_sort(pop.individuals.begin(), pop.individuals.end(),
                     [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
}

struct OffspringRequest {
    PromptKind kind;
    std::vector<Individual> parents;
};

// Asks the provider until a validated program comes back or the retry budget
// is exhausted; feedback from each rejection is appended to the next prompt.
std::optional<afdsl::AfProgram> request_program(const OffspringRequest& req,
                                                const EvolveConfig& config,
                                                llm::Provider& provider, RunLogger* logger) {
    static const std::shared_ptr<const afdsl::ProbeContext> probe = afdsl::make_probe_context();
    const std::string base_prompt = build_prompt(req.kind, req.parents, config.prompts_dir);
    std::string feedback;
    for (int attempt = 0; attempt <= config.parse_retry_budget; ++attempt) {
        llm::LlmRequest lreq;
        lreq.system_prompt = system_prompt(config.prompts_dir);
        lreq.user_prompt = feedback.empty() ? base_prompt : base_prompt + "\n\n" + feedback;
        lreq.temperature = temperature_for(req.kind);
        lreq.model_name = config.model_name;
        lreq.tag = kind_tag(req.kind);

        llm::InteractionLog entry;
        entry.tag = lreq.tag;
        entry.prompt = lreq.user_prompt;
        std::string reason;
        try {
            const llm::LlmResponse resp = provider.complete(lreq);
            entry.response = resp.text;
            entry.latency_s = resp.latency_s;
            auto [description, source] = llm::extract_program(resp.text);
            afdsl::AfProgram program = afdsl::parse(source);
            program.description = description;
            const afdsl::ValidationReport report = afdsl::validate(program, *probe);
            if (!report.pass) {
                reason = report.reason;
            } else {
                entry.status = "ok";
                if (logger) logger->log_llm(entry);
                return program;
            }
        } catch (const Error& e) {
            reason = e.what();
        }
        entry.status = "error:" + reason;
        if (logger) logger->log_llm(entry);
        feedback = "Your previous reply was rejected: " + reason +
                   ". Reply again with a one-paragraph description and exactly one fenced code "
                   "block containing a single valid expression.";
    }
    return std::nullopt;
}

std::vector<Individual> select_parents(const Population& pop, int count, std::mt19937_64& rng) {
    // Rank-based: probability proportional to 1/rank over the sorted list.
    std::vector<int> indices(pop.individuals.size());
    std::iota(indices.begin(), indices.end(), 0);
    std::vector<Individual> parents;
    std::vector<double> weights;
    for (std::size_t i = 0; i < indices.size(); ++i)
        weights.push_back(1.0 / static_cast<double>(i + 1));
    for (int k = 0; k < count && !indices.empty(); ++k) {
        std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
        const std::size_t pick = dist(rng);
        parents.push_back(pop.individuals[static_cast<std::size_t>(indices[pick])]);
        indices.erase(indices.begin() + static_cast<std::ptrdiff_t>(pick));
        weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return parents;
}

double cached_fitness(const afdsl::AfProgram& program, const EvolveConfig& config,
                      FitnessCache* cache, double* wall_s) {
    const std::string key = fitness_key(program);
    if (cache) {
        const auto it = cache->find(key);
        if (it != cache->end()) {
            *wall_s = 0.0;
            return it->second;
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    const double fitness = evaluate_fitness(program, config);
    *wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cache) (*cache)[key] = fitness;
    return fitness;
}

} // namespace

Population step(Population pop, const EvolveConfig& config, llm::Provider& provider,
                FitnessCache* cache, RunLogger* logger) {
    if (static_cast<int>(pop.individuals.size()) < config.pop_size)
        throw InvalidRequest("population must be full before stepping");
    std::mt19937_64 rng(sampling::split_seed(config.rng_seed,
                                             0x9000 + static_cast<std::uint64_t>(pop.generation)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    for (int off = 0; off < config.offspring_per_generation; ++off) {
        const std::vector<Individual> parents =
            select_parents(pop, config.parents_per_offspring, rng);

        std::optional<afdsl::AfProgram> offspring;
        Provenance provenance = Provenance::crossover;
        if (unif(rng) < config.crossover_prob) {
            offspring = request_program({PromptKind::crossover, parents}, config, provider, logger);
        } else {
            // No crossover this generation: the better parent is the base.
            const Individual& better =
                *std::min_element(parents.begin(), parents.end(),
                                  [](const Individual& a, const Individual& b) {
                                      return a.fitness < b.fitness;
                                  });
            offspring = better.program;
            provenance = better.provenance;
        }
        if (offspring && unif(rng) < config.mutation_prob) {
            Individual base;
            base.program = *offspring;
            const auto mutated =
                request_program({PromptKind::mutation, {base}}, config, provider, logger);
            if (mutated) {
                offspring = mutated;
                provenance = Provenance::mutation;
            }
        }

        if (offspring) {
            Individual child;
            child.program = *offspring;
            child.provenance = provenance;
            child.fitness = cached_fitness(child.program, config, cache, &child.eval_wall_s);
            pop.individuals.push_back(std::move(child));
        }
    }

    sort_population(pop);
    while (static_cast<int>(pop.individuals.size()) > config.pop_size) pop.individuals.pop_back();
    pop.generation += 1;
    pop.best_history.push_back(pop.individuals.front().fitness);
    return pop;
}

EvolveResult evolve(const EvolveConfig& config, llm::Provider& provider) {
    std::unique_ptr<RunLogger> logger;
    if (!config.run_dir.empty()) {
        logger = std::make_unique<RunLogger>(config.run_dir);
        logger->write_config(config);
    }

    FitnessCache cache;
    Population pop;
    for (const auto& path : config.seed_program_files) {
        std::ifstream in(path);
        if (!in) throw InitFailure("cannot open seed program: " + path);
        std::string source((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
        Individual ind;
        ind.program = afdsl::parse(source);
        ind.provenance = Provenance::init;
        ind.fitness = cached_fitness(ind.program, config, &cache, &ind.eval_wall_s);
        pop.individuals.push_back(std::move(ind));
        if (static_cast<int>(pop.individuals.size()) >= config.pop_size) break;
    }
    int attempts_left = config.pop_size + config.init_retry_budget;
    while (static_cast<int>(pop.individuals.size()) < config.pop_size && attempts_left > 0) {
        --attempts_left;
        const auto program = request_program({PromptKind::init, {}}, config, provider,
                                             logger.get());
        if (!program) continue;
        Individual ind;
        ind.program = *program;
        ind.provenance = Provenance::init;
        ind.fitness = cached_fitness(ind.program, config, &cache, &ind.eval_wall_s);
        pop.individuals.push_back(std::move(ind));
    }
    if (static_cast<int>(pop.individuals.size()) < config.pop_size)
        throw InitFailure("could not assemble an initial population of size " +
                          std::to_string(config.pop_size));
    sort_population(pop);
    if (logger) logger->snapshot(pop);

    EvolveResult result;
    for (int gen = 0; gen < config.generations; ++gen) {
        pop = step(std::move(pop), config, provider, &cache, logger.get());
        TraceRow row;
        row.generation = pop.generation;
        row.best = pop.individuals.front().fitness;
        double total = 0.0;
        int finite = 0;
        for (const auto& ind : pop.individuals)
            if (std::isfinite(ind.fitness)) {
                total += ind.fitness;
                ++finite;
            }
        row.mean = finite > 0 ? total / finite : kSentinelFitness;
        result.trace.push_back(row);
        if (logger) {
            logger->snapshot(pop);
            logger->trace_row(row);
        }
    }

    result.best = pop.individuals.front();
    result.population = std::move(pop);
    if (logger) logger->write_best(result.best);
    return result;
}

} // namespace evocaf::evolve
