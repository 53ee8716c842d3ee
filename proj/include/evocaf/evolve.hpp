#pragma once

#include "evocaf/acqopt.hpp"
#include "evocaf/afdsl.hpp"
#include "evocaf/bo.hpp"
#include "evocaf/llm.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

namespace evocaf::evolve {

constexpr double kSentinelFitness = std::numeric_limits<double>::infinity();

enum class PromptKind { init, crossover, mutation };

enum class Provenance { init, crossover, mutation };

struct Individual {
    afdsl::AfProgram program;
    double fitness = kSentinelFitness; // mean optimal gap, lower is better
    double eval_wall_s = 0.0;
    Provenance provenance = Provenance::init;
};

struct FitnessInstance {
    std::string bench_name;
    double b_total = 30.0;
    std::vector<std::uint64_t> seeds;
};

// Ackley-2D and Rastrigin-2D, 10 seeds each, budget 30.
std::vector<FitnessInstance> default_fitness_instances();

struct EvolveConfig {
    int pop_size = 10;
    int generations = 20;
    int parents_per_offspring = 2;
    int offspring_per_generation = 1;
    double crossover_prob = 1.0;
    double mutation_prob = 0.5;
    double time_threshold_s = 60.0; // per BO run on the fitness set
    std::vector<FitnessInstance> fitness_instances = default_fitness_instances();
    std::uint64_t rng_seed = 0;
    int parse_retry_budget = 3;  // per offspring, feedback appended on retry
    int init_retry_budget = 40;  // extra attempts while filling the population
    int jobs = 2;                // parallel fitness runs
    std::string prompts_dir = "prompts";
    std::string run_dir;         // when set, the audit trail is written here
    std::vector<std::string> seed_program_files; // optional goldens injected at init
    std::string model_name;
    gp::GpConfig gp_config{};
    acqopt::AcqOptConfig acq{};
    afdsl::EvalLimits limits{};
};

struct Population {
    std::vector<Individual> individuals; // sorted ascending by fitness
    int generation = 0;
    std::vector<double> best_history; // best fitness after each generation step
};

// Prompt templates live under prompts_dir (init.txt / crossover.txt /
// mutation.txt / system.txt); built-in defaults are used for missing files.
std::string build_prompt(PromptKind kind, const std::vector<Individual>& parents,
                         const std::string& prompts_dir);
std::string system_prompt(const std::string& prompts_dir);

using FitnessCache = std::unordered_map<std::string, double>;

// Mean optimal gap over the fitness instances; any run that times out, faults
// or fails yields the sentinel. Runs execute in a bounded worker pool.
double evaluate_fitness(const afdsl::AfProgram& program, const EvolveConfig& config);

struct TraceRow {
    int generation = 0;
    double best = kSentinelFitness;
    double mean = kSentinelFitness; // over finite-fitness individuals
};

class RunLogger; // audit-trail sink, defined in evolve.cpp

// One steady-state generation: select parents, ask the provider for an
// offspring, validate, evaluate, insert, delete the worst.
Population step(Population pop, const EvolveConfig& config, llm::Provider& provider,
                FitnessCache* cache = nullptr, RunLogger* logger = nullptr);

struct EvolveResult {
    Individual best;
    Population population;
    std::vector<TraceRow> trace;
};

EvolveResult evolve(const EvolveConfig& config, llm::Provider& provider);

} // namespace evocaf::evolve
