"""Cost-aware Bayesian optimization with evolved acquisition functions."""

try:
    from . import _evocaf as _core  # installed layout: evocaf/_evocaf.so
except ImportError:  # in-tree layout: _evocaf.so on sys.path (build directory)
    import _evocaf as _core

AfContext = _core.AfContext
AfProgram = _core.AfProgram
BenchmarkInstance = _core.BenchmarkInstance
EvocafError = _core.EvocafError
GpConfig = _core.GpConfig
GpModel = _core.GpModel
eval_cost = _core.eval_cost
eval_ei = _core.eval_ei
eval_eicool = _core.eval_eicool
eval_eipu = _core.eval_eipu
eval_evolcaf = _core.eval_evolcaf
eval_objective = _core.eval_objective
evaluate_program = _core.evaluate_program
evolve_with_mock = _core.evolve_with_mock
extract_program = _core.extract_program
gp_fit = _core.gp_fit
gp_log_marginal_likelihood = _core.gp_log_marginal_likelihood
gp_predict = _core.gp_predict
grammar_ebnf = _core.grammar_ebnf
init_design = _core.init_design
input_names = _core.input_names
make_context = _core.make_context
make_instance = _core.make_instance
maximize_af = _core.maximize_af
parse_program = _core.parse_program
print_program = _core.print_program
run_benchmark = _core.run_benchmark
supported_benchmarks = _core.supported_benchmarks
validate_program = _core.validate_program

__all__ = [
    "AfContext",
    "AfProgram",
    "BenchmarkInstance",
    "EvocafError",
    "GpConfig",
    "GpModel",
    "eval_cost",
    "eval_ei",
    "eval_eicool",
    "eval_eipu",
    "eval_evolcaf",
    "eval_objective",
    "evaluate_program",
    "evolve_with_mock",
    "extract_program",
    "gp_fit",
    "gp_log_marginal_likelihood",
    "gp_predict",
    "grammar_ebnf",
    "init_design",
    "input_names",
    "make_context",
    "make_instance",
    "maximize_af",
    "parse_program",
    "print_program",
    "run_benchmark",
    "supported_benchmarks",
    "validate_program",
]
