#pragma once

// End-to-end learning (hard rules, candidate rules, ordering and weights), its
// flat key=value configuration, and the Hamming-error evaluation protocol.

#include <cstdint>
#include <exception>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "possrl/logic.hpp"
#include "possrl/possibilistic.hpp"
#include "possrl/relational_data.hpp"
#include "possrl/structure_learning.hpp"
#include "possrl/weight_learning.hpp"

namespace possrl {

struct PipelineConfig {
    std::string data;
    std::string output;
    /// Width of local examples and variable cap of hard and soft rules.
    int k = 3;
    HardRuleConfig hard;
    ExampleConfig examples;
    BeamConfig beam;
    GreedyConfig greedy;
    bool simplify = true;
    std::uint64_t seed = 1;
    int jobs = 1;

    /// Copies k and seed into the module configs and checks ranges. Throws DomainError.
    void finalize();
};

/// Every accepted key, in a fixed order (`k`, `seed`, `beam.b`, ...).
const std::vector<std::string>& config_keys();
/// Throws DomainError for an unknown key or a malformed/out-of-range value.
void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const PipelineConfig& cfg, std::string_view key);
/// `key = value` lines, `#` comments. Throws ParseError with the line number.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig read_config_file(const std::string& path, PipelineConfig base = {});
std::string format_config(const PipelineConfig& cfg);

/// A pipeline stage failed; `cause()` holds the original exception.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, std::exception_ptr cause, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), cause_(std::move(cause)) {}
    const std::string& stage() const noexcept { return stage_; }
    std::exception_ptr cause() const noexcept { return cause_; }

private:
    std::string stage_;
    std::exception_ptr cause_;
};

struct PipelineResult {
    std::vector<Clause> hard;
    HardRuleStats hard_stats;
    /// Candidates of every predicate, by predicate id then restart.
    std::vector<ScoredRule> candidates;
    GreedyResult greedy;
    StratifiedTheory theory;
    SimplifyStats simplify_stats;
    /// Stages that completed, in order.
    std::vector<std::string> completed;
    std::vector<std::string> log;
    std::vector<std::string> warnings;
};

/// build_examples + beam_search for every predicate of the data, up to
/// cfg.jobs predicates at once; rules in predicate order. `cfg` must be finalized.
std::vector<ScoredRule> learn_candidates(const GlobalExample& data, std::span<const Clause> hard,
                                         const PipelineConfig& cfg, std::vector<std::string>* log = nullptr);

/// learn_hard_rules, then build_examples + beam_search per predicate (up to
/// cfg.jobs predicates at once), greedy_build, simplify. `out` is filled as
/// stages complete, so it holds the partial artifacts when a StageError is
/// thrown. Data without atoms yields the hard rules alone, with a warning.
void run_pipeline(const GlobalExample& data, const PipelineConfig& cfg, PipelineResult& out);
PipelineResult run_pipeline(const GlobalExample& data, const PipelineConfig& cfg);

/// One ground literal per line (`fr(a,b)`, `!sm(c)`), `#` comments and
/// `@constants a b` lines naming further constants. Throws ParseError.
std::vector<GroundLiteral> parse_evidence(std::string_view text, Signature& sig, ConstantTable& consts);
std::vector<GroundLiteral> read_evidence_file(const std::string& path, Signature& sig, ConstantTable& consts);

/// Seed of a named sub-task (a predicate, a trial), independent of task order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalConfig {
    int s_max = 15;
    int trials = 20;
    std::uint64_t seed = 1;
    /// Evidence drawn from the true atoms only.
    bool positives_only = false;
    /// A fresh evidence set per size instead of growing one set per trial.
    bool independent = false;
};

struct EvalRow {
    int s = 0;
    /// Evidence literals actually used (s capped by the available literals).
    std::size_t evidence = 0;
    double theory_error = 0;
    double baseline_error = 0;
    /// baseline_error - theory_error
    double difference = 0;
    double cumulative_difference = 0;
    /// SAT calls of the cutoff search per inference.
    double mean_cut_calls = 0;
    std::uint64_t max_cut_calls = 0;
    /// All SAT calls per inference (cutoff and prediction).
    double mean_sat_calls = 0;
    double mean_ms = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    EvalConfig config;
    std::vector<std::uint64_t> trial_seeds;
    std::size_t num_strata = 0;
    /// ceil(log2(n + 1)) + 1
    std::uint64_t cut_call_bound = 0;
    bool within_bound = true;
    std::size_t test_true_atoms = 0;
    std::size_t ground_atoms = 0;
    std::vector<std::string> warnings;
};

/// Size of the symmetric difference.
std::size_t hamming(std::span<const GroundAtom> a, std::span<const GroundAtom> b);

/// For s = 1..s_max and each trial, draws s evidence literals from the test
/// world (each ground atom with its truth value, or true atoms only), predicts
/// with map_prediction and compares against the test world; the baseline
/// predicts the positive evidence. `signature` must extend the test signature
/// and be the one the theory was parsed with.
EvalReport evaluate(const StratifiedTheory& theory, const Signature& signature, const GlobalExample& test,
                    const EvalConfig& cfg);

/// One row per evidence size. Timing columns only when `timing` is set, so
/// that reports are reproducible byte for byte by default.
std::string format_eval_csv(const EvalReport& report, bool timing = false);
std::string format_eval_json(const EvalReport& report, bool timing = false);

}  // namespace possrl
