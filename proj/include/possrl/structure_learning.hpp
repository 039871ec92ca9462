#pragma once

// Hard-rule mining, construction of weighted positive/negative examples and
// Horn-rule beam search.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "possrl/logic.hpp"
#include "possrl/relational_data.hpp"

namespace possrl {

struct HardRuleConfig {
    int t = 3;        // max literals
    int t_prime = 4;  // max literals when every literal is unary
    int k = 3;        // max variables
    /// Stop after this many candidate clauses; 0 = unlimited.
    std::size_t max_candidates = 0;

    void validate() const;
};

struct HardRuleStats {
    std::size_t generated = 0;  // non-isomorphic clauses considered
    std::size_t valid = 0;      // without counterexample
    std::size_t retained = 0;
};

/// Constant-free AllDiff clauses with at most cfg.t literals (cfg.t_prime when
/// all literals are unary) and at most cfg.k variables that have no
/// counterexample in the data, keeping only those not subsumed by an earlier
/// retained clause. Clauses are generated by literal count, then predicate
/// order, with variables introduced in order.
std::vector<Clause> learn_hard_rules(const GlobalExample& data, const HardRuleConfig& cfg,
                                     HardRuleStats* stats = nullptr);

struct ExampleConfig {
    /// Accepted negatives to collect.
    std::size_t negative_budget = 500;
    /// Positives to keep; 0 = all true atoms.
    std::size_t positive_budget = 0;
    /// Negative candidates to try before giving up; 0 = 20 * negative_budget.
    std::size_t max_attempts = 0;
};

struct LabeledExampleSet {
    PredId predicate = 0;
    std::vector<GroundAtom> positives;
    std::vector<GroundAtom> negatives;
    double negative_weight = 1.0;
    double nontrivial_estimate = 0;
    std::size_t attempted = 0;
    std::size_t rejected = 0;

    bool degenerate() const noexcept { return positives.empty(); }
};

/// Positives are the true atoms of `pred`; negatives are uniformly drawn false
/// atoms a for which A + a extends to a model of the groundings of the hard
/// rules over all constants (other atoms free). Groundings are added lazily,
/// only when a candidate model violates them.
LabeledExampleSet build_examples(const GlobalExample& data, std::span<const Clause> hard_rules, PredId pred,
                                 const ExampleConfig& cfg, Rng& rng);

/// A + a consistent with the hard rules, decided by the same lazy grounding.
/// Intended for tests and one-off checks.
bool consistent_with(const GlobalExample& data, std::span<const Clause> hard_rules, const GroundAtom& extra);

struct BeamConfig {
    int b = 10;  // beam width
    int l = 3;   // max body literals
    int k = 3;   // max variables
    int restarts = 3;

    void validate() const;
};

struct ScoredRule {
    HornRule rule;
    double accuracy = 0;
    std::size_t covered_positives = 0;
    std::size_t covered_negatives = 0;
    int restart = 0;
};

/// True iff the rule's body, with the head bound to `example`, has an
/// injective match in the data.
bool covers(const GlobalExample& data, const HornRule& rule, const GroundAtom& example);

/// (covered positives + uncovered negatives * w) / (|pos| + |neg| * w)
double weighted_accuracy(std::size_t covered_pos, std::size_t n_pos, std::size_t covered_neg, std::size_t n_neg,
                         double w_neg);

/// Rules for `examples.predicate`, one per restart at most. Each restart starts
/// from the bodyless rule and keeps the b most accurate single-atom extensions
/// per iteration; candidates subsumed by a zero-coverage rule or by a rule
/// returned earlier are discarded.
std::vector<ScoredRule> beam_search(const GlobalExample& data, const LabeledExampleSet& examples,
                                    const BeamConfig& cfg);

/// `cand :: <clause>` lines, each preceded by a `#` provenance comment.
std::string format_candidates(std::span<const ScoredRule> rules, const Signature& sig);
void write_candidates_file(const std::filesystem::path& path, std::span<const ScoredRule> rules,
                           const Signature& sig);
/// Reads `cand :: <clause>` lines back as Horn rules (exactly one positive
/// literal per clause). Throws ParseError.
std::vector<HornRule> parse_candidates(std::string_view text, Signature& sig);
std::vector<HornRule> read_candidates_file(const std::filesystem::path& path, Signature& sig);

/// Horn rule of a clause with exactly one positive literal.
HornRule horn_from_clause(const Clause& clause);

}  // namespace possrl
