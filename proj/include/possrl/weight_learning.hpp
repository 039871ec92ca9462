#pragma once

// Stratum parameters |E_i| and |M_i|, the maximum-likelihood weights of an
// ordering, greedy ordering search and theory simplification.

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "possrl/counting.hpp"
#include "possrl/logic.hpp"
#include "possrl/possibilistic.hpp"
#include "possrl/relational_data.hpp"
#include "possrl/structure_learning.hpp"

namespace possrl {

struct ParamPolicy {
    CountingPolicy counting;
    ModelCountMode model_mode = ModelCountMode::Ground;
    std::size_t exact_atom_limit = 24;
    /// Base seed; each cut's counters draw from a stream derived from the cut.
    std::uint64_t seed = 1;
};

/// Counts for one cut: fragments Y<S> satisfying it and width-k worlds satisfying it.
struct CutCounts {
    CountReport e;
    CountReport m;
};

/// Keyed by the canonical forms of the cut's formulas (hard rules included).
class ParamCache {
public:
    std::optional<CutCounts> find(const std::vector<Clause>& key) const;
    void insert(const std::vector<Clause>& key, const CutCounts& counts);
    std::size_t hits() const noexcept { return hits_; }
    std::size_t misses() const noexcept { return misses_; }
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::vector<Clause>, CutCounts> table_;
    mutable std::size_t hits_ = 0;
    mutable std::size_t misses_ = 0;
};

/// Sorted canonical forms of `formulas` plus `hard`.
std::vector<Clause> cut_key(std::span<const Clause> formulas, std::span<const Clause> hard);

/// Counts for the cut formulas + hard, using a seed derived from the key.
CutCounts count_cut(const GlobalExample& data, std::span<const Clause> formulas, std::span<const Clause> hard, int k,
                    const ParamPolicy& policy);

struct StratumParams {
    /// alpha_1 = bottom, alpha_2, ..., alpha_n
    std::vector<Clause> ordering;
    /// Index i-1 holds |E_i| / |M_i| for i = 1..n+1 (cut i = alpha_i..alpha_n + hard).
    std::vector<double> e_counts;
    std::vector<double> m_counts;
    std::vector<CountReport> e_reports;
    std::vector<CountReport> m_reports;
};

/// Counts every cut of the ordering. Approximate counts are made monotone by a
/// running minimum from the top cut down.
StratumParams estimate_params(std::span<const Clause> ordering, std::span<const Clause> hard,
                              const GlobalExample& data, int k, const ParamPolicy& policy,
                              ParamCache* cache = nullptr);

struct GPSolution {
    std::vector<double> lambdas;
    double log_likelihood = 0;
    bool converged = false;
    /// Projected-gradient stationarity residual of the log-space problem.
    double kkt_residual = 0;
    /// |sum_i (1 - lambda_i)(m_{i+1} - m_i) - 1|
    double normalization_residual = 0;
};

/// Maximizes sum_i (e_{i+1} - e_i) log(1 - lambda_i) subject to
/// lambda_1 <= ... <= lambda_n and sum_i (1 - lambda_i)(m_{i+1} - m_i) = 1.
/// With p_i = 1 - lambda_i the optimum is the weighted antitonic regression of
/// (e_{i+1} - e_i) / (|E| (m_{i+1} - m_i)) with weights m_{i+1} - m_i, computed
/// by pool-adjacent-violators. Throws InfeasibleError when no world carries
/// mass or data falls on a stratum without worlds.
GPSolution solve_gp(std::span<const double> e_counts, std::span<const double> m_counts);
inline GPSolution solve_gp(const StratumParams& p) { return solve_gp(p.e_counts, p.m_counts); }

/// Objective of solve_gp at the given lambdas (-inf outside the domain).
double gp_log_likelihood(std::span<const double> e_counts, std::span<const double> lambdas);

struct GreedyConfig {
    ParamPolicy params;
    int passes = 1;
    double min_gain = 1e-9;
};

struct GreedyResult {
    StratifiedTheory theory;
    std::vector<Clause> ordering;  // soft part, bottom first
    GPSolution solution;
    /// Log-likelihood after each accepted insertion, starting with the bottom-only theory.
    std::vector<double> trajectory;
    std::vector<std::string> log;
};

/// Inserts candidates one at a time at the position that maximizes the GP
/// likelihood, keeping an insertion only when it improves by more than
/// min_gain. Candidates are visited by descending accuracy, ties by canonical form.
GreedyResult greedy_build(std::span<const ScoredRule> candidates, std::span<const Clause> hard,
                          const GlobalExample& data, int k, const GreedyConfig& cfg, ParamCache* cache = nullptr);

/// The theory: hard rules at 1, ordering[i] at lambdas[i]; near-equal levels merged.
StratifiedTheory assemble_theory(std::span<const Clause> ordering, std::span<const double> lambdas,
                                 std::span<const Clause> hard);

struct SimplifyStats {
    std::size_t removed_formulas = 0;
    std::size_t removed_literals = 0;
};

/// Repeats to a fixpoint: drops soft formulas entailed by the strictly higher
/// strata, then drops body atoms of soft Horn rules when the shorter rule is
/// entailed by the higher strata plus the rule itself. Entailment is checked
/// over max(k, #variables) constants.
StratifiedTheory simplify(const StratifiedTheory& theory, int k, SimplifyStats* stats = nullptr);

}  // namespace possrl
