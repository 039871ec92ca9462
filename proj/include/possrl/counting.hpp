#pragma once

// Matching-subset counting (exact, sampled, XOR-hashed) and model counting over
// the ground atoms of L_k.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "possrl/logic.hpp"
#include "possrl/query_engine.hpp"
#include "possrl/relational_data.hpp"

namespace possrl {

enum class CountMethod { ExactNaive, ExactAlg1, Sampled, XorApprox, ExactModels };

std::string to_string(CountMethod method);

struct CountReport {
    double value = 0;
    CountMethod method = CountMethod::ExactAlg1;
    std::optional<double> epsilon;
    std::optional<double> delta;
    std::optional<std::pair<double, double>> ci;
    /// False when a sampled estimate did not reach the CI width threshold.
    bool usable = true;
    std::uint64_t seed = 0;

    /// `method value [ci_lo ci_hi] seed`
    std::string to_line() const;
};

struct CountingPolicy {
    /// Work budgets in CSP search nodes.
    std::uint64_t exact_limit_small = 20000;
    std::uint64_t exact_limit_large = 2000000;
    /// Node budget of the XOR tier; 0 = unlimited.
    std::uint64_t xor_node_limit = 0;
    double ci_rel_width_threshold = 0.2;
    double epsilon = 0.8;
    double delta = 0.2;
    int sample_budget = 2000;
};

using SubsetSet = std::set<std::vector<ConstId>>;

/// Adds fresh variables and card(k, all variables). Under AllDiff the m
/// original variables are already distinct, so k-m fresh variables suffice;
/// otherwise k fresh variables are added. Throws DomainError when m > k.
ConjunctiveQuery k_extension(const ConjunctiveQuery& query, int k);

/// Every solution of the k-extension, collapsed to its set of constants.
SubsetSet matching_subsets_naive(const GlobalExample& data, const ConjunctiveQuery& extended,
                                 std::uint64_t node_limit = 0, std::uint64_t* nodes = nullptr);

struct Alg1Stats {
    /// Constants returned by all CSP(alpha', V_i) calls.
    std::uint64_t csp_solutions = 0;
    std::uint64_t csp_calls = 0;
    std::uint64_t nodes = 0;
    /// Sets generated, i.e. |Next| summed over the variable iterations.
    std::uint64_t partial_sets = 0;
    /// Distinct sets generated over all iterations.
    std::uint64_t distinct_partial_sets = 0;
};

/// All-Matching-Subsets: grows partial constant sets one variable at a time
/// with CSP(alpha /\ in(V_1,S) /\ ... /\ in(V_{i-1},S), V_i). Partial sets
/// larger than k are dropped since no k-subset contains them.
SubsetSet matching_subsets_alg1(const GlobalExample& data, const ConjunctiveQuery& extended, int k,
                                std::uint64_t node_limit = 0, Alg1Stats* stats = nullptr);

/// Counts k-subsets matched by at least one of the (unextended) queries.
struct CountTask {
    const GlobalExample* data = nullptr;
    std::vector<ConjunctiveQuery> queries;
    int k = 1;
};

/// Wilson 95% interval for a binomial proportion.
std::pair<double, double> wilson_interval(std::uint64_t hits, std::uint64_t trials, double z = 1.959963984540054);

CountReport count_exact(const CountTask& task, std::uint64_t node_limit = 0);
CountReport count_sampled(const CountTask& task, const CountingPolicy& policy, Rng& rng);
CountReport count_xor_approx(const CountTask& task, double epsilon, double delta, Rng& rng,
                             std::uint64_t node_limit = 0, std::uint64_t pivot_cap = 0);
/// Exact with the small budget, then sampling, then exact with the large
/// budget, then XOR hashing. Throws BudgetError when every tier fails.
CountReport count_dispatch(const CountTask& task, const CountingPolicy& policy, Rng& rng);

// ---------------------------------------------------------------------------
// Hashing-based approximate counting

/// A solution space projected onto indicator variables 0..n-1 that can be
/// counted up to a limit under additional XOR constraints.
class BoundedCounter {
public:
    virtual ~BoundedCounter() = default;
    virtual std::size_t num_indicators() const = 0;
    /// min(limit, number of projected solutions satisfying the XORs)
    virtual std::uint64_t count_upto(std::span<const XorConstraint> xors, std::uint64_t limit) = 0;
};

std::uint64_t approxmc_pivot(double epsilon);
int approxmc_rounds(double delta);

struct ApproxMcResult {
    double estimate = 0;
    /// The space had at most `pivot` solutions and was counted exactly.
    bool exact = false;
    int rounds = 0;
};

ApproxMcResult approx_count(BoundedCounter& counter, double epsilon, double delta, std::uint64_t pivot, Rng& rng);

// ---------------------------------------------------------------------------
// Model counting over L_k

enum class ModelCountMode { Ground, CuttingPlane };

/// Worlds over the ground atoms of L_k (constants 0..k-1) satisfying every
/// grounding of every formula. Exact up to `exact_atom_limit` atoms, hashed
/// above; the cutting-plane mode grounds lazily in the hashed regime.
CountReport model_count(std::span<const Clause> formulas, const Signature& signature, int k, ModelCountMode mode,
                        double epsilon, double delta, Rng& rng, std::size_t exact_atom_limit = 24);

}  // namespace possrl
