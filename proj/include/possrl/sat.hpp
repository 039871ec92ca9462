#pragma once

// Propositional side: grounding relational clauses to CNF, a CDCL solver with
// assumptions, entailment over a finite constant set, an exact model counter
// and DIMACS export.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "possrl/logic.hpp"

namespace possrl {

/// CNF over ground atoms. Variable v (1-based) stands for atoms[v-1];
/// literals are DIMACS-style signed integers.
class GroundCNF {
public:
    int var_of(const GroundAtom& atom);
    std::optional<int> find(const GroundAtom& atom) const;
    int num_vars() const noexcept { return static_cast<int>(atoms_.size()); }
    const GroundAtom& atom(int var) const { return atoms_[static_cast<std::size_t>(var - 1)]; }
    const std::vector<GroundAtom>& atoms() const noexcept { return atoms_; }

    void add_clause(const GroundClause& clause);
    void add_clause(std::vector<int> lits);
    const std::vector<std::vector<int>>& clauses() const noexcept { return clauses_; }

    /// Adds every grounding of `clause` over `constants`.
    void add_groundings(const Clause& clause, std::span<const ConstId> constants);

private:
    std::vector<GroundAtom> atoms_;
    std::unordered_map<GroundAtom, int, GroundAtomHash> index_;
    std::vector<std::vector<int>> clauses_;
};

GroundCNF ground_to_cnf(std::span<const Clause> formulas, std::span<const ConstId> constants,
                        std::span<const GroundLiteral> evidence = {});

/// Conflict-driven clause learning with watched literals, 1UIP learning, phase
/// saving and restarts. Clauses may be added between solve calls.
class SatSolver {
public:
    int new_var();
    void reserve_vars(int n);
    int num_vars() const noexcept { return static_cast<int>(value_.size()); }

    /// Returns false once the clause set is known to be unsatisfiable.
    bool add_clause(std::span<const int> lits);
    bool add_clause(std::initializer_list<int> lits) { return add_clause(std::span<const int>(lits.begin(), lits.size())); }
    /// XOR of the variables equals `parity`, through a Tseitin chain of fresh variables.
    bool add_xor(std::span<const int> vars, bool parity);

    bool solve(std::span<const int> assumptions = {});
    /// Value of `var` in the last model.
    bool model_value(int var) const { return model_[static_cast<std::size_t>(var - 1)] != 0; }
    const std::vector<char>& model() const noexcept { return model_; }

    std::uint64_t conflicts() const noexcept { return conflicts_; }
    std::uint64_t decisions() const noexcept { return decisions_; }
    std::uint64_t solve_calls() const noexcept { return solve_calls_; }

private:
    using CRef = int;
    static constexpr CRef kNoReason = -1;

    static int index(int lit) { return lit > 0 ? 2 * (lit - 1) : 2 * (-lit - 1) + 1; }
    signed char lit_value(int lit) const;
    void enqueue(int lit, CRef reason);
    CRef propagate();
    void analyze(CRef conflict, std::vector<int>& learnt, int& backtrack_level);
    void cancel_until(int level);
    int pick_branch();
    void bump(int var);
    CRef attach(std::vector<int> lits, bool learnt);
    int decision_level() const { return static_cast<int>(trail_lim_.size()); }

    std::vector<std::vector<int>> clauses_;
    std::vector<std::vector<CRef>> watches_;
    std::vector<signed char> value_;  // per var: -1 unassigned, 0, 1
    std::vector<int> level_;
    std::vector<CRef> reason_;
    std::vector<double> activity_;
    std::vector<char> phase_;
    std::vector<char> seen_;
    std::vector<int> trail_;
    std::vector<int> trail_lim_;
    std::size_t qhead_ = 0;
    double var_inc_ = 1.0;
    bool ok_ = true;
    std::vector<char> model_;
    std::uint64_t conflicts_ = 0;
    std::uint64_t decisions_ = 0;
    std::uint64_t solve_calls_ = 0;
};

struct SatVerdict {
    bool satisfiable = false;
    std::optional<std::vector<GroundAtom>> witness;  // true atoms
};

/// Decides the CNF; the witness is checked against every clause before return.
SatVerdict solve(const GroundCNF& cnf);

/// Loads every clause of the CNF into a fresh solver (variables aligned).
void load(SatSolver& solver, const GroundCNF& cnf);

/// True iff every grounding of `query` over `constants` follows from the
/// groundings of `formulas`.
bool entails(std::span<const Clause> formulas, std::span<const ConstId> constants, const Clause& query);

/// Number of assignments to variables 1..num_vars satisfying all clauses.
/// Exact DPLL counting; intended for at most a few dozen variables.
std::uint64_t count_models(const std::vector<std::vector<int>>& clauses, int num_vars);

/// Exact model counting by DPLL with unit propagation, decomposition into
/// variable-disjoint components and a component cache kept across calls.
/// Counts are long doubles, so they stay meaningful past 2^64.
class ComponentCounter {
public:
    /// Throws BudgetError from count() once more than `node_limit` branches
    /// were taken in total (0 = unlimited).
    ComponentCounter(const std::vector<std::vector<int>>& clauses, int num_vars, std::uint64_t node_limit = 0);

    /// Assignments to variables 1..num_vars satisfying every clause and every
    /// literal of `fixed`.
    long double count(std::span<const int> fixed = {});
    std::uint64_t nodes() const noexcept { return nodes_; }
    std::size_t cache_size() const noexcept { return cache_.size(); }

private:
    struct KeyHash {
        std::size_t operator()(const std::vector<int>& key) const noexcept;
    };
    long double solve(std::vector<std::vector<int>> clauses, int scope);

    std::vector<std::vector<int>> clauses_;
    int num_vars_;
    std::uint64_t node_limit_;
    std::uint64_t nodes_ = 0;
    bool unsat_ = false;
    std::unordered_map<std::vector<int>, long double, KeyHash> cache_;
};

/// `p cnf V C` followed by zero-terminated clause lines; the optional sidecar
/// receives `var atom` lines.
void write_dimacs(const GroundCNF& cnf, std::ostream& out);
void write_atom_table(const GroundCNF& cnf, std::ostream& out, const Signature& sig, const ConstantTable& consts);

}  // namespace possrl
