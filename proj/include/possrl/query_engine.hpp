#pragma once

// Conjunctive-query CSP solver over a GlobalExample: backtracking search with
// forward checking, AllDiff, card(k, ...) and in(V, S) constraints, and global
// XOR constraints over constant-indicator variables propagated by Gaussian
// elimination over GF(2).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "possrl/logic.hpp"
#include "possrl/relational_data.hpp"

namespace possrl {

struct QueryLiteral {
    Atom atom;
    bool positive = true;
};

/// |{values of vars}| == k
struct CardConstraint {
    int k = 0;
    std::vector<VarId> vars;
};

/// value(var) in allowed
struct InConstraint {
    VarId var = 0;
    std::vector<ConstId> allowed;
};

/// XOR over indicators of the listed constants (an indicator is true iff the
/// constant is the value of some query variable) equals `parity`.
struct XorConstraint {
    std::vector<ConstId> indicators;
    bool parity = false;
};

/// Existentially quantified conjunction over variables 0..num_vars-1.
/// Negative literals are checked against the closed world of the data.
struct ConjunctiveQuery {
    int num_vars = 0;
    std::vector<QueryLiteral> literals;
    bool all_diff = false;
    std::vector<CardConstraint> cards;
    std::vector<InConstraint> ins;

    VarId add_var() { return num_vars++; }
    /// True iff v occurs in a literal or a card constraint.
    bool mentions(VarId v) const;
};

/// exists vars: not(clause), i.e. the query whose solutions are the
/// counterexamples of the clause. Inherits the clause's AllDiff flag.
ConjunctiveQuery negation_query(const Clause& clause);
/// exists vars: a_1 /\ ... /\ a_n
ConjunctiveQuery conjunction_query(std::span<const Atom> atoms, bool all_diff);

/// A dense system of XOR equations over n boolean variables.
class Gf2System {
public:
    explicit Gf2System(std::size_t num_vars = 0);

    void add_row(std::span<const std::size_t> vars, bool rhs);
    std::size_t num_vars() const noexcept { return n_; }
    std::size_t num_rows() const noexcept { return rows_.size(); }

    /// Substitutes known values, reduces to row echelon form and reports
    /// consistency. `forced` receives variables fixed by a single-variable row.
    /// `known` holds -1 (unknown), 0 or 1 per variable.
    bool propagate(std::span<const signed char> known, std::vector<std::pair<std::size_t, bool>>& forced) const;
    /// Truth-table check of one complete assignment.
    bool satisfied_by(std::span<const char> values) const;

private:
    std::size_t n_;
    std::size_t words_;
    std::vector<std::vector<std::uint64_t>> rows_;
    std::vector<char> rhs_;
};

/// Single-use solver instance.
class CspSolver {
public:
    CspSolver(const GlobalExample& data, const ConjunctiveQuery& query, std::span<const XorConstraint> xors = {});

    /// Restricts the root domain of v; call before searching.
    void restrict(VarId v, std::span<const ConstId> allowed);
    /// Search budget in nodes (assignments tried); 0 = unlimited. Exceeding it
    /// throws BudgetError.
    void set_node_limit(std::uint64_t limit) { node_limit_ = limit; }

    bool solve();
    /// Solution found by the last successful solve().
    const std::vector<ConstId>& solution() const noexcept { return solution_; }
    /// Visits every solution; return false from `visit` to stop. Returns the
    /// number of solutions visited.
    std::uint64_t enumerate(const std::function<bool(std::span<const ConstId>)>& visit);
    /// Values c of v for which the query with v=c is satisfiable.
    std::vector<ConstId> supported_values(VarId v);

    std::uint64_t nodes() const noexcept { return nodes_; }

private:
    using Domains = std::vector<std::vector<ConstId>>;

    bool root_propagate(Domains& doms) const;
    bool propagate_assignment(Domains& doms, std::vector<ConstId>& values, VarId v) const;
    bool propagate_xor(Domains& doms, const std::vector<ConstId>& values) const;
    bool filter_literal(Domains& doms, const std::vector<ConstId>& values, std::size_t lit) const;
    bool check_cards(Domains& doms, const std::vector<ConstId>& values, VarId v) const;
    bool leaf_ok(const std::vector<ConstId>& values) const;
    bool literal_true(const QueryLiteral& lit, const std::vector<ConstId>& values) const;
    bool search(Domains& doms, std::vector<ConstId>& values, const std::function<bool(std::span<const ConstId>)>& visit,
                bool& stop, std::uint64_t& found);

    const GlobalExample& data_;
    const ConjunctiveQuery& query_;
    std::vector<XorConstraint> xors_;
    Gf2System gf2_;
    Domains root_;
    bool root_ok_ = true;
    std::vector<std::vector<std::size_t>> lits_of_var_;
    std::vector<std::vector<std::size_t>> cards_of_var_;
    std::vector<ConstId> solution_;
    std::uint64_t nodes_ = 0;
    std::uint64_t node_limit_ = 0;
};

bool satisfiable(const ConjunctiveQuery& query, const GlobalExample& data);

/// CSP(q, V, Y): constants c with q[V/c] satisfiable. Throws DomainError if V
/// is not mentioned by q. `nodes` accumulates search effort when given.
std::vector<ConstId> csp_query(const ConjunctiveQuery& query, VarId v, const GlobalExample& data,
                               std::uint64_t node_limit = 0, std::uint64_t* nodes = nullptr);

struct XorSolveResult {
    bool satisfiable = false;
    /// Constants used by the witness solution (ascending).
    std::optional<std::vector<ConstId>> witness_subset;
};

XorSolveResult solve_with_xor(const ConjunctiveQuery& query, const GlobalExample& data,
                              std::span<const XorConstraint> xors);

/// Ascending distinct values of a solution.
std::vector<ConstId> used_constants(std::span<const ConstId> values);

}  // namespace possrl
