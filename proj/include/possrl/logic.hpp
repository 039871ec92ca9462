#pragma once

// Function-free first-order syntax: predicates, terms, atoms, clauses and Horn
// rules, together with grounding, isomorphism, Weisfeiler-Lehman hashing and
// theta-subsumption.

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace possrl {

using PredId = std::int32_t;
using ConstId = std::int32_t;
using VarId = std::int32_t;

/// Largest predicate arity supported by the packed tuple index.
inline constexpr int kMaxArity = 4;
/// Largest number of constants supported by the packed tuple index.
inline constexpr int kMaxConstants = 1 << 16;

struct Predicate {
    std::string name;
    int arity = 0;

    friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Set of predicates with unique names. Ids are dense and stable.
class Signature {
public:
    /// Returns the id of `name`, adding it when absent. Throws SignatureError
    /// when `name` is already known with another arity.
    PredId add(std::string_view name, int arity);
    std::optional<PredId> find(std::string_view name) const;

    const Predicate& operator[](PredId id) const { return preds_[static_cast<std::size_t>(id)]; }
    std::size_t size() const noexcept { return preds_.size(); }
    bool empty() const noexcept { return preds_.empty(); }
    auto begin() const { return preds_.begin(); }
    auto end() const { return preds_.end(); }

    friend bool operator==(const Signature& a, const Signature& b) { return a.preds_ == b.preds_; }

private:
    std::vector<Predicate> preds_;
    std::unordered_map<std::string, PredId> index_;
};

/// Interned constant names.
class ConstantTable {
public:
    ConstId add(std::string_view name);
    std::optional<ConstId> find(std::string_view name) const;
    const std::string& name(ConstId id) const { return names_[static_cast<std::size_t>(id)]; }
    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, ConstId> index_;
};

struct Term {
    enum class Kind : std::uint8_t { Var, Const };
    Kind kind = Kind::Var;
    std::int32_t id = 0;

    static constexpr Term var(VarId v) { return {Kind::Var, v}; }
    static constexpr Term constant(ConstId c) { return {Kind::Const, c}; }
    constexpr bool is_var() const { return kind == Kind::Var; }

    friend auto operator<=>(const Term&, const Term&) = default;
};

struct Atom {
    PredId pred = 0;
    std::vector<Term> args;

    friend auto operator<=>(const Atom&, const Atom&) = default;
};

struct Literal {
    Atom atom;
    bool positive = true;

    friend auto operator<=>(const Literal&, const Literal&) = default;
};

/// Disjunction of literals, variables universally quantified. With `all_diff`
/// set, only injective variable substitutions count as groundings.
/// The empty clause is the contradiction (bottom).
struct Clause {
    std::vector<Literal> literals;
    bool all_diff = true;

    Clause() = default;
    Clause(std::vector<Literal> lits, bool diff = true);

    static Clause bottom() { return Clause{}; }
    bool is_bottom() const noexcept { return literals.empty(); }
    bool is_ground() const;
    bool is_tautology() const;
    /// Distinct variable ids, ascending.
    std::vector<VarId> variables() const;
    std::size_t num_vars() const { return variables().size(); }
    /// Sorts literals, drops duplicates and renumbers variables 0..n-1 in
    /// order of first occurrence.
    void normalize();

    friend auto operator<=>(const Clause&, const Clause&) = default;
};

/// head <- body_1 /\ ... /\ body_n, all atoms positive.
struct HornRule {
    Atom head;
    std::vector<Atom> body;
    bool all_diff = true;

    /// !body_1 v ... v !body_n v head
    Clause to_clause() const;
    std::vector<VarId> variables() const;

    friend auto operator<=>(const HornRule&, const HornRule&) = default;
};

/// Maps variable ids (index) to terms.
using Substitution = std::vector<Term>;

Atom apply(const Atom& atom, const Substitution& theta);
Clause apply(const Clause& clause, const Substitution& theta);

struct GroundAtom {
    PredId pred = 0;
    std::vector<ConstId> args;

    friend auto operator<=>(const GroundAtom&, const GroundAtom&) = default;
};

struct GroundAtomHash {
    std::size_t operator()(const GroundAtom& a) const noexcept;
};

struct GroundLiteral {
    GroundAtom atom;
    bool positive = true;

    friend auto operator<=>(const GroundLiteral&, const GroundLiteral&) = default;
};

using GroundClause = std::vector<GroundLiteral>;

/// Every grounding of `clause` with variables drawn from `constants`
/// (injective substitutions only when all_diff is set).
std::vector<GroundClause> ground(const Clause& clause, std::span<const ConstId> constants);
std::vector<GroundClause> ground(const HornRule& rule, std::span<const ConstId> constants);

/// Calls `visit` with each grounding substitution; stop by returning false.
void for_each_grounding(const Clause& clause, std::span<const ConstId> constants,
                        const std::function<bool(const Substitution&)>& visit);

GroundAtom ground_atom(const Atom& atom, const Substitution& theta);

// ---------------------------------------------------------------------------
// Relational structures, isomorphism and WL hashing

/// Elements 0..n-1 with colours, plus a set of coded tuples. Used as the common
/// shape of clauses (elements are variables) and examples (elements are
/// constants).
struct Structure {
    int num_elements = 0;
    std::vector<int> colors;
    std::vector<std::pair<int, std::vector<int>>> tuples;

    /// Sorts and deduplicates tuples.
    void normalize();
};

/// Element labels after `rounds` of neighbourhood refinement over the
/// element/tuple incidence graph.
std::vector<std::uint64_t> wl_labels(const Structure& s, int rounds = 3);
std::uint64_t wl_hash(const Structure& s, int rounds = 3);

/// A colour-preserving bijection a -> b mapping a's tuples onto b's, if any.
std::optional<std::vector<int>> find_isomorphism(const Structure& a, const Structure& b);

Structure to_structure(const Clause& clause);

std::uint64_t wl_hash(const Clause& clause);
std::uint64_t wl_hash(const HornRule& rule);

/// Equal up to variable renaming (constants are fixed points).
bool isomorphic(const Clause& a, const Clause& b);
bool isomorphic(const HornRule& a, const HornRule& b);

/// Least variable renaming of the clause (by literal order); identical for
/// isomorphic clauses with at most 8 variables.
Clause canonical_form(const Clause& clause);

/// True iff some substitution theta has c1.theta a subset of c2. When c1 has
/// AllDiff, c2 must have it too and theta must be injective. Decided by the
/// conjunctive query engine with c2's literals as the data.
bool theta_subsumes(const Clause& c1, const Clause& c2);
bool theta_subsumes(const HornRule& r1, const HornRule& r2);

// ---------------------------------------------------------------------------
// Text

/// `name(a,b,...)` or a bare `name` for arity 0. Throws std::invalid_argument.
std::pair<std::string, std::vector<std::string>> parse_atom_text(std::string_view text);

bool is_variable_token(std::string_view token);

/// Inverse of to_string(Clause): `l1 v l2 v ...`, `!` negation, `_bot_`, an
/// optional trailing `@nodiff`. Uppercase-initial arguments are variables;
/// unknown predicates and constants are added to `sig` and `consts`.
/// Throws std::invalid_argument on malformed text and SignatureError on an
/// arity clash.
Clause parse_clause(std::string_view text, Signature& sig, ConstantTable& consts);

std::string to_string(const Atom& atom, const Signature& sig, const ConstantTable* consts = nullptr);
std::string to_string(const GroundAtom& atom, const Signature& sig, const ConstantTable& consts);
/// `l1 v l2 v ...` with `!` for negation, `_bot_` for the empty clause and a
/// trailing `@nodiff` when AllDiff is off.
std::string to_string(const Clause& clause, const Signature& sig, const ConstantTable* consts = nullptr);
std::string to_string(const HornRule& rule, const Signature& sig);

}  // namespace possrl
