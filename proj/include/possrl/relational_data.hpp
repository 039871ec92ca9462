#pragma once

// The global example (A, C), fragments, local examples of width k and the
// relational marginal distribution P_{Y,k}.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "possrl/logic.hpp"

namespace possrl {

using Rng = std::mt19937_64;

/// Packs up to kMaxArity constants (each < 2^16) into one key.
std::uint64_t pack_tuple(std::span<const ConstId> args);

/// A set of ground atoms over a constant set, with a per-predicate tuple index.
/// Immutable after construction.
class GlobalExample {
public:
    GlobalExample() = default;
    /// Atoms are sorted and deduplicated. Throws DomainError when an atom uses a
    /// constant id outside `constants` or a predicate outside `signature`.
    GlobalExample(Signature signature, ConstantTable constants, std::vector<GroundAtom> atoms);

    const Signature& signature() const noexcept { return signature_; }
    const ConstantTable& constants() const noexcept { return constants_; }
    const std::vector<GroundAtom>& atoms() const noexcept { return atoms_; }
    std::size_t num_constants() const noexcept { return constants_.size(); }
    std::vector<ConstId> constant_ids() const;

    bool contains(const GroundAtom& atom) const { return contains(atom.pred, atom.args); }
    bool contains(PredId pred, std::span<const ConstId> args) const;
    /// Constants occurring at argument `pos` of some `pred` atom, ascending.
    const std::vector<ConstId>& constants_at(PredId pred, int pos) const;
    /// All atoms of `pred`.
    const std::vector<GroundAtom>& atoms_of(PredId pred) const;

private:
    Signature signature_;
    ConstantTable constants_;
    std::vector<GroundAtom> atoms_;
    std::vector<std::unordered_set<std::uint64_t>> keys_;
    std::vector<std::vector<std::vector<ConstId>>> position_constants_;
    std::vector<std::vector<GroundAtom>> by_pred_;
};

/// Width-k possible world over canonical constants 0..k-1 (printed 1..k).
struct LocalExample {
    int width = 0;
    std::vector<GroundAtom> atoms;  // sorted, unique

    void normalize();
    friend auto operator<=>(const LocalExample&, const LocalExample&) = default;
};

struct Fragment {
    std::vector<GroundAtom> atoms;
    std::vector<ConstId> subset;  // ascending
};

/// One ground atom per line, `#` comments, optional `@constants a b c` lines
/// declaring isolated constants. Throws ParseError / SignatureError.
GlobalExample parse_example(std::string_view text, std::span<const std::string> declared_constants = {});
GlobalExample read_example_file(const std::filesystem::path& path);
/// Inverse of parse_example (sorted atoms, `@constants` line listing every constant).
std::string format_example(const GlobalExample& example);

/// Restriction of the example to the constants in `subset`.
Fragment fragment(const GlobalExample& example, std::span<const ConstId> subset);

/// All width-|S| local examples isomorphic to the fragment on S (Y[S]).
/// Enumerates |S|! bijections; |S| is capped at 8.
std::vector<LocalExample> local_class(const GlobalExample& example, std::span<const ConstId> subset);

/// Draws from P_{Y,k}: a uniform k-subset, then a uniform member of Y[S].
LocalExample sample_marginal(const GlobalExample& example, int k, Rng& rng);

/// Local example obtained by mapping subset[i] -> i.
LocalExample standardize(const Fragment& frag, std::span<const int> position_of_constant_in_subset);

Structure to_structure(const LocalExample& example);
Structure to_structure(const GlobalExample& example);
bool isomorphic(const LocalExample& a, const LocalExample& b);
bool isomorphic(const GlobalExample& a, const GlobalExample& b);
std::uint64_t wl_hash(const LocalExample& example);

/// A local example viewed as a global example with constants named "1".."k".
GlobalExample as_global(const LocalExample& example, const Signature& signature);

/// Ground atoms of the language L_k (constants 0..k-1) in a fixed order, so
/// that worlds can be handled as bit vectors.
class WorldSpace {
public:
    WorldSpace(const Signature& signature, int width);

    int width() const noexcept { return width_; }
    std::size_t num_atoms() const noexcept { return atoms_.size(); }
    const GroundAtom& atom(std::size_t i) const { return atoms_[i]; }
    const std::vector<GroundAtom>& atoms() const noexcept { return atoms_; }
    std::size_t index_of(const GroundAtom& atom) const;

    /// Valid when num_atoms() <= 63.
    std::uint64_t to_mask(const LocalExample& world) const;
    LocalExample from_mask(std::uint64_t mask) const;
    /// Image of the world under the constant permutation `perm` (i -> perm[i]).
    std::uint64_t permute(std::uint64_t mask, std::span<const int> perm) const;

private:
    int width_;
    std::vector<GroundAtom> atoms_;
    std::unordered_map<GroundAtom, std::size_t, GroundAtomHash> index_;
};

/// Binomial coefficient as a double (exact below 2^53).
double binomial(std::size_t n, std::size_t k);

/// Calls `visit` with each k-subset of 0..n-1 in lexicographic order; stop by
/// returning false.
void for_each_subset(std::size_t n, std::size_t k, const std::function<bool(std::span<const ConstId>)>& visit);

}  // namespace possrl
