#pragma once

// Stratified possibilistic theories over relational clauses: the possibility
// distribution they induce on local examples, the exact encoding of a
// relational marginal, and MAP inference through the mu_0 cut.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "possrl/logic.hpp"
#include "possrl/relational_data.hpp"
#include "possrl/sat.hpp"

namespace possrl {

struct WeightedFormula {
    Clause formula;
    double weight = 0;
};

/// Formulas grouped by weight level, levels strictly increasing. Bottom, if
/// present, sits at the lowest level.
class StratifiedTheory {
public:
    struct Stratum {
        double level = 0;
        std::vector<Clause> formulas;
    };

    StratifiedTheory() = default;
    explicit StratifiedTheory(std::span<const WeightedFormula> formulas);

    /// Throws DomainError for a weight outside [0,1] or when the bottom/level
    /// ordering would be violated. Duplicate formulas within a stratum are kept once.
    void add(const Clause& formula, double weight);
    void add(const WeightedFormula& wf) { add(wf.formula, wf.weight); }

    const std::vector<Stratum>& strata() const noexcept { return strata_; }
    std::size_t num_strata() const noexcept { return strata_.size(); }
    std::size_t size() const;
    bool empty() const noexcept { return strata_.empty(); }

    /// Formulas with weight >= mu.
    std::vector<Clause> cut(double mu) const;
    /// Formulas of strata index..n-1.
    std::vector<Clause> cut_from(std::size_t index) const;
    /// Formulas at level 1.
    std::vector<Clause> hard() const;
    /// All formulas, descending weight.
    std::vector<WeightedFormula> formulas() const;
    bool has_bottom() const;

private:
    std::vector<Stratum> strata_;
};

/// One isomorphism class of width-k local examples, written as the complete
/// conjunction of its representative over the atoms of L_k.
struct MarginalClassFormula {
    LocalExample representative;
    std::uint64_t cardinality = 1;
    double probability = 0;

    /// The negated conjunction as an AllDiff clause over k variables.
    Clause negation(const WorldSpace& space) const;
};

/// min{1 - weight : world violates the formula}, 1 for an empty minimum.
/// Constants in the theory are read as the world's constants 0..k-1.
double possibility(const StratifiedTheory& theory, const LocalExample& world, const Signature& signature);

/// Every isomorphism class of width-k worlds with its probability under
/// P_{Y,k}. Throws SizeError above `max_atoms` ground atoms of L_k.
std::vector<MarginalClassFormula> marginal_classes(const GlobalExample& data, int k, std::size_t max_atoms = 16);

/// {(!alpha, 1 - P(alpha)/c(alpha))} over all classes; weight-0 formulas dropped.
StratifiedTheory exact_encoding(const GlobalExample& data, int k, std::size_t max_atoms = 16);

// ---------------------------------------------------------------------------
// MAP inference

struct MapCut {
    /// mu_0; empty when not even the top stratum is consistent with the evidence.
    std::optional<double> level;
    /// First stratum of the cut (num_strata() for the empty cut).
    std::size_t first_stratum = 0;
    std::vector<Clause> formulas;
    std::uint64_t sat_calls = 0;
};

/// Grounds the theory once over `constants`, one activation literal per
/// stratum, and answers cut / entailment / prediction queries against it.
class MapEngine {
public:
    /// Throws EvidenceError when the evidence contains a complementary pair.
    MapEngine(const StratifiedTheory& theory, std::span<const ConstId> constants,
              std::span<const GroundLiteral> evidence);

    const MapCut& cut() const noexcept { return cut_; }
    bool entails(const GroundAtom& query);
    /// Entailed atoms among those in the grounding, plus positive evidence.
    std::vector<GroundAtom> prediction();
    std::uint64_t sat_calls() const noexcept { return sat_calls_; }

private:
    bool consistent_from(std::size_t first);
    std::vector<int> assumptions(std::size_t first) const;

    GroundCNF cnf_;
    SatSolver solver_;
    std::vector<int> activation_;  // solver variable per stratum
    std::vector<GroundAtom> positive_evidence_;
    MapCut cut_;
    std::uint64_t sat_calls_ = 0;
};

MapCut map_cutoff(const StratifiedTheory& theory, std::span<const GroundLiteral> evidence,
                  std::span<const ConstId> constants);
bool map_entails(const StratifiedTheory& theory, std::span<const GroundLiteral> evidence,
                 std::span<const ConstId> constants, const GroundAtom& query);
std::vector<GroundAtom> map_prediction(const StratifiedTheory& theory, std::span<const GroundLiteral> evidence,
                                       std::span<const ConstId> constants);

// ---------------------------------------------------------------------------
// Theory files

/// `<weight> :: <clause>` per line, `#` comments and blank lines ignored.
/// Throws ParseError with the line number.
StratifiedTheory parse_theory(std::string_view text, Signature& sig, ConstantTable& consts);
StratifiedTheory read_theory_file(const std::filesystem::path& path, Signature& sig, ConstantTable& consts);
/// Descending weight, weights printed with %.17g.
std::string format_theory(const StratifiedTheory& theory, const Signature& sig, const ConstantTable* consts = nullptr);
void write_theory_file(const std::filesystem::path& path, const StratifiedTheory& theory, const Signature& sig,
                       const ConstantTable* consts = nullptr);

/// %.17g
std::string format_weight(double w);

}  // namespace possrl
