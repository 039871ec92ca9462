#include "possrl/possibilistic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "possrl/errors.hpp"
#include "possrl/query_engine.hpp"

namespace possrl {

StratifiedTheory::StratifiedTheory(std::span<const WeightedFormula> formulas) {
    std::vector<WeightedFormula> sorted(formulas.begin(), formulas.end());
    // ascending, so a bottom at the lowest level is seen before anything above it
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.weight < b.weight; });
    for (const auto& wf : sorted) add(wf);
}

void StratifiedTheory::add(const Clause& formula, double weight) {
    if (!(weight >= 0.0 && weight <= 1.0)) throw DomainError("weight " + format_weight(weight) + " outside [0,1]");
    auto it = std::lower_bound(strata_.begin(), strata_.end(), weight,
                               [](const Stratum& s, double w) { return s.level < w; });
    const bool bottom_below = has_bottom() && weight < strata_.front().level;
    const bool bottom_above = formula.is_bottom() && it != strata_.begin();
    if (bottom_below || bottom_above) throw DomainError("bottom must sit at the lowest weight level");
    if (it == strata_.end() || it->level != weight) it = strata_.insert(it, Stratum{weight, {}});
    if (std::find(it->formulas.begin(), it->formulas.end(), formula) == it->formulas.end())
        it->formulas.push_back(formula);
}

std::size_t StratifiedTheory::size() const {
    std::size_t n = 0;
    for (const auto& s : strata_) n += s.formulas.size();
    return n;
}

std::vector<Clause> StratifiedTheory::cut(double mu) const {
    std::vector<Clause> out;
    for (const auto& s : strata_)
        if (s.level >= mu) out.insert(out.end(), s.formulas.begin(), s.formulas.end());
    return out;
}

std::vector<Clause> StratifiedTheory::cut_from(std::size_t index) const {
    std::vector<Clause> out;
    for (std::size_t i = index; i < strata_.size(); ++i)
        out.insert(out.end(), strata_[i].formulas.begin(), strata_[i].formulas.end());
    return out;
}

std::vector<Clause> StratifiedTheory::hard() const { return cut(1.0); }

std::vector<WeightedFormula> StratifiedTheory::formulas() const {
    std::vector<WeightedFormula> out;
    for (auto s = strata_.rbegin(); s != strata_.rend(); ++s)
        for (const auto& f : s->formulas) out.push_back({f, s->level});
    return out;
}

bool StratifiedTheory::has_bottom() const {
    if (strata_.empty()) return false;
    const auto& f = strata_.front().formulas;
    return std::any_of(f.begin(), f.end(), [](const Clause& c) { return c.is_bottom(); });
}

// ---------------------------------------------------------------------------

Clause MarginalClassFormula::negation(const WorldSpace& space) const {
    std::set<GroundAtom> present(representative.atoms.begin(), representative.atoms.end());
    std::vector<Literal> lits;
    lits.reserve(space.num_atoms());
    for (const auto& g : space.atoms()) {
        Atom a{g.pred, {}};
        for (auto c : g.args) a.args.push_back(Term::var(c));
        lits.push_back({std::move(a), present.count(g) == 0});
    }
    return Clause(std::move(lits), true);
}

double possibility(const StratifiedTheory& theory, const LocalExample& world, const Signature& signature) {
    const auto data = as_global(world, signature);
    const auto& strata = theory.strata();
    for (auto s = strata.rbegin(); s != strata.rend(); ++s)
        for (const auto& f : s->formulas)
            if (satisfiable(negation_query(f), data)) return 1.0 - s->level;
    return 1.0;
}

std::vector<MarginalClassFormula> marginal_classes(const GlobalExample& data, int k, std::size_t max_atoms) {
    const auto n = data.num_constants();
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw DomainError("k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    if (k > 8) throw SizeError("exact encoding: width " + std::to_string(k) + " exceeds 8");
    WorldSpace space(data.signature(), k);
    if (space.num_atoms() > max_atoms)
        throw SizeError("exact encoding: " + std::to_string(space.num_atoms()) + " ground atoms exceed the cap of " +
                        std::to_string(max_atoms));

    const std::uint64_t num_worlds = std::uint64_t{1} << space.num_atoms();
    std::vector<std::uint32_t> class_of(num_worlds, UINT32_MAX);
    std::vector<MarginalClassFormula> classes;
    std::vector<int> perm(static_cast<std::size_t>(k));
    for (std::uint64_t mask = 0; mask < num_worlds; ++mask) {
        if (class_of[mask] != UINT32_MAX) continue;
        const auto id = static_cast<std::uint32_t>(classes.size());
        std::uint64_t members = 0;
        std::iota(perm.begin(), perm.end(), 0);
        do {
            auto image = space.permute(mask, perm);
            if (class_of[image] == UINT32_MAX) {
                class_of[image] = id;
                ++members;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        classes.push_back({space.from_mask(mask), members, 0.0});
    }

    const double total = binomial(n, static_cast<std::size_t>(k));
    std::vector<int> identity(static_cast<std::size_t>(k));
    std::iota(identity.begin(), identity.end(), 0);
    for_each_subset(n, static_cast<std::size_t>(k), [&](std::span<const ConstId> subset) {
        auto world = standardize(fragment(data, subset), identity);
        classes[class_of[space.to_mask(world)]].probability += 1.0 / total;
        return true;
    });
    return classes;
}

StratifiedTheory exact_encoding(const GlobalExample& data, int k, std::size_t max_atoms) {
    WorldSpace space(data.signature(), k);
    StratifiedTheory theory;
    for (const auto& cls : marginal_classes(data, k, max_atoms)) {
        double w = 1.0 - cls.probability / static_cast<double>(cls.cardinality);
        if (std::abs(w) < 1e-12) continue;
        theory.add(cls.negation(space), std::clamp(w, 0.0, 1.0));
    }
    return theory;
}

// ---------------------------------------------------------------------------

MapEngine::MapEngine(const StratifiedTheory& theory, std::span<const ConstId> constants,
                     std::span<const GroundLiteral> evidence) {
    std::set<GroundLiteral> ev(evidence.begin(), evidence.end());
    for (const auto& lit : ev)
        if (lit.positive && ev.count(GroundLiteral{lit.atom, false}))
            throw EvidenceError("evidence contains an atom and its negation");

    const auto& strata = theory.strata();
    std::vector<std::size_t> clause_start;
    for (const auto& s : strata) {
        clause_start.push_back(cnf_.clauses().size());
        for (const auto& f : s.formulas) cnf_.add_groundings(f, constants);
    }
    clause_start.push_back(cnf_.clauses().size());
    const auto theory_clauses = cnf_.clauses().size();
    for (const auto& lit : ev) {
        cnf_.add_clause(GroundClause{lit});
        if (lit.positive) positive_evidence_.push_back(lit.atom);
    }

    solver_.reserve_vars(cnf_.num_vars());
    for (std::size_t i = 0; i < strata.size(); ++i) {
        const int act = solver_.new_var();
        activation_.push_back(act);
        for (auto c = clause_start[i]; c < clause_start[i + 1]; ++c) {
            auto lits = cnf_.clauses()[c];
            lits.push_back(-act);
            solver_.add_clause(lits);
        }
    }
    for (auto c = theory_clauses; c < cnf_.clauses().size(); ++c) solver_.add_clause(cnf_.clauses()[c]);

    // smallest i with strata i..n-1 consistent with the evidence; i = n (the
    // empty cut) is consistent because the evidence is
    std::size_t lo = 0, hi = strata.size();
    while (lo < hi) {
        auto mid = lo + (hi - lo) / 2;
        if (consistent_from(mid))
            hi = mid;
        else
            lo = mid + 1;
    }
    cut_.first_stratum = lo;
    if (lo < strata.size()) cut_.level = strata[lo].level;
    cut_.formulas = theory.cut_from(lo);
    cut_.sat_calls = sat_calls_;
}

std::vector<int> MapEngine::assumptions(std::size_t first) const {
    return {activation_.begin() + static_cast<std::ptrdiff_t>(first), activation_.end()};
}

bool MapEngine::consistent_from(std::size_t first) {
    ++sat_calls_;
    return solver_.solve(assumptions(first));
}

bool MapEngine::entails(const GroundAtom& query) {
    auto var = cnf_.find(query);
    if (!var) return false;
    auto assume = assumptions(cut_.first_stratum);
    assume.push_back(-*var);
    ++sat_calls_;
    return !solver_.solve(assume);
}

std::vector<GroundAtom> MapEngine::prediction() {
    // backbone over the true atoms of one model: an atom false in any model of
    // the cut is not entailed
    const auto assume = assumptions(cut_.first_stratum);
    ++sat_calls_;
    if (!solver_.solve(assume)) throw std::logic_error("MAP cut inconsistent with evidence");
    const int n = cnf_.num_vars();
    std::vector<char> candidate(static_cast<std::size_t>(n) + 1, 0);
    for (int v = 1; v <= n; ++v) candidate[static_cast<std::size_t>(v)] = solver_.model_value(v);
    std::set<GroundAtom> out(positive_evidence_.begin(), positive_evidence_.end());
    for (int v = 1; v <= n; ++v) {
        if (!candidate[static_cast<std::size_t>(v)]) continue;
        auto a = assume;
        a.push_back(-v);
        ++sat_calls_;
        if (solver_.solve(a)) {
            for (int u = v + 1; u <= n; ++u)
                if (!solver_.model_value(u)) candidate[static_cast<std::size_t>(u)] = 0;
        } else {
            out.insert(cnf_.atom(v));
        }
    }
    return {out.begin(), out.end()};
}

MapCut map_cutoff(const StratifiedTheory& theory, std::span<const GroundLiteral> evidence,
                  std::span<const ConstId> constants) {
    return MapEngine(theory, constants, evidence).cut();
}

bool map_entails(const StratifiedTheory& theory, std::span<const GroundLiteral> evidence,
                 std::span<const ConstId> constants, const GroundAtom& query) {
    return MapEngine(theory, constants, evidence).entails(query);
}

std::vector<GroundAtom> map_prediction(const StratifiedTheory& theory, std::span<const GroundLiteral> evidence,
                                       std::span<const ConstId> constants) {
    return MapEngine(theory, constants, evidence).prediction();
}

// ---------------------------------------------------------------------------

std::string format_weight(double w) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", w);
    std::string out = buf;
    if (out.find_first_of(".en") == std::string::npos) out += ".0";
    return out;
}

StratifiedTheory parse_theory(std::string_view text, Signature& sig, ConstantTable& consts) {
    StratifiedTheory theory;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto eol = text.find('\n');
        auto line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        auto sep = line.find("::");
        if (sep == std::string_view::npos) throw ParseError(line_no, "expected '<weight> :: <clause>'");
        std::string weight_text(line.substr(0, sep));
        char* end = nullptr;
        double w = std::strtod(weight_text.c_str(), &end);
        if (end == weight_text.c_str() || std::string_view(end).find_first_not_of(" \t") != std::string_view::npos)
            throw ParseError(line_no, "malformed weight '" + weight_text + "'");
        try {
            theory.add(parse_clause(line.substr(sep + 2), sig, consts), w);
        } catch (const SignatureError& e) {
            throw ParseError(line_no, e.what());
        } catch (const std::invalid_argument& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return theory;
}

StratifiedTheory read_theory_file(const std::filesystem::path& path, Signature& sig, ConstantTable& consts) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_theory(ss.str(), sig, consts);
}

std::string format_theory(const StratifiedTheory& theory, const Signature& sig, const ConstantTable* consts) {
    std::string out;
    for (const auto& wf : theory.formulas()) {
        out += format_weight(wf.weight);
        out += " :: ";
        out += to_string(wf.formula, sig, consts);
        out += '\n';
    }
    return out;
}

void write_theory_file(const std::filesystem::path& path, const StratifiedTheory& theory, const Signature& sig,
                       const ConstantTable* consts) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << format_theory(theory, sig, consts);
}

}  // namespace possrl
