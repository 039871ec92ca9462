#include "possrl/structure_learning.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "possrl/errors.hpp"
#include "possrl/query_engine.hpp"
#include "possrl/sat.hpp"

namespace possrl {

void HardRuleConfig::validate() const {
    if (t < 1 || t_prime <= t || k < 1)
        throw DomainError("hard rule config needs t >= 1, t_prime > t, k >= 1");
}

void BeamConfig::validate() const {
    if (b < 1 || l < 1 || k < 1 || restarts < 1) throw DomainError("beam config values must be positive");
}

namespace {

int var_count(const std::vector<Literal>& lits) {
    int n = 0;
    for (const auto& l : lits)
        for (const auto& t : l.atom.args)
            if (t.is_var()) n = std::max(n, t.id + 1);
    return n;
}

/// Argument tuples of the given arity over variables 0..used-1 plus fresh ones
/// introduced in order, with at most max_vars variables in total.
void for_each_args(int arity, int used, int max_vars, const std::function<void(const std::vector<Term>&)>& visit) {
    std::vector<Term> args(static_cast<std::size_t>(arity));
    std::function<void(int, int)> rec = [&](int pos, int vars) {
        if (pos == arity) {
            visit(args);
            return;
        }
        const int limit = std::min(vars + 1, max_vars);
        for (int v = 0; v < limit; ++v) {
            args[static_cast<std::size_t>(pos)] = Term::var(v);
            rec(pos + 1, std::max(vars, v + 1));
        }
    };
    rec(0, used);
}

bool unary_only(const Clause& c) {
    return std::all_of(c.literals.begin(), c.literals.end(), [](const Literal& l) { return l.atom.args.size() <= 1; });
}

/// Isomorphism-class registry keyed by WL hash.
template <class T>
class IsoSet {
public:
    /// False when an isomorphic item is already present.
    bool insert(const T& item) {
        auto& bucket = buckets_[wl_hash(item)];
        for (const auto& other : bucket)
            if (isomorphic(other, item)) return false;
        bucket.push_back(item);
        return true;
    }

private:
    std::unordered_map<std::uint64_t, std::vector<T>> buckets_;
};

}  // namespace

std::vector<Clause> learn_hard_rules(const GlobalExample& data, const HardRuleConfig& cfg, HardRuleStats* stats) {
    cfg.validate();
    const auto& sig = data.signature();
    HardRuleStats local;
    std::vector<Clause> retained;
    std::vector<Clause> open{Clause{}};
    const int max_len = cfg.t_prime;
    bool capped = false;

    for (int len = 1; len <= max_len && !open.empty() && !capped; ++len) {
        IsoSet<Clause> seen;
        std::vector<Clause> next;
        for (const auto& base : open) {
            if (capped) break;
            const int used = var_count(base.literals);
            const bool base_unary = unary_only(base);
            if (len > cfg.t && !base_unary) continue;
            for (PredId p = 0; p < static_cast<PredId>(sig.size()) && !capped; ++p) {
                const int arity = sig[p].arity;
                if (len > cfg.t && arity > 1) continue;
                for (bool positive : {true, false}) {
                    for_each_args(arity, used, cfg.k, [&](const std::vector<Term>& args) {
                        if (capped) return;
                        auto lits = base.literals;
                        lits.push_back({Atom{p, args}, positive});
                        Clause c(std::move(lits), true);
                        if (static_cast<int>(c.literals.size()) != len) return;
                        if (!seen.insert(c)) return;
                        ++local.generated;
                        if (cfg.max_candidates && local.generated >= cfg.max_candidates) capped = true;
                        if (c.is_tautology()) return;
                        for (const auto& r : retained)
                            if (theta_subsumes(r, c)) return;
                        if (!satisfiable(negation_query(c), data)) {
                            ++local.valid;
                            retained.push_back(c);
                        } else {
                            next.push_back(std::move(c));
                        }
                    });
                }
            }
        }
        open = std::move(next);
    }
    local.retained = retained.size();
    if (stats) *stats = local;
    return retained;
}

// ---------------------------------------------------------------------------

namespace {

/// A fixed true, every other atom free, hard-rule groundings added on demand.
class LazyHardRuleModel {
public:
    LazyHardRuleModel(const GlobalExample& data, std::span<const Clause> hard_rules)
        : data_(data), rules_(hard_rules.begin(), hard_rules.end()) {
        for (const auto& a : data.atoms()) {
            int v = cnf_.var_of(a);
            solver_.reserve_vars(cnf_.num_vars());
            solver_.add_clause({v});
        }
        for (const auto& r : rules_)
            if (r.is_bottom()) solver_.add_clause(std::span<const int>{});
    }

    bool consistent_with(const GroundAtom& extra) {
        const int v = cnf_.var_of(extra);
        solver_.reserve_vars(cnf_.num_vars());
        const int assume[] = {v};
        while (true) {
            if (!solver_.solve(assume)) return false;
            std::vector<GroundAtom> world;
            for (int u = 1; u <= cnf_.num_vars(); ++u)
                if (solver_.model_value(u)) world.push_back(cnf_.atom(u));
            GlobalExample model(data_.signature(), data_.constants(), std::move(world));
            std::size_t added = 0;
            for (const auto& rule : rules_) {
                if (rule.is_bottom()) continue;
                auto q = negation_query(rule);
                CspSolver csp(model, q);
                csp.enumerate([&](std::span<const ConstId> values) {
                    Substitution theta;
                    for (auto c : values) theta.push_back(Term::constant(c));
                    std::vector<int> lits;
                    for (const auto& l : rule.literals) {
                        int var = cnf_.var_of(ground_atom(l.atom, theta));
                        lits.push_back(l.positive ? var : -var);
                    }
                    solver_.reserve_vars(cnf_.num_vars());
                    solver_.add_clause(lits);
                    ++added;
                    return true;
                });
            }
            if (added == 0) return true;
        }
    }

private:
    const GlobalExample& data_;
    std::vector<Clause> rules_;
    GroundCNF cnf_;
    SatSolver solver_;
};

}  // namespace

bool consistent_with(const GlobalExample& data, std::span<const Clause> hard_rules, const GroundAtom& extra) {
    LazyHardRuleModel model(data, hard_rules);
    return model.consistent_with(extra);
}

LabeledExampleSet build_examples(const GlobalExample& data, std::span<const Clause> hard_rules, PredId pred,
                                 const ExampleConfig& cfg, Rng& rng) {
    if (pred < 0 || static_cast<std::size_t>(pred) >= data.signature().size())
        throw DomainError("predicate id " + std::to_string(pred) + " outside the signature");
    LabeledExampleSet out;
    out.predicate = pred;
    out.positives = data.atoms_of(pred);
    if (cfg.positive_budget && out.positives.size() > cfg.positive_budget) {
        std::shuffle(out.positives.begin(), out.positives.end(), rng);
        out.positives.resize(cfg.positive_budget);
        std::sort(out.positives.begin(), out.positives.end());
    }

    const int arity = data.signature()[pred].arity;
    const auto n = data.num_constants();
    double total = 1;
    for (int i = 0; i < arity; ++i) total *= static_cast<double>(n);
    const double n_false = total - static_cast<double>(data.atoms_of(pred).size());
    const std::size_t max_attempts = cfg.max_attempts ? cfg.max_attempts : 20 * cfg.negative_budget;

    auto decode = [&](std::uint64_t code) {
        GroundAtom a{pred, std::vector<ConstId>(static_cast<std::size_t>(arity))};
        for (int i = arity - 1; i >= 0; --i) {
            a.args[static_cast<std::size_t>(i)] = static_cast<ConstId>(code % n);
            code /= n;
        }
        return a;
    };

    // uniform order over false atoms without replacement: a full shuffle when the
    // atom space is small, rejection sampling otherwise
    std::vector<GroundAtom> pool;
    std::unordered_set<std::uint64_t> tried;
    const bool enumerate_all = total <= 4e6;
    if (enumerate_all && n > 0) {
        for (std::uint64_t code = 0; code < static_cast<std::uint64_t>(total); ++code) {
            auto a = decode(code);
            if (!data.contains(a)) pool.push_back(std::move(a));
        }
        std::shuffle(pool.begin(), pool.end(), rng);
    }
    std::uniform_int_distribution<std::uint64_t> pick(0, total > 0 ? static_cast<std::uint64_t>(total) - 1 : 0);
    auto next_candidate = [&](std::size_t i) -> std::optional<GroundAtom> {
        if (enumerate_all) return i < pool.size() ? std::optional(pool[i]) : std::nullopt;
        for (int guard = 0; guard < 1000; ++guard) {
            auto code = pick(rng);
            if (!tried.insert(code).second) continue;
            auto a = decode(code);
            if (!data.contains(a)) return a;
        }
        return std::nullopt;
    };

    LazyHardRuleModel model(data, hard_rules);
    for (std::size_t i = 0; out.negatives.size() < cfg.negative_budget && out.attempted < max_attempts; ++i) {
        auto cand = next_candidate(i);
        if (!cand) break;
        ++out.attempted;
        if (model.consistent_with(*cand))
            out.negatives.push_back(std::move(*cand));
        else
            ++out.rejected;
    }
    std::sort(out.negatives.begin(), out.negatives.end());
    if (out.attempted > 0)
        out.nontrivial_estimate =
            static_cast<double>(out.negatives.size()) / static_cast<double>(out.attempted) * n_false;
    if (!out.negatives.empty()) out.negative_weight = out.nontrivial_estimate / static_cast<double>(out.negatives.size());
    return out;
}

// ---------------------------------------------------------------------------

bool covers(const GlobalExample& data, const HornRule& rule, const GroundAtom& example) {
    if (example.pred != rule.head.pred || example.args.size() != rule.head.args.size()) return false;
    ConjunctiveQuery q = conjunction_query(rule.body, rule.all_diff);
    for (const auto& v : rule.variables()) q.num_vars = std::max(q.num_vars, v + 1);
    std::vector<ConstId> bound(static_cast<std::size_t>(q.num_vars), -1);
    for (std::size_t i = 0; i < example.args.size(); ++i) {
        const auto& t = rule.head.args[i];
        const auto c = example.args[i];
        if (!t.is_var()) {
            if (t.id != c) return false;
            continue;
        }
        auto& b = bound[static_cast<std::size_t>(t.id)];
        if (b >= 0 && b != c) return false;
        b = c;
        q.ins.push_back({t.id, {c}});
    }
    if (rule.all_diff) {
        std::vector<ConstId> used;
        for (auto b : bound)
            if (b >= 0) used.push_back(b);
        std::sort(used.begin(), used.end());
        if (std::adjacent_find(used.begin(), used.end()) != used.end()) return false;
        // variables beyond the constant count cannot be assigned injectively
        if (static_cast<std::size_t>(q.num_vars) > data.num_constants()) return false;
    }
    return satisfiable(q, data);
}

double weighted_accuracy(std::size_t covered_pos, std::size_t n_pos, std::size_t covered_neg, std::size_t n_neg,
                         double w_neg) {
    const double denom = static_cast<double>(n_pos) + static_cast<double>(n_neg) * w_neg;
    if (denom <= 0) return 0;
    return (static_cast<double>(covered_pos) + static_cast<double>(n_neg - covered_neg) * w_neg) / denom;
}

namespace {

struct Candidate {
    HornRule rule;
    Clause canonical;
    std::vector<std::uint32_t> pos;  // indices of covered positives
    std::vector<std::uint32_t> neg;
    double accuracy = 0;
    int num_vars = 0;
};

bool better(const Candidate& a, const Candidate& b) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    if (a.rule.body.size() != b.rule.body.size()) return a.rule.body.size() < b.rule.body.size();
    if (a.num_vars != b.num_vars) return a.num_vars < b.num_vars;
    return a.canonical < b.canonical;
}

int rule_vars(const HornRule& r) {
    int n = 0;
    for (auto v : r.variables()) n = std::max(n, v + 1);
    return n;
}

}  // namespace

std::vector<ScoredRule> beam_search(const GlobalExample& data, const LabeledExampleSet& examples,
                                    const BeamConfig& cfg) {
    cfg.validate();
    std::vector<ScoredRule> found;
    if (examples.degenerate()) return found;
    const auto& sig = data.signature();
    const PredId target = examples.predicate;
    const int arity = sig[target].arity;
    if (arity > cfg.k) return found;

    const auto& P = examples.positives;
    const auto& N = examples.negatives;
    const double w = examples.negative_weight;

    auto evaluate = [&](Candidate& c, const Candidate& parent) {
        for (auto i : parent.pos)
            if (covers(data, c.rule, P[i])) c.pos.push_back(i);
        for (auto i : parent.neg)
            if (covers(data, c.rule, N[i])) c.neg.push_back(i);
        c.accuracy = weighted_accuracy(c.pos.size(), P.size(), c.neg.size(), N.size(), w);
    };

    Candidate root;
    root.rule.head.pred = target;
    for (int i = 0; i < arity; ++i) root.rule.head.args.push_back(Term::var(i));
    root.rule.all_diff = true;
    root.canonical = canonical_form(root.rule.to_clause());
    root.num_vars = arity;
    for (std::uint32_t i = 0; i < P.size(); ++i)
        if (covers(data, root.rule, P[i])) root.pos.push_back(i);
    for (std::uint32_t i = 0; i < N.size(); ++i)
        if (covers(data, root.rule, N[i])) root.neg.push_back(i);
    root.accuracy = weighted_accuracy(root.pos.size(), P.size(), root.neg.size(), N.size(), w);

    std::vector<HornRule> forbidden;
    auto forbid = [&](const HornRule& r) {
        for (const auto& f : forbidden)
            if (theta_subsumes(f, r)) return;
        std::erase_if(forbidden, [&](const HornRule& f) { return theta_subsumes(r, f); });
        forbidden.push_back(r);
    };

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        std::vector<Candidate> beam{root};
        std::optional<Candidate> best;
        while (!beam.empty()) {
            IsoSet<HornRule> seen;
            std::vector<Candidate> next;
            for (const auto& parent : beam) {
                if (static_cast<int>(parent.rule.body.size()) >= cfg.l) continue;
                const int used = rule_vars(parent.rule);
                for (PredId p = 0; p < static_cast<PredId>(sig.size()); ++p) {
                    for_each_args(sig[p].arity, used, cfg.k, [&](const std::vector<Term>& args) {
                        Atom atom{p, args};
                        if (atom == parent.rule.head) return;
                        if (std::find(parent.rule.body.begin(), parent.rule.body.end(), atom) != parent.rule.body.end())
                            return;
                        Candidate c;
                        c.rule = parent.rule;
                        c.rule.body.push_back(std::move(atom));
                        if (!seen.insert(c.rule)) return;
                        for (const auto& f : forbidden)
                            if (theta_subsumes(f, c.rule)) return;
                        for (const auto& r : found)
                            if (theta_subsumes(r.rule, c.rule)) return;
                        evaluate(c, parent);
                        if (c.pos.empty()) {
                            forbid(c.rule);
                            return;
                        }
                        c.canonical = canonical_form(c.rule.to_clause());
                        c.num_vars = rule_vars(c.rule);
                        next.push_back(std::move(c));
                    });
                }
            }
            std::sort(next.begin(), next.end(), better);
            if (next.size() > static_cast<std::size_t>(cfg.b)) next.resize(static_cast<std::size_t>(cfg.b));
            if (!next.empty() && (!best || better(next.front(), *best))) best = next.front();
            beam = std::move(next);
        }
        if (!best) break;
        found.push_back({best->rule, best->accuracy, best->pos.size(), best->neg.size(), restart});
    }
    return found;
}

// ---------------------------------------------------------------------------

HornRule horn_from_clause(const Clause& clause) {
    HornRule r;
    r.all_diff = clause.all_diff;
    int heads = 0;
    for (const auto& l : clause.literals) {
        if (l.positive) {
            r.head = l.atom;
            ++heads;
        } else {
            r.body.push_back(l.atom);
        }
    }
    if (heads != 1) throw std::invalid_argument("not a Horn rule with one head: expected exactly one positive literal");
    return r;
}

std::string format_candidates(std::span<const ScoredRule> rules, const Signature& sig) {
    std::string out;
    char buf[160];
    for (const auto& r : rules) {
        std::snprintf(buf, sizeof buf, "# restart=%d accuracy=%.17g covered_pos=%zu covered_neg=%zu\n", r.restart,
                      r.accuracy, r.covered_positives, r.covered_negatives);
        out += buf;
        out += "cand :: ";
        out += to_string(r.rule.to_clause(), sig);
        out += '\n';
    }
    return out;
}

void write_candidates_file(const std::filesystem::path& path, std::span<const ScoredRule> rules,
                           const Signature& sig) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << format_candidates(rules, sig);
}

std::vector<HornRule> parse_candidates(std::string_view text, Signature& sig) {
    std::vector<HornRule> out;
    ConstantTable consts;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto sep = line.find("::");
        if (sep == std::string::npos || line.substr(0, sep).find("cand") == std::string::npos)
            throw ParseError(line_no, "expected 'cand :: <clause>'");
        try {
            auto clause = parse_clause(std::string_view(line).substr(sep + 2), sig, consts);
            if (consts.size() > 0) throw std::invalid_argument("candidate rules must be constant-free");
            out.push_back(horn_from_clause(clause));
        } catch (const SignatureError& e) {
            throw ParseError(line_no, e.what());
        } catch (const std::invalid_argument& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return out;
}

std::vector<HornRule> read_candidates_file(const std::filesystem::path& path, Signature& sig) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_candidates(ss.str(), sig);
}

}  // namespace possrl
