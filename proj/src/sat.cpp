#include "possrl/sat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <numeric>
#include <stdexcept>

#include "possrl/errors.hpp"

namespace possrl {

int GroundCNF::var_of(const GroundAtom& atom) {
    auto [it, inserted] = index_.try_emplace(atom, 0);
    if (inserted) {
        atoms_.push_back(atom);
        it->second = static_cast<int>(atoms_.size());
    }
    return it->second;
}

std::optional<int> GroundCNF::find(const GroundAtom& atom) const {
    auto it = index_.find(atom);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void GroundCNF::add_clause(const GroundClause& clause) {
    std::vector<int> lits;
    lits.reserve(clause.size());
    for (const auto& l : clause) {
        int v = var_of(l.atom);
        lits.push_back(l.positive ? v : -v);
    }
    add_clause(std::move(lits));
}

void GroundCNF::add_clause(std::vector<int> lits) {
    std::sort(lits.begin(), lits.end());
    lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
    for (std::size_t i = 0; i + 1 < lits.size(); ++i)
        if (std::binary_search(lits.begin(), lits.end(), -lits[i])) return;  // tautology
    clauses_.push_back(std::move(lits));
}

void GroundCNF::add_groundings(const Clause& clause, std::span<const ConstId> constants) {
    for_each_grounding(clause, constants, [&](const Substitution& theta) {
        GroundClause g;
        g.reserve(clause.literals.size());
        for (const auto& l : clause.literals) g.push_back({ground_atom(l.atom, theta), l.positive});
        add_clause(g);
        return true;
    });
}

GroundCNF ground_to_cnf(std::span<const Clause> formulas, std::span<const ConstId> constants,
                        std::span<const GroundLiteral> evidence) {
    GroundCNF cnf;
    for (const auto& f : formulas) cnf.add_groundings(f, constants);
    for (const auto& e : evidence) cnf.add_clause(GroundClause{e});
    return cnf;
}

// ---------------------------------------------------------------------------

int SatSolver::new_var() {
    value_.push_back(-1);
    level_.push_back(0);
    reason_.push_back(kNoReason);
    activity_.push_back(0.0);
    phase_.push_back(0);
    seen_.push_back(0);
    watches_.emplace_back();
    watches_.emplace_back();
    return static_cast<int>(value_.size());
}

void SatSolver::reserve_vars(int n) {
    while (num_vars() < n) new_var();
}

signed char SatSolver::lit_value(int lit) const {
    auto v = value_[static_cast<std::size_t>(std::abs(lit) - 1)];
    if (v < 0) return -1;
    return static_cast<signed char>(lit > 0 ? v : 1 - v);
}

void SatSolver::enqueue(int lit, CRef reason) {
    auto v = static_cast<std::size_t>(std::abs(lit) - 1);
    value_[v] = lit > 0 ? 1 : 0;
    level_[v] = decision_level();
    reason_[v] = reason;
    trail_.push_back(lit);
}

SatSolver::CRef SatSolver::attach(std::vector<int> lits, bool) {
    auto ref = static_cast<CRef>(clauses_.size());
    watches_[static_cast<std::size_t>(index(-lits[0]))].push_back(ref);
    watches_[static_cast<std::size_t>(index(-lits[1]))].push_back(ref);
    clauses_.push_back(std::move(lits));
    return ref;
}

bool SatSolver::add_clause(std::span<const int> input) {
    if (!ok_) return false;
    cancel_until(0);
    std::vector<int> lits(input.begin(), input.end());
    for (int l : lits)
        if (l == 0 || std::abs(l) > num_vars()) throw std::out_of_range("SatSolver::add_clause: unknown variable");
    std::sort(lits.begin(), lits.end());
    lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
    std::vector<int> kept;
    for (int l : lits) {
        if (std::binary_search(lits.begin(), lits.end(), -l)) return true;
        auto val = lit_value(l);
        if (val == 1) return true;
        if (val == -1) kept.push_back(l);
    }
    if (kept.empty()) return ok_ = false;
    if (kept.size() == 1) {
        enqueue(kept[0], kNoReason);
        if (propagate() != kNoReason) ok_ = false;
        return ok_;
    }
    attach(std::move(kept), false);
    return true;
}

bool SatSolver::add_xor(std::span<const int> vars, bool parity) {
    if (vars.empty()) return parity ? (ok_ = false) : ok_;
    int acc = vars[0];
    for (std::size_t i = 1; i < vars.size(); ++i) {
        int y = vars[i];
        int z = new_var();  // z <-> acc xor y
        add_clause({-z, acc, y});
        add_clause({-z, -acc, -y});
        add_clause({z, -acc, y});
        add_clause({z, acc, -y});
        acc = z;
    }
    return add_clause({parity ? acc : -acc});
}

SatSolver::CRef SatSolver::propagate() {
    while (qhead_ < trail_.size()) {
        int p = trail_[qhead_++];
        auto& ws = watches_[static_cast<std::size_t>(index(p))];
        std::size_t i = 0, j = 0;
        while (i < ws.size()) {
            CRef cr = ws[i++];
            auto& c = clauses_[static_cast<std::size_t>(cr)];
            if (c[0] == -p) std::swap(c[0], c[1]);
            if (lit_value(c[0]) == 1) {
                ws[j++] = cr;
                continue;
            }
            bool moved = false;
            for (std::size_t k = 2; k < c.size(); ++k) {
                if (lit_value(c[k]) != 0) {
                    std::swap(c[1], c[k]);
                    watches_[static_cast<std::size_t>(index(-c[1]))].push_back(cr);
                    moved = true;
                    break;
                }
            }
            if (moved) continue;
            ws[j++] = cr;
            if (lit_value(c[0]) == 0) {
                while (i < ws.size()) ws[j++] = ws[i++];
                ws.resize(j);
                qhead_ = trail_.size();
                return cr;
            }
            enqueue(c[0], cr);
        }
        ws.resize(j);
    }
    return kNoReason;
}

void SatSolver::bump(int var) {
    auto v = static_cast<std::size_t>(var - 1);
    if ((activity_[v] += var_inc_) > 1e100) {
        for (auto& a : activity_) a *= 1e-100;
        var_inc_ *= 1e-100;
    }
}

void SatSolver::analyze(CRef conflict, std::vector<int>& learnt, int& backtrack_level) {
    learnt.assign(1, 0);
    int path = 0;
    int p = 0;
    std::size_t idx = trail_.size();
    CRef cr = conflict;
    do {
        const auto& c = clauses_[static_cast<std::size_t>(cr)];
        for (std::size_t k = (p == 0 ? 0 : 1); k < c.size(); ++k) {
            int q = c[k];
            auto v = static_cast<std::size_t>(std::abs(q) - 1);
            if (seen_[v] || level_[v] == 0) continue;
            seen_[v] = 1;
            bump(std::abs(q));
            if (level_[v] >= decision_level())
                ++path;
            else
                learnt.push_back(q);
        }
        while (!seen_[static_cast<std::size_t>(std::abs(trail_[--idx]) - 1)]) {}
        p = trail_[idx];
        cr = reason_[static_cast<std::size_t>(std::abs(p) - 1)];
        seen_[static_cast<std::size_t>(std::abs(p) - 1)] = 0;
        --path;
        if (path > 0 && cr != kNoReason) {
            // reason clauses keep the implied literal first
            auto& rc = clauses_[static_cast<std::size_t>(cr)];
            if (rc[0] != p) {
                auto it = std::find(rc.begin(), rc.end(), p);
                std::swap(*it, rc[0]);
            }
        }
    } while (path > 0);
    learnt[0] = -p;
    for (std::size_t k = 1; k < learnt.size(); ++k) seen_[static_cast<std::size_t>(std::abs(learnt[k]) - 1)] = 0;

    backtrack_level = 0;
    if (learnt.size() > 1) {
        std::size_t best = 1;
        for (std::size_t k = 2; k < learnt.size(); ++k)
            if (level_[static_cast<std::size_t>(std::abs(learnt[k]) - 1)] >
                level_[static_cast<std::size_t>(std::abs(learnt[best]) - 1)])
                best = k;
        std::swap(learnt[1], learnt[best]);
        backtrack_level = level_[static_cast<std::size_t>(std::abs(learnt[1]) - 1)];
    }
    var_inc_ /= 0.95;
}

void SatSolver::cancel_until(int level) {
    if (decision_level() <= level) return;
    for (auto i = trail_.size(); i > static_cast<std::size_t>(trail_lim_[static_cast<std::size_t>(level)]); --i) {
        int lit = trail_[i - 1];
        auto v = static_cast<std::size_t>(std::abs(lit) - 1);
        phase_[v] = static_cast<char>(value_[v]);
        value_[v] = -1;
        reason_[v] = kNoReason;
    }
    trail_.resize(static_cast<std::size_t>(trail_lim_[static_cast<std::size_t>(level)]));
    trail_lim_.resize(static_cast<std::size_t>(level));
    qhead_ = trail_.size();
}

int SatSolver::pick_branch() {
    int best = 0;
    double best_act = -1.0;
    for (std::size_t v = 0; v < value_.size(); ++v) {
        if (value_[v] >= 0) continue;
        if (activity_[v] > best_act) {
            best_act = activity_[v];
            best = static_cast<int>(v) + 1;
        }
    }
    if (best == 0) return 0;
    return phase_[static_cast<std::size_t>(best - 1)] ? best : -best;
}

bool SatSolver::solve(std::span<const int> assumptions) {
    ++solve_calls_;
    model_.clear();
    if (!ok_) return false;
    cancel_until(0);
    if (propagate() != kNoReason) return ok_ = false;
    for (int a : assumptions)
        if (a == 0 || std::abs(a) > num_vars()) throw std::out_of_range("SatSolver::solve: unknown assumption variable");

    std::uint64_t restart_at = 100;
    std::uint64_t since_restart = 0;
    std::vector<int> learnt;
    for (;;) {
        CRef conflict = propagate();
        if (conflict != kNoReason) {
            ++conflicts_;
            ++since_restart;
            if (decision_level() == 0) {
                ok_ = false;
                return false;
            }
            int bt = 0;
            analyze(conflict, learnt, bt);
            cancel_until(bt);
            if (learnt.size() == 1) {
                enqueue(learnt[0], kNoReason);
            } else {
                auto cr = attach(learnt, true);
                enqueue(learnt[0], cr);
            }
            continue;
        }
        if (since_restart >= restart_at) {
            since_restart = 0;
            restart_at = restart_at + restart_at / 2;
            cancel_until(0);
            continue;
        }
        int next = 0;
        while (decision_level() < static_cast<int>(assumptions.size())) {
            int a = assumptions[static_cast<std::size_t>(decision_level())];
            auto val = lit_value(a);
            if (val == 1) {
                trail_lim_.push_back(static_cast<int>(trail_.size()));  // dummy level
            } else if (val == 0) {
                cancel_until(0);
                return false;
            } else {
                next = a;
                break;
            }
        }
        if (next == 0) {
            next = pick_branch();
            if (next == 0) {
                model_.resize(value_.size());
                for (std::size_t v = 0; v < value_.size(); ++v) model_[v] = static_cast<char>(value_[v] == 1);
                cancel_until(0);
                return true;
            }
            ++decisions_;
        }
        trail_lim_.push_back(static_cast<int>(trail_.size()));
        enqueue(next, kNoReason);
    }
}

// ---------------------------------------------------------------------------

void load(SatSolver& solver, const GroundCNF& cnf) {
    solver.reserve_vars(cnf.num_vars());
    for (const auto& c : cnf.clauses()) solver.add_clause(c);
}

SatVerdict solve(const GroundCNF& cnf) {
    SatSolver solver;
    load(solver, cnf);
    SatVerdict verdict;
    verdict.satisfiable = solver.solve();
    if (!verdict.satisfiable) return verdict;
    for (const auto& c : cnf.clauses()) {
        bool sat = std::any_of(c.begin(), c.end(), [&](int l) { return solver.model_value(std::abs(l)) == (l > 0); });
        if (!sat) throw std::logic_error("solver returned a model violating a clause");
    }
    std::vector<GroundAtom> witness;
    for (int v = 1; v <= cnf.num_vars(); ++v)
        if (solver.model_value(v)) witness.push_back(cnf.atom(v));
    std::sort(witness.begin(), witness.end());
    verdict.witness = std::move(witness);
    return verdict;
}

bool entails(std::span<const Clause> formulas, std::span<const ConstId> constants, const Clause& query) {
    GroundCNF cnf;
    for (const auto& f : formulas) cnf.add_groundings(f, constants);
    std::vector<std::vector<int>> negations;
    for_each_grounding(query, constants, [&](const Substitution& theta) {
        std::vector<int> assume;
        for (const auto& l : query.literals) {
            int v = cnf.var_of(ground_atom(l.atom, theta));
            assume.push_back(l.positive ? -v : v);
        }
        negations.push_back(std::move(assume));
        return true;
    });
    SatSolver solver;
    load(solver, cnf);
    for (const auto& assume : negations)
        if (solver.solve(assume)) return false;
    return true;
}

namespace {

struct Counter {
    const std::vector<std::vector<int>>& clauses;
    int n;
    std::vector<signed char> value;  // per var

    signed char lit_value(int l) const {
        auto v = value[static_cast<std::size_t>(std::abs(l))];
        if (v < 0) return -1;
        return static_cast<signed char>(l > 0 ? v : 1 - v);
    }

    std::uint64_t run() {
        // unit propagation to fixpoint
        std::vector<int> assigned;
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& c : clauses) {
                int open = 0, last = 0;
                bool sat = false;
                for (int l : c) {
                    auto lv = lit_value(l);
                    if (lv == 1) {
                        sat = true;
                        break;
                    }
                    if (lv == -1) {
                        ++open;
                        last = l;
                    }
                }
                if (sat) continue;
                if (open == 0) {
                    for (int v : assigned) value[static_cast<std::size_t>(v)] = -1;
                    return 0;
                }
                if (open == 1) {
                    value[static_cast<std::size_t>(std::abs(last))] = last > 0 ? 1 : 0;
                    assigned.push_back(std::abs(last));
                    changed = true;
                }
            }
        }
        // pick a variable from an unsatisfied clause
        int branch = 0;
        for (const auto& c : clauses) {
            bool sat = false;
            int cand = 0;
            for (int l : c) {
                auto lv = lit_value(l);
                if (lv == 1) {
                    sat = true;
                    break;
                }
                if (lv == -1 && cand == 0) cand = std::abs(l);
            }
            if (!sat) {
                branch = cand;
                break;
            }
        }
        std::uint64_t total = 0;
        if (branch == 0) {
            int free = 0;
            for (int v = 1; v <= n; ++v)
                if (value[static_cast<std::size_t>(v)] < 0) ++free;
            total = std::uint64_t{1} << free;
        } else {
            for (signed char b : {0, 1}) {
                value[static_cast<std::size_t>(branch)] = b;
                total += run();
            }
            value[static_cast<std::size_t>(branch)] = -1;
        }
        for (int v : assigned) value[static_cast<std::size_t>(v)] = -1;
        return total;
    }
};

}  // namespace

std::uint64_t count_models(const std::vector<std::vector<int>>& clauses, int num_vars) {
    if (num_vars > 62) throw std::out_of_range("count_models: too many variables for exact counting");
    Counter counter{clauses, num_vars, std::vector<signed char>(static_cast<std::size_t>(num_vars) + 1, -1)};
    for (const auto& c : clauses)
        for (int l : c)
            if (std::abs(l) > num_vars) throw std::out_of_range("count_models: literal outside the variable range");
    return counter.run();
}

ComponentCounter::ComponentCounter(const std::vector<std::vector<int>>& clauses, int num_vars,
                                   std::uint64_t node_limit)
    : num_vars_(num_vars), node_limit_(node_limit) {
    for (auto c : clauses) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
        bool taut = false;
        for (int l : c) {
            if (std::abs(l) > num_vars) throw std::out_of_range("ComponentCounter: literal outside the variable range");
            taut = taut || std::binary_search(c.begin(), c.end(), -l);
        }
        if (c.empty()) unsat_ = true;
        if (!taut) clauses_.push_back(std::move(c));
    }
}

std::size_t ComponentCounter::KeyHash::operator()(const std::vector<int>& key) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (int x : key) {
        h ^= static_cast<std::size_t>(static_cast<unsigned>(x));
        h *= 1099511628211ULL;
    }
    return h;
}

long double ComponentCounter::count(std::span<const int> fixed) {
    if (unsat_) return 0;
    auto clauses = clauses_;
    for (int l : fixed) {
        if (l == 0 || std::abs(l) > num_vars_) throw std::out_of_range("ComponentCounter: bad fixed literal");
        clauses.push_back({l});
    }
    return solve(std::move(clauses), num_vars_);
}

// `scope` is the number of variables the clauses range over (including ones
// that no longer occur); free variables contribute a factor of two each.
long double ComponentCounter::solve(std::vector<std::vector<int>> clauses, int scope) {
    std::unordered_map<int, bool> assigned;
    while (true) {
        int unit = 0;
        for (const auto& c : clauses)
            if (c.size() == 1) {
                unit = c[0];
                break;
            }
        if (unit == 0) break;
        assigned[std::abs(unit)] = unit > 0;
        std::vector<std::vector<int>> next;
        next.reserve(clauses.size());
        for (auto& c : clauses) {
            bool sat = false;
            std::vector<int> kept;
            for (int l : c) {
                if (l == unit) {
                    sat = true;
                    break;
                }
                if (l != -unit) kept.push_back(l);
            }
            if (sat) continue;
            if (kept.empty()) return 0;
            next.push_back(std::move(kept));
        }
        clauses = std::move(next);
    }

    // components by union-find over occurring variables
    std::unordered_map<int, int> index;
    std::vector<int> vars;
    for (const auto& c : clauses)
        for (int l : c)
            if (index.emplace(std::abs(l), static_cast<int>(vars.size())).second) vars.push_back(std::abs(l));
    const int free = scope - static_cast<int>(assigned.size()) - static_cast<int>(vars.size());
    long double result = std::ldexp(1.0L, free);
    if (clauses.empty()) return result;

    std::vector<int> parent(vars.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        return x;
    };
    for (const auto& c : clauses)
        for (std::size_t i = 1; i < c.size(); ++i) {
            int a = find(index[std::abs(c[0])]), b = find(index[std::abs(c[i])]);
            if (a != b) parent[static_cast<std::size_t>(a)] = b;
        }
    std::unordered_map<int, std::vector<std::vector<int>>> groups;
    for (auto& c : clauses) groups[find(index[std::abs(c[0])])].push_back(std::move(c));

    std::vector<int> roots;
    for (const auto& [root, _] : groups) roots.push_back(root);
    std::sort(roots.begin(), roots.end());
    for (int root : roots) {
        auto& comp = groups[root];
        std::sort(comp.begin(), comp.end());
        std::vector<int> key;
        for (const auto& c : comp) {
            key.insert(key.end(), c.begin(), c.end());
            key.push_back(0);
        }
        long double value;
        if (auto it = cache_.find(key); it != cache_.end()) {
            value = it->second;
        } else {
            if (node_limit_ && ++nodes_ > node_limit_) throw BudgetError("model counting: node budget exhausted");
            if (!node_limit_) ++nodes_;
            std::unordered_map<int, int> occ;
            int comp_vars = 0;
            for (const auto& c : comp)
                for (int l : c)
                    if (occ[std::abs(l)]++ == 0) ++comp_vars;
            int branch = 0, best = -1;
            for (const auto& [v, n] : occ)
                if (n > best || (n == best && v < branch)) {
                    best = n;
                    branch = v;
                }
            value = 0;
            for (int lit : {branch, -branch}) {
                auto sub = comp;
                sub.push_back({lit});
                value += solve(std::move(sub), comp_vars);
            }
            if (cache_.size() > 4'000'000) cache_.clear();
            cache_.emplace(std::move(key), value);
        }
        if (value == 0) return 0;
        result *= value;
    }
    return result;
}

void write_dimacs(const GroundCNF& cnf, std::ostream& out) {
    out << "p cnf " << cnf.num_vars() << ' ' << cnf.clauses().size() << '\n';
    for (const auto& c : cnf.clauses()) {
        for (int l : c) out << l << ' ';
        out << "0\n";
    }
}

void write_atom_table(const GroundCNF& cnf, std::ostream& out, const Signature& sig, const ConstantTable& consts) {
    for (int v = 1; v <= cnf.num_vars(); ++v) out << v << ' ' << to_string(cnf.atom(v), sig, consts) << '\n';
}

}  // namespace possrl
