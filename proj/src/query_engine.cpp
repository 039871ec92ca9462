#include "possrl/query_engine.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "possrl/errors.hpp"

namespace possrl {

bool ConjunctiveQuery::mentions(VarId v) const {
    for (const auto& lit : literals)
        for (const auto& t : lit.atom.args)
            if (t.is_var() && t.id == v) return true;
    for (const auto& card : cards)
        if (std::find(card.vars.begin(), card.vars.end(), v) != card.vars.end()) return true;
    return false;
}

namespace {

int var_bound(const std::vector<Atom>& atoms) {
    int n = 0;
    for (const auto& a : atoms)
        for (const auto& t : a.args)
            if (t.is_var()) n = std::max(n, t.id + 1);
    return n;
}

}  // namespace

ConjunctiveQuery negation_query(const Clause& clause) {
    ConjunctiveQuery q;
    std::vector<Atom> atoms;
    for (const auto& lit : clause.literals) {
        q.literals.push_back({lit.atom, !lit.positive});
        atoms.push_back(lit.atom);
    }
    q.num_vars = var_bound(atoms);
    q.all_diff = clause.all_diff;
    return q;
}

ConjunctiveQuery conjunction_query(std::span<const Atom> atoms, bool all_diff) {
    ConjunctiveQuery q;
    std::vector<Atom> copy(atoms.begin(), atoms.end());
    q.num_vars = var_bound(copy);
    for (auto& a : copy) q.literals.push_back({std::move(a), true});
    q.all_diff = all_diff;
    return q;
}

// ---------------------------------------------------------------------------

Gf2System::Gf2System(std::size_t num_vars) : n_(num_vars), words_((num_vars + 63) / 64) {}

void Gf2System::add_row(std::span<const std::size_t> vars, bool rhs) {
    std::vector<std::uint64_t> row(words_, 0);
    for (auto v : vars) {
        if (v >= n_) throw DomainError("xor row mentions indicator outside the system");
        row[v / 64] ^= std::uint64_t{1} << (v % 64);
    }
    rows_.push_back(std::move(row));
    rhs_.push_back(rhs ? 1 : 0);
}

bool Gf2System::propagate(std::span<const signed char> known, std::vector<std::pair<std::size_t, bool>>& forced) const {
    forced.clear();
    std::vector<std::uint64_t> known_mask(words_, 0), ones(words_, 0);
    for (std::size_t v = 0; v < n_ && v < known.size(); ++v) {
        if (known[v] < 0) continue;
        known_mask[v / 64] |= std::uint64_t{1} << (v % 64);
        if (known[v] > 0) ones[v / 64] |= std::uint64_t{1} << (v % 64);
    }
    auto rows = rows_;
    auto rhs = rhs_;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        int parity = 0;
        for (std::size_t w = 0; w < words_; ++w) {
            parity ^= std::popcount(rows[r][w] & ones[w]) & 1;
            rows[r][w] &= ~known_mask[w];
        }
        rhs[r] = static_cast<char>(rhs[r] ^ parity);
    }
    // Reduced row echelon form.
    std::size_t pivot_row = 0;
    std::vector<std::size_t> pivot_cols;
    for (std::size_t col = 0; col < n_ && pivot_row < rows.size(); ++col) {
        const auto w = col / 64;
        const auto bit = std::uint64_t{1} << (col % 64);
        std::size_t sel = pivot_row;
        while (sel < rows.size() && !(rows[sel][w] & bit)) ++sel;
        if (sel == rows.size()) continue;
        std::swap(rows[sel], rows[pivot_row]);
        std::swap(rhs[sel], rhs[pivot_row]);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r == pivot_row || !(rows[r][w] & bit)) continue;
            for (std::size_t x = 0; x < words_; ++x) rows[r][x] ^= rows[pivot_row][x];
            rhs[r] = static_cast<char>(rhs[r] ^ rhs[pivot_row]);
        }
        pivot_cols.push_back(col);
        ++pivot_row;
    }
    for (std::size_t r = pivot_row; r < rows.size(); ++r)
        if (rhs[r]) return false;
    for (std::size_t r = 0; r < pivot_row; ++r) {
        int count = 0;
        for (std::size_t x = 0; x < words_; ++x) count += std::popcount(rows[r][x]);
        if (count == 1) forced.emplace_back(pivot_cols[r], rhs[r] != 0);
    }
    return true;
}

bool Gf2System::satisfied_by(std::span<const char> values) const {
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        int parity = 0;
        for (std::size_t v = 0; v < n_; ++v)
            if ((rows_[r][v / 64] >> (v % 64)) & 1) parity ^= values[v] ? 1 : 0;
        if (parity != rhs_[r]) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

CspSolver::CspSolver(const GlobalExample& data, const ConjunctiveQuery& query, std::span<const XorConstraint> xors)
    : data_(data), query_(query), xors_(xors.begin(), xors.end()), gf2_(data.num_constants()) {
    const auto nv = static_cast<std::size_t>(std::max(query.num_vars, 0));
    lits_of_var_.assign(nv, {});
    cards_of_var_.assign(nv, {});
    for (std::size_t i = 0; i < query.literals.size(); ++i) {
        std::vector<VarId> seen;
        for (const auto& t : query.literals[i].atom.args) {
            if (!t.is_var()) continue;
            if (t.id < 0 || static_cast<std::size_t>(t.id) >= nv) throw DomainError("query variable out of range");
            if (std::find(seen.begin(), seen.end(), t.id) == seen.end()) {
                seen.push_back(t.id);
                lits_of_var_[static_cast<std::size_t>(t.id)].push_back(i);
            }
        }
    }
    for (std::size_t i = 0; i < query.cards.size(); ++i) {
        std::vector<VarId> vars = query.cards[i].vars;
        std::sort(vars.begin(), vars.end());
        vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
        for (auto v : vars) {
            if (v < 0 || static_cast<std::size_t>(v) >= nv) throw DomainError("card variable out of range");
            cards_of_var_[static_cast<std::size_t>(v)].push_back(i);
        }
    }
    for (const auto& x : xors_) {
        std::vector<std::size_t> cols;
        for (auto c : x.indicators) cols.push_back(static_cast<std::size_t>(c));
        gf2_.add_row(cols, x.parity);
    }
    root_.assign(nv, data.constant_ids());
    root_ok_ = root_propagate(root_);
}

void CspSolver::restrict(VarId v, std::span<const ConstId> allowed) {
    std::vector<ConstId> sorted(allowed.begin(), allowed.end());
    std::sort(sorted.begin(), sorted.end());
    auto& dom = root_.at(static_cast<std::size_t>(v));
    std::vector<ConstId> kept;
    std::set_intersection(dom.begin(), dom.end(), sorted.begin(), sorted.end(), std::back_inserter(kept));
    dom = std::move(kept);
    if (dom.empty()) root_ok_ = false;
    if (root_ok_ && !xors_.empty()) root_ok_ = propagate_xor(root_, std::vector<ConstId>(root_.size(), -1));
}

bool CspSolver::literal_true(const QueryLiteral& lit, const std::vector<ConstId>& values) const {
    const auto pred = lit.atom.pred;
    bool present = false;
    if (pred >= 0 && static_cast<std::size_t>(pred) < data_.signature().size()) {
        ConstId args[kMaxArity];
        const auto n = lit.atom.args.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& t = lit.atom.args[i];
            args[i] = t.is_var() ? values[static_cast<std::size_t>(t.id)] : t.id;
        }
        present = data_.contains(pred, std::span<const ConstId>(args, n));
    }
    return present == lit.positive;
}

bool CspSolver::root_propagate(Domains& doms) const {
    const auto known_pred = [&](PredId p) { return p >= 0 && static_cast<std::size_t>(p) < data_.signature().size(); };
    for (const auto& in : query_.ins) {
        if (in.var < 0 || static_cast<std::size_t>(in.var) >= doms.size()) throw DomainError("in() variable out of range");
        std::vector<ConstId> allowed = in.allowed;
        std::sort(allowed.begin(), allowed.end());
        auto& dom = doms[static_cast<std::size_t>(in.var)];
        std::vector<ConstId> kept;
        std::set_intersection(dom.begin(), dom.end(), allowed.begin(), allowed.end(), std::back_inserter(kept));
        dom = std::move(kept);
    }
    for (const auto& lit : query_.literals) {
        if (lit.atom.args.size() > static_cast<std::size_t>(kMaxArity)) throw DomainError("query atom arity too large");
        if (!lit.positive) continue;
        if (!known_pred(lit.atom.pred) ||
            data_.signature()[lit.atom.pred].arity != static_cast<int>(lit.atom.args.size()))
            return false;
        for (std::size_t i = 0; i < lit.atom.args.size(); ++i) {
            const auto& t = lit.atom.args[i];
            const auto& allowed = data_.constants_at(lit.atom.pred, static_cast<int>(i));
            if (t.is_var()) {
                auto& dom = doms[static_cast<std::size_t>(t.id)];
                std::vector<ConstId> kept;
                std::set_intersection(dom.begin(), dom.end(), allowed.begin(), allowed.end(), std::back_inserter(kept));
                dom = std::move(kept);
            } else if (!std::binary_search(allowed.begin(), allowed.end(), t.id)) {
                return false;
            }
        }
    }
    for (const auto& card : query_.cards) {
        std::vector<VarId> vars = card.vars;
        std::sort(vars.begin(), vars.end());
        vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
        if (card.k < 0 || static_cast<std::size_t>(card.k) > vars.size()) return false;
        if (card.k == 0 && !vars.empty()) return false;
    }
    std::vector<ConstId> values(doms.size(), -1);
    for (std::size_t i = 0; i < query_.literals.size(); ++i)
        if (!filter_literal(doms, values, i)) return false;
    for (const auto& d : doms)
        if (d.empty()) return false;
    if (!xors_.empty() && !propagate_xor(doms, values)) return false;
    return true;
}

bool CspSolver::filter_literal(Domains& doms, const std::vector<ConstId>& values, std::size_t index) const {
    const auto& lit = query_.literals[index];
    VarId open = -1;
    for (const auto& t : lit.atom.args) {
        if (!t.is_var() || values[static_cast<std::size_t>(t.id)] >= 0) continue;
        if (open >= 0 && open != t.id) return true;  // two or more unassigned variables
        open = t.id;
    }
    if (open < 0) return literal_true(lit, values);
    auto trial = values;
    auto& dom = doms[static_cast<std::size_t>(open)];
    std::vector<ConstId> kept;
    kept.reserve(dom.size());
    for (auto c : dom) {
        trial[static_cast<std::size_t>(open)] = c;
        if (literal_true(lit, trial)) kept.push_back(c);
    }
    dom = std::move(kept);
    return !dom.empty();
}

bool CspSolver::check_cards(Domains& doms, const std::vector<ConstId>& values, VarId v) const {
    for (auto ci : cards_of_var_[static_cast<std::size_t>(v)]) {
        const auto& card = query_.cards[ci];
        std::vector<ConstId> used;
        std::vector<VarId> open;
        for (auto w : card.vars) {
            auto val = values[static_cast<std::size_t>(w)];
            if (val >= 0)
                used.push_back(val);
            else
                open.push_back(w);
        }
        std::sort(used.begin(), used.end());
        used.erase(std::unique(used.begin(), used.end()), used.end());
        std::sort(open.begin(), open.end());
        open.erase(std::unique(open.begin(), open.end()), open.end());
        const auto d = used.size();
        const auto k = static_cast<std::size_t>(card.k);
        if (d > k || d + open.size() < k) return false;
        if (d == k) {
            for (auto w : open) {
                auto& dom = doms[static_cast<std::size_t>(w)];
                std::vector<ConstId> kept;
                std::set_intersection(dom.begin(), dom.end(), used.begin(), used.end(), std::back_inserter(kept));
                dom = std::move(kept);
                if (dom.empty()) return false;
            }
        } else if (d + open.size() == k) {
            for (auto w : open) {
                auto& dom = doms[static_cast<std::size_t>(w)];
                std::vector<ConstId> kept;
                std::set_difference(dom.begin(), dom.end(), used.begin(), used.end(), std::back_inserter(kept));
                dom = std::move(kept);
                if (dom.empty()) return false;
            }
        }
    }
    return true;
}

bool CspSolver::propagate_xor(Domains& doms, const std::vector<ConstId>& values) const {
    const auto n = data_.num_constants();
    std::vector<std::pair<std::size_t, bool>> forced;
    for (;;) {
        std::vector<signed char> known(n, 0);
        for (std::size_t v = 0; v < doms.size(); ++v) {
            if (values[v] >= 0) continue;
            for (auto c : doms[v]) known[static_cast<std::size_t>(c)] = -1;
        }
        for (auto c : values)
            if (c >= 0) known[static_cast<std::size_t>(c)] = 1;
        if (!gf2_.propagate(known, forced)) return false;
        bool changed = false;
        for (auto [c, val] : forced) {
            if (val) continue;
            for (std::size_t v = 0; v < doms.size(); ++v) {
                if (values[v] >= 0) continue;
                auto& dom = doms[v];
                auto it = std::lower_bound(dom.begin(), dom.end(), static_cast<ConstId>(c));
                if (it != dom.end() && *it == static_cast<ConstId>(c)) {
                    dom.erase(it);
                    changed = true;
                    if (dom.empty()) return false;
                }
            }
        }
        if (!changed) return true;
    }
}

bool CspSolver::propagate_assignment(Domains& doms, std::vector<ConstId>& values, VarId v) const {
    const auto c = values[static_cast<std::size_t>(v)];
    if (query_.all_diff) {
        for (std::size_t w = 0; w < doms.size(); ++w) {
            if (values[w] >= 0) continue;
            auto& dom = doms[w];
            auto it = std::lower_bound(dom.begin(), dom.end(), c);
            if (it != dom.end() && *it == c) {
                dom.erase(it);
                if (dom.empty()) return false;
            }
        }
    }
    for (auto li : lits_of_var_[static_cast<std::size_t>(v)])
        if (!filter_literal(doms, values, li)) return false;
    if (!check_cards(doms, values, v)) return false;
    if (!xors_.empty() && !propagate_xor(doms, values)) return false;
    return true;
}

bool CspSolver::leaf_ok(const std::vector<ConstId>& values) const {
    for (const auto& lit : query_.literals)
        if (!literal_true(lit, values)) return false;
    if (query_.all_diff) {
        auto used = used_constants(values);
        if (used.size() != values.size()) return false;
    }
    for (const auto& card : query_.cards) {
        std::vector<ConstId> vals;
        for (auto w : card.vars) vals.push_back(values[static_cast<std::size_t>(w)]);
        if (used_constants(vals).size() != static_cast<std::size_t>(card.k)) return false;
    }
    for (const auto& in : query_.ins)
        if (std::find(in.allowed.begin(), in.allowed.end(), values[static_cast<std::size_t>(in.var)]) == in.allowed.end())
            return false;
    if (!xors_.empty()) {
        std::vector<char> ind(data_.num_constants(), 0);
        for (auto c : values) ind[static_cast<std::size_t>(c)] = 1;
        if (!gf2_.satisfied_by(ind)) return false;
    }
    return true;
}

bool CspSolver::search(Domains& doms, std::vector<ConstId>& values,
                       const std::function<bool(std::span<const ConstId>)>& visit, bool& stop, std::uint64_t& found) {
    std::size_t best = doms.size();
    for (std::size_t v = 0; v < doms.size(); ++v) {
        if (values[v] >= 0) continue;
        if (best == doms.size() || doms[v].size() < doms[best].size()) best = v;
    }
    if (best == doms.size()) {
        if (!leaf_ok(values)) return false;
        ++found;
        if (!visit(values)) stop = true;
        return true;
    }
    const auto candidates = doms[best];
    bool any = false;
    for (auto c : candidates) {
        if (node_limit_ && nodes_ >= node_limit_) throw BudgetError("CSP search exceeded its node budget");
        ++nodes_;
        auto next = doms;
        next[best] = {c};
        values[best] = c;
        if (propagate_assignment(next, values, static_cast<VarId>(best)) && search(next, values, visit, stop, found))
            any = true;
        values[best] = -1;
        if (stop) break;
    }
    return any;
}

bool CspSolver::solve() {
    solution_.clear();
    if (!root_ok_) return false;
    auto doms = root_;
    std::vector<ConstId> values(doms.size(), -1);
    bool stop = false;
    std::uint64_t found = 0;
    search(doms, values, [&](std::span<const ConstId> sol) {
        solution_.assign(sol.begin(), sol.end());
        return false;
    }, stop, found);
    return found > 0;
}

std::uint64_t CspSolver::enumerate(const std::function<bool(std::span<const ConstId>)>& visit) {
    if (!root_ok_) return 0;
    auto doms = root_;
    std::vector<ConstId> values(doms.size(), -1);
    bool stop = false;
    std::uint64_t found = 0;
    search(doms, values, visit, stop, found);
    return found;
}

std::vector<ConstId> CspSolver::supported_values(VarId v) {
    std::vector<ConstId> out;
    if (!root_ok_) return out;
    const auto vi = static_cast<std::size_t>(v);
    for (auto c : root_.at(vi)) {
        if (node_limit_ && nodes_ >= node_limit_) throw BudgetError("CSP search exceeded its node budget");
        ++nodes_;
        auto doms = root_;
        doms[vi] = {c};
        std::vector<ConstId> values(doms.size(), -1);
        values[vi] = c;
        if (!propagate_assignment(doms, values, v)) continue;
        bool stop = false;
        std::uint64_t found = 0;
        search(doms, values, [](std::span<const ConstId>) { return false; }, stop, found);
        if (found > 0) out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------

bool satisfiable(const ConjunctiveQuery& query, const GlobalExample& data) {
    CspSolver solver(data, query);
    return solver.solve();
}

std::vector<ConstId> csp_query(const ConjunctiveQuery& query, VarId v, const GlobalExample& data,
                               std::uint64_t node_limit, std::uint64_t* nodes) {
    if (v < 0 || v >= query.num_vars || !query.mentions(v))
        throw DomainError("csp_query: variable V" + std::to_string(v) + " does not occur in the query");
    CspSolver solver(data, query);
    solver.set_node_limit(node_limit);
    auto out = solver.supported_values(v);
    if (nodes) *nodes += solver.nodes();
    return out;
}

XorSolveResult solve_with_xor(const ConjunctiveQuery& query, const GlobalExample& data,
                              std::span<const XorConstraint> xors) {
    CspSolver solver(data, query, xors);
    XorSolveResult r;
    r.satisfiable = solver.solve();
    if (r.satisfiable) r.witness_subset = used_constants(solver.solution());
    return r;
}

std::vector<ConstId> used_constants(std::span<const ConstId> values) {
    std::vector<ConstId> out(values.begin(), values.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace possrl
