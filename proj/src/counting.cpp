#include "possrl/counting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "possrl/errors.hpp"
#include "possrl/sat.hpp"

namespace possrl {

std::string to_string(CountMethod method) {
    switch (method) {
        case CountMethod::ExactNaive: return "exact-naive";
        case CountMethod::ExactAlg1: return "exact-alg1";
        case CountMethod::Sampled: return "sampled";
        case CountMethod::XorApprox: return "xor-approx";
        case CountMethod::ExactModels: return "exact-models";
    }
    return "unknown";
}

std::string CountReport::to_line() const {
    char buf[160];
    std::string out = to_string(method);
    std::snprintf(buf, sizeof buf, " %.17g", value);
    out += buf;
    if (ci) {
        std::snprintf(buf, sizeof buf, " %.17g %.17g", ci->first, ci->second);
        out += buf;
    }
    out += " " + std::to_string(seed);
    return out;
}

// ---------------------------------------------------------------------------

ConjunctiveQuery k_extension(const ConjunctiveQuery& query, int k) {
    std::vector<VarId> vars;
    for (VarId v = 0; v < query.num_vars; ++v)
        if (query.mentions(v)) vars.push_back(v);
    const int m = static_cast<int>(vars.size());
    if (m > k) throw DomainError("k_extension: query has " + std::to_string(m) + " variables, more than k=" + std::to_string(k));
    ConjunctiveQuery ext = query;
    const int fresh = query.all_diff ? k - m : k;
    for (int i = 0; i < fresh; ++i) vars.push_back(ext.add_var());
    ext.cards.push_back({k, vars});
    return ext;
}

SubsetSet matching_subsets_naive(const GlobalExample& data, const ConjunctiveQuery& extended, std::uint64_t node_limit,
                                 std::uint64_t* nodes) {
    SubsetSet out;
    CspSolver solver(data, extended);
    solver.set_node_limit(node_limit);
    solver.enumerate([&](std::span<const ConstId> values) {
        out.insert(used_constants(values));
        return true;
    });
    if (nodes) *nodes += solver.nodes();
    return out;
}

SubsetSet matching_subsets_alg1(const GlobalExample& data, const ConjunctiveQuery& extended, int k,
                                std::uint64_t node_limit, Alg1Stats* stats) {
    std::vector<VarId> vars;
    for (VarId v = 0; v < extended.num_vars; ++v)
        if (extended.mentions(v)) vars.push_back(v);
    Alg1Stats local;
    auto& st = stats ? *stats : local;
    SubsetSet current{{}};
    SubsetSet seen;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        SubsetSet next;
        for (const auto& s : current) {
            ConjunctiveQuery q = extended;
            for (std::size_t j = 0; j < i; ++j) q.ins.push_back({vars[j], s});
            CspSolver solver(data, q);
            const auto remaining = node_limit ? node_limit - std::min(node_limit, st.nodes) : 0;
            if (node_limit && remaining == 0) throw BudgetError("Algorithm 1 exceeded its node budget");
            solver.set_node_limit(remaining);
            std::vector<ConstId> p;
            try {
                p = solver.supported_values(vars[i]);
            } catch (const BudgetError&) {
                st.nodes += solver.nodes();
                throw;
            }
            st.nodes += solver.nodes();
            ++st.csp_calls;
            st.csp_solutions += p.size();
            for (auto c : p) {
                auto t = s;
                auto it = std::lower_bound(t.begin(), t.end(), c);
                if (it == t.end() || *it != c) t.insert(it, c);
                if (static_cast<int>(t.size()) <= k) next.insert(std::move(t));
            }
        }
        st.partial_sets += next.size();
        for (const auto& t : next)
            if (seen.insert(t).second) ++st.distinct_partial_sets;
        current = std::move(next);
        if (current.empty()) break;
    }
    SubsetSet out;
    for (const auto& s : current)
        if (static_cast<int>(s.size()) == k) out.insert(s);
    return out;
}

std::pair<double, double> wilson_interval(std::uint64_t hits, std::uint64_t trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(hits) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
    const double lo = hits == 0 ? 0.0 : std::max(0.0, center - half);
    const double hi = hits == trials ? 1.0 : std::min(1.0, center + half);
    return {lo, hi};
}

namespace {

std::vector<ConjunctiveQuery> extend_all(const CountTask& task) {
    std::vector<ConjunctiveQuery> out;
    for (const auto& q : task.queries) out.push_back(k_extension(q, task.k));
    return out;
}

void check_task(const CountTask& task) {
    if (!task.data) throw DomainError("count task without data");
    if (task.k < 1) throw DomainError("count task needs k >= 1");
}

class SubsetCounter final : public BoundedCounter {
public:
    SubsetCounter(const GlobalExample& data, std::vector<ConjunctiveQuery> extended, std::uint64_t node_limit)
        : data_(data), queries_(std::move(extended)), node_limit_(node_limit) {}

    std::size_t num_indicators() const override { return data_.num_constants(); }

    std::uint64_t count_upto(std::span<const XorConstraint> xors, std::uint64_t limit) override {
        SubsetSet found;
        for (const auto& q : queries_) {
            CspSolver solver(data_, q, xors);
            if (node_limit_) {
                if (nodes_ >= node_limit_) throw BudgetError("XOR counting exceeded its node budget");
                solver.set_node_limit(node_limit_ - nodes_);
            }
            try {
                solver.enumerate([&](std::span<const ConstId> values) {
                    found.insert(used_constants(values));
                    return found.size() < limit;
                });
            } catch (const BudgetError&) {
                nodes_ += solver.nodes();
                throw;
            }
            nodes_ += solver.nodes();
            if (found.size() >= limit) break;
        }
        return std::min<std::uint64_t>(found.size(), limit);
    }

    std::uint64_t nodes() const { return nodes_; }

private:
    const GlobalExample& data_;
    std::vector<ConjunctiveQuery> queries_;
    std::uint64_t node_limit_;
    std::uint64_t nodes_ = 0;
};

}  // namespace

CountReport count_exact(const CountTask& task, std::uint64_t node_limit) {
    check_task(task);
    SubsetSet all;
    Alg1Stats stats;
    for (const auto& q : extend_all(task)) {
        auto part = matching_subsets_alg1(*task.data, q, task.k, node_limit, &stats);
        all.insert(part.begin(), part.end());
    }
    CountReport r;
    r.method = CountMethod::ExactAlg1;
    r.value = static_cast<double>(all.size());
    return r;
}

CountReport count_sampled(const CountTask& task, const CountingPolicy& policy, Rng& rng) {
    check_task(task);
    const auto n = task.data->num_constants();
    const auto k = static_cast<std::size_t>(task.k);
    CountReport r;
    r.method = CountMethod::Sampled;
    if (k > n) {
        r.ci = {0.0, 0.0};
        return r;
    }
    const auto queries = extend_all(task);
    std::vector<ConstId> ids(n);
    std::uint64_t hits = 0;
    const auto trials = static_cast<std::uint64_t>(std::max(policy.sample_budget, 1));
    for (std::uint64_t t = 0; t < trials; ++t) {
        std::iota(ids.begin(), ids.end(), 0);
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(ids[i], ids[pick(rng)]);
        }
        std::vector<ConstId> subset(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(subset.begin(), subset.end());
        bool hit = false;
        for (const auto& q : queries) {
            CspSolver solver(*task.data, q);
            for (VarId v = 0; v < q.num_vars; ++v) solver.restrict(v, subset);
            if (solver.solve()) {
                hit = true;
                break;
            }
        }
        if (hit) ++hits;
    }
    const double total = binomial(n, k);
    const auto [lo, hi] = wilson_interval(hits, trials);
    r.value = static_cast<double>(hits) / static_cast<double>(trials) * total;
    r.ci = {lo * total, hi * total};
    r.usable = r.value > 0 && (r.ci->second - r.ci->first) / r.value <= policy.ci_rel_width_threshold;
    return r;
}

CountReport count_xor_approx(const CountTask& task, double epsilon, double delta, Rng& rng, std::uint64_t node_limit,
                             std::uint64_t pivot_cap) {
    check_task(task);
    SubsetCounter counter(*task.data, extend_all(task), node_limit);
    auto pivot = approxmc_pivot(epsilon);
    if (pivot_cap) pivot = std::min(pivot, pivot_cap);
    auto res = approx_count(counter, epsilon, delta, pivot, rng);
    CountReport r;
    r.method = CountMethod::XorApprox;
    r.value = res.estimate;
    r.epsilon = epsilon;
    r.delta = delta;
    return r;
}

CountReport count_dispatch(const CountTask& task, const CountingPolicy& policy, Rng& rng) {
    try {
        return count_exact(task, policy.exact_limit_small);
    } catch (const BudgetError&) {
    }
    auto sampled = count_sampled(task, policy, rng);
    if (sampled.usable) return sampled;
    try {
        return count_exact(task, policy.exact_limit_large);
    } catch (const BudgetError&) {
    }
    try {
        return count_xor_approx(task, policy.epsilon, policy.delta, rng, policy.xor_node_limit,
                                2 * policy.exact_limit_small);
    } catch (const BudgetError& e) {
        throw BudgetError(std::string("every counting tier exhausted its budget; last: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

std::uint64_t approxmc_pivot(double epsilon) {
    if (!(epsilon > 0)) throw DomainError("approximate counting needs epsilon > 0");
    const double t = 9.84 * (1 + epsilon / (1 + epsilon)) * std::pow(1 + 1 / epsilon, 2);
    return static_cast<std::uint64_t>(std::ceil(t - 1e-9));
}

int approxmc_rounds(double delta) {
    if (!(delta > 0 && delta < 1)) throw DomainError("approximate counting needs delta in (0,1)");
    return static_cast<int>(std::ceil(17 * std::log2(3 / delta) - 1e-9));
}

ApproxMcResult approx_count(BoundedCounter& counter, double epsilon, double delta, std::uint64_t pivot, Rng& rng) {
    ApproxMcResult result;
    const auto base = counter.count_upto({}, pivot + 1);
    if (base <= pivot) {
        result.estimate = static_cast<double>(base);
        result.exact = true;
        return result;
    }
    const int n = static_cast<int>(counter.num_indicators());
    const int rounds = approxmc_rounds(delta);
    (void)epsilon;
    std::vector<double> estimates;
    int m_prev = 1;
    std::bernoulli_distribution coin(0.5);
    for (int round = 0; round < rounds; ++round) {
        std::vector<XorConstraint> rows(static_cast<std::size_t>(n));
        for (auto& row : rows) {
            for (int c = 0; c < n; ++c)
                if (coin(rng)) row.indicators.push_back(c);
            row.parity = coin(rng);
        }
        std::map<int, std::uint64_t> memo{{0, base}};
        auto count = [&](int m) {
            auto it = memo.find(m);
            if (it != memo.end()) return it->second;
            auto c = counter.count_upto(std::span<const XorConstraint>(rows.data(), static_cast<std::size_t>(m)), pivot + 1);
            memo[m] = c;
            return c;
        };
        auto big = [&](int m) { return count(m) > pivot; };
        // smallest m with a small cell; big(0) holds
        int lo = 0, hi = -1;
        int m = std::clamp(m_prev, 1, std::max(n, 1));
        if (n == 0) break;
        if (big(m)) {
            lo = m;
            int step = 1;
            while (hi < 0) {
                int probe = std::min(lo + step, n);
                if (big(probe)) {
                    if (probe == n) break;
                    lo = probe;
                    step *= 2;
                } else {
                    hi = probe;
                }
            }
            if (hi < 0) continue;  // even n rows leave a large cell
        } else {
            hi = m;
            int step = 1;
            while (true) {
                int probe = hi - step;
                if (probe <= lo) break;
                if (big(probe)) {
                    lo = probe;
                    break;
                }
                hi = probe;
                step *= 2;
            }
        }
        while (hi - lo > 1) {
            int mid = lo + (hi - lo) / 2;
            if (big(mid))
                lo = mid;
            else
                hi = mid;
        }
        estimates.push_back(static_cast<double>(count(hi)) * std::ldexp(1.0, hi));
        m_prev = hi;
        ++result.rounds;
    }
    if (estimates.empty()) throw BudgetError("approximate counting: no hashing round produced a small cell");
    std::sort(estimates.begin(), estimates.end());
    const auto mid = estimates.size() / 2;
    result.estimate = estimates.size() % 2 ? estimates[mid] : 0.5 * (estimates[mid - 1] + estimates[mid]);
    return result;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> clause_lits(const GroundClause& g, const WorldSpace& space) {
    std::vector<int> lits;
    for (const auto& l : g) {
        int v = static_cast<int>(space.index_of(l.atom)) + 1;
        lits.push_back(l.positive ? v : -v);
    }
    return lits;
}

std::uint64_t enumerate_models(SatSolver& solver, int projected_vars, std::uint64_t limit) {
    std::uint64_t found = 0;
    while (found < limit && solver.solve()) {
        ++found;
        std::vector<int> block;
        block.reserve(static_cast<std::size_t>(projected_vars));
        for (int v = 1; v <= projected_vars; ++v) block.push_back(solver.model_value(v) ? -v : v);
        if (block.empty() || !solver.add_clause(block)) break;
    }
    return found;
}

void add_xors(SatSolver& solver, std::span<const XorConstraint> xors) {
    for (const auto& x : xors) {
        std::vector<int> vars;
        for (auto c : x.indicators) vars.push_back(c + 1);
        solver.add_xor(vars, x.parity);
    }
}

class GroundWorldCounter final : public BoundedCounter {
public:
    GroundWorldCounter(const WorldSpace& space, std::vector<std::vector<int>> clauses)
        : space_(space), clauses_(std::move(clauses)) {}

    std::size_t num_indicators() const override { return space_.num_atoms(); }

    std::uint64_t count_upto(std::span<const XorConstraint> xors, std::uint64_t limit) override {
        SatSolver solver;
        const int n = static_cast<int>(space_.num_atoms());
        solver.reserve_vars(n);
        for (const auto& c : clauses_)
            if (!solver.add_clause(c)) return 0;
        add_xors(solver, xors);
        return enumerate_models(solver, n, limit);
    }

private:
    const WorldSpace& space_;
    std::vector<std::vector<int>> clauses_;
};

// Groundings are added only once a candidate model violates them; a model is
// counted once no formula has a violated grounding in it.
class CuttingPlaneCounter final : public BoundedCounter {
public:
    CuttingPlaneCounter(const WorldSpace& space, std::span<const Clause> formulas, const Signature& signature)
        : space_(space), formulas_(formulas.begin(), formulas.end()), signature_(signature) {
        for (int i = 0; i < space.width(); ++i) constants_.add(std::to_string(i + 1));
        for (const auto& f : formulas_) queries_.push_back(negation_query(f));
    }

    std::size_t num_indicators() const override { return space_.num_atoms(); }

    std::uint64_t count_upto(std::span<const XorConstraint> xors, std::uint64_t limit) override {
        SatSolver solver;
        const int n = static_cast<int>(space_.num_atoms());
        solver.reserve_vars(n);
        for (const auto& c : cuts_)
            if (!solver.add_clause(c)) return 0;
        add_xors(solver, xors);
        std::uint64_t found = 0;
        while (found < limit && solver.solve()) {
            std::vector<GroundAtom> atoms;
            for (int v = 1; v <= n; ++v)
                if (solver.model_value(v)) atoms.push_back(space_.atom(static_cast<std::size_t>(v - 1)));
            GlobalExample world(signature_, constants_, std::move(atoms));
            bool violated = false;
            bool dead = false;
            for (std::size_t f = 0; f < formulas_.size(); ++f) {
                CspSolver csp(world, queries_[f]);
                csp.enumerate([&](std::span<const ConstId> values) {
                    Substitution theta;
                    for (auto c : values) theta.push_back(Term::constant(c));
                    GroundClause g;
                    for (const auto& l : formulas_[f].literals) g.push_back({ground_atom(l.atom, theta), l.positive});
                    auto lits = clause_lits(g, space_);
                    std::sort(lits.begin(), lits.end());
                    if (seen_.insert(lits).second) cuts_.push_back(lits);
                    if (!solver.add_clause(lits)) dead = true;
                    violated = true;
                    ++groundings_added_;
                    return !dead;
                });
                if (dead) break;
            }
            if (dead) break;
            if (violated) continue;
            ++found;
            std::vector<int> block;
            for (int v = 1; v <= n; ++v) block.push_back(solver.model_value(v) ? -v : v);
            if (block.empty() || !solver.add_clause(block)) break;
        }
        return found;
    }

private:
    const WorldSpace& space_;
    std::vector<Clause> formulas_;
    std::vector<ConjunctiveQuery> queries_;
    Signature signature_;
    ConstantTable constants_;
    std::vector<std::vector<int>> cuts_;
    std::set<std::vector<int>> seen_;
    std::uint64_t groundings_added_ = 0;
};

}  // namespace

CountReport model_count(std::span<const Clause> formulas, const Signature& signature, int k, ModelCountMode mode,
                        double epsilon, double delta, Rng& rng, std::size_t exact_atom_limit) {
    if (k < 0) throw DomainError("model_count: negative width");
    for (const auto& f : formulas)
        for (const auto& l : f.literals)
            for (const auto& t : l.atom.args)
                if (!t.is_var()) throw DomainError("model_count: formulas must be constant-free");
    WorldSpace space(signature, k);
    std::vector<ConstId> constants(static_cast<std::size_t>(k));
    std::iota(constants.begin(), constants.end(), 0);
    CountReport r;
    const bool exact = space.num_atoms() <= exact_atom_limit;

    if (exact || mode == ModelCountMode::Ground) {
        std::vector<std::vector<int>> clauses;
        for (const auto& f : formulas)
            for (const auto& g : ground(f, constants)) {
                auto lits = clause_lits(g, space);
                std::sort(lits.begin(), lits.end());
                lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
                bool taut = false;
                for (int l : lits) taut = taut || std::binary_search(lits.begin(), lits.end(), -l);
                if (!taut) clauses.push_back(std::move(lits));
            }
        if (exact) {
            r.method = CountMethod::ExactModels;
            r.value = static_cast<double>(count_models(clauses, static_cast<int>(space.num_atoms())));
            return r;
        }
        GroundWorldCounter counter(space, std::move(clauses));
        r.value = approx_count(counter, epsilon, delta, approxmc_pivot(epsilon), rng).estimate;
    } else {
        CuttingPlaneCounter counter(space, formulas, signature);
        r.value = approx_count(counter, epsilon, delta, approxmc_pivot(epsilon), rng).estimate;
    }
    r.method = CountMethod::XorApprox;
    r.epsilon = epsilon;
    r.delta = delta;
    return r;
}

}  // namespace possrl
