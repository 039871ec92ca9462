#include "possrl/weight_learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "possrl/errors.hpp"
#include "possrl/query_engine.hpp"
#include "possrl/sat.hpp"

namespace possrl {

std::optional<CutCounts> ParamCache::find(const std::vector<Clause>& key) const {
    std::lock_guard lock(mu_);
    auto it = table_.find(key);
    if (it == table_.end()) {
        ++misses_;
        return std::nullopt;
    }
    ++hits_;
    return it->second;
}

void ParamCache::insert(const std::vector<Clause>& key, const CutCounts& counts) {
    std::lock_guard lock(mu_);
    table_.emplace(key, counts);
}

std::size_t ParamCache::size() const {
    std::lock_guard lock(mu_);
    return table_.size();
}

std::vector<Clause> cut_key(std::span<const Clause> formulas, std::span<const Clause> hard) {
    std::vector<Clause> key;
    for (const auto& f : formulas) key.push_back(canonical_form(f));
    for (const auto& f : hard) key.push_back(canonical_form(f));
    std::sort(key.begin(), key.end());
    key.erase(std::unique(key.begin(), key.end()), key.end());
    return key;
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t key_seed(const std::vector<Clause>& key, std::uint64_t base) {
    std::uint64_t h = fnv1a(0xcbf29ce484222325ULL, base);
    for (const auto& c : key) {
        h = fnv1a(h, c.all_diff ? 1 : 2);
        for (const auto& l : c.literals) {
            h = fnv1a(h, static_cast<std::uint64_t>(l.atom.pred) * 2 + (l.positive ? 1 : 0));
            for (const auto& t : l.atom.args) h = fnv1a(h, static_cast<std::uint64_t>(t.id) * 2 + (t.is_var() ? 1 : 0));
        }
        h = fnv1a(h, 0xffff);
    }
    return h;
}

}  // namespace

CutCounts count_cut(const GlobalExample& data, std::span<const Clause> formulas, std::span<const Clause> hard, int k,
                    const ParamPolicy& policy) {
    const auto key = cut_key(formulas, hard);
    const bool has_bottom = std::any_of(key.begin(), key.end(), [](const Clause& c) { return c.is_bottom(); });
    CutCounts out;
    if (has_bottom) {
        out.e.method = CountMethod::ExactAlg1;
        out.m.method = CountMethod::ExactModels;
        return out;
    }
    Rng rng(key_seed(key, policy.seed));

    const double total = binomial(data.num_constants(), static_cast<std::size_t>(k));
    CountTask task{&data, {}, k};
    for (const auto& c : key) task.queries.push_back(negation_query(c));
    if (task.queries.empty()) {
        out.e.value = total;
        out.e.method = CountMethod::ExactAlg1;
    } else {
        auto matched = count_dispatch(task, policy.counting, rng);
        out.e = matched;
        out.e.value = std::clamp(total - matched.value, 0.0, total);
        if (matched.ci) out.e.ci = std::pair{total - matched.ci->second, total - matched.ci->first};
    }
    out.m = model_count(key, data.signature(), k, policy.model_mode, policy.counting.epsilon, policy.counting.delta,
                        rng, policy.exact_atom_limit);
    return out;
}

StratumParams estimate_params(std::span<const Clause> ordering, std::span<const Clause> hard,
                              const GlobalExample& data, int k, const ParamPolicy& policy, ParamCache* cache) {
    if (ordering.empty() || !ordering.front().is_bottom())
        throw DomainError("ordering must start with the bottom formula");
    StratumParams p;
    p.ordering.assign(ordering.begin(), ordering.end());
    const std::size_t n = ordering.size();
    for (std::size_t i = 0; i <= n; ++i) {
        auto cut = ordering.subspan(i);
        CutCounts counts;
        std::optional<CutCounts> hit;
        std::vector<Clause> key;
        if (cache) {
            key = cut_key(cut, hard);
            hit = cache->find(key);
        }
        if (hit) {
            counts = *hit;
        } else {
            counts = count_cut(data, cut, hard, k, policy);
            if (cache) cache->insert(key, counts);
        }
        p.e_counts.push_back(counts.e.value);
        p.m_counts.push_back(counts.m.value);
        p.e_reports.push_back(counts.e);
        p.m_reports.push_back(counts.m);
    }
    for (std::size_t i = n; i-- > 0;) {
        p.e_counts[i] = std::min(p.e_counts[i], p.e_counts[i + 1]);
        p.m_counts[i] = std::min(p.m_counts[i], p.m_counts[i + 1]);
    }
    return p;
}

// ---------------------------------------------------------------------------

double gp_log_likelihood(std::span<const double> e_counts, std::span<const double> lambdas) {
    double ll = 0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const double w = e_counts[i + 1] - e_counts[i];
        if (w <= 0) continue;
        const double p = 1.0 - lambdas[i];
        if (p <= 0) return -std::numeric_limits<double>::infinity();
        ll += w * std::log(p);
    }
    return ll;
}

namespace {

/// Euclidean projection onto non-increasing sequences.
std::vector<double> project_nonincreasing(const std::vector<double>& x) {
    struct Block {
        double sum;
        double count;
        std::size_t len;
    };
    std::vector<Block> blocks;
    for (double v : x) {
        blocks.push_back({v, 1, 1});
        while (blocks.size() >= 2) {
            auto& b = blocks[blocks.size() - 1];
            auto& a = blocks[blocks.size() - 2];
            if (a.sum / a.count >= b.sum / b.count) break;
            a.sum += b.sum;
            a.count += b.count;
            a.len += b.len;
            blocks.pop_back();
        }
    }
    std::vector<double> out;
    for (const auto& b : blocks) out.insert(out.end(), b.len, b.sum / b.count);
    return out;
}

}  // namespace

GPSolution solve_gp(std::span<const double> e_counts, std::span<const double> m_counts) {
    if (e_counts.size() != m_counts.size() || e_counts.size() < 2)
        throw DomainError("solve_gp needs n+1 >= 2 matching counts");
    const std::size_t n = e_counts.size() - 1;
    std::vector<double> w(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::max(0.0, e_counts[i + 1] - e_counts[i]);
        d[i] = std::max(0.0, m_counts[i + 1] - m_counts[i]);
    }
    const double W = std::accumulate(w.begin(), w.end(), 0.0);
    const double D = std::accumulate(d.begin(), d.end(), 0.0);
    if (D <= 0) throw InfeasibleError("no world satisfies the hard part of the theory");

    std::vector<double> p(n);
    if (W <= 0) {
        std::fill(p.begin(), p.end(), 1.0 / D);
    } else {
        // antitonic regression of w/(W d) with weights d; a stratum without worlds
        // pools with its predecessor (its p only matters through the order)
        struct Block {
            double w, d;
            std::size_t len;
        };
        std::vector<Block> blocks;
        auto violates = [](const Block& a, const Block& b) {
            if (b.d <= 0) return true;
            if (a.d <= 0) return false;
            return b.w / b.d > a.w / a.d;
        };
        for (std::size_t i = 0; i < n; ++i) {
            blocks.push_back({w[i], d[i], 1});
            while (blocks.size() >= 2 && violates(blocks[blocks.size() - 2], blocks.back())) {
                auto b = blocks.back();
                blocks.pop_back();
                blocks.back().w += b.w;
                blocks.back().d += b.d;
                blocks.back().len += b.len;
            }
        }
        if (blocks.front().d <= 0) {
            if (blocks.front().w > 0) throw InfeasibleError("observed fragments on a stratum without worlds");
            if (blocks.size() == 1) throw InfeasibleError("no world carries mass");
            blocks[1].len += blocks[0].len;
            blocks.erase(blocks.begin());
        }
        std::size_t i = 0;
        for (const auto& b : blocks)
            for (std::size_t j = 0; j < b.len; ++j) p[i++] = b.w / (W * b.d);
    }

    // strata without data would get p = 0 (lambda = 1); keep them just below
    constexpr double kFloor = 1e-12;
    for (auto& v : p) v = std::max(v, kFloor);
    double mass = 0;
    for (std::size_t i = 0; i < n; ++i) mass += p[i] * d[i];
    for (auto& v : p) v /= mass;

    GPSolution sol;
    sol.lambdas.resize(n);
    for (std::size_t i = 0; i < n; ++i) sol.lambdas[i] = std::clamp(1.0 - p[i], 0.0, 1.0);
    for (std::size_t i = 1; i < n; ++i) sol.lambdas[i] = std::max(sol.lambdas[i], sol.lambdas[i - 1]);
    sol.log_likelihood = gp_log_likelihood(e_counts, sol.lambdas);

    double norm = 0;
    for (std::size_t i = 0; i < n; ++i) norm += (1.0 - sol.lambdas[i]) * d[i];
    sol.normalization_residual = std::abs(norm - 1.0);

    // stationarity of f(u) = sum w u - W log sum d e^u over non-increasing u:
    // u = Proj(u + grad f(u)) at the optimum
    std::vector<double> u(n), step(n);
    double z = 0;
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = std::log(1.0 - sol.lambdas[i]);
        z += d[i] * (1.0 - sol.lambdas[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double grad = W > 0 ? (w[i] - W * d[i] * std::exp(u[i]) / z) / W : 0.0;
        step[i] = u[i] + grad;
    }
    auto proj = project_nonincreasing(step);
    double res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        // floored strata sit on the artificial bound; their gradient points outward
        if (std::exp(u[i]) * mass <= kFloor * (1 + 1e-9) && w[i] == 0) continue;
        res = std::max(res, std::abs(proj[i] - u[i]));
    }
    sol.kkt_residual = res;
    sol.converged = res < 1e-8 && sol.normalization_residual < 1e-6;
    return sol;
}

// ---------------------------------------------------------------------------

StratifiedTheory assemble_theory(std::span<const Clause> ordering, std::span<const double> lambdas,
                                 std::span<const Clause> hard) {
    StratifiedTheory t;
    double prev = -1;
    for (std::size_t i = 0; i < ordering.size(); ++i) {
        double level = lambdas[i];
        if (prev >= 0 && std::abs(level - prev) <= 1e-9) level = prev;
        prev = level;
        t.add(ordering[i], level);
    }
    for (const auto& h : hard) t.add(h, 1.0);
    return t;
}

GreedyResult greedy_build(std::span<const ScoredRule> candidates, std::span<const Clause> hard,
                          const GlobalExample& data, int k, const GreedyConfig& cfg, ParamCache* cache) {
    ParamCache local;
    if (!cache) cache = &local;

    struct Entry {
        Clause clause;
        double accuracy;
        Clause canonical;
    };
    std::vector<Entry> order;
    for (const auto& c : candidates) {
        auto cl = c.rule.to_clause();
        Clause clause(cl.literals, cl.all_diff);
        order.push_back({clause, c.accuracy, canonical_form(clause)});
    }
    std::stable_sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
        if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
        return a.canonical < b.canonical;
    });

    GreedyResult res;
    std::vector<Clause> ordering{Clause::bottom()};
    auto params = estimate_params(ordering, hard, data, k, cfg.params, cache);
    res.solution = solve_gp(params);
    res.trajectory.push_back(res.solution.log_likelihood);

    auto present = [&](const Clause& c) {
        auto same = [&](const Clause& d) { return isomorphic(c, d); };
        return std::any_of(ordering.begin(), ordering.end(), same) || std::any_of(hard.begin(), hard.end(), same);
    };

    for (int pass = 0; pass < cfg.passes; ++pass) {
        bool changed = false;
        for (std::size_t ci = 0; ci < order.size(); ++ci) {
            const auto& cand = order[ci].clause;
            std::ostringstream line;
            line << "pass=" << pass << " cand=" << ci;
            if (present(cand)) {
                if (pass == 0) {
                    line << " skip=duplicate";
                    res.log.push_back(line.str());
                }
                continue;
            }
            const double current = res.solution.log_likelihood;
            std::optional<GPSolution> best;
            std::size_t best_pos = 0;
            std::string failure;
            for (std::size_t pos = 1; pos <= ordering.size(); ++pos) {
                auto trial = ordering;
                trial.insert(trial.begin() + static_cast<std::ptrdiff_t>(pos), cand);
                try {
                    auto sol = solve_gp(estimate_params(trial, hard, data, k, cfg.params, cache));
                    if (!best || sol.log_likelihood > best->log_likelihood) {
                        best = sol;
                        best_pos = pos;
                    }
                } catch (const BudgetError& e) {
                    failure = e.what();
                    break;
                } catch (const InfeasibleError& e) {
                    failure = e.what();
                    break;
                }
            }
            if (!failure.empty()) {
                line << " abort=\"" << failure << "\"";
                res.log.push_back(line.str());
                continue;
            }
            const double gain = best->log_likelihood - current;
            line << " pos=" << best_pos << " dll=" << gain;
            if (gain > cfg.min_gain) {
                ordering.insert(ordering.begin() + static_cast<std::ptrdiff_t>(best_pos), cand);
                res.solution = *best;
                res.trajectory.push_back(best->log_likelihood);
                changed = true;
                line << " accept";
            } else {
                line << " reject";
            }
            res.log.push_back(line.str());
        }
        if (!changed) break;
    }
    res.ordering = ordering;
    res.theory = assemble_theory(ordering, res.solution.lambdas, hard);
    return res;
}

// ---------------------------------------------------------------------------

namespace {

bool entails_over(std::span<const Clause> formulas, const Clause& query, int k) {
    const int n = std::max(k, static_cast<int>(query.num_vars()));
    std::vector<ConstId> consts(static_cast<std::size_t>(n));
    std::iota(consts.begin(), consts.end(), 0);
    return entails(formulas, consts, query);
}

}  // namespace

StratifiedTheory simplify(const StratifiedTheory& theory, int k, SimplifyStats* stats) {
    struct Item {
        Clause clause;
        double level;
    };
    std::vector<Item> items;
    for (const auto& wf : theory.formulas()) items.push_back({wf.formula, wf.weight});  // descending
    SimplifyStats local;

    auto higher_than = [&](double level, std::size_t skip) {
        std::vector<Clause> out;
        for (std::size_t j = 0; j < items.size(); ++j)
            if (j != skip && items[j].level > level) out.push_back(items[j].clause);
        return out;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < items.size(); ++i) {
            auto& it = items[i];
            if (it.level >= 1.0 || it.clause.is_bottom()) continue;
            auto higher = higher_than(it.level, i);
            if (entails_over(higher, it.clause, k)) {
                items.erase(items.begin() + static_cast<std::ptrdiff_t>(i));
                ++local.removed_formulas;
                changed = true;
                break;
            }
            higher.push_back(it.clause);
            for (std::size_t j = 0; j < it.clause.literals.size(); ++j) {
                const auto& lit = it.clause.literals[j];
                if (lit.positive || it.clause.literals.size() < 2) continue;
                auto lits = it.clause.literals;
                lits.erase(lits.begin() + static_cast<std::ptrdiff_t>(j));
                Clause shorter(std::move(lits), it.clause.all_diff);
                if (entails_over(higher, shorter, k)) {
                    it.clause = std::move(shorter);
                    ++local.removed_literals;
                    changed = true;
                    break;
                }
            }
            if (changed) break;
        }
    }

    StratifiedTheory out;
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.level < b.level; });
    for (const auto& it : items) out.add(it.clause, it.level);
    if (stats) *stats = local;
    return out;
}

}  // namespace possrl
