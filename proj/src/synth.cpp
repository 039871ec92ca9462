#include "possrl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>

#include "possrl/counting.hpp"
#include "possrl/errors.hpp"
#include "possrl/sat.hpp"

namespace possrl {

namespace {

// Sorted, deduplicated literals; nullopt for a tautology.
std::optional<std::vector<int>> ground_lits(const GroundClause& g, const WorldSpace& space) {
    std::vector<int> lits;
    for (const auto& l : g) {
        int v = static_cast<int>(space.index_of(l.atom)) + 1;
        lits.push_back(l.positive ? v : -v);
    }
    std::sort(lits.begin(), lits.end());
    lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
    for (int l : lits)
        if (std::binary_search(lits.begin(), lits.end(), -l)) return std::nullopt;
    return lits;
}

std::vector<std::vector<int>> ground_all(std::span<const Clause> formulas, std::span<const ConstId> constants,
                                         const WorldSpace& space) {
    std::vector<std::vector<int>> out;
    for (const auto& f : formulas) {
        if (f.is_bottom()) out.push_back({});
        for (const auto& g : ground(f, constants))
            if (auto lits = ground_lits(g, space)) out.push_back(std::move(*lits));
    }
    return out;
}

// Variables 1..atoms are the world's atoms; the rest are Tseitin indicators of
// violated groundings and are determined by the atoms.
struct HashedRegion {
    int atoms = 0;
    int vars = 0;
    bool empty = false;
    std::vector<std::vector<int>> clauses;
    std::vector<std::vector<char>> cached;
    bool has_cache = false;

    std::vector<std::vector<char>> enumerate(std::span<const XorConstraint> xors, std::size_t limit) const {
        std::vector<std::vector<char>> out;
        if (empty) return out;
        SatSolver solver;
        solver.reserve_vars(vars);
        for (const auto& c : clauses)
            if (!solver.add_clause(c)) return out;
        for (const auto& x : xors) {
            std::vector<int> v;
            for (auto c : x.indicators) v.push_back(c + 1);
            solver.add_xor(v, x.parity);
        }
        while (out.size() < limit && solver.solve()) {
            std::vector<char> world(static_cast<std::size_t>(atoms));
            std::vector<int> block;
            for (int v = 1; v <= atoms; ++v) {
                world[static_cast<std::size_t>(v - 1)] = solver.model_value(v);
                block.push_back(solver.model_value(v) ? -v : v);
            }
            out.push_back(std::move(world));
            if (block.empty() || !solver.add_clause(block)) break;
        }
        return out;
    }
};

class FnCounter final : public BoundedCounter {
public:
    using Fn = std::function<std::uint64_t(std::span<const XorConstraint>, std::uint64_t)>;
    FnCounter(std::size_t n, Fn fn) : n_(n), fn_(std::move(fn)) {}
    std::size_t num_indicators() const override { return n_; }
    std::uint64_t count_upto(std::span<const XorConstraint> xors, std::uint64_t limit) override {
        return fn_(xors, limit);
    }

private:
    std::size_t n_;
    Fn fn_;
};

std::vector<XorConstraint> random_rows(int m, int n, Rng& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<XorConstraint> rows(static_cast<std::size_t>(m));
    for (auto& row : rows) {
        for (int c = 0; c < n; ++c)
            if (coin(rng)) row.indicators.push_back(c);
        row.parity = coin(rng);
    }
    return rows;
}

}  // namespace

struct WorldSampler::Impl {
    bool exact = true;
    int atoms = 0;
    // exact path: counters[j] counts the models of strata j..n-1
    std::vector<std::unique_ptr<ComponentCounter>> counters;
    // hashed path, parallel to regions_
    std::vector<HashedRegion> hashed;
};

WorldSampler::~WorldSampler() = default;
WorldSampler::WorldSampler(WorldSampler&&) noexcept = default;

bool WorldSampler::exact() const noexcept { return impl_->exact; }

WorldSampler::WorldSampler(const StratifiedTheory& theory, const Signature& signature, int n_constants, Rng& rng,
                           const SynthConfig& cfg)
    : space_(signature, std::max(n_constants, 0)), cfg_(cfg), impl_(std::make_unique<Impl>()) {
    if (n_constants < 1) throw DomainError("synth: need at least one constant");
    for (const auto& wf : theory.formulas())
        for (const auto& l : wf.formula.literals)
            for (const auto& t : l.atom.args)
                if (!t.is_var()) throw DomainError("synth: generator formulas must be constant-free");

    std::vector<ConstId> constants(static_cast<std::size_t>(n_constants));
    std::iota(constants.begin(), constants.end(), 0);
    const int n_atoms = static_cast<int>(space_.num_atoms());
    impl_->atoms = n_atoms;
    const auto& strata = theory.strata();
    const std::size_t n = strata.size();

    // regions: the top one, then every stratum below level 1
    std::vector<std::size_t> region_strata{n};
    for (std::size_t s = 0; s < n; ++s)
        if (strata[s].level < 1.0) region_strata.push_back(s);

    impl_->exact = cfg_.exact_node_limit > 0;
    if (impl_->exact) try {
        std::vector<long double> m(n + 1, -1);
        auto counter = [&](std::size_t j) -> ComponentCounter& {
            if (impl_->counters.size() <= n) impl_->counters.resize(n + 1);
            auto& c = impl_->counters[j];
            if (!c) {
                auto cut = theory.cut_from(j);
                c = std::make_unique<ComponentCounter>(ground_all(cut, constants, space_), n_atoms,
                                                       cfg_.exact_node_limit);
            }
            return *c;
        };
        auto models = [&](std::size_t j) {
            if (m[j] < 0) m[j] = counter(j).count();
            return m[j];
        };
        for (auto s : region_strata) {
            SynthRegion info;
            info.stratum = s;
            info.exact = true;
            if (s == n) {
                info.possibility = 1.0;
                info.count = static_cast<double>(models(0));
            } else {
                info.possibility = 1.0 - strata[s].level;
                info.count = static_cast<double>(std::max(0.0L, models(s + 1) - models(s)));
            }
            regions_.push_back(info);
        }
    } catch (const BudgetError&) {
        impl_->exact = false;
        impl_->counters.clear();
        regions_.clear();
    }

    if (!impl_->exact) {
        for (auto s : region_strata) {
            HashedRegion r;
            r.atoms = r.vars = n_atoms;
            const auto above = s == n ? theory.cut_from(0) : theory.cut_from(s + 1);
            r.clauses = ground_all(above, constants, space_);
            for (const auto& c : r.clauses) r.empty = r.empty || c.empty();
            if (s < n) {
                bool bottom = false;
                std::vector<int> some_violated;
                for (const auto& f : strata[s].formulas) {
                    if (f.is_bottom()) {
                        bottom = true;
                        continue;
                    }
                    for (const auto& g : ground(f, constants)) {
                        auto lits = ground_lits(g, space_);
                        if (!lits) continue;
                        const int v = ++r.vars;
                        auto def = *lits;
                        def.push_back(v);
                        r.clauses.push_back(std::move(def));
                        for (int l : *lits) r.clauses.push_back({-v, -l});
                        some_violated.push_back(v);
                    }
                }
                if (!bottom) {
                    if (some_violated.empty()) r.empty = true;
                    r.clauses.push_back(std::move(some_violated));
                }
            }
            SynthRegion info;
            info.stratum = s;
            info.possibility = s == n ? 1.0 : 1.0 - strata[s].level;
            if (!r.empty) {
                FnCounter counter(static_cast<std::size_t>(n_atoms),
                                  [&r](std::span<const XorConstraint> xors, std::uint64_t limit) {
                                      return static_cast<std::uint64_t>(
                                          r.enumerate(xors, static_cast<std::size_t>(limit)).size());
                                  });
                auto res = approx_count(counter, cfg_.epsilon, cfg_.delta, approxmc_pivot(cfg_.epsilon), rng);
                info.count = res.estimate;
                info.exact = res.exact;
            } else {
                info.exact = true;
            }
            if (info.count > 0 && info.count <= static_cast<double>(cfg_.cache_limit)) {
                r.cached = r.enumerate({}, cfg_.cache_limit + 1);
                r.has_cache = true;
                info.count = static_cast<double>(r.cached.size());
                info.exact = true;
            }
            regions_.push_back(info);
            impl_->hashed.push_back(std::move(r));
        }
    }

    double total = 0;
    for (const auto& r : regions_) total += r.possibility * r.count;
    if (!(total > 0)) throw InfeasibleError("synth: no world has positive possibility");
    for (auto& r : regions_) r.probability = r.possibility * r.count / total;
}

LocalExample WorldSampler::draw(Rng& rng) {
    std::vector<double> weights;
    for (const auto& r : regions_) weights.push_back(r.probability);
    std::discrete_distribution<std::size_t> pick_region(weights.begin(), weights.end());
    const auto idx = pick_region(rng);
    const auto stratum = regions_[idx].stratum;
    std::uniform_real_distribution<long double> unit(0.0L, 1.0L);

    auto to_world = [&](const std::vector<char>& bits) {
        LocalExample w;
        w.width = space_.width();
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (bits[i]) w.atoms.push_back(space_.atom(i));
        w.normalize();
        return w;
    };

    if (impl_->exact) {
        const std::size_t n = impl_->counters.size() - 1;
        auto region_count = [&](std::span<const int> fixed) -> long double {
            if (stratum == n) return impl_->counters[0]->count(fixed);
            return std::max(0.0L, impl_->counters[stratum + 1]->count(fixed) - impl_->counters[stratum]->count(fixed));
        };
        std::vector<int> fixed;
        long double current = region_count(fixed);
        std::vector<char> bits(static_cast<std::size_t>(impl_->atoms));
        for (int v = 1; v <= impl_->atoms; ++v) {
            fixed.push_back(v);
            const long double with = std::min(current, region_count(fixed));
            if (unit(rng) * current < with) {
                bits[static_cast<std::size_t>(v - 1)] = 1;
                current = with;
            } else {
                fixed.back() = -v;
                current -= with;
            }
        }
        return to_world(bits);
    }

    const auto& r = impl_->hashed[idx];
    auto pick = [&](const std::vector<std::vector<char>>& cell) {
        std::uniform_int_distribution<std::size_t> u(0, cell.size() - 1);
        return to_world(cell[u(rng)]);
    };
    if (r.has_cache) return pick(r.cached);

    // cells of about cell_pivot worlds; only cells within [pivot/4, 4 pivot]
    // are accepted while attempts remain, then any non-empty cell
    const double pivot = static_cast<double>(cfg_.cell_pivot);
    const auto hi = static_cast<std::size_t>(4 * pivot);
    const auto lo = static_cast<std::size_t>(std::max(1.0, pivot / 4));
    int m = std::max(0, static_cast<int>(std::lround(std::log2(regions_[idx].count / pivot))));
    for (int attempt = 0; attempt < 200; ++attempt) {
        auto rows = random_rows(m, r.atoms, rng);
        auto cell = r.enumerate(rows, hi + 1);
        if (cell.size() > hi) {
            m = std::min(m + 1, r.atoms);
            continue;
        }
        if (cell.empty() || (cell.size() < lo && attempt < 100)) {
            m = std::max(m - 1, 0);
            continue;
        }
        return pick(cell);
    }
    throw BudgetError("synth: no usable XOR cell");
}

GlobalExample synth_generate(const StratifiedTheory& theory, const Signature& signature, int n_constants,
                             std::uint64_t seed, const SynthConfig& cfg) {
    Rng rng(seed);
    WorldSampler sampler(theory, signature, n_constants, rng, cfg);
    auto world = sampler.draw(rng);
    ConstantTable consts;
    for (int i = 1; i <= n_constants; ++i) consts.add("c" + std::to_string(i));
    return GlobalExample(signature, consts, world.atoms);
}

}  // namespace possrl
