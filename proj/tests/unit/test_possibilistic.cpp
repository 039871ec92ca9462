#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "possrl/errors.hpp"
#include "possrl/possibilistic.hpp"
#include "possrl/sat.hpp"

using namespace possrl;
using fixtures::neg;
using fixtures::pos;

namespace {

GroundAtom ga(PredId p, std::initializer_list<int> args) { return {p, std::vector<ConstId>(args)}; }

LocalExample world(int width, std::vector<GroundAtom> atoms) {
    LocalExample w{width, std::move(atoms)};
    w.normalize();
    return w;
}

Clause ground_clause(PredId p, std::initializer_list<int> args, bool positive = true) {
    Atom a{p, {}};
    for (int c : args) a.args.push_back(Term::constant(c));
    return Clause({{a, positive}});
}

// P_{Y,k}(w) by subset enumeration and class expansion.
std::map<LocalExample, double> marginal_oracle(const GlobalExample& data, int k) {
    std::map<LocalExample, double> p;
    const double total = binomial(data.num_constants(), static_cast<std::size_t>(k));
    for_each_subset(data.num_constants(), static_cast<std::size_t>(k), [&](std::span<const ConstId> s) {
        auto members = local_class(data, s);
        for (const auto& m : members) p[m] += 1.0 / (total * static_cast<double>(members.size()));
        return true;
    });
    return p;
}

struct SmallTheory {
    Signature sig;
    StratifiedTheory theory;
};

// Clauses over p/1, q/1, r/2 and two variables; 8 ground atoms over 2 constants.
SmallTheory random_theory(std::mt19937_64& rng, int n_formulas, bool with_bottom) {
    SmallTheory out;
    out.sig.add("p", 1);
    out.sig.add("q", 1);
    out.sig.add("r", 2);
    std::uniform_int_distribution<int> pred(0, 2), var(0, 1), len(1, 3), level(1, 9);
    std::bernoulli_distribution coin(0.5);
    std::vector<WeightedFormula> wfs;
    for (int i = 0; i < n_formulas; ++i) {
        std::vector<Literal> lits;
        for (int j = len(rng); j > 0; --j) {
            int p = pred(rng);
            lits.push_back(p == 2 ? Literal{fixtures::atom(p, {var(rng), var(rng)}), coin(rng)}
                                  : Literal{fixtures::atom(p, {var(rng)}), coin(rng)});
        }
        wfs.push_back({Clause(std::move(lits), coin(rng)), level(rng) / 10.0});
    }
    if (with_bottom) {
        double lowest = 1.0;
        for (const auto& wf : wfs) lowest = std::min(lowest, wf.weight);
        wfs.push_back({Clause::bottom(), lowest});
    }
    out.theory = StratifiedTheory(wfs);
    return out;
}

std::vector<GroundLiteral> random_evidence(std::mt19937_64& rng, const std::vector<GroundAtom>& atoms, int n) {
    std::vector<GroundLiteral> ev;
    std::vector<GroundAtom> pool = atoms;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < n && i < static_cast<int>(pool.size()); ++i) ev.push_back({pool[i], coin(rng)});
    return ev;
}

bool cut_consistent(const std::vector<Clause>& cut, std::span<const ConstId> consts,
                    std::span<const GroundLiteral> ev) {
    return solve(ground_to_cnf(cut, consts, ev)).satisfiable;
}

}  // namespace

TEST_CASE("stratified theory keeps levels strictly increasing") {
    StratifiedTheory t;
    Clause a({pos(0, {0})}), b({neg(0, {0})});
    t.add(a, 0.5);
    t.add(b, 0.2);
    t.add(b, 0.5);
    t.add(a, 0.5);
    REQUIRE(t.num_strata() == 2);
    CHECK(t.strata()[0].level == 0.2);
    CHECK(t.strata()[1].level == 0.5);
    CHECK(t.strata()[1].formulas.size() == 2);
    CHECK(t.size() == 3);
    CHECK(t.cut(0.3).size() == 2);
    CHECK(t.cut(0.0).size() == 3);
    CHECK(t.hard().empty());
    CHECK_THROWS_AS(t.add(a, 1.5), DomainError);
    CHECK_THROWS_AS(t.add(a, -0.1), DomainError);
    CHECK_THROWS_AS(t.add(Clause::bottom(), 0.5), DomainError);
    t.add(Clause::bottom(), 0.2);
    CHECK(t.has_bottom());
    CHECK_THROWS_AS(t.add(a, 0.1), DomainError);
}

TEST_CASE("possibility of a two-formula theory") {
    Signature sig;
    sig.add("p", 1);
    StratifiedTheory t;
    t.add(Clause::bottom(), 0.2);
    t.add(ground_clause(0, {0}), 0.8);
    CHECK(possibility(t, world(1, {ga(0, {0})}), sig) == doctest::Approx(0.8));
    CHECK(possibility(t, world(1, {}), sig) == doctest::Approx(0.2));
    StratifiedTheory empty;
    CHECK(possibility(empty, world(1, {}), sig) == 1.0);
    CHECK(possibility(empty, world(1, {ga(0, {0})}), sig) == 1.0);
}

TEST_CASE("exact encoding of Example 1 at width 1") {
    auto data = parse_example(fixtures::kExample1);
    const auto& sig = data.signature();
    auto fr = *sig.find("fr"), sm = *sig.find("sm");
    auto t = exact_encoding(data, 1);
    REQUIRE(t.size() == 4);
    REQUIRE(t.num_strata() == 3);
    CHECK(t.strata()[0].level == doctest::Approx(1.0 / 3));
    CHECK(t.strata()[1].level == doctest::Approx(2.0 / 3));
    CHECK(t.strata()[2].level == 1.0);
    CHECK(t.strata()[2].formulas.size() == 2);
    CHECK(possibility(t, world(1, {ga(sm, {0})}), sig) == doctest::Approx(1.0 / 3));
    CHECK(possibility(t, world(1, {}), sig) == doctest::Approx(2.0 / 3));
    CHECK(possibility(t, world(1, {ga(fr, {0, 0})}), sig) == doctest::Approx(0.0));
    CHECK(possibility(t, world(1, {ga(fr, {0, 0}), ga(sm, {0})}), sig) == doctest::Approx(0.0));
}

TEST_CASE("class cardinalities at width 2") {
    auto data = parse_example(fixtures::kExample1);
    auto fr = *data.signature().find("fr"), sm = *data.signature().find("sm");
    auto classes = marginal_classes(data, 2);
    std::uint64_t total = 0;
    for (const auto& c : classes) total += c.cardinality;
    CHECK(total == 64);  // 6 atoms of L_2
    auto card_of = [&](LocalExample w) {
        w.normalize();
        for (const auto& c : classes) {
            auto members = local_class(as_global(c.representative, data.signature()), std::vector<ConstId>{0, 1});
            if (std::find(members.begin(), members.end(), w) != members.end()) return c.cardinality;
        }
        return std::uint64_t{0};
    };
    CHECK(card_of(world(2, {ga(fr, {0, 1}), ga(fr, {1, 0}), ga(sm, {0})})) == 2);
    CHECK(card_of(world(2, {ga(fr, {0, 1}), ga(fr, {1, 0})})) == 1);
}

TEST_CASE("exact encoding of empty data") {
    Signature sig;
    sig.add("sm", 1);
    sig.add("fr", 2);
    ConstantTable consts;
    consts.add("a");
    consts.add("b");
    GlobalExample data(sig, consts, {});
    auto t = exact_encoding(data, 1);
    REQUIRE(t.num_strata() == 1);
    CHECK(t.strata()[0].level == 1.0);
    CHECK(t.size() == 3);
    CHECK(possibility(t, world(1, {}), sig) == 1.0);
    CHECK(possibility(t, world(1, {ga(0, {0})}), sig) == 0.0);
}

TEST_CASE("exact encoding size cap") {
    auto data = parse_example(fixtures::kExample1);
    CHECK_THROWS_AS(exact_encoding(data, 2, 5), SizeError);
    CHECK_THROWS_AS(exact_encoding(data, 4), DomainError);
}

TEST_CASE("exact encoding reproduces the marginal on random data") {
    std::mt19937_64 rng(11);
    const std::vector<std::vector<int>> signatures = {{1}, {2}, {1, 2}, {1, 1}, {0, 2}};
    for (int trial = 0; trial < 40; ++trial) {
        const auto& arities = signatures[static_cast<std::size_t>(trial) % signatures.size()];
        int n = 2 + trial % 3;
        int k = 1 + trial % 2;
        auto data = fixtures::random_example(rng, n, arities, 0.4);
        auto t = exact_encoding(data, k);
        auto oracle = marginal_oracle(data, k);
        WorldSpace space(data.signature(), k);
        double sum = 0;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << space.num_atoms()); ++mask) {
            auto w = space.from_mask(mask);
            double pi = possibility(t, w, data.signature());
            auto it = oracle.find(w);
            CHECK(pi == doctest::Approx(it == oracle.end() ? 0.0 : it->second).epsilon(1e-9));
            sum += pi;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("exact encoding at width 3 fits the default cap") {
    Signature sig;
    sig.add("a", 1);
    sig.add("b", 1);
    std::mt19937_64 rng(4);
    auto data = fixtures::random_example(rng, 5, {1, 1}, 0.5);
    auto t = exact_encoding(data, 3);
    WorldSpace space(data.signature(), 3);
    double sum = 0;
    for (std::uint64_t mask = 0; mask < 64; ++mask) sum += possibility(t, space.from_mask(mask), data.signature());
    CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("theory text round trip") {
    Signature sig;
    ConstantTable consts;
    const char* text =
        "1.0 :: !fr(X,Y) v fr(Y,X)\n"
        "# comment\n"
        "\n"
        "0.75 :: !sm(X) v !fr(X,Y) v sm(Y) @nodiff\n"
        "0.75 :: sm(alice)\n"
        "0.1 :: _bot_\n";
    auto t = parse_theory(text, sig, consts);
    CHECK(t.num_strata() == 3);
    CHECK(t.has_bottom());
    CHECK(sig.size() == 2);
    CHECK(consts.find("alice").has_value());
    auto once = format_theory(t, sig, &consts);
    CHECK(once.rfind("1.0 :: ", 0) == 0);
    Signature sig2;
    ConstantTable consts2;
    auto t2 = parse_theory(once, sig2, consts2);
    CHECK(format_theory(t2, sig2, &consts2) == once);
    CHECK(t2.strata()[1].formulas[0].all_diff == false);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        auto st = random_theory(rng, 6, trial % 2 == 0);
        auto out = format_theory(st.theory, st.sig);
        Signature s2 = st.sig;
        ConstantTable c2;
        auto back = parse_theory(out, s2, c2);
        CHECK(format_theory(back, s2) == out);
        CHECK(back.size() == st.theory.size());
    }
}

TEST_CASE("weights print with full precision") {
    CHECK(format_weight(1.0) == "1.0");
    CHECK(format_weight(0.0) == "0.0");
    CHECK(std::stod(format_weight(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("theory parse errors carry the line") {
    Signature sig;
    ConstantTable consts;
    try {
        parse_theory("0.5 :: p(X)\nbad line\n", sig, consts);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_theory("x :: p(X)\n", sig, consts), ParseError);
    CHECK_THROWS_AS(parse_theory("1.5 :: p(X)\n", sig, consts), ParseError);
    CHECK_THROWS_AS(parse_theory("0.5 :: p(X,Y)\n", sig, consts), ParseError);
    CHECK_THROWS_AS(parse_theory("0.5 :: p(X v q(Y)\n", sig, consts), ParseError);
}

TEST_CASE("map cutoff examples") {
    StratifiedTheory t;
    t.add(Clause::bottom(), 0.2);
    t.add(ground_clause(0, {0}), 0.8);
    std::vector<ConstId> consts{0};
    auto cut = map_cutoff(t, {}, consts);
    REQUIRE(cut.level.has_value());
    CHECK(*cut.level == 0.8);
    REQUIRE(cut.formulas.size() == 1);
    CHECK(cut.formulas[0] == ground_clause(0, {0}));

    std::vector<GroundLiteral> ev{{ga(0, {0}), false}};
    auto empty = map_cutoff(t, ev, consts);
    CHECK_FALSE(empty.level.has_value());
    CHECK(empty.formulas.empty());
    CHECK(empty.first_stratum == t.num_strata());

    std::vector<GroundLiteral> bad{{ga(0, {0}), false}, {ga(0, {0}), true}};
    CHECK_THROWS_AS(map_cutoff(t, bad, consts), EvidenceError);
}

TEST_CASE("map cutoff matches a linear scan within the call bound") {
    std::mt19937_64 rng(21);
    std::vector<ConstId> consts{0, 1};
    for (int trial = 0; trial < 150; ++trial) {
        auto st = random_theory(rng, 6 + trial % 5, trial % 3 == 0);
        WorldSpace space(st.sig, 2);
        auto ev = random_evidence(rng, space.atoms(), trial % 4);
        const auto& strata = st.theory.strata();
        std::size_t expected = strata.size();
        for (std::size_t i = 0; i < strata.size(); ++i)
            if (cut_consistent(st.theory.cut_from(i), consts, ev)) {
                expected = i;
                break;
            }
        auto cut = map_cutoff(st.theory, ev, consts);
        CHECK(cut.first_stratum == expected);
        const double n = static_cast<double>(strata.size());
        CHECK(cut.sat_calls <= static_cast<std::uint64_t>(std::ceil(std::log2(n + 1))) + 1);
        if (expected < strata.size()) {
            REQUIRE(cut.level.has_value());
            CHECK(*cut.level == strata[expected].level);
        }
    }
}

TEST_CASE("map entailment examples") {
    Signature sig;
    auto p = sig.add("p", 1);
    auto q = sig.add("q", 1);
    StratifiedTheory t;
    t.add(Clause::bottom(), 0.2);
    t.add(ground_clause(p, {0}), 0.8);
    std::vector<ConstId> one{0};
    CHECK(map_entails(t, {}, one, ga(p, {0})));
    CHECK_FALSE(map_entails(t, {}, one, ga(q, {0})));

    StratifiedTheory sym;
    sym.add(Clause({neg(0, {0, 1}), pos(0, {1, 0})}), 1.0);
    std::vector<ConstId> two{0, 1};
    std::vector<GroundLiteral> ev{{ga(0, {0, 1}), true}};
    CHECK(map_entails(sym, ev, two, ga(0, {1, 0})));
    CHECK_FALSE(map_entails(sym, ev, two, ga(0, {0, 0})));
    auto pred = map_prediction(sym, ev, two);
    CHECK(pred == std::vector<GroundAtom>{ga(0, {0, 1}), ga(0, {1, 0})});

    StratifiedTheory empty;
    std::vector<GroundLiteral> sm{{ga(0, {0}), true}};
    CHECK(map_prediction(empty, sm, one) == std::vector<GroundAtom>{ga(0, {0})});
    CHECK(map_prediction(empty, {}, one).empty());
}

TEST_CASE("map entailment agrees with the pi-maximal worlds") {
    std::mt19937_64 rng(8);
    std::vector<ConstId> consts{0, 1};
    for (int trial = 0; trial < 120; ++trial) {
        auto st = random_theory(rng, 3 + trial % 6, trial % 2 == 1);
        WorldSpace space(st.sig, 2);
        REQUIRE(space.num_atoms() == 8);
        auto ev = random_evidence(rng, space.atoms(), trial % 4);

        double best = -1;
        std::vector<std::uint64_t> argmax;
        for (std::uint64_t mask = 0; mask < 256; ++mask) {
            bool extends = true;
            for (const auto& l : ev)
                if (((mask >> space.index_of(l.atom)) & 1) != (l.positive ? 1u : 0u)) extends = false;
            if (!extends) continue;
            double pi = possibility(st.theory, space.from_mask(mask), st.sig);
            if (pi > best + 1e-12) {
                best = pi;
                argmax.clear();
            }
            if (std::abs(pi - best) <= 1e-12) argmax.push_back(mask);
        }
        MapEngine engine(st.theory, consts, ev);
        std::vector<GroundAtom> expected;
        for (std::size_t i = 0; i < space.num_atoms(); ++i) {
            bool all = std::all_of(argmax.begin(), argmax.end(), [&](auto m) { return ((m >> i) & 1) != 0; });
            CHECK(engine.entails(space.atom(i)) == all);
            if (all) expected.push_back(space.atom(i));
        }
        std::sort(expected.begin(), expected.end());
        CHECK(engine.prediction() == expected);
        for (const auto& l : ev)
            if (l.positive) CHECK(engine.entails(l.atom));
    }
}

TEST_CASE("edits below a cut leave its verdict unchanged") {
    std::mt19937_64 rng(5);
    std::vector<ConstId> consts{0, 1};
    for (int trial = 0; trial < 60; ++trial) {
        auto st = random_theory(rng, 8, false);
        WorldSpace space(st.sig, 2);
        auto ev = random_evidence(rng, space.atoms(), 2);
        const auto& strata = st.theory.strata();
        if (strata.size() < 2) continue;
        std::size_t i = 1 + static_cast<std::size_t>(trial) % (strata.size() - 1);
        const double mu = strata[i].level;
        bool before = cut_consistent(st.theory.cut(mu), consts, ev);
        auto noise = random_theory(rng, 4, false);
        StratifiedTheory edited;
        for (const auto& wf : st.theory.formulas())
            if (wf.weight >= mu) edited.add(wf);
        for (const auto& wf : noise.theory.formulas()) edited.add(wf.formula, wf.weight * mu * 0.99);
        CHECK(cut_consistent(edited.cut(mu), consts, ev) == before);
    }
}
