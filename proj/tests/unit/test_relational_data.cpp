#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "possrl/errors.hpp"
#include "possrl/relational_data.hpp"

using namespace possrl;

namespace {

GroundAtom ga(PredId p, std::vector<ConstId> args) { return {p, std::move(args)}; }

// number of bijections S -> 0..k-1 mapping the fragment to itself
std::size_t automorphisms(const GlobalExample& ex, const std::vector<ConstId>& subset) {
    auto frag = fragment(ex, subset);
    std::set<GroundAtom> atoms(frag.atoms.begin(), frag.atoms.end());
    std::vector<int> perm(subset.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t count = 0;
    do {
        bool ok = true;
        for (const auto& a : frag.atoms) {
            GroundAtom img{a.pred, {}};
            for (auto c : a.args) {
                auto i = std::find(subset.begin(), subset.end(), c) - subset.begin();
                img.args.push_back(subset[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
            }
            if (!atoms.contains(img)) {
                ok = false;
                break;
            }
        }
        if (ok) ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return count;
}

double factorial(std::size_t n) { return n <= 1 ? 1.0 : static_cast<double>(n) * factorial(n - 1); }

}  // namespace

TEST_CASE("parse Example 1") {
    auto ex = parse_example(fixtures::kExample1);
    CHECK(ex.atoms().size() == 5);
    CHECK(ex.num_constants() == 3);
    CHECK(ex.signature().size() == 2);
    auto fr = *ex.signature().find("fr");
    auto alice = *ex.constants().find("alice");
    auto bob = *ex.constants().find("bob");
    CHECK(ex.contains(fr, std::vector<ConstId>{alice, bob}));
    CHECK_FALSE(ex.contains(fr, std::vector<ConstId>{alice, alice}));
}

TEST_CASE("parse edge cases") {
    auto empty = parse_example("");
    CHECK(empty.atoms().empty());
    CHECK(empty.num_constants() == 0);

    CHECK_THROWS_AS(parse_example("fr(a,b)\nfr(a,b,c)\n"), SignatureError);

    try {
        parse_example("sm(a)\n# note\nfr(a,\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }

    auto isolated = parse_example("@constants zed\nsm(a) # smoker\n");
    CHECK(isolated.num_constants() == 2);
    std::vector<std::string> extra{"y"};
    CHECK(parse_example("sm(a)", extra).num_constants() == 2);
}

TEST_CASE("format round-trips") {
    auto ex = parse_example(std::string(fixtures::kExample1) + "@constants carl\n");
    auto again = parse_example(format_example(ex));
    CHECK(again.atoms().size() == ex.atoms().size());
    CHECK(again.num_constants() == ex.num_constants());
    CHECK(format_example(again) == format_example(ex));
}

TEST_CASE("fragments of Example 1") {
    auto ex = parse_example(fixtures::kExample1);
    auto fr = *ex.signature().find("fr");
    auto sm = *ex.signature().find("sm");
    ConstId alice = 0, bob = 1, eve = 2;

    auto ab = fragment(ex, std::vector<ConstId>{alice, bob});
    std::vector<GroundAtom> expect{ga(fr, {alice, bob}), ga(fr, {bob, alice}), ga(sm, {alice})};
    std::sort(expect.begin(), expect.end());
    CHECK(ab.atoms == expect);

    auto ae = fragment(ex, std::vector<ConstId>{alice, eve});
    CHECK(ae.atoms == std::vector<GroundAtom>{ga(sm, {alice})});
    CHECK(fragment(ex, std::vector<ConstId>{}).atoms.empty());
    CHECK(fragment(ex, ex.constant_ids()).atoms == ex.atoms());
    CHECK_THROWS_AS(fragment(ex, std::vector<ConstId>{7}), DomainError);
}

TEST_CASE("local classes of Example 1") {
    auto ex = parse_example(fixtures::kExample1);
    auto fr = *ex.signature().find("fr");
    auto sm = *ex.signature().find("sm");

    auto cls = local_class(ex, std::vector<ConstId>{0, 1});
    REQUIRE(cls.size() == 2);
    std::set<std::vector<GroundAtom>> got;
    for (const auto& l : cls) got.insert(l.atoms);
    std::vector<GroundAtom> first{ga(fr, {0, 1}), ga(fr, {1, 0}), ga(sm, {0})};
    std::vector<GroundAtom> second{ga(fr, {0, 1}), ga(fr, {1, 0}), ga(sm, {1})};
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    CHECK(got.contains(first));
    CHECK(got.contains(second));

    auto single = local_class(ex, std::vector<ConstId>{0});
    REQUIRE(single.size() == 1);
    CHECK(single[0].atoms == std::vector<GroundAtom>{ga(sm, {0})});

    auto sym = parse_example("fr(a,b)\nfr(b,a)\n");
    CHECK(local_class(sym, std::vector<ConstId>{0, 1}).size() == 1);
}

TEST_CASE("local class members are distinct, isomorphic and k!/|Aut| many") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        auto ex = fixtures::random_example(rng, 5, {1, 2}, 0.3);
        for (std::size_t k = 1; k <= 3; ++k) {
            for_each_subset(5, k, [&](std::span<const ConstId> s) {
                std::vector<ConstId> subset(s.begin(), s.end());
                auto cls = local_class(ex, subset);
                std::set<LocalExample> uniq(cls.begin(), cls.end());
                CHECK(uniq.size() == cls.size());
                for (const auto& m : cls) CHECK(isomorphic(m, cls.front()));
                CHECK(static_cast<double>(cls.size()) == factorial(k) / static_cast<double>(automorphisms(ex, subset)));
                return true;
            });
        }
    }
}

TEST_CASE("marginal sums to one") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_int_distribution<int> nd(3, 6);
        int n = nd(rng);
        auto ex = fixtures::random_example(rng, n, {1, 2}, 0.35);
        for (int k = 1; k <= 3; ++k) {
            std::map<LocalExample, double> p;
            double subsets = binomial(static_cast<std::size_t>(n), static_cast<std::size_t>(k));
            for_each_subset(static_cast<std::size_t>(n), static_cast<std::size_t>(k), [&](std::span<const ConstId> s) {
                auto cls = local_class(ex, s);
                for (const auto& m : cls) p[m] += 1.0 / subsets / static_cast<double>(cls.size());
                return true;
            });
            double total = 0;
            for (const auto& [w, v] : p) total += v;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("sampler matches the enumerated marginal (chi-square, alpha 0.01)") {
    auto ex = parse_example(fixtures::kExample1);
    std::map<LocalExample, double> p;
    for_each_subset(3, 2, [&](std::span<const ConstId> s) {
        auto cls = local_class(ex, s);
        for (const auto& m : cls) p[m] += 1.0 / 3.0 / static_cast<double>(cls.size());
        return true;
    });
    REQUIRE(p.size() == 5);
    Rng rng(2024);
    const int draws = 60000;
    std::map<LocalExample, int> seen;
    std::map<std::uint64_t, int> by_class;
    for (int i = 0; i < draws; ++i) {
        auto w = sample_marginal(ex, 2, rng);
        REQUIRE(p.contains(w));
        ++seen[w];
        ++by_class[wl_hash(w)];
    }
    double chi2 = 0;
    for (const auto& [w, prob] : p) {
        double e = prob * draws;
        double d = seen[w] - e;
        chi2 += d * d / e;
    }
    CHECK(chi2 < 13.277);  // df = 4
    CHECK(by_class.size() == 3);
    for (const auto& [h, c] : by_class) {
        double sigma = std::sqrt(draws * (1.0 / 3) * (2.0 / 3));
        CHECK(std::abs(c - draws / 3.0) < 3 * sigma);
    }
    CHECK_THROWS_AS(sample_marginal(ex, 0, rng), DomainError);
    CHECK_THROWS_AS(sample_marginal(ex, 4, rng), DomainError);
    auto whole = sample_marginal(ex, 3, rng);
    CHECK(isomorphic(as_global(whole, ex.signature()), ex));
}

TEST_CASE("world space masks") {
    auto ex = parse_example(fixtures::kExample1);
    WorldSpace space(ex.signature(), 2);
    CHECK(space.num_atoms() == 6);
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        auto w = sample_marginal(ex, 2, rng);
        auto mask = space.to_mask(w);
        CHECK(space.from_mask(mask) == w);
        std::vector<int> swap{1, 0};
        auto back = space.permute(space.permute(mask, swap), swap);
        CHECK(back == mask);
        CHECK(isomorphic(space.from_mask(space.permute(mask, swap)), w));
    }
}

TEST_CASE("subset enumeration and binomials") {
    std::size_t count = 0;
    for_each_subset(6, 3, [&](std::span<const ConstId>) { return ++count, true; });
    CHECK(count == 20);
    CHECK(binomial(6, 3) == 20);
    CHECK(binomial(3, 5) == 0);
    CHECK(binomial(4, 0) == 1);
}
