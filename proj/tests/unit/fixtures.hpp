#pragma once

#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "possrl/logic.hpp"
#include "possrl/relational_data.hpp"

namespace fixtures {

inline const char* kExample1 =
    "fr(alice,bob)\n"
    "fr(bob,alice)\n"
    "fr(bob,eve)\n"
    "fr(eve,bob)\n"
    "sm(alice)\n";

inline possrl::Atom atom(possrl::PredId p, std::initializer_list<int> vars) {
    possrl::Atom a{p, {}};
    for (int v : vars) a.args.push_back(possrl::Term::var(v));
    return a;
}

inline possrl::Literal pos(possrl::PredId p, std::initializer_list<int> vars) { return {atom(p, vars), true}; }
inline possrl::Literal neg(possrl::PredId p, std::initializer_list<int> vars) { return {atom(p, vars), false}; }

/// Random example over predicates of the given arities.
inline possrl::GlobalExample random_example(std::mt19937_64& rng, int n_constants, const std::vector<int>& arities,
                                            double density) {
    possrl::Signature sig;
    possrl::ConstantTable consts;
    for (std::size_t i = 0; i < arities.size(); ++i) sig.add("p" + std::to_string(i), arities[i]);
    for (int c = 0; c < n_constants; ++c) consts.add("c" + std::to_string(c));
    std::vector<possrl::GroundAtom> atoms;
    std::bernoulli_distribution coin(density);
    for (std::size_t p = 0; p < arities.size(); ++p) {
        std::vector<int> args(static_cast<std::size_t>(arities[p]), 0);
        std::size_t total = 1;
        for (int i = 0; i < arities[p]; ++i) total *= static_cast<std::size_t>(n_constants);
        for (std::size_t code = 0; code < total; ++code) {
            auto rest = code;
            possrl::GroundAtom g{static_cast<possrl::PredId>(p), {}};
            for (int i = 0; i < arities[p]; ++i) {
                g.args.push_back(static_cast<int>(rest % static_cast<std::size_t>(n_constants)));
                rest /= static_cast<std::size_t>(n_constants);
            }
            if (coin(rng)) atoms.push_back(std::move(g));
        }
    }
    return possrl::GlobalExample(std::move(sig), std::move(consts), std::move(atoms));
}

}  // namespace fixtures
