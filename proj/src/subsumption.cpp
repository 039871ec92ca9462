#include <algorithm>
#include <map>

#include "possrl/logic.hpp"
#include "possrl/query_engine.hpp"

namespace possrl {

namespace {

int literal_code(const Literal& lit) { return lit.atom.pred * 2 + (lit.positive ? 0 : 1); }

}  // namespace

// c2 becomes a small database: its terms are the constants and each literal is
// a fact of a sign-encoded predicate. c1 becomes a query over that database.
bool theta_subsumes(const Clause& c1, const Clause& c2) {
    if (c1.all_diff && !c2.all_diff) return false;
    if (c1.literals.empty()) return true;

    Signature sig;
    std::map<int, PredId> code_pred;
    ConstantTable consts;
    std::map<Term, ConstId> term_id;
    auto term_const = [&](const Term& t) {
        auto [it, inserted] = term_id.try_emplace(t, 0);
        if (inserted) it->second = consts.add((t.is_var() ? "v" : "c") + std::to_string(t.id));
        return it->second;
    };
    auto pred_of = [&](const Literal& lit) {
        auto code = literal_code(lit);
        auto [it, inserted] = code_pred.try_emplace(code, 0);
        if (inserted)
            it->second = sig.add("p" + std::to_string(code) + "_" + std::to_string(lit.atom.args.size()),
                                 static_cast<int>(lit.atom.args.size()));
        return it->second;
    };
    std::vector<GroundAtom> facts;
    for (const auto& lit : c2.literals) {
        GroundAtom g{pred_of(lit), {}};
        for (const auto& t : lit.atom.args) g.args.push_back(term_const(t));
        facts.push_back(std::move(g));
    }

    ConjunctiveQuery q;
    q.all_diff = c1.all_diff;
    std::map<VarId, VarId> var_map;
    for (const auto& lit : c1.literals) {
        auto code = literal_code(lit);
        auto found = code_pred.find(code);
        if (found == code_pred.end()) return false;
        Atom a{found->second, {}};
        for (const auto& t : lit.atom.args) {
            if (t.is_var()) {
                auto [it, inserted] = var_map.try_emplace(t.id, 0);
                if (inserted) it->second = q.add_var();
                a.args.push_back(Term::var(it->second));
            } else {
                auto c = term_id.find(t);
                if (c == term_id.end()) return false;
                a.args.push_back(Term::constant(c->second));
            }
        }
        if (sig[a.pred].arity != static_cast<int>(a.args.size())) return false;
        q.literals.push_back({std::move(a), true});
    }
    GlobalExample db(std::move(sig), std::move(consts), std::move(facts));
    return satisfiable(q, db);
}

bool theta_subsumes(const HornRule& r1, const HornRule& r2) {
    return theta_subsumes(r1.to_clause(), r2.to_clause());
}

}  // namespace possrl
