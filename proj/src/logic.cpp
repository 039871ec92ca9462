#include "possrl/logic.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <stdexcept>

#include "possrl/errors.hpp"

namespace possrl {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    // splitmix64 finaliser over a running combination
    std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t mix_sorted(std::vector<std::uint64_t> values, std::uint64_t seed) {
    std::sort(values.begin(), values.end());
    std::uint64_t h = seed;
    for (auto v : values) h = mix(h, v);
    return h;
}

}  // namespace

PredId Signature::add(std::string_view name, int arity) {
    if (name.empty()) throw SignatureError("empty predicate name");
    if (arity < 0 || arity > kMaxArity)
        throw SignatureError("predicate " + std::string(name) + ": arity " + std::to_string(arity) +
                             " unsupported (max " + std::to_string(kMaxArity) + ")");
    if (auto it = index_.find(std::string(name)); it != index_.end()) {
        if (preds_[static_cast<std::size_t>(it->second)].arity != arity)
            throw SignatureError("predicate " + std::string(name) + " used with arities " +
                                 std::to_string(preds_[static_cast<std::size_t>(it->second)].arity) +
                                 " and " + std::to_string(arity));
        return it->second;
    }
    auto id = static_cast<PredId>(preds_.size());
    preds_.push_back({std::string(name), arity});
    index_.emplace(std::string(name), id);
    return id;
}

std::optional<PredId> Signature::find(std::string_view name) const {
    if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
    return std::nullopt;
}

ConstId ConstantTable::add(std::string_view name) {
    if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
    if (names_.size() >= static_cast<std::size_t>(kMaxConstants))
        throw DomainError("too many constants (max " + std::to_string(kMaxConstants) + ")");
    auto id = static_cast<ConstId>(names_.size());
    names_.emplace_back(name);
    index_.emplace(std::string(name), id);
    return id;
}

std::optional<ConstId> ConstantTable::find(std::string_view name) const {
    if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

Clause::Clause(std::vector<Literal> lits, bool diff) : literals(std::move(lits)), all_diff(diff) {
    normalize();
}

bool Clause::is_ground() const {
    for (const auto& l : literals)
        for (const auto& t : l.atom.args)
            if (t.is_var()) return false;
    return true;
}

bool Clause::is_tautology() const {
    for (std::size_t i = 0; i < literals.size(); ++i)
        for (std::size_t j = i + 1; j < literals.size(); ++j)
            if (literals[i].positive != literals[j].positive && literals[i].atom == literals[j].atom)
                return true;
    return false;
}

std::vector<VarId> Clause::variables() const {
    std::vector<VarId> vars;
    for (const auto& l : literals)
        for (const auto& t : l.atom.args)
            if (t.is_var()) vars.push_back(t.id);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
}

void Clause::normalize() {
    std::sort(literals.begin(), literals.end());
    literals.erase(std::unique(literals.begin(), literals.end()), literals.end());
    std::unordered_map<VarId, VarId> rename;
    for (const auto& l : literals)
        for (const auto& t : l.atom.args)
            if (t.is_var() && !rename.contains(t.id)) {
                auto next = static_cast<VarId>(rename.size());
                rename.emplace(t.id, next);
            }
    bool identity = true;
    for (auto [from, to] : rename) identity &= (from == to);
    if (identity) return;
    for (auto& l : literals)
        for (auto& t : l.atom.args)
            if (t.is_var()) t.id = rename.at(t.id);
    std::sort(literals.begin(), literals.end());
    literals.erase(std::unique(literals.begin(), literals.end()), literals.end());
}

Clause HornRule::to_clause() const {
    std::vector<Literal> lits;
    lits.reserve(body.size() + 1);
    for (const auto& b : body) lits.push_back({b, false});
    lits.push_back({head, true});
    Clause c;
    c.literals = std::move(lits);
    c.all_diff = all_diff;
    std::sort(c.literals.begin(), c.literals.end());
    c.literals.erase(std::unique(c.literals.begin(), c.literals.end()), c.literals.end());
    return c;
}

std::vector<VarId> HornRule::variables() const {
    std::vector<VarId> vars;
    auto collect = [&](const Atom& a) {
        for (const auto& t : a.args)
            if (t.is_var()) vars.push_back(t.id);
    };
    collect(head);
    for (const auto& b : body) collect(b);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
}

Atom apply(const Atom& atom, const Substitution& theta) {
    Atom out{atom.pred, {}};
    out.args.reserve(atom.args.size());
    for (const auto& t : atom.args)
        out.args.push_back(t.is_var() && static_cast<std::size_t>(t.id) < theta.size() ? theta[static_cast<std::size_t>(t.id)] : t);
    return out;
}

Clause apply(const Clause& clause, const Substitution& theta) {
    Clause out;
    out.all_diff = clause.all_diff;
    for (const auto& l : clause.literals) out.literals.push_back({possrl::apply(l.atom, theta), l.positive});
    std::sort(out.literals.begin(), out.literals.end());
    out.literals.erase(std::unique(out.literals.begin(), out.literals.end()), out.literals.end());
    return out;
}

std::size_t GroundAtomHash::operator()(const GroundAtom& a) const noexcept {
    std::uint64_t h = mix(0x51ed2701ULL, static_cast<std::uint64_t>(a.pred));
    for (auto c : a.args) h = mix(h, static_cast<std::uint64_t>(c));
    return static_cast<std::size_t>(h);
}

GroundAtom ground_atom(const Atom& atom, const Substitution& theta) {
    GroundAtom g{atom.pred, {}};
    g.args.reserve(atom.args.size());
    for (const auto& t : atom.args) {
        if (t.is_var()) {
            const auto& v = theta.at(static_cast<std::size_t>(t.id));
            if (v.is_var()) throw std::logic_error("ground_atom: unbound variable");
            g.args.push_back(v.id);
        } else {
            g.args.push_back(t.id);
        }
    }
    return g;
}

void for_each_grounding(const Clause& clause, std::span<const ConstId> constants,
                        const std::function<bool(const Substitution&)>& visit) {
    const auto vars = clause.variables();
    const std::size_t width = vars.empty() ? 0 : static_cast<std::size_t>(vars.back()) + 1;
    Substitution theta(width, Term::var(-1));
    std::vector<char> used(constants.size(), 0);
    bool stop = false;

    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (stop) return;
        if (i == vars.size()) {
            if (!visit(theta)) stop = true;
            return;
        }
        for (std::size_t c = 0; c < constants.size() && !stop; ++c) {
            if (clause.all_diff && used[c]) continue;
            theta[static_cast<std::size_t>(vars[i])] = Term::constant(constants[c]);
            used[c] = 1;
            rec(i + 1);
            used[c] = 0;
        }
    };
    rec(0);
}

std::vector<GroundClause> ground(const Clause& clause, std::span<const ConstId> constants) {
    std::vector<GroundClause> out;
    for_each_grounding(clause, constants, [&](const Substitution& theta) {
        GroundClause g;
        g.reserve(clause.literals.size());
        for (const auto& l : clause.literals) g.push_back({ground_atom(l.atom, theta), l.positive});
        out.push_back(std::move(g));
        return true;
    });
    return out;
}

std::vector<GroundClause> ground(const HornRule& rule, std::span<const ConstId> constants) {
    return ground(rule.to_clause(), constants);
}

// ---------------------------------------------------------------------------

void Structure::normalize() {
    std::sort(tuples.begin(), tuples.end());
    tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
    if (colors.size() != static_cast<std::size_t>(num_elements)) colors.resize(static_cast<std::size_t>(num_elements), 0);
}

std::vector<std::uint64_t> wl_labels(const Structure& s, int rounds) {
    const auto n = static_cast<std::size_t>(s.num_elements);
    std::vector<std::uint64_t> label(n);
    for (std::size_t e = 0; e < n; ++e) label[e] = mix(0x1234ULL, static_cast<std::uint64_t>(s.colors.empty() ? 0 : s.colors[e]));

    // incidence lists: element -> (tuple index, position)
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> inc(n);
    for (std::size_t t = 0; t < s.tuples.size(); ++t)
        for (std::size_t p = 0; p < s.tuples[t].second.size(); ++p)
            inc[static_cast<std::size_t>(s.tuples[t].second[p])].emplace_back(t, p);

    std::vector<std::uint64_t> tuple_label(s.tuples.size());
    for (int r = 0; r < rounds; ++r) {
        for (std::size_t t = 0; t < s.tuples.size(); ++t) {
            std::uint64_t h = mix(0xabcdULL, static_cast<std::uint64_t>(s.tuples[t].first));
            for (int e : s.tuples[t].second) h = mix(h, label[static_cast<std::size_t>(e)]);
            tuple_label[t] = h;
        }
        std::vector<std::uint64_t> next(n);
        for (std::size_t e = 0; e < n; ++e) {
            std::vector<std::uint64_t> around;
            around.reserve(inc[e].size());
            for (auto [t, p] : inc[e]) around.push_back(mix(tuple_label[t], p));
            next[e] = mix_sorted(std::move(around), label[e]);
        }
        label = std::move(next);
    }
    return label;
}

std::uint64_t wl_hash(const Structure& s, int rounds) {
    auto labels = wl_labels(s, rounds);
    std::vector<std::uint64_t> tuple_hashes;
    tuple_hashes.reserve(s.tuples.size());
    for (const auto& [code, elems] : s.tuples) {
        std::uint64_t h = mix(0x77ULL, static_cast<std::uint64_t>(code));
        for (int e : elems) h = mix(h, labels[static_cast<std::size_t>(e)]);
        tuple_hashes.push_back(h);
    }
    std::uint64_t h = mix_sorted(std::move(labels), static_cast<std::uint64_t>(s.num_elements));
    return mix_sorted(std::move(tuple_hashes), h);
}

std::optional<std::vector<int>> find_isomorphism(const Structure& a, const Structure& b) {
    if (a.num_elements != b.num_elements || a.tuples.size() != b.tuples.size()) return std::nullopt;
    const auto n = static_cast<std::size_t>(a.num_elements);
    auto la = wl_labels(a);
    auto lb = wl_labels(b);
    {
        auto sa = la, sb = lb;
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        if (sa != sb) return std::nullopt;
    }
    std::set<std::pair<int, std::vector<int>>> btuples(b.tuples.begin(), b.tuples.end());

    std::vector<std::vector<std::size_t>> inc(n);
    for (std::size_t t = 0; t < a.tuples.size(); ++t)
        for (int e : a.tuples[t].second) inc[static_cast<std::size_t>(e)].push_back(t);

    // most constrained elements first
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return inc[x].size() > inc[y].size(); });

    std::vector<int> map(n, -1);
    std::vector<char> used(n, 0);

    auto consistent = [&](std::size_t e) {
        for (auto t : inc[e]) {
            const auto& tup = a.tuples[t];
            std::vector<int> img;
            img.reserve(tup.second.size());
            bool complete = true;
            for (int x : tup.second) {
                if (map[static_cast<std::size_t>(x)] < 0) { complete = false; break; }
                img.push_back(map[static_cast<std::size_t>(x)]);
            }
            if (complete && !btuples.contains({tup.first, img})) return false;
        }
        return true;
    };

    std::function<bool(std::size_t)> rec = [&](std::size_t i) {
        if (i == n) return true;
        auto e = order[i];
        for (std::size_t f = 0; f < n; ++f) {
            if (used[f] || la[e] != lb[f]) continue;
            map[e] = static_cast<int>(f);
            used[f] = 1;
            if (consistent(e) && rec(i + 1)) return true;
            used[f] = 0;
            map[e] = -1;
        }
        return false;
    };
    if (!rec(0)) return std::nullopt;
    return map;
}

Structure to_structure(const Clause& clause) {
    Structure s;
    std::unordered_map<std::int64_t, int> element;  // var -> v, const -> -(c+1)
    auto elem_of = [&](const Term& t) {
        std::int64_t key = t.is_var() ? t.id : -static_cast<std::int64_t>(t.id) - 1;
        auto [it, fresh] = element.emplace(key, s.num_elements);
        if (fresh) {
            s.colors.push_back(t.is_var() ? 0 : 1 + t.id);
            ++s.num_elements;
        }
        return it->second;
    };
    for (const auto& l : clause.literals) {
        std::vector<int> elems;
        for (const auto& t : l.atom.args) elems.push_back(elem_of(t));
        s.tuples.emplace_back(l.atom.pred * 2 + (l.positive ? 0 : 1), std::move(elems));
    }
    s.normalize();
    return s;
}

std::uint64_t wl_hash(const Clause& clause) {
    return mix(wl_hash(to_structure(clause)), clause.all_diff ? 1 : 2);
}

std::uint64_t wl_hash(const HornRule& rule) { return wl_hash(rule.to_clause()); }

bool isomorphic(const Clause& a, const Clause& b) {
    if (a.all_diff != b.all_diff) return false;
    return find_isomorphism(to_structure(a), to_structure(b)).has_value();
}

bool isomorphic(const HornRule& a, const HornRule& b) { return isomorphic(a.to_clause(), b.to_clause()); }

Clause canonical_form(const Clause& clause) {
    Clause base = clause;
    base.normalize();
    const auto vars = base.variables();
    if (vars.size() > 8) return base;
    std::vector<VarId> perm(vars.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::optional<Clause> best;
    do {
        Substitution theta(vars.size());
        for (std::size_t i = 0; i < vars.size(); ++i) theta[i] = Term::var(perm[i]);
        Clause c = possrl::apply(base, theta);
        if (!best || c.literals < best->literals) best = std::move(c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return *best;
}

// ---------------------------------------------------------------------------

std::pair<std::string, std::vector<std::string>> parse_atom_text(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    auto valid_ident = [](std::string_view s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) {
            return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_';
        });
    };
    text = trim(text);
    auto open = text.find('(');
    if (open == std::string_view::npos) {
        if (!valid_ident(text)) throw std::invalid_argument("malformed atom '" + std::string(text) + "'");
        return {std::string(text), {}};
    }
    if (text.back() != ')') throw std::invalid_argument("missing ')' in '" + std::string(text) + "'");
    auto name = trim(text.substr(0, open));
    if (!valid_ident(name)) throw std::invalid_argument("malformed predicate name in '" + std::string(text) + "'");
    auto inner = text.substr(open + 1, text.size() - open - 2);
    std::vector<std::string> args;
    if (!trim(inner).empty()) {
        std::size_t start = 0;
        while (true) {
            auto comma = inner.find(',', start);
            auto piece = trim(inner.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (!valid_ident(piece)) throw std::invalid_argument("malformed argument in '" + std::string(text) + "'");
            args.emplace_back(piece);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
    }
    return {std::string(name), std::move(args)};
}

bool is_variable_token(std::string_view token) {
    return !token.empty() && std::isupper(static_cast<unsigned char>(token.front()));
}

Clause parse_clause(std::string_view text, Signature& sig, ConstantTable& consts) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    bool all_diff = true;
    constexpr std::string_view kNoDiff = "@nodiff";
    if (text.size() >= kNoDiff.size() && text.substr(text.size() - kNoDiff.size()) == kNoDiff) {
        all_diff = false;
        text = trim(text.substr(0, text.size() - kNoDiff.size()));
    }
    if (text.empty()) throw std::invalid_argument("empty clause text");
    if (text == "_bot_") return Clause::bottom();

    std::vector<std::string_view> parts;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (ch == '(') ++depth;
        if (ch == ')') --depth;
        if (depth == 0 && ch == 'v' && i > 0 && i + 1 < text.size() &&
            std::isspace(static_cast<unsigned char>(text[i - 1])) &&
            std::isspace(static_cast<unsigned char>(text[i + 1]))) {
            parts.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    parts.push_back(text.substr(start));

    std::unordered_map<std::string, VarId> vars;
    std::vector<Literal> lits;
    for (auto part : parts) {
        part = trim(part);
        bool positive = true;
        if (!part.empty() && part.front() == '!') {
            positive = false;
            part = trim(part.substr(1));
        }
        if (part.empty()) throw std::invalid_argument("empty literal in '" + std::string(text) + "'");
        auto [name, args] = parse_atom_text(part);
        Atom atom{sig.add(name, static_cast<int>(args.size())), {}};
        for (const auto& a : args) {
            if (is_variable_token(a)) {
                auto [it, inserted] = vars.try_emplace(a, static_cast<VarId>(vars.size()));
                atom.args.push_back(Term::var(it->second));
            } else {
                atom.args.push_back(Term::constant(consts.add(a)));
            }
        }
        lits.push_back({std::move(atom), positive});
    }
    return Clause(std::move(lits), all_diff);
}

namespace {

std::string term_text(const Term& t, const ConstantTable* consts) {
    if (t.is_var()) return "V" + std::to_string(t.id);
    if (consts && static_cast<std::size_t>(t.id) < consts->size()) return consts->name(t.id);
    return "c" + std::to_string(t.id);
}

}  // namespace

std::string to_string(const Atom& atom, const Signature& sig, const ConstantTable* consts) {
    std::string out = sig[atom.pred].name;
    if (atom.args.empty()) return out;
    out += '(';
    for (std::size_t i = 0; i < atom.args.size(); ++i) {
        if (i) out += ',';
        out += term_text(atom.args[i], consts);
    }
    out += ')';
    return out;
}

std::string to_string(const GroundAtom& atom, const Signature& sig, const ConstantTable& consts) {
    std::string out = sig[atom.pred].name;
    if (atom.args.empty()) return out;
    out += '(';
    for (std::size_t i = 0; i < atom.args.size(); ++i) {
        if (i) out += ',';
        out += consts.name(atom.args[i]);
    }
    out += ')';
    return out;
}

std::string to_string(const Clause& clause, const Signature& sig, const ConstantTable* consts) {
    std::string out;
    if (clause.is_bottom()) {
        out = "_bot_";
    } else {
        for (std::size_t i = 0; i < clause.literals.size(); ++i) {
            if (i) out += " v ";
            if (!clause.literals[i].positive) out += '!';
            out += to_string(clause.literals[i].atom, sig, consts);
        }
    }
    if (!clause.all_diff && !clause.is_bottom()) out += " @nodiff";
    return out;
}

std::string to_string(const HornRule& rule, const Signature& sig) {
    std::string out = to_string(rule.head, sig);
    out += " <- ";
    if (rule.body.empty()) out += "true";
    for (std::size_t i = 0; i < rule.body.size(); ++i) {
        if (i) out += " ^ ";
        out += to_string(rule.body[i], sig);
    }
    return out;
}

}  // namespace possrl
