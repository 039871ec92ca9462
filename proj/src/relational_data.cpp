#include "possrl/relational_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "possrl/errors.hpp"

namespace possrl {

std::uint64_t pack_tuple(std::span<const ConstId> args) {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < args.size(); ++i) key |= static_cast<std::uint64_t>(args[i] & 0xffff) << (16 * i);
    return key;
}

GlobalExample::GlobalExample(Signature signature, ConstantTable constants, std::vector<GroundAtom> atoms)
    : signature_(std::move(signature)), constants_(std::move(constants)), atoms_(std::move(atoms)) {
    std::sort(atoms_.begin(), atoms_.end());
    atoms_.erase(std::unique(atoms_.begin(), atoms_.end()), atoms_.end());
    const auto npred = signature_.size();
    keys_.assign(npred, {});
    by_pred_.assign(npred, {});
    position_constants_.assign(npred, {});
    for (std::size_t p = 0; p < npred; ++p)
        position_constants_[p].assign(static_cast<std::size_t>(signature_[static_cast<PredId>(p)].arity), {});
    for (const auto& a : atoms_) {
        if (a.pred < 0 || static_cast<std::size_t>(a.pred) >= npred)
            throw DomainError("atom uses unknown predicate id " + std::to_string(a.pred));
        if (a.args.size() != static_cast<std::size_t>(signature_[a.pred].arity))
            throw DomainError("atom of " + signature_[a.pred].name + " has wrong argument count");
        for (auto c : a.args)
            if (c < 0 || static_cast<std::size_t>(c) >= constants_.size())
                throw DomainError("atom uses unknown constant id " + std::to_string(c));
        auto p = static_cast<std::size_t>(a.pred);
        keys_[p].insert(pack_tuple(a.args));
        by_pred_[p].push_back(a);
        for (std::size_t i = 0; i < a.args.size(); ++i) position_constants_[p][i].push_back(a.args[i]);
    }
    for (auto& per_pred : position_constants_)
        for (auto& v : per_pred) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
}

std::vector<ConstId> GlobalExample::constant_ids() const {
    std::vector<ConstId> ids(constants_.size());
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

bool GlobalExample::contains(PredId pred, std::span<const ConstId> args) const {
    if (pred < 0 || static_cast<std::size_t>(pred) >= keys_.size()) return false;
    return keys_[static_cast<std::size_t>(pred)].contains(pack_tuple(args));
}

const std::vector<ConstId>& GlobalExample::constants_at(PredId pred, int pos) const {
    return position_constants_.at(static_cast<std::size_t>(pred)).at(static_cast<std::size_t>(pos));
}

const std::vector<GroundAtom>& GlobalExample::atoms_of(PredId pred) const {
    return by_pred_.at(static_cast<std::size_t>(pred));
}

void LocalExample::normalize() {
    std::sort(atoms.begin(), atoms.end());
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
}

// ---------------------------------------------------------------------------

GlobalExample parse_example(std::string_view text, std::span<const std::string> declared_constants) {
    Signature sig;
    ConstantTable consts;
    std::vector<GroundAtom> atoms;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
        if (line.empty()) continue;
        if (line.starts_with("@constants")) {
            std::istringstream in{std::string(line.substr(10))};
            std::string name;
            while (in >> name) {
                if (!std::all_of(name.begin(), name.end(), [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; }))
                    throw ParseError(line_no, "malformed constant '" + name + "'");
                consts.add(name);
            }
            continue;
        }
        std::pair<std::string, std::vector<std::string>> parsed;
        try {
            parsed = parse_atom_text(line);
        } catch (const std::invalid_argument& e) {
            throw ParseError(line_no, e.what());
        }
        PredId p;
        try {
            p = sig.add(parsed.first, static_cast<int>(parsed.second.size()));
        } catch (const SignatureError& e) {
            throw SignatureError("line " + std::to_string(line_no) + ": " + e.what());
        }
        GroundAtom a{p, {}};
        for (const auto& arg : parsed.second) a.args.push_back(consts.add(arg));
        atoms.push_back(std::move(a));
    }
    for (const auto& c : declared_constants) consts.add(c);
    return GlobalExample(std::move(sig), std::move(consts), std::move(atoms));
}

GlobalExample read_example_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_example(buf.str());
}

std::string format_example(const GlobalExample& example) {
    std::string out;
    if (example.num_constants() > 0) {
        out += "@constants";
        for (const auto& n : example.constants().names()) out += " " + n;
        out += '\n';
    }
    std::vector<std::string> lines;
    for (const auto& a : example.atoms()) lines.push_back(to_string(a, example.signature(), example.constants()));
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) out += l + '\n';
    return out;
}

Fragment fragment(const GlobalExample& example, std::span<const ConstId> subset) {
    Fragment frag;
    frag.subset.assign(subset.begin(), subset.end());
    std::sort(frag.subset.begin(), frag.subset.end());
    if (std::adjacent_find(frag.subset.begin(), frag.subset.end()) != frag.subset.end())
        throw DomainError("fragment: repeated constant in subset");
    for (auto c : frag.subset)
        if (c < 0 || static_cast<std::size_t>(c) >= example.num_constants())
            throw DomainError("fragment: constant id " + std::to_string(c) + " not in the example");
    for (const auto& a : example.atoms()) {
        bool inside = std::all_of(a.args.begin(), a.args.end(), [&](ConstId c) {
            return std::binary_search(frag.subset.begin(), frag.subset.end(), c);
        });
        if (inside) frag.atoms.push_back(a);
    }
    return frag;
}

LocalExample standardize(const Fragment& frag, std::span<const int> position_of) {
    LocalExample ex;
    ex.width = static_cast<int>(frag.subset.size());
    for (const auto& a : frag.atoms) {
        GroundAtom g{a.pred, {}};
        for (auto c : a.args) {
            auto it = std::lower_bound(frag.subset.begin(), frag.subset.end(), c);
            g.args.push_back(position_of[static_cast<std::size_t>(it - frag.subset.begin())]);
        }
        ex.atoms.push_back(std::move(g));
    }
    ex.normalize();
    return ex;
}

std::vector<LocalExample> local_class(const GlobalExample& example, std::span<const ConstId> subset) {
    if (subset.size() > 8) throw SizeError("local_class: width " + std::to_string(subset.size()) + " exceeds 8");
    auto frag = fragment(example, subset);
    std::vector<int> perm(frag.subset.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::set<LocalExample> members;
    do {
        members.insert(standardize(frag, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return {members.begin(), members.end()};
}

LocalExample sample_marginal(const GlobalExample& example, int k, Rng& rng) {
    const auto n = example.num_constants();
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw DomainError("sample_marginal: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    // partial Fisher-Yates gives a uniform k-subset in uniform random order,
    // i.e. a uniform bijection onto 0..k-1
    std::vector<ConstId> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    std::vector<ConstId> chosen(ids.begin(), ids.begin() + k);
    auto frag = fragment(example, chosen);
    std::vector<int> position_of(frag.subset.size());
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        auto it = std::lower_bound(frag.subset.begin(), frag.subset.end(), chosen[i]);
        position_of[static_cast<std::size_t>(it - frag.subset.begin())] = static_cast<int>(i);
    }
    return standardize(frag, position_of);
}

Structure to_structure(const LocalExample& example) {
    Structure s;
    s.num_elements = example.width;
    s.colors.assign(static_cast<std::size_t>(example.width), 0);
    for (const auto& a : example.atoms) s.tuples.emplace_back(a.pred, std::vector<int>(a.args.begin(), a.args.end()));
    s.normalize();
    return s;
}

Structure to_structure(const GlobalExample& example) {
    Structure s;
    s.num_elements = static_cast<int>(example.num_constants());
    s.colors.assign(example.num_constants(), 0);
    for (const auto& a : example.atoms()) s.tuples.emplace_back(a.pred, std::vector<int>(a.args.begin(), a.args.end()));
    s.normalize();
    return s;
}

bool isomorphic(const LocalExample& a, const LocalExample& b) {
    return find_isomorphism(to_structure(a), to_structure(b)).has_value();
}

bool isomorphic(const GlobalExample& a, const GlobalExample& b) {
    return find_isomorphism(to_structure(a), to_structure(b)).has_value();
}

std::uint64_t wl_hash(const LocalExample& example) { return wl_hash(to_structure(example)); }

GlobalExample as_global(const LocalExample& example, const Signature& signature) {
    ConstantTable consts;
    for (int i = 0; i < example.width; ++i) consts.add(std::to_string(i + 1));
    return GlobalExample(signature, std::move(consts), example.atoms);
}

// ---------------------------------------------------------------------------

WorldSpace::WorldSpace(const Signature& signature, int width) : width_(width) {
    for (PredId p = 0; p < static_cast<PredId>(signature.size()); ++p) {
        const int arity = signature[p].arity;
        std::vector<ConstId> args(static_cast<std::size_t>(arity), 0);
        while (true) {
            atoms_.push_back({p, args});
            int i = arity - 1;
            while (i >= 0 && args[static_cast<std::size_t>(i)] == width - 1) args[static_cast<std::size_t>(i--)] = 0;
            if (i < 0) break;
            ++args[static_cast<std::size_t>(i)];
        }
        if (width == 0 && arity > 0) atoms_.pop_back();
    }
    for (std::size_t i = 0; i < atoms_.size(); ++i) index_.emplace(atoms_[i], i);
}

std::size_t WorldSpace::index_of(const GroundAtom& atom) const {
    auto it = index_.find(atom);
    if (it == index_.end()) throw DomainError("atom outside the width-" + std::to_string(width_) + " language");
    return it->second;
}

std::uint64_t WorldSpace::to_mask(const LocalExample& world) const {
    std::uint64_t m = 0;
    for (const auto& a : world.atoms) m |= std::uint64_t{1} << index_of(a);
    return m;
}

LocalExample WorldSpace::from_mask(std::uint64_t mask) const {
    LocalExample ex;
    ex.width = width_;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
        if (mask >> i & 1) ex.atoms.push_back(atoms_[i]);
    ex.normalize();
    return ex;
}

std::uint64_t WorldSpace::permute(std::uint64_t mask, std::span<const int> perm) const {
    std::uint64_t out = 0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        if (!(mask >> i & 1)) continue;
        GroundAtom g = atoms_[i];
        for (auto& c : g.args) c = perm[static_cast<std::size_t>(c)];
        out |= std::uint64_t{1} << index_of(g);
    }
    return out;
}

double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
}

void for_each_subset(std::size_t n, std::size_t k, const std::function<bool(std::span<const ConstId>)>& visit) {
    if (k > n) return;
    std::vector<ConstId> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        if (!visit(idx)) return;
        std::size_t i = k;
        while (i > 0 && static_cast<std::size_t>(idx[i - 1]) == n - k + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

}  // namespace possrl
