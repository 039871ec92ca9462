#include "possrl/pipeline.hpp"

#include <atomic>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "possrl/errors.hpp"

namespace possrl {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw DomainError("config: bad value '" + std::string(v) + "' for " + std::string(key));
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw DomainError("config: bad boolean '" + std::string(v) + "' for " + std::string(key));
}

std::string show(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Entry {
    std::string key;
    std::function<void(PipelineConfig&, std::string_view)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

template <class T>
Entry number(std::string key, T PipelineConfig::*member) {
    return {key, [key, member](PipelineConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
            [member](const PipelineConfig& c) { return std::to_string(c.*member); }};
}

template <class T>
Entry nested(std::string key, std::function<T&(PipelineConfig&)> field) {
    auto set = [key, field](PipelineConfig& c, std::string_view v) { field(c) = parse_number<T>(key, v); };
    auto get = [field](const PipelineConfig& c) {
        auto& f = field(const_cast<PipelineConfig&>(c));
        if constexpr (std::is_floating_point_v<T>)
            return show(f);
        else
            return std::to_string(f);
    };
    return {key, set, get};
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = [] {
        std::vector<Entry> t;
        t.push_back({"data", [](PipelineConfig& c, std::string_view v) { c.data = std::string(v); },
                     [](const PipelineConfig& c) { return c.data; }});
        t.push_back({"output", [](PipelineConfig& c, std::string_view v) { c.output = std::string(v); },
                     [](const PipelineConfig& c) { return c.output; }});
        t.push_back(number("k", &PipelineConfig::k));
        t.push_back(number("seed", &PipelineConfig::seed));
        t.push_back(number("jobs", &PipelineConfig::jobs));
        t.push_back(nested<int>("hard.t", [](PipelineConfig& c) -> int& { return c.hard.t; }));
        t.push_back(nested<int>("hard.t_prime", [](PipelineConfig& c) -> int& { return c.hard.t_prime; }));
        t.push_back(nested<std::size_t>("hard.max_candidates",
                                        [](PipelineConfig& c) -> std::size_t& { return c.hard.max_candidates; }));
        t.push_back(nested<std::size_t>("examples.negative_budget",
                                        [](PipelineConfig& c) -> std::size_t& { return c.examples.negative_budget; }));
        t.push_back(nested<std::size_t>("examples.positive_budget",
                                        [](PipelineConfig& c) -> std::size_t& { return c.examples.positive_budget; }));
        t.push_back(nested<std::size_t>("examples.max_attempts",
                                        [](PipelineConfig& c) -> std::size_t& { return c.examples.max_attempts; }));
        t.push_back(nested<int>("beam.b", [](PipelineConfig& c) -> int& { return c.beam.b; }));
        t.push_back(nested<int>("beam.l", [](PipelineConfig& c) -> int& { return c.beam.l; }));
        t.push_back(nested<int>("beam.restarts", [](PipelineConfig& c) -> int& { return c.beam.restarts; }));
        t.push_back(nested<double>("counting.epsilon",
                                   [](PipelineConfig& c) -> double& { return c.greedy.params.counting.epsilon; }));
        t.push_back(nested<double>("counting.delta",
                                   [](PipelineConfig& c) -> double& { return c.greedy.params.counting.delta; }));
        t.push_back(nested<std::uint64_t>("counting.exact_limit_small", [](PipelineConfig& c) -> std::uint64_t& {
            return c.greedy.params.counting.exact_limit_small;
        }));
        t.push_back(nested<std::uint64_t>("counting.exact_limit_large", [](PipelineConfig& c) -> std::uint64_t& {
            return c.greedy.params.counting.exact_limit_large;
        }));
        t.push_back(nested<std::uint64_t>("counting.xor_node_limit", [](PipelineConfig& c) -> std::uint64_t& {
            return c.greedy.params.counting.xor_node_limit;
        }));
        t.push_back(nested<double>("counting.ci_threshold", [](PipelineConfig& c) -> double& {
            return c.greedy.params.counting.ci_rel_width_threshold;
        }));
        t.push_back(nested<int>("counting.sample_budget",
                                [](PipelineConfig& c) -> int& { return c.greedy.params.counting.sample_budget; }));
        t.push_back({"counting.model_mode",
                     [](PipelineConfig& c, std::string_view v) {
                         if (v == "ground")
                             c.greedy.params.model_mode = ModelCountMode::Ground;
                         else if (v == "cutting-plane")
                             c.greedy.params.model_mode = ModelCountMode::CuttingPlane;
                         else
                             throw DomainError("config: counting.model_mode must be ground or cutting-plane");
                     },
                     [](const PipelineConfig& c) {
                         return std::string(c.greedy.params.model_mode == ModelCountMode::Ground ? "ground"
                                                                                                 : "cutting-plane");
                     }});
        t.push_back(nested<std::size_t>("counting.exact_atom_limit", [](PipelineConfig& c) -> std::size_t& {
            return c.greedy.params.exact_atom_limit;
        }));
        t.push_back(nested<int>("greedy.passes", [](PipelineConfig& c) -> int& { return c.greedy.passes; }));
        t.push_back(nested<double>("greedy.min_gain", [](PipelineConfig& c) -> double& { return c.greedy.min_gain; }));
        t.push_back({"simplify", [](PipelineConfig& c, std::string_view v) { c.simplify = parse_bool("simplify", v); },
                     [](const PipelineConfig& c) { return std::string(c.simplify ? "true" : "false"); }});
        return t;
    }();
    return table;
}

const Entry& entry(std::string_view key) {
    for (const auto& e : entries())
        if (e.key == key) return e;
    throw DomainError("config: unknown key '" + std::string(key) + "'");
}

}  // namespace

void PipelineConfig::finalize() {
    if (k < 1) throw DomainError("config: k must be >= 1");
    if (jobs < 1) throw DomainError("config: jobs must be >= 1");
    if (examples.negative_budget < 1) throw DomainError("config: examples.negative_budget must be >= 1");
    const auto& c = greedy.params.counting;
    if (!(c.epsilon > 0) || !(c.delta > 0 && c.delta < 1)) throw DomainError("config: need epsilon > 0, 0 < delta < 1");
    if (!(c.ci_rel_width_threshold > 0)) throw DomainError("config: counting.ci_threshold must be positive");
    if (c.sample_budget < 1) throw DomainError("config: counting.sample_budget must be >= 1");
    if (greedy.passes < 1) throw DomainError("config: greedy.passes must be >= 1");
    if (!(greedy.min_gain >= 0)) throw DomainError("config: greedy.min_gain must be >= 0");
    hard.k = k;
    beam.k = k;
    greedy.params.seed = seed;
    hard.validate();
    beam.validate();
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& e : entries()) out.push_back(e.key);
        return out;
    }();
    return keys;
}

void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
    entry(key).set(cfg, trim(value));
}

std::string get_config_value(const PipelineConfig& cfg, std::string_view key) { return entry(key).get(cfg); }

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
        try {
            set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const DomainError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return base;
}

PipelineConfig read_config_file(const std::string& path, PipelineConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string format_config(const PipelineConfig& cfg) {
    std::string out;
    for (const auto& e : entries()) out += e.key + " = " + e.get(cfg) + "\n";
    return out;
}

std::vector<GroundLiteral> parse_evidence(std::string_view text, Signature& sig, ConstantTable& consts) {
    std::vector<GroundLiteral> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.starts_with("@constants")) {
            std::istringstream names{std::string(line.substr(10))};
            for (std::string name; names >> name;) consts.add(name);
            continue;
        }
        GroundLiteral lit;
        if (line.front() == '!') {
            lit.positive = false;
            line = trim(line.substr(1));
        }
        try {
            auto [pred, args] = parse_atom_text(line);
            lit.atom.pred = sig.add(pred, static_cast<int>(args.size()));
            for (const auto& a : args) lit.atom.args.push_back(consts.add(a));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(line_no, e.what());
        }
        out.push_back(std::move(lit));
    }
    return out;
}

std::vector<GroundLiteral> read_evidence_file(const std::string& path, Signature& sig, ConstantTable& consts) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_evidence(ss.str(), sig, consts);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ULL ^ seed;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    // splitmix64 finalizer
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

namespace {

template <class F>
auto run_stage(const std::string& stage, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, std::current_exception(), e.what());
    }
}

struct PredicateRules {
    std::vector<ScoredRule> rules;
    std::vector<std::string> log;
    std::exception_ptr error;
};

PredicateRules learn_predicate(const GlobalExample& data, std::span<const Clause> hard, PredId pred,
                               const PipelineConfig& cfg) {
    PredicateRules out;
    const auto& name = data.signature()[pred].name;
    Rng rng(derive_seed(cfg.seed, "examples/" + name));
    auto examples = build_examples(data, hard, pred, cfg.examples, rng);
    std::ostringstream line;
    line << "examples pred=" << name << " pos=" << examples.positives.size() << " neg=" << examples.negatives.size()
         << " attempted=" << examples.attempted << " rejected=" << examples.rejected;
    out.log.push_back(line.str());
    if (examples.degenerate() || examples.negatives.empty()) {
        out.log.push_back("beam pred=" + name + " skipped");
        return out;
    }
    out.rules = beam_search(data, examples, cfg.beam);
    out.log.push_back("beam pred=" + name + " rules=" + std::to_string(out.rules.size()));
    return out;
}

}  // namespace

std::vector<ScoredRule> learn_candidates(const GlobalExample& data, std::span<const Clause> hard,
                                         const PipelineConfig& cfg, std::vector<std::string>* log) {
    const auto n_pred = data.signature().size();
    std::vector<PredicateRules> per(n_pred);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t p = next++; p < n_pred; p = next++) {
            try {
                per[p] = learn_predicate(data, hard, static_cast<PredId>(p), cfg);
            } catch (...) {
                per[p].error = std::current_exception();
            }
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(cfg.jobs, 1)), n_pred);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    std::vector<ScoredRule> out;
    for (auto& p : per) {
        if (log) log->insert(log->end(), p.log.begin(), p.log.end());
        out.insert(out.end(), p.rules.begin(), p.rules.end());
    }
    for (auto& p : per)
        if (p.error) std::rethrow_exception(p.error);
    return out;
}

void run_pipeline(const GlobalExample& data, const PipelineConfig& config, PipelineResult& out) {
    PipelineConfig cfg = run_stage("config", [&] {
        PipelineConfig c = config;
        c.finalize();
        return c;
    });

    run_stage("hard-rules", [&] {
        out.hard = learn_hard_rules(data, cfg.hard, &out.hard_stats);
        out.log.push_back("hard generated=" + std::to_string(out.hard_stats.generated) +
                          " valid=" + std::to_string(out.hard_stats.valid) +
                          " retained=" + std::to_string(out.hard_stats.retained));
        return 0;
    });
    out.completed.push_back("hard-rules");

    if (data.atoms().empty()) {
        out.warnings.push_back("data has no atoms; the theory holds the hard rules only");
        std::vector<WeightedFormula> wf;
        for (const auto& h : out.hard) wf.push_back({h, 1.0});
        out.theory = StratifiedTheory(wf);
        out.completed.push_back("output");
        return;
    }

    run_stage("rule-learning", [&] {
        out.candidates = learn_candidates(data, out.hard, cfg, &out.log);
        return 0;
    });
    out.completed.push_back("rule-learning");

    ParamCache cache;
    run_stage("weight-learning", [&] {
        out.greedy = greedy_build(out.candidates, out.hard, data, cfg.k, cfg.greedy, &cache);
        out.log.insert(out.log.end(), out.greedy.log.begin(), out.greedy.log.end());
        out.theory = out.greedy.theory;
        return 0;
    });
    out.completed.push_back("weight-learning");

    if (cfg.simplify) {
        run_stage("simplify", [&] {
            out.theory = simplify(out.greedy.theory, cfg.k, &out.simplify_stats);
            out.log.push_back("simplify removed_formulas=" + std::to_string(out.simplify_stats.removed_formulas) +
                              " removed_literals=" + std::to_string(out.simplify_stats.removed_literals));
            return 0;
        });
        out.completed.push_back("simplify");
    }
    out.completed.push_back("output");
}

PipelineResult run_pipeline(const GlobalExample& data, const PipelineConfig& cfg) {
    PipelineResult out;
    run_pipeline(data, cfg, out);
    return out;
}

}  // namespace possrl
