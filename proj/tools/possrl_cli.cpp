// possrl: learning, inference, evaluation and data generation for stratified
// possibilistic theories.
//
// Exit codes: 0 ok, 1 learning infeasible, 2 input/output or usage error,
// 3 budget exhausted.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "possrl/counting.hpp"
#include "possrl/errors.hpp"
#include "possrl/pipeline.hpp"
#include "possrl/possibilistic.hpp"
#include "possrl/relational_data.hpp"
#include "possrl/structure_learning.hpp"
#include "possrl/synth.hpp"
#include "possrl/weight_learning.hpp"

using namespace possrl;

namespace {

enum Exit { kOk = 0, kInfeasible = 1, kIo = 2, kBudget = 3 };

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("cannot write " + path);
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

int exit_code_of(std::exception_ptr e) {
    try {
        std::rethrow_exception(e);
    } catch (const StageError& s) {
        return s.cause() ? exit_code_of(s.cause()) : kIo;
    } catch (const InfeasibleError&) {
        return kInfeasible;
    } catch (const BudgetError&) {
        return kBudget;
    } catch (const SizeError&) {
        return kBudget;
    } catch (...) {
        return kIo;
    }
}

/// --config plus one --<key> flag per configuration key.
struct ConfigFlags {
    std::string file;
    std::map<std::string, std::string> values;

    void attach(CLI::App* app) {
        app->add_option("--config", file, "key = value configuration file");
        for (const auto& key : config_keys()) {
            if (key == "data" || key == "output") continue;
            app->add_option("--" + key, values[key], "overrides config key " + key);
        }
    }

    PipelineConfig build(const CLI::App* app, const std::string& data, const std::string& output) const {
        PipelineConfig cfg;
        if (!file.empty()) cfg = read_config_file(file);
        for (const auto& [key, value] : values)
            if (app->count("--" + key) > 0) set_config_value(cfg, key, value);
        if (!data.empty()) cfg.data = data;
        if (!output.empty()) cfg.output = output;
        if (cfg.data.empty()) throw DomainError("no data file (--data or data = ...)");
        cfg.finalize();
        return cfg;
    }
};

StratifiedTheory hard_theory(std::span<const Clause> hard) {
    std::vector<WeightedFormula> wf;
    for (const auto& h : hard) wf.push_back({h, 1.0});
    return StratifiedTheory(wf);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning and inference for stratified possibilistic theories"};
    app.require_subcommand(1);
    int jobs = 0;
    app.add_option("--jobs", jobs, "cap on concurrent tasks (overrides the jobs key)");

    std::function<int()> action;

    // learn-hard ------------------------------------------------------------
    auto* hard_cmd = app.add_subcommand("learn-hard", "learn hard rules and write them as a theory");
    std::string hard_data, hard_out;
    ConfigFlags hard_flags;
    hard_cmd->add_option("--data", hard_data, "data file");
    hard_cmd->add_option("--output,-o", hard_out, "theory file (stdout when omitted)");
    hard_flags.attach(hard_cmd);
    hard_cmd->callback([&] {
        action = [&] {
            auto cfg = hard_flags.build(hard_cmd, hard_data, hard_out);
            if (jobs > 0) cfg.jobs = jobs;
            auto data = read_example_file(cfg.data);
            HardRuleStats stats;
            auto hard = learn_hard_rules(data, cfg.hard, &stats);
            std::cerr << "hard generated=" << stats.generated << " valid=" << stats.valid
                      << " retained=" << stats.retained << "\n";
            write_text(cfg.output, format_theory(hard_theory(hard), data.signature()));
            return int{kOk};
        };
    });

    // learn-rules -----------------------------------------------------------
    auto* rules_cmd = app.add_subcommand("learn-rules", "learn candidate soft rules by beam search");
    std::string rules_data, rules_out, rules_hard;
    ConfigFlags rules_flags;
    rules_cmd->add_option("--data", rules_data, "data file");
    rules_cmd->add_option("--output,-o", rules_out, "candidate file (stdout when omitted)");
    rules_cmd->add_option("--hard", rules_hard, "hard-rule theory file (learned when omitted)");
    rules_flags.attach(rules_cmd);
    rules_cmd->callback([&] {
        action = [&] {
            auto cfg = rules_flags.build(rules_cmd, rules_data, rules_out);
            if (jobs > 0) cfg.jobs = jobs;
            auto data = read_example_file(cfg.data);
            std::vector<Clause> hard;
            if (!rules_hard.empty()) {
                Signature sig = data.signature();
                ConstantTable consts;
                hard = read_theory_file(rules_hard, sig, consts).hard();
            } else {
                hard = learn_hard_rules(data, cfg.hard);
            }
            std::vector<std::string> log;
            auto rules = learn_candidates(data, hard, cfg, &log);
            std::cerr << join_lines(log);
            write_text(cfg.output, format_candidates(rules, data.signature()));
            return int{kOk};
        };
    });

    // learn -----------------------------------------------------------------
    auto* learn_cmd = app.add_subcommand("learn", "run the full learning pipeline");
    std::string learn_data, learn_out, learn_log;
    ConfigFlags learn_flags;
    learn_cmd->add_option("--data", learn_data, "data file");
    learn_cmd->add_option("--output,-o", learn_out, "theory file");
    learn_cmd->add_option("--log", learn_log, "learning log file");
    learn_flags.attach(learn_cmd);
    learn_cmd->callback([&] {
        action = [&] {
            auto cfg = learn_flags.build(learn_cmd, learn_data, learn_out);
            if (jobs > 0) cfg.jobs = jobs;
            auto data = read_example_file(cfg.data);
            PipelineResult result;
            try {
                run_pipeline(data, cfg, result);
            } catch (const StageError& e) {
                std::cerr << "error: stage " << e.what() << "\n";
                if (!cfg.output.empty()) {
                    if (!result.candidates.empty())
                        write_text(cfg.output + ".candidates.partial",
                                   format_candidates(result.candidates, data.signature()));
                    auto partial = result.greedy.theory.empty() ? hard_theory(result.hard) : result.greedy.theory;
                    write_text(cfg.output + ".partial", format_theory(partial, data.signature()));
                }
                if (!learn_log.empty()) write_text(learn_log + ".partial", join_lines(result.log));
                return exit_code_of(std::current_exception());
            }
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            if (!learn_log.empty()) write_text(learn_log, join_lines(result.log));
            write_text(cfg.output, format_theory(result.theory, data.signature()));
            return int{kOk};
        };
    });

    // infer -----------------------------------------------------------------
    auto* infer_cmd = app.add_subcommand("infer", "MAP prediction from evidence");
    std::string infer_theory, infer_evidence, infer_out;
    std::vector<std::string> infer_consts;
    infer_cmd->add_option("--theory", infer_theory, "theory file")->required();
    infer_cmd->add_option("--evidence", infer_evidence, "evidence file")->required();
    infer_cmd->add_option("--constants", infer_consts, "further constants of the domain")->delimiter(',');
    infer_cmd->add_option("--output,-o", infer_out, "prediction file (stdout when omitted)");
    infer_cmd->callback([&] {
        action = [&] {
            Signature sig;
            ConstantTable consts;
            auto theory = read_theory_file(infer_theory, sig, consts);
            auto evidence = read_evidence_file(infer_evidence, sig, consts);
            for (const auto& c : infer_consts) consts.add(c);
            std::vector<ConstId> ids(consts.size());
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ConstId>(i);
            MapEngine engine(theory, ids, evidence);
            auto predicted = engine.prediction();
            std::ostringstream out;
            out << "# mu0=";
            if (engine.cut().level)
                out << format_weight(*engine.cut().level);
            else
                out << "none";
            out << " cut_calls=" << engine.cut().sat_calls << " sat_calls=" << engine.sat_calls() << "\n";
            for (const auto& a : predicted) out << to_string(a, sig, consts) << "\n";
            write_text(infer_out, out.str());
            return int{kOk};
        };
    });

    // evaluate --------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("evaluate", "Hamming error against the positive-evidence baseline");
    std::string eval_theory, eval_test, eval_csv, eval_json;
    EvalConfig eval_cfg;
    bool eval_timing = false;
    eval_cmd->add_option("--theory", eval_theory, "theory file")->required();
    eval_cmd->add_option("--test", eval_test, "test data file")->required();
    eval_cmd->add_option("--s-max", eval_cfg.s_max, "largest evidence size")->capture_default_str();
    eval_cmd->add_option("--trials", eval_cfg.trials, "trials per evidence size")->capture_default_str();
    eval_cmd->add_option("--seed", eval_cfg.seed, "seed")->capture_default_str();
    eval_cmd->add_flag("--positives-only", eval_cfg.positives_only, "draw evidence from true atoms only");
    eval_cmd->add_flag("--independent", eval_cfg.independent, "fresh evidence per size instead of growing it");
    eval_cmd->add_flag("--timing", eval_timing, "include wall-clock columns");
    eval_cmd->add_option("--csv", eval_csv, "per-size CSV (stdout when omitted)");
    eval_cmd->add_option("--json", eval_json, "JSON summary");
    eval_cmd->callback([&] {
        action = [&] {
            auto test = read_example_file(eval_test);
            Signature sig = test.signature();
            ConstantTable consts;
            auto theory = read_theory_file(eval_theory, sig, consts);
            auto report = evaluate(theory, sig, test, eval_cfg);
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
            write_text(eval_csv, format_eval_csv(report, eval_timing));
            if (!eval_json.empty()) write_text(eval_json, format_eval_json(report, eval_timing));
            return int{kOk};
        };
    });

    // count -----------------------------------------------------------------
    auto* count_cmd = app.add_subcommand("count", "count k-subsets and width-k worlds satisfying formulas");
    std::string count_data;
    std::vector<std::string> count_formulas;
    int count_k = 2;
    std::uint64_t count_seed = 1;
    count_cmd->add_option("--data", count_data, "data file")->required();
    count_cmd->add_option("--formula,-f", count_formulas, "clause, e.g. '!fr(X,Y) v fr(Y,X)'; repeatable");
    count_cmd->add_option("--k", count_k, "width")->capture_default_str();
    count_cmd->add_option("--seed", count_seed, "seed")->capture_default_str();
    count_cmd->callback([&] {
        action = [&] {
            auto data = read_example_file(count_data);
            Signature sig = data.signature();
            ConstantTable consts = data.constants();
            std::vector<Clause> formulas;
            for (const auto& f : count_formulas) formulas.push_back(parse_clause(f, sig, consts));
            if (sig.size() != data.signature().size())
                data = GlobalExample(sig, data.constants(), data.atoms());
            ParamPolicy policy;
            policy.seed = count_seed;
            auto counts = count_cut(data, formulas, {}, count_k, policy);
            std::cout << "subsets " << counts.e.to_line() << "\n";
            std::cout << "worlds " << counts.m.to_line() << "\n";
            return int{kOk};
        };
    });

    // encode-exact ----------------------------------------------------------
    auto* enc_cmd = app.add_subcommand("encode-exact", "theory whose possibility equals the marginal distribution");
    std::string enc_data, enc_out;
    int enc_k = 2;
    enc_cmd->add_option("--data", enc_data, "data file")->required();
    enc_cmd->add_option("--k", enc_k, "width")->capture_default_str();
    enc_cmd->add_option("--output,-o", enc_out, "theory file (stdout when omitted)");
    enc_cmd->callback([&] {
        action = [&] {
            auto data = read_example_file(enc_data);
            auto theory = exact_encoding(data, enc_k);
            write_text(enc_out, format_theory(theory, data.signature()));
            return int{kOk};
        };
    });

    // synth -----------------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "sample a data file from a generator theory");
    std::string synth_theory, synth_out;
    int synth_n = 8;
    std::uint64_t synth_seed = 1;
    synth_cmd->add_option("--theory", synth_theory, "generator theory file")->required();
    synth_cmd->add_option("--constants,-n", synth_n, "number of constants")->capture_default_str();
    synth_cmd->add_option("--seed", synth_seed, "seed")->capture_default_str();
    synth_cmd->add_option("--output,-o", synth_out, "data file (stdout when omitted)");
    synth_cmd->callback([&] {
        action = [&] {
            Signature sig;
            ConstantTable consts;
            auto theory = read_theory_file(synth_theory, sig, consts);
            auto data = synth_generate(theory, sig, synth_n, synth_seed);
            write_text(synth_out, format_example(data));
            return int{kOk};
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kIo;
    }
    try {
        return action();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_of(std::current_exception());
    }
}
