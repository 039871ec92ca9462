#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "possrl/errors.hpp"
#include "possrl/pipeline.hpp"

namespace possrl {

std::size_t hamming(std::span<const GroundAtom> a, std::span<const GroundAtom> b) {
    std::set<GroundAtom> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::size_t common = 0;
    for (const auto& x : sa) common += sb.count(x);
    return sa.size() + sb.size() - 2 * common;
}

namespace {

constexpr std::size_t kMaxGroundAtoms = 5'000'000;

std::vector<GroundAtom> all_ground_atoms(const Signature& sig, std::size_t n) {
    std::vector<GroundAtom> out;
    double total = 0;
    for (const auto& p : sig) total += std::pow(static_cast<double>(n), p.arity);
    if (total > static_cast<double>(kMaxGroundAtoms)) throw SizeError("evaluate: too many ground atoms");
    for (PredId p = 0; p < static_cast<PredId>(sig.size()); ++p) {
        const int arity = sig[p].arity;
        std::vector<ConstId> args(static_cast<std::size_t>(arity), 0);
        while (true) {
            out.push_back({p, args});
            int i = arity - 1;
            while (i >= 0 && ++args[static_cast<std::size_t>(i)] == static_cast<ConstId>(n)) args[static_cast<std::size_t>(i--)] = 0;
            if (i < 0) break;
        }
    }
    return out;
}

}  // namespace

EvalReport evaluate(const StratifiedTheory& theory, const Signature& signature, const GlobalExample& test,
                    const EvalConfig& cfg) {
    if (cfg.s_max < 1 || cfg.trials < 1) throw DomainError("evaluate: s_max and trials must be >= 1");
    for (PredId p = 0; p < static_cast<PredId>(test.signature().size()); ++p)
        if (p >= static_cast<PredId>(signature.size()) || !(signature[p] == test.signature()[p]))
            throw DomainError("evaluate: signature does not extend the test signature");

    EvalReport report;
    report.config = cfg;
    report.num_strata = theory.num_strata();
    report.cut_call_bound =
        static_cast<std::uint64_t>(std::ceil(std::log2(static_cast<double>(theory.num_strata()) + 1.0))) + 1;

    const auto constants = test.constant_ids();
    const auto& truth = test.atoms();
    report.test_true_atoms = truth.size();
    std::vector<GroundLiteral> pool;
    for (const auto& a : truth) pool.push_back({a, true});
    if (!cfg.positives_only) {
        auto universe = all_ground_atoms(signature, constants.size());
        report.ground_atoms = universe.size();
        for (const auto& a : universe)
            if (!test.contains(a)) pool.push_back({a, false});
    } else {
        double total = 0;
        for (const auto& p : signature) total += std::pow(static_cast<double>(constants.size()), p.arity);
        report.ground_atoms = static_cast<std::size_t>(total);
    }
    if (static_cast<std::size_t>(cfg.s_max) > pool.size())
        report.warnings.push_back("s_max " + std::to_string(cfg.s_max) + " exceeds the " +
                                  std::to_string(pool.size()) + " available evidence literals; capped");

    const auto n_sizes = static_cast<std::size_t>(cfg.s_max);
    std::vector<double> th_err(n_sizes), bl_err(n_sizes), cut_calls(n_sizes), all_calls(n_sizes), ms(n_sizes);
    std::vector<std::uint64_t> max_cut(n_sizes, 0);

    for (int trial = 0; trial < cfg.trials; ++trial) {
        const auto seed = derive_seed(cfg.seed, "trial/" + std::to_string(trial));
        report.trial_seeds.push_back(seed);
        Rng rng(seed);
        auto order = pool;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t si = 0; si < n_sizes; ++si) {
            if (cfg.independent && si > 0) std::shuffle(order.begin(), order.end(), rng);
            const auto s = std::min(si + 1, order.size());
            std::span<const GroundLiteral> evidence(order.data(), s);
            std::vector<GroundAtom> positives;
            for (const auto& l : evidence)
                if (l.positive) positives.push_back(l.atom);

            const auto start = std::chrono::steady_clock::now();
            MapEngine engine(theory, constants, evidence);
            auto predicted = engine.prediction();
            const auto stop = std::chrono::steady_clock::now();

            th_err[si] += static_cast<double>(hamming(predicted, truth));
            bl_err[si] += static_cast<double>(hamming(positives, truth));
            cut_calls[si] += static_cast<double>(engine.cut().sat_calls);
            all_calls[si] += static_cast<double>(engine.sat_calls());
            max_cut[si] = std::max(max_cut[si], engine.cut().sat_calls);
            ms[si] += std::chrono::duration<double, std::milli>(stop - start).count();
        }
    }

    const double t = cfg.trials;
    double cumulative = 0;
    for (std::size_t si = 0; si < n_sizes; ++si) {
        EvalRow row;
        row.s = static_cast<int>(si + 1);
        row.evidence = std::min(si + 1, pool.size());
        row.theory_error = th_err[si] / t;
        row.baseline_error = bl_err[si] / t;
        row.difference = row.baseline_error - row.theory_error;
        cumulative += row.difference;
        row.cumulative_difference = cumulative;
        row.mean_cut_calls = cut_calls[si] / t;
        row.max_cut_calls = max_cut[si];
        row.mean_sat_calls = all_calls[si] / t;
        row.mean_ms = ms[si] / t;
        if (row.max_cut_calls > report.cut_call_bound) report.within_bound = false;
        report.rows.push_back(row);
    }
    return report;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string format_eval_csv(const EvalReport& report, bool timing) {
    std::ostringstream out;
    out << "s,evidence,theory_error,baseline_error,difference,cumulative_difference,mean_cut_calls,max_cut_calls,"
           "mean_sat_calls";
    if (timing) out << ",mean_ms";
    out << "\n";
    for (const auto& r : report.rows) {
        out << r.s << ',' << r.evidence << ',' << num(r.theory_error) << ',' << num(r.baseline_error) << ','
            << num(r.difference) << ',' << num(r.cumulative_difference) << ',' << num(r.mean_cut_calls) << ','
            << r.max_cut_calls << ',' << num(r.mean_sat_calls);
        if (timing) out << ',' << num(r.mean_ms);
        out << "\n";
    }
    return out.str();
}

std::string format_eval_json(const EvalReport& report, bool timing) {
    nlohmann::ordered_json j;
    j["s_max"] = report.config.s_max;
    j["trials"] = report.config.trials;
    j["seed"] = report.config.seed;
    j["positives_only"] = report.config.positives_only;
    j["independent"] = report.config.independent;
    j["trial_seeds"] = report.trial_seeds;
    j["num_strata"] = report.num_strata;
    j["cut_call_bound"] = report.cut_call_bound;
    j["within_bound"] = report.within_bound;
    j["test_true_atoms"] = report.test_true_atoms;
    j["ground_atoms"] = report.ground_atoms;
    std::vector<double> theory, baseline, cumulative;
    for (const auto& r : report.rows) {
        theory.push_back(r.theory_error);
        baseline.push_back(r.baseline_error);
        cumulative.push_back(r.cumulative_difference);
    }
    j["theory_error"] = theory;
    j["baseline_error"] = baseline;
    j["cumulative_difference"] = cumulative;
    if (!report.rows.empty()) j["final_cumulative_difference"] = report.rows.back().cumulative_difference;
    std::vector<double> calls;
    for (const auto& r : report.rows) calls.push_back(r.mean_cut_calls);
    j["mean_cut_calls"] = calls;
    if (timing) {
        std::vector<double> t;
        for (const auto& r : report.rows) t.push_back(r.mean_ms);
        j["mean_ms"] = t;
    }
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

}  // namespace possrl
