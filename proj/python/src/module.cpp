#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <numeric>

#include "possrl/counting.hpp"
#include "possrl/errors.hpp"
#include "possrl/pipeline.hpp"
#include "possrl/possibilistic.hpp"
#include "possrl/relational_data.hpp"
#include "possrl/structure_learning.hpp"
#include "possrl/synth.hpp"
#include "possrl/weight_learning.hpp"

namespace py = pybind11;
using namespace possrl;

namespace {

// A theory with the names its formulas refer to.
struct PyTheory {
    StratifiedTheory theory;
    Signature sig;
    ConstantTable consts;

    std::string format() const { return format_theory(theory, sig, &consts); }
};

PyTheory theory_from(StratifiedTheory t, const Signature& sig) { return {std::move(t), sig, {}}; }

std::vector<std::string> atom_strings(std::span<const GroundAtom> atoms, const Signature& sig,
                                      const ConstantTable& consts) {
    std::vector<std::string> out;
    for (const auto& a : atoms) out.push_back(to_string(a, sig, consts));
    return out;
}

std::vector<std::string> clause_strings(std::span<const Clause> clauses, const Signature& sig) {
    std::vector<std::string> out;
    for (const auto& c : clauses) out.push_back(to_string(c, sig));
    return out;
}

PipelineConfig config_from(const py::dict& options) {
    PipelineConfig cfg;
    for (const auto& [key, value] : options) {
        auto k = py::str(key).cast<std::string>();
        std::string v = py::isinstance<py::bool_>(value) ? (value.cast<bool>() ? "true" : "false")
                                                          : py::str(value).cast<std::string>();
        set_config_value(cfg, k, v);
    }
    cfg.finalize();
    return cfg;
}

py::dict row_dict(const EvalRow& r) {
    py::dict d;
    d["s"] = r.s;
    d["evidence"] = r.evidence;
    d["theory_error"] = r.theory_error;
    d["baseline_error"] = r.baseline_error;
    d["difference"] = r.difference;
    d["cumulative_difference"] = r.cumulative_difference;
    d["mean_cut_calls"] = r.mean_cut_calls;
    d["max_cut_calls"] = r.max_cut_calls;
    d["mean_sat_calls"] = r.mean_sat_calls;
    return d;
}

}  // namespace

PYBIND11_MODULE(_possrl, m) {
    m.doc() = "Learning and MAP inference for stratified possibilistic relational theories";

    static py::exception<InfeasibleError> infeasible(m, "InfeasibleError", PyExc_RuntimeError);
    static py::exception<BudgetError> budget(m, "BudgetError", PyExc_RuntimeError);
    py::register_exception<SizeError>(m, "SizeError", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<SignatureError>(m, "SignatureError", PyExc_ValueError);
    py::register_exception<EvidenceError>(m, "EvidenceError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    // a failed pipeline stage surfaces as its cause, with the stage in the message
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const StageError& e) {
            try {
                if (e.cause()) std::rethrow_exception(e.cause());
            } catch (const InfeasibleError&) {
                PyErr_SetString(infeasible.ptr(), e.what());
                return;
            } catch (const BudgetError&) {
                PyErr_SetString(budget.ptr(), e.what());
                return;
            } catch (...) {
            }
            PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    py::class_<GlobalExample>(m, "Example")
        .def_property_readonly("atoms",
                               [](const GlobalExample& e) { return atom_strings(e.atoms(), e.signature(), e.constants()); })
        .def_property_readonly("constants", [](const GlobalExample& e) { return e.constants().names(); })
        .def_property_readonly("predicates",
                               [](const GlobalExample& e) {
                                   std::vector<std::pair<std::string, int>> out;
                                   for (const auto& p : e.signature()) out.emplace_back(p.name, p.arity);
                                   return out;
                               })
        .def("__len__", [](const GlobalExample& e) { return e.atoms().size(); })
        .def("__str__", &format_example);

    py::class_<PyTheory>(m, "Theory")
        .def_property_readonly("strata",
                               [](const PyTheory& t) {
                                   std::vector<std::pair<double, std::vector<std::string>>> out;
                                   for (const auto& s : t.theory.strata()) {
                                       std::vector<std::string> fs;
                                       for (const auto& f : s.formulas) fs.push_back(to_string(f, t.sig, &t.consts));
                                       out.emplace_back(s.level, std::move(fs));
                                   }
                                   return out;
                               })
        .def_property_readonly("hard", [](const PyTheory& t) { return clause_strings(t.theory.hard(), t.sig); })
        .def("__len__", [](const PyTheory& t) { return t.theory.size(); })
        .def("__str__", &PyTheory::format);

    m.def("parse_example", [](const std::string& text) { return parse_example(text); }, py::arg("text"),
          "Data from one ground atom per line.");
    m.def("read_example", [](const std::string& path) { return read_example_file(path); }, py::arg("path"));

    m.def(
        "parse_theory",
        [](const std::string& text) {
            PyTheory t;
            t.theory = parse_theory(text, t.sig, t.consts);
            return t;
        },
        py::arg("text"), "Theory from `<weight> :: <clause>` lines.");
    m.def(
        "read_theory",
        [](const std::string& path) {
            PyTheory t;
            t.theory = read_theory_file(path, t.sig, t.consts);
            return t;
        },
        py::arg("path"));

    m.def(
        "learn_hard_rules",
        [](const GlobalExample& data, int t, int t_prime, int k) {
            HardRuleConfig cfg{t, t_prime, k, 0};
            cfg.validate();
            std::vector<Clause> rules;
            {
                py::gil_scoped_release release;
                rules = learn_hard_rules(data, cfg);
            }
            return clause_strings(rules, data.signature());
        },
        py::arg("data"), py::arg("t") = 3, py::arg("t_prime") = 4, py::arg("k") = 3);

    m.def(
        "learn",
        [](const GlobalExample& data, const py::dict& options) {
            auto cfg = config_from(options);
            PipelineResult r;
            {
                py::gil_scoped_release release;
                run_pipeline(data, cfg, r);
            }
            py::dict out;
            out["theory"] = theory_from(r.theory, data.signature());
            out["hard"] = clause_strings(r.hard, data.signature());
            std::vector<std::string> cands;
            for (const auto& c : r.candidates) cands.push_back(to_string(c.rule.to_clause(), data.signature()));
            out["candidates"] = cands;
            out["warnings"] = r.warnings;
            out["log"] = r.log;
            return out;
        },
        py::arg("data"), py::arg("options") = py::dict(),
        "Full learning pipeline. Options use the configuration keys (k, seed, beam.b, ...).");

    m.def(
        "infer",
        [](const PyTheory& t, const std::string& evidence, const std::vector<std::string>& constants) {
            Signature sig = t.sig;
            ConstantTable consts = t.consts;
            auto ev = parse_evidence(evidence, sig, consts);
            for (const auto& c : constants) consts.add(c);
            std::vector<ConstId> ids(consts.size());
            std::iota(ids.begin(), ids.end(), 0);
            MapEngine engine(t.theory, ids, ev);
            auto predicted = engine.prediction();
            py::dict out;
            out["mu0"] = engine.cut().level ? py::cast(*engine.cut().level) : py::none();
            out["predicted"] = atom_strings(predicted, sig, consts);
            out["cut_calls"] = engine.cut().sat_calls;
            out["sat_calls"] = engine.sat_calls();
            return out;
        },
        py::arg("theory"), py::arg("evidence"), py::arg("constants") = std::vector<std::string>{},
        "MAP prediction: atoms entailed by the lowest cut consistent with the evidence, plus positive evidence.");

    m.def(
        "evaluate",
        [](const PyTheory& t, const GlobalExample& test, int s_max, int trials, std::uint64_t seed,
           bool positives_only, bool independent) {
            EvalConfig cfg{s_max, trials, seed, positives_only, independent};
            EvalReport report;
            {
                py::gil_scoped_release release;
                report = evaluate(t.theory, t.sig, test, cfg);
            }
            py::list rows;
            for (const auto& r : report.rows) rows.append(row_dict(r));
            return rows;
        },
        py::arg("theory"), py::arg("test"), py::arg("s_max") = 15, py::arg("trials") = 20, py::arg("seed") = 1,
        py::arg("positives_only") = false, py::arg("independent") = false,
        "Mean Hamming errors of the theory and of the evidence-only baseline per evidence size.");

    m.def(
        "count",
        [](const GlobalExample& data, const std::vector<std::string>& formulas, int k, std::uint64_t seed) {
            Signature sig = data.signature();
            ConstantTable consts = data.constants();
            std::vector<Clause> parsed;
            for (const auto& f : formulas) parsed.push_back(parse_clause(f, sig, consts));
            GlobalExample extended =
                sig.size() == data.signature().size() ? data : GlobalExample(sig, data.constants(), data.atoms());
            ParamPolicy policy;
            policy.seed = seed;
            auto c = count_cut(extended, parsed, {}, k, policy);
            return std::make_pair(c.e.value, c.m.value);
        },
        py::arg("data"), py::arg("formulas"), py::arg("k"), py::arg("seed") = 1,
        "(k-subsets whose fragment satisfies the formulas, width-k worlds satisfying them)");

    m.def(
        "exact_encoding",
        [](const GlobalExample& data, int k) { return theory_from(exact_encoding(data, k), data.signature()); },
        py::arg("data"), py::arg("k"));

    m.def(
        "synth",
        [](const PyTheory& t, int n, std::uint64_t seed) { return synth_generate(t.theory, t.sig, n, seed); },
        py::arg("theory"), py::arg("n"), py::arg("seed") = 1, "A world over constants c1..cn drawn from the theory.");
}
