// Python bindings for the main library operations.  Thin wrappers only:
// construct value types, call through, translate errors.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "specgram/contour.hpp"
#include "specgram/detequiv.hpp"
#include "specgram/errors.hpp"
#include "specgram/fluct.hpp"
#include "specgram/io.hpp"
#include "specgram/mimo.hpp"
#include "specgram/profile.hpp"
#include "specgram/qexpr.hpp"
#include "specgram/rng.hpp"
#include "specgram/simulate.hpp"

namespace py = pybind11;
using namespace specgram;

namespace {

VarianceProfile make_profile(const Eigen::MatrixXd& sigma2) {
    return VarianceProfile::dense(sigma2);
}

EntryModel model_by_name(const std::string& name, double shape, double scale) {
    if (name == "real_gaussian") return EntryModel::real_gaussian();
    if (name == "complex_gaussian") return EntryModel::complex_gaussian();
    if (name == "shifted_gamma") return EntryModel::shifted_gamma(shape, scale);
    throw ConfigError("unknown entry model '" + name + "'");
}

SparsityConfig sparsity_by_kind(const std::string& kind, double value, int n,
                                const std::string& regime) {
    Regime r;
    if (regime == "moderate")
        r = Regime::Moderate;
    else if (regime == "high")
        r = Regime::High;
    else
        throw ConfigError("regime must be 'moderate' or 'high'");
    if (kind == "q") return SparsityConfig::from_q(value, n, r);
    if (kind == "s") return SparsityConfig::from_s(value, n, r);
    throw ConfigError("sparsity kind must be 'q' or 's'");
}

}  // namespace

PYBIND11_MODULE(_specgram, m) {
    m.doc() = "spectral statistics of masked random Gram matrices";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<SingularityError>(m, "SingularityError", PyExc_ArithmeticError);

    // ---------------------------------------------------------------- profile

    py::class_<VarianceProfile>(m, "VarianceProfile")
        .def_readonly("p", &VarianceProfile::p)
        .def_readonly("n", &VarianceProfile::n)
        .def_readonly("sigma2", &VarianceProfile::sigma2)
        .def_readonly("c", &VarianceProfile::c)
        .def_readonly("separable", &VarianceProfile::separable)
        .def("sigma2_max", &VarianceProfile::sigma2_max)
        .def_static("constant", &VarianceProfile::constant, py::arg("p"), py::arg("n"),
                    py::arg("value") = 1.0)
        .def_static("dense", &make_profile, py::arg("sigma2"));
    m.def("make_separable_profile", &make_separable_profile, py::arg("d"), py::arg("d_tilde"));
    m.def("load_profile", &load_profile, py::arg("path"));

    py::class_<SparsityConfig>(m, "SparsityConfig")
        .def_readonly("q", &SparsityConfig::q)
        .def_readonly("s", &SparsityConfig::s)
        .def_readonly("phi", &SparsityConfig::phi)
        .def("__repr__", [](const SparsityConfig& c) {
            return "SparsityConfig(q=" + std::to_string(c.q) + ", s=" + std::to_string(c.s) +
                   ")";
        });
    m.def("sparsity", &sparsity_by_kind, py::arg("kind"), py::arg("value"), py::arg("n"),
          py::arg("regime") = "moderate",
          "Sparsity configuration from kind='q' (q level) or kind='s' (mask density).");
    m.def("eval_q_expression", &eval_q_expression, py::arg("expr"), py::arg("n"));

    py::class_<EntryModel>(m, "EntryModel")
        .def_readonly("kappa", &EntryModel::kappa)
        .def_readonly("nu4", &EntryModel::nu4)
        .def_readonly("name", &EntryModel::name);
    m.def("entry_model", &model_by_name, py::arg("name"), py::arg("shape") = 2.0,
          py::arg("scale") = 1.0,
          "Entry model by name: real_gaussian, complex_gaussian, shifted_gamma.");

    // ---------------------------------------------------------------- detequiv

    py::class_<DetEquivalent>(m, "DetEquivalent")
        .def_readonly("z", &DetEquivalent::z)
        .def_readonly("t", &DetEquivalent::t)
        .def_readonly("t_tilde", &DetEquivalent::t_tilde)
        .def_readonly("residual", &DetEquivalent::residual)
        .def_readonly("iterations", &DetEquivalent::iterations);
    m.def("solve_canonical_system", &solve_canonical_system, py::arg("profile"), py::arg("z"),
          py::arg("tol") = 1e-12, py::arg("max_iter") = 10000);

    py::class_<StieltjesPair>(m, "StieltjesPair")
        .def_readonly("m0", &StieltjesPair::m0)
        .def_readonly("m0_under", &StieltjesPair::m0_under);
    m.def("stieltjes_m0", &stieltjes_m0, py::arg("det"));
    m.def("lsd_density", &lsd_density, py::arg("profile"), py::arg("x_grid"), py::arg("eta"));
    m.def("spectral_support_bound", &spectral_support_bound, py::arg("profile"));

    // ---------------------------------------------------------------- contours & fluct

    py::class_<Contour>(m, "Contour")
        .def(py::init<>())
        .def_readwrite("x_left", &Contour::x_left)
        .def_readwrite("x_right", &Contour::x_right)
        .def_readwrite("v0", &Contour::v0)
        .def_readwrite("nodes_per_edge", &Contour::nodes_per_edge);
    m.def("dilate", &dilate, py::arg("contour"), py::arg("factor"));

    py::class_<TestFunction>(m, "TestFunction")
        .def_readonly("name", &TestFunction::name)
        .def("__call__",
             [](const TestFunction& f, cplx z) { return f.value(z); });
    m.def("test_function", &tf_from_name, py::arg("spec"),
          "Built-in test function: 'x', 'x2', or 'log1p_scaled:<sigma2>'.");
    m.def("default_contour", &default_contour, py::arg("profile"), py::arg("f"),
          py::arg("nodes_per_edge") = 200);

    py::class_<QuadratureDiagnostics>(m, "QuadratureDiagnostics")
        .def_readonly("nodes_per_edge", &QuadratureDiagnostics::nodes_per_edge)
        .def_readonly("rel_change_on_doubling", &QuadratureDiagnostics::rel_change_on_doubling)
        .def_readonly("accuracy_warning", &QuadratureDiagnostics::accuracy_warning);

    m.def(
        "lsd_integral",
        [](const VarianceProfile& profile, const TestFunction& f, const Contour& contour) {
            return lsd_integral(profile, f.value, contour);
        },
        py::arg("profile"), py::arg("f"), py::arg("contour"),
        "Integral of f against the deterministic spectral measure.");
    m.def(
        "clt_mean",
        [](const VarianceProfile& profile, const TestFunction& f, const Contour& contour,
           const SparsityConfig& sparsity, const EntryModel& model) {
            return clt_mean(profile, f, contour, sparsity, model);
        },
        py::arg("profile"), py::arg("f"), py::arg("contour"), py::arg("sparsity"),
        py::arg("model"));
    m.def(
        "clt_cov",
        [](const VarianceProfile& profile, const TestFunction& f, const TestFunction& g,
           const Contour& c1, const Contour& c2, const SparsityConfig& sparsity,
           const EntryModel& model) {
            return clt_cov(profile, f, g, c1, c2, sparsity, model);
        },
        py::arg("profile"), py::arg("f"), py::arg("g"), py::arg("c1"), py::arg("c2"),
        py::arg("sparsity"), py::arg("model"));
    m.def("corrected_centering", &corrected_centering, py::arg("profile"), py::arg("f"),
          py::arg("contour"), py::arg("sparsity"), py::arg("model"));

    // ---------------------------------------------------------------- simulate

    py::class_<GramSample>(m, "GramSample")
        .def_readonly("S", &GramSample::S)
        .def_readonly("eigenvalues", &GramSample::eigenvalues)
        .def_readonly("mask_density", &GramSample::mask_density)
        .def_readonly("seed", &GramSample::seed);
    m.def("sample_gram", &sample_gram, py::arg("profile"), py::arg("sparsity"),
          py::arg("model"), py::arg("seed"));
    m.def(
        "centered_lss",
        [](const VarianceProfile& profile, const GramSample& sample, const TestFunction& f,
           const Contour& contour, const SparsityConfig& sparsity, const EntryModel& model) {
            return centered_lss(profile, sample, f, contour, sparsity, model);
        },
        py::arg("profile"), py::arg("sample"), py::arg("f"), py::arg("contour"),
        py::arg("sparsity"), py::arg("model"));
    m.def("quadratic_form_oracle", &quadratic_form_oracle, py::arg("A"), py::arg("B"),
          py::arg("sigma2"), py::arg("model"), py::arg("s"));

    py::class_<McBatteryResult>(m, "McBatteryResult")
        .def_readonly("stats", &McBatteryResult::stats)
        .def_readonly("replications", &McBatteryResult::replications)
        .def_readonly("statistic_name", &McBatteryResult::statistic_name)
        .def_readonly("mean", &McBatteryResult::mean)
        .def_readonly("se_mean", &McBatteryResult::se_mean)
        .def_readonly("var", &McBatteryResult::var)
        .def_readonly("mean_theory", &McBatteryResult::mean_theory)
        .def_readonly("var_theory", &McBatteryResult::var_theory)
        .def_readonly("ks_empirical", &McBatteryResult::ks_empirical)
        .def_readonly("ks_theory", &McBatteryResult::ks_theory)
        .def_readonly("seed", &McBatteryResult::seed);
    m.def("mc_battery", &mc_battery, py::arg("profile"), py::arg("sparsity"), py::arg("model"),
          py::arg("f"), py::arg("contour"), py::arg("replications"), py::arg("seed"),
          py::call_guard<py::gil_scoped_release>());

    // ---------------------------------------------------------------- mimo

    py::class_<EqualityTest>(m, "EqualityTest")
        .def_readonly("stat", &EqualityTest::stat)
        .def_readonly("t", &EqualityTest::t)
        .def_readonly("threshold", &EqualityTest::threshold)
        .def_readonly("reject", &EqualityTest::reject)
        .def_readonly("s_hat", &EqualityTest::s_hat)
        .def_readonly("q_hat", &EqualityTest::q_hat)
        .def_readonly("sigma2_null", &EqualityTest::sigma2_null);
    m.def(
        "equality_test",
        [](const Eigen::MatrixXcd& H1, const Eigen::MatrixXcd& H2, double alpha,
           const EntryModel& model, std::optional<double> known_s) {
            return equality_test(H1, H2, alpha, model, known_s);
        },
        py::arg("H1"), py::arg("H2"), py::arg("alpha"), py::arg("model"),
        py::arg("known_s") = std::nullopt);
    m.def("predicted_power", &predicted_power, py::arg("l1"), py::arg("l2"), py::arg("n_r"),
          py::arg("s"), py::arg("alpha"), py::arg("model"));
    m.def("mutual_information", &mutual_information, py::arg("H"), py::arg("sigma2"));

    py::class_<MiCltParams>(m, "MiCltParams")
        .def_readonly("V", &MiCltParams::V)
        .def_readonly("mu", &MiCltParams::mu)
        .def_readonly("sigma", &MiCltParams::sigma)
        .def_readonly("delta", &MiCltParams::delta)
        .def_readonly("delta_tilde", &MiCltParams::delta_tilde);
    m.def("mi_clt_params",
          py::overload_cast<const Eigen::VectorXd&, int, double, const SparsityConfig&,
                            const EntryModel&>(&mi_clt_params),
          py::arg("l"), py::arg("n_r"), py::arg("sigma2"), py::arg("sparsity"),
          py::arg("model"));
    m.def("mi_clt_params_weighted", &mi_clt_params_weighted, py::arg("d"), py::arg("d_tilde"),
          py::arg("sigma2"), py::arg("sparsity"), py::arg("model"));
    m.def("mi_t_statistic", &mi_t_statistic, py::arg("params"), py::arg("mi"), py::arg("n_r"),
          py::arg("q"));
    m.def("outage_probability", &outage_probability, py::arg("params"), py::arg("rate"),
          py::arg("n_r"), py::arg("q"));
}
