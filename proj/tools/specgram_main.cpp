// specgram: command-line front end for the masked-Gram spectral library.
//
// Subcommands: lsd, clt, simulate, test-equality, outage, oracle.
// Conventions shared by every subcommand:
//   - CSV artifacts start with "# key: value" metadata lines (version,
//     config hash, seed where randomness is involved) so each file is
//     self-describing and reruns are byte-identical.
//   - JSON for configs and summaries, CSV for bulk numeric output.
//   - exit 0 on success, 2 on configuration errors, 3 on numerical failures;
//     failures emit a one-line JSON error record on stderr.
//   - SPECGRAM_THREADS (or --threads) caps parallelism and never changes
//     numeric output.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

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
#include "specgram/stats.hpp"

namespace sg = specgram;
using json = nlohmann::json;
using cplx = std::complex<double>;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- small helpers

std::string hash_hex(const std::string& canonical) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(sg::fnv1a64(canonical)));
    return std::string(buf);
}

struct Grid {
    double lo = 0.0, hi = 0.0;
    int intervals = 0;
};

// "a:b:m" -> m intervals, m+1 evenly spaced points from a to b inclusive.
Grid parse_grid(const std::string& spec) {
    Grid g;
    char colon1 = 0, colon2 = 0;
    std::istringstream in(spec);
    if (!(in >> g.lo >> colon1 >> g.hi >> colon2 >> g.intervals) || colon1 != ':' ||
        colon2 != ':' || !in.eof())
        throw sg::ConfigError("grid must be a:b:m, got '" + spec + "'");
    if (!(g.hi > g.lo)) throw sg::ConfigError("grid needs b > a, got '" + spec + "'");
    if (g.intervals < 1) throw sg::ConfigError("grid needs m >= 1, got '" + spec + "'");
    return g;
}

Eigen::VectorXd grid_points(const Grid& g) {
    Eigen::VectorXd x(g.intervals + 1);
    const double h = (g.hi - g.lo) / g.intervals;
    for (int k = 0; k <= g.intervals; ++k) x[k] = g.lo + h * k;
    return x;
}

// Entry-model names accepted on the command line and in config JSON:
//   "real-gaussian", "complex-gaussian", "gamma:<shape>[:<scale>]"
// ("_" and "-" are interchangeable).
sg::EntryModel parse_model(const std::string& raw) {
    std::string name = raw;
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "real-gaussian") return sg::EntryModel::real_gaussian();
    if (name == "complex-gaussian") return sg::EntryModel::complex_gaussian();
    if (name.rfind("gamma:", 0) == 0) {
        std::string rest = name.substr(6);
        double shape = 0.0, scale = 1.0;
        auto colon = rest.find(':');
        try {
            if (colon == std::string::npos) {
                shape = std::stod(rest);
            } else {
                shape = std::stod(rest.substr(0, colon));
                scale = std::stod(rest.substr(colon + 1));
            }
        } catch (const std::exception&) {
            throw sg::ConfigError("cannot parse gamma model '" + raw + "'");
        }
        return sg::EntryModel::shifted_gamma(shape, scale);
    }
    throw sg::ConfigError("unknown entry model '" + raw +
                          "' (want real-gaussian, complex-gaussian, or gamma:shape[:scale])");
}

sg::Regime parse_regime(const std::string& name) {
    if (name == "moderate") return sg::Regime::Moderate;
    if (name == "high") return sg::Regime::High;
    throw sg::ConfigError("regime must be 'moderate' or 'high', got '" + name + "'");
}

// q expression -> sparsity config, enforcing the CLI-level admissible window
// n^{1/4} <= q <= sqrt(n) (the library itself only needs s in (0,1]).
sg::SparsityConfig sparsity_from_q_expr(const std::string& expr, int n, sg::Regime regime) {
    const double q = sg::eval_q_expression(expr, n);
    const double lo = std::pow(static_cast<double>(n), 0.25);
    const double hi = std::sqrt(static_cast<double>(n));
    if (q < lo * (1.0 - 1e-12) || q > hi * (1.0 + 1e-12))
        throw sg::ConfigError("q = " + std::to_string(q) + " outside [n^(1/4), sqrt(n)] = [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "] for n = " +
                              std::to_string(n));
    return sg::SparsityConfig::from_q(q, n, regime);
}

// Vector from a CSV holding either one column or one row.
Eigen::VectorXd read_vector_csv_file(const std::string& path) {
    Eigen::MatrixXd m = sg::read_matrix_csv(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw sg::ConfigError(path + ": expected a single-column (or single-row) CSV vector");
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw sg::ConfigError("cannot open output file '" + path + "'");
    return file;
}

void write_meta(std::ostream& os, const sg::Metadata& meta) {
    for (const auto& [k, v] : meta) os << "# " << k << ": " << v << "\n";
}

void emit_json(const std::string& path, const json& doc) {
    std::ofstream file;
    std::ostream& os = open_out(path, file);
    os << doc.dump(2) << "\n";
}

json diag_json(const sg::QuadratureDiagnostics& d) {
    return json{{"nodes_per_edge", d.nodes_per_edge},
                {"rel_change_on_doubling", d.rel_change_on_doubling},
                {"accuracy_warning", d.accuracy_warning}};
}

// Contour shared by a pair of test functions: tightest left edge that clears
// both singularities.
sg::Contour pair_contour(const sg::VarianceProfile& profile, const sg::TestFunction& f,
                         const sg::TestFunction& g, int nodes_per_edge) {
    sg::Contour cf = sg::default_contour(profile, f, nodes_per_edge);
    sg::Contour cg = sg::default_contour(profile, g, nodes_per_edge);
    cf.x_left = std::max(cf.x_left, cg.x_left);
    return cf;
}

double rightmost_singularity(const sg::TestFunction& f, const sg::TestFunction& g) {
    double s = -std::numeric_limits<double>::infinity();
    if (std::isfinite(f.real_singularity)) s = std::max(s, f.real_singularity);
    if (std::isfinite(g.real_singularity)) s = std::max(s, g.real_singularity);
    return s;
}

// ---------------------------------------------------------------- lsd

struct LsdArgs {
    std::string profile, grid, out = "-";
    double eta = 1e-4;
};

int run_lsd(const LsdArgs& a) {
    sg::VarianceProfile profile = sg::load_profile(a.profile);
    Grid g = parse_grid(a.grid);
    Eigen::VectorXd x = grid_points(g);
    Eigen::VectorXd density = sg::lsd_density(profile, x, a.eta);

    const std::string canonical = "lsd|profile=" + a.profile + "|grid=" + a.grid +
                                  "|eta=" + sg::fmt_g(a.eta);
    sg::Metadata meta{{"version", kVersion},
                      {"command", "lsd"},
                      {"profile", a.profile},
                      {"grid", a.grid},
                      {"eta", sg::fmt_g(a.eta)},
                      {"config_hash", hash_hex(canonical)}};
    std::ofstream file;
    std::ostream& os = open_out(a.out, file);
    write_meta(os, meta);
    os << "x,density\n";
    for (Eigen::Index k = 0; k < x.size(); ++k)
        os << sg::fmt_g(x[k]) << "," << sg::fmt_g(density[k]) << "\n";
    return 0;
}

// ---------------------------------------------------------------- clt

struct CltArgs {
    std::string profile, f, g, regime, q, model = "real-gaussian", out = "-";
    int edge_nodes = 200;
};

int run_clt(const CltArgs& a) {
    sg::VarianceProfile profile = sg::load_profile(a.profile);
    sg::Regime regime = parse_regime(a.regime);
    sg::SparsityConfig sparsity = sparsity_from_q_expr(a.q, profile.n, regime);
    sg::EntryModel model = parse_model(a.model);
    sg::TestFunction f = sg::tf_from_name(a.f);
    sg::TestFunction g = a.g.empty() ? f : sg::tf_from_name(a.g);

    sg::Contour c1 = pair_contour(profile, f, g, a.edge_nodes);
    sg::Contour c2 = sg::dilate(c1, 1.15);
    const double sing = rightmost_singularity(f, g);
    if (std::isfinite(sing) && c2.x_left <= sing)
        throw sg::ConfigError("dilated covariance contour crosses the test-function "
                              "singularity at " + std::to_string(sing));

    sg::QuadratureDiagnostics mean_diag, cov_diag;
    const double mean = sg::clt_mean(profile, f, c1, sparsity, model, &mean_diag);
    const double cov = sg::clt_cov(profile, f, g, c1, c2, sparsity, model, &cov_diag);

    const std::string canonical = "clt|profile=" + a.profile + "|f=" + f.name +
                                  "|g=" + g.name + "|regime=" + a.regime + "|q=" + a.q +
                                  "|model=" + a.model +
                                  "|edge_nodes=" + std::to_string(a.edge_nodes);
    json doc{{"version", kVersion},
             {"command", "clt"},
             {"config_hash", hash_hex(canonical)},
             {"config",
              {{"profile", a.profile},
               {"f", f.name},
               {"g", g.name},
               {"regime", a.regime},
               {"q", a.q},
               {"q_value", sparsity.q},
               {"s", sparsity.s},
               {"model", a.model},
               {"kappa", model.kappa},
               {"nu4", model.nu4},
               {"edge_nodes", a.edge_nodes}}},
             {"mean", mean},
             {"cov", cov},
             {"quadrature_diagnostics",
              {{"mean", diag_json(mean_diag)}, {"cov", diag_json(cov_diag)}}}};
    emit_json(a.out, doc);
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config, out;
};

sg::EntryModel model_from_json(const json& j) {
    if (j.is_string()) return parse_model(j.get<std::string>());
    if (j.is_object()) {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind.rfind("gamma", 0) == 0 || kind == "shifted_gamma") {
            double shape = j.value("shape", 2.0);
            double scale = j.value("scale", 1.0);
            return sg::EntryModel::shifted_gamma(shape, scale);
        }
        return parse_model(kind);
    }
    throw sg::ConfigError("model must be a string or an object with a 'kind' field");
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw sg::ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw sg::ConfigError(path + ": " + e.what());
    }
    return j;
}

// Resolve a path mentioned inside a config file relative to that file.
std::string resolve_relative(const std::string& base_file, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_file).parent_path() / p).string();
}

struct SimulateConfig {
    sg::VarianceProfile profile;
    sg::SparsityConfig sparsity;
    sg::EntryModel model;
    sg::TestFunction f;
    std::int64_t replications = 0;
    std::uint64_t seed = 1;
    int edge_nodes = 200;
    std::string profile_src, q_expr, regime_name, model_name, f_name;
};

SimulateConfig parse_simulate_config(const std::string& path) {
    json j = load_json_file(path);
    SimulateConfig c{.profile = sg::VarianceProfile::constant(1, 1, 1.0),
                     .sparsity = {},
                     .model = sg::EntryModel::real_gaussian(),
                     .f = sg::tf_x()};
    try {
        c.profile_src = j.at("profile").get<std::string>();
        c.profile = sg::load_profile(resolve_relative(path, c.profile_src));
        c.regime_name = j.at("regime").get<std::string>();
        sg::Regime regime = parse_regime(c.regime_name);
        const json& sp = j.at("sparsity");
        if (sp.contains("q")) {
            c.q_expr = sp.at("q").is_string() ? sp.at("q").get<std::string>()
                                              : sg::fmt_g(sp.at("q").get<double>());
            c.sparsity = sparsity_from_q_expr(c.q_expr, c.profile.n, regime);
        } else if (sp.contains("s")) {
            double s = sp.at("s").get<double>();
            c.q_expr = "s=" + sg::fmt_g(s);
            c.sparsity = sg::SparsityConfig::from_s(s, c.profile.n, regime);
        } else {
            throw sg::ConfigError("sparsity needs a 'q' expression or an 's' value");
        }
        c.model = model_from_json(j.at("model"));
        c.model_name = j.at("model").is_string() ? j.at("model").get<std::string>()
                                                 : c.model.name;
        c.f_name = j.at("f").get<std::string>();
        c.f = sg::tf_from_name(c.f_name);
        c.replications = j.at("replications").get<std::int64_t>();
        c.seed = j.value("seed", std::uint64_t{1});
        c.edge_nodes = j.value("edge_nodes", 200);
    } catch (const json::exception& e) {
        throw sg::ConfigError(path + ": " + e.what());
    }
    return c;
}

std::string summary_path_for(const std::string& out_csv) {
    const std::string suffix = ".csv";
    if (out_csv.size() > suffix.size() &&
        out_csv.compare(out_csv.size() - suffix.size(), suffix.size(), suffix) == 0)
        return out_csv.substr(0, out_csv.size() - suffix.size()) + ".summary.json";
    return out_csv + ".summary.json";
}

int run_simulate(const SimulateArgs& a) {
    SimulateConfig c = parse_simulate_config(a.config);
    sg::Contour contour = sg::default_contour(c.profile, c.f, c.edge_nodes);
    sg::McBatteryResult res = sg::mc_battery(c.profile, c.sparsity, c.model, c.f, contour,
                                             c.replications, c.seed);

    const std::string canonical =
        "simulate|profile=" + c.profile_src + "|sparsity=" + c.q_expr +
        "|regime=" + c.regime_name + "|model=" + c.model_name + "|f=" + c.f_name +
        "|replications=" + std::to_string(c.replications) +
        "|seed=" + std::to_string(c.seed) + "|edge_nodes=" + std::to_string(c.edge_nodes);
    const std::string hash = hash_hex(canonical);

    sg::Metadata meta{{"version", kVersion},
                      {"command", "simulate"},
                      {"config", a.config},
                      {"config_hash", hash},
                      {"seed", std::to_string(c.seed)},
                      {"statistic", res.statistic_name}};
    std::ofstream file;
    std::ostream& os = open_out(a.out, file);
    write_meta(os, meta);
    os << "rep,statistic,value\n";
    for (std::int64_t r = 0; r < res.replications; ++r)
        os << r << "," << res.statistic_name << ","
           << sg::fmt_g(res.stats[static_cast<std::size_t>(r)]) << "\n";
    if (&os != &std::cout) file.close();

    json summary{{"version", kVersion},
                 {"command", "simulate"},
                 {"config", a.config},
                 {"config_hash", hash},
                 {"seed", c.seed},
                 {"replications", res.replications},
                 {"statistic", res.statistic_name},
                 {"mean", res.mean},
                 {"se_mean", res.se_mean},
                 {"var", res.var},
                 {"mean_theory", res.mean_theory},
                 {"var_theory", res.var_theory},
                 {"ks_empirical", res.ks_empirical},
                 {"ks_theory", res.ks_theory}};
    emit_json(a.out == "-" ? "-" : summary_path_for(a.out), summary);
    return 0;
}

// ---------------------------------------------------------------- test-equality

struct EqualityArgs {
    std::string h1, h2, h1_imag, h2_imag, config, out = "-";
    std::string model = "real-gaussian";
    double alpha = 0.05;
    double nu4 = 0.0;  // 0 = take from model
    double known_s = 0.0;  // 0 = estimate from H1
};

Eigen::MatrixXcd read_channel(const std::string& re_path, const std::string& im_path) {
    Eigen::MatrixXd re = sg::read_matrix_csv(re_path);
    Eigen::MatrixXcd H = re.cast<cplx>();
    if (!im_path.empty()) {
        Eigen::MatrixXd im = sg::read_matrix_csv(im_path);
        if (im.rows() != re.rows() || im.cols() != re.cols())
            throw sg::ConfigError("real and imaginary channel parts have different shapes");
        H.imag() = im;
    }
    return H;
}

json equality_json(const sg::EqualityTest& r, double alpha) {
    return json{{"stat", r.stat},          {"t", r.t},
                {"threshold", r.threshold}, {"reject", r.reject},
                {"alpha", alpha},           {"s_hat", r.s_hat},
                {"q_hat", r.q_hat},         {"sigma2_null", r.sigma2_null}};
}

int run_equality_single(const EqualityArgs& a) {
    Eigen::MatrixXcd H1 = read_channel(a.h1, a.h1_imag);
    Eigen::MatrixXcd H2 = read_channel(a.h2, a.h2_imag);
    sg::EntryModel model = parse_model(a.model);
    if (a.nu4 > 0.0) model.nu4 = a.nu4;
    std::optional<double> known;
    if (a.known_s > 0.0) known = a.known_s;
    sg::EqualityTest r = sg::equality_test(H1, H2, a.alpha, model, known);

    const std::string canonical = "test-equality|h1=" + a.h1 + "|h2=" + a.h2 +
                                  "|alpha=" + sg::fmt_g(a.alpha) +
                                  "|nu4=" + sg::fmt_g(model.nu4);
    json doc = equality_json(r, a.alpha);
    doc["version"] = kVersion;
    doc["command"] = "test-equality";
    doc["config_hash"] = hash_hex(canonical);
    doc["nu4"] = model.nu4;
    emit_json(a.out, doc);
    return 0;
}

struct EqualityMcConfig {
    int n_r = 0, n_t = 0;
    std::string q_expr;
    sg::SparsityConfig sparsity{};
    double theta = 0.0;
    double alpha = 0.05;
    double amp_low = 2.0, amp_high = 4.0;
    sg::EntryModel model = sg::EntryModel::real_gaussian();
    std::string model_name = "real-gaussian";
    bool use_known_s = false;
    std::int64_t replications = 0;
    std::uint64_t seed = 1;
};

EqualityMcConfig parse_equality_config(const std::string& path) {
    json j = load_json_file(path);
    EqualityMcConfig c;
    try {
        c.n_r = j.at("n_r").get<int>();
        c.n_t = j.at("n_t").get<int>();
        if (c.n_r < 1 || c.n_t < 1) throw sg::ConfigError("n_r and n_t must be positive");
        c.q_expr = j.at("q").is_string() ? j.at("q").get<std::string>()
                                         : sg::fmt_g(j.at("q").get<double>());
        c.sparsity = sparsity_from_q_expr(c.q_expr, c.n_t, sg::Regime::Moderate);
        c.theta = j.value("theta", 0.0);
        c.alpha = j.value("alpha", 0.05);
        if (j.contains("amplitude")) {
            const json& amp = j.at("amplitude");
            c.amp_low = amp.value("low", 2.0);
            c.amp_high = amp.value("high", 4.0);
        }
        if (!(c.amp_low > 0.0) || !(c.amp_high >= c.amp_low))
            throw sg::ConfigError("amplitude law needs 0 < low <= high");
        if (c.theta < 0.0 || c.theta >= c.amp_low)
            throw sg::ConfigError("theta must lie in [0, amplitude low)");
        if (j.contains("model")) {
            c.model = model_from_json(j.at("model"));
            c.model_name =
                j.at("model").is_string() ? j.at("model").get<std::string>() : c.model.name;
        }
        c.use_known_s = j.value("use_known_s", false);
        c.replications = j.at("replications").get<std::int64_t>();
        if (c.replications < 1) throw sg::ConfigError("replications must be positive");
        c.seed = j.value("seed", std::uint64_t{1});
    } catch (const json::exception& e) {
        throw sg::ConfigError(path + ": " + e.what());
    }
    return c;
}

int run_equality_mc(const EqualityArgs& a) {
    EqualityMcConfig c = parse_equality_config(a.config);
    const std::size_t reps = static_cast<std::size_t>(c.replications);
    std::vector<double> t_vals(reps), power_vals(reps);
    std::vector<std::uint8_t> rejected(reps, 0);
    std::vector<std::string> errs(reps);

    sg::parallel_for(reps, [&](std::size_t r) {
        try {
            std::mt19937_64 rng = sg::make_stream(c.seed, r + 1);
            std::uniform_real_distribution<double> amp(c.amp_low, c.amp_high);
            Eigen::VectorXd l1(c.n_t);
            for (int jcol = 0; jcol < c.n_t; ++jcol) l1[jcol] = amp(rng);
            Eigen::VectorXd l2 = l1.array() - c.theta;
            Eigen::MatrixXcd H1 = sg::sample_channel(c.n_r, l1, c.sparsity.s, c.model, rng);
            Eigen::MatrixXcd H2 = sg::sample_channel(c.n_r, l2, c.sparsity.s, c.model, rng);
            std::optional<double> known;
            if (c.use_known_s) known = c.sparsity.s;
            sg::EqualityTest res = sg::equality_test(H1, H2, c.alpha, c.model, known);
            t_vals[r] = res.t;
            rejected[r] = res.reject ? 1 : 0;
            power_vals[r] =
                sg::predicted_power(l1, l2, c.n_r, c.sparsity.s, c.alpha, c.model);
        } catch (const std::exception& e) {
            errs[r] = e.what();
        }
    });
    for (std::size_t r = 0; r < reps; ++r)
        if (!errs[r].empty())
            throw sg::NumericalError("test-equality: replication " + std::to_string(r) +
                                     " failed: " + errs[r]);

    std::int64_t n_reject = 0;
    for (std::uint8_t b : rejected) n_reject += b;
    sg::MeanVar t_mv = sg::mean_var(t_vals);
    sg::MeanVar pw_mv = sg::mean_var(power_vals);

    const std::string canonical =
        "test-equality|n_r=" + std::to_string(c.n_r) + "|n_t=" + std::to_string(c.n_t) +
        "|q=" + c.q_expr + "|theta=" + sg::fmt_g(c.theta) + "|alpha=" + sg::fmt_g(c.alpha) +
        "|amp=" + sg::fmt_g(c.amp_low) + ".." + sg::fmt_g(c.amp_high) +
        "|model=" + c.model_name + "|known_s=" + (c.use_known_s ? "1" : "0") +
        "|replications=" + std::to_string(c.replications) +
        "|seed=" + std::to_string(c.seed);
    json doc{{"version", kVersion},
             {"command", "test-equality"},
             {"config", a.config},
             {"config_hash", hash_hex(canonical)},
             {"seed", c.seed},
             {"n_r", c.n_r},
             {"n_t", c.n_t},
             {"q", c.q_expr},
             {"q_value", c.sparsity.q},
             {"s", c.sparsity.s},
             {"theta", c.theta},
             {"alpha", c.alpha},
             {"model", c.model_name},
             {"replications", c.replications},
             {"rejection_rate", static_cast<double>(n_reject) / static_cast<double>(reps)},
             {"mean_t", t_mv.mean},
             {"var_t", t_mv.var},
             {"predicted_power_mean", pw_mv.mean}};
    emit_json(a.out, doc);
    return 0;
}

int run_equality(const EqualityArgs& a) {
    const bool file_mode = !a.h1.empty() || !a.h2.empty();
    const bool mc_mode = !a.config.empty();
    if (file_mode == mc_mode)
        throw sg::ConfigError("test-equality needs either --h1/--h2 or --config (not both)");
    if (file_mode && (a.h1.empty() || a.h2.empty()))
        throw sg::ConfigError("test-equality needs both --h1 and --h2");
    return file_mode ? run_equality_single(a) : run_equality_mc(a);
}

// ---------------------------------------------------------------- outage

struct OutageArgs {
    std::string d, dt, rate_grid, q, out = "-";
    std::string model = "complex-gaussian";
    std::vector<double> snr_db;
    std::int64_t reps = 0;
    std::uint64_t seed = 1;
};

int run_outage(const OutageArgs& a) {
    Eigen::VectorXd d = read_vector_csv_file(a.d);
    Eigen::VectorXd dt = read_vector_csv_file(a.dt);
    const int n_r = static_cast<int>(d.size());
    const int n_t = static_cast<int>(dt.size());
    sg::SparsityConfig sparsity = sparsity_from_q_expr(a.q, n_t, sg::Regime::Moderate);
    sg::EntryModel model = parse_model(a.model);
    Grid rg = parse_grid(a.rate_grid);
    Eigen::VectorXd rates = grid_points(rg);
    if (a.snr_db.empty()) throw sg::ConfigError("outage needs at least one --snr-db value");

    const bool empirical = a.reps > 0;
    if (empirical && ((d.array() - 1.0).abs() > 1e-12).any())
        throw sg::ConfigError("empirical outage sampling requires unit receive weights "
                              "(--d all ones)");

    std::ostringstream snr_list;
    for (std::size_t k = 0; k < a.snr_db.size(); ++k)
        snr_list << (k ? "," : "") << sg::fmt_g(a.snr_db[k]);
    const std::string canonical = "outage|d=" + a.d + "|dt=" + a.dt +
                                  "|snr=" + snr_list.str() + "|rates=" + a.rate_grid +
                                  "|q=" + a.q + "|model=" + a.model +
                                  "|reps=" + std::to_string(a.reps) +
                                  "|seed=" + std::to_string(a.seed);

    sg::Metadata meta{{"version", kVersion},          {"command", "outage"},
                      {"n_r", std::to_string(n_r)},   {"n_t", std::to_string(n_t)},
                      {"q_value", sg::fmt_g(sparsity.q)}, {"s", sg::fmt_g(sparsity.s)},
                      {"model", a.model},             {"config_hash", hash_hex(canonical)}};
    if (empirical) {
        meta.emplace_back("replications", std::to_string(a.reps));
        meta.emplace_back("seed", std::to_string(a.seed));
    }

    // Empirical channels do not depend on the noise level, so one eigenvalue
    // set per replication serves every SNR and rate.
    std::vector<Eigen::VectorXd> eigs;
    if (empirical) {
        eigs.resize(static_cast<std::size_t>(a.reps));
        Eigen::VectorXd l = dt.array().sqrt();
        std::vector<std::string> errs(static_cast<std::size_t>(a.reps));
        sg::parallel_for(static_cast<std::size_t>(a.reps), [&](std::size_t r) {
            try {
                std::mt19937_64 rng = sg::make_stream(a.seed, r + 1);
                Eigen::MatrixXcd H = sg::sample_channel(n_r, l, sparsity.s, model, rng);
                eigs[r] = sg::eigenvalues(Eigen::MatrixXcd(H * H.adjoint()));
            } catch (const std::exception& e) {
                errs[r] = e.what();
            }
        });
        for (std::size_t r = 0; r < errs.size(); ++r)
            if (!errs[r].empty())
                throw sg::NumericalError("outage: replication " + std::to_string(r) +
                                         " failed: " + errs[r]);
    }

    std::ofstream file;
    std::ostream& os = open_out(a.out, file);

    std::vector<std::string> rows;
    for (double snr : a.snr_db) {
        const double sigma2 = std::pow(10.0, -snr / 10.0);
        sg::MiCltParams params =
            sg::mi_clt_params_weighted(d, dt, sigma2, sparsity, model);
        meta.emplace_back("snr_" + sg::fmt_g(snr),
                          "sigma2=" + sg::fmt_g(sigma2) + " V=" + sg::fmt_g(params.V) +
                              " mu=" + sg::fmt_g(params.mu) +
                              " sigma=" + sg::fmt_g(params.sigma));
        std::vector<double> mi;
        if (empirical) {
            mi.resize(eigs.size());
            for (std::size_t r = 0; r < eigs.size(); ++r)
                mi[r] = (eigs[r].array() / sigma2).log1p().sum();
        }
        for (Eigen::Index k = 0; k < rates.size(); ++k) {
            const double theory =
                sg::outage_probability(params, rates[k], n_r, sparsity.q);
            std::string row = sg::fmt_g(rates[k]) + "," + sg::fmt_g(snr) + "," +
                              sg::fmt_g(theory);
            if (empirical) {
                std::int64_t below = 0;
                for (double v : mi)
                    if (v < rates[k]) ++below;
                row += "," + sg::fmt_g(static_cast<double>(below) /
                                       static_cast<double>(a.reps));
            }
            rows.push_back(row);
        }
    }

    write_meta(os, meta);
    os << (empirical ? "R,snr,P_out_theory,P_out_empirical" : "R,snr,P_out_theory") << "\n";
    for (const std::string& row : rows) os << row << "\n";
    return 0;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
    std::string a, b, sigma2, out = "-";
    std::string model = "real-gaussian";
    int p = 4;
    double s = 1.0;
    std::int64_t mc_reps = 0;
    std::uint64_t seed = 1;
};

int run_oracle(const OracleArgs& a) {
    sg::EntryModel model = parse_model(a.model);
    Eigen::MatrixXcd A, B;
    if (!a.a.empty()) {
        A = sg::read_matrix_csv(a.a).cast<cplx>();
    } else {
        A = Eigen::MatrixXcd::Identity(a.p, a.p);
    }
    if (!a.b.empty()) {
        B = sg::read_matrix_csv(a.b).cast<cplx>();
    } else {
        B = Eigen::MatrixXcd::Identity(a.p, a.p);
    }
    if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
        throw sg::ConfigError("oracle needs square A and B of equal size");
    const int p = static_cast<int>(A.rows());
    Eigen::VectorXd sigma2;
    if (!a.sigma2.empty()) {
        sigma2 = read_vector_csv_file(a.sigma2);
        if (sigma2.size() != p)
            throw sg::ConfigError("sigma2 vector length must match A's dimension");
    } else {
        sigma2 = Eigen::VectorXd::Ones(p);
    }

    cplx formula = sg::quadratic_form_oracle(A, B, sigma2, model, a.s);

    const std::string canonical = "oracle|a=" + a.a + "|b=" + a.b + "|sigma2=" + a.sigma2 +
                                  "|p=" + std::to_string(p) + "|s=" + sg::fmt_g(a.s) +
                                  "|model=" + a.model +
                                  "|mc_reps=" + std::to_string(a.mc_reps) +
                                  "|seed=" + std::to_string(a.seed);
    json doc{{"version", kVersion},
             {"command", "oracle"},
             {"config_hash", hash_hex(canonical)},
             {"p", p},
             {"s", a.s},
             {"model", a.model},
             {"kappa", model.kappa},
             {"nu4", model.nu4},
             {"formula_re", formula.real()},
             {"formula_im", formula.imag()}};

    if (a.mc_reps > 0) {
        doc["seed"] = a.seed;
        doc["mc_reps"] = a.mc_reps;
        // Monte Carlo mean of (x*Ax - Tr A Sigma)(x*Bx - Tr B Sigma) with
        // Sigma = diag(sigma2); plain (unconjugated) product, matching the
        // formula's convention.
        Eigen::MatrixXcd Sig = sigma2.cast<cplx>().asDiagonal();
        const cplx trA = (A * Sig).trace(), trB = (B * Sig).trace();
        const std::int64_t reps = a.mc_reps;
        // Replication r uses stream r+1; partial sums accumulate over chunks
        // of fixed size, so the reduction order is independent of the thread
        // count.
        const std::int64_t chunk = 4096;
        const std::size_t n_chunks = static_cast<std::size_t>((reps + chunk - 1) / chunk);
        std::vector<cplx> sums(n_chunks, cplx(0, 0));
        std::vector<double> sums_re2(n_chunks, 0.0);
        std::vector<double> sums_im2(n_chunks, 0.0);
        sg::parallel_for(n_chunks, [&](std::size_t cid) {
            const std::int64_t lo = static_cast<std::int64_t>(cid) * chunk;
            const std::int64_t hi = std::min(reps, lo + chunk);
            cplx acc(0, 0);
            double re2 = 0.0, im2 = 0.0;
            for (std::int64_t r = lo; r < hi; ++r) {
                std::mt19937_64 rng = sg::make_stream(a.seed, static_cast<std::uint64_t>(r) + 1);
                Eigen::VectorXcd x = sg::sample_masked_vector(sigma2, a.s, model, rng);
                const cplx qa = x.dot(A * x) - trA;
                const cplx qb = x.dot(B * x) - trB;
                const cplx prod = qa * qb;
                acc += prod;
                re2 += prod.real() * prod.real();
                im2 += prod.imag() * prod.imag();
            }
            sums[cid] = acc;
            sums_re2[cid] = re2;
            sums_im2[cid] = im2;
        });
        cplx total(0, 0);
        double tot_re2 = 0.0, tot_im2 = 0.0;
        for (std::size_t t = 0; t < n_chunks; ++t) {
            total += sums[t];
            tot_re2 += sums_re2[t];
            tot_im2 += sums_im2[t];
        }
        const double n = static_cast<double>(reps);
        const cplx mc = total / n;
        const double var_re = tot_re2 / n - mc.real() * mc.real();
        const double var_im = tot_im2 / n - mc.imag() * mc.imag();
        const double se = std::sqrt(std::max(0.0, var_re + var_im) / n);
        doc["mc_estimate_re"] = mc.real();
        doc["mc_estimate_im"] = mc.imag();
        doc["mc_se"] = se;
        doc["z"] = se > 0.0 ? std::abs(mc - formula) / se : 0.0;
    }
    emit_json(a.out, doc);
    return 0;
}

// ---------------------------------------------------------------- error records

int error_exit(const char* category, const std::string& message, int code) {
    json rec{{"error", {{"category", category}, {"message", message}}}};
    std::cerr << rec.dump() << "\n";
    return code;
}

}  // namespace

// ---------------------------------------------------------------- main

int main(int argc, char** argv) {
    CLI::App app{"spectral statistics of masked random Gram matrices"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads,
                   "parallelism cap (same effect as SPECGRAM_THREADS; never changes "
                   "numeric output)");

    LsdArgs lsd;
    CLI::App* c_lsd = app.add_subcommand("lsd", "limiting spectral density on a real grid");
    c_lsd->add_option("--profile", lsd.profile, "profile file (JSON or dense CSV)")
        ->required();
    c_lsd->add_option("--grid", lsd.grid, "evaluation grid a:b:m (m intervals, m+1 points)")
        ->required();
    c_lsd->add_option("--eta", lsd.eta, "imaginary offset for the boundary values");
    c_lsd->add_option("--out", lsd.out, "output CSV path ('-' = stdout)");

    CltArgs clt;
    CLI::App* c_clt =
        app.add_subcommand("clt", "linear-statistic mean and covariance parameters");
    c_clt->add_option("--profile", clt.profile, "profile file (JSON or dense CSV)")
        ->required();
    c_clt->add_option("--f", clt.f, "test function: x, x2, or log1p_scaled:<sigma2>")
        ->required();
    c_clt->add_option("--g", clt.g, "second test function for the covariance (default: f)");
    c_clt->add_option("--regime", clt.regime, "sparsity regime: moderate or high")
        ->required();
    c_clt->add_option("--q", clt.q, "sparsity parameter, literal or expression in n")
        ->required();
    c_clt->add_option("--model", clt.model,
                      "entry model: real-gaussian, complex-gaussian, gamma:shape[:scale]");
    c_clt->add_option("--edge-nodes", clt.edge_nodes, "contour nodes per edge");
    c_clt->add_option("--out", clt.out, "output JSON path ('-' = stdout)");

    SimulateArgs sim;
    CLI::App* c_sim =
        app.add_subcommand("simulate", "replicated centered linear spectral statistics");
    c_sim->add_option("--config", sim.config, "simulation config JSON")->required();
    c_sim->add_option("--out", sim.out, "per-replication CSV path; summary JSON lands "
                                        "next to it as <out>.summary.json")
        ->required();

    EqualityArgs eq;
    CLI::App* c_eq = app.add_subcommand(
        "test-equality", "one-sided equality test of aggregate channel power");
    c_eq->add_option("--h1", eq.h1, "first channel CSV (real part)");
    c_eq->add_option("--h2", eq.h2, "second channel CSV (real part)");
    c_eq->add_option("--h1-imag", eq.h1_imag, "first channel imaginary part CSV");
    c_eq->add_option("--h2-imag", eq.h2_imag, "second channel imaginary part CSV");
    c_eq->add_option("--alpha", eq.alpha, "test level");
    c_eq->add_option("--nu4", eq.nu4, "standardized fourth moment override");
    c_eq->add_option("--model", eq.model, "entry model for moment defaults");
    c_eq->add_option("--s", eq.known_s, "known mask density (default: estimate from H1)");
    c_eq->add_option("--config", eq.config, "Monte Carlo replay config JSON");
    c_eq->add_option("--out", eq.out, "output JSON path ('-' = stdout)");

    OutageArgs out_args;
    CLI::App* c_out = app.add_subcommand("outage", "mutual-information outage curves");
    c_out->add_option("--d", out_args.d, "receive-side weight vector CSV")->required();
    c_out->add_option("--dt", out_args.dt, "transmit-side weight vector CSV (l^2)")
        ->required();
    c_out->add_option("--snr-db", out_args.snr_db, "SNR grid in dB")
        ->required()
        ->expected(-1);
    c_out->add_option("--rate-grid", out_args.rate_grid, "rate grid a:b:m (nats)")
        ->required();
    c_out->add_option("--q", out_args.q, "sparsity parameter, literal or expression in n")
        ->required();
    c_out->add_option("--model", out_args.model, "entry model");
    c_out->add_option("--reps", out_args.reps,
                      "Monte Carlo replications for the empirical column (0 = theory only)");
    c_out->add_option("--seed", out_args.seed, "master seed for the empirical column");
    c_out->add_option("--out", out_args.out, "output CSV path ('-' = stdout)");

    OracleArgs orc;
    CLI::App* c_orc =
        app.add_subcommand("oracle", "quadratic-form covariance formula (and optional MC)");
    c_orc->add_option("--a", orc.a, "matrix A CSV (default: identity)");
    c_orc->add_option("--b", orc.b, "matrix B CSV (default: identity)");
    c_orc->add_option("--sigma2", orc.sigma2, "variance vector CSV (default: ones)");
    c_orc->add_option("--p", orc.p, "dimension when A/B are defaulted");
    c_orc->add_option("--s", orc.s, "mask density");
    c_orc->add_option("--model", orc.model, "entry model");
    c_orc->add_option("--mc-reps", orc.mc_reps, "Monte Carlo replications (0 = formula only)");
    c_orc->add_option("--seed", orc.seed, "master seed for the Monte Carlo check");
    c_orc->add_option("--out", orc.out, "output JSON path ('-' = stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (threads > 0) {
        setenv("SPECGRAM_THREADS", std::to_string(threads).c_str(), 1);
    }

    try {
        if (app.got_subcommand(c_lsd)) return run_lsd(lsd);
        if (app.got_subcommand(c_clt)) return run_clt(clt);
        if (app.got_subcommand(c_sim)) return run_simulate(sim);
        if (app.got_subcommand(c_eq)) return run_equality(eq);
        if (app.got_subcommand(c_out)) return run_outage(out_args);
        if (app.got_subcommand(c_orc)) return run_oracle(orc);
        return error_exit("config", "no subcommand selected", 2);
    } catch (const sg::ConfigError& e) {
        return error_exit("config", e.what(), 2);
    } catch (const sg::ValidationError& e) {
        return error_exit("config", e.what(), 2);
    } catch (const sg::DomainError& e) {
        return error_exit("config", e.what(), 2);
    } catch (const sg::NumericalError& e) {
        return error_exit("numerical", e.what(), 3);
    } catch (const std::exception& e) {
        return error_exit("internal", e.what(), 3);
    }
}
