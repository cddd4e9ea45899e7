#include "specgram/contour.hpp"

#include <cmath>

#include "specgram/detequiv.hpp"

namespace specgram {

namespace {

void append_edge(std::vector<ContourNode>& out, cplx a, cplx b, int m) {
    cplx h = (b - a) / static_cast<double>(m);
    for (int k = 0; k <= m; ++k) {
        cplx w = (k == 0 || k == m) ? h * 0.5 : h;
        out.push_back({a + static_cast<double>(k) * h, w});
    }
}

}  // namespace

std::vector<ContourNode> upper_nodes(const Contour& contour) {
    if (!(contour.x_right > contour.x_left) || !(contour.v0 > 0.0) || contour.nodes_per_edge < 2)
        throw ValidationError("contour: degenerate geometry");
    std::vector<ContourNode> out;
    const double xl = contour.x_left, xr = contour.x_right, v0 = contour.v0;
    const int m = contour.nodes_per_edge;
    out.reserve(3 * (m + 1));
    append_edge(out, cplx(xr, 0.0), cplx(xr, v0), m);
    append_edge(out, cplx(xr, v0), cplx(xl, v0), m);
    append_edge(out, cplx(xl, v0), cplx(xl, 0.0), m);
    return out;
}

std::vector<ContourNode> full_nodes(const Contour& contour) {
    if (!(contour.x_right > contour.x_left) || !(contour.v0 > 0.0) || contour.nodes_per_edge < 2)
        throw ValidationError("contour: degenerate geometry");
    std::vector<ContourNode> out;
    const double xl = contour.x_left, xr = contour.x_right, v0 = contour.v0;
    const int m = contour.nodes_per_edge;
    out.reserve(4 * (m + 1));
    append_edge(out, cplx(xl, -v0), cplx(xr, -v0), m);
    append_edge(out, cplx(xr, -v0), cplx(xr, v0), m);
    append_edge(out, cplx(xr, v0), cplx(xl, v0), m);
    append_edge(out, cplx(xl, v0), cplx(xl, -v0), m);
    return out;
}

Contour dilate(const Contour& contour, double factor) {
    Contour out = contour;
    const double cx = 0.5 * (contour.x_left + contour.x_right);
    out.x_left = cx - factor * (cx - contour.x_left);
    out.x_right = cx + factor * (contour.x_right - cx);
    out.v0 = factor * contour.v0;
    return out;
}

// ---------------------------------------------------------------- test functions

TestFunction tf_x() {
    TestFunction f;
    f.name = "x";
    f.value = [](cplx z) { return z; };
    f.derivative = [](cplx) { return cplx(1.0, 0.0); };
    return f;
}

TestFunction tf_x2() {
    TestFunction f;
    f.name = "x2";
    f.value = [](cplx z) { return z * z; };
    f.derivative = [](cplx z) { return 2.0 * z; };
    return f;
}

TestFunction tf_log1p_scaled(double sigma2) {
    if (!(sigma2 > 0.0)) throw ValidationError("log1p_scaled: sigma2 must be positive");
    TestFunction f;
    f.name = "log1p_scaled:" + std::to_string(sigma2);
    f.value = [sigma2](cplx z) { return std::log(1.0 + z / sigma2); };
    f.derivative = [sigma2](cplx z) { return 1.0 / (sigma2 + z); };
    f.real_singularity = -sigma2;
    return f;
}

TestFunction tf_from_name(const std::string& spec) {
    if (spec == "x") return tf_x();
    if (spec == "x2") return tf_x2();
    const std::string prefix = "log1p_scaled";
    if (spec.rfind(prefix, 0) == 0) {
        double sigma2 = 1.0;
        if (spec.size() > prefix.size()) {
            if (spec[prefix.size()] != ':')
                throw ConfigError("test function: expected log1p_scaled:<sigma2>");
            try {
                sigma2 = std::stod(spec.substr(prefix.size() + 1));
            } catch (const std::exception&) {
                throw ConfigError("test function: bad sigma2 in '" + spec + "'");
            }
        }
        return tf_log1p_scaled(sigma2);
    }
    throw ConfigError("unknown test function '" + spec + "' (built-ins: x, x2, log1p_scaled:s2)");
}

Contour default_contour(const VarianceProfile& profile, const TestFunction& f,
                        int nodes_per_edge) {
    Contour c;
    c.x_right = 1.2 * spectral_support_bound(profile);
    c.x_left = -0.1 * c.x_right;
    if (std::isfinite(f.real_singularity)) {
        if (f.real_singularity >= 0.0)
            throw ValidationError("test function singular on the nonnegative axis");
        // keep the contour strictly right of the branch point
        c.x_left = std::max(c.x_left, 0.5 * f.real_singularity);
    }
    c.v0 = 1.0;
    c.nodes_per_edge = nodes_per_edge;
    return c;
}

void validate_test_function(const TestFunction& f, const Contour& contour) {
    if (!f.value || !f.derivative) throw ValidationError("test function: missing callables");
    const double h = 1e-6;
    const std::vector<cplx> probes{
        cplx(contour.x_right, 0.3 * contour.v0),
        cplx(0.5 * (contour.x_left + contour.x_right), contour.v0),
        cplx(contour.x_left, 0.7 * contour.v0),
    };
    for (cplx z : probes) {
        cplx fd = (f.value(z + h) - f.value(z - h)) / (2.0 * h);
        cplx fdi = (f.value(z + cplx(0.0, h)) - f.value(z - cplx(0.0, h))) / cplx(0.0, 2.0 * h);
        cplx an = f.derivative(z);
        double scale = std::max(1.0, std::abs(an));
        if (std::abs(fd - an) / scale > 1e-6 || std::abs(fdi - an) / scale > 1e-6)
            throw ValidationError("test function '" + f.name +
                                  "': derivative disagrees with finite differences");
    }
}

}  // namespace specgram
