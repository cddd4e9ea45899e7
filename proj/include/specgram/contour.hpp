#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "specgram/profile.hpp"

namespace specgram {

using cplx = std::complex<double>;

// ---------------------------------------------------------------- contour

// Rectangular integration contour with corners x_left ± i v0, x_right ± i v0,
// traversed counterclockwise.  x_right must clear the spectral support;
// x_left sits left of the support (negative when the support reaches 0).
struct Contour {
    double x_left = 0.0;
    double x_right = 0.0;
    double v0 = 1.0;          // half-height
    int nodes_per_edge = 200;
};

struct ContourNode {
    cplx z;
    cplx w;  // trapezoid weight (directed edge step; endpoint nodes carry half)
};

// Upper half of the contour: right edge up, top edge right-to-left, left
// edge down.  Combined with kernel conjugate symmetry this is enough for
// every integral the library evaluates.
std::vector<ContourNode> upper_nodes(const Contour& contour);
// Full rectangle, counterclockwise, starting at the lower-left corner.
std::vector<ContourNode> full_nodes(const Contour& contour);

// Dilation about the contour's center (both axes scaled by `factor`),
// used to keep the two covariance contours non-overlapping.
Contour dilate(const Contour& contour, double factor);

// ---------------------------------------------------------------- test functions

// Analytic test function together with its analytic derivative.  The
// derivative is spot-checked against complex finite differences whenever a
// function/contour pair enters a quadrature.
struct TestFunction {
    std::string name;
    std::function<cplx(cplx)> value;
    std::function<cplx(cplx)> derivative;
    // rightmost singularity/branch point on the real axis, if any
    // (e.g. -sigma2 for log(1 + x/sigma2)); quiet NaN when entire
    double real_singularity = std::numeric_limits<double>::quiet_NaN();
};

TestFunction tf_x();
TestFunction tf_x2();
TestFunction tf_log1p_scaled(double sigma2);  // f(x) = log(1 + x/sigma2)
// Parse "x", "x2", or "log1p_scaled:<sigma2>".
TestFunction tf_from_name(const std::string& spec);

// Default contour for a profile: x_right = 1.2 * support bound,
// x_left = -0.1 * x_right clamped right of the test function's singularity,
// v0 = 1, 200 nodes per edge.
Contour default_contour(const VarianceProfile& profile, const TestFunction& f,
                        int nodes_per_edge = 200);

// Throws ValidationError when the analytic derivative disagrees with a
// central finite difference at sample points along the contour.
void validate_test_function(const TestFunction& f, const Contour& contour);

}  // namespace specgram
