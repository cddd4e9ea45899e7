#include "specgram/fluct.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "specgram/stats.hpp"

namespace specgram {

namespace {

constexpr double kPivotTol = 1e-12;
constexpr double kDenomTol = 1e-8;
constexpr double kAxisLift = 1e-9;

// Quadrature nodes that land on (or within rounding of) the real axis are
// evaluated a hair off it; the integrands are analytic there and the shift is
// far below the quadrature tolerance, while the solvers get a well-posed
// argument.
cplx lift(cplx z) {
    double im = z.imag();
    if (std::abs(im) >= kAxisLift) return z;
    double s = (im < 0.0) ? -1.0 : 1.0;
    return cplx(z.real(), s * kAxisLift);
}

// real matrix times complex vector through two BLAS products
Eigen::VectorXcd rmv(const Eigen::MatrixXd& M, const Eigen::VectorXcd& x) {
    Eigen::VectorXd xr = x.real(), xi = x.imag();
    Eigen::VectorXd re = M * xr, im = M * xi;
    return re.cast<cplx>() + cplx(0.0, 1.0) * im.cast<cplx>();
}

Eigen::VectorXcd rmv_t(const Eigen::MatrixXd& M, const Eigen::VectorXcd& x) {
    Eigen::VectorXd xr = x.real(), xi = x.imag();
    Eigen::VectorXd re = M.transpose() * xr, im = M.transpose() * xi;
    return re.cast<cplx>() + cplx(0.0, 1.0) * im.cast<cplx>();
}

// M^T diag(q) M and M diag(q) M^T with complex q, split into real products
Eigen::MatrixXcd row_scaled_gram(const Eigen::MatrixXd& M, const Eigen::VectorXcd& q) {
    Eigen::VectorXd qr = q.real(), qi = q.imag();
    Eigen::MatrixXd Wr = M.array().colwise() * qr.array();
    Eigen::MatrixXd Wi = M.array().colwise() * qi.array();
    Eigen::MatrixXd Nr = M.transpose() * Wr;
    Eigen::MatrixXd Ni = M.transpose() * Wi;
    return Nr.cast<cplx>() + cplx(0.0, 1.0) * Ni.cast<cplx>();
}

Eigen::MatrixXcd col_scaled_gram(const Eigen::MatrixXd& M, const Eigen::VectorXcd& q) {
    Eigen::VectorXd qr = q.real(), qi = q.imag();
    Eigen::MatrixXd Wr = M.array().rowwise() * qr.transpose().array();
    Eigen::MatrixXd Wi = M.array().rowwise() * qi.transpose().array();
    Eigen::MatrixXd Nr = Wr * M.transpose();
    Eigen::MatrixXd Ni = Wi * M.transpose();
    return Nr.cast<cplx>() + cplx(0.0, 1.0) * Ni.cast<cplx>();
}

struct NodeDet {
    Eigen::VectorXcd t;    // length p
    Eigen::VectorXcd tt;   // length n
    Eigen::VectorXcd den;  // length n: 1 + (1/n) (V^T t)_l, cached for a_lm
};

NodeDet node_det(const VarianceProfile& profile, cplx z) {
    NodeDet nd;
    if (profile.separable) {
        ScalarMiEquivalent sc = solve_scalar_mi_system(profile.d, profile.d_tilde, z);
        nd.t = sc.t_diag;
        nd.tt = sc.t_tilde_diag;
    } else {
        DetEquivalent det = solve_canonical_system(profile, z);
        nd.t = det.t;
        nd.tt = det.t_tilde;
    }
    return nd;
}

NodeDet node_det_with_den(const VarianceProfile& profile, cplx z) {
    NodeDet nd = node_det(profile, z);
    if (profile.separable) {
        cplx dsum = (profile.d.cast<cplx>().array() * nd.t.array()).sum() /
                    static_cast<double>(profile.n);
        nd.den = (profile.d_tilde.cast<cplx>().array() * dsum + 1.0).matrix();
    } else {
        nd.den =
            ((rmv_t(profile.sigma2, nd.t) / static_cast<double>(profile.n)).array() + 1.0)
                .matrix();
    }
    return nd;
}

void check_denominators(const Eigen::VectorXcd& den, const char* which) {
    for (int l = 0; l < den.size(); ++l)
        if (std::abs(den[l]) < kDenomTol)
            throw SingularityError(std::string("coupling coefficients: ") + which +
                                   " denominator within tolerance of zero at index " +
                                   std::to_string(l));
}

Eigen::MatrixXcd a_matrix_impl(const Eigen::MatrixXd& V, const Eigen::VectorXcd& t1,
                               const Eigen::VectorXcd& t2, const Eigen::VectorXcd& den1,
                               const Eigen::VectorXcd& den2, bool alt_reading) {
    const double n = static_cast<double>(V.cols());
    check_denominators(den1, "first");
    check_denominators(den2, "second");
    Eigen::VectorXcd q = t1.array() * t2.array();
    Eigen::MatrixXcd N = row_scaled_gram(V, q) / n;  // (1/n) V^T diag(t1 t2) V
    if (alt_reading) {
        Eigen::ArrayXcd r1 = 1.0 / (n * den1.array());
        Eigen::ArrayXcd r2 = 1.0 / den2.array();
        return ((N.array().colwise() * r1).rowwise() * r2.transpose()).matrix();
    }
    Eigen::ArrayXcd rf = 1.0 / (n * den1.array() * den2.array());
    return (N.array().colwise() * rf).matrix();
}

// Sum of the diagonal pivots of the unpivoted (Doolittle) LU of M in natural
// order.  The k-th pivot equals the Schur complement of the leading block,
// which is the exact quantity the triangular per-index recursion produces.
cplx lu_pivot_trace(Eigen::MatrixXcd M, double tol) {
    const int n = static_cast<int>(M.rows());
    cplx tr(0.0, 0.0);
    for (int k = 0; k < n; ++k) {
        cplx piv = M(k, k);
        if (std::abs(piv) < tol)
            throw SingularityError("triangular system: pivot " + std::to_string(k) +
                                   " below tolerance");
        tr += piv;
        int r = n - k - 1;
        if (r > 0) {
            M.block(k + 1, k, r, 1) /= piv;
            M.block(k + 1, k + 1, r, r).noalias() -=
                M.block(k + 1, k, r, 1) * M.block(k, k + 1, 1, r);
        }
    }
    return tr;
}

Eigen::PartialPivLU<Eigen::MatrixXcd> checked_lu(Eigen::MatrixXcd M, const char* what) {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(std::move(M));
    if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() < kPivotTol)
        throw SingularityError(std::string(what) + ": factor pivot below tolerance");
    return lu;
}

// ---------------------------------------------------------------- kernel coefficients

void check_model(const EntryModel& model) {
    if (model.kappa != 0 && model.kappa != 1)
        throw ValidationError("entry model: kappa must be 0 (complex) or 1 (real)");
    if (!(model.nu4 >= 1.0))
        throw ValidationError(
            "entry model: standardized fourth moment must be >= 1 (estimate it first for "
            "custom models)");
}

void check_sparsity(const SparsityConfig& sp) {
    if (!(sp.q > 0.0) || !(sp.s > 0.0) || sp.s > 1.0 + 1e-12)
        throw ValidationError("sparsity config: need q > 0 and s in (0, 1]");
}

struct MeanCoefs {
    cplx coefB;
    cplx coefC1;
};

// theta = coefB * B + coefC1 * C1: the fourth-moment block is B with weight
// n nu4/(q sqrt p); the Moderate regime adds the kappa-weighted exclusion
// block C1 and subtracts (kappa+2) B, both at weight q/sqrt(p).
MeanCoefs mean_coefs(double p, double n, const SparsityConfig& sp, const EntryModel& model) {
    check_model(model);
    check_sparsity(sp);
    const double root_p = std::sqrt(p);
    MeanCoefs c;
    c.coefB = n * model.nu4 / (sp.q * root_p);
    c.coefC1 = 0.0;
    if (sp.regime == Regime::Moderate) {
        c.coefB -= (sp.q / root_p) * (model.kappa + 2.0);
        c.coefC1 = (sp.q / root_p) * static_cast<double>(model.kappa);
    }
    return c;
}

struct CovCoefs {
    double coefH;   // multiplies sum_j H_jj
    double coefT2;  // multiplies the Hadamard-trace term
};

CovCoefs cov_coefs(double p, double n, const SparsityConfig& sp, const EntryModel& model) {
    check_model(model);
    check_sparsity(sp);
    CovCoefs c;
    if (sp.regime == Regime::Moderate) {
        c.coefH = sp.s * (model.kappa + 1.0) / p;
        c.coefT2 = (model.nu4 - model.kappa * sp.s - 2.0 * sp.s) / (p * n);
    } else {
        c.coefH = 0.0;
        c.coefT2 = model.nu4 / (p * n);
    }
    return c;
}

// ---------------------------------------------------------------- theta blocks

Eigen::VectorXcd block_B(const VarianceProfile& profile, const Eigen::MatrixXd& V2, cplx z,
                         const Eigen::VectorXcd& t, const Eigen::VectorXcd& tt) {
    const double n = static_cast<double>(profile.n);
    const cplx z2 = z * z, z3 = z2 * z;
    Eigen::VectorXcd tt2 = tt.array().square();
    Eigen::VectorXcd t2 = t.array().square();
    Eigen::VectorXcd tr_row = rmv(V2, tt2);   // row Hadamard traces, length p
    Eigen::VectorXcd tr_col = rmv_t(V2, t2);  // column Hadamard traces, length n
    Eigen::VectorXcd inner =
        rmv_t(profile.sigma2, (t.array().cube() * tr_row.array()).matrix());
    return (z3 / (n * n)) * (tt2.array() * inner.array()).matrix() +
           (z2 / n) * (tt.array().cube() * tr_col.array()).matrix();
}

Eigen::VectorXcd block_C1(const VarianceProfile& profile, cplx z, const Eigen::VectorXcd& t,
                          const Eigen::VectorXcd& tt, const USystems& u) {
    const double n = static_cast<double>(profile.n);
    const cplx z2 = z * z, z3 = z2 * z;
    Eigen::VectorXcd tt2 = tt.array().square();
    Eigen::VectorXcd inner =
        rmv_t(profile.sigma2, (t.array().cube() * u.U_tilde.array()).matrix());
    return (z3 / n) * (tt2.array() * inner.array()).matrix() +
           z2 * (tt.array().cube() * u.U.array()).matrix();
}

// ---------------------------------------------------------------- separable paths

struct SepMeanParts {
    cplx psiB_mean;
    cplx psiC1_mean;
};

// O(p + n) evaluation of the mean blocks when sigma2 = d dt^T: the coupling
// matrix is rank one, so the resolvent action is a Sherman-Morrison update
// and the per-index exclusion systems collapse to scalars.
SepMeanParts sep_mean_parts(const Eigen::VectorXd& d, const Eigen::VectorXd& dt, cplx z,
                            const Eigen::VectorXcd& t, const Eigen::VectorXcd& tt) {
    const double n = static_cast<double>(dt.size());
    const cplx z2 = z * z, z3 = z2 * z;
    Eigen::ArrayXcd da = d.cast<cplx>().array(), dta = dt.cast<cplx>().array();
    Eigen::ArrayXcd ta = t.array(), tta = tt.array();

    cplx P2 = (da.square() * ta.square()).sum() / n;
    cplx Pt2 = (dta.square() * tta.square()).sum() / n;
    cplx P3 = (da.cube() * ta.cube()).sum() / n;

    Eigen::ArrayXcd B =
        z3 * tta.square() * dta * (Pt2 * P3) + z2 * tta.cube() * dta.square() * P2;

    cplx r = z2 * P2 * Pt2;
    if (std::abs(1.0 - r) < kPivotTol)
        throw SingularityError("separable mean system: rank-one resolvent is singular");

    Eigen::ArrayXcd g = dta.square() * P2 * z2 * tta.square() / (n * (1.0 - r));
    Eigen::ArrayXcd gt = da.square() * Pt2 * z2 * ta.square() / (n * (1.0 - r));
    if ((1.0 + g).abs().minCoeff() < kPivotTol || (1.0 + gt).abs().minCoeff() < kPivotTol)
        throw SingularityError("separable exclusion system is singular");
    Eigen::ArrayXcd U = n * g / ((1.0 + g) * z2 * tta.square());
    Eigen::ArrayXcd Ut = n * gt / ((1.0 + gt) * z2 * ta.square());

    cplx PU = (da * ta.cube() * Ut).sum() / n;
    Eigen::ArrayXcd C1 = z3 * tta.square() * dta * PU + z2 * tta.cube() * U;

    Eigen::ArrayXcd u = dta * P2 * z2 * tta.square();
    auto psi_mean = [&](const Eigen::ArrayXcd& th) {
        cplx dot = (dta * th).sum() / n;
        return (th + u * (dot / (1.0 - r))).sum() / n;
    };
    return {psi_mean(B), psi_mean(C1)};
}

struct PairParts {
    cplx sum_H;
    cplx term2;
};

PairParts sep_pair_parts(const Eigen::VectorXd& d, const Eigen::VectorXd& dt, cplx z1,
                         const Eigen::VectorXcd& t1, const Eigen::VectorXcd& tt1, cplx z2,
                         const Eigen::VectorXcd& t2, const Eigen::VectorXcd& tt2) {
    const double n = static_cast<double>(dt.size());
    Eigen::ArrayXcd da = d.cast<cplx>().array(), dta = dt.cast<cplx>().array();
    cplx S2 = (da.square() * t1.array() * t2.array()).sum() / n;
    cplx St2 = (dta.square() * tt1.array() * tt2.array()).sum() / n;
    PairParts out;
    out.term2 = z1 * z2 * n * n * S2 * St2;
    // rank-one coupling: the LU pivots have a closed running-product form
    Eigen::ArrayXcd w = dta.square() * S2 * z1 * z2 * tt1.array() * tt2.array();
    cplx Q(0.0, 0.0), acc(0.0, 0.0);
    for (int j = 0; j < dt.size(); ++j) {
        cplx denom = 1.0 - Q / n;
        if (std::abs(denom) < kPivotTol)
            throw SingularityError("triangular system: pivot " + std::to_string(j) +
                                   " below tolerance");
        acc += w[j] / denom;
        Q += w[j];
    }
    out.sum_H = acc;
    return out;
}

PairParts dense_pair_parts(const VarianceProfile& profile, const Eigen::MatrixXd& V2, cplx z1,
                           const NodeDet& d1, cplx z2, const NodeDet& d2, bool alt_reading) {
    const double n = static_cast<double>(profile.n);
    PairParts out;
    Eigen::VectorXcd q12 = d1.t.array() * d2.t.array();
    Eigen::VectorXcd colsum = rmv_t(V2, q12);
    out.term2 = z1 * z2 * (d1.tt.array() * d2.tt.array() * colsum.array()).sum();
    Eigen::MatrixXcd A = a_matrix_impl(profile.sigma2, d1.t, d2.t, d1.den, d2.den, alt_reading);
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(profile.n, profile.n) - A;
    out.sum_H = n * (n - lu_pivot_trace(std::move(M), kPivotTol));
    return out;
}

PairParts pair_parts(const VarianceProfile& profile, const Eigen::MatrixXd& V2, cplx z1,
                     const NodeDet& d1, cplx z2, const NodeDet& d2, bool alt_reading) {
    if (profile.separable)
        return sep_pair_parts(profile.d, profile.d_tilde, z1, d1.t, d1.tt, z2, d2.t, d2.tt);
    return dense_pair_parts(profile, V2, z1, d1, z2, d2, alt_reading);
}

// ---------------------------------------------------------------- node bookkeeping

std::vector<cplx> lifted_args(const std::vector<ContourNode>& nodes) {
    std::vector<cplx> zs(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) zs[k] = lift(nodes[k].z);
    return zs;
}

void check_contour(const Contour& c, const char* what) {
    if (!(c.x_left < c.x_right) || !(c.v0 > 0.0) || c.nodes_per_edge < 1)
        throw ValidationError(std::string(what) +
                              ": need x_left < x_right, v0 > 0, nodes_per_edge >= 1");
}

// positions of the m-grid nodes inside a node list built at 2m per edge
std::vector<std::size_t> coarse_indices(std::size_t fine_total, int m) {
    const std::size_t fine_per_edge = static_cast<std::size_t>(2 * m + 1);
    if (fine_total % fine_per_edge != 0)
        throw Error("internal: contour node layout mismatch");
    const std::size_t edges = fine_total / fine_per_edge;
    std::vector<std::size_t> idx;
    idx.reserve(edges * static_cast<std::size_t>(m + 1));
    for (std::size_t e = 0; e < edges; ++e)
        for (int k = 0; k <= m; ++k)
            idx.push_back(e * fine_per_edge + static_cast<std::size_t>(2 * k));
    return idx;
}

std::vector<cplx> coarse_weights(const std::vector<ContourNode>& fine,
                                 const std::vector<std::size_t>& idx,
                                 const std::vector<ContourNode>& coarse) {
    if (idx.size() != coarse.size()) throw Error("internal: contour node layout mismatch");
    std::vector<cplx> w(coarse.size());
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        if (std::abs(coarse[i].z - fine[idx[i]].z) > 1e-9)
            throw Error("internal: contour node layout mismatch");
        w[i] = coarse[i].w;
    }
    return w;
}

// parallel node sweep with per-node error capture (worker exceptions must
// not escape their thread)
void run_nodes(std::size_t count, const std::function<void(std::size_t)>& body,
               const char* what) {
    std::vector<std::string> errs(count);
    parallel_for(count, [&](std::size_t k) {
        try {
            body(k);
        } catch (const std::exception& e) {
            errs[k] = e.what();
        }
    });
    for (std::size_t k = 0; k < count; ++k)
        if (!errs[k].empty())
            throw NumericalError(std::string(what) + " failed at node " + std::to_string(k) +
                                 ": " + errs[k]);
}

bool contour_contains(const Contour& outer, const Contour& inner) {
    return outer.x_left < inner.x_left && outer.x_right > inner.x_right && outer.v0 > inner.v0;
}

void check_disjoint(const Contour& c1, const Contour& c2) {
    bool disjoint = c1.x_right < c2.x_left || c2.x_right < c1.x_left;
    if (!contour_contains(c1, c2) && !contour_contains(c2, c1) && !disjoint)
        throw ValidationError("covariance contours overlap; dilate one of them");
}

double rel_change(double fine, double coarse) {
    return std::abs(fine - coarse) / std::max(std::abs(fine), 1e-12);
}

}  // namespace

// ---------------------------------------------------------------- coefficient systems

Eigen::MatrixXcd a_matrix(const VarianceProfile& profile, const DetEquivalent& det1,
                          const DetEquivalent& det2, bool alt_reading) {
    if (det1.t.size() != profile.p || det2.t.size() != profile.p ||
        det1.t_tilde.size() != profile.n || det2.t_tilde.size() != profile.n)
        throw ValidationError("a_matrix: solution size does not match the profile");
    const double n = static_cast<double>(profile.n);
    Eigen::VectorXcd den1 = ((rmv_t(profile.sigma2, det1.t) / n).array() + 1.0).matrix();
    Eigen::VectorXcd den2 = ((rmv_t(profile.sigma2, det2.t) / n).array() + 1.0).matrix();
    return a_matrix_impl(profile.sigma2, det1.t, det2.t, den1, den2, alt_reading);
}

USystems solve_u_systems(const VarianceProfile& profile, const DetEquivalent& det) {
    const int p = profile.p, n = profile.n;
    const double nd = static_cast<double>(n);
    const cplx z2 = det.z * det.z;
    const Eigen::MatrixXd& V = profile.sigma2;

    Eigen::VectorXcd den = ((rmv_t(V, det.t) / nd).array() + 1.0).matrix();
    Eigen::MatrixXcd A = a_matrix_impl(V, det.t, det.t, den, den, false);
    auto lu = checked_lu(Eigen::MatrixXcd::Identity(n, n) - A, "exclusion system");
    Eigen::VectorXcd g = lu.solve(A).diagonal();

    Eigen::VectorXcd dent = ((rmv(V, det.t_tilde) / nd).array() + 1.0).matrix();
    check_denominators(dent, "row");
    Eigen::VectorXcd qt = det.t_tilde.array().square();
    Eigen::MatrixXcd At = col_scaled_gram(V, qt) / (nd * nd);
    Eigen::ArrayXcd rf = 1.0 / dent.array().square();
    At = (At.array().colwise() * rf).matrix();
    auto lut = checked_lu(Eigen::MatrixXcd::Identity(p, p) - At, "row exclusion system");
    Eigen::VectorXcd gt = lut.solve(At).diagonal();

    if ((g.array() + 1.0).abs().minCoeff() < kPivotTol ||
        (gt.array() + 1.0).abs().minCoeff() < kPivotTol)
        throw SingularityError("exclusion system: diagonal correction is singular");

    USystems out;
    out.U = (nd * g.array() / ((1.0 + g.array()) * z2 * det.t_tilde.array().square())).matrix();
    out.U_tilde =
        (nd * gt.array() / ((1.0 + gt.array()) * z2 * det.t.array().square())).matrix();
    return out;
}

USystems solve_u_systems_reference(const VarianceProfile& profile, const DetEquivalent& det) {
    const int p = profile.p, n = profile.n;
    const double nd = static_cast<double>(n);
    const cplx z2 = det.z * det.z;
    const Eigen::MatrixXd& V = profile.sigma2;

    Eigen::VectorXcd den = ((rmv_t(V, det.t) / nd).array() + 1.0).matrix();
    Eigen::MatrixXcd A = a_matrix_impl(V, det.t, det.t, den, den, false);
    USystems out;
    out.U.resize(n);
    for (int j = 0; j < n; ++j) {
        Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(n, n) - A;
        M.col(j) += A.col(j);
        Eigen::VectorXcd y = checked_lu(std::move(M), "exclusion system").solve(nd * A.col(j));
        out.U[j] = y[j] / (z2 * det.t_tilde[j] * det.t_tilde[j]);
    }

    Eigen::VectorXcd dent = ((rmv(V, det.t_tilde) / nd).array() + 1.0).matrix();
    check_denominators(dent, "row");
    Eigen::VectorXcd qt = det.t_tilde.array().square();
    Eigen::MatrixXcd At = col_scaled_gram(V, qt) / (nd * nd);
    Eigen::ArrayXcd rf = 1.0 / dent.array().square();
    At = (At.array().colwise() * rf).matrix();
    out.U_tilde.resize(p);
    for (int i = 0; i < p; ++i) {
        Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(p, p) - At;
        M.col(i) += At.col(i);
        Eigen::VectorXcd y =
            checked_lu(std::move(M), "row exclusion system").solve(nd * At.col(i));
        out.U_tilde[i] = y[i] / (z2 * det.t[i] * det.t[i]);
    }
    return out;
}

Eigen::VectorXcd theta_sources(const VarianceProfile& profile, const DetEquivalent& det,
                               const SparsityConfig& sparsity, const EntryModel& model,
                               const USystems* u) {
    MeanCoefs c = mean_coefs(profile.p, profile.n, sparsity, model);
    Eigen::MatrixXd V2 = profile.sigma2.cwiseProduct(profile.sigma2);
    Eigen::VectorXcd theta = c.coefB * block_B(profile, V2, det.z, det.t, det.t_tilde);
    if (c.coefC1 != cplx(0.0, 0.0)) {
        USystems local;
        if (!u) {
            local = solve_u_systems(profile, det);
            u = &local;
        }
        theta += c.coefC1 * block_C1(profile, det.z, det.t, det.t_tilde, *u);
    }
    return theta;
}

cplx mean_kernel(const VarianceProfile& profile, cplx z, const SparsityConfig& sparsity,
                 const EntryModel& model) {
    MeanCoefs c = mean_coefs(profile.p, profile.n, sparsity, model);
    if (profile.separable) {
        ScalarMiEquivalent sc = solve_scalar_mi_system(profile.d, profile.d_tilde, z);
        SepMeanParts parts =
            sep_mean_parts(profile.d, profile.d_tilde, z, sc.t_diag, sc.t_tilde_diag);
        return c.coefB * parts.psiB_mean + c.coefC1 * parts.psiC1_mean;
    }
    DetEquivalent det = solve_canonical_system(profile, z);
    Eigen::VectorXcd theta = theta_sources(profile, det, sparsity, model);
    const double nd = static_cast<double>(profile.n);
    Eigen::VectorXcd den = ((rmv_t(profile.sigma2, det.t) / nd).array() + 1.0).matrix();
    Eigen::MatrixXcd A = a_matrix_impl(profile.sigma2, det.t, det.t, den, den, false);
    auto lu = checked_lu(Eigen::MatrixXcd::Identity(profile.n, profile.n) - A, "mean system");
    return lu.solve(theta).mean();
}

cplx cov_kernel_G(const VarianceProfile& profile, cplx z1, cplx z2,
                  const SparsityConfig& sparsity, const EntryModel& model, bool alt_reading) {
    CovCoefs c = cov_coefs(profile.p, profile.n, sparsity, model);
    Eigen::MatrixXd V2;
    if (!profile.separable) V2 = profile.sigma2.cwiseProduct(profile.sigma2);
    NodeDet d1 = node_det_with_den(profile, z1);
    NodeDet d2 = node_det_with_den(profile, z2);
    PairParts parts = pair_parts(profile, V2, z1, d1, z2, d2, alt_reading);
    return c.coefH * parts.sum_H + c.coefT2 * parts.term2;
}

// ---------------------------------------------------------------- mean quadrature

MeanQuadrature::MeanQuadrature(const VarianceProfile& profile, const Contour& contour) {
    check_contour(contour, "mean quadrature contour");
    m_ = contour.nodes_per_edge;
    p_ = static_cast<double>(profile.p);
    n_ = static_cast<double>(profile.n);

    Contour fine = contour;
    fine.nodes_per_edge = 2 * m_;
    nodes_ = upper_nodes(fine);
    coarse_idx_ = coarse_indices(nodes_.size(), m_);
    coarse_w_ = coarse_weights(nodes_, coarse_idx_, upper_nodes(contour));

    std::vector<cplx> zs = lifted_args(nodes_);
    psiB_.resize(nodes_.size());
    psiC1_.resize(nodes_.size());

    if (profile.separable) {
        run_nodes(
            nodes_.size(),
            [&](std::size_t k) {
                ScalarMiEquivalent sc =
                    solve_scalar_mi_system(profile.d, profile.d_tilde, zs[k]);
                SepMeanParts parts = sep_mean_parts(profile.d, profile.d_tilde, zs[k],
                                                    sc.t_diag, sc.t_tilde_diag);
                psiB_[k] = parts.psiB_mean;
                psiC1_[k] = parts.psiC1_mean;
            },
            "mean quadrature");
        return;
    }

    Eigen::MatrixXd V2 = profile.sigma2.cwiseProduct(profile.sigma2);
    run_nodes(
        nodes_.size(),
        [&](std::size_t k) {
            const cplx z = zs[k];
            DetEquivalent det = solve_canonical_system(profile, z);
            const double nd = static_cast<double>(profile.n);
            Eigen::VectorXcd den = ((rmv_t(profile.sigma2, det.t) / nd).array() + 1.0).matrix();
            Eigen::MatrixXcd A = a_matrix_impl(profile.sigma2, det.t, det.t, den, den, false);
            auto lu = checked_lu(Eigen::MatrixXcd::Identity(profile.n, profile.n) - A,
                                 "mean system");
            USystems u = solve_u_systems(profile, det);
            psiB_[k] = lu.solve(block_B(profile, V2, z, det.t, det.t_tilde)).mean();
            psiC1_[k] = lu.solve(block_C1(profile, z, det.t, det.t_tilde, u)).mean();
        },
        "mean quadrature");
}

double MeanQuadrature::integral(const TestFunction& f, const SparsityConfig& sparsity,
                                const EntryModel& model, QuadratureDiagnostics* diag) const {
    MeanCoefs c = mean_coefs(p_, n_, sparsity, model);
    std::vector<cplx> integrand(nodes_.size());
    cplx fine(0.0, 0.0);
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        cplx z = lift(nodes_[k].z);
        cplx E = c.coefB * psiB_[k] + c.coefC1 * psiC1_[k];
        integrand[k] = f.value(z) * E;
        fine += nodes_[k].w * integrand[k];
    }
    cplx coarse(0.0, 0.0);
    for (std::size_t i = 0; i < coarse_idx_.size(); ++i)
        coarse += coarse_w_[i] * integrand[coarse_idx_[i]];
    // upper half plus conjugate symmetry: -(1/2 pi i) (full oint) = -(Im upper)/pi
    double vf = -fine.imag() / M_PI;
    double vc = -coarse.imag() / M_PI;
    if (diag) {
        diag->nodes_per_edge = m_;
        diag->rel_change_on_doubling = rel_change(vf, vc);
        diag->accuracy_warning = diag->rel_change_on_doubling > 1e-6;
    }
    return vf;
}

// ---------------------------------------------------------------- covariance quadrature

CovQuadrature::CovQuadrature(const VarianceProfile& profile, const Contour& contour1,
                             const Contour& contour2, bool alt_reading) {
    check_contour(contour1, "covariance contour 1");
    check_contour(contour2, "covariance contour 2");
    check_disjoint(contour1, contour2);
    m_ = contour1.nodes_per_edge;
    p_ = static_cast<double>(profile.p);
    n_ = static_cast<double>(profile.n);

    Contour f1 = contour1, f2 = contour2;
    f1.nodes_per_edge = 2 * contour1.nodes_per_edge;
    f2.nodes_per_edge = 2 * contour2.nodes_per_edge;
    outer_ = full_nodes(f1);
    inner_ = upper_nodes(f2);
    outer_coarse_ = coarse_indices(outer_.size(), contour1.nodes_per_edge);
    outer_coarse_w_ = coarse_weights(outer_, outer_coarse_, full_nodes(contour1));
    inner_coarse_ = coarse_indices(inner_.size(), contour2.nodes_per_edge);
    inner_coarse_w_ = coarse_weights(inner_, inner_coarse_, upper_nodes(contour2));

    std::vector<cplx> zs1 = lifted_args(outer_), zs2 = lifted_args(inner_);
    std::vector<NodeDet> od(outer_.size()), id(inner_.size());
    run_nodes(
        outer_.size(), [&](std::size_t k) { od[k] = node_det_with_den(profile, zs1[k]); },
        "covariance quadrature (outer nodes)");
    run_nodes(
        inner_.size(), [&](std::size_t k) { id[k] = node_det_with_den(profile, zs2[k]); },
        "covariance quadrature (inner nodes)");

    Eigen::MatrixXd V2;
    if (!profile.separable) V2 = profile.sigma2.cwiseProduct(profile.sigma2);
    sum_H_.resize(static_cast<Eigen::Index>(outer_.size()),
                  static_cast<Eigen::Index>(inner_.size()));
    term2_.resizeLike(sum_H_);
    run_nodes(
        outer_.size(),
        [&](std::size_t k1) {
            for (std::size_t k2 = 0; k2 < inner_.size(); ++k2) {
                PairParts pp =
                    pair_parts(profile, V2, zs1[k1], od[k1], zs2[k2], id[k2], alt_reading);
                sum_H_(static_cast<Eigen::Index>(k1), static_cast<Eigen::Index>(k2)) = pp.sum_H;
                term2_(static_cast<Eigen::Index>(k1), static_cast<Eigen::Index>(k2)) = pp.term2;
            }
        },
        "covariance quadrature (pairs)");
}

double CovQuadrature::evaluate(const TestFunction& f, const TestFunction& g,
                               const SparsityConfig& sparsity, const EntryModel& model,
                               QuadratureDiagnostics* diag) const {
    CovCoefs c = cov_coefs(p_, n_, sparsity, model);
    const auto N1 = static_cast<Eigen::Index>(outer_.size());
    const auto N2 = static_cast<Eigen::Index>(inner_.size());
    Eigen::VectorXcd af(N1), bf(N2);
    for (Eigen::Index k = 0; k < N1; ++k)
        af[k] = outer_[static_cast<std::size_t>(k)].w *
                f.derivative(lift(outer_[static_cast<std::size_t>(k)].z));
    for (Eigen::Index k = 0; k < N2; ++k)
        bf[k] = inner_[static_cast<std::size_t>(k)].w *
                g.derivative(lift(inner_[static_cast<std::size_t>(k)].z));
    // the coarse grid reuses the fine-node integrand values with its own weights
    Eigen::VectorXcd ac = Eigen::VectorXcd::Zero(N1), bc = Eigen::VectorXcd::Zero(N2);
    for (std::size_t i = 0; i < outer_coarse_.size(); ++i) {
        auto k = static_cast<Eigen::Index>(outer_coarse_[i]);
        ac[k] += outer_coarse_w_[i] * f.derivative(lift(outer_[outer_coarse_[i]].z));
    }
    for (std::size_t i = 0; i < inner_coarse_.size(); ++i) {
        auto k = static_cast<Eigen::Index>(inner_coarse_[i]);
        bc[k] += inner_coarse_w_[i] * g.derivative(lift(inner_[inner_coarse_[i]].z));
    }

    Eigen::VectorXcd Hbf = sum_H_ * bf, Tbf = term2_ * bf;
    Eigen::VectorXcd Hbc = sum_H_ * bc, Tbc = term2_ * bc;
    cplx fine = c.coefH * af.cwiseProduct(Hbf).sum() + c.coefT2 * af.cwiseProduct(Tbf).sum();
    cplx coarse = c.coefH * ac.cwiseProduct(Hbc).sum() + c.coefT2 * ac.cwiseProduct(Tbc).sum();
    // full z1-contour times upper z2-half plus conjugate symmetry
    double vf = -fine.real() / (2.0 * M_PI * M_PI);
    double vc = -coarse.real() / (2.0 * M_PI * M_PI);
    if (diag) {
        diag->nodes_per_edge = m_;
        diag->rel_change_on_doubling = rel_change(vf, vc);
        diag->accuracy_warning = diag->rel_change_on_doubling > 1e-6;
    }
    return vf;
}

// ---------------------------------------------------------------- integral drivers

double lsd_integral(const VarianceProfile& profile, const std::function<cplx(cplx)>& f,
                    const Contour& contour) {
    check_contour(contour, "spectral integral contour");
    std::vector<ContourNode> nodes = upper_nodes(contour);
    std::vector<cplx> zs = lifted_args(nodes);
    std::vector<cplx> m0(nodes.size());
    run_nodes(
        nodes.size(), [&](std::size_t k) { m0[k] = node_det(profile, zs[k]).t.mean(); },
        "spectral integral");
    cplx acc(0.0, 0.0);
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += nodes[k].w * f(zs[k]) * m0[k];
    return -acc.imag() / M_PI;
}

double clt_mean(const VarianceProfile& profile, const TestFunction& f, const Contour& contour,
                const SparsityConfig& sparsity, const EntryModel& model,
                QuadratureDiagnostics* diag) {
    validate_test_function(f, contour);
    if (sparsity.regime == Regime::High) {
        // the corrected statistic recentres the mean away by construction
        if (diag) *diag = {contour.nodes_per_edge, 0.0, false};
        return 0.0;
    }
    MeanQuadrature mq(profile, contour);
    return mq.integral(f, sparsity, model, diag);
}

double clt_cov(const VarianceProfile& profile, const TestFunction& f, const TestFunction& g,
               const Contour& contour1, const Contour& contour2, const SparsityConfig& sparsity,
               const EntryModel& model, QuadratureDiagnostics* diag) {
    validate_test_function(f, contour1);
    validate_test_function(g, contour2);
    CovQuadrature cq(profile, contour1, contour2);
    return cq.evaluate(f, g, sparsity, model, diag);
}

double clt_cov_fd(const VarianceProfile& profile, const TestFunction& f, const TestFunction& g,
                  const Contour& contour1, const Contour& contour2,
                  const SparsityConfig& sparsity, const EntryModel& model, double h) {
    check_contour(contour1, "covariance contour 1");
    check_contour(contour2, "covariance contour 2");
    check_disjoint(contour1, contour2);
    if (!(h > 0.0)) throw ValidationError("clt_cov_fd: finite-difference step must be positive");
    CovCoefs c = cov_coefs(profile.p, profile.n, sparsity, model);

    std::vector<ContourNode> outer = full_nodes(contour1), inner = upper_nodes(contour2);
    std::vector<cplx> zs1 = lifted_args(outer), zs2 = lifted_args(inner);
    const std::size_t N1 = outer.size(), N2 = inner.size();
    std::vector<NodeDet> op(N1), om(N1), ip(N2), im(N2);
    run_nodes(
        N1,
        [&](std::size_t k) {
            op[k] = node_det_with_den(profile, zs1[k] + h);
            om[k] = node_det_with_den(profile, zs1[k] - h);
        },
        "covariance quadrature (outer nodes)");
    run_nodes(
        N2,
        [&](std::size_t k) {
            ip[k] = node_det_with_den(profile, zs2[k] + h);
            im[k] = node_det_with_den(profile, zs2[k] - h);
        },
        "covariance quadrature (inner nodes)");

    Eigen::MatrixXd V2;
    if (!profile.separable) V2 = profile.sigma2.cwiseProduct(profile.sigma2);
    Eigen::MatrixXcd D2(static_cast<Eigen::Index>(N1), static_cast<Eigen::Index>(N2));
    run_nodes(
        N1,
        [&](std::size_t k1) {
            for (std::size_t k2 = 0; k2 < N2; ++k2) {
                auto G = [&](const NodeDet& a, cplx za, const NodeDet& b, cplx zb) {
                    PairParts pp = pair_parts(profile, V2, za, a, zb, b, false);
                    return c.coefH * pp.sum_H + c.coefT2 * pp.term2;
                };
                cplx gpp = G(op[k1], zs1[k1] + h, ip[k2], zs2[k2] + h);
                cplx gpm = G(op[k1], zs1[k1] + h, im[k2], zs2[k2] - h);
                cplx gmp = G(om[k1], zs1[k1] - h, ip[k2], zs2[k2] + h);
                cplx gmm = G(om[k1], zs1[k1] - h, im[k2], zs2[k2] - h);
                D2(static_cast<Eigen::Index>(k1), static_cast<Eigen::Index>(k2)) =
                    (gpp - gpm - gmp + gmm) / (4.0 * h * h);
            }
        },
        "covariance quadrature (pairs)");

    Eigen::VectorXcd a(static_cast<Eigen::Index>(N1)), b(static_cast<Eigen::Index>(N2));
    for (std::size_t k = 0; k < N1; ++k)
        a[static_cast<Eigen::Index>(k)] = outer[k].w * f.value(zs1[k]);
    for (std::size_t k = 0; k < N2; ++k)
        b[static_cast<Eigen::Index>(k)] = inner[k].w * g.value(zs2[k]);
    cplx total = a.cwiseProduct(D2 * b).sum();
    return -total.real() / (2.0 * M_PI * M_PI);
}

double corrected_centering(const VarianceProfile& profile, const TestFunction& f,
                           const Contour& contour, const SparsityConfig& sparsity,
                           const EntryModel& model) {
    if (sparsity.regime != Regime::High)
        throw ValidationError("corrected_centering: the recentring term is defined for the "
                              "high-sparsity regime");
    validate_test_function(f, contour);
    MeanQuadrature mq(profile, contour);
    return -mq.integral(f, sparsity, model, nullptr);
}

}  // namespace specgram
