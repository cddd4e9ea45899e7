#include "specgram/detequiv.hpp"

#include <cmath>

#include "specgram/stats.hpp"

namespace specgram {

namespace {

// V is real, x complex: split into two real matvecs so the products run
// through BLAS dgemv instead of a scalar complex loop.
Eigen::VectorXcd rmatvec(const Eigen::MatrixXd& V, const Eigen::VectorXcd& x) {
    Eigen::VectorXd xr = x.real(), xi = x.imag();
    Eigen::VectorXd re = V * xr, im = V * xi;
    return re.cast<cplx>() + cplx(0.0, 1.0) * im.cast<cplx>();
}

Eigen::VectorXcd rmatvec_t(const Eigen::MatrixXd& V, const Eigen::VectorXcd& x) {
    Eigen::VectorXd xr = x.real(), xi = x.imag();
    Eigen::VectorXd re = V.transpose() * xr, im = V.transpose() * xi;
    return re.cast<cplx>() + cplx(0.0, 1.0) * im.cast<cplx>();
}

struct SweepState {
    Eigen::VectorXcd t, tt;
};

// One Jacobi-style sweep: refresh all t from tt, then all tt from the new t.
void sweep(const Eigen::MatrixXd& V, cplx z, SweepState& st) {
    const double n = static_cast<double>(V.cols());
    st.t = (-((rmatvec(V, st.tt) / n).array() + 1.0) * z).inverse().matrix();
    st.tt = (-((rmatvec_t(V, st.t) / n).array() + 1.0) * z).inverse().matrix();
}

double sup_diff(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// Picard sweeps with a safeguarded vector-Aitken extrapolation every 8
// sweeps: estimate the dominant contraction ratio rho from successive
// differences and jump to the extrapolated limit when 0.2 < |rho| < 0.9999,
// keeping the jump only if it reduces the defect.
int solve_at(const Eigen::MatrixXd& V, cplx z, SweepState& st, double tol, int max_iter) {
    const int p = static_cast<int>(st.t.size());
    const int n = static_cast<int>(st.tt.size());
    Eigen::VectorXcd u_prev, u_prev2;
    bool have_prev = false, have_prev2 = false;
    int it = 0;
    while (it < max_iter) {
        for (int k = 0; k < 8; ++k) {
            sweep(V, z, st);
            ++it;
        }
        Eigen::VectorXcd u(p + n);
        u << st.t, st.tt;
        if (have_prev2) {
            Eigen::VectorXcd d1 = u - u_prev, d0 = u_prev - u_prev2;
            cplx den = d0.dot(d0);
            if (den != cplx(0.0, 0.0)) {
                cplx rho = d0.dot(d1) / den;
                if (0.2 < std::abs(rho) && std::abs(rho) < 1.0 - 1e-7) {
                    Eigen::VectorXcd ue = u + d1 * (rho / (1.0 - rho));
                    SweepState ext{ue.head(p), ue.tail(n)};
                    sweep(V, z, ext);
                    ++it;
                    if (sup_diff(ext.t, ue.head(p)) < sup_diff(u.head(p), u_prev.head(p))) {
                        st = ext;
                        u.resize(p + n);
                        u << st.t, st.tt;
                    }
                }
            }
        }
        SweepState next = st;
        sweep(V, z, next);
        ++it;
        double d = sup_diff(next.t, st.t) + sup_diff(next.tt, st.tt);
        st = next;
        if (d < tol) return it;
        u_prev2 = u_prev;
        have_prev2 = have_prev;
        u_prev = u;
        have_prev = true;
    }
    SweepState probe = st;
    sweep(V, z, probe);
    double d = sup_diff(probe.t, st.t) + sup_diff(probe.tt, st.tt);
    throw IterationError("canonical system: no convergence within max_iter", d);
}

void check_domain(cplx z) {
    if (z.imag() == 0.0 && z.real() >= 0.0)
        throw DomainError("spectral argument lies on the nonnegative real axis");
}

}  // namespace

DetEquivalent solve_canonical_system(const VarianceProfile& profile, cplx z, double tol,
                                     int max_iter) {
    check_domain(z);
    if (!(tol > 0.0)) throw ValidationError("solve_canonical_system: tol must be positive");
    const Eigen::MatrixXd& V = profile.sigma2;
    const int p = profile.p, n = profile.n;

    SweepState st;
    int total_it = 0;
    const double eta = std::abs(z.imag());
    if (eta >= 0.05 || z.real() < 0.0) {
        st.t = Eigen::VectorXcd::Constant(p, -1.0 / z);
        st.tt = Eigen::VectorXcd::Constant(n, -1.0 / z);
        total_it = solve_at(V, z, st, tol, max_iter);
    } else {
        // geometric continuation in Im z with warm starts; contraction
        // degrades near the axis inside the support, so walk down from 0.1
        std::vector<double> rungs{0.1};
        while (rungs.back() > std::max(eta, 1e-6) * 2.0) rungs.push_back(rungs.back() * 0.5);
        rungs.push_back(eta);
        const double sgn = (z.imag() >= 0.0) ? 1.0 : -1.0;
        bool started = false;
        for (double r : rungs) {
            cplx zr(z.real(), sgn * r);
            if (!started) {
                st.t = Eigen::VectorXcd::Constant(p, -1.0 / zr);
                st.tt = Eigen::VectorXcd::Constant(n, -1.0 / zr);
                started = true;
            }
            total_it += solve_at(V, zr, st, tol, max_iter);
        }
    }

    DetEquivalent det;
    det.z = z;
    det.t = st.t;
    det.t_tilde = st.tt;
    det.iterations = total_it;
    SweepState probe = st;
    sweep(V, z, probe);
    det.residual = sup_diff(probe.t, st.t) + sup_diff(probe.tt, st.tt);
    if (z.imag() > 0.0) {
        if (det.t.imag().minCoeff() <= 0.0 || det.t_tilde.imag().minCoeff() <= 0.0)
            throw NumericalError("canonical system: solution left the upper half plane");
    }
    return det;
}

StieltjesPair stieltjes_m0(const DetEquivalent& det) {
    return {det.t.mean(), det.t_tilde.mean()};
}

double spectral_support_bound(const VarianceProfile& profile) {
    double root_c = std::sqrt(profile.c);
    return profile.sigma2_max() * (1.0 + root_c) * (1.0 + root_c);
}

// ---------------------------------------------------------------- scalar system

namespace {

struct ScalarState {
    cplx delta, delta_tilde;
};

void scalar_sweep(const Eigen::VectorXd& d, const Eigen::VectorXd& dt, double inv_Nt, cplx z,
                  ScalarState& st) {
    cplx acc(0.0, 0.0);
    for (int i = 0; i < d.size(); ++i) acc += d[i] / (1.0 + d[i] * st.delta_tilde);
    st.delta = acc * (-inv_Nt / z);
    acc = cplx(0.0, 0.0);
    for (int j = 0; j < dt.size(); ++j) acc += dt[j] / (1.0 + dt[j] * st.delta);
    st.delta_tilde = acc * (-inv_Nt / z);
}

int scalar_solve_at(const Eigen::VectorXd& d, const Eigen::VectorXd& dt, double inv_Nt, cplx z,
                    ScalarState& st, double tol, int max_iter) {
    Eigen::Vector2cd u_prev, u_prev2;
    bool have_prev = false, have_prev2 = false;
    int it = 0;
    while (it < max_iter) {
        for (int k = 0; k < 8; ++k) {
            scalar_sweep(d, dt, inv_Nt, z, st);
            ++it;
        }
        Eigen::Vector2cd u(st.delta, st.delta_tilde);
        if (have_prev2) {
            Eigen::Vector2cd d1 = u - u_prev, d0 = u_prev - u_prev2;
            cplx den = d0.dot(d0);
            if (den != cplx(0.0, 0.0)) {
                cplx rho = d0.dot(d1) / den;
                if (0.2 < std::abs(rho) && std::abs(rho) < 1.0 - 1e-7) {
                    Eigen::Vector2cd ue = u + d1 * (rho / (1.0 - rho));
                    ScalarState ext{ue[0], ue[1]};
                    scalar_sweep(d, dt, inv_Nt, z, ext);
                    ++it;
                    if (std::abs(ext.delta - ue[0]) < std::abs(u[0] - u_prev[0])) {
                        st = ext;
                        u = Eigen::Vector2cd(st.delta, st.delta_tilde);
                    }
                }
            }
        }
        ScalarState next = st;
        scalar_sweep(d, dt, inv_Nt, z, next);
        ++it;
        double diff = std::abs(next.delta - st.delta) + std::abs(next.delta_tilde - st.delta_tilde);
        st = next;
        if (diff < tol) return it;
        u_prev2 = u_prev;
        have_prev2 = have_prev;
        u_prev = u;
        have_prev = true;
    }
    throw IterationError("scalar system: no convergence within max_iter", tol);
}

// Newton steps on the two-variable system.  Quadratic near the root, so a
// warm start from the previous continuation rung converges in a handful of
// steps even where the sweep contraction rate degrades to 1 - O(Im z).
// Returns -1 (leaving st untouched) when it stalls, hits a pole, or lands in
// the wrong half plane; the caller then falls back to sweeps.
int scalar_newton_at(const Eigen::VectorXd& d, const Eigen::VectorXd& dt, double inv_Nt,
                     cplx z, ScalarState& st, double tol, int max_iter) {
    ScalarState cur = st;
    const double sgn = (z.imag() > 0.0) ? 1.0 : (z.imag() < 0.0 ? -1.0 : 0.0);
    for (int it = 1; it <= max_iter; ++it) {
        cplx f1(0.0, 0.0), j12(0.0, 0.0), f2(0.0, 0.0), j21(0.0, 0.0);
        for (int i = 0; i < d.size(); ++i) {
            cplx den = 1.0 + d[i] * cur.delta_tilde;
            f1 += d[i] / den;
            j12 -= d[i] * d[i] / (den * den);
        }
        for (int j = 0; j < dt.size(); ++j) {
            cplx den = 1.0 + dt[j] * cur.delta;
            f2 += dt[j] / den;
            j21 -= dt[j] * dt[j] / (den * den);
        }
        const cplx w = inv_Nt / z;
        f1 = cur.delta + w * f1;
        f2 = cur.delta_tilde + w * f2;
        j12 *= w;
        j21 *= w;
        const cplx det = 1.0 - j12 * j21;  // J = [[1, j12], [j21, 1]]
        const double defect = std::abs(f1) + std::abs(f2);
        if (!std::isfinite(defect) || det == cplx(0.0, 0.0)) return -1;
        cur.delta -= (f1 - j12 * f2) / det;
        cur.delta_tilde -= (f2 - j21 * f1) / det;
        if (!std::isfinite(std::abs(cur.delta) + std::abs(cur.delta_tilde))) return -1;
        if (defect < tol) {
            if (sgn != 0.0 &&
                (sgn * cur.delta.imag() < 0.0 || sgn * cur.delta_tilde.imag() < 0.0))
                return -1;
            st = cur;
            return it;
        }
    }
    return -1;
}

ScalarState scalar_solve(const Eigen::VectorXd& d, const Eigen::VectorXd& dt, double inv_Nt,
                         cplx z, double tol, int max_iter, int* iterations) {
    ScalarState st;
    int total = 0;
    const double eta = std::abs(z.imag());
    if (eta >= 0.05 || z.real() < 0.0) {
        st.delta = -d.mean() * static_cast<double>(d.size()) * inv_Nt / z;
        st.delta_tilde = -dt.mean() * static_cast<double>(dt.size()) * inv_Nt / z;
        total = scalar_solve_at(d, dt, inv_Nt, z, st, tol, max_iter);
    } else {
        std::vector<double> rungs{0.1};
        while (rungs.back() > std::max(eta, 1e-6) * 2.0) rungs.push_back(rungs.back() * 0.5);
        rungs.push_back(eta);
        const double sgn = (z.imag() >= 0.0) ? 1.0 : -1.0;
        bool started = false;
        for (double r : rungs) {
            cplx zr(z.real(), sgn * r);
            if (!started) {
                st.delta = -d.mean() * static_cast<double>(d.size()) * inv_Nt / zr;
                st.delta_tilde = -dt.mean() * static_cast<double>(dt.size()) * inv_Nt / zr;
                started = true;
                total += scalar_solve_at(d, dt, inv_Nt, zr, st, tol, max_iter);
                continue;
            }
            int nit = scalar_newton_at(d, dt, inv_Nt, zr, st, tol, 100);
            total += (nit < 0) ? scalar_solve_at(d, dt, inv_Nt, zr, st, tol, max_iter) : nit;
        }
    }
    if (iterations) *iterations = total;
    return st;
}

}  // namespace

ScalarMiEquivalent solve_scalar_mi_system(const Eigen::VectorXd& d,
                                          const Eigen::VectorXd& d_tilde, cplx z, double tol,
                                          int max_iter) {
    check_domain(z);
    if ((d.array() <= 0.0).any() || (d_tilde.array() <= 0.0).any())
        throw ValidationError("solve_scalar_mi_system: diagonal entries must be positive");
    const double inv_Nt = 1.0 / static_cast<double>(d_tilde.size());
    ScalarMiEquivalent out;
    out.z = z;
    int iters = 0;
    ScalarState st = scalar_solve(d, d_tilde, inv_Nt, z, tol, max_iter, &iters);
    out.iterations = iters;
    out.delta = st.delta;
    out.delta_tilde = st.delta_tilde;
    out.t_diag = (-((d.cast<cplx>().array() * st.delta_tilde) + 1.0) * z).inverse().matrix();
    out.t_tilde_diag = (-((d_tilde.cast<cplx>().array() * st.delta) + 1.0) * z).inverse().matrix();
    cplx delta_check = (d.cast<cplx>().array() * out.t_diag.array()).sum() * inv_Nt;
    cplx delta_tilde_check =
        (d_tilde.cast<cplx>().array() * out.t_tilde_diag.array()).sum() * inv_Nt;
    out.residual = std::abs(delta_check - st.delta) + std::abs(delta_tilde_check - st.delta_tilde);
    return out;
}

// ---------------------------------------------------------------- density

Eigen::VectorXd lsd_density(const VarianceProfile& profile, const Eigen::VectorXd& x_grid,
                            double eta) {
    if (!(eta > 0.0)) throw ValidationError("lsd_density: eta must be positive");
    for (int k = 1; k < x_grid.size(); ++k)
        if (!(x_grid[k] > x_grid[k - 1]))
            throw ValidationError("lsd_density: x_grid must be strictly increasing");

    Eigen::VectorXd out(x_grid.size());
    std::vector<std::string> failures(static_cast<std::size_t>(x_grid.size()));
    parallel_for(static_cast<std::size_t>(x_grid.size()), [&](std::size_t k) {
        cplx z(x_grid[static_cast<int>(k)], eta);
        try {
            cplx m0;
            if (profile.separable) {
                ScalarState st = scalar_solve(profile.d, profile.d_tilde,
                                              1.0 / static_cast<double>(profile.n), z, 1e-12,
                                              20000, nullptr);
                cplx acc(0.0, 0.0);
                for (int i = 0; i < profile.p; ++i)
                    acc += -1.0 / (z * (1.0 + profile.d[i] * st.delta_tilde));
                m0 = acc / static_cast<double>(profile.p);
            } else {
                DetEquivalent det = solve_canonical_system(profile, z);
                m0 = stieltjes_m0(det).m0;
            }
            out[static_cast<int>(k)] = m0.imag() / M_PI;
        } catch (const Error& e) {
            failures[k] = e.what();
            out[static_cast<int>(k)] = -1.0;
        }
    });
    for (int k = 0; k < x_grid.size(); ++k)
        if (!failures[static_cast<std::size_t>(k)].empty())
            throw IterationError("lsd_density failed at x = " + std::to_string(x_grid[k]) + ": " +
                                     failures[static_cast<std::size_t>(k)],
                                 0.0);
    return out;
}

}  // namespace specgram
