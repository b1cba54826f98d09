#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"
#include "finsler/linalg.hpp"
#include "finsler/manifold.hpp"
#include "finsler/phi.hpp"

namespace finsler {

/// Pointwise data of the metric F = alpha phi(b2, beta/alpha) at one (x, y).
struct PointState {
    std::vector<double> x, y;
    Matrix<double> a, a_inv;
    std::vector<double> b_lower, b_upper; // b_i, b^i
    std::vector<double> l_upper, l_lower; // l^i = y^i/alpha, l_i = a_ij l^j
    double alpha = 0.0, beta = 0.0, s = 0.0, b2 = 0.0;
    int n = 0;
};

inline PointState make_point_state(const ManifoldModel& model, std::span<const double> x,
                                   std::span<const double> y) {
    PointState st;
    st.n = model.dimension();
    st.x.assign(x.begin(), x.end());
    st.y.assign(y.begin(), y.end());
    st.a = model.metric(x);
    st.a_inv = inverse(st.a);
    st.b_lower = model.oneform(x);
    st.b_upper = mat_vec(st.a_inv, st.b_lower);
    double a2 = 0.0;
    for (int i = 0; i < st.n; ++i)
        for (int j = 0; j < st.n; ++j) a2 += st.a(i, j) * y[i] * y[j];
    if (a2 <= 0.0) throw DomainError("make_point_state: y must be nonzero with alpha > 0");
    st.alpha = std::sqrt(a2);
    st.beta = dot(st.b_lower, st.y);
    st.b2 = dot(st.b_lower, st.b_upper);
    st.s = st.beta / st.alpha;
    st.l_upper.resize(static_cast<size_t>(st.n));
    for (int i = 0; i < st.n; ++i) st.l_upper[static_cast<size_t>(i)] = y[i] / st.alpha;
    st.l_lower = mat_vec(st.a, st.l_upper);
    return st;
}

/// F^2(x, y), evaluable on scalars and on order-k jets in any one parameter.
template <typename T>
T finsler_f2(const ManifoldModel& model, const PhiModel& phi, std::span<const T> x,
             std::span<const T> y) {
    const int n = model.dimension();
    auto a = model.metric(x);
    auto b = model.oneform(x);
    auto a_inv = inverse(a);
    T alpha2 = a(0, 0) * (y[0] * y[0]);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i || j) alpha2 = alpha2 + a(i, j) * (y[i] * y[j]);
    T b2 = a_inv(0, 0) * (b[0] * b[0]);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i || j) b2 = b2 + a_inv(i, j) * (b[static_cast<size_t>(i)] * b[static_cast<size_t>(j)]);
    T beta = b[0] * y[0];
    for (int i = 1; i < n; ++i) beta = beta + b[static_cast<size_t>(i)] * y[i];
    using std::sqrt;
    T alpha = sqrt(alpha2);
    T s = beta / alpha;
    if constexpr (std::is_same_v<T, double>) {
        const double p = phi.value(b2, s);
        return alpha2 * p * p;
    } else {
        T p = phi.eval(b2, s);
        return alpha2 * (p * p);
    }
}

inline double finsler_norm(const ManifoldModel& model, const PhiModel& phi,
                           std::span<const double> x, std::span<const double> y) {
    return std::sqrt(finsler_f2<double>(model, phi, x, y));
}

namespace detail {

/// F^2 as a jet field over the combined (x, y) chart, for the derivative oracles.
inline JetField f2_field(const ManifoldModel& model, const PhiModel& phi) {
    const int n = model.dimension();
    return [&model, &phi, n](std::span<const DJet> z) {
        return finsler_f2<DJet>(model, phi, z.subspan(0, static_cast<size_t>(n)),
                                z.subspan(static_cast<size_t>(n)));
    };
}

inline std::vector<double> combined_point(const PointState& st) {
    std::vector<double> z(st.x);
    z.insert(z.end(), st.y.begin(), st.y.end());
    return z;
}

inline std::vector<double> basis_dir(int total, int index) {
    std::vector<double> d(static_cast<size_t>(total), 0.0);
    d[static_cast<size_t>(index)] = 1.0;
    return d;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Route comparison policy.
//
// Curvature entries span orders of magnitude near the s -> b edge, so each
// pair of routes is compared relative to the larger route's max entry. The
// closed forms also report the accumulated magnitude of their additive terms
// ("scale"); when both routes are below 1e-9 of that scale the quantity has
// vanished at working precision (the Berwald families), and the discrepancy
// is reported as zero rather than as the ratio of two rounding errors.
// ---------------------------------------------------------------------------

struct Discrepancy {
    double rel = 0.0;   // reported relative discrepancy
    double diff = 0.0;  // max abs entry difference
    double mag = 0.0;   // max abs entry over both routes
    bool vanished = false;
};

inline Discrepancy make_discrepancy(double diff, double mag, double scale) {
    Discrepancy d;
    d.diff = diff;
    d.mag = mag;
    d.vanished = mag <= 1e-9 * std::max(scale, 1.0);
    d.rel = d.vanished ? 0.0 : diff / (mag + 1e-30);
    return d;
}

template <typename TensorT>
Discrepancy compare_routes(const TensorT& a, const TensorT& b, double scale) {
    double diff = 0.0;
    if constexpr (std::is_same_v<TensorT, std::vector<double>>) {
        for (size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    } else if constexpr (std::is_same_v<TensorT, Matrix<double>>) {
        for (int i = 0; i < a.size(); ++i)
            for (int j = 0; j < a.size(); ++j) diff = std::max(diff, std::abs(a(i, j) - b(i, j)));
    } else {
        for (size_t i = 0; i < a.data.size(); ++i) diff = std::max(diff, std::abs(a.data[i] - b.data[i]));
    }
    return make_discrepancy(diff, std::max(max_abs(a), max_abs(b)), scale);
}

/// Residual of an identity `sum == 0`, normalized by the pre-cancellation
/// magnitude `abs_sum` with the same vanish floor.
inline double identity_residual(double abs_residual, double abs_sum, double scale) {
    if (abs_sum <= 1e-9 * std::max(scale, 1.0)) return 0.0;
    return abs_residual / (abs_sum + 1e-30);
}

// ---------------------------------------------------------------------------
// Fundamental tensor
// ---------------------------------------------------------------------------

enum class TensorRoute { closed_form, oracle };
enum class InverseRoute { closed_form, matrix_inverse };
enum class SprayRoute { oracle, general, closed_conformal };
enum class CurvatureRoute { closed_form, oracle };
enum class ContractionRoute { closed_form, contraction };

/// g_ij = rho a_ij + rho0 b_i b_j + rho1(b_i l_j + b_j l_i) - s rho1 l_i l_j
inline Matrix<double> fundamental_tensor_closed(const PointState& st, const ScalarPack& pk) {
    Matrix<double> g(st.n);
    for (int i = 0; i < st.n; ++i)
        for (int j = 0; j < st.n; ++j)
            g(i, j) = pk.rho * st.a(i, j) + pk.rho0 * st.b_lower[static_cast<size_t>(i)] * st.b_lower[static_cast<size_t>(j)] +
                      pk.rho1 * (st.b_lower[static_cast<size_t>(i)] * st.l_lower[static_cast<size_t>(j)] +
                                 st.b_lower[static_cast<size_t>(j)] * st.l_lower[static_cast<size_t>(i)]) -
                      pk.s * pk.rho1 * st.l_lower[static_cast<size_t>(i)] * st.l_lower[static_cast<size_t>(j)];
    return g;
}

/// g_ij = 1/2 d^2 F^2 / dy^i dy^j by polarization over order-2 jets.
inline Matrix<double> fundamental_tensor_oracle(const ManifoldModel& model, const PhiModel& phi,
                                                const PointState& st) {
    auto field = detail::f2_field(model, phi);
    auto z = detail::combined_point(st);
    Matrix<double> g(st.n);
    for (int i = 0; i < st.n; ++i)
        for (int j = i; j < st.n; ++j) {
            std::vector<std::vector<double>> dirs{detail::basis_dir(2 * st.n, st.n + i),
                                                  detail::basis_dir(2 * st.n, st.n + j)};
            g(i, j) = 0.5 * mixed_partial(field, z, dirs);
            g(j, i) = g(i, j);
        }
    return g;
}

inline Matrix<double> fundamental_tensor(const ManifoldModel& model, const PhiModel& phi,
                                         std::span<const double> x, std::span<const double> y,
                                         TensorRoute route) {
    PointState st = make_point_state(model, x, y);
    if (route == TensorRoute::oracle) return fundamental_tensor_oracle(model, phi, st);
    return fundamental_tensor_closed(st, scalar_pack(phi, st.b2, st.s));
}

/// det(g) = phi^{n+1} (phi - s phi2)^{n-2} (phi - s phi2 + (b2 - s^2) phi22) det(a)
inline double det_fundamental_closed(const PointState& st, const ScalarPack& pk) {
    const double phi = pk.P.phi();
    const double d1 = phi - pk.s * pk.P.phi2();
    const double d2 = d1 + (pk.b2 - pk.s * pk.s) * pk.P.phi22();
    return std::pow(phi, st.n + 1) * std::pow(d1, st.n - 2) * d2 * determinant(st.a);
}

/// g^{ij} = (1/rho)(a^{ij} + eta b^i b^j + eta0 (b^i l^j + b^j l^i) + eta1 l^i l^j)
inline Matrix<double> inverse_fundamental_closed(const PointState& st, const ScalarPack& pk) {
    Matrix<double> ginv(st.n);
    for (int i = 0; i < st.n; ++i)
        for (int j = 0; j < st.n; ++j)
            ginv(i, j) = (st.a_inv(i, j) + pk.eta * st.b_upper[static_cast<size_t>(i)] * st.b_upper[static_cast<size_t>(j)] +
                          pk.eta0 * (st.b_upper[static_cast<size_t>(i)] * st.l_upper[static_cast<size_t>(j)] +
                                     st.b_upper[static_cast<size_t>(j)] * st.l_upper[static_cast<size_t>(i)]) +
                          pk.eta1 * st.l_upper[static_cast<size_t>(i)] * st.l_upper[static_cast<size_t>(j)]) /
                         pk.rho;
    return ginv;
}

inline Matrix<double> inverse_fundamental_tensor(const ManifoldModel& model, const PhiModel& phi,
                                                 std::span<const double> x, std::span<const double> y,
                                                 InverseRoute route) {
    PointState st = make_point_state(model, x, y);
    ScalarPack pk = scalar_pack(phi, st.b2, st.s);
    if (route == InverseRoute::closed_form) return inverse_fundamental_closed(st, pk);
    Matrix<double> g = fundamental_tensor_closed(st, pk);
    const double mineig = min_eigenvalue(g);
    const double maxeig = max_abs(g) * st.n;
    if (std::abs(mineig) < 1e-14 * maxeig)
        throw NonInvertibleMetricError("inverse_fundamental_tensor: singular fundamental tensor",
                                       maxeig / std::max(std::abs(mineig), 1e-300));
    return inverse(g);
}

// ---------------------------------------------------------------------------
// Sprays
// ---------------------------------------------------------------------------

/// Conformal factor c(x) with the closed-conformal precondition enforced.
inline double conformal_factor(const ManifoldModel& model, std::span<const double> x,
                               double tol = 1e-9) {
    std::vector<std::vector<double>> pts{std::vector<double>(x.begin(), x.end())};
    auto rep = closed_conformal_check(model, pts, tol);
    if (!rep.holds)
        throw RouteUnavailableError("closed-conformal route: b_{i|j} = c a_ij fails, residual " +
                                    std::to_string(rep.max_residual));
    return rep.c_values[0];
}

/// Definitional route: G^i = 1/4 g^{il} ( [F^2]_{x^m y^l} y^m - [F^2]_{x^l} ),
/// with g from the jet Hessian of F^2 and inverted numerically, so the route is
/// independent of every closed form.
inline std::vector<double> spray_oracle(const ManifoldModel& model, const PhiModel& phi,
                                        const PointState& st) {
    const int n = st.n;
    auto field = detail::f2_field(model, phi);
    auto z = detail::combined_point(st);
    Matrix<double> g = fundamental_tensor_oracle(model, phi, st);
    Matrix<double> ginv = inverse(g);
    std::vector<double> rhs(static_cast<size_t>(n), 0.0);
    for (int l = 0; l < n; ++l) {
        double acc = 0.0;
        for (int m = 0; m < n; ++m) {
            std::vector<std::vector<double>> dirs{detail::basis_dir(2 * n, m),
                                                  detail::basis_dir(2 * n, n + l)};
            acc += mixed_partial(field, z, dirs) * st.y[static_cast<size_t>(m)];
        }
        acc -= directional_derivatives(field, z, detail::basis_dir(2 * n, l), 1)[1];
        rhs[static_cast<size_t>(l)] = acc;
    }
    std::vector<double> G(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l) acc += ginv(i, l) * rhs[static_cast<size_t>(l)];
        G[static_cast<size_t>(i)] = 0.25 * acc;
    }
    return G;
}

/// General formula for arbitrary beta:
/// G^i = G_alpha^i + alpha Q s^i_0
///     + { Theta(-2 alpha Q s_0 + r_00 + 2 alpha^2 R r) + alpha Omega (r_0 + s_0) } l^i
///     + { Psi  (-2 alpha Q s_0 + r_00 + 2 alpha^2 R r) + alpha Pi    (r_0 + s_0) } b^i
///     - alpha^2 R (r^i + s^i)
inline std::vector<double> spray_general(const ManifoldModel& model, const PhiModel& phi,
                                         const PointState& st) {
    const int n = st.n;
    ScalarPack pk = scalar_pack(phi, st.b2, st.s);
    RSInvariants rs = rs_split(model, st.x, st.y);
    std::vector<double> G = alpha_spray(model, st.x, st.y);
    const double common = -2.0 * st.alpha * pk.Q * rs.s0 + rs.r00 + 2.0 * st.alpha * st.alpha * pk.R * rs.r;
    const double lcoef = pk.Theta * common + st.alpha * pk.Omega * (rs.r0 + rs.s0);
    const double bcoef = pk.Psi * common + st.alpha * pk.Pi * (rs.r0 + rs.s0);
    for (int i = 0; i < n; ++i) {
        G[static_cast<size_t>(i)] += st.alpha * pk.Q * rs.s_i0[static_cast<size_t>(i)] +
                                     lcoef * st.l_upper[static_cast<size_t>(i)] +
                                     bcoef * st.b_upper[static_cast<size_t>(i)] -
                                     st.alpha * st.alpha * pk.R *
                                         (rs.r_upper[static_cast<size_t>(i)] + rs.s_upper[static_cast<size_t>(i)]);
    }
    return G;
}

/// Closed-conformal specialization: G^i = G_alpha^i + c alpha^2 (E l^i + H b^i).
inline std::vector<double> spray_closed_conformal(const ManifoldModel& model, const PhiModel& phi,
                                                  const PointState& st) {
    const double c = conformal_factor(model, st.x);
    ScalarPack pk = scalar_pack(phi, st.b2, st.s);
    std::vector<double> G = alpha_spray(model, st.x, st.y);
    const double a2 = st.alpha * st.alpha;
    for (int i = 0; i < st.n; ++i)
        G[static_cast<size_t>(i)] += c * a2 * (pk.E * st.l_upper[static_cast<size_t>(i)] +
                                               pk.H * st.b_upper[static_cast<size_t>(i)]);
    return G;
}

inline std::vector<double> spray(const ManifoldModel& model, const PhiModel& phi,
                                 std::span<const double> x, std::span<const double> y,
                                 SprayRoute route) {
    PointState st = make_point_state(model, x, y);
    switch (route) {
        case SprayRoute::oracle: return spray_oracle(model, phi, st);
        case SprayRoute::general: return spray_general(model, phi, st);
        default: return spray_closed_conformal(model, phi, st);
    }
}

// ---------------------------------------------------------------------------
// Berwald curvature
// ---------------------------------------------------------------------------

namespace detail {

/// Cyclic sum over (j,k,l) -> (k,l,j) -> (l,j,k) of a three-index term.
template <typename F>
double cyc3(const F& f, int j, int k, int l) {
    return f(j, k, l) + f(k, l, j) + f(l, j, k);
}

} // namespace detail

/// U^i_jkl of Proposition 1 plus the per-entry sum of |terms| as a scale.
struct BerwaldClosed {
    Tensor4<double> value;
    double scale = 0.0;
};

inline BerwaldClosed berwald_closed(const PointState& st, const ScalarPack& pk, double c) {
    const int n = st.n;
    const double s = pk.s;
    const double E = pk.E, E2 = pk.E2, E22 = pk.E22, E222 = pk.E222;
    const double H2 = pk.H2, H22 = pk.H22, H222 = pk.H222;
    const auto& a = st.a;
    const auto& b = st.b_lower;
    const auto& l = st.l_lower;
    const auto& bu = st.b_upper;
    const auto& lu = st.l_upper;

    BerwaldClosed out;
    out.value = Tensor4<double>(n);
    Tensor4<double> absacc(n);
    const double pref = c / st.alpha;

    for (int i = 0; i < n; ++i) {
        auto t1 = [&](int j, int k, int ll) {
            return ((E - s * E2) * a(k, ll) + E22 * b[static_cast<size_t>(k)] * b[static_cast<size_t>(ll)]) * (i == j ? 1.0 : 0.0) +
                   s * (3.0 * E22 + s * E222) * l[static_cast<size_t>(ll)] * l[static_cast<size_t>(j)] * b[static_cast<size_t>(k)] * lu[static_cast<size_t>(i)] -
                   (E22 + s * E222) * b[static_cast<size_t>(ll)] * l[static_cast<size_t>(j)] * b[static_cast<size_t>(k)] * lu[static_cast<size_t>(i)];
        };
        auto t2 = [&](int j, int k, int ll) {
            return s * E22 * (a(j, ll) * b[static_cast<size_t>(k)] * lu[static_cast<size_t>(i)] +
                              (l[static_cast<size_t>(k)] * b[static_cast<size_t>(ll)] + l[static_cast<size_t>(ll)] * b[static_cast<size_t>(k)]) * (i == j ? 1.0 : 0.0)) +
                   (E - s * E2 - s * s * E22) * (a(j, ll) * lu[static_cast<size_t>(i)] + l[static_cast<size_t>(ll)] * (i == j ? 1.0 : 0.0)) * l[static_cast<size_t>(k)];
        };
        auto t4 = [&](int j, int k, int ll) {
            return (H2 - s * H22) * (b[static_cast<size_t>(j)] - s * l[static_cast<size_t>(j)]) * a(k, ll) -
                   (H2 - s * H22 - s * s * H222) * b[static_cast<size_t>(ll)] * l[static_cast<size_t>(j)] * l[static_cast<size_t>(k)] -
                   s * H222 * b[static_cast<size_t>(k)] * b[static_cast<size_t>(ll)] * l[static_cast<size_t>(j)];
        };
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int ll = 0; ll < n; ++ll) {
                    const double v1 = detail::cyc3(t1, j, k, ll);
                    const double v2 = -detail::cyc3(t2, j, k, ll);
                    const double v3 = ((3.0 * E - 3.0 * s * E2 - 6.0 * s * s * E22 - s * s * s * E222) *
                                           l[static_cast<size_t>(j)] * l[static_cast<size_t>(k)] * l[static_cast<size_t>(ll)] +
                                       E222 * b[static_cast<size_t>(ll)] * b[static_cast<size_t>(k)] * b[static_cast<size_t>(j)]) *
                                      lu[static_cast<size_t>(i)];
                    const double v4 = detail::cyc3(t4, j, k, ll) * bu[static_cast<size_t>(i)];
                    const double v5 = (s * (3.0 * H2 - 3.0 * s * H22 - s * s * H222) *
                                           l[static_cast<size_t>(j)] * l[static_cast<size_t>(k)] * l[static_cast<size_t>(ll)] +
                                       H222 * b[static_cast<size_t>(j)] * b[static_cast<size_t>(ll)] * b[static_cast<size_t>(k)]) *
                                      bu[static_cast<size_t>(i)];
                    out.value(i, j, k, ll) = pref * (v1 + v2 + v3 + v4 + v5);
                    absacc(i, j, k, ll) = std::abs(pref) * (std::abs(v1) + std::abs(v2) + std::abs(v3) +
                                                            std::abs(v4) + std::abs(v5));
                }
    }
    out.scale = max_abs(absacc);
    return out;
}

namespace detail {

/// The closed-conformal spray as order-3 jets along y(t) = y + t v, with x
/// frozen. E and H ride along by composing their s-derivative jets with s(t).
inline std::vector<DJet> spray_cc_jets(const PointState& st, const ScalarPack& pk, double c,
                                       const Tensor3<double>& gamma, std::span<const double> v) {
    const int n = st.n;
    std::vector<DJet> yj;
    yj.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        DJet j = DJet::constant(st.y[static_cast<size_t>(i)], 3);
        j.coefficient(1) = v[static_cast<size_t>(i)];
        yj.push_back(j);
    }
    DJet alpha2 = DJet::constant(0.0, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) alpha2 = alpha2 + st.a(i, j) * (yj[static_cast<size_t>(i)] * yj[static_cast<size_t>(j)]);
    DJet alpha = sqrt(alpha2);
    DJet beta = DJet::constant(0.0, 3);
    for (int i = 0; i < n; ++i) beta = beta + st.b_lower[static_cast<size_t>(i)] * yj[static_cast<size_t>(i)];
    DJet sj = beta / alpha;

    DJet e_derivs(3);
    e_derivs.coefficient(0) = pk.E;
    e_derivs.coefficient(1) = pk.E2;
    e_derivs.coefficient(2) = pk.E22;
    e_derivs.coefficient(3) = pk.E222;
    DJet h_derivs(3);
    h_derivs.coefficient(0) = pk.H;
    h_derivs.coefficient(1) = pk.H2;
    h_derivs.coefficient(2) = pk.H22;
    h_derivs.coefficient(3) = pk.H222;
    DJet Ej = compose(e_derivs, sj);
    DJet Hj = compose(h_derivs, sj);

    std::vector<DJet> G;
    G.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        DJet galpha = DJet::constant(0.0, 3);
        if (gamma.n == n) {
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    galpha = galpha + 0.5 * gamma(i, j, k) * (yj[static_cast<size_t>(j)] * yj[static_cast<size_t>(k)]);
        }
        DJet li = yj[static_cast<size_t>(i)] / alpha;
        G.push_back(galpha + c * alpha2 * (Ej * li + Hj * st.b_upper[static_cast<size_t>(i)]));
    }
    return G;
}

} // namespace detail

/// B^i_jkl = d^3 G^i / dy^j dy^k dy^l, differentiating the closed-conformal
/// spray with order-3 jets and polarization.
inline Tensor4<double> berwald_oracle(const ManifoldModel& model, const PhiModel& phi,
                                      const PointState& st) {
    const int n = st.n;
    const double c = conformal_factor(model, st.x);
    ScalarPack pk = scalar_pack(phi, st.b2, st.s);
    Tensor3<double> gamma = christoffel(model, st.x);
    Tensor4<double> B(n);
    std::vector<double> combo(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k)
            for (int l = k; l < n; ++l) {
                std::vector<double> acc(static_cast<size_t>(n), 0.0);
                for (unsigned mask = 1; mask < 8u; ++mask) {
                    std::fill(combo.begin(), combo.end(), 0.0);
                    int bits = 0;
                    const std::array<int, 3> idx{j, k, l};
                    for (int bit = 0; bit < 3; ++bit)
                        if (mask & (1u << bit)) {
                            ++bits;
                            combo[static_cast<size_t>(idx[static_cast<size_t>(bit)])] += 1.0;
                        }
                    const double sign = ((3 - bits) % 2 == 0) ? 1.0 : -1.0;
                    auto Gj = detail::spray_cc_jets(st, pk, c, gamma, combo);
                    for (int i = 0; i < n; ++i) acc[static_cast<size_t>(i)] += sign * Gj[static_cast<size_t>(i)].coefficient(3);
                }
                for (int i = 0; i < n; ++i) {
                    const double val = acc[static_cast<size_t>(i)] / 6.0;
                    B(i, j, k, l) = val;
                    B(i, j, l, k) = val;
                    B(i, k, j, l) = val;
                    B(i, k, l, j) = val;
                    B(i, l, j, k) = val;
                    B(i, l, k, j) = val;
                }
            }
    return B;
}

inline Tensor4<double> berwald_curvature(const ManifoldModel& model, const PhiModel& phi,
                                         std::span<const double> x, std::span<const double> y,
                                         CurvatureRoute route) {
    PointState st = make_point_state(model, x, y);
    if (route == CurvatureRoute::oracle) return berwald_oracle(model, phi, st);
    return berwald_closed(st, scalar_pack(phi, st.b2, st.s), conformal_factor(model, st.x)).value;
}

// ---------------------------------------------------------------------------
// Landsberg curvature
// ---------------------------------------------------------------------------

struct LandsbergClosed {
    Tensor3<double> value;
    double scale = 0.0;
};

/// L_jkl = -(c/2) phi V_jkl of Proposition 2.
inline LandsbergClosed landsberg_closed(const PointState& st, const ScalarPack& pk, double c) {
    const int n = st.n;
    const double s = pk.s;
    const double E = pk.E, E2 = pk.E2, E22 = pk.E22, E222 = pk.E222;
    const double H2 = pk.H2, H22 = pk.H22, H222 = pk.H222;
    const double phi = pk.P.phi(), phi2 = pk.P.phi2();
    const double sphi = s * phi + (pk.b2 - s * s) * phi2;
    const auto& a = st.a;
    const auto& b = st.b_lower;
    const auto& l = st.l_lower;

    auto m = [&](int j) { return phi * l[static_cast<size_t>(j)] + phi2 * (b[static_cast<size_t>(j)] - s * l[static_cast<size_t>(j)]); };
    auto t1 = [&](int j, int k, int ll) {
        return ((E - s * E2) * a(k, ll) + E22 * b[static_cast<size_t>(k)] * b[static_cast<size_t>(ll)]) * m(j) -
               ((E22 + s * E222) * (b[static_cast<size_t>(ll)] - s * l[static_cast<size_t>(ll)]) - 2.0 * E22 * s * l[static_cast<size_t>(ll)]) *
                   phi * b[static_cast<size_t>(k)] * l[static_cast<size_t>(j)];
    };
    auto t2 = [&](int j, int k, int ll) {
        return s * E22 * (a(j, ll) * b[static_cast<size_t>(k)] * phi +
                          (l[static_cast<size_t>(ll)] * b[static_cast<size_t>(k)] + l[static_cast<size_t>(k)] * b[static_cast<size_t>(ll)]) * m(j)) +
               (E - s * E2 - s * s * E22) * (a(j, ll) * l[static_cast<size_t>(k)] * phi + m(j) * l[static_cast<size_t>(k)] * l[static_cast<size_t>(ll)]);
    };
    auto t4 = [&](int j, int k, int ll) {
        return (H2 - s * H22) * (a(k, ll) * (b[static_cast<size_t>(j)] - s * l[static_cast<size_t>(j)]) -
                                 b[static_cast<size_t>(ll)] * l[static_cast<size_t>(k)] * l[static_cast<size_t>(j)]) -
               s * H222 * l[static_cast<size_t>(j)] * b[static_cast<size_t>(ll)] * (b[static_cast<size_t>(k)] - s * l[static_cast<size_t>(k)]);
    };

    LandsbergClosed out;
    out.value = Tensor3<double>(n);
    Tensor3<double> absacc(n);
    const double pref = -0.5 * c * phi;
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            for (int ll = 0; ll < n; ++ll) {
                const double v1 = detail::cyc3(t1, j, k, ll);
                const double v2 = -detail::cyc3(t2, j, k, ll);
                const double v3 = ((3.0 * E - 3.0 * s * E2 - 6.0 * s * s * E22 - s * s * s * E222) *
                                       l[static_cast<size_t>(j)] * l[static_cast<size_t>(k)] * l[static_cast<size_t>(ll)] +
                                   E222 * b[static_cast<size_t>(j)] * b[static_cast<size_t>(k)] * b[static_cast<size_t>(ll)]) *
                                  phi;
                const double v4 = detail::cyc3(t4, j, k, ll) * sphi;
                const double v5 = (s * (3.0 * H2 - 3.0 * s * H22 - s * s * H222) *
                                       l[static_cast<size_t>(j)] * l[static_cast<size_t>(k)] * l[static_cast<size_t>(ll)] +
                                   H222 * b[static_cast<size_t>(j)] * b[static_cast<size_t>(k)] * b[static_cast<size_t>(ll)]) *
                                  sphi;
                out.value(j, k, ll) = pref * (v1 + v2 + v3 + v4 + v5);
                absacc(j, k, ll) = std::abs(pref) * (std::abs(v1) + std::abs(v2) + std::abs(v3) +
                                                     std::abs(v4) + std::abs(v5));
            }
    out.scale = max_abs(absacc);
    return out;
}

/// L_jkl = -1/2 y^m g_im B^i_jkl, with B from the jet oracle.
inline Tensor3<double> landsberg_contraction(const PointState& st, const Matrix<double>& g,
                                             const Tensor4<double>& B) {
    const int n = st.n;
    std::vector<double> yg(static_cast<size_t>(n), 0.0); // y^m g_im
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m) yg[static_cast<size_t>(i)] += st.y[static_cast<size_t>(m)] * g(i, m);
    Tensor3<double> L(n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
                double acc = 0.0;
                for (int i = 0; i < n; ++i) acc += yg[static_cast<size_t>(i)] * B(i, j, k, l);
                L(j, k, l) = -0.5 * acc;
            }
    return L;
}

inline Tensor3<double> landsberg_curvature(const ManifoldModel& model, const PhiModel& phi,
                                           std::span<const double> x, std::span<const double> y,
                                           ContractionRoute route) {
    PointState st = make_point_state(model, x, y);
    ScalarPack pk = scalar_pack(phi, st.b2, st.s);
    if (route == ContractionRoute::closed_form)
        return landsberg_closed(st, pk, conformal_factor(model, st.x)).value;
    Tensor4<double> B = berwald_oracle(model, phi, st);
    return landsberg_contraction(st, fundamental_tensor_closed(st, pk), B);
}

// ---------------------------------------------------------------------------
// Mean Landsberg curvature
// ---------------------------------------------------------------------------

/// The scalar coefficient w with W_j = w (b_j - s l_j), as the direct ten-term
/// sum of Proposition 3. Also returns the sum of |terms| for normalization.
inline std::pair<double, double> mean_landsberg_coefficient(const ScalarPack& pk, int n) {
    const double s = pk.s, b2 = pk.b2;
    const double phi = pk.P.phi(), phi2 = pk.P.phi2();
    const double d = b2 - s * s;
    const double sphi = s * phi + d * phi2;
    const std::array<double, 10> terms{
        (pk.E - s * pk.E2) * (n + 1) * phi2,
        3.0 * pk.E22 * phi2 * d,
        -s * pk.E22 * (n + 1) * phi,
        pk.E222 * phi * d,
        ((pk.H2 - s * pk.H22) * (n + 1) + pk.H222 * d) * sphi,
        3.0 * pk.eta * (pk.E - s * pk.E2) * phi2 * d,
        3.0 * pk.eta * pk.E22 * phi2 * d * d,
        -3.0 * s * pk.eta * pk.E22 * phi * d,
        pk.eta * pk.E222 * d * d * phi,
        pk.eta * (3.0 * (pk.H2 - s * pk.H22) * d + pk.H222 * d * d) * sphi,
    };
    double w = 0.0, wabs = 0.0;
    for (double t : terms) {
        w += t;
        wabs += std::abs(t);
    }
    return {w, wabs};
}

/// The same coefficient regrouped as in the proof of the weak-Landsberg
/// characterization; agreement with the direct sum is an algebraic identity.
inline std::pair<double, double> mean_landsberg_coefficient_regrouped(const ScalarPack& pk, int n) {
    const double s = pk.s, b2 = pk.b2;
    const double phi = pk.P.phi(), phi2 = pk.P.phi2();
    const double d = b2 - s * s;
    const double sphi = s * phi + d * phi2;
    const double f1 = 1.0 + n + 3.0 * d * pk.eta;
    const double f2 = 1.0 + d * pk.eta;
    const std::array<double, 4> groups{
        f1 * ((pk.E - s * pk.E2) * phi2 + (pk.H2 - s * pk.H22) * sphi),
        d * f2 * sphi * pk.H222,
        (3.0 * d * f2 * phi2 - f1 * s * phi) * pk.E22,
        d * f2 * phi * pk.E222,
    };
    double w = 0.0, wabs = 0.0;
    for (double g : groups) {
        w += g;
        wabs += std::abs(g);
    }
    return {w, wabs};
}

struct MeanLandsbergClosed {
    std::vector<double> value;
    double scale = 0.0;
};

/// J_j = -(c phi / 2 rho) W_j, W_j = w (b_j - s l_j).
inline MeanLandsbergClosed mean_landsberg_closed(const PointState& st, const ScalarPack& pk, double c) {
    auto [w, wabs] = mean_landsberg_coefficient(pk, st.n);
    MeanLandsbergClosed out;
    out.value.resize(static_cast<size_t>(st.n));
    const double pref = -c * pk.P.phi() / (2.0 * pk.rho);
    double maxfac = 0.0;
    for (int j = 0; j < st.n; ++j) {
        const double fac = st.b_lower[static_cast<size_t>(j)] - pk.s * st.l_lower[static_cast<size_t>(j)];
        out.value[static_cast<size_t>(j)] = pref * w * fac;
        maxfac = std::max(maxfac, std::abs(fac));
    }
    out.scale = std::abs(pref) * wabs * maxfac;
    return out;
}

/// J_k = g^{ij} L_ijk with a numerically inverted g and the contraction L.
inline std::vector<double> mean_landsberg_contraction(const PointState& st, const Matrix<double>& ginv,
                                                      const Tensor3<double>& L) {
    const int n = st.n;
    std::vector<double> J(static_cast<size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) acc += ginv(i, j) * L(i, j, k);
        J[static_cast<size_t>(k)] = acc;
    }
    return J;
}

inline std::vector<double> mean_landsberg(const ManifoldModel& model, const PhiModel& phi,
                                          std::span<const double> x, std::span<const double> y,
                                          ContractionRoute route) {
    PointState st = make_point_state(model, x, y);
    ScalarPack pk = scalar_pack(phi, st.b2, st.s);
    if (route == ContractionRoute::closed_form)
        return mean_landsberg_closed(st, pk, conformal_factor(model, st.x)).value;
    Tensor4<double> B = berwald_oracle(model, phi, st);
    Matrix<double> g = fundamental_tensor_closed(st, pk);
    Tensor3<double> L = landsberg_contraction(st, g, B);
    return mean_landsberg_contraction(st, inverse(g), L);
}

/// The two contractions displayed in the proof of the mean-Landsberg formula:
/// a^{kl} V_jkl and eta b^k b^l V_jkl, each with its stated closed form.
struct Prop3Contractions {
    std::vector<double> akl_direct, akl_displayed;
    std::vector<double> etabb_direct, etabb_displayed;
    double scale = 0.0;
};

inline Prop3Contractions prop3_contractions(const PointState& st, const ScalarPack& pk, double c) {
    const int n = st.n;
    LandsbergClosed lc = landsberg_closed(st, pk, c);
    // reconstruct V from L = -(c/2) phi V
    const double inv_pref = -2.0 / (c * pk.P.phi());
    Prop3Contractions out;
    out.akl_direct.assign(static_cast<size_t>(n), 0.0);
    out.etabb_direct.assign(static_cast<size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
        double acc_a = 0.0, acc_b = 0.0;
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
                const double v = inv_pref * lc.value(j, k, l);
                acc_a += st.a_inv(k, l) * v;
                acc_b += st.b_upper[static_cast<size_t>(k)] * st.b_upper[static_cast<size_t>(l)] * v;
            }
        out.akl_direct[static_cast<size_t>(j)] = acc_a;
        out.etabb_direct[static_cast<size_t>(j)] = pk.eta * acc_b;
    }
    const double s = pk.s, b2 = pk.b2;
    const double phi = pk.P.phi(), phi2 = pk.P.phi2();
    const double d = b2 - s * s;
    const double sphi = s * phi + d * phi2;
    const double coef_a = (pk.E - s * pk.E2) * (n + 1) * phi2 + 3.0 * pk.E22 * phi2 * d -
                          s * pk.E22 * (n + 1) * phi + pk.E222 * phi * d +
                          ((pk.H2 - s * pk.H22) * (n + 1) + pk.H222 * d) * sphi;
    const double coef_b = 3.0 * pk.eta * (pk.E - s * pk.E2) * phi2 * d +
                          3.0 * pk.eta * pk.E22 * phi2 * d * d - 3.0 * s * pk.eta * pk.E22 * phi * d +
                          pk.eta * pk.E222 * d * d * phi +
                          pk.eta * (3.0 * (pk.H2 - s * pk.H22) * d + pk.H222 * d * d) * sphi;
    out.akl_displayed.resize(static_cast<size_t>(n));
    out.etabb_displayed.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double fac = st.b_lower[static_cast<size_t>(j)] - s * st.l_lower[static_cast<size_t>(j)];
        out.akl_displayed[static_cast<size_t>(j)] = coef_a * fac;
        out.etabb_displayed[static_cast<size_t>(j)] = coef_b * fac;
    }
    out.scale = std::abs(inv_pref) * lc.scale * static_cast<double>(n) * n *
                std::max(max_abs(st.a_inv) , max_abs(st.b_upper) * max_abs(st.b_upper)) ;
    return out;
}

} // namespace finsler
