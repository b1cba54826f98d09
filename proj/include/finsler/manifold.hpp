#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"
#include "finsler/linalg.hpp"

namespace finsler {

enum class ManifoldKind { euclidean_conformal, general_callable };

/// Riemannian base data (alpha, beta) on a coordinate chart: the metric
/// a_ij(x) and the one-form b_i(x). Immutable after construction; all
/// evaluations are pure.
class ManifoldModel {
public:
    virtual ~ManifoldModel() = default;

    int dimension() const { return n_; }
    ManifoldKind kind() const { return kind_; }
    /// Declared bound with ||beta||_alpha < b0 on the working chart.
    double b0() const { return b0_; }

    virtual Matrix<double> metric(std::span<const double> x) const = 0;
    virtual Matrix<DJet> metric(std::span<const DJet> x) const = 0;
    virtual std::vector<double> oneform(std::span<const double> x) const = 0;
    virtual std::vector<DJet> oneform(std::span<const DJet> x) const = 0;

protected:
    ManifoldModel(int n, ManifoldKind kind, double b0) : n_(n), kind_(kind), b0_(b0) {}

private:
    int n_;
    ManifoldKind kind_;
    double b0_;
};

/// Flat preset: a_ij = delta_ij, b_i(x) = c0 x_i + d_i. Then b_{i|j} = c0 delta_ij
/// identically, so beta is closed and conformal with constant factor c0. This is
/// the canonical test bed: on flat space closed+conformal forces exactly this form.
class EuclideanConformalModel final : public ManifoldModel {
public:
    EuclideanConformalModel(int n, double c0, std::vector<double> d,
                            double b0 = std::numeric_limits<double>::infinity())
        : ManifoldModel(n, ManifoldKind::euclidean_conformal, b0), c0_(c0), d_(std::move(d)) {
        if (static_cast<int>(d_.size()) != n)
            throw DomainError("EuclideanConformalModel: offset dimension mismatch");
    }

    double c0() const { return c0_; }
    const std::vector<double>& offset() const { return d_; }

    Matrix<double> metric(std::span<const double>) const override {
        return Matrix<double>::identity(dimension());
    }
    Matrix<DJet> metric(std::span<const DJet> x) const override {
        Matrix<DJet> a(dimension());
        for (int i = 0; i < dimension(); ++i)
            for (int j = 0; j < dimension(); ++j)
                a(i, j) = DJet::constant(i == j ? 1.0 : 0.0, x[0].order());
        return a;
    }
    std::vector<double> oneform(std::span<const double> x) const override {
        std::vector<double> b(static_cast<size_t>(dimension()));
        for (int i = 0; i < dimension(); ++i) b[static_cast<size_t>(i)] = c0_ * x[i] + d_[static_cast<size_t>(i)];
        return b;
    }
    std::vector<DJet> oneform(std::span<const DJet> x) const override {
        std::vector<DJet> b;
        b.reserve(static_cast<size_t>(dimension()));
        for (int i = 0; i < dimension(); ++i) b.push_back(c0_ * x[i] + d_[static_cast<size_t>(i)]);
        return b;
    }

private:
    double c0_;
    std::vector<double> d_;
};

/// Escape hatch for user-supplied (a_ij, b_i) given as jet-evaluable callables.
class GeneralCallableModel final : public ManifoldModel {
public:
    using MetricFn = std::function<Matrix<DJet>(std::span<const DJet>)>;
    using OneFormFn = std::function<std::vector<DJet>(std::span<const DJet>)>;

    GeneralCallableModel(int n, MetricFn metric, OneFormFn oneform,
                         double b0 = std::numeric_limits<double>::infinity())
        : ManifoldModel(n, ManifoldKind::general_callable, b0),
          metric_(std::move(metric)), oneform_(std::move(oneform)) {}

    Matrix<double> metric(std::span<const double> x) const override {
        auto xj = as_jets(x);
        auto aj = metric_(xj);
        Matrix<double> a(dimension());
        for (int i = 0; i < dimension(); ++i)
            for (int j = 0; j < dimension(); ++j) a(i, j) = aj(i, j).value();
        return a;
    }
    Matrix<DJet> metric(std::span<const DJet> x) const override { return metric_(x); }
    std::vector<double> oneform(std::span<const double> x) const override {
        auto xj = as_jets(x);
        auto bj = oneform_(xj);
        std::vector<double> b(static_cast<size_t>(dimension()));
        for (int i = 0; i < dimension(); ++i) b[static_cast<size_t>(i)] = bj[static_cast<size_t>(i)].value();
        return b;
    }
    std::vector<DJet> oneform(std::span<const DJet> x) const override { return oneform_(x); }

private:
    static std::vector<DJet> as_jets(std::span<const double> x) {
        std::vector<DJet> xj;
        xj.reserve(x.size());
        for (double v : x) xj.push_back(DJet::constant(v, 0));
        return xj;
    }

    MetricFn metric_;
    OneFormFn oneform_;
};

/// First coordinate derivatives of the metric, via order-1 jets along each axis.
inline std::vector<Matrix<double>> metric_partials(const ManifoldModel& model,
                                                   std::span<const double> x) {
    const int n = model.dimension();
    std::vector<Matrix<double>> da(static_cast<size_t>(n), Matrix<double>(n));
    std::vector<DJet> xj(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m) {
        for (int i = 0; i < n; ++i) {
            xj[static_cast<size_t>(i)] = DJet::constant(x[i], 1);
            if (i == m) xj[static_cast<size_t>(i)].coefficient(1) = 1.0;
        }
        auto aj = model.metric(xj);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) da[static_cast<size_t>(m)](i, j) = aj(i, j).coefficient(1);
    }
    return da;
}

/// Gamma^i_jk = 1/2 a^{il} (d_j a_lk + d_k a_lj - d_l a_jk)
inline Tensor3<double> christoffel(const ManifoldModel& model, std::span<const double> x) {
    const int n = model.dimension();
    Matrix<double> a = model.metric(x);
    if (min_eigenvalue(a) <= 0.0)
        throw NonInvertibleMetricError("christoffel: metric not positive definite", 0.0);
    Matrix<double> ainv = inverse(a);
    auto da = metric_partials(model, x);
    Tensor3<double> gamma(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = j; k < n; ++k) {
                double acc = 0.0;
                for (int l = 0; l < n; ++l)
                    acc += ainv(i, l) * (da[static_cast<size_t>(j)](l, k) +
                                         da[static_cast<size_t>(k)](l, j) -
                                         da[static_cast<size_t>(l)](j, k));
                gamma(i, j, k) = 0.5 * acc;
                gamma(i, k, j) = gamma(i, j, k);
            }
    return gamma;
}

/// b_{i|j} = d_j b_i - Gamma^k_{ij} b_k
inline Matrix<double> covariant_derivative(const ManifoldModel& model, std::span<const double> x) {
    const int n = model.dimension();
    Matrix<double> db(n); // db(i, j) = d_j b_i
    std::vector<DJet> xj(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m) {
        for (int i = 0; i < n; ++i) {
            xj[static_cast<size_t>(i)] = DJet::constant(x[i], 1);
            if (i == m) xj[static_cast<size_t>(i)].coefficient(1) = 1.0;
        }
        auto bj = model.oneform(xj);
        for (int i = 0; i < n; ++i) db(i, m) = bj[static_cast<size_t>(i)].coefficient(1);
    }
    auto gamma = christoffel(model, x);
    auto b = model.oneform(x);
    Matrix<double> nabla(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = db(i, j);
            for (int k = 0; k < n; ++k) acc -= gamma(k, i, j) * b[static_cast<size_t>(k)];
            nabla(i, j) = acc;
        }
    return nabla;
}

/// The covariant-derivative invariants of beta at (x, y).
struct RSInvariants {
    Matrix<double> r_ij; // symmetric part of b_{i|j}
    Matrix<double> s_ij; // antisymmetric part
    double r00 = 0.0;    // r_ij y^i y^j
    double r0 = 0.0;     // r_i y^i
    double s0 = 0.0;     // s_i y^i
    double r = 0.0;      // b^i r_i
    std::vector<double> r_lower;  // r_i = b^j r_{ji}
    std::vector<double> s_lower;  // s_i = b^j s_{ji}
    std::vector<double> r_upper;  // r^i = a^{ij} r_j
    std::vector<double> s_upper;  // s^i = a^{ij} s_j
    std::vector<double> s_i0;     // s^i_0 = a^{ik} s_{kj} y^j
    double c = 0.0;               // trace estimate (a^{ij} b_{i|j}) / n
};

inline RSInvariants rs_split(const ManifoldModel& model, std::span<const double> x,
                             std::span<const double> y) {
    const int n = model.dimension();
    double ynorm = 0.0;
    for (double v : y) ynorm += v * v;
    if (ynorm == 0.0) throw DomainError("rs_split: y must be nonzero");

    Matrix<double> nabla = covariant_derivative(model, x);
    Matrix<double> a = model.metric(x);
    Matrix<double> ainv = inverse(a);
    auto b = model.oneform(x);
    std::vector<double> b_up = mat_vec(ainv, b);

    RSInvariants out;
    out.r_ij = Matrix<double>(n);
    out.s_ij = Matrix<double>(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            out.r_ij(i, j) = 0.5 * (nabla(i, j) + nabla(j, i));
            out.s_ij(i, j) = 0.5 * (nabla(i, j) - nabla(j, i));
        }
    out.r_lower.assign(static_cast<size_t>(n), 0.0);
    out.s_lower.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            out.r_lower[static_cast<size_t>(i)] += b_up[static_cast<size_t>(j)] * out.r_ij(j, i);
            out.s_lower[static_cast<size_t>(i)] += b_up[static_cast<size_t>(j)] * out.s_ij(j, i);
        }
    out.r_upper = mat_vec(ainv, out.r_lower);
    out.s_upper = mat_vec(ainv, out.s_lower);
    out.s_i0.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                out.s_i0[static_cast<size_t>(i)] += ainv(i, k) * out.s_ij(k, j) * y[j];
    for (int i = 0; i < n; ++i) {
        out.r0 += out.r_lower[static_cast<size_t>(i)] * y[i];
        out.s0 += out.s_lower[static_cast<size_t>(i)] * y[i];
        out.r += b_up[static_cast<size_t>(i)] * out.r_lower[static_cast<size_t>(i)];
        for (int j = 0; j < n; ++j) out.r00 += out.r_ij(i, j) * y[i] * y[j];
    }
    double trace = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) trace += ainv(i, j) * nabla(i, j);
    out.c = trace / n;
    return out;
}

struct ClosedConformalReport {
    bool holds = false;
    std::vector<double> c_values; // trace estimate per sample point
    double max_residual = 0.0;    // max |b_{i|j} - c a_ij| over samples
};

/// Checks b_{i|j} = c(x) a_ij over the sample set, extracting c by trace
/// (least-squares optimal under the isotropic hypothesis).
inline ClosedConformalReport closed_conformal_check(const ManifoldModel& model,
                                                    std::span<const std::vector<double>> sample_points,
                                                    double tol = 1e-9) {
    if (sample_points.empty())
        throw DomainError("closed_conformal_check: empty sample set");
    ClosedConformalReport rep;
    const int n = model.dimension();
    for (const auto& x : sample_points) {
        Matrix<double> nabla = covariant_derivative(model, x);
        Matrix<double> a = model.metric(x);
        Matrix<double> ainv = inverse(a);
        double trace = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) trace += ainv(i, j) * nabla(i, j);
        const double c_hat = trace / n;
        rep.c_values.push_back(c_hat);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                rep.max_residual = std::max(rep.max_residual, std::abs(nabla(i, j) - c_hat * a(i, j)));
    }
    rep.holds = rep.max_residual <= tol;
    return rep;
}

/// G_alpha^i = 1/2 Gamma^i_jk y^j y^k
inline std::vector<double> alpha_spray(const ManifoldModel& model, std::span<const double> x,
                                       std::span<const double> y) {
    const int n = model.dimension();
    double ynorm = 0.0;
    for (double v : y) ynorm += v * v;
    if (ynorm == 0.0) throw DomainError("alpha_spray: y must be nonzero");
    auto gamma = christoffel(model, x);
    std::vector<double> g(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) g[static_cast<size_t>(i)] += 0.5 * gamma(i, j, k) * y[j] * y[k];
    return g;
}

} // namespace finsler
