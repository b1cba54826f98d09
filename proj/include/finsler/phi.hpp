#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"

namespace finsler {

/// Table of partials of phi at one (b2, s). Index 1 differentiates with
/// respect to b2 and index 2 with respect to s, matching the usual convention
/// for general (alpha,beta)-metrics.
struct PhiPartials {
    std::array<double, 6> d0{}; // d0[q] = d^q phi / ds^q
    std::array<double, 5> d1{}; // d1[q] = d/db2 d^q phi / ds^q

    double phi() const { return d0[0]; }
    double phi1() const { return d1[0]; }
    double phi2() const { return d0[1]; }
    double phi12() const { return d1[1]; }
    double phi22() const { return d0[2]; }
    double phi222() const { return d0[3]; }
};

/// Admissible (b2, s) box: a working b2 interval and an s-cone expressed as
/// fractions of b, with optional absolute caps on s. The default margin keeps
/// |s| <= 0.95 b away from the s = +-b poles of the example families.
struct PhiDomain {
    double b2_min = 0.5;
    double b2_max = 1.5;
    double sigma_min = -0.95; // lower bound on s/b
    double sigma_max = 0.95;  // upper bound on s/b
    double s_abs_min = -std::numeric_limits<double>::infinity();
    double s_abs_max = std::numeric_limits<double>::infinity();

    bool contains(double b2, double s) const {
        if (!(b2 >= b2_min && b2 <= b2_max)) return false;
        const double b = std::sqrt(b2);
        const double sigma = s / b;
        return sigma >= sigma_min && sigma <= sigma_max && s >= s_abs_min && s <= s_abs_max;
    }

    /// Effective s/b bounds at a given b2 after the absolute caps.
    std::pair<double, double> sigma_range(double b2) const {
        const double b = std::sqrt(b2);
        return {std::max(sigma_min, s_abs_min / b), std::min(sigma_max, s_abs_max / b)};
    }
};

enum class Regularity { regular, almost_regular };

/// phi(b2, s) with all the partials the curvature cascade needs, evaluable on
/// jets so every oracle route can differentiate through it. Immutable; all
/// evaluations are pure.
class PhiModel {
public:
    virtual ~PhiModel() = default;

    virtual DJet eval(const DJet& b2, const DJet& s) const = 0;
    virtual DDJet eval(const DDJet& b2, const DDJet& s) const = 0;

    double value(double b2, double s) const {
        return eval(DJet::constant(b2, 0), DJet::constant(s, 0)).value();
    }

    /// Full partials table via one nested-jet evaluation: outer order-1 jet in
    /// b2, inner order-5 jet in s.
    PhiPartials partials(double b2, double s) const {
        require_admissible(b2, s);
        DDJet b2_arg(1);
        b2_arg.coefficient(0) = DJet::constant(b2, kMaxJetOrder);
        b2_arg.coefficient(1) = DJet::constant(1.0, kMaxJetOrder);
        DDJet s_arg(1);
        s_arg.coefficient(0) = DJet::variable(s, kMaxJetOrder);
        s_arg.coefficient(1) = DJet::constant(0.0, kMaxJetOrder);
        DDJet f = eval(b2_arg, s_arg);
        PhiPartials p;
        for (int q = 0; q <= 5; ++q) p.d0[static_cast<size_t>(q)] = f.coefficient(0).coefficient(q);
        for (int q = 0; q <= 4; ++q) p.d1[static_cast<size_t>(q)] = f.coefficient(1).coefficient(q);
        return p;
    }

    const PhiDomain& domain() const { return domain_; }
    Regularity regularity() const { return regularity_; }
    const std::string& name() const { return name_; }

    void require_admissible(double b2, double s) const {
        if (b2 < domain_.b2_min || b2 > domain_.b2_max)
            throw DomainError(name_ + ": b2 = " + std::to_string(b2) +
                              " outside working interval [" + std::to_string(domain_.b2_min) +
                              ", " + std::to_string(domain_.b2_max) + "]");
        if (!domain_.contains(b2, s))
            throw DomainError(name_ + ": s = " + std::to_string(s) +
                              " outside admissible cone at b2 = " + std::to_string(b2));
    }

protected:
    PhiModel(std::string name, PhiDomain domain, Regularity reg)
        : name_(std::move(name)), domain_(domain), regularity_(reg) {}

private:
    std::string name_;
    PhiDomain domain_;
    Regularity regularity_;
};

/// Adapter for closed-form phi given as a scalar-generic callable.
template <typename F>
class CallablePhiModel final : public PhiModel {
public:
    CallablePhiModel(std::string name, PhiDomain domain, Regularity reg, F f)
        : PhiModel(std::move(name), domain, reg), f_(std::move(f)) {}

    DJet eval(const DJet& b2, const DJet& s) const override { return f_(b2, s); }
    DDJet eval(const DDJet& b2, const DDJet& s) const override { return f_(b2, s); }

private:
    F f_;
};

template <typename F>
std::unique_ptr<PhiModel> make_callable_phi(std::string name, PhiDomain domain, Regularity reg, F f) {
    return std::make_unique<CallablePhiModel<F>>(std::move(name), domain, reg, std::move(f));
}

/// phi == 1: the Riemannian case F = alpha.
inline std::unique_ptr<PhiModel> make_riemannian() {
    PhiDomain dom;
    dom.b2_min = 0.25;
    dom.b2_max = 2.0;
    dom.sigma_min = -0.9;
    dom.sigma_max = 0.9;
    return make_callable_phi("riemannian", dom, Regularity::regular,
                             [](const auto& b2, const auto& s) {
                                 (void)b2;
                                 return zero_like(s) + 1.0;
                             });
}

/// Randers: phi = 1 + s. The s-cone is capped so 1 + s stays positive on the
/// working b2 interval.
inline std::unique_ptr<PhiModel> make_randers() {
    PhiDomain dom;
    dom.b2_min = 0.5;
    dom.b2_max = 1.5;
    dom.sigma_min = -0.7;
    dom.sigma_max = 0.7;
    dom.s_abs_min = -0.9;
    return make_callable_phi("randers", dom, Regularity::regular,
                             [](const auto& b2, const auto& s) {
                                 (void)b2;
                                 return 1.0 + s;
                             });
}

/// Section-4 Example 1:
///   phi = (s^2 (xi e^{b^4/2} - 1) + b^2) e^{b^4/4} s / (b^2 (b^2 - s^2)).
/// Odd in s and vanishing at s = 0, so admissible only on a beta-dominated
/// positive cone: almost regular.
inline std::unique_ptr<PhiModel> make_example1(double xi = 1.0) {
    PhiDomain dom;
    dom.b2_min = 0.5;
    dom.b2_max = 1.5;
    dom.sigma_min = 0.30;
    dom.sigma_max = 0.70;
    return make_callable_phi(
        "example1", dom, Regularity::almost_regular,
        [xi](const auto& b2, const auto& s) {
            auto b4half = b2 * b2 / 2.0;
            auto num = (s * s * (xi * exp(b4half) - 1.0) + b2) * exp(b4half / 2.0) * s;
            return num / (b2 * (b2 - s * s));
        });
}

/// Section-4 Example 2:
///   phi = mu (b^2 - s^2) e^X s / ((s^2 b^2 xi e^Y + b^2 - s^2) b^2),
///   X = eps (xi b^2 - ln(xi b^2 + 1)) / (2 xi^2),
///   Y = (b^2 eps xi - xi^2 ln b^2 - eps ln(xi b^2 + 1)) / xi^2.
inline std::unique_ptr<PhiModel> make_example2(double mu = 1.0, double xi = 1.0, double eps = 1.0) {
    PhiDomain dom;
    dom.b2_min = 0.5;
    dom.b2_max = 1.5;
    dom.sigma_min = 0.30;
    dom.sigma_max = 0.70;
    return make_callable_phi(
        "example2", dom, Regularity::almost_regular,
        [mu, xi, eps](const auto& b2, const auto& s) {
            auto lx = log(xi * b2 + 1.0);
            auto X = eps * (xi * b2 - lx) / (2.0 * xi * xi);
            auto Y = (b2 * (eps * xi) - (xi * xi) * log(b2) - eps * lx) / (xi * xi);
            auto num = mu * (b2 - s * s) * exp(X) * s;
            auto den = (s * s * b2 * xi * exp(Y) + b2 - s * s) * b2;
            return num / den;
        });
}

/// The derived scalars of the spray/curvature cascade at one (b2, s).
struct ScalarPack {
    double b2 = 0.0, s = 0.0;
    PhiPartials P;
    double rho = 0.0, rho0 = 0.0, rho1 = 0.0;
    double eta = 0.0, eta0 = 0.0, eta1 = 0.0;
    double Q = 0.0, R = 0.0, Theta = 0.0, Psi = 0.0, Pi = 0.0, Omega = 0.0;
    double E = 0.0, E2 = 0.0, E22 = 0.0, E222 = 0.0;
    double H = 0.0, H2 = 0.0, H22 = 0.0, H222 = 0.0;

    bool convexity_first() const {
        return P.phi() - s * P.phi2() > 0.0;
    }
    bool convexity_second() const {
        return P.phi() - s * P.phi2() + (b2 - s * s) * P.phi22() > 0.0;
    }
};

namespace detail {
inline void check_denominator(double v, const char* label) {
    if (std::abs(v) < 1e-12)
        throw SingularScalarError(std::string("scalar_pack: denominator '") + label +
                                  "' vanished (" + std::to_string(v) + ")");
}
} // namespace detail

/// Builds the full scalar pack. The E/H s-derivative families run the E/H
/// formulas in order-3 jet arithmetic over s, consuming phi partials up to
/// d^5/ds^5 and d/db2 d^4/ds^4; hand-expanding those derivatives would invite
/// transcription errors.
inline ScalarPack scalar_pack(const PhiModel& model, double b2, double s) {
    ScalarPack pk;
    pk.b2 = b2;
    pk.s = s;
    pk.P = model.partials(b2, s);
    const PhiPartials& P = pk.P;

    const double phi = P.phi(), phi1 = P.phi1(), phi2 = P.phi2();
    const double phi12 = P.phi12(), phi22 = P.phi22();
    const double d1 = phi - s * phi2;
    const double d2 = d1 + (b2 - s * s) * phi22;
    detail::check_denominator(phi, "phi");
    detail::check_denominator(d1, "phi - s*phi2");
    detail::check_denominator(d2, "phi - s*phi2 + (b2 - s^2)*phi22");

    pk.rho = phi * d1;
    pk.rho0 = phi * phi22 + phi2 * phi2;
    pk.rho1 = d1 * phi2 - s * phi * phi22;
    pk.eta = -phi22 / d2;
    pk.eta0 = -(d1 * phi2 - s * phi * phi22) / (phi * d2);
    pk.eta1 = (s * phi + (b2 - s * s) * phi2) * (d1 * phi2 - s * phi * phi22) / (phi * phi * d2);
    pk.Q = phi2 / d1;
    pk.R = phi1 / d1;
    pk.Theta = (d1 * phi2 - s * phi * phi22) / (2.0 * phi * d2);
    pk.Psi = phi22 / (2.0 * d2);
    pk.Pi = (d1 * phi12 - s * phi1 * phi22) / (d1 * d2);
    pk.Omega = 2.0 * phi1 / phi - (s * phi + (b2 - s * s) * phi2) / phi * pk.Pi;

    // order-3 s-jets of phi, phi1, phi2, phi12, phi22 sliced from the table
    auto slice0 = [&P](int from) {
        DJet j(3);
        for (int q = 0; q <= 3; ++q) j.coefficient(q) = P.d0[static_cast<size_t>(from + q)];
        return j;
    };
    auto slice1 = [&P](int from) {
        DJet j(3);
        for (int q = 0; q <= 3; ++q) j.coefficient(q) = P.d1[static_cast<size_t>(from + q)];
        return j;
    };
    DJet jphi = slice0(0), jphi2 = slice0(1), jphi22 = slice0(2);
    DJet jphi1 = slice1(0), jphi12 = slice1(1);
    DJet js = DJet::variable(s, 3);
    DJet jb2 = DJet::constant(b2, 3);

    DJet jden = jphi - js * jphi2 + (jb2 - js * js) * jphi22;
    DJet jH = (jphi22 - 2.0 * (jphi1 - js * jphi12)) / (2.0 * jden);
    DJet jE = (jphi2 + 2.0 * js * jphi1) / (2.0 * jphi) -
              jH * (js * jphi + (jb2 - js * js) * jphi2) / jphi;

    pk.E = jE.coefficient(0);
    pk.E2 = jE.coefficient(1);
    pk.E22 = jE.coefficient(2);
    pk.E222 = jE.coefficient(3);
    pk.H = jH.coefficient(0);
    pk.H2 = jH.coefficient(1);
    pk.H22 = jH.coefficient(2);
    pk.H222 = jH.coefficient(3);
    return pk;
}

} // namespace finsler
