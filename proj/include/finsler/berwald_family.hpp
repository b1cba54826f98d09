#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"
#include "finsler/phi.hpp"
#include "finsler/quadrature.hpp"

namespace finsler {

// Constructive Berwald family
//
//   phi(b2, s) = varphi( s^2 / (A + s^2 B) ) * C * s
//   A = exp( int_ref^{b2} (1/u - u theta) du )
//   B = int_ref^{b2} theta A du  -  1/ref
//   C = exp( int_ref^{b2} (u theta / 2 - 1/u) du )
//
// The three antiderivatives are defined only up to constants; the -1/ref term
// pins B so that B == -A/b2 identically (both sides solve B' = theta A with the
// same value at ref). With that convention the family reproduces the section-4
// closed forms up to a constant rescaling of varphi's argument.
//
// b2-derivatives never differentiate the quadrature itself: A' = (1/b2 - b2
// theta) A, B' = theta A, C' = (b2 theta/2 - 1/b2) C are exact, and jets along
// any parameter follow by the chain rule from those ODEs.

struct BerwaldFamilyOptions {
    double quad_tol = 1e-10;
    double b2_ref = 0.25;
    PhiDomain domain{0.5, 1.5, 0.40, 0.80};
};

/// varphi(t) = 1 + xi t
struct AffineGenerator {
    double xi = 1.0;
    template <typename T> T operator()(const T& t) const { return 1.0 + xi * t; }
};

/// varphi(t) = mu / (1 + xi t)
struct ReciprocalGenerator {
    double mu = 1.0;
    double xi = 1.0;
    template <typename T> T operator()(const T& t) const { return mu / (1.0 + xi * t); }
};

/// theta(b2) = value
struct ConstantTheta {
    double value = 1.0;
    template <typename T> T operator()(const T& u) const { return zero_like(u) + value; }
};

/// theta(b2) = eps / (1 + xi b2)
struct RationalTheta {
    double eps = 1.0;
    double xi = 1.0;
    template <typename T> T operator()(const T& u) const { return eps / (1.0 + xi * u); }
};

namespace detail {

/// Jet of an antiderivative S along a jet-valued argument: the value comes
/// from `base` (a quadrature) and the derivatives from dS/dt = g(u(t)) u'(t).
template <typename Integrand, typename Base>
double antiderivative_along(double u, const Integrand&, const Base& base) {
    return base(u);
}

template <typename T, typename Integrand, typename Base>
Jet<T> antiderivative_along(const Jet<T>& u, const Integrand& g, const Base& base) {
    Jet<T> s(u.order());
    s.coefficient(0) = antiderivative_along(u.coefficient(0), g, base);
    if (u.order() >= 1) {
        Jet<T> rate = g(u.truncated(u.order() - 1)) * u.derivative_jet();
        for (int k = 1; k <= u.order(); ++k) s.coefficient(k) = rate.coefficient(k - 1);
    }
    return s;
}

} // namespace detail

template <typename Varphi, typename Theta>
class BerwaldFamilyModel final : public PhiModel {
public:
    BerwaldFamilyModel(std::string name, Varphi varphi, Theta theta, BerwaldFamilyOptions opt)
        : PhiModel(std::move(name), opt.domain, Regularity::almost_regular),
          varphi_(std::move(varphi)), theta_(std::move(theta)), opt_(opt) {}

    DJet eval(const DJet& b2, const DJet& s) const override { return eval_impl(b2, s); }
    DDJet eval(const DDJet& b2, const DDJet& s) const override { return eval_impl(b2, s); }

    /// A, B, C and their quadrature bases, exposed for the dual-route tests.
    double A_value(double u) const { return std::exp(base_sa(u)); }
    double B_value(double u) const { return base_b(u); }
    double C_value(double u) const { return std::exp(base_sc(u)); }

private:
    template <typename T>
    T eval_impl(const T& b2, const T& s) const {
        if (value_of(b2) <= 0.05)
            throw DomainError(name() + ": b2 must stay bounded away from 0");
        auto psi_a = [this](const auto& u) { return 1.0 / u - u * theta_(u); };
        auto psi_c = [this](const auto& u) { return u * theta_(u) / 2.0 - 1.0 / u; };
        T A = exp(detail::antiderivative_along(b2, psi_a, [this](double u) { return base_sa(u); }));
        T C = exp(detail::antiderivative_along(b2, psi_c, [this](double u) { return base_sc(u); }));
        auto psi_b = [this](const auto& u) {
            auto sa = detail::antiderivative_along(u, [this](const auto& v) { return 1.0 / v - v * theta_(v); },
                                                   [this](double v) { return base_sa(v); });
            return theta_(u) * exp(sa);
        };
        T B = detail::antiderivative_along(b2, psi_b, [this](double u) { return base_b(u); });
        T t = s * s / (A + s * s * B);
        T v = varphi_(t);
        if (value_of(v) <= 0.0)
            throw DomainError(name() + ": varphi non-positive (" + std::to_string(value_of(v)) +
                              ") at t = " + std::to_string(value_of(t)));
        return v * C * s;
    }

    double base_sa(double u) const {
        return memoized(sa_cache_, u, [this](double v) {
            return adaptive_simpson([this](double w) { return 1.0 / w - w * theta_(w); },
                                    opt_.b2_ref, v, opt_.quad_tol);
        });
    }
    double base_sc(double u) const {
        return memoized(sc_cache_, u, [this](double v) {
            return adaptive_simpson([this](double w) { return w * theta_(w) / 2.0 - 1.0 / w; },
                                    opt_.b2_ref, v, opt_.quad_tol);
        });
    }
    double base_b(double u) const {
        return memoized(b_cache_, u, [this](double v) {
            return adaptive_simpson([this](double w) { return theta_(w) * std::exp(base_sa(w)); },
                                    opt_.b2_ref, v, opt_.quad_tol) -
                   1.0 / opt_.b2_ref;
        });
    }

    template <typename F>
    double memoized(std::map<double, double>& cache, double u, const F& f) const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache.find(u);
            if (it != cache.end()) return it->second;
        }
        const double v = f(u);
        std::lock_guard<std::mutex> lock(mutex_);
        cache.emplace(u, v);
        return v;
    }

    Varphi varphi_;
    Theta theta_;
    BerwaldFamilyOptions opt_;
    mutable std::mutex mutex_;
    mutable std::map<double, double> sa_cache_, sc_cache_, b_cache_;
};

template <typename Varphi, typename Theta>
std::unique_ptr<PhiModel> make_berwald_family(std::string name, Varphi varphi, Theta theta,
                                              BerwaldFamilyOptions opt = {}) {
    return std::make_unique<BerwaldFamilyModel<Varphi, Theta>>(std::move(name), std::move(varphi),
                                                               std::move(theta), opt);
}

enum class GeneratorKind { affine, reciprocal };
enum class ThetaKind { constant, rational };

/// Parameter block for the construct pipeline and CLI.
struct BerwaldFamilySpec {
    GeneratorKind generator = GeneratorKind::affine;
    double xi = 1.0; // generator slope (affine) or pole (reciprocal)
    double mu = 1.0; // reciprocal numerator
    ThetaKind theta = ThetaKind::constant;
    double theta_value = 1.0;
    double eps = 1.0;      // rational theta numerator
    double theta_xi = 1.0; // rational theta pole
    BerwaldFamilyOptions options;
};

inline std::unique_ptr<PhiModel> make_berwald_model(const BerwaldFamilySpec& spec,
                                                    std::string name = "berwald-family") {
    if (spec.generator == GeneratorKind::affine && spec.theta == ThetaKind::constant)
        return make_berwald_family(std::move(name), AffineGenerator{spec.xi},
                                   ConstantTheta{spec.theta_value}, spec.options);
    if (spec.generator == GeneratorKind::affine && spec.theta == ThetaKind::rational)
        return make_berwald_family(std::move(name), AffineGenerator{spec.xi},
                                   RationalTheta{spec.eps, spec.theta_xi}, spec.options);
    if (spec.generator == GeneratorKind::reciprocal && spec.theta == ThetaKind::constant)
        return make_berwald_family(std::move(name), ReciprocalGenerator{spec.mu, spec.xi},
                                   ConstantTheta{spec.theta_value}, spec.options);
    return make_berwald_family(std::move(name), ReciprocalGenerator{spec.mu, spec.xi},
                               RationalTheta{spec.eps, spec.theta_xi}, spec.options);
}

} // namespace finsler
