#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler {

// Truncated Taylor (jet) arithmetic. A Jet stores the raw derivatives
// f(t0), f'(t0), ..., f^(k)(t0) of a scalar along one parameter -- raw
// derivatives, not factorial-scaled Taylor coefficients. Downstream formulas
// consume derivatives directly, so no factorial bookkeeping happens at call
// sites. Maximum order is 5: the deepest consumer is the fifth s-derivative
// of phi inside the H-cascade.

inline constexpr int kMaxJetOrder = 5;

/// Machine floor distinguishing a true pole from underflow in jet division.
inline constexpr double kJetDivisionFloor = 1e-300;

namespace detail {

// binomial(k, i) for k, i <= kMaxJetOrder
inline constexpr std::array<std::array<double, kMaxJetOrder + 1>, kMaxJetOrder + 1> kBinomial = [] {
    std::array<std::array<double, kMaxJetOrder + 1>, kMaxJetOrder + 1> c{};
    for (int k = 0; k <= kMaxJetOrder; ++k) {
        c[k][0] = 1.0;
        for (int i = 1; i <= k; ++i)
            c[k][i] = c[k - 1][i - 1] + (i <= k - 1 ? c[k - 1][i] : 0.0);
    }
    return c;
}();

inline constexpr std::array<double, kMaxJetOrder + 1> kFactorial = [] {
    std::array<double, kMaxJetOrder + 1> f{};
    f[0] = 1.0;
    for (int k = 1; k <= kMaxJetOrder; ++k) f[k] = f[k - 1] * k;
    return f;
}();

} // namespace detail

template <typename T> class Jet;

template <typename T> struct is_jet : std::false_type {};
template <typename T> struct is_jet<Jet<T>> : std::true_type {};

/// Leading (order-zero) value of a possibly nested jet.
inline double value_of(double x) { return x; }
template <typename T> double value_of(const Jet<T>& x) { return value_of(x.coefficient(0)); }

/// Zero of the same nested shape as `model`.
inline double zero_like(double) { return 0.0; }
template <typename T> Jet<T> zero_like(const Jet<T>& model);

/// Carries `v` into the nested shape of `model` as a constant.
inline double lift_like(double, double v) { return v; }
template <typename T> Jet<T> lift_like(const Jet<T>& model, double v);

template <typename T>
class Jet {
public:
    using Scalar = T;

    Jet() : order_(0) { c_[0] = T{}; }

    explicit Jet(int order) : order_(checked_order(order)) {
        for (int i = 0; i <= order_; ++i) c_[i] = T{};
    }

    /// Jet of the constant function with the given value.
    static Jet constant(const T& value, int order) {
        Jet j(order);
        j.c_[0] = value;
        for (int i = 1; i <= j.order_; ++i) c_zero(j.c_[i], value);
        return j;
    }

    /// Jet of the identity seed: value `value`, unit first derivative.
    static Jet variable(const T& value, int order) {
        Jet j = constant(value, order);
        if (j.order_ >= 1) j.c_[1] = lift_like(value, 1.0);
        return j;
    }

    int order() const { return order_; }
    const T& coefficient(int k) const { return c_[k]; }
    T& coefficient(int k) { return c_[k]; }
    const T& value() const { return c_[0]; }

    /// Jet of the derivative: one order lower, coefficients shifted.
    Jet derivative_jet() const {
        if (order_ == 0) return Jet::constant(zero_like(c_[0]), 0);
        Jet j(order_ - 1);
        for (int i = 0; i < order_; ++i) j.c_[i] = c_[i + 1];
        return j;
    }

    Jet truncated(int order) const {
        Jet j(order <= order_ ? order : order_);
        for (int i = 0; i <= j.order_; ++i) j.c_[i] = c_[i];
        return j;
    }

    friend Jet operator-(const Jet& a) {
        Jet r(a.order_);
        for (int i = 0; i <= a.order_; ++i) r.c_[i] = -a.c_[i];
        return r;
    }

    friend Jet operator+(const Jet& a, const Jet& b) {
        check_orders(a, b, "+");
        Jet r(a.order_);
        for (int i = 0; i <= a.order_; ++i) r.c_[i] = a.c_[i] + b.c_[i];
        return r;
    }

    friend Jet operator-(const Jet& a, const Jet& b) {
        check_orders(a, b, "-");
        Jet r(a.order_);
        for (int i = 0; i <= a.order_; ++i) r.c_[i] = a.c_[i] - b.c_[i];
        return r;
    }

    // Leibniz: (fg)^(k) = sum_i C(k,i) f^(i) g^(k-i)
    friend Jet operator*(const Jet& a, const Jet& b) {
        check_orders(a, b, "*");
        Jet r(a.order_);
        for (int k = 0; k <= a.order_; ++k) {
            T acc = a.c_[0] * b.c_[k];
            for (int i = 1; i <= k; ++i)
                acc = acc + detail::kBinomial[k][i] * (a.c_[i] * b.c_[k - i]);
            r.c_[k] = acc;
        }
        return r;
    }

    // Quotient h = f/g from f = h g:
    //   h^(k) = (f^(k) - sum_{i>=1} C(k,i) g^(i) h^(k-i)) / g^(0)
    friend Jet operator/(const Jet& a, const Jet& b) {
        check_orders(a, b, "/");
        if (std::abs(value_of(b.c_[0])) < kJetDivisionFloor)
            throw SingularJetError("jet division: value coefficient below machine floor (" +
                                   std::to_string(value_of(b.c_[0])) + ")");
        Jet r(a.order_);
        for (int k = 0; k <= a.order_; ++k) {
            T acc = a.c_[k];
            for (int i = 1; i <= k; ++i)
                acc = acc - detail::kBinomial[k][i] * (b.c_[i] * r.c_[k - i]);
            r.c_[k] = acc / b.c_[0];
        }
        return r;
    }

    // double mixes in as a constant of matching nested shape
    friend Jet operator+(const Jet& a, double v) { return a + constant_like(a, v); }
    friend Jet operator+(double v, const Jet& a) { return constant_like(a, v) + a; }
    friend Jet operator-(const Jet& a, double v) { return a - constant_like(a, v); }
    friend Jet operator-(double v, const Jet& a) { return constant_like(a, v) - a; }
    friend Jet operator*(const Jet& a, double v) {
        Jet r(a.order_);
        for (int i = 0; i <= a.order_; ++i) r.c_[i] = v * a.c_[i];
        return r;
    }
    friend Jet operator*(double v, const Jet& a) { return a * v; }
    friend Jet operator/(const Jet& a, double v) { return a / constant_like(a, v); }
    friend Jet operator/(double v, const Jet& a) { return constant_like(a, v) / a; }

    // E' = f' E  =>  E^(k) = sum_i C(k-1,i) f^(i+1) E^(k-1-i)
    friend Jet exp(const Jet& a) {
        Jet r(a.order_);
        using std::exp;
        r.c_[0] = exp(a.c_[0]);
        for (int k = 1; k <= a.order_; ++k) {
            T acc = a.c_[1] * r.c_[k - 1];
            for (int i = 1; i <= k - 1; ++i)
                acc = acc + detail::kBinomial[k - 1][i] * (a.c_[i + 1] * r.c_[k - 1 - i]);
            r.c_[k] = acc;
        }
        return r;
    }

    // L = log f: L' = f'/f, integrated back termwise
    friend Jet log(const Jet& a) {
        if (value_of(a.c_[0]) <= 0.0)
            throw DomainError("jet log: non-positive value coefficient (" +
                              std::to_string(value_of(a.c_[0])) + ")");
        Jet r(a.order_);
        using std::log;
        r.c_[0] = log(a.c_[0]);
        if (a.order_ >= 1) {
            Jet dl = a.derivative_jet() / a.truncated(a.order_ - 1);
            for (int k = 1; k <= a.order_; ++k) r.c_[k] = dl.c_[k - 1];
        }
        return r;
    }

    // S = sqrt f from S*S = f: 2 S^(0) S^(k) = f^(k) - sum_{0<i<k} C(k,i) S^(i) S^(k-i)
    friend Jet sqrt(const Jet& a) {
        if (value_of(a.c_[0]) <= 0.0)
            throw DomainError("jet sqrt: non-positive value coefficient (" +
                              std::to_string(value_of(a.c_[0])) + ")");
        Jet r(a.order_);
        using std::sqrt;
        r.c_[0] = sqrt(a.c_[0]);
        T two_s0 = 2.0 * r.c_[0];
        for (int k = 1; k <= a.order_; ++k) {
            T acc = a.c_[k];
            for (int i = 1; i <= k - 1; ++i)
                acc = acc - detail::kBinomial[k][i] * (r.c_[i] * r.c_[k - i]);
            r.c_[k] = acc / two_s0;
        }
        return r;
    }

    // P = f^r from f P' = r f' P:
    //   P^(k+1) = (r sum_i C(k,i) f^(i+1) P^(k-i) - sum_{i>=1} C(k,i) f^(i) P^(k-i+1)) / f^(0)
    friend Jet pow(const Jet& a, double r_exp) {
        if (value_of(a.c_[0]) <= 0.0)
            throw DomainError("jet pow: non-positive base value coefficient (" +
                              std::to_string(value_of(a.c_[0])) + ")");
        Jet r(a.order_);
        using std::pow;
        r.c_[0] = pow(a.c_[0], r_exp);
        for (int k = 0; k < a.order_; ++k) {
            T acc = r_exp * (a.c_[1] * r.c_[k]);
            for (int i = 1; i <= k; ++i)
                acc = acc + detail::kBinomial[k][i] *
                                (r_exp * (a.c_[i + 1] * r.c_[k - i]) - a.c_[i] * r.c_[k - i + 1]);
            r.c_[k + 1] = acc / a.c_[0];
        }
        return r;
    }

    static Jet constant_like(const Jet& model, double v) {
        Jet j(model.order_);
        j.c_[0] = lift_like(model.c_[0], v);
        for (int i = 1; i <= model.order_; ++i) j.c_[i] = zero_like(model.c_[0]);
        return j;
    }

private:
    static int checked_order(int order) {
        if (order < 0 || order > kMaxJetOrder)
            throw DomainError("jet order out of range: " + std::to_string(order));
        return order;
    }

    static void check_orders(const Jet& a, const Jet& b, const char* op) {
        if (a.order_ != b.order_)
            throw DomainError(std::string("jet arithmetic '") + op + "' on mismatched orders " +
                              std::to_string(a.order_) + " vs " + std::to_string(b.order_));
    }

    static void c_zero(T& dst, const T& model) { dst = zero_like(model); }

    std::array<T, kMaxJetOrder + 1> c_;
    int order_;
};

template <typename T> Jet<T> zero_like(const Jet<T>& model) {
    return Jet<T>::constant(zero_like(model.coefficient(0)), model.order());
}

template <typename T> Jet<T> lift_like(const Jet<T>& model, double v) {
    return Jet<T>::constant(lift_like(model.coefficient(0), v), model.order());
}

using DJet = Jet<double>;
using DDJet = Jet<Jet<double>>;

/// Composition f(g(t)) from the raw s-derivatives of f at g(0) (in `outer`)
/// and the jet of g(t) (in `inner`). Exact for jets: the shifted inner jet has
/// zero value coefficient, so the truncated Taylor polynomial is the full
/// composition up to the working order.
template <typename T>
Jet<T> compose(const Jet<T>& outer, const Jet<T>& inner) {
    if (outer.order() < inner.order())
        throw DomainError("jet compose: outer derivatives of insufficient order");
    Jet<T> delta = inner - Jet<T>::constant(inner.value(), inner.order());
    const int m = inner.order();
    Jet<T> acc = Jet<T>::constant(outer.coefficient(m), inner.order()) / detail::kFactorial[m];
    for (int q = m - 1; q >= 0; --q)
        acc = acc * delta + Jet<T>::constant(outer.coefficient(q), inner.order()) / detail::kFactorial[q];
    return acc;
}

/// A scalar field of m real inputs, evaluable on jets.
using JetField = std::function<DJet(std::span<const DJet>)>;

/// d^k/dt^k f(point + t*direction) at t = 0, for k = 0..order.
inline std::vector<double> directional_derivatives(const JetField& f,
                                                   std::span<const double> point,
                                                   std::span<const double> direction,
                                                   int order) {
    std::vector<DJet> args;
    args.reserve(point.size());
    for (size_t i = 0; i < point.size(); ++i) {
        DJet a = DJet::constant(point[i], order);
        if (order >= 1) a.coefficient(1) = direction[i];
        args.push_back(a);
    }
    DJet r = f(args);
    std::vector<double> out(static_cast<size_t>(order) + 1);
    for (int k = 0; k <= order; ++k) out[static_cast<size_t>(k)] = r.coefficient(k);
    return out;
}

/// Mixed partial D_{v1}...D_{vk} f recovered by polarization:
///   D_{v1..vk} f = (1/k!) sum_{S != empty} (-1)^{k-|S|} d^k/dt^k f(x + t sum_{i in S} v_i).
/// The identity is algebraic, so the only error is floating-point cancellation.
inline double mixed_partial(const JetField& f,
                            std::span<const double> point,
                            std::span<const std::vector<double>> dirs) {
    const int k = static_cast<int>(dirs.size());
    if (k < 1 || k > 4) throw DomainError("mixed_partial: need 1..4 directions");
    const size_t m = point.size();
    double total = 0.0;
    std::vector<double> combo(m);
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
        std::fill(combo.begin(), combo.end(), 0.0);
        int bits = 0;
        for (int i = 0; i < k; ++i) {
            if (mask & (1u << i)) {
                ++bits;
                for (size_t j = 0; j < m; ++j) combo[j] += dirs[static_cast<size_t>(i)][j];
            }
        }
        const double sign = ((k - bits) % 2 == 0) ? 1.0 : -1.0;
        total += sign * directional_derivatives(f, point, combo, k)[static_cast<size_t>(k)];
    }
    return total / detail::kFactorial[k];
}

} // namespace finsler
