#pragma once

// Direct numerical integration of the density generators. These routines do
// not use any of the closed forms in lsdist.hpp and serve as the independent
// check on normalizing constants, CDFs and QLS densities.

#include "qlsacd/lsdist.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

namespace qlsacd::quadrature {

// int_a^inf f(t) dt for a decaying integrand.
template <class F>
double integrate_tail(F f, double a, double tol = 1e-13) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate([&](double y) { return f(a + y); }, 0.0,
                                std::numeric_limits<double>::infinity(), tol);
}

template <class F>
double integrate_interval(F f, double a, double b, double tol = 1e-13) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol);
}

// 1 / int_{-inf}^{inf} g(z^2) dz.
inline double normalizing_constant(const GeneratorSpec& gen) {
    gen.validate();
    auto f = [&](double z) { return kernel::g(gen, z * z); };
    const double half = integrate_interval(f, 0.0, 1.0) + integrate_tail(f, 1.0);
    return 1.0 / (2.0 * half);
}

// delta * int_{-inf}^{w} g(z^2) dz, with delta itself from quadrature.
inline double standard_cdf(const GeneratorSpec& gen, double w) {
    const double delta = quadrature::normalizing_constant(gen);
    auto f = [&](double z) { return kernel::g(gen, z * z); };
    const double a = std::fabs(w);
    const double tail = delta * (a <= 1.0 ? integrate_interval(f, a, 1.0) + integrate_tail(f, 1.0)
                                          : integrate_tail(f, a));
    return w >= 0.0 ? 1.0 - tail : tail;
}

// int_0^inf pdf(x) dx, integrated in log-x so both tails are resolved.
inline double total_mass(const QlsDistribution& d) {
    const double center = std::log(d.psi_q()) - std::sqrt(d.phi()) * d.z_q();
    auto f = [&](double y) {
        const double x = std::exp(y);
        if (!(x > 0.0) || !std::isfinite(x)) return 0.0;
        // pdf(x) alone can overflow near x = 0 under heavy log tails; x * pdf(x) cannot.
        return std::exp(d.log_pdf(x) + std::log(x));
    };
    const double right = integrate_tail(f, center, 1e-12);
    const double left = integrate_tail([&](double y) { return f(2.0 * center - y); }, center, 1e-12);
    return left + right;
}

}  // namespace qlsacd::quadrature
