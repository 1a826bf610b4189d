#pragma once

// Quantile-parameterized log-symmetric (QLS) distributions.
//
// A positive random variable X is QLS(Psi_q, phi, g) when
//     Z = (log X - log Psi_q) / sqrt(phi) + z_q
// has the symmetric density delta_nc * g(z^2), where z_q = G^{-1}(q) is the
// q-quantile of that standardized law. Psi_q is then exactly the q-quantile of X.

#include "qlsacd/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qlsacd {

enum class Family {
    LogNormal,
    LogStudentT,
    LogPowerExponential,
    LogHyperbolic,
    LogSlash,
    LogContaminatedNormal,
    ExtendedBS,
    ExtendedBSt,
};

inline constexpr std::array<Family, 8> kAllFamilies = {
    Family::LogNormal,     Family::LogStudentT,           Family::LogPowerExponential,
    Family::LogHyperbolic, Family::LogSlash,              Family::LogContaminatedNormal,
    Family::ExtendedBS,    Family::ExtendedBSt,
};

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::LogNormal: return "log-normal";
        case Family::LogStudentT: return "log-student-t";
        case Family::LogPowerExponential: return "log-power-exponential";
        case Family::LogHyperbolic: return "log-hyperbolic";
        case Family::LogSlash: return "log-slash";
        case Family::LogContaminatedNormal: return "log-contaminated-normal";
        case Family::ExtendedBS: return "ebs";
        case Family::ExtendedBSt: return "ebs-t";
    }
    return "unknown";
}

inline std::string family_names_list() {
    std::string out;
    for (Family f : kAllFamilies) {
        if (!out.empty()) out += ", ";
        out += family_name(f);
    }
    return out;
}

inline Family parse_family(std::string_view name) {
    for (Family f : kAllFamilies)
        if (family_name(f) == name) return f;
    throw InputError("unknown family '" + std::string(name) + "'; valid names: " + family_names_list());
}

// Number of extra shape parameters carried by each generator.
inline std::size_t extra_count(Family f) {
    switch (f) {
        case Family::LogNormal: return 0;
        case Family::LogContaminatedNormal:
        case Family::ExtendedBSt: return 2;
        default: return 1;
    }
}

// A representative in-domain shape for each family; not an estimate.
inline std::vector<double> default_extra(Family f) {
    switch (f) {
        case Family::LogNormal: return {};
        case Family::LogStudentT: return {5.0};
        case Family::LogPowerExponential: return {0.3};
        case Family::LogHyperbolic: return {2.0};
        case Family::LogSlash: return {4.0};
        case Family::LogContaminatedNormal: return {0.3, 0.5};
        case Family::ExtendedBS: return {0.5};
        case Family::ExtendedBSt: return {0.5, 5.0};
    }
    return {};
}

struct GeneratorSpec {
    Family family = Family::LogNormal;
    std::vector<double> extra;

    bool operator==(const GeneratorSpec&) const = default;

    double theta(std::size_t i = 0) const { return extra.at(i); }

    void validate() const {
        const std::string name(family_name(family));
        if (extra.size() != extra_count(family)) {
            throw DomainError(name + " expects " + std::to_string(extra_count(family)) +
                              " extra parameter(s), got " + std::to_string(extra.size()));
        }
        auto bad = [&](const char* which, double v) {
            std::ostringstream os;
            os << name << ": extra parameter " << which << "=" << v << " outside its domain";
            throw DomainError(os.str());
        };
        for (double v : extra)
            if (!std::isfinite(v)) bad("theta", v);
        switch (family) {
            case Family::LogNormal: break;
            case Family::LogStudentT:
            case Family::LogHyperbolic:
            case Family::LogSlash:
            case Family::ExtendedBS:
                if (!(extra[0] > 0.0)) bad("theta", extra[0]);
                break;
            case Family::LogPowerExponential:
                if (!(extra[0] > -1.0 && extra[0] <= 1.0)) bad("theta", extra[0]);
                break;
            case Family::LogContaminatedNormal:
                if (!(extra[0] > 0.0 && extra[0] < 1.0)) bad("theta1", extra[0]);
                if (!(extra[1] > 0.0 && extra[1] < 1.0)) bad("theta2", extra[1]);
                break;
            case Family::ExtendedBSt:
                if (!(extra[0] > 0.0)) bad("theta1", extra[0]);
                if (!(extra[1] > 0.0)) bad("theta2", extra[1]);
                break;
        }
    }
};

inline std::string describe(const GeneratorSpec& gen) {
    std::ostringstream os;
    os << family_name(gen.family);
    if (!gen.extra.empty()) {
        os << "(";
        for (std::size_t i = 0; i < gen.extra.size(); ++i) os << (i ? "," : "") << gen.extra[i];
        os << ")";
    }
    return os.str();
}

namespace detail {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// log(cosh(w)) without overflow.
inline double log_cosh(double w) {
    const double a = std::fabs(w);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

// log(sinh(w)) for w > 0 without overflow.
inline double log_sinh(double w) {
    if (w < 1.0) return std::log(std::sinh(w));
    return w + std::log1p(-std::exp(-2.0 * w)) - std::numbers::ln2;
}

inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -kInf) return a;
    return a + std::log1p(std::exp(b - a));
}

// Standard normal upper tail P(N > w).
inline double normal_sf(double w) { return 0.5 * boost::math::erfc(w / std::numbers::sqrt2); }

// log P(N > w), finite far beyond the erfc underflow point.
inline double log_normal_sf(double w) {
    if (w < 30.0) return std::log(normal_sf(w));
    const double w2 = w * w;
    return -0.5 * w2 - std::log(w) - kLogSqrt2Pi + std::log1p(-1.0 / w2 + 3.0 / (w2 * w2));
}

inline double normal_quantile(double p) {
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// Log-slash kernel pieces, a = theta + 1/2, x = s/2.
// M(x) - 1 where M(x) = sum_k x^k / ((a+1)(a+2)...(a+k)).
inline double slash_series_minus_one(double a, double x) {
    double term = 1.0, sum = 0.0;
    for (int k = 1; k < 500; ++k) {
        term *= x / (a + k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

}  // namespace detail

namespace kernel {

// log g(s), s >= 0.
inline double log_g(const GeneratorSpec& gen, double s) {
    switch (gen.family) {
        case Family::LogNormal: return -0.5 * s;
        case Family::LogStudentT: {
            const double nu = gen.extra[0];
            return -0.5 * (nu + 1.0) * std::log1p(s / nu);
        }
        case Family::LogPowerExponential:
            return -0.5 * std::pow(s, 1.0 / (1.0 + gen.extra[0]));
        case Family::LogHyperbolic: return -gen.extra[0] * std::sqrt(1.0 + s);
        case Family::LogSlash: {
            const double a = gen.extra[0] + 0.5;
            const double x = 0.5 * s;
            if (x < 1.0) {
                return -a * std::numbers::ln2 - x + std::log1p(detail::slash_series_minus_one(a, x)) -
                       std::log(a);
            }
            return std::log(boost::math::tgamma_lower(a, x)) - a * std::log(s);
        }
        case Family::LogContaminatedNormal: {
            const double t1 = gen.extra[0], t2 = gen.extra[1];
            return detail::log_add(std::log(t1) + 0.5 * std::log(t2) - 0.5 * t2 * s,
                                   std::log1p(-t1) - 0.5 * s);
        }
        case Family::ExtendedBS: {
            const double w = std::sqrt(s);
            const double sh = std::sinh(w);
            const double t = gen.extra[0];
            return detail::log_cosh(w) - 2.0 / (t * t) * sh * sh;
        }
        case Family::ExtendedBSt: {
            const double w = std::sqrt(s);
            const double t1 = gen.extra[0], nu = gen.extra[1];
            const double log_c = std::log(nu * t1 * t1);
            const double log_den =
                w > 0.0 ? detail::log_add(log_c, std::log(4.0) + 2.0 * detail::log_sinh(w)) : log_c;
            return detail::log_cosh(w) - 0.5 * (nu + 1.0) * log_den;
        }
    }
    return -detail::kInf;
}

inline double g(const GeneratorSpec& gen, double s) { return std::exp(log_g(gen, s)); }

// z * v(z) where v(z) = -2 g'(z^2) / g(z^2); finite for every family at z = 0.
inline double zv(const GeneratorSpec& gen, double z) {
    switch (gen.family) {
        case Family::LogNormal: return z;
        case Family::LogStudentT: {
            const double nu = gen.extra[0];
            return (nu + 1.0) * z / (nu + z * z);
        }
        case Family::LogPowerExponential: {
            if (z == 0.0) return 0.0;
            const double t = gen.extra[0];
            return z * std::pow(z * z, -t / (1.0 + t)) / (1.0 + t);
        }
        case Family::LogHyperbolic: return gen.extra[0] * z / std::sqrt(1.0 + z * z);
        case Family::LogSlash: {
            const double a = gen.extra[0] + 0.5;
            const double s = z * z;
            const double x = 0.5 * s;
            if (x < 1.0) {
                // (2a/s)(1 - 1/M) with (M-1)/s evaluated termwise.
                double term = 0.5, sum = 0.0;  // term_k / s, first term x/(a+1)/s = 1/(2(a+1))
                for (int k = 1; k < 500; ++k) {
                    term *= (k == 1 ? 1.0 : x) / (a + k);
                    sum += term;
                    if (term < 1e-17 * sum) break;
                }
                const double m = 1.0 + s * sum;
                return z * 2.0 * a * sum / m;
            }
            const double ratio =
                boost::math::gamma_p_derivative(a, x) / boost::math::gamma_p(a, x);
            return z * (2.0 * a / s - ratio);
        }
        case Family::LogContaminatedNormal: {
            const double t1 = gen.extra[0], t2 = gen.extra[1];
            const double s = z * z;
            const double la = std::log(t1) + 0.5 * std::log(t2) - 0.5 * t2 * s;
            const double lb = std::log1p(-t1) - 0.5 * s;
            const double wa = 1.0 / (1.0 + std::exp(lb - la));
            return z * (wa * t2 + (1.0 - wa));
        }
        case Family::ExtendedBS: {
            const double t = gen.extra[0];
            return 4.0 / (t * t) * std::sinh(z) * std::cosh(z) - std::tanh(z);
        }
        case Family::ExtendedBSt: {
            const double t1 = gen.extra[0], nu = gen.extra[1];
            const double c = nu * t1 * t1;
            double frac;  // 4 sinh cosh / (c + 4 sinh^2)
            if (std::fabs(z) <= 1.0) {
                const double sh = std::sinh(z);
                frac = 4.0 * sh * std::cosh(z) / (c + 4.0 * sh * sh);
            } else {
                const double sh = std::sinh(std::fabs(z));
                const double r = c / (4.0 * sh * sh);
                frac = std::copysign(1.0 / (std::tanh(std::fabs(z)) * (1.0 + r)), z);
            }
            return (nu + 1.0) * frac - std::tanh(z);
        }
    }
    return 0.0;
}

}  // namespace kernel

// Score weight v(u) = -2 g'(u^2) / g(u^2). Infinite at u = 0 for the
// power-exponential kernel with theta > 0 (non-differentiable cusp).
inline double weight_v(const GeneratorSpec& gen, double u) {
    gen.validate();
    if (!std::isfinite(kernel::log_g(gen, u * u)))
        throw DomainError("weight_v: g(u^2) = 0 at u=" + std::to_string(u) + " for " + describe(gen));
    if (u != 0.0) return kernel::zv(gen, u) / u;
    switch (gen.family) {
        case Family::LogNormal: return 1.0;
        case Family::LogStudentT: return (gen.extra[0] + 1.0) / gen.extra[0];
        case Family::LogPowerExponential:
            return gen.extra[0] > 0.0 ? detail::kInf : (gen.extra[0] == 0.0 ? 1.0 : 0.0);
        case Family::LogHyperbolic: return gen.extra[0];
        case Family::LogSlash: {
            const double a = gen.extra[0] + 0.5;
            return a / (a + 1.0);
        }
        case Family::LogContaminatedNormal: {
            const double t1 = gen.extra[0], t2 = gen.extra[1];
            const double wa = t1 * std::sqrt(t2) / (t1 * std::sqrt(t2) + 1.0 - t1);
            return wa * t2 + (1.0 - wa);
        }
        case Family::ExtendedBS: {
            const double t = gen.extra[0];
            return 4.0 / (t * t) - 1.0;
        }
        case Family::ExtendedBSt: {
            const double t1 = gen.extra[0], nu = gen.extra[1];
            return (nu + 1.0) * 4.0 / (nu * t1 * t1) - 1.0;
        }
    }
    return 0.0;
}

// The standardized symmetric law with density delta_nc * g(z^2).
class StandardSymmetric {
public:
    explicit StandardSymmetric(GeneratorSpec gen) : gen_(std::move(gen)) {
        gen_.validate();
        log_delta_ = compute_log_delta();
        if (gen_.family == Family::LogHyperbolic) setup_hyperbolic_envelope();
    }

    const GeneratorSpec& generator() const { return gen_; }
    double log_delta() const { return log_delta_; }
    double delta() const { return std::exp(log_delta_); }

    double log_pdf(double z) const { return log_delta_ + kernel::log_g(gen_, z * z); }
    double pdf(double z) const { return std::exp(log_pdf(z)); }

    // P(Z > w) for w >= 0, accurate deep into the tail.
    double upper_tail(double w) const {
        if (w < 0.0) return 1.0 - upper_tail(-w);
        if (w == 0.0) return 0.5;
        switch (gen_.family) {
            case Family::LogNormal: return detail::normal_sf(w);
            case Family::LogStudentT: {
                const boost::math::students_t_distribution<double> t(gen_.extra[0]);
                return boost::math::cdf(boost::math::complement(t, w));
            }
            case Family::LogPowerExponential: {
                const double inv_p = 0.5 * (1.0 + gen_.extra[0]);
                return 0.5 * boost::math::gamma_q(inv_p, 0.5 * std::pow(w, 1.0 / inv_p));
            }
            case Family::LogHyperbolic: return std::exp(log_upper_tail_hyperbolic(w));
            case Family::LogSlash: return std::exp(log_upper_tail_slash(w));
            case Family::LogContaminatedNormal: {
                const double t1 = gen_.extra[0], t2 = gen_.extra[1];
                return t1 * detail::normal_sf(std::sqrt(t2) * w) + (1.0 - t1) * detail::normal_sf(w);
            }
            case Family::ExtendedBS:
                return detail::normal_sf(2.0 / gen_.extra[0] * std::sinh(w));
            case Family::ExtendedBSt: {
                const boost::math::students_t_distribution<double> t(gen_.extra[1]);
                const double y = 2.0 / gen_.extra[0] * std::sinh(w);
                if (!std::isfinite(y)) return 0.0;
                return boost::math::cdf(boost::math::complement(t, y));
            }
        }
        return 0.0;
    }

    double log_upper_tail(double w) const {
        if (w > 0.0) {
            switch (gen_.family) {
                case Family::LogNormal: return detail::log_normal_sf(w);
                case Family::LogHyperbolic: return log_upper_tail_hyperbolic(w);
                case Family::LogSlash: return log_upper_tail_slash(w);
                case Family::ExtendedBS: {
                    const double y = 2.0 / gen_.extra[0] * std::sinh(w);
                    return std::isfinite(y) ? detail::log_normal_sf(y) : -detail::kInf;
                }
                default: break;
            }
        }
        return std::log(upper_tail(w));
    }

    // G(w).
    double cdf(double w) const { return w >= 0.0 ? 1.0 - upper_tail(w) : upper_tail(-w); }

    // z_p = G^{-1}(p).
    double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0))
            throw DomainError("standard_quantile: probability " + std::to_string(p) + " outside (0,1)");
        if (p == 0.5) return 0.0;
        if (p < 0.5) return -quantile_upper(p);
        return quantile_upper(1.0 - p);
    }

    template <class Rng>
    double sample(Rng& rng) const {
        std::normal_distribution<double> normal(0.0, 1.0);
        switch (gen_.family) {
            case Family::LogNormal: return normal(rng);
            case Family::LogStudentT: {
                std::student_t_distribution<double> t(gen_.extra[0]);
                return t(rng);
            }
            case Family::LogPowerExponential: {
                const double inv_p = 0.5 * (1.0 + gen_.extra[0]);
                std::gamma_distribution<double> gam(inv_p, 1.0);
                std::uniform_real_distribution<double> u(0.0, 1.0);
                const double mag = std::pow(2.0 * gam(rng), inv_p);
                return u(rng) < 0.5 ? -mag : mag;
            }
            case Family::LogHyperbolic: return sample_hyperbolic(rng);
            case Family::LogSlash: {
                std::uniform_real_distribution<double> u(0.0, 1.0);
                double v;
                do v = u(rng);
                while (v == 0.0);
                return normal(rng) / std::pow(v, 1.0 / (2.0 * gen_.extra[0]));
            }
            case Family::LogContaminatedNormal: {
                std::uniform_real_distribution<double> u(0.0, 1.0);
                const bool heavy = u(rng) < gen_.extra[0];
                const double n = normal(rng);
                return heavy ? n / std::sqrt(gen_.extra[1]) : n;
            }
            case Family::ExtendedBS: return std::asinh(0.5 * gen_.extra[0] * normal(rng));
            case Family::ExtendedBSt: {
                std::student_t_distribution<double> t(gen_.extra[1]);
                return std::asinh(0.5 * gen_.extra[0] * t(rng));
            }
        }
        return 0.0;
    }

    // Inverse-CDF draw; valid for every family, used as the generic fallback.
    template <class Rng>
    double sample_inverse_cdf(Rng& rng) const {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double p;
        do p = u(rng);
        while (p == 0.0);
        return quantile(p);
    }

private:
    double compute_log_delta() const {
        using std::log;
        switch (gen_.family) {
            case Family::LogNormal: return -detail::kLogSqrt2Pi;
            case Family::LogStudentT: {
                const double nu = gen_.extra[0];
                return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                       0.5 * log(nu * std::numbers::pi);
            }
            case Family::LogPowerExponential: {
                const double inv_p = 0.5 * (1.0 + gen_.extra[0]);
                return -((1.0 + inv_p) * std::numbers::ln2 + std::lgamma(1.0 + inv_p));
            }
            case Family::LogHyperbolic: {
                const double t = gen_.extra[0];
                return -(log(2.0) + log(boost::math::cyl_bessel_k(1, t)));
            }
            case Family::LogSlash: {
                const double t = gen_.extra[0];
                return log(2.0 * t) + (t - 0.5) * std::numbers::ln2 - detail::kLogSqrt2Pi;
            }
            case Family::LogContaminatedNormal: return -detail::kLogSqrt2Pi;
            case Family::ExtendedBS: return log(2.0 / gen_.extra[0]) - detail::kLogSqrt2Pi;
            case Family::ExtendedBSt: {
                const double t1 = gen_.extra[0], nu = gen_.extra[1];
                // 1/delta = (t1/2) t1^{-(nu+1)} * nu^{-(nu+1)/2} sqrt(nu pi) Gamma(nu/2)/Gamma((nu+1)/2)
                const double log_int = log(0.5 * t1) - (nu + 1.0) * log(t1) -
                                       0.5 * (nu + 1.0) * log(nu) +
                                       0.5 * log(nu * std::numbers::pi) + std::lgamma(0.5 * nu) -
                                       std::lgamma(0.5 * (nu + 1.0));
                return -log_int;
            }
        }
        return 0.0;
    }

    // delta * int_{asinh w}^inf exp(-t cosh u) cosh u du, with the leading
    // exponential factored out so that far tails stay representable.
    double log_upper_tail_hyperbolic(double w) const {
        const double th = gen_.extra[0];
        const double a = std::asinh(w);
        const double ca = std::cosh(a);
        auto f = [&](double y) {
            const double u = a + y;
            return std::exp(-th * (std::cosh(u) - ca) + detail::log_cosh(u));
        };
        boost::math::quadrature::exp_sinh<double> integrator;
        const double integral = integrator.integrate(f, 0.0, detail::kInf, 1e-13);
        return log_delta_ - th * ca + std::log(integral);
    }

    // P(Z > w) = w^{-nu} int_0^w nu v^{nu-1} Phi_c(v) dv with nu = 2 theta,
    // from the scale-mixture form Z = N / U^{1/nu}.
    double log_upper_tail_slash(double w) const {
        const double nu = 2.0 * gen_.extra[0];
        const double b = std::min(w, 40.0);
        auto f = [&](double v) { return nu * std::pow(v, nu - 1.0) * detail::normal_sf(v); };
        boost::math::quadrature::tanh_sinh<double> integrator;
        const double integral = integrator.integrate(f, 0.0, b, 1e-13);
        return -nu * std::log(w) + std::log(integral);
    }

    // Positive root of upper_tail(w) = tail, tail in (0, 1/2).
    double quantile_upper(double tail) const {
        switch (gen_.family) {
            case Family::LogNormal: return -detail::normal_quantile(tail);
            case Family::LogStudentT: {
                const boost::math::students_t_distribution<double> t(gen_.extra[0]);
                return boost::math::quantile(boost::math::complement(t, tail));
            }
            case Family::LogPowerExponential: {
                const double inv_p = 0.5 * (1.0 + gen_.extra[0]);
                const double y = boost::math::gamma_q_inv(inv_p, 2.0 * tail);
                return std::pow(2.0 * y, inv_p);
            }
            case Family::ExtendedBS:
                return std::asinh(-0.5 * gen_.extra[0] * detail::normal_quantile(tail));
            case Family::ExtendedBSt: {
                const boost::math::students_t_distribution<double> t(gen_.extra[1]);
                return std::asinh(0.5 * gen_.extra[0] *
                                  boost::math::quantile(boost::math::complement(t, tail)));
            }
            default: break;
        }
        // Bracket by doubling from [0, 1], then TOMS748 refinement in log-tail space.
        const double log_target = std::log(tail);
        auto h = [&](double w) { return log_upper_tail(w) - log_target; };
        double lo = 0.0, hi = 1.0;
        while (h(hi) > 0.0) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e300) throw NumericalError("standard_quantile: bracket expansion failed");
        }
        auto tol = [](double a, double b) { return std::fabs(b - a) <= 1e-13 * std::max(1.0, std::fabs(a)); };
        std::uintmax_t iters = 200;
        const auto [a, b] = boost::math::tools::toms748_solve(h, lo, hi, tol, iters);
        return 0.5 * (a + b);
    }

    void setup_hyperbolic_envelope() {
        // Laplace envelope from the tangent of sqrt(1+t^2) at t0; t0 maximizes the
        // acceptance rate, which is proportional to m(t0) * exp(theta / sqrt(1+t0^2)).
        const double th = gen_.extra[0];
        auto score = [&](double t0) {
            const double r = std::sqrt(1.0 + t0 * t0);
            return std::log(t0 / r) + th / r;
        };
        double a = 1e-4, b = 50.0;
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - phi * (b - a), d = a + phi * (b - a);
        for (int i = 0; i < 200; ++i) {
            if (score(c) > score(d)) b = d;
            else a = c;
            c = b - phi * (b - a);
            d = a + phi * (b - a);
        }
        hyp_t0_ = 0.5 * (a + b);
        hyp_c_ = std::sqrt(1.0 + hyp_t0_ * hyp_t0_);
        hyp_m_ = hyp_t0_ / hyp_c_;
    }

    template <class Rng>
    double sample_hyperbolic(Rng& rng) const {
        const double th = gen_.extra[0];
        std::exponential_distribution<double> expo(th * hyp_m_);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (;;) {
            const double z = expo(rng);
            const double log_ratio =
                -th * (std::sqrt(1.0 + z * z) - hyp_c_ - hyp_m_ * (z - hyp_t0_));
            if (std::log(u(rng)) < log_ratio) return u(rng) < 0.5 ? -z : z;
        }
    }

    GeneratorSpec gen_;
    double log_delta_ = 0.0;
    double hyp_t0_ = 0.0, hyp_c_ = 1.0, hyp_m_ = 0.0;
};

inline double normalizing_constant(const GeneratorSpec& gen) { return StandardSymmetric(gen).delta(); }

inline double standard_cdf(const GeneratorSpec& gen, double w) { return StandardSymmetric(gen).cdf(w); }

inline double standard_quantile(const GeneratorSpec& gen, double q) {
    return StandardSymmetric(gen).quantile(q);
}

struct HazardValue {
    double value = 0.0;
    bool saturated = false;  // survival below 1e-300; value clamped to the largest double
};

// QLS(Psi_q, phi, g) at quantile level q.
class QlsDistribution {
public:
    QlsDistribution(double q, double psi_q, double phi, const GeneratorSpec& gen)
        : QlsDistribution(q, psi_q, phi, std::make_shared<const StandardSymmetric>(gen)) {}

    QlsDistribution(double q, double psi_q, double phi, std::shared_ptr<const StandardSymmetric> law)
        : law_(std::move(law)), q_(q), psi_(psi_q), phi_(phi) {
        if (!(q > 0.0 && q < 1.0)) throw DomainError("QLS: q must lie in (0,1)");
        if (!(psi_q > 0.0) || !std::isfinite(psi_q)) throw DomainError("QLS: psi_q must be positive");
        if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("QLS: phi must be positive");
        zq_ = law_->quantile(q);
        sqrt_phi_ = std::sqrt(phi);
    }

    // Reuse the cached z_q for a different quantile value.
    QlsDistribution with_psi(double psi_q) const {
        if (!(psi_q > 0.0) || !std::isfinite(psi_q)) throw DomainError("QLS: psi_q must be positive");
        QlsDistribution d = *this;
        d.psi_ = psi_q;
        return d;
    }

    double q() const { return q_; }
    double psi_q() const { return psi_; }
    double phi() const { return phi_; }
    double z_q() const { return zq_; }
    const StandardSymmetric& law() const { return *law_; }
    const std::shared_ptr<const StandardSymmetric>& law_ptr() const { return law_; }
    const GeneratorSpec& generator() const { return law_->generator(); }

    double standardize(double x) const { return (std::log(x) - std::log(psi_)) / sqrt_phi_ + zq_; }

    double log_pdf(double x) const {
        check_x(x);
        const double z = standardize(x);
        return law_->log_pdf(z) - 0.5 * std::log(phi_) - std::log(x);
    }
    double pdf(double x) const {
        if (x > 0.0 && !std::isfinite(std::log(x))) return 0.0;
        return std::exp(log_pdf(x));
    }
    double cdf(double x) const {
        check_x(x);
        return law_->cdf(standardize(x));
    }
    double survival(double x) const {
        check_x(x);
        return law_->upper_tail(standardize(x));
    }
    double log_survival(double x) const {
        check_x(x);
        return law_->log_upper_tail(standardize(x));
    }

    HazardValue hazard(double x) const {
        const double ls = log_survival(x);
        HazardValue h;
        h.saturated = ls < std::log(1e-300);
        const double lh = log_pdf(x) - ls;
        h.value = lh > std::log(std::numeric_limits<double>::max()) ? std::numeric_limits<double>::max()
                                                                    : std::exp(lh);
        return h;
    }

    double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("QLS quantile: p outside (0,1)");
        if (p == q_) return psi_;
        return psi_ * std::exp(sqrt_phi_ * (law_->quantile(p) - zq_));
    }

    template <class Rng>
    double draw(Rng& rng) const {
        return psi_ * std::exp(sqrt_phi_ * (law_->sample(rng) - zq_));
    }

    std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::vector<double> out(n);
        for (auto& v : out) v = draw(rng);
        return out;
    }

private:
    static void check_x(double x) {
        if (!(x > 0.0)) throw DomainError("QLS: argument must be positive, got " + std::to_string(x));
    }

    std::shared_ptr<const StandardSymmetric> law_;
    double q_, psi_, phi_, zq_ = 0.0, sqrt_phi_ = 1.0;
};

}  // namespace qlsacd
