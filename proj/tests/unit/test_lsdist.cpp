#include "qlsacd/lsdist.hpp"
#include "qlsacd/quadrature.hpp"
#include "qlsacd/stats.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace qlsacd;
using Catch::Approx;

namespace {

GeneratorSpec gen(Family f, std::vector<double> extra = {}) { return GeneratorSpec{f, std::move(extra)}; }

// One representative parameterization per family.
std::vector<GeneratorSpec> representative_generators() {
    return {gen(Family::LogNormal),
            gen(Family::LogStudentT, {5.0}),
            gen(Family::LogPowerExponential, {0.5}),
            gen(Family::LogHyperbolic, {2.5}),
            gen(Family::LogSlash, {2.0}),
            gen(Family::LogContaminatedNormal, {0.3, 0.4}),
            gen(Family::ExtendedBS, {2.0}),
            gen(Family::ExtendedBSt, {0.5, 3.0})};
}

struct Reference {
    GeneratorSpec gen;
    double delta, g_at_1, s_at_2;
};

// Frozen from tests/oracles/lsdist_oracle.py (SciPy quad on delta*g(z^2)).
std::vector<Reference> scipy_references() {
    return {
        {gen(Family::LogNormal), 0.398942280401433, 0.841344746068543, 0.0227501319481792},
        {gen(Family::LogStudentT, {1.0}), 0.318309886183791, 0.75, 0.147583617650433},
        {gen(Family::LogStudentT, {5.0}), 0.379606689822494, 0.818391266175439, 0.0509697394149292},
        {gen(Family::LogPowerExponential, {0.0}), 0.398942280401433, 0.841344746068543, 0.0227501319481792},
        {gen(Family::LogPowerExponential, {0.5}), 0.323483734855359, 0.763968554917336, 0.0966219422954696},
        {gen(Family::LogPowerExponential, {-0.5}), 0.4638648042895, 0.923243202095839, 8.96541353570988e-06},
        {gen(Family::LogHyperbolic, {1.0}), 0.830692796024661, 0.765664064671247, 0.0945248360187006},
        {gen(Family::LogHyperbolic, {2.5}), 6.76674077664653, 0.902181936785701, 0.0109816045616994},
        {gen(Family::LogSlash, {1.0}), 1.12837916709551, 0.741970724519143, 0.11506711570454},
        {gen(Family::LogSlash, {2.0}), 4.51351666838205, 0.785193405939487, 0.0649923865088561},
        {gen(Family::LogContaminatedNormal, {0.3, 0.4}), 0.398942280401433, 0.809877933718149, 0.0468105739735357},
        {gen(Family::ExtendedBS, {0.5}), 1.59576912160573, 0.999998704309136, 5.43498438311482e-48},
        {gen(Family::ExtendedBS, {2.0}), 0.398942280401433, 0.880042883593179, 0.000143444143311279},
        {gen(Family::ExtendedBSt, {0.5, 3.0}), 0.826993343132688, 0.99089379214402, 0.000355049698380532},
    };
}

}  // namespace

TEST_CASE("family names round-trip and reject unknown strings", "[lsdist]") {
    for (Family f : kAllFamilies) CHECK(parse_family(family_name(f)) == f);
    CHECK(family_name(Family::ExtendedBSt) == "ebs-t");
    try {
        parse_family("log-gamma");
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("log-contaminated-normal") != std::string::npos);
    }
}

TEST_CASE("generator parameter domains are enforced", "[lsdist]") {
    CHECK_NOTHROW(gen(Family::LogNormal).validate());
    CHECK_THROWS_AS(gen(Family::LogNormal, {1.0}).validate(), DomainError);
    CHECK_THROWS_AS(gen(Family::LogStudentT, {0.0}).validate(), DomainError);
    CHECK_THROWS_AS(gen(Family::LogPowerExponential, {-1.0}).validate(), DomainError);
    CHECK_NOTHROW(gen(Family::LogPowerExponential, {1.0}).validate());
    CHECK_THROWS_AS(gen(Family::LogPowerExponential, {1.01}).validate(), DomainError);
    CHECK_THROWS_AS(gen(Family::LogContaminatedNormal, {0.5}).validate(), DomainError);
    CHECK_THROWS_AS(gen(Family::LogContaminatedNormal, {0.5, 1.0}).validate(), DomainError);
    CHECK_THROWS_AS(gen(Family::ExtendedBSt, {1.0, -2.0}).validate(), DomainError);
    try {
        gen(Family::LogSlash, {-0.5}).validate();
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("theta") != std::string::npos);
    }
}

TEST_CASE("normalizing constants: closed forms", "[lsdist]") {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    CHECK(normalizing_constant(gen(Family::LogNormal)) == Approx(inv_sqrt_2pi).epsilon(1e-14));
    CHECK(normalizing_constant(gen(Family::LogStudentT, {1.0})) == Approx(1.0 / std::numbers::pi).epsilon(1e-14));
    CHECK(normalizing_constant(gen(Family::LogPowerExponential, {0.0})) == Approx(inv_sqrt_2pi).epsilon(1e-14));
}

TEST_CASE("normalizing constants and CDFs agree with SciPy reference integrals", "[lsdist]") {
    for (const auto& ref : scipy_references()) {
        INFO(describe(ref.gen));
        const StandardSymmetric law(ref.gen);
        CHECK(law.delta() == Approx(ref.delta).epsilon(1e-10));
        CHECK(law.cdf(1.0) == Approx(ref.g_at_1).epsilon(1e-10));
        CHECK(law.upper_tail(2.0) == Approx(ref.s_at_2).epsilon(1e-8));
        // The library's own quadrature route must agree as well.
        CHECK(quadrature::normalizing_constant(ref.gen) == Approx(ref.delta).epsilon(1e-9));
    }
}

TEST_CASE("standard_cdf examples and symmetry", "[lsdist]") {
    CHECK(standard_cdf(gen(Family::LogNormal), 1.959964) == Approx(0.975).margin(1e-7));
    CHECK(standard_cdf(gen(Family::LogStudentT, {1.0}), 1.0) == Approx(0.75).margin(1e-14));
    for (const auto& g : representative_generators()) {
        const StandardSymmetric law(g);
        INFO(describe(g));
        CHECK(law.cdf(0.0) == 0.5);
        double prev = 0.0;
        for (double w = -6.0; w <= 6.0; w += 0.25) {
            const double c = law.cdf(w);
            CHECK(c >= prev);
            prev = c;
            CHECK(law.cdf(-w) + law.cdf(w) == Approx(1.0).margin(1e-10));
        }
    }
}

TEST_CASE("standard_quantile examples and inversion accuracy", "[lsdist]") {
    CHECK(standard_quantile(gen(Family::LogNormal), 0.975) == Approx(1.959964).margin(1e-6));
    CHECK(standard_quantile(gen(Family::LogStudentT, {1.0}), 0.75) == Approx(1.0).margin(1e-12));
    CHECK_THROWS_AS(standard_quantile(gen(Family::LogNormal), 0.0), DomainError);
    CHECK_THROWS_AS(standard_quantile(gen(Family::LogNormal), 1.0), DomainError);
    for (const auto& g : representative_generators()) {
        const StandardSymmetric law(g);
        INFO(describe(g));
        CHECK(law.quantile(0.5) == 0.0);
        for (double q : {0.001, 0.01, 0.05, 0.25, 0.4, 0.6, 0.75, 0.95, 0.99, 0.999}) {
            const double z = law.quantile(q);
            CHECK(std::fabs(law.cdf(z) - q) <= 1e-10);
        }
    }
}

TEST_CASE("pdf examples", "[lsdist]") {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const QlsDistribution d1(0.5, 1.0, 1.0, gen(Family::LogNormal));
    CHECK(d1.pdf(1.0) == Approx(inv_sqrt_2pi).epsilon(1e-14));
    const QlsDistribution d2(0.5, 2.0, 0.25, gen(Family::LogNormal));
    CHECK(d2.pdf(2.0) == Approx(1.0 / (2.0 * 0.5 * std::sqrt(2.0 * std::numbers::pi))).epsilon(1e-14));
    for (const auto& g : representative_generators()) {
        const QlsDistribution d(0.3, 1.5, 0.5, g);
        INFO(describe(g));
        CHECK(d.pdf(0.5) > 0.0);
        CHECK(std::isfinite(d.pdf(1e-12)));
        CHECK_THROWS_AS(d.pdf(0.0), DomainError);
        CHECK_THROWS_AS(d.cdf(-1.0), DomainError);
    }
}

TEST_CASE("pdf integrates to one and psi_q is the q-quantile", "[lsdist]") {
    for (const auto& g : representative_generators()) {
        for (double q : {0.05, 0.5, 0.9}) {
            const QlsDistribution d(q, 3.0, 0.7, g);
            INFO(describe(g) << " q=" << q);
            CHECK(quadrature::total_mass(d) == Approx(1.0).margin(1e-6));
            CHECK(std::fabs(d.cdf(3.0) - q) <= 1e-8);
            CHECK(d.survival(3.0) == Approx(1.0 - q).margin(1e-8));
        }
    }
    const QlsDistribution ln(0.5, 1.0, 1.0, gen(Family::LogNormal));
    CHECK(ln.cdf(std::numbers::e) == Approx(0.8413447).margin(1e-7));
}

TEST_CASE("quantile inverts cdf", "[lsdist]") {
    const QlsDistribution ln(0.5, 1.0, 1.0, gen(Family::LogNormal));
    CHECK(ln.quantile(0.975) == Approx(std::exp(1.959964)).epsilon(1e-6));
    CHECK(ln.quantile(0.5) == 1.0);
    CHECK_THROWS_AS(ln.quantile(1.0), DomainError);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.2, 20.0);
    for (const auto& g : representative_generators()) {
        const QlsDistribution d(0.2, 2.0, 0.4, g);
        CHECK(d.quantile(0.2) == 2.0);
        for (int i = 0; i < 5; ++i) {
            const double x = u(rng);
            const double p = d.cdf(x);
            if (p > 1e-12 && p < 1.0 - 1e-9) CHECK(d.quantile(p) == Approx(x).epsilon(1e-7));
        }
    }
}

TEST_CASE("survival and hazard identities", "[lsdist]") {
    const QlsDistribution ln(0.5, 1.0, 1.0, gen(Family::LogNormal));
    CHECK(ln.hazard(1.0).value == Approx(0.7978846).epsilon(1e-7));
    CHECK_FALSE(ln.hazard(1.0).saturated);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (const auto& g : representative_generators()) {
        const QlsDistribution d(0.75, 1.3, 0.6, g);
        INFO(describe(g));
        CHECK(d.survival(1.3) == Approx(0.25).margin(1e-8));
        for (int i = 0; i < 5; ++i) {
            const double x = u(rng);
            const auto h = d.hazard(x);
            CHECK(h.value >= 0.0);
            CHECK(h.value * d.survival(x) == Approx(d.pdf(x)).epsilon(1e-9));
        }
    }
    // Deep tail: survival underflows but the hazard stays finite and flagged.
    const QlsDistribution tight(0.5, 1.0, 1e-4, gen(Family::LogNormal));
    const auto far = tight.hazard(2.0);
    CHECK(far.saturated);
    CHECK(std::isfinite(far.value));
}

TEST_CASE("weight_v closed forms and finite-difference agreement", "[lsdist]") {
    CHECK(weight_v(gen(Family::LogNormal), 0.0) == 1.0);
    CHECK(weight_v(gen(Family::LogNormal), 3.7) == 1.0);
    CHECK(weight_v(gen(Family::LogStudentT, {5.0}), 0.0) == Approx(1.2).epsilon(1e-15));
    CHECK(weight_v(gen(Family::ExtendedBS, {2.0}), 0.0) == 0.0);
    CHECK(std::isfinite(weight_v(gen(Family::ExtendedBS, {0.1}), 30.0)));

    std::vector<GeneratorSpec> gens = representative_generators();
    gens.push_back(gen(Family::LogPowerExponential, {-0.6}));
    gens.push_back(gen(Family::LogSlash, {0.3}));
    gens.push_back(gen(Family::ExtendedBS, {0.5}));
    for (const auto& g : gens) {
        INFO(describe(g));
        for (double u = -5.0; u <= 5.0; u += 0.1) {
            if (std::fabs(u) < 0.05) continue;
            const double s = u * u;
            const double h = 1e-5 * std::max(1.0, s);
            const double fd = -2.0 * (kernel::log_g(g, s + h) - kernel::log_g(g, s - h)) / (2.0 * h);
            const double v = weight_v(g, u);
            CHECK(std::fabs(v - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
        }
        // Continuity through the origin for the smooth kernels.
        if (g.family != Family::LogPowerExponential)
            CHECK(weight_v(g, 0.0) == Approx(weight_v(g, 1e-4)).epsilon(1e-6).margin(1e-7));
    }
}

TEST_CASE("median specialization matches the median-parameterized density", "[lsdist]") {
    for (const auto& g : representative_generators()) {
        const StandardSymmetric law(g);
        const double lambda = 2.5, phi = 0.8;
        const QlsDistribution d(0.5, lambda, phi, g);
        CHECK(d.z_q() == 0.0);
        for (double x : {0.3, 1.0, 2.5, 7.0}) {
            const double l = std::log(x / lambda);
            const double median_form = law.delta() / (std::sqrt(phi) * x) * kernel::g(g, l * l / phi);
            CHECK(d.pdf(x) == Approx(median_form).epsilon(1e-12));
        }
    }
}

TEST_CASE("sampling is reproducible and matches the cdf", "[lsdist]") {
    for (const auto& g : representative_generators()) {
        INFO(describe(g));
        const QlsDistribution d(0.25, 2.0, 0.5, g);
        const auto a = d.sample(100000, 42);
        CHECK(a == d.sample(100000, 42));
        CHECK(a != d.sample(100000, 43));
        const double ks = stats::ks_statistic(a, [&](double x) { return d.cdf(x); });
        CHECK(ks < stats::ks_critical_1pct(a.size()));
    }
}

TEST_CASE("empirical q-quantile of many draws recovers psi_q", "[lsdist]") {
    const QlsDistribution d(0.1, 5.0, 0.3, gen(Family::LogStudentT, {4.0}));
    const auto x = d.sample(1000000, 3);
    CHECK(stats::quantile(x, 0.1) == Approx(5.0).epsilon(0.01));
}

TEST_CASE("vanishing phi collapses draws onto psi_q", "[lsdist]") {
    const QlsDistribution d(0.3, 4.0, 1e-12, gen(Family::LogNormal));
    for (double v : d.sample(1000, 5)) CHECK(v == Approx(4.0).epsilon(1e-4));
}

TEST_CASE("inverse-cdf fallback sampler matches the cdf", "[lsdist]") {
    const StandardSymmetric law(gen(Family::LogHyperbolic, {1.0}));
    std::mt19937_64 rng(9);
    std::vector<double> z(20000);
    for (auto& v : z) v = law.sample_inverse_cdf(rng);
    CHECK(stats::ks_statistic(z, [&](double w) { return law.cdf(w); }) < stats::ks_critical_1pct(z.size()));
}
