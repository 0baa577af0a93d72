#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "esbound/constants.hpp"

using namespace esbound;
using Catch::Approx;

namespace {

ConstantsReport report_for(Scenario sc, double eps, double a, double b) {
    sc.es.epsilon = eps;
    sc.es.weight_a = a;
    sc.es.weight_b = b;
    const AutoCertificate ac = auto_certificate(sc);
    REQUIRE(ac.feasible);
    return compute_constants(sc.model, sc.noise, ac.cert, sc.es);
}

// Unweighted root formulas, written exactly as published; reference for the
// a = b = 1 reduction.
struct Unweighted {
    double xi_s, xi_l, r0;
};
Unweighted unweighted_roots(double c1, double c3, double c4, double q, double p) {
    const double p2 = p * p;
    const double root = std::sqrt(q * q * p2 * p2 - 4.0 * c1 * (c3 + 2.0 * c4) * p2);
    Unweighted u{};
    u.xi_s = 2.0 * c1 * p2 / (q * p2 + root);
    u.xi_l = (q * p2 + root) / (2.0 * c3 + 4.0 * c4);
    u.r0 = (u.xi_l - u.xi_s) / p2 * (0.5 * c3 + c4);
    return u;
}

double rk4_comparison(double d1, double d3, double q, double p, double xi0, double t_end,
                      double dt) {
    double xi = xi0;
    double t = 0.0;
    auto f = [&](double x) { return comparison_rhs(d1, d3, q, p, x); };
    while (t < t_end - 1e-15) {
        const double h = std::min(dt, t_end - t);
        const double k1 = f(xi);
        const double k2 = f(xi + 0.5 * h * k1);
        const double k3 = f(xi + 0.5 * h * k2);
        const double k4 = f(xi + h * k3);
        xi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    return xi;
}

}  // namespace

TEST_CASE("lambda tends to one as epsilon vanishes", "[constants]") {
    const ConstantsReport r = report_for(builtin_robot2d(), 1e-15, 0.1, 1.0);
    CHECK(std::abs(r.lambda - 1.0) <= 1e-10);
    CHECK(r.lambda > 1.0);
}

TEST_CASE("integrator constants reduce to the published scalar closed forms", "[constants]") {
    const double eps = 1e-2;
    const ConstantsReport r = report_for(builtin_integrator(), eps, 1.0, 1.0);

    const double lambda = 4.0 * kPi / (4.0 * kPi - eps);
    const double c1 = 2.0 * std::sqrt(2.0) * std::sqrt(eps / kPi) * (1.0 + eps / (4.0 * kPi));
    const double c2 = 7.0 * lambda * eps / (2.0 * kPi);
    const double c3 = 2.0 * lambda * lambda * std::sqrt(2.0 * eps / kPi);

    // sampled sup norms carry the 0.1% safety margin, so compare loosely
    CHECK(r.lambda == Approx(lambda).epsilon(5e-3));
    CHECK(r.c1 == Approx(c1).epsilon(5e-3));
    CHECK(r.c2 == Approx(c2).epsilon(5e-3));
    CHECK(r.c3 == Approx(c3).epsilon(5e-3));
    CHECK(r.c4 == Approx(0.0).margin(1e-15));
    CHECK(r.q == Approx(2.0));
    CHECK(r.p_lo == Approx(1.0));
}

TEST_CASE("planar example report is feasible and reproduces the published bound",
          "[constants]") {
    const ConstantsReport r = report_for(builtin_robot2d(), 1e-7, 0.1, 1.0);
    REQUIRE(r.feasible);
    CHECK(r.cond13.ok);
    CHECK(r.cond14.ok);
    CHECK(r.cond15.ok);
    CHECK(r.cond16.ok);
    CHECK(ultimate_bound(r) == Approx(0.0474304).epsilon(0.01));
    CHECK(r.xi_s < r.xi_l);
    CHECK(r.lambda > 1.0);
}

TEST_CASE("published ultimate bounds across epsilon", "[constants]") {
    CHECK(ultimate_bound(report_for(builtin_robot2d(), 1e-10, 0.1, 1.0)) ==
          Approx(0.00841221).epsilon(0.01));
    CHECK(ultimate_bound(report_for(builtin_scalar1d(), 1e-8, 0.1, 1.0)) ==
          Approx(0.0158385).epsilon(0.01));
}

TEST_CASE("degenerate input B = 0 passes the weight conditions trivially", "[constants]") {
    SystemModel m;
    m.n = 2;
    m.A = TimeMat::constant(Mat(2, 2));
    m.B = TimeMat::constant(Mat(2, 1));
    m.A_bar = 0.0;
    m.B_bar = 0.0;
    m.DB_bar = 0.0;
    m.K = Mat::identity(2);
    Certificate cert;
    cert.q = 1.0;
    cert.p_lo = 0.5;
    cert.p_hi = 0.5;
    cert.P = [](double) { return Mat::identity(2) * 0.5; };
    cert.Pdot = [](double) { return Mat(2, 2); };
    ESParams es;
    es.epsilon = 0.01;
    es.sigma0 = 1.0;
    const ConstantsReport r = compute_constants(m, NoiseModel{}, cert, es);
    CHECK(r.cond14.ok);
    CHECK(r.cond15.ok);
    CHECK(r.c1 == 0.0);
    CHECK(r.c2 == 0.0);
    CHECK(r.xi_s == 0.0);
    CHECK(std::isinf(r.xi_l));
    CHECK(r.r0 == Approx(0.5 * cert.q));
    CHECK(r.B_star == 0.0);
}

TEST_CASE("condition flags at infeasible settings", "[constants]") {
    // epsilon far above the feasible range for the planar example
    Scenario sc = builtin_robot2d();
    sc.es.epsilon = 1e-2;
    sc.es.weight_a = 0.1;
    const AutoCertificate ac = auto_certificate(sc);
    REQUIRE(ac.feasible);
    const ConstantsReport r = compute_constants(sc.model, sc.noise, ac.cert, sc.es);
    CHECK_FALSE(r.feasible);
    CHECK((!r.cond14.ok || !r.cond15.ok || !r.cond16.ok));

    // scalar integrator at eps = 0.01, sigma0 = 1: everything passes
    const ConstantsReport ok = report_for(builtin_integrator(), 1e-2, 0.1, 0.9);
    CHECK(ok.feasible);
    const auto flags = check_assumption_conditions(ok, 1.0);
    for (const auto& f : flags) CHECK(f.ok);
}

TEST_CASE("cond13 failure aborts the report with the flag", "[constants]") {
    Scenario sc = builtin_robot2d();
    sc.es.epsilon = 1.0;  // eps |BB^T K| = 300 >> 2 pi
    const AutoCertificate ac = auto_certificate(sc);
    const ConstantsReport r = compute_constants(sc.model, sc.noise, ac.cert, sc.es);
    CHECK_FALSE(r.cond13.ok);
    CHECK(r.cond13.margin < 0.0);
    CHECK_FALSE(r.feasible);
    CHECK(std::isnan(r.lambda));
}

TEST_CASE("xi0 interval endpoints", "[constants]") {
    // sigma0 -> 0: the state term vanishes below xi_s, so the interval
    // starts at xi_s
    const ConstantsReport r = report_for(builtin_integrator(), 1e-2, 0.1, 0.9);
    const EnvelopeParams env0 = xi0_interval(r, 1e-9);
    CHECK(env0.xi0_lo == Approx(r.xi_s));
    CHECK(env0.xi0_lo < env0.xi0 );
    CHECK(env0.xi0 < env0.xi0_hi);

    // sigma0 = 1: lower endpoint is the initial-value bound
    const EnvelopeParams env1 = xi0_interval(r, 1.0);
    const double want = 2.0 * r.p_hi * std::pow(1.0 + r.epsilon * r.sup.BBtK / (4.0 * kPi), 2) *
                        (1.0 + r.B_bar * r.B_bar * r.epsilon / (2.0 * kPi));
    CHECK(env1.xi0_lo == Approx(want).epsilon(1e-12));
    CHECK(env1.xi0_lo == Approx(2.0064).epsilon(1e-3));

    // planar example at the published table settings: interval nonempty
    const ConstantsReport r2 = report_for(builtin_robot2d(), 1e-7, 0.1, 1.0);
    const EnvelopeParams env2 = xi0_interval(r2, 1.0);
    CHECK(env2.xi0_lo < env2.xi0_hi);

    // midpoint policy
    Xi0Policy mid;
    mid.kind = Xi0Policy::Kind::Midpoint;
    const EnvelopeParams envm = xi0_interval(r2, 1.0, mid);
    CHECK(envm.xi0 == Approx(0.5 * (envm.xi0_lo + envm.xi0_hi)));
}

TEST_CASE("envelope limits", "[constants]") {
    const ConstantsReport r = report_for(builtin_robot2d(), 1e-7, 0.1, 1.0);
    const EnvelopeParams env = xi0_interval(r, 1.0);

    // t -> infinity: envelope -> B*
    CHECK(envelope(r, env, 1e6 / r.r0) == Approx(r.B_star).epsilon(1e-12));

    // t = 0: lambda sqrt(xi0/p_lo) + Bbar sqrt(eps/2pi)
    const double at0 = r.lambda * std::sqrt(env.xi0 / r.p_lo) +
                       r.B_bar * std::sqrt(r.epsilon / (2.0 * kPi));
    CHECK(envelope(r, env, 0.0) == Approx(at0).epsilon(1e-12));

    // boundary xi0 = xi_s: constant envelope (comparison equilibrium)
    EnvelopeParams eq = env;
    eq.xi0 = r.xi_s;
    for (double t : {0.0, 0.01, 1.0}) {
        CHECK(envelope(r, eq, t) == Approx(r.B_star).epsilon(1e-12));
    }

    // simplified envelope dominates the sharp one
    for (double t : {0.0, 0.001, 0.01, 0.1}) {
        CHECK(envelope_simplified(r, env, t) >= envelope(r, env, t) - 1e-12);
    }
}

TEST_CASE("comparison closed form vs a Runge-Kutta oracle", "[constants][acceptance7]") {
    const ConstantsReport r = report_for(builtin_integrator(), 1e-2, 0.1, 0.9);
    const EnvelopeParams env = xi0_interval(r, 1.0);
    const double dt = 1e-4 / r.r0;

    // equilibrium root stays put
    CHECK(comparison_ode_closed_form(r.d1, r.d3, r.q, r.p_lo, r.xi_s, 3.0) ==
          Approx(r.xi_s).epsilon(1e-12));

    // near the upper root: decays toward xi_s
    const double hi0 = r.xi_l * (1.0 - 1e-6);
    const double later = comparison_ode_closed_form(r.d1, r.d3, r.q, r.p_lo, hi0, 50.0 / r.r0);
    CHECK(later < hi0);
    CHECK(later == Approx(r.xi_s).epsilon(1e-3));

    // pointwise agreement with RK4 at 1000 sample times
    double worst = 0.0;
    for (int i = 1; i <= 1000; ++i) {
        const double t = 8.0 / r.r0 * i / 1000.0;
        const double closed = comparison_ode_closed_form(r.d1, r.d3, r.q, r.p_lo, env.xi0, t);
        const double rk = rk4_comparison(r.d1, r.d3, r.q, r.p_lo, env.xi0, t, dt);
        worst = std::max(worst, std::abs(closed - rk));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("weighted roots reduce to the unweighted ones at a = b = 1", "[constants]") {
    const ConstantsReport r = report_for(builtin_scalar1d(), 1e-8, 1.0, 1.0);
    // identity: 16 d1 d3 = 4 c1 (c3 + 2 c4) when a = b = 1
    CHECK(16.0 * r.d1 * r.d3 == Approx(4.0 * r.c1 * (r.c3 + 2.0 * r.c4)).epsilon(1e-12));
    const Unweighted u = unweighted_roots(r.c1, r.c3, r.c4, r.q, r.p_lo);
    CHECK(r.xi_s == Approx(u.xi_s).epsilon(1e-12));
    CHECK(r.xi_l == Approx(u.xi_l).epsilon(1e-12));
    CHECK(r.r0 == Approx(u.r0).epsilon(1e-12));
}

TEST_CASE("Vieta identities for the comparison roots", "[constants]") {
    for (double eps : {1e-7, 1e-8, 1e-9}) {
        const ConstantsReport r = report_for(builtin_robot2d(), eps, 0.1, 1.0);
        const double p2 = r.p_lo * r.p_lo;
        CHECK(r.xi_s * r.xi_l == Approx(r.d1 * p2 / r.d3).epsilon(1e-10));
        CHECK(r.xi_s + r.xi_l == Approx(r.q * p2 / (2.0 * r.d3)).epsilon(1e-10));
    }
}

TEST_CASE("envelope is nonincreasing in t and increasing in xi0", "[constants]") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int built = 0;
    while (built < 1000) {
        ConstantsReport r;
        r.q = 0.5 + 20.0 * u(rng);
        r.p_lo = 0.2 + 5.0 * u(rng);
        r.lambda = 1.0 + 0.5 * u(rng);
        r.B_bar = u(rng);
        r.epsilon = std::pow(10.0, -6.0 + 4.0 * u(rng));
        r.d1 = 0.01 + u(rng);
        const double cap = r.q * r.q * r.p_lo * r.p_lo / (16.0 * r.d1);
        r.d3 = cap * (0.05 + 0.9 * u(rng));
        const ComparisonRoots roots = comparison_roots(r.d1, r.d3, r.q, r.p_lo);
        if (!roots.real) continue;
        r.xi_s = roots.xi_s;
        r.xi_l = roots.xi_l;
        r.r0 = roots.r0;
        ++built;

        EnvelopeParams env;
        env.xi0_lo = r.xi_s;
        env.xi0_hi = r.xi_l;
        env.xi0 = r.xi_s + (r.xi_l - r.xi_s) * (0.05 + 0.9 * u(rng));

        double prev = envelope(r, env, 0.0);
        for (int i = 1; i <= 20; ++i) {
            const double cur = envelope(r, env, 3.0 / r.r0 * i / 20.0);
            CHECK(cur <= prev * (1.0 + 1e-12) + 1e-15);
            prev = cur;
        }
        EnvelopeParams bigger = env;
        bigger.xi0 = env.xi0 + (r.xi_l - env.xi0) * 0.5;
        const double t_probe = 1.0 / r.r0;
        CHECK(envelope(r, bigger, t_probe) >= envelope(r, env, t_probe) - 1e-15);
    }
}

TEST_CASE("ultimate bound decreases with epsilon", "[constants]") {
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-7, 1e-8, 1e-9, 1e-10}) {
        const double b = ultimate_bound(report_for(builtin_robot2d(), eps, 0.1, 1.0));
        CHECK(b < prev);
        prev = b;
    }
}

TEST_CASE("xi_s obeys the small-epsilon order bound", "[constants]") {
    // xi_s / ((1+eps)(sqrt(eps)(1+eps+delta_bar) + delta_bar/sqrt(eps)))
    // stays bounded as eps -> 0 (delta_bar = 0 in all three examples)
    auto ratio_range = [&](const Scenario& sc, double a, double b) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (double le = -10.0; le <= -2.01; le += 0.5) {
            const double eps = std::pow(10.0, le);
            Scenario s = sc;
            s.es.epsilon = eps;
            s.es.weight_a = a;
            s.es.weight_b = b;
            const AutoCertificate ac = auto_certificate(s);
            const ConstantsReport r = compute_constants(s.model, s.noise, ac.cert, s.es);
            if (!r.cond15.ok || !std::isfinite(r.xi_s)) continue;
            const double denom = (1.0 + eps) * std::sqrt(eps) * (1.0 + eps);
            const double ratio = r.xi_s / denom;
            CHECK(std::isfinite(ratio));
            CHECK(ratio > 0.0);
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        REQUIRE(hi > 0.0);
        CHECK(hi / lo <= 50.0);
    };
    ratio_range(builtin_integrator(), 0.1, 0.9);
    ratio_range(builtin_scalar1d(), 0.1, 1.0);
    ratio_range(builtin_robot2d(), 0.1, 1.0);
}

TEST_CASE("epsilon search brackets the feasibility boundary", "[constants]") {
    // scalar integrator: the published example runs at eps = 1e-2, so the
    // largest feasible eps in [1e-6, 1] is at least that
    const Scenario in = builtin_integrator();
    const AutoCertificate ic = auto_certificate(in);
    const SearchResult rs =
        epsilon_search(in.model, in.noise, ic.cert, 1.0, 0.1, 0.9, 1e-6, 1.0);
    REQUIRE(rs.found);
    CHECK(rs.value >= 1e-2);

    // 1-D example: eps = 1e-5 is feasible with the published parameters
    const ConstantsReport r1d = report_for(builtin_scalar1d(), 1e-5, 0.1, 1.0);
    CHECK(r1d.feasible);

    // empty bracket for the planar example
    const Scenario ro = builtin_robot2d();
    const AutoCertificate rc = auto_certificate(ro);
    const SearchResult bad =
        epsilon_search(ro.model, ro.noise, rc.cert, 1.0, 0.1, 1.0, 1.0, 2.0);
    CHECK_FALSE(bad.found);
    CHECK(bad.note.find("no feasible") != std::string::npos);
}

TEST_CASE("sigma0 search reproduces the published bisection value", "[constants][acceptance4]") {
    const Scenario sc = builtin_scalar1d();
    const AutoCertificate ac = auto_certificate(sc);
    const SearchResult rs =
        sigma0_search(sc.model, sc.noise, ac.cert, 1e-8, 0.1, 1.0, 0.1, 100.0);
    REQUIRE(rs.found);
    CHECK(rs.value == Approx(10.87).epsilon(0.005));

    // sigma0 -> 0 is feasible whenever the eps side is
    const ConstantsReport r = report_for(builtin_scalar1d(), 1e-8, 0.1, 1.0);
    const auto flags = check_assumption_conditions(r, 1e-6);
    for (const auto& f : flags) CHECK(f.ok);

    // planar example at the table settings admits sigma0 = 1
    const Scenario ro = builtin_robot2d();
    const AutoCertificate rc = auto_certificate(ro);
    const SearchResult rr =
        sigma0_search(ro.model, ro.noise, rc.cert, 1e-7, 0.1, 1.0, 0.1, 100.0);
    REQUIRE(rr.found);
    CHECK(rr.value >= 1.0);
}
