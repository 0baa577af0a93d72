#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "esbound/certificates.hpp"
#include "esbound/scenario.hpp"
#include "esbound/smallmat.hpp"

namespace esbound {

/// Supremum norms of the coefficient products the stability constants need,
/// sampled over one coefficient period and inflated by the safety margin.
/// D stands for B B^T throughout.
struct SupNorms {
    double BBtK = 0.0;
    double KB = 0.0;
    double HB = 0.0;
    double BBtKB = 0.0;
    double BBtKH = 0.0;
    double HBBtK = 0.0;
    double BBtKBBtK = 0.0;
    /// sup spectral radius of K A(t) + A(t)^T K.
    double rbar_a = 0.0;
    double margin = kSupMargin;
};

inline SupNorms compute_sup_norms(const SystemModel& model, int samples = kSupSamples) {
    SupNorms s;
    const Mat K = sym_part(model.K);
    const double period = sampling_period(model);
    const bool constant = model.A.kind() == TimeMat::Kind::Constant &&
                          model.B.kind() == TimeMat::Kind::Constant;
    const int ns = constant ? 1 : samples;
    for (int i = 0; i < ns; ++i) {
        const double t = period * i / ns;
        const Mat A = model.A.eval(t);
        const Mat B = model.B.eval(t);
        const Mat DK = B * (B.transpose() * K);
        const Mat H = A - DK;
        s.BBtK = std::max(s.BBtK, opnorm(DK));
        s.KB = std::max(s.KB, opnorm(K * B));
        s.HB = std::max(s.HB, opnorm(H * B));
        s.BBtKB = std::max(s.BBtKB, opnorm(DK * B));
        s.BBtKH = std::max(s.BBtKH, opnorm(DK * H));
        s.HBBtK = std::max(s.HBBtK, opnorm(H * DK));
        s.BBtKBBtK = std::max(s.BBtKBBtK, opnorm(DK * DK));
        s.rbar_a = std::max(s.rbar_a, spectral_radius_sym(sym_part(K * A) * 2.0));
    }
    const double inflate = 1.0 + s.margin;
    s.BBtK *= inflate;
    s.KB *= inflate;
    s.HB *= inflate;
    s.BBtKB *= inflate;
    s.BBtKH *= inflate;
    s.HBBtK *= inflate;
    s.BBtKBBtK *= inflate;
    s.rbar_a *= inflate;
    return s;
}

struct ConditionFlag {
    bool ok = false;
    /// Signed slack; positive means the condition holds.
    double margin = std::numeric_limits<double>::quiet_NaN();
};

/// Everything the stability theorem needs: the coefficient constants, the
/// weighted comparison-system data, the four feasibility conditions with
/// signed margins, and the ultimate bound.
struct ConstantsReport {
    // inputs echoed
    double epsilon = 0.0;
    double sigma0 = 0.0;
    double weight_a = 1.0;
    double weight_b = 1.0;
    double A_bar = 0.0;
    double B_bar = 0.0;
    double DB_bar = 0.0;
    double delta_bar = 0.0;
    double K_norm = 0.0;
    double q = 0.0;
    double p_lo = 0.0;
    double p_hi = 0.0;
    double pdot_bar = 0.0;
    SupNorms sup;

    // derived constants
    double Mbar_C = std::numeric_limits<double>::quiet_NaN();
    double Mbar_D = std::numeric_limits<double>::quiet_NaN();
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double c1 = std::numeric_limits<double>::quiet_NaN();
    double c2 = std::numeric_limits<double>::quiet_NaN();
    double c3 = std::numeric_limits<double>::quiet_NaN();
    double c4 = std::numeric_limits<double>::quiet_NaN();
    double d1 = std::numeric_limits<double>::quiet_NaN();
    double d2 = std::numeric_limits<double>::quiet_NaN();
    double d3 = std::numeric_limits<double>::quiet_NaN();
    double xi_s = std::numeric_limits<double>::quiet_NaN();
    double xi_l = std::numeric_limits<double>::quiet_NaN();
    double r0 = std::numeric_limits<double>::quiet_NaN();
    /// Admissible initial comparison value forced by |x(0)| <= sigma0.
    double v0_max = std::numeric_limits<double>::quiet_NaN();
    double B_star = std::numeric_limits<double>::quiet_NaN();

    ConditionFlag cond13, cond14, cond15, cond16;
    bool feasible = false;
};

/// Roots and rate of the comparison quadratic
/// xi' = d1 - (q/2) xi + (d3/p_lo^2) xi^2, written in the
/// cancellation-safe rationalized form (d1 d3 -> 0 makes the naive
/// smaller root subtract nearly equal numbers).
struct ComparisonRoots {
    double xi_s = std::numeric_limits<double>::quiet_NaN();
    double xi_l = std::numeric_limits<double>::quiet_NaN();
    double r0 = std::numeric_limits<double>::quiet_NaN();
    bool real = false;
};

inline ComparisonRoots comparison_roots(double d1, double d3, double q, double p_lo) {
    ComparisonRoots out;
    const double p2 = p_lo * p_lo;
    const double disc = q * q * p2 * p2 - 16.0 * d1 * d3 * p2;
    if (!(disc >= 0.0)) return out;
    out.real = true;
    const double root = std::sqrt(disc);
    out.xi_s = 4.0 * d1 * p2 / (q * p2 + root);
    if (d3 > 0.0) {
        out.xi_l = (q * p2 + root) / (4.0 * d3);
        out.r0 = (out.xi_l - out.xi_s) * d3 / p2;
    } else {
        // degenerate linear comparison system
        out.xi_l = std::numeric_limits<double>::infinity();
        out.r0 = 0.5 * q;
    }
    return out;
}

/// Left side of the initial-condition constraint:
/// 2 p_hi (1 + eps |BB^T K| / 4pi)^2 (sigma0^2 + Bbar^2 eps / 2pi).
inline double initial_value_bound(double p_hi, double eps, double bbk, double B_bar,
                                  double sigma0) {
    const double one = 1.0 + eps * bbk / (4.0 * kPi);
    return 2.0 * p_hi * one * one * (sigma0 * sigma0 + B_bar * B_bar * eps / (2.0 * kPi));
}

inline ConstantsReport compute_constants(const SystemModel& model, const NoiseModel& noise,
                                         const Certificate& cert, const ESParams& es,
                                         const SupNorms& sup) {
    ConstantsReport r;
    r.epsilon = es.epsilon;
    r.sigma0 = es.sigma0;
    r.weight_a = es.weight_a;
    r.weight_b = es.weight_b;
    r.A_bar = model.A_bar;
    r.B_bar = model.B_bar;
    r.DB_bar = model.DB_bar;
    r.delta_bar = noise.delta_bar;
    r.K_norm = opnorm(sym_part(model.K));
    r.q = cert.q;
    r.p_lo = cert.p_lo;
    r.p_hi = cert.p_hi;
    r.pdot_bar = cert.pdot_bar;
    r.sup = sup;

    const double eps = es.epsilon;
    const double bbk = sup.BBtK;
    r.cond13.margin = 2.0 * kPi - eps * bbk;
    r.cond13.ok = r.cond13.margin >= 0.0;
    if (!r.cond13.ok) {
        // lambda undefined past this point; report carries the failed flag
        r.feasible = false;
        return r;
    }

    const double sqrt2pi = std::sqrt(2.0 * kPi);
    r.lambda = 4.0 * kPi / (4.0 * kPi - eps * bbk);
    r.Mbar_C = (sup.HB + sup.BBtKB + r.DB_bar) / sqrt2pi +
               std::sqrt(2.0 / (kPi * kPi * kPi)) * r.A_bar * r.K_norm * r.B_bar * r.B_bar *
                   r.B_bar * eps +
               r.B_bar * r.delta_bar * sqrt2pi / eps;
    r.Mbar_D = 2.0 * r.B_bar * r.A_bar * r.K_norm * std::sqrt(2.0 / kPi);

    const double one = 1.0 + eps * bbk / (4.0 * kPi);
    const double lam = r.lambda;
    const double B2 = r.B_bar * r.B_bar;
    const double B3 = B2 * r.B_bar;

    r.c1 = 2.0 * r.p_hi * std::sqrt(eps) * one *
           (r.Mbar_C + 2.0 * B3 * r.K_norm * r.delta_bar / sqrt2pi);
    r.c2 = 2.0 * r.p_hi *
               (lam * eps * eps / (2.0 * kPi * kPi) * B2 * sup.rbar_a * bbk +
                lam * eps / kPi * r.B_bar * sup.KB * bbk +
                lam * eps / (4.0 * kPi) * (sup.BBtKH + sup.HBBtK + sup.BBtKBBtK)) +
           lam * eps / kPi * r.p_hi * r.B_bar * r.DB_bar * r.K_norm +
           4.0 * lam * B2 * r.K_norm * one * r.delta_bar * r.p_hi;
    r.c3 = 2.0 * r.p_hi * std::sqrt(2.0 * eps / kPi) *
           (lam * lam * bbk * sup.KB + 2.0 * lam * lam * one * r.B_bar * r.A_bar * r.K_norm);
    r.c4 = 2.0 * lam * lam * lam * eps / kPi * r.p_hi * sup.rbar_a * bbk;

    const double a = es.weight_a;
    const double b = es.weight_b;
    r.d1 = 0.5 * a * r.c1;
    r.d2 = 0.5 * (r.c1 / a + b * r.c3) + r.c2;
    r.d3 = r.c4 + r.c3 / (2.0 * b);

    r.cond14.margin = r.p_lo * r.q - 2.0 * r.d2;
    r.cond14.ok = r.cond14.margin >= 0.0;
    r.cond15.margin = r.q * r.q * r.p_lo * r.p_lo - 16.0 * r.d1 * r.d3;
    r.cond15.ok = r.cond15.margin > 0.0;

    const ComparisonRoots roots = comparison_roots(r.d1, r.d3, r.q, r.p_lo);
    if (roots.real) {
        r.xi_s = roots.xi_s;
        r.xi_l = roots.xi_l;
        r.r0 = roots.r0;
        r.B_star = lam * std::sqrt(r.xi_s / r.p_lo) + r.B_bar * std::sqrt(eps / (2.0 * kPi));
    }

    r.v0_max = initial_value_bound(r.p_hi, eps, bbk, r.B_bar, es.sigma0);
    r.cond16.margin = r.xi_l - r.v0_max;
    r.cond16.ok = r.cond16.margin > 0.0;

    r.feasible = r.cond13.ok && r.cond14.ok && r.cond15.ok && r.cond16.ok;
    return r;
}

inline ConstantsReport compute_constants(const SystemModel& model, const NoiseModel& noise,
                                         const Certificate& cert, const ESParams& es) {
    return compute_constants(model, noise, cert, es, compute_sup_norms(model));
}

/// Re-evaluate the four feasibility conditions, with the initial-state bound
/// taken at the given sigma0 instead of the report's.
inline std::array<ConditionFlag, 4> check_assumption_conditions(const ConstantsReport& r,
                                                                double sigma0) {
    std::array<ConditionFlag, 4> flags{r.cond13, r.cond14, r.cond15, r.cond16};
    if (r.cond13.ok) {
        const double v0 = initial_value_bound(r.p_hi, r.epsilon, r.sup.BBtK, r.B_bar, sigma0);
        flags[3].margin = r.xi_l - v0;
        flags[3].ok = flags[3].margin > 0.0;
    }
    return flags;
}

/// Chosen initial comparison value and the admissible open interval.
struct EnvelopeParams {
    double xi0 = 0.0;
    double xi0_lo = 0.0;
    double xi0_hi = 0.0;
};

inline EnvelopeParams xi0_interval(const ConstantsReport& r, double sigma0,
                                   const Xi0Policy& policy = Xi0Policy{}) {
    if (!r.feasible && !(r.cond13.ok && r.cond14.ok && r.cond15.ok)) {
        throw std::runtime_error("xi0_interval: report infeasible");
    }
    EnvelopeParams env;
    env.xi0_lo = std::max(r.xi_s, initial_value_bound(r.p_hi, r.epsilon, r.sup.BBtK, r.B_bar,
                                                      sigma0));
    env.xi0_hi = r.xi_l;
    if (!(env.xi0_lo < env.xi0_hi)) {
        throw std::runtime_error("xi0_interval: empty interval (lo = " +
                                 std::to_string(env.xi0_lo) +
                                 " >= hi = " + std::to_string(env.xi0_hi) + ")");
    }
    if (policy.kind == Xi0Policy::Kind::Midpoint && std::isfinite(env.xi0_hi)) {
        env.xi0 = 0.5 * (env.xi0_lo + env.xi0_hi);
    } else {
        const double f = policy.kind == Xi0Policy::Kind::Fraction ? policy.fraction : 0.01;
        if (std::isfinite(env.xi0_hi)) {
            env.xi0 = env.xi0_lo + f * (env.xi0_hi - env.xi0_lo);
        } else {
            env.xi0 = env.xi0_lo * (1.0 + f) + f;
        }
    }
    return env;
}

/// Solution of the comparison system at time t for initial value xi0.
inline double comparison_xi(double xi_s, double xi_l, double r0, double xi0, double t) {
    if (std::isinf(xi_l)) {
        return xi_s + (xi0 - xi_s) * std::exp(-r0 * t);
    }
    const double e = std::exp(-r0 * t);
    const double num = (xi0 - xi_s) * xi_l * e + xi_s * (xi_l - xi0);
    const double den = (xi0 - xi_s) * e + (xi_l - xi0);
    return num / den;
}

/// Closed-form solution of xi' = d1 - (q/2) xi + (d3/p_lo^2) xi^2.
inline double comparison_ode_closed_form(double d1, double d3, double q, double p_lo, double xi0,
                                         double t) {
    const ComparisonRoots roots = comparison_roots(d1, d3, q, p_lo);
    if (!roots.real) {
        throw std::invalid_argument("comparison_ode_closed_form: complex roots");
    }
    return comparison_xi(roots.xi_s, roots.xi_l, roots.r0, xi0, t);
}

/// Right side of the comparison system, for independent integration.
inline double comparison_rhs(double d1, double d3, double q, double p_lo, double xi) {
    return d1 - 0.5 * q * xi + d3 / (p_lo * p_lo) * xi * xi;
}

/// The state-norm envelope at time t.
inline double envelope(const ConstantsReport& r, const EnvelopeParams& env, double t) {
    const double xi = comparison_xi(r.xi_s, r.xi_l, r.r0, env.xi0, t);
    return r.lambda * std::sqrt(xi / r.p_lo) + r.B_bar * std::sqrt(r.epsilon / (2.0 * kPi));
}

/// Simplified envelope: explicit exponential decay at rate r0/2 toward the
/// ultimate bound. Always >= envelope(); used as the trajectory monitor.
inline double envelope_simplified(const ConstantsReport& r, const EnvelopeParams& env, double t) {
    double coef;
    if (std::isinf(r.xi_l)) {
        coef = std::sqrt(env.xi0 - r.xi_s);
    } else {
        coef = std::sqrt(r.xi_l * (env.xi0 - r.xi_s) / (r.xi_l - env.xi0));
    }
    return r.lambda / std::sqrt(r.p_lo) * (coef * std::exp(-0.5 * r.r0 * t) + std::sqrt(r.xi_s)) +
           r.B_bar * std::sqrt(r.epsilon / (2.0 * kPi));
}

/// Radius of the ball the state converges to.
inline double ultimate_bound(const ConstantsReport& r) { return r.B_star; }

struct SearchResult {
    bool found = false;
    double value = std::numeric_limits<double>::quiet_NaN();
    std::string note;
};

namespace detail {

/// Largest feasible parameter in [lo, hi]: geometric scan for a bracket,
/// then bisection of the feasibility boundary to 1e-3 relative width.
inline SearchResult search_boundary(const std::function<bool(double)>& feasible, double lo,
                                    double hi, const char* what) {
    SearchResult out;
    if (!(lo > 0.0) || !(hi > lo)) {
        out.note = std::string(what) + ": bad bracket";
        return out;
    }
    constexpr int kScan = 64;
    std::array<bool, kScan + 1> flag{};
    std::array<double, kScan + 1> grid{};
    int last_feasible = -1;
    for (int i = 0; i <= kScan; ++i) {
        grid[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / kScan);
        flag[static_cast<std::size_t>(i)] = feasible(grid[static_cast<std::size_t>(i)]);
        if (flag[static_cast<std::size_t>(i)]) last_feasible = i;
    }
    if (last_feasible < 0) {
        out.note = std::string("no feasible ") + what + " in bracket";
        return out;
    }
    for (int i = 1; i <= last_feasible; ++i) {
        if (!flag[static_cast<std::size_t>(i - 1)] && flag[static_cast<std::size_t>(i)]) {
            out.note = std::string(what) + ": feasibility not monotone across bracket; "
                       "returning largest feasible value";
            break;
        }
    }
    if (last_feasible == kScan) {
        out.found = true;
        out.value = hi;
        if (out.note.empty()) out.note = std::string(what) + ": feasible at bracket top";
        return out;
    }
    double a = grid[static_cast<std::size_t>(last_feasible)];
    double b = grid[static_cast<std::size_t>(last_feasible + 1)];
    while ((b - a) / a > 1e-3) {
        const double mid = std::sqrt(a * b);
        if (feasible(mid)) {
            a = mid;
        } else {
            b = mid;
        }
    }
    out.found = true;
    out.value = a;
    return out;
}

}  // namespace detail

/// Largest epsilon in [lo, hi] with all four conditions passing.
inline SearchResult epsilon_search(const SystemModel& model, const NoiseModel& noise,
                                   const Certificate& cert, double sigma0, double weight_a,
                                   double weight_b, double lo, double hi) {
    const SupNorms sup = compute_sup_norms(model);
    auto feasible = [&](double eps) {
        ESParams es;
        es.epsilon = eps;
        es.sigma0 = sigma0;
        es.weight_a = weight_a;
        es.weight_b = weight_b;
        return compute_constants(model, noise, cert, es, sup).feasible;
    };
    return detail::search_boundary(feasible, lo, hi, "epsilon");
}

/// Largest sigma0 in [lo, hi] with all four conditions passing, epsilon fixed.
inline SearchResult sigma0_search(const SystemModel& model, const NoiseModel& noise,
                                  const Certificate& cert, double epsilon, double weight_a,
                                  double weight_b, double lo, double hi) {
    const SupNorms sup = compute_sup_norms(model);
    ESParams es;
    es.epsilon = epsilon;
    es.sigma0 = lo;
    es.weight_a = weight_a;
    es.weight_b = weight_b;
    const ConstantsReport base = compute_constants(model, noise, cert, es, sup);
    auto feasible = [&](double s0) {
        const auto flags = check_assumption_conditions(base, s0);
        return flags[0].ok && flags[1].ok && flags[2].ok && flags[3].ok;
    };
    return detail::search_boundary(feasible, lo, hi, "sigma0");
}

}  // namespace esbound
