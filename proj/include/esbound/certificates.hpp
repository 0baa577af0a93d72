#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "esbound/scenario.hpp"
#include "esbound/smallmat.hpp"
#include "esbound/timefun.hpp"

namespace esbound {

/// Certified persistence-of-excitation data for B(t) over windows of
/// length Delta: b_lo bounds the windowed average of B B^T from below,
/// Gamma_bar bounds |Gamma(t)| / Delta from above.
struct PEReport {
    double Delta = 0.0;
    double b_lo = 0.0;
    double Gamma_bar = 0.0;
    /// Raw sampled minimum eigenvalue of the windowed average (no margin).
    double min_eig_trace = 0.0;
    bool ok = false;
    std::string diagnostic;
};

/// Lyapunov data (P(t), q, p_lo, p_hi, pdot_bar) with
/// P' + P H + H^T P <= -q P and p_lo I <= P <= p_hi I, |P'| <= pdot_bar.
struct Certificate {
    enum class Provenance { lemma1, floquet1d, user };

    std::function<Mat(double)> P;
    std::function<Mat(double)> Pdot;
    double q = 0.0;
    double p_lo = 0.0;
    double p_hi = 0.0;
    double pdot_bar = 0.0;
    Provenance provenance = Provenance::user;
    /// Period of P(t); 0 when constant.
    double period = 0.0;
};

/// Windowed average (1/Delta) \int_t^{t+Delta} B(l) B(l)^T dl.
inline Mat pe_window_average(const TimeMat& B, double Delta, double t, int quad_nodes = 256) {
    if (!(Delta > 0.0)) throw std::invalid_argument("pe_window_average: Delta must be > 0");
    auto f = [&](double l) {
        const Mat b = B.eval(l);
        return b * b.transpose();
    };
    return simpson(f, t, t + Delta, quad_nodes) * (1.0 / Delta);
}

/// Gamma(t) = (1/Delta) \int_t^{t+Delta} \int_m^t B(l) B(l)^T dl dm.
/// Swapping the integration order collapses the double integral to
/// -(1/Delta) \int_t^{t+Delta} (t + Delta - l) B(l) B(l)^T dl,
/// which one composite Simpson pass evaluates to ~1e-12 on smooth periodic B.
inline Mat gamma_of_t(const TimeMat& B, double Delta, double t, int quad_nodes = 512) {
    if (!(Delta > 0.0)) throw std::invalid_argument("gamma_of_t: Delta must be > 0");
    auto f = [&](double l) {
        const Mat b = B.eval(l);
        return (b * b.transpose()) * (t + Delta - l);
    };
    return simpson(f, t, t + Delta, quad_nodes) * (-1.0 / Delta);
}

/// Exact derivative of Gamma: B(t) B(t)^T minus the windowed average.
inline Mat gamma_dot(const TimeMat& B, double Delta, double t, int quad_nodes = 256) {
    const Mat b = B.eval(t);
    return b * b.transpose() - pe_window_average(B, Delta, t, quad_nodes);
}

/// Sample the PE condition over one period of B. b_lo is deflated and
/// Gamma_bar inflated by the sup-sampling margin so both stay certified
/// against the sampled extrema.
inline PEReport check_pe(const TimeMat& B, double Delta, int grid = 256) {
    if (!(Delta > 0.0)) throw std::invalid_argument("check_pe: Delta must be > 0");
    PEReport rep;
    rep.Delta = Delta;
    const double span = B.period() > 0.0 ? B.period() : Delta;
    double min_eig = std::numeric_limits<double>::infinity();
    double max_gamma = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double t = span * i / grid;
        min_eig = std::min(min_eig, sym_eig(pe_window_average(B, Delta, t)).min());
        max_gamma = std::max(max_gamma, opnorm(gamma_of_t(B, Delta, t)));
    }
    rep.min_eig_trace = min_eig;
    rep.b_lo = min_eig * (1.0 - kSupMargin);
    rep.Gamma_bar = (max_gamma / Delta) * (1.0 + kSupMargin);
    rep.ok = rep.b_lo > 0.0;
    if (!rep.ok) {
        rep.diagnostic = "PE fails: windowed average of B B^T has min eigenvalue " +
                         std::to_string(min_eig);
    }
    return rep;
}

/// Outcome of the PE-based certificate construction. condition_lhs is the
/// signed left side of the feasibility inequality (< 0 required), kept so
/// parameter searches can bisect on it.
struct Lemma1Result {
    bool feasible = false;
    double condition_lhs = 0.0;
    double w_star = 0.0;
    double rbar_a = 0.0;
    /// Pointwise-provable lower bound w* lmin(K)/2 - Delta Gamma_bar |K|^2.
    /// The published constant p_lo = w* lmin(K)/2 omits the Gamma deduction,
    /// so P(t) can dip below p_lo I; both values are reported and the
    /// verifier surfaces the signed margin.
    double p_lo_pointwise = 0.0;
    Certificate cert;
};

namespace detail {

/// sup over one period of the spectral radius of K A(t) + A(t)^T K,
/// inflated by the sampling margin.
inline double rbar_ka(const TimeMat& A, const Mat& K, int samples = kSupSamples) {
    const double period = A.period() > 0.0 ? A.period() : 1.0;
    double m = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t = period * i / samples;
        const Mat S = sym_part(K * A.eval(t)) * 2.0;
        m = std::max(m, spectral_radius_sym(S));
        if (A.kind() == TimeMat::Kind::Constant) break;
    }
    return m * (1.0 + kSupMargin);
}

}  // namespace detail

/// Feasibility inequality for the PE construction, exposed separately so the
/// delayed variant can reuse it with transformed constants:
///   rbar_a [1/2 + 2|K|^4 D^2 G^2 Bbar^2 L^3 / (b lmin^2(K))]
///     + 2 Abar D G |K|^2 L - (b/4) lmin^2(K)
/// with L = 1 for the undelayed case.
inline double lemma1_condition_lhs(double rbar_a, double K_norm, double K_lmin, double Delta,
                                   double Gamma_bar, double B_bar, double b_lo, double A_bar,
                                   double L = 1.0) {
    const double k4 = K_norm * K_norm * K_norm * K_norm;
    const double dg = Delta * Gamma_bar;
    const double lm2 = K_lmin * K_lmin;
    return rbar_a * (0.5 + 2.0 * k4 * dg * dg * B_bar * B_bar * L * L * L / (b_lo * lm2)) +
           2.0 * A_bar * dg * K_norm * K_norm * L - 0.25 * b_lo * lm2;
}

/// Build P(t) = w* K/2 + K Gamma(t) K from a PE report, with
/// p_lo, p_hi, q, pdot_bar as dictated by the construction.
inline Lemma1Result build_lemma1(const SystemModel& model, const PEReport& pe) {
    Lemma1Result out;
    if (!(pe.b_lo > 0.0)) {
        out.feasible = false;
        out.condition_lhs = std::numeric_limits<double>::infinity();
        return out;
    }
    const Mat K = sym_part(model.K);
    const SymEig ke = sym_eig(K);
    const double lmin = ke.min();
    const double lmax = ke.max();
    const double K_norm = std::max(std::abs(lmin), std::abs(lmax));

    out.rbar_a = detail::rbar_ka(model.A, K);
    out.condition_lhs = lemma1_condition_lhs(out.rbar_a, K_norm, lmin, pe.Delta, pe.Gamma_bar,
                                             model.B_bar, pe.b_lo, model.A_bar);
    out.feasible = out.condition_lhs < 0.0;

    const double k4 = K_norm * K_norm * K_norm * K_norm;
    const double dg = pe.Delta * pe.Gamma_bar;
    out.w_star = 1.0 + 4.0 * k4 * dg * dg * model.B_bar * model.B_bar / (pe.b_lo * lmin * lmin);

    Certificate cert;
    cert.provenance = Certificate::Provenance::lemma1;
    cert.p_lo = 0.5 * lmin * out.w_star;
    out.p_lo_pointwise = 0.5 * lmin * out.w_star - dg * K_norm * K_norm;
    cert.p_hi = 0.5 * lmax * out.w_star + dg * K_norm * K_norm;
    cert.q = pe.b_lo * lmin * lmin / (2.0 * cert.p_hi);
    cert.pdot_bar = 2.0 * model.B_bar * model.B_bar * K_norm * K_norm;
    cert.period = model.B.period();
    const TimeMat B = model.B;
    const double Delta = pe.Delta;
    const double w = out.w_star;
    cert.P = [K, B, Delta, w](double t) {
        return K * (0.5 * w) + K * gamma_of_t(B, Delta, t) * K;
    };
    cert.Pdot = [K, B, Delta](double t) { return K * gamma_dot(B, Delta, t) * K; };
    out.cert = cert;
    return out;
}

/// Floquet certificate for the 1-D plant x' = a(t) x + cos(beta t) u with
/// gain k: P(t) = exp((k/2beta) sin(2 beta t)), q = k - 2 sup|a|.
struct Floquet1DResult {
    bool feasible = false;
    double margin = 0.0;  // k - 2 sup|a|; feasible iff > 0
    Certificate cert;
};

inline Floquet1DResult floquet1d(double k, double beta, double A_sup) {
    Floquet1DResult out;
    out.margin = k - 2.0 * A_sup;
    out.feasible = out.margin > 0.0;
    if (!out.feasible) return out;

    Certificate cert;
    cert.provenance = Certificate::Provenance::floquet1d;
    const double r = k / (2.0 * beta);
    cert.q = out.margin;
    cert.p_lo = std::exp(-r);
    cert.p_hi = std::exp(r);
    cert.pdot_bar = k * std::exp(r);
    cert.period = kPi / beta;
    cert.P = [r, beta](double t) { return Mat::scalar(std::exp(r * std::sin(2.0 * beta * t))); };
    cert.Pdot = [r, beta, k](double t) {
        return Mat::scalar(k * std::cos(2.0 * beta * t) * std::exp(r * std::sin(2.0 * beta * t)));
    };
    out.cert = cert;
    return out;
}

/// Certificate from user-supplied Lyapunov data; Pdot by central differences
/// when the descriptor has no exact derivative.
inline Certificate certificate_from_user(const UserCertificateSpec& spec) {
    Certificate cert;
    cert.provenance = Certificate::Provenance::user;
    cert.q = spec.q;
    cert.p_lo = spec.p_lo;
    cert.p_hi = spec.p_hi;
    cert.pdot_bar = spec.pdot_bar;
    cert.period = spec.P.period();
    const TimeMat P = spec.P;
    cert.P = [P](double t) { return sym_part(P.eval(t)); };
    cert.Pdot = [P](double t) { return sym_part(P.deriv(t)); };
    return cert;
}

/// Grid check of the certificate inequalities against a model:
/// max eigenvalue of P' + P H + H^T P + q P over the grid (<= 0 wanted),
/// plus the sampled slack in the p_lo / p_hi / pdot_bar bounds.
struct CertificateCheck {
    double max_lmi_eig = 0.0;
    double worst_t = 0.0;
    double p_lo_margin = 0.0;   // min over grid of lambda_min(P) - p_lo
    double p_hi_margin = 0.0;   // min over grid of p_hi - lambda_max(P)
    double pdot_margin = 0.0;   // min over grid of pdot_bar - |P'|
    bool ok = false;
    std::string diagnostic;
};

inline Mat closed_loop_H(const SystemModel& model, double t) {
    const Mat b = model.B.eval(t);
    return model.A.eval(t) - b * b.transpose() * model.K;
}

inline CertificateCheck verify_certificate(const Certificate& cert, const SystemModel& model,
                                           int grid = 2048, double tol = 1e-8) {
    CertificateCheck out;
    double span = std::max({cert.period, model.A.period(), model.B.period()});
    if (!(span > 0.0)) span = 1.0;

    out.max_lmi_eig = -std::numeric_limits<double>::infinity();
    out.p_lo_margin = std::numeric_limits<double>::infinity();
    out.p_hi_margin = std::numeric_limits<double>::infinity();
    out.pdot_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double t = span * i / grid;
        const Mat P = cert.P(t);
        const Mat Pd = cert.Pdot(t);
        const Mat H = closed_loop_H(model, t);
        const Mat S = Pd + sym_part(P * H) * 2.0 + P * cert.q;
        const double e = sym_eig(S).max();
        if (e > out.max_lmi_eig) {
            out.max_lmi_eig = e;
            out.worst_t = t;
        }
        const SymEig pe = sym_eig(P);
        out.p_lo_margin = std::min(out.p_lo_margin, pe.min() - cert.p_lo);
        out.p_hi_margin = std::min(out.p_hi_margin, cert.p_hi - pe.max());
        out.pdot_margin = std::min(out.pdot_margin, cert.pdot_bar - opnorm(Pd));
    }
    // Rejection is on the decay inequality; the p_lo/p_hi/pdot margins are
    // reported signed (the published PE construction understates p_lo).
    out.ok = out.max_lmi_eig <= tol;
    if (!out.ok) {
        out.diagnostic = "certificate rejected: max LMI eigenvalue " +
                         std::to_string(out.max_lmi_eig) + " at t = " + std::to_string(out.worst_t);
    }
    return out;
}

/// Pick the natural certificate for a scenario: user data when supplied,
/// the Floquet closed form for 1-D cos-dither plants, the PE construction
/// otherwise.
struct AutoCertificate {
    Certificate cert;
    PEReport pe;          // only meaningful for lemma1 provenance
    bool feasible = false;
    double condition_lhs = 0.0;
    std::string method;
};

inline AutoCertificate auto_certificate(const Scenario& sc) {
    AutoCertificate out;
    if (sc.certificate.has_value()) {
        out.cert = certificate_from_user(*sc.certificate);
        out.feasible = true;
        out.method = "user";
        return out;
    }
    if (sc.model.n == 1 && sc.model.B.kind() == TimeMat::Kind::CosScalar) {
        const double k = sym_part(sc.model.K)(0, 0);
        const Floquet1DResult fl = floquet1d(k, sc.model.B.beta(), sc.model.A_bar);
        out.feasible = fl.feasible;
        out.condition_lhs = -fl.margin;
        out.method = "floquet1d";
        if (fl.feasible) out.cert = fl.cert;
        return out;
    }
    const double Delta = sc.pe_window > 0.0 ? sc.pe_window
                         : (sc.model.B.period() > 0.0 ? sc.model.B.period() : 1.0);
    out.pe = check_pe(sc.model.B, Delta);
    out.method = "lemma1";
    if (!out.pe.ok) {
        out.feasible = false;
        out.condition_lhs = std::numeric_limits<double>::infinity();
        return out;
    }
    const Lemma1Result l1 = build_lemma1(sc.model, out.pe);
    out.feasible = l1.feasible;
    out.condition_lhs = l1.condition_lhs;
    if (l1.feasible) out.cert = l1.cert;
    return out;
}

}  // namespace esbound
