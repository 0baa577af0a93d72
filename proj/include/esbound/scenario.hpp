#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "esbound/smallmat.hpp"
#include "esbound/timefun.hpp"

namespace esbound {

inline constexpr double kPi = 3.14159265358979323846;
/// Relative safety margin applied to every sampled supremum.
inline constexpr double kSupMargin = 1e-3;
/// Default grid density for supremum sampling (points per period).
inline constexpr int kSupSamples = 4096;

/// Scenario validation failure; carries a field-path diagnostic.
class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

/// The plant: x' = A(t) x + B(t) u with declared coefficient bounds and the
/// measurement gain K. K is stored symmetrized (the quadratic form only sees
/// the symmetric part); the original input is kept for reporting.
struct SystemModel {
    int n = 0;
    TimeMat A;
    TimeMat B;
    double A_bar = 0.0;
    double B_bar = 0.0;
    double DB_bar = 0.0;
    Mat K;
    Mat K_input;
};

struct NoiseModel {
    double delta_bar = 0.0;
    NoiseFn delta;
};

struct Xi0Policy {
    enum class Kind { Midpoint, Fraction };
    Kind kind = Kind::Fraction;
    double fraction = 0.01;
};

struct ESParams {
    double epsilon = 0.0;
    double sigma0 = 1.0;
    double weight_a = 1.0;
    double weight_b = 1.0;
    Xi0Policy xi0_policy;
};

struct DelaySpec {
    enum class Kind { None, Measurement, Input };
    Kind kind = Kind::None;
    double tau = 0.0;
};

/// Optional user-supplied Lyapunov data carried by the scenario document.
struct UserCertificateSpec {
    TimeMat P;
    double q = 0.0;
    double p_lo = 0.0;
    double p_hi = 0.0;
    double pdot_bar = 0.0;
};

struct Scenario {
    std::string name;
    SystemModel model;
    NoiseModel noise;
    ESParams es;
    DelaySpec delay;
    std::optional<UserCertificateSpec> certificate;
    /// PE window length for Lemma-1 certificates; defaults to the B period.
    double pe_window = 0.0;
};

/// Max of |f| over a uniform grid of `samples` points spanning one period,
/// inflated by the relative margin. Constants still get the margin so every
/// derived bound stays on the safe side of the sampled value.
inline double sup_over_time(const std::function<double(double)>& f, double period,
                            int samples = kSupSamples, double margin = kSupMargin) {
    if (!(period > 0.0)) {
        throw std::invalid_argument("sup_over_time: descriptor has no declared period");
    }
    double m = 0.0;
    for (int i = 0; i < samples; ++i) {
        m = std::max(m, std::abs(f(period * i / samples)));
    }
    return m * (1.0 + margin);
}

/// Common sampling period for a model whose coefficients are constant or
/// share commensurate periods. Constants alone fall back to 1 second.
inline double sampling_period(const SystemModel& model) {
    const double pa = model.A.period();
    const double pb = model.B.period();
    const double p = std::max(pa, pb);
    return p > 0.0 ? p : 1.0;
}

namespace detail {

inline double raw_sup(const std::function<double(double)>& f, double period, int samples) {
    double m = 0.0;
    for (int i = 0; i < samples; ++i) m = std::max(m, std::abs(f(period * i / samples)));
    return m;
}

inline void validate_model(const SystemModel& model) {
    if (model.n < 1 || model.n > kMaxDim) {
        throw ScenarioError("model.n: must be in [1, " + std::to_string(kMaxDim) + "]");
    }
    if (model.A.rows() != model.n || model.A.cols() != model.n) {
        throw ScenarioError("model.A: expected " + std::to_string(model.n) + "x" +
                            std::to_string(model.n) + ", got " + model.A.eval(0.0).shape_str());
    }
    if (model.B.rows() != model.n || model.B.cols() != 1) {
        throw ScenarioError("model.B: expected " + std::to_string(model.n) + "x1 column");
    }
    if (model.K.rows() != model.n || model.K.cols() != model.n) {
        throw ScenarioError("model.K: expected " + std::to_string(model.n) + "x" +
                            std::to_string(model.n));
    }
    const SymEig ke = sym_eig(sym_part(model.K));
    if (!(ke.min() > 0.0)) {
        throw ScenarioError("model.K: K not positive definite (lambda_min of symmetric part = " +
                            std::to_string(ke.min()) + ")");
    }
    const double period = sampling_period(model);
    const int samples = 2048;
    const double tol = 1e-9;
    const double a_max = raw_sup([&](double t) { return opnorm(model.A.eval(t)); }, period, samples);
    if (a_max > model.A_bar * (1.0 + tol) + 1e-12) {
        throw ScenarioError("model.bounds.A_bar: declared " + std::to_string(model.A_bar) +
                            " below sampled sup |A(t)| = " + std::to_string(a_max));
    }
    const double b_max = raw_sup([&](double t) { return vec_norm(model.B.eval(t)); }, period, samples);
    if (b_max > model.B_bar * (1.0 + tol) + 1e-12) {
        throw ScenarioError("model.bounds.B_bar: declared " + std::to_string(model.B_bar) +
                            " below sampled sup |B(t)| = " + std::to_string(b_max));
    }
    const double db_max =
        raw_sup([&](double t) { return vec_norm(model.B.deriv(t)); }, period, samples);
    if (db_max > model.DB_bar * (1.0 + tol) + 1e-9 * std::max(1.0, db_max)) {
        throw ScenarioError("model.bounds.DB_bar: declared " + std::to_string(model.DB_bar) +
                            " below sampled sup |B'(t)| = " + std::to_string(db_max));
    }
}

inline void validate_noise(const NoiseModel& noise) {
    if (noise.delta_bar < 0.0) throw ScenarioError("noise.delta_bar: must be >= 0");
    const double span = noise.delta.period() > 0.0 ? noise.delta.period() : 1.0;
    const double sampled = raw_sup([&](double t) { return noise.delta.eval(t); }, span, 1024);
    if (sampled > noise.delta_bar * (1.0 + 1e-9) + 1e-12) {
        throw ScenarioError("noise.delta_bar: declared bound below sampled |delta(t)|");
    }
}

inline void validate_es(const ESParams& es) {
    if (!(es.epsilon > 0.0)) throw ScenarioError("es.epsilon: must be > 0");
    if (!(es.sigma0 > 0.0)) throw ScenarioError("es.sigma0: must be > 0");
    if (!(es.weight_a > 0.0)) throw ScenarioError("es.a: must be > 0");
    if (!(es.weight_b > 0.0)) throw ScenarioError("es.b: must be > 0");
    if (es.xi0_policy.kind == Xi0Policy::Kind::Fraction &&
        !(es.xi0_policy.fraction > 0.0 && es.xi0_policy.fraction < 1.0)) {
        throw ScenarioError("es.xi0_policy.f: fraction must be in (0,1)");
    }
}

}  // namespace detail

inline void validate_scenario(const Scenario& sc) {
    detail::validate_model(sc.model);
    detail::validate_noise(sc.noise);
    detail::validate_es(sc.es);
    if (sc.delay.kind != DelaySpec::Kind::None && !(sc.delay.tau > 0.0)) {
        throw ScenarioError("delay.tau: must be > 0 when a delay kind is set");
    }
}

// ---------------------------------------------------------------------------
// Built-in scenarios (the paper's three running examples)
// ---------------------------------------------------------------------------

/// Planar robot with failed angular actuator: A = [[2.1,4.9],[-7.5,3.6]],
/// B(t) = [cos(beta t), sin(beta t)]^T.
inline Scenario builtin_robot2d(double beta = 1e4, double K_scale = 300.0) {
    Scenario sc;
    sc.name = "robot2d";
    const Mat A = Mat::from_rows({{2.1, 4.9}, {-7.5, 3.6}});
    sc.model.n = 2;
    sc.model.A = TimeMat::constant(A);
    sc.model.B = TimeMat::sincos_column(beta);
    sc.model.A_bar = opnorm(A);
    sc.model.B_bar = 1.0;
    sc.model.DB_bar = beta;
    sc.model.K = Mat::identity(2) * K_scale;
    sc.model.K_input = sc.model.K;
    sc.noise.delta_bar = 0.0;
    sc.es.epsilon = 1e-7;
    sc.es.sigma0 = 1.0;
    sc.es.weight_a = 0.1;
    sc.es.weight_b = 1.0;
    sc.pe_window = 2.0 * kPi / beta;
    return sc;
}

/// Scalar plant x' = a(t) x + cos(beta t) u with a(t) = 1 and gain k.
inline Scenario builtin_scalar1d(double beta = 500.0, double k = 20.0) {
    Scenario sc;
    sc.name = "scalar1d";
    sc.model.n = 1;
    sc.model.A = TimeMat::constant(Mat::scalar(1.0));
    sc.model.B = TimeMat::cos_scalar(beta);
    sc.model.A_bar = 1.0;
    sc.model.B_bar = 1.0;
    sc.model.DB_bar = beta;
    sc.model.K = Mat::scalar(k);
    sc.model.K_input = sc.model.K;
    sc.es.epsilon = 1e-5;
    sc.es.sigma0 = 1.0;
    sc.es.weight_a = 0.1;
    sc.es.weight_b = 1.0;
    sc.pe_window = 2.0 * kPi / beta;
    return sc;
}

/// The basic scalar integrator x' = u.
inline Scenario builtin_integrator() {
    Scenario sc;
    sc.name = "integrator";
    sc.model.n = 1;
    sc.model.A = TimeMat::constant(Mat::scalar(0.0));
    sc.model.B = TimeMat::constant(Mat::scalar(1.0));
    sc.model.A_bar = 0.0;
    sc.model.B_bar = 1.0;
    sc.model.DB_bar = 0.0;
    sc.model.K = Mat::scalar(1.0);
    sc.model.K_input = sc.model.K;
    sc.es.epsilon = 1e-2;
    sc.es.sigma0 = 1.0;
    sc.es.weight_a = 0.1;
    sc.es.weight_b = 0.9;
    // P = K = 1, q = 2 is exact here
    UserCertificateSpec cert;
    cert.P = TimeMat::constant(Mat::scalar(1.0));
    cert.q = 2.0;
    cert.p_lo = 1.0;
    cert.p_hi = 1.0;
    cert.pdot_bar = 0.0;
    sc.certificate = cert;
    sc.pe_window = 1.0;
    return sc;
}

// ---------------------------------------------------------------------------
// JSON ingestion
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline Mat parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ScenarioError(path + ": expected nested array");
    if (j.front().is_number()) {
        Mat m(static_cast<int>(j.size()), 1);
        for (int i = 0; i < m.rows(); ++i) m(i, 0) = j.at(static_cast<std::size_t>(i)).get<double>();
        return m;
    }
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j.front().size());
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<int>(row.size()) != cols) throw ScenarioError(path + ": ragged rows");
        for (int jj = 0; jj < cols; ++jj) m(i, jj) = row.at(static_cast<std::size_t>(jj)).get<double>();
    }
    return m;
}

inline TimeMat parse_timemat(const json& j, const std::string& path) {
    if (j.is_array()) return TimeMat::constant(parse_matrix(j, path));
    if (j.is_number()) return TimeMat::constant(Mat::scalar(j.get<double>()));
    if (!j.is_object() || !j.contains("type")) {
        throw ScenarioError(path + ": expected matrix literal or tagged object");
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "constant") return TimeMat::constant(parse_matrix(j.at("value"), path + ".value"));
    if (type == "sincos") return TimeMat::sincos_column(j.at("beta").get<double>());
    if (type == "cos") return TimeMat::cos_scalar(j.at("beta").get<double>());
    if (type == "tabulated") {
        std::vector<double> times;
        std::vector<Mat> values;
        for (const auto& node : j.at("nodes")) {
            times.push_back(node.at("t").get<double>());
            values.push_back(parse_matrix(node.at("value"), path + ".nodes.value"));
        }
        return TimeMat::tabulated(std::move(times), std::move(values),
                                  j.value("period", 0.0));
    }
    throw ScenarioError(path + ".type: unknown time-function type '" + type + "'");
}

inline NoiseFn parse_noise_fn(const json& j, const std::string& path) {
    if (j.is_null()) return NoiseFn::zero();
    const std::string type = j.at("type").get<std::string>();
    if (type == "zero") return NoiseFn::zero();
    if (type == "sinusoid") {
        return NoiseFn::sinusoid(j.at("amplitude").get<double>(), j.at("frequency").get<double>());
    }
    if (type == "tabulated") {
        std::vector<double> times;
        std::vector<double> values;
        for (const auto& node : j.at("nodes")) {
            times.push_back(node.at("t").get<double>());
            values.push_back(node.at("value").get<double>());
        }
        return NoiseFn::tabulated(std::move(times), std::move(values), j.value("period", 0.0));
    }
    throw ScenarioError(path + ".type: unknown noise type '" + type + "'");
}

inline void apply_common_overrides(Scenario& sc, const json& doc) {
    if (doc.contains("noise")) {
        const auto& jn = doc.at("noise");
        sc.noise.delta_bar = jn.value("delta_bar", sc.noise.delta_bar);
        if (jn.contains("delta")) sc.noise.delta = parse_noise_fn(jn.at("delta"), "noise.delta");
    }
    if (doc.contains("es")) {
        const auto& je = doc.at("es");
        sc.es.epsilon = je.value("epsilon", sc.es.epsilon);
        sc.es.sigma0 = je.value("sigma0", sc.es.sigma0);
        sc.es.weight_a = je.value("a", sc.es.weight_a);
        sc.es.weight_b = je.value("b", sc.es.weight_b);
        if (je.contains("xi0_policy")) {
            const auto& jp = je.at("xi0_policy");
            if (jp.is_string() && jp.get<std::string>() == "midpoint") {
                sc.es.xi0_policy.kind = Xi0Policy::Kind::Midpoint;
            } else if (jp.is_object()) {
                sc.es.xi0_policy.kind = Xi0Policy::Kind::Fraction;
                sc.es.xi0_policy.fraction = jp.value("f", 0.01);
            }
        }
    }
    if (doc.contains("delay")) {
        const auto& jd = doc.at("delay");
        const std::string kind = jd.value("kind", std::string("input"));
        if (kind == "measurement") {
            sc.delay.kind = DelaySpec::Kind::Measurement;
        } else if (kind == "input") {
            sc.delay.kind = DelaySpec::Kind::Input;
        } else {
            throw ScenarioError("delay.kind: must be 'measurement' or 'input'");
        }
        sc.delay.tau = jd.value("tau", 0.0);
    }
    if (doc.contains("certificate")) {
        const auto& jc = doc.at("certificate");
        if (jc.contains("P")) {
            UserCertificateSpec cert;
            cert.P = parse_timemat(jc.at("P"), "certificate.P");
            cert.q = jc.at("q").get<double>();
            cert.p_lo = jc.at("p_lo").get<double>();
            cert.p_hi = jc.at("p_hi").get<double>();
            cert.pdot_bar = jc.at("pdot_bar").get<double>();
            sc.certificate = cert;
        }
    }
    if (doc.contains("pe_window")) sc.pe_window = doc.at("pe_window").get<double>();
}

}  // namespace detail

/// Parse and validate a scenario document. Built-in names expand to the
/// paper-preset systems; explicit documents follow the schema in the README.
inline Scenario load_scenario(const nlohmann::json& doc) {
    using detail::json;
    Scenario sc;
    try {
        if (doc.contains("builtin")) {
            const std::string name = doc.at("builtin").get<std::string>();
            if (name == "robot2d") {
                sc = builtin_robot2d(doc.value("beta", 1e4), doc.value("K_scale", 300.0));
            } else if (name == "scalar1d") {
                sc = builtin_scalar1d(doc.value("beta", 500.0),
                                      doc.value("k", doc.value("K_scale", 20.0)));
            } else if (name == "integrator") {
                sc = builtin_integrator();
            } else {
                throw ScenarioError("builtin: unknown scenario '" + name + "'");
            }
            if (doc.contains("epsilon")) sc.es.epsilon = doc.at("epsilon").get<double>();
            if (doc.contains("sigma0")) sc.es.sigma0 = doc.at("sigma0").get<double>();
            if (doc.contains("a")) sc.es.weight_a = doc.at("a").get<double>();
            if (doc.contains("b")) sc.es.weight_b = doc.at("b").get<double>();
        } else {
            sc.name = doc.value("name", std::string("custom"));
            sc.model.n = doc.at("n").get<int>();
            sc.model.A = detail::parse_timemat(doc.at("A"), "A");
            sc.model.B = detail::parse_timemat(doc.at("B"), "B");
            const auto& jb = doc.at("bounds");
            sc.model.A_bar = jb.at("A_bar").get<double>();
            sc.model.B_bar = jb.at("B_bar").get<double>();
            sc.model.DB_bar = jb.at("DB_bar").get<double>();
            sc.model.K_input = detail::parse_matrix(doc.at("K"), "K");
            sc.model.K = sym_part(sc.model.K_input);
            if (sc.pe_window == 0.0) {
                sc.pe_window = sc.model.B.period() > 0 ? sc.model.B.period() : 1.0;
            }
        }
        detail::apply_common_overrides(sc, doc);
        validate_scenario(sc);
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("scenario: malformed document: ") + e.what());
    }
    return sc;
}

inline Scenario load_scenario_string(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(std::string("scenario: JSON parse error: ") + e.what());
    }
    return load_scenario(doc);
}

}  // namespace esbound
