#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "esbound/smallmat.hpp"

namespace esbound {

/// Time-varying coefficient matrix. Closed-form descriptors carry exact
/// derivatives; tabulated ones interpolate linearly over one declared period.
/// The transformed kind (C * base(t + shift)) backs the delay-shifted input
/// vector and is not part of the scenario schema.
class TimeMat {
public:
    enum class Kind { Constant, SinCosColumn, CosScalar, Tabulated, Transformed };

    TimeMat() = default;

    static TimeMat constant(Mat value) {
        TimeMat f;
        f.kind_ = Kind::Constant;
        f.rows_ = value.rows();
        f.cols_ = value.cols();
        f.value_ = std::move(value);
        return f;
    }

    /// B(t) = [cos(beta t), sin(beta t)]^T
    static TimeMat sincos_column(double beta) {
        if (beta <= 0) throw std::invalid_argument("TimeMat: sincos beta must be > 0");
        TimeMat f;
        f.kind_ = Kind::SinCosColumn;
        f.rows_ = 2;
        f.cols_ = 1;
        f.beta_ = beta;
        f.period_ = 2.0 * kPi / beta;
        return f;
    }

    /// B(t) = cos(beta t), 1x1.
    static TimeMat cos_scalar(double beta) {
        if (beta <= 0) throw std::invalid_argument("TimeMat: cos beta must be > 0");
        TimeMat f;
        f.kind_ = Kind::CosScalar;
        f.rows_ = 1;
        f.cols_ = 1;
        f.beta_ = beta;
        f.period_ = 2.0 * kPi / beta;
        return f;
    }

    /// Piecewise-linear interpolation of (t, value) nodes. period > 0 wraps
    /// the evaluation time; period == 0 clamps outside the node span.
    static TimeMat tabulated(std::vector<double> times, std::vector<Mat> values, double period) {
        if (times.size() != values.size() || times.size() < 2) {
            throw std::invalid_argument("TimeMat: tabulated needs >= 2 matching nodes");
        }
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1])) {
                throw std::invalid_argument("TimeMat: tabulated times must be increasing");
            }
        }
        TimeMat f;
        f.kind_ = Kind::Tabulated;
        f.rows_ = values.front().rows();
        f.cols_ = values.front().cols();
        for (const Mat& v : values) {
            if (v.rows() != f.rows_ || v.cols() != f.cols_) {
                throw std::invalid_argument("TimeMat: tabulated node shapes differ");
            }
        }
        f.times_ = std::move(times);
        f.nodes_ = std::move(values);
        f.period_ = period;
        return f;
    }

    /// C * base(t + shift); inherits the base period.
    static TimeMat transformed(Mat left, TimeMat base, double shift) {
        if (left.cols() != base.rows()) {
            throw std::invalid_argument("TimeMat: transform shape mismatch");
        }
        TimeMat f;
        f.kind_ = Kind::Transformed;
        f.rows_ = left.rows();
        f.cols_ = base.cols();
        f.value_ = std::move(left);
        f.beta_ = 0.0;
        f.period_ = base.period_;
        f.shift_ = shift;
        f.base_ = std::make_shared<TimeMat>(std::move(base));
        return f;
    }

    Kind kind() const { return kind_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double beta() const { return beta_; }
    bool periodic() const { return kind_ == Kind::Constant || period_ > 0.0; }
    /// Declared period; 0 for constants and unwrapped tables.
    double period() const { return kind_ == Kind::Constant ? 0.0 : period_; }

    Mat eval(double t) const {
        switch (kind_) {
            case Kind::Constant:
                return value_;
            case Kind::SinCosColumn: {
                Mat v(2, 1);
                v(0, 0) = std::cos(beta_ * t);
                v(1, 0) = std::sin(beta_ * t);
                return v;
            }
            case Kind::CosScalar:
                return Mat::scalar(std::cos(beta_ * t));
            case Kind::Tabulated:
                return interp(t);
            case Kind::Transformed:
                return value_ * base_->eval(t + shift_);
        }
        throw std::logic_error("TimeMat: bad kind");
    }

    Mat deriv(double t) const {
        switch (kind_) {
            case Kind::Constant:
                return Mat::zeros(rows_, cols_);
            case Kind::SinCosColumn: {
                Mat v(2, 1);
                v(0, 0) = -beta_ * std::sin(beta_ * t);
                v(1, 0) = beta_ * std::cos(beta_ * t);
                return v;
            }
            case Kind::CosScalar:
                return Mat::scalar(-beta_ * std::sin(beta_ * t));
            case Kind::Tabulated: {
                const double span = period_ > 0 ? period_ : times_.back() - times_.front();
                const double h = span * 1e-6;
                return (interp(t + h) - interp(t - h)) * (0.5 / h);
            }
            case Kind::Transformed:
                return value_ * base_->deriv(t + shift_);
        }
        throw std::logic_error("TimeMat: bad kind");
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    Mat interp(double t) const {
        const double t0 = times_.front();
        const double t1 = times_.back();
        if (period_ > 0.0) {
            t = t0 + std::fmod(t - t0, period_);
            if (t < t0) t += period_;
        }
        if (t <= t0) return nodes_.front();
        if (t >= t1) {
            if (period_ > 0.0) {
                // wrapped point lands in [last node, t0 + period): blend to the first node
                const double seg = t0 + period_ - t1;
                if (seg > 0.0) {
                    const double w = (t - t1) / seg;
                    return nodes_.back() * (1.0 - w) + nodes_.front() * w;
                }
            }
            return nodes_.back();
        }
        std::size_t hi = 1;
        while (times_[hi] < t) ++hi;
        const double w = (t - times_[hi - 1]) / (times_[hi] - times_[hi - 1]);
        return nodes_[hi - 1] * (1.0 - w) + nodes_[hi] * w;
    }

    Kind kind_ = Kind::Constant;
    int rows_ = 0;
    int cols_ = 0;
    Mat value_;
    double beta_ = 0.0;
    double period_ = 0.0;
    double shift_ = 0.0;
    std::vector<double> times_;
    std::vector<Mat> nodes_;
    std::shared_ptr<const TimeMat> base_;
};

/// Scalar measurement-uncertainty signal delta(t).
class NoiseFn {
public:
    enum class Kind { Zero, Sinusoid, Tabulated };

    NoiseFn() = default;

    static NoiseFn zero() { return NoiseFn(); }

    /// delta(t) = amplitude * sin(2*pi*frequency*t), frequency in Hz.
    static NoiseFn sinusoid(double amplitude, double frequency) {
        NoiseFn f;
        f.kind_ = Kind::Sinusoid;
        f.amplitude_ = amplitude;
        f.omega_ = 2.0 * 3.14159265358979323846 * frequency;
        return f;
    }

    static NoiseFn tabulated(std::vector<double> times, std::vector<double> values,
                             double period) {
        std::vector<Mat> nodes;
        nodes.reserve(values.size());
        for (double v : values) nodes.push_back(Mat::scalar(v));
        NoiseFn f;
        f.kind_ = Kind::Tabulated;
        f.table_ = TimeMat::tabulated(std::move(times), std::move(nodes), period);
        return f;
    }

    Kind kind() const { return kind_; }

    double period() const {
        switch (kind_) {
            case Kind::Zero:
                return 0.0;
            case Kind::Sinusoid:
                return 2.0 * 3.14159265358979323846 / omega_;
            case Kind::Tabulated:
                return table_.period();
        }
        return 0.0;
    }

    double eval(double t) const {
        switch (kind_) {
            case Kind::Zero:
                return 0.0;
            case Kind::Sinusoid:
                return amplitude_ * std::sin(omega_ * t);
            case Kind::Tabulated:
                return table_.eval(t)(0, 0);
        }
        return 0.0;
    }

private:
    Kind kind_ = Kind::Zero;
    double amplitude_ = 0.0;
    double omega_ = 0.0;
    TimeMat table_;
};

}  // namespace esbound
