#ifndef INKFLOW_CIR_MODEL_HPP
#define INKFLOW_CIR_MODEL_HPP

// Analytical channel impulse response of an advection-dominated Poiseuille
// channel with a Beta-distributed radial release profile, plus finite
// injection pulses and exhaustive-search fitting of the shape parameters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "inkflow/error.hpp"

namespace inkflow::cir {

struct BetaInitParams {
    double alpha = 2.0;
    double beta = 3.0;

    void validate() const {
        detail::require_positive(alpha, "alpha");
        detail::require_positive(beta, "beta");
    }
};

struct CirParams {
    BetaInitParams init;
    double scale_c = 1.0;  // dimensionless C; 0 only for a degenerate fit
    double l_c = 0.235;    // [m]
    double v_max = 0.1658;  // [m/s]

    double arrival_time() const noexcept { return l_c / v_max; }

    void validate() const {
        init.validate();
        if (!(scale_c >= 0.0)) throw DomainError("scale_c must be >= 0");
        detail::require_positive(l_c, "l_c");
        detail::require_positive(v_max, "v_max");
    }
};

/// A sampled value that may be the +infinity limit of an integrable singularity.
class PointValue {
public:
    static PointValue finite(double v) noexcept { return PointValue(v, false); }
    static PointValue singular() noexcept { return PointValue(0.0, true); }

    bool is_singular() const noexcept { return singular_; }
    /// Value, or +inf for a singular point.
    double value() const noexcept {
        return singular_ ? std::numeric_limits<double>::infinity() : value_;
    }

private:
    PointValue(double v, bool s) noexcept : value_(v), singular_(s) {}
    double value_;
    bool singular_;
};

struct SampledTrace {
    std::vector<double> times;
    std::vector<double> values;

    std::size_t size() const noexcept { return times.size(); }
    bool empty() const noexcept { return times.empty(); }
};

namespace detail {

inline void require_grid(std::span<const double> times) {
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] >= 0.0)) throw DomainError("sample times must be >= 0");
        if (k > 0 && !(times[k] > times[k - 1]))
            throw DomainError("sample times must be strictly increasing (index " +
                              std::to_string(k) + ")");
    }
}

}  // namespace detail

/// log(Gamma(a+b) / (Gamma(a) Gamma(b))).
inline double log_beta_normalizer(double alpha, double beta) {
    return std::lgamma(alpha + beta) - std::lgamma(alpha) - std::lgamma(beta);
}

// f(s) = s^(a-1) (1-s)^(b-1) / B(a, b) on s = rho^2 / r_c^2.
inline PointValue beta_pdf(double s, const BetaInitParams& p) {
    p.validate();
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("beta_pdf: s outside [0, 1]");
    const double lnorm = log_beta_normalizer(p.alpha, p.beta);
    auto endpoint = [&](double exponent_param, double other_param) {
        if (exponent_param < 1.0) return PointValue::singular();
        if (exponent_param > 1.0) return PointValue::finite(0.0);
        // exponent == 1: f = (1/B) * 1^(other-1)
        (void)other_param;
        return PointValue::finite(std::exp(lnorm));
    };
    if (s == 0.0) return endpoint(p.alpha, p.beta);
    if (s == 1.0) return endpoint(p.beta, p.alpha);
    return PointValue::finite(
        std::exp(lnorm + (p.alpha - 1.0) * std::log(s) + (p.beta - 1.0) * std::log1p(-s)));
}

/// Integral of beta_pdf over [0, 1] by tanh-sinh quadrature (handles the
/// integrable endpoint singularities for alpha, beta < 1).
inline double beta_pdf_mass(const BetaInitParams& p) {
    p.validate();
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double lnorm = log_beta_normalizer(p.alpha, p.beta);
    auto f = [&](double s, double s_complement) {
        // s_complement = 1 - s evaluated without cancellation near s = 1
        const double one_minus = (s > 0.5) ? s_complement : 1.0 - s;
        if (s <= 0.0 || one_minus <= 0.0) return 0.0;
        return std::exp(lnorm + (p.alpha - 1.0) * std::log(s) +
                        (p.beta - 1.0) * std::log(one_minus));
    };
    return integrator.integrate(f, 0.0, 1.0);
}

// h(t) = C f-normalizer (1-u)^(a-1) u^b with u = t_a / t for t >= t_a, else 0.
inline PointValue cir_value(double t, const CirParams& p) {
    p.validate();
    if (!(t >= 0.0)) throw DomainError("cir_value: t must be >= 0");
    const double ta = p.arrival_time();
    if (t < ta) return PointValue::finite(0.0);
    const double u = ta / t;
    const double lnorm = log_beta_normalizer(p.init.alpha, p.init.beta);
    if (u >= 1.0) {
        if (p.init.alpha > 1.0) return PointValue::finite(0.0);
        if (p.init.alpha < 1.0) return PointValue::singular();
        return PointValue::finite(p.scale_c * std::exp(lnorm));
    }
    return PointValue::finite(p.scale_c * std::exp(lnorm + (p.init.alpha - 1.0) * std::log1p(-u) +
                                                   p.init.beta * std::log(u)));
}

/// Finite value at t, clamping the alpha < 1 arrival singularity to the
/// value at the next representable time after t.
inline double cir_value_clamped(double t, const CirParams& p) {
    auto v = cir_value(t, p);
    while (v.is_singular()) {
        t = std::nextafter(t, std::numeric_limits<double>::infinity());
        v = cir_value(t, p);
    }
    return v.value();
}

/// Vectorized h(t). A singular sample (exactly at arrival, alpha < 1) takes
/// the value of the next grid sample (next representable time for the last
/// sample) and is reported as "cir-singularity-clamped".
inline SampledTrace cir_series(const CirParams& p, std::span<const double> times,
                               Diagnostics* diag = nullptr) {
    p.validate();
    detail::require_grid(times);
    SampledTrace out;
    out.times.assign(times.begin(), times.end());
    out.values.resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        const auto v = cir_value(times[k], p);
        if (!v.is_singular()) {
            out.values[k] = v.value();
            continue;
        }
        out.values[k] = (k + 1 < times.size()) ? cir_value_clamped(times[k + 1], p)
                                               : cir_value_clamped(times[k], p);
        inkflow::detail::warn(diag, "cir-singularity-clamped",
                              "h(t) diverges at t = " + std::to_string(times[k]) +
                                  " (alpha < 1); clamped to the next sample");
    }
    return out;
}

/// Time of the maximum of h: t_a (alpha <= 1) or l_c (a + b - 1) / (v_max b).
inline double peak_time(const CirParams& p) {
    p.validate();
    const double a = p.init.alpha, b = p.init.beta;
    if (a <= 1.0) return p.arrival_time();
    return p.l_c * (a + b - 1.0) / (p.v_max * b);
}

/// Scale C that makes the instantaneous-release peak equal to 1.
inline double unit_peak_scale(const BetaInitParams& init) {
    init.validate();
    if (init.alpha < 1.0) throw DomainError("unit_peak_scale: h is unbounded for alpha < 1");
    CirParams p;
    p.init = init;
    p.scale_c = 1.0;
    return 1.0 / cir_value(peak_time(p), p).value();
}

/// Number of midpoint sub-intervals for a rectangular injection window:
/// at least 10 per output sample period, never fewer than 16.
inline std::size_t convolution_substeps(double t_inj, double sample_period) {
    if (t_inj <= 0.0) return 1;
    const double width = sample_period / 10.0;
    const auto n = static_cast<std::size_t>(std::ceil(t_inj / width - 1e-9));
    return std::max<std::size_t>(n, 16);
}

/// h convolved with a unit-area rectangle of width t_inj, evaluated at t
/// by the midpoint rule with `substeps` intervals.
inline double pulse_value(const CirParams& p, double t_inj, double t, std::size_t substeps) {
    if (!(t_inj >= 0.0)) throw DomainError("pulse_response: t_inj must be >= 0");
    if (t < 0.0) return 0.0;
    if (t_inj == 0.0) return cir_value_clamped(t, p);
    const double ta = p.arrival_time();
    if (t < ta) return 0.0;
    const double w = t_inj / static_cast<double>(substeps);
    double acc = 0.0;
    for (std::size_t j = 0; j < substeps; ++j) {
        const double tau = (static_cast<double>(j) + 0.5) * w;
        const double s = t - tau;
        if (s < ta) break;
        acc += cir_value_clamped(s, p);
    }
    return acc / static_cast<double>(substeps);
}

inline double min_spacing(std::span<const double> times) {
    double dt = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < times.size(); ++k) dt = std::min(dt, times[k] - times[k - 1]);
    return dt;
}

inline SampledTrace pulse_response(const CirParams& p, double t_inj, std::span<const double> times,
                                   Diagnostics* diag = nullptr) {
    if (!(t_inj >= 0.0)) throw DomainError("pulse_response: t_inj must be >= 0");
    if (t_inj == 0.0) return cir_series(p, times, diag);
    p.validate();
    detail::require_grid(times);
    const double period = times.size() > 1 ? min_spacing(times) : t_inj;
    const std::size_t n = convolution_substeps(t_inj, period);
    SampledTrace out;
    out.times.assign(times.begin(), times.end());
    out.values.reserve(times.size());
    for (double t : times) out.values.push_back(pulse_value(p, t_inj, t, n));
    return out;
}

struct FitGrid {
    double alpha_lo = 0.5;
    double alpha_hi = 6.0;
    std::size_t alpha_steps = 56;
    double beta_lo = 0.5;
    double beta_hi = 6.0;
    std::size_t beta_steps = 56;

    double alpha_at(std::size_t i) const {
        return alpha_lo + (alpha_hi - alpha_lo) * static_cast<double>(i) /
                              static_cast<double>(alpha_steps - 1);
    }
    double beta_at(std::size_t j) const {
        return beta_lo + (beta_hi - beta_lo) * static_cast<double>(j) /
                             static_cast<double>(beta_steps - 1);
    }
    double alpha_resolution() const {
        return (alpha_hi - alpha_lo) / static_cast<double>(alpha_steps - 1);
    }
    double beta_resolution() const {
        return (beta_hi - beta_lo) / static_cast<double>(beta_steps - 1);
    }

    void validate() const {
        if (!(alpha_lo > 0.0 && alpha_hi >= alpha_lo && beta_lo > 0.0 && beta_hi >= beta_lo))
            throw DomainError("fit grid ranges must be positive and ordered");
        if (alpha_steps < 2 || beta_steps < 2)
            throw DomainError("fit grid needs at least 2 steps per axis");
    }
};

struct FitResult {
    CirParams params;
    double mse = 0.0;
    double alpha_resolution = 0.0;
    double beta_resolution = 0.0;
};

/// Exhaustive (alpha, beta) grid search minimizing the mean squared error
/// against `measured`. For each grid point C is the closed-form
/// least-squares scale <h1, m> / <h1, h1>, clamped to >= 0. Ties go to the
/// smallest alpha, then the smallest beta.
inline FitResult fit_cir(const SampledTrace& measured, double l_c, double v_max,
                         const FitGrid& grid = {}, Diagnostics* diag = nullptr) {
    if (measured.empty()) throw FitError("fit_cir: measured trace is empty");
    if (measured.times.size() != measured.values.size())
        throw FitError("fit_cir: times/values length mismatch");
    inkflow::detail::require_positive(l_c, "l_c");
    inkflow::detail::require_positive(v_max, "v_max");
    grid.validate();
    detail::require_grid(measured.times);

    const double ta = l_c / v_max;
    const std::size_t n = measured.size();

    // Per-sample log terms; only samples strictly after arrival carry signal
    // for alpha >= 1, the arrival sample itself is handled separately.
    std::vector<std::size_t> support;
    std::vector<double> log_u, log_1mu;
    std::ptrdiff_t at_arrival = -1;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = measured.times[k];
        if (t < ta) continue;
        const double u = ta / t;
        if (u >= 1.0) {
            at_arrival = static_cast<std::ptrdiff_t>(k);
            continue;
        }
        support.push_back(k);
        log_u.push_back(std::log(u));
        log_1mu.push_back(std::log1p(-u));
    }
    if (support.empty()) throw FitError("no support overlap: no samples after arrival time");

    FitResult best;
    best.mse = std::numeric_limits<double>::infinity();
    std::vector<double> h(support.size());
    bool clamped = false;
    for (std::size_t i = 0; i < grid.alpha_steps; ++i) {
        const double a = grid.alpha_at(i);
        for (std::size_t j = 0; j < grid.beta_steps; ++j) {
            const double b = grid.beta_at(j);
            const double lnorm = log_beta_normalizer(a, b);
            double hh = 0.0, hm = 0.0;
            for (std::size_t q = 0; q < support.size(); ++q) {
                h[q] = std::exp(lnorm + (a - 1.0) * log_1mu[q] + b * log_u[q]);
                hh += h[q] * h[q];
                hm += h[q] * measured.values[support[q]];
            }
            double h_arr = 0.0;
            if (at_arrival >= 0) {
                if (a == 1.0) {
                    h_arr = std::exp(lnorm);
                } else if (a < 1.0) {
                    // singular: next grid sample's value, per the sampling clamp policy
                    h_arr = h.empty() ? 0.0 : h[0];
                    clamped = true;
                }
                hh += h_arr * h_arr;
                hm += h_arr * measured.values[static_cast<std::size_t>(at_arrival)];
            }
            const double c = hh > 0.0 ? std::max(0.0, hm / hh) : 0.0;
            // explicit residual; the expanded form cancels badly near a perfect fit
            double sse = 0.0;
            std::size_t q = 0;
            for (std::size_t k = 0; k < n; ++k) {
                double model = 0.0;
                if (q < support.size() && support[q] == k) {
                    model = c * h[q];
                    ++q;
                } else if (static_cast<std::ptrdiff_t>(k) == at_arrival) {
                    model = c * h_arr;
                }
                const double r = measured.values[k] - model;
                sse += r * r;
            }
            const double mse = sse / static_cast<double>(n);
            if (mse < best.mse) {
                best.mse = mse;
                best.params.init = {a, b};
                best.params.scale_c = c;
            }
        }
    }
    if (clamped)
        inkflow::detail::warn(diag, "cir-singularity-clamped",
                              "arrival sample clamped for alpha < 1 grid points");
    best.params.l_c = l_c;
    best.params.v_max = v_max;
    best.alpha_resolution = grid.alpha_resolution();
    best.beta_resolution = grid.beta_resolution();
    return best;
}

}  // namespace inkflow::cir

#endif
