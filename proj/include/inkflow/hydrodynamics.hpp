#ifndef INKFLOW_HYDRODYNAMICS_HPP
#define INKFLOW_HYDRODYNAMICS_HPP

// Flow characterization of the background channel: Reynolds and Peclet
// numbers and the laminar (Poiseuille) velocity profile of a circular tube.
// All quantities are SI.

#include <cmath>
#include <numbers>
#include <string>

#include "inkflow/error.hpp"

namespace inkflow::hydro {

// Laminar/turbulent transition in a smooth circular pipe.
inline constexpr double kCriticalReynolds = 2100.0;
// Below this the flow is not considered advection dominated.
inline constexpr double kMinAdvectivePeclet = 1e4;

struct ChannelGeometry {
    double d_c = 1.6e-3;   // diameter [m]
    double l_c = 0.235;    // TX-to-RX distance [m]
    double l_rx = 0.9e-3;  // receiver observation length [m], metadata only

    double r_c() const noexcept { return 0.5 * d_c; }

    void validate() const {
        detail::require_positive(d_c, "channel diameter");
        detail::require_positive(l_c, "channel length");
        detail::require_positive(l_rx, "receiver length");
    }
};

struct FlowParams {
    double q0 = 10e-6 / 60.0;    // background flow [m^3/s]
    double nu = 1.01e-6;         // kinematic viscosity [m^2/s]
    double diff_coeff = 2.299e-9;  // diffusion coefficient [m^2/s]

    void validate() const {
        detail::require_positive(q0, "background flow");
        detail::require_positive(nu, "kinematic viscosity");
        detail::require_positive(diff_coeff, "diffusion coefficient");
    }
};

enum class FlowRegime { laminar, turbulent };

inline const char* to_string(FlowRegime r) noexcept {
    return r == FlowRegime::laminar ? "laminar" : "turbulent";
}

inline double average_velocity(double q0, double r_c) {
    detail::require_positive(q0, "q0");
    detail::require_positive(r_c, "r_c");
    return q0 / (std::numbers::pi * r_c * r_c);
}

inline double max_velocity(double v_avg) { return 2.0 * v_avg; }

inline double reynolds_number(double d_c, double v_avg, double nu) {
    detail::require_positive(d_c, "d_c");
    detail::require_positive(v_avg, "v_avg");
    detail::require_positive(nu, "nu");
    return d_c * v_avg / nu;
}

// Laminar iff re < 2100; the boundary itself counts as turbulent.
inline FlowRegime flow_regime(double re) {
    if (!(re >= 0.0)) throw DomainError("Reynolds number must be >= 0");
    return re < kCriticalReynolds ? FlowRegime::laminar : FlowRegime::turbulent;
}

inline double peclet_number(double r_c, double v_avg, double diff_coeff) {
    detail::require_positive(r_c, "r_c");
    detail::require_positive(v_avg, "v_avg");
    detail::require_positive(diff_coeff, "diff_coeff");
    return r_c * v_avg / diff_coeff;
}

inline double poiseuille_velocity(double rho, double r_c, double v_avg) {
    detail::require_positive(r_c, "r_c");
    if (!(rho >= 0.0 && rho <= r_c)) throw DomainError("radial position outside [0, r_c]");
    const double x = rho / r_c;
    return max_velocity(v_avg) * (1.0 - x * x);
}

/// Everything the channel model and run manifests need from the flow setup.
struct FlowSummary {
    double v_avg;
    double v_max;
    double reynolds;
    double peclet;
    FlowRegime regime;
    double arrival_time;  // l_c / v_max [s]
};

/// Computes the derived flow quantities and records a warning (never throws
/// for off-regime values) when the laminar or advection-dominated
/// assumptions behind the analytical channel model do not hold.
inline FlowSummary summarize(const ChannelGeometry& geo, const FlowParams& flow,
                             Diagnostics* diag = nullptr) {
    geo.validate();
    flow.validate();
    FlowSummary s{};
    s.v_avg = average_velocity(flow.q0, geo.r_c());
    s.v_max = max_velocity(s.v_avg);
    s.reynolds = reynolds_number(geo.d_c, s.v_avg, flow.nu);
    s.peclet = peclet_number(geo.r_c(), s.v_avg, flow.diff_coeff);
    s.regime = flow_regime(s.reynolds);
    s.arrival_time = geo.l_c / s.v_max;
    if (s.regime != FlowRegime::laminar)
        detail::warn(diag, "turbulent-flow",
                     "Re = " + std::to_string(s.reynolds) +
                         " is not laminar; the analytical CIR is not valid here");
    if (s.peclet <= kMinAdvectivePeclet)
        detail::warn(diag, "diffusion-relevant",
                     "Pe = " + std::to_string(s.peclet) +
                         " does not justify neglecting diffusion");
    if (geo.l_rx * 10.0 > geo.l_c)
        detail::warn(diag, "receiver-too-long", "l_c >> l_rx does not hold");
    return s;
}

}  // namespace inkflow::hydro

#endif
