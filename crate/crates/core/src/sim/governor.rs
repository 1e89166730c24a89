//! Four-phase speed governor that turns startup parameters into the
//! guide-vane setpoint.

use serde::{Deserialize, Serialize};

use super::StartupParams;

/// Governor and synchronization settings that are not optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GovernorConfig {
    /// Guide-vane servo first-order lag (s).
    pub servo_time_constant: f64,
    /// Maximum guide-vane speed (fraction of full opening per second).
    pub servo_rate_limit: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Speed band around synchronous speed (fraction of ω_S).
    pub sync_speed_tol: f64,
    /// Acceleration band (fraction of ω_S per second).
    pub sync_accel_tol: f64,
    /// Time both bands must hold before the unit counts as ready (s).
    pub sync_hold: f64,
    /// Integration / output frequency of the dynamic trajectory (Hz).
    pub f_d: f64,
}

impl Default for GovernorConfig {
    fn default() -> Self {
        Self {
            servo_time_constant: 1.5,
            servo_rate_limit: 0.10,
            kp: 2.0,
            ki: 0.5,
            kd: 0.0,
            sync_speed_tol: 0.005,
            sync_accel_tol: 0.002,
            sync_hold: 2.0,
            f_d: 10.0,
        }
    }
}

impl GovernorConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("servo_time_constant", self.servo_time_constant),
            ("servo_rate_limit", self.servo_rate_limit),
            ("sync_speed_tol", self.sync_speed_tol),
            ("sync_accel_tol", self.sync_accel_tol),
            ("sync_hold", self.sync_hold),
            ("f_d", self.f_d),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(crate::Error::InvalidConfig(format!("{name} must be >= 0")));
            }
        }
        if self.sync_hold < 1.0 / self.f_d {
            return Err(crate::Error::InvalidConfig(
                "sync_hold must cover at least one integration step".into(),
            ));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.f_d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GovernorPhase {
    RampUp,
    Plateau1,
    Plateau2,
    Feedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorState {
    pub phase: GovernorPhase,
    /// Opening setpoint (fraction).
    pub u: f64,
    /// Integrated normalized speed error.
    pub pid_integrator: f64,
    /// Setpoint held when feedback control took over.
    pub pid_bias: f64,
    pub prev_error: f64,
    /// Time spent inside the synchronization band (s).
    pub hold_timer: f64,
}

impl Default for GovernorState {
    fn default() -> Self {
        Self {
            phase: GovernorPhase::RampUp,
            u: 0.0,
            pid_integrator: 0.0,
            pid_bias: 0.0,
            prev_error: 0.0,
            hold_timer: 0.0,
        }
    }
}

/// Advances the governor by one step of length `dt` given the speed
/// reached at the end of the step.
///
/// At most one phase transition happens per call, so transitions are
/// monotone and each phase lasts at least one step.
pub fn setpoint_phase_step(
    state: GovernorState,
    params: &StartupParams,
    omega: f64,
    dt: f64,
    config: &GovernorConfig,
) -> GovernorState {
    let mut next = state;
    match state.phase {
        GovernorPhase::RampUp => {
            next.u = (state.u + params.r_o * dt).min(params.o_ini);
            if next.u >= params.o_ini {
                next.u = params.o_ini;
                next.phase = GovernorPhase::Plateau1;
            }
        }
        GovernorPhase::Plateau1 => {
            next.u = params.o_ini;
            if omega >= params.omega_trigger {
                next.phase = GovernorPhase::Plateau2;
                next.u = params.o_trigger;
            }
        }
        GovernorPhase::Plateau2 => {
            next.u = params.o_trigger;
            if omega >= 1.0 {
                next.phase = GovernorPhase::Feedback;
                next.pid_bias = next.u;
                next.pid_integrator = 0.0;
                next.prev_error = 1.0 - omega;
            }
        }
        GovernorPhase::Feedback => {
            let error = 1.0 - omega;
            let mut integ = state.pid_integrator + error * dt;
            if config.ki > 0.0 {
                // anti-windup: the integral term alone may never exceed full stroke
                let lim = 1.0 / config.ki;
                integ = integ.clamp(-lim, lim);
            }
            let deriv = (error - state.prev_error) / dt;
            let out = state.pid_bias + config.kp * error + config.ki * integ + config.kd * deriv;
            next.u = out.clamp(0.0, 1.0);
            next.pid_integrator = integ;
            next.prev_error = error;
        }
    }
    next.u = next.u.clamp(0.0, 1.0);
    next
}
