//! Startup simulator: governor setpoint, guide-vane servo and rotor
//! dynamics integrated with a fixed-step classical Runge-Kutta scheme.
//!
//! The integrated state is `q = [ω, o, u]` with ω the speed as a fraction of
//! synchronous speed, `o` the guide-vane opening and `u` the governor
//! setpoint. Remaining governor internals (phase, PID memory, hold timer) are
//! discrete and live in [`GovernorState`]; they are updated between steps so
//! that the setpoint is piecewise smooth inside every RK4 step.

mod governor;
mod torque;

pub use governor::{setpoint_phase_step, GovernorConfig, GovernorPhase, GovernorState};
pub use torque::{HillChart, TorqueMap, TorqueSurface};

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// The four tunable governor parameters of a startup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartupParams {
    /// Opening rate (fraction of full opening per second, so 10 %/s is 0.10).
    pub r_o: f64,
    /// Initial opening reached by the ramp.
    pub o_ini: f64,
    /// Speed (fraction of ω_S) at which the setpoint steps to `o_trigger`.
    pub omega_trigger: f64,
    /// Opening held until synchronous speed is reached.
    pub o_trigger: f64,
}

impl StartupParams {
    pub const fn new(r_o: f64, o_ini: f64, omega_trigger: f64, o_trigger: f64) -> Self {
        Self {
            r_o,
            o_ini,
            omega_trigger,
            o_trigger,
        }
    }

    /// The usual parameters of the reference unit (10 %/s, 0.24, 0.97, 0.15).
    pub const STANDARD: Self = Self::new(0.10, 0.24, 0.97, 0.15);

    pub fn to_array(self) -> [f64; 4] {
        [self.r_o, self.o_ini, self.omega_trigger, self.o_trigger]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("r_o", self.r_o),
            ("o_ini", self.o_ini),
            ("omega_trigger", self.omega_trigger),
            ("o_trigger", self.o_trigger),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in &fields[1..] {
            if *v > 1.0 {
                return Err(Error::InvalidParams(format!("{name} must be <= 1, got {v}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for StartupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "r_o={:.4}/s o_ini={:.4} omega_trigger={:.4} o_trigger={:.4}",
            self.r_o, self.o_ini, self.omega_trigger, self.o_trigger
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantPhysics {
    /// Total rotating inertia (kg·m²).
    pub inertia: f64,
    /// Synchronous speed (rad/s); only used to normalize.
    pub omega_s: f64,
    /// Startup-time constraint (s).
    pub t_st_limit: f64,
}

impl Default for PlantPhysics {
    fn default() -> Self {
        Self {
            inertia: 2.0e5,
            // 500 rpm
            omega_s: 500.0 * std::f64::consts::PI / 30.0,
            t_st_limit: 90.0,
        }
    }
}

impl PlantPhysics {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("inertia", self.inertia),
            ("omega_s", self.omega_s),
            ("t_st_limit", self.t_st_limit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Time to reach synchronization readiness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartupTime {
    At(f64),
    Timeout,
}

impl StartupTime {
    /// Seconds, with a timeout counted as twice the constraint.
    pub fn seconds(self, t_st_limit: f64) -> f64 {
        match self {
            StartupTime::At(t) => t,
            StartupTime::Timeout => 2.0 * t_st_limit,
        }
    }
}

impl fmt::Display for StartupTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartupTime::At(t) => write!(f, "{t:.1} s"),
            StartupTime::Timeout => write!(f, "timeout"),
        }
    }
}

/// Simulated speed and opening sampled at `f_d`, from rest up to the
/// startup time (or to the timeout horizon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicTrajectory {
    pub f_d: f64,
    pub omega: Vec<f64>,
    pub opening: Vec<f64>,
    pub t_st: StartupTime,
    pub synchronized: bool,
}

impl DynamicTrajectory {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 / self.f_d
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 / self.f_d
    }
}

/// Everything the simulator needs besides the startup parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimContext {
    pub governor: GovernorConfig,
    pub physics: PlantPhysics,
    pub surface: TorqueSurface,
}

impl Default for SimContext {
    fn default() -> Self {
        Self {
            governor: GovernorConfig::default(),
            physics: PlantPhysics::default(),
            surface: TorqueSurface::synthetic_default(),
        }
    }
}

impl SimContext {
    pub fn simulate(&self, params: &StartupParams) -> Result<DynamicTrajectory> {
        simulate_startup(params, &self.governor, &self.physics, &self.surface)
    }
}

/// Indices into the integrated state vector.
pub const OMEGA: usize = 0;
pub const OPENING: usize = 1;
pub const SETPOINT: usize = 2;

/// Time derivative of `[ω, o, u]` with the governor's discrete state frozen.
pub fn dynamics_rhs<T: TorqueMap + ?Sized>(
    q: &[f64; 3],
    governor: &GovernorState,
    params: &StartupParams,
    config: &GovernorConfig,
    physics: &PlantPhysics,
    torque: &T,
) -> [f64; 3] {
    let (omega, opening, u) = (q[OMEGA], q[OPENING], q[SETPOINT]);
    let d_omega = torque.torque(omega, opening) / (physics.inertia * physics.omega_s);
    let d_opening = ((u - opening) / config.servo_time_constant)
        .clamp(-config.servo_rate_limit, config.servo_rate_limit);
    let d_u = if governor.phase == GovernorPhase::RampUp && u < params.o_ini {
        params.r_o
    } else {
        0.0
    };
    [d_omega, d_opening, d_u]
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(f: F, q: &[f64; N], dt: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let axpy = |a: &[f64; N], s: f64, b: &[f64; N]| -> [f64; N] {
        let mut out = *a;
        for i in 0..N {
            out[i] += s * b[i];
        }
        out
    };
    let k1 = f(q);
    let k2 = f(&axpy(q, 0.5 * dt, &k1));
    let k3 = f(&axpy(q, 0.5 * dt, &k2));
    let k4 = f(&axpy(q, dt, &k3));
    let mut out = *q;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Simulates one startup from rest with a step of `1/f_d`.
///
/// The run stops once speed and acceleration stay inside the
/// synchronization bands for `sync_hold` seconds during feedback control
/// (the startup time is the instant the hold began and the trajectory is
/// truncated there), or when the simulated time reaches twice the
/// constraint.
pub fn simulate_startup<T: TorqueMap + ?Sized>(
    params: &StartupParams,
    config: &GovernorConfig,
    physics: &PlantPhysics,
    torque: &T,
) -> Result<DynamicTrajectory> {
    params.validate()?;
    config.validate()?;
    physics.validate()?;

    let dt = config.dt();
    let n_max = (2.0 * physics.t_st_limit * config.f_d).round() as usize;
    let mut q = [0.0_f64; 3];
    let mut gov = GovernorState::default();
    let mut omega = Vec::with_capacity(n_max + 1);
    let mut opening = Vec::with_capacity(n_max + 1);
    omega.push(0.0);
    opening.push(0.0);
    let hold_steps = (config.sync_hold * config.f_d).round() as usize;
    let mut band_start: Option<usize> = None;

    for n in 1..=n_max {
        let frozen = gov;
        q = rk4_step(
            |s| dynamics_rhs(s, &frozen, params, config, physics, torque),
            &q,
            dt,
        );
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: n as f64 * dt });
        }
        q[OPENING] = q[OPENING].clamp(0.0, 1.0);
        gov = setpoint_phase_step(gov, params, q[OMEGA], dt, config);
        q[SETPOINT] = gov.u;
        omega.push(q[OMEGA]);
        opening.push(q[OPENING]);

        if gov.phase == GovernorPhase::Feedback {
            let accel = torque.torque(q[OMEGA], q[OPENING]) / (physics.inertia * physics.omega_s);
            if (q[OMEGA] - 1.0).abs() <= config.sync_speed_tol
                && accel.abs() <= config.sync_accel_tol
            {
                let start = *band_start.get_or_insert(n);
                gov.hold_timer = (n - start) as f64 * dt;
                if n - start >= hold_steps {
                    omega.truncate(start + 1);
                    opening.truncate(start + 1);
                    return Ok(DynamicTrajectory {
                        f_d: config.f_d,
                        omega,
                        opening,
                        t_st: StartupTime::At(start as f64 / config.f_d),
                        synchronized: true,
                    });
                }
            } else {
                band_start = None;
                gov.hold_timer = 0.0;
            }
        }
    }

    Ok(DynamicTrajectory {
        f_d: config.f_d,
        omega,
        opening,
        t_st: StartupTime::Timeout,
        synchronized: false,
    })
}
