//! Flight control: the outer position controller, the inner velocity and
//! attitude cascade, and the landing state machine.
//!
//! The outer loop (20 Hz) turns pose errors into velocity commands with
//! decoupled PD/P channels and no integrator. The inner loop (200 Hz) tracks
//! those commands through a velocity PI, a small-angle attitude stage, a rate
//! stage, and a motor mixer. The state machine sequences alignment and
//! descent and owns the abort logic.

pub mod llfc;
pub mod machine;

use serde::{Deserialize, Serialize};

use crate::{Result, SimError};

pub use llfc::{Llfc, LlfcGains};
pub use machine::{
    state_machine_step, IntermediateTarget, LandingMachine, LandingPhase, PhaseTransition,
    PoseBox, Setpoint, Strategy, StrategyConfig,
};

/// Outer-loop gains: PD on lateral position, P on altitude, PD on yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerGains {
    /// (m/s) commanded per m of lateral error.
    pub kp_y: f64,
    /// (m/s) commanded per (m/s) of lateral error rate.
    pub kd_y: f64,
    /// (m/s) commanded per m of altitude error.
    pub kp_z: f64,
    /// (rad/s) commanded per rad of yaw error.
    pub kp_psi: f64,
    /// (rad/s) commanded per (rad/s) of yaw error rate.
    pub kd_psi: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            kp_y: 0.5,
            kd_y: 0.1,
            kp_z: 0.8,
            kp_psi: 1.2,
            kd_psi: 0.2,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        let all = [self.kp_y, self.kd_y, self.kp_z, self.kp_psi, self.kd_psi];
        if all.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(SimError::Parameter(
                "gains: every controller gain must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Saturation bounds applied to every velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandLimits {
    /// Max |vy_cmd|, m/s.
    pub lateral: f64,
    /// Max |vz_cmd|, m/s.
    pub vertical: f64,
    /// Max |yaw_rate_cmd|, rad/s.
    pub yaw_rate: f64,
}

impl Default for CommandLimits {
    fn default() -> Self {
        CommandLimits {
            lateral: 1.0,
            vertical: 0.5,
            yaw_rate: 0.5,
        }
    }
}

impl CommandLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.lateral > 0.0 && self.vertical > 0.0 && self.yaw_rate > 0.0) {
            return Err(SimError::Parameter("limits: every command limit must be > 0".into()));
        }
        Ok(())
    }
}

/// Velocity setpoint handed from the outer loop to the inner loop.
/// `vx_cmd` is pinned to zero: the along-cable axis is not position-managed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityCommand {
    pub vx_cmd: f64,       // m/s
    pub vy_cmd: f64,       // m/s
    pub vz_cmd: f64,       // m/s, positive down (descent)
    pub yaw_rate_cmd: f64, // rad/s
}

/// One outer-loop update.
///
/// Errors are `target - actual`; the rate arguments are the time derivatives
/// of those errors supplied by the caller (the controller holds no state and
/// does no differentiation). `descent_cap`, when present, additionally limits
/// the positive (downward) vz command, which is how the descent phase
/// enforces its slow approach speed.
#[allow(clippy::too_many_arguments)]
pub fn hlpc_update(
    error_y: f64,
    error_z: f64,
    error_psi: f64,
    error_y_rate: f64,
    error_psi_rate: f64,
    gains: &ControllerGains,
    limits: &CommandLimits,
    descent_cap: Option<f64>,
) -> VelocityCommand {
    let vy = (gains.kp_y * error_y + gains.kd_y * error_y_rate)
        .clamp(-limits.lateral, limits.lateral);
    let down_limit = match descent_cap {
        Some(cap) => cap.min(limits.vertical),
        None => limits.vertical,
    };
    let vz = (gains.kp_z * error_z).clamp(-limits.vertical, down_limit);
    let yaw_rate = (gains.kp_psi * error_psi + gains.kd_psi * error_psi_rate)
        .clamp(-limits.yaw_rate, limits.yaw_rate);
    VelocityCommand {
        vx_cmd: 0.0,
        vy_cmd: vy,
        vz_cmd: vz,
        yaw_rate_cmd: yaw_rate,
    }
}
