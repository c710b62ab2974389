//! Inner-loop velocity/attitude/rate cascade and motor mixer.
//!
//! This stands in for the autopilot's internal loops: it receives a velocity
//! command and the true state at 200 Hz and produces the eight motor pulses.
//! Stages:
//!   1. velocity PI (with gravity feedforward) -> desired specific force
//!   2. specific force -> desired roll/pitch (small angle, yaw frame) and
//!      collective thrust
//!   3. attitude P -> body-rate setpoints (yaw rate commanded directly)
//!   4. rate P scaled by inertia -> torque demands, clamped
//!   5. mixer -> per-pair upper/lower pulses, saturated at the valid range
//!
//! The mixer solves the static thrust/torque allocation exactly, so a vehicle
//! at perfect hover trim with a zero command maps back to the exact hover
//! pulse on all eight motors.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::VelocityCommand;
use crate::dynamics::{DroneParams, DroneState, PairCommand};
use crate::GRAVITY;
use crate::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlfcGains {
    /// Acceleration demanded per (m/s) of lateral velocity error. Kept low
    /// enough that the attitude loop, whose slew the torque clamp bounds,
    /// can follow without phase-lag oscillation.
    pub kp_vel_xy: f64,
    /// Acceleration demanded per (m/s) of vertical velocity error. Vertical
    /// control acts through collective thrust directly, so it can run
    /// stiffer than the tilt axes.
    pub kp_vel_z: f64,
    /// Integral gain on velocity error, 1/s.
    pub ki_vel: f64,
    /// Per-axis bound on the stored integral term, m/s^2.
    pub integral_limit: f64,
    /// Per-axis bound on the demanded acceleration, m/s^2.
    pub accel_limit: f64,
    /// Bound on desired roll/pitch, rad.
    pub tilt_limit: f64,
    /// Body-rate setpoint per rad of attitude error, 1/s.
    pub kp_att: f64,
    /// Angular acceleration per (rad/s) of rate error, 1/s.
    pub kp_rate: f64,
    /// Roll/pitch torque clamp, N*m.
    pub torque_limit_xy: f64,
    /// Yaw torque clamp, N*m.
    pub torque_limit_z: f64,
}

impl Default for LlfcGains {
    fn default() -> Self {
        LlfcGains {
            kp_vel_xy: 2.0,
            kp_vel_z: 6.0,
            ki_vel: 1.0,
            integral_limit: 2.0,
            accel_limit: 4.0,
            tilt_limit: 0.4,
            kp_att: 8.0,
            kp_rate: 20.0,
            torque_limit_xy: 40.0,
            torque_limit_z: 2.0,
        }
    }
}

impl LlfcGains {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.kp_vel_xy,
            self.kp_vel_z,
            self.integral_limit,
            self.accel_limit,
            self.tilt_limit,
            self.kp_att,
            self.kp_rate,
            self.torque_limit_xy,
            self.torque_limit_z,
        ];
        if positive.iter().any(|g| !(g.is_finite() && *g > 0.0)) || !(self.ki_vel >= 0.0) {
            return Err(SimError::Parameter(
                "llfc: gains and clamps must be finite and positive (ki_vel >= 0)".into(),
            ));
        }
        Ok(())
    }
}

/// Inner-loop controller. Holds the velocity integral, so one instance
/// belongs to one simulated vehicle.
#[derive(Debug, Clone)]
pub struct Llfc {
    gains: LlfcGains,
    integral: Vector3<f64>,
}

impl Llfc {
    pub fn new(gains: LlfcGains) -> Result<Self> {
        gains.validate()?;
        Ok(Llfc {
            gains,
            integral: Vector3::zeros(),
        })
    }

    pub fn reset(&mut self) {
        self.integral = Vector3::zeros();
    }

    /// One 200 Hz update: velocity command in, eight motor pulses out.
    pub fn update(
        &mut self,
        cmd: &VelocityCommand,
        state: &DroneState,
        dt: f64,
        params: &DroneParams,
    ) -> [PairCommand; 4] {
        let g = &self.gains;
        let v_sp = Vector3::new(cmd.vx_cmd, cmd.vy_cmd, cmd.vz_cmd);
        let err = v_sp - state.velocity;

        let kp_vel = Vector3::new(g.kp_vel_xy, g.kp_vel_xy, g.kp_vel_z);
        // Conditional integration: freeze an axis whose demand is already
        // saturated in the direction the error is pushing, so a long
        // transient cannot wind the integral up and drag the recovery out.
        for axis in 0..3 {
            let a_raw = err[axis] * kp_vel[axis] + self.integral[axis];
            let pushing_deeper = a_raw.abs() >= g.accel_limit && a_raw * err[axis] > 0.0;
            if !pushing_deeper {
                self.integral[axis] = (self.integral[axis] + err[axis] * g.ki_vel * dt)
                    .clamp(-g.integral_limit, g.integral_limit);
            }
        }

        let a_des = (err.component_mul(&kp_vel) + self.integral)
            .map(|c| c.clamp(-g.accel_limit, g.accel_limit));
        // Specific force the rotors must produce (gravity feedforward): at
        // hover this is (0, 0, -G), i.e. thrust up.
        let f_des = a_des - Vector3::new(0.0, 0.0, GRAVITY);

        let (roll, pitch, yaw) = state.euler_angles();
        // Express the demand in the yaw-aligned frame so roll/pitch targets
        // decouple from heading.
        let (sy, cy) = (yaw.sin(), yaw.cos());
        let f_yaw = Vector3::new(
            cy * f_des.x + sy * f_des.y,
            -sy * f_des.x + cy * f_des.y,
            f_des.z,
        );
        let den = (-f_yaw.z).max(1.0);
        let pitch_des = (-f_yaw.x / den).clamp(-g.tilt_limit, g.tilt_limit);
        let roll_des = (f_yaw.y / den).clamp(-g.tilt_limit, g.tilt_limit);
        let thrust_total = params.mass * f_des.norm();

        // Rate setpoints are square-root limited so the rate loop, whose
        // torque clamp bounds angular acceleration, can always stop in time:
        // |rate| <= sqrt(2 * alpha_max * |error|) is the largest rate the
        // clamped loop can bleed off without overshooting the target angle.
        let rate_sp = Vector3::new(
            shaped_rate(
                g.kp_att,
                roll_des - roll,
                0.8 * g.torque_limit_xy / params.inertia_diag.x,
            ),
            shaped_rate(
                g.kp_att,
                pitch_des - pitch,
                0.8 * g.torque_limit_xy / params.inertia_diag.y,
            ),
            cmd.yaw_rate_cmd,
        );
        let rate_err = rate_sp - state.angular_rate;
        let mut torque = params.inertia_diag.component_mul(&(rate_err * g.kp_rate));
        torque.x = torque.x.clamp(-g.torque_limit_xy, g.torque_limit_xy);
        torque.y = torque.y.clamp(-g.torque_limit_xy, g.torque_limit_xy);
        torque.z = torque.z.clamp(-g.torque_limit_z, g.torque_limit_z);

        mix(thrust_total, &torque, params)
    }
}

/// Proportional rate setpoint, capped at the rate a torque-clamped loop can
/// still decelerate to zero exactly at the target angle.
fn shaped_rate(kp: f64, err: f64, alpha_max: f64) -> f64 {
    let stoppable = (2.0 * alpha_max * err.abs()).sqrt();
    (kp * err).clamp(-stoppable, stoppable)
}

/// Allocate a collective thrust and three torques onto the four coaxial
/// pairs. Roll/pitch come from differential pair thrust; yaw comes from the
/// upper/lower speed split within each pair, chosen so the pair's total
/// thrust is unchanged by the split (before saturation).
pub fn mix(thrust_total: f64, torque: &Vector3<f64>, params: &DroneParams) -> [PairCommand; 4] {
    let sum_y2: f64 = params.rotor_pairs.iter().map(|p| p.position.y.powi(2)).sum();
    let sum_x2: f64 = params.rotor_pairs.iter().map(|p| p.position.x.powi(2)).sum();
    let n = params.rotor_pairs.len() as f64;

    let mut out = [PairCommand { upper_us: 0.0, lower_us: 0.0 }; 4];
    for (i, pair) in params.rotor_pairs.iter().enumerate().take(4) {
        // thrust along -z at lever (x, y): roll torque = -y * T, pitch = x * T
        let t_i = (thrust_total / n - pair.position.y * torque.x / sum_y2
            + pair.position.x * torque.y / sum_x2)
            .max(0.0);
        let delta = if pair.k_torque > 0.0 {
            pair.spin_sign * torque.z / (n * pair.k_torque)
        } else {
            0.0
        };
        let c = pair.coax_efficiency;
        // solve upper^2 + c * lower^2 = t/k with upper^2 - lower^2 = delta
        let upper_sq = ((t_i / pair.k_thrust + c * delta) / (1.0 + c)).max(0.0);
        let lower_sq = (upper_sq - delta).max(0.0);
        out[i] = PairCommand {
            upper_us: pair.cmd_to_omega.cmd_for(upper_sq.sqrt()),
            lower_us: pair.cmd_to_omega.cmd_for(lower_sq.sqrt()),
        };
    }
    out
}
