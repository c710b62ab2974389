//! Rigid-body vehicle model: coaxial rotor pairs, flat-plate drag, gravity,
//! and a fixed-step RK4 integrator.
//!
//! Frames and conventions:
//! - inertial NED: x forward (along the conductor), y right, z down
//! - body frame fixed to the airframe, same axes at identity attitude
//! - attitude quaternion rotates body vectors into the inertial frame
//! - thrust acts along body -z; descent has positive vz
//!
//! The propulsion model is a momentum-theory surrogate per rotor:
//!   T = k_thrust * w^2 * (1 + k_mu * mu^2) - k_axial * w * w_axial   (>= 0)
//! where mu is the advance ratio (in-plane relative wind over tip speed) and
//! w_axial is the axial inflow, positive when air enters the disc from above
//! (climb). Lateral inflow raises thrust, climb lowers it, and the asymmetric
//! blade lift in lateral inflow is transmitted as a hub moment about the
//! in-plane axis perpendicular to the relative wind, with sign set by the
//! rotor's spin direction.

use nalgebra::{Quaternion, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Result, SimError, GRAVITY};

// --------------------------------------------------------------------------
// Parameters
// --------------------------------------------------------------------------

/// Affine map from motor command pulse (µs) to rotor speed (rad/s).
/// Commands outside `[cmd_min, cmd_max]` are clamped before mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CmdToOmega {
    pub cmd_min: f64,   // µs
    pub cmd_max: f64,   // µs
    pub omega_min: f64, // rad/s at cmd_min
    pub omega_max: f64, // rad/s at cmd_max
}

impl Default for CmdToOmega {
    fn default() -> Self {
        CmdToOmega {
            cmd_min: 1200.0,
            cmd_max: 1700.0,
            omega_min: 0.0,
            omega_max: 900.0,
        }
    }
}

impl CmdToOmega {
    pub fn omega(&self, cmd_us: f64) -> f64 {
        let c = cmd_us.clamp(self.cmd_min, self.cmd_max);
        let frac = (c - self.cmd_min) / (self.cmd_max - self.cmd_min);
        self.omega_min + frac * (self.omega_max - self.omega_min)
    }

    /// Inverse map; the result is saturated into the valid pulse range.
    pub fn cmd_for(&self, omega: f64) -> f64 {
        let frac = (omega - self.omega_min) / (self.omega_max - self.omega_min);
        (self.cmd_min + frac * (self.cmd_max - self.cmd_min)).clamp(self.cmd_min, self.cmd_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cmd_max > self.cmd_min) {
            return Err(SimError::Parameter("cmd_to_omega.cmd_max must exceed cmd_min".into()));
        }
        if !(self.omega_max > self.omega_min) || self.omega_min < 0.0 {
            return Err(SimError::Parameter(
                "cmd_to_omega must be monotone increasing with omega_min >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// One coaxial rotor pair (upper + lower rotor on a shared axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotorPairParams {
    /// Hub position in the body frame, m.
    pub position: Vector3<f64>,
    /// +1 or -1 for the upper rotor; the lower rotor spins opposite.
    pub spin_sign: f64,
    /// Blade radius, m.
    pub radius: f64,
    /// Thrust coefficient per rotor, N/(rad/s)^2.
    pub k_thrust: f64,
    /// Thrust fraction retained by the lower rotor in the upper's wake.
    pub coax_efficiency: f64,
    /// Lateral-airspeed thrust gain on the advance ratio squared.
    pub k_mu: f64,
    /// Axial inflow damping, N per (rad/s * m/s).
    pub k_axial: f64,
    /// Hub-moment arm coefficient, m.
    pub k_hub: f64,
    /// Shaft torque coefficient per rotor, N*m/(rad/s)^2.
    pub k_torque: f64,
    pub cmd_to_omega: CmdToOmega,
}

impl Default for RotorPairParams {
    fn default() -> Self {
        RotorPairParams {
            position: Vector3::zeros(),
            spin_sign: 1.0,
            radius: 0.30,
            k_thrust: 1.0e-4,
            coax_efficiency: 0.85,
            k_mu: 1.5,
            k_axial: 0.01,
            k_hub: 0.05,
            k_torque: 2.0e-6,
            cmd_to_omega: CmdToOmega::default(),
        }
    }
}

impl RotorPairParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(SimError::Parameter("rotor.radius must be > 0".into()));
        }
        if !(self.k_thrust > 0.0) {
            return Err(SimError::Parameter("rotor.k_thrust must be > 0".into()));
        }
        if !(self.coax_efficiency > 0.0 && self.coax_efficiency <= 1.0) {
            return Err(SimError::Parameter("rotor.coax_efficiency must be in (0, 1]".into()));
        }
        if self.spin_sign != 1.0 && self.spin_sign != -1.0 {
            return Err(SimError::Parameter("rotor.spin_sign must be +1 or -1".into()));
        }
        if self.k_mu < 0.0 || self.k_axial < 0.0 || self.k_hub < 0.0 || self.k_torque < 0.0 {
            return Err(SimError::Parameter("rotor coefficients must be >= 0".into()));
        }
        self.cmd_to_omega.validate()
    }
}

/// Capture rectangle between the landing legs, body frame. The rectangle
/// spans |y| <= half_width and z in [0, height] below the hull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LegsZone {
    pub half_width: f64, // m
    pub height: f64,     // m
}

impl Default for LegsZone {
    fn default() -> Self {
        LegsZone {
            half_width: 0.2,
            height: 0.15,
        }
    }
}

/// Full physical description of the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DroneParams {
    /// Vehicle mass, kg.
    pub mass: f64,
    /// Principal moments of inertia (Ix, Iy, Iz), kg*m^2.
    pub inertia_diag: Vector3<f64>,
    /// Equivalent flat-plate area (drag coefficient 1), m^2.
    pub flat_plate_area: f64,
    /// Air density, kg/m^3.
    pub air_density: f64,
    /// Distance of the centre of drag above the centre of mass, m.
    pub cd_offset: f64,
    pub rotor_pairs: Vec<RotorPairParams>,
    pub legs_zone: LegsZone,
}

impl Default for DroneParams {
    fn default() -> Self {
        let mass = 20.0;
        // Calibrated so the four pairs carry the weight at a 1450 µs pulse.
        let map = CmdToOmega::default();
        let omega_hover = map.omega(1450.0);
        let coax_efficiency = 0.85;
        let k_thrust = mass * GRAVITY / (4.0 * (1.0 + coax_efficiency) * omega_hover * omega_hover);
        let pair = |x: f64, y: f64, spin: f64| RotorPairParams {
            position: Vector3::new(x, y, 0.0),
            spin_sign: spin,
            k_thrust,
            coax_efficiency,
            ..RotorPairParams::default()
        };
        DroneParams {
            mass,
            inertia_diag: Vector3::new(3.52, 3.31, 3.84),
            flat_plate_area: 0.512,
            air_density: 1.225,
            cd_offset: 0.2,
            rotor_pairs: vec![
                pair(0.4, 0.4, 1.0),
                pair(0.4, -0.4, -1.0),
                pair(-0.4, -0.4, 1.0),
                pair(-0.4, 0.4, -1.0),
            ],
            legs_zone: LegsZone::default(),
        }
    }
}

impl DroneParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(SimError::Parameter("drone.mass must be > 0".into()));
        }
        if !(self.inertia_diag.x > 0.0 && self.inertia_diag.y > 0.0 && self.inertia_diag.z > 0.0) {
            return Err(SimError::Parameter("drone.inertia_diag components must be > 0".into()));
        }
        if !(self.flat_plate_area > 0.0) {
            return Err(SimError::Parameter("drone.flat_plate_area must be > 0".into()));
        }
        if !(self.air_density > 0.0) {
            return Err(SimError::Parameter("drone.air_density must be > 0".into()));
        }
        if self.cd_offset < 0.0 {
            return Err(SimError::Parameter("drone.cd_offset must be >= 0".into()));
        }
        if self.rotor_pairs.len() != 4 {
            return Err(SimError::Parameter("drone.rotor_pairs must contain exactly 4 pairs".into()));
        }
        let sum: Vector3<f64> = self.rotor_pairs.iter().map(|p| p.position).sum();
        let cross: f64 = self.rotor_pairs.iter().map(|p| p.position.x * p.position.y).sum();
        let sx: f64 = self.rotor_pairs.iter().map(|p| p.position.x.powi(2)).sum();
        let sy: f64 = self.rotor_pairs.iter().map(|p| p.position.y.powi(2)).sum();
        if sum.norm() > 1e-9 || cross.abs() > 1e-9 || sx <= 0.0 || sy <= 0.0 {
            return Err(SimError::Parameter(
                "drone.rotor_pairs must be arranged symmetrically about the body x and y axes".into(),
            ));
        }
        if !(self.legs_zone.half_width > 0.0 && self.legs_zone.height > 0.0) {
            return Err(SimError::Parameter("drone.legs_zone dimensions must be > 0".into()));
        }
        for p in &self.rotor_pairs {
            p.validate()?;
        }
        Ok(())
    }

    /// Steady pair thrust needed to hold the vehicle's weight, N.
    pub fn hover_pair_thrust(&self) -> f64 {
        self.mass * GRAVITY / self.rotor_pairs.len() as f64
    }

    /// Command pulse at which equal commands on all rotors balance the weight
    /// at zero airspeed, µs.
    pub fn hover_command(&self) -> f64 {
        let pair = &self.rotor_pairs[0];
        let omega = (self.hover_pair_thrust()
            / (pair.k_thrust * (1.0 + pair.coax_efficiency)))
            .sqrt();
        pair.cmd_to_omega.cmd_for(omega)
    }

    /// Equal hover commands for all pairs.
    pub fn hover_commands(&self) -> Vec<PairCommand> {
        let cmd = self.hover_command();
        vec![PairCommand { upper_us: cmd, lower_us: cmd }; self.rotor_pairs.len()]
    }
}

// --------------------------------------------------------------------------
// State
// --------------------------------------------------------------------------

/// Commands for one coaxial pair, µs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCommand {
    pub upper_us: f64,
    pub lower_us: f64,
}

/// Full 12-dimensional rigid-body state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneState {
    /// Position in inertial NED, m.
    pub position: Vector3<f64>,
    /// Velocity in inertial NED, m/s.
    pub velocity: Vector3<f64>,
    /// Rotation taking body vectors into the inertial frame.
    pub attitude: UnitQuaternion<f64>,
    /// Body angular rate (p, q, r), rad/s.
    pub angular_rate: Vector3<f64>,
}

impl DroneState {
    /// Level, motionless state at `position`.
    pub fn at_rest(position: Vector3<f64>) -> Self {
        DroneState {
            position,
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            angular_rate: Vector3::zeros(),
        }
    }

    /// ZYX Euler angles (roll, pitch, yaw), rad.
    pub fn euler_angles(&self) -> (f64, f64, f64) {
        self.attitude.euler_angles()
    }

    /// Euler angle rates (roll, pitch, yaw), rad/s, from the body rates.
    pub fn euler_rates(&self) -> (f64, f64, f64) {
        let (phi, theta, _) = self.euler_angles();
        let (p, q, r) = (self.angular_rate.x, self.angular_rate.y, self.angular_rate.z);
        let (sp, cp) = (phi.sin(), phi.cos());
        let tt = theta.tan();
        let ct = theta.cos();
        (
            p + (q * sp + r * cp) * tt,
            q * cp - r * sp,
            (q * sp + r * cp) / ct,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.as_vector().iter().all(|v| v.is_finite())
            && self.angular_rate.iter().all(|v| v.is_finite())
    }
}

/// A force and a torque, both in the body frame; torque is about the centre
/// of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceTorque {
    pub force: Vector3<f64>,  // N
    pub torque: Vector3<f64>, // N*m
}

impl ForceTorque {
    pub fn zero() -> Self {
        ForceTorque {
            force: Vector3::zeros(),
            torque: Vector3::zeros(),
        }
    }
}

impl std::ops::Add for ForceTorque {
    type Output = ForceTorque;
    fn add(self, rhs: ForceTorque) -> ForceTorque {
        ForceTorque {
            force: self.force + rhs.force,
            torque: self.torque + rhs.torque,
        }
    }
}

impl std::ops::AddAssign for ForceTorque {
    fn add_assign(&mut self, rhs: ForceTorque) {
        self.force += rhs.force;
        self.torque += rhs.torque;
    }
}

// --------------------------------------------------------------------------
// Force models
// --------------------------------------------------------------------------

/// Force and torque produced by one coaxial pair.
///
/// `rel_wind_body` is the air velocity relative to the airframe in body axes
/// (wind minus vehicle velocity, rotated into the body frame); its z
/// component is therefore positive when air enters the rotor disc from above,
/// which is the climb case that unloads the rotor.
pub fn rotor_pair_forces(
    pair: &RotorPairParams,
    cmd: &PairCommand,
    rel_wind_body: &Vector3<f64>,
) -> ForceTorque {
    let lat = Vector2::new(rel_wind_body.x, rel_wind_body.y);
    let lat_speed = lat.norm();
    let w_axial = rel_wind_body.z;

    let mut out = ForceTorque::zero();
    let rotors = [
        (pair.cmd_to_omega.omega(cmd.upper_us), pair.spin_sign, 1.0),
        (pair.cmd_to_omega.omega(cmd.lower_us), -pair.spin_sign, pair.coax_efficiency),
    ];
    for (omega, spin, efficiency) in rotors {
        let mu = if omega > 0.0 {
            lat_speed / (omega * pair.radius)
        } else {
            0.0
        };
        let thrust = efficiency
            * (pair.k_thrust * omega * omega * (1.0 + pair.k_mu * mu * mu)
                - pair.k_axial * omega * w_axial)
                .max(0.0);
        out.force += Vector3::new(0.0, 0.0, -thrust);
        // Reaction to the aerodynamic shaft torque; vanishes pairwise at
        // equal speeds because the rotors counter-rotate.
        out.torque.z += spin * pair.k_torque * omega * omega;
        // Advancing-blade lift excess, transmitted a quarter turn ahead in the
        // spin direction: a moment about the in-plane axis perpendicular to
        // the relative wind.
        if mu > 0.0 && thrust > 0.0 {
            let e = lat / lat_speed;
            out.torque += spin * pair.k_hub * thrust * mu * Vector3::new(-e.y, e.x, 0.0);
        }
    }
    out.torque += pair.position.cross(&out.force);
    out
}

/// Flat-plate drag on the airframe.
///
/// `airspeed_body` is the vehicle's velocity relative to the air mass in body
/// axes, so the force opposes it. The centre of drag sits `cd_offset` above
/// the centre of mass, which makes crosswind torque destabilizing.
pub fn structural_drag(airspeed_body: &Vector3<f64>, params: &DroneParams) -> ForceTorque {
    let force =
        -0.5 * params.air_density * params.flat_plate_area * airspeed_body.norm() * airspeed_body;
    let lever = Vector3::new(0.0, 0.0, -params.cd_offset);
    ForceTorque {
        force,
        torque: lever.cross(&force),
    }
}

/// Sum of gravity, all rotor pairs, and structural drag, in body axes.
pub fn total_wrench(
    state: &DroneState,
    cmds: &[PairCommand],
    wind_inertial: &Vector3<f64>,
    params: &DroneParams,
) -> Result<ForceTorque> {
    if cmds.len() != params.rotor_pairs.len() {
        return Err(SimError::Contract(format!(
            "got {} pair commands for {} rotor pairs",
            cmds.len(),
            params.rotor_pairs.len()
        )));
    }
    // Air velocity relative to the airframe, body axes.
    let rel_wind_body = state
        .attitude
        .inverse_transform_vector(&(wind_inertial - state.velocity));

    let gravity_body = state
        .attitude
        .inverse_transform_vector(&Vector3::new(0.0, 0.0, params.mass * GRAVITY));
    let mut total = ForceTorque {
        force: gravity_body,
        torque: Vector3::zeros(),
    };
    for (pair, cmd) in params.rotor_pairs.iter().zip(cmds) {
        total += rotor_pair_forces(pair, cmd, &rel_wind_body);
    }
    total += structural_drag(&-rel_wind_body, params);
    Ok(total)
}

// --------------------------------------------------------------------------
// Integration
// --------------------------------------------------------------------------

struct Derivative {
    dposition: Vector3<f64>,
    dvelocity: Vector3<f64>,
    dattitude: Quaternion<f64>,
    drate: Vector3<f64>,
}

fn derivative(
    state: &DroneState,
    cmds: &[PairCommand],
    wind_inertial: &Vector3<f64>,
    params: &DroneParams,
) -> Result<Derivative> {
    let wrench = total_wrench(state, cmds, wind_inertial, params)?;
    let accel = state.attitude.transform_vector(&wrench.force) / params.mass;
    let omega = state.angular_rate;
    let inertia = params.inertia_diag;
    let gyro = omega.cross(&inertia.component_mul(&omega));
    let drate = (wrench.torque - gyro).component_div(&inertia);
    let dattitude =
        state.attitude.into_inner() * Quaternion::from_parts(0.0, omega) * 0.5;
    Ok(Derivative {
        dposition: state.velocity,
        dvelocity: accel,
        dattitude,
        drate,
    })
}

fn advance(state: &DroneState, d: &Derivative, h: f64) -> DroneState {
    DroneState {
        position: state.position + d.dposition * h,
        velocity: state.velocity + d.dvelocity * h,
        attitude: UnitQuaternion::from_quaternion(
            state.attitude.into_inner() + d.dattitude * h,
        ),
        angular_rate: state.angular_rate + d.drate * h,
    }
}

/// One RK4 step of the Newton-Euler equations with commands and wind held
/// constant. The attitude quaternion is renormalized after the update.
pub fn step(
    state: &DroneState,
    cmds: &[PairCommand],
    wind_inertial: &Vector3<f64>,
    dt: f64,
    params: &DroneParams,
) -> Result<DroneState> {
    if !(dt > 0.0) {
        return Err(SimError::Domain(format!("step dt must be > 0, got {dt}")));
    }
    let k1 = derivative(state, cmds, wind_inertial, params)?;
    let k2 = derivative(&advance(state, &k1, dt / 2.0), cmds, wind_inertial, params)?;
    let k3 = derivative(&advance(state, &k2, dt / 2.0), cmds, wind_inertial, params)?;
    let k4 = derivative(&advance(state, &k3, dt), cmds, wind_inertial, params)?;

    let w = dt / 6.0;
    let next = DroneState {
        position: state.position
            + w * (k1.dposition + 2.0 * k2.dposition + 2.0 * k3.dposition + k4.dposition),
        velocity: state.velocity
            + w * (k1.dvelocity + 2.0 * k2.dvelocity + 2.0 * k3.dvelocity + k4.dvelocity),
        attitude: UnitQuaternion::from_quaternion(
            state.attitude.into_inner()
                + w * (k1.dattitude + 2.0 * k2.dattitude + 2.0 * k3.dattitude + k4.dattitude),
        ),
        angular_rate: state.angular_rate
            + w * (k1.drate + 2.0 * k2.drate + 2.0 * k3.drate + k4.drate),
    };
    if !next.is_finite() {
        return Err(SimError::Fault("state became non-finite during step".into()));
    }
    Ok(next)
}
