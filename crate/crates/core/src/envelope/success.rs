//! The seven-condition touchdown predicate.
//!
//! A landing counts only if, at the instant the capture band between the
//! legs reaches cable height, the vehicle simultaneously satisfies:
//!
//! 1. the cable axis passes through the legs-zone rectangle (body frame)
//! 2. |roll| within tolerance
//! 3. |roll rate| within tolerance
//! 4. |velocity| within tolerance
//! 5. the velocity is descending and aimed at the cable (ray test); an
//!    exactly zero velocity passes
//! 6. |yaw error against the cable axis| within tolerance
//! 7. |yaw rate| within tolerance
//!
//! Angle conditions use ZYX Euler angles and Euler angle rates derived from
//! the quaternion and body rates.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DroneState, LegsZone};
use crate::{wrap_angle, Result, SimError};

/// An infinite straight conductor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableLine {
    /// Any point on the cable, inertial NED, m.
    pub point: Vector3<f64>,
    /// Unit direction of the cable axis.
    pub direction: Vector3<f64>,
}

impl Default for CableLine {
    fn default() -> Self {
        CableLine {
            point: Vector3::zeros(),
            direction: Vector3::x(),
        }
    }
}

impl CableLine {
    /// Builds a cable through `point` along `direction` (normalized here).
    pub fn new(point: Vector3<f64>, direction: Vector3<f64>) -> Result<Self> {
        let n = direction.norm();
        if !(n > 1e-9) || !direction.iter().all(|c| c.is_finite()) {
            return Err(SimError::Parameter(
                "cable.direction must be finite and nonzero".into(),
            ));
        }
        Ok(CableLine {
            point,
            direction: direction / n,
        })
    }

    /// Heading of the cable axis, rad.
    pub fn yaw(&self) -> f64 {
        self.direction.y.atan2(self.direction.x)
    }
}

/// Window used by the velocity-direction condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocityWindow {
    /// Half-width of the acceptance window around the cable in the cable's
    /// horizontal plane, m.
    pub lateral_half_width: f64,
    /// Sign convention marker: negative means the window sits below the
    /// vehicle, i.e. the approach must come from above. Recorded in exports;
    /// the descent requirement itself is the vz > 0 test.
    pub vertical_offset: f64,
}

impl Default for VelocityWindow {
    fn default() -> Self {
        VelocityWindow {
            lateral_half_width: 0.5,
            vertical_offset: -0.2,
        }
    }
}

/// Tolerances of the seven touchdown conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuccessCriteria {
    /// Condition 2: |roll| bound, rad.
    pub phi_tol: f64,
    /// Condition 3: |roll rate| bound, rad/s.
    pub phi_dot_tol: f64,
    /// Condition 4: |velocity| bound, m/s.
    pub v_norm_tol: f64,
    /// Condition 5 geometry.
    pub v_dir_window: VelocityWindow,
    /// Condition 6: |yaw error| bound, rad.
    pub dpsi_tol: f64,
    /// Condition 7: |yaw rate| bound, rad/s.
    pub psi_dot_tol: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        SuccessCriteria {
            phi_tol: 0.08,
            phi_dot_tol: 0.08,
            v_norm_tol: 0.2,
            v_dir_window: VelocityWindow::default(),
            dpsi_tol: 0.1,
            psi_dot_tol: 0.1,
        }
    }
}

impl SuccessCriteria {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.phi_tol, self.phi_dot_tol, self.v_norm_tol, self.dpsi_tol, self.psi_dot_tol];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(SimError::Parameter("criteria: tolerances must be > 0".into()));
        }
        if !(self.v_dir_window.lateral_half_width > 0.0) {
            return Err(SimError::Parameter(
                "criteria.v_dir_window.lateral_half_width must be > 0".into(),
            ));
        }
        if !self.v_dir_window.vertical_offset.is_finite() {
            return Err(SimError::Parameter(
                "criteria.v_dir_window.vertical_offset must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Where the cable axis crosses the body x=0 plane, in body coordinates.
/// None when the cable runs parallel to that plane.
pub fn cable_crossing_body(state: &DroneState, cable: &CableLine) -> Option<Vector3<f64>> {
    let p_b = state
        .attitude
        .inverse_transform_vector(&(cable.point - state.position));
    let d_b = state.attitude.inverse_transform_vector(&cable.direction);
    if d_b.x.abs() < 1e-9 {
        return None;
    }
    let t = -p_b.x / d_b.x;
    Some(p_b + d_b * t)
}

/// Condition 1: does the cable axis cross the legs-zone rectangle?
///
/// The rectangle lives in the body x=0 plane, spanning |y| <= half_width and
/// z in [0, height] (down from the hull). A cable parallel to that plane
/// cannot cross it and fails.
pub fn cable_in_legs_zone(state: &DroneState, cable: &CableLine, legs: &LegsZone) -> bool {
    match cable_crossing_body(state, cable) {
        Some(hit) => hit.y.abs() <= legs.half_width && hit.z >= 0.0 && hit.z <= legs.height,
        None => false,
    }
}

/// Condition 5: zero velocity passes; otherwise the vehicle must be
/// descending and the ray along its velocity must pierce the cable's
/// horizontal plane within the lateral window of the cable axis.
fn velocity_aims_at_cable(state: &DroneState, cable: &CableLine, window: &VelocityWindow) -> bool {
    let v = state.velocity;
    if v == Vector3::zeros() {
        return true;
    }
    if !(v.z > 0.0) {
        return false;
    }
    let dz = cable.point.z - state.position.z;
    let t_star = dz / v.z;
    if t_star < 0.0 {
        return false;
    }
    let crossing = state.position + v * t_star;
    // lateral distance from the crossing point to the cable axis, measured
    // in the horizontal plane
    let axis = Vector3::new(cable.direction.x, cable.direction.y, 0.0);
    let lateral = if axis.norm() > 1e-9 {
        let n = Vector3::new(-cable.direction.y, cable.direction.x, 0.0) / axis.norm();
        ((crossing - cable.point).dot(&n)).abs()
    } else {
        // degenerate vertical cable: fall back to true point-line distance
        (crossing - cable.point).cross(&cable.direction).norm()
    };
    lateral <= window.lateral_half_width
}

/// Evaluates all seven conditions at the touchdown state. Returns the overall
/// verdict and the list of violated condition ids (1-based, ascending).
pub fn evaluate_success(
    state: &DroneState,
    cable: &CableLine,
    legs: &LegsZone,
    criteria: &SuccessCriteria,
) -> (bool, Vec<u8>) {
    let mut violated = Vec::new();
    let (roll, _, yaw) = state.euler_angles();
    let (roll_rate, _, yaw_rate) = state.euler_rates();

    if !cable_in_legs_zone(state, cable, legs) {
        violated.push(1);
    }
    if roll.abs() > criteria.phi_tol {
        violated.push(2);
    }
    if roll_rate.abs() > criteria.phi_dot_tol {
        violated.push(3);
    }
    if state.velocity.norm() > criteria.v_norm_tol {
        violated.push(4);
    }
    if !velocity_aims_at_cable(state, cable, &criteria.v_dir_window) {
        violated.push(5);
    }
    if wrap_angle(yaw - cable.yaw()).abs() > criteria.dpsi_tol {
        violated.push(6);
    }
    if yaw_rate.abs() > criteria.psi_dot_tol {
        violated.push(7);
    }
    (violated.is_empty(), violated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;

    fn good_touchdown() -> DroneState {
        let mut s = DroneState::at_rest(Vector3::new(0.0, 0.0, -0.1));
        s.velocity = Vector3::new(0.0, 0.0, 0.1);
        s
    }

    fn eval(state: &DroneState) -> (bool, Vec<u8>) {
        evaluate_success(
            state,
            &CableLine::default(),
            &LegsZone::default(),
            &SuccessCriteria::default(),
        )
    }

    #[test]
    fn centered_slow_descent_succeeds() {
        let (ok, violated) = eval(&good_touchdown());
        assert!(ok, "violated: {violated:?}");
        assert!(violated.is_empty());
    }

    #[test]
    fn roll_just_over_tolerance_fails_condition_2() {
        let mut s = good_touchdown();
        s.attitude = UnitQuaternion::from_euler_angles(0.09, 0.0, 0.0);
        let (ok, violated) = eval(&s);
        assert!(!ok);
        assert_eq!(violated, vec![2]);
    }

    #[test]
    fn speed_just_over_tolerance_fails_condition_4() {
        let mut s = good_touchdown();
        s.velocity = Vector3::new(0.0, 0.0, 0.25);
        let (ok, violated) = eval(&s);
        assert!(!ok);
        assert_eq!(violated, vec![4]);
    }

    #[test]
    fn ascending_fails_condition_5() {
        let mut s = good_touchdown();
        s.velocity = Vector3::new(0.0, 0.0, -0.1);
        let (ok, violated) = eval(&s);
        assert!(!ok);
        assert_eq!(violated, vec![5]);
    }

    #[test]
    fn zero_velocity_passes_condition_5() {
        let mut s = good_touchdown();
        s.velocity = Vector3::zeros();
        let (ok, violated) = eval(&s);
        assert!(ok, "violated: {violated:?}");
    }

    #[test]
    fn sideways_aim_fails_condition_5() {
        let mut s = good_touchdown();
        // descending but aimed 0.7 m to the side by the time it reaches
        // cable height
        s.velocity = Vector3::new(0.0, 0.7, 0.1);
        let (_, violated) = eval(&s);
        assert!(violated.contains(&5));
    }

    #[test]
    fn cable_outside_legs_rectangle_fails_condition_1() {
        let mut s = good_touchdown();
        s.position.y = 0.3; // cable 0.3 m to the side, legs half-width 0.2
        let (_, violated) = eval(&s);
        assert!(violated.contains(&1));
        let mut s = good_touchdown();
        s.position.z = 0.05; // drone below the cable: rectangle is above it
        let (_, violated) = eval(&s);
        assert!(violated.contains(&1));
    }

    #[test]
    fn cable_parallel_to_body_section_plane_fails_condition_1() {
        let mut s = good_touchdown();
        // yaw 90 deg: cable now runs along body y and never crosses the
        // section plane
        s.attitude = UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let (_, violated) = eval(&s);
        assert!(violated.contains(&1));
        assert!(violated.contains(&6));
    }

    #[test]
    fn yaw_error_fails_condition_6_and_rates_fail_3_and_7() {
        let mut s = good_touchdown();
        s.attitude = UnitQuaternion::from_euler_angles(0.0, 0.0, 0.15);
        let (_, violated) = eval(&s);
        assert_eq!(violated, vec![6]);
        let mut s = good_touchdown();
        s.angular_rate = Vector3::new(0.2, 0.0, 0.0);
        let (_, violated) = eval(&s);
        assert_eq!(violated, vec![3]);
        let mut s = good_touchdown();
        s.angular_rate = Vector3::new(0.0, 0.0, 0.2);
        let (_, violated) = eval(&s);
        assert_eq!(violated, vec![7]);
    }

    #[test]
    fn violations_accumulate_in_ascending_order() {
        let mut s = good_touchdown();
        s.position.y = 0.5;
        s.attitude = UnitQuaternion::from_euler_angles(0.2, 0.0, 0.2);
        s.velocity = Vector3::new(0.0, 0.0, -0.5);
        s.angular_rate = Vector3::new(0.5, 0.0, 0.5);
        let (ok, violated) = eval(&s);
        assert!(!ok);
        assert_eq!(violated, vec![1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn oblique_cable_crossing_is_handled() {
        // cable yawed 0.05 rad, drone perfectly above its local crossing
        let cable = CableLine::new(
            Vector3::zeros(),
            Vector3::new(1.0, 0.05_f64.tan(), 0.0),
        )
        .unwrap();
        let mut s = good_touchdown();
        s.attitude = UnitQuaternion::from_euler_angles(0.0, 0.0, 0.05);
        let (ok, violated) = evaluate_success(
            &s,
            &cable,
            &LegsZone::default(),
            &SuccessCriteria::default(),
        );
        assert!(ok, "violated: {violated:?}");
    }

    #[test]
    fn criteria_validation_names_bad_fields() {
        let mut c = SuccessCriteria::default();
        c.phi_tol = 0.0;
        assert!(c.validate().is_err());
        let mut c = SuccessCriteria::default();
        c.v_dir_window.lateral_half_width = -1.0;
        assert!(c.validate().is_err());
        assert!(SuccessCriteria::default().validate().is_ok());
    }

    proptest! {
        // Enlarging tolerances never flips a pass into a failure.
        #[test]
        fn tolerance_monotonicity(
            y in -0.5..0.5f64,
            z in -0.3..0.05f64,
            roll in -0.15..0.15f64,
            yaw in -0.2..0.2f64,
            vy in -0.3..0.3f64,
            vz in -0.1..0.3f64,
            p in -0.15..0.15f64,
            r in -0.15..0.15f64,
            grow in 1.0..3.0f64,
        ) {
            let mut s = DroneState::at_rest(Vector3::new(0.0, y, z));
            s.attitude = UnitQuaternion::from_euler_angles(roll, 0.0, yaw);
            s.velocity = Vector3::new(0.0, vy, vz);
            s.angular_rate = Vector3::new(p, 0.0, r);
            let base = SuccessCriteria::default();
            let wide = SuccessCriteria {
                phi_tol: base.phi_tol * grow,
                phi_dot_tol: base.phi_dot_tol * grow,
                v_norm_tol: base.v_norm_tol * grow,
                v_dir_window: VelocityWindow {
                    lateral_half_width: base.v_dir_window.lateral_half_width * grow,
                    vertical_offset: base.v_dir_window.vertical_offset,
                },
                dpsi_tol: base.dpsi_tol * grow,
                psi_dot_tol: base.psi_dot_tol * grow,
            };
            let cable = CableLine::default();
            let legs = LegsZone::default();
            let (ok_base, _) = evaluate_success(&s, &cable, &legs, &base);
            let (ok_wide, _) = evaluate_success(&s, &cable, &legs, &wide);
            prop_assert!(!ok_base || ok_wide);
        }

        // The verdict is exactly "no violated ids".
        #[test]
        fn verdict_matches_violation_list(
            y in -1.0..1.0f64,
            z in -0.5..0.5f64,
            roll in -0.3..0.3f64,
            yaw in -0.5..0.5f64,
            vz in -0.5..0.5f64,
        ) {
            let mut s = DroneState::at_rest(Vector3::new(0.0, y, z));
            s.attitude = UnitQuaternion::from_euler_angles(roll, 0.0, yaw);
            s.velocity = Vector3::new(0.0, 0.0, vz);
            let (ok, violated) = eval(&s);
            prop_assert_eq!(ok, violated.is_empty());
            for w in violated.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
        }
    }
}
