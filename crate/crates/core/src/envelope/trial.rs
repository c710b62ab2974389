//! One seeded landing trial: wind synthesis, the closed control loop, and
//! touchdown evaluation.
//!
//! A trial places the cable along the inertial x axis through the origin,
//! spawns the vehicle at a lateral/height offset in level hover with zero
//! velocity, and runs dynamics at 200 Hz with the outer loop and state
//! machine ticking at 20 Hz. The trial ends the first time the capture band
//! under the hull reaches cable height (touchdown, evaluated by the success
//! function), or on timeout, or if the integrator faults.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::control::{
    hlpc_update, CommandLimits, ControllerGains, LandingMachine, LandingPhase, Llfc, LlfcGains,
    PhaseTransition, PoseBox, Strategy, StrategyConfig, VelocityCommand,
};
use crate::dynamics::{step, DroneParams, DroneState};
use crate::envelope::success::{
    cable_in_legs_zone, evaluate_success, CableLine, SuccessCriteria,
};
use crate::wind::{generate_profile, WindSpec};
use crate::{wrap_angle, Result, SimError};

/// Initial placement relative to the cable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StartPose {
    /// Lateral offset from the cable, m.
    pub y_offset: f64,
    /// Height above the cable, m.
    pub height: f64,
}

impl Default for StartPose {
    fn default() -> Self {
        StartPose {
            y_offset: 0.0,
            height: 2.0,
        }
    }
}

/// Loop scheduling. The defaults give 200 Hz dynamics/inner loop and a 20 Hz
/// outer loop, with traces sampled at the outer rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopSettings {
    /// Dynamics and inner-loop step, s.
    pub dt: f64,
    /// Dynamics steps per outer-loop update.
    pub outer_every: u32,
}

impl Default for LoopSettings {
    fn default() -> Self {
        LoopSettings {
            dt: 0.005,
            outer_every: 10,
        }
    }
}

impl LoopSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Parameter("loop.dt must be > 0".into()));
        }
        if self.outer_every == 0 {
            return Err(SimError::Parameter("loop.outer_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything that defines one deterministic trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialSpec {
    pub start: StartPose,
    /// Mean lateral wind, m/s.
    pub wind_mean: f64,
    /// Wind fluctuation standard deviation, m/s.
    pub wind_std: f64,
    /// Seed of this trial's wind profile.
    pub wind_seed: u64,
    pub strategy: StrategyConfig,
    pub gains: ControllerGains,
    pub limits: CommandLimits,
    pub llfc: LlfcGains,
    pub criteria: SuccessCriteria,
    pub loop_settings: LoopSettings,
    /// Simulated-time budget, s; exceeding it aborts the trial.
    pub timeout: f64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        TrialSpec {
            start: StartPose::default(),
            wind_mean: 10.0 * crate::KMH_TO_MPS,
            wind_std: 1.0,
            wind_seed: 0,
            strategy: StrategyConfig::default(),
            gains: ControllerGains::default(),
            limits: CommandLimits::default(),
            llfc: LlfcGains::default(),
            criteria: SuccessCriteria::default(),
            loop_settings: LoopSettings::default(),
            timeout: 60.0,
        }
    }
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.start.height > 0.0) {
            return Err(SimError::Parameter("trial.start.height must be > 0".into()));
        }
        if !(self.wind_mean >= 0.0 && self.wind_std >= 0.0) {
            return Err(SimError::Parameter(
                "trial.wind_mean and trial.wind_std must be >= 0".into(),
            ));
        }
        if !(self.timeout > 0.0) {
            return Err(SimError::Parameter("trial.timeout must be > 0".into()));
        }
        self.strategy.validate()?;
        self.gains.validate()?;
        self.limits.validate()?;
        self.llfc.validate()?;
        self.criteria.validate()?;
        self.loop_settings.validate()
    }
}

/// How a trial ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrialOutcome {
    /// Touchdown with all seven conditions satisfied.
    Success,
    /// Touchdown, but the listed conditions were violated.
    FailCriteria(Vec<u8>),
    /// The clock ran out before touchdown.
    Timeout,
    /// The integrator produced a non-finite state.
    Diverged,
}

impl TrialOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, TrialOutcome::Success)
    }
}

/// One trace sample (20 Hz when tracing is enabled).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: DroneState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub outcome: TrialOutcome,
    /// State at the touchdown instant (absent for Timeout/Diverged).
    pub touchdown: Option<DroneState>,
    /// Sampled states; empty unless the trial was run traced.
    pub trajectory: Vec<TrajectorySample>,
    /// Phase log of the landing machine.
    pub transitions: Vec<PhaseTransition>,
    /// Stabilization time of the first alignment phase (two-stage strategy
    /// only): when the pose entered the alignment box for the dwell that
    /// earned descent clearance.
    pub alignment_time: Option<f64>,
}

/// Runs one trial without storing the trajectory.
pub fn run_trial(spec: &TrialSpec, drone: &DroneParams) -> Result<TrialResult> {
    run_trial_inner(spec, drone, false)
}

/// Runs one trial and records a 20 Hz state trace.
pub fn run_trial_traced(spec: &TrialSpec, drone: &DroneParams) -> Result<TrialResult> {
    run_trial_inner(spec, drone, true)
}

fn run_trial_inner(spec: &TrialSpec, drone: &DroneParams, traced: bool) -> Result<TrialResult> {
    spec.validate()?;
    drone.validate()?;

    let wind_spec = WindSpec {
        mean_speed: spec.wind_mean,
        std_dev: spec.wind_std,
        // cover the whole possible trial, plus slack for interpolation at the
        // final step
        duration: spec.timeout + 1.0,
        seed: spec.wind_seed,
        ..WindSpec::default()
    };
    let profile = generate_profile(&wind_spec)?;

    let cable = CableLine::default();
    let mut state = DroneState::at_rest(Vector3::new(
        0.0,
        cable.point.y + spec.start.y_offset,
        cable.point.z - spec.start.height,
    ));
    let mut machine = LandingMachine::new(spec.strategy, spec.criteria, drone.legs_zone)?;
    let mut llfc = Llfc::new(spec.llfc)?;

    let dt = spec.loop_settings.dt;
    let outer_every = spec.loop_settings.outer_every as u64;
    let max_steps = (spec.timeout / dt).ceil() as u64;

    let mut vel_cmd = VelocityCommand::default();
    let mut trajectory = Vec::new();
    if traced {
        trajectory.push(TrajectorySample { t: 0.0, state });
    }

    let mut outcome = TrialOutcome::Timeout;
    let mut touchdown = None;

    for n in 0..max_steps {
        let t = n as f64 * dt;

        if n % outer_every == 0 {
            // The cable frame and the inertial frame coincide here, so the
            // state doubles as the relative pose the machine expects.
            let setpoint = machine.step(t, &state)?;
            if machine.phase() == LandingPhase::Aborted {
                // the machine rejected the attempt: a direct descent left
                // (or began outside) the abort box and has no phase to fall
                // back to
                break;
            }
            let (_, _, yaw) = state.euler_angles();
            let (_, _, yaw_rate) = state.euler_rates();
            vel_cmd = hlpc_update(
                setpoint.target.y - state.position.y,
                setpoint.target.z - state.position.z,
                wrap_angle(setpoint.target_yaw - yaw),
                -state.velocity.y,
                -yaw_rate,
                &spec.gains,
                &spec.limits,
                setpoint.descent_cap,
            );
        }

        let cmds = llfc.update(&vel_cmd, &state, dt, drone);
        let wind = Vector3::new(0.0, profile.wind_at(t)?, 0.0);
        state = match step(&state, &cmds, &wind, dt, drone) {
            Ok(s) => s,
            Err(SimError::Fault(_)) => {
                outcome = TrialOutcome::Diverged;
                machine.force_abort(t, "diverged");
                break;
            }
            Err(e) => return Err(e),
        };
        let t_next = (n + 1) as f64 * dt;

        if traced && (n + 1) % outer_every == 0 {
            trajectory.push(TrajectorySample { t: t_next, state });
        }

        // touchdown: the first instant the cable can actually touch the
        // vehicle, i.e. the cable crosses into the body-fixed capture
        // rectangle between the legs. A descent that slips past the cable
        // laterally never enters the rectangle, so crossing the cable's
        // horizontal plane is the backstop; it scores such misses instead
        // of letting them run out the clock below the cable.
        let height_above_cable = cable.point.z - state.position.z;
        let captured = cable_in_legs_zone(&state, &cable, &drone.legs_zone);
        if captured || height_above_cable <= 0.0 {
            let (ok, violated) =
                evaluate_success(&state, &cable, &drone.legs_zone, &spec.criteria);
            touchdown = Some(state);
            if traced && (n + 1) % outer_every != 0 {
                trajectory.push(TrajectorySample { t: t_next, state });
            }
            if ok {
                machine.mark_landed(t_next);
                outcome = TrialOutcome::Success;
            } else {
                let ids: Vec<String> = violated.iter().map(|i| i.to_string()).collect();
                machine.force_abort(t_next, &format!("touchdown_violated:{}", ids.join("+")));
                outcome = TrialOutcome::FailCriteria(violated);
            }
            break;
        }
    }

    if outcome == TrialOutcome::Timeout {
        machine.force_abort(spec.timeout, "timeout");
    }

    let alignment_time = first_alignment_time(machine.transitions(), &spec.strategy);
    Ok(TrialResult {
        outcome,
        touchdown,
        trajectory,
        transitions: machine.into_transitions(),
        alignment_time,
    })
}

/// Stabilization time of the first alignment phase, from the phase log: the
/// dwell that earned descent clearance started `hold_time` before the
/// `Aligning -> ReadyToLand` transition.
fn first_alignment_time(transitions: &[PhaseTransition], cfg: &StrategyConfig) -> Option<f64> {
    if cfg.strategy != Strategy::Tsls {
        return None;
    }
    transitions
        .iter()
        .find(|tr| tr.from == LandingPhase::Aligning && tr.to == LandingPhase::ReadyToLand)
        .map(|tr| (tr.t - cfg.hold_time).max(0.0))
}

/// A uniformly sampled pose offset from the alignment target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub t: f64,
    /// Lateral offset from the target, m.
    pub y: f64,
    /// Vertical offset from the target, m.
    pub z: f64,
    /// Yaw offset from the target, rad.
    pub yaw: f64,
}

impl PoseSample {
    fn inside(&self, b: &PoseBox) -> bool {
        self.y.abs() <= b.half_y && self.z.abs() <= b.half_z && wrap_angle(self.yaw).abs() <= b.half_yaw
    }
}

/// Stabilization time over a sampled alignment trajectory: the time of the
/// first sample after which every remaining sample stays inside the box.
/// `None` if the trajectory ends outside the box (never stabilized).
pub fn alignment_time(samples: &[PoseSample], alignment_box: &PoseBox) -> Option<f64> {
    let mut start = None;
    for s in samples {
        if s.inside(alignment_box) {
            if start.is_none() {
                start = Some(s.t);
            }
        } else {
            start = None;
        }
    }
    start
}

/// Converts the alignment-phase portion of a trial trace into pose offsets
/// from the alignment target, for use with [`alignment_time`]. The window
/// runs from engagement until the first departure from `Aligning`.
pub fn alignment_pose_samples(
    trajectory: &[TrajectorySample],
    transitions: &[PhaseTransition],
    cfg: &StrategyConfig,
) -> Vec<PoseSample> {
    let t_start = transitions
        .iter()
        .find(|tr| tr.to == LandingPhase::Aligning)
        .map(|tr| tr.t);
    let Some(t_start) = t_start else {
        return Vec::new();
    };
    let t_end = transitions
        .iter()
        .find(|tr| tr.from == LandingPhase::Aligning && tr.t >= t_start)
        .map(|tr| tr.t)
        .unwrap_or(f64::INFINITY);
    let ty = cfg.intermediate_target.y_offset;
    let tz = -cfg.intermediate_target.height_above_cable;
    trajectory
        .iter()
        .filter(|s| s.t >= t_start && s.t <= t_end)
        .map(|s| {
            let (_, _, yaw) = s.state.euler_angles();
            PoseSample {
                t: s.t,
                y: s.state.position.y - ty,
                z: s.state.position.z - tz,
                yaw: wrap_angle(yaw),
            }
        })
        .collect()
}
