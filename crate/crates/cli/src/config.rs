//! Run configuration: one TOML document that resolves into every module-level
//! spec. Unknown keys are rejected so a typo cannot silently fall back to a
//! default, and `validate` names the offending field on bad values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use linesim::control::{CommandLimits, ControllerGains, LlfcGains, StrategyConfig};
use linesim::dynamics::DroneParams;
use linesim::envelope::{GridSpec, LoopSettings, StartPose, SuccessCriteria, TrialSpec};
use linesim::{Result, SimError, KMH_TO_MPS};

/// Config schema revision this build understands.
pub const SCHEMA_VERSION: u32 = 1;

/// Wind levels for batch runs. Means are listed in km/h, matching how they
/// are quoted operationally; conversion to m/s happens once, here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindLevels {
    /// Mean lateral wind of each map, km/h.
    pub mean_kmh: Vec<f64>,
    /// Fluctuation standard deviation, km/h.
    pub std_kmh: f64,
}

impl Default for WindLevels {
    fn default() -> Self {
        WindLevels {
            mean_kmh: vec![10.0],
            std_kmh: 3.6,
        }
    }
}

/// Gain-sweep settings. The sweep is a screening tool, so it defaults to a
/// coarser grid and fewer trials than the map subcommand; both stay
/// overridable here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// (kp, kd) candidates, scored and ranked together.
    pub candidates: Vec<(f64, f64)>,
    /// Lateral cell size of the sweep grid, m.
    pub y_step: f64,
    /// Vertical cell size of the sweep grid, m.
    pub z_step: f64,
    /// Trials per cell during the sweep.
    pub n_trials: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            candidates: vec![(0.1, 0.01), (1.0, 0.5), (0.5, 0.1), (5.0, 3.0)],
            y_step: 0.2,
            z_step: 0.2,
            n_trials: 5,
        }
    }
}

/// Every knob of a run. Field groups mirror the simulation modules; defaults
/// reproduce the stock vehicle and the documented baseline gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Root seed; every trial seed is derived from it.
    pub master_seed: u64,
    /// Trials per map cell.
    pub n_trials: u32,
    /// Worker threads; 0 picks the machine's core count.
    pub workers: usize,
    /// Directory artifacts are written into.
    pub output_dir: PathBuf,
    /// Per-trial simulated-time budget, s.
    pub timeout: f64,
    pub wind: WindLevels,
    pub grid: GridSpec,
    pub sweep: SweepConfig,
    pub drone: DroneParams,
    pub gains: ControllerGains,
    pub limits: CommandLimits,
    pub llfc: LlfcGains,
    pub criteria: SuccessCriteria,
    pub strategy: StrategyConfig,
    pub loop_settings: LoopSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            master_seed: 5,
            n_trials: 10,
            workers: 0,
            output_dir: PathBuf::from("out"),
            timeout: 60.0,
            wind: WindLevels::default(),
            grid: GridSpec::default(),
            sweep: SweepConfig::default(),
            drone: DroneParams::default(),
            gains: ControllerGains::default(),
            limits: CommandLimits::default(),
            llfc: LlfcGains::default(),
            criteria: SuccessCriteria::default(),
            strategy: StrategyConfig::default(),
            loop_settings: LoopSettings::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML document and validates the result. Parse errors carry
    /// the line and key reported by the TOML parser.
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| SimError::Parameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::Parameter(format!("config {}: {}", path.display(), e))
        })?;
        Self::from_toml(&text)
    }

    /// Serializes back to TOML; `from_toml(to_toml(c))` reparses to `c`.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("RunConfig is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SimError::Parameter(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.n_trials == 0 {
            return Err(SimError::Parameter("n_trials must be >= 1".into()));
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(SimError::Parameter("timeout must be > 0".into()));
        }
        if self.wind.mean_kmh.is_empty() {
            return Err(SimError::Parameter("wind.mean_kmh must list at least one level".into()));
        }
        if self.wind.mean_kmh.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(SimError::Parameter("wind.mean_kmh entries must be >= 0".into()));
        }
        if !(self.wind.std_kmh.is_finite() && self.wind.std_kmh >= 0.0) {
            return Err(SimError::Parameter("wind.std_kmh must be >= 0".into()));
        }
        if self.sweep.candidates.is_empty() {
            return Err(SimError::Parameter("sweep.candidates must not be empty".into()));
        }
        if self
            .sweep
            .candidates
            .iter()
            .any(|(kp, kd)| !(kp.is_finite() && kd.is_finite() && *kp >= 0.0 && *kd >= 0.0))
        {
            return Err(SimError::Parameter("sweep.candidates gains must be >= 0".into()));
        }
        if !(self.sweep.y_step > 0.0 && self.sweep.z_step > 0.0) {
            return Err(SimError::Parameter("sweep.y_step and sweep.z_step must be > 0".into()));
        }
        if self.sweep.n_trials == 0 {
            return Err(SimError::Parameter("sweep.n_trials must be >= 1".into()));
        }
        self.grid.validate()?;
        self.drone.validate()?;
        self.gains.validate()?;
        self.limits.validate()?;
        self.llfc.validate()?;
        self.criteria.validate()?;
        self.strategy.validate()?;
        self.loop_settings.validate()
    }

    /// Trial template at one wind level; start pose and wind seed are
    /// overridden per job by the batch runners.
    pub fn trial_template(&self, wind_mean_mps: f64) -> TrialSpec {
        TrialSpec {
            start: StartPose::default(),
            wind_mean: wind_mean_mps,
            wind_std: self.wind.std_kmh * KMH_TO_MPS,
            wind_seed: 0,
            strategy: self.strategy,
            gains: self.gains,
            limits: self.limits,
            llfc: self.llfc,
            criteria: self.criteria,
            loop_settings: self.loop_settings,
            timeout: self.timeout,
        }
    }

    /// The coarser grid the sweep screens on: map extents, sweep cell sizes.
    pub fn sweep_grid(&self) -> GridSpec {
        GridSpec {
            y_step: self.sweep.y_step,
            z_step: self.sweep.z_step,
            ..self.grid
        }
    }
}
