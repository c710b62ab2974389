//! Gain sweeps over the lateral alignment controller and side-by-side
//! strategy comparison, both built on seeded success maps.

use serde::{Deserialize, Serialize};

use crate::control::Strategy;
use crate::dynamics::DroneParams;
use crate::envelope::{extract_zone, monte_carlo_map, GridSpec, StartPose, SuccessMap, TrialSpec};
use crate::{derive_seed, Result, SimError};

/// A candidate must align from every probe start in under this many seconds
/// to enter the ranking.
pub const ALIGN_TIME_LIMIT: f64 = 5.0;

/// Lateral probe starts for the alignment-time check, all at 2 m height.
pub const PROBE_OFFSETS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

const PROBE_HEIGHT: f64 = 2.0;

/// Seed stream for probe trials, disjoint from map cell indices.
const PROBE_STREAM: u64 = 1 << 32;

/// One sweep candidate with its measured scores, ready for ranking or CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kp: f64,
    pub kd: f64,
    /// Area of the 100%-success zone, m^2.
    pub zone_area: f64,
    /// Worst alignment time over the probe starts; None if any probe never
    /// stabilized.
    pub max_align_time: Option<f64>,
    /// max_align_time exists and is under the limit.
    pub eligible: bool,
}

/// Values `start, start+step, ...` up to `end`, with `end` itself appended
/// when the step sequence stops short of it.
pub fn matlab_range(start: f64, step: f64, end: f64) -> Vec<f64> {
    assert!(step > 0.0 && end >= start, "matlab_range needs step > 0 and end >= start");
    let n = ((end - start) / step + 1e-9).floor() as usize;
    let mut values: Vec<f64> = (0..=n).map(|k| start + k as f64 * step).collect();
    let last = *values.last().unwrap();
    if end - last > 1e-9 * end.abs().max(1.0) {
        values.push(end);
    }
    values
}

/// Cartesian product of gain values, kp-major.
pub fn pair_grid(kp_values: &[f64], kd_values: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs = Vec::with_capacity(kp_values.len() * kd_values.len());
    for &kp in kp_values {
        for &kd in kd_values {
            pairs.push((kp, kd));
        }
    }
    pairs
}

fn probe_alignment_time(
    kp: f64,
    kd: f64,
    wind_mean: f64,
    template: &TrialSpec,
    drone: &DroneParams,
    master_seed: u64,
) -> Result<Option<f64>> {
    let mut worst: f64 = 0.0;
    for (i, offset) in PROBE_OFFSETS.iter().enumerate() {
        let mut spec = template.clone();
        spec.gains.kp_y = kp;
        spec.gains.kd_y = kd;
        spec.strategy.strategy = Strategy::Tsls;
        spec.start = StartPose {
            y_offset: *offset,
            height: PROBE_HEIGHT,
        };
        spec.wind_mean = wind_mean;
        spec.wind_seed = derive_seed(master_seed, PROBE_STREAM + i as u64, 0);
        match run_probe(&spec, drone)? {
            Some(t) => worst = worst.max(t),
            None => return Ok(None),
        }
    }
    Ok(Some(worst))
}

fn run_probe(spec: &TrialSpec, drone: &DroneParams) -> Result<Option<f64>> {
    Ok(crate::envelope::run_trial(spec, drone)?.alignment_time)
}

/// Scores explicit (kp, kd) candidates at one wind level and ranks them.
///
/// Each candidate gets a success map on `grid` (zone area = cells at 100%)
/// and five alignment probes from `PROBE_OFFSETS`. Candidates whose worst
/// probe stabilizes in under `ALIGN_TIME_LIMIT` are ranked by zone area,
/// largest first with (kp, kd) as tie-breaker; ineligible candidates follow
/// in the same order. Probe and map seeds are shared across candidates so
/// the comparison is paired.
pub fn gain_sweep_pairs(
    candidates: &[(f64, f64)],
    wind_mean: f64,
    grid: &GridSpec,
    n_trials: u32,
    template: &TrialSpec,
    drone: &DroneParams,
    master_seed: u64,
) -> Result<Vec<SweepRow>> {
    if candidates.is_empty() {
        return Err(SimError::Contract("gain_sweep requires at least one candidate".into()));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for &(kp, kd) in candidates {
        let mut spec = template.clone();
        spec.gains.kp_y = kp;
        spec.gains.kd_y = kd;
        let map = monte_carlo_map(grid, n_trials, wind_mean, &spec, drone, master_seed)?;
        let zone_area = extract_zone(&map, 1.0).area;
        let max_align_time = probe_alignment_time(kp, kd, wind_mean, template, drone, master_seed)?;
        let eligible = max_align_time.is_some_and(|t| t < ALIGN_TIME_LIMIT);
        rows.push(SweepRow {
            kp,
            kd,
            zone_area,
            max_align_time,
            eligible,
        });
    }
    rows.sort_by(|a, b| {
        b.eligible
            .cmp(&a.eligible)
            .then(b.zone_area.total_cmp(&a.zone_area))
            .then(a.kp.total_cmp(&b.kp))
            .then(a.kd.total_cmp(&b.kd))
    });
    Ok(rows)
}

/// Sweeps the full cartesian product of the given gain values.
#[allow(clippy::too_many_arguments)]
pub fn gain_sweep(
    kp_values: &[f64],
    kd_values: &[f64],
    wind_mean: f64,
    grid: &GridSpec,
    n_trials: u32,
    template: &TrialSpec,
    drone: &DroneParams,
    master_seed: u64,
) -> Result<Vec<SweepRow>> {
    if kp_values.is_empty() || kd_values.is_empty() {
        return Err(SimError::Contract("gain_sweep requires nonempty value lists".into()));
    }
    gain_sweep_pairs(
        &pair_grid(kp_values, kd_values),
        wind_mean,
        grid,
        n_trials,
        template,
        drone,
        master_seed,
    )
}

/// Paired-seed success maps for both landing strategies plus their
/// difference.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyComparison {
    pub dls: SuccessMap,
    pub tsls: SuccessMap,
    /// tsls - dls per cell, in [-1, 1].
    pub delta: Vec<f64>,
}

/// Runs both strategies over the same grid with identical wind seeds per
/// (cell, trial), so per-cell differences reflect the strategy alone.
pub fn compare_strategies(
    wind_mean: f64,
    grid: &GridSpec,
    n_trials: u32,
    template: &TrialSpec,
    drone: &DroneParams,
    master_seed: u64,
) -> Result<StrategyComparison> {
    let mut dls_spec = template.clone();
    dls_spec.strategy.strategy = Strategy::Dls;
    let mut tsls_spec = template.clone();
    tsls_spec.strategy.strategy = Strategy::Tsls;
    let dls = monte_carlo_map(grid, n_trials, wind_mean, &dls_spec, drone, master_seed)?;
    let tsls = monte_carlo_map(grid, n_trials, wind_mean, &tsls_spec, drone, master_seed)?;
    let delta = tsls
        .cells
        .iter()
        .zip(&dls.cells)
        .map(|(t, d)| t - d)
        .collect();
    Ok(StrategyComparison { dls, tsls, delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell_grid() -> GridSpec {
        GridSpec {
            y_min: 0.0,
            y_max: 0.0,
            y_step: 0.1,
            z_min: 2.0,
            z_max: 2.0,
            z_step: 0.1,
        }
    }

    fn calm_template() -> TrialSpec {
        let mut t = TrialSpec::default();
        t.wind_std = 0.0;
        t
    }

    #[test]
    fn matlab_range_appends_the_endpoint_when_needed() {
        let kp = matlab_range(0.1, 0.5, 5.0);
        assert_eq!(kp.len(), 11);
        assert!((kp[0] - 0.1).abs() < 1e-12);
        assert!((kp[9] - 4.6).abs() < 1e-12);
        assert_eq!(*kp.last().unwrap(), 5.0);

        let kd = matlab_range(0.01, 0.1, 3.0);
        assert_eq!(kd.len(), 31);
        assert!((kd[29] - 2.91).abs() < 1e-12);
        assert_eq!(*kd.last().unwrap(), 3.0);
    }

    #[test]
    fn matlab_range_keeps_exact_endpoints_single() {
        let v = matlab_range(0.0, 0.5, 2.0);
        assert_eq!(v, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn pair_grid_is_kp_major() {
        let pairs = pair_grid(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(pairs, vec![(1.0, 3.0), (1.0, 4.0), (2.0, 3.0), (2.0, 4.0)]);
    }

    #[test]
    fn single_candidate_is_returned_scored() {
        let rows = gain_sweep_pairs(
            &[(1.0, 0.5)],
            0.0,
            &one_cell_grid(),
            1,
            &calm_template(),
            &DroneParams::default(),
            3,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].kp, rows[0].kd), (1.0, 0.5));
        assert!(rows[0].eligible, "calm-wind probes should align quickly: {rows:?}");
        assert!(rows[0].max_align_time.unwrap() < ALIGN_TIME_LIMIT);
        assert!((rows[0].zone_area - 0.01).abs() < 1e-12);
    }

    #[test]
    fn slow_candidate_is_flagged_ineligible_and_ranked_last() {
        // kp 0.05 gives a ~20 s lateral time constant: the 1 m probes cannot
        // stabilize inside 5 s no matter the seed.
        let rows = gain_sweep_pairs(
            &[(0.05, 0.0), (1.0, 0.5)],
            0.0,
            &one_cell_grid(),
            1,
            &calm_template(),
            &DroneParams::default(),
            3,
        )
        .unwrap();
        assert_eq!((rows[0].kp, rows[0].kd), (1.0, 0.5));
        assert!(rows[0].eligible);
        assert!(!rows[1].eligible);
        if let Some(t) = rows[1].max_align_time {
            assert!(t >= ALIGN_TIME_LIMIT, "slow candidate aligned in {t} s");
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let grid = one_cell_grid();
        let template = calm_template();
        let drone = DroneParams::default();
        assert!(gain_sweep_pairs(&[], 0.0, &grid, 1, &template, &drone, 1).is_err());
        assert!(gain_sweep(&[], &[0.1], 0.0, &grid, 1, &template, &drone, 1).is_err());
        assert!(gain_sweep(&[0.5], &[], 0.0, &grid, 1, &template, &drone, 1).is_err());
    }

    #[test]
    fn strategy_comparison_is_deterministic_and_consistent() {
        let grid = one_cell_grid();
        let template = TrialSpec::default();
        let drone = DroneParams::default();
        let mean = 10.0 * crate::KMH_TO_MPS;
        let a = compare_strategies(mean, &grid, 2, &template, &drone, 17).unwrap();
        let b = compare_strategies(mean, &grid, 2, &template, &drone, 17).unwrap();
        assert_eq!(a, b);
        for (i, d) in a.delta.iter().enumerate() {
            assert!((d - (a.tsls.cells[i] - a.dls.cells[i])).abs() < 1e-15);
        }
        // directly above the cable the two-stage strategy lands reliably
        assert_eq!(a.tsls.cells[0], 1.0);
    }
}
