//! Monte Carlo landing envelopes: seeded trials over a grid of start
//! positions, success-probability maps, map algebra, gain sweeps, and
//! strategy comparison.

pub mod success;
pub mod sweep;
pub mod trial;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DroneParams;
use crate::{derive_seed, Result, SimError};

pub use success::{evaluate_success, CableLine, SuccessCriteria, VelocityWindow};
pub use sweep::{
    compare_strategies, gain_sweep, gain_sweep_pairs, matlab_range, pair_grid,
    StrategyComparison, SweepRow,
};
pub use trial::{
    alignment_pose_samples, alignment_time, run_trial, run_trial_traced, LoopSettings, PoseSample,
    StartPose, TrajectorySample, TrialOutcome, TrialResult, TrialSpec,
};

/// Rectangular grid of start cells: lateral offset on one axis, height above
/// the cable on the other. Cell centers are `min + k * step`; both endpoints
/// are included when the span is a whole number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub y_step: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub z_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            y_min: -1.5,
            y_max: 1.5,
            y_step: 0.1,
            z_min: 1.5,
            z_max: 2.5,
            z_step: 0.1,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_step > 0.0 && self.z_step > 0.0) {
            return Err(SimError::Parameter("grid: steps must be > 0".into()));
        }
        if !(self.y_max >= self.y_min && self.z_max >= self.z_min) {
            return Err(SimError::Parameter("grid: max must be >= min".into()));
        }
        if !(self.z_min > 0.0) {
            return Err(SimError::Parameter(
                "grid.z_min must be > 0 (heights are above the cable)".into(),
            ));
        }
        Ok(())
    }

    pub fn ny(&self) -> usize {
        ((self.y_max - self.y_min) / self.y_step + 0.5).floor() as usize + 1
    }

    pub fn nz(&self) -> usize {
        ((self.z_max - self.z_min) / self.z_step + 0.5).floor() as usize + 1
    }

    pub fn cell_count(&self) -> usize {
        self.ny() * self.nz()
    }

    pub fn y_center(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.y_step
    }

    pub fn z_center(&self, iz: usize) -> f64 {
        self.z_min + iz as f64 * self.z_step
    }

    /// Approximate equality, used when combining maps that may have passed
    /// through decimal serialization.
    pub fn matches(&self, other: &GridSpec) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
        self.ny() == other.ny()
            && self.nz() == other.nz()
            && close(self.y_min, other.y_min)
            && close(self.y_step, other.y_step)
            && close(self.z_min, other.z_min)
            && close(self.z_step, other.z_step)
    }
}

/// Landing-success probabilities over a start grid. `cells` is row-major
/// with the height index outermost: `cells[iz * ny + iy]`, iz ascending from
/// `z_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessMap {
    pub grid: GridSpec,
    /// Trials per cell; 0 means unknown (e.g. a map restored from CSV).
    pub n_trials: u32,
    /// Mean wind of the ensemble, m/s; 0 when unknown or mixed (merged maps).
    pub wind_mean: f64,
    pub cells: Vec<f64>,
}

impl SuccessMap {
    pub fn probability(&self, iy: usize, iz: usize) -> f64 {
        self.cells[iz * self.grid.ny() + iy]
    }
}

/// Runs `n_trials` seeded trials per grid cell and returns the success map.
///
/// `template` supplies everything about a trial except the start position,
/// the wind mean, and the wind seed, which this function overrides per job.
/// Each trial's seed is a pure function of `(master_seed, cell index, trial
/// index)`, so results do not depend on scheduling or worker count.
pub fn monte_carlo_map(
    grid: &GridSpec,
    n_trials: u32,
    wind_mean: f64,
    template: &TrialSpec,
    drone: &DroneParams,
    master_seed: u64,
) -> Result<SuccessMap> {
    grid.validate()?;
    if n_trials == 0 {
        return Err(SimError::Contract("monte_carlo_map requires n_trials >= 1".into()));
    }
    let ny = grid.ny();
    let cells = grid.cell_count();
    if cells == 0 {
        return Err(SimError::Contract("monte_carlo_map requires a nonempty grid".into()));
    }

    let jobs = cells * n_trials as usize;
    let successes: Vec<bool> = (0..jobs)
        .into_par_iter()
        .map(|job| {
            let cell = job / n_trials as usize;
            let k = job % n_trials as usize;
            let iy = cell % ny;
            let iz = cell / ny;
            let mut spec = template.clone();
            spec.start = StartPose {
                y_offset: grid.y_center(iy),
                height: grid.z_center(iz),
            };
            spec.wind_mean = wind_mean;
            spec.wind_seed = derive_seed(master_seed, cell as u64, k as u64);
            run_trial(&spec, drone).map(|r| r.outcome.is_success())
        })
        .collect::<Result<Vec<bool>>>()?;

    let mut map = vec![0.0; cells];
    for (job, ok) in successes.iter().enumerate() {
        if *ok {
            map[job / n_trials as usize] += 1.0;
        }
    }
    for p in &mut map {
        *p /= n_trials as f64;
    }
    Ok(SuccessMap {
        grid: *grid,
        n_trials,
        wind_mean,
        cells: map,
    })
}

/// Cell-wise minimum across maps on the same grid: a cell survives at 100%
/// only if every input holds it at 100%.
pub fn merge_maps(maps: &[SuccessMap]) -> Result<SuccessMap> {
    let first = maps
        .first()
        .ok_or_else(|| SimError::Contract("merge_maps requires at least one map".into()))?;
    for m in &maps[1..] {
        if !m.grid.matches(&first.grid) || m.cells.len() != first.cells.len() {
            return Err(SimError::Contract("merge_maps: grids do not match".into()));
        }
    }
    let mut cells = first.cells.clone();
    for m in &maps[1..] {
        for (c, v) in cells.iter_mut().zip(&m.cells) {
            *c = c.min(*v);
        }
    }
    let n_trials = if maps.iter().all(|m| m.n_trials == first.n_trials) {
        first.n_trials
    } else {
        0
    };
    let wind_mean = if maps.iter().all(|m| m.wind_mean == first.wind_mean) {
        first.wind_mean
    } else {
        0.0
    };
    Ok(SuccessMap {
        grid: first.grid,
        n_trials,
        wind_mean,
        cells,
    })
}

/// Extent of a zone in start-space coordinates, cell edges included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneBounds {
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl ZoneBounds {
    pub fn width(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn height(&self) -> f64 {
        self.z_max - self.z_min
    }
}

/// Cells at or above a probability threshold, with their total footprint
/// area and bounding box (connectivity is not required).
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    /// Member cells as (iy, iz) indices.
    pub cells: Vec<(usize, usize)>,
    /// count * y_step * z_step, m^2.
    pub area: f64,
    /// None when the zone is empty.
    pub bounds: Option<ZoneBounds>,
}

/// Collects the cells with probability >= threshold.
pub fn extract_zone(map: &SuccessMap, threshold: f64) -> Zone {
    let ny = map.grid.ny();
    let mut cells = Vec::new();
    let (mut iy_lo, mut iy_hi, mut iz_lo, mut iz_hi) = (usize::MAX, 0, usize::MAX, 0);
    for (idx, p) in map.cells.iter().enumerate() {
        if *p >= threshold {
            let iy = idx % ny;
            let iz = idx / ny;
            cells.push((iy, iz));
            iy_lo = iy_lo.min(iy);
            iy_hi = iy_hi.max(iy);
            iz_lo = iz_lo.min(iz);
            iz_hi = iz_hi.max(iz);
        }
    }
    let area = cells.len() as f64 * map.grid.y_step * map.grid.z_step;
    let bounds = if cells.is_empty() {
        None
    } else {
        Some(ZoneBounds {
            y_min: map.grid.y_center(iy_lo) - map.grid.y_step / 2.0,
            y_max: map.grid.y_center(iy_hi) + map.grid.y_step / 2.0,
            z_min: map.grid.z_center(iz_lo) - map.grid.z_step / 2.0,
            z_max: map.grid.z_center(iz_hi) + map.grid.z_step / 2.0,
        })
    };
    Zone { cells, area, bounds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_map(grid: GridSpec, p: f64) -> SuccessMap {
        let n = grid.cell_count();
        SuccessMap {
            grid,
            n_trials: 10,
            wind_mean: 0.0,
            cells: vec![p; n],
        }
    }

    #[test]
    fn default_grid_has_the_documented_shape() {
        let g = GridSpec::default();
        assert_eq!(g.ny(), 31);
        assert_eq!(g.nz(), 11);
        assert_eq!(g.cell_count(), 341);
        assert!((g.y_center(0) - (-1.5)).abs() < 1e-12);
        assert!((g.y_center(30) - 1.5).abs() < 1e-12);
        assert!((g.z_center(10) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn grid_validation_rejects_nonsense() {
        let mut g = GridSpec::default();
        g.y_step = 0.0;
        assert!(g.validate().is_err());
        let mut g = GridSpec::default();
        g.z_min = -0.5;
        assert!(g.validate().is_err());
        let mut g = GridSpec::default();
        g.y_max = -2.0;
        assert!(g.validate().is_err());
    }

    fn tiny_grid() -> GridSpec {
        GridSpec {
            y_min: -0.2,
            y_max: 0.2,
            y_step: 0.2,
            z_min: 1.8,
            z_max: 2.2,
            z_step: 0.2,
        }
    }

    #[test]
    fn calm_map_is_binary_and_repeatable() {
        let grid = tiny_grid();
        let mut template = TrialSpec::default();
        template.wind_std = 0.0;
        let drone = DroneParams::default();
        let a = monte_carlo_map(&grid, 1, 0.0, &template, &drone, 7).unwrap();
        let b = monte_carlo_map(&grid, 1, 0.0, &template, &drone, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.cells.iter().all(|p| *p == 0.0 || *p == 1.0));
        // calm centered starts land
        assert_eq!(a.probability(1, 1), 1.0);
    }

    #[test]
    fn parallel_map_matches_sequential_reference() {
        let grid = tiny_grid();
        let template = TrialSpec::default();
        let drone = DroneParams::default();
        let n_trials = 2;
        let par = monte_carlo_map(&grid, n_trials, 1.0, &template, &drone, 11).unwrap();

        // sequential reference with the same seed derivation
        let ny = grid.ny();
        let mut cells = vec![0.0; grid.cell_count()];
        for (cell, slot) in cells.iter_mut().enumerate() {
            for k in 0..n_trials {
                let mut spec = template.clone();
                spec.start = StartPose {
                    y_offset: grid.y_center(cell % ny),
                    height: grid.z_center(cell / ny),
                };
                spec.wind_mean = 1.0;
                spec.wind_seed = derive_seed(11, cell as u64, k as u64);
                if run_trial(&spec, &drone).unwrap().outcome.is_success() {
                    *slot += 1.0;
                }
            }
        }
        for c in &mut cells {
            *c /= n_trials as f64;
        }
        assert_eq!(par.cells, cells);
    }

    #[test]
    fn probabilities_are_exact_trial_fractions() {
        let grid = tiny_grid();
        let template = TrialSpec::default();
        let drone = DroneParams::default();
        let n = 3;
        let map = monte_carlo_map(&grid, n, 2.0, &template, &drone, 5).unwrap();
        for p in &map.cells {
            let k = p * n as f64;
            assert!((k - k.round()).abs() < 1e-12, "p {p} is not a multiple of 1/{n}");
            assert!((0.0..=1.0).contains(p));
        }
    }

    #[test]
    fn map_rejects_empty_work() {
        let grid = GridSpec::default();
        let template = TrialSpec::default();
        let drone = DroneParams::default();
        assert!(matches!(
            monte_carlo_map(&grid, 0, 1.0, &template, &drone, 1),
            Err(SimError::Contract(_))
        ));
    }

    #[test]
    fn merge_of_one_map_is_identity() {
        let m = uniform_map(GridSpec::default(), 0.7);
        let merged = merge_maps(std::slice::from_ref(&m)).unwrap();
        assert_eq!(merged, m);
    }

    #[test]
    fn merge_takes_cellwise_minimum() {
        let grid = GridSpec::default();
        let mut a = uniform_map(grid, 1.0);
        let b = uniform_map(grid, 1.0);
        let mut c = uniform_map(grid, 1.0);
        a.cells[5] = 0.9;
        c.cells[7] = 0.4;
        let merged = merge_maps(&[a.clone(), b.clone(), c.clone()]).unwrap();
        assert_eq!(merged.cells[5], 0.9);
        assert_eq!(merged.cells[7], 0.4);
        assert_eq!(merged.cells[0], 1.0);
        // merged 100% zone is contained in every input's 100% zone
        let zm: std::collections::HashSet<_> =
            extract_zone(&merged, 1.0).cells.into_iter().collect();
        for m in [&a, &b, &c] {
            let zi: std::collections::HashSet<_> =
                extract_zone(m, 1.0).cells.into_iter().collect();
            assert!(zm.is_subset(&zi));
        }
    }

    #[test]
    fn merge_rejects_mismatched_grids() {
        let a = uniform_map(GridSpec::default(), 1.0);
        let b = uniform_map(tiny_grid(), 1.0);
        assert!(matches!(merge_maps(&[a, b]), Err(SimError::Contract(_))));
    }

    #[test]
    fn full_grid_zone_area_is_the_whole_envelope() {
        let zone = extract_zone(&uniform_map(GridSpec::default(), 1.0), 1.0);
        assert_eq!(zone.cells.len(), 341);
        assert!((zone.area - 3.41).abs() < 1e-9);
        let b = zone.bounds.unwrap();
        assert!((b.width() - 3.1).abs() < 1e-9);
        assert!((b.height() - 1.1).abs() < 1e-9);
    }

    #[test]
    fn empty_zone_has_no_bounds() {
        let zone = extract_zone(&uniform_map(GridSpec::default(), 0.0), 1.0);
        assert!(zone.cells.is_empty());
        assert_eq!(zone.area, 0.0);
        assert!(zone.bounds.is_none());
    }

    #[test]
    fn block_zone_bounding_box_matches_its_footprint() {
        let grid = GridSpec::default();
        let mut map = uniform_map(grid, 0.0);
        // 2 cells wide (y), 4 cells tall (z), anchored at (iy=10, iz=3)
        for iz in 3..7 {
            for iy in 10..12 {
                map.cells[iz * grid.ny() + iy] = 1.0;
            }
        }
        let zone = extract_zone(&map, 1.0);
        assert_eq!(zone.cells.len(), 8);
        let b = zone.bounds.unwrap();
        assert!((b.width() - 0.2).abs() < 1e-9, "width {}", b.width());
        assert!((b.height() - 0.4).abs() < 1e-9, "height {}", b.height());
        assert!((zone.area - 0.08).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Merge is idempotent, commutative, and associative.
        #[test]
        fn merge_algebra(
            a in proptest::collection::vec(0.0..=1.0f64, 341),
            b in proptest::collection::vec(0.0..=1.0f64, 341),
            c in proptest::collection::vec(0.0..=1.0f64, 341),
        ) {
            let grid = GridSpec::default();
            let mk = |cells: &Vec<f64>| SuccessMap {
                grid,
                n_trials: 10,
                wind_mean: 0.0,
                cells: cells.clone(),
            };
            let (ma, mb, mc) = (mk(&a), mk(&b), mk(&c));
            let idem = merge_maps(&[ma.clone(), ma.clone()]).unwrap();
            prop_assert_eq!(&idem.cells, &ma.cells);
            let ab = merge_maps(&[ma.clone(), mb.clone()]).unwrap();
            let ba = merge_maps(&[mb.clone(), ma.clone()]).unwrap();
            prop_assert_eq!(&ab.cells, &ba.cells);
            let ab_c = merge_maps(&[ab, mc.clone()]).unwrap();
            let bc = merge_maps(&[mb, mc]).unwrap();
            let a_bc = merge_maps(&[ma, bc]).unwrap();
            prop_assert_eq!(ab_c.cells, a_bc.cells);
        }

        // Zone area equals cell count times cell area for any threshold.
        #[test]
        fn zone_area_counts_cells(
            cells in proptest::collection::vec(0.0..=1.0f64, 341),
            threshold in 0.0..=1.0f64,
        ) {
            let map = SuccessMap {
                grid: GridSpec::default(),
                n_trials: 10,
                wind_mean: 0.0,
                cells,
            };
            let zone = extract_zone(&map, threshold);
            let count = map.cells.iter().filter(|p| **p >= threshold).count();
            prop_assert_eq!(zone.cells.len(), count);
            prop_assert!((zone.area - count as f64 * 0.01).abs() < 1e-9);
        }
    }
}
