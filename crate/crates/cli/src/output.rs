//! Artifact serialization: CSV for wind records, trajectories, phase logs,
//! maps and sweep tables, plus binary portable graymaps for the success maps.
//! Everything here is a pure function of its inputs, so artifacts are
//! byte-identical across runs and worker counts.

use linesim::control::PhaseTransition;
use linesim::envelope::{GridSpec, SuccessMap, SweepRow, TrajectorySample};
use linesim::wind::WindProfile;
use linesim::{Result, SimError};

/// Wind record as `time_s,wind_mps`, one row per sample, full precision.
pub fn wind_csv(profile: &WindProfile) -> String {
    let mut out = String::from("time_s,wind_mps\n");
    for (i, v) in profile.samples.iter().enumerate() {
        let t = i as f64 * profile.spec.sample_dt;
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

/// Trajectory trace: time, position, velocity, Euler angles, body rates.
pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    let mut out = String::from("t,x,y,z,vx,vy,vz,roll,pitch,yaw,p,q,r\n");
    for s in samples {
        let (roll, pitch, yaw) = s.state.euler_angles();
        let p = s.state.position;
        let v = s.state.velocity;
        let w = s.state.angular_rate;
        out.push_str(&format!(
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            s.t, p.x, p.y, p.z, v.x, v.y, v.z, roll, pitch, yaw, w.x, w.y, w.z
        ));
    }
    out
}

/// State-machine log: `t,phase_from,phase_to,reason`.
pub fn phase_csv(transitions: &[PhaseTransition]) -> String {
    let mut out = String::from("t,phase_from,phase_to,reason\n");
    for tr in transitions {
        out.push_str(&format!(
            "{:.3},{},{},{}\n",
            tr.t,
            tr.from.name(),
            tr.to.name(),
            tr.reason
        ));
    }
    out
}

/// Success map as CSV: header row of lateral cell centers, first column of
/// height centers, probabilities with 3 decimals. Rows run from the highest
/// start altitude down, matching the graymap orientation.
pub fn map_csv(map: &SuccessMap) -> String {
    grid_csv(&map.grid, &map.cells)
}

/// Difference map (e.g. two-stage minus direct) in the same shape; values
/// may be negative.
pub fn delta_csv(grid: &GridSpec, delta: &[f64]) -> String {
    grid_csv(grid, delta)
}

fn grid_csv(grid: &GridSpec, cells: &[f64]) -> String {
    let (ny, nz) = (grid.ny(), grid.nz());
    let mut out = String::from("z_m\\y_m");
    for iy in 0..ny {
        out.push_str(&format!(",{:.3}", grid.y_center(iy)));
    }
    out.push('\n');
    for iz in (0..nz).rev() {
        out.push_str(&format!("{:.3}", grid.z_center(iz)));
        for iy in 0..ny {
            out.push_str(&format!(",{:.3}", cells[iz * ny + iy]));
        }
        out.push('\n');
    }
    out
}

/// Reads a map back from [`map_csv`] output, e.g. for merging. Trial count
/// and wind level are not stored in the CSV, so they come back as 0.
pub fn parse_map_csv(text: &str) -> Result<SuccessMap> {
    let bad = |msg: &str| SimError::Parameter(format!("map csv: {msg}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty document"))?;
    let y_centers: Vec<f64> = header
        .split(',')
        .skip(1)
        .map(|s| s.parse::<f64>().map_err(|_| bad(&format!("bad y center {s:?}"))))
        .collect::<Result<_>>()?;
    if y_centers.is_empty() {
        return Err(bad("header lists no lateral centers"));
    }

    let mut z_centers_desc = Vec::new();
    let mut rows_desc: Vec<Vec<f64>> = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let mut fields = line.split(',');
        let z = fields
            .next()
            .unwrap()
            .parse::<f64>()
            .map_err(|_| bad(&format!("bad height center in row {line:?}")))?;
        let row: Vec<f64> = fields
            .map(|s| s.parse::<f64>().map_err(|_| bad(&format!("bad cell value {s:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != y_centers.len() {
            return Err(bad(&format!(
                "row at z={z} has {} cells, header lists {}",
                row.len(),
                y_centers.len()
            )));
        }
        z_centers_desc.push(z);
        rows_desc.push(row);
    }
    if rows_desc.is_empty() {
        return Err(bad("no data rows"));
    }

    let step_of = |centers: &[f64], axis: &str| -> Result<f64> {
        if centers.len() < 2 {
            // a single row or column carries no spacing information; fall
            // back to the stock cell size so merges of like maps still work
            return Ok(0.1);
        }
        let step = centers[1] - centers[0];
        if !(step > 0.0) {
            return Err(bad(&format!("{axis} centers must increase")));
        }
        for w in centers.windows(2) {
            if ((w[1] - w[0]) - step).abs() > 1e-6 {
                return Err(bad(&format!("{axis} centers are not evenly spaced")));
            }
        }
        Ok(step)
    };

    let mut z_centers = z_centers_desc.clone();
    z_centers.reverse();
    let y_step = step_of(&y_centers, "lateral")?;
    let z_step = step_of(&z_centers, "height")?;
    let grid = GridSpec {
        y_min: y_centers[0],
        y_max: *y_centers.last().unwrap(),
        y_step,
        z_min: z_centers[0],
        z_max: *z_centers.last().unwrap(),
        z_step,
    };
    grid.validate()?;

    let (ny, nz) = (grid.ny(), grid.nz());
    if ny != y_centers.len() || nz != z_centers.len() {
        return Err(bad("centers do not form a regular grid"));
    }
    let mut cells = vec![0.0; ny * nz];
    for (desc_idx, row) in rows_desc.iter().enumerate() {
        let iz = nz - 1 - desc_idx;
        for (iy, &p) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(&format!("probability {p} outside [0, 1]")));
            }
            cells[iz * ny + iy] = p;
        }
    }
    Ok(SuccessMap {
        grid,
        n_trials: 0,
        wind_mean: 0.0,
        cells,
    })
}

/// Ranked sweep table: `kp,kd,zone_area_m2,max_align_time_s,eligible`.
/// A candidate whose probes never stabilized has an empty time field.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("kp,kd,zone_area_m2,max_align_time_s,eligible\n");
    for r in rows {
        let t = match r.max_align_time {
            Some(t) => format!("{t:.2}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{:.4},{},{}\n",
            r.kp, r.kd, r.zone_area, t, r.eligible
        ));
    }
    out
}

/// Renders a success map as a binary portable graymap (P5): one pixel per
/// cell, probability 0 -> 0, 1 -> 255 (round half up), top row = highest
/// start altitude.
pub fn map_pgm(map: &SuccessMap) -> Vec<u8> {
    let (ny, nz) = (map.grid.ny(), map.grid.nz());
    let mut out = format!("P5\n{ny} {nz}\n255\n").into_bytes();
    for iz in (0..nz).rev() {
        for iy in 0..ny {
            let p = map.cells[iz * ny + iy];
            out.push((p * 255.0 + 0.5).floor() as u8);
        }
    }
    out
}
