//! Plot-ready CSV and JSON outputs. All files are UTF-8 with LF line
//! endings and a mandatory header row; floats use the shortest decimal
//! representation that round-trips, so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use swarm_lab::integrator::{EventKind, TrajectoryRecord};
use swarm_lab::region::{Polyline, RegionGrid};
use swarm_lab::threshold::Threshold;
use swarm_lab::{Error, Result};

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
}

fn push_num(line: &mut String, v: f64) {
    // shortest round-trip decimal; infinities serialize as inf/-inf
    let _ = write!(line, "{v}");
}

pub fn event_kind_name(kind: EventKind) -> &'static str {
    match kind {
        EventKind::RegionEntry => "region_entry",
        EventKind::Divergence => "divergence",
        EventKind::Collision => "collision",
        EventKind::End => "end",
    }
}

/// One row per record: time, flattened positions and velocities, spread
/// functionals, energy when present, control magnitude, active agent.
pub fn trajectory_csv(rec: &TrajectoryRecord) -> String {
    let (n, d) = (rec.n, rec.d);
    let mut out = String::new();
    out.push('t');
    for i in 0..n {
        for k in 0..d {
            let _ = write!(out, ",x{i}_{k}");
        }
    }
    for i in 0..n {
        for k in 0..d {
            let _ = write!(out, ",v{i}_{k}");
        }
    }
    out.push_str(",x_spread,v_spread");
    if rec.energy.is_some() {
        out.push_str(",energy,kinetic,attraction,repulsion");
    }
    out.push_str(",control_norm,active_agent\n");

    for (idx, t) in rec.times.iter().enumerate() {
        let mut line = String::new();
        push_num(&mut line, *t);
        let s = &rec.states[idx];
        for c in s.x() {
            line.push(',');
            push_num(&mut line, *c);
        }
        for c in s.v() {
            line.push(',');
            push_num(&mut line, *c);
        }
        line.push(',');
        push_num(&mut line, rec.x_spread[idx]);
        line.push(',');
        push_num(&mut line, rec.v_spread[idx]);
        if let (Some(e), Some(parts)) = (&rec.energy, &rec.energy_parts) {
            line.push(',');
            push_num(&mut line, e[idx]);
            line.push(',');
            push_num(&mut line, parts[idx].kinetic);
            line.push(',');
            push_num(&mut line, parts[idx].attraction);
            line.push(',');
            push_num(&mut line, parts[idx].repulsion);
        }
        line.push(',');
        push_num(&mut line, rec.control_norms[idx]);
        let _ = write!(
            line,
            ",{}",
            rec.active_agent[idx].map(|i| i as i64).unwrap_or(-1)
        );
        line.push('\n');
        out.push_str(&line);
    }
    out
}

#[derive(Serialize)]
struct EventDto {
    t: f64,
    kind: &'static str,
}

#[derive(Serialize)]
pub struct RunSummary {
    n: usize,
    d: usize,
    final_time: f64,
    events: Vec<EventDto>,
    region_entry_time: Option<f64>,
    final_x_spread: f64,
    final_v_spread: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<f64>,
    max_control_norm: f64,
    admissible: bool,
}

impl RunSummary {
    pub fn from_record(rec: &TrajectoryRecord) -> Self {
        Self {
            n: rec.n,
            d: rec.d,
            final_time: *rec.times.last().unwrap_or(&0.0),
            events: rec
                .events
                .iter()
                .map(|e| EventDto {
                    t: e.t,
                    kind: event_kind_name(e.kind),
                })
                .collect(),
            region_entry_time: rec.region_entry_time,
            final_x_spread: *rec.x_spread.last().unwrap_or(&0.0),
            final_v_spread: rec.final_v_spread(),
            final_energy: rec.final_energy(),
            energy_threshold: rec.vartheta.and_then(|t| match t {
                Threshold::Finite(v) => Some(v),
                Threshold::Infinite => Some(f64::INFINITY),
            }),
            budget: rec.budget,
            max_control_norm: rec.control_norms.iter().cloned().fold(0.0, f64::max),
            admissible: rec.admissible,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Grid CSV: one row per cell, row-major over (v0, x0).
pub fn grid_csv(grid: &RegionGrid) -> String {
    let mut out = String::from("x0,v0,trials,successes,probability,wilson_lo,wilson_hi\n");
    for (iv, &v0) in grid.v0_axis.iter().enumerate() {
        for (ix, &x0) in grid.x0_axis.iter().enumerate() {
            let c = grid.cell(ix, iv);
            let mut line = String::new();
            push_num(&mut line, x0);
            line.push(',');
            push_num(&mut line, v0);
            let _ = write!(line, ",{},{}", c.trials, c.successes);
            line.push(',');
            push_num(&mut line, c.probability);
            line.push(',');
            push_num(&mut line, c.wilson_lo);
            line.push(',');
            push_num(&mut line, c.wilson_hi);
            line.push('\n');
            out.push_str(&line);
        }
    }
    out
}

/// Boundary CSV: `v0_star` is `inf` where the whole column is certified.
pub fn boundary_csv(x0_axis: &[f64], boundary: &[Option<f64>]) -> String {
    let mut out = String::from("x0,v0_star\n");
    for (x0, b) in x0_axis.iter().zip(boundary) {
        let mut line = String::new();
        push_num(&mut line, *x0);
        line.push(',');
        match b {
            Some(v) => push_num(&mut line, *v),
            None => line.push_str("inf"),
        }
        line.push('\n');
        out.push_str(&line);
    }
    out
}

/// Contours CSV across levels: `(level, polyline, vertex, x0, v0)` rows.
pub fn contours_csv(levels: &[(f64, Vec<Polyline>)]) -> String {
    let mut out = String::from("level,polyline,vertex,x0,v0\n");
    for (level, polylines) in levels {
        for (pid, line_pts) in polylines.iter().enumerate() {
            for (vid, (x, v)) in line_pts.iter().enumerate() {
                let mut line = String::new();
                push_num(&mut line, *level);
                let _ = write!(line, ",{pid},{vid}");
                line.push(',');
                push_num(&mut line, *x);
                line.push(',');
                push_num(&mut line, *v);
                line.push('\n');
                out.push_str(&line);
            }
        }
    }
    out
}

/// Sweep CSV: one row per parameter value; the final functional is the
/// velocity spread for alignment models and the total energy for
/// attraction-repulsion models.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,region_entry_time,final_functional\n");
    for row in rows {
        let mut line = String::new();
        push_num(&mut line, row.value);
        line.push(',');
        match row.region_entry_time {
            Some(t) => push_num(&mut line, t),
            None => {}
        }
        line.push(',');
        push_num(&mut line, row.final_functional);
        line.push('\n');
        out.push_str(&line);
    }
    out
}

pub struct SweepRow {
    pub value: f64,
    pub region_entry_time: Option<f64>,
    pub final_functional: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_roundtrips() {
        let mut s = String::new();
        push_num(&mut s, 0.1);
        assert_eq!(s, "0.1");
        let mut s = String::new();
        push_num(&mut s, f64::INFINITY);
        assert_eq!(s, "inf");
    }

    #[test]
    fn sweep_rows_with_missing_entry_time() {
        let rows = vec![
            SweepRow {
                value: 0.1,
                region_entry_time: Some(2.5),
                final_functional: 1.0,
            },
            SweepRow {
                value: 1.0,
                region_entry_time: None,
                final_functional: 42.0,
            },
        ];
        let csv = sweep_csv(&rows);
        assert_eq!(
            csv,
            "value,region_entry_time,final_functional\n0.1,2.5,1\n1,,42\n"
        );
    }
}
