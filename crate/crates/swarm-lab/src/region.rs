//! Monte-Carlo mapping of consensus regions: rescaled random initial data,
//! trial batches per spread cell, probability grids with binomial
//! uncertainty, marching-squares contours and theoretical boundary overlays.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::control::ControlSpec;
use crate::dynamics::ModelSpec;
use crate::error::{Error, Result};
use crate::integrator::{simulate, SimConfig};
use crate::kernel::{KernelSpec, PsiSpec};
use crate::state::{position_spread, velocity_spread, AgentState};
use crate::threshold::{cs_region_check, cs_region_check_extended, Threshold};

/// Velocity-spread level below which a finished trial counts as consensus.
pub const SUCCESS_V: f64 = 1e-5;

/// Trials exit early once the spread falls an order below the success level.
pub const EARLY_EXIT_V: f64 = 1e-6;

/// Per-cell Monte-Carlo outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub trials: u32,
    pub successes: u32,
    pub probability: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// Probability-of-consensus lattice over (X0, V0).
#[derive(Debug, Clone)]
pub struct RegionGrid {
    pub x0_axis: Vec<f64>,
    pub v0_axis: Vec<f64>,
    /// Row-major: `cells[iv * x0_axis.len() + ix]`.
    pub cells: Vec<CellStats>,
}

impl RegionGrid {
    pub fn cell(&self, ix: usize, iv: usize) -> &CellStats {
        &self.cells[iv * self.x0_axis.len() + ix]
    }

    /// Grid-cell area of the super-level set `{probability >= level}`,
    /// counting each lattice point with its surrounding cell area.
    pub fn superlevel_area(&self, level: f64) -> f64 {
        let nx = self.x0_axis.len();
        let nv = self.v0_axis.len();
        let mut area = 0.0;
        for iv in 0..nv {
            for ix in 0..nx {
                if self.cell(ix, iv).probability >= level {
                    let wx = axis_cell_width(&self.x0_axis, ix);
                    let wv = axis_cell_width(&self.v0_axis, iv);
                    area += wx * wv;
                }
            }
        }
        area
    }
}

fn axis_cell_width(axis: &[f64], i: usize) -> f64 {
    let n = axis.len();
    if n < 2 {
        return 1.0;
    }
    let lo = if i == 0 {
        axis[0]
    } else {
        0.5 * (axis[i - 1] + axis[i])
    };
    let hi = if i == n - 1 {
        axis[n - 1]
    } else {
        0.5 * (axis[i] + axis[i + 1])
    };
    hi - lo
}

/// Wilson 95% score interval for `s` successes out of `n`.
pub fn wilson_interval(successes: u32, trials: u32) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z: f64 = 1.959963984540054; // 97.5% normal quantile
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Rescale a raw draw so its spread pair is exactly `(x0, v0)`.
///
/// Zero targets collapse the corresponding component onto its mean.
pub fn rescale_to_spreads(raw: &AgentState, x0: f64, v0: f64) -> Result<AgentState> {
    if x0 < 0.0 || v0 < 0.0 {
        return Err(Error::domain("spread targets must be nonnegative"));
    }
    let (n, d) = (raw.count(), raw.dim());
    let xs = position_spread(raw);
    let vs = velocity_spread(raw);

    let x = scale_component(raw.x(), xs, x0, n, d, "position")?;
    let v = scale_component(raw.v(), vs, v0, n, d, "velocity")?;
    AgentState::new(d, n, x, v)
}

fn scale_component(
    raw: &[f64],
    spread: f64,
    target: f64,
    n: usize,
    d: usize,
    what: &str,
) -> Result<Vec<f64>> {
    if target == 0.0 {
        // collapse onto the mean: exactly zero spread
        let mean = crate::vecn::block_mean(raw, d, n);
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            out[i * d..(i + 1) * d].copy_from_slice(&mean);
        }
        return Ok(out);
    }
    if spread <= 0.0 {
        return Err(Error::domain(format!(
            "degenerate raw draw: zero {what} spread cannot be rescaled to {target}"
        )));
    }
    let scale = (target / spread).sqrt();
    Ok(raw.iter().map(|&c| scale * c).collect())
}

/// Random state with positions and velocities uniform in `[-1, 1]^{dN}`.
pub fn uniform_draw(n: usize, d: usize, rng: &mut ChaCha8Rng) -> AgentState {
    let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    AgentState::new(d, n, x, v).expect("lengths match by construction")
}

/// Deterministic per-trial RNG stream derived from the run seed, the cell
/// index and the trial index.
pub fn trial_rng(seed: u64, cell: u64, trial: u64) -> ChaCha8Rng {
    let mut s = seed;
    for salt in [
        cell.wrapping_mul(0x9E3779B97F4A7C15),
        trial.wrapping_mul(0xD1B54A32D192ED03).wrapping_add(0xA24BAED4963EE407),
    ] {
        s ^= salt;
        s = s.wrapping_mul(0xFF51AFD7ED558CCD);
        s ^= s >> 33;
    }
    ChaCha8Rng::seed_from_u64(s)
}

/// Monte-Carlo protocol parameters for one grid run.
#[derive(Debug, Clone)]
pub struct TrialProtocol {
    pub trials: u32,
    pub success_v: f64,
    /// Number of regeneration attempts for degenerate raw draws.
    pub max_regen: u32,
}

impl Default for TrialProtocol {
    fn default() -> Self {
        Self {
            trials: 20,
            success_v: SUCCESS_V,
            max_regen: 100,
        }
    }
}

/// Run the trial batch for one `(x0, v0)` cell: draw, rescale, simulate,
/// count final spreads at or below the success level. Simulation blowups
/// count as failures.
#[allow(clippy::too_many_arguments)]
pub fn run_trials(
    x0: f64,
    v0: f64,
    model: &ModelSpec,
    control: &ControlSpec,
    protocol: &TrialProtocol,
    cfg: &SimConfig,
    seed: u64,
    cell_index: u64,
) -> Result<CellStats> {
    let (n, d) = (model.agent_count(), model.dim());
    let mut successes = 0;
    for trial in 0..protocol.trials {
        let mut rng = trial_rng(seed, cell_index, trial as u64);
        let mut state = None;
        for _ in 0..protocol.max_regen {
            let raw = uniform_draw(n, d, &mut rng);
            // zero targets never need regeneration; nonzero targets need a
            // nondegenerate component
            let ok_x = x0 == 0.0 || position_spread(&raw) > 0.0;
            let ok_v = v0 == 0.0 || velocity_spread(&raw) > 0.0;
            if ok_x && ok_v {
                state = Some(rescale_to_spreads(&raw, x0, v0)?);
                break;
            }
        }
        let state = state.ok_or(Error::DegenerateDraw(protocol.max_regen as usize))?;
        let mut trial_cfg = cfg.clone();
        trial_cfg.early_exit_v = Some(EARLY_EXIT_V.min(protocol.success_v));
        match simulate(model, control, &state, &trial_cfg) {
            Ok(rec) => {
                if rec.final_v_spread() <= protocol.success_v {
                    successes += 1;
                }
            }
            Err(_) => {} // counts as a failure
        }
    }
    let probability = successes as f64 / protocol.trials as f64;
    let (wilson_lo, wilson_hi) = wilson_interval(successes, protocol.trials);
    Ok(CellStats {
        trials: protocol.trials,
        successes,
        probability,
        wilson_lo,
        wilson_hi,
    })
}

/// Fill a probability grid over the axes; cells are independent work items
/// and the result is deterministic for a fixed seed regardless of the
/// parallel schedule.
pub fn probability_grid(
    x0_axis: &[f64],
    v0_axis: &[f64],
    model: &ModelSpec,
    control: &ControlSpec,
    protocol: &TrialProtocol,
    cfg: &SimConfig,
    seed: u64,
) -> Result<RegionGrid> {
    if x0_axis.is_empty() || v0_axis.is_empty() {
        return Err(Error::config("grid axes must be nonempty"));
    }
    for axis in [x0_axis, v0_axis] {
        if axis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("grid axes must be strictly increasing"));
        }
        if axis[0] < 0.0 {
            return Err(Error::config("spread axes start at zero or above"));
        }
    }
    let nx = x0_axis.len();
    let cell_job = |idx: usize| {
        let (iv, ix) = (idx / nx, idx % nx);
        run_trials(
            x0_axis[ix],
            v0_axis[iv],
            model,
            control,
            protocol,
            cfg,
            seed,
            idx as u64,
        )
    };
    #[cfg(feature = "parallel")]
    let cells: Result<Vec<CellStats>> = (0..nx * v0_axis.len()).into_par_iter().map(cell_job).collect();
    #[cfg(not(feature = "parallel"))]
    let cells: Result<Vec<CellStats>> = (0..nx * v0_axis.len()).map(cell_job).collect();
    Ok(RegionGrid {
        x0_axis: x0_axis.to_vec(),
        v0_axis: v0_axis.to_vec(),
        cells: cells?,
    })
}

/// Which certified boundary to overlay on a grid.
#[derive(Debug, Clone)]
pub enum BoundaryVariant {
    /// The autonomous consensus region.
    Autonomous,
    /// The region enlarged by local-average feedback of strength `gamma`
    /// within `radius`.
    Enlarged { gamma: f64, radius: f64 },
}

/// Certified boundary `V0*(X0)` sampled on the axis: the square of the
/// threshold side of the region inequality. `None` entries mean the whole
/// column is certified (non-integrable kernel or infinite enlargement).
pub fn theoretical_boundary(
    x0_axis: &[f64],
    a: &KernelSpec,
    n: usize,
    variant: &BoundaryVariant,
) -> Result<Vec<Option<f64>>> {
    x0_axis
        .iter()
        .map(|&x0| {
            let cert = match variant {
                BoundaryVariant::Autonomous => cs_region_check(x0, 0.0, a, n)?,
                BoundaryVariant::Enlarged { gamma, radius } => cs_region_check_extended(
                    x0,
                    0.0,
                    a,
                    n,
                    *gamma,
                    &PsiSpec::Indicator { radius: *radius },
                    n as f64,
                )?,
            };
            Ok(match cert.threshold {
                Threshold::Finite(g) => Some(g * g),
                Threshold::Infinite => None,
            })
        })
        .collect()
}

/// A contour polyline in `(X0, V0)` coordinates.
pub type Polyline = Vec<(f64, f64)>;

/// Marching-squares isolines of the probability field at `level`, with
/// linearly interpolated vertices. Saddle cells are disambiguated by the
/// cell average. Segments are chained into polylines.
pub fn extract_contours(grid: &RegionGrid, level: f64) -> Vec<Polyline> {
    let nx = grid.x0_axis.len();
    let nv = grid.v0_axis.len();
    if nx < 2 || nv < 2 {
        return Vec::new();
    }
    let value = |ix: usize, iv: usize| grid.cell(ix, iv).probability;
    let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();

    for iv in 0..nv - 1 {
        for ix in 0..nx - 1 {
            // corners counterclockwise from lower-left
            let corners = [
                value(ix, iv),
                value(ix + 1, iv),
                value(ix + 1, iv + 1),
                value(ix, iv + 1),
            ];
            let xs = [grid.x0_axis[ix], grid.x0_axis[ix + 1]];
            let vs = [grid.v0_axis[iv], grid.v0_axis[iv + 1]];
            let mut case = 0usize;
            for (bit, &c) in corners.iter().enumerate() {
                if c >= level {
                    case |= 1 << bit;
                }
            }
            if case == 0 || case == 0b1111 {
                continue;
            }
            let lerp = |a: f64, b: f64, va: f64, vb: f64| {
                if (vb - va).abs() < 1e-300 {
                    0.5 * (a + b)
                } else {
                    a + (level - va) / (vb - va) * (b - a)
                }
            };
            // edges: 0 bottom, 1 right, 2 top, 3 left
            let edge_point = |e: usize| -> (f64, f64) {
                match e {
                    0 => (lerp(xs[0], xs[1], corners[0], corners[1]), vs[0]),
                    1 => (xs[1], lerp(vs[0], vs[1], corners[1], corners[2])),
                    2 => (lerp(xs[0], xs[1], corners[3], corners[2]), vs[1]),
                    _ => (xs[0], lerp(vs[0], vs[1], corners[0], corners[3])),
                }
            };
            let mut emit = |e1: usize, e2: usize| {
                segments.push((edge_point(e1), edge_point(e2)));
            };
            match case {
                0b0001 => emit(3, 0),
                0b0010 => emit(0, 1),
                0b0100 => emit(1, 2),
                0b1000 => emit(2, 3),
                0b0011 => emit(3, 1),
                0b0110 => emit(0, 2),
                0b1100 => emit(3, 1),
                0b1001 => emit(0, 2),
                0b0111 => emit(3, 2),
                0b1011 => emit(1, 2),
                0b1101 => emit(0, 1),
                0b1110 => emit(3, 0),
                0b0101 | 0b1010 => {
                    // saddle: resolve by the cell average
                    let avg = corners.iter().sum::<f64>() / 4.0;
                    let joined = (avg >= level) == (case == 0b0101);
                    if joined {
                        emit(3, 0);
                        emit(1, 2);
                    } else {
                        emit(3, 2);
                        emit(0, 1);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain_segments(segments)
}

fn chain_segments(mut segments: Vec<((f64, f64), (f64, f64))>) -> Vec<Polyline> {
    let close =
        |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9;
    let mut polylines = Vec::new();
    while let Some((start, end)) = segments.pop() {
        let mut line = vec![start, end];
        loop {
            let mut extended = false;
            let mut i = 0;
            while i < segments.len() {
                let (a, b) = segments[i];
                let head = *line.first().unwrap();
                let tail = *line.last().unwrap();
                if close(tail, a) {
                    line.push(b);
                    segments.swap_remove(i);
                    extended = true;
                } else if close(tail, b) {
                    line.push(a);
                    segments.swap_remove(i);
                    extended = true;
                } else if close(head, b) {
                    line.insert(0, a);
                    segments.swap_remove(i);
                    extended = true;
                } else if close(head, a) {
                    line.insert(0, b);
                    segments.swap_remove(i);
                    extended = true;
                } else {
                    i += 1;
                }
            }
            if !extended {
                break;
            }
        }
        polylines.push(line);
    }
    polylines
}

/// Evenly spaced axis from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlLaw, ControlSpec};
    use crate::state::spread_pair;

    fn cs_model(n: usize, d: usize) -> ModelSpec {
        ModelSpec::CuckerSmale {
            n,
            d,
            kernel: KernelSpec::cucker_smale(1.0, 1.0, 1.0).unwrap(),
        }
    }

    #[test]
    fn rescaling_hits_requested_spreads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let raw = uniform_draw(5, 2, &mut rng);
            let s = rescale_to_spreads(&raw, 2.5, 0.7).unwrap();
            let (x, v) = spread_pair(&s);
            assert!((x - 2.5).abs() <= 1e-10 * 2.5, "x = {x}");
            assert!((v - 0.7).abs() <= 1e-10 * 0.7, "v = {v}");
        }
    }

    #[test]
    fn rescaling_scales_by_square_root_ratio() {
        // raw spread 4, target 1: coordinates halve
        let raw = AgentState::new(1, 2, vec![-2.0, 2.0], vec![-1.0, 1.0]).unwrap();
        assert_eq!(position_spread(&raw), 4.0);
        let s = rescale_to_spreads(&raw, 1.0, 1.0).unwrap();
        assert_eq!(s.x(), &[-1.0, 1.0]);
    }

    #[test]
    fn zero_targets_collapse_components() {
        let raw = AgentState::new(1, 2, vec![-2.0, 6.0], vec![-1.0, 3.0]).unwrap();
        let s = rescale_to_spreads(&raw, 0.0, 0.0).unwrap();
        assert_eq!(s.x(), &[2.0, 2.0]);
        assert_eq!(s.v(), &[1.0, 1.0]);
        let (x, v) = spread_pair(&s);
        assert_eq!((x, v), (0.0, 0.0));
    }

    #[test]
    fn zero_v0_cell_always_succeeds() {
        let model = cs_model(2, 1);
        let cfg = SimConfig {
            t_end: 1.0,
            record_stride: 100,
            ..Default::default()
        };
        let protocol = TrialProtocol::default();
        let stats = run_trials(
            1.0,
            0.0,
            &model,
            &ControlSpec::none(),
            &protocol,
            &cfg,
            7,
            0,
        )
        .unwrap();
        assert_eq!(stats.successes, 20);
        assert_eq!(stats.probability, 1.0);
    }

    #[test]
    fn certified_inside_cell_always_succeeds() {
        let model = cs_model(2, 1);
        let kernel = KernelSpec::cucker_smale(1.0, 1.0, 1.0).unwrap();
        // a cell safely inside the certified region
        let (x0, v0) = (0.25, 0.05);
        assert!(cs_region_check(x0, v0, &kernel, 2).unwrap().inside);
        let cfg = SimConfig {
            t_end: 100.0,
            record_stride: 1000,
            ..Default::default()
        };
        let stats = run_trials(
            x0,
            v0,
            &model,
            &ControlSpec::none(),
            &TrialProtocol::default(),
            &cfg,
            11,
            3,
        )
        .unwrap();
        assert_eq!(stats.successes, stats.trials);
    }

    #[test]
    fn grid_matches_run_trials_and_is_deterministic() {
        let model = cs_model(2, 1);
        let cfg = SimConfig {
            t_end: 5.0,
            record_stride: 1000,
            ..Default::default()
        };
        let protocol = TrialProtocol {
            trials: 5,
            ..Default::default()
        };
        let control = ControlSpec::none();
        let g1 = probability_grid(&[0.5], &[0.1], &model, &control, &protocol, &cfg, 42).unwrap();
        let direct = run_trials(0.5, 0.1, &model, &control, &protocol, &cfg, 42, 0).unwrap();
        assert_eq!(g1.cells[0], direct);

        let g2 = probability_grid(&[0.5], &[0.1], &model, &control, &protocol, &cfg, 42).unwrap();
        assert_eq!(g1.cells, g2.cells);
    }

    #[test]
    fn total_information_feedback_wins_everywhere() {
        // infinite-radius local average: every cell converges
        let model = cs_model(3, 1);
        let control = ControlSpec::new(ControlLaw::LocalAverage {
            gamma: 1.0,
            radius: f64::INFINITY,
        });
        let cfg = SimConfig {
            t_end: 40.0,
            record_stride: 1000,
            ..Default::default()
        };
        let protocol = TrialProtocol {
            trials: 4,
            ..Default::default()
        };
        let grid = probability_grid(
            &[1.0, 9.0],
            &[4.0, 9.0],
            &model,
            &control,
            &protocol,
            &cfg,
            5,
        )
        .unwrap();
        for c in &grid.cells {
            assert_eq!(c.probability, 1.0, "{c:?}");
        }
    }

    #[test]
    fn wilson_interval_sanity() {
        let (lo, hi) = wilson_interval(20, 20);
        assert!(lo > 0.8 && (hi - 1.0).abs() < 1e-12);
        let (lo, hi) = wilson_interval(0, 20);
        assert!(lo == 0.0 && hi < 0.2);
        let (lo, hi) = wilson_interval(10, 20);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn boundary_examples() {
        let kernel = KernelSpec::cucker_smale(0.5, 1.0, 1.0).unwrap();
        let axis = linspace(0.0, 4.0, 9);
        let boundary =
            theoretical_boundary(&axis, &kernel, 2, &BoundaryVariant::Autonomous).unwrap();
        // at X0 = 0 the certified level is (pi/8)^2
        let expected = (std::f64::consts::PI / 8.0).powi(2);
        assert!((boundary[0].unwrap() - expected).abs() < 1e-12);
        // nonincreasing in X0
        for w in boundary.windows(2) {
            assert!(w[1].unwrap() <= w[0].unwrap() + 1e-15);
        }

        // zero-strength enlargement equals the autonomous curve
        let same = theoretical_boundary(
            &axis,
            &kernel,
            2,
            &BoundaryVariant::Enlarged {
                gamma: 0.0,
                radius: 3.0,
            },
        )
        .unwrap();
        assert_eq!(boundary, same);

        // non-integrable kernel: the whole space is certified
        let heavy = KernelSpec::cucker_smale(1.0, 1.0, 0.4).unwrap();
        let all = theoretical_boundary(&axis, &heavy, 2, &BoundaryVariant::Autonomous).unwrap();
        assert!(all.iter().all(|b| b.is_none()));
    }

    fn constant_grid(p: f64) -> RegionGrid {
        let cells = vec![
            CellStats {
                trials: 20,
                successes: (20.0 * p) as u32,
                probability: p,
                wilson_lo: 0.0,
                wilson_hi: 1.0,
            };
            9
        ];
        RegionGrid {
            x0_axis: vec![0.0, 1.0, 2.0],
            v0_axis: vec![0.0, 1.0, 2.0],
            cells,
        }
    }

    #[test]
    fn constant_grid_has_no_contours() {
        let grid = constant_grid(1.0);
        assert!(extract_contours(&grid, 0.8).is_empty());
    }

    #[test]
    fn half_plane_grid_yields_one_straight_line() {
        // probability 1 below the v0 = 1.5 line, 0 above
        let mut grid = constant_grid(0.0);
        for ix in 0..3 {
            for iv in 0..3 {
                let p = if grid.v0_axis[iv] < 1.5 { 1.0 } else { 0.0 };
                grid.cells[iv * 3 + ix] = CellStats {
                    trials: 20,
                    successes: (20.0 * p) as u32,
                    probability: p,
                    wilson_lo: 0.0,
                    wilson_hi: 1.0,
                };
            }
        }
        let contours = extract_contours(&grid, 0.5);
        assert_eq!(contours.len(), 1, "{contours:?}");
        let line = &contours[0];
        // straight horizontal line at the interpolated height 1.5
        for &(_, v) in line {
            assert!((v - 1.5).abs() < 1e-12);
        }
        let x_min = line.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let x_max = line.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((x_min, x_max), (0.0, 2.0));
    }

    #[test]
    fn superlevel_area_orders_nested_fields() {
        let small = constant_grid(0.0);
        let big = constant_grid(1.0);
        assert!(big.superlevel_area(0.8) > small.superlevel_area(0.8));
    }

    #[test]
    fn trial_rng_streams_are_distinct() {
        let a: u64 = trial_rng(1, 0, 0).random();
        let b: u64 = trial_rng(1, 0, 1).random();
        let c: u64 = trial_rng(1, 1, 0).random();
        let d: u64 = trial_rng(2, 0, 0).random();
        assert!(a != b && a != c && a != d && b != c);
    }
}
