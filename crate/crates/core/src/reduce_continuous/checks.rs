use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::epscycle::Trajectory;
use crate::gridflow::successor;
use crate::reduce_discrete::{compile_decision, ReduceError};

use super::geometry::{CELL, SIDE};
use super::{Cell, ContinuousReduction, Piece, TrackSide};

/// Largest mismatches across piece boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct C1Report {
    pub samples: usize,
    /// Max-norm jump of the velocity.
    pub max_value_jump: f64,
    /// Max-entry Jacobian jump over `max(1, |J|)`.
    pub max_jacobian_jump: f64,
    pub worst_point: Option<[f64; 2]>,
}

fn jacobian(red: &ContinuousReduction, piece: Piece, p: [f64; 2], h: f64) -> [[f64; 2]; 2] {
    let mut j = [[0.0; 2]; 2];
    for axis in 0..2 {
        let mut a = p;
        let mut b = p;
        a[axis] += h;
        b[axis] -= h;
        let va = red.piece_velocity(piece, a[0], a[1]);
        let vb = red.piece_velocity(piece, b[0], b[1]);
        for k in 0..2 {
            j[k][axis] = (va[k] - vb[k]) / (2.0 * h);
        }
    }
    j
}

/// Samples points on the interfaces between pieces (interval ends, lane
/// boundaries inside lane-dependent intervals, side/quadrant junctions) and
/// compares the two neighbouring formulas there.
pub fn check_c1_boundary(red: &ContinuousReduction, samples: usize, seed: u64) -> C1Report {
    let g = red.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6 * g.row_len.min(g.sigma).min(g.blend);
    let nudge = 1e-3 * h;
    let lanes = g.lanes as f64;
    let mut report = C1Report { samples: 0, max_value_jump: 0.0, max_jacobian_jump: 0.0, worst_point: None };
    for _ in 0..samples {
        let side = TrackSide::ALL[rng.gen_range(0..4)];
        let plan = red.plan(side);
        let (p, normal_along) = if rng.gen_bool(0.5) {
            let k = rng.gen_range(0..=plan.intervals.len());
            let s = if k == plan.intervals.len() { SIDE } else { plan.intervals[k].s0 };
            let u = rng.gen_range(-0.5..lanes - 0.5);
            (g.point(side, s, u), true)
        } else {
            let lanes_dep: Vec<_> = plan.intervals.iter().filter(|iv| iv.lane_dependent()).collect();
            let iv = lanes_dep[rng.gen_range(0..lanes_dep.len())];
            let s = rng.gen_range(iv.s0..iv.s1);
            let t = rng.gen_range(0..g.lanes) as f64;
            (g.point(side, s, t), false)
        };
        let vertical = matches!(side, TrackSide::Left | TrackSide::Right);
        // axis of the boundary normal
        let axis = if vertical == normal_along { 1 } else { 0 };
        let mut lo = [p.0, p.1];
        let mut hi = lo;
        lo[axis] -= nudge;
        hi[axis] += nudge;
        let a = red.locate(lo[0], lo[1]);
        let b = red.locate(hi[0], hi[1]);
        if a == b {
            continue;
        }
        report.samples += 1;
        let at = [p.0, p.1];
        let va = red.piece_velocity(a, at[0], at[1]);
        let vb = red.piece_velocity(b, at[0], at[1]);
        let dv = (va[0] - vb[0]).abs().max((va[1] - vb[1]).abs());
        let ja = jacobian(red, a, at, h);
        let jb = jacobian(red, b, at, h);
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for r in 0..2 {
            for c in 0..2 {
                diff = diff.max((ja[r][c] - jb[r][c]).abs());
                scale = scale.max(ja[r][c].abs()).max(jb[r][c].abs());
            }
        }
        let rel = diff / scale;
        if rel > report.max_jacobian_jump || dv > report.max_value_jump {
            report.worst_point = Some(at);
        }
        report.max_value_jump = report.max_value_jump.max(dv);
        report.max_jacobian_jump = report.max_jacobian_jump.max(rel);
    }
    report
}

/// Comparison of a continuous trajectory with the discrete flow from the
/// corresponding start point.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowReport {
    /// Collapsed cell sequence of the trajectory.
    pub continuous_cells: Vec<Cell>,
    /// Collapsed cell sequence of the grid orbit, same length.
    pub discrete_cells: Vec<Cell>,
    /// `(row, expected column, lane coordinate)` at each core row boundary
    /// crossing; row `H` is the exit.
    pub lane_checks: Vec<(u64, u32, f64)>,
    pub first_mismatch: Option<String>,
}

impl ShadowReport {
    pub fn ok(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Visits shorter than this are treated as grazing a cell corner.
pub const MIN_VISIT: f64 = 1e-6;
/// Largest allowed distance of a row crossing from its lane centre.
pub const LANE_TOL: f64 = 0.25;

/// Checks that `traj`, started at the reduction's start point, passes the
/// same cells as the grid orbit from the core start and crosses every core
/// row in the matching column.
pub fn discrete_shadow(red: &ContinuousReduction, traj: &Trajectory) -> Result<ShadowReport, ReduceError> {
    let g = red.geometry();
    let rows = g.rows;

    let mut visits: Vec<(Cell, f64)> = Vec::new();
    let mut crossings: Vec<(u64, f64)> = Vec::new();
    let eps = 1e-6 * g.row_len;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..traj.len() {
        let x = traj.point(k);
        let piece = red.locate(x[0], x[1]);
        let cell = red.cell_of(piece);
        if visits.last().map(|v| v.0) != Some(cell) {
            visits.push((cell, traj.time(k)));
        }
        let on_left = matches!(piece, Piece::Side { side: TrackSide::Left, .. });
        let cur = on_left.then(|| {
            let (s, rho) = g.side_coords(TrackSide::Left, x[0], x[1]);
            (s, g.lane_coord(rho))
        });
        if let (Some((s0, u0)), Some((s1, u1))) = (prev, cur) {
            if s1 > s0 {
                let first = (((s0 - CELL) / g.row_len).floor() as i64 - 1).max(0) as u64;
                for r in first..=rows {
                    let sr = if r == rows { 2.0 * CELL } else { CELL + r as f64 * g.row_len };
                    if sr + eps >= s1 {
                        break;
                    }
                    if s0 <= sr + eps {
                        let u = u0 + (u1 - u0) * (sr - s0) / (s1 - s0);
                        crossings.push((r, u));
                    }
                }
            }
        }
        prev = cur;
    }
    let end = traj.len().checked_sub(1).map_or(0.0, |k| traj.time(k));
    let mut cont: Vec<Cell> = Vec::new();
    for (k, &(cell, t)) in visits.iter().enumerate() {
        let t_next = visits.get(k + 1).map_or(end, |v| v.1);
        let last = k + 1 == visits.len();
        if !last && t_next - t < MIN_VISIT {
            continue;
        }
        if cont.last() != Some(&cell) {
            cont.push(cell);
        }
    }

    let out = compile_decision(red.instance())?;
    let core = out.core_square() as u32;
    let budget = 64 * out.domain.total_points() * (cont.len() as u64 + 1);
    let mut disc: Vec<Cell> = Vec::new();
    let mut columns: Vec<(u64, u32)> = Vec::new();
    let mut p = out.start;
    for _ in 0..budget {
        if disc.len() > cont.len() && columns.len() >= crossings.len() {
            break;
        }
        let cell = Cell::of_square(p.square as usize + 1)
            .ok_or_else(|| ReduceError::Construction(format!("square {} has no cell", p.square)))?;
        if disc.last() != Some(&cell) {
            disc.push(cell);
        }
        let q = successor(&out.domain, &out.oracle, p)?;
        if p.square == core {
            columns.push((p.j as u64, p.i));
            if q.square != core {
                columns.push((rows, q.i));
            }
        }
        p = q;
    }
    disc.truncate(cont.len());

    let mut first_mismatch = None;
    if let Some(k) = cont.iter().zip(&disc).position(|(a, b)| a != b) {
        first_mismatch = Some(format!("cell {k}: continuous {} vs discrete {}", cont[k], disc[k]));
    } else if disc.len() < cont.len() {
        first_mismatch = Some("discrete orbit too short".into());
    }
    let mut checks = Vec::new();
    for (&(r, u), &(dr, col)) in crossings.iter().zip(&columns) {
        checks.push((r, col, u));
        if first_mismatch.is_none() && (r != dr || (u - col as f64).abs() > LANE_TOL) {
            first_mismatch = Some(format!("row {r}: lane {u:.4} vs column {col} (discrete row {dr})"));
        }
    }
    if first_mismatch.is_none() && crossings.len() > columns.len() {
        first_mismatch = Some("more row crossings than discrete core visits".into());
    }
    Ok(ShadowReport { continuous_cells: cont, discrete_cells: disc, lane_checks: checks, first_mismatch })
}
