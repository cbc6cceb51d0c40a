//! Continuous counterpart of the grid reduction: a C^1 planar field on a
//! racetrack annulus whose core side replays the discrete core row by row.

mod checks;
pub mod formula;
pub mod geometry;

use std::fmt::Write as _;

use crate::epscycle::{integrate_step, Trajectory};
use crate::field::{
    estimate_lipschitz, ArithCircuit, CircuitBuilder, CircuitField, Domain, FieldError, Provenance, VectorField,
};
use crate::gridflow::Displacement;
use crate::qbf::QbfInstance;
use crate::reduce_discrete::{core_displacement, CoreLayout, ReduceError, LAYOUT_BOUND};

pub use checks::{check_c1_boundary, discrete_shadow, C1Report, ShadowReport};
use formula::{Build, Ctx, Num};
pub use geometry::{Cell, Corner, Geometry, Interval, Part, Piece, Row, SidePlan, TrackSide};
use geometry::{CELL, INSET, R_IN, SETTLE_GAIN, SIDE};

/// Reference flow shapes on a unit cell, by the displacements at its two
/// bottom corners. Square kinds have unit vertical speed; `Quadrant` is the
/// rotation `(y, -x)` about the cell's centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellFlowKind {
    UU,
    ULUL,
    UUL,
    ULU,
    URUR,
    UUR,
    URU,
    Quadrant,
}

impl CellFlowKind {
    /// Kind for a cell whose left corner moves `left` and right corner `right`.
    pub fn from_pair(left: Displacement, right: Displacement) -> Option<Self> {
        use Displacement::*;
        Some(match (left, right) {
            (U, U) => Self::UU,
            (UL, UL) => Self::ULUL,
            (U, UL) => Self::UUL,
            (UL, U) => Self::ULU,
            (UR, UR) => Self::URUR,
            (U, UR) => Self::UUR,
            (UR, U) => Self::URU,
            _ => return None,
        })
    }

    /// Velocity at local `(x, y)` in `[0, 1]^2`.
    pub fn velocity(self, x: f64, y: f64) -> [f64; 2] {
        let bump = 6.0 * y * y - 6.0 * y;
        let vx = match self {
            Self::UU => 0.0,
            Self::ULUL => bump,
            Self::UUL => x * bump,
            Self::ULU => (1.0 - x) * bump,
            Self::URUR => -bump,
            Self::UUR => -x * bump,
            Self::URU => -(1.0 - x) * bump,
            Self::Quadrant => return [y, -x],
        };
        [vx, 1.0]
    }
}

fn lane_sign(d: Displacement) -> f64 {
    match d {
        Displacement::UL => -1.0,
        Displacement::UR => 1.0,
        _ => 0.0,
    }
}

/// Side-frame quantities of a point.
struct Frame<V> {
    s: V,
    u: V,
    sdot: V,
}

/// The compiled continuous field for one instance.
#[derive(Debug, Clone)]
pub struct ContinuousReduction {
    inst: QbfInstance,
    layout: CoreLayout,
    geom: Geometry,
    plans: [SidePlan; 4],
    domain: Domain,
    lipschitz: f64,
}

pub fn compile_continuous(inst: &QbfInstance) -> Result<ContinuousReduction, ReduceError> {
    compile_continuous_bounded(inst, LAYOUT_BOUND)
}

pub fn compile_continuous_bounded(inst: &QbfInstance, bound: usize) -> Result<ContinuousReduction, ReduceError> {
    let layout = CoreLayout::with_bound(inst.n(), bound)?;
    let geom = Geometry::new(layout.columns(), layout.total_rows(), inst.n());
    let plans = TrackSide::ALL.map(|s| geom.plan(s));
    let domain = Domain::Custom { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0], name: "racetrack".into() };
    let mut red = ContinuousReduction { inst: inst.clone(), layout, geom, plans, domain, lipschitz: 0.0 };
    // sampled estimates are lower bounds, so keep a margin over both
    let sampled = estimate_lipschitz(&red, 20_000, 0).map_err(|e| ReduceError::Construction(e.to_string()))?;
    red.lipschitz = 1.5 * sampled.max(red.lipschitz_scale());
    Ok(red)
}

impl ContinuousReduction {
    pub fn instance(&self) -> &QbfInstance {
        &self.inst
    }

    pub fn layout(&self) -> &CoreLayout {
        &self.layout
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn plan(&self, side: TrackSide) -> &SidePlan {
        &self.plans[side.index()]
    }

    pub fn locate(&self, x: f64, y: f64) -> Piece {
        geometry::locate(&self.plans, x, y)
    }

    pub fn cell_of(&self, piece: Piece) -> Cell {
        match piece {
            Piece::Quadrant(c) => Cell::of_corner(c),
            Piece::Side { side, interval, .. } => self.plans[side.index()].intervals[interval].cell,
        }
    }

    /// Centre lane just above the bottom of the core.
    pub fn start_point(&self) -> [f64; 2] {
        let s = CELL + 1e-9 * self.geom.row_len;
        let (x, y) = self.geom.point(TrackSide::Left, s, (self.geom.lanes / 2) as f64);
        [x, y]
    }

    /// Lane coordinate `u` of a point on a side (lane `t` is centred at `u = t`).
    pub fn lane_of(&self, side: TrackSide, x: f64, y: f64) -> f64 {
        let (_, rho) = self.geom.side_coords(side, x, y);
        self.geom.lane_coord(rho)
    }

    /// Lateral push of `row` on lane `t`: `-1` left, `+1` right, `0` straight.
    pub fn lane_push(&self, row: Row, t: i64) -> f64 {
        let lanes = self.geom.lanes as i64;
        if t < 0 || t >= lanes {
            return 0.0;
        }
        let c = lanes / 2;
        match row {
            Row::Funnel => (c - t).signum() as f64,
            Row::Core(r) => lane_sign(core_displacement(&self.inst, &self.layout, r, t - c)),
        }
    }

    /// Reference kind of the flow between lanes `lane` and `lane + 1` on core `row`.
    pub fn cell_kind(&self, row: u64, lane: i64) -> Option<CellFlowKind> {
        let c = self.layout.half_width();
        let d = |t: i64| core_displacement(&self.inst, &self.layout, row, t - c);
        CellFlowKind::from_pair(d(lane), d(lane + 1))
    }

    fn push_pair(&self, iv: &Interval, lane: i32) -> Option<(f64, f64)> {
        match iv.part {
            Part::Drive(row) => Some((self.lane_push(row, lane as i64), self.lane_push(row, lane as i64 + 1))),
            _ => None,
        }
    }

    fn frame<C: Ctx>(&self, c: &mut C, side: TrackSide, x: &C::V, y: &C::V) -> Frame<C::V> {
        let (s, rho) = match side {
            TrackSide::Left => {
                let k = c.k(INSET);
                (c.sub(y, &k), c.sub(&k, x))
            }
            TrackSide::Top => {
                let a = c.k(INSET);
                let b = c.k(1.0 - INSET);
                (c.sub(x, &a), c.sub(y, &b))
            }
            TrackSide::Right => {
                let b = c.k(1.0 - INSET);
                (c.sub(&b, y), c.sub(x, &b))
            }
            TrackSide::Bottom => {
                let a = c.k(INSET);
                let b = c.k(1.0 - INSET);
                (c.sub(&b, x), c.sub(&a, y))
            }
        };
        let scaled = c.scale(1.0 / self.geom.sigma, &rho);
        let u = c.rsub(self.geom.u0(), &scaled);
        let sdot = c.scale(self.geom.omega, &rho);
        Frame { s, u, sdot }
    }

    /// Lateral velocity `w'` on one piece of a side.
    fn wdot<C: Ctx>(&self, c: &mut C, f: &Frame<C::V>, iv: &Interval, lane: i32) -> C::V {
        let g = &self.geom;
        let chi = |c: &mut C, xi: &C::V| {
            let m = formula::smoothstep(c, xi);
            c.rsub(1.0, &m)
        };
        match iv.part {
            Part::EntryBlend => {
                let xi = c.scale(1.0 / g.blend, &f.s);
                let w = chi(c, &xi);
                let sw = c.mul(&f.s, &w);
                c.scale(g.omega, &sw)
            }
            Part::ExitBlend => {
                let back = c.rsub(SIDE, &f.s);
                let xi = c.scale(1.0 / g.blend, &back);
                let w = chi(c, &xi);
                let e = c.scale(-1.0, &back);
                let ew = c.mul(&e, &w);
                c.scale(g.omega, &ew)
            }
            _ => {
                let s0 = c.k(iv.win0);
                let ds = c.sub(&f.s, &s0);
                let tau = c.scale(1.0 / iv.win_len, &ds);
                let l = c.k(lane as f64);
                let z = c.sub(&f.u, &l);
                let prof = match iv.part {
                    Part::Settle => formula::settle(c, &tau, &z, SETTLE_GAIN),
                    Part::Relax => formula::relax(c, &tau, &z, SETTLE_GAIN),
                    Part::Drive(row) => {
                        let (lo, hi) = self.push_pair(iv, lane).unwrap_or((0.0, 0.0));
                        let gain = if row == Row::Funnel { g.funnel_gain } else { geometry::CORE_GAIN };
                        formula::drive(c, &tau, &z, gain, lo, hi)
                    }
                    Part::EntryBlend | Part::ExitBlend => unreachable!(),
                };
                let slope = c.scale(g.sigma / iv.win_len, &prof);
                c.mul(&f.sdot, &slope)
            }
        }
    }

    /// Whether a piece's lateral velocity vanishes identically.
    fn inert(&self, iv: &Interval, lane: i32) -> bool {
        matches!(self.push_pair(iv, lane), Some((lo, hi)) if lo == 0.0 && hi == 0.0)
    }

    /// Cartesian velocity from `(s', w')`; each component is a signed copy of one of them.
    fn to_xy<C: Ctx>(c: &mut C, side: TrackSide, sdot: C::V, wdot: C::V) -> [C::V; 2] {
        match side {
            TrackSide::Left => [wdot, sdot],
            TrackSide::Top => [sdot, c.scale(-1.0, &wdot)],
            TrackSide::Right => [c.scale(-1.0, &wdot), c.scale(-1.0, &sdot)],
            TrackSide::Bottom => [c.scale(-1.0, &sdot), wdot],
        }
    }

    fn quadrant<C: Ctx>(&self, c: &mut C, corner: Corner, x: &C::V, y: &C::V) -> [C::V; 2] {
        let (ox, oy) = corner.center();
        let ky = c.k(oy);
        let dy = c.sub(y, &ky);
        let kx = c.k(ox);
        let dx = c.sub(x, &kx);
        [c.scale(self.geom.omega, &dy), c.scale(-self.geom.omega, &dx)]
    }

    /// Velocity of the given piece's formula at `(x, y)`, whether or not the
    /// point lies in that piece.
    pub fn piece_velocity(&self, piece: Piece, x: f64, y: f64) -> [f64; 2] {
        let c = &mut Num;
        match piece {
            Piece::Quadrant(corner) => self.quadrant(c, corner, &x, &y),
            Piece::Side { side, interval, lane } => {
                let f = self.frame(c, side, &x, &y);
                let iv = &self.plans[side.index()].intervals[interval];
                let w = if iv.lane_dependent() && self.inert(iv, lane) { 0.0 } else { self.wdot(c, &f, iv, lane) };
                Self::to_xy(c, side, f.sdot, w)
            }
        }
    }

    /// Arithmetic circuit computing the same values as the native field.
    /// Region and interval selection uses `sgn` of affine functions of the
    /// inputs only.
    pub fn circuit(&self) -> Result<ArithCircuit, FieldError> {
        let mut b = CircuitBuilder::new(2);
        let x = b.input(0);
        let y = b.input(1);
        let one = b.int(1);
        let above = |b: &mut CircuitBuilder, v, t: f64| {
            let k = b.float(t);
            let d = b.sub(v, k);
            b.sgn(d)
        };
        let xa = above(&mut b, x, INSET);
        let xh = above(&mut b, x, 0.5);
        let xb = above(&mut b, x, 1.0 - INSET);
        let ya = above(&mut b, y, INSET);
        let yb = above(&mut b, y, 1.0 - INSET);
        let y_lo = b.sub(one, ya);
        let y_mid = b.sub(ya, yb);
        let x_lo = b.sub(one, xa);
        let x_mid = b.sub(xa, xb);
        let x_left = b.sub(one, xh);

        let mut terms: [Vec<_>; 2] = [Vec::new(), Vec::new()];
        let quadrants = [
            (Corner::BottomLeft, y_lo, x_lo),
            (Corner::BottomRight, y_lo, xb),
            (Corner::TopLeft, yb, x_lo),
            (Corner::TopRight, yb, xb),
        ];
        for (corner, iy, ix) in quadrants {
            let ind = b.mul(iy, ix);
            let v = self.quadrant(&mut Build(&mut b), corner, &x, &y);
            for k in 0..2 {
                let t = b.mul(ind, v[k]);
                terms[k].push(t);
            }
        }

        let side_ind = [
            (TrackSide::Left, y_mid, x_left),
            (TrackSide::Top, yb, x_mid),
            (TrackSide::Right, y_mid, xh),
            (TrackSide::Bottom, y_lo, x_mid),
        ];
        for (side, iy, ix) in side_ind {
            let plan = &self.plans[side.index()];
            let sind = b.mul(iy, ix);
            let f = self.frame(&mut Build(&mut b), side, &x, &y);
            let zero = b.int(0);
            let s_only = Self::to_xy(&mut Build(&mut b), side, f.sdot, zero);
            let (along, across) = if matches!(side, TrackSide::Left | TrackSide::Right) { (y, x) } else { (x, y) };
            let steps = |b: &mut CircuitBuilder, v, breaks: &[f64]| {
                let mut st = vec![one];
                for &t in breaks {
                    let k = b.float(t);
                    let d = b.sub(v, k);
                    st.push(b.sgn(d));
                }
                st.push(zero);
                (0..st.len() - 1).map(|j| b.sub(st[j], st[j + 1])).collect::<Vec<_>>()
            };
            let slots = steps(&mut b, along, &plan.raw_breaks);
            let lane_slots = steps(&mut b, across, &plan.lane_breaks);
            // s' part: the same on the whole side
            let wcomp = if matches!(side, TrackSide::Left | TrackSide::Right) { 0 } else { 1 };
            let t = b.mul(sind, s_only[1 - wcomp]);
            terms[1 - wcomp].push(t);

            for (j, &slot) in slots.iter().enumerate() {
                let k = plan.interval_for_slot(j);
                let iv = &plan.intervals[k];
                let ind = b.mul(sind, slot);
                let mut emit = |b: &mut CircuitBuilder, ind, lane: i32| {
                    let w = self.wdot(&mut Build(&mut *b), &f, iv, lane);
                    let z = b.int(0);
                    let v = Self::to_xy(&mut Build(&mut *b), side, z, w);
                    let t = b.mul(ind, v[wcomp]);
                    terms[wcomp].push(t);
                };
                if !iv.lane_dependent() {
                    emit(&mut b, ind, 0);
                    continue;
                }
                for (jl, &lslot) in lane_slots.iter().enumerate() {
                    let lane = plan.lane_for_slot(jl);
                    if self.inert(iv, lane) {
                        continue;
                    }
                    let li = b.mul(ind, lslot);
                    emit(&mut b, li, lane);
                }
            }
        }
        let out: Vec<_> = terms.iter().map(|t| b.sum(t)).collect();
        b.finish(out)
    }

    pub fn circuit_field(&self) -> Result<CircuitField, FieldError> {
        Ok(CircuitField::new(self.circuit()?, self.domain.clone())?.with_lipschitz(self.lipschitz))
    }

    /// Order-of-magnitude Lipschitz constant: the steepest lateral profile
    /// slope over the shortest window, times the largest speed.
    pub fn lipschitz_scale(&self) -> f64 {
        let g = &self.geom;
        let speed = g.omega * g.r_out;
        let window = g.row_len.min(CELL - g.blend);
        // max |d/dz| of the drive and relax profiles
        let slope = (2.0 * geometry::CORE_GAIN * 1.875 * 1.5).max(2.0 * SETTLE_GAIN * 1.875);
        g.omega + speed * slope / window
    }

    /// RK4 step size resolving the thinnest feature with about 40 steps.
    pub fn default_step(&self) -> f64 {
        let g = &self.geom;
        g.row_len.min(g.blend).min(g.sigma) / (40.0 * g.omega * g.r_out)
    }

    /// Time for one lap at the slowest speed, rounded up.
    pub fn lap_time_bound(&self) -> f64 {
        let perimeter = 4.0 * SIDE + 2.0 * std::f64::consts::PI * self.geom.r_out;
        perimeter / (self.geom.omega * R_IN)
    }

    /// Integrates from `x0` for time `t_end` with the default step.
    pub fn trace(&self, x0: [f64; 2], t_end: f64) -> Result<Trajectory, ReduceError> {
        crate::epscycle::integrate(self, &x0, self.default_step(), t_end)
            .map_err(|e| ReduceError::Construction(e.to_string()))
    }

    /// Decides the instance by flowing from the bottom of the core to its
    /// top and reading the exit lane: outermost is TRUE, innermost FALSE.
    pub fn decide(&self) -> Result<bool, ReduceError> {
        self.decide_counted().map(|(answer, _)| answer)
    }

    /// Like [`decide`](Self::decide), also returning the number of
    /// integration steps until the core exit.
    pub fn decide_counted(&self) -> Result<(bool, u64), ReduceError> {
        let h = self.default_step();
        let mut x = self.start_point().to_vec();
        let max_steps = (4.0 * CELL / (self.geom.omega * R_IN * h)) as u64 + 10;
        for step in 1..=max_steps {
            x = integrate_step(self, &x, h).map_err(|e| ReduceError::Construction(e.to_string()))?;
            if self.cell_of(self.locate(x[0], x[1])) == Cell::A3 {
                let u = self.lane_of(TrackSide::Left, x[0], x[1]);
                let lane = u.round();
                let last = (self.geom.lanes - 1) as f64;
                if (u - lane).abs() > 0.25 {
                    return Err(ReduceError::Construction(format!("core exit between lanes at u = {u}")));
                }
                return match lane {
                    l if l == 0.0 => Ok((true, step)),
                    l if l == last => Ok((false, step)),
                    l => Err(ReduceError::Construction(format!("core exit on interior lane {l}"))),
                };
            }
        }
        Err(ReduceError::Construction("trajectory did not leave the core".into()))
    }

    /// Line-oriented geometry dump for renderers: one cell per line.
    pub fn geometry_text(&self) -> String {
        let g = &self.geom;
        let mut out = String::new();
        let _ = writeln!(out, "track r_in {} r_out {} lanes {} rows {}", R_IN, g.r_out, g.lanes, g.rows);
        for side in TrackSide::ALL {
            let plan = &self.plans[side.index()];
            let mut k = 0;
            while k < plan.intervals.len() {
                let cell = plan.intervals[k].cell;
                let s0 = plan.intervals[k].s0;
                while k < plan.intervals.len() && plan.intervals[k].cell == cell {
                    k += 1;
                }
                let s1 = plan.intervals[k - 1].s1;
                let (x0, y0) = g.point(side, s0, -0.5);
                let (x1, y1) = g.point(side, s1, g.lanes as f64 - 0.5);
                let _ = writeln!(
                    out,
                    "rect {cell} {} {} {} {}",
                    x0.min(x1),
                    y0.min(y1),
                    x0.max(x1),
                    y0.max(y1)
                );
            }
        }
        for corner in [Corner::TopLeft, Corner::TopRight, Corner::BottomRight, Corner::BottomLeft] {
            let (cx, cy) = corner.center();
            let _ = writeln!(out, "arc {} {cx} {cy} {} {}", Cell::of_corner(corner), R_IN, g.r_out);
        }
        out
    }
}

impl VectorField for ContinuousReduction {
    fn dim(&self) -> usize {
        2
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let v = self.piece_velocity(self.locate(x[0], x[1]), x[0], x[1]);
        out.copy_from_slice(&v);
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Inside the annulus between radii `r_in` and `r_out` of the rounded square.
    fn contains(&self, x: &[f64]) -> bool {
        if x.len() != 2 {
            return false;
        }
        let rho = match self.locate(x[0], x[1]) {
            Piece::Quadrant(c) => {
                let (cx, cy) = c.center();
                ((x[0] - cx).powi(2) + (x[1] - cy).powi(2)).sqrt()
            }
            Piece::Side { side, .. } => self.geom.side_coords(side, x[0], x[1]).1,
        };
        (R_IN..=self.geom.r_out).contains(&rho)
    }

    /// Sampled estimate with a 1.5x margin; not a proven bound.
    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }

    fn provenance(&self) -> Provenance {
        Provenance::CompiledReduction
    }
}
