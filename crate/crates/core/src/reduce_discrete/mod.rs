//! Compiles a QBF instance into a non-crossing displacement function on a
//! discrete torus of squares whose unique cycle encodes the answer.

mod layout;

pub use layout::{core_displacement, CoreLayout, RowLabel, RowType, LAYOUT_BOUND};

use std::fmt::Write as _;

use thiserror::Error;

use crate::gridflow::{
    find_cycle, find_cycle_with_budget, successor, Displacement, DisplacementOracle, GridDomain, GridError,
    GridPoint, Rect, Square,
};
use crate::qbf::QbfInstance;

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("instance has {n} variables, layout bound is {bound}")]
    BoundExceeded { n: usize, bound: usize },
    #[error("point {0} is not on the cycle")]
    NotOnCycle(GridPoint),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("construction error: {0}")]
    Construction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Decision,
    Search,
}

/// Behaviour of one square of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Laminar(Displacement),
    CornerTopRight,
    CornerBottomRight,
    CornerBottomLeft,
    CornerTopLeft,
    /// Funnels every column to the centre.
    Funnel,
    /// Funnel that lets the leftmost column through unchanged.
    FunnelKeepLeft,
    /// Funnel that lets the rightmost column through unchanged. Its bottom
    /// row is laminar so nothing goes UL right above the core's top row.
    FunnelKeepRight,
    Core,
}

/// The succinct displacement function: holds only the instance, the layout
/// and one role per square.
#[derive(Debug, Clone)]
pub struct CompiledOracle {
    inst: QbfInstance,
    layout: CoreLayout,
    side: u32,
    roles: Vec<Role>,
}

impl CompiledOracle {
    pub fn role(&self, square: usize) -> Role {
        self.roles[square]
    }

    pub fn layout(&self) -> &CoreLayout {
        &self.layout
    }

    pub fn instance(&self) -> &QbfInstance {
        &self.inst
    }

    /// Side length `N` of the non-core squares.
    pub fn side(&self) -> u32 {
        self.side
    }

    /// Track index of `p`: 0 on the outer boundary of the ring, `N-1` next
    /// to the hole. `None` inside funnel and core squares.
    pub fn track(&self, p: GridPoint) -> Option<u32> {
        let m = self.side - 1;
        let (i, j) = (p.i, p.j);
        Some(match self.roles[p.square as usize] {
            Role::Laminar(Displacement::U) => i,
            Role::Laminar(Displacement::R) => m - j,
            Role::Laminar(Displacement::D) => m - i,
            Role::Laminar(Displacement::L) => j,
            Role::CornerTopRight => m - i.max(j),
            Role::CornerBottomRight => (m - i).min(j),
            Role::CornerBottomLeft => i.min(j),
            Role::CornerTopLeft => i.min(m - j),
            _ => return None,
        })
    }
}

impl DisplacementOracle for CompiledOracle {
    fn displacement(&self, p: GridPoint) -> Displacement {
        use Displacement::*;
        let m = self.side - 1;
        let c = m / 2;
        let (i, j) = (p.i, p.j);
        let funnel = |i: u32| match i.cmp(&c) {
            std::cmp::Ordering::Less => UR,
            std::cmp::Ordering::Greater => UL,
            std::cmp::Ordering::Equal => U,
        };
        match self.roles[p.square as usize] {
            Role::Laminar(d) => d,
            Role::CornerTopRight => if i < j { R } else { D },
            Role::CornerBottomRight => if i + j > m { D } else { L },
            Role::CornerBottomLeft => if i > j { L } else { U },
            Role::CornerTopLeft => if j < m - i { U } else { R },
            Role::Funnel => funnel(i),
            Role::FunnelKeepLeft => if i == 0 { U } else { funnel(i) },
            Role::FunnelKeepRight => if i == m || j == 0 { U } else { funnel(i) },
            Role::Core => core_displacement(&self.inst, &self.layout, j as u64, self.layout.signed_column(i)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReductionOutput {
    pub domain: GridDomain,
    pub oracle: CompiledOracle,
    /// Centre of the core's bottom row.
    pub start: GridPoint,
    pub variant: Variant,
}

/// Ring position (column, row) on the 7x7 layout of `S1..S24`.
fn ring_cell(k: usize) -> (u32, u32) {
    match k {
        1..=3 => (k as u32 + 2, 6),
        4 => (6, 6),
        5..=9 => (6, 10 - k as u32),
        10 => (6, 0),
        11..=15 => (16 - k as u32, 0),
        16 => (0, 0),
        17..=21 => (0, k as u32 - 16),
        22 => (0, 6),
        23 | 24 => (k as u32 - 22, 6),
        _ => unreachable!(),
    }
}

fn ring_role(k: usize) -> Role {
    use Displacement::*;
    match k {
        1..=3 | 23 | 24 => Role::Laminar(R),
        4 => Role::CornerTopRight,
        5..=9 => Role::Laminar(D),
        10 => Role::CornerBottomRight,
        11..=15 => Role::Laminar(L),
        16 => Role::CornerBottomLeft,
        17 | 20 | 21 => Role::Laminar(U),
        18 => Role::Funnel,
        19 => Role::Core,
        22 => Role::CornerTopLeft,
        _ => unreachable!(),
    }
}

fn cell_rect(gx: u32, gy: u32, y_lo: f64, y_hi: f64) -> Rect {
    let u = 1.0 / 7.0;
    Rect { x0: gx as f64 * u, x1: (gx + 1) as f64 * u, y0: (gy as f64 + y_lo) * u, y1: (gy as f64 + y_hi) * u }
}

pub fn compile_decision(inst: &QbfInstance) -> Result<ReductionOutput, ReduceError> {
    compile(inst, Variant::Decision, LAYOUT_BOUND)
}

pub fn compile_search(inst: &QbfInstance) -> Result<ReductionOutput, ReduceError> {
    compile(inst, Variant::Search, LAYOUT_BOUND)
}

pub fn compile(inst: &QbfInstance, variant: Variant, bound: usize) -> Result<ReductionOutput, ReduceError> {
    let layout = CoreLayout::with_bound(inst.n(), bound)?;
    let side = layout.columns();
    let rows = u32::try_from(layout.total_rows())
        .map_err(|_| ReduceError::Construction("core too tall".into()))?;

    let mut squares = Vec::new();
    let mut roles = Vec::new();
    for k in 1..=24 {
        let (gx, gy) = ring_cell(k);
        let mut role = ring_role(k);
        // the search variant halves S18 and S19 and stacks copies above them
        let (lo, hi) = match (variant, k) {
            (Variant::Search, 18) => {
                role = Role::FunnelKeepLeft;
                (0.0, 0.5)
            }
            (Variant::Search, 19) => (-0.5, 0.0),
            _ => (0.0, 1.0),
        };
        let rect = if variant == Variant::Search && k == 19 { cell_rect(gx, gy - 1, 0.5, 1.0) } else { cell_rect(gx, gy, lo, hi) };
        let height = if role == Role::Core { rows } else { side };
        squares.push(Square { name: format!("S{k}"), width: side, height, rect });
        roles.push(role);
    }
    if variant == Variant::Search {
        squares.push(Square { name: "S18'".into(), width: side, height: side, rect: cell_rect(0, 3, 0.0, 0.5) });
        roles.push(Role::FunnelKeepRight);
        squares.push(Square { name: "S19'".into(), width: side, height: rows, rect: cell_rect(0, 3, 0.5, 1.0) });
        roles.push(Role::Core);
    }

    let mut dom = GridDomain::new(squares);
    let s = |k: usize| k - 1;
    for k in [22, 23, 24, 1, 2, 3] {
        dom.stitch_horizontal(s(k), s(if k == 24 { 1 } else if k == 22 { 23 } else { k + 1 }));
    }
    for k in 4..=9 {
        dom.stitch_vertical(s(k + 1), s(k));
    }
    for k in 10..=15 {
        dom.stitch_horizontal(s(k + 1), s(k));
    }
    let left: Vec<usize> = match variant {
        Variant::Decision => vec![s(16), s(17), s(18), s(19), s(20), s(21), s(22)],
        Variant::Search => vec![s(16), s(17), s(18), s(19), 24, 25, s(20), s(21), s(22)],
    };
    for w in left.windows(2) {
        dom.stitch_vertical(w[0], w[1]);
    }
    dom.validate()?;

    let oracle = CompiledOracle { inst: inst.clone(), layout, side, roles };
    let start = GridPoint::new(s(19), layout.local_column(0), 0);
    Ok(ReductionOutput { domain: dom, oracle, start, variant })
}

impl ReductionOutput {
    pub fn core_square(&self) -> usize {
        18
    }

    fn is_core_or_funnel(&self, square: u32) -> bool {
        matches!(self.oracle.role(square as usize), Role::Core | Role::Funnel | Role::FunnelKeepLeft | Role::FunnelKeepRight)
    }

    /// Decides the instance by following the trajectory from the bottom of
    /// the core until it leaves through the top.
    pub fn decide(&self) -> Result<bool, ReduceError> {
        let dom = &self.domain;
        let core = self.core_square() as u32;
        let budget = 4 * dom.total_points();
        let mut p = self.start;
        for _ in 0..budget {
            let q = successor(dom, &self.oracle, p)?;
            if q.square != core {
                let last = self.oracle.side() - 1;
                return match q.i {
                    0 => Ok(true),
                    i if i == last => Ok(false),
                    i => Err(ReduceError::Construction(format!("core exit in interior column {i}"))),
                };
            }
            p = q;
        }
        Err(GridError::BudgetExceeded(budget).into())
    }

    /// Reads the instance's answer off a point on the cycle.
    pub fn classify_cycle_point(&self, p: GridPoint) -> Result<bool, ReduceError> {
        let dom = &self.domain;
        let cert = find_cycle(dom, &self.oracle, p)?;
        if cert.mu != 0 {
            return Err(ReduceError::NotOnCycle(p));
        }
        let last = self.oracle.side() - 1;
        let mut q = p;
        if self.is_core_or_funnel(q.square) {
            match (self.variant, q.square) {
                (Variant::Search, 17 | 18) => return Ok(q.i == 0),
                (Variant::Search, 24 | 25) => return Ok(q.i != last),
                _ => {
                    let budget = 2 * dom.total_points();
                    let mut steps = 0;
                    while self.is_core_or_funnel(q.square) {
                        q = successor(dom, &self.oracle, q)?;
                        steps += 1;
                        if steps > budget {
                            return Err(GridError::BudgetExceeded(budget).into());
                        }
                    }
                }
            }
        }
        match self.oracle.track(q) {
            Some(0) => Ok(true),
            Some(t) if t == last => Ok(false),
            t => Err(ReduceError::Construction(format!("cycle point {q} on track {t:?}"))),
        }
    }

    /// Human-readable dump of the oracle's answers at the given points.
    pub fn format_queries(&self, points: &[GridPoint]) -> String {
        let mut out = String::new();
        for &p in points {
            let name = &self.domain.square(p.square as usize).name;
            let _ = writeln!(out, "{} {} {} {}", name, p.i, p.j, self.oracle.displacement(p));
        }
        out
    }
}

/// Decides `inst` by compiling the decision variant and following the flow.
pub fn decide_via_flow(inst: &QbfInstance) -> Result<bool, ReduceError> {
    compile_decision(inst)?.decide()
}

/// Entry of the cycle reached from the start point.
pub fn cycle_entry(out: &ReductionOutput) -> Result<GridPoint, ReduceError> {
    let cert = find_cycle_with_budget(&out.domain, &out.oracle, out.start, 4 * out.domain.total_points())?;
    Ok(cert.entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridflow::{check_noncrossing, ExplicitGraph};
    use crate::qbf::{brute_force_decide, Quantifier};

    fn all_instances(n: usize) -> Vec<QbfInstance> {
        let mut v = Vec::new();
        for qmask in 0..(1u32 << n) {
            let qs: Vec<Quantifier> = (0..n)
                .map(|k| if qmask >> k & 1 == 1 { Quantifier::Forall } else { Quantifier::Exists })
                .collect();
            for table in 0..(1u64 << (1 << n)) {
                let tt: Vec<bool> = (0..1 << n).map(|r| table >> r & 1 == 1).collect();
                v.push(QbfInstance::from_truth_table(qs.clone(), &tt).unwrap());
            }
        }
        v
    }

    #[test]
    fn decides_every_small_instance() {
        for n in 1..=2 {
            for inst in all_instances(n) {
                assert_eq!(decide_via_flow(&inst).unwrap(), brute_force_decide(&inst).unwrap(), "{inst}");
            }
        }
    }

    #[test]
    fn unique_cycle_no_fixpoint_noncrossing() {
        for n in 1..=2 {
            for inst in all_instances(n).into_iter().step_by(3) {
                for variant in [Variant::Decision, Variant::Search] {
                    let out = compile(&inst, variant, LAYOUT_BOUND).unwrap();
                    let v = check_noncrossing(&out.domain, &out.oracle);
                    assert!(v.is_empty(), "{inst} {variant:?} {:?}", &v[..v.len().min(3)]);
                    let g = ExplicitGraph::build(&out.domain, &out.oracle).unwrap();
                    assert!(!g.has_fixpoint());
                    let cycles = g.cycles();
                    assert_eq!(cycles.len(), 1, "{inst} {variant:?}");
                    let expected = brute_force_decide(&inst).unwrap();
                    for &node in &cycles[0] {
                        let p = g.point(&out.domain, node);
                        assert_eq!(out.classify_cycle_point(p).unwrap(), expected, "{inst} {variant:?} {p}");
                    }
                }
            }
        }
    }

    #[test]
    fn off_cycle_point_is_rejected() {
        let inst = all_instances(1).remove(0);
        let out = compile_decision(&inst).unwrap();
        // every trajectory runs through the start, so pick an interior track
        let p = GridPoint::new(20, 1, 0);
        assert!(matches!(out.classify_cycle_point(p), Err(ReduceError::NotOnCycle(_))));
        assert!(out.classify_cycle_point(out.start).is_ok());
    }
}
