//! Discrete planar flows on a set of stitched grid squares.
//!
//! Local coordinates: `i` is the column (grows rightward), `j` the row (grows
//! upward). `U = (i, j+1)`, `UR = (i+1, j+1)`, `UL = (i-1, j+1)`. Squares share
//! no grid points; a displacement that leaves a square is carried into the
//! neighbouring square through the edge correspondence registered in the
//! domain.

mod explicit;

pub use explicit::ExplicitGraph;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("point {0} is not in the domain")]
    NotInDomain(GridPoint),
    #[error("displacement {disp} from {point} leaves the domain through the {side:?} edge")]
    LeavesDomain { point: GridPoint, disp: Displacement, side: Side },
    #[error("displacement {disp} from {point} exits through a square corner")]
    CornerExit { point: GridPoint, disp: Displacement },
    #[error("step budget of {0} exceeded")]
    BudgetExceeded(u64),
    #[error("graph of {points} points exceeds the explicit bound {bound}")]
    TooLarge { points: u64, bound: u64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Displacement {
    R,
    L,
    U,
    D,
    UR,
    UL,
}

impl Displacement {
    pub const ALL: [Displacement; 6] = [Self::R, Self::L, Self::U, Self::D, Self::UR, Self::UL];

    /// `(di, dj)` in local coordinates.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Self::R => (1, 0),
            Self::L => (-1, 0),
            Self::U => (0, 1),
            Self::D => (0, -1),
            Self::UR => (1, 1),
            Self::UL => (-1, 1),
        }
    }
}

impl fmt::Display for Displacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Displacement {
    type Err = GridError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.to_string() == s)
            .ok_or_else(|| GridError::Parse(format!("unknown displacement `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    fn index(self) -> usize {
        self as usize
    }
}

/// Axis-aligned placement of a square inside `[0,1]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Square {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub rect: Rect,
}

/// Edge stitching: `map[k]` is the index along the target edge reached from
/// index `k` along the source edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeLink {
    pub square: usize,
    pub map: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint {
    pub square: u32,
    pub i: u32,
    pub j: u32,
}

impl GridPoint {
    pub fn new(square: usize, i: u32, j: u32) -> Self {
        Self { square: square as u32, i, j }
    }
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(#{} {} {})", self.square, self.i, self.j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    squares: Vec<Square>,
    links: Vec<[Option<EdgeLink>; 4]>,
    offsets: Vec<u64>,
}

impl GridDomain {
    pub fn new(squares: Vec<Square>) -> Self {
        let mut offsets = Vec::with_capacity(squares.len() + 1);
        let mut acc = 0u64;
        for s in &squares {
            offsets.push(acc);
            acc += s.width as u64 * s.height as u64;
        }
        offsets.push(acc);
        let links = vec![[None, None, None, None]; squares.len()];
        Self { squares, links, offsets }
    }

    /// Registers a one-way stitch from `side` of square `from`.
    pub fn link(&mut self, from: usize, side: Side, to: usize, map: Vec<u32>) {
        self.links[from][side.index()] = Some(EdgeLink { square: to, map });
    }

    /// Stitches `lower`'s top edge to `upper`'s bottom edge column-for-column
    /// in both directions.
    pub fn stitch_vertical(&mut self, lower: usize, upper: usize) {
        let w = self.squares[lower].width;
        let ident: Vec<u32> = (0..w).collect();
        self.link(lower, Side::Top, upper, ident.clone());
        self.link(upper, Side::Bottom, lower, ident);
    }

    /// Stitches `left`'s right edge to `right`'s left edge row-for-row.
    pub fn stitch_horizontal(&mut self, left: usize, right: usize) {
        let h = self.squares[left].height;
        let ident: Vec<u32> = (0..h).collect();
        self.link(left, Side::Right, right, ident.clone());
        self.link(right, Side::Left, left, ident);
    }

    /// Checks that every correspondence is injective and lands on the
    /// facing edge of its target.
    pub fn validate(&self) -> Result<(), GridError> {
        for (sq, links) in self.links.iter().enumerate() {
            for (k, link) in links.iter().enumerate() {
                let Some(link) = link else { continue };
                let src = &self.squares[sq];
                let dst = self
                    .squares
                    .get(link.square)
                    .ok_or_else(|| GridError::InvalidDomain(format!("link to missing square {}", link.square)))?;
                let (src_len, dst_len) = if k < 2 { (src.height, dst.height) } else { (src.width, dst.width) };
                if link.map.len() != src_len as usize {
                    return Err(GridError::InvalidDomain(format!(
                        "{} edge {k}: map covers {} of {src_len} points",
                        src.name,
                        link.map.len()
                    )));
                }
                let mut seen = vec![false; dst_len as usize];
                for &t in &link.map {
                    let slot = seen
                        .get_mut(t as usize)
                        .ok_or_else(|| GridError::InvalidDomain(format!("{} edge {k}: target {t} out of range", src.name)))?;
                    if *slot {
                        return Err(GridError::InvalidDomain(format!("{} edge {k}: map not injective", src.name)));
                    }
                    *slot = true;
                }
            }
        }
        Ok(())
    }

    pub fn squares(&self) -> &[Square] {
        &self.squares
    }

    pub fn square(&self, idx: usize) -> &Square {
        &self.squares[idx]
    }

    pub fn square_index(&self, name: &str) -> Option<usize> {
        self.squares.iter().position(|s| s.name == name)
    }

    pub fn edge_link(&self, square: usize, side: Side) -> Option<&EdgeLink> {
        self.links[square][side.index()].as_ref()
    }

    pub fn total_points(&self) -> u64 {
        *self.offsets.last().unwrap()
    }

    pub fn contains(&self, p: GridPoint) -> bool {
        self.squares
            .get(p.square as usize)
            .is_some_and(|s| p.i < s.width && p.j < s.height)
    }

    pub fn index_of(&self, p: GridPoint) -> u64 {
        let s = &self.squares[p.square as usize];
        self.offsets[p.square as usize] + p.j as u64 * s.width as u64 + p.i as u64
    }

    pub fn point_at(&self, index: u64) -> GridPoint {
        let sq = self.offsets.partition_point(|&o| o <= index) - 1;
        let local = index - self.offsets[sq];
        let w = self.squares[sq].width as u64;
        GridPoint::new(sq, (local % w) as u32, (local / w) as u32)
    }

    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.total_points()).map(|k| self.point_at(k))
    }

    /// Centre of the grid point's cell in `[0,1]^2`.
    pub fn position(&self, p: GridPoint) -> (f64, f64) {
        let s = &self.squares[p.square as usize];
        let r = s.rect;
        (
            r.x0 + (p.i as f64 + 0.5) / s.width as f64 * (r.x1 - r.x0),
            r.y0 + (p.j as f64 + 0.5) / s.height as f64 * (r.y1 - r.y0),
        )
    }

    /// The grid point reached by moving one step in `disp` from `p`.
    pub fn step(&self, p: GridPoint, disp: Displacement) -> Result<GridPoint, GridError> {
        if !self.contains(p) {
            return Err(GridError::NotInDomain(p));
        }
        let s = &self.squares[p.square as usize];
        let (di, dj) = disp.delta();
        let ni = p.i as i64 + di;
        let nj = p.j as i64 + dj;
        let out_h = ni < 0 || ni >= s.width as i64;
        let out_v = nj < 0 || nj >= s.height as i64;
        match (out_h, out_v) {
            (false, false) => Ok(GridPoint { i: ni as u32, j: nj as u32, ..p }),
            (true, true) => Err(GridError::CornerExit { point: p, disp }),
            (true, false) => {
                let side = if ni < 0 { Side::Left } else { Side::Right };
                let link = self.edge_link(p.square as usize, side).ok_or(GridError::LeavesDomain {
                    point: p,
                    disp,
                    side,
                })?;
                let t = &self.squares[link.square];
                let i = if side == Side::Right { 0 } else { t.width - 1 };
                Ok(GridPoint::new(link.square, i, link.map[nj as usize]))
            }
            (false, true) => {
                let side = if nj < 0 { Side::Bottom } else { Side::Top };
                let link = self.edge_link(p.square as usize, side).ok_or(GridError::LeavesDomain {
                    point: p,
                    disp,
                    side,
                })?;
                let t = &self.squares[link.square];
                let j = if side == Side::Top { 0 } else { t.height - 1 };
                Ok(GridPoint::new(link.square, link.map[ni as usize], j))
            }
        }
    }

    /// Horizontal right-hand neighbour, following the right edge stitch.
    pub fn right_neighbor(&self, p: GridPoint) -> Option<GridPoint> {
        self.step(p, Displacement::R).ok()
    }
}

/// A succinct displacement function on a grid domain. Implementations must
/// be pure and total on the domain they were built for.
pub trait DisplacementOracle: Sync {
    fn displacement(&self, p: GridPoint) -> Displacement;
}

impl<F> DisplacementOracle for F
where
    F: Fn(GridPoint) -> Displacement + Sync,
{
    fn displacement(&self, p: GridPoint) -> Displacement {
        self(p)
    }
}

pub fn successor(dom: &GridDomain, f: &dyn DisplacementOracle, p: GridPoint) -> Result<GridPoint, GridError> {
    if !dom.contains(p) {
        return Err(GridError::NotInDomain(p));
    }
    dom.step(p, f.displacement(p))
}

/// Witness that `start` reaches a cycle of length `lambda` after `mu` steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleCertificate {
    pub start: GridPoint,
    pub mu: u64,
    pub lambda: u64,
    pub entry: GridPoint,
    pub witness_samples: Vec<(u64, GridPoint)>,
}

impl CycleCertificate {
    /// Replays the certificate against the flow.
    pub fn verify(&self, dom: &GridDomain, f: &dyn DisplacementOracle) -> Result<bool, GridError> {
        let mut p = self.start;
        for _ in 0..self.mu {
            p = successor(dom, f, p)?;
        }
        if p != self.entry {
            return Ok(false);
        }
        for k in 1..=self.lambda {
            p = successor(dom, f, p)?;
            if p == self.entry {
                return Ok(k == self.lambda);
            }
        }
        Ok(false)
    }

    pub fn to_text(&self, dom: &GridDomain) -> String {
        let pt = |p: GridPoint| format!("{} {} {}", dom.square(p.square as usize).name, p.i, p.j);
        let mut s = String::new();
        s.push_str(&format!("start = {}\n", pt(self.start)));
        s.push_str(&format!("mu = {}\n", self.mu));
        s.push_str(&format!("lambda = {}\n", self.lambda));
        s.push_str(&format!("entry = {}\n", pt(self.entry)));
        for (k, p) in &self.witness_samples {
            s.push_str(&format!("sample.{k} = {}\n", pt(*p)));
        }
        s
    }
}

/// Brent's cycle finding on the functional graph of `f`. The default budget
/// is the number of grid points, an upper bound on `mu + lambda`.
pub fn find_cycle(dom: &GridDomain, f: &dyn DisplacementOracle, start: GridPoint) -> Result<CycleCertificate, GridError> {
    find_cycle_with_budget(dom, f, start, dom.total_points())
}

pub fn find_cycle_with_budget(
    dom: &GridDomain,
    f: &dyn DisplacementOracle,
    start: GridPoint,
    budget: u64,
) -> Result<CycleCertificate, GridError> {
    if !dom.contains(start) {
        return Err(GridError::NotInDomain(start));
    }
    let next = |p| successor(dom, f, p);
    let mut power = 1u64;
    let mut lambda = 1u64;
    let mut tortoise = start;
    let mut hare = next(start)?;
    let mut steps = 1u64;
    while tortoise != hare {
        if power == lambda {
            tortoise = hare;
            power *= 2;
            lambda = 0;
        }
        hare = next(hare)?;
        lambda += 1;
        steps += 1;
        if steps > 2 * budget + 2 {
            return Err(GridError::BudgetExceeded(budget));
        }
    }
    if lambda > budget {
        return Err(GridError::BudgetExceeded(budget));
    }

    let mut tortoise = start;
    let mut hare = start;
    for _ in 0..lambda {
        hare = next(hare)?;
    }
    let mut mu = 0u64;
    while tortoise != hare {
        tortoise = next(tortoise)?;
        hare = next(hare)?;
        mu += 1;
        if mu + lambda > budget {
            return Err(GridError::BudgetExceeded(budget));
        }
    }

    // A handful of evenly spaced points on the cycle.
    let mut witness_samples = Vec::new();
    let stride = (lambda / 8).max(1);
    let mut p = tortoise;
    for k in 0..lambda {
        if k % stride == 0 {
            witness_samples.push((mu + k, p));
        }
        p = next(p)?;
    }
    Ok(CycleCertificate { start, mu, lambda, entry: tortoise, witness_samples })
}

pub fn on_cycle(dom: &GridDomain, f: &dyn DisplacementOracle, p: GridPoint) -> Result<bool, GridError> {
    Ok(find_cycle(dom, f, p)?.mu == 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `p` goes UR while its right-hand neighbour goes UL: the two diagonal
    /// edges cross.
    Crossing,
    /// `p` goes UR while the point directly above goes UL.
    StackedPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub at: GridPoint,
    pub kind: ViolationKind,
}

/// Non-crossing check at a single point (as the left / lower member of a pair).
pub fn check_point(dom: &GridDomain, f: &dyn DisplacementOracle, p: GridPoint) -> Vec<Violation> {
    let mut out = Vec::new();
    if f.displacement(p) != Displacement::UR {
        return out;
    }
    if let Some(r) = dom.right_neighbor(p) {
        if f.displacement(r) == Displacement::UL {
            out.push(Violation { at: p, kind: ViolationKind::Crossing });
        }
    }
    if let Ok(up) = dom.step(p, Displacement::U) {
        if f.displacement(up) == Displacement::UL {
            out.push(Violation { at: p, kind: ViolationKind::StackedPair });
        }
    }
    out
}

/// Exhaustive non-crossing scan over every grid point.
pub fn check_noncrossing(dom: &GridDomain, f: &dyn DisplacementOracle) -> Vec<Violation> {
    check_noncrossing_region(dom, f, dom.points())
}

/// Non-crossing scan restricted to caller-supplied left/lower points.
pub fn check_noncrossing_region(
    dom: &GridDomain,
    f: &dyn DisplacementOracle,
    points: impl IntoIterator<Item = GridPoint>,
) -> Vec<Violation> {
    points.into_iter().flat_map(|p| check_point(dom, f, p)).collect()
}

/// One trajectory step: the point and the displacement taken from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub step: u64,
    pub point: GridPoint,
    pub displacement: Displacement,
}

/// Follows the flow for `steps` moves, returning `steps + 1` records.
pub fn trace(
    dom: &GridDomain,
    f: &dyn DisplacementOracle,
    start: GridPoint,
    steps: u64,
) -> Result<Vec<TraceStep>, GridError> {
    let mut out = Vec::with_capacity(steps as usize + 1);
    let mut p = start;
    for step in 0..=steps {
        let displacement = f.displacement(p);
        out.push(TraceStep { step, point: p, displacement });
        if step < steps {
            p = dom.step(p, displacement)?;
        }
    }
    Ok(out)
}

/// Plain-text trajectory dump, one `step square i j displacement` line per step.
pub fn format_trace(dom: &GridDomain, steps: &[TraceStep]) -> String {
    steps
        .iter()
        .map(|s| {
            format!(
                "{} {} {} {} {}\n",
                s.step,
                dom.square(s.point.square as usize).name,
                s.point.i,
                s.point.j,
                s.displacement
            )
        })
        .collect()
}

/// Inverse of [`format_trace`] given the domain the trace was taken on.
pub fn parse_trace(dom: &GridDomain, text: &str) -> Result<Vec<TraceStep>, GridError> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 5 {
                return Err(GridError::Parse(format!("expected 5 fields in `{line}`")));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|_| GridError::Parse(format!("bad number `{s}`")));
            let square = dom
                .square_index(t[1])
                .ok_or_else(|| GridError::Parse(format!("unknown square `{}`", t[1])))?;
            let point = GridPoint::new(square, num(t[2])? as u32, num(t[3])? as u32);
            if !dom.contains(point) {
                return Err(GridError::NotInDomain(point));
            }
            Ok(TraceStep { step: num(t[0])?, point, displacement: t[4].parse()? })
        })
        .collect()
}
