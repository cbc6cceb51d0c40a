//! Layout of the racetrack annulus in the unit square.
//!
//! The track runs clockwise: up the left side, right along the top, down the
//! right side and left along the bottom, joined by four quarter-annuli. Each
//! side is parametrised by arc position `s` (along the flow, `0..=SIDE`) and
//! lateral offset `w` from the outer edge; lane `t` is centred at
//! `w = (t + 1/2) sigma`.

use std::fmt;

pub const INSET: f64 = 0.25;
pub const R_IN: f64 = 0.1;
pub const SIDE: f64 = 1.0 - 2.0 * INSET;
pub const CELL: f64 = SIDE / 3.0;
/// Upper bound on the track width.
pub const MAX_WIDTH: f64 = 0.1;
pub const CORE_GAIN: f64 = 6.0;
pub const SETTLE_GAIN: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackSide {
    Left,
    Top,
    Right,
    Bottom,
}

impl TrackSide {
    pub const ALL: [TrackSide; 4] = [Self::Left, Self::Top, Self::Right, Self::Bottom];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether the raw coordinate along the side grows with `s`.
    fn s_increasing(self) -> bool {
        matches!(self, Self::Left | Self::Top)
    }

    /// Whether the raw lateral coordinate grows with `w`.
    fn w_increasing(self) -> bool {
        matches!(self, Self::Left | Self::Bottom)
    }

    /// Whether the coordinate along the side is `y` (else `x`).
    fn runs_vertically(self) -> bool {
        matches!(self, Self::Left | Self::Right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corner {
    BottomLeft,
    TopLeft,
    TopRight,
    BottomRight,
}

impl Corner {
    pub fn center(self) -> (f64, f64) {
        match self {
            Self::BottomLeft => (INSET, INSET),
            Self::TopLeft => (INSET, 1.0 - INSET),
            Self::TopRight => (1.0 - INSET, 1.0 - INSET),
            Self::BottomRight => (1.0 - INSET, INSET),
        }
    }
}

/// Coarse cells of the track, each the image of a group of grid squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    A1,
    A2,
    A3,
    T1,
    T2,
    T3,
    R1,
    R2,
    R3,
    B1,
    B2,
    B3,
    QBL,
    QTL,
    QTR,
    QBR,
}

impl Cell {
    pub const ALL: [Cell; 16] = [
        Cell::A1,
        Cell::A2,
        Cell::A3,
        Cell::QTL,
        Cell::T1,
        Cell::T2,
        Cell::T3,
        Cell::QTR,
        Cell::R1,
        Cell::R2,
        Cell::R3,
        Cell::QBR,
        Cell::B1,
        Cell::B2,
        Cell::B3,
        Cell::QBL,
    ];

    /// Cell containing the discrete square `S<k>` of the decision layout.
    pub fn of_square(k: usize) -> Option<Cell> {
        Some(match k {
            17 | 18 => Cell::A1,
            19 => Cell::A2,
            20 | 21 => Cell::A3,
            22 => Cell::QTL,
            23 | 24 => Cell::T1,
            1 => Cell::T2,
            2 | 3 => Cell::T3,
            4 => Cell::QTR,
            5 | 6 => Cell::R1,
            7 => Cell::R2,
            8 | 9 => Cell::R3,
            10 => Cell::QBR,
            11 | 12 => Cell::B1,
            13 => Cell::B2,
            14 | 15 => Cell::B3,
            16 => Cell::QBL,
            _ => return None,
        })
    }

    pub fn of_corner(c: Corner) -> Cell {
        match c {
            Corner::BottomLeft => Cell::QBL,
            Corner::TopLeft => Cell::QTL,
            Corner::TopRight => Cell::QTR,
            Corner::BottomRight => Cell::QBR,
        }
    }

    fn on_side(side: TrackSide, k: usize) -> Cell {
        use Cell::*;
        [[A1, A2, A3], [T1, T2, T3], [R1, R2, R3], [B1, B2, B3]][side.index()][k]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// What the lateral velocity does on an interval of `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Part {
    /// Blends in the quadrant rotation after a corner.
    EntryBlend,
    /// Blends out towards the next corner.
    ExitBlend,
    /// Pulls every lane to its centre.
    Settle,
    /// First half of a row: lanes are pushed by the row's displacements.
    Drive(Row),
    /// Second half of a row: lanes settle again.
    Relax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Row {
    Funnel,
    Core(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub s0: f64,
    pub s1: f64,
    pub part: Part,
    pub cell: Cell,
    /// Window that the profile's `tau` runs over: `tau = (s - win0) / win_len`.
    pub win0: f64,
    pub win_len: f64,
}

impl Interval {
    pub fn lane_dependent(&self) -> bool {
        !matches!(self.part, Part::EntryBlend | Part::ExitBlend)
    }
}

/// Where a point sits in the piecewise definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Piece {
    Quadrant(Corner),
    /// `lane` runs over `-1..=N-1`; piece `L` covers `u` between `L` and `L + 1`.
    Side { side: TrackSide, interval: usize, lane: i32 },
}

#[derive(Debug, Clone)]
pub struct SidePlan {
    pub side: TrackSide,
    pub intervals: Vec<Interval>,
    /// Interval boundaries in the raw coordinate, ascending.
    pub raw_breaks: Vec<f64>,
    /// Lane boundaries in the raw lateral coordinate, ascending.
    pub lane_breaks: Vec<f64>,
}

impl SidePlan {
    fn interval_at(&self, raw: f64) -> usize {
        let j = self.raw_breaks.partition_point(|b| raw > *b);
        if self.side.s_increasing() {
            j
        } else {
            self.raw_breaks.len() - j
        }
    }

    fn lane_at(&self, raw: f64) -> i32 {
        let j = self.lane_breaks.partition_point(|b| raw > *b) as i32;
        let lanes = self.lane_breaks.len() as i32;
        if self.side.w_increasing() {
            j - 1
        } else {
            lanes - 1 - j
        }
    }

    /// Interval index for raw-interval slot `j` (breakpoints exceeded).
    pub fn interval_for_slot(&self, j: usize) -> usize {
        if self.side.s_increasing() {
            j
        } else {
            self.raw_breaks.len() - j
        }
    }

    /// Lane for lateral slot `j`.
    pub fn lane_for_slot(&self, j: usize) -> i32 {
        let lanes = self.lane_breaks.len() as i32;
        if self.side.w_increasing() {
            j as i32 - 1
        } else {
            lanes - 1 - j as i32
        }
    }
}

/// Numeric parameters of the track for a core with `rows` rows and `lanes` lanes.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub lanes: u32,
    pub rows: u64,
    pub row_len: f64,
    pub sigma: f64,
    pub width: f64,
    pub r_out: f64,
    pub omega: f64,
    pub blend: f64,
    pub funnel_gain: f64,
}

impl Geometry {
    pub fn new(lanes: u32, rows: u64, n: usize) -> Self {
        let row_len = CELL / rows as f64;
        let sigma = row_len.min(MAX_WIDTH / lanes as f64);
        let width = lanes as f64 * sigma;
        // keeps the entry blend's lateral drift below a sixth of a lane
        let blend = (sigma * R_IN / (8.0 * 0.15)).sqrt();
        Self {
            lanes,
            rows,
            row_len,
            sigma,
            width,
            r_out: R_IN + width,
            omega: 1.0 / R_IN,
            blend,
            funnel_gain: 3.0 * (n as f64 + 1.0),
        }
    }

    /// `u = U0 - rho / sigma`.
    pub fn u0(&self) -> f64 {
        self.r_out / self.sigma - 0.5
    }

    /// Raw coordinate along `side` at arc position `s`.
    pub fn raw_along(&self, side: TrackSide, s: f64) -> f64 {
        match side {
            TrackSide::Left => INSET + s,
            TrackSide::Top => INSET + s,
            TrackSide::Right => (1.0 - INSET) - s,
            TrackSide::Bottom => (1.0 - INSET) - s,
        }
    }

    /// Raw lateral coordinate at radius `rho` from the quadrant centres.
    pub fn raw_across(&self, side: TrackSide, rho: f64) -> f64 {
        match side {
            TrackSide::Left => INSET - rho,
            TrackSide::Top => (1.0 - INSET) + rho,
            TrackSide::Right => (1.0 - INSET) + rho,
            TrackSide::Bottom => INSET - rho,
        }
    }

    /// Point on `side` at arc position `s` and lane coordinate `u`.
    pub fn point(&self, side: TrackSide, s: f64, u: f64) -> (f64, f64) {
        let rho = self.r_out - (u + 0.5) * self.sigma;
        let along = self.raw_along(side, s);
        let across = self.raw_across(side, rho);
        if side.runs_vertically() {
            (across, along)
        } else {
            (along, across)
        }
    }

    /// `(s, rho)` of a point in `side`'s frame.
    pub fn side_coords(&self, side: TrackSide, x: f64, y: f64) -> (f64, f64) {
        match side {
            TrackSide::Left => (y - INSET, INSET - x),
            TrackSide::Top => (x - INSET, y - (1.0 - INSET)),
            TrackSide::Right => ((1.0 - INSET) - y, x - (1.0 - INSET)),
            TrackSide::Bottom => ((1.0 - INSET) - x, INSET - y),
        }
    }

    pub fn lane_coord(&self, rho: f64) -> f64 {
        self.u0() - rho * (1.0 / self.sigma)
    }

    pub fn plan(&self, side: TrackSide) -> SidePlan {
        let mut iv = Vec::new();
        let b = self.blend;
        let push = |iv: &mut Vec<Interval>, s0: f64, s1: f64, part: Part, k: usize, win: (f64, f64)| {
            iv.push(Interval { s0, s1, part, cell: Cell::on_side(side, k), win0: win.0, win_len: win.1 });
        };
        push(&mut iv, 0.0, b, Part::EntryBlend, 0, (0.0, b));
        if side == TrackSide::Left {
            let mid = 0.5 * (b + CELL);
            let win = (b, CELL - b);
            push(&mut iv, b, mid, Part::Drive(Row::Funnel), 0, win);
            push(&mut iv, mid, CELL, Part::Relax, 0, win);
            for r in 0..self.rows {
                let s0 = CELL + r as f64 * self.row_len;
                let s1 = if r + 1 == self.rows { 2.0 * CELL } else { CELL + (r + 1) as f64 * self.row_len };
                let sm = CELL + (r as f64 + 0.5) * self.row_len;
                let win = (s0, self.row_len);
                push(&mut iv, s0, sm, Part::Drive(Row::Core(r)), 1, win);
                push(&mut iv, sm, s1, Part::Relax, 1, win);
            }
        } else {
            push(&mut iv, b, CELL, Part::Settle, 0, (b, CELL - b));
            push(&mut iv, CELL, 2.0 * CELL, Part::Settle, 1, (CELL, CELL));
        }
        push(&mut iv, 2.0 * CELL, SIDE - b, Part::Settle, 2, (2.0 * CELL, SIDE - b - 2.0 * CELL));
        push(&mut iv, SIDE - b, SIDE, Part::ExitBlend, 2, (SIDE - b, b));

        let mut raw_breaks: Vec<f64> = iv[1..].iter().map(|i| self.raw_along(side, i.s0)).collect();
        raw_breaks.sort_by(f64::total_cmp);
        let mut lane_breaks: Vec<f64> = (0..self.lanes)
            .map(|t| self.raw_across(side, self.r_out - (t as f64 + 0.5) * self.sigma))
            .collect();
        lane_breaks.sort_by(f64::total_cmp);
        SidePlan { side, intervals: iv, raw_breaks, lane_breaks }
    }
}

/// Region thresholds shared by the native locator and the circuit.
pub const X_THRESHOLDS: [f64; 3] = [INSET, 0.5, 1.0 - INSET];

/// Piece containing `(x, y)`, using the same strict comparisons as the circuit.
pub fn locate(plans: &[SidePlan; 4], x: f64, y: f64) -> Piece {
    let y_lo = !(y > INSET);
    let y_hi = y > 1.0 - INSET;
    let x_lo = !(x > INSET);
    let x_hi = x > 1.0 - INSET;
    let side = if y_lo {
        if x_lo {
            return Piece::Quadrant(Corner::BottomLeft);
        } else if x_hi {
            return Piece::Quadrant(Corner::BottomRight);
        }
        TrackSide::Bottom
    } else if y_hi {
        if x_lo {
            return Piece::Quadrant(Corner::TopLeft);
        } else if x_hi {
            return Piece::Quadrant(Corner::TopRight);
        }
        TrackSide::Top
    } else if !(x > 0.5) {
        TrackSide::Left
    } else {
        TrackSide::Right
    };
    let plan = &plans[side.index()];
    let (along, across) = if side.runs_vertically() { (y, x) } else { (x, y) };
    let interval = plan.interval_at(along);
    let lane = if plan.intervals[interval].lane_dependent() { plan.lane_at(across) } else { 0 };
    Piece::Side { side, interval, lane }
}
