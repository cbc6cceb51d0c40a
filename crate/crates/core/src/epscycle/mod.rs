//! Approximate limit cycles: integrate a trajectory, keep normal discs
//! around its samples, and stop at the first return through an earlier
//! disc or at a point where the field is nearly zero.

mod section;
mod trajectory;

pub use section::{Sample, SectionIndex};
pub use trajectory::{integrate, integrate_step, rk4, Trajectory};

use std::f64::consts::{E, PI};
use std::fmt::Write as _;

use thiserror::Error;

use crate::field::{dist, dot, norm, VectorField};

#[derive(Debug, Error)]
pub enum EpsError {
    #[error("step from {from:?} left the domain at {to:?}")]
    LeftDomain { from: Vec<f64>, to: Vec<f64> },
    #[error("field is not finite near {x:?}")]
    NonFinite { x: Vec<f64> },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Residuals of the three certificate conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateChecks {
    /// `|x2 - x1|`.
    pub distance: f64,
    /// `<x2 - x1, v1> / (|x2 - x1| |v1|)`, 0 when `x2 == x1`.
    pub orthogonality: f64,
    /// `|<x2 - x1, v1>| / |v1|`: distance of `x2` from the hyperplane.
    pub hyperplane_distance: f64,
    /// `<v1, v2>`.
    pub inner: f64,
}

impl CertificateChecks {
    pub fn compute(x1: &[f64], v1: &[f64], x2: &[f64], v2: &[f64]) -> Self {
        let diff: Vec<f64> = x2.iter().zip(x1).map(|(a, b)| a - b).collect();
        let distance = norm(&diff);
        let nv = norm(v1);
        let along = dot(&diff, v1);
        let orthogonality = if distance == 0.0 || nv == 0.0 { 0.0 } else { along / (distance * nv) };
        let hyperplane_distance = if nv == 0.0 { f64::INFINITY } else { along.abs() / nv };
        Self { distance, orthogonality, hyperplane_distance, inner: dot(v1, v2) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsCycleCertificate {
    pub t1: f64,
    pub t2: f64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// The cycle's ε, i.e. the disc radius `eps / L` used by the finder.
    pub eps: f64,
    pub checks: CertificateChecks,
}

impl EpsCycleCertificate {
    pub fn new(t1: f64, x1: Vec<f64>, v1: Vec<f64>, t2: f64, x2: Vec<f64>, v2: Vec<f64>, eps: f64) -> Self {
        let checks = CertificateChecks::compute(&x1, &v1, &x2, &v2);
        Self { t1, t2, x1, x2, v1, v2, eps, checks }
    }

    pub fn period(&self) -> f64 {
        self.t2 - self.t1
    }

    /// Key/value text with every residual.
    pub fn to_text(&self) -> String {
        let vec = |v: &[f64]| v.iter().map(|c| format!("{c:e}")).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "kind = eps-cycle");
        let _ = writeln!(s, "eps = {:e}", self.eps);
        let _ = writeln!(s, "t1 = {:e}", self.t1);
        let _ = writeln!(s, "t2 = {:e}", self.t2);
        let _ = writeln!(s, "x1 = {}", vec(&self.x1));
        let _ = writeln!(s, "x2 = {}", vec(&self.x2));
        let _ = writeln!(s, "v1 = {}", vec(&self.v1));
        let _ = writeln!(s, "v2 = {}", vec(&self.v2));
        let _ = writeln!(s, "distance = {:e}", self.checks.distance);
        let _ = writeln!(s, "orthogonality = {:e}", self.checks.orthogonality);
        let _ = writeln!(s, "hyperplane_distance = {:e}", self.checks.hyperplane_distance);
        let _ = writeln!(s, "inner = {:e}", self.checks.inner);
        s
    }

    /// Reads the text form back. Residual lines are recomputed, not trusted.
    pub fn from_text(text: &str) -> Result<Self, EpsError> {
        let kv = KeyValues::parse(text, "eps-cycle")?;
        Ok(Self::new(
            kv.num("t1")?,
            kv.vec("x1")?,
            kv.vec("v1")?,
            kv.num("t2")?,
            kv.vec("x2")?,
            kv.vec("v2")?,
            kv.num("eps")?,
        ))
    }
}

/// `key = value` lines; `#` starts a comment line.
struct KeyValues(std::collections::HashMap<String, String>);

impl KeyValues {
    fn parse(text: &str, kind: &str) -> Result<Self, EpsError> {
        let mut map = std::collections::HashMap::new();
        for line in text.lines().filter(|l| !l.trim_start().starts_with('#')) {
            if let Some((k, v)) = line.split_once('=') {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let kv = KeyValues(map);
        if kv.get("kind")? != kind {
            return Err(EpsError::Parse(format!("not a {kind} certificate")));
        }
        Ok(kv)
    }

    fn get(&self, k: &str) -> Result<&str, EpsError> {
        self.0.get(k).map(String::as_str).ok_or_else(|| EpsError::Parse(format!("missing `{k}`")))
    }

    fn num(&self, k: &str) -> Result<f64, EpsError> {
        self.get(k)?.parse().map_err(|_| EpsError::Parse(format!("bad number for `{k}`")))
    }

    fn vec(&self, k: &str) -> Result<Vec<f64>, EpsError> {
        self.get(k)?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| EpsError::Parse(format!("bad vector for `{k}`"))))
            .collect()
    }
}

/// Reads the kind line of a certificate file.
pub fn certificate_kind(text: &str) -> Option<&str> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "kind")
        .map(|(_, v)| v.trim())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixpointCertificate {
    pub t: f64,
    pub x: Vec<f64>,
    pub speed: f64,
    pub eps: f64,
}

impl FixpointCertificate {
    pub fn to_text(&self) -> String {
        let x = self.x.iter().map(|c| format!("{c:e}")).collect::<Vec<_>>().join(" ");
        format!("kind = fixpoint\neps = {:e}\nt = {:e}\nx = {x}\nspeed = {:e}\n", self.eps, self.t, self.speed)
    }

    pub fn from_text(text: &str) -> Result<Self, EpsError> {
        let kv = KeyValues::parse(text, "fixpoint")?;
        Ok(Self { t: kv.num("t")?, x: kv.vec("x")?, speed: kv.num("speed")?, eps: kv.num("eps")? })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Cycle(EpsCycleCertificate),
    Fixpoint(FixpointCertificate),
    BudgetExceeded { elapsed: f64, budget: f64 },
}

#[derive(Debug, Clone)]
pub struct FinderConfig {
    pub eps: f64,
    pub lipschitz: f64,
    /// Time budget; `None` means [`sweep_time_bound`].
    pub budget: Option<f64>,
    /// Keep every sample in the returned trajectory.
    pub record: bool,
}

impl FinderConfig {
    pub fn new(eps: f64, lipschitz: f64) -> Self {
        Self { eps, lipschitz, budget: None, record: false }
    }

    pub fn delta(&self) -> f64 {
        self.eps / (3.0 * self.lipschitz)
    }

    /// Radius of the normal discs, `eps / L`.
    pub fn radius(&self) -> f64 {
        self.eps / self.lipschitz
    }

    /// Arc-length separation below which returns are ignored.
    pub fn exclusion(&self) -> f64 {
        4.0 * PI * self.delta()
    }
}

#[derive(Debug, Clone)]
pub struct FinderRun {
    pub outcome: Outcome,
    pub steps: u64,
    pub elapsed: f64,
    pub budget: f64,
    /// Every sample if `record` was set, otherwise empty.
    pub trajectory: Trajectory,
}

/// Time budget from the sweeping argument:
/// `sqrt((d-1)pi) (sqrt((d-1)/(2 pi e)))^(d-1) (3L/eps)^(d-1) (1+eps/L)^d / (eps (1-eps))`.
pub fn sweep_time_bound(d: usize, eps: f64, l: f64) -> Result<f64, EpsError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(EpsError::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(l > 0.0) || d < 2 {
        return Err(EpsError::InvalidParameter("need L > 0 and d >= 2".into()));
    }
    let m = (d - 1) as f64;
    Ok((m * PI).sqrt()
        * (m / (2.0 * PI * E)).sqrt().powf(m)
        * (3.0 * l / eps).powf(m)
        * (1.0 + eps / l).powi(d as i32)
        / (eps * (1.0 - eps)))
}

/// Cubic Hermite interpolant of a step at fraction `s`.
fn hermite(x0: &[f64], v0: &[f64], x1: &[f64], v1: &[f64], h: f64, s: f64) -> Vec<f64> {
    let (s2, s3) = (s * s, s * s * s);
    let (a, b, c, d) = (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, 3.0 * s2 - 2.0 * s3, s3 - s2);
    (0..x0.len()).map(|i| a * x0[i] + b * h * v0[i] + c * x1[i] + d * h * v1[i]).collect()
}

fn hermite_slope(x0: &[f64], v0: &[f64], x1: &[f64], v1: &[f64], h: f64, s: f64) -> Vec<f64> {
    let s2 = s * s;
    let (a, b, c, d) = (6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, 6.0 * s - 6.0 * s2, 3.0 * s2 - 2.0 * s);
    (0..x0.len()).map(|i| a * x0[i] + b * h * v0[i] + c * x1[i] + d * h * v1[i]).collect()
}

/// Newton refinement of the hyperplane crossing `<p(s) - q, w> = 0` on the
/// Hermite interpolant, starting from the chord estimate `s`.
#[allow(clippy::too_many_arguments)]
fn refine_crossing(x0: &[f64], v0: &[f64], x1: &[f64], v1: &[f64], h: f64, q: &[f64], w: &[f64], s: f64) -> f64 {
    let mut s = s;
    for _ in 0..8 {
        let p = hermite(x0, v0, x1, v1, h, s);
        let g: f64 = p.iter().zip(q).zip(w).map(|((a, b), c)| (a - b) * c).sum();
        let dg = dot(&hermite_slope(x0, v0, x1, v1, h, s), w);
        if dg == 0.0 {
            break;
        }
        let next = (s - g / dg).clamp(0.0, 1.0);
        if next == s {
            break;
        }
        s = next;
    }
    s
}

/// Step policy `h = min(delta / (4 |f|), 1 / (4 L))`.
pub fn step_size(speed: f64, delta: f64, l: f64) -> f64 {
    (delta / (4.0 * speed)).min(1.0 / (4.0 * l))
}

pub fn find_eps_cycle(f: &dyn VectorField, x0: &[f64], cfg: &FinderConfig) -> Result<FinderRun, EpsError> {
    let (eps, l) = (cfg.eps, cfg.lipschitz);
    if !(eps > 0.0) || !(l > 0.0) {
        return Err(EpsError::InvalidParameter("eps and L must be positive".into()));
    }
    if x0.len() != f.dim() {
        return Err(EpsError::InvalidParameter("start point has the wrong dimension".into()));
    }
    if !f.contains(x0) {
        return Err(EpsError::InvalidParameter("start point is outside the domain".into()));
    }
    let budget = match cfg.budget {
        Some(b) => b,
        None => sweep_time_bound(f.dim(), eps, l)?,
    };
    let delta = cfg.delta();
    let radius = cfg.radius();
    let exclusion = cfg.exclusion();

    // buckets wide enough that every query only scans adjacent cells
    let mut index = SectionIndex::new(f.dim(), 2.5 * delta);
    let mut recorded = Trajectory::new(f.dim());
    let mut x = x0.to_vec();
    let mut v = f.eval(&x);
    let mut t = 0.0;
    let mut arc = 0.0;
    let mut steps = 0u64;

    loop {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(EpsError::NonFinite { x });
        }
        let speed = norm(&v);
        if cfg.record {
            recorded.push(t, &x, &v);
        }
        if speed < eps {
            let cert = FixpointCertificate { t, x, speed, eps };
            return Ok(FinderRun { outcome: Outcome::Fixpoint(cert), steps, elapsed: t, budget, trajectory: recorded });
        }
        if t > budget {
            return Ok(FinderRun {
                outcome: Outcome::BudgetExceeded { elapsed: t, budget },
                steps,
                elapsed: t,
                budget,
                trajectory: recorded,
            });
        }
        index.insert(t, arc, &x, &v);

        let h = step_size(speed, delta, l);
        let y = integrate_step(f, &x, h)?;
        let seg: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let seg_len = norm(&seg);

        // earliest stored sample whose disc the new segment passes through
        let mut best: Option<(f64, usize)> = None;
        for j in index.near(&x, 2.0 * delta + seg_len) {
            let s = index.sample(j);
            if arc + seg_len - s.arc < exclusion {
                continue;
            }
            let a: f64 = x.iter().zip(s.x).zip(s.v).map(|((p, q), w)| (p - q) * w).sum();
            let b = dot(&seg, s.v);
            if b <= 0.0 {
                continue;
            }
            let frac = -a / b;
            if !(0.0..=1.0).contains(&frac) {
                continue;
            }
            let p: Vec<f64> = x.iter().zip(&seg).map(|(q, d)| q + frac * d).collect();
            if dist(&p, s.x) > radius {
                continue;
            }
            if best.map_or(true, |(_, bj)| s.t < index.sample(bj).t) {
                best = Some((frac, j));
            }
        }
        if let Some((frac, j)) = best {
            let s = index.sample(j);
            let vy = f.eval(&y);
            let frac = refine_crossing(&x, &v, &y, &vy, h, s.x, s.v, frac);
            let p = hermite(&x, &v, &y, &vy, h, frac);
            let vp = f.eval(&p);
            if dist(&p, s.x) <= radius && dot(&vp, s.v) > 0.0 && f.contains(&p) {
                let cert = EpsCycleCertificate::new(s.t, s.x.to_vec(), s.v.to_vec(), t + frac * h, p, vp, radius);
                steps += 1;
                return Ok(FinderRun {
                    outcome: Outcome::Cycle(cert),
                    steps,
                    elapsed: t + frac * h,
                    budget,
                    trajectory: recorded,
                });
            }
        }

        x = y;
        v = f.eval(&x);
        t += h;
        arc += seg_len;
        steps += 1;
    }
}

/// Tolerance on `x2`'s distance from the hyperplane, relative to the disc radius.
pub const HYPERPLANE_TOL: f64 = 1e-6;

/// Why a certificate was rejected; empty when it is accepted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Verdict {
    pub failures: Vec<String>,
    /// `eps < |v1| / L` but `<v1, v2> <= 0`: the Lipschitz bound would be violated.
    pub suspicious: bool,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.failures.is_empty() && !self.suspicious
    }
}

/// Re-checks a certificate from scratch against the field.
pub fn verify_certificate_detailed(f: &dyn VectorField, cert: &EpsCycleCertificate, l: f64) -> Verdict {
    let mut out = Verdict::default();
    let mut fail = |m: String| out.failures.push(m);
    if !f.contains(&cert.x1) || !f.contains(&cert.x2) {
        fail("certificate point outside the domain".into());
    }
    let v1 = f.eval(&cert.x1);
    let v2 = f.eval(&cert.x2);
    let close = |a: &[f64], b: &[f64]| dist(a, b) <= 1e-9 * (1.0 + norm(a));
    if !close(&v1, &cert.v1) || !close(&v2, &cert.v2) {
        fail("stored velocities do not match the field".into());
    }
    let c = CertificateChecks::compute(&cert.x1, &v1, &cert.x2, &v2);
    if !(c.distance <= cert.eps) {
        fail(format!("distance {:e} exceeds eps {:e}", c.distance, cert.eps));
    }
    if !(c.hyperplane_distance <= HYPERPLANE_TOL * cert.eps) {
        fail(format!("x2 is {:e} off the normal hyperplane", c.hyperplane_distance));
    }
    if !(c.inner > 0.0) {
        fail(format!("<v1, v2> = {:e} is not positive", c.inner));
    }
    if !(cert.t2 > cert.t1) {
        fail("t2 must exceed t1".into());
    }
    out.suspicious = cert.eps < norm(&v1) / l && c.inner <= 0.0;
    out
}

pub fn verify_certificate(f: &dyn VectorField, cert: &EpsCycleCertificate, l: f64) -> bool {
    verify_certificate_detailed(f, cert, l).ok()
}

/// Re-evaluates the field at the certificate point.
pub fn verify_fixpoint(f: &dyn VectorField, cert: &FixpointCertificate) -> bool {
    cert.x.len() == f.dim() && f.contains(&cert.x) && norm(&f.eval(&cert.x)) < cert.eps
}

/// Whether the `(d-1)`-discs of radius `r` normal to `v1` at `x1` and to
/// `v2` at `x2` intersect.
pub fn discs_intersect(x1: &[f64], v1: &[f64], x2: &[f64], v2: &[f64], r: f64) -> bool {
    let (g11, g12, g22) = (dot(v1, v1), dot(v1, v2), dot(v2, v2));
    let det = g11 * g22 - g12 * g12;
    let c1 = dot(x1, v1);
    let c2 = dot(x2, v2);
    if det <= 1e-14 * g11 * g22 {
        // parallel hyperplanes: they must coincide
        let gap = (dot(x2, v1) - c1).abs() / g11.sqrt();
        return gap <= 1e-12 && dist(x1, x2) <= 2.0 * r;
    }
    // projection of p onto the codimension-2 flat {<x,v1> = c1, <x,v2> = c2}
    let project = |p: &[f64]| -> Vec<f64> {
        let (e1, e2) = (dot(p, v1) - c1, dot(p, v2) - c2);
        let a = (g22 * e1 - g12 * e2) / det;
        let b = (g11 * e2 - g12 * e1) / det;
        p.iter().zip(v1).zip(v2).map(|((p, u), w)| p - a * u - b * w).collect()
    };
    let (p1, p2) = (project(x1), project(x2));
    let (h1, h2) = (dist(x1, &p1), dist(x2, &p2));
    if h1 > r || h2 > r {
        return false;
    }
    let (r1, r2) = ((r * r - h1 * h1).sqrt(), (r * r - h2 * h2).sqrt());
    dist(&p1, &p2) <= r1 + r2
}
