//! Benchmark fields with known limiting behaviour.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::epscycle::{rk4, EpsError};
use crate::field::{dist, Domain, Provenance, VectorField, DOMAIN_SLACK};

#[derive(Debug, Error, PartialEq)]
pub enum SystemError {
    #[error("unknown system `{0}` (expected circle, annulus:<coeffs>, hypercycle:<n>:<k-list>, vdp:<mu> or drift3)")]
    Unknown(String),
    #[error("bad system spec `{spec}`: {msg}")]
    BadSpec { spec: String, msg: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// What is known about a system's limiting behaviour.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    /// Every circle about `center` is a periodic orbit.
    CircleFamily { center: [f64; 2] },
    /// Limit cycles on the circles of these radii about `center`.
    Circles { center: [f64; 2], radii: Vec<f64> },
    /// An interior fixpoint; for the hypercycle with `n >= 5` it is unstable
    /// and surrounded by an attracting cycle.
    Fixpoint { x: Vec<f64> },
    /// A unique attracting cycle whose `x`-amplitude lies in `[lo, hi]`.
    Amplitude { lo: f64, hi: f64 },
    /// Horizontal circles about the `x_3` axis attract towards `x_3 = level`.
    Cylinder { level: f64 },
}

impl GroundTruth {
    /// Distance from `x` to the nearest known limit cycle, where the cycles
    /// are explicit.
    pub fn cycle_distance(&self, x: &[f64]) -> Option<f64> {
        match self {
            GroundTruth::Circles { center, radii } => {
                let r = dist(&x[..2], center);
                radii.iter().map(|q| (r - q).abs()).reduce(f64::min)
            }
            GroundTruth::Cylinder { level } => Some((x[2] - level).abs()),
            _ => None,
        }
    }
}

#[derive(Clone)]
pub struct NamedSystem {
    pub name: String,
    pub field: Arc<dyn VectorField>,
    pub truth: GroundTruth,
    /// Validated Lipschitz constant on the domain.
    pub lipschitz: f64,
    pub default_start: Vec<f64>,
    /// Ball excluded when drawing random start points.
    pub exclusion: Option<(Vec<f64>, f64)>,
}

impl std::fmt::Debug for NamedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NamedSystem")
            .field("name", &self.name)
            .field("truth", &self.truth)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl NamedSystem {
    /// Random start in the domain outside the exclusion ball.
    pub fn sample_start(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        for _ in 0..1000 {
            let x = self.field.sample_point(rng)?;
            match &self.exclusion {
                Some((c, r)) if dist(&x, c) < *r => continue,
                _ => return Some(x),
            }
        }
        None
    }
}

struct Circle {
    domain: Domain,
}

impl VectorField for Circle {
    fn dim(&self) -> usize {
        2
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = -x[0];
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
    fn provenance(&self) -> Provenance {
        Provenance::ClosedForm("circle".into())
    }
}

/// `x' = y, y' = -x` on the annulus `1 <= r <= 2`.
pub fn circle_flow() -> NamedSystem {
    let domain = Domain::Annulus { center: [0.0, 0.0], r_in: 1.0, r_out: 2.0 };
    NamedSystem {
        name: "circle".into(),
        field: Arc::new(Circle { domain }),
        truth: GroundTruth::CircleFamily { center: [0.0, 0.0] },
        lipschitz: 1.0,
        default_start: vec![1.0, 0.0],
        exclusion: None,
    }
}

/// Polynomial `phi(u) = sum c_k u^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Phi {
    pub coeffs: Vec<f64>,
}

impl Phi {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * u + k as f64 * c)
    }

    /// Roots in `(0, 1)` where `phi` changes sign, by grid scan and bisection.
    pub fn sign_change_roots(&self) -> Vec<f64> {
        let n = 10_000;
        let mut roots = Vec::new();
        for k in 0..n {
            let (mut a, mut b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            let (fa, fb) = (self.eval(a), self.eval(b));
            if fa == 0.0 && k > 0 && self.eval(a - 1.0 / n as f64) * self.eval(b) < 0.0 {
                roots.push(a);
                continue;
            }
            if fa * fb < 0.0 {
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if self.eval(a) * self.eval(m) <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        roots
    }

    /// `(max |phi|, max |phi'|)` over `[0, 1]`, sampled with a margin.
    fn bounds(&self) -> (f64, f64) {
        let n = 4096;
        let (mut m0, mut m1) = (0.0f64, 0.0f64);
        for k in 0..=n {
            let u = k as f64 / n as f64;
            m0 = m0.max(self.eval(u).abs());
            m1 = m1.max(self.derivative(u).abs());
        }
        // one grid step of slope covers the gap between samples
        let deg = self.coeffs.len().saturating_sub(1) as f64;
        let c1: f64 = self.coeffs.iter().map(|c| c.abs()).sum::<f64>() * deg;
        let c2 = c1 * deg;
        (m0 + c1 / n as f64, m1 + c2 / n as f64)
    }
}

struct Annulus {
    phi: Phi,
    domain: Domain,
    lipschitz: f64,
}

impl VectorField for Annulus {
    fn dim(&self) -> usize {
        2
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let r = x[0].hypot(x[1]);
        let g = self.phi.eval(r - 1.0) / r;
        out[0] = g * x[0] - x[1];
        out[1] = g * x[1] + x[0];
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
    fn provenance(&self) -> Provenance {
        Provenance::ClosedForm(format!("annulus phi={:?}", self.phi.coeffs))
    }
}

/// `r' = phi(r - 1), theta' = 1` on `1 <= r <= 2`.
pub fn appendix_annulus(phi: Phi) -> NamedSystem {
    let (m0, m1) = phi.bounds();
    // |D(phi(r-1) x / r)| <= |phi'| + |phi| / r, plus the unit rotation
    let lipschitz = 1.0 + m0 + m1;
    let radii = phi.sign_change_roots().into_iter().map(|z| 1.0 + z).collect();
    let name = format!(
        "annulus:{}",
        phi.coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    );
    let domain = Domain::Annulus { center: [0.0, 0.0], r_in: 1.0, r_out: 2.0 };
    NamedSystem {
        name,
        field: Arc::new(Annulus { phi, domain, lipschitz }),
        truth: GroundTruth::Circles { center: [0.0, 0.0], radii },
        lipschitz,
        default_start: vec![2.0, 0.0],
        exclusion: None,
    }
}

struct Hypercycle {
    k: Vec<f64>,
    domain: Domain,
    lipschitz: f64,
}

impl VectorField for Hypercycle {
    fn dim(&self) -> usize {
        self.k.len()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.k.len();
        let mut growth = 0.0;
        for i in 0..n {
            out[i] = self.k[i] * x[i] * x[(i + n - 1) % n];
            growth += out[i];
        }
        for i in 0..n {
            out[i] -= x[i] * growth;
        }
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
    fn provenance(&self) -> Provenance {
        Provenance::ClosedForm("hypercycle".into())
    }
    fn project(&self, x: &mut [f64]) {
        let s: f64 = x.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_DRIFT {
            x.iter_mut().for_each(|v| *v /= s);
        }
    }
}

/// Drift of the coordinate sum tolerated before renormalising.
pub const SIMPLEX_DRIFT: f64 = 1e-12;
pub const HYPERCYCLE_EXCLUSION: f64 = 0.05;

/// Interior fixpoint of the hypercycle: all `k_i x_{i-1}` equal.
pub fn hypercycle_fixpoint(k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let c = 1.0 / k.iter().map(|v| 1.0 / v).sum::<f64>();
    (0..n).map(|j| c / k[(j + 1) % n]).collect()
}

/// `x_i' = k_i x_i x_{i-1} - x_i sum_j k_j x_j x_{j-1}` on the simplex.
pub fn hypercycle(n: usize, k: &[f64]) -> Result<NamedSystem, SystemError> {
    if n < 2 {
        return Err(SystemError::InvalidParameter(format!("hypercycle needs n >= 2, got {n}")));
    }
    if k.len() != n || k.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(SystemError::InvalidParameter(format!("need {n} positive rates, got {k:?}")));
    }
    let kmax = k.iter().cloned().fold(0.0, f64::max);
    // row sums of the Jacobian on the simplex: 4 + 3 + 2(n - 2), times kmax
    let lipschitz = (2 * n + 3) as f64 * kmax;
    let fix = hypercycle_fixpoint(k);
    let mut start = fix.clone();
    // a point 0.1 from the fixpoint along a zero-sum direction
    let dir: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { -1.0 / (n - 1) as f64 }).collect();
    let scale = 0.1 / crate::field::norm(&dir);
    start.iter_mut().zip(&dir).for_each(|(s, d)| *s += scale * d);
    let domain = Domain::Simplex { dim: n, hole: fix.clone(), hole_radius: 0.0 };
    let name = format!("hypercycle:{n}:{}", k.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    Ok(NamedSystem {
        name,
        field: Arc::new(Hypercycle { k: k.to_vec(), domain, lipschitz }),
        truth: GroundTruth::Fixpoint { x: fix.clone() },
        lipschitz,
        default_start: start,
        exclusion: Some((fix, HYPERCYCLE_EXCLUSION)),
    })
}

struct VanDerPol {
    mu: f64,
    domain: Domain,
    lipschitz: f64,
}

impl VectorField for VanDerPol {
    fn dim(&self) -> usize {
        2
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = self.mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
    fn provenance(&self) -> Provenance {
        Provenance::ClosedForm(format!("van der Pol mu={}", self.mu))
    }
}

pub const VDP_BOX: f64 = 4.0;

/// `x' = y, y' = mu (1 - x^2) y - x` on `[-4, 4]^2`.
pub fn van_der_pol(mu: f64) -> Result<NamedSystem, SystemError> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(SystemError::InvalidParameter(format!("mu must be non-negative, got {mu}")));
    }
    let b = VDP_BOX;
    // Frobenius norm of the Jacobian's entrywise maxima on the box
    let lipschitz = (1.0 + (2.0 * mu * b * b + 1.0).powi(2) + (mu * (b * b - 1.0)).powi(2)).sqrt();
    let domain = Domain::Box { lo: vec![-b, -b], hi: vec![b, b] };
    Ok(NamedSystem {
        name: format!("vdp:{mu}"),
        field: Arc::new(VanDerPol { mu, domain, lipschitz }),
        truth: GroundTruth::Amplitude { lo: 1.9, hi: 2.1 },
        lipschitz,
        default_start: vec![2.0, 0.0],
        exclusion: Some((vec![0.0, 0.0], 0.05)),
    })
}

struct Drift3 {
    rate: f64,
    domain: Domain,
}

impl VectorField for Drift3 {
    fn dim(&self) -> usize {
        3
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = -x[0];
        out[2] = self.rate * (0.5 - x[2]);
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn contains(&self, x: &[f64]) -> bool {
        let r = x[0].hypot(x[1]);
        let e = DOMAIN_SLACK;
        x.len() == 3 && (1.0 - e..=2.0 + e).contains(&r) && (-e..=1.0 + e).contains(&x[2])
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
    fn provenance(&self) -> Provenance {
        Provenance::ClosedForm("drift3".into())
    }
}

pub const DRIFT3_RATE: f64 = 0.1;

/// Rotation in the `(x_1, x_2)` annulus with `x_3' = rate (1/2 - x_3)` on
/// `1 <= r <= 2, 0 <= x_3 <= 1`.
pub fn drift3(rate: f64) -> Result<NamedSystem, SystemError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(SystemError::InvalidParameter(format!("drift rate must lie in (0, 1], got {rate}")));
    }
    let domain = Domain::Custom { lo: vec![-2.0, -2.0, 0.0], hi: vec![2.0, 2.0, 1.0], name: "drift3".into() };
    Ok(NamedSystem {
        name: if rate == DRIFT3_RATE { "drift3".into() } else { format!("drift3:{rate}") },
        field: Arc::new(Drift3 { rate, domain }),
        truth: GroundTruth::Cylinder { level: 0.5 },
        lipschitz: 1.0,
        default_start: vec![1.5, 0.0, 0.2],
        exclusion: None,
    })
}

fn numbers(spec: &str, part: &str) -> Result<Vec<f64>, SystemError> {
    part.split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| SystemError::BadSpec { spec: spec.into(), msg: e.to_string() })
}

/// Looks up a system by registry name.
pub fn lookup(spec: &str) -> Result<NamedSystem, SystemError> {
    let (head, rest) = match spec.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (spec, None),
    };
    let bad = |msg: &str| SystemError::BadSpec { spec: spec.into(), msg: msg.into() };
    match (head, rest) {
        ("circle", None) => Ok(circle_flow()),
        ("annulus", None) => Ok(appendix_annulus(Phi::new(vec![0.25, -1.0]))),
        ("annulus", Some(r)) => Ok(appendix_annulus(Phi::new(numbers(spec, r)?))),
        ("hypercycle", Some(r)) => {
            let (n, ks) = match r.split_once(':') {
                Some((n, ks)) => (n, Some(ks)),
                None => (r, None),
            };
            let n: usize = n.trim().parse().map_err(|_| bad("n must be an integer"))?;
            let k = match ks {
                Some(ks) => numbers(spec, ks)?,
                None => vec![1.0; n],
            };
            hypercycle(n, &k)
        }
        ("vdp", Some(r)) => van_der_pol(r.trim().parse().map_err(|_| bad("mu must be a number"))?),
        ("vdp", None) => van_der_pol(0.5),
        ("drift3", None) => drift3(DRIFT3_RATE),
        ("drift3", Some(r)) => drift3(r.trim().parse().map_err(|_| bad("rate must be a number"))?),
        _ => Err(SystemError::Unknown(spec.into())),
    }
}

/// Fixed-step RK4 at `h` and `h/2`; returns the finer endpoint and the
/// Richardson error estimate `|y_h - y_{h/2}| / 15`.
pub fn reference_integrate(
    f: &dyn VectorField,
    x0: &[f64],
    t_end: f64,
    h: f64,
) -> Result<(Vec<f64>, f64), EpsError> {
    let run = |h: f64| -> Result<Vec<f64>, EpsError> {
        let steps = (t_end / h).ceil().max(1.0) as u64;
        let h = t_end / steps as f64;
        let mut x = x0.to_vec();
        for _ in 0..steps {
            x = rk4(f, &x, h);
            f.project(&mut x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(EpsError::NonFinite { x });
            }
        }
        Ok(x)
    };
    let coarse = run(h)?;
    let fine = run(h / 2.0)?;
    let err = dist(&coarse, &fine) / 15.0;
    Ok((fine, err))
}

/// Largest `|x_1|` over one period-length window after `transient`, sampled
/// every `h`.
pub fn amplitude(f: &dyn VectorField, x0: &[f64], transient: f64, window: f64, h: f64) -> f64 {
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut best: f64 = 0.0;
    while t < transient + window {
        x = rk4(f, &x, h);
        t += h;
        if t >= transient {
            best = best.max(x[0].abs());
        }
    }
    best
}

/// Uniform point on the simplex.
pub fn simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter_mut().for_each(|v| *v /= s);
    e
}
