//! Vector fields as closures and as arithmetic circuits.

mod circuit;

pub use circuit::{
    parse_circuit, ArithCircuit, CellSignature, CircuitBuilder, Node, NodeId, Op, MAGNITUDE_BOUND,
};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: `{name}` is used before it is defined")]
    ForwardReference { line: usize, name: String },
    #[error("line {line}: `{name}` is never defined")]
    DanglingReference { line: usize, name: String },
    #[error("invalid circuit: {0}")]
    Invalid(String),
    #[error("value at node {node} exceeds magnitude bound {bound:e}")]
    Overflow { node: usize, bound: f64 },
    #[error("per-cell degree {degree} exceeds bound {bound}")]
    DegreeBound { degree: u32, bound: u32 },
    #[error("expected a point of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
}

/// Where a field came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Circuit,
    ClosedForm(String),
    CompiledReduction,
}

/// Absolute tolerance of [`Domain::contains`] at the boundary.
pub const DOMAIN_SLACK: f64 = 1e-9;

/// Domain descriptor. `Custom` defers membership to the field and only
/// records a bounding box.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Planar annulus around `center`.
    Annulus { center: [f64; 2], r_in: f64, r_out: f64 },
    /// Probability simplex in `dim` coordinates, minus a ball around
    /// `hole` of radius `hole_radius` (radius 0 for no hole).
    Simplex { dim: usize, hole: Vec<f64>, hole_radius: f64 },
    Custom { lo: Vec<f64>, hi: Vec<f64>, name: String },
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lo, hi } | Domain::Custom { lo, hi, .. } => (lo.clone(), hi.clone()),
            Domain::Annulus { center, r_out, .. } => {
                (vec![center[0] - r_out, center[1] - r_out], vec![center[0] + r_out, center[1] + r_out])
            }
            Domain::Simplex { dim, .. } => (vec![0.0; *dim], vec![1.0; *dim]),
        }
    }

    /// Membership for the built-in shapes, up to [`DOMAIN_SLACK`] so that
    /// orbits along the boundary survive rounding; `Custom` only checks the box.
    pub fn contains(&self, x: &[f64]) -> bool {
        let e = DOMAIN_SLACK;
        match self {
            Domain::Box { lo, hi } | Domain::Custom { lo, hi, .. } => {
                x.len() == lo.len() && x.iter().zip(lo).zip(hi).all(|((v, l), h)| *l - e <= *v && *v <= *h + e)
            }
            Domain::Annulus { center, r_in, r_out } => {
                let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                x.len() == 2 && *r_in - e <= r && r <= *r_out + e
            }
            Domain::Simplex { dim, hole, hole_radius } => {
                let on = x.len() == *dim
                    && x.iter().all(|&v| v >= -e)
                    && (x.iter().sum::<f64>() - 1.0).abs() < 1e-9;
                on && (*hole_radius == 0.0 || dist(x, hole) >= *hole_radius)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        dist(&lo, &hi)
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An autonomous field `x' = f(x)` on a domain.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn domain(&self) -> &Domain;

    fn contains(&self, x: &[f64]) -> bool {
        self.domain().contains(x)
    }

    /// Declared Lipschitz constant, if known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn provenance(&self) -> Provenance;

    /// Pulls an integrated point back onto an invariant set the dynamics
    /// preserve exactly but floating point does not. No-op by default.
    fn project(&self, _x: &mut [f64]) {}

    /// Draws a point of the domain. The default samples the simplex
    /// uniformly and uses rejection from the bounding box otherwise.
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        if let Domain::Simplex { dim, .. } = self.domain() {
            for _ in 0..1000 {
                let mut e: Vec<f64> = (0..*dim).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
                let s: f64 = e.iter().sum();
                e.iter_mut().for_each(|v| *v /= s);
                if self.contains(&e) {
                    return Some(e);
                }
            }
            return None;
        }
        let (lo, hi) = self.domain().bounding_box();
        for _ in 0..10_000 {
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| rng.gen_range(*l..=*h)).collect();
            if self.contains(&x) {
                return Some(x);
            }
        }
        None
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }
}

type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A closed-form field given by a closure.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    domain: Domain,
    f: Arc<FieldFn>,
    lipschitz: Option<f64>,
    provenance: Provenance,
}

impl std::fmt::Debug for FnField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnField").field("dim", &self.dim).field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl FnField {
    pub fn new(
        name: &str,
        dim: usize,
        domain: Domain,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { dim, domain, f: Arc::new(f), lipschitz: None, provenance: Provenance::ClosedForm(name.into()) }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }
}

impl VectorField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
    fn provenance(&self) -> Provenance {
        self.provenance.clone()
    }
}

/// A field evaluated through an [`ArithCircuit`].
#[derive(Debug, Clone)]
pub struct CircuitField {
    circuit: ArithCircuit,
    domain: Domain,
    lipschitz: Option<f64>,
}

impl CircuitField {
    pub fn new(circuit: ArithCircuit, domain: Domain) -> Result<Self, FieldError> {
        if circuit.d_in() != circuit.d_out() {
            return Err(FieldError::DimensionMismatch { expected: circuit.d_in(), got: circuit.d_out() });
        }
        Ok(Self { circuit, domain, lipschitz: None })
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn circuit(&self) -> &ArithCircuit {
        &self.circuit
    }
}

impl VectorField for CircuitField {
    fn dim(&self) -> usize {
        self.circuit.d_in()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let mut scratch = Vec::new();
        self.circuit.eval_into(x, out, &mut scratch);
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
    fn provenance(&self) -> Provenance {
        Provenance::Circuit
    }
}

/// Empirical lower bound on the Lipschitz constant: the largest difference
/// quotient over `samples` seeded pairs. Half the pairs are independent
/// uniform draws; the rest are close pairs at scales from 1/10 down to
/// 1e-6 of the domain diameter.
pub fn estimate_lipschitz(f: &dyn VectorField, samples: usize, seed: u64) -> Result<f64, FieldError> {
    if samples < 2 {
        return Err(FieldError::DegenerateDomain("need at least 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diam = f.domain().diameter();
    if !(diam > 0.0) {
        return Err(FieldError::DegenerateDomain("zero diameter".into()));
    }
    let d = f.dim();
    let mut best = 0.0f64;
    let (mut fa, mut fb) = (vec![0.0; d], vec![0.0; d]);
    let mut done = 0;
    let mut attempts = 0;
    while done < samples {
        attempts += 1;
        if attempts > 100 * samples + 10_000 {
            return Err(FieldError::DegenerateDomain("could not sample pairs".into()));
        }
        let a = f
            .sample_point(&mut rng)
            .ok_or_else(|| FieldError::DegenerateDomain("could not sample the domain".into()))?;
        let b = if done % 2 == 0 {
            match f.sample_point(&mut rng) {
                Some(b) => b,
                None => continue,
            }
        } else {
            let scale = diam * 10f64.powi(-rng.gen_range(1..=6));
            let mut dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if let Domain::Simplex { .. } = f.domain() {
                // stay on the simplex: directions with zero coordinate sum
                let m = dir.iter().sum::<f64>() / d as f64;
                dir.iter_mut().for_each(|v| *v -= m);
            }
            let nd = norm(&dir);
            if nd == 0.0 {
                continue;
            }
            let b: Vec<f64> = a.iter().zip(&dir).map(|(x, v)| x + scale * v / nd).collect();
            if !f.contains(&b) {
                continue;
            }
            b
        };
        let r = dist(&a, &b);
        if r == 0.0 {
            continue;
        }
        f.eval_into(&a, &mut fa);
        f.eval_into(&b, &mut fb);
        best = best.max(dist(&fa, &fb) / r);
        done += 1;
    }
    Ok(best)
}
