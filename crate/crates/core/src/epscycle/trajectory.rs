use std::fmt::Write as _;

use crate::field::{dist, VectorField};

use super::EpsError;

/// Ordered samples `(t, x, v = f(x))` with cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    t: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
    arc: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self { dim, t: Vec::new(), x: Vec::new(), v: Vec::new(), arc: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Appends a sample. Panics if time does not increase.
    pub fn push(&mut self, t: f64, x: &[f64], v: &[f64]) {
        assert_eq!(x.len(), self.dim);
        let arc = match self.t.last() {
            Some(&last) => {
                assert!(t > last, "trajectory times must increase");
                self.arc.last().unwrap() + dist(self.point(self.len() - 1), x)
            }
            None => 0.0,
        };
        self.t.push(t);
        self.x.extend_from_slice(x);
        self.v.extend_from_slice(v);
        self.arc.push(arc);
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t[k]
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.x[k * self.dim..(k + 1) * self.dim]
    }

    pub fn velocity(&self, k: usize) -> &[f64] {
        &self.v[k * self.dim..(k + 1) * self.dim]
    }

    pub fn arc_length(&self, k: usize) -> f64 {
        self.arc[k]
    }

    pub fn last_point(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.point(self.len() - 1))
    }

    /// Largest distance between consecutive samples.
    pub fn max_spacing(&self) -> f64 {
        (1..self.len()).map(|k| self.arc[k] - self.arc[k - 1]).fold(0.0, f64::max)
    }

    /// CSV with header `t,x1..xd,v1..vd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 1..=self.dim {
            let _ = write!(out, ",x{k}");
        }
        for k in 1..=self.dim {
            let _ = write!(out, ",v{k}");
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(out, "{}", self.t[k]);
            for c in self.point(k).iter().chain(self.velocity(k)) {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, EpsError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| EpsError::Parse("empty trajectory file".into()))?;
        let cols = header.split(',').count();
        if cols < 3 || (cols - 1) % 2 != 0 {
            return Err(EpsError::Parse("header must be t,x1..xd,v1..vd".into()));
        }
        let dim = (cols - 1) / 2;
        let mut traj = Trajectory::new(dim);
        for (k, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| EpsError::Parse(format!("row {}: {e}", k + 1)))?;
            if vals.len() != cols {
                return Err(EpsError::Parse(format!("row {} has {} fields", k + 1, vals.len())));
            }
            if traj.t.last().is_some_and(|&l| vals[0] <= l) {
                return Err(EpsError::Parse(format!("row {}: time does not increase", k + 1)));
            }
            traj.push(vals[0], &vals[1..=dim], &vals[dim + 1..]);
        }
        Ok(traj)
    }
}

/// One classical Runge-Kutta step. No domain check.
pub fn rk4(f: &dyn VectorField, x: &[f64], h: f64) -> Vec<f64> {
    let d = x.len();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    f.eval_into(x, &mut k1);
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f.eval_into(&tmp, &mut k2);
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f.eval_into(&tmp, &mut k3);
    for i in 0..d {
        tmp[i] = x[i] + h * k3[i];
    }
    f.eval_into(&tmp, &mut k4);
    (0..d).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// One RK4 step that must stay inside the domain and produce finite values.
pub fn integrate_step(f: &dyn VectorField, x: &[f64], h: f64) -> Result<Vec<f64>, EpsError> {
    let mut y = rk4(f, x, h);
    f.project(&mut y);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EpsError::NonFinite { x: x.to_vec() });
    }
    if !f.contains(&y) {
        return Err(EpsError::LeftDomain { from: x.to_vec(), to: y });
    }
    Ok(y)
}

/// Fixed-step integration over `[0, t_end]`, recording every step.
pub fn integrate(f: &dyn VectorField, x0: &[f64], h: f64, t_end: f64) -> Result<Trajectory, EpsError> {
    if !(h > 0.0) {
        return Err(EpsError::InvalidParameter("step must be positive".into()));
    }
    let mut traj = Trajectory::new(x0.len());
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let steps = (t_end / h).ceil() as u64;
    traj.push(t, &x, &f.eval(&x));
    for k in 1..=steps {
        let hk = if k == steps { t_end - t } else { h };
        if hk <= 0.0 {
            break;
        }
        x = integrate_step(f, &x, hk)?;
        t = if k == steps { t_end } else { k as f64 * h };
        traj.push(t, &x, &f.eval(&x));
    }
    Ok(traj)
}
