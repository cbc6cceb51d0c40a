use std::collections::HashMap;

/// A stored trajectory sample with its normal-disc data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<'a> {
    pub t: f64,
    pub arc: f64,
    pub x: &'a [f64],
    pub v: &'a [f64],
}

const NONE: u32 = u32::MAX;

/// Spatial hash over trajectory samples with cubic buckets of side `delta`.
///
/// Buckets are keyed by a hash of the integer cell coordinates; colliding
/// cells share a list, which only costs extra distance checks.
#[derive(Debug, Clone)]
pub struct SectionIndex {
    dim: usize,
    delta: f64,
    t: Vec<f64>,
    arc: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
    /// Next sample in the same bucket.
    next: Vec<u32>,
    heads: HashMap<u64, u32>,
}

fn mix(cell: impl Iterator<Item = i64>) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for c in cell {
        h = (h ^ c as u64).wrapping_mul(0x1000_0000_01b3).rotate_left(29);
    }
    h
}

impl SectionIndex {
    pub fn new(dim: usize, delta: f64) -> Self {
        assert!(delta > 0.0);
        Self {
            dim,
            delta,
            t: Vec::new(),
            arc: Vec::new(),
            x: Vec::new(),
            v: Vec::new(),
            next: Vec::new(),
            heads: HashMap::new(),
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn cell(&self, c: f64) -> i64 {
        (c / self.delta).floor() as i64
    }

    pub fn insert(&mut self, t: f64, arc: f64, x: &[f64], v: &[f64]) -> usize {
        let id = self.t.len();
        let key = mix(x.iter().map(|&c| self.cell(c)));
        let head = self.heads.entry(key).or_insert(NONE);
        self.next.push(*head);
        *head = id as u32;
        self.t.push(t);
        self.arc.push(arc);
        self.x.extend_from_slice(x);
        self.v.extend_from_slice(v);
        id
    }

    pub fn sample(&self, id: usize) -> Sample<'_> {
        let r = id * self.dim..(id + 1) * self.dim;
        Sample { t: self.t[id], arc: self.arc[id], x: &self.x[r.clone()], v: &self.v[r] }
    }

    /// Ids of samples within distance `r` of `x`, in insertion order.
    pub fn near(&self, x: &[f64], r: f64) -> Vec<usize> {
        let reach = (r / self.delta).ceil() as i64;
        let base: Vec<i64> = x.iter().map(|&c| self.cell(c)).collect();
        let mut out = Vec::new();
        let mut offset = vec![-reach; self.dim];
        loop {
            let key = mix(base.iter().zip(&offset).map(|(b, o)| b + o));
            let mut id = self.heads.get(&key).copied().unwrap_or(NONE);
            while id != NONE {
                let k = id as usize;
                let p = &self.x[k * self.dim..(k + 1) * self.dim];
                let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 <= r * r {
                    out.push(k);
                }
                id = self.next[k];
            }
            // odometer over the neighbourhood
            let mut k = 0;
            while k < self.dim {
                offset[k] += 1;
                if offset[k] <= reach {
                    break;
                }
                offset[k] = -reach;
                k += 1;
            }
            if k == self.dim {
                break;
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_all_within_two_delta() {
        let mut idx = SectionIndex::new(2, 0.1);
        let pts = [[0.0, 0.0], [0.15, 0.0], [0.19, 0.05], [0.5, 0.5], [-0.19, 0.0]];
        for (k, p) in pts.iter().enumerate() {
            idx.insert(k as f64, 0.0, p, &[1.0, 0.0]);
        }
        assert_eq!(idx.near(&[0.0, 0.0], 0.2), vec![0, 1, 2, 4]);
        assert_eq!(idx.near(&[0.5, 0.45], 0.06), vec![3]);
        assert_eq!(idx.sample(2).x, &[0.19, 0.05]);
    }
}
