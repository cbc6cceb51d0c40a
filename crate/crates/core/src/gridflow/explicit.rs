use super::{successor, DisplacementOracle, GridDomain, GridError, GridPoint};

/// Default cap on materialised grid points.
pub const EXPLICIT_BOUND: u64 = 10_000_000;

/// The flow with every edge materialised. Used as a test oracle.
#[derive(Debug, Clone)]
pub struct ExplicitGraph {
    succ: Vec<u32>,
    in_degree: Vec<u32>,
}

impl ExplicitGraph {
    pub fn build(dom: &GridDomain, f: &dyn DisplacementOracle) -> Result<Self, GridError> {
        Self::build_bounded(dom, f, EXPLICIT_BOUND)
    }

    pub fn build_bounded(dom: &GridDomain, f: &dyn DisplacementOracle, bound: u64) -> Result<Self, GridError> {
        let points = dom.total_points();
        if points > bound {
            return Err(GridError::TooLarge { points, bound });
        }
        let mut succ = Vec::with_capacity(points as usize);
        let mut in_degree = vec![0u32; points as usize];
        for k in 0..points {
            let q = successor(dom, f, dom.point_at(k))?;
            let t = dom.index_of(q) as u32;
            in_degree[t as usize] += 1;
            succ.push(t);
        }
        Ok(Self { succ, in_degree })
    }

    pub fn node_count(&self) -> usize {
        self.succ.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.len()
    }

    pub fn successor(&self, node: u32) -> u32 {
        self.succ[node as usize]
    }

    pub fn in_degree(&self, node: u32) -> u32 {
        self.in_degree[node as usize]
    }

    pub fn sources(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.succ.len() as u32).filter(|&k| self.in_degree[k as usize] == 0)
    }

    pub fn has_fixpoint(&self) -> bool {
        self.succ.iter().enumerate().any(|(k, &s)| k as u32 == s)
    }

    /// Every cycle, each listed from its smallest node.
    pub fn cycles(&self) -> Vec<Vec<u32>> {
        // 0 = unvisited, 1 = on current walk, 2 = done
        let mut state = vec![0u8; self.succ.len()];
        let mut cycles = Vec::new();
        for s in 0..self.succ.len() {
            if state[s] != 0 {
                continue;
            }
            let mut walk = Vec::new();
            let mut v = s;
            while state[v] == 0 {
                state[v] = 1;
                walk.push(v);
                v = self.succ[v] as usize;
            }
            if state[v] == 1 {
                let pos = walk.iter().position(|&w| w == v).unwrap();
                let mut cyc: Vec<u32> = walk[pos..].iter().map(|&w| w as u32).collect();
                let min_at = cyc.iter().enumerate().min_by_key(|(_, &c)| c).unwrap().0;
                cyc.rotate_left(min_at);
                cycles.push(cyc);
            }
            for w in walk {
                state[w] = 2;
            }
        }
        cycles
    }

    /// Strongly connected components with no outgoing edge, via iterative
    /// Tarjan. Does not assume out-degree one.
    pub fn sink_components(&self) -> Vec<Vec<u32>> {
        let n = self.succ.len();
        let mut index = vec![u32::MAX; n];
        let mut low = vec![0u32; n];
        let mut on_stack = vec![false; n];
        let mut stack: Vec<u32> = Vec::new();
        let mut comp_of = vec![u32::MAX; n];
        let mut comps: Vec<Vec<u32>> = Vec::new();
        let mut counter = 0u32;

        for root in 0..n {
            if index[root] != u32::MAX {
                continue;
            }
            // (node, edge already explored)
            let mut call: Vec<(usize, bool)> = vec![(root, false)];
            while let Some(&mut (v, ref mut explored)) = call.last_mut() {
                if !*explored {
                    if index[v] == u32::MAX {
                        index[v] = counter;
                        low[v] = counter;
                        counter += 1;
                        stack.push(v as u32);
                        on_stack[v] = true;
                    }
                    *explored = true;
                    let w = self.succ[v] as usize;
                    if index[w] == u32::MAX {
                        call.push((w, false));
                        continue;
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    let w = self.succ[v] as usize;
                    if on_stack[w] {
                        low[v] = low[v].min(low[w]);
                    }
                }
                if let Some(&(_, true)) = call.last() {
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w as usize] = false;
                            comp_of[w as usize] = comps.len() as u32;
                            comp.push(w);
                            if w as usize == v {
                                break;
                            }
                        }
                        comps.push(comp);
                    }
                    call.pop();
                    if let Some(&mut (parent, _)) = call.last_mut() {
                        low[parent] = low[parent].min(low[v]);
                    }
                }
            }
        }

        comps
            .into_iter()
            .enumerate()
            .filter(|(c, comp)| {
                comp.iter().all(|&v| comp_of[self.succ[v as usize] as usize] == *c as u32)
            })
            .map(|(_, mut comp)| {
                comp.sort_unstable();
                comp
            })
            .collect()
    }

    pub fn point(&self, dom: &GridDomain, node: u32) -> GridPoint {
        dom.point_at(node as u64)
    }
}
