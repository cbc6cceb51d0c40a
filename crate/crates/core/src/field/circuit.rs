use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::FieldError;

/// Default magnitude guard for floating-point evaluation.
pub const MAGNITUDE_BOUND: f64 = 1e200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    /// 1 if the argument is strictly positive, else 0.
    Sgn,
}

impl Op {
    fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Sgn => "sgn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Input(usize),
    Const(BigRational),
    Gate { op: Op, a: NodeId, b: Option<NodeId> },
}

/// Bit vector with one entry per `sgn` gate, in gate order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct CellSignature(pub Vec<bool>);

impl fmt::Display for CellSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Straight-line program over `{+, -, *, sgn}` with rational constants.
/// Nodes are topologically ordered: every gate reads earlier nodes only.
#[derive(Debug, Clone, PartialEq)]
pub struct ArithCircuit {
    d_in: usize,
    nodes: Vec<Node>,
    outputs: Vec<NodeId>,
    // f64 copies of the constants, indexed like `nodes`
    cache: Vec<f64>,
}

impl ArithCircuit {
    pub fn new(d_in: usize, nodes: Vec<Node>, outputs: Vec<NodeId>) -> Result<Self, FieldError> {
        for (k, node) in nodes.iter().enumerate() {
            match node {
                Node::Input(i) if *i >= d_in => {
                    return Err(FieldError::Invalid(format!("node {k} reads input {i} of {d_in}")))
                }
                Node::Gate { op, a, b } => {
                    let args: Vec<NodeId> = std::iter::once(*a).chain(*b).collect();
                    if args.iter().any(|x| x.0 as usize >= k) {
                        return Err(FieldError::Invalid(format!("node {k} reads a later node")));
                    }
                    if (*op == Op::Sgn) != b.is_none() {
                        return Err(FieldError::Invalid(format!("node {k} has the wrong arity")));
                    }
                }
                _ => {}
            }
        }
        if let Some(o) = outputs.iter().find(|o| o.0 as usize >= nodes.len()) {
            return Err(FieldError::Invalid(format!("output references missing node {}", o.0)));
        }
        let cache = nodes
            .iter()
            .map(|n| match n {
                Node::Const(c) => c.to_f64().unwrap_or(f64::NAN),
                _ => 0.0,
            })
            .collect();
        Ok(Self { d_in, nodes, outputs, cache })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.outputs.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn sgn_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Gate { op: Op::Sgn, .. })).count()
    }

    pub fn gate_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Gate { .. })).count()
    }

    /// Circuit size `|C|`: node count plus the bit length of every constant.
    pub fn size(&self) -> u64 {
        let bits: u64 = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Const(c) => c.numer().bits() + c.denom().bits(),
                _ => 0,
            })
            .sum();
        self.nodes.len() as u64 + bits
    }

    /// Structural per-cell degree of each output (sgn outputs count as
    /// constants inside a cell).
    pub fn degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.nodes.len()];
        for (k, node) in self.nodes.iter().enumerate() {
            deg[k] = match node {
                Node::Input(_) => 1,
                Node::Const(_) => 0,
                Node::Gate { op: Op::Sgn, .. } => 0,
                Node::Gate { op: Op::Mul, a, b } => deg[a.0 as usize] + deg[b.unwrap().0 as usize],
                Node::Gate { a, b, .. } => deg[a.0 as usize].max(deg[b.unwrap().0 as usize]),
            };
        }
        self.outputs.iter().map(|o| deg[o.0 as usize]).collect()
    }

    pub fn check_degree_bound(&self, bound: u32) -> Result<(), FieldError> {
        match self.degrees().into_iter().max() {
            Some(d) if d > bound => Err(FieldError::DegreeBound { degree: d, bound }),
            _ => Ok(()),
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), FieldError> {
        if got != self.d_in {
            return Err(FieldError::DimensionMismatch { expected: self.d_in, got });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<(Vec<f64>, CellSignature), FieldError> {
        self.eval_bounded(x, MAGNITUDE_BOUND)
    }

    pub fn eval_bounded(&self, x: &[f64], bound: f64) -> Result<(Vec<f64>, CellSignature), FieldError> {
        self.check_dim(x.len())?;
        let mut v = vec![0.0f64; self.nodes.len()];
        let mut sig = Vec::new();
        for (k, node) in self.nodes.iter().enumerate() {
            let val = match node {
                Node::Input(i) => x[*i],
                Node::Const(_) => self.cache[k],
                Node::Gate { op, a, b } => {
                    let a = v[a.0 as usize];
                    let b = b.map(|b| v[b.0 as usize]).unwrap_or(0.0);
                    match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Sgn => {
                            sig.push(a > 0.0);
                            if a > 0.0 { 1.0 } else { 0.0 }
                        }
                    }
                }
            };
            if !(val.abs() <= bound) {
                return Err(FieldError::Overflow { node: k, bound });
            }
            v[k] = val;
        }
        Ok((self.outputs.iter().map(|o| v[o.0 as usize]).collect(), CellSignature(sig)))
    }

    /// Values only, writing into `out`. Skips the signature.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        scratch.clear();
        scratch.resize(self.nodes.len(), 0.0);
        for (k, node) in self.nodes.iter().enumerate() {
            scratch[k] = match node {
                Node::Input(i) => x[*i],
                Node::Const(_) => self.cache[k],
                Node::Gate { op, a, b } => {
                    let a = scratch[a.0 as usize];
                    let b = b.map(|b| scratch[b.0 as usize]).unwrap_or(0.0);
                    match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Sgn => (a > 0.0) as u8 as f64,
                    }
                }
            };
        }
        for (o, id) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[id.0 as usize];
        }
    }

    /// Exact evaluation over the rationals.
    pub fn eval_exact(&self, x: &[BigRational]) -> Result<(Vec<BigRational>, CellSignature), FieldError> {
        self.check_dim(x.len())?;
        let mut v: Vec<BigRational> = Vec::with_capacity(self.nodes.len());
        let mut sig = Vec::new();
        for node in &self.nodes {
            let val = match node {
                Node::Input(i) => x[*i].clone(),
                Node::Const(c) => c.clone(),
                Node::Gate { op, a, b } => {
                    let a = &v[a.0 as usize];
                    match op {
                        Op::Add => a + &v[b.unwrap().0 as usize],
                        Op::Sub => a - &v[b.unwrap().0 as usize],
                        Op::Mul => a * &v[b.unwrap().0 as usize],
                        Op::Sgn => {
                            let pos = a.is_positive();
                            sig.push(pos);
                            if pos { BigRational::one() } else { BigRational::zero() }
                        }
                    }
                }
            };
            v.push(val);
        }
        Ok((self.outputs.iter().map(|o| v[o.0 as usize].clone()).collect(), CellSignature(sig)))
    }

    /// Values and the Jacobian (row per output) by forward differentiation;
    /// `sgn` gates contribute zero derivative.
    pub fn eval_with_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), FieldError> {
        self.check_dim(x.len())?;
        let d = self.d_in;
        let mut v = vec![0.0; self.nodes.len()];
        let mut g = vec![vec![0.0; d]; self.nodes.len()];
        for (k, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Input(i) => {
                    v[k] = x[*i];
                    g[k][*i] = 1.0;
                }
                Node::Const(_) => v[k] = self.cache[k],
                Node::Gate { op, a, b } => {
                    let (a, b) = (a.0 as usize, b.map(|b| b.0 as usize));
                    let (va, vb) = (v[a], b.map(|b| v[b]).unwrap_or(0.0));
                    let grad: Vec<f64> = (0..d)
                        .map(|t| {
                            let (ga, gb) = (g[a][t], b.map(|b| g[b][t]).unwrap_or(0.0));
                            match op {
                                Op::Add => ga + gb,
                                Op::Sub => ga - gb,
                                Op::Mul => ga * vb + va * gb,
                                Op::Sgn => 0.0,
                            }
                        })
                        .collect();
                    v[k] = match op {
                        Op::Add => va + vb,
                        Op::Sub => va - vb,
                        Op::Mul => va * vb,
                        Op::Sgn => (va > 0.0) as u8 as f64,
                    };
                    g[k] = grad;
                }
            }
        }
        Ok((
            self.outputs.iter().map(|o| v[o.0 as usize]).collect(),
            self.outputs.iter().map(|o| g[o.0 as usize].clone()).collect(),
        ))
    }

    /// Canonical text form; see [`parse_circuit`].
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn node_name(nodes: &[Node], names: &[String], id: NodeId) -> String {
    match &nodes[id.0 as usize] {
        Node::Input(i) => format!("x{i}"),
        _ => names[id.0 as usize].clone(),
    }
}

impl fmt::Display for ArithCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "in {}", self.d_in)?;
        let mut names = Vec::with_capacity(self.nodes.len());
        let (mut consts, mut gates) = (0, 0);
        for node in &self.nodes {
            names.push(match node {
                Node::Input(i) => format!("x{i}"),
                Node::Const(_) => {
                    consts += 1;
                    format!("c{}", consts - 1)
                }
                Node::Gate { .. } => {
                    gates += 1;
                    format!("g{}", gates - 1)
                }
            });
        }
        for (k, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Input(_) => {}
                Node::Const(c) => writeln!(f, "const {}/{}", c.numer(), c.denom())?,
                Node::Gate { op, a, b } => {
                    write!(f, "gate {} {} {}", names[k], op.name(), node_name(&self.nodes, &names, *a))?;
                    if let Some(b) = b {
                        write!(f, " {}", node_name(&self.nodes, &names, *b))?;
                    }
                    writeln!(f)?;
                }
            }
        }
        f.write_str("out")?;
        for o in &self.outputs {
            write!(f, " {}", node_name(&self.nodes, &names, *o))?;
        }
        writeln!(f)
    }
}

fn parse_rational(tok: &str) -> Option<BigRational> {
    let (p, q) = match tok.split_once('/') {
        Some((p, q)) => (p.parse::<BigInt>().ok()?, q.parse::<BigInt>().ok()?),
        None => (tok.parse::<BigInt>().ok()?, BigInt::one()),
    };
    if q.is_zero() {
        return None;
    }
    Some(BigRational::new(p, q))
}

/// Parses the circuit text format:
///
/// ```text
/// in <k>                      inputs x0 .. x{k-1}
/// const <p>/<q>               next constant c0, c1, ...
/// gate <id> <op> <a> [<b>]    op is add, sub, mul (two args) or sgn (one)
/// out <ref> ...               outputs, in order
/// ```
///
/// References name an input `x<i>`, a constant `c<j>` or an earlier gate
/// id. Blank lines and lines starting with `#` are skipped.
pub fn parse_circuit(text: &str) -> Result<ArithCircuit, FieldError> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, t)| !t.is_empty() && !t[0].starts_with('#'))
        .collect();
    // ids defined anywhere, to tell forward references from dangling ones
    let defined_later: std::collections::HashSet<&str> =
        lines.iter().filter(|(_, t)| t[0] == "gate" && t.len() > 1).map(|(_, t)| t[1]).collect();

    let mut d_in: Option<usize> = None;
    let mut nodes: Vec<Node> = Vec::new();
    let mut names: HashMap<String, NodeId> = HashMap::new();
    let mut outputs: Option<Vec<NodeId>> = None;
    let mut consts = 0usize;

    for (line, toks) in &lines {
        let line = *line;
        let syntax = |msg: &str| FieldError::Syntax { line, msg: msg.to_string() };
        let resolve = |name: &str, names: &HashMap<String, NodeId>| -> Result<NodeId, FieldError> {
            if let Some(&id) = names.get(name) {
                return Ok(id);
            }
            if defined_later.contains(name) {
                Err(FieldError::ForwardReference { line, name: name.to_string() })
            } else {
                Err(FieldError::DanglingReference { line, name: name.to_string() })
            }
        };
        match toks[0] {
            "in" => {
                if d_in.is_some() || !nodes.is_empty() || toks.len() != 2 {
                    return Err(syntax("`in <k>` must come first, exactly once"));
                }
                let k: usize = toks[1].parse().map_err(|_| syntax("bad input count"))?;
                for i in 0..k {
                    names.insert(format!("x{i}"), NodeId(nodes.len() as u32));
                    nodes.push(Node::Input(i));
                }
                d_in = Some(k);
            }
            "const" => {
                if toks.len() != 2 {
                    return Err(syntax("expected `const <p>/<q>`"));
                }
                let c = parse_rational(toks[1]).ok_or_else(|| syntax("bad rational constant"))?;
                names.insert(format!("c{consts}"), NodeId(nodes.len() as u32));
                consts += 1;
                nodes.push(Node::Const(c));
            }
            "gate" => {
                if d_in.is_none() {
                    return Err(syntax("`in <k>` must come first"));
                }
                if toks.len() < 4 {
                    return Err(syntax("expected `gate <id> <op> <a> [b]`"));
                }
                let op = match toks[2] {
                    "add" => Op::Add,
                    "sub" => Op::Sub,
                    "mul" => Op::Mul,
                    "sgn" => Op::Sgn,
                    _ => return Err(syntax("unknown gate op")),
                };
                let arity = if op == Op::Sgn { 1 } else { 2 };
                if toks.len() != 3 + arity {
                    return Err(syntax("wrong number of gate arguments"));
                }
                let id = toks[1];
                if names.contains_key(id) {
                    return Err(syntax("duplicate gate id"));
                }
                let a = resolve(toks[3], &names)?;
                let b = if arity == 2 { Some(resolve(toks[4], &names)?) } else { None };
                names.insert(id.to_string(), NodeId(nodes.len() as u32));
                nodes.push(Node::Gate { op, a, b });
            }
            "out" => {
                if outputs.is_some() {
                    return Err(syntax("duplicate `out` line"));
                }
                let refs = toks[1..].iter().map(|t| resolve(t, &names)).collect::<Result<Vec<_>, _>>()?;
                outputs = Some(refs);
            }
            _ => return Err(syntax("unknown directive")),
        }
    }
    let d_in = d_in.ok_or(FieldError::Syntax { line: 0, msg: "missing `in` line".into() })?;
    let outputs = outputs.ok_or(FieldError::Syntax { line: 0, msg: "missing `out` line".into() })?;
    ArithCircuit::new(d_in, nodes, outputs)
}

/// Incremental construction of a circuit. Constants are interned.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    d_in: usize,
    nodes: Vec<Node>,
    consts: HashMap<BigRational, NodeId>,
}

impl CircuitBuilder {
    pub fn new(d_in: usize) -> Self {
        let nodes = (0..d_in).map(Node::Input).collect();
        Self { d_in, nodes, consts: HashMap::new() }
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() as u32 - 1)
    }

    pub fn input(&self, i: usize) -> NodeId {
        assert!(i < self.d_in);
        NodeId(i as u32)
    }

    pub fn constant(&mut self, c: BigRational) -> NodeId {
        if let Some(&id) = self.consts.get(&c) {
            return id;
        }
        let id = self.push(Node::Const(c.clone()));
        self.consts.insert(c, id);
        id
    }

    pub fn int(&mut self, k: i64) -> NodeId {
        self.constant(BigRational::from_integer(k.into()))
    }

    pub fn ratio(&mut self, p: i64, q: i64) -> NodeId {
        self.constant(BigRational::new(p.into(), q.into()))
    }

    /// Exact rational copy of a double.
    pub fn float(&mut self, x: f64) -> NodeId {
        self.constant(BigRational::from_float(x).expect("finite constant"))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Gate { op: Op::Add, a, b: Some(b) })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Gate { op: Op::Sub, a, b: Some(b) })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Gate { op: Op::Mul, a, b: Some(b) })
    }

    pub fn sgn(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Gate { op: Op::Sgn, a, b: None })
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let z = self.int(0);
        self.sub(z, a)
    }

    pub fn sum(&mut self, terms: &[NodeId]) -> NodeId {
        match terms.split_first() {
            None => self.int(0),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.add(acc, t)),
        }
    }

    pub fn product(&mut self, factors: &[NodeId]) -> NodeId {
        match factors.split_first() {
            None => self.int(1),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.mul(acc, t)),
        }
    }

    /// Evaluates `coeffs[0] + coeffs[1] x + ...` by Horner's rule.
    pub fn poly(&mut self, x: NodeId, coeffs: &[f64]) -> NodeId {
        let mut acc = self.float(*coeffs.last().unwrap_or(&0.0));
        for &c in coeffs.iter().rev().skip(1) {
            let m = self.mul(acc, x);
            let k = self.float(c);
            acc = self.add(m, k);
        }
        acc
    }

    pub fn finish(self, outputs: Vec<NodeId>) -> Result<ArithCircuit, FieldError> {
        ArithCircuit::new(self.d_in, self.nodes, outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_step() -> ArithCircuit {
        parse_circuit("in 1\nconst 1/2\ngate g0 sub x0 c0\ngate g1 sgn g0\nout g1\n").unwrap()
    }

    #[test]
    fn sgn_is_strict() {
        let c = half_step();
        assert_eq!(c.eval(&[0.7]).unwrap(), (vec![1.0], CellSignature(vec![true])));
        assert_eq!(c.eval(&[0.5]).unwrap(), (vec![0.0], CellSignature(vec![false])));
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(c.eval_exact(&[half]).unwrap().0, vec![BigRational::zero()]);
    }

    #[test]
    fn circle_flow() {
        let c = parse_circuit("in 2\nconst 0/1\ngate g0 sub c0 x0\nout x1 g0\n").unwrap();
        assert_eq!(c.eval(&[0.0, 1.0]).unwrap().0, vec![1.0, 0.0]);
        assert_eq!(c.to_text(), "in 2\nconst 0/1\ngate g0 sub c0 x0\nout x1 g0\n");
    }

    #[test]
    fn reference_errors() {
        let fwd = parse_circuit("in 1\ngate a add x0 b\ngate b add x0 x0\nout a\n");
        assert!(matches!(fwd, Err(FieldError::ForwardReference { line: 2, .. })));
        let dangling = parse_circuit("in 1\ngate a add x0 zz\nout a\n");
        assert!(matches!(dangling, Err(FieldError::DanglingReference { .. })));
        let bad_in = parse_circuit("in 1\nout x3\n");
        assert!(matches!(bad_in, Err(FieldError::DanglingReference { .. })));
    }

    #[test]
    fn overflow_guard() {
        let c = parse_circuit("in 1\ngate a mul x0 x0\nout a\n").unwrap();
        assert!(matches!(c.eval_bounded(&[1e3], 1e5), Err(FieldError::Overflow { .. })));
    }

    #[test]
    fn degrees_and_builder() {
        let mut b = CircuitBuilder::new(1);
        let x = b.input(0);
        let p = b.poly(x, &[1.0, 0.0, 3.0]);
        let s = b.sgn(p);
        let c = b.finish(vec![p, s]).unwrap();
        assert_eq!(c.degrees(), vec![2, 0]);
        assert!(c.check_degree_bound(1).is_err());
        assert_eq!(c.eval(&[2.0]).unwrap().0, vec![13.0, 1.0]);
        let (_, jac) = c.eval_with_jacobian(&[2.0]).unwrap();
        assert_eq!(jac, vec![vec![12.0], vec![0.0]]);
    }
}
