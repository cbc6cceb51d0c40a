//! Prenex quantified Boolean formulas.
//!
//! Variable `x_1` is the *innermost* bound variable and `x_n` the outermost,
//! so an instance reads `Q_n x_n ... Q_1 x_1 . phi(x_1, ..., x_n)`. The text
//! format lists quantifier lines outermost-first (QDIMACS order); the parser
//! renumbers variables so that the first-listed variable becomes `x_n`.
//!
//! Text grammar (one directive per line, `c` lines are comments):
//!
//! ```text
//! p qbf <n>
//! a <v> [<v> ...] [0]          universal block
//! e <v> [<v> ...] [0]          existential block
//! g <id> <and|or|xor|not> <arg> [<arg> ...]
//! <lit> [<lit> ...] 0          CNF clause (alternative to gates)
//! out <arg>
//! ```
//!
//! An `<arg>` is either `x<k>` / `-x<k>` (a possibly negated variable) or the
//! integer id of an earlier gate. Clause literals are signed variable
//! numbers. If no `out` line is present the matrix is the conjunction of all
//! clauses.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Default upper bound on `n` for [`brute_force_decide`].
pub const BRUTE_FORCE_BOUND: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QbfError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: variable index {index} exceeds n={n}")]
    VariableOutOfRange { line: usize, index: usize, n: usize },
    #[error("variable {0} has no quantifier")]
    MissingQuantifier(usize),
    #[error("missing `p qbf <n>` header")]
    MissingHeader,
    #[error("instance has n={n}, above the brute-force bound {bound}")]
    BoundExceeded { n: usize, bound: usize },
    #[error("invalid instance: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Exists,
    Forall,
}

impl Quantifier {
    fn letter(self) -> char {
        match self {
            Quantifier::Exists => 'e',
            Quantifier::Forall => 'a',
        }
    }
}

/// Reference to a value inside the matrix circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    /// Variable `x_k` (1-based).
    Var(usize),
    /// Negated variable.
    NegVar(usize),
    /// Output of gate at this position in the gate list.
    Gate(usize),
    Const(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateOp {
    And,
    Or,
    Xor,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub op: GateOp,
    pub inputs: Vec<Signal>,
}

/// Boolean circuit over `x_1..x_n`; every gate input refers to a variable or
/// an earlier gate, so the gate list is acyclic by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    pub gates: Vec<Gate>,
    pub output: Signal,
}

impl Matrix {
    pub fn eval(&self, bits: &[bool]) -> bool {
        let mut values = Vec::with_capacity(self.gates.len());
        let read = |s: Signal, values: &[bool]| match s {
            Signal::Var(k) => bits[k - 1],
            Signal::NegVar(k) => !bits[k - 1],
            Signal::Gate(g) => values[g],
            Signal::Const(b) => b,
        };
        for gate in &self.gates {
            let v = match gate.op {
                GateOp::And => gate.inputs.iter().all(|&s| read(s, &values)),
                GateOp::Or => gate.inputs.iter().any(|&s| read(s, &values)),
                GateOp::Xor => gate.inputs.iter().fold(false, |acc, &s| acc ^ read(s, &values)),
                GateOp::Not => !read(gate.inputs[0], &values),
            };
            values.push(v);
        }
        read(self.output, &values)
    }

    fn max_var(&self) -> usize {
        self.gates
            .iter()
            .flat_map(|g| g.inputs.iter())
            .chain(std::iter::once(&self.output))
            .filter_map(|s| match *s {
                Signal::Var(k) | Signal::NegVar(k) => Some(k),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}

/// `Q_n x_n ... Q_1 x_1 . phi`; `quantifiers[i]` binds `x_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QbfInstance {
    n: usize,
    quantifiers: Vec<Quantifier>,
    matrix: Matrix,
}

impl QbfInstance {
    pub fn new(quantifiers: Vec<Quantifier>, matrix: Matrix) -> Result<Self, QbfError> {
        let n = quantifiers.len();
        if n == 0 {
            return Err(QbfError::Invalid("n must be positive".into()));
        }
        if matrix.max_var() > n {
            return Err(QbfError::Invalid(format!(
                "matrix references x{} but n={n}",
                matrix.max_var()
            )));
        }
        for (idx, gate) in matrix.gates.iter().enumerate() {
            if gate.op == GateOp::Not && gate.inputs.len() != 1 {
                return Err(QbfError::Invalid(format!("not-gate {idx} needs one input")));
            }
            if gate.inputs.is_empty() {
                return Err(QbfError::Invalid(format!("gate {idx} has no inputs")));
            }
            for s in &gate.inputs {
                if let Signal::Gate(g) = s {
                    if *g >= idx {
                        return Err(QbfError::Invalid(format!("gate {idx} reads later gate {g}")));
                    }
                }
            }
        }
        if let Signal::Gate(g) = matrix.output {
            if g >= matrix.gates.len() {
                return Err(QbfError::Invalid(format!("output gate {g} does not exist")));
            }
        }
        Ok(Self { n, quantifiers, matrix })
    }

    /// Builds an instance whose matrix is given by a truth table indexed by
    /// assignment rank (bit `i-1` of the rank is `A_i`).
    pub fn from_truth_table(quantifiers: Vec<Quantifier>, table: &[bool]) -> Result<Self, QbfError> {
        let n = quantifiers.len();
        if table.len() != 1 << n {
            return Err(QbfError::Invalid("truth table length must be 2^n".into()));
        }
        let mut gates = Vec::new();
        let mut minterms = Vec::new();
        for (rank, &row) in table.iter().enumerate() {
            if !row {
                continue;
            }
            let inputs = (1..=n)
                .map(|k| if rank >> (k - 1) & 1 == 1 { Signal::Var(k) } else { Signal::NegVar(k) })
                .collect();
            gates.push(Gate { op: GateOp::And, inputs });
            minterms.push(Signal::Gate(gates.len() - 1));
        }
        let output = if minterms.is_empty() {
            Signal::Const(false)
        } else {
            gates.push(Gate { op: GateOp::Or, inputs: minterms });
            Signal::Gate(gates.len() - 1)
        };
        Self::new(quantifiers, Matrix { gates, output })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Quantifier binding `x_i` (1-based).
    pub fn quantifier(&self, i: usize) -> Quantifier {
        self.quantifiers[i - 1]
    }

    pub fn quantifiers(&self) -> &[Quantifier] {
        &self.quantifiers
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn eval_matrix(&self, a: &Assignment) -> bool {
        assert_eq!(a.len(), self.n, "assignment length must equal n");
        self.matrix.eval(&a.bits)
    }

    pub fn truth_table(&self) -> Vec<bool> {
        (0..1u64 << self.n)
            .map(|r| self.eval_matrix(&Assignment::from_rank(self.n, r)))
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for QbfInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p qbf {}", self.n)?;
        for i in (1..=self.n).rev() {
            writeln!(f, "{} {} 0", self.quantifier(i).letter(), i)?;
        }
        let sig = |s: Signal| match s {
            Signal::Var(k) => format!("x{k}"),
            Signal::NegVar(k) => format!("-x{k}"),
            Signal::Gate(g) => format!("{}", g + 1),
            Signal::Const(true) => "true".into(),
            Signal::Const(false) => "false".into(),
        };
        for (idx, gate) in self.matrix.gates.iter().enumerate() {
            let op = match gate.op {
                GateOp::And => "and",
                GateOp::Or => "or",
                GateOp::Xor => "xor",
                GateOp::Not => "not",
            };
            write!(f, "g {} {}", idx + 1, op)?;
            for &s in &gate.inputs {
                write!(f, " {}", sig(s))?;
            }
            writeln!(f)?;
        }
        writeln!(f, "out {}", sig(self.matrix.output))
    }
}

/// Bit vector `A = (A_1, ..., A_n)` with lexicographic rank `sum A_i 2^{i-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_rank(n: usize, rank: u64) -> Self {
        Self { bits: (0..n).map(|i| rank >> i & 1 == 1).collect() }
    }

    pub fn rank(&self) -> u64 {
        self.bits.iter().enumerate().map(|(i, &b)| (b as u64) << i).sum()
    }

    /// `A_i`, 1-based.
    pub fn bit(&self, i: usize) -> bool {
        self.bits[i - 1]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

pub fn eval_matrix(inst: &QbfInstance, a: &Assignment) -> bool {
    inst.eval_matrix(a)
}

/// Truth value by recursive quantifier expansion, capped at
/// [`BRUTE_FORCE_BOUND`] variables.
pub fn brute_force_decide(inst: &QbfInstance) -> Result<bool, QbfError> {
    brute_force_decide_bounded(inst, BRUTE_FORCE_BOUND)
}

pub fn brute_force_decide_bounded(inst: &QbfInstance, bound: usize) -> Result<bool, QbfError> {
    if inst.n > bound {
        return Err(QbfError::BoundExceeded { n: inst.n, bound });
    }
    fn go(inst: &QbfInstance, level: usize, bits: &mut Vec<bool>) -> bool {
        if level == 0 {
            return inst.matrix.eval(bits);
        }
        let branch = |v: bool, bits: &mut Vec<bool>| {
            bits[level - 1] = v;
            go(inst, level - 1, bits)
        };
        match inst.quantifier(level) {
            Quantifier::Exists => branch(false, bits) || branch(true, bits),
            Quantifier::Forall => branch(false, bits) && branch(true, bits),
        }
    }
    let mut bits = vec![false; inst.n];
    Ok(go(inst, inst.n, &mut bits))
}

pub fn parse_qdimacs(text: &str) -> Result<QbfInstance, QbfError> {
    let mut n: Option<usize> = None;
    // Variables in the order of the quantifier lines (outermost first).
    let mut prefix: Vec<(usize, Quantifier)> = Vec::new();
    let mut gates: Vec<Gate> = Vec::new();
    let mut gate_ids: HashMap<String, usize> = HashMap::new();
    let mut clauses: Vec<Vec<Signal>> = Vec::new();
    let mut output: Option<Signal> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let syntax = |msg: String| QbfError::Syntax { line, msg };
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let Some(&head) = toks.first() else { continue };
        if head == "c" || head.starts_with('#') {
            continue;
        }
        if head != "p" && n.is_none() {
            return Err(QbfError::MissingHeader);
        }
        let check_var = |k: usize| -> Result<usize, QbfError> {
            let nn = n.unwrap_or(0);
            if k == 0 || k > nn {
                Err(QbfError::VariableOutOfRange { line, index: k, n: nn })
            } else {
                Ok(k)
            }
        };
        let parse_arg = |tok: &str, gate_ids: &HashMap<String, usize>| -> Result<Signal, QbfError> {
            let (neg, body) = match tok.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, tok),
            };
            if let Some(num) = body.strip_prefix('x') {
                let k: usize = num.parse().map_err(|_| syntax(format!("bad variable `{tok}`")))?;
                let k = check_var(k)?;
                Ok(if neg { Signal::NegVar(k) } else { Signal::Var(k) })
            } else if body == "true" || body == "false" {
                Ok(Signal::Const((body == "true") != neg))
            } else if neg {
                Err(syntax(format!("gate reference `{tok}` cannot be negated")))
            } else {
                gate_ids
                    .get(body)
                    .map(|&g| Signal::Gate(g))
                    .ok_or_else(|| syntax(format!("reference to undefined gate `{tok}`")))
            }
        };
        match head {
            "p" => {
                if toks.len() != 3 || toks[1] != "qbf" {
                    return Err(syntax("expected `p qbf <n>`".into()));
                }
                let v: usize = toks[2].parse().map_err(|_| syntax("bad variable count".into()))?;
                if v == 0 {
                    return Err(syntax("variable count must be positive".into()));
                }
                n = Some(v);
            }
            "a" | "e" => {
                let q = if head == "a" { Quantifier::Forall } else { Quantifier::Exists };
                for tok in &toks[1..] {
                    let k: usize = tok.parse().map_err(|_| syntax(format!("bad variable `{tok}`")))?;
                    if k == 0 {
                        break;
                    }
                    let k = check_var(k)?;
                    if prefix.iter().any(|&(v, _)| v == k) {
                        return Err(syntax(format!("variable {k} quantified twice")));
                    }
                    prefix.push((k, q));
                }
            }
            "g" => {
                if toks.len() < 4 {
                    return Err(syntax("expected `g <id> <op> <args>`".into()));
                }
                let op = match toks[2] {
                    "and" => GateOp::And,
                    "or" => GateOp::Or,
                    "xor" => GateOp::Xor,
                    "not" => GateOp::Not,
                    other => return Err(syntax(format!("unknown gate op `{other}`"))),
                };
                let inputs = toks[3..]
                    .iter()
                    .map(|t| parse_arg(t, &gate_ids))
                    .collect::<Result<Vec<_>, _>>()?;
                if op == GateOp::Not && inputs.len() != 1 {
                    return Err(syntax("`not` takes exactly one argument".into()));
                }
                if gate_ids.insert(toks[1].to_string(), gates.len()).is_some() {
                    return Err(syntax(format!("gate id `{}` redefined", toks[1])));
                }
                gates.push(Gate { op, inputs });
            }
            "out" => {
                if toks.len() != 2 {
                    return Err(syntax("expected `out <arg>`".into()));
                }
                output = Some(parse_arg(toks[1], &gate_ids)?);
            }
            _ => {
                let mut clause = Vec::new();
                let mut terminated = false;
                for tok in &toks {
                    let lit: i64 = tok.parse().map_err(|_| syntax(format!("unexpected token `{tok}`")))?;
                    if lit == 0 {
                        terminated = true;
                        break;
                    }
                    let k = check_var(lit.unsigned_abs() as usize)?;
                    clause.push(if lit > 0 { Signal::Var(k) } else { Signal::NegVar(k) });
                }
                if !terminated {
                    return Err(syntax("clause must end with 0".into()));
                }
                clauses.push(clause);
            }
        }
    }

    let n = n.ok_or(QbfError::MissingHeader)?;
    for k in 1..=n {
        if !prefix.iter().any(|&(v, _)| v == k) {
            return Err(QbfError::MissingQuantifier(k));
        }
    }

    let output = match output {
        Some(o) => {
            if !clauses.is_empty() {
                return Err(QbfError::Invalid("mixing clauses with an `out` line".into()));
            }
            o
        }
        None if clauses.is_empty() => return Err(QbfError::Invalid("empty matrix".into())),
        None => {
            let mut conj = Vec::new();
            for clause in clauses {
                if clause.is_empty() {
                    conj.push(Signal::Const(false));
                    continue;
                }
                gates.push(Gate { op: GateOp::Or, inputs: clause });
                conj.push(Signal::Gate(gates.len() - 1));
            }
            gates.push(Gate { op: GateOp::And, inputs: conj });
            Signal::Gate(gates.len() - 1)
        }
    };

    // Outermost-listed variable becomes x_n.
    let mut rename = vec![0usize; n + 1];
    for (pos, &(v, _)) in prefix.iter().enumerate() {
        rename[v] = n - pos;
    }
    let mut quantifiers = vec![Quantifier::Exists; n];
    for &(v, q) in &prefix {
        quantifiers[rename[v] - 1] = q;
    }
    let map = |s: Signal| match s {
        Signal::Var(k) => Signal::Var(rename[k]),
        Signal::NegVar(k) => Signal::NegVar(rename[k]),
        other => other,
    };
    for gate in &mut gates {
        for s in &mut gate.inputs {
            *s = map(*s);
        }
    }
    QbfInstance::new(quantifiers, Matrix { gates, output: map(output) })
}
