use std::fmt::Write as _;
use std::io::{BufRead, Write as _};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::anyhow;
use limit_cycles::epscycle::{
    certificate_kind, find_eps_cycle, integrate, verify_certificate_detailed, verify_fixpoint, EpsCycleCertificate,
    EpsError, FinderConfig, FixpointCertificate, Outcome, Trajectory,
};
use limit_cycles::field::{norm, VectorField};
use limit_cycles::gridflow::{format_trace, parse_trace, trace as grid_trace, DisplacementOracle, GridPoint, TraceStep};
use limit_cycles::qbf::{brute_force_decide, parse_qdimacs, QbfInstance};
use limit_cycles::reduce_continuous::{compile_continuous, ContinuousReduction};
use limit_cycles::reduce_discrete::{compile as compile_reduction, ReduceError, ReductionOutput, Variant as Flavor, LAYOUT_BOUND};
use limit_cycles::systems::{lookup, NamedSystem, SystemError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::render::{fit, to_svg, Scene, Shape};
use crate::{header, internal, usage, CompileArgs, DecideArgs, Fail, FindArgs, RenderArgs, TraceArgs, Variant, VerifyArgs};

fn read_file(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| usage(anyhow!("cannot read {}: {e}", path.display())))
}

fn read_instance(path: &Path) -> Result<QbfInstance, Fail> {
    parse_qdimacs(&read_file(path)?).map_err(|e| usage(anyhow!("{}: {e}", path.display())))
}

fn reduce_err(e: ReduceError) -> Fail {
    match e {
        ReduceError::BoundExceeded { .. } => usage(e),
        e => internal(e),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Fail> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| internal(anyhow!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(internal),
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>, Fail> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(anyhow!("bad coordinate `{t}` in `{s}`"))))
        .collect()
}

fn parse_grid_point(out: &ReductionOutput, s: &str) -> Result<GridPoint, Fail> {
    let t: Vec<&str> = s.split(',').map(str::trim).collect();
    let [sq, i, j] = t[..] else { return Err(usage(anyhow!("grid point must be `square,i,j`, got `{s}`"))) };
    let square = match out.domain.square_index(sq) {
        Some(k) => k,
        None => sq.parse().map_err(|_| usage(anyhow!("unknown square `{sq}`")))?,
    };
    let num = |v: &str| v.parse::<u32>().map_err(|_| usage(anyhow!("bad index `{v}`")));
    let p = GridPoint::new(square, num(i)?, num(j)?);
    if square >= out.domain.squares().len() || !out.domain.contains(p) {
        return Err(usage(anyhow!("{s} is not in the domain")));
    }
    Ok(p)
}

/// A field to run the finder or the integrator on.
enum Target {
    System(NamedSystem),
    Reduction(Box<ContinuousReduction>),
}

impl Target {
    fn resolve(spec: &str) -> Result<Self, Fail> {
        if Path::new(spec).is_file() {
            let inst = read_instance(Path::new(spec))?;
            return Ok(Target::Reduction(Box::new(compile_continuous(&inst).map_err(reduce_err)?)));
        }
        match lookup(spec) {
            Ok(s) => Ok(Target::System(s)),
            Err(SystemError::Unknown(_)) => Err(usage(anyhow!("`{spec}` is neither a file nor a known system"))),
            Err(e) => Err(usage(e)),
        }
    }

    fn field(&self) -> &dyn VectorField {
        match self {
            Target::System(s) => &*s.field,
            Target::Reduction(r) => &**r,
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            Target::System(s) => s.lipschitz,
            Target::Reduction(r) => r.lipschitz().unwrap_or(f64::NAN),
        }
    }

    fn default_start(&self) -> Vec<f64> {
        match self {
            Target::System(s) => s.default_start.clone(),
            Target::Reduction(r) => r.start_point().to_vec(),
        }
    }

    fn random_start(&self, seed: u64) -> Option<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            Target::System(s) => s.sample_start(&mut rng),
            Target::Reduction(r) => r.sample_point(&mut rng),
        }
    }
}

fn start_point(target: &Target, start: Option<&str>, seed: Option<u64>) -> Result<Vec<f64>, Fail> {
    let x = match (start, seed) {
        (Some(s), _) => parse_point(s)?,
        (None, Some(seed)) => target.random_start(seed).ok_or_else(|| internal(anyhow!("no start point found")))?,
        (None, None) => target.default_start(),
    };
    let f = target.field();
    if x.len() != f.dim() {
        return Err(usage(anyhow!("start point has {} coordinates, the field needs {}", x.len(), f.dim())));
    }
    if !f.contains(&x) {
        return Err(usage(anyhow!("start point {x:?} is outside the domain")));
    }
    Ok(x)
}

fn positive(name: &str, v: f64) -> Result<f64, Fail> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(anyhow!("{name} must be positive, got {v}")))
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "TRUE"
    } else {
        "FALSE"
    }
}

pub fn compile(a: &CompileArgs) -> Result<u8, Fail> {
    let inst = read_instance(&a.instance)?;
    match a.variant {
        Variant::Continuous => {
            if a.search || !a.queries.is_empty() {
                return Err(usage(anyhow!("--search and --query need the discrete variant")));
            }
            let red = compile_continuous(&inst).map_err(reduce_err)?;
            let circ = red.circuit().map_err(internal)?;
            write_out(a.out.as_deref(), &circ.to_text())?;
            eprintln!("{}", header());
            eprintln!(
                "circuit inputs {} outputs {} nodes {} gates {} sgn {}",
                circ.d_in(),
                circ.d_out(),
                circ.nodes().len(),
                circ.gate_count(),
                circ.sgn_count()
            );
            Ok(0)
        }
        Variant::Discrete => {
            let flavor = if a.search { Flavor::Search } else { Flavor::Decision };
            let out = compile_reduction(&inst, flavor, LAYOUT_BOUND).map_err(reduce_err)?;
            let dom = &out.domain;
            let mut s = String::new();
            let _ = writeln!(s, "{}", header());
            let _ = writeln!(s, "variant {}", if a.search { "search" } else { "decision" });
            let _ = writeln!(s, "n {}", inst.n());
            let _ = writeln!(s, "points {}", dom.total_points());
            let _ = writeln!(s, "squares {}", dom.squares().len());
            for sq in dom.squares() {
                let r = sq.rect;
                let _ = writeln!(s, "square {} {} {} {} {} {} {}", sq.name, sq.width, sq.height, r.x0, r.y0, r.x1, r.y1);
            }
            let start = out.start;
            let _ = writeln!(s, "start {} {} {}", dom.square(start.square as usize).name, start.i, start.j);
            let points = a.queries.iter().map(|q| parse_grid_point(&out, q)).collect::<Result<Vec<_>, _>>()?;
            s.push_str(&out.format_queries(&points));
            write_out(a.out.as_deref(), &s)?;
            Ok(0)
        }
    }
}

/// Steps from the start through the core, including the exit step.
fn core_trace(out: &ReductionOutput) -> Result<Vec<TraceStep>, Fail> {
    let core = out.core_square() as u32;
    let budget = 4 * out.domain.total_points();
    let mut p = out.start;
    let mut steps = Vec::new();
    for step in 0..budget {
        let displacement = out.oracle.displacement(p);
        steps.push(TraceStep { step, point: p, displacement });
        if p.square != core {
            return Ok(steps);
        }
        p = out.domain.step(p, displacement).map_err(internal)?;
    }
    Err(internal(anyhow!("step budget of {budget} exceeded")))
}

struct Decision {
    answer: bool,
    report: String,
}

fn decide_one(path: &Path, variant: Variant, check: bool, trace_out: Option<&Path>) -> Result<Decision, Fail> {
    let inst = read_instance(path)?;
    let (answer, length) = match variant {
        Variant::Discrete => {
            let out = compile_reduction(&inst, Flavor::Decision, LAYOUT_BOUND).map_err(reduce_err)?;
            let answer = out.decide().map_err(reduce_err)?;
            let steps = core_trace(&out)?;
            if let Some(p) = trace_out {
                write_out(Some(p), &format_trace(&out.domain, &steps))?;
            }
            (answer, steps.len() as u64 - 1)
        }
        Variant::Continuous => {
            if trace_out.is_some() {
                return Err(usage(anyhow!("--trace-out needs the discrete variant")));
            }
            compile_continuous(&inst).and_then(|r| r.decide_counted()).map_err(reduce_err)?
        }
    };
    let mut report = String::new();
    let _ = writeln!(report, "instance {}", path.display());
    let _ = writeln!(report, "variant {}", if variant == Variant::Discrete { "discrete" } else { "continuous" });
    let _ = writeln!(report, "result {}", yes_no(answer));
    let _ = writeln!(report, "trace_length {length}");
    if check {
        let oracle = brute_force_decide(&inst).map_err(usage)?;
        let agree = oracle == answer;
        let _ = writeln!(report, "oracle {} {}", yes_no(oracle), if agree { "agree" } else { "DISAGREE" });
        if !agree {
            return Err(internal(anyhow!("{report}flow and brute force disagree")));
        }
    }
    Ok(Decision { answer, report })
}

pub fn decide(a: &DecideArgs) -> Result<u8, Fail> {
    if a.batch {
        if a.instance.is_some() || a.trace_out.is_some() {
            return Err(usage(anyhow!("--batch reads paths from standard input and takes no instance or trace")));
        }
        return decide_batch(a);
    }
    let path = a.instance.as_deref().ok_or_else(|| usage(anyhow!("missing instance file")))?;
    let d = decide_one(path, a.variant, a.check, a.trace_out.as_deref())?;
    println!("{}", header());
    print!("{}", d.report);
    Ok(if d.answer { 0 } else { 1 })
}

/// One output line per input path, in input order. Exit code is the worst
/// failure code, 0 if every instance was decided.
fn decide_batch(a: &DecideArgs) -> Result<u8, Fail> {
    let paths: Vec<String> = std::io::stdin()
        .lock()
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(internal)?
        .into_iter()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    let jobs = a.jobs.max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<bool, Fail>>>> = Mutex::new((0..paths.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = paths.get(k) else { break };
                let r = decide_one(Path::new(path), a.variant, a.check, None).map(|d| d.answer);
                results.lock().unwrap()[k] = Some(r);
            });
        }
    });
    println!("{}", header());
    let mut code = 0;
    for (path, r) in paths.iter().zip(results.into_inner().unwrap()) {
        match r.expect("every path is processed") {
            Ok(answer) => println!("{path} {}", yes_no(answer)),
            Err(f) => {
                println!("{path} error {}: {:#}", f.code, f.error);
                code = code.max(f.code);
            }
        }
    }
    Ok(code)
}

fn eps_err(e: EpsError) -> Fail {
    match e {
        EpsError::InvalidParameter(_) => usage(e),
        e => internal(e),
    }
}

pub fn find_cycle(a: &FindArgs) -> Result<u8, Fail> {
    if !(a.eps > 0.0 && a.eps < 1.0) {
        return Err(usage(anyhow!("--eps must lie in (0, 1), got {}", a.eps)));
    }
    let target = Target::resolve(&a.target)?;
    let l = positive("--L", a.lipschitz.unwrap_or_else(|| target.lipschitz()))?;
    let x0 = start_point(&target, a.start.as_deref(), a.seed)?;
    let mut cfg = FinderConfig::new(a.eps, l);
    cfg.budget = a.budget.map(|b| positive("--budget", b)).transpose()?;
    cfg.record = true;
    let f = target.field();
    let run = find_eps_cycle(f, &x0, &cfg).map_err(eps_err)?;

    let mut report = String::new();
    let _ = writeln!(report, "{}", header());
    let _ = writeln!(report, "# target {}", a.target);
    let _ = writeln!(report, "# eps {} L {} radius {:e}", a.eps, l, cfg.radius());
    let _ = writeln!(report, "# start {}", x0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","));
    let _ = writeln!(report, "# budget {:e} elapsed {:e} steps {}", run.budget, run.elapsed, run.steps);
    let (text, verified) = match &run.outcome {
        Outcome::Cycle(c) => {
            let v = verify_certificate_detailed(f, c, l);
            let _ = writeln!(report, "# outcome eps-cycle period {}", c.period());
            for m in &v.failures {
                let _ = writeln!(report, "# failure {m}");
            }
            (c.to_text(), v.ok())
        }
        Outcome::Fixpoint(c) => {
            let _ = writeln!(report, "# outcome fixpoint speed {:e}", c.speed);
            (c.to_text(), verify_fixpoint(f, c))
        }
        Outcome::BudgetExceeded { .. } => {
            write_out(Some(&a.dump), &run.trajectory.to_csv())?;
            let _ = writeln!(report, "# outcome budget-exceeded, trajectory in {}", a.dump.display());
            print!("{report}");
            return Ok(3);
        }
    };
    let _ = writeln!(report, "# verified {}", if verified { "yes" } else { "no" });
    write_out(a.out.as_deref(), &format!("{report}{text}"))?;
    if a.out.is_some() {
        print!("{report}");
    }
    Ok(if verified { 0 } else { 3 })
}

pub fn trace(a: &TraceArgs) -> Result<u8, Fail> {
    let is_file = Path::new(&a.target).is_file();
    if is_file && a.variant == Variant::Discrete {
        if a.t_end.is_some() || a.h.is_some() {
            return Err(usage(anyhow!("--t-end and --h need the continuous variant")));
        }
        let inst = read_instance(Path::new(&a.target))?;
        let out = compile_reduction(&inst, Flavor::Decision, LAYOUT_BOUND).map_err(reduce_err)?;
        let start = match &a.start {
            Some(s) => parse_grid_point(&out, s)?,
            None => out.start,
        };
        let steps = grid_trace(&out.domain, &out.oracle, start, a.steps).map_err(internal)?;
        let text = format!("{}\n{}", header(), format_trace(&out.domain, &steps));
        write_out(a.out.as_deref(), &text)?;
        return Ok(0);
    }
    let target = Target::resolve(&a.target)?;
    let x0 = start_point(&target, a.start.as_deref(), None)?;
    let (h, t_end) = match &target {
        Target::Reduction(r) => (a.h.unwrap_or(r.default_step()), a.t_end.unwrap_or(r.lap_time_bound())),
        Target::System(_) => (a.h.unwrap_or(1e-3), a.t_end.unwrap_or(10.0)),
    };
    let (h, t_end) = (positive("--h", h)?, positive("--t-end", t_end)?);
    let traj = integrate(target.field(), &x0, h, t_end).map_err(eps_err)?;
    write_out(a.out.as_deref(), &traj.to_csv())?;
    Ok(0)
}

pub fn verify(a: &VerifyArgs) -> Result<u8, Fail> {
    let text = read_file(&a.certificate)?;
    let target = Target::resolve(&a.system)?;
    let l = positive("--L", a.lipschitz.unwrap_or_else(|| target.lipschitz()))?;
    let f = target.field();
    println!("{}", header());
    let ok = match certificate_kind(&text) {
        Some("eps-cycle") => {
            let c = EpsCycleCertificate::from_text(&text).map_err(usage)?;
            if c.x1.len() != f.dim() || c.x2.len() != f.dim() {
                return Err(usage(anyhow!("certificate dimension does not match the field")));
            }
            let v = verify_certificate_detailed(f, &c, l);
            let ch = c.checks;
            println!("kind eps-cycle");
            println!("distance {:e} eps {:e}", ch.distance, c.eps);
            println!("hyperplane_distance {:e}", ch.hyperplane_distance);
            println!("inner {:e}", ch.inner);
            for m in &v.failures {
                println!("failure {m}");
            }
            if v.suspicious {
                println!("warning field violates the stated Lipschitz bound");
            }
            v.ok()
        }
        Some("fixpoint") => {
            let c = FixpointCertificate::from_text(&text).map_err(usage)?;
            println!("kind fixpoint");
            if c.x.len() == f.dim() {
                println!("speed {:e} eps {:e}", norm(&f.eval(&c.x)), c.eps);
            }
            verify_fixpoint(f, &c)
        }
        Some(k) => return Err(usage(anyhow!("unknown certificate kind `{k}`"))),
        None => return Err(usage(anyhow!("{} has no kind line", a.certificate.display()))),
    };
    println!("verdict {}", if ok { "accepted" } else { "rejected" });
    Ok(if ok { 0 } else { 1 })
}

enum Input {
    Grid(String),
    Csv(Trajectory),
}

fn read_input(path: &Path) -> Result<Input, Fail> {
    let text = read_file(path)?;
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).unwrap_or("");
    if first.contains(',') {
        let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
        Ok(Input::Csv(Trajectory::from_csv(&body).map_err(usage)?))
    } else {
        Ok(Input::Grid(text))
    }
}

fn discrete_scene(out: &ReductionOutput, scene: &mut Scene) {
    let dom = &out.domain;
    let mut cell = f64::INFINITY;
    for (k, sq) in dom.squares().iter().enumerate() {
        let r = sq.rect;
        cell = cell.min(r.x1 - r.x0);
        scene.outlines.push(Shape::Rect { class: "square", label: sq.name.clone(), x0: r.x0, y0: r.y0, x1: r.x1, y1: r.y1 });
        let mid = GridPoint::new(k, sq.width / 2, sq.height / 2);
        let (di, dj) = out.oracle.displacement(mid).delta();
        let len = 0.3 * (r.x1 - r.x0).min(r.y1 - r.y0) / ((di * di + dj * dj) as f64).sqrt();
        let c = ((r.x0 + r.x1) / 2.0, (r.y0 + r.y1) / 2.0);
        scene.glyphs.push((c, (c.0 + len * di as f64, c.1 + len * dj as f64)));
    }
    scene.outlines.push(Shape::Rect {
        class: "hole",
        label: "hole".into(),
        x0: cell,
        y0: cell,
        x1: 1.0 - cell,
        y1: 1.0 - cell,
    });
}

fn continuous_scene(red: &ContinuousReduction, glyphs: usize, scene: &mut Scene) {
    for line in red.geometry_text().lines() {
        let t: Vec<&str> = line.split_whitespace().collect();
        let num = |k: usize| t[k].parse::<f64>().unwrap_or(f64::NAN);
        match t.first() {
            Some(&"rect") => scene.outlines.push(Shape::Rect {
                class: "track",
                label: t[1].to_string(),
                x0: num(2),
                y0: num(3),
                x1: num(4),
                y1: num(5),
            }),
            Some(&"arc") => scene.outlines.push(Shape::Sector {
                label: t[1].to_string(),
                cx: num(2),
                cy: num(3),
                r_in: num(4),
                r_out: num(5),
            }),
            _ => {}
        }
    }
    let step = 1.0 / glyphs as f64;
    for gx in 0..glyphs {
        for gy in 0..glyphs {
            let p = [(gx as f64 + 0.5) * step, (gy as f64 + 0.5) * step];
            if !red.contains(&p) {
                continue;
            }
            let v = red.eval(&p);
            let s = 0.4 * step / norm(&v);
            scene.glyphs.push(((p[0], p[1]), (p[0] + s * v[0], p[1] + s * v[1])));
        }
    }
}

pub fn render(a: &RenderArgs) -> Result<u8, Fail> {
    let input = a.input.as_deref().map(read_input).transpose()?;
    let variant = match (a.variant, &input) {
        (Some(v), _) => v,
        (None, Some(Input::Csv(_))) => Variant::Continuous,
        _ => Variant::Discrete,
    };
    let inst = a.instance.as_deref().map(read_instance).transpose()?;
    let mut scene = Scene { comment: header().trim_start_matches("# ").to_string(), ..Default::default() };
    let mut discrete = None;
    match (&inst, variant) {
        (Some(inst), Variant::Discrete) => {
            let out = compile_reduction(inst, Flavor::Decision, LAYOUT_BOUND).map_err(reduce_err)?;
            discrete_scene(&out, &mut scene);
            discrete = Some(out);
        }
        (Some(inst), Variant::Continuous) => {
            let red = compile_continuous(inst).map_err(reduce_err)?;
            continuous_scene(&red, a.glyphs.max(1), &mut scene);
        }
        (None, _) => {}
    }
    match input {
        Some(Input::Grid(text)) => {
            let out = discrete
                .as_ref()
                .ok_or_else(|| usage(anyhow!("a discrete trace needs --instance and the discrete variant")))?;
            let steps = parse_trace(&out.domain, &text).map_err(usage)?;
            scene.path = steps.iter().map(|s| out.domain.position(s.point)).collect();
        }
        Some(Input::Csv(traj)) => {
            if traj.dim() < 2 {
                return Err(usage(anyhow!("trajectory needs at least two coordinates")));
            }
            let pts: Vec<(f64, f64)> = (0..traj.len()).map(|k| (traj.point(k)[0], traj.point(k)[1])).collect();
            scene.path = if inst.is_some() {
                pts
            } else {
                let map = fit(&pts);
                pts.into_iter().map(map).collect()
            };
        }
        None => {}
    }
    std::fs::write(&a.out, to_svg(&scene)).map_err(|e| internal(anyhow!("cannot write {}: {e}", a.out.display())))?;
    Ok(0)
}
