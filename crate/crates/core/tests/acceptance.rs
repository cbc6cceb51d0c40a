//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use limit_cycles::epscycle::{
    find_eps_cycle, rk4, sweep_time_bound, verify_certificate, EpsCycleCertificate, FinderConfig, Outcome,
};
use limit_cycles::field::{dist, estimate_lipschitz, norm, Domain, FnField, VectorField};
use limit_cycles::gridflow::{check_noncrossing, check_point, find_cycle, ExplicitGraph};
use limit_cycles::qbf::{brute_force_decide, QbfInstance, Quantifier};
use limit_cycles::reduce_continuous::{check_c1_boundary, compile_continuous, discrete_shadow};
use limit_cycles::reduce_discrete::{compile, compile_search, decide_via_flow, Variant, LAYOUT_BOUND};
use limit_cycles::systems::{lookup, GroundTruth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXHAUSTIVE_LIMIT: Duration = Duration::from_secs(10);
const SAMPLED_LIMIT: Duration = Duration::from_secs(300);
const SAMPLED_PER_N: usize = 200;
const SEARCH_STARTS: usize = 5;
const NONCROSSING_SAMPLES: usize = 1_000_000;
const CIRCLE_EPS: f64 = 1e-2;
const PERIOD_TOL: f64 = 1e-3;
const RETURN_TOL: f64 = 1e-3;
const ANNULUS_TOL: f64 = 2e-2;
const KNOWN_GEOMETRY_LIMIT: Duration = Duration::from_secs(10);
const BENCH_EPS: f64 = 1e-2;
/// Reductions have speed >= 1 everywhere, so any eps below 1 is fixpoint-free.
const REDUCTION_EPS: f64 = 0.9;
const D3_LIMIT: Duration = Duration::from_secs(60);
const FUZZ_FIELDS: usize = 1000;
const FUZZ_EPS: f64 = 0.2;
const C1_SAMPLES: usize = 10_000;
const VALUE_TOL: f64 = 1e-9;
const JACOBIAN_TOL: f64 = 1e-4;
const LIPSCHITZ_SAMPLES: usize = 20_000;
const LIPSCHITZ_FACTOR: f64 = 4.0;
const REST_TOL: f64 = 4.0 * f64::EPSILON;
const DRIFT_TOL: f64 = 1e-10;
const DRIFT_HORIZON: f64 = 1e3;
const DRIFT_STEP: f64 = 0.05;
const INTERIOR_MIN: f64 = 1e-3;

type Verdict = Result<String, String>;

fn all_instances(n: usize) -> Vec<QbfInstance> {
    let mut v = Vec::new();
    for qmask in 0..(1u32 << n) {
        let qs: Vec<Quantifier> =
            (0..n).map(|k| if qmask >> k & 1 == 1 { Quantifier::Forall } else { Quantifier::Exists }).collect();
        for table in 0..(1u64 << (1 << n)) {
            let tt: Vec<bool> = (0..1 << n).map(|r| table >> r & 1 == 1).collect();
            v.push(QbfInstance::from_truth_table(qs.clone(), &tt).unwrap());
        }
    }
    v
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> QbfInstance {
    let qs = (0..n).map(|_| if rng.gen() { Quantifier::Forall } else { Quantifier::Exists }).collect();
    let table: Vec<bool> = (0..1 << n).map(|_| rng.gen_bool(0.5)).collect();
    QbfInstance::from_truth_table(qs, &table).unwrap()
}

fn sampled_instances() -> Vec<QbfInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    [3, 4].iter().flat_map(|&n| (0..SAMPLED_PER_N).map(|_| random_instance(&mut rng, n)).collect::<Vec<_>>()).collect()
}

fn small_instances() -> Vec<QbfInstance> {
    all_instances(1).into_iter().chain(all_instances(2)).collect()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    let e = t.elapsed();
    if e <= limit {
        Ok(())
    } else {
        Err(format!("took {e:.1?}, limit {limit:?}"))
    }
}

fn c1_exhaustive() -> Verdict {
    let t = Instant::now();
    let insts = small_instances();
    for inst in &insts {
        let flow = decide_via_flow(inst).map_err(err)?;
        if flow != brute_force_decide(inst).map_err(err)? {
            return Err(format!("mismatch on\n{inst}"));
        }
    }
    within(t, EXHAUSTIVE_LIMIT)?;
    Ok(format!("{} instances, 0 mismatches", insts.len()))
}

fn c2_sampled() -> Verdict {
    let t = Instant::now();
    let insts = sampled_instances();
    for inst in &insts {
        if decide_via_flow(inst).map_err(err)? != brute_force_decide(inst).map_err(err)? {
            return Err(format!("mismatch on\n{inst}"));
        }
    }
    within(t, SAMPLED_LIMIT)?;
    Ok(format!("{} instances at n=3,4, 0 mismatches", insts.len()))
}

fn c3_search() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut unique = 0;
    let insts: Vec<QbfInstance> = small_instances().into_iter().chain(sampled_instances()).collect();
    for inst in &insts {
        let truth = brute_force_decide(inst).map_err(err)?;
        let out = compile_search(inst).map_err(err)?;
        for _ in 0..SEARCH_STARTS {
            let p = out.domain.point_at(rng.gen_range(0..out.domain.total_points()));
            let cert = find_cycle(&out.domain, &out.oracle, p).map_err(err)?;
            if out.classify_cycle_point(cert.entry).map_err(err)? != truth {
                return Err(format!("classification from {p} disagrees on\n{inst}"));
            }
        }
        if inst.n() <= 2 {
            let g = ExplicitGraph::build(&out.domain, &out.oracle).map_err(err)?;
            if g.cycles().len() != 1 {
                return Err(format!("{} cycles on\n{inst}", g.cycles().len()));
            }
            unique += 1;
        }
    }
    Ok(format!("{} instances x {SEARCH_STARTS} starts, {unique} unique-cycle checks", insts.len()))
}

fn c4_noncrossing() -> Verdict {
    let mut oracles = 0;
    for inst in small_instances() {
        for variant in [Variant::Decision, Variant::Search] {
            let out = compile(&inst, variant, LAYOUT_BOUND).map_err(err)?;
            let v = check_noncrossing(&out.domain, &out.oracle);
            if !v.is_empty() {
                return Err(format!("{} violations, first {:?}", v.len(), v[0]));
            }
            oracles += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [3, 4] {
        // spread the samples over a few instances and both variants
        for k in 0..4 {
            let inst = random_instance(&mut rng, n);
            let variant = if k % 2 == 0 { Variant::Decision } else { Variant::Search };
            let out = compile(&inst, variant, LAYOUT_BOUND).map_err(err)?;
            for _ in 0..NONCROSSING_SAMPLES / 4 {
                let p = out.domain.point_at(rng.gen_range(0..out.domain.total_points()));
                if let Some(v) = check_point(&out.domain, &out.oracle, p).first() {
                    return Err(format!("violation {v:?} at n={n}"));
                }
            }
        }
    }
    Ok(format!("{oracles} oracles exhaustive, {NONCROSSING_SAMPLES} sampled points at each of n=3,4"))
}

fn cycle(f: &dyn VectorField, x0: &[f64], eps: f64, l: f64) -> Result<(EpsCycleCertificate, f64, f64), String> {
    let run = find_eps_cycle(f, x0, &FinderConfig::new(eps, l)).map_err(err)?;
    match run.outcome {
        Outcome::Cycle(c) => Ok((c, run.elapsed, run.budget)),
        o => Err(format!("no cycle: {o:?}")),
    }
}

fn c5_known_geometry() -> Verdict {
    let t = Instant::now();
    let s = lookup("circle").map_err(err)?;
    let (c, _, _) = cycle(&*s.field, &[1.0, 0.0], CIRCLE_EPS, 1.0)?;
    let dp = (c.period() - std::f64::consts::TAU).abs();
    let dx = dist(&c.x1, &c.x2);
    if dp > PERIOD_TOL || dx > RETURN_TOL || !verify_certificate(&*s.field, &c, 1.0) {
        return Err(format!("circle: period error {dp:e}, return distance {dx:e}"));
    }
    within(t, KNOWN_GEOMETRY_LIMIT)?;
    let t = Instant::now();
    let s = lookup("annulus").map_err(err)?;
    let (c, _, _) = cycle(&*s.field, &s.default_start, CIRCLE_EPS, s.lipschitz)?;
    let dr = [&c.x1, &c.x2].iter().map(|x| s.truth.cycle_distance(x).unwrap()).fold(0.0, f64::max);
    if dr > ANNULUS_TOL || !verify_certificate(&*s.field, &c, s.lipschitz) {
        return Err(format!("annulus: distance to r=5/4 is {dr:e}"));
    }
    within(t, KNOWN_GEOMETRY_LIMIT)?;
    Ok(format!("circle period error {dp:.1e}, return {dx:.1e}; annulus offset {dr:.1e}"))
}

fn c6_budget() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for name in ["circle", "annulus", "vdp:0.5"] {
        let s = lookup(name).map_err(err)?;
        let (c, elapsed, budget) = cycle(&*s.field, &s.default_start, BENCH_EPS, s.lipschitz)?;
        if budget != sweep_time_bound(2, BENCH_EPS, s.lipschitz).map_err(err)? || elapsed > budget {
            return Err(format!("{name}: elapsed {elapsed} of budget {budget}"));
        }
        if !verify_certificate(&*s.field, &c, s.lipschitz) {
            return Err(format!("{name}: certificate rejected"));
        }
        worst = worst.max(elapsed / budget);
        runs += 1;
    }
    for inst in small_instances() {
        let red = compile_continuous(&inst).map_err(err)?;
        let l = red.lipschitz().ok_or("reduction has no Lipschitz constant")?;
        let (c, elapsed, budget) = cycle(&red, &red.start_point(), REDUCTION_EPS, l).map_err(|e| format!("{e} on\n{inst}"))?;
        if elapsed > budget || !verify_certificate(&red, &c, l) {
            return Err(format!("reduction: elapsed {elapsed} of budget {budget} on\n{inst}"));
        }
        worst = worst.max(elapsed / budget);
        runs += 1;
    }
    Ok(format!("{runs} runs, largest elapsed/budget {worst:.1e}"))
}

fn c7_three_dimensions() -> Verdict {
    let t = Instant::now();
    let s = lookup("drift3").map_err(err)?;
    let (c, _, _) = cycle(&*s.field, &s.default_start, BENCH_EPS, s.lipschitz)?;
    if c.x1.len() != 3 || !verify_certificate(&*s.field, &c, s.lipschitz) {
        return Err("certificate rejected".into());
    }
    within(t, D3_LIMIT)?;
    Ok(format!("period {:.3}, {:.1?}", c.period(), t.elapsed()))
}

/// Rotation with an attracting unit circle plus a random quadratic
/// perturbation on `[-2, 2]^2`, with an analytic Lipschitz bound.
fn random_field(rng: &mut ChaCha8Rng) -> (FnField, f64) {
    let pull = rng.gen_range(0.2..1.0);
    let c: [[f64; 6]; 2] = [0, 1].map(|_| [0; 6].map(|_| rng.gen_range(-0.02..0.02)));
    const DEG: [f64; 6] = [0.0, 1.0, 1.0, 2.0, 2.0, 2.0];
    let pert: f64 =
        c.iter().flatten().zip(DEG.iter().cycle()).map(|(a, &k)| 2.0 * a.abs() * k * 2f64.powf(k - 1.0)).sum();
    let l = 2.0 + 46.0 * pull + pert;
    let f = FnField::new("fuzz", 2, Domain::Box { lo: vec![-2.0; 2], hi: vec![2.0; 2] }, move |x, o| {
        let m = [1.0, x[0], x[1], x[0] * x[0], x[0] * x[1], x[1] * x[1]];
        let p = |k: usize| c[k].iter().zip(&m).map(|(a, b)| a * b).sum::<f64>();
        let g = pull * (1.0 - x[0] * x[0] - x[1] * x[1]);
        o[0] = x[1] + g * x[0] + p(0);
        o[1] = -x[0] + g * x[1] + p(1);
    })
    .with_lipschitz(l);
    (f, l)
}

fn c8_fuzz() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut certs, mut mutants) = (0, 0);
    for _ in 0..FUZZ_FIELDS {
        let (f, l) = random_field(&mut rng);
        let r = rng.gen_range(0.5..1.5);
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let run = find_eps_cycle(&f, &[r * a.cos(), r * a.sin()], &FinderConfig::new(FUZZ_EPS, l)).map_err(err)?;
        let Outcome::Cycle(c) = run.outcome else { continue };
        if !verify_certificate(&f, &c, l) {
            return Err(format!("returned certificate rejected: {c:?}"));
        }
        certs += 1;
        let u: Vec<f64> = c.v1.iter().map(|w| w / norm(&c.v1)).collect();
        let perp = [-u[1], u[0]];
        let moved = |d: &[f64]| -> EpsCycleCertificate {
            let x2: Vec<f64> = c.x2.iter().zip(d).map(|(p, d)| p + 2.0 * c.eps * d).collect();
            let v2 = f.eval(&x2);
            EpsCycleCertificate::new(c.t1, c.x1.clone(), c.v1.clone(), c.t2, x2, v2, c.eps)
        };
        let flipped = EpsCycleCertificate::new(
            c.t1,
            c.x1.clone(),
            c.v1.clone(),
            c.t2,
            c.x2.clone(),
            c.v2.iter().map(|w| -w).collect(),
            c.eps,
        );
        for (name, m) in [("distance", moved(&perp)), ("orthogonality", moved(&u)), ("sign", flipped)] {
            if verify_certificate(&f, &m, l) {
                return Err(format!("{name} mutation accepted"));
            }
            mutants += 1;
        }
    }
    if certs == 0 {
        return Err("no certificates returned".into());
    }
    Ok(format!("{FUZZ_FIELDS} fields, {certs} certificates accepted, {mutants} mutants rejected"))
}

fn c9_smoothness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = (0.0f64, 0.0f64);
    let mut ratios = Vec::new();
    for n in 1..=4 {
        let red = compile_continuous(&random_instance(&mut rng, n)).map_err(err)?;
        let rep = check_c1_boundary(&red, C1_SAMPLES, n as u64);
        if rep.max_value_jump > VALUE_TOL || rep.max_jacobian_jump > JACOBIAN_TOL {
            return Err(format!("n={n}: {rep:?}"));
        }
        worst = (worst.0.max(rep.max_value_jump), worst.1.max(rep.max_jacobian_jump));
        let l = estimate_lipschitz(&red, LIPSCHITZ_SAMPLES, n as u64).map_err(err)?;
        ratios.push(l / 2f64.powi(n as i32));
    }
    let c = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    let spread = ratios.iter().map(|r| (r / c).max(c / r)).fold(0.0, f64::max);
    if spread > LIPSCHITZ_FACTOR {
        return Err(format!("L/2^n = {ratios:?} deviates from c = {c:.0} by {spread:.2}"));
    }
    Ok(format!(
        "value jump {:.1e}, Jacobian jump {:.1e}; L/2^n within {spread:.2}x of c = {c:.0}",
        worst.0, worst.1
    ))
}

fn c10_shadow() -> Verdict {
    let insts = small_instances();
    for inst in &insts {
        let red = compile_continuous(inst).map_err(err)?;
        let traj = red.trace(red.start_point(), 2.0 * red.lap_time_bound()).map_err(err)?;
        let rep = discrete_shadow(&red, &traj).map_err(err)?;
        if !rep.ok() || rep.continuous_cells != rep.discrete_cells {
            return Err(format!("{:?} on\n{inst}", rep.first_mismatch));
        }
    }
    Ok(format!("{} instances, two laps each", insts.len()))
}

fn c11_hypercycle() -> Verdict {
    let s = lookup("hypercycle:5:1,1,1,1,1").map_err(err)?;
    let f = &*s.field;
    let rest = norm(&f.eval(&[0.2; 5]));
    if rest > REST_TOL {
        return Err(format!("|f(uniform)| = {rest:e}"));
    }
    let steps = (DRIFT_HORIZON / DRIFT_STEP) as usize;
    let (mut x, mut raw) = (s.default_start.clone(), s.default_start.clone());
    let (mut drift, mut raw_drift): (f64, f64) = (0.0, 0.0);
    for _ in 0..steps {
        x = rk4(f, &x, DRIFT_STEP);
        f.project(&mut x);
        raw = rk4(f, &raw, DRIFT_STEP);
        drift = drift.max((x.iter().sum::<f64>() - 1.0).abs());
        raw_drift = raw_drift.max((raw.iter().sum::<f64>() - 1.0).abs());
    }
    if drift > DRIFT_TOL {
        return Err(format!("simplex drift {drift:e}"));
    }
    let GroundTruth::Fixpoint { x: fix } = &s.truth else { return Err("no fixpoint recorded".into()) };
    let d0 = dist(&s.default_start, fix);
    if (d0 - 0.1).abs() > 1e-12 {
        return Err(format!("start is {d0} from the fixpoint"));
    }
    let (c, _, _) = cycle(f, &s.default_start, BENCH_EPS, s.lipschitz)?;
    let min = c.x1.iter().chain(&c.x2).cloned().fold(f64::INFINITY, f64::min);
    if !verify_certificate(f, &c, s.lipschitz) || min < INTERIOR_MIN {
        return Err(format!("certificate min coordinate {min:e}"));
    }
    Ok(format!(
        "|f(uniform)| = {rest:.0e}, drift {drift:.1e} (unprojected {raw_drift:.1e}), certificate min coordinate {min:.1e}"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("reduction correctness, exhaustive n<=2", c1_exhaustive),
        ("reduction correctness, sampled n=3,4", c2_sampled),
        ("search variant classification and uniqueness", c3_search),
        ("non-crossing", c4_noncrossing),
        ("eps-cycle on known geometry", c5_known_geometry),
        ("finder within the sweep budget", c6_budget),
        ("three-dimensional certificate", c7_three_dimensions),
        ("certificate soundness fuzz", c8_fuzz),
        ("continuous reduction smoothness and Lipschitz growth", c9_smoothness),
        ("shadow equivalence", c10_shadow),
        ("hypercycle", c11_hypercycle),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = check();
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.1}s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {why} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
