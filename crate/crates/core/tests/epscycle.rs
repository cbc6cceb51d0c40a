use limit_cycles::epscycle::{
    discs_intersect, find_eps_cycle, integrate, sweep_time_bound, verify_certificate, verify_certificate_detailed,
    EpsCycleCertificate, FinderConfig, Outcome, SectionIndex,
};
use limit_cycles::field::{dist, dot, norm, Domain, FnField, VectorField};
use limit_cycles::qbf::{QbfInstance, Quantifier};
use limit_cycles::reduce_continuous::compile_continuous;
use limit_cycles::systems::{amplitude, lookup, GroundTruth};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cycle(f: &dyn VectorField, x0: &[f64], eps: f64, l: f64) -> EpsCycleCertificate {
    let run = find_eps_cycle(f, x0, &FinderConfig::new(eps, l)).unwrap();
    match run.outcome {
        Outcome::Cycle(c) => c,
        o => panic!("{o:?}"),
    }
}

#[test]
fn circle_returns_after_one_turn() {
    let s = lookup("circle").unwrap();
    let c = cycle(&*s.field, &[1.0, 0.0], 0.01, 1.0);
    assert!(verify_certificate(&*s.field, &c, 1.0));
    assert!((c.period() - 2.0 * std::f64::consts::PI).abs() <= 1e-3, "{}", c.period());
    assert!(dist(&c.x1, &c.x2) <= 1e-3);
}

#[test]
fn annulus_certificate_lies_near_the_cycle() {
    let s = lookup("annulus").unwrap();
    let c = cycle(&*s.field, &s.default_start, 0.01, s.lipschitz);
    assert!(verify_certificate(&*s.field, &c, s.lipschitz));
    for x in [&c.x1, &c.x2] {
        assert!(s.truth.cycle_distance(x).unwrap() <= 2e-2, "{x:?}");
    }
}

#[test]
fn three_dimensional_certificate() {
    let s = lookup("drift3").unwrap();
    let c = cycle(&*s.field, &s.default_start, 0.01, s.lipschitz);
    assert_eq!(c.x1.len(), 3);
    assert!(verify_certificate(&*s.field, &c, s.lipschitz));
    assert!(c.checks.inner > 0.0);
}

#[test]
fn van_der_pol_certificate_is_on_the_attractor() {
    let s = lookup("vdp:0.5").unwrap();
    let c = cycle(&*s.field, &s.default_start, 0.01, s.lipschitz);
    assert!(verify_certificate(&*s.field, &c, s.lipschitz));
    let GroundTruth::Amplitude { lo, hi } = s.truth else { panic!() };
    let a = amplitude(&*s.field, &c.x1, 0.0, c.period() * 1.05, 1e-3);
    assert!(a >= lo && a <= hi, "{a}");
}

#[test]
fn hypercycle_certificate_keeps_away_from_the_faces() {
    let s = lookup("hypercycle:5").unwrap();
    let c = cycle(&*s.field, &s.default_start, 0.01, s.lipschitz);
    assert!(verify_certificate(&*s.field, &c, s.lipschitz));
    let min = c.x1.iter().chain(&c.x2).cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= 1e-3, "{min}");
    assert!((c.x2.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
}

#[test]
fn slow_rotation_gives_a_fixpoint() {
    let f = FnField::new("slow", 2, Domain::Box { lo: vec![-2.0; 2], hi: vec![2.0; 2] }, |x, o| {
        o[0] = 1e-3 * x[1];
        o[1] = -1e-3 * x[0];
    });
    let run = find_eps_cycle(&f, &[1.0, 0.0], &FinderConfig::new(0.01, 1e-3)).unwrap();
    assert!(matches!(run.outcome, Outcome::Fixpoint(_)));
}

fn instance(n: usize, pick: u64) -> QbfInstance {
    let qs = (0..n).map(|k| if pick >> k & 1 == 1 { Quantifier::Forall } else { Quantifier::Exists }).collect();
    let table: Vec<bool> = (0..1 << n).map(|r| (pick >> (n + r)) & 1 == 1).collect();
    QbfInstance::from_truth_table(qs, &table).unwrap()
}

#[test]
fn benchmarks_stay_within_the_sweep_bound() {
    for name in ["circle", "annulus", "vdp:0.5"] {
        let s = lookup(name).unwrap();
        let run = find_eps_cycle(&*s.field, &s.default_start, &FinderConfig::new(0.01, s.lipschitz)).unwrap();
        assert!(matches!(run.outcome, Outcome::Cycle(_)), "{name}");
        assert!(run.elapsed <= run.budget);
        assert_eq!(run.budget, sweep_time_bound(2, 0.01, s.lipschitz).unwrap());
    }
    for (n, pick) in [(1, 0), (1, 7), (2, 0b1011_01), (2, 0b0110_10)] {
        let red = compile_continuous(&instance(n, pick)).unwrap();
        let l = red.lipschitz().unwrap();
        let run = find_eps_cycle(&red, &red.start_point(), &FinderConfig::new(0.9, l)).unwrap();
        let Outcome::Cycle(c) = &run.outcome else { panic!("n={n} {:?}", run.outcome) };
        assert!(run.elapsed <= run.budget);
        assert!(verify_certificate(&red, c, l));
    }
}

/// Rotation with an attracting unit circle plus a random quadratic
/// perturbation, on `[-2, 2]^2`.
fn random_field(rng: &mut ChaCha8Rng) -> (FnField, f64) {
    let pull = rng.gen_range(0.2..1.0);
    // monomials 1, x, y, x^2, xy, y^2 per component
    let c: [[f64; 6]; 2] = [0, 1].map(|_| [0; 6].map(|_| rng.gen_range(-0.02..0.02)));
    const DEG: [f64; 6] = [0.0, 1.0, 1.0, 2.0, 2.0, 2.0];
    // partials of (1 - r^2) x are at most 15 and 8 on the box, those of a
    // degree-k monomial at most k 2^(k-1)
    let pert: f64 = c.iter().flatten().zip(DEG.iter().cycle()).map(|(a, &k)| 2.0 * a.abs() * k * 2f64.powf(k - 1.0)).sum();
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

#[test]
fn fuzz_certificates_and_mutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut found = 0;
    for _ in 0..1000 {
        let (f, l) = random_field(&mut rng);
        let r = rng.gen_range(0.5..1.5);
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let x0 = [r * a.cos(), r * a.sin()];
        let run = find_eps_cycle(&f, &x0, &FinderConfig::new(0.2, l)).unwrap();
        let Outcome::Cycle(c) = run.outcome else { continue };
        found += 1;
        let v = verify_certificate_detailed(&f, &c, l);
        assert!(v.ok(), "{:?}", v.failures);

        let u: Vec<f64> = c.v1.iter().map(|w| w / norm(&c.v1)).collect();
        let perp = [-u[1], u[0]];
        let rebuild = |x2: Vec<f64>, v2: Vec<f64>| EpsCycleCertificate::new(c.t1, c.x1.clone(), c.v1.clone(), c.t2, x2, v2, c.eps);
        // too far, along the hyperplane
        let x2: Vec<f64> = c.x2.iter().zip(&perp).map(|(p, d)| p + 2.0 * c.eps * d).collect();
        let v2 = f.eval(&x2);
        assert!(!verify_certificate(&f, &rebuild(x2, v2), l));
        // off the hyperplane
        let x2: Vec<f64> = c.x2.iter().zip(&u).map(|(p, d)| p + 2.0 * c.eps * d).collect();
        let v2 = f.eval(&x2);
        assert!(!verify_certificate(&f, &rebuild(x2, v2), l));
        // reversed velocity
        let v2: Vec<f64> = c.v2.iter().map(|w| -w).collect();
        assert!(!verify_certificate(&f, &rebuild(c.x2.clone(), v2), l));
        // round trip through text
        let back = EpsCycleCertificate::from_text(&c.to_text()).unwrap();
        assert!(verify_certificate(&f, &back, l));
    }
    eprintln!("fuzz: {found} certificates");
    assert!(found >= 990, "{found}");
}

#[test]
fn intersecting_discs_have_aligned_velocities() {
    let s = lookup("annulus").unwrap();
    let delta = FinderConfig::new(0.05, s.lipschitz).delta();
    // three laps; the spiral closes up to well below delta
    let traj = integrate(&*s.field, &s.default_start, 0.01, 20.0).unwrap();
    let mut idx = SectionIndex::new(2, delta);
    for k in 0..traj.len() {
        idx.insert(traj.time(k), traj.arc_length(k), traj.point(k), traj.velocity(k));
    }
    let mut hits = 0;
    for k in 0..traj.len() {
        let (xk, vk) = (traj.point(k), traj.velocity(k));
        for j in idx.near(xk, 2.0 * delta) {
            if j + 1 >= traj.len() || traj.arc_length(j) < traj.arc_length(k) + 1.0 {
                continue;
            }
            // where the later segment j -> j+1 crosses the hyperplane at k
            let (p, q) = (traj.point(j), traj.point(j + 1));
            let a: f64 = p.iter().zip(xk).zip(vk).map(|((p, x), v)| (p - x) * v).sum();
            let b: f64 = q.iter().zip(xk).zip(vk).map(|((q, x), v)| (q - x) * v).sum();
            if a > 0.0 || b <= 0.0 {
                continue;
            }
            let c: Vec<f64> = p.iter().zip(q).map(|(p, q)| p + (q - p) * (-a / (b - a))).collect();
            if dist(&c, xk) > delta {
                continue;
            }
            let vc = s.field.eval(&c);
            assert!(discs_intersect(xk, vk, &c, &vc, delta));
            hits += 1;
            assert!(dot(vk, &vc) > 0.0);
        }
    }
    assert!(hits >= 100, "{hits}");
}

#[test]
fn sweep_bound_grows_with_dimension() {
    let b2 = sweep_time_bound(2, 0.1, 1.0).unwrap();
    let b3 = sweep_time_bound(3, 0.1, 1.0).unwrap();
    assert!(b3 > b2);
    assert!(sweep_time_bound(2, 0.05, 1.0).unwrap() > b2);
    assert!(sweep_time_bound(2, 0.1, 2.0).unwrap() > b2);
    assert!(sweep_time_bound(2, 1.5, 1.0).is_err());
}

proptest! {
    #[test]
    fn intersecting_discs_are_close(
        x1 in prop::array::uniform3(-1.0..1.0f64),
        v1 in prop::array::uniform3(-1.0..1.0f64),
        x2 in prop::array::uniform3(-1.0..1.0f64),
        v2 in prop::array::uniform3(-1.0..1.0f64),
        r in 0.01..1.0f64,
    ) {
        prop_assume!(norm(&v1) > 1e-3 && norm(&v2) > 1e-3);
        if discs_intersect(&x1, &v1, &x2, &v2, r) {
            prop_assert!(dist(&x1, &x2) <= 2.0 * r * (1.0 + 1e-6));
        }
        // a disc always meets itself
        prop_assert!(discs_intersect(&x1, &v1, &x1, &v1, r));
    }
}
