use limit_cycles::field::{dist, norm};
use limit_cycles::systems::{
    amplitude, hypercycle, hypercycle_fixpoint, lookup, reference_integrate, simplex_point, GroundTruth, Phi,
    SystemError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[test]
fn circle_examples() {
    let s = lookup("circle").unwrap();
    assert_eq!(s.field.eval(&[1.0, 0.0]), vec![0.0, -1.0]);
    assert_eq!(s.field.eval(&[0.0, 2.0]), vec![2.0, 0.0]);
    assert_eq!(s.lipschitz, 1.0);
    assert!(s.field.contains(&[1.0, 0.0]));
    assert!(!s.field.contains(&[0.5, 0.0]));
}

#[test]
fn circle_orbits_keep_their_radius() {
    let s = lookup("circle").unwrap();
    let (end, err) = reference_integrate(&*s.field, &[1.5, 0.0], 4.0 * PI, 1e-3).unwrap();
    assert!(err < 1e-9);
    assert!((norm(&end) - 1.5).abs() <= 1e-6, "{end:?}");
    assert!(dist(&end, &[1.5, 0.0]) <= 1e-6);
}

#[test]
fn annulus_radius_follows_the_closed_form() {
    let s = lookup("annulus").unwrap();
    assert_eq!(s.truth, GroundTruth::Circles { center: [0.0, 0.0], radii: vec![1.25] });
    for t in [0.5, 1.0, 3.0] {
        let (end, err) = reference_integrate(&*s.field, &[2.0, 0.0], t, 1e-3).unwrap();
        let want = 1.25 + 0.75 * (-t as f64).exp();
        assert!(err < 1e-10);
        assert!((norm(&end) - want).abs() <= 1e-8, "t={t}: {} vs {want}", norm(&end));
        // angular speed 1, counterclockwise
        let ang = end[1].atan2(end[0]);
        let expect = (t + PI).rem_euclid(2.0 * PI) - PI;
        assert!((ang - expect).abs() <= 1e-8);
    }
}

#[test]
fn annulus_speed_on_the_cycle() {
    let s = lookup("annulus").unwrap();
    for k in 0..16 {
        let a = k as f64 * PI / 8.0;
        let p = [1.25 * a.cos(), 1.25 * a.sin()];
        assert!((norm(&s.field.eval(&p)) - 1.25).abs() <= 1e-12);
    }
}

#[test]
fn zero_phi_freezes_the_radius() {
    let s = lookup("annulus:0").unwrap();
    for p in [[1.2, 0.3], [-1.7, 0.4], [0.0, -1.9]] {
        let v = s.field.eval(&p);
        let radial = (v[0] * p[0] + v[1] * p[1]) / norm(&p);
        assert!(radial.abs() <= 1e-15);
    }
}

#[test]
fn phi_roots_and_bounds() {
    let phi = Phi::new(vec![0.25, -1.0]);
    assert_eq!(phi.eval(0.25), 0.0);
    assert_eq!(phi.derivative(0.7), -1.0);
    let roots = phi.sign_change_roots();
    assert_eq!(roots.len(), 1);
    assert!((roots[0] - 0.25).abs() < 1e-12);
    // (u - 0.2)(u - 0.6) has two cycles
    let s = lookup("annulus:0.12,-0.8,1").unwrap();
    match s.truth {
        GroundTruth::Circles { radii, .. } => {
            assert_eq!(radii.len(), 2);
            assert!((radii[0] - 1.2).abs() < 1e-9 && (radii[1] - 1.6).abs() < 1e-9, "{radii:?}");
        }
        t => panic!("{t:?}"),
    }
}

#[test]
fn hypercycle_rest_point_and_simplex_invariance() {
    let s = hypercycle(5, &[1.0; 5]).unwrap();
    let f = &*s.field;
    let v = f.eval(&[0.2; 5]);
    assert!(norm(&v) <= 1e-16, "{v:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let x = simplex_point(&mut rng, 5);
        let v = f.eval(&x);
        assert!(v.iter().sum::<f64>().abs() <= 1e-12);
    }
    // faces are invariant
    for i in 0..5 {
        let mut x = simplex_point(&mut rng, 5);
        let m = x[i];
        x[i] = 0.0;
        x.iter_mut().for_each(|c| *c /= 1.0 - m);
        assert_eq!(f.eval(&x)[i], 0.0);
    }
}

#[test]
fn hypercycle_fixpoint_for_unequal_rates() {
    let k = [1.0, 2.0, 0.5, 1.5, 3.0];
    let x = hypercycle_fixpoint(&k);
    assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    let s = hypercycle(5, &k).unwrap();
    assert!(norm(&s.field.eval(&x)) < 1e-14);
}

#[test]
fn hypercycle_stays_on_the_simplex() {
    let s = lookup("hypercycle:5").unwrap();
    let (end, _) = reference_integrate(&*s.field, &s.default_start, 1000.0, 0.05).unwrap();
    assert!((end.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    assert!(end.iter().all(|&c| c > 0.0));
}

#[test]
fn van_der_pol_examples() {
    let s = lookup("vdp:0.5").unwrap();
    assert_eq!(s.field.eval(&[0.0, 0.0]), vec![0.0, 0.0]);
    let rot = lookup("vdp:0").unwrap();
    let circ = lookup("circle").unwrap();
    for p in [[1.3, 0.2], [-0.5, 1.7]] {
        assert_eq!(rot.field.eval(&p), circ.field.eval(&p));
    }
    let a = amplitude(&*s.field, &s.default_start, 60.0, 8.0, 1e-3);
    assert!((1.9..=2.1).contains(&a), "{a}");
}

#[test]
fn drift3_attracts_to_the_level() {
    let s = lookup("drift3").unwrap();
    assert_eq!(s.truth, GroundTruth::Cylinder { level: 0.5 });
    let (end, _) = reference_integrate(&*s.field, &[1.5, 0.0, 0.2], 20.0, 1e-2).unwrap();
    assert!((end[2] - (0.5 - 0.3 * (-2.0f64).exp())).abs() < 1e-9);
    assert!(!s.field.contains(&[0.5, 0.0, 0.5]));
    assert!(!s.field.contains(&[1.5, 0.0, 1.5]));
}

#[test]
fn lookup_errors() {
    assert!(matches!(lookup("nope"), Err(SystemError::Unknown(_))));
    assert!(matches!(lookup("hypercycle:x"), Err(SystemError::BadSpec { .. })));
    assert!(matches!(lookup("vdp:abc"), Err(SystemError::BadSpec { .. })));
    assert!(lookup("hypercycle:5:1,2,3,4,5").is_ok());
    assert!(lookup("hypercycle:5:1,2").is_err());
}

#[test]
fn start_sampling_avoids_the_exclusion_ball() {
    let s = lookup("hypercycle:5").unwrap();
    let (c, r) = s.exclusion.clone().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x = s.sample_start(&mut rng).unwrap();
        assert!(dist(&x, &c) >= r);
        assert!(s.field.contains(&x));
    }
}
