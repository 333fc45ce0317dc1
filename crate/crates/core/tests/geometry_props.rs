use gocoma::hyperbolic::{
    exp0, gcs, geodesic_dist, log0, mobius_add, mobius_linear, mobius_matvec, mobius_scalar_mul,
    project_to_ball, BallPoint, Curvature, EuclideanVector, MobiusLinear,
};
use gocoma::Matrix;
use proptest::prelude::*;

const CS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 1000,
        ..ProptestConfig::default()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Direction and radius fraction, turned into a point of a ball with
/// curvature `c`.
fn raw_point(d: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(-1.0f64..1.0, d), 0.0f64..0.95)
}

fn place(dir: &[f64], frac: f64, c: f64) -> BallPoint {
    let n = norm(dir);
    let coords = if n < 1e-9 {
        vec![0.0; dir.len()]
    } else {
        dir.iter().map(|a| a / n * frac / c.sqrt()).collect()
    };
    BallPoint::new(coords, Curvature::new(c).unwrap()).unwrap()
}

fn pair() -> impl Strategy<Value = (BallPoint, BallPoint)> {
    (1usize..6, 0usize..4).prop_flat_map(|(d, ci)| {
        (raw_point(d), raw_point(d)).prop_map(move |((a, fa), (b, fb))| {
            let c = CS[ci];
            (place(&a, fa, c), place(&b, fb, c))
        })
    })
}

fn triple() -> impl Strategy<Value = (BallPoint, BallPoint, BallPoint)> {
    (1usize..6, 0usize..4).prop_flat_map(|(d, ci)| {
        (raw_point(d), raw_point(d), raw_point(d)).prop_map(move |((a, fa), (b, fb), (z, fz))| {
            let c = CS[ci];
            (place(&a, fa, c), place(&b, fb, c), place(&z, fz, c))
        })
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn log_inverts_exp(v in prop::collection::vec(-1.8f64..1.8, 1..6), ci in 0usize..4) {
        prop_assume!(norm(&v) <= 3.0);
        let c = Curvature::new(CS[ci]).unwrap();
        let back = log0(&exp0(&EuclideanVector::new(v.clone()).unwrap(), c)).unwrap();
        let err = norm(&back.as_slice().iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
        prop_assert!(err < 1e-8 * (1.0 + norm(&v)), "err {err}");
    }

    #[test]
    fn exp_inverts_log((x, _) in pair()) {
        let back = exp0(&log0(&x).unwrap(), x.curvature());
        prop_assert!(max_diff(back.coords(), x.coords()) < 1e-9);
    }

    #[test]
    fn gyrogroup_identities((x, _) in pair()) {
        let o = BallPoint::origin(x.dim(), x.curvature());
        prop_assert!(max_diff(mobius_add(&o, &x).unwrap().coords(), x.coords()) < 1e-9);
        prop_assert!(max_diff(mobius_add(&x, &o).unwrap().coords(), x.coords()) < 1e-9);
        prop_assert!(norm(mobius_add(&x.neg(), &x).unwrap().coords()) < 1e-9);
        let dbl = mobius_scalar_mul(2.0, &x).unwrap();
        let sum = mobius_add(&x, &x).unwrap();
        prop_assert!(max_diff(dbl.coords(), sum.coords()) < 1e-9);
    }

    #[test]
    fn scalar_mul_unit_and_zero((x, _) in pair()) {
        prop_assert!(max_diff(mobius_scalar_mul(1.0, &x).unwrap().coords(), x.coords()) < 1e-9);
        prop_assert!(norm(mobius_scalar_mul(0.0, &x).unwrap().coords()) == 0.0);
    }

    #[test]
    fn metric_axioms((x, y) in pair()) {
        let d = geodesic_dist(&x, &y).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - geodesic_dist(&y, &x).unwrap()).abs() < 1e-10);
        prop_assert!(geodesic_dist(&x, &x).unwrap().abs() < 1e-10);
        if x != y {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn triangle_inequality((x, y, z) in triple()) {
        let dxz = geodesic_dist(&x, &z).unwrap();
        let bound = geodesic_dist(&x, &y).unwrap() + geodesic_dist(&y, &z).unwrap() + 1e-8;
        prop_assert!(dxz <= bound, "{dxz} > {bound}");
    }

    #[test]
    fn small_curvature_is_euclidean(
        a in prop::collection::vec(-1.0f64..1.0, 1..6),
        b in prop::collection::vec(-1.0f64..1.0, 1..6),
        fa in 0.1f64..1.0,
        fb in 0.1f64..1.0,
    ) {
        let d = a.len().min(b.len());
        prop_assume!(norm(&a[..d]) > 1e-3 && norm(&b[..d]) > 1e-3);
        let c: f64 = 1e-8;
        let x = place(&a[..d], fa * 1e-2 * c.sqrt(), c);
        let y = place(&b[..d], fb * 1e-2 * c.sqrt(), c);
        let plain: Vec<f64> = x.coords().iter().zip(y.coords()).map(|(p, q)| p + q).collect();
        let sum = mobius_add(&x, &y).unwrap();
        let err = norm(&sum.coords().iter().zip(&plain).map(|(p, q)| p - q).collect::<Vec<_>>());
        prop_assert!(err <= 1e-4 * norm(&plain) + 1e-300);
        let diff: Vec<f64> = x.coords().iter().zip(y.coords()).map(|(p, q)| p - q).collect();
        let dist = geodesic_dist(&x, &y).unwrap();
        prop_assert!((dist - 2.0 * norm(&diff)).abs() <= 1e-4 * 2.0 * norm(&diff));
    }

    #[test]
    fn gcs_is_bounded_symmetric_and_decreasing((x, y, z) in triple()) {
        let g1 = gcs(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&g1));
        prop_assert!((g1 - gcs(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!((gcs(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let half = x.curvature().value().sqrt() / 2.0;
        let d1 = geodesic_dist(&x, &y).unwrap();
        let d2 = geodesic_dist(&x, &z).unwrap();
        if half * d1.max(d2) < std::f64::consts::PI && d1 < d2 {
            prop_assert!(g1 > gcs(&x, &z).unwrap());
        }
    }

    #[test]
    fn outputs_stay_inside_the_ball(
        (x, y) in pair(),
        r in -4.0f64..4.0,
        scale in 0.5f64..1e6,
    ) {
        let m = x.curvature().max_norm();
        prop_assert!(mobius_add(&x, &y).unwrap().norm() <= m);
        prop_assert!(mobius_scalar_mul(r, &x).unwrap().norm() <= m);
        let far: Vec<f64> = x.coords().iter().map(|v| v * scale + 0.1).collect();
        let p = project_to_ball(&far, x.curvature()).unwrap();
        prop_assert!(p.norm() <= m);
        let again = project_to_ball(p.coords(), x.curvature()).unwrap();
        prop_assert_eq!(again.coords(), p.coords());
    }

    #[test]
    fn matvec_and_linear_compose((x, y) in pair(), w in prop::collection::vec(-1.0f64..1.0, 25)) {
        let d = x.dim();
        let wm = Matrix::from_fn(d, d, |i, j| w[(i * 5 + j) % 25]);
        let direct = mobius_matvec(&wm, &x).unwrap();
        let composed = exp0(&EuclideanVector::new(wm.matvec(log0(&x).unwrap().as_slice())).unwrap(), x.curvature());
        prop_assert_eq!(direct.coords(), composed.coords());
        let lin = MobiusLinear::new(wm.clone(), y.clone()).unwrap();
        let via = mobius_add(&direct, &y).unwrap();
        let out = mobius_linear(&lin, &x).unwrap();
        prop_assert_eq!(out.coords(), via.coords());
    }
}
