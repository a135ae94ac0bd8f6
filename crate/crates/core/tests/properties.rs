use beta_jacobi::coords::{complement, lambda_to_phi, phi_to_lambda, LambdaPoint};
use beta_jacobi::dynamics::{lambda_drift, simulate_phi, SimConfig};
use beta_jacobi::orthopoly::build_basis;
use beta_jacobi::roots::{drift_explicit, drift_root_sum, wall_values, AlcovePoint, ModelParams};
use beta_jacobi::semigroup::{default_truncation, univariate_density};
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

/// Sorted point of the open alcove with every wall value above `1e-3`.
fn interior(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..FRAC_PI_2, m).prop_filter_map("too close to a wall", |mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        let clear = wall_values(&v).all(|(_, w)| w > 1e-3);
        clear.then_some(v)
    })
}

fn params(m: usize) -> impl Strategy<Value = ModelParams> {
    (0.2..5.0f64, 0.05..8.0f64, 0.05..8.0f64)
        .prop_map(move |(b, p, q)| ModelParams::new(b, p + m as f64 - 1.0, q + m as f64 - 1.0, m).unwrap())
}

fn case() -> impl Strategy<Value = (Vec<f64>, ModelParams)> {
    (1usize..=5).prop_flat_map(|m| (interior(m), params(m)))
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
}

proptest! {
    #[test]
    fn root_sum_equals_explicit_drift((phi, p) in case()) {
        let phi = AlcovePoint::new(phi).unwrap();
        let mult = p.multiplicities();
        let a = drift_root_sum(&phi, &mult).unwrap();
        let b = drift_explicit(&phi, &mult).unwrap();
        prop_assert!(close(&a, &b, 1e-10), "{a:?} vs {b:?}");
    }

    #[test]
    fn complement_reverses_and_negates_drift((phi, p) in case()) {
        let phi = AlcovePoint::new(phi).unwrap();
        let a = drift_explicit(&phi, &p.multiplicities()).unwrap();
        let b = drift_explicit(&complement(&phi), &p.swapped().multiplicities()).unwrap();
        let expected: Vec<f64> = a.iter().rev().map(|x| -x).collect();
        prop_assert!(close(&b, &expected, 1e-10), "{b:?} vs {expected:?}");
    }

    #[test]
    fn angle_and_eigenvalue_coordinates_round_trip((phi, _p) in case()) {
        let phi = AlcovePoint::new(phi).unwrap();
        let lam = phi_to_lambda(&phi);
        prop_assert!(lam.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let back = lambda_to_phi(&lam);
        prop_assert!(close(back.as_slice(), phi.as_slice(), 1e-9));
        let again = phi_to_lambda(&back);
        prop_assert!(close(again.as_slice(), lam.as_slice(), 1e-14));
    }

    #[test]
    fn eigenvalue_drift_maps_to_its_complement((phi, p) in case()) {
        // lambda -> 1 - lambda (reversed) with p and q exchanged
        let lam = phi_to_lambda(&AlcovePoint::new(phi).unwrap()).into_vec();
        let m = lam.len();
        let mut a = vec![0.0; m];
        lambda_drift(&lam, &p, &mut a).unwrap();
        let flipped: Vec<f64> = lam.iter().rev().map(|x| 1.0 - x).collect();
        let mut b = vec![0.0; m];
        lambda_drift(&flipped, &p.swapped(), &mut b).unwrap();
        let expected: Vec<f64> = a.iter().rev().map(|x| -x).collect();
        prop_assert!(close(&b, &expected, 1e-9), "{b:?} vs {expected:?}");
    }

    #[test]
    fn univariate_density_is_positive_and_mirror_symmetric(
        r in -0.9..6.0f64,
        s in -0.9..6.0f64,
        theta in 0.01..0.99f64,
        lam in 0.01..0.99f64,
        t in 0.1..3.0f64,
    ) {
        let n = default_truncation(t);
        let a = univariate_density(theta, lam, t, &build_basis(r, s, n).unwrap(), n).unwrap().value;
        let b = univariate_density(1.0 - theta, 1.0 - lam, t, &build_basis(s, r, n).unwrap(), n).unwrap().value;
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulated_paths_stay_in_the_closed_alcove((phi, p) in case(), seed in any::<u64>()) {
        let start = AlcovePoint::new(phi).unwrap();
        let cfg = SimConfig { dt: 1e-3, horizon: 0.05, seed, ..SimConfig::default() };
        let path = simulate_phi(&start, &p, &cfg).unwrap();
        prop_assert!(path.times.windows(2).all(|w| w[1] > w[0]));
        for x in &path.states {
            prop_assert!(AlcovePoint::new(x.clone()).is_ok(), "{x:?}");
        }
        let again = simulate_phi(&start, &p, &cfg).unwrap();
        prop_assert_eq!(path, again);
    }

    #[test]
    fn sorted_lambda_points_are_accepted(v in prop::collection::vec(0.0..=1.0f64, 1..6)) {
        let p = LambdaPoint::from_unsorted(v.clone()).unwrap();
        prop_assert!(p.as_slice().windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(p.dim(), v.len());
    }
}
