use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stiefel_hermite::experiments::{chebyshev_nodes, gen_qr_experiment};
use stiefel_hermite::interpolate::{
    fit_composite, geodesic_interp, hermite_coeff_derivs, hermite_coeffs, piecewise_vector_hermite,
    scalar_hermite, tangent_rbf_interp, Centering, HermiteSample,
};
use stiefel_hermite::linalg::Matrix;
use stiefel_hermite::stiefel::{StiefelPoint, TangentVector, DEFAULT_LOG_TOL};
use stiefel_hermite::Error;

#[test]
fn basis_matches_endpoint_conditions() {
    let (t0, t1) = (0.3, 1.1);
    let at0 = hermite_coeffs(t0, t0, t1).unwrap();
    let at1 = hermite_coeffs(t1, t0, t1).unwrap();
    assert_eq!((at0.a0, at0.a1, at0.b0, at0.b1), (1.0, 0.0, 0.0, 0.0));
    assert!((at1.a1 - 1.0).abs() < 1e-15 && at1.a0.abs() < 1e-15 && at1.b0.abs() < 1e-15 && at1.b1.abs() < 1e-15);
    let d0 = hermite_coeff_derivs(t0, t0, t1).unwrap();
    let d1 = hermite_coeff_derivs(t1, t0, t1).unwrap();
    assert!((d0.b0 - 1.0).abs() < 1e-15 && d0.a0.abs() < 1e-15 && d0.b1.abs() < 1e-15);
    assert!((d1.b1 - 1.0).abs() < 1e-15 && d1.a1.abs() < 1e-14 && d1.b0.abs() < 1e-15);
    assert!(hermite_coeffs(0.5, 1.0, 1.0).is_err());
}

#[test]
fn scalar_hermite_reproduces_cubics() {
    let f = |t: f64| 2.0 * t * t * t - t * t + 0.5 * t - 3.0;
    let df = |t: f64| 6.0 * t * t - 2.0 * t + 0.5;
    let (t0, t1) = (-0.7, 1.3);
    for i in 0..=10 {
        let t = t0 + 0.2 * i as f64;
        let got = scalar_hermite(f(t0), f(t1), df(t0), df(t1), t, t0, t1).unwrap();
        assert!((got - f(t)).abs() < 1e-12, "{t}: {got} vs {}", f(t));
    }
    let knots = [0.0, 0.5, 2.0];
    let values: Vec<DVector<f64>> = knots.iter().map(|&t| DVector::from_vec(vec![f(t), -f(t)])).collect();
    let derivs: Vec<DVector<f64>> = knots.iter().map(|&t| DVector::from_vec(vec![df(t), -df(t)])).collect();
    let v = piecewise_vector_hermite(&knots, &values, &derivs, 1.7).unwrap();
    assert!((v[0] - f(1.7)).abs() < 1e-12 && (v[1] + f(1.7)).abs() < 1e-12);
    assert!(piecewise_vector_hermite(&knots, &values, &derivs, 2.5).is_err());
}

#[test]
fn baselines_pass_through_the_samples() {
    let nodes = chebyshev_nodes(-1.0, 1.0, 5).unwrap();
    let (_, samples) = gen_qr_experiment(25, 3, &nodes, 3).unwrap();
    let pts: Vec<(f64, StiefelPoint)> = samples.iter().map(|s| (s.t, s.point.clone())).collect();
    let geo = geodesic_interp(&pts, DEFAULT_LOG_TOL).unwrap();
    let rbf = tangent_rbf_interp(&pts, 1.0).unwrap();
    for (t, p) in &pts {
        assert!((geo.eval(*t).unwrap().matrix() - p.matrix()).norm() < 1e-10);
        assert!((rbf.eval(*t).matrix() - p.matrix()).norm() < 1e-10);
    }
}

#[test]
fn both_centerings_interpolate_and_stay_on_the_manifold() {
    let nodes = chebyshev_nodes(0.0, 2.0, 4).unwrap();
    let (path, samples) = gen_qr_experiment(30, 4, &nodes, 11).unwrap();
    for centering in [Centering::QCentered, Centering::PCentered] {
        let curve = fit_composite(&samples, centering, &Default::default()).unwrap();
        let (a, b) = curve.domain();
        for i in 0..=40 {
            let t = a + (b - a) * i as f64 / 40.0;
            let y = curve.eval(t).unwrap();
            let m = y.matrix();
            assert!((m.transpose() * m - Matrix::identity(4, 4)).norm() < 1e-12);
            // loose sanity check on a smooth path with four samples
            assert!((m - path.q(t).unwrap().matrix()).norm() < 0.2, "t = {t}");
        }
        assert!(curve.eval(b + 0.1).is_err());
    }
}

#[test]
fn fit_rejects_bad_knots() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = StiefelPoint::random(&mut rng, 6, 2);
    let sample = |t: f64| HermiteSample::new(t, u.clone(), TangentVector::zero(u.clone())).unwrap();
    let err = fit_composite(&[sample(1.0), sample(0.0)], Centering::QCentered, &Default::default()).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
    assert!(fit_composite(&[sample(0.0)], Centering::QCentered, &Default::default()).is_err());
}

#[test]
fn log_failures_are_wrapped_with_the_subinterval() {
    let u = StiefelPoint::new(Matrix::identity(4, 2)).unwrap();
    let mut flipped = Matrix::identity(4, 2);
    flipped[(1, 1)] = -1.0;
    let f = StiefelPoint::new(flipped).unwrap();
    let samples = [
        HermiteSample::new(0.0, u.clone(), TangentVector::zero(u.clone())).unwrap(),
        HermiteSample::new(1.0, u.clone(), TangentVector::zero(u.clone())).unwrap(),
        HermiteSample::new(2.0, f.clone(), TangentVector::zero(f)).unwrap(),
    ];
    let err = fit_composite(&samples, Centering::QCentered, &Default::default()).unwrap_err();
    match &err {
        Error::Subinterval { index, t0, t1, .. } => assert_eq!((*index, *t0, *t1), (1, 1.0, 2.0)),
        other => panic!("unexpected error {other}"),
    }
    assert!(err.is_convergence_failure());
    assert!(err.to_string().contains("sampling more densely"));
}
