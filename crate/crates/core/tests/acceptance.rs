//! End-to-end acceptance checks. Each test prints a single `PASS`/`FAIL`
//! summary line (visible with `--nocapture`) and asserts on it.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stiefel_hermite::calculus::{
    dexp_stiefel, diff_qr, diff_svd, diff_svd_truncated, mathias_dexp, svd_sign_normalize,
};
use stiefel_hermite::experiments::{
    bound_check, chebyshev_nodes, gen_qr_experiment, run_qr_interp, run_snapshot_experiment, run_svd_interp,
    run_tangent_vs_manifold, run_transport_accuracy, ExperimentConfig, TRANSPORT_STEPS,
};
use stiefel_hermite::interpolate::{fit_composite, Centering, CompositeCurve, HermiteSample};
use stiefel_hermite::linalg::{expm, qr_econ, rel_frobenius, svd_full, Matrix};
use stiefel_hermite::stiefel::{
    call_counts, dist, reset_call_counts, stiefel_exp, stiefel_log, StiefelPoint, TangentVector,
    DEFAULT_LOG_TOL,
};

const TRANSPORT_TOL: f64 = 1e-8;
const KNOT_VALUE_TOL: f64 = 1e-8;
const KNOT_VELOCITY_TOL: f64 = 1e-4;
const ORDERING_FACTOR: f64 = 0.1;
const CENTERING_SPREAD: f64 = 0.05;
const FD_ORACLE_TOL: f64 = 1e-5;
const MATHIAS_BLOCK_TOL: f64 = 1e-12;
const ROUND_TRIP_TOL: f64 = 1e-9;
const ISOMETRY_TOL: f64 = 1e-8;
const CURVATURE_FACTOR: f64 = 1.05;
/// Absolute allowance where both errors vanish (sample nodes).
const CURVATURE_FLOOR: f64 = 1e-12;
const BOUND_SLACK: f64 = 2e-3;
const SNAPSHOT_FACTOR: f64 = 2.0;
const SNAPSHOT_HERMITE: f64 = 0.0418;
const SNAPSHOT_GEODESIC: f64 = 0.1301;

fn verdict(name: &str, ok: bool, detail: String) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn within_budget(start: Instant, budget: Duration) -> bool {
    start.elapsed() < budget
}

#[test]
fn transport_round_trip_is_accurate_and_v_shaped() {
    let start = Instant::now();
    let cfg = ExperimentConfig::transport_default();
    let rows = run_transport_accuracy(&cfg, &TRANSPORT_STEPS).expect("transport study runs");
    let at = |h: f64| rows.iter().find(|r| r.h == h).unwrap().rel_err;
    let interior_min = rows[1..rows.len() - 1].iter().map(|r| r.rel_err).fold(f64::INFINITY, f64::min);
    let v_shape = interior_min < rows[0].rel_err && interior_min < rows[rows.len() - 1].rel_err;
    let ok = at(1e-4) <= TRANSPORT_TOL && v_shape && within_budget(start, Duration::from_secs(120));
    let table: Vec<String> = rows.iter().map(|r| format!("{:.0e}:{:.1e}", r.h, r.rel_err)).collect();
    verdict("transport accuracy", ok, format!("St({},{}) errors {}", cfg.n, cfg.r, table.join(" ")));
}

/// Central difference of the arc formula `t -> Exp(gamma(t))`.
fn arc_velocity(curve: &CompositeCurve, arc: usize, t: f64, h: f64) -> Matrix {
    let a = &curve.arcs[arc];
    let plus = stiefel_exp(&a.tangent_at(t + h).unwrap(), 1.0);
    let minus = stiefel_exp(&a.tangent_at(t - h).unwrap(), 1.0);
    (plus.matrix() - minus.matrix()) / (2.0 * h)
}

#[test]
fn composite_curves_interpolate_values_and_velocities() {
    let start = Instant::now();
    let nodes = chebyshev_nodes(-1.1, 1.1, 6).unwrap();
    let h = 1e-5;
    let (mut worst_val, mut worst_vel, mut worst_join) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..20u64 {
        let (_, samples) = gen_qr_experiment(60, 5, &nodes, seed).unwrap();
        for centering in [Centering::QCentered, Centering::PCentered] {
            let curve = fit_composite(&samples, centering, &Default::default()).unwrap();
            for (i, s) in samples.iter().enumerate() {
                let val = (curve.eval(s.t).unwrap().matrix() - s.point.matrix()).norm();
                worst_val = worst_val.max(val);
                let vnorm = s.velocity.delta().norm().max(1e-300);
                let arcs = [i.checked_sub(1), (i < curve.arcs.len()).then_some(i)];
                let derivs: Vec<Matrix> = arcs.iter().flatten().map(|&a| arc_velocity(&curve, a, s.t, h)).collect();
                for d in &derivs {
                    worst_vel = worst_vel.max((d - s.velocity.delta()).norm() / vnorm);
                }
                if derivs.len() == 2 {
                    worst_join = worst_join.max((&derivs[0] - &derivs[1]).norm() / vnorm);
                }
            }
        }
    }
    let ok = worst_val <= KNOT_VALUE_TOL
        && worst_vel <= KNOT_VELOCITY_TOL
        && worst_join <= KNOT_VELOCITY_TOL
        && within_budget(start, Duration::from_secs(120));
    verdict(
        "interpolation conditions",
        ok,
        format!("20 seeds, St(60,5): value {worst_val:.1e}, velocity {worst_vel:.1e}, join {worst_join:.1e}"),
    );
}

#[test]
fn hermite_beats_geodesic_on_qr_factor() {
    let start = Instant::now();
    let large = ExperimentConfig { n: 500, r: 10, ..Default::default() };
    let rep = run_qr_interp(&large).unwrap();
    let (h, g) = (rep.max_rel("hermite").unwrap(), rep.max_rel("geodesic").unwrap());
    let large_ok = h <= ORDERING_FACTOR * g && within_budget(start, Duration::from_secs(600));

    let desk_start = Instant::now();
    let desk = run_qr_interp(&ExperimentConfig::default()).unwrap();
    let (dh, dg) = (desk.max_rel("hermite").unwrap(), desk.max_rel("geodesic").unwrap());
    let desk_ok = dh <= ORDERING_FACTOR * dg && within_budget(desk_start, Duration::from_secs(60));
    verdict(
        "qr-factor ordering",
        large_ok && desk_ok,
        format!("n=500: hermite {h:.2e} vs geodesic {g:.2e}; n=100: {dh:.2e} vs {dg:.2e}"),
    );
}

#[test]
fn hermite_beats_geodesic_on_low_rank_svd() {
    let q_cfg = ExperimentConfig { n: 1000, m: 100, r: 10, ..ExperimentConfig::svd_default() };
    let p_cfg = ExperimentConfig { centering: Centering::PCentered, ..q_cfg.clone() };
    let q = run_svd_interp(&q_cfg).unwrap();
    let p = run_svd_interp(&p_cfg).unwrap();
    let (h, g) = (q.max_rel("hermite").unwrap(), q.max_rel("geodesic").unwrap());
    let hp = p.max_rel("hermite").unwrap();
    let spread = (h - hp).abs() / h;
    let ok = h <= ORDERING_FACTOR * g && spread <= CENTERING_SPREAD;
    verdict(
        "low-rank svd",
        ok,
        format!("hermite {h:.2e} vs geodesic {g:.2e}; p-centered {hp:.2e} (spread {:.2}%)", 100.0 * spread),
    );
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Sign-aligned truncated SVD of `y`, columns matched to `u_ref`.
fn aligned_svd(y: &Matrix, rank: usize, u_ref: &Matrix) -> (Matrix, Matrix, Vec<f64>) {
    let svd = svd_full(y).unwrap();
    let (u, s, v) = svd.truncate(rank);
    let (u, v) = svd_sign_normalize(&u, &v, u_ref).unwrap();
    (u, v, s.iter().copied().collect())
}

#[test]
fn differentials_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-5;
    let mut worst = [0.0f64; 5];
    let mut worst_block = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(12..=60);
        let r = rng.random_range(2..=6);

        // QR
        let t = random_matrix(&mut rng, n, r);
        let td = random_matrix(&mut rng, n, r);
        let d = diff_qr(&t, &td, &qr_econ(&t).unwrap()).unwrap();
        let fd = (qr_econ(&(&t + &td * h)).unwrap().q - qr_econ(&(&t - &td * h)).unwrap().q) / (2.0 * h);
        worst[0] = worst[0].max(rel_frobenius(&d.q_dot, &fd));

        // full SVD
        let y = random_matrix(&mut rng, n, r);
        let yd = random_matrix(&mut rng, n, r);
        let base = svd_full(&y).unwrap();
        let d = diff_svd(&y, &yd, &base).unwrap();
        let (up, vp, sp) = aligned_svd(&(&y + &yd * h), r, &base.u);
        let (um, vm, sm) = aligned_svd(&(&y - &yd * h), r, &base.u);
        let fd_u = (up - um) / (2.0 * h);
        let fd_v = (vp - vm) / (2.0 * h);
        let fd_s = Matrix::from_fn(r, 1, |i, _| (sp[i] - sm[i]) / (2.0 * h));
        let s_dot = Matrix::from_column_slice(r, 1, d.sigma_dot.as_slice());
        worst[1] = worst[1]
            .max(rel_frobenius(&d.u_dot, &fd_u))
            .max(rel_frobenius(&d.v_dot, &fd_v))
            .max(rel_frobenius(&s_dot, &fd_s));

        // truncated SVD of a wider matrix
        let m = r + 3;
        let rank = r - 1;
        let y = random_matrix(&mut rng, n.max(m), m);
        let yd = random_matrix(&mut rng, n.max(m), m);
        let base = svd_full(&y).unwrap();
        let d = diff_svd_truncated(&y, &yd, &base, rank).unwrap();
        let u_ref = base.u.columns(0, rank).into_owned();
        let (up, vp, _) = aligned_svd(&(&y + &yd * h), rank, &u_ref);
        let (um, vm, _) = aligned_svd(&(&y - &yd * h), rank, &u_ref);
        worst[2] = worst[2]
            .max(rel_frobenius(&d.u_dot, &((up - um) / (2.0 * h))))
            .max(rel_frobenius(&d.v_dot, &((vp - vm) / (2.0 * h))));

        // differential of the Stiefel exponential
        let u = StiefelPoint::random(&mut rng, n, r);
        let xi_norm = rng.random_range(0.2..1.0);
        let xi = TangentVector::random(&mut rng, &u, xi_norm);
        let v = TangentVector::random(&mut rng, &u, 1.0);
        let d = dexp_stiefel(&xi, &v).unwrap();
        let plus = stiefel_exp(&TangentVector::combine(&[(1.0, &xi), (h, &v)]).unwrap(), 1.0);
        let minus = stiefel_exp(&TangentVector::combine(&[(1.0, &xi), (-h, &v)]).unwrap(), 1.0);
        worst[3] = worst[3].max(rel_frobenius(&d, &((plus.matrix() - minus.matrix()) / (2.0 * h))));

        // block exponential
        let k = rng.random_range(2..=6);
        let a = random_matrix(&mut rng, k, k);
        let ad = random_matrix(&mut rng, k, k);
        let res = mathias_dexp(&a, &ad).unwrap();
        let fd = (expm(&(&a + &ad * h)).unwrap() - expm(&(&a - &ad * h)).unwrap()) / (2.0 * h);
        worst[4] = worst[4].max(rel_frobenius(&res.dexp_block, &fd));
        let e = expm(&a).unwrap();
        let scale = e.norm().max(1.0);
        let top = (res.block_exp.view((0, 0), (k, k)) - &e).norm() / scale;
        let bottom = (res.block_exp.view((k, k), (k, k)) - &e).norm() / scale;
        worst_block = worst_block.max(top).max(bottom).max((&res.exp_m - &e).norm() / scale);
    }
    let ok = worst.iter().all(|&w| w <= FD_ORACLE_TOL) && worst_block <= MATHIAS_BLOCK_TOL;
    verdict(
        "differential oracles",
        ok,
        format!(
            "qr {:.1e}, svd {:.1e}, truncated {:.1e}, dexp {:.1e}, block {:.1e}, diagonal blocks {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst_block
        ),
    );
}

#[test]
fn exp_and_log_are_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut worst_rt, mut worst_iso) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let u = StiefelPoint::random(&mut rng, 60, 6);
        let norm = rng.random_range(0.05..=1.0);
        let delta = TangentVector::random(&mut rng, &u, norm);
        let target = stiefel_exp(&delta, 1.0);
        let back = stiefel_log(&u, &target, DEFAULT_LOG_TOL).unwrap();
        worst_rt = worst_rt.max((back.delta() - delta.delta()).norm());
        worst_iso = worst_iso.max((dist(&u, &target).unwrap() - norm).abs() / norm);
    }
    let ok = worst_rt <= ROUND_TRIP_TOL && worst_iso <= ISOMETRY_TOL;
    verdict("exp/log consistency", ok, format!("50 instances: round trip {worst_rt:.1e}, isometry {worst_iso:.1e}"));
}

#[test]
fn manifold_errors_do_not_exceed_tangent_errors() {
    let mut worst_ratio = 0.0f64;
    let mut violations = 0usize;
    let mut skipped = 0usize;
    let configs = [
        ExperimentConfig::svd_default(),
        ExperimentConfig { n: 1000, m: 100, r: 10, ..ExperimentConfig::svd_default() },
        ExperimentConfig { centering: Centering::PCentered, ..ExperimentConfig::svd_default() },
    ];
    for cfg in &configs {
        let rep = run_tangent_vs_manifold(cfg).unwrap();
        skipped += rep.log_failures_of("reference").map_or(0, |s| s.len());
        let tan = &rep.series("tangent").unwrap().errors;
        let man = &rep.series("manifold").unwrap().errors;
        for (t, m) in tan.iter().zip(man) {
            if *m > CURVATURE_FACTOR * t + CURVATURE_FLOOR {
                violations += 1;
            }
            if *t > CURVATURE_FLOOR {
                worst_ratio = worst_ratio.max(m / t);
            }
        }
    }
    let cases = [(0.3, 0.3, 0.1), (0.3, 0.3, 0.05), (0.2, 0.2, 0.2), (0.1, 0.1, 0.3)];
    let bounds = bound_check(40, 4, &cases, 0).unwrap();
    let bounds_ok = bounds.iter().all(|c| c.within(BOUND_SLACK));
    let first = bounds[0];
    let ok = violations == 0 && skipped == 0 && bounds_ok;
    verdict(
        "curvature behavior",
        ok,
        format!(
            "max manifold/tangent {worst_ratio:.4}, {violations} violations, {skipped} skipped; \
             St(40,4) d=0.3 s0=0.1: {:.5} in [{:.5}, {:.5}]",
            first.observed, first.curved, first.flat
        ),
    );
}

#[test]
fn snapshot_study_reproduces_failure_mode() {
    let cfg = ExperimentConfig::snapshot_default();
    let rep = run_snapshot_experiment(&cfg).unwrap();
    let dropped = rep.log_failures_of("rbf").unwrap_or(&[]).to_vec();
    let (h, g) = (rep.max_rel("hermite"), rep.max_rel("geodesic"));
    let close = |x: f64, want: f64| x <= SNAPSHOT_FACTOR * want && x >= want / SNAPSHOT_FACTOR;
    let ok = !dropped.is_empty()
        && rep.failures.is_empty()
        && matches!((h, g), (Some(h), Some(g)) if h < g && close(h, SNAPSHOT_HERMITE) && close(g, SNAPSHOT_GEODESIC));
    verdict(
        "snapshot failure mode",
        ok,
        format!("rbf dropped samples {dropped:?}; hermite {h:?}, geodesic {g:?}"),
    );
}

#[test]
fn evaluation_cost_is_counted_exactly() {
    let nodes = chebyshev_nodes(-1.0, 1.0, 5).unwrap();
    let (_, samples) = gen_qr_experiment(30, 3, &nodes, 9).unwrap();
    let samples: Vec<HermiteSample> = samples;
    let k = (samples.len() - 1) as u64;
    reset_call_counts();
    let curve = fit_composite(&samples, Centering::QCentered, &Default::default()).unwrap();
    let fit = call_counts();
    let mut per_eval_ok = true;
    let (a, b) = curve.domain();
    for i in 0..10 {
        let before = call_counts();
        curve.eval(a + (b - a) * i as f64 / 9.0).unwrap();
        let d = call_counts() - before;
        per_eval_ok &= d.exp == 1 && d.log == 0;
    }
    let ok = fit.log == 3 * k && fit.exp == 2 * k && per_eval_ok;
    verdict(
        "cost accounting",
        ok,
        format!("{k} arcs: {} log, {} exp to fit; one exp per evaluation: {per_eval_ok}", fit.log, fit.exp),
    );
}
