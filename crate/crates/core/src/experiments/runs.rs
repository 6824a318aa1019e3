//! The interpolation studies: fit every enabled method to sampled data and
//! record its error against the reference on a uniform grid.

use nalgebra::DVector;

use super::data::{gen_lowrank_svd_experiment, gen_qr_experiment, merge_params, LowRankData, SnapshotFamily};
use super::report::{ErrorKind, ErrorReport, MethodFailure, Series};
use super::{chebyshev_nodes, uniform_grid, ExperimentConfig, Method, GRID_POINTS};
use crate::calculus::{validate_transport, TransportOptions};
use crate::error::{Error, Result};
use crate::interpolate::{
    fit_composite, geodesic_interp, piecewise_vector_hermite, piecewise_vector_linear, tangent_rbf_fit_partial,
    CompositeCurve, GeodesicCurve, HermiteSample, TangentRbf,
};
use crate::linalg::{rel_frobenius, Matrix};
use crate::stiefel::{dist, stiefel_exp, stiefel_log, StiefelPoint};

/// Step sizes scanned by the transport-accuracy study.
pub const TRANSPORT_STEPS: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

/// Parameters of the transport study on snapshot data: base `U(MU_P)`,
/// chart center `U(MU_Q)`, direction `Log_{U(MU_P)} U(MU_DIR)`.
const MU_P: f64 = 0.9;
const MU_Q: f64 = 1.4;
const MU_DIR: f64 = 1.9;

enum Fitted {
    Hermite(CompositeCurve),
    Geodesic(GeodesicCurve),
    Rbf(TangentRbf),
}

impl Fitted {
    fn eval(&self, t: f64) -> Result<StiefelPoint> {
        match self {
            Fitted::Hermite(c) => c.eval(t),
            Fitted::Geodesic(c) => c.eval(t),
            Fitted::Rbf(c) => Ok(c.eval(t)),
        }
    }
}

/// Fits `method`; the second value lists samples the RBF had to drop.
fn fit(method: Method, samples: &[HermiteSample], cfg: &ExperimentConfig) -> Result<(Fitted, Vec<usize>)> {
    let points = || samples.iter().map(|s| (s.t, s.point.clone())).collect::<Vec<_>>();
    match method {
        Method::Hermite => {
            Ok((Fitted::Hermite(fit_composite(samples, cfg.centering, &cfg.transport_options())?), vec![]))
        }
        Method::Geodesic => Ok((Fitted::Geodesic(geodesic_interp(&points(), cfg.tau)?), vec![])),
        Method::Rbf => {
            let (rbf, dropped) = tangent_rbf_fit_partial(&points(), cfg.rbf_shape, cfg.tau)?;
            Ok((Fitted::Rbf(rbf), dropped))
        }
    }
}

fn record(report: &mut ErrorReport, method: Method, outcome: Result<Vec<f64>>) {
    match outcome {
        Ok(errors) => report.series.push(Series { name: method.name().into(), errors }),
        Err(e) => report.failures.push(MethodFailure { method: method.name().into(), message: e.to_string() }),
    }
}

fn node_grid(cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let nodes = chebyshev_nodes(cfg.interval.0, cfg.interval.1, cfg.num_nodes)?;
    let grid = uniform_grid(nodes[0], nodes[nodes.len() - 1], GRID_POINTS);
    Ok((nodes, grid))
}

/// Errors `||X*(t) - X(t)||_F / ||X(t)||_F` of Stiefel-valued interpolants.
fn stiefel_report(
    cfg: &ExperimentConfig,
    samples: &[HermiteSample],
    grid: Vec<f64>,
    reference: &[StiefelPoint],
) -> ErrorReport {
    let mut report = ErrorReport::new(ErrorKind::Relative, grid);
    for method in cfg.ordered_methods() {
        let outcome = fit(method, samples, cfg).and_then(|(curve, dropped)| {
            if !dropped.is_empty() {
                report.log_failures.push((method.name().into(), dropped));
            }
            report
                .grid
                .iter()
                .zip(reference)
                .map(|(&t, x)| Ok(rel_frobenius(curve.eval(t)?.matrix(), x.matrix())))
                .collect()
        });
        record(&mut report, method, outcome);
    }
    report
}

/// Q-factor of a random cubic matrix path, sampled at Chebyshev nodes.
pub fn run_qr_interp(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let (nodes, grid) = node_grid(cfg)?;
    let (path, samples) = gen_qr_experiment(cfg.n, cfg.r, &nodes, cfg.seed)?;
    let reference = grid.iter().map(|&t| path.q(t)).collect::<Result<Vec<_>>>()?;
    Ok(stiefel_report(cfg, &samples, grid, &reference))
}

/// Left singular factors of function snapshots as a function of `mu`.
/// The RBF method typically loses samples far from its chart center.
pub fn run_snapshot_experiment(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let (nodes, grid) = node_grid(cfg)?;
    let family = SnapshotFamily::new(cfg.n, cfg.r)?;
    let anchor = merge_params(&nodes, &grid);
    let (scan, samples) = family.sampled_path(&anchor, &nodes)?;
    let reference: Vec<StiefelPoint> =
        grid.iter().map(|t| scan[anchor.iter().position(|a| a == t).unwrap_or(0)].clone()).collect();
    Ok(stiefel_report(cfg, &samples, grid, &reference))
}

/// Truncated SVD of a constant-rank product path: `U` and `V` interpolated on
/// their Stiefel manifolds, singular values by cubic Hermite (Hermite method)
/// or linearly (other methods). Error is measured on the product.
pub fn run_svd_interp(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let (nodes, grid) = node_grid(cfg)?;
    let (data, samples) = gen_lowrank_svd_experiment(cfg.n, cfg.m, cfg.r, &nodes, cfg.seed)?;
    let u_samples: Vec<HermiteSample> = samples.iter().map(|s| s.u.clone()).collect();
    let v_samples: Vec<HermiteSample> = samples.iter().map(|s| s.v.clone()).collect();
    let sig: Vec<DVector<f64>> = samples.iter().map(|s| s.sigma.clone()).collect();
    let sig_dot: Vec<DVector<f64>> = samples.iter().map(|s| s.sigma_dot.clone()).collect();
    let reference: Vec<Matrix> = grid.iter().map(|&t| data.w(t)).collect();

    let mut report = ErrorReport::new(ErrorKind::Relative, grid);
    for method in cfg.ordered_methods() {
        let outcome = (|| {
            let (u_fit, u_drop) = fit(method, &u_samples, cfg)?;
            let (v_fit, v_drop) = fit(method, &v_samples, cfg)?;
            let mut dropped = u_drop;
            dropped.extend(v_drop);
            dropped.sort_unstable();
            dropped.dedup();
            if !dropped.is_empty() {
                report.log_failures.push((method.name().into(), dropped));
            }
            report
                .grid
                .iter()
                .zip(&reference)
                .map(|(&t, w)| {
                    let s = match method {
                        Method::Hermite => piecewise_vector_hermite(&nodes, &sig, &sig_dot, t)?,
                        _ => piecewise_vector_linear(&nodes, &sig, t)?,
                    };
                    let approx = u_fit.eval(t)?.matrix() * Matrix::from_diagonal(&s) * v_fit.eval(t)?.matrix().transpose();
                    Ok(rel_frobenius(&approx, w))
                })
                .collect()
        })();
        record(&mut report, method, outcome);
    }
    Ok(report)
}

/// Hermite interpolation of the `U` factor of low-rank data, comparing the
/// tangent-space error `||gamma(t) - Log_q U(t)||` at each arc center `q`
/// with the manifold error `dist(Exp_q gamma(t), U(t))`. Grid points whose
/// reference log does not converge are dropped and listed under `reference`.
pub fn run_tangent_vs_manifold(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let (nodes, grid) = node_grid(cfg)?;
    let (data, _) = gen_lowrank_svd_experiment(cfg.n, cfg.m, cfg.r, &nodes, cfg.seed)?;
    tangent_vs_manifold_on(cfg, &data, &nodes, &grid)
}

fn tangent_vs_manifold_on(
    cfg: &ExperimentConfig,
    data: &LowRankData,
    nodes: &[f64],
    grid: &[f64],
) -> Result<ErrorReport> {
    let anchor = merge_params(nodes, grid);
    let (scan, samples) = data.sampled_path(&anchor, nodes)?;
    let u_samples: Vec<HermiteSample> = samples.into_iter().map(|s| s.u).collect();
    let curve = fit_composite(&u_samples, cfg.centering, &cfg.transport_options())?;

    let mut kept = Vec::new();
    let mut tangent = Vec::new();
    let mut manifold = Vec::new();
    let mut skipped = Vec::new();
    for (g, &t) in grid.iter().enumerate() {
        let exact = &scan[anchor.iter().position(|&a| a == t).unwrap_or(0)];
        let arc = &curve.arcs[curve.arc_index(t)?];
        let gamma = arc.tangent_at(t)?;
        let errs = stiefel_log(&arc.center, exact, cfg.tau).and_then(|log_exact| {
            let tan_err = (&gamma - &log_exact).norm();
            let man_err = dist(&stiefel_exp(&gamma, 1.0), exact)?;
            Ok((tan_err, man_err))
        });
        match errs {
            Ok((a, b)) => {
                kept.push(t);
                tangent.push(a);
                manifold.push(b);
            }
            Err(e) if e.is_convergence_failure() => skipped.push(g),
            Err(e) => return Err(e),
        }
    }
    let mut report = ErrorReport::new(ErrorKind::Absolute, kept);
    report.series.push(Series { name: "tangent".into(), errors: tangent });
    report.series.push(Series { name: "manifold".into(), errors: manifold });
    if !skipped.is_empty() {
        report.log_failures.push(("reference".into(), skipped));
    }
    Ok(report)
}

/// One row of the transport-accuracy table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportRow {
    pub h: f64,
    pub rel_err: f64,
}

/// Round trip `v -> d(Log_q)_p v -> dExp` on snapshot data for each step size.
/// Uses `cfg.n`, `cfg.r`, `cfg.tau`; `cfg.h` is ignored in favor of `steps`.
pub fn run_transport_accuracy(cfg: &ExperimentConfig, steps: &[f64]) -> Result<Vec<TransportRow>> {
    if cfg.r == 0 || cfg.n < cfg.r || !(cfg.tau > 0.0) {
        return Err(Error::Precondition(format!("need n >= r > 0 and tau > 0, got n = {}, r = {}", cfg.n, cfg.r)));
    }
    let family = SnapshotFamily::new(cfg.n, cfg.r)?;
    // fine scan so the sign continuation cannot skip a flip
    let scan_len = 101;
    let anchor = uniform_grid(MU_P, MU_DIR, scan_len);
    let path = family.u_path(&anchor)?;
    let p = &path[0];
    let mid = (scan_len - 1) / 2;
    debug_assert!((anchor[mid] - MU_Q).abs() < 1e-12);
    let q = &path[mid];
    let v = stiefel_log(p, &path[scan_len - 1], cfg.tau)?;
    steps
        .iter()
        .map(|&h| {
            let opts = TransportOptions { h, tau: cfg.tau, ..Default::default() };
            Ok(TransportRow { h, rel_err: validate_transport(q, &v, &opts)? })
        })
        .collect()
}

/// `h,rel_err` CSV for the transport table.
pub fn transport_csv(rows: &[TransportRow]) -> String {
    let mut out = String::from("h,rel_err\n");
    for row in rows {
        out.push_str(&format!("{:?},{:?}\n", row.h, row.rel_err));
    }
    out
}
