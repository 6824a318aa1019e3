//! Synthetic data, error studies and reports behind the CLI.
//!
//! Every experiment is a pure function of an [`ExperimentConfig`]; random
//! data comes from a `ChaCha8Rng` seeded with `config.seed`, so reports are
//! reproducible across platforms.

mod bound;
mod data;
mod report;
mod runs;

pub use bound::{bound_check, bound_csv, eval_distance_bound, BoundCase, BoundInputs, STIEFEL_MAX_CURVATURE};
pub use data::{
    gen_lowrank_svd_experiment, gen_qr_experiment, merge_params, normalized_svd_path, LowRankData,
    LowRankSample, QrPath, SnapshotFamily,
};
pub use report::{emit_report, parse_report, ErrorReport, ErrorKind, MethodFailure, Series};
pub use runs::{
    run_qr_interp, run_snapshot_experiment, run_svd_interp, run_tangent_vs_manifold,
    run_transport_accuracy, transport_csv, TransportRow, TRANSPORT_STEPS,
};

use std::fmt;
use std::str::FromStr;

use crate::calculus::{TransportOptions, DEFAULT_FD_STEP};
use crate::error::{Error, Result};
use crate::interpolate::Centering;
use crate::stiefel::DEFAULT_LOG_TOL;

/// Points on every evaluation grid.
pub const GRID_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Hermite,
    Geodesic,
    Rbf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Geodesic, Method::Rbf, Method::Hermite];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hermite => "hermite",
            Method::Geodesic => "geodesic",
            Method::Rbf => "rbf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hermite" => Ok(Method::Hermite),
            "geodesic" => Ok(Method::Geodesic),
            "rbf" => Ok(Method::Rbf),
            other => Err(Error::Precondition(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub interval: (f64, f64),
    pub num_nodes: usize,
    pub seed: u64,
    pub h: f64,
    pub tau: f64,
    pub centering: Centering,
    pub methods: Vec<Method>,
    pub rbf_shape: f64,
}

impl Default for ExperimentConfig {
    /// Desk-scale QR-factor setting: 6 Chebyshev nodes on `[-1.1, 1.1]`.
    fn default() -> Self {
        ExperimentConfig {
            n: 100,
            r: 6,
            m: 50,
            interval: (-1.1, 1.1),
            num_nodes: 6,
            seed: 0,
            h: DEFAULT_FD_STEP,
            tau: DEFAULT_LOG_TOL,
            centering: Centering::QCentered,
            methods: vec![Method::Geodesic, Method::Rbf, Method::Hermite],
            rbf_shape: 1.0,
        }
    }
}

impl ExperimentConfig {
    /// Low-rank SVD setting: 2 Chebyshev nodes on `[0, 0.5]`.
    pub fn svd_default() -> Self {
        ExperimentConfig {
            r: 10,
            m: 50,
            interval: (0.0, 0.5),
            num_nodes: 2,
            methods: vec![Method::Geodesic, Method::Hermite],
            ..Default::default()
        }
    }

    /// Function-snapshot setting: `n = 1001` grid points, 6 snapshots,
    /// 6 Chebyshev nodes in `mu` on `[1.7, 2.3]`.
    pub fn snapshot_default() -> Self {
        ExperimentConfig { n: 1001, r: 6, interval: (1.7, 2.3), ..Default::default() }
    }

    /// Transport-accuracy setting on snapshot data with `n = 200`.
    pub fn transport_default() -> Self {
        ExperimentConfig { n: 200, r: 6, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Precondition(msg));
        if self.r == 0 || self.n < self.r {
            return bad(format!("need n >= r > 0, got n = {}, r = {}", self.n, self.r));
        }
        if self.num_nodes < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.num_nodes));
        }
        if !(self.h > 0.0) || !(self.tau > 0.0) {
            return bad(format!("h and tau must be positive, got h = {}, tau = {}", self.h, self.tau));
        }
        if !(self.interval.0 < self.interval.1) {
            return bad(format!("empty interval [{}, {}]", self.interval.0, self.interval.1));
        }
        if !(self.rbf_shape > 0.0) {
            return bad(format!("rbf shape must be positive, got {}", self.rbf_shape));
        }
        Ok(())
    }

    pub fn transport_options(&self) -> TransportOptions {
        TransportOptions { h: self.h, tau: self.tau, ..Default::default() }
    }

    pub fn enabled(&self, method: Method) -> bool {
        self.methods.contains(&method)
    }

    /// Enabled methods in canonical column order.
    pub fn ordered_methods(&self) -> Vec<Method> {
        Method::ALL.into_iter().filter(|m| self.enabled(*m)).collect()
    }
}

/// Chebyshev roots `cos((2j+1) pi / 2k)` mapped affinely to `[a, b]`, ascending.
pub fn chebyshev_nodes(a: f64, b: f64, k: usize) -> Result<Vec<f64>> {
    if !(a < b) || k == 0 {
        return Err(Error::Precondition(format!("chebyshev_nodes: need a < b and k >= 1, got [{a}, {b}], k = {k}")));
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    Ok((0..k)
        .rev()
        .map(|j| {
            // the central root of an odd count is exactly zero
            let c = if 2 * j + 1 == k {
                0.0
            } else {
                ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * k) as f64).cos()
            };
            mid + half * c
        })
        .collect())
}

/// `count` equispaced points on `[a, b]` including both ends.
pub fn uniform_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count)
        .map(|i| if i + 1 == count { b } else { a + (b - a) * i as f64 / (count - 1) as f64 })
        .collect()
}
