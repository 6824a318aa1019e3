//! Differentials of QR, SVD and the Stiefel exponential, plus the
//! finite-difference transport of velocities between tangent spaces.

use nalgebra::DVector;

use crate::error::{Error, Result, TransportSide};
use crate::linalg::{self, expm, EconQR, FullSvd, Matrix, RANK_TOL};
use crate::stiefel::{
    geodesic_generator, split_tangent, stiefel_exp, stiefel_log, StiefelPoint, TangentVector,
    DEFAULT_LOG_TOL,
};

/// Default central-difference step for velocity transport.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Relative singular value gap below which SVD differentiation is refused.
pub const SINGULAR_GAP_TOL: f64 = 1e-8;

/// Derivatives of the QR factors along `t(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QRDerivative {
    pub q_dot: Matrix,
    pub r_dot: Matrix,
}

/// Derivatives of (possibly truncated) SVD factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SVDDerivative {
    pub u_dot: Matrix,
    pub sigma_dot: DVector<f64>,
    pub v_dot: Matrix,
}

/// `exp_m = expm(M)` and `dexp_block = d/dt expm(M + t Mdot)` read off the
/// exponential of the block upper-triangular matrix `[[M, Mdot], [0, M]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockExpResult {
    pub exp_m: Matrix,
    pub dexp_block: Matrix,
    /// The full exponential of the doubled block matrix.
    pub block_exp: Matrix,
}

/// Differentiates `t = Q R` along the direction `t_dot`.
pub fn diff_qr(t: &Matrix, t_dot: &Matrix, qr: &EconQR) -> Result<QRDerivative> {
    let (n, r) = t.shape();
    if t_dot.shape() != (n, r) || qr.q.shape() != (n, r) || qr.r_factor.shape() != (r, r) {
        return Err(Error::Dimension("diff_qr: inconsistent shapes".into()));
    }
    let thresh = RANK_TOL * t.norm();
    if (0..r).any(|i| qr.r_factor[(i, i)].abs() <= thresh) {
        return Err(Error::Domain("diff_qr: R is singular".into()));
    }
    let q = &qr.q;
    let r_mat = &qr.r_factor;
    let r_inv = r_mat
        .clone()
        .solve_upper_triangular(&Matrix::identity(r, r))
        .ok_or_else(|| Error::Domain("diff_qr: R is singular".into()))?;

    let qt_tdot = q.transpose() * t_dot;
    let mut l = &qt_tdot * &r_inv;
    // keep the strictly lower triangle
    for j in 0..r {
        for i in 0..=j {
            l[(i, j)] = 0.0;
        }
    }
    let x = &l - l.transpose();
    let mut r_dot = &qt_tdot - &x * r_mat;
    for j in 0..r {
        for i in (j + 1)..r {
            r_dot[(i, j)] = 0.0;
        }
    }
    let q_dot = (t_dot - q * &qt_tdot) * &r_inv + q * &x;
    Ok(QRDerivative { q_dot, r_dot })
}

fn check_singular_gaps(sigma: &DVector<f64>, count: usize) -> Result<()> {
    let smax = sigma[0];
    if !(smax > 0.0) {
        return Err(Error::Domain("SVD differentiation: zero matrix".into()));
    }
    let take = count.min(sigma.len());
    if sigma[take - 1] <= RANK_TOL * smax {
        return Err(Error::Domain(format!(
            "SVD differentiation: singular value {} vanishes",
            take - 1
        )));
    }
    for i in 0..count.min(sigma.len() - 1) {
        if sigma[i] - sigma[i + 1] < SINGULAR_GAP_TOL * smax {
            return Err(Error::Domain(format!(
                "SVD differentiation: singular values {i} and {} are (nearly) repeated",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Derivative of the full thin SVD `y = U diag(sigma) V^T`.
///
/// All singular values must be positive and mutually distinct.
pub fn diff_svd(y: &Matrix, y_dot: &Matrix, svd: &FullSvd) -> Result<SVDDerivative> {
    let m = y.ncols();
    if y_dot.shape() != y.shape() || svd.u.shape() != y.shape() || svd.v.shape() != (m, m) {
        return Err(Error::Dimension("diff_svd: inconsistent shapes".into()));
    }
    check_singular_gaps(&svd.sigma, m)?;
    let sigma = &svd.sigma;
    let p = svd.u.transpose() * y_dot * &svd.v;
    let sigma_dot = p.diagonal();
    let gamma = Matrix::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            (sigma[i] * p[(i, j)] + sigma[j] * p[(j, i)])
                / ((sigma[j] + sigma[i]) * (sigma[j] - sigma[i]))
        }
    });
    let v_dot = &svd.v * &gamma;
    let sig = Matrix::from_diagonal(sigma);
    let sig_inv = Matrix::from_diagonal(&sigma.map(|s| 1.0 / s));
    let u_dot =
        (y_dot * &svd.v + &svd.u * (&sig * &gamma - Matrix::from_diagonal(&sigma_dot))) * sig_inv;
    Ok(SVDDerivative { u_dot, sigma_dot, v_dot })
}

/// Derivative of the rank-`rank` truncation of `y`.
///
/// `svd.v` must be the full square orthogonal factor. The products
/// `sigma_i u_i` for the discarded indices are formed as `y v_i`, so only the
/// leading left singular vectors are ever touched; for exactly rank-`rank`
/// data this reduces to `Gamma_ij = u_j^T y_dot v_i / sigma_j`.
pub fn diff_svd_truncated(
    y: &Matrix,
    y_dot: &Matrix,
    svd: &FullSvd,
    rank: usize,
) -> Result<SVDDerivative> {
    let m = y.ncols();
    if y_dot.shape() != y.shape() || svd.v.shape() != (m, m) || svd.u.ncols() < rank {
        return Err(Error::Dimension("diff_svd_truncated: inconsistent shapes".into()));
    }
    if rank == 0 || rank > m {
        return Err(Error::Dimension(format!("diff_svd_truncated: rank {rank} out of 1..={m}")));
    }
    check_singular_gaps(&svd.sigma, rank)?;
    let sigma = &svd.sigma;
    let u_r = svd.u.columns(0, rank);
    let v = &svd.v;
    let v_r = v.columns(0, rank);

    // ydot_v[:, j] = y_dot v_j ; y_v[:, i] = y v_i = sigma_i u_i
    let ydot_v = y_dot * v;
    let y_v = y * v;
    let sigma_dot = DVector::from_fn(rank, |j, _| u_r.column(j).dot(&ydot_v.column(j)));
    let gamma = Matrix::from_fn(m, rank, |i, j| {
        if i == j {
            return 0.0;
        }
        let si = if i < rank { sigma[i] } else { y_v.column(i).norm() };
        let num = y_v.column(i).dot(&ydot_v.column(j)) + sigma[j] * u_r.column(j).dot(&ydot_v.column(i));
        num / ((sigma[j] + si) * (sigma[j] - si))
    });
    let v_dot = v * &gamma;
    let sig_r_inv = Matrix::from_diagonal(&sigma.rows(0, rank).map(|s| 1.0 / s));
    // differentiate y v_r = u_r sigma_r; y v_dot = (y v) gamma
    let u_dot = (y_dot * v_r + &y_v * &gamma - u_r * Matrix::from_diagonal(&sigma_dot)) * sig_r_inv;
    Ok(SVDDerivative { u_dot, sigma_dot, v_dot })
}

/// Flips column signs of `(u_t, v_t)` so that `diag(u_t^T u_ref) >= 0`.
pub fn svd_sign_normalize(u_t: &Matrix, v_t: &Matrix, u_ref: &Matrix) -> Result<(Matrix, Matrix)> {
    let k = u_t.ncols();
    if v_t.ncols() < k || u_ref.shape() != u_t.shape() {
        return Err(Error::Dimension("svd_sign_normalize: column counts disagree".into()));
    }
    let mut u = u_t.clone();
    let mut v = v_t.clone();
    for j in 0..k {
        let d = u.column(j).dot(&u_ref.column(j));
        if d == 0.0 {
            return Err(Error::Domain(format!(
                "svd_sign_normalize: column {j} is orthogonal to the reference, sign undefined"
            )));
        }
        if d < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    Ok((u, v))
}

/// Directional derivative of `expm` at `m` along `m_dot` by exponentiating
/// `[[M, Mdot], [0, M]]`.
pub fn mathias_dexp(m: &Matrix, m_dot: &Matrix) -> Result<BlockExpResult> {
    if m.nrows() != m.ncols() || m.shape() != m_dot.shape() {
        return Err(Error::Dimension("mathias_dexp: expects equal square blocks".into()));
    }
    let k = m.nrows();
    let block = linalg::block2x2(m, m_dot, &Matrix::zeros(k, k), m);
    let block_exp = expm(&block)?;
    Ok(BlockExpResult {
        exp_m: block_exp.view((0, 0), (k, k)).into_owned(),
        dexp_block: block_exp.view((0, k), (k, k)).into_owned(),
        block_exp,
    })
}

/// `d/dt|_0 Exp_U(xi0 + t v)` via the product rule on
/// `(U, Q(t)) expm(M(t)) (I; 0)`.
///
/// `Q(t) R(t)` is the QR path of the normal component, differentiated with
/// [`diff_qr`]; the matrix exponential derivative comes from
/// [`mathias_dexp`].
pub fn dexp_stiefel(xi0: &TangentVector, v: &TangentVector) -> Result<Matrix> {
    let u_pt = xi0.base();
    if u_pt.matrix().shape() != v.base().matrix().shape()
        || (u_pt.matrix() - v.base().matrix()).norm() > 1e-12
    {
        return Err(Error::Precondition("dexp_stiefel: vectors at different base points".into()));
    }
    if xi0.delta().iter().all(|&x| x == 0.0) {
        return Ok(v.delta().clone());
    }
    let u = u_pt.matrix();
    let r = u_pt.r();
    let normal0 = xi0.delta() - u * (u.transpose() * xi0.delta());
    let qr = linalg::qr_econ(&normal0)?;
    if qr.is_rank_deficient() {
        return Err(Error::Domain(
            "dexp_stiefel: normal component is rank deficient, QR path not differentiable".into(),
        ));
    }
    let normal_dot = v.delta() - u * (u.transpose() * v.delta());
    let dqr = diff_qr(&normal0, &normal_dot, &qr)?;

    let a0 = linalg::skew(&(u.transpose() * xi0.delta()));
    let a_dot = linalg::skew(&(u.transpose() * v.delta()));
    let m = geodesic_generator(&a0, &qr.r_factor);
    let m_dot = geodesic_generator(&a_dot, &dqr.r_dot);
    let blocks = mathias_dexp(&m, &m_dot)?;
    let e21 = blocks.exp_m.view((r, 0), (r, r));
    let d11 = blocks.dexp_block.view((0, 0), (r, r));
    let d21 = blocks.dexp_block.view((r, 0), (r, r));
    Ok(&dqr.q_dot * e21 + u * d11 + &qr.q * d21)
}

/// Curves through `p` with initial velocity `v_p` used to differentiate the
/// chart transition `Log_q o gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurveKind {
    #[default]
    Geodesic,
    Cayley,
    PolarRetraction,
    QrRetraction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    pub h: f64,
    pub curve: CurveKind,
    pub tau: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { h: DEFAULT_FD_STEP, curve: CurveKind::Geodesic, tau: DEFAULT_LOG_TOL }
    }
}

/// Point at parameter `s` on the chosen curve through `v.base()` with velocity `v`.
pub fn curve_point(v: &TangentVector, s: f64, kind: CurveKind) -> Result<StiefelPoint> {
    let u = v.base().matrix();
    let r = v.base().r();
    match kind {
        CurveKind::Geodesic => Ok(stiefel_exp(v, s)),
        CurveKind::Cayley => {
            let split = split_tangent(v);
            let m0 = geodesic_generator(&split.a, &split.r_factor) * (0.5 * s);
            let ident = Matrix::identity(2 * r, 2 * r);
            // (I - s/2 M0)^{-1} commutes with (I + s/2 M0)
            let cay = (&ident - &m0)
                .lu()
                .solve(&(&ident + &m0))
                .ok_or_else(|| Error::Numerical { op: "cayley", msg: "singular factor".into() })?;
            let out = u * cay.view((0, 0), (r, r)) + &split.q * cay.view((r, 0), (r, r));
            Ok(StiefelPoint::new_unchecked(out))
        }
        CurveKind::PolarRetraction => {
            let gram = v.delta().transpose() * v.delta();
            let eig = gram.symmetric_eigen();
            let scale = eig.eigenvalues.map(|l| 1.0 / (1.0 + s * s * l).sqrt());
            let inv_sqrt =
                &eig.eigenvectors * Matrix::from_diagonal(&scale) * eig.eigenvectors.transpose();
            Ok(StiefelPoint::new_unchecked((u + v.delta() * s) * inv_sqrt))
        }
        CurveKind::QrRetraction => {
            let qr = linalg::qr_econ(&(u + v.delta() * s))?;
            Ok(StiefelPoint::new_unchecked(qr.q))
        }
    }
}

/// Central-difference approximation of `d(Log_q)_p (v_p)`, `p = v_p.base()`.
///
/// With the geodesic curve this costs two Exp and two Log evaluations.
pub fn transport_velocity(
    q: &StiefelPoint,
    v_p: &TangentVector,
    opts: &TransportOptions,
) -> Result<TangentVector> {
    if !(opts.h > 0.0) {
        return Err(Error::Precondition(format!("FD step must be positive, got {}", opts.h)));
    }
    let plus = curve_point(v_p, opts.h, opts.curve)?;
    let minus = curve_point(v_p, -opts.h, opts.curve)?;
    let log_plus = stiefel_log(q, &plus, opts.tau)
        .map_err(|e| Error::Transport { side: TransportSide::Forward, source: Box::new(e) })?;
    let log_minus = stiefel_log(q, &minus, opts.tau)
        .map_err(|e| Error::Transport { side: TransportSide::Backward, source: Box::new(e) })?;
    let delta = (log_plus.delta() - log_minus.delta()) / (2.0 * opts.h);
    Ok(TangentVector::new_unchecked(q.clone(), delta))
}

/// Relative error `||v_rec - v_p||_p / ||v_p||_p` after transporting `v_p` to
/// `q` and mapping it back with [`dexp_stiefel`].
pub fn validate_transport(q: &StiefelPoint, v_p: &TangentVector, opts: &TransportOptions) -> Result<f64> {
    let v_hat = transport_velocity(q, v_p, opts)?;
    let delta_p = stiefel_log(q, v_p.base(), opts.tau)?;
    let v_rec = dexp_stiefel(&delta_p, &v_hat)?;
    let diff = v_p.with_delta(v_rec - v_p.delta());
    let base_norm = v_p.norm();
    if base_norm == 0.0 {
        return Ok(diff.norm());
    }
    Ok(diff.norm() / base_norm)
}

/// Convenience wrapper: `transport_velocity` with default options.
pub fn transport_default(q: &StiefelPoint, v_p: &TangentVector) -> Result<TangentVector> {
    transport_velocity(q, v_p, &TransportOptions::default())
}
