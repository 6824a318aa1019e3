//! Dense kernels with the conventions the Stiefel layer relies on.
//!
//! All routines are pure functions on [`Matrix`] (`DMatrix<f64>`).

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// An `R` diagonal entry below `RANK_TOL * ||a||_F` counts as zero.
pub const RANK_TOL: f64 = 1e-13;

/// Nodes of the Gauss-Legendre rule used for the Padé approximant of `log(I + E)`.
const LOG_PADE_NODES: usize = 8;
/// Square roots are taken until `||X - I||_F` drops below this.
const LOG_SQRT_THRESHOLD: f64 = 0.25;
const MAX_SQRT_STEPS: usize = 64;
const MAX_DB_ITERATIONS: usize = 100;

/// Economy-size QR factorization with a nonnegative `R` diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct EconQR {
    pub q: Matrix,
    pub r_factor: Matrix,
    rank_deficient: bool,
}

impl EconQR {
    /// Set when some `R` diagonal entry is below [`RANK_TOL`] relative to the input norm.
    pub fn is_rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn recompose(&self) -> Matrix {
        &self.q * &self.r_factor
    }
}

/// Thin SVD `y = u diag(sigma) v^T` with a square orthogonal `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSvd {
    pub u: Matrix,
    pub sigma: DVector<f64>,
    pub v: Matrix,
}

impl FullSvd {
    pub fn recompose(&self) -> Matrix {
        &self.u * Matrix::from_diagonal(&self.sigma) * self.v.transpose()
    }

    /// Rank-`r` truncation `(U_r, sigma_r, V_r)`.
    pub fn truncate(&self, rank: usize) -> (Matrix, DVector<f64>, Matrix) {
        (
            self.u.columns(0, rank).into_owned(),
            self.sigma.rows(0, rank).into_owned(),
            self.v.columns(0, rank).into_owned(),
        )
    }
}

fn ensure_square(x: &Matrix, op: &str) -> Result<()> {
    if x.nrows() != x.ncols() || x.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{op} expects a non-empty square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

fn ensure_finite(x: &Matrix, op: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{op}: input contains NaN or Inf")))
    }
}

/// Matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(x: &Matrix) -> Result<Matrix> {
    ensure_square(x, "expm")?;
    ensure_finite(x, "expm")?;
    let e = x.exp();
    ensure_finite(&e, "expm")?;
    Ok(e)
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Repeated Denman-Beavers square roots bring the argument close to the
/// identity, then `log(I + E)` is evaluated with the Gauss-Legendre form of
/// the diagonal Padé approximant and scaled back by `2^s`.
pub fn logm(x: &Matrix) -> Result<Matrix> {
    ensure_square(x, "logm")?;
    ensure_finite(x, "logm")?;
    let dim = x.nrows();
    check_log_domain(x)?;

    let ident = Matrix::identity(dim, dim);
    let mut y = x.clone();
    let mut steps = 0usize;
    while (&y - &ident).norm() > LOG_SQRT_THRESHOLD {
        if steps == MAX_SQRT_STEPS {
            return Err(Error::Numerical {
                op: "logm",
                msg: format!("no reduction to a neighbourhood of I after {steps} square roots"),
            });
        }
        y = sqrtm_db(&y)?;
        steps += 1;
    }

    let e = &y - &ident;
    let (nodes, weights) = gauss_legendre_unit(LOG_PADE_NODES);
    let mut acc = Matrix::zeros(dim, dim);
    for (&node, &weight) in nodes.iter().zip(&weights) {
        let lhs = &ident + &e * node;
        let sol = lhs.lu().solve(&e).ok_or_else(|| Error::Numerical {
            op: "logm",
            msg: "singular system in Padé evaluation".into(),
        })?;
        acc += sol * weight;
    }
    acc *= 2f64.powi(steps as i32);
    ensure_finite(&acc, "logm")?;
    Ok(acc)
}

/// Rejects matrices with an eigenvalue on the closed negative real axis.
///
/// The real Schur iteration can stall on tightly clustered spectra (rotations
/// close to the identity); it is retried with a looser deflation tolerance,
/// and if that also stalls the check is skipped. The square-root iteration
/// still fails loudly on inputs outside the domain.
fn check_log_domain(x: &Matrix) -> Result<()> {
    let scale = x.norm().max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(x.clone(), f64::EPSILON, 10_000)
        .or_else(|| Schur::try_new(x.clone(), 1e-12, 10_000));
    let Some(schur) = schur else {
        return Ok(());
    };
    for ev in schur.complex_eigenvalues().iter() {
        if ev.re <= 1e-14 * scale && ev.im.abs() <= 1e-10 * scale {
            return Err(Error::Domain(format!(
                "logm: eigenvalue {:.3e}{:+.3e}i on the closed negative real axis",
                ev.re, ev.im
            )));
        }
    }
    Ok(())
}

/// Principal square root, Denman-Beavers iteration in product form.
fn sqrtm_db(x: &Matrix) -> Result<Matrix> {
    let dim = x.nrows();
    let ident = Matrix::identity(dim, dim);
    let mut m = x.clone();
    let mut y = x.clone();
    let mut finishing = 0usize;
    for iter in 0..MAX_DB_ITERATIONS {
        let m_inv = m.clone().try_inverse().ok_or(Error::Numerical {
            op: "logm",
            msg: format!("singular iterate in square root at step {iter}"),
        })?;
        y = &y * (&ident + &m_inv) * 0.5;
        m = (&ident + (&m + &m_inv) * 0.5) * 0.5;
        let residual = (&m - &ident).norm();
        if !residual.is_finite() {
            break;
        }
        if residual < 1e-7 {
            // quadratic convergence: two more sweeps reach machine precision
            finishing += 1;
            if finishing > 2 {
                return Ok(y);
            }
        }
    }
    Err(Error::NoConvergence {
        op: "matrix square root",
        iterations: MAX_DB_ITERATIONS,
        residual: (&m - &ident).norm(),
    })
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss_legendre_unit(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let n = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..count {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - z);
        nodes[count - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[count - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Economy QR with the nonnegative-diagonal sign convention.
///
/// The sign fix makes the factors a continuous function of `a` on the
/// full-rank stratum. Rank deficiency is flagged, not rejected.
pub fn qr_econ(a: &Matrix) -> Result<EconQR> {
    let (n, r) = a.shape();
    if n < r || r == 0 {
        return Err(Error::Dimension(format!("qr_econ needs n >= r > 0, got {n}x{r}")));
    }
    ensure_finite(a, "qr_econ")?;
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r_factor = qr.r();
    for i in 0..r {
        if r_factor[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
            r_factor.row_mut(i).neg_mut();
        }
    }
    let thresh = RANK_TOL * a.norm();
    let rank_deficient = (0..r).any(|i| r_factor[(i, i)] <= thresh);
    Ok(EconQR { q, r_factor, rank_deficient })
}

/// Thin SVD with singular values in descending order and full square `v`.
pub fn svd_full(y: &Matrix) -> Result<FullSvd> {
    let (n, m) = y.shape();
    if n < m || m == 0 {
        return Err(Error::Dimension(format!("svd_full needs n >= m > 0, got {n}x{m}")));
    }
    ensure_finite(y, "svd_full")?;
    let svd = y.clone().svd(true, true);
    let u = svd.u.ok_or(Error::Numerical { op: "svd_full", msg: "no U".into() })?;
    let v_t = svd.v_t.ok_or(Error::Numerical { op: "svd_full", msg: "no V".into() })?;
    Ok(FullSvd { u, sigma: svd.singular_values, v: v_t.transpose() })
}

/// Columns completing an orthonormal `v_r` (m x r) to an m x m orthogonal matrix.
pub fn orth_complete(v_r: &Matrix) -> Result<Matrix> {
    let (m, r) = v_r.shape();
    if r > m {
        return Err(Error::Dimension(format!("orth_complete: {m}x{r} has more columns than rows")));
    }
    let gram_err = (v_r.transpose() * v_r - Matrix::identity(r, r)).norm();
    if gram_err > 1e-10 {
        return Err(Error::Precondition(format!(
            "orth_complete: input columns not orthonormal (||V^T V - I||_F = {gram_err:.3e})"
        )));
    }
    Ok(extend_orthonormal(v_r, m - r))
}

/// Appends `count` orthonormal columns orthogonal to the orthonormal `basis`.
///
/// Candidates are unit vectors `e_i`; each step takes the one with the
/// largest residual against the current basis (lowest index on ties), then
/// applies two rounds of modified Gram-Schmidt.
pub(crate) fn extend_orthonormal(basis: &Matrix, count: usize) -> Matrix {
    let m = basis.nrows();
    let mut cols: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut row_weight: Vec<f64> = (0..m).map(|i| basis.row(i).norm_squared()).collect();
    let mut out = Matrix::zeros(m, count);
    for k in 0..count {
        let pick = row_weight
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &w)| if w < best.1 { (i, w) } else { best })
            .0;
        let mut v = DVector::zeros(m);
        v[pick] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v.axpy(-proj, c, 1.0);
            }
        }
        let nrm = v.norm();
        v /= nrm;
        for (i, w) in row_weight.iter_mut().enumerate() {
            *w += v[i] * v[i];
        }
        out.set_column(k, &v);
        cols.push(v);
    }
    out
}

/// Skew-symmetric part `(x - x^T) / 2`.
pub fn skew(x: &Matrix) -> Matrix {
    (x - x.transpose()) * 0.5
}

/// Symmetric part `(x + x^T) / 2`.
pub fn sym(x: &Matrix) -> Matrix {
    (x + x.transpose()) * 0.5
}

/// Assembles `[[a, b], [c, d]]`.
pub fn block2x2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Matrix {
    let (r0, c0) = a.shape();
    let (r1, c1) = d.shape();
    debug_assert_eq!(b.shape(), (r0, c1));
    debug_assert_eq!(c.shape(), (r1, c0));
    let mut out = Matrix::zeros(r0 + r1, c0 + c1);
    out.view_mut((0, 0), (r0, c0)).copy_from(a);
    out.view_mut((0, c0), (r0, c1)).copy_from(b);
    out.view_mut((r0, 0), (r1, c0)).copy_from(c);
    out.view_mut((r0, c0), (r1, c1)).copy_from(d);
    out
}

/// `[a, b]` side by side.
pub fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// `||a - b||_F / ||b||_F`, or the absolute difference when `b` vanishes.
pub fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}
