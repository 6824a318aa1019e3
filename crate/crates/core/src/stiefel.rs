//! Geometry of `St(n, r)` under the canonical metric.

use std::cell::Cell;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, block2x2, expm, logm, Matrix, RANK_TOL};

/// Default convergence threshold for [`stiefel_log`].
pub const DEFAULT_LOG_TOL: f64 = 1e-14;
/// Iteration cap for [`stiefel_log`].
pub const MAX_LOG_ITERATIONS: usize = 100;

const ORTHONORMALITY_TOL: f64 = 1e-10;
const TANGENCY_TOL: f64 = 1e-8;
const BASE_MATCH_TOL: f64 = 1e-12;

thread_local! {
    static EXP_CALLS: Cell<u64> = const { Cell::new(0) };
    static LOG_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Riemannian Exp/Log evaluations on the current thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CallCounts {
    pub exp: u64,
    pub log: u64,
}

impl Sub for CallCounts {
    type Output = CallCounts;
    fn sub(self, rhs: Self) -> Self {
        CallCounts { exp: self.exp - rhs.exp, log: self.log - rhs.log }
    }
}

pub fn call_counts() -> CallCounts {
    CallCounts { exp: EXP_CALLS.with(Cell::get), log: LOG_CALLS.with(Cell::get) }
}

pub fn reset_call_counts() {
    EXP_CALLS.with(|c| c.set(0));
    LOG_CALLS.with(|c| c.set(0));
}

/// An `n x r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    u: Matrix,
}

impl StiefelPoint {
    pub fn new(u: Matrix) -> Result<Self> {
        let (n, r) = u.shape();
        if r == 0 || n < r {
            return Err(Error::Dimension(format!("St(n, r) needs n >= r > 0, got {n}x{r}")));
        }
        let err = (u.transpose() * &u - Matrix::identity(r, r)).norm();
        if err > ORTHONORMALITY_TOL {
            return Err(Error::Precondition(format!(
                "columns are not orthonormal (||U^T U - I||_F = {err:.3e})"
            )));
        }
        Ok(StiefelPoint { u })
    }

    /// Q factor of the sign-normalized QR of `a`.
    pub fn orthonormalize(a: &Matrix) -> Result<Self> {
        let qr = linalg::qr_econ(a)?;
        if qr.is_rank_deficient() {
            return Err(Error::Domain("cannot orthonormalize a rank-deficient matrix".into()));
        }
        Ok(StiefelPoint { u: qr.q })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> Self {
        let a = Matrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
        Self::orthonormalize(&a).expect("random matrix is full rank")
    }

    pub(crate) fn new_unchecked(u: Matrix) -> Self {
        StiefelPoint { u }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.u
    }

    pub fn into_matrix(self) -> Matrix {
        self.u
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn r(&self) -> usize {
        self.u.ncols()
    }

    fn same_as(&self, other: &StiefelPoint) -> bool {
        self.u.shape() == other.u.shape() && (&self.u - &other.u).norm() <= BASE_MATCH_TOL
    }
}

/// A tangent vector `delta` at `base`, i.e. `base^T delta` is skew.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: StiefelPoint,
    delta: Matrix,
}

impl TangentVector {
    /// Rejects `delta` unless `||U^T D + D^T U||_F <= 1e-8 max(1, ||D||_F)`.
    pub fn new(base: StiefelPoint, delta: Matrix) -> Result<Self> {
        if delta.shape() != base.u.shape() {
            return Err(Error::Dimension(format!(
                "tangent {:?} does not match base {:?}",
                delta.shape(),
                base.u.shape()
            )));
        }
        let utd = base.u.transpose() * &delta;
        let defect = (&utd + utd.transpose()).norm();
        if defect > TANGENCY_TOL * delta.norm().max(1.0) {
            return Err(Error::Precondition(format!(
                "matrix is not tangent (||U^T D + D^T U||_F = {defect:.3e})"
            )));
        }
        Ok(TangentVector { base, delta })
    }

    pub(crate) fn new_unchecked(base: StiefelPoint, delta: Matrix) -> Self {
        TangentVector { base, delta }
    }

    pub fn zero(base: StiefelPoint) -> Self {
        let delta = Matrix::zeros(base.n(), base.r());
        TangentVector { base, delta }
    }

    /// Random tangent vector with canonical norm `norm`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, base: &StiefelPoint, norm: f64) -> Self {
        let x = Matrix::from_fn(base.n(), base.r(), |_, _| rng.random_range(-1.0..1.0));
        let v = project_tangent(base, &x).expect("dimensions match");
        let scale = norm / v.norm();
        v * scale
    }

    pub fn base(&self) -> &StiefelPoint {
        &self.base
    }

    pub fn delta(&self) -> &Matrix {
        &self.delta
    }

    pub fn into_delta(self) -> Matrix {
        self.delta
    }

    /// Canonical norm.
    pub fn norm(&self) -> f64 {
        metric_unchecked(&self.base, &self.delta, &self.delta).max(0.0).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        TangentVector { base: self.base.clone(), delta: &self.delta * s }
    }

    /// Same matrix, re-attached to a different (numerically equal) base point.
    pub(crate) fn with_delta(&self, delta: Matrix) -> Self {
        TangentVector { base: self.base.clone(), delta }
    }

    fn check_same_base(&self, other: &TangentVector) -> Result<()> {
        if self.base.same_as(&other.base) {
            Ok(())
        } else {
            Err(Error::Precondition("tangent vectors live at different base points".into()))
        }
    }

    /// Linear combination `sum c_i v_i` of tangent vectors at one base point.
    pub fn combine(terms: &[(f64, &TangentVector)]) -> Result<TangentVector> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Precondition("empty linear combination".into()))?;
        let mut delta = Matrix::zeros(first.base.n(), first.base.r());
        for (c, v) in terms {
            first.check_same_base(v)?;
            delta += &v.delta * *c;
        }
        Ok(first.with_delta(delta))
    }
}

impl Mul<f64> for TangentVector {
    type Output = TangentVector;
    fn mul(mut self, s: f64) -> TangentVector {
        self.delta *= s;
        self
    }
}

impl Neg for TangentVector {
    type Output = TangentVector;
    fn neg(self) -> TangentVector {
        self * -1.0
    }
}

impl Add for &TangentVector {
    type Output = TangentVector;
    /// Panics when the base points differ.
    fn add(self, rhs: &TangentVector) -> TangentVector {
        self.check_same_base(rhs).expect("base points differ");
        self.with_delta(&self.delta + &rhs.delta)
    }
}

impl Sub for &TangentVector {
    type Output = TangentVector;
    /// Panics when the base points differ.
    fn sub(self, rhs: &TangentVector) -> TangentVector {
        self.check_same_base(rhs).expect("base points differ");
        self.with_delta(&self.delta - &rhs.delta)
    }
}

/// `delta = u a + q r_factor` with `a` skew and `q` orthonormal, orthogonal to `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalSplit {
    pub a: Matrix,
    pub q: Matrix,
    pub r_factor: Matrix,
}

/// Orthogonal projection onto `T_U St(n, r)`: `x - U sym(U^T x)`.
pub fn project_tangent(base: &StiefelPoint, x: &Matrix) -> Result<TangentVector> {
    if x.shape() != base.u.shape() {
        return Err(Error::Dimension(format!(
            "cannot project {:?} onto the tangent space at a {:?} point",
            x.shape(),
            base.u.shape()
        )));
    }
    let utx = base.u.transpose() * x;
    let delta = x - &base.u * linalg::sym(&utx);
    Ok(TangentVector::new_unchecked(base.clone(), delta))
}

fn metric_unchecked(base: &StiefelPoint, x: &Matrix, y: &Matrix) -> f64 {
    let ux = base.u.transpose() * x;
    let uy = base.u.transpose() * y;
    x.dot(y) - 0.5 * ux.dot(&uy)
}

/// Canonical metric `tr(X^T (I - U U^T / 2) Y)`.
pub fn metric(xi: &TangentVector, eta: &TangentVector) -> Result<f64> {
    xi.check_same_base(eta)?;
    Ok(metric_unchecked(&xi.base, &xi.delta, &eta.delta))
}

/// QR of the component of `x` normal to `span(u)`.
///
/// Rows of `R` that vanish (below [`RANK_TOL`] relative to `||x||_F`) are
/// zeroed and the matching `Q` columns replaced by an orthonormal completion
/// against `u` and the retained columns. Those columns never contribute to
/// `Q R`, so the geodesic formula is unaffected.
pub(crate) fn normal_qr(u: &Matrix, x: &Matrix) -> (Matrix, Matrix) {
    let mut normal = x - u * (u.transpose() * x);
    normal -= u * (u.transpose() * &normal);
    let r = x.ncols();
    let n = x.nrows();
    let qr = linalg::qr_econ(&normal).expect("normal component has n >= r");
    let (mut q, mut r_factor) = (qr.q, qr.r_factor);
    let thresh = RANK_TOL * x.norm().max(normal.norm());
    let dead: Vec<usize> = (0..r)
        .filter(|&i| r_factor.row(i).iter().all(|v| v.abs() <= thresh))
        .collect();
    if dead.is_empty() {
        return (q, r_factor);
    }
    for &i in &dead {
        r_factor.row_mut(i).fill(0.0);
    }
    let live: Vec<usize> = (0..r).filter(|i| !dead.contains(i)).collect();
    if u.ncols() + r > n {
        // no room for an orthogonal completion; the columns are inert anyway
        for &i in &dead {
            q.column_mut(i).fill(0.0);
        }
        return (q, r_factor);
    }
    let mut basis = Matrix::zeros(n, u.ncols() + live.len());
    basis.view_mut((0, 0), u.shape()).copy_from(u);
    for (k, &i) in live.iter().enumerate() {
        basis.set_column(u.ncols() + k, &q.column(i));
    }
    let extra = linalg::extend_orthonormal(&basis, dead.len());
    for (k, &i) in dead.iter().enumerate() {
        q.set_column(i, &extra.column(k));
    }
    (q, r_factor)
}

/// Splits a tangent vector into its vertical part `U A` and the QR factors
/// of its normal part `(I - U U^T) delta = Q R`.
pub fn split_tangent(xi: &TangentVector) -> HorizontalSplit {
    let u = &xi.base.u;
    let a = linalg::skew(&(u.transpose() * &xi.delta));
    let (q, r_factor) = normal_qr(u, &xi.delta);
    HorizontalSplit { a, q, r_factor }
}

/// `[[A, -R^T], [R, 0]]`.
pub(crate) fn geodesic_generator(a: &Matrix, r_factor: &Matrix) -> Matrix {
    let r = a.nrows();
    block2x2(a, &(-r_factor.transpose()), r_factor, &Matrix::zeros(r, r))
}

/// Point `Exp_U(t delta)` on the canonical-metric geodesic.
pub fn stiefel_exp(xi: &TangentVector, t: f64) -> StiefelPoint {
    EXP_CALLS.with(|c| c.set(c.get() + 1));
    exp_uncounted(xi, t)
}

pub(crate) fn exp_uncounted(xi: &TangentVector, t: f64) -> StiefelPoint {
    if t == 0.0 || xi.delta.iter().all(|&v| v == 0.0) {
        return xi.base.clone();
    }
    let r = xi.base.r();
    let split = split_tangent(xi);
    let gen = geodesic_generator(&split.a, &split.r_factor) * t;
    let e = expm(&gen).expect("generator is square and finite");
    let u = &xi.base.u * e.view((0, 0), (r, r)) + &split.q * e.view((r, 0), (r, r));
    StiefelPoint::new_unchecked(u)
}

/// Riemannian logarithm `Log_base(target)` by the iterative block-orthogonal
/// scheme: complete `(M; N)` to an orthogonal `V`, then rotate the lower-right
/// block until the lower-right block of `log(V)` drops below `tau`.
///
/// The completion is aligned so its lower block is symmetric positive
/// semidefinite. If the aligned `V` reverses orientation the target counts as
/// out of reach and a no-convergence error is returned.
pub fn stiefel_log(base: &StiefelPoint, target: &StiefelPoint, tau: f64) -> Result<TangentVector> {
    LOG_CALLS.with(|c| c.set(c.get() + 1));
    if base.u.shape() != target.u.shape() {
        return Err(Error::Dimension(format!(
            "log between {:?} and {:?} points",
            base.u.shape(),
            target.u.shape()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Precondition(format!("log tolerance must be positive, got {tau}")));
    }
    let r = base.r();
    let u = &base.u;
    let m = u.transpose() * &target.u;
    let (q, n) = normal_qr(u, &target.u);

    let mut mn = Matrix::zeros(2 * r, r);
    mn.view_mut((0, 0), (r, r)).copy_from(&m);
    mn.view_mut((r, 0), (r, r)).copy_from(&n);
    let completion = linalg::orth_complete(&mn)
        .map_err(|e| Error::Numerical { op: "stiefel_log", msg: e.to_string() })?;
    let completion = align_completion(completion, r);
    let mut v = linalg::hstack(&mn, &completion);
    if v.determinant() < 0.0 {
        // V0 has eigenvalue -1, so log(V0) has no real principal branch: the
        // target is outside the region the iteration can reach
        return Err(Error::NoConvergence {
            op: "stiefel_log (orientation-reversing completion)",
            iterations: 0,
            residual: f64::INFINITY,
        });
    }

    let mut last = f64::INFINITY;
    for iter in 0..MAX_LOG_ITERATIONS {
        let log_v = logm(&v).map_err(|_| Error::NoConvergence {
            op: "stiefel_log",
            iterations: iter,
            residual: last,
        })?;
        let log_v = linalg::skew(&log_v);
        let c = log_v.view((r, r), (r, r)).into_owned();
        last = c.norm();
        if last <= tau {
            let a = log_v.view((0, 0), (r, r));
            let b = log_v.view((r, 0), (r, r));
            let delta = u * a + &q * b;
            return Ok(TangentVector::new_unchecked(base.clone(), delta));
        }
        if !last.is_finite() {
            break;
        }
        let phi = expm(&(-c))?;
        let right = v.columns(r, r) * phi;
        v.view_mut((0, r), (2 * r, r)).copy_from(&right);
    }
    Err(Error::NoConvergence { op: "stiefel_log", iterations: MAX_LOG_ITERATIONS, residual: last })
}

/// Rotates the completion `(X0; Y0)` by the orthogonal polar factor of
/// `Y0`, so that the new lower block is symmetric positive semidefinite. Any
/// completion is admissible; this one starts the iteration as close to the
/// identity as the data allows and keeps `log(V0)` away from the branch cut
/// when the two points are close.
fn align_completion(completion: Matrix, r: usize) -> Matrix {
    let y0 = completion.view((r, 0), (r, r)).into_owned();
    let svd = y0.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(a), Some(b_t)) => completion * (b_t.transpose() * a.transpose()),
        _ => completion,
    }
}

/// Riemannian distance `||Log_p(q)||`, using [`DEFAULT_LOG_TOL`].
pub fn dist(p: &StiefelPoint, q: &StiefelPoint) -> Result<f64> {
    Ok(stiefel_log(p, q, DEFAULT_LOG_TOL)?.norm())
}
