//! Quasi-cubic Hermite interpolation on `St(n, r)` and two baselines.
//!
//! A Hermite arc lives in normal coordinates around one endpoint (the
//! "center"): the far endpoint is represented by its Riemannian log, the far
//! velocity by its transport into the center's tangent space, and the cubic
//! Hermite combination of these tangent vectors is mapped back with a single
//! Riemannian exponential. Arcs glue into a `C^1` composite curve.

use nalgebra::DVector;

use crate::calculus::{transport_velocity, TransportOptions};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stiefel::{stiefel_exp, stiefel_log, StiefelPoint, TangentVector, DEFAULT_LOG_TOL};

/// Relative length below which a subinterval is rejected.
const DEGENERATE_SPAN: f64 = 1e-12;

/// Values of the four cubic Hermite basis polynomials at one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteCoeffs {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
}

/// Cubic Hermite basis on `[t0, t1]`: `a0`/`a1` carry the endpoint values,
/// `b0`/`b1` the endpoint derivatives.
pub fn hermite_coeffs(t: f64, t0: f64, t1: f64) -> Result<HermiteCoeffs> {
    if !(t0 < t1) {
        return Err(Error::Domain(format!("hermite_coeffs: need t0 < t1, got [{t0}, {t1}]")));
    }
    let h = t1 - t0;
    let x = (t - t0) / h;
    let x2 = x * x;
    let cubic = x2 * (x - 1.0);
    Ok(HermiteCoeffs {
        a0: 1.0 - x2 + 2.0 * cubic,
        a1: x2 - 2.0 * cubic,
        b0: h * (x - x2 + cubic),
        b1: h * cubic,
    })
}

/// Derivatives of the basis polynomials with respect to `t`.
pub fn hermite_coeff_derivs(t: f64, t0: f64, t1: f64) -> Result<HermiteCoeffs> {
    if !(t0 < t1) {
        return Err(Error::Domain(format!("hermite_coeffs: need t0 < t1, got [{t0}, {t1}]")));
    }
    let h = t1 - t0;
    let x = (t - t0) / h;
    let d_cubic = 3.0 * x * x - 2.0 * x;
    Ok(HermiteCoeffs {
        a0: (-2.0 * x + 2.0 * d_cubic) / h,
        a1: (2.0 * x - 2.0 * d_cubic) / h,
        b0: 1.0 - 2.0 * x + d_cubic,
        b1: d_cubic,
    })
}

/// Euclidean cubic Hermite curve `a0 p + a1 q + b0 v0 + b1 v1`.
pub fn euclid_hermite(
    p: &Matrix,
    q: &Matrix,
    v0: &Matrix,
    v1: &Matrix,
    t: f64,
    t0: f64,
    t1: f64,
) -> Result<Matrix> {
    let shape = p.shape();
    if q.shape() != shape || v0.shape() != shape || v1.shape() != shape {
        return Err(Error::Dimension("euclid_hermite: data shapes differ".into()));
    }
    let c = hermite_coeffs(t, t0, t1)?;
    Ok(p * c.a0 + q * c.a1 + v0 * c.b0 + v1 * c.b1)
}

/// Scalar variant used for singular values.
pub fn scalar_hermite(p: f64, q: f64, v0: f64, v1: f64, t: f64, t0: f64, t1: f64) -> Result<f64> {
    let c = hermite_coeffs(t, t0, t1)?;
    Ok(c.a0 * p + c.a1 * q + c.b0 * v0 + c.b1 * v1)
}

/// One sampled datum `(t, f(t), f'(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSample {
    pub t: f64,
    pub point: StiefelPoint,
    pub velocity: TangentVector,
}

impl HermiteSample {
    pub fn new(t: f64, point: StiefelPoint, velocity: TangentVector) -> Result<Self> {
        if velocity.base() != &point {
            return Err(Error::Precondition("sample velocity is not attached to the sample point".into()));
        }
        Ok(HermiteSample { t, point, velocity })
    }
}

/// Which endpoint of an arc serves as the center of the normal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    /// Center at the right endpoint `q = f(t1)`.
    #[default]
    QCentered,
    /// Center at the left endpoint `p = f(t0)`.
    PCentered,
}

/// Precomputed data of one quasi-cubic arc. All tangent vectors are attached
/// to `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteArc {
    pub t0: f64,
    pub t1: f64,
    pub center: StiefelPoint,
    /// Log of the non-center endpoint.
    pub far_log: TangentVector,
    /// Velocity at `t0` expressed in the center's tangent space.
    pub v_hat_start: TangentVector,
    /// Velocity at `t1` expressed in the center's tangent space.
    pub v_hat_end: TangentVector,
    pub centering: Centering,
}

impl HermiteArc {
    /// The tangent-space Hermite curve `gamma(t)` at the center.
    pub fn tangent_at(&self, t: f64) -> Result<TangentVector> {
        let c = hermite_coeffs(t, self.t0, self.t1)?;
        let far_coeff = match self.centering {
            Centering::QCentered => c.a0,
            Centering::PCentered => c.a1,
        };
        TangentVector::combine(&[
            (far_coeff, &self.far_log),
            (c.b0, &self.v_hat_start),
            (c.b1, &self.v_hat_end),
        ])
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t1
    }
}

/// Builds the arc between two samples: one Log for the far endpoint plus one
/// velocity transport (two Exp and two Log evaluations with the geodesic curve).
pub fn fit_arc(
    s0: &HermiteSample,
    s1: &HermiteSample,
    centering: Centering,
    opts: &TransportOptions,
) -> Result<HermiteArc> {
    if !(s0.t < s1.t) {
        return Err(Error::Domain(format!("fit_arc: need t0 < t1, got [{}, {}]", s0.t, s1.t)));
    }
    let (center, far, far_velocity) = match centering {
        Centering::QCentered => (&s1.point, &s0.point, &s0.velocity),
        Centering::PCentered => (&s0.point, &s1.point, &s1.velocity),
    };
    let far_log = stiefel_log(center, far, opts.tau)?;
    let transported = transport_velocity(center, far_velocity, opts)?;
    let (v_hat_start, v_hat_end) = match centering {
        Centering::QCentered => (transported, s1.velocity.clone()),
        Centering::PCentered => (s0.velocity.clone(), transported),
    };
    Ok(HermiteArc {
        t0: s0.t,
        t1: s1.t,
        center: center.clone(),
        far_log,
        v_hat_start,
        v_hat_end,
        centering,
    })
}

/// Evaluates an arc with a single Riemannian exponential.
pub fn eval_arc(arc: &HermiteArc, t: f64) -> Result<StiefelPoint> {
    if !arc.contains(t) {
        return Err(Error::Domain(format!("t = {t} outside arc [{}, {}]", arc.t0, arc.t1)));
    }
    Ok(stiefel_exp(&arc.tangent_at(t)?, 1.0))
}

/// Piecewise quasi-cubic Hermite curve over `[knots[0], knots[k]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeCurve {
    pub arcs: Vec<HermiteArc>,
    pub knots: Vec<f64>,
}

impl CompositeCurve {
    /// Index of the arc used for `t`: `[t_i, t_{i+1})` maps to `i`, `t_k` to the last arc.
    pub fn arc_index(&self, t: f64) -> Result<usize> {
        locate(&self.knots, t)
    }

    pub fn eval(&self, t: f64) -> Result<StiefelPoint> {
        let i = self.arc_index(t)?;
        eval_arc(&self.arcs[i], t)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }
}

fn locate(knots: &[f64], t: f64) -> Result<usize> {
    let k = knots.len() - 1;
    if !(t >= knots[0] && t <= knots[k]) {
        return Err(Error::Domain(format!("t = {t} outside [{}, {}]", knots[0], knots[k])));
    }
    // first knot strictly greater than t, minus one
    let upper = knots.partition_point(|&x| x <= t);
    Ok(upper.saturating_sub(1).min(k - 1))
}

fn check_knots(ts: &[f64]) -> Result<()> {
    if ts.len() < 2 {
        return Err(Error::Precondition(format!("need at least 2 samples, got {}", ts.len())));
    }
    let span = ts[ts.len() - 1] - ts[0];
    for (i, w) in ts.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::Precondition(format!(
                "sample parameters must increase strictly (index {i}: {} then {})",
                w[0], w[1]
            )));
        }
        if w[1] - w[0] < DEGENERATE_SPAN * span {
            return Err(Error::Precondition(format!("degenerate subinterval {i}: [{}, {}]", w[0], w[1])));
        }
    }
    Ok(())
}

/// Fits one arc per consecutive pair of samples: `3k` Log and `2k` Exp
/// evaluations for `k` arcs.
pub fn fit_composite(
    samples: &[HermiteSample],
    centering: Centering,
    opts: &TransportOptions,
) -> Result<CompositeCurve> {
    let knots: Vec<f64> = samples.iter().map(|s| s.t).collect();
    check_knots(&knots)?;
    let arcs = samples
        .windows(2)
        .enumerate()
        .map(|(index, pair)| {
            fit_arc(&pair[0], &pair[1], centering, opts).map_err(|e| Error::Subinterval {
                index,
                t0: pair[0].t,
                t1: pair[1].t,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompositeCurve { arcs, knots })
}

/// Piecewise geodesic interpolation: the manifold analogue of linear
/// interpolation, ignoring velocity data.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicCurve {
    pub knots: Vec<f64>,
    pub points: Vec<StiefelPoint>,
    /// `Log_{p_i}(p_{i+1})` per subinterval.
    pub logs: Vec<TangentVector>,
}

impl GeodesicCurve {
    pub fn eval(&self, t: f64) -> Result<StiefelPoint> {
        let i = locate(&self.knots, t)?;
        let x = (t - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        if x == 1.0 {
            return Ok(self.points[i + 1].clone());
        }
        Ok(stiefel_exp(&self.logs[i], x))
    }
}

pub fn geodesic_interp(samples: &[(f64, StiefelPoint)], tau: f64) -> Result<GeodesicCurve> {
    let knots: Vec<f64> = samples.iter().map(|s| s.0).collect();
    check_knots(&knots)?;
    let logs = samples
        .windows(2)
        .enumerate()
        .map(|(index, pair)| {
            stiefel_log(&pair[0].1, &pair[1].1, tau).map_err(|e| Error::Subinterval {
                index,
                t0: pair[0].0,
                t1: pair[1].0,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeodesicCurve { knots, points: samples.iter().map(|s| s.1.clone()).collect(), logs })
}

/// Inverse multiquadric `1 / sqrt(1 + (shape d)^2)`.
fn inverse_multiquadric(d: f64, shape: f64) -> f64 {
    1.0 / (1.0 + (shape * d).powi(2)).sqrt()
}

/// RBF interpolation of all samples mapped to the tangent space at the
/// middle sample `floor(k / 2)`, evaluated through the Riemannian exponential.
/// Parameters are rescaled affinely to `[-1, 1]` before the kernel is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentRbf {
    pub center: StiefelPoint,
    pub center_index: usize,
    /// Parameters of the samples actually interpolated.
    pub knots: Vec<f64>,
    pub shape: f64,
    lo: f64,
    hi: f64,
    /// One coefficient matrix per knot.
    weights: Vec<Matrix>,
}

impl TangentRbf {
    fn rescale(&self, t: f64) -> f64 {
        if self.hi > self.lo {
            2.0 * (t - self.lo) / (self.hi - self.lo) - 1.0
        } else {
            0.0
        }
    }

    pub fn tangent_at(&self, t: f64) -> TangentVector {
        let x = self.rescale(t);
        let mut delta = Matrix::zeros(self.center.n(), self.center.r());
        for (w, &tk) in self.weights.iter().zip(&self.knots) {
            delta += w * inverse_multiquadric(x - self.rescale(tk), self.shape);
        }
        TangentVector::zero(self.center.clone()).with_delta(delta)
    }

    pub fn eval(&self, t: f64) -> StiefelPoint {
        stiefel_exp(&self.tangent_at(t), 1.0)
    }
}

/// Fits the tangent-space RBF on every sample whose log to the center
/// converges. Returns the interpolant and the indices that had to be dropped.
pub fn tangent_rbf_fit_partial(
    samples: &[(f64, StiefelPoint)],
    shape: f64,
    tau: f64,
) -> Result<(TangentRbf, Vec<usize>)> {
    if samples.is_empty() {
        return Err(Error::Precondition("tangent RBF needs at least one sample".into()));
    }
    if !(shape > 0.0) {
        return Err(Error::Precondition(format!("RBF shape must be positive, got {shape}")));
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    if ts.len() > 1 {
        check_knots(&ts)?;
    }
    let center_index = samples.len() / 2;
    let center = samples[center_index].1.clone();
    let mut failed = Vec::new();
    let mut kept: Vec<(f64, TangentVector)> = Vec::new();
    for (i, (t, p)) in samples.iter().enumerate() {
        if i == center_index {
            kept.push((*t, TangentVector::zero(center.clone())));
            continue;
        }
        match stiefel_log(&center, p, tau) {
            Ok(v) => kept.push((*t, v)),
            Err(e) if e.is_convergence_failure() => failed.push(i),
            Err(e) => return Err(e),
        }
    }
    let (lo, hi) = (ts[0], ts[ts.len() - 1]);
    let mut rbf = TangentRbf {
        center: center.clone(),
        center_index,
        knots: kept.iter().map(|k| k.0).collect(),
        shape,
        lo,
        hi,
        weights: Vec::new(),
    };
    let count = kept.len();
    let xs: Vec<f64> = rbf.knots.iter().map(|&t| rbf.rescale(t)).collect();
    let kernel = Matrix::from_fn(count, count, |i, j| inverse_multiquadric(xs[i] - xs[j], shape));
    let entries = center.n() * center.r();
    let rhs = Matrix::from_fn(count, entries, |i, e| kept[i].1.delta()[e]);
    let sol = kernel
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical { op: "tangent_rbf", msg: "singular kernel matrix".into() })?;
    rbf.weights = (0..count)
        .map(|i| Matrix::from_iterator(center.n(), center.r(), sol.row(i).iter().copied()))
        .collect();
    Ok((rbf, failed))
}

/// Strict variant: fails with the list of samples whose log did not converge.
pub fn tangent_rbf_interp(samples: &[(f64, StiefelPoint)], shape: f64) -> Result<TangentRbf> {
    let (rbf, failed) = tangent_rbf_fit_partial(samples, shape, DEFAULT_LOG_TOL)?;
    if failed.is_empty() {
        Ok(rbf)
    } else {
        Err(Error::LogFailures { indices: failed })
    }
}

/// Interpolates a vector-valued quantity (e.g. singular values) with scalar
/// cubic Hermite per entry, piecewise over `knots`.
pub fn piecewise_vector_hermite(
    knots: &[f64],
    values: &[DVector<f64>],
    derivs: &[DVector<f64>],
    t: f64,
) -> Result<DVector<f64>> {
    let i = locate(knots, t)?;
    let (t0, t1) = (knots[i], knots[i + 1]);
    let c = hermite_coeffs(t, t0, t1)?;
    Ok(&values[i] * c.a0 + &values[i + 1] * c.a1 + &derivs[i] * c.b0 + &derivs[i + 1] * c.b1)
}

/// Piecewise linear counterpart of [`piecewise_vector_hermite`].
pub fn piecewise_vector_linear(knots: &[f64], values: &[DVector<f64>], t: f64) -> Result<DVector<f64>> {
    let i = locate(knots, t)?;
    let x = (t - knots[i]) / (knots[i + 1] - knots[i]);
    Ok(&values[i] * (1.0 - x) + &values[i + 1] * x)
}
