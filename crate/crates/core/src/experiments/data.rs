//! Synthetic parameter-dependent matrices and their sampled factors.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{diff_qr, diff_svd, diff_svd_truncated, svd_sign_normalize};
use crate::error::{Error, Result};
use crate::interpolate::HermiteSample;
use crate::linalg::{qr_econ, svd_full, FullSvd, Matrix};
use crate::stiefel::{StiefelPoint, TangentVector};

/// Attempts with fresh seeds before a generator gives up.
const MAX_RESEEDS: u64 = 10;

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..hi))
}

/// Evaluates `sum_i t^i c_i` and its `t`-derivative.
fn poly_and_deriv(coeffs: &[Matrix], t: f64) -> (Matrix, Matrix) {
    let (rows, cols) = coeffs[0].shape();
    let mut val = Matrix::zeros(rows, cols);
    let mut der = Matrix::zeros(rows, cols);
    // Horner on both
    for c in coeffs.iter().rev() {
        der = der * t + &val;
        val = val * t + c;
    }
    (val, der)
}

fn tangent_at(point: &StiefelPoint, delta: Matrix) -> Result<TangentVector> {
    TangentVector::new(point.clone(), delta)
}

/// `Y(t) = Y0 + t Y1 + t^2 Y2 + t^3 Y3` with Q-factor path `Q(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrPath {
    pub coeffs: [Matrix; 4],
    /// Seed that produced the data; differs from the requested one after a reseed.
    pub seed: u64,
}

impl QrPath {
    pub fn y(&self, t: f64) -> Matrix {
        poly_and_deriv(&self.coeffs, t).0
    }

    pub fn y_dot(&self, t: f64) -> Matrix {
        poly_and_deriv(&self.coeffs, t).1
    }

    pub fn q(&self, t: f64) -> Result<StiefelPoint> {
        let qr = qr_econ(&self.y(t))?;
        if qr.is_rank_deficient() {
            return Err(Error::Domain(format!("Y({t}) is rank deficient")));
        }
        Ok(StiefelPoint::new_unchecked(qr.q))
    }

    /// `(Q(t), Qdot(t))` from the QR factorization and its derivative.
    pub fn sample(&self, t: f64) -> Result<HermiteSample> {
        let (y, y_dot) = poly_and_deriv(&self.coeffs, t);
        let qr = qr_econ(&y)?;
        if qr.is_rank_deficient() {
            return Err(Error::Domain(format!("Y({t}) is rank deficient")));
        }
        let d = diff_qr(&y, &y_dot, &qr)?;
        let point = StiefelPoint::new_unchecked(qr.q);
        let velocity = tangent_at(&point, d.q_dot)?;
        HermiteSample::new(t, point, velocity)
    }
}

/// Random cubic path in `R^{n x r}`: `Y0` entries from `[0,1]`, `Y1, Y2` from
/// `[0,0.5]`, `Y3` from `[0,0.2]`. Returns the path and the samples at `nodes`.
/// A rank-deficient node triggers a retry with the next seed.
pub fn gen_qr_experiment(n: usize, r: usize, nodes: &[f64], seed: u64) -> Result<(QrPath, Vec<HermiteSample>)> {
    let mut last_err = None;
    for attempt in 0..MAX_RESEEDS {
        let s = seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let coeffs = [
            uniform_matrix(&mut rng, n, r, 1.0),
            uniform_matrix(&mut rng, n, r, 0.5),
            uniform_matrix(&mut rng, n, r, 0.5),
            uniform_matrix(&mut rng, n, r, 0.2),
        ];
        let path = QrPath { coeffs, seed: s };
        match nodes.iter().map(|&t| path.sample(t)).collect::<Result<Vec<_>>>() {
            Ok(samples) => return Ok((path, samples)),
            Err(e @ Error::Domain(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Domain("no usable seed".into())))
}

/// Sign-normalizes a sequence of SVDs by continuation: the leading `rank`
/// left singular vectors of each entry are flipped to agree with the previous
/// entry. The first entry keeps the factorization's own signs.
pub fn normalized_svd_path(ys: &[Matrix], rank: usize) -> Result<Vec<FullSvd>> {
    let mut out: Vec<FullSvd> = Vec::with_capacity(ys.len());
    for y in ys {
        let mut svd = svd_full(y)?;
        if let Some(prev) = out.last() {
            let u_r = svd.u.columns(0, rank).into_owned();
            let ref_r = prev.u.columns(0, rank).into_owned();
            let (u_n, v_n) = svd_sign_normalize(&u_r, &svd.v, &ref_r)?;
            svd.u.columns_mut(0, rank).copy_from(&u_n);
            svd.v = v_n;
        }
        out.push(svd);
    }
    Ok(out)
}

/// Sampled truncated-SVD factors of `W(t)` at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankSample {
    pub t: f64,
    pub u: HermiteSample,
    pub v: HermiteSample,
    pub sigma: DVector<f64>,
    pub sigma_dot: DVector<f64>,
}

/// `W(t) = Y(t) Z(t)` of constant rank `r`, `Y` cubic (`n x r`) and `Z`
/// quadratic (`r x m`).
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankData {
    pub y: [Matrix; 4],
    pub z: [Matrix; 3],
    pub rank: usize,
    pub seed: u64,
}

impl LowRankData {
    pub fn w(&self, t: f64) -> Matrix {
        poly_and_deriv(&self.y, t).0 * poly_and_deriv(&self.z, t).0
    }

    /// Product rule `Ydot Z + Y Zdot`.
    pub fn w_dot(&self, t: f64) -> Matrix {
        let (y, yd) = poly_and_deriv(&self.y, t);
        let (z, zd) = poly_and_deriv(&self.z, t);
        yd * &z + y * zd
    }

    /// Sign-continued SVDs of `W` at ascending parameters `ts`.
    pub fn svd_path(&self, ts: &[f64]) -> Result<Vec<FullSvd>> {
        let ws: Vec<Matrix> = ts.iter().map(|&t| self.w(t)).collect();
        normalized_svd_path(&ws, self.rank)
    }

    /// Truncated samples at ascending `nodes`, signs continued from the first node.
    pub fn samples(&self, nodes: &[f64]) -> Result<Vec<LowRankSample>> {
        let svds = self.svd_path(nodes)?;
        nodes
            .iter()
            .zip(svds)
            .map(|(&t, svd)| self.sample_from(t, &svd))
            .collect()
    }

    /// Leading left factors along the ascending scan `anchor` and the samples
    /// at `nodes` (all contained in `anchor`), with signs continued along the scan.
    pub fn sampled_path(&self, anchor: &[f64], nodes: &[f64]) -> Result<(Vec<StiefelPoint>, Vec<LowRankSample>)> {
        let svds = self.svd_path(anchor)?;
        let samples = nodes
            .iter()
            .map(|&t| self.sample_from(t, &svds[anchor_index(anchor, t)?]))
            .collect::<Result<Vec<_>>>()?;
        let reference =
            svds.iter().map(|s| StiefelPoint::new_unchecked(s.u.columns(0, self.rank).into_owned())).collect();
        Ok((reference, samples))
    }

    fn sample_from(&self, t: f64, svd: &FullSvd) -> Result<LowRankSample> {
        let r = self.rank;
        let w = self.w(t);
        let d = diff_svd_truncated(&w, &self.w_dot(t), svd, r)?;
        let (u_r, sigma, v_r) = svd.truncate(r);
        let u = StiefelPoint::new_unchecked(u_r);
        let v = StiefelPoint::new_unchecked(v_r);
        let u_vel = tangent_at(&u, d.u_dot)?;
        let v_vel = tangent_at(&v, d.v_dot)?;
        Ok(LowRankSample {
            t,
            u: HermiteSample::new(t, u, u_vel)?,
            v: HermiteSample::new(t, v, v_vel)?,
            sigma,
            sigma_dot: d.sigma_dot,
        })
    }
}

/// Random rank-`r` product path with `n x m` values (`n >= m >= r`). `Y`
/// entries from `[0,1]` (`Y0`) and `[0,0.5]` (`Y1..Y3`), `Z0` from `[0,1]`,
/// `Z1, Z2` from `[0,0.5]`. Nodes with nearly repeated leading singular
/// values trigger a retry with the next seed.
pub fn gen_lowrank_svd_experiment(
    n: usize,
    m: usize,
    r: usize,
    nodes: &[f64],
    seed: u64,
) -> Result<(LowRankData, Vec<LowRankSample>)> {
    if !(n >= m && m >= r && r > 0) {
        return Err(Error::Precondition(format!("need n >= m >= r > 0, got n = {n}, m = {m}, r = {r}")));
    }
    let mut last_err = None;
    for attempt in 0..MAX_RESEEDS {
        let s = seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let y = [
            uniform_matrix(&mut rng, n, r, 1.0),
            uniform_matrix(&mut rng, n, r, 0.5),
            uniform_matrix(&mut rng, n, r, 0.5),
            uniform_matrix(&mut rng, n, r, 0.5),
        ];
        let z = [
            uniform_matrix(&mut rng, r, m, 1.0),
            uniform_matrix(&mut rng, r, m, 0.5),
            uniform_matrix(&mut rng, r, m, 0.5),
        ];
        let data = LowRankData { y, z, rank: r, seed: s };
        match data.samples(nodes) {
            Ok(samples) => return Ok((data, samples)),
            Err(e @ Error::Domain(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Domain("no usable seed".into())))
}

/// Discretized `F(x, t, mu) = f / ||f||_{L2}` with `f = x^t sin(pi/2 mu x)`
/// on an equispaced `x`-grid over `[0, 1]`, one column per snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFamily {
    pub x: Vec<f64>,
    pub times: Vec<f64>,
}

impl SnapshotFamily {
    /// `n` grid points and `r` snapshot times equispaced in `[1, 4]`.
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if n < 2 || r == 0 || n < r {
            return Err(Error::Precondition(format!("snapshot family needs n >= max(2, r), r >= 1; got n = {n}, r = {r}")));
        }
        let x = super::uniform_grid(0.0, 1.0, n);
        let times = if r == 1 { vec![1.0] } else { super::uniform_grid(1.0, 4.0, r) };
        Ok(SnapshotFamily { x, times })
    }

    fn trapz_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.x.len() - 1 {
            let dx = self.x[i + 1] - self.x[i];
            acc += 0.5 * dx * (a[i] * b[i] + a[i + 1] * b[i + 1]);
        }
        acc
    }

    /// `(f, d f / d mu)` on the grid at time `t`.
    fn raw(&self, t: f64, mu: f64) -> (Vec<f64>, Vec<f64>) {
        let half_pi = 0.5 * std::f64::consts::PI;
        self.x
            .iter()
            .map(|&x| {
                let xt = x.powf(t);
                let arg = half_pi * mu * x;
                (xt * arg.sin(), xt * arg.cos() * half_pi * x)
            })
            .unzip()
    }

    /// Snapshot matrix `Y(mu)` and its `mu`-derivative.
    pub fn matrix_and_deriv(&self, mu: f64) -> Result<(Matrix, Matrix)> {
        let n = self.x.len();
        let r = self.times.len();
        let mut y = Matrix::zeros(n, r);
        let mut yd = Matrix::zeros(n, r);
        for (j, &t) in self.times.iter().enumerate() {
            let (f, df) = self.raw(t, mu);
            let norm2 = self.trapz_inner(&f, &f);
            if !(norm2 > 0.0) {
                return Err(Error::Domain(format!("snapshot at t = {t}, mu = {mu} vanishes")));
            }
            let norm = norm2.sqrt();
            let proj = self.trapz_inner(&f, &df) / (norm2 * norm);
            for i in 0..n {
                y[(i, j)] = f[i] / norm;
                yd[(i, j)] = df[i] / norm - proj * f[i];
            }
        }
        Ok((y, yd))
    }

    pub fn matrix(&self, mu: f64) -> Result<Matrix> {
        Ok(self.matrix_and_deriv(mu)?.0)
    }

    /// L2 norm of column `j` under the trapezoidal rule.
    pub fn column_norm(&self, y: &Matrix, j: usize) -> f64 {
        let col: Vec<f64> = y.column(j).iter().copied().collect();
        self.trapz_inner(&col, &col).sqrt()
    }

    /// Left singular factors `U(mu)` along ascending `mus`, signs continued.
    pub fn u_path(&self, mus: &[f64]) -> Result<Vec<StiefelPoint>> {
        let ys = mus.iter().map(|&mu| self.matrix(mu)).collect::<Result<Vec<_>>>()?;
        Ok(normalized_svd_path(&ys, self.times.len())?
            .into_iter()
            .map(|s| StiefelPoint::new_unchecked(s.u))
            .collect())
    }

    /// Smallest singular value of `Y(mu)`.
    pub fn smallest_sigma(&self, mu: f64) -> Result<f64> {
        let svd = svd_full(&self.matrix(mu)?)?;
        Ok(svd.sigma[svd.sigma.len() - 1])
    }

    /// Reference factors along the ascending scan `anchor` together with
    /// Hermite samples `(U, Udot)` at `nodes`, which must all appear in
    /// `anchor`. Signs are continued along the whole scan so samples and
    /// reference agree.
    pub fn sampled_path(&self, anchor: &[f64], nodes: &[f64]) -> Result<(Vec<StiefelPoint>, Vec<HermiteSample>)> {
        let ys = anchor.iter().map(|&mu| self.matrix_and_deriv(mu)).collect::<Result<Vec<_>>>()?;
        let mats: Vec<Matrix> = ys.iter().map(|p| p.0.clone()).collect();
        let svds = normalized_svd_path(&mats, self.times.len())?;
        let samples = nodes
            .iter()
            .map(|&mu| {
                let k = anchor_index(anchor, mu)?;
                let d = diff_svd(&ys[k].0, &ys[k].1, &svds[k])?;
                let point = StiefelPoint::new_unchecked(svds[k].u.clone());
                let vel = tangent_at(&point, d.u_dot)?;
                HermiteSample::new(mu, point, vel)
            })
            .collect::<Result<Vec<_>>>()?;
        let reference = svds.into_iter().map(|s| StiefelPoint::new_unchecked(s.u)).collect();
        Ok((reference, samples))
    }
}

fn anchor_index(anchor: &[f64], t: f64) -> Result<usize> {
    anchor
        .iter()
        .position(|&a| a == t)
        .ok_or_else(|| Error::Precondition(format!("node {t} missing from the anchor scan")))
}

/// Ascending union of two ascending parameter lists, exact duplicates removed.
pub fn merge_params(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}
