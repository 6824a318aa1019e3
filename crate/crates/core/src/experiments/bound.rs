//! Leading-order distance bound for perturbed normal coordinates, checked
//! against distances computed with the exact Exp and Log.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stiefel::{dist, metric, stiefel_exp, StiefelPoint, TangentVector};

/// Upper end of the sectional curvature range on the Stiefel manifold under
/// the canonical metric.
pub const STIEFEL_MAX_CURVATURE: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// `||Delta||`.
    pub delta: f64,
    /// `||Delta~||`.
    pub delta_tilde: f64,
    /// Angle between `Delta` and `Delta~`.
    pub s0: f64,
    pub curvature: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..1.0).contains(&x);
        if !unit(self.delta) || !unit(self.delta_tilde) {
            return Err(Error::Precondition(format!(
                "tangent norms must lie in [0, 1), got {} and {}",
                self.delta, self.delta_tilde
            )));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.s0) {
            return Err(Error::Precondition(format!("angle must lie in [0, pi/2], got {}", self.s0)));
        }
        if !self.curvature.is_finite() {
            return Err(Error::Precondition("curvature must be finite".into()));
        }
        Ok(())
    }
}

/// `|delta - delta~| + s0 delta (1 - K delta^2 / 6)`, with the higher-order
/// remainders dropped.
pub fn eval_distance_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok((b.delta - b.delta_tilde).abs() + b.s0 * b.delta * (1.0 - b.curvature / 6.0 * b.delta * b.delta))
}

/// Observed distance for one constructed pair and the bound at both ends of
/// the curvature range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCase {
    pub delta: f64,
    pub delta_tilde: f64,
    pub s0: f64,
    pub observed: f64,
    /// Bound with `K = 0`.
    pub flat: f64,
    /// Bound with `K = 5/4`.
    pub curved: f64,
}

impl BoundCase {
    /// True when `curved - slack <= observed <= flat + slack`. The lower side
    /// is only tight for `delta == delta_tilde`; otherwise the chord is much
    /// shorter than ray plus arc.
    pub fn within(&self, slack: f64) -> bool {
        self.observed <= self.flat + slack && self.observed >= self.curved - slack
    }
}

/// Builds `Delta` and `Delta~` with prescribed canonical norms and angle at a
/// random point of `St(n, r)` and measures `dist(Exp Delta, Exp Delta~)`.
pub fn bound_check(n: usize, r: usize, cases: &[(f64, f64, f64)], seed: u64) -> Result<Vec<BoundCase>> {
    if r == 0 || n < r {
        return Err(Error::Precondition(format!("need n >= r > 0, got n = {n}, r = {r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = StiefelPoint::random(&mut rng, n, r);
    let w = TangentVector::random(&mut rng, &q, 1.0);
    let raw = TangentVector::random(&mut rng, &q, 1.0);
    // canonical Gram-Schmidt
    let w_perp = TangentVector::combine(&[(1.0, &raw), (-metric(&raw, &w)?, &w)])?;
    let w_perp = w_perp.scale(1.0 / w_perp.norm());

    cases
        .iter()
        .map(|&(delta, delta_tilde, s0)| {
            let flat = eval_distance_bound(&BoundInputs { delta, delta_tilde, s0, curvature: 0.0 })?;
            let curved =
                eval_distance_bound(&BoundInputs { delta, delta_tilde, s0, curvature: STIEFEL_MAX_CURVATURE })?;
            let d = w.scale(delta);
            let dt = TangentVector::combine(&[(delta_tilde * s0.cos(), &w), (delta_tilde * s0.sin(), &w_perp)])?;
            let observed = dist(&stiefel_exp(&d, 1.0), &stiefel_exp(&dt, 1.0))?;
            Ok(BoundCase { delta, delta_tilde, s0, observed, flat, curved })
        })
        .collect()
}

/// `delta,delta_tilde,s0,observed,bound_k0,bound_k5_4` CSV.
pub fn bound_csv(cases: &[BoundCase]) -> String {
    let mut out = String::from("delta,delta_tilde,s0,observed,bound_k0,bound_k5_4\n");
    for c in cases {
        out.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?}\n",
            c.delta, c.delta_tilde, c.s0, c.observed, c.flat, c.curved
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_data_gives_zero() {
        let b = BoundInputs { delta: 0.4, delta_tilde: 0.4, s0: 0.0, curvature: 1.0 };
        assert_eq!(eval_distance_bound(&b).unwrap(), 0.0);
    }

    #[test]
    fn flat_case_is_ray_plus_arc() {
        let b = BoundInputs { delta: 0.3, delta_tilde: 0.2, s0: 0.5, curvature: 0.0 };
        assert!((eval_distance_bound(&b).unwrap() - (0.1 + 0.15)).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        let b = BoundInputs { delta: 1.2, delta_tilde: 0.2, s0: 0.5, curvature: 0.0 };
        assert!(eval_distance_bound(&b).is_err());
        let b = BoundInputs { delta: 0.2, delta_tilde: 0.2, s0: 2.0, curvature: 0.0 };
        assert!(eval_distance_bound(&b).is_err());
    }

    #[test]
    fn constructed_pair_has_requested_geometry() {
        let cases = bound_check(12, 3, &[(0.3, 0.3, 0.1)], 4).unwrap();
        assert!(cases[0].within(2e-3), "{:?}", cases[0]);
    }
}
