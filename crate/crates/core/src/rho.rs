//! Bounded ρ-functions (Tukey biweight, skipped Huber, lqq), their
//! derivatives and IRLS weights, plus calibration of tuning constants to a
//! target breakdown point or normal efficiency.
//!
//! Conventions: ρ(0) = 0, ρ'(z)/z → 1 as z → 0 for every family, and
//! δ = E[ρ(Z)] with Z standard normal. The breakdown point of an S-scale
//! built on ρ is δ / ρ(∞).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, normal_pdf};

/// Shape ratio b/c of the lqq family.
pub const LQQ_B_OVER_C: f64 = 1.5;
/// Maximal negative slope parameter s of the lqq family (min ψ' = 1 - s).
pub const LQQ_S: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoKind {
    Biweight,
    SkippedHuber,
    Lqq,
}

impl fmt::Display for RhoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RhoKind::Biweight => "biweight",
            RhoKind::SkippedHuber => "skipped_huber",
            RhoKind::Lqq => "lqq",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Biweight { k: f64 },
    SkippedHuber { k: f64 },
    /// Koller-Stahel lqq with derived end of the second quadratic piece `a`.
    Lqq { b: f64, c: f64, s: f64, a: f64 },
}

/// A calibrated ρ-function: family, constants, δ = E[ρ(Z)] and ρ(∞).
///
/// Constants are `[k]` for biweight and skipped Huber and `[b, c, s]` for lqq.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RhoSpecRepr", into = "RhoSpecRepr")]
pub struct RhoSpec {
    kind: RhoKind,
    constants: Vec<f64>,
    shape: Shape,
    delta: f64,
    rho_sup: f64,
}

#[derive(Serialize, Deserialize)]
struct RhoSpecRepr {
    kind: RhoKind,
    constants: Vec<f64>,
    delta: f64,
    rho_sup: f64,
}

impl TryFrom<RhoSpecRepr> for RhoSpec {
    type Error = Error;
    fn try_from(r: RhoSpecRepr) -> Result<Self> {
        let mut spec = RhoSpec::new(r.kind, &r.constants)?;
        // keep the serialized δ so that round trips are exact
        spec.delta = r.delta;
        spec.rho_sup = r.rho_sup;
        Ok(spec)
    }
}

impl From<RhoSpec> for RhoSpecRepr {
    fn from(s: RhoSpec) -> Self {
        RhoSpecRepr { kind: s.kind, constants: s.constants, delta: s.delta, rho_sup: s.rho_sup }
    }
}

impl RhoSpec {
    pub fn new(kind: RhoKind, constants: &[f64]) -> Result<Self> {
        let positive = |v: &f64| v.is_finite() && *v > 0.0;
        let shape = match (kind, constants) {
            (RhoKind::Biweight, [k]) if positive(k) => Shape::Biweight { k: *k },
            (RhoKind::SkippedHuber, [k]) if positive(k) => Shape::SkippedHuber { k: *k },
            (RhoKind::Lqq, [b, c, s]) if positive(b) && positive(c) && *s > 1.0 => {
                let a = (b * s - 2.0 * b - 2.0 * c) / (1.0 - s);
                if !(a > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "lqq constants b={b}, c={c}, s={s} give a non-positive descent length"
                    )));
                }
                Shape::Lqq { b: *b, c: *c, s: *s, a }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "invalid constants {constants:?} for {kind} rho"
                )))
            }
        };
        let mut spec = RhoSpec { kind, constants: constants.to_vec(), shape, delta: 0.0, rho_sup: 0.0 };
        spec.rho_sup = spec.rho(spec.support_end());
        spec.delta = expected_rho_normal(&spec);
        Ok(spec)
    }

    pub fn biweight(k: f64) -> Result<Self> {
        Self::new(RhoKind::Biweight, &[k])
    }

    pub fn skipped_huber(k: f64) -> Result<Self> {
        Self::new(RhoKind::SkippedHuber, &[k])
    }

    /// lqq with constants `(b, c, s)`.
    pub fn lqq(b: f64, c: f64, s: f64) -> Result<Self> {
        Self::new(RhoKind::Lqq, &[b, c, s])
    }

    /// Member of `kind`'s one-parameter family indexed by `scale`: `k` for
    /// the redescenders, `c` (with b = 1.5c, s = 1.5) for lqq.
    pub fn scaled(kind: RhoKind, scale: f64) -> Result<Self> {
        match kind {
            RhoKind::Biweight => Self::biweight(scale),
            RhoKind::SkippedHuber => Self::skipped_huber(scale),
            RhoKind::Lqq => Self::lqq(LQQ_B_OVER_C * scale, scale, LQQ_S),
        }
    }

    pub fn kind(&self) -> RhoKind {
        self.kind
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho_sup(&self) -> f64 {
        self.rho_sup
    }

    /// δ / ρ(∞).
    pub fn breakdown_point(&self) -> f64 {
        self.delta / self.rho_sup
    }

    /// Smallest |z| beyond which ρ is constant.
    pub fn support_end(&self) -> f64 {
        match self.shape {
            Shape::Biweight { k } | Shape::SkippedHuber { k } => k,
            Shape::Lqq { b, c, a, .. } => c + b + a,
        }
    }

    fn knots(&self) -> Vec<f64> {
        match self.shape {
            Shape::Biweight { k } | Shape::SkippedHuber { k } => vec![k],
            Shape::Lqq { b, c, a, .. } => vec![c, c + b, c + b + a],
        }
    }

    #[inline]
    pub fn rho(&self, z: f64) -> f64 {
        let u = z.abs();
        match self.shape {
            Shape::Biweight { k } => {
                if u > k {
                    k * k / 6.0
                } else {
                    let t = 1.0 - (u / k) * (u / k);
                    k * k / 6.0 * (1.0 - t * t * t)
                }
            }
            Shape::SkippedHuber { k } => {
                if u > k {
                    k * k / 2.0
                } else {
                    0.5 * u * u
                }
            }
            Shape::Lqq { b, c, s, a } => {
                if u <= c {
                    0.5 * u * u
                } else if u <= c + b {
                    let t = u - c;
                    0.5 * c * c + c * t + 0.5 * t * t - s * t * t * t / (6.0 * b)
                } else {
                    let rho_b = 0.5 * c * c + c * b + 0.5 * b * b - s * b * b / 6.0;
                    let psi_b = c + b - 0.5 * s * b;
                    let t = (u - c - b).min(a);
                    rho_b + psi_b * t + (1.0 - s) * (0.5 * t * t - t * t * t / (6.0 * a))
                }
            }
        }
    }

    /// ρ'(z).
    #[inline]
    pub fn psi(&self, z: f64) -> f64 {
        let u = z.abs();
        match self.shape {
            Shape::Biweight { k } => {
                if u > k {
                    0.0
                } else {
                    let t = 1.0 - (z / k) * (z / k);
                    z * t * t
                }
            }
            Shape::SkippedHuber { k } => {
                if u > k {
                    0.0
                } else {
                    z
                }
            }
            Shape::Lqq { b, c, s, a } => {
                let mag = if u <= c {
                    u
                } else if u <= c + b {
                    let t = u - c;
                    u - s * t * t / (2.0 * b)
                } else if u <= c + b + a {
                    let t = u - c - b;
                    (c + b - 0.5 * s * b) + (1.0 - s) * (t - t * t / (2.0 * a))
                } else {
                    0.0
                };
                mag.copysign(z)
            }
        }
    }

    /// IRLS weight ρ'(z)/z, with the limit 1 at z = 0.
    #[inline]
    pub fn weight(&self, z: f64) -> f64 {
        let u = z.abs();
        match self.shape {
            Shape::Biweight { k } => {
                if u > k {
                    0.0
                } else {
                    let t = 1.0 - (z / k) * (z / k);
                    t * t
                }
            }
            Shape::SkippedHuber { k } => {
                if u > k {
                    0.0
                } else {
                    1.0
                }
            }
            Shape::Lqq { c, .. } => {
                if u <= c {
                    1.0
                } else {
                    (self.psi(u) / u).max(0.0)
                }
            }
        }
    }

    /// Asymptotic efficiency at the normal model of the M-estimator of
    /// regression using this ρ: `E[Zψ(Z)]² / E[ψ(Z)²]`.
    pub fn efficiency(&self) -> f64 {
        let breaks = self.integration_breaks();
        let slope = 2.0 * integrate_pieces(&|z: f64| z * self.psi(z) * normal_pdf(z), &breaks);
        let var = 2.0 * integrate_pieces(&|z: f64| self.psi(z).powi(2) * normal_pdf(z), &breaks);
        slope * slope / var
    }

    fn integration_breaks(&self) -> Vec<f64> {
        let upper = 8.0_f64.max(2.0 * self.support_end());
        let mut breaks = vec![0.0];
        breaks.extend(self.knots());
        breaks.push(upper);
        breaks
    }
}

/// ρ(z) for `spec`.
pub fn rho_eval(spec: &RhoSpec, z: f64) -> f64 {
    spec.rho(z)
}

/// ρ'(z) for `spec`.
pub fn rho_prime(spec: &RhoSpec, z: f64) -> f64 {
    spec.psi(z)
}

/// ρ'(z)/z, continuous at 0.
pub fn irls_weight(spec: &RhoSpec, z: f64) -> f64 {
    spec.weight(z)
}

/// δ = E[ρ(Z)] by piecewise Gauss-Legendre quadrature on [0, max(8, 2k)].
pub fn expected_rho_normal(spec: &RhoSpec) -> f64 {
    let breaks = spec.integration_breaks();
    2.0 * integrate_pieces(&|z: f64| spec.rho(z) * normal_pdf(z), &breaks)
}

/// Bisection on log(scale) for an increasing (`rising = true`) or
/// decreasing criterion.
fn bisect_scale<F: Fn(f64) -> Result<f64>>(criterion: F, target: f64, rising: bool) -> Result<f64> {
    let (mut lo, mut hi) = (1e-3_f64.ln(), 1e3_f64.ln());
    let sign = if rising { 1.0 } else { -1.0 };
    let g = |x: f64| -> Result<f64> { Ok(sign * (criterion(x.exp())? - target)) };
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::Calibration(format!(
            "target {target} not bracketed by tuning constants in [1e-3, 1e3]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Tuning constant giving S-scale breakdown point `bdp` (δ/ρ(∞) = bdp).
pub fn tune_for_bdp(kind: RhoKind, bdp: f64) -> Result<RhoSpec> {
    if !(bdp > 0.0 && bdp <= 0.5) {
        return Err(Error::Calibration(format!("breakdown point {bdp} outside (0, 0.5]")));
    }
    let k = bisect_scale(|k| Ok(RhoSpec::scaled(kind, k)?.breakdown_point()), bdp, false)?;
    RhoSpec::scaled(kind, k)
}

/// Tuning constant giving normal efficiency `eff` for M-regression.
pub fn tune_for_efficiency(kind: RhoKind, eff: f64) -> Result<RhoSpec> {
    if !(eff > 0.5 && eff < 1.0) {
        return Err(Error::Calibration(format!("efficiency {eff} outside (0.5, 1)")));
    }
    let k = bisect_scale(|k| Ok(RhoSpec::scaled(kind, k)?.efficiency()), eff, true)?;
    RhoSpec::scaled(kind, k)
}

/// Hard rejection: 1 if `r <= c`, else 0.
pub fn hard_rejection_weight(r: f64, c: f64) -> f64 {
    if r <= c {
        1.0
    } else {
        0.0
    }
}

/// Weight function applied to scaled absolute residuals of the simple
/// regressions to obtain cell weights in [0, 1].
#[derive(Clone)]
pub enum CellWeight {
    HardRejection { cutoff: f64 },
    /// Any non-increasing map from [0, ∞) into [0, 1]. Output is clamped.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl CellWeight {
    #[inline]
    pub fn weight(&self, r: f64) -> f64 {
        match self {
            CellWeight::HardRejection { cutoff } => hard_rejection_weight(r, *cutoff),
            CellWeight::Custom(f) => f(r).clamp(0.0, 1.0),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CellWeight::HardRejection { cutoff } => format!("hard_rejection(c={cutoff})"),
            CellWeight::Custom(_) => "custom".to_string(),
        }
    }
}

impl Default for CellWeight {
    fn default() -> Self {
        CellWeight::HardRejection { cutoff: 3.0 }
    }
}

impl fmt::Debug for CellWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Frozen values below come from scipy quad/brentq and mpmath, run
    // outside this crate.
    const BW_RHO_AT_1: f64 = 0.4584700761495311;
    const BW_DELTA_3_42: f64 = 0.38999872858028617;
    const SKH_DELTA_2_177: f64 = 0.47390376479081504;
    const BW_K_BDP_50: f64 = 1.5476449809282267;
    const BW_K_EFF_95: f64 = 4.685064948543373;
    const SKH_K_EFF_95: f64 = 2.7954834829151065;
    const LQQ_C_BDP_50: f64 = 0.2677246079035771;
    const LQQ_C_EFF_95: f64 = 0.9822927834808881;

    fn bw() -> RhoSpec {
        RhoSpec::biweight(3.420).unwrap()
    }

    fn skh() -> RhoSpec {
        RhoSpec::skipped_huber(2.177).unwrap()
    }

    fn all_specs() -> Vec<RhoSpec> {
        vec![bw(), skh(), RhoSpec::lqq(1.5 * 0.9823, 0.9823, 1.5).unwrap()]
    }

    #[test]
    fn rho_eval_examples() {
        assert_eq!(rho_eval(&bw(), 0.0), 0.0);
        assert_abs_diff_eq!(rho_eval(&bw(), 5.0), 3.42 * 3.42 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_eval(&bw(), 5.0), 1.9494, epsilon = 1e-4);
        assert_abs_diff_eq!(rho_eval(&skh(), 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_eval(&bw(), 1.0), BW_RHO_AT_1, epsilon = 1e-15);
    }

    #[test]
    fn rho_prime_examples() {
        assert_eq!(rho_prime(&skh(), 1.0), 1.0);
        assert_eq!(rho_prime(&bw(), 4.0), 0.0);
        let k = 3.42;
        assert_abs_diff_eq!(rho_prime(&bw(), k / 2.0), 0.28125 * k, epsilon = 1e-14);
    }

    #[test]
    fn irls_weight_examples() {
        assert_eq!(irls_weight(&RhoSpec::skipped_huber(0.9).unwrap(), 0.5), 1.0);
        assert_eq!(irls_weight(&RhoSpec::skipped_huber(7.0).unwrap(), 0.5), 1.0);
        assert_eq!(irls_weight(&bw(), 0.0), 1.0);
        assert_abs_diff_eq!(irls_weight(&bw(), 1e-9), 1.0, epsilon = 1e-12);
        assert_eq!(irls_weight(&bw(), 4.0), 0.0);
    }

    #[test]
    fn sup_matches_closed_forms() {
        assert_abs_diff_eq!(bw().rho_sup(), 3.42 * 3.42 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(skh().rho_sup(), 2.177 * 2.177 / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn delta_matches_oracle() {
        assert_abs_diff_eq!(bw().delta(), BW_DELTA_3_42, epsilon = 1e-10);
        assert_abs_diff_eq!(skh().delta(), SKH_DELTA_2_177, epsilon = 1e-10);
        assert!((bw().breakdown_point() - 0.20).abs() <= 0.005);
        assert!((skh().breakdown_point() - 0.20).abs() <= 0.005);
        // quadratic limit
        let wide = RhoSpec::skipped_huber(40.0).unwrap();
        assert_abs_diff_eq!(wide.delta(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn tune_for_bdp_examples() {
        let b = tune_for_bdp(RhoKind::Biweight, 0.2).unwrap();
        assert!((b.constants()[0] - 3.420).abs() <= 0.005);
        let s = tune_for_bdp(RhoKind::SkippedHuber, 0.2).unwrap();
        assert!((s.constants()[0] - 2.177).abs() <= 0.005);
        let half = tune_for_bdp(RhoKind::Biweight, 0.5).unwrap();
        assert_abs_diff_eq!(half.constants()[0], BW_K_BDP_50, epsilon = 1e-8);
        let lqq = tune_for_bdp(RhoKind::Lqq, 0.5).unwrap();
        assert_abs_diff_eq!(lqq.constants()[1], LQQ_C_BDP_50, epsilon = 1e-8);
        assert_abs_diff_eq!(lqq.constants()[0], 1.5 * LQQ_C_BDP_50, epsilon = 1e-8);
        assert!(tune_for_bdp(RhoKind::Biweight, 0.6).is_err());
        assert!(tune_for_bdp(RhoKind::Biweight, 0.0).is_err());
    }

    #[test]
    fn tune_for_efficiency_examples() {
        let b = tune_for_efficiency(RhoKind::Biweight, 0.95).unwrap();
        assert_abs_diff_eq!(b.constants()[0], BW_K_EFF_95, epsilon = 1e-7);
        assert!((b.efficiency() - 0.95).abs() < 1e-4);
        let s = tune_for_efficiency(RhoKind::SkippedHuber, 0.95).unwrap();
        assert_abs_diff_eq!(s.constants()[0], SKH_K_EFF_95, epsilon = 1e-7);
        let l = tune_for_efficiency(RhoKind::Lqq, 0.95).unwrap();
        assert_abs_diff_eq!(l.constants()[1], LQQ_C_EFF_95, epsilon = 1e-7);
        let b99 = tune_for_efficiency(RhoKind::Biweight, 0.99).unwrap();
        assert!(b99.constants()[0] > b.constants()[0]);
        assert!(tune_for_efficiency(RhoKind::Biweight, 1.0).is_err());
    }

    #[test]
    fn hard_rejection_examples() {
        assert_eq!(hard_rejection_weight(2.9, 3.0), 1.0);
        assert_eq!(hard_rejection_weight(3.1, 3.0), 0.0);
        assert_eq!(hard_rejection_weight(0.0, 0.1), 1.0);
        let custom = CellWeight::Custom(Arc::new(|r| 2.0 - r));
        assert_eq!(custom.weight(0.0), 1.0);
        assert_eq!(custom.weight(5.0), 0.0);
    }

    #[test]
    fn invalid_constants_rejected() {
        assert!(RhoSpec::biweight(0.0).is_err());
        assert!(RhoSpec::new(RhoKind::Lqq, &[1.0, 1.0]).is_err());
        assert!(RhoSpec::lqq(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let spec = tune_for_bdp(RhoKind::Lqq, 0.5).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: RhoSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }

    fn near_kink(spec: &RhoSpec, z: f64) -> bool {
        spec.knots().iter().any(|k| (z.abs() - k).abs() < 1e-3)
    }

    proptest! {
        #[test]
        fn rho_even_monotone_bounded(z in -20.0f64..20.0, dz in 0.0f64..3.0) {
            for spec in all_specs() {
                let r = spec.rho(z);
                prop_assert_eq!(r, spec.rho(-z));
                prop_assert!(r >= 0.0 && r <= spec.rho_sup() + 1e-12);
                prop_assert!(spec.rho(z.abs() + dz) >= r - 1e-12);
                if z.abs() >= spec.support_end() {
                    prop_assert!((r - spec.rho_sup()).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn psi_matches_finite_difference(u in -1.0f64..1.0) {
            for spec in all_specs() {
                let z = 2.0 * spec.support_end() * u;
                if near_kink(&spec, z) { continue; }
                let h = 1e-6;
                let fd = (spec.rho(z + h) - spec.rho(z - h)) / (2.0 * h);
                prop_assert!((fd - spec.psi(z)).abs() < 1e-6, "{:?} z={} fd={} psi={}", spec.kind(), z, fd, spec.psi(z));
                prop_assert_eq!(spec.psi(-z), -spec.psi(z));
            }
        }

        #[test]
        fn weight_in_unit_interval(z in -20.0f64..20.0) {
            for spec in all_specs() {
                let w = spec.weight(z);
                prop_assert!((0.0..=1.0).contains(&w));
                if z != 0.0 {
                    prop_assert!((w * z - spec.psi(z)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn bdp_round_trip(bdp in 0.05f64..0.5) {
            let spec = tune_for_bdp(RhoKind::Biweight, bdp).unwrap();
            prop_assert!((spec.breakdown_point() - bdp).abs() < 1e-6);
        }
    }
}
