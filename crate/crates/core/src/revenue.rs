//! Expected revenue `r(q, c; β) = q·μ(βᵀ(1, q, c))` and its maximizer over the price box.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::glm::LinkFunction;
use crate::linalg::dot;

/// Number of points in the coarse scan preceding golden-section refinement.
pub const COARSE_GRID: usize = 256;
pub const DEFAULT_OPT_TOL: f64 = 1e-8;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevenueModel {
    pub link: LinkFunction,
    /// Price block is `(1, q)` when set, otherwise just `(q)`.
    pub intercept_in_price_block: bool,
}

impl RevenueModel {
    pub fn new(link: LinkFunction) -> Self {
        Self {
            link,
            intercept_in_price_block: true,
        }
    }

    pub fn price_block_len(&self) -> usize {
        if self.intercept_in_price_block {
            2
        } else {
            1
        }
    }

    /// Revenue as a function of the free price for one `(c, β)` pair.
    pub fn curve(&self, c: &[f64], beta: &[f64]) -> Result<RevenueCurve> {
        let m = self.price_block_len();
        check_dim(m + c.len(), beta.len())?;
        let (offset, slope) = if self.intercept_in_price_block {
            (beta[0], beta[1])
        } else {
            (0.0, beta[0])
        };
        Ok(RevenueCurve {
            link: self.link,
            offset: offset + dot(&beta[m..], c),
            slope,
        })
    }
}

/// `q ↦ q·μ(offset + slope·q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueCurve {
    pub link: LinkFunction,
    pub offset: f64,
    pub slope: f64,
}

impl RevenueCurve {
    #[inline]
    pub fn value(&self, q: f64) -> f64 {
        q * self.link.mean(self.offset + self.slope * q)
    }

    #[inline]
    pub fn demand(&self, q: f64) -> f64 {
        self.link.mean(self.offset + self.slope * q)
    }

    /// Maximizer over `box`: coarse scan, then golden-section refinement on
    /// the bracket around the best scan point. Ties resolve to the smallest
    /// price.
    pub fn argmax(&self, price_box: &PriceBox, opt_tol: f64) -> f64 {
        let (lo, hi) = (price_box.lower, price_box.upper);
        let h = (hi - lo) / (COARSE_GRID - 1) as f64;
        let mut best_i = 0;
        let mut best_v = self.value(lo);
        for i in 1..COARSE_GRID {
            let v = self.value(lo + h * i as f64);
            if v > best_v {
                best_i = i;
                best_v = v;
            }
        }
        let best_q = if best_i == COARSE_GRID - 1 {
            hi
        } else {
            lo + h * best_i as f64
        };
        let a = if best_i == 0 { lo } else { best_q - h };
        let b = if best_i == COARSE_GRID - 1 {
            hi
        } else {
            (best_q + h).min(hi)
        };
        let refined = golden_max(|q| self.value(q), a, b, opt_tol.max(1e-15));
        if self.value(refined) > best_v {
            refined
        } else {
            best_q
        }
    }
}

/// Golden-section search for the maximum of `f` on `[a, b]`, stopping when
/// the bracket is narrower than `tol`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // best of the final bracket
    [a, c, mid, d, b]
        .into_iter()
        .map(|q| (q, f(q)))
        .fold(
            (mid, f(mid)),
            |acc, cur| if cur.1 > acc.1 { cur } else { acc },
        )
        .0
}

/// Feasible interval `[lower, upper]` for the free price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBox {
    pub lower: f64,
    pub upper: f64,
}

impl PriceBox {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return Err(Error::InvalidField {
                field: "price_box".into(),
                reason: format!("need finite price_lower < price_upper, got [{lower}, {upper}]"),
            });
        }
        Ok(Self { lower, upper })
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, q: f64) -> bool {
        (self.lower..=self.upper).contains(&q)
    }

    pub fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let h = (self.upper - self.lower) / (n.max(2) - 1) as f64;
        (0..n).map(move |i| {
            if i + 1 == n {
                self.upper
            } else {
                self.lower + h * i as f64
            }
        })
    }
}

pub fn expected_revenue(model: &RevenueModel, q: f64, c: &[f64], beta: &[f64]) -> Result<f64> {
    if !q.is_finite() {
        return Err(Error::Domain(format!("price {q}")));
    }
    Ok(model.curve(c, beta)?.value(q))
}

pub fn certainty_equivalent_price(
    model: &RevenueModel,
    c: &[f64],
    beta: &[f64],
    price_box: &PriceBox,
    opt_tol: f64,
) -> Result<f64> {
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite parameter estimate".into()));
    }
    Ok(model.curve(c, beta)?.argmax(price_box, opt_tol))
}

/// Price that maximizes revenue under the true parameters.
pub fn oracle_optimal_price(
    model: &RevenueModel,
    c: &[f64],
    beta0: &[f64],
    price_box: &PriceBox,
) -> Result<f64> {
    certainty_equivalent_price(model, c, beta0, price_box, DEFAULT_OPT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_argmax(curve: &RevenueCurve, b: &PriceBox, n: usize) -> (f64, f64) {
        b.grid(n)
            .map(|q| (q, curve.value(q)))
            .fold((b.lower, f64::NEG_INFINITY), |acc, cur| {
                if cur.1 > acc.1 {
                    cur
                } else {
                    acc
                }
            })
    }

    #[test]
    fn revenue_values() {
        let lin = RevenueModel::new(LinkFunction::Identity);
        let logit = RevenueModel::new(LinkFunction::Logistic);
        assert_eq!(expected_revenue(&lin, 0.0, &[], &[1.0, -0.5]).unwrap(), 0.0);
        assert!((expected_revenue(&lin, 1.0, &[], &[1.0, -0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            expected_revenue(&logit, 2.0, &[], &[1.0, -0.5]).unwrap(),
            1.0
        );
        assert!(expected_revenue(&lin, 1.0, &[0.3], &[1.0, -0.5]).is_err());
    }

    #[test]
    fn linear_interior_and_clamped_argmax() {
        let lin = RevenueModel::new(LinkFunction::Identity);
        let b = PriceBox::new(0.5, 5.0).unwrap();
        let q = certainty_equivalent_price(&lin, &[], &[1.0, -0.5], &b, 1e-8).unwrap();
        assert!((q - 1.0).abs() < 1e-7);
        let curve = lin.curve(&[], &[1.0, -0.5]).unwrap();
        assert!((grid_argmax(&curve, &b, 100_001).0 - 1.0).abs() < 1e-4);

        let q = certainty_equivalent_price(&lin, &[], &[1.0, -0.05], &b, 1e-8).unwrap();
        assert_eq!(q, 5.0);
    }

    #[test]
    fn logistic_matches_fine_grid() {
        let logit = RevenueModel::new(LinkFunction::Logistic);
        let b = PriceBox::new(0.5, 5.0).unwrap();
        let q = certainty_equivalent_price(&logit, &[], &[1.0, -0.5], &b, 1e-8).unwrap();
        let curve = logit.curve(&[], &[1.0, -0.5]).unwrap();
        let (qg, _) = grid_argmax(&curve, &b, 1_000_001);
        assert!((q - qg).abs() < 1e-4, "{q} vs {qg}");
    }

    #[test]
    fn flat_revenue_returns_lower_bound() {
        let lin = RevenueModel::new(LinkFunction::Identity);
        let b = PriceBox::new(0.5, 5.0).unwrap();
        // zero demand everywhere
        let q = certainty_equivalent_price(&lin, &[], &[0.0, 0.0], &b, 1e-8).unwrap();
        assert_eq!(q, 0.5);
    }

    #[test]
    fn nonnegative_slope_hits_upper_bound() {
        let lin = RevenueModel::new(LinkFunction::Identity);
        let b = PriceBox::new(0.5, 5.0).unwrap();
        for beta in [[1.0, 0.0], [0.2, 0.3], [3.0, 1e-3]] {
            assert_eq!(oracle_optimal_price(&lin, &[], &beta, &b).unwrap(), 5.0);
        }
    }

    #[test]
    fn invalid_box() {
        assert!(PriceBox::new(2.0, 2.0).is_err());
        assert!(PriceBox::new(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let q = golden_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((q - 0.3).abs() < 1e-8);
    }
}
