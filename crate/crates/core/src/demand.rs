//! Price-elastic demand: the FRAT5 parameterization, the equivalent
//! exponential curve `alpha * exp(-beta * p)`, and the willingness-to-pay
//! distribution that generates it.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Expected demand `alpha * exp(-beta * p)` for one (product, time) cell.
///
/// A cell with no demand at its minimum price has `alpha == 0` and is
/// identically zero; `beta` stays positive so that `1 / beta` is still the
/// (meaningless but finite) revenue peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandCurve {
    pub alpha: f64,
    pub beta: f64,
}

impl DemandCurve {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn is_zero(&self) -> bool {
        self.alpha == 0.0
    }

    /// Price maximizing `p * q(p)` when the capacity is not binding.
    pub fn revenue_peak(&self) -> f64 {
        1.0 / self.beta
    }

    /// Demand at `p` without the sign check; callers guarantee `p >= 0`.
    #[inline]
    pub(crate) fn demand_at(&self, p: f64) -> f64 {
        if self.alpha == 0.0 {
            0.0
        } else {
            self.alpha * (-self.beta * p).exp()
        }
    }

    #[inline]
    pub(crate) fn revenue_at(&self, p: f64) -> f64 {
        p * self.demand_at(p)
    }
}

fn check_frat5(frat5: f64) -> Result<()> {
    if frat5 > 1.0 && frat5.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("frat5 must be > 1, got {frat5}")))
    }
}

fn check_min_price(min_price: f64) -> Result<()> {
    if min_price > 0.0 && min_price.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "min_price must be > 0, got {min_price}"
        )))
    }
}

fn check_price(p: f64) -> Result<()> {
    if p >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("price must be >= 0, got {p}")))
    }
}

/// Rewrites `Q * exp(-ln2/(F-1) * (p/pmin - 1))` as `alpha * exp(-beta * p)`.
pub fn curve_from_frat5(q_min: f64, frat5: f64, min_price: f64) -> Result<DemandCurve> {
    check_frat5(frat5)?;
    check_min_price(min_price)?;
    if !(q_min >= 0.0 && q_min.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mean demand must be >= 0, got {q_min}"
        )));
    }
    let k = LN_2 / (frat5 - 1.0);
    let beta = k / min_price;
    let alpha = if q_min == 0.0 { 0.0 } else { q_min * k.exp() };
    Ok(DemandCurve { alpha, beta })
}

pub fn expected_demand(curve: &DemandCurve, p: f64) -> Result<f64> {
    check_price(p)?;
    Ok(curve.demand_at(p))
}

pub fn expected_revenue(curve: &DemandCurve, p: f64) -> Result<f64> {
    check_price(p)?;
    Ok(curve.revenue_at(p))
}

/// Probability that a customer counted in the demand at `min_price` still
/// buys at `p`. Clamped to 1 below `min_price`.
pub fn survival_probability(frat5: f64, min_price: f64, p: f64) -> Result<f64> {
    check_frat5(frat5)?;
    check_min_price(min_price)?;
    Ok(survival_unchecked(frat5, min_price, p))
}

#[inline]
pub(crate) fn survival_unchecked(frat5: f64, min_price: f64, p: f64) -> f64 {
    if p <= min_price {
        1.0
    } else {
        (-LN_2 / (frat5 - 1.0) * (p / min_price - 1.0)).exp()
    }
}

/// Willingness to pay: `min_price + Exponential(scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WtpDistribution {
    pub min_price: f64,
    pub scale: f64,
}

impl WtpDistribution {
    /// `P(WTP >= p)`.
    pub fn tail(&self, p: f64) -> f64 {
        if p <= self.min_price {
            1.0
        } else {
            (-(p - self.min_price) / self.scale).exp()
        }
    }

    pub fn density(&self, p: f64) -> f64 {
        if p < self.min_price {
            0.0
        } else {
            (-(p - self.min_price) / self.scale).exp() / self.scale
        }
    }
}

pub fn wtp_distribution(frat5: f64, min_price: f64) -> Result<WtpDistribution> {
    check_frat5(frat5)?;
    check_min_price(min_price)?;
    Ok(WtpDistribution {
        min_price,
        scale: min_price * (frat5 - 1.0) / LN_2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn frat5_two_curve() {
        let c = curve_from_frat5(100.0, 2.0, 100.0).unwrap();
        assert!(close(c.beta, LN_2 / 100.0, 1e-15));
        assert!(close(c.alpha, 200.0, 1e-12));
        assert!(close(expected_demand(&c, 100.0).unwrap(), 100.0, 1e-12));
        assert!(close(expected_demand(&c, 200.0).unwrap(), 50.0, 1e-12));
        assert!(close(expected_demand(&c, 300.0).unwrap(), 25.0, 1e-12));
        assert!(close(expected_demand(&c, 0.0).unwrap(), c.alpha, 0.0));
    }

    #[test]
    fn zero_demand_cell() {
        let c = curve_from_frat5(0.0, 3.0, 50.0).unwrap();
        assert_eq!(c.alpha, 0.0);
        assert!(c.is_zero());
        for p in [0.0, 50.0, 1e6] {
            assert_eq!(expected_demand(&c, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(curve_from_frat5(10.0, 1.0, 100.0).is_err());
        assert!(curve_from_frat5(10.0, 0.5, 100.0).is_err());
        assert!(curve_from_frat5(10.0, 2.0, 0.0).is_err());
        assert!(curve_from_frat5(-1.0, 2.0, 10.0).is_err());
        let c = curve_from_frat5(10.0, 2.0, 100.0).unwrap();
        assert!(expected_demand(&c, -1.0).is_err());
        assert!(expected_revenue(&c, -0.5).is_err());
        assert!(wtp_distribution(1.0, 100.0).is_err());
    }

    #[test]
    fn revenue_peak_matches_golden_section() {
        let c = curve_from_frat5(100.0, 2.0, 100.0).unwrap();
        // golden-section search on [0, 1000]
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, 1000.0);
        for _ in 0..200 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if c.revenue_at(x1) < c.revenue_at(x2) {
                a = x1;
            } else {
                b = x2;
            }
        }
        let argmax = 0.5 * (a + b);
        assert!(close(argmax, c.revenue_peak(), 1e-4));
        assert!(close(c.revenue_peak(), 144.269_504_088_896_34, 1e-9));
        let peak = expected_revenue(&c, c.revenue_peak()).unwrap();
        assert!(close(peak, c.alpha / c.beta * (-1f64).exp(), 1e-9));
        assert!(close(peak, 10_614.76, 0.01));
        assert_eq!(expected_revenue(&c, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn survival_values() {
        assert_eq!(survival_probability(2.0, 100.0, 100.0).unwrap(), 1.0);
        assert_eq!(survival_probability(2.0, 100.0, 50.0).unwrap(), 1.0);
        assert!(close(survival_probability(2.0, 100.0, 200.0).unwrap(), 0.5, 1e-15));
        assert!(close(survival_probability(2.0, 100.0, 300.0).unwrap(), 0.25, 1e-15));
        assert!(close(survival_probability(3.5, 80.0, 280.0).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn wtp_tail_matches_survival() {
        let w = wtp_distribution(2.0, 100.0).unwrap();
        assert!(close(w.scale, 144.269_504_088_896_34, 1e-9));
        assert_eq!(w.tail(100.0), 1.0);
        assert!(close(w.tail(200.0), 0.5, 1e-15));
        for &(f, pmin) in &[(1.3, 40.0), (2.0, 100.0), (4.5, 310.0)] {
            let w = wtp_distribution(f, pmin).unwrap();
            for k in 0..50 {
                let p = pmin * (1.0 + k as f64 * 0.1);
                let s = survival_probability(f, pmin, p).unwrap();
                assert!(close(w.tail(p), s, 1e-14));
            }
        }
    }

    #[test]
    fn wtp_density_integrates_to_tail() {
        // trapezoid quadrature of the density from p to a far cut-off
        let w = wtp_distribution(2.5, 120.0).unwrap();
        let p = 300.0;
        let hi = p + 60.0 * w.scale;
        let n = 200_000;
        let h = (hi - p) / n as f64;
        let mut acc = 0.5 * (w.density(p) + w.density(hi));
        for i in 1..n {
            acc += w.density(p + i as f64 * h);
        }
        acc *= h;
        assert!(close(acc, survival_probability(2.5, 120.0, p).unwrap(), 1e-8));
    }

    #[test]
    fn revenue_shape_around_peak() {
        let c = curve_from_frat5(42.0, 1.7, 150.0).unwrap();
        let peak = c.revenue_peak();
        let mut prev = c.revenue_at(0.0);
        let steps = 400;
        for k in 1..=steps {
            let p = peak * 3.0 * k as f64 / steps as f64;
            let r = c.revenue_at(p);
            if p <= peak {
                assert!(r >= prev);
            } else if p - peak > peak * 3.0 / steps as f64 {
                assert!(r <= prev);
            }
            prev = r;
        }
    }
}
