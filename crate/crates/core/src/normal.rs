//! Standard normal distribution function and its inverse.

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Phi(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

// Acklam's rational approximation, relative error below 1.2e-9.
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Phi^{-1}(p) for p in (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityDomain(p));
    }
    let mut x = acklam(p);
    // Halley refinement, residual taken on the smaller tail
    for _ in 0..2 {
        let resid = if x < 0.0 {
            normal_cdf(x) - p
        } else {
            (1.0 - p) - normal_cdf(-x)
        };
        let u = resid / normal_pdf(x);
        if !u.is_finite() {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

/// z_{1-alpha}: the upper alpha critical value.
pub fn upper_critical(alpha: f64) -> Result<f64> {
    normal_quantile(1.0 - alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetry() {
        assert_eq!(normal_cdf(0.0), 0.5);
        for x in [0.5, 1.0, 2.0] {
            assert!((normal_cdf(-x) + normal_cdf(x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quantile_reference_value() {
        // sqrt(2) * erfinv(0.9) to 40 digits: 1.644853626951472714863848907991...
        let q = normal_quantile(0.95).unwrap();
        assert!((q - 1.6448536269514722).abs() < 1e-14, "{q}");
        let q = normal_quantile(0.955).unwrap();
        assert!((q - 1.6953977102721363).abs() < 1e-13, "{q}");
    }

    #[test]
    fn quantile_round_trip() {
        let mut p = 1e-8;
        while p < 1.0 - 1e-8 {
            let back = normal_cdf(normal_quantile(p).unwrap());
            assert!((back - p).abs() < 1e-12, "p={p} back={back}");
            p = if p < 0.01 { p * 3.0 } else { p + 0.0137 };
        }
        let p = 1.0 - 1e-8;
        assert!((normal_cdf(normal_quantile(p).unwrap()) - p).abs() < 1e-12);
    }

    #[test]
    fn quantile_domain() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }
}
