//! Exponential integral `Γ(0, x) = E₁(x)` and integer-order upper incomplete
//! gamma functions.

use crate::error::{domain, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Γ(0, x) = ∫_x^∞ e^{−t}/t dt` for `x > 0`.
///
/// Power series below 1, modified Lentz continued fraction above.
pub fn expint_gamma0(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain!("Γ(0, x) diverges for x = {x} ≤ 0"));
    }
    if x < 1.0 {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() * e1_scaled_cf(x))
    }
}

/// `e^x Γ(0, x)`, finite and accurate for large `x` where `e^x` alone overflows.
pub fn exp_expint(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain!("e^x Γ(0, x) undefined for x = {x} ≤ 0"));
    }
    if x < 1.0 {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(e1_scaled_cf(x))
    }
}

fn e1_series(x: f64) -> f64 {
    // E₁(x) = −γ − ln x − Σ_{k≥1} (−x)^k / (k·k!)
    let mut sum = 0.0;
    let mut fact_term = 1.0; // (−x)^k / k!
    for k in 1..200 {
        fact_term *= -x / k as f64;
        let term = fact_term / k as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Continued fraction for `e^x E₁(x)`, valid for `x ≥ 1`.
fn e1_scaled_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `Γ(s, x)` for integer `s ≥ 0` and `x > 0`.
///
/// `s = 0` is the exponential integral; for `s ≥ 1` the finite sum
/// `(s−1)! e^{−x} Σ_{i<s} x^i / i!` is evaluated in log space.
pub fn upper_gamma_int(s: usize, x: f64) -> Result<f64> {
    if s == 0 {
        return expint_gamma0(x);
    }
    if x < 0.0 {
        return Err(domain!("Γ(s, x) requires x ≥ 0"));
    }
    if x == 0.0 {
        return Ok(ln_factorial(s - 1).exp());
    }
    let lnx = x.ln();
    let base = ln_factorial(s - 1) - x;
    let mut total = 0.0;
    for i in 0..s {
        total += (base + i as f64 * lnx - ln_factorial(i)).exp();
    }
    Ok(total)
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_bound_at_fifty() {
        let v = expint_gamma0(50.0).unwrap();
        assert!(v > 0.0 && v < 1e-23);
        assert!(v < (-50.0f64).exp() / 50.0);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(expint_gamma0(0.0).is_err());
        assert!(expint_gamma0(-1.0).is_err());
        assert!(expint_gamma0(f64::NAN).is_err());
    }

    #[test]
    fn regimes_agree_at_switch() {
        let below = e1_series(1.0 - 1e-12);
        let above = (-1.0f64).exp() * e1_scaled_cf(1.0);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_ratio() {
        let x = 500.0;
        let r = x * exp_expint(x).unwrap();
        assert!((r - 1.0).abs() < 0.01);
    }

    #[test]
    fn strictly_decreasing_on_grid() {
        let mut prev = f64::INFINITY;
        let mut x = 1e-8;
        while x < 700.0 {
            let v = expint_gamma0(x).unwrap();
            assert!(v < prev, "not decreasing at {x}");
            prev = v;
            x *= 1.3;
        }
    }

    #[test]
    fn integer_incomplete_gamma() {
        // Γ(1, x) = e^{−x}, Γ(3, x) = e^{−x}(x² + 2x + 2).
        let x: f64 = 1.7;
        assert!((upper_gamma_int(1, x).unwrap() - (-x).exp()).abs() < 1e-15);
        let want = (-x).exp() * (x * x + 2.0 * x + 2.0);
        assert!((upper_gamma_int(3, x).unwrap() - want).abs() < 1e-14);
        assert!((upper_gamma_int(4, 0.0).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(upper_gamma_int(2, 1e6).unwrap(), 0.0);
    }
}
