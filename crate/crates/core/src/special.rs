//! Special functions and log-space helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Complementary error function with full relative accuracy in the far tail.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Natural logarithm of `erfc(x)`, finite for every finite `x`.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 26.0 {
        return erfc(x).ln();
    }
    // Continued fraction for the scaled function erfcx(x) = exp(x^2) erfc(x).
    let mut frac = 0.0;
    for k in (1..=60).rev() {
        frac = (k as f64 / 2.0) / (x + frac);
    }
    -x * x - (PI.sqrt() * (x + frac)).ln()
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal lower tail `P(Z < z)`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Mass of the standard normal between `a` and `b` (a <= b), evaluated on
/// whichever side keeps relative precision.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_cdf(b) - normal_cdf(a)
    } else {
        1.0 - normal_cdf(a) - normal_sf(b)
    }
}

pub fn ln_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `ln(sinh^2(z))` for any real `z`, stable for large `|z|`.
pub fn ln_sinh_sq(z: f64) -> f64 {
    let z = z.abs();
    if z == 0.0 {
        return f64::NEG_INFINITY;
    }
    if z < 1.0 {
        return 2.0 * z.sinh().ln();
    }
    2.0 * (z + (-(-2.0 * z).exp()).ln_1p() - std::f64::consts::LN_2)
}

/// `s*a + (1-s)*b` with the conventions `0 * (-inf) = 0` at the endpoints.
pub fn interpolate_log(s: f64, a: f64, b: f64) -> f64 {
    if s == 0.0 {
        b
    } else if s == 1.0 {
        a
    } else {
        s * a + (1.0 - s) * b
    }
}

pub fn ln_factorial(k: u64) -> f64 {
    statrs::function::factorial::ln_factorial(k)
}
