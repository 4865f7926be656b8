//! Small numeric helpers: log-space sums, factorials, the tree function.

use statrs::function::factorial;

/// `log Σ exp(x_i)` with a max shift; `-∞` for an empty or all `-∞` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `ln k!`.
pub fn ln_factorial(k: u64) -> f64 {
    factorial::ln_factorial(k)
}

/// `ln C(n, k)`; `-∞` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    factorial::ln_binomial(n, k)
}

/// Poisson log-pmf.
pub fn poisson_ln_pmf(lambda: f64, k: u64) -> f64 {
    -lambda + k as f64 * lambda.ln() - ln_factorial(k)
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

/// Tree function `T(λ) = Σ_{l≥1} l^{l−1} λ^l / l!`, the root of `T = λ e^T`
/// in `[0, 1]`, for `λ ∈ [0, 1/e]`.
pub fn tree_function(lambda: f64) -> f64 {
    let edge = (-1.0f64).exp();
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda >= edge {
        return 1.0;
    }
    // g(T) = ln T − T − ln λ is increasing on (0, 1].
    let target = lambda.ln();
    let g = |t: f64| t.ln() - t - target;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut t = lambda.min(0.5);
    for _ in 0..200 {
        let v = g(t);
        if v > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let d = 1.0 / t - 1.0;
        let mut next = t - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-16 * t.max(1e-300) {
            return next;
        }
        t = next;
        if hi - lo <= 1e-17 {
            break;
        }
    }
    t
}

/// Best rational approximation `num/den` of `x` with `den ≤ max_den`
/// (continued fractions). Returns `None` for non-finite input.
pub fn rational_approx(x: f64, max_den: u64) -> Option<(i64, u64)> {
    if !x.is_finite() {
        return None;
    }
    let neg = x < 0.0;
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e15 {
            break;
        }
        let a = a as u64;
        let p2 = a.checked_mul(p1).and_then(|t| t.checked_add(p0))?;
        let q2 = a.checked_mul(q1).and_then(|t| t.checked_add(q0))?;
        if q2 > max_den {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - a as f64;
        if frac < 1e-12 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        return None;
    }
    let num = p1 as i64;
    Some((if neg { -num } else { num }, q1))
}

/// Formats with 17 significant digits, in plain decimal where the exponent
/// allows it.
pub fn fmt_sig17(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.16e}", x)
    }
}
