//! Polylogarithm on the unit circle, `Li_f(e^{iθ})`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// `Li_f(e^{iθ}) = Σ_{n≥1} e^{inθ}/n^f` for integer `f ≥ 1`.
///
/// `f = 1` uses the closed form `−log(2 sin(θ/2)) + i(π − θ)/2`; higher
/// orders use the expansion of `Li_f(e^μ)` in powers of `μ = iθ` with `θ`
/// reduced to `(−π, π]`, which converges geometrically.
pub fn li(f: u32, theta: f64) -> Result<C64> {
    if f == 0 {
        return Err(Error::InvalidParameter("polylogarithm order must be at least 1".into()));
    }
    let t = theta.rem_euclid(TAU);
    if f == 1 {
        if t == 0.0 {
            return Err(Error::Divergence { order: 1 });
        }
        return Ok(C64::new(-(2.0 * (t / 2.0).sin()).ln(), (PI - t) / 2.0));
    }
    let t = if t > PI { t - TAU } else { t };
    Ok(li_series(f, t))
}

fn li_series(n: u32, t: f64) -> C64 {
    let mu = C64::new(0.0, t);
    let n1 = (n - 1) as usize;
    let mut sum = C64::new(0.0, 0.0);

    // k = 0..n−2: ζ(n − k) μ^k / k!
    let mut pow = C64::new(1.0, 0.0);
    for k in 0..n1 {
        sum += zeta(n as usize - k) * pow;
        pow = pow * mu / (k + 1) as f64;
    }
    // k = n − 1: μ^{n−1}/(n−1)! [H_{n−1} − log(−μ)]
    if t != 0.0 {
        let harmonic: f64 = (1..=n1).map(|i| 1.0 / i as f64).sum();
        let log_neg_mu = C64::new(t.abs().ln(), -PI / 2.0 * t.signum());
        sum += pow * (harmonic - log_neg_mu);
    }
    // k = n: ζ(0) = −1/2
    pow = pow * mu / n as f64;
    sum += pow * -0.5;
    // k = n − 1 + 2m, m ≥ 1: ζ(1 − 2m) μ^k / k!, written through ζ(2m).
    let x = t / TAU;
    let mut m = 1usize;
    let mut xpow = x * x;
    loop {
        let mut denom = 1.0;
        for i in 0..n as usize {
            denom *= (2 * m + i) as f64;
        }
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        let coef = 2.0 * sign * zeta(2 * m) * xpow / denom;
        // μ^{n−1+2m} = i^{n−1+2m} t^{n−1+2m}; the factor (2π)^{2m} is in xpow.
        let term = i_pow(n1 + 2 * m) * coef * t.powi(n1 as i32);
        sum += term;
        if coef.abs() * t.abs().powi(n1 as i32) < 1e-18 || m > 200 {
            break;
        }
        xpow *= x * x;
        m += 1;
    }
    sum
}

fn i_pow(k: usize) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Riemann zeta at an integer `s ≥ 2` by Euler-Maclaurin summation.
pub fn zeta(s: usize) -> f64 {
    assert!(s >= 2, "zeta needs s >= 2");
    let sf = s as f64;
    let big_n = 20.0f64;
    let mut sum: f64 = (1..20).map(|k| (k as f64).powf(-sf)).sum();
    sum += big_n.powf(1.0 - sf) / (sf - 1.0) + 0.5 * big_n.powf(-sf);
    // Bernoulli corrections B_2k/(2k)! · s(s+1)…(s+2k−2) N^{−s−2k+1}
    let bern = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0];
    let mut rising = sf;
    let mut fact = 2.0;
    for (k, b) in bern.iter().enumerate() {
        let kk = k + 1;
        sum += b / fact * rising * big_n.powf(-sf - (2 * kk) as f64 + 1.0);
        rising *= (sf + (2 * kk) as f64 - 1.0) * (sf + (2 * kk) as f64);
        fact *= ((2 * kk + 1) * (2 * kk + 2)) as f64;
    }
    sum
}
