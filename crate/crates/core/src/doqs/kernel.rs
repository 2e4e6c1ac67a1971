//! Quantum kernel `F_n`: the vacuum return amplitude of the quadratic
//! fluctuation Hamiltonian around a critical point.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscape::Hessian;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelParams {
    /// Coefficient of `a†a`.
    pub omega_c: f64,
    /// Coefficient of `a² + a†²`, non-negative.
    pub gamma_c: f64,
    /// `ω_c² − 4Γ_c²`.
    pub theta_sq: f64,
    /// Width of the reference Gaussian `ψ₀(q) ∝ e^{−h q²/2}`.
    pub width_h: f64,
}

impl KernelParams {
    pub fn new(omega_c: f64, gamma_c: f64, width_h: f64) -> Result<Self> {
        if gamma_c < 0.0 || width_h.is_nan() || width_h <= 0.0 {
            return Err(Error::Kernel(format!("need Γ ≥ 0 and h > 0 (Γ = {gamma_c}, h = {width_h})")));
        }
        Ok(Self { omega_c, gamma_c, theta_sq: omega_c * omega_c - 4.0 * gamma_c * gamma_c, width_h })
    }

    /// Reads `ω_c` and `Γ_c` off the `(Q, P)` Hessian of the landscape, so
    /// that `ϑ² = det H/4`. The width defaults to `|ω_c| + 2Γ_c`, the value
    /// for which the closed form equals the boson vacuum amplitude.
    pub fn from_hessian(h: &Hessian) -> Result<Self> {
        let omega = (h[0][0] + h[1][1]) / 4.0;
        let gamma = ((h[0][0] - h[1][1]).powi(2) + 4.0 * h[0][1] * h[1][0]).sqrt() / 8.0;
        Self::new(omega, gamma, omega.abs() + 2.0 * gamma)
    }
}

/// The closed form
/// `√(−2ihϑ sin(nϑ) / ([h sin(nϑ) − iϑ cos(nϑ)]² + ϑ²))` at real `t`,
/// returned as the radicand.
fn radicand(p: &KernelParams, t: f64) -> C64 {
    let th = C64::from(p.theta_sq).sqrt();
    let h = C64::from(p.width_h);
    if p.theta_sq < 0.0 {
        // Divided through by cos²(ϑt) = cosh²(κt) to avoid overflow.
        let kt = p.theta_sq.abs().sqrt() * t;
        let tau = C64::new(0.0, kt.tanh());
        let den = (h * tau - C64::i() * th).powi(2) + th * th * (1.0 + tau * tau);
        let sech = 2.0 * (-kt).exp() / (1.0 + (-2.0 * kt).exp());
        return C64::new(0.0, -2.0) * h * th * tau / den * sech;
    }
    let (s, c) = ((th * t).sin(), (th * t).cos());
    let den = (h * s - C64::i() * th * c).powi(2) + th * th;
    C64::new(0.0, -2.0) * h * th * s / den
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSequence {
    /// `F_1 … F_{n_max}`.
    pub values: Vec<C64>,
    /// Values of `n` at which the radicand crossed the negative real axis.
    pub branch_events: Vec<usize>,
}

/// `F_1 … F_{n_max}` from the closed form, principal branch at `n = 1` and
/// continued in `n` by choosing the square-root sign nearest the previous
/// value.
pub fn kernel_sequence(p: &KernelParams, n_max: usize) -> Result<KernelSequence> {
    if p.theta_sq == 0.0 {
        return Err(Error::Kernel("theta_sq = 0".into()));
    }
    let mut values: Vec<C64> = Vec::with_capacity(n_max);
    let mut branch_events = Vec::new();
    let mut prev_rad: Option<C64> = None;
    for n in 1..=n_max {
        let r = radicand(p, n as f64);
        if !r.is_finite() {
            return Err(Error::Kernel(format!("radicand not finite at n = {n}")));
        }
        let root = r.sqrt();
        let value = match values.last() {
            None => root,
            Some(&last) => {
                if (root - last).norm() <= (-root - last).norm() {
                    root
                } else {
                    -root
                }
            }
        };
        if let Some(pr) = prev_rad {
            if pr.re < 0.0 && r.re < 0.0 && pr.im.signum() != r.im.signum() {
                log::debug!("kernel radicand crossed the negative real axis at n = {n}");
                branch_events.push(n);
            }
        }
        prev_rad = Some(r);
        values.push(value);
    }
    Ok(KernelSequence { values, branch_events })
}

pub fn quantum_kernel(p: &KernelParams, n: usize) -> Result<C64> {
    if n < 1 {
        return Err(Error::Kernel("n must be at least 1".into()));
    }
    Ok(*kernel_sequence(p, n)?.values.last().unwrap())
}

/// `⟨0| e^{−in(ω a†a + Γ(a² + a†²))} |0⟩` from the closed form.
///
/// The closed form describes the quadrature Hamiltonian, which differs from
/// `ω a†a` by the constant `ω/2`; that phase is restored here. The square
/// root is followed continuously from `t = 0`, where the amplitude is 1.
pub fn vacuum_kernel(omega: f64, gamma: f64, n: usize) -> Result<C64> {
    if n < 1 {
        return Err(Error::Kernel("n must be at least 1".into()));
    }
    Ok(*vacuum_kernel_sequence(omega, gamma, n)?.last().unwrap())
}

/// [`vacuum_kernel`] for `n = 1..=n_max`.
pub fn vacuum_kernel_sequence(omega: f64, gamma: f64, n_max: usize) -> Result<Vec<C64>> {
    if omega == 0.0 {
        return Err(Error::Kernel("vanishing ω has no oscillator form".into()));
    }
    if omega < 0.0 {
        return Ok(vacuum_kernel_sequence(-omega, gamma, n_max)?.into_iter().map(|z| z.conj()).collect());
    }
    let g = gamma.abs();
    let p = KernelParams::new(omega, g, omega + 2.0 * g)?;
    if p.theta_sq == 0.0 {
        return Err(Error::Kernel("theta_sq = 0".into()));
    }
    let scale = omega.max(p.theta_sq.abs().sqrt()).max(p.width_h);
    let sub = ((scale / 0.05).ceil() as usize).max(1);
    let mut value = C64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        for s in 1..=sub {
            let t = (n - 1) as f64 + s as f64 / sub as f64;
            let root = radicand(&p, t).sqrt();
            value = if (root - value).norm() <= (-root - value).norm() { root } else { -root };
        }
        out.push(value * C64::from_polar(1.0, n as f64 * omega / 2.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh_real;
    use ndarray::Array2;

    /// `⟨0| e^{−inH} |0⟩` in a truncated Fock space.
    fn boson_oracle(omega: f64, gamma: f64, n: usize) -> C64 {
        let dim = 200;
        let mut h = Array2::<f64>::zeros((dim, dim));
        for k in 0..dim {
            h[[k, k]] = omega * k as f64;
            if k + 2 < dim {
                let v = gamma * (((k + 1) * (k + 2)) as f64).sqrt();
                h[[k, k + 2]] = v;
                h[[k + 2, k]] = v;
            }
        }
        let (w, v) = eigh_real(&h).unwrap();
        (0..dim).map(|k| C64::from_polar(v[[0, k]].powi(2), -(n as f64) * w[k])).sum()
    }

    #[test]
    fn vacuum_kernel_matches_truncated_bosons() {
        for &(omega, gamma) in &[(0.3, 0.05), (0.1, 0.02), (-0.25, 0.07), (0.1, 0.08), (0.2, 0.0)] {
            for n in 1..=6 {
                let a = vacuum_kernel(omega, gamma, n).unwrap();
                let b = boson_oracle(omega, gamma, n);
                assert!((a - b).norm() < 1e-8, "ω = {omega}, Γ = {gamma}, n = {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn free_oscillator_literal_form_carries_constant_phase() {
        let omega = 0.4;
        let p = KernelParams::new(omega, 0.0, omega).unwrap();
        for n in 1..=8 {
            let lit = quantum_kernel(&p, n).unwrap();
            let direct = boson_oracle(omega, 0.0, n);
            assert!((lit.norm() - direct.norm()).abs() < 1e-8);
            assert!((direct - C64::new(1.0, 0.0)).norm() < 1e-8);
            let expected = C64::from_polar(1.0, -(n as f64) * omega / 2.0);
            assert!((lit - expected).norm() < 1e-8, "n = {n}: {lit}");
        }
    }

    #[test]
    fn saddle_kernel_decays() {
        let p = KernelParams::new(0.1, 0.08, 0.26).unwrap();
        assert!(p.theta_sq < 0.0);
        let seq = kernel_sequence(&p, 60).unwrap();
        let mags: Vec<f64> = seq.values.iter().map(|z| z.norm()).collect();
        assert!(mags[59] < mags[9] && mags[9] < mags[0]);
        let long = vacuum_kernel_sequence(0.1, 0.08, 20_000).unwrap();
        assert!(long.iter().all(|z| z.is_finite()));
        assert!(long[19_999].norm() < 1e-100);
        for n in 1..=6 {
            assert!((vacuum_kernel(0.1, 0.08, n).unwrap().norm() - boson_oracle(0.1, 0.08, n).norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn stable_kernel_is_bounded() {
        let p = KernelParams::new(0.3, 0.05, 0.4).unwrap();
        let seq = kernel_sequence(&p, 2000).unwrap();
        let bound = seq.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(bound.is_finite() && bound < 10.0);
    }

    #[test]
    fn hessian_identification() {
        let h = [[0.4, 0.03], [0.03, -0.2]];
        let p = KernelParams::from_hessian(&h).unwrap();
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        assert!((p.theta_sq - det / 4.0).abs() <= 1e-8 * (det / 4.0).abs());
        assert!(p.theta_sq < 0.0);
        assert!(KernelParams::new(0.1, -1.0, 1.0).is_err());
        assert!(quantum_kernel(&KernelParams::new(0.5, 0.25, 1.0).unwrap(), 1).is_err());
    }
}
