//! One-period Floquet operators for the kicked top and the ac-driven model,
//! their eigenphases and modes, Brillouin-zone folding and trace sequences.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh_real, set_block, unitarity_defect, unitary_eig, vnorm, CMatrix, CVector};
use crate::spin::SpinSystem;

/// Default number of split steps for the ac propagator.
pub const DEFAULT_AC_STEPS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum DriveKind {
    /// Delta kicks of strength `K` once per period.
    Kicked { k: f64 },
    /// Monochromatic drive `G cos Ωt` with amplitude `GT`.
    Ac { gt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub kind: DriveKind,
    pub ht: f64,
    pub omega_t: f64,
}

impl DriveConfig {
    pub fn kicked(ht: f64, k: f64) -> Self {
        Self { kind: DriveKind::Kicked { k }, ht, omega_t: TAU }
    }

    pub fn ac(ht: f64, gt: f64, omega_t: f64) -> Self {
        Self { kind: DriveKind::Ac { gt }, ht, omega_t }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_t.is_finite() && self.omega_t > 0.0) {
            return Err(Error::InvalidParameter(format!("omega_t must be positive, got {}", self.omega_t)));
        }
        if !self.ht.is_finite() {
            return Err(Error::InvalidParameter("ht must be finite".into()));
        }
        match self.kind {
            DriveKind::Kicked { k } => {
                if !k.is_finite() {
                    return Err(Error::InvalidParameter("k must be finite".into()));
                }
                if self.ht.abs() > 1.0 || k.abs() > 1.0 {
                    log::warn!("kicked top outside the regular regime (hT = {}, K = {k})", self.ht);
                }
            }
            DriveKind::Ac { gt } => {
                if !gt.is_finite() {
                    return Err(Error::InvalidParameter("gt must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// Maps `x` into the half-open zone `[-ΩT/2, ΩT/2)`.
pub fn fold(x: f64, omega_t: f64) -> f64 {
    let mut y = x - omega_t * ((x + omega_t / 2.0) / omega_t).floor();
    if y >= omega_t / 2.0 {
        y -= omega_t;
    }
    if y < -omega_t / 2.0 {
        y += omega_t;
    }
    y
}

/// `exp(-i hT J_x) · exp(-i (K/2j) J_z²)`.
pub fn kicked_floquet(sys: &SpinSystem, cfg: &DriveConfig) -> Result<CMatrix> {
    let DriveKind::Kicked { k } = cfg.kind else {
        return Err(Error::WrongDrive { expected: "kicked" });
    };
    cfg.validate()?;
    let j = sys.j();
    let rot = real_exp(sys.jx_real(), cfg.ht)?;
    let kick: Vec<C64> = sys.m_values().iter().map(|m| C64::from_polar(1.0, -k / (2.0 * j) * m * m)).collect();
    let mut f = rot;
    for mut row in f.rows_mut() {
        for (z, d) in row.iter_mut().zip(&kick) {
            *z *= d;
        }
    }
    Ok(f)
}

/// `exp(-i t A)` for a real symmetric `A`.
fn real_exp(a: &Array2<f64>, t: f64) -> Result<CMatrix> {
    let (w, v) = eigh_real(a)?;
    let vc = v.mapv(C64::from);
    let mut scaled = vc.clone();
    for (mut col, &l) in scaled.columns_mut().into_iter().zip(w.iter()) {
        let ph = C64::from_polar(1.0, -t * l);
        col.mapv_inplace(|z| z * ph);
    }
    Ok(scaled.dot(&vc.t()))
}

/// Time-ordered one-period propagator of `H(t) = h J_x + g(t) J_z²/(2j)`,
/// `g(t) = G cos Ωt`, by symmetric splitting over `steps` sub-intervals.
///
/// Each step applies the exact `J_z²` phase accumulated over the second half
/// of the interval, the full `J_x` rotation, and the phase of the first half.
/// The work is done separately in the two sectors of the reflection
/// `m → −m`, which commutes with both `J_x` and `J_z²`.
pub fn ac_floquet(sys: &SpinSystem, cfg: &DriveConfig, steps: usize) -> Result<CMatrix> {
    let DriveKind::Ac { gt } = cfg.kind else {
        return Err(Error::WrongDrive { expected: "ac" });
    };
    cfg.validate()?;
    if steps < 1 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let dim = sys.dim();
    let j = sys.j();
    let m = sys.m_values();
    let w = cfg.omega_t;
    let delta = 1.0 / steps as f64;
    // ∫ g dτ over [a, b] in units of the period.
    let g_int = |a: f64, b: f64| gt * ((w * b).sin() - (w * a).sin()) / w;

    let sectors = parity_sectors(dim);
    let mut sector_ops = Vec::new();
    for sector in &sectors {
        let size = sector.len();
        let mut jx_s = Array2::<f64>::zeros((size, size));
        for (a, va) in sector.iter().enumerate() {
            for (b, vb) in sector.iter().enumerate() {
                let mut s = 0.0;
                for &(ia, ca) in va {
                    for &(ib, cb) in vb {
                        s += ca * cb * sys.jx_real()[[ia, ib]];
                    }
                }
                jx_s[[a, b]] = s;
            }
        }
        let msq: Vec<f64> = sector.iter().map(|v| m[v[0].0].powi(2) / (2.0 * j)).collect();
        let e = real_exp(&jx_s, delta * cfg.ht)?;
        sector_ops.push((e, msq));
    }

    let mut results = Vec::new();
    for (e, msq) in &sector_ops {
        let size = msq.len();
        let diag = |phase: f64| -> Vec<C64> { msq.iter().map(|&c| C64::from_polar(1.0, -phase * c)).collect() };
        let mut f = CMatrix::eye(size);
        let mut pending = g_int(0.0, 0.5 * delta);
        for step in 0..steps {
            let t0 = step as f64 * delta;
            scale_rows(&mut f, &diag(pending));
            f = e.dot(&f);
            pending = g_int(t0 + 0.5 * delta, t0 + delta);
            if step + 1 < steps {
                pending += g_int(t0 + delta, t0 + 1.5 * delta);
            }
        }
        scale_rows(&mut f, &diag(pending));
        results.push(f);
    }

    // Back to the Dicke basis: F = S (F_even ⊕ F_odd) Sᵀ.
    let mut s = CMatrix::zeros((dim, dim));
    let mut col = 0;
    for sector in &sectors {
        for v in sector {
            for &(i, c) in v {
                s[[i, col]] = C64::from(c);
            }
            col += 1;
        }
    }
    let mut block = CMatrix::zeros((dim, dim));
    set_block(&mut block, 0, &results[0]);
    set_block(&mut block, sectors[0].len(), &results[1]);
    Ok(s.dot(&block).dot(&s.t()))
}

type SectorVector = Vec<(usize, f64)>;

/// Orthonormal basis of the even and odd sectors of `m → −m`.
fn parity_sectors(dim: usize) -> [Vec<SectorVector>; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for k in 0..dim / 2 {
        let partner = dim - 1 - k;
        even.push(vec![(k, r), (partner, r)]);
        odd.push(vec![(k, r), (partner, -r)]);
    }
    if dim % 2 == 1 {
        even.push(vec![(dim / 2, 1.0)]);
    }
    [even, odd]
}

fn scale_rows(f: &mut CMatrix, d: &[C64]) {
    for (mut row, &c) in f.rows_mut().into_iter().zip(d) {
        row.mapv_inplace(|z| z * c);
    }
}

/// `‖F(steps) − F(2·steps)‖_max`, a self-convergence diagnostic.
pub fn ac_self_convergence(sys: &SpinSystem, cfg: &DriveConfig, steps: usize) -> Result<f64> {
    let a = ac_floquet(sys, cfg, steps)?;
    let b = ac_floquet(sys, cfg, 2 * steps)?;
    Ok(crate::linalg::max_abs_diff(&a, &b))
}

/// Builds the exact Floquet operator for either drive.
pub fn floquet_operator(sys: &SpinSystem, cfg: &DriveConfig, ac_steps: usize) -> Result<CMatrix> {
    match cfg.kind {
        DriveKind::Kicked { .. } => kicked_floquet(sys, cfg),
        DriveKind::Ac { .. } => ac_floquet(sys, cfg, ac_steps),
    }
}

/// Eigenphases `φ = εT ∈ [−π, π)` in ascending order, the matching Floquet
/// modes as columns, and the per-mode residuals `‖Fv − e^{−iφ}v‖`.
#[derive(Debug, Clone)]
pub struct FloquetSpectrum {
    pub phases: Vec<f64>,
    pub modes: CMatrix,
    pub residuals: Vec<f64>,
}

const UNITARITY_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-8;

pub fn diagonalize_floquet(f: &CMatrix) -> Result<FloquetSpectrum> {
    let defect = unitarity_defect(f);
    if defect > UNITARITY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    let (vals, vecs) = unitary_eig(f)?;
    let raw: Vec<f64> = vals.iter().map(|l| fold(-l.arg(), TAU)).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]).then(a.cmp(&b)));

    let n = f.nrows();
    let mut modes = CMatrix::zeros((n, n));
    let mut phases = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for (c, &i) in order.iter().enumerate() {
        let v: CVector = vecs.column(i).to_owned();
        let phase = raw[i];
        let r = &f.dot(&v) - &v.mapv(|z| z * C64::from_polar(1.0, -phase));
        let res = vnorm(&r);
        if res > RESIDUAL_TOL {
            return Err(Error::Eigen(format!("mode {c} residual {res:.3e}")));
        }
        modes.column_mut(c).assign(&v);
        phases.push(phase);
        residuals.push(res);
    }
    Ok(FloquetSpectrum { phases, modes, residuals })
}

impl FloquetSpectrum {
    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// `T_n = Σ_μ e^{−inφ_μ}` for `n = 1..=n_max`.
    pub fn traces(&self, n_max: usize) -> Vec<C64> {
        traces_from_phases(&self.phases, n_max)
    }
}

pub fn traces_from_phases(phases: &[f64], n_max: usize) -> Vec<C64> {
    (1..=n_max).into_par_iter().map(|n| phases.iter().map(|&p| C64::from_polar(1.0, -(n as f64) * p)).sum()).collect()
}

/// Trace sequence `T_1..T_{n_max}` of a unitary, computed from its eigenphases.
pub fn floquet_traces(f: &CMatrix, n_max: usize) -> Result<Vec<C64>> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    Ok(diagonalize_floquet(f)?.traces(n_max))
}

/// States `ψ(lT) = F^l ψ_0` for `l = 0..=L`.
pub fn stroboscopic_evolve(f: &CMatrix, psi0: &CVector, periods: usize) -> Result<Vec<CVector>> {
    check_normalized(psi0)?;
    let mut out = Vec::with_capacity(periods + 1);
    out.push(psi0.clone());
    for l in 0..periods {
        let next = f.dot(&out[l]);
        out.push(next);
    }
    Ok(out)
}

pub(crate) fn check_normalized(psi: &CVector) -> Result<()> {
    let n = vnorm(psi);
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// Wraps a phase difference into `(−π, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    fold(a - b, TAU).abs().min(PI)
}
