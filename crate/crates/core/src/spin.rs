//! Collective angular momentum in the Dicke subspace, Bloch coordinates and
//! spin coherent states.
//!
//! Basis vectors are ordered `m = +j, j-1, …, -j`, so index `k` carries
//! `m = j - k`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh_real, expectation, vnorm, CMatrix, CVector};

#[derive(Debug, Clone)]
pub struct SpinSystem {
    two_j: u32,
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
    pub jplus: CMatrix,
    pub jminus: CMatrix,
    jx_real: Array2<f64>,
}

impl SpinSystem {
    /// Builds the operators for spin `j`; `2j` must be a positive integer.
    pub fn new(j: f64) -> Result<Self> {
        let two = 2.0 * j;
        if !(two.is_finite() && two >= 1.0 && (two - two.round()).abs() < 1e-12) {
            return Err(Error::InvalidSpin(j));
        }
        Ok(Self::from_twice(two.round() as u32))
    }

    /// Same as [`SpinSystem::new`] with the argument given as `2j`.
    pub fn from_twice(two_j: u32) -> Self {
        assert!(two_j >= 1, "2j must be positive");
        let j = two_j as f64 / 2.0;
        let dim = two_j as usize + 1;
        let m = |k: usize| j - k as f64;

        let mut jplus = CMatrix::zeros((dim, dim));
        for k in 1..dim {
            let mk = m(k);
            jplus[[k - 1, k]] = C64::from((j * (j + 1.0) - mk * (mk + 1.0)).sqrt());
        }
        let jminus = jplus.t().to_owned();
        let jz = Array2::from_diag(&Array1::from_iter((0..dim).map(|k| C64::from(m(k)))));
        let jx = (&jplus + &jminus).mapv(|z| z * 0.5);
        let jy = (&jplus - &jminus).mapv(|z| z / C64::new(0.0, 2.0));
        let jx_real = jx.mapv(|z| z.re);
        Self { two_j, jx, jy, jz, jplus, jminus, jx_real }
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    /// Hilbert-space dimension `2j + 1`.
    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// Magnetic quantum numbers in basis order.
    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.j() - k as f64).collect()
    }

    /// The real symmetric tridiagonal `J_x` matrix.
    pub fn jx_real(&self) -> &Array2<f64> {
        &self.jx_real
    }

    /// Highest-weight `J_x` eigenstate `|j,j⟩_x`, with its largest-magnitude
    /// component real and positive.
    pub fn jx_highest(&self) -> Result<CVector> {
        let (_, v) = eigh_real(&self.jx_real)?;
        let col = v.column(self.dim() - 1);
        let pivot = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
        let sign = pivot.signum();
        Ok(col.mapv(|x| C64::from(x * sign)))
    }
}

/// A point on the unit sphere together with its disc coordinates
/// `α = Q + iP`, `Q² + P² ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub q: f64,
    pub p: f64,
}

pub fn bloch_from_alpha(q: f64, p: f64) -> Result<BlochPoint> {
    let r2 = q * q + p * p;
    if r2.is_nan() || r2 > 2.0 {
        return Err(Error::OutsideDomain { q, p });
    }
    let s = (2.0 - r2).max(0.0).sqrt();
    Ok(BlochPoint { x: 1.0 - r2, y: -p * s, z: q * s, q, p })
}

impl BlochPoint {
    /// Inverse of [`bloch_from_alpha`]. The south pole maps to `(√2, 0)`.
    pub fn from_cartesian(x: f64, y: f64, z: f64) -> Self {
        let s = (1.0 + x).max(0.0).sqrt();
        let (q, p) = if s < 1e-300 { (2f64.sqrt(), 0.0) } else { (z / s, -y / s) };
        Self { x, y, z, q, p }
    }
}

/// Stereographic parameter `γ = (Z + iY)/(1 + X)`.
pub fn gamma_from_bloch(r: &BlochPoint) -> Result<C64> {
    let d = 1.0 + r.x;
    if d.abs() < 1e-14 {
        return Err(Error::SouthPole);
    }
    Ok(C64::new(r.z / d, r.y / d))
}

/// Inverse stereographic map: the Bloch point whose parameter is `γ`.
pub fn bloch_from_gamma(gamma: C64) -> BlochPoint {
    let n = gamma.norm_sqr();
    let x = (1.0 - n) / (1.0 + n);
    let z = 2.0 * gamma.re / (1.0 + n);
    let y = 2.0 * gamma.im / (1.0 + n);
    BlochPoint::from_cartesian(x, y, z)
}

#[derive(Debug, Clone)]
pub struct SpinCoherentState {
    pub gamma: C64,
    pub amplitudes: CVector,
}

/// Coherent state centred on the Bloch point with stereographic parameter
/// `γ`, built as `exp(γ̄ (J_z + iJ_y)) |j,j⟩_x` and renormalized.
///
/// `J_z + iJ_y` lowers the `J_x` weight, so the exponential series
/// terminates after `2j` terms and is summed exactly.
pub fn spin_coherent_state(sys: &SpinSystem, gamma: C64) -> Result<SpinCoherentState> {
    let lower = &sys.jz + &sys.jy.mapv(|z| z * C64::i());
    let xi = gamma.conj();
    let mut term = sys.jx_highest()?;
    let mut sum = term.clone();
    for k in 1..=sys.two_j() as usize {
        term = lower.dot(&term).mapv(|z| z * xi / k as f64);
        sum += &term;
        let scale = vnorm(&sum);
        if scale > 1e100 {
            sum.mapv_inplace(|z| z / scale);
            term.mapv_inplace(|z| z / scale);
        }
    }
    let nrm = vnorm(&sum);
    Ok(SpinCoherentState { gamma, amplitudes: sum.mapv(|z| z / nrm) })
}

impl SpinCoherentState {
    /// `(⟨J_x⟩, ⟨J_y⟩, ⟨J_z⟩)/j`.
    pub fn mean_direction(&self, sys: &SpinSystem) -> [f64; 3] {
        let j = sys.j();
        [
            expectation(&sys.jx, &self.amplitudes).re / j,
            expectation(&sys.jy, &self.amplitudes).re / j,
            expectation(&sys.jz, &self.amplitudes).re / j,
        ]
    }
}
