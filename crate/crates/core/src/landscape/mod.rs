//! Quasienergy landscapes `E_G(Q, P)` on the Bloch disc, their derivatives
//! and the semiclassical velocity field.

mod critical;

pub use critical::{
    find_critical_points, separatrix_energy, CriticalInventory, CriticalKind, CriticalPoint, SeedFailure,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::{DriveConfig, DriveKind};
use crate::spin::bloch_from_alpha;

/// Squared disc radius of the boundary, which is the south pole.
pub const DISC_R2: f64 = 2.0;

const GRADIENT_STEP: f64 = 1e-5;
const HESSIAN_STEP: f64 = 1e-3;

/// `E_G T` of the kicked top at `(Q, P)`.
pub fn qel_kicked(q: f64, p: f64, ht: f64, k: f64) -> Result<f64> {
    let b = bloch_from_alpha(q, p)?;
    kicked_xyz(b.x, b.y, b.z, ht, k)
}

/// `E_G T` of the ac-driven model at `(Q, P)`.
pub fn qel_ac(q: f64, p: f64, ht: f64, gt: f64, omega_t: f64) -> Result<f64> {
    let b = bloch_from_alpha(q, p)?;
    Ok(ac_xyz(b.x, b.z, ht, gt, omega_t))
}

fn kicked_xyz(x: f64, y: f64, z: f64, ht: f64, k: f64) -> Result<f64> {
    let kz = k * z;
    let l = (kz / std::f64::consts::TAU).round();
    if l != 0.0 && (kz - l * std::f64::consts::TAU).abs() < 1e-8 {
        return Err(Error::LandscapeSingularity(kz));
    }
    let u = kz / 2.0;
    let ucot = if kz.abs() < 1e-3 { 1.0 - kz * kz / 12.0 } else { u / u.tan() };
    Ok(0.5 * k * z * z + ht * x * ucot - 0.5 * ht * k * z * y)
}

fn ac_xyz(x: f64, z: f64, ht: f64, gt: f64, omega_t: f64) -> f64 {
    ht * x * libm::j0(gt / omega_t * z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum LandscapeModel {
    Kicked { ht: f64, k: f64 },
    Ac { ht: f64, gt: f64, omega_t: f64 },
}

/// Coordinate chart on the sphere. The antipodal chart is the primary one
/// composed with `X → −X, Y → −Y`; its origin is the south pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    Primary,
    Antipodal,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FinderOptions {
    /// Seed grid resolution per axis.
    pub grid: usize,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub merge_radius: f64,
}

impl Default for FinderOptions {
    fn default() -> Self {
        Self { grid: 200, newton_tol: 1e-12, max_iter: 50, merge_radius: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Landscape {
    pub model: LandscapeModel,
    /// Spin quantum number used for extensive quantities.
    pub j: f64,
    pub omega_t: f64,
    pub options: FinderOptions,
}

pub type Gradient = [f64; 2];
pub type Hessian = [[f64; 2]; 2];

impl Landscape {
    pub fn new(cfg: &DriveConfig, j: f64) -> Self {
        let model = match cfg.kind {
            DriveKind::Kicked { k } => LandscapeModel::Kicked { ht: cfg.ht, k },
            DriveKind::Ac { gt } => LandscapeModel::Ac { ht: cfg.ht, gt, omega_t: cfg.omega_t },
        };
        Self { model, j, omega_t: cfg.omega_t, options: FinderOptions::default() }
    }

    pub fn with_options(mut self, options: FinderOptions) -> Self {
        self.options = options;
        self
    }

    pub fn energy_xyz(&self, x: f64, y: f64, z: f64) -> Result<f64> {
        match self.model {
            LandscapeModel::Kicked { ht, k } => kicked_xyz(x, y, z, ht, k),
            LandscapeModel::Ac { ht, gt, omega_t } => Ok(ac_xyz(x, z, ht, gt, omega_t)),
        }
    }

    /// `E_G T` at disc coordinates of the primary chart.
    pub fn energy(&self, q: f64, p: f64) -> Result<f64> {
        self.energy_in(Chart::Primary, q, p)
    }

    pub fn energy_in(&self, chart: Chart, q: f64, p: f64) -> Result<f64> {
        let b = bloch_from_alpha(q, p)?;
        match chart {
            Chart::Primary => self.energy_xyz(b.x, b.y, b.z),
            Chart::Antipodal => self.energy_xyz(-b.x, -b.y, b.z),
        }
    }

    /// Gradient and Hessian in `(Q, P)` by Richardson-extrapolated central
    /// differences.
    pub fn gradient_and_hessian(&self, q: f64, p: f64) -> Result<(Gradient, Hessian)> {
        self.derivatives_in(Chart::Primary, q, p)
    }

    pub fn gradient_in(&self, chart: Chart, q: f64, p: f64) -> Result<Gradient> {
        let e = |a: f64, b: f64| self.energy_in(chart, a, b);
        let central = |h: f64| -> Result<Gradient> {
            Ok([(e(q + h, p)? - e(q - h, p)?) / (2.0 * h), (e(q, p + h)? - e(q, p - h)?) / (2.0 * h)])
        };
        let (g1, g2) = (central(GRADIENT_STEP)?, central(GRADIENT_STEP / 2.0)?);
        Ok([(4.0 * g2[0] - g1[0]) / 3.0, (4.0 * g2[1] - g1[1]) / 3.0])
    }

    pub fn hessian_in(&self, chart: Chart, q: f64, p: f64) -> Result<Hessian> {
        let e = |a: f64, b: f64| self.energy_in(chart, a, b);
        let e0 = e(q, p)?;
        let second = |h: f64| -> Result<Hessian> {
            let qq = (e(q + h, p)? - 2.0 * e0 + e(q - h, p)?) / (h * h);
            let pp = (e(q, p + h)? - 2.0 * e0 + e(q, p - h)?) / (h * h);
            let qp = (e(q + h, p + h)? - e(q + h, p - h)? - e(q - h, p + h)? + e(q - h, p - h)?) / (4.0 * h * h);
            Ok([[qq, qp], [qp, pp]])
        };
        let (a, b) = (second(HESSIAN_STEP)?, second(HESSIAN_STEP / 2.0)?);
        let r = |i: usize, k: usize| (4.0 * b[i][k] - a[i][k]) / 3.0;
        Ok([[r(0, 0), r(0, 1)], [r(1, 0), r(1, 1)]])
    }

    pub fn derivatives_in(&self, chart: Chart, q: f64, p: f64) -> Result<(Gradient, Hessian)> {
        Ok((self.gradient_in(chart, q, p)?, self.hessian_in(chart, q, p)?))
    }

    /// `V = √(|∂E/∂α|² + |∂E/∂α*|²) = |∇_{QP} E|/√2`.
    pub fn velocity(&self, q: f64, p: f64) -> Result<f64> {
        let g = self.gradient_in(Chart::Primary, q, p)?;
        Ok(g[0].hypot(g[1]) / std::f64::consts::SQRT_2)
    }

    /// True when `E(−X, −Y, Z) = −E(X, Y, Z)` holds on a probe set, which
    /// makes the lower magnetization branch the mirror of the upper one.
    pub fn has_inversion_symmetry(&self) -> bool {
        let probes = [(0.3, 0.2), (-0.7, 0.5), (0.9, -0.4), (0.1, 1.1), (-1.0, -0.6)];
        probes.iter().all(|&(q, p)| {
            let b = bloch_from_alpha(q, p).unwrap();
            match (self.energy_xyz(b.x, b.y, b.z), self.energy_xyz(-b.x, -b.y, b.z)) {
                (Ok(a), Ok(c)) => (a + c).abs() < 1e-12,
                _ => false,
            }
        })
    }

    /// Raster of `(Q, P, E_G T)` on an `n × n` grid, skipping points outside
    /// the disc.
    pub fn raster(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let r = DISC_R2.sqrt();
        let step = 2.0 * r / (n.max(2) - 1) as f64;
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let (q, p) = (-r + a as f64 * step, -r + b as f64 * step);
                if q * q + p * p < DISC_R2 {
                    if let Ok(e) = self.energy(q, p) {
                        out.push((q, p, e));
                    }
                }
            }
        }
        out
    }
}
