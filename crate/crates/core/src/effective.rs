//! Effective Hamiltonians `H_E T` of both drives, unfolded quasienergies and
//! their pairing with the exact Floquet phases.

use std::f64::consts::TAU;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::{circular_distance, fold, DriveConfig, DriveKind};
use crate::linalg::{dagger, eigh, CMatrix};
use crate::spin::SpinSystem;

/// Largest `hT` and `K` accepted by the kicked effective Hamiltonian.
pub const KICKED_REGULAR_LIMIT: f64 = 0.5;
/// Distance from the singular set `2πl`, `l ≠ 0`, below which `d(x)` is refused.
pub const SINGULAR_MARGIN: f64 = 1e-6;

/// Pairing tolerances between folded unfolded quasienergies and exact phases.
pub const KICKED_PHASE_TOLERANCE: f64 = 3e-2;
pub const AC_PHASE_TOLERANCE: f64 = 2e-2;

#[derive(Debug, Clone, Serialize)]
pub struct Validity {
    /// Smallest distance of a kicked diagonal argument from `2πl`, `l ≠ 0`.
    pub singular_distance: Option<f64>,
    /// Set when a soft precondition was violated.
    pub warning: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    /// `H_E T`, Hermitian.
    pub matrix: CMatrix,
    pub drive: DriveConfig,
    pub validity: Validity,
}

/// `d(x) = −ix/(e^{−ix} − 1)` continued by `d(0) = 1`.
pub fn kicked_diagonal(x: f64) -> C64 {
    if x.abs() < 1e-4 {
        C64::new(1.0 - x * x / 12.0, x / 2.0)
    } else {
        C64::new(0.0, -x) / (C64::from_polar(1.0, -x) - 1.0)
    }
}

fn singular_distance(x: f64) -> f64 {
    let l = (x / TAU).round();
    if l == 0.0 {
        let next = if x >= 0.0 { TAU } else { -TAU };
        (x - next).abs()
    } else {
        (x - l * TAU).abs()
    }
}

/// `(hT/2)[J₊ D + h.c.]` for a diagonal `D` given per basis index.
fn dressed_hopping(sys: &SpinSystem, ht: f64, diag: &[C64]) -> CMatrix {
    let mut a = sys.jplus.clone();
    for mut row in a.rows_mut() {
        for (z, d) in row.iter_mut().zip(diag) {
            *z *= d;
        }
    }
    (&a + &dagger(&a)).mapv(|z| z * (ht / 2.0))
}

pub fn kicked_effective_hamiltonian(sys: &SpinSystem, cfg: &DriveConfig) -> Result<EffectiveHamiltonian> {
    let DriveKind::Kicked { k } = cfg.kind else {
        return Err(Error::WrongDrive { expected: "kicked" });
    };
    if cfg.ht.abs() > KICKED_REGULAR_LIMIT || k.abs() > KICKED_REGULAR_LIMIT {
        return Err(Error::OutsideRegularRegime(format!(
            "kicked effective Hamiltonian needs hT, K ≤ {KICKED_REGULAR_LIMIT} (got hT = {}, K = {k})",
            cfg.ht
        )));
    }
    let j = sys.j();
    let m = sys.m_values();
    let mut diag = Vec::with_capacity(m.len());
    let mut dist = f64::INFINITY;
    for &mi in &m {
        let x = k / (2.0 * j) * (2.0 * mi + 1.0);
        let d = singular_distance(x);
        if d < SINGULAR_MARGIN {
            return Err(Error::SingularArgument(x));
        }
        dist = dist.min(d);
        diag.push(kicked_diagonal(x));
    }
    let mut h = dressed_hopping(sys, cfg.ht, &diag);
    for (i, mi) in m.iter().enumerate() {
        h[[i, i]] += k / (2.0 * j) * mi * mi;
    }
    Ok(EffectiveHamiltonian {
        matrix: h,
        drive: *cfg,
        validity: Validity { singular_distance: Some(dist), warning: None },
    })
}

pub fn ac_effective_hamiltonian(sys: &SpinSystem, cfg: &DriveConfig) -> Result<EffectiveHamiltonian> {
    let DriveKind::Ac { gt } = cfg.kind else {
        return Err(Error::WrongDrive { expected: "ac" });
    };
    cfg.validate()?;
    let warning = if cfg.ht.abs() > 0.2 * cfg.omega_t {
        let msg = format!("hT = {} is not small against ΩT = {}", cfg.ht, cfg.omega_t);
        log::warn!("{msg}");
        Some(msg)
    } else {
        None
    };
    let j = sys.j();
    let diag: Vec<C64> =
        sys.m_values().iter().map(|&mi| C64::from(libm::j0(gt / (2.0 * j * cfg.omega_t) * (2.0 * mi + 1.0)))).collect();
    Ok(EffectiveHamiltonian {
        matrix: dressed_hopping(sys, cfg.ht, &diag),
        drive: *cfg,
        validity: Validity { singular_distance: None, warning },
    })
}

pub fn effective_hamiltonian(sys: &SpinSystem, cfg: &DriveConfig) -> Result<EffectiveHamiltonian> {
    match cfg.kind {
        DriveKind::Kicked { .. } => kicked_effective_hamiltonian(sys, cfg),
        DriveKind::Ac { .. } => ac_effective_hamiltonian(sys, cfg),
    }
}

impl EffectiveHamiltonian {
    /// Phase tolerance used when pairing with the exact spectrum.
    pub fn phase_tolerance(&self) -> f64 {
        match self.drive.kind {
            DriveKind::Kicked { .. } => KICKED_PHASE_TOLERANCE,
            DriveKind::Ac { .. } => AC_PHASE_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnfoldedSpectrum {
    /// Ascending `E_μ T`.
    pub energies: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn unfolded_spectrum(h: &EffectiveHamiltonian) -> Result<UnfoldedSpectrum> {
    let (w, v): (Array1<f64>, CMatrix) = eigh(&h.matrix)?;
    Ok(UnfoldedSpectrum { energies: w.to_vec(), vectors: v })
}

impl UnfoldedSpectrum {
    pub fn folded(&self, omega_t: f64) -> Vec<f64> {
        self.energies.iter().map(|&e| fold(e, omega_t)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Pairing {
    /// For each unfolded level, the index of the matched exact phase.
    pub partner: Vec<usize>,
    /// Circular distance of each matched pair.
    pub residual: Vec<f64>,
    pub max_deviation: f64,
}

/// Greedy one-to-one matching of folded unfolded levels to exact phases by
/// increasing circular distance.
pub fn pair_with_exact(unfolded: &UnfoldedSpectrum, exact: &[f64], omega_t: f64) -> Pairing {
    let folded = unfolded.folded(omega_t);
    let n = folded.len().min(exact.len());
    let scale = TAU / omega_t;
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(folded.len() * exact.len());
    for (a, &u) in folded.iter().enumerate() {
        for (b, &e) in exact.iter().enumerate() {
            cand.push((circular_distance(u * scale, e * scale) / scale, a, b));
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut partner = vec![usize::MAX; folded.len()];
    let mut residual = vec![f64::NAN; folded.len()];
    let mut taken = vec![false; exact.len()];
    let mut matched = 0;
    for (d, a, b) in cand {
        if matched == n {
            break;
        }
        if partner[a] == usize::MAX && !taken[b] {
            partner[a] = b;
            residual[a] = d;
            taken[b] = true;
            matched += 1;
        }
    }
    let max_deviation = residual.iter().copied().filter(|r| r.is_finite()).fold(0.0, f64::max);
    Pairing { partner, residual, max_deviation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_defect, max_abs_diff};
    use approx::assert_abs_diff_eq;

    #[test]
    fn d_function_identity() {
        for i in -400..=400 {
            let x = i as f64 * 0.0137 + 1e-7 * (i % 3) as f64;
            if singular_distance(x) < 1e-3 {
                continue;
            }
            let lhs = kicked_diagonal(x) * (C64::from_polar(1.0, -x) - 1.0);
            assert!((lhs - C64::new(0.0, -x)).norm() < 1e-12, "x = {x}");
        }
        assert_eq!(kicked_diagonal(0.0), C64::new(1.0, 0.0));
        let (a, b) = (kicked_diagonal(0.99e-4), kicked_diagonal(1.01e-4));
        assert!((a - b).norm() < 1e-5);
    }

    #[test]
    fn kicked_limits() {
        let s = SpinSystem::new(4.0).unwrap();
        let h = kicked_effective_hamiltonian(&s, &DriveConfig::kicked(0.2, 0.0)).unwrap();
        assert!(max_abs_diff(&h.matrix, &s.jx.mapv(|z| z * 0.2)) < 1e-15);

        let h = kicked_effective_hamiltonian(&s, &DriveConfig::kicked(0.0, 0.4)).unwrap();
        let u = unfolded_spectrum(&h).unwrap();
        let mut expect: Vec<f64> = s.m_values().iter().map(|m| 0.4 / 8.0 * m * m).collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in u.energies.iter().zip(&expect) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn kicked_guard_and_hermiticity() {
        let s = SpinSystem::new(10.0).unwrap();
        assert!(matches!(
            kicked_effective_hamiltonian(&s, &DriveConfig::kicked(0.1, 0.8)),
            Err(Error::OutsideRegularRegime(_))
        ));
        let h = kicked_effective_hamiltonian(&s, &DriveConfig::kicked(0.1, 0.3)).unwrap();
        assert!(hermiticity_defect(&h.matrix) <= 1e-10);
        assert!(h.validity.singular_distance.unwrap() > 1.0);
    }

    #[test]
    fn singular_argument_detected() {
        assert!(singular_distance(TAU) < 1e-15);
        assert!(singular_distance(-2.0 * TAU + 1e-9) < 1e-8);
        assert_abs_diff_eq!(singular_distance(0.0), TAU);
    }

    #[test]
    fn ac_limits() {
        let s = SpinSystem::new(6.5).unwrap();
        let h = ac_effective_hamiltonian(&s, &DriveConfig::ac(0.1, 0.0, TAU)).unwrap();
        assert!(max_abs_diff(&h.matrix, &s.jx.mapv(|z| z * 0.1)) < 1e-15);
        let h = ac_effective_hamiltonian(&s, &DriveConfig::ac(0.1, 20.0, TAU)).unwrap();
        assert!(hermiticity_defect(&h.matrix) <= 1e-10);
        assert!(h.validity.warning.is_none());
        let h = ac_effective_hamiltonian(&s, &DriveConfig::ac(2.0, 20.0, TAU)).unwrap();
        assert!(h.validity.warning.is_some());
    }

    #[test]
    fn bessel_weights_bounded() {
        for i in 0..2000 {
            let x = i as f64 * 0.05;
            assert!(libm::j0(x).abs() <= 1.0);
        }
    }

    #[test]
    fn greedy_pairing() {
        let u = UnfoldedSpectrum { energies: vec![0.0, 1.0, 7.0], vectors: CMatrix::eye(3) };
        let p = pair_with_exact(&u, &[0.99, 0.72, 0.01], TAU);
        assert_eq!(p.partner, vec![2, 0, 1]);
        assert_abs_diff_eq!(p.max_deviation, 0.01, epsilon = 1e-12);
    }
}
