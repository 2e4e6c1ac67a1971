//! Magnetization measurement protocol: Floquet-mode magnetization, cusp
//! detection, minimal-velocity initial conditions and stroboscopic time
//! averages of coherent states.

use rayon::prelude::*;
use serde::Serialize;

use crate::effective::{effective_hamiltonian, EffectiveHamiltonian};
use crate::error::{Error, Result};
use crate::floquet::{check_normalized, floquet_operator, DriveConfig, FloquetSpectrum};
use crate::landscape::{Chart, CriticalKind, CriticalPoint, Landscape, DISC_R2};
use crate::linalg::{expectation, hermiticity_defect, CMatrix, CVector};
use crate::spin::{bloch_from_alpha, gamma_from_bloch, spin_coherent_state, BlochPoint, SpinSystem};

/// Default number of periods in a time average.
pub const DEFAULT_PERIODS: usize = 1000;
const CONVERGENCE_WARNING: f64 = 1e-2;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModePoint {
    pub index: usize,
    /// `⟨Φ|H_E|Φ⟩ T`.
    pub e_t: f64,
    /// `⟨Φ|J_x|Φ⟩ / j`.
    pub jx: f64,
}

/// Magnetization of every Floquet mode against its unfolded quasienergy,
/// sorted by energy.
pub fn mode_magnetization(spec: &FloquetSpectrum, heff: &EffectiveHamiltonian, sys: &SpinSystem) -> Vec<ModePoint> {
    let j = sys.j();
    let mut out: Vec<ModePoint> = (0..spec.dim())
        .into_par_iter()
        .map(|i| {
            let v: CVector = spec.modes.column(i).to_owned();
            ModePoint {
                index: i,
                e_t: expectation(&heff.matrix, &v).re,
                jx: (expectation(&sys.jx, &v).re / j).clamp(-1.0, 1.0),
            }
        })
        .collect();
    out.sort_by(|a, b| a.e_t.total_cmp(&b.e_t).then(a.index.cmp(&b.index)));
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopePoint {
    pub e_t: f64,
    pub jx: f64,
}

/// For each of `bins` equal energy bins, the mode with the largest
/// magnetization.
pub fn upper_envelope(modes: &[ModePoint], bins: usize) -> Vec<EnvelopePoint> {
    if modes.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = modes.iter().map(|m| m.e_t).fold(f64::INFINITY, f64::min);
    let hi = modes.iter().map(|m| m.e_t).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut best: Vec<Option<EnvelopePoint>> = vec![None; bins];
    for m in modes {
        let b = if width > 0.0 { (((m.e_t - lo) / width) as usize).min(bins - 1) } else { 0 };
        if best[b].is_none_or(|p| m.jx > p.jx) {
            best[b] = Some(EnvelopePoint { e_t: m.e_t, jx: m.jx });
        }
    }
    best.into_iter().flatten().collect()
}

/// Piecewise-linear interpolation of an envelope at `e`.
pub fn envelope_at(env: &[EnvelopePoint], e: f64) -> Option<f64> {
    let k = env.windows(2).position(|w| w[0].e_t <= e && e <= w[1].e_t)?;
    let (a, b) = (env[k], env[k + 1]);
    if b.e_t == a.e_t {
        return Some(a.jx.max(b.jx));
    }
    let t = (e - a.e_t) / (b.e_t - a.e_t);
    Some(a.jx + t * (b.jx - a.jx))
}

#[derive(Debug, Clone, Serialize)]
pub struct CuspReport {
    pub location: f64,
    pub spacing: f64,
    pub second_difference: f64,
    pub envelope: Vec<EnvelopePoint>,
}

/// Locates the cusp of the upper envelope: the interior extremum with the
/// largest second difference, ignoring points next to jumps larger than
/// `jump_tol` (where a new family of orbits enters).
pub fn detect_cusp(modes: &[ModePoint], bins: usize, jump_tol: f64) -> Option<CuspReport> {
    let env = upper_envelope(modes, bins);
    if env.len() < 3 {
        return None;
    }
    let lo = modes.iter().map(|m| m.e_t).fold(f64::INFINITY, f64::min);
    let hi = modes.iter().map(|m| m.e_t).fold(f64::NEG_INFINITY, f64::max);
    let spacing = (hi - lo) / bins as f64;
    let mut best: Option<(usize, f64)> = None;
    for i in 1..env.len() - 1 {
        let (a, b, c) = (env[i - 1].jx, env[i].jx, env[i + 1].jx);
        let extremum = (b >= a && b >= c) || (b <= a && b <= c);
        let continuous = (b - a).abs() <= jump_tol && (c - b).abs() <= jump_tol;
        if !(extremum && continuous) {
            continue;
        }
        let d2 = (a - 2.0 * b + c).abs();
        if best.is_none_or(|(_, v)| d2 > v) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, d2)| CuspReport { location: env[i].e_t, spacing, second_difference: d2, envelope: env })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathPoint {
    pub q: f64,
    pub p: f64,
    pub bloch: BlochPoint,
    pub target: f64,
    pub energy: f64,
    pub velocity: f64,
}

/// Raster resolution used for contour extraction.
pub const CONTOUR_RASTER: usize = 400;
const CONTOUR_MARGIN: f64 = 0.01;

/// For `n_points` energies evenly spaced strictly between the two critical
/// energies, the point of minimal velocity on the isocontour bounding the
/// level set that contains the extremal endpoint.
pub fn minimal_velocity_path(
    land: &Landscape,
    from: &CriticalPoint,
    to: &CriticalPoint,
    n_points: usize,
    raster: usize,
) -> Result<Vec<PathPoint>> {
    if (from.e_g - to.e_g).abs() < 1e-12 {
        return Err(Error::InvalidParameter("path endpoints have equal energy".into()));
    }
    let (lo, hi) = if from.e_g < to.e_g { (from, to) } else { (to, from) };
    let anchor = if hi.kind == CriticalKind::Maximum {
        Some((hi, 1.0))
    } else if lo.kind == CriticalKind::Minimum {
        Some((lo, -1.0))
    } else {
        None
    };
    let grid = ContourGrid::new(land, raster)?;
    let targets: Vec<f64> =
        (1..=n_points).map(|k| from.e_g + (to.e_g - from.e_g) * k as f64 / (n_points + 1) as f64).collect();
    targets.par_iter().map(|&e| grid.min_velocity_point(land, e, anchor)).collect()
}

struct ContourGrid {
    n: usize,
    step: f64,
    energy: Vec<Option<f64>>,
}

impl ContourGrid {
    fn new(land: &Landscape, n: usize) -> Result<Self> {
        let r = DISC_R2.sqrt();
        let step = 2.0 * r / (n - 1) as f64;
        let energy = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (q, p) = (-r + (idx / n) as f64 * step, -r + (idx % n) as f64 * step);
                if q * q + p * p <= DISC_R2 - CONTOUR_MARGIN {
                    land.energy(q, p).ok()
                } else {
                    None
                }
            })
            .collect();
        Ok(Self { n, step, energy })
    }

    fn coord(&self, idx: usize) -> (f64, f64) {
        let r = DISC_R2.sqrt();
        (-r + (idx / self.n) as f64 * self.step, -r + (idx % self.n) as f64 * self.step)
    }

    fn neighbours(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (a, b) = ((idx / self.n) as i64, (idx % self.n) as i64);
        let n = self.n as i64;
        [(-1, 0), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .filter(move |(da, db)| (0..n).contains(&(a + da)) && (0..n).contains(&(b + db)))
            .map(move |(da, db)| ((a + da) * n + b + db) as usize)
    }

    fn min_velocity_point(
        &self,
        land: &Landscape,
        target: f64,
        anchor: Option<(&CriticalPoint, f64)>,
    ) -> Result<PathPoint> {
        let total = self.n * self.n;
        let in_set = |idx: usize, sign: f64| self.energy[idx].is_some_and(|e| sign * (e - target) > 0.0);

        let (region, sign) = match anchor {
            Some((c, sign)) => {
                let mut seeds = Vec::new();
                if c.chart == Chart::Antipodal && c.bloch.x < -0.999 {
                    for idx in 0..total {
                        if self.energy[idx].is_some() && self.neighbours(idx).any(|k| self.energy[k].is_none()) {
                            seeds.push(idx);
                        }
                    }
                } else {
                    let r = DISC_R2.sqrt();
                    let a = (((c.q + r) / self.step).round() as usize).min(self.n - 1);
                    let b = (((c.p + r) / self.step).round() as usize).min(self.n - 1);
                    seeds.push(a * self.n + b);
                }
                let mut mark = vec![false; total];
                let mut stack: Vec<usize> = seeds.into_iter().filter(|&s| in_set(s, sign)).collect();
                for &s in &stack {
                    mark[s] = true;
                }
                while let Some(i) = stack.pop() {
                    for k in self.neighbours(i) {
                        if !mark[k] && in_set(k, sign) {
                            mark[k] = true;
                            stack.push(k);
                        }
                    }
                }
                (mark, sign)
            }
            None => ((0..total).map(|i| in_set(i, 1.0)).collect(), 1.0),
        };

        let mut candidates = Vec::new();
        for i in 0..total {
            if !region[i] {
                continue;
            }
            for k in self.neighbours(i) {
                if let (Some(ei), Some(ek)) = (self.energy[i], self.energy[k]) {
                    if !region[k] && sign * (ek - target) <= 0.0 {
                        let t = (ei - target) / (ei - ek);
                        let (qi, pi) = self.coord(i);
                        let (qk, pk) = self.coord(k);
                        candidates.push((qi + t * (qk - qi), pi + t * (pk - pi)));
                    }
                }
            }
        }
        if candidates.is_empty() {
            return Err(Error::EmptyContour(target));
        }

        let scored: Vec<(f64, f64, f64)> = candidates
            .par_iter()
            .filter_map(|&(q, p)| {
                let (q, p) = project(land, q, p, target)?;
                Some((land.velocity(q, p).ok()?, q, p))
            })
            .collect();
        let best = scored
            .iter()
            .copied()
            .min_by(|a, b| {
                let close = (a.0 - b.0).abs() <= 1e-9 * a.0.max(b.0);
                if close {
                    // Prefer P ≥ 0, then larger Q.
                    (b.2 >= 0.0).cmp(&(a.2 >= 0.0)).then(b.1.total_cmp(&a.1))
                } else {
                    a.0.total_cmp(&b.0)
                }
            })
            .ok_or(Error::EmptyContour(target))?;
        let (q, p) = refine_along_contour(land, best.1, best.2, target, 2.0 * self.step);
        let bloch = bloch_from_alpha(q, p)?;
        Ok(PathPoint { q, p, bloch, target, energy: land.energy(q, p)?, velocity: land.velocity(q, p)? })
    }
}

/// Moves `(q, p)` along the gradient onto the contour `E = target`.
fn project(land: &Landscape, mut q: f64, mut p: f64, target: f64) -> Option<(f64, f64)> {
    for _ in 0..30 {
        let e = land.energy(q, p).ok()?;
        if (e - target).abs() < 1e-13 {
            return Some((q, p));
        }
        let g = land.gradient_in(Chart::Primary, q, p).ok()?;
        let g2 = g[0] * g[0] + g[1] * g[1];
        if g2 < 1e-24 {
            return None;
        }
        q -= (e - target) * g[0] / g2;
        p -= (e - target) * g[1] / g2;
    }
    let e = land.energy(q, p).ok()?;
    ((e - target).abs() < 1e-9).then_some((q, p))
}

/// Golden-section search for the velocity minimum along the contour near
/// `(q, p)`, within `reach` in arc length.
fn refine_along_contour(land: &Landscape, q: f64, p: f64, target: f64, reach: f64) -> (f64, f64) {
    let Ok(g) = land.gradient_in(Chart::Primary, q, p) else { return (q, p) };
    let gn = g[0].hypot(g[1]);
    if gn == 0.0 {
        return (q, p);
    }
    let tangent = (-g[1] / gn, g[0] / gn);
    let at = |s: f64| -> Option<(f64, f64, f64)> {
        let (a, b) = project(land, q + s * tangent.0, p + s * tangent.1, target)?;
        Some((land.velocity(a, b).ok()?, a, b))
    };
    let v = |s: f64| at(s).map_or(f64::INFINITY, |x| x.0);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-reach, reach);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut vc, mut vd) = (v(c), v(d));
    for _ in 0..60 {
        if vc < vd {
            b = d;
            d = c;
            vd = vc;
            c = b - ratio * (b - a);
            vc = v(c);
        } else {
            a = c;
            c = d;
            vc = vd;
            d = a + ratio * (b - a);
            vd = v(d);
        }
        if b - a < 1e-10 {
            break;
        }
    }
    let s = 0.5 * (a + b);
    match (at(s), at(0.0)) {
        (Some((vs, qs, ps)), Some((v0, _, _))) if vs <= v0 => (qs, ps),
        (_, Some((_, q0, p0))) => (q0, p0),
        _ => (q, p),
    }
}

/// `(1/(L+1)) Σ_{l=0}^{L} ⟨ψ(lT)|O|ψ(lT)⟩`, streamed.
pub fn time_averaged_observable(f: &CMatrix, psi0: &CVector, periods: usize, op: &CMatrix) -> Result<f64> {
    let defect = hermiticity_defect(op);
    if defect > 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    check_normalized(psi0)?;
    let mut psi = psi0.clone();
    let mut acc = expectation(op, &psi).re;
    for _ in 0..periods {
        psi = f.dot(&psi);
        acc += expectation(op, &psi).re;
    }
    Ok(acc / (periods + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    MinToSaddle,
    SaddleToMax,
}

impl Branch {
    pub fn tag(&self) -> &'static str {
        match self {
            Branch::MinToSaddle => "min-to-saddle",
            Branch::SaddleToMax => "saddle-to-max",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolRecord {
    pub branch: Branch,
    /// Generated from the upper branch by `J_x → −J_x`, `E → −E`.
    pub mirrored: bool,
    pub bloch: BlochPoint,
    pub gamma: [f64; 2],
    pub e_t: f64,
    pub jx_avg: f64,
    pub periods: usize,
    /// `|⟨H_E⟩(L) − ⟨H_E⟩(0)|` under the exact propagator.
    pub drift: f64,
    /// Change of the average when `L` is doubled.
    pub convergence: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointFailure {
    pub branch: Branch,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolRun {
    pub records: Vec<ProtocolRecord>,
    pub failures: Vec<PointFailure>,
}

/// Exact Floquet operator and effective Hamiltonian of one drive.
pub struct ProtocolContext {
    pub sys: SpinSystem,
    pub floquet: CMatrix,
    pub heff: EffectiveHamiltonian,
}

impl ProtocolContext {
    pub fn new(sys: SpinSystem, cfg: &DriveConfig, ac_steps: usize) -> Result<Self> {
        let floquet = floquet_operator(&sys, cfg, ac_steps)?;
        let heff = effective_hamiltonian(&sys, cfg)?;
        Ok(Self { sys, floquet, heff })
    }
}

fn run_point(ctx: &ProtocolContext, branch: Branch, point: &PathPoint, periods: usize) -> Result<ProtocolRecord> {
    let gamma = gamma_from_bloch(&point.bloch)?;
    let psi0 = spin_coherent_state(&ctx.sys, gamma)?.amplitudes;
    let j = ctx.sys.j();
    let e0 = expectation(&ctx.heff.matrix, &psi0).re;
    let mut psi = psi0.clone();
    let mut acc = expectation(&ctx.sys.jx, &psi).re;
    for _ in 0..periods {
        psi = ctx.floquet.dot(&psi);
        acc += expectation(&ctx.sys.jx, &psi).re;
    }
    let e_end = expectation(&ctx.heff.matrix, &psi).re;
    let avg = acc / ((periods + 1) as f64 * j);
    let mut acc2 = acc;
    for _ in 0..periods {
        psi = ctx.floquet.dot(&psi);
        acc2 += expectation(&ctx.sys.jx, &psi).re;
    }
    let convergence = (acc2 / ((2 * periods + 1) as f64 * j) - avg).abs();
    if convergence > CONVERGENCE_WARNING {
        log::warn!("time average not converged at L = {periods}: |avg(L) − avg(2L)| = {convergence:.3e}");
    }
    Ok(ProtocolRecord {
        branch,
        mirrored: false,
        bloch: point.bloch,
        gamma: [gamma.re, gamma.im],
        e_t: e0,
        jx_avg: avg.clamp(-1.0, 1.0),
        periods,
        drift: (e_end - e0).abs(),
        convergence,
    })
}

/// Runs the protocol at every path point; failures are collected, not fatal.
pub fn run_protocol(ctx: &ProtocolContext, periods: usize, paths: &[(Branch, Vec<PathPoint>)]) -> ProtocolRun {
    let jobs: Vec<(Branch, usize, &PathPoint)> =
        paths.iter().flat_map(|(b, pts)| pts.iter().enumerate().map(move |(i, p)| (*b, i, p))).collect();
    let results: Vec<_> = jobs.par_iter().map(|&(b, i, p)| (b, i, run_point(ctx, b, p, periods))).collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (branch, index, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(PointFailure { branch, index, reason: e.to_string() }),
        }
    }
    ProtocolRun { records, failures }
}

/// Lower-branch records obtained from upper-branch ones by symmetry.
pub fn mirror_records(records: &[ProtocolRecord]) -> Vec<ProtocolRecord> {
    records
        .iter()
        .map(|r| {
            let b = BlochPoint::from_cartesian(-r.bloch.x, -r.bloch.y, r.bloch.z);
            ProtocolRecord {
                mirrored: true,
                bloch: b,
                gamma: gamma_from_bloch(&b).map_or([f64::NAN; 2], |g| [g.re, g.im]),
                e_t: -r.e_t,
                jx_avg: -r.jx_avg,
                ..r.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::unfolded_spectrum;
    use crate::floquet::{diagonalize_floquet, kicked_floquet};
    use crate::linalg::{dagger, eigh};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64 as C64;

    #[test]
    fn untilted_modes_are_jx_eigenstates() {
        let sys = SpinSystem::new(5.0).unwrap();
        let cfg = DriveConfig::kicked(0.2, 0.0);
        let spec = diagonalize_floquet(&kicked_floquet(&sys, &cfg).unwrap()).unwrap();
        let heff = effective_hamiltonian(&sys, &cfg).unwrap();
        let modes = mode_magnetization(&spec, &heff, &sys);
        for (k, m) in modes.iter().enumerate() {
            assert_abs_diff_eq!(m.jx, (k as f64 - 5.0) / 5.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn time_average_basics() {
        let sys = SpinSystem::new(4.0).unwrap();
        let cfg = DriveConfig::kicked(0.3, 0.4);
        let f = kicked_floquet(&sys, &cfg).unwrap();
        let spec = diagonalize_floquet(&f).unwrap();
        let mode = spec.modes.column(2).to_owned();
        let stat = expectation(&sys.jx, &mode).re;
        assert_abs_diff_eq!(time_averaged_observable(&f, &mode, 37, &sys.jx).unwrap(), stat, epsilon = 1e-10);
        let psi = spin_coherent_state(&sys, C64::new(0.3, 0.1)).unwrap().amplitudes;
        assert_abs_diff_eq!(
            time_averaged_observable(&f, &psi, 0, &sys.jx).unwrap(),
            expectation(&sys.jx, &psi).re,
            epsilon = 1e-14
        );
        let non_herm = sys.jplus.clone();
        assert!(matches!(time_averaged_observable(&f, &psi, 3, &non_herm), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn long_average_approaches_diagonal_ensemble() {
        let sys = SpinSystem::new(20.0).unwrap();
        let cfg = DriveConfig::kicked(0.1, 0.3);
        let f = kicked_floquet(&sys, &cfg).unwrap();
        let spec = diagonalize_floquet(&f).unwrap();
        let psi = spin_coherent_state(&sys, C64::new(0.5, 0.2)).unwrap().amplitudes;
        let coeffs = dagger(&spec.modes).dot(&psi);
        let mut diag = 0.0;
        for k in 0..spec.dim() {
            let v = spec.modes.column(k).to_owned();
            diag += coeffs[k].norm_sqr() * expectation(&sys.jx, &v).re;
        }
        let avg = time_averaged_observable(&f, &psi, 10_000, &sys.jx).unwrap();
        assert!((avg - diag).abs() / sys.j() < 1e-2);
    }

    #[test]
    fn effective_energy_conserved_under_its_own_propagator() {
        let sys = SpinSystem::new(10.0).unwrap();
        let cfg = DriveConfig::kicked(0.1, 0.3);
        let heff = effective_hamiltonian(&sys, &cfg).unwrap();
        let (w, v) = eigh(&heff.matrix).unwrap();
        let d = ndarray::Array2::from_diag(&w.mapv(|x| C64::from_polar(1.0, -x)));
        let u = v.dot(&d).dot(&dagger(&v));
        let psi = spin_coherent_state(&sys, C64::new(0.2, -0.4)).unwrap().amplitudes;
        let e0 = expectation(&heff.matrix, &psi).re;
        let mut s = psi.clone();
        for _ in 0..100 {
            s = u.dot(&s);
        }
        assert_abs_diff_eq!(expectation(&heff.matrix, &s).re, e0, epsilon = 1e-9);
        let _ = unfolded_spectrum(&heff).unwrap();
    }

    #[test]
    fn cusp_detector_ignores_jumps() {
        let mut modes = Vec::new();
        for i in 0..200 {
            let e = -1.0 + i as f64 * 0.01;
            // V-shaped cusp at 0.3 and a jump at −0.5.
            let x = if e < -0.5 { -0.8 + 0.1 * e } else { 0.2 + (e - 0.3).abs() };
            modes.push(ModePoint { index: i, e_t: e, jx: x });
        }
        let r = detect_cusp(&modes, 50, 0.2).unwrap();
        assert!((r.location - 0.3).abs() <= r.spacing, "{}", r.location);
    }

    #[test]
    fn mirrored_records_flip_signs() {
        let b = bloch_from_alpha(0.3, 0.4).unwrap();
        let r = ProtocolRecord {
            branch: Branch::SaddleToMax,
            mirrored: false,
            bloch: b,
            gamma: [0.0, 0.0],
            e_t: 1.5,
            jx_avg: 0.4,
            periods: 10,
            drift: 0.0,
            convergence: 0.0,
        };
        let m = &mirror_records(&[r])[0];
        assert!(m.mirrored);
        assert_eq!((m.e_t, m.jx_avg), (-1.5, -0.4));
        assert_abs_diff_eq!(m.bloch.x, -b.x);
    }
}
