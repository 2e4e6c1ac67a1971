//! Density of quasienergy states (DOQS) by exact histogram, Fourier trace
//! sum and the semiclassical critical-point formula, plus the integrated
//! density and the divergence analysis of its derivatives.

pub mod kernel;
pub mod polylog;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::landscape::CriticalPoint;
pub use kernel::{
    kernel_sequence, quantum_kernel, vacuum_kernel, vacuum_kernel_sequence, KernelParams, KernelSequence,
};
pub use polylog::li;

/// Grid points closer than this to a critical phase are shifted by it.
const PHASE_OFFSET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoqsMethod {
    ExactHistogram,
    TraceSum,
    Semiclassical,
}

impl DoqsMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            DoqsMethod::ExactHistogram => "exact-histogram",
            DoqsMethod::TraceSum => "trace-sum",
            DoqsMethod::Semiclassical => "semiclassical",
        }
    }
}

/// A density sampled at the centres of `n` equal cells covering `[−π, π)`.
///
/// `masses` holds the integral of the density over each cell, so smoothing
/// and integration stay exact across integrable singularities.
#[derive(Debug, Clone, Serialize)]
pub struct DoqsCurve {
    pub method: DoqsMethod,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Centres of `cells` equal cells over `[−π, π)`.
pub fn cell_grid(cells: usize) -> Vec<f64> {
    let d = TAU / cells as f64;
    (0..cells).map(|i| -PI + (i as f64 + 0.5) * d).collect()
}

impl DoqsCurve {
    pub fn spacing(&self) -> f64 {
        TAU / self.grid.len() as f64
    }

    /// `∫ρ dφ` over the zone.
    pub fn normalization(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Periodic Gaussian smoothing of width `sigma`, applied to the cell
    /// masses so the normalization is preserved exactly.
    pub fn smoothed(&self, sigma: f64) -> DoqsCurve {
        let n = self.grid.len();
        let d = self.spacing();
        let mut w: Vec<f64> = (0..n)
            .map(|k| {
                let off = (k as f64) * d;
                (-3..=3)
                    .map(|img| {
                        let x = off + img as f64 * TAU;
                        (-x * x / (2.0 * sigma * sigma)).exp()
                    })
                    .sum()
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let masses: Vec<f64> =
            (0..n).into_par_iter().map(|i| (0..n).map(|k| w[(i + n - k) % n] * self.masses[k]).sum()).collect();
        let values = masses.iter().map(|m| m / d).collect();
        DoqsCurve { method: self.method, grid: self.grid.clone(), values, masses }
    }

    /// Linear interpolation of the sampled values at `phi` (periodic).
    pub fn value_at(&self, phi: f64) -> f64 {
        let n = self.grid.len();
        let d = self.spacing();
        let x = (phi + PI) / d - 0.5;
        let i0 = x.floor();
        let t = x - i0;
        let i0 = (i0 as i64).rem_euclid(n as i64) as usize;
        let i1 = (i0 + 1) % n;
        self.values[i0] * (1.0 - t) + self.values[i1] * t
    }
}

/// Normalized histogram of eigenphases over `bins` cells.
pub fn exact_doqs(phases: &[f64], bins: usize) -> Result<DoqsCurve> {
    if bins < 8 {
        return Err(Error::InvalidParameter("need at least 8 bins".into()));
    }
    let d = TAU / bins as f64;
    let mut counts = vec![0usize; bins];
    for &p in phases {
        let b = (((p + PI) / d).floor() as i64).clamp(0, bins as i64 - 1) as usize;
        counts[b] += 1;
    }
    let m = phases.len() as f64;
    let masses: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
    Ok(DoqsCurve {
        method: DoqsMethod::ExactHistogram,
        grid: cell_grid(bins),
        values: masses.iter().map(|x| x / d).collect(),
        masses,
    })
}

/// Partial Fourier sum
/// `ρ(φ) = 1/2π + (1/πM) Re Σ_{n≤n_max} e^{−(n·damping)²/2} T_n e^{inφ}`.
pub fn trace_doqs(traces: &[C64], m: usize, n_max: usize, damping: f64, cells: usize) -> Result<DoqsCurve> {
    if n_max < 1 || damping < 0.0 {
        return Err(Error::InvalidParameter("need n_max ≥ 1 and damping ≥ 0".into()));
    }
    let grid = cell_grid(cells);
    let d = TAU / cells as f64;
    let coef = trace_coefficients(traces, m, n_max, damping);
    let eval = |phi: f64, cell_avg: bool| -> f64 {
        let mut s = 0.0;
        for (i, c) in coef.iter().enumerate() {
            let n = (i + 1) as f64;
            let mut term = (c * C64::from_polar(1.0, n * phi)).re;
            if cell_avg {
                term *= (n * d / 2.0).sin() / (n * d / 2.0);
            }
            s += term;
        }
        1.0 / TAU + s
    };
    let values: Vec<f64> = grid.par_iter().map(|&p| eval(p, false)).collect();
    let masses: Vec<f64> = grid.par_iter().map(|&p| eval(p, true) * d).collect();
    Ok(DoqsCurve { method: DoqsMethod::TraceSum, grid, values, masses })
}

fn trace_coefficients(traces: &[C64], m: usize, n_max: usize, damping: f64) -> Vec<C64> {
    (1..=n_max.min(traces.len()))
        .map(|n| traces[n - 1] * ((-(n as f64 * damping).powi(2) / 2.0).exp() / (PI * m as f64)))
        .collect()
}

/// The trace-sum density at a single phase.
pub fn trace_density_at(traces: &[C64], m: usize, n_max: usize, damping: f64, phi: f64) -> f64 {
    let coef = trace_coefficients(traces, m, n_max, damping);
    1.0 / TAU + coef.iter().enumerate().map(|(i, c)| (c * C64::from_polar(1.0, (i + 1) as f64 * phi)).re).sum::<f64>()
}

/// `2^{f−1}/(πM√|det M_G|)`.
pub fn amplitude(m: f64, f: u32, det_mg: f64) -> f64 {
    2f64.powi(f as i32 - 1) / (PI * m * det_mg.sqrt())
}

/// Data of one critical point as consumed by the semiclassical density.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SemiclassicalTerm {
    pub phase: f64,
    pub beta: i32,
    pub amplitude: f64,
    pub kernel: Option<KernelParams>,
}

impl SemiclassicalTerm {
    pub fn from_critical(c: &CriticalPoint, m: f64, f: u32) -> Result<Self> {
        if !(c.det_mg.is_finite() && c.det_mg > 0.0) {
            return Err(Error::MissingHessian(0));
        }
        Ok(Self {
            phase: c.phase,
            beta: c.beta,
            amplitude: amplitude(m, f, c.det_mg),
            kernel: KernelParams::from_hessian(&c.hessian).ok(),
        })
    }

    fn weight(&self) -> C64 {
        C64::from_polar(self.amplitude, self.beta as f64 * PI / 4.0)
    }
}

pub fn terms_from_points(points: &[CriticalPoint], m: f64, f: u32) -> Result<Vec<SemiclassicalTerm>> {
    points
        .iter()
        .enumerate()
        .map(|(i, c)| SemiclassicalTerm::from_critical(c, m, f).map_err(|_| Error::MissingHessian(i)))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct SemiclassicalOptions {
    pub f: u32,
    pub cells: usize,
    /// Multiply the `n`-th Fourier term of each critical point by its
    /// vacuum kernel `F_n`, summing `n ≤ kernel_terms` explicitly.
    pub kernel: bool,
    pub kernel_terms: usize,
}

impl Default for SemiclassicalOptions {
    fn default() -> Self {
        Self { f: 1, cells: 1024, kernel: false, kernel_terms: 4000 }
    }
}

fn offset_angle(phi: f64, phase: f64) -> f64 {
    let t = (phi - phase).rem_euclid(TAU);
    if t < PHASE_OFFSET {
        PHASE_OFFSET
    } else if TAU - t < PHASE_OFFSET {
        TAU - PHASE_OFFSET
    } else {
        t
    }
}

/// `ρ_cl(φ) = 1/2π + Re Σ_c A_c e^{iβ_cπ/4} Li_f(e^{i(φ−φ_c)})`.
pub fn semiclassical_doqs(terms: &[SemiclassicalTerm], opts: &SemiclassicalOptions) -> Result<DoqsCurve> {
    if opts.f < 1 {
        return Err(Error::InvalidParameter("f must be at least 1".into()));
    }
    let grid = cell_grid(opts.cells);
    let d = TAU / opts.cells as f64;
    if opts.kernel {
        return semiclassical_with_kernel(terms, opts, grid, d);
    }
    let values = grid
        .par_iter()
        .map(|&phi| -> Result<f64> {
            let mut s = 1.0 / TAU;
            for t in terms {
                s += (t.weight() * li(opts.f, offset_angle(phi, t.phase))?).re;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    // ∫ Li_f(e^{iθ}) dθ = −i Li_{f+1}(e^{iθ}), continuous for f ≥ 1.
    let masses = grid
        .par_iter()
        .map(|&phi| -> Result<f64> {
            let mut s = d / TAU;
            for t in terms {
                let a = li(opts.f + 1, phi - d / 2.0 - t.phase)?;
                let b = li(opts.f + 1, phi + d / 2.0 - t.phase)?;
                s += (t.weight() * C64::new(0.0, -1.0) * (b - a)).re;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DoqsCurve { method: DoqsMethod::Semiclassical, grid, values, masses })
}

fn semiclassical_with_kernel(
    terms: &[SemiclassicalTerm],
    opts: &SemiclassicalOptions,
    grid: Vec<f64>,
    d: f64,
) -> Result<DoqsCurve> {
    let nt = opts.kernel_terms.max(1);
    let mut coefs: Vec<(f64, Vec<C64>)> = Vec::with_capacity(terms.len());
    for t in terms {
        let k = t.kernel.ok_or_else(|| Error::Kernel("critical point without kernel data".into()))?;
        let c: Vec<C64> = vacuum_kernel_sequence(k.omega_c, k.gamma_c, nt)?
            .into_iter()
            .enumerate()
            .map(|(i, fnk)| t.weight() * fnk / ((i + 1) as f64).powi(opts.f as i32))
            .collect();
        coefs.push((t.phase, c));
    }
    let eval = |phi: f64, avg: bool| -> f64 {
        let mut s = 1.0 / TAU;
        for (phase, c) in &coefs {
            for (i, ci) in c.iter().enumerate() {
                let n = (i + 1) as f64;
                let mut term = (ci * C64::from_polar(1.0, n * (phi - phase))).re;
                if avg {
                    term *= (n * d / 2.0).sin() / (n * d / 2.0);
                }
                s += term;
            }
        }
        s
    };
    let values: Vec<f64> = grid.par_iter().map(|&p| eval(p, false)).collect();
    let masses: Vec<f64> = grid.par_iter().map(|&p| eval(p, true) * d).collect();
    Ok(DoqsCurve { method: DoqsMethod::Semiclassical, grid, values, masses })
}

/// Cumulative density `N(φ)` on the cell edges `−π = e_0 < … < e_n = π`.
#[derive(Debug, Clone, Serialize)]
pub struct IntegratedDoqs {
    pub method: DoqsMethod,
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn integrated_doqs(curve: &DoqsCurve) -> IntegratedDoqs {
    let n = curve.grid.len();
    let d = curve.spacing();
    let edges: Vec<f64> = (0..=n).map(|i| -PI + i as f64 * d).collect();
    let mut values = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for m in &curve.masses {
        acc += m;
        values.push(acc);
    }
    IntegratedDoqs { method: curve.method, edges, values }
}

impl IntegratedDoqs {
    /// `|Δ²N|` at each interior edge.
    pub fn second_difference(&self) -> Vec<f64> {
        (1..self.values.len() - 1)
            .map(|i| (self.values[i + 1] - 2.0 * self.values[i] + self.values[i - 1]).abs())
            .collect()
    }

    /// Edges where `|Δ²N|` is a local maximum exceeding `factor` times its
    /// median, i.e. where the slope of `N` changes abruptly.
    pub fn kinks(&self, factor: f64) -> Vec<f64> {
        let d2 = self.second_difference();
        let mut sorted = d2.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let n = d2.len();
        (0..n)
            .filter(|&i| {
                let l = d2[(i + n - 1) % n];
                let r = d2[(i + 1) % n];
                d2[i] > factor * median && d2[i] >= l && d2[i] >= r
            })
            .map(|i| self.edges[i + 1])
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceCriterion {
    pub phase: f64,
    pub beta: i32,
    /// `k` with `2(f−1) + β = 8k`, when it exists.
    pub k: Option<i32>,
    pub diverges: bool,
}

pub fn divergence_criterion(f: u32, beta: i32, phase: f64) -> DivergenceCriterion {
    let s = 2 * (f as i32 - 1) + beta;
    let k = (s % 8 == 0).then_some(s / 8);
    DivergenceCriterion { phase, beta, k, diverges: k.is_some() }
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub grid: Vec<f64>,
    /// `∂^{f−1} ρ_cl / ∂φ^{f−1}`.
    pub values: Vec<f64>,
    pub criteria: Vec<DivergenceCriterion>,
}

/// The `(f−1)`-th derivative of the semiclassical density, which reduces to
/// `Li_1` terms, together with the per-point divergence criterion.
pub fn doqs_derivative(terms: &[SemiclassicalTerm], f: u32, grid: &[f64]) -> Result<DerivativeReport> {
    if f < 1 {
        return Err(Error::InvalidParameter("f must be at least 1".into()));
    }
    let rot = C64::i().powi(f as i32 - 1);
    let base = if f == 1 { 1.0 / TAU } else { 0.0 };
    let values = grid
        .iter()
        .map(|&phi| -> Result<f64> {
            let mut s = base;
            for t in terms {
                s += (t.weight() * rot * li(1, offset_angle(phi, t.phase))?).re;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    let criteria = terms.iter().map(|t| divergence_criterion(f, t.beta, t.phase)).collect();
    Ok(DerivativeReport { grid: grid.to_vec(), values, criteria })
}

/// Sup-norm comparison of two curves on a common grid, away from the given
/// critical phases.
#[derive(Debug, Clone, Serialize)]
pub struct Agreement {
    pub sup_error: f64,
    pub median: f64,
    pub relative: f64,
    pub points_used: usize,
}

pub fn compare_curves(a: &DoqsCurve, b: &DoqsCurve, critical_phases: &[f64], radius: f64) -> Agreement {
    let mut sup: f64 = 0.0;
    let mut used = Vec::new();
    for (i, &phi) in a.grid.iter().enumerate() {
        if critical_phases.iter().any(|&c| crate::floquet::circular_distance(phi, c) <= radius) {
            continue;
        }
        sup = sup.max((a.values[i] - b.values[i]).abs());
        used.push(a.values[i]);
    }
    used.sort_by(f64::total_cmp);
    let median = if used.is_empty() { f64::NAN } else { used[used.len() / 2] };
    Agreement { sup_error: sup, median, relative: sup / median, points_used: used.len() }
}

/// Least-squares slope of `ρ` against `−log|φ − φ_S|` over
/// `inner < |φ − φ_S| < outer`.
pub fn log_slope(curve: &DoqsCurve, phase: f64, inner: f64, outer: f64) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &phi) in curve.grid.iter().enumerate() {
        let dist = crate::floquet::circular_distance(phi, phase);
        if dist > inner && dist < outer {
            xs.push(-dist.ln());
            ys.push(curve.values[i]);
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_histogram() {
        let c = exact_doqs(&[0.0; 9], 60).unwrap();
        let occupied: Vec<usize> = (0..60).filter(|&i| c.masses[i] > 0.0).collect();
        assert_eq!(occupied, vec![30]);
        assert_abs_diff_eq!(c.normalization(), 1.0, epsilon = 1e-15);
        assert!(exact_doqs(&[0.0], 4).is_err());
    }

    #[test]
    fn empty_traces_give_flat_density() {
        let c = trace_doqs(&[C64::new(0.0, 0.0); 10], 5, 10, 0.0, 64).unwrap();
        assert!(c.values.iter().all(|&v| (v - 1.0 / TAU).abs() < 1e-15));
        assert_abs_diff_eq!(c.normalization(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_traces_sharpen_at_zero() {
        let tr = vec![C64::new(3.0, 0.0); 128];
        let at = |n: usize, phi: f64| trace_density_at(&tr, 3, n, 0.05, phi);
        let seq: Vec<f64> = [8, 16, 32, 64, 128].iter().map(|&n| at(n, PI).abs()).collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0]), "{seq:?}");
        assert!(at(128, 0.0) > 5.0);
        // Direct Dirichlet-type sum as oracle at an arbitrary point.
        let direct: f64 = 1.0 / TAU
            + (1..=20).map(|k| (-(0.05 * k as f64).powi(2) / 2.0).exp() * (k as f64 * 0.3).cos()).sum::<f64>() / PI;
        assert_abs_diff_eq!(at(20, 0.3), direct, epsilon = 1e-13);
    }

    fn single(beta: i32, amp: f64, phase: f64) -> SemiclassicalTerm {
        SemiclassicalTerm { phase, beta, amplitude: amp, kernel: None }
    }

    #[test]
    fn maximum_gives_jump() {
        let amp = 0.02;
        let t = [single(2, amp, 0.7)];
        let opts = SemiclassicalOptions { cells: 4096, ..Default::default() };
        let c = semiclassical_doqs(&t, &opts).unwrap();
        let (lo, hi) = (c.value_at(0.7 - 1e-2), c.value_at(0.7 + 1e-2));
        assert_abs_diff_eq!(lo - hi, amp * PI, epsilon = 5e-4);
        assert_abs_diff_eq!(c.normalization(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn saddle_gives_log_peak() {
        let amp = 0.03;
        let t = [single(0, amp, -2.566)];
        let opts = SemiclassicalOptions { cells: 8192, ..Default::default() };
        let c = semiclassical_doqs(&t, &opts).unwrap();
        assert_abs_diff_eq!(log_slope(&c, -2.566, 0.001, 0.01), amp, epsilon = 1e-4);
        assert_abs_diff_eq!(c.normalization(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn higher_order_normalization() {
        let t = [single(2, 0.01, 0.3), single(-2, 0.02, -1.0), single(0, 0.015, 2.0)];
        for f in 1..=3 {
            let opts = SemiclassicalOptions { f, cells: 512, ..Default::default() };
            assert_abs_diff_eq!(semiclassical_doqs(&t, &opts).unwrap().normalization(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_option_reduces_to_plain_sum_for_tiny_kernel_effect() {
        let k = KernelParams::new(1e-7, 0.0, 1e-7).unwrap();
        let t = [SemiclassicalTerm { phase: 0.5, beta: 2, amplitude: 0.01, kernel: Some(k) }];
        let plain = semiclassical_doqs(&t, &SemiclassicalOptions { cells: 256, ..Default::default() }).unwrap();
        let with = semiclassical_doqs(
            &t,
            &SemiclassicalOptions { cells: 256, kernel: true, kernel_terms: 20000, ..Default::default() },
        )
        .unwrap();
        assert_abs_diff_eq!(with.normalization(), 1.0, epsilon = 1e-12);
        let far: Vec<usize> =
            (0..256).filter(|&i| crate::floquet::circular_distance(plain.grid[i], 0.5) > 0.2).collect();
        for i in far {
            assert!((plain.values[i] - with.values[i]).abs() < 2e-3);
        }
    }

    #[test]
    fn integrated_flat() {
        let c = DoqsCurve {
            method: DoqsMethod::TraceSum,
            grid: cell_grid(16),
            values: vec![1.0 / TAU; 16],
            masses: vec![1.0 / 16.0; 16],
        };
        let n = integrated_doqs(&c);
        for (e, v) in n.edges.iter().zip(&n.values) {
            assert_abs_diff_eq!(*v, (e + PI) / TAU, epsilon = 1e-14);
        }
    }

    #[test]
    fn criterion_arithmetic() {
        assert_eq!(divergence_criterion(1, 0, 0.0).k, Some(0));
        assert!(!divergence_criterion(1, 2, 0.0).diverges);
        assert!(!divergence_criterion(1, -2, 0.0).diverges);
        assert_eq!(divergence_criterion(2, -2, 0.0).k, Some(0));
        assert_eq!(divergence_criterion(4, 2, 0.0).k, Some(1));
    }

    #[test]
    fn derivative_of_first_order_is_density() {
        let t = [single(0, 0.01, 1.0), single(2, 0.02, -1.0)];
        let grid = cell_grid(64);
        let r = doqs_derivative(&t, 1, &grid).unwrap();
        let c = semiclassical_doqs(&t, &SemiclassicalOptions { cells: 64, ..Default::default() }).unwrap();
        for (a, b) in r.values.iter().zip(&c.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let t = [single(-2, 0.02, 0.4)];
        let grid: Vec<f64> = (0..20).map(|i| -3.0 + 0.3 * i as f64).collect();
        let r = doqs_derivative(&t, 2, &grid).unwrap();
        for (i, &phi) in grid.iter().enumerate() {
            let h = 1e-5;
            let rho = |x: f64| (t[0].weight() * li(2, x - 0.4).unwrap()).re;
            let fd = (rho(phi + h) - rho(phi - h)) / (2.0 * h);
            assert_abs_diff_eq!(r.values[i], fd, epsilon = 1e-7);
        }
        assert!(r.criteria[0].diverges);
    }

    proptest! {
        #[test]
        fn histogram_normalized(ph in proptest::collection::vec(-PI..PI, 1..300), bins in 8usize..200) {
            let c = exact_doqs(&ph, bins).unwrap();
            prop_assert!((c.normalization() - 1.0).abs() < 1e-12);
            prop_assert!(c.values.iter().all(|&v| v >= 0.0));
            let n = integrated_doqs(&c);
            prop_assert!(n.values.windows(2).all(|w| w[1] >= w[0]));
        }

        #[test]
        fn smoothing_preserves_mass(ph in proptest::collection::vec(-PI..PI, 1..100), sigma in 0.02f64..0.5) {
            let c = exact_doqs(&ph, 128).unwrap().smoothed(sigma);
            prop_assert!((c.normalization() - 1.0).abs() < 1e-12);
        }
    }
}
