use rayon::prelude::*;
use serde::Serialize;

use super::{Chart, Gradient, Hessian, Landscape, DISC_R2};
use crate::error::{Error, Result};
use crate::floquet::fold;
use crate::spin::{bloch_from_alpha, BlochPoint};

/// Seeds closer than this to the boundary (in `r²`) are not used.
const SEED_MARGIN: f64 = 0.02;
/// Each chart keeps the points of its own hemisphere, `r² ≤ 1`, with a little
/// overlap that the merge step removes.
const CHART_LIMIT: f64 = 1.0 + 1e-6;
const GRADIENT_ACCEPT: f64 = 1e-9;
const DEGENERATE_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Maximum,
    Saddle,
    Minimum,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    /// Primary-chart disc coordinates; the south pole is reported as `(√2, 0)`.
    pub q: f64,
    pub p: f64,
    pub bloch: BlochPoint,
    /// Chart in which the Hessian was evaluated, and the coordinates there.
    pub chart: Chart,
    pub chart_q: f64,
    pub chart_p: f64,
    pub kind: CriticalKind,
    /// `E_G T` per spin.
    pub e_g: f64,
    /// Extensive critical quasienergy `j E_G T`.
    pub e_t: f64,
    /// Folded critical phase.
    pub phase: f64,
    pub beta: i32,
    pub hessian: Hessian,
    /// `|det M_G| = |det H_QP|/4`.
    pub det_mg: f64,
    /// Amplitude of the critical point in the semiclassical density.
    pub amplitude: f64,
    pub gradient_norm: f64,
}

impl CriticalPoint {
    pub fn det_hessian(&self) -> f64 {
        self.hessian[0][0] * self.hessian[1][1] - self.hessian[0][1] * self.hessian[1][0]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedFailure {
    pub chart: Chart,
    pub seed_q: f64,
    pub seed_p: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalInventory {
    pub points: Vec<CriticalPoint>,
    pub failures: Vec<SeedFailure>,
}

impl CriticalInventory {
    pub fn count(&self, kind: CriticalKind) -> usize {
        self.points.iter().filter(|c| c.kind == kind).count()
    }

    /// `#max − #saddle + #min`, which is 2 on the sphere.
    pub fn euler_characteristic(&self) -> i64 {
        self.count(CriticalKind::Maximum) as i64 - self.count(CriticalKind::Saddle) as i64
            + self.count(CriticalKind::Minimum) as i64
    }

    pub fn of_kind(&self, kind: CriticalKind) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(move |c| c.kind == kind)
    }
}

/// Locates every critical point by Newton refinement from grid seeds in both
/// charts, then classifies it from its Hessian.
pub fn find_critical_points(land: &Landscape) -> CriticalInventory {
    let mut found: Vec<(Chart, f64, f64)> = Vec::new();
    let mut failures = Vec::new();
    for chart in [Chart::Primary, Chart::Antipodal] {
        let seeds = grid_seeds(land, chart);
        let refined: Vec<_> = seeds.par_iter().map(|&(q, p)| (q, p, newton(land, chart, q, p))).collect();
        for (sq, sp, res) in refined {
            match res {
                Ok((q, p)) if q * q + p * p <= CHART_LIMIT => found.push((chart, q, p)),
                Ok(_) => {}
                Err(reason) => failures.push(SeedFailure { chart, seed_q: sq, seed_p: sp, reason }),
            }
        }
    }

    let mut unique: Vec<(Chart, f64, f64, [f64; 3])> = Vec::new();
    for (chart, q, p) in found {
        let xyz = chart_to_xyz(chart, q, p);
        let dup = unique.iter().any(|u| {
            let d = ((u.3[0] - xyz[0]).powi(2) + (u.3[1] - xyz[1]).powi(2) + (u.3[2] - xyz[2]).powi(2)).sqrt();
            d < land.options.merge_radius
        });
        if !dup {
            unique.push((chart, q, p, xyz));
        }
    }

    let mut points = Vec::new();
    for (chart, q, p, xyz) in unique {
        match classify(land, chart, q, p, xyz) {
            Ok(c) => points.push(c),
            Err(reason) => failures.push(SeedFailure { chart, seed_q: q, seed_p: p, reason }),
        }
    }
    points.sort_by(|a, b| {
        a.kind.cmp(&b.kind).then(b.e_g.total_cmp(&a.e_g)).then(a.q.total_cmp(&b.q)).then(a.p.total_cmp(&b.p))
    });
    CriticalInventory { points, failures }
}

fn chart_to_xyz(chart: Chart, q: f64, p: f64) -> [f64; 3] {
    let b = bloch_from_alpha(q, p).expect("chart point inside disc");
    match chart {
        Chart::Primary => [b.x, b.y, b.z],
        Chart::Antipodal => [-b.x, -b.y, b.z],
    }
}

/// Grid nodes where `|∇E|²` is a discrete local minimum.
fn grid_seeds(land: &Landscape, chart: Chart) -> Vec<(f64, f64)> {
    let n = land.options.grid.max(8);
    let r = DISC_R2.sqrt();
    let step = 2.0 * r / (n - 1) as f64;
    let coord = |a: usize| -r + a as f64 * step;
    let inside = |a: usize, b: usize| {
        let (q, p) = (coord(a), coord(b));
        q * q + p * p <= DISC_R2 - SEED_MARGIN
    };
    let energy: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n).map(|b| if inside(a, b) { land.energy_in(chart, coord(a), coord(b)).ok() } else { None }).collect()
        })
        .collect();
    let mut g2 = vec![vec![None; n]; n];
    for a in 1..n - 1 {
        for b in 1..n - 1 {
            if let (Some(l), Some(rr), Some(d), Some(u), Some(_)) =
                (energy[a - 1][b], energy[a + 1][b], energy[a][b - 1], energy[a][b + 1], energy[a][b])
            {
                let gq = (rr - l) / (2.0 * step);
                let gp = (u - d) / (2.0 * step);
                g2[a][b] = Some(gq * gq + gp * gp);
            }
        }
    }
    let mut seeds = Vec::new();
    for a in 1..n - 1 {
        for b in 1..n - 1 {
            let Some(c) = g2[a][b] else { continue };
            let mut is_min = true;
            'nb: for da in [-1i64, 0, 1] {
                for db in [-1i64, 0, 1] {
                    if da == 0 && db == 0 {
                        continue;
                    }
                    match g2[(a as i64 + da) as usize][(b as i64 + db) as usize] {
                        Some(v) if v < c || (v == c && (da, db) < (0, 0)) => {
                            is_min = false;
                            break 'nb;
                        }
                        None => {
                            is_min = false;
                            break 'nb;
                        }
                        _ => {}
                    }
                }
            }
            if is_min {
                seeds.push((coord(a), coord(b)));
            }
        }
    }
    seeds
}

fn newton(land: &Landscape, chart: Chart, mut q: f64, mut p: f64) -> std::result::Result<(f64, f64), String> {
    let limit = DISC_R2 - SEED_MARGIN / 2.0;
    for _ in 0..land.options.max_iter {
        let (g, h) = land.derivatives_in(chart, q, p).map_err(|e| e.to_string())?;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det.abs() < 1e-14 {
            return Err("singular Hessian during Newton iteration".into());
        }
        let dq = -(h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let dp = -(-h[1][0] * g[0] + h[0][0] * g[1]) / det;
        let mut t = 1.0;
        while (q + t * dq).powi(2) + (p + t * dp).powi(2) > limit {
            t *= 0.5;
            if t < 1e-6 {
                return Err("Newton step leaves the disc".into());
            }
        }
        q += t * dq;
        p += t * dp;
        if t * dq.hypot(dp) < land.options.newton_tol {
            break;
        }
    }
    let g = land.gradient_in(chart, q, p).map_err(|e| e.to_string())?;
    let gn = g[0].hypot(g[1]);
    if gn > GRADIENT_ACCEPT {
        return Err(format!("no convergence, gradient {gn:.3e}"));
    }
    Ok((q, p))
}

fn classify(
    land: &Landscape,
    chart: Chart,
    q: f64,
    p: f64,
    xyz: [f64; 3],
) -> std::result::Result<CriticalPoint, String> {
    let (g, h): (Gradient, Hessian) = land.derivatives_in(chart, q, p).map_err(|e| e.to_string())?;
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = ((h[0][0] - h[1][1]).powi(2) / 4.0 + h[0][1] * h[1][0]).sqrt();
    let (l1, l2) = (tr / 2.0 - disc, tr / 2.0 + disc);
    if l1.abs() < DEGENERATE_EIGENVALUE || l2.abs() < DEGENERATE_EIGENVALUE {
        return Err("degenerate critical point".into());
    }
    let kind = if l2 < 0.0 {
        CriticalKind::Maximum
    } else if l1 > 0.0 {
        CriticalKind::Minimum
    } else {
        CriticalKind::Saddle
    };
    let beta = match kind {
        CriticalKind::Maximum => 2,
        CriticalKind::Minimum => -2,
        CriticalKind::Saddle => 0,
    };
    let e_g = land.energy_in(chart, q, p).map_err(|e| e.to_string())?;
    let det_mg = det.abs() / 4.0;
    let m = 2.0 * land.j + 1.0;
    let bloch = BlochPoint::from_cartesian(xyz[0], xyz[1], xyz[2]);
    Ok(CriticalPoint {
        q: bloch.q,
        p: bloch.p,
        bloch,
        chart,
        chart_q: q,
        chart_p: p,
        kind,
        e_g,
        e_t: land.j * e_g,
        phase: fold(land.j * e_g, land.omega_t),
        beta,
        hessian: h,
        det_mg,
        amplitude: crate::doqs::amplitude(m, 1, det_mg),
        gradient_norm: g[0].hypot(g[1]),
    })
}

/// Distinct saddle energies `E_G T`, merged within `1e−9`.
pub fn separatrix_energy(points: &[CriticalPoint]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for c in points.iter().filter(|c| c.kind == CriticalKind::Saddle) {
        if !out.iter().any(|e| (e - c.e_g).abs() < 1e-9) {
            out.push(c.e_g);
        }
    }
    if out.is_empty() {
        return Err(Error::NoSaddle);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}
