use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use cqs_core::doqs::{
    compare_curves, divergence_criterion, exact_doqs, integrated_doqs, semiclassical_doqs, terms_from_points,
    trace_doqs, Agreement, DivergenceCriterion, DoqsCurve, SemiclassicalOptions,
};
use cqs_core::effective::{effective_hamiltonian, pair_with_exact, unfolded_spectrum};
use cqs_core::floquet::{diagonalize_floquet, floquet_operator, FloquetSpectrum};
use cqs_core::io;
use cqs_core::landscape::{
    find_critical_points, separatrix_energy, CriticalInventory, CriticalKind, CriticalPoint, FinderOptions, Landscape,
};
use cqs_core::protocol::{
    detect_cusp, envelope_at, minimal_velocity_path, mirror_records, mode_magnetization, run_protocol, upper_envelope,
    Branch, CuspReport, PointFailure, ProtocolContext,
};
use cqs_core::spin::SpinSystem;

use crate::config::ExperimentConfig;
use crate::AppError;

/// Envelope steps larger than this are treated as jumps between families.
const CUSP_JUMP: f64 = 0.2;
/// Critical-phase neighbourhood excluded from the agreement report.
const AGREEMENT_RADIUS: f64 = 0.3;
/// Offset of the marker samples around a divergent phase.
const MARKER_OFFSET: f64 = 1e-3;
const KINK_FACTOR: f64 = 20.0;
const KINK_SMOOTHING: f64 = 0.05;

fn create(cfg: &ExperimentConfig, name: &str) -> Result<BufWriter<File>, AppError> {
    fs::create_dir_all(&cfg.out)?;
    Ok(BufWriter::new(File::create(cfg.out.join(name))?))
}

fn save_config(cfg: &ExperimentConfig) -> Result<(), AppError> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    Ok(())
}

fn exact_spectrum(cfg: &ExperimentConfig, sys: &SpinSystem) -> Result<FloquetSpectrum, AppError> {
    let f = floquet_operator(sys, &cfg.drive(), cfg.steps)?;
    Ok(diagonalize_floquet(&f)?)
}

fn inventory(cfg: &ExperimentConfig) -> (Landscape, CriticalInventory) {
    let opts = FinderOptions { grid: cfg.grid, ..FinderOptions::default() };
    let land = Landscape::new(&cfg.drive(), cfg.j).with_options(opts);
    let inv = find_critical_points(&land);
    (land, inv)
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn spectrum(cfg: &ExperimentConfig) -> Result<(), AppError> {
    save_config(cfg)?;
    let sys = SpinSystem::new(cfg.j)?;
    let spec = exact_spectrum(cfg, &sys)?;
    io::write_spectrum_csv(create(cfg, "spectrum.csv")?, &spec)?;
    report(&cfg.out.join("spectrum.csv"));

    let heff = effective_hamiltonian(&sys, &cfg.drive())?;
    let unfolded = unfolded_spectrum(&heff)?;
    let pairing = pair_with_exact(&unfolded, &spec.phases, cfg.omega_t);
    io::write_unfolded_csv(create(cfg, "unfolded.csv")?, &unfolded, &pairing, cfg.omega_t)?;
    report(&cfg.out.join("unfolded.csv"));

    #[derive(Serialize)]
    struct Summary<'a> {
        dimension: usize,
        max_residual: f64,
        max_pair_deviation: f64,
        tolerance: f64,
        within_tolerance: bool,
        warning: &'a Option<String>,
    }
    let tol = heff.phase_tolerance();
    let s = Summary {
        dimension: sys.dim(),
        max_residual: spec.residuals.iter().copied().fold(0.0, f64::max),
        max_pair_deviation: pairing.max_deviation,
        tolerance: tol,
        within_tolerance: pairing.max_deviation <= tol,
        warning: &heff.validity.warning,
    };
    io::write_json(create(cfg, "spectrum.json")?, &s)?;
    println!("{} phases, max pairing deviation {:.3e} (tolerance {tol})", sys.dim(), pairing.max_deviation);
    Ok(())
}

#[derive(Serialize)]
struct Marker {
    kind: CriticalKind,
    e_t: f64,
    criterion: DivergenceCriterion,
    amplitude: f64,
    /// Semiclassical density at `phase ∓ offset` for divergent points.
    samples: Option<[(f64, f64); 2]>,
}

#[derive(Serialize)]
struct DoqsSummary {
    normalization: Vec<(&'static str, f64)>,
    agreement: Agreement,
    smoothing: f64,
    exclusion_radius: f64,
    critical_phases: Vec<f64>,
    /// Slope changes of the integrated semiclassical density.
    integrated_kinks: Vec<f64>,
    /// Edge of the largest slope change of the integrated, smoothed exact
    /// density.
    exact_kink: f64,
}

pub fn doqs(cfg: &ExperimentConfig) -> Result<(), AppError> {
    save_config(cfg)?;
    let sys = SpinSystem::new(cfg.j)?;
    let spec = exact_spectrum(cfg, &sys)?;
    let (_, inv) = inventory(cfg);
    let m = sys.dim() as f64;
    let terms = terms_from_points(&inv.points, m, 1)?;

    let hist = exact_doqs(&spec.phases, cfg.bins)?;
    let fine = exact_doqs(&spec.phases, cfg.cells)?;
    let trace = trace_doqs(&spec.traces(cfg.n_max), sys.dim(), cfg.n_max, cfg.damping, cfg.cells)?;
    let opts = SemiclassicalOptions { cells: cfg.cells, kernel: cfg.kernel, ..SemiclassicalOptions::default() };
    let semi = semiclassical_doqs(&terms, &opts)?;

    io::write_doqs_csv(create(cfg, "doqs.csv")?, &[&hist, &trace, &semi])?;
    report(&cfg.out.join("doqs.csv"));
    write_integrated(cfg, &[&fine, &semi])?;
    io::write_json(create(cfg, "critical_points.json")?, &inv)?;
    report(&cfg.out.join("critical_points.json"));

    let markers: Vec<Marker> = inv
        .points
        .iter()
        .zip(&terms)
        .map(|(c, t)| {
            let criterion = divergence_criterion(1, c.beta, c.phase);
            let samples = criterion.diverges.then(|| {
                let lo = c.phase - MARKER_OFFSET;
                let hi = c.phase + MARKER_OFFSET;
                [(lo, point_density(&terms, lo)), (hi, point_density(&terms, hi))]
            });
            Marker { kind: c.kind, e_t: c.e_t, criterion, amplitude: t.amplitude, samples }
        })
        .collect();
    io::write_json(create(cfg, "divergence.json")?, &markers)?;
    report(&cfg.out.join("divergence.json"));

    let crit: Vec<f64> = inv.points.iter().map(|c| c.phase).collect();
    let agreement = compare_curves(&fine.smoothed(cfg.sigma), &semi.smoothed(cfg.sigma), &crit, AGREEMENT_RADIUS);
    let summary = DoqsSummary {
        normalization: vec![
            ("exact-histogram", hist.normalization()),
            ("trace-sum", trace.normalization()),
            ("semiclassical", semi.normalization()),
        ],
        agreement,
        smoothing: cfg.sigma,
        exclusion_radius: AGREEMENT_RADIUS,
        critical_phases: crit,
        integrated_kinks: integrated_doqs(&semi).kinks(KINK_FACTOR),
        exact_kink: strongest_kink(&fine.smoothed(KINK_SMOOTHING)),
    };
    io::write_json(create(cfg, "doqs_report.json")?, &summary)?;
    report(&cfg.out.join("doqs_report.json"));
    for d in markers.iter().filter(|d| d.criterion.diverges) {
        println!("divergence marker at phi = {:.6} ({:?})", d.criterion.phase, d.kind);
    }
    println!(
        "agreement: sup error {:.3e}, {:.1}% of median",
        summary.agreement.sup_error,
        100.0 * summary.agreement.relative
    );
    Ok(())
}

fn strongest_kink(curve: &DoqsCurve) -> f64 {
    let n = integrated_doqs(curve);
    let d2 = n.second_difference();
    let i = (0..d2.len()).max_by(|&a, &b| d2[a].total_cmp(&d2[b])).unwrap_or(0);
    n.edges[i + 1]
}

fn point_density(terms: &[cqs_core::doqs::SemiclassicalTerm], phi: f64) -> f64 {
    let mut s = 1.0 / std::f64::consts::TAU;
    for t in terms {
        let w = cqs_core::C64::from_polar(t.amplitude, t.beta as f64 * std::f64::consts::FRAC_PI_4);
        if let Ok(l) = cqs_core::doqs::li(1, phi - t.phase) {
            s += (w * l).re;
        }
    }
    s
}

fn write_integrated(cfg: &ExperimentConfig, curves: &[&DoqsCurve]) -> Result<(), AppError> {
    let mut w = create(cfg, "integrated.csv")?;
    use std::io::Write;
    writeln!(w, "phi,N,method")?;
    for c in curves {
        let n = integrated_doqs(c);
        for (e, v) in n.edges.iter().zip(&n.values) {
            writeln!(w, "{e},{v},{}", n.method.tag())?;
        }
    }
    w.flush()?;
    report(&cfg.out.join("integrated.csv"));
    Ok(())
}

/// The critical point of a kind with the largest `X`, ties broken by `Q`
/// then `P`.
fn upper(inv: &CriticalInventory, kind: CriticalKind) -> Option<&CriticalPoint> {
    inv.of_kind(kind).max_by(|a, b| a.bloch.x.total_cmp(&b.bloch.x).then(a.q.total_cmp(&b.q)).then(a.p.total_cmp(&b.p)))
}

#[derive(Serialize)]
struct ProtocolSummary<'a> {
    separatrix: Option<f64>,
    message: Option<&'static str>,
    cusp: Option<&'a CuspReport>,
    path_failures: Vec<String>,
    record_failures: &'a [PointFailure],
    /// Largest `|Jx_avg − envelope|` over records with `E_T` inside the
    /// envelope range.
    max_envelope_deviation: Option<f64>,
}

pub fn protocol(cfg: &ExperimentConfig) -> Result<(), AppError> {
    save_config(cfg)?;
    let sys = SpinSystem::new(cfg.j)?;
    let ctx = ProtocolContext::new(sys.clone(), &cfg.drive(), cfg.steps)?;
    let spec = diagonalize_floquet(&ctx.floquet)?;
    let modes = mode_magnetization(&spec, &ctx.heff, &sys);
    {
        use std::io::Write;
        let mut w = create(cfg, "modes.csv")?;
        writeln!(w, "index,E_T,Jx")?;
        for m in &modes {
            writeln!(w, "{},{},{}", m.index, m.e_t, m.jx)?;
        }
        w.flush()?;
        report(&cfg.out.join("modes.csv"));
    }

    let (land, inv) = inventory(cfg);
    let saddle = upper(&inv, CriticalKind::Saddle);
    let Some(saddle) = saddle else {
        println!("no separatrix: the landscape has no saddle point, protocol skipped");
        io::write_protocol_csv(create(cfg, "protocol.csv")?, &[])?;
        let s = ProtocolSummary {
            separatrix: None,
            message: Some("no separatrix"),
            cusp: None,
            path_failures: vec![],
            record_failures: &[],
            max_envelope_deviation: None,
        };
        io::write_json(create(cfg, "cusp.json")?, &s)?;
        return Ok(());
    };
    let cusp = detect_cusp(&modes, cfg.cusp_bins, CUSP_JUMP);

    let mut paths = Vec::new();
    let mut path_failures = Vec::new();
    let legs = [
        (Branch::MinToSaddle, upper(&inv, CriticalKind::Minimum), Some(saddle)),
        (Branch::SaddleToMax, Some(saddle), upper(&inv, CriticalKind::Maximum)),
    ];
    for (branch, from, to) in legs {
        let (Some(from), Some(to)) = (from, to) else {
            path_failures.push(format!("{}: missing endpoint", branch.tag()));
            continue;
        };
        match minimal_velocity_path(&land, from, to, cfg.points, cfg.contour_raster) {
            Ok(p) => paths.push((branch, p)),
            Err(e) => path_failures.push(format!("{}: {e}", branch.tag())),
        }
    }
    let run = run_protocol(&ctx, cfg.periods, &paths);
    let mut records = run.records.clone();
    if land.has_inversion_symmetry() {
        records.extend(mirror_records(&run.records));
    }
    io::write_protocol_csv(create(cfg, "protocol.csv")?, &records)?;
    report(&cfg.out.join("protocol.csv"));

    let env = upper_envelope(&modes, cfg.cusp_bins);
    let dev = run
        .records
        .iter()
        .filter_map(|r| envelope_at(&env, r.e_t).map(|e| (r.jx_avg - e).abs()))
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    let s = ProtocolSummary {
        separatrix: Some(saddle.e_t + 0.0),
        message: None,
        cusp: cusp.as_ref(),
        path_failures,
        record_failures: &run.failures,
        max_envelope_deviation: dev,
    };
    io::write_json(create(cfg, "cusp.json")?, &s)?;
    report(&cfg.out.join("cusp.json"));
    match &cusp {
        Some(c) => {
            println!("cusp at E_T = {:.4} (grid spacing {:.4}); separatrix at {:.4}", c.location, c.spacing, saddle.e_t)
        }
        None => println!("no cusp detected; separatrix at {:.4}", saddle.e_t),
    }
    Ok(())
}

pub fn landscape(cfg: &ExperimentConfig) -> Result<(), AppError> {
    save_config(cfg)?;
    let (land, inv) = inventory(cfg);
    io::write_landscape_csv(create(cfg, "landscape.csv")?, &land.raster(cfg.landscape_raster))?;
    report(&cfg.out.join("landscape.csv"));
    io::write_json(create(cfg, "critical_points.json")?, &inv)?;
    report(&cfg.out.join("critical_points.json"));
    println!(
        "{} maxima, {} saddles, {} minima (Euler characteristic {})",
        inv.count(CriticalKind::Maximum),
        inv.count(CriticalKind::Saddle),
        inv.count(CriticalKind::Minimum),
        inv.euler_characteristic()
    );
    match separatrix_energy(&inv.points) {
        Ok(e) => println!("separatrix energies E_G T: {e:?}"),
        Err(e) => println!("{e}"),
    }
    Ok(())
}
