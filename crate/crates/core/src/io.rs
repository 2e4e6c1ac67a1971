//! CSV, JSON and binary matrix output.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::doqs::DoqsCurve;
use crate::effective::{Pairing, UnfoldedSpectrum};
use crate::error::{Error, Result};
use crate::floquet::FloquetSpectrum;
use crate::linalg::CMatrix;
use crate::protocol::ProtocolRecord;

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn flush<W: Write>(mut wr: csv::Writer<W>) -> Result<()> {
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Columns `index, phase, residual`.
pub fn write_spectrum_csv<W: Write>(w: W, spec: &FloquetSpectrum) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["index", "phase", "residual"]).map_err(csv_err)?;
    for (i, (ph, r)) in spec.phases.iter().zip(&spec.residuals).enumerate() {
        wr.serialize((i, ph, r)).map_err(csv_err)?;
    }
    flush(wr)
}

/// Columns `index, e_t, folded, partner, residual`.
pub fn write_unfolded_csv<W: Write>(w: W, unfolded: &UnfoldedSpectrum, pairing: &Pairing, omega_t: f64) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["index", "e_t", "folded", "partner", "residual"]).map_err(csv_err)?;
    for (i, (e, f)) in unfolded.energies.iter().zip(unfolded.folded(omega_t)).enumerate() {
        wr.serialize((i, e, f, pairing.partner[i], pairing.residual[i])).map_err(csv_err)?;
    }
    flush(wr)
}

/// Long format: columns `phi, rho, method`.
pub fn write_doqs_csv<W: Write>(w: W, curves: &[&DoqsCurve]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["phi", "rho", "method"]).map_err(csv_err)?;
    for c in curves {
        for (phi, rho) in c.grid.iter().zip(&c.values) {
            wr.serialize((phi, rho, c.method.tag())).map_err(csv_err)?;
        }
    }
    flush(wr)
}

/// Columns `branch, mirrored, Q, P, E_T, Jx_avg, L, drift, convergence`.
pub fn write_protocol_csv<W: Write>(w: W, records: &[ProtocolRecord]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["branch", "mirrored", "Q", "P", "E_T", "Jx_avg", "L", "drift", "convergence"]).map_err(csv_err)?;
    for r in records {
        wr.serialize((
            r.branch.tag(),
            r.mirrored,
            r.bloch.q,
            r.bloch.p,
            r.e_t,
            r.jx_avg,
            r.periods,
            r.drift,
            r.convergence,
        ))
        .map_err(csv_err)?;
    }
    flush(wr)
}

/// Columns `Q, P, E_G`.
pub fn write_landscape_csv<W: Write>(w: W, raster: &[(f64, f64, f64)]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["Q", "P", "E_G"]).map_err(csv_err)?;
    for row in raster {
        wr.serialize(row).map_err(csv_err)?;
    }
    flush(wr)
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Little-endian `u64` rows, `u64` cols, then row-major `(re, im)` pairs.
pub fn write_matrix<W: Write>(mut w: W, m: &CMatrix) -> Result<()> {
    let (r, c) = m.dim();
    w.write_all(&(r as u64).to_le_bytes())?;
    w.write_all(&(c as u64).to_le_bytes())?;
    for z in m.iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<CMatrix> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let cols = u64::from_le_bytes(b8) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        data.push(C64::new(re, f64::from_le_bytes(b8)));
    }
    CMatrix::from_shape_vec((rows, cols), data).map_err(|e| Error::InvalidParameter(e.to_string()))
}
