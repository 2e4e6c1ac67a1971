//! Small dense linear-algebra helpers on top of ndarray-linalg.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eig, Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

/// Eigenvalues of a unitary matrix closer than this on the unit circle are
/// treated as one degenerate cluster whose vectors get re-orthonormalized.
const CLUSTER_TOL: f64 = 1e-6;

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn max_abs(a: ArrayView2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// ‖U†U − I‖ in max-norm.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let mut g = dagger(u).dot(u);
    for i in 0..g.nrows() {
        g[[i, i]] -= 1.0;
    }
    max_abs(g.view())
}

pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            d = d.max((h[[i, j]] - h[[j, i]].conj()).norm());
        }
    }
    d
}

pub fn vnorm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// ⟨ψ|O|ψ⟩ for a normalized ψ.
pub fn expectation(op: &CMatrix, psi: &CVector) -> C64 {
    inner(psi, &op.dot(psi))
}

/// Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.
/// Hermitian eigendecomposition, eigenvalues ascending.
pub fn eigh(h: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    // The LAPACK wrapper conjugates eigenvectors of row-major input.
    let mut a = CMatrix::zeros(h.raw_dim().f());
    a.assign(h);
    Ok(a.eigh(UPLO::Upper)?)
}

pub fn eigh_real(h: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    Ok(h.eigh(UPLO::Upper)?)
}

/// Eigen-decomposition of a unitary matrix with orthonormal eigenvectors.
///
/// The general eigensolver does not guarantee orthogonality inside
/// (near-)degenerate clusters, so each cluster is orthonormalized and then
/// rotated to diagonalize the Hermitian part of the projected block.
pub fn unitary_eig(u: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    let n = u.nrows();
    let (vals, mut vecs) = u.eig()?;
    for mut col in vecs.axis_iter_mut(Axis(1)) {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.mapv_inplace(|z| z / nrm);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].arg().total_cmp(&vals[b].arg()));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match clusters.last_mut() {
            Some(c) if (vals[*c.last().unwrap()] - vals[i]).norm() < CLUSTER_TOL => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    if clusters.len() > 1 {
        let first = clusters[0][0];
        let last = *clusters.last().unwrap().last().unwrap();
        if (vals[first] - vals[last]).norm() < CLUSTER_TOL {
            let tail = clusters.pop().unwrap();
            clusters[0].splice(0..0, tail);
        }
    }

    let mut out_vals: Vec<C64> = vals.to_vec();
    for cluster in clusters.iter().filter(|c| c.len() > 1) {
        let k = cluster.len();
        let mut q = CMatrix::zeros((n, k));
        for (c, &i) in cluster.iter().enumerate() {
            q.column_mut(c).assign(&vecs.column(i));
        }
        gram_schmidt(&mut q)?;
        let lambda0 = vals[cluster[0]] / vals[cluster[0]].norm();
        let b = dagger(&q).dot(&u.dot(&q)).mapv(|z| z * lambda0.conj());
        let herm = (&b - &dagger(&b)).mapv(|z| z / C64::new(0.0, 2.0));
        let (_, w) = eigh(&herm)?;
        let rotated = q.dot(&w);
        for (c, &i) in cluster.iter().enumerate() {
            vecs.column_mut(i).assign(&rotated.column(c));
        }
    }
    for (i, val) in out_vals.iter_mut().enumerate() {
        let v = vecs.column(i).to_owned();
        *val = inner(&v, &u.dot(&v));
    }
    Ok((out_vals, vecs))
}

fn gram_schmidt(q: &mut CMatrix) -> Result<()> {
    let k = q.ncols();
    for c in 0..k {
        for _ in 0..2 {
            for p in 0..c {
                let proj: C64 = q.column(p).iter().zip(q.column(c).iter()).map(|(a, b)| a.conj() * b).sum();
                let prev = q.column(p).to_owned();
                q.column_mut(c).scaled_add(-proj, &prev);
            }
        }
        let nrm = q.column(c).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm < 1e-8 {
            return Err(Error::Eigen("rank-deficient degenerate eigenspace".into()));
        }
        q.column_mut(c).mapv_inplace(|z| z / nrm);
    }
    Ok(())
}

/// Block-diagonal embedding: places `a` at rows/cols `offset..`.
pub fn set_block(target: &mut CMatrix, offset: usize, a: &CMatrix) {
    let k = a.nrows();
    target.slice_mut(s![offset..offset + k, offset..offset + k]).assign(a);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation_with_degeneracy() -> CMatrix {
        // U = V diag(λ) V† with a threefold degenerate eigenvalue.
        let n = 6;
        let h = Array2::from_shape_fn((n, n), |(i, j)| {
            C64::new(((i * 7 + j * 3) % 5) as f64 * 0.1, ((i + 2 * j) % 3) as f64 * 0.05)
        });
        let h = &h + &dagger(&h);
        let (_, v) = eigh(&h).unwrap();
        let phases = [0.3, 0.3, 0.3, -1.2, 2.0, 3.1];
        let d = Array2::from_diag(&Array1::from_iter(phases.iter().map(|&p| C64::from_polar(1.0, -p))));
        v.dot(&d).dot(&dagger(&v))
    }

    #[test]
    fn degenerate_unitary_gets_orthonormal_modes() {
        let u = rotation_with_degeneracy();
        let (vals, vecs) = unitary_eig(&u).unwrap();
        let gram = dagger(&vecs).dot(&vecs);
        let mut eye = CMatrix::eye(6);
        eye -= &gram;
        assert!(max_abs(eye.view()) < 1e-12);
        for (i, lam) in vals.iter().enumerate() {
            let v = vecs.column(i).to_owned();
            let r = &u.dot(&v) - &v.mapv(|z| z * lam);
            assert!(vnorm(&r) < 1e-12);
        }
    }

    #[test]
    fn eigh_residual_for_complex_input() {
        let h = CMatrix::from_shape_vec(
            (2, 2),
            vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(2.0, 0.0)],
        )
        .unwrap();
        let (w, v) = eigh(&h).unwrap();
        let r = h.dot(&v) - &v * &w.mapv(C64::from);
        assert!(max_abs(r.view()) < 1e-14);
    }

    #[test]
    fn defects_vanish_for_identity() {
        let e = CMatrix::eye(4);
        assert_eq!(unitarity_defect(&e), 0.0);
        assert_eq!(hermiticity_defect(&e), 0.0);
    }
}
