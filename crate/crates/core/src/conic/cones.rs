//! Cone definitions and Euclidean projections.
//!
//! Symmetric matrices are vectorized column-major over the lower triangle with
//! off-diagonal entries scaled by √2, so that `⟨svec(X), svec(Y)⟩ = tr(XY)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// One block of the cone `K` in `Ax + s = b, s ∈ K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    /// `{0}^k`
    Zero(usize),
    /// `ℝ₊^k`
    NonNeg(usize),
    /// Symmetric PSD matrices of the given side, in svec form.
    Psd(usize),
}

impl Cone {
    /// Number of scalar coordinates.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(k) | Cone::NonNeg(k) => k,
            Cone::Psd(s) => s * (s + 1) / 2,
        }
    }
}

/// Side length `s` with `s(s+1)/2 = len`, if `len` is triangular.
pub fn triangular_side(len: usize) -> Option<usize> {
    let s = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (s..=s + 1).find(|&t| t * (t + 1) / 2 == len)
}

/// Index of entry `(i, j)`, `i ≥ j`, in the svec layout of side `s`.
pub fn svec_index(s: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < s);
    j * s - j * (j + 1) / 2 + i
}

pub fn smat(v: &[f64], s: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(s, s);
    let mut k = 0;
    for j in 0..s {
        m[(j, j)] = v[k];
        k += 1;
        for i in (j + 1)..s {
            let x = v[k] / SQRT2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let s = m.nrows();
    let mut v = Vec::with_capacity(s * (s + 1) / 2);
    for j in 0..s {
        v.push(m[(j, j)]);
        for i in (j + 1)..s {
            v.push(0.5 * (m[(i, j)] + m[(j, i)]) * SQRT2);
        }
    }
    v
}

fn project_psd_in_place(v: &mut [f64], s: usize) {
    if s == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    let eig = SymmetricEigen::new(smat(v, s));
    let npos = eig.eigenvalues.iter().filter(|&&l| l > 0.0).count();
    if npos == s {
        return;
    }
    // Sum over whichever side of the spectrum is smaller.
    let mut out = if 2 * npos >= s {
        smat(v, s)
    } else {
        DMatrix::zeros(s, s)
    };
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let q = eig.eigenvectors.column(k);
        if 2 * npos >= s && l <= 0.0 {
            out.ger(-l, &q, &q, 1.0);
        } else if 2 * npos < s && l > 0.0 {
            out.ger(l, &q, &q, 1.0);
        }
    }
    let mut k = 0;
    for j in 0..s {
        v[k] = out[(j, j)];
        k += 1;
        for i in (j + 1)..s {
            v[k] = out[(i, j)] * SQRT2;
            k += 1;
        }
    }
}

/// Euclidean projection of an svec-vectorized symmetric matrix onto the PSD
/// cone, by clipping negative eigenvalues.
pub fn psd_project(v: &[f64]) -> Result<Vec<f64>> {
    let Some(s) = triangular_side(v.len()) else {
        return domain(format!("length {} is not a triangular number", v.len()));
    };
    let mut out = v.to_vec();
    project_psd_in_place(&mut out, s);
    Ok(out)
}

/// Projects `y` in place onto the dual cone `K*` of `cones`.
pub(crate) fn project_dual(cones: &[Cone], y: &mut [f64]) {
    use rayon::prelude::*;
    let mut chunks: Vec<(Cone, &mut [f64])> = Vec::with_capacity(cones.len());
    let mut rest = y;
    for &cone in cones {
        let (head, tail) = rest.split_at_mut(cone.dim());
        chunks.push((cone, head));
        rest = tail;
    }
    let psd_work: usize = cones
        .iter()
        .map(|c| match c {
            Cone::Psd(s) => s * s * s,
            _ => 0,
        })
        .sum();
    let project = |(cone, block): &mut (Cone, &mut [f64])| match *cone {
        Cone::Zero(_) => {}
        Cone::NonNeg(_) => block.iter_mut().for_each(|x| *x = x.max(0.0)),
        Cone::Psd(s) => project_psd_in_place(block, s),
    };
    // Blocks are independent, so the result does not depend on scheduling.
    if psd_work > 50_000 && cones.len() > 1 {
        chunks.par_iter_mut().for_each(project);
    } else {
        chunks.iter_mut().for_each(project);
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_layout() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let v = svec(&m);
        assert_eq!(v.len(), 6);
        assert_eq!(v[svec_index(3, 2, 1)], 5.0 * SQRT2);
        assert!((smat(&v, 3) - &m).amax() < 1e-15);
        let inner: f64 = v.iter().map(|x| x * x).sum();
        assert!((inner - (&m * &m).trace()).abs() < 1e-12);
        assert_eq!(triangular_side(6), Some(3));
        assert_eq!(triangular_side(7), None);
        assert_eq!(triangular_side(1), Some(1));
    }

    #[test]
    fn projection_examples() {
        let id = svec(&DMatrix::identity(3, 3));
        assert_eq!(psd_project(&id).unwrap(), id);
        let neg = svec(&(-DMatrix::<f64>::identity(3, 3)));
        assert!(psd_project(&neg).unwrap().iter().all(|x| x.abs() < 1e-15));
        let d = svec(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -2.0])));
        let p = psd_project(&d).unwrap();
        assert!((p[0] - 3.0).abs() < 1e-14 && p[1].abs() < 1e-14 && p[2].abs() < 1e-14);
        assert!(psd_project(&[1.0, 2.0]).is_err());
    }
}
