//! Moment, localizing and catalecticant matrices, and numeric kernels.

use nalgebra::DMatrix;

use crate::error::{domain, Result};
use crate::poly::{grlex_rank, monomials_upto, multinomial, MultiIndex, Polynomial, PseudoMoments};

/// Default relative threshold for numeric rank and kernel computations.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// A matrix whose rows and columns are indexed by monomials.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub row_basis: Vec<MultiIndex>,
    pub col_basis: Vec<MultiIndex>,
    pub entries: DMatrix<f64>,
}

impl MomentMatrix {
    pub fn nrows(&self) -> usize {
        self.row_basis.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_basis.len()
    }

    /// Entry at the row/column monomials, if both are in the bases.
    pub fn entry(&self, row: &MultiIndex, col: &MultiIndex) -> Option<f64> {
        let i = self.row_basis.iter().position(|m| m == row)?;
        let j = self.col_basis.iter().position(|m| m == col)?;
        Some(self.entries[(i, j)])
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.entries + self.entries.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

/// Localizing matrix of `λ` for one generator `g`.
#[derive(Clone, Debug)]
pub struct LocalizingMatrix {
    pub generator: Polynomial,
    pub matrix: MomentMatrix,
}

/// Linear structure of the localizing matrix of `g` over monomials up to
/// `half_degree`: for every upper-triangular entry `(i, j)`, the list of
/// `(moment index, coefficient)` pairs whose sum gives `λ(g x^{β_i+β_j})`.
pub(crate) fn localizing_structure(
    g: &Polynomial,
    half_degree: usize,
) -> (Vec<MultiIndex>, Vec<(usize, usize, Vec<(usize, f64)>)>) {
    let basis = monomials_upto(g.n(), half_degree);
    let mut entries = Vec::with_capacity(basis.len() * (basis.len() + 1) / 2);
    for j in 0..basis.len() {
        for i in j..basis.len() {
            let base = basis[i].add(&basis[j]);
            let terms = g
                .terms()
                .map(|(delta, c)| (grlex_rank(&base.add(delta)), c))
                .collect();
            entries.push((i, j, terms));
        }
    }
    (basis, entries)
}

/// `M[β,γ] = λ(x^{β+γ})` over `monomials_upto(n, k)`.
pub fn moment_matrix(lambda: &PseudoMoments, k: usize) -> Result<MomentMatrix> {
    if 2 * k > lambda.order() {
        return domain(format!(
            "moment matrix of half-degree {k} needs order {}, have {}",
            2 * k,
            lambda.order()
        ));
    }
    let basis = monomials_upto(lambda.n(), k);
    let s = basis.len();
    let mut m = DMatrix::zeros(s, s);
    for i in 0..s {
        for j in 0..=i {
            let v = lambda.at(&basis[i].add(&basis[j]));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(MomentMatrix {
        row_basis: basis.clone(),
        col_basis: basis,
        entries: m,
    })
}

/// `L[β,γ] = λ(g x^{β+γ})` over monomials up to `⌊(ℓ - deg g)/2⌋`.
pub fn localizing_matrix(lambda: &PseudoMoments, g: &Polynomial, ell: usize) -> Result<LocalizingMatrix> {
    if g.n() != lambda.n() {
        return domain("generator and moments have different variable counts");
    }
    if g.degree() > ell {
        return domain(format!("generator degree {} exceeds ℓ = {ell}", g.degree()));
    }
    if lambda.order() < ell {
        return domain(format!(
            "localizing matrix at ℓ = {ell} needs order {ell}, have {}",
            lambda.order()
        ));
    }
    let half = (ell - g.degree()) / 2;
    let (basis, structure) = localizing_structure(g, half);
    let s = basis.len();
    let mut m = DMatrix::zeros(s, s);
    let vals = lambda.values();
    for (i, j, terms) in structure {
        let v: f64 = terms.iter().map(|&(r, c)| c * vals[r]).sum();
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(LocalizingMatrix {
        generator: g.clone(),
        matrix: MomentMatrix {
            row_basis: basis.clone(),
            col_basis: basis,
            entries: m,
        },
    })
}

/// Catalecticant `H^{a,b}[β,γ] = binom(d, β+γ)⁻¹ F_{β+γ}`.
pub fn catalecticant(f: &Polynomial, a: usize, b: usize, d: usize) -> Result<MomentMatrix> {
    if a + b > d {
        return domain(format!("catalecticant H^{{{a},{b}}} needs a + b ≤ d = {d}"));
    }
    if f.degree() > d {
        return domain(format!("polynomial degree {} exceeds d = {d}", f.degree()));
    }
    let rows = monomials_upto(f.n(), a);
    let cols = monomials_upto(f.n(), b);
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            let alpha = r.add(c);
            m[(i, j)] = f.coef(&alpha) / multinomial(d, &alpha)?;
        }
    }
    Ok(MomentMatrix {
        row_basis: rows,
        col_basis: cols,
        entries: m,
    })
}

/// Singular values (descending) and the full right singular basis.
fn full_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    // Pad to square so that the right factor spans the whole column space.
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(c, order.len());
    for (k, &i) in order.iter().enumerate() {
        v.set_column(k, &v_t.row(i).transpose());
    }
    (sv, v)
}

/// Singular values of `m`, in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Polynomials over the column basis spanning the numeric kernel of `m`:
/// right singular vectors with singular value `≤ tol · σ_max`.
/// Returned coefficient vectors are orthonormal.
pub fn kernel_basis(m: &MomentMatrix, tol: f64) -> Vec<Polynomial> {
    let n = m.col_basis.first().map(MultiIndex::n).unwrap_or(0);
    let (sv, v) = full_svd(&m.entries);
    let smax = sv.first().copied().unwrap_or(0.0);
    let mut out = Vec::new();
    for k in 0..m.ncols() {
        let s = sv.get(k).copied().unwrap_or(0.0);
        if smax == 0.0 || s <= tol * smax {
            let col: Vec<f64> = v.column(k).iter().copied().collect();
            let terms = m.col_basis.iter().cloned().zip(col);
            // Coefficients are finite, so construction cannot fail.
            out.push(Polynomial::from_terms(n, terms).expect("finite kernel coefficients"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::power_of_affine;

    fn monomial_vector(point: &[f64], k: usize) -> nalgebra::DVector<f64> {
        let b = monomials_upto(point.len(), k);
        nalgebra::DVector::from_iterator(b.len(), b.iter().map(|a| a.eval(point)))
    }

    #[test]
    fn dirac_moment_matrices() {
        let lam = PseudoMoments::dirac(&[0.0], 1.0, 2);
        let m = moment_matrix(&lam, 1).unwrap();
        assert_eq!(m.entries, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let xi = [0.3, -0.7];
        let lam = PseudoMoments::dirac(&xi, 1.0, 6);
        let m = moment_matrix(&lam, 3).unwrap();
        let v = monomial_vector(&xi, 3);
        assert!((&m.entries - &v * v.transpose()).amax() < 1e-15);
        assert!(moment_matrix(&lam, 4).is_err());
    }

    #[test]
    fn atomic_moment_matrix_rank() {
        let pts = [[0.1, 0.2], [-0.5, 0.4], [0.6, -0.3]];
        let w = [1.0, 2.0, 0.5];
        let mut lam = PseudoMoments::zeros(2, 6);
        for (p, wi) in pts.iter().zip(w) {
            let d = PseudoMoments::dirac(p, wi, 6);
            for (a, b) in lam.values_mut().iter_mut().zip(d.values()) {
                *a += b;
            }
        }
        let m = moment_matrix(&lam, 3).unwrap();
        // Vandermonde factorization V diag(w) Vᵀ.
        let mut vand = DMatrix::zeros(10, 3);
        for (j, p) in pts.iter().enumerate() {
            vand.set_column(j, &monomial_vector(p, 3));
        }
        let fact = &vand * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&w)) * vand.transpose();
        assert!((&m.entries - fact).amax() < 1e-14);
        let sv = singular_values(&m.entries);
        assert!(sv[2] > 1e-6 * sv[0]);
        assert!(sv[3] < 1e-12 * sv[0]);
    }

    #[test]
    fn localizing_examples() {
        let lam = PseudoMoments::dirac(&[0.5], 1.0, 4);
        let one = Polynomial::constant(1, 1.0);
        let l = localizing_matrix(&lam, &one, 4).unwrap();
        assert_eq!(l.matrix.entries, moment_matrix(&lam, 2).unwrap().entries);

        let ball = &one - &Polynomial::monomial(MultiIndex::new(vec![2]), 1.0);
        let l = localizing_matrix(&lam, &ball, 4).unwrap();
        let v = monomial_vector(&[0.5], 1);
        assert!((&l.matrix.entries - 0.75 * &v * v.transpose()).amax() < 1e-15);
        assert!(l.matrix.min_eigenvalue() >= -1e-14);

        let outside = PseudoMoments::dirac(&[2.0], 1.0, 4);
        let l = localizing_matrix(&outside, &ball, 4).unwrap();
        assert!(l.matrix.min_eigenvalue() < 0.0);
    }

    #[test]
    fn catalecticant_examples() {
        let one = Polynomial::constant(2, 1.0);
        let h = catalecticant(&one, 1, 1, 4).unwrap();
        assert_eq!(h.entries[(0, 0)], 1.0);
        assert_eq!(h.entries.iter().filter(|v| **v != 0.0).count(), 1);

        let f = power_of_affine(&[0.5], 4).scale(3.0);
        let h = catalecticant(&f, 2, 2, 4).unwrap();
        let v = monomial_vector(&[0.5], 2);
        assert!((&h.entries - 3.0 * &v * v.transpose()).amax() < 1e-14);
        assert_eq!(singular_values(&h.entries).iter().filter(|s| **s > 1e-10).count(), 1);
        assert!(catalecticant(&f, 3, 2, 4).is_err());
    }

    #[test]
    fn kernel_examples() {
        let zero = MomentMatrix {
            row_basis: monomials_upto(2, 1),
            col_basis: monomials_upto(2, 1),
            entries: DMatrix::zeros(3, 3),
        };
        assert_eq!(kernel_basis(&zero, 1e-6).len(), 3);

        let lam = PseudoMoments::dirac(&[0.5], 1.0, 2);
        let m = moment_matrix(&lam, 1).unwrap();
        let ker = kernel_basis(&m, 1e-6);
        assert_eq!(ker.len(), 1);
        let q = &ker[0];
        let x = MultiIndex::new(vec![1]);
        let c = MultiIndex::new(vec![0]);
        assert!((q.coef(&c) / q.coef(&x) + 0.5).abs() < 1e-12);

        // Wide matrix: kernel must include the directions beyond the row count.
        let f = power_of_affine(&[0.5], 3);
        let h = catalecticant(&f, 1, 2, 3).unwrap();
        let ker = kernel_basis(&h, 1e-9);
        assert_eq!(ker.len(), 2);
        for q in &ker {
            let coeffs = q.to_dense(2).unwrap();
            let r = &h.entries * nalgebra::DVector::from_vec(coeffs);
            assert!(r.norm() < 1e-12);
        }
    }
}
