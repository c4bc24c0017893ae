//! Recovery of finitely atomic measures from low-rank moment data.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::moment::{moment_matrix, singular_values, DEFAULT_RANK_TOL};
use crate::poly::{monomials_upto, power_of_affine, MultiIndex, Polynomial, PseudoMoments};

pub const DEFAULT_MERGE_TOL: f64 = 1e-6;
/// Minimal spacing of the combined shift spectrum before a re-draw.
const COLLISION_GAP: f64 = 1e-10;
/// Largest tolerated condition number of the weight least-squares system.
const MAX_VANDERMONDE_COND: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub point: Vec<f64>,
}

/// `μ = Σ ω_i δ_{ξ_i}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomSet {
    pub atoms: Vec<Atom>,
    /// Whether negative weights are allowed.
    #[serde(default)]
    pub signed: bool,
    /// Moment residual reported by extraction, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl AtomSet {
    pub fn new(atoms: Vec<Atom>, signed: bool) -> Result<Self> {
        let n = atoms.first().map_or(0, |a| a.point.len());
        if atoms.iter().any(|a| a.point.len() != n) {
            return domain("atoms have points of different dimension");
        }
        if atoms.iter().any(|a| !a.weight.is_finite() || a.point.iter().any(|x| !x.is_finite())) {
            return domain("non-finite atom");
        }
        if !signed && atoms.iter().any(|a| a.weight < 0.0) {
            return domain("negative weight in an unsigned atom set");
        }
        Ok(AtomSet {
            atoms,
            signed,
            residual: None,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.atoms.first().map(|a| a.point.len())
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum()
    }

    /// Smallest pairwise `∞`-distance between points.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                best = best.min(inf_dist(&a.point, &b.point));
            }
        }
        best
    }

    /// Merges points closer than `tol` in `∞`-norm, summing weights; the
    /// merged point is the weight-magnitude average.
    pub fn merged(&self, tol: f64) -> AtomSet {
        let mut out: Vec<(Atom, f64)> = Vec::new();
        for a in &self.atoms {
            match out.iter_mut().find(|(b, _)| inf_dist(&a.point, &b.point) < tol) {
                Some((b, mass)) => {
                    let wa = a.weight.abs();
                    let total = *mass + wa;
                    if total > 0.0 {
                        for (p, q) in b.point.iter_mut().zip(&a.point) {
                            *p = (*p * *mass + q * wa) / total;
                        }
                    }
                    b.weight += a.weight;
                    *mass = total;
                }
                None => out.push((a.clone(), a.weight.abs())),
            }
        }
        AtomSet {
            atoms: out.into_iter().map(|(a, _)| a).collect(),
            signed: self.signed,
            residual: self.residual,
        }
    }

    /// Sorts atoms lexicographically by point.
    pub fn sort(&mut self) {
        self.atoms.sort_by(|a, b| {
            a.point
                .iter()
                .zip(&b.point)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    }
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Number of singular values above `tol · σ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// `λ(x^α) = Σ_i ω_i ξ_i^α` for `|α| ≤ ell`.
pub fn atoms_to_moments(a: &AtomSet, n: usize, ell: usize) -> PseudoMoments {
    let mut out = PseudoMoments::zeros(n, ell);
    for atom in &a.atoms {
        let d = PseudoMoments::dirac(&atom.point, atom.weight, ell);
        for (o, v) in out.values_mut().iter_mut().zip(d.values()) {
            *o += v;
        }
    }
    out
}

/// `Σ_i ω_i (1 + ⟨ξ_i, x⟩)^d`.
pub fn reconstruct_polynomial(a: &AtomSet, n: usize, d: usize) -> Polynomial {
    let mut out = Polynomial::zero(n);
    for atom in &a.atoms {
        out = &out + &power_of_affine(&atom.point, d).scale(atom.weight);
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub rank_tol: f64,
    pub merge_tol: f64,
    pub seed: u64,
    /// Allow negative weights in the output.
    pub signed: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            rank_tol: DEFAULT_RANK_TOL,
            merge_tol: DEFAULT_MERGE_TOL,
            seed: 0,
            signed: true,
        }
    }
}

/// Extraction output with diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Extraction {
    pub atoms: AtomSet,
    /// Numeric ranks of `M_0, M_1, …, M_{⌊ℓ/2⌋}`.
    pub ranks: Vec<usize>,
    /// Degree `k` with `rank M_k = rank M_{k+1}`.
    pub degree: usize,
    pub rank: usize,
    /// `max |λ(x^α) − Σ ω_i ξ_i^α|` over `|α| ≤ 2k+1`.
    pub residual: f64,
    /// `σ_1 / σ_r` of `M_k`.
    pub condition: f64,
}

/// Extracts atoms with default options.
pub fn extract_atoms(lambda: &PseudoMoments, tol: f64) -> Result<AtomSet> {
    let opts = ExtractOptions {
        rank_tol: tol,
        ..ExtractOptions::default()
    };
    Ok(extract_atoms_with(lambda, &opts)?.atoms)
}

/// Ranks of `M_k` for `k = 0..=⌊ℓ/2⌋`.
pub fn rank_trajectory(lambda: &PseudoMoments, tol: f64) -> Vec<usize> {
    (0..=lambda.order() / 2)
        .map(|k| numeric_rank(&moment_matrix(lambda, k).expect("2k ≤ order").entries, tol))
        .collect()
}

/// Multiplication-operator extraction.
///
/// The flat degree is the smallest `k` with `rank M_k = rank M_{k+1}`; the
/// basis is then taken at the largest degree of that rank-stable run.
pub fn extract_atoms_with(lambda: &PseudoMoments, opts: &ExtractOptions) -> Result<Extraction> {
    if !(opts.rank_tol > 0.0) {
        return domain("rank tolerance must be positive");
    }
    let n = lambda.n();
    let ell = lambda.order();
    if ell < 2 {
        return domain("extraction needs moments of order at least 2");
    }
    let ranks = rank_trajectory(lambda, opts.rank_tol);
    let empty = |residual| Extraction {
        atoms: AtomSet {
            atoms: Vec::new(),
            signed: opts.signed,
            residual: Some(residual),
        },
        ranks: ranks.clone(),
        degree: 0,
        rank: 0,
        residual,
        condition: 1.0,
    };
    if ranks.iter().all(|&r| r == 0) {
        return Ok(empty(0.0));
    }
    // Shifts of M_k use moments up to 2k+1, so k+1 ≤ ℓ/2 covers both.
    let kmax = ell / 2;
    let k = (1..kmax)
        .find(|&k| ranks[k] == ranks[k + 1] && ranks[k] > 0)
        .or_else(|| (ranks.len() >= 2 && ranks[0] == ranks[1] && ranks[0] > 0).then_some(0));
    let Some(k) = k else {
        return Err(Error::NoFlatRank {
            max_degree: kmax,
            ranks,
        });
    };
    let r = ranks[k];
    // Extend across the flat run: larger bases condition the shifts better.
    let mut k = k;
    while k >= 1 && k + 1 < kmax && ranks[k + 2] == r {
        k += 1;
    }
    let mk = moment_matrix(lambda, k)?;
    let basis = mk.row_basis.clone();
    let svd = SVD::new(mk.entries.clone(), true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u_all = svd.u.as_ref().expect("requested");
    let vt_all = svd.v_t.as_ref().expect("requested");
    let s = basis.len();
    let mut u = DMatrix::zeros(s, r);
    let mut v = DMatrix::zeros(s, r);
    let mut sinv = DMatrix::zeros(r, r);
    for (c, &idx) in order.iter().take(r).enumerate() {
        u.set_column(c, &u_all.column(idx));
        v.set_column(c, &vt_all.row(idx).transpose());
        sinv[(c, c)] = 1.0 / svd.singular_values[idx];
    }
    let condition = svd.singular_values[order[0]] / svd.singular_values[order[r - 1]];

    // N_j = Uᵀ H_j V Σ⁻¹ with H_j[β,γ] = λ(x_j x^{β+γ}).
    let shifts: Vec<DMatrix<f64>> = (0..n)
        .map(|j| {
            let ej = MultiIndex::unit(n, j);
            let h = DMatrix::from_fn(s, s, |a, b| lambda.at(&basis[a].add(&basis[b]).add(&ej)));
            u.transpose() * h * &v * &sinv
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut points = None;
    for _attempt in 0..2 {
        let mut coef: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nrm = coef.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-300);
        coef.iter_mut().for_each(|c| *c /= nrm);
        let mut comb = DMatrix::zeros(r, r);
        for (c, nj) in coef.iter().zip(&shifts) {
            comb += nj * *c;
        }
        let Some(schur) = Schur::try_new(comb, 1e-14, 10_000) else {
            return Err(Error::ExtractionUnstable { condition });
        };
        let (q, t) = schur.unpack();
        let tnorm = t.amax().max(1e-300);
        for i in 0..r.saturating_sub(1) {
            if t[(i + 1, i)].abs() > 1e-8 * tnorm {
                // Complex pair: the data is not (numerically) atomic.
                return Err(Error::ExtractionUnstable { condition });
            }
        }
        let diag: Vec<f64> = (0..r).map(|i| t[(i, i)]).collect();
        let scale = diag.iter().fold(1.0f64, |m, d| m.max(d.abs()));
        let mut gap = f64::INFINITY;
        for i in 0..r {
            for j in i + 1..r {
                gap = gap.min((diag[i] - diag[j]).abs());
            }
        }
        if gap < COLLISION_GAP * scale {
            continue;
        }
        let pts: Vec<Vec<f64>> = {
            let coords: Vec<DMatrix<f64>> = shifts.iter().map(|nj| q.transpose() * nj * &q).collect();
            (0..r).map(|i| coords.iter().map(|c| c[(i, i)]).collect()).collect()
        };
        points = Some(pts);
        break;
    }
    let Some(points) = points else {
        return Err(Error::ExtractionUnstable { condition });
    };

    // Weights from the Vandermonde system over |α| ≤ 2k+1.
    let top = (2 * k + 1).min(ell);
    let alphas = monomials_upto(n, top);
    let vmat = DMatrix::from_fn(alphas.len(), r, |a, i| alphas[a].eval(&points[i]));
    let rhs = DVector::from_iterator(alphas.len(), alphas.iter().map(|a| lambda.at(a)));
    let vsvd = SVD::new(vmat.clone(), true, true);
    let vmax = vsvd.singular_values.max();
    let vmin = vsvd.singular_values.min();
    if !(vmin > 0.0) || vmax / vmin > MAX_VANDERMONDE_COND {
        return Err(Error::ExtractionUnstable {
            condition: if vmin > 0.0 { vmax / vmin } else { f64::INFINITY },
        });
    }
    let w = vsvd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Solver(format!("weight least squares: {e}")))?;

    let mut atoms: Vec<Atom> = points
        .into_iter()
        .zip(w.iter())
        .map(|(point, &weight)| Atom { weight, point })
        .collect();
    if !opts.signed {
        atoms.retain(|a| a.weight > 0.0);
    }
    let mut set = AtomSet {
        atoms,
        signed: opts.signed,
        residual: None,
    }
    .merged(opts.merge_tol);
    set.sort();
    let fitted = atoms_to_moments(&set, n, top);
    let residual = alphas
        .iter()
        .zip(fitted.values())
        .map(|(a, f)| (lambda.at(a) - f).abs())
        .fold(0.0, f64::max);
    set.residual = Some(residual);
    Ok(Extraction {
        atoms: set,
        ranks,
        degree: k,
        rank: r,
        residual,
        condition,
    })
}

/// Optimal one-to-one matching of two atom sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    /// `pairs[i] = (index in a, index in b)`.
    pub pairs: Vec<(usize, usize)>,
    pub max_point_error: f64,
    pub max_weight_error: f64,
}

/// Matches `a` against `b` minimizing the summed `∞`-distance of points.
/// Returns `None` when the sets differ in size.
pub fn match_atoms(a: &AtomSet, b: &AtomSet) -> Option<Matching> {
    if a.len() != b.len() {
        return None;
    }
    let cost: Vec<Vec<f64>> = a
        .atoms
        .iter()
        .map(|x| b.atoms.iter().map(|y| inf_dist(&x.point, &y.point)).collect())
        .collect();
    let assign = hungarian(&cost);
    let pairs: Vec<(usize, usize)> = assign.into_iter().enumerate().collect();
    let max_point_error = pairs.iter().map(|&(i, j)| cost[i][j]).fold(0.0, f64::max);
    let max_weight_error = pairs
        .iter()
        .map(|&(i, j)| (a.atoms[i].weight - b.atoms[j].weight).abs())
        .fold(0.0, f64::max);
    Some(Matching {
        pairs,
        max_point_error,
        max_weight_error,
    })
}

/// Minimum-cost assignment for a square cost matrix; returns the column of
/// each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}
