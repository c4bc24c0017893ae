//! Exact presolve for degenerate programs.
//!
//! The zero cone is eliminated through the affine parametrization
//! `x = x₀ + N t` of its solution set. Each PSD slack `S(t) = S₀ − Σ t_j S_j`
//! then lives in the common range `V` of `{S₀, S_j}`, so the block is replaced
//! by `VᵀS(t)V`. This restores strict feasibility when equality rows force
//! every feasible moment matrix onto a fixed low-rank face.

use nalgebra::{DMatrix, DVector};

use super::admm::residuals;
use super::cones::{smat, svec, Cone};
use super::sparse::CsrMatrix;
use super::{dot, norm2, ConicProblem, ConicSolution, Residuals, Status};

const RANK_TOL: f64 = 1e-9;
const MAX_VARS: usize = 4000;

struct Elimination {
    x0: DVector<f64>,
    null: DMatrix<f64>,
    // Pivoted factor `Zᵀ[:, pivots] = Q_r R₁₁`, for dual recovery.
    q_range: DMatrix<f64>,
    r11: DMatrix<f64>,
    pivots: Vec<usize>,
}

enum BlockMap {
    Zero,
    NonNeg { off: usize, len: usize, red: usize },
    Psd { off: usize, side: usize, red: usize, basis: Option<DMatrix<f64>> },
}

pub(crate) struct Reduction {
    pub problem: ConicProblem,
    elim: Elimination,
    blocks: Vec<BlockMap>,
    zero_rows: Vec<usize>,
}

fn dense_rows(a: &CsrMatrix, rows: &[usize]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), a.ncols());
    for (r, &i) in rows.iter().enumerate() {
        for (j, v) in a.row(i) {
            m[(r, j)] += v;
        }
    }
    m
}

/// Left singular vectors and sorted singular values.
fn range_svd(m: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let svd = m.svd(true, false);
    let u = svd.u.unwrap();
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = DMatrix::from_fn(u.nrows(), idx.len(), |i, k| u[(i, idx[k])]);
    let s = idx.iter().map(|&k| svd.singular_values[k]).collect();
    (u, s)
}

fn numeric_rank(s: &[f64]) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > RANK_TOL * top).count()
}

fn eliminate(p: &ConicProblem, zero_rows: &[usize]) -> Option<Elimination> {
    let n = p.num_vars();
    if zero_rows.is_empty() {
        return Some(Elimination {
            x0: DVector::zeros(n),
            null: DMatrix::identity(n, n),
            q_range: DMatrix::zeros(n, 0),
            r11: DMatrix::zeros(0, 0),
            pivots: Vec::new(),
        });
    }
    let z = zero_rows.len();
    let bz = DVector::from_iterator(z, zero_rows.iter().map(|&i| p.b[i]));
    let zm = dense_rows(&p.a, zero_rows);
    // Pad so that Q is square.
    let zt = zm.transpose();
    let zt = if z < n { zt.resize_horizontally(n, 0.0) } else { zt };
    let cols = zt.ncols();
    let qr = zt.col_piv_qr();
    let mut order = DMatrix::from_fn(1, cols, |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    let (q, r, _) = qr.unpack();
    let diag: Vec<f64> = (0..n.min(cols)).map(|k| r[(k, k)].abs()).collect();
    let rank = numeric_rank(&diag);
    let pivots: Vec<usize> = (0..rank).map(|k| order[(0, k)] as usize).collect();
    let q_range = q.columns(0, rank).into_owned();
    let null = q.columns(rank, n - rank).into_owned();
    let r11 = r.view((0, 0), (rank, rank)).into_owned();
    let rhs = DVector::from_iterator(rank, pivots.iter().map(|&i| bz[i]));
    let w = r11.transpose().solve_lower_triangular(&rhs)?;
    let x0 = &q_range * w;
    let resid = (&zm * &x0 - &bz).norm();
    if resid > RANK_TOL * (1.0 + bz.norm()) * 1e3 {
        return None;
    }
    Some(Elimination { x0, null, q_range, r11, pivots })
}

/// Builds the reduced program, or `None` when no PSD block shrinks.
pub(crate) fn reduce(p: &ConicProblem) -> Option<Reduction> {
    let n = p.num_vars();
    if n > MAX_VARS || !p.cones.iter().any(|c| matches!(c, Cone::Psd(s) if *s > 1)) {
        return None;
    }
    let mut zero_rows = Vec::new();
    let mut off = 0;
    for cone in &p.cones {
        if let Cone::Zero(k) = cone {
            zero_rows.extend(off..off + k);
        }
        off += cone.dim();
    }
    let elim = eliminate(p, &zero_rows)?;
    let f = elim.null.ncols();
    if f == 0 {
        return None;
    }

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut blocks = Vec::new();
    let mut shrunk = false;
    let push_dense = |g: &DMatrix<f64>, g0: &[f64], rows: &mut Vec<Vec<(usize, f64)>>, b: &mut Vec<f64>| {
        for i in 0..g.nrows() {
            rows.push((0..f).filter(|&j| g[(i, j)] != 0.0).map(|j| (j, g[(i, j)])).collect());
            b.push(g0[i]);
        }
    };
    let mut off = 0;
    for &cone in &p.cones {
        let len = cone.dim();
        let idx: Vec<usize> = (off..off + len).collect();
        match cone {
            Cone::Zero(_) => blocks.push(BlockMap::Zero),
            Cone::NonNeg(_) => {
                let ab = dense_rows(&p.a, &idx);
                let g = &ab * &elim.null;
                let g0: Vec<f64> = (0..len).map(|i| p.b[off + i] - ab.row(i).dot(&elim.x0.transpose())).collect();
                blocks.push(BlockMap::NonNeg { off, len, red: b.len() });
                push_dense(&g, &g0, &mut rows, &mut b);
                cones.push(cone);
            }
            Cone::Psd(side) => {
                let ab = dense_rows(&p.a, &idx);
                let g = &ab * &elim.null;
                let g0: Vec<f64> = (0..len).map(|i| p.b[off + i] - ab.row(i).dot(&elim.x0.transpose())).collect();
                let mut w = DMatrix::zeros(side, side * (f + 1));
                w.columns_mut(0, side).copy_from(&smat(&g0, side));
                for j in 0..f {
                    let col: Vec<f64> = g.column(j).iter().copied().collect();
                    w.columns_mut(side * (j + 1), side).copy_from(&smat(&col, side));
                }
                let (u, s) = range_svd(w);
                let r = numeric_rank(&s);
                let red = b.len();
                if r == side {
                    push_dense(&g, &g0, &mut rows, &mut b);
                    cones.push(cone);
                    blocks.push(BlockMap::Psd { off, side, red, basis: None });
                    off += len;
                    continue;
                }
                shrunk = true;
                let basis = u.columns(0, r).into_owned();
                if r > 0 {
                    let project = |v: &[f64]| svec(&(basis.transpose() * smat(v, side) * &basis));
                    let rl = r * (r + 1) / 2;
                    let mut gr = DMatrix::zeros(rl, f);
                    for j in 0..f {
                        let col: Vec<f64> = g.column(j).iter().copied().collect();
                        gr.set_column(j, &DVector::from_vec(project(&col)));
                    }
                    push_dense(&gr, &project(&g0), &mut rows, &mut b);
                    cones.push(Cone::Psd(r));
                }
                blocks.push(BlockMap::Psd { off, side, red, basis: Some(basis) });
            }
        }
        off += len;
    }
    if !shrunk {
        return None;
    }
    let c = (elim.null.transpose() * DVector::from_column_slice(&p.c)).as_slice().to_vec();
    let a = CsrMatrix::from_rows(f, rows);
    let problem = ConicProblem { c, a, b, cones };
    Some(Reduction { problem, elim, blocks, zero_rows })
}

impl Reduction {
    /// Duals of the zero rows solving `Zᵀ y_z = −g` on the range of `Zᵀ`.
    fn zero_duals(&self, g: &[f64]) -> Vec<(usize, f64)> {
        let e = &self.elim;
        let rhs = -(e.q_range.transpose() * DVector::from_column_slice(g));
        let y = e.r11.solve_upper_triangular(&rhs).unwrap_or_else(|| DVector::zeros(rhs.len()));
        e.pivots.iter().copied().zip(y.iter().copied()).collect()
    }

    /// Maps a reduced-space vector in `K` (or `K*`) back to the original rows.
    fn lift_cone_vector(&self, m: usize, red: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for block in &self.blocks {
            match block {
                BlockMap::Zero => {}
                BlockMap::NonNeg { off, len, red: r } => out[*off..off + len].copy_from_slice(&red[*r..r + len]),
                BlockMap::Psd { off, side, red: r, basis } => {
                    let len = side * (side + 1) / 2;
                    match basis {
                        None => out[*off..off + len].copy_from_slice(&red[*r..r + len]),
                        Some(v) if v.ncols() > 0 => {
                            let k = v.ncols();
                            let inner = smat(&red[*r..r + k * (k + 1) / 2], k);
                            out[*off..off + len].copy_from_slice(&svec(&(v * inner * v.transpose())));
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        out
    }

    fn fill_zero_duals(&self, y: &mut [f64], g: &[f64]) {
        for (k, v) in self.zero_duals(g) {
            y[self.zero_rows[k]] = v;
        }
    }

    fn lift_x(&self, t: &[f64], affine: bool) -> Vec<f64> {
        let mut x = &self.elim.null * DVector::from_column_slice(t);
        if affine {
            x += &self.elim.x0;
        }
        x.as_slice().to_vec()
    }

    /// Maps a solution of the reduced program back to `p`.
    pub(crate) fn lift(&self, p: &ConicProblem, sol: ConicSolution) -> ConicSolution {
        let m = p.num_rows();
        match sol.status {
            Status::Optimal | Status::MaxIter => {
                let x = self.lift_x(&sol.x, true);
                let s = self.lift_cone_vector(m, &sol.s);
                let mut y = self.lift_cone_vector(m, &sol.y);
                let g: Vec<f64> = p.a.mul_t_vec(&y).iter().zip(&p.c).map(|(a, c)| a + c).collect();
                self.fill_zero_duals(&mut y, &g);
                let residuals = residuals(p, &x, &y, &s);
                ConicSolution {
                    primal_objective: dot(&p.c, &x),
                    dual_objective: -dot(&p.b, &y),
                    x,
                    y,
                    s,
                    residuals,
                    ..sol
                }
            }
            Status::PrimalInfeasible => {
                let mut y = self.lift_cone_vector(m, &sol.y);
                let g = p.a.mul_t_vec(&y);
                self.fill_zero_duals(&mut y, &g);
                ConicSolution {
                    residuals: Residuals { primal: norm2(&p.a.mul_t_vec(&y)), ..sol.residuals },
                    y,
                    x: vec![f64::NAN; p.num_vars()],
                    s: vec![f64::NAN; m],
                    ..sol
                }
            }
            Status::DualInfeasible => {
                let x = self.lift_x(&sol.x, false);
                let s = self.lift_cone_vector(m, &sol.s);
                let r: Vec<f64> = p.a.mul_vec(&x).iter().zip(&s).map(|(a, b)| a + b).collect();
                let scale = -dot(&p.c, &x);
                let (x, s) = if scale > 0.0 {
                    (x.iter().map(|v| v / scale).collect(), s.iter().map(|v| v / scale).collect())
                } else {
                    (x, s)
                };
                ConicSolution {
                    residuals: Residuals { primal: norm2(&r) / scale.max(f64::MIN_POSITIVE), ..sol.residuals },
                    x,
                    s,
                    y: vec![f64::NAN; m],
                    ..sol
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{solve, svec_index, Settings};

    /// `min ⟨C, X⟩` over 3×3 PSD `X` with the first row pinned to zero, so
    /// every feasible point lies on a 2×2 face.
    fn face_problem() -> ConicProblem {
        let s = 3;
        let nv = s * (s + 1) / 2;
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for i in 0..s {
            rows.push(vec![(svec_index(s, i, 0), 1.0)]);
            b.push(0.0);
        }
        // tr X = 1
        rows.push((0..s).map(|i| (svec_index(s, i, i), 1.0)).collect());
        b.push(1.0);
        // s = x in the PSD cone: -x + s = 0
        for k in 0..nv {
            rows.push(vec![(k, -1.0)]);
            b.push(0.0);
        }
        let mut c = vec![0.0; nv];
        c[svec_index(s, 1, 1)] = 1.0;
        c[svec_index(s, 2, 2)] = 2.0;
        c[svec_index(s, 2, 1)] = std::f64::consts::SQRT_2 * 0.5;
        ConicProblem::new(c, CsrMatrix::from_rows(nv, rows), b, vec![Cone::Zero(s + 1), Cone::Psd(s)]).unwrap()
    }

    #[test]
    fn shrinks_block_to_face() {
        let p = face_problem();
        let red = reduce(&p).expect("block should shrink");
        assert_eq!(red.problem.cones, vec![Cone::Psd(2)]);
        assert_eq!(red.problem.num_vars(), 2);
    }

    #[test]
    fn lifted_solution_matches_face_optimum() {
        let p = face_problem();
        let sol = solve(&p, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        // Smallest eigenvalue of [[1, 0.5], [0.5, 2]].
        let want = 1.5 - (0.5f64).sqrt();
        assert!((sol.primal_objective - want).abs() < 1e-6, "{}", sol.primal_objective);
        assert!((sol.dual_objective - want).abs() < 1e-6, "{}", sol.dual_objective);
        assert!(sol.residuals.primal < 1e-6 && sol.residuals.dual < 1e-6);
    }

    #[test]
    fn full_rank_blocks_are_left_alone() {
        let p = ConicProblem::new(
            vec![1.0],
            CsrMatrix::from_rows(1, vec![vec![(0, -1.0)], vec![], vec![(0, -1.0)]]),
            vec![0.0, 1.0, 0.0],
            vec![Cone::Psd(2)],
        )
        .unwrap();
        assert!(reduce(&p).is_none());
    }
}
