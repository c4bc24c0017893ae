//! Revised simplex with column generation over implicitly given columns.
//!
//! Solves `min Σ c_j w_j` subject to `Σ a_j w_j (= or ≤) b`, `w ≥ 0`, where
//! the candidate columns are only materialized when pricing selects them.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row sense of a master constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Sense {
    Eq,
    Le,
}

/// Source of candidate columns.
pub(crate) trait ColumnSource: Sync {
    fn len(&self) -> usize;
    /// Cost and column entries (one per row) of candidate `j`.
    fn column(&self, j: usize) -> (f64, Vec<f64>);
    /// Evaluator of `w c_j − Σ_i y_i a_{ij}` over candidates.
    fn pricer(&self, w: f64, y: &[f64]) -> Box<dyn Fn(usize) -> f64 + Sync + '_>;
}

#[derive(Clone, Debug)]
pub(crate) struct LpSolution {
    pub objective: f64,
    /// `(candidate, weight)` for candidates with positive weight.
    pub support: Vec<(usize, f64)>,
}

const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 100;
const BLAND_AFTER: usize = 50;
const MAX_PIVOTS: usize = 200_000;
const BATCH: usize = 50;
const PERTURBATION: f64 = 1e-7;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Candidate(usize),
    Slack,
    Artificial,
}

struct Column {
    a: Vec<f64>,
    cost: f64,
    kind: Kind,
}

struct Master {
    m: usize,
    b: Vec<f64>,
    b_true: Vec<f64>,
    flip: Vec<f64>,
    cols: Vec<Column>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    pivots: usize,
    zero_tol: f64,
}

#[derive(PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Master {
    fn new(senses: &[Sense], rhs: &[f64]) -> Self {
        let m = rhs.len();
        let flip: Vec<f64> = rhs.iter().map(|&t| if t < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = rhs.iter().zip(&flip).map(|(t, f)| t * f).collect();
        let mut cols = Vec::new();
        let mut basis = vec![usize::MAX; m];
        for i in 0..m {
            if senses[i] == Sense::Le {
                let mut a = vec![0.0; m];
                a[i] = flip[i];
                if flip[i] > 0.0 {
                    basis[i] = cols.len();
                }
                cols.push(Column { a, cost: 0.0, kind: Kind::Slack });
            }
        }
        for i in 0..m {
            if basis[i] == usize::MAX {
                let mut a = vec![0.0; m];
                a[i] = 1.0;
                basis[i] = cols.len();
                cols.push(Column { a, cost: 0.0, kind: Kind::Artificial });
            }
        }
        let xb = b.clone();
        Master {
            m,
            b_true: b.clone(),
            b,
            flip,
            cols,
            basis,
            binv: DMatrix::identity(m, m),
            xb,
            since_refactor: 0,
            pivots: 0,
            zero_tol: 1e-12 * (1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
        }
    }

    fn phase_cost(&self, j: usize, phase: &Phase) -> f64 {
        let col = &self.cols[j];
        match (phase, col.kind) {
            (Phase::One, Kind::Artificial) => 1.0,
            (Phase::One, _) => 0.0,
            (Phase::Two, _) => col.cost,
        }
    }

    fn duals(&self, phase: &Phase) -> Vec<f64> {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.phase_cost(j, phase)).collect();
        (0..m).map(|i| (0..m).map(|k| cb[k] * self.binv[(k, i)]).sum()).collect()
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let bmat = DMatrix::from_fn(m, m, |i, k| self.cols[self.basis[k]].a[i]);
        self.binv = bmat
            .try_inverse()
            .ok_or_else(|| Error::Solver("singular simplex basis".into()))?;
        for k in 0..m {
            let v: f64 = (0..m).map(|i| self.binv[(k, i)] * self.b[i]).sum();
            self.xb[k] = if v.abs() < self.zero_tol { 0.0 } else { v };
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn simplex(&mut self, phase: &Phase) -> Result<Outcome> {
        let m = self.m;
        let mut degenerate = 0usize;
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(Error::Solver("simplex pivot limit reached".into()));
            }
            let y = self.duals(phase);
            let in_basis: Vec<bool> = {
                let mut v = vec![false; self.cols.len()];
                for &j in &self.basis {
                    v[j] = true;
                }
                v
            };
            let bland = degenerate > BLAND_AFTER;
            let mut entering: Option<(usize, f64)> = None;
            for (j, col) in self.cols.iter().enumerate() {
                if in_basis[j] || (*phase == Phase::Two && col.kind == Kind::Artificial) {
                    continue;
                }
                let rc = self.phase_cost(j, phase) - col.a.iter().zip(&y).map(|(a, y)| a * y).sum::<f64>();
                let scale = 1.0 + self.phase_cost(j, phase).abs();
                if rc < -FEAS_TOL * scale {
                    match entering {
                        None => entering = Some((j, rc)),
                        Some((_, best)) if !bland && rc < best => entering = Some((j, rc)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(Outcome::Optimal);
            };
            let d = self.direction(q);
            let mut leave: Option<(usize, f64)> = None;
            for k in 0..m {
                let basic_art = self.cols[self.basis[k]].kind == Kind::Artificial;
                let ratio = if *phase == Phase::Two && basic_art && d[k].abs() > PIVOT_TOL {
                    0.0
                } else if d[k] > PIVOT_TOL {
                    self.xb[k].max(0.0) / d[k]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((l, best)) => {
                        let tie = 1e-12 * (1.0 + best);
                        if ratio < best - tie {
                            true
                        } else if ratio <= best + tie {
                            if bland {
                                self.basis[k] < self.basis[l]
                            } else {
                                d[k].abs() > d[l].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((k, ratio));
                }
            }
            let Some((r, theta)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(r, q, &d, theta);
            degenerate = if theta <= FEAS_TOL { degenerate + 1 } else { 0 };
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, d: &[f64], theta: f64) {
        let m = self.m;
        for k in 0..m {
            if k != r {
                self.xb[k] -= theta * d[k];
            }
        }
        self.xb[r] = theta;
        for v in self.xb.iter_mut() {
            if v.abs() < self.zero_tol {
                *v = 0.0;
            }
        }
        let piv = d[r];
        let row_r: Vec<f64> = (0..m).map(|i| self.binv[(r, i)] / piv).collect();
        for k in 0..m {
            if k == r || d[k] == 0.0 {
                continue;
            }
            for i in 0..m {
                self.binv[(k, i)] -= d[k] * row_r[i];
            }
        }
        for i in 0..m {
            self.binv[(r, i)] = row_r[i];
        }
        self.basis[r] = q;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    fn direction(&self, q: usize) -> Vec<f64> {
        let aq = &self.cols[q].a;
        (0..self.m).map(|k| (0..self.m).map(|i| self.binv[(k, i)] * aq[i]).sum()).collect()
    }

    /// Replaces zero-level basic artificials by structural columns where
    /// possible; the rest sit on redundant rows.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.m {
            if self.cols[self.basis[r]].kind != Kind::Artificial {
                continue;
            }
            let in_basis: std::collections::HashSet<usize> = self.basis.iter().copied().collect();
            let best = (0..self.cols.len())
                .filter(|j| !in_basis.contains(j) && self.cols[*j].kind != Kind::Artificial)
                .map(|j| {
                    let a = &self.cols[j].a;
                    let v: f64 = (0..self.m).map(|i| self.binv[(r, i)] * a[i]).sum();
                    (j, v)
                })
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            if let Some((q, v)) = best {
                if v.abs() > 1e-7 {
                    let d = self.direction(q);
                    self.pivot(r, q, &d, 0.0);
                }
            }
        }
        self.refactor()
    }

    /// Shifts the right-hand side so every structural basic variable is
    /// strictly positive, breaking degenerate ties.
    fn perturb(&mut self, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for k in 0..self.m {
            let j = self.basis[k];
            if self.cols[j].kind == Kind::Artificial {
                continue;
            }
            let delta = scale * (1.0 + rng.random::<f64>());
            for i in 0..self.m {
                self.b[i] += self.cols[j].a[i] * delta;
            }
            self.xb[k] += delta;
        }
    }

    fn artificial_mass(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(&j, _)| self.cols[j].kind == Kind::Artificial)
            .map(|(_, &x)| x.max(0.0))
            .sum()
    }
}

/// Most negative `(value, index)` pairs below `-tol`, ordered by value then index.
fn top_negative(n: usize, eval: &(dyn Fn(usize) -> f64 + Sync), tol: f64, k: usize) -> Vec<(f64, usize)> {
    let chunk = 1 << 14;
    let ranges: Vec<(usize, usize)> = (0..n).step_by(chunk).map(|s| (s, (s + chunk).min(n))).collect();
    let mut found: Vec<(f64, usize)> = ranges
        .par_iter()
        .map(|&(s, e)| {
            let mut best: Vec<(f64, usize)> = Vec::new();
            for j in s..e {
                let v = eval(j);
                if v < -tol {
                    best.push((v, j));
                    if best.len() > 4 * k {
                        best.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                        best.truncate(k);
                    }
                }
            }
            best.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            best.truncate(k);
            best
        })
        .flatten()
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    found.truncate(k);
    found
}

/// Column-generation simplex. Returns `Error::Infeasible` when no
/// nonnegative combination of candidates satisfies the rows.
pub(crate) fn solve(senses: &[Sense], rhs: &[f64], source: &dyn ColumnSource) -> Result<LpSolution> {
    if senses.len() != rhs.len() {
        return Err(Error::Domain("row senses and right-hand side differ in length".into()));
    }
    let mut master = Master::new(senses, rhs);
    let mut added = std::collections::HashSet::new();
    let bscale = 1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for phase in [Phase::One, Phase::Two] {
        let w = if phase == Phase::One { 0.0 } else { 1.0 };
        loop {
            match master.simplex(&phase)? {
                Outcome::Optimal => {}
                Outcome::Unbounded => return Err(Error::Solver("reference LP unbounded".into())),
            }
            let y = master.duals(&phase);
            let yf: Vec<f64> = y.iter().zip(&master.flip).map(|(y, f)| y * f).collect();
            let pricer = source.pricer(w, &yf);
            let ynorm = 1.0 + yf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let fresh: Vec<(f64, usize)> = top_negative(source.len(), &*pricer, FEAS_TOL * ynorm, BATCH + added.len().min(BATCH))
                .into_iter()
                .filter(|(_, j)| !added.contains(j))
                .take(BATCH)
                .collect();
            if fresh.is_empty() {
                break;
            }
            for (_, j) in fresh {
                added.insert(j);
                let (cost, a) = source.column(j);
                let a: Vec<f64> = a.iter().zip(&master.flip).map(|(a, f)| a * f).collect();
                master.cols.push(Column { a, cost, kind: Kind::Candidate(j) });
            }
        }
        if phase == Phase::One {
            master.refactor()?;
            if master.artificial_mass() > FEAS_TOL * bscale * 1e2 {
                return Err(Error::Infeasible("no nonnegative grid combination satisfies the rows".into()));
            }
            master.drive_out_artificials()?;
            master.perturb(PERTURBATION * bscale);
        }
    }
    master.b = master.b_true.clone();
    master.refactor()?;
    let mut support = Vec::new();
    let mut objective = 0.0;
    for (k, &j) in master.basis.iter().enumerate() {
        let x = master.xb[k];
        objective += master.phase_cost(j, &Phase::Two) * x;
        if let Kind::Candidate(c) = master.cols[j].kind {
            if x > 0.0 {
                support.push((c, x));
            }
        }
    }
    support.sort_by_key(|s| s.0);
    Ok(LpSolution { objective, support })
}
