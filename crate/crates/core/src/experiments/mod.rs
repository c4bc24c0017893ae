//! Empirical checks of the hierarchy: gap sweeps against a grid reference,
//! a sampled-objective Hausdorff estimate and optimizer convergence tables.
//!
//! Work is spread over a rayon pool whose size is capped by the
//! `MOMENTGMP_THREADS` environment variable; every result is aggregated by
//! index so outputs do not depend on the thread count.

mod lp;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::conic::Settings;
use crate::error::{domain, Error, Result};
use crate::gmp::{solve_relaxation, GmpInstance, RowKind};
use crate::poly::{a_norm, monomials_upto, weighted_functional_norm, Polynomial, PseudoMoments};

use lp::{ColumnSource, Sense};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "MOMENTGMP_THREADS";

/// Upper limit on grid candidates across all slots.
pub const MAX_GRID_CANDIDATES: usize = 50_000_000;

const MAX_GRID_DIM: usize = 2;
const MAX_EVAL_DEGREE: usize = 64;

/// Worker pool sized by [`THREADS_ENV`] (unset or 0: rayon default).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Domain(format!("{THREADS_ENV} must be a nonnegative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Solver(format!("thread pool: {e}")))
}

/// Polynomial in at most two variables with a power-table evaluator.
struct Compiled {
    n: usize,
    terms: Vec<([usize; MAX_GRID_DIM], f64)>,
    degree: usize,
}

impl Compiled {
    fn new(p: &Polynomial) -> Result<Self> {
        if p.n() > MAX_GRID_DIM {
            return domain(format!("grid oracle supports n ≤ {MAX_GRID_DIM}, got {}", p.n()));
        }
        if p.degree() >= MAX_EVAL_DEGREE {
            return domain(format!("grid oracle supports degree < {MAX_EVAL_DEGREE}"));
        }
        let terms = p
            .terms()
            .map(|(a, c)| {
                let mut e = [0usize; MAX_GRID_DIM];
                for (slot, &x) in e.iter_mut().zip(a.exponents()) {
                    *slot = x as usize;
                }
                (e, c)
            })
            .collect();
        Ok(Compiled { n: p.n(), terms, degree: p.degree() })
    }

    fn eval(&self, x: &[f64; MAX_GRID_DIM]) -> f64 {
        let mut pw = [[1.0f64; MAX_EVAL_DEGREE]; MAX_GRID_DIM];
        for i in 0..self.n {
            for p in 1..=self.degree {
                pw[i][p] = pw[i][p - 1] * x[i];
            }
        }
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut v = *c;
                for i in 0..self.n {
                    v *= pw[i][e[i]];
                }
                v
            })
            .sum()
    }
}

/// Accepted grid points of one slot, stored as linear indices.
struct SlotGrid {
    n: usize,
    per_dim: usize,
    points: Vec<u32>,
}

impl SlotGrid {
    fn coord(&self, linear: u32) -> [f64; MAX_GRID_DIM] {
        let mut x = [0.0; MAX_GRID_DIM];
        let mut rest = linear as usize;
        let h = (self.per_dim - 1) as f64;
        for xi in x.iter_mut().take(self.n) {
            let k = rest % self.per_dim;
            rest /= self.per_dim;
            *xi = (2.0 * k as f64 - h) / h;
        }
        x
    }
}

struct GridSource<'a> {
    instance: &'a GmpInstance,
    grids: Vec<SlotGrid>,
    offsets: Vec<usize>,
    total: usize,
    objective: Vec<Compiled>,
    rows: Vec<Vec<Compiled>>,
}

impl<'a> GridSource<'a> {
    fn new(instance: &'a GmpInstance, per_dim: usize) -> Result<Self> {
        if per_dim < 2 {
            return domain("grid needs at least 2 points per dimension");
        }
        let mut raw = 0usize;
        for s in &instance.slots {
            if s.n > MAX_GRID_DIM {
                return domain(format!("grid oracle supports slots with n ≤ {MAX_GRID_DIM}, got {}", s.n));
            }
            raw = raw.saturating_add(per_dim.saturating_pow(s.n as u32));
        }
        if raw > MAX_GRID_CANDIDATES || raw > u32::MAX as usize {
            return domain(format!("{raw} grid candidates exceed the limit {MAX_GRID_CANDIDATES}"));
        }
        let mut grids = Vec::with_capacity(instance.slots.len());
        let mut offsets = Vec::with_capacity(instance.slots.len());
        let mut total = 0;
        for slot in &instance.slots {
            let count = per_dim.pow(slot.n as u32);
            let mut g = SlotGrid { n: slot.n, per_dim, points: Vec::new() };
            let accepted: Vec<Vec<u32>> = (0..count as u32)
                .collect::<Vec<_>>()
                .par_chunks(1 << 16)
                .map(|chunk| {
                    chunk
                        .iter()
                        .copied()
                        .filter(|&j| slot.contains(&g.coord(j)[..slot.n]))
                        .collect()
                })
                .collect();
            g.points = accepted.concat();
            offsets.push(total);
            total += g.points.len();
            grids.push(g);
        }
        let objective = instance.objective.iter().map(Compiled::new).collect::<Result<_>>()?;
        let rows = instance
            .rows
            .iter()
            .map(|r| r.h.iter().map(Compiled::new).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(GridSource { instance, grids, offsets, total, objective, rows })
    }

    fn locate(&self, j: usize) -> (usize, [f64; MAX_GRID_DIM]) {
        let s = self.offsets.partition_point(|&o| o <= j) - 1;
        let g = &self.grids[s];
        (s, g.coord(g.points[j - self.offsets[s]]))
    }
}

impl ColumnSource for GridSource<'_> {
    fn len(&self) -> usize {
        self.total
    }

    fn column(&self, j: usize) -> (f64, Vec<f64>) {
        let (s, x) = self.locate(j);
        let a = self.rows.iter().map(|r| r[s].eval(&x)).collect();
        (self.objective[s].eval(&x), a)
    }

    fn pricer(&self, w: f64, y: &[f64]) -> Box<dyn Fn(usize) -> f64 + Sync + '_> {
        let combined: Vec<Compiled> = (0..self.grids.len())
            .map(|s| {
                let mut g = self.instance.objective[s].scale(w);
                for (row, &yi) in self.instance.rows.iter().zip(y) {
                    if yi != 0.0 {
                        g = &g - &row.h[s].scale(yi);
                    }
                }
                Compiled::new(&g).expect("degrees were checked when compiling the rows")
            })
            .collect();
        Box::new(move |j| {
            let (s, x) = self.locate(j);
            combined[s].eval(&x)
        })
    }
}

/// Grid atom carrying positive weight in the reference LP.
#[derive(Clone, Debug, Serialize)]
pub struct ReferenceAtom {
    pub slot: usize,
    pub point: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceSolution {
    pub value: f64,
    pub atoms: Vec<ReferenceAtom>,
}

/// Optimum of the finite LP over nonnegative atom weights on a grid of
/// `grid_points_per_dim` points per axis of `[-1, 1]^n`, filtered by slot
/// membership. An upper bound on the moment problem's optimum.
pub fn reference_optimum(instance: &GmpInstance, grid_points_per_dim: usize) -> Result<f64> {
    reference_solution(instance, grid_points_per_dim).map(|s| s.value)
}

/// [`reference_optimum`] together with its optimal grid measure.
pub fn reference_solution(instance: &GmpInstance, grid_points_per_dim: usize) -> Result<ReferenceSolution> {
    instance.validate()?;
    let source = GridSource::new(instance, grid_points_per_dim)?;
    let senses: Vec<Sense> = instance
        .rows
        .iter()
        .map(|r| match r.kind {
            RowKind::Eq => Sense::Eq,
            RowKind::Le => Sense::Le,
        })
        .collect();
    let rhs: Vec<f64> = instance.rows.iter().map(|r| r.t).collect();
    match lp::solve(&senses, &rhs, &source) {
        Ok(sol) => Ok(ReferenceSolution {
            value: sol.objective,
            atoms: sol
                .support
                .iter()
                .map(|&(j, weight)| {
                    let (slot, x) = source.locate(j);
                    ReferenceAtom { slot, point: x[..instance.slots[slot].n].to_vec(), weight }
                })
                .collect(),
        }),
        Err(Error::Infeasible(_)) => Err(Error::Infeasible(format!(
            "moment data not representable on a {grid_points_per_dim}-point grid"
        ))),
        Err(e) => Err(e),
    }
}

/// One relaxation order of a [`gap_sweep`].
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub ell: usize,
    pub primal: Option<f64>,
    pub dual: Option<f64>,
    pub status: String,
    pub primal_residual: Option<f64>,
    pub dual_residual: Option<f64>,
    pub time_ms: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub reference: Option<f64>,
}

#[derive(Serialize)]
struct SweepCsvRow {
    ell: usize,
    p_ell: Option<f64>,
    d_ell: Option<f64>,
    gap: Option<f64>,
    time_ms: f64,
}

impl SweepResult {
    /// `reference − 𝔭*_ℓ` per row, when both are known.
    pub fn gap(&self, row: &SweepRow) -> Option<f64> {
        Some(self.reference? - row.primal?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(SweepCsvRow {
                ell: r.ell,
                p_ell: r.primal,
                d_ell: r.dual,
                gap: self.gap(r),
                time_ms: r.time_ms,
            })
            .map_err(csv_error)?;
        }
        finish_csv(w)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn check_orders(ells: &[usize]) -> Result<()> {
    if ells.is_empty() {
        return domain("relaxation order list is empty");
    }
    if ells.iter().any(|l| l % 2 != 0) {
        return domain("relaxation orders must be even");
    }
    if ells.windows(2).any(|w| w[0] >= w[1]) {
        return domain("relaxation orders must be strictly ascending");
    }
    Ok(())
}

/// Solves the hierarchy at every order in `ells`. Solver failures are
/// recorded on their row and the sweep continues.
pub fn gap_sweep(instance: &GmpInstance, ells: &[usize], reference: Option<f64>, settings: &Settings) -> Result<SweepResult> {
    check_orders(ells)?;
    instance.validate()?;
    let pool = worker_pool()?;
    let rows = pool.install(|| {
        ells.par_iter()
            .map(|&ell| {
                let start = Instant::now();
                let res = solve_relaxation(instance, ell, settings);
                let time_ms = start.elapsed().as_secs_f64() * 1e3;
                match res {
                    Ok(r) => SweepRow {
                        ell,
                        primal: Some(r.primal_objective),
                        dual: Some(r.dual_objective),
                        status: format!("{:?}", r.solution.status),
                        primal_residual: Some(r.solution.residuals.primal),
                        dual_residual: Some(r.solution.residuals.dual),
                        time_ms,
                        error: None,
                    },
                    Err(e) => SweepRow {
                        ell,
                        primal: None,
                        dual: None,
                        status: "Error".into(),
                        primal_residual: None,
                        dual_residual: None,
                        time_ms,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    Ok(SweepResult { rows, reference })
}

/// Gaussian polynomial of degree ≤ `k` in `n` variables with `a_norm = 1`.
pub fn sample_unit_anorm(n: usize, k: usize, seed: u64) -> Polynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<_> = monomials_upto(n, k)
        .into_iter()
        .map(|a| {
            let c: f64 = rng.sample(StandardNormal);
            (a, c)
        })
        .collect();
    let p = Polynomial::from_terms(n, terms).expect("monomials match the variable count");
    let s = a_norm(&p);
    if s > 0.0 {
        p.scale(1.0 / s)
    } else {
        Polynomial::constant(n, 1.0)
    }
}

/// Objective vector with unit total A-norm, one polynomial per slot.
fn sampled_objective(family: &GmpInstance, k: usize, seed: u64) -> Vec<Polynomial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<Polynomial> = family
        .slots
        .iter()
        .map(|s| sample_unit_anorm(s.n, k, rng.random()))
        .collect();
    let total: f64 = parts.iter().map(a_norm).sum();
    parts.iter().map(|p| p.scale(1.0 / total)).collect()
}

fn sample_seeds(seed: u64, samples: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| rng.random()).collect()
}

/// One order of a [`hausdorff_sweep`].
#[derive(Clone, Debug, Serialize)]
pub struct HausdorffRow {
    pub ell: usize,
    pub estimate: f64,
    pub samples: usize,
    pub grid: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HausdorffResult {
    pub rows: Vec<HausdorffRow>,
}

impl HausdorffResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(csv_error)?;
        }
        finish_csv(w)
    }
}

/// Sampled lower estimate of the Hausdorff distance between the degree-`k`
/// truncations of the feasible set and of the order-`ell` relaxation.
/// The family's own objective is ignored.
pub fn empirical_hausdorff(
    family: &GmpInstance,
    k: usize,
    ell: usize,
    samples: usize,
    grid: usize,
    seed: u64,
    settings: &Settings,
) -> Result<f64> {
    let res = hausdorff_sweep(family, k, &[ell], samples, grid, seed, settings)?;
    Ok(res.rows[0].estimate)
}

/// [`empirical_hausdorff`] over several orders with one shared sample set;
/// each sample's grid reference is computed once.
pub fn hausdorff_sweep(
    family: &GmpInstance,
    k: usize,
    ells: &[usize],
    samples: usize,
    grid: usize,
    seed: u64,
    settings: &Settings,
) -> Result<HausdorffResult> {
    if samples == 0 {
        return domain("at least one sample is required");
    }
    if let Some(&bad) = ells.iter().find(|&&l| l < k) {
        return domain(format!("relaxation order {bad} is below the objective degree {k}"));
    }
    if ells.is_empty() {
        return domain("relaxation order list is empty");
    }
    family.validate()?;
    let seeds = sample_seeds(seed, samples);
    let pool = worker_pool()?;
    let gaps: Vec<Vec<f64>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| {
                let mut inst = family.clone();
                inst.objective = sampled_objective(family, k, s);
                let reference = reference_optimum(&inst, grid)?;
                ells.iter()
                    .map(|&ell| {
                        let r = solve_relaxation(&inst, ell, settings)?;
                        Ok((reference - r.primal_objective).max(0.0))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = ells
        .iter()
        .enumerate()
        .map(|(i, &ell)| HausdorffRow {
            ell,
            estimate: gaps.iter().map(|g| g[i]).fold(0.0, f64::max),
            samples,
            grid,
        })
        .collect();
    Ok(HausdorffResult { rows })
}

/// Moment distance of one order to the last order of the sweep, and to an
/// optional known optimizer.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub ell: usize,
    pub distance: f64,
    pub reference_distance: Option<f64>,
}

fn truncated_distance(a: &[PseudoMoments], b: &[PseudoMoments], k: usize) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let x = x.truncate(k);
            let y = y.truncate(k);
            let diff: Vec<f64> = x.values().iter().zip(y.values()).map(|(u, v)| u - v).collect();
            let d = PseudoMoments::new(x.n(), k, diff).expect("truncations share their shape");
            weighted_functional_norm(&d)
        })
        .fold(0.0, f64::max)
}

/// Weighted-norm distance between degree-`k` truncations of each order's
/// optimizer and the largest order's optimizer (maximum over slots).
pub fn optimizer_convergence(
    instance: &GmpInstance,
    ells: &[usize],
    k: usize,
    reference: Option<&[PseudoMoments]>,
    settings: &Settings,
) -> Result<Vec<ConvergenceRow>> {
    check_orders(ells)?;
    if k > ells[0] {
        return domain(format!("truncation degree {k} exceeds the smallest order {}", ells[0]));
    }
    if let Some(r) = reference {
        if r.len() != instance.slots.len() || r.iter().any(|m| m.order() < k) {
            return domain("reference moments must cover every slot up to degree k");
        }
    }
    let pool = worker_pool()?;
    let moments: Vec<Vec<PseudoMoments>> = pool.install(|| {
        ells.par_iter()
            .map(|&ell| solve_relaxation(instance, ell, settings).map(|r| r.moments))
            .collect::<Result<_>>()
    })?;
    let last = moments.last().expect("order list is nonempty");
    Ok(ells
        .iter()
        .zip(&moments)
        .map(|(&ell, m)| ConvergenceRow {
            ell,
            distance: truncated_distance(m, last, k),
            reference_distance: reference.map(|r| truncated_distance(m, r, k)),
        })
        .collect())
}

/// CSV with columns `ell, distance, reference_distance`.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    finish_csv(w)
}
