//! Generalized moment problems on vectors of measures and their order-ℓ
//! moment relaxations.
//!
//! A [`GmpInstance`] has one slot per measure `μ_i` supported on a basic
//! semialgebraic set `S_i` inside the unit ball, linear rows
//! `⟨μ, h_j⟩ = t_j` or `⟨μ, h_j⟩ ≤ t_j`, and an objective `Σ_i ⟨μ_i, f_i⟩`
//! to minimize. [`assemble_primal`] replaces each measure by a vector of
//! pseudo-moments subject to moment and localizing PSD constraints.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conic::{self, Cone, ConicProblem, ConicSolution, CsrMatrix, Settings, Status};
use crate::error::{domain, Error, Result};
use crate::moment::localizing_structure;
use crate::poly::{grlex_rank, num_monomials, MultiIndex, Polynomial, PseudoMoments};

/// Number of sample points used for numeric positivity checks on `S_i`.
pub const WITNESS_SAMPLES: usize = 4096;
const WITNESS_SEED: u64 = 0x5eed;

/// Support set `S = {x ∈ ℝⁿ : g(x) ≥ 0 for all generators g}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSlot {
    pub n: usize,
    pub generators: Vec<Polynomial>,
}

impl MeasureSlot {
    /// The unit ball `{1 − ‖x‖² ≥ 0}`.
    pub fn unit_ball(n: usize) -> Self {
        MeasureSlot {
            n,
            generators: vec![ball_generator(n)],
        }
    }

    /// Whether some generator is a positive multiple of `1 − ‖x‖²`.
    pub fn includes_ball(&self) -> bool {
        self.generators.iter().any(|g| is_ball_multiple(g, self.n))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.generators.iter().all(|g| g.eval(x) >= 0.0)
    }

    fn validate(&self, slot: usize) -> Result<()> {
        if self.generators.iter().any(|g| g.n() != self.n) {
            return domain(format!("slot {slot}: generator variable count differs from n = {}", self.n));
        }
        if !self.includes_ball() {
            return domain(format!("slot {slot}: generators must include a multiple of 1 - |x|^2"));
        }
        Ok(())
    }

    /// Deterministic sample of points of `S`: uniform in the ball, filtered
    /// by the remaining generators.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let max_draws = count.saturating_mul(1000).max(1);
        let mut draws = 0;
        while out.len() < count && draws < max_draws {
            draws += 1;
            let x = sample_ball(&mut rng, self.n);
            if self.contains(&x) {
                out.push(x);
            }
        }
        out
    }
}

/// `1 − Σ x_i²`.
pub fn ball_generator(n: usize) -> Polynomial {
    let mut g = Polynomial::constant(n, 1.0);
    for i in 0..n {
        let mut e = vec![0; n];
        e[i] = 2;
        g.add_term(MultiIndex::new(e), -1.0);
    }
    g
}

fn is_ball_multiple(g: &Polynomial, n: usize) -> bool {
    let c = g.coef(&MultiIndex::zero(n));
    c > 0.0 && g.num_terms() == n + 1 && (0..n).all(|i| {
        let mut e = vec![0; n];
        e[i] = 2;
        (g.coef(&MultiIndex::new(e)) + c).abs() <= 1e-12 * c
    })
}

/// Uniform point in the closed unit ball of `ℝⁿ`.
pub fn sample_ball<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let r: f64 = rng.random::<f64>().powf(1.0 / n as f64);
    v.iter_mut().for_each(|x| *x *= r / norm);
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    /// `⟨μ, h⟩ = t`
    Eq,
    /// `⟨μ, h⟩ ≤ t`
    Le,
}

/// Linear row `⟨μ, h⟩ = t` or `≤ t` with one polynomial per slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub h: Vec<Polynomial>,
    pub t: f64,
    pub kind: RowKind,
}

impl ConstraintRow {
    pub fn degree(&self) -> usize {
        self.h.iter().map(Polynomial::degree).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "GmpInstanceJson", try_from = "GmpInstanceJson")]
pub struct GmpInstance {
    pub slots: Vec<MeasureSlot>,
    pub objective: Vec<Polynomial>,
    pub rows: Vec<ConstraintRow>,
    /// Sparse S-fullness witness `w` over row indices.
    pub witness: Option<BTreeMap<usize, f64>>,
}

/// Wire form; witness keys are row indices written as strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GmpInstanceJson {
    pub slots: Vec<MeasureSlot>,
    pub objective: Vec<Polynomial>,
    pub rows: Vec<ConstraintRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, f64>>,
}

impl From<GmpInstance> for GmpInstanceJson {
    fn from(g: GmpInstance) -> Self {
        GmpInstanceJson {
            slots: g.slots,
            objective: g.objective,
            rows: g.rows,
            witness: g
                .witness
                .map(|w| w.into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
        }
    }
}

impl TryFrom<GmpInstanceJson> for GmpInstance {
    type Error = Error;
    fn try_from(j: GmpInstanceJson) -> Result<Self> {
        let witness = match j.witness {
            None => None,
            Some(w) => {
                let mut out = BTreeMap::new();
                for (k, v) in w {
                    let idx: usize = k
                        .parse()
                        .map_err(|_| Error::Domain(format!("witness key {k:?} is not a row index")))?;
                    out.insert(idx, v);
                }
                Some(out)
            }
        };
        let g = GmpInstance {
            slots: j.slots,
            objective: j.objective,
            rows: j.rows,
            witness,
        };
        g.validate()?;
        Ok(g)
    }
}

impl GmpInstance {
    pub fn validate(&self) -> Result<()> {
        if self.slots.is_empty() {
            return domain("instance has no measure slots");
        }
        for (i, s) in self.slots.iter().enumerate() {
            s.validate(i)?;
        }
        if self.objective.len() != self.slots.len() {
            return domain("objective needs one polynomial per slot");
        }
        for (i, (f, s)) in self.objective.iter().zip(&self.slots).enumerate() {
            if f.n() != s.n {
                return domain(format!("objective on slot {i} has wrong variable count"));
            }
        }
        for (j, row) in self.rows.iter().enumerate() {
            if row.h.len() != self.slots.len() {
                return domain(format!("row {j} needs one polynomial per slot"));
            }
            if row.h.iter().zip(&self.slots).any(|(h, s)| h.n() != s.n) {
                return domain(format!("row {j} has a polynomial with wrong variable count"));
            }
            if !row.t.is_finite() {
                return domain(format!("row {j} has non-finite right-hand side"));
            }
        }
        if let Some(w) = &self.witness {
            for (&j, &wj) in w {
                let Some(row) = self.rows.get(j) else {
                    return domain(format!("witness refers to missing row {j}"));
                };
                if !wj.is_finite() || (row.kind == RowKind::Le && wj < 0.0) {
                    return domain(format!("witness weight on row {j} must lie in the dual cone"));
                }
            }
        }
        Ok(())
    }

    pub fn objective_degree(&self) -> usize {
        self.objective.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    /// `b_i = Σ_j w_j h_{i,j}` per slot.
    pub fn witness_polynomials(&self) -> Result<Vec<Polynomial>> {
        let w = self
            .witness
            .as_ref()
            .ok_or_else(|| Error::Unsupported("instance has no S-fullness witness".into()))?;
        let mut out: Vec<Polynomial> = self.slots.iter().map(|s| Polynomial::zero(s.n)).collect();
        for (&j, &wj) in w {
            for (b, h) in out.iter_mut().zip(&self.rows[j].h) {
                *b = &*b + &h.scale(wj);
            }
        }
        Ok(out)
    }

    /// Minimum of `b_i` over [`WITNESS_SAMPLES`] fixed-seed points of each
    /// `S_i`, failing with [`Error::WitnessInvalid`] when it is not positive.
    pub fn check_witness(&self) -> Result<f64> {
        let bs = self.witness_polynomials()?;
        let mut overall = f64::INFINITY;
        for (i, (slot, b)) in self.slots.iter().zip(&bs).enumerate() {
            let mut min = b.eval(&vec![0.0; slot.n]);
            if !slot.contains(&vec![0.0; slot.n]) {
                min = f64::INFINITY;
            }
            for x in slot.sample(WITNESS_SAMPLES, WITNESS_SEED + i as u64) {
                min = min.min(b.eval(&x));
            }
            if !(min > 0.0) {
                return Err(Error::WitnessInvalid { slot: i, min });
            }
            overall = overall.min(min);
        }
        Ok(overall)
    }
}

/// `⟨t, w⟩ / b_min`, an upper bound on the total mass `Σ_i λ_i(1)` of any
/// feasible point.
pub fn mass_bound(instance: &GmpInstance) -> Result<f64> {
    let b_min = instance.check_witness()?;
    let w = instance.witness.as_ref().expect("checked above");
    let tw: f64 = w.iter().map(|(&j, &wj)| wj * instance.rows[j].t).sum();
    Ok(tw / b_min)
}

/// Output of [`assemble_primal`] together with the maps back to the model.
#[derive(Clone, Debug)]
pub struct AssembledPrimal {
    pub problem: ConicProblem,
    pub ell: usize,
    /// Start of each slot's moment vector in `x`.
    pub slot_offsets: Vec<usize>,
    pub slot_dims: Vec<usize>,
    /// Original index of each linear row kept in `J_ℓ`, in row order.
    pub kept_rows: Vec<usize>,
    /// Euclidean norm each kept row was divided by.
    pub row_norms: Vec<f64>,
    /// Rows of the first PSD block.
    pub psd_offset: usize,
    pub warnings: Vec<String>,
}

impl AssembledPrimal {
    pub fn moments(&self, x: &[f64]) -> Vec<PseudoMoments> {
        self.slot_offsets
            .iter()
            .zip(&self.slot_dims)
            .map(|(&off, &n)| {
                let len = num_monomials(n, self.ell);
                PseudoMoments::new(n, self.ell, x[off..off + len].to_vec()).expect("length by construction")
            })
            .collect()
    }

    /// Multipliers `v_j` of the kept rows, in the sign convention
    /// `f − Σ_j v_j h_j ∈ Q_ℓ`, keyed by original row index.
    pub fn row_duals(&self, y: &[f64]) -> BTreeMap<usize, f64> {
        self.kept_rows
            .iter()
            .zip(&self.row_norms)
            .enumerate()
            .map(|(k, (&j, &nrm))| (j, -y[k] / nrm))
            .collect()
    }
}

/// Order-ℓ moment relaxation of `instance` in conic standard form.
///
/// Rows: kept linear rows (equalities, then inequalities, each normalized to
/// unit norm), then per slot the moment matrix of order `⌊ℓ/2⌋` and one
/// localizing matrix per generator.
pub fn assemble_primal(instance: &GmpInstance, ell: usize) -> Result<AssembledPrimal> {
    instance.validate()?;
    let fdeg = instance.objective_degree();
    if ell < fdeg {
        return domain(format!("relaxation order {ell} is below the objective degree {fdeg}"));
    }
    if ell < 2 {
        return domain("relaxation order must be at least 2");
    }
    let mut slot_offsets = Vec::with_capacity(instance.slots.len());
    let mut slot_dims = Vec::with_capacity(instance.slots.len());
    let mut nvars = 0;
    for s in &instance.slots {
        slot_offsets.push(nvars);
        slot_dims.push(s.n);
        nvars += num_monomials(s.n, ell);
    }

    let mut c = vec![0.0; nvars];
    for (i, f) in instance.objective.iter().enumerate() {
        for (a, v) in f.terms() {
            c[slot_offsets[i] + grlex_rank(a)] += v;
        }
    }

    let mut warnings = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut b = Vec::new();
    let mut kept_rows = Vec::new();
    let mut row_norms = Vec::new();
    let mut cones = Vec::new();
    for kind in [RowKind::Eq, RowKind::Le] {
        let mut count = 0;
        for (j, row) in instance.rows.iter().enumerate() {
            if row.kind != kind || row.degree() > ell {
                continue;
            }
            let mut r = Vec::new();
            for (i, h) in row.h.iter().enumerate() {
                r.extend(h.terms().map(|(a, v)| (slot_offsets[i] + grlex_rank(a), v)));
            }
            let nrm = r.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 {
                // 0 = t or 0 ≤ t: nothing to enforce, but a violated one is infeasible.
                let violated = match kind {
                    RowKind::Eq => row.t != 0.0,
                    RowKind::Le => row.t < 0.0,
                };
                if violated {
                    return Err(Error::Infeasible(format!("row {j} has zero polynomial and unattainable rhs")));
                }
                continue;
            }
            r.iter_mut().for_each(|(_, v)| *v /= nrm);
            rows.push(r);
            b.push(row.t / nrm);
            kept_rows.push(j);
            row_norms.push(nrm);
            count += 1;
        }
        if count > 0 {
            cones.push(match kind {
                RowKind::Eq => Cone::Zero(count),
                RowKind::Le => Cone::NonNeg(count),
            });
        }
    }
    if kept_rows.is_empty() && !instance.rows.is_empty() && instance.rows.iter().all(|r| r.kind == RowKind::Eq) {
        warnings.push(format!(
            "no constraint row has degree at most {ell}; the relaxation is unconstrained"
        ));
    }

    let psd_offset = rows.len();
    let half = ell / 2;
    for (i, slot) in instance.slots.iter().enumerate() {
        let one = Polynomial::constant(slot.n, 1.0);
        let gens = std::iter::once(&one).chain(slot.generators.iter());
        for g in gens {
            if g.degree() > ell {
                warnings.push(format!("slot {i}: generator of degree {} skipped at ℓ = {ell}", g.degree()));
                continue;
            }
            let h = if std::ptr::eq(g, &one) { half } else { (ell - g.degree()) / 2 };
            let (basis, structure) = localizing_structure(g, h);
            let side = basis.len();
            let mut block = vec![Vec::new(); side * (side + 1) / 2];
            for (r, col, terms) in structure {
                let k = conic::svec_index(side, r, col);
                let f = if r == col { -1.0 } else { -std::f64::consts::SQRT_2 };
                block[k] = terms.iter().map(|&(idx, v)| (slot_offsets[i] + idx, f * v)).collect();
            }
            b.extend(std::iter::repeat(0.0).take(block.len()));
            rows.extend(block);
            cones.push(Cone::Psd(side));
        }
    }
    let a = CsrMatrix::from_rows(nvars, rows);
    let problem = ConicProblem::new(c, a, b, cones)?;
    Ok(AssembledPrimal {
        problem,
        ell,
        slot_offsets,
        slot_dims,
        kept_rows,
        row_norms,
        psd_offset,
        warnings,
    })
}

/// Conic dual of [`assemble_primal`]'s output, written as a minimization:
/// variables are the primal row multipliers `y`, with `Aᵀy = −c`, `y ∈ K*`,
/// objective `bᵀy`. The optimal value of the SoS program is `−bᵀy*`.
///
/// The factorization is dense in the number of primal rows, so this is
/// meant for small instances.
pub fn assemble_dual(instance: &GmpInstance, ell: usize) -> Result<ConicProblem> {
    let primal = assemble_primal(instance, ell)?.problem;
    dualize(&primal)
}

/// Standard-form conic dual of a standard-form problem.
pub fn dualize(p: &ConicProblem) -> Result<ConicProblem> {
    let m = p.num_rows();
    let n = p.num_vars();
    let at = p.a.transpose();
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|j| at.row(j).collect()).collect();
    let mut b: Vec<f64> = p.c.iter().map(|v| -v).collect();
    let mut cones = vec![Cone::Zero(n)];
    let mut off = 0;
    for &cone in &p.cones {
        let k = cone.dim();
        match cone {
            Cone::Zero(_) => {}
            Cone::NonNeg(_) | Cone::Psd(_) => {
                for r in off..off + k {
                    rows.push(vec![(r, -1.0)]);
                    b.push(0.0);
                }
                cones.push(cone);
            }
        }
        off += k;
    }
    ConicProblem::new(p.b.clone(), CsrMatrix::from_rows(m, rows), b, cones)
}

/// Solved relaxation mapped back to the model.
#[derive(Clone, Debug)]
pub struct RelaxationResult {
    pub moments: Vec<PseudoMoments>,
    /// `v_j` keyed by original row index.
    pub row_duals: BTreeMap<usize, f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub solution: ConicSolution,
    pub warnings: Vec<String>,
}

/// Assembles and solves the order-ℓ relaxation.
///
/// Fails on infeasibility certificates; `MaxIter` results are returned with
/// their residuals.
pub fn solve_relaxation(instance: &GmpInstance, ell: usize, settings: &Settings) -> Result<RelaxationResult> {
    let asm = assemble_primal(instance, ell)?;
    let sol = conic::solve(&asm.problem, settings)?;
    match sol.status {
        Status::PrimalInfeasible => return Err(Error::Solver("relaxation is infeasible".into())),
        Status::DualInfeasible => return Err(Error::Solver("relaxation is unbounded".into())),
        Status::Optimal | Status::MaxIter => {}
    }
    Ok(RelaxationResult {
        moments: asm.moments(&sol.x),
        row_duals: asm.row_duals(&sol.y),
        primal_objective: sol.primal_objective,
        dual_objective: sol.dual_objective,
        solution: sol,
        warnings: asm.warnings,
    })
}

/// Polynomial optimization `min f on S` as a GMP over probability measures.
pub fn pop_instance(slot: MeasureSlot, f: Polynomial) -> GmpInstance {
    let n = slot.n;
    GmpInstance {
        slots: vec![slot],
        objective: vec![f],
        rows: vec![ConstraintRow {
            h: vec![Polynomial::constant(n, 1.0)],
            t: 1.0,
            kind: RowKind::Eq,
        }],
        witness: Some(BTreeMap::from([(0, 1.0)])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::{localizing_matrix, moment_matrix};

    fn pop_x() -> GmpInstance {
        pop_instance(MeasureSlot::unit_ball(1), Polynomial::var(1, 0))
    }

    #[test]
    fn pop_structure() {
        let asm = assemble_primal(&pop_x(), 2).unwrap();
        let p = &asm.problem;
        assert_eq!(p.num_vars(), 3);
        assert_eq!(p.cones, vec![Cone::Zero(1), Cone::Psd(2), Cone::Psd(1)]);
        assert_eq!(p.c, vec![0.0, 1.0, 0.0]);
        assert!(asm.warnings.is_empty());
    }

    #[test]
    fn psd_rows_reproduce_moment_and_localizing_matrices() {
        let slot = MeasureSlot::unit_ball(2);
        let inst = pop_instance(slot.clone(), Polynomial::var(2, 1));
        let asm = assemble_primal(&inst, 4).unwrap();
        let lam = PseudoMoments::from_fn(2, 4, |a| 0.3f64.powi(a.exponents()[0] as i32) * (-0.2f64).powi(a.exponents()[1] as i32) + a.degree() as f64 * 0.01);
        let ax = asm.problem.a.mul_vec(lam.values());
        let mut off = asm.psd_offset;
        let mm = moment_matrix(&lam, 2).unwrap();
        let s = mm.nrows();
        let got = conic::smat(&ax[off..off + s * (s + 1) / 2].iter().map(|v| -v).collect::<Vec<_>>(), s);
        assert!((got - &mm.entries).amax() < 1e-12);
        off += s * (s + 1) / 2;
        let lm = localizing_matrix(&lam, &slot.generators[0], 4).unwrap().matrix;
        let s = lm.nrows();
        let got = conic::smat(&ax[off..off + s * (s + 1) / 2].iter().map(|v| -v).collect::<Vec<_>>(), s);
        assert!((got - &lm.entries).amax() < 1e-12);
    }

    #[test]
    fn rows_above_ell_are_dropped() {
        let mut inst = pop_x();
        inst.rows.push(ConstraintRow {
            h: vec![Polynomial::var(1, 0).pow(4)],
            t: 0.5,
            kind: RowKind::Le,
        });
        let asm = assemble_primal(&inst, 2).unwrap();
        assert_eq!(asm.kept_rows, vec![0]);
        let asm = assemble_primal(&inst, 4).unwrap();
        assert_eq!(asm.kept_rows, vec![0, 1]);
        assert_eq!(asm.problem.cones[1], Cone::NonNeg(1));
    }

    #[test]
    fn order_below_objective_degree_is_rejected() {
        let inst = pop_instance(MeasureSlot::unit_ball(1), Polynomial::var(1, 0).pow(3));
        assert!(matches!(assemble_primal(&inst, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn slot_without_ball_is_rejected() {
        let mut inst = pop_x();
        inst.slots[0].generators = vec![Polynomial::var(1, 0)];
        assert!(inst.validate().is_err());
    }

    #[test]
    fn mass_bounds() {
        assert!((mass_bound(&pop_x()).unwrap() - 1.0).abs() < 1e-15);
        let mut inst = pop_x();
        inst.witness = Some(BTreeMap::from([(0, 7.5)]));
        assert!((mass_bound(&inst).unwrap() - 1.0).abs() < 1e-15);
        inst.witness = None;
        assert!(matches!(mass_bound(&inst), Err(Error::Unsupported(_))));
        inst.rows[0].h[0] = Polynomial::var(1, 0);
        inst.witness = Some(BTreeMap::from([(0, 1.0)]));
        assert!(matches!(mass_bound(&inst), Err(Error::WitnessInvalid { .. })));
    }

    #[test]
    fn json_roundtrip() {
        let inst = pop_x();
        let s = serde_json::to_string(&inst).unwrap();
        assert!(s.contains("\"kind\":\"eq\""));
        assert!(s.contains("\"witness\":{\"0\":1.0}"));
        let back: GmpInstance = serde_json::from_str(&s).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn dual_is_transposed_primal() {
        let p = assemble_primal(&pop_x(), 2).unwrap().problem;
        let d = dualize(&p).unwrap();
        assert_eq!(d.num_vars(), p.num_rows());
        assert_eq!(d.c, p.b);
        assert_eq!(d.cones[0], Cone::Zero(p.num_vars()));
        let at = p.a.transpose();
        for j in 0..p.num_vars() {
            assert_eq!(d.a.row(j).collect::<Vec<_>>(), at.row(j).collect::<Vec<_>>());
        }
    }

    #[test]
    fn pop_min_x_on_interval() {
        let r = solve_relaxation(&pop_x(), 2, &Settings::default()).unwrap();
        assert_eq!(r.solution.status, Status::Optimal);
        assert!((r.primal_objective + 1.0).abs() < 1e-6, "{}", r.primal_objective);
        // Multiplier of the mass row equals the optimal value.
        assert!((r.row_duals[&0] + 1.0).abs() < 1e-5);
    }
}
