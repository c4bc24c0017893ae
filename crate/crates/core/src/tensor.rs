//! Real symmetric tensor decomposition through moment relaxations.
//!
//! A homogeneous `F` of degree `d` in `n+1` variables is dehomogenized and
//! rescaled, then written as `Σ ω_i (1 + ⟨ξ_i, x⟩)^d` by finding a measure
//! on the unit ball whose moments up to degree `d` match the apolar data of
//! `F`, minimizing a trace surrogate of the rank.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conic::{Residuals, Settings, Status};
use crate::error::{domain, Result};
use crate::extract::{extract_atoms_with, reconstruct_polynomial, Atom, AtomSet, ExtractOptions, Extraction};
use crate::gmp::{self, ConstraintRow, GmpInstance, MeasureSlot, RowKind};
use crate::moment::{catalecticant, kernel_basis, DEFAULT_RANK_TOL};
use crate::poly::{
    apolar_norm, dehomogenize_rescale, monomials_upto, multinomial, rescale_point, MultiIndex, Polynomial,
    PseudoMoments,
};

/// Extraction residual above which a result is flagged as not certified.
pub const CERTIFY_TOL: f64 = 1e-3;

/// Solver tolerance for decompositions; atoms inherit the residual through
/// the extraction conditioning, so this sits below the generic default.
pub const DEFAULT_SOLVER_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Nonnegative weights, one measure.
    Positive,
    /// Real weights, as a difference of two measures.
    Signed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionConfig {
    /// Relaxation order ℓ.
    pub ell: usize,
    /// Half-degree `d′` of the objective `Ψ`.
    pub psi_halfdeg: usize,
    /// Points are divided by this factor before solving.
    pub scale: f64,
    /// Total-variation cap `L` (signed mode); `None` picks a default.
    pub tv_cap: Option<f64>,
    pub use_kernel: bool,
    pub rank_tol: f64,
    pub merge_tol: f64,
    pub seed: u64,
    pub solver: Settings,
}

impl DecompositionConfig {
    /// Defaults for degree-`d` input: `ℓ = max(12, 2(⌊d/2⌋ + 3))`, `d′ = ℓ/2`.
    pub fn for_degree(d: usize) -> Self {
        let ell = (2 * (d / 2 + 3)).max(12);
        DecompositionConfig {
            ell,
            psi_halfdeg: ell / 2,
            scale: 1.0,
            tv_cap: None,
            use_kernel: false,
            rank_tol: DEFAULT_RANK_TOL,
            merge_tol: crate::extract::DEFAULT_MERGE_TOL,
            seed: 0,
            solver: Settings {
                eps: DEFAULT_SOLVER_EPS,
                ..Settings::default()
            },
        }
    }

    pub fn validate(&self, d: usize, mode: Mode) -> Result<()> {
        if 2 * self.psi_halfdeg <= d {
            return domain(format!("need 2d' > d, got d' = {} and d = {d}", self.psi_halfdeg));
        }
        if self.ell < 2 * self.psi_halfdeg {
            return domain(format!("need ℓ ≥ 2d', got ℓ = {} and d' = {}", self.ell, self.psi_halfdeg));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return domain("scale must be positive");
        }
        if mode == Mode::Signed {
            if let Some(l) = self.tv_cap {
                if !(l > 0.0 && l.is_finite()) {
                    return domain("total-variation cap must be positive");
                }
            }
        }
        if !(self.rank_tol > 0.0) || !(self.merge_tol >= 0.0) {
            return domain("tolerances must be positive");
        }
        Ok(())
    }
}

/// `Ψ = Σ_{|α| ≤ d′} x^{2α}`, whose pairing with `λ` is the trace of the
/// moment matrix of half-degree `d′`.
pub fn default_psi(n: usize, halfdeg: usize) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for a in monomials_upto(n, halfdeg) {
        p.add_term(a.add(&a), 1.0);
    }
    p
}

/// `binom(d, α)⁻¹ F_α` for every `|α| ≤ d`.
fn apolar_moments(f: &Polynomial, d: usize) -> Result<Vec<(MultiIndex, f64)>> {
    if f.degree() > d {
        return domain(format!("polynomial degree {} exceeds d = {d}", f.degree()));
    }
    monomials_upto(f.n(), d)
        .into_iter()
        .map(|a| {
            let v = f.coef(&a) / multinomial(d, &a)?;
            Ok((a, v))
        })
        .collect()
}

/// One measure on the unit ball with `⟨λ, x^α⟩ = binom(d,α)⁻¹ F_α`,
/// objective `Ψ`, witness on the mass row.
pub fn build_positive_gmp(f: &Polynomial, d: usize, cfg: &DecompositionConfig) -> Result<GmpInstance> {
    let n = f.n();
    let rows = apolar_moments(f, d)?
        .into_iter()
        .map(|(a, t)| ConstraintRow {
            h: vec![Polynomial::monomial(a, 1.0)],
            t,
            kind: RowKind::Eq,
        })
        .collect();
    Ok(GmpInstance {
        slots: vec![MeasureSlot::unit_ball(n)],
        objective: vec![default_psi(n, cfg.psi_halfdeg)],
        rows,
        witness: Some(BTreeMap::from([(0, 1.0)])),
    })
}

/// Default total-variation cap `10 (‖F‖_d + 1)`.
pub fn default_tv_cap(f: &Polynomial, d: usize) -> Result<f64> {
    Ok(10.0 * (apolar_norm(f, d)? + 1.0))
}

/// Two measures `λ₊, λ₋` on the unit ball with
/// `⟨λ₊ − λ₋, x^α⟩ = binom(d,α)⁻¹ F_α`, `⟨λ₊ + λ₋, 1⟩ ≤ L`, and, for each
/// kernel polynomial `q`, `⟨λ±, q x^β⟩ = 0` for `deg(q x^β) ≤ ℓ`.
pub fn build_signed_gmp(
    f: &Polynomial,
    d: usize,
    cfg: &DecompositionConfig,
    kernel: Option<&[Polynomial]>,
) -> Result<GmpInstance> {
    let n = f.n();
    let cap = match cfg.tv_cap {
        Some(l) => l,
        None => default_tv_cap(f, d)?,
    };
    if !(cap > 0.0) {
        return domain("total-variation cap must be positive");
    }
    let mut rows: Vec<ConstraintRow> = apolar_moments(f, d)?
        .into_iter()
        .map(|(a, t)| ConstraintRow {
            h: vec![Polynomial::monomial(a.clone(), 1.0), Polynomial::monomial(a, -1.0)],
            t,
            kind: RowKind::Eq,
        })
        .collect();
    let tv_row = rows.len();
    rows.push(ConstraintRow {
        h: vec![Polynomial::constant(n, 1.0), Polynomial::constant(n, 1.0)],
        t: cap,
        kind: RowKind::Le,
    });
    for q in kernel.unwrap_or(&[]) {
        if q.n() != n {
            return domain("kernel polynomial has wrong variable count");
        }
        if q.is_zero() || q.degree() > cfg.ell {
            continue;
        }
        for beta in monomials_upto(n, cfg.ell - q.degree()) {
            let qb = q.shift(&beta);
            for slot in 0..2 {
                let mut h = vec![Polynomial::zero(n), Polynomial::zero(n)];
                h[slot] = qb.clone();
                rows.push(ConstraintRow {
                    h,
                    t: 0.0,
                    kind: RowKind::Eq,
                });
            }
        }
    }
    let psi = default_psi(n, cfg.psi_halfdeg);
    Ok(GmpInstance {
        slots: vec![MeasureSlot::unit_ball(n), MeasureSlot::unit_ball(n)],
        objective: vec![psi.clone(), psi],
        rows,
        witness: Some(BTreeMap::from([(tv_row, 1.0)])),
    })
}

/// `‖F − Σ ω_i (1 + ⟨ξ_i, x⟩)^d‖_d` in the apolar norm.
pub fn reconstruction_error(f: &Polynomial, a: &AtomSet, d: usize) -> Result<f64> {
    apolar_norm(&(f - &reconstruct_polynomial(a, f.n(), d)), d)
}

/// Smallest power of two at least twice a coarse radius estimate of the
/// decomposition points, from ratios of apolar coefficients.
pub fn suggest_scale(f_hom: &Polynomial, d: usize) -> Result<f64> {
    let f = dehomogenize_rescale(f_hom, 1.0)?;
    let moments = apolar_moments(&f, d)?;
    let m0 = moments[0].1.abs();
    if m0 == 0.0 {
        return domain("constant coefficient is zero; no scale estimate");
    }
    let mut radius = 0.0f64;
    for (a, v) in &moments[1..] {
        let k = a.degree() as f64;
        radius = radius.max((v.abs() / m0).powf(1.0 / k));
    }
    let radius = radius * (f.n().max(1) as f64).sqrt();
    if radius <= 0.5 {
        return Ok(1.0);
    }
    Ok(2f64.powi((2.0 * radius).log2().ceil() as i32))
}

/// Per-slot extraction diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlotReport {
    pub mass: f64,
    pub ranks: Vec<usize>,
    pub degree: Option<usize>,
    pub rank: usize,
    pub residual: f64,
    pub condition: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mode: Mode,
    pub ell: usize,
    pub scale: f64,
    pub tv_cap: Option<f64>,
    pub kernel_size: usize,
    pub status: Status,
    pub iterations: usize,
    pub residuals: Residuals,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub slots: Vec<SlotReport>,
    /// Largest slot extraction residual, in rescaled coordinates.
    pub extraction_residual: f64,
    /// `‖F − reconstruction‖_d` in original coordinates.
    pub reconstruction_error: f64,
    /// The same, divided by `‖F‖_d`.
    pub relative_reconstruction_error: f64,
    pub mass_bound: Option<f64>,
    pub certified: bool,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    /// Atoms in original coordinates.
    pub atoms: AtomSet,
    pub diagnostics: Diagnostics,
    /// Solved pseudo-moments per slot, in rescaled coordinates.
    #[serde(skip)]
    pub moments: Vec<PseudoMoments>,
}

/// Decomposes a homogeneous `F` of degree `d` in `n+1` variables into
/// `Σ ω_i (x₀ + ⟨ξ_i, x⟩)^d`.
///
/// Results whose extraction residual exceeds [`CERTIFY_TOL`] or whose solve
/// did not converge are returned with `certified = false`.
pub fn decompose(f_hom: &Polynomial, d: usize, mode: Mode, cfg: &DecompositionConfig) -> Result<Decomposition> {
    cfg.validate(d, mode)?;
    if !f_hom.is_zero() && f_hom.homogeneous_degree() != Some(d) {
        return domain(format!("input is not homogeneous of degree {d}"));
    }
    let f = dehomogenize_rescale(f_hom, cfg.scale)?;
    let mut warnings = Vec::new();

    let (instance, kernel_size, tv_cap) = match mode {
        Mode::Positive => (build_positive_gmp(&f, d, cfg)?, 0, None),
        Mode::Signed => {
            let kernel = if cfg.use_kernel {
                let h = catalecticant(&f, d / 2, d - d / 2, d)?;
                kernel_basis(&h, cfg.rank_tol)
            } else {
                Vec::new()
            };
            let cap = match cfg.tv_cap {
                Some(l) => l,
                None => {
                    let l = default_tv_cap(&f, d)?;
                    warnings.push(format!("total-variation cap defaulted to {l:.6e}"));
                    l
                }
            };
            let cfg2 = DecompositionConfig {
                tv_cap: Some(cap),
                ..cfg.clone()
            };
            (build_signed_gmp(&f, d, &cfg2, Some(&kernel))?, kernel.len(), Some(cap))
        }
    };
    let mass_bound = gmp::mass_bound(&instance).ok();
    let relax = gmp::solve_relaxation(&instance, cfg.ell, &cfg.solver)?;
    warnings.extend(relax.warnings.iter().cloned());

    let total_mass: f64 = relax.moments.iter().map(|m| m.mass().abs()).sum();
    let mut atoms = Vec::new();
    let mut slots = Vec::new();
    let mut extraction_residual = 0.0f64;
    let opts = ExtractOptions {
        rank_tol: cfg.rank_tol,
        merge_tol: cfg.merge_tol,
        seed: cfg.seed,
        signed: false,
    };
    for (i, lam) in relax.moments.iter().enumerate() {
        let sign = if i == 0 { 1.0 } else { -1.0 };
        let mass = lam.mass();
        if mass.abs() <= 1e-7 * total_mass.max(1e-300) || total_mass == 0.0 {
            slots.push(SlotReport {
                mass,
                ranks: Vec::new(),
                degree: None,
                rank: 0,
                residual: lam.values().iter().fold(0.0f64, |m, v| m.max(v.abs())),
                condition: None,
            });
            continue;
        }
        let ex: Extraction = extract_atoms_with(lam, &opts)?;
        extraction_residual = extraction_residual.max(ex.residual);
        for a in &ex.atoms.atoms {
            atoms.push(Atom {
                weight: sign * a.weight,
                point: rescale_point(&a.point, cfg.scale),
            });
        }
        slots.push(SlotReport {
            mass,
            ranks: ex.ranks,
            degree: Some(ex.degree),
            rank: ex.rank,
            residual: ex.residual,
            condition: Some(ex.condition),
        });
    }
    let mut atom_set = AtomSet {
        atoms,
        signed: mode == Mode::Signed,
        residual: Some(extraction_residual),
    };
    atom_set.sort();

    let f_orig = dehomogenize_rescale(f_hom, 1.0)?;
    let recon = reconstruction_error(&f_orig, &atom_set, d)?;
    let fnorm = apolar_norm(&f_orig, d)?;
    let mut certified = extraction_residual <= CERTIFY_TOL;
    if relax.solution.status != Status::Optimal {
        certified = false;
        warnings.push(format!("solver stopped with status {:?}", relax.solution.status));
    }
    if let Some(mb) = mass_bound {
        if relax.moments.iter().map(|m| m.mass()).sum::<f64>() > mb + 1e-6 * (1.0 + mb) {
            warnings.push("solved mass exceeds the witness bound".into());
        }
    }
    Ok(Decomposition {
        atoms: atom_set,
        diagnostics: Diagnostics {
            mode,
            ell: cfg.ell,
            scale: cfg.scale,
            tv_cap,
            kernel_size,
            status: relax.solution.status,
            iterations: relax.solution.iterations,
            residuals: relax.solution.residuals,
            primal_objective: relax.primal_objective,
            dual_objective: relax.dual_objective,
            slots,
            extraction_residual,
            reconstruction_error: recon,
            relative_reconstruction_error: if fnorm > 0.0 { recon / fnorm } else { recon },
            mass_bound,
            certified,
            warnings,
        },
        moments: relax.moments,
    })
}
