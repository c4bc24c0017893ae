//! Convergence-rate constants for the moment hierarchy.
//!
//! Every bound here is conditional on the Positivstellensatz constant `γ`,
//! which has no closed form and must be supplied by the caller; with the
//! default `γ = 1` the outputs describe the shape of the bound only.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gmp::sample_ball;
use crate::poly::{MultiIndex, Polynomial};
use crate::tensor::{default_psi, Mode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Unit ball `1 − ‖x‖² ≥ 0`.
    Ball,
    /// Box with generators `ρ² − x_i²`.
    Box1,
    /// `[−1, 1]ⁿ` with all products of `1 − x_i²`.
    Box2,
    /// General set; `θ` from a Łojasiewicz exponent.
    Generic,
}

/// Constants `(γ, θ, ℓ₀)` of an effective Positivstellensatz: a polynomial
/// `p > 0` on `S` lies in the order-ℓ quadratic module once
/// `ℓ ≥ max(γ (p_max / p_min)^{1/θ}, ℓ₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsatzConstants {
    pub gamma: f64,
    pub theta: f64,
    pub ell0: f64,
    pub preset: Preset,
}

impl PsatzConstants {
    /// `θ = 2`, `ℓ₀ = 2 n deg^{3/2}`.
    pub fn ball(n: usize, deg: usize, gamma: f64) -> Self {
        PsatzConstants {
            gamma,
            theta: 2.0,
            ell0: 2.0 * n as f64 * (deg as f64).powf(1.5),
            preset: Preset::Ball,
        }
    }

    /// `θ = 1`, `ℓ₀ = π n √(2n) deg`.
    pub fn box1(n: usize, deg: usize, gamma: f64) -> Self {
        PsatzConstants {
            gamma,
            theta: 1.0,
            ell0: box_ell0(n, deg),
            preset: Preset::Box1,
        }
    }

    /// `θ = 2`, `ℓ₀ = π n √(2n) deg`.
    pub fn box2(n: usize, deg: usize, gamma: f64) -> Self {
        PsatzConstants {
            gamma,
            theta: 2.0,
            ell0: box_ell0(n, deg),
            preset: Preset::Box2,
        }
    }

    /// `θ = 1 / (2.5 n Ł)`, `ℓ₀ = 0`.
    pub fn generic(n: usize, lojasiewicz: f64, gamma: f64) -> Self {
        PsatzConstants {
            gamma,
            theta: 1.0 / (2.5 * n as f64 * lojasiewicz),
            ell0: 0.0,
            preset: Preset::Generic,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.theta > 0.0 && self.ell0 >= 0.0) {
            return domain("Positivstellensatz constants need γ > 0, θ > 0, ℓ₀ ≥ 0");
        }
        Ok(())
    }
}

fn box_ell0(n: usize, deg: usize) -> f64 {
    let n = n as f64;
    std::f64::consts::PI * n * (2.0 * n).sqrt() * deg as f64
}

/// Per-measure quantities entering the rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRate {
    /// `max_{S_i} f_i`.
    pub f_max: f64,
    /// `max_{j ∈ supp v*} max_{S_i} |h_{i,j}|`.
    pub h_max: f64,
    /// `min_{S_i} Σ_j w_j h_{i,j}`.
    pub hw_min: f64,
    pub psatz: PsatzConstants,
    /// Set constant `C_{S_i}` for Hausdorff-type rates.
    pub c_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    pub slots: Vec<SlotRate>,
    /// `⟨t, w⟩`.
    pub tw: f64,
    /// `‖v*‖₁`.
    pub v_star_l1: f64,
}

impl RateInputs {
    fn validate(&self) -> Result<()> {
        if self.slots.is_empty() {
            return domain("rate inputs need at least one slot");
        }
        if !(self.tw > 0.0) {
            return domain("⟨t, w⟩ must be positive");
        }
        if !(self.v_star_l1 >= 0.0) {
            return domain("‖v*‖₁ must be nonnegative");
        }
        for (i, s) in self.slots.iter().enumerate() {
            if !(s.hw_min > 0.0) {
                return domain(format!("slot {i}: (h·w)_min must be positive"));
            }
            s.psatz.validate()?;
        }
        Ok(())
    }

    fn kappa_with(&self, first: impl Fn(&SlotRate) -> f64) -> Result<(f64, f64)> {
        self.validate()?;
        let mut kappa = f64::NEG_INFINITY;
        let mut theta = f64::INFINITY;
        for s in &self.slots {
            let k = self.tw / s.hw_min
                * s.psatz.gamma.powf(s.psatz.theta)
                * (2.0 * first(s) + self.v_star_l1 * s.h_max);
            kappa = kappa.max(k);
            theta = theta.min(s.psatz.theta);
        }
        Ok((kappa, theta))
    }
}

/// `κ = max_i (t·w)/(h_i·w)_min · γ_i^{θ_i} · (2 f_{i,max} + ‖v*‖₁ h*_{i,max})`,
/// `θ = min_i θ_i`.
pub fn kappa_theta(inputs: &RateInputs) -> Result<(f64, f64)> {
    inputs.kappa_with(|s| s.f_max)
}

/// `κ ℓ^{−θ}`, the bound on `𝔭* − 𝔭*_ℓ`.
pub fn gap_bound(ell: f64, kappa: f64, theta: f64) -> Result<f64> {
    if !(ell > 0.0) {
        return domain("ℓ must be positive");
    }
    Ok(kappa * ell.powf(-theta))
}

/// Smallest ℓ for which the rate applies.
pub fn ell_threshold(ell0: &[f64], active_degrees: &[usize]) -> f64 {
    let a = ell0.iter().copied().fold(0.0, f64::max);
    let b = active_degrees.iter().copied().max().unwrap_or(0) as f64;
    a.max(b)
}

/// `C_S` for the unit ball.
pub fn c_s_ball() -> f64 {
    1.0
}

/// Same as [`kappa_theta`] with `f_{i,max}` replaced by `C_{S_i}`.
pub fn hausdorff_kappa(inputs: &RateInputs) -> Result<f64> {
    if inputs.slots.iter().any(|s| s.c_s.is_none()) {
        return domain("every slot needs C_S");
    }
    Ok(inputs.kappa_with(|s| s.c_s.expect("checked"))?.0)
}

/// Rate constant of the tensor pipelines on the ball (`θ = 2`):
/// `γ (2Ψ_max + ‖V*‖₁)` positive, `γ L (2Ψ_max + ‖V*‖₁ + u*)` signed.
pub fn tensor_rate(mode: Mode, gamma: f64, psi_max: f64, v1: f64, u: f64, tv_cap: f64) -> f64 {
    match mode {
        Mode::Positive => gamma * (2.0 * psi_max + v1),
        Mode::Signed => gamma * tv_cap * (2.0 * psi_max + v1 + u),
    }
}

/// Maximum of `default_psi(n, d′)` on the unit ball.
pub fn psi_max_ball(n: usize, halfdeg: usize) -> f64 {
    max_on_ball(&default_psi(n, halfdeg)).0
}

/// Maximum of `p` on the unit ball by a deterministic candidate set and
/// projected gradient ascent from the best candidates.
pub fn max_on_ball(p: &Polynomial) -> (f64, Vec<f64>) {
    let n = p.n();
    if n == 0 {
        return (p.eval(&[]), Vec::new());
    }
    let mut cands: Vec<Vec<f64>> = Vec::new();
    // Coordinate directions and the origin.
    cands.push(vec![0.0; n]);
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut e = vec![0.0; n];
            e[i] = s;
            cands.push(e);
        }
    }
    // Regular grid for small n, seeded samples otherwise.
    if n <= 3 {
        let k: usize = [0, 200, 40, 16][n];
        let step = 2.0 / k as f64;
        let total = (k + 1).pow(n as u32);
        for idx in 0..total {
            let mut x = Vec::with_capacity(n);
            let mut r = idx;
            for _ in 0..n {
                x.push(-1.0 + step * (r % (k + 1)) as f64);
                r /= k + 1;
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm <= 1.0 {
                cands.push(x);
            } else {
                // Radial projection keeps the sphere covered.
                cands.push(x.iter().map(|v| v / nrm).collect());
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            cands.push(sample_ball(&mut rng, n));
        }
    }
    let mut scored: Vec<(f64, Vec<f64>)> = cands.into_iter().map(|x| (p.eval(&x), x)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let grad: Vec<Polynomial> = (0..n).map(|i| derivative(p, i)).collect();
    let mut best = scored[0].clone();
    for (v0, x0) in scored.into_iter().take(8) {
        let (v, x) = ascend(p, &grad, x0, v0);
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

fn ascend(p: &Polynomial, grad: &[Polynomial], mut x: Vec<f64>, mut v: f64) -> (f64, Vec<f64>) {
    let mut step = 0.1;
    for _ in 0..500 {
        let g: Vec<f64> = grad.iter().map(|q| q.eval(&x)).collect();
        let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        if gn < 1e-14 {
            break;
        }
        let mut improved = false;
        while step > 1e-14 {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b / gn).collect();
            let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            if ny > 1.0 {
                y.iter_mut().for_each(|a| *a /= ny);
            }
            let vy = p.eval(&y);
            if vy > v {
                x = y;
                v = vy;
                improved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (v, x)
}

fn derivative(p: &Polynomial, i: usize) -> Polynomial {
    let mut out = Polynomial::zero(p.n());
    for (a, c) in p.terms() {
        let e = a.exponents();
        if e[i] > 0 {
            let mut f = e.to_vec();
            f[i] -= 1;
            out.add_term(MultiIndex::new(f), c * e[i] as f64);
        }
    }
    out
}
