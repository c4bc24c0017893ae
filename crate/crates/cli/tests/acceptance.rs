//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use momentgmp::conic::{self, psd_project, smat, svec, Cone, ConicProblem, CsrMatrix, Settings, Status};
use momentgmp::experiments::{gap_sweep, hausdorff_sweep, optimizer_convergence, reference_optimum};
use momentgmp::extract::{Atom, AtomSet};
use momentgmp::gmp::{pop_instance, GmpInstance, MeasureSlot};
use momentgmp::poly::{
    a_norm, apolar_product, homogenize, monomials_upto, power_of_affine, weighted_functional_norm, MultiIndex,
    Polynomial, PseudoMoments,
};
use momentgmp::rates::{self, PsatzConstants, RateInputs, SlotRate};
use momentgmp::tensor::{self, DecompositionConfig, Mode};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run_decompose(args: &[&str], input: &str) -> Result<(AtomSet, serde_json::Value, i32), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_momentgmp"))
        .arg("decompose")
        .args(args)
        .arg(data(input))
        .arg("--out")
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    let code = out.status.code().unwrap_or(-1);
    if code == 1 {
        return Err(format!("exit 1: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let atoms: AtomSet = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("atoms.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let diag: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("diagnostics.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    Ok((atoms, diag, code))
}

/// Smallest maximum deviation over all bijections, by enumeration.
fn best_matching(found: &[(f64, Vec<f64>)], expected: &[(f64, Vec<f64>)]) -> Option<(f64, f64)> {
    if found.len() != expected.len() {
        return None;
    }
    let n = found.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, f64)> = None;
    permute(&mut perm, 0, &mut |p| {
        let mut pe = 0.0f64;
        let mut we = 0.0f64;
        for (i, &j) in p.iter().enumerate() {
            we = we.max((found[i].0 - expected[j].0).abs());
            for (a, b) in found[i].1.iter().zip(&expected[j].1) {
                pe = pe.max((a - b).abs());
            }
        }
        if best.is_none_or(|(bp, bw)| pe.max(we) < bp.max(bw)) {
            best = Some((pe, we));
        }
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

const TERNARY_WEIGHTS: [f64; 4] = [5.0000009, 3.0000000, 15.0000046, 14.9999945];
const TERNARY_POINTS: [[f64; 2]; 4] = [[-0.6, -0.15], [0.6, -0.65], [-0.1, 0.15], [0.1, 0.15]];

fn criterion_positive_ternary() -> Outcome {
    let (atoms, _, code) = run_decompose(&["--mode", "positive", "--scale", "20", "--order", "12"], "example1.json")?;
    check(code == 0, format!("exit code {code}"))?;
    check(atoms.len() == 4, format!("{} atoms", atoms.len()))?;
    let found: Vec<(f64, Vec<f64>)> = atoms
        .atoms
        .iter()
        .map(|a| (a.weight, a.point.iter().map(|x| x / 20.0).collect()))
        .collect();
    let expected: Vec<(f64, Vec<f64>)> = TERNARY_WEIGHTS
        .iter()
        .zip(TERNARY_POINTS)
        .map(|(&w, p)| (w, p.to_vec()))
        .collect();
    let (pe, we) = best_matching(&found, &expected).ok_or("matching failed")?;
    check(we <= 1e-3 && pe <= 1e-3, format!("weight error {we:.2e}, point error {pe:.2e}"))?;
    Ok(format!("4 atoms, weight error {we:.2e}, scaled point error {pe:.2e}"))
}

const CATALECTICANT_22: [[f64; 10]; 10] = [
    [0.614154, 0.313336, 0.0296172, -0.53019, -0.374207, -0.115331, 0.235433, 0.122256, -0.00132947, -0.0602276],
    [0.313336, -0.374207, -0.115331, 0.122256, 0.215369, 0.209846, 0.00933201, -0.266536, -0.0950086, 0.153598],
    [0.0296172, -0.115331, 0.235433, -0.00132947, 0.209846, 0.00933201, -0.320604, -0.0950086, 0.125904, 0.0318254],
    [-0.53019, 0.122256, -0.00132947, -0.0602276, -0.266536, -0.0950086, 0.125904, 0.153598, 0.0318254, -0.167819],
    [-0.374207, 0.215369, 0.209846, -0.266536, -0.248998, -0.142862, -0.0841718, 0.157252, 0.132199, -0.166831],
    [-0.115331, 0.209846, 0.00933201, -0.0950086, -0.142862, -0.0841718, 0.0517165, 0.132199, 0.00758549, -0.0610914],
    [0.235433, 0.00933201, -0.320604, 0.125904, -0.0841718, 0.0517165, 0.358487, 0.00758549, -0.19988, 0.0815878],
    [0.122256, -0.266536, -0.0950086, 0.153598, 0.157252, 0.132199, 0.00758549, -0.166831, -0.0610914, 0.0913743],
    [-0.00132947, -0.0950086, 0.125904, 0.0318254, 0.132199, 0.00758549, -0.19988, -0.0610914, 0.0815878, 0.0104525],
    [-0.0602276, 0.153598, 0.0318254, -0.167819, -0.166831, -0.0610914, 0.0815878, 0.0913743, 0.0104525, -0.0649653],
];

fn criterion_signed_quaternary() -> Outcome {
    let h = DMatrix::from_fn(10, 10, |i, j| CATALECTICANT_22[i][j]);
    let sv = h.singular_values();
    let rank = sv.iter().filter(|&&s| s > 1e-6).count();
    check(rank == 7, format!("catalecticant rank {rank}, singular values {sv:?}"))?;
    let (atoms, diag, code) = run_decompose(
        &["--mode", "signed", "--scale", "2", "--order", "12", "--use-kernel", "--L", "10"],
        "example2.json",
    )?;
    check(code == 0, format!("exit code {code}"))?;
    check(atoms.len() == 7, format!("{} atoms", atoms.len()))?;
    let err = diag["reconstruction_error"].as_f64().ok_or("no reconstruction error")?;
    check(err <= 1e-5, format!("reconstruction error {err:.3e}"))?;
    Ok(format!("catalecticant rank 7, 7 atoms, apolar reconstruction error {err:.3e}"))
}

fn random_psatz(rng: &mut ChaCha8Rng) -> PsatzConstants {
    let n = rng.random_range(1..=4);
    let deg = rng.random_range(1..=8);
    let gamma = rng.random_range(0.1..5.0);
    match rng.random_range(0..4) {
        0 => PsatzConstants::ball(n, deg, gamma),
        1 => PsatzConstants::box1(n, deg, gamma),
        2 => PsatzConstants::box2(n, deg, gamma),
        _ => PsatzConstants::generic(n, rng.random_range(0.5..4.0), gamma),
    }
}

fn criterion_rates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let slots: Vec<SlotRate> = (0..rng.random_range(1..=3))
            .map(|_| SlotRate {
                f_max: rng.random_range(-2.0..5.0),
                h_max: rng.random_range(0.0..3.0),
                hw_min: rng.random_range(0.1..2.0),
                psatz: random_psatz(&mut rng),
                c_s: Some(rng.random_range(0.5..2.0)),
            })
            .collect();
        let inputs = RateInputs {
            slots,
            tw: rng.random_range(0.1..4.0),
            v_star_l1: rng.random_range(0.0..3.0),
        };
        let mut kappa = f64::NEG_INFINITY;
        let mut kappa_h = f64::NEG_INFINITY;
        let mut theta = f64::INFINITY;
        for s in &inputs.slots {
            let g = s.psatz.gamma.powf(s.psatz.theta) * inputs.tw / s.hw_min;
            kappa = kappa.max(g * (2.0 * s.f_max + inputs.v_star_l1 * s.h_max));
            kappa_h = kappa_h.max(g * (2.0 * s.c_s.unwrap() + inputs.v_star_l1 * s.h_max));
            theta = theta.min(s.psatz.theta);
        }
        let (k, t) = rates::kappa_theta(&inputs).map_err(|e| e.to_string())?;
        let kh = rates::hausdorff_kappa(&inputs).map_err(|e| e.to_string())?;
        let ell = rng.random_range(1.0..200.0);
        let bound = rates::gap_bound(ell, k, t).map_err(|e| e.to_string())?;
        let e = rel(k, kappa).max(rel(kh, kappa_h)).max(rel(t, theta)).max(rel(bound, kappa * ell.powf(-theta)));
        worst = worst.max(e);
        check(e <= 1e-12, format!("formula mismatch {e:.3e}"))?;
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let b = rates::gap_bound(i as f64, k.abs() + 1.0, t).map_err(|e| e.to_string())?;
            check(b < prev, format!("gap bound not decreasing at ℓ = {i}"))?;
            prev = b;
        }
    }
    for n in 1..=5usize {
        for d in 1..=8usize {
            let got = PsatzConstants::ball(n, d, 1.0).ell0;
            check(got == 2.0 * n as f64 * (d as f64).powf(1.5), format!("ball ℓ₀ mismatch at n = {n}, d = {d}"))?;
        }
    }
    Ok(format!("20 random inputs, worst relative deviation {worst:.1e}; monotone; ball threshold exact"))
}

fn random_cubic(n: usize, rng: &mut ChaCha8Rng) -> Polynomial {
    let terms: Vec<_> = monomials_upto(n, 3).into_iter().map(|a| (a, rng.sample::<f64, _>(StandardNormal))).collect();
    Polynomial::from_terms(n, terms).unwrap()
}

fn grid_atoms(n: usize, r: usize, grid: usize, rng: &mut ChaCha8Rng) -> AtomSet {
    let h = (grid - 1) as f64;
    let mut atoms: Vec<Atom> = Vec::new();
    while atoms.len() < r {
        let p: Vec<f64> = (0..n)
            .map(|_| (2.0 * rng.random_range(0..grid) as f64 - h) / h)
            .collect();
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sep = atoms.iter().all(|a| dist(&a.point, &p) >= 0.3);
        if norm <= 0.8 && sep {
            atoms.push(Atom { weight: rng.random_range(0.5..2.0), point: p });
        }
    }
    AtomSet::new(atoms, false).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `Σ ω (1 + ⟨ξ, x⟩)^d` from the binomial expansion.
fn affine_power_sum(a: &AtomSet, n: usize, d: usize) -> Polynomial {
    let mut f = Polynomial::zero(n);
    for atom in &a.atoms {
        for alpha in monomials_upto(n, d) {
            let e = alpha.exponents();
            let rest = d - alpha.degree();
            let mut c = factorial(d) / factorial(rest);
            for (i, &k) in e.iter().enumerate() {
                c *= atom.point[i].powi(k as i32) / factorial(k as usize);
            }
            f.add_term(alpha.clone(), atom.weight * c);
        }
    }
    f
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn criterion_hierarchy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let settings = Settings::default();
    let mut cases: Vec<(String, GmpInstance, Vec<usize>, usize)> = Vec::new();
    for (i, n) in [1, 1, 2, 2, 2].into_iter().enumerate() {
        let f = random_cubic(n, &mut rng);
        cases.push((format!("cubic{i}"), pop_instance(MeasureSlot::unit_ball(n), f), vec![4, 6, 8], if n == 1 { 2001 } else { 201 }));
    }
    for (i, n) in [1, 1, 2, 2, 2].into_iter().enumerate() {
        let grid = if n == 1 { 2001 } else { 201 };
        let r = rng.random_range(1..=n + 1);
        let atoms = grid_atoms(n, r, grid, &mut rng);
        let f = affine_power_sum(&atoms, n, 4);
        let mut cfg = DecompositionConfig::for_degree(4);
        cfg.psi_halfdeg = 3;
        let inst = tensor::build_positive_gmp(&f, 4, &cfg).map_err(|e| e.to_string())?;
        cases.push((format!("tensor{i}"), inst, vec![6, 8, 10], grid));
    }
    let mut worst_gap = f64::INFINITY;
    for (name, inst, ells, grid) in &cases {
        let reference = reference_optimum(inst, *grid).map_err(|e| format!("{name}: {e}"))?;
        let res = gap_sweep(inst, ells, Some(reference), &settings).map_err(|e| format!("{name}: {e}"))?;
        let mut prev: Option<f64> = None;
        for row in &res.rows {
            let p = row.primal.ok_or_else(|| format!("{name} ℓ={}: {:?}", row.ell, row.error))?;
            let d = row.dual.unwrap();
            check(d <= p + 1e-6, format!("{name} ℓ={}: dual {d} above primal {p}", row.ell))?;
            if let Some(q) = prev {
                check(p >= q - 2e-6, format!("{name} ℓ={}: primal decreased {q} → {p}", row.ell))?;
            }
            prev = Some(p);
            let gap = reference - p;
            check(gap >= -1e-6, format!("{name} ℓ={}: gap {gap:.3e}", row.ell))?;
            worst_gap = worst_gap.min(gap);
        }
    }
    Ok(format!("10 instances, smallest gap {worst_gap:.2e}"))
}

fn random_round_trip_set(rng: &mut ChaCha8Rng) -> (AtomSet, usize, usize) {
    let n = rng.random_range(1..=3);
    let d = if rng.random_bool(0.5) { 4 } else { 6 };
    let cap = if d == 4 { n + 1 } else { 5.min((n + 1) * (n + 2) / 2) };
    let r = rng.random_range(1..=cap);
    let mut atoms: Vec<Atom> = Vec::new();
    while atoms.len() < r {
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-0.9..0.9)).collect();
        if p.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.9 && atoms.iter().all(|a| dist(&a.point, &p) >= 0.2) {
            atoms.push(Atom { weight: rng.random_range(0.5..2.0), point: p });
        }
    }
    (AtomSet::new(atoms, false).unwrap(), n, d)
}

fn criterion_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut successes = 0;
    let mut failures = Vec::new();
    for case in 0..50 {
        let (truth, n, d) = random_round_trip_set(&mut rng);
        let f_hom = homogenize(&affine_power_sum(&truth, n, d), d).map_err(|e| e.to_string())?;
        let expected: Vec<(f64, Vec<f64>)> = truth.atoms.iter().map(|a| (a.weight, a.point.clone())).collect();
        let mut ok = false;
        for retry in 0..3 {
            let mut cfg = DecompositionConfig::for_degree(d);
            cfg.ell = d + 2 + 2 * retry;
            cfg.psi_halfdeg = cfg.ell / 2;
            let Ok(dec) = tensor::decompose(&f_hom, d, Mode::Positive, &cfg) else {
                continue;
            };
            if !dec.diagnostics.certified {
                continue;
            }
            let found: Vec<(f64, Vec<f64>)> = dec.atoms.atoms.iter().map(|a| (a.weight, a.point.clone())).collect();
            ok = matches!(best_matching(&found, &expected), Some((pe, we)) if pe <= 1e-4 && we <= 1e-3);
            break;
        }
        if ok {
            successes += 1;
        } else {
            failures.push(format!("#{case} (n={n}, d={d}, r={})", truth.len()));
        }
    }
    check(successes >= 48, format!("{successes}/50 recovered; failed {failures:?}"))?;
    Ok(format!("{successes}/50 recovered"))
}

fn criterion_apolar() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let d = rng.random_range(0..=6);
        let xi: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let g_terms: Vec<(MultiIndex, f64)> = monomials_upto(n, d)
            .into_iter()
            .map(|a| (a, rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let g = Polynomial::from_terms(n, g_terms.clone()).unwrap();
        let lhs = apolar_product(&power_of_affine(&xi, d), &g, d).map_err(|e| e.to_string())?;
        let mut rhs = 0.0;
        let mut mag = 0.0;
        for (a, c) in &g_terms {
            let m: f64 = a.exponents().iter().zip(&xi).map(|(&k, x)| x.powi(k as i32)).product();
            rhs += c * m;
            mag += (c * m).abs();
        }
        let e = (lhs - rhs).abs() / mag.max(1.0);
        worst = worst.max(e);
        check(e <= 1e-12, format!("apolar identity off by {e:.3e}"))?;
    }
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let k = rng.random_range(0..=5);
        let f = Polynomial::from_terms(
            n,
            monomials_upto(n, k).into_iter().map(|a| (a, rng.sample::<f64, _>(StandardNormal))),
        )
        .unwrap();
        let lam = PseudoMoments::from_fn(n, k, |_| rng.sample::<f64, _>(StandardNormal) * 10.0);
        let pairing = lam.pair(&f).map_err(|e| e.to_string())?;
        let bound = a_norm(&f) * weighted_functional_norm(&lam);
        check(pairing.abs() <= bound * (1.0 + 1e-12), format!("pairing {pairing} exceeds bound {bound}"))?;
    }
    Ok(format!("200 identities (worst {worst:.1e}), 200 pairing bounds"))
}

fn criterion_hausdorff() -> Outcome {
    let family = pop_instance(MeasureSlot::unit_ball(1), Polynomial::zero(1));
    let ells = [2, 4, 6, 8];
    let res = hausdorff_sweep(&family, 2, &ells, 50, 2001, 7, &Settings::default()).map_err(|e| e.to_string())?;
    let est: Vec<f64> = res.rows.iter().map(|r| r.estimate).collect();
    for w in est.windows(2) {
        check(w[1] <= w[0] + 2e-6, format!("estimate increased: {est:?}"))?;
    }
    check(est.iter().all(|&e| e >= 0.0), "negative estimate")?;
    check(est[3] <= 1e-4, format!("estimate at ℓ = 8 is {:.3e}", est[3]))?;
    let envelope: Vec<f64> = ells.iter().map(|&l| rates::gap_bound(l as f64, 1.0, 2.0).unwrap()).collect();
    check(envelope.windows(2).all(|w| w[1] < w[0]), "envelope not decreasing")?;
    Ok(format!("estimates {}", sci(&est)))
}

fn criterion_convergence() -> Outcome {
    let n = 2;
    let xi = [0.3, -0.4];
    let w = 2.0;
    let atoms = AtomSet::new(vec![Atom { weight: w, point: xi.to_vec() }], false).unwrap();
    let f = affine_power_sum(&atoms, n, 4);
    let mut cfg = DecompositionConfig::for_degree(4);
    cfg.psi_halfdeg = 3;
    let inst = tensor::build_positive_gmp(&f, 4, &cfg).map_err(|e| e.to_string())?;
    let k = 4;
    let truth = PseudoMoments::from_fn(n, k, |a| {
        w * a.exponents().iter().zip(&xi).map(|(&e, x)| x.powi(e as i32)).product::<f64>()
    });
    let settings = Settings { eps: 1e-10, ..Settings::default() };
    let rows = optimizer_convergence(&inst, &[6, 8, 10, 12], k, Some(&[truth]), &settings).map_err(|e| e.to_string())?;
    let dist: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let to_truth: Vec<f64> = rows.iter().map(|r| r.reference_distance.unwrap()).collect();
    for v in [&dist, &to_truth] {
        for win in v.windows(2) {
            check(win[1] <= win[0] + 3e-6, format!("distances increased: {v:?}"))?;
        }
    }
    let top = *to_truth.last().unwrap();
    check(*dist.last().unwrap() <= 1e-6 && top <= 1e-6, format!("top distance to the atom {top:.3e}"))?;
    Ok(format!("distance to last {}, to the atom {}", sci(&dist), sci(&to_truth)))
}

fn random_orthogonal(s: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(s, s, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

fn random_symmetric(s: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(s, s, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) * 0.5
}

/// SDP `min ⟨C, X⟩ s.t. ⟨A_i, X⟩ = b_i, X ⪰ 0` with optimum built from a
/// strictly complementary pair `(X*, Z*)`.
fn planted_sdp(rng: &mut ChaCha8Rng) -> (ConicProblem, f64) {
    let s = rng.random_range(2..=6);
    let r = rng.random_range(1..s);
    let m = r * (r + 1) / 2 + r * (s - r);
    let q = random_orthogonal(s, rng);
    let mut lx = DMatrix::zeros(s, s);
    let mut lz = DMatrix::zeros(s, s);
    for i in 0..s {
        if i < r {
            lx[(i, i)] = rng.random_range(0.5..2.0);
        } else {
            lz[(i, i)] = rng.random_range(0.5..2.0);
        }
    }
    let x_star = &q * lx * q.transpose();
    let z_star = &q * lz * q.transpose();
    let a: Vec<DMatrix<f64>> = (0..m).map(|_| random_symmetric(s, rng)).collect();
    let y: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let mut c = z_star;
    for (ai, yi) in a.iter().zip(&y) {
        c += ai * *yi;
    }
    let b: Vec<f64> = a.iter().map(|ai| ai.component_mul(&x_star).sum()).collect();
    let opt = c.component_mul(&x_star).sum();
    let nv = s * (s + 1) / 2;
    let mut rows: Vec<Vec<(usize, f64)>> = a
        .iter()
        .map(|ai| svec(ai).into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect())
        .collect();
    rows.extend((0..nv).map(|j| vec![(j, -1.0)]));
    let mut rhs = b;
    rhs.extend(std::iter::repeat_n(0.0, nv));
    let p = ConicProblem::new(svec(&c), CsrMatrix::from_rows(nv, rows), rhs, vec![Cone::Zero(m), Cone::Psd(s)]).unwrap();
    (p, opt)
}

fn criterion_conic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let (p, opt) = planted_sdp(&mut rng);
        let sol = conic::solve(&p, &Settings::default()).map_err(|e| e.to_string())?;
        check(sol.status == Status::Optimal, format!("SDP #{case}: status {:?}", sol.status))?;
        let e = (sol.primal_objective - opt).abs() / opt.abs().max(1.0);
        worst = worst.max(e);
        check(e <= 1e-6, format!("SDP #{case}: relative objective error {e:.3e}"))?;
    }
    let mut worst_idem = 0.0f64;
    for _ in 0..100 {
        let s = rng.random_range(1..=8);
        let v = svec(&(random_symmetric(s, &mut rng) * 3.0));
        let p1 = psd_project(&v).unwrap();
        let p2 = psd_project(&p1).unwrap();
        let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let e = p1.iter().zip(&p2).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        worst_idem = worst_idem.max(e);
        check(e <= 1e-12, format!("projection not idempotent: {e:.3e}"))?;
        let min_eig = smat(&p1, s).symmetric_eigenvalues().min();
        check(min_eig >= -1e-12 * scale, format!("projection not PSD: {min_eig:.3e}"))?;
    }
    Ok(format!("100 SDPs (worst relative error {worst:.1e}), projection idempotence {worst_idem:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("positive ternary quartic decomposition", criterion_positive_ternary),
        ("signed quaternary quartic decomposition", criterion_signed_quaternary),
        ("rate formulas", criterion_rates),
        ("hierarchy laws", criterion_hierarchy),
        ("round-trip decomposition", criterion_round_trip),
        ("apolar identity and pairing bound", criterion_apolar),
        ("Hausdorff trend", criterion_hausdorff),
        ("optimizer convergence", criterion_convergence),
        ("conic solver oracle", criterion_conic),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|s| *s == id || name.contains(s.as_str())) {
            continue;
        }
        let start = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("PASS  [{id}] {name}: {msg} ({secs:.1}s)"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  [{id}] {name}: {msg} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
