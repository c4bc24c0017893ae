use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::cones::{project_dual, Cone};
use super::sparse::CsrMatrix;
use super::{dot, norm2, ConicProblem, ConicSolution, Residuals, Settings, Status};
use crate::error::{domain, Error, Result};

/// Relative weight of equality rows in the dual metric.
const ZERO_CONE_FACTOR: f64 = 1e-3;
/// Metric weight of the homogenizing variable.
const TAU_WEIGHT: f64 = 1.0;
const RUIZ_PASSES: usize = 25;
const SCALE_BOUNDS: (f64, f64) = (1e-4, 1e4);
const CHECK_EVERY: usize = 5;
const ADAPT_EVERY: usize = 100;
const ADAPT_TRIGGER: f64 = 3.0;
const SAFEGUARD: f64 = 1.0;

struct Scaling {
    d: Vec<f64>,
    e: Vec<f64>,
    psi_b: f64,
    psi_c: f64,
}

/// Ruiz equilibration, keeping one row factor per PSD block.
fn equilibrate(p: &ConicProblem, enabled: bool) -> (CsrMatrix, Scaling) {
    let n = p.num_vars();
    let m = p.num_rows();
    let mut a = p.a.clone();
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    if enabled {
        for _ in 0..RUIZ_PASSES {
            let rn = a.row_inf_norms();
            let mut dr: Vec<f64> = rn.iter().map(|&r| if r > 1e-10 { 1.0 / r.sqrt() } else { 1.0 }).collect();
            let mut off = 0;
            for cone in &p.cones {
                if let Cone::Psd(_) = cone {
                    let k = cone.dim();
                    let mx = rn[off..off + k].iter().fold(0.0f64, |acc, v| acc.max(*v));
                    let f = if mx > 1e-10 { 1.0 / mx.sqrt() } else { 1.0 };
                    dr[off..off + k].iter_mut().for_each(|v| *v = f);
                }
                off += cone.dim();
            }
            let cn = a.col_inf_norms();
            let mut ec: Vec<f64> = cn.iter().map(|&c| if c > 1e-10 { 1.0 / c.sqrt() } else { 1.0 }).collect();
            for (di, f) in d.iter_mut().zip(dr.iter_mut()) {
                let target = (*di * *f).clamp(SCALE_BOUNDS.0, SCALE_BOUNDS.1);
                *f = target / *di;
                *di = target;
            }
            for (ej, f) in e.iter_mut().zip(ec.iter_mut()) {
                let target = (*ej * *f).clamp(SCALE_BOUNDS.0, SCALE_BOUNDS.1);
                *f = target / *ej;
                *ej = target;
            }
            a.scale(&dr, &ec);
        }
    }
    let db: Vec<f64> = p.b.iter().zip(&d).map(|(b, d)| b * d).collect();
    let ec: Vec<f64> = p.c.iter().zip(&e).map(|(c, e)| c * e).collect();
    let normalizer = |v: &[f64]| {
        let nv = norm2(v);
        if enabled && nv > 1e-8 {
            1.0 / nv
        } else {
            1.0
        }
    };
    let psi_b = normalizer(&db);
    let psi_c = normalizer(&ec);
    (a, Scaling { d, e, psi_b, psi_c })
}

enum Factor {
    /// `ρ_x I + Aᵀ R_y⁻¹ A`
    Primal(Cholesky<f64, Dyn>),
    /// `R_y + A Aᵀ / ρ_x`
    Dual(Cholesky<f64, Dyn>),
}

struct Work<'a> {
    n: usize,
    m: usize,
    cones: &'a [Cone],
    a: CsrMatrix,
    at: CsrMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    rho_x: f64,
    rho_y: Vec<f64>,
    cone_factor: Vec<f64>,
    factor: Factor,
    p: Vec<f64>,
    hp: f64,
}

struct Eval {
    u: Vec<f64>,
    v: Vec<f64>,
    g: Vec<f64>,
}

impl<'a> Work<'a> {
    fn new(a: CsrMatrix, b: Vec<f64>, c: Vec<f64>, cones: &'a [Cone], settings: &Settings) -> Result<Self> {
        let n = c.len();
        let m = b.len();
        let at = a.transpose();
        let mut cone_factor = Vec::with_capacity(m);
        for cone in cones {
            let f = if let Cone::Zero(_) = cone { ZERO_CONE_FACTOR } else { 1.0 };
            cone_factor.extend(std::iter::repeat(f).take(cone.dim()));
        }
        let mut w = Work {
            n,
            m,
            cones,
            a,
            at,
            b,
            c,
            rho_x: settings.rho_x,
            rho_y: vec![0.0; m],
            cone_factor,
            factor: Factor::Primal(Cholesky::new(DMatrix::identity(1, 1)).unwrap()),
            p: Vec::new(),
            hp: 0.0,
        };
        w.set_scale(settings.initial_scale)?;
        Ok(w)
    }

    fn set_scale(&mut self, scale: f64) -> Result<()> {
        for (r, f) in self.rho_y.iter_mut().zip(&self.cone_factor) {
            *r = f / scale;
        }
        self.factor = self.factorize()?;
        let mut h = self.c.clone();
        h.extend_from_slice(&self.b);
        self.p = self.solve_rm(&h);
        self.hp = dot(&h, &self.p);
        Ok(())
    }

    fn factorize(&self) -> Result<Factor> {
        let (n, m) = (self.n, self.m);
        if n <= m {
            let mut k = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                k[(i, i)] = self.rho_x;
            }
            for i in 0..m {
                let inv = 1.0 / self.rho_y[i];
                let row: Vec<(usize, f64)> = self.a.row(i).collect();
                for &(j, vj) in &row {
                    for &(l, vl) in &row {
                        k[(j, l)] += vj * vl * inv;
                    }
                }
            }
            Cholesky::new(k)
                .map(Factor::Primal)
                .ok_or_else(|| Error::Solver("linear system factorization failed".into()))
        } else {
            let mut k = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                k[(i, i)] = self.rho_y[i];
            }
            // A Aᵀ via the columns of A (rows of Aᵀ).
            for j in 0..n {
                let col: Vec<(usize, f64)> = self.at.row(j).collect();
                for &(r, vr) in &col {
                    for &(s, vs) in &col {
                        k[(r, s)] += vr * vs / self.rho_x;
                    }
                }
            }
            Cholesky::new(k)
                .map(Factor::Dual)
                .ok_or_else(|| Error::Solver("linear system factorization failed".into()))
        }
    }

    /// Solves `[[ρ_x I, Aᵀ], [−A, R_y]] z = r`.
    fn solve_rm(&self, r: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let (r1, r2) = r.split_at(n);
        let mut out = vec![0.0; n + m];
        match &self.factor {
            Factor::Primal(ch) => {
                let t: Vec<f64> = r2.iter().zip(&self.rho_y).map(|(v, p)| v / p).collect();
                let at_t = self.at.mul_vec(&t);
                let rhs = DVector::from_iterator(n, r1.iter().zip(&at_t).map(|(a, b)| a - b));
                let sol = ch.solve(&rhs);
                out[..n].copy_from_slice(sol.as_slice());
                let ax = self.a.mul_vec(sol.as_slice());
                for i in 0..m {
                    out[n + i] = (r2[i] + ax[i]) / self.rho_y[i];
                }
            }
            Factor::Dual(ch) => {
                let ar1 = self.a.mul_vec(r1);
                let rhs = DVector::from_iterator(m, r2.iter().zip(&ar1).map(|(a, b)| a + b / self.rho_x));
                let sol = ch.solve(&rhs);
                out[n..].copy_from_slice(sol.as_slice());
                let at_y = self.at.mul_vec(sol.as_slice());
                for j in 0..n {
                    out[j] = (r1[j] - at_y[j]) / self.rho_x;
                }
            }
        }
        out
    }

    fn r_diag(&self, i: usize) -> f64 {
        if i < self.n {
            self.rho_x
        } else if i < self.n + self.m {
            self.rho_y[i - self.n]
        } else {
            TAU_WEIGHT
        }
    }

    /// One Douglas–Rachford step from `w`.
    fn eval(&self, w: &[f64], alpha: f64) -> Eval {
        let nm = self.n + self.m;
        let rw: Vec<f64> = (0..nm).map(|i| self.r_diag(i) * w[i]).collect();
        let q = self.solve_rm(&rw);
        let mut h = self.c.clone();
        h.extend_from_slice(&self.b);
        let tau_t = (TAU_WEIGHT * w[nm] + dot(&h, &q)) / (TAU_WEIGHT + self.hp);
        let mut u_tilde: Vec<f64> = q.iter().zip(&self.p).map(|(q, p)| q - tau_t * p).collect();
        u_tilde.push(tau_t);

        let z: Vec<f64> = u_tilde.iter().zip(w).map(|(ut, w)| 2.0 * ut - w).collect();
        let mut u = z.clone();
        project_dual(self.cones, &mut u[self.n..nm]);
        u[nm] = u[nm].max(0.0);
        let v: Vec<f64> = (0..=nm).map(|i| self.r_diag(i) * (u[i] - z[i])).collect();
        let g: Vec<f64> = (0..=nm).map(|i| w[i] + alpha * (u[i] - u_tilde[i])).collect();
        Eval { u, v, g }
    }

    /// `w = u + R⁻¹ v`, the fixed-point representation of `(u, v)`.
    fn w_from(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (0..u.len()).map(|i| u[i] + v[i] / self.r_diag(i)).collect()
    }
}

/// Type-II Anderson acceleration on the fixed-point iteration `w ← g(w)`.
struct Anderson {
    mem: usize,
    dw: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(mem: usize) -> Self {
        Anderson {
            mem,
            dw: Vec::new(),
            df: Vec::new(),
            prev: None,
        }
    }

    fn rescale(&mut self, f: f64) {
        for v in self.dw.iter_mut().chain(self.df.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= f);
        }
        if let Some((w, g)) = self.prev.as_mut() {
            w.iter_mut().chain(g.iter_mut()).for_each(|x| *x *= f);
        }
    }

    fn reset(&mut self) {
        self.dw.clear();
        self.df.clear();
        self.prev = None;
    }

    /// Records `(w, g(w))` and returns an extrapolated point when history allows.
    fn step(&mut self, w: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        let f: Vec<f64> = g.iter().zip(w).map(|(g, w)| g - w).collect();
        if let Some((pw, pf)) = self.prev.take() {
            self.dw.push(w.iter().zip(&pw).map(|(a, b)| a - b).collect());
            self.df.push(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
            if self.dw.len() > self.mem {
                self.dw.remove(0);
                self.df.remove(0);
            }
        }
        self.prev = Some((w.to_vec(), f.clone()));
        let k = self.df.len();
        if k == 0 {
            return None;
        }
        let dim = f.len();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for i in 0..k {
            rhs[i] = dot(&self.df[i], &f);
            for j in 0..=i {
                let v = dot(&self.df[i], &self.df[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let reg = 1e-10 * gram.trace().max(1e-300);
        for i in 0..k {
            gram[(i, i)] += reg;
        }
        let gamma = Cholesky::new(gram)?.solve(&rhs);
        if gamma.iter().any(|g| !g.is_finite()) {
            return None;
        }
        let mut out = g.to_vec();
        for i in 0..k {
            let gi = gamma[i];
            for t in 0..dim {
                out[t] -= gi * (self.dw[i][t] + self.df[i][t]);
            }
        }
        Some(out)
    }
}

/// `‖g − w‖`.
fn step_norm(g: &[f64], w: &[f64]) -> f64 {
    g.iter().zip(w).map(|(g, w)| (g - w).powi(2)).sum::<f64>().sqrt()
}

struct Unscaled {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
}

fn unscale_point(work: &Work, sc: &Scaling, u: &[f64], v: &[f64], tau: f64) -> Unscaled {
    let (n, m) = (work.n, work.m);
    let x = (0..n).map(|j| sc.e[j] * u[j] / tau / sc.psi_b).collect();
    let y = (0..m).map(|i| sc.d[i] * u[n + i] / tau / sc.psi_c).collect();
    let s = (0..m).map(|i| v[n + i] / sc.d[i] / tau / sc.psi_b).collect();
    Unscaled { x, y, s }
}

pub(super) fn residuals(p: &ConicProblem, x: &[f64], y: &[f64], s: &[f64]) -> Residuals {
    let ax = p.a.mul_vec(x);
    let pr: Vec<f64> = (0..p.num_rows()).map(|i| ax[i] + s[i] - p.b[i]).collect();
    let aty = p.a.mul_t_vec(y);
    let dr: Vec<f64> = (0..p.num_vars()).map(|j| aty[j] + p.c[j]).collect();
    let ctx = dot(&p.c, x);
    let bty = dot(&p.b, y);
    Residuals {
        primal: norm2(&pr) / (1.0 + norm2(&p.b)),
        dual: norm2(&dr) / (1.0 + norm2(&p.c)),
        gap: (ctx + bty).abs() / (1.0 + ctx.abs() + bty.abs()),
    }
}

/// Relative residual imbalance in the scaled space, used to adapt the metric.
fn residual_ratio(work: &Work, u: &[f64], v: &[f64]) -> Option<f64> {
    let (n, m) = (work.n, work.m);
    let tau = u[n + m];
    if tau <= 1e-12 {
        return None;
    }
    let x: Vec<f64> = u[..n].iter().map(|v| v / tau).collect();
    let y: Vec<f64> = u[n..n + m].iter().map(|v| v / tau).collect();
    let s: Vec<f64> = v[n..n + m].iter().map(|v| v / tau).collect();
    let ax = work.a.mul_vec(&x);
    let aty = work.at.mul_vec(&y);
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let pr: Vec<f64> = (0..m).map(|i| ax[i] + s[i] - work.b[i]).collect();
    let dr: Vec<f64> = (0..n).map(|j| aty[j] + work.c[j]).collect();
    let rel_p = inf(&pr) / inf(&ax).max(inf(&s)).max(inf(&work.b)).max(1e-12);
    let rel_d = inf(&dr) / inf(&aty).max(inf(&work.c)).max(1e-12);
    if rel_p <= 0.0 || rel_d <= 0.0 {
        return None;
    }
    Some((rel_p / rel_d).sqrt())
}

enum Verdict {
    Continue,
    Done(ConicSolution),
}

fn check(p: &ConicProblem, work: &Work, sc: &Scaling, ev: &Eval, eps: f64, iter: usize) -> (Verdict, Option<ConicSolution>) {
    let (n, m) = (work.n, work.m);
    let tau = ev.u[n + m];
    let mut candidate = None;
    if tau > 1e-14 {
        let pt = unscale_point(work, sc, &ev.u, &ev.v, tau);
        let res = residuals(p, &pt.x, &pt.y, &pt.s);
        let sol = ConicSolution {
            primal_objective: dot(&p.c, &pt.x),
            dual_objective: -dot(&p.b, &pt.y),
            x: pt.x,
            y: pt.y,
            s: pt.s,
            status: Status::Optimal,
            residuals: res,
            iterations: iter,
        };
        if res.primal <= eps && res.dual <= eps && res.gap <= eps {
            return (Verdict::Done(sol), None);
        }
        candidate = Some(sol);
    }
    // Infeasibility rays, taken in the original coordinates.
    let x_ray: Vec<f64> = (0..n).map(|j| sc.e[j] * ev.u[j]).collect();
    let y_ray: Vec<f64> = (0..m).map(|i| sc.d[i] * ev.u[n + i]).collect();
    let s_ray: Vec<f64> = (0..m).map(|i| ev.v[n + i] / sc.d[i]).collect();
    let bty = dot(&p.b, &y_ray);
    if bty < 0.0 {
        let y: Vec<f64> = y_ray.iter().map(|v| v / -bty).collect();
        let farkas = norm2(&p.a.mul_t_vec(&y));
        if farkas <= eps {
            let sol = ConicSolution {
                x: vec![f64::NAN; n],
                y,
                s: vec![f64::NAN; m],
                status: Status::PrimalInfeasible,
                residuals: Residuals {
                    primal: farkas,
                    dual: f64::NAN,
                    gap: f64::NAN,
                },
                primal_objective: f64::INFINITY,
                dual_objective: f64::INFINITY,
                iterations: iter,
            };
            return (Verdict::Done(sol), candidate);
        }
    }
    let ctx = dot(&p.c, &x_ray);
    if ctx < 0.0 {
        let x: Vec<f64> = x_ray.iter().map(|v| v / -ctx).collect();
        let s: Vec<f64> = s_ray.iter().map(|v| v / -ctx).collect();
        let ax = p.a.mul_vec(&x);
        let r: Vec<f64> = ax.iter().zip(&s).map(|(a, b)| a + b).collect();
        let farkas = norm2(&r);
        if farkas <= eps {
            let sol = ConicSolution {
                x,
                y: vec![f64::NAN; m],
                s,
                status: Status::DualInfeasible,
                residuals: Residuals {
                    primal: farkas,
                    dual: f64::NAN,
                    gap: f64::NAN,
                },
                primal_objective: f64::NEG_INFINITY,
                dual_objective: f64::NEG_INFINITY,
                iterations: iter,
            };
            return (Verdict::Done(sol), candidate);
        }
    }
    (Verdict::Continue, candidate)
}

/// Runs the splitting iteration on `p` as given.
///
/// On `MaxIter` the best iterate is returned with its residuals; callers
/// decide whether it is usable.
pub(crate) fn solve_direct(p: &ConicProblem, settings: &Settings) -> Result<ConicSolution> {
    p.validate()?;
    if !(settings.eps > 0.0) {
        return domain("eps must be positive");
    }
    if !(settings.alpha > 0.0 && settings.alpha < 2.0) {
        return domain("alpha must lie in (0, 2)");
    }
    let n = p.num_vars();
    let m = p.num_rows();
    if n == 0 {
        return domain("problem has no variables");
    }
    let (a_s, sc) = equilibrate(p, settings.scale);
    let b_s: Vec<f64> = p.b.iter().zip(&sc.d).map(|(b, d)| b * d * sc.psi_b).collect();
    let c_s: Vec<f64> = p.c.iter().zip(&sc.e).map(|(c, e)| c * e * sc.psi_c).collect();
    let mut work = Work::new(a_s, b_s, c_s, &p.cones, settings)?;
    let mut scale = settings.initial_scale;

    let nm = n + m;
    let mut w = vec![0.0; nm + 1];
    w[nm] = 1.0;
    let mut aa = Anderson::new(settings.anderson_memory);
    let mut pending: Option<(Vec<f64>, f64)> = None;
    let mut last_adapt = 0;
    let mut best: Option<ConicSolution> = None;

    for iter in 0..settings.max_iter {
        let mut ev = work.eval(&w, settings.alpha);
        let mut f_abs = step_norm(&ev.g, &w);
        if let Some((g_prev, f_prev)) = pending.take() {
            // Absolute residuals: a relative test would accept extrapolations
            // that only inflate `w` along a ray.
            if !(f_abs <= SAFEGUARD * f_prev) {
                // Reject the extrapolated point and fall back to the plain step.
                aa.reset();
                w = g_prev;
                ev = work.eval(&w, settings.alpha);
                f_abs = step_norm(&ev.g, &w);
            }
        }
        if iter % CHECK_EVERY == 0 || iter + 1 == settings.max_iter {
            let (verdict, candidate) = check(p, &work, &sc, &ev, settings.eps, iter + 1);
            if let Verdict::Done(sol) = verdict {
                if settings.verbose {
                    eprintln!("conic: {:?} after {} iterations", sol.status, iter + 1);
                }
                return Ok(sol);
            }
            if let Some(c) = candidate {
                if settings.verbose && iter % 500 == 0 {
                    eprintln!(
                        "iter {iter:6} pres {:.2e} dres {:.2e} gap {:.2e} obj {:.8e} scale {scale:.2e}",
                        c.residuals.primal, c.residuals.dual, c.residuals.gap, c.primal_objective
                    );
                }
                best = Some(c);
            }
        }

        if settings.adaptive_scale && iter >= last_adapt + ADAPT_EVERY {
            if let Some(ratio) = residual_ratio(&work, &ev.u, &ev.v) {
                if !(1.0 / ADAPT_TRIGGER..=ADAPT_TRIGGER).contains(&ratio) {
                    scale = (scale * ratio).clamp(1e-6, 1e6);
                    work.set_scale(scale)?;
                    w = work.w_from(&ev.u, &ev.v);
                    aa.reset();
                    pending = None;
                    last_adapt = iter;
                    continue;
                }
            }
        }

        if settings.anderson_memory > 0 {
            match aa.step(&w, &ev.g) {
                Some(acc) if acc.iter().all(|v| v.is_finite()) && norm2(&acc) > 0.0 => {
                    pending = Some((ev.g, f_abs));
                    w = acc;
                }
                _ => w = ev.g,
            }
        } else {
            w = ev.g;
        }
        // The iteration map is positively homogeneous; keep `w` away from the
        // trivial fixed point at the origin.
        let nw = norm2(&w);
        if nw > 0.0 && !(1e-3..=1e3).contains(&nw) {
            let f = 1.0 / nw;
            w.iter_mut().for_each(|v| *v *= f);
            aa.rescale(f);
            if let Some((g, fp)) = pending.as_mut() {
                g.iter_mut().for_each(|v| *v *= f);
                *fp *= f;
            }
        }
    }

    let mut sol = best.ok_or_else(|| Error::Solver("no iterate with positive τ".into()))?;
    sol.status = Status::MaxIter;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::svec;

    fn lp_x_nonneg() -> ConicProblem {
        // min x s.t. x ≥ 0, written as -x + s = 0, s ≥ 0.
        let a = CsrMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap();
        ConicProblem::new(vec![1.0], a, vec![0.0], vec![Cone::NonNeg(1)]).unwrap()
    }

    #[test]
    fn trivial_lp() {
        let sol = solve_direct(&lp_x_nonneg(), &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!(sol.x[0].abs() < 1e-7);
    }

    #[test]
    fn trace_minimization_with_pinned_corner() {
        // min tr X s.t. X11 = 1, X ⪰ 0 over svec(X) = (x11, √2 x21, x22).
        let a = CsrMatrix::from_triplets(
            4,
            3,
            &[(0, 0, 1.0), (1, 0, -1.0), (2, 1, -1.0), (3, 2, -1.0)],
        )
        .unwrap();
        let p = ConicProblem::new(
            vec![1.0, 0.0, 1.0],
            a,
            vec![1.0, 0.0, 0.0, 0.0],
            vec![Cone::Zero(1), Cone::Psd(2)],
        )
        .unwrap();
        let sol = solve_direct(&p, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-6);
        let x = crate::conic::smat(&sol.x, 2);
        let target = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((x - target).amax() < 1e-6);
        let _ = svec;
    }

    #[test]
    fn detects_primal_infeasibility() {
        // x = 1 and x = -1 simultaneously... via x ≥ 1, -x ≥ 1.
        let a = CsrMatrix::from_triplets(2, 1, &[(0, 0, -1.0), (1, 0, 1.0)]).unwrap();
        let p = ConicProblem::new(vec![0.0], a, vec![-1.0, -1.0], vec![Cone::NonNeg(2)]).unwrap();
        let sol = solve_direct(&p, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::PrimalInfeasible);
        assert!(dot(&p.b, &sol.y) < 0.0);
    }

    #[test]
    fn detects_dual_infeasibility() {
        // min x with x free: unbounded.
        let a = CsrMatrix::zeros(1, 1);
        let p = ConicProblem::new(vec![1.0], a, vec![0.0], vec![Cone::NonNeg(1)]).unwrap();
        let sol = solve_direct(&p, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::DualInfeasible);
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let a = CsrMatrix::zeros(2, 1);
        assert!(ConicProblem::new(vec![1.0], a, vec![0.0, 0.0], vec![Cone::NonNeg(1)]).is_err());
    }
}
