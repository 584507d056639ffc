//! Fourier–Galerkin discretization of the constrained action functionals.
//!
//! * Periodic mode: loops `u(t) = Σ_{|k|<=m} u_k e^{2πikt}` with complex
//!   `u_k ∈ C^{n+1}`, action `Φ_H(u) = π Σ k |u_k|^2 - ∫_0^1 H_t(u(t)) dt`.
//! * Chord mode: paths `u(t) = Σ_{|k|<=m} c_k e^{πikt}` with real
//!   `c_k ∈ R^{n+1}` (so `u(0), u(1)` are real), action
//!   `J_H(u) = (π/2) Σ k |c_k|^2 - ∫_0^1 H_t(u(t)) dt`.
//!
//! Both are restricted to `𝒦_q(u) = ∫ K_q(u) dt = 1`, which by Parseval is
//! `1/2 Σ_j q_j Σ_k |u_k^{(j)}|^2`. Critical points satisfy
//! `∇(action) = λ ∇𝒦_q` and, by degree-two homogeneity, `action(u) = λ`.
//!
//! Gradients are taken with respect to the plain `L^2` pairing on
//! coefficients (`Re Σ_k ⟨u_k, v_k⟩`). Against the `|k|`-weighted Sobolev
//! pairing this differs only by a positive diagonal factor, so critical points
//! and multipliers coincide, and the linear part is literally `ωk · u_k`.
//! `𝒦_q` has the diagonal gradient `u_k ↦ q ∘ u_k`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::class_distance;
use crate::geometry::{best_phase, C64};
use crate::hamiltonian::LiftedHamiltonian;
use crate::linalg::{pinv_solve, tikhonov_solve};
use crate::quadrature::{self, Rule};
use crate::weights::WeightVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopMode {
    /// Closed 1-periodic loops, basis `e^{2πikt}`.
    Periodic,
    /// Real-boundary chords on `[0, 1]`, basis `e^{πikt}` with real coefficients.
    Chord,
}

impl LoopMode {
    /// Frequency unit `ω`: basis functions are `e^{iωkt}`.
    pub fn omega(self) -> f64 {
        match self {
            LoopMode::Periodic => 2.0 * PI,
            LoopMode::Chord => PI,
        }
    }

    /// Multipliers are compared modulo this value.
    pub fn class_modulus(self) -> f64 {
        self.omega()
    }

    fn reals_per_coeff(self) -> usize {
        match self {
            LoopMode::Periodic => 2,
            LoopMode::Chord => 1,
        }
    }
}

impl std::str::FromStr for LoopMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(LoopMode::Periodic),
            "chord" => Ok(LoopMode::Chord),
            other => Err(Error::Parse(format!("unknown mode {other:?} (periodic|chord)"))),
        }
    }
}

/// Truncated Fourier representation of a loop or chord in `C^{n+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierLoop {
    mode: LoopMode,
    m: usize,
    q: WeightVector,
    /// Real parameters, mode-major: coefficient `(k, j)` sits at
    /// `((k + m) (n + 1) + j) · r`, `r` = reals per coefficient.
    data: Vec<f64>,
}

impl FourierLoop {
    pub fn zeros(mode: LoopMode, m: usize, q: &WeightVector) -> Self {
        let len = (2 * m + 1) * q.len() * mode.reals_per_coeff();
        Self { mode, m, q: q.clone(), data: vec![0.0; len] }
    }

    /// Builds from the real parameter vector (see [`FourierLoop::as_real`]).
    pub fn from_real(mode: LoopMode, m: usize, q: &WeightVector, data: Vec<f64>) -> Result<Self> {
        let expected = (2 * m + 1) * q.len() * mode.reals_per_coeff();
        if data.len() != expected {
            return Err(Error::arg(format!("expected {expected} real parameters, got {}", data.len())));
        }
        Ok(Self { mode, m, q: q.clone(), data })
    }

    /// The normalized eigenvector `sqrt(2/q_j) e^{iωkt} ε_j` on `S(q)`
    /// (`j` is 0-based).
    pub fn eigen(mode: LoopMode, m: usize, q: &WeightVector, k: i64, j: usize) -> Result<Self> {
        if k.unsigned_abs() as usize > m || j >= q.len() {
            return Err(Error::arg(format!("eigenvector (k={k}, j={j}) outside the truncation")));
        }
        let mut u = Self::zeros(mode, m, q);
        u.set(k, j, C64::new((2.0 / q.get(j) as f64).sqrt(), 0.0))?;
        Ok(u)
    }

    pub fn mode(&self) -> LoopMode {
        self.mode
    }

    /// Truncation order `m`.
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn weights(&self) -> &WeightVector {
        &self.q
    }

    /// Real dimension of the truncated space: `2(2m+1)(n+1)` periodic,
    /// `(2m+1)(n+1)` chord.
    pub fn real_dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_real(&self) -> &[f64] {
        &self.data
    }

    fn index(&self, k: i64, j: usize) -> usize {
        ((k + self.m as i64) as usize * self.q.len() + j) * self.mode.reals_per_coeff()
    }

    /// Coefficient of `e^{iωkt} ε_j` (0-based `j`).
    pub fn coeff(&self, k: i64, j: usize) -> C64 {
        let i = self.index(k, j);
        match self.mode {
            LoopMode::Periodic => C64::new(self.data[i], self.data[i + 1]),
            LoopMode::Chord => C64::new(self.data[i], 0.0),
        }
    }

    /// Chord coefficients are real; a nonzero imaginary part is rejected.
    pub fn set(&mut self, k: i64, j: usize, c: C64) -> Result<()> {
        if k.unsigned_abs() as usize > self.m || j >= self.q.len() {
            return Err(Error::arg(format!("coefficient (k={k}, j={j}) outside the truncation")));
        }
        let i = self.index(k, j);
        match self.mode {
            LoopMode::Periodic => {
                self.data[i] = c.re;
                self.data[i + 1] = c.im;
            }
            LoopMode::Chord => {
                if c.im != 0.0 {
                    return Err(Error::arg("chord coefficients must be real"));
                }
                self.data[i] = c.re;
            }
        }
        Ok(())
    }

    /// `u(t)`.
    pub fn eval(&self, t: f64) -> Vec<C64> {
        let n1 = self.q.len();
        let mut out = vec![C64::new(0.0, 0.0); n1];
        let w = self.mode.omega();
        for k in -(self.m as i64)..=(self.m as i64) {
            let e = C64::from_polar(1.0, w * k as f64 * t);
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.coeff(k, j) * e;
            }
        }
        out
    }

    /// `T_s u`: the weighted circle action applied to every coefficient.
    /// Only defined for periodic loops (it does not preserve real boundaries).
    pub fn rotate(&self, s: f64) -> Result<Self> {
        if self.mode != LoopMode::Periodic {
            return Err(Error::arg("the circle action does not preserve chord boundary conditions"));
        }
        let mut out = self.clone();
        for k in -(self.m as i64)..=(self.m as i64) {
            for j in 0..self.q.len() {
                let c = self.coeff(k, j) * C64::from_polar(1.0, self.q.get(j) as f64 * s);
                out.set(k, j, c)?;
            }
        }
        Ok(out)
    }

    /// `g · u = (g^{q_j} u_j)` for `g = -1`.
    pub fn z2_flip(&self) -> Self {
        let mut out = self.clone();
        let r = self.mode.reals_per_coeff();
        for ki in 0..(2 * self.m + 1) {
            for j in 0..self.q.len() {
                if self.q.get(j) % 2 == 1 {
                    let i = (ki * self.q.len() + j) * r;
                    for x in &mut out.data[i..i + r] {
                        *x = -*x;
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= c);
        out
    }

    /// Same loop at truncation `m_new` (zero padding or truncation).
    pub fn resize(&self, m_new: usize) -> Self {
        let mut out = Self::zeros(self.mode, m_new, &self.q);
        let lim = self.m.min(m_new) as i64;
        for k in -lim..=lim {
            for j in 0..self.q.len() {
                out.set(k, j, self.coeff(k, j)).expect("in range");
            }
        }
        out
    }

    /// Largest `|k|` with a coefficient above `tol`, if any.
    pub fn bandwidth(&self, tol: f64) -> Option<usize> {
        (0..=self.m).rev().find(|&a| {
            let a = a as i64;
            (0..self.q.len()).any(|j| self.coeff(a, j).norm() > tol || self.coeff(-a, j).norm() > tol)
        })
    }

    /// `k ↦ ωk` per real parameter.
    fn frequencies(&self) -> Vec<f64> {
        let r = self.mode.reals_per_coeff();
        let n1 = self.q.len();
        let w = self.mode.omega();
        (0..self.data.len()).map(|i| w * ((i / r / n1) as f64 - self.m as f64)).collect()
    }

    /// `q_j` per real parameter.
    fn weight_per_param(&self) -> Vec<f64> {
        let r = self.mode.reals_per_coeff();
        let n1 = self.q.len();
        (0..self.data.len()).map(|i| self.q.get((i / r) % n1) as f64).collect()
    }
}

/// JSON form of a loop: coefficients listed per mode `k = -m..=m` as
/// `[[re, im], ...]` over coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopReport {
    pub mode: LoopMode,
    pub m: usize,
    pub weights: WeightVector,
    pub coefficients: Vec<(i64, Vec<[f64; 2]>)>,
}

impl From<&FourierLoop> for LoopReport {
    fn from(u: &FourierLoop) -> Self {
        let coefficients = (-(u.m as i64)..=(u.m as i64))
            .map(|k| (k, (0..u.q.len()).map(|j| [u.coeff(k, j).re, u.coeff(k, j).im]).collect()))
            .collect();
        LoopReport { mode: u.mode, m: u.m, weights: u.q.clone(), coefficients }
    }
}

impl Serialize for FourierLoop {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LoopReport::from(self).serialize(s)
    }
}

/// `𝒦_q(u) = 1/2 Σ_j q_j Σ_k |u_k^{(j)}|^2` (exact, by Parseval).
pub fn constraint(u: &FourierLoop) -> f64 {
    0.5 * u.data.iter().zip(u.weight_per_param()).map(|(x, w)| w * x * x).sum::<f64>()
}

/// `∇𝒦_q(u)`: `u_k^{(j)} ↦ q_j u_k^{(j)}`, diagonal in modes and coordinates.
pub fn constraint_gradient(u: &FourierLoop) -> FourierLoop {
    let mut out = u.clone();
    for (x, w) in out.data.iter_mut().zip(u.weight_per_param()) {
        *x *= w;
    }
    out
}

/// Quadrature and basis tables for one `(mode, m, H)` combination.
struct Discretization {
    rule: Rule,
    /// `basis[i][k + m] = e^{iωk t_i}`
    basis: Vec<Vec<C64>>,
}

fn node_count(mode: LoopMode, m: usize, h: &LiftedHamiltonian) -> usize {
    let d = h.max_degree().max(2) as usize;
    let band = d * m + h.max_time_mode() as usize;
    match mode {
        LoopMode::Periodic => 4 * band + 8,
        LoopMode::Chord => 6 * band + 16,
    }
    .max(4 * (m + d))
}

impl Discretization {
    fn new(mode: LoopMode, m: usize, h: &LiftedHamiltonian) -> Self {
        let n = node_count(mode, m, h);
        let rule = match mode {
            LoopMode::Periodic => quadrature::periodic(n),
            LoopMode::Chord => quadrature::gauss_legendre(n),
        };
        let w = mode.omega();
        let basis = rule
            .nodes
            .iter()
            .map(|&t| (-(m as i64)..=(m as i64)).map(|k| C64::from_polar(1.0, w * k as f64 * t)).collect())
            .collect();
        Self { rule, basis }
    }

    fn values(&self, u: &FourierLoop) -> Vec<Vec<C64>> {
        let n1 = u.q.len();
        self.basis
            .iter()
            .map(|row| {
                let mut z = vec![C64::new(0.0, 0.0); n1];
                for (ki, e) in row.iter().enumerate() {
                    let k = ki as i64 - u.m as i64;
                    for (j, zj) in z.iter_mut().enumerate() {
                        *zj += u.coeff(k, j) * e;
                    }
                }
                z
            })
            .collect()
    }

    fn integral(&self, u: &FourierLoop, h: &LiftedHamiltonian) -> f64 {
        if h.is_zero() {
            return 0.0;
        }
        self.values(u)
            .iter()
            .zip(self.rule.nodes.iter().zip(&self.rule.weights))
            .map(|(z, (&t, &w))| w * h.evaluate(z, t))
            .sum()
    }

    /// Real gradient of `∫ H_t(u(t)) dt` with respect to the parameters.
    fn integral_gradient(&self, u: &FourierLoop, h: &LiftedHamiltonian) -> Vec<f64> {
        let mut out = vec![0.0; u.data.len()];
        if h.is_zero() {
            return out;
        }
        let n1 = u.q.len();
        let r = u.mode.reals_per_coeff();
        let values = self.values(u);
        let mut g = vec![C64::new(0.0, 0.0); n1];
        for ((z, row), (&t, &w)) in values.iter().zip(&self.basis).zip(self.rule.nodes.iter().zip(&self.rule.weights)) {
            g.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            h.add_gradient(z, t, w, &mut g);
            for (ki, e) in row.iter().enumerate() {
                let ec = e.conj();
                for (j, gj) in g.iter().enumerate() {
                    let c = gj * ec;
                    let i = (ki * n1 + j) * r;
                    out[i] += c.re;
                    if r == 2 {
                        out[i + 1] += c.im;
                    }
                }
            }
        }
        out
    }
}

fn quadratic_part(u: &FourierLoop) -> f64 {
    0.5 * u.data.iter().zip(u.frequencies()).map(|(x, f)| f * x * x).sum::<f64>()
}

fn check_compatible(u: &FourierLoop, h: &LiftedHamiltonian) -> Result<()> {
    if u.q != *h.weights() {
        return Err(Error::arg("loop and Hamiltonian have different weights"));
    }
    Ok(())
}

/// Action of `u`: `Φ_H` in periodic mode, `J_H` in chord mode.
pub fn action(u: &FourierLoop, h: &LiftedHamiltonian) -> Result<f64> {
    check_compatible(u, h)?;
    let disc = Discretization::new(u.mode, u.m, h);
    Ok(quadratic_part(u) - disc.integral(u, h))
}

/// Real-parameter gradient of [`action`].
pub fn action_gradient(u: &FourierLoop, h: &LiftedHamiltonian) -> Result<FourierLoop> {
    check_compatible(u, h)?;
    let disc = Discretization::new(u.mode, u.m, h);
    Ok(gradient_with(&disc, u, h))
}

fn gradient_with(disc: &Discretization, u: &FourierLoop, h: &LiftedHamiltonian) -> FourierLoop {
    let gi = disc.integral_gradient(u, h);
    let mut out = u.clone();
    for ((x, f), g) in out.data.iter_mut().zip(u.frequencies()).zip(gi) {
        *x = f * *x - g;
    }
    out
}

/// `Φ_H(u) = π Σ k |u_k|^2 - ∫ H_t(u(t)) dt` for periodic loops.
pub fn phi(u: &FourierLoop, h: &LiftedHamiltonian) -> Result<f64> {
    if u.mode != LoopMode::Periodic {
        return Err(Error::arg("phi is defined on periodic loops; use j_functional for chords"));
    }
    action(u, h)
}

/// `J_H(u) = (π/2) Σ k |c_k|^2 - ∫ H_t(u(t)) dt` for chords.
pub fn j_functional(u: &FourierLoop, h: &LiftedHamiltonian) -> Result<f64> {
    if u.mode != LoopMode::Chord {
        return Err(Error::arg("j_functional is defined on chords; use phi for periodic loops"));
    }
    action(u, h)
}

/// Coefficients of `∇Φ_H(u)`: `2πk u_k` minus the `k`-th Fourier coefficient
/// of `t ↦ ∇H_t(u(t))`.
pub fn gradient_phi(u: &FourierLoop, h: &LiftedHamiltonian) -> Result<FourierLoop> {
    if u.mode != LoopMode::Periodic {
        return Err(Error::arg("gradient_phi is defined on periodic loops"));
    }
    action_gradient(u, h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Required norm of `∇action - λ ∇𝒦_q` at a solution.
    pub tol_newton: f64,
    pub max_iter: usize,
    /// Finite-difference step for the Hessian of the Hamiltonian term.
    pub fd_step: f64,
    /// Relative singular-value cutoff for the minimum-norm Newton step.
    pub svd_rel_tol: f64,
    /// Cap on the total degree of Hamiltonian terms.
    pub max_degree: u32,
    /// Tolerance for merging multiplier classes and equivalent loops.
    pub dedupe_tol: f64,
    /// Seed for the random starting loops.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_newton: 1e-9,
            max_iter: 60,
            fd_step: 1e-6,
            svd_rel_tol: 1e-9,
            max_degree: 8,
            dedupe_tol: 1e-6,
            seed: 0,
        }
    }
}

/// A converged constrained critical point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalSolution {
    #[serde(rename = "loop")]
    pub path: FourierLoop,
    pub lambda: f64,
    /// Action at the solution; equals `lambda` up to rounding.
    pub value: f64,
    pub residual: f64,
    pub class_modulus: f64,
    pub lambda_class: f64,
    pub constraint: f64,
    pub iterations: usize,
}

struct Problem<'a> {
    h: &'a LiftedHamiltonian,
    disc: Discretization,
    freq: Vec<f64>,
    wq: Vec<f64>,
    mode: LoopMode,
    m: usize,
}

impl Problem<'_> {
    fn loop_of(&self, x: &[f64]) -> FourierLoop {
        FourierLoop { mode: self.mode, m: self.m, q: self.h.weights().clone(), data: x.to_vec() }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        gradient_with(&self.disc, &self.loop_of(x), self.h).data
    }

    fn integral_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.disc.integral_gradient(&self.loop_of(x), self.h)
    }

    fn constraint(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().zip(&self.wq).map(|(v, w)| w * v * v).sum::<f64>()
    }

    /// `(F, ‖projected gradient‖)` for `F = (g - λQx, 𝒦 - 1)`.
    fn residual(&self, x: &[f64], lambda: f64) -> (DVector<f64>, f64) {
        let g = self.gradient(x);
        let d = x.len();
        let mut f = DVector::zeros(d + 1);
        for i in 0..d {
            f[i] = g[i] - lambda * self.wq[i] * x[i];
        }
        f[d] = self.constraint(x) - 1.0;
        let r = f.rows(0, d).norm();
        (f, r)
    }

    fn jacobian(&self, x: &[f64], lambda: f64, step: f64) -> DMatrix<f64> {
        let d = x.len();
        let mut j = DMatrix::zeros(d + 1, d + 1);
        if !self.h.is_zero() {
            let cols: Vec<Vec<f64>> = (0..d)
                .into_par_iter()
                .map(|c| {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[c] += step;
                    xm[c] -= step;
                    let gp = self.integral_gradient(&xp);
                    let gm = self.integral_gradient(&xm);
                    gp.iter().zip(&gm).map(|(a, b)| -(a - b) / (2.0 * step)).collect()
                })
                .collect();
            for (c, col) in cols.iter().enumerate() {
                for (r, v) in col.iter().enumerate() {
                    j[(r, c)] = *v;
                }
            }
            // the exact Hessian is symmetric
            let sym = (j.view((0, 0), (d, d)) + j.view((0, 0), (d, d)).transpose()) * 0.5;
            j.view_mut((0, 0), (d, d)).copy_from(&sym);
        }
        for i in 0..d {
            j[(i, i)] += self.freq[i] - lambda * self.wq[i];
            j[(i, d)] = -self.wq[i] * x[i];
            j[(d, i)] = self.wq[i] * x[i];
        }
        j
    }
}

fn normalize_onto(x: &mut [f64], wq: &[f64]) -> bool {
    let k = 0.5 * x.iter().zip(wq).map(|(v, w)| w * v * v).sum::<f64>();
    if !(k > 0.0) || !k.is_finite() {
        return false;
    }
    let s = k.sqrt();
    x.iter_mut().for_each(|v| *v /= s);
    true
}

fn multiplier(g: &[f64], x: &[f64], wq: &[f64]) -> f64 {
    let num: f64 = g.iter().zip(x).zip(wq).map(|((a, b), w)| a * w * b).sum();
    let den: f64 = x.iter().zip(wq).map(|(b, w)| w * w * b * b).sum();
    num / den
}

/// Newton iteration on `{∇action(u) = λ ∇𝒦_q(u), 𝒦_q(u) = 1}`.
///
/// The seed is first rescaled onto `S(q)`. Steps are minimum-norm solutions of
/// the bordered Newton system (continuous symmetries make it singular);
/// when a step fails to reduce the residual, Tikhonov-damped steps are tried
/// at three escalating levels before giving up. Returns `Ok(None)` on
/// non-convergence.
pub fn solve_critical(
    h: &LiftedHamiltonian,
    seed: &FourierLoop,
    opts: &SolverOptions,
) -> Result<Option<CriticalSolution>> {
    check_compatible(seed, h)?;
    if h.max_degree() > opts.max_degree {
        return Err(Error::arg(format!(
            "Hamiltonian degree {} exceeds the cap {}",
            h.max_degree(),
            opts.max_degree
        )));
    }
    let problem = Problem {
        h,
        disc: Discretization::new(seed.mode, seed.m, h),
        freq: seed.frequencies(),
        wq: seed.weight_per_param(),
        mode: seed.mode,
        m: seed.m,
    };
    let mut x = seed.data.clone();
    if !normalize_onto(&mut x, &problem.wq) {
        return Err(Error::domain("seed loop has zero constraint value and cannot be rescaled"));
    }
    let mut lambda = multiplier(&problem.gradient(&x), &x, &problem.wq);
    let d = x.len();

    for iter in 0..=opts.max_iter {
        // test convergence on the sphere with the least-squares multiplier
        let mut xs = x.clone();
        normalize_onto(&mut xs, &problem.wq);
        let gs = problem.gradient(&xs);
        let ls = multiplier(&gs, &xs, &problem.wq);
        let (_, rs) = problem.residual(&xs, ls);
        if rs <= opts.tol_newton {
            let path = problem.loop_of(&xs);
            let value = quadratic_part(&path) - problem.disc.integral(&path, h);
            let modulus = seed.mode.class_modulus();
            let class = ls.rem_euclid(modulus);
            return Ok(Some(CriticalSolution {
                constraint: constraint(&path),
                path,
                lambda: ls,
                value,
                residual: rs,
                class_modulus: modulus,
                lambda_class: if class >= modulus - 1e-13 { 0.0 } else { class },
                iterations: iter,
            }));
        }
        if iter == opts.max_iter {
            break;
        }
        let (f, _) = problem.residual(&x, lambda);
        let merit = f.norm();
        let jac = problem.jacobian(&x, lambda, opts.fd_step);
        let rhs = -&f;
        let mut candidates: Vec<Option<DVector<f64>>> = vec![pinv_solve(&jac, &rhs, opts.svd_rel_tol)];
        let mut moved = false;
        for level in 0..4 {
            if level > 0 {
                candidates.push(tikhonov_solve(&jac, &rhs, [1e-12, 1e-8, 1e-4][level - 1]));
            }
            let Some(delta) = candidates.last().cloned().flatten() else { continue };
            let mut t = 1.0;
            while t > 1e-3 {
                let xt: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + t * b).collect();
                let lt = lambda + t * delta[d];
                let (ft, _) = problem.residual(&xt, lt);
                if ft.norm() < merit {
                    x = xt;
                    lambda = lt;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Minimal distance between `u` and the symmetry orbit of `v`: the circle
/// action `T_s` for loops, `{v, -1·v}` for chords.
pub fn loop_orbit_distance(u: &FourierLoop, v: &FourierLoop) -> f64 {
    let diff = |a: &FourierLoop, b: &FourierLoop| {
        a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    match u.mode {
        LoopMode::Chord => diff(u, v).min(diff(u, &v.z2_flip())),
        LoopMode::Periodic => {
            let n1 = u.q.len();
            let mut w = vec![C64::new(0.0, 0.0); n1];
            for k in -(u.m as i64)..=(u.m as i64) {
                for (j, wj) in w.iter_mut().enumerate() {
                    *wj += v.coeff(k, j) * u.coeff(k, j).conj();
                }
            }
            let s = best_phase(&w, u.q.as_slice());
            match v.rotate(s) {
                Ok(rv) => diff(u, &rv),
                Err(_) => diff(u, v),
            }
        }
    }
}

/// Outcome of [`enumerate_solutions`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Enumeration {
    pub mode: LoopMode,
    pub m: usize,
    pub solutions: Vec<CriticalSolution>,
    /// Representatives of the distinct multiplier classes, ascending.
    pub classes: Vec<f64>,
    pub distinct_classes: usize,
    pub seeds_tried: usize,
    pub converged: usize,
}

/// Eigen-seeds `(k, j)` ordered by `|k|`, then `k`, then `j`.
pub fn eigen_seed_list(m: usize, n1: usize) -> Vec<(i64, usize)> {
    let mut out = Vec::new();
    for a in 0..=(m as i64) {
        for k in if a == 0 { vec![0] } else { vec![a, -a] } {
            for j in 0..n1 {
                out.push((k, j));
            }
        }
    }
    out
}

fn random_seed_loop(rng: &mut ChaCha8Rng, mode: LoopMode, m: usize, q: &WeightVector) -> FourierLoop {
    let mut u = FourierLoop::zeros(mode, m, q);
    let r = mode.reals_per_coeff();
    let n1 = q.len();
    for (i, x) in u.data.iter_mut().enumerate() {
        let k = (i / r / n1) as f64 - m as f64;
        let decay = 1.0 / (1.0 + k * k);
        *x = (rng.random::<f64>() * 2.0 - 1.0) * decay;
    }
    u
}

/// Distinct classes modulo `modulus`, merged within `tol`.
pub fn distinct_classes(values: &[f64], modulus: f64, tol: f64) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().map(|v| v.rem_euclid(modulus)).collect();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for v in sorted {
        if !out.iter().any(|&c| class_distance(c, v, modulus) <= tol) {
            out.push(v);
        }
    }
    out
}

/// Solves from all eigen-seeds `(k, j)`, `|k| <= m` (up to `budget`), then
/// from random seeds until `budget` starts have been made; merges solutions
/// with equal multiplier class whose loops are symmetry-equivalent.
pub fn enumerate_solutions(
    h: &LiftedHamiltonian,
    mode: LoopMode,
    m: usize,
    budget: usize,
    opts: &SolverOptions,
) -> Result<Enumeration> {
    let q = h.weights();
    if m < 2 {
        return Err(Error::arg("enumeration needs truncation order m >= 2"));
    }
    if budget < q.len() {
        return Err(Error::arg(format!("budget must be at least n + 1 = {}", q.len())));
    }
    let mut seeds: Vec<FourierLoop> = eigen_seed_list(m, q.len())
        .into_iter()
        .take(budget)
        .map(|(k, j)| FourierLoop::eigen(mode, m, q, k, j))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while seeds.len() < budget {
        seeds.push(random_seed_loop(&mut rng, mode, m, q));
    }
    let results: Vec<Result<Option<CriticalSolution>>> =
        seeds.par_iter().map(|s| solve_critical(h, s, opts)).collect();
    let mut solutions: Vec<CriticalSolution> = Vec::new();
    let mut converged = 0;
    for r in results {
        let Some(sol) = r? else { continue };
        converged += 1;
        let dup = solutions.iter().any(|o| {
            class_distance(o.lambda_class, sol.lambda_class, o.class_modulus) <= opts.dedupe_tol
                && loop_orbit_distance(&o.path, &sol.path) <= opts.dedupe_tol.sqrt()
        });
        if !dup {
            solutions.push(sol);
        }
    }
    solutions.sort_by(|a, b| {
        a.lambda_class.total_cmp(&b.lambda_class).then_with(|| {
            a.path
                .data
                .iter()
                .zip(&b.path.data)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let lambdas: Vec<f64> = solutions.iter().map(|s| s.lambda).collect();
    let classes = distinct_classes(&lambdas, mode.class_modulus(), opts.dedupe_tol);
    Ok(Enumeration {
        mode,
        m,
        distinct_classes: classes.len(),
        classes,
        solutions,
        seeds_tried: seeds.len(),
        converged,
    })
}

/// Truncation ladder: solves at each order in `orders`, seeding each level
/// with the previous solution padded to the new order. Stops at the first
/// level that fails to converge.
pub fn ladder(
    h: &LiftedHamiltonian,
    seed: &FourierLoop,
    orders: &[usize],
    opts: &SolverOptions,
) -> Result<Vec<CriticalSolution>> {
    let mut out: Vec<CriticalSolution> = Vec::new();
    let mut current = seed.clone();
    for &m in orders {
        let start = current.resize(m);
        match solve_critical(h, &start, opts)? {
            Some(sol) => {
                current = sol.path.clone();
                out.push(sol);
            }
            None => break,
        }
    }
    Ok(out)
}
