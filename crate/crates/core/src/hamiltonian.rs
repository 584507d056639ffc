//! `S^1`-invariant polynomial Hamiltonians and their degree-two homogeneous
//! lift to `C^{n+1}`.
//!
//! A Hamiltonian on `CP^n(q)` is given by a real polynomial
//! `P_t(z) = Σ c_t · z^α z̄^β` whose monomials are invariant under the weighted
//! circle action (`Σ (α_j - β_j) q_j = 0`). The lift is
//! `H_t(z) = 2K_q(z) · P_t(z / sqrt(2K_q(z)))`, `H_t(0) = 0`, which restricts to
//! `P_t` on the weighted sphere and is positively homogeneous of degree two.
//!
//! Conventions: gradients are real gradients written as complex vectors,
//! `∇F = (∂F/∂x_j + i ∂F/∂y_j)_j = 2 ∂F/∂z̄`, and the Hamiltonian vector field
//! is `X_F = i ∇F`. With these, `X_{K_q}(z) = (i q_j z_j)_j`, whose time-`s`
//! flow is exactly `A_s^q`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{moment_map_unchecked, C64};
use crate::weights::WeightVector;

const TAU: f64 = 2.0 * PI;

/// One Fourier term `amp · cos(2π mode t)` or `amp · sin(2π mode t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TimeModeRepr", into = "TimeModeRepr")]
pub enum TimeMode {
    Cos { mode: u32, amp: f64 },
    Sin { mode: u32, amp: f64 },
}

#[derive(Serialize, Deserialize)]
struct TimeModeRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cos: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sin: Option<u32>,
    amp: f64,
}

impl TryFrom<TimeModeRepr> for TimeMode {
    type Error = String;

    fn try_from(r: TimeModeRepr) -> std::result::Result<Self, String> {
        match (r.cos, r.sin) {
            (Some(mode), None) => Ok(TimeMode::Cos { mode, amp: r.amp }),
            (None, Some(mode)) => Ok(TimeMode::Sin { mode, amp: r.amp }),
            _ => Err("a time mode needs exactly one of \"cos\" or \"sin\"".into()),
        }
    }
}

impl From<TimeMode> for TimeModeRepr {
    fn from(m: TimeMode) -> Self {
        match m {
            TimeMode::Cos { mode, amp } => TimeModeRepr { cos: Some(mode), sin: None, amp },
            TimeMode::Sin { mode, amp } => TimeModeRepr { cos: None, sin: Some(mode), amp },
        }
    }
}

impl TimeMode {
    pub fn constant(amp: f64) -> Self {
        TimeMode::Cos { mode: 0, amp }
    }

    fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeMode::Cos { mode, amp } => amp * (TAU * mode as f64 * t).cos(),
            TimeMode::Sin { mode, amp } => amp * (TAU * mode as f64 * t).sin(),
        }
    }

    fn mode(&self) -> u32 {
        match *self {
            TimeMode::Cos { mode, .. } | TimeMode::Sin { mode, .. } => mode,
        }
    }

    fn is_constant(&self) -> bool {
        match *self {
            TimeMode::Cos { mode, .. } => mode == 0,
            TimeMode::Sin { mode, amp } => mode == 0 || amp == 0.0,
        }
    }
}

fn default_time() -> Vec<TimeMode> {
    vec![TimeMode::constant(1.0)]
}

/// `c(t) · z^α z̄^β` with a real 1-periodic coefficient `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantMonomial {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    /// Defaults to the constant 1 when absent.
    #[serde(default = "default_time")]
    pub time: Vec<TimeMode>,
}

impl InvariantMonomial {
    pub fn new(alpha: Vec<u32>, beta: Vec<u32>, time: Vec<TimeMode>) -> Self {
        Self { alpha, beta, time }
    }

    /// The real pair `c(t) (z^α z̄^β + z^β z̄^α)`; a single term when `α = β`.
    pub fn real_pair(alpha: Vec<u32>, beta: Vec<u32>, time: Vec<TimeMode>) -> Vec<Self> {
        if alpha == beta {
            vec![Self::new(alpha, beta, time)]
        } else {
            vec![Self::new(alpha.clone(), beta.clone(), time.clone()), Self::new(beta, alpha, time)]
        }
    }

    /// `Σ_j (α_j - β_j) q_j`; zero for invariant terms.
    pub fn weighted_degree(&self, q: &WeightVector) -> i64 {
        self.alpha
            .iter()
            .zip(&self.beta)
            .zip(q.iter())
            .map(|((&a, &b), w)| (a as i64 - b as i64) * w as i64)
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.alpha.iter().sum::<u32>() + self.beta.iter().sum::<u32>()
    }

    pub fn coefficient(&self, t: f64) -> f64 {
        self.time.iter().map(|m| m.eval(t)).sum()
    }

    fn monomial(&self, z: &[C64]) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for ((c, &a), &b) in z.iter().zip(&self.alpha).zip(&self.beta) {
            acc *= c.powu(a) * c.conj().powu(b);
        }
        acc
    }

    /// `∂/∂z̄_j (z^α z̄^β)` for every `j`, added into `out` scaled by `scale`.
    fn add_dbar(&self, z: &[C64], scale: f64, out: &mut [C64]) {
        for j in 0..z.len() {
            let bj = self.beta[j];
            if bj == 0 {
                continue;
            }
            let mut acc = C64::new(bj as f64 * scale, 0.0);
            for (i, c) in z.iter().enumerate() {
                let b = if i == j { bj - 1 } else { self.beta[i] };
                acc *= c.powu(self.alpha[i]) * c.conj().powu(b);
            }
            out[j] += acc;
        }
    }
}

/// On-file Hamiltonian description: `{ "weights": [..], "terms": [..] }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub weights: WeightVector,
    pub terms: Vec<InvariantMonomial>,
}

impl HamiltonianSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn lift(&self) -> Result<LiftedHamiltonian> {
        LiftedHamiltonian::lift(self.terms.clone(), &self.weights)
    }
}

/// Per-term invariance report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermCheck {
    pub index: usize,
    pub degree: u32,
    pub weighted_degree: i64,
    pub invariant: bool,
}

pub fn check_terms(terms: &[InvariantMonomial], q: &WeightVector) -> Vec<TermCheck> {
    terms
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let weighted_degree = t.weighted_degree(q);
            TermCheck { index, degree: t.degree(), weighted_degree, invariant: weighted_degree == 0 }
        })
        .collect()
}

/// Sampled extrema of `h_t` on `CP^n(q) × [0, 1]` and the derived bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HamiltonianBound {
    pub min: f64,
    pub max: f64,
    /// Constant added so that the shifted Hamiltonian is `>= 0`.
    pub shift: f64,
    /// `2 · sup (h + shift)`.
    pub raw: f64,
    /// `raw` inflated by 5%; the value handed to the counting certificate.
    pub certified: f64,
}

/// Degree-two homogeneous lift of an invariant polynomial Hamiltonian.
#[derive(Debug)]
pub struct LiftedHamiltonian {
    q: WeightVector,
    terms: Vec<InvariantMonomial>,
    cutoff: bool,
    bound: OnceLock<HamiltonianBound>,
}

impl Clone for LiftedHamiltonian {
    fn clone(&self) -> Self {
        Self {
            q: self.q.clone(),
            terms: self.terms.clone(),
            cutoff: self.cutoff,
            bound: self.bound.clone(),
        }
    }
}

impl LiftedHamiltonian {
    /// Validates invariance and real-valuedness, then builds the lift.
    pub fn lift(terms: Vec<InvariantMonomial>, q: &WeightVector) -> Result<Self> {
        for (index, t) in terms.iter().enumerate() {
            if t.alpha.len() != q.len() || t.beta.len() != q.len() {
                return Err(Error::arg(format!(
                    "term {index}: multi-indices must have length {}",
                    q.len()
                )));
            }
            let weighted_degree = t.weighted_degree(q);
            if weighted_degree != 0 {
                return Err(Error::NotInvariant { index, weighted_degree });
            }
            if t.time.iter().any(|m| match m {
                TimeMode::Cos { amp, .. } | TimeMode::Sin { amp, .. } => !amp.is_finite(),
            }) {
                return Err(Error::arg(format!("term {index}: non-finite amplitude")));
            }
        }
        for (index, t) in terms.iter().enumerate() {
            if t.alpha == t.beta {
                continue;
            }
            let count = |a: &[u32], b: &[u32], time: &[TimeMode]| {
                terms.iter().filter(|s| s.alpha == a && s.beta == b && s.time == time).count()
            };
            if count(&t.beta, &t.alpha, &t.time) != count(&t.alpha, &t.beta, &t.time) {
                return Err(Error::arg(format!(
                    "term {index}: missing conjugate partner (alpha and beta swapped, same \
                     time coefficient); the Hamiltonian would not be real"
                )));
            }
        }
        Ok(Self { q: q.clone(), terms, cutoff: false, bound: OnceLock::new() })
    }

    /// The zero Hamiltonian.
    pub fn zero(q: &WeightVector) -> Self {
        Self { q: q.clone(), terms: Vec::new(), cutoff: false, bound: OnceLock::new() }
    }

    /// Multiplies the lift by a `C^2` radial cutoff equal to 1 for `K_q <= 1`
    /// and 0 for `K_q >= 2`. Off by default; inactive near the sphere.
    pub fn with_cutoff(mut self, on: bool) -> Self {
        self.cutoff = on;
        self
    }

    pub fn weights(&self) -> &WeightVector {
        &self.q
    }

    pub fn terms(&self) -> &[InvariantMonomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|t| t.time.iter().all(TimeMode::is_constant))
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(InvariantMonomial::degree).max().unwrap_or(0)
    }

    pub fn max_time_mode(&self) -> u32 {
        self.terms.iter().flat_map(|t| t.time.iter().map(TimeMode::mode)).max().unwrap_or(0)
    }

    /// Whether every term already has total degree two (lift is the identity).
    pub fn is_quadratic(&self) -> bool {
        self.terms.iter().all(|t| t.degree() == 2)
    }

    /// `P_t(z)`, the polynomial itself without homogenization.
    pub fn polynomial(&self, z: &[C64], t: f64) -> f64 {
        self.terms.iter().map(|term| term.coefficient(t) * term.monomial(z).re).sum()
    }

    /// `H_t(z)`.
    pub fn evaluate(&self, z: &[C64], t: f64) -> f64 {
        let k = moment_map_unchecked(z, self.q.as_slice());
        if k == 0.0 {
            return 0.0;
        }
        let rho = 2.0 * k;
        let mut value = 0.0;
        for term in &self.terms {
            let c = term.coefficient(t);
            if c == 0.0 {
                continue;
            }
            let d = term.degree() as f64;
            value += c * term.monomial(z).re * rho.powf(1.0 - 0.5 * d);
        }
        if self.cutoff {
            value *= cutoff_value(k);
        }
        value
    }

    /// Real gradient `∇H_t(z)` as a complex vector; zero at the origin.
    pub fn gradient(&self, z: &[C64], t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); z.len()];
        self.add_gradient(z, t, 1.0, &mut out);
        out
    }

    /// `out += scale · ∇H_t(z)`.
    pub(crate) fn add_gradient(&self, z: &[C64], t: f64, scale: f64, out: &mut [C64]) {
        let q = self.q.as_slice();
        let k = moment_map_unchecked(z, q);
        if k == 0.0 || self.terms.is_empty() {
            return;
        }
        let rho = 2.0 * k;
        let cut = if self.cutoff { cutoff_value(k) } else { 1.0 };
        // Σ over terms of the radial factor derivative times P: coefficient of ∇ρ
        let mut radial = 0.0;
        let mut value = 0.0;
        for term in &self.terms {
            let c = term.coefficient(t);
            if c == 0.0 {
                continue;
            }
            let d = term.degree() as f64;
            let phi = rho.powf(1.0 - 0.5 * d);
            term.add_dbar(z, 2.0 * c * phi * cut * scale, out);
            let p = c * term.monomial(z).re;
            radial += p * (1.0 - 0.5 * d) * rho.powf(-0.5 * d);
            value += p * phi;
        }
        // ∇ρ = 2 ∇K and ∇K = (q_j z_j)
        let mut coef = 2.0 * radial * cut;
        if self.cutoff {
            coef += value * cutoff_derivative(k);
        }
        for ((o, c), &w) in out.iter_mut().zip(z).zip(q) {
            *o += c * (w as f64 * coef * scale);
        }
    }

    /// Sampled extrema and the bound `M` used by the counting certificate.
    pub fn bound(&self) -> HamiltonianBound {
        *self.bound.get_or_init(|| estimate_bound(self))
    }

    /// Shorthand for `bound().certified`.
    pub fn hamiltonian_bound(&self) -> f64 {
        self.bound().certified
    }
}

fn cutoff_value(k: f64) -> f64 {
    if k <= 1.0 {
        1.0
    } else if k >= 2.0 {
        0.0
    } else {
        let x = k - 1.0;
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

fn cutoff_derivative(k: f64) -> f64 {
    if k <= 1.0 || k >= 2.0 {
        0.0
    } else {
        let x = k - 1.0;
        -30.0 * x * x * (1.0 - x) * (1.0 - x)
    }
}

/// `Σ a_j |z_j|^2`; its lift is itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticHamiltonian {
    pub a: Vec<f64>,
}

impl QuadraticHamiltonian {
    pub fn new(a: Vec<f64>) -> Self {
        Self { a }
    }

    pub fn terms(&self) -> Vec<InvariantMonomial> {
        let len = self.a.len();
        self.a
            .iter()
            .enumerate()
            .map(|(j, &aj)| {
                let mut e = vec![0; len];
                e[j] = 1;
                InvariantMonomial::new(e.clone(), e, vec![TimeMode::constant(aj)])
            })
            .collect()
    }

    pub fn lift(&self, q: &WeightVector) -> Result<LiftedHamiltonian> {
        if self.a.len() != q.len() {
            return Err(Error::arg(format!(
                "quadratic coefficients have length {} but there are {} weights",
                self.a.len(),
                q.len()
            )));
        }
        LiftedHamiltonian::lift(self.terms(), q)
    }

    pub fn evaluate(&self, z: &[C64]) -> f64 {
        self.a.iter().zip(z).map(|(a, c)| a * c.norm_sqr()).sum()
    }
}

fn random_sphere_point(rng: &mut ChaCha8Rng, q: &[u64]) -> Vec<C64> {
    loop {
        let z: Vec<C64> = q
            .iter()
            .map(|_| C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let k = moment_map_unchecked(&z, q);
        if k > 1e-6 {
            let r = (2.0 * k).sqrt();
            return z.into_iter().map(|c| c / r).collect();
        }
    }
}

fn project_to_sphere(z: &mut [C64], q: &[u64]) {
    let r = (2.0 * moment_map_unchecked(z, q)).sqrt();
    for c in z.iter_mut() {
        *c /= r;
    }
}

/// Projected gradient ascent of `sign · h_t` on the weighted sphere at fixed `t`.
fn climb(h: &LiftedHamiltonian, z: &mut Vec<C64>, t: f64, sign: f64) -> f64 {
    let q = h.q.as_slice();
    let mut val = sign * h.evaluate(z, t);
    let mut step = 0.1;
    for _ in 0..200 {
        let g = h.gradient(z, t);
        // remove the component along ∇K
        let nk: Vec<C64> = z.iter().zip(q).map(|(c, &w)| c * w as f64).collect();
        let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum::<f64>();
        let coef = dot(&g, &nk) / dot(&nk, &nk).max(1e-300);
        let dir: Vec<C64> = g.iter().zip(&nk).map(|(a, b)| (a - b * coef) * sign).collect();
        let dn = dot(&dir, &dir).sqrt();
        if dn < 1e-13 {
            break;
        }
        let mut improved = false;
        while step > 1e-14 {
            let mut trial: Vec<C64> = z.iter().zip(&dir).map(|(a, d)| a + d * (step / dn)).collect();
            project_to_sphere(&mut trial, q);
            let tv = sign * h.evaluate(&trial, t);
            if tv > val {
                *z = trial;
                val = tv;
                step *= 2.0;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    val
}

fn estimate_bound(h: &LiftedHamiltonian) -> HamiltonianBound {
    if h.is_zero() {
        return HamiltonianBound { min: 0.0, max: 0.0, shift: 0.0, raw: 0.0, certified: 0.0 };
    }
    let q = h.q.as_slice();
    let n1 = q.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_b0d);
    let mut points: Vec<Vec<C64>> = (0..n1)
        .map(|j| {
            let mut z = vec![C64::new(0.0, 0.0); n1];
            z[j] = C64::new(1.0 / (q[j] as f64).sqrt(), 0.0);
            z
        })
        .collect();
    points.extend((0..256 * n1).map(|_| random_sphere_point(&mut rng, q)));
    let times: Vec<f64> = if h.is_autonomous() {
        vec![0.0]
    } else {
        let nt = 16 * (h.max_time_mode() as usize + 1);
        (0..nt).map(|i| i as f64 / nt as f64).collect()
    };
    let dt = if times.len() > 1 { times[1] } else { 0.0 };

    let mut samples: Vec<(f64, usize, f64)> = Vec::with_capacity(points.len() * times.len());
    for (pi, z) in points.iter().enumerate() {
        for &t in &times {
            samples.push((h.evaluate(z, t), pi, t));
        }
    }
    let mut extreme = |sign: f64| -> f64 {
        samples.sort_by(|a, b| (sign * b.0).total_cmp(&(sign * a.0)));
        let mut best = sign * samples[0].0;
        for &(_, pi, t0) in samples.iter().take(8) {
            let mut z = points[pi].clone();
            let mut t = t0;
            let mut v = climb(h, &mut z, t, sign);
            if dt > 0.0 {
                for _ in 0..3 {
                    t = golden(|s| sign * h.evaluate(&z, s), t - dt, t + dt);
                    v = climb(h, &mut z, t, sign);
                }
            }
            best = best.max(v);
        }
        sign * best
    };
    let max = extreme(1.0);
    let min = extreme(-1.0);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let raw = 2.0 * (max + shift);
    HamiltonianBound { min, max, shift, raw, certified: 1.05 * raw }
}

fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circle_action;

    fn w(q: &[u64]) -> WeightVector {
        WeightVector::new(q.to_vec()).unwrap()
    }

    fn quartic(q: &WeightVector, j: usize, amp: f64) -> InvariantMonomial {
        let mut e = vec![0; q.len()];
        e[j] = 2;
        InvariantMonomial::new(e.clone(), e, vec![TimeMode::constant(amp)])
    }

    /// `z_0^{q_1} z̄_1^{q_0}` plus its conjugate, a genuinely mixed invariant term.
    fn mixed(q: &WeightVector, time: Vec<TimeMode>) -> Vec<InvariantMonomial> {
        let mut a = vec![0; q.len()];
        let mut b = vec![0; q.len()];
        a[0] = q.get(1) as u32;
        b[1] = q.get(0) as u32;
        InvariantMonomial::real_pair(a, b, time)
    }

    fn sample(rng: &mut ChaCha8Rng, n1: usize) -> Vec<C64> {
        (0..n1).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    fn test_hamiltonian() -> LiftedHamiltonian {
        let q = w(&[1, 2, 3]);
        let mut terms = QuadraticHamiltonian::new(vec![0.3, -0.2, 0.5]).terms();
        terms.push(quartic(&q, 1, 0.7));
        terms.extend(mixed(&q, vec![TimeMode::Cos { mode: 1, amp: 0.4 }, TimeMode::Sin { mode: 2, amp: -0.3 }]));
        LiftedHamiltonian::lift(terms, &q).unwrap()
    }

    #[test]
    fn quadratic_lift_is_identity() {
        let q = w(&[2, 3]);
        let qh = QuadraticHamiltonian::new(vec![0.4, -1.1]);
        let h = qh.lift(&q).unwrap();
        assert!(h.is_quadratic());
        let z = [C64::new(0.3, -1.2), C64::new(2.0, 0.5)];
        assert!((h.evaluate(&z, 0.37) - qh.evaluate(&z)).abs() < 1e-14);
        let g = h.gradient(&z, 0.0);
        for j in 0..2 {
            assert!((g[j] - z[j] * (2.0 * qh.a[j])).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_lifts_to_moment_map() {
        let q = w(&[1, 4, 5]);
        let c = 0.8;
        let h = LiftedHamiltonian::lift(vec![InvariantMonomial::new(vec![0; 3], vec![0; 3], vec![TimeMode::constant(c)])], &q)
            .unwrap();
        let z = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.7, 0.0)];
        let k = crate::geometry::moment_map(&z, &q).unwrap();
        assert!((h.evaluate(&z, 0.0) - 2.0 * c * k).abs() < 1e-14);
        let g = h.gradient(&z, 0.0);
        for j in 0..3 {
            assert!((g[j] - z[j] * (2.0 * c * q.get(j) as f64)).norm() < 1e-13);
        }
    }

    #[test]
    fn direct_evaluation_example() {
        let h = QuadraticHamiltonian::new(vec![1.0, 2.0]).lift(&w(&[1, 1])).unwrap();
        assert_eq!(h.evaluate(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 0.9), 1.0);
        assert_eq!(h.evaluate(&[C64::new(0.0, 0.0); 2], 0.0), 0.0);
    }

    #[test]
    fn rejects_non_invariant_and_unpaired_terms() {
        let q = w(&[1, 2]);
        let bad = InvariantMonomial::new(vec![1, 0], vec![0, 1], vec![TimeMode::constant(1.0)]);
        assert!(matches!(
            LiftedHamiltonian::lift(vec![bad], &q),
            Err(Error::NotInvariant { index: 0, weighted_degree: -1 })
        ));
        let lone = InvariantMonomial::new(vec![2, 0], vec![0, 1], vec![TimeMode::constant(1.0)]);
        assert!(LiftedHamiltonian::lift(vec![lone], &q).is_err());
        let pair = InvariantMonomial::real_pair(vec![2, 0], vec![0, 1], vec![TimeMode::constant(1.0)]);
        assert!(LiftedHamiltonian::lift(pair, &q).is_ok());
    }

    #[test]
    fn sphere_value_is_the_polynomial() {
        let h = test_hamiltonian();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let z = random_sphere_point(&mut rng, h.weights().as_slice());
            let t = rng.random::<f64>();
            let (a, b) = (h.evaluate(&z, t), h.polynomial(&z, t));
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn invariance_homogeneity_euler_and_poisson() {
        let h = test_hamiltonian();
        let q = h.weights().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let z = sample(&mut rng, 3);
            let t = rng.random::<f64>();
            let s = rng.random::<f64>() * 10.0;
            let v = h.evaluate(&z, t);
            let rot = circle_action(s, &z, &q);
            assert!((h.evaluate(&rot, t) - v).abs() <= 1e-10 * (1.0 + v.abs()));
            let r = 0.1 + 3.0 * rng.random::<f64>();
            let scaled: Vec<C64> = z.iter().map(|c| c * r).collect();
            assert!((h.evaluate(&scaled, t) - r * r * v).abs() <= 1e-10 * (1.0 + r * r * v.abs()));
            let twice: Vec<C64> = z.iter().map(|c| c * 2.0).collect();
            assert!((h.evaluate(&twice, t) - 4.0 * v).abs() <= 1e-10 * (1.0 + v.abs()));

            let g = h.gradient(&z, t);
            let euler: f64 = g.iter().zip(&z).map(|(a, b)| (a * b.conj()).re).sum();
            let scale = g.iter().zip(&z).map(|(a, b)| a.norm() * b.norm()).sum::<f64>();
            assert!((euler - 2.0 * v).abs() <= 1e-8 * (1.0 + scale));
            let xk: Vec<C64> = z.iter().zip(q.iter()).map(|(c, w)| C64::i() * c * w as f64).collect();
            let pb: f64 = g.iter().zip(&xk).map(|(a, b)| (a * b.conj()).re).sum();
            assert!(pb.abs() <= 1e-8 * (1.0 + scale));
        }
    }

    fn fd_gradient(h: &LiftedHamiltonian, z: &[C64], t: f64, step: f64) -> Vec<C64> {
        (0..z.len())
            .map(|j| {
                let mut out = [0.0; 2];
                for (part, dir) in [C64::new(1.0, 0.0), C64::i()].into_iter().enumerate() {
                    let mut zp = z.to_vec();
                    let mut zm = z.to_vec();
                    zp[j] += dir * step;
                    zm[j] -= dir * step;
                    out[part] = (h.evaluate(&zp, t) - h.evaluate(&zm, t)) / (2.0 * step);
                }
                C64::new(out[0], out[1])
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for cutoff in [false, true] {
            let h = test_hamiltonian().with_cutoff(cutoff);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..100 {
                let mut z = sample(&mut rng, 3);
                // exercise the cutoff annulus too
                let grow = 1.0 + 2.0 * rng.random::<f64>();
                z.iter_mut().for_each(|c| *c *= grow);
                let t = rng.random::<f64>();
                let g = h.gradient(&z, t);
                let fd = fd_gradient(&h, &z, t, 1e-6);
                let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                let nrm: f64 = g.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                assert!(err <= 1e-6 * nrm.max(1.0), "err {err} norm {nrm}");
            }
        }
    }

    #[test]
    fn cutoff_is_inactive_on_the_sphere() {
        let h = test_hamiltonian();
        let hc = h.clone().with_cutoff(true);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = random_sphere_point(&mut rng, h.weights().as_slice());
        assert_eq!(h.evaluate(&z, 0.2), hc.evaluate(&z, 0.2));
        let far: Vec<C64> = z.iter().map(|c| c * 3.0).collect();
        assert_eq!(hc.evaluate(&far, 0.2), 0.0);
    }

    #[test]
    fn bound_examples() {
        let q = w(&[1, 1]);
        assert_eq!(LiftedHamiltonian::zero(&q).hamiltonian_bound(), 0.0);

        let h = QuadraticHamiltonian::new(vec![0.5, 1.5]).lift(&q).unwrap();
        let b = h.bound();
        assert!((b.raw - 3.0).abs() < 1e-9, "{b:?}");
        assert!((b.certified - 1.05 * 3.0).abs() < 1e-9);

        // sin(2πt) · 1.5|z_1|^2: h ranges over [-1.5, 1.5], shift 1.5
        let terms = vec![InvariantMonomial::new(vec![0, 1], vec![0, 1], vec![TimeMode::Sin { mode: 1, amp: 1.5 }])];
        let h = LiftedHamiltonian::lift(terms, &q).unwrap();
        let b = h.bound();
        assert!((b.max - 1.5).abs() < 1e-8 && (b.min + 1.5).abs() < 1e-8, "{b:?}");
        assert!((b.raw - 6.0).abs() < 1e-7);
    }

    #[test]
    fn spec_file_round_trip() {
        let text = r#"{"weights": [2, 3], "terms": [
            {"alpha": [1, 0], "beta": [1, 0]},
            {"alpha": [3, 0], "beta": [0, 2], "time": [{"cos": 1, "amp": 0.1}]},
            {"alpha": [0, 2], "beta": [3, 0], "time": [{"cos": 1, "amp": 0.1}]}
        ]}"#;
        let spec = HamiltonianSpec::from_json(text).unwrap();
        assert_eq!(spec.terms[0].time, vec![TimeMode::constant(1.0)]);
        let h = spec.lift().unwrap();
        assert_eq!(h.max_degree(), 5);
        assert_eq!(h.max_time_mode(), 1);
        assert!(!h.is_autonomous());
        let checks = check_terms(&spec.terms, &spec.weights);
        assert!(checks.iter().all(|c| c.invariant));
        let back: HamiltonianSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(HamiltonianSpec::from_json(r#"{"weights":[1,1],"terms":[{"alpha":[1,0],"beta":[1,0],"time":[{"amp":1}]}]}"#).is_err());
    }
}
