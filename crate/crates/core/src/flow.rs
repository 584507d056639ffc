//! Lifted Hamiltonian flow `ż = X_{H_t + λK_q}(z) = i(∇H_t(z) + λ q∘z)`, the
//! induced time-one map on `CP^n(q)`, and fixed-point detection.
//!
//! A fixed point `[p]` of the time-one map `φ_1` is recorded together with the
//! phase `s*` satisfying `A_{s*} φ̃_1(p) = p`; re-running the flow of
//! `H + s* K_q` from `p` then closes up, so `s*` is the Lagrange multiplier of
//! the corresponding closed loop. Two records describe the same fixed point
//! only if their multipliers agree modulo `2π`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, moment_map_unchecked, orbit_distance, rotate, SpherePoint, C64};
use crate::hamiltonian::LiftedHamiltonian;
use crate::linalg::pinv_solve;
use crate::weights::WeightVector;

const TAU: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Maximum `|2K_q - 1|` before a sphere-started run is flagged.
    pub tol_conserve: f64,
    /// Rescale onto the weighted sphere after every accepted step.
    pub project: bool,
    /// Keep every accepted step in [`FlowResult::trajectory`].
    pub record: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-13,
            initial_step: 1e-2,
            min_step: 1e-12,
            max_steps: 1_000_000,
            tol_conserve: 1e-9,
            project: true,
            record: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowResult {
    /// Accepted `(t, z)` pairs when recording, otherwise start and end only.
    pub trajectory: Vec<(f64, Vec<C64>)>,
    pub endpoint: Vec<C64>,
    /// `max |2K_q(z(t)) - 1|`, measured before each renormalization.
    pub kq_drift: f64,
    /// `max |H(z(t)) - H(z(0))|` for autonomous Hamiltonians.
    pub h_drift: Option<f64>,
    pub conservative: bool,
    pub steps: usize,
    pub rejected: usize,
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn vector_field(h: &LiftedHamiltonian, lambda: f64, t: f64, z: &[C64], out: &mut Vec<C64>) {
    let q = h.weights().as_slice();
    out.clear();
    out.extend(z.iter().zip(q).map(|(c, &w)| c * (lambda * w as f64)));
    h.add_gradient(z, t, 1.0, out);
    for v in out.iter_mut() {
        *v = C64::new(-v.im, v.re);
    }
}

fn combine(z: &[C64], h: f64, terms: &[(f64, &[C64])]) -> Vec<C64> {
    let mut out = z.to_vec();
    for &(coef, k) in terms {
        if coef == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(k) {
            *o += v * (h * coef);
        }
    }
    out
}

/// Integrates the lifted flow of `H + λ K_q` from `z0` over `[0, t_end]`.
pub fn integrate_span(
    h: &LiftedHamiltonian,
    lambda: f64,
    z0: &[C64],
    t_end: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    let q = h.weights().as_slice();
    if z0.len() != q.len() {
        return Err(Error::arg("start point and weights differ in length"));
    }
    let on_sphere = (2.0 * moment_map_unchecked(z0, q) - 1.0).abs() <= 1e-10;
    let autonomous = h.is_autonomous();
    let h0 = h.evaluate(z0, 0.0);

    let mut t = 0.0;
    let mut z = z0.to_vec();
    let mut step = opts.initial_step.min(t_end);
    let mut trajectory = vec![(0.0, z.clone())];
    let mut kq_drift: f64 = 0.0;
    let mut h_drift: f64 = 0.0;
    let (mut steps, mut rejected) = (0, 0);
    let mut k1 = Vec::with_capacity(z.len());
    vector_field(h, lambda, t, &z, &mut k1);
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());

    while t < t_end {
        if steps + rejected >= opts.max_steps {
            return Err(Error::Integration { t, reason: "step budget exhausted".into(), last_state: z });
        }
        if t + step > t_end {
            step = t_end - t;
        }
        let y2 = combine(&z, step, &[(A21, &k1)]);
        vector_field(h, lambda, t + C2 * step, &y2, &mut k2);
        let y3 = combine(&z, step, &[(A31, &k1), (A32, &k2)]);
        vector_field(h, lambda, t + C3 * step, &y3, &mut k3);
        let y4 = combine(&z, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        vector_field(h, lambda, t + C4 * step, &y4, &mut k4);
        let y5 = combine(&z, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        vector_field(h, lambda, t + C5 * step, &y5, &mut k5);
        let y6 = combine(&z, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        vector_field(h, lambda, t + step, &y6, &mut k6);
        let y_new = combine(&z, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        vector_field(h, lambda, t + step, &y_new, &mut k7);

        let mut err: f64 = 0.0;
        for i in 0..z.len() {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
            let sc = opts.atol + opts.rtol * z[i].norm().max(y_new[i].norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            return Err(Error::Integration { t, reason: "non-finite state".into(), last_state: z });
        }
        if err <= 1.0 {
            t += step;
            steps += 1;
            z = y_new;
            if on_sphere {
                let k = moment_map_unchecked(&z, q);
                kq_drift = kq_drift.max((2.0 * k - 1.0).abs());
                if opts.project {
                    let r = (2.0 * k).sqrt();
                    for c in z.iter_mut() {
                        *c /= r;
                    }
                }
            }
            if opts.project && on_sphere {
                vector_field(h, lambda, t, &z, &mut k1);
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            if autonomous {
                h_drift = h_drift.max((h.evaluate(&z, t) - h0).abs());
            }
            if opts.record {
                trajectory.push((t, z.clone()));
            }
        } else {
            rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        step *= factor;
        if step < opts.min_step && t < t_end {
            return Err(Error::Integration { t, reason: "step size underflow".into(), last_state: z });
        }
    }
    if !opts.record {
        trajectory.push((t, z.clone()));
    }
    Ok(FlowResult {
        trajectory,
        endpoint: z,
        kq_drift,
        h_drift: autonomous.then_some(h_drift),
        conservative: !on_sphere || kq_drift <= opts.tol_conserve,
        steps,
        rejected,
    })
}

/// Time-one flow of `H + λ K_q` from a point of the weighted sphere.
pub fn integrate(h: &LiftedHamiltonian, lambda: f64, z0: &SpherePoint, opts: &FlowOptions) -> Result<FlowResult> {
    integrate_span(h, lambda, z0, 1.0, opts)
}

/// Lift of the time-one map `φ_1` of `h_t`.
pub fn time_one_map(h: &LiftedHamiltonian, p: &SpherePoint, opts: &FlowOptions) -> Result<SpherePoint> {
    let res = integrate(h, 0.0, p, opts)?;
    Ok(SpherePoint::new_unchecked(res.endpoint))
}

/// Exact flow of `Σ a_j |z_j|^2 + λ K_q` at time `t`:
/// `z_j(t) = e^{i(2a_j + λ q_j) t} z_j(0)`.
pub fn quadratic_flow(a: &[f64], q: &WeightVector, lambda: f64, z0: &[C64], t: f64) -> Vec<C64> {
    z0.iter()
        .zip(a)
        .zip(q.iter())
        .map(|((c, &aj), w)| c * C64::from_polar(1.0, (2.0 * aj + lambda * w as f64) * t))
        .collect()
}

/// A fixed point of `φ_1` on `CP^n(q)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointRecord {
    /// Representative on the weighted sphere.
    pub rep: SpherePoint,
    /// Multiplier `s*` with `A_{s*} φ̃_1(rep) = rep`, in `[0, 2π)`.
    pub lambda: f64,
    pub lambda_class: f64,
    /// Orbit distance between `φ̃_1(rep)` and `rep`.
    pub residual: f64,
}

/// Circular distance between two classes modulo `modulus`.
pub fn class_distance(a: f64, b: f64, modulus: f64) -> f64 {
    let d = (a - b).rem_euclid(modulus);
    d.min(modulus - d)
}

impl FixedPointRecord {
    pub fn same_as(&self, other: &Self, q: &WeightVector, tol_orbit: f64, tol_class: f64) -> bool {
        class_distance(self.lambda_class, other.lambda_class, TAU) <= tol_class
            && orbit_distance(&self.rep, &other.rep, q).distance <= tol_orbit
    }
}

fn normalize_class(x: f64, modulus: f64) -> f64 {
    let r = x.rem_euclid(modulus);
    if r >= modulus - 1e-13 {
        0.0
    } else {
        r
    }
}

/// Phases `s` with `e^{i q_j s} e^{2i a_j} = 1`, in `[0, 2π)`.
fn closing_phases(aj: f64, qj: u64) -> Vec<f64> {
    let base = (-2.0 * aj).rem_euclid(TAU) / qj as f64;
    (0..qj).map(|k| base + TAU * k as f64 / qj as f64).collect()
}

/// Index pairs `(i, j)` (0-based) for which some unit `α` satisfies both
/// `α^{q_i} = e^{2ia_i}` and `α^{q_j} = e^{2ia_j}` within `tol`; then the
/// whole line through `ε_i, ε_j` consists of fixed points.
pub fn resonant_pairs(a: &[f64], q: &WeightVector, tol: f64) -> Vec<(usize, usize)> {
    let phases: Vec<Vec<f64>> = a.iter().zip(q.iter()).map(|(&aj, w)| closing_phases(aj, w)).collect();
    let mut out = Vec::new();
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let hit = phases[i]
                .iter()
                .any(|&x| phases[j].iter().any(|&y| class_distance(x, y, TAU) <= tol));
            if hit {
                out.push((i, j));
            }
        }
    }
    out
}

/// Fixed points of the time-one map of `Σ a_j |z_j|^2` on `CP^n(q)`.
///
/// For generic `a` these are exactly the `n + 1` coordinate points.
pub fn quadratic_fixed_points(a: &[f64], q: &WeightVector, tol_generic: f64) -> Result<Vec<FixedPointRecord>> {
    if a.len() != q.len() {
        return Err(Error::arg("coefficient and weight lengths differ"));
    }
    let pairs = resonant_pairs(a, q, tol_generic);
    if !pairs.is_empty() {
        return Err(Error::NonGeneric { pairs });
    }
    Ok((0..q.len())
        .map(|j| {
            let lambda = normalize_class((-2.0 * a[j]).rem_euclid(TAU) / q.get(j) as f64, TAU);
            FixedPointRecord { rep: SpherePoint::coordinate(q, j), lambda, lambda_class: lambda, residual: 0.0 }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPointOptions {
    pub flow: FlowOptions,
    /// Accept a fixed point when the orbit distance is at most this.
    pub tol_fix: f64,
    pub max_iter: usize,
    /// Finite-difference step for the Jacobian.
    pub fd_step: f64,
    /// Orbit and class tolerance when merging records.
    pub merge_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { flow: FlowOptions::default(), tol_fix: 1e-7, max_iter: 50, fd_step: 1e-6, merge_tol: 1e-6 }
    }
}

fn to_real(p: &[C64], s: f64) -> DVector<f64> {
    let mut v = DVector::zeros(2 * p.len() + 1);
    for (i, c) in p.iter().enumerate() {
        v[2 * i] = c.re;
        v[2 * i + 1] = c.im;
    }
    v[2 * p.len()] = s;
    v
}

fn from_real(v: &DVector<f64>, len: usize) -> (Vec<C64>, f64) {
    let p = (0..len).map(|i| C64::new(v[2 * i], v[2 * i + 1])).collect();
    (p, v[2 * len])
}

fn residual_vec(h: &LiftedHamiltonian, p: &[C64], s: f64, opts: &FlowOptions) -> Result<DVector<f64>> {
    let end = integrate_span(h, 0.0, p, 1.0, opts)?.endpoint;
    let rot = rotate(s, &end, h.weights().as_slice());
    let mut v = DVector::zeros(2 * p.len());
    for (i, (a, b)) in rot.iter().zip(p).enumerate() {
        let d = a - b;
        v[2 * i] = d.re;
        v[2 * i + 1] = d.im;
    }
    Ok(v)
}

fn record_at(h: &LiftedHamiltonian, p: Vec<C64>, opts: &FlowOptions) -> Result<FixedPointRecord> {
    let q = h.weights();
    let end = integrate_span(h, 0.0, &p, 1.0, opts)?.endpoint;
    let od = orbit_distance(&end, &p, q);
    let lambda = normalize_class(od.phase, TAU);
    Ok(FixedPointRecord { rep: SpherePoint::new_unchecked(p), lambda, lambda_class: lambda, residual: od.distance })
}

/// Looks for a fixed point of `φ_1` near `seed`.
///
/// The seed is accepted directly when `φ̃_1(seed)` lies within `tol_fix` of
/// its orbit. Otherwise Gauss–Newton iterations are run on
/// `(p, s) ↦ A_s φ̃_1(p) - p` with a finite-difference Jacobian and a
/// minimum-norm step (the orbit direction is a kernel direction), renormalizing
/// `p` onto the sphere after every step.
pub fn detect_fixed_point(h: &LiftedHamiltonian, seed: &SpherePoint, opts: &FixedPointOptions) -> Option<FixedPointRecord> {
    let q = h.weights();
    let n1 = q.len();
    let first = record_at(h, seed.to_vec(), &opts.flow).ok()?;
    if first.residual <= opts.tol_fix {
        return Some(first);
    }
    let mut p = seed.to_vec();
    let mut s = first.lambda;
    let mut res = residual_vec(h, &p, s, &opts.flow).ok()?;
    let mut polish = 0;
    for _ in 0..opts.max_iter {
        let x = to_real(&p, s);
        let dim = 2 * n1 + 1;
        let mut jac = DMatrix::zeros(2 * n1, dim);
        for col in 0..(2 * n1) {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[col] += opts.fd_step;
            xm[col] -= opts.fd_step;
            let (pp, sp) = from_real(&xp, n1);
            let (pm, sm) = from_real(&xm, n1);
            let rp = residual_vec(h, &pp, sp, &opts.flow).ok()?;
            let rm = residual_vec(h, &pm, sm, &opts.flow).ok()?;
            jac.set_column(col, &((rp - rm) / (2.0 * opts.fd_step)));
        }
        // ∂/∂s A_s φ(p) = i q ∘ A_s φ(p), and A_s φ(p) = residual + p
        for i in 0..n1 {
            let w = q.get(i) as f64;
            let re = res[2 * i] + p[i].re;
            let im = res[2 * i + 1] + p[i].im;
            jac[(2 * i, 2 * n1)] = -w * im;
            jac[(2 * i + 1, 2 * n1)] = w * re;
        }
        let delta = pinv_solve(&jac, &(-&res), 1e-10)?;
        let base = res.norm();
        let mut scale = 1.0;
        let mut accepted = false;
        while scale > 1e-4 {
            let trial = &x + &delta * scale;
            let (pt, st) = from_real(&trial, n1);
            let Ok((_, pt)) = geometry::normalize_to_sphere(&pt, q) else {
                scale *= 0.5;
                continue;
            };
            let pt = pt.to_vec();
            if let Ok(rt) = residual_vec(h, &pt, st, &opts.flow) {
                if rt.norm() < base {
                    p = pt;
                    s = st;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        let rec = record_at(h, p.clone(), &opts.flow).ok()?;
        if rec.residual <= opts.tol_fix {
            polish += 1;
            if !accepted || polish > 2 || rec.residual < 1e-11 {
                return Some(rec);
            }
        } else if !accepted {
            return None;
        }
    }
    let rec = record_at(h, p, &opts.flow).ok()?;
    (rec.residual <= opts.tol_fix).then_some(rec)
}

/// Coordinate points followed by `count` quasi-random sphere points (Halton
/// sequence pushed through Box–Muller).
pub fn sphere_seeds(q: &WeightVector, count: usize) -> Vec<SpherePoint> {
    const PRIMES: [u64; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];
    let n1 = q.len();
    let mut out: Vec<SpherePoint> = (0..n1).map(|j| SpherePoint::coordinate(q, j)).collect();
    let dims = 2 * n1;
    let mut index = 1u64;
    while out.len() < n1 + count {
        let u: Vec<f64> = (0..dims).map(|d| halton(index, PRIMES[d % PRIMES.len()])).collect();
        index += 1;
        let z: Vec<C64> = (0..n1)
            .map(|i| {
                let (u1, u2) = (u[2 * i].max(1e-12), u[2 * i + 1]);
                let r = (-2.0 * u1.ln()).sqrt();
                C64::from_polar(r, TAU * u2)
            })
            .collect();
        if let Ok((_, p)) = geometry::normalize_to_sphere(&z, q) {
            out.push(p);
        }
    }
    out
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Runs [`detect_fixed_point`] from every seed in parallel and merges
/// duplicates; output is sorted by `(lambda_class, rep)`.
pub fn search_fixed_points(
    h: &LiftedHamiltonian,
    seeds: &[SpherePoint],
    opts: &FixedPointOptions,
) -> Vec<FixedPointRecord> {
    let found: Vec<Option<FixedPointRecord>> = seeds.par_iter().map(|s| detect_fixed_point(h, s, opts)).collect();
    merge_records(found.into_iter().flatten(), h.weights(), opts.merge_tol)
}

pub fn merge_records(
    records: impl IntoIterator<Item = FixedPointRecord>,
    q: &WeightVector,
    tol: f64,
) -> Vec<FixedPointRecord> {
    let mut out: Vec<FixedPointRecord> = Vec::new();
    for r in records {
        if !out.iter().any(|o| o.same_as(&r, q, tol, tol)) {
            out.push(r);
        }
    }
    out.sort_by(|a, b| {
        a.lambda_class.total_cmp(&b.lambda_class).then_with(|| {
            a.rep
                .iter()
                .zip(b.rep.iter())
                .map(|(x, y)| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    out
}
