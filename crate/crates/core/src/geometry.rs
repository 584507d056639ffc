//! Weighted actions, the moment map `K_q` and orbit geometry on the weighted
//! sphere `S^{2n+1}(q) = K_q^{-1}(1/2)`.
//!
//! Points of `CP^n(q)` are always handled through ambient lifts in `C^{n+1}`.

use std::f64::consts::PI;
use std::ops::Deref;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::WeightVector;

pub type C64 = num_complex::Complex64;

const TAU: f64 = 2.0 * PI;

/// Cutoff below which a coordinate counts as zero in [`orbifold_group_order`].
pub const TOL_ZERO: f64 = 1e-12;
/// Allowed deviation `|2 K_q(z) - 1|` for a [`SpherePoint`].
pub const TOL_SPHERE: f64 = 1e-10;
/// Orbit distance under which two sphere points project to the same point.
pub const TOL_ORBIT: f64 = 1e-8;

/// A point of `C^{n+1}` with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct AmbientPoint(Vec<C64>);

impl AmbientPoint {
    pub fn new(z: Vec<C64>) -> Result<Self> {
        if z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::arg("point has non-finite coordinates"));
        }
        Ok(Self(z))
    }

    pub fn from_real(x: &[f64]) -> Result<Self> {
        Self::new(x.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    /// The zero vector of `C^len`.
    pub fn zeros(len: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); len])
    }

    /// Parses a JSON array of `[re, im]` pairs.
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.norm_sqr() == 0.0)
    }
}

impl Deref for AmbientPoint {
    type Target = [C64];

    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl TryFrom<Vec<[f64; 2]>> for AmbientPoint {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        AmbientPoint::new(v.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

impl From<AmbientPoint> for Vec<[f64; 2]> {
    fn from(p: AmbientPoint) -> Self {
        p.0.into_iter().map(|c| [c.re, c.im]).collect()
    }
}

/// A point of the weighted sphere `K_q(z) = 1/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<[f64; 2]>")]
pub struct SpherePoint(AmbientPoint);

impl SpherePoint {
    /// Checks `|2 K_q(z) - 1| <= tol`.
    pub fn new(z: AmbientPoint, q: &WeightVector, tol: f64) -> Result<Self> {
        let k = moment_map(&z, q)?;
        if (2.0 * k - 1.0).abs() > tol {
            return Err(Error::domain(format!(
                "point is off the weighted sphere: 2K_q(z) = {}",
                2.0 * k
            )));
        }
        Ok(Self(z))
    }

    /// Wraps a vector already known to lie on the sphere.
    pub(crate) fn new_unchecked(z: Vec<C64>) -> Self {
        Self(AmbientPoint(z))
    }

    /// The coordinate point `ε_j / sqrt(q_j)` (0-based `j`).
    pub fn coordinate(q: &WeightVector, j: usize) -> Self {
        let mut z = vec![C64::new(0.0, 0.0); q.len()];
        z[j] = C64::new(1.0 / (q.get(j) as f64).sqrt(), 0.0);
        Self::new_unchecked(z)
    }

    pub fn as_ambient(&self) -> &AmbientPoint {
        &self.0
    }

    pub fn into_ambient(self) -> AmbientPoint {
        self.0
    }
}

impl Deref for SpherePoint {
    type Target = [C64];

    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl From<SpherePoint> for Vec<[f64; 2]> {
    fn from(p: SpherePoint) -> Self {
        p.0.into()
    }
}

fn check_len(z: &[C64], q: &WeightVector) -> Result<()> {
    if z.len() != q.len() {
        return Err(Error::arg(format!(
            "point has {} coordinates but weight vector has {}",
            z.len(),
            q.len()
        )));
    }
    Ok(())
}

pub(crate) fn norm(z: &[C64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `K_q(z) = 1/2 Σ q_j |z_j|^2`.
pub fn moment_map(z: &[C64], q: &WeightVector) -> Result<f64> {
    check_len(z, q)?;
    Ok(moment_map_unchecked(z, q.as_slice()))
}

pub(crate) fn moment_map_unchecked(z: &[C64], q: &[u64]) -> f64 {
    0.5 * z.iter().zip(q).map(|(c, &w)| w as f64 * c.norm_sqr()).sum::<f64>()
}

/// `A_s^q(z) = (e^{i q_j s} z_j)_j`.
///
/// # Panics
/// If `z` and `q` differ in length.
pub fn circle_action(s: f64, z: &[C64], q: &WeightVector) -> AmbientPoint {
    assert_eq!(z.len(), q.len(), "point and weight lengths differ");
    AmbientPoint(rotate(s, z, q.as_slice()))
}

pub(crate) fn rotate(s: f64, z: &[C64], q: &[u64]) -> Vec<C64> {
    z.iter()
        .zip(q)
        .map(|(c, &w)| c * C64::from_polar(1.0, w as f64 * s))
        .collect()
}

/// `α · z = (α^{q_j} z_j)_j` for nonzero complex `α`.
///
/// Powers are taken by repeated squaring so that e.g. `α = -1` is exact.
pub fn weighted_scalar_action(alpha: C64, z: &[C64], q: &WeightVector) -> Result<AmbientPoint> {
    check_len(z, q)?;
    if alpha.norm_sqr() == 0.0 {
        return Err(Error::domain("the weighted C* action needs alpha != 0"));
    }
    Ok(AmbientPoint(
        z.iter().zip(q.iter()).map(|(c, w)| c * int_pow(alpha, w)).collect(),
    ))
}

pub(crate) fn int_pow(base: C64, mut exp: u64) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}

/// Order `m(z) = gcd{q_j : |z_j| > tol_zero}` of the local group at `[z]`.
///
/// The point is smooth exactly when the result is 1.
pub fn orbifold_group_order(z: &[C64], q: &WeightVector, tol_zero: f64) -> Result<u64> {
    check_len(z, q)?;
    let m = z
        .iter()
        .zip(q.iter())
        .filter(|(c, _)| c.norm() > tol_zero)
        .fold(0u64, |acc, (_, w)| acc.gcd(&w));
    if m == 0 {
        return Err(Error::domain("the zero vector has no orbit in CP^n(q)"));
    }
    Ok(m)
}

/// Writes `z = r · z'` with `r = sqrt(2 K_q(z)) > 0` and `z'` on the sphere.
pub fn normalize_to_sphere(z: &[C64], q: &WeightVector) -> Result<(f64, SpherePoint)> {
    let k = moment_map(z, q)?;
    if k <= 0.0 {
        return Err(Error::domain("cannot normalize the zero vector"));
    }
    let r = (2.0 * k).sqrt();
    Ok((r, SpherePoint::new_unchecked(z.iter().map(|c| c / r).collect())))
}

/// Result of [`orbit_distance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitDistance {
    /// `min_s |A_s a - b|`.
    pub distance: f64,
    /// Minimizing phase in `[0, 2π)`.
    pub phase: f64,
}

/// Chordal distance between the circle orbits of `a` and `b`.
///
/// `phase` is the minimizer `s*` of `|A_s a - b|`, so `A_{s*} a ≈ b` when the
/// orbits agree. Among (numerically) equal minima the smallest phase wins.
pub fn orbit_distance(a: &[C64], b: &[C64], q: &WeightVector) -> OrbitDistance {
    assert_eq!(a.len(), q.len(), "point and weight lengths differ");
    assert_eq!(b.len(), q.len(), "point and weight lengths differ");
    let w: Vec<C64> = a.iter().zip(b).map(|(x, y)| x * y.conj()).collect();
    let phase = best_phase(&w, q.as_slice());
    let rotated = rotate(phase, a, q.as_slice());
    let distance = norm(
        &rotated.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>(),
    );
    OrbitDistance { distance, phase }
}

/// Maximizes `g(s) = Re Σ_j e^{i q_j s} w_j` over `s ∈ [0, 2π)`.
///
/// `g` is a trigonometric polynomial of degree `max q`; it is sampled on a
/// grid of `32 · max q` points, each local grid maximum is bracketed and
/// refined by golden-section search, and the winner is polished by Newton
/// steps on `g'`.
pub(crate) fn best_phase(w: &[C64], q: &[u64]) -> f64 {
    let scale: f64 = w.iter().map(|c| c.norm()).sum();
    if scale == 0.0 {
        return 0.0;
    }
    let g = |s: f64| -> f64 {
        w.iter()
            .zip(q)
            .map(|(c, &k)| (c * C64::from_polar(1.0, k as f64 * s)).re)
            .sum()
    };
    let qmax = q.iter().copied().max().unwrap_or(1).max(1);
    let samples = 32 * qmax as usize;
    let h = TAU / samples as f64;
    let values: Vec<f64> = (0..samples).map(|i| g(i as f64 * h)).collect();

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for i in 0..samples {
        let prev = values[(i + samples - 1) % samples];
        let next = values[(i + 1) % samples];
        if values[i] >= prev && values[i] >= next {
            let s = golden_max(&g, i as f64 * h - h, i as f64 * h + h);
            let s = newton_polish(w, q, s, h);
            candidates.push((g(s), s.rem_euclid(TAU)));
        }
    }
    if candidates.is_empty() {
        // constant g up to rounding
        return 0.0;
    }
    let best = candidates.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-12 * scale.max(1.0);
    let mut phase = candidates
        .iter()
        .filter(|c| c.0 >= best - tie)
        .map(|c| c.1)
        .fold(f64::INFINITY, f64::min);
    if phase > TAU - 1e-13 {
        phase = 0.0;
    }
    phase
}

fn golden_max(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    for _ in 0..80 {
        if hi - lo < 1e-12 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = g(x1);
        }
    }
    0.5 * (lo + hi)
}

fn newton_polish(w: &[C64], q: &[u64], s0: f64, radius: f64) -> f64 {
    let mut s = s0;
    for _ in 0..8 {
        let (mut d1, mut d2) = (0.0, 0.0);
        for (c, &k) in w.iter().zip(q) {
            let k = k as f64;
            let e = c * C64::from_polar(1.0, k * s);
            d1 += (C64::new(0.0, k) * e).re;
            d2 -= k * k * e.re;
        }
        if d2 >= 0.0 {
            break;
        }
        let step = d1 / d2;
        let next = s - step;
        if (next - s0).abs() > radius {
            break;
        }
        s = next;
        if step.abs() < 1e-16 {
            break;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn wv(q: &[u64]) -> WeightVector {
        WeightVector::new(q.to_vec()).unwrap()
    }

    #[test]
    fn moment_map_examples() {
        assert_eq!(moment_map(&[c(1.0, 0.0), c(0.0, 0.0)], &wv(&[1, 1])).unwrap(), 0.5);
        assert_eq!(moment_map(&[c(1.0, 0.0), c(1.0, 0.0)], &wv(&[2, 3])).unwrap(), 2.5);
        assert_eq!(moment_map(&[c(0.0, 0.0); 3], &wv(&[4, 1, 7])).unwrap(), 0.0);
        assert!(matches!(
            moment_map(&[c(1.0, 0.0)], &wv(&[1, 1])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn circle_action_examples() {
        let q = wv(&[2, 3]);
        let z = [c(1.0, 0.0), c(1.0, 0.0)];
        let out = circle_action(PI, &z, &q);
        assert!((out[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((out[1] - c(-1.0, 0.0)).norm() < 1e-15);
        let id = circle_action(0.0, &z, &q);
        assert_eq!(&*id, &z);
        let full = circle_action(TAU, &[c(0.3, -0.2), c(0.1, 0.9)], &q);
        assert!((full[0] - c(0.3, -0.2)).norm() < 1e-14);
        assert!((full[1] - c(0.1, 0.9)).norm() < 1e-14);
    }

    #[test]
    fn scalar_action_examples() {
        let q = wv(&[2, 2, 3]);
        let one = [c(1.0, 0.0); 3];
        let out = weighted_scalar_action(c(-1.0, 0.0), &one, &q).unwrap();
        assert_eq!(&*out, &[c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
        let out = weighted_scalar_action(c(2.0, 0.0), &[c(1.0, 0.0); 2], &wv(&[1, 1])).unwrap();
        assert_eq!(&*out, &[c(2.0, 0.0); 2]);
        let id = weighted_scalar_action(c(1.0, 0.0), &[c(0.2, 0.4); 3], &q).unwrap();
        assert_eq!(&*id, &[c(0.2, 0.4); 3]);
        assert!(matches!(
            weighted_scalar_action(c(0.0, 0.0), &one, &q),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn scalar_action_on_unit_circle_is_circle_action() {
        let q = wv(&[3, 1, 4]);
        let z = [c(0.1, 0.2), c(-0.5, 0.3), c(0.7, 0.0)];
        let s = 0.37;
        let a = weighted_scalar_action(C64::from_polar(1.0, s), &z, &q).unwrap();
        let b = circle_action(s, &z, &q);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn orbifold_order_examples() {
        let q = wv(&[2, 2, 3]);
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        assert_eq!(orbifold_group_order(&[one, one, zero], &q, TOL_ZERO).unwrap(), 2);
        assert_eq!(orbifold_group_order(&[one, zero, one], &q, TOL_ZERO).unwrap(), 1);
        assert_eq!(orbifold_group_order(&[one, one, one], &q, TOL_ZERO).unwrap(), 1);
        assert_eq!(orbifold_group_order(&[zero, zero, one], &q, TOL_ZERO).unwrap(), 3);
        assert!(orbifold_group_order(&[zero; 3], &q, TOL_ZERO).is_err());
        // below the cutoff counts as zero
        assert_eq!(
            orbifold_group_order(&[one, one, c(1e-14, 0.0)], &q, TOL_ZERO).unwrap(),
            2
        );
    }

    #[test]
    fn normalize_examples() {
        let (r, zp) = normalize_to_sphere(&[c(1.0, 0.0), c(0.0, 0.0)], &wv(&[1, 1])).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(&*zp, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let (r, zp) = normalize_to_sphere(&[c(1.0, 0.0), c(1.0, 0.0)], &wv(&[2, 3])).unwrap();
        assert!((r - 5f64.sqrt()).abs() < 1e-15);
        assert!((zp[0].re - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        let (r2, _) = normalize_to_sphere(&zp, &wv(&[2, 3])).unwrap();
        assert!((r2 - 1.0).abs() < 1e-15);
        assert!(normalize_to_sphere(&[c(0.0, 0.0); 2], &wv(&[2, 3])).is_err());
    }

    #[test]
    fn sphere_point_validation() {
        let q = wv(&[2, 3]);
        let z = AmbientPoint::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(SpherePoint::new(z, &q, TOL_SPHERE).is_err());
        let p = SpherePoint::coordinate(&q, 1);
        assert!((2.0 * moment_map(&p, &q).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orbit_distance_examples() {
        let q = wv(&[2, 3]);
        let (_, a) = normalize_to_sphere(&[c(0.3, 0.4), c(-0.2, 0.5)], &q).unwrap();
        let same = orbit_distance(&a, &a, &q);
        assert!(same.distance < 1e-12);
        assert_eq!(same.phase, 0.0);

        let s0 = 1.234;
        let b = circle_action(s0, &a, &q);
        let od = orbit_distance(&a, &b, &q);
        assert!(od.distance < TOL_ORBIT);
        assert!((od.phase - s0).abs() < 1e-9);

        // disjoint orbits: |A_s a - b|^2 = |a|^2 + |b|^2 for every s
        let q1 = wv(&[1, 1]);
        let a = [c(1.0, 0.0), c(0.0, 0.0)];
        let b = [c(0.0, 0.0), c(1.0, 0.0)];
        let od = orbit_distance(&a, &b, &q1);
        assert!((od.distance - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn orbit_distance_handles_isotropy() {
        // the coordinate point of weight 3 is fixed by A_{2π/3}; the smallest
        // minimizing phase is reported.
        let q = wv(&[1, 3]);
        let a = SpherePoint::coordinate(&q, 1);
        let b = circle_action(2.5, &a, &q);
        let od = orbit_distance(&a, &b, &q);
        assert!(od.distance < 1e-12);
        let expected = (2.5f64).rem_euclid(TAU / 3.0);
        assert!((od.phase - expected).abs() < 1e-10, "{} vs {}", od.phase, expected);
    }

    #[test]
    fn json_points() {
        let p = AmbientPoint::from_json("[[1.0, 0.5], [0, -2]]").unwrap();
        assert_eq!(&*p, &[c(1.0, 0.5), c(0.0, -2.0)]);
        assert!(AmbientPoint::from_json("[[1.0]]").is_err());
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(back, "[[1.0,0.5],[0.0,-2.0]]");
    }
}
