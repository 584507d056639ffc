//! Spectrum of `Lu = μ ∇K_q(u)` on loops: `μ = 2πk/q_j` with eigenvector
//! `e^{2πikt} ε_j`, one line per `(k, j)`.
//!
//! Eigenvalues are stored as the exact rational `k/q_j` (in units of `2π`,
//! "turns") and only converted to floating point on output, so interval
//! membership and multiplicities are decided exactly.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_integer::Integer;
use num_rational::Rational64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::weights::WeightVector;

const TAU: f64 = 2.0 * PI;

/// One eigenvalue line `μ = 2πk/q_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpectralLine {
    /// Fourier mode.
    pub k: i64,
    /// Coordinate index, 1-based.
    pub j: usize,
    /// The weight `q_j`.
    pub qj: u64,
}

impl SpectralLine {
    /// `μ / 2π = k / q_j`, exact.
    pub fn turns(&self) -> Rational64 {
        Rational64::new(self.k, self.qj as i64)
    }

    pub fn mu(&self) -> f64 {
        TAU * (self.k as f64 / self.qj as f64)
    }
}

impl Serialize for SpectralLine {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SpectralLine", 4)?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("j", &self.j)?;
        st.serialize_field("q_j", &self.qj)?;
        st.serialize_field("mu", &self.mu())?;
        st.end()
    }
}

/// Interval shape for [`eigenvalues_in`]: `(lo, hi]` or `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interval {
    HalfOpen,
    Closed,
}

fn sort_lines(lines: &mut [SpectralLine]) {
    lines.sort_by(|a, b| a.turns().cmp(&b.turns()).then(a.j.cmp(&b.j)).then(a.k.cmp(&b.k)));
}

/// All lines with `k/q_j` in `(lo, hi]` (or `[lo, hi]`), exact.
pub fn eigenvalues_in_turns(
    q: &WeightVector,
    lo: Rational64,
    hi: Rational64,
    shape: Interval,
) -> Result<Vec<SpectralLine>> {
    if lo >= hi {
        return Err(Error::arg(format!("empty interval: lo = {lo} >= hi = {hi}")));
    }
    let mut lines = Vec::new();
    for (idx, qj) in q.iter().enumerate() {
        let w = Rational64::from_integer(qj as i64);
        let lo_k = lo * w;
        let hi_k = hi * w;
        let k_min = match shape {
            Interval::HalfOpen => lo_k.floor().to_integer() + 1,
            Interval::Closed => lo_k.ceil().to_integer(),
        };
        let k_max = hi_k.floor().to_integer();
        for k in k_min..=k_max {
            lines.push(SpectralLine { k, j: idx + 1, qj });
        }
    }
    sort_lines(&mut lines);
    Ok(lines)
}

/// All lines with `μ` in `(lo, hi]` (or `[lo, hi]`); `μ = 0` appears as the
/// `n + 1` lines `k = 0`.
pub fn eigenvalues_in(q: &WeightVector, lo: f64, hi: f64, shape: Interval) -> Result<Vec<SpectralLine>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::arg(format!("invalid interval: lo = {lo}, hi = {hi}")));
    }
    let mut lines = Vec::new();
    for (idx, qj) in q.iter().enumerate() {
        // widen by one mode on each side, then filter on the float value
        let k_lo = (lo / TAU * qj as f64).floor() as i64 - 1;
        let k_hi = (hi / TAU * qj as f64).ceil() as i64 + 1;
        for k in k_lo..=k_hi {
            let line = SpectralLine { k, j: idx + 1, qj };
            let mu = line.mu();
            let above = match shape {
                Interval::HalfOpen => mu > lo,
                Interval::Closed => mu >= lo,
            };
            if above && mu <= hi {
                lines.push(line);
            }
        }
    }
    sort_lines(&mut lines);
    Ok(lines)
}

/// The `m`-th positive eigenvalue line counted with multiplicity (`m >= 1`).
pub fn mu_line(q: &WeightVector, m: usize) -> Result<SpectralLine> {
    if m == 0 {
        return Err(Error::arg("mu_m is indexed from m = 1"));
    }
    let mut heap: BinaryHeap<Reverse<(Rational64, usize, i64)>> = q
        .iter()
        .enumerate()
        .map(|(idx, qj)| Reverse((Rational64::new(1, qj as i64), idx, 1)))
        .collect();
    let mut count = 0;
    loop {
        let Reverse((_, idx, k)) = heap.pop().expect("heap never empties");
        count += 1;
        let qj = q.get(idx);
        if count == m {
            return Ok(SpectralLine { k, j: idx + 1, qj });
        }
        heap.push(Reverse((Rational64::new(k + 1, qj as i64), idx, k + 1)));
    }
}

/// `μ_m`, the `m`-th positive eigenvalue with multiplicity.
pub fn mu(q: &WeightVector, m: usize) -> Result<f64> {
    mu_line(q, m).map(|l| l.mu())
}

/// Bracket `(μ_m - M, μ_m)` for the minimax value `c_m`, valid for `m >= 2`.
///
/// `m = 1` is refused: the identification of the unperturbed minimax value
/// with `μ_1` is not established, so no bracket is certified there.
pub fn minimax_bounds(q: &WeightVector, bound: f64, m: usize) -> Result<(f64, f64)> {
    if m <= 1 {
        return Err(Error::arg(
            "minimax bounds need m >= 2: d_1 = mu_1 is not established, so c_1 is not bracketed",
        ));
    }
    if !(bound >= 0.0) || !bound.is_finite() {
        return Err(Error::arg(format!("Hamiltonian bound must be finite and >= 0, got {bound}")));
    }
    let hi = mu(q, m)?;
    Ok((hi - bound, hi))
}

fn serialize_ratio<S: Serializer>(r: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

/// Counting argument certifying `n + 1` critical values pairwise distinct
/// modulo `2π`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingCertificate {
    /// The Hamiltonian bound `M`.
    #[serde(rename = "M")]
    pub bound: f64,
    /// Smallest integer `t0 >= 1` with `M <= 2 t0 π`.
    pub t0: i64,
    pub s: i64,
    /// Number of lines in `(2(1 + t0)π, 2sπ]`.
    pub interval_count: usize,
    /// `(n + 1) - t0 (n + 1) / (s - 1)`.
    #[serde(serialize_with = "serialize_ratio")]
    pub ns_lower_bound: Rational64,
    /// Certified number of distinct classes: the least integer `>= ns_lower_bound`.
    pub conclusion: i64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// `t0 = max(1, ⌈M / 2π⌉)`.
pub fn smallest_t0(bound: f64) -> Result<i64> {
    if !(bound >= 0.0) || !bound.is_finite() {
        return Err(Error::arg(format!("Hamiltonian bound must be finite and >= 0, got {bound}")));
    }
    let mut t0 = ((bound / TAU).ceil() as i64).max(1);
    while t0 > 1 && TAU * (t0 - 1) as f64 >= bound {
        t0 -= 1;
    }
    while TAU * (t0 as f64) < bound {
        t0 += 1;
    }
    Ok(t0)
}

/// Certificate with the minimal admissible `s = t0 (n + 1) + 2`.
pub fn counting_certificate(q: &WeightVector, bound: f64) -> Result<CountingCertificate> {
    let t0 = smallest_t0(bound)?;
    let n1 = q.len() as i64;
    counting_certificate_with_s(q, bound, t0 * n1 + 2)
}

/// Certificate for a caller-chosen `s > t0 + 1`.
pub fn counting_certificate_with_s(q: &WeightVector, bound: f64, s: i64) -> Result<CountingCertificate> {
    let t0 = smallest_t0(bound)?;
    if s <= t0 + 1 {
        return Err(Error::arg(format!("s must exceed t0 + 1 = {}, got {s}", t0 + 1)));
    }
    let n1 = q.len() as i64;
    let lines = eigenvalues_in_turns(
        q,
        Rational64::from_integer(1 + t0),
        Rational64::from_integer(s),
        Interval::HalfOpen,
    )?;
    let interval_count = lines.len();
    let required = ((s - t0 - 1) * n1) as usize;
    if interval_count < required {
        return Err(Error::Internal(format!(
            "interval (2(1+t0)π, 2sπ] holds {interval_count} lines, fewer than {required}"
        )));
    }
    let ns_lower_bound = Rational64::from_integer(n1) - Rational64::new(t0 * n1, s - 1);
    let conclusion = ns_lower_bound.ceil().to_integer().max(0);
    let mut notes = Vec::new();
    if q.max() < 2 {
        notes.push(
            "all weights are 1: the standing assumption q_1 >= 2 fails; the counting \
             arithmetic is run unchanged"
                .to_string(),
        );
    }
    if conclusion < n1 {
        notes.push(format!(
            "s = {s} is too small for t0 (n+1)/(s-1) < 1; only {conclusion} classes certified"
        ));
    }
    Ok(CountingCertificate { bound, t0, s, interval_count, ns_lower_bound, conclusion, notes })
}

/// CSV rows `k,j,q_j,mu` with a header line.
pub fn lines_to_csv(lines: &[SpectralLine]) -> String {
    let mut out = String::from("k,j,q_j,mu\n");
    for l in lines {
        out.push_str(&format!("{},{},{},{}\n", l.k, l.j, l.qj, l.mu()));
    }
    out
}

/// Distinct residues of `2πk/q_j` modulo `2π` over `|k| <= m`, as reduced
/// fractions of a turn in `[0, 1)`.
pub fn classes_mod_turn(q: &WeightVector, m: i64) -> Vec<Rational64> {
    let mut out: Vec<Rational64> = Vec::new();
    for qj in q.iter() {
        for k in -m..=m {
            let r = Rational64::new(k.mod_floor(&(qj as i64)), qj as i64);
            if !out.contains(&r) {
                out.push(r);
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wv(q: &[u64]) -> WeightVector {
        WeightVector::new(q.to_vec()).unwrap()
    }

    #[test]
    fn lines_in_interval_2_3() {
        let lines = eigenvalues_in(&wv(&[2, 3]), TAU / 3.0, TAU, Interval::HalfOpen).unwrap();
        let got: Vec<(i64, usize)> = lines.iter().map(|l| (l.k, l.j)).collect();
        assert_eq!(got, vec![(1, 1), (2, 2), (2, 1), (3, 2)]);
        assert!((lines[0].mu() - PI).abs() < 1e-15);
        assert!((lines[1].mu() - 4.0 * PI / 3.0).abs() < 1e-15);
        assert_eq!(lines[2].mu(), TAU);
        assert_eq!(lines[3].mu(), TAU);
    }

    #[test]
    fn unit_weights_single_mode() {
        let lines = eigenvalues_in(&WeightVector::unit(3), 0.0, TAU, Interval::HalfOpen).unwrap();
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| l.k == 1 && l.mu() == TAU));
    }

    #[test]
    fn zero_has_multiplicity_n_plus_one() {
        let lines = eigenvalues_in(&wv(&[3, 2, 2]), -0.1, 0.1, Interval::Closed).unwrap();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.k == 0));
    }

    #[test]
    fn symmetric_interval_is_closed_under_negation() {
        let q = wv(&[5, 3]);
        let a = 9.0;
        let lines = eigenvalues_in(&q, -a, a, Interval::Closed).unwrap();
        for l in &lines {
            assert!(lines.iter().any(|m| m.j == l.j && m.k == -l.k));
        }
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(eigenvalues_in(&wv(&[2, 1]), 1.0, 1.0, Interval::Closed).is_err());
        assert!(eigenvalues_in_turns(
            &wv(&[2, 1]),
            Rational64::from_integer(2),
            Rational64::from_integer(1),
            Interval::Closed
        )
        .is_err());
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu(&wv(&[1, 1]), 1).unwrap(), TAU);
        assert_eq!(mu(&wv(&[1, 1]), 2).unwrap(), TAU);
        assert!((mu(&wv(&[2, 1]), 1).unwrap() - PI).abs() < 1e-15);
        assert!((mu(&wv(&[3, 2]), 3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!(mu(&wv(&[3, 2]), 0).is_err());
    }

    #[test]
    fn minimax_examples() {
        let q = wv(&[2, 2, 3]);
        let m2 = mu(&q, 2).unwrap();
        assert_eq!(minimax_bounds(&q, 0.0, 2).unwrap(), (m2, m2));
        assert_eq!(minimax_bounds(&q, 1.0, 2).unwrap(), (m2 - 1.0, m2));
        assert!(minimax_bounds(&q, 1.0, 1).is_err());
        let (lo, hi) = minimax_bounds(&q, 2.5, 7).unwrap();
        assert!((hi - lo - 2.5).abs() < 1e-12);
    }

    #[test]
    fn t0_examples() {
        assert_eq!(smallest_t0(0.0).unwrap(), 1);
        assert_eq!(smallest_t0(5.0).unwrap(), 1);
        assert_eq!(smallest_t0(TAU).unwrap(), 1);
        assert_eq!(smallest_t0(7.0).unwrap(), 2);
        assert_eq!(smallest_t0(2.0 * TAU).unwrap(), 2);
        assert!(smallest_t0(-1.0).is_err());
        assert!(smallest_t0(f64::NAN).is_err());
    }

    #[test]
    fn certificate_3_2_bound_5() {
        let c = counting_certificate(&wv(&[3, 2]), 5.0).unwrap();
        assert_eq!(c.t0, 1);
        assert_eq!(c.s, 4);
        assert_eq!(c.interval_count, 10);
        assert_eq!(c.ns_lower_bound, Rational64::new(4, 3));
        assert_eq!(c.conclusion, 2);
        assert!(c.notes.is_empty());
    }

    #[test]
    fn certificate_with_small_s_concludes_less() {
        let c = counting_certificate_with_s(&wv(&[3, 2]), 7.0, 4).unwrap();
        assert_eq!(c.t0, 2);
        // 2 - 4/3
        assert_eq!(c.ns_lower_bound, Rational64::new(2, 3));
        assert_eq!(c.conclusion, 1);
        assert!(!c.notes.is_empty());
        assert!(counting_certificate_with_s(&wv(&[3, 2]), 7.0, 3).is_err());
    }

    #[test]
    fn certificate_notes_unit_weights() {
        let c = counting_certificate(&WeightVector::unit(2), 1.0).unwrap();
        assert_eq!(c.conclusion, 3);
        assert_eq!(c.notes.len(), 1);
    }

    #[test]
    fn certificate_json_fields() {
        let c = counting_certificate(&wv(&[3, 2]), 5.0).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["M"], 5.0);
        assert_eq!(v["ns_lower_bound"], "4/3");
        assert_eq!(v["conclusion"], 2);
        assert!(v.get("notes").is_none());
    }

    #[test]
    fn csv_export() {
        let lines = eigenvalues_in(&wv(&[2, 1]), 0.0, PI, Interval::HalfOpen).unwrap();
        let csv = lines_to_csv(&lines);
        assert!(csv.starts_with("k,j,q_j,mu\n1,1,2,3.14159"));
    }

    #[test]
    fn residue_classes() {
        let classes = classes_mod_turn(&wv(&[2, 3]), 5);
        assert_eq!(classes.len(), 4); // 0, 1/3, 1/2, 2/3
    }
}
