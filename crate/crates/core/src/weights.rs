use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The weight tuple `q = (q_1, ..., q_{n+1})` of a weighted projective space.
///
/// Entries are positive integers and there are at least two of them (`n >= 1`).
/// The original coordinate order is kept; [`WeightVector::sorted_desc`] gives
/// the non-increasing view used by the eigenvalue counting arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct WeightVector {
    q: Vec<u64>,
}

impl WeightVector {
    pub fn new(q: Vec<u64>) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::arg(format!(
                "a weight vector needs at least 2 entries (n >= 1), got {}",
                q.len()
            )));
        }
        if let Some(pos) = q.iter().position(|&w| w == 0) {
            return Err(Error::arg(format!("weight q_{} must be >= 1", pos + 1)));
        }
        Ok(Self { q })
    }

    /// All-ones weights of complex dimension `n`.
    pub fn unit(n: usize) -> Self {
        Self { q: vec![1; n + 1] }
    }

    /// Complex dimension `n` of `CP^n(q)`.
    pub fn n(&self) -> usize {
        self.q.len() - 1
    }

    /// Number of coordinates, `n + 1`.
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.q
    }

    /// Weight of coordinate `j` (0-based).
    pub fn get(&self, j: usize) -> u64 {
        self.q[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.q.iter().copied()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.q.iter().map(|&w| w as f64).collect()
    }

    pub fn max(&self) -> u64 {
        *self.q.iter().max().expect("non-empty")
    }

    pub fn min(&self) -> u64 {
        *self.q.iter().min().expect("non-empty")
    }

    pub fn gcd(&self) -> u64 {
        self.q.iter().fold(0, |acc, &w| acc.gcd(&w))
    }

    /// Non-increasing copy `q_1 >= q_2 >= ... >= q_{n+1}`.
    pub fn sorted_desc(&self) -> WeightVector {
        let mut q = self.q.clone();
        q.sort_unstable_by(|a, b| b.cmp(a));
        WeightVector { q }
    }

    /// Permutation `p` with `sorted_desc()[i] == self[p[i]]` (stable).
    pub fn sort_permutation(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.q.len()).collect();
        idx.sort_by(|&a, &b| self.q[b].cmp(&self.q[a]));
        idx
    }

    pub fn odd_count(&self) -> usize {
        self.q.iter().filter(|&&w| w % 2 == 1).count()
    }

    pub fn all_odd(&self) -> bool {
        self.odd_count() == self.q.len()
    }

    pub fn is_unit(&self) -> bool {
        self.q.iter().all(|&w| w == 1)
    }
}

impl TryFrom<Vec<u64>> for WeightVector {
    type Error = Error;

    fn try_from(q: Vec<u64>) -> Result<Self> {
        WeightVector::new(q)
    }
}

impl From<WeightVector> for Vec<u64> {
    fn from(w: WeightVector) -> Self {
        w.q
    }
}

impl FromStr for WeightVector {
    type Err = Error;

    /// Parses comma separated positive integers, e.g. `"2,2,3"`.
    fn from_str(s: &str) -> Result<Self> {
        let q = s
            .split(',')
            .map(|part| {
                let part = part.trim();
                part.parse::<u64>()
                    .map_err(|_| Error::Parse(format!("bad weight {part:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        WeightVector::new(q)
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.q.iter().map(u64::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let q: WeightVector = "2, 2,3".parse().unwrap();
        assert_eq!(q.as_slice(), &[2, 2, 3]);
        assert_eq!(q.n(), 2);
        assert_eq!(q.to_string(), "2,2,3");
    }

    #[test]
    fn rejects_bad_input() {
        assert!("2,0,3".parse::<WeightVector>().is_err());
        assert!("5".parse::<WeightVector>().is_err());
        assert!("2,x".parse::<WeightVector>().is_err());
        assert!("".parse::<WeightVector>().is_err());
    }

    #[test]
    fn sorted_view_keeps_original() {
        let q = WeightVector::new(vec![2, 5, 3]).unwrap();
        assert_eq!(q.sorted_desc().as_slice(), &[5, 3, 2]);
        assert_eq!(q.sort_permutation(), vec![1, 2, 0]);
        assert_eq!(q.as_slice(), &[2, 5, 3]);
    }

    #[test]
    fn parity_counts() {
        let q = WeightVector::new(vec![2, 2, 3]).unwrap();
        assert_eq!(q.odd_count(), 1);
        assert!(!q.all_odd());
        assert!(WeightVector::new(vec![1, 3, 5]).unwrap().all_odd());
        assert_eq!(WeightVector::new(vec![4, 6]).unwrap().gcd(), 2);
    }

    #[test]
    fn serde_validates() {
        let q: WeightVector = serde_json::from_str("[3,2]").unwrap();
        assert_eq!(q.as_slice(), &[3, 2]);
        assert!(serde_json::from_str::<WeightVector>("[3,0]").is_err());
    }
}
