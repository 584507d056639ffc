//! Integer cohomology of `CP^n(q)` and the real profile of `RP^n(q)`.
//!
//! `H^{2k}(CP^n(q); Z) = Z γ_k` for `0 <= k <= n` and the products are
//! `γ_k γ_j = (l_k l_j / l_{k+j}) γ_{k+j}` with
//! `l_k = lcm{ q_{i_1}···q_{i_{k+1}} / gcd(q_{i_1},...,q_{i_{k+1}}) }` over all
//! `(k+1)`-subsets of the weights. Everything here is exact big-integer
//! arithmetic; subset enumeration is combinatorial, so `n <= 20` is the
//! supported range.

use itertools::Itertools;
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::weights::WeightVector;

/// Largest `n` for which subset enumeration is attempted.
pub const MAX_DIMENSION: usize = 20;

/// `l_k^q` for `1 <= k <= n`.
pub fn l_value(q: &WeightVector, k: usize) -> Result<BigUint> {
    let n = q.n();
    if k < 1 || k > n {
        return Err(Error::arg(format!("l_k needs 1 <= k <= n = {n}, got k = {k}")));
    }
    if n > MAX_DIMENSION {
        return Err(Error::arg(format!(
            "dimension n = {n} exceeds the supported envelope n <= {MAX_DIMENSION}"
        )));
    }
    let mut acc = BigUint::one();
    for subset in q.as_slice().iter().combinations(k + 1) {
        let g = subset.iter().fold(0u64, |a, &&w| a.gcd(&w));
        let prod = subset.iter().fold(BigUint::one(), |p, &&w| p * w);
        acc = acc.lcm(&(prod / g));
    }
    Ok(acc)
}

// big integers go out as decimal strings so JSON consumers never lose digits
fn decimal<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn decimal_seq<S: serde::Serializer>(v: &[BigUint], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

fn decimal_table<S: serde::Serializer>(
    v: &[((usize, usize), BigUint)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|((k, j), c)| (k, j, c.to_string())))
}

/// The product `γ_k · γ_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CupProduct {
    /// `γ_k γ_j = coefficient · γ_{k+j}`; `boundary` marks `k + j = n`.
    Multiple {
        #[serde(serialize_with = "decimal")]
        coefficient: BigUint,
        boundary: bool,
    },
    /// `k + j > n`.
    Zero,
}

impl CupProduct {
    pub fn coefficient(&self) -> Option<&BigUint> {
        match self {
            CupProduct::Multiple { coefficient, .. } => Some(coefficient),
            CupProduct::Zero => None,
        }
    }
}

/// `γ_k γ_j` for `k, j >= 1`.
///
/// For `k + j <= n` this is the exact quotient `l_k l_j / l_{k+j}`; a nonzero
/// remainder is reported as [`Error::Internal`]. At `k + j = n` the product
/// formula is used and the result is flagged as a boundary case.
pub fn structure_constant(q: &WeightVector, k: usize, j: usize) -> Result<CupProduct> {
    if k < 1 || j < 1 {
        return Err(Error::arg(format!("degrees must be >= 1, got ({k}, {j})")));
    }
    if k + j > q.n() {
        return Ok(CupProduct::Zero);
    }
    let lk = l_value(q, k)?;
    let lj = l_value(q, j)?;
    let lkj = l_value(q, k + j)?;
    exact_quotient(&(lk * lj), &lkj).map(|coefficient| CupProduct::Multiple {
        coefficient,
        boundary: k + j == q.n(),
    })
}

fn exact_quotient(num: &BigUint, den: &BigUint) -> Result<BigUint> {
    let (quot, rem) = num.div_rem(den);
    if !rem.is_zero() {
        return Err(Error::Internal(format!(
            "structure constant {num}/{den} is not an integer"
        )));
    }
    Ok(quot)
}

/// `H*(CP^n(q); Z)` as a table of `l_k` and structure constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CohomologyRing {
    pub n: usize,
    /// `l[k - 1] = l_k` for `k = 1..=n`.
    #[serde(serialize_with = "decimal_seq")]
    pub l: Vec<BigUint>,
    /// `c[(k, j)]` for `k, j >= 1`, `k + j <= n`, row-major in `k`.
    #[serde(serialize_with = "decimal_table")]
    pub constants: Vec<((usize, usize), BigUint)>,
}

impl CohomologyRing {
    pub fn new(q: &WeightVector) -> Result<Self> {
        let n = q.n();
        let l = (1..=n).map(|k| l_value(q, k)).collect::<Result<Vec<_>>>()?;
        let mut constants = Vec::new();
        for k in 1..n {
            for j in 1..=(n - k) {
                let c = exact_quotient(&(&l[k - 1] * &l[j - 1]), &l[k + j - 1])?;
                constants.push(((k, j), c));
            }
        }
        Ok(Self { n, l, constants })
    }

    pub fn l(&self, k: usize) -> Option<&BigUint> {
        k.checked_sub(1).and_then(|i| self.l.get(i))
    }

    pub fn constant(&self, k: usize, j: usize) -> Option<&BigUint> {
        self.constants.iter().find(|(kj, _)| *kj == (k, j)).map(|(_, c)| c)
    }

    /// Square matrix `c[k-1][j-1]` with `None` where `k + j > n`.
    pub fn constant_matrix(&self) -> Vec<Vec<Option<BigUint>>> {
        (1..=self.n)
            .map(|k| (1..=self.n).map(|j| self.constant(k, j).cloned()).collect())
            .collect()
    }
}

/// Betti sum and integral cuplength of `CP^n(q)`: `(n + 1, n)`.
pub fn complex_profile(q: &WeightVector) -> (usize, usize) {
    (q.n() + 1, q.n())
}

/// Topology of `RP^n(q)` determined by the number `r` of odd weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RealProfile {
    pub r: usize,
    pub is_manifold: bool,
    /// Betti sum over `Z_2`.
    pub sb: usize,
    /// `Z_2` cuplength.
    pub cl: usize,
    /// For `1 <= r <= n`: `RP^n(q)` is the `(n + 1 - r)`-fold unreduced
    /// suspension of `RP^{r - 1}`; this is `r - 1`.
    pub suspension_base: Option<usize>,
}

pub fn real_profile(q: &WeightVector) -> RealProfile {
    let n = q.n();
    let r = q.odd_count();
    let (sb, cl, suspension_base) = match r {
        0 => (2, 1, None),
        1 => (1, 0, Some(0)),
        r if r <= n => (r, 1, Some(r - 1)),
        _ => (n + 1, n, None),
    };
    RealProfile { r, is_manifold: r == n + 1, sb, cl, suspension_base }
}
