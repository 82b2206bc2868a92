//! The four DAG families used by the lower bounds: restricted (essential)
//! DAGs with and without an in-degree cap, and layered DAGs with and without
//! one. Exact counts are arbitrary precision.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dag::{self, Dag, EnumLimits};
use crate::rng;
use crate::{Error, Result};

pub type BigCount = BigUint;

/// Layered ensembles larger than this are never materialised.
pub const MAX_LAYERED_MEMBERS: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    #[serde(alias = "restricted")]
    RestrictedAll,
    RestrictedSparse,
    #[serde(alias = "layered")]
    LayeredAll,
    LayeredSparse,
}

impl EnsembleKind {
    pub fn is_layered(self) -> bool {
        matches!(self, EnsembleKind::LayeredAll | EnsembleKind::LayeredSparse)
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, EnsembleKind::RestrictedSparse | EnsembleKind::LayeredSparse)
    }

    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::RestrictedAll => "restricted_all",
            EnsembleKind::RestrictedSparse => "restricted_sparse",
            EnsembleKind::LayeredAll => "layered_all",
            EnsembleKind::LayeredSparse => "layered_sparse",
        }
    }
}

/// One of the four ensembles with its size parameters.
///
/// Layers are listed bottom to top: `layers[0]` is `m_1`, whose nodes take
/// parents from `layers[1]`, and the last entry is the parentless top layer.
/// Node indices run top layer first, so every edge goes from a lower index to
/// a higher one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct EnsembleSpec {
    kind: EnsembleKind,
    m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    layers: Vec<usize>,
}

#[derive(Deserialize)]
struct RawSpec {
    kind: EnsembleKind,
    #[serde(default)]
    m: Option<usize>,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    layers: Vec<usize>,
}

impl TryFrom<RawSpec> for EnsembleSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        match r.kind {
            EnsembleKind::RestrictedAll => {
                EnsembleSpec::restricted(r.m.ok_or_else(|| Error::Usage("missing m".into()))?)
            }
            EnsembleKind::RestrictedSparse => EnsembleSpec::restricted_sparse(
                r.m.ok_or_else(|| Error::Usage("missing m".into()))?,
                r.k.ok_or_else(|| Error::Usage("missing k".into()))?,
            ),
            EnsembleKind::LayeredAll => EnsembleSpec::layered(r.layers),
            EnsembleKind::LayeredSparse => EnsembleSpec::layered_sparse(
                r.layers,
                r.k.ok_or_else(|| Error::Usage("missing k".into()))?,
            ),
        }
    }
}

impl EnsembleSpec {
    pub fn restricted(m: usize) -> Result<Self> {
        check_m(m)?;
        Ok(EnsembleSpec {
            kind: EnsembleKind::RestrictedAll,
            m,
            k: None,
            layers: Vec::new(),
        })
    }

    pub fn restricted_sparse(m: usize, k: usize) -> Result<Self> {
        check_m(m)?;
        check_k(m, k)?;
        Ok(EnsembleSpec {
            kind: EnsembleKind::RestrictedSparse,
            m,
            k: Some(k),
            layers: Vec::new(),
        })
    }

    pub fn layered(layers: Vec<usize>) -> Result<Self> {
        let m = check_layers(&layers)?;
        Ok(EnsembleSpec {
            kind: EnsembleKind::LayeredAll,
            m,
            k: None,
            layers,
        })
    }

    pub fn layered_sparse(layers: Vec<usize>, k: usize) -> Result<Self> {
        let m = check_layers(&layers)?;
        check_k(m, k)?;
        Ok(EnsembleSpec {
            kind: EnsembleKind::LayeredSparse,
            m,
            k: Some(k),
            layers,
        })
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> Option<usize> {
        self.k
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    /// Size of the parentless top layer (`m_l`); zero for restricted kinds.
    pub fn top_layer_size(&self) -> usize {
        self.layers.last().copied().unwrap_or(0)
    }

    /// Layer (0 = bottom) of each node.
    pub fn node_layers(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.m);
        for layer in (0..self.layers.len()).rev() {
            out.extend(std::iter::repeat_n(layer, self.layers[layer]));
        }
        out
    }

    /// Bitmask of nodes in `layer`.
    fn layer_mask(&self, layer: usize) -> u64 {
        let offset: usize = self.layers[layer + 1..].iter().sum();
        let width = self.layers[layer];
        (((1u128 << width) - 1) << offset) as u64
    }

    /// Nodes each node may take as parents (layered kinds with `m <= 64`).
    pub fn allowed_parents(&self) -> Vec<u64> {
        self.node_layers()
            .into_iter()
            .map(|layer| {
                if layer + 1 < self.layers.len() {
                    self.layer_mask(layer + 1)
                } else {
                    0
                }
            })
            .collect()
    }

    /// Membership predicate.
    pub fn admits(&self, g: &Dag) -> bool {
        if g.m() != self.m {
            return false;
        }
        if let Some(k) = self.k {
            if g.max_in_degree() > k {
                return false;
            }
        }
        if self.kind.is_layered() {
            // g.m() == self.m <= 64 here, so the masks fit.
            self.allowed_parents()
                .iter()
                .zip(g.parent_masks())
                .all(|(&allowed, &p)| p & !allowed == 0)
        } else {
            dag::is_singleton_class(g)
        }
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(m={}", self.kind.name(), self.m)?;
        if let Some(k) = self.k {
            write!(f, ", k={k}")?;
        }
        if !self.layers.is_empty() {
            write!(f, ", layers={:?}", self.layers)?;
        }
        write!(f, ")")
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Usage("an ensemble needs m >= 1".into()));
    }
    Ok(())
}

/// Bounds and counts work for any `m`; anything that builds graphs needs the
/// bitmask representation.
fn check_materialisable(spec: &EnsembleSpec) -> Result<()> {
    if spec.m > dag::MAX_NODES {
        return Err(Error::Capability(format!(
            "{spec} has more than {} nodes and cannot be materialised",
            dag::MAX_NODES
        )));
    }
    Ok(())
}

fn check_k(m: usize, k: usize) -> Result<()> {
    if k == 0 || k >= m {
        return Err(Error::Usage(format!("in-degree cap must satisfy 1 <= k < m, got k = {k}, m = {m}")));
    }
    Ok(())
}

fn check_layers(layers: &[usize]) -> Result<usize> {
    if layers.is_empty() {
        return Err(Error::Usage("a layered ensemble needs at least one layer".into()));
    }
    if layers.contains(&0) {
        return Err(Error::Usage("layer sizes must be positive".into()));
    }
    let m = layers.iter().sum();
    check_m(m)?;
    Ok(m)
}

pub(crate) fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

fn pow2(e: u64) -> BigUint {
    BigUint::one() << e
}

fn sum_binomials(n: u64, k: u64) -> BigUint {
    (0..=k).map(|i| binomial(n, i)).sum()
}

/// `ln n!`; exact summation below 256, Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 256 {
        return (2..=n).map(|i| (i as f64).ln()).sum();
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// Number of essential DAGs on `m` nodes by terminal-vertex
/// inclusion–exclusion:
/// `c_m = Σ_{s=1..m} (−1)^{s+1} C(m,s) (2^{m−s} − (m−s))^s c_{m−s}`, `c_0 = 1`.
pub fn count_essential_recurrence(m: usize) -> BigCount {
    let mut c: Vec<BigInt> = vec![BigInt::one()];
    for n in 1..=m as u64 {
        let mut total = BigInt::zero();
        for s in 1..=n {
            let rest = n - s;
            let ways = BigInt::from(pow2(rest)) - BigInt::from(rest);
            let term = BigInt::from(binomial(n, s)) * num_traits::pow(ways, s as usize) * &c[rest as usize];
            if s % 2 == 1 {
                total += term;
            } else {
                total -= term;
            }
        }
        c.push(total);
    }
    c[m].to_biguint().expect("essential DAG counts are non-negative")
}

/// Counts singleton-class DAGs by exhaustive enumeration.
pub fn count_essential_brute(m: usize, k: Option<usize>) -> Result<BigCount> {
    count_essential_brute_with(m, k, &EnumLimits::from_env())
}

pub fn count_essential_brute_with(m: usize, k: Option<usize>, limits: &EnumLimits) -> Result<BigCount> {
    if m == 0 {
        return Ok(BigUint::one());
    }
    let n = dag::enumerate_dags_with(m, k, limits)?
        .filter(dag::is_singleton_class)
        .count();
    Ok(BigUint::from(n))
}

/// `2^{m(m−3)/2 + 1} ≤ |G̃_m| ≤ m! 2^{m(m−1)/2}`.
///
/// For `m ≤ 2` the lower exponent is non-positive and the lower bound is
/// reported as 1.
pub fn count_bounds_restricted(m: usize) -> Result<(BigCount, BigCount)> {
    if m == 0 {
        return Err(Error::Domain("the restricted-ensemble bounds need m >= 1".into()));
    }
    let m = m as i64;
    let lower_exp = m * (m - 3) / 2 + 1;
    let lower = if lower_exp <= 0 { BigUint::one() } else { pow2(lower_exp as u64) };
    let upper = factorial(m as u64) * pow2((m * (m - 1) / 2) as u64);
    Ok((lower, upper))
}

fn check_sparse_domain(m: usize, k: usize) -> Result<()> {
    if k <= 1 || m <= 2 {
        return Err(Error::Domain(format!(
            "the sparse essential-DAG bounds hold for k > 1 and m > 2 (got m = {m}, k = {k})"
        )));
    }
    if k >= m {
        return Err(Error::Domain(format!("k = {k} must be below m = {m}")));
    }
    Ok(())
}

/// Product bounds on `|G̃_{m,k}|`, valid for `k > 1`, `m > 2`.
pub fn count_bounds_sparse(m: usize, k: usize) -> Result<(BigCount, BigCount)> {
    check_sparse_domain(m, k)?;
    let (m, k) = (m as u64, k as u64);
    let lower_exp = ((k as i64) * (k as i64 - 3)) / 2 + 1;
    let mut lower = if lower_exp <= 0 { BigUint::one() } else { pow2(lower_exp as u64) };
    let mut upper = factorial(m) * pow2(k * (k - 1) / 2);
    for j in (k + 1)..m {
        lower *= sum_binomials(j - 1, k);
        upper *= sum_binomials(j, k);
    }
    Ok((lower, upper))
}

/// `|L_m| = Π (2^{m_{i+1}})^{m_i}` and `|L_{m,k}| = Π [Σ_{j≤k} C(m_{i+1}, j)]^{m_i}`.
pub fn count_layered(spec: &EnsembleSpec) -> Result<BigCount> {
    if !spec.kind.is_layered() {
        return Err(Error::Usage(format!("{} is not a layered ensemble", spec.kind.name())));
    }
    let mut total = BigUint::one();
    for w in spec.layers.windows(2) {
        let (below, above) = (w[0] as u64, w[1] as u64);
        let per_node = match spec.k {
            Some(k) => sum_binomials(above, k as u64),
            None => pow2(above),
        };
        total *= num_traits::pow(per_node, below as usize);
    }
    Ok(total)
}

/// Closed-form lower bound on `ln |ensemble|`, in nats.
pub fn log_size_lower_bound(spec: &EnsembleSpec) -> Result<f64> {
    let m = spec.m as f64;
    match spec.kind {
        EnsembleKind::RestrictedAll => Ok((m * (m - 3.0) / 2.0 + 1.0) * LN_2),
        EnsembleKind::RestrictedSparse => {
            let k_int = spec.k.expect("sparse spec has k");
            check_sparse_domain(spec.m, k_int)?;
            let k = k_int as f64;
            Ok(k * (ln_factorial(spec.m as u64 - 2) - (m - k - 2.0) * k.ln() - ln_factorial(k_int as u64))
                + (k * (k - 3.0) / 2.0 + 1.0) * LN_2)
        }
        EnsembleKind::LayeredAll => Ok(LN_2
            * spec
                .layers
                .windows(2)
                .map(|w| (w[0] * w[1]) as f64)
                .sum::<f64>()),
        EnsembleKind::LayeredSparse => {
            let k = spec.k.expect("sparse spec has k") as f64;
            Ok(k * spec
                .layers
                .windows(2)
                .map(|w| w[0] as f64 * (w[1] as f64 / k).ln())
                .sum::<f64>())
        }
    }
}

/// `ln` of a big integer, accurate for values far beyond `f64` range.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        let digits = x.to_u64_digits();
        return digits
            .iter()
            .rev()
            .fold(0.0f64, |acc, &d| acc * 18446744073709551616.0 + d as f64)
            .ln();
    }
    let shift = bits - 64;
    let top: BigUint = x >> shift;
    let lead = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
    lead.ln() + shift as f64 * LN_2
}

/// An ensemble with its members listed in canonical order.
#[derive(Clone, Debug)]
pub struct Ensemble {
    spec: EnsembleSpec,
    members: Vec<Dag>,
}

impl Ensemble {
    pub fn enumerate(spec: &EnsembleSpec) -> Result<Self> {
        Self::enumerate_with(spec, &EnumLimits::from_env())
    }

    pub fn enumerate_with(spec: &EnsembleSpec, limits: &EnumLimits) -> Result<Self> {
        let members = if spec.kind.is_layered() {
            enumerate_layered(spec)?
        } else {
            dag::enumerate_dags_with(spec.m, spec.k, limits)?
                .filter(dag::is_singleton_class)
                .collect()
        };
        Ok(Ensemble {
            spec: spec.clone(),
            members,
        })
    }

    /// Process-wide read-only cache keyed by spec (default limits).
    pub fn cached(spec: &EnsembleSpec) -> Result<Arc<Ensemble>> {
        static CACHE: OnceLock<Mutex<HashMap<EnsembleSpec, Arc<Ensemble>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(e) = cache.lock().expect("cache lock").get(spec) {
            return Ok(Arc::clone(e));
        }
        let built = Arc::new(Ensemble::enumerate(spec)?);
        Ok(Arc::clone(
            cache
                .lock()
                .expect("cache lock")
                .entry(spec.clone())
                .or_insert(built),
        ))
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn members(&self) -> &[Dag] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, g: &Dag) -> Option<usize> {
        self.members
            .binary_search_by(|h| h.parent_masks().cmp(g.parent_masks()))
            .ok()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> &Dag {
        &self.members[rng.random_range(0..self.members.len())]
    }
}

fn submasks_ascending(allowed: u64, k: Option<usize>) -> Vec<u64> {
    let mut out = Vec::new();
    let mut sub = 0u64;
    loop {
        if k.is_none_or(|k| sub.count_ones() as usize <= k) {
            out.push(sub);
        }
        if sub == allowed {
            break;
        }
        sub = sub.wrapping_sub(allowed) & allowed;
    }
    out
}

fn enumerate_layered(spec: &EnsembleSpec) -> Result<Vec<Dag>> {
    check_materialisable(spec)?;
    let count = count_layered(spec)?;
    if count > BigUint::from(MAX_LAYERED_MEMBERS) {
        return Err(Error::Capability(format!(
            "{spec} has {count} members; enumeration is capped at {MAX_LAYERED_MEMBERS}"
        )));
    }
    let choices: Vec<Vec<u64>> = spec
        .allowed_parents()
        .into_iter()
        .map(|a| submasks_ascending(a, spec.k))
        .collect();
    let m = spec.m;
    let mut idx = vec![0usize; m];
    let mut out = Vec::new();
    loop {
        out.push(Dag::from_masks_unchecked(
            m,
            (0..m).map(|i| choices[i][idx[i]]).collect(),
        ));
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// One uniform draw from the ensemble, deterministic in `seed`.
pub fn sample_uniform(spec: &EnsembleSpec, seed: u64) -> Result<Dag> {
    let mut rng = rng::rng_from(seed);
    sample_with(spec, &mut rng)
}

pub fn sample_with<R: rand::Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<Dag> {
    check_materialisable(spec)?;
    if !spec.kind.is_layered() {
        let ens = Ensemble::cached(spec)?;
        return Ok(ens.sample(rng).clone());
    }
    let masks = spec
        .allowed_parents()
        .into_iter()
        .map(|allowed| sample_subset(allowed, spec.k, rng))
        .collect();
    Ok(Dag::from_masks_unchecked(spec.m, masks))
}

fn sample_subset<R: rand::Rng + ?Sized>(allowed: u64, k: Option<usize>, rng: &mut R) -> u64 {
    let members: Vec<usize> = (0..64).filter(|&i| allowed >> i & 1 == 1).collect();
    let a = members.len();
    let size = match k {
        None => return members.iter().filter(|_| rng.random_bool(0.5)).fold(0, |acc, &i| acc | 1 << i),
        Some(k) => {
            let weights: Vec<u128> = (0..=k.min(a))
                .map(|s| binomial(a as u64, s as u64).to_u64_digits().first().copied().unwrap_or(0) as u128)
                .collect();
            let total: u128 = weights.iter().sum();
            let mut r = rng.random_range(0..total);
            let mut s = 0;
            while r >= weights[s] {
                r -= weights[s];
                s += 1;
            }
            s
        }
    };
    rand::seq::index::sample(rng, a, size)
        .into_iter()
        .fold(0u64, |acc, j| acc | 1 << members[j])
}
