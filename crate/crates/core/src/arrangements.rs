//! Activation patterns of the central hyperplane arrangement `{u : x_iᵀu = 0}`.
//!
//! A pattern is the mask `1[Xu ≥ 0]` for some `u`; each one indexes a block of
//! variables in the convex training program. Exact enumeration inserts one
//! hyperplane at a time and splits every current region the new hyperplane
//! cuts. Whether a sign assignment is realizable is decided by a least-distance
//! program (`min ‖u‖ s.t. s_i x_iᵀu ≥ 1`) reduced to NNLS, which also yields a
//! max-margin witness.

use std::collections::HashSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::TwoLayerReLUNet;
use crate::numerics::vector::{dot, norm2};
use crate::numerics::{nnls, svd, NumericsError, RANK_TOL};
use crate::Matrix;

/// Relative margin used by [`default_margin`].
pub const MARGIN_REL: f64 = 1e-6;

/// Slack allowed when validating a witness against its mask.
pub const WITNESS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ArrangementError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("feasibility oracle failed on candidate pattern {pattern}: {source}")]
    Oracle {
        pattern: String,
        #[source]
        source: NumericsError,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("malformed arrangement: {0}")]
    Malformed(String),
}

/// Boolean mask of a diagonal 0/1 matrix `D = Diag(1[Xu ≥ 0])`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActivationPattern {
    mask: Vec<bool>,
}

impl ActivationPattern {
    pub fn new(mask: Vec<bool>) -> Self {
        ActivationPattern { mask }
    }

    /// Pattern of `t ↦ 1[t ≥ 0]` applied to the pre-activations.
    pub fn from_preactivations(z: &[f64]) -> Self {
        ActivationPattern {
            mask: z.iter().map(|&t| t >= 0.0).collect(),
        }
    }

    /// Parses a `0`/`1` string.
    pub fn from_bits(bits: &str) -> Result<Self, ArrangementError> {
        bits.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ArrangementError::Malformed(format!(
                    "pattern character {other:?} in {bits:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ActivationPattern::new)
    }

    pub fn to_bits(&self) -> String {
        self.mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.mask[i]
    }

    /// `+1` on active rows, `−1` elsewhere (the diagonal of `2D − I`).
    pub fn sign(&self, i: usize) -> f64 {
        if self.mask[i] {
            1.0
        } else {
            -1.0
        }
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Applies `D` to a vector.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect()
    }

    pub fn flipped(&self, idx: &[usize]) -> Self {
        let mut mask = self.mask.clone();
        for &i in idx {
            mask[i] = !mask[i];
        }
        ActivationPattern { mask }
    }

    /// `(2D − I) X`, the rows defining this pattern's polyhedral cone.
    pub fn cone_matrix(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.rows(), x.cols(), |i, j| self.sign(i) * x[(i, j)])
    }

    /// Most negative entry of `(2D − I) X u`, clipped at zero.
    pub fn violation(&self, x: &Matrix, u: &[f64]) -> f64 {
        let z = x.matvec(u);
        z.iter()
            .enumerate()
            .map(|(i, &t)| (-self.sign(i) * t).max(0.0))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bits())
    }
}

/// Ordered list of distinct patterns, each with a witness `u` realizing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArrangementJson", into = "ArrangementJson")]
pub struct ArrangementSet {
    n: usize,
    patterns: Vec<ActivationPattern>,
    witnesses: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ArrangementJson {
    n: usize,
    patterns: Vec<String>,
    witnesses: Vec<Vec<f64>>,
}

impl From<ArrangementSet> for ArrangementJson {
    fn from(a: ArrangementSet) -> Self {
        ArrangementJson {
            n: a.n,
            patterns: a.patterns.iter().map(ActivationPattern::to_bits).collect(),
            witnesses: a.witnesses,
        }
    }
}

impl TryFrom<ArrangementJson> for ArrangementSet {
    type Error = ArrangementError;

    fn try_from(j: ArrangementJson) -> Result<Self, Self::Error> {
        if j.patterns.len() != j.witnesses.len() {
            return Err(ArrangementError::Malformed(format!(
                "{} patterns but {} witnesses",
                j.patterns.len(),
                j.witnesses.len()
            )));
        }
        let mut set = ArrangementSet::empty(j.n);
        for (bits, w) in j.patterns.iter().zip(j.witnesses) {
            let p = ActivationPattern::from_bits(bits)?;
            if !set.insert(p, w)? {
                return Err(ArrangementError::Malformed(format!("duplicate pattern {bits}")));
            }
        }
        Ok(set)
    }
}

impl ArrangementSet {
    pub fn empty(n: usize) -> Self {
        ArrangementSet {
            n,
            patterns: Vec::new(),
            witnesses: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn patterns(&self) -> &[ActivationPattern] {
        &self.patterns
    }

    pub fn witnesses(&self) -> &[Vec<f64>] {
        &self.witnesses
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ActivationPattern, &[f64])> {
        self.patterns
            .iter()
            .zip(self.witnesses.iter().map(Vec::as_slice))
    }

    pub fn contains(&self, p: &ActivationPattern) -> bool {
        self.patterns.contains(p)
    }

    /// Adds a pattern unless already present; returns whether it was added.
    pub fn insert(
        &mut self,
        pattern: ActivationPattern,
        witness: Vec<f64>,
    ) -> Result<bool, ArrangementError> {
        if pattern.len() != self.n {
            return Err(ArrangementError::Malformed(format!(
                "pattern of length {} in a set over {} samples",
                pattern.len(),
                self.n
            )));
        }
        if self.contains(&pattern) {
            return Ok(false);
        }
        self.patterns.push(pattern);
        self.witnesses.push(witness);
        Ok(true)
    }

    /// The patterns at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        ArrangementSet {
            n: self.n,
            patterns: idx.iter().map(|&i| self.patterns[i].clone()).collect(),
            witnesses: idx.iter().map(|&i| self.witnesses[i].clone()).collect(),
        }
    }

    /// Union preserving the order of `self` first.
    pub fn union(&self, other: &Self) -> Result<Self, ArrangementError> {
        let mut out = self.clone();
        for (p, w) in other.iter() {
            out.insert(p.clone(), w.to_vec())?;
        }
        Ok(out)
    }

    /// Index of the first witness that does not realize its pattern.
    pub fn first_invalid_witness(&self, x: &Matrix) -> Option<usize> {
        let scale = x.max_abs().max(1.0);
        self.iter().position(|(p, w)| {
            w.len() != x.cols() || p.violation(x, w) > WITNESS_TOL * scale
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("arrangement serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ArrangementError> {
        serde_json::from_str(s).map_err(|e| ArrangementError::Malformed(e.to_string()))
    }
}

/// `2 Σ_{k<r} C(n−1, k)`, the number of regions cut out by `n` central
/// hyperplanes in general position in `R^r`.
pub fn region_count_bound(n: usize, r: usize) -> Result<u64, ArrangementError> {
    if r == 0 || r > n {
        return Err(ArrangementError::InvalidArgument(format!(
            "region count needs 1 ≤ r ≤ n, got n = {n}, r = {r}"
        )));
    }
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 0..r {
        if k > 0 {
            binom = binom * (n as u128 - k as u128) / k as u128;
        }
        total += binom;
    }
    u64::try_from(2 * total)
        .map_err(|_| ArrangementError::InvalidArgument(format!("region count overflows for n = {n}")))
}

/// `MARGIN_REL · max_i ‖x_i‖`.
pub fn default_margin(x: &Matrix) -> f64 {
    let m = x.row_norms().into_iter().fold(0.0, f64::max);
    if m > 0.0 {
        MARGIN_REL * m
    } else {
        MARGIN_REL
    }
}

/// Max-margin unit vector `u` with `rows_i · u ≥ margin` for all rows, if one
/// exists.
///
/// Solves the least-distance program `min ‖u‖ s.t. G u ≥ 1` through the NNLS
/// problem `min_{λ≥0} ‖[Gᵀ; 1ᵀ] λ − e_{d+1}‖`; a nonzero residual `r` gives
/// `u = −r_{1..d} / r_{d+1}` and the attainable margin is `1/‖u‖`.
fn strict_witness(g: &Matrix, margin: f64) -> Result<Option<Vec<f64>>, NumericsError> {
    let (k, d) = g.shape();
    if k == 0 {
        let mut u = vec![0.0; d];
        if d > 0 {
            u[0] = 1.0;
        }
        return Ok(Some(u));
    }
    let e = Matrix::from_fn(d + 1, k, |i, j| if i < d { g[(j, i)] } else { 1.0 });
    let mut f = vec![0.0; d + 1];
    f[d] = 1.0;
    let lambda = nnls(&e, &f)?;
    let fit = e.matvec(&lambda);
    let r: Vec<f64> = fit.iter().zip(&f).map(|(a, b)| a - b).collect();
    let denom = r[d];
    if denom.abs() < 1e-14 {
        return Ok(None);
    }
    let u: Vec<f64> = r[..d].iter().map(|&v| -v / denom).collect();
    let nu = norm2(&u);
    if !(nu > 0.0) || !nu.is_finite() {
        return Ok(None);
    }
    let unit: Vec<f64> = u.iter().map(|&v| v / nu).collect();
    let achieved = (0..k)
        .map(|i| dot(g.row(i), &unit))
        .fold(f64::INFINITY, f64::min);
    if achieved >= margin {
        Ok(Some(unit))
    } else {
        Ok(None)
    }
}

/// A unit witness for `mask` with margin `margin` (full-dimensional region),
/// or `None` when the sign pattern is not realizable with that margin.
pub fn realize(
    x: &Matrix,
    pattern: &ActivationPattern,
    margin: f64,
) -> Result<Option<Vec<f64>>, ArrangementError> {
    if pattern.len() != x.rows() {
        return Err(ArrangementError::InvalidArgument(format!(
            "pattern of length {} for {} samples",
            pattern.len(),
            x.rows()
        )));
    }
    let norms = x.row_norms();
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let mut rows = Vec::new();
    for i in 0..x.rows() {
        if norms[i] <= 1e-14 * scale.max(1e-300) {
            // x_iᵀu = 0 always counts as active
            if !pattern.is_active(i) {
                return Ok(None);
            }
            continue;
        }
        rows.push(x.row(i).iter().map(|&v| pattern.sign(i) * v).collect::<Vec<_>>());
    }
    let g = if rows.is_empty() {
        Matrix::zeros(0, x.cols())
    } else {
        Matrix::from_rows(&rows)?
    };
    strict_witness(&g, margin).map_err(|source| ArrangementError::Oracle {
        pattern: pattern.to_bits(),
        source,
    })
}

/// Every full-dimensional region of the arrangement, by incremental
/// hyperplane insertion in the rank-reduced coordinates `X V_r`.
pub fn enumerate_exact(x: &Matrix, margin: f64) -> Result<ArrangementSet, ArrangementError> {
    if x.is_empty() {
        return Err(ArrangementError::InvalidArgument("empty data matrix".into()));
    }
    if !(margin > 0.0) {
        return Err(ArrangementError::InvalidArgument(format!(
            "margin must be positive, got {margin}"
        )));
    }
    let (n, d) = x.shape();
    let dec = svd(x)?;
    let r = dec.rank(RANK_TOL);
    if r == 0 {
        let mut set = ArrangementSet::empty(n);
        let mut u = vec![0.0; d];
        u[0] = 1.0;
        set.insert(ActivationPattern::new(vec![true; n]), u)?;
        return Ok(set);
    }
    // reduced rows z_i = V_rᵀ x_i
    let z = Matrix::from_fn(n, r, |i, k| dec.u[(i, k)] * dec.singular_values[k]);
    let norms = z.row_norms();
    let scale = norms.iter().cloned().fold(0.0, f64::max);

    let mut first = vec![0.0; r];
    first[0] = 1.0;
    let mut regions: Vec<(Vec<bool>, Vec<f64>)> = vec![(Vec::new(), first)];
    // signed rows seen so far, per region, are rebuilt from the prefix mask
    let mut placed: Vec<usize> = Vec::new();
    for i in 0..n {
        let zi = z.row(i);
        if norms[i] <= 1e-12 * scale {
            for (mask, _) in regions.iter_mut() {
                mask.push(true);
            }
            continue;
        }
        let mut next = Vec::with_capacity(regions.len() * 2);
        for (mask, w) in regions {
            let t = dot(zi, &w);
            for side in [true, false] {
                let s = if side { 1.0 } else { -1.0 };
                let witness = if s * t >= margin {
                    Some(w.clone())
                } else {
                    let mut rows: Vec<Vec<f64>> = placed
                        .iter()
                        .map(|&j| {
                            let sj = if mask[j] { 1.0 } else { -1.0 };
                            z.row(j).iter().map(|&v| sj * v).collect()
                        })
                        .collect();
                    rows.push(zi.iter().map(|&v| s * v).collect());
                    let g = Matrix::from_rows(&rows)?;
                    strict_witness(&g, margin).map_err(|source| {
                        let mut cand = mask.clone();
                        cand.push(side);
                        cand.resize(n, false);
                        ArrangementError::Oracle {
                            pattern: ActivationPattern::new(cand).to_bits(),
                            source,
                        }
                    })?
                };
                if let Some(wit) = witness {
                    let mut m = mask.clone();
                    m.push(side);
                    next.push((m, wit));
                }
            }
        }
        regions = next;
        placed.push(i);
    }

    let mut set = ArrangementSet::empty(n);
    for (mask, w) in regions {
        // back to the original coordinates: u = V_r w
        let u: Vec<f64> = (0..d)
            .map(|j| (0..r).map(|k| dec.v[(j, k)] * w[k]).sum())
            .collect();
        set.insert(ActivationPattern::new(mask), u)?;
    }
    Ok(set)
}

/// Patterns of `count` Gaussian directions `u ~ N(0, I_d)`, deduplicated.
pub fn sample_patterns(
    x: &Matrix,
    count: usize,
    seed: u64,
) -> Result<ArrangementSet, ArrangementError> {
    if count == 0 {
        return Err(ArrangementError::InvalidArgument("sample count must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = ArrangementSet::empty(x.rows());
    let mut seen = HashSet::new();
    for _ in 0..count {
        let u: Vec<f64> = (0..x.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = ActivationPattern::from_preactivations(&x.matvec(&u));
        if seen.insert(p.clone()) {
            let nu = norm2(&u);
            let w = if nu > 0.0 { u.iter().map(|v| v / nu).collect() } else { u };
            set.insert(p, w)?;
        }
    }
    Ok(set)
}

/// Distinct patterns of a network's hidden neurons, with the neurons as
/// witnesses.
pub fn harvest_patterns(
    x: &Matrix,
    net: &TwoLayerReLUNet,
) -> Result<ArrangementSet, ArrangementError> {
    if net.width() == 0 {
        return Err(ArrangementError::InvalidArgument("network has no neurons".into()));
    }
    check_dims(x, net)?;
    let mut set = ArrangementSet::empty(x.rows());
    for j in 0..net.width() {
        let u = net.hidden(j);
        let p = ActivationPattern::from_preactivations(&x.matvec(&u));
        set.insert(p, u)?;
    }
    Ok(set)
}

/// Harvested patterns plus, per neuron, a variant with the bits of its
/// `⌊quantile · n⌋` smallest `|x_iᵀu|` flipped (ties at the threshold are all
/// flipped). Variants that are not realizable regions are dropped.
pub fn adaptive_flip(
    x: &Matrix,
    net: &TwoLayerReLUNet,
    quantile: f64,
) -> Result<ArrangementSet, ArrangementError> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(ArrangementError::InvalidArgument(format!(
            "quantile must lie in (0, 1), got {quantile}"
        )));
    }
    if net.width() == 0 {
        return Err(ArrangementError::InvalidArgument("network has no neurons".into()));
    }
    check_dims(x, net)?;
    let n = x.rows();
    let margin = default_margin(x);
    let k = (quantile * n as f64).floor() as usize;
    let mut set = ArrangementSet::empty(n);
    for j in 0..net.width() {
        let u = net.hidden(j);
        let pre = x.matvec(&u);
        let base = ActivationPattern::from_preactivations(&pre);
        set.insert(base.clone(), u)?;
        if k == 0 {
            continue;
        }
        let mut mags: Vec<f64> = pre.iter().map(|t| t.abs()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let threshold = mags[k - 1];
        let idx: Vec<usize> = (0..n).filter(|&i| pre[i].abs() <= threshold).collect();
        let variant = base.flipped(&idx);
        if set.contains(&variant) {
            continue;
        }
        if let Some(w) = realize(x, &variant, margin)? {
            set.insert(variant, w)?;
        }
    }
    Ok(set)
}

fn check_dims(x: &Matrix, net: &TwoLayerReLUNet) -> Result<(), ArrangementError> {
    if net.input_dim() != x.cols() {
        return Err(ArrangementError::InvalidArgument(format!(
            "network input dimension {} does not match {} data columns",
            net.input_dim(),
            x.cols()
        )));
    }
    Ok(())
}
