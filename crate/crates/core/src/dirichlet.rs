//! Dirichlet-multinomial conjugacy and the Chinese-restaurant table-count
//! distribution.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{digamma_diff, ln_gamma, log_sum_exp, StirlingTable};

/// Strictly positive Dirichlet pseudo-counts `α_1..α_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidParameter("Dirichlet needs K >= 1".into()));
        }
        if let Some(bad) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet parameter {bad} is not finite and positive"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.alpha
    }
}

/// Category counts `n_1..n_K` for one group. Only sufficient statistics
/// are kept; the order of observations is irrelevant to every likelihood
/// here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    counts: Vec<usize>,
    total: usize,
}

impl CountVector {
    pub fn new(counts: Vec<usize>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

impl From<Vec<usize>> for CountVector {
    fn from(counts: Vec<usize>) -> Self {
        Self::new(counts)
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector {
    theta: Vec<f64>,
}

impl SimplexVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() || theta.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidParameter(
                "simplex components must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "simplex components sum to {sum}"
            )));
        }
        Ok(Self { theta })
    }

    /// Normalizes non-negative weights with a positive total.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {sum}"
            )));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    /// Uniform point `1/K`.
    pub fn uniform(k: usize) -> Self {
        Self {
            theta: vec![1.0 / k as f64; k],
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `ln Γ(α + n) − ln Γ(α)`, the log rising factorial.
#[inline]
pub(crate) fn log_rising(alpha: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        ln_gamma(alpha + n as f64) - ln_gamma(alpha)
    }
}

/// Sequence-level log marginal likelihood `ln p(n | α)` with `θ`
/// integrated out:
///
/// `ln Γ(Σα) − ln Γ(Σα + n) + Σ_k [ln Γ(α_k + n_k) − ln Γ(α_k)]`.
///
/// No multinomial coefficient is included.
pub fn dm_log_marginal(prior: &DirichletParams, data: &CountVector) -> Result<f64> {
    check_dims(prior.len(), data.len())?;
    let per_category: f64 = prior
        .alpha()
        .iter()
        .zip(data.counts())
        .map(|(&a, &n)| log_rising(a, n))
        .sum();
    Ok(per_category - log_rising(prior.sum(), data.total()))
}

/// Conjugate update `α_k + n_k`.
pub fn dm_posterior(prior: &DirichletParams, data: &CountVector) -> Result<DirichletParams> {
    check_dims(prior.len(), data.len())?;
    DirichletParams::new(
        prior
            .alpha()
            .iter()
            .zip(data.counts())
            .map(|(&a, &n)| a + n as f64)
            .collect(),
    )
}

/// Sums parameters over the blocks of a partition of `0..K`.
///
/// If `θ ~ Dir(α)` then the block sums of `θ` follow `Dir` of the block sums
/// of `α`.
pub fn aggregate(params: &DirichletParams, blocks: &[Vec<usize>]) -> Result<DirichletParams> {
    let k = params.len();
    let mut seen = vec![false; k];
    for &i in blocks.iter().flatten() {
        if i >= k {
            return Err(Error::InvalidPartition(format!("index {i} out of range 0..{k}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidPartition(format!("index {i} appears twice")));
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPartition(format!("index {missing} not covered")));
    }
    if blocks.iter().any(|b| b.is_empty()) {
        return Err(Error::InvalidPartition("empty block".into()));
    }
    DirichletParams::new(
        blocks
            .iter()
            .map(|b| b.iter().map(|&i| params.alpha()[i]).sum())
            .collect(),
    )
}

/// `ln G` for `G ~ Gamma(shape, 1)`. Small shapes use
/// `G = G' · U^{1/shape}` with `G' ~ Gamma(shape + 1, 1)` so the draw does
/// not underflow to zero.
pub(crate) fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("positive shape");
        g.sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape");
        let u: f64 = rng.random::<f64>();
        // random() is in [0, 1); map 0 to the smallest positive value.
        g.sample(rng).ln() + u.max(f64::MIN_POSITIVE).ln() / shape
    }
}

/// Draws `θ ~ Dir(α)` by normalizing independent Gamma variates (in log
/// space).
pub fn sample_dirichlet<R: Rng + ?Sized>(params: &DirichletParams, rng: &mut R) -> SimplexVector {
    let logs: Vec<f64> = params
        .alpha()
        .iter()
        .map(|&a| sample_log_gamma(a, rng))
        .collect();
    let norm = log_sum_exp(&logs).expect("K >= 1");
    let mut theta: Vec<f64> = logs.iter().map(|l| (l - norm).exp()).collect();
    // Renormalize once more so the sum is 1 to within a few ulps.
    let s: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|t| *t /= s);
    SimplexVector { theta }
}

fn check_concentration(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "concentration {alpha} is not finite and positive"
        )));
    }
    Ok(())
}

/// `ln p(m | n, α)` for the number of occupied tables `m` after seating `n`
/// customers in a Chinese restaurant with concentration `α`:
///
/// `ln s(n, m) + m ln α − [ln Γ(α + n) − ln Γ(α)]`.
pub fn table_count_log_pmf(
    stirling: &StirlingTable,
    alpha: f64,
    n: usize,
    m: usize,
) -> Result<f64> {
    check_concentration(alpha)?;
    if m > n {
        return Err(Error::Constraint(format!("table count {m} exceeds customers {n}")));
    }
    let s = stirling.try_log_stirling(n, m)?;
    if s == f64::NEG_INFINITY {
        return Ok(s);
    }
    Ok(s + m as f64 * alpha.ln() - log_rising(alpha, n))
}

/// Expected table count `α (Ψ(α + n) − Ψ(α))`.
pub fn expected_tables(alpha: f64, n: usize) -> Result<f64> {
    check_concentration(alpha)?;
    Ok(alpha * digamma_diff(alpha, n))
}

/// Draws a table count as a sum of independent
/// `Bernoulli(α / (α + i))`, `i = 0..n`. O(n) time, no table memory.
pub fn sample_table_count_crt<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> usize {
    (0..n)
        .filter(|&i| rng.random::<f64>() * (alpha + i as f64) < alpha)
        .count()
}

/// Draws a table count by inverting the CDF of [`table_count_log_pmf`].
/// Requires `n` within the Stirling table.
pub fn sample_table_count_inverse_cdf<R: Rng + ?Sized>(
    stirling: &StirlingTable,
    alpha: f64,
    n: usize,
    rng: &mut R,
) -> Result<usize> {
    check_concentration(alpha)?;
    let u: f64 = rng.random();
    let mut cdf = 0.0;
    for m in 0..=n {
        cdf += table_count_log_pmf(stirling, alpha, n, m)?.exp();
        if u < cdf {
            return Ok(m);
        }
    }
    Ok(n)
}
