//! The Multi-Dirichlet prior and its auxiliary variables.
//!
//! An [`MDPrior`] holds `J` parent vectors `α_j ∈ ℝ^K_{>0}`; the group prior
//! is `Dir(Σ_j α_j1, …, Σ_j α_jK)`. Each observed count `n_k` can be split
//! into parent counts `n'_jk` (which parent explained the draw), and each
//! parent count carries a table count `m'_jk`. Given those auxiliaries the
//! joint factorizes over parents with no sums inside powers, which is what
//! makes per-parent inference tractable.
//!
//! Multinomial parameters are always integrated out; only count statistics
//! are represented.

use rand::Rng;

use crate::dirichlet::{dm_log_marginal, expected_tables, log_rising, CountVector, DirichletParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::special::{digamma_diff, ln_gamma, StirlingTable};

/// `J × K` matrix of strictly positive parent parameters `α_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct MDPrior {
    parents: Matrix<f64>,
    collapsed: Vec<f64>,
}

impl MDPrior {
    pub fn new(parents: Matrix<f64>) -> Result<Self> {
        if parents.rows() == 0 || parents.cols() == 0 {
            return Err(Error::InvalidParameter("MD prior needs J >= 1 and K >= 1".into()));
        }
        if let Some(bad) = parents.as_slice().iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "parent parameter {bad} is not finite and positive"
            )));
        }
        let collapsed = parents.column_sums();
        Ok(Self { parents, collapsed })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows)
            .ok_or_else(|| Error::InvalidParameter("parent rows empty or ragged".into()))?;
        Self::new(m)
    }

    pub fn parents(&self) -> &Matrix<f64> {
        &self.parents
    }

    pub fn num_parents(&self) -> usize {
        self.parents.rows()
    }

    pub fn num_categories(&self) -> usize {
        self.parents.cols()
    }

    #[inline]
    pub fn alpha(&self, j: usize, k: usize) -> f64 {
        self.parents.get(j, k)
    }

    /// Column sums `Σ_j α_jk`.
    pub fn collapsed(&self) -> &[f64] {
        &self.collapsed
    }

    /// The equivalent single Dirichlet.
    pub fn collapse(&self) -> DirichletParams {
        DirichletParams::new(self.collapsed.clone()).expect("sums of positive parameters")
    }

    fn check_data(&self, data: &CountVector) -> Result<()> {
        if data.len() != self.num_categories() {
            return Err(Error::DimensionMismatch {
                expected: self.num_categories(),
                found: data.len(),
            });
        }
        Ok(())
    }

    fn check_shape<T>(&self, m: &Matrix<T>) -> Result<()> {
        if m.rows() != self.num_parents() {
            return Err(Error::DimensionMismatch {
                expected: self.num_parents(),
                found: m.rows(),
            });
        }
        if m.cols() != self.num_categories() {
            return Err(Error::DimensionMismatch {
                expected: self.num_categories(),
                found: m.cols(),
            });
        }
        Ok(())
    }

    /// `ln Γ(Σ_k α_k) − ln Γ(Σ_k α_k + n)`, shared by every joint below.
    fn log_normalizer(&self, data: &CountVector) -> f64 {
        -log_rising(self.collapsed.iter().sum(), data.total())
    }
}

/// Split of each category count between parents: `n'_jk`, with
/// `Σ_j n'_jk = n_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentCounts {
    pub counts: Matrix<usize>,
}

impl ParentCounts {
    pub fn new(counts: Matrix<usize>) -> Self {
        Self { counts }
    }

    pub fn column_totals(&self) -> Vec<usize> {
        self.counts.column_sums()
    }

    /// Checks the split against the observed counts.
    pub fn validate(&self, data: &CountVector) -> Result<()> {
        let totals = self.column_totals();
        if totals != data.counts() {
            return Err(Error::Constraint(format!(
                "parent counts sum to {totals:?}, observed {:?}",
                data.counts()
            )));
        }
        Ok(())
    }
}

/// Per-parent table counts `m'_jk`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentTables {
    pub tables: Matrix<usize>,
}

impl ParentTables {
    pub fn new(tables: Matrix<usize>) -> Self {
        Self { tables }
    }

    /// Per-category totals `m_k = Σ_j m'_jk`.
    pub fn totals(&self) -> Vec<usize> {
        self.tables.column_sums()
    }

    /// `0 ≤ m'_jk ≤ n'_jk` and `m'_jk = 0 ⇔ n'_jk = 0`.
    pub fn validate(&self, split: &ParentCounts) -> Result<()> {
        let (t, c) = (&self.tables, &split.counts);
        if t.rows() != c.rows() || t.cols() != c.cols() {
            return Err(Error::DimensionMismatch {
                expected: c.rows() * c.cols(),
                found: t.rows() * t.cols(),
            });
        }
        for (&m, &n) in t.as_slice().iter().zip(c.as_slice()) {
            if m > n || ((m == 0) != (n == 0)) {
                return Err(Error::Constraint(format!(
                    "{m} tables for {n} customers"
                )));
            }
        }
        Ok(())
    }
}

/// Parameters of the equivalent single Dirichlet, `Σ_j α_jk`.
pub fn collapse(md: &MDPrior) -> DirichletParams {
    md.collapse()
}

/// `ln p(n | α_1..α_J)`. Depends on the parents only through their column
/// sums.
pub fn md_log_marginal(md: &MDPrior, data: &CountVector) -> Result<f64> {
    md.check_data(data)?;
    dm_log_marginal(&md.collapse(), data)
}

fn log_multinomial(total: usize, parts: impl Iterator<Item = usize>) -> f64 {
    ln_gamma(total as f64 + 1.0) - parts.map(|p| ln_gamma(p as f64 + 1.0)).sum::<f64>()
}

/// `ln p(n' | n, α)`: for each category a Dirichlet-multinomial over the
/// `J` parents (with multinomial coefficient) with parameters `α_·k` and
/// total `n_k`.
pub fn parent_counts_log_pmf(md: &MDPrior, data: &CountVector, split: &ParentCounts) -> Result<f64> {
    md.check_data(data)?;
    md.check_shape(&split.counts)?;
    split.validate(data)?;
    let mut total = 0.0;
    for (k, &n_k) in data.counts().iter().enumerate() {
        if n_k == 0 {
            continue;
        }
        total += log_multinomial(n_k, split.counts.column(k));
        for j in 0..md.num_parents() {
            total += log_rising(md.alpha(j, k), split.counts.get(j, k));
        }
        total -= log_rising(md.collapsed[k], n_k);
    }
    Ok(total)
}

/// `E[n'_jk | n] = α_jk / (Σ_j' α_j'k) · n_k`.
pub fn expected_parent_counts(md: &MDPrior, data: &CountVector) -> Result<Matrix<f64>> {
    md.check_data(data)?;
    Ok(Matrix::from_fn(md.num_parents(), md.num_categories(), |j, k| {
        md.alpha(j, k) / md.collapsed[k] * data.counts()[k] as f64
    }))
}

/// Joint `ln p(n, m | α)` with per-category table totals `m_k` and the
/// collapsed parameter `Σ_j α_jk` in the power.
pub fn summed_table_joint_log(
    stirling: &StirlingTable,
    md: &MDPrior,
    data: &CountVector,
    tables: &[usize],
) -> Result<f64> {
    md.check_data(data)?;
    if tables.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: tables.len(),
        });
    }
    let mut total = md.log_normalizer(data);
    for ((&n_k, &m_k), &a_k) in data.counts().iter().zip(tables).zip(md.collapsed()) {
        if m_k > n_k {
            return Err(Error::Constraint(format!("{m_k} tables for {n_k} customers")));
        }
        total += stirling.try_log_stirling(n_k, m_k)? + m_k as f64 * a_k.ln();
    }
    Ok(total)
}

/// Joint `ln p(n, n', m' | α)`:
///
/// `ln Γ(A) − ln Γ(A + n) + Σ_k [ln C(n_k; n'_·k) + Σ_j (ln s(n'_jk, m'_jk) + m'_jk ln α_jk)]`
///
/// where `A = Σ_jk α_jk`. No sum of parameters appears inside a power.
pub fn parent_tables_joint_log(
    stirling: &StirlingTable,
    md: &MDPrior,
    data: &CountVector,
    split: &ParentCounts,
    tables: &ParentTables,
) -> Result<f64> {
    md.check_data(data)?;
    md.check_shape(&split.counts)?;
    split.validate(data)?;
    tables.validate(split)?;
    let mut total = md.log_normalizer(data);
    for (k, &n_k) in data.counts().iter().enumerate() {
        if n_k == 0 {
            continue;
        }
        total += log_multinomial(n_k, split.counts.column(k));
        for j in 0..md.num_parents() {
            let (n, m) = (split.counts.get(j, k), tables.tables.get(j, k));
            total += stirling.try_log_stirling(n, m)? + m as f64 * md.alpha(j, k).ln();
        }
    }
    Ok(total)
}

/// `E[m'_jk | n] = α_jk (Ψ(α_k + n_k) − Ψ(α_k))` with `α_k = Σ_j α_jk`.
pub fn expected_parent_tables(md: &MDPrior, data: &CountVector) -> Result<Matrix<f64>> {
    md.check_data(data)?;
    let diffs: Vec<f64> = md
        .collapsed
        .iter()
        .zip(data.counts())
        .map(|(&a, &n)| digamma_diff(a, n))
        .collect();
    Ok(Matrix::from_fn(md.num_parents(), md.num_categories(), |j, k| {
        md.alpha(j, k) * diffs[k]
    }))
}

/// `E[m_k | n]` for the collapsed prior.
pub fn expected_table_totals(md: &MDPrior, data: &CountVector) -> Result<Vec<f64>> {
    md.check_data(data)?;
    md.collapsed
        .iter()
        .zip(data.counts())
        .map(|(&a, &n)| expected_tables(a, n))
        .collect()
}

fn pick<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draws `n' ~ p(n' | n, α)` with one `J`-colour Polya urn per category,
/// seeded with weights `α_1k..α_Jk` and run for `n_k` draws.
pub fn sample_parent_counts<R: Rng + ?Sized>(
    md: &MDPrior,
    data: &CountVector,
    rng: &mut R,
) -> Result<ParentCounts> {
    md.check_data(data)?;
    let j_count = md.num_parents();
    let mut counts = Matrix::zeros(j_count, md.num_categories());
    for (k, &n_k) in data.counts().iter().enumerate() {
        for i in 0..n_k {
            let total = md.collapsed[k] + i as f64;
            let j = pick(
                (0..j_count).map(|j| md.alpha(j, k) + counts.get(j, k) as f64),
                total,
                rng,
            );
            *counts.get_mut(j, k) += 1;
        }
    }
    Ok(ParentCounts::new(counts))
}

/// Draws `(n', m') ~ p(n', m' | n, α)`.
///
/// Per category a Chinese restaurant with concentration `α_k` seats `n_k`
/// customers. A new table picks parent `j` with probability `α_jk / α_k`;
/// joining an existing table lands on parent `j` with probability
/// proportional to the customers already at parent-`j` tables.
pub fn sample_parent_tables<R: Rng + ?Sized>(
    md: &MDPrior,
    data: &CountVector,
    rng: &mut R,
) -> Result<(ParentCounts, ParentTables)> {
    md.check_data(data)?;
    let (j_count, k_count) = (md.num_parents(), md.num_categories());
    let mut counts = Matrix::zeros(j_count, k_count);
    let mut tables = Matrix::zeros(j_count, k_count);
    for (k, &n_k) in data.counts().iter().enumerate() {
        let a_k = md.collapsed[k];
        for i in 0..n_k {
            let u = rng.random::<f64>() * (a_k + i as f64);
            let j = if u < a_k {
                let j = pick((0..j_count).map(|j| md.alpha(j, k)), a_k, rng);
                *tables.get_mut(j, k) += 1;
                j
            } else {
                pick((0..j_count).map(|j| counts.get(j, k) as f64), i as f64, rng)
            };
            *counts.get_mut(j, k) += 1;
        }
    }
    Ok((ParentCounts::new(counts), ParentTables::new(tables)))
}
