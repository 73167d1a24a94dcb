//! Ground truth by brute force.
//!
//! Everything here is computed from first principles (explicit rising
//! factorial products, explicit factorials, explicit table seating) and
//! shares only [`crate::special`] with the closed forms it checks.

use rand::Rng;
use serde::Serialize;

use crate::dirichlet::CountVector;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::multi::{MDPrior, ParentCounts};
use crate::special::{log_add_exp, StirlingTable};

/// Caps on the size of exhaustive enumerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnumerationBudget {
    pub max_total_count: usize,
    pub max_parents: usize,
    pub max_categories: usize,
    pub max_configurations: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_total_count: 8,
            max_parents: 3,
            max_categories: 3,
            max_configurations: 10_000_000,
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of ways to split `n` into `parts` ordered non-negative parts.
pub fn composition_count(n: usize, parts: usize) -> u64 {
    if parts == 0 {
        return u64::from(n == 0);
    }
    binomial((n + parts - 1) as u64, (parts - 1) as u64)
}

impl EnumerationBudget {
    pub fn check(&self, data: &CountVector, num_parents: usize) -> Result<()> {
        if data.total() > self.max_total_count {
            return Err(Error::BudgetExceeded(format!(
                "total count {} > {}",
                data.total(),
                self.max_total_count
            )));
        }
        if num_parents > self.max_parents {
            return Err(Error::BudgetExceeded(format!("{num_parents} parents > {}", self.max_parents)));
        }
        if data.len() > self.max_categories {
            return Err(Error::BudgetExceeded(format!(
                "{} categories > {}",
                data.len(),
                self.max_categories
            )));
        }
        let configs = data
            .counts()
            .iter()
            .map(|&n| composition_count(n, num_parents))
            .fold(1u64, u64::saturating_mul);
        if configs > self.max_configurations {
            return Err(Error::BudgetExceeded(format!(
                "{configs} configurations > {}",
                self.max_configurations
            )));
        }
        Ok(())
    }
}

// Advances a weak composition of a fixed total into `c.len()` parts, from
// (n, 0, …, 0) down to (0, …, 0, n). Returns false after the last one.
fn next_composition(c: &mut [usize]) -> bool {
    let last = c.len() - 1;
    let tail = std::mem::replace(&mut c[last], 0);
    match (0..last).rev().find(|&i| c[i] > 0) {
        Some(i) => {
            c[i] -= 1;
            c[i + 1] = tail + 1;
            true
        }
        None => {
            c[last] = tail;
            false
        }
    }
}

/// Streams every `J × K` matrix with column sums `n_k`, each exactly once,
/// using an odometer over per-category compositions. Memory is `O(J·K)`.
pub struct Compositions {
    columns: Vec<Vec<usize>>,
    totals: Vec<usize>,
    done: bool,
}

impl Iterator for Compositions {
    type Item = ParentCounts;

    fn next(&mut self) -> Option<ParentCounts> {
        if self.done {
            return None;
        }
        let j = self.columns.first().map_or(0, Vec::len);
        let item = Matrix::from_fn(j, self.columns.len(), |r, c| self.columns[c][r]);
        // advance the odometer
        let mut k = 0;
        loop {
            if k == self.columns.len() {
                self.done = true;
                break;
            }
            if next_composition(&mut self.columns[k]) {
                break;
            }
            // wrapped: reset this digit to its first composition and carry
            let col = &mut self.columns[k];
            col.iter_mut().for_each(|v| *v = 0);
            col[0] = self.totals[k];
            k += 1;
        }
        Some(ParentCounts::new(item))
    }
}

/// Enumerates all parent-count splits of `data` over `num_parents` parents.
pub fn enumerate_parent_count_compositions(
    data: &CountVector,
    num_parents: usize,
    budget: &EnumerationBudget,
) -> Result<Compositions> {
    if num_parents == 0 {
        return Err(Error::InvalidParameter("J must be at least 1".into()));
    }
    budget.check(data, num_parents)?;
    let columns = data
        .counts()
        .iter()
        .map(|&n| {
            let mut c = vec![0; num_parents];
            c[0] = n;
            c
        })
        .collect();
    Ok(Compositions {
        columns,
        totals: data.counts().to_vec(),
        done: false,
    })
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

fn ln_rising_product(a: f64, n: usize) -> f64 {
    (0..n).map(|i| (a + i as f64).ln()).sum()
}

/// Visits every `(n', m')` configuration with its log joint weight
/// `ln p(n, n', m' | α)`.
fn for_each_configuration(
    md: &MDPrior,
    data: &CountVector,
    budget: &EnumerationBudget,
    mut visit: impl FnMut(&Matrix<usize>, &Matrix<usize>, f64),
) -> Result<()> {
    if data.len() != md.num_categories() {
        return Err(Error::DimensionMismatch {
            expected: md.num_categories(),
            found: data.len(),
        });
    }
    let (j_count, k_count) = (md.num_parents(), md.num_categories());
    let stirling = StirlingTable::new(data.max_count())?;
    let total_alpha: f64 = md.parents().as_slice().iter().sum();
    let normalizer = -ln_rising_product(total_alpha, data.total());
    for split in enumerate_parent_count_compositions(data, j_count, budget)? {
        let split = split.counts;
        let mut base = normalizer;
        for k in 0..k_count {
            base += ln_factorial(data.counts()[k]);
            for j in 0..j_count {
                base -= ln_factorial(split.get(j, k));
            }
        }
        // odometer over m'_jk ∈ [min(1, n'_jk), n'_jk]
        let lo = split.map(|n| n.min(1));
        let mut tables = lo.clone();
        loop {
            let mut w = base;
            for j in 0..j_count {
                for k in 0..k_count {
                    let (n, m) = (split.get(j, k), tables.get(j, k));
                    w += stirling.log_stirling(n, m) + m as f64 * md.alpha(j, k).ln();
                }
            }
            visit(&split, &tables, w);
            let mut idx = 0;
            loop {
                if idx == j_count * k_count {
                    break;
                }
                let (j, k) = (idx / k_count, idx % k_count);
                if tables.get(j, k) < split.get(j, k) {
                    *tables.get_mut(j, k) += 1;
                    break;
                }
                tables.set(j, k, lo.get(j, k));
                idx += 1;
            }
            if idx == j_count * k_count {
                break;
            }
        }
    }
    Ok(())
}

/// `ln p(n | α)` by summing the parent-table joint over every `(n', m')`.
pub fn brute_force_marginal(md: &MDPrior, data: &CountVector, budget: &EnumerationBudget) -> Result<f64> {
    let mut acc = f64::NEG_INFINITY;
    for_each_configuration(md, data, budget, |_, _, w| acc = log_add_exp(acc, w))?;
    Ok(acc)
}

/// Exact posterior expectations by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactExpectations {
    pub parent_counts: Matrix<f64>,
    pub parent_tables: Matrix<f64>,
    pub tables: Vec<f64>,
}

/// `E[n']`, `E[m']` and `E[m]` given `n`, weighted by the enumerated joint.
pub fn brute_force_expectations(
    md: &MDPrior,
    data: &CountVector,
    budget: &EnumerationBudget,
) -> Result<ExactExpectations> {
    let log_z = brute_force_marginal(md, data, budget)?;
    let (j_count, k_count) = (md.num_parents(), md.num_categories());
    let mut counts = Matrix::zeros(j_count, k_count);
    let mut tables = Matrix::zeros(j_count, k_count);
    for_each_configuration(md, data, budget, |split, m, w| {
        let p = (w - log_z).exp();
        for j in 0..j_count {
            for k in 0..k_count {
                *counts.get_mut(j, k) += p * split.get(j, k) as f64;
                *tables.get_mut(j, k) += p * m.get(j, k) as f64;
            }
        }
    })?;
    let totals = tables.column_sums();
    Ok(ExactExpectations {
        parent_counts: counts,
        parent_tables: tables,
        tables: totals,
    })
}

/// What the urn is run on.
#[derive(Debug, Clone, PartialEq)]
pub enum UrnDraws {
    /// `n` draws whose categories come from the urn itself.
    Unconditioned(usize),
    /// Category counts fixed in advance; only the parent and table
    /// structure is random.
    Conditioned(CountVector),
}

/// Per-cell empirical means and standard errors from [`urn_simulate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UrnStats {
    pub reps: usize,
    pub mean_parent_counts: Matrix<f64>,
    pub se_parent_counts: Matrix<f64>,
    pub mean_parent_tables: Matrix<f64>,
    pub se_parent_tables: Matrix<f64>,
    pub mean_category_counts: Vec<f64>,
    pub mean_tables: Vec<f64>,
    pub se_tables: Vec<f64>,
}

struct Table {
    category: usize,
    parent: usize,
    size: usize,
}

#[derive(Default)]
struct Moments {
    sum: f64,
    sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sq += x * x;
    }

    fn mean_se(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = ((self.sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

fn seat<R: Rng + ?Sized>(
    tables: &mut Vec<Table>,
    new_weights: &[(usize, usize, f64)],
    seated: usize,
    category: Option<usize>,
    rng: &mut R,
) {
    let new_total: f64 = new_weights.iter().map(|w| w.2).sum();
    let mut u = rng.random::<f64>() * (new_total + seated as f64);
    for &(parent, k, w) in new_weights {
        if u < w {
            tables.push(Table {
                category: k,
                parent,
                size: 1,
            });
            return;
        }
        u -= w;
    }
    let mut chosen = None;
    for (i, t) in tables
        .iter()
        .enumerate()
        .filter(|(_, t)| category.is_none_or(|k| t.category == k))
    {
        chosen = Some(i);
        if u < t.size as f64 {
            break;
        }
        u -= t.size as f64;
    }
    // Rounding past the end seats at the last eligible table.
    if let Some(i) = chosen {
        tables[i].size += 1;
    }
}

// One parent-labelled Polya urn run, tracking every table explicitly.
fn run_urn<R: Rng + ?Sized>(md: &MDPrior, draws: &UrnDraws, rng: &mut R) -> Vec<Table> {
    let (j_count, k_count) = (md.num_parents(), md.num_categories());
    let mut tables: Vec<Table> = Vec::new();
    match draws {
        UrnDraws::Unconditioned(n) => {
            let weights: Vec<(usize, usize, f64)> = (0..j_count)
                .flat_map(|j| (0..k_count).map(move |k| (j, k)))
                .map(|(j, k)| (j, k, md.alpha(j, k)))
                .collect();
            for i in 0..*n {
                seat(&mut tables, &weights, i, None, rng);
            }
        }
        UrnDraws::Conditioned(counts) => {
            for (k, &n_k) in counts.counts().iter().enumerate() {
                let weights: Vec<(usize, usize, f64)> = (0..j_count).map(|j| (j, k, md.alpha(j, k))).collect();
                for i in 0..n_k {
                    seat(&mut tables, &weights, i, Some(k), rng);
                }
            }
        }
    }
    tables
}

/// Runs the parent-labelled urn `reps` times and reports empirical means and
/// standard errors of `n'`, `m'` and `m`.
pub fn urn_simulate<R: Rng + ?Sized>(md: &MDPrior, draws: &UrnDraws, reps: usize, rng: &mut R) -> Result<UrnStats> {
    if reps < 100 {
        return Err(Error::InvalidParameter(format!("urn simulation needs reps >= 100, got {reps}")));
    }
    if let UrnDraws::Conditioned(c) = draws {
        if c.len() != md.num_categories() {
            return Err(Error::DimensionMismatch {
                expected: md.num_categories(),
                found: c.len(),
            });
        }
    }
    let (j_count, k_count) = (md.num_parents(), md.num_categories());
    let cells = j_count * k_count;
    let mut counts: Vec<Moments> = (0..cells).map(|_| Moments::default()).collect();
    let mut tabs: Vec<Moments> = (0..cells).map(|_| Moments::default()).collect();
    let mut totals: Vec<Moments> = (0..k_count).map(|_| Moments::default()).collect();
    let mut cats: Vec<Moments> = (0..k_count).map(|_| Moments::default()).collect();
    for _ in 0..reps {
        let run = run_urn(md, draws, rng);
        let mut n = vec![0usize; cells];
        let mut m = vec![0usize; cells];
        for t in &run {
            n[t.parent * k_count + t.category] += t.size;
            m[t.parent * k_count + t.category] += 1;
        }
        for c in 0..cells {
            counts[c].push(n[c] as f64);
            tabs[c].push(m[c] as f64);
        }
        for k in 0..k_count {
            totals[k].push((0..j_count).map(|j| m[j * k_count + k]).sum::<usize>() as f64);
            cats[k].push((0..j_count).map(|j| n[j * k_count + k]).sum::<usize>() as f64);
        }
    }
    let grid = |ms: &[Moments], se: bool| {
        Matrix::from_fn(j_count, k_count, |j, k| {
            let (mean, s) = ms[j * k_count + k].mean_se(reps);
            if se {
                s
            } else {
                mean
            }
        })
    };
    Ok(UrnStats {
        reps,
        mean_parent_counts: grid(&counts, false),
        se_parent_counts: grid(&counts, true),
        mean_parent_tables: grid(&tabs, false),
        se_parent_tables: grid(&tabs, true),
        mean_category_counts: cats.iter().map(|m| m.mean_se(reps).0).collect(),
        mean_tables: totals.iter().map(|m| m.mean_se(reps).0).collect(),
        se_tables: totals.iter().map(|m| m.mean_se(reps).1).collect(),
    })
}
