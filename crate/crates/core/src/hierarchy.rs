//! Hierarchical multi-group model: `D` groups whose Dirichlet priors mix
//! `J` shared parents, `α_jk = b_j β_jk`, with collapsed inference.
//!
//! Each parent has a simplex mean `β_j ~ Dir(γ_j)` and a precision
//! `b_j ~ Gamma(a_j, r_j)`. Group `d` draws `θ_d ~ Dir(Σ_{j ∈ L_d} α_j)` over
//! its linked parents `L_d` (all parents by default) and then `n_d`
//! categorical observations.
//!
//! Given parent tables `m'_djk` the parent-level likelihood is
//! `Π_jk (b_j β_jk)^{T_jk}` with `T_jk = Σ_d m'_djk`, so `β_j` has a
//! `Dir(γ_j + T_j)` conditional. The remaining `Γ(c_d)/Γ(c_d + n_d)` factor,
//! `c_d = Σ_{j ∈ L_d} b_j`, is handled with
//!
//! `Γ(c)/Γ(c + n) = Γ(n)^{-1} ∫_0^1 w^{c−1} (1 − w)^{n−1} dw`,
//!
//! so conditional on `w_d ~ Beta(c_d, n_d)` the precisions are
//! `Gamma(a_j + Σ_k T_jk, r_j − Σ_{d: j ∈ L_d} ln w_d)`.
//!
//! Two schemes are offered. [`Scheme::Gibbs`] samples integer tables and
//! draws every conditional. [`Scheme::Expectation`] plugs in expected
//! tables and `E[ln w_d] = Ψ(c_d) − Ψ(c_d + n_d)` and sets each parameter
//! to its conditional mean; it consumes no randomness.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{sample_dirichlet, CountVector, DirichletParams, SimplexVector};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::multi::{expected_parent_counts, expected_parent_tables, md_log_marginal, sample_parent_tables, MDPrior};
use crate::special::{digamma_diff, ln_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Gibbs,
    Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    Sample,
    Expectation,
}

/// Mean/precision factorization of one parent, with its hyperpriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentSpec {
    pub mean: SimplexVector,
    pub precision: f64,
    /// Dirichlet hyperparameters `γ_j` on the mean.
    pub mean_hyper: Vec<f64>,
    /// Gamma `(shape, rate)` hyperparameters on the precision.
    pub precision_hyper: (f64, f64),
}

impl ParentSpec {
    pub fn new(mean: SimplexVector, precision: f64, mean_hyper: Vec<f64>, shape: f64, rate: f64) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(precision) || !positive(shape) || !positive(rate) {
            return Err(Error::InvalidParameter(format!(
                "precision {precision}, shape {shape} and rate {rate} must be positive"
            )));
        }
        if mean_hyper.len() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: mean_hyper.len(),
            });
        }
        DirichletParams::new(mean_hyper.clone())?;
        Ok(Self {
            mean,
            precision,
            mean_hyper,
            precision_hyper: (shape, rate),
        })
    }

    /// Parent at its prior means: `β = γ / Σγ`, `b = a / r`.
    pub fn from_hyper(mean_hyper: Vec<f64>, shape: f64, rate: f64) -> Result<Self> {
        let mean = SimplexVector::from_weights(&mean_hyper)?;
        Self::new(mean, shape / rate, mean_hyper, shape, rate)
    }

    /// Default hyperpriors `γ = 1`, `a = r = 1`.
    pub fn default_prior(k: usize) -> Self {
        Self::from_hyper(vec![1.0; k], 1.0, 1.0).expect("valid defaults")
    }

    pub fn num_categories(&self) -> usize {
        self.mean.len()
    }

    /// `α_jk = b_j β_jk`, floored at the smallest positive double so the
    /// parameters stay valid when a mean component underflows.
    pub fn alpha(&self) -> Vec<f64> {
        self.mean
            .theta()
            .iter()
            .map(|&m| (self.precision * m).max(f64::MIN_POSITIVE))
            .collect()
    }

    fn log_prior(&self) -> f64 {
        let g = &self.mean_hyper;
        let mut lp = ln_gamma(g.iter().sum()) - g.iter().map(|&x| ln_gamma(x)).sum::<f64>();
        for (&gk, &bk) in g.iter().zip(self.mean.theta()) {
            if gk != 1.0 {
                lp += (gk - 1.0) * bk.ln();
            }
        }
        let (a, r) = self.precision_hyper;
        lp + a * r.ln() - ln_gamma(a) + (a - 1.0) * self.precision.ln() - r * self.precision
    }
}

/// Counts for one group and the parents it mixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupData {
    pub id: usize,
    pub counts: CountVector,
    /// Indices of the parents in this group's prior; `None` links all.
    pub links: Option<Vec<usize>>,
}

impl GroupData {
    pub fn new(id: usize, counts: CountVector) -> Self {
        Self { id, counts, links: None }
    }

    pub fn with_links(id: usize, counts: CountVector, links: Vec<usize>) -> Self {
        Self {
            id,
            counts,
            links: Some(links),
        }
    }

    fn linked(&self, num_parents: usize) -> Vec<usize> {
        self.links.clone().unwrap_or_else(|| (0..num_parents).collect())
    }
}

/// Per-group auxiliary statistics, `J × K` with zero rows for unlinked
/// parents. Real-valued so expected and sampled values share a type.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAux {
    pub parent_counts: Matrix<f64>,
    pub parent_tables: Matrix<f64>,
}

/// Ground truth returned by [`synthesize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub means: Vec<Vec<f64>>,
    pub precisions: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
}

/// The unit of inference.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub parents: Vec<ParentSpec>,
    pub groups: Vec<GroupData>,
    pub aux: Vec<GroupAux>,
    /// `w_d`, `None` for empty groups.
    pub scale_aux: Vec<Option<f64>>,
    /// `T_jk = Σ_d m'_djk`.
    pub table_totals: Matrix<f64>,
    pub iteration: usize,
    pub log_joint_trace: Vec<f64>,
    recompute_interval: usize,
    collapse_means: bool,
    // α used by the table step; refreshed every `recompute_interval` sweeps.
    cached_alpha: Matrix<f64>,
    links: Vec<Vec<usize>>,
}

impl ModelState {
    pub fn new(parents: Vec<ParentSpec>, groups: Vec<GroupData>) -> Result<Self> {
        let j = parents.len();
        let k = parents
            .first()
            .map(ParentSpec::num_categories)
            .ok_or_else(|| Error::InvalidParameter("at least one parent required".into()))?;
        for p in &parents {
            if p.num_categories() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: p.num_categories(),
                });
            }
        }
        let mut links = Vec::with_capacity(groups.len());
        for g in &groups {
            if g.counts.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: g.counts.len(),
                });
            }
            let l = g.linked(j);
            let mut sorted = l.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if l.is_empty() || sorted.len() != l.len() || sorted.last().is_some_and(|&x| x >= j) {
                return Err(Error::InvalidParameter(format!(
                    "group {} links {l:?} are not distinct parents in 0..{j}",
                    g.id
                )));
            }
            links.push(sorted);
        }
        let aux = vec![
            GroupAux {
                parent_counts: Matrix::zeros(j, k),
                parent_tables: Matrix::zeros(j, k),
            };
            groups.len()
        ];
        let scale_aux = vec![None; groups.len()];
        let cached_alpha = alpha_matrix(&parents);
        Ok(Self {
            parents,
            groups,
            aux,
            scale_aux,
            table_totals: Matrix::zeros(j, k),
            iteration: 0,
            log_joint_trace: Vec::new(),
            recompute_interval: 1,
            collapse_means: false,
            cached_alpha,
            links,
        })
    }

    /// Number of sweeps between refreshes of the collapsed parameters used
    /// by the table step (default 1).
    pub fn with_recompute_interval(mut self, interval: usize) -> Self {
        self.recompute_interval = interval.max(1);
        self
    }

    /// Replace mean draws by the collapsed predictive (γ + T)/Σ in
    /// [`sweep`], integrating over the parent means.
    pub fn with_collapsed_means(mut self, on: bool) -> Self {
        self.collapse_means = on;
        self
    }

    pub fn num_parents(&self) -> usize {
        self.parents.len()
    }

    pub fn num_categories(&self) -> usize {
        self.table_totals.cols()
    }

    pub fn refresh_collapsed(&mut self) {
        self.cached_alpha = alpha_matrix(&self.parents);
    }

    fn prior_for(&self, d: usize, alpha: &Matrix<f64>) -> MDPrior {
        let rows: Vec<Vec<f64>> = self.links[d].iter().map(|&j| alpha.row(j).to_vec()).collect();
        MDPrior::from_rows(&rows).expect("positive parameters")
    }

    /// The group's current MD prior over its linked parents.
    pub fn group_prior(&self, d: usize) -> MDPrior {
        self.prior_for(d, &alpha_matrix(&self.parents))
    }

    fn scatter(&self, d: usize, linked: &Matrix<f64>) -> Matrix<f64> {
        let mut full = Matrix::zeros(self.num_parents(), self.num_categories());
        for (row, &j) in self.links[d].iter().enumerate() {
            for k in 0..self.num_categories() {
                full.set(j, k, linked.get(row, k));
            }
        }
        full
    }

    fn recompute_totals(&mut self) {
        let mut totals = Matrix::zeros(self.num_parents(), self.num_categories());
        for a in &self.aux {
            for (t, &v) in totals.as_mut_slice().iter_mut().zip(a.parent_tables.as_slice()) {
                *t += v;
            }
        }
        self.table_totals = totals;
    }

    /// Linked-parent precision sum `c_d` under the cached parameters.
    fn group_concentration(&self, d: usize) -> f64 {
        self.links[d]
            .iter()
            .map(|&j| self.cached_alpha.row(j).iter().sum::<f64>())
            .sum()
    }
}

fn alpha_matrix(parents: &[ParentSpec]) -> Matrix<f64> {
    let rows: Vec<Vec<f64>> = parents.iter().map(ParentSpec::alpha).collect();
    Matrix::from_rows(&rows).expect("parents share K")
}

fn categorical<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &t) in theta.iter().enumerate() {
        acc += t;
        if u < acc {
            return k;
        }
    }
    theta.len() - 1
}

/// Draws `D` groups that link every parent. See [`synthesize_linked`].
pub fn synthesize<R: Rng + ?Sized>(
    parents: &[ParentSpec],
    groups: usize,
    n_per_group: usize,
    rng: &mut R,
) -> Result<(Vec<GroupData>, Truth)> {
    synthesize_linked(parents, &vec![None; groups], n_per_group, rng)
}

/// Draws one group per entry of `links`: `θ_d ~ Dir(Σ_{j ∈ L_d} b_j β_j)`
/// followed by `n_per_group` categorical draws.
pub fn synthesize_linked<R: Rng + ?Sized>(
    parents: &[ParentSpec],
    links: &[Option<Vec<usize>>],
    n_per_group: usize,
    rng: &mut R,
) -> Result<(Vec<GroupData>, Truth)> {
    let k = parents
        .first()
        .map(ParentSpec::num_categories)
        .ok_or_else(|| Error::InvalidParameter("at least one parent required".into()))?;
    let alpha = alpha_matrix(parents);
    let mut groups = Vec::with_capacity(links.len());
    let mut thetas = Vec::with_capacity(links.len());
    for (d, l) in links.iter().enumerate() {
        let linked: Vec<usize> = l.clone().unwrap_or_else(|| (0..parents.len()).collect());
        if linked.iter().any(|&j| j >= parents.len()) || linked.is_empty() {
            return Err(Error::InvalidParameter(format!("group {d} links {linked:?}")));
        }
        let prior: Vec<f64> = (0..k)
            .map(|c| linked.iter().map(|&j| alpha.get(j, c)).sum())
            .collect();
        let theta = sample_dirichlet(&DirichletParams::new(prior)?, rng);
        let mut counts = vec![0usize; k];
        for _ in 0..n_per_group {
            counts[categorical(theta.theta(), rng)] += 1;
        }
        groups.push(GroupData {
            id: d,
            counts: CountVector::new(counts),
            links: l.clone(),
        });
        thetas.push(theta.theta().to_vec());
    }
    let truth = Truth {
        means: parents.iter().map(|p| p.mean.theta().to_vec()).collect(),
        precisions: parents.iter().map(|p| p.precision).collect(),
        thetas,
    };
    Ok((groups, truth))
}

/// Fills every group's auxiliaries with their expectations under the
/// cached parameters and recomputes `T`. Groups are processed in parallel
/// and reduced in group order, so results are bit-reproducible.
pub fn accumulate_expected_tables(state: &mut ModelState) {
    let alpha = &state.cached_alpha;
    let linked: Vec<(Matrix<f64>, Matrix<f64>)> = (0..state.groups.len())
        .into_par_iter()
        .map(|d| {
            let prior = state.prior_for(d, alpha);
            let counts = &state.groups[d].counts;
            (
                expected_parent_counts(&prior, counts).expect("validated dimensions"),
                expected_parent_tables(&prior, counts).expect("validated dimensions"),
            )
        })
        .collect();
    state.aux = linked
        .iter()
        .enumerate()
        .map(|(d, (c, t))| GroupAux {
            parent_counts: state.scatter(d, c),
            parent_tables: state.scatter(d, t),
        })
        .collect();
    state.recompute_totals();
}

/// Replaces every group's auxiliaries by a joint draw of parent counts and
/// parent tables, then recomputes `T`.
pub fn sample_tables_sweep<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R) {
    for d in 0..state.groups.len() {
        let prior = state.prior_for(d, &state.cached_alpha);
        let (c, t) = sample_parent_tables(&prior, &state.groups[d].counts, rng).expect("validated dimensions");
        state.aux[d] = GroupAux {
            parent_counts: state.scatter(d, &c.counts.map(|v| v as f64)),
            parent_tables: state.scatter(d, &t.tables.map(|v| v as f64)),
        };
    }
    state.recompute_totals();
}

/// Draws `w_d ~ Beta(c_d, n_d)` for every non-empty group.
pub fn sample_group_scale_aux<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R) {
    for d in 0..state.groups.len() {
        let n = state.groups[d].counts.total();
        state.scale_aux[d] = if n == 0 {
            None
        } else {
            let c = state.group_concentration(d);
            let beta = Beta::new(c, n as f64).expect("positive shapes");
            // keep w strictly inside (0, 1)
            let w: f64 = beta.sample(rng);
            Some(w.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
        };
    }
}

/// Sets `w_d = exp(E[ln w_d]) = exp(Ψ(c_d) − Ψ(c_d + n_d))`.
pub fn expected_group_scale_aux(state: &mut ModelState) {
    for d in 0..state.groups.len() {
        let n = state.groups[d].counts.total();
        state.scale_aux[d] = if n == 0 {
            None
        } else {
            let c = state.group_concentration(d);
            Some((-digamma_diff(c, n)).exp())
        };
    }
}

/// Gamma conditional of each `b_j` as `(shape, rate)`.
pub fn precision_posterior(state: &ModelState, j: usize) -> (f64, f64) {
    let (a, r) = state.parents[j].precision_hyper;
    let tables: f64 = state.table_totals.row(j).iter().sum();
    let log_w: f64 = state
        .scale_aux
        .iter()
        .zip(&state.links)
        .filter(|(_, l)| l.contains(&j))
        .filter_map(|(w, _)| w.map(f64::ln))
        .sum();
    (a + tables, r - log_w)
}

/// Draws (or sets to the mean of) `b_j ~ Gamma(a_j + Σ_k T_jk, r_j − Σ_d ln w_d)`.
pub fn update_parent_precisions<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R, mode: UpdateMode) {
    for j in 0..state.num_parents() {
        let (shape, rate) = precision_posterior(state, j);
        let b = match mode {
            UpdateMode::Expectation => shape / rate,
            UpdateMode::Sample => Gamma::new(shape, 1.0 / rate).expect("positive shape and rate").sample(rng),
        };
        state.parents[j].precision = b.max(f64::MIN_POSITIVE);
    }
}

/// `(γ_jk + T_jk) / Σ_k (γ_jk + T_jk)`: the predictive weight of category
/// `k` under parent `j` with its mean integrated out.
pub fn collapsed_mean_predictive(state: &ModelState, j: usize, k: usize) -> f64 {
    let g = &state.parents[j].mean_hyper;
    let t = state.table_totals.row(j);
    let norm: f64 = g.iter().zip(t).map(|(a, b)| a + b).sum();
    (g[k] + t[k]) / norm
}

/// Draws (or sets to the mean of) `β_j ~ Dir(γ_j + T_j)`.
pub fn update_parent_means<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R, mode: UpdateMode) {
    for j in 0..state.num_parents() {
        let post: Vec<f64> = state.parents[j]
            .mean_hyper
            .iter()
            .zip(state.table_totals.row(j))
            .map(|(g, t)| g + t)
            .collect();
        let mean = match mode {
            UpdateMode::Expectation => SimplexVector::from_weights(&post).expect("positive weights"),
            UpdateMode::Sample => sample_dirichlet(&DirichletParams::new(post).expect("positive"), rng),
        };
        state.parents[j].mean = mean;
    }
}

/// One full update: tables, scale auxiliaries, precisions, means. The
/// collapsed parameters are refreshed every `recompute_interval` sweeps and
/// the log joint is appended to the trace.
pub fn sweep<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R, scheme: Scheme) {
    let mean_mode = if state.collapse_means {
        UpdateMode::Expectation
    } else {
        match scheme {
            Scheme::Gibbs => UpdateMode::Sample,
            Scheme::Expectation => UpdateMode::Expectation,
        }
    };
    match scheme {
        Scheme::Gibbs => {
            sample_tables_sweep(state, rng);
            sample_group_scale_aux(state, rng);
            update_parent_precisions(state, rng, UpdateMode::Sample);
        }
        Scheme::Expectation => {
            accumulate_expected_tables(state);
            expected_group_scale_aux(state);
            update_parent_precisions(state, rng, UpdateMode::Expectation);
        }
    }
    update_parent_means(state, rng, mean_mode);
    state.iteration += 1;
    if state.iteration.is_multiple_of(state.recompute_interval) {
        state.refresh_collapsed();
    }
    let lj = log_joint(state);
    state.log_joint_trace.push(lj);
}

/// `Σ_d ln p(n_d | α) + Σ_j [ln Dir(β_j; γ_j) + ln Gamma(b_j; a_j, r_j)]`
/// at the current parents.
pub fn log_joint(state: &ModelState) -> f64 {
    let alpha = alpha_matrix(&state.parents);
    let data: f64 = (0..state.groups.len())
        .filter(|&d| state.groups[d].counts.total() > 0)
        .map(|d| md_log_marginal(&state.prior_for(d, &alpha), &state.groups[d].counts).expect("validated"))
        .sum();
    data + state.parents.iter().map(ParentSpec::log_prior).sum::<f64>()
}

/// Total-variation distance `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Matches estimated to true parent means by the permutation minimizing the
/// summed total-variation distance. Returns `perm` with `perm[i]` the
/// estimated parent matched to true parent `i`, and the per-parent
/// distances.
pub fn match_parents(estimated: &[Vec<f64>], truth: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for perm in permutations(truth.len()) {
        let tv: Vec<f64> = perm
            .iter()
            .enumerate()
            .map(|(i, &e)| total_variation(&estimated[e], &truth[i]))
            .collect();
        let total: f64 = tv.iter().sum();
        if best.as_ref().is_none_or(|(b, _, _)| total < *b) {
            best = Some((total, perm, tv));
        }
    }
    let (_, perm, tv) = best.expect("at least the identity permutation");
    (perm, tv)
}
