use std::io::Write;
use std::path::{Path, PathBuf};

use mdaux::dirichlet::sample_dirichlet;
use mdaux::hierarchy::{self, synthesize_linked, ModelState, ParentSpec};
use mdaux::multi::{expected_parent_counts, expected_parent_tables, expected_table_totals};
use mdaux::oracle::EnumerationBudget;
use mdaux::verify::{self, Check, VerifyOptions};
use mdaux::{CountVector, DirichletParams, GroupData, MDPrior, Matrix, Scheme};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::input;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest enumeration budget `verify` accepts.
pub const BUDGET_CAPS: (usize, usize, usize) = (16, 4, 4);

#[derive(Debug, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sweeps: Option<usize>,
    pub scheme: Option<Scheme>,
}

fn load_config(path: &Path, o: &Overrides) -> Result<RunConfig> {
    let mut c = RunConfig::load(path)?;
    if o.data.is_some() {
        c.data.clone_from(&o.data);
    }
    if o.out.is_some() {
        c.out.clone_from(&o.out);
    }
    c.seed = o.seed.or(c.seed);
    c.sweeps = o.sweeps.unwrap_or(c.sweeps);
    c.scheme = o.scheme.unwrap_or(c.scheme);
    c.validate()?;
    Ok(c)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    m.to_rows()
}

#[derive(Serialize)]
struct Parents {
    beta: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Parents {
    fn of(parents: &[ParentSpec]) -> Self {
        Self {
            beta: parents.iter().map(|p| p.mean.theta().to_vec()).collect(),
            b: parents.iter().map(|p| p.precision).collect(),
        }
    }
}

#[derive(Serialize)]
struct GroupReport {
    id: usize,
    parent_counts: Vec<Vec<f64>>,
    parent_tables: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct FitReport {
    command: &'static str,
    version: &'static str,
    config: RunConfig,
    parents: Parents,
    #[serde(skip_serializing_if = "Option::is_none")]
    posterior_mean: Option<Parents>,
    log_joint_trace: Vec<f64>,
    aux_totals: Vec<Vec<f64>>,
    groups: Vec<GroupReport>,
}

pub fn fit(config: &Path, o: &Overrides) -> Result<()> {
    let mut cfg = load_config(config, o)?;
    let data_path = cfg
        .data
        .clone()
        .ok_or_else(|| CliError::Config("no data file: pass --data or set \"data\"".into()))?;
    let counts = input::read_counts(&data_path)?;
    let width = counts[0].len();
    if width != cfg.categories {
        return Err(CliError::Dimension(format!(
            "{} has {width} columns, config has {} categories",
            data_path.display(),
            cfg.categories
        )));
    }
    if let Some(d) = cfg.groups.filter(|&d| d != counts.len()) {
        return Err(CliError::Dimension(format!("{} has {} groups, config has {d}", data_path.display(), counts.len())));
    }
    if let Some(l) = cfg.group_links.as_ref().filter(|l| l.len() != counts.len()) {
        return Err(CliError::Dimension(format!("group_links has {} entries for {} groups", l.len(), counts.len())));
    }
    let groups: Vec<GroupData> = counts
        .into_iter()
        .enumerate()
        .map(|(d, n)| GroupData {
            id: d,
            counts: CountVector::new(n),
            links: cfg.links_for(d),
        })
        .collect();
    let mut state = ModelState::new(cfg.parent_priors()?, groups)
        .map_err(CliError::from_model)?
        .with_recompute_interval(cfg.recompute_interval)
        .with_collapsed_means(cfg.collapse_means);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let (j, k) = (cfg.parents, cfg.categories);
    let mut sum_beta = Matrix::<f64>::zeros(j, k);
    let mut sum_b = vec![0.0; j];
    for s in 0..cfg.sweeps {
        hierarchy::sweep(&mut state, &mut rng, cfg.scheme);
        if s >= cfg.burn_in {
            for (jj, p) in state.parents.iter().enumerate() {
                sum_b[jj] += p.precision;
                for (kk, &m) in p.mean.theta().iter().enumerate() {
                    *sum_beta.get_mut(jj, kk) += m;
                }
            }
        }
    }
    let kept = (cfg.sweeps - cfg.burn_in) as f64;
    let posterior_mean = (cfg.scheme == Scheme::Gibbs && kept > 0.0).then(|| Parents {
        beta: sum_beta.map(|x| x / kept).to_rows(),
        b: sum_b.iter().map(|x| x / kept).collect(),
    });
    let out = cfg.out.take();
    let report = FitReport {
        command: "fit",
        version: VERSION,
        config: cfg,
        parents: Parents::of(&state.parents),
        posterior_mean,
        log_joint_trace: state.log_joint_trace.clone(),
        aux_totals: rows(&state.table_totals),
        groups: state
            .groups
            .iter()
            .zip(&state.aux)
            .map(|(g, a)| GroupReport {
                id: g.id,
                parent_counts: rows(&a.parent_counts),
                parent_tables: rows(&a.parent_tables),
            })
            .collect(),
    };
    write_output(out.as_deref(), &to_json(&report))
}

#[derive(Serialize)]
struct ExpectReport {
    command: &'static str,
    version: &'static str,
    alpha: Vec<Vec<f64>>,
    counts: Vec<usize>,
    expected_parent_counts: Vec<Vec<f64>>,
    expected_parent_tables: Vec<Vec<f64>>,
    expected_tables: Vec<f64>,
}

pub fn expect(alpha: &Path, counts: &str, out: Option<&Path>) -> Result<()> {
    let rows_in = input::read_alpha(alpha)?;
    let counts = input::parse_count_list(counts)?;
    let k = rows_in[0].len();
    if counts.len() != k {
        return Err(CliError::Dimension(format!(
            "{} categories in --counts, {k} columns in {}",
            counts.len(),
            alpha.display()
        )));
    }
    let md = MDPrior::from_rows(&rows_in).map_err(|e| CliError::Parse(e.to_string()))?;
    let data = CountVector::new(counts.clone());
    let fail = |e: mdaux::Error| CliError::Parse(e.to_string());
    let report = ExpectReport {
        command: "expect",
        version: VERSION,
        alpha: rows_in,
        counts,
        expected_parent_counts: rows(&expected_parent_counts(&md, &data).map_err(fail)?),
        expected_parent_tables: rows(&expected_parent_tables(&md, &data).map_err(fail)?),
        expected_tables: expected_table_totals(&md, &data).map_err(fail)?,
    };
    write_output(out, &to_json(&report))
}

#[derive(Serialize)]
struct TruthReport {
    command: &'static str,
    version: &'static str,
    config: RunConfig,
    means: Vec<Vec<f64>>,
    precisions: Vec<f64>,
    thetas: Vec<Vec<f64>>,
}

/// Default truth file location: `counts.csv` → `counts.truth.json`.
pub fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

pub fn simulate(config: &Path, o: &Overrides, truth_out: Option<&Path>) -> Result<()> {
    let mut cfg = load_config(config, o)?;
    let seed = cfg.seed.ok_or_else(|| CliError::Config("simulate requires a seed".into()))?;
    let d = cfg.groups.ok_or_else(|| CliError::Config("simulate requires \"groups\"".into()))?;
    let out = cfg
        .out
        .take()
        .ok_or_else(|| CliError::Config("no output file: pass --out or set \"out\"".into()))?;
    if let Some(l) = cfg.group_links.as_ref().filter(|l| l.len() != d) {
        return Err(CliError::Config(format!("group_links has {} entries for {d} groups", l.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents = match &cfg.truth {
        Some(t) => cfg.truth_parents(t)?,
        None => draw_parents(cfg.parent_priors()?, &mut rng)?,
    };
    let links: Vec<Option<Vec<usize>>> = (0..d).map(|g| cfg.links_for(g)).collect();
    let (groups, truth) =
        synthesize_linked(&parents, &links, cfg.n_per_group, &mut rng).map_err(|e| CliError::Config(e.to_string()))?;

    let mut csv = (1..=cfg.categories).map(|k| format!("k{k}")).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for g in &groups {
        let line: Vec<String> = g.counts.counts().iter().map(usize::to_string).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    let truth_file = truth_out.map_or_else(|| truth_path(&out), Path::to_path_buf);
    let report = TruthReport {
        command: "simulate",
        version: VERSION,
        config: cfg,
        means: truth.means,
        precisions: truth.precisions,
        thetas: truth.thetas,
    };
    write_output(Some(&out), &csv)?;
    write_output(Some(&truth_file), &to_json(&report))
}

fn draw_parents(priors: Vec<ParentSpec>, rng: &mut ChaCha8Rng) -> Result<Vec<ParentSpec>> {
    priors
        .into_iter()
        .map(|p| {
            let (a, r) = p.precision_hyper;
            let gamma = DirichletParams::new(p.mean_hyper.clone()).map_err(|e| CliError::Config(e.to_string()))?;
            let mean = sample_dirichlet(&gamma, rng);
            let b: f64 = Gamma::new(a, 1.0 / r).map_err(|e| CliError::Config(e.to_string()))?.sample(rng);
            ParentSpec::new(mean, b.max(f64::MIN_POSITIVE), p.mean_hyper, a, r).map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

#[derive(Serialize)]
struct VerifyReportOut<'a> {
    command: &'static str,
    version: &'static str,
    config: &'a VerifyOptions,
    passed: bool,
    checks: &'a [Check],
}

pub struct VerifyArgs {
    pub max_total_count: Option<usize>,
    pub max_parents: Option<usize>,
    pub max_categories: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub fault: Option<f64>,
}

pub fn verify(args: &VerifyArgs) -> Result<()> {
    let d = EnumerationBudget::default();
    let budget = EnumerationBudget {
        max_total_count: args.max_total_count.unwrap_or(d.max_total_count),
        max_parents: args.max_parents.unwrap_or(d.max_parents),
        max_categories: args.max_categories.unwrap_or(d.max_categories),
        ..d
    };
    let (ct, cp, ck) = BUDGET_CAPS;
    if budget.max_total_count > ct || budget.max_parents > cp || budget.max_categories > ck {
        return Err(CliError::Config(format!(
            "budget exceeds caps: total count <= {ct}, parents <= {cp}, categories <= {ck}"
        )));
    }
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        budget,
        seed: args.seed.unwrap_or(defaults.seed),
        fault: args.fault,
        ..defaults
    };
    let report = verify::run(&opts);
    let out = VerifyReportOut {
        command: "verify",
        version: VERSION,
        config: &opts,
        passed: report.passed,
        checks: &report.checks,
    };
    write_output(args.out.as_deref(), &to_json(&out))?;
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({:e} > {:e})", c.name, c.measured, c.tolerance))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(failed.join(", ")))
    }
}
