use mdaux::hierarchy::{accumulate_expected_tables, log_joint, sweep, ModelState, ParentSpec, Scheme};
use mdaux::multi::{expected_parent_tables, expected_table_totals, md_log_marginal};
use mdaux::special::digamma;
use mdaux::{CountVector, GroupData, MDPrior};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Plain hierarchical Dirichlet-multinomial updates: expected CRT tables,
/// `E[ln w]` scale auxiliaries, Gamma and Dirichlet conditional means.
struct PlainDm {
    beta: Vec<f64>,
    b: f64,
    gamma: Vec<f64>,
    a: f64,
    r: f64,
}

impl PlainDm {
    fn step(&mut self, groups: &[Vec<usize>]) {
        let alpha: Vec<f64> = self.beta.iter().map(|x| self.b * x).collect();
        let conc: f64 = alpha.iter().sum();
        let mut t = vec![0.0; alpha.len()];
        let mut log_w = 0.0;
        for n in groups {
            for (k, &c) in n.iter().enumerate() {
                if c > 0 {
                    t[k] += alpha[k] * (digamma(alpha[k] + c as f64).unwrap() - digamma(alpha[k]).unwrap());
                }
            }
            let total: usize = n.iter().sum();
            if total > 0 {
                log_w += digamma(conc).unwrap() - digamma(conc + total as f64).unwrap();
            }
        }
        self.b = (self.a + t.iter().sum::<f64>()) / (self.r - log_w);
        let post: Vec<f64> = self.gamma.iter().zip(&t).map(|(g, x)| g + x).collect();
        let s: f64 = post.iter().sum();
        self.beta = post.iter().map(|x| x / s).collect();
    }
}

#[test]
fn single_parent_matches_plain_dirichlet_multinomial() {
    let gamma = vec![1.5, 0.5, 2.0, 1.0];
    let data = vec![vec![3, 0, 7, 1], vec![0, 0, 0, 0], vec![12, 4, 2, 9], vec![1, 1, 1, 1]];
    let groups: Vec<GroupData> = data
        .iter()
        .enumerate()
        .map(|(d, n)| GroupData::new(d, CountVector::new(n.clone())))
        .collect();
    let parent = ParentSpec::from_hyper(gamma.clone(), 2.0, 0.5).unwrap();
    let mut plain = PlainDm {
        beta: parent.mean.theta().to_vec(),
        b: parent.precision,
        gamma,
        a: 2.0,
        r: 0.5,
    };
    let mut state = ModelState::new(vec![parent], groups).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..25 {
        sweep(&mut state, &mut rng, Scheme::Expectation);
        plain.step(&data);
        let p = &state.parents[0];
        assert!(close(p.precision, plain.b, 1e-12), "{} vs {}", p.precision, plain.b);
        for (x, y) in p.mean.theta().iter().zip(&plain.beta) {
            assert!(close(*x, *y, 1e-12), "{x} vs {y}");
        }
    }
}

#[test]
fn splitting_parents_in_half_preserves_marginal_and_totals() {
    let rows = vec![vec![0.3, 1.7, 2.2], vec![4.0, 0.25, 1.1]];
    let halves: Vec<Vec<f64>> = rows
        .iter()
        .flat_map(|r| {
            let h: Vec<f64> = r.iter().map(|x| x / 2.0).collect();
            [h.clone(), h]
        })
        .collect();
    let md = MDPrior::from_rows(&rows).unwrap();
    let split = MDPrior::from_rows(&halves).unwrap();
    for n in [vec![0, 0, 0], vec![5, 1, 9], vec![40, 3, 17]] {
        let n = CountVector::new(n);
        let a = md_log_marginal(&md, &n).unwrap();
        let b = md_log_marginal(&split, &n).unwrap();
        assert!(close(a, b, 1e-12), "{a} vs {b}");
        let ta = expected_table_totals(&md, &n).unwrap();
        let tb = expected_parent_tables(&split, &n).unwrap().column_sums();
        for (x, y) in ta.iter().zip(&tb) {
            assert!(close(*x, *y, 1e-12), "{x} vs {y}");
        }
    }
}

#[test]
fn group_totals_conserve_collapsed_expectations() {
    let parents = vec![
        ParentSpec::from_hyper(vec![1.0, 2.0, 3.0], 3.0, 1.0).unwrap(),
        ParentSpec::from_hyper(vec![2.0, 0.5, 1.0], 1.0, 2.0).unwrap(),
    ];
    let data = [vec![4, 0, 2], vec![10, 10, 1], vec![0, 0, 0]];
    let groups = data
        .iter()
        .enumerate()
        .map(|(d, n)| GroupData::new(d, CountVector::new(n.clone())))
        .collect();
    let mut state = ModelState::new(parents, groups).unwrap();
    accumulate_expected_tables(&mut state);
    let mut expect = [0.0; 3];
    for (d, n) in data.iter().enumerate() {
        let totals = expected_table_totals(&state.group_prior(d), &CountVector::new(n.clone())).unwrap();
        for (e, t) in expect.iter_mut().zip(totals) {
            *e += t;
        }
    }
    for (k, e) in expect.iter().enumerate() {
        assert!((state.table_totals.column(k).sum::<f64>() - e).abs() <= 1e-10);
    }
}

#[test]
fn log_joint_is_invariant_under_parent_relabeling() {
    let p0 = ParentSpec::from_hyper(vec![1.0, 2.0, 3.0], 3.0, 1.0).unwrap();
    let p1 = ParentSpec::from_hyper(vec![2.0, 0.5, 1.0], 1.0, 2.0).unwrap();
    let groups = vec![
        GroupData::new(0, CountVector::new(vec![4, 0, 2])),
        GroupData::new(1, CountVector::new(vec![1, 7, 3])),
    ];
    let a = ModelState::new(vec![p0.clone(), p1.clone()], groups.clone()).unwrap();
    let b = ModelState::new(vec![p1, p0], groups).unwrap();
    assert!(close(log_joint(&a), log_joint(&b), 1e-12));
}
