//! Log-space special functions: log-gamma, digamma, log-sum-exp and the
//! unsigned Stirling numbers of the first kind.

use crate::error::{Error, Result};

/// Default upper bound on the row count of a [`StirlingTable`].
pub const DEFAULT_STIRLING_CAP: usize = 10_000;

// Arguments below this are shifted upward by recurrence before the
// asymptotic series is applied.
const SHIFT_THRESHOLD: f64 = 10.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(x)` for finite `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain {
            function: "log_gamma",
            value: x,
        });
    }
    Ok(ln_gamma(x))
}

/// `Ψ(x) = d/dx ln Γ(x)` for finite `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain {
            function: "digamma",
            value: x,
        });
    }
    Ok(psi(x))
}

/// Unchecked log-gamma; callers guarantee `x > 0`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    let mut x = x;
    let mut prod = 1.0;
    while x < SHIFT_THRESHOLD {
        prod *= x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_2k / (2k (2k-1) x^(2k-1)), Horner in 1/x^2.
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360_360.0 + inv2 / 156.0))))));
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series - prod.ln()
}

/// Unchecked digamma; callers guarantee `x > 0`.
pub(crate) fn psi(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < SHIFT_THRESHOLD {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32_760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 * inv - series
}

/// `Ψ(x + n) − Ψ(x)`.
///
/// For moderate `n` the telescoped form `Σ_{i<n} 1/(x+i)` is used; it avoids
/// the cancellation of two nearly equal digamma values when `x ≫ n`.
pub(crate) fn digamma_diff(x: f64, n: usize) -> f64 {
    if n <= 64 {
        (0..n).map(|i| 1.0 / (x + i as f64)).sum()
    } else {
        psi(x + n as f64) - psi(x)
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Stable `ln Σ exp(v_i)`. All `−∞` inputs give exactly `−∞`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    let max = values
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .ok_or(Error::EmptyInput)?;
    if max.is_infinite() {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Triangle of `ln s(n, m)` for `0 ≤ m ≤ n ≤ n_max`, where `s(n, m)` is the
/// unsigned Stirling number of the first kind: the number of permutations
/// of `n` elements with exactly `m` cycles.
///
/// Argument order is **customers first, tables second**: `log_stirling(n, m)`
/// is the weight of seating `n` customers at `m` tables. Some texts write the
/// same number as `s(m, n)`.
///
/// The table is immutable after construction and cheap to share by
/// reference across threads.
#[derive(Debug, Clone)]
pub struct StirlingTable {
    n_max: usize,
    entries: Vec<f64>,
}

impl StirlingTable {
    /// Builds the triangle up to `n_max` under [`DEFAULT_STIRLING_CAP`].
    pub fn new(n_max: usize) -> Result<Self> {
        Self::with_cap(n_max, DEFAULT_STIRLING_CAP)
    }

    pub fn with_cap(n_max: usize, cap: usize) -> Result<Self> {
        if n_max > cap {
            return Err(Error::StirlingCapacity {
                requested: n_max,
                cap,
            });
        }
        let mut entries = vec![f64::NEG_INFINITY; (n_max + 1) * (n_max + 2) / 2];
        entries[0] = 0.0;
        // s(n+1, m) = n s(n, m) + s(n, m-1)
        for n in 0..n_max {
            let ln_n = (n as f64).ln();
            let prev = Self::offset(n);
            let next = Self::offset(n + 1);
            for m in 1..=n + 1 {
                let stay = if m <= n {
                    ln_n + entries[prev + m]
                } else {
                    f64::NEG_INFINITY
                };
                entries[next + m] = log_add_exp(stay, entries[prev + m - 1]);
            }
        }
        Ok(Self { n_max, entries })
    }

    #[inline]
    fn offset(n: usize) -> usize {
        n * (n + 1) / 2
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `ln s(n, m)`; `−∞` when `m > n`.
    ///
    /// # Panics
    ///
    /// Panics if `n` exceeds the table size.
    #[inline]
    pub fn log_stirling(&self, n: usize, m: usize) -> f64 {
        assert!(n <= self.n_max, "n = {n} beyond Stirling table size {}", self.n_max);
        if m > n {
            f64::NEG_INFINITY
        } else {
            self.entries[Self::offset(n) + m]
        }
    }

    /// Fallible lookup for callers that cannot bound `n` in advance.
    pub fn try_log_stirling(&self, n: usize, m: usize) -> Result<f64> {
        if n > self.n_max {
            return Err(Error::StirlingCapacity {
                requested: n,
                cap: self.n_max,
            });
        }
        Ok(self.log_stirling(n, m))
    }

    /// Row `n` as a slice of `ln s(n, 0..=n)`.
    pub fn row(&self, n: usize) -> &[f64] {
        assert!(n <= self.n_max);
        let start = Self::offset(n);
        &self.entries[start..start + n + 1]
    }
}
