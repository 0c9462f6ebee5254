use num_traits::{One, Zero};

use super::{checkpoint, geometric_indices, Checkpoint, LimitTrace};
use crate::arith::{ln_natural, nat_ratio, Natural};
use crate::error::{param, Result};
use crate::set::{Prefix, SetDescriptor};

/// `S(a_1..a_n)/(n·a_n)` on a geometric grid of `n`.
pub fn mean_ratio(prefix: &Prefix, tol: f64) -> LimitTrace {
    let a = prefix.elements();
    let idx = geometric_indices(a.len());
    let mut sum = Natural::zero();
    let mut next = idx.iter().peekable();
    let mut cps = Vec::with_capacity(idx.len());
    for (i, x) in a.iter().enumerate() {
        sum += x;
        let n = i + 1;
        if next.peek() == Some(&&n) {
            next.next();
            cps.push(checkpoint(n, nat_ratio(&sum, &(x * n))));
        }
    }
    LimitTrace::new(cps, tol)
}

/// `log n / log a_n` for every `n` with `a_n > 1`.
pub fn lambda_trace(prefix: &Prefix, tol: f64) -> LimitTrace {
    let cps = prefix
        .elements()
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.is_one())
        .map(|(i, a)| Checkpoint {
            t: Natural::from(i + 1),
            value: ((i + 1) as f64).ln() / ln_natural(a),
            exact: None,
        })
        .collect();
    LimitTrace::new(cps, tol)
}

/// `max{a_1, a_{i+1}-a_i : i < n}/a_n` for every `n ≥ 2`.
pub fn dispersion_trace(prefix: &Prefix, tol: f64) -> LimitTrace {
    let a = prefix.elements();
    let mut gap = a.first().cloned().unwrap_or_default();
    let mut cps = Vec::with_capacity(a.len());
    for n in 1..a.len() {
        let g = &a[n] - &a[n - 1];
        if g > gap {
            gap = g;
        }
        cps.push(checkpoint(n + 1, nat_ratio(&gap, &a[n])));
    }
    LimitTrace::new(cps, tol)
}

/// [`dispersion_trace`] over all elements `≤ bound`, evaluated only at the
/// first, second and last element of each arithmetic run. Between those
/// the largest gap is fixed and `a_n` grows, so the run ends and the
/// post-jump points carry every local extremum.
pub fn dispersion_trace_runs(set: &SetDescriptor, bound: &Natural, budget: u64, tol: f64) -> Result<LimitTrace> {
    let runs = set.runs(&Natural::zero(), bound, budget)?;
    let mut gap = runs.first().map(|r| r.start.clone()).unwrap_or_default();
    let mut prev: Option<Natural> = None;
    let mut index = Natural::zero();
    let mut cps = Vec::new();
    for r in &runs {
        let first = &r.start;
        if let Some(p) = &prev {
            let g = first - p;
            if g > gap {
                gap = g;
            }
            cps.push(checkpoint(&index + 1u32, nat_ratio(&gap, first)));
        }
        if r.len > Natural::one() {
            if r.step > gap {
                gap = r.step.clone();
            }
            let second = first + &r.step;
            cps.push(checkpoint(&index + 2u32, nat_ratio(&gap, &second)));
            let last = r.last();
            if last != second {
                cps.push(checkpoint(&index + &r.len, nat_ratio(&gap, &last)));
            }
        }
        index += &r.len;
        prev = Some(r.last());
    }
    Ok(LimitTrace::new(cps, tol))
}

/// `a_{n+1}/a_n` for `n = 1..N-1`.
pub fn consecutive_ratio(prefix: &Prefix, tol: f64) -> LimitTrace {
    let a = prefix.elements();
    let cps = a.windows(2).enumerate().map(|(i, w)| checkpoint(i + 1, nat_ratio(&w[1], &w[0]))).collect();
    LimitTrace::new(cps, tol)
}

/// `a_{kn}/a_n` for every `n` with `kn ≤ N`.
pub fn index_dilation_ratio(prefix: &Prefix, k: usize, tol: f64) -> Result<LimitTrace> {
    if k < 2 {
        return Err(param("k", "dilation factor must be at least 2"));
    }
    let a = prefix.elements();
    let cps = (1..=a.len() / k).map(|n| checkpoint(n, nat_ratio(&a[k * n - 1], &a[n - 1]))).collect();
    Ok(LimitTrace::new(cps, tol))
}
