use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::{checkpoint, geometric_grid, Checkpoint, LimitTrace};
use crate::arith::{
    ceil_rational, floor_rational, fmt_rational, ln_natural, nat_ratio, parts, rat_from_nat, to_f64, Natural, Rational,
};
use crate::error::{param, Error, Result};
use crate::set::{power_block_range, Run, SetDescriptor};

fn scale(c: &Rational, t: &Natural) -> Natural {
    let (num, den) = parts(c);
    (num * t) / den
}

/// `A(⌊ct⌋)/A(t)` at each checkpoint.
pub fn ratio_scan(set: &SetDescriptor, c: &Rational, checkpoints: &[Natural], tol: f64) -> Result<LimitTrace> {
    if c <= &Rational::zero() {
        return Err(param("c", "must be positive"));
    }
    let cps: Result<Vec<Checkpoint>> = checkpoints
        .par_iter()
        .map(|t| {
            let den = set.count(t);
            if den.is_zero() {
                return Err(Error::ZeroCount { t: t.clone() });
            }
            Ok(checkpoint(t.clone(), nat_ratio(&set.count(&scale(c, t)), &den)))
        })
        .collect();
    Ok(LimitTrace::new(cps?, tol))
}

/// `log A(t)/log t` at each checkpoint `t ≥ 2`.
pub fn log_count_trace(set: &SetDescriptor, checkpoints: &[Natural], tol: f64) -> Result<LimitTrace> {
    let cps: Result<Vec<Checkpoint>> = checkpoints
        .par_iter()
        .filter(|t| **t > Natural::one())
        .map(|t| {
            let a = set.count(t);
            if a.is_zero() {
                return Err(Error::ZeroCount { t: t.clone() });
            }
            Ok(Checkpoint { t: t.clone(), value: ln_natural(&a) / ln_natural(t), exact: None })
        })
        .collect();
    Ok(LimitTrace::new(cps?, tol))
}

/// Boundaries of the support of `set` inside `[lo, hi]`: the last
/// non-member before each support interval and the top of each interval.
/// For power blocks, the block ends.
pub fn structural_points(set: &SetDescriptor, lo: &Natural, hi: &Natural) -> Vec<Natural> {
    let mut out: Vec<Natural> = Vec::new();
    collect_structure(set, hi, &mut out);
    out.retain(|p| p >= lo && p <= hi);
    out.sort();
    out.dedup();
    out
}

fn collect_structure(set: &SetDescriptor, hi: &Natural, out: &mut Vec<Natural>) {
    match set {
        SetDescriptor::PowerBlocks {} => {
            for n in 1u32.. {
                let (jlo, jhi) = power_block_range(n);
                if &num_traits::Pow::pow(&jlo, n) > hi {
                    break;
                }
                out.push(num_traits::Pow::pow(&jhi, n));
            }
        }
        SetDescriptor::Union { parts } => parts.iter().for_each(|p| collect_structure(p, hi, out)),
        SetDescriptor::Explicit { .. } | SetDescriptor::FinitePoints { .. } => {}
        _ => {
            for (a, b) in set.support(hi) {
                out.push(a);
                out.push(b);
            }
        }
    }
}

/// Unrestricted versus element-restricted sup/inf of `A(ct)/A(t)` on a
/// window.
#[derive(Clone, Debug, Serialize)]
pub struct Lemma1Report {
    #[serde(with = "crate::arith::serde_rat")]
    pub c: Rational,
    #[serde(with = "crate::arith::serde_nat")]
    pub lo: Natural,
    #[serde(with = "crate::arith::serde_nat")]
    pub hi: Natural,
    pub grid_points: usize,
    pub restricted_points: usize,
    pub grid_sup: f64,
    pub grid_inf: f64,
    /// Over `t = a_n/c`, where `A(ct) = A(a_n)` exactly.
    pub restricted_sup: f64,
    pub restricted_inf: f64,
    pub sup_diff: f64,
    pub inf_diff: f64,
}

/// Compares `A(ct)/A(t)` over a grid of `t` in `[lo, hi]` (geometric points
/// plus the set's structural boundaries and their `1/c` images) with the
/// same ratio restricted to `t = a_n/c`.
pub fn lemma1_check(set: &SetDescriptor, c: &Rational, lo: &Natural, hi: &Natural, points: usize) -> Result<Lemma1Report> {
    if c <= &Rational::one() {
        return Err(param("c", "must exceed 1"));
    }
    if hi <= lo {
        return Err(Error::EmptyWindow);
    }
    let mut grid = geometric_grid(lo, hi, points);
    let inv = c.recip();
    for b in structural_points(set, &floor_rational(&(&inv * rat_from_nat(lo))), &scale(c, hi)) {
        let back = scale(&inv, &b);
        for p in [b.clone(), &b + 1u32, back.clone(), back + 1u32] {
            if &p >= lo && &p <= hi {
                grid.push(p);
            }
        }
    }
    grid.sort();
    grid.dedup();
    let grid_vals: Vec<f64> = grid
        .par_iter()
        .map(|t| {
            let den = set.count(t);
            if den.is_zero() {
                return Err(Error::ZeroCount { t: t.clone() });
            }
            Ok(to_f64(&nat_ratio(&set.count(&scale(c, t)), &den)))
        })
        .collect::<Result<_>>()?;
    let restricted: Vec<f64> = grid
        .par_iter()
        .filter_map(|t| {
            let edge = ceil_rational(&(c * rat_from_nat(t)));
            let a = set.successor(&(edge - 1u32))?;
            let back = floor_rational(&(rat_from_nat(&a) / c));
            if &back < lo || &back > hi {
                return None;
            }
            let den = set.count(&back);
            (!den.is_zero()).then(|| to_f64(&nat_ratio(&set.count(&a), &den)))
        })
        .collect();
    let (grid_inf, grid_sup) = bounds(&grid_vals);
    let (restricted_inf, restricted_sup) = bounds(&restricted);
    Ok(Lemma1Report {
        c: c.clone(),
        lo: lo.clone(),
        hi: hi.clone(),
        grid_points: grid.len(),
        restricted_points: restricted.len(),
        grid_sup,
        grid_inf,
        restricted_sup,
        restricted_inf,
        sup_diff: (grid_sup - restricted_sup).abs(),
        inf_diff: (grid_inf - restricted_inf).abs(),
    })
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)))
}

/// Witness cap per scan; counts stay exact past it.
const WITNESS_CAP: usize = 10_000;

#[derive(Clone, Debug, Serialize)]
pub struct NdenseScan {
    #[serde(with = "crate::arith::serde_rat")]
    pub c: Rational,
    /// Number of elements `a_n` in the window with `A(c·a_n) = A(a_n)`.
    #[serde(with = "crate::arith::serde_nat")]
    pub violations: Natural,
    #[serde(with = "crate::arith::serde_nat")]
    pub tail_violations: Natural,
    /// Smallest violating `t`s, capped.
    #[serde(with = "crate::arith::serde_nat_vec")]
    pub witnesses: Vec<Natural>,
    /// `min A(⌊ct⌋) - A(t)` over probe points before and in the tail.
    #[serde(with = "crate::arith::serde_nat")]
    pub head_min_gain: Natural,
    #[serde(with = "crate::arith::serde_nat")]
    pub tail_min_gain: Natural,
    pub condition_i: bool,
    pub condition_ii: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NdenseReport {
    #[serde(with = "crate::arith::serde_nat")]
    pub lo: Natural,
    #[serde(with = "crate::arith::serde_nat")]
    pub hi: Natural,
    /// First `t` of the tail: the median element of the window.
    #[serde(with = "crate::arith::serde_nat")]
    pub tail_start: Natural,
    pub scans: Vec<NdenseScan>,
}

impl NdenseReport {
    /// Condition i for every probed `c`.
    pub fn condition_i(&self) -> bool {
        self.scans.iter().all(|s| s.condition_i)
    }

    pub fn condition_ii(&self) -> bool {
        self.scans.iter().all(|s| s.condition_ii)
    }
}

/// Probes `A(ct) > A(t)` for each `c` over `t ∈ [lo, hi]`.
///
/// `A(⌊ct⌋) = A(t)` fails to grow exactly when the gap after the last
/// element `≤ t` exceeds `(c-1)t`, so violations are read off consecutive
/// element pairs; inside an arithmetic run they form a prefix of the run.
pub fn ndense_probe(set: &SetDescriptor, cs: &[Rational], lo: &Natural, hi: &Natural, budget: u64) -> Result<NdenseReport> {
    if hi <= lo || lo.is_zero() {
        return Err(Error::EmptyWindow);
    }
    if cs.iter().any(|c| c <= &Rational::one()) {
        return Err(param("c", "must exceed 1"));
    }
    let runs = set.runs(&Natural::zero(), hi, budget)?;
    let n = set.count(hi);
    let median = (&n + 1u32) >> 1u32;
    let tail_start = if median.is_zero() { lo.clone() } else { set.nth_element(&median)?.max(lo.clone()) };
    let next_after = set.successor(hi);
    let scans = cs
        .par_iter()
        .map(|c| scan_one(set, c, &runs, next_after.as_ref(), lo, hi, &tail_start))
        .collect::<Result<Vec<_>>>()?;
    Ok(NdenseReport { lo: lo.clone(), hi: hi.clone(), tail_start, scans })
}

fn scan_one(
    set: &SetDescriptor,
    c: &Rational,
    runs: &[Run],
    next_after: Option<&Natural>,
    lo: &Natural,
    hi: &Natural,
    tail_start: &Natural,
) -> Result<NdenseScan> {
    let mut violations = Natural::zero();
    let mut tail_violations = Natural::zero();
    let mut witnesses = Vec::new();
    let mut note = |t: Natural, count: Natural, step: &Natural| {
        // `count` violating points t, t+step, …
        if count.is_zero() {
            return;
        }
        let last = &t + step * (&count - 1u32);
        if &last >= tail_start {
            let skip = if &t >= tail_start { Natural::zero() } else { (tail_start - &t + step - 1u32) / step };
            tail_violations += &count - skip;
        }
        violations += &count;
        let mut k = Natural::zero();
        while witnesses.len() < WITNESS_CAP && k < count {
            witnesses.push(&t + step * &k);
            k += 1u32;
        }
    };
    // pair (x, y) of consecutive elements, or y = None past the end
    let pair = |x: Option<&Natural>, y: Option<&Natural>| -> Option<Natural> {
        let t = match x {
            Some(x) if x >= lo => x.clone(),
            _ => lo.clone(),
        };
        if &t > hi || y.is_some_and(|y| y <= &t) {
            return None;
        }
        match y {
            Some(y) if &scale(c, &t) >= y => None,
            _ => Some(t),
        }
    };
    let mut prev: Option<Natural> = None;
    for r in runs {
        if let Some(t) = pair(prev.as_ref(), Some(&r.start)) {
            note(t, Natural::one(), &Natural::one());
        }
        // inside the run: a violates iff (c-1)·a < step
        if r.len > Natural::one() {
            let limit = rat_from_nat(&r.step) / (c - Rational::one());
            let last = r.last();
            // first run index with element ≥ lo
            let i0 = if r.start >= *lo { Natural::zero() } else { (lo - &r.start + &r.step - 1u32) / &r.step };
            let i_end = &r.len - 1u32; // exclusive: the last element pairs with the next run
            if i0 > Natural::zero() && i0 < r.len && *lo < r.nth(&i0) {
                // lo falls strictly inside the gap before element i0
                let prev_el = r.nth(&(&i0 - 1u32));
                if let Some(t) = pair(Some(&prev_el), Some(&r.nth(&i0))) {
                    note(t, Natural::one(), &Natural::one());
                }
            }
            if i0 < i_end {
                // indices i with start + i·step < limit
                let start = rat_from_nat(&r.start);
                let mut i1 = if limit <= start {
                    Natural::zero()
                } else {
                    ceil_rational(&((&limit - start) / rat_from_nat(&r.step)))
                };
                i1 = i1.min(i_end.clone());
                let top_ok = (hi - &r.start) / &r.step + 1u32;
                i1 = i1.min(top_ok);
                if i1 > i0 {
                    note(r.nth(&i0), &i1 - &i0, &r.step);
                }
            }
            prev = Some(last);
        } else {
            prev = Some(r.start.clone());
        }
    }
    if let Some(t) = pair(prev.as_ref(), next_after) {
        note(t, Natural::one(), &Natural::one());
    }
    witnesses.sort();

    // gains A(⌊ct⌋) - A(t) at run ends, run starts and a geometric grid
    let mut probes = geometric_grid(lo, hi, 200);
    for r in runs {
        for p in [r.start.clone(), r.last()] {
            if &p >= lo && &p <= hi {
                probes.push(p);
            }
        }
    }
    probes.sort();
    probes.dedup();
    let gains: Vec<(bool, Natural)> = probes
        .par_iter()
        .map(|t| {
            let a = set.count(t);
            let b = set.count(&scale(c, t));
            (t >= tail_start, b - a)
        })
        .collect();
    let min_of = |tail: bool| gains.iter().filter(|(x, _)| *x == tail).map(|(_, g)| g.clone()).min();
    let tail_min_gain = min_of(true).unwrap_or_default();
    let head_min_gain = min_of(false).unwrap_or_default();
    let condition_ii = tail_min_gain >= Natural::one() && tail_min_gain > head_min_gain;
    Ok(NdenseScan {
        c: c.clone(),
        condition_i: tail_violations.is_zero(),
        violations,
        tail_violations,
        witnesses,
        head_min_gain,
        tail_min_gain,
        condition_ii,
    })
}

impl std::fmt::Display for NdenseScan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "c={} violations={} tail={} gain(head/tail)={}/{}",
            fmt_rational(&self.c),
            self.violations,
            self.tail_violations,
            self.head_min_gain,
            self.tail_min_gain
        )
    }
}
