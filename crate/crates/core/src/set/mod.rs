//! Symbolic sets of positive integers with closed-form counting.
//!
//! A [`SetDescriptor`] answers `count(x) = #{a ≤ x}` without enumerating, and
//! enumerates ranges as arithmetic [`Run`]s so that block-structured sets with
//! factorial-size blocks stay cheap.

mod blocks;
mod prefix;

use std::collections::BTreeSet;

use num_integer::Integer;
use num_traits::{One, Pow, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub use blocks::{intersect, merge, BlockRule, FactorialIndex, Interval};
pub use prefix::Prefix;

use crate::arith::{
    iroot_ceil, iroot_floor, parts, serde_nat, serde_nat_vec, serde_opt_nat, serde_rat, small_parts, Natural,
    Rational,
};
use crate::error::{param, Error, Result};
use blocks::{clip, point_interval};

/// Default element budget for a single enumeration call.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Element budget, taken from `RATIOBLOCK_BUDGET` when set.
pub fn default_budget() -> u64 {
    std::env::var("RATIOBLOCK_BUDGET")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}

fn default_one() -> Natural {
    Natural::one()
}

fn default_one_u32() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum SetDescriptor {
    Explicit {
        #[serde(with = "serde_nat_vec")]
        elements: Vec<Natural>,
    },
    /// `⌈j^{1/q}⌉` for `j_min ≤ j ≤ j_max`.
    PowerRoot {
        #[serde(with = "serde_rat")]
        q: Rational,
        #[serde(with = "serde_nat", default = "default_one")]
        j_min: Natural,
        #[serde(with = "serde_opt_nat", default, skip_serializing_if = "Option::is_none")]
        j_max: Option<Natural>,
    },
    IntervalBlocks {
        blocks: BlockRule,
    },
    /// Multiples of `step` inside the blocks.
    ProgressionBlocks {
        #[serde(with = "serde_nat")]
        step: Natural,
        blocks: BlockRule,
    },
    /// Block `n` is `{jⁿ : n^{n-1} ≤ j ≤ (n+1)^{n+1}}`; consecutive blocks
    /// share one endpoint.
    PowerBlocks {},
    /// `⌈anchor·ratio^j⌉` for `j_min ≤ j ≤ j_max`, keeping values `≤ cap`.
    GeometricCeil {
        #[serde(with = "serde_nat")]
        anchor: Natural,
        #[serde(with = "serde_rat")]
        ratio: Rational,
        #[serde(default = "default_one_u32")]
        j_min: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        j_max: Option<u32>,
        #[serde(with = "serde_opt_nat", default, skip_serializing_if = "Option::is_none")]
        cap: Option<Natural>,
    },
    FinitePoints {
        #[serde(with = "serde_nat_vec")]
        points: Vec<Natural>,
    },
    Union {
        parts: Vec<SetDescriptor>,
    },
    Masked {
        inner: Box<SetDescriptor>,
        mask: BlockRule,
    },
}

/// Arithmetic run `start, start+step, …` of `len` elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub start: Natural,
    pub step: Natural,
    pub len: Natural,
}

impl Run {
    pub fn point(x: Natural) -> Self {
        Run { start: x, step: Natural::one(), len: Natural::one() }
    }

    pub fn last(&self) -> Natural {
        &self.start + &self.step * (&self.len - 1u32)
    }

    /// `k`-th element, 0-based.
    pub fn nth(&self, k: &Natural) -> Natural {
        &self.start + &self.step * k
    }

    fn expand(&self) -> impl Iterator<Item = Natural> + '_ {
        let len = self.len.to_u64().expect("run too long to expand");
        (0..len).map(move |k| &self.start + &self.step * k)
    }
}

/// Iterator over the elements of a list of runs.
pub struct Elements {
    runs: std::vec::IntoIter<Run>,
    current: Option<(Run, Natural)>,
}

impl Iterator for Elements {
    type Item = Natural;

    fn next(&mut self) -> Option<Natural> {
        loop {
            if let Some((run, k)) = &mut self.current {
                if *k < run.len {
                    let v = run.nth(k);
                    *k += 1u32;
                    return Some(v);
                }
            }
            self.current = Some((self.runs.next()?, Natural::zero()));
        }
    }
}

fn check_budget(needed: &Natural, budget: u64) -> Result<()> {
    if *needed > Natural::from(budget) {
        Err(Error::Budget { budget, needed: needed.clone() })
    } else {
        Ok(())
    }
}

struct Power {
    num: u32,
    den: u32,
}

impl Power {
    fn new(q: &Rational) -> Result<Self> {
        let (num, den) = small_parts(q, "q")?;
        Ok(Power { num, den })
    }

    /// `⌈j^{1/q}⌉`.
    fn elem(&self, j: &Natural) -> Natural {
        let p = Pow::pow(j, self.den);
        if self.num == 1 {
            p
        } else {
            iroot_ceil(&p, self.num)
        }
    }

    /// `⌊y^q⌋`, the number of `j ≥ 1` with `⌈j^{1/q}⌉ ≤ y`.
    fn index(&self, y: &Natural) -> Natural {
        iroot_floor(&Pow::pow(y, self.num), self.den)
    }
}

struct Geometric<'a> {
    num: Natural,
    den: Natural,
    u: Natural,
    v: Natural,
    j: u32,
    j_max: Option<u32>,
    cap: Option<&'a Natural>,
    last: Option<Natural>,
}

impl Iterator for Geometric<'_> {
    type Item = Natural;

    fn next(&mut self) -> Option<Natural> {
        loop {
            if self.j_max.is_some_and(|m| self.j > m) {
                return None;
            }
            let (q, r) = self.num.div_rem(&self.den);
            let v = if r.is_zero() { q } else { q + 1u32 };
            if self.cap.is_some_and(|c| &v > c) {
                return None;
            }
            self.num *= &self.u;
            self.den *= &self.v;
            self.j += 1;
            if self.last.as_ref() != Some(&v) {
                self.last = Some(v.clone());
                return Some(v);
            }
        }
    }
}

impl SetDescriptor {
    // ---- constructors -------------------------------------------------

    pub fn explicit(mut elements: Vec<Natural>) -> Self {
        elements.retain(|x| !x.is_zero());
        elements.sort();
        elements.dedup();
        SetDescriptor::Explicit { elements }
    }

    pub fn finite_points(mut points: Vec<Natural>) -> Self {
        points.retain(|x| !x.is_zero());
        points.sort();
        points.dedup();
        SetDescriptor::FinitePoints { points }
    }

    pub fn power_root(q: Rational) -> Result<Self> {
        SetDescriptor::PowerRoot { q, j_min: Natural::one(), j_max: None }.validated()
    }

    /// Elements `⌈j^{1/q}⌉` that fall in the value range `(lo, hi]`.
    pub fn power_root_between(q: Rational, lo: &Natural, hi: &Natural) -> Result<Self> {
        let p = Power::new(&q)?;
        let j_min = p.index(lo) + 1u32;
        let j_max = p.index(hi);
        SetDescriptor::PowerRoot { q, j_min, j_max: Some(j_max) }.validated()
    }

    pub fn geometric(anchor: Natural, ratio: Rational, j_min: u32, j_max: Option<u32>, cap: Option<Natural>) -> Result<Self> {
        SetDescriptor::GeometricCeil { anchor, ratio, j_min, j_max, cap }.validated()
    }

    pub fn union(parts: Vec<SetDescriptor>) -> Result<Self> {
        SetDescriptor::Union { parts }.validated()
    }

    pub fn masked(inner: SetDescriptor, mask: BlockRule) -> Result<Self> {
        SetDescriptor::Masked { inner: Box::new(inner), mask }.validated()
    }

    pub fn empty() -> Self {
        SetDescriptor::FinitePoints { points: Vec::new() }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<SetDescriptor>(s)?.validated()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serialises")
    }

    /// Normalises (sorting explicit lists, flattening unions) and checks
    /// parameters.
    pub fn validated(self) -> Result<Self> {
        let out = match self {
            SetDescriptor::Explicit { elements } => SetDescriptor::explicit(elements),
            SetDescriptor::FinitePoints { points } => SetDescriptor::finite_points(points),
            SetDescriptor::PowerRoot { q, j_min, j_max } => {
                let (num, den) = small_parts(&q, "q")?;
                if num == 0 || num > den {
                    return Err(param("q", "exponent must lie in (0,1]"));
                }
                if j_min.is_zero() {
                    return Err(param("j_min", "must be at least 1"));
                }
                SetDescriptor::PowerRoot { q, j_min, j_max }
            }
            SetDescriptor::IntervalBlocks { blocks } => {
                blocks.validate()?;
                SetDescriptor::IntervalBlocks { blocks }
            }
            SetDescriptor::ProgressionBlocks { step, blocks } => {
                if step.is_zero() {
                    return Err(param("step", "must be positive"));
                }
                blocks.validate()?;
                SetDescriptor::ProgressionBlocks { step, blocks }
            }
            SetDescriptor::PowerBlocks {} => SetDescriptor::PowerBlocks {},
            SetDescriptor::GeometricCeil { anchor, ratio, j_min, j_max, cap } => {
                if anchor.is_zero() {
                    return Err(param("anchor", "must be positive"));
                }
                if ratio <= Rational::one() {
                    return Err(param("ratio", "must exceed 1"));
                }
                SetDescriptor::GeometricCeil { anchor, ratio, j_min, j_max, cap }
            }
            SetDescriptor::Union { parts } => {
                let mut flat = Vec::new();
                for p in parts {
                    match p.validated()? {
                        SetDescriptor::Union { parts } => flat.extend(parts),
                        other => flat.push(other),
                    }
                }
                check_union_overlaps(&flat)?;
                SetDescriptor::Union { parts: flat }
            }
            SetDescriptor::Masked { inner, mask } => {
                mask.validate()?;
                SetDescriptor::Masked { inner: Box::new(inner.validated()?), mask }
            }
        };
        Ok(out)
    }

    // ---- structure ----------------------------------------------------

    /// Every element is at most the returned value, or `None` if unbounded.
    pub fn upper_bound(&self) -> Option<Natural> {
        match self {
            SetDescriptor::Explicit { elements: v } | SetDescriptor::FinitePoints { points: v } => {
                Some(v.last().cloned().unwrap_or_default())
            }
            SetDescriptor::PowerRoot { q, j_max, .. } => {
                let p = Power::new(q).ok()?;
                j_max.as_ref().map(|j| p.elem(j))
            }
            SetDescriptor::IntervalBlocks { blocks } | SetDescriptor::ProgressionBlocks { blocks, .. } => {
                blocks.upper_bound()
            }
            SetDescriptor::PowerBlocks {} => None,
            SetDescriptor::GeometricCeil { cap, j_max, .. } => {
                if cap.is_none() && j_max.is_none() {
                    None
                } else {
                    Some(self.geometric_values().last().unwrap_or_default())
                }
            }
            SetDescriptor::Union { parts } => {
                let mut m = Natural::zero();
                for p in parts {
                    m = m.max(p.upper_bound()?);
                }
                Some(m)
            }
            SetDescriptor::Masked { inner, mask } => match (inner.upper_bound(), mask.upper_bound()) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (Some(a), None) | (None, Some(a)) => Some(a),
                (None, None) => None,
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.upper_bound().is_some()
    }

    fn geometric_values(&self) -> Geometric<'_> {
        let SetDescriptor::GeometricCeil { anchor, ratio, j_min, j_max, cap } = self else {
            unreachable!()
        };
        let (u, v) = parts(ratio);
        Geometric {
            num: anchor * Pow::pow(&u, *j_min),
            den: Pow::pow(&v, *j_min),
            u,
            v,
            j: *j_min,
            j_max: *j_max,
            cap: cap.as_ref(),
            last: None,
        }
    }

    /// Sorted disjoint intervals covering every element `≤ x`. May be coarse.
    pub fn support(&self, x: &Natural) -> Vec<Interval> {
        let zero = Natural::zero();
        let whole = |lo: Natural, hi: Option<Natural>| {
            let hi = match hi {
                Some(h) if &h < x => h,
                _ => x.clone(),
            };
            if lo < hi {
                vec![(lo, hi)]
            } else {
                vec![]
            }
        };
        match self {
            SetDescriptor::Explicit { elements: v } | SetDescriptor::FinitePoints { points: v } => {
                merge(v.iter().take_while(|p| *p <= x).map(point_interval).collect())
            }
            SetDescriptor::PowerRoot { q, j_min, .. } => {
                let first = Power::new(q).map(|p| p.elem(j_min)).unwrap_or_default();
                whole(first - 1u32, self.upper_bound())
            }
            SetDescriptor::IntervalBlocks { blocks } | SetDescriptor::ProgressionBlocks { blocks, .. } => {
                clip(blocks.blocks_upto(x), x)
            }
            SetDescriptor::PowerBlocks {} => whole(zero, None),
            SetDescriptor::GeometricCeil { .. } => match self.geometric_values().next() {
                Some(first) => whole(first - 1u32, self.upper_bound()),
                None => vec![],
            },
            SetDescriptor::Union { parts } => merge(parts.iter().flat_map(|p| p.support(x)).collect()),
            SetDescriptor::Masked { inner, mask } => intersect(&inner.support(x), &clip(mask.blocks_upto(x), x)),
        }
    }

    // ---- counting -----------------------------------------------------

    /// `A(x) = #{a ∈ A : a ≤ x}`.
    pub fn count(&self, x: &Natural) -> Natural {
        if x.is_zero() {
            return Natural::zero();
        }
        match self {
            SetDescriptor::Explicit { elements: v } | SetDescriptor::FinitePoints { points: v } => {
                Natural::from(v.partition_point(|a| a <= x))
            }
            SetDescriptor::PowerRoot { q, j_min, j_max } => {
                let p = Power::new(q).expect("validated exponent");
                let mut hi = p.index(x);
                if let Some(m) = j_max {
                    hi = hi.min(m.clone());
                }
                if &hi < j_min {
                    Natural::zero()
                } else {
                    hi - j_min + 1u32
                }
            }
            SetDescriptor::IntervalBlocks { blocks } => clip(blocks.blocks_upto(x), x)
                .into_iter()
                .map(|(l, r)| r - l)
                .sum(),
            SetDescriptor::ProgressionBlocks { step, blocks } => clip(blocks.blocks_upto(x), x)
                .into_iter()
                .map(|(l, r)| r / step - l / step)
                .sum(),
            SetDescriptor::PowerBlocks {} => {
                let mut total = Natural::zero();
                for n in 1u32.. {
                    let (jlo, jhi) = power_block_range(n);
                    if &Pow::pow(&jlo, n) > x {
                        break;
                    }
                    let top = iroot_floor(x, n).min(jhi);
                    total += top - &jlo + 1u32;
                    if n >= 2 {
                        // shared endpoint with block n-1
                        total -= 1u32;
                    }
                }
                total
            }
            SetDescriptor::GeometricCeil { .. } => {
                Natural::from(self.geometric_values().take_while(|v| v <= x).count())
            }
            SetDescriptor::Union { parts } => union_count(parts, x),
            SetDescriptor::Masked { inner, mask } => clip(mask.blocks_upto(x), x)
                .into_iter()
                .map(|(l, r)| inner.count(&r) - inner.count(&l))
                .sum(),
        }
    }

    /// Number of elements in `(lo, hi]`.
    pub fn count_between(&self, lo: &Natural, hi: &Natural) -> Natural {
        if hi <= lo {
            return Natural::zero();
        }
        self.count(hi) - self.count(lo)
    }

    pub fn contains(&self, x: &Natural) -> bool {
        if x.is_zero() {
            return false;
        }
        match self {
            SetDescriptor::Explicit { elements: v } | SetDescriptor::FinitePoints { points: v } => {
                v.binary_search(x).is_ok()
            }
            SetDescriptor::PowerRoot { q, j_min, j_max } => {
                let p = Power::new(q).expect("validated exponent");
                let j = p.index(x);
                &j >= j_min && j_max.as_ref().is_none_or(|m| &j <= m) && &p.elem(&j) == x
            }
            SetDescriptor::IntervalBlocks { blocks } => blocks.contains(x),
            SetDescriptor::ProgressionBlocks { step, blocks } => (x % step).is_zero() && blocks.contains(x),
            SetDescriptor::PowerBlocks {} => {
                for n in 1u32.. {
                    let (jlo, jhi) = power_block_range(n);
                    if &Pow::pow(&jlo, n) > x {
                        return false;
                    }
                    let r = iroot_floor(x, n);
                    if &Pow::pow(&r, n) == x && r >= jlo && r <= jhi {
                        return true;
                    }
                }
                unreachable!()
            }
            SetDescriptor::GeometricCeil { .. } => self.geometric_values().take_while(|v| v <= x).any(|v| &v == x),
            SetDescriptor::Union { parts } => parts.iter().any(|p| p.contains(x)),
            SetDescriptor::Masked { inner, mask } => mask.contains(x) && inner.contains(x),
        }
    }

    // ---- enumeration --------------------------------------------------

    /// Elements in `(lo, hi]` as increasing, non-overlapping arithmetic runs.
    /// Fails if more than `budget` runs would be produced.
    pub fn runs(&self, lo: &Natural, hi: &Natural, budget: u64) -> Result<Vec<Run>> {
        if hi <= lo {
            return Ok(vec![]);
        }
        let one = Natural::one();
        let out = match self {
            SetDescriptor::Explicit { elements: v } | SetDescriptor::FinitePoints { points: v } => {
                let a = v.partition_point(|x| x <= lo);
                let b = v.partition_point(|x| x <= hi);
                check_budget(&Natural::from(b - a), budget)?;
                v[a..b].iter().cloned().map(Run::point).collect()
            }
            SetDescriptor::PowerRoot { q, j_min, j_max } => {
                let p = Power::new(q)?;
                let first = (p.index(lo) + 1u32).max(j_min.clone());
                let mut last = p.index(hi);
                if let Some(m) = j_max {
                    last = last.min(m.clone());
                }
                if last < first {
                    vec![]
                } else if p.num == 1 && p.den == 1 {
                    vec![Run { start: first.clone(), step: one, len: last - first + 1u32 }]
                } else {
                    check_budget(&(&last - &first + 1u32), budget)?;
                    let n = (last - &first).to_u64().unwrap() + 1;
                    (0..n).map(|k| Run::point(p.elem(&(&first + k)))).collect()
                }
            }
            SetDescriptor::IntervalBlocks { blocks } => {
                let v = window_blocks(blocks, lo, hi);
                check_budget(&Natural::from(v.len()), budget)?;
                v.into_iter()
                    .map(|(l, r)| Run { start: &l + 1u32, step: one.clone(), len: r - l })
                    .collect()
            }
            SetDescriptor::ProgressionBlocks { step, blocks } => {
                let v = window_blocks(blocks, lo, hi);
                check_budget(&Natural::from(v.len()), budget)?;
                v.into_iter()
                    .filter_map(|(l, r)| {
                        let len = &r / step - &l / step;
                        (!len.is_zero()).then(|| Run { start: (&l / step + 1u32) * step, step: step.clone(), len })
                    })
                    .collect()
            }
            SetDescriptor::PowerBlocks {} => {
                check_budget(&self.count_between(lo, hi), budget)?;
                let mut out = Vec::new();
                for n in 1u32.. {
                    let (jlo, jhi) = power_block_range(n);
                    if &Pow::pow(&jlo, n) > hi {
                        break;
                    }
                    let skip = if n >= 2 { &jlo + 1u32 } else { jlo.clone() };
                    let first = (iroot_floor(lo, n) + 1u32).max(skip);
                    let last = iroot_floor(hi, n).min(jhi);
                    if last < first {
                        continue;
                    }
                    if n == 1 {
                        out.push(Run { start: first.clone(), step: one.clone(), len: last - first + 1u32 });
                    } else {
                        let mut j = first;
                        while j <= last {
                            out.push(Run::point(Pow::pow(&j, n)));
                            j += 1u32;
                        }
                    }
                }
                out
            }
            SetDescriptor::GeometricCeil { .. } => {
                check_budget(&self.count_between(lo, hi), budget)?;
                self.geometric_values()
                    .skip_while(|v| v <= lo)
                    .take_while(|v| v <= hi)
                    .map(Run::point)
                    .collect()
            }
            SetDescriptor::Union { parts } => {
                let mut all = Vec::new();
                for p in parts {
                    all.extend(p.runs(lo, hi, budget)?);
                }
                check_budget(&Natural::from(all.len()), budget)?;
                merge_runs(all, budget)?
            }
            SetDescriptor::Masked { inner, mask } => {
                let mut out = Vec::new();
                for (l, r) in window_blocks(mask, lo, hi) {
                    for run in inner.runs(&l, &r, budget)? {
                        out.push(run);
                    }
                    check_budget(&Natural::from(out.len()), budget)?;
                }
                out
            }
        };
        Ok(out)
    }

    /// Streams the elements of `(lo, hi]` in increasing order.
    pub fn enumerate_range(&self, lo: &Natural, hi: &Natural, budget: u64) -> Result<Elements> {
        check_budget(&self.count_between(lo, hi), budget)?;
        let runs = self.runs(lo, hi, budget)?;
        Ok(Elements { runs: runs.into_iter(), current: None })
    }

    /// The `n`-th smallest element (1-based): the unique `a` with
    /// `count(a) = n` and `count(a-1) = n-1`.
    pub fn nth_element(&self, n: &Natural) -> Result<Natural> {
        if n.is_zero() {
            return Err(param("n", "indices start at 1"));
        }
        let mut hi = match self.upper_bound() {
            Some(m) => {
                let available = self.count(&m);
                if &available < n {
                    return Err(Error::Exhausted { requested: n.to_usize().unwrap_or(usize::MAX), available });
                }
                m
            }
            None => {
                let mut h = Natural::one();
                while &self.count(&h) < n {
                    h <<= 1u32;
                }
                h
            }
        };
        let mut lo = Natural::zero();
        // invariant: count(lo) < n <= count(hi)
        while &hi - &lo > Natural::one() {
            let mid: Natural = (&lo + &hi) >> 1u32;
            if &self.count(&mid) >= n {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Smallest element strictly greater than `x`, if any.
    pub fn successor(&self, x: &Natural) -> Option<Natural> {
        self.nth_element(&(self.count(x) + 1u32)).ok()
    }

    pub fn take_prefix(&self, n: usize, budget: u64) -> Result<Prefix> {
        if n == 0 {
            return Err(param("n", "prefix length must be at least 1"));
        }
        check_budget(&Natural::from(n), budget)?;
        let last = self.nth_element(&Natural::from(n)).map_err(|e| match e {
            Error::Exhausted { available, .. } => Error::Exhausted { requested: n, available },
            e => e,
        })?;
        let elements: Vec<Natural> = self.enumerate_range(&Natural::zero(), &last, budget)?.collect();
        debug_assert_eq!(elements.len(), n);
        Ok(Prefix::with_source(elements, self.clone()))
    }

    /// All elements `≤ bound`.
    pub fn prefix_upto(&self, bound: &Natural, budget: u64) -> Result<Prefix> {
        let elements: Vec<Natural> = self.enumerate_range(&Natural::zero(), bound, budget)?.collect();
        Ok(Prefix::with_source(elements, self.clone()))
    }
}

/// `j` range of block `n` of the power-block family.
pub fn power_block_range(n: u32) -> (Natural, Natural) {
    let nn = Natural::from(n);
    (Pow::pow(&nn, n - 1), Pow::pow(&(nn + 1u32), n + 1))
}

fn window_blocks(rule: &BlockRule, lo: &Natural, hi: &Natural) -> Vec<Interval> {
    intersect(&clip(rule.blocks_upto(hi), hi), &[(lo.clone(), hi.clone())])
}

/// Sorts runs and resolves overlaps between runs from different parts by
/// expanding only the overlapping clusters.
fn merge_runs(mut runs: Vec<Run>, budget: u64) -> Result<Vec<Run>> {
    runs.sort_by(|a, b| a.start.cmp(&b.start));
    let mut out = Vec::with_capacity(runs.len());
    let mut cluster: Vec<Run> = Vec::new();
    let mut cluster_end = Natural::zero();
    let flush = |cluster: &mut Vec<Run>, out: &mut Vec<Run>| -> Result<()> {
        if cluster.len() == 1 {
            out.push(cluster.pop().unwrap());
        } else if !cluster.is_empty() {
            let total: Natural = cluster.iter().map(|r| r.len.clone()).sum();
            check_budget(&total, budget)?;
            let pts: BTreeSet<Natural> = cluster.iter().flat_map(|r| r.expand().collect::<Vec<_>>()).collect();
            out.extend(pts.into_iter().map(Run::point));
            cluster.clear();
        }
        Ok(())
    };
    for run in runs {
        if !cluster.is_empty() && run.start > cluster_end {
            flush(&mut cluster, &mut out)?;
        }
        let last = run.last();
        if cluster.is_empty() || last > cluster_end {
            cluster_end = last;
        }
        cluster.push(run);
    }
    flush(&mut cluster, &mut out)?;
    Ok(out)
}

fn union_count(parts: &[SetDescriptor], x: &Natural) -> Natural {
    let mut total = Natural::zero();
    let mut earlier: Vec<Interval> = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        total += part.count(x);
        let support = part.support(x);
        if i > 0 {
            for (lo, hi) in intersect(&support, &earlier) {
                total -= duplicates(&parts[..i], part, &lo, &hi);
            }
        }
        earlier = merge(earlier.into_iter().chain(support).collect());
    }
    total
}

/// Elements of `part` in `(lo, hi]` that already belong to an earlier part.
/// Enumerates whichever side is smaller.
fn duplicates(earlier: &[SetDescriptor], part: &SetDescriptor, lo: &Natural, hi: &Natural) -> Natural {
    let own = part.count_between(lo, hi);
    let others: Natural = earlier.iter().map(|p| p.count_between(lo, hi)).sum();
    if own.is_zero() || others.is_zero() {
        return Natural::zero();
    }
    let n = if own <= others {
        part.enumerate_range(lo, hi, u64::MAX)
            .expect("overlap window enumerable")
            .filter(|v| earlier.iter().any(|p| p.contains(v)))
            .count()
    } else {
        let mut seen = BTreeSet::new();
        for p in earlier {
            seen.extend(p.enumerate_range(lo, hi, u64::MAX).expect("overlap window enumerable"));
        }
        seen.iter().filter(|v| part.contains(v)).count()
    };
    Natural::from(n)
}

/// Two unbounded parts whose supports keep meeting would make union counting
/// require unbounded enumeration.
fn check_union_overlaps(parts: &[SetDescriptor]) -> Result<()> {
    let probe = crate::arith::factorial(60);
    let unbounded: Vec<(usize, Vec<Interval>)> = parts
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_finite())
        .map(|(i, p)| (i, p.support(&probe)))
        .collect();
    for (a, (i, si)) in unbounded.iter().enumerate() {
        for (j, sj) in &unbounded[a + 1..] {
            if !intersect(si, sj).is_empty() {
                return Err(Error::Overlap { first: *i, second: *j });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{nat, rat};
    use proptest::prelude::*;

    fn squares() -> SetDescriptor {
        SetDescriptor::power_root(rat(1, 2)).unwrap()
    }

    fn factorial_blocks() -> SetDescriptor {
        SetDescriptor::IntervalBlocks { blocks: BlockRule::factorial(2, 0, 1, 1, false) }
    }

    fn collect(s: &SetDescriptor, lo: u64, hi: u64) -> Vec<u64> {
        s.enumerate_range(&nat(lo), &nat(hi), DEFAULT_BUDGET)
            .unwrap()
            .map(|v| v.to_u64().unwrap())
            .collect()
    }

    #[test]
    fn closed_form_counts() {
        assert_eq!(squares().count(&nat(100)), nat(10));
        assert_eq!(factorial_blocks().count(&nat(720)), nat(100));
        assert_eq!(SetDescriptor::explicit(vec![nat(3), nat(5), nat(8)]).count(&nat(5)), nat(2));
        assert_eq!(squares().count(&nat(0)), nat(0));
    }

    #[test]
    fn enumeration_examples() {
        let g = SetDescriptor::geometric(nat(6), rat(4, 3), 1, None, None).unwrap();
        assert_eq!(collect(&g, 6, 24), vec![8, 11, 15, 19]);
        assert_eq!(collect(&SetDescriptor::explicit(vec![nat(3), nat(5), nat(8)]), 3, 8), vec![5, 8]);
        assert_eq!(collect(&squares(), 0, 10), vec![1, 4, 9]);
    }

    #[test]
    fn prefixes() {
        let p = squares().take_prefix(4, DEFAULT_BUDGET).unwrap();
        assert_eq!(p.elements(), &[nat(1), nat(4), nat(9), nat(16)]);
        let u = SetDescriptor::union(vec![
            SetDescriptor::explicit(vec![nat(2)]),
            SetDescriptor::explicit(vec![nat(2), nat(5)]),
        ])
        .unwrap();
        assert_eq!(u.take_prefix(2, DEFAULT_BUDGET).unwrap().elements(), &[nat(2), nat(5)]);
        assert!(u.take_prefix(3, DEFAULT_BUDGET).is_err());
        let pb = SetDescriptor::PowerBlocks {};
        assert_eq!(pb.take_prefix(4, DEFAULT_BUDGET).unwrap().elements(), &[nat(1), nat(2), nat(3), nat(4)]);
    }

    #[test]
    fn power_blocks_share_endpoints() {
        let pb = SetDescriptor::PowerBlocks {};
        // block 1: 1..4, block 2: j² for 2 ≤ j ≤ 27, sharing 4
        assert_eq!(pb.count(&nat(729)), nat(4 + 25));
        assert!(pb.contains(&nat(729)));
        assert!(pb.contains(&nat(16_777_216)));
        assert!(!pb.contains(&nat(5)));
        assert_eq!(pb.count(&nat(16_777_216)), nat(4 + 25 + 247));
    }

    #[test]
    fn budget_is_enforced() {
        let e = squares().enumerate_range(&nat(0), &nat(10_000), 50);
        assert!(matches!(e, Err(Error::Budget { .. })));
        // runs keep huge blocks cheap
        let runs = factorial_blocks().runs(&nat(0), &crate::arith::factorial(40), 100).unwrap();
        assert_eq!(runs.len(), 19);
    }

    #[test]
    fn overlapping_unbounded_union_rejected() {
        let r = SetDescriptor::union(vec![squares(), SetDescriptor::power_root(rat(1, 3)).unwrap()]);
        assert!(matches!(r, Err(Error::Overlap { .. })));
    }

    #[test]
    fn json_round_trip() {
        let s = SetDescriptor::masked(squares(), BlockRule::factorial(2, 0, 1, 1, true)).unwrap();
        let back = SetDescriptor::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["family"], "masked");
        assert_eq!(v["params"]["inner"]["params"]["q"], "1/2");
    }

    #[test]
    fn nth_and_successor() {
        let f = factorial_blocks();
        assert_eq!(f.nth_element(&nat(5)).unwrap(), nat(25));
        assert_eq!(f.successor(&nat(6)).unwrap(), nat(25));
        assert_eq!(f.successor(&nat(120)).unwrap(), nat(721));
    }

    fn brute(s: &SetDescriptor, x: u64) -> u64 {
        (1..=x).filter(|v| s.contains(&nat(*v))).count() as u64
    }

    fn arb_descriptor() -> impl Strategy<Value = SetDescriptor> {
        let leaf = prop_oneof![
            (1i64..=4, 1i64..=4).prop_filter_map("q in (0,1]", |(a, b)| {
                (a <= b).then(|| SetDescriptor::power_root(rat(a, b)).unwrap())
            }),
            (1u64..40, 1u64..400, prop::option::of(1u64..20)).prop_filter_map("range", |(q, lo, span)| {
                let q = rat(1, q as i64 % 3 + 1);
                SetDescriptor::power_root_between(q, &nat(lo), &nat(lo + span.unwrap_or(10) * 50)).ok()
            }),
            prop::collection::vec(1u64..3000, 0..12)
                .prop_map(|v| SetDescriptor::explicit(v.into_iter().map(nat).collect())),
            (2u64..9, 2i64..7, 1i64..5).prop_map(|(a, u, v)| {
                SetDescriptor::geometric(nat(a), rat(u + v, v), 1, None, None).unwrap()
            }),
            (1u64..5).prop_map(|s| SetDescriptor::ProgressionBlocks {
                step: nat(s),
                blocks: BlockRule::factorial(2, 0, 1, 1, false)
            }),
            Just(SetDescriptor::PowerBlocks {}),
            Just(factorial_blocks()),
        ];
        prop_oneof![
            3 => leaf.clone(),
            1 => (leaf.clone(), prop::collection::vec(1u64..3000, 0..8)).prop_filter_map("union", |(a, pts)| {
                SetDescriptor::union(vec![a, SetDescriptor::finite_points(pts.into_iter().map(nat).collect())]).ok()
            }),
            1 => leaf.prop_map(|a| SetDescriptor::masked(a, BlockRule::factorial(2, 0, 1, 1, true)).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn count_matches_brute_force(s in arb_descriptor(), x in 0u64..6000) {
            prop_assert_eq!(s.count(&nat(x)).to_u64().unwrap(), brute(&s, x));
        }

        #[test]
        fn enumeration_consistent_with_count(s in arb_descriptor(), lo in 0u64..3000, len in 0u64..3000) {
            let hi = lo + len;
            let v: Vec<Natural> = s.enumerate_range(&nat(lo), &nat(hi), DEFAULT_BUDGET).unwrap().collect();
            prop_assert_eq!(Natural::from(v.len()), s.count_between(&nat(lo), &nat(hi)));
            prop_assert!(v.windows(2).all(|w| w[0] < w[1]));
            for a in &v {
                prop_assert!(s.contains(a));
                prop_assert_eq!(s.count(a) - s.count(&(a - 1u32)), Natural::one());
            }
        }

        #[test]
        fn count_monotone(s in arb_descriptor(), x in 0u64..100_000, d in 0u64..1000) {
            prop_assert!(s.count(&nat(x)) <= s.count(&nat(x + d)));
        }

        #[test]
        fn union_inclusion_exclusion(a in arb_descriptor(), pts in prop::collection::vec(1u64..2000, 0..10), x in 0u64..2500) {
            let b = SetDescriptor::finite_points(pts.into_iter().map(nat).collect());
            if let Ok(u) = SetDescriptor::union(vec![a.clone(), b.clone()]) {
                let both = (1..=x).filter(|v| a.contains(&nat(*v)) && b.contains(&nat(*v))).count();
                let expected = a.count(&nat(x)) + b.count(&nat(x)) - Natural::from(both);
                prop_assert_eq!(u.count(&nat(x)), expected);
            }
        }
    }
}
