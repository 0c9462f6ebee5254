use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{factorial, serde_interval_vec, Natural};
use crate::error::{param, Result};

/// Half-open integer interval `(lo, hi]`.
pub type Interval = (Natural, Natural);

/// Affine factorial index `mul·k + offset`, so block endpoints can be written
/// as `(2k)!`, `(2k+1)!`, `(2k-1)!` and so on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorialIndex {
    pub mul: u32,
    #[serde(default)]
    pub offset: i32,
}

impl FactorialIndex {
    pub const fn new(mul: u32, offset: i32) -> Self {
        FactorialIndex { mul, offset }
    }

    fn at(&self, k: u32) -> i64 {
        self.mul as i64 * k as i64 + self.offset as i64
    }
}

fn one() -> u32 {
    1
}

/// A strictly increasing sequence of disjoint integer intervals.
///
/// Open blocks are `(l_k, r_k]`, closed ones `[l_k, r_k]`. Internally every
/// block is normalised to the half-open form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BlockRule {
    Factorial {
        lo: FactorialIndex,
        hi: FactorialIndex,
        #[serde(default = "one")]
        k_min: u32,
        #[serde(default)]
        closed: bool,
    },
    Explicit {
        #[serde(with = "serde_interval_vec")]
        intervals: Vec<(Natural, Natural)>,
        #[serde(default)]
        closed: bool,
    },
}

impl BlockRule {
    /// Blocks `((mul·k+lo_off)!, (mul·k+hi_off)!]` for `k ≥ k_min`.
    pub fn factorial(mul: u32, lo_off: i32, hi_off: i32, k_min: u32, closed: bool) -> Self {
        BlockRule::Factorial {
            lo: FactorialIndex::new(mul, lo_off),
            hi: FactorialIndex::new(mul, hi_off),
            k_min,
            closed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BlockRule::Factorial { lo, hi, k_min, closed } => {
                if lo.mul == 0 || lo.mul != hi.mul {
                    return Err(param("blocks", "factorial indices need one common positive multiplier"));
                }
                if lo.at(*k_min) < 1 {
                    return Err(param("blocks", "factorial indices must be at least 1"));
                }
                // Both indices are affine in k with the same slope, so the
                // pattern repeats after one step.
                let k = *k_min;
                if lo.at(k) >= hi.at(k) {
                    return Err(param("blocks", "empty factorial block"));
                }
                let next_lo = lo.at(k + 1);
                if hi.at(k) > next_lo || (*closed && hi.at(k) == next_lo) {
                    return Err(param("blocks", "factorial blocks overlap"));
                }
                Ok(())
            }
            BlockRule::Explicit { intervals, closed } => {
                for (l, r) in intervals {
                    if l > r || (!closed && l == r) || (*closed && l.is_zero()) {
                        return Err(param("blocks", format!("bad interval ({l}, {r})")));
                    }
                }
                let norm = self.normalised(intervals.iter().cloned());
                for w in norm.windows(2) {
                    if w[0].1 > w[1].0 {
                        return Err(param("blocks", "explicit blocks must be sorted and disjoint"));
                    }
                }
                Ok(())
            }
        }
    }

    fn closed(&self) -> bool {
        match self {
            BlockRule::Factorial { closed, .. } | BlockRule::Explicit { closed, .. } => *closed,
        }
    }

    fn normalised(&self, it: impl Iterator<Item = (Natural, Natural)>) -> Vec<Interval> {
        let closed = self.closed();
        it.map(|(l, r)| if closed { (l - 1u32, r) } else { (l, r) }).collect()
    }

    /// Half-open blocks `(lo, hi]` in increasing order, stopping at the first
    /// block whose lower end is at or beyond `x`.
    pub fn blocks_upto(&self, x: &Natural) -> Vec<Interval> {
        match self {
            BlockRule::Factorial { lo, hi, k_min, closed } => {
                let mut out = Vec::new();
                let mut k = *k_min;
                loop {
                    let l = factorial(lo.at(k) as u32);
                    let l = if *closed { l - 1u32 } else { l };
                    if &l >= x {
                        break;
                    }
                    out.push((l, factorial(hi.at(k) as u32)));
                    k += 1;
                }
                out
            }
            BlockRule::Explicit { intervals, .. } => self
                .normalised(intervals.iter().cloned())
                .into_iter()
                .take_while(|(l, _)| l < x)
                .collect(),
        }
    }

    /// Index `k` of the block containing `x`, counted from the first block.
    pub fn block_of(&self, x: &Natural) -> Option<usize> {
        self.blocks_upto(x).iter().position(|(l, r)| l < x && x <= r)
    }

    pub fn contains(&self, x: &Natural) -> bool {
        self.block_of(x).is_some()
    }

    pub fn upper_bound(&self) -> Option<Natural> {
        match self {
            BlockRule::Factorial { .. } => None,
            BlockRule::Explicit { intervals, .. } => Some(intervals.last().map(|b| b.1.clone()).unwrap_or_default()),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, BlockRule::Explicit { intervals, .. } if intervals.is_empty())
    }
}

/// Merges overlapping or touching half-open intervals.
pub fn merge(mut v: Vec<Interval>) -> Vec<Interval> {
    v.retain(|(l, r)| l < r);
    v.sort();
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for (l, r) in v {
        match out.last_mut() {
            Some(last) if l <= last.1 => {
                if r > last.1 {
                    last.1 = r;
                }
            }
            _ => out.push((l, r)),
        }
    }
    out
}

/// Intersection of two sorted lists of disjoint half-open intervals.
pub fn intersect(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = (&a[i].0).max(&b[j].0);
        let hi = (&a[i].1).min(&b[j].1);
        if lo < hi {
            out.push((lo.clone(), hi.clone()));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

pub(crate) fn clip(v: Vec<Interval>, x: &Natural) -> Vec<Interval> {
    v.into_iter()
        .filter_map(|(l, r)| {
            let r = if &r > x { x.clone() } else { r };
            (l < r).then_some((l, r))
        })
        .collect()
}

pub(crate) fn point_interval(p: &Natural) -> Interval {
    debug_assert!(!p.is_zero());
    (p - Natural::one(), p.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::nat;

    #[test]
    fn factorial_blocks_up_to_720() {
        let rule = BlockRule::factorial(2, 0, 1, 1, false);
        rule.validate().unwrap();
        assert_eq!(
            rule.blocks_upto(&nat(720)),
            vec![(nat(2), nat(6)), (nat(24), nat(120))]
        );
        assert!(rule.contains(&nat(3)));
        assert!(!rule.contains(&nat(2)));
        assert!(!rule.contains(&nat(24)));
        assert!(rule.contains(&nat(120)));
    }

    #[test]
    fn closed_blocks_include_left_end() {
        let rule = BlockRule::factorial(2, 0, 1, 1, true);
        rule.validate().unwrap();
        assert!(rule.contains(&nat(2)));
        assert!(rule.contains(&nat(24)));
        assert!(!rule.contains(&nat(7)));
    }

    #[test]
    fn overlapping_rules_are_rejected() {
        assert!(BlockRule::factorial(1, 0, 1, 1, true).validate().is_err());
        assert!(BlockRule::factorial(1, 0, 1, 1, false).validate().is_ok());
        assert!(BlockRule::factorial(2, 0, 3, 1, false).validate().is_err());
        let bad = BlockRule::Explicit { intervals: vec![(nat(1), nat(5)), (nat(3), nat(9))], closed: false };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn interval_algebra() {
        let a = vec![(nat(0), nat(5)), (nat(10), nat(20))];
        let b = vec![(nat(3), nat(12)), (nat(19), nat(30))];
        assert_eq!(
            intersect(&a, &b),
            vec![(nat(3), nat(5)), (nat(10), nat(12)), (nat(19), nat(20))]
        );
        assert_eq!(
            merge(vec![(nat(3), nat(5)), (nat(0), nat(3)), (nat(7), nat(8))]),
            vec![(nat(0), nat(5)), (nat(7), nat(8))]
        );
    }
}
