//! Finite-truncation estimators for limit statistics.
//!
//! Every limit is replaced by a [`LimitTrace`]: values at checkpoints, with
//! the liminf/limsup read off the tail (last half of the checkpoints).

mod counting;
mod df;
mod stats;

use num_traits::FromPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

pub use counting::{
    lemma1_check, log_count_trace, ndense_probe, ratio_scan, structural_points, Lemma1Report, NdenseReport,
    NdenseScan,
};
pub use df::{df_envelope, step_df, step_df_counting, window_attaining, Attainment, DFEnvelope, ModelDF};
pub use stats::{
    consecutive_ratio, dispersion_trace, dispersion_trace_runs, index_dilation_ratio, lambda_trace, mean_ratio,
};

use crate::arith::{fmt_rational, ln_natural, Natural, Rational};

/// Default convergence tolerance on the tail window.
pub const DEFAULT_TOL: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub t: Natural,
    pub value: f64,
    pub exact: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Converged { value: f64, tol: f64 },
    Oscillating { inf: f64, sup: f64 },
    Diverging,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitTrace {
    pub checkpoints: Vec<Checkpoint>,
    /// Index of the first tail checkpoint.
    pub tail_start: usize,
    pub inf: f64,
    pub sup: f64,
    pub verdict: Verdict,
}

impl LimitTrace {
    pub fn new(checkpoints: Vec<Checkpoint>, tol: f64) -> Self {
        let n = checkpoints.len();
        let tail_start = n / 2;
        let (inf, sup) = min_max(checkpoints[tail_start..].iter().map(|c| c.value));
        let verdict = if n == 0 {
            Verdict::Oscillating { inf, sup }
        } else if sup - inf < tol {
            Verdict::Converged { value: checkpoints[n - 1].value, tol }
        } else {
            let (_, head_sup) = min_max(checkpoints[..tail_start].iter().map(|c| c.value));
            let quarter = tail_start + (n - tail_start) / 2;
            let (_, late_sup) = min_max(checkpoints[quarter..].iter().map(|c| c.value));
            if sup > 2.0 * head_sup.max(1.0) && late_sup >= sup {
                Verdict::Diverging
            } else {
                Verdict::Oscillating { inf, sup }
            }
        };
        LimitTrace { checkpoints, tail_start, inf, sup, verdict }
    }

    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    pub fn last_value(&self) -> f64 {
        self.last().map_or(f64::NAN, |c| c.value)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.checkpoints.iter().map(|c| c.value)
    }

    pub fn is_converged_to(&self, target: f64, tol: f64) -> bool {
        matches!(self.verdict, Verdict::Converged { .. }) && (self.last_value() - target).abs() <= tol
    }

    /// `{checkpoints: [[t, value, "p/q"?]…], inf, sup, verdict}`.
    pub fn to_json(&self) -> Value {
        let cps: Vec<Value> = self
            .checkpoints
            .iter()
            .map(|c| match &c.exact {
                Some(r) => json!([c.t.to_string(), c.value, fmt_rational(r)]),
                None => json!([c.t.to_string(), c.value]),
            })
            .collect();
        json!({
            "checkpoints": cps,
            "tail_start": self.tail_start,
            "inf": self.inf,
            "sup": self.sup,
            "verdict": self.verdict,
        })
    }
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub(crate) fn checkpoint(t: impl Into<Natural>, exact: Rational) -> Checkpoint {
    Checkpoint { t: t.into(), value: crate::arith::to_f64(&exact), exact: Some(exact) }
}

/// Roughly `points` integers spread geometrically over `[lo, hi]`, both ends
/// included, deduplicated.
pub fn geometric_grid(lo: &Natural, hi: &Natural, points: usize) -> Vec<Natural> {
    let lo = lo.max(&Natural::from(1u32)).clone();
    if hi <= &lo || points < 2 {
        return vec![hi.clone()];
    }
    let (a, b) = (ln_natural(&lo), ln_natural(hi));
    let mut out: Vec<Natural> = (0..points)
        .map(|i| {
            let v = exp_natural(a + (b - a) * i as f64 / (points - 1) as f64);
            v.clamp(lo.clone(), hi.clone())
        })
        .collect();
    out[0] = lo;
    *out.last_mut().unwrap() = hi.clone();
    out.sort();
    out.dedup();
    out
}

/// Indices `1..=n` on a geometric grid (ratio about `1.05`), always ending
/// at `n`.
pub fn geometric_indices(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut x = 1.0f64;
    while (x as usize) < n {
        let i = x as usize;
        if out.last() != Some(&i) {
            out.push(i);
        }
        x *= 1.05;
    }
    if n > 0 {
        out.push(n);
    }
    out
}

/// `e^L` rounded to an integer; relative error about `1e-15` at any size.
pub(crate) fn exp_natural(l: f64) -> Natural {
    if l < 600.0 {
        return Natural::from_f64(l.exp().round()).unwrap_or_default();
    }
    let shift = ((l - 80.0) / std::f64::consts::LN_2).floor();
    let m = (l - shift * std::f64::consts::LN_2).exp();
    Natural::from(m as u128) << (shift as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{factorial, nat};

    fn cp(v: f64) -> Checkpoint {
        Checkpoint { t: nat(0), value: v, exact: None }
    }

    #[test]
    fn verdicts() {
        let t = LimitTrace::new((0..10).map(|i| cp(0.5 + 1e-4 * i as f64)).collect(), DEFAULT_TOL);
        assert!(t.is_converged_to(0.5, 1e-2));
        let t = LimitTrace::new((0..10).map(|i| cp(if i % 2 == 0 { 0.0 } else { 1.0 })).collect(), DEFAULT_TOL);
        assert_eq!(t.verdict, Verdict::Oscillating { inf: 0.0, sup: 1.0 });
        let t = LimitTrace::new((0..20).map(|i| cp(2f64.powi(i))).collect(), DEFAULT_TOL);
        assert_eq!(t.verdict, Verdict::Diverging);
        assert!(t.inf <= t.sup);
    }

    #[test]
    fn grids() {
        let g = geometric_grid(&nat(100), &nat(1_000_000), 5);
        assert_eq!(g, vec![nat(100), nat(1000), nat(10_000), nat(100_000), nat(1_000_000)]);
        let big = geometric_grid(&factorial(100), &factorial(300), 10);
        assert_eq!(big.len(), 10);
        assert!(big.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(geometric_indices(1), vec![1]);
        let idx = geometric_indices(1000);
        assert_eq!(*idx.last().unwrap(), 1000);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exp_natural_is_close() {
        assert_eq!(exp_natural(1.0), Natural::from(3u32));
        for l in [20.0, 80.0, 650.0, 2000.0] {
            let v = exp_natural(l);
            assert!((ln_natural(&v) - l).abs() < 1e-9 * l.max(1.0), "l = {l}");
        }
    }
}
