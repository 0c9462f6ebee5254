use std::ops::RangeInclusive;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::arith::{ceil_rational, nat_ratio, parts, rat, rat_from_nat, to_f64, Natural, Rational};
use crate::error::{Error, Result};
use crate::set::{Prefix, SetDescriptor};

/// `F(A_n, x) = #{i ≤ n : a_i/a_n < x}/n`, with `F(A_n, 1) = 1`.
pub fn step_df(prefix: &Prefix, n: usize, x: &Rational) -> Result<Rational> {
    let an = prefix.get(n)?;
    if x >= &Rational::one() {
        return Ok(Rational::one());
    }
    if !x.is_positive() {
        return Ok(Rational::zero());
    }
    let (num, den) = parts(x);
    let bound = &num * an;
    // a_i/a_n < num/den  ⟺  a_i·den < num·a_n
    let below = prefix.elements()[..n].partition_point(|a| a * &den < bound);
    Ok(rat(below as i64, n as i64))
}

/// `F(A_n, x)` from closed-form counting, for indices far beyond any prefix.
pub fn step_df_counting(set: &SetDescriptor, n: &Natural, x: &Rational) -> Result<Rational> {
    let an = set.nth_element(n)?;
    if x >= &Rational::one() {
        return Ok(Rational::one());
    }
    if !x.is_positive() {
        return Ok(Rational::zero());
    }
    let edge = ceil_rational(&(x * rat_from_nat(&an)));
    let below = if edge.is_zero() { Natural::zero() } else { set.count(&(edge - 1u32)) };
    Ok(nat_ratio(&below, n))
}

/// The two possible singleton distribution functions.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDF {
    /// `0` at `0`, `1` on `(0,1]`.
    C0,
    /// `x^q`.
    Power {
        #[serde(with = "crate::arith::serde_rat")]
        q: Rational,
    },
}

impl ModelDF {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ModelDF::C0 => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ModelDF::Power { q } => x.powf(to_f64(q)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DFEnvelope {
    pub grid: Vec<Rational>,
    pub lower: Vec<Rational>,
    pub upper: Vec<Rational>,
    pub window: (usize, usize),
    /// Mean of `log F / log x` over interior grid points.
    pub q_hat: Option<f64>,
    pub model: Option<ModelDF>,
    pub singleton: bool,
}

impl DFEnvelope {
    pub fn to_json(&self) -> serde_json::Value {
        use crate::arith::fmt_rational;
        let col = |v: &[Rational]| -> Vec<serde_json::Value> {
            v.iter().map(|r| serde_json::json!([fmt_rational(r), to_f64(r)])).collect()
        };
        serde_json::json!({
            "window": [self.window.0, self.window.1],
            "grid": col(&self.grid),
            "lower": col(&self.lower),
            "upper": col(&self.upper),
            "q_hat": self.q_hat,
            "model": self.model,
            "singleton": self.singleton,
        })
    }
}

/// Pointwise min/max of `F(A_n, ·)` over `n` in `window`, with a singleton
/// fit against `c₀` and `x^q`.
pub fn df_envelope(prefix: &Prefix, window: RangeInclusive<usize>, grid: &[Rational], tol: f64) -> Result<DFEnvelope> {
    let (lo, hi) = (*window.start(), *window.end());
    if window.is_empty() || lo == 0 {
        return Err(Error::EmptyWindow);
    }
    prefix.get(hi)?;
    let mut lower = vec![Rational::one(); grid.len()];
    let mut upper = vec![Rational::zero(); grid.len()];
    for n in lo..=hi {
        for (i, x) in grid.iter().enumerate() {
            let v = step_df(prefix, n, x)?;
            if v < lower[i] {
                lower[i] = v.clone();
            }
            if v > upper[i] {
                upper[i] = v;
            }
        }
    }
    let xs: Vec<f64> = grid.iter().map(to_f64).collect();
    let mids: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| (to_f64(l) + to_f64(u)) / 2.0).collect();
    let logs: Vec<f64> = xs
        .iter()
        .zip(&mids)
        .filter(|(x, v)| **x > 0.0 && **x < 1.0 && **v > 0.0 && **v < 1.0)
        .map(|(x, v)| v.ln() / x.ln())
        .collect();
    let q_hat = (!logs.is_empty()).then(|| logs.iter().sum::<f64>() / logs.len() as f64);
    let interior: Vec<usize> = (0..grid.len()).filter(|&i| xs[i] > 0.0 && xs[i] < 1.0).collect();
    let model = if !interior.is_empty() && interior.iter().all(|&i| to_f64(&upper[i]) > 1.0 - tol) {
        Some(ModelDF::C0)
    } else {
        q_hat
            .filter(|q| *q > 0.0 && *q <= 1.0 + tol)
            .map(|q| ModelDF::Power { q: nearest_fraction(q.min(1.0), 12) })
    };
    let fits = model
        .as_ref()
        .is_some_and(|m| xs.iter().zip(&mids).all(|(x, v)| (m.eval(*x) - v).abs() <= tol));
    let tight = lower.iter().zip(&upper).all(|(l, u)| to_f64(&(u - l)) < tol);
    Ok(DFEnvelope { grid: grid.to_vec(), lower, upper, window: (lo, hi), q_hat, singleton: tight && fits, model: model.filter(|_| fits) })
}

/// Closest fraction with denominator at most `max_den`.
fn nearest_fraction(x: f64, max_den: i64) -> Rational {
    let mut best = rat(x.round() as i64, 1);
    let mut err = (x - x.round()).abs();
    for d in 2..=max_den {
        let n = (x * d as f64).round() as i64;
        let e = (x - n as f64 / d as f64).abs();
        if e < err - 1e-12 {
            best = rat(n, d);
            err = e;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attainment {
    pub n: usize,
    pub value: Rational,
    pub residual: Rational,
}

/// The `n` in `window` whose `F(A_n, c)` is closest to `gamma`.
pub fn window_attaining(prefix: &Prefix, c: &Rational, gamma: &Rational, window: RangeInclusive<usize>) -> Result<Attainment> {
    if window.is_empty() || *window.start() == 0 {
        return Err(Error::EmptyWindow);
    }
    prefix.get(*window.end())?;
    let mut best: Option<Attainment> = None;
    for n in window {
        let value = step_df(prefix, n, c)?;
        let residual = (&value - gamma).abs();
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(Attainment { n, value, residual });
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::nat;
    use crate::generators::{factorial_interval_set, naturals, squares};
    use crate::set::DEFAULT_BUDGET;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let n = naturals().take_prefix(10, DEFAULT_BUDGET).unwrap();
        assert_eq!(step_df(&n, 10, &rat(7, 20)).unwrap(), rat(3, 10));
        assert_eq!(step_df(&n, 10, &rat(1, 1)).unwrap(), rat(1, 1));
        let s = squares().take_prefix(4, DEFAULT_BUDGET).unwrap();
        assert_eq!(step_df(&s, 4, &rat(1, 2)).unwrap(), rat(1, 2));
        assert!(step_df(&s, 5, &rat(1, 2)).is_err());
        assert!(step_df(&s, 0, &rat(1, 2)).is_err());
    }

    #[test]
    fn counting_route_matches_prefix() {
        let set = factorial_interval_set(false);
        let p = set.take_prefix(5000, DEFAULT_BUDGET).unwrap();
        for n in [1usize, 7, 100, 101, 1234, 4420, 5000] {
            for x in [rat(1, 4), rat(1, 2), rat(9, 10)] {
                assert_eq!(step_df(&p, n, &x).unwrap(), step_df_counting(&set, &nat(n as u64), &x).unwrap());
            }
        }
    }

    #[test]
    fn squares_envelope_fits_square_root() {
        let p = squares().take_prefix(10_000, DEFAULT_BUDGET).unwrap();
        let grid: Vec<Rational> = (0..=8).map(|i| rat(i, 8)).collect();
        let env = df_envelope(&p, 5000..=10_000, &grid, 0.02).unwrap();
        let quarter = 2;
        assert!(to_f64(&env.lower[quarter]) >= 0.49 && to_f64(&env.upper[quarter]) <= 0.51);
        assert_eq!(env.model, Some(ModelDF::Power { q: rat(1, 2) }));
        assert!(env.singleton);
        assert_eq!(env.lower[8], rat(1, 1));
        assert_eq!(env.upper[8], rat(1, 1));
        let (lo, hi) = (10, 9);
        assert!(df_envelope(&p, lo..=hi, &grid, 0.02).is_err());
    }

    #[test]
    fn factorial_envelope_spreads() {
        let p = factorial_interval_set(false).take_prefix(327_000, DEFAULT_BUDGET).unwrap();
        let grid = vec![rat(1, 2)];
        // the block (8!, 9!] starts at index 4421
        let env = df_envelope(&p, 4300..=327_000, &grid, 0.02).unwrap();
        assert!(to_f64(&env.lower[0]) < 0.15);
        assert!(to_f64(&env.upper[0]) > 0.95);
        assert!(!env.singleton);
        let a = window_attaining(&p, &rat(1, 2), &rat(1, 2), 4300..=327_000).unwrap();
        assert!(to_f64(&a.residual) < 0.05);
    }

    #[test]
    fn attaining_on_naturals() {
        let p = naturals().take_prefix(1000, DEFAULT_BUDGET).unwrap();
        let a = window_attaining(&p, &rat(7, 20), &rat(7, 20), 500..=1000).unwrap();
        assert!(a.residual <= rat(1, 500));
        // outside the envelope the residual is at least the distance to it
        let env = df_envelope(&p, 500..=1000, &[rat(7, 20)], 0.01).unwrap();
        let g = rat(9, 10);
        let a = window_attaining(&p, &rat(7, 20), &g, 500..=1000).unwrap();
        assert!(a.residual >= &g - &env.upper[0]);
    }

    proptest! {
        #[test]
        fn step_df_is_monotone_step_function(n in 1usize..300, xs in prop::collection::vec((0i64..=64, 1i64..=64), 2..8)) {
            let p = squares().take_prefix(300, DEFAULT_BUDGET).unwrap();
            let mut pts: Vec<Rational> = xs.into_iter().map(|(a, b)| rat(a.min(b), b)).collect();
            pts.sort();
            let vals: Vec<Rational> = pts.iter().map(|x| step_df(&p, n, x).unwrap()).collect();
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            for v in &vals {
                prop_assert!((v * rat(n as i64, 1)).is_integer());
            }
            prop_assert_eq!(step_df(&p, n, &rat(0, 1)).unwrap(), rat(0, 1));
            prop_assert_eq!(step_df(&p, n, &rat(1, 1)).unwrap(), rat(1, 1));
        }
    }
}
