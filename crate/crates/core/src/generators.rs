//! Constructors for the concrete set families.

use std::collections::{BTreeMap, HashSet};

use num_traits::{One, Pow, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{
    ceil_pow_rational, ceil_rational, ceil_root_ratio, factorial, floor_pow, floor_rational, iroot_floor, nat,
    parse_natural, parse_rational, rat, rat_from_nat, small_parts, Natural, Rational,
};
use crate::error::{param, Error, Result};
use crate::set::{BlockRule, SetDescriptor};

/// `{⌈j^{1/q}⌉ : j ≥ 1}`; `count(x) = ⌊x^q⌋`.
pub fn power_sequence(q: Rational) -> Result<SetDescriptor> {
    if q <= Rational::zero() || q > Rational::one() {
        return Err(param("q", "exponent must lie in (0,1]"));
    }
    SetDescriptor::power_root(q)
}

pub fn naturals() -> SetDescriptor {
    power_sequence(Rational::one()).unwrap()
}

pub fn squares() -> SetDescriptor {
    power_sequence(rat(1, 2)).unwrap()
}

/// `{⌈base^j⌉ : j ≥ 1}`.
pub fn geometric_sequence(base: Rational) -> Result<SetDescriptor> {
    SetDescriptor::geometric(Natural::one(), base, 1, None, None)
}

pub fn powers_of_two() -> SetDescriptor {
    geometric_sequence(rat(2, 1)).unwrap()
}

/// `⋃ ((2k)!, (2k+1)!]`, or the closed blocks `[(2k)!, (2k+1)!]`.
pub fn factorial_interval_set(closed: bool) -> SetDescriptor {
    SetDescriptor::IntervalBlocks { blocks: BlockRule::factorial(2, 0, 1, 1, closed) }
}

/// All integers in `((2k-1)!, (2k)!]` together with the even integers in
/// `((2k)!, (2k+1)!]`.
pub fn mixed_progression_set() -> SetDescriptor {
    SetDescriptor::union(vec![
        SetDescriptor::IntervalBlocks { blocks: BlockRule::factorial(2, -1, 0, 1, false) },
        SetDescriptor::ProgressionBlocks { step: nat(2), blocks: BlockRule::factorial(2, 0, 1, 1, false) },
    ])
    .expect("blocks interleave")
}

/// `⋃ₙ {jⁿ : n^{n-1} ≤ j ≤ (n+1)^{n+1}}`.
pub fn ndense_zero_lambda_set() -> SetDescriptor {
    SetDescriptor::PowerBlocks {}
}

/// Restricts `inner` to `⋃ [(2k)!, (2k+1)!]`.
pub fn masked_set(inner: SetDescriptor) -> Result<SetDescriptor> {
    SetDescriptor::masked(inner, BlockRule::factorial(2, 0, 1, 1, true))
}

/// The six families used for cross-checks of counting, probes and traces.
pub fn fixtures() -> Vec<(&'static str, SetDescriptor)> {
    vec![
        ("naturals", naturals()),
        ("squares", squares()),
        ("powers_of_two", powers_of_two()),
        ("factorial_interval", factorial_interval_set(false)),
        ("mixed_progression", mixed_progression_set()),
        ("ndense_zero_lambda", ndense_zero_lambda_set()),
    ]
}

// ---- two-exponent construction ----------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ExponentRule {
    /// `p_k = p` for every `k`.
    Constant,
    /// `p_1, p_2, …`; the last value repeats.
    Explicit {
        #[serde(with = "crate::arith::serde_rat_vec")]
        values: Vec<Rational>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BoundaryRule {
    /// `b_{k+1}` is the least integer above `b_k^{q/p̃}·k` with
    /// `p̃ = p_{⌈k/2⌉}`.
    Default {
        #[serde(with = "crate::arith::serde_nat")]
        b1: Natural,
    },
    Explicit {
        #[serde(with = "crate::arith::serde_nat_vec")]
        values: Vec<Natural>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NolimParams {
    #[serde(with = "crate::arith::serde_rat")]
    pub p: Rational,
    #[serde(with = "crate::arith::serde_rat")]
    pub q: Rational,
    pub p_seq: ExponentRule,
    pub b_seq: BoundaryRule,
    /// Number of boundaries `b_1..b_m` generated (with the default rule).
    pub count: usize,
}

impl NolimParams {
    pub fn new(p: Rational, q: Rational, b1: Natural, count: usize) -> Self {
        NolimParams { p, q, p_seq: ExponentRule::Constant, b_seq: BoundaryRule::Default { b1 }, count }
    }

    /// `p_k`, 1-based.
    pub fn p_k(&self, k: usize) -> Rational {
        match &self.p_seq {
            ExponentRule::Constant => self.p.clone(),
            ExponentRule::Explicit { values } => values[(k - 1).min(values.len() - 1)].clone(),
        }
    }

    /// `b_1, …, b_m`.
    pub fn boundaries(&self) -> Result<Vec<Natural>> {
        match &self.b_seq {
            BoundaryRule::Explicit { values } => Ok(values.clone()),
            BoundaryRule::Default { b1 } => {
                let (a, bq) = small_parts(&self.q, "q")?;
                let mut b = vec![b1.clone()];
                for k in 1..self.count {
                    let pt = self.p_k(k.div_ceil(2));
                    if pt.is_zero() {
                        return Err(param("p_seq", "the default boundary rule needs p_k > 0"));
                    }
                    let (c, d) = small_parts(&pt, "p_seq")?;
                    // ⌊b^{q/p̃}·k⌋ + 1 = ⌊(b^{a·d}·k^{bq·c})^{1/(bq·c)}⌋ + 1
                    let root = bq * c;
                    let inner = Pow::pow(&b[k - 1], a * d) * Pow::pow(&nat(k as u64), root);
                    b.push(iroot_floor(&inner, root) + 1u32);
                }
                Ok(b)
            }
        }
    }

    /// Checks the admissibility conditions on the generated range, in log
    /// space; the error names the first failing `k`.
    pub fn check(&self) -> Result<Vec<Natural>> {
        if self.p < Rational::zero() || self.q <= Rational::zero() || self.q > Rational::one() || self.p >= self.q {
            return Err(param("p,q", "need 0 ≤ p < q ≤ 1"));
        }
        if let ExponentRule::Explicit { values } = &self.p_seq {
            if values.is_empty() {
                return Err(param("p_seq", "empty"));
            }
            for (i, w) in values.windows(2).enumerate() {
                if w[1] > w[0] {
                    return Err(Error::Invariant { k: i + 2, detail: "p_k must be non-increasing".into() });
                }
            }
            if let Some(i) = values.iter().position(|v| v < &self.p || v.is_zero()) {
                return Err(Error::Invariant { k: i + 1, detail: "p_k must be positive and at least p".into() });
            }
        }
        let b = self.boundaries()?;
        if b.len() < 2 {
            return Err(param("count", "need at least two boundaries"));
        }
        for (i, w) in b.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::Invariant { k: i + 1, detail: "b_k must be strictly increasing".into() });
            }
        }
        if b[0].is_zero() {
            return Err(param("b1", "must be positive"));
        }
        let q = crate::arith::to_f64(&self.q);
        let ln = |x: &Natural| crate::arith::ln_natural(x);
        if !self.p.is_zero() && q * ln(&b[0]) >= crate::arith::to_f64(&self.p) * ln(&b[1]) {
            return Err(Error::Invariant { k: 1, detail: "b_1^q < b_2^p fails".into() });
        }
        // log of b_k^q / b_{k+1}^{p_{⌈k/2⌉}} must decrease
        let mut prev = f64::INFINITY;
        for k in 1..b.len() {
            let pt = crate::arith::to_f64(&self.p_k(k.div_ceil(2)));
            let r = q * ln(&b[k - 1]) - pt * ln(&b[k]);
            if r >= prev {
                return Err(Error::Invariant { k, detail: "b_k^q / b_{k+1}^{p_⌈k/2⌉} is not decreasing".into() });
            }
            prev = r;
        }
        Ok(b)
    }
}

/// `A = ⋃ A_k` with `A_{2k-1}` the `⌈j^{1/p_k}⌉` in `(b_{2k-1}, b_{2k}]` and
/// `A_{2k}` the `⌈j^{1/q}⌉` in `(b_{2k}, b_{2k+1}]`. With `p = 0` the odd
/// pieces are empty.
pub fn nolim_set(params: &NolimParams) -> Result<SetDescriptor> {
    let b = params.check()?;
    let mut parts = Vec::new();
    for i in 1..b.len() {
        let (lo, hi) = (&b[i - 1], &b[i]);
        let exponent = if i % 2 == 1 {
            if params.p.is_zero() {
                continue;
            }
            params.p_k(i.div_ceil(2))
        } else {
            params.q.clone()
        };
        parts.push(SetDescriptor::power_root_between(exponent, lo, hi)?);
    }
    SetDescriptor::union(parts)
}

// ---- prescribed dispersion --------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TupleRule {
    /// For block `n`, the lexicographically least unused admissible tuple
    /// among fractions of denominator at most `D`, for the least `D` that
    /// offers one.
    Default,
    Explicit {
        tuples: Vec<TupleValues>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TupleValues(#[serde(with = "crate::arith::serde_rat_vec")] pub Vec<Rational>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionParams {
    pub k: usize,
    #[serde(with = "crate::arith::serde_rat")]
    pub d: Rational,
    #[serde(with = "crate::arith::serde_rat")]
    pub lambda: Rational,
    pub n_max: u32,
    pub tuples: TupleRule,
}

impl DispersionParams {
    pub fn new(k: usize, d: Rational, lambda: Rational, n_max: u32) -> Self {
        DispersionParams { k, d, lambda, n_max, tuples: TupleRule::Default }
    }

    fn check(&self) -> Result<()> {
        if self.k == 0 {
            return Err(param("k", "must be at least 1"));
        }
        if self.d <= Rational::zero() || self.d > rat(1, self.k as i64) {
            return Err(param("d", format!("must lie in (0, 1/{}]", self.k)));
        }
        if self.lambda < Rational::zero() || self.lambda > Rational::one() {
            return Err(param("lambda", "must lie in [0,1]"));
        }
        if self.n_max == 0 {
            return Err(param("n_max", "must be at least 1"));
        }
        Ok(())
    }

    /// `(q_1^{(n)}, …, q_{k-1}^{(n)})` for `n = 1..=n_max`.
    pub fn tuples(&self) -> Result<Vec<Vec<Rational>>> {
        let width = self.k - 1;
        let out = match &self.tuples {
            TupleRule::Explicit { tuples } => {
                if tuples.len() < self.n_max as usize {
                    return Err(param("tuples", format!("need {} tuples", self.n_max)));
                }
                tuples.iter().take(self.n_max as usize).map(|t| t.0.clone()).collect()
            }
            TupleRule::Default => {
                let mut used = HashSet::new();
                let mut out = Vec::new();
                for n in 1..=self.n_max {
                    let t = default_tuple(n, width, &used);
                    used.insert(t.clone());
                    out.push(t);
                }
                out
            }
        };
        for (i, t) in out.iter().enumerate() {
            let n = i as u32 + 1;
            if t.len() != width {
                return Err(Error::Invariant { k: i + 1, detail: format!("tuple needs {width} coordinates") });
            }
            if !tuple_admissible(n, t) {
                return Err(Error::Invariant { k: i + 1, detail: "tuple is not admissible for its block".into() });
            }
        }
        Ok(out)
    }
}

/// `(4n-1)!·q_l` integral and at least `(4n-2)!`, coordinates strictly
/// increasing inside `(0,1)`.
pub fn tuple_admissible(n: u32, t: &[Rational]) -> bool {
    let f = rat_from_nat(&factorial(4 * n - 1));
    let floor = rat_from_nat(&factorial(4 * n - 2));
    let increasing = t.windows(2).all(|w| w[0] < w[1]);
    increasing
        && t.iter().all(|q| {
            let v = q * &f;
            q < &Rational::one() && v.is_integer() && v >= floor
        })
}

fn default_tuple(n: u32, width: usize, used: &HashSet<Vec<Rational>>) -> Vec<Rational> {
    if width == 0 {
        return Vec::new();
    }
    for den in 2i64.. {
        let mut grid: Vec<Rational> = (2..=den)
            .flat_map(|b| (1..b).map(move |a| rat(a, b)))
            .collect();
        grid.sort();
        grid.dedup();
        let mut idx: Vec<usize> = (0..width).collect();
        if grid.len() < width {
            continue;
        }
        loop {
            let t: Vec<Rational> = idx.iter().map(|&i| grid[i].clone()).collect();
            if !used.contains(&t) && tuple_admissible(n, &t) {
                return t;
            }
            // next combination in lexicographic order
            let mut i = width;
            while i > 0 && idx[i - 1] == grid.len() - width + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..width {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    unreachable!()
}

/// Set with prescribed dispersion `d` and counting exponent `λ`.
///
/// For `k ≥ 2` this is `⋃_{n ≤ n_max} (B_n ∪ C_n ∪ D_n)`; for `k = 1` the
/// one-dimensional variant.
pub fn dispersion_set(params: &DispersionParams) -> Result<SetDescriptor> {
    params.check()?;
    if params.k == 1 {
        return dispersion_set_k1(params);
    }
    let tuples = params.tuples()?;
    let d = &params.d;
    let mut parts = Vec::new();
    for n in 1..=params.n_max {
        let f3 = rat_from_nat(&factorial(4 * n - 3));
        let f1 = factorial(4 * n - 1);
        if !params.lambda.is_zero() {
            let lo = rat_from_nat(&factorial(4 * n - 4)).max(d * &f3);
            let hi = d * rat(2, 1) / (rat(2, 1) - d) * &f3;
            let (lo, hi) = (floor_rational(&lo), floor_rational(&hi));
            if lo < hi {
                parts.push(SetDescriptor::power_root_between(params.lambda.clone(), &lo, &hi)?);
            }
        }
        let mut c: Vec<Natural> = tuples[n as usize - 1]
            .iter()
            .map(|q| floor_rational(&(q * rat_from_nat(&f1))))
            .collect();
        c.push(f1.clone());
        parts.push(SetDescriptor::finite_points(c));
        if !d.is_one() {
            let ratio = Rational::one() / (Rational::one() - d);
            parts.push(SetDescriptor::geometric(f1, ratio, 1, None, Some(factorial(4 * n)))?);
        }
    }
    SetDescriptor::union(parts)
}

fn dispersion_set_k1(params: &DispersionParams) -> Result<SetDescriptor> {
    let d = &params.d;
    let lambda = &params.lambda;
    if lambda.is_zero() {
        return if d.is_one() {
            Ok(SetDescriptor::finite_points((1..=params.n_max).map(factorial).collect()))
        } else {
            geometric_sequence(Rational::one() / (Rational::one() - d))
        };
    }
    let (a, b) = small_parts(lambda, "lambda")?;
    let mut parts = Vec::new();
    for n in 1..=params.n_max {
        let f = factorial(n);
        let nn = nat(n as u64);
        // ⌈d_n·n!⌉ and the least j ≥ (d_n·n!)^λ
        let (first, j_min) = if d.is_one() {
            // d_n = (1-1/n)^{1/λ}: N^a ≥ ((n-1)/n)^b·(n!)^a, j^b ≥ ((n-1)/n)^b·(n!)^a
            let u = Pow::pow(&(&nn - 1u32), b) * Pow::pow(&f, a);
            let v = Pow::pow(&nn, b);
            (ceil_root_ratio(&u, &v, a), ceil_root_ratio(&u, &v, b))
        } else {
            let x = d * rat_from_nat(&f);
            (ceil_rational(&x), ceil_pow_rational(&x, a, b))
        };
        let j_max = floor_pow(&f, a, b);
        let mut pts = vec![f];
        if !first.is_zero() {
            pts.push(first);
        }
        parts.push(SetDescriptor::finite_points(pts));
        let j_min = j_min.max(Natural::one());
        if j_min <= j_max {
            parts.push(SetDescriptor::PowerRoot { q: lambda.clone(), j_min, j_max: Some(j_max) }.validated()?);
        }
    }
    SetDescriptor::union(parts)
}

// ---- named construction -------------------------------------------------

/// Family names accepted by [`from_params`].
pub const FAMILIES: &[&str] = &[
    "power",
    "naturals",
    "squares",
    "geometric",
    "powers_of_two",
    "factorial_interval",
    "mixed_progression",
    "nolim",
    "dispersion",
    "ndense_zero_lambda",
    "masked_power",
];

/// Builds a family from `key=value` parameters as given on the command line.
pub fn from_params(family: &str, params: &BTreeMap<String, String>) -> Result<SetDescriptor> {
    let get = |k: &str| params.get(k).map(String::as_str);
    let rational = |k: &'static str, default: Option<&str>| -> Result<Rational> {
        get(k).or(default).ok_or_else(|| param(k, "missing")).and_then(parse_rational)
    };
    let natural = |k: &'static str, default: &str| parse_natural(get(k).unwrap_or(default));
    let int = |k: &'static str, default: &str| -> Result<u32> {
        get(k)
            .unwrap_or(default)
            .parse()
            .map_err(|_| param(k, "expected a small integer"))
    };
    match family {
        "power" => power_sequence(rational("q", None)?),
        "naturals" => Ok(naturals()),
        "squares" => Ok(squares()),
        "geometric" => geometric_sequence(rational("ratio", None)?),
        "powers_of_two" => Ok(powers_of_two()),
        "factorial_interval" => Ok(factorial_interval_set(get("closed") == Some("true"))),
        "mixed_progression" => Ok(mixed_progression_set()),
        "nolim" => {
            let p = NolimParams::new(
                rational("p", Some("1/2"))?,
                rational("q", Some("7/10"))?,
                natural("b1", "2")?,
                int("count", "16")? as usize,
            );
            nolim_set(&p)
        }
        "dispersion" => dispersion_set(&DispersionParams::new(
            int("k", "2")? as usize,
            rational("d", Some("1/4"))?,
            rational("lambda", Some("1/2"))?,
            int("n_max", "5")?,
        )),
        "ndense_zero_lambda" => Ok(ndense_zero_lambda_set()),
        "masked_power" => masked_set(power_sequence(rational("q", Some("1"))?)?),
        other => Err(param("family", format!("unknown family `{other}`; known: {}", FAMILIES.join(", ")))),
    }
}
