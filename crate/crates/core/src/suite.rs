//! Named numeric checks replayed into a versioned report.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    consecutive_ratio, dispersion_trace, index_dilation_ratio, lambda_trace, lemma1_check, log_count_trace,
    mean_ratio, ndense_probe, ratio_scan, step_df, LimitTrace, DEFAULT_TOL,
};
use crate::arith::{parse_natural, parse_rational, to_f64, Natural, Rational};
use crate::error::{param, Error, Result};
use crate::generators::from_params;
use crate::ratiogeom::{coverage_scan, homeomorphism_check};
use crate::set::{default_budget, SetDescriptor};

pub const SCHEMA: &str = "ratioblock-report/1";

/// Anchors a check may cite: short names for the facts the checks replay.
pub const ANCHORS: &[(&str, &str)] = &[
    ("mean-ratio", "regular sequence with exponent q: mean of x_i/x_n tends to q/(q+1)"),
    ("regular-variation", "A(ct)/A(t) tends to c^q for a regular sequence"),
    ("convergence-exponent", "exponent of convergence as limsup log n / log a_n"),
    ("index-dilation", "x_{kn}/x_n tends to k^{1/q}"),
    ("oscillating-ratio", "A(ct)/A(t) oscillates between (c+1)/2 and 2c-1 on the mixed progression set"),
    ("envelope-extremes", "liminf 0 and limsup 1 of the step distribution function on factorial intervals"),
    ("restricted-sup", "sup and inf of A(ct)/A(t) are attained along t = a_n/c"),
    ("direction-ratio-maps", "F, G are mutually inverse and H_j is an involution"),
    ("ndense-growth", "A(ct) > A(t) for all large t"),
    ("consecutive-ratio", "a_{n+1}/a_n tends to 1"),
    ("dispersion", "dispersion of a set: liminf of the largest gap over a_n"),
    ("dispersion-bound", "dense R^k forces dispersion at most 1/k"),
    ("step-df", "step distribution function of the ratio blocks"),
    ("log-count", "log A(t)/log t"),
];

pub fn anchor_known(a: &str) -> bool {
    ANCHORS.iter().any(|(k, _)| *k == a)
}

/// Number given either as a JSON number or as an exact `"p/q"` string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Float(f64),
    Text(String),
}

impl Num {
    pub fn value(&self) -> Result<f64> {
        match self {
            Num::Float(v) => Ok(*v),
            Num::Text(s) => Ok(to_f64(&parse_rational(s)?)),
        }
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num::Float(v)
    }
}

impl From<&str> for Num {
    fn from(s: &str) -> Self {
        Num::Text(s.to_string())
    }
}

/// Which number a trace reduces to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduce {
    #[default]
    Last,
    Inf,
    Sup,
}

impl Reduce {
    fn apply(self, t: &LimitTrace) -> f64 {
        match self {
            Reduce::Last => t.last_value(),
            Reduce::Inf => t.inf,
            Reduce::Sup => t.sup,
        }
    }
}

/// The statistic a check computes. Integers and rationals are strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stat", rename_all = "snake_case")]
pub enum StatSpec {
    MeanRatio { n: usize, #[serde(default)] reduce: Reduce },
    Lambda { n: usize, #[serde(default)] reduce: Reduce },
    Dispersion { n: usize, #[serde(default)] reduce: Reduce },
    ConsecutiveRatio { n: usize, #[serde(default)] reduce: Reduce },
    IndexDilation { n: usize, k: usize, #[serde(default)] reduce: Reduce },
    StepDf { n: usize, x: String },
    /// `A(⌊ct⌋)/A(t)` at the given checkpoints.
    RatioScan { c: String, t: Vec<String>, #[serde(default)] reduce: Reduce },
    LogCount { t: Vec<String>, #[serde(default)] reduce: Reduce },
    /// Larger of the sup and inf differences.
    Lemma1 { c: String, lo: String, hi: String, #[serde(default = "default_points")] points: usize },
    /// Number of violations in the tail of the window.
    NdenseViolations { c: String, lo: String, hi: String },
    /// `k = 2` hit fraction.
    Coverage { bound: String, m: u32 },
    /// Largest round-trip error of `F∘G` and `G∘F`.
    Homeomorphism { k: usize, samples: usize, #[serde(default)] seed: u64 },
}

fn default_points() -> usize {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub name: String,
    /// Generator family name, see [`crate::generators::FAMILIES`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    /// Inline descriptor, used instead of `family`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<SetDescriptor>,
    #[serde(flatten)]
    pub stat: StatSpec,
    pub expected: Num,
    pub tolerance: f64,
    pub anchor: String,
    /// Where the expected value comes from: `analytic`, `derived` or `trivial`.
    #[serde(default = "default_provenance")]
    pub provenance: String,
}

fn default_provenance() -> String {
    "derived".into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub name: String,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

impl SuiteSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: SuiteSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for c in &self.checks {
            if !names.insert(&c.name) {
                return Err(Error::Parse(format!("duplicate check name `{}`", c.name)));
            }
            if c.tolerance.is_nan() || c.tolerance <= 0.0 {
                return Err(Error::Parse(format!("check `{}`: tolerance must be positive", c.name)));
            }
            if c.anchor.is_empty() {
                return Err(Error::Parse(format!("check `{}`: missing anchor", c.name)));
            }
            if c.family.is_some() == c.descriptor.is_some() && !matches!(c.stat, StatSpec::Homeomorphism { .. }) {
                return Err(Error::Parse(format!("check `{}`: give exactly one of family or descriptor", c.name)));
            }
            c.expected.value()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub computed: Option<f64>,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub anchor: String,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub suite: String,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckResult>,
    /// Seconds per check. Kept apart so the rest is reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            _ => Err(param("format", "expected json, csv or text")),
        }
    }
}

fn nat(s: &str) -> Result<Natural> {
    parse_natural(s)
}

fn ratio(s: &str) -> Result<Rational> {
    parse_rational(s)
}

fn build_set(c: &CheckSpec) -> Result<SetDescriptor> {
    match (&c.family, &c.descriptor) {
        (Some(f), None) => from_params(f, &c.params),
        (None, Some(d)) => d.clone().validated(),
        _ => Err(Error::Parse(format!("check `{}`: give exactly one of family or descriptor", c.name))),
    }
}

/// Computes the statistic of one check.
pub fn evaluate(c: &CheckSpec, budget: u64) -> Result<f64> {
    if let StatSpec::Homeomorphism { k, samples, seed } = &c.stat {
        let r = homeomorphism_check(*k, *samples, 0, *seed)?;
        return Ok(r.max_fg_error.max(r.max_gf_error));
    }
    let set = build_set(c)?;
    let tol = DEFAULT_TOL;
    let points = |t: &[String]| t.iter().map(|s| nat(s)).collect::<Result<Vec<_>>>();
    Ok(match &c.stat {
        StatSpec::MeanRatio { n, reduce } => reduce.apply(&mean_ratio(&set.take_prefix(*n, budget)?, tol)),
        StatSpec::Lambda { n, reduce } => reduce.apply(&lambda_trace(&set.take_prefix(*n, budget)?, tol)),
        StatSpec::Dispersion { n, reduce } => reduce.apply(&dispersion_trace(&set.take_prefix(*n, budget)?, tol)),
        StatSpec::ConsecutiveRatio { n, reduce } => {
            reduce.apply(&consecutive_ratio(&set.take_prefix(*n, budget)?, tol))
        }
        StatSpec::IndexDilation { n, k, reduce } => {
            reduce.apply(&index_dilation_ratio(&set.take_prefix(*n, budget)?, *k, tol)?)
        }
        StatSpec::StepDf { n, x } => to_f64(&step_df(&set.take_prefix(*n, budget)?, *n, &ratio(x)?)?),
        StatSpec::RatioScan { c, t, reduce } => reduce.apply(&ratio_scan(&set, &ratio(c)?, &points(t)?, tol)?),
        StatSpec::LogCount { t, reduce } => reduce.apply(&log_count_trace(&set, &points(t)?, tol)?),
        StatSpec::Lemma1 { c, lo, hi, points } => {
            let r = lemma1_check(&set, &ratio(c)?, &nat(lo)?, &nat(hi)?, *points)?;
            r.sup_diff.max(r.inf_diff)
        }
        StatSpec::NdenseViolations { c, lo, hi } => {
            let r = ndense_probe(&set, &[ratio(c)?], &nat(lo)?, &nat(hi)?, budget)?;
            to_f64(&crate::arith::rat_from_nat(&r.scans[0].tail_violations))
        }
        StatSpec::Coverage { bound, m } => coverage_scan(&set, &nat(bound)?, *m, budget)?.fraction,
        StatSpec::Homeomorphism { .. } => unreachable!(),
    })
}

/// Runs every check (concurrently) and assembles the report in spec order.
/// Failures inside a check, budget overruns included, fail that check only.
pub fn run_suite(spec: &SuiteSpec, budget: u64) -> Result<Report> {
    spec.validate()?;
    let results: Vec<(CheckResult, f64)> = spec
        .checks
        .par_iter()
        .map(|c| {
            let start = Instant::now();
            let expected = c.expected.value().unwrap_or(f64::NAN);
            let out = evaluate(c, budget);
            let (computed, pass, error) = match out {
                Ok(v) => (Some(v), (v - expected).abs() <= c.tolerance, None),
                Err(e) => (None, false, Some(e.to_string())),
            };
            let result = CheckResult {
                name: c.name.clone(),
                computed: computed.filter(|v| v.is_finite()),
                expected,
                tolerance: c.tolerance,
                pass,
                anchor: c.anchor.clone(),
                provenance: c.provenance.clone(),
                error,
            };
            (result, start.elapsed().as_secs_f64())
        })
        .collect();
    let timing = results.iter().map(|(r, t)| (r.name.clone(), *t)).collect();
    let checks: Vec<CheckResult> = results.into_iter().map(|(r, _)| r).collect();
    let passed = checks.iter().filter(|c| c.pass).count();
    Ok(Report {
        schema: SCHEMA.into(),
        suite: spec.name.clone(),
        failed: checks.len() - passed,
        passed,
        checks,
        timing: Some(timing),
    })
}

/// Writes the report. Timing is only included in JSON, and only when
/// `timing` is set.
pub fn emit<W: Write>(report: &Report, format: Format, timing: bool, mut w: W) -> Result<()> {
    match format {
        Format::Json => {
            let mut r = report.clone();
            if !timing {
                r.timing = None;
            }
            serde_json::to_writer_pretty(&mut w, &r)?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(w, "name,computed,expected,tolerance,pass")?;
            for c in &report.checks {
                let computed = c.computed.map(|v| v.to_string()).unwrap_or_default();
                writeln!(w, "{},{},{},{},{}", csv_field(&c.name), computed, c.expected, c.tolerance, c.pass)?;
            }
        }
        Format::Text => {
            for c in &report.checks {
                let mark = if c.pass { '✓' } else { '✗' };
                let computed = match (&c.computed, &c.error) {
                    (_, Some(e)) => format!("error: {e}"),
                    (Some(v), None) => format!("{v:.6}"),
                    (None, None) => "n/a".into(),
                };
                writeln!(w, "{mark} {}  computed={computed} expected={:.6} tol={:e}", c.name, c.expected, c.tolerance)?;
            }
            writeln!(w, "{} passed, {} failed", report.passed, report.failed)?;
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn check(name: &str, family: &str, stat: StatSpec, expected: Num, tolerance: f64, anchor: &str, provenance: &str) -> CheckSpec {
    CheckSpec {
        name: name.into(),
        family: Some(family.into()),
        params: BTreeMap::new(),
        descriptor: None,
        stat,
        expected,
        tolerance,
        anchor: anchor.into(),
        provenance: provenance.into(),
    }
}

/// The built-in suite; every check passes on a correct build.
pub fn builtin_suite() -> SuiteSpec {
    let s = |v: &str| v.to_string();
    let fact = |n: u32| crate::arith::factorial(n).to_string();
    let mut power_half = check(
        "power-1/2-mean-ratio",
        "power",
        StatSpec::MeanRatio { n: 200_000, reduce: Reduce::Last },
        "1/3".into(),
        5e-3,
        "mean-ratio",
        "analytic",
    );
    power_half.params.insert(s("q"), s("1/2"));
    let checks = vec![
        power_half,
        check(
            "naturals-mean-ratio",
            "naturals",
            StatSpec::MeanRatio { n: 100_000, reduce: Reduce::Last },
            "1/2".into(),
            1e-3,
            "mean-ratio",
            "trivial",
        ),
        check(
            "squares-ratio-scan-c2",
            "squares",
            StatSpec::RatioScan { c: s("2"), t: vec![s("10^8"), s("10^9"), s("10^10")], reduce: Reduce::Last },
            Num::Float(std::f64::consts::SQRT_2),
            1e-3,
            "regular-variation",
            "analytic",
        ),
        check(
            "squares-lambda",
            "squares",
            StatSpec::Lambda { n: 100_000, reduce: Reduce::Sup },
            "1/2".into(),
            1e-9,
            "convergence-exponent",
            "trivial",
        ),
        check(
            "squares-index-dilation-k4",
            "squares",
            StatSpec::IndexDilation { n: 40_000, k: 4, reduce: Reduce::Last },
            Num::Float(16.0),
            1e-9,
            "index-dilation",
            "analytic",
        ),
        check(
            "squares-step-df-quarter",
            "squares",
            StatSpec::StepDf { n: 10_000, x: s("1/4") },
            "1/2".into(),
            1e-2,
            "step-df",
            "derived",
        ),
        check(
            "mixed-ratio-at-even-factorial",
            "mixed_progression",
            StatSpec::RatioScan { c: s("2"), t: vec![fact(12), fact(14), fact(16)], reduce: Reduce::Last },
            "3/2".into(),
            5e-2,
            "oscillating-ratio",
            "analytic",
        ),
        check(
            "squares-lemma1-c2",
            "squares",
            StatSpec::Lemma1 { c: s("2"), lo: s("10^8"), hi: s("10^10"), points: 400 },
            Num::Float(0.0),
            1e-2,
            "restricted-sup",
            "analytic",
        ),
        check(
            "squares-ndense-tail-c101/100",
            "squares",
            StatSpec::NdenseViolations { c: s("101/100"), lo: s("10^4"), hi: s("10^9") },
            Num::Float(0.0),
            0.5,
            "ndense-growth",
            "derived",
        ),
        check(
            "squares-consecutive-ratio",
            "squares",
            StatSpec::ConsecutiveRatio { n: 100_000, reduce: Reduce::Sup },
            Num::Float(1.0),
            1e-4,
            "consecutive-ratio",
            "trivial",
        ),
        check(
            "powers-of-two-dispersion",
            "powers_of_two",
            StatSpec::Dispersion { n: 60, reduce: Reduce::Inf },
            "1/2".into(),
            2e-2,
            "dispersion",
            "derived",
        ),
        check(
            "squares-coverage",
            "squares",
            StatSpec::Coverage { bound: s("10^6"), m: 8 },
            Num::Float(1.0),
            1e-9,
            "dispersion-bound",
            "derived",
        ),
        CheckSpec {
            name: "direction-maps-k3".into(),
            family: None,
            params: BTreeMap::new(),
            descriptor: None,
            stat: StatSpec::Homeomorphism { k: 3, samples: 10_000, seed: 1 },
            expected: Num::Float(0.0),
            tolerance: 1e-12,
            anchor: "direction-ratio-maps".into(),
            provenance: "analytic".into(),
        },
    ];
    SuiteSpec { name: "paper".into(), checks }
}

/// Suite by name, or from a JSON file path.
pub fn load_suite(name_or_path: &str) -> Result<SuiteSpec> {
    match name_or_path {
        "paper" => Ok(builtin_suite()),
        path => SuiteSpec::from_json(&std::fs::read_to_string(path)?),
    }
}

/// [`run_suite`] with the default budget.
pub fn run_default(spec: &SuiteSpec) -> Result<Report> {
    run_suite(spec, default_budget())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set::DEFAULT_BUDGET;

    #[test]
    fn builtin_suite_passes() {
        let spec = builtin_suite();
        assert!(spec.checks.iter().all(|c| anchor_known(&c.anchor)));
        let r = run_suite(&spec, DEFAULT_BUDGET).unwrap();
        for c in &r.checks {
            assert!(c.pass, "{c:?}");
        }
        assert_eq!(r.failed, 0);
        assert_eq!(r.passed, spec.checks.len());
    }

    #[test]
    fn report_is_deterministic_without_timing() {
        let mut spec = builtin_suite();
        spec.checks.truncate(4);
        let a = run_suite(&spec, DEFAULT_BUDGET).unwrap();
        let b = run_suite(&spec, DEFAULT_BUDGET).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        emit(&a, Format::Json, false, &mut x).unwrap();
        emit(&b, Format::Json, false, &mut y).unwrap();
        assert_eq!(x, y);
        let back: Report = serde_json::from_slice(&x).unwrap();
        assert_eq!(back.checks, a.checks);
        assert_eq!(back.schema, SCHEMA);
    }

    #[test]
    fn custom_suite_from_json() {
        let json = r#"{
            "name": "custom",
            "checks": [
                {"name": "sq", "family": "squares", "stat": "mean_ratio", "n": 200000,
                 "expected": "1/3", "tolerance": 0.005, "anchor": "mean-ratio", "provenance": "analytic"},
                {"name": "bad", "family": "naturals", "stat": "mean_ratio", "n": 100,
                 "expected": 0.9, "tolerance": 0.01, "anchor": "mean-ratio"},
                {"name": "over", "family": "naturals", "stat": "lambda", "n": 1000,
                 "expected": 1, "tolerance": 0.01, "anchor": "convergence-exponent"}
            ]
        }"#;
        let spec = SuiteSpec::from_json(json).unwrap();
        let r = run_suite(&spec, 500).unwrap();
        assert!(!r.checks[1].pass && r.checks[1].error.is_none());
        // budget overruns become failed checks, not an abort
        assert!(r.checks[0].error.as_deref().unwrap().contains("budget"));
        assert!(r.checks[2].error.as_deref().unwrap().contains("budget"));
        let r = run_suite(&spec, DEFAULT_BUDGET).unwrap();
        assert_eq!((r.passed, r.failed), (2, 1));
    }

    #[test]
    fn empty_suite() {
        let r = run_suite(&SuiteSpec { name: "empty".into(), checks: vec![] }, DEFAULT_BUDGET).unwrap();
        assert!(r.all_passed() && r.checks.is_empty());
    }

    #[test]
    fn malformed_specs() {
        assert!(SuiteSpec::from_json("{").is_err());
        let bad_tol = r#"{"name":"x","checks":[{"name":"a","family":"squares","stat":"lambda","n":10,
            "expected":0.5,"tolerance":0,"anchor":"convergence-exponent"}]}"#;
        assert!(SuiteSpec::from_json(bad_tol).is_err());
        let dup = r#"{"name":"x","checks":[
            {"name":"a","family":"squares","stat":"lambda","n":10,"expected":0.5,"tolerance":1,"anchor":"a"},
            {"name":"a","family":"squares","stat":"lambda","n":10,"expected":0.5,"tolerance":1,"anchor":"a"}]}"#;
        assert!(SuiteSpec::from_json(dup).is_err());
    }

    #[test]
    fn formats() {
        let mut spec = builtin_suite();
        spec.checks.truncate(2);
        let r = run_suite(&spec, DEFAULT_BUDGET).unwrap();
        let mut csv = Vec::new();
        emit(&r, Format::Csv, false, &mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("name,computed,expected,tolerance,pass\n"));
        assert_eq!(csv.lines().count(), 3);
        let mut text = Vec::new();
        emit(&r, Format::Text, false, &mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        assert!(text.lines().take(2).all(|l| l.starts_with('✓')));
        let mut json = Vec::new();
        emit(&r, Format::Json, true, &mut json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert!(v["timing"].is_object());
    }
}
