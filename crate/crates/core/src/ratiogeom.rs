//! Ratio sets `R^k(A_1,…,A_{k-1}; B)`, direction sets on the positive unit
//! sphere, and the maps between them.

use std::collections::{BTreeMap, HashSet};

use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{dispersion_trace, DEFAULT_TOL};
use crate::arith::{ceil_rational, floor_rational, fmt_rational, nat_ratio, parts, rat, rat_from_nat, to_f64, Natural, Rational};
use crate::error::{param, Error, Result};
use crate::set::{Prefix, SetDescriptor};

/// `(a_1/b, …, a_{k-1}/b)` together with the witnesses.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RatioPoint {
    pub coordinates: Vec<Rational>,
    pub numerators: Vec<Natural>,
    pub denominator: Natural,
}

impl RatioPoint {
    pub fn new(numerators: Vec<Natural>, denominator: Natural) -> Result<Self> {
        if denominator.is_zero() || numerators.iter().any(Zero::is_zero) {
            return Err(param("witness", "entries must be positive"));
        }
        let coordinates = numerators.iter().map(|a| nat_ratio(a, &denominator)).collect();
        Ok(RatioPoint { coordinates, numerators, denominator })
    }

    pub fn k(&self) -> usize {
        self.coordinates.len() + 1
    }

    /// Recomputes the coordinates from the witnesses.
    pub fn is_consistent(&self) -> bool {
        self.numerators.len() == self.coordinates.len()
            && self.numerators.iter().zip(&self.coordinates).all(|(a, c)| nat_ratio(a, &self.denominator) == *c)
    }

    pub fn in_unit_cube(&self) -> bool {
        self.numerators.iter().all(|a| a < &self.denominator)
    }

    /// `H_j` on the witness: `a_j` and the denominator trade places.
    pub fn involution(&self, j: usize) -> Result<RatioPoint> {
        check_index(j, self.numerators.len())?;
        let mut nums = self.numerators.clone();
        let b = std::mem::replace(&mut nums[j - 1], self.denominator.clone());
        RatioPoint::new(nums, b)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coordinates.iter().map(to_f64).collect()
    }

    /// `"p/q"` columns, for CSV dumps.
    pub fn csv_row(&self) -> String {
        self.coordinates.iter().map(fmt_rational).collect::<Vec<_>>().join(",")
    }
}

/// A point of the positive part of the unit sphere, with the integer tuple
/// it was built from when there is one.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint {
    pub coordinates: Vec<f64>,
    pub witness: Option<Vec<Natural>>,
}

impl SpherePoint {
    /// `x/|x|` for a positive real vector.
    pub fn from_reals(x: &[f64]) -> Result<Self> {
        if x.len() < 2 || x.iter().any(|v| v.is_nan() || *v <= 0.0 || !v.is_finite()) {
            return Err(param("point", "needs at least two positive finite coordinates"));
        }
        let r = norm(x);
        Ok(SpherePoint { coordinates: x.iter().map(|v| v / r).collect(), witness: None })
    }

    /// Direction of an integer tuple `(a_1, …, a_k)`.
    pub fn from_witness(a: &[Natural]) -> Result<Self> {
        if a.iter().any(Zero::is_zero) {
            return Err(param("witness", "entries must be positive"));
        }
        // scale down before going to floats so huge witnesses keep precision
        let top = a.iter().max().cloned().unwrap_or_default();
        let reals: Vec<f64> = a.iter().map(|x| to_f64(&nat_ratio(x, &top))).collect();
        let mut p = SpherePoint::from_reals(&reals)?;
        p.witness = Some(a.to_vec());
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.coordinates.len()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_index(j: usize, len: usize) -> Result<()> {
    if j == 0 || j > len {
        return Err(Error::Index { index: j, len });
    }
    Ok(())
}

/// Image of a sphere point under `F(x) = (x_1/x_k, …, x_{k-1}/x_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthantImage {
    pub coordinates: Vec<f64>,
    /// Present when the sphere point carries an integer witness.
    pub exact: Option<RatioPoint>,
}

/// `F`: positive sphere to the positive orthant.
pub fn map_orthant(p: &SpherePoint) -> Result<OrthantImage> {
    let (last, rest) = p.coordinates.split_last().ok_or_else(|| param("point", "empty"))?;
    if last.is_nan() || *last <= 0.0 {
        return Err(param("point", "last coordinate must be positive"));
    }
    let exact = match &p.witness {
        Some(w) => {
            let (b, a) = w.split_last().unwrap();
            Some(RatioPoint::new(a.to_vec(), b.clone())?)
        }
        None => None,
    };
    Ok(OrthantImage { coordinates: rest.iter().map(|x| x / last).collect(), exact })
}

/// `G(y) = (y_1, …, y_{k-1}, 1)/sqrt(y_1² + … + y_{k-1}² + 1)`.
pub fn map_sphere(y: &[f64]) -> Result<SpherePoint> {
    if y.is_empty() || y.iter().any(|v| v.is_nan() || *v <= 0.0 || !v.is_finite()) {
        return Err(param("point", "coordinates must be positive and finite"));
    }
    let r = (y.iter().map(|v| v * v).sum::<f64>() + 1.0).sqrt();
    let mut coordinates: Vec<f64> = y.iter().map(|v| v / r).collect();
    coordinates.push(1.0 / r);
    Ok(SpherePoint { coordinates, witness: None })
}

/// `H_j(x) = (x_1/x_j, …, 1/x_j, …, x_{k-1}/x_j)`, `j` 1-based.
pub fn map_involution(x: &[Rational], j: usize) -> Result<Vec<Rational>> {
    check_index(j, x.len())?;
    let xj = &x[j - 1];
    if xj <= &Rational::zero() {
        return Err(param("point", "coordinate j must be positive"));
    }
    Ok(x.iter().enumerate().map(|(i, v)| if i == j - 1 { xj.recip() } else { v / xj }).collect())
}

/// All points of `R^k(A_1,…,A_{k-1}; B)` whose witnesses are `≤ bound`,
/// deduplicated by value (the smallest denominator witness is kept) and
/// sorted by coordinates. With `unit_cube`, only points in `(0,1)^{k-1}`.
pub fn ratio_points(
    numerator_sets: &[SetDescriptor],
    denominator_set: &SetDescriptor,
    bound: &Natural,
    unit_cube: bool,
    budget: u64,
) -> Result<Vec<RatioPoint>> {
    if numerator_sets.is_empty() {
        return Err(param("k", "need at least one numerator set"));
    }
    let zero = Natural::zero();
    let mut lists = Vec::with_capacity(numerator_sets.len());
    let mut total = denominator_set.count(bound);
    for s in numerator_sets {
        let n = s.count(bound);
        total *= &n;
        lists.push(s.enumerate_range(&zero, bound, budget)?.collect::<Vec<_>>());
    }
    if total > Natural::from(budget) {
        return Err(Error::Budget { budget, needed: total });
    }
    let denominators: Vec<Natural> = denominator_set.enumerate_range(&zero, bound, budget)?.collect();
    let mut seen: BTreeMap<Vec<Rational>, RatioPoint> = BTreeMap::new();
    let mut idx = vec![0usize; lists.len()];
    for b in &denominators {
        let limits: Vec<usize> =
            lists.iter().map(|l| if unit_cube { l.partition_point(|a| a < b) } else { l.len() }).collect();
        if limits.contains(&0) {
            continue;
        }
        idx.iter_mut().for_each(|i| *i = 0);
        loop {
            let nums: Vec<Natural> = idx.iter().zip(&lists).map(|(i, l)| l[*i].clone()).collect();
            let p = RatioPoint::new(nums, b.clone())?;
            seen.entry(p.coordinates.clone()).or_insert(p);
            // odometer over the numerator indices
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] < limits[pos] {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
    }
    Ok(seen.into_values().collect())
}

/// [`ratio_points`] with every set equal to `set`, `k ≥ 2`.
pub fn ratio_points_k(set: &SetDescriptor, k: usize, bound: &Natural, unit_cube: bool, budget: u64) -> Result<Vec<RatioPoint>> {
    if k < 2 {
        return Err(param("k", "must be at least 2"));
    }
    ratio_points(&vec![set.clone(); k - 1], set, bound, unit_cube, budget)
}

/// Shape predicted for accumulation points of `R^{k+1}` of a set with
/// dispersion `d`: every coordinate `≥ 1-d/2`, or some coordinate `≤ 1-d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForbiddenSpec {
    #[serde(with = "crate::arith::serde_rat")]
    pub d: Rational,
    /// Only denominators above this are checked.
    #[serde(with = "crate::arith::serde_nat")]
    pub threshold: Natural,
    #[serde(with = "crate::arith::serde_rat")]
    pub slack: Rational,
}

impl ForbiddenSpec {
    /// Threshold `7!`, slack `1/50`.
    pub fn new(d: Rational) -> Self {
        ForbiddenSpec { d, threshold: crate::arith::factorial(7), slack: rat(1, 50) }
    }

    /// Open window `(1-d+slack, 1-d/2-slack)` that the smallest coordinate
    /// of a violating point must fall in.
    pub fn window(&self) -> (Rational, Rational) {
        let one = Rational::one();
        (&one - &self.d + &self.slack, &one - &self.d / rat(2, 1) - &self.slack)
    }

    pub fn violates(&self, coords: &[Rational]) -> bool {
        let (lo, hi) = self.window();
        let min = coords.iter().min();
        coords.iter().all(|c| c > &lo) && min.is_some_and(|m| m < &hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForbiddenStats {
    pub spec: ForbiddenSpec,
    /// Points (or candidate denominators) above the threshold.
    pub checked: u64,
    pub violations: u64,
    /// First few violating witnesses, as `[numerators…, denominator]`.
    #[serde(serialize_with = "witness_rows")]
    pub witnesses: Vec<Vec<Natural>>,
}

fn witness_rows<S: serde::Serializer>(v: &[Vec<Natural>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for row in v {
        seq.serialize_element(&row.iter().map(|x| x.to_string()).collect::<Vec<_>>())?;
    }
    seq.end()
}

const FORBIDDEN_WITNESS_CAP: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub k: usize,
    #[serde(with = "crate::arith::serde_nat")]
    pub bound: Natural,
    pub m: u32,
    pub boxes: u64,
    pub hit: u64,
    pub fraction: f64,
    /// `k = 2` with explicit points: largest gap between consecutive
    /// values of `{0} ∪ points ∪ {1}`.
    #[serde(with = "opt_rat", skip_serializing_if = "Option::is_none")]
    pub largest_gap: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forbidden: Option<ForbiddenStats>,
}

mod opt_rat {
    use super::*;
    pub fn serialize<S: serde::Serializer>(v: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&fmt_rational(r)),
            None => s.serialize_none(),
        }
    }
}

fn box_count(k: usize, m: u32) -> Result<u64> {
    if m < 2 {
        return Err(param("m", "grid resolution must be at least 2"));
    }
    if k < 2 {
        return Err(param("k", "must be at least 2"));
    }
    u64::from(m).checked_pow((k - 1) as u32).filter(|b| *b <= 1 << 32).ok_or_else(|| param("m", "too many boxes"))
}

/// Index of the half-open box `[i/m, (i+1)/m)` holding `x ∈ (0,1)`.
fn box_index(x: &Rational, m: u32) -> u32 {
    floor_rational(&(x * rat(i64::from(m), 1))).to_u32().unwrap()
}

/// Hit fraction of the `m^{k-1}` boxes of `(0,1)^{k-1}` by explicit points;
/// points outside the open cube are ignored.
pub fn coverage_probe(
    points: &[RatioPoint],
    k: usize,
    m: u32,
    bound: &Natural,
    forbidden: Option<&ForbiddenSpec>,
) -> Result<CoverageReport> {
    let boxes = box_count(k, m)?;
    if let Some(p) = points.iter().find(|p| p.k() != k) {
        return Err(param("points", format!("expected dimension {}, got {}", k - 1, p.k() - 1)));
    }
    let inside: Vec<&RatioPoint> = points.iter().filter(|p| p.in_unit_cube()).collect();
    let hits: HashSet<Vec<u32>> =
        inside.iter().map(|p| p.coordinates.iter().map(|c| box_index(c, m)).collect()).collect();
    let largest_gap = (k == 2).then(|| {
        let mut vals: Vec<Rational> = inside.iter().map(|p| p.coordinates[0].clone()).collect();
        vals.push(Rational::zero());
        vals.push(Rational::one());
        vals.sort();
        vals.windows(2).map(|w| &w[1] - &w[0]).max().unwrap()
    });
    let forbidden = forbidden.map(|spec| {
        let mut checked = 0;
        let mut violations = 0;
        let mut witnesses = Vec::new();
        for p in inside.iter().filter(|p| p.denominator > spec.threshold) {
            checked += 1;
            if spec.violates(&p.coordinates) {
                violations += 1;
                if witnesses.len() < FORBIDDEN_WITNESS_CAP {
                    let mut w = p.numerators.clone();
                    w.push(p.denominator.clone());
                    witnesses.push(w);
                }
            }
        }
        ForbiddenStats { spec: spec.clone(), checked, violations, witnesses }
    });
    let hit = hits.len() as u64;
    Ok(CoverageReport { k, bound: bound.clone(), m, boxes, hit, fraction: hit as f64 / boxes as f64, largest_gap, forbidden })
}

/// `k = 2` coverage of `(0,1)` by `R(A)` from counting alone: box `i` is hit
/// iff some `b ∈ A`, `b ≤ bound`, has an element in `[ib/m, (i+1)b/m)`.
/// Denominators are tried from the top down and the scan stops once every
/// box is hit.
pub fn coverage_scan(set: &SetDescriptor, bound: &Natural, m: u32, budget: u64) -> Result<CoverageReport> {
    let boxes = box_count(2, m)?;
    let runs = set.runs(&Natural::zero(), bound, budget)?;
    let mut hit = vec![false; m as usize];
    let mut left = m as usize;
    let below = |x: Natural| if x.is_zero() { Natural::zero() } else { set.count(&(x - 1u32)) };
    'outer: for r in runs.iter().rev() {
        let mut k = r.len.clone();
        while !k.is_zero() {
            k -= 1u32;
            let b = r.nth(&k);
            let br = rat_from_nat(&b);
            for (i, h) in hit.iter_mut().enumerate() {
                if *h {
                    continue;
                }
                let lo = ceil_rational(&(&br * rat(i as i64, i64::from(m))));
                let hi = ceil_rational(&(&br * rat(i as i64 + 1, i64::from(m))));
                // elements a with lo ≤ a < hi, a ≥ 1
                if below(hi) > below(lo.max(Natural::one())) {
                    *h = true;
                    left -= 1;
                }
            }
            if left == 0 {
                break 'outer;
            }
        }
    }
    let hit = (m as usize - left) as u64;
    Ok(CoverageReport {
        k: 2,
        bound: bound.clone(),
        m,
        boxes,
        hit,
        fraction: hit as f64 / boxes as f64,
        largest_gap: None,
        forbidden: None,
    })
}

/// Scans `R^{k+1}(A) ∩ (0,1)^k` for points off the predicted shape, over
/// all witnesses `≤ bound` with denominator above the threshold.
///
/// Coordinates may repeat, so a violating point exists for denominator `b`
/// iff some `a ∈ A` has `a/b` inside [`ForbiddenSpec::window`]; the scan is
/// a single two-pointer pass over the elements, independent of `k`.
pub fn forbidden_scan(set: &SetDescriptor, spec: &ForbiddenSpec, bound: &Natural, budget: u64) -> Result<ForbiddenStats> {
    let elems: Vec<Natural> = set.enumerate_range(&Natural::zero(), bound, budget)?.collect();
    let (lo, hi) = spec.window();
    let (ln, ld) = parts(&lo);
    let (hn, hd) = parts(&hi);
    let mut checked = 0;
    let mut violations = 0;
    let mut witnesses = Vec::new();
    // i: first element with a·ld > ln·b; both pointers only move forward
    let mut i = 0;
    let mut j = 0;
    for b in elems.iter().filter(|b| **b > spec.threshold) {
        checked += 1;
        let (lb, hb) = (&ln * b, &hn * b);
        while i < elems.len() && &elems[i] * &ld <= lb {
            i += 1;
        }
        j = j.max(i);
        while j < elems.len() && &elems[j] * &hd < hb {
            j += 1;
        }
        if i < j {
            violations += 1;
            if witnesses.len() < FORBIDDEN_WITNESS_CAP {
                witnesses.push(vec![elems[i].clone(), b.clone()]);
            }
        }
    }
    Ok(ForbiddenStats { spec: spec.clone(), checked, violations, witnesses })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionBound {
    pub k: usize,
    /// Tail infimum of the dispersion trace.
    pub dispersion: f64,
    pub bound: f64,
    pub coverage: f64,
    /// Whether the coverage precondition holds (fraction at least `0.95`).
    pub applicable: bool,
    pub holds: bool,
}

/// Compares the dispersion estimate of `prefix` with `1/k`, given the
/// coverage fraction measured for `R^k`.
pub fn dispersion_bound_check(prefix: &Prefix, k: usize, coverage: f64, tol: f64) -> Result<DispersionBound> {
    if k < 2 {
        return Err(param("k", "must be at least 2"));
    }
    if prefix.len() < 2 {
        return Err(param("prefix", "needs at least two elements"));
    }
    let trace = dispersion_trace(prefix, DEFAULT_TOL);
    let bound = 1.0 / k as f64;
    Ok(DispersionBound {
        k,
        dispersion: trace.inf,
        bound,
        coverage,
        applicable: coverage >= 0.95,
        holds: trace.inf <= bound + tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomeomorphismReport {
    pub k: usize,
    pub samples: usize,
    /// `max |F(G(y)) - y|`, relative to `max(1, |y_i|)`.
    pub max_fg_error: f64,
    /// `max |G(F(x)) - x|` on sphere points.
    pub max_gf_error: f64,
    /// Exact `H_j∘H_j = id` failures over random rational tuples.
    pub involution_failures: usize,
    pub involution_samples: usize,
}

/// Seeded round trips of `F`, `G` and `H_j`.
pub fn homeomorphism_check(k: usize, samples: usize, involution_samples: usize, seed: u64) -> Result<HomeomorphismReport> {
    if k < 2 {
        return Err(param("k", "must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fg, mut gf) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let y: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(-6.0f64..6.0).exp()).collect();
        let back = map_orthant(&map_sphere(&y)?)?.coordinates;
        for (a, b) in y.iter().zip(&back) {
            fg = fg.max((a - b).abs() / a.abs().max(1.0));
        }
        let x: Vec<f64> = (0..k).map(|_| rng.gen_range(1e-3f64..1.0)).collect();
        let x = SpherePoint::from_reals(&x)?;
        let back = map_sphere(&map_orthant(&x)?.coordinates)?.coordinates;
        for (a, b) in x.coordinates.iter().zip(&back) {
            gf = gf.max((a - b).abs());
        }
    }
    let mut failures = 0;
    for _ in 0..involution_samples {
        let x: Vec<Rational> = (0..k - 1).map(|_| rat(rng.gen_range(1..=1_000_000), rng.gen_range(1..=1_000_000))).collect();
        let j = rng.gen_range(1..k);
        if map_involution(&map_involution(&x, j)?, j)? != x {
            failures += 1;
        }
    }
    Ok(HomeomorphismReport {
        k,
        samples,
        max_fg_error: fg,
        max_gf_error: gf,
        involution_failures: failures,
        involution_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::nat;
    use crate::generators::{geometric_sequence, naturals, power_sequence, squares};
    use crate::set::DEFAULT_BUDGET;
    use proptest::prelude::*;

    fn explicit(v: &[u64]) -> SetDescriptor {
        SetDescriptor::explicit(v.iter().copied().map(nat).collect())
    }

    fn coords(points: &[RatioPoint]) -> Vec<Vec<Rational>> {
        points.iter().map(|p| p.coordinates.clone()).collect()
    }

    #[test]
    fn small_ratio_sets() {
        let a = explicit(&[1, 2, 3]);
        let got = coords(&ratio_points_k(&a, 2, &nat(3), false, DEFAULT_BUDGET).unwrap());
        let want: Vec<Vec<Rational>> =
            [(1, 3), (1, 2), (2, 3), (1, 1), (3, 2), (2, 1), (3, 1)].iter().map(|&(p, q)| vec![rat(p, q)]).collect();
        assert_eq!(got, want);
        let a = explicit(&[1, 2]);
        let pts = ratio_points_k(&a, 3, &nat(2), false, DEFAULT_BUDGET).unwrap();
        assert_eq!(pts.len(), 7);
        assert!(pts.iter().all(RatioPoint::is_consistent));
        let unit = ratio_points_k(&a, 3, &nat(2), true, DEFAULT_BUDGET).unwrap();
        assert_eq!(coords(&unit), vec![vec![rat(1, 2), rat(1, 2)]]);
        assert!(matches!(ratio_points_k(&naturals(), 3, &nat(1000), false, 1000), Err(Error::Budget { .. })));
    }

    #[test]
    fn maps() {
        let p = SpherePoint::from_reals(&[0.6, 0.8]).unwrap();
        let f = map_orthant(&p).unwrap();
        assert!((f.coordinates[0] - 0.75).abs() < 1e-15);
        let g = map_sphere(&[1.0]).unwrap();
        assert!(g.coordinates.iter().all(|c| (c - 0.5f64.sqrt()).abs() < 1e-15));
        let g = map_sphere(&[1.0, 1.0]).unwrap();
        assert!(g.coordinates.iter().all(|c| (c - (1.0f64 / 3.0).sqrt()).abs() < 1e-15));
        let y = [2.0, 0.5];
        let back = map_orthant(&map_sphere(&y).unwrap()).unwrap().coordinates;
        assert!(back.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(map_sphere(&[1.0, 0.0]).is_err());
        // F on a direction witness is the ratio point of the same witness
        let w = [nat(3), nat(10), nat(7)];
        let f = map_orthant(&SpherePoint::from_witness(&w).unwrap()).unwrap();
        assert_eq!(f.exact.unwrap(), RatioPoint::new(vec![nat(3), nat(10)], nat(7)).unwrap());
        assert!((f.coordinates[0] - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn involutions() {
        assert_eq!(map_involution(&[rat(2, 1), rat(1, 2)], 1).unwrap(), vec![rat(1, 2), rat(1, 4)]);
        assert_eq!(map_involution(&[rat(1, 2), rat(1, 4)], 1).unwrap(), vec![rat(2, 1), rat(1, 2)]);
        assert_eq!(map_involution(&vec![rat(1, 1); 3], 2).unwrap(), vec![rat(1, 1); 3]);
        assert!(map_involution(&[rat(1, 1)], 2).is_err());
        let p = RatioPoint::new(vec![nat(3), nat(5)], nat(7)).unwrap();
        let h = p.involution(1).unwrap();
        assert_eq!(h.coordinates, vec![rat(7, 3), rat(5, 3)]);
        assert_eq!(h.coordinates, map_involution(&p.coordinates, 1).unwrap());
    }

    #[test]
    fn involution_permutes_truncated_ratio_set() {
        let a = explicit(&[1, 2, 3, 5, 8, 13]);
        let pts = ratio_points_k(&a, 3, &nat(13), false, DEFAULT_BUDGET).unwrap();
        let set: HashSet<Vec<Rational>> = pts.iter().map(|p| p.coordinates.clone()).collect();
        for j in 1..=2 {
            let image: HashSet<Vec<Rational>> =
                pts.iter().map(|p| map_involution(&p.coordinates, j).unwrap()).collect();
            assert_eq!(image, set);
        }
    }

    #[test]
    fn homeomorphisms() {
        for k in 2..=4 {
            let r = homeomorphism_check(k, 2000, 200, 7).unwrap();
            assert!(r.max_fg_error < 1e-12 && r.max_gf_error < 1e-12, "{r:?}");
            assert_eq!(r.involution_failures, 0);
        }
    }

    #[test]
    fn coverage_examples() {
        let bound = nat(1_000_000);
        let pts = ratio_points_k(&squares(), 2, &bound, true, DEFAULT_BUDGET).unwrap();
        let r = coverage_probe(&pts, 2, 8, &bound, None).unwrap();
        assert_eq!(r.fraction, 1.0);
        assert_eq!(coverage_scan(&squares(), &bound, 8, DEFAULT_BUDGET).unwrap().fraction, 1.0);
        let g = geometric_sequence(rat(4, 1)).unwrap();
        let pts = ratio_points_k(&g, 2, &bound, true, DEFAULT_BUDGET).unwrap();
        let r = coverage_probe(&pts, 2, 10, &bound, None).unwrap();
        assert_eq!((r.hit, r.boxes), (2, 10));
        assert_eq!(r.largest_gap, Some(rat(3, 4)));
        assert_eq!(coverage_scan(&g, &bound, 10, DEFAULT_BUDGET).unwrap().hit, 2);
        assert!(coverage_probe(&pts, 2, 1, &bound, None).is_err());
    }

    #[test]
    fn projection_is_a_subset_of_the_plane_ratio_set() {
        let a = explicit(&[2, 3, 7, 10, 11]);
        let b = explicit(&[1, 4, 6, 11]);
        let bound = nat(11);
        let r3 = ratio_points(&[a.clone(), a.clone()], &b, &bound, false, DEFAULT_BUDGET).unwrap();
        let r2: HashSet<Rational> = ratio_points(&[a], &b, &bound, false, DEFAULT_BUDGET)
            .unwrap()
            .into_iter()
            .map(|p| p.coordinates[0].clone())
            .collect();
        assert!(r3.iter().all(|p| r2.contains(&p.coordinates[0])));
    }

    #[test]
    fn forbidden_scan_matches_brute_force() {
        let spec = ForbiddenSpec { d: rat(1, 4), threshold: nat(10), slack: rat(1, 50) };
        for v in [vec![1u64, 3, 12, 16, 21, 28, 37, 50], vec![4, 11, 13, 14, 16, 60, 61, 80], vec![2, 5, 9, 17, 33, 65]] {
            let set = explicit(&v);
            let bound = nat(*v.last().unwrap());
            let fast = forbidden_scan(&set, &spec, &bound, DEFAULT_BUDGET).unwrap();
            for k in [2usize, 3] {
                let pts = ratio_points_k(&set, k + 1, &bound, true, DEFAULT_BUDGET).unwrap();
                let slow = coverage_probe(&pts, k + 1, 4, &bound, Some(&spec)).unwrap().forbidden.unwrap();
                let bad: HashSet<Natural> = pts
                    .iter()
                    .filter(|p| p.denominator > spec.threshold && spec.violates(&p.coordinates))
                    .map(|p| p.denominator.clone())
                    .collect();
                assert_eq!(slow.violations > 0, fast.violations > 0, "{v:?} k={k}");
                assert_eq!(bad.len() as u64, fast.violations, "{v:?} k={k}");
            }
        }
    }

    #[test]
    fn dispersion_bounds() {
        let p = squares().take_prefix(5000, DEFAULT_BUDGET).unwrap();
        let r = dispersion_bound_check(&p, 3, 1.0, 0.02).unwrap();
        assert!(r.holds && r.applicable && r.dispersion < 0.01);
        let p = naturals().take_prefix(100, DEFAULT_BUDGET).unwrap();
        assert!(dispersion_bound_check(&p, 7, 1.0, 0.0).unwrap().holds);
        let p = geometric_sequence(rat(2, 1)).unwrap().take_prefix(30, DEFAULT_BUDGET).unwrap();
        let r = dispersion_bound_check(&p, 3, 0.3, 0.02).unwrap();
        assert!(!r.holds && !r.applicable);
    }

    proptest! {
        #[test]
        fn ratio_points_are_exact_and_monotone(v in prop::collection::btree_set(1u64..60, 1..10), b1 in 1u64..60, extra in 0u64..40) {
            let set = SetDescriptor::explicit(v.into_iter().map(nat).collect());
            let small = ratio_points_k(&set, 3, &nat(b1), false, DEFAULT_BUDGET).unwrap();
            let large = ratio_points_k(&set, 3, &nat(b1 + extra), false, DEFAULT_BUDGET).unwrap();
            prop_assert!(small.iter().all(RatioPoint::is_consistent));
            let big: HashSet<Vec<Rational>> = large.iter().map(|p| p.coordinates.clone()).collect();
            prop_assert!(small.iter().all(|p| big.contains(&p.coordinates)));
            for m in [2u32, 5] {
                let a = coverage_probe(&ratio_points_k(&set, 2, &nat(b1), true, DEFAULT_BUDGET).unwrap(), 2, m, &nat(b1), None).unwrap();
                let b = coverage_probe(&ratio_points_k(&set, 2, &nat(b1 + extra), true, DEFAULT_BUDGET).unwrap(), 2, m, &nat(b1 + extra), None).unwrap();
                prop_assert!(a.fraction <= b.fraction);
                prop_assert_eq!(a.hit, coverage_scan(&set, &nat(b1), m, DEFAULT_BUDGET).unwrap().hit);
            }
        }

        #[test]
        fn involution_is_exact(nums in prop::collection::vec((1i64..10_000, 1i64..10_000), 1..5), j in 1usize..5) {
            let x: Vec<Rational> = nums.iter().map(|&(p, q)| rat(p, q)).collect();
            let j = 1 + (j - 1) % x.len();
            prop_assert_eq!(map_involution(&map_involution(&x, j).unwrap(), j).unwrap(), x);
        }

        #[test]
        fn power_sequence_coverage_grows(q in prop::sample::select(vec![(1i64, 2i64), (2, 3), (1, 1)]), b in 10u64..400) {
            let set = power_sequence(rat(q.0, q.1)).unwrap();
            let a = coverage_scan(&set, &nat(b), 6, DEFAULT_BUDGET).unwrap();
            let c = coverage_scan(&set, &nat(4 * b), 6, DEFAULT_BUDGET).unwrap();
            prop_assert!(a.fraction <= c.fraction);
        }
    }
}
