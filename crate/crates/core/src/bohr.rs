//! Bohr sets, Hamming balls and Bohr-Hamming neighborhoods.

use std::io::{Read, Write};

use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diophantine::{kronecker_approximate, ApproxQuery};
use crate::torus::{q_str, Frequencies, FrequencyVector, Guard, Threshold, TorusPoint, Verdict, Q};
use crate::window::{Window, WindowedSet};
use crate::{Error, Result};

/// `Bohr(alpha, eta) = { n : max_j ||n alpha_j|| < eta }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BohrSpec {
    pub freq: Frequencies,
    #[serde(with = "q_str")]
    pub eta: Q,
    #[serde(default)]
    pub guard: Guard,
}

impl BohrSpec {
    pub fn new(freq: impl Into<Frequencies>, eta: Q) -> Result<Self> {
        let spec = BohrSpec {
            freq: freq.into(),
            eta,
            guard: Guard::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_positive() {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }

    /// Every integer is a member once `eta > 1/2`.
    pub fn is_degenerate(&self) -> bool {
        self.eta > Q::new(1, 2)
    }
}

/// Guarded `||x|| < thr` for every point, combined with [`Verdict::and`].
fn all_below(points: &[TorusPoint], n: i64, thr: &Threshold, guard: Guard) -> Verdict {
    points
        .iter()
        .map(|p| p.mul_int(n).norm().lt(thr, guard))
        .fold(Verdict::Yes, Verdict::and)
}

pub fn bohr_contains(spec: &BohrSpec, n: i64) -> Verdict {
    if spec.is_degenerate() {
        return Verdict::Yes;
    }
    let thr = Threshold::new(spec.eta).expect("validated");
    all_below(&spec.freq.points(), n, &thr, spec.guard)
}

pub fn bohr_enumerate(spec: &BohrSpec, window: Window) -> WindowedSet {
    let source = format!("bohr(d={}, eta={})", spec.freq.dim(), spec.eta);
    if spec.is_degenerate() {
        return WindowedSet::new(window, window.iter().collect(), source).expect("inside window");
    }
    let points = spec.freq.points();
    let thr = Threshold::new(spec.eta).expect("validated");
    WindowedSet::from_predicate(window, source, |n| all_below(&points, n, &thr, spec.guard))
}

/// `||n alpha_j||` for each coordinate.
pub fn coordinate_norms(points: &[TorusPoint], n: i64) -> Vec<f64> {
    points.iter().map(|p| p.mul_int(n).norm().value()).collect()
}

/// `U_r(center)` in `Z_k^d`: tuples agreeing with `center` in at least `d - r`
/// coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HammingBall {
    pub k: u32,
    pub r: usize,
    pub center: Vec<u32>,
}

impl HammingBall {
    pub fn new(k: u32, r: usize, center: Vec<u32>) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("k must be at least 2"));
        }
        if r > center.len() {
            return Err(Error::invalid(format!("radius {r} exceeds dimension {}", center.len())));
        }
        if center.iter().any(|&c| c >= k) {
            return Err(Error::invalid("center coordinates must lie in 0..k"));
        }
        Ok(HammingBall { k, r, center })
    }

    pub fn d(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, y: &[u32]) -> Result<bool> {
        if y.len() != self.d() {
            return Err(Error::Dimension {
                expected: self.d(),
                got: y.len(),
            });
        }
        let agree = self.center.iter().zip(y).filter(|(a, b)| **a == **b % self.k).count();
        Ok(agree + self.r >= self.d())
    }
}

/// `sum_{i <= r} C(d, i) (k - 1)^i`.
pub fn hamming_ball_size(k: u64, d: u32, r: u32) -> Result<u128> {
    if k < 2 || r > d {
        return Err(Error::invalid(format!("need k >= 2 and r <= d, got k={k}, d={d}, r={r}")));
    }
    let overflow = || Error::Cap(format!("ball size for k={k}, d={d} overflows 128 bits"));
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    let mut pow: u128 = 1;
    for i in 0..=r as u128 {
        if i > 0 {
            binom = binom.checked_mul(d as u128 - i + 1).ok_or_else(overflow)? / i;
            pow = pow.checked_mul(k as u128 - 1).ok_or_else(overflow)?;
        }
        total = total.checked_add(binom.checked_mul(pow).ok_or_else(overflow)?).ok_or_else(overflow)?;
    }
    Ok(total)
}

/// `BH(alpha; eps, eta) + m`: integers `n` with
/// `#{j : ||(n - m) alpha_j|| < eps} >= ceil((1 - eta) d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BohrHammingSpec {
    pub freq: Frequencies,
    #[serde(with = "q_str")]
    pub eps: Q,
    #[serde(with = "q_str")]
    pub eta_frac: Q,
    #[serde(default)]
    pub shift: i64,
    #[serde(default)]
    pub guard: Guard,
}

impl BohrHammingSpec {
    pub fn new(freq: impl Into<Frequencies>, eps: Q, eta_frac: Q, shift: i64) -> Result<Self> {
        let spec = BohrHammingSpec {
            freq: freq.into(),
            eps,
            eta_frac,
            shift,
            guard: Guard::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eps.is_positive() {
            return Err(Error::invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if !self.eta_frac.is_positive() || self.eta_frac > Q::one() {
            return Err(Error::invalid(format!("eta must lie in (0, 1], got {}", self.eta_frac)));
        }
        Ok(())
    }

    pub fn threshold_count(&self) -> usize {
        threshold_count(self.eta_frac, self.freq.dim())
    }
}

/// `ceil((1 - eta) d)`, exactly.
pub fn threshold_count(eta: Q, d: usize) -> usize {
    let t = (Q::one() - eta) * Q::from_integer(d as i128);
    t.ceil().to_integer().max(0).to_usize().unwrap_or(0)
}

/// Decides `#{yes} >= need` from per-coordinate verdicts.
pub fn count_verdict(verdicts: impl IntoIterator<Item = Verdict>, need: usize) -> Verdict {
    let (mut yes, mut maybe) = (0, 0);
    for v in verdicts {
        match v {
            Verdict::Yes => yes += 1,
            Verdict::Ambiguous => maybe += 1,
            Verdict::No => {}
        }
    }
    if yes >= need {
        Verdict::Yes
    } else if yes + maybe < need {
        Verdict::No
    } else {
        Verdict::Ambiguous
    }
}

struct CompiledBh {
    points: Vec<TorusPoint>,
    thr: Threshold,
    need: usize,
    shift: i64,
    guard: Guard,
}

impl CompiledBh {
    fn new(spec: &BohrHammingSpec) -> Self {
        CompiledBh {
            points: spec.freq.points(),
            thr: Threshold::new(spec.eps).expect("validated"),
            need: spec.threshold_count(),
            shift: spec.shift,
            guard: spec.guard,
        }
    }

    fn contains(&self, n: i64) -> Verdict {
        if self.need == 0 {
            return Verdict::Yes;
        }
        let x = n - self.shift;
        count_verdict(
            self.points.iter().map(|p| p.mul_int(x).norm().lt(&self.thr, self.guard)),
            self.need,
        )
    }
}

pub fn bh_contains(spec: &BohrHammingSpec, n: i64) -> Verdict {
    CompiledBh::new(spec).contains(n)
}

pub fn bh_enumerate(spec: &BohrHammingSpec, window: Window) -> WindowedSet {
    let c = CompiledBh::new(spec);
    let source = format!(
        "bh(d={}, eps={}, eta={}, shift={})",
        spec.freq.dim(),
        spec.eps,
        spec.eta_frac,
        spec.shift
    );
    WindowedSet::from_predicate(window, source, |n| c.contains(n))
}

/// Result of a windowed containment check `X + Y ⊆ Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub window: Window,
    pub left_size: usize,
    pub right_size: usize,
    pub pairs_checked: u64,
    pub ambiguous: u64,
    pub violation_count: u64,
    /// First violations `(x, y)` in lexicographic order.
    pub violations: Vec<(i64, i64)>,
}

impl ContainmentReport {
    pub fn holds(&self) -> bool {
        self.violation_count == 0
    }
}

const MAX_LISTED_VIOLATIONS: usize = 100;

fn sumset_check(left: &WindowedSet, right: &WindowedSet, window: Window, target: impl Fn(i64) -> Verdict + Sync) -> ContainmentReport {
    let table: Vec<Verdict> = window.iter().into_par_iter().map(&target).collect();
    let at = |n: i64| table[(n - window.lo) as usize];
    let rows: Vec<(u64, u64, Vec<(i64, i64)>, u64)> = left
        .members()
        .par_iter()
        .map(|&x| {
            let (mut checked, mut amb, mut viol, mut nv) = (0u64, 0u64, Vec::new(), 0u64);
            for &y in right.members() {
                let s = x + y;
                if !window.contains(s) {
                    continue;
                }
                checked += 1;
                match at(s) {
                    Verdict::Yes => {}
                    Verdict::Ambiguous => amb += 1,
                    Verdict::No => {
                        nv += 1;
                        if viol.len() < MAX_LISTED_VIOLATIONS {
                            viol.push((x, y));
                        }
                    }
                }
            }
            (checked, amb, viol, nv)
        })
        .collect();
    let mut report = ContainmentReport {
        window,
        left_size: left.len(),
        right_size: right.len(),
        pairs_checked: 0,
        ambiguous: 0,
        violation_count: 0,
        violations: Vec::new(),
    };
    for (c, a, v, nv) in rows {
        report.pairs_checked += c;
        report.ambiguous += a;
        report.violation_count += nv;
        let room = MAX_LISTED_VIOLATIONS - report.violations.len();
        report.violations.extend(v.into_iter().take(room));
    }
    report
}

/// Checks `Bohr(alpha, eps/2) + BH(alpha; eps/2, eta) ⊆ BH(alpha; eps, eta)`
/// for all sums landing in `window`. Ambiguous members on the left are
/// skipped; ambiguous sums are counted separately.
pub fn check_sumset_containment(
    freq: &Frequencies,
    eps: Q,
    eta_frac: Q,
    window: Window,
    guard: Guard,
) -> Result<ContainmentReport> {
    let half = eps / Q::from_integer(2);
    let mut bohr = BohrSpec::new(freq.clone(), half)?;
    bohr.guard = guard;
    let mut small = BohrHammingSpec::new(freq.clone(), half, eta_frac, 0)?;
    small.guard = guard;
    let mut big = BohrHammingSpec::new(freq.clone(), eps, eta_frac, 0)?;
    big.guard = guard;
    let b = bohr_enumerate(&bohr, window);
    let h = bh_enumerate(&small, window);
    let target = CompiledBh::new(&big);
    Ok(sumset_check(&b, &h, window, |n| target.contains(n)))
}

/// Outcome of [`shifted_bh_cover`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub m: i64,
    pub shift_norms: Vec<f64>,
    pub checked: u64,
    pub ambiguous: u64,
    pub violations: Vec<i64>,
}

impl CoverReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Finds `m` with `||m alpha_j - z_j|| < eps/2` for all `j`, then checks
/// `BH(alpha; eps/2, eta) + m ⊆ { n : #{j : ||n alpha_j - z_j|| < eps} >= ceil((1-eta) d) }`
/// for every `h` in the window.
pub fn shifted_bh_cover(
    freq: &Frequencies,
    z: &[TorusPoint],
    eps: Q,
    eta_frac: Q,
    search_bound: u64,
    window: Window,
    guard: Guard,
) -> Result<CoverReport> {
    let half = eps / Q::from_integer(2);
    let query = ApproxQuery::new(freq.clone(), z.to_vec(), half, search_bound)?.with_guard(guard);
    let sol = kronecker_approximate(&query)?;
    let mut small = BohrHammingSpec::new(freq.clone(), half, eta_frac, 0)?;
    small.guard = guard;
    let need = small.threshold_count();
    let h = bh_enumerate(&small, window);
    let points = freq.points();
    let thr = Threshold::new(eps)?;
    let results: Vec<(i64, Verdict)> = h
        .members()
        .par_iter()
        .map(|&x| {
            let n = x + sol.n;
            let v = count_verdict(
                points.iter().zip(z).map(|(p, zj)| (&p.mul_int(n) - zj).norm().lt(&thr, guard)),
                need,
            );
            (x, v)
        })
        .collect();
    let mut report = CoverReport {
        m: sol.n,
        shift_norms: sol.norms,
        checked: results.len() as u64,
        ambiguous: 0,
        violations: Vec::new(),
    };
    for (x, v) in results {
        match v {
            Verdict::Yes => {}
            Verdict::Ambiguous => report.ambiguous += 1,
            Verdict::No => report.violations.push(x),
        }
    }
    Ok(report)
}

/// Writes one row per window point: `n`, the coordinate norms of
/// `(n - shift) alpha_j`, and the membership flag (`1`, `0` or `?`).
pub fn write_enumeration_csv<W: Write>(out: W, freq: &Frequencies, shift: i64, set: &WindowedSet) -> Result<()> {
    let points = freq.points();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_string()];
    header.extend((1..=points.len()).map(|j| format!("norm_{j}")));
    header.push("member".into());
    w.write_record(&header)?;
    for n in set.window().iter() {
        let flag = if set.contains(n) {
            "1"
        } else if set.ambiguous().binary_search(&n).is_ok() {
            "?"
        } else {
            "0"
        };
        let mut row = vec![n.to_string()];
        row.extend(coordinate_norms(&points, n - shift).iter().map(|v| format!("{v:.15}")));
        row.push(flag.into());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Re-checks the membership column of an enumeration CSV; returns the rows
/// whose recorded flag disagrees with `pred`.
pub fn verify_enumeration_csv<R: Read>(input: R, pred: impl Fn(i64) -> Verdict) -> Result<(u64, Vec<i64>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = 0;
    let mut mismatches = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let n: i64 = rec
            .get(0)
            .ok_or_else(|| Error::Parse("empty row".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad n column: {e}")))?;
        let flag = rec.get(rec.len() - 1).unwrap_or("");
        rows += 1;
        if pred(n).flag() != flag {
            mismatches.push(n);
        }
    }
    Ok((rows, mismatches))
}

/// Default generator-form vector, convenient for tests and demos.
pub fn sqrt_primes(d: usize) -> Result<FrequencyVector> {
    crate::torus::make_independent_frequencies(d, None, crate::torus::DEFAULT_PRECISION_BITS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::parse_ratio;

    fn q(s: &str) -> Q {
        parse_ratio(s).unwrap()
    }

    fn rational(v: &[&str]) -> Frequencies {
        Frequencies::rational(v.iter().map(|s| q(s)).collect()).unwrap()
    }

    fn w(lo: i64, hi: i64) -> Window {
        Window::new(lo, hi).unwrap()
    }

    #[test]
    fn bohr_examples() {
        let third = BohrSpec::new(rational(&["1/3"]), q("0.2")).unwrap();
        assert_eq!(bohr_contains(&third, 3), Verdict::Yes);
        assert_eq!(bohr_contains(&third, 1), Verdict::No);
        let s2 = BohrSpec::new(sqrt_primes(1).unwrap(), q("0.15")).unwrap();
        assert_eq!(bohr_contains(&s2, 5), Verdict::Yes);
        assert_eq!(bohr_enumerate(&s2, w(0, 10)).members(), &[0, 5, 7, 10]);
        let quarter = BohrSpec::new(rational(&["1/4"]), q("0.3")).unwrap();
        assert_eq!(bohr_enumerate(&quarter, w(0, 8)).members(), &[0, 1, 3, 4, 5, 7, 8]);
        let wide = BohrSpec::new(sqrt_primes(2).unwrap(), q("0.6")).unwrap();
        assert_eq!(bohr_enumerate(&wide, w(-3, 3)).len(), 7);
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(hamming_ball_size(2, 4, 1).unwrap(), 5);
        assert_eq!(hamming_ball_size(7, 5, 0).unwrap(), 1);
        assert_eq!(hamming_ball_size(3, 2, 2).unwrap(), 9);
        assert!(hamming_ball_size(1, 2, 1).is_err());
    }

    #[test]
    fn ball_membership() {
        let b = HammingBall::new(2, 1, vec![0, 0, 0]).unwrap();
        assert!(!b.contains(&[1, 1, 0]).unwrap());
        assert!(b.contains(&[1, 0, 0]).unwrap());
        assert!(b.contains(&[0, 0, 0]).unwrap());
        assert!(matches!(b.contains(&[0, 0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn bh_examples() {
        let f = sqrt_primes(2).unwrap();
        let spec = BohrHammingSpec::new(f.clone(), q("0.15"), q("0.5"), 0).unwrap();
        assert_eq!(spec.threshold_count(), 1);
        assert_eq!(bh_enumerate(&spec, w(0, 10)).members(), &[0, 4, 5, 7, 8, 10]);
        let shifted = BohrHammingSpec::new(f.clone(), q("0.01"), q("0.1"), 17).unwrap();
        assert_eq!(bh_contains(&shifted, 17), Verdict::Yes);
        let vacuous = BohrHammingSpec::new(f, q("0.01"), Q::one(), 0).unwrap();
        assert_eq!(bh_enumerate(&vacuous, w(-5, 5)).len(), 11);
    }

    #[test]
    fn sumset_examples() {
        let r = check_sumset_containment(&rational(&["1/5"]), q("0.2"), Q::one(), w(-20, 20), Guard::default()).unwrap();
        assert!(r.holds());
        let s = check_sumset_containment(
            &sqrt_primes(1).unwrap().into(),
            q("0.2"),
            q("0.5"),
            w(-200, 200),
            Guard::default(),
        )
        .unwrap();
        assert!(s.holds() && s.pairs_checked > 0);
    }

    #[test]
    fn cover_examples() {
        let f: Frequencies = sqrt_primes(1).unwrap().into();
        let z = vec![TorusPoint::from_ratio(q("1/2"))];
        let r = shifted_bh_cover(&f, &z, q("0.1"), q("0.5"), 10_000, w(-100, 100), Guard::default()).unwrap();
        assert_eq!(r.m, 6);
        assert!(r.holds());
        let zero = vec![TorusPoint::zero()];
        assert_eq!(shifted_bh_cover(&f, &zero, q("0.1"), q("0.5"), 10, w(-5, 5), Guard::default()).unwrap().m, 0);
        let alpha = f.points();
        assert_eq!(shifted_bh_cover(&f, &alpha, q("0.1"), q("0.5"), 10, w(-5, 5), Guard::default()).unwrap().m, 1);
    }

    #[test]
    fn csv_round_trip() {
        let spec = BohrSpec::new(sqrt_primes(1).unwrap(), q("0.15")).unwrap();
        let set = bohr_enumerate(&spec, w(0, 10));
        let mut buf = Vec::new();
        write_enumeration_csv(&mut buf, &spec.freq, 0, &set).unwrap();
        let (rows, bad) = verify_enumeration_csv(&buf[..], |n| bohr_contains(&spec, n)).unwrap();
        assert_eq!((rows, bad.len()), (11, 0));
        let (_, bad) = verify_enumeration_csv(&buf[..], |_| Verdict::Yes).unwrap();
        assert_eq!(bad.len(), 7);
    }

    #[test]
    fn eta_half_keeps_exact_half_out() {
        let spec = BohrSpec::new(rational(&["1/2"]), q("1/2")).unwrap();
        assert!(!spec.is_degenerate());
        assert_eq!(bohr_contains(&spec, 1), Verdict::No);
        assert_eq!(bohr_contains(&spec, 2), Verdict::Yes);
    }

    #[test]
    fn zero_is_always_member() {
        let spec = BohrSpec::new(sqrt_primes(3).unwrap(), q("1/1000")).unwrap();
        assert_eq!(bohr_contains(&spec, 0), Verdict::Yes);
        assert_eq!(spec.eta, q("0.001"));
    }
}
