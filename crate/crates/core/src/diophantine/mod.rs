//! Simultaneous inhomogeneous Diophantine approximation.
//!
//! [`kronecker_approximate`] finds `n` with `max_j ||n alpha_j - z_j|| < eps`.
//! The exhaustive strategy scans `0, 1, -1, 2, -2, ...` and is the reference;
//! the lattice strategy enumerates a closest-vector ball over growing bounds
//! and re-checks every candidate with the same guarded comparison, so both
//! return the same `n`.

mod lattice;

use std::collections::HashSet;

use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::torus::{q_str, Frequencies, Guard, Threshold, TorusPoint, Verdict, Q};
use crate::window::{spiral, spiral_rank, WindowedSet};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Exhaustive,
    Lattice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxQuery {
    pub freq: Frequencies,
    pub target: Vec<TorusPoint>,
    #[serde(with = "q_str")]
    pub eps: Q,
    pub search_bound: u64,
    #[serde(default)]
    pub strategy: Strategy,
    /// Exclude `n = 0`.
    #[serde(default)]
    pub nonzero: bool,
    #[serde(default)]
    pub guard: Guard,
}

impl ApproxQuery {
    pub fn new(freq: Frequencies, target: Vec<TorusPoint>, eps: Q, search_bound: u64) -> Result<Self> {
        let q = ApproxQuery {
            freq,
            target,
            eps,
            search_bound,
            strategy: Strategy::Exhaustive,
            nonzero: false,
            guard: Guard::default(),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eps.is_positive() {
            return Err(Error::invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if self.target.len() != self.freq.dim() {
            return Err(Error::Dimension {
                expected: self.freq.dim(),
                got: self.target.len(),
            });
        }
        if self.search_bound == 0 && self.nonzero {
            return Err(Error::invalid("search bound must be positive when n = 0 is excluded"));
        }
        if self.search_bound > i64::MAX as u64 / 2 {
            return Err(Error::invalid("search bound too large"));
        }
        Ok(())
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_guard(mut self, guard: Guard) -> Self {
        self.guard = guard;
        self
    }

    pub fn nonzero(mut self) -> Self {
        self.nonzero = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub n: i64,
    /// `||n alpha_j - z_j||` per coordinate.
    pub norms: Vec<f64>,
    pub strategy: Strategy,
}

/// A target vector with its threshold, ready for repeated evaluation.
pub(crate) struct Approximant {
    points: Vec<TorusPoint>,
    target: Vec<TorusPoint>,
    thr: Threshold,
    guard: Guard,
}

impl Approximant {
    pub(crate) fn new(points: Vec<TorusPoint>, target: Vec<TorusPoint>, eps: Q, guard: Guard) -> Result<Self> {
        Ok(Approximant {
            points,
            target,
            thr: Threshold::new(eps)?,
            guard,
        })
    }

    pub(crate) fn verdict(&self, n: i64) -> Verdict {
        self.points
            .iter()
            .zip(&self.target)
            .map(|(p, z)| (&p.mul_int(n) - z).norm().lt(&self.thr, self.guard))
            .fold(Verdict::Yes, Verdict::and)
    }

    pub(crate) fn norms(&self, n: i64) -> Vec<f64> {
        self.points
            .iter()
            .zip(&self.target)
            .map(|(p, z)| (&p.mul_int(n) - z).norm().value())
            .collect()
    }

    fn max_norm(&self, n: i64) -> f64 {
        self.norms(n).into_iter().fold(0.0, f64::max)
    }

    /// First `n` in spiral order with a definite `Yes`, skipping `skip`.
    fn scan(&self, bound: u64, skip: impl Fn(i64) -> bool) -> std::result::Result<i64, (i64, f64)> {
        let mut best = (0i64, f64::INFINITY);
        for n in spiral(bound) {
            if skip(n) {
                continue;
            }
            if self.verdict(n) == Verdict::Yes {
                return Ok(n);
            }
            let m = self.max_norm(n);
            if m < best.1 {
                best = (n, m);
            }
        }
        Err(best)
    }
}

pub fn kronecker_approximate(q: &ApproxQuery) -> Result<Solution> {
    q.validate()?;
    let app = Approximant::new(q.freq.points(), q.target.clone(), q.eps, q.guard)?;
    let skip = |n: i64| q.nonzero && n == 0;
    let found = match q.strategy {
        Strategy::Exhaustive => app.scan(q.search_bound, skip),
        Strategy::Lattice => match lattice_search(&app, q.eps, q.search_bound, &skip)? {
            Some(n) => Ok(n),
            None => app.scan(q.search_bound, skip),
        },
    };
    match found {
        Ok(n) => Ok(Solution {
            n,
            norms: app.norms(n),
            strategy: q.strategy,
        }),
        Err((best_n, best_norm)) => Err(Error::NotFound {
            bound: q.search_bound,
            best_n,
            best_norm,
        }),
    }
}

const LATTICE_CANDIDATE_CAP: usize = 4_000_000;

fn lattice_search(app: &Approximant, eps: Q, bound: u64, skip: &dyn Fn(i64) -> bool) -> Result<Option<i64>> {
    let d = app.points.len();
    let eps_f = eps.to_f64().unwrap_or(f64::NAN).min(0.5);
    let alpha: Vec<f64> = app.points.iter().map(TorusPoint::value).collect();
    let z: Vec<f64> = app.target.iter().map(TorusPoint::value).collect();
    let radius = ((d + 1) as f64 * (1.0 + 1e-6)).sqrt();
    let mut b = bound.min(16);
    loop {
        let mut rows = Vec::with_capacity(d + 1);
        let mut first = vec![1.0 / b.max(1) as f64];
        first.extend(alpha.iter().map(|a| a / eps_f));
        rows.push(first);
        for j in 0..d {
            let mut r = vec![0.0; d + 1];
            r[j + 1] = 1.0 / eps_f;
            rows.push(r);
        }
        let mut target = vec![0.0];
        target.extend(z.iter().map(|v| v / eps_f));
        let lat = lattice::Lattice::reduce(rows);
        let cands = lat.enumerate(&target, radius, LATTICE_CANDIDATE_CAP)?;
        let mut ns: Vec<i64> = cands
            .iter()
            .map(|c| c[0])
            .filter(|n| n.unsigned_abs() <= b && !skip(*n))
            .collect();
        ns.sort_by_key(|n| spiral_rank(*n));
        ns.dedup();
        if let Some(n) = ns.into_iter().find(|n| app.verdict(*n) == Verdict::Yes) {
            return Ok(Some(n));
        }
        if b >= bound {
            return Ok(None);
        }
        b = b.saturating_mul(8).min(bound);
    }
}

/// Mixed-radix index of `w` in `Z_k^d`, coordinate 0 most significant.
pub fn tuple_index(w: &[u32], k: u32) -> usize {
    w.iter().fold(0usize, |acc, &c| acc * k as usize + c as usize)
}

/// Inverse of [`tuple_index`].
pub fn index_tuple(mut idx: usize, k: u32, d: usize) -> Vec<u32> {
    let mut w = vec![0u32; d];
    for slot in w.iter_mut().rev() {
        *slot = (idx % k as usize) as u32;
        idx /= k as usize;
    }
    w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub w: Vec<u32>,
    pub n: i64,
    pub norms: Vec<f64>,
}

/// Injective map `w -> n_w` on `Z_k^d` with `||n_w alpha_j - w_j / k|| < eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub k: u32,
    pub d: usize,
    #[serde(with = "q_str")]
    pub eps: Q,
    /// Indexed by [`tuple_index`].
    pub entries: Vec<EmbeddingEntry>,
}

impl EmbeddingTable {
    pub fn n_of(&self, w: &[u32]) -> i64 {
        self.entries[tuple_index(w, self.k)].n
    }

    pub fn values(&self) -> Vec<i64> {
        self.entries.iter().map(|e| e.n).collect()
    }
}

/// Largest `k^d` accepted by [`embed_group`].
pub const EMBED_CAP: u64 = 4096;

/// Solves one Kronecker query per `w`, in index order, never reusing an
/// earlier `n`.
pub fn embed_group(freq: &Frequencies, k: u32, eps: Q, search_bound: u64, guard: Guard) -> Result<EmbeddingTable> {
    let d = freq.dim();
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if !eps.is_positive() {
        return Err(Error::invalid("eps must be positive"));
    }
    let size = (k as u64).checked_pow(d as u32).filter(|s| *s <= EMBED_CAP).ok_or_else(|| {
        Error::Cap(format!("k^d = {k}^{d} exceeds the embedding cap {EMBED_CAP}"))
    })?;
    let points = freq.points();
    let mut used = HashSet::new();
    let mut entries = Vec::with_capacity(size as usize);
    let mut failures = Vec::new();
    for idx in 0..size as usize {
        let w = index_tuple(idx, k, d);
        let target = w
            .iter()
            .map(|&c| TorusPoint::from_ratio(Q::new(c as i128, k as i128)))
            .collect();
        let app = Approximant::new(points.clone(), target, eps, guard)?;
        match app.scan(search_bound, |n| used.contains(&n)) {
            Ok(n) => {
                used.insert(n);
                entries.push(EmbeddingEntry {
                    norms: app.norms(n),
                    w,
                    n,
                });
            }
            Err(_) => failures.push(w),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Embedding { failures });
    }
    Ok(EmbeddingTable { k, d, eps, entries })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Translate {
    pub t: i64,
    pub count: usize,
}

/// Maximizes `|(A + t) ∩ F|` over all `t` with `F - t` inside the window of
/// `A`; ties go to the smallest `|t|`, positive first.
pub fn find_translate(a: &WindowedSet, f: &[i64]) -> Result<Translate> {
    let (Some(&fmin), Some(&fmax)) = (f.iter().min(), f.iter().max()) else {
        return Err(Error::invalid("F must be nonempty"));
    };
    let w = a.window();
    let t_lo = fmax as i128 - w.hi as i128;
    let t_hi = fmin as i128 - w.lo as i128;
    if t_lo > t_hi {
        return Err(Error::WindowTooSmall(format!(
            "F spans {} but the window {} has length {}",
            fmax as i128 - fmin as i128 + 1,
            w,
            w.len()
        )));
    }
    let mut mask = vec![false; w.len() as usize];
    for &n in a.members() {
        mask[(n - w.lo) as usize] = true;
    }
    let best = (t_lo as i64..=t_hi as i64)
        .into_par_iter()
        .map(|t| {
            let count = f.iter().filter(|&&x| mask[(x - t - w.lo) as usize]).count();
            (count, std::cmp::Reverse(spiral_rank(t)), t)
        })
        .max()
        .expect("nonempty range");
    Ok(Translate { t: best.2, count: best.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohr::sqrt_primes;
    use crate::torus::parse_ratio;
    use crate::window::Window;

    fn q(s: &str) -> Q {
        parse_ratio(s).unwrap()
    }

    fn sqrt2() -> Frequencies {
        sqrt_primes(1).unwrap().into()
    }

    fn solve(target: &str, eps: &str, strategy: Strategy, nonzero: bool) -> Result<Solution> {
        let mut query = ApproxQuery::new(sqrt2(), vec![target.parse().unwrap()], q(eps), 10_000)?.with_strategy(strategy);
        query.nonzero = nonzero;
        kronecker_approximate(&query)
    }

    #[test]
    fn worked_examples() {
        for s in [Strategy::Exhaustive, Strategy::Lattice] {
            assert_eq!(solve("0", "0.1", s, false).unwrap().n, 0);
            let six = solve("1/2", "0.05", s, false).unwrap();
            assert_eq!(six.n, 6);
            assert!((six.norms[0] - 0.0147186).abs() < 1e-6);
            assert_eq!(solve("0", "0.1", s, true).unwrap().n, 5);
            assert_eq!(solve("1/2", "0.1", s, false).unwrap().n, 1);
        }
    }

    #[test]
    fn not_found_reports_best() {
        let query = ApproxQuery::new(sqrt2(), vec![q("0").into_point()], q("1/1000000"), 10).unwrap().nonzero();
        match kronecker_approximate(&query) {
            Err(Error::NotFound { bound, best_n, best_norm }) => {
                assert_eq!(bound, 10);
                assert_eq!(best_n.abs(), 5);
                assert!((best_norm - 0.0710678).abs() < 1e-6);
            }
            other => panic!("{other:?}"),
        }
    }

    trait IntoPoint {
        fn into_point(self) -> TorusPoint;
    }

    impl IntoPoint for Q {
        fn into_point(self) -> TorusPoint {
            TorusPoint::from_ratio(self)
        }
    }

    #[test]
    fn strategies_agree_in_two_dimensions() {
        let f: Frequencies = sqrt_primes(2).unwrap().into();
        for (a, b, eps) in [("0.1", "0.7", "0.01"), ("0.5", "0.5", "0.003"), ("0.9", "0.2", "0.05")] {
            let target = vec![a.parse().unwrap(), b.parse().unwrap()];
            let base = ApproxQuery::new(f.clone(), target, q(eps), 100_000).unwrap();
            let ex = kronecker_approximate(&base);
            let la = kronecker_approximate(&base.clone().with_strategy(Strategy::Lattice));
            assert_eq!(ex.map(|s| s.n).ok(), la.map(|s| s.n).ok());
        }
    }

    #[test]
    fn embedding_examples() {
        let t = embed_group(&sqrt2(), 2, q("0.05"), 10_000, Guard::default()).unwrap();
        assert_eq!(t.values(), vec![0, 6]);
        let t = embed_group(&sqrt2(), 2, q("0.1"), 10_000, Guard::default()).unwrap();
        assert_eq!(t.n_of(&[1]), 1);
        let f2: Frequencies = sqrt_primes(2).unwrap().into();
        let t = embed_group(&f2, 2, q("0.1"), 10_000, Guard::default()).unwrap();
        let mut v = t.values();
        v.sort_unstable();
        v.dedup();
        assert_eq!(v.len(), 4);
        assert!(t.entries.iter().all(|e| e.norms.iter().all(|&x| x < 0.1)));
    }

    #[test]
    fn embedding_reports_failures() {
        match embed_group(&sqrt2(), 3, q("1/100000"), 5, Guard::default()) {
            Err(Error::Embedding { failures }) => assert_eq!(failures, vec![vec![1], vec![2]]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            embed_group(&sqrt2(), 5000, q("0.1"), 5, Guard::default()),
            Err(Error::Cap(_))
        ));
    }

    #[test]
    fn index_round_trip() {
        for idx in 0..27 {
            assert_eq!(tuple_index(&index_tuple(idx, 3, 3), 3), idx);
        }
        assert_eq!(index_tuple(1, 2, 3), vec![0, 0, 1]);
    }

    #[test]
    fn translate_examples() {
        let w = Window::new(-100, 100).unwrap();
        let all = WindowedSet::full(w);
        assert_eq!(find_translate(&all, &[1, 5, 9]).unwrap().count, 3);
        let evens = WindowedSet::new(w, w.iter().filter(|n| n % 2 == 0).collect(), "even").unwrap();
        let tr = find_translate(&evens, &[0, 2, 4]).unwrap();
        assert_eq!((tr.t, tr.count), (0, 3));
        let w3 = Window::new(-300, 300).unwrap();
        let threes = WindowedSet::new(w3, w3.iter().filter(|n| n % 3 == 0).collect(), "3Z").unwrap();
        let f: Vec<i64> = (0..9).collect();
        assert_eq!(find_translate(&threes, &f).unwrap().count, 3);
        let tiny = WindowedSet::full(Window::new(0, 3).unwrap());
        assert!(matches!(find_translate(&tiny, &f), Err(Error::WindowTooSmall(_))));
    }
}
