//! Finite windows of `Z` and subsets confined to them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::torus::{Verdict, Q};
use crate::{Error, Result};

/// The integer interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::invalid(format!("window lower end {lo} exceeds upper end {hi}")));
        }
        Ok(Window { lo, hi })
    }

    /// `[-n, n]`.
    pub fn symmetric(n: i64) -> Self {
        Window { lo: -n.abs(), hi: n.abs() }
    }

    pub fn len(&self) -> u64 {
        (self.hi as i128 - self.lo as i128 + 1) as u64
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        self.lo <= n && n <= self.hi
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<i64> {
        self.lo..=self.hi
    }

    /// Members in the order `0, 1, -1, 2, -2, ...`, restricted to the window.
    pub fn spiral(&self) -> impl Iterator<Item = i64> + '_ {
        let reach = self.lo.unsigned_abs().max(self.hi.unsigned_abs());
        spiral(reach).filter(move |n| self.contains(*n))
    }
}

/// `0, 1, -1, 2, -2, ...` up to `|n| <= reach`.
pub fn spiral(reach: u64) -> impl Iterator<Item = i64> {
    let reach = reach.min(i64::MAX as u64) as i64;
    std::iter::once(0).chain((1..=reach).flat_map(|m| [m, -m]))
}

/// Position of `n` in the spiral order.
pub fn spiral_rank(n: i64) -> u64 {
    let m = n.unsigned_abs();
    if n > 0 {
        2 * m - 1
    } else {
        2 * m
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("window {s:?} is not of the form lo:hi")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<i64>()
                .map_err(|e| Error::Parse(format!("window bound {t:?}: {e}")))
        };
        Window::new(parse(lo)?, parse(hi)?)
    }
}

/// A finite subset of a [`Window`], with boundary cases that could not be
/// decided kept apart from the members.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowedSet {
    window: Window,
    members: Vec<i64>,
    #[serde(default)]
    ambiguous: Vec<i64>,
    source: String,
}

impl WindowedSet {
    pub fn new(window: Window, members: Vec<i64>, source: impl Into<String>) -> Result<Self> {
        Self::with_ambiguous(window, members, Vec::new(), source)
    }

    pub fn with_ambiguous(
        window: Window,
        mut members: Vec<i64>,
        mut ambiguous: Vec<i64>,
        source: impl Into<String>,
    ) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        ambiguous.sort_unstable();
        ambiguous.dedup();
        if let Some(n) = members.iter().chain(&ambiguous).find(|n| !window.contains(**n)) {
            return Err(Error::invalid(format!("{n} lies outside window {window}")));
        }
        if ambiguous.iter().any(|n| members.binary_search(n).is_ok()) {
            return Err(Error::invalid("a value cannot be both a member and ambiguous"));
        }
        Ok(WindowedSet {
            window,
            members,
            ambiguous,
            source: source.into(),
        })
    }

    /// Every integer of the window.
    pub fn full(window: Window) -> Self {
        WindowedSet {
            window,
            members: window.iter().collect(),
            ambiguous: Vec::new(),
            source: "all".into(),
        }
    }

    /// Evaluates `pred` at every point of the window in parallel.
    pub fn from_predicate<F>(window: Window, source: impl Into<String>, pred: F) -> Self
    where
        F: Fn(i64) -> Verdict + Sync,
    {
        let verdicts: Vec<(i64, Verdict)> = window.iter().into_par_iter().map(|n| (n, pred(n))).collect();
        let mut members = Vec::new();
        let mut ambiguous = Vec::new();
        for (n, v) in verdicts {
            match v {
                Verdict::Yes => members.push(n),
                Verdict::Ambiguous => ambiguous.push(n),
                Verdict::No => {}
            }
        }
        WindowedSet {
            window,
            members,
            ambiguous,
            source: source.into(),
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn members(&self) -> &[i64] {
        &self.members
    }

    pub fn ambiguous(&self) -> &[i64] {
        &self.ambiguous
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, n: i64) -> bool {
        self.members.binary_search(&n).is_ok()
    }

    /// `|members| / |window|`, exactly.
    pub fn density(&self) -> Q {
        Q::new(self.members.len() as i128, self.window.len() as i128)
    }

    /// Members sorted by `(|n|, n > 0 first)`.
    pub fn spiral_members(&self) -> Vec<i64> {
        let mut v = self.members.clone();
        v.sort_by_key(|n| spiral_rank(*n));
        v
    }

    pub fn restrict(&self, window: Window) -> WindowedSet {
        let keep = |v: &[i64]| v.iter().copied().filter(|n| window.contains(*n)).collect();
        WindowedSet {
            window,
            members: keep(&self.members),
            ambiguous: keep(&self.ambiguous),
            source: self.source.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_window() {
        assert_eq!("-3:7".parse::<Window>().unwrap(), Window { lo: -3, hi: 7 });
        assert!("5:1".parse::<Window>().is_err());
        assert!("5".parse::<Window>().is_err());
        assert_eq!(Window::symmetric(2).to_string(), "-2:2");
    }

    #[test]
    fn spiral_order() {
        let w = Window::new(-2, 3).unwrap();
        assert_eq!(w.spiral().collect::<Vec<_>>(), vec![0, 1, -1, 2, -2, 3]);
        let right = Window::new(4, 6).unwrap();
        assert_eq!(right.spiral().collect::<Vec<_>>(), vec![4, 5, 6]);
        for n in -5..=5 {
            assert_eq!(spiral(5).position(|m| m == n).unwrap() as u64, spiral_rank(n));
        }
    }

    #[test]
    fn windowed_set_validation() {
        let w = Window::new(0, 10).unwrap();
        let s = WindowedSet::new(w, vec![5, 1, 5], "x").unwrap();
        assert_eq!(s.members(), &[1, 5]);
        assert!(WindowedSet::new(w, vec![11], "x").is_err());
        assert_eq!(s.density(), Q::new(2, 11));
    }

    #[test]
    fn predicate_is_ordered() {
        let w = Window::new(-10, 10).unwrap();
        let s = WindowedSet::from_predicate(w, "even", |n| Verdict::from_bool(n % 2 == 0));
        assert_eq!(s.len(), 11);
        assert!(s.members().windows(2).all(|p| p[0] < p[1]));
    }
}
