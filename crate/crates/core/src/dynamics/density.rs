//! Windowed density estimates, difference sets and a falsification harness
//! for `delta`-recurrence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bohr::{bohr_enumerate, sqrt_primes, BohrSpec};
use crate::torus::{q_str, Q};
use crate::window::{Window, WindowedSet};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    pub length: u64,
    pub max_count: u64,
    #[serde(with = "q_str")]
    pub density: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub estimates: Vec<BlockEstimate>,
    /// Block lengths longer than the window.
    pub skipped: Vec<u64>,
    /// Smallest estimate over the lengths used; `None` if all were skipped.
    #[serde(with = "opt_q")]
    pub summary: Option<Q>,
}

mod opt_q {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(q) => s.serialize_some(&q.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Q>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| crate::torus::parse_ratio(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// For each block length `k`, `max_n |A ∩ {n+1, ..., n+k}| / k` over all
/// blocks inside the window.
pub fn upper_banach_density(a: &WindowedSet, block_lengths: &[u64]) -> DensityReport {
    let w = a.window();
    let len = w.len() as usize;
    let mut prefix = vec![0u64; len + 1];
    let mut mask = vec![0u64; len];
    for &n in a.members() {
        mask[(n - w.lo) as usize] = 1;
    }
    for i in 0..len {
        prefix[i + 1] = prefix[i] + mask[i];
    }
    let mut estimates = Vec::new();
    let mut skipped = Vec::new();
    for &k in block_lengths {
        if k == 0 || k as usize > len {
            skipped.push(k);
            continue;
        }
        let k = k as usize;
        let max_count = (0..=len - k).map(|s| prefix[s + k] - prefix[s]).max().unwrap_or(0);
        estimates.push(BlockEstimate {
            length: k as u64,
            max_count,
            density: Q::new(max_count as i128, k as i128),
        });
    }
    let summary = estimates.iter().map(|e| e.density).min();
    DensityReport {
        estimates,
        skipped,
        summary,
    }
}

/// `A - A` on the window `[-(hi - lo), hi - lo]`.
pub fn difference_set(a: &WindowedSet) -> WindowedSet {
    let w = a.window();
    let span = w.hi - w.lo;
    let out = Window::symmetric(span);
    let mut hit = vec![false; out.len() as usize];
    let m = a.members();
    for &x in m {
        for &y in m {
            hit[(x - y + span) as usize] = true;
        }
    }
    let members = out.iter().filter(|n| hit[(n + span) as usize]).collect();
    WindowedSet::new(out, members, format!("difference_set({})", a.source())).expect("inside window")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Falsification {
    pub index: usize,
    pub source: String,
    #[serde(with = "q_str")]
    pub density: Q,
}

/// The first corpus set with windowed density above `delta` whose difference
/// set misses `S`.
pub fn delta_recurrence_falsify(s: &WindowedSet, delta: Q, corpus: &[WindowedSet]) -> Option<Falsification> {
    corpus.iter().enumerate().find_map(|(index, a)| {
        let density = a.density();
        if density <= delta {
            return None;
        }
        let diff = difference_set(a);
        let meets = s.members().iter().any(|n| diff.contains(*n));
        (!meets).then(|| Falsification {
            index,
            source: a.source().to_string(),
            density,
        })
    })
}

/// Progressions, Bohr sets, seeded random dense sets and quadratic-residue
/// sets on `window`.
pub fn standard_corpus(window: Window, seed: u64) -> Result<Vec<WindowedSet>> {
    let mut out = Vec::new();
    for q in 2..=6i64 {
        for a in 0..q.min(2) {
            let m = window.iter().filter(|n| (n - a).rem_euclid(q) == 0).collect();
            out.push(WindowedSet::new(window, m, format!("progression({a} mod {q})"))?);
        }
    }
    for eta in [Q::new(1, 10), Q::new(1, 4)] {
        let mut set = bohr_enumerate(&BohrSpec::new(sqrt_primes(1)?, eta)?, window);
        set = WindowedSet::new(window, set.members().to_vec(), format!("bohr(sqrt2, {eta})"))?;
        out.push(set);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in [0.3, 0.5] {
        let m = window.iter().filter(|_| rng.gen_bool(p)).collect();
        out.push(WindowedSet::new(window, m, format!("random(p={p}, seed={seed})"))?);
    }
    for p in [5i64, 7, 11, 13] {
        let residues: Vec<i64> = (1..p).map(|x| x * x % p).collect();
        let m = window.iter().filter(|n| residues.contains(&n.rem_euclid(p))).collect();
        out.push(WindowedSet::new(window, m, format!("quadratic_residues(mod {p})"))?);
    }
    if out.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(w: Window, f: impl Fn(i64) -> bool, name: &str) -> WindowedSet {
        WindowedSet::new(w, w.iter().filter(|n| f(*n)).collect(), name).unwrap()
    }

    #[test]
    fn full_window_density() {
        let w = Window::new(-50, 50).unwrap();
        let r = upper_banach_density(&WindowedSet::full(w), &[1, 10, 101, 500]);
        assert_eq!(r.summary, Some(Q::from_integer(1)));
        assert_eq!(r.skipped, vec![500]);
        let d = difference_set(&WindowedSet::full(w));
        assert_eq!(d.len() as u64, d.window().len());
    }

    #[test]
    fn multiples_of_three() {
        let w = Window::new(-3000, 3000).unwrap();
        let r = upper_banach_density(&set(w, |n| n % 3 == 0, "3Z"), &[100]);
        let v = crate::torus::q_to_f64(&r.summary.unwrap());
        assert!((v - 1.0 / 3.0).abs() <= 0.01);
    }

    #[test]
    fn parity_falsifies() {
        let w = Window::new(-100, 100).unwrap();
        let evens = set(w, |n| n % 2 == 0, "evens");
        let odds = set(Window::new(-200, 200).unwrap(), |n| n % 2 != 0, "odds");
        let hit = delta_recurrence_falsify(&odds, Q::new(2, 5), std::slice::from_ref(&evens)).unwrap();
        assert_eq!(hit.index, 0);
        assert!(difference_set(&evens).members().iter().all(|n| n % 2 == 0));
        assert!(delta_recurrence_falsify(&evens, Q::new(2, 5), std::slice::from_ref(&evens)).is_none());
    }

    #[test]
    fn corpus_is_seeded() {
        let w = Window::new(-100, 100).unwrap();
        assert_eq!(standard_corpus(w, 7).unwrap(), standard_corpus(w, 7).unwrap());
        assert_ne!(standard_corpus(w, 7).unwrap(), standard_corpus(w, 8).unwrap());
    }
}
