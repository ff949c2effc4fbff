//! Hamming-ball pigeonhole checks on `Z_k^d` and the witness pipeline that
//! turns an embedding of `Z_k^d` into integers into a Bohr-Hamming return.
//!
//! Group elements are indexed by [`tuple_index`] (coordinate 0 most
//! significant); a subset of `Z_k^d` with `k^d <= 64` is a `u64` bitmask in
//! that indexing.

use num_traits::{One, Signed, ToPrimitive};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bohr::{bh_contains, threshold_count, BohrHammingSpec};
use crate::diophantine::{embed_group, find_translate, index_tuple, tuple_index};
use crate::torus::{q_str, Frequencies, Guard, Threshold, TorusPoint, Verdict, Q};
use crate::window::WindowedSet;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Mode {
    Exhaustive,
    Sampled { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KleitmanInstance {
    pub k: u32,
    pub d: u32,
    #[serde(with = "q_str")]
    pub delta: Q,
    pub r: u32,
    #[serde(flatten)]
    pub mode: Mode,
}

/// Default bound on `k^d` for exhaustive subset iteration.
pub const DEFAULT_EXHAUSTIVE_CAP: u64 = 16;
/// Largest `k^d` accepted in sampled mode.
pub const SAMPLED_CAP: u64 = 4096;

impl KleitmanInstance {
    pub fn group_size(&self) -> Result<u64> {
        (self.k as u64)
            .checked_pow(self.d)
            .ok_or_else(|| Error::Cap(format!("{}^{} overflows", self.k, self.d)))
    }

    /// `ceil(delta k^d)`.
    pub fn min_size(&self) -> Result<u64> {
        let n = self.group_size()?;
        let t = self.delta * Q::from_integer(n as i128);
        Ok(t.ceil().to_integer().max(0) as u64)
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 || self.d == 0 {
            return Err(Error::invalid("need k >= 2 and d >= 1"));
        }
        if self.r > self.d {
            return Err(Error::invalid(format!("radius {} exceeds dimension {}", self.r, self.d)));
        }
        if self.delta.is_negative() || self.delta > Q::one() {
            return Err(Error::invalid(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum KleitmanVerdict {
    Holds,
    Counterexample {
        set: Vec<Vec<u32>>,
        center: Vec<u32>,
        #[serde(skip_serializing_if = "Option::is_none")]
        mask: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KleitmanReport {
    pub k: u32,
    pub d: u32,
    #[serde(with = "q_str")]
    pub delta: Q,
    pub r: u32,
    pub min_size: u64,
    /// Subsets considered: all qualifying subsets (exhaustive) or trials.
    pub subsets: u128,
    pub verdict: KleitmanVerdict,
}

impl KleitmanReport {
    pub fn holds(&self) -> bool {
        self.verdict == KleitmanVerdict::Holds
    }
}

struct Group {
    n: usize,
    tuples: Vec<Vec<u32>>,
    // diff[i][j] = index of tuples[i] - tuples[j]
    diff: Vec<Vec<u16>>,
}

impl Group {
    fn new(k: u32, d: usize) -> Self {
        let n = (k as usize).pow(d as u32);
        let tuples: Vec<Vec<u32>> = (0..n).map(|i| index_tuple(i, k, d)).collect();
        let diff = tuples
            .iter()
            .map(|a| {
                tuples
                    .iter()
                    .map(|b| {
                        let w: Vec<u32> = a.iter().zip(b).map(|(x, y)| (x + k - y) % k).collect();
                        tuple_index(&w, k) as u16
                    })
                    .collect()
            })
            .collect();
        Group { n, tuples, diff }
    }

    fn hamming(&self, i: usize, j: usize) -> usize {
        self.tuples[i].iter().zip(&self.tuples[j]).filter(|(a, b)| a != b).count()
    }

    fn balls(&self, r: usize) -> Vec<u64> {
        (0..self.n)
            .map(|x| (0..self.n).filter(|&y| self.hamming(x, y) <= r).fold(0u64, |m, y| m | 1 << y))
            .collect()
    }

    fn diff_mask(&self, mask: u64) -> u64 {
        let mut out = 0u64;
        let mut a = mask;
        while a != 0 {
            let i = a.trailing_zeros() as usize;
            a &= a - 1;
            let mut b = mask;
            while b != 0 {
                let j = b.trailing_zeros() as usize;
                b &= b - 1;
                if i != j {
                    out |= 1 << self.diff[i][j];
                }
            }
        }
        out
    }

    fn members(&self, mask: u64) -> Vec<Vec<u32>> {
        (0..self.n).filter(|i| mask >> i & 1 == 1).map(|i| self.tuples[i].clone()).collect()
    }
}

fn binomial_tail(n: u64, m: u64) -> u128 {
    let mut c: u128 = 1;
    let mut total = 0u128;
    for i in 0..=n {
        if i > 0 {
            c = c * (n - i + 1) as u128 / i as u128;
        }
        if i >= m {
            total += c;
        }
    }
    total
}

/// Checks that every `A` with `|A| >= ceil(delta k^d)` has distinct
/// `a, b` with `a - b` in `U_r(x)`, for every center `x`.
pub fn kleitman_check(inst: &KleitmanInstance, exhaustive_cap: u64) -> Result<KleitmanReport> {
    inst.validate()?;
    let n = inst.group_size()?;
    let min_size = inst.min_size()?;
    match inst.mode {
        Mode::Exhaustive => {
            if n > exhaustive_cap.min(63) {
                return Err(Error::Cap(format!(
                    "k^d = {n} exceeds the exhaustive cap {}; use sampled mode",
                    exhaustive_cap.min(63)
                )));
            }
            let g = Group::new(inst.k, inst.d as usize);
            let balls = g.balls(inst.r as usize);
            let hit = (0..1u64 << n)
                .into_par_iter()
                .filter(|m| m.count_ones() as u64 >= min_size)
                .find_map_first(|mask| {
                    let dm = g.diff_mask(mask);
                    balls.iter().position(|b| dm & b == 0).map(|x| (mask, x))
                });
            Ok(KleitmanReport {
                k: inst.k,
                d: inst.d,
                delta: inst.delta,
                r: inst.r,
                min_size,
                subsets: binomial_tail(n, min_size),
                verdict: match hit {
                    None => KleitmanVerdict::Holds,
                    Some((mask, x)) => KleitmanVerdict::Counterexample {
                        set: g.members(mask),
                        center: g.tuples[x].clone(),
                        mask: Some(mask),
                    },
                },
            })
        }
        Mode::Sampled { trials, seed } => {
            if n > SAMPLED_CAP {
                return Err(Error::Cap(format!("k^d = {n} exceeds the sampled cap {SAMPLED_CAP}")));
            }
            let k = inst.k;
            let d = inst.d as usize;
            let tuples: Vec<Vec<u32>> = (0..n as usize).map(|i| index_tuple(i, k, d)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..n as usize).collect();
            for _ in 0..trials {
                order.shuffle(&mut rng);
                let mut set: Vec<usize> = order[..min_size as usize].to_vec();
                set.sort_unstable();
                let mut diffs = vec![false; n as usize];
                for &i in &set {
                    for &j in &set {
                        if i != j {
                            let w: Vec<u32> = tuples[i].iter().zip(&tuples[j]).map(|(x, y)| (x + k - y) % k).collect();
                            diffs[tuple_index(&w, k)] = true;
                        }
                    }
                }
                let diff_list: Vec<&Vec<u32>> = (0..n as usize).filter(|&z| diffs[z]).map(|z| &tuples[z]).collect();
                let bad = tuples.iter().find(|x| {
                    !diff_list
                        .iter()
                        .any(|z| z.iter().zip(x.iter()).filter(|(a, b)| a != b).count() <= inst.r as usize)
                });
                if let Some(x) = bad {
                    return Ok(KleitmanReport {
                        k: inst.k,
                        d: inst.d,
                        delta: inst.delta,
                        r: inst.r,
                        min_size,
                        subsets: trials as u128,
                        verdict: KleitmanVerdict::Counterexample {
                            set: set.iter().map(|&i| tuples[i].clone()).collect(),
                            center: x.clone(),
                            mask: None,
                        },
                    });
                }
            }
            Ok(KleitmanReport {
                k: inst.k,
                d: inst.d,
                delta: inst.delta,
                r: inst.r,
                min_size,
                subsets: trials as u128,
                verdict: KleitmanVerdict::Holds,
            })
        }
    }
}

/// Smallest `d <= max_d` (with `d >= r`) at which the exhaustive check holds.
pub fn empirical_dimension(k: u32, delta: Q, r: u32, max_d: u32, exhaustive_cap: u64) -> Result<Option<u32>> {
    for d in r.max(1)..=max_d {
        let inst = KleitmanInstance {
            k,
            d,
            delta,
            r,
            mode: Mode::Exhaustive,
        };
        if (k as u64).checked_pow(d).is_none_or(|n| n > exhaustive_cap) {
            break;
        }
        if kleitman_check(&inst, exhaustive_cap)?.holds() {
            return Ok(Some(d));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Precondition,
    Embedding,
    Translate,
    Pair,
    Verification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HammingWitness {
    /// `a = n_w - t` and `b = n_w' - t`, both in `A`.
    pub a: i64,
    pub b: i64,
    pub m: i64,
    pub t: i64,
    pub n_w: i64,
    pub n_w_prime: i64,
    pub w: Vec<u32>,
    pub w_prime: Vec<u32>,
    pub w_m: Vec<u32>,
    pub radius: usize,
    pub passing_indices: Vec<usize>,
    /// `||(a - b - m) alpha_j||` per coordinate.
    pub norms: Vec<f64>,
    /// Three-term triangle bound for each passing index.
    pub chain_bounds: Vec<f64>,
    pub bh_verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum WitnessOutcome {
    Witness(HammingWitness),
    Failure { stage: Stage, detail: String },
}

fn fail(stage: Stage, detail: impl Into<String>) -> Result<WitnessOutcome> {
    Ok(WitnessOutcome::Failure {
        stage,
        detail: detail.into(),
    })
}

/// Embeds `Z_k^d` at quality `eps/3`, rounds `m alpha` to `w^(m)`, slides
/// the embedded set into `A`, and finds the first pair `(w, w')` with
/// `w - w'` in `U_r(w^(m))`, `r = floor(d eps)`.
pub fn hamming_recurrence_witness(
    freq: &Frequencies,
    eps: Q,
    m: i64,
    a: &WindowedSet,
    k: u32,
    search_bound: u64,
    guard: Guard,
) -> Result<WitnessOutcome> {
    let d = freq.dim();
    if !eps.is_positive() || eps > Q::one() {
        return fail(Stage::Precondition, format!("eps must lie in (0, 1], got {eps}"));
    }
    if Q::from_integer(k as i128) * eps <= Q::from_integer(3) {
        return fail(Stage::Precondition, format!("need k > 3/eps, got k={k}, eps={eps}"));
    }
    let third = eps / Q::from_integer(3);
    let table = match embed_group(freq, k, third, search_bound, guard) {
        Ok(t) => t,
        Err(e @ (Error::Embedding { .. } | Error::Cap(_))) => return fail(Stage::Embedding, e.to_string()),
        Err(e) => return Err(e),
    };
    let points = freq.points();
    let w_m: Vec<u32> = points.iter().map(|p| p.mul_int(m).nearest_multiple(k as u64) as u32).collect();
    let need = threshold_count(eps, d);
    let radius = d - need;
    let values = table.values();
    let tr = match find_translate(a, &values) {
        Ok(t) => t,
        Err(e @ Error::WindowTooSmall(_)) => return fail(Stage::Translate, e.to_string()),
        Err(e) => return Err(e),
    };
    let mut inside: Vec<usize> = (0..values.len()).filter(|&i| a.contains(values[i] - tr.t)).collect();
    inside.sort_by_key(|&i| values[i]);
    let agree = |x: &[u32], y: &[u32]| {
        (0..d).filter(|&j| (x[j] + k - y[j]) % k == w_m[j]).collect::<Vec<_>>()
    };
    let pair = inside.iter().find_map(|&i| {
        inside.iter().find_map(|&j| {
            if i == j {
                return None;
            }
            let pass = agree(&table.entries[i].w, &table.entries[j].w);
            (pass.len() + radius >= d).then_some((i, j, pass))
        })
    });
    let Some((i, j, passing)) = pair else {
        return fail(
            Stage::Pair,
            format!("no pair among {} translated embedding points (count {})", inside.len(), tr.count),
        );
    };
    let (ei, ej) = (&table.entries[i], &table.entries[j]);
    let x = ei.n - ej.n - m;
    let thr = Threshold::new(eps)?;
    let norms: Vec<f64> = points.iter().map(|p| p.mul_int(x).norm().value()).collect();
    let direct: Vec<Verdict> = passing.iter().map(|&jj| points[jj].mul_int(x).norm().lt(&thr, guard)).collect();
    let chain_bounds: Vec<f64> = passing
        .iter()
        .map(|&jj| {
            let wm = TorusPoint::from_ratio(Q::new(w_m[jj] as i128, k as i128));
            ei.norms[jj] + ej.norms[jj] + (&points[jj].mul_int(m) - &wm).norm().value()
        })
        .collect();
    let mut spec = BohrHammingSpec::new(freq.clone(), eps, eps, m)?;
    spec.guard = guard;
    let bh_verdict = bh_contains(&spec, ei.n - ej.n);
    let witness = HammingWitness {
        a: ei.n - tr.t,
        b: ej.n - tr.t,
        m,
        t: tr.t,
        n_w: ei.n,
        n_w_prime: ej.n,
        w: ei.w.clone(),
        w_prime: ej.w.clone(),
        w_m,
        radius,
        passing_indices: passing,
        norms,
        chain_bounds,
        bh_verdict,
    };
    let eps_f = eps.to_f64().unwrap_or(f64::NAN);
    let chain_ok = witness.chain_bounds.iter().all(|&c| c < eps_f);
    if direct.iter().any(|v| *v != Verdict::Yes) || !chain_ok || witness.passing_indices.len() < need {
        return fail(Stage::Verification, format!("pair ({}, {}) fails the direct check", witness.a, witness.b));
    }
    Ok(WitnessOutcome::Witness(witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohr::sqrt_primes;
    use crate::window::Window;

    fn check(k: u32, d: u32, delta: Q, r: u32) -> KleitmanReport {
        kleitman_check(
            &KleitmanInstance {
                k,
                d,
                delta,
                r,
                mode: Mode::Exhaustive,
            },
            DEFAULT_EXHAUSTIVE_CAP,
        )
        .unwrap()
    }

    fn counterexample(rep: &KleitmanReport) -> Option<(u64, Vec<u32>)> {
        match &rep.verdict {
            KleitmanVerdict::Counterexample { mask, center, .. } => Some((mask.unwrap(), center.clone())),
            KleitmanVerdict::Holds => None,
        }
    }

    #[test]
    fn exhaustive_matches_reference() {
        let half = Q::new(1, 2);
        let g = |i: usize, k: u32, d: usize| index_tuple(i, k, d);
        assert_eq!(counterexample(&check(2, 4, half, 1)), Some((255, g(8, 2, 4))));
        assert!(check(2, 4, half, 2).holds());
        assert_eq!(counterexample(&check(2, 3, half, 1)), Some((15, g(4, 2, 3))));
        assert_eq!(counterexample(&check(2, 2, Q::new(1, 4), 1)), Some((1, g(0, 2, 2))));
        assert_eq!(counterexample(&check(2, 4, half, 0)), Some((255, g(0, 2, 4))));
        assert!(check(3, 2, half, 1).holds());
        assert!(check(2, 3, half, 2).holds());
        assert_eq!(counterexample(&check(2, 2, half, 1)), Some((3, g(2, 2, 2))));
        assert!(check(2, 4, Q::new(3, 4), 1).holds());
    }

    #[test]
    fn cap_directs_to_sampling() {
        let inst = KleitmanInstance {
            k: 3,
            d: 3,
            delta: Q::new(1, 2),
            r: 1,
            mode: Mode::Exhaustive,
        };
        assert!(matches!(kleitman_check(&inst, 16), Err(Error::Cap(_))));
        let sampled = KleitmanInstance {
            mode: Mode::Sampled { trials: 20, seed: 3 },
            ..inst
        };
        let a = kleitman_check(&sampled, 16).unwrap();
        assert_eq!(a, kleitman_check(&sampled, 16).unwrap());
    }

    #[test]
    fn sampled_finds_singleton_counterexample() {
        let inst = KleitmanInstance {
            k: 2,
            d: 2,
            delta: Q::new(1, 4),
            r: 1,
            mode: Mode::Sampled { trials: 1, seed: 0 },
        };
        assert!(!kleitman_check(&inst, 16).unwrap().holds());
    }

    #[test]
    fn empirical_dimension_k2() {
        assert_eq!(empirical_dimension(2, Q::new(1, 2), 2, 4, 16).unwrap(), Some(2));
        assert_eq!(empirical_dimension(2, Q::new(1, 2), 1, 4, 16).unwrap(), None);
    }

    #[test]
    fn tail_counts() {
        assert_eq!(binomial_tail(4, 0), 16);
        assert_eq!(binomial_tail(16, 8), 39203);
    }

    #[test]
    fn witness_pipeline() {
        let f: Frequencies = sqrt_primes(2).unwrap().into();
        let w = Window::new(-2000, 2000).unwrap();
        let all = WindowedSet::full(w);
        for m in [0, 3, -7] {
            match hamming_recurrence_witness(&f, Q::new(9, 10), m, &all, 4, 100_000, Guard::default()).unwrap() {
                WitnessOutcome::Witness(wit) => {
                    assert_ne!(wit.a, wit.b);
                    assert_eq!(wit.bh_verdict, Verdict::Yes);
                    assert!(all.contains(wit.a) && all.contains(wit.b));
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn witness_failures_are_staged() {
        let f: Frequencies = sqrt_primes(2).unwrap().into();
        let w = Window::new(-2000, 2000).unwrap();
        let all = WindowedSet::full(w);
        let pre = hamming_recurrence_witness(&f, Q::new(1, 2), 0, &all, 4, 1000, Guard::default()).unwrap();
        assert!(matches!(pre, WitnessOutcome::Failure { stage: Stage::Precondition, .. }));
        let tiny = WindowedSet::full(Window::new(0, 2).unwrap());
        let tr = hamming_recurrence_witness(&f, Q::new(9, 10), 0, &tiny, 4, 100_000, Guard::default()).unwrap();
        assert!(matches!(tr, WitnessOutcome::Failure { stage: Stage::Translate, .. }));
        let sparse = WindowedSet::new(w, vec![0], "{0}").unwrap();
        let pr = hamming_recurrence_witness(&f, Q::new(9, 10), 0, &sparse, 4, 100_000, Guard::default()).unwrap();
        assert!(matches!(pr, WitnessOutcome::Failure { stage: Stage::Pair, .. }));
    }
}
