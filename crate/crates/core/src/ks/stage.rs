//! One refinement step of the staged construction: independent points in the
//! current intervals, the tables `S_{psi,k}`, finite selections and the
//! shrunk child intervals.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cantor::{ClosedArc, IntervalFamily};
use super::setspec::SetSpec;
use crate::bohr::{count_verdict, threshold_count};
use crate::diophantine::{index_tuple, tuple_index};
use crate::torus::{
    char_distance, hex_u128, make_independent_frequencies_with, torus_norm, FrequencyVector, Guard, OpenArc,
    TorusPoint, Verdict, DEFAULT_PRECISION_BITS, Q,
};
use crate::window::{Window, WindowedSet};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Upper bound on `|K_k|`.
    pub max_points: usize,
    /// Full enumeration of `psi` when `k <= full_enum_k` and `|K_k| <= full_enum_points`.
    pub full_enum_k: u32,
    pub full_enum_points: usize,
    /// Random `psi` drawn per stage otherwise.
    pub psi_samples: usize,
    /// Size of each `S'_{psi,k}`.
    pub selection_cap: usize,
    pub r_cap: u32,
    pub expand_cap: usize,
    /// Per-stage branching; by default each stage uses the largest count
    /// keeping `|K_k| <= max_points`.
    pub branching: Option<Vec<u32>>,
    pub exclude_zero: bool,
    /// Half-width of the window used by the recurrence probe.
    pub probe_reach: i64,
    pub precision_bits: u32,
    pub seed: u64,
    pub guard: Guard,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_points: 4,
            full_enum_k: 4,
            full_enum_points: 4,
            psi_samples: 64,
            selection_cap: 8,
            r_cap: 4,
            expand_cap: 64,
            branching: None,
            exclude_zero: true,
            probe_reach: 200,
            precision_bits: DEFAULT_PRECISION_BITS,
            seed: 0,
            guard: Guard::default(),
        }
    }
}

impl Caps {
    pub fn validate(&self) -> Result<()> {
        if self.max_points == 0 || self.selection_cap == 0 || self.r_cap == 0 || self.expand_cap == 0 {
            return Err(Error::invalid("caps must be positive"));
        }
        if self.max_points > 16 {
            return Err(Error::Cap(format!("max_points {} exceeds 16", self.max_points)));
        }
        Ok(())
    }

    fn branching_for(&self, stage: usize, parents: usize) -> Result<u32> {
        let b = match &self.branching {
            Some(list) => *list
                .get(stage - 1)
                .ok_or_else(|| Error::invalid(format!("no branching given for stage {stage}")))?,
            None => (self.max_points / parents.max(1)).max(1) as u32,
        };
        if b == 0 {
            return Err(Error::invalid("branching must be positive"));
        }
        if parents * b as usize > self.max_points {
            return Err(Error::Cap(format!(
                "stage {stage} would hold {} points, above max_points = {}",
                parents * b as usize,
                self.max_points
            )));
        }
        Ok(b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiEntry {
    /// Index into `Lambda_k` for each point of `K_k`.
    pub psi: Vec<u32>,
    pub window_count: u64,
    pub ambiguous: u64,
    pub selection: Vec<i64>,
}

impl PsiEntry {
    pub fn is_gap(&self) -> bool {
        self.selection.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PsiEnumeration {
    Full,
    Sampled { samples: usize, seed: u64 },
}

/// `4 * 355 * k * nmax * (radius + err) < 113 * 2^128`, which implies
/// `2 pi nmax (radius + err) / 2^128 < 1 / (2k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyCertificate {
    pub nmax: u64,
    #[serde(with = "hex_u128")]
    pub radius: u128,
    #[serde(with = "hex_u128")]
    pub point_err: u128,
    /// `2 pi nmax (radius + err)` in turns.
    pub lipschitz: f64,
    pub limit: f64,
    pub holds: bool,
}

impl CauchyCertificate {
    pub fn check(k: u32, nmax: u64, radius: u128, point_err: u128) -> Self {
        let lhs = BigUint::from(4u32 * 355)
            * BigUint::from(k)
            * BigUint::from(nmax)
            * (BigUint::from(radius) + BigUint::from(point_err));
        let rhs = BigUint::from(113u32) << 128u32;
        let span = (radius as f64 + point_err as f64) / 2f64.powi(128);
        CauchyCertificate {
            nmax,
            radius,
            point_err,
            lipschitz: 2.0 * PI * nmax as f64 * span,
            limit: 1.0 / (2.0 * k as f64),
            holds: lhs < rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub k: u32,
    pub branching: u32,
    /// `K_k`, one point per child interval, in interval order.
    pub points: FrequencyVector,
    pub lambda: Vec<TorusPoint>,
    pub enumeration: PsiEnumeration,
    pub psi_table: Vec<PsiEntry>,
    /// `S'_k`, the union of all selections, sorted.
    pub selection: Vec<i64>,
    pub cauchy: CauchyCertificate,
    pub gaps: usize,
}

impl StageRecord {
    pub fn shrink_radius(&self) -> u128 {
        self.cauchy.radius
    }

    pub fn entry(&self, psi: &[u32]) -> Option<&PsiEntry> {
        self.psi_table.iter().find(|e| e.psi == psi)
    }
}

fn strictly_below(v: f64, thr: f64, guard: Guard) -> Verdict {
    let g = guard.as_f64().max(1e-15);
    if v + g < thr {
        Verdict::Yes
    } else if v > thr + g {
        Verdict::No
    } else {
        Verdict::Ambiguous
    }
}

fn root(i: u32, k: u32) -> TorusPoint {
    TorusPoint::from_ratio(Q::new(i as i128, k as i128))
}

/// Index of the root of `Lambda_k` within chord `1/(2k)` of `e(n x)`, if certified.
fn passing_root(x: &TorusPoint, n: i64, k: u32, guard: Guard) -> (Option<u32>, bool) {
    let t = x.mul_int(n);
    let i = t.nearest_multiple(k as u64) as u32;
    let v = char_distance(&(&t - &root(i, k)));
    match strictly_below(v, 1.0 / (2.0 * k as f64), guard) {
        Verdict::Yes => (Some(i), false),
        Verdict::Ambiguous => (None, true),
        Verdict::No => (None, false),
    }
}

/// Whether `n` lies in `Q_{f,k}`: the sup over each closed interval of
/// `|f(I) - e(n x)|` is below `1/k` on at least `(1 - 1/k) #I` intervals.
pub fn q_verdict(fam: &IntervalFamily, k: u32, f: &[u32], n: i64, guard: Guard) -> Result<Verdict> {
    if f.len() != fam.len() {
        return Err(Error::Dimension {
            expected: fam.len(),
            got: f.len(),
        });
    }
    let need = threshold_count(Q::new(1, k as i128), fam.len());
    let thr = 1.0 / k as f64;
    let verdicts = fam.intervals.iter().zip(f).map(|(arc, &fi)| {
        let at_center = &root(fi, k) - &arc.center_point().mul_int(n);
        let spread = n.unsigned_abs() as f64 * arc.radius_f64();
        let sup = 2.0 * (PI * (torus_norm(&at_center) + spread).min(0.5)).sin();
        strictly_below(sup, thr, guard)
    });
    Ok(count_verdict(verdicts, need))
}

pub fn q_set(fam: &IntervalFamily, k: u32, f: &[u32], s: &SetSpec, window: Window, guard: Guard) -> Result<WindowedSet> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    q_verdict(fam, k, f, 0, guard)?;
    Ok(WindowedSet::from_predicate(window, format!("q_set(k={k})"), |n| {
        if s.contains(n) {
            q_verdict(fam, k, f, n, guard).unwrap_or(Verdict::No)
        } else {
            Verdict::No
        }
    }))
}

fn sub_arcs(parent: &ClosedArc, b: u32) -> Vec<OpenArc> {
    let two_rho = BigUint::from(parent.radius) * 2u32;
    let left = parent.center.wrapping_sub(parent.radius);
    let cut = |j: u32| -> BigUint { &two_rho * BigUint::from(j) / BigUint::from(b) };
    (0..b)
        .map(|j| {
            let (a, z) = (cut(j), cut(j + 1));
            let len = u128::try_from(&z - &a).unwrap_or(u128::MAX);
            let off = u128::try_from(a).unwrap_or(0);
            OpenArc {
                lo: left.wrapping_add(off),
                len,
            }
        })
        .collect()
}

fn psi_candidates(k: u32, d: usize, caps: &Caps, required: &[Vec<u32>]) -> (Vec<Vec<u32>>, PsiEnumeration) {
    let full = k <= caps.full_enum_k
        && d <= caps.full_enum_points
        && (k as u128).checked_pow(d as u32).is_some_and(|c| c <= 1 << 16);
    if full {
        let total = (k as usize).pow(d as u32);
        let all = (0..total).map(|i| index_tuple(i, k, d)).collect();
        return (all, PsiEnumeration::Full);
    }
    let seed = caps.seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set: BTreeSet<Vec<u32>> = required.iter().cloned().collect();
    for _ in 0..caps.psi_samples {
        set.insert((0..d).map(|_| rng.gen_range(0..k)).collect());
    }
    (
        set.into_iter().collect(),
        PsiEnumeration::Sampled {
            samples: caps.psi_samples,
            seed,
        },
    )
}

/// Refines `prev` at level `k` using the candidate integers `candidates`
/// (already restricted to `S` and the window). For each `m` in `targets` the
/// `psi` rounding `e(m x)` to `Lambda_k` appears in the table even when `psi`
/// is sampled.
pub fn refine_stage(
    prev: &IntervalFamily,
    k: u32,
    candidates: &WindowedSet,
    caps: &Caps,
    targets: &[i64],
) -> Result<(StageRecord, IntervalFamily)> {
    caps.validate()?;
    if k == 0 {
        return Err(Error::invalid("stage level k must be positive"));
    }
    let stage = prev.stage + 1;
    let b = caps.branching_for(stage, prev.len())?;
    let arcs: Vec<OpenArc> = prev.intervals.iter().flat_map(|p| sub_arcs(p, b)).collect();
    let parents: Vec<usize> = (0..prev.len()).flat_map(|i| std::iter::repeat_n(i, b as usize)).collect();
    let d = arcs.len();
    let points = make_independent_frequencies_with(
        d,
        Some(&arcs),
        caps.precision_bits,
        crate::torus::default_certificate_bound(d),
        caps.guard,
    )?;
    for (x, &p) in points.entries().iter().zip(&parents) {
        if !prev.intervals[p].contains_point(x) {
            return Err(Error::Precision {
                required_bits: caps.precision_bits + 1,
                available_bits: caps.precision_bits,
            });
        }
    }

    let required: Vec<Vec<u32>> = targets.iter().map(|&m| nearest_psi(points.entries(), m, k)).collect();
    let (psis, enumeration) = psi_candidates(k, d, caps, &required);

    let order: Vec<i64> = candidates
        .spiral_members()
        .into_iter()
        .filter(|&n| !(caps.exclude_zero && n == 0))
        .collect();
    let entries = points.entries();
    let table: Vec<(Vec<Option<u32>>, u32)> = order
        .par_iter()
        .map(|&n| {
            let mut unsure = 0;
            let row = entries
                .iter()
                .map(|x| {
                    let (p, amb) = passing_root(x, n, k, caps.guard);
                    unsure += amb as u32;
                    p
                })
                .collect();
            (row, unsure)
        })
        .collect();
    let need = threshold_count(Q::new(1, k as i128), d);
    let psi_table: Vec<PsiEntry> = psis
        .into_par_iter()
        .map(|psi| {
            let mut entry = PsiEntry {
                psi,
                window_count: 0,
                ambiguous: 0,
                selection: Vec::new(),
            };
            for (&n, (row, unsure)) in order.iter().zip(&table) {
                let hits = row.iter().zip(&entry.psi).filter(|(p, &s)| **p == Some(s)).count();
                if hits >= need {
                    entry.window_count += 1;
                    if entry.selection.len() < caps.selection_cap {
                        entry.selection.push(n);
                    }
                } else if hits + *unsure as usize >= need {
                    entry.ambiguous += 1;
                }
            }
            entry
        })
        .collect();

    let selection: Vec<i64> = psi_table
        .iter()
        .flat_map(|e| e.selection.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let nmax = selection.iter().map(|n| n.unsigned_abs()).max().unwrap_or(0);
    let err = entries.iter().map(TorusPoint::err_units).max().unwrap_or(0);

    let mut radius = (1u128 << 127) / k as u128;
    if nmax > 0 {
        let num = (BigUint::from(113u32) << 128u32) - 1u32;
        let cauchy = num / (BigUint::from(4u32 * 355) * BigUint::from(k) * BigUint::from(nmax));
        let cauchy = u128::try_from(cauchy).unwrap_or(u128::MAX).saturating_sub(err);
        radius = radius.min(cauchy);
    }
    for arc in &arcs {
        radius = radius.min((arc.len / 4).saturating_sub(1 + err));
    }
    if radius == 0 {
        return Err(Error::Precision {
            required_bits: 129,
            available_bits: 128,
        });
    }
    let cauchy = CauchyCertificate::check(k, nmax, radius, err);

    let intervals: Vec<ClosedArc> = entries.iter().map(|x| ClosedArc { center: x.raw(), radius }).collect();
    for (arc, &p) in intervals.iter().zip(&parents) {
        if !prev.intervals[p].contains_arc(arc) {
            return Err(Error::Precision {
                required_bits: 129,
                available_bits: 128,
            });
        }
    }
    let family = IntervalFamily {
        stage,
        intervals,
        parents,
        branching: b,
        points: entries.to_vec(),
    };
    let gaps = psi_table.iter().filter(|e| e.is_gap()).count();
    let record = StageRecord {
        k,
        branching: b,
        lambda: (0..k).map(|i| root(i, k)).collect(),
        points,
        enumeration,
        psi_table,
        selection,
        cauchy,
        gaps,
    };
    Ok((record, family))
}

/// `psi` sending each point to the nearest root of `e(m x)`.
pub fn nearest_psi(points: &[TorusPoint], m: i64, k: u32) -> Vec<u32> {
    points.iter().map(|x| x.mul_int(m).nearest_multiple(k as u64) as u32).collect()
}

/// Position of `psi` in the full lexicographic enumeration.
pub fn psi_index(psi: &[u32], k: u32) -> usize {
    tuple_index(psi, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohr::sqrt_primes;
    use crate::ks::cantor::check_family_chain;

    fn all(w: Window) -> WindowedSet {
        WindowedSet::full(w)
    }

    #[test]
    fn vacuous_first_stage() {
        let root_fam = IntervalFamily::root(ClosedArc::unit());
        let caps = Caps {
            max_points: 1,
            exclude_zero: false,
            ..Caps::default()
        };
        let w = Window::symmetric(50);
        let (rec, fam) = refine_stage(&root_fam, 1, &all(w), &caps, &[]).unwrap();
        assert_eq!(rec.psi_table.len(), 1);
        assert_eq!(rec.psi_table[0].window_count, w.len());
        assert_eq!(rec.psi_table[0].selection, vec![0, 1, -1, 2, -2, 3, -3, 4]);
        assert!(rec.cauchy.holds && rec.cauchy.lipschitz < rec.cauchy.limit);
        assert!(check_family_chain(&[root_fam, fam]).is_empty());
    }

    #[test]
    fn sqrt2_table_at_level_two() {
        let alpha = sqrt_primes(1).unwrap().entries()[0].clone();
        let (p, _) = passing_root(&alpha, 5, 2, Guard::default());
        // ||5 alpha|| = 0.0711, chord 0.443 > 1/4
        assert_eq!(p, None);
        let w = Window::symmetric(10_000);
        let hits: Vec<i64> = w.iter().filter(|&n| passing_root(&alpha, n, 2, Guard::default()).0 == Some(0)).collect();
        for &n in &hits {
            assert!(char_distance(&alpha.mul_int(n)) < 0.25);
        }
        assert!(hits.contains(&0) && hits.contains(&12) && !hits.contains(&5));
    }

    #[test]
    fn shrink_formula() {
        let c = CauchyCertificate::check(2, 7, (0.0056 * 2f64.powi(128)) as u128, 0);
        assert!(c.holds);
        let c = CauchyCertificate::check(2, 7, (0.0057 * 2f64.powi(128)) as u128, 0);
        assert!(!c.holds);
    }

    #[test]
    fn selections_meet_count_and_q_containment() {
        let root_fam = IntervalFamily::root(ClosedArc::unit());
        let caps = Caps {
            max_points: 3,
            ..Caps::default()
        };
        let w = Window::symmetric(20_000);
        let (_, f1) = refine_stage(&root_fam, 1, &all(w), &caps, &[]).unwrap();
        let (rec, f2) = refine_stage(&f1, 2, &all(w), &caps, &[0]).unwrap();
        assert_eq!(rec.psi_table.len(), 8);
        assert!(rec.cauchy.holds);
        let need = threshold_count(Q::new(1, 2), 3);
        for e in &rec.psi_table {
            for &n in &e.selection {
                let hits = rec
                    .points
                    .entries()
                    .iter()
                    .zip(&e.psi)
                    .filter(|(x, &s)| {
                        char_distance(&(&x.mul_int(n) - &root(s, 2))) < 0.25
                    })
                    .count();
                assert!(hits >= need);
                assert_eq!(q_verdict(&f2, 2, &e.psi, n, Guard::default()).unwrap(), Verdict::Yes);
            }
        }
        assert!(check_family_chain(&[root_fam, f1, f2]).is_empty());
    }

    #[test]
    fn q_set_examples() {
        let fam = IntervalFamily::root(ClosedArc {
            center: 1 << 126,
            radius: 1 << 100,
        });
        let w = Window::symmetric(20);
        let q = q_set(&fam, 1, &[0], &SetSpec::All, w, Guard::default()).unwrap();
        assert_eq!(q.len() as u64, w.len());
        // f = e_4 on an interval of radius well below 1/(4 pi k |n|)
        let f = nearest_psi(&fam.points, 4, 4);
        assert_eq!(q_verdict(&fam, 4, &f, 4, Guard::default()).unwrap(), Verdict::Yes);
    }
}
