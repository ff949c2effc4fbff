//! Rotation systems on `T^d x Z_k`, finite unions of boxes, and return-time
//! sets `R_c(T; D) = { n : mu(D ∩ T^n D) > c }`.
//!
//! With rational frequencies and rational arc endpoints every measure is an
//! exact rational. Irrational rotations are evaluated in `f64` from the
//! 128-bit residues and compared against `c` with the guard margin.

pub mod density;

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::torus::{frac_q, q_str, q_to_f64, Frequencies, Guard, TorusPoint, Verdict, Q};
use crate::window::{Window, WindowedSet};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RotationSystem {
    /// `x -> x + alpha` on `T^d`.
    Torus { freq: Frequencies },
    /// `x -> x + step` on `Z_k`.
    Cyclic { k: u64, step: u64 },
    Product { components: Vec<RotationSystem> },
}

pub fn product_system(s1: RotationSystem, s2: RotationSystem) -> RotationSystem {
    RotationSystem::Product {
        components: vec![s1, s2],
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Coord {
    Circle(TorusPoint),
    Cyclic { k: u64, step: u64 },
}

impl RotationSystem {
    pub fn validate(&self) -> Result<()> {
        match self {
            RotationSystem::Torus { freq } => {
                if freq.dim() == 0 {
                    return Err(Error::invalid("torus rotation needs at least one frequency"));
                }
            }
            RotationSystem::Cyclic { k, step } => {
                if *k == 0 || step >= k {
                    return Err(Error::invalid(format!("cyclic rotation needs 0 <= step < k, got k={k}, step={step}")));
                }
            }
            RotationSystem::Product { components } => {
                if components.len() < 2 {
                    return Err(Error::invalid("product needs at least two components"));
                }
                components.iter().try_for_each(RotationSystem::validate)?;
            }
        }
        Ok(())
    }

    /// Number of coordinates after flattening products.
    pub fn arity(&self) -> usize {
        self.coords().len()
    }

    fn coords(&self) -> Vec<Coord> {
        match self {
            RotationSystem::Torus { freq } => freq.points().into_iter().map(Coord::Circle).collect(),
            RotationSystem::Cyclic { k, step } => vec![Coord::Cyclic { k: *k, step: *step }],
            RotationSystem::Product { components } => components.iter().flat_map(|c| c.coords()).collect(),
        }
    }
}

/// One factor of a box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// The arc `[start, start + len)` on the circle, `0 <= len <= 1`.
    Arc {
        #[serde(with = "q_str")]
        start: Q,
        #[serde(with = "q_str")]
        len: Q,
    },
    /// A subset of `Z_k`.
    Subset(Vec<u64>),
}

impl Side {
    pub fn arc(start: Q, len: Q) -> Self {
        Side::Arc { start: frac_q(start), len }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSet {
    pub boxes: Vec<Vec<Side>>,
}

impl BoxSet {
    /// `{ x in T^d : ||x_j|| < eta / 2 }`.
    pub fn centered_cube(d: usize, eta: Q) -> Self {
        let half = eta / Q::from_integer(2);
        BoxSet {
            boxes: vec![vec![Side::arc(-half, eta); d]],
        }
    }

    /// `{ x : ||x_j|| < eta / 4 }`, of measure `eta^d 2^-d`; its return-time
    /// set `R_0` lies inside `Bohr(alpha, eta / 2)`.
    pub fn return_box(d: usize, eta: Q) -> Self {
        Self::centered_cube(d, eta / Q::from_integer(2))
    }

    fn validate(&self, coords: &[Coord]) -> Result<()> {
        for b in &self.boxes {
            if b.len() != coords.len() {
                return Err(Error::Dimension {
                    expected: coords.len(),
                    got: b.len(),
                });
            }
            for (side, c) in b.iter().zip(coords) {
                match (side, c) {
                    (Side::Arc { len, .. }, Coord::Circle(_)) => {
                        if len.is_negative() || *len > Q::one() {
                            return Err(Error::invalid(format!("arc length {len} outside [0, 1]")));
                        }
                    }
                    (Side::Subset(s), Coord::Cyclic { k, .. }) => {
                        if s.iter().any(|x| x >= k) {
                            return Err(Error::invalid(format!("subset element outside Z_{k}")));
                        }
                    }
                    _ => return Err(Error::invalid("box side does not match the coordinate type")),
                }
            }
        }
        Ok(())
    }
}

/// Exact when every ingredient is rational.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureValue {
    Exact(#[serde(with = "q_str")] Q),
    Approx(f64),
}

impl MeasureValue {
    pub fn value(&self) -> f64 {
        match self {
            MeasureValue::Exact(q) => q_to_f64(q),
            MeasureValue::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<Q> {
        match self {
            MeasureValue::Exact(q) => Some(*q),
            MeasureValue::Approx(_) => None,
        }
    }

    /// Guarded `self > c`.
    pub fn exceeds(&self, c: Q, guard: Guard) -> Verdict {
        match self {
            MeasureValue::Exact(q) => Verdict::from_bool(*q > c),
            MeasureValue::Approx(x) => {
                let c = q_to_f64(&c);
                let tau = guard.as_f64().max(1e-15);
                if *x > c + tau {
                    Verdict::Yes
                } else if *x < c - tau {
                    Verdict::No
                } else {
                    Verdict::Ambiguous
                }
            }
        }
    }

    fn to_string_exact(self) -> String {
        match self {
            MeasureValue::Exact(q) => q.to_string(),
            MeasureValue::Approx(_) => String::new(),
        }
    }
}

// Elementary cells of one coordinate: arcs between consecutive breakpoints
// (as (start, len)) or single points of Z_k.
enum Cells {
    Arcs(Vec<(Q, Q)>),
    Points(u64),
}

fn cells_for(coord: &Coord, sides: &[&Side]) -> Cells {
    match coord {
        Coord::Circle(_) => {
            let mut cuts: BTreeSet<Q> = BTreeSet::new();
            cuts.insert(Q::zero());
            for s in sides {
                if let Side::Arc { start, len } = s {
                    cuts.insert(frac_q(*start));
                    cuts.insert(frac_q(*start + *len));
                }
            }
            let v: Vec<Q> = cuts.into_iter().collect();
            let mut arcs = Vec::with_capacity(v.len());
            for (i, a) in v.iter().enumerate() {
                let b = v.get(i + 1).copied().unwrap_or(Q::one());
                arcs.push((*a, b - a));
            }
            Cells::Arcs(arcs)
        }
        Coord::Cyclic { k, .. } => Cells::Points(*k),
    }
}

fn arc_contains_cell(start: Q, len: Q, cell_start: Q, cell_len: Q) -> bool {
    if len >= Q::one() {
        return true;
    }
    let off = frac_q(cell_start - start);
    off + cell_len <= len
}

/// Splits the union of boxes into disjoint boxes.
fn disjointify(boxes: &[Vec<Side>], coords: &[Coord]) -> Vec<Vec<Side>> {
    if boxes.len() <= 1 {
        return boxes.to_vec();
    }
    let per_coord: Vec<Cells> = coords
        .iter()
        .enumerate()
        .map(|(j, c)| cells_for(c, &boxes.iter().map(|b| &b[j]).collect::<Vec<_>>()))
        .collect();
    let sizes: Vec<usize> = per_coord
        .iter()
        .map(|c| match c {
            Cells::Arcs(a) => a.len(),
            Cells::Points(k) => *k as usize,
        })
        .collect();
    let total: usize = sizes.iter().product();
    let mut out = Vec::new();
    let mut idx = vec![0usize; coords.len()];
    for _ in 0..total {
        let inside = boxes.iter().any(|b| {
            b.iter().enumerate().all(|(j, side)| match (side, &per_coord[j]) {
                (Side::Arc { start, len }, Cells::Arcs(a)) => {
                    let (cs, cl) = a[idx[j]];
                    arc_contains_cell(*start, *len, cs, cl)
                }
                (Side::Subset(s), Cells::Points(_)) => s.contains(&(idx[j] as u64)),
                _ => false,
            })
        });
        if inside {
            out.push(
                idx.iter()
                    .enumerate()
                    .map(|(j, &i)| match &per_coord[j] {
                        Cells::Arcs(a) => Side::Arc {
                            start: a[i].0,
                            len: a[i].1,
                        },
                        Cells::Points(_) => Side::Subset(vec![i as u64]),
                    })
                    .collect(),
            );
        }
        for j in (0..idx.len()).rev() {
            idx[j] += 1;
            if idx[j] < sizes[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    merge_subsets(out)
}

// Cells differing only in their final cyclic coordinate collapse into one box.
fn merge_subsets(cells: Vec<Vec<Side>>) -> Vec<Vec<Side>> {
    let mut out: Vec<Vec<Side>> = Vec::new();
    for c in cells {
        if let Some(last) = out.last_mut() {
            let n = c.len();
            if n > 0 && last[..n - 1] == c[..n - 1] {
                if let (Side::Subset(a), Side::Subset(b)) = (&mut last[n - 1], &c[n - 1]) {
                    a.extend(b);
                    continue;
                }
            }
        }
        out.push(c);
    }
    out
}

enum Factor {
    Exact(Q),
    Approx(f64),
}

fn side_measure(side: &Side, coord: &Coord) -> Q {
    match (side, coord) {
        (Side::Arc { len, .. }, _) => *len,
        (Side::Subset(s), Coord::Cyclic { k, .. }) => {
            let distinct: BTreeSet<_> = s.iter().collect();
            Q::new(distinct.len() as i128, *k as i128)
        }
        _ => Q::zero(),
    }
}

/// Overlap of `[a, a + l)` with `[b, b + m)` shifted by `s`, lifting to
/// `[0, 2)` and summing the translates by `-1, 0, 1`.
fn arc_overlap(a: Q, l: Q, b: Q, m: Q, s: &TorusPoint) -> Factor {
    let a = frac_q(a);
    match s.as_ratio() {
        Some(sq) => {
            let b = frac_q(b + sq);
            let mut tot = Q::zero();
            for t in [-1, 0, 1] {
                let t = Q::from_integer(t);
                let lo = a.max(b + t);
                let hi = (a + l).min(b + m + t);
                if hi > lo {
                    tot += hi - lo;
                }
            }
            Factor::Exact(tot)
        }
        None => {
            let (a, l, m) = (q_to_f64(&a), q_to_f64(&l), q_to_f64(&m));
            let b = (&TorusPoint::from_ratio(b) + s).value();
            // A gap wider than float noise is a certified miss.
            let mut tot = 0.0;
            let mut near = false;
            for t in [-1.0, 0.0, 1.0] {
                let lo = a.max(b + t);
                let hi = (a + l).min(b + m + t);
                if hi > lo {
                    tot += hi - lo;
                }
                near |= hi - lo > -1e-12;
            }
            if near {
                Factor::Approx(tot)
            } else {
                Factor::Exact(Q::zero())
            }
        }
    }
}

fn pair_overlap(b1: &[Side], b2: &[Side], coords: &[Coord], n: i64) -> MeasureValue {
    let mut exact = Q::one();
    let mut approx: Option<f64> = None;
    for ((s1, s2), c) in b1.iter().zip(b2).zip(coords) {
        let f = match (s1, s2, c) {
            (Side::Arc { start: a, len: l }, Side::Arc { start: b, len: m }, Coord::Circle(alpha)) => {
                arc_overlap(*a, *l, *b, *m, &alpha.mul_int(n))
            }
            (Side::Subset(x), Side::Subset(y), Coord::Cyclic { k, step }) => {
                let shift = ((*step as i128 * n as i128).rem_euclid(*k as i128)) as u64;
                let moved: BTreeSet<u64> = y.iter().map(|v| (v + shift) % k).collect();
                let hits = x.iter().collect::<BTreeSet<_>>().into_iter().filter(|v| moved.contains(v)).count();
                Factor::Exact(Q::new(hits as i128, *k as i128))
            }
            _ => Factor::Exact(Q::zero()),
        };
        match f {
            Factor::Exact(q) => {
                exact *= q;
                if let Some(a) = approx.as_mut() {
                    *a *= q_to_f64(&q);
                }
            }
            Factor::Approx(x) => {
                approx = Some(approx.unwrap_or_else(|| q_to_f64(&exact)) * x);
            }
        }
        if exact.is_zero() {
            return MeasureValue::Exact(Q::zero());
        }
    }
    match approx {
        None => MeasureValue::Exact(exact),
        Some(a) => MeasureValue::Approx(a),
    }
}

fn sum_values(vals: impl IntoIterator<Item = MeasureValue>) -> MeasureValue {
    let mut exact = Q::zero();
    let mut approx = 0.0;
    let mut any_approx = false;
    for v in vals {
        match v {
            MeasureValue::Exact(q) => {
                exact += q;
            }
            MeasureValue::Approx(x) => {
                any_approx = true;
                approx += x;
            }
        }
    }
    if any_approx {
        MeasureValue::Approx(approx + q_to_f64(&exact))
    } else {
        MeasureValue::Exact(exact)
    }
}

/// A system with its box set split into disjoint boxes.
pub struct Prepared {
    coords: Vec<Coord>,
    boxes: Vec<Vec<Side>>,
}

impl Prepared {
    pub fn new(system: &RotationSystem, d: &BoxSet) -> Result<Self> {
        system.validate()?;
        let coords = system.coords();
        d.validate(&coords)?;
        Ok(Prepared {
            boxes: disjointify(&d.boxes, &coords),
            coords,
        })
    }

    pub fn measure(&self) -> Q {
        self.boxes
            .iter()
            .map(|b| b.iter().zip(&self.coords).map(|(s, c)| side_measure(s, c)).product::<Q>())
            .sum()
    }

    /// `mu(D ∩ T^n D)`, summed over pairs of disjoint boxes.
    pub fn intersection(&self, n: i64) -> MeasureValue {
        sum_values(
            self.boxes
                .iter()
                .flat_map(|b1| self.boxes.iter().map(move |b2| pair_overlap(b1, b2, &self.coords, n))),
        )
    }
}

pub fn measure(system: &RotationSystem, d: &BoxSet) -> Result<Q> {
    Ok(Prepared::new(system, d)?.measure())
}

pub fn intersection_measure(system: &RotationSystem, d: &BoxSet, n: i64) -> Result<MeasureValue> {
    Ok(Prepared::new(system, d)?.intersection(n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSet {
    #[serde(with = "q_str")]
    pub c: Q,
    #[serde(with = "q_str")]
    pub measure: Q,
    pub members: WindowedSet,
    /// `(n, mu(D ∩ T^n D))` for every `n` in the window.
    pub values: Vec<(i64, MeasureValue)>,
}

impl ReturnSet {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "value", "exact", "member"])?;
        for (n, v) in &self.values {
            let flag = if self.members.contains(*n) {
                "1"
            } else if self.members.ambiguous().binary_search(n).is_ok() {
                "?"
            } else {
                "0"
            };
            w.write_record([n.to_string(), format!("{:.15}", v.value()), v.to_string_exact(), flag.into()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn return_set(system: &RotationSystem, d: &BoxSet, c: Q, window: Window, guard: Guard) -> Result<ReturnSet> {
    if c.is_negative() {
        return Err(Error::invalid("threshold c must be non-negative"));
    }
    let prep = Prepared::new(system, d)?;
    let values: Vec<(i64, MeasureValue)> = window.iter().into_par_iter().map(|n| (n, prep.intersection(n))).collect();
    let mut yes = Vec::new();
    let mut maybe = Vec::new();
    for (n, v) in &values {
        match v.exceeds(c, guard) {
            Verdict::Yes => yes.push(*n),
            Verdict::Ambiguous => maybe.push(*n),
            Verdict::No => {}
        }
    }
    let members = WindowedSet::with_ambiguous(window, yes, maybe, format!("return_set(c={c})"))?;
    Ok(ReturnSet {
        c,
        measure: prep.measure(),
        members,
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuraWitness {
    pub s: i64,
    /// `n = s - m`, a member of `R_0(T; D)`.
    pub n: i64,
    pub m: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuraReport {
    pub window: Window,
    pub members: Vec<AuraWitness>,
    /// Elements of `S` whose only candidate witnesses were undecided.
    pub ambiguous: Vec<i64>,
}

/// `S ∩ (E + R_0(T; D))` within `window`, each member with the smallest
/// `m ∈ E` that works.
pub fn aura_demo(
    s: &WindowedSet,
    e: &WindowedSet,
    system: &RotationSystem,
    d: &BoxSet,
    window: Window,
    guard: Guard,
) -> Result<AuraReport> {
    let (Some(&emin), Some(&emax)) = (e.members().first(), e.members().last()) else {
        return Ok(AuraReport {
            window,
            members: Vec::new(),
            ambiguous: Vec::new(),
        });
    };
    let reach = Window::new(window.lo - emax, window.hi - emin)?;
    let r0 = return_set(system, d, Q::zero(), reach, guard)?.members;
    let mut members = Vec::new();
    let mut ambiguous = Vec::new();
    for &x in s.members().iter().filter(|x| window.contains(**x)) {
        let mut undecided = false;
        let hit = e.members().iter().find(|&&m| {
            let n = x - m;
            if r0.ambiguous().binary_search(&n).is_ok() {
                undecided = true;
            }
            r0.contains(n)
        });
        match hit {
            Some(&m) => members.push(AuraWitness { s: x, n: x - m, m }),
            None if undecided => ambiguous.push(x),
            None => {}
        }
    }
    Ok(AuraReport {
        window,
        members,
        ambiguous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohr::{bohr_enumerate, sqrt_primes, BohrSpec};
    use crate::torus::parse_ratio;

    fn q(s: &str) -> Q {
        parse_ratio(s).unwrap()
    }

    fn rat(v: &[&str]) -> RotationSystem {
        RotationSystem::Torus {
            freq: Frequencies::rational(v.iter().map(|s| q(s)).collect()).unwrap(),
        }
    }

    fn sqrt2() -> RotationSystem {
        RotationSystem::Torus {
            freq: sqrt_primes(1).unwrap().into(),
        }
    }

    fn arc(a: &str, l: &str) -> BoxSet {
        BoxSet {
            boxes: vec![vec![Side::arc(q(a), q(l))]],
        }
    }

    #[test]
    fn measures() {
        let cube = BoxSet::centered_cube(2, q("1/2"));
        assert_eq!(measure(&rat(&["1/3", "1/5"]), &cube).unwrap(), q("1/4"));
        assert_eq!(measure(&sqrt2(), &BoxSet::default()).unwrap(), Q::zero());
        let cyc = RotationSystem::Cyclic { k: 4, step: 1 };
        let d = BoxSet {
            boxes: vec![vec![Side::Subset(vec![0, 1])]],
        };
        assert_eq!(measure(&cyc, &d).unwrap(), q("1/2"));
    }

    #[test]
    fn return_box_measure() {
        assert_eq!(measure(&rat(&["1/3", "1/5"]), &BoxSet::return_box(2, q("1/2"))).unwrap(), q("1/16"));
        assert_eq!(measure(&sqrt2(), &BoxSet::return_box(1, q("1/8"))).unwrap(), q("1/16"));
    }

    #[test]
    fn overlapping_boxes_counted_once() {
        let d = BoxSet {
            boxes: vec![vec![Side::arc(q("0"), q("0.5"))], vec![Side::arc(q("0.25"), q("0.5"))], vec![Side::arc(q("0.9"), q("0.2"))]],
        };
        assert_eq!(measure(&sqrt2(), &d).unwrap(), q("0.85"));
    }

    #[test]
    fn intersection_examples() {
        let d = arc("0", "0.2");
        assert_eq!(intersection_measure(&sqrt2(), &d, 0).unwrap(), MeasureValue::Exact(q("0.2")));
        assert_eq!(intersection_measure(&sqrt2(), &d, 1).unwrap(), MeasureValue::Exact(Q::zero()));
        let v = intersection_measure(&sqrt2(), &d, 5).unwrap().value();
        assert!((v - 0.128_932_188_134_524_76).abs() < 1e-15);
    }

    #[test]
    fn rational_return_set() {
        let r = return_set(&rat(&["1/4"]), &arc("0", "1/8"), Q::zero(), Window::new(-12, 12).unwrap(), Guard::default()).unwrap();
        assert_eq!(r.members.members(), &[-12, -8, -4, 0, 4, 8, 12]);
        let empty = return_set(&rat(&["1/4"]), &arc("0", "1/8"), q("1/8"), Window::new(-12, 12).unwrap(), Guard::default()).unwrap();
        assert!(empty.members.is_empty());
    }

    #[test]
    fn return_set_inside_bohr() {
        let eta = q("1/4");
        let w = Window::new(-500, 500).unwrap();
        let sys = sqrt2();
        let r = return_set(&sys, &BoxSet::centered_cube(1, eta), Q::zero(), w, Guard::default()).unwrap();
        let bohr = bohr_enumerate(&BohrSpec::new(sqrt_primes(1).unwrap(), eta).unwrap(), w);
        assert!(r.members.members().iter().all(|n| bohr.contains(*n)));
    }

    #[test]
    fn cyclic_product() {
        let sys = product_system(rat(&["1/2"]), RotationSystem::Cyclic { k: 3, step: 1 });
        let d = BoxSet {
            boxes: vec![vec![Side::arc(q("0"), q("1/2")), Side::Subset(vec![0])]],
        };
        assert_eq!(measure(&sys, &d).unwrap(), q("1/6"));
        let r = return_set(&sys, &d, Q::zero(), Window::new(0, 12).unwrap(), Guard::default()).unwrap();
        assert_eq!(r.members.members(), &[0, 6, 12]);
    }

    #[test]
    fn aura_examples() {
        let w = Window::new(-20, 20).unwrap();
        let sys = rat(&["1/4"]);
        let d = arc("0", "1/8");
        let all = WindowedSet::full(w);
        let zero = WindowedSet::new(w, vec![0], "0").unwrap();
        let rep = aura_demo(&all, &zero, &sys, &d, w, Guard::default()).unwrap();
        assert_eq!(rep.members.iter().map(|m| m.s).collect::<Vec<_>>(), vec![-20, -16, -12, -8, -4, 0, 4, 8, 12, 16, 20]);
        let none = WindowedSet::new(w, vec![], "empty").unwrap();
        assert!(aura_demo(&none, &zero, &sys, &d, w, Guard::default()).unwrap().members.is_empty());
        let evens = WindowedSet::new(w, w.iter().filter(|n| n % 2 == 0).collect(), "even").unwrap();
        let e = WindowedSet::new(w, vec![0, 1], "{0,1}").unwrap();
        let rep = aura_demo(&evens, &e, &sys, &d, w, Guard::default()).unwrap();
        assert!(rep.members.iter().all(|m| m.s == m.n + m.m && m.n % 4 == 0 && m.m == 0));
    }

    #[test]
    fn wrong_side_kind_rejected() {
        let d = BoxSet {
            boxes: vec![vec![Side::Subset(vec![0])]],
        };
        assert!(measure(&sqrt2(), &d).is_err());
        assert!(RotationSystem::Cyclic { k: 3, step: 3 }.validate().is_err());
    }
}
