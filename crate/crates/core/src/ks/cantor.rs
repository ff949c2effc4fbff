//! Nested families of closed arcs and the uniform atomic measures on them.

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::torus::{char_distance, hex_u128, q_str, TorusPoint, Q};
use crate::{Error, Result};

const HALF_TURN: u128 = 1 << 127;

/// The closed arc `[center - radius, center + radius]`, in units of `2^-128`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedArc {
    #[serde(with = "hex_u128")]
    pub center: u128,
    #[serde(with = "hex_u128")]
    pub radius: u128,
}

fn signed_offset(from: u128, to: u128) -> u128 {
    let d = to.wrapping_sub(from);
    d.min(d.wrapping_neg())
}

impl ClosedArc {
    /// The whole circle, as `[0, 1]`.
    pub fn unit() -> Self {
        ClosedArc {
            center: HALF_TURN,
            radius: HALF_TURN,
        }
    }

    pub fn radius_f64(&self) -> f64 {
        self.radius as f64 / 2f64.powi(128)
    }

    pub fn diameter_f64(&self) -> f64 {
        2.0 * self.radius_f64()
    }

    pub fn contains_arc(&self, other: &ClosedArc) -> bool {
        if self.radius >= HALF_TURN {
            return true;
        }
        signed_offset(self.center, other.center)
            .checked_add(other.radius)
            .is_some_and(|v| v <= self.radius)
    }

    pub fn disjoint(&self, other: &ClosedArc) -> bool {
        match self.radius.checked_add(other.radius) {
            Some(r) => signed_offset(self.center, other.center) > r,
            None => false,
        }
    }

    /// Every value within the point's error bound lies in the arc.
    pub fn contains_point(&self, p: &TorusPoint) -> bool {
        if self.radius >= HALF_TURN {
            return true;
        }
        signed_offset(self.center, p.raw())
            .checked_add(p.err_units())
            .is_some_and(|v| v <= self.radius)
    }

    pub fn center_point(&self) -> TorusPoint {
        TorusPoint::from_raw(self.center)
    }
}

/// One stage of the nested construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalFamily {
    pub stage: usize,
    pub intervals: Vec<ClosedArc>,
    /// Index of each interval's parent in the previous stage.
    pub parents: Vec<usize>,
    /// Children per parent used to reach this stage.
    pub branching: u32,
    /// One representative point per interval.
    pub points: Vec<TorusPoint>,
}

impl IntervalFamily {
    pub fn root(start: ClosedArc) -> Self {
        IntervalFamily {
            stage: 0,
            intervals: vec![start],
            parents: Vec::new(),
            branching: 1,
            points: vec![start.center_point()],
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn max_radius(&self) -> u128 {
        self.intervals.iter().map(|a| a.radius).max().unwrap_or(0)
    }
}

/// Children of a parent arc `(c, rho)` sit at `c - rho + (2i + 1) rho / b`
/// with radius `shrink * rho / b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    #[serde(with = "q_str")]
    pub shrink: Q,
}

fn big_ratio_floor(num: BigUint, den: BigUint) -> u128 {
    (num / den).to_u128().expect("below 2^128")
}

/// Builds stages `0..=branching.len()`; stage 0 is `start`.
pub fn build_cantor(start: ClosedArc, branching: &[u32], placement: Placement) -> Result<Vec<IntervalFamily>> {
    let s = placement.shrink;
    if !s.is_positive() || s >= Q::one() {
        return Err(Error::invalid(format!("shrink factor must lie in (0, 1), got {s}")));
    }
    let (sn, sd) = (BigUint::from(*s.numer() as u128), BigUint::from(*s.denom() as u128));
    let mut fams = vec![IntervalFamily::root(start)];
    for (idx, &b) in branching.iter().enumerate() {
        if b < 2 {
            return Err(Error::invalid(format!("branching at stage {} must be at least 2, got {b}", idx + 1)));
        }
        let prev = fams.last().expect("root");
        let mut intervals = Vec::with_capacity(prev.len() * b as usize);
        let mut parents = Vec::with_capacity(intervals.capacity());
        for (pi, p) in prev.intervals.iter().enumerate() {
            let rho = BigUint::from(p.radius);
            let child_r = big_ratio_floor(&rho * &sn, &sd * BigUint::from(b));
            if child_r == 0 {
                return Err(Error::Precision {
                    required_bits: 129,
                    available_bits: 128,
                });
            }
            let left = p.center.wrapping_sub(p.radius);
            for i in 0..b {
                let off = big_ratio_floor(&rho * BigUint::from(2 * i + 1), BigUint::from(b));
                let child = ClosedArc {
                    center: left.wrapping_add(off),
                    radius: child_r,
                };
                if !p.contains_arc(&child) {
                    return Err(Error::Precision {
                        required_bits: 129,
                        available_bits: 128,
                    });
                }
                intervals.push(child);
                parents.push(pi);
            }
        }
        let points = intervals.iter().map(ClosedArc::center_point).collect();
        fams.push(IntervalFamily {
            stage: idx + 1,
            intervals,
            parents,
            branching: b,
            points,
        });
    }
    Ok(fams)
}

/// Checks nesting, sibling counts, disjointness and strictly decreasing
/// maximal radius along a sequence of families.
pub fn check_family_chain(fams: &[IntervalFamily]) -> Vec<String> {
    let mut problems = Vec::new();
    for w in fams.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        let mut counts = vec![0u32; prev.len()];
        for (i, (arc, &p)) in next.intervals.iter().zip(&next.parents).enumerate() {
            if p >= prev.len() || !prev.intervals[p].contains_arc(arc) {
                problems.push(format!("stage {} interval {i} is not inside its parent", next.stage));
                continue;
            }
            counts[p] += 1;
        }
        if counts.iter().any(|&c| c != next.branching) {
            problems.push(format!("stage {} has parents without exactly {} children", next.stage, next.branching));
        }
        if next.max_radius() >= prev.max_radius() {
            problems.push(format!("stage {} does not shrink the maximal diameter", next.stage));
        }
        for (i, a) in next.intervals.iter().enumerate() {
            if next.intervals[i + 1..].iter().any(|b| !a.disjoint(b)) {
                problems.push(format!("stage {} interval {i} overlaps a sibling", next.stage));
            }
        }
    }
    problems
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointRule {
    Centers,
    Representatives,
}

/// Atoms with exact rational weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: TorusPoint,
    #[serde(with = "q_str")]
    pub weight: Q,
}

pub fn stage_measure(fam: &IntervalFamily, rule: PointRule) -> DiscreteMeasure {
    let n = fam.len() as i128;
    let atoms = match rule {
        PointRule::Centers => fam.intervals.iter().map(ClosedArc::center_point).collect::<Vec<_>>(),
        PointRule::Representatives => fam.points.clone(),
    }
    .into_iter()
    .map(|x| Atom {
        x,
        weight: Q::new(1, n),
    })
    .collect();
    DiscreteMeasure { atoms }
}

impl DiscreteMeasure {
    pub fn point_mass(x: TorusPoint) -> Self {
        DiscreteMeasure {
            atoms: vec![Atom { x, weight: Q::one() }],
        }
    }

    pub fn total_mass(&self) -> Q {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn mass_of(&self, arc: &ClosedArc) -> Q {
        self.atoms.iter().filter(|a| arc.contains_point(&a.x)).map(|a| a.weight).sum()
    }

    /// `∫ |e((n - m) x) - 1| dmu`.
    pub fn rigidity_value(&self, n: i64, m: i64) -> f64 {
        self.atoms
            .iter()
            .map(|a| crate::torus::q_to_f64(&a.weight) * char_distance(&a.x.mul_int(n - m)))
            .sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "x_decimal", "weight"])?;
        for a in &self.atoms {
            w.write_record([a.x.to_string(), a.x.to_decimal(20), a.weight.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Every interval of every family `j <= k` must carry mass `1 / #I^(j)`.
pub fn continuity_violations(fams: &[IntervalFamily], mu: &DiscreteMeasure) -> Vec<(usize, usize, Q)> {
    let mut out = Vec::new();
    for f in fams {
        let expected = Q::new(1, f.len() as i128);
        for (i, arc) in f.intervals.iter().enumerate() {
            let m = mu.mass_of(arc);
            if m != expected {
                out.push((f.stage, i, m));
            }
        }
    }
    out
}

/// `sum_x w(x) |f(x) - e(n x)|` with `f` given as an angle per atom.
pub fn l1_char_distance(mu: &DiscreteMeasure, f: &[TorusPoint], n: i64) -> Result<f64> {
    if f.len() != mu.atoms.len() {
        return Err(Error::Dimension {
            expected: mu.atoms.len(),
            got: f.len(),
        });
    }
    Ok(mu
        .atoms
        .iter()
        .zip(f)
        .map(|(a, fx)| crate::torus::q_to_f64(&a.weight) * char_distance(&(fx - &a.x.mul_int(n))))
        .sum())
}

impl Default for Placement {
    fn default() -> Self {
        Placement { shrink: Q::new(1, 2) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(stages: &[u32]) -> Vec<IntervalFamily> {
        build_cantor(ClosedArc::unit(), stages, Placement::default()).unwrap()
    }

    #[test]
    fn binary_scheme() {
        let f = binary(&[2, 2]);
        assert_eq!(f[2].len(), 4);
        assert_eq!(f[2].parents, vec![0, 0, 1, 1]);
        assert!(check_family_chain(&f).is_empty());
        let mu = stage_measure(&f[2], PointRule::Centers);
        assert_eq!(mu.mass_of(&f[1].intervals[0]), Q::new(1, 2));
        assert!(continuity_violations(&f, &mu).is_empty());
    }

    #[test]
    fn mixed_branching_masses() {
        let f = binary(&[2, 3]);
        let mu = stage_measure(&f[2], PointRule::Centers);
        assert_eq!(mu.atoms.len(), 6);
        assert_eq!(mu.total_mass(), Q::one());
        assert_eq!(mu.mass_of(&f[1].intervals[1]), Q::new(1, 2));
    }

    #[test]
    fn diameters_shrink_geometrically() {
        let f = binary(&[2, 2, 2]);
        for fam in &f {
            let bound = 1.0 * 0.25f64.powi(fam.stage as i32);
            assert!(fam.max_radius() as f64 / 2f64.powi(128) * 2.0 <= bound + 1e-12);
        }
    }

    #[test]
    fn branching_below_two_rejected() {
        assert!(build_cantor(ClosedArc::unit(), &[2, 1], Placement::default()).is_err());
        let tiny = ClosedArc { center: 0, radius: 1 };
        assert!(matches!(
            build_cantor(tiny, &[2], Placement::default()),
            Err(Error::Precision { .. })
        ));
    }

    #[test]
    fn l1_examples() {
        let origin = DiscreteMeasure::point_mass(TorusPoint::zero());
        for n in [-3, 0, 7] {
            assert_eq!(l1_char_distance(&origin, &[TorusPoint::zero()], n).unwrap(), 0.0);
        }
        let two = DiscreteMeasure {
            atoms: vec![
                Atom { x: TorusPoint::zero(), weight: Q::new(1, 2) },
                Atom { x: TorusPoint::from_ratio(Q::new(1, 2)), weight: Q::new(1, 2) },
            ],
        };
        let ones = vec![TorusPoint::zero(); 2];
        assert_eq!(l1_char_distance(&two, &ones, 1).unwrap(), 1.0);
        let f = binary(&[2, 2]);
        let mu = stage_measure(&f[2], PointRule::Centers);
        let e3: Vec<TorusPoint> = mu.atoms.iter().map(|a| a.x.mul_int(3)).collect();
        assert_eq!(l1_char_distance(&mu, &e3, 3).unwrap(), 0.0);
    }

    #[test]
    fn arc_relations() {
        let a = ClosedArc { center: 100, radius: 10 };
        let b = ClosedArc { center: 105, radius: 5 };
        let c = ClosedArc { center: 121, radius: 5 };
        assert!(a.contains_arc(&b) && !a.contains_arc(&c));
        assert!(a.disjoint(&c) && !a.disjoint(&b));
        let wrap = ClosedArc { center: 2, radius: 5 };
        assert!(wrap.contains_point(&TorusPoint::from_raw(u128::MAX)));
    }
}
