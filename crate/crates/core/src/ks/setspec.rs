//! A small predicate language for subsets of `Z`.

use num_integer::Roots;
use serde::{Deserialize, Serialize};

use crate::bohr::{bohr_contains, BohrSpec};
use crate::torus::Verdict;
use crate::window::{Window, WindowedSet};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SetSpec {
    All,
    /// `a + qZ`.
    Progression { a: i64, q: i64 },
    /// Non-negative perfect squares.
    Squares,
    /// `set + m`.
    Shifted { set: Box<SetSpec>, m: i64 },
    Union { sets: Vec<SetSpec> },
    /// Integers outside `Bohr(alpha, eta)`; undecided points count as outside
    /// the complement.
    ComplementOfBohr { spec: BohrSpec },
    Explicit { members: Vec<i64> },
    /// An imported windowed set; nothing outside its window is a member.
    Windowed { set: WindowedSet },
}

impl SetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SetSpec::Progression { q, .. } if *q == 0 => Err(Error::invalid("progression step must be nonzero")),
            SetSpec::Shifted { set, .. } => set.validate(),
            SetSpec::Union { sets } => sets.iter().try_for_each(SetSpec::validate),
            SetSpec::ComplementOfBohr { spec } => spec.validate(),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, n: i64) -> bool {
        match self {
            SetSpec::All => true,
            SetSpec::Progression { a, q } => (n - a).rem_euclid(*q) == 0,
            SetSpec::Squares => n >= 0 && {
                let r = n.sqrt();
                r * r == n
            },
            SetSpec::Shifted { set, m } => n.checked_sub(*m).is_some_and(|x| set.contains(x)),
            SetSpec::Union { sets } => sets.iter().any(|s| s.contains(n)),
            SetSpec::ComplementOfBohr { spec } => bohr_contains(spec, n) == Verdict::No,
            SetSpec::Explicit { members } => members.contains(&n),
            SetSpec::Windowed { set } => set.contains(n),
        }
    }

    pub fn enumerate(&self, window: Window) -> WindowedSet {
        WindowedSet::from_predicate(window, self.describe(), |n| Verdict::from_bool(self.contains(n)))
    }

    pub fn describe(&self) -> String {
        match self {
            SetSpec::All => "all".into(),
            SetSpec::Progression { a, q } => format!("{a} mod {q}"),
            SetSpec::Squares => "squares".into(),
            SetSpec::Shifted { set, m } => format!("({}) + {m}", set.describe()),
            SetSpec::Union { sets } => sets.iter().map(SetSpec::describe).collect::<Vec<_>>().join(" | "),
            SetSpec::ComplementOfBohr { spec } => format!("not bohr(eta={})", spec.eta),
            SetSpec::Explicit { members } => format!("explicit({} elements)", members.len()),
            SetSpec::Windowed { set } => format!("windowed({})", set.source()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bohr::sqrt_primes;
    use crate::torus::Q;

    #[test]
    fn membership() {
        assert!(SetSpec::Progression { a: 1, q: 3 }.contains(-2));
        assert!(SetSpec::Squares.contains(49) && !SetSpec::Squares.contains(50) && !SetSpec::Squares.contains(-1));
        let shifted = SetSpec::Shifted {
            set: Box::new(SetSpec::Squares),
            m: 2,
        };
        assert!(shifted.contains(11));
        let u = SetSpec::Union {
            sets: vec![SetSpec::Explicit { members: vec![5] }, SetSpec::Progression { a: 0, q: 10 }],
        };
        assert!(u.contains(5) && u.contains(20) && !u.contains(6));
        let cb = SetSpec::ComplementOfBohr {
            spec: BohrSpec::new(sqrt_primes(1).unwrap(), Q::new(3, 20)).unwrap(),
        };
        assert!(!cb.contains(5) && cb.contains(1));
    }

    #[test]
    fn json_round_trip() {
        let s = SetSpec::Shifted {
            set: Box::new(SetSpec::Progression { a: 0, q: 2 }),
            m: 1,
        };
        let js = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SetSpec>(&js).unwrap(), s);
        let evens = SetSpec::Progression { a: 0, q: 2 }.enumerate(Window::new(-4, 4).unwrap());
        assert_eq!(evens.members(), &[-4, -2, 0, 2, 4]);
    }
}
