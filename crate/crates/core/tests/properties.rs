use std::f64::consts::PI;

use proptest::prelude::*;

use recur_core::bohr::{bh_contains, bohr_contains, hamming_ball_size, sqrt_primes, BohrHammingSpec, BohrSpec};
use recur_core::dynamics::{intersection_measure, BoxSet, RotationSystem, Side};
use recur_core::kleitman::{kleitman_check, KleitmanInstance, Mode};
use recur_core::ks::DiscreteMeasure;
use recur_core::torus::{char_distance, torus_norm, Frequencies};
use recur_core::{TorusPoint, Verdict, Q};

fn raw_norm(r: u128) -> u128 {
    r.min(r.wrapping_neg())
}

fn ratio() -> impl Strategy<Value = Q> {
    (0i128..1000, 1i128..1000).prop_map(|(a, b)| Q::new(a, b))
}

fn sqrt_freq(d: usize) -> Frequencies {
    sqrt_primes(d).unwrap().into()
}

proptest! {
    #[test]
    fn norm_character_bounds(raw in any::<u128>()) {
        let x = TorusPoint::from_raw(raw);
        let (t, v) = (torus_norm(&x), char_distance(&x));
        prop_assert!(4.0 * t <= v && v <= 2.0 * PI * t, "t={t} v={v}");
    }

    #[test]
    fn norm_character_bounds_rational(q in ratio()) {
        let x = TorusPoint::from_ratio(q);
        let (t, v) = (torus_norm(&x), char_distance(&x));
        prop_assert!(4.0 * t <= v && v <= 2.0 * PI * t, "x={q} t={t} v={v}");
    }

    #[test]
    fn triangle_inequality(a in any::<u128>(), b in any::<u128>()) {
        let (x, y) = (TorusPoint::from_raw(a), TorusPoint::from_raw(b));
        let s = &x + &y;
        prop_assert!(raw_norm(s.raw()) <= raw_norm(a).saturating_add(raw_norm(b)));
        prop_assert_eq!(raw_norm((&x - &y).raw()), raw_norm(a.wrapping_sub(b)));
    }

    #[test]
    fn multiples_stay_exact(q in ratio(), n in -1000i64..1000) {
        let x = TorusPoint::from_ratio(q).mul_int(n);
        let want = q * Q::from_integer(n as i128);
        prop_assert_eq!(x.as_ratio(), Some(want - want.floor()));
    }

    #[test]
    fn bohr_sets_are_symmetric(d in 1usize..4, eta in 1i128..60, n in -100_000i64..100_000) {
        let spec = BohrSpec::new(sqrt_freq(d), Q::new(eta, 100)).unwrap();
        prop_assert_eq!(bohr_contains(&spec, n), bohr_contains(&spec, -n));
    }

    #[test]
    fn bohr_hamming_is_monotone(
        d in 1usize..4,
        eps in 1i128..50,
        deps in 0i128..50,
        eta in 1i128..5,
        deta in 0i128..4,
        shift in -50i64..50,
        n in -20_000i64..20_000,
    ) {
        let freq = sqrt_freq(d);
        let small = BohrHammingSpec::new(freq.clone(), Q::new(eps, 100), Q::new(eta, 4), shift).unwrap();
        let large = BohrHammingSpec::new(freq, Q::new(eps + deps, 100), Q::new((eta + deta).min(4), 4), shift).unwrap();
        if bh_contains(&small, n) == Verdict::Yes {
            prop_assert_ne!(bh_contains(&large, n), Verdict::No);
        }
    }

    #[test]
    fn ball_size_matches_brute_force(k in 2u64..6, d in 1u32..6, r in 0u32..6) {
        prop_assume!(r <= d);
        let brute = (0..k.pow(d))
            .filter(|&v| {
                let mut w = v;
                let mut weight = 0;
                for _ in 0..d {
                    weight += u32::from(w % k != 0);
                    w /= k;
                }
                weight <= r
            })
            .count() as u128;
        prop_assert_eq!(hamming_ball_size(k, d, r).unwrap(), brute);
        if r < d {
            prop_assert!(hamming_ball_size(k, d, r + 1).unwrap() > brute);
        }
    }

    #[test]
    fn return_measure_is_symmetric(
        alpha in ratio(),
        start in ratio(),
        len in 1i128..100,
        n in -500i64..500,
    ) {
        let sys = RotationSystem::Torus { freq: Frequencies::rational(vec![alpha]).unwrap() };
        let start = start - start.floor();
        let d = BoxSet { boxes: vec![vec![Side::arc(start, Q::new(len, 100))]] };
        prop_assert_eq!(intersection_measure(&sys, &d, n).unwrap(), intersection_measure(&sys, &d, -n).unwrap());
    }

    #[test]
    fn rigidity_depends_on_difference(q in ratio(), n in -1000i64..1000, m in -1000i64..1000, t in -100i64..100) {
        let mu = DiscreteMeasure::point_mass(TorusPoint::from_ratio(q));
        let v = mu.rigidity_value(n, m);
        prop_assert_eq!(v, mu.rigidity_value(n + t, m + t));
        prop_assert!((0.0..=2.0).contains(&v));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kleitman_is_monotone_in_radius(k in 2u32..4, d in 1u32..4, num in 1i128..8) {
        prop_assume!(u64::from(k).pow(d) <= 16);
        let delta = Q::new(num, 8);
        let holds: Vec<bool> = (0..=d)
            .map(|r| kleitman_check(&KleitmanInstance { k, d, delta, r, mode: Mode::Exhaustive }, 16).unwrap().holds())
            .collect();
        for r in 1..holds.len() {
            prop_assert!(!holds[r - 1] || holds[r], "k={k} d={d} delta={delta}: {holds:?}");
        }
    }
}
