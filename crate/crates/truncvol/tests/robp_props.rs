use proptest::prelude::*;

use truncvol::arith::{q, Rational, UBig};
use truncvol::oracles::enumerate_lattice;
use truncvol::robp::{
    count_binary_knapsack, count_lattice, round_robp_single, IntervalRobp, LatticeConstraint, RobpOptions,
};

fn table(steps: &[u8]) -> Vec<Rational> {
    let mut acc = 0u64;
    let mut t = vec![Rational::zero()];
    for &s in steps {
        acc += s as u64;
        t.push(Rational::from(acc));
    }
    t
}

fn lattice() -> impl Strategy<Value = LatticeConstraint> {
    (1usize..=3, 2usize..=6)
        .prop_flat_map(|(n, u)| (prop::collection::vec(prop::collection::vec(0u8..5, u - 1), n), 0u64..30))
        .prop_map(|(rows, b)| LatticeConstraint { tables: rows.iter().map(|r| table(r)).collect(), bound: Rational::from(b) })
}

fn points(n: usize, u: u64) -> Vec<Vec<u64>> {
    (0..u.pow(n as u32)).map(|i| (0..n).map(|j| i / u.pow(j as u32) % u).collect()).collect()
}

/// Breakpoints re-derived by scanning every grid value and applying the rule directly.
fn reference_breakpoints(robp: &IntervalRobp, layer: usize) -> Vec<UBig> {
    let limit = (robp.bound() / &robp.grid_step()).floor();
    let limit = UBig::try_from(limit).unwrap();
    let one_eta = Rational::one() + robp.eta();
    let mut out = vec![UBig::ZERO];
    let mut prev = robp.suffix_count_at(layer, &UBig::ZERO);
    let mut v = UBig::ONE;
    while v <= limit {
        let c = robp.suffix_count_at(layer, &v);
        if c > UBig::ZERO && Rational::from(c.clone()) * &one_eta < Rational::from(prev.clone()) {
            out.push(v.clone());
            prev = c;
        }
        v += UBig::ONE;
    }
    out.push(limit + UBig::ONE);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sandwich_against_enumeration(lc in lattice(), d in 1u32..8) {
        let delta = Rational::new(d, 8);
        let exact = Rational::from(enumerate_lattice(std::slice::from_ref(&lc), 1 << 20).unwrap());
        let (z, robp) = round_robp_single(&lc, &delta).unwrap();
        prop_assert!(z >= exact);
        prop_assert!(z <= &exact * &(Rational::one() + &delta));
        prop_assert_eq!(robp.zprime(), z);
    }

    #[test]
    fn rounding_only_adds_points(lc in lattice()) {
        let (_, robp) = round_robp_single(&lc, &q("1/2")).unwrap();
        let mut accepted = 0u64;
        for x in points(lc.n(), lc.u() as u64) {
            let a = robp.evaluate(&x).unwrap();
            if lc.holds(&x) {
                prop_assert!(a);
            }
            accepted += a as u64;
        }
        // the start count is the number of accepted inputs
        prop_assert_eq!(Rational::from(accepted), robp.zprime());
    }

    #[test]
    fn breakpoints_follow_the_rule(lc in lattice(), d in 1u32..4) {
        let (_, robp) = round_robp_single(&lc, &Rational::new(d, 4)).unwrap();
        for l in 1..lc.n() {
            prop_assert_eq!(&robp.layers()[l].breakpoints, &reference_breakpoints(&robp, l));
        }
    }

    #[test]
    fn widths_are_bounded(lc in lattice(), d in 1u32..8) {
        let (_, robp) = round_robp_single(&lc, &Rational::new(d, 8)).unwrap();
        let n = lc.n() as u64;
        let log_u = 63 - (lc.u() as u64).leading_zeros() as u64;
        for w in robp.widths() {
            prop_assert!(Rational::from(w as u64) <= Rational::one() + Rational::from(2 * n * log_u) / robp.eta());
        }
    }

    #[test]
    fn probabilities_are_counts_over_suffixes(lc in lattice()) {
        let (_, robp) = round_robp_single(&lc, &q("1/3")).unwrap();
        let u = lc.u() as u64;
        for l in 0..=lc.n() {
            let layer = &robp.layers()[l];
            for i in 0..layer.width() {
                let p = robp.probability(l, i);
                prop_assert!(p >= Rational::zero() && p <= Rational::one());
                prop_assert_eq!(p * Rational::from(UBig::from(u).pow(lc.n() - l)), Rational::from(layer.counts[i].clone()));
            }
            // counts fall along each layer
            prop_assert!(layer.counts.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn knapsack_sandwich(w in prop::collection::vec(0u64..20, 1..10), b in 0u64..60) {
        let ws: Vec<UBig> = w.iter().map(|&x| UBig::from(x)).collect();
        let exact = (0u64..1 << w.len())
            .filter(|m| (0..w.len()).filter(|j| m >> j & 1 == 1).map(|j| w[j]).sum::<u64>() <= b)
            .count() as u64;
        let delta = q("1/5");
        let z = count_binary_knapsack(&ws, &UBig::from(b), &delta).unwrap();
        prop_assert!(z >= Rational::from(exact) && z <= Rational::from(exact) * q("6/5"));
    }

    #[test]
    fn edge_targets_rise_with_labels(lc in lattice()) {
        let (_, robp) = round_robp_single(&lc, &q("1/4")).unwrap();
        for l in 0..lc.n() {
            for i in 0..robp.layers()[l].width() {
                let edges = robp.edges(l, i);
                prop_assert_eq!(edges[0].lo, 0);
                prop_assert_eq!(edges.last().unwrap().hi, lc.u() as u64 - 1);
                prop_assert!(edges.windows(2).all(|e| e[0].hi + 1 == e[1].lo && e[0].target < e[1].target));
            }
        }
    }

    #[test]
    fn halved_eta_stays_in_its_own_sandwich(lc in lattice(), d in 1u32..8) {
        let exact = Rational::from(enumerate_lattice(std::slice::from_ref(&lc), 1 << 20).unwrap());
        let n = lc.n();
        let mut eta = Rational::new(d, 16);
        for _ in 0..2 {
            let opts = RobpOptions { eta_override: Some(eta.clone()), max_width: None };
            let z = count_lattice(&lc, &q("1/2"), &opts).unwrap().0;
            prop_assert!(z >= exact && z <= &exact * &(Rational::one() + &eta).pow(n));
            eta = eta / Rational::from(2u32);
        }
    }
}
