//! Built-in oracle-vs-estimator corpus.

use serde::Serialize;

use truncvol::arith::{q, IBig, Rational};
use truncvol::model::{Instance, SeparableConstraint, UnivariateFn};
use truncvol::multi::{round_robps, MultiOptions};
use truncvol::oracles::{enumerate_lattice, exact_halfspace_volume, riemann_volume_bounds, OracleError};
use truncvol::robp::{round_robp_single, LatticeConstraint};
use truncvol::volume::{estimate, volume_halfspace, volume_multi_halfspace, VolumeOptions};

#[derive(Debug, Clone, Default, Serialize)]
pub struct SelftestSummary {
    pub cases: usize,
    pub passed: usize,
    pub skipped: Vec<String>,
    pub failures: Vec<String>,
}

enum Outcome {
    Pass,
    Skip(String),
    Fail(String),
}

fn sandwich(name: &str, got: &Rational, lo: &Rational, hi: &Rational) -> Outcome {
    if got >= lo && got <= hi {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("{name}: {got} outside [{lo}, {hi}]"))
    }
}

fn ints(v: &[i64]) -> Vec<IBig> {
    v.iter().map(|&x| IBig::from(x)).collect()
}

fn linear_lc(a: &[u64], u: u64, b: u64) -> LatticeConstraint {
    let tables = a.iter().map(|&ai| (0..u).map(|d| Rational::from(ai * d)).collect()).collect();
    LatticeConstraint { tables, bound: Rational::from(b) }
}

fn halfspace_case(a: &[i64], b: i64) -> Outcome {
    let eps = q("1/2");
    let name = format!("halfspace {a:?} <= {b}");
    let est = match volume_halfspace(&ints(a), &IBig::from(b), &eps, &VolumeOptions::default()) {
        Ok(e) => e.estimate,
        Err(e) => return Outcome::Fail(format!("{name}: {e}")),
    };
    let w: Vec<IBig> = a.iter().map(|&x| IBig::from(x.abs())).collect();
    let c = b + a.iter().filter(|&&x| x < 0).map(|x| -x).sum::<i64>();
    let v = exact_halfspace_volume(&w, &Rational::from(c)).expect("small n");
    let hi = &v * &(Rational::one() + &eps);
    sandwich(&name, &est, &v, &hi)
}

fn lattice_case(lcs: &[LatticeConstraint], budget: u64) -> Outcome {
    let name = format!("lattice n={} u={} k={}", lcs[0].n(), lcs[0].u(), lcs.len());
    let exact = match enumerate_lattice(lcs, budget) {
        Ok(z) => Rational::from(z),
        Err(OracleError::BudgetExceeded { .. }) => return Outcome::Skip(format!("{name}: over budget")),
        Err(e) => return Outcome::Fail(format!("{name}: {e}")),
    };
    let delta = q("1/4");
    let z = if lcs.len() == 1 {
        round_robp_single(&lcs[0], &delta).map(|r| r.0).map_err(|e| e.to_string())
    } else {
        round_robps(lcs, &delta, &MultiOptions::default()).map(|o| Rational::from(o.zprime)).map_err(|e| e.to_string())
    };
    match z {
        Ok(z) => {
            let hi = &exact * &(Rational::one() + &delta);
            sandwich(&name, &z, &exact, &hi)
        }
        Err(e) => Outcome::Fail(format!("{name}: {e}")),
    }
}

fn bracket_case(name: &str, inst: &Instance, budget: u64) -> Outcome {
    let eps = q("1/2");
    let mut m = 2u64;
    while (m * 2).checked_pow(inst.n() as u32).is_some_and(|c| c <= budget) && m < 4096 {
        m *= 2;
    }
    let (lo, hi) = match riemann_volume_bounds(inst, m, budget) {
        Ok(b) => b,
        Err(e) => return Outcome::Skip(format!("{name}: {e}")),
    };
    if &hi - &lo >= &eps / &Rational::from(4u32) * &lo {
        return Outcome::Skip(format!("{name}: bracket too wide at m={m}"));
    }
    match estimate(inst, None, &eps, &VolumeOptions::default()) {
        Ok(e) => sandwich(name, &e.estimate, &lo, &(hi * (Rational::one() + eps))),
        Err(e) => Outcome::Fail(format!("{name}: {e}")),
    }
}

fn convex_instances() -> Vec<(&'static str, Instance)> {
    let mono = |c: &str, e| UnivariateFn::monomial(q(c), e);
    let row = |fns, b: &str| SeparableConstraint::new(fns, q(b));
    vec![
        ("x^2 <= 1/4", Instance::new(1, vec![row(vec![mono("1", 2)], "1/4")]).unwrap()),
        ("x^2 + y^3 <= 1", Instance::new(2, vec![row(vec![mono("1", 2), mono("1", 3)], "1")]).unwrap()),
        (
            "x + y <= 1, x^2 + y^2 <= 1/2",
            Instance::new(2, vec![row(vec![mono("1", 1), mono("1", 1)], "1"), row(vec![mono("1", 2), mono("1", 2)], "1/2")])
                .unwrap(),
        ),
    ]
}

/// Runs every case; cases whose oracle would exceed `budget` grid points are skipped.
pub fn run_selftest(budget: u64) -> SelftestSummary {
    let mut outcomes = Vec::new();
    for (a, b) in [(&[1i64, 1][..], 1i64), (&[2, -3][..], 1), (&[-2][..], -1), (&[3, 5, 1][..], 4), (&[1, 2, 3, 4][..], 5)] {
        outcomes.push(halfspace_case(a, b));
    }
    outcomes.push(lattice_case(&[linear_lc(&[1, 1], 4, 3)], budget));
    outcomes.push(lattice_case(&[linear_lc(&[2, 3, 1], 16, 30)], budget));
    outcomes.push(lattice_case(&[linear_lc(&[1, 1], 8, 9), linear_lc(&[2, 1], 8, 10)], budget));
    let tri = volume_multi_halfspace(&[ints(&[1, 1]), ints(&[2, 1])], &ints(&[1, 1]), &q("1/4"), &VolumeOptions::default());
    outcomes.push(match tri {
        Ok(e) => sandwich("triangle", &e.estimate, &q("1/4"), &q("5/16")),
        Err(e) => Outcome::Fail(format!("triangle: {e}")),
    });
    for (name, inst) in convex_instances() {
        outcomes.push(bracket_case(name, &inst.validate().expect("valid corpus"), budget));
    }
    let mut s = SelftestSummary { cases: outcomes.len(), ..Default::default() };
    for o in outcomes {
        match o {
            Outcome::Pass => s.passed += 1,
            Outcome::Skip(m) => s.skipped.push(m),
            Outcome::Fail(m) => s.failures.push(m),
        }
    }
    s
}
