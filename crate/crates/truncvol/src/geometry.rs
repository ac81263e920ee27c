//! Axis-intercept search and choice of the lattice scale `u`.

use crate::arith::{isqrt_ceil, IBig, Rational, UBig};
use crate::model::Instance;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("no feasible point on some axis down to 2^-{max_bits}")]
    IntercptBelowBudget { max_bits: u32 },
    #[error("a bound is zero while its row has a nonzero coefficient")]
    ZeroBound,
    #[error("negative bound")]
    NegativeBound,
    #[error("epsilon must be positive")]
    BadEpsilon,
    #[error("instance is empty")]
    EmptyInstance,
    #[error("u*ell is too small for the cube-cover bound")]
    TooNarrow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterceptResult {
    pub ell_prime: Rational,
    pub per_axis: Vec<Rational>,
    pub iterations_used: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalePlan {
    pub u: UBig,
    pub power_of_two: bool,
    pub epsilon: Rational,
    /// Counting error handed to the lattice counter: epsilon / 9.
    pub delta: Rational,
}

/// Per axis, halves `z` from 1 until every row holds at `z e_j`.
pub fn find_intercept(inst: &Instance, max_bits: u32) -> Result<InterceptResult, GeometryError> {
    if inst.is_empty() {
        return Err(GeometryError::EmptyInstance);
    }
    let half = Rational::new(1, 2);
    let mut per_axis = Vec::with_capacity(inst.n());
    let mut iterations = 0u64;
    for j in 0..inst.n() {
        let mut z = Rational::one();
        let mut found = None;
        for _ in 0..=max_bits {
            iterations += 1;
            if inst.constraints().iter().all(|c| c.fns[j].eval(&z) <= c.bound) {
                found = Some(z);
                break;
            }
            z = z * &half;
        }
        per_axis.push(found.ok_or(GeometryError::IntercptBelowBudget { max_bits })?);
    }
    let ell_prime = per_axis.iter().min().unwrap().clone();
    Ok(InterceptResult { ell_prime, per_axis, iterations_used: iterations })
}

/// ceil(n^2.5), via the integer square root of n^5.
pub fn n_pow_2_5_ceil(n: usize) -> UBig {
    isqrt_ceil(&UBig::from(n).pow(5))
}

pub enum ScaleBasis<'a> {
    /// Canonical single halfspace `w . x <= c`; `u` is rounded up to a power of two.
    Halfspace { w: &'a [UBig], c: &'a IBig },
    /// Nonnegative rows `a_i . x <= b_i`.
    MultiLinear { rows: &'a [Vec<Rational>], bounds: &'a [Rational] },
    Intercept(&'a InterceptResult),
}

fn ceil_ubig(x: &Rational) -> UBig {
    UBig::try_from(x.ceil()).expect("nonnegative")
}

pub fn choose_scale(n: usize, epsilon: &Rational, basis: ScaleBasis<'_>) -> Result<ScalePlan, GeometryError> {
    if !epsilon.is_positive() {
        return Err(GeometryError::BadEpsilon);
    }
    let base = Rational::from(9u32) * Rational::from(n_pow_2_5_ceil(n)) / epsilon;
    let delta = epsilon / &Rational::from(9u32);
    let plan = |u, power_of_two| ScalePlan { u, power_of_two, epsilon: epsilon.clone(), delta: delta.clone() };
    match basis {
        ScaleBasis::Halfspace { w, c } => {
            let any_weight = w.iter().any(|x| x != &UBig::ZERO);
            if c < &IBig::ZERO {
                return Err(GeometryError::NegativeBound);
            }
            if c == &IBig::ZERO && any_weight {
                return Err(GeometryError::ZeroBound);
            }
            let mut m = Rational::one();
            if c > &IBig::ZERO {
                let c = Rational::from(c.clone());
                for wj in w {
                    m = m.max(Rational::from(wj.clone()) / &c);
                }
            }
            let target = ceil_ubig(&(base * m));
            let mut u = UBig::from(2u8);
            while u < target {
                u <<= 1;
            }
            Ok(plan(u, true))
        }
        ScaleBasis::MultiLinear { rows, bounds } => {
            let mut m = Rational::one();
            for (row, b) in rows.iter().zip(bounds) {
                let nonzero = row.iter().any(|a| !a.is_zero());
                if b.is_negative() {
                    return Err(GeometryError::NegativeBound);
                }
                if b.is_zero() {
                    if nonzero {
                        return Err(GeometryError::ZeroBound);
                    }
                    continue;
                }
                for a in row {
                    m = m.max(a / b);
                }
            }
            Ok(plan(ceil_ubig(&(base * m)).max(UBig::ONE), false))
        }
        ScaleBasis::Intercept(ic) => Ok(plan(ceil_ubig(&(base / &ic.ell_prime)).max(UBig::ONE), false)),
    }
}

/// Rational upper bound on `(1 + 2 n sqrt(n) / (u ell))^n`, with sqrt(n) rounded up at 2^-64.
pub fn cube_cover_bound(n: usize, u: &UBig, ell: &Rational) -> Result<Rational, GeometryError> {
    let ul = Rational::from(u.clone()) * ell;
    let n3 = Rational::from(UBig::from(n).pow(3));
    if ul.pow(2) <= Rational::from(4u32) * n3 {
        return Err(GeometryError::TooNarrow);
    }
    let scale = UBig::ONE << 64;
    let s = Rational::from_parts(IBig::from(isqrt_ceil(&(UBig::from(n) * &scale * &scale))), scale);
    let step = Rational::from(2 * n) * s / ul;
    Ok((Rational::one() + step).pow(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;
    use crate::model::{SeparableConstraint, UnivariateFn};

    fn ubig(v: u64) -> UBig {
        UBig::from(v)
    }

    #[test]
    fn intercept_examples() {
        let inst = Instance::linear(&[vec![q("1"), q("2")]], &[q("1")]).unwrap().validate().unwrap();
        let r = find_intercept(&inst, 128).unwrap();
        assert_eq!(r.per_axis, vec![q("1"), q("1/2")]);
        assert_eq!(r.ell_prime, q("1/2"));

        let inst = Instance::linear(&[vec![q("1")]], &[q("2")]).unwrap().validate().unwrap();
        let r = find_intercept(&inst, 128).unwrap();
        assert_eq!(r.per_axis, vec![q("1")]);
        assert_eq!(r.iterations_used, 1);

        let inst = Instance::linear(&[vec![q("1")]], &[q("0")]).unwrap().validate().unwrap();
        assert_eq!(find_intercept(&inst, 16), Err(GeometryError::IntercptBelowBudget { max_bits: 16 }));
    }

    #[test]
    fn intercept_with_flat_pwl_start() {
        // zero on [0, 1/4]: feasible with b = 0
        let f = UnivariateFn::piecewise(vec![(q("0"), q("0")), (q("1/4"), q("0")), (q("1"), q("3"))]);
        let inst = Instance::new(1, vec![SeparableConstraint::new(vec![f], q("0"))]).unwrap().validate().unwrap();
        assert_eq!(find_intercept(&inst, 8).unwrap().ell_prime, q("1/4"));
    }

    #[test]
    fn scale_examples() {
        let w = [ubig(1), ubig(1)];
        let p = choose_scale(2, &q("1"), ScaleBasis::Halfspace { w: &w, c: &IBig::ONE }).unwrap();
        assert_eq!(p.u, ubig(64));
        assert!(p.power_of_two);
        assert_eq!(p.delta, q("1/9"));

        let ic = InterceptResult { ell_prime: q("1"), per_axis: vec![q("1")], iterations_used: 1 };
        assert_eq!(choose_scale(1, &q("1"), ScaleBasis::Intercept(&ic)).unwrap().u, ubig(9));

        let w = [ubig(4), ubig(1)];
        let p = choose_scale(2, &q("1/2"), ScaleBasis::Halfspace { w: &w, c: &IBig::from(2) }).unwrap();
        assert_eq!(p.u, ubig(256));

        let rows = [vec![q("1"), q("1")], vec![q("2"), q("1")]];
        let p = choose_scale(2, &q("1/4"), ScaleBasis::MultiLinear { rows: &rows, bounds: &[q("1"), q("1")] }).unwrap();
        // 9 * ceil(2^2.5) * 2 / (1/4) = 432
        assert_eq!(p.u, ubig(432));

        let w = [ubig(3)];
        assert_eq!(
            choose_scale(1, &q("1"), ScaleBasis::Halfspace { w: &w, c: &IBig::ZERO }),
            Err(GeometryError::ZeroBound)
        );
        let rows = [vec![q("1")]];
        assert_eq!(
            choose_scale(1, &q("1"), ScaleBasis::MultiLinear { rows: &rows, bounds: &[q("0")] }),
            Err(GeometryError::ZeroBound)
        );
    }

    #[test]
    fn n_pow_values() {
        assert_eq!(n_pow_2_5_ceil(1), ubig(1));
        assert_eq!(n_pow_2_5_ceil(2), ubig(6));
        assert_eq!(n_pow_2_5_ceil(4), ubig(32));
        assert_eq!(n_pow_2_5_ceil(3), ubig(16));
    }

    #[test]
    fn scale_is_large_enough() {
        // u^2 eps^2 ell^2 >= 81 n^5
        for n in 1..=10usize {
            for eps in ["1", "1/2", "1/4", "3/7"] {
                for ell in ["1", "1/2", "1/8"] {
                    let ic = InterceptResult { ell_prime: q(ell), per_axis: vec![], iterations_used: 0 };
                    let p = choose_scale(n, &q(eps), ScaleBasis::Intercept(&ic)).unwrap();
                    let lhs = (Rational::from(p.u) * q(eps) * q(ell)).pow(2);
                    assert!(lhs >= Rational::from(81 * (n as u64).pow(5)));
                }
            }
        }
    }

    #[test]
    fn cube_cover_examples() {
        assert!(cube_cover_bound(1, &ubig(4), &q("1")).unwrap() >= q("3/2"));
        assert!(cube_cover_bound(1, &ubig(4), &q("1")).unwrap() - q("3/2") < q("1/1000000"));
        let b = cube_cover_bound(2, &ubig(100), &q("1")).unwrap();
        // sqrt 2 in [1.41421, 1.41422]
        assert!(b >= (q("1") + q("4") * q("141421/100000") / q("100")).pow(2));
        assert!(b <= (q("1") + q("4") * q("141422/100000") / q("100")).pow(2));
        let mut prev = cube_cover_bound(4, &ubig(40), &q("1")).unwrap();
        for k in 1..8 {
            let next = cube_cover_bound(4, &(ubig(40) << k), &q("1")).unwrap();
            assert!(next <= prev && next > q("1"));
            prev = next;
        }
        assert_eq!(cube_cover_bound(2, &ubig(5), &q("1")), Err(GeometryError::TooNarrow));
        assert_eq!(cube_cover_bound(2, &ubig(64), &q("0")), Err(GeometryError::TooNarrow));
    }
}
