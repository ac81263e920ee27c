//! Several separable constraints at once: Dyer rounding, an exact source over the rounded
//! solution set, per-constraint rounding against it, and the intersection.

mod product;
mod source;
mod sourced;

pub use product::{intersect_robps, ProductLayer, ProductRobp, ProductVertex};
pub use source::{build_source, SmallSpaceSource, SourceLayer};
pub use sourced::{round_robp_vs_source, SourcedLayer, SourcedRobp};

use rayon::prelude::*;

use crate::arith::{Rational, UBig};
use crate::model::Instance;
use crate::robp::{LatticeConstraint, RobpError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MultiError {
    #[error("constraint {constraint} has bound 0 and a nonzero row")]
    ZeroBound { constraint: usize },
    #[error("negative bound")]
    NegativeBound,
    #[error("rounded solution set is empty")]
    EmptySource,
    #[error("shape mismatch: {0}")]
    MismatchedShapes(String),
    #[error("layer {layer} needs more than {cap} vertices")]
    WidthCapExceeded { layer: usize, cap: usize },
    #[error(transparent)]
    Robp(#[from] RobpError),
}

/// `h[i][j][d] = floor(cap * g_ij(d) / b_i)` with `cap = 2n^2`; values above `cap` are stored as `cap + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundedConstraintSet {
    pub n: usize,
    pub u: u64,
    pub cap: u64,
    pub h: Vec<Vec<Vec<u64>>>,
}

impl RoundedConstraintSet {
    /// Membership in `S`: every rounded row sums to at most the cap.
    pub fn holds(&self, x: &[u64]) -> bool {
        self.h.iter().all(|row| row.iter().zip(x).map(|(t, &d)| t[d as usize]).sum::<u64>() <= self.cap)
    }
}

fn check_shapes(lcs: &[LatticeConstraint]) -> Result<(usize, usize), MultiError> {
    let first = lcs.first().ok_or_else(|| MultiError::MismatchedShapes("no constraints".into()))?;
    let (n, u) = (first.n(), first.u());
    for (i, lc) in lcs.iter().enumerate() {
        lc.check()?;
        if lc.n() != n || lc.u() != u {
            return Err(MultiError::MismatchedShapes(format!("constraint {i} is {}x{}, expected {n}x{u}", lc.n(), lc.u())));
        }
    }
    Ok((n, u))
}

pub fn dyer_round(lcs: &[LatticeConstraint]) -> Result<RoundedConstraintSet, MultiError> {
    let (n, u) = check_shapes(lcs)?;
    let cap = 2 * (n as u64).pow(2);
    let capr = Rational::from(cap);
    let mut h = Vec::with_capacity(lcs.len());
    for (i, lc) in lcs.iter().enumerate() {
        if !lc.bound.is_positive() {
            return Err(MultiError::ZeroBound { constraint: i });
        }
        let scale = &capr / &lc.bound;
        let row = lc
            .tables
            .iter()
            .map(|t| {
                t.iter()
                    .map(|g| {
                        let v = (g * &scale).floor();
                        u64::try_from(v).ok().filter(|&v| v <= cap).unwrap_or(cap + 1)
                    })
                    .collect()
            })
            .collect();
        h.push(row);
    }
    Ok(RoundedConstraintSet { n, u: u as u64, cap, h })
}

/// `g_ij(d) = f_ij(d / u)` for every row of a normalized instance.
pub fn tabulate(inst: &Instance, u: u64) -> Vec<LatticeConstraint> {
    inst.constraints().iter().map(|c| LatticeConstraint::from_fns(&c.fns, &c.bound, u)).collect()
}

#[derive(Debug, Clone, Default)]
pub struct MultiOptions {
    /// Replaces `epsilon / (4 k n^k)`.
    pub eta_override: Option<Rational>,
    pub max_width: Option<usize>,
    /// Keep a text dump of every part.
    pub retain_debug: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiOutcome {
    pub zprime: UBig,
    /// `|S|`, or `u^n` when no row constrains anything.
    pub source_size: UBig,
    pub eta: Rational,
    /// Per-layer factor used by each part: `eta / (2n)`.
    pub step_eta: Rational,
    pub source_widths: Vec<usize>,
    pub part_widths: Vec<Vec<usize>>,
    pub product_widths: Vec<usize>,
    /// Rows kept after dropping vacuous ones.
    pub active_rows: Vec<usize>,
    pub dump: Option<String>,
}

/// `Z'` with `|Z| <= Z' <= (1 + epsilon)|Z|` for the intersection of all rows on `{0..u-1}^n`.
pub fn round_robps(lcs: &[LatticeConstraint], epsilon: &Rational, opts: &MultiOptions) -> Result<MultiOutcome, MultiError> {
    if !epsilon.is_positive() || epsilon >= &Rational::one() {
        return Err(RobpError::BadDelta(epsilon.clone()).into());
    }
    let (n, u) = check_shapes(lcs)?;
    let zero = || MultiOutcome {
        zprime: UBig::ZERO,
        source_size: UBig::ZERO,
        eta: Rational::zero(),
        step_eta: Rational::zero(),
        source_widths: Vec::new(),
        part_widths: Vec::new(),
        product_widths: Vec::new(),
        active_rows: Vec::new(),
        dump: None,
    };
    if lcs.iter().any(|lc| lc.bound.is_negative()) {
        return Ok(zero());
    }
    let active: Vec<usize> =
        (0..lcs.len()).filter(|&i| lcs[i].tables.iter().flatten().any(|g| !g.is_zero())).collect();
    if active.is_empty() {
        let all = UBig::from(u).pow(n);
        return Ok(MultiOutcome { zprime: all.clone(), source_size: all, active_rows: active, ..zero() });
    }
    let rows: Vec<LatticeConstraint> = active.iter().map(|&i| lcs[i].clone()).collect();
    let k = rows.len();
    let eta = match &opts.eta_override {
        Some(e) => e.clone(),
        None => epsilon / &(Rational::from(4 * k) * Rational::from(UBig::from(n).pow(k))),
    };
    let step_eta = &eta / &Rational::from(2 * n);
    let rcs = dyer_round(&rows).map_err(|e| match e {
        MultiError::ZeroBound { constraint } => MultiError::ZeroBound { constraint: active[constraint] },
        e => e,
    })?;
    let src = match build_source(&rcs) {
        Ok(s) => s,
        Err(MultiError::EmptySource) => return Ok(zero()),
        Err(e) => return Err(e),
    };
    let parts: Vec<SourcedRobp> = rows
        .par_iter()
        .map(|lc| round_robp_vs_source(lc, &src, &step_eta, opts.max_width))
        .collect::<Result<_, _>>()?;
    let product = intersect_robps(&parts, &src, opts.max_width)?;
    let dump = opts.retain_debug.then(|| {
        parts.iter().zip(&active).map(|(p, i)| format!("constraint {i}\n{}", p.dump(&src))).collect::<String>()
    });
    Ok(MultiOutcome {
        zprime: product.zprime().clone(),
        source_size: src.size().clone(),
        eta,
        step_eta,
        source_widths: src.widths(),
        part_widths: parts.iter().map(|p| p.widths()).collect(),
        product_widths: product.widths(),
        active_rows: active,
        dump,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;

    fn linear_lc(a: &[u64], u: u64, b: &str) -> LatticeConstraint {
        let tables = a.iter().map(|&ai| (0..u).map(|d| Rational::from(ai * d)).collect()).collect();
        LatticeConstraint { tables, bound: q(b) }
    }

    fn points(n: usize, u: u64) -> impl Iterator<Item = Vec<u64>> {
        (0..u.pow(n as u32)).map(move |i| (0..n).map(|j| i / u.pow(j as u32) % u).collect())
    }

    #[test]
    fn dyer_examples() {
        let r = dyer_round(&[linear_lc(&[1, 1], 4, "4")]).unwrap();
        assert_eq!(r.cap, 8);
        assert_eq!(r.h[0][0], vec![0, 2, 4, 6]);
        let r = dyer_round(&[linear_lc(&[1, 1], 4, "3")]).unwrap();
        assert_eq!(r.h[0][0][1], 2);
        assert_eq!(dyer_round(&[linear_lc(&[1, 1], 4, "0")]), Err(MultiError::ZeroBound { constraint: 0 }));
    }

    #[test]
    fn dyer_sandwich_small() {
        let lcs = [linear_lc(&[1, 1], 4, "4")];
        let r = dyer_round(&lcs).unwrap();
        let z = points(2, 4).filter(|x| lcs[0].holds(x)).count();
        let s = points(2, 4).filter(|x| r.holds(x)).count();
        assert!(z <= s && s <= 4 * z);
        assert_eq!(build_source(&r).unwrap().size(), &UBig::from(s));
    }

    #[test]
    fn two_constraint_example() {
        let lcs = [linear_lc(&[1, 1], 4, "3"), linear_lc(&[2, 1], 4, "4")];
        let exact = points(2, 4).filter(|x| lcs.iter().all(|lc| lc.holds(x))).count() as u64;
        let eps = q("1/4");
        let out = round_robps(&lcs, &eps, &MultiOptions::default()).unwrap();
        let z = Rational::from(out.zprime.clone());
        assert!(z >= Rational::from(exact) && z <= Rational::from(exact) * (q("1") + eps), "{z} vs {exact}");
        assert_eq!(out.eta, q("1/128"));
    }

    #[test]
    fn negative_bound_and_vacuous_rows() {
        let lcs = [linear_lc(&[1, 1], 4, "3"), linear_lc(&[1, 1], 4, "-1")];
        assert_eq!(round_robps(&lcs, &q("1/2"), &MultiOptions::default()).unwrap().zprime, UBig::ZERO);
        let lcs = [linear_lc(&[0, 0], 4, "0")];
        assert_eq!(round_robps(&lcs, &q("1/2"), &MultiOptions::default()).unwrap().zprime, UBig::from(16u8));
        let lcs = [linear_lc(&[0, 0], 4, "0"), linear_lc(&[1, 0], 4, "0")];
        assert_eq!(round_robps(&lcs, &q("1/2"), &MultiOptions::default()), Err(MultiError::ZeroBound { constraint: 1 }));
    }

    #[test]
    fn product_matches_parts_pointwise() {
        let lcs = [linear_lc(&[1, 2], 4, "4"), linear_lc(&[3, 1], 4, "5")];
        let rcs = dyer_round(&lcs).unwrap();
        let src = build_source(&rcs).unwrap();
        let eta = q("1/3");
        let parts: Vec<SourcedRobp> = lcs.iter().map(|lc| round_robp_vs_source(lc, &src, &eta, None).unwrap()).collect();
        let prod = intersect_robps(&parts, &src, None).unwrap();
        let mut accepted = 0u64;
        for x in points(2, 4) {
            let all = parts.iter().all(|p| p.evaluate(&x).unwrap());
            assert_eq!(prod.evaluate(&x).unwrap(), all);
            assert_eq!(prod.accepts_in_source(&x), all && rcs.holds(&x));
            if all && rcs.holds(&x) {
                accepted += 1;
            }
        }
        assert_eq!(prod.zprime(), &UBig::from(accepted));

        // single part: product accepts exactly what the part accepts
        let prod1 = intersect_robps(&parts[..1], &src, None).unwrap();
        for x in points(2, 4) {
            assert_eq!(prod1.evaluate(&x).unwrap(), parts[0].evaluate(&x).unwrap());
        }
    }

    #[test]
    fn always_accepting_part_is_identity() {
        let lcs = [linear_lc(&[1, 2], 4, "4"), linear_lc(&[1, 1], 4, "100")];
        let src = build_source(&dyer_round(&lcs).unwrap()).unwrap();
        let eta = q("1/5");
        let parts: Vec<SourcedRobp> = lcs.iter().map(|lc| round_robp_vs_source(lc, &src, &eta, None).unwrap()).collect();
        let prod = intersect_robps(&parts, &src, None).unwrap();
        for x in points(2, 4) {
            assert_eq!(prod.evaluate(&x).unwrap(), parts[0].evaluate(&x).unwrap());
        }
    }

    #[test]
    fn k1_agrees_with_single() {
        let lc = linear_lc(&[2, 3, 1], 5, "8");
        let exact = points(3, 5).filter(|x| lc.holds(x)).count() as u64;
        let eps = q("1/4");
        let (single, _) = crate::robp::round_robp_single(&lc, &eps).unwrap();
        let multi = Rational::from(round_robps(&[lc], &eps, &MultiOptions::default()).unwrap().zprime);
        let hi = Rational::from(exact) * (q("1") + &eps);
        for z in [single, multi] {
            assert!(z >= Rational::from(exact) && z <= hi);
        }
    }
}
