//! Instances: separable constraints over the unit cube, their validation and normalization.

use crate::arith::{IBig, Rational, UBig};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("constraint {constraint}, variable {var}: piecewise-linear slopes decrease")]
    NonConvexPWL { constraint: usize, var: usize },
    #[error("constraint {constraint}, variable {var}: piecewise-linear part is malformed ({reason})")]
    MalformedPWL { constraint: usize, var: usize, reason: &'static str },
    #[error("constraint {constraint}, variable {var}: negative coefficient (mixed-sign systems are not supported)")]
    NegativeCoefficient { constraint: usize, var: usize },
    #[error("constraint {constraint}, variable {var}: exponent must be at least 1")]
    InvalidExponent { constraint: usize, var: usize },
    #[error("expected {expected} functions, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("instance has no constraints")]
    NoConstraints,
    #[error("negative input {0}")]
    NegativeInput(Rational),
}

/// Sum of monomials `c * x^e` plus an optional convex piecewise-linear part.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnivariateFn {
    pub terms: Vec<(Rational, u32)>,
    /// Points `(x_0, y_0), ..., (x_m, y_m)` with `x_0 = 0`; the last slope extends past `x_m`.
    pub pwl: Option<Vec<(Rational, Rational)>>,
}

impl UnivariateFn {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn linear(a: Rational) -> Self {
        Self { terms: vec![(a, 1)], pwl: None }
    }

    pub fn monomial(c: Rational, e: u32) -> Self {
        Self { terms: vec![(c, e)], pwl: None }
    }

    pub fn piecewise(points: Vec<(Rational, Rational)>) -> Self {
        Self { terms: Vec::new(), pwl: Some(points) }
    }

    pub fn with_pwl(mut self, points: Vec<(Rational, Rational)>) -> Self {
        self.pwl = Some(points);
        self
    }

    /// Single monomial of exponent 1.
    pub fn linear_coefficient(&self) -> Option<&Rational> {
        match (self.terms.as_slice(), &self.pwl) {
            ([(c, 1)], None) => Some(c),
            _ => None,
        }
    }

    pub fn evaluate(&self, x: &Rational) -> Result<Rational, ModelError> {
        if x.is_negative() {
            return Err(ModelError::NegativeInput(x.clone()));
        }
        Ok(self.eval(x))
    }

    /// Evaluation without the sign check.
    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for (c, e) in &self.terms {
            if !c.is_zero() {
                acc += c * &x.pow(*e as usize);
            }
        }
        if let Some(pts) = &self.pwl {
            acc += eval_pwl(pts, x);
        }
        acc
    }

    pub fn at_zero(&self) -> Rational {
        // monomials vanish at 0
        match &self.pwl {
            Some(pts) if !pts.is_empty() => pts[0].1.clone(),
            _ => Rational::zero(),
        }
    }

    /// Identically zero on [0, inf).
    pub fn is_zero_fn(&self) -> bool {
        self.terms.iter().all(|(c, _)| c.is_zero())
            && self.pwl.as_ref().map_or(true, |p| p.iter().all(|(_, y)| y.is_zero()))
    }

    fn check(&self, constraint: usize, var: usize, allow_negative: bool) -> Result<(), ModelError> {
        for (c, e) in &self.terms {
            if *e < 1 {
                return Err(ModelError::InvalidExponent { constraint, var });
            }
            if c.is_negative() && !allow_negative {
                return Err(ModelError::NegativeCoefficient { constraint, var });
            }
        }
        let Some(pts) = &self.pwl else { return Ok(()) };
        let bad = |reason| Err(ModelError::MalformedPWL { constraint, var, reason });
        if pts.is_empty() {
            return bad("no points");
        }
        if !pts[0].0.is_zero() {
            return bad("first point must have x = 0");
        }
        if pts[0].1.is_negative() {
            return bad("negative value at 0");
        }
        let mut prev_slope: Option<Rational> = None;
        for w in pts.windows(2) {
            let dx = &w[1].0 - &w[0].0;
            if !dx.is_positive() {
                return bad("x must be strictly increasing");
            }
            let slope = (&w[1].1 - &w[0].1) / dx;
            if slope.is_negative() {
                return bad("decreasing");
            }
            if let Some(p) = &prev_slope {
                if &slope < p {
                    return Err(ModelError::NonConvexPWL { constraint, var });
                }
            }
            prev_slope = Some(slope);
        }
        Ok(())
    }

    fn shifted_down(&self, by: &Rational) -> Self {
        let pwl = self.pwl.as_ref().map(|pts| pts.iter().map(|(x, y)| (x.clone(), y - by)).collect());
        Self { terms: self.terms.clone(), pwl }
    }
}

fn eval_pwl(pts: &[(Rational, Rational)], x: &Rational) -> Rational {
    if pts.len() == 1 {
        return pts[0].1.clone();
    }
    // segment whose left end is the last point with x_i <= x, clamped to the final segment
    let i = pts.partition_point(|(px, _)| px <= x).saturating_sub(1).min(pts.len() - 2);
    let (x0, y0) = &pts[i];
    let (x1, y1) = &pts[i + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Exact evaluation of `f` at `x >= 0`.
pub fn evaluate(f: &UnivariateFn, x: &Rational) -> Result<Rational, ModelError> {
    f.evaluate(x)
}

/// One row `sum_j f_j(x_j) <= bound`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparableConstraint {
    pub fns: Vec<UnivariateFn>,
    pub bound: Rational,
}

impl SeparableConstraint {
    pub fn new(fns: Vec<UnivariateFn>, bound: Rational) -> Self {
        Self { fns, bound }
    }

    pub fn linear(coeffs: &[Rational], bound: Rational) -> Self {
        Self { fns: coeffs.iter().cloned().map(UnivariateFn::linear).collect(), bound }
    }

    pub fn lhs(&self, x: &[Rational]) -> Rational {
        self.fns.iter().zip(x).map(|(f, v)| f.eval(v)).sum()
    }

    pub fn holds(&self, x: &[Rational]) -> bool {
        self.lhs(x) <= self.bound
    }

    /// Smallest value of the left side over the unit cube.
    pub fn min_over_cube(&self) -> Rational {
        self.fns
            .iter()
            .map(|f| match f.linear_coefficient() {
                Some(a) if a.is_negative() => a.clone(),
                _ => f.at_zero(),
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Linear,
    Convex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    constraints: Vec<SeparableConstraint>,
    kind: Kind,
    empty: bool,
}

impl Instance {
    pub fn new(n: usize, constraints: Vec<SeparableConstraint>) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::ZeroDimension);
        }
        if constraints.is_empty() {
            return Err(ModelError::NoConstraints);
        }
        for c in &constraints {
            if c.fns.len() != n {
                return Err(ModelError::DimensionMismatch { expected: n, found: c.fns.len() });
            }
        }
        let linear = constraints.iter().all(|c| c.fns.iter().all(|f| f.linear_coefficient().is_some()));
        let kind = if linear { Kind::Linear } else { Kind::Convex };
        Ok(Self { n, constraints, kind, empty: false })
    }

    /// `A x <= b` over the unit cube.
    pub fn linear(rows: &[Vec<Rational>], b: &[Rational]) -> Result<Self, ModelError> {
        if rows.len() != b.len() {
            return Err(ModelError::DimensionMismatch { expected: rows.len(), found: b.len() });
        }
        let n = rows.first().map_or(0, |r| r.len());
        let cons = rows.iter().zip(b).map(|(r, bi)| SeparableConstraint::linear(r, bi.clone())).collect();
        Self::new(n, cons)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.constraints.len()
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn constraints(&self) -> &[SeparableConstraint] {
        &self.constraints
    }

    /// Set by `validate` when some bound lies below the minimum of its left side.
    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Coefficient rows, for linear instances.
    pub fn linear_rows(&self) -> Option<Vec<Vec<Rational>>> {
        if self.kind != Kind::Linear {
            return None;
        }
        Some(
            self.constraints
                .iter()
                .map(|c| c.fns.iter().map(|f| f.linear_coefficient().unwrap().clone()).collect())
                .collect(),
        )
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.constraints.iter().all(|c| c.holds(x))
    }

    /// Checks representation invariants and flags emptiness.
    pub fn validate(mut self) -> Result<Self, ModelError> {
        // a single linear row may carry negative coefficients; it is canonicalized later
        let allow_negative = self.kind == Kind::Linear && self.constraints.len() == 1;
        for (i, c) in self.constraints.iter().enumerate() {
            for (j, f) in c.fns.iter().enumerate() {
                f.check(i, j, allow_negative)?;
            }
        }
        self.empty = self.constraints.iter().any(|c| c.bound < c.min_over_cube());
        Ok(self)
    }

    /// Subtracts `f_ij(0)` from every function and the row sums from the bounds.
    pub fn normalize_offsets(&self) -> Self {
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                let offsets: Vec<Rational> = c.fns.iter().map(|f| f.at_zero()).collect();
                let total: Rational = offsets.iter().sum();
                SeparableConstraint {
                    fns: c.fns.iter().zip(&offsets).map(|(f, o)| f.shifted_down(o)).collect(),
                    bound: &c.bound - &total,
                }
            })
            .collect();
        Self { n: self.n, constraints, kind: self.kind, empty: self.empty }
    }
}

/// `{w . x <= c}` with `w >= 0`, equal in volume to the input halfspace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalHalfspace {
    pub w: Vec<UBig>,
    pub c: IBig,
    /// Coordinates mapped by `x_j -> 1 - x_j`.
    pub flips: Vec<usize>,
}

pub fn canonicalize_halfspace(a: &[IBig], b: &IBig) -> CanonicalHalfspace {
    let mut c = b.clone();
    let mut flips = Vec::new();
    let mut w = Vec::with_capacity(a.len());
    for (j, aj) in a.iter().enumerate() {
        let mag = UBig::try_from(if aj < &IBig::ZERO { -aj } else { aj.clone() }).unwrap();
        if aj < &IBig::ZERO {
            c += IBig::from(mag.clone());
            flips.push(j);
        }
        w.push(mag);
    }
    CanonicalHalfspace { w, c, flips }
}

impl CanonicalHalfspace {
    /// Applies the flips to the constraint `a . x <= b`, returning the transformed `(a', b')`.
    pub fn apply_flips(&self, a: &[IBig], b: &IBig) -> (Vec<IBig>, IBig) {
        let mut a = a.to_vec();
        let mut b = b.clone();
        for &j in &self.flips {
            // a_j x_j = a_j - a_j (1 - x_j)
            b -= &a[j];
            a[j] = -a[j].clone();
        }
        (a, b)
    }
}
