//! Ground truth for tests: lattice enumeration, exact halfspace volume, grid brackets.

use crate::arith::{IBig, Rational, UBig};
use crate::geometry::{cube_cover_bound, GeometryError};
use crate::model::Instance;
use crate::robp::LatticeConstraint;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{needed} grid points exceed the budget of {budget}")]
    BudgetExceeded { needed: UBig, budget: u64 },
    #[error("{0} nonzero coefficients: too many subsets")]
    TooManySubsets(usize),
    #[error("coefficient {0} is negative")]
    NegativeCoefficient(usize),
    #[error("grid brackets need nondecreasing functions")]
    NotMonotone,
    #[error("cube cover check failed on {instance}: {detail}")]
    AssertionFailed { instance: String, detail: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Largest subset sum formula we evaluate: `2^MAX_SUBSET_DIM` terms.
pub const MAX_SUBSET_DIM: usize = 20;

struct Table {
    /// `t[i][j][d]`
    t: Vec<Vec<Vec<Rational>>>,
    bounds: Vec<Rational>,
    /// `rest[i][l]`: smallest possible sum of coordinates `l..n` in row `i`.
    rest: Vec<Vec<Rational>>,
    monotone: bool,
    labels: usize,
}

impl Table {
    fn new(t: Vec<Vec<Vec<Rational>>>, bounds: Vec<Rational>, labels: usize) -> Self {
        let monotone = t.iter().flatten().all(|col| col.windows(2).all(|w| w[0] <= w[1]));
        let rest = t
            .iter()
            .map(|row| {
                let mut acc = vec![Rational::zero(); row.len() + 1];
                for j in (0..row.len()).rev() {
                    acc[j] = &acc[j + 1] + row[j].iter().min().unwrap();
                }
                acc
            })
            .collect();
        Table { t, bounds, rest, monotone, labels }
    }

    fn of_instance(inst: &Instance, labels: usize, point: impl Fn(usize) -> Rational) -> Self {
        let t = inst
            .constraints()
            .iter()
            .map(|c| c.fns.iter().map(|f| (0..labels).map(|d| f.eval(&point(d))).collect()).collect())
            .collect();
        let bounds = inst.constraints().iter().map(|c| c.bound.clone()).collect();
        Table::new(t, bounds, labels)
    }

    fn n(&self) -> usize {
        self.rest.first().map_or(0, |r| r.len() - 1)
    }

    fn fits(&self, sums: &[Rational], l: usize, d: usize) -> bool {
        (0..self.t.len()).all(|i| &sums[i] + &self.t[i][l][d] + &self.rest[i][l + 1] <= self.bounds[i])
    }

    fn dfs(&self, l: usize, sums: &mut Vec<Rational>, fast_last: bool, out: &mut UBig) {
        let n = self.n();
        if l == n {
            *out += UBig::ONE;
            return;
        }
        if fast_last && self.monotone && l + 1 == n {
            let (mut lo, mut hi) = (0, self.labels);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if self.fits(sums, l, mid) {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            *out += UBig::from(lo);
            return;
        }
        for d in 0..self.labels {
            if !self.fits(sums, l, d) {
                if self.monotone {
                    break;
                }
                continue;
            }
            for (i, s) in sums.iter_mut().enumerate() {
                *s += &self.t[i][l][d];
            }
            self.dfs(l + 1, sums, fast_last, out);
            for (i, s) in sums.iter_mut().enumerate() {
                *s -= &self.t[i][l][d];
            }
        }
    }

    fn count(&self, fast_last: bool) -> UBig {
        let mut out = UBig::ZERO;
        let mut sums = vec![Rational::zero(); self.t.len()];
        self.dfs(0, &mut sums, fast_last, &mut out);
        out
    }

    fn count_unpruned(&self) -> UBig {
        let (n, m) = (self.n(), self.labels);
        let mut out = UBig::ZERO;
        let mut x = vec![0usize; n];
        loop {
            let inside = (0..self.t.len()).all(|i| {
                let s: Rational = (0..n).map(|j| &self.t[i][j][x[j]]).sum();
                s <= self.bounds[i]
            });
            if inside {
                out += UBig::ONE;
            }
            let mut j = 0;
            while j < n && x[j] + 1 == m {
                x[j] = 0;
                j += 1;
            }
            if j == n {
                return out;
            }
            x[j] += 1;
        }
    }
}

fn check_budget(labels: u64, n: usize, budget: u64) -> Result<(), OracleError> {
    let needed = UBig::from(labels).pow(n);
    if needed > UBig::from(budget) {
        return Err(OracleError::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// `|{x in {0..u-1}^n : x/u in K}|` with the default budget.
pub fn enumerate_integer_points(inst: &Instance, u: u64) -> Result<UBig, OracleError> {
    enumerate_integer_points_with(inst, u, DEFAULT_BUDGET)
}

pub fn enumerate_integer_points_with(inst: &Instance, u: u64, budget: u64) -> Result<UBig, OracleError> {
    check_budget(u, inst.n(), budget)?;
    Ok(Table::of_instance(inst, u as usize, |d| Rational::new(d as u64, u)).count(false))
}

/// Same count by scanning every grid point.
pub fn enumerate_unpruned(inst: &Instance, u: u64, budget: u64) -> Result<UBig, OracleError> {
    check_budget(u, inst.n(), budget)?;
    Ok(Table::of_instance(inst, u as usize, |d| Rational::new(d as u64, u)).count_unpruned())
}

/// Points of `{0..u-1}^n` satisfying every tabulated constraint.
pub fn enumerate_lattice(lcs: &[LatticeConstraint], budget: u64) -> Result<UBig, OracleError> {
    let (n, u) = lcs.first().map_or((0, 0), |lc| (lc.n(), lc.u()));
    check_budget(u as u64, n, budget)?;
    let t = lcs.iter().map(|lc| lc.tables.clone()).collect();
    let bounds = lcs.iter().map(|lc| lc.bound.clone()).collect();
    Ok(Table::new(t, bounds, u).count(false))
}

/// Volume of `[0,1]^n ∩ {a . x <= b}` for `a >= 0`, by inclusion-exclusion over the nonzero coordinates.
pub fn exact_halfspace_volume(a: &[IBig], b: &Rational) -> Result<Rational, OracleError> {
    if let Some(j) = a.iter().position(|aj| aj < &IBig::ZERO) {
        return Err(OracleError::NegativeCoefficient(j));
    }
    let a: Vec<Rational> = a.iter().filter(|aj| aj != &&IBig::ZERO).map(|aj| Rational::from(aj.clone())).collect();
    let n = a.len();
    if b.is_negative() {
        return Ok(Rational::zero());
    }
    if n == 0 {
        return Ok(Rational::one());
    }
    if n > MAX_SUBSET_DIM {
        return Err(OracleError::TooManySubsets(n));
    }
    let mut total = Rational::zero();
    for mask in 0u32..(1 << n) {
        let s: Rational = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| &a[j]).sum();
        let r = b - &s;
        if r.is_positive() {
            let term = r.pow(n);
            if mask.count_ones() % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
    }
    let fact: UBig = (1..=n as u64).map(UBig::from).product();
    let prod: Rational = a.iter().cloned().product();
    Ok(total / (Rational::from(fact) * prod))
}

fn require_monotone(inst: &Instance) -> Result<(), OracleError> {
    let negative = inst
        .constraints()
        .iter()
        .flat_map(|c| &c.fns)
        .any(|f| f.linear_coefficient().is_some_and(|a| a.is_negative()));
    if negative {
        return Err(OracleError::NotMonotone);
    }
    Ok(())
}

/// `(lower, upper)` with `lower <= vol <= upper`, from the cells of the `m`-grid whose max corner
/// (lower) or min corner (upper) is feasible.
pub fn riemann_volume_bounds(inst: &Instance, m: u64, budget: u64) -> Result<(Rational, Rational), OracleError> {
    require_monotone(inst)?;
    check_budget(m, inst.n(), budget)?;
    let cells = Rational::from(UBig::from(m).pow(inst.n()));
    let upper = Table::of_instance(inst, m as usize, |d| Rational::new(d as u64, m)).count(true);
    let lower = Table::of_instance(inst, m as usize, |d| Rational::new(d as u64 + 1, m)).count(true);
    Ok((Rational::from(lower) / &cells, Rational::from(upper) / cells))
}

/// Reference volume for the cube-cover check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VolumeRef {
    Exact(Rational),
    Bracket { lower: Rational, upper: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeCoverReport {
    pub count: UBig,
    /// `|Z| / u^n`
    pub cover_volume: Rational,
    pub bound: Rational,
    /// `cover_volume / vol`, against the lower end of a bracket.
    pub ratio: Rational,
}

/// Checks `vol <= |Z|/u^n <= bound * vol` with `bound = cube_cover_bound(n, u, ell)`.
pub fn check_cube_cover(
    inst: &Instance,
    u: u64,
    ell: &Rational,
    vol: &VolumeRef,
    budget: u64,
) -> Result<CubeCoverReport, OracleError> {
    require_monotone(inst)?;
    let bound = cube_cover_bound(inst.n(), &UBig::from(u), ell)?;
    let count = enumerate_integer_points_with(inst, u, budget)?;
    let cover_volume = Rational::from(count.clone()) / Rational::from(UBig::from(u).pow(inst.n()));
    let (lo, hi) = match vol {
        VolumeRef::Exact(v) => (v.clone(), v.clone()),
        VolumeRef::Bracket { lower, upper } => (lower.clone(), upper.clone()),
    };
    let fail = |detail: String| OracleError::AssertionFailed { instance: format!("{inst:?}"), detail };
    if cover_volume < lo {
        return Err(fail(format!("cover volume {cover_volume} below volume {lo}")));
    }
    if cover_volume > &bound * &hi {
        return Err(fail(format!("cover volume {cover_volume} above {bound} * {hi}")));
    }
    let ratio = if lo.is_zero() { Rational::zero() } else { &cover_volume / &lo };
    Ok(CubeCoverReport { count, cover_volume, bound, ratio })
}

/// Per axis, `(lo, hi)` with `lo` feasible, `lo <= ell_j <= hi` and `hi - lo <= 2^-bits`
/// (`lo = hi = 1` when the whole axis is feasible).
pub fn bisect_intercept(inst: &Instance, bits: u32) -> Vec<(Rational, Rational)> {
    let n = inst.n();
    let on_axis = |j: usize, t: &Rational| {
        let mut x = vec![Rational::zero(); n];
        x[j] = t.clone();
        inst.contains(&x)
    };
    (0..n)
        .map(|j| {
            if on_axis(j, &Rational::one()) {
                return (Rational::one(), Rational::one());
            }
            let (mut lo, mut hi) = (Rational::zero(), Rational::one());
            let two = Rational::from(2u32);
            for _ in 0..bits {
                let mid = (&lo + &hi) / &two;
                if on_axis(j, &mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo, hi)
        })
        .collect()
}

/// Bracket on `ell(K) = min_j ell_j`.
pub fn intercept_bracket(inst: &Instance, bits: u32) -> (Rational, Rational) {
    let per = bisect_intercept(inst, bits);
    let lo = per.iter().map(|p| p.0.clone()).min().unwrap();
    let hi = per.iter().map(|p| p.1.clone()).min().unwrap();
    (lo, hi)
}
