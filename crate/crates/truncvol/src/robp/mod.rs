//! Interval read-once branching programs for one separable constraint over `{0..u-1}^n`.
//!
//! Layer `l` holds rounded partial sums after `l` coordinates. Values live on the grid
//! `{m / D}` where `D` is the common denominator of the bound and every tabulated increment,
//! so every true partial sum is a grid point. Each layer keeps, per breakpoint, the number of
//! accepted suffixes under the rounding of the deeper layers.

pub(crate) mod sweep;

use std::fmt::Write as _;

use dashu_base::PowerOfTwo;

use crate::arith::{ceil_log2, encoding_length, lcm, IBig, Rational, UBig};
use crate::model::UnivariateFn;
use sweep::{label_runs, Run, Threshold};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RobpError {
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(Rational),
    #[error("eta must lie in (0, 1), got {0}")]
    BadEta(Rational),
    #[error("invalid increment table: {0}")]
    InvalidTable(String),
    #[error("u = {0} is not a power of two >= 2")]
    NotPowerOfTwo(UBig),
    #[error("input out of range: {0}")]
    OutOfRange(String),
    #[error("layer {layer} needs more than {cap} breakpoints")]
    WidthCapExceeded { layer: usize, cap: usize },
}

/// Labels `lo..=hi` leaving one vertex all reach `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeInterval {
    pub lo: u64,
    pub hi: u64,
    pub target: usize,
}

/// `sum_j g_j(x_j) <= bound` with `g_j` tabulated on `{0..u-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeConstraint {
    pub tables: Vec<Vec<Rational>>,
    pub bound: Rational,
}

impl LatticeConstraint {
    /// Tabulates `g_j(d) = f_j(d / u)`.
    pub fn from_fns(fns: &[UnivariateFn], bound: &Rational, u: u64) -> Self {
        let tables = fns
            .iter()
            .map(|f| (0..u).map(|d| f.eval(&Rational::new(d, u))).collect())
            .collect();
        Self { tables, bound: bound.clone() }
    }

    /// Binary knapsack `w . x <= cap`, `x in {0,1}^n`.
    pub fn knapsack(w: &[UBig], cap: &UBig) -> Self {
        let tables = w.iter().map(|wj| vec![Rational::zero(), Rational::from(wj.clone())]).collect();
        Self { tables, bound: Rational::from(cap.clone()) }
    }

    pub fn n(&self) -> usize {
        self.tables.len()
    }

    pub fn u(&self) -> usize {
        self.tables.first().map_or(0, |t| t.len())
    }

    pub fn holds(&self, x: &[u64]) -> bool {
        let s: Rational = self.tables.iter().zip(x).map(|(t, &d)| &t[d as usize]).sum();
        s <= self.bound
    }

    pub(crate) fn check(&self) -> Result<(), RobpError> {
        let u = self.u();
        if self.tables.is_empty() || u == 0 {
            return Err(RobpError::InvalidTable("no layers or no labels".into()));
        }
        for (j, t) in self.tables.iter().enumerate() {
            if t.len() != u {
                return Err(RobpError::InvalidTable(format!("table {j} has {} entries, expected {u}", t.len())));
            }
            if !t[0].is_zero() {
                return Err(RobpError::InvalidTable(format!("table {j} is not zero at 0")));
            }
            if t.windows(2).any(|w| w[1] < w[0]) {
                return Err(RobpError::InvalidTable(format!("table {j} is not nondecreasing")));
            }
        }
        Ok(())
    }

    /// Max encoding length over the bound and the tabulated values, times ceil(log u), plus ceil(log n).
    pub fn l_prime(&self) -> u64 {
        let l = self
            .tables
            .iter()
            .flatten()
            .chain(std::iter::once(&self.bound))
            .map(encoding_length)
            .max()
            .unwrap_or(1);
        l * ceil_log2(&UBig::from(self.u().max(1))) as u64 + ceil_log2(&UBig::from(self.n().max(1))) as u64
    }
}

/// Integer form of a lattice constraint on its common-denominator grid.
#[derive(Debug, Clone)]
pub(crate) struct Grid {
    pub den: UBig,
    pub tables: Vec<Vec<UBig>>,
    /// `None` when the bound is negative.
    pub bound: Option<UBig>,
}

impl Grid {
    pub fn new(lc: &LatticeConstraint) -> Self {
        let mut den = lc.bound.denom().clone();
        for t in &lc.tables {
            for v in t {
                if v.denom() != &UBig::ONE {
                    den = lcm(&den, v.denom());
                }
            }
        }
        let scale = |v: &Rational| -> IBig { (v * &Rational::from(den.clone())).floor() };
        let tables = lc
            .tables
            .iter()
            .map(|t| t.iter().map(|v| UBig::try_from(scale(v)).expect("nonnegative table")).collect())
            .collect();
        let bound = UBig::try_from(scale(&lc.bound)).ok();
        Grid { den, tables, bound }
    }

    /// Rounding of `x` into sorted breakpoints: the index of the largest one `<= x`.
    pub fn round(bps: &[UBig], x: &UBig) -> usize {
        bps.partition_point(|b| b <= x) - 1
    }
}

/// Breakpoints of one layer in grid units, with accepted-suffix counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundedLayer {
    pub breakpoints: Vec<UBig>,
    pub counts: Vec<UBig>,
}

impl RoundedLayer {
    pub fn width(&self) -> usize {
        self.breakpoints.len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RobpOptions {
    /// Replaces `delta / (2n)`.
    pub eta_override: Option<Rational>,
    pub max_width: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct IntervalRobp {
    n: usize,
    u: u64,
    eta: Rational,
    bound: Rational,
    den: UBig,
    grid_bound: Option<UBig>,
    increments: Vec<Vec<UBig>>,
    layers: Vec<RoundedLayer>,
    l_prime: u64,
}

struct Built {
    zprime: UBig,
    layers: Vec<RoundedLayer>,
    widths: Vec<usize>,
}

pub(crate) fn check_eta(eta: &Rational) -> Result<(), RobpError> {
    if !eta.is_positive() || eta >= &Rational::one() {
        return Err(RobpError::BadEta(eta.clone()));
    }
    Ok(())
}

fn build(grid: &Grid, u: usize, eta: &Rational, max_width: Option<usize>, retain: bool) -> Result<Built, RobpError> {
    let n = grid.tables.len();
    let Some(limit) = &grid.bound else {
        let layers = if retain {
            vec![RoundedLayer { breakpoints: vec![UBig::ZERO], counts: vec![UBig::ZERO] }; n + 1]
        } else {
            Vec::new()
        };
        return Ok(Built { zprime: UBig::ZERO, layers, widths: vec![1; n + 1] });
    };
    let rule = Threshold::new(eta);
    let mut cur = RoundedLayer { breakpoints: vec![UBig::ZERO, limit + UBig::ONE], counts: vec![UBig::ONE, UBig::ZERO] };
    let mut widths = vec![0; n + 1];
    widths[n] = 2;
    let mut kept = Vec::new();
    for l in (1..n).rev() {
        let table = &grid.tables[l];
        let groups = label_runs(table, 0, u - 1);
        let runs: Vec<Run> = groups
            .iter()
            .map(|&(d, m)| Run { shift: &table[d], mult: m, counts: &cur.counts })
            .collect();
        let sel = sweep::select(&cur.breakpoints, &runs, limit, &rule);
        if let Some(cap) = max_width {
            if sel.breakpoints.len() > cap {
                return Err(RobpError::WidthCapExceeded { layer: l, cap });
            }
        }
        widths[l] = sel.breakpoints.len();
        let next = RoundedLayer { breakpoints: sel.breakpoints, counts: sel.counts };
        if retain {
            kept.push(std::mem::replace(&mut cur, next));
        } else {
            cur = next;
        }
    }
    let table = &grid.tables[0];
    let groups = label_runs(table, 0, u - 1);
    let runs: Vec<Run> = groups.iter().map(|&(d, m)| Run { shift: &table[d], mult: m, counts: &cur.counts }).collect();
    let zprime = sweep::evaluate_at(&cur.breakpoints, &runs, limit, &[UBig::ZERO]).pop().unwrap();
    widths[0] = 1;
    let mut layers = Vec::new();
    if retain {
        kept.push(cur);
        kept.push(RoundedLayer { breakpoints: vec![UBig::ZERO], counts: vec![zprime.clone()] });
        kept.reverse();
        layers = kept;
    }
    Ok(Built { zprime, layers, widths })
}

fn eta_for(delta: &Rational, n: usize, opts: &RobpOptions) -> Result<Rational, RobpError> {
    if !delta.is_positive() || delta >= &Rational::one() {
        return Err(RobpError::BadDelta(delta.clone()));
    }
    let eta = match &opts.eta_override {
        Some(e) => e.clone(),
        None => delta / &Rational::from(2 * n),
    };
    check_eta(&eta)?;
    Ok(eta)
}

/// Rounded program for `lc` with per-layer factor `delta / (2n)`; returns `(Z', program)` with
/// `|Z| <= Z' <= (1 + delta)|Z|`.
pub fn round_robp_single(lc: &LatticeConstraint, delta: &Rational) -> Result<(Rational, IntervalRobp), RobpError> {
    round_robp_single_with(lc, delta, &RobpOptions::default())
}

pub fn round_robp_single_with(
    lc: &LatticeConstraint,
    delta: &Rational,
    opts: &RobpOptions,
) -> Result<(Rational, IntervalRobp), RobpError> {
    lc.check()?;
    let n = lc.n();
    let eta = eta_for(delta, n, opts)?;
    let grid = Grid::new(lc);
    let built = build(&grid, lc.u(), &eta, opts.max_width, true)?;
    let robp = IntervalRobp {
        n,
        u: lc.u() as u64,
        eta,
        bound: lc.bound.clone(),
        den: grid.den,
        grid_bound: grid.bound,
        increments: grid.tables,
        layers: built.layers,
        l_prime: lc.l_prime(),
    };
    Ok((Rational::from(built.zprime), robp))
}

/// Estimate and per-layer widths without keeping the layers.
pub fn count_lattice(lc: &LatticeConstraint, delta: &Rational, opts: &RobpOptions) -> Result<(Rational, Vec<usize>), RobpError> {
    lc.check()?;
    let eta = eta_for(delta, lc.n(), opts)?;
    let grid = Grid::new(lc);
    let built = build(&grid, lc.u(), &eta, opts.max_width, false)?;
    Ok((Rational::from(built.zprime), built.widths))
}

/// `Z'` with `|Z| <= Z' <= (1 + delta)|Z|` for `Z = {x in {0,1}^n : w . x <= b}`.
pub fn count_binary_knapsack(w: &[UBig], b: &UBig, delta: &Rational) -> Result<Rational, RobpError> {
    Ok(count_binary_knapsack_with(w, b, delta, &RobpOptions::default())?.0)
}

pub fn count_binary_knapsack_with(
    w: &[UBig],
    b: &UBig,
    delta: &Rational,
    opts: &RobpOptions,
) -> Result<(Rational, Vec<usize>), RobpError> {
    count_lattice(&LatticeConstraint::knapsack(w, b), delta, opts)
}

/// Bit weights `a_i 2^(j-1)`, `j = 1..log2 u`, concatenated over `i`.
pub fn binary_expand(a: &[UBig], cap: &UBig, u: &UBig) -> Result<(Vec<UBig>, UBig), RobpError> {
    if u < &UBig::from(2u8) || !u.is_power_of_two() {
        return Err(RobpError::NotPowerOfTwo(u.clone()));
    }
    let t = ceil_log2(u);
    let w = a.iter().flat_map(|ai| (0..t).map(move |j| ai << j)).collect();
    Ok((w, cap.clone()))
}

impl IntervalRobp {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    pub fn eta(&self) -> &Rational {
        &self.eta
    }

    pub fn bound(&self) -> &Rational {
        &self.bound
    }

    pub fn l_prime(&self) -> u64 {
        self.l_prime
    }

    /// Spacing of the value grid.
    pub fn grid_step(&self) -> Rational {
        Rational::from_parts(IBig::ONE, self.den.clone())
    }

    pub fn layers(&self) -> &[RoundedLayer] {
        &self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.width()).collect()
    }

    /// Accepted suffix count at the start vertex.
    pub fn zprime(&self) -> Rational {
        Rational::from(self.layers[0].counts[0].clone())
    }

    pub fn breakpoint(&self, layer: usize, i: usize) -> Rational {
        Rational::from_parts(IBig::from(self.layers[layer].breakpoints[i].clone()), self.den.clone())
    }

    pub fn probability(&self, layer: usize, i: usize) -> Rational {
        let total = UBig::from(self.u).pow(self.n - layer);
        Rational::from_parts(IBig::from(self.layers[layer].counts[i].clone()), total)
    }

    fn limit(&self) -> Option<&UBig> {
        self.grid_bound.as_ref()
    }

    /// Suffix count of an arbitrary grid value at layer `l < n`, summed over labels.
    pub fn suffix_count_at(&self, layer: usize, value: &UBig) -> UBig {
        let Some(limit) = self.limit() else { return UBig::ZERO };
        if value > limit {
            return UBig::ZERO;
        }
        let next = &self.layers[layer + 1];
        let mut s = UBig::ZERO;
        for g in &self.increments[layer] {
            let x = value + g;
            if &x <= limit {
                s += &next.counts[Grid::round(&next.breakpoints, &x)];
            }
        }
        s
    }

    /// Edge intervals out of vertex `i` of layer `l < n`.
    pub fn edges(&self, layer: usize, i: usize) -> Vec<EdgeInterval> {
        let next = &self.layers[layer + 1];
        let table = &self.increments[layer];
        let reject = next.breakpoints.len() - 1;
        let Some(limit) = self.limit() else {
            return vec![EdgeInterval { lo: 0, hi: self.u - 1, target: 0 }];
        };
        let beta = &self.layers[layer].breakpoints[i];
        let target_of = |x: &UBig| if x > limit { reject } else { Grid::round(&next.breakpoints, x) };
        let mut out = Vec::new();
        let mut d = 0usize;
        while d < table.len() {
            let t = target_of(&(beta + &table[d]));
            let end = if t == reject {
                table.len()
            } else {
                let nb = &next.breakpoints[t + 1];
                d + table[d..].partition_point(|g| &(beta + g) < nb)
            };
            out.push(EdgeInterval { lo: d as u64, hi: (end - 1) as u64, target: t });
            d = end;
        }
        out
    }

    /// Follows the rounded transitions; accepts iff the walk ends at a probability-1 vertex.
    pub fn evaluate(&self, x: &[u64]) -> Result<bool, RobpError> {
        if x.len() != self.n {
            return Err(RobpError::OutOfRange(format!("expected {} coordinates, got {}", self.n, x.len())));
        }
        if let Some(&bad) = x.iter().find(|&&d| d >= self.u) {
            return Err(RobpError::OutOfRange(format!("label {bad} >= u = {}", self.u)));
        }
        let mut i = 0usize;
        for (l, &d) in x.iter().enumerate() {
            let edges = self.edges(l, i);
            let e = edges.iter().find(|e| e.lo <= d && d <= e.hi).expect("edges cover all labels");
            i = e.target;
        }
        Ok(self.layers[self.n].counts[i] == UBig::ONE)
    }

    /// One line per layer: `layer i: [beta:prob] ...`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for l in 0..self.layers.len() {
            let _ = write!(s, "layer {l}:");
            for i in 0..self.layers[l].width() {
                let _ = write!(s, " [{}:{}]", self.breakpoint(l, i), self.probability(l, i));
            }
            s.push('\n');
        }
        s
    }
}

/// Free-function form of [`IntervalRobp::evaluate`].
pub fn evaluate_robp(robp: &IntervalRobp, x: &[u64]) -> Result<bool, RobpError> {
    robp.evaluate(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;

    fn ubigs(v: &[u64]) -> Vec<UBig> {
        v.iter().map(|&x| UBig::from(x)).collect()
    }

    fn linear_lc(a: &[u64], u: u64, b: &str) -> LatticeConstraint {
        let tables = a.iter().map(|&ai| (0..u).map(|d| Rational::from(ai * d)).collect()).collect();
        LatticeConstraint { tables, bound: q(b) }
    }

    fn count_points(lc: &LatticeConstraint) -> u64 {
        let (n, u) = (lc.n(), lc.u() as u64);
        let mut c = 0;
        for idx in 0..u.pow(n as u32) {
            let x: Vec<u64> = (0..n).map(|j| idx / u.pow(j as u32) % u).collect();
            if lc.holds(&x) {
                c += 1;
            }
        }
        c
    }

    #[test]
    fn two_by_four_example() {
        let lc = linear_lc(&[1, 1], 4, "3");
        assert_eq!(count_points(&lc), 10);
        let (z, robp) = round_robp_single(&lc, &q("1/10")).unwrap();
        assert!(z >= q("10") && z <= q("11"), "{z}");
        assert_eq!(robp.zprime(), z);
    }

    #[test]
    fn all_accept_and_empty() {
        let lc = linear_lc(&[1, 2], 4, "9");
        let (z, _) = round_robp_single(&lc, &q("1/10")).unwrap();
        assert!(z >= q("16") && z <= q("16") * q("11/10"));
        let lc = linear_lc(&[1, 2], 4, "-1");
        let (z, robp) = round_robp_single(&lc, &q("1/10")).unwrap();
        assert_eq!(z, q("0"));
        assert!(!robp.evaluate(&[0, 0]).unwrap());
    }

    #[test]
    fn knapsack_examples() {
        let d = q("1/10");
        let z = count_binary_knapsack(&ubigs(&[1, 2, 3]), &UBig::from(3u8), &d).unwrap();
        assert!(z >= q("5") && z <= q("11/2"));
        let z = count_binary_knapsack(&ubigs(&[1, 1]), &UBig::ZERO, &d).unwrap();
        assert!(z >= q("1") && z <= q("11/10"));
        let z = count_binary_knapsack(&ubigs(&[0, 0, 0]), &UBig::ZERO, &d).unwrap();
        assert!(z >= q("8") && z <= q("88/10"));
    }

    #[test]
    fn bad_delta() {
        let lc = linear_lc(&[1], 2, "1");
        assert!(matches!(round_robp_single(&lc, &q("0")), Err(RobpError::BadDelta(_))));
        assert!(matches!(round_robp_single(&lc, &q("1")), Err(RobpError::BadDelta(_))));
    }

    #[test]
    fn binary_expand_examples() {
        let (w, c) = binary_expand(&ubigs(&[1]), &UBig::from(2u8), &UBig::from(4u8)).unwrap();
        assert_eq!(w, ubigs(&[1, 2]));
        assert_eq!(c, UBig::from(2u8));
        let (w, _) = binary_expand(&ubigs(&[1, 1]), &UBig::ONE, &UBig::from(2u8)).unwrap();
        assert_eq!(w, ubigs(&[1, 1]));
        let (w, _) = binary_expand(&ubigs(&[3]), &UBig::from(7u8), &UBig::from(4u8)).unwrap();
        assert_eq!(w, ubigs(&[3, 6]));
        assert!(matches!(binary_expand(&ubigs(&[3]), &UBig::ONE, &UBig::from(6u8)), Err(RobpError::NotPowerOfTwo(_))));
        assert!(matches!(binary_expand(&ubigs(&[3]), &UBig::ONE, &UBig::ONE), Err(RobpError::NotPowerOfTwo(_))));
    }

    #[test]
    fn evaluate_examples() {
        let lc = linear_lc(&[1], 2, "0");
        let (_, robp) = round_robp_single(&lc, &q("1/2")).unwrap();
        assert!(robp.evaluate(&[0]).unwrap());
        assert!(!robp.evaluate(&[1]).unwrap());
        assert!(matches!(robp.evaluate(&[2]), Err(RobpError::OutOfRange(_))));
        assert!(matches!(robp.evaluate(&[0, 0]), Err(RobpError::OutOfRange(_))));
    }

    #[test]
    fn non_dyadic_grid() {
        // g(d) = d/3: partial sums in thirds
        let tables = vec![(0..4).map(|d| Rational::new(d, 3)).collect::<Vec<_>>(); 3];
        let lc = LatticeConstraint { tables, bound: q("4/3") };
        let (z, robp) = round_robp_single(&lc, &q("1/5")).unwrap();
        let exact = count_points(&lc);
        assert!(z >= Rational::from(exact) && z <= Rational::from(exact) * q("6/5"));
        assert_eq!(robp.grid_step(), q("1/3"));
    }

    #[test]
    fn dump_format() {
        let lc = linear_lc(&[1], 2, "1");
        let (_, robp) = round_robp_single(&lc, &q("1/2")).unwrap();
        assert_eq!(robp.dump(), "layer 0: [0/1:1/1]\nlayer 1: [0/1:1/1] [2/1:0/1]\n");
    }

    #[test]
    fn edges_partition_labels() {
        let lc = linear_lc(&[2, 3, 1], 5, "9");
        let (_, robp) = round_robp_single(&lc, &q("1/3")).unwrap();
        for l in 0..robp.n() {
            for i in 0..robp.layers()[l].width() {
                let e = robp.edges(l, i);
                assert_eq!(e[0].lo, 0);
                assert_eq!(e.last().unwrap().hi, 4);
                for w in e.windows(2) {
                    assert_eq!(w[0].hi + 1, w[1].lo);
                    assert!(w[0].target < w[1].target);
                }
            }
        }
    }
}
