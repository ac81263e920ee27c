//! One constraint rounded against a source: breakpoints are chosen per source vertex and the
//! program keeps their union.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::source::SmallSpaceSource;
use super::MultiError;
use crate::arith::{IBig, Rational, UBig};
use crate::robp::sweep::{self, label_runs, Run, Threshold};
use crate::robp::{check_eta, Grid, LatticeConstraint};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcedLayer {
    /// Union of the per-vertex breakpoints, in grid units.
    pub breakpoints: Vec<UBig>,
    /// `counts[w][j]`: accepted suffixes from breakpoint `j` under source vertex `w`.
    pub counts: Vec<Vec<UBig>>,
    /// Indices into `breakpoints` selected for each source vertex.
    pub selected: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct SourcedRobp {
    pub(crate) n: usize,
    pub(crate) u: u64,
    pub(crate) eta: Rational,
    pub(crate) den: UBig,
    pub(crate) limit: UBig,
    pub(crate) increments: Vec<Vec<UBig>>,
    pub(crate) layers: Vec<SourcedLayer>,
}

fn runs_for<'a>(
    src: &SmallSpaceSource,
    layer: usize,
    w: usize,
    table: &'a [UBig],
    below: &'a [Vec<UBig>],
) -> Vec<Run<'a>> {
    let mut runs = Vec::new();
    for e in &src.layers()[layer].edges[w] {
        for (d, m) in label_runs(table, e.lo as usize, e.hi as usize) {
            runs.push(Run { shift: &table[d], mult: m, counts: &below[e.target] });
        }
    }
    runs
}

/// Rounds `lc` with per-layer factor `eta`, choosing breakpoints under each source vertex's
/// suffix distribution.
pub fn round_robp_vs_source(
    lc: &LatticeConstraint,
    src: &SmallSpaceSource,
    eta: &Rational,
    max_width: Option<usize>,
) -> Result<SourcedRobp, MultiError> {
    lc.check()?;
    check_eta(eta)?;
    if lc.n() != src.n() || lc.u() as u64 != src.u() {
        return Err(MultiError::MismatchedShapes(format!(
            "constraint is {}x{}, source is {}x{}",
            lc.n(),
            lc.u(),
            src.n(),
            src.u()
        )));
    }
    let grid = Grid::new(lc);
    let limit = grid.bound.clone().ok_or(MultiError::NegativeBound)?;
    let n = lc.n();
    let rule = Threshold::new(eta);
    let s_n = src.layers()[n].vertices.len();
    let mut cur = SourcedLayer {
        breakpoints: vec![UBig::ZERO, &limit + UBig::ONE],
        counts: vec![vec![UBig::ONE, UBig::ZERO]; s_n],
        selected: vec![vec![0, 1]; s_n],
    };
    let mut layers = Vec::with_capacity(n + 1);
    for l in (1..n).rev() {
        let table = &grid.tables[l];
        let width = src.layers()[l].vertices.len();
        let sels: Vec<Vec<UBig>> = (0..width)
            .into_par_iter()
            .map(|w| {
                let runs = runs_for(src, l, w, table, &cur.counts);
                sweep::select(&cur.breakpoints, &runs, &limit, &rule).breakpoints
            })
            .collect();
        let mut union: Vec<UBig> = sels.iter().flatten().cloned().collect();
        union.sort();
        union.dedup();
        if let Some(cap) = max_width {
            if union.len() > cap {
                return Err(MultiError::WidthCapExceeded { layer: l, cap });
            }
        }
        let counts: Vec<Vec<UBig>> = (0..width)
            .into_par_iter()
            .map(|w| {
                let runs = runs_for(src, l, w, table, &cur.counts);
                sweep::evaluate_at(&cur.breakpoints, &runs, &limit, &union)
            })
            .collect();
        let selected = sels
            .iter()
            .map(|bs| bs.iter().map(|b| union.binary_search(b).expect("member of union")).collect())
            .collect();
        let next = SourcedLayer { breakpoints: union, counts, selected };
        layers.push(std::mem::replace(&mut cur, next));
    }
    let runs = runs_for(src, 0, 0, &grid.tables[0], &cur.counts);
    let z = sweep::evaluate_at(&cur.breakpoints, &runs, &limit, &[UBig::ZERO]).pop().unwrap();
    layers.push(cur);
    layers.push(SourcedLayer { breakpoints: vec![UBig::ZERO], counts: vec![vec![z]], selected: vec![vec![0]] });
    layers.reverse();
    Ok(SourcedRobp { n, u: src.u(), eta: eta.clone(), den: grid.den, limit, increments: grid.tables, layers })
}

impl SourcedRobp {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    pub fn eta(&self) -> &Rational {
        &self.eta
    }

    pub fn layers(&self) -> &[SourcedLayer] {
        &self.layers
    }

    /// Union widths per layer.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.breakpoints.len()).collect()
    }

    /// Number of source-distributed inputs the rounded program accepts.
    pub fn zprime(&self) -> &UBig {
        &self.layers[0].counts[0][0]
    }

    pub fn breakpoint(&self, layer: usize, j: usize) -> Rational {
        Rational::from_parts(IBig::from(self.layers[layer].breakpoints[j].clone()), self.den.clone())
    }

    /// `P_w(beta_j)`: acceptance probability from breakpoint `j` under the suffix distribution of `w`.
    pub fn probability(&self, src: &SmallSpaceSource, layer: usize, w: usize, j: usize) -> Rational {
        Rational::from(self.layers[layer].counts[w][j].clone()) / Rational::from(src.layers()[layer].counts[w].clone())
    }

    /// Count at an arbitrary grid value below source vertex `w`, summed label by label.
    pub fn suffix_count_at(&self, src: &SmallSpaceSource, layer: usize, w: usize, value: &UBig) -> UBig {
        if value > &self.limit {
            return UBig::ZERO;
        }
        let next = &self.layers[layer + 1];
        let mut s = UBig::ZERO;
        for e in &src.layers()[layer].edges[w] {
            for d in e.lo..=e.hi {
                let x = value + &self.increments[layer][d as usize];
                if x <= self.limit {
                    s += &next.counts[e.target][Grid::round(&next.breakpoints, &x)];
                }
            }
        }
        s
    }

    /// Follows the rounded transitions on any input in `{0..u-1}^n`.
    pub fn evaluate(&self, x: &[u64]) -> Result<bool, MultiError> {
        if x.len() != self.n || x.iter().any(|&d| d >= self.u) {
            return Err(MultiError::MismatchedShapes(format!("input {x:?} is outside {{0..{}}}^{}", self.u, self.n)));
        }
        let mut j = 0usize;
        for (l, &d) in x.iter().enumerate() {
            let v = &self.layers[l].breakpoints[j] + &self.increments[l][d as usize];
            if v > self.limit {
                return Ok(false);
            }
            j = Grid::round(&self.layers[l + 1].breakpoints, &v);
        }
        Ok(true)
    }

    /// Robp-style dump with each probability tagged by its source vertex.
    pub fn dump(&self, src: &SmallSpaceSource) -> String {
        let mut s = String::new();
        for l in 0..self.layers.len() {
            let _ = write!(s, "layer {l}:");
            for j in 0..self.layers[l].breakpoints.len() {
                for w in 0..self.layers[l].counts.len() {
                    let _ = write!(s, " [{}@w{w}:{}]", self.breakpoint(l, j), self.probability(src, l, w, j));
                }
            }
            s.push('\n');
        }
        s
    }
}
