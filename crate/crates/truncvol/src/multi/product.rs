//! Intersection of sourced programs, walked jointly with the source.

use std::collections::BTreeSet;

use super::source::SmallSpaceSource;
use super::sourced::SourcedRobp;
use super::MultiError;
use crate::arith::UBig;
use crate::robp::{EdgeInterval, Grid};

/// A source vertex paired with one breakpoint index per part.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductVertex {
    pub source: usize,
    pub parts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductLayer {
    pub vertices: Vec<ProductVertex>,
    /// Source inputs through the vertex accepted by every part.
    pub counts: Vec<UBig>,
    pub edges: Vec<Vec<EdgeInterval>>,
}

#[derive(Debug, Clone)]
pub struct ProductRobp {
    n: usize,
    u: u64,
    parts: Vec<SourcedRobp>,
    layers: Vec<ProductLayer>,
}

pub fn intersect_robps(
    parts: &[SourcedRobp],
    src: &SmallSpaceSource,
    max_width: Option<usize>,
) -> Result<ProductRobp, MultiError> {
    let (n, u) = (src.n(), src.u());
    for (i, p) in parts.iter().enumerate() {
        let widths_match = (0..=n).all(|l| p.layers[l].counts.len() == src.layers()[l].vertices.len());
        if p.n != n || p.u != u || !widths_match {
            return Err(MultiError::MismatchedShapes(format!("part {i} was not built against this source")));
        }
    }
    let k = parts.len();
    let mut vertices: Vec<Vec<ProductVertex>> = vec![vec![ProductVertex { source: 0, parts: vec![0; k] }]];
    let mut edges: Vec<Vec<Vec<EdgeInterval>>> = Vec::with_capacity(n);
    for l in 0..n {
        let mut children = BTreeSet::new();
        let mut raw = Vec::with_capacity(vertices[l].len());
        for v in &vertices[l] {
            let mut es = Vec::new();
            'labels: for e in &src.layers()[l].edges[v.source] {
                let mut d = e.lo as usize;
                while d <= e.hi as usize {
                    let mut end = e.hi as usize + 1;
                    let mut child = ProductVertex { source: e.target, parts: Vec::with_capacity(k) };
                    for (p, &j) in parts.iter().zip(&v.parts) {
                        let beta = &p.layers[l].breakpoints[j];
                        let inc = &p.increments[l];
                        let x = beta + &inc[d];
                        if x > p.limit {
                            // increments are nondecreasing: every later label rejects too
                            break 'labels;
                        }
                        let next = &p.layers[l + 1].breakpoints;
                        let t = Grid::round(next, &x);
                        let stop = d + inc[d..end].partition_point(|g| &(beta + g) < &next[t + 1]);
                        end = end.min(stop);
                        child.parts.push(t);
                    }
                    es.push((d, end - 1, child.clone()));
                    children.insert(child);
                    d = end;
                }
            }
            raw.push(es);
        }
        if let Some(cap) = max_width {
            if children.len() > cap {
                return Err(MultiError::WidthCapExceeded { layer: l + 1, cap });
            }
        }
        let next: Vec<ProductVertex> = children.into_iter().collect();
        edges.push(
            raw.into_iter()
                .map(|es| {
                    es.into_iter()
                        .map(|(lo, hi, c)| EdgeInterval {
                            lo: lo as u64,
                            hi: hi as u64,
                            target: next.binary_search(&c).expect("child was inserted"),
                        })
                        .collect()
                })
                .collect(),
        );
        vertices.push(next);
    }
    let mut layers = Vec::with_capacity(n + 1);
    let last = vertices.pop().unwrap();
    let mut below = vec![UBig::ONE; last.len()];
    layers.push(ProductLayer { vertices: last, counts: below.clone(), edges: Vec::new() });
    for _ in 0..n {
        let es = edges.pop().unwrap();
        let counts: Vec<UBig> = es
            .iter()
            .map(|ev: &Vec<EdgeInterval>| ev.iter().map(|e| &below[e.target] * UBig::from(e.hi - e.lo + 1)).sum())
            .collect();
        layers.push(ProductLayer { vertices: vertices.pop().unwrap(), counts: counts.clone(), edges: es });
        below = counts;
    }
    layers.reverse();
    Ok(ProductRobp { n, u, parts: parts.to_vec(), layers })
}

impl ProductRobp {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    pub fn layers(&self) -> &[ProductLayer] {
        &self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.vertices.len()).collect()
    }

    /// `|S| * Pr_D[accept]`.
    pub fn zprime(&self) -> &UBig {
        &self.layers[0].counts[0]
    }

    /// Tuple transitions alone, ignoring the source: accepts iff every part accepts.
    pub fn evaluate(&self, x: &[u64]) -> Result<bool, MultiError> {
        if x.len() != self.n || x.iter().any(|&d| d >= self.u) {
            return Err(MultiError::MismatchedShapes(format!("input {x:?} is outside {{0..{}}}^{}", self.u, self.n)));
        }
        let mut t = vec![0usize; self.parts.len()];
        for (l, &d) in x.iter().enumerate() {
            for (p, j) in self.parts.iter().zip(t.iter_mut()) {
                let v = &p.layers[l].breakpoints[*j] + &p.increments[l][d as usize];
                if v > p.limit {
                    return Ok(false);
                }
                *j = Grid::round(&p.layers[l + 1].breakpoints, &v);
            }
        }
        Ok(true)
    }

    /// Walks the joint edges: accepts iff `x` lies in the source's support and every part accepts.
    pub fn accepts_in_source(&self, x: &[u64]) -> bool {
        let mut v = 0usize;
        for (l, &d) in x.iter().enumerate() {
            match self.layers[l].edges[v].iter().find(|e| e.lo <= d && d <= e.hi) {
                Some(e) => v = e.target,
                None => return false,
            }
        }
        x.len() == self.n
    }
}
