//! Exact small-space source: a layered DAG over tuples of Dyer-rounded partial sums whose
//! random walk is the uniform distribution on the rounded solution set `S`.

use std::collections::BTreeSet;

use super::{MultiError, RoundedConstraintSet};
use crate::arith::{Rational, UBig};
use crate::robp::EdgeInterval;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLayer {
    /// Partial-sum tuples, sorted.
    pub vertices: Vec<Vec<u64>>,
    /// Accepting-suffix counts `A_D(v)`.
    pub counts: Vec<UBig>,
    /// Retained labels per vertex; labels past the last interval lead only to deleted vertices.
    pub edges: Vec<Vec<EdgeInterval>>,
}

#[derive(Debug, Clone)]
pub struct SmallSpaceSource {
    n: usize,
    u: u64,
    k: usize,
    cap: u64,
    layers: Vec<SourceLayer>,
}

/// Builds the source forward, merging equal tuples and pruning any tuple with a component above the cap.
pub fn build_source(rcs: &RoundedConstraintSet) -> Result<SmallSpaceSource, MultiError> {
    let (n, u, k, cap) = (rcs.n, rcs.u as usize, rcs.h.len(), rcs.cap);
    if n == 0 || u == 0 {
        return Err(MultiError::MismatchedShapes("source needs n >= 1 and u >= 1".into()));
    }
    let mut vertices: Vec<Vec<Vec<u64>>> = vec![vec![vec![0; k]]];
    let mut edges: Vec<Vec<Vec<EdgeInterval>>> = Vec::with_capacity(n);
    for l in 0..n {
        let starts: Vec<usize> =
            (0..u).filter(|&d| d == 0 || (0..k).any(|i| rcs.h[i][l][d] != rcs.h[i][l][d - 1])).collect();
        let mut children = BTreeSet::new();
        let mut raw = Vec::with_capacity(vertices[l].len());
        for v in &vertices[l] {
            let mut es = Vec::new();
            for (r, &s) in starts.iter().enumerate() {
                let end = starts.get(r + 1).copied().unwrap_or(u);
                let child: Vec<u64> = (0..k).map(|i| v[i] + rcs.h[i][l][s]).collect();
                // tables are nondecreasing, so every later run is pruned too
                if child.iter().any(|&c| c > cap) {
                    break;
                }
                children.insert(child.clone());
                es.push((s, end - 1, child));
            }
            raw.push(es);
        }
        let next: Vec<Vec<u64>> = children.into_iter().collect();
        let layer_edges = raw
            .into_iter()
            .map(|es| {
                es.into_iter()
                    .map(|(lo, hi, c)| EdgeInterval {
                        lo: lo as u64,
                        hi: hi as u64,
                        target: next.binary_search(&c).expect("child was inserted"),
                    })
                    .collect()
            })
            .collect();
        edges.push(layer_edges);
        vertices.push(next);
    }
    let mut layers: Vec<SourceLayer> = Vec::with_capacity(n + 1);
    let last = vertices.pop().unwrap();
    let mut below = vec![UBig::ONE; last.len()];
    layers.push(SourceLayer { vertices: last, counts: below.clone(), edges: Vec::new() });
    for _ in 0..n {
        let es = edges.pop().unwrap();
        let counts: Vec<UBig> = es
            .iter()
            .map(|ev| ev.iter().map(|e| &below[e.target] * UBig::from(e.hi - e.lo + 1)).sum())
            .collect();
        layers.push(SourceLayer { vertices: vertices.pop().unwrap(), counts: counts.clone(), edges: es });
        below = counts;
    }
    layers.reverse();
    if layers[0].counts[0] == UBig::ZERO {
        return Err(MultiError::EmptySource);
    }
    Ok(SmallSpaceSource { n, u: rcs.u, k, cap, layers })
}

impl SmallSpaceSource {
    /// One vertex per layer with every label retained: the uniform distribution on `{0..u-1}^n`.
    pub fn uniform(n: usize, u: u64) -> Self {
        let rcs = RoundedConstraintSet { n, u, cap: 0, h: Vec::new() };
        build_source(&rcs).expect("uniform source is never empty")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn layers(&self) -> &[SourceLayer] {
        &self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.vertices.len()).collect()
    }

    /// `|S| = A_D(root)`.
    pub fn size(&self) -> &UBig {
        &self.layers[0].counts[0]
    }

    fn edge(&self, layer: usize, v: usize, d: u64) -> Option<&EdgeInterval> {
        self.layers[layer].edges[v].iter().find(|e| e.lo <= d && d <= e.hi)
    }

    /// `p_v(d) = A_D(child) / A_D(v)`; zero for pruned labels.
    pub fn probability(&self, layer: usize, v: usize, d: u64) -> Rational {
        let l = &self.layers[layer];
        match self.edge(layer, v, d) {
            Some(e) => Rational::from(self.layers[layer + 1].counts[e.target].clone()) / Rational::from(l.counts[v].clone()),
            None => Rational::zero(),
        }
    }

    /// Vertex reached after reading `x`, or `None` once a label is pruned.
    pub fn walk(&self, x: &[u64]) -> Option<usize> {
        let mut v = 0usize;
        for (l, &d) in x.iter().enumerate() {
            v = self.edge(l, v, d)?.target;
        }
        Some(v)
    }

    pub fn contains(&self, x: &[u64]) -> bool {
        x.len() == self.n && self.walk(x).is_some()
    }

    /// Product of per-label probabilities along `x`.
    pub fn path_probability(&self, x: &[u64]) -> Rational {
        let mut p = Rational::one();
        let mut v = 0usize;
        for (l, &d) in x.iter().enumerate() {
            let Some(e) = self.edge(l, v, d) else { return Rational::zero() };
            p = p * self.probability(l, v, d);
            v = e.target;
        }
        p
    }
}
