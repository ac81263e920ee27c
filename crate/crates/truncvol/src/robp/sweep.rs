//! Step functions of rounded suffix counts, swept in increasing value order.
//!
//! A layer's count at value `v` is `sum_r mult_r * counts_r[R(v + shift_r)]`, where `R` rounds
//! down to the next layer's breakpoints. Each run `r` changes value only where `v + shift_r`
//! crosses a breakpoint, so the whole function is a merge of shifted breakpoint lists.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::arith::{Rational, UBig};

/// Labels sharing one increment and one child count table.
pub(crate) struct Run<'a> {
    pub shift: &'a UBig,
    pub mult: u64,
    pub counts: &'a [UBig],
}

/// Calls `f(v, total)` at every piece start `v <= limit`, starting at `v = 0`.
pub(crate) fn for_each_piece(next: &[UBig], runs: &[Run<'_>], limit: &UBig, mut f: impl FnMut(&UBig, &UBig)) {
    let mut idx = Vec::with_capacity(runs.len());
    let mut total = UBig::ZERO;
    let mut heap = BinaryHeap::with_capacity(runs.len());
    let push = |heap: &mut BinaryHeap<Reverse<(UBig, usize)>>, r: usize, i: usize| {
        if i + 1 < next.len() {
            let v = &next[i + 1] - runs[r].shift;
            if &v <= limit {
                heap.push(Reverse((v, r)));
            }
        }
    };
    for (r, run) in runs.iter().enumerate() {
        // next[0] = 0, so the partition point is at least 1
        let i = next.partition_point(|b| b <= run.shift) - 1;
        idx.push(i);
        total += &run.counts[i] * run.mult;
        push(&mut heap, r, i);
    }
    f(&UBig::ZERO, &total);
    while let Some(Reverse((v, r))) = heap.pop() {
        let mut step = |r: usize, heap: &mut BinaryHeap<Reverse<(UBig, usize)>>, total: &mut UBig| {
            let i = idx[r];
            let run = &runs[r];
            *total -= (&run.counts[i] - &run.counts[i + 1]) * run.mult;
            idx[r] = i + 1;
            push(heap, r, i + 1);
        };
        step(r, &mut heap, &mut total);
        while matches!(heap.peek(), Some(Reverse((w, _))) if *w == v) {
            let Reverse((_, r)) = heap.pop().unwrap();
            step(r, &mut heap, &mut total);
        }
        f(&v, &total);
    }
}

/// Rule "next breakpoint = least v with 0 < C(v) < C(prev) / (1 + eta)", using
/// `C < ceil(C_prev * den / (den + num))` for `eta = num / den`.
pub(crate) struct Threshold {
    num: UBig,
    den: UBig,
}

impl Threshold {
    pub fn new(eta: &Rational) -> Self {
        let num = UBig::try_from(eta.numer().clone()).expect("eta > 0");
        Threshold { num, den: eta.denom().clone() }
    }

    pub fn below(&self, c: &UBig) -> UBig {
        let top = c * &self.den;
        let bot = &self.den + &self.num;
        (top + &bot - UBig::ONE) / bot
    }
}

pub(crate) struct Selected {
    pub breakpoints: Vec<UBig>,
    pub counts: Vec<UBig>,
}

/// Breakpoints of one layer, ending with the zero-count value `limit + 1`.
pub(crate) fn select(next: &[UBig], runs: &[Run<'_>], limit: &UBig, rule: &Threshold) -> Selected {
    let mut breakpoints: Vec<UBig> = Vec::new();
    let mut counts: Vec<UBig> = Vec::new();
    let mut thr = UBig::ZERO;
    for_each_piece(next, runs, limit, |v, total| {
        if breakpoints.is_empty() {
            breakpoints.push(v.clone());
            counts.push(total.clone());
            thr = rule.below(total);
        } else if total > &UBig::ZERO && total < &thr {
            breakpoints.push(v.clone());
            counts.push(total.clone());
            thr = rule.below(total);
        }
    });
    breakpoints.push(limit + UBig::ONE);
    counts.push(UBig::ZERO);
    Selected { breakpoints, counts }
}

/// Values of the step function at sorted query points; points above `limit` read 0.
pub(crate) fn evaluate_at(next: &[UBig], runs: &[Run<'_>], limit: &UBig, queries: &[UBig]) -> Vec<UBig> {
    let mut out = Vec::with_capacity(queries.len());
    let mut cur: Option<UBig> = None;
    for_each_piece(next, runs, limit, |v, total| {
        if let Some(c) = &cur {
            while out.len() < queries.len() && &queries[out.len()] < v {
                out.push(c.clone());
            }
        }
        cur = Some(total.clone());
    });
    let cur = cur.unwrap_or(UBig::ZERO);
    while out.len() < queries.len() {
        let q = &queries[out.len()];
        out.push(if q <= limit { cur.clone() } else { UBig::ZERO });
    }
    out
}

/// Groups consecutive labels with equal increments: `(first label, count)`.
pub(crate) fn label_runs(table: &[UBig], lo: usize, hi: usize) -> Vec<(usize, u64)> {
    let mut out: Vec<(usize, u64)> = Vec::new();
    let mut d = lo;
    while d <= hi {
        let g = &table[d];
        let end = d + table[d..=hi].partition_point(|x| x == g);
        out.push((d, (end - d) as u64));
        d = end;
    }
    out
}
