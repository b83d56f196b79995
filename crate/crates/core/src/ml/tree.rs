//! Level-wise CART builder on presorted columns.
//!
//! Each row carries two additive statistics. For classification they are
//! (weight, weight·label) and splits minimize weighted Gini impurity; for
//! boosting they are (gradient, hessian) and splits maximize the
//! second-order gain with leaf values `-G / (H + λ)`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Criterion {
    Gini,
    Newton { lambda: f64 },
}

impl Criterion {
    fn score(self, a: f64, b: f64) -> f64 {
        match self {
            Criterion::Gini => {
                if a <= 0.0 {
                    0.0
                } else {
                    -2.0 * b * (a - b) / a
                }
            }
            Criterion::Newton { lambda } => a * a / (b + lambda),
        }
    }

    fn leaf(self, a: f64, b: f64) -> f64 {
        match self {
            Criterion::Gini => {
                if a > 0.0 {
                    b / a
                } else {
                    0.5
                }
            }
            Criterion::Newton { lambda } => -a / (b + lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per node; `None` tries all of them.
    pub max_features: Option<usize>,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    k = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// Row orderings by each column, computed once per training matrix.
pub struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.cols)
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.rows as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, j).total_cmp(&x.get(b as usize, j)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

const NONE: u32 = u32::MAX;

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Scan {
    a: f64,
    b: f64,
    count: usize,
    last: f64,
}

/// Grow one tree. Rows with zero weight are excluded (`include[r] == false`).
pub fn grow<R: Rng>(
    x: &Matrix,
    pre: &Presorted,
    stat_a: &[f64],
    stat_b: &[f64],
    include: &[bool],
    params: &TreeParams,
    rng: &mut R,
) -> Tree {
    let n = x.rows;
    let mut nodes = vec![Node::Leaf(0.0)];
    // Position of each row's node in the current frontier.
    let mut slot: Vec<u32> = (0..n).map(|r| if include[r] { 0 } else { NONE }).collect();
    let mut frontier: Vec<usize> = vec![0];
    let mut depth = 0;
    while !frontier.is_empty() {
        let m = frontier.len();
        let mut tot = vec![(0.0f64, 0.0f64, 0usize); m];
        for r in 0..n {
            if slot[r] != NONE {
                let t = &mut tot[slot[r] as usize];
                t.0 += stat_a[r];
                t.1 += stat_b[r];
                t.2 += 1;
            }
        }
        let can_split = depth < params.max_depth;
        let mut best: Vec<Option<Best>> = (0..m).map(|_| None).collect();
        if can_split {
            let allowed: Option<Vec<Vec<bool>>> = params.max_features.filter(|&k| k < x.cols).map(|k| {
                (0..m)
                    .map(|_| {
                        let mut mask = vec![false; x.cols];
                        for j in sample(rng, x.cols, k) {
                            mask[j] = true;
                        }
                        mask
                    })
                    .collect()
            });
            let parent: Vec<f64> = tot.iter().map(|t| params.criterion.score(t.0, t.1)).collect();
            for j in 0..x.cols {
                let mut scan: Vec<Scan> = (0..m).map(|_| Scan { a: 0.0, b: 0.0, count: 0, last: f64::NAN }).collect();
                for &r in &pre.order[j] {
                    let s = slot[r as usize];
                    if s == NONE {
                        continue;
                    }
                    let s = s as usize;
                    if let Some(mask) = &allowed {
                        if !mask[s][j] {
                            continue;
                        }
                    }
                    let v = x.get(r as usize, j);
                    let st = &mut scan[s];
                    let t = tot[s];
                    if st.count >= params.min_leaf && t.2 - st.count >= params.min_leaf && v > st.last {
                        let gain = params.criterion.score(st.a, st.b)
                            + params.criterion.score(t.0 - st.a, t.1 - st.b)
                            - parent[s];
                        if best[s].as_ref().is_none_or(|b| gain > b.gain) {
                            let mut thr = st.last + (v - st.last) / 2.0;
                            if thr >= v {
                                thr = st.last;
                            }
                            best[s] = Some(Best { gain, feature: j, threshold: thr });
                        }
                    }
                    st.a += stat_a[r as usize];
                    st.b += stat_b[r as usize];
                    st.count += 1;
                    st.last = v;
                }
            }
        }
        let mut next = Vec::new();
        let mut remap: Vec<Option<(usize, usize, f64)>> = vec![None; m];
        for s in 0..m {
            let id = frontier[s];
            match best[s].take().filter(|b| b.gain > 1e-12) {
                Some(b) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    nodes[id] = Node::Split { feature: b.feature, threshold: b.threshold, left, right: left + 1 };
                    remap[s] = Some((next.len(), b.feature, b.threshold));
                    next.push(left);
                    next.push(left + 1);
                }
                None => nodes[id] = Node::Leaf(params.criterion.leaf(tot[s].0, tot[s].1)),
            }
        }
        for r in 0..n {
            let s = slot[r];
            if s == NONE {
                continue;
            }
            slot[r] = match remap[s as usize] {
                Some((base, f, thr)) => (base + usize::from(x.get(r, f) > thr)) as u32,
                None => NONE,
            };
        }
        frontier = next;
        depth += 1;
    }
    Tree { nodes }
}
