use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// A binary regression tree stored as flat arrays. Node 0 is the root; a
/// node with `feature < 0` is a leaf. Samples go left when
/// `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
    /// Training samples (with bootstrap multiplicity) that reached each node.
    pub count: Vec<u32>,
}

pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut n = 0usize;
        while self.feature[n] >= 0 {
            n = if x[self.feature[n] as usize] <= self.threshold[n] {
                self.left[n] as usize
            } else {
                self.right[n] as usize
            };
        }
        self.value[n]
    }

    pub fn len(&self) -> usize {
        self.feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature.is_empty()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, n: usize) -> usize {
            if t.feature[n] < 0 {
                0
            } else {
                1 + go(t, t.left[n] as usize).max(go(t, t.right[n] as usize))
            }
        }
        go(self, 0)
    }

    fn push_leaf(&mut self, value: f64, count: usize) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.count.push(count as u32);
        self.feature.len() - 1
    }

    /// Grows a tree on `samples` (row indices, repeats allowed).
    pub(crate) fn grow(
        rows: &[Vec<f64>],
        targets: &[f64],
        weights: &[f64],
        samples: Vec<usize>,
        params: &TreeParams,
        rng: &mut Rng,
    ) -> Tree {
        let dim = rows.first().map_or(0, |r| r.len());
        let mut tree = Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
            count: Vec::new(),
        };
        let mean = |idx: &[usize]| {
            let (sw, swy) = idx
                .iter()
                .fold((0.0, 0.0), |(a, b), &i| (a + weights[i], b + weights[i] * targets[i]));
            swy / sw
        };
        let root = tree.push_leaf(mean(&samples), samples.len());
        let mut stack = vec![(root, samples, 0usize)];
        let mut order: Vec<usize> = (0..dim).collect();
        while let Some((node, idx, depth)) = stack.pop() {
            if params.max_depth.is_some_and(|d| depth >= d)
                || idx.len() < 2 * params.min_samples_leaf
                || idx.iter().all(|&i| targets[i] == targets[idx[0]])
            {
                continue;
            }
            order.shuffle(rng);
            let Some(split) = best_split(rows, targets, weights, &idx, &order, params) else {
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = idx
                .into_iter()
                .partition(|&i| rows[i][split.feature] <= split.threshold);
            let li = tree.push_leaf(mean(&l), l.len());
            let ri = tree.push_leaf(mean(&r), r.len());
            tree.feature[node] = split.feature as i32;
            tree.threshold[node] = split.threshold;
            tree.left[node] = li as u32;
            tree.right[node] = ri as u32;
            stack.push((ri, r, depth + 1));
            stack.push((li, l, depth + 1));
        }
        tree
    }
}

struct Split {
    feature: usize,
    threshold: f64,
}

/// Exact scan over sorted distinct values. The first `features_per_split`
/// features of `order` are searched; if none admits a valid split the search
/// continues through the remaining features.
fn best_split(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    idx: &[usize],
    order: &[usize],
    params: &TreeParams,
) -> Option<Split> {
    let n = idx.len();
    let (tw, twy) = idx
        .iter()
        .fold((0.0, 0.0), |(a, b), &i| (a + weights[i], b + weights[i] * targets[i]));
    let parent = twy * twy / tw;
    let mut best: Option<(f64, Split)> = None;
    let mut sorted = idx.to_vec();
    for (k, &f) in order.iter().enumerate() {
        if k >= params.features_per_split && best.is_some() {
            break;
        }
        sorted.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
        let (mut lw, mut lwy) = (0.0, 0.0);
        for i in 0..n - 1 {
            let s = sorted[i];
            lw += weights[s];
            lwy += weights[s] * targets[s];
            let left_n = i + 1;
            if left_n < params.min_samples_leaf || n - left_n < params.min_samples_leaf {
                continue;
            }
            let (a, b) = (rows[s][f], rows[sorted[i + 1]][f]);
            if a >= b {
                continue;
            }
            let (rw, rwy) = (tw - lw, twy - lwy);
            let score = lwy * lwy / lw + rwy * rwy / rw;
            if score - parent <= 0.0 {
                continue;
            }
            if best.as_ref().is_none_or(|(bs, _)| score > *bs) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some((score, Split { feature: f, threshold }));
            }
        }
    }
    best.map(|(_, s)| s)
}
