use serde::{Deserialize, Serialize};

use super::encode::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        ack: bool,
    },
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary decision tree; `x <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

fn entropy(pos: usize, total: usize) -> f64 {
    if total == 0 || pos == 0 || pos == total {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    cfg: TreeConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        // Ties go to NAK.
        let leaf = Node::Leaf { ack: 2 * pos > n };
        if depth >= self.cfg.max_depth || pos == 0 || pos == n || n < 2 * self.cfg.min_leaf {
            self.nodes.push(leaf);
            return self.nodes.len() - 1;
        }
        let Some((column, threshold)) = self.best_split(idx, pos) else {
            self.nodes.push(leaf);
            return self.nodes.len() - 1;
        };
        let id = self.nodes.len();
        self.nodes.push(leaf);
        let split_at = partition(idx, |&i| self.x.row(i)[column] <= threshold);
        let (l, r) = idx.split_at_mut(split_at);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            column,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, idx: &[usize], pos: usize) -> Option<(usize, f64)> {
        let n = idx.len();
        let parent = entropy(pos, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for col in 0..self.x.cols() {
            sorted.sort_by(|&a, &b| self.x.row(a)[col].total_cmp(&self.x.row(b)[col]));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                if self.y[sorted[k]] {
                    left_pos += 1;
                }
                let left_n = k + 1;
                let (lo, hi) = (self.x.row(sorted[k])[col], self.x.row(sorted[k + 1])[col]);
                if lo == hi || left_n < self.cfg.min_leaf || n - left_n < self.cfg.min_leaf {
                    continue;
                }
                let child = (left_n as f64 * entropy(left_pos, left_n)
                    + (n - left_n) as f64 * entropy(pos - left_pos, n - left_n))
                    / n as f64;
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, col, lo + (hi - lo) / 2.0));
                }
            }
        }
        best.map(|(_, c, t)| (c, t))
    }
}

fn partition<F: Fn(&usize) -> bool>(idx: &mut [usize], pred: F) -> usize {
    let mut store = 0;
    for i in 0..idx.len() {
        if pred(&idx[i]) {
            idx.swap(store, i);
            store += 1;
        }
    }
    store
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[bool], cfg: TreeConfig) -> Self {
        let mut builder = Builder {
            x,
            y,
            cfg,
            nodes: Vec::new(),
        };
        let mut idx: Vec<usize> = (0..x.rows()).collect();
        builder.build(&mut idx, 0);
        Self {
            nodes: builder.nodes,
        }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { ack } => return ack,
                Node::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => at = if x[column] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
