//! Hard HDBSCAN over Euclidean distance.
//!
//! Pipeline: core distances (distance to the `min_samples`-th nearest point,
//! the point itself included) → minimum spanning tree of the
//! mutual-reachability graph (dense Prim) → single-linkage hierarchy →
//! condensed tree at `min_cluster_size` → excess-of-mass selection, never
//! selecting the root. Points outside every selected cluster get −1.
//!
//! Distance scans run on rayon, but every reduction is an order-independent
//! min over `(value, index)`, so the labels do not depend on thread count.

use rayon::prelude::*;

use super::ClusterAssignment;

/// Below this many points the parallel scans cost more than they save.
const PARALLEL_THRESHOLD: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl HdbscanParams {
    pub fn new(min_cluster_size: usize) -> Self {
        Self {
            min_cluster_size,
            min_samples: min_cluster_size,
        }
    }
}

struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl Points<'_> {
    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn hdbscan(points: &[Vec<f64>], params: HdbscanParams) -> ClusterAssignment {
    let n = points.len();
    let dim = points.first().map_or(0, Vec::len);
    let mcs = params.min_cluster_size.max(2);
    if n < mcs || n < 2 {
        return ClusterAssignment::new(vec![-1; n]);
    }
    let flat: Vec<f64> = points.iter().flat_map(|p| p.iter().copied()).collect();
    let pts = Points { data: &flat, dim };

    let k = params.min_samples.clamp(1, n);
    let core = core_distances(&pts, k);
    let mst = prim_mst(&pts, &core);
    let tree = single_linkage(n, mst);
    let condensed = condense(&tree, n, mcs);
    let selected = select_eom(&condensed);
    ClusterAssignment::new(label_points(&condensed, &selected, n))
}

fn core_distances(pts: &Points, k: usize) -> Vec<f64> {
    let n = pts.len();
    let one = |i: usize, buf: &mut Vec<f64>| {
        buf.clear();
        buf.extend((0..n).map(|j| pts.dist(i, j)));
        let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
        *kth
    };
    if n < PARALLEL_THRESHOLD {
        let mut buf = Vec::with_capacity(n);
        (0..n).map(|i| one(i, &mut buf)).collect()
    } else {
        (0..n)
            .into_par_iter()
            .map_init(|| Vec::with_capacity(n), |buf, i| one(i, buf))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    a: usize,
    b: usize,
    weight: f64,
}

fn prim_mst(pts: &Points, core: &[f64]) -> Vec<Edge> {
    let n = pts.len();
    // (best weight to tree, tree endpoint); weight NAN marks "already in tree".
    let mut frontier: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0usize;
    frontier[0].0 = f64::NAN;

    let relax = |current: usize, j: usize, slot: &mut (f64, usize)| -> Option<(f64, usize)> {
        if slot.0.is_nan() {
            return None;
        }
        let d = pts.dist(current, j).max(core[current]).max(core[j]);
        if d < slot.0 {
            *slot = (d, current);
        }
        Some((slot.0, j))
    };
    let better = |x: Option<(f64, usize)>, y: Option<(f64, usize)>| match (x, y) {
        (None, o) | (o, None) => o,
        (Some(a), Some(b)) => {
            if a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_le() {
                Some(a)
            } else {
                Some(b)
            }
        }
    };

    for _ in 1..n {
        let next = if n < PARALLEL_THRESHOLD {
            frontier
                .iter_mut()
                .enumerate()
                .map(|(j, slot)| relax(current, j, slot))
                .fold(None, better)
        } else {
            frontier
                .par_iter_mut()
                .enumerate()
                .map(|(j, slot)| relax(current, j, slot))
                .reduce(|| None, better)
        };
        let (weight, j) = next.expect("graph is connected");
        edges.push(Edge {
            a: frontier[j].1,
            b: j,
            weight,
        });
        frontier[j].0 = f64::NAN;
        current = j;
    }
    edges
}

#[derive(Debug, Clone, Copy)]
struct LinkNode {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

/// Merge tree over `n` leaves; internal node `n + i` is the i-th merge.
struct LinkageTree {
    nodes: Vec<LinkNode>,
    n: usize,
}

impl LinkageTree {
    fn size(&self, node: usize) -> usize {
        if node < self.n {
            1
        } else {
            self.nodes[node - self.n].size
        }
    }

    fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x);
            } else {
                let nd = &self.nodes[x - self.n];
                stack.push(nd.right);
                stack.push(nd.left);
            }
        }
        out
    }
}

fn single_linkage(n: usize, mut edges: Vec<Edge>) -> LinkageTree {
    // Stable sort keeps Prim order among equal weights.
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight));
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut nodes = Vec::with_capacity(n - 1);
    let mut sizes = vec![1usize; 2 * n - 1];
    for (i, e) in edges.iter().enumerate() {
        let ra = find(&mut parent, e.a);
        let rb = find(&mut parent, e.b);
        let id = n + i;
        parent[ra] = id;
        parent[rb] = id;
        sizes[id] = sizes[ra] + sizes[rb];
        nodes.push(LinkNode {
            left: ra,
            right: rb,
            distance: e.weight,
            size: sizes[id],
        });
    }
    LinkageTree { nodes, n }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Child {
    Point(usize),
    Cluster(usize),
}

#[derive(Debug, Clone, Copy)]
struct CondensedRow {
    parent: usize,
    child: Child,
    lambda: f64,
    size: usize,
}

struct CondensedTree {
    rows: Vec<CondensedRow>,
    /// Number of condensed clusters; cluster 0 is the root.
    clusters: usize,
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

fn condense(tree: &LinkageTree, n: usize, mcs: usize) -> CondensedTree {
    let root = 2 * n - 2;
    let mut label = vec![usize::MAX; 2 * n - 1];
    label[root] = 0;
    let mut clusters = 1;
    let mut rows = Vec::new();
    let mut queue = std::collections::VecDeque::from([root]);

    while let Some(node) = queue.pop_front() {
        if node < n {
            continue;
        }
        let LinkNode {
            left,
            right,
            distance,
            ..
        } = tree.nodes[node - n];
        let lambda = lambda_of(distance);
        let here = label[node];
        let (ls, rs) = (tree.size(left), tree.size(right));
        let shed = |sub: usize, rows: &mut Vec<CondensedRow>| {
            for p in tree.leaves(sub) {
                rows.push(CondensedRow {
                    parent: here,
                    child: Child::Point(p),
                    lambda,
                    size: 1,
                });
            }
        };
        match (ls >= mcs, rs >= mcs) {
            (true, true) => {
                for (child, size) in [(left, ls), (right, rs)] {
                    label[child] = clusters;
                    rows.push(CondensedRow {
                        parent: here,
                        child: Child::Cluster(clusters),
                        lambda,
                        size,
                    });
                    clusters += 1;
                    queue.push_back(child);
                }
            }
            (true, false) => {
                shed(right, &mut rows);
                label[left] = here;
                queue.push_back(left);
            }
            (false, true) => {
                shed(left, &mut rows);
                label[right] = here;
                queue.push_back(right);
            }
            (false, false) => {
                shed(left, &mut rows);
                shed(right, &mut rows);
            }
        }
    }
    CondensedTree { rows, clusters }
}

/// Excess-of-mass selection. Returns a per-cluster "selected" flag.
fn select_eom(tree: &CondensedTree) -> Vec<bool> {
    let m = tree.clusters;
    let mut birth = vec![0.0f64; m];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
    for row in &tree.rows {
        if let Child::Cluster(c) = row.child {
            birth[c] = row.lambda;
            children[row.parent].push(c);
        }
    }
    let mut stability = vec![0.0f64; m];
    for row in &tree.rows {
        let gain = (row.lambda - birth[row.parent]) * row.size as f64;
        // inf - inf: a cluster born and dissolved at zero distance holds no excess mass.
        if !gain.is_nan() {
            stability[row.parent] += gain;
        }
    }

    let mut selected = vec![true; m];
    selected[0] = false;
    // Child ids are always larger than their parent's, so a reverse sweep
    // settles every subtree before its parent.
    for c in (1..m).rev() {
        let subtree: f64 = children[c].iter().map(|&ch| stability[ch]).sum();
        if !children[c].is_empty() && subtree > stability[c] {
            selected[c] = false;
            stability[c] = subtree;
        } else {
            let mut stack = children[c].clone();
            while let Some(d) = stack.pop() {
                selected[d] = false;
                stack.extend_from_slice(&children[d]);
            }
        }
    }
    selected
}

fn label_points(tree: &CondensedTree, selected: &[bool], n: usize) -> Vec<i32> {
    let m = tree.clusters;
    let mut parent_of = vec![usize::MAX; m];
    let mut home = vec![0usize; n];
    for row in &tree.rows {
        match row.child {
            Child::Cluster(c) => parent_of[c] = row.parent,
            Child::Point(p) => home[p] = row.parent,
        }
    }
    let mut output_label = vec![-1i32; m];
    let mut next = 0;
    for c in 0..m {
        if selected[c] {
            output_label[c] = next;
            next += 1;
        }
    }
    // Resolve each cluster to its selected ancestor (or itself) once.
    let mut resolved = vec![-1i32; m];
    for c in 1..m {
        resolved[c] = if selected[c] {
            output_label[c]
        } else {
            resolved[parent_of[c]]
        };
    }
    home.into_iter().map(|c| resolved[c]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_blobs() -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(vec![i as f64 * 0.01, 0.0]);
        }
        for i in 0..10 {
            pts.push(vec![5.0 + i as f64 * 0.01, 0.0]);
        }
        pts.push(vec![20.0, 20.0]);
        pts
    }

    #[test]
    fn too_few_points_are_all_outliers() {
        let pts = vec![vec![0.0, 0.0]; 4];
        let a = hdbscan(&pts, HdbscanParams::new(5));
        assert_eq!(a.labels, vec![-1; 4]);
        assert!(hdbscan(&[], HdbscanParams::new(5)).labels.is_empty());
    }

    #[test]
    fn two_tight_groups_and_a_straggler() {
        let a = hdbscan(&line_blobs(), HdbscanParams { min_cluster_size: 5, min_samples: 3 });
        let l = &a.labels;
        assert!(l[..10].iter().all(|&x| x == l[0]) && l[0] >= 0);
        assert!(l[10..20].iter().all(|&x| x == l[10]) && l[10] >= 0);
        assert_ne!(l[0], l[10]);
        assert_eq!(l[20], -1);
    }

    #[test]
    fn mst_has_n_minus_one_edges_and_is_minimal_on_a_line() {
        let data: Vec<f64> = [0.0, 1.0, 3.0, 6.0].into_iter().collect();
        let pts = Points { data: &data, dim: 1 };
        let core = vec![0.0; 4];
        let mst = prim_mst(&pts, &core);
        assert_eq!(mst.len(), 3);
        let total: f64 = mst.iter().map(|e| e.weight).sum();
        assert_eq!(total, 6.0);
    }

    #[test]
    fn core_distance_counts_the_point_itself() {
        let data = [0.0, 1.0, 3.0];
        let pts = Points { data: &data, dim: 1 };
        assert_eq!(core_distances(&pts, 1), vec![0.0, 0.0, 0.0]);
        assert_eq!(core_distances(&pts, 2), vec![1.0, 1.0, 2.0]);
    }

    #[test]
    fn identical_points_form_clusters() {
        let mut pts = vec![vec![0.0, 0.0]; 30];
        pts.extend(vec![vec![1.0, 1.0]; 30]);
        let a = hdbscan(&pts, HdbscanParams::new(10));
        assert!(a.labels[..30].iter().all(|&x| x == a.labels[0] && x >= 0));
        assert!(a.labels[30..].iter().all(|&x| x == a.labels[30] && x >= 0));
        assert_ne!(a.labels[0], a.labels[30]);
    }
}
