//! Connectivity graphs of an interaction, cycle detection, enumerations that
//! witness unidirectionality, and boundary distances.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::coupling::Coupling;
use crate::lattice::{BoxSpec, Site};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("site {site} reads {input}, which is neither in the box nor in its shell")]
    DanglingInput { site: Site, input: Site },
    #[error("edge {0} -> {1} ends at a boundary vertex")]
    EdgeIntoBoundary(Site, Site),
    #[error("edge endpoint {0} is not a vertex")]
    UnknownVertex(Site),
    #[error("self-loop at {0}")]
    SelfLoop(Site),
    #[error("{0} is not an interior vertex")]
    NotInterior(Site),
    #[error("graph has no interior vertex")]
    NoInterior,
    #[error("connectivity graph has a cycle: {}", format_cycle(.0))]
    CycleDetected(Vec<Site>),
}

fn format_cycle(cycle: &[Site]) -> String {
    let mut s: Vec<String> = cycle.iter().map(Site::to_string).collect();
    if let Some(first) = cycle.first() {
        s.push(first.to_string());
    }
    s.join(" -> ")
}

/// Directed graph over box and shell sites; `(i, j)` means `x_i` feeds `(I x)_j`.
///
/// Self-dependence is not an edge. Interior vertices come first, each group in
/// site order, and every adjacency list is sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectivityGraph {
    vertices: Vec<Site>,
    n_interior: usize,
    index: HashMap<Site, usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

/// Shortest directed path length from the boundary; `Infinite` when unreachable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryDistance {
    Finite(u64),
    Infinite,
}

impl BoundaryDistance {
    pub fn finite(self) -> Option<u64> {
        match self {
            BoundaryDistance::Finite(n) => Some(n),
            BoundaryDistance::Infinite => None,
        }
    }
}

impl fmt::Display for BoundaryDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryDistance::Finite(n) => write!(f, "{n}"),
            BoundaryDistance::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for BoundaryDistance {
    fn serialize<Z: Serializer>(&self, s: Z) -> Result<Z::Ok, Z::Error> {
        match self {
            BoundaryDistance::Finite(n) => s.serialize_u64(*n),
            BoundaryDistance::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Exact ranks `1..=n` on interior sites; boundary sites are implicitly 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Enumeration {
    pub labels: BTreeMap<Site, u64>,
}

impl Enumeration {
    pub fn label(&self, site: &Site) -> Option<u64> {
        self.labels.get(site).copied()
    }

    /// Interior sites in increasing label order.
    pub fn ordered_sites(&self) -> Vec<Site> {
        let mut v: Vec<(u64, Site)> = self.labels.iter().map(|(s, l)| (*l, *s)).collect();
        v.sort();
        v.into_iter().map(|(_, s)| s).collect()
    }
}

impl ConnectivityGraph {
    /// Edge `(i, j)` for every nonzero cross weight of input `i` at site `j`.
    pub fn build<S: Scalar>(coupling: &Coupling<S>, bx: &BoxSpec) -> Result<Self, TopologyError> {
        let mut edges = BTreeSet::new();
        for (site, row) in coupling.stencils() {
            for (input, w) in row {
                if !bx.contains(input) && !bx.in_shell(input) {
                    return Err(TopologyError::DanglingInput {
                        site: *site,
                        input: *input,
                    });
                }
                if input != site && !w.is_zero() {
                    edges.insert((*input, *site));
                }
            }
        }
        ConnectivityGraph::from_edges(bx.sites().to_vec(), bx.boundary().to_vec(), edges)
    }

    pub fn from_edges(
        interior: impl IntoIterator<Item = Site>,
        boundary: impl IntoIterator<Item = Site>,
        edges: impl IntoIterator<Item = (Site, Site)>,
    ) -> Result<Self, TopologyError> {
        let interior: BTreeSet<Site> = interior.into_iter().collect();
        let boundary: BTreeSet<Site> = boundary
            .into_iter()
            .filter(|s| !interior.contains(s))
            .collect();
        let n_interior = interior.len();
        let vertices: Vec<Site> = interior.into_iter().chain(boundary).collect();
        let index: HashMap<Site, usize> =
            vertices.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut succ = vec![BTreeSet::new(); vertices.len()];
        let mut pred = vec![BTreeSet::new(); vertices.len()];
        for (from, to) in edges {
            let i = *index.get(&from).ok_or(TopologyError::UnknownVertex(from))?;
            let j = *index.get(&to).ok_or(TopologyError::UnknownVertex(to))?;
            if i == j {
                return Err(TopologyError::SelfLoop(from));
            }
            if j >= n_interior {
                return Err(TopologyError::EdgeIntoBoundary(from, to));
            }
            succ[i].insert(j);
            pred[j].insert(i);
        }
        Ok(ConnectivityGraph {
            vertices,
            n_interior,
            index,
            succ: succ.into_iter().map(|s| s.into_iter().collect()).collect(),
            pred: pred.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn interior(&self) -> &[Site] {
        &self.vertices[..self.n_interior]
    }

    pub fn boundary(&self) -> &[Site] {
        &self.vertices[self.n_interior..]
    }

    pub fn is_interior(&self, site: &Site) -> bool {
        self.index.get(site).is_some_and(|&i| i < self.n_interior)
    }

    /// All edges in vertex order.
    pub fn edges(&self) -> Vec<(Site, Site)> {
        let mut out = Vec::new();
        for (i, targets) in self.succ.iter().enumerate() {
            for &j in targets {
                out.push((self.vertices[i], self.vertices[j]));
            }
        }
        out.sort();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Largest total degree `K` over all vertices.
    pub fn max_degree(&self) -> usize {
        (0..self.vertices.len())
            .map(|i| self.succ[i].len() + self.pred[i].len())
            .max()
            .unwrap_or(0)
    }

    /// One `source -> target` line per edge.
    pub fn adjacency_text(&self) -> String {
        let mut out = String::new();
        for (a, b) in self.edges() {
            writeln!(out, "{a} -> {b}").unwrap();
        }
        out
    }

    fn interior_index(&self, site: &Site) -> Result<usize, TopologyError> {
        match self.index.get(site) {
            Some(&i) if i < self.n_interior => Ok(i),
            _ => Err(TopologyError::NotInterior(*site)),
        }
    }

    /// A directed cycle, listed from its smallest-index entry point along the
    /// cycle, or `None` for acyclic graphs. Depth-first in vertex order.
    pub fn detect_cycle(&self) -> Option<Vec<Site>> {
        const WHITE: u8 = 0;
        const GREY: u8 = 1;
        const BLACK: u8 = 2;
        let mut colour = vec![WHITE; self.vertices.len()];
        for root in 0..self.n_interior {
            if colour[root] != WHITE {
                continue;
            }
            // explicit stack of (vertex, next successor position)
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            colour[root] = GREY;
            while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
                if let Some(&w) = self.succ[v].get(*pos) {
                    *pos += 1;
                    match colour[w] {
                        WHITE => {
                            colour[w] = GREY;
                            stack.push((w, 0));
                        }
                        GREY => {
                            let start = stack.iter().position(|&(u, _)| u == w).unwrap();
                            return Some(
                                stack[start..]
                                    .iter()
                                    .map(|&(u, _)| self.vertices[u])
                                    .collect(),
                            );
                        }
                        _ => {}
                    }
                } else {
                    colour[v] = BLACK;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Builds an enumeration by path extension.
    ///
    /// Begins with the smallest starting vertex (no interior in-edges) as label
    /// 1. Each further step takes the smallest unlabeled vertex that is starting
    /// or fed by a labeled vertex as the head of a path of unlabeled vertices:
    ///
    /// * if the head already reaches labeled vertices, the path is the longest
    ///   one into the lowest-labeled of them, `j'`, and gets the fractional
    ///   labels `N(j') - 1 + k/(n+1)`;
    /// * otherwise the path is the longest one ending at a free vertex (no
    ///   out-edges) and gets `M + k`.
    ///
    /// Labels are re-ranked to `1..=M` in ascending order after every path.
    /// Choosing the lowest-labeled descendant keeps labels consistent with
    /// reachability, which is what makes every step valid.
    pub fn enumerate(&self) -> Result<Enumeration, TopologyError> {
        if self.n_interior == 0 {
            return Err(TopologyError::NoInterior);
        }
        if let Some(cycle) = self.detect_cycle() {
            return Err(TopologyError::CycleDetected(cycle));
        }
        let n = self.n_interior;
        let is_starting = |v: usize| self.pred[v].iter().all(|&p| p >= n);
        let mut label: Vec<Option<f64>> = vec![None; n];
        let first = (0..n)
            .find(|&v| is_starting(v))
            .expect("acyclic graph has a starting vertex");
        label[first] = Some(1.0);
        let mut assigned = 1;

        while assigned < n {
            let head = (0..n)
                .find(|&v| {
                    label[v].is_none()
                        && (is_starting(v)
                            || self.pred[v].iter().any(|&p| p < n && label[p].is_some()))
                })
                .expect("acyclic graph always has an eligible head");
            let reach = self.reachable_from(head);
            let target = reach
                .iter()
                .filter_map(|&v| label[v].map(|l| (l, v)))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            match target {
                Some((lj, j)) => {
                    let path =
                        self.longest_path(head, &label, |v| self.succ[v].contains(&j), Some(j));
                    let len = path.len() as f64;
                    for (k, &v) in path.iter().enumerate() {
                        label[v] = Some(lj - 1.0 + (k + 1) as f64 / (len + 1.0));
                    }
                    assigned += path.len();
                }
                None => {
                    let path = self.longest_path(head, &label, |v| self.succ[v].is_empty(), None);
                    for (k, &v) in path.iter().enumerate() {
                        label[v] = Some((assigned + k + 1) as f64);
                    }
                    assigned += path.len();
                }
            }
            normalize(&mut label);
        }

        Ok(Enumeration {
            labels: (0..n)
                .map(|v| (self.vertices[v], label[v].expect("all labeled") as u64))
                .collect(),
        })
    }

    /// Interior vertices reachable from `v` by at least one edge.
    fn reachable_from(&self, v: usize) -> Vec<usize> {
        let mut seen = vec![false; self.vertices.len()];
        let mut queue: VecDeque<usize> = self.succ[v].iter().copied().collect();
        let mut out = Vec::new();
        while let Some(u) = queue.pop_front() {
            if std::mem::replace(&mut seen[u], true) {
                continue;
            }
            out.push(u);
            queue.extend(self.succ[u].iter().copied());
        }
        out
    }

    /// Longest path of unlabeled vertices from `head` whose last vertex
    /// satisfies `is_tail`; when `through` is set, only vertices that reach it
    /// are used. Ties prefer smaller successors.
    fn longest_path(
        &self,
        head: usize,
        label: &[Option<f64>],
        is_tail: impl Fn(usize) -> bool,
        through: Option<usize>,
    ) -> Vec<usize> {
        let allowed: Vec<bool> = match through {
            Some(j) => {
                let mut ok = vec![false; self.n_interior];
                let mut queue = VecDeque::from([j]);
                while let Some(u) = queue.pop_front() {
                    for &p in &self.pred[u] {
                        if p < self.n_interior && !ok[p] {
                            ok[p] = true;
                            queue.push_back(p);
                        }
                    }
                }
                ok
            }
            None => vec![true; self.n_interior],
        };
        let usable = |v: usize| v < self.n_interior && label[v].is_none() && allowed[v];
        // best[v] = length of the longest admissible path starting at v
        let mut best: HashMap<usize, Option<(usize, Option<usize>)>> = HashMap::new();
        fn solve(
            g: &ConnectivityGraph,
            v: usize,
            usable: &dyn Fn(usize) -> bool,
            is_tail: &dyn Fn(usize) -> bool,
            best: &mut HashMap<usize, Option<(usize, Option<usize>)>>,
        ) -> Option<(usize, Option<usize>)> {
            if let Some(b) = best.get(&v) {
                return *b;
            }
            let mut result = is_tail(v).then_some((1, None));
            for &w in &g.succ[v] {
                if !usable(w) {
                    continue;
                }
                if let Some((len, _)) = solve(g, w, usable, is_tail, best) {
                    if result.is_none_or(|(l, _)| len + 1 > l) {
                        result = Some((len + 1, Some(w)));
                    }
                }
            }
            best.insert(v, result);
            result
        }
        solve(self, head, &usable, &is_tail, &mut best).expect("head admits a path");
        let mut path = vec![head];
        while let Some(Some((_, Some(next)))) = best.get(path.last().unwrap()) {
            path.push(*next);
        }
        path
    }

    /// Labels are injective, positive, and increase along every interior edge.
    pub fn validate_enumeration(&self, enumeration: &Enumeration) -> bool {
        let mut seen = BTreeSet::new();
        for site in self.interior() {
            match enumeration.label(site) {
                Some(l) if l > 0 && seen.insert(l) => {}
                _ => return false,
            }
        }
        self.edges().iter().all(
            |(a, b)| match (enumeration.label(a), enumeration.label(b)) {
                (Some(la), Some(lb)) => la < lb,
                (None, Some(_)) => !self.is_interior(a),
                _ => false,
            },
        )
    }

    /// `L` for every interior site, by breadth-first search out of the boundary.
    pub fn boundary_distances(&self) -> BTreeMap<Site, BoundaryDistance> {
        let mut dist: Vec<Option<u64>> = vec![None; self.vertices.len()];
        let mut queue = VecDeque::new();
        for b in self.n_interior..self.vertices.len() {
            dist[b] = Some(0);
            queue.push_back(b);
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &w in &self.succ[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        (0..self.n_interior)
            .map(|v| {
                let d = dist[v].map_or(BoundaryDistance::Infinite, BoundaryDistance::Finite);
                (self.vertices[v], d)
            })
            .collect()
    }

    pub fn boundary_distance(&self, site: &Site) -> Result<BoundaryDistance, TopologyError> {
        self.interior_index(site)?;
        Ok(self.boundary_distances()[site])
    }

    /// `Γ`: interior sites with a directed path into `site`.
    pub fn upstream_set(&self, site: &Site) -> Result<BTreeSet<Site>, TopologyError> {
        let v = self.interior_index(site)?;
        let mut seen = vec![false; self.n_interior];
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for &p in &self.pred[u] {
                if p < self.n_interior && !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        Ok((0..self.n_interior)
            .filter(|&u| seen[u])
            .map(|u| self.vertices[u])
            .collect())
    }

    /// CSV `site,label,L`, one row per interior site in label order.
    pub fn enumeration_csv(&self, enumeration: &Enumeration) -> String {
        let dist = self.boundary_distances();
        let rows = enumeration.ordered_sites().into_iter().map(|site| {
            [
                site.to_string(),
                enumeration.labels[&site].to_string(),
                dist[&site].to_string(),
            ]
        });
        crate::table::csv(["site", "label", "L"], rows)
    }
}

fn normalize(label: &mut [Option<f64>]) {
    let mut order: Vec<(f64, usize)> = label
        .iter()
        .enumerate()
        .filter_map(|(v, l)| l.map(|l| (l, v)))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (rank, (_, v)) in order.into_iter().enumerate() {
        label[v] = Some((rank + 1) as f64);
    }
}
