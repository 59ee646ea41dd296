//! Finite regular base graphs.
//!
//! Adjacency is stored as `d` neighbor slots per vertex in one flat array.
//! A self loop occupies one slot and lists the vertex itself, so a uniform
//! neighbor choice is a single uniform slot index.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::rng;

/// Default number of pairings tried by [`RegularGraph::random_regular`].
pub const DEFAULT_PAIRING_ATTEMPTS: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("cycle needs at least 3 vertices, got {0}")]
    CycleTooSmall(usize),
    #[error("torus side must be at least 3, got {0}")]
    TorusSideTooSmall(usize),
    #[error("torus dimension must be at least 1")]
    TorusDimZero,
    #[error("complete graph needs at least 3 vertices, got {0}")]
    CompleteTooSmall(usize),
    #[error("hypercube dimension must be at least 2, got {0}")]
    HypercubeTooSmall(usize),
    #[error("random regular graph needs n*d even, got n={n}, d={d}")]
    OddDegreeSum { n: usize, d: usize },
    #[error("random regular graph needs 3 <= d < n, got n={n}, d={d}")]
    BadRandomDegree { n: usize, d: usize },
    #[error("no simple pairing found in {0} attempts")]
    SamplingFailed(u32),
    #[error("vertex {vertex} has {got} neighbor slots, expected {expected}")]
    Ragged { vertex: usize, got: usize, expected: usize },
    #[error("neighbor id {id} out of range for {n} vertices")]
    NeighborOutOfRange { id: usize, n: usize },
    #[error("graph has no vertices")]
    Empty,
    #[error("graph is too large for 32-bit vertex ids")]
    TooLarge,
    #[error("invalid graph spec '{spec}': {reason}")]
    BadSpec { spec: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularGraph {
    n: usize,
    d: usize,
    slots: Vec<u32>,
    label: String,
    transitive_hint: bool,
}

impl RegularGraph {
    /// Builds a graph from explicit neighbor lists. Only the slot count is
    /// checked here; symmetry and connectivity are reported by
    /// [`RegularGraph::validate`].
    pub fn from_adjacency(
        label: impl Into<String>,
        lists: &[Vec<usize>],
        transitive_hint: bool,
    ) -> Result<Self, GraphError> {
        let n = lists.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if n > u32::MAX as usize {
            return Err(GraphError::TooLarge);
        }
        let d = lists[0].len();
        let mut slots = Vec::with_capacity(n * d);
        for (v, list) in lists.iter().enumerate() {
            if list.len() != d {
                return Err(GraphError::Ragged { vertex: v, got: list.len(), expected: d });
            }
            for &u in list {
                if u >= n {
                    return Err(GraphError::NeighborOutOfRange { id: u, n });
                }
                slots.push(u as u32);
            }
        }
        Ok(Self { n, d, slots, label: label.into(), transitive_hint })
    }

    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::CycleTooSmall(n));
        }
        let lists: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect();
        Self::from_adjacency(format!("cycle:{n}"), &lists, true)
    }

    /// Product of `dim` cycles of length `side`.
    pub fn torus(side: usize, dim: usize) -> Result<Self, GraphError> {
        if side < 3 {
            return Err(GraphError::TorusSideTooSmall(side));
        }
        if dim == 0 {
            return Err(GraphError::TorusDimZero);
        }
        let n = side.checked_pow(dim as u32).filter(|&n| n <= u32::MAX as usize).ok_or(GraphError::TooLarge)?;
        let mut lists = Vec::with_capacity(n);
        for v in 0..n {
            let mut list = Vec::with_capacity(2 * dim);
            let mut stride = 1;
            for _ in 0..dim {
                let coord = (v / stride) % side;
                let base = v - coord * stride;
                list.push(base + ((coord + side - 1) % side) * stride);
                list.push(base + ((coord + 1) % side) * stride);
                stride *= side;
            }
            lists.push(list);
        }
        let dims = vec![side.to_string(); dim].join("x");
        Self::from_adjacency(format!("torus:{dims}"), &lists, true)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::CompleteTooSmall(n));
        }
        let lists: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        Self::from_adjacency(format!("complete:{n}"), &lists, true)
    }

    /// Vertices are `dim`-bit labels, adjacent iff they differ in one bit.
    pub fn hypercube(dim: usize) -> Result<Self, GraphError> {
        if dim < 2 {
            return Err(GraphError::HypercubeTooSmall(dim));
        }
        if dim >= 32 {
            return Err(GraphError::TooLarge);
        }
        let n = 1usize << dim;
        let lists: Vec<Vec<usize>> = (0..n).map(|v| (0..dim).map(|b| v ^ (1 << b)).collect()).collect();
        Self::from_adjacency(format!("hypercube:{dim}"), &lists, true)
    }

    /// Simple `d`-regular graph from the pairing model, rejecting pairings
    /// with loops or repeated edges.
    pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Self, GraphError> {
        Self::random_regular_with_attempts(n, d, seed, DEFAULT_PAIRING_ATTEMPTS)
    }

    pub fn random_regular_with_attempts(n: usize, d: usize, seed: u64, attempts: u32) -> Result<Self, GraphError> {
        if (n * d) % 2 != 0 {
            return Err(GraphError::OddDegreeSum { n, d });
        }
        if d < 3 || d >= n {
            return Err(GraphError::BadRandomDegree { n, d });
        }
        if n > u32::MAX as usize {
            return Err(GraphError::TooLarge);
        }
        let mut rng = rng::from_seed(seed);
        let mut points: Vec<usize> = Vec::with_capacity(n * d);
        'attempt: for _ in 0..attempts {
            points.clear();
            points.extend((0..n).flat_map(|v| std::iter::repeat_n(v, d)));
            for i in (1..points.len()).rev() {
                let j = rng::index(&mut rng, i + 1);
                points.swap(i, j);
            }
            let mut lists: Vec<Vec<usize>> = vec![Vec::with_capacity(d); n];
            for pair in points.chunks_exact(2) {
                let (u, v) = (pair[0], pair[1]);
                if u == v || lists[u].contains(&v) {
                    continue 'attempt;
                }
                lists[u].push(v);
                lists[v].push(u);
            }
            for list in &mut lists {
                list.sort_unstable();
            }
            return Self::from_adjacency(format!("random:{n}:{d}:seed={seed}"), &lists, false);
        }
        Err(GraphError::SamplingFailed(attempts))
    }

    /// Adds one loop slot at every vertex. Existing loops are kept as
    /// separate slots.
    pub fn with_self_loops(&self) -> Self {
        let d = self.d + 1;
        let mut slots = Vec::with_capacity(self.n * d);
        for v in 0..self.n {
            slots.extend_from_slice(self.neighbors(v));
            slots.push(v as u32);
        }
        Self { n: self.n, d, slots, label: format!("{}+loops", self.label), transitive_hint: self.transitive_hint }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Set only by generators whose output is known to be vertex transitive.
    pub fn transitive_hint(&self) -> bool {
        self.transitive_hint
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.slots[v * self.d..(v + 1) * self.d]
    }

    #[inline]
    pub fn neighbor(&self, v: usize, slot: usize) -> usize {
        self.slots[v * self.d + slot] as usize
    }

    /// Loop slots at `v`.
    pub fn loops_at(&self, v: usize) -> usize {
        self.neighbors(v).iter().filter(|&&u| u as usize == v).count()
    }

    pub fn total_loops(&self) -> usize {
        (0..self.n).map(|v| self.loops_at(v)).sum()
    }

    /// Multiplicity of `u` among the slots of `v`.
    pub fn multiplicity(&self, v: usize, u: usize) -> usize {
        self.neighbors(v).iter().filter(|&&w| w as usize == u).count()
    }

    /// Two-coloring if the graph is bipartite. Any loop rules it out.
    pub fn bipartition(&self) -> Option<Vec<u8>> {
        let mut color = vec![u8::MAX; self.n];
        for s in 0..self.n {
            if color[s] != u8::MAX {
                continue;
            }
            color[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &u in self.neighbors(v) {
                    let u = u as usize;
                    if color[u] == u8::MAX {
                        color[u] = 1 - color[v];
                        queue.push_back(u);
                    } else if color[u] == color[v] {
                        return None;
                    }
                }
            }
        }
        Some(color)
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        seen[0] = true;
        let mut stack = vec![0usize];
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in self.neighbors(v) {
                let u = u as usize;
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }

    pub fn validate(&self) -> ValidationReport {
        let regular = self.d >= 2 && self.slots.len() == self.n * self.d;
        let mut asymmetric = None;
        'outer: for v in 0..self.n {
            for &u in self.neighbors(v) {
                let u = u as usize;
                if u != v && self.multiplicity(v, u) != self.multiplicity(u, v) {
                    asymmetric = Some((v, u));
                    break 'outer;
                }
            }
        }
        ValidationReport {
            regular,
            symmetric: asymmetric.is_none(),
            connected: self.is_connected(),
            min_size: self.n >= 2,
            asymmetric_pair: asymmetric,
        }
    }

    /// Plain-text edge list, one `u v` line per edge with `u <= v`;
    /// parallel edges and loops are repeated per slot.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for v in 0..self.n {
            for &u in self.neighbors(v) {
                let u = u as usize;
                if v <= u {
                    out.push_str(&format!("{v} {u}\n"));
                }
            }
        }
        out
    }
}

/// Per-invariant outcome of [`RegularGraph::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub regular: bool,
    pub symmetric: bool,
    pub connected: bool,
    pub min_size: bool,
    /// First pair `(v, u)` whose multiplicities disagree.
    pub asymmetric_pair: Option<(usize, usize)>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.regular && self.symmetric && self.connected && self.min_size
    }

    pub fn lines(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("regular", self.regular),
            ("symmetric", self.symmetric),
            ("connected", self.connected),
            ("min_size", self.min_size),
        ]
    }
}

/// Parsed graph description such as `cycle:500`, `torus:10x10x10`,
/// `complete:64`, `hypercube:6` or `random:100:4:seed=7`. A `+loops`
/// suffix adds a self loop at every vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSpec {
    pub family: Family,
    pub loops: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    Cycle(usize),
    Torus { side: usize, dim: usize },
    Complete(usize),
    Hypercube(usize),
    Random { n: usize, d: usize, seed: u64 },
}

impl GraphSpec {
    pub fn build(&self) -> Result<RegularGraph, GraphError> {
        let g = match self.family {
            Family::Cycle(n) => RegularGraph::cycle(n)?,
            Family::Torus { side, dim } => RegularGraph::torus(side, dim)?,
            Family::Complete(n) => RegularGraph::complete(n)?,
            Family::Hypercube(dim) => RegularGraph::hypercube(dim)?,
            Family::Random { n, d, seed } => RegularGraph::random_regular(n, d, seed)?,
        };
        Ok(if self.loops { g.with_self_loops() } else { g })
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Cycle(n) => write!(f, "cycle:{n}")?,
            Family::Torus { side, dim } => write!(f, "torus:{}", vec![side.to_string(); dim].join("x"))?,
            Family::Complete(n) => write!(f, "complete:{n}")?,
            Family::Hypercube(dim) => write!(f, "hypercube:{dim}")?,
            Family::Random { n, d, seed } => write!(f, "random:{n}:{d}:seed={seed}")?,
        }
        if self.loops {
            f.write_str("+loops")?;
        }
        Ok(())
    }
}

impl FromStr for GraphSpec {
    type Err = GraphError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| GraphError::BadSpec { spec: spec.to_string(), reason: reason.to_string() };
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(&format!("'{s}' is not a count")));

        let trimmed = spec.trim();
        let (body, loops) = match trimmed.strip_suffix("+loops") {
            Some(b) => (b, true),
            None => (trimmed, false),
        };
        let (kind, args) = body.split_once(':').ok_or_else(|| bad("expected <family>:<args>"))?;
        let family = match kind {
            "cycle" => Family::Cycle(num(args)?),
            "complete" => Family::Complete(num(args)?),
            "hypercube" => Family::Hypercube(num(args)?),
            "torus" => {
                let sides = args.split('x').map(num).collect::<Result<Vec<_>, _>>()?;
                if sides.iter().any(|&s| s != sides[0]) {
                    return Err(bad("torus sides must be equal"));
                }
                Family::Torus { side: sides[0], dim: sides.len() }
            }
            "random" => {
                let parts: Vec<&str> = args.split(':').collect();
                if parts.len() != 3 {
                    return Err(bad("expected random:<n>:<d>:seed=<s>"));
                }
                let seed = parts[2]
                    .strip_prefix("seed=")
                    .unwrap_or(parts[2])
                    .parse::<u64>()
                    .map_err(|_| bad("seed must be an unsigned integer"))?;
                Family::Random { n: num(parts[0])?, d: num(parts[1])?, seed }
            }
            other => return Err(bad(&format!("unknown family '{other}'"))),
        };
        Ok(GraphSpec { family, loops })
    }
}

/// Parses and builds in one step.
pub fn from_spec(spec: &str) -> Result<RegularGraph, GraphError> {
    spec.parse::<GraphSpec>()?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn neighbor_set(g: &RegularGraph, v: usize) -> BTreeSet<usize> {
        g.neighbors(v).iter().map(|&u| u as usize).collect()
    }

    fn adjacency_sets(g: &RegularGraph) -> Vec<BTreeSet<usize>> {
        (0..g.n()).map(|v| neighbor_set(g, v)).collect()
    }

    #[test]
    fn smallest_cycle() {
        let g = RegularGraph::cycle(3).unwrap();
        assert_eq!(neighbor_set(&g, 0), BTreeSet::from([1, 2]));
        assert!(g.validate().passed());
    }

    #[test]
    fn cycle_500() {
        let g = RegularGraph::cycle(500).unwrap();
        assert_eq!(g.degree(), 2);
        assert!(g.is_connected());
        assert!(g.transitive_hint());
    }

    #[test]
    fn cycle_4_neighbors() {
        let g = RegularGraph::cycle(4).unwrap();
        assert_eq!(neighbor_set(&g, 1), BTreeSet::from([0, 2]));
    }

    #[test]
    fn short_cycle_rejected() {
        assert_eq!(RegularGraph::cycle(2), Err(GraphError::CycleTooSmall(2)));
    }

    #[test]
    fn torus_counts() {
        let g = RegularGraph::torus(3, 2).unwrap();
        assert_eq!((g.n(), g.degree()), (9, 4));
        let g = RegularGraph::torus(4, 3).unwrap();
        assert_eq!((g.n(), g.degree()), (64, 6));
        assert!(g.validate().passed());
    }

    #[test]
    fn one_dimensional_torus_is_cycle() {
        let t = RegularGraph::torus(3, 1).unwrap();
        let c = RegularGraph::cycle(3).unwrap();
        for v in 0..3 {
            assert_eq!(t.neighbors(v), c.neighbors(v));
        }
        assert!(RegularGraph::torus(2, 3).is_err());
    }

    #[test]
    fn complete_graphs() {
        let g = RegularGraph::complete(4).unwrap();
        assert_eq!(g.degree(), 3);
        assert_eq!(neighbor_set(&g, 0), BTreeSet::from([1, 2, 3]));
        assert_eq!(adjacency_sets(&RegularGraph::complete(3).unwrap()), adjacency_sets(&RegularGraph::cycle(3).unwrap()));
        let k10 = RegularGraph::complete(10).unwrap();
        for v in 0..10 {
            for u in 0..10 {
                assert_eq!(k10.multiplicity(v, u), usize::from(u != v));
            }
        }
    }

    #[test]
    fn square_is_a_four_cycle() {
        let q = RegularGraph::hypercube(2).unwrap();
        // binary labels 0,1,3,2 walk around the square
        let relabel = [0usize, 1, 3, 2];
        let c = RegularGraph::cycle(4).unwrap();
        for i in 0..4 {
            let mapped: BTreeSet<usize> =
                neighbor_set(&c, i).into_iter().map(|j| relabel[j]).collect();
            assert_eq!(neighbor_set(&q, relabel[i]), mapped);
        }
        let q3 = RegularGraph::hypercube(3).unwrap();
        assert_eq!((q3.n(), q3.degree()), (8, 3));
        assert!(RegularGraph::hypercube(4).unwrap().bipartition().is_some());
    }

    #[test]
    fn random_regular_graphs() {
        let g = RegularGraph::random_regular(10, 3, 1).unwrap();
        assert!(g.validate().passed());
        assert!(!g.transitive_hint());
        assert_eq!(RegularGraph::random_regular(5, 3, 1), Err(GraphError::OddDegreeSum { n: 5, d: 3 }));
        let k4 = RegularGraph::random_regular(4, 3, 9).unwrap();
        assert_eq!(adjacency_sets(&k4), adjacency_sets(&RegularGraph::complete(4).unwrap()));
        assert_eq!(RegularGraph::random_regular(100, 4, 7), RegularGraph::random_regular(100, 4, 7));
    }

    #[test]
    fn pairing_cap_reported() {
        assert_eq!(
            RegularGraph::random_regular_with_attempts(40, 30, 1, 3),
            Err(GraphError::SamplingFailed(3))
        );
    }

    #[test]
    fn self_loops() {
        let g = RegularGraph::cycle(3).unwrap().with_self_loops();
        for v in 0..3 {
            assert_eq!(g.neighbors(v).len(), 3);
            assert_eq!(neighbor_set(&g, v), BTreeSet::from([0, 1, 2]));
            assert_eq!(g.loops_at(v), 1);
        }
        let twice = g.with_self_loops();
        assert_eq!(twice.degree(), 4);
        assert_eq!(twice.loops_at(2), 2);
        assert!(twice.validate().passed());
        assert!(g.bipartition().is_none());
    }

    #[test]
    fn validation_failures() {
        assert!(RegularGraph::torus(3, 2).unwrap().validate().passed());

        // 0 lists 1 but 1 does not list 0
        let broken = RegularGraph::from_adjacency("broken", &[vec![1, 2], vec![2, 2], vec![0, 1]], false).unwrap();
        let r = broken.validate();
        assert!(!r.symmetric);
        assert!(!r.passed());

        let two_triangles: Vec<Vec<usize>> =
            vec![vec![1, 2], vec![0, 2], vec![0, 1], vec![4, 5], vec![3, 5], vec![3, 4]];
        let r = RegularGraph::from_adjacency("2K3", &two_triangles, false).unwrap().validate();
        assert!(r.symmetric);
        assert!(!r.connected);
    }

    #[test]
    fn ragged_lists_rejected() {
        let err = RegularGraph::from_adjacency("x", &[vec![1], vec![0, 0]], false).unwrap_err();
        assert!(matches!(err, GraphError::Ragged { vertex: 1, .. }));
    }

    #[test]
    fn spec_round_trip() {
        for s in ["cycle:500", "torus:10x10x10", "complete:64", "hypercube:6", "random:100:4:seed=7", "complete:3+loops"] {
            let spec: GraphSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("torus:3x4".parse::<GraphSpec>().is_err());
        assert!("petersen:10".parse::<GraphSpec>().is_err());
        assert_eq!(from_spec("torus:10x10x10").unwrap().n(), 1000);
        assert_eq!(from_spec("complete:3+loops").unwrap().degree(), 3);
    }

    #[test]
    fn edge_list_export() {
        let g = RegularGraph::cycle(3).unwrap().with_self_loops();
        assert_eq!(g.edge_list(), "0 2\n0 1\n0 0\n1 2\n1 1\n2 2\n");
    }
}
