//! Conflict graphs, schedules and independent-set enumeration.
//!
//! Links are indexed `0..N` internally. Anything user-facing (config files,
//! `Display`, the canonical grid numbering) uses 1-based link ids.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of links for exact (enumerative) analysis.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// A set of simultaneously active links, stored as a bitset of length `N`.
///
/// Ordering is numeric on the bitset with link 0 as the least significant
/// bit, which is the canonical state order used by every exact-analysis
/// routine.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    len: usize,
    words: Vec<u64>,
}

impl Schedule {
    pub fn empty(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64).max(1)],
        }
    }

    /// Builds a schedule from 0-based link indices. Panics on out-of-range ids.
    pub fn from_links<I: IntoIterator<Item = usize>>(len: usize, links: I) -> Self {
        let mut s = Self::empty(len);
        for l in links {
            s.insert(l);
        }
        s
    }

    /// Builds a schedule from 1-based link ids.
    pub fn from_ids(len: usize, ids: &[usize]) -> Result<Self> {
        let mut s = Self::empty(len);
        for &id in ids {
            if id == 0 || id > len {
                return Err(Error::InvalidParameter(format!(
                    "link id {id} outside 1..={len}"
                )));
            }
            s.insert(id - 1);
        }
        Ok(s)
    }

    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= 64, "mask constructor needs len <= 64");
        let mut s = Self::empty(len);
        s.words[0] = mask;
        s
    }

    /// The bitset as a single word, when it fits.
    pub fn mask(&self) -> Option<u64> {
        (self.len <= 64).then(|| self.words[0])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn contains(&self, link: usize) -> bool {
        debug_assert!(link < self.len);
        self.words[link / 64] >> (link % 64) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, link: usize) {
        assert!(link < self.len, "link {link} out of range for length {}", self.len);
        self.words[link / 64] |= 1 << (link % 64);
    }

    #[inline]
    pub fn remove(&mut self, link: usize) {
        assert!(link < self.len, "link {link} out of range for length {}", self.len);
        self.words[link / 64] &= !(1 << (link % 64));
    }

    #[inline]
    pub fn set(&mut self, link: usize, active: bool) {
        if active {
            self.insert(link)
        } else {
            self.remove(link)
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Active links in ascending order (0-based).
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Active links as 1-based ids.
    pub fn ids(&self) -> Vec<usize> {
        self.iter().map(|l| l + 1).collect()
    }

    /// `XΔY`.
    pub fn symmetric_difference(&self, other: &Schedule) -> Schedule {
        assert_eq!(self.len, other.len);
        Schedule {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        }
    }

    pub fn is_subset(&self, other: &Schedule) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    /// One character per link, link 1 first: `'1'` active, `'0'` idle.
    pub fn to_bit_string(&self) -> String {
        (0..self.len)
            .map(|l| if self.contains(l) { '1' } else { '0' })
            .collect()
    }
}

impl Ord for Schedule {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len
            .cmp(&other.len)
            .then_with(|| self.words.iter().rev().cmp(other.words.iter().rev()))
    }
}

impl PartialOrd for Schedule {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, id) in self.ids().into_iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

/// Serialized as its 1-based link ids.
impl Serialize for Schedule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.ids().serialize(serializer)
    }
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Schedule{self}")
    }
}

/// Interference model: vertices are links, edges join links that cannot be
/// active in the same slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConflictGraph {
    neighbors: Vec<Vec<usize>>,
}

impl ConflictGraph {
    /// Builds a conflict graph from explicit 0-based conflict edges.
    pub fn new(num_links: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_links == 0 {
            return Err(Error::InvalidParameter("a conflict graph needs at least one link".into()));
        }
        let mut neighbors = vec![Vec::new(); num_links];
        for &(a, b) in edges {
            if a == b || a >= num_links || b >= num_links {
                return Err(Error::InvalidConflictEdge(a, b));
            }
            if !neighbors[a].contains(&b) {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Ok(Self { neighbors })
    }

    /// One-hop interference: two links conflict iff they share an endpoint.
    pub fn from_links(node_count: usize, link_endpoints: &[(usize, usize)]) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut incident = vec![Vec::new(); node_count];
        for (l, &(u, v)) in link_endpoints.iter().enumerate() {
            for node in [u, v] {
                if node >= node_count {
                    return Err(Error::DanglingEndpoint {
                        link: l + 1,
                        node,
                        nodes: node_count,
                    });
                }
            }
            if u == v {
                return Err(Error::SelfLoopLink(l + 1));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::DuplicateLink(l + 1));
            }
            incident[u].push(l);
            incident[v].push(l);
        }
        let mut edges = Vec::new();
        for links in &incident {
            for (i, &a) in links.iter().enumerate() {
                for &b in &links[i + 1..] {
                    edges.push((a, b));
                }
            }
        }
        Self::new(link_endpoints.len(), &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter("a cycle needs at least 3 links".into()));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, &edges)
    }

    /// Link 0 is the hub.
    pub fn star(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::new(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        Self::new(n, &edges)
    }

    pub fn num_links(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, link: usize) -> &[usize] {
        &self.neighbors[link]
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Conflict edges `(a, b)` with `a < b`, 0-based.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ns) in self.neighbors.iter().enumerate() {
            out.extend(ns.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Neighbor sets as bitmasks; only valid for `N <= 64`.
    pub fn neighbor_masks(&self) -> Option<Vec<u64>> {
        (self.num_links() <= 64).then(|| {
            self.neighbors
                .iter()
                .map(|ns| ns.iter().fold(0u64, |m, &b| m | 1 << b))
                .collect()
        })
    }

    /// True iff some neighbor of `link` is active in `schedule`.
    #[inline]
    pub fn has_active_neighbor(&self, schedule: &Schedule, link: usize) -> bool {
        self.neighbors[link].iter().any(|&j| schedule.contains(j))
    }

    fn check_len(&self, schedule: &Schedule) -> Result<()> {
        if schedule.len() != self.num_links() {
            return Err(Error::LengthMismatch {
                expected: self.num_links(),
                got: schedule.len(),
            });
        }
        Ok(())
    }

    pub fn is_independent(&self, schedule: &Schedule) -> bool {
        debug_assert_eq!(schedule.len(), self.num_links());
        schedule
            .iter()
            .all(|l| !self.has_active_neighbor(schedule, l))
    }

    /// True iff no idle link can be switched on without creating a conflict.
    pub fn is_maximal(&self, schedule: &Schedule) -> Result<bool> {
        self.check_len(schedule)?;
        if !self.is_independent(schedule) {
            return Err(Error::NotIndependent(schedule.to_string()));
        }
        Ok((0..self.num_links())
            .all(|l| schedule.contains(l) || self.has_active_neighbor(schedule, l)))
    }

    pub fn ensure_independent(&self, schedule: &Schedule) -> Result<()> {
        self.check_len(schedule)?;
        if self.is_independent(schedule) {
            Ok(())
        } else {
            Err(Error::NotIndependent(schedule.to_string()))
        }
    }

    /// Applies a permutation of link labels: link `l` becomes `perm[l]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (perm[a], perm[b]))
            .collect();
        Self::new(self.num_links(), &edges)
    }
}

/// Independent-set enumeration under [`DEFAULT_ENUMERATION_CAP`].
pub fn enumerate_independent_sets(graph: &ConflictGraph) -> Result<Vec<Schedule>> {
    enumerate_independent_sets_with_cap(graph, DEFAULT_ENUMERATION_CAP)
}

/// All independent sets, each once, in ascending bitset order.
pub fn enumerate_independent_sets_with_cap(
    graph: &ConflictGraph,
    cap: usize,
) -> Result<Vec<Schedule>> {
    let n = graph.num_links();
    if n > cap || n > 64 {
        return Err(Error::EnumerationCap {
            links: n,
            cap: cap.min(64),
        });
    }
    let masks = graph.neighbor_masks().expect("n <= 64");
    let mut out = Vec::new();
    // Deciding links from the highest index down, excluding before including,
    // visits the leaves in ascending numeric order.
    fn rec(link: usize, chosen: u64, blocked: u64, masks: &[u64], out: &mut Vec<u64>) {
        if link == 0 {
            out.push(chosen);
            return;
        }
        let l = link - 1;
        rec(l, chosen, blocked, masks, out);
        if blocked >> l & 1 == 0 {
            rec(l, chosen | 1 << l, blocked | masks[l], masks, out);
        }
    }
    rec(n, 0, 0, &masks, &mut out);
    debug_assert!(out.windows(2).all(|w| w[0] < w[1]));
    Ok(out.into_iter().map(|m| Schedule::from_mask(n, m)).collect())
}

/// The 24-link 4×4 grid with its canonical link numbering.
#[derive(Clone, Debug)]
pub struct GridNetwork {
    /// Grid vertices as `(row, col)`, 0-based, row-major.
    pub nodes: Vec<(usize, usize)>,
    /// Link endpoints as node indices; `links[k]` is link id `k + 1`.
    pub links: Vec<(usize, usize)>,
    pub graph: ConflictGraph,
}

/// The four maximal schedules used to build grid arrival rates (1-based ids).
pub const GRID_MAXIMAL_SCHEDULES: [[usize; 8]; 4] = [
    [1, 3, 8, 10, 15, 17, 22, 24],
    [4, 5, 6, 7, 18, 19, 20, 21],
    [1, 3, 9, 11, 14, 16, 22, 24],
    [2, 4, 7, 12, 13, 18, 21, 23],
];

impl GridNetwork {
    pub fn maximal_schedules(&self) -> Vec<Schedule> {
        GRID_MAXIMAL_SCHEDULES
            .iter()
            .map(|ids| Schedule::from_ids(self.links.len(), ids).expect("valid grid ids"))
            .collect()
    }
}

/// Numbering: row `r`'s three horizontal links, then the four vertical links
/// from row `r` to row `r + 1` (columns left to right), repeated per row.
pub fn build_grid_4x4() -> GridNetwork {
    const SIDE: usize = 4;
    let node = |r: usize, c: usize| r * SIDE + c;
    let nodes = (0..SIDE)
        .flat_map(|r| (0..SIDE).map(move |c| (r, c)))
        .collect();
    let mut links = Vec::with_capacity(24);
    for r in 0..SIDE {
        for c in 0..SIDE - 1 {
            links.push((node(r, c), node(r, c + 1)));
        }
        if r + 1 < SIDE {
            for c in 0..SIDE {
                links.push((node(r, c), node(r + 1, c)));
            }
        }
    }
    let graph = ConflictGraph::from_links(SIDE * SIDE, &links).expect("grid links are valid");
    GridNetwork {
        nodes,
        links,
        graph,
    }
}

/// Graph description as it appears in config files.
///
/// Node indices are 0-based; link ids in `conflicts` are 1-based.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged, deny_unknown_fields)]
pub enum GraphSpec {
    /// `grid4x4`, or `path:N`, `cycle:N`, `star:N`, `complete:N` conflict graphs.
    Builtin { builtin: String },
    /// Node pairs under one-hop interference.
    Links {
        nodes: usize,
        links: Vec<[usize; 2]>,
    },
    /// An explicit conflict graph.
    Conflicts {
        num_links: usize,
        conflicts: Vec<[usize; 2]>,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<ConflictGraph> {
        match self {
            GraphSpec::Builtin { builtin } => {
                if builtin == "grid4x4" {
                    return Ok(build_grid_4x4().graph);
                }
                let (name, n) = builtin
                    .split_once(':')
                    .and_then(|(name, n)| n.parse::<usize>().ok().map(|n| (name, n)))
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown builtin graph {builtin:?}")))?;
                match name {
                    "path" => ConflictGraph::path(n),
                    "cycle" => ConflictGraph::cycle(n),
                    "star" => ConflictGraph::star(n),
                    "complete" => ConflictGraph::complete(n),
                    _ => Err(Error::InvalidParameter(format!("unknown builtin graph {builtin:?}"))),
                }
            }
            GraphSpec::Links { nodes, links } => {
                let pairs: Vec<_> = links.iter().map(|&[u, v]| (u, v)).collect();
                ConflictGraph::from_links(*nodes, &pairs)
            }
            GraphSpec::Conflicts {
                num_links,
                conflicts,
            } => {
                let mut edges = Vec::with_capacity(conflicts.len());
                for &[a, b] in conflicts {
                    if a == 0 || b == 0 {
                        return Err(Error::InvalidConflictEdge(a, b));
                    }
                    edges.push((a - 1, b - 1));
                }
                ConflictGraph::new(*num_links, &edges)
            }
        }
    }
}
