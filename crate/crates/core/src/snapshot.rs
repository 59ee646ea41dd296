//! Plain-text cluster snapshots.
//!
//! ```text
//! cyldla v1 n=<n> d=<d> t=<t> M=<M>
//! <layer> <vertex> <stick_order>
//! ```
//!
//! Sites of `A_0` have stick order 0. Lines are sorted by stick order,
//! then vertex.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::dla::{Cluster, DlaError};
use crate::walk::Cylinder;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SnapshotError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("snapshot is for n={n} d={d} but the base graph has n={gn} d={gd}")]
    GraphMismatch { n: usize, d: usize, gn: usize, gd: usize },
    #[error("snapshot header does not match its sites: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Cluster(#[from] DlaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Site {
    pub layer: u64,
    pub vertex: usize,
    pub order: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub n: usize,
    pub d: usize,
    pub t: u64,
    /// Lowest empty layer.
    pub m: u64,
    /// Sorted by `(order, vertex)`.
    pub sites: Vec<Site>,
}

impl Snapshot {
    pub fn from_cluster(c: &Cluster) -> Self {
        let n = c.n();
        let mut sites: Vec<Site> = (0..n).map(|v| Site { layer: 0, vertex: v, order: 0 }).collect();
        sites.extend(c.stick_log().iter().map(|e| Site { layer: e.layer, vertex: e.vertex, order: e.t }));
        Snapshot { n, d: c.graph().degree(), t: c.t(), m: c.lowest_empty_layer(), sites }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("cyldla v1 n={} d={} t={} M={}\n", self.n, self.d, self.t, self.m);
        for s in &self.sites {
            let _ = writeln!(out, "{} {} {}", s.layer, s.vertex, s.order);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, SnapshotError> {
        let err = |line: usize, reason: &str| SnapshotError::Parse { line, reason: reason.to_string() };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "empty snapshot"))?;
        let mut fields = header.split(' ');
        if fields.next() != Some("cyldla") || fields.next() != Some("v1") {
            return Err(err(1, "expected 'cyldla v1' header"));
        }
        let mut value = |key: &str| -> Result<u64, SnapshotError> {
            let f = fields.next().ok_or_else(|| err(1, "truncated header"))?;
            f.strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(1, &format!("bad header field '{f}'")))
        };
        let n = value("n")? as usize;
        let d = value("d")? as usize;
        let t = value("t")?;
        let m = value("M")?;

        let mut sites = Vec::new();
        for (i, line) in lines.enumerate() {
            let nums: Vec<u64> = line
                .split(' ')
                .map(|x| x.parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err(i + 2, "expected three integers"))?;
            let [layer, vertex, order] = nums[..] else {
                return Err(err(i + 2, "expected three integers"));
            };
            sites.push(Site { layer, vertex: vertex as usize, order });
        }
        if !sites.windows(2).all(|w| (w[0].order, w[0].vertex) < (w[1].order, w[1].vertex)) {
            return Err(SnapshotError::Inconsistent("sites are not sorted by stick order and vertex".into()));
        }
        if sites.len() as u64 != n as u64 + t {
            return Err(SnapshotError::Inconsistent(format!("{} sites for n + t = {}", sites.len(), n as u64 + t)));
        }
        let snap = Snapshot { n, d, t, m, sites };
        let top = snap.sites.iter().map(|s| s.layer).max().unwrap_or(0);
        if top + 1 != m {
            return Err(SnapshotError::Inconsistent(format!("top layer {top} but M = {m}")));
        }
        Ok(snap)
    }

    /// Rebuilds the cluster on `cylinder`, replaying the sticks in order.
    pub fn into_cluster(&self, cylinder: Arc<Cylinder>) -> Result<Cluster, SnapshotError> {
        let g = cylinder.graph();
        if g.n() != self.n || g.degree() != self.d {
            return Err(SnapshotError::GraphMismatch { n: self.n, d: self.d, gn: g.n(), gd: g.degree() });
        }
        let base = self.sites.iter().filter(|s| s.order == 0).count();
        if base != self.n || self.sites.iter().any(|s| (s.order == 0) != (s.layer == 0)) {
            return Err(SnapshotError::Inconsistent("layer 0 must hold exactly the order-0 sites".into()));
        }
        let sticks: Vec<(u64, usize)> = self.sites[base..].iter().map(|s| (s.layer, s.vertex)).collect();
        if self.sites[base..].iter().zip(1..).any(|(s, t)| s.order != t) {
            return Err(SnapshotError::Inconsistent("stick orders must be 1..=t".into()));
        }
        Ok(Cluster::from_sites(cylinder, &sticks)?)
    }

    /// Occupied sites per layer, `0..M`.
    pub fn loads(&self) -> Vec<u64> {
        let mut loads = vec![0; self.m as usize];
        for s in &self.sites {
            loads[s.layer as usize] += 1;
        }
        loads
    }
}
