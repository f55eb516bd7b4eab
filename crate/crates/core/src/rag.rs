//! Region adjacency graph: construction from a label volume and mutation
//! under merges.
//!
//! Nodes are regions (voxel count, type tag, per-channel value summaries);
//! edges are shared faces (face length, per-channel boundary summaries).
//! Merging regions mutates the graph in place and must leave it exactly equal
//! to a graph rebuilt from the relabeled volume.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Error;
use crate::hist::MomentHistogram;
use crate::volume::{check_same_dims, for_each_face_pair, LabelVolume, ProbabilityStack};
use crate::Result;

pub type RegionId = u32;

/// Unordered pair of region ids identifying a boundary edge.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct EdgeKey {
    lo: RegionId,
    hi: RegionId,
}

impl EdgeKey {
    /// Normalizes the pair; panics if `a == b` (self-edges cannot exist).
    pub fn new(a: RegionId, b: RegionId) -> Self {
        assert_ne!(a, b, "edge endpoints must differ");
        if a < b {
            Self { lo: a, hi: b }
        } else {
            Self { lo: b, hi: a }
        }
    }

    pub fn lo(&self) -> RegionId {
        self.lo
    }

    pub fn hi(&self) -> RegionId {
        self.hi
    }

    pub fn contains(&self, id: RegionId) -> bool {
        self.lo == id || self.hi == id
    }

    pub fn other(&self, id: RegionId) -> RegionId {
        if self.lo == id {
            self.hi
        } else {
            self.lo
        }
    }
}

impl std::fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{},{}}}", self.lo, self.hi)
    }
}

/// Superpixel population a region belongs to in the two-phase scheme.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RegionType {
    Cyto,
    Mito,
}

/// Scheduling flag used by the delayed agglomeration policy.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EdgeFlag {
    Active,
    Delay,
}

#[derive(Debug, Clone)]
pub struct RegionNode {
    pub(crate) voxel_count: u64,
    pub(crate) region_type: RegionType,
    pub(crate) channel_hists: Vec<MomentHistogram>,
}

impl RegionNode {
    pub fn voxel_count(&self) -> u64 {
        self.voxel_count
    }

    pub fn region_type(&self) -> RegionType {
        self.region_type
    }

    pub fn channel_hists(&self) -> &[MomentHistogram] {
        &self.channel_hists
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryEdge {
    pub(crate) face_length: u64,
    pub(crate) channel_hists: Vec<MomentHistogram>,
    pub(crate) flag: EdgeFlag,
    pub(crate) cached_confidence: Option<f64>,
    pub(crate) version: u64,
}

impl BoundaryEdge {
    pub fn face_length(&self) -> u64 {
        self.face_length
    }

    pub fn channel_hists(&self) -> &[MomentHistogram] {
        &self.channel_hists
    }

    pub fn flag(&self) -> EdgeFlag {
        self.flag
    }

    pub fn cached_confidence(&self) -> Option<f64> {
        self.cached_confidence
    }

    pub fn version(&self) -> u64 {
        self.version
    }
}

/// Region adjacency graph with mergeable per-node and per-edge summaries.
#[derive(Debug, Clone)]
pub struct RegionGraph {
    channel_names: Vec<String>,
    nodes: BTreeMap<RegionId, RegionNode>,
    edges: BTreeMap<EdgeKey, BoundaryEdge>,
    adjacency: BTreeMap<RegionId, BTreeSet<RegionId>>,
    next_version: u64,
}

impl RegionGraph {
    /// Builds the graph from a label volume and its probability stack using
    /// face adjacency (4-neighborhood in 2D, 6-neighborhood in 3D).
    ///
    /// Every face-adjacent voxel pair with differing labels contributes one
    /// unit of face length and both voxels' channel values to the edge
    /// summaries. Faces against the volume border are not counted.
    pub fn build(labels: &LabelVolume, probs: &ProbabilityStack) -> Result<Self> {
        check_same_dims(labels.dims(), probs.dims())?;
        if labels.contains_zero() {
            return Err(Error::ZeroLabel);
        }
        let n_channels = probs.num_channels();
        let mut nodes: BTreeMap<RegionId, RegionNode> = BTreeMap::new();
        for (i, &label) in labels.labels().iter().enumerate() {
            let node = nodes.entry(label).or_insert_with(|| RegionNode {
                voxel_count: 0,
                region_type: RegionType::Cyto,
                channel_hists: vec![MomentHistogram::new(); n_channels],
            });
            node.voxel_count += 1;
            for c in 0..n_channels {
                node.channel_hists[c].accumulate(probs.channel(c)[i] as f64)?;
            }
        }

        let mut edges: BTreeMap<EdgeKey, BoundaryEdge> = BTreeMap::new();
        let mut range_error = None;
        for_each_face_pair(labels.dims(), |a, b| {
            let (la, lb) = (labels.get(a), labels.get(b));
            if la == lb {
                return;
            }
            let edge = edges
                .entry(EdgeKey::new(la, lb))
                .or_insert_with(|| BoundaryEdge {
                    face_length: 0,
                    channel_hists: vec![MomentHistogram::new(); n_channels],
                    flag: EdgeFlag::Active,
                    cached_confidence: None,
                    version: 0,
                });
            edge.face_length += 1;
            for c in 0..n_channels {
                for &voxel in &[a, b] {
                    if let Err(e) = edge.channel_hists[c].accumulate(probs.channel(c)[voxel] as f64)
                    {
                        range_error.get_or_insert(e);
                    }
                }
            }
        });
        if let Some(e) = range_error {
            return Err(e);
        }

        let mut adjacency: BTreeMap<RegionId, BTreeSet<RegionId>> =
            nodes.keys().map(|&id| (id, BTreeSet::new())).collect();
        for key in edges.keys() {
            adjacency.get_mut(&key.lo()).unwrap().insert(key.hi());
            adjacency.get_mut(&key.hi()).unwrap().insert(key.lo());
        }

        Ok(Self {
            channel_names: probs.names().to_vec(),
            nodes,
            edges,
            adjacency,
            next_version: 1,
        })
    }

    /// Hand-built graph for synthetic workloads and tests: nodes as
    /// `(id, voxel_count)`, edges as `(a, b, face_length)`. Channel summaries
    /// are empty.
    pub fn from_edges(nodes: &[(RegionId, u64)], edge_list: &[(RegionId, RegionId, u64)]) -> Self {
        let mut g = Self {
            channel_names: Vec::new(),
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            next_version: 1,
        };
        for &(id, count) in nodes {
            g.nodes.insert(
                id,
                RegionNode {
                    voxel_count: count,
                    region_type: RegionType::Cyto,
                    channel_hists: Vec::new(),
                },
            );
            g.adjacency.insert(id, BTreeSet::new());
        }
        for &(a, b, face_length) in edge_list {
            g.edges.insert(
                EdgeKey::new(a, b),
                BoundaryEdge {
                    face_length,
                    channel_hists: Vec::new(),
                    flag: EdgeFlag::Active,
                    cached_confidence: None,
                    version: 0,
                },
            );
            g.adjacency.get_mut(&a).unwrap().insert(b);
            g.adjacency.get_mut(&b).unwrap().insert(a);
        }
        g
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channel_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: RegionId) -> Option<&RegionNode> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, key: EdgeKey) -> Option<&BoundaryEdge> {
        self.edges.get(&key)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn edge_keys(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.edges.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeKey, &BoundaryEdge)> + '_ {
        self.edges.iter().map(|(k, e)| (*k, e))
    }

    /// Adjacent region ids of a live node.
    pub fn neighbors(&self, id: RegionId) -> Result<&BTreeSet<RegionId>> {
        self.adjacency.get(&id).ok_or(Error::UnknownRegion(id))
    }

    pub fn set_region_type(&mut self, id: RegionId, t: RegionType) -> Result<()> {
        self.nodes
            .get_mut(&id)
            .ok_or(Error::UnknownRegion(id))?
            .region_type = t;
        Ok(())
    }

    /// Total voxels across live nodes (conserved under merges).
    pub fn total_voxels(&self) -> u64 {
        self.nodes.values().map(|n| n.voxel_count).sum()
    }

    /// Total face length across live edges.
    pub fn total_face_length(&self) -> u64 {
        self.edges.values().map(|e| e.face_length).sum()
    }

    /// Sum of face lengths over all edges incident to `id`; the denominator
    /// of the mitochondria overlap ratio.
    pub fn incident_face_length(&self, id: RegionId) -> Result<u64> {
        let nbrs = self.neighbors(id)?;
        Ok(nbrs
            .iter()
            .map(|&b| self.edges[&EdgeKey::new(id, b)].face_length)
            .sum())
    }

    pub(crate) fn edge_mut(&mut self, key: EdgeKey) -> Option<&mut BoundaryEdge> {
        self.edges.get_mut(&key)
    }

    /// Merges `absorb` into `keep`: sums the node summaries, dissolves the
    /// shared edge, re-keys `{absorb, b}` edges to `{keep, b}` (unioning with
    /// any existing parallel edge), and stamps a new version on every edge
    /// incident to the merged node. The merged node is Cyto if either input
    /// was Cyto.
    pub fn merge_regions(&mut self, keep: RegionId, absorb: RegionId) -> Result<()> {
        if keep == absorb {
            return Err(Error::SelfMerge(keep));
        }
        if !self.nodes.contains_key(&keep) {
            return Err(Error::UnknownRegion(keep));
        }
        if !self.nodes.contains_key(&absorb) {
            return Err(Error::UnknownRegion(absorb));
        }
        let shared = EdgeKey::new(keep, absorb);
        if self.edges.remove(&shared).is_none() {
            return Err(Error::MissingEdge(keep, absorb));
        }

        // Fold the absorbed node into the kept one.
        let absorbed_node = self.nodes.remove(&absorb).expect("checked above");
        {
            let kept = self.nodes.get_mut(&keep).expect("checked above");
            kept.voxel_count += absorbed_node.voxel_count;
            for (h, other) in kept
                .channel_hists
                .iter_mut()
                .zip(&absorbed_node.channel_hists)
            {
                h.merge_from(other);
            }
            if absorbed_node.region_type == RegionType::Cyto {
                kept.region_type = RegionType::Cyto;
            }
        }

        // Re-key the absorbed node's edges; union with parallel edges.
        let absorb_nbrs = self.adjacency.remove(&absorb).expect("adjacency in sync");
        for b in absorb_nbrs {
            if b == keep {
                continue;
            }
            let old = self
                .edges
                .remove(&EdgeKey::new(absorb, b))
                .expect("edge map in sync with adjacency");
            let new_key = EdgeKey::new(keep, b);
            match self.edges.get_mut(&new_key) {
                Some(existing) => {
                    existing.face_length += old.face_length;
                    for (h, other) in existing.channel_hists.iter_mut().zip(&old.channel_hists) {
                        h.merge_from(other);
                    }
                }
                None => {
                    self.edges.insert(new_key, old);
                }
            }
            self.adjacency.get_mut(&b).unwrap().remove(&absorb);
            self.adjacency.get_mut(&b).unwrap().insert(keep);
            self.adjacency.get_mut(&keep).unwrap().insert(b);
        }
        self.adjacency.get_mut(&keep).unwrap().remove(&absorb);

        // The kept node's summaries changed, so every incident edge is
        // touched: new version stamp, cached confidence invalidated.
        let touched: Vec<EdgeKey> = self.adjacency[&keep]
            .iter()
            .map(|&b| EdgeKey::new(keep, b))
            .collect();
        for key in touched {
            let v = self.next_version;
            self.next_version += 1;
            let e = self.edges.get_mut(&key).expect("incident edge exists");
            e.version = v;
            e.cached_confidence = None;
        }
        Ok(())
    }

    /// Structural equality: node set, voxel counts, channel summaries,
    /// adjacency, and edge face lengths/summaries. Flags, cached confidences
    /// and version stamps are scheduling state and are ignored.
    pub fn structural_eq(&self, other: &Self) -> bool {
        if self.channel_names != other.channel_names
            || self.nodes.len() != other.nodes.len()
            || self.edges.len() != other.edges.len()
            || self.adjacency != other.adjacency
        {
            return false;
        }
        for (id, node) in &self.nodes {
            match other.nodes.get(id) {
                Some(o) => {
                    if node.voxel_count != o.voxel_count || node.channel_hists != o.channel_hists {
                        return false;
                    }
                }
                None => return false,
            }
        }
        for (key, edge) in &self.edges {
            match other.edges.get(key) {
                Some(o) => {
                    if edge.face_length != o.face_length || edge.channel_hists != o.channel_hists {
                        return false;
                    }
                }
                None => return false,
            }
        }
        true
    }
}

/// Resolves a sequence of `(kept, absorbed)` merges into a final-root mapping
/// and applies it to a label volume.
pub fn relabel_volume(
    labels: &LabelVolume,
    merges: impl IntoIterator<Item = (RegionId, RegionId)>,
) -> LabelVolume {
    let mut parent: BTreeMap<RegionId, RegionId> = BTreeMap::new();
    for (kept, absorbed) in merges {
        parent.insert(absorbed, kept);
    }
    fn resolve(parent: &BTreeMap<RegionId, RegionId>, mut id: RegionId) -> RegionId {
        while let Some(&p) = parent.get(&id) {
            id = p;
        }
        id
    }
    let mut cache: BTreeMap<RegionId, RegionId> = BTreeMap::new();
    let mut out = labels.clone();
    for l in out.labels_mut() {
        let root = *cache.entry(*l).or_insert_with(|| resolve(&parent, *l));
        *l = root;
    }
    out
}
