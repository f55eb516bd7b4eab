//! Context-aware two-phase pipeline.
//!
//! Superpixels are partitioned into cytoplasm and mitochondria populations by
//! mean mitochondria probability. Phase 1 agglomerates cytoplasm-cytoplasm
//! edges under the boundary classifier. Phase 2 absorbs mitochondria into
//! cytoplasm bodies in descending overlap ratio: the confidence of a
//! mitochondria-cytoplasm edge is h_m = 1 - rho, where rho is the fraction of
//! the mitochondrion's total boundary shared with that cytoplasm neighbor.
//! Mitochondria-mitochondria edges are never candidates; once a mitochondrion
//! merges into a cytoplasm body the combined node is cytoplasm, so its former
//! mitochondria neighbors become eligible.

use serde::{Deserialize, Serialize};

use crate::agglomerate::{
    agglomerate_with, AgglomConfig, AllEdges, CandidateFilter, Confidence, EngineHooks,
    MergeTrace, NoHooks, Policy,
};
use crate::error::Error;
use crate::rag::{relabel_volume, EdgeKey, RegionGraph, RegionType};
use crate::volume::{LabelVolume, ProbabilityStack, PIPELINE_CHANNELS};
use crate::Result;

/// Thresholds of the two-phase scheme.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContextConfig {
    /// Mean mitochondria probability at or above which a region is tagged
    /// Mito.
    pub theta_mito: f64,
    /// Phase-1 stopping threshold for cytoplasm merging.
    pub delta_c: f64,
    /// Phase-2 stopping threshold: merge while 1 - rho <= delta_m.
    pub delta_m: f64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            theta_mito: 0.5,
            delta_c: 0.2,
            delta_m: 0.8,
        }
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<()> {
        for v in [self.theta_mito, self.delta_c, self.delta_m] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidThreshold(v));
            }
        }
        Ok(())
    }
}

/// Full pipeline configuration; the JSON document the CLI reads and echoes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub theta_mito: f64,
    pub delta_c: f64,
    pub delta_m: f64,
    pub policy: Policy,
    /// Run the two-phase context-aware scheme; otherwise a single phase over
    /// all edges.
    pub context: bool,
    pub lazy: bool,
    pub seed: u64,
    pub channels: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            theta_mito: 0.5,
            delta_c: 0.2,
            delta_m: 0.8,
            policy: Policy::Delayed,
            context: true,
            lazy: false,
            seed: 0,
            channels: PIPELINE_CHANNELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl PipelineConfig {
    pub fn context_config(&self) -> ContextConfig {
        ContextConfig {
            theta_mito: self.theta_mito,
            delta_c: self.delta_c,
            delta_m: self.delta_m,
        }
    }
}

/// Tags every region Mito whose mean mitochondria probability is at or above
/// `theta_mito`, Cyto otherwise.
pub fn partition_superpixels(g: &mut RegionGraph, theta_mito: f64) -> Result<()> {
    if !theta_mito.is_finite() || !(0.0..=1.0).contains(&theta_mito) {
        return Err(Error::InvalidThreshold(theta_mito));
    }
    let channel = g.channel_index("mitochondria")?;
    let ids: Vec<_> = g.node_ids().collect();
    for id in ids {
        let mean = g.node(id).unwrap().channel_hists()[channel].mean()?;
        let tag = if mean >= theta_mito {
            RegionType::Mito
        } else {
            RegionType::Cyto
        };
        g.set_region_type(id, tag)?;
    }
    Ok(())
}

/// The mitochondria endpoint of a mito-cyto edge, or an error if the edge is
/// not of that shape.
fn mito_endpoint(g: &RegionGraph, e: EdgeKey) -> Result<u32> {
    let ta = g
        .node(e.lo())
        .ok_or(Error::UnknownRegion(e.lo()))?
        .region_type();
    let tb = g
        .node(e.hi())
        .ok_or(Error::UnknownRegion(e.hi()))?
        .region_type();
    match (ta, tb) {
        (RegionType::Mito, RegionType::Cyto) => Ok(e.lo()),
        (RegionType::Cyto, RegionType::Mito) => Ok(e.hi()),
        _ => Err(Error::NotMitoCytoEdge(e.lo(), e.hi())),
    }
}

/// Fraction of the mitochondrion's total boundary shared with the cytoplasm
/// region across this edge. The denominator counts all of the
/// mitochondrion's faces, including mito-mito ones, from the current graph.
pub fn overlap_ratio(g: &RegionGraph, e: EdgeKey) -> Result<f64> {
    let mito = mito_endpoint(g, e)?;
    let edge = g.edge(e).ok_or(Error::MissingEdge(e.lo(), e.hi()))?;
    let total = g.incident_face_length(mito)?;
    Ok(edge.face_length() as f64 / total as f64)
}

/// Phase-2 confidence: h_m = 1 - rho, so the largest overlap merges first.
pub fn mito_confidence(g: &RegionGraph, e: EdgeKey) -> Result<f64> {
    Ok(1.0 - overlap_ratio(g, e)?)
}

/// Confidence function wrapper for the engine.
pub struct MitoOverlapConfidence;

impl Confidence for MitoOverlapConfidence {
    fn confidence(&self, g: &RegionGraph, e: EdgeKey) -> Result<f64> {
        mito_confidence(g, e)
    }
}

/// Candidates with both endpoints tagged Cyto (phase 1).
pub struct CytoCytoEdges;

impl CandidateFilter for CytoCytoEdges {
    fn eligible(&self, g: &RegionGraph, e: EdgeKey) -> bool {
        g.node(e.lo()).map(|n| n.region_type()) == Some(RegionType::Cyto)
            && g.node(e.hi()).map(|n| n.region_type()) == Some(RegionType::Cyto)
    }
}

/// Candidates with exactly one Mito endpoint (phase 2).
pub struct MitoCytoEdges;

impl CandidateFilter for MitoCytoEdges {
    fn eligible(&self, g: &RegionGraph, e: EdgeKey) -> bool {
        mito_endpoint(g, e).is_ok()
    }
}

/// Phase 2: delayed agglomeration restricted to mito-cyto edges under h_m.
pub fn agglomerate_mito(g: &mut RegionGraph, delta_m: f64, lazy: bool) -> Result<MergeTrace> {
    agglomerate_mito_with(g, delta_m, lazy, &mut NoHooks)
}

pub fn agglomerate_mito_with(
    g: &mut RegionGraph,
    delta_m: f64,
    lazy: bool,
    hooks: &mut dyn EngineHooks,
) -> Result<MergeTrace> {
    let cfg = AgglomConfig {
        delta: delta_m,
        policy: Policy::Delayed,
        lazy_updates: lazy,
    };
    agglomerate_with(g, &MitoOverlapConfidence, &cfg, &MitoCytoEdges, hooks)
}

/// Output of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub volume: LabelVolume,
    pub cyto_trace: MergeTrace,
    pub mito_trace: MergeTrace,
}

/// Runs the two-phase pipeline: build the graph, partition, agglomerate
/// cytoplasm under `h_c` up to `delta_c`, absorb mitochondria up to
/// `delta_m`, and relabel the volume.
pub fn run_context_pipeline<H: Confidence + ?Sized>(
    labels: &LabelVolume,
    probs: &ProbabilityStack,
    h_c: &H,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    cfg.context_config().validate()?;
    let mut g = RegionGraph::build(labels, probs)?;
    partition_superpixels(&mut g, cfg.theta_mito)?;
    let phase1_cfg = AgglomConfig {
        delta: cfg.delta_c,
        policy: cfg.policy,
        lazy_updates: cfg.lazy,
    };
    let cyto_trace = agglomerate_with(&mut g, h_c, &phase1_cfg, &CytoCytoEdges, &mut NoHooks)?;
    let mito_trace = agglomerate_mito(&mut g, cfg.delta_m, cfg.lazy)?;
    let merges: Vec<_> = cyto_trace
        .merge_pairs()
        .chain(mito_trace.merge_pairs())
        .collect();
    Ok(PipelineOutput {
        volume: relabel_volume(labels, merges),
        cyto_trace,
        mito_trace,
    })
}

/// Context-oblivious single phase over all edges; the baseline the two-phase
/// scheme is compared against.
pub fn run_single_phase<H: Confidence + ?Sized>(
    labels: &LabelVolume,
    probs: &ProbabilityStack,
    h: &H,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    cfg.context_config().validate()?;
    let mut g = RegionGraph::build(labels, probs)?;
    let agglom_cfg = AgglomConfig {
        delta: cfg.delta_c,
        policy: cfg.policy,
        lazy_updates: cfg.lazy,
    };
    let trace = agglomerate_with(&mut g, h, &agglom_cfg, &AllEdges, &mut NoHooks)?;
    let merges: Vec<_> = trace.merge_pairs().collect();
    Ok(PipelineOutput {
        volume: relabel_volume(labels, merges),
        cyto_trace: trace,
        mito_trace: MergeTrace::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rag::RegionId;
    use crate::volume::FieldVolume;

    /// Strip volume with explicit mito-channel values per region.
    fn typed_graph(mito_means: &[f64]) -> RegionGraph {
        let n = mito_means.len();
        let labels: Vec<u32> = (1..=n as u32).flat_map(|l| [l, l]).collect();
        let mito: Vec<f32> = mito_means.iter().flat_map(|&m| [m as f32; 2]).collect();
        let dims = vec![1, 2 * n];
        let labels = LabelVolume::new(dims.clone(), labels).unwrap();
        let mut stack = ProbabilityStack::new(dims.clone()).unwrap();
        stack
            .push_channel(
                "boundary",
                FieldVolume::new(dims.clone(), vec![0.5; 2 * n]).unwrap(),
            )
            .unwrap();
        stack
            .push_channel("mitochondria", FieldVolume::new(dims, mito).unwrap())
            .unwrap();
        RegionGraph::build(&labels, &stack).unwrap()
    }

    #[test]
    fn partition_thresholds() {
        let mut g = typed_graph(&[0.1, 0.6, 1.0]);
        partition_superpixels(&mut g, 0.0).unwrap();
        assert!(g
            .node_ids()
            .all(|id| g.node(id).unwrap().region_type() == RegionType::Mito));
        partition_superpixels(&mut g, 1.0).unwrap();
        let tags: Vec<_> = g
            .node_ids()
            .map(|id| g.node(id).unwrap().region_type())
            .collect();
        assert_eq!(
            tags,
            vec![RegionType::Cyto, RegionType::Cyto, RegionType::Mito]
        );
        partition_superpixels(&mut g, 0.5).unwrap();
        let tags: Vec<_> = g
            .node_ids()
            .map(|id| g.node(id).unwrap().region_type())
            .collect();
        assert_eq!(
            tags,
            vec![RegionType::Cyto, RegionType::Mito, RegionType::Mito]
        );
        assert!(partition_superpixels(&mut g, 1.5).is_err());
    }

    /// Star graph: one mito region (id 9) with cytoplasm neighbors and given
    /// face lengths.
    fn star_with_mito(faces: &[(RegionId, u64)]) -> RegionGraph {
        let mut nodes = vec![(9u32, 4u64)];
        let mut edges = Vec::new();
        for &(id, len) in faces {
            nodes.push((id, 10));
            edges.push((9, id, len));
        }
        let mut g = RegionGraph::from_edges(&nodes, &edges);
        g.set_region_type(9, RegionType::Mito).unwrap();
        g
    }

    #[test]
    fn overlap_ratio_arithmetic() {
        let g = star_with_mito(&[(1, 8), (2, 2)]);
        assert_eq!(overlap_ratio(&g, EdgeKey::new(9, 1)).unwrap(), 0.8);
        assert_eq!(overlap_ratio(&g, EdgeKey::new(9, 2)).unwrap(), 0.2);
        assert!((mito_confidence(&g, EdgeKey::new(9, 1)).unwrap() - 0.2).abs() < 1e-15);
        // One cytoplasm neighbor only: rho = 1, h_m = 0.
        let g1 = star_with_mito(&[(1, 5)]);
        assert_eq!(overlap_ratio(&g1, EdgeKey::new(9, 1)).unwrap(), 1.0);
        assert_eq!(mito_confidence(&g1, EdgeKey::new(9, 1)).unwrap(), 0.0);
    }

    #[test]
    fn overlap_ratio_rejects_wrong_types() {
        let g = star_with_mito(&[(1, 8), (2, 2)]);
        // Cyto-cyto edge does not exist here, but a mito-mito pair can be
        // simulated by retagging.
        let mut g2 = g.clone();
        g2.set_region_type(1, RegionType::Mito).unwrap();
        assert!(matches!(
            overlap_ratio(&g2, EdgeKey::new(9, 1)),
            Err(Error::NotMitoCytoEdge(1, 9))
        ));
    }

    #[test]
    fn rho_sums_to_one_over_incident_edges() {
        // In integers: the per-edge numerators sum to the denominator.
        let g = star_with_mito(&[(1, 3), (2, 5), (3, 7)]);
        let total = g.incident_face_length(9).unwrap();
        let sum: u64 = g
            .neighbors(9)
            .unwrap()
            .iter()
            .map(|&b| g.edge(EdgeKey::new(9, b)).unwrap().face_length())
            .sum();
        assert_eq!(sum, total);
    }

    #[test]
    fn mito_chain_absorbs_in_order() {
        // m2 (id 12) touches cytoplasm only via m1 (id 11); c = 1.
        let mut g = RegionGraph::from_edges(
            &[(1, 20), (11, 4), (12, 4)],
            &[(1, 11, 6), (11, 12, 4)],
        );
        g.set_region_type(11, RegionType::Mito).unwrap();
        g.set_region_type(12, RegionType::Mito).unwrap();
        let trace = agglomerate_mito(&mut g, 0.8, false).unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(
            (trace.entries[0].kept, trace.entries[0].absorbed),
            (1, 11)
        );
        assert_eq!(
            (trace.entries[1].kept, trace.entries[1].absorbed),
            (1, 12)
        );
        assert!(trace.entries[0].step < trace.entries[1].step);
        // m2 was fully enclosed after m1 merged: rho = 1, h_m = 0.
        assert_eq!(trace.entries[1].confidence, 0.0);
        assert_eq!(g.num_nodes(), 1);
        assert_eq!(g.node(1).unwrap().region_type(), RegionType::Cyto);
    }

    #[test]
    fn no_mito_mito_merges_and_threshold_respected() {
        // Two mitochondria sharing a long face; delta_m = 0.2 only absorbs
        // overlaps of at least 0.8.
        let mut g = RegionGraph::from_edges(
            &[(1, 20), (2, 20), (11, 4), (12, 4)],
            &[(1, 11, 9), (1, 12, 1), (2, 12, 1), (11, 12, 8), (1, 2, 5)],
        );
        g.set_region_type(11, RegionType::Mito).unwrap();
        g.set_region_type(12, RegionType::Mito).unwrap();
        // rho(11->1) = 9/17; rho(12->1) = 1/10; rho(12->2) = 1/10.
        let trace = agglomerate_mito(&mut g, 0.2, false).unwrap();
        assert!(trace.is_empty());
        // At delta_m = 0.8, 11 merges into 1 (rho 9/17 > 0.2 ... h_m = 8/17
        // <= 0.8), after which 12 gains a large face to the merged body.
        let trace = agglomerate_mito(&mut g, 0.8, false).unwrap();
        for e in &trace.entries {
            // Kept is the lower id; id 1 and 2 are cytoplasm bodies here, so
            // no merge may join 11 and 12 directly.
            assert!(
                !(e.kept == 11 && e.absorbed == 12),
                "mito-mito merge in trace"
            );
        }
        assert_eq!(trace.len(), 2);
    }

    /// Hooks asserting each selection is the maximum-overlap eligible ACTIVE
    /// candidate at its moment.
    struct GreedyCheck {
        violations: usize,
    }

    impl EngineHooks for GreedyCheck {
        fn on_select(&mut self, g: &RegionGraph, e: EdgeKey, conf: f64) {
            for (key, edge) in g.edges() {
                if key != e
                    && MitoCytoEdges.eligible(g, key)
                    && edge.flag() == crate::rag::EdgeFlag::Active
                    && edge.cached_confidence().is_some()
                {
                    let other = mito_confidence(g, key).unwrap();
                    if other < conf - 1e-12 {
                        self.violations += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn selection_is_greedy_max_overlap() {
        let mut g = RegionGraph::from_edges(
            &[(1, 30), (2, 30), (11, 4), (12, 4), (13, 4)],
            &[
                (1, 11, 6),
                (2, 11, 2),
                (1, 12, 3),
                (2, 12, 5),
                (11, 13, 3),
                (2, 13, 1),
                (1, 2, 7),
            ],
        );
        for m in [11, 12, 13] {
            g.set_region_type(m, RegionType::Mito).unwrap();
        }
        let mut hooks = GreedyCheck { violations: 0 };
        let trace = agglomerate_mito_with(&mut g, 1.0, false, &mut hooks).unwrap();
        assert_eq!(hooks.violations, 0);
        assert_eq!(trace.len(), 3);
        // Full absorption at delta_m = 1: no mito node with a cyto neighbor
        // remains.
        for id in g.node_ids() {
            if g.node(id).unwrap().region_type() == RegionType::Mito {
                let has_cyto_neighbor = g.neighbors(id).unwrap().iter().any(|&b| {
                    g.node(b).unwrap().region_type() == RegionType::Cyto
                });
                assert!(!has_cyto_neighbor);
            }
        }
    }

    #[test]
    fn pipeline_without_mito_matches_plain_delayed() {
        use crate::synth::{synth_generate, SynthParams};
        use crate::watershed::watershed;
        let params = SynthParams {
            dims: vec![32, 32],
            n_cells: 3,
            mito_per_cell: (0, 0),
            noise_sigma: 0.02,
            ..SynthParams::default()
        };
        let out = synth_generate(&params).unwrap();
        let overseg = watershed(&out.channels.to_field("boundary").unwrap(), 0.15).unwrap();
        let h = |g: &RegionGraph, e: EdgeKey| {
            crate::agglomerate::mean_boundary_confidence(g, e).unwrap()
        };
        let cfg = PipelineConfig::default();
        let two_phase = run_context_pipeline(&overseg, &out.channels, &h, &cfg).unwrap();
        assert!(two_phase.mito_trace.is_empty());
        let single = run_single_phase(&overseg, &out.channels, &h, &cfg).unwrap();
        assert_eq!(two_phase.volume, single.volume);
    }
}
