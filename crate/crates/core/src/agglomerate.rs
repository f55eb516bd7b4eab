//! Agglomerative clustering engines.
//!
//! Two policies over a shared priority-queue core:
//!
//! - **Standard**: repeatedly merge the cheapest edge, recomputing the
//!   confidence of every edge incident to the merged node after each merge,
//!   until the cheapest live edge exceeds the threshold.
//! - **Delayed**: after a merge, the boundaries the absorbed region brought
//!   into the merged body are re-flagged: ACTIVE if their recomputed
//!   confidence strictly increased over the pre-merge value, DELAY
//!   otherwise. DELAY edges leave the working set W; only when W offers no
//!   candidate at or below the threshold are in-range DELAY edges
//!   reactivated, starting the next sweep. Postponing decisions on newly
//!   formed boundaries keeps mistakes made on small superpixels from
//!   cascading into the larger bodies they form. Edges on the surviving
//!   side keep their flag and queue position; their keys are corrected to
//!   the current confidence when they surface.
//!
//! The delayed policy additionally supports lazy queue maintenance: a merge
//! leaves surviving-side confidences unevaluated instead of refreshing their
//! queue entries. The stale key is corrected (and the confidence computed)
//! only when the entry surfaces or a reactivation scan needs it, so the
//! merge sequence is identical to the eager queue discipline while the
//! number of heap pushes can only drop.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::hist::MomentHistogram;
use crate::rag::{EdgeFlag, EdgeKey, RegionGraph, RegionId};
use crate::Result;

/// Clustering policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Standard,
    Delayed,
}

/// Engine configuration. Ties between equal confidences are always broken
/// toward the lowest edge id, and the kept region of a merge is the lower id.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AgglomConfig {
    /// Stopping threshold: only edges with confidence <= delta merge.
    pub delta: f64,
    pub policy: Policy,
    /// Defer queue updates for delayed agglomeration (same trace, fewer
    /// pushes).
    pub lazy_updates: bool,
}

impl Default for AgglomConfig {
    fn default() -> Self {
        Self {
            delta: 0.2,
            policy: Policy::Delayed,
            lazy_updates: false,
        }
    }
}

impl AgglomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta.is_finite() && (0.0..=1.0).contains(&self.delta) {
            Ok(())
        } else {
            Err(Error::InvalidThreshold(self.delta))
        }
    }
}

/// Boundary confidence function h. Must be a pure function of the current
/// graph state, safe to re-evaluate at any time.
pub trait Confidence {
    fn confidence(&self, g: &RegionGraph, e: EdgeKey) -> Result<f64>;
}

/// Plain closures returning a bare value act as confidence functions; used
/// for tabulated confidences in tests and benchmarks.
impl<F: Fn(&RegionGraph, EdgeKey) -> f64> Confidence for F {
    fn confidence(&self, g: &RegionGraph, e: EdgeKey) -> Result<f64> {
        Ok(self(g, e))
    }
}

/// Mean of an edge's boundary-channel samples.
pub struct MeanBoundaryConfidence {
    channel: usize,
}

impl MeanBoundaryConfidence {
    pub fn new(g: &RegionGraph) -> Result<Self> {
        Ok(Self {
            channel: g.channel_index("boundary")?,
        })
    }
}

impl Confidence for MeanBoundaryConfidence {
    fn confidence(&self, g: &RegionGraph, e: EdgeKey) -> Result<f64> {
        let edge = g.edge(e).ok_or(Error::MissingEdge(e.lo(), e.hi()))?;
        edge.channel_hists()[self.channel].mean()
    }
}

/// Forest prediction over the edge's feature vector.
pub struct ForestConfidence<'a> {
    forest: &'a crate::predictor::Forest,
}

impl<'a> ForestConfidence<'a> {
    pub fn new(forest: &'a crate::predictor::Forest) -> Self {
        Self { forest }
    }
}

impl Confidence for ForestConfidence<'_> {
    fn confidence(&self, g: &RegionGraph, e: EdgeKey) -> Result<f64> {
        self.forest.predict(&crate::features::edge_features(g, e)?)
    }
}

/// Restricts which edges may enter the working set. Flags are still
/// maintained on ineligible edges so they can join later phases.
pub trait CandidateFilter {
    fn eligible(&self, g: &RegionGraph, e: EdgeKey) -> bool;
}

/// Every edge is a candidate.
pub struct AllEdges;

impl CandidateFilter for AllEdges {
    fn eligible(&self, _: &RegionGraph, _: EdgeKey) -> bool {
        true
    }
}

/// Observation points inside an engine run.
pub trait EngineHooks {
    /// Called when an edge is selected for merging, before the merge, with
    /// the confidence it was selected at.
    fn on_select(&mut self, _g: &RegionGraph, _e: EdgeKey, _confidence: f64) {}
    /// Called right after a merge has been applied.
    fn on_merge(&mut self, _g: &RegionGraph, _kept: RegionId, _absorbed: RegionId) {}
}

/// No-op hooks.
pub struct NoHooks;

impl EngineHooks for NoHooks {}

/// Queue instrumentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub pushes: u64,
    pub pops: u64,
    pub recomputations: u64,
}

/// One merge in a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub step: usize,
    pub kept: RegionId,
    pub absorbed: RegionId,
    pub confidence: f64,
    pub sweep: usize,
}

/// Ordered record of the merges an engine performed, plus counters.
#[derive(Debug, Clone, Default)]
pub struct MergeTrace {
    pub entries: Vec<TraceEntry>,
    pub counters: Counters,
}

impl MergeTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (kept, absorbed) pairs in merge order, for relabeling.
    pub fn merge_pairs(&self) -> impl Iterator<Item = (RegionId, RegionId)> + '_ {
        self.entries.iter().map(|e| (e.kept, e.absorbed))
    }

    /// Merge sequence without counters, for trace-equality comparisons.
    pub fn sequence(&self) -> Vec<(RegionId, RegionId, f64, usize)> {
        self.entries
            .iter()
            .map(|e| (e.kept, e.absorbed, e.confidence, e.sweep))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,kept,absorbed,confidence,sweep")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.step, e.kept, e.absorbed, e.confidence, e.sweep
            )?;
        }
        Ok(())
    }

    pub fn counters_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.counters)?)
    }
}

#[derive(PartialEq)]
struct QueueEntry {
    conf: f64,
    key: EdgeKey,
    gen: u64,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.conf
            .total_cmp(&other.conf)
            .then(self.key.cmp(&other.key))
            .then(self.gen.cmp(&other.gen))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct Engine<'a, H: Confidence + ?Sized, F: CandidateFilter + ?Sized> {
    h: &'a H,
    filter: &'a F,
    delta: f64,
    heap: BinaryHeap<Reverse<QueueEntry>>,
    /// The one live queue entry per edge, as (entry generation, entry key).
    /// An entry not matching this map is stale and discarded on pop.
    designated: BTreeMap<EdgeKey, (u64, f64)>,
    next_gen: u64,
    lazy: bool,
    counters: Counters,
}

impl<'a, H: Confidence + ?Sized, F: CandidateFilter + ?Sized> Engine<'a, H, F> {
    fn new(h: &'a H, filter: &'a F, delta: f64, lazy: bool) -> Self {
        Self {
            h,
            filter,
            delta,
            heap: BinaryHeap::new(),
            designated: BTreeMap::new(),
            next_gen: 0,
            lazy,
            counters: Counters::default(),
        }
    }

    fn eval(&mut self, g: &RegionGraph, e: EdgeKey) -> Result<f64> {
        let conf = self.h.confidence(g, e)?;
        if !conf.is_finite() || !(0.0..=1.0).contains(&conf) {
            return Err(Error::InvalidConfidence(conf));
        }
        self.counters.recomputations += 1;
        Ok(conf)
    }

    /// Current confidence of an eligible edge. Caches are cleared whenever a
    /// merge touches an endpoint, so a present cache is always current.
    fn ensure_fresh(&mut self, g: &mut RegionGraph, e: EdgeKey) -> Result<f64> {
        if let Some(c) = g.edge(e).and_then(|edge| edge.cached_confidence()) {
            return Ok(c);
        }
        let conf = self.eval(g, e)?;
        g.edge_mut(e).expect("live edge").cached_confidence = Some(conf);
        Ok(conf)
    }

    fn push_designated(&mut self, e: EdgeKey, conf: f64) {
        let gen = self.next_gen;
        self.next_gen += 1;
        self.heap.push(Reverse(QueueEntry { conf, key: e, gen }));
        self.counters.pushes += 1;
        self.designated.insert(e, (gen, conf));
    }

    fn undesignate(&mut self, e: EdgeKey) {
        self.designated.remove(&e);
    }

    fn entry_valid(&self, g: &RegionGraph, entry: &QueueEntry) -> bool {
        g.edge(entry.key).is_some()
            && self.designated.get(&entry.key) == Some(&(entry.gen, entry.conf))
    }

    /// Discards stale entries and re-keys entries whose confidence drifted
    /// since they were queued, until the top of the heap carries the current
    /// confidence of a live working-set edge. Returns it without popping.
    fn settle(&mut self, g: &mut RegionGraph) -> Result<Option<(EdgeKey, f64)>> {
        loop {
            let Some(top) = self.heap.peek() else {
                return Ok(None);
            };
            let (key, conf) = (top.0.key, top.0.conf);
            if !self.entry_valid(g, &top.0) {
                self.heap.pop();
                self.counters.pops += 1;
                continue;
            }
            let current = self.ensure_fresh(g, key)?;
            if current != conf {
                // Deferred key correction: the edge changed while queued.
                self.heap.pop();
                self.counters.pops += 1;
                self.push_designated(key, current);
                continue;
            }
            return Ok(Some((key, conf)));
        }
    }

    fn pop_candidate(&mut self, e: EdgeKey) {
        self.heap.pop();
        self.counters.pops += 1;
        self.undesignate(e);
    }
}

fn set_edge_state(g: &mut RegionGraph, e: EdgeKey, flag: EdgeFlag, cached: Option<f64>) {
    let edge = g.edge_mut(e).expect("live edge");
    edge.flag = flag;
    edge.cached_confidence = cached;
}

/// Runs the configured engine over `g`, mutating it in place, and returns the
/// merge trace. `filter` limits the candidate set; `hooks` observe selections
/// and merges.
pub fn agglomerate_with<H: Confidence + ?Sized, F: CandidateFilter + ?Sized>(
    g: &mut RegionGraph,
    h: &H,
    cfg: &AgglomConfig,
    filter: &F,
    hooks: &mut dyn EngineHooks,
) -> Result<MergeTrace> {
    cfg.validate()?;
    match cfg.policy {
        Policy::Standard => run_standard(g, h, cfg, filter, hooks),
        Policy::Delayed => run_delayed(g, h, cfg, filter, hooks),
    }
}

/// Standard agglomeration with the default candidate filter and no hooks.
pub fn agglomerate_standard<H: Confidence + ?Sized>(
    g: &mut RegionGraph,
    h: &H,
    cfg: &AgglomConfig,
) -> Result<MergeTrace> {
    let cfg = AgglomConfig {
        policy: Policy::Standard,
        ..*cfg
    };
    agglomerate_with(g, h, &cfg, &AllEdges, &mut NoHooks)
}

/// Delayed agglomeration with the default candidate filter and no hooks.
pub fn agglomerate_delayed<H: Confidence + ?Sized>(
    g: &mut RegionGraph,
    h: &H,
    cfg: &AgglomConfig,
) -> Result<MergeTrace> {
    let cfg = AgglomConfig {
        policy: Policy::Delayed,
        ..*cfg
    };
    agglomerate_with(g, h, &cfg, &AllEdges, &mut NoHooks)
}

fn run_standard<H: Confidence + ?Sized, F: CandidateFilter + ?Sized>(
    g: &mut RegionGraph,
    h: &H,
    cfg: &AgglomConfig,
    filter: &F,
    hooks: &mut dyn EngineHooks,
) -> Result<MergeTrace> {
    let mut engine = Engine::new(h, filter, cfg.delta, false);
    let keys: Vec<EdgeKey> = g.edge_keys().collect();
    for e in keys {
        if engine.filter.eligible(g, e) {
            let conf = engine.eval(g, e)?;
            set_edge_state(g, e, EdgeFlag::Active, Some(conf));
            engine.push_designated(e, conf);
        }
    }

    let mut trace = MergeTrace::default();
    while let Some((e, conf)) = engine.settle(g)? {
        if conf > engine.delta {
            break;
        }
        engine.pop_candidate(e);
        hooks.on_select(g, e, conf);
        let (keep, absorb) = (e.lo(), e.hi());
        trace.entries.push(TraceEntry {
            step: trace.entries.len(),
            kept: keep,
            absorbed: absorb,
            confidence: conf,
            sweep: 1,
        });
        g.merge_regions(keep, absorb)?;
        hooks.on_merge(g, keep, absorb);
        // Refresh every edge incident to the merged node.
        let nbrs: Vec<RegionId> = g.neighbors(keep)?.iter().copied().collect();
        for b in nbrs {
            let e2 = EdgeKey::new(keep, b);
            if engine.filter.eligible(g, e2) {
                let c2 = engine.eval(g, e2)?;
                set_edge_state(g, e2, EdgeFlag::Active, Some(c2));
                engine.push_designated(e2, c2);
            } else {
                set_edge_state(g, e2, EdgeFlag::Delay, None);
                engine.undesignate(e2);
            }
        }
    }
    trace.counters = engine.counters;
    Ok(trace)
}

fn run_delayed<H: Confidence + ?Sized, F: CandidateFilter + ?Sized>(
    g: &mut RegionGraph,
    h: &H,
    cfg: &AgglomConfig,
    filter: &F,
    hooks: &mut dyn EngineHooks,
) -> Result<MergeTrace> {
    let mut engine = Engine::new(h, filter, cfg.delta, cfg.lazy_updates);

    // Every edge starts ACTIVE; only eligible edges are evaluated and queued.
    let keys: Vec<EdgeKey> = g.edge_keys().collect();
    for e in &keys {
        set_edge_state(g, *e, EdgeFlag::Active, None);
    }
    for e in keys {
        if engine.filter.eligible(g, e) {
            let conf = engine.eval(g, e)?;
            set_edge_state(g, e, EdgeFlag::Active, Some(conf));
            engine.push_designated(e, conf);
        }
    }

    let mut trace = MergeTrace::default();
    let mut sweep = 1usize;
    loop {
        let candidate = engine.settle(g)?.filter(|&(_, conf)| conf <= engine.delta);
        let Some((e, conf)) = candidate else {
            // W holds no candidate within range: reactivate DELAY edges that
            // are, or stop if there are none.
            let delayed: Vec<EdgeKey> = g
                .edges()
                .filter(|(key, edge)| {
                    edge.flag() == EdgeFlag::Delay && engine.filter.eligible(g, *key)
                })
                .map(|(key, _)| key)
                .collect();
            let mut reactivated = false;
            for key in delayed {
                let current = engine.ensure_fresh(g, key)?;
                if current <= engine.delta {
                    set_edge_state(g, key, EdgeFlag::Active, Some(current));
                    engine.push_designated(key, current);
                    reactivated = true;
                }
            }
            if !reactivated {
                break;
            }
            sweep += 1;
            continue;
        };

        engine.pop_candidate(e);
        hooks.on_select(g, e, conf);
        let (keep, absorb) = (e.lo(), e.hi());
        trace.entries.push(TraceEntry {
            step: trace.entries.len(),
            kept: keep,
            absorbed: absorb,
            confidence: conf,
            sweep,
        });

        // The absorbed side's boundaries are about to become boundaries of
        // the merged body; record their pre-merge confidences as baselines
        // (the smaller of the two where a parallel edge unifies). Edges that
        // were not eligible carry no baseline.
        let absorb_nbrs: Vec<RegionId> = g
            .neighbors(absorb)?
            .iter()
            .copied()
            .filter(|&b| b != keep)
            .collect();
        let keep_nbrs: Vec<RegionId> = g
            .neighbors(keep)?
            .iter()
            .copied()
            .filter(|&b| b != absorb)
            .collect();
        let mut baselines: BTreeMap<RegionId, Option<f64>> = BTreeMap::new();
        for &b in &absorb_nbrs {
            let mut prior: Option<f64> = None;
            for end in [absorb, keep] {
                let key = EdgeKey::new(end, b);
                if g.edge(key).is_some() && engine.filter.eligible(g, key) {
                    let c = engine.ensure_fresh(g, key)?;
                    prior = Some(match prior {
                        Some(p) => p.min(c),
                        None => c,
                    });
                }
            }
            baselines.insert(b, prior);
        }
        // Surviving-side eligibility before the merge, to catch edges the
        // merge makes eligible (or ineligible) through the type change.
        let keep_pre_elig: BTreeMap<RegionId, bool> = keep_nbrs
            .iter()
            .map(|&b| (b, engine.filter.eligible(g, EdgeKey::new(keep, b))))
            .collect();
        let absorbed_set: std::collections::BTreeSet<RegionId> =
            absorb_nbrs.iter().copied().collect();

        g.merge_regions(keep, absorb)?;
        hooks.on_merge(g, keep, absorb);

        // Newly formed boundaries: flag by the strict-increase rule.
        for &b in &absorb_nbrs {
            let e2 = EdgeKey::new(keep, b);
            engine.undesignate(e2);
            if !engine.filter.eligible(g, e2) {
                set_edge_state(g, e2, EdgeFlag::Delay, None);
                continue;
            }
            let new_conf = engine.eval(g, e2)?;
            let active = match baselines[&b] {
                Some(prior) => new_conf > prior,
                // First time this edge is eligible: enters W like an
                // initial edge.
                None => true,
            };
            if active {
                set_edge_state(g, e2, EdgeFlag::Active, Some(new_conf));
                engine.push_designated(e2, new_conf);
            } else {
                set_edge_state(g, e2, EdgeFlag::Delay, Some(new_conf));
            }
        }

        // Surviving-side boundaries keep their flag and queue position; the
        // merge invalidated their caches. Eager mode refreshes them now,
        // lazy mode lets settle() or the next reactivation scan do it.
        for &b in &keep_nbrs {
            if absorbed_set.contains(&b) {
                continue;
            }
            let e2 = EdgeKey::new(keep, b);
            let eligible_now = engine.filter.eligible(g, e2);
            match (keep_pre_elig[&b], eligible_now) {
                (_, false) => {
                    set_edge_state(g, e2, EdgeFlag::Delay, None);
                    engine.undesignate(e2);
                }
                (false, true) => {
                    // Made eligible by the merged node's type change.
                    let c = engine.eval(g, e2)?;
                    set_edge_state(g, e2, EdgeFlag::Active, Some(c));
                    engine.push_designated(e2, c);
                }
                (true, true) => {
                    if !engine.lazy {
                        let c = engine.eval(g, e2)?;
                        let flag = g.edge(e2).expect("live edge").flag();
                        set_edge_state(g, e2, flag, Some(c));
                        if flag == EdgeFlag::Active {
                            engine.push_designated(e2, c);
                        }
                    }
                }
            }
        }
    }
    trace.counters = engine.counters;
    Ok(trace)
}

/// Mean boundary-probability confidence of an edge; the classifier-free
/// estimator from the agglomeration literature.
pub fn mean_boundary_confidence(g: &RegionGraph, e: EdgeKey) -> Result<f64> {
    MeanBoundaryConfidence::new(g)?.confidence(g, e)
}

/// Pooled per-channel summaries: convenience for inspecting what an edge
/// looks like to the estimator.
pub fn edge_channel_means(g: &RegionGraph, e: EdgeKey) -> Result<Vec<f64>> {
    let edge = g.edge(e).ok_or(Error::MissingEdge(e.lo(), e.hi()))?;
    edge.channel_hists()
        .iter()
        .map(MomentHistogram::mean)
        .collect()
}
