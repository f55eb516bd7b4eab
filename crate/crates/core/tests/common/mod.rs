//! Shared oracles for integration tests: reference interpreters of the two
//! agglomeration policies, coded straight off their definitions with plain
//! maps and linear scans instead of the engine's priority queue, version
//! stamps or cached confidences.

use std::collections::{BTreeMap, BTreeSet};

use aggloseg::{EdgeKey, RegionGraph, RegionId};

pub type Pair = (u32, u32);

fn pair(a: u32, b: u32) -> Pair {
    (a.min(b), a.max(b))
}

/// Minimal mutable graph mirror: nodes and face lengths only.
#[derive(Debug, Clone)]
pub struct RefGraph {
    pub nodes: BTreeSet<u32>,
    pub edges: BTreeMap<Pair, u64>,
}

impl RefGraph {
    pub fn from_region_graph(g: &RegionGraph) -> Self {
        Self {
            nodes: g.node_ids().collect(),
            edges: g
                .edges()
                .map(|(k, e)| ((k.lo(), k.hi()), e.face_length()))
                .collect(),
        }
    }

    fn neighbors(&self, id: u32) -> BTreeSet<u32> {
        self.edges
            .keys()
            .filter(|&&(a, b)| a == id || b == id)
            .map(|&(a, b)| if a == id { b } else { a })
            .collect()
    }

    /// Merge `absorb` into `keep` by brute-force re-keying.
    fn merge(&mut self, keep: u32, absorb: u32) {
        self.edges.remove(&pair(keep, absorb));
        let moved: Vec<(Pair, u64)> = self
            .edges
            .iter()
            .filter(|(&(a, b), _)| a == absorb || b == absorb)
            .map(|(&k, &v)| (k, v))
            .collect();
        for ((a, b), len) in moved {
            self.edges.remove(&(a, b));
            let other = if a == absorb { b } else { a };
            *self.edges.entry(pair(keep, other)).or_insert(0) += len;
        }
        self.nodes.remove(&absorb);
    }
}

/// One merge step of a reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct RefStep {
    pub kept: u32,
    pub absorbed: u32,
    pub confidence: f64,
    pub sweep: usize,
}

/// Reference interpreter of standard agglomeration: repeatedly pick the
/// globally cheapest edge by current confidence (ties toward the smaller
/// pair) and merge while the minimum stays at or below delta.
pub fn reference_standard(
    g0: &RefGraph,
    h: &dyn Fn(u32, u32) -> f64,
    delta: f64,
) -> Vec<RefStep> {
    let mut g = g0.clone();
    let mut trace = Vec::new();
    loop {
        let candidate = g
            .edges
            .keys()
            .map(|&(a, b)| ((a, b), h(a, b)))
            .min_by(|(ka, va), (kb, vb)| va.total_cmp(vb).then(ka.cmp(kb)));
        let Some(((a, b), c)) = candidate else { break };
        if c > delta {
            break;
        }
        trace.push(RefStep {
            kept: a,
            absorbed: b,
            confidence: c,
            sweep: 1,
        });
        g.merge(a, b);
    }
    trace
}

/// Reference interpreter of delayed agglomeration. Every edge starts ACTIVE.
/// The cheapest in-range ACTIVE edge merges; the boundaries the absorbed
/// region carried are re-flagged ACTIVE only if their confidence strictly
/// increased over the smallest pre-merge confidence of the edges they
/// replace (never-eligible edges enter ACTIVE), DELAY otherwise. Surviving
/// edges keep their flags. When no ACTIVE edge is in range, DELAY edges at
/// or below delta reactivate and the next sweep begins.
pub fn reference_delayed(g0: &RefGraph, h: &dyn Fn(u32, u32) -> f64, delta: f64) -> Vec<RefStep> {
    #[derive(PartialEq, Clone, Copy)]
    enum Flag {
        Active,
        Delay,
    }
    let mut g = g0.clone();
    let mut flags: BTreeMap<Pair, Flag> = g.edges.keys().map(|&k| (k, Flag::Active)).collect();
    let mut trace = Vec::new();
    let mut sweep = 1;
    loop {
        let candidate = g
            .edges
            .keys()
            .filter(|k| flags[*k] == Flag::Active)
            .map(|&(a, b)| ((a, b), h(a, b)))
            .filter(|&(_, v)| v <= delta)
            .min_by(|(ka, va), (kb, vb)| va.total_cmp(vb).then(ka.cmp(kb)));
        let Some(((a, b), c)) = candidate else {
            let reactivate: Vec<Pair> = g
                .edges
                .keys()
                .filter(|k| flags[*k] == Flag::Delay && h(k.0, k.1) <= delta)
                .copied()
                .collect();
            if reactivate.is_empty() {
                break;
            }
            for k in reactivate {
                flags.insert(k, Flag::Active);
            }
            sweep += 1;
            continue;
        };
        trace.push(RefStep {
            kept: a,
            absorbed: b,
            confidence: c,
            sweep,
        });
        // Pre-merge baselines for the absorbed side only.
        let absorbed_nbrs: BTreeSet<u32> = g
            .neighbors(b)
            .into_iter()
            .filter(|&n| n != a)
            .collect();
        let mut baselines: BTreeMap<u32, f64> = BTreeMap::new();
        for &n in &absorbed_nbrs {
            let mut prior = h(b, n);
            if g.edges.contains_key(&pair(a, n)) {
                prior = prior.min(h(a, n));
            }
            baselines.insert(n, prior);
        }
        g.merge(a, b);
        flags.retain(|k, _| g.edges.contains_key(k));
        for &n in &absorbed_nbrs {
            let k = pair(a, n);
            let new = h(k.0, k.1);
            flags.insert(
                k,
                if new > baselines[&n] {
                    Flag::Active
                } else {
                    Flag::Delay
                },
            );
        }
    }
    trace
}

/// Deterministic pseudo-random confidence table over current edge ids; the
/// same mixing the engine-side closure uses.
pub fn confidence_table(seed: u64) -> impl Fn(u32, u32) -> f64 {
    move |a: u32, b: u32| {
        let (lo, hi) = (a.min(b) as u64, a.max(b) as u64);
        let mut z = seed
            ^ lo.wrapping_mul(0x9e3779b97f4a7c15)
            ^ hi.wrapping_mul(0xd1b54a32d192ed03);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Engine-side adapter of [`confidence_table`].
pub fn engine_table(seed: u64) -> impl Fn(&RegionGraph, EdgeKey) -> f64 {
    let table = confidence_table(seed);
    move |_: &RegionGraph, e: EdgeKey| table(e.lo(), e.hi())
}

/// Random connected graph with `n` regions: a spanning tree plus chords.
pub fn random_graph(seed: u64, n: u32) -> RegionGraph {
    use rand::{Rng, SeedableRng};
    let mut rng = aggloseg::rng::Xoshiro256StarStar::seed_from_u64(seed);
    let nodes: Vec<(RegionId, u64)> = (1..=n).map(|i| (i, 1 + (i as u64 % 7))).collect();
    let mut edges: Vec<(u32, u32, u64)> = Vec::new();
    for i in 2..=n {
        let j = rng.random_range(1..i);
        edges.push((j, i, 1 + rng.random_range(0..5)));
    }
    for _ in 0..(n as usize * 2) {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        if a != b
            && !edges
                .iter()
                .any(|&(x, y, _)| (x.min(y), x.max(y)) == (a.min(b), a.max(b)))
        {
            edges.push((a, b, 1 + rng.random_range(0..5)));
        }
    }
    RegionGraph::from_edges(&nodes, &edges)
}
