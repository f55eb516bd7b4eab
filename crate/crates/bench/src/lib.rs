//! Shared fixtures for the engine benchmarks.

use aggloseg::rng::Xoshiro256StarStar;
use aggloseg::{EdgeKey, RegionGraph, RegionId};
use rand::{Rng, SeedableRng};

/// Random connected region graph: spanning tree plus chords.
pub fn random_graph(seed: u64, n: u32) -> RegionGraph {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
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

/// Deterministic confidence table over current edge ids.
pub fn table_h(seed: u64) -> impl Fn(&RegionGraph, EdgeKey) -> f64 {
    move |_: &RegionGraph, e: EdgeKey| {
        let mut z = seed
            ^ (e.lo() as u64).wrapping_mul(0x9e3779b97f4a7c15)
            ^ (e.hi() as u64).wrapping_mul(0xd1b54a32d192ed03);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
}
