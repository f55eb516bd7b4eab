//! Scratch diagnosis: which false merges does delayed commit that standard
//! avoids, and what did those bridges look like over time?

use std::collections::BTreeMap;

use aggloseg::*;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(19);
    let params = SynthParams {
        dims: vec![256, 256],
        n_cells: 24,
        mito_per_cell: (1, 3),
        mito_radius: (3.0, 6.0),
        boundary_blur_sigma: 1.0,
        noise_sigma: 0.05,
        seed,
    };
    let out = synth_generate(&params).unwrap();
    let overseg = watershed(&out.channels.to_field("boundary").unwrap(), 0.01).unwrap();
    let g0 = RegionGraph::build(&overseg, &out.channels).unwrap();
    let h = MeanBoundaryConfidence::new(&g0).unwrap();
    let gt = assign_gt_labels(&overseg, &out.cells).unwrap();

    let cfg = |policy, delta| AgglomConfig {
        delta,
        policy,
        lazy_updates: false,
    };

    // Track gt overlap of merged bodies to label merges as true/false.
    struct FalseMergeLog {
        overlaps: BTreeMap<RegionId, BTreeMap<u32, u64>>,
        false_merges: Vec<(RegionId, RegionId, f64, usize, u64, u64)>,
        sweep_of_step: Vec<usize>,
    }
    impl EngineHooks for FalseMergeLog {
        fn on_select(&mut self, _g: &RegionGraph, e: EdgeKey, conf: f64) {
            let la = aggloseg::training::dominant_gt(&self.overlaps[&e.lo()]);
            let lb = aggloseg::training::dominant_gt(&self.overlaps[&e.hi()]);
            if la != lb {
                let sa: u64 = self.overlaps[&e.lo()].values().sum();
                let sb: u64 = self.overlaps[&e.hi()].values().sum();
                self.false_merges.push((
                    e.lo(),
                    e.hi(),
                    conf,
                    self.sweep_of_step.len(),
                    sa,
                    sb,
                ));
            }
            self.sweep_of_step.push(0);
        }
        fn on_merge(&mut self, _g: &RegionGraph, kept: RegionId, absorbed: RegionId) {
            let m = self.overlaps.remove(&absorbed).unwrap();
            let k = self.overlaps.entry(kept).or_default();
            for (g, c) in m {
                *k.entry(g).or_insert(0) += c;
            }
        }
    }

    for (name, policy) in [("standard", Policy::Standard), ("delayed", Policy::Delayed)] {
        let mut hooks = FalseMergeLog {
            overlaps: gt.overlaps.clone(),
            false_merges: Vec::new(),
            sweep_of_step: Vec::new(),
        };
        let mut g = g0.clone();
        let trace = agglomerate_with(&mut g, &h, &cfg(policy, 0.2), &AllEdges, &mut hooks).unwrap();
        let seg = relabel_volume(&overseg, trace.merge_pairs().collect::<Vec<_>>());
        let vi = split_vi(&contingency(&seg, &out.cells, false).unwrap()).unwrap();
        let max_sweep = trace.entries.iter().map(|e| e.sweep).max().unwrap_or(1);
        println!(
            "{name}: merges {} false {} UE {:.4} OE {:.4} sweeps {max_sweep}",
            trace.len(),
            hooks.false_merges.len(),
            vi.under,
            vi.over
        );
        // Histogram of false-merge confidences and body sizes.
        let mut small = 0;
        let mut big = 0;
        for &(_, _, conf, _, sa, sb) in &hooks.false_merges {
            if sa.min(sb) > 200 {
                big += 1;
            } else {
                small += 1;
            }
            let _ = conf;
        }
        println!("  false merges: {small} small-body, {big} big-body");
        let confs: Vec<f64> = hooks.false_merges.iter().map(|f| f.2).collect();
        let lo = confs.iter().filter(|&&c| c < 0.1).count();
        let mid = confs.iter().filter(|&&c| (0.1..0.15).contains(&c)).count();
        let hi = confs.iter().filter(|&&c| c >= 0.15).count();
        println!("  false-merge conf: <0.1: {lo}, 0.1-0.15: {mid}, >=0.15: {hi}");
        let mut by_sweep: BTreeMap<usize, usize> = BTreeMap::new();
        for &(_, _, _, step, _, _) in &hooks.false_merges {
            *by_sweep.entry(trace.entries[step].sweep).or_insert(0) += 1;
        }
        println!("  false merges by sweep: {by_sweep:?}");
        let mut step_hist: BTreeMap<usize, usize> = BTreeMap::new();
        for &(_, _, _, step, _, _) in &hooks.false_merges {
            *step_hist.entry(step * 10 / trace.len().max(1)).or_insert(0) += 1;
        }
        println!("  false merges by run-decile: {step_hist:?}");
    }
}
