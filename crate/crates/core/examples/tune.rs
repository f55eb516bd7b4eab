//! Scratch harness for choosing acceptance-suite parameters. Not part of the
//! test suite.

use aggloseg::*;

fn vi_of(seg: &LabelVolume, gt: &LabelVolume) -> SplitVi {
    split_vi(&contingency(seg, gt, false).unwrap()).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("c5");

    if mode == "c5" {
        // Criterion 5 exploration: standard vs delayed, mean-boundary h, delta 0.2.
        let mut wins = 0;
        let mut ties = 0;
        let mut sum_std = 0.0;
        let mut sum_del = 0.0;
        for seed in 0..20u64 {
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
            let overseg =
                watershed(&out.channels.to_field("boundary").unwrap(), 0.02).unwrap();
            let g0 = RegionGraph::build(&overseg, &out.channels).unwrap();
            let h = MeanBoundaryConfidence::new(&g0).unwrap();

            let mut gs = g0.clone();
            let ts = agglomerate_standard(
                &mut gs,
                &h,
                &AgglomConfig {
                    delta: 0.2,
                    policy: Policy::Standard,
                    lazy_updates: false,
                },
            )
            .unwrap();
            let seg_s = relabel_volume(&overseg, ts.merge_pairs().collect::<Vec<_>>());
            let vi_s = vi_of(&seg_s, &out.cells);

            let mut gd = g0.clone();
            let td = agglomerate_delayed(
                &mut gd,
                &h,
                &AgglomConfig {
                    delta: 0.2,
                    policy: Policy::Delayed,
                    lazy_updates: false,
                },
            )
            .unwrap();
            let seg_d = relabel_volume(&overseg, td.merge_pairs().collect::<Vec<_>>());
            let vi_d = vi_of(&seg_d, &out.cells);

            sum_std += vi_s.under;
            sum_del += vi_d.under;
            if vi_d.under < vi_s.under {
                wins += 1;
            } else if vi_d.under == vi_s.under {
                ties += 1;
            }
            println!(
                "seed {seed}: regions {} | std UE {:.4} OE {:.4} ({} merges) | del UE {:.4} OE {:.4} ({} merges)",
                g0.num_nodes(),
                vi_s.under,
                vi_s.over,
                ts.len(),
                vi_d.under,
                vi_d.over,
                td.len()
            );
        }
        println!(
            "wins {wins}/20 ties {ties} | mean UE std {:.5} del {:.5}",
            sum_std / 20.0,
            sum_del / 20.0
        );
    }

    if mode == "c6" {
        // Criterion 6 exploration: context-aware vs oblivious.
        let mut sum = [0.0f64; 4]; // cada_ue, cada_oe, obl_ue, obl_oe
        let mut blob_total = 0usize;
        let mut blob_ok = 0usize;
        for seed in 0..10u64 {
            let params = SynthParams {
                dims: vec![128, 128],
                n_cells: 8,
                mito_per_cell: (2, 4),
                mito_radius: (3.0, 6.0),
                boundary_blur_sigma: 1.0,
                noise_sigma: 0.1,
                seed: 1000 + seed,
            };
            let out = synth_generate(&params).unwrap();
            let overseg =
                watershed(&out.channels.to_field("boundary").unwrap(), 0.04).unwrap();

            // Context-aware: partition, train context-aware, two-phase.
            let mut g = RegionGraph::build(&overseg, &out.channels).unwrap();
            partition_superpixels(&mut g, 0.5).unwrap();
            let cfg_f = ForestParams {
                n_trees: 20,
                max_depth: 20,
                seed,
            };
            let (forest_c, _, _) = iterative_train(
                &g,
                &overseg,
                &out.cells,
                &IterTrainConfig {
                    iterations: 1,
                    accumulate: false,
                    forest: cfg_f,
                    delta: 0.2,
                    policy: LabelPolicy::ContextAware,
                },
            )
            .unwrap();
            let pcfg = PipelineConfig::default();
            let hc = ForestConfidence::new(&forest_c);
            let cada = run_context_pipeline(&overseg, &out.channels, &hc, &pcfg).unwrap();
            let vi_c = vi_of(&cada.volume, &out.cells);

            // Oblivious: plain graph, gt labels, single phase.
            let g2 = RegionGraph::build(&overseg, &out.channels).unwrap();
            let (forest_o, _, _) = iterative_train(
                &g2,
                &overseg,
                &out.cells,
                &IterTrainConfig {
                    iterations: 1,
                    accumulate: false,
                    forest: cfg_f,
                    delta: 0.2,
                    policy: LabelPolicy::Oblivious,
                },
            )
            .unwrap();
            let ho = ForestConfidence::new(&forest_o);
            let obl = run_single_phase(&overseg, &out.channels, &ho, &pcfg).unwrap();
            let vi_o = vi_of(&obl.volume, &out.cells);

            sum[0] += vi_c.under;
            sum[1] += vi_c.over;
            sum[2] += vi_o.under;
            sum[3] += vi_o.over;

            // Blob containment under CADA.
            for (&blob, &cell) in &out.blob_cells {
                blob_total += 1;
                let blob_label = majority_label(&cada.volume, &out.mito_blobs, blob);
                let cell_label = majority_cell_label(&cada.volume, &out.cells, cell, &out.mito_blobs);
                if blob_label == cell_label {
                    blob_ok += 1;
                }
            }
            println!(
                "seed {seed}: CADA UE {:.4} OE {:.4} | OBL UE {:.4} OE {:.4} | mito merges {}",
                vi_c.under,
                vi_c.over,
                vi_o.under,
                vi_o.over,
                cada.mito_trace.len()
            );
        }
        println!(
            "mean: CADA UE {:.4} OE {:.4} | OBL UE {:.4} OE {:.4} | blobs {}/{}",
            sum[0] / 10.0,
            sum[1] / 10.0,
            sum[2] / 10.0,
            sum[3] / 10.0,
            blob_ok,
            blob_total
        );
    }
}

fn majority_label(seg: &LabelVolume, blobs: &LabelVolume, blob: u32) -> u32 {
    let mut counts = std::collections::BTreeMap::new();
    for (i, &b) in blobs.labels().iter().enumerate() {
        if b == blob {
            *counts.entry(seg.get(i)).or_insert(0u64) += 1;
        }
    }
    counts
        .into_iter()
        .max_by_key(|&(label, c)| (c, std::cmp::Reverse(label)))
        .map(|(l, _)| l)
        .unwrap_or(0)
}

fn majority_cell_label(seg: &LabelVolume, cells: &LabelVolume, cell: u32, blobs: &LabelVolume) -> u32 {
    let mut counts = std::collections::BTreeMap::new();
    for (i, &c) in cells.labels().iter().enumerate() {
        if c == cell && blobs.get(i) == 0 {
            *counts.entry(seg.get(i)).or_insert(0u64) += 1;
        }
    }
    counts
        .into_iter()
        .max_by_key(|&(label, c)| (c, std::cmp::Reverse(label)))
        .map(|(l, _)| l)
        .unwrap_or(0)
}
