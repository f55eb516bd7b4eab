//! Command-line front end for the segmentation pipeline.
//!
//! Exit codes: 0 success, 2 usage or shape errors, 3 I/O failures, 4 model
//! or data errors. Every run echoes its fully resolved configuration as JSON
//! next to its outputs, and reruns with the same seed are byte-identical.

mod commands;
mod config;
mod errors;
mod overlay;

use clap::{Parser, Subcommand};

use crate::commands::{
    cmd_eval, cmd_overlay, cmd_pipeline, cmd_segment, cmd_synth, cmd_train, cmd_watershed,
    EvalArgs, OverlayArgs, PipelineArgs, SegmentArgs, SynthArgs, TrainArgs, WatershedArgs,
};
#[derive(Parser)]
#[command(
    name = "aggloseg",
    about = "Context-aware delayed agglomerative segmentation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ground-truth volume and probability channels.
    Synth(SynthArgs),
    /// Over-segment a boundary probability map with marker-based watershed.
    Watershed(WatershedArgs),
    /// Train the boundary classifier.
    Train(TrainArgs),
    /// Agglomerate an over-segmentation into a final labeling.
    Segment(SegmentArgs),
    /// Compare a segmentation against ground truth (split-VI / split-RE).
    Eval(EvalArgs),
    /// Write per-plane color overlays of a labeling.
    Overlay(OverlayArgs),
    /// synth -> watershed -> train -> segment -> eval in one run.
    Pipeline(PipelineArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Watershed(args) => cmd_watershed(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Segment(args) => cmd_segment(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Overlay(args) => cmd_overlay(&args),
        Command::Pipeline(args) => cmd_pipeline(&args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
