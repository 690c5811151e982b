//! `dimshrink`: preprocess volumes, train modality-specific models, run
//! ensemble prediction and evaluate or visualize the results.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};

/// Single-threaded CPU backend used by every command.
pub type Back = burn::backend::ndarray::NdArray<f32>;
/// Autodiff wrapper of [`Back`] for training and checkpoint restoration.
pub type AutoBack = burn::backend::Autodiff<Back>;

pub fn device() -> burn::backend::ndarray::NdArrayDevice {
    Default::default()
}

#[derive(Parser)]
#[command(
    name = "dimshrink",
    version,
    about = "Volumetric tumor segmentation via depth shrinking around a 2D backbone"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crop and normalize raw cases, or generate synthetic phantoms
    Preprocess(commands::preprocess::PreprocessArgs),
    /// Train one model on one modality of a preprocessed dataset
    Train(commands::train::TrainArgs),
    /// Predict a label volume from one or more checkpoints
    Predict(commands::predict::PredictArgs),
    /// Score predictions against ground truth and aggregate per region
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Render tri-planar views, label overlays and encoder channels
    Visualize(commands::visualize::VisualizeArgs),
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Preprocess(args) => commands::preprocess::run(&args),
        Command::Train(args) => commands::train::run(&args),
        Command::Predict(args) => commands::predict::run(&args),
        Command::Evaluate(args) => commands::evaluate::run(&args),
        Command::Visualize(args) => commands::visualize::run(&args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
