use std::path::PathBuf;

use clap::Args;
use parkattn::interpret::{generate_synthetic, SyntheticConfig};

use crate::{usage, CmdResult};

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    pub speakers: usize,
    #[arg(long, default_value_t = 3.0)]
    pub effect_size: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub frames: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 27)]
    pub features: usize,
    #[arg(long, default_value_t = 3)]
    pub planted_feature: usize,
    #[arg(long, default_value_t = 1)]
    pub datasets: usize,
    #[arg(long, default_value_t = 10)]
    pub utterances_per_speaker: usize,
}

pub fn run(a: SynthArgs) -> CmdResult {
    let cfg = SyntheticConfig {
        n_speakers: a.speakers,
        frames: a.frames,
        d: a.dim,
        f: a.features,
        planted_feature: a.planted_feature,
        effect_size: a.effect_size,
        seed: a.seed,
        n_datasets: a.datasets,
        utterances_per_speaker: a.utterances_per_speaker,
        ..Default::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = generate_synthetic(&cfg, &a.out_dir)?;
    log::info!(
        "wrote {} utterances to {}",
        corpus.records.len(),
        corpus.manifest_path.display()
    );
    Ok(())
}
