use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use rjip_bench::{corpus_files, parse_modes, parse_ratios, sweep, write_atomic, write_csv, RdPoint, SweepConfig};
use rjip_core::codec::{self, EncodeOptions, LumaSplit, Mode, TonalMethod};
use rjip_core::image::{load_ppm, save_ppm};
use rjip_core::mask::fixed_to_h;

#[derive(Parser)]
#[command(name = "rjip", version, about = "Sparse-mask inpainting image codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a PPM image; prints one CSV row.
    Compress {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value = "rgb")]
        mode: Mode,
        #[arg(long)]
        luma_factor: Option<f64>,
        /// Split the LP budget as B_Y = f * B_CbCr.
        #[arg(long)]
        literal_split: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "direct")]
        tonal: TonalMethod,
    },
    /// Decode an .rjc file to PPM.
    Decompress { input: PathBuf, output: PathBuf },
    /// Rate-distortion sweep over a directory of PPM images.
    Sweep {
        corpus: PathBuf,
        #[arg(long, default_value = "20:120:10")]
        ratios: String,
        #[arg(long, default_value = "all")]
        modes: String,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "direct")]
        tonal: TonalMethod,
    },
}

fn init_threads() {
    if let Some(n) = std::env::var("RJIP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compress {
            input,
            output,
            ratio,
            mode,
            luma_factor,
            literal_split,
            seed,
            tonal,
        } => {
            let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let image = load_ppm(&bytes).with_context(|| format!("parsing {}", input.display()))?;
            let mut opts = EncodeOptions::new(mode, ratio);
            opts.luma_factor = luma_factor;
            opts.luma_split = if literal_split {
                LumaSplit::Literal
            } else {
                LumaSplit::Fraction
            };
            opts.seed = seed;
            opts.tonal = tonal;
            let start = Instant::now();
            let enc = codec::encode(&image, &opts)?;
            let elapsed = start.elapsed().as_secs_f64();
            write_atomic(&output, &enc.bytes)?;
            let id = input
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            write_csv(
                std::io::stdout().lock(),
                &[RdPoint::from_encoded(&id, ratio, &enc, elapsed)],
            )?;
        }
        Command::Decompress { input, output } => {
            let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let dec = codec::decode(&bytes).with_context(|| format!("decoding {}", input.display()))?;
            write_atomic(&output, &save_ppm(&dec.image))?;
            let params: Vec<String> = dec
                .header
                .groups
                .iter()
                .map(|g| format!("h={} q={}", fixed_to_h(g.h_fixed), g.q))
                .collect();
            println!(
                "mode={} {}x{} {}",
                dec.header.mode,
                dec.header.width,
                dec.header.height,
                params.join(" ")
            );
        }
        Command::Sweep {
            corpus,
            ratios,
            modes,
            out,
            seed,
            tonal,
        } => {
            let config = SweepConfig {
                ratios: parse_ratios(&ratios)?,
                modes: parse_modes(&modes)?,
                seed,
                tonal,
            };
            let files = corpus_files(&corpus)?;
            let outcome = sweep(&files, &config);
            for s in &outcome.skipped {
                eprintln!("warning: skipped {s}");
            }
            if outcome.rows.is_empty() {
                anyhow::bail!("no image in {} could be encoded", corpus.display());
            }
            let mut buf = Vec::new();
            write_csv(&mut buf, &outcome.rows)?;
            write_atomic(&out, &buf)?;
            eprintln!("{} rows written to {}", outcome.rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    init_threads();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
