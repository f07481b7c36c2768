//! Rate-distortion harness around `rjip-core`: single-file compression and
//! corpus sweeps that emit one CSV row per (image, mode, ratio).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use rjip_core::codec::{self, EncodeOptions, Encoded, Mode, TonalMethod};
use rjip_core::image::load_ppm;

/// Image id used for corpus-average rows.
pub const AVERAGE_ID: &str = "average";

/// One rate-distortion measurement. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdPoint {
    pub image: String,
    pub mode: String,
    pub ratio_requested: f64,
    pub ratio_achieved: f64,
    pub mse: f64,
    pub encode_s: f64,
    pub h_y: Option<f64>,
    pub q_y: Option<u16>,
    pub h_c: Option<f64>,
    pub q_c: Option<u16>,
    pub f: Option<f64>,
    pub k: Option<usize>,
    pub distinct_colours: Option<usize>,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "image",
    "mode",
    "ratio_requested",
    "ratio_achieved",
    "mse",
    "encode_s",
    "h_y",
    "q_y",
    "h_c",
    "q_c",
    "f",
    "k",
    "distinct_colours",
];

impl RdPoint {
    /// Row for an encode; `h_y`/`q_y` hold the only group outside LP mode.
    pub fn from_encoded(image: &str, ratio: f64, enc: &Encoded, encode_s: f64) -> Self {
        let cfg = &enc.config;
        let lp = cfg.mode == Mode::ScalarLp;
        Self {
            image: image.to_string(),
            mode: cfg.mode.name().to_string(),
            ratio_requested: ratio,
            ratio_achieved: enc.achieved_ratio(),
            mse: enc.mse,
            encode_s,
            h_y: Some(cfg.h(0)),
            q_y: (cfg.mode != Mode::VectorRgb).then_some(cfg.groups[0].q),
            h_c: lp.then(|| cfg.h(1)),
            q_c: lp.then(|| cfg.groups[1].q),
            f: cfg.luma_factor,
            k: cfg.codebook_size,
            distinct_colours: enc.distinct_mask_colors,
        }
    }
}

/// Parses `start:stop:step` (inclusive) or a comma list.
pub fn parse_ratios(arg: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = arg.split(':').collect();
    let out = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step): (f64, f64, f64) = (start.parse()?, stop.parse()?, step.parse()?);
            if step <= 0.0 || stop < start {
                bail!("bad ratio range {arg:?}");
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
        [list] => list
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()?,
        _ => bail!("ratios must be start:stop:step or a comma list"),
    };
    Ok(out)
}

/// `all` or a comma list of mode names.
pub fn parse_modes(arg: &str) -> Result<Vec<Mode>> {
    if arg == "all" {
        return Ok(vec![Mode::ScalarRgb, Mode::ScalarLp, Mode::VectorRgb]);
    }
    arg.split(',')
        .map(|m| m.trim().parse::<Mode>().map_err(Into::into))
        .collect()
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().context("output path has no file name")?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|()| f.sync_all()))
        .and_then(|()| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

/// `.ppm` files of a directory, sorted by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub ratios: Vec<f64>,
    pub modes: Vec<Mode>,
    pub seed: u64,
    pub tonal: TonalMethod,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub rows: Vec<RdPoint>,
    /// Files or jobs that failed, with the reason.
    pub skipped: Vec<String>,
}

/// Runs every (image, mode, ratio) job and appends per-(mode, ratio) corpus averages.
pub fn sweep(files: &[PathBuf], config: &SweepConfig) -> SweepOutcome {
    let mut outcome = SweepOutcome::default();
    let mut images = Vec::new();
    for path in files {
        let id = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        match fs::read(path)
            .map_err(anyhow::Error::from)
            .and_then(|b| load_ppm(&b).map_err(Into::into))
        {
            Ok(img) => images.push((id, img)),
            Err(e) => outcome.skipped.push(format!("{}: {e}", path.display())),
        }
    }
    let jobs: Vec<(usize, Mode, f64)> = (0..images.len())
        .flat_map(|i| {
            config
                .modes
                .iter()
                .flat_map(move |&m| config.ratios.iter().map(move |&r| (i, m, r)))
        })
        .collect();
    let results: Vec<std::result::Result<RdPoint, String>> = jobs
        .par_iter()
        .map(|&(i, mode, ratio)| {
            let (id, img) = &images[i];
            let mut opts = EncodeOptions::new(mode, ratio);
            opts.seed = config.seed;
            opts.tonal = config.tonal;
            let start = Instant::now();
            codec::encode(img, &opts)
                .map(|enc| RdPoint::from_encoded(id, ratio, &enc, start.elapsed().as_secs_f64()))
                .map_err(|e| format!("{id} {mode} {ratio}: {e}"))
        })
        .collect();
    for r in results {
        match r {
            Ok(p) => outcome.rows.push(p),
            Err(e) => outcome.skipped.push(e),
        }
    }
    let order = |m: &str| config.modes.iter().position(|x| x.name() == m).unwrap_or(usize::MAX);
    outcome.rows.sort_by(|a, b| {
        a.image
            .cmp(&b.image)
            .then(order(&a.mode).cmp(&order(&b.mode)))
            .then(a.ratio_requested.total_cmp(&b.ratio_requested))
    });
    let mut averages = Vec::new();
    for &mode in &config.modes {
        for &ratio in &config.ratios {
            let rows: Vec<&RdPoint> = outcome
                .rows
                .iter()
                .filter(|p| p.mode == mode.name() && p.ratio_requested == ratio)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let n = rows.len() as f64;
            let mean = |f: fn(&RdPoint) -> f64| rows.iter().map(|p| f(p)).sum::<f64>() / n;
            averages.push(RdPoint {
                image: AVERAGE_ID.to_string(),
                mode: mode.name().to_string(),
                ratio_requested: ratio,
                ratio_achieved: mean(|p| p.ratio_achieved),
                mse: mean(|p| p.mse),
                encode_s: mean(|p| p.encode_s),
                h_y: None,
                q_y: None,
                h_c: None,
                q_c: None,
                f: None,
                k: None,
                distinct_colours: None,
            });
        }
    }
    outcome.rows.extend(averages);
    outcome
}

pub fn write_csv<W: Write>(out: W, rows: &[RdPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_args() {
        assert_eq!(parse_ratios("20:120:10").unwrap().len(), 11);
        assert_eq!(parse_ratios("20,50").unwrap(), vec![20.0, 50.0]);
        assert!(parse_ratios("50:20:10").is_err());
        assert!(parse_ratios("a").is_err());
    }

    #[test]
    fn mode_args() {
        assert_eq!(parse_modes("all").unwrap().len(), 3);
        assert_eq!(parse_modes("lp,vector").unwrap(), vec![Mode::ScalarLp, Mode::VectorRgb]);
        assert!(parse_modes("cmyk").is_err());
    }

    #[test]
    fn csv_header_matches_columns() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), CSV_COLUMNS.join(","));
    }
}
