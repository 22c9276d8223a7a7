//! File-level batch runs: every input × every configuration, written to an
//! output directory together with per-run metric reports and a manifest.
//!
//! Work is parallel over (input, config) pairs. Every pair writes distinct
//! files and results are gathered in input order, so the thread count never
//! changes what ends up on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::metrics::{evaluate_labeled, MetricsReport};
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::raster::{load_image, save_image, synthesize_haze, tile_panels, ImageGray, ImageRgb};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const SYNTH_TRANSMISSIONS: [f64; 3] = [0.3, 0.5, 0.7];
pub const SYNTH_AIRLIGHT: [f64; 3] = [0.9, 0.9, 0.9];

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "ppm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub input: String,
    /// Config id, or empty when the input itself could not be read.
    pub config: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub inputs: Vec<String>,
    /// `<stem>.<config-id>` (plus `<stem>.compare` for composites) to written path.
    pub outputs: BTreeMap<String, String>,
    pub configs: Vec<PipelineConfig>,
    pub reports: Vec<MetricsReport>,
    pub failures: Vec<Failure>,
}

impl RunManifest {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn merge(&mut self, other: RunManifest) {
        self.inputs.extend(other.inputs);
        self.outputs.extend(other.outputs);
        for c in other.configs {
            if !self.configs.contains(&c) {
                self.configs.push(c);
            }
        }
        self.reports.extend(other.reports);
        self.failures.extend(other.failures);
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest is serializable");
        std::fs::write(path, text).map_err(|source| DehazeError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn write_report(report: &MetricsReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_json()).map_err(|source| DehazeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Expands directories into the image files they contain (sorted by name);
/// other paths pass through unchanged.
pub fn expand_inputs(paths: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .into_iter()
                .flatten()
                .flatten()
                .map(|e| e.path())
                .filter(|f| {
                    f.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                })
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    out
}

/// Result of one (image, config) pair.
pub struct PairOutcome {
    pub key: String,
    pub config: PipelineConfig,
    pub result: Result<(ImageRgb, MetricsReport)>,
}

/// Runs each config on `img` and writes `<stem>.<id>.png` and `.json` into `outdir`.
///
/// `reference` is the image the metrics compare against.
fn run_configs_on(
    img: &ImageRgb,
    reference: &ImageRgb,
    stem: &str,
    configs: &[PipelineConfig],
    outdir: &Path,
) -> Vec<PairOutcome> {
    configs
        .par_iter()
        .map(|cfg| {
            let id = cfg.id();
            let key = format!("{stem}.{id}");
            let result = (|| {
                let out = run_pipeline(img, cfg)?;
                save_image(&out.result, outdir.join(format!("{key}.png")))?;
                let report = evaluate_labeled(reference, &out.result, stem, &id)?;
                write_report(&report, &outdir.join(format!("{key}.json")))?;
                Ok((out.result, report))
            })();
            PairOutcome {
                key,
                config: *cfg,
                result,
            }
        })
        .collect()
}

fn record(manifest: &mut RunManifest, input: &str, outdir: &Path, outcomes: Vec<PairOutcome>) -> Vec<Option<ImageRgb>> {
    outcomes
        .into_iter()
        .map(|o| match o.result {
            Ok((img, report)) => {
                manifest.outputs.insert(
                    o.key.clone(),
                    outdir.join(format!("{}.png", o.key)).display().to_string(),
                );
                manifest.reports.push(report);
                Some(img)
            }
            Err(e) => {
                manifest.failures.push(Failure {
                    input: input.to_string(),
                    config: o.config.id(),
                    error: e.to_string(),
                });
                None
            }
        })
        .collect()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| DehazeError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Every input through every config. Unreadable inputs become failures and
/// the remaining inputs are still processed.
pub fn run_batch(inputs: &[PathBuf], configs: &[PipelineConfig], outdir: &Path) -> Result<RunManifest> {
    ensure_dir(outdir)?;
    let loaded: Vec<(PathBuf, Result<ImageRgb>)> =
        inputs.par_iter().map(|p| (p.clone(), load_image(p))).collect();
    let mut manifest = RunManifest {
        configs: configs.to_vec(),
        ..Default::default()
    };
    let per_input: Vec<(String, Result<Vec<PairOutcome>>)> = loaded
        .into_par_iter()
        .map(|(path, img)| {
            let name = path.display().to_string();
            let outcomes = img.map(|img| run_configs_on(&img, &img, &stem_of(&path), configs, outdir));
            (name, outcomes)
        })
        .collect();
    for (name, outcomes) in per_input {
        manifest.inputs.push(name.clone());
        match outcomes {
            Ok(o) => {
                record(&mut manifest, &name, outdir, o);
            }
            Err(e) => manifest.failures.push(Failure {
                input: name,
                config: String::new(),
                error: e.to_string(),
            }),
        }
    }
    Ok(manifest)
}

/// Side-by-side layout: one row for landscape panels, one column for portrait.
pub fn composite(panels: &[ImageRgb]) -> Result<ImageRgb> {
    let first = panels
        .first()
        .ok_or_else(|| DehazeError::Shape("no panels to compose".into()))?;
    let columns = if first.width() >= first.height() { panels.len() } else { 1 };
    tile_panels(panels, columns)
}

/// The six-configuration comparison on one image, plus a 7-panel composite
/// (original first, then the results in grid order). A failed config leaves
/// a black panel.
pub fn compare_image(img: &ImageRgb, stem: &str, outdir: &Path, seed: u64) -> Result<RunManifest> {
    ensure_dir(outdir)?;
    let configs = PipelineConfig::comparison_grid(seed);
    let mut manifest = RunManifest {
        inputs: vec![stem.to_string()],
        configs: configs.clone(),
        ..Default::default()
    };
    let outcomes = run_configs_on(img, img, stem, &configs, outdir);
    let results = record(&mut manifest, stem, outdir, outcomes);
    let black = ImageRgb::filled(img.width(), img.height(), [0.0; 3])?;
    let mut panels = vec![img.clone()];
    panels.extend(results.into_iter().map(|r| r.unwrap_or_else(|| black.clone())));
    let grid = composite(&panels)?;
    let key = format!("{stem}.compare");
    let path = outdir.join(format!("{key}.png"));
    save_image(&grid, &path)?;
    manifest.outputs.insert(key, path.display().to_string());
    Ok(manifest)
}

pub fn compare_grid(input: &Path, outdir: &Path, seed: u64) -> Result<RunManifest> {
    let img = load_image(input)?;
    let mut m = compare_image(&img, &stem_of(input), outdir, seed)?;
    m.inputs = vec![input.display().to_string()];
    Ok(m)
}

/// Closed-loop check on a clean image: haze is synthesized at each
/// transmission in `transmissions` with airlight [`SYNTH_AIRLIGHT`], the
/// comparison grid runs on every hazy image, and metrics are taken against
/// the hazy input. Hazy inputs are saved as `<stem>.t<t>.png`.
pub fn synth_bench_image(
    clean: &ImageRgb,
    stem: &str,
    outdir: &Path,
    seed: u64,
    transmissions: &[f64],
) -> Result<RunManifest> {
    ensure_dir(outdir)?;
    let configs = PipelineConfig::comparison_grid(seed);
    let mut manifest = RunManifest {
        configs: configs.clone(),
        ..Default::default()
    };
    for &t in transmissions {
        let (w, h) = clean.dims();
        let hazy = synthesize_haze(clean, &ImageGray::filled(w, h, t)?, SYNTH_AIRLIGHT)?;
        let hazy_stem = format!("{stem}.t{t}");
        let hazy_path = outdir.join(format!("{hazy_stem}.png"));
        save_image(&hazy, &hazy_path)?;
        manifest.inputs.push(hazy_path.display().to_string());
        let outcomes = run_configs_on(&hazy, &hazy, &hazy_stem, &configs, outdir);
        record(&mut manifest, &hazy_stem, outdir, outcomes);
    }
    Ok(manifest)
}

pub fn synth_bench(clean: &Path, outdir: &Path, seed: u64) -> Result<RunManifest> {
    let img = load_image(clean)?;
    synth_bench_image(&img, &stem_of(clean), outdir, seed, &SYNTH_TRANSMISSIONS)
}

/// Runs `f` on a dedicated pool with `jobs` threads (0 = rayon default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| DehazeError::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
