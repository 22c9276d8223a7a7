//! Command-line front end for the `dehaze` binary.
//!
//! Exit codes: 0 when every (input, config) pair succeeded, 1 when at least
//! one failed (the rest are still processed), 2 for invalid arguments.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::batch::{self, RunManifest, MANIFEST_NAME};
use crate::error::{DehazeError, Result};
use crate::frontend::LambdaMode;
use crate::lce::{AceConfig, ClaheConfig, StressConfig, TileMode};
use crate::pipeline::{Lce, PipelineConfig};
use crate::prior::PriorConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Exponent used by `--lce gamma` when `--gamma` is absent.
pub const DEFAULT_GAMMA: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LceKind {
    Ace,
    Clahe,
    Stress,
    Histeq,
    Gamma,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "dehaze", version, about = "Batch single-image dehazing")]
pub struct Args {
    /// Input images or directories of images.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    /// Local contrast enhancement back-end.
    #[arg(long, value_enum)]
    pub lce: Option<LceKind>,

    /// Darkening weight: constant=<c>, inverted, or dcp.
    #[arg(long, value_parser = parse_lambda)]
    pub lambda: Option<LambdaMode>,

    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,

    #[arg(long)]
    pub clip_limit: Option<f64>,

    /// CLAHE tiling: frac<d> (e.g. frac8) or fixed=<side>.
    #[arg(long, value_parser = parse_tile)]
    pub tile: Option<TileMode>,

    #[arg(long)]
    pub ace_alpha: Option<f64>,

    #[arg(long)]
    pub ace_levels: Option<usize>,

    #[arg(long)]
    pub stress_ns: Option<usize>,

    #[arg(long)]
    pub stress_ni: Option<usize>,

    #[arg(long)]
    pub stress_radius: Option<usize>,

    /// Exponent for `--lce gamma`.
    #[arg(long)]
    pub gamma: Option<f64>,

    /// With `--lambda dcp`, refine at reduced resolution on large images.
    #[arg(long)]
    pub dcp_downscale: bool,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Print every metrics report to stdout.
    #[arg(long)]
    pub metrics: bool,

    /// Run the six-configuration comparison grid on each input.
    #[arg(long, conflicts_with = "synth_bench")]
    pub compare: bool,

    /// Treat inputs as clean images: synthesize haze and run the grid.
    #[arg(long)]
    pub synth_bench: bool,

    /// JSON pipeline configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads (0 = all cores).
    #[arg(long, env = "DEHAZE_JOBS")]
    pub jobs: Option<usize>,
}

pub fn parse_lambda(s: &str) -> std::result::Result<LambdaMode, String> {
    match s {
        "inverted" => Ok(LambdaMode::Inverted),
        "dcp" => Ok(LambdaMode::DarkChannelPrior),
        _ => {
            let c = s
                .strip_prefix("constant=")
                .ok_or_else(|| format!("expected constant=<c>, inverted or dcp, got `{s}`"))?
                .parse::<f64>()
                .map_err(|e| format!("bad constant in `{s}`: {e}"))?;
            if !(0.0..=1.0).contains(&c) {
                return Err(format!("constant lambda must lie in [0, 1], got {c}"));
            }
            Ok(LambdaMode::Constant(c))
        }
    }
}

pub fn parse_tile(s: &str) -> std::result::Result<TileMode, String> {
    if let Some(d) = s.strip_prefix("frac") {
        let d: usize = d.parse().map_err(|e| format!("bad grid denominator in `{s}`: {e}"))?;
        if d == 0 {
            return Err("grid denominator must be positive".into());
        }
        return Ok(TileMode::FractionalGrid(d));
    }
    if let Some(n) = s.strip_prefix("fixed=") {
        let n: usize = n.parse().map_err(|e| format!("bad kernel side in `{s}`: {e}"))?;
        return Ok(TileMode::FixedKernel(n));
    }
    Err(format!("expected frac<d> or fixed=<n>, got `{s}`"))
}

fn usage(msg: impl Into<String>) -> DehazeError {
    DehazeError::Config(msg.into())
}

fn read_config_file(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| DehazeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Merges defaults, the optional config file, and flags (in that order of
/// increasing precedence).
pub fn resolve_config(args: &Args) -> Result<PipelineConfig> {
    let from_file = args.config.as_deref().map(read_config_file).transpose()?;
    let mut cfg = from_file.unwrap_or_default();

    if let Some(mode) = args.lambda {
        cfg.frontend.lambda_mode = mode;
    }
    let is_dcp = matches!(cfg.frontend.lambda_mode, LambdaMode::DarkChannelPrior);
    cfg.prior = match (is_dcp, cfg.prior) {
        (true, p) => Some(p.unwrap_or_default()),
        (false, _) => None,
    };
    if args.dcp_downscale {
        let prior: &mut PriorConfig = cfg
            .prior
            .as_mut()
            .ok_or_else(|| usage("--dcp-downscale requires --lambda dcp"))?;
        prior.downscale_large = true;
    }
    if let Some(a) = args.alpha {
        cfg.frontend.alpha = a;
    }
    if let Some(b) = args.beta {
        cfg.frontend.beta = b;
    }

    let lce_from_file = from_file.map(|c| c.lce);
    if let Some(kind) = args.lce {
        let keep = |f: Lce| lce_from_file.filter(|l| std::mem::discriminant(l) == std::mem::discriminant(&f));
        cfg.lce = match kind {
            LceKind::Clahe => keep(Lce::Clahe(ClaheConfig::default()))
                .unwrap_or(Lce::Clahe(ClaheConfig::for_lambda(cfg.frontend.lambda_mode))),
            LceKind::Ace => keep(Lce::Ace(AceConfig::default())).unwrap_or(Lce::Ace(AceConfig::default())),
            LceKind::Stress => {
                keep(Lce::Stress(StressConfig::default())).unwrap_or(Lce::Stress(StressConfig::default()))
            }
            LceKind::Histeq => Lce::HistEq,
            LceKind::Gamma => keep(Lce::Gamma(DEFAULT_GAMMA)).unwrap_or(Lce::Gamma(DEFAULT_GAMMA)),
        };
    } else if lce_from_file.is_none() {
        cfg.lce = Lce::Clahe(ClaheConfig::for_lambda(cfg.frontend.lambda_mode));
    }

    let misplaced = |flag: &str, needs: &str| usage(format!("{flag} only applies to --lce {needs}"));
    match &mut cfg.lce {
        Lce::Clahe(c) => {
            if let Some(v) = args.clip_limit {
                c.clip_limit = v;
            }
            if let Some(t) = args.tile {
                c.tile_mode = t;
            }
        }
        Lce::Ace(c) => {
            if let Some(v) = args.ace_alpha {
                c.slope_alpha = v;
            }
            if let Some(v) = args.ace_levels {
                c.levels = v;
            }
        }
        Lce::Stress(c) => {
            if let Some(v) = args.stress_ns {
                c.n_samples = v;
            }
            if let Some(v) = args.stress_ni {
                c.n_iterations = v;
            }
            if let Some(v) = args.stress_radius {
                c.radius = Some(v);
            }
        }
        Lce::Gamma(g) => {
            if let Some(v) = args.gamma {
                *g = v;
            }
        }
        Lce::HistEq => {}
    }
    let kind = &cfg.lce;
    if !matches!(kind, Lce::Clahe(_)) {
        if args.clip_limit.is_some() {
            return Err(misplaced("--clip-limit", "clahe"));
        }
        if args.tile.is_some() {
            return Err(misplaced("--tile", "clahe"));
        }
    }
    if !matches!(kind, Lce::Ace(_)) && (args.ace_alpha.is_some() || args.ace_levels.is_some()) {
        return Err(misplaced("--ace-alpha/--ace-levels", "ace"));
    }
    if !matches!(kind, Lce::Stress(_))
        && (args.stress_ns.is_some() || args.stress_ni.is_some() || args.stress_radius.is_some())
    {
        return Err(misplaced("--stress-ns/--stress-ni/--stress-radius", "stress"));
    }
    if !matches!(kind, Lce::Gamma(_)) && args.gamma.is_some() {
        return Err(misplaced("--gamma", "gamma"));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn grid_mode_conflicts(args: &Args) -> Option<&'static str> {
    let tuned = args.lce.is_some()
        || args.lambda.is_some()
        || args.config.is_some()
        || args.alpha.is_some()
        || args.beta.is_some()
        || args.clip_limit.is_some()
        || args.tile.is_some()
        || args.ace_alpha.is_some()
        || args.ace_levels.is_some()
        || args.stress_ns.is_some()
        || args.stress_ni.is_some()
        || args.stress_radius.is_some()
        || args.gamma.is_some()
        || args.dcp_downscale;
    tuned.then_some("--compare and --synth-bench run a fixed configuration grid; only --seed, --out, --jobs and --metrics apply")
}

/// Executes parsed arguments and writes the manifest. Usage problems come
/// back as `Err(DehazeError::Config)`.
pub fn execute(args: &Args) -> Result<RunManifest> {
    let inputs = batch::expand_inputs(&args.inputs);
    if inputs.is_empty() {
        return Err(usage("no input images found"));
    }
    let seed = args.seed.unwrap_or(0);
    let grid = args.compare || args.synth_bench;
    if grid {
        if let Some(msg) = grid_mode_conflicts(args) {
            return Err(usage(msg));
        }
    }
    let cfg = if grid { None } else { Some(resolve_config(args)?) };
    let outdir = args.out.clone();
    let jobs = args.jobs.unwrap_or(0);

    let manifest = batch::with_jobs(jobs, || -> Result<RunManifest> {
        match cfg {
            Some(cfg) => batch::run_batch(&inputs, &[cfg], &outdir),
            None => {
                let mut all = RunManifest::default();
                for input in &inputs {
                    let run = if args.compare {
                        batch::compare_grid(input, &outdir, seed)
                    } else {
                        batch::synth_bench(input, &outdir, seed)
                    };
                    match run {
                        Ok(m) => all.merge(m),
                        Err(e) => {
                            all.inputs.push(input.display().to_string());
                            all.failures.push(batch::Failure {
                                input: input.display().to_string(),
                                config: String::new(),
                                error: e.to_string(),
                            });
                        }
                    }
                }
                Ok(all)
            }
        }
    })??;
    std::fs::create_dir_all(&outdir).map_err(|source| DehazeError::Io {
        path: outdir.clone(),
        source,
    })?;
    manifest.write(outdir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(manifest) => {
            if args.metrics {
                for r in &manifest.reports {
                    println!("{}", serde_json::to_string(r).expect("serializable"));
                }
            }
            for f in &manifest.failures {
                if f.config.is_empty() {
                    eprintln!("error: {}: {}", f.input, f.error);
                } else {
                    eprintln!("error: {} [{}]: {}", f.input, f.config, f.error);
                }
            }
            eprintln!(
                "{} outputs, {} failures; manifest at {}",
                manifest.outputs.len(),
                manifest.failures.len(),
                args.out.join(MANIFEST_NAME).display()
            );
            if manifest.is_success() {
                EXIT_OK
            } else {
                EXIT_PARTIAL
            }
        }
        Err(DehazeError::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PARTIAL
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> Args {
        let mut v = vec!["dehaze", "in.png"];
        v.extend_from_slice(extra);
        Args::try_parse_from(v).unwrap()
    }

    #[test]
    fn lambda_values() {
        assert_eq!(parse_lambda("constant=0.35"), Ok(LambdaMode::Constant(0.35)));
        assert_eq!(parse_lambda("inverted"), Ok(LambdaMode::Inverted));
        assert_eq!(parse_lambda("dcp"), Ok(LambdaMode::DarkChannelPrior));
        assert!(parse_lambda("constant=1.5").is_err());
        assert!(parse_lambda("banana").is_err());
    }

    #[test]
    fn tile_values() {
        assert_eq!(parse_tile("frac8"), Ok(TileMode::FractionalGrid(8)));
        assert_eq!(parse_tile("fixed=800"), Ok(TileMode::FixedKernel(800)));
        assert!(parse_tile("fixed=").is_err());
        assert!(parse_tile("frac0").is_err());
    }

    #[test]
    fn defaults_follow_lambda() {
        let c = resolve_config(&args(&["--lce", "clahe", "--lambda", "constant=0.35"])).unwrap();
        assert_eq!(c.lce, Lce::Clahe(ClaheConfig::default()));
        let c = resolve_config(&args(&["--lce", "clahe", "--lambda", "inverted"])).unwrap();
        assert_eq!(
            c.lce,
            Lce::Clahe(ClaheConfig { tile_mode: TileMode::FixedKernel(800), ..Default::default() })
        );
        let c = resolve_config(&args(&["--lce", "ace", "--lambda", "inverted"])).unwrap();
        assert_eq!(c.lce, Lce::Ace(AceConfig { slope_alpha: 5.0, levels: 8 }));
        let c = resolve_config(&args(&["--lambda", "dcp", "--lce", "histeq"])).unwrap();
        assert!(c.prior.is_some());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"frontend": {"lambda_mode": "inverted", "alpha": 0.9},
                "lce": {"stress": {"n_samples": 3, "n_iterations": 10}}, "seed": 4}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let c = resolve_config(&args(&["--config", p])).unwrap();
        assert_eq!(c.frontend.alpha, 0.9);
        assert_eq!(c.seed, 4);
        assert_eq!(c.lce, Lce::Stress(StressConfig { n_samples: 3, n_iterations: 10, ..Default::default() }));
        let c = resolve_config(&args(&["--config", p, "--stress-ni", "20", "--seed", "9", "--alpha", "1.1"])).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.frontend.alpha, 1.1);
        assert_eq!(c.lce, Lce::Stress(StressConfig { n_samples: 3, n_iterations: 20, ..Default::default() }));
        let c = resolve_config(&args(&["--config", p, "--lce", "ace"])).unwrap();
        assert_eq!(c.lce, Lce::Ace(AceConfig::default()));
    }

    #[test]
    fn misplaced_flags_are_usage_errors() {
        for extra in [
            &["--lce", "ace", "--clip-limit", "0.01"][..],
            &["--lce", "clahe", "--stress-ns", "3"],
            &["--lce", "stress", "--ace-levels", "4"],
            &["--lce", "histeq", "--gamma", "0.5"],
            &["--dcp-downscale"],
            &["--alpha", "0"],
        ] {
            assert!(matches!(resolve_config(&args(extra)), Err(DehazeError::Config(_))), "{extra:?}");
        }
    }

    #[test]
    fn bad_flags_exit_two() {
        assert_eq!(main_with_args(["dehaze", "x.png", "--lce", "nope"]), EXIT_USAGE);
        assert_eq!(main_with_args(["dehaze", "x.png", "--compare", "--synth-bench"]), EXIT_USAGE);
        assert_eq!(main_with_args(["dehaze"]), EXIT_USAGE);
    }
}
