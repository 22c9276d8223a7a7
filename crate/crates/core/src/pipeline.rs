//! Full front-end + back-end runs described by a single [`PipelineConfig`].

use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::frontend::{run_frontend, FrontendConfig, LambdaMode};
use crate::lce::{
    ace_rgb, clahe_rgb, gamma_correct, global_hist_eq_rgb, stress, AceConfig, ClaheConfig, StressConfig,
    TileMode,
};
use crate::prior::PriorConfig;
use crate::raster::ImageRgb;

/// CLAHE tile side used together with the inverted-intensity λ.
pub const INVERTED_CLAHE_KERNEL: usize = 800;

/// Back-end filter applied to the front-end output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lce {
    Clahe(ClaheConfig),
    Ace(AceConfig),
    Stress(StressConfig),
    HistEq,
    Gamma(f64),
}

impl Lce {
    pub fn id(&self) -> String {
        match self {
            Lce::Clahe(_) => "clahe".into(),
            Lce::Ace(_) => "ace".into(),
            Lce::Stress(_) => "stress".into(),
            Lce::HistEq => "histeq".into(),
            Lce::Gamma(g) => format!("gamma{g}"),
        }
    }
}

impl Default for Lce {
    fn default() -> Self {
        Lce::Clahe(ClaheConfig::default())
    }
}

impl ClaheConfig {
    /// Tiling paired with each λ mode: an eighth of the image with a
    /// constant λ, a fixed 800 px kernel otherwise.
    pub fn for_lambda(mode: LambdaMode) -> Self {
        let tile_mode = match mode {
            LambdaMode::Constant(_) => TileMode::FractionalGrid(8),
            LambdaMode::Inverted | LambdaMode::DarkChannelPrior => TileMode::FixedKernel(INVERTED_CLAHE_KERNEL),
        };
        Self {
            tile_mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub frontend: FrontendConfig,
    pub lce: Lce,
    /// Required exactly when the λ mode is the dark-channel prior.
    pub prior: Option<PriorConfig>,
    /// Drives every random choice in the run (currently STRESS sprays).
    pub seed: u64,
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl PipelineConfig {
    pub fn new(lambda_mode: LambdaMode, lce: Lce) -> Self {
        let prior = matches!(lambda_mode, LambdaMode::DarkChannelPrior).then(PriorConfig::default);
        Self {
            frontend: FrontendConfig {
                lambda_mode,
                ..FrontendConfig::default()
            },
            lce,
            prior,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The six λ × back-end combinations compared side by side:
    /// {constant 0.35, inverted} × {ACE, CLAHE, STRESS}.
    pub fn comparison_grid(seed: u64) -> Vec<PipelineConfig> {
        let mut out = Vec::with_capacity(6);
        for mode in [LambdaMode::Constant(FrontendConfig::DEFAULT_CONSTANT), LambdaMode::Inverted] {
            for lce in [
                Lce::Ace(AceConfig::default()),
                Lce::Clahe(ClaheConfig::for_lambda(mode)),
                Lce::Stress(StressConfig::default()),
            ] {
                out.push(PipelineConfig::new(mode, lce).with_seed(seed));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend.validate()?;
        let is_dcp = matches!(self.frontend.lambda_mode, LambdaMode::DarkChannelPrior);
        match (&self.prior, is_dcp) {
            (Some(p), true) => p.validate()?,
            (None, false) => {}
            (Some(_), false) => {
                return Err(DehazeError::Config(
                    "prior settings given but the lambda mode is not dcp".into(),
                ))
            }
            (None, true) => {
                return Err(DehazeError::Config("dcp lambda mode requires prior settings".into()))
            }
        }
        match &self.lce {
            Lce::Clahe(c) => c.validate(),
            Lce::Ace(c) => c.validate(),
            Lce::Stress(c) => c.validate(),
            Lce::HistEq => Ok(()),
            Lce::Gamma(g) if *g > 0.0 && g.is_finite() => Ok(()),
            Lce::Gamma(g) => Err(DehazeError::Config(format!("gamma must be positive, got {g}"))),
        }
    }

    /// Short identifier embedded in output file names, e.g. `lam0.35-clahe`.
    pub fn id(&self) -> String {
        let mut id = match self.frontend.lambda_mode {
            LambdaMode::Constant(c) => format!("lam{}", fmt_num(c)),
            LambdaMode::Inverted => "inv".into(),
            LambdaMode::DarkChannelPrior => "dcp".into(),
        };
        if self.frontend.alpha != 1.0 || self.frontend.beta != 0.0 {
            id.push_str(&format!("-a{}b{}", fmt_num(self.frontend.alpha), fmt_num(self.frontend.beta)));
        }
        id.push('-');
        id.push_str(&self.lce.id());
        id
    }
}

/// Intermediate and final images of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Front-end output `f_g`.
    pub frontend: ImageRgb,
    pub result: ImageRgb,
}

pub fn apply_lce(img: &ImageRgb, lce: &Lce, seed: u64) -> Result<ImageRgb> {
    match lce {
        Lce::Clahe(c) => clahe_rgb(img, c),
        Lce::Ace(c) => ace_rgb(img, c),
        Lce::Stress(c) => stress(img, &StressConfig { seed, ..*c }),
        Lce::HistEq => global_hist_eq_rgb(img, 256),
        Lce::Gamma(g) => gamma_correct(img, *g),
    }
}

pub fn run_pipeline(img: &ImageRgb, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let frontend = run_frontend(img, &cfg.frontend, cfg.prior.as_ref())?;
    let result = apply_lce(&frontend, &cfg.lce, cfg.seed)?;
    Ok(PipelineOutput { frontend, result })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids() {
        let c = PipelineConfig::new(LambdaMode::Constant(0.35), Lce::Clahe(ClaheConfig::default()));
        assert_eq!(c.id(), "lam0.35-clahe");
        let c = PipelineConfig::new(LambdaMode::Inverted, Lce::Ace(AceConfig::default()));
        assert_eq!(c.id(), "inv-ace");
        let mut c = PipelineConfig::new(LambdaMode::DarkChannelPrior, Lce::Gamma(0.5));
        c.frontend.alpha = 0.9;
        assert_eq!(c.id(), "dcp-a0.9b0-gamma0.5");
    }

    #[test]
    fn grid_has_six_distinct_configs() {
        let grid = PipelineConfig::comparison_grid(0);
        assert_eq!(grid.len(), 6);
        let mut ids: Vec<String> = grid.iter().map(PipelineConfig::id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 6);
        let inv_clahe = grid.iter().find(|c| c.id() == "inv-clahe").unwrap();
        assert_eq!(
            inv_clahe.lce,
            Lce::Clahe(ClaheConfig { tile_mode: TileMode::FixedKernel(800), ..Default::default() })
        );
    }

    #[test]
    fn prior_presence_is_checked() {
        let mut c = PipelineConfig::new(LambdaMode::DarkChannelPrior, Lce::HistEq);
        assert!(c.validate().is_ok());
        c.prior = None;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::new(LambdaMode::Inverted, Lce::HistEq);
        c.prior = Some(PriorConfig::default());
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = PipelineConfig::new(LambdaMode::Inverted, Lce::Stress(StressConfig::default())).with_seed(7);
        let text = serde_json::to_string(&c).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let partial: PipelineConfig =
            serde_json::from_str(r#"{"frontend": {"lambda_mode": "inverted"}, "lce": {"gamma": 0.5}}"#).unwrap();
        assert_eq!(partial.frontend.lambda_mode, LambdaMode::Inverted);
        assert_eq!(partial.lce, Lce::Gamma(0.5));
    }

    #[test]
    fn pipeline_runs_every_backend() {
        let clean = ImageRgb::from_fn(20, 14, |x, y| {
            [x as f64 / 19.0, y as f64 / 13.0, ((x / 3 + y / 3) % 4) as f64 / 3.0]
        })
        .unwrap();
        let t = crate::raster::ImageGray::from_fn(20, 14, |x, y| 0.3 + 0.03 * (x + y) as f64).unwrap();
        let img = crate::raster::synthesize_haze(&clean, &t, [0.9; 3]).unwrap();
        for lce in [
            Lce::Clahe(ClaheConfig::default()),
            Lce::Ace(AceConfig::default()),
            Lce::Stress(StressConfig { n_iterations: 5, ..Default::default() }),
            Lce::HistEq,
            Lce::Gamma(0.5),
        ] {
            for mode in [LambdaMode::Constant(0.35), LambdaMode::Inverted, LambdaMode::DarkChannelPrior] {
                let out = run_pipeline(&img, &PipelineConfig::new(mode, lce)).unwrap();
                assert_eq!(out.result.dims(), img.dims());
            }
        }
    }
}
