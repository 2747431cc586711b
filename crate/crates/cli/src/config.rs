//! Run configuration: a JSON file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize};

use gridsync_core::correction::{FieldStage, Method};
use gridsync_core::grid_io::GridFormat;
use gridsync_core::stats::NetworkKind;
use gridsync_core::surrogate::DEFAULT_BIN_WIDTH_KM;
use gridsync_core::sync::{SeedPolicy, SyncParams, MIN_SHUFFLES};
use gridsync_core::synth::{FieldKind, LinkModel};
use gridsync_core::{Metric, Season, ThresholdSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Precip,
    Tmax,
    Tmin,
}

impl Variable {
    pub fn network_kind(self) -> NetworkKind {
        match self {
            Variable::Precip => NetworkKind::Epe,
            Variable::Tmax | Variable::Tmin => NetworkKind::Ete,
        }
    }

    pub fn default_threshold(self) -> ThresholdSpec {
        match self {
            Variable::Precip => ThresholdSpec::precipitation(),
            Variable::Tmax => ThresholdSpec::heat(),
            Variable::Tmin => ThresholdSpec::cold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    /// Defaults to `csv` for `.csv` files and the binary format otherwise.
    #[serde(default)]
    pub format: Option<GridFormat>,
}

impl InputConfig {
    pub fn format(&self) -> GridFormat {
        self.format.unwrap_or_else(|| {
            match self.path.extension().and_then(|e| e.to_str()) {
                Some(e) if e.eq_ignore_ascii_case("csv") => GridFormat::Csv,
                _ => GridFormat::Binary,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncConfig {
    pub tau_max: u32,
    pub n_shuffles: usize,
    pub link_quantile: f64,
    pub simultaneous_weight: f64,
    pub seed_policy: SeedPolicy,
    pub memoize: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        let p = SyncParams::default();
        SyncConfig {
            tau_max: p.tau_max,
            n_shuffles: p.n_shuffles,
            link_quantile: p.link_quantile,
            simultaneous_weight: p.simultaneous_weight,
            seed_policy: p.seed_policy,
            memoize: p.memoize,
        }
    }
}

impl SyncConfig {
    pub fn params(&self, seed: u64) -> SyncParams {
        SyncParams {
            tau_max: self.tau_max,
            n_shuffles: self.n_shuffles,
            link_quantile: self.link_quantile,
            seed,
            simultaneous_weight: self.simultaneous_weight,
            seed_policy: self.seed_policy,
            memoize: self.memoize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub ensemble_size: usize,
    pub bin_width_km: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            ensemble_size: 1000,
            bin_width_km: DEFAULT_BIN_WIDTH_KM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectionConfig {
    pub methods: Vec<Method>,
    /// Values fed to the statistical tests.
    pub stage: FieldStage,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            methods: vec![Method::Subtract, Method::Divide],
            stage: FieldStage::Normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    #[default]
    Viridis,
    Gray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterFormat {
    #[default]
    Png,
    Ppm,
}

impl RasterFormat {
    pub fn extension(self) -> &'static str {
        match self {
            RasterFormat::Png => "png",
            RasterFormat::Ppm => "ppm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Whether `pipeline` renders maps after the comparison.
    pub enabled: bool,
    pub palette: Palette,
    /// Pixels per grid cell along each axis.
    pub scale: u32,
    pub format: RasterFormat,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            enabled: true,
            palette: Palette::Viridis,
            scale: 4,
            format: RasterFormat::Png,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StormFieldConfig {
    pub rows: usize,
    pub cols: usize,
    pub lat0: f64,
    pub lon0: f64,
    pub step_deg: f64,
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub kind: FieldKind,
    pub storm_rate: f64,
    pub storm_radius_km: f64,
    pub storm_amplitude: f64,
    #[serde(default = "default_wet_prob")]
    pub wet_prob: f64,
}

fn default_wet_prob() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthNetworkConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing_km: f64,
    pub link_model: LinkModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default)]
    pub storm_field: Option<StormFieldConfig>,
    /// Where the storm field is written, relative to the output directory.
    #[serde(default = "default_synth_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub network: Option<SynthNetworkConfig>,
}

fn default_synth_output() -> PathBuf {
    PathBuf::from("synth.cng1")
}

fn default_seasons() -> Vec<Season> {
    vec![Season::Jja]
}

fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

fn default_alpha() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn one_or_many<'de, D>(d: D) -> Result<Vec<Season>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Season),
        Many(Vec<Season>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<InputConfig>,
    #[serde(default = "variable_default")]
    pub variable: Variable,
    #[serde(default = "default_seasons", alias = "season", deserialize_with = "one_or_many")]
    pub seasons: Vec<Season>,
    /// Defaults follow the variable: wet-day 95th percentile for
    /// precipitation, 95th for `tmax`, 5th (below) for `tmin`.
    #[serde(default)]
    pub threshold: Option<ThresholdSpec>,
    #[serde(default = "default_true")]
    pub dedup: bool,
    #[serde(default)]
    pub sync: SyncConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub correction: CorrectionConfig,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Mandatory; there is no wall-clock seeding.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub render: RenderConfig,
    /// Directory relative paths are resolved against; the config file's
    /// directory when loaded from disk.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn variable_default() -> Variable {
    Variable::Precip
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

/// What a command needs from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Input,
    Artifacts,
    Compare,
    Synth,
    Pipeline,
    Render,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(vec![format!("cannot read config {}: {e}", path.display())]))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(vec![format!("config {}: {e}", path.display())]))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(t) = o.threads {
            self.threads = Some(t);
        }
        if let Some(out) = &o.out_dir {
            // Taken relative to the working directory, not the config file.
            self.out_dir = if out.is_absolute() {
                out.clone()
            } else {
                std::env::current_dir().map(|d| d.join(out)).unwrap_or_else(|_| out.clone())
            };
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn input_path(&self) -> Option<PathBuf> {
        self.input.as_ref().map(|i| self.resolve(&i.path))
    }

    pub fn threshold_spec(&self) -> ThresholdSpec {
        self.threshold.unwrap_or_else(|| self.variable.default_threshold())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self, needs: Needs) -> Result<(), CliError> {
        let mut errs = Vec::new();
        if self.seed.is_none() {
            errs.push("seed: missing (set `seed` in the config or pass --seed)".to_string());
        }
        if let Some(t) = self.threads {
            if t == 0 {
                errs.push("threads: must be at least 1".to_string());
            }
        }
        let needs_input = matches!(needs, Needs::Input | Needs::Pipeline);
        if needs_input {
            match &self.input {
                None => errs.push("input: missing".to_string()),
                Some(i) => {
                    let p = self.resolve(&i.path);
                    if !p.is_file() {
                        errs.push(format!("input.path: {} does not exist", p.display()));
                    }
                }
            }
        }
        if self.seasons.is_empty() {
            errs.push("seasons: at least one season is required".to_string());
        }
        let mut seen = Vec::new();
        for s in &self.seasons {
            if seen.contains(s) {
                errs.push(format!("seasons: {s} listed twice"));
            }
            seen.push(*s);
        }
        if let Err(e) = self.threshold_spec().validate() {
            errs.push(format!("threshold: {e}"));
        }
        if self.sync.n_shuffles < MIN_SHUFFLES {
            errs.push(format!("sync.n_shuffles: {} < {MIN_SHUFFLES}", self.sync.n_shuffles));
        }
        if let Err(e) = self.sync.params(0).validate() {
            let msg = e.to_string();
            if !msg.contains("n_shuffles") {
                errs.push(format!("sync: {msg}"));
            }
        }
        if self.surrogate.ensemble_size == 0 {
            errs.push("surrogate.ensemble_size: must be at least 1".to_string());
        }
        if !(self.surrogate.bin_width_km > 0.0 && self.surrogate.bin_width_km.is_finite()) {
            errs.push(format!("surrogate.bin_width_km: must be positive, got {}", self.surrogate.bin_width_km));
        }
        if self.metrics.is_empty() {
            errs.push("metrics: at least one metric is required".to_string());
        }
        if self.correction.methods.is_empty() {
            errs.push("correction.methods: at least one method is required".to_string());
        }
        let both = self.correction.methods.contains(&Method::Subtract)
            && self.correction.methods.contains(&Method::Divide);
        if matches!(needs, Needs::Compare | Needs::Pipeline) && !both {
            errs.push("correction.methods: comparison needs both subtract and divide".to_string());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            errs.push(format!("alpha: must lie in (0, 1), got {}", self.alpha));
        }
        if self.render.scale == 0 || self.render.scale > 64 {
            errs.push(format!("render.scale: must lie in 1..=64, got {}", self.render.scale));
        }
        if needs == Needs::Synth {
            match &self.synth {
                None => errs.push("synth: missing".to_string()),
                Some(s) => {
                    if s.storm_field.is_none() && s.network.is_none() {
                        errs.push("synth: nothing to generate (set storm_field and/or network)".to_string());
                    }
                    if let Some(f) = &s.storm_field {
                        if f.rows == 0 || f.cols == 0 {
                            errs.push("synth.storm_field: rows and cols must be positive".to_string());
                        }
                        if !(f.step_deg > 0.0) {
                            errs.push("synth.storm_field.step_deg: must be positive".to_string());
                        }
                        if f.n_days == 0 {
                            errs.push("synth.storm_field.n_days: must be positive".to_string());
                        }
                        if !(f.storm_radius_km > 0.0) {
                            errs.push("synth.storm_field.storm_radius_km: must be positive".to_string());
                        }
                        if !(f.storm_rate >= 0.0) {
                            errs.push("synth.storm_field.storm_rate: must be non-negative".to_string());
                        }
                        if !(0.0..=1.0).contains(&f.wet_prob) {
                            errs.push("synth.storm_field.wet_prob: must lie in [0, 1]".to_string());
                        }
                    }
                    if let Some(n) = &s.network {
                        if n.rows * n.cols < 3 {
                            errs.push("synth.network: needs at least 3 nodes".to_string());
                        }
                        if !(n.spacing_km > 0.0) {
                            errs.push("synth.network.spacing_km: must be positive".to_string());
                        }
                        if let Err(e) = n.link_model.validate() {
                            errs.push(format!("synth.network.link_model: {e}"));
                        }
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errs))
        }
    }
}
