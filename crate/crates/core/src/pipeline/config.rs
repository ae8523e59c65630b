use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::PseudoDepthConfig;
use crate::error::{Error, Result};
use crate::geo::Crs;
use crate::ground_filter::CsfParams;
use crate::ingest::OutlierParams;
use crate::metrics::SsimParams;
use crate::surface::DemStatistic;
use crate::vegmask::VegThresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    PointCloudClassified,
    PointCloudUnclassified,
    DsmDemPair,
    ChmProduct,
}

impl InputKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InputKind::PointCloudClassified => "point_cloud_classified",
            InputKind::PointCloudUnclassified => "point_cloud_unclassified",
            InputKind::DsmDemPair => "dsm_dem_pair",
            InputKind::ChmProduct => "chm_product",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub point_cloud: Option<PathBuf>,
    pub dsm: Option<PathBuf>,
    pub dem: Option<PathBuf>,
    pub chm: Option<PathBuf>,
    pub rgb: Option<PathBuf>,
    pub cloud_mask: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl PathsConfig {
    fn each_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [
            self.point_cloud.as_mut(),
            self.dsm.as_mut(),
            self.dem.as_mut(),
            self.chm.as_mut(),
            self.rgb.as_mut(),
            self.cloud_mask.as_mut(),
            Some(&mut self.output_dir),
        ]
        .into_iter()
        .flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub pixel_size: f64,
    pub dem_statistic: DemStatistic,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            pixel_size: 3.0,
            dem_statistic: DemStatistic::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierConfig {
    pub enabled: bool,
    pub k: usize,
    pub sigma_mult: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        let p = OutlierParams::default();
        OutlierConfig {
            enabled: true,
            k: p.k,
            sigma_mult: p.sigma_mult,
        }
    }
}

impl OutlierConfig {
    pub fn params(&self) -> OutlierParams {
        OutlierParams {
            k: self.k,
            sigma_mult: self.sigma_mult,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TilingConfig {
    pub tile_size: usize,
    pub max_nodata_fraction: f64,
}

impl Default for TilingConfig {
    fn default() -> Self {
        TilingConfig {
            tile_size: 512,
            max_nodata_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub half_widths: Vec<f64>,
    pub histogram_bin: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            half_widths: vec![5.0],
            histogram_bin: 1.0,
        }
    }
}

/// Everything a run needs. Serialized as TOML; every section except `paths`
/// and `input_kind` may be omitted and then takes its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_kind: InputKind,
    /// CRS of inputs that do not carry one (point files, ASCII grids
    /// without a sidecar).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crs: Option<Crs>,
    pub paths: PathsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub outlier: OutlierConfig,
    #[serde(default)]
    pub csf: CsfParams,
    #[serde(default)]
    pub veg: VegThresholds,
    #[serde(default)]
    pub pseudo_depth: PseudoDepthConfig,
    #[serde(default)]
    pub ssim: SsimParams,
    #[serde(default)]
    pub tiling: TilingConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl PipelineConfig {
    /// Config with defaults everywhere except the input kind and paths.
    pub fn new(input_kind: InputKind, paths: PathsConfig) -> Self {
        PipelineConfig {
            input_kind,
            crs: None,
            paths,
            grid: GridConfig::default(),
            outlier: OutlierConfig::default(),
            csf: CsfParams::default(),
            veg: VegThresholds::default(),
            pseudo_depth: PseudoDepthConfig::default(),
            ssim: SsimParams::default(),
            tiling: TilingConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    /// Parses TOML. Relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        for p in cfg.paths.each_mut() {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        let need = |v: &Option<PathBuf>, key: &str| {
            if v.is_none() {
                Err(Error::invalid(format!(
                    "paths.{key} is required for input_kind {}",
                    self.input_kind.as_str()
                )))
            } else {
                Ok(())
            }
        };
        match self.input_kind {
            InputKind::PointCloudClassified => {
                need(&p.point_cloud, "point_cloud")?;
            }
            InputKind::PointCloudUnclassified => {
                need(&p.point_cloud, "point_cloud")?;
                need(&p.rgb, "rgb")?;
            }
            InputKind::DsmDemPair => {
                need(&p.dsm, "dsm")?;
                need(&p.dem, "dem")?;
                need(&p.rgb, "rgb")?;
            }
            InputKind::ChmProduct => need(&p.chm, "chm")?,
        }
        if p.output_dir.as_os_str().is_empty() {
            return Err(Error::invalid("paths.output_dir is required"));
        }
        if matches!(
            self.input_kind,
            InputKind::PointCloudClassified | InputKind::PointCloudUnclassified
        ) && self.crs.is_none()
        {
            return Err(Error::invalid("crs is required for point cloud inputs"));
        }
        self.settings().validate()
    }
}

/// The parameter sections of a config file without paths or input kind, for
/// running single steps. Keys outside these sections are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub crs: Option<Crs>,
    pub grid: GridConfig,
    pub outlier: OutlierConfig,
    pub csf: CsfParams,
    pub veg: VegThresholds,
    pub pseudo_depth: PseudoDepthConfig,
    pub ssim: SsimParams,
    pub tiling: TilingConfig,
    pub eval: EvalConfig,
}

impl Settings {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Settings =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid.pixel_size.is_finite() && self.grid.pixel_size > 0.0) {
            return Err(Error::invalid("grid.pixel_size must be > 0"));
        }
        self.outlier.params().validate()?;
        self.csf.validate()?;
        self.veg.validate()?;
        self.pseudo_depth.validate()?;
        self.ssim.validate()?;
        if self.tiling.tile_size == 0 {
            return Err(Error::invalid("tiling.tile_size must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.tiling.max_nodata_fraction) {
            return Err(Error::invalid("tiling.max_nodata_fraction must lie in [0, 1]"));
        }
        if self.eval.half_widths.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("eval.half_widths must be finite and >= 0"));
        }
        if !(self.eval.histogram_bin.is_finite() && self.eval.histogram_bin > 0.0) {
            return Err(Error::invalid("eval.histogram_bin must be > 0"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

impl PipelineConfig {
    pub fn settings(&self) -> Settings {
        Settings {
            crs: self.crs,
            grid: self.grid,
            outlier: self.outlier,
            csf: self.csf,
            veg: self.veg,
            pseudo_depth: self.pseudo_depth,
            ssim: self.ssim,
            tiling: self.tiling,
            eval: self.eval.clone(),
        }
    }
}
