//! Config-driven end-to-end runs: branch dispatch per input kind, stage
//! attributed errors and a JSON run manifest next to the output CHM.

mod config;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geo::{reproject_rgb_to_utm, reproject_to_utm, resample_max, utm_target_geometry};
use crate::geo::{GridGeometry, Raster, RgbImage};
use crate::ground_filter::{csf_classify, split_by_class};
use crate::ingest::{read_point_file, read_raster_file, read_rgb_file, remove_outliers, write_chmr};
use crate::ingest::PointCloud;
use crate::surface::{apply_cloud_mask, chm_from_products, derive_chm, rasterize_surfaces_with};
use crate::vegmask::{align_mask, classify_vegetation, remove_structures, VegThresholds};

pub use config::{
    EvalConfig, GridConfig, InputKind, OutlierConfig, PathsConfig, PipelineConfig, Settings,
    TilingConfig,
};

pub const CHM_FILE: &str = "chm.chmr";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
pub const TOOL_NAME: &str = "chmkit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub input_kind: InputKind,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub stages: Vec<String>,
    pub output_grid: GridGeometry,
    pub valid_cells: usize,
    pub outputs: Vec<FileDigest>,
    /// The only field that differs between identical runs.
    pub created_utc: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub chm: Raster,
    pub manifest: RunManifest,
    pub chm_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(role: &str, path: &Path) -> Result<FileDigest> {
    Ok(FileDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: sha256_hex(&std::fs::read(path)?),
    })
}

/// Records stage names and wraps failures with the stage that raised them.
#[derive(Default)]
struct Stages(Vec<&'static str>);

impl Stages {
    fn run<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        self.0.push(name);
        f().map_err(|e| Error::Stage {
            stage: name,
            source: Box::new(e),
        })
    }
}

/// Files created by the current run; removed on drop unless committed.
struct OutputGuard {
    files: Vec<PathBuf>,
    created_dir: Option<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = if dir.exists() {
            None
        } else {
            std::fs::create_dir_all(dir)?;
            Some(dir.to_path_buf())
        };
        Ok(OutputGuard {
            files: Vec::new(),
            created_dir,
            committed: false,
        })
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        self.files.push(path.to_path_buf());
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        if let Some(d) = &self.created_dir {
            let _ = std::fs::remove_dir(d);
        }
    }
}

/// Puts a CHM on the output UTM grid. A raster already in the target zone at
/// the target pixel size passes through unchanged; one in the target zone at
/// another pixel size is max-aggregated; anything else is reprojected.
pub fn to_output_grid(chm: &Raster, pixel_size: f64) -> Result<Raster> {
    let g = chm.geometry();
    let target = utm_target_geometry(g, pixel_size)?;
    if target.crs() != g.crs() {
        return reproject_to_utm(chm, pixel_size);
    }
    if (g.pixel_size() - pixel_size).abs() <= 1e-9 * pixel_size {
        return Ok(chm.clone());
    }
    resample_max(chm, &target)
}

/// Vegetation mask from `rgb` (reprojected when its CRS differs) aligned to
/// `target`.
pub fn vegetation_mask(rgb: &RgbImage, target: &GridGeometry, veg: &VegThresholds) -> Result<Raster> {
    let rgb = if rgb.geometry().crs() == target.crs() {
        rgb.clone()
    } else {
        reproject_rgb_to_utm(rgb, target.pixel_size())?
    };
    align_mask(&classify_vegetation(&rgb, veg), target)
}

/// Zeroes non-vegetation heights of `chm` using an RGB image.
pub fn mask_structures(chm: &Raster, rgb: &RgbImage, veg: &VegThresholds) -> Result<Raster> {
    remove_structures(chm, &vegetation_mask(rgb, chm.geometry(), veg)?)
}

/// Sets cells flagged cloudy in `mask` (any grid in the same CRS) to nodata.
pub fn mask_clouds(chm: &Raster, mask: &Raster) -> Result<Raster> {
    apply_cloud_mask(chm, &align_mask(mask, chm.geometry())?)
}

/// Grid used to rasterize a point cloud: the covering grid of its bounds.
pub fn point_grid(pc: &PointCloud, pixel_size: f64) -> Result<GridGeometry> {
    if pc.is_empty() {
        return Err(Error::invalid("point cloud is empty"));
    }
    let b = pc.bounds();
    GridGeometry::covering_points(b.min_x, b.min_y, b.max_x, b.max_y, pixel_size, pc.crs())
}

fn read_cloud(path: &Path, cfg: &PipelineConfig) -> Result<PointCloud> {
    let crs = cfg
        .crs
        .ok_or_else(|| Error::invalid("crs is required for point cloud inputs"))?;
    read_point_file(path, crs)
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::invalid(format!("paths.{key} is required")))
}

/// Runs the branch selected by `cfg.input_kind`, writes [`CHM_FILE`] and
/// [`RUN_MANIFEST_FILE`] into the output directory and returns both. On
/// failure nothing written by this run is left behind.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let paths = &cfg.paths;
    let mut st = Stages::default();
    let mut inputs = Vec::new();

    let native = match cfg.input_kind {
        InputKind::PointCloudClassified | InputKind::PointCloudUnclassified => {
            let path = required(&paths.point_cloud, "point_cloud")?;
            inputs.push(("point_cloud", path));
            let mut pc = st.run("read_point_cloud", || read_cloud(path, cfg))?;
            if cfg.outlier.enabled {
                pc = st.run("remove_outliers", || {
                    remove_outliers(&pc, cfg.outlier.k, cfg.outlier.sigma_mult)
                })?;
            }
            let grid = st.run("grid", || point_grid(&pc, cfg.grid.pixel_size))?;
            let (ground, canopy) = if cfg.input_kind == InputKind::PointCloudClassified {
                st.run("split_by_class", || {
                    let split = split_by_class(&pc)?;
                    let canopy = split.ground.merged(&split.vegetation)?;
                    Ok((split.ground, canopy))
                })?
            } else {
                let labels = st.run("csf_classify", || csf_classify(&pc, &cfg.csf))?;
                (pc.select(labels.as_slice()), pc.clone())
            };
            let pair = st.run("rasterize", || {
                rasterize_surfaces_with(&ground, &canopy, &grid, cfg.grid.dem_statistic)
            })?;
            let chm = st.run("derive_chm", || derive_chm(&pair))?;
            if cfg.input_kind == InputKind::PointCloudUnclassified {
                let rgb_path = required(&paths.rgb, "rgb")?;
                inputs.push(("rgb", rgb_path));
                let rgb = st.run("read_rgb", || read_rgb_file(rgb_path))?;
                st.run("remove_structures", || mask_structures(&chm, &rgb, &cfg.veg))?
            } else {
                chm
            }
        }
        InputKind::DsmDemPair => {
            let dsm_path = required(&paths.dsm, "dsm")?;
            let dem_path = required(&paths.dem, "dem")?;
            let rgb_path = required(&paths.rgb, "rgb")?;
            inputs.extend([("dsm", dsm_path), ("dem", dem_path), ("rgb", rgb_path)]);
            let (dsm, dem) = st.run("read_rasters", || {
                Ok((
                    read_raster_file(dsm_path, cfg.crs)?,
                    read_raster_file(dem_path, cfg.crs)?,
                ))
            })?;
            let chm = st.run("chm_from_products", || chm_from_products(&dsm, &dem))?;
            let rgb = st.run("read_rgb", || read_rgb_file(rgb_path))?;
            st.run("remove_structures", || mask_structures(&chm, &rgb, &cfg.veg))?
        }
        InputKind::ChmProduct => {
            let chm_path = required(&paths.chm, "chm")?;
            inputs.push(("chm", chm_path));
            let chm = st.run("read_rasters", || read_raster_file(chm_path, cfg.crs))?;
            match &paths.rgb {
                Some(rgb_path) => {
                    inputs.push(("rgb", rgb_path));
                    let rgb = st.run("read_rgb", || read_rgb_file(rgb_path))?;
                    st.run("remove_structures", || mask_structures(&chm, &rgb, &cfg.veg))?
                }
                None => chm,
            }
        }
    };

    let native = match &paths.cloud_mask {
        Some(mask_path) => {
            inputs.push(("cloud_mask", mask_path));
            st.run("cloud_mask", || {
                mask_clouds(&native, &read_raster_file(mask_path, cfg.crs)?)
            })?
        }
        None => native,
    };

    let chm = st.run("reproject", || to_output_grid(&native, cfg.grid.pixel_size))?;

    let mut stages: Vec<String> = st.0.iter().map(|s| s.to_string()).collect();
    stages.push("write_outputs".to_string());
    st.run("write_outputs", || {
        let input_digests = inputs
            .iter()
            .map(|(role, p)| digest_file(role, p))
            .collect::<Result<Vec<_>>>()?;
        let config_sha256 = sha256_hex(cfg.to_toml()?.as_bytes());
        let mut guard = OutputGuard::new(&paths.output_dir)?;
        let chm_path = paths.output_dir.join(CHM_FILE);
        let manifest_path = paths.output_dir.join(RUN_MANIFEST_FILE);
        let chm_bytes = write_chmr(&chm);
        guard.write(&chm_path, &chm_bytes)?;
        let manifest = RunManifest {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            input_kind: cfg.input_kind,
            config_sha256,
            inputs: input_digests,
            stages,
            output_grid: *chm.geometry(),
            valid_cells: chm.valid_count(),
            outputs: vec![FileDigest {
                role: "chm".to_string(),
                path: chm_path.display().to_string(),
                sha256: sha256_hex(&chm_bytes),
            }],
            created_utc: chrono::DateTime::<chrono::Utc>::from(std::time::SystemTime::now())
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::invalid(format!("manifest: {e}")))?;
        guard.write(&manifest_path, json.as_bytes())?;
        guard.committed = true;
        Ok(PipelineOutput {
            chm,
            manifest,
            chm_path,
            manifest_path,
        })
    })
}
