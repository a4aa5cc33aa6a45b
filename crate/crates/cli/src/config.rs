//! Run configuration: a TOML file whose sections map onto the pipeline
//! stages. Dotted keys (`cluster.hd_cut = 18026`) and `[section]` tables are
//! interchangeable.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use scopula::copulas::CopulaFamily;
use scopula::data::StationDataset;
use scopula::marginals::Family;
use scopula::sbvc::{Loss, SBVCConfig};
use scopula::sc::{JointKind, PredictionMode, SCConfig, SCFitOptions};
use scopula::spatial::{BBox, ClusterConfig, GridSpec, VariogramFamily};
use scopula::validation::{CvMethod, CvOptions};

use crate::error::{CliError, CliResult};
use crate::output::{read_text, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Station CSV. Relative paths resolve against the config file.
    pub input: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub variables: Variables,
    #[serde(default)]
    pub marginal: MarginalSection,
    #[serde(default)]
    pub variogram: VariogramSection,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub sc: ScSection,
    #[serde(default)]
    pub sbvc: SbvcSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub interpolate: InterpolateSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variables {
    pub target: String,
    /// Extra SBVC targets after `target`.
    #[serde(default)]
    pub extra_targets: Vec<String>,
    /// Angular covariate in degrees, e.g. wind direction.
    #[serde(default)]
    pub angular: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginalSection {
    pub families: Vec<String>,
}

impl Default for MarginalSection {
    fn default() -> Self {
        MarginalSection { families: ["lognormal", "weibull", "gamma", "exponential"].map(String::from).to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariogramSection {
    pub families: Vec<String>,
    pub bins: usize,
}

impl Default for VariogramSection {
    fn default() -> Self {
        VariogramSection { families: ["exponential", "spherical", "gaussian", "matern"].map(String::from).to_vec(), bins: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub hd_cut: f64,
    pub k: Option<usize>,
    pub r_cut: f64,
}

impl Default for ClusterSection {
    fn default() -> Self {
        let d = ClusterConfig::default();
        ClusterSection { hd_cut: d.hd_cut, k: d.k, r_cut: d.r_cut }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScSection {
    pub epsilon: f64,
    pub p_norm: u32,
    pub n_neighbors: usize,
    pub y_grid_points: usize,
    pub lp_points: usize,
    pub mode: String,
    pub joint: String,
    pub min_station_obs: usize,
    pub uncovered_fallback: bool,
}

impl Default for ScSection {
    fn default() -> Self {
        let d = SCConfig::default();
        ScSection {
            epsilon: d.epsilon,
            p_norm: d.p_norm,
            n_neighbors: d.n_neighbors,
            y_grid_points: d.y_grid_points,
            lp_points: d.lp_points,
            mode: d.mode.to_string(),
            joint: "clayton".into(),
            min_station_obs: d.min_station_obs,
            uncovered_fallback: d.uncovered_fallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbvcSection {
    pub n_iter: usize,
    pub burn_in_frac: f64,
    pub seed: u64,
    pub chains: usize,
    /// `mean` (squared error) or `median` (absolute error).
    pub loss: String,
    pub families: Vec<String>,
    pub tune: bool,
}

impl Default for SbvcSection {
    fn default() -> Self {
        let d = SBVCConfig::default();
        SbvcSection {
            n_iter: d.n_iter,
            burn_in_frac: d.burn_in_frac,
            seed: d.seed,
            chains: 1,
            loss: "mean".into(),
            families: CopulaFamily::ALL.iter().map(|f| format!("{f:?}").to_ascii_lowercase()).collect(),
            tune: d.tune,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// `regular` or `random`.
    pub kind: String,
    /// `[lon_min, lat_min, lon_max, lat_max]`; defaults to the padded
    /// station bounding box.
    pub bbox: Option<[f64; 4]>,
    pub nx: usize,
    pub ny: usize,
    pub n: usize,
    pub seed: u64,
    /// Padding of the default bbox as a fraction of its span.
    pub pad: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { kind: "regular".into(), bbox: None, nx: 50, ny: 50, n: 1000, seed: 1, pad: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolateSection {
    /// `sc`, `sbvc`, `ok` or `idw`.
    pub method: String,
    pub emit_weights: bool,
    pub geojson: bool,
    pub idw_power: f64,
}

impl Default for InterpolateSection {
    fn default() -> Self {
        InterpolateSection { method: "sc".into(), emit_weights: false, geojson: false, idw_power: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub enabled: bool,
    pub k: usize,
    pub seed: u64,
    pub methods: Vec<String>,
    pub refit_variogram: bool,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            enabled: true,
            k: 10,
            seed: 1,
            methods: ["sc:mixture-argmax", "sc:weighted-mode", "sbvc", "ok", "idw"].map(String::from).to_vec(),
            refit_variogram: true,
        }
    }
}

fn parse_list<T: FromStr>(items: &[String], what: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    if items.is_empty() {
        return Err(CliError::validation(format!("{what}: empty list")));
    }
    items.iter().map(|s| s.parse::<T>().map_err(|e| CliError::validation(format!("{what}: {e}")))).collect()
}

/// Which interpolator the `interpolate` stage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sc,
    Sbvc,
    Ok,
    Idw,
}

impl FromStr for Method {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Method> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(Method::Sc),
            "sbvc" => Ok(Method::Sbvc),
            "ok" | "kriging" => Ok(Method::Ok),
            "idw" => Ok(Method::Idw),
            other => Err(CliError::validation(format!("unknown method `{other}` (sc, sbvc, ok, idw)"))),
        }
    }
}

impl RunConfig {
    /// A config with every section at its default.
    pub fn new(input: PathBuf, target: &str) -> RunConfig {
        RunConfig {
            input,
            output_dir: default_output_dir(),
            variables: Variables { target: target.into(), extra_targets: vec![], angular: None },
            marginal: Default::default(),
            variogram: Default::default(),
            cluster: Default::default(),
            sc: Default::default(),
            sbvc: Default::default(),
            grid: Default::default(),
            interpolate: Default::default(),
            validate: Default::default(),
        }
    }

    pub fn from_toml(text: &str) -> CliResult<RunConfig> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
    }

    /// Parse a config file; relative `input` and `output_dir` resolve
    /// against its directory.
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::from_toml(&read_text(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.input.is_relative() {
            cfg.input = base.join(&cfg.input);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, paths excluded so that a moved
    /// config hashes the same.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.input = c.input.file_name().map(PathBuf::from).unwrap_or_default();
        c.output_dir = PathBuf::new();
        sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }

    pub fn targets(&self) -> Vec<&str> {
        std::iter::once(self.variables.target.as_str()).chain(self.variables.extra_targets.iter().map(String::as_str)).collect()
    }

    pub fn method(&self) -> CliResult<Method> {
        self.interpolate.method.parse()
    }

    pub fn marginal_families(&self) -> CliResult<Vec<Family>> {
        parse_list(&self.marginal.families, "marginal.families")
    }

    pub fn variogram_families(&self) -> CliResult<Vec<VariogramFamily>> {
        parse_list(&self.variogram.families, "variogram.families")
    }

    pub fn cluster_config(&self) -> CliResult<ClusterConfig> {
        let c = ClusterConfig { k: self.cluster.k, hd_cut: self.cluster.hd_cut, r_cut: self.cluster.r_cut };
        c.validate()?;
        Ok(c)
    }

    pub fn sc_options(&self) -> CliResult<SCFitOptions> {
        let s = &self.sc;
        let sc = SCConfig {
            epsilon: s.epsilon,
            p_norm: s.p_norm,
            n_neighbors: s.n_neighbors,
            y_grid_points: s.y_grid_points,
            lp_points: s.lp_points,
            mode: s.mode.parse::<PredictionMode>()?,
            min_station_obs: s.min_station_obs,
            uncovered_fallback: s.uncovered_fallback,
            ..SCConfig::default()
        };
        sc.validate()?;
        Ok(SCFitOptions {
            sc,
            cluster: self.cluster_config()?,
            joint: s.joint.parse::<JointKind>()?,
            variogram_families: self.variogram_families()?,
            variogram_bins: self.variogram.bins,
            ..SCFitOptions::default()
        })
    }

    pub fn sbvc_config(&self) -> CliResult<SBVCConfig> {
        let s = &self.sbvc;
        if !(0.0..1.0).contains(&s.burn_in_frac) {
            return Err(CliError::validation(format!("sbvc.burn_in_frac must lie in [0, 1), got {}", s.burn_in_frac)));
        }
        if s.chains == 0 {
            return Err(CliError::validation("sbvc.chains must be at least 1"));
        }
        let loss = s.loss.parse::<Loss>()?;
        Ok(SBVCConfig {
            n_iter: s.n_iter,
            burn_in_frac: s.burn_in_frac,
            seed: s.seed,
            loss,
            tune: s.tune,
            pair_families: parse_list(&s.families, "sbvc.families")?,
            ..SBVCConfig::default()
        })
    }

    pub fn cv_methods(&self) -> CliResult<Vec<CvMethod>> {
        parse_list(&self.validate.methods, "validate.methods")
    }

    pub fn cv_options(&self) -> CliResult<CvOptions> {
        Ok(CvOptions {
            sc: self.sc_options()?,
            sbvc: self.sbvc_config()?,
            idw_power: self.interpolate.idw_power,
            refit_variogram: self.validate.refit_variogram,
            variogram: None,
            variogram_families: self.variogram_families()?,
            variogram_bins: self.variogram.bins,
        })
    }

    fn station_bbox(ds: &StationDataset) -> CliResult<BBox> {
        let pts: Vec<(f64, f64)> = ds.stations.iter().map(|s| s.coords()).collect();
        BBox::around(&pts).ok_or_else(|| CliError::validation("dataset has no stations"))
    }

    pub fn grid_spec(&self, ds: &StationDataset) -> CliResult<GridSpec> {
        let g = &self.grid;
        let bbox = match g.bbox {
            Some([a, b, c, d]) => BBox::new(a, b, c, d)?,
            None => {
                let s = Self::station_bbox(ds)?;
                let (px, py) = ((s.lon_max - s.lon_min).max(0.01) * g.pad, (s.lat_max - s.lat_min).max(0.01) * g.pad);
                BBox::new(s.lon_min - px, s.lat_min - py, s.lon_max + px, s.lat_max + py)?
            }
        };
        match g.kind.as_str() {
            "regular" if g.nx > 0 && g.ny > 0 => Ok(GridSpec::Regular { bbox, nx: g.nx, ny: g.ny }),
            "random" if g.n > 0 => Ok(GridSpec::Random { bbox, n: g.n, seed: g.seed }),
            "regular" | "random" => Err(CliError::validation("grid needs a positive size")),
            other => Err(CliError::validation(format!("grid.kind must be `regular` or `random`, got `{other}`"))),
        }
    }

    /// Checks that need no data.
    pub fn validate(&self) -> CliResult<()> {
        self.method()?;
        self.marginal_families()?;
        self.sc_options()?;
        self.sbvc_config()?;
        if self.validate.enabled {
            self.cv_methods()?;
            if self.validate.k < 2 {
                return Err(CliError::validation("validate.k must be at least 2"));
            }
        }
        if self.variables.extra_targets.len() > 2 {
            return Err(CliError::validation("SBVC takes at most three targets"));
        }
        Ok(())
    }

    /// Checks against the loaded dataset.
    pub fn validate_against(&self, ds: &StationDataset) -> CliResult<()> {
        let mut names: Vec<&str> = self.targets();
        names.extend(self.variables.angular.as_deref());
        for v in names {
            if !ds.variables.iter().any(|x| x == v) {
                return Err(CliError::validation(format!("variable `{v}` not in dataset (have: {})", ds.variables.join(", "))));
            }
        }
        let grid_box = self.grid_spec(ds)?.bbox();
        if !grid_box.intersects(&Self::station_bbox(ds)?) {
            return Err(CliError::validation("grid bbox does not intersect the station bbox"));
        }
        if self.validate.enabled && self.validate.k > ds.stations.len() {
            return Err(CliError::validation(format!(
                "validate.k = {} exceeds the {} stations",
                self.validate.k,
                ds.stations.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_match_tables() {
        let a = RunConfig::from_toml("input = \"x.csv\"\nvariables.target = \"pm25\"\ncluster.hd_cut = 9000.0\n").unwrap();
        let b = RunConfig::from_toml("input = \"x.csv\"\n[variables]\ntarget = \"pm25\"\n[cluster]\nhd_cut = 9000.0\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cluster.hd_cut, 9000.0);
        assert_eq!(a.sc.epsilon, 0.4224);
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = RunConfig::new("x.csv".into(), "pm25");
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.sc.epsilon = 0.5;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.output_dir = "elsewhere".into();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("input = \"x\"\nvariables.target = \"y\"\nsc.epsilonn = 1\n").is_err());
    }

    #[test]
    fn bad_enums_fail_validation() {
        let mut c = RunConfig::new("x.csv".into(), "pm25");
        c.interpolate.method = "spline".into();
        assert!(matches!(c.validate(), Err(CliError::Validation(_))));
        let mut c = RunConfig::new("x.csv".into(), "pm25");
        c.sc.mode = "mean".into();
        assert!(c.validate().is_err());
    }
}
