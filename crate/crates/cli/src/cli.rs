use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use scopula::copulas::CopulaFamily;
use scopula::spatial::{hierarchical_cluster, VariogramFamily, VariogramModel};
use scopula::validation::{simulate_field, two_way_anova, wind_sector, SimConfig};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{OutDir, Table};
use crate::pipeline::{self, Context, CopulaStage};
use crate::plot::{emit_plot_data, PlotKind};

#[derive(Debug, Parser)]
#[command(name = "scopula", version, about = "Copula-based spatial interpolation of skewed fields with missing data")]
pub struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Start from this run config; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Station CSV (`station_id,lon,lat,timestamp,<vars>...`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Target variable.
    #[arg(long)]
    pub variable: Option<String>,
    /// Directory receiving the outputs.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ClusterFlags {
    /// Disc radius and tree cut height, meters.
    #[arg(long)]
    pub hd_cut: Option<f64>,
    /// Cut the dendrogram at exactly this many clusters.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub r_cut: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GridFlags {
    /// `lon_min,lat_min,lon_max,lat_max`.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub bbox: Option<Vec<f64>>,
    /// Regular grid with this many cells per side.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Uniform random points instead of a regular grid.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long)]
    pub grid_seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank marginal families and run the log-normal EM.
    FitMarginal {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<String>>,
    },
    /// Empirical variogram cloud and fitted model.
    Variogram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<String>>,
    },
    /// Hierarchical clustering of the stations.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cluster: ClusterFlags,
    },
    /// Joint copula of (lon, lat, target), or a pair copula with `--with`.
    FitCopula {
        #[command(flatten)]
        common: Common,
        /// Second variable for a pair copula.
        #[arg(long)]
        with: Option<String>,
        /// `clayton` or `cvine`.
        #[arg(long)]
        joint: Option<String>,
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<String>>,
    },
    /// Predict on a grid.
    Interpolate {
        #[command(flatten)]
        common: Common,
        /// `sc`, `sbvc`, `ok` or `idw`.
        #[arg(long)]
        method: Option<String>,
        /// SC combination: `mixture-argmax` or `weighted-mode`.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        joint: Option<String>,
        #[command(flatten)]
        cluster: ClusterFlags,
        #[command(flatten)]
        grid: GridFlags,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        p_norm: Option<u32>,
        #[arg(long)]
        neighbors: Option<usize>,
        /// Write the per-point weight vectors (SC).
        #[arg(long)]
        emit_weights: bool,
        /// Also write a GeoJSON FeatureCollection.
        #[arg(long)]
        geojson: bool,
        /// Further SBVC targets.
        #[arg(long, value_delimiter = ',')]
        extra_targets: Option<Vec<String>>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        burn_in_frac: Option<f64>,
        #[arg(long)]
        idw_power: Option<f64>,
    },
    /// k-fold station cross-validation.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Any of `sc`, `sc:mixture-argmax`, `sc:weighted-mode`, `sbvc`, `ok`, `idw`.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// MH iterations for SBVC.
        #[arg(long)]
        iters: Option<usize>,
        /// Share one variogram across folds instead of refitting.
        #[arg(long)]
        no_refit: bool,
        #[command(flatten)]
        cluster: ClusterFlags,
    },
    /// Two-way ANOVA of the target on wind sector and cluster.
    Anova {
        #[command(flatten)]
        common: Common,
        /// Wind-direction variable in degrees.
        #[arg(long)]
        wind: String,
        #[arg(long, default_value_t = 16)]
        sectors: usize,
        /// `record` (daily values) or `station` (station means).
        #[arg(long, default_value = "record")]
        level: String,
        #[arg(long)]
        no_interaction: bool,
        #[command(flatten)]
        cluster: ClusterFlags,
    },
    /// Synthetic log-normal field with station samples.
    Simulate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        nx: usize,
        #[arg(long, default_value_t = 32)]
        ny: usize,
        #[arg(long, default_value_t = 30)]
        stations: usize,
        #[arg(long, default_value_t = 30)]
        days: usize,
        #[arg(long, default_value_t = 0.0)]
        missing: f64,
        #[arg(long, default_value_t = 0.8)]
        omega: f64,
        #[arg(long, default_value_t = 4.3765)]
        mu: f64,
        #[arg(long, default_value_t = 0.7702)]
        sigma: f64,
        #[arg(long, default_value = "matern")]
        family: String,
        #[arg(long, default_value_t = 8000.0)]
        range: f64,
        #[arg(long, default_value_t = 1.5)]
        kappa: f64,
        #[arg(long, default_value_t = 0.0)]
        nugget: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run every stage from a config file and write a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Plot-ready CSV from earlier outputs.
    PlotData {
        #[arg(long)]
        run_dir: PathBuf,
        /// variogram, acf, em_trace, chain_trace, surface or cv_bars.
        #[arg(long)]
        kind: String,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn base_config(c: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let input = c.input.clone().ok_or_else(|| CliError::validation("--input is required without --config"))?;
            let var = c.variable.clone().ok_or_else(|| CliError::validation("--variable is required without --config"))?;
            let mut cfg = RunConfig::new(input, &var);
            cfg.output_dir = PathBuf::from(".");
            cfg
        }
    };
    if let Some(i) = &c.input {
        cfg.input = i.clone();
    }
    if let Some(v) = &c.variable {
        cfg.variables.target = v.clone();
    }
    if let Some(o) = &c.out_dir {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn apply_cluster(cfg: &mut RunConfig, f: &ClusterFlags) {
    if let Some(h) = f.hd_cut {
        cfg.cluster.hd_cut = h;
    }
    if f.k.is_some() {
        cfg.cluster.k = f.k;
    }
    if let Some(r) = f.r_cut {
        cfg.cluster.r_cut = r;
    }
}

fn apply_grid(cfg: &mut RunConfig, g: &GridFlags) {
    if let Some(b) = &g.bbox {
        cfg.grid.bbox = Some([b[0], b[1], b[2], b[3]]);
    }
    if let Some(r) = g.resolution {
        cfg.grid.kind = "regular".into();
        cfg.grid.nx = r;
        cfg.grid.ny = r;
    }
    if let Some(n) = g.random {
        cfg.grid.kind = "random".into();
        cfg.grid.n = n;
    }
    if let Some(s) = g.grid_seed {
        cfg.grid.seed = s;
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Validate, load the data and run `stages` in order.
fn run_stages(mut cfg: RunConfig, validate: bool, stages: &[fn(&mut Context) -> CliResult<()>]) -> CliResult<Vec<String>> {
    cfg.validate.enabled = validate;
    cfg.validate()?;
    let ds = pipeline::load_dataset(&cfg)?;
    cfg.validate_against(&ds)?;
    let mut ctx = Context::new(&cfg, ds)?;
    for s in stages {
        s(&mut ctx)?;
    }
    Ok(ctx.out.written.iter().map(|f| cfg.output_dir.join(f).display().to_string()).collect())
}

fn report(files: Vec<String>) {
    for f in files {
        println!("wrote {f}");
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::validation(e.to_string()))?;
    }
    match cli.command {
        Command::FitMarginal { common, families } => {
            let mut cfg = base_config(&common)?;
            set(&mut cfg.marginal.families, families);
            report(run_stages(cfg, false, &[pipeline::stage_fit_marginal])?);
        }
        Command::Variogram { common, bins, families } => {
            let mut cfg = base_config(&common)?;
            set(&mut cfg.variogram.bins, bins);
            set(&mut cfg.variogram.families, families);
            report(run_stages(cfg, false, &[pipeline::stage_variogram])?);
        }
        Command::Cluster { common, cluster } => {
            let mut cfg = base_config(&common)?;
            apply_cluster(&mut cfg, &cluster);
            let stages: Vec<fn(&mut Context) -> CliResult<()>> = if cfg.cluster.r_cut > 0.0 {
                vec![pipeline::stage_variogram, pipeline::stage_cluster]
            } else {
                vec![pipeline::stage_cluster]
            };
            report(run_stages(cfg, false, &stages)?);
        }
        Command::FitCopula { common, with, joint, families } => {
            let mut cfg = base_config(&common)?;
            set(&mut cfg.sc.joint, joint);
            match with {
                Some(other) => {
                    cfg.validate()?;
                    let ds = pipeline::load_dataset(&cfg)?;
                    let fams: Vec<CopulaFamily> = match families {
                        Some(f) => f.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
                        None => CopulaFamily::ALL.to_vec(),
                    };
                    let pair = pipeline::fit_variable_pair(&ds, &cfg.variables.target, &other, &fams)?;
                    let mut out = OutDir::create(&cfg.output_dir)?;
                    out.write_json(pipeline::COPULA_JSON, &CopulaStage { joint: None, joint_loglik: None, pair: Some(pair) })?;
                    report(vec![cfg.output_dir.join(pipeline::COPULA_JSON).display().to_string()]);
                }
                None => report(run_stages(cfg, false, &[pipeline::stage_fit_copula])?),
            }
        }
        Command::Interpolate {
            common,
            method,
            mode,
            joint,
            cluster,
            grid,
            epsilon,
            p_norm,
            neighbors,
            emit_weights,
            geojson,
            extra_targets,
            chains,
            iters,
            seed,
            burn_in_frac,
            idw_power,
        } => {
            let mut cfg = base_config(&common)?;
            set(&mut cfg.interpolate.method, method);
            set(&mut cfg.sc.mode, mode);
            set(&mut cfg.sc.joint, joint);
            apply_cluster(&mut cfg, &cluster);
            apply_grid(&mut cfg, &grid);
            set(&mut cfg.sc.epsilon, epsilon);
            set(&mut cfg.sc.p_norm, p_norm);
            set(&mut cfg.sc.n_neighbors, neighbors);
            cfg.interpolate.emit_weights |= emit_weights;
            cfg.interpolate.geojson |= geojson;
            set(&mut cfg.variables.extra_targets, extra_targets);
            set(&mut cfg.sbvc.chains, chains);
            set(&mut cfg.sbvc.n_iter, iters);
            set(&mut cfg.sbvc.seed, seed);
            set(&mut cfg.sbvc.burn_in_frac, burn_in_frac);
            set(&mut cfg.interpolate.idw_power, idw_power);
            report(run_stages(cfg, false, &[pipeline::stage_interpolate])?);
        }
        Command::Validate { common, methods, k, seed, iters, no_refit, cluster } => {
            let mut cfg = base_config(&common)?;
            set(&mut cfg.validate.methods, methods);
            set(&mut cfg.validate.k, k);
            set(&mut cfg.validate.seed, seed);
            set(&mut cfg.sbvc.n_iter, iters);
            cfg.validate.refit_variogram &= !no_refit;
            apply_cluster(&mut cfg, &cluster);
            report(run_stages(cfg, true, &[pipeline::stage_validate])?);
        }
        Command::Anova { common, wind, sectors, level, no_interaction, cluster } => {
            let mut cfg = base_config(&common)?;
            apply_cluster(&mut cfg, &cluster);
            cfg.variables.angular = Some(wind.clone());
            cfg.validate.enabled = false;
            cfg.validate()?;
            if sectors == 0 {
                return Err(CliError::validation("--sectors must be positive"));
            }
            let ds = pipeline::load_dataset(&cfg)?;
            cfg.validate_against(&ds)?;
            let cm = hierarchical_cluster(&ds.stations, &cfg.cluster_config()?, None)?;
            let (iy, iw) = (ds.variable_index(&cfg.variables.target)?, ds.variable_index(&wind)?);
            let mut rows: Vec<(f64, String, String)> = Vec::new();
            for st in &ds.stations {
                let Some(c) = cm.cluster_of(&st.station_id) else { continue };
                let obs = ds.series.get(&st.station_id).map(Vec::as_slice).unwrap_or(&[]);
                match level.as_str() {
                    "record" => {
                        for o in obs {
                            if let (Some(y), Some(w)) = (o.values[iy], o.values[iw]) {
                                rows.push((y, wind_sector(w, sectors).to_string(), c.to_string()));
                            }
                        }
                    }
                    "station" => {
                        let ys: Vec<f64> = obs.iter().filter_map(|o| o.values[iy]).collect();
                        let ws: Vec<f64> = obs.iter().filter_map(|o| o.values[iw]).collect();
                        if ys.is_empty() || ws.is_empty() {
                            continue;
                        }
                        let (s, co) = ws.iter().fold((0.0, 0.0), |a, w| (a.0 + w.to_radians().sin(), a.1 + w.to_radians().cos()));
                        let mean_dir = s.atan2(co).to_degrees();
                        rows.push((ys.iter().sum::<f64>() / ys.len() as f64, wind_sector(mean_dir, sectors).to_string(), c.to_string()));
                    }
                    other => return Err(CliError::validation(format!("--level must be `record` or `station`, got `{other}`"))),
                }
            }
            let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let a: Vec<String> = rows.iter().map(|r| r.1.clone()).collect();
            let b: Vec<String> = rows.iter().map(|r| r.2.clone()).collect();
            let table = two_way_anova(&y, &a, &b, !no_interaction)?;
            let mut out = OutDir::create(&cfg.output_dir)?;
            out.write("anova.csv", table.to_csv().as_bytes())?;
            report(vec![cfg.output_dir.join("anova.csv").display().to_string()]);
        }
        Command::Simulate { seed, nx, ny, stations, days, missing, omega, mu, sigma, family, range, kappa, nugget, out_dir } => {
            let fam: VariogramFamily = family.parse()?;
            let base = SimConfig::default();
            let cfg = SimConfig {
                seed,
                grid: scopula::spatial::GridSpec::Regular { bbox: base.grid.bbox(), nx, ny },
                variogram: VariogramModel::new(fam, nugget, 1.0, range, kappa)?,
                mu,
                sigma,
                n_stations: stations,
                missing_rate: missing,
                n_days: days,
                omega,
                ..base
            };
            let field = simulate_field(&cfg)?;
            let mut out = OutDir::create(&out_dir)?;
            let header = std::iter::once("station_id,lon,lat,timestamp".to_string()).chain(field.dataset.variables.iter().cloned()).collect::<Vec<_>>().join(",");
            out.write("data.csv", format!("# {header}\n{}", field.dataset.to_csv()).as_bytes())?;
            out.write("truth.csv", field.truth_csv().as_bytes())?;
            out.write_json("simulation.json", &cfg)?;
            report(out.written.iter().map(|f| out_dir.join(f).display().to_string()).collect());
        }
        Command::Run { config, out_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            set(&mut cfg.output_dir, out_dir);
            let m = pipeline::run_pipeline(&cfg)?;
            for s in &m.stages {
                println!("{:>14}: {} ({:.2} s)", s.name, s.status, s.seconds);
            }
            println!("wrote {}", cfg.output_dir.join(pipeline::MANIFEST_JSON).display());
        }
        Command::PlotData { run_dir, kind, out } => {
            let table: Table = emit_plot_data(&run_dir, kind.parse::<PlotKind>()?)?;
            match out {
                Some(path) => std::fs::write(&path, table.render())
                    .map_err(|e| CliError::computation(format!("cannot write {}: {e}", path.display())))?,
                None => print!("{}", table.render()),
            }
        }
    }
    Ok(())
}

/// Parse and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
