//! `bcgp` command-line interface.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use bcgp_core::localise::PairMaps;
use bcgp_core::synth::{subsample_training, BoundaryMode, Coverage, ScenarioSpec, PAIR_COUNT};
use bcgp_core::{ModelKind, Point, TrainingSet};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, PairList};
use crate::formats::{read_field_csv, read_points_csv, write_mask, ModelFile};
use crate::runner::{
    derive_seed, load_model, model_file, obtain_basis, run_scenarios, write_mask_field, Experiment, ModelLoader,
};

#[derive(Debug, Parser)]
#[command(name = "bcgp", version, about = "Boundary-constrained GP mapping of arrival-time differences")]
pub struct Cli {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Eigenbasis cache file, read when valid and written otherwise.
    #[arg(long, global = true)]
    pub eigencache: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterise the geometry and write `mask.pgm`.
    Rasterize(GridArgs),
    /// Solve for the Laplacian eigenbasis and write the cache plus `eigenvalues.csv`.
    Eig(EigArgs),
    /// Write synthetic ΔT fields (and optional training subsets) per sensor pair.
    Synth(SynthArgs),
    /// Fit models on a training CSV or on synthetic scenario data.
    Fit(FitArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Run every configured scenario.
    Run,
    /// Locate a source from 28 observed ΔT values.
    Localise(LocaliseArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Geometry JSON; the configured or bundled plate otherwise.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// Grid step in mm.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EigArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of eigenpairs.
    #[arg(long)]
    pub m: Option<usize>,
    /// `neumann` or `dirichlet`.
    #[arg(long)]
    pub bc: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct ScenarioArgs {
    /// Training lattice spacing in mm.
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long, default_value = "inline_with_grid")]
    pub boundary_mode: String,
    #[arg(long, default_value = "full")]
    pub coverage: String,
    /// `all` or a comma-separated list of pair indices.
    #[arg(long, default_value = "all")]
    pub pairs: String,
}

impl ScenarioArgs {
    fn pairs(&self) -> Result<Vec<usize>> {
        let list = if self.pairs == "all" {
            PairList::Named("all".into())
        } else {
            PairList::List(self.pairs.split(',').map(|s| s.trim().parse::<usize>()).collect::<Result<_, _>>()?)
        };
        list.resolve()
    }

    fn spec(&self, seed: u64) -> Result<Option<ScenarioSpec>> {
        let Some(spacing) = self.spacing else { return Ok(None) };
        let spec = ScenarioSpec {
            spacing,
            boundary_mode: BoundaryMode::from_name(&self.boundary_mode)
                .with_context(|| format!("unknown boundary mode {:?}", self.boundary_mode))?,
            coverage: Coverage::from_name(&self.coverage).with_context(|| format!("unknown coverage {:?}", self.coverage))?,
            pairs: self.pairs()?,
            seed,
        };
        spec.validate()?;
        Ok(Some(spec))
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// `standard` or `constrained`.
    #[arg(long, default_value = "constrained")]
    pub kind: String,
    /// Training CSV with columns `x_mm,y_mm,dt_s`; otherwise synthetic data
    /// sampled with the scenario options.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Pair index recorded in the model file when fitting from `--train`.
    #[arg(long)]
    pub pair: Option<usize>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with columns `x_mm,y_mm`; every grid cell otherwise.
    #[arg(long)]
    pub points: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocaliseArgs {
    /// Directory holding `model-pair-<k>-<kind>.json` for k = 1..28.
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long, default_value = "constrained")]
    pub kind: String,
    /// CSV with columns `pair,dt_s`.
    #[arg(long)]
    pub observed: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObservedRow {
    pair: usize,
    dt_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LocalisationReport {
    pub x_mm: f64,
    pub y_mm: f64,
    pub misfit: f64,
    pub variance: f64,
    pub cell_index: usize,
}

struct Session {
    config: ExperimentConfig,
    out: PathBuf,
    eigencache: Option<PathBuf>,
}

impl Session {
    fn new(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        let out = cli.out.clone().unwrap_or_else(|| config.base_dir.join(&config.out));
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self { config, out, eigencache: cli.eigencache.clone() })
    }

    fn apply_grid(&mut self, grid: &GridArgs) -> Result<()> {
        if let Some(g) = &grid.geometry {
            ensure!(g.exists(), "geometry file {} does not exist", g.display());
            self.config.geometry = Some(std::path::absolute(g)?);
        }
        if let Some(step) = grid.step {
            self.config.step_mm = step;
        }
        self.config.validate()
    }

    fn cache_path(&self) -> PathBuf {
        self.eigencache.clone().unwrap_or_else(|| self.out.join("eigenbasis.bin"))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut ctx = Session::new(&cli)?;
    match &cli.command {
        Command::Rasterize(grid) => {
            ctx.apply_grid(grid)?;
            let mask = ctx.config.mask()?;
            let path = ctx.out.join("mask.pgm");
            write_mask(&mask, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            println!("{} cells ({} x {}) -> {}", mask.len(), mask.rows(), mask.cols(), path.display());
        }
        Command::Eig(args) => {
            ctx.apply_grid(&args.grid)?;
            if let Some(m) = args.m {
                ctx.config.m = m;
            }
            if let Some(bc) = &args.bc {
                ctx.config.boundary = bc.clone();
            }
            ctx.config.validate()?;
            let mask = ctx.config.mask()?;
            let cache = ctx.cache_path();
            let bc = crate::formats::parse_boundary(&ctx.config.boundary)?;
            let basis = obtain_basis(&mask, bc, ctx.config.m, Some(&cache))?;
            let mut w = csv::Writer::from_path(ctx.out.join("eigenvalues.csv"))?;
            w.write_record(["index", "mu_per_mm2"])?;
            for (j, mu) in basis.eigenvalues().iter().enumerate() {
                w.write_record([(j + 1).to_string(), mu.to_string()])?;
            }
            w.flush()?;
            println!("{} eigenpairs on {} cells -> {}", basis.len(), mask.len(), cache.display());
        }
        Command::Synth(args) => {
            let exp = Experiment::prepare_data(ctx.config.clone())?;
            let spec = args.scenario.spec(ctx.config.seed)?;
            for pair in args.scenario.pairs()? {
                let field = exp.field(pair)?;
                write_mask_field(&ctx.out.join(format!("field-pair-{pair}.csv")), &exp.mask, &field.values)?;
                if let Some(spec) = &spec {
                    let training = subsample_training(&field, &exp.mask, spec)?;
                    crate::formats::write_field_csv(
                        &ctx.out.join(format!("train-pair-{pair}.csv")),
                        training.inputs(),
                        training.targets(),
                    )?;
                }
            }
            println!("wrote fields to {}", ctx.out.display());
        }
        Command::Fit(args) => fit_command(&ctx, args)?,
        Command::Predict(args) => {
            let file = ModelFile::load(&args.model)?;
            let model = load_model(&file, ctx.eigencache.as_deref())?;
            let points = match &args.points {
                Some(p) => read_points_csv(p)?,
                None => match &file.basis {
                    Some(b) => bcgp_core::rasterize(&b.geometry.domain()?, b.step_mm)?.centers(),
                    None => ctx.config.mask()?.centers(),
                },
            };
            let pred = model.predict(&points)?;
            let path = ctx.out.join("predict.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["x_mm", "y_mm", "mean_s", "var_s2"])?;
            for (i, p) in points.iter().enumerate() {
                w.write_record([p.x.to_string(), p.y.to_string(), pred.mean[i].to_string(), pred.variance[i].to_string()])?;
            }
            w.flush()?;
            if pred.clamped > 0 {
                eprintln!("warning: {} negative predictive variances were clamped to zero", pred.clamped);
            }
            println!("{} predictions -> {}", points.len(), path.display());
        }
        Command::Run => {
            ensure!(!ctx.config.scenarios.is_empty(), "the configuration lists no [[scenario]] blocks");
            let cache = ctx.cache_path();
            let exp = Experiment::prepare(ctx.config.clone(), Some(&cache))?;
            let outcomes = run_scenarios(&exp, &ctx.out)?;
            for o in &outcomes {
                println!(
                    "{}: spacing {} mm, {}, {}: nMSE standard {:.3}, constrained {:.3}",
                    o.id,
                    o.spec.spacing,
                    o.spec.boundary_mode.name(),
                    o.spec.coverage.name(),
                    o.mean_nmse(ModelKind::Standard),
                    o.mean_nmse(ModelKind::Constrained)
                );
            }
        }
        Command::Localise(args) => {
            let kind = ModelKind::from_name(&args.kind).with_context(|| format!("unknown model kind {:?}", args.kind))?;
            let mut loader = ModelLoader::new(ctx.eigencache.as_deref());
            let mut models = BTreeMap::new();
            let mut points: Option<Vec<Point>> = None;
            for pair in 1..=PAIR_COUNT {
                let path = args.models.join(format!("model-pair-{pair}-{}.json", kind.name()));
                if !path.exists() {
                    return Err(bcgp_core::Error::MissingModel { pair }.into());
                }
                let file = ModelFile::load(&path)?;
                if points.is_none() {
                    points = Some(match &file.basis {
                        Some(b) => bcgp_core::rasterize(&b.geometry.domain()?, b.step_mm)?.centers(),
                        None => ctx.config.mask()?.centers(),
                    });
                }
                models.insert(pair, loader.load(&file)?);
            }
            let observed = read_observed(&args.observed)?;
            let hit = PairMaps::from_models(&models, points.expect("28 models loaded"))?.localise(&observed)?;
            let report = LocalisationReport {
                x_mm: hit.point.x,
                y_mm: hit.point.y,
                misfit: hit.misfit,
                variance: hit.variance,
                cell_index: hit.index,
            };
            std::fs::write(ctx.out.join("localisation.json"), serde_json::to_string_pretty(&report)?)?;
            println!("{},{}", report.x_mm, report.y_mm);
        }
    }
    Ok(())
}

fn read_observed(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut values = vec![None; PAIR_COUNT];
    for row in r.deserialize() {
        let row: ObservedRow = row?;
        ensure!((1..=PAIR_COUNT).contains(&row.pair), "pair index {} out of range", row.pair);
        values[row.pair - 1] = Some(row.dt_s);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(k, v)| v.with_context(|| format!("no observation for pair {}", k + 1)))
        .collect()
}

fn fit_command(ctx: &Session, args: &FitArgs) -> Result<()> {
    let kind = ModelKind::from_name(&args.kind).with_context(|| format!("unknown model kind {:?}", args.kind))?;
    let cache = ctx.cache_path();
    let exp = match kind {
        ModelKind::Constrained => Experiment::prepare(ctx.config.clone(), Some(&cache))?,
        ModelKind::Standard => Experiment::prepare_data(ctx.config.clone())?,
    };
    let basis_ref = exp.basis_ref();
    if let Some(train) = &args.train {
        let (x, y) = read_field_csv(train)?;
        let training = TrainingSet::new(x, y)?;
        let seed = derive_seed(&[ctx.config.seed, ctx.config.qpso.seed, args.pair.unwrap_or(0) as u64, kind as u64]);
        let model = exp.fit_model(kind, &training, seed)?;
        let name = match args.pair {
            Some(p) => format!("model-pair-{p}-{}.json", kind.name()),
            None => format!("model-{}.json", kind.name()),
        };
        model_file(&model, args.pair, basis_ref).save(&ctx.out.join(&name))?;
        println!("{} -> {}", describe(&model), ctx.out.join(name).display());
        return Ok(());
    }
    let Some(spec) = args.scenario.spec(ctx.config.seed)? else {
        bail!("give either --train <csv> or --spacing <mm> to sample synthetic training data");
    };
    let exp = Arc::new(exp);
    let fitted = spec
        .pairs
        .par_iter()
        .map(|&pair| -> Result<_> {
            let training = subsample_training(&exp.field(pair)?, &exp.mask, &spec)?;
            let seed = derive_seed(&[ctx.config.seed, ctx.config.qpso.seed, spec.seed, pair as u64, kind as u64]);
            Ok((pair, exp.fit_model(kind, &training, seed).with_context(|| format!("pair {pair}"))?))
        })
        .collect::<Result<Vec<_>>>()?;
    for (pair, model) in fitted {
        let path = ctx.out.join(format!("model-pair-{pair}-{}.json", kind.name()));
        model_file(&model, Some(pair), basis_ref.clone()).save(&path)?;
        println!("pair {pair}: {} -> {}", describe(&model), path.display());
    }
    Ok(())
}

fn describe(model: &bcgp_core::FittedModel) -> String {
    let h = model.hyperparams();
    format!(
        "{} sigma_f2={:.4e} lengthscale={:.2} mm noise={:.4e}",
        model.kind().name(),
        h.kernel.sigma_f2(),
        h.kernel.lengthscale(),
        h.noise
    )
}
