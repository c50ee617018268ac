mod config;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use shiftdyn::criteria::{
    build_example32_weights, check_subspace_criterion, eval_direct_sum_criterion, eval_forward_criterion, CriterionReport,
    ProductCriterionParams, SubspaceCheckParams, Verdict, DEFAULT_HORIZON, DEFAULT_TOL,
};
use shiftdyn::experiments::{default_suite, run_experiment, ExperimentConfig, ExperimentReport, ExperimentVerdict, DEFAULT_SEED, EXPERIMENT_NAMES};
use shiftdyn::orbit::{compute_orbit, density_report, return_set, transitivity_witness};
use shiftdyn::shift::BackwardIndexConvention;

use config::{
    CriterionConfig, DensityConfig, DirectSumCriterion, ForwardCriterion, OrbitConfig, ReturnSetConfig, SubspaceCriterion,
    WitnessConfig,
};
use table::{to_csv, Tabular};

const EXIT_FAIL: u8 = 1;
const EXIT_UNDECIDED: u8 = 2;
const EXIT_CONFIG: u8 = 64;
const EXIT_CANT_CREATE: u8 = 73;

#[derive(Parser, Debug)]
#[command(name = "shiftdyn", version, about = "Numerical exploration of subspace-hypercyclic weighted shifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(clap::Args, Debug, Clone, Serialize)]
struct Overrides {
    /// JSON config file.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<u64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output directory.
    #[arg(long, global = true, default_value = "reports")]
    out: PathBuf,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    backward_index_convention: Option<ConventionArg>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a weight-product or subspace criterion.
    Criterion,
    /// Compute an orbit with norm and distance tracking.
    Orbit,
    /// Orbit density against a finite target set.
    Density,
    /// Construct a transitivity witness.
    Witness,
    /// Compute and classify a return set.
    Returnset,
    /// Run a named experiment, or `all`.
    Experiment { name: String },
    /// Build and certify the block-weight direct-sum counterexample.
    Example32,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Criterion => "criterion",
            Command::Orbit => "orbit",
            Command::Density => "density",
            Command::Witness => "witness",
            Command::Returnset => "returnset",
            Command::Experiment { .. } => "experiment",
            Command::Example32 => "example32",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
enum ConventionArg {
    #[value(name = "thm12")]
    #[serde(rename = "thm12")]
    Thm12,
    #[value(name = "thm13")]
    #[serde(rename = "thm13")]
    Thm13,
}

impl From<ConventionArg> for BackwardIndexConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Thm12 => BackwardIndexConvention::MirroredBase,
            ConventionArg::Thm13 => BackwardIndexConvention::InversePath,
        }
    }
}

/// Failure modes mapped onto exit codes.
enum CliError {
    Config(String),
    Write(String),
}

impl From<shiftdyn::Error> for CliError {
    fn from(e: shiftdyn::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    overrides: &'a Overrides,
    report: &'a T,
}

struct Ctx<'a> {
    command: &'static str,
    overrides: &'a Overrides,
}

impl Ctx<'_> {
    fn load<T: serde::de::DeserializeOwned>(&self) -> Result<T, CliError> {
        self.load_with(config::parse)
    }

    fn load_tagged<T: config::Tagged>(&self) -> Result<T, CliError> {
        self.load_with(config::parse_tagged)
    }

    fn load_with<T>(&self, parse: impl Fn(&str, &str) -> Result<T, String>) -> Result<T, CliError> {
        let path = self
            .overrides
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("`{}` requires --config", self.command)))?;
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{shown}: {e}")))?;
        parse(&shown, &text).map_err(CliError::Config)
    }

    fn emit<T: Serialize + Tabular>(&self, stem: &str, report: &T) -> Result<(), CliError> {
        let o = self.overrides;
        std::fs::create_dir_all(&o.out).map_err(|e| CliError::Write(format!("{}: {e}", o.out.display())))?;
        let (path, bytes) = match o.format {
            Format::Json => {
                let env = Envelope { command: self.command, overrides: o, report };
                let mut bytes = serde_json::to_vec_pretty(&env).map_err(|e| CliError::Write(e.to_string()))?;
                bytes.push(b'\n');
                (o.out.join(format!("{stem}.json")), bytes)
            }
            Format::Csv => (o.out.join(format!("{stem}.csv")), to_csv(&report.table()).map_err(|e| CliError::Write(e.to_string()))?),
        };
        write_file(&path, &bytes)?;
        println!("{}", path.display());
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Write(format!("{}: {e}", path.display())))
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::SatisfiedToHorizon => 0,
        Verdict::Violated => EXIT_FAIL,
        Verdict::Undecided => EXIT_UNDECIDED,
    }
}

fn experiment_code(v: ExperimentVerdict) -> u8 {
    match v {
        ExperimentVerdict::Pass => 0,
        ExperimentVerdict::Fail => EXIT_FAIL,
        ExperimentVerdict::Undecided | ExperimentVerdict::ExtractionIncomplete => EXIT_UNDECIDED,
    }
}

/// Fail dominates undecided, which dominates pass.
fn combine(codes: impl IntoIterator<Item = u8>) -> u8 {
    codes.into_iter().fold(0, |acc, c| match (acc, c) {
        (EXIT_FAIL, _) | (_, EXIT_FAIL) => EXIT_FAIL,
        (EXIT_UNDECIDED, _) | (_, EXIT_UNDECIDED) => EXIT_UNDECIDED,
        _ => 0,
    })
}

fn horizon_usize(h: Option<u64>) -> Result<Option<usize>, CliError> {
    h.map(|h| usize::try_from(h).map_err(|_| CliError::Config(format!("horizon {h} too large")))).transpose()
}

fn run_criterion(ctx: &Ctx) -> Result<u8, CliError> {
    let o = ctx.overrides;
    let cfg: CriterionConfig = ctx.load_tagged()?;
    let h = horizon_usize(o.horizon)?;
    let product_params = |horizon: Option<usize>, tol: Option<f64>, convention: Option<BackwardIndexConvention>| ProductCriterionParams {
        horizon: h.or(horizon).unwrap_or(DEFAULT_HORIZON),
        tol: o.tol.or(tol).unwrap_or(DEFAULT_TOL),
        convention: o.backward_index_convention.map(Into::into).or(convention).unwrap_or_default(),
    };
    let report: CriterionReport = match cfg {
        CriterionConfig::Forward(ForwardCriterion { shift, subspace, index, iterates, horizon, tol, convention }) => {
            eval_forward_criterion(&shift, &subspace, index, &iterates, &product_params(horizon, tol, convention))?
        }
        CriterionConfig::DirectSum(DirectSumCriterion {
            left,
            right,
            left_subspace,
            right_subspace,
            left_index,
            right_index,
            iterates,
            horizon,
            tol,
            convention,
        }) => {
            let p = product_params(horizon, tol, convention);
            eval_direct_sum_criterion(&left, &right, &left_subspace, &right_subspace, left_index, right_index, &iterates, &p)?
        }
        CriterionConfig::Subspace(SubspaceCriterion { operator, subspace, data, horizon, tol, sample_budget }) => {
            let params = SubspaceCheckParams {
                tol: o.tol.or(tol).unwrap_or(DEFAULT_TOL),
                horizon: h.or(horizon).unwrap_or(DEFAULT_HORIZON),
                sample_budget: sample_budget.unwrap_or(SubspaceCheckParams::default().sample_budget),
            };
            check_subspace_criterion(&operator, &subspace, &data, &params)?
        }
    };
    ctx.emit("criterion", &report)?;
    Ok(verdict_code(report.verdict))
}

fn run_orbit(ctx: &Ctx) -> Result<u8, CliError> {
    let cfg: OrbitConfig = ctx.load()?;
    let len = ctx.overrides.horizon.unwrap_or(cfg.length);
    let trace = compute_orbit(&cfg.operator, &cfg.start, len, &cfg.subspace, &cfg.budget)?;
    ctx.emit("orbit", &trace)?;
    Ok(0)
}

fn run_density(ctx: &Ctx) -> Result<u8, CliError> {
    let cfg: DensityConfig = ctx.load()?;
    let len = ctx.overrides.horizon.unwrap_or(cfg.length);
    let targets: Vec<_> = cfg.targets.samples(usize::MAX)?.into_iter().map(|(_, e)| e).collect();
    let mut trace = compute_orbit(&cfg.operator, &cfg.start, len, &cfg.subspace, &cfg.budget)?;
    let report = density_report(&mut trace, &targets, cfg.epsilon)?;
    ctx.emit("density", &report)?;
    Ok(0)
}

fn run_witness(ctx: &Ctx) -> Result<u8, CliError> {
    let cfg: WitnessConfig = ctx.load()?;
    let n = ctx.overrides.horizon.unwrap_or(cfg.n);
    let w = transitivity_witness(&cfg.operator, &cfg.subspace, &cfg.u, &cfg.v, n)?;
    ctx.emit("witness", &w)?;
    Ok(if w.invariant_ok && w.z_in_subspace { 0 } else { EXIT_FAIL })
}

fn run_returnset(ctx: &Ctx) -> Result<u8, CliError> {
    let cfg: ReturnSetConfig = ctx.load()?;
    let horizon = ctx.overrides.horizon.unwrap_or(cfg.horizon);
    let r = return_set(&cfg.operator, &cfg.subspace, &cfg.u_center, cfg.u_radius, &cfg.v_center, cfg.v_radius, horizon, &cfg.classification)?;
    ctx.emit("returnset", &r)?;
    Ok(0)
}

fn run_example32(ctx: &Ctx) -> Result<u8, CliError> {
    let horizon = ctx.overrides.horizon.unwrap_or(10_000);
    let ex = match build_example32_weights(horizon) {
        Ok(ex) => ex,
        Err(e @ shiftdyn::Error::ConstructionFailed { .. }) => {
            eprintln!("error: {e}");
            return Ok(EXIT_FAIL);
        }
        Err(e) => return Err(e.into()),
    };
    ctx.emit("example32", &ex)?;
    let c = &ex.certificate;
    Ok(combine([verdict_code(c.w_report.verdict), verdict_code(c.a_report.verdict)]))
}

/// Applies `--horizon` and `--tol` where an experiment has such a knob.
fn apply_overrides(cfg: &mut ExperimentConfig, o: &Overrides) -> Result<(), CliError> {
    let h = o.horizon;
    match cfg {
        ExperimentConfig::Projection(c) => {
            if let Some(h) = h {
                c.orbit_length = h;
            }
        }
        ExperimentConfig::Mixing(c) => {
            if let Some(h) = h {
                c.horizon = h;
            }
        }
        ExperimentConfig::CriterionTransfer(c) => {
            if let Some(h) = horizon_usize(h)? {
                c.horizon = h;
            }
            if let Some(t) = o.tol {
                c.tol = t;
            }
        }
        ExperimentConfig::Commutant(c) => {
            if let Some(h) = h {
                c.orbit_length = h;
            }
            if let Some(t) = o.tol {
                c.tol = t;
            }
        }
        ExperimentConfig::CriterionExtraction(c) => {
            if let Some(h) = h {
                c.horizon = h;
            }
        }
        ExperimentConfig::Rolewicz(c) => {
            if let Some(h) = h {
                c.horizon = h;
            }
        }
    }
    Ok(())
}

fn run_one(ctx: &Ctx, mut cfg: ExperimentConfig, seed: u64) -> Result<u8, CliError> {
    apply_overrides(&mut cfg, ctx.overrides)?;
    let start = Instant::now();
    let report: ExperimentReport = run_experiment(&cfg, seed)?;
    eprintln!("{}: {:?} in {:.2?}", report.experiment, report.verdict, start.elapsed());
    ctx.emit(&format!("experiment_{}", report.experiment), &report)?;
    Ok(experiment_code(report.verdict))
}

fn run_experiment_cmd(ctx: &Ctx, name: &str) -> Result<u8, CliError> {
    let seed = ctx.overrides.seed.unwrap_or(DEFAULT_SEED);
    if name == "all" {
        if ctx.overrides.config.is_some() {
            return Err(CliError::Config("`experiment all` runs the default suite and takes no --config".into()));
        }
        let mut codes = Vec::new();
        for cfg in default_suite()? {
            codes.push(run_one(ctx, cfg, seed)?);
        }
        return Ok(combine(codes));
    }
    if !EXPERIMENT_NAMES.contains(&name) {
        return Err(CliError::Config(format!("unknown experiment {name:?}; expected one of {} or all", EXPERIMENT_NAMES.join(", "))));
    }
    let cfg = if ctx.overrides.config.is_some() {
        let cfg: ExperimentConfig = ctx.load_tagged()?;
        if cfg.name() != name {
            return Err(CliError::Config(format!("config is for experiment {:?}, not {name:?}", cfg.name())));
        }
        cfg
    } else {
        ExperimentConfig::default_for(name)?
    };
    run_one(ctx, cfg, seed)
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    if let Some(t) = cli.overrides.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Config(format!("--tol must be positive and finite, got {t}")));
        }
    }
    let ctx = Ctx { command: cli.command.name(), overrides: &cli.overrides };
    match &cli.command {
        Command::Criterion => run_criterion(&ctx),
        Command::Orbit => run_orbit(&ctx),
        Command::Density => run_density(&ctx),
        Command::Witness => run_witness(&ctx),
        Command::Returnset => run_returnset(&ctx),
        Command::Experiment { name } => run_experiment_cmd(&ctx, name),
        Command::Example32 => run_example32(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(CliError::Write(msg)) => {
            eprintln!("cannot write output: {msg}");
            ExitCode::from(EXIT_CANT_CREATE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_orders_codes() {
        assert_eq!(combine([0, 0]), 0);
        assert_eq!(combine([0, EXIT_UNDECIDED]), EXIT_UNDECIDED);
        assert_eq!(combine([EXIT_UNDECIDED, EXIT_FAIL, 0]), EXIT_FAIL);
    }

    #[test]
    fn unknown_flag_is_rejected() {
        assert!(Cli::try_parse_from(["shiftdyn", "orbit", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["shiftdyn", "orbit", "--format", "csv", "--backward-index-convention", "thm13"]).is_ok());
    }
}
