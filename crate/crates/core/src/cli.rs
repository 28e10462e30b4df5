//! Command-line front end: `simulate`, `filter`, `estimate`, `mc`, `check`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimators::{mle, psi_estimator, EstimateReport, KernelSpec, Method};
use crate::filter::run_filter;
use crate::io::sha256_hex;
use crate::montecarlo::{run_plan, Check, CheckOutcome, ExperimentPlan, PlanResult};
use crate::signal::SignalSpec;
use crate::simulator::{simulate, ModelConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "oufreq", version, about = "Frequency estimation for an OU-modulated periodic signal")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one path and write `path.csv` (t, X, Y).
    Simulate(Common),
    /// Run the filter on a simulated path and write `filter.csv`.
    Filter(Common),
    /// Estimate the frequency from one simulated path.
    Estimate(Common),
    /// Run the Monte Carlo experiment described by the `experiment` section.
    Mc(Common),
    /// Run the riccati-rate, fisher-limit and lan-residual checks.
    Check(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Override a configuration entry, e.g. `model.epsilon=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Mle]
}

/// The experiment section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "ExperimentSection::default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "ExperimentSection::default_replications")]
    pub replications: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default = "ExperimentSection::default_contrast_theta")]
    pub contrast_theta: f64,
    #[serde(default = "ExperimentSection::default_refinement")]
    pub step_refinement: usize,
}

impl ExperimentSection {
    fn default_epsilons() -> Vec<f64> {
        vec![0.02]
    }
    fn default_replications() -> usize {
        100
    }
    fn default_contrast_theta() -> f64 {
        1.1
    }
    fn default_refinement() -> usize {
        1
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            epsilons: Self::default_epsilons(),
            replications: Self::default_replications(),
            methods: default_methods(),
            checks: Vec::new(),
            contrast_theta: Self::default_contrast_theta(),
            step_refinement: Self::default_refinement(),
        }
    }
}

/// Contents of the `--config` file. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub signal: SignalSpec,
    /// Frequency at which `filter` runs; the true frequency when null.
    #[serde(default)]
    pub filter_theta: Option<f64>,
    /// Estimators run by `estimate`.
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            signal: SignalSpec::default(),
            filter_theta: None,
            methods: default_methods(),
            experiment: ExperimentSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Applies `key=value` overrides; dotted keys address nested entries and
    /// must already exist. Values are parsed as JSON, falling back to strings.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut tree = serde_json::to_value(&self)?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("override `{item}` is not key=value")))?;
            let mut node = &mut tree;
            for part in key.split('.') {
                node = node
                    .as_object_mut()
                    .and_then(|m| m.get_mut(part))
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown configuration key `{key}`")))?;
            }
            *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        }
        Ok(serde_json::from_value(tree)?)
    }

    /// Model with the step resolved.
    pub fn model(&self) -> ModelConfig {
        self.model.clone().resolve_step(&self.signal)
    }

    pub fn plan(&self) -> ExperimentPlan {
        let e = &self.experiment;
        ExperimentPlan {
            base: self.model(),
            signal: self.signal.clone(),
            epsilons: e.epsilons.clone(),
            replications: e.replications,
            methods: e.methods.clone(),
            checks: e.checks.clone(),
            contrast_theta: e.contrast_theta,
            step_refinement: e.step_refinement,
        }
    }

    pub fn sha256(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidSignal(_)
        | Error::InvalidConfig(_)
        | Error::OutOfRange { .. }
        | Error::Json(_)
        | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

struct Output {
    dir: PathBuf,
    comment: String,
}

impl Output {
    fn new(dir: &Path, config: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            comment: format!("config_sha256={} seed={}", config.sha256(), config.model.seed),
        })
    }

    /// Writes `name` directly inside the output directory.
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        debug_assert!(!name.contains('/') && !name.contains(".."));
        let p = self.dir.join(name);
        std::fs::write(&p, contents)?;
        Ok(p)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let body = serde_json::to_string_pretty(value)?;
        self.write(name, &format!("# {}\n{}\n", self.comment, body))
    }
}

/// Plans run by the `check` subcommand, built from the configured model.
pub fn check_plans(config: &RunConfig) -> Vec<ExperimentPlan> {
    let base = config.model();
    let plan = |eps: Vec<f64>, reps: usize, check: Check| ExperimentPlan {
        signal: config.signal.clone(),
        ..ExperimentPlan::new(base.clone(), eps, reps).with_checks(&[check])
    };
    vec![
        plan(vec![0.08, 0.04, 0.02], 1, Check::RiccatiRate),
        plan(vec![0.01], 20, Check::FisherLimit),
        plan(vec![0.08, 0.04, 0.02], 100, Check::LanResidual),
    ]
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let cfg = match &common.config {
        Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    let mut cfg = cfg.with_overrides(&common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.model.seed = seed;
    }
    Ok(cfg)
}

fn estimate_one(
    method: Method,
    obs: &crate::simulator::Observations,
    model: &ModelConfig,
    spec: &SignalSpec,
) -> Result<EstimateReport> {
    match method {
        Method::Mle => mle(obs, model, spec),
        Method::KernelPsi => psi_estimator(obs, model, spec, &KernelSpec::optimal(model.epsilon)),
        Method::LimitOracle => Err(Error::InvalidConfig(
            "limit-oracle needs noise-free input and is not available for `estimate`".into(),
        )),
    }
}

fn print_checks(checks: &[CheckOutcome]) {
    for c in checks {
        println!(
            "{:<14} {}  {}",
            c.check.as_str(),
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
        );
    }
}

fn write_plan(out: &Output, result: &PlanResult, plan: &ExperimentPlan) -> Result<()> {
    for (k, &eps) in plan.epsilons.iter().enumerate() {
        if !plan.methods.is_empty() {
            out.write(&format!("estimates_eps{k}.csv"), &result.estimates_csv(eps, &out.comment))?;
        }
        out.write(&format!("diagnostics_eps{k}.csv"), &result.diagnostics_csv(eps, &out.comment))?;
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        summaries: &'a [crate::montecarlo::LevelSummary],
        checks: &'a [CheckOutcome],
    }
    out.write_json(
        "summary.json",
        &Summary {
            summaries: &result.summaries,
            checks: &result.checks,
        },
    )?;
    Ok(())
}

fn execute(command: Command) -> Result<i32> {
    let (common, kind) = match command {
        Command::Simulate(c) => (c, "simulate"),
        Command::Filter(c) => (c, "filter"),
        Command::Estimate(c) => (c, "estimate"),
        Command::Mc(c) => (c, "mc"),
        Command::Check(c) => (c, "check"),
    };
    let cfg = load_config(&common)?;
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Error::InvalidConfig("--workers must be positive".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let model = cfg.model();
    let spec = &cfg.signal;
    match kind {
        "simulate" => {
            let out = Output::new(&common.out, &cfg)?;
            let path = simulate(&model, spec)?;
            let p = out.write("path.csv", &path.to_csv(&out.comment))?;
            println!("wrote {}", p.display());
        }
        "filter" => {
            let theta = cfg.filter_theta.unwrap_or(model.theta);
            model.validate(spec)?;
            model.check_candidate(theta)?;
            let out = Output::new(&common.out, &cfg)?;
            let path = simulate(&model, spec)?;
            let trace = run_filter(theta, &path.obs, &model, spec, true)?;
            let p = out.write("filter.csv", &trace.to_csv(&out.comment))?;
            println!("wrote {}", p.display());
        }
        "estimate" => {
            model.validate(spec)?;
            let out = Output::new(&common.out, &cfg)?;
            let path = simulate(&model, spec)?;
            let reports: Vec<EstimateReport> = cfg
                .methods
                .iter()
                .map(|&m| estimate_one(m, &path.obs, &model, spec))
                .collect::<Result<_>>()?;
            let mut csv = String::new();
            crate::io::push_comment(&mut csv, &out.comment);
            csv.push_str(EstimateReport::CSV_HEADER);
            csv.push('\n');
            for r in &reports {
                csv.push_str(&r.csv_row());
                csv.push('\n');
                println!(
                    "{}: theta_hat = {:.10} (se {:.3e}, converged {})",
                    r.method.as_str(),
                    r.theta_hat,
                    r.se_hat,
                    r.is_clean()
                );
            }
            out.write("estimate.csv", &csv)?;
            out.write_json("estimate.json", &reports)?;
        }
        "mc" => {
            let plan = cfg.plan();
            plan.validate()?;
            let out = Output::new(&common.out, &cfg)?;
            let result = run_plan(&plan)?;
            write_plan(&out, &result, &plan)?;
            print_checks(&result.checks);
            if !result.all_passed() {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        "check" => {
            let plans = check_plans(&cfg);
            for p in &plans {
                p.validate()?;
            }
            let out = Output::new(&common.out, &cfg)?;
            let mut outcomes = Vec::new();
            for p in &plans {
                outcomes.extend(run_plan(p)?.checks);
            }
            print_checks(&outcomes);
            out.write_json("check.json", &outcomes)?;
            if !outcomes.iter().all(|c| c.pass) {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        _ => unreachable!(),
    }
    Ok(EXIT_OK)
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
