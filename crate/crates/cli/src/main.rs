mod output;
mod spec;
mod tables;
mod verify;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nvregret::bounds::{
    bound_sample_complexity, mohri_expected_bound, BoundConfig, BoundVariant, ComplexityScale, Normalization,
};
use nvregret::regret::worst_case_regret;
use nvregret::tuning::{
    kstar_scan, regret_curve, sample_complexity, tune_ewerm, tune_knn, tune_mixture_fixed_k, EwermOptions,
    KStarOptions, MixtureOptions, DEFAULT_N_MAX,
};
use nvregret::{DissimilarityProfile, Error, Policy, RegretOptions, RegretReport, WeightedMode};
use serde_json::{json, Value};

use output::{count, emit, json_bytes, json_num, num, Table, CURVE_HEADER};
use spec::{parse_dissim, PolicyTemplate};

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    pub const VALIDATION: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const VERIFICATION: u8 = 4;

    pub fn validation(msg: impl Into<String>) -> Self {
        Self {
            code: Self::VALIDATION,
            msg: msg.into(),
        }
    }

    pub fn verification(msg: impl Into<String>) -> Self {
        Self {
            code: Self::VERIFICATION,
            msg: msg.into(),
        }
    }

    pub fn io(e: impl fmt::Display) -> Self {
        Self {
            code: 1,
            msg: e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ExactEvaluationInfeasible { .. }
            | Error::QuantizationTooCoarse { .. }
            | Error::BudgetExceeded { .. }
            | Error::TargetNotReached { .. } => Self::INFEASIBLE,
            Error::LinearProgram(_) => 1,
            _ => Self::VALIDATION,
        };
        Self {
            code,
            msg: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "nvregret",
    version,
    about = "Worst-case regret of data-driven newsvendor policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Quantized,
}

#[derive(clap::Args)]
struct Common {
    /// Critical quantile c_u / (c_u + c_o).
    #[arg(long)]
    q: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SearchArgs {
    /// Grid points per branch.
    #[arg(long, default_value_t = 10_001)]
    grid: usize,
    /// Golden-section iterations after the grid.
    #[arg(long, default_value_t = 60)]
    refine: usize,
    /// Evaluation of weighted policies.
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    /// Quantization resolution for `--mode quantized`.
    #[arg(long, default_value_t = nvregret::DEFAULT_RESOLUTION)]
    resolution: f64,
}

impl SearchArgs {
    fn options(&self) -> Result<RegretOptions, CliError> {
        if self.grid < 2 {
            return Err(CliError::validation("grid: must be at least 2"));
        }
        Ok(RegretOptions {
            grid: self.grid,
            refine_iters: self.refine,
            mode: match self.mode {
                Mode::Exact => WeightedMode::Exact,
                Mode::Quantized => WeightedMode::Quantized {
                    resolution: self.resolution,
                },
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TuneMethod {
    Ewerm,
    Knn,
    Kstar,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    Phi,
    Main,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Norm {
    PerSample,
    Unnormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scale {
    MaxCost,
    Overage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Reduction,
    Separable,
    Counting,
    WorstHistory,
    Lemma1,
}

const DEFAULT_TARGETS: &str = "1,0.9,0.75,0.5,0.25,0.1";

#[derive(Subcommand)]
enum Command {
    /// Worst-case regret of one policy.
    Regret {
        #[command(flatten)]
        common: Common,
        /// erm | werm:w=1,2,1 | ewerm:gamma=0.95 | knn:k=17 | os:S=1..k,r=3 | mix:file=<path>
        #[arg(long)]
        policy: String,
        /// const:<zeta>:<n> | drift:<delta>:<n> | comma-separated list | file
        #[arg(long)]
        dissim: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Worst-case regret for each sample size, using prefixes of the profile.
    Curve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: String,
        /// Profile for the largest sample size.
        #[arg(long)]
        dissim: String,
        /// Smallest sample size.
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        /// Largest sample size; defaults to the profile length.
        #[arg(long)]
        n_max: Option<usize>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Parameter tuning: exponential weights, k-NN, effective sample size, or a fixed-k mixture.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: TuneMethod,
        /// Sample size (ewerm, knn).
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Drift per sample (ewerm, knn).
        #[arg(long)]
        delta: Option<f64>,
        /// Profile (kstar, mixture).
        #[arg(long)]
        dissim: Option<String>,
        /// Number of samples used (mixture).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0.01)]
        gamma_step: f64,
    },
    /// Smallest ERM sample size reaching each regret target.
    Complexity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        zeta: f64,
        /// Targets as fractions of the no-data regret q(1-q).
        #[arg(long, default_value = DEFAULT_TARGETS)]
        targets: String,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
    },
    /// General-purpose expected-regret bound for ERM: its value at `--n`, or sample sizes per target.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        zeta: f64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = DEFAULT_TARGETS)]
        targets: String,
        #[arg(long, default_value_t = 10_000_000)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = Variant::Phi)]
        variant: Variant,
        #[arg(long, value_enum, default_value_t = Norm::PerSample)]
        normalization: Norm,
        #[arg(long, value_enum, default_value_t = Scale::MaxCost)]
        scale: Scale,
    },
    /// Reference tables with computed values, reference values and a pass flag per cell.
    Tables {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
        which: u8,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 4 when any cell fails.
        #[arg(long)]
        strict: bool,
    },
    /// Brute-force and Monte Carlo checks of the engine.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of random configurations (suite-specific default when omitted).
        #[arg(long)]
        configs: Option<usize>,
    },
}

fn parse_targets(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::validation(format!("targets: cannot parse `{t}`")))
        })
        .collect()
}

fn report_row(n: usize, r: &RegretReport) -> Vec<String> {
    vec![
        n.to_string(),
        num(r.value),
        num(r.mu0_star),
        r.branch.name().to_string(),
        num(r.tolerance),
    ]
}

fn report_json(r: &RegretReport) -> Value {
    json!({
        "value": json_num(r.value),
        "mu0_star": json_num(r.mu0_star),
        "branch": r.branch.name(),
        "tolerance": json_num(r.tolerance),
        "gap_bound": json_num(r.gap_bound),
        "value_uncertainty": json_num(r.value_uncertainty),
        "near_endpoint": r.near_endpoint,
    })
}

fn d_summary(d: &DissimilarityProfile) -> Value {
    json!({ "n": d.len(), "mean": json_num(d.mean()), "max": json_num(d.max()) })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Regret {
            common,
            policy,
            dissim,
            search,
        } => {
            let d = parse_dissim(&dissim)?;
            let spec = PolicyTemplate::parse(&policy)?.build(d.len())?;
            let p = Policy::new(spec, d.len())?;
            let r = worst_case_regret(&p, common.q, &d, &search.options()?)?;
            let bytes = match common.format {
                Format::Csv => {
                    let mut t = Table::new(&CURVE_HEADER);
                    t.push(report_row(d.len(), &r));
                    t.to_bytes()?
                }
                Format::Json => {
                    let mut v = report_json(&r);
                    v["policy"] = json!(policy);
                    v["q"] = json_num(common.q);
                    v["d_summary"] = d_summary(&d);
                    json_bytes(&v)?
                }
            };
            emit(common.out.as_deref(), &bytes)
        }
        Command::Curve {
            common,
            policy,
            dissim,
            n_min,
            n_max,
            search,
        } => {
            let d = parse_dissim(&dissim)?;
            let n_max = n_max.unwrap_or(d.len());
            if n_min == 0 || n_min > n_max || n_max > d.len() {
                return Err(CliError::validation(format!(
                    "n range: need 1 <= n_min <= n_max <= {}, got {n_min}..{n_max}",
                    d.len()
                )));
            }
            let template = PolicyTemplate::parse(&policy)?;
            // Validate every size up front so errors name the field rather than a row.
            let specs = (n_min..=n_max)
                .map(|n| template.build(n))
                .collect::<Result<Vec<_>, _>>()?;
            let curve = regret_curve(
                |n| specs[n - n_min].clone(),
                common.q,
                |n| d.prefix(n),
                n_min..=n_max,
                &search.options()?,
            )?;
            let bytes = match common.format {
                Format::Csv => {
                    let mut t = Table::new(&CURVE_HEADER);
                    for (n, r) in &curve {
                        t.push(report_row(*n, r));
                    }
                    t.to_bytes()?
                }
                Format::Json => json_bytes(&Value::Array(
                    curve
                        .iter()
                        .map(|(n, r)| {
                            let mut v = report_json(r);
                            v["n"] = json!(n);
                            v
                        })
                        .collect(),
                ))?,
            };
            emit(common.out.as_deref(), &bytes)
        }
        Command::Tune {
            common,
            method,
            n,
            delta,
            dissim,
            k,
            gamma_step,
        } => {
            let need_delta = || delta.ok_or_else(|| CliError::validation("delta: required for this method"));
            let need_dissim = || -> Result<DissimilarityProfile, CliError> {
                parse_dissim(
                    dissim
                        .as_deref()
                        .ok_or_else(|| CliError::validation("dissim: required for this method"))?,
                )
            };
            let bytes = match method {
                TuneMethod::Ewerm | TuneMethod::Knn => {
                    let delta = need_delta()?;
                    let (res, label) = if method == TuneMethod::Ewerm {
                        let opts = EwermOptions {
                            gamma_step,
                            ..EwermOptions::default()
                        };
                        (tune_ewerm(n, common.q, delta, &opts)?, "gamma")
                    } else {
                        (tune_knn(n, common.q, delta, &RegretOptions::default())?, "k")
                    };
                    match common.format {
                        Format::Csv => {
                            let mut t = Table::new(&[label, "value", "uncertainty"]);
                            for p in &res.curve {
                                t.push(vec![num(p.param), num(p.value), num(p.uncertainty)]);
                            }
                            t.to_bytes()?
                        }
                        Format::Json => json_bytes(&json!({
                            "method": label,
                            "best": json_num(res.param),
                            "value": json_num(res.value),
                            "curve": res.curve.iter().map(|p| json!([json_num(p.param), json_num(p.value), json_num(p.uncertainty)])).collect::<Vec<_>>(),
                        }))?,
                    }
                }
                TuneMethod::Kstar => {
                    let d = need_dissim()?;
                    let scan = kstar_scan(d.len(), common.q, &d, &KStarOptions::default())?;
                    match common.format {
                        Format::Csv => {
                            let mut t = Table::new(&["k", "value", "grid_value"]);
                            for (k, v, g) in &scan.curve {
                                t.push(vec![k.to_string(), num(*v), num(*g)]);
                            }
                            t.to_bytes()?
                        }
                        Format::Json => json_bytes(&mixture_json(&scan.best))?,
                    }
                }
                TuneMethod::Mixture => {
                    let d = need_dissim()?;
                    let k = k.ok_or_else(|| CliError::validation("k: required for --method mixture"))?;
                    let sol = tune_mixture_fixed_k(k, common.q, &d, &MixtureOptions::default())?;
                    match common.format {
                        Format::Csv => {
                            let mut t = Table::new(&["rank", "lambda"]);
                            for (r, l) in sol.lambdas.iter().enumerate() {
                                t.push(vec![r.to_string(), num(*l)]);
                            }
                            t.to_bytes()?
                        }
                        Format::Json => json_bytes(&mixture_json(&sol))?,
                    }
                }
            };
            emit(common.out.as_deref(), &bytes)
        }
        Command::Complexity {
            common,
            zeta,
            targets,
            n_max,
        } => {
            let targets = parse_targets(&targets)?;
            let rows = sample_complexity(common.q, zeta, &targets, n_max, &RegretOptions::default())?;
            emit(common.out.as_deref(), &target_rows(&rows, common.format)?)
        }
        Command::Bound {
            common,
            zeta,
            n,
            targets,
            n_max,
            variant,
            normalization,
            scale,
        } => {
            let mut cfg = BoundConfig::new(n.unwrap_or(1), common.q, zeta);
            cfg.variant = match variant {
                Variant::Phi => BoundVariant::AppendixPhiForm,
                Variant::Main => BoundVariant::MainTextForm,
            };
            cfg.normalization = match normalization {
                Norm::PerSample => Normalization::PerSample,
                Norm::Unnormalized => Normalization::Unnormalized,
            };
            cfg.scale = match scale {
                Scale::MaxCost => ComplexityScale::MaxCost,
                Scale::Overage => ComplexityScale::Overage,
            };
            let bytes = if let Some(n) = n {
                let v = mohri_expected_bound(&cfg)?;
                match common.format {
                    Format::Csv => {
                        let mut t = Table::new(&["n", "bound"]);
                        t.push(vec![n.to_string(), num(v)]);
                        t.to_bytes()?
                    }
                    Format::Json => json_bytes(&json!({ "n": n, "bound": json_num(v) }))?,
                }
            } else {
                let rows = bound_sample_complexity(&cfg, zeta, &parse_targets(&targets)?, n_max)?;
                target_rows(&rows, common.format)?
            };
            emit(common.out.as_deref(), &bytes)
        }
        Command::Tables { which, out, strict } => {
            let (table, all_pass) = tables::build(which)?;
            emit(out.as_deref(), &table.to_bytes()?)?;
            if strict && !all_pass {
                return Err(CliError::verification(format!(
                    "table {which}: some cells differ from the reference"
                )));
            }
            Ok(())
        }
        Command::Verify { suite, seed, configs } => verify::run(suite, seed, configs),
    }
}

fn mixture_json(sol: &nvregret::tuning::MixtureSolution) -> Value {
    json!({
        "k": sol.k,
        "value": json_num(sol.value),
        "grid_value": json_num(sol.grid_value),
        "certificate": json_num(sol.certificate),
        "mu0_star": json_num(sol.mu0_star),
        "branch": sol.branch.name(),
        "lambdas": sol.lambdas.iter().map(|l| json_num(*l)).collect::<Vec<_>>(),
    })
}

fn target_rows(rows: &[(f64, Option<usize>)], format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut t = Table::new(&["target", "n"]);
            for (f, n) in rows {
                t.push(vec![num(*f), count(*n)]);
            }
            t.to_bytes()
        }
        Format::Json => json_bytes(&Value::Array(
            rows.iter()
                .map(|(f, n)| json!({ "target": json_num(*f), "n": n, "feasible": n.is_some() }))
                .collect(),
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
