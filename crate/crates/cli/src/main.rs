//! `sasel` — sensor/actuator selection for Lipschitz nonlinear networks.
//!
//! Subcommands: `gen` draws a seeded benchmark network, `solve` runs one
//! of the selection solvers on a model file, `validate` simulates the
//! observer recovered by a solve report, `certify` decides the
//! theorem-of-alternatives for one sensor pattern, and `experiment`
//! drives the comparison studies. Exit code 2 marks a certified
//! infeasible design; 1 is any other failure.

mod experiments;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use sasel_core::bench_gen::{generate_network, NetworkInstance};
use sasel_core::bnb::{exhaustive_oracle, se_bnb, standard_bnb, BnbStatus, SolveReport};
use sasel_core::builders::misdp::{build_ssp, Bounds, Logistic};
use sasel_core::certify::{exclusivity_check, solve_alternative, AltOutcome, Exclusivity};
use sasel_core::l1::{reweighted_l1, Grouping, L1Options};
use sasel_core::model::{NdsModel, SensorConfig};
use sasel_core::sim::{simulate_observer, SimOptions};
use sasel_core::CoreError;

#[derive(Parser)]
#[command(name = "sasel", version, about = "Minimal sensor/actuator selection for Lipschitz nonlinear networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMode {
    /// Structure-exploiting branch-and-bound.
    Se,
    /// Standard branch-and-bound on the full envelope formulation.
    Standard,
    /// Exhaustive enumeration (small problems only).
    Oracle,
    /// Reweighted group-l1 relaxation with polish.
    L1,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupingArg {
    Measurement,
    Node,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded benchmark network instance.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve the sensor selection problem on a model file.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "se")]
        mode: SolveMode,
        /// Optimality-gap tolerance.
        #[arg(long, default_value_t = 1e-4)]
        epsf: f64,
        /// Branching budget (unlimited when absent).
        #[arg(long)]
        max_branch: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Require at least this many active measurements.
        #[arg(long)]
        min_active: Option<usize>,
        /// Allow at most this many active measurements.
        #[arg(long)]
        max_active: Option<usize>,
        /// Symmetric big-M bound on the gain proxy.
        #[arg(long, default_value_t = 1e3)]
        big_m: f64,
        /// Stream per-node JSON log lines to stderr.
        #[arg(long)]
        log: bool,
        // Reweighted-l1 parameters (mode = l1).
        #[arg(long, default_value_t = 0.1)]
        epsw: f64,
        #[arg(long, default_value_t = 1e-4)]
        kappa: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, value_enum, default_value = "measurement")]
        grouping: GroupingArg,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Simulate the observer recovered by a solve report.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trajectory CSV destination.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Decide the theorem-of-alternatives for one sensor pattern.
    Certify {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated 0/1 per measurement, or "all"/"none".
        #[arg(long)]
        sensors: String,
        /// Override the Lipschitz constant as eta * sqrt(nodes).
        #[arg(long)]
        eta: Option<f64>,
        /// Strictness constant shared by both sides.
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment grid described by a spec file.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for tables and reports.
        #[arg(short, long)]
        out: PathBuf,
        /// Also write (x, y, series) triples for plotting.
        #[arg(long)]
        plot_data: bool,
    },
}

/// A model file is either a generated instance (with provenance and the
/// nonlinearity parameters) or a bare model.
enum ModelFile {
    Instance(NetworkInstance),
    Bare(NdsModel),
}

impl ModelFile {
    fn load(path: &PathBuf) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        if let Ok(inst) = NetworkInstance::from_json(&text) {
            return Ok(ModelFile::Instance(inst));
        }
        NdsModel::from_json(&text)
            .map(ModelFile::Bare)
            .map_err(|e| format!("{}: not an instance or model file ({e})", path.display()))
    }

    fn model(&self) -> &NdsModel {
        match self {
            ModelFile::Instance(i) => &i.model,
            ModelFile::Bare(m) => m,
        }
    }
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_sensor_flags(s: &str, ny: usize) -> Result<Vec<bool>, String> {
    match s {
        "all" => Ok(vec![true; ny]),
        "none" => Ok(vec![false; ny]),
        _ => {
            let flags: Result<Vec<bool>, String> = s
                .split(',')
                .map(|t| match t.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(format!("sensor flag must be 0 or 1, got {other:?}")),
                })
                .collect();
            let flags = flags?;
            if flags.len() != ny {
                return Err(format!("expected {ny} sensor flags, got {}", flags.len()));
            }
            Ok(flags)
        }
    }
}

fn build_logistic(ny: usize, min_active: Option<usize>, max_active: Option<usize>) -> Logistic {
    let mut l = Logistic::none(ny);
    if let Some(k) = min_active {
        l = l.and(&Logistic::min_active(ny, k));
    }
    if let Some(k) = max_active {
        l = l.and(&Logistic::max_active(ny, k));
    }
    l
}

fn cmd_solve(
    model: &PathBuf,
    mode: SolveMode,
    epsf: f64,
    max_branch: Option<usize>,
    seed: u64,
    min_active: Option<usize>,
    max_active: Option<usize>,
    big_m: f64,
    log: bool,
    epsw: f64,
    kappa: f64,
    max_iter: usize,
    grouping: GroupingArg,
    out: &Option<PathBuf>,
) -> Result<ExitCode, String> {
    let m = ModelFile::load(model)?;
    let m = m.model();
    if mode == SolveMode::L1 {
        let opts = L1Options {
            eps_w: epsw,
            kappa_w: kappa,
            max_iter,
            grouping: match grouping {
                GroupingArg::Measurement => Grouping::Measurement,
                GroupingArg::Node => Grouping::Node,
            },
            costs: None,
        };
        return match reweighted_l1(m, &opts) {
            Ok(rep) => {
                let feasible = rep.polish.feasible;
                let text = serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?;
                write_or_print(out, &text)?;
                Ok(if feasible { ExitCode::SUCCESS } else { ExitCode::from(2) })
            }
            Err(CoreError::Infeasible { context }) => {
                eprintln!("infeasible: {context}");
                Ok(ExitCode::from(2))
            }
            Err(e) => Err(e.to_string()),
        };
    }

    let ny = m.ny();
    let logistic = build_logistic(ny, min_active, max_active);
    let p = build_ssp(m, &vec![1.0; ny], &logistic, &Bounds::BigM(big_m))
        .map_err(|e| e.to_string())?;
    let report: SolveReport = match mode {
        SolveMode::Se => se_bnb(&p, epsf, max_branch, seed),
        SolveMode::Standard => standard_bnb(&p, epsf, max_branch, seed),
        SolveMode::Oracle => exhaustive_oracle(&p).map_err(|e| e.to_string())?,
        SolveMode::L1 => unreachable!(),
    };
    if log {
        for line in &report.node_log {
            eprintln!("{}", serde_json::to_string(line).map_err(|e| e.to_string())?);
        }
    }
    let infeasible = report.status == BnbStatus::Infeasible;
    let text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    write_or_print(out, &text)?;
    Ok(if infeasible { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_validate(
    model: &PathBuf,
    report: &PathBuf,
    t: f64,
    dt: f64,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<ExitCode, String> {
    let mf = ModelFile::load(model)?;
    let m = mf.model();
    let text = fs::read_to_string(report).map_err(|e| format!("{}: {e}", report.display()))?;
    let rep: SolveReport =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", report.display()))?;
    let active = rep.active.ok_or("the report carries no activation pattern")?;
    let gain = rep.gain.ok_or("the report carries no recovered gain")?;
    if gain.gain.nrows() != m.nx() || gain.gain.ncols() != m.ny() {
        return Err("validation expects an observer gain (n_x by n_y)".into());
    }
    let sensors = SensorConfig::from_measurements(&active, &m.node_outputs);
    if m.ng() > 0 && !matches!(mf, ModelFile::Instance(_)) {
        return Err("a nonlinear bare model has no nonlinearity definition; \
                    pass the generated instance file"
            .into());
    }
    let f = |x: &DVector<f64>| match &mf {
        ModelFile::Instance(inst) => inst.nonlinearity(x),
        ModelFile::Bare(_) => DVector::zeros(0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = DVector::from_fn(m.nx(), |_, _| rng.gen_range(-1.0..=1.0));
    let xhat0 = DVector::zeros(m.nx());
    let opts = SimOptions { t_end: t, dt };
    let traj = simulate_observer(m, &sensors, &gain.gain, f, &x0, &xhat0, &opts)
        .map_err(|e| e.to_string())?;
    let e0 = traj.norms[0];
    let e_end = *traj.norms.last().unwrap();
    if let Some(p) = out {
        fs::write(p, traj.to_csv()).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    let summary = json!({
        "t_end": t,
        "dt": dt,
        "seed": seed,
        "initial_error": e0,
        "final_error": e_end,
        "ratio": if e0 > 0.0 { e_end / e0 } else { 0.0 },
        "diverged": traj.diverged,
    });
    println!("{summary:#}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_certify(
    model: &PathBuf,
    sensors: &str,
    eta: Option<f64>,
    eps: f64,
    out: &Option<PathBuf>,
) -> Result<ExitCode, String> {
    let mf = ModelFile::load(model)?;
    let m = mf.model();
    let flags = parse_sensor_flags(sensors, m.ny())?;
    let config = SensorConfig::from_measurements(&flags, &m.node_outputs);
    let gamma_l = match eta {
        Some(e) => e * (m.nodes() as f64).sqrt(),
        None => m
            .lipschitz()
            .ok_or("the model declares no Lipschitz constant; pass --eta")?,
    };
    let verdict = exclusivity_check(m, &config, gamma_l, eps).map_err(|e| e.to_string())?;
    let mut doc = json!({
        "sensors": flags,
        "gamma_l": gamma_l,
        "eps": eps,
        "exclusivity": verdict,
    });
    if verdict == Exclusivity::AlternativeHolds {
        if let AltOutcome::Feasible(cert) =
            solve_alternative(m, &config, gamma_l, eps).map_err(|e| e.to_string())?
        {
            doc["certificate_violation"] = json!(cert.max_violation(m, &config, gamma_l));
            doc["certificate"] = serde_json::to_value(&cert).map_err(|e| e.to_string())?;
        }
    }
    write_or_print(out, &serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?)?;
    Ok(if verdict == Exclusivity::AlternativeHolds { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.cmd {
        Cmd::Gen { n, eta, seed, out } => {
            let inst = generate_network(n, eta, seed).map_err(|e| e.to_string())?;
            write_or_print(&out, &inst.to_json().map_err(|e| e.to_string())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Solve {
            model,
            mode,
            epsf,
            max_branch,
            seed,
            min_active,
            max_active,
            big_m,
            log,
            epsw,
            kappa,
            max_iter,
            grouping,
            out,
        } => cmd_solve(
            &model, mode, epsf, max_branch, seed, min_active, max_active, big_m, log, epsw,
            kappa, max_iter, grouping, &out,
        ),
        Cmd::Validate { model, report, t, dt, seed, out } => {
            cmd_validate(&model, &report, t, dt, seed, &out)
        }
        Cmd::Certify { model, sensors, eta, eps, out } => {
            cmd_certify(&model, &sensors, eta, eps, &out)
        }
        Cmd::Experiment { spec, out, plot_data } => experiments::run(&spec, &out, plot_data),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
