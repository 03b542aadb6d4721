use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use boolearn::harness::{
    average_series, fit_scaling, fit_trials, run_de_scaling, run_region_table, run_rs_curves,
    write_csv, write_json, write_region_csv, write_trials_csv, Check, DeScalingConfig, ExperimentKind,
    Provenance, RegionTableConfig, RsCurvesConfig,
};
use boolearn::learners::{DE_MAX_ITERATIONS, RS_MAX_ITERATIONS};
use boolearn::{
    circuit_distribution, de_run, empirical_cdf, optimized_phases, random_search, run_trials, BooleanTask,
    CircuitKind, DEConfig, LearnConfig, ParameterVector, RegionSampler, Sampling, TargetSpec,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Classical and quantum circuits learning N-bit Boolean functions.
#[derive(Parser, Debug)]
#[command(name = "boolearn", version, about)]
struct Cli {
    /// Worker threads; defaults to one per CPU.
    #[arg(long, global = true, env = "BOOLEARN_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the acceptable-region fraction of one circuit by Monte Carlo.
    Region(RegionArgs),
    /// Run random-search trials; one CSV row per trial.
    LearnRs(LearnArgs),
    /// Run differential-evolution trials; one CSV row per trial.
    LearnDe(LearnDeArgs),
    /// Fit an exponential CDF to trial CSVs or a power law to a scaling CSV.
    Fit(FitArgs),
    /// Write a circuit's conditional distribution `x, P(0|x), P(1|x)`.
    Distribution(DistributionArgs),
    /// Acceptable-region table for N = 1, 2, 3.
    ReproTable2(ReproArgs),
    /// Random-search learning curves and fitted n_c.
    ReproFig3(ReproFig3Args),
    /// Differential-evolution fidelity curves and n_c scaling over N = 1…7.
    ReproFig5(ReproFig5Args),
}

#[derive(Args, Debug)]
struct TargetArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n_bits: u32,
    /// Reed-Muller coefficients of the target as `0x…` or `0b…`, bit k = a_k.
    /// Defaults to the constant-0 function.
    #[arg(long)]
    target: Option<String>,
}

impl TargetArgs {
    fn target(&self) -> Result<TargetSpec> {
        Ok(match &self.target {
            Some(s) => TargetSpec::new(BooleanTask::parse(self.n_bits, s)?),
            None => TargetSpec::constant_zero(self.n_bits)?,
        })
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Kind {
    Classical,
    Quantum,
}

impl From<Kind> for CircuitKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Classical => CircuitKind::Classical,
            Kind::Quantum => CircuitKind::Quantum,
        }
    }
}

#[derive(Args, Debug)]
struct RegionArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 10_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample the corner cube of this side instead of the whole cube.
    #[arg(long)]
    stratify_delta: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration cap per trial; defaults to 10^7 for random search and 10^4
    /// for differential evolution.
    #[arg(long)]
    max_iter: Option<u64>,
    /// Trial CSV: trial_id, seed, iterations, converged.
    #[arg(long)]
    out: PathBuf,
    /// Random search: learning-probability curve `n, P`. Differential
    /// evolution: trial-averaged fidelity per iteration.
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LearnDeArgs {
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long, default_value_t = 50)]
    population: usize,
    #[arg(long, default_value_t = 0.4)]
    weight: f64,
    #[arg(long, default_value_t = 0.85)]
    crossover: f64,
    /// Keep iterating after success up to this many iterations so the
    /// fidelity curve has a common length.
    #[arg(long, default_value_t = 0)]
    horizon: u64,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Model {
    Exponential,
    PowerLaw,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, value_enum, default_value = "exponential")]
    model: Model,
    /// Trial CSVs (pooled) for the exponential model; one scaling CSV with
    /// `D` and `n_c` columns for the power law.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Restrict a scaling CSV to one circuit kind.
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// JSON output; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DistributionArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Comma-separated gate probabilities p_0,…,p_{2^N−1}.
    #[arg(long, value_delimiter = ',', required = true)]
    params: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReproArgs {
    /// Scale sample and trial counts down 10×; tolerances widen accordingly.
    #[arg(long)]
    quick: bool,
    /// Compare with reference values; exit nonzero if any check fails.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = 2014)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ReproFig3Args {
    #[command(flatten)]
    repro: ReproArgs,
    /// Also run classical N = 3 (about 4.7e8 draws per trial).
    #[arg(long)]
    include_classical_n3: bool,
}

#[derive(Args, Debug)]
struct ReproFig5Args {
    #[command(flatten)]
    repro: ReproArgs,
    #[arg(long)]
    trials: Option<u64>,
    /// Iterations covered by every fidelity curve.
    #[arg(long)]
    horizon: Option<u64>,
}

fn report(checks: &[Check], check: bool) -> ExitCode {
    for c in checks {
        println!("{}", c.line());
    }
    if check && checks.iter().any(|c| !c.passed) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn region(args: &RegionArgs) -> Result<()> {
    let kind = args.target.kind.into();
    let target = args.target.target()?;
    let sampling = match args.stratify_delta {
        Some(delta) => Sampling::Corner { delta },
        None => Sampling::Uniform,
    };
    let est = RegionSampler::new(kind, &target).estimate(args.epsilon, args.samples, args.seed, sampling)?;
    let config = json!({
        "kind": kind, "target": target, "epsilon": args.epsilon,
        "samples": args.samples, "sampling": sampling,
    });
    let prov = Provenance::new(ExperimentKind::Region, args.seed, &config);
    write_region_csv(&args.out, &prov, std::slice::from_ref(&est))?;
    println!(
        "{kind} D={}: gamma = {:.4e} ± {:.2e} ({} hits / {} samples)",
        est.dimension, est.gamma, est.std_error, est.hits, est.samples
    );
    if est.hits == 0 {
        println!("95% upper bound: {:.4e}", est.upper_bound(0.95)?);
    }
    Ok(())
}

fn learn_config(args: &LearnArgs, default_cap: u64) -> Result<LearnConfig> {
    let config = LearnConfig::new(
        args.target.kind.into(),
        args.target.target()?,
        args.epsilon,
        args.max_iter.unwrap_or(default_cap),
        args.seed,
    );
    config.validate()?;
    Ok(config)
}

fn summarize(traces: &[boolearn::LearningTrace]) {
    let times: Vec<f64> = traces
        .iter()
        .filter_map(|t| t.iterations_to_success.map(|n| n as f64))
        .collect();
    let mean = times.iter().sum::<f64>() / times.len().max(1) as f64;
    println!(
        "{} / {} trials converged, mean iterations to success {mean:.3}",
        times.len(),
        traces.len()
    );
}

fn learn_rs(args: &LearnArgs) -> Result<()> {
    let config = learn_config(args, RS_MAX_ITERATIONS)?;
    let prov = Provenance::new(ExperimentKind::LearnRs, args.seed, &json!({"learn": config, "trials": args.trials}));
    let traces = run_trials(&config, args.trials, random_search)?;
    write_trials_csv(&args.out, &prov, &[], &traces)?;
    if let Some(path) = &args.curve_out {
        let times: Vec<u64> = traces.iter().filter_map(|t| t.iterations_to_success).collect();
        let cdf = empirical_cdf(&times, traces.len())?;
        write_csv(path, &prov, &[], &["n", "P"], cdf.iter().map(|(n, p)| vec![n.to_string(), p.to_string()]))?;
    }
    summarize(&traces);
    Ok(())
}

fn learn_de(args: &LearnDeArgs) -> Result<()> {
    let de = DEConfig {
        population: args.population,
        weight: args.weight,
        crossover: args.crossover,
    };
    de.validate()?;
    let config = learn_config(&args.learn, DE_MAX_ITERATIONS)?
        .with_series(args.learn.curve_out.is_some())
        .with_min_iterations(args.horizon);
    let prov = Provenance::new(
        ExperimentKind::LearnDe,
        args.learn.seed,
        &json!({"learn": config, "de": de, "trials": args.learn.trials}),
    );
    let traces = run_trials(&config, args.learn.trials, |c| de_run(c, &de))?;
    write_trials_csv(&args.learn.out, &prov, &[], &traces)?;
    if let Some(path) = &args.learn.curve_out {
        let horizon = traces
            .iter()
            .map(|t| t.mean_fidelity_series.len().saturating_sub(1))
            .max()
            .unwrap_or(0);
        let mean = average_series(&traces.iter().map(|t| &t.mean_fidelity_series).collect::<Vec<_>>(), horizon);
        let best = average_series(&traces.iter().map(|t| &t.best_fidelity_series).collect::<Vec<_>>(), horizon);
        write_csv(
            path,
            &prov,
            &[],
            &["iteration", "mean_fidelity", "best_fidelity"],
            mean.iter()
                .zip(&best)
                .enumerate()
                .map(|(i, (m, b))| vec![i.to_string(), m.to_string(), b.to_string()]),
        )?;
    }
    summarize(&traces);
    Ok(())
}

fn fit(args: &FitArgs) -> Result<()> {
    let report = match args.model {
        Model::Exponential => fit_trials(&args.inputs)?,
        Model::PowerLaw => {
            let [input] = args.inputs.as_slice() else {
                bail!("the power-law fit takes exactly one scaling CSV");
            };
            fit_scaling(input, args.kind.map(Into::into))?
        }
    };
    match &args.out {
        Some(path) => {
            let inputs: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
            let prov = Provenance::new(ExperimentKind::Fit, 0, &json!({"model": report.model, "inputs": inputs}));
            write_json(path, &prov, &report)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn distribution(args: &DistributionArgs) -> Result<()> {
    let kind: CircuitKind = args.kind.into();
    let params = ParameterVector::new(args.params.clone())?;
    let phases = match kind {
        CircuitKind::Quantum => Some(optimized_phases(params.n_bits())),
        CircuitKind::Classical => None,
    };
    let dist = circuit_distribution(kind, &params, phases.as_ref())?;
    let prov = Provenance::new(ExperimentKind::Distribution, 0, &json!({"kind": kind, "params": args.params}));
    write_csv(
        &args.out,
        &prov,
        &[],
        &["x", "P0", "P1"],
        dist.rows().map(|(x, p0, p1)| vec![x.to_string(), p0.to_string(), p1.to_string()]),
    )?;
    Ok(())
}

fn repro_table2(args: &ReproArgs) -> Result<ExitCode> {
    let config = RegionTableConfig {
        seed: args.seed,
        ..if args.quick { RegionTableConfig::quick() } else { RegionTableConfig::default() }
    };
    let table = run_region_table(&config, &args.out_dir)?;
    println!("wrote {}", args.out_dir.join("table2.csv").display());
    Ok(report(&table.checks(), args.check))
}

fn repro_fig3(args: &ReproFig3Args) -> Result<ExitCode> {
    let r = &args.repro;
    let config = RsCurvesConfig {
        seed: r.seed,
        include_classical_n3: args.include_classical_n3,
        ..if r.quick { RsCurvesConfig::quick() } else { RsCurvesConfig::default() }
    };
    let curves = run_rs_curves(&config, &r.out_dir)?;
    for c in &curves.cells {
        if !c.note.is_empty() {
            println!("{} N={}: {}", c.kind, c.n_bits, c.note);
        }
    }
    println!("wrote {}", r.out_dir.join("rs_summary.csv").display());
    Ok(report(&curves.checks(), r.check))
}

fn repro_fig5(args: &ReproFig5Args) -> Result<ExitCode> {
    let r = &args.repro;
    let base = if r.quick { DeScalingConfig::quick() } else { DeScalingConfig::default() };
    let config = DeScalingConfig {
        seed: r.seed,
        trials: args.trials.unwrap_or(base.trials),
        curve_horizon: args.horizon.unwrap_or(base.curve_horizon),
        ..base
    };
    let scaling = run_de_scaling(&config, &r.out_dir)?;
    for (kind, fit) in &scaling.fits {
        println!("{kind}: n_c = {:.3}·D^{:.3}", fit.alpha, fit.beta);
    }
    println!("wrote {}", r.out_dir.join("de_scaling.csv").display());
    let mut checks = scaling.scaling_checks();
    checks.extend(scaling.curve_checks());
    Ok(report(&checks, r.check))
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Region(a) => region(a)?,
        Command::LearnRs(a) => learn_rs(a)?,
        Command::LearnDe(a) => learn_de(a)?,
        Command::Fit(a) => fit(a)?,
        Command::Distribution(a) => distribution(a)?,
        Command::ReproTable2(a) => return repro_table2(a),
        Command::ReproFig3(a) => return repro_fig3(a),
        Command::ReproFig5(a) => return repro_fig5(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
