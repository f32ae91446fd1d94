//! `fastsim`: analytic queries, scenario execution, sweeps, and
//! model-vs-simulation comparison reports.
//!
//! Exit codes: 0 success, 2 usage, 3 scenario validation (including a missing
//! scenario file), 4 numerical failure, 1 other I/O errors. Failures print a
//! single machine-parseable line on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fastsim_core::model;
use fastsim_core::remedy::RemedyKind;
use fastsim_core::scenario::{self, output, ScenarioError, ScenarioSpec};

#[derive(Parser)]
#[command(name = "fastsim", version, about = "FAST-TCP congestion simulator and analytic model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sequential-arrival model: backlog coefficients and per-flow shares.
    ModelSeq {
        #[arg(long)]
        n: usize,
        /// Also print the predicted queue length for this target backlog.
        #[arg(long, default_value_t = 50.0)]
        alpha: f64,
    },
    /// One flow joining n settled flows: shares and newcomer backlog.
    ModelStable {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 50.0)]
        alpha: f64,
    },
    /// Minimum propagation delay for the rate-reduction throttle to work.
    ModelBound {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 50.0)]
        alpha: f64,
        /// Bottleneck capacity, packets/second.
        #[arg(long)]
        capacity: f64,
    },
    /// Run one scenario file and write a run directory.
    Run {
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $FASTSIM_OUT or ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario once per axis value.
    Sweep {
        scenario: PathBuf,
        /// Scenario key to vary, e.g. topology.bottleneck_delay.
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a scenario and print model prediction next to measurement.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.stderr_line());
            ExitCode::from(e.exit_code())
        }
    }
}

enum CliError {
    Scenario(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Scenario(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    fn stderr_line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Scenario(m) => ("scenario", m),
            CliError::Numerical(m) => ("numerical", m),
            CliError::Io(m) => ("io", m),
        };
        format!(
            "error code={} kind={} msg={:?}",
            self.exit_code(),
            kind,
            msg.replace('\n', "; ")
        )
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Validation(_) => CliError::Scenario(e.to_string()),
            ScenarioError::Sim(_) => CliError::Numerical(e.to_string()),
            ScenarioError::Io(_) => CliError::Io(e.to_string()),
        }
    }
}

impl From<model::ModelError> for CliError {
    fn from(e: model::ModelError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::ModelSeq { n, alpha } => model_seq(n, alpha),
        Command::ModelStable { n, alpha } => model_stable(n, alpha),
        Command::ModelBound { n, alpha, capacity } => model_bound(n, alpha, capacity),
        Command::Run { scenario, seed, out } => run(&scenario, seed, out),
        Command::Sweep { scenario, axis, values, out, jobs } => {
            sweep(&scenario, &axis, &values, out, jobs)
        }
        Command::Compare { scenario, seed, out } => compare(&scenario, seed, out),
    }
}

fn model_seq(n: usize, alpha: f64) -> Result<(), CliError> {
    let backlog = model::sequential_backlog(n)?;
    let shares = model::sequential_shares(n)?;
    for (i, a) in backlog.coefficients().iter().enumerate() {
        println!("a_{}={a:.6}", i + 1);
    }
    for (i, s) in shares.iter().enumerate() {
        println!("share_{}={s:.6}", i + 1);
    }
    println!("queue_pkts={:.6}", model::sequential_queue_length(n, alpha)?);
    Ok(())
}

fn model_stable(n: usize, alpha: f64) -> Result<(), CliError> {
    let s = model::stable_arrival(n, alpha)?;
    println!("a={:.6}", s.a);
    println!("share_old={:.6}", s.share_old);
    println!("share_new={:.6}", s.share_new);
    println!("unfairness_ratio={:.6}", s.unfairness_ratio());
    println!("newcomer_backlog_pkts={:.6}", s.newcomer_backlog);
    Ok(())
}

fn model_bound(n: usize, alpha: f64, capacity: f64) -> Result<(), CliError> {
    let bound = model::rate_reduction_min_delay(n, alpha, capacity)?;
    println!("min_delay_s={bound:.9}");
    println!("min_delay_ms={:.3}", bound * 1e3);
    Ok(())
}

fn out_root(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| {
        std::env::var_os("FASTSIM_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
    })
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<(String, ScenarioSpec), CliError> {
    let mut text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Scenario(format!("cannot read scenario file {}: {e}", path.display()))
    })?;
    if let Some(s) = seed {
        text.push_str(&format!("\nseed={s}\n"));
    }
    let spec = ScenarioSpec::parse(&text)?;
    Ok((text, spec))
}

fn run(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let (text, spec) = load_scenario(path, seed)?;
    let log = scenario::run_scenario(&spec)?;
    let dir = out_root(out);
    output::write_run_dir(&dir, &text, &log).map_err(|e| CliError::Io(e.to_string()))?;
    print!("{}", output::summary_text(&log.summary));
    println!("out_dir={}", dir.display());
    Ok(())
}

fn sweep(
    path: &Path,
    axis: &str,
    values: &str,
    out: Option<PathBuf>,
    jobs: usize,
) -> Result<(), CliError> {
    let (text, _) = load_scenario(path, None)?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
    if values.is_empty() || values.iter().any(|v| v.is_empty()) {
        return Err(CliError::Scenario("sweep values must be a nonempty comma list".into()));
    }
    let runs = scenario::sweep(&text, axis, &values, jobs)?;
    let dir = out_root(out);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(e.to_string()))?;
    for run in &runs {
        let sub = dir.join(format!("{}={}", run.axis.replace('/', "_"), run.value));
        output::write_run_dir(&sub, &run.text, &run.log)
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    std::fs::write(dir.join("sweep.csv"), scenario::sweep_csv(&runs))
        .map_err(|e| CliError::Io(e.to_string()))?;
    for run in &runs {
        let s = &run.log.summary;
        println!(
            "{}={} fairness_ratio={} queue_mean={:.3}",
            run.axis,
            run.value,
            s.fairness_ratio.map(|f| format!("{f:.4}")).unwrap_or_else(|| "n/a".into()),
            s.queue_mean,
        );
    }
    println!("out_dir={}", dir.display());
    Ok(())
}

/// Model predictions applicable to a scenario, chosen from its shape:
/// remedied newcomers predict the fair split, oracle incumbents the
/// stable-arrival equilibrium, plain staggered starts the sequential one.
fn predictions(spec: &ScenarioSpec) -> (Vec<f64>, f64, &'static str) {
    let n = spec.flows.len();
    let pps = spec.bottleneck_pps();
    let mean_alpha = spec.flows.iter().map(|f| f.alpha).sum::<f64>() / n as f64;
    // Flow order by nominal start time.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| {
        spec.flows[*a].start_time.total_cmp(&spec.flows[*b].start_time).then(a.cmp(b))
    });
    let newest = *order.last().expect("at least one flow");
    let newcomer_remedied = spec.flows[newest].remedy.kind != RemedyKind::None;
    let incumbents_oracle =
        n >= 2 && order[..n - 1].iter().all(|i| spec.flows[*i].oracle_base_rtt);

    if newcomer_remedied {
        let shares = vec![pps / n as f64; n];
        return (shares, n as f64 * mean_alpha, "fair_share");
    }
    if incumbents_oracle && !spec.flows[newest].oracle_base_rtt {
        let sol = model::stable_arrival(n - 1, mean_alpha).expect("n >= 2");
        let mut shares = vec![sol.share_old * pps; n];
        shares[newest] = sol.share_new * pps;
        return (shares, (n - 1) as f64 * mean_alpha + sol.newcomer_backlog, "stable_arrival");
    }
    let seq = model::sequential_shares(n).expect("n >= 1");
    let mut shares = vec![0.0; n];
    for (rank, flow) in order.iter().enumerate() {
        shares[*flow] = seq[rank] * pps;
    }
    let queue = model::sequential_queue_length(n, mean_alpha).expect("n >= 1");
    (shares, queue, "sequential")
}

fn compare(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let (text, spec) = load_scenario(path, seed)?;
    if spec.flows.is_empty() {
        return Err(CliError::Scenario("compare needs at least one flow".into()));
    }
    let (rate_model, queue_model, family) = predictions(&spec);
    let log = scenario::run_scenario(&spec)?;
    let dir = out_root(out);
    output::write_run_dir(&dir, &text, &log).map_err(|e| CliError::Io(e.to_string()))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "id", "model", "simulation", "deviation"]).expect("header");
    let mut print_row = |metric: &str, id: String, model_v: f64, sim_v: f64| {
        let dev = (sim_v - model_v).abs() / model_v;
        println!("{metric:<12} {id:>3}  model {model_v:>12.3}  sim {sim_v:>12.3}  deviation {dev:.4}");
        w.write_record([
            metric.to_string(),
            id,
            format!("{model_v:.6}"),
            format!("{sim_v:.6}"),
            format!("{dev:.6}"),
        ])
        .expect("row");
    };
    println!("model_family={family}");
    for (i, m) in rate_model.iter().enumerate() {
        print_row("rate", i.to_string(), *m, log.summary.flow_rate[i]);
    }
    print_row("queue", "-".to_string(), queue_model, log.summary.queue_mean);
    let bytes = w.into_inner().expect("flush");
    std::fs::write(dir.join("compare.csv"), bytes).map_err(|e| CliError::Io(e.to_string()))?;
    println!("out_dir={}", dir.display());
    Ok(())
}
