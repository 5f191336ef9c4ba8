use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use latentnode::cluster::{self, CooccurrenceIndex, KMedoidsOptions};
use latentnode::eval::{self, SweepAxis};
use latentnode::network::{degree_gini, mean_clustering_coefficient, mean_degree};
use latentnode::{
    build_diagram, rank_records, Clustering, Error, ExperimentConfig, PersonId, RankingFunction,
    RecordSet, SimulationConfig, SocialNetwork,
};

const BUILTIN: &str = "builtin:911";
const THREADS_VAR: &str = "LATENTNODE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "latentnode",
    version,
    about = "Latent node discovery in covert networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print mean degree, degree Gini and mean clustering coefficient.
    Metrics {
        #[arg(long, default_value = BUILTIN)]
        network: String,
    },
    /// Generate co-occurrence records with the 2-hop cascade model.
    Simulate {
        #[arg(long, default_value = BUILTIN)]
        network: String,
        /// Per-edge transmission probability.
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 370)]
        baskets: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Records file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition the persons of a record file with k-medoids.
    Cluster {
        #[command(flatten)]
        clustering: ClusterArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank records by how likely they involve a latent person.
    Rank {
        #[command(flatten)]
        clustering: ClusterArgs,
        #[arg(long = "fn", default_value = "sd")]
        function: RankingFunction,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated simulate, occlude, cluster, rank trials; writes the aggregate curve as CSV.
    Eval {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every trial's curve as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run eval once per value of one parameter.
    Sweep {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<String>,
        /// Held fixed unless the axis is `target`.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the diagram model for the top-ranked records.
    Diagram {
        #[command(flatten)]
        clustering: ClusterArgs,
        #[arg(long = "fn", default_value = "sd")]
        function: RankingFunction,
        #[arg(long)]
        mret: usize,
        /// Minimum Jaccard coefficient for a black link.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        /// `.dot` writes Graphviz, anything else JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Static workbench build served under /app.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Known leaders, pinned as medoids.
    #[arg(long, value_delimiter = ',')]
    medoids: Vec<String>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long, default_value = BUILTIN)]
    network: String,
    #[arg(long, default_value_t = 0.8)]
    t: f64,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long = "fn", default_value = "sd")]
    function: RankingFunction,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 370)]
    baskets: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, value_delimiter = ',')]
    medoids: Vec<String>,
}

/// Exit 1: the invocation itself is wrong. Exit 2: the data could not be processed.
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::InvalidParameter { .. }) => Failure::Usage(format!("{e:#}")),
            _ => Failure::Data(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            latentnode::exec::init_thread_pool(n);
            Ok(())
        }
        _ => Err(Failure::Usage(format!(
            "{THREADS_VAR}=`{raw}` is not a positive integer"
        ))),
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Metrics { network } => metrics(&network),
        Command::Simulate {
            network,
            t,
            baskets,
            seed,
            out,
        } => {
            let net = load_network(&network)?;
            let cfg = SimulationConfig {
                t,
                basket_count: baskets,
                rng_seed: effective_seed("seed", seed),
            };
            let records = latentnode::generate_records(&net, &cfg)?;
            emit(out.as_deref(), &records.to_text())
        }
        Command::Cluster { clustering, out } => {
            let records = load_records(&clustering.records)?;
            let c = run_clustering(&records, &clustering)?;
            let idx = CooccurrenceIndex::new(&records);
            let objectives = (0..c.k)
                .map(|j| cluster::medoid_objective(&idx, &c, j))
                .collect::<Result<Vec<_>, _>>()?;
            let summary = json!({
                "k": c.k,
                "medoids": c.medoids,
                "clusters": c.clusters(),
                "cluster_objectives": objectives,
                "objective": objectives.iter().sum::<f64>(),
            });
            emit(out.as_deref(), &format!("{}\n", pretty(&summary)))
        }
        Command::Rank {
            clustering,
            function,
            out,
        } => {
            let records = load_records(&clustering.records)?;
            let c = run_clustering(&records, &clustering)?;
            let outcome = rank_records(&records, &c, function)?;
            let mut text = String::from("rank\tbasket\tscore\tgateways\tmembers\n");
            for (pos, &b) in outcome.order.iter().enumerate() {
                let gateways: Vec<&str> = outcome
                    .gateways_of(b)
                    .into_iter()
                    .map(PersonId::as_str)
                    .collect();
                let members: Vec<&str> = records[b].iter().map(PersonId::as_str).collect();
                text.push_str(&format!(
                    "{}\t{b}\t{}\t{}\t{}\n",
                    pos + 1,
                    outcome.scores[b],
                    gateways.join(";"),
                    members.join(";")
                ));
            }
            emit(out.as_deref(), &text)
        }
        Command::Eval {
            experiment,
            target,
            out,
            json,
        } => {
            let (net, cfg) = experiment_config(&experiment, &target)?;
            let result = eval::run_experiment(&net, &cfg)?;
            let aggregate = result.aggregate();
            let tenth = (cfg.basket_count as f64 * 0.1).round().max(1.0) as usize;
            if let Some(row) = aggregate.rows.get(tenth - 1) {
                eprintln!(
                    "trials={} reruns={} mean_basket_size={:.3} precision@{tenth}={:.3}",
                    result.trials.len(),
                    result.total_reruns(),
                    result.mean_basket_size(),
                    row.precision.mean
                );
            }
            if let Some(path) = json {
                write_atomic(&path, pretty(&result).as_bytes())?;
            }
            emit(out.as_deref(), &aggregate.to_csv())
        }
        Command::Sweep {
            experiment,
            axis,
            values,
            target,
            out,
        } => {
            let target = match (target, axis) {
                (Some(t), _) => t,
                (None, SweepAxis::Target) => values[0].clone(),
                (None, _) => {
                    return Err(Failure::Usage(
                        "--target is required unless --axis target".into(),
                    ))
                }
            };
            let (net, cfg) = experiment_config(&experiment, &target)?;
            for v in &values {
                axis.apply(&cfg, v)?.validate(&net)?;
            }
            let table = eval::sweep(&net, &cfg, axis, &values)?;
            emit(out.as_deref(), &table.to_csv())
        }
        Command::Diagram {
            clustering,
            function,
            mret,
            threshold,
            out,
        } => {
            let records = load_records(&clustering.records)?;
            let c = run_clustering(&records, &clustering)?;
            let outcome = rank_records(&records, &c, function)?;
            let model = build_diagram(&records, &c, &outcome, mret, threshold)?;
            let text = if out.extension().is_some_and(|e| e == "dot") {
                model.to_dot()
            } else {
                model.to_json()
            };
            write_atomic(&out, text.as_bytes())
        }
        Command::Serve { port, bind, assets } => serve(SocketAddr::new(bind, port), assets),
    }
}

fn metrics(network: &str) -> Result<(), Failure> {
    let net = load_network(network)?;
    println!("persons\t{}", net.len());
    println!("edges\t{}", net.edge_count());
    println!("mean_degree\t{:.4}", mean_degree(&net)?);
    println!("degree_gini\t{:.4}", degree_gini(&net)?);
    println!("mean_clustering\t{:.4}", mean_clustering_coefficient(&net)?);
    Ok(())
}

fn serve(addr: SocketAddr, assets: Option<PathBuf>) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime
        .block_on(latentnode_service::serve(addr, assets))
        .with_context(|| format!("serving on {addr}"))?;
    Ok(())
}

/// Resolves an optional seed, drawing one when absent, and reports it so the
/// run can be repeated.
fn effective_seed(name: &str, seed: Option<u64>) -> u64 {
    let seed = seed.unwrap_or_else(rand::random);
    eprintln!("{name}={seed}");
    seed
}

fn load_network(spec: &str) -> anyhow::Result<SocialNetwork> {
    if spec == BUILTIN {
        return Ok(SocialNetwork::builtin_911());
    }
    let text =
        std::fs::read_to_string(spec).with_context(|| format!("reading network `{spec}`"))?;
    SocialNetwork::load_edge_list(&text).with_context(|| format!("parsing network `{spec}`"))
}

fn load_records(path: &Path) -> anyhow::Result<RecordSet> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading records `{}`", path.display()))?;
    let records =
        RecordSet::parse(&text).with_context(|| format!("parsing records `{}`", path.display()))?;
    if records.is_empty() {
        bail!("`{}` contains no records", path.display());
    }
    Ok(records)
}

fn person_list(names: &[String]) -> Result<Vec<PersonId>, Failure> {
    names
        .iter()
        .map(|n| PersonId::new(n.trim()).map_err(Failure::from))
        .collect()
}

fn run_clustering(records: &RecordSet, args: &ClusterArgs) -> Result<Clustering, Failure> {
    let seed = effective_seed("seed", args.seed);
    let medoids = person_list(&args.medoids)?;
    let opts = KMedoidsOptions {
        restarts: args.restarts,
        ..Default::default()
    };
    let idx = CooccurrenceIndex::new(records);
    Ok(cluster::k_medoids_with(
        &idx, args.k, seed, &medoids, &opts,
    )?)
}

fn experiment_config(
    args: &ExperimentArgs,
    target: &str,
) -> Result<(SocialNetwork, ExperimentConfig), Failure> {
    let net = load_network(&args.network)?;
    let cfg = ExperimentConfig {
        network: args.network.clone(),
        target: PersonId::new(target)?,
        t: args.t,
        basket_count: args.baskets,
        k: args.k,
        ranking_fn: args.function,
        trials: args.trials,
        base_seed: effective_seed("seed", args.seed),
        restarts: args.restarts,
        seeded_medoids: person_list(&args.medoids)?,
    };
    cfg.validate(&net)?;
    Ok((net, cfg))
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("JSON values serialize")
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .context("writing to stdout")?;
            Ok(())
        }
    }
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a file in `{}`", dir.display()))?;
    tmp.write_all(bytes).context("writing output")?;
    tmp.persist(path)
        .map_err(|e| anyhow::Error::new(e.error))
        .with_context(|| format!("writing `{}`", path.display()))?;
    Ok(())
}
