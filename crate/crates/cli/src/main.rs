//! Command line front end: synthesize clouds, run the pipelines, and emit
//! cost, simulation, and divergence reports as JSON or CSV.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mesokit::{
    cost_report, divergence_between, load_network_toml, read_cloud, simulate, synth_cloud,
    write_cloud, write_matrix_pcf1, write_nit, AuConfig, AuStats, CloudShape, CostReport,
    DivergenceReport, Error, LoadedNetwork, Mode, NetworkTrace, PointCloud, Result,
};

/// Base seed when neither the command line nor the network file provides one.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "mesokit", version, about = "Point-cloud module pipelines with deferred aggregation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic point cloud
    Synth(SynthArgs),
    /// Run a network over a cloud and write its artifacts
    Run(RunArgs),
    /// Report per-module MAC and memory costs for both orderings
    Cost(CostArgs),
    /// Simulate the aggregation unit over a network's neighbor tables
    Simulate(SimulateArgs),
    /// Run both orderings and report their divergence
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Baseline,
    Delayed,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Baseline => Mode::Baseline,
            ModeArg::Delayed => Mode::Delayed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    UniformCube,
    GaussianClusters,
}

impl From<DistArg> for CloudShape {
    fn from(d: DistArg) -> CloudShape {
        match d {
            DistArg::UniformCube => CloudShape::UniformCube,
            DistArg::GaussianClusters => CloudShape::GaussianClusters,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of points
    #[arg(long)]
    n: usize,
    /// Spatial distribution
    #[arg(long, value_enum, default_value = "uniform-cube")]
    dist: DistArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file; a .pcf1/.pcf extension selects the binary format
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NetInputArgs {
    /// Input cloud, text or PCF1
    #[arg(long)]
    input: PathBuf,
    /// Network description (TOML)
    #[arg(long)]
    net: PathBuf,
    /// Base seed when the network file does not pin one
    #[arg(long)]
    seed: Option<u64>,
}

impl NetInputArgs {
    fn load(&self) -> Result<(PointCloud, LoadedNetwork)> {
        let cloud = read_cloud(&self.input)?;
        let loaded = load_network_toml(&self.net, self.seed.unwrap_or(DEFAULT_SEED))?;
        if cloud.dim() != loaded.input_dim {
            return Err(Error::Config(format!(
                "network expects {}-dimensional points but the cloud is {}-dimensional",
                loaded.input_dim,
                cloud.dim()
            )));
        }
        Ok((cloud, loaded))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    net_input: NetInputArgs,
    #[arg(long, value_enum, default_value = "delayed")]
    mode: ModeArg,
    /// Directory for the output cloud and NIT/PFT artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct CostArgs {
    #[command(flatten)]
    net_input: NetInputArgs,
    /// Report file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    net_input: NetInputArgs,
    /// Bank count override (power of two)
    #[arg(long)]
    au_banks: Option<usize>,
    /// Feature buffer capacity override, in KiB
    #[arg(long)]
    au_buffer_kb: Option<usize>,
    /// Report file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    net_input: NetInputArgs,
    /// Report file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Serialize)]
struct SynthReport {
    path: String,
    points: usize,
    dim: usize,
}

#[derive(Serialize)]
struct RunModuleReport {
    index: usize,
    n_in: usize,
    n_out: usize,
    k: usize,
    m_out: usize,
    nit: Option<String>,
    pft: Option<String>,
}

#[derive(Serialize)]
struct RunReport {
    mode: Mode,
    input_points: usize,
    input_dim: usize,
    output_points: usize,
    output_dim: usize,
    output: Option<String>,
    modules: Vec<RunModuleReport>,
}

#[derive(Serialize)]
struct ModuleCostReport {
    index: usize,
    n_in: usize,
    n_out: usize,
    k: usize,
    baseline: CostReport,
    delayed: CostReport,
    mac_ratio: f64,
}

#[derive(Serialize)]
struct NetworkCostReport {
    modules: Vec<ModuleCostReport>,
    baseline_macs: u64,
    delayed_macs: u64,
    mac_ratio: f64,
}

#[derive(Serialize)]
struct ModuleSimReport {
    index: usize,
    n_in: usize,
    n_out: usize,
    k: usize,
    m_out: usize,
    stats: AuStats,
}

#[derive(Serialize)]
struct SimulateReport {
    au: AuConfig,
    modules: Vec<ModuleSimReport>,
}

#[derive(Serialize)]
struct CompareReport {
    output_points: usize,
    output_dim: usize,
    divergence: DivergenceReport,
}

fn emit(report: &impl Serialize, csv: Option<String>, format: FormatArg, out: Option<&Path>) -> Result<()> {
    let text = match format {
        FormatArg::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Argument(format!(
                "report serialization failed: {e}"
            )))?;
            s.push('\n');
            s
        }
        FormatArg::Csv => csv.ok_or_else(|| {
            Error::Argument("this report has no CSV form".into())
        })?,
    };
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cloud = synth_cloud(args.n, args.dist.into(), args.seed)?;
    write_cloud(&args.out, &cloud)?;
    let report = SynthReport {
        path: args.out.display().to_string(),
        points: cloud.len(),
        dim: cloud.dim(),
    };
    emit(&report, None, FormatArg::Json, None)
}

/// Per-module input sizes along a network: n_in of module i.
fn chained_inputs(cloud: &PointCloud, loaded: &LoadedNetwork) -> Vec<usize> {
    let mut n_in = cloud.len();
    loaded
        .net
        .modules
        .iter()
        .map(|m| {
            let this = n_in;
            n_in = m.n_out;
            this
        })
        .collect()
}

/// True when every entry lists its centroid in slot zero, the convention
/// the binary table format relies on.
fn first_slot_convention(nit: &mesokit::NeighborIndexTable) -> bool {
    (0..nit.n_out()).all(|c| nit.row(c)[0] == nit.centroid(c))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let (cloud, loaded) = args.net_input.load()?;
    let mode: Mode = args.mode.into();
    let trace: NetworkTrace = mesokit::run_network_traced(&cloud, &loaded.net, mode)?;

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
    }

    let inputs = chained_inputs(&cloud, &loaded);
    let mut modules = Vec::new();
    for (i, (m, t)) in loaded.net.modules.iter().zip(&trace.modules).enumerate() {
        let mut nit_path = None;
        let mut pft_path = None;
        if let Some(dir) = &args.out {
            if first_slot_convention(&t.nit) {
                let p = dir.join(format!("module_{i:02}.nit"));
                write_nit(&p, &t.nit)?;
                nit_path = Some(p.display().to_string());
            }
            if let Some(pft) = &t.pft {
                let p = dir.join(format!("module_{i:02}.pft.pcf1"));
                write_matrix_pcf1(&p, pft.mat())?;
                pft_path = Some(p.display().to_string());
            }
        }
        modules.push(RunModuleReport {
            index: i,
            n_in: inputs[i],
            n_out: m.n_out,
            k: m.k,
            m_out: m.mlp.output_width(),
            nit: nit_path,
            pft: pft_path,
        });
    }

    let mut output_path = None;
    if let Some(dir) = &args.out {
        let p = dir.join("output.pcf1");
        write_matrix_pcf1(&p, trace.output.mat())?;
        output_path = Some(p.display().to_string());
    }

    let report = RunReport {
        mode,
        input_points: cloud.len(),
        input_dim: cloud.dim(),
        output_points: trace.output.len(),
        output_dim: trace.output.dim(),
        output: output_path,
        modules,
    };
    let csv = if args.format == FormatArg::Csv {
        let mut s = String::from("index,n_in,n_out,k,m_out,nit,pft\n");
        for m in &report.modules {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                m.index,
                m.n_in,
                m.n_out,
                m.k,
                m.m_out,
                m.nit.as_deref().unwrap_or(""),
                m.pft.as_deref().unwrap_or("")
            ));
        }
        Some(s)
    } else {
        None
    };
    emit(&report, csv, args.format, None)
}

fn cmd_cost(args: &CostArgs) -> Result<()> {
    let (cloud, loaded) = args.net_input.load()?;
    let inputs = chained_inputs(&cloud, &loaded);

    let mut modules = Vec::new();
    let mut baseline_total = 0u64;
    let mut delayed_total = 0u64;
    for (i, m) in loaded.net.modules.iter().enumerate() {
        m.validate_for_len(inputs[i])?;
        let baseline = cost_report(m, inputs[i], Mode::Baseline);
        let delayed = cost_report(m, inputs[i], Mode::Delayed);
        baseline_total += baseline.macs_total;
        delayed_total += delayed.macs_total;
        modules.push(ModuleCostReport {
            index: i,
            n_in: inputs[i],
            n_out: m.n_out,
            k: m.k,
            mac_ratio: baseline.macs_total as f64 / delayed.macs_total as f64,
            baseline,
            delayed,
        });
    }
    let report = NetworkCostReport {
        baseline_macs: baseline_total,
        delayed_macs: delayed_total,
        mac_ratio: baseline_total as f64 / delayed_total as f64,
        modules,
    };

    let csv = if args.format == FormatArg::Csv {
        let mut s = String::from(
            "index,n_in,n_out,k,baseline_macs,delayed_macs,mac_ratio,\
             delayed_pft_bytes,baseline_working_set_bytes,nit_bytes\n",
        );
        for m in &report.modules {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                m.index,
                m.n_in,
                m.n_out,
                m.k,
                m.baseline.macs_total,
                m.delayed.macs_total,
                m.mac_ratio,
                m.delayed.pft_bytes,
                m.baseline.aggregation_working_set_bytes,
                m.baseline.nit_bytes
            ));
        }
        Some(s)
    } else {
        None
    };
    emit(&report, csv, args.format, args.out.as_deref())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (cloud, loaded) = args.net_input.load()?;
    let au = AuConfig {
        banks: args.au_banks.unwrap_or(32),
        pft_buffer_bytes: args.au_buffer_kb.unwrap_or(64) * 1024,
        ..AuConfig::default()
    };
    au.validate()?;

    let trace = mesokit::run_network_traced(&cloud, &loaded.net, Mode::Delayed)?;
    let inputs = chained_inputs(&cloud, &loaded);
    let mut modules = Vec::new();
    for (i, (m, t)) in loaded.net.modules.iter().zip(&trace.modules).enumerate() {
        let m_out = m.mlp.output_width();
        let stats = simulate(&t.nit, inputs[i], m_out, &au)?;
        modules.push(ModuleSimReport {
            index: i,
            n_in: inputs[i],
            n_out: m.n_out,
            k: m.k,
            m_out,
            stats,
        });
    }
    let report = SimulateReport { au, modules };

    let csv = if args.format == FormatArg::Csv {
        let mut s = String::from(
            "index,n_in,n_out,k,m_out,banks,pft_buffer_bytes,partitions,cycles,\
             neighbor_read_cycles,centroid_read_cycles,rounds_total,pft_reads,\
             conflict_service_reads,nit_entry_reads,dram_nit_bytes\n",
        );
        for m in &report.modules {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                m.index,
                m.n_in,
                m.n_out,
                m.k,
                m.m_out,
                report.au.banks,
                report.au.pft_buffer_bytes,
                m.stats.partitions,
                m.stats.cycles,
                m.stats.neighbor_read_cycles,
                m.stats.centroid_read_cycles,
                m.stats.rounds_total,
                m.stats.pft_reads,
                m.stats.conflict_service_reads,
                m.stats.nit_entry_reads,
                m.stats.dram_nit_bytes
            ));
        }
        Some(s)
    } else {
        None
    };
    emit(&report, csv, args.format, args.out.as_deref())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let (cloud, loaded) = args.net_input.load()?;
    let baseline = mesokit::run_network(&cloud, &loaded.net, Mode::Baseline)?;
    let delayed = mesokit::run_network(&cloud, &loaded.net, Mode::Delayed)?;
    let divergence = divergence_between(baseline.mat(), delayed.mat())?;
    let report = CompareReport {
        output_points: baseline.len(),
        output_dim: baseline.dim(),
        divergence,
    };
    let csv = if args.format == FormatArg::Csv {
        Some(format!(
            "max_abs_diff,mean_abs_diff,max_rel_diff,mean_rel_diff\n{},{},{},{}\n",
            report.divergence.max_abs_diff,
            report.divergence.mean_abs_diff,
            report.divergence.max_rel_diff,
            report.divergence.mean_rel_diff
        ))
    } else {
        None
    };
    emit(&report, csv, args.format, args.out.as_deref())
}

/// Honor MESOKIT_THREADS before any parallel work starts. 0 or unset leaves
/// the pool at its default size.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("MESOKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Error::Config(format!("MESOKIT_THREADS must be a number, got {raw:?}"))
    })?;
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool setup failed: {e}")))
}

fn dispatch(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.cmd {
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Cost(a) => cmd_cost(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
