//! Command-line front end: flow construction, chain generation and
//! validation, shadowing search, constants estimation, straightening, the
//! theorem pipelines, certificate verification, and plot-data export.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use shadowlab::error::Result;
use shadowlab::flow::{self, FlowSpec};
use shadowlab::pseudo::{self, JumpModel, StepPseudotrajectory};
use shadowlab::report::{self, ExperimentConfig, PipelineKind};
use shadowlab::search::{self, SearchGrid, ShadowingCertificate};
use shadowlab::space::MetricPoint;
use shadowlab::stability;
use shadowlab::straighten::{self, BundleParams, ConstantsBundle};

#[derive(Parser)]
#[command(name = "shadowlab", about = "Topological flows, pseudotrajectories, and shadowing search", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in flow descriptor to a JSON file.
    MakeFlow(MakeFlowArgs),
    /// Classify a singularity as Lyapunov stable/unstable by sampled orbits.
    Classify(ClassifyArgs),
    /// Estimate the chain-reachable set around a point.
    Reach(ReachArgs),
    /// Generate a step pseudotrajectory.
    PseudoGen(PseudoGenArgs),
    /// Recompute the continuous-form defect of a saved chain.
    PseudoValidate(PseudoValidateArgs),
    /// Search for a shadowing certificate.
    ShadowSearch(ShadowSearchArgs),
    /// Estimate a constants bundle for a flow.
    Constants(ConstantsArgs),
    /// Straighten a saved oriented certificate.
    Straighten(StraightenArgs),
    /// Run the standard-from-oriented experiment.
    Thm1(ThmArgs),
    /// Run the product experiment.
    Thm2(Thm2Args),
    /// Run an experiment from a JSON config file.
    Run(RunArgs),
    /// Re-verify a saved certificate.
    VerifyCert(VerifyCertArgs),
    /// Export plot data.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FlowName {
    Disk,
    NorthSouth,
    DiskNorthSouth,
}

#[derive(Args)]
struct MakeFlowArgs {
    #[arg(long, value_enum)]
    name: FlowName,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    flow: PathBuf,
    /// Comma-separated coordinates of the singularity.
    #[arg(long)]
    point: String,
    /// Comma-separated target radii.
    #[arg(long, default_value = "0.3,0.1")]
    radii: String,
    #[arg(long, default_value_t = 30.0)]
    horizon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReachArgs {
    #[arg(long)]
    flow: PathBuf,
    #[arg(long)]
    point: String,
    #[arg(long)]
    d: f64,
    #[arg(long, default_value = "forward")]
    direction: String,
    #[arg(long, default_value_t = 2_000_000)]
    budget: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PseudoGenArgs {
    #[arg(long)]
    flow: PathBuf,
    #[arg(long)]
    x0: String,
    #[arg(long)]
    d: f64,
    #[arg(long, default_value_t = 0.5)]
    t0: f64,
    /// Anchor window as "n_min,n_max".
    #[arg(long, default_value = "-20,20", allow_hyphen_values = true)]
    window: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// uniform | directed (directed needs --target).
    #[arg(long, default_value = "uniform")]
    jump: String,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PseudoValidateArgs {
    #[arg(long)]
    flow: PathBuf,
    #[arg(long)]
    chain: PathBuf,
    /// Optional bound to compare against (exit code reflects the comparison).
    #[arg(long)]
    d: Option<f64>,
}

#[derive(Args)]
struct ShadowSearchArgs {
    #[arg(long, default_value = "oriented")]
    mode: String,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    eps_rep: Option<f64>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    flow: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    ds: Option<f64>,
    #[arg(long, default_value_t = 16.0)]
    slope_cap: f64,
    #[arg(long, default_value_t = 5)]
    per_ball: usize,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long)]
    flow: PathBuf,
    /// Excluded-ball radius around singularities.
    #[arg(long)]
    r0: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.04)]
    mesh: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StraightenArgs {
    #[arg(long)]
    cert: PathBuf,
    #[arg(long)]
    consts: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    flow: PathBuf,
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ThmArgs {
    #[arg(long)]
    flow: PathBuf,
    /// Comma-separated defect list.
    #[arg(long)]
    d: String,
    #[arg(long)]
    eps0: f64,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    certs: Option<PathBuf>,
}

#[derive(Args)]
struct Thm2Args {
    #[arg(long)]
    flow1: PathBuf,
    #[arg(long)]
    flow2: PathBuf,
    #[arg(long)]
    d: String,
    #[arg(long)]
    eps0: f64,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    certs: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct VerifyCertArgs {
    #[arg(long)]
    flow: PathBuf,
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    cert: PathBuf,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, value_enum)]
    kind: ExportKindArg,
    #[arg(long)]
    flow: Option<PathBuf>,
    #[arg(long)]
    chain: Option<PathBuf>,
    #[arg(long)]
    cert: Option<PathBuf>,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportKindArg {
    FreeSpace,
    Reparam,
    Orbit,
}

fn parse_coords(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| shadowlab::Error::param(format!("bad coordinate {s:?}: {e}")))
        })
        .collect()
}

fn load_flow(path: &PathBuf) -> Result<FlowSpec> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn load_chain(path: &PathBuf) -> Result<StepPseudotrajectory> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn load_cert(path: &PathBuf) -> Result<ShadowingCertificate> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn save_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn point_of(flow: &FlowSpec, text: &str) -> Result<MetricPoint> {
    flow.point(parse_coords(text)?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::MakeFlow(a) => {
            let f = match a.name {
                FlowName::Disk => flow::build_disk_flow(),
                FlowName::NorthSouth => flow::build_north_south_circle(),
                FlowName::DiskNorthSouth => flow::build_product_flow(
                    flow::build_disk_flow(),
                    flow::build_north_south_circle(),
                ),
            };
            save_json(&a.out, &f)?;
            Ok(true)
        }
        Command::Classify(a) => {
            let f = load_flow(&a.flow)?;
            let p = point_of(&f, &a.point)?;
            let radii = parse_coords(&a.radii)?;
            let rep = stability::classify_singularity(&f, &p, &radii, a.horizon)?;
            let text = serde_json::to_string_pretty(&rep)?;
            match a.out {
                Some(path) => fs::write(path, text)?,
                None => println!("{text}"),
            }
            Ok(true)
        }
        Command::Reach(a) => {
            let f = load_flow(&a.flow)?;
            let p = point_of(&f, &a.point)?;
            let dir = match a.direction.as_str() {
                "forward" => stability::Direction::Forward,
                "backward" => stability::Direction::Backward,
                other => {
                    return Err(shadowlab::Error::param(format!(
                        "direction must be forward or backward, got {other}"
                    )))
                }
            };
            let est = stability::reachable_set(&f, &p, a.d, dir, a.budget)?;
            println!(
                "reached {} cells, diameter {}, conclusive: {}",
                est.points.len(),
                est.diameter,
                est.conclusive
            );
            if let Some(path) = a.out {
                save_json(&path, &est)?;
            }
            Ok(est.conclusive)
        }
        Command::PseudoGen(a) => {
            let f = load_flow(&a.flow)?;
            let x0 = point_of(&f, &a.x0)?;
            let w = parse_coords(&a.window)?;
            if w.len() != 2 {
                return Err(shadowlab::Error::param("window must be n_min,n_max".to_string()));
            }
            let target = a.target.as_ref().map(|t| point_of(&f, t)).transpose()?;
            let model = match (a.jump.as_str(), &target) {
                ("uniform", _) => JumpModel::UniformBall,
                ("directed", Some(t)) => JumpModel::Directed(t),
                ("directed", None) => {
                    return Err(shadowlab::Error::param("directed jumps need --target".to_string()))
                }
                (other, _) => {
                    return Err(shadowlab::Error::param(format!("unknown jump model {other}")))
                }
            };
            let xi = pseudo::generate_pt(
                &f,
                &x0,
                a.d,
                a.t0,
                (w[0] as i64, w[1] as i64),
                a.seed,
                model,
            )?;
            save_json(&a.out, &xi)?;
            Ok(true)
        }
        Command::PseudoValidate(a) => {
            let f = load_flow(&a.flow)?;
            let xi = load_chain(&a.chain)?;
            let max_defect = pseudo::validate_ps(&f, &pseudo::PseudoInput::Step(&xi))?;
            println!("max_defect {}", report::fmt_f64(max_defect));
            Ok(a.d.map_or(true, |d| max_defect < d))
        }
        Command::ShadowSearch(a) => {
            let f = load_flow(&a.flow)?;
            let xi = load_chain(&a.input)?;
            let mut grid = SearchGrid::defaults_for(&xi);
            if let Some(dt) = a.dt {
                grid.dt = dt;
            }
            if let Some(ds) = a.ds {
                grid.ds = ds;
            }
            grid.slope_cap = a.slope_cap;
            let candidates = search::default_candidates(&f, &xi, a.eps, a.per_ball);
            let cert = match a.mode.as_str() {
                "oriented" => search::search_oriented(&f, &xi, a.eps, &candidates, &grid)?,
                "standard" => {
                    let eps_rep = a.eps_rep.ok_or_else(|| {
                        shadowlab::Error::param("standard mode needs --eps-rep".to_string())
                    })?;
                    search::search_standard(&f, &xi, a.eps, eps_rep, &candidates, &grid)?
                }
                other => return Err(shadowlab::Error::param(format!("unknown mode {other}"))),
            };
            match cert {
                Some(c) => {
                    println!("certificate found: sup_error {}", report::fmt_f64(c.sup_error));
                    save_json(&a.out, &c)?;
                    Ok(true)
                }
                None => {
                    println!("no certificate at eps {}", a.eps);
                    Ok(false)
                }
            }
        }
        Command::Constants(a) => {
            let f = load_flow(&a.flow)?;
            let mut params = BundleParams::new(a.r0, a.eps);
            params.mesh = a.mesh;
            let bundle = straighten::estimate_constants(&f, &params)?;
            save_json(&a.out, &bundle)?;
            println!(
                "T0 {}, T {}, eps' {}, eps1 {}",
                bundle.t0, bundle.t_block, bundle.eps_prime, bundle.eps1
            );
            Ok(true)
        }
        Command::Straighten(a) => {
            let f = load_flow(&a.flow)?;
            let xi = load_chain(&a.chain)?;
            let cert = load_cert(&a.cert)?;
            let consts: ConstantsBundle = serde_json::from_str(&fs::read_to_string(&a.consts)?)?;
            let (g, y) = cert.normalized_match(&f);
            let (lo, hi) = cert.window;
            let (gt, rep) = straighten::straighten(&f, &xi, lo, hi - lo, &g, &y, a.eps, &consts)?;
            let straightened = ShadowingCertificate {
                x: y,
                h: gt.shifted(lo, 0.0),
                sup_error: rep.sup_error,
                mode: search::CertMode::Standard { eps_rep: a.eps },
                window: cert.window,
                grid_pitch: consts.hyp_pitch,
                flow_id: f.fingerprint(),
            };
            save_json(&a.out, &straightened)?;
            println!(
                "straightened: {} blocks, worst ratio dev {}, sup {}",
                rep.blocks,
                report::fmt_f64(rep.worst_ratio_dev),
                report::fmt_f64(rep.sup_error)
            );
            Ok(true)
        }
        Command::Thm1(a) => {
            let cfg = ExperimentConfig {
                version: report::CONFIG_VERSION,
                pipeline: PipelineKind::Thm1,
                flow: Some(a.flow),
                flow1: None,
                flow2: None,
                d_list: parse_coords(&a.d)?,
                eps0: a.eps0,
                eps_rep: None,
                trials: a.trials,
                seed: a.seed,
                out_csv: a.out.clone(),
                out_summary: a
                    .summary
                    .unwrap_or_else(|| a.out.with_extension("summary.json")),
                out_certs: a.certs,
            };
            let out = report::run_experiment(&cfg)?;
            println!(
                "{} rows, {} standard passes, {} counterexamples",
                out.rows.len(),
                out.summary.standard_pass,
                out.summary.counterexamples
            );
            Ok(out.summary.all_invariants_pass)
        }
        Command::Thm2(a) => {
            let cfg = ExperimentConfig {
                version: report::CONFIG_VERSION,
                pipeline: PipelineKind::Thm2,
                flow: None,
                flow1: Some(a.flow1),
                flow2: Some(a.flow2),
                d_list: parse_coords(&a.d)?,
                eps0: a.eps0,
                eps_rep: None,
                trials: a.trials,
                seed: a.seed,
                out_csv: a.out.clone(),
                out_summary: a
                    .summary
                    .unwrap_or_else(|| a.out.with_extension("summary.json")),
                out_certs: a.certs,
            };
            let out = report::run_experiment(&cfg)?;
            println!(
                "{} rows, {} passes, {} counterexamples",
                out.rows.len(),
                out.summary.standard_pass,
                out.summary.counterexamples
            );
            Ok(out.summary.all_invariants_pass)
        }
        Command::Run(a) => {
            let cfg = ExperimentConfig::from_json(&fs::read_to_string(&a.config)?)?;
            let out = report::run_experiment(&cfg)?;
            println!(
                "{} rows, invariants pass: {}",
                out.rows.len(),
                out.summary.all_invariants_pass
            );
            Ok(out.summary.all_invariants_pass)
        }
        Command::VerifyCert(a) => {
            let f = load_flow(&a.flow)?;
            let xi = load_chain(&a.chain)?;
            let cert = load_cert(&a.cert)?;
            let sup = report::verify_certificate_files(&f, &xi, &cert, a.eps)?;
            println!("verified: sup {}", report::fmt_f64(sup));
            Ok(true)
        }
        Command::Export(a) => {
            match a.kind {
                ExportKindArg::Reparam => {
                    let cert = load_cert(a.cert.as_ref().ok_or_else(|| {
                        shadowlab::Error::param("reparam export needs --cert".to_string())
                    })?)?;
                    report::export_reparam(&cert, &a.out)?;
                }
                ExportKindArg::Orbit => {
                    let f = load_flow(a.flow.as_ref().ok_or_else(|| {
                        shadowlab::Error::param("orbit export needs --flow".to_string())
                    })?)?;
                    let x = point_of(
                        &f,
                        a.x.as_deref().ok_or_else(|| {
                            shadowlab::Error::param("orbit export needs --x".to_string())
                        })?,
                    )?;
                    report::export_orbit(
                        &f,
                        &x,
                        a.t0.unwrap_or(0.0),
                        a.t1.unwrap_or(10.0),
                        a.step.unwrap_or(0.1),
                        &a.out,
                    )?;
                }
                ExportKindArg::FreeSpace => {
                    let f = load_flow(a.flow.as_ref().ok_or_else(|| {
                        shadowlab::Error::param("free-space export needs --flow".to_string())
                    })?)?;
                    let xi = load_chain(a.chain.as_ref().ok_or_else(|| {
                        shadowlab::Error::param("free-space export needs --chain".to_string())
                    })?)?;
                    let x = point_of(
                        &f,
                        a.x.as_deref().ok_or_else(|| {
                            shadowlab::Error::param("free-space export needs --x".to_string())
                        })?,
                    )?;
                    let eps = a.eps.ok_or_else(|| {
                        shadowlab::Error::param("free-space export needs --eps".to_string())
                    })?;
                    let mut grid = SearchGrid::defaults_for(&xi);
                    let (lo, hi) = xi.window();
                    grid.orbit_window = Some((-2.0, (hi - lo) + 2.0));
                    report::export_free_space(&f, &xi, &x, eps, &grid, &a.out)?;
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("SHADOWLAB_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
