//! Command-line entry point: every operation reads one validated config,
//! derives all randomness from a single master seed, and writes its results
//! plus a run manifest into the output directory.

mod config;

use clap::{Parser, Subcommand};
use incipient_core::harness::fit_exponent;
use incipient_core::iibrw::{finite_n_probability, iibrw_probability, sample_iibrw_profile};
use incipient_core::lattice::{
    invade, invasion_rpoint, usf_rpoint, wilson, InvasionConfig, WiredBox, DEFAULT_EXPOSED_CAP,
};
use incipient_core::law::Point;
use incipient_core::moments::{
    icsbm_moment, rho_fourier, sbm_moment, scaling_gap, tau_fourier, MomentValue, Provenance,
    QuadConfig, RPointQuery, ScalingConstants,
};
use incipient_core::op::{
    disjoint_survival, estimate_pc, estimate_rpoint_op, estimate_theta, iic_ball_mass, OPConfig,
};
use incipient_core::rng::sample_stream;
use incipient_core::stats::Summary;
use incipient_core::tree::{
    sample_population_profile, survival_probability, EmbeddedPrefix, Word,
};
use incipient_core::verify::{run_suite, Status, Suite, VerifyOptions};
use incipient_core::Error as CoreError;
use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write as FmtWrite;
use std::path::{Path, PathBuf};
use std::time::Instant;

const POPULATION_CAP: u64 = 10_000_000;

#[derive(Parser)]
#[command(name = "incipient", version, about = "Incipient infinite structures: samplers, transforms, and verification")]
struct Cli {
    /// TOML configuration file; omitted means all defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// dotted-path override, e.g. --set op.samples=5000 (repeatable)
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// output directory for results and the run manifest
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// worker pool size (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Critical branching random walk: survival curve and population profile
    Brw,
    /// Incipient infinite branching random walk
    Iibrw {
        /// sample | exact
        action: Option<String>,
        /// JSON cylinder file for exact mode
        #[arg(long)]
        cylinder: Option<PathBuf>,
    },
    /// Exact lattice r-point transforms
    Rpoint {
        /// tau | rho
        action: Option<String>,
    },
    /// Super-Brownian moment measures
    Mm {
        /// sbm | icsbm
        action: Option<String>,
    },
    /// Rescaled lattice transforms against their continuum limit
    Scaling,
    /// Spread-out oriented percolation
    Op {
        /// theta | pc | rpoint | ballmass | disjoint
        action: Option<String>,
    },
    /// Wired uniform spanning forests
    Usf {
        /// sample | rpoint
        action: Option<String>,
    },
    /// Invasion percolation
    Invade {
        /// run | rpoint | weights
        action: Option<String>,
    },
    /// Acceptance batteries
    Verify {
        /// exact | statistical-fast | statistical-full
        suite: Option<String>,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
    Statistical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Statistical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) | CliError::Statistical(m) => m,
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidLaw(_)
            | CoreError::InvalidStep(_)
            | CoreError::InvalidTree(_)
            | CoreError::InvalidConfig(_)
            | CoreError::OrderTooLarge { .. } => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

/// Everything a run writes besides the manifest itself.
struct Outputs {
    dir: PathBuf,
    paths: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            paths: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.paths.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let cfg = config::load(cli.config.as_deref(), &cli.set)?;
    let digest = config::digest(&cfg);
    let start = Instant::now();
    let mut out = Outputs::new(&cli.out)?;
    // config echo: re-parses to the identical validated config
    let echo = toml::to_string(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    out.write("config.toml", echo.as_bytes())?;

    let (name, params, samples) = match &cli.cmd {
        Cmd::Brw => (
            "brw",
            serde_json::to_value(&cfg.brw).unwrap(),
            run_brw(&cfg, &digest, &mut out)?,
        ),
        Cmd::Iibrw { action, cylinder } => (
            "iibrw",
            serde_json::to_value(&cfg.iibrw).unwrap(),
            run_iibrw(&cfg, &digest, action.as_deref(), cylinder.as_deref(), &mut out)?,
        ),
        Cmd::Rpoint { action } => (
            "rpoint",
            serde_json::to_value(&cfg.rpoint).unwrap(),
            run_rpoint(&cfg, &digest, action.as_deref(), &mut out)?,
        ),
        Cmd::Mm { action } => (
            "mm",
            serde_json::to_value(&cfg.mm).unwrap(),
            run_mm(&cfg, &digest, action.as_deref(), &mut out)?,
        ),
        Cmd::Scaling => (
            "scaling",
            serde_json::to_value(&cfg.scaling).unwrap(),
            run_scaling(&cfg, &digest, &mut out)?,
        ),
        Cmd::Op { action } => (
            "op",
            serde_json::to_value(&cfg.op).unwrap(),
            run_op(&cfg, &digest, action.as_deref(), &mut out)?,
        ),
        Cmd::Usf { action } => (
            "usf",
            serde_json::to_value(&cfg.usf).unwrap(),
            run_usf(&cfg, &digest, action.as_deref(), &mut out)?,
        ),
        Cmd::Invade { action } => (
            "invade",
            serde_json::to_value(&cfg.invade).unwrap(),
            run_invade(&cfg, &digest, action.as_deref(), &mut out)?,
        ),
        Cmd::Verify { suite } => (
            "verify",
            serde_json::to_value(&cfg.verify).unwrap(),
            run_verify(&cfg, &digest, suite.as_deref(), &mut out)?,
        ),
    };

    // the manifest carries the wall clock so result files stay byte-stable
    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "seed": cfg.seed,
        "config_digest": digest,
        "params": params,
        "outputs": out.paths.clone(),
        "samples": samples,
        "wall_ms": start.elapsed().as_millis() as u64,
    });
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(out.dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn action_of<'a>(given: Option<&'a str>, fallback: &'a str) -> &'a str {
    given.unwrap_or(fallback)
}

fn summary_json(s: &Summary) -> Value {
    json!({ "n": s.n, "mean": s.mean, "se": s.se })
}

fn provenance_str(v: &MomentValue) -> &'static str {
    match v.provenance {
        Provenance::ExactRecursion => "exact-recursion",
        Provenance::Quadrature => "quadrature",
        Provenance::ClosedForm => "closed-form",
    }
}

fn run_brw(cfg: &config::Config, digest: &str, out: &mut Outputs) -> Result<u64, CliError> {
    let law = cfg.law.build()?;
    let step = cfg.step.build()?;
    let (horizon, samples) = (cfg.brw.horizon, cfg.brw.samples);
    let curve = survival_probability(&law, horizon);
    let mut totals = vec![Vec::with_capacity(samples); horizon + 1];
    for i in 0..samples {
        let mut rng = sample_stream(cfg.seed, i as u64);
        let profile = sample_population_profile(&law, &step, horizon, &mut rng, POPULATION_CAP)?;
        for (n, mu) in profile.iter().enumerate() {
            totals[n].push(mu.values().sum::<u64>() as f64);
        }
    }
    let sums: Vec<Summary> = totals.iter().map(|c| incipient_core::stats::summarize(c)).collect();
    let rows: Vec<String> = (0..=horizon)
        .map(|n| {
            format!(
                "{n},{:.8e},{:.8e},{:.8e}",
                curve.theta(n),
                sums[n].mean,
                sums[n].se
            )
        })
        .collect();
    out.write_csv("brw_curve.csv", "n,theta,mean_population,se", &rows)?;
    out.write_json(
        "result.json",
        &json!({
            "seed": cfg.seed,
            "config_digest": digest,
            "horizon": horizon,
            "samples": samples,
            "sigma_p_sq": law.sigma_p_sq(),
            "survival": curve.thetas,
            "mean_population": sums.iter().map(summary_json).collect::<Vec<_>>(),
        }),
    )?;
    Ok(samples as u64)
}

/// JSON cylinder: a depth and a node list of (word, site) pairs.
#[derive(Deserialize)]
struct CylinderFile {
    depth: usize,
    nodes: Vec<CylinderNode>,
}

#[derive(Deserialize)]
struct CylinderNode {
    word: Vec<u32>,
    site: Vec<i64>,
}

fn load_cylinder(path: &Path) -> Result<EmbeddedPrefix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let parsed: CylinderFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("cylinder file: {e}")))?;
    let mut nodes: BTreeMap<Word, Point> = BTreeMap::new();
    for n in parsed.nodes {
        nodes.insert(n.word.clone(), Point::from_slice(&n.site));
    }
    Ok(EmbeddedPrefix {
        depth: parsed.depth,
        nodes,
    })
}

fn run_iibrw(
    cfg: &config::Config,
    digest: &str,
    action: Option<&str>,
    cylinder: Option<&Path>,
    out: &mut Outputs,
) -> Result<u64, CliError> {
    let law = cfg.law.build()?;
    let step = cfg.step.build()?;
    match action_of(action, &cfg.iibrw.mode) {
        "exact" => {
            let path = cylinder.ok_or_else(|| {
                CliError::Validation("iibrw exact requires --cylinder <file>".into())
            })?;
            let prefix = load_cylinder(path)?;
            let p = iibrw_probability(&law, &step, &prefix)?;
            let curve = survival_probability(&law, cfg.iibrw.n);
            let p_n = finite_n_probability(&law, &step, &prefix, cfg.iibrw.n, &curve)?;
            out.write_json(
                "result.json",
                &json!({
                    "seed": cfg.seed,
                    "config_digest": digest,
                    "depth": prefix.depth,
                    "probability": p,
                    "finite_n": { "n": cfg.iibrw.n, "probability": p_n },
                }),
            )?;
            Ok(0)
        }
        "sample" => {
            let (m, samples) = (cfg.iibrw.horizon, cfg.iibrw.samples);
            let mut totals = vec![Vec::with_capacity(samples); m + 1];
            let mut spine_sq = Vec::with_capacity(samples);
            for i in 0..samples {
                let mut rng = sample_stream(cfg.seed, i as u64);
                let profile = sample_iibrw_profile(&law, &step, m, &mut rng, POPULATION_CAP)?;
                for (n, mu) in profile.populations.iter().enumerate() {
                    totals[n].push(mu.values().sum::<u64>() as f64);
                }
                let end = &profile.spine[m];
                spine_sq.push(end.iter().map(|c| (*c * *c) as f64).sum::<f64>());
            }
            let sums: Vec<Summary> =
                totals.iter().map(|c| incipient_core::stats::summarize(c)).collect();
            let rows: Vec<String> = (0..=m)
                .map(|n| {
                    let expected = 1.0 + law.sigma_p_sq() * n as f64;
                    format!("{n},{:.8e},{:.8e},{expected:.8e}", sums[n].mean, sums[n].se)
                })
                .collect();
            out.write_csv("iibrw_curve.csv", "n,mean_population,se,expected", &rows)?;
            out.write_json(
                "result.json",
                &json!({
                    "seed": cfg.seed,
                    "config_digest": digest,
                    "horizon": m,
                    "samples": samples,
                    "mean_population": sums.iter().map(summary_json).collect::<Vec<_>>(),
                    "spine_mean_square": summary_json(&incipient_core::stats::summarize(&spine_sq)),
                }),
            )?;
            Ok(samples as u64)
        }
        other => Err(CliError::Validation(format!(
            "iibrw action must be sample or exact (got {other:?})"
        ))),
    }
}

fn run_rpoint(
    cfg: &config::Config,
    digest: &str,
    action: Option<&str>,
    out: &mut Outputs,
) -> Result<u64, CliError> {
    let law = cfg.law.build()?;
    let step = cfg.step.build()?;
    let q = RPointQuery::new(cfg.rpoint.times.clone(), cfg.rpoint.kvecs.clone())?;
    let object = action_of(action, &cfg.rpoint.object);
    let value = match object {
        "tau" => tau_fourier(&law, &step, &q)?,
        "rho" => rho_fourier(&law, &step, &q)?,
        other => {
            return Err(CliError::Validation(format!(
                "rpoint action must be tau or rho (got {other:?})"
            )))
        }
    };
    out.write_json(
        "result.json",
        &json!({
            "seed": cfg.seed,
            "config_digest": digest,
            "object": object,
            "times": q.times,
            "kvecs": q.kvecs,
            "value": value.value,
            "imag_residue": value.imag_residue,
            "provenance": provenance_str(&value),
        }),
    )?;
    Ok(0)
}

fn run_mm(
    cfg: &config::Config,
    digest: &str,
    action: Option<&str>,
    out: &mut Outputs,
) -> Result<u64, CliError> {
    let quad = QuadConfig { tol: cfg.mm.tol };
    let object = action_of(action, &cfg.mm.object);
    let value = match object {
        "sbm" => sbm_moment(&cfg.mm.times, &cfg.mm.kvecs, &quad)?,
        "icsbm" => icsbm_moment(&cfg.mm.times, &cfg.mm.kvecs, &quad)?,
        other => {
            return Err(CliError::Validation(format!(
                "mm action must be sbm or icsbm (got {other:?})"
            )))
        }
    };
    out.write_json(
        "result.json",
        &json!({
            "seed": cfg.seed,
            "config_digest": digest,
            "object": object,
            "times": cfg.mm.times,
            "kvecs": cfg.mm.kvecs,
            "tol": cfg.mm.tol,
            "value": value.value,
            "provenance": provenance_str(&value),
        }),
    )?;
    Ok(0)
}

fn run_scaling(cfg: &config::Config, digest: &str, out: &mut Outputs) -> Result<u64, CliError> {
    let law = cfg.law.build()?;
    let step = cfg.step.build()?;
    let consts = ScalingConstants::brw(&law);
    let quad = QuadConfig {
        tol: cfg.scaling.tol,
    };
    let mut gaps = Vec::with_capacity(cfg.scaling.scales.len());
    for &m in &cfg.scaling.scales {
        let gap = scaling_gap(
            &law,
            &step,
            &consts,
            &cfg.scaling.times,
            &cfg.scaling.kvecs,
            m,
            &quad,
        )?;
        gaps.push((m, gap));
    }
    let rows: Vec<String> = gaps.iter().map(|(m, g)| format!("{m},{g:.8e}")).collect();
    out.write_csv("scaling_gap.csv", "m,gap", &rows)?;
    out.write_json(
        "result.json",
        &json!({
            "seed": cfg.seed,
            "config_digest": digest,
            "times": cfg.scaling.times,
            "kvecs": cfg.scaling.kvecs,
            "gaps": gaps.iter().map(|(m, g)| json!({"m": m, "gap": g})).collect::<Vec<_>>(),
        }),
    )?;
    Ok(0)
}

fn run_op(
    cfg: &config::Config,
    digest: &str,
    action: Option<&str>,
    out: &mut Outputs,
) -> Result<u64, CliError> {
    let op = OPConfig::spread_out(cfg.op.dim, cfg.op.l, cfg.op.p)?;
    let base = json!({ "seed": cfg.seed, "config_digest": digest });
    let merge = |mut a: Value, b: Value| {
        a.as_object_mut()
            .unwrap()
            .extend(b.as_object().unwrap().clone());
        a
    };
    match action_of(action, &cfg.op.action) {
        "theta" => {
            let curve = estimate_theta(&op, cfg.op.horizon, cfg.op.samples, cfg.seed)?;
            let rows: Vec<String> = curve
                .thetas
                .iter()
                .zip(&curve.ses)
                .enumerate()
                .map(|(k, (t, se))| format!("{k},{t:.8e},{se:.8e},{:.8e}", k as f64 * t))
                .collect();
            out.write_csv("op_theta.csv", "k,theta,se,k_theta", &rows)?;
            out.write_json(
                "result.json",
                &merge(base, json!({ "action": "theta", "samples": curve.samples })),
            )?;
            Ok(cfg.op.samples as u64)
        }
        "pc" => {
            let est = estimate_pc(&op, cfg.op.lo, cfg.op.hi, cfg.op.horizon, cfg.op.samples, cfg.seed)?;
            out.write_json(
                "result.json",
                &merge(
                    base,
                    json!({
                        "action": "pc",
                        "p": est.p,
                        "drift": est.drift,
                        "iterations": est.iterations,
                    }),
                ),
            )?;
            Ok(cfg.op.samples as u64)
        }
        "rpoint" => {
            let est = estimate_rpoint_op(
                &op,
                &cfg.op.times,
                &cfg.op.kvecs,
                cfg.op.horizon,
                cfg.op.samples,
                cfg.seed,
            )?;
            out.write_json(
                "result.json",
                &merge(
                    base,
                    json!({
                        "action": "rpoint",
                        "tau": summary_json(&est.tau),
                        "rho": summary_json(&est.rho),
                    }),
                ),
            )?;
            Ok(cfg.op.samples as u64)
        }
        "ballmass" => {
            let est = iic_ball_mass(&op, &cfg.op.radii, cfg.op.horizon, cfg.op.samples, cfg.seed)?;
            let rows: Vec<String> = est
                .radii
                .iter()
                .zip(&est.masses)
                .map(|(r, s)| format!("{r},{:.8e},{:.8e}", s.mean, s.se))
                .collect();
            out.write_csv("op_ballmass.csv", "r,mean,se", &rows)?;
            let fit = fit_exponent(&est.radii, &est.masses).ok();
            out.write_json(
                "result.json",
                &merge(
                    base,
                    json!({
                        "action": "ballmass",
                        "truncated": est.truncated,
                        "masses": est.masses.iter().map(summary_json).collect::<Vec<_>>(),
                        "fit": fit.map(|f| json!({"exponent": f.exponent, "se": f.se})),
                    }),
                ),
            )?;
            Ok(cfg.op.samples as u64)
        }
        "disjoint" => {
            let s = disjoint_survival(
                &op,
                cfg.op.from,
                cfg.op.to,
                cfg.op.horizon,
                cfg.op.samples,
                cfg.seed,
            )?;
            out.write_json(
                "result.json",
                &merge(base, json!({ "action": "disjoint", "probability": summary_json(&s) })),
            )?;
            Ok(cfg.op.samples as u64)
        }
        other => Err(CliError::Validation(format!(
            "op action must be theta, pc, rpoint, ballmass, or disjoint (got {other:?})"
        ))),
    }
}

fn run_usf(
    cfg: &config::Config,
    digest: &str,
    action: Option<&str>,
    out: &mut Outputs,
) -> Result<u64, CliError> {
    let boxx = WiredBox::new(cfg.usf.dim, cfg.usf.n)?;
    match action_of(action, "rpoint") {
        "sample" => {
            let (graph, root) = boxx.graph()?;
            let order: Vec<usize> = (0..boxx.n_vertices()).collect();
            let mut rng = sample_stream(cfg.seed, 0);
            let forest = wilson(&graph, root, &order, &mut rng);
            let mut lines = String::new();
            for v in 0..boxx.n_vertices() {
                let from = boxx.vertex(v);
                let coords = |x: &Point| {
                    x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
                };
                match forest.parent[v] {
                    Some((p, _)) if p != root => {
                        writeln!(lines, "{} {}", coords(&from), coords(&boxx.vertex(p))).unwrap()
                    }
                    Some(_) => writeln!(lines, "{} wired", coords(&from)).unwrap(),
                    None => {}
                }
            }
            out.write("usf_edges.txt", lines.as_bytes())?;
            out.write_json(
                "result.json",
                &json!({
                    "seed": cfg.seed,
                    "config_digest": digest,
                    "dim": cfg.usf.dim,
                    "n": cfg.usf.n,
                    "vertices": boxx.n_vertices(),
                }),
            )?;
            Ok(1)
        }
        "rpoint" => {
            let est = usf_rpoint(&boxx, &cfg.usf.times, &cfg.usf.kvecs, cfg.usf.samples, cfg.seed)?;
            let rows: Vec<String> = est
                .shells
                .iter()
                .enumerate()
                .map(|(m, s)| format!("{m},{:.8e},{:.8e}", s.mean, s.se))
                .collect();
            out.write_csv("usf_shells.csv", "m,mean,se", &rows)?;
            out.write_json(
                "result.json",
                &json!({
                    "seed": cfg.seed,
                    "config_digest": digest,
                    "times": cfg.usf.times,
                    "kvecs": cfg.usf.kvecs,
                    "rho": summary_json(&est.rho),
                    "shells": est.shells.iter().map(summary_json).collect::<Vec<_>>(),
                }),
            )?;
            Ok(cfg.usf.samples as u64)
        }
        other => Err(CliError::Validation(format!(
            "usf action must be sample or rpoint (got {other:?})"
        ))),
    }
}

/// Versioned binary bond framing: magic "IPB1", then little-endian u32
/// dimension, u64 bond count, and per bond the two endpoints as d i64
/// coordinates each.
fn bond_frame(dim: usize, bonds: &[(Point, Point)]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + bonds.len() * dim * 16);
    buf.extend_from_slice(b"IPB1");
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    buf.extend_from_slice(&(bonds.len() as u64).to_le_bytes());
    for (a, b) in bonds {
        for c in a.iter().chain(b.iter()) {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    buf
}

fn run_invade(
    cfg: &config::Config,
    digest: &str,
    action: Option<&str>,
    out: &mut Outputs,
) -> Result<u64, CliError> {
    let icfg = InvasionConfig {
        dim: cfg.invade.dim,
        cap: cfg.invade.cap,
    };
    match action_of(action, "run") {
        "run" | "weights" => {
            let emit_edges = action_of(action, "run") == "run";
            let mut rng = sample_stream(cfg.seed, 0);
            let state = invade(&icfg, cfg.invade.budget, &mut rng, DEFAULT_EXPOSED_CAP)?;
            let rows: Vec<String> = state
                .trace
                .iter()
                .enumerate()
                .map(|(i, w)| format!("{i},{w}"))
                .collect();
            out.write_csv("invade_trace.csv", "i,weight", &rows)?;
            if emit_edges {
                let mut lines = String::new();
                for (a, b) in &state.invaded_bonds {
                    let coords = |x: &Point| {
                        x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
                    };
                    writeln!(lines, "{} {}", coords(a), coords(b)).unwrap();
                }
                out.write("invade_edges.txt", lines.as_bytes())?;
                out.write(
                    "invade_bonds.bin",
                    &bond_frame(cfg.invade.dim, &state.invaded_bonds),
                )?;
            }
            let finite_max = state
                .trace
                .iter()
                .filter(|w| w.is_finite())
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            out.write_json(
                "result.json",
                &json!({
                    "seed": cfg.seed,
                    "config_digest": digest,
                    "budget": cfg.invade.budget,
                    "cap": cfg.invade.cap,
                    "bonds": state.invaded_bonds.len(),
                    "vertices": state.invaded_vertices.len(),
                    "max_finite_weight": finite_max,
                    "uniform_picks": state.uniform_picks,
                }),
            )?;
            Ok(1)
        }
        "rpoint" => {
            let times = cfg.usf.times.clone();
            let kvecs = cfg.usf.kvecs.clone();
            let est = invasion_rpoint(
                &icfg,
                cfg.invade.budget,
                &times,
                &kvecs,
                cfg.usf.samples,
                cfg.seed,
            )?;
            let rows: Vec<String> = est
                .shells
                .iter()
                .enumerate()
                .map(|(m, s)| format!("{m},{:.8e},{:.8e}", s.mean, s.se))
                .collect();
            out.write_csv("invade_shells.csv", "m,mean,se", &rows)?;
            out.write_json(
                "result.json",
                &json!({
                    "seed": cfg.seed,
                    "config_digest": digest,
                    "times": times,
                    "kvecs": kvecs,
                    "rho": summary_json(&est.rho),
                    "shells": est.shells.iter().map(summary_json).collect::<Vec<_>>(),
                }),
            )?;
            Ok(cfg.usf.samples as u64)
        }
        other => Err(CliError::Validation(format!(
            "invade action must be run, rpoint, or weights (got {other:?})"
        ))),
    }
}

fn run_verify(
    cfg: &config::Config,
    digest: &str,
    suite: Option<&str>,
    out: &mut Outputs,
) -> Result<u64, CliError> {
    let name = action_of(suite, &cfg.verify.suite);
    let suite = Suite::parse(name)
        .ok_or_else(|| {
            CliError::Validation(format!(
                "verify suite must be exact, statistical-fast, or statistical-full (got {name:?})"
            ))
        })?;
    let offspring = if cfg.law.kind == "explicit" {
        Some(cfg.law.probs.clone())
    } else {
        None
    };
    let opts = VerifyOptions {
        seed: cfg.seed,
        offspring,
    };
    let results = run_suite(suite, &opts);
    let mut failed = Vec::new();
    for r in &results {
        let tag = match r.status {
            Status::Passed => "pass",
            Status::Failed => "FAIL",
            Status::Recorded => "recorded",
            Status::Skipped => "skipped",
        };
        println!("criterion {:2} [{tag}] {}: {}", r.id, r.name, r.detail);
        if r.status == Status::Failed {
            failed.push(r.id);
        }
    }
    out.write_json(
        "result.json",
        &json!({
            "seed": cfg.seed,
            "config_digest": digest,
            "suite": name,
            "criteria": results,
        }),
    )?;
    if !failed.is_empty() {
        return Err(CliError::Statistical(format!(
            "failed criteria: {failed:?}"
        )));
    }
    Ok(0)
}
