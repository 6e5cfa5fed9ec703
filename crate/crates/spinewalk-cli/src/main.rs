//! Experiment runner: parses a flat key-value config, dispatches the named
//! experiment, writes `report.json` plus CSV/SVG artifacts, and exits 0
//! only if every acceptance block passed.

use clap::{Parser, Subcommand};
use spinewalk::configfile::{ConfigError, RunConfig};
use spinewalk::experiments::{self, BaseLaw, ExperimentError, SHIPPED_BASE};
use spinewalk::harness::ScalingSpec;
use spinewalk::pathwise::{bundle_csv, BuildCaps, PathwiseSampler};
use spinewalk::report::{ecdf_csv, RunReport};
use spinewalk::rng::SeedTree;
use spinewalk::stable::curve_csv;
use spinewalk::{config_model, law, svg, walk};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spinewalk", version, about = "Galton-Watson spine constructions and critical-window configuration models, verified by Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Flat key-value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for report.json and artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also print the report JSON to stdout.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// O(n) height process vs brute force, and future-infimum invariance.
    HeightCheck,
    /// Print the tilting root of a law.
    Xi {
        #[arg(long)]
        law: Option<String>,
    },
    /// Spine construction vs the direct i.i.d. walk (two-sample KS).
    PathwiseLaw,
    /// Monte Carlo extinction frequency vs exp(-xi).
    Extinction,
    /// Rescaled size-biased walk marginal vs the stable closed form.
    StableMarginal,
    /// Exploration bookkeeping on full configuration-model runs.
    CmExplore,
    /// Exploration marginal vs the measure-changed transform, plus the
    /// across-n height-stability surrogate.
    KTilde,
    /// The (CM4) pgf-iteration heuristic across an n grid.
    Cm4Check,
    /// E[phi(n,t)] = 1 and the measure-change lower bound.
    PhiCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot build thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let cfg_text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                return ExitCode::from(3);
            }
        },
        None => String::new(),
    };
    let cfg = match RunConfig::parse(&cfg_text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(3);
        }
    };
    match run(&cli, &cfg) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(3)
        }
        Err(RunError::Experiment(e)) => {
            eprintln!("experiment error: {e}");
            ExitCode::from(1)
        }
        Err(RunError::Io(e)) => {
            eprintln!("io error: {e}");
            ExitCode::from(1)
        }
    }
}

enum RunError {
    Config(ConfigError),
    Experiment(ExperimentError),
    Io(std::io::Error),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<ExperimentError> for RunError {
    fn from(e: ExperimentError) -> Self {
        RunError::Experiment(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

fn base_law(cfg: &RunConfig) -> Result<BaseLaw, ConfigError> {
    Ok(BaseLaw {
        c: cfg.get_f64_or("base_c", SHIPPED_BASE.c)?,
        alpha: cfg.get_f64_or("base_alpha", SHIPPED_BASE.alpha)?,
        kmin: cfg.get_u64_or("base_kmin", SHIPPED_BASE.kmin)?,
    })
}

fn write_artifact(out: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    std::fs::write(out.join(name), contents)
}

fn emit(cli: &Cli, name: &str, seed: u64, pass: bool, report: &impl serde::Serialize) -> Result<(), RunError> {
    let run = RunReport::new(name, seed, pass, report);
    std::fs::write(cli.out.join("report.json"), run.to_json())?;
    if cli.json {
        print!("{}", run.to_json());
    }
    println!("{} {}", if pass { "PASS" } else { "FAIL" }, name);
    Ok(())
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<bool, RunError> {
    let seed = cli.seed.unwrap_or(cfg.get_u64_or("seed", 42)?);
    let out = cli.out.clone();
    std::fs::create_dir_all(&out)?;
    match &cli.cmd {
        Cmd::HeightCheck => {
            let ecfg = experiments::HeightCheckConfig {
                paths: cfg.get_u64_or("paths", 1000)?,
                max_len: cfg.get_usize_or("max_len", 200)?,
            };
            cfg.finish()?;
            let report = experiments::height_check(&ecfg, seed);
            let pass = report.pass;
            emit(cli, "height-check", seed, pass, &report)?;
            Ok(pass)
        }
        Cmd::Xi { law } => {
            let spec = match law {
                Some(l) => l.clone(),
                None => cfg.get_str("law")?,
            };
            cfg.finish()?;
            let parsed = law::OffspringLaw::parse(&spec).map_err(ExperimentError::Law)?;
            let root = law::find_xi(&parsed).map_err(ExperimentError::Law)?;
            #[derive(serde::Serialize)]
            struct XiReport {
                law: String,
                xi: f64,
                extinction_probability: f64,
            }
            let report = XiReport {
                law: spec.clone(),
                xi: root.xi(),
                extinction_probability: law::extinction_probability(&root),
            };
            println!("xi({spec}) = {:.10}", root.xi());
            emit(cli, "xi", seed, true, &report)?;
            Ok(true)
        }
        Cmd::PathwiseLaw => {
            let law_spec = cfg.get_str("law")?;
            let ecfg = experiments::PathwiseLawConfig {
                oracle_law: cfg.get_str_or("oracle_law", &law_spec),
                law: law_spec,
                ks_at: cfg.get_usize_list("ks_at").unwrap_or(vec![50, 100, 200]),
                replicas: cfg.get_usize_or("replicas", 10_000)?,
                batches: cfg.get_usize_or("batches", 3)?,
                min_pass_batches: cfg.get_usize_or("min_pass_batches", 2)?,
                p_threshold: cfg.get_f64_or("p_threshold", 0.01)?,
                expect_match: cfg.get_str_or("expect", "match") == "match",
            };
            cfg.finish()?;
            let report = experiments::pathwise_law(&ecfg, seed)?;
            // artifacts: one seeded bundle as CSV + SVG
            let parsed = law::OffspringLaw::parse(&ecfg.law).map_err(ExperimentError::Law)?;
            let sampler = PathwiseSampler::new(&parsed).map_err(ExperimentError::Pathwise)?;
            let horizon = ecfg.ks_at.iter().copied().max().unwrap_or(200) + 1;
            let bundle = sampler
                .build(horizon, &SeedTree::root(seed).child("plot"), BuildCaps::default())
                .map_err(ExperimentError::Pathwise)?;
            write_artifact(&out, "bundle.csv", &bundle_csv(&bundle))?;
            let as_xy = |vals: &[i64]| -> Vec<(f64, f64)> {
                vals.iter().enumerate().map(|(k, &v)| (k as f64, v as f64)).collect()
            };
            let series = vec![
                ("S".to_string(), as_xy(bundle.s.values())),
                ("S - future inf".to_string(), as_xy(bundle.s_minus_ffinf.values())),
                (
                    "H".to_string(),
                    bundle.h.as_slice().iter().enumerate().map(|(k, &v)| (k as f64, v as f64)).collect(),
                ),
            ];
            write_artifact(&out, "bundle.svg", &svg::line_plot("pathwise bundle", "k", "value", &series))?;
            for block in &report.blocks {
                println!(
                    "  {} k={}: passed {}/{} batches (p = {:?})",
                    block.quantity, block.k, block.passed_batches, report.batches, block.p_values
                );
            }
            let pass = report.pass;
            emit(cli, "pathwise-law", seed, pass, &report)?;
            Ok(pass)
        }
        Cmd::Extinction => {
            let ecfg = experiments::ExtinctionConfig {
                law: cfg.get_str_or("law", "binary:0.25"),
                trees: cfg.get_u64_or("trees", 100_000)?,
                max_vertices: cfg.get_u64_or("max_vertices", 1_000_000)?,
                max_generation: cfg.get_u64_or("max_generation", 10_000)?,
            };
            cfg.finish()?;
            let report = experiments::extinction(&ecfg, seed)?;
            println!(
                "  finite frequency {:.5} vs {:.5} +- {:.5}; censor leak {:.2e}",
                report.frequency, report.expected, report.band, report.censor_leak
            );
            let pass = report.pass;
            emit(cli, "extinction", seed, pass, &report)?;
            Ok(pass)
        }
        Cmd::StableMarginal => {
            let ecfg = experiments::StableMarginalConfig {
                base: base_law(cfg)?,
                lambdas: cfg.get_f64_list("lambdas").unwrap_or(vec![-1.0, 0.0, 1.0]),
                n: cfg.get_u64_or("n", 100_000)?,
                replicas: cfg.get_usize_or("replicas", 10_000)?,
                t: cfg.get_f64_or("t", 1.0)?,
                thetas: cfg.get_f64_list("thetas").unwrap_or(vec![0.5, 1.0, 2.0]),
                reference_lambda_override: cfg.get_f64_or("reference_lambda", f64::NAN).ok().filter(|v| !v.is_nan()),
                expect_match: cfg.get_str_or("expect", "match") == "match",
            };
            cfg.finish()?;
            let report = experiments::stable_marginal(&ecfg, seed)?;
            for b in &report.blocks {
                println!(
                    "  lambda={:+} theta={}: {:.4} vs {:.4} (3se = {:.4}) {}",
                    b.lambda,
                    b.theta,
                    b.empirical,
                    b.reference,
                    3.0 * b.stderr,
                    if b.pass { "ok" } else { "off" }
                );
            }
            // artifacts: ECDF of rescaled endpoints vs the stable sampler, first lambda
            if let Some(&lambda) = ecfg.lambdas.first() {
                let model = ecfg.base.model(lambda, ecfg.n)?;
                let spec = ScalingSpec::critical_window(ecfg.n, model.alpha(), vec![ecfg.t])
                    .map_err(ExperimentError::Harness)?;
                let m = spec.index_at(ecfg.t);
                let plot_seed = SeedTree::root(seed).child("plot");
                let count = 2000.min(ecfg.replicas);
                let walk_samples: Vec<f64> = (0..count)
                    .map(|r| {
                        let mut st = plot_seed.child("walk").index(r as u64).stream();
                        let mut s = 0i64;
                        for _ in 0..m {
                            s += model.sample_child_z(&mut st) as i64 - 2;
                        }
                        spec.space_scale * s as f64
                    })
                    .collect();
                let stable_samples = model
                    .stable_ref()
                    .sample_marginal(ecfg.t, count, &mut plot_seed.child("stable").stream());
                write_artifact(&out, "walk_ecdf.csv", &ecdf_csv(&walk_samples))?;
                write_artifact(&out, "stable_ecdf.csv", &ecdf_csv(&stable_samples))?;
                let to_series = |mut v: Vec<f64>| -> Vec<(f64, f64)> {
                    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    v.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / count as f64)).collect()
                };
                write_artifact(
                    &out,
                    "marginal_ecdf.svg",
                    &svg::line_plot(
                        "rescaled walk vs stable reference",
                        "x",
                        "F(x)",
                        &[
                            ("rescaled walk".to_string(), to_series(walk_samples)),
                            ("stable sampler".to_string(), to_series(stable_samples)),
                        ],
                    ),
                )?;
            }
            let pass = report.pass;
            emit(cli, "stable-marginal", seed, pass, &report)?;
            Ok(pass)
        }
        Cmd::CmExplore => {
            let ecfg = experiments::CmExploreConfig {
                base: base_law(cfg)?,
                lambda: cfg.get_f64_or("lambda", 0.0)?,
                n: cfg.get_u64_or("n", 10_000)?,
                runs: cfg.get_u64_or("runs", 100)?,
            };
            cfg.finish()?;
            let report = experiments::cm_explore(&ecfg, seed)?;
            // artifacts: component summaries and the first exploration path
            let model = ecfg.base.model(ecfg.lambda, ecfg.n)?;
            let rseed = SeedTree::root(seed).child("cm-explore").index(0);
            let degrees = model.sample_degrees(&mut rseed.child("degrees").stream());
            let record = config_model::explore(&degrees, &mut rseed.child("pairing").stream());
            let summaries = config_model::component_summaries(&record);
            write_artifact(&out, "components.jsonl", &config_model::components_jsonl(&summaries))?;
            let h = walk::height_process(&record.path);
            write_artifact(&out, "exploration_path.csv", &walk::path_csv(&record.path, &h))?;
            let series = vec![(
                "S~".to_string(),
                record.path.values().iter().enumerate().map(|(k, &v)| (k as f64, v as f64)).collect(),
            )];
            write_artifact(&out, "exploration_path.svg", &svg::line_plot("exploration walk", "k", "S", &series))?;
            println!(
                "  {} runs at n={}: {} preservation failures, {} size-sum failures",
                report.runs, report.n, report.degree_preservation_failures, report.size_sum_failures
            );
            let pass = report.pass;
            emit(cli, "cm-explore", seed, pass, &report)?;
            Ok(pass)
        }
        Cmd::KTilde => {
            let ecfg = experiments::KTildeConfig {
                base: base_law(cfg)?,
                lambdas: cfg.get_f64_list("lambdas").unwrap_or(vec![0.0, 1.0]),
                n: cfg.get_u64_or("n", 100_000)?,
                replicas: cfg.get_usize_or("replicas", 500)?,
                t: cfg.get_f64_or("t", 1.0)?,
                thetas: cfg.get_f64_list("thetas").unwrap_or(vec![1.0]),
                quad_margin: cfg.get_f64_or("quad_margin", 1e-6)?,
            };
            let stability_seeds = cfg.get_u64_or("stability_seeds", 5)?;
            let stability = if stability_seeds > 0 {
                Some(experiments::HeightStabilityConfig {
                    base: ecfg.base,
                    lambda: cfg.get_f64_or("stability_lambda", 1.0)?,
                    n: cfg.get_u64_or("stability_n", 10_000)?,
                    seeds: stability_seeds,
                    replicas: cfg.get_usize_or("stability_replicas", 1000)?,
                    t: ecfg.t,
                    threshold: cfg.get_f64_or("stability_threshold", 0.05)?,
                })
            } else {
                None
            };
            cfg.finish()?;
            let report = experiments::k_tilde(&ecfg, seed)?;
            for b in &report.blocks {
                println!(
                    "  lambda={:+} theta={}: {:.4} vs {:.4} (3se+margin = {:.4}) {}",
                    b.lambda,
                    b.theta,
                    b.empirical,
                    b.reference,
                    3.0 * b.stderr + ecfg.quad_margin,
                    if b.pass { "ok" } else { "off" }
                );
            }
            let stability_report = match &stability {
                Some(scfg) => Some(experiments::height_stability(scfg, seed)?),
                None => None,
            };
            if let Some(s) = &stability_report {
                println!(
                    "  height stability: median KS distance {:.4} (threshold {})",
                    s.median_distance, s.threshold
                );
            }
            #[derive(serde::Serialize)]
            struct Combined {
                k_tilde: experiments::KTildeReport,
                height_stability: Option<experiments::HeightStabilityReport>,
            }
            // reference curve artifact
            if let Some(&lambda) = ecfg.lambdas.first() {
                let model = ecfg.base.model(lambda, ecfg.n)?;
                let sref = model.stable_ref();
                let mut rows = Vec::new();
                for i in 0..=40 {
                    let theta = i as f64 * 0.1;
                    if let Ok(v) = sref.k_tilde_laplace(theta, ecfg.t) {
                        rows.push((theta, ecfg.t, v.value));
                    }
                }
                write_artifact(&out, "k_tilde_reference.csv", &curve_csv(&rows))?;
                let series = vec![(
                    format!("E[exp(-theta K~)] at lambda={lambda}"),
                    rows.iter().map(|&(th, _, v)| (th, v)).collect::<Vec<_>>(),
                )];
                write_artifact(&out, "k_tilde_reference.svg", &svg::line_plot("transform reference", "theta", "value", &series))?;
            }
            let pass = report.pass && stability_report.as_ref().map_or(true, |s| s.pass);
            let combined = Combined { k_tilde: report, height_stability: stability_report };
            emit(cli, "k-tilde", seed, pass, &combined)?;
            Ok(pass)
        }
        Cmd::Cm4Check => {
            let ecfg = experiments::Cm4Config {
                base: base_law(cfg)?,
                lambda: cfg.get_f64_or("lambda", 0.0)?,
                n: cfg.get_u64_or("n", 100_000)?,
                delta: cfg.get_f64_or("delta", 3.0)?,
                n_grid: cfg.get_u64_list("n_grid").unwrap_or(vec![1_000, 10_000, 100_000]),
                floor: cfg.get_f64_or("floor", 1e-3)?,
            };
            cfg.finish()?;
            let report = experiments::cm4_check(&ecfg)?;
            let mut csv = String::from("n,iterations,iterate,value\n");
            for r in &report.rows {
                println!("  n={}: iterate {:.6}, value {:.6e}", r.n, r.iterate, r.value);
                let _ = writeln!(csv, "{},{},{},{}", r.n, r.iterations, r.iterate, r.value);
            }
            write_artifact(&out, "cm4_iteration.csv", &csv)?;
            let pass = report.pass;
            emit(cli, "cm4-check", seed, pass, &report)?;
            Ok(pass)
        }
        Cmd::PhiCheck => {
            let ecfg = experiments::PhiConfig {
                base: base_law(cfg)?,
                lambda: cfg.get_f64_or("lambda", 0.0)?,
                n: cfg.get_u64_or("n", 10_000)?,
                t: cfg.get_f64_or("t", 0.5)?,
                outer: cfg.get_u64_or("outer", 1000)?,
                inner: cfg.get_u64_or("inner", 1000)?,
                inequality_prefixes: cfg.get_u64_or("inequality_prefixes", 100)?,
                slack: cfg.get_f64_or("slack", 0.99)?,
            };
            cfg.finish()?;
            let report = experiments::phi_check(&ecfg, seed)?;
            println!(
                "  E[phi] = {:.5} +- {:.5}; inequality holds on {}/{} prefixes",
                report.mean_estimate,
                report.mean_stderr,
                report.inequality.iter().filter(|r| r.pass).count(),
                report.inequality.len()
            );
            let mut csv = String::from("prefix,estimate,stderr,lower_bound,pass\n");
            for r in &report.inequality {
                let _ = writeln!(csv, "{},{},{},{},{}", r.prefix, r.estimate, r.stderr, r.lower_bound, r.pass);
            }
            write_artifact(&out, "phi_inequality.csv", &csv)?;
            let pass = report.pass;
            emit(cli, "phi-check", seed, pass, &report)?;
            Ok(pass)
        }
    }
}
