//! `tiltmax`: config-driven runner for simulation, distribution evaluation,
//! lattice-constant estimation, identity checks, two-sided extension, and
//! the deterministic quadrature oracles.
//!
//! Every run is reducible to an `ExperimentConfig`; flags are sugar that
//! builds one. Outputs embed `(seed, config hash, version)` so any artifact
//! can be regenerated. Exit codes: 0 success/pass, 2 identity-check fail,
//! 1 error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use tiltmax_core::config::{
    ExperimentConfig, FidiMethod, GridSpec, IdentitySpec, ModelSpec, PickandsMethodSpec,
    SimAlgorithm, TaskSpec, DEFAULT_ERROR_BUDGET, DEFAULT_RADIUS, DEFAULT_REPS,
};
use tiltmax_core::distribution::{
    empirical_fidi, hr_closed_form, neglog_fidi_infargmax, neglog_fidi_mc, FidiQuery,
};
use tiltmax_core::pickands::{
    oracle_argmax_prob, oracle_ratio, pickands_argmax_prob, pickands_direct,
    pickands_lower_bound_c0, pickands_ratio,
};
use tiltmax_core::report::run_replicates;
use tiltmax_core::simulate::{simulate_two_sided, DirectSimulator, DmSimulator, FieldSample};
use tiltmax_core::spectral::SpectralModel;
use tiltmax_core::stationarity::{
    check_field_stationarity, check_theta_shift, check_tilt_shift_mc, check_xi_shift_gaussian,
    functional_library, IdentityCheckReport,
};
use tiltmax_core::{Error, Grid, RngStream};

#[derive(Parser)]
#[command(name = "tiltmax", version, about = "Max-stable process toolkit")]
struct Cli {
    /// RNG seed shared by all replicate streams.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo replicates (default 100000).
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Worker threads (default: host parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run from a JSON experiment config instead of flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone)]
struct ModelArg {
    /// Model spec as JSON, e.g. '{"family":"fbm","alpha":1.0}'.
    #[arg(long)]
    model: String,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the max-stable field; one CSV row per replicate.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        /// Grid spec as JSON: {"dim":1,"delta":0.5,"extent":2.0} or {"points":[[0.0],[1.0]]}.
        #[arg(long)]
        grid: String,
        #[arg(long, value_parser = ["dm", "direct"], default_value = "dm")]
        algorithm: String,
        /// Error budget of the direct algorithm.
        #[arg(long, default_value_t = DEFAULT_ERROR_BUDGET)]
        budget: f64,
    },
    /// Evaluate -ln P(zeta(t_i) <= x_i).
    Fidi {
        #[command(flatten)]
        model: ModelArg,
        /// Comma-separated 1-d point coordinates, e.g. "0,1".
        #[arg(long)]
        points: String,
        /// Comma-separated thresholds, e.g. "0,0".
        #[arg(long)]
        x: String,
        #[arg(long, value_parser = ["mc", "infargmax", "empirical", "closed-form"])]
        method: String,
    },
    /// Estimate the lattice constant.
    Pickands {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_parser = ["direct", "ratio", "argmax", "c0"])]
        method: String,
        #[arg(long, default_value_t = DEFAULT_RADIUS)]
        radius: f64,
        /// Window edge T (direct method).
        #[arg(long)]
        window: Option<f64>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Check a shift/tilting identity; exit 0 pass, 2 fail.
    Check {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_parser = ["xi-shift", "tilt-shift", "theta-shift", "field"])]
        identity: String,
        /// Anchor point, comma-separated coordinates.
        #[arg(long, default_value = "0")]
        a: String,
        /// Shift, comma-separated coordinates.
        #[arg(long, default_value = "1")]
        h: String,
        /// Grid spec as JSON (defaults to {0, 1, 2}).
        #[arg(long)]
        grid: Option<String>,
        /// Functional tag for tilt-shift (default: run the whole library).
        #[arg(long)]
        functional: Option<String>,
    },
    /// Simulate the two-sided extension field; one CSV row per replicate.
    Extend {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        grid: String,
    },
    /// Deterministic quadrature oracle for rank-one models.
    Oracle {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_parser = ["ratio", "argmax"], default_value = "ratio")]
        method: String,
        #[arg(long, default_value_t = DEFAULT_RADIUS)]
        radius: f64,
    },
}

fn parse_vec(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{what}: bad number '{c}'")))
        })
        .collect()
}

fn parse_model(text: &str) -> Result<ModelSpec, Error> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("model: {e}")))
}

fn parse_grid(text: &str) -> Result<GridSpec, Error> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("grid: {e}")))
}

/// Lower flags into the one true run description.
fn config_from_flags(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let command = cli
        .command
        .as_ref()
        .ok_or_else(|| Error::Config("a subcommand or --config is required".into()))?;
    let (model, task) = match command {
        Command::Simulate {
            model,
            grid,
            algorithm,
            budget,
        } => (
            parse_model(&model.model)?,
            TaskSpec::Simulate {
                grid: parse_grid(grid)?,
                algorithm: if algorithm == "direct" {
                    SimAlgorithm::Direct
                } else {
                    SimAlgorithm::Dm
                },
                budget: *budget,
                provenance: false,
            },
        ),
        Command::Fidi {
            model,
            points,
            x,
            method,
        } => (
            parse_model(&model.model)?,
            TaskSpec::Fidi {
                points: parse_vec(points, "points")?.into_iter().map(|c| vec![c]).collect(),
                x: parse_vec(x, "x")?,
                method: match method.as_str() {
                    "mc" => FidiMethod::Mc,
                    "infargmax" => FidiMethod::Infargmax,
                    "empirical" => FidiMethod::Empirical,
                    _ => FidiMethod::ClosedForm,
                },
            },
        ),
        Command::Pickands {
            model,
            delta,
            method,
            radius,
            window,
            dim,
        } => (
            parse_model(&model.model)?,
            TaskSpec::Pickands {
                method: match method.as_str() {
                    "direct" => PickandsMethodSpec::Direct,
                    "ratio" => PickandsMethodSpec::Ratio,
                    "argmax" => PickandsMethodSpec::Argmax,
                    _ => PickandsMethodSpec::C0,
                },
                delta: *delta,
                radius: *radius,
                dim: *dim,
                window: *window,
            },
        ),
        Command::Check {
            model,
            identity,
            a,
            h,
            grid,
            functional,
        } => (
            parse_model(&model.model)?,
            TaskSpec::Check {
                identity: match identity.as_str() {
                    "xi-shift" => IdentitySpec::XiShift,
                    "tilt-shift" => IdentitySpec::TiltShift,
                    "theta-shift" => IdentitySpec::ThetaShift,
                    _ => IdentitySpec::Field,
                },
                a: parse_vec(a, "a")?,
                h: parse_vec(h, "h")?,
                grid: match grid {
                    Some(g) => parse_grid(g)?,
                    None => GridSpec::Points {
                        points: vec![vec![0.0], vec![1.0], vec![2.0]],
                    },
                },
                functional: functional.clone(),
            },
        ),
        Command::Extend { model, grid } => (
            parse_model(&model.model)?,
            TaskSpec::Extend {
                grid: parse_grid(grid)?,
            },
        ),
        Command::Oracle {
            model,
            delta,
            method,
            radius,
        } => (
            parse_model(&model.model)?,
            TaskSpec::Oracle {
                method: if method == "argmax" {
                    PickandsMethodSpec::Argmax
                } else {
                    PickandsMethodSpec::Ratio
                },
                delta: *delta,
                radius: *radius,
            },
        ),
    };
    Ok(ExperimentConfig {
        model,
        task,
        seed: cli.seed,
        reps: cli.reps.unwrap_or(DEFAULT_REPS),
        out: cli.out.clone(),
    })
}

#[derive(Serialize)]
struct Provenance {
    seed: u64,
    config_hash: String,
    version: &'static str,
}

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        seed: cfg.seed,
        config_hash: format!("{:016x}", cfg.content_hash()),
        version: env!("CARGO_PKG_VERSION"),
    }
}

fn write_output(path: Option<&Path>, payload: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, payload)
            .map_err(|e| Error::Config(format!("cannot write {p:?}: {e}"))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(payload.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Config(format!("stdout: {e}")))
        }
    }
}

/// CSV of field replicates: provenance header comments, a header row of
/// grid point coordinates, one row per replicate.
fn fields_to_csv(cfg: &ExperimentConfig, grid: &Grid, fields: &[FieldSample]) -> String {
    let p = provenance(cfg);
    let mut s = String::new();
    s.push_str(&format!(
        "# seed={} config_hash={} version={}\n",
        p.seed, p.config_hash, p.version
    ));
    let header: Vec<String> = grid
        .points()
        .map(|t| {
            t.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for f in fields {
        let row: Vec<String> = f.values.iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn estimate_json(
    cfg: &ExperimentConfig,
    method: &str,
    estimate: f64,
    stderr: f64,
    reps: usize,
    extra: serde_json::Value,
) -> String {
    let mut obj = json!({
        "provenance": provenance(cfg),
        "method": method,
        "estimate": estimate,
        "stderr": stderr,
        "reps": reps,
    });
    if let (Some(map), serde_json::Value::Object(extra)) = (obj.as_object_mut(), extra) {
        for (k, v) in extra {
            map.insert(k, v);
        }
    }
    serde_json::to_string_pretty(&obj).expect("estimate serializes") + "\n"
}

fn simulate_fields(
    model: &SpectralModel,
    grid: &Grid,
    algorithm: SimAlgorithm,
    budget: f64,
    provenance_atoms: bool,
    reps: usize,
    seed: u64,
) -> Result<Vec<FieldSample>, Error> {
    match algorithm {
        SimAlgorithm::Dm => {
            let sim = DmSimulator::new(model, grid)?;
            collect_fields(reps, seed, |rng| sim.sample(rng, provenance_atoms))
        }
        SimAlgorithm::Direct => {
            let sim = DirectSimulator::new(model, grid, budget)?;
            collect_fields(reps, seed, |rng| sim.sample(rng, provenance_atoms))
        }
    }
}

fn collect_fields<F>(reps: usize, seed: u64, f: F) -> Result<Vec<FieldSample>, Error>
where
    F: Fn(RngStream) -> Result<FieldSample, Error> + Sync,
{
    let results: Vec<Result<FieldSample, Error>> =
        run_replicates(seed, reps, |rep, _| f(RngStream::new(seed, rep)));
    results.into_iter().collect()
}

/// Execute one experiment; returns the process exit code.
fn run(cfg: &ExperimentConfig, base_dir: &Path, out: Option<&Path>) -> Result<u8, Error> {
    let out = cfg.out.as_deref().or(out);
    let model = cfg.model.build(base_dir)?;
    match &cfg.task {
        TaskSpec::Simulate {
            grid,
            algorithm,
            budget,
            provenance,
        } => {
            let grid = grid.build()?;
            let fields = simulate_fields(
                &model, &grid, *algorithm, *budget, *provenance, cfg.reps, cfg.seed,
            )?;
            write_output(out, &fields_to_csv(cfg, &grid, &fields))?;
            Ok(0)
        }
        TaskSpec::Fidi { points, x, method } => {
            let query = FidiQuery::new(points.clone(), x.clone())?;
            let payload = match method {
                FidiMethod::Mc => {
                    let r = neglog_fidi_mc(&model, &query, cfg.reps, cfg.seed)?;
                    estimate_json(cfg, "mc", r.estimate, r.stderr, r.reps, json!({}))
                }
                FidiMethod::Infargmax => {
                    let r = neglog_fidi_infargmax(&model, &query, cfg.reps, cfg.seed)?;
                    estimate_json(cfg, "infargmax", r.estimate, r.stderr, r.reps, json!({}))
                }
                FidiMethod::Empirical => {
                    let grid = Grid::new(points.clone())?;
                    let fields = simulate_fields(
                        &model,
                        &grid,
                        SimAlgorithm::Dm,
                        DEFAULT_ERROR_BUDGET,
                        false,
                        cfg.reps,
                        cfg.seed,
                    )?;
                    let e = empirical_fidi(&fields, &query)?;
                    estimate_json(
                        cfg,
                        "empirical",
                        e.neglog.estimate,
                        e.neglog.stderr,
                        e.neglog.reps,
                        json!({
                            "probability": e.probability.estimate,
                            "probability_stderr": e.probability.stderr,
                            "neglog_unbounded": e.neglog_unbounded,
                        }),
                    )
                }
                FidiMethod::ClosedForm => {
                    if points.len() != 2 {
                        return Err(Error::InvalidArgument(
                            "closed form covers exactly two points".into(),
                        ));
                    }
                    // incremental variance between the two query points,
                    // read off the anchored process
                    let gamma = model
                        .theta_process(&points[0])
                        .covariance(&points[1], &points[1]);
                    let v = hr_closed_form(gamma, x[0], x[1])?;
                    estimate_json(cfg, "closed-form", v, 0.0, 0, json!({"gamma": gamma}))
                }
            };
            write_output(out, &payload)?;
            Ok(0)
        }
        TaskSpec::Pickands {
            method,
            delta,
            radius,
            dim,
            window,
        } => {
            let e = match method {
                PickandsMethodSpec::Direct => {
                    let window = window.ok_or_else(|| {
                        Error::InvalidArgument("direct method needs --window".into())
                    })?;
                    pickands_direct(&model, *dim, *delta, window, cfg.reps, cfg.seed)?
                }
                PickandsMethodSpec::Ratio => {
                    pickands_ratio(&model, *dim, *delta, *radius, cfg.reps, cfg.seed)?
                }
                PickandsMethodSpec::Argmax => {
                    pickands_argmax_prob(&model, *dim, *delta, *radius, cfg.reps, cfg.seed)?
                }
                PickandsMethodSpec::C0 => {
                    pickands_lower_bound_c0(&model, *dim, *delta, *radius, cfg.reps, cfg.seed)?
                }
            };
            let tag = serde_json::to_value(e.method).expect("method tag");
            let payload = estimate_json(
                cfg,
                tag.as_str().expect("tag is a string"),
                e.report.estimate,
                e.report.stderr,
                e.report.reps,
                json!({"delta": e.delta, "dim": e.dim, "window": e.window}),
            );
            write_output(out, &payload)?;
            Ok(0)
        }
        TaskSpec::Check {
            identity,
            a,
            h,
            grid,
            functional,
        } => {
            let grid = grid.build()?;
            let reports: Vec<IdentityCheckReport> = match identity {
                IdentitySpec::XiShift => {
                    let g = match &model {
                        SpectralModel::Gaussian(g) => g.clone(),
                        SpectralModel::BrownianLevy(b) => b.as_gaussian(),
                        SpectralModel::Masked(m) => m.inner().clone(),
                    };
                    vec![check_xi_shift_gaussian(&g, a, h, &grid)]
                }
                IdentitySpec::ThetaShift => vec![check_theta_shift(&model, a, h, &grid)],
                IdentitySpec::TiltShift => {
                    let lib = functional_library();
                    let picked: Vec<_> = match functional {
                        Some(tag) => {
                            let f = lib
                                .iter()
                                .find(|f| f.tag == tag)
                                .ok_or_else(|| {
                                    Error::Config(format!("unknown functional '{tag}'"))
                                })?;
                            vec![*f]
                        }
                        None => lib,
                    };
                    picked
                        .iter()
                        .map(|f| check_tilt_shift_mc(&model, f, a, h, &grid, cfg.reps, cfg.seed))
                        .collect::<Result<_, _>>()?
                }
                IdentitySpec::Field => {
                    let fields = simulate_fields(
                        &model,
                        &grid,
                        SimAlgorithm::Dm,
                        DEFAULT_ERROR_BUDGET,
                        false,
                        cfg.reps,
                        cfg.seed,
                    )?;
                    vec![check_field_stationarity(&fields, h)?]
                }
            };
            let all_pass = reports.iter().all(|r| r.pass);
            let payload = serde_json::to_string_pretty(&json!({
                "provenance": provenance(cfg),
                "pass": all_pass,
                "checks": reports,
            }))
            .expect("check report serializes")
                + "\n";
            write_output(out, &payload)?;
            Ok(if all_pass { 0 } else { 2 })
        }
        TaskSpec::Extend { grid } => {
            let grid = grid.build()?;
            let fields: Vec<FieldSample> = collect_fields(cfg.reps, cfg.seed, |rng| {
                simulate_two_sided(&model, &grid, rng, false)
            })?;
            write_output(out, &fields_to_csv(cfg, &grid, &fields))?;
            Ok(0)
        }
        TaskSpec::Oracle {
            method,
            delta,
            radius,
        } => {
            let (tag, v) = match method {
                PickandsMethodSpec::Argmax => {
                    ("oracle-argmax", oracle_argmax_prob(&model, *delta, *radius)?)
                }
                _ => ("oracle-ratio", oracle_ratio(&model, *delta, *radius)?),
            };
            let payload = estimate_json(
                cfg,
                tag,
                v,
                0.0,
                0,
                json!({"delta": delta, "radius": radius}),
            );
            write_output(out, &payload)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let (cfg, base_dir) = match &cli.config {
        Some(path) => {
            let cfg = match ExperimentConfig::from_file(path) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let base = path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            (cfg, base)
        }
        None => match config_from_flags(&cli) {
            Ok(c) => (c, PathBuf::from(".")),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
    };
    match run(&cfg, &base_dir, cli.out.as_deref()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
