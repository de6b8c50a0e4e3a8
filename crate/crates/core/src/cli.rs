//! Command-line front end. Exit codes: 0 ok, 1 usage, 2 config, 3 runtime.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{RunConfig, SamplerChoice, Scenario, SuiteKind};
use crate::control::{CUniformSampler, Method, Planner};
use crate::dynamics::ControlSequence;
use crate::error::{Error, Result};
use crate::experiment::{run_c2c, run_dynamic, summarize, write_results};
use crate::levelset::{build_level_sets, LevelSetStack};
use crate::metrics::{coverage_percent, transition_uniformity, uniformity_percent};
use crate::policy::{train, ActionSet, PolicyNetwork};
use crate::render::{method_color, Rgb, Scene};
use crate::sampling::{
    sample_cuniform, sample_gaussian, sample_nln, GaussianSamplerConfig, NlnSamplerConfig,
    TrajectoryBatch,
};
use crate::world::{run_episode, OccupancyGrid, World};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "cumppi",
    version,
    about = "C-Uniform trajectory sampling and CU-MPPI control"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Trained policy file.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Level-set stack file.
    #[arg(long, global = true)]
    pub levelsets: Option<PathBuf>,
    /// Occupancy grid file.
    #[arg(long, global = true)]
    pub map: Option<PathBuf>,
    #[arg(long, global = true)]
    pub method: Option<Method>,
    #[arg(long, global = true)]
    pub n_traj: Option<usize>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub suite: Option<SuiteArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SuiteArg {
    C2c,
    Dynamic,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and save the discretized level-set stack.
    BuildLevelsets,
    /// Train the action policy and save it with its loss trace.
    Train,
    /// Sample a trajectory fan and render it.
    Sample,
    /// Uniformity and coverage reports for a trained policy.
    Analyze,
    /// Run one closed-loop episode.
    Simulate,
    /// Run a benchmark suite and write per-episode results.
    Benchmark,
}

impl clap::ValueEnum for Method {
    fn value_variants<'a>() -> &'a [Self] {
        &Method::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.as_str()))
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = match e {
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            };
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            code
        }
    }
}

/// Config file plus flag overrides.
pub fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let x = &mut cfg.experiment;
    if let Some(seed) = common.seed {
        x.seed = seed;
    }
    if let Some(m) = common.method {
        x.method = m;
    }
    if let Some(p) = &common.model {
        x.model = Some(p.clone());
    }
    if let Some(p) = &common.levelsets {
        x.levelsets = Some(p.clone());
    }
    if let Some(p) = &common.map {
        x.map = Some(p.clone());
    }
    if let Some(s) = common.suite {
        x.suite = match s {
            SuiteArg::C2c => SuiteKind::C2c,
            SuiteArg::Dynamic => SuiteKind::Dynamic,
        };
    }
    if let Some(n) = common.n_traj {
        cfg.sampler.n_traj = n;
        cfg.mppi.n_samples = n;
        cfg.experiment.sweep.n_trajs = vec![n];
    }
    if let Some(s) = common.sigma {
        cfg.sampler.sigma = s;
        cfg.mppi.sigma = s;
        cfg.experiment.sweep.sigmas = vec![s];
    }
    if let Some(m) = common.method {
        cfg.experiment.sweep.methods = vec![m];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(&cli.common)?;
    let out = &cli.common.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_file(&out.join("resolved_config.json"), |w| {
        Ok(w.write_all(cfg.to_json().as_bytes())?)
    })?;
    match cli.command {
        Command::BuildLevelsets => cmd_build_levelsets(&cfg, out),
        Command::Train => cmd_train(&cfg, out),
        Command::Sample => cmd_sample(&cfg, out),
        Command::Analyze => cmd_analyze(&cfg, out),
        Command::Simulate => cmd_simulate(&cfg, out),
        Command::Benchmark => cmd_benchmark(&cfg, out),
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    write_file(path, |w| Ok(w.write_all(text.as_bytes())?))
}

fn write_images(scene: &Scene, px_per_m: f64, out: &Path, stem: &str) -> Result<()> {
    write_file(&out.join(format!("{stem}.ppm")), |w| {
        scene.write_ppm(px_per_m, w)
    })?;
    let svg = scene.to_svg(px_per_m);
    write_file(&out.join(format!("{stem}.svg")), |w| {
        Ok(w.write_all(svg.as_bytes())?)
    })
}

fn actions(cfg: &RunConfig) -> ActionSet {
    cfg.levelset.action_set(&cfg.vehicle)
}

fn levelsets(cfg: &RunConfig) -> Result<LevelSetStack> {
    match &cfg.experiment.levelsets {
        Some(path) => LevelSetStack::load(path),
        None => build_level_sets(
            &crate::dynamics::State::origin(),
            &actions(cfg),
            &cfg.vehicle,
            cfg.levelset.resolution()?,
            cfg.level_steps(),
        ),
    }
}

fn model(cfg: &RunConfig) -> Result<PolicyNetwork> {
    let path = cfg.experiment.model.as_ref().ok_or_else(|| {
        Error::Config("a trained model is required (--model or experiment.model)".into())
    })?;
    let net = PolicyNetwork::load(path)?;
    if net.n_actions() != cfg.levelset.actions {
        return Err(Error::Config(format!(
            "model has {} actions but levelset.actions is {}",
            net.n_actions(),
            cfg.levelset.actions
        )));
    }
    Ok(net)
}

fn cmd_build_levelsets(cfg: &RunConfig, out: &Path) -> Result<()> {
    let stack = build_level_sets(
        &crate::dynamics::State::origin(),
        &actions(cfg),
        &cfg.vehicle,
        cfg.levelset.resolution()?,
        cfg.level_steps(),
    )?;
    stack.save(out.join("levelsets.culs"))?;
    write_file(&out.join("levelsets.csv"), |w| {
        writeln!(w, "level_t,cells")?;
        for l in stack.levels() {
            writeln!(w, "{},{}", l.t, l.len())?;
        }
        Ok(())
    })?;
    println!(
        "built {} levels, {} cells",
        stack.len(),
        stack.total_cells()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let stack = levelsets(cfg)?;
    let a = actions(cfg);
    let seed = cfg.experiment.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = PolicyNetwork::new(&cfg.train.shape(a.len()), &mut rng);
    let report = train(
        &mut net,
        &stack,
        &a,
        &cfg.vehicle,
        &cfg.train.train_config(seed),
    )?;
    net.save(out.join("model.cunn"))?;
    write_file(&out.join("loss.csv"), |w| report.write_csv(w))?;
    let totals = report.epoch_totals();
    println!(
        "trained {} epochs, loss {:.6} -> {:.6}",
        totals.len(),
        totals.first().copied().unwrap_or(0.0),
        totals.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn sample_batch(cfg: &RunConfig, horizon: usize, rng: &mut ChaCha8Rng) -> Result<TrajectoryBatch> {
    let s = &cfg.sampler;
    let s0 = cfg.experiment.start;
    let zeros = ControlSequence::zeros(horizon);
    match s.kind {
        SamplerChoice::Cuniform => {
            let net = model(cfg)?;
            sample_cuniform(
                &net,
                &actions(cfg),
                &s0,
                horizon,
                s.n_traj,
                &cfg.vehicle,
                rng,
            )
        }
        SamplerChoice::Gaussian => sample_gaussian(
            &zeros,
            &GaussianSamplerConfig { sigma: s.sigma },
            &s0,
            s.n_traj,
            &cfg.vehicle,
            rng,
        ),
        SamplerChoice::Nln => sample_nln(
            &zeros,
            &NlnSamplerConfig {
                sigma: s.sigma,
                sigma_ln: s.sigma_ln,
            },
            &s0,
            s.n_traj,
            &cfg.vehicle,
            rng,
        ),
    }
}

fn cmd_sample(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.experiment.seed);
    let batch = sample_batch(cfg, cfg.sample_steps(), &mut rng)?;
    write_file(&out.join("trajectories.csv"), |w| batch.write_csv(w))?;
    let pts: Vec<(f64, f64)> = batch
        .trajectories
        .iter()
        .flat_map(|t| t.states.iter().map(|s| (s.x, s.y)))
        .collect();
    let mut scene = Scene::around(&pts, 0.25);
    scene.fan(&batch, Rgb::FAN);
    write_images(&scene, cfg.experiment.px_per_m * 5.0, out, "fan")?;
    println!(
        "sampled {} trajectories of {} steps",
        batch.len(),
        cfg.sample_steps()
    );
    Ok(())
}

#[derive(Serialize)]
struct Analysis<'a> {
    uniformity: &'a crate::metrics::UniformityReport,
    transition_uniformity: &'a crate::metrics::UniformityReport,
    coverage: &'a crate::metrics::CoverageReport,
}

fn cmd_analyze(cfg: &RunConfig, out: &Path) -> Result<()> {
    let stack = levelsets(cfg)?;
    let net = model(cfg)?;
    let a = actions(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.experiment.seed);
    let horizon = stack.len() - 1;
    let batch = sample_cuniform(
        &net,
        &a,
        &stack.root(),
        horizon,
        cfg.sampler.n_traj,
        &cfg.vehicle,
        &mut rng,
    )?;
    let uni = uniformity_percent(&stack, &batch)?;
    let trans = transition_uniformity(
        &stack,
        &net,
        &a,
        &cfg.vehicle,
        cfg.experiment.analyze_samples,
        &mut rng,
    )?;
    let cov = coverage_percent(&stack, &batch);
    write_file(&out.join("uniformity.csv"), |w| uni.write_csv(w))?;
    write_file(&out.join("transition_uniformity.csv"), |w| {
        trans.write_csv(w)
    })?;
    write_file(&out.join("coverage.csv"), |w| cov.write_csv(w))?;
    write_json(
        &out.join("analysis.json"),
        &Analysis {
            uniformity: &uni,
            transition_uniformity: &trans,
            coverage: &cov,
        },
    )?;
    println!(
        "min uniformity {:.4}, min transition uniformity {:.4}, coverage {:.2}%",
        uni.min_over(1, uni.ratios.len()).unwrap_or(1.0),
        trans.min_over(1, trans.ratios.len()).unwrap_or(1.0),
        cov.percentage
    );
    Ok(())
}

fn simulation_world(cfg: &RunConfig) -> Result<(World, usize)> {
    let x = &cfg.experiment;
    let p = &cfg.vehicle;
    let (mut world, horizon) = match x.scenario {
        Scenario::Open => (World::open(x.start, cfg.world.clone())?, cfg.mppi.horizon),
        Scenario::C2c => (
            x.c2c.world(x.c2c.goals[0], &cfg.world, p)?,
            x.c2c.horizon(p),
        ),
        Scenario::Clutter => {
            let n = x.dynamic.n_obstacles.first().copied().unwrap_or(0);
            (
                x.dynamic
                    .world(n, x.env, cfg.world.reveal_distance, &cfg.world)?,
                p.steps_for(x.dynamic.horizon_s).max(1),
            )
        }
    };
    if let Some(path) = &x.map {
        world = world.with_grid(OccupancyGrid::load(path)?);
    }
    Ok((world, horizon))
}

#[derive(Serialize)]
struct EpisodeSummary {
    method: Method,
    outcome: crate::world::Outcome,
    steps: usize,
    path_length: f64,
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (world, horizon) = simulation_world(cfg)?;
    let method = cfg.experiment.method;
    let net = if method.uses_policy() {
        Some(model(cfg)?)
    } else {
        None
    };
    let a = actions(cfg);
    let policy = net.as_ref().map(|net| CUniformSampler { net, actions: &a });
    let mppi = crate::control::MppiConfig {
        horizon,
        ..cfg.mppi.clone()
    };
    let mut planner = Planner::new(method, mppi, cfg.vehicle)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.experiment.seed);
    let ep = run_episode(&world, &mut planner, policy, &mut rng)?;
    write_file(&out.join("episode.csv"), |w| ep.write_csv(w))?;
    write_json(
        &out.join("episode.json"),
        &EpisodeSummary {
            method,
            outcome: ep.outcome,
            steps: ep.steps(),
            path_length: ep.path_length,
        },
    )?;
    let mut scene = Scene::for_world(&world, Some(&ep.revealed));
    scene.trajectory(&ep.true_path(), method_color(method));
    write_images(&scene, cfg.experiment.px_per_m, out, "episode")?;
    println!(
        "{method}: {} after {} steps, path {:.3} m",
        ep.outcome,
        ep.steps(),
        ep.path_length
    );
    Ok(())
}

fn cmd_benchmark(cfg: &RunConfig, out: &Path) -> Result<()> {
    let x = &cfg.experiment;
    let needs_policy = x.sweep.methods.iter().any(|m| m.uses_policy());
    let net = if needs_policy && x.sweep.trials > 0 {
        Some(model(cfg)?)
    } else {
        None
    };
    let a = actions(cfg);
    let policy = net.as_ref().map(|net| CUniformSampler { net, actions: &a });
    let rows = match x.suite {
        SuiteKind::C2c => run_c2c(
            &x.c2c,
            &x.sweep,
            &cfg.mppi,
            &cfg.world,
            &cfg.vehicle,
            policy,
            x.seed,
        )?,
        SuiteKind::Dynamic => run_dynamic(
            &x.dynamic,
            &x.sweep,
            &cfg.mppi,
            &cfg.world,
            &cfg.vehicle,
            policy,
            x.seed,
        )?,
    };
    write_file(&out.join("results.csv"), |w| write_results(&rows, w))?;
    let summary = summarize(&rows);
    write_file(&out.join("summary.csv"), |w| {
        writeln!(
            w,
            "method,sigma,n_traj,reveal_dist,episodes,successes,success_rate,avg_path_length"
        )?;
        for s in &summary {
            writeln!(
                w,
                "{},{},{},{},{},{},{:.6},{}",
                s.method,
                s.sigma,
                s.n_traj,
                s.reveal_dist.map(|d| d.to_string()).unwrap_or_default(),
                s.episodes,
                s.successes,
                s.success_rate,
                s.avg_path_length
                    .map(|l| format!("{l:.6}"))
                    .unwrap_or_default()
            )?;
        }
        Ok(())
    })?;
    for s in &summary {
        println!(
            "{} sigma={} n={} reveal={}: {}/{}",
            s.method,
            s.sigma,
            s.n_traj,
            s.reveal_dist
                .map(|d| d.to_string())
                .unwrap_or_else(|| "-".into()),
            s.successes,
            s.episodes
        );
    }
    println!("{} episodes", rows.len());
    Ok(())
}
