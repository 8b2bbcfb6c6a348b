use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;
use wecfarm::climate::{fit_climate, read_samples, synth_climate, write_samples, ClimateModel};
use wecfarm::farm::{lifetime_power, objective_pv, power_response, write_power_matrix, ClimateWeights};
use wecfarm::hydro::Oracle;
use wecfarm::mbe::{compose_farm, FarmLayout, HydroSource};
use wecfarm::optimizer::{
    case_study, hybrid, perturb_sensitivity, write_layout_csv, write_perturb_csv, CaseId, CaseReport, Evaluator,
    HybridResult, ProblemSpec,
};
use wecfarm::report::{
    objective_validation, validate_sm, write_json, write_objective_csvs, Artifact, Metadata, RunConfig,
};
use wecfarm::surrogate::{qbc::write_history_csv, train_bundle, SurrogateBundle};

const CONFIG_KEYS: &str = "\
CONFIGURATION (JSON, every key optional, unknown keys rejected):
  seeds                      list of run seeds; the first seeds single runs
  hydro.backend              \"reference\" (eigenfunction solver) or \"toy\"
  hydro.modes                evanescent modes of the reference solver
  hydro.omega_min|omega_max|n_omega   frequency grid, rad/s
  hydro.depth                water depth, m
  climate.path               fitted climate (.json) or samples (.csv: year,hs_m,tp_s)
  climate.synthetic          {site: {hs_median, tp_median, hs_log_sd, tp_log_sd,
                             correlation, first_year, bounds}, years, samples_per_year}
  climate.fit                {n_gq, bandwidth, bounds, years, min_samples}
  power                      {eta_pcc, eta_oa, eta_t, p_lim, amplitude_weighting}
  problem                    {n_wec, control_mode, optimize_plant, optimize_control,
                             optimize_layout, radius, slenderness, k_pto, b_pto,
                             layout, safety_distance, box_width, p_lim_w}
  ga                         {population, generations, tournament, crossover_rate,
                             blend_alpha, mutation_rate, mutation_sigma, elite, seed}
  refine                     {max_iter, max_evaluations, step_tol, f_tol, fd_step,
                             initial_step, active_tol}
  surrogate.bundle           trained bundle used by surrogate-driven commands
  surrogate.one_body|two_body  QBC settings {pool_size, batch, members, hidden,
                             top_fraction, max_rounds, var_tol, mse_tol, interior,
                             train, round_epochs, log_separation, kmeans_iter, seed}
  surrogate.holdout          held-out points per quantity for validate-sm
  surrogate.mean_mse_max|worst_mse_max  validate-sm thresholds
  study                      {p_lim_sweep_kw, random_layouts, validation_designs,
                             validation_n_wec}

EXIT STATUS: 0 success, 1 failed validation or run error, 2 usage or configuration error.
The WECFARM_THREADS environment variable caps worker threads.";

#[derive(Parser)]
#[command(name = "wecfarm", version, about = "Wave energy farm design toolkit", after_long_help = CONFIG_KEYS)]
struct Cli {
    /// JSON configuration file; defaults apply when absent.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(short, long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the first configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "WECFARM_THREADS")]
    threads: Option<usize>,
    /// Repeat for more logging.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a per-year climate model to `year,hs_m,tp_s` samples.
    ClimateFit {
        samples: PathBuf,
    },
    /// Draw synthetic sea-state samples and fit them.
    SynthClimate,
    /// Train all surrogate committees by query-by-committee.
    Train,
    /// Compare a trained bundle with the oracle on seeded held-out inputs.
    ValidateSm {
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Also compare lifetime power of random full designs.
        #[arg(long)]
        objective: bool,
    },
    /// Evaluate the configured frozen design.
    Simulate {
        /// Use a trained bundle instead of the oracle.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Hybrid optimisation of the configured problem or a case study.
    Optimize {
        #[arg(long)]
        case: Option<CaseId>,
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Run one of the case studies I..VI.
    CaseStudy {
        id: CaseId,
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Random displacement study of one WEC of an optimised layout.
    Perturb {
        /// `optimize.json` written by `optimize`.
        result: PathBuf,
        #[arg(long, default_value_t = 1)]
        wec: usize,
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Validation(String),
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        if matches!(e.downcast_ref::<wecfarm::Error>(), Some(wecfarm::Error::Config(_))) {
            Failure::Usage(e)
        } else {
            Failure::Run(e)
        }
    }
}

impl From<wecfarm::Error> for Failure {
    fn from(e: wecfarm::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

#[derive(Serialize)]
struct Manifest {
    meta: Metadata,
    command: String,
    files: Vec<String>,
}

struct Ctx {
    config: RunConfig,
    seed: u64,
    out: PathBuf,
    files: Vec<String>,
}

impl Ctx {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.out.join(name)
    }

    fn meta(&self, backend: String) -> wecfarm::Result<Metadata> {
        Metadata::new(&self.config, self.seed, backend)
    }

    fn artifact<T: Serialize>(&mut self, name: &str, backend: String, result: T) -> anyhow::Result<()> {
        let a = Artifact {
            meta: self.meta(backend)?,
            result,
        };
        let p = self.path(name);
        write_json(&p, &a).with_context(|| format!("writing {}", p.display()))?;
        Ok(())
    }

    fn oracle(&self) -> wecfarm::Result<Oracle> {
        self.config.hydro.oracle()
    }

    fn bundle(&self, flag: &Option<PathBuf>) -> anyhow::Result<Option<SurrogateBundle>> {
        let path = flag.clone().or_else(|| self.config.surrogate.bundle.clone());
        path.map(|p| SurrogateBundle::load(&p).with_context(|| format!("loading bundle {}", p.display())))
            .transpose()
    }

    fn climate(&self) -> wecfarm::Result<ClimateModel> {
        self.config.climate.load(self.seed)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        wecfarm::par::init_threads(n);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seeds[0] = s;
    }
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating {}", cli.out.display()))
        .map_err(Failure::Usage)?;
    let mut ctx = Ctx {
        seed: config.seed(),
        config,
        out: cli.out.clone(),
        files: Vec::new(),
    };
    let name = match &cli.command {
        Command::ClimateFit { .. } => "climate-fit",
        Command::SynthClimate => "synth-climate",
        Command::Train => "train",
        Command::ValidateSm { .. } => "validate-sm",
        Command::Simulate { .. } => "simulate",
        Command::Optimize { .. } => "optimize",
        Command::CaseStudy { .. } => "case-study",
        Command::Perturb { .. } => "perturb",
    };
    let outcome = match cli.command {
        Command::ClimateFit { samples } => climate_fit(&mut ctx, &samples),
        Command::SynthClimate => synth(&mut ctx),
        Command::Train => train(&mut ctx),
        Command::ValidateSm { bundle, objective } => validate(&mut ctx, &bundle, objective),
        Command::Simulate { bundle } => simulate(&mut ctx, &bundle),
        Command::Optimize { case: Some(id), bundle } | Command::CaseStudy { id, bundle } => case(&mut ctx, id, &bundle),
        Command::Optimize { case: None, bundle } => optimize(&mut ctx, &bundle),
        Command::Perturb { result, wec, radius, n } => perturb(&mut ctx, &result, wec, radius, n),
    };
    let manifest = Manifest {
        meta: ctx.meta(ctx.config.hydro.backend.name().to_string())?,
        command: name.to_string(),
        files: ctx.files.clone(),
    };
    write_json(ctx.out.join("manifest.json"), &manifest)?;
    outcome
}

fn climate_fit(ctx: &mut Ctx, samples: &Path) -> Result<(), Failure> {
    let s = read_samples(samples).map_err(|e| Failure::Usage(e.into()))?;
    let model = fit_climate(&s, &ctx.config.climate.fit)?;
    ctx.artifact("climate.json", "none".into(), &model)?;
    Ok(())
}

fn synth(ctx: &mut Ctx) -> Result<(), Failure> {
    let s = ctx.config.climate.synthetic.clone().unwrap_or_default();
    let samples = synth_climate(&s.site, s.years, s.samples_per_year, ctx.seed)?;
    let p = ctx.path("samples.csv");
    write_samples(&p, &samples)?;
    let model = fit_climate(&samples, &ctx.config.climate.fit)?;
    ctx.artifact("climate.json", "none".into(), &model)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    qoi: String,
    rounds: usize,
    samples: usize,
    dropped: usize,
    final_pool_var: f64,
    final_max_mse: f64,
}

fn train(ctx: &mut Ctx) -> Result<(), Failure> {
    let oracle = ctx.oracle()?;
    let seed = ctx.seed;
    let (bundle, outcomes) = train_bundle(&oracle, |q| ctx.config.qbc(q, seed))?;
    let p = ctx.path("bundle.json");
    bundle.save(&p)?;
    let mut summary = Vec::new();
    for o in &outcomes {
        let c = &o.committee;
        let p = ctx.path(&format!("history_{}.csv", c.tag));
        write_history_csv(&p, &c.history)?;
        let last = c.history.last().expect("at least one round");
        summary.push(TrainSummary {
            qoi: c.tag.clone(),
            rounds: c.history.len() - 1,
            samples: o.dataset.len(),
            dropped: o.dropped,
            final_pool_var: last.pool_var,
            final_max_mse: last.max_mse,
        });
    }
    ctx.artifact("train.json", oracle.id(), summary)?;
    Ok(())
}

fn need_bundle(ctx: &Ctx, flag: &Option<PathBuf>) -> Result<SurrogateBundle, Failure> {
    ctx.bundle(flag)?
        .ok_or_else(|| Failure::Usage(anyhow::anyhow!("no bundle: pass --bundle or set surrogate.bundle")))
}

fn validate(ctx: &mut Ctx, flag: &Option<PathBuf>, objective: bool) -> Result<(), Failure> {
    let bundle = need_bundle(ctx, flag)?;
    let oracle = ctx.oracle()?;
    let s = &ctx.config.surrogate;
    let v = validate_sm(&bundle, &oracle, s.holdout, ctx.seed, s.mean_mse_max, s.worst_mse_max)?;
    let p = ctx.path("validate_sm.csv");
    let mut w = csv_writer(&p)?;
    writeln_csv(&mut w, "qoi,points,mean_mse,worst_mse,pass")?;
    for q in &v.quantities {
        let tag = q.qoi.tag();
        writeln_csv(&mut w, &format!("{tag},{},{:e},{:e},{}", q.points, q.mean_mse, q.worst_mse, q.pass))?;
    }
    let pass = v.pass;
    ctx.artifact("validate_sm.json", oracle.id(), &v)?;
    if objective {
        let climate = ctx.climate()?;
        let weights = ClimateWeights::new(&climate, oracle.grid(), &ctx.config.power)?;
        let st = &ctx.config.study;
        let o = objective_validation(
            &bundle,
            &oracle,
            &weights,
            &ctx.config.power,
            st.validation_designs,
            st.validation_n_wec,
            ctx.seed,
        )?;
        let (a, b) = (ctx.path("objective_scatter.csv"), ctx.path("objective_histogram.csv"));
        write_objective_csvs(&o, a, b, 20)?;
        ctx.artifact("objective.json", oracle.id(), &o)?;
    }
    if pass {
        Ok(())
    } else {
        let bad: Vec<&str> = v.quantities.iter().filter(|q| !q.pass).map(|q| q.qoi.tag()).collect();
        Err(Failure::Validation(format!("held-out error above threshold for {bad:?}")))
    }
}

fn csv_writer(p: &Path) -> anyhow::Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(p)?))
}

fn writeln_csv(w: &mut impl std::io::Write, line: &str) -> anyhow::Result<()> {
    writeln!(w, "{line}")?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateResult {
    radius: f64,
    slenderness: f64,
    centers: Vec<(f64, f64)>,
    p_a: f64,
    p_v: f64,
}

fn simulate(ctx: &mut Ctx, flag: &Option<PathBuf>) -> Result<(), Failure> {
    let oracle = ctx.oracle()?;
    let bundle = ctx.bundle(flag)?;
    let source: &dyn HydroSource = match &bundle {
        Some(b) => b,
        None => &oracle,
    };
    let problem = ProblemSpec {
        optimize_plant: false,
        optimize_control: false,
        optimize_layout: false,
        ..ctx.config.problem.clone()
    };
    let d = problem.decode(&[])?;
    let climate = ctx.climate()?;
    let power = problem.power(&ctx.config.power);
    let weights = ClimateWeights::new(&climate, source.grid(), &power)?;
    let layout = FarmLayout::new(d.centers.clone())?;
    let table = compose_farm(&d.geom, &layout, source)?;
    let resp = power_response(&table, &d.geom, &d.control, source.grid())?;
    let p_a = lifetime_power(&resp, &weights, &power);
    let hp = ctx.path("hydro_table.csv");
    table.write_csv(&hp)?;
    let pp = ctx.path("power_matrix.csv");
    write_power_matrix(&pp, &resp, &climate, source.grid(), &power)?;
    let result = SimulateResult {
        radius: d.geom.radius,
        slenderness: d.geom.slenderness,
        centers: d.centers,
        p_a,
        p_v: objective_pv(p_a, &d.geom),
    };
    ctx.artifact("simulate.json", source.id(), result)?;
    Ok(())
}

#[derive(Serialize, serde::Deserialize)]
struct OptimizeOutput {
    problem: ProblemSpec,
    global_source: String,
    local_source: String,
    runs: Vec<(u64, HybridResult)>,
    best: usize,
}

fn optimize(ctx: &mut Ctx, flag: &Option<PathBuf>) -> Result<(), Failure> {
    let oracle = ctx.oracle()?;
    let bundle = ctx.bundle(flag)?;
    if bundle.is_none() {
        log::warn!("no surrogate bundle configured; the genetic stage uses the oracle");
    }
    let global: &dyn HydroSource = match &bundle {
        Some(b) => b,
        None => &oracle,
    };
    let climate = ctx.climate()?;
    let power = ctx.config.power.clone();
    let weights = ClimateWeights::new(&climate, oracle.grid(), &power)?;
    let problem = ctx.config.problem.clone();
    let mut runs = Vec::new();
    let mut seeds = ctx.config.seeds.clone();
    seeds[0] = ctx.seed;
    for seed in seeds {
        let ge = Evaluator::new(global, &weights, &power);
        let le = Evaluator::new(&oracle, &weights, &power);
        let ga = wecfarm::optimizer::GaOptions {
            seed,
            ..ctx.config.ga.clone()
        };
        runs.push((seed, hybrid(&problem, &ge, &le, &ga, &ctx.config.refine)?));
    }
    let best = (0..runs.len())
        .max_by(|&a, &b| runs[a].1.refined.p_v.total_cmp(&runs[b].1.refined.p_v))
        .expect("at least one seed");
    let d = problem.decode(&runs[best].1.refined.x)?;
    let p = ctx.path("layout.csv");
    write_layout_csv(&p, &d.centers)?;
    let out = OptimizeOutput {
        problem,
        global_source: global.id(),
        local_source: oracle.id(),
        runs,
        best,
    };
    ctx.artifact("optimize.json", oracle.id(), out)?;
    Ok(())
}

fn case(ctx: &mut Ctx, id: CaseId, flag: &Option<PathBuf>) -> Result<(), Failure> {
    let oracle = ctx.oracle()?;
    let bundle = ctx.bundle(flag)?;
    if bundle.is_none() {
        log::warn!("no surrogate bundle configured; the genetic stage uses the oracle");
    }
    let global: &dyn HydroSource = match &bundle {
        Some(b) => b,
        None => &oracle,
    };
    let climate = ctx.climate()?;
    let settings = ctx.config.case_settings(ctx.seed);
    let weights = ClimateWeights::new(&climate, oracle.grid(), &settings.power)?;
    let report: CaseReport = case_study(id, &settings, global, &oracle, &weights)?;
    let last = report.runs.last().expect("at least one run");
    let p = ctx.path("layout.csv");
    write_layout_csv(&p, &last.design.centers)?;
    if !report.sweep.is_empty() {
        let p = ctx.path("sweep.csv");
        let mut w = csv_writer(&p)?;
        writeln_csv(&mut w, "p_lim_kw,radius_m,slenderness,draft_m,p_v,p_a_watts")?;
        for r in &report.sweep {
            writeln_csv(
                &mut w,
                &format!("{},{},{},{},{},{}", r.p_lim_kw, r.radius, r.slenderness, r.draft, r.p_v, r.p_a),
            )?;
        }
    }
    ctx.artifact("case_study.json", oracle.id(), &report)?;
    Ok(())
}

fn perturb(ctx: &mut Ctx, result: &Path, wec: usize, radius: f64, n: usize) -> Result<(), Failure> {
    let text = std::fs::read_to_string(result)
        .with_context(|| format!("reading {}", result.display()))
        .map_err(Failure::Usage)?;
    let art: Artifact<OptimizeOutput> = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", result.display()))
        .map_err(Failure::Usage)?;
    let out = art.result;
    let x = &out.runs[out.best].1.refined.x;
    let oracle = ctx.oracle()?;
    let climate = ctx.climate()?;
    let weights = ClimateWeights::new(&climate, oracle.grid(), &ctx.config.power)?;
    let eval = Evaluator::new(&oracle, &weights, &ctx.config.power);
    let rows = perturb_sensitivity(&out.problem, x, wec, radius, n, ctx.seed, &eval)?;
    let p = ctx.path("perturb.csv");
    write_perturb_csv(&p, &rows)?;
    Ok(())
}
