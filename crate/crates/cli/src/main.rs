use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use minruin::analysis::whiteness_report;
use minruin::control::{load_control, ControlConfig, Horizon};
use minruin::hazard::{
    derive_hazards, fixed_horizon_schedule, AgeTable, HazardSchedule, Member, MpuSpec,
};
use minruin::output::{self, HAZARD_FILE};
use minruin::returns::ReturnModel;
use minruin::simulate::{simulate, SimConfig, Strategy};
use minruin::solver::{solve_with, AlphaSearch, SolveOptions};

#[derive(Parser)]
#[command(
    name = "minruin",
    version,
    about = "Minimum probability of ruin for inflation-adjusted withdrawals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a control file and write the result files.
    Solve(SolveArgs),
    /// Derive hazard rates for a retiree or multi-person unit.
    Hazard(HazardArgs),
    /// Estimate a strategy's probability of ruin by simulation.
    Simulate(SimulateArgs),
    /// Autocorrelation diagnostics for a one-column return series.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct AgeSource {
    /// Age probability table (`age male_prob female_prob` rows).
    #[arg(long, value_name = "FILE", conflicts_with = "bundled_ages")]
    ages: Option<PathBuf>,
    /// Use the age table shipped with the program.
    #[arg(long)]
    bundled_ages: bool,
}

impl AgeSource {
    fn load(&self, fallback_dir: Option<&Path>) -> Result<Option<AgeTable>> {
        if self.bundled_ages {
            return Ok(Some(AgeTable::bundled()));
        }
        if let Some(p) = &self.ages {
            return Ok(Some(
                AgeTable::load(p).with_context(|| format!("reading {}", p.display()))?,
            ));
        }
        if let Some(dir) = fallback_dir {
            let p = dir.join("ageprobs.txt");
            if p.exists() {
                return Ok(Some(
                    AgeTable::load(&p).with_context(|| format!("reading {}", p.display()))?,
                ));
            }
        }
        Ok(None)
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Search {
    Exhaustive,
    Bracketed,
}

#[derive(Args)]
struct SolveArgs {
    /// Control file, or a directory containing control.txt.
    control: PathBuf,
    /// Output directory (defaults to the control file's directory).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    ages: AgeSource,
    /// Worker threads (defaults to all cores).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,
    /// Allocation search within each bucket.
    #[arg(long, value_enum, default_value = "exhaustive")]
    search: Search,
    /// Read hazards from an existing hrates.txt in the output directory instead of deriving them.
    #[arg(long)]
    reuse_hrates: bool,
}

#[derive(Args)]
struct HazardArgs {
    /// Members as `M 65 F 67`; a control file can be given instead.
    #[arg(value_name = "GENDER AGE", num_args = 0..)]
    members: Vec<String>,
    #[arg(long, conflicts_with = "members")]
    control: Option<PathBuf>,
    #[command(flatten)]
    ages: AgeSource,
    /// Write hrates.txt here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Constant allocation to stocks.
    #[arg(long, group = "strategy")]
    fixed_alpha: Option<f64>,
    /// Allocation table (FinalAlphaResults_H.csv) from `solve`.
    #[arg(long, group = "strategy")]
    policy: Option<PathBuf>,
    /// One allocation per line, one line per decision stage.
    #[arg(long, group = "strategy")]
    glide_path: Option<PathBuf>,
    /// Initial withdrawal rate.
    #[arg(long)]
    wr: f64,
    /// Fixed horizon in years.
    #[arg(long, conflicts_with_all = ["members", "control"])]
    years: Option<usize>,
    /// Members as `M 65 F 67` for a random horizon.
    #[arg(long, num_args = 1.., conflicts_with = "control")]
    members: Vec<String>,
    /// Take the return model and horizon from a control file.
    #[arg(long)]
    control: Option<PathBuf>,
    #[command(flatten)]
    ages: AgeSource,
    /// Expense ratio (ignored with --control).
    #[arg(long, default_value_t = 0.0)]
    er: f64,
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    paths: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,
    /// Write the ruin-time histogram as CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// One value per line.
    series: PathBuf,
    /// Largest lag (defaults to n / 4).
    #[arg(long)]
    max_lag: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Hazard(a) => run_hazard(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Analyze(a) => run_analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn resolve_control(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("control.txt")
    } else {
        path.to_path_buf()
    }
}

fn read_control(path: &Path) -> Result<ControlConfig> {
    load_control(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_members(tokens: &[String]) -> Result<MpuSpec> {
    if tokens.is_empty() || !tokens.len().is_multiple_of(2) {
        bail!("members must be given as gender/age pairs, e.g. `M 65 F 67`");
    }
    let members = tokens
        .chunks(2)
        .map(|p| {
            let age = p[1]
                .parse()
                .with_context(|| format!("bad age {:?}", p[1]))?;
            Ok(Member::new(p[0].parse()?, age))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MpuSpec::new(members)?)
}

fn hazards_for(
    cfg: &ControlConfig,
    ages: &AgeSource,
    dir: Option<&Path>,
) -> Result<HazardSchedule> {
    match &cfg.horizon {
        Horizon::Fixed(t) => Ok(fixed_horizon_schedule(*t)?),
        Horizon::Random(mpu) => {
            let table = ages
                .load(dir)?
                .context("a random horizon needs an age table (--ages FILE or --bundled-ages)")?;
            Ok(derive_hazards(&table, mpu)?)
        }
    }
}

fn run_solve(a: SolveArgs) -> Result<()> {
    let control = resolve_control(&a.control);
    let cfg = read_control(&control)?;
    let dir = control.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = a.out.clone().unwrap_or_else(|| dir.clone());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let hazard_path = out.join(HAZARD_FILE);
    let h = if a.reuse_hrates && hazard_path.exists() {
        log::info!("using existing {}", hazard_path.display());
        HazardSchedule::read_hrates(&hazard_path)?
    } else {
        let h = hazards_for(&cfg, &a.ages, Some(&dir))?;
        if matches!(cfg.horizon, Horizon::Random(_)) {
            h.write_hrates(&hazard_path)
                .with_context(|| format!("writing {}", hazard_path.display()))?;
        }
        h
    };
    let d = cfg.discretization()?;
    log::info!(
        "{} decision stages, {} buckets, {} allocations",
        h.stages(),
        d.bucket_count(),
        d.p_alpha + 1
    );
    let opts = SolveOptions {
        search: match a.search {
            Search::Exhaustive => AlphaSearch::Exhaustive,
            Search::Bracketed => AlphaSearch::Bracketed,
        },
        workers: a.workers.map(usize::from),
        alphas: None,
    };
    let started = Instant::now();
    let grid = solve_with(&cfg.model, &h, &d, &opts)?;
    output::write_all(&grid, &out)
        .with_context(|| format!("writing results to {}", out.display()))?;
    log::info!("done in {:.1?}", started.elapsed());
    Ok(())
}

fn run_hazard(a: HazardArgs) -> Result<()> {
    let (mpu, dir) = match &a.control {
        Some(c) => {
            let path = resolve_control(c);
            let cfg = read_control(&path)?;
            match cfg.horizon {
                Horizon::Random(mpu) => (mpu, path.parent().map(Path::to_path_buf)),
                Horizon::Fixed(_) => bail!("{} describes a fixed horizon", path.display()),
            }
        }
        None => (parse_members(&a.members)?, None),
    };
    let table = a
        .ages
        .load(dir.as_deref())?
        .context("an age table is required (--ages FILE or --bundled-ages)")?;
    let h = derive_hazards(&table, &mpu)?;
    match &a.out {
        Some(p) => h
            .write_hrates(p)
            .with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", h.to_hrates()),
    }
    Ok(())
}

fn grid_resolution(path: &Path) -> Result<u32> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text
        .lines()
        .nth(1)
        .and_then(|l| l.split(',').next())
        .context("allocation table has no rows")?;
    let rf: f64 = first
        .trim()
        .parse()
        .with_context(|| format!("bad ruin factor {first:?}"))?;
    if !(rf > 0.0) {
        bail!("first ruin factor must be positive");
    }
    Ok((1.0 / rf).round() as u32)
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let (model, horizon) = if let Some(c) = &a.control {
        let path = resolve_control(c);
        let cfg = read_control(&path)?;
        let dir = path.parent().map(Path::to_path_buf);
        let h = hazards_for(&cfg, &a.ages, dir.as_deref())?;
        (cfg.model, h)
    } else {
        let model = ReturnModel::historical(0.0).with_expense_ratio(a.er)?;
        let h = match (a.years, a.members.is_empty()) {
            (Some(t), true) => fixed_horizon_schedule(t)?,
            (None, false) => {
                let table = a.ages.load(None)?.context(
                    "a random horizon needs an age table (--ages FILE or --bundled-ages)",
                )?;
                derive_hazards(&table, &parse_members(&a.members)?)?
            }
            _ => bail!("give --years, --members or --control"),
        };
        (model, h)
    };
    let strategy = match (&a.fixed_alpha, &a.policy, &a.glide_path) {
        (Some(x), None, None) => Strategy::Fixed(*x),
        (None, Some(p), None) => {
            let p_r = grid_resolution(p)?;
            Strategy::Policy(
                output::read_alpha_policy(p, p_r)
                    .with_context(|| format!("reading {}", p.display()))?,
            )
        }
        (None, None, Some(p)) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let g = text
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .with_context(|| format!("bad allocation {t:?}"))
                })
                .collect::<Result<Vec<_>>>()?;
            Strategy::GlidePath(g)
        }
        _ => bail!("give one of --fixed-alpha, --policy or --glide-path"),
    };
    let cfg = SimConfig {
        n_paths: a.paths,
        master_seed: a.seed,
        strategy,
        w_r: a.wr,
        horizon,
        workers: a.workers.map(usize::from),
    };
    let started = Instant::now();
    let r = simulate(&cfg, &model)?;
    println!("paths        {}", r.n_paths);
    println!("ruined       {}", r.ruined);
    println!("P(ruin)      {:.6}", r.estimate);
    println!("std error    {:.6}", r.std_error);
    log::info!("simulated in {:.1?}", started.elapsed());
    if let Some(p) = &a.histogram {
        let mut csv = String::from("t,ruined\n");
        for (t, c) in r.ruined_at.iter().enumerate() {
            csv.push_str(&format!("{t},{c}\n"));
        }
        fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn run_analyze(a: AnalyzeArgs) -> Result<()> {
    let text =
        fs::read_to_string(&a.series).with_context(|| format!("reading {}", a.series.display()))?;
    let values = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .with_context(|| format!("line {}: bad value {:?}", i + 1, l.trim()))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_lag = a.max_lag.unwrap_or(values.len() / 4).max(1);
    let report = whiteness_report(&values, max_lag)?;
    print!("{}", report.to_table());
    Ok(())
}
