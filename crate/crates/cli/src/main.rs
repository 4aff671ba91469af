use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hdtest::asymptotics::{
    f_w, mixture_normal_cdf, mu_nw, power_limit_mc, sigma2_nw, GaussianProcessSpec, HypergeometricLaw,
    MomentConstants,
};
use hdtest::datagen::{generate, ExampleId, Innovation, ScenarioConfig, VDiag};
use hdtest::diagnostics::{discrepancy_report, estimate_moment_constants, l2_moment_estimates, DEFAULT_NULL_DRAWS};
use hdtest::harness::{run_realdata_study, run_size_study, run_study, ClassSelection, PowerTable, StudyConfig};
use hdtest::io::{load_delimited, read_sample_file, write_sample, DelimitedFormat};
use hdtest::permutation::{PermutationPlan, DEFAULT_PERMUTATIONS};
use hdtest::{permutation_test, Error, KernelFamily, KernelSpec};

#[derive(Parser)]
#[command(name = "hdtest", version, about = "Interpoint-distance two-sample tests for high-dimensional data")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "HDTEST_JOBS")]
    jobs: Option<usize>,

    /// Master seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Permutation test on a CSV sample (one observation per row).
    Test(TestArgs),
    /// Table of f(w), mu, sigma^2 and pmf(w) for given constants.
    Asymptotics(AsymptoticsArgs),
    /// Monte Carlo power limit for the Gaussian-process approximation.
    Powerlimit(PowerLimitArgs),
    /// Discrepancy measures, regime hint and estimated moment constants.
    Diagnose(DiagnoseArgs),
    /// Draw a sample from one of the simulation designs.
    Gen(GenArgs),
    /// Power study from a JSON config.
    Power(StudyArgs),
    /// Size study from a JSON config (null designs only).
    Size(StudyArgs),
    /// Subsampling power study on a class-labeled dataset.
    Realdata(RealDataArgs),
}

#[derive(Args)]
struct KernelArgs {
    /// l2 | l1 | gaussian | laplacian
    #[arg(long, default_value = "l2")]
    kernel: KernelFamily,
    /// Bandwidth of the gaussian and laplacian kernels.
    #[arg(long, default_value_t = hdtest::kernels::DEFAULT_BANDWIDTH)]
    gamma: f64,
}

impl KernelArgs {
    fn spec(&self) -> hdtest::Result<KernelSpec> {
        KernelSpec::new(self.kernel, self.gamma)
    }
}

#[derive(Args)]
struct TestArgs {
    /// CSV file, first `--n` rows are the first group.
    input: PathBuf,
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Monte Carlo permutations, identity included.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    perms: usize,
    /// Enumerate all (n+m)! permutations (falls back to Monte Carlo above 10!).
    #[arg(long)]
    exact: bool,
    /// Print a header line before the result.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long)]
    e_x: f64,
    #[arg(long)]
    e_y: f64,
    #[arg(long)]
    e_xy: f64,
    #[arg(long, default_value_t = 0.0)]
    v_x: f64,
    #[arg(long, default_value_t = 0.0)]
    v_y: f64,
    #[arg(long, default_value_t = 0.0)]
    v_xy: f64,
}

#[derive(Args)]
struct AsymptoticsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    constants: ConstantsArgs,
    /// Print the limiting mixture cdf at this point instead of the table.
    #[arg(long)]
    cdf: Option<f64>,
}

#[derive(Args)]
struct PowerLimitArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    v_xy: f64,
    #[arg(long)]
    v_x: f64,
    #[arg(long)]
    v_y: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 20_000)]
    draws: usize,
    /// Monte Carlo permutations per draw; full enumeration if absent and feasible.
    #[arg(long)]
    perms: Option<usize>,
}

#[derive(Args)]
struct DiagnoseArgs {
    input: PathBuf,
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Random relabelings used for the regime hint.
    #[arg(long, default_value_t = DEFAULT_NULL_DRAWS)]
    null_draws: usize,
}

#[derive(Args)]
struct GenArgs {
    /// ScenarioConfig as JSON; flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    example: Option<ExampleId>,
    #[arg(long, required_unless_present = "config")]
    p: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value = "normal")]
    innovation: Innovation,
    #[arg(long, default_value = "ones")]
    v_diag: VDiag,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Add a compute-time column (makes output run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct RealDataArgs {
    #[arg(long)]
    file: PathBuf,
    #[arg(long, default_value = "ucr-tsv")]
    format: DelimitedFormat,
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60")]
    sizes: Vec<usize>,
    /// Two class labels, comma separated; the first two in the file if absent.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    classes: Option<Vec<String>>,
    /// Draw both groups from the first class.
    #[arg(long)]
    null_control: bool,
    #[arg(long, value_delimiter = ',', default_value = "l2,gaussian,laplacian,l1")]
    kernels: Vec<KernelFamily>,
    #[arg(long, default_value_t = hdtest::kernels::DEFAULT_BANDWIDTH)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    perms: usize,
    #[arg(long)]
    timing: bool,
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_test(a: &TestArgs, seed: u64, out: &mut dyn Write) -> hdtest::Result<()> {
    let sample = read_sample_file(&a.input, a.n)?;
    let mut plan = PermutationPlan::monte_carlo(a.perms, seed);
    if a.exact {
        let exact = PermutationPlan::exact();
        if exact.exact_feasible(sample.total()) {
            plan = exact;
        } else {
            eprintln!(
                "warning: {}! permutations exceed the enumeration cap; using {} Monte Carlo permutations",
                sample.total(),
                a.perms
            );
        }
    }
    let result = permutation_test(&sample, &a.kernel.spec()?, a.alpha, &plan)?;
    if a.header {
        writeln!(out, "statistic,critical_value,p_value,reject")?;
    }
    writeln!(out, "{}", result.csv_line())?;
    Ok(())
}

fn run_asymptotics(a: &AsymptoticsArgs, out: &mut dyn Write) -> hdtest::Result<()> {
    let c = &a.constants;
    let consts = MomentConstants::new(c.e_x, c.e_y, c.e_xy, c.v_x, c.v_y, c.v_xy)?;
    let spec = a.kernel.spec()?;
    if let Some(x) = a.cdf {
        writeln!(out, "a,cdf")?;
        writeln!(out, "{x},{}", mixture_normal_cdf(x, a.n, a.m, &consts, &spec)?)?;
        return Ok(());
    }
    let law = HypergeometricLaw::new(a.n, a.m)?;
    writeln!(out, "w,f_w,mu,sigma2,pmf")?;
    for w in law.support() {
        writeln!(
            out,
            "{w},{},{},{},{}",
            f_w(a.n, a.m, w)?,
            mu_nw(a.n, a.m, w, &consts, &spec)?,
            sigma2_nw(a.n, a.m, w, &consts, &spec)?,
            law.pmf(w)
        )?;
    }
    Ok(())
}

fn run_powerlimit(a: &PowerLimitArgs, seed: u64, out: &mut dyn Write) -> hdtest::Result<()> {
    let gp = GaussianProcessSpec { n: a.n, m: a.m, v_xy: a.v_xy, v_x: a.v_x, v_y: a.v_y };
    let plan = match a.perms {
        Some(s) => PermutationPlan::monte_carlo(s, seed),
        None if PermutationPlan::exact().exact_feasible(a.n + a.m) => PermutationPlan::exact().with_seed(seed),
        None => {
            eprintln!("warning: enumeration too large; using {DEFAULT_PERMUTATIONS} Monte Carlo permutations");
            PermutationPlan::monte_carlo(DEFAULT_PERMUTATIONS, seed)
        }
    };
    let est = power_limit_mc(&gp, a.alpha, &plan, a.draws)?;
    writeln!(out, "estimate,standard_error,draws")?;
    writeln!(out, "{},{},{}", est.estimate, est.standard_error, est.draws)?;
    Ok(())
}

fn run_diagnose(a: &DiagnoseArgs, seed: u64, out: &mut dyn Write) -> hdtest::Result<()> {
    let sample = read_sample_file(&a.input, a.n)?;
    let spec = a.kernel.spec()?;
    let report = discrepancy_report(&sample, a.null_draws, seed)?;
    writeln!(out, "{}", hdtest::diagnostics::DiscrepancyReport::CSV_HEADER)?;
    for row in report.csv_rows() {
        writeln!(out, "{row}")?;
    }
    match estimate_moment_constants(&sample, &spec) {
        Ok(c) => {
            for (k, v) in [("e_x", c.e_x), ("e_y", c.e_y), ("e_xy", c.e_xy), ("v_x", c.v_x), ("v_y", c.v_y), ("v_xy", c.v_xy)] {
                writeln!(out, "{k},{v},")?;
            }
        }
        Err(e) => eprintln!("warning: moment constants not estimated: {e}"),
    }
    let l = l2_moment_estimates(&sample, &spec);
    for (k, v) in [
        ("alpha2_x", l.alpha2_x),
        ("alpha2_y", l.alpha2_y),
        ("alpha2_xy", l.alpha2_xy),
        ("sqrt_p_alpha2_x", l.sqrt_p_alpha2_x),
        ("sqrt_p_alpha2_y", l.sqrt_p_alpha2_y),
        ("sqrt_p_alpha2_xy", l.sqrt_p_alpha2_xy),
    ] {
        writeln!(out, "{k},{v},")?;
    }
    Ok(())
}

fn run_gen(a: &GenArgs, seed: Option<u64>, out: &mut dyn Write) -> hdtest::Result<()> {
    let mut cfg = match &a.config {
        Some(path) => serde_json::from_str::<ScenarioConfig>(&std::fs::read_to_string(path)?)?,
        None => {
            let missing = || Error::Argument("--example, --p, --n and --m are required without --config".into());
            let mut c = ScenarioConfig::new(
                a.example.ok_or_else(missing)?,
                a.p.ok_or_else(missing)?,
                a.n.ok_or_else(missing)?,
                a.m.ok_or_else(missing)?,
            )
            .with_rho(a.rho)
            .with_beta(a.beta);
            c.innovation = a.innovation;
            c.v_diag = a.v_diag;
            c
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    write_sample(&generate(&cfg)?, out)
}

fn finish_table(table: &PowerTable, out: &mut dyn Write) -> hdtest::Result<()> {
    table.write_csv(out)?;
    for r in table.rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("warning: grid {} ({}, {}) {}", r.grid, r.scenario, r.kernel, r.status);
    }
    Ok(())
}

fn load_study(a: &StudyArgs, cli: &Cli) -> hdtest::Result<StudyConfig> {
    let mut cfg = StudyConfig::from_file(&a.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.record_time |= a.timing;
    Ok(cfg)
}

fn run(cli: &Cli) -> hdtest::Result<()> {
    let seed = cli.seed.unwrap_or(0);
    // study configs may name their own output file
    let study_out = |cfg: &StudyConfig| cli.out.clone().or_else(|| cfg.out.clone());
    match &cli.command {
        Command::Test(a) => run_test(a, seed, &mut output(cli.out.as_deref())?),
        Command::Asymptotics(a) => run_asymptotics(a, &mut output(cli.out.as_deref())?),
        Command::Powerlimit(a) => run_powerlimit(a, seed, &mut output(cli.out.as_deref())?),
        Command::Diagnose(a) => run_diagnose(a, seed, &mut output(cli.out.as_deref())?),
        Command::Gen(a) => run_gen(a, cli.seed, &mut output(cli.out.as_deref())?),
        Command::Power(a) => {
            let cfg = load_study(a, cli)?;
            let table = run_study(&cfg)?;
            finish_table(&table, &mut output(study_out(&cfg).as_deref())?)
        }
        Command::Size(a) => {
            let cfg = load_study(a, cli)?;
            let table = run_size_study(&cfg)?;
            for r in table.rows.iter().filter(|r| r.is_ok() && !r.within_se_of(cfg.alpha, 3.0)) {
                eprintln!(
                    "note: grid {} {} size {} is more than 3 standard errors from {}",
                    r.grid, r.kernel, r.rejection_rate, cfg.alpha
                );
            }
            finish_table(&table, &mut output(study_out(&cfg).as_deref())?)
        }
        Command::Realdata(a) => {
            let data = load_delimited(&a.file, a.format)?;
            let classes = a.classes.as_ref().map(|c| (c[0].clone(), c[1].clone()));
            let sel = ClassSelection::resolve(&data, classes.as_ref(), a.null_control)?;
            let cfg = StudyConfig {
                kernels: a.kernels.clone(),
                gamma: a.gamma,
                alpha: a.alpha,
                replications: a.reps,
                permutations: a.perms,
                seed,
                record_time: a.timing,
                ..StudyConfig::new(Vec::new())
            };
            let table = run_realdata_study(&data, &a.sizes, &sel, &cfg)?;
            finish_table(&table, &mut output(cli.out.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
