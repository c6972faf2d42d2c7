use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;
use ovalwig_core::fisher::{fisher_report, score_field, SCORE_FLOOR};
use ovalwig_core::geometry::{Grid2D, OvalShape};
use ovalwig_core::helmholtz::{solve_modes, solve_parity, EigenMode, EigenSettings};
use ovalwig_core::negativity::{complex_entropy, split_channels};
use ovalwig_core::sweep::{run_sweep_with, PointView};
use ovalwig_core::wigner::{
    field_integrity, purity, wigner_slice, wigner_transform, MomentumGrid, SliceAxis, WignerPlan,
};

use crate::config::{RunConfig, Sector};
use crate::dump::{self, read_dump, write_dump, GridDump};
use crate::error::{Error, Result};
use crate::report::{self, real};

#[derive(Parser, Debug)]
#[command(name = "ovalwig", version, about = "Wigner negativity and channel Fisher information of oval billiard modes")]
struct Cli {
    /// error, warn, info, debug or trace; overrides the config file
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dirichlet eigenpairs at one deformation
    Solve(SolveArgs),
    /// Wigner field (and optional slices) of a mode dump
    Wigner(WignerArgs),
    /// Complex entropy of a Wigner field dump
    Entropy(EntropyArgs),
    /// Fisher report for a (theta - delta, theta, theta + delta) field triple
    Fisher(FisherArgs),
    /// Full pipeline over the configured theta range
    Sweep(SweepArgs),
    /// Invariant suite on a dump
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long, default_value_t = 1.2)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// grid spacing
    #[arg(long, default_value_t = 1.0 / 64.0)]
    h: f64,
    /// all, even or odd (reflection sector about y = 0)
    #[arg(long, default_value = "all")]
    parity: String,
    #[arg(long)]
    k_min: Option<f64>,
    #[arg(long, requires = "k_min")]
    k_max: Option<f64>,
    /// directory receiving one mode dump per eigenpair
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WignerArgs {
    /// mode dump
    #[arg(long)]
    mode: PathBuf,
    /// output stem for the field dump
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    stride: usize,
    #[arg(long, default_value_t = 48)]
    momentum_points: usize,
    /// momentum window; defaults to momentum_factor * k
    #[arg(long)]
    p_max: Option<f64>,
    #[arg(long, default_value_t = 2.5)]
    momentum_factor: f64,
    /// also write `<out>_slice_x` and `<out>_slice_y`
    #[arg(long)]
    slices: bool,
    #[arg(long, default_value_t = 96)]
    slice_points: usize,
    #[arg(long, default_value_t = 96)]
    slice_momenta: usize,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    /// Wigner field dump
    field: PathBuf,
}

#[derive(Args, Debug)]
struct FisherArgs {
    #[arg(long)]
    lower: PathBuf,
    #[arg(long)]
    center: PathBuf,
    #[arg(long)]
    upper: PathBuf,
    /// parameter step between the fields
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = SCORE_FLOOR)]
    tau: f64,
    /// output stem for the score field
    #[arg(long)]
    score_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// re-run the configuration echoed in a run manifest
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// output directory, overriding the configured one
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    dump: PathBuf,
    /// mode dump the field was computed from, for the position marginal
    #[arg(long)]
    mode: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(level: LevelFilter) {
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn parse_level(s: &str) -> Result<LevelFilter> {
    s.parse().map_err(|_| Error::Config(format!("unknown log level {s:?}")))
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let flag_level = cli.log_level.as_deref().map(parse_level).transpose()?;
    if !matches!(cli.command, Command::Sweep(_)) {
        init_logging(flag_level.unwrap_or(LevelFilter::Warn));
    }
    match cli.command {
        Command::Solve(a) => solve(a, out),
        Command::Wigner(a) => wigner(a, out),
        Command::Entropy(a) => entropy(a, out),
        Command::Fisher(a) => fisher(a, out),
        Command::Sweep(a) => sweep(a, flag_level, out),
        Command::Check(a) => check(a, out),
    }
}

fn emit(out: &mut dyn Write, key: &str, value: f64) -> Result<()> {
    writeln!(out, "{key} {}", real(value)).map_err(Error::io("<stdout>"))
}

fn say(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(Error::io("<stdout>"))
}

fn solve(a: SolveArgs, out: &mut dyn Write) -> Result<()> {
    let shape = OvalShape::new(a.a, a.b, a.theta)?;
    let grid = Grid2D::covering_symmetric(&shape.bounding_box(), a.h, 1)?;
    let window = a.k_min.map(|lo| (lo, a.k_max.unwrap_or(f64::INFINITY)));
    let settings = EigenSettings::default();
    let modes = match a.parity.as_str() {
        "all" => solve_modes(&shape, &grid, a.count, window, &settings)?,
        "even" => solve_parity(&shape, &grid, Sector::Even.into(), a.count, window, &settings)?,
        "odd" => solve_parity(&shape, &grid, Sector::Odd.into(), a.count, window, &settings)?,
        other => return Err(Error::Config(format!("parity must be all, even or odd, got {other:?}"))),
    };
    if let Some(dir) = &a.dump {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    say(out, "index k residual y_parity")?;
    for (i, m) in modes.iter().enumerate() {
        say(out, &format!("{i} {} {} {}", real(m.k()), real(m.residual()), m.y_parity()))?;
        if let Some(dir) = &a.dump {
            write_dump(&dir.join(format!("mode_{i}")), &dump::mode_dump(m))?;
        }
    }
    Ok(())
}

fn load_mode(path: &Path) -> Result<EigenMode> {
    dump::mode_from_dump(&read_dump(path)?)
}

fn wigner(a: WignerArgs, out: &mut dyn Write) -> Result<()> {
    let mode = load_mode(&a.mode)?;
    let p_max = a.p_max.unwrap_or(a.momentum_factor * mode.k());
    let support = mode.shape().bounding_box();
    let plan = WignerPlan::aligned(mode.grid(), &support, a.stride, MomentumGrid::window(a.momentum_points, p_max)?)?;
    let field = wigner_transform(&mode, &plan)?;
    let stem = dump::stem(&a.out);
    write_dump(&stem, &dump::wigner_dump(&field))?;
    let e = complex_entropy(&field)?;
    emit(out, "integral", field.integral())?;
    emit(out, "drift", field.drift())?;
    emit(out, "purity", purity(&field))?;
    emit(out, "N", e.n)?;
    emit(out, "h_r", e.h_r)?;
    emit(out, "h_i", e.h_i)?;
    if a.slices {
        for (axis, tag, names) in [(SliceAxis::X, "x", ["x", "p_x"]), (SliceAxis::Y, "y", ["y", "p_y"])] {
            let slice = wigner_slice(&mode, &plan, axis, a.slice_points, a.slice_momenta)?;
            let mut path = stem.as_os_str().to_owned();
            path.push(format!("_slice_{tag}"));
            write_dump(Path::new(&path), &dump::slice_dump(&slice, &format!("slice_{tag}"), names))?;
        }
    }
    Ok(())
}

fn entropy(a: EntropyArgs, out: &mut dyn Write) -> Result<()> {
    let field = dump::wigner_from_dump(&read_dump(&a.field)?)?;
    let e = complex_entropy(&field)?;
    emit(out, "h_r", e.h_r)?;
    emit(out, "h_i", e.h_i)?;
    emit(out, "N", e.n)
}

fn fisher(a: FisherArgs, out: &mut dyn Write) -> Result<()> {
    let load = |p: &Path| -> Result<_> { dump::wigner_from_dump(&read_dump(p)?) };
    let (lower, center, upper) = (load(&a.lower)?, load(&a.center)?, load(&a.upper)?);
    let r = fisher_report(&lower, &center, &upper, a.delta, a.tau)?;
    if let Some(stem) = &a.score_out {
        let score = score_field(lower.values(), center.values(), upper.values(), a.delta, a.tau)?;
        let mut d = dump::wigner_dump(&center);
        d.kind = "score".into();
        d.meta.clear();
        d.values = score.values().to_vec();
        write_dump(stem, &d)?;
    }
    for (key, v) in [
        ("delta", r.delta),
        ("Z_plus", r.z_plus),
        ("N", r.n),
        ("F_plus", r.f_plus),
        ("F_minus", r.f_minus),
        ("F_tilde_minus", r.f_tilde_minus),
        ("mean_score", r.mean_score),
        ("dN_fd", r.dn_dtheta),
        ("dN_score", r.dn_dtheta_score),
        ("dhi_fd", r.dhi_fd),
        ("dhi_score", r.dhi_score),
        ("bound_rhs", r.bound_rhs),
        ("slack", r.slack),
        ("decomp_residual", r.decomposition_residual),
        ("masked_fraction", r.masked_fraction),
        ("masked_fraction_plus", r.masked_fraction_plus),
        ("F_minus_log_route", r.f_minus_log_route),
    ] {
        emit(out, key, v)?;
    }
    Ok(())
}

fn sweep(a: SweepArgs, flag_level: Option<LevelFilter>, out: &mut dyn Write) -> Result<()> {
    let mut config = match (&a.config, &a.manifest) {
        (Some(p), _) => RunConfig::from_file(p)?,
        (None, Some(p)) => report::read_manifest(p)?,
        (None, None) => unreachable!("clap requires one of --config and --manifest"),
    };
    if let Some(dir) = a.out {
        config.output_dir = dir;
    }
    init_logging(flag_level.unwrap_or(config.level()?));
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let dumps = dir.join("dumps");
    if config.dump_points {
        std::fs::create_dir_all(&dumps).map_err(Error::io(&dumps))?;
    }
    let sweep_config = config.sweep();
    let mut dump_error: Option<Error> = None;
    let started = std::time::Instant::now();
    let mut suite = IdentitySuite::default();
    let output = run_sweep_with(&sweep_config, |v: &PointView<'_>| {
        suite.observe(v);
        if config.dump_points && !v.labels.is_empty() && dump_error.is_none() {
            if let Err(e) = dump_point(&dumps, v, &sweep_config) {
                dump_error = Some(e);
            }
        }
    })?;
    if let Some(e) = dump_error {
        return Err(e);
    }
    let elapsed = started.elapsed().as_secs_f64();
    log::info!("sweep finished in {elapsed:.1} s, identity suite {:.2} s", suite.seconds);
    report::write_csv(&dir.join("sweep.csv"), &output)?;
    let mut summary = report::summary_json(&output);
    summary["identity_suite"] = suite.json(elapsed);
    report::write_json(&dir.join("summary.json"), &summary)?;
    report::write_json(&dir.join("run-manifest.json"), &report::manifest_json(&config, &output))?;
    match output.crossing {
        Some(c) => {
            emit(out, "theta_star", c.theta_star)?;
            emit(out, "gap", c.gap)?;
        }
        None => say(out, "theta_star none")?,
    }
    if let Some(s) = &output.summary {
        for b in &s.branches {
            let t = |v: Option<f64>| v.map_or_else(|| "none".to_string(), real);
            say(
                out,
                &format!(
                    "branch {} h_i_max {} F_minus_peak {} F_plus_peak {}",
                    b.branch,
                    t(b.h_i_max_theta),
                    t(b.f_minus_peak_theta),
                    t(b.f_plus_peak_theta)
                ),
            )?;
        }
    }
    say(out, &format!("wrote {}", dir.display()))
}

/// Worst-case identity deviations over every field a sweep computes.
#[derive(Default)]
struct IdentitySuite {
    fields: usize,
    integral_error: f64,
    inversion_asymmetry: f64,
    purity_min: Option<f64>,
    purity_max: Option<f64>,
    marginal_error: f64,
    channel_error: f64,
    decomposition_ratio: f64,
    slack_ratio_min: Option<f64>,
    seconds: f64,
}

impl IdentitySuite {
    fn observe(&mut self, v: &PointView<'_>) {
        let t = std::time::Instant::now();
        for (field, mode) in [(v.lower, v.lower_mode), (v.center, v.mode), (v.upper, v.upper_mode)] {
            let f = field_integrity(field, Some(mode));
            self.fields += 1;
            self.integral_error = self.integral_error.max(f.integral_error);
            self.inversion_asymmetry = self.inversion_asymmetry.max(f.inversion_asymmetry);
            self.purity_min = Some(self.purity_min.map_or(f.purity, |p| p.min(f.purity)));
            self.purity_max = Some(self.purity_max.map_or(f.purity, |p| p.max(f.purity)));
            self.marginal_error = self.marginal_error.max(f.marginal_error.unwrap_or(0.0));
        }
        let r = v.record;
        // Z₊ - Z₋ = 1 with Z₋ = N
        self.channel_error = self.channel_error.max((r.z_plus - r.n - 1.0).abs());
        if !r.degenerate {
            if r.f_tilde_minus > 0.0 {
                self.decomposition_ratio = self.decomposition_ratio.max(r.decomposition_residual / r.f_tilde_minus);
            }
            if r.bound_rhs > 0.0 {
                let s = r.slack / r.bound_rhs;
                self.slack_ratio_min = Some(self.slack_ratio_min.map_or(s, |m| m.min(s)));
            }
        }
        self.seconds += t.elapsed().as_secs_f64();
    }

    fn json(&self, sweep_seconds: f64) -> serde_json::Value {
        serde_json::json!({
            "fields": self.fields,
            "integral_error_max": self.integral_error,
            "inversion_asymmetry_max": self.inversion_asymmetry,
            "purity_min": self.purity_min,
            "purity_max": self.purity_max,
            "position_marginal_error_max": self.marginal_error,
            "channel_identity_error_max": self.channel_error,
            "decomposition_residual_ratio_max": self.decomposition_ratio,
            "slack_ratio_min": self.slack_ratio_min,
            "suite_seconds": self.seconds,
            "sweep_seconds": sweep_seconds,
        })
    }
}

fn dump_point(dir: &Path, v: &PointView<'_>, config: &ovalwig_core::sweep::SweepConfig) -> Result<()> {
    for label in v.labels {
        let base = format!("{}_b{}", label.name(), v.branch);
        let theta = v.record.theta;
        write_dump(&dir.join(format!("{base}_mode")), &dump::mode_dump(v.mode))?;
        write_dump(&dir.join(format!("{base}_wigner")), &dump::wigner_dump(v.center).with_meta("theta", theta))?;
        for (axis, tag, names) in [(SliceAxis::X, "x", ["x", "p_x"]), (SliceAxis::Y, "y", ["y", "p_y"])] {
            let slice = wigner_slice(v.mode, v.plan, axis, config.slice_points, config.slice_momenta)?;
            let d: GridDump = dump::slice_dump(&slice, &format!("slice_{tag}"), names).with_meta("theta", theta);
            write_dump(&dir.join(format!("{base}_slice_{tag}")), &d)?;
        }
    }
    Ok(())
}

struct Checks<'a> {
    out: &'a mut dyn Write,
    failed: usize,
}

impl Checks<'_> {
    fn record(&mut self, name: &str, value: f64, ok: bool) -> Result<()> {
        if !ok {
            self.failed += 1;
        }
        let verdict = if ok { "pass" } else { "FAIL" };
        say(self.out, &format!("{verdict} {name} {}", real(value)))
    }
}

fn check(a: CheckArgs, out: &mut dyn Write) -> Result<()> {
    let d = read_dump(&a.dump)?;
    let mut c = Checks { out, failed: 0 };
    match d.kind.as_str() {
        "wigner" => {
            let field = dump::wigner_from_dump(&d)?;
            let mode = a.mode.as_deref().map(load_mode).transpose()?;
            let suite = field_integrity(&field, mode.as_ref());
            c.record("integral", suite.integral_error, suite.integral_error <= 1e-6)?;
            let split = split_channels(&field)?;
            let z = split.z_plus() - split.z_minus();
            c.record("z_plus_minus_z_minus", z - 1.0, (z - 1.0).abs() <= 1e-6)?;
            c.record("inversion_asymmetry", suite.inversion_asymmetry, suite.inversion_asymmetry == 0.0)?;
            c.record("purity", suite.purity - 1.0, (suite.purity - 1.0).abs() <= 0.02)?;
            let e = complex_entropy(&field)?;
            let gap = (e.h_i - core::f64::consts::PI * e.n).abs();
            c.record("h_i_minus_pi_n", gap, gap <= 1e-12 * e.h_i.max(1.0))?;
            if let Some(worst) = suite.marginal_error {
                c.record("position_marginal", worst, worst <= 1e-6)?;
            }
        }
        "mode" => {
            let mode = dump::mode_from_dump(&d)?;
            let norm = mode.norm_squared();
            c.record("norm", norm - 1.0, (norm - 1.0).abs() <= 1e-10)?;
            c.record("residual", mode.residual(), mode.residual() <= 1e-6)?;
        }
        other => return Err(Error::Config(format!("no checks defined for {other:?} dumps"))),
    }
    if c.failed > 0 {
        return Err(Error::Check(c.failed));
    }
    Ok(())
}
