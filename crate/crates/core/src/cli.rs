//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 2 for usage errors, 3 for numeric failures.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::check::run_checks;
use crate::error::Error;
use crate::figure::{figure_emit, FigureJob, DEFAULT_RATIOS};
use crate::joint::{ConditioningSpec, JointLaw, Mark};
use crate::local_limit::{central_local_limit, exact_point_prob, tilted_local_limit};
use crate::oracle::{
    empirical_rate, exact_conditional_law, mdp_empirical, sample_conditioned, EmpiricalMethod, OracleMetadata,
    Proposal, SimConfig,
};
use crate::oracle::exact::Side;
use crate::presets::Preset;
use crate::rates::{bartlett_laplace, gibbs_point, ldp_rate, linspace, mdp_consistency_check, mdp_params, SpeedSequence};
use crate::report::{csv_string, write_atomic};
use crate::schema::{LawSpec, MarkSpec};
use crate::special::fmt_sig17;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "CONDDEV_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "conddev",
    version,
    about = "Deviation rates, local limits and exact conditional laws for sums conditioned on a companion lattice sum",
    after_help = "Environment:\n  CONDDEV_THREADS   worker threads for parallel jobs (overridden by --threads)\n\nExit codes: 0 success, 2 usage error, 3 numeric failure."
)]
struct Cli {
    /// Worker threads [env: CONDDEV_THREADS]
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// LDP rate curve I(y) as `y,rate` CSV
    Rate {
        #[command(flatten)]
        law: LawArgs,
        /// Ratio p/q (defaults to p/q from --p and --q)
        #[arg(long)]
        ratio: Option<f64>,
        #[command(flatten)]
        grid: GridArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// MDP parameters and the curvature identity as JSON
    Mdp {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long)]
        ratio: Option<f64>,
        /// Also estimate a_n log P(...) by the DP oracle at these n (speed n^{-gamma})
        #[arg(long, value_delimiter = ',')]
        ns: Vec<u64>,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Threshold z of the moderate-deviation event
        #[arg(long, default_value_t = 1.0)]
        z: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Conditional Laplace transform f_n(u) as `u,f` CSV
    Laplace {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long)]
        n: u64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,-0.5,0,0.5,1")]
        u: Vec<f64>,
        #[arg(long, value_enum, default_value_t = LaplaceEngine::Fourier)]
        method: LaplaceEngine,
        #[command(flatten)]
        out: OutArg,
    },
    /// P(X_1 + ... + X_n = k) against its local-limit approximation
    Locallimit {
        #[command(flatten)]
        law: LawArgs,
        /// Number of summands
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Conditioned samples, or finite-n rates with --rate-y
    Simulate {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, default_value_t = 10)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampling streams run in parallel (defaults to --threads)
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 10_000_000)]
        max_rejections: u64,
        #[arg(long, value_enum, default_value_t = ProposalArg::Auto)]
        proposal: ProposalArg,
        /// Estimate -(1/nq) log P(T/nq on --side of Y | S = k) over --ns instead
        #[arg(long, allow_hyphen_values = true)]
        rate_y: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        ns: Vec<u64>,
        #[arg(long, value_enum, default_value_t = SideArg::Ge)]
        side: SideArg,
        #[arg(long, value_enum, default_value_t = RateEngine::Dp)]
        method: RateEngine,
        /// Output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact conditional law of T given S = k as `t,probability` CSV
    Oracle {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Occupancy rate curves, one CSV per ratio
    Figure {
        #[arg(long, default_value = "occupancy")]
        preset: String,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<f64>,
        #[command(flatten)]
        grid: GridArg,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Invariant suite on a law
    Check {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct LawArgs {
    /// Preset name: occupancy, bose-einstein, branching, bootstrap-count
    #[arg(long, conflicts_with = "law")]
    preset: Option<String>,
    /// Preset name or path to a JSON law file
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// indicator-zero, identity, indicator-eq:K or custom:K=Y,...[,default=Y]
    #[arg(long)]
    mark: Option<String>,
    /// Bootstrap f-values
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    weights: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    p: u64,
    #[arg(long, default_value_t = 1)]
    q: u64,
}

#[derive(Debug, Args)]
struct GridArg {
    /// y-grid as `start:stop:count` or a comma list
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output file (standard output when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LaplaceEngine {
    Fourier,
    Dp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProposalArg {
    Auto,
    Plain,
    Tilted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Ge,
    Le,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RateEngine {
    Dp,
    Mc,
}

enum Failure {
    Usage(String),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

/// Runs with the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return if code == 0 { 0 } else { 2 };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            let _ = writeln!(stderr, "error: --threads must be at least 1");
            return 2;
        }
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(&cli, stdout) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            2
        }
        Err(Failure::Numeric(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            3
        }
    }
}

fn resolve_law(a: &LawArgs) -> CliResult<(JointLaw, ConditioningSpec)> {
    let name = match (&a.preset, &a.law) {
        (Some(p), None) => p.clone(),
        (None, Some(l)) if Preset::NAMES.contains(&l.as_str()) => l.clone(),
        (None, Some(path)) => {
            let spec = match LawSpec::load(Path::new(path)) {
                Ok(s) => s,
                Err(e) => return usage(format!("--law '{path}': {e}")),
            };
            let law = match (spec, &a.mark) {
                (LawSpec::JointTable { .. }, Some(_)) => return usage("--mark cannot be combined with a joint-table law"),
                (s, None) => s.to_law()?,
                (s, Some(m)) => match s.to_law()? {
                    JointLaw::Marked { x, .. } => JointLaw::marked(x, parse_mark(m)?),
                    t => t,
                },
            };
            return Ok((law, ConditioningSpec::new(a.p, a.q, 1)?));
        }
        _ => return usage("one of --preset or --law is required"),
    };
    let preset = match Preset::by_name(&name) {
        Ok(p) => p,
        Err(e) => return usage(format!("--preset: {e}")),
    };
    let preset = match preset {
        Preset::Occupancy { lambda } => Preset::Occupancy { lambda: a.lambda.or(lambda) },
        Preset::BoseEinstein { rho, mark } => Preset::BoseEinstein {
            rho: a.rho.unwrap_or(rho),
            mark: a.mark.as_deref().map(parse_mark).transpose()?.unwrap_or(mark),
        },
        Preset::Branching { lambda, mark } => Preset::Branching {
            lambda: a.lambda.unwrap_or(lambda),
            mark: a.mark.as_deref().map(parse_mark).transpose()?.unwrap_or(mark),
        },
        Preset::BootstrapCount { lambda, weights } => Preset::BootstrapCount {
            lambda: a.lambda.unwrap_or(lambda),
            weights: if a.weights.is_empty() { weights } else { a.weights.clone() },
        },
    };
    Ok(preset.expand(a.p, a.q)?)
}

fn parse_mark(s: &str) -> CliResult<Mark> {
    MarkSpec::parse(s).map(|m| m.to_mark()).or_else(|e| usage(format!("--mark: {e}")))
}

fn parse_grid(g: &GridArg) -> CliResult<Option<Vec<f64>>> {
    let Some(text) = &g.grid else { return Ok(None) };
    let bad = || Failure::Usage(format!("--grid: expected start:stop:count or a comma list, got '{text}'"));
    if let [a, b, n] = text.split(':').collect::<Vec<_>>()[..] {
        let (a, b, n): (f64, f64, usize) =
            (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
        if n == 0 {
            return Err(bad());
        }
        return Ok(Some(linspace(a, b, n)));
    }
    text.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect::<CliResult<Vec<_>>>().map(Some)
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(p) => Ok(write_atomic(p, text.as_bytes())?),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure::Numeric(e.into())),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize") + "\n"
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> CliResult<i32> {
    match &cli.command {
        Command::Rate { law, ratio, grid, out } => {
            let (joint, spec) = resolve_law(law)?;
            let grid = parse_grid(grid)?;
            let curve = ldp_rate(&joint, ratio.unwrap_or(spec.ratio()), grid.as_deref())?;
            emit(&out.out, &curve.to_csv(), stdout)?;
        }
        Command::Mdp { law, ratio, ns, gamma, z, out } => {
            let (joint, spec) = resolve_law(law)?;
            let ratio = ratio.unwrap_or(spec.ratio());
            let params = mdp_params(&joint, ratio)?;
            let consistency = mdp_consistency_check(&joint, ratio)?;
            let empirical = if ns.is_empty() {
                None
            } else {
                let speed = SpeedSequence::power(*gamma).or_else(|e| usage(format!("--gamma: {e}")))?;
                Some(mdp_empirical(&joint, &spec, ns, &speed, *z)?)
            };
            #[derive(Serialize)]
            struct MdpReport<'a> {
                params: &'a crate::rates::MdpResult,
                consistency: &'a crate::rates::ConsistencyReport,
                empirical: Option<&'a crate::oracle::RateSequence>,
            }
            let report = MdpReport { params: &params, consistency: &consistency, empirical: empirical.as_ref() };
            emit(&out.out, &to_json(&report), stdout)?;
        }
        Command::Laplace { law, n, u, method, out } => {
            let (joint, spec) = resolve_law(law)?;
            let spec = spec.at(*n)?;
            let res = match method {
                LaplaceEngine::Fourier => bartlett_laplace(&joint, &spec, u)?,
                LaplaceEngine::Dp => crate::oracle::dp_conditional_laplace(&joint, &spec, u)?,
            };
            emit(&out.out, &csv_string(&["u", "f"], res.u.iter().zip(&res.f).map(|(&u, &f)| vec![u, f])), stdout)?;
        }
        Command::Locallimit { law, n, k, out } => {
            let (joint, _) = resolve_law(law)?;
            let x = joint.x_marginal()?;
            let exact = exact_point_prob(&x, *n, *k)?;
            let mean = crate::cgf::CgfEvaluator::new(&x).mean();
            let at_mean = (*k as f64 - *n as f64 * mean).abs() <= 1e-9 * (*k as f64).max(1.0);
            let (approx, method) = if at_mean {
                (central_local_limit(&x, *n, *k)?, "central")
            } else {
                (tilted_local_limit(&x, *n, *k)?, "saddle-point")
            };
            let text = format!(
                "n,k,exact,approx,approx_method,ratio\n{n},{k},{},{},{method},{}\n",
                fmt_sig17(exact),
                fmt_sig17(approx),
                fmt_sig17(exact / approx)
            );
            emit(&out.out, &text, stdout)?;
        }
        Command::Simulate {
            law,
            n,
            replicates,
            seed,
            workers,
            max_rejections,
            proposal,
            rate_y,
            ns,
            side,
            method,
            out,
        } => {
            let (joint, spec) = resolve_law(law)?;
            let workers = workers.or(cli.threads).unwrap_or(1);
            if workers == 0 {
                return usage("--workers must be at least 1");
            }
            let cfg = SimConfig {
                seed: *seed,
                replicates: *replicates,
                max_rejections: *max_rejections,
                workers,
                proposal: match proposal {
                    ProposalArg::Auto => Proposal::Auto,
                    ProposalArg::Plain => Proposal::Plain,
                    ProposalArg::Tilted => Proposal::Tilted,
                },
            };
            if let Some(y) = rate_y {
                let side = match side {
                    SideArg::Ge => Side::AtLeast,
                    SideArg::Le => Side::AtMost,
                };
                let m = match method {
                    RateEngine::Dp => EmpiricalMethod::Dp,
                    RateEngine::Mc => EmpiricalMethod::Mc(cfg),
                };
                let seq = empirical_rate(&joint, &spec, ns, *y, side, &m)?;
                write_run(out, &seq.to_csv(), None, &seq.metadata, stdout)?;
            } else {
                let spec = spec.at(*n)?;
                let samples = sample_conditioned(&joint, &spec, &cfg)?;
                let chi = gibbs_point(&joint, spec.ratio())?;
                let est = samples.mean_ratio();
                let summary = format!(
                    "n,nq,estimate,theory,error\n{},{},{},{},{}\n",
                    spec.n,
                    spec.n_terms(),
                    fmt_sig17(est),
                    fmt_sig17(chi),
                    fmt_sig17((est - chi).abs())
                );
                #[derive(Serialize)]
                struct SimMetadata {
                    #[serde(flatten)]
                    base: OracleMetadata,
                    spec: ConditioningSpec,
                    replicates: usize,
                    proposal: Proposal,
                    tau: f64,
                    attempts: u64,
                    acceptance_rate: f64,
                }
                let meta = SimMetadata {
                    base: OracleMetadata::for_method(&EmpiricalMethod::Mc(cfg)),
                    spec,
                    replicates: cfg.replicates,
                    proposal: samples.proposal,
                    tau: samples.tau,
                    attempts: samples.attempts,
                    acceptance_rate: samples.acceptance_rate,
                };
                write_run(out, &summary, Some(&samples.to_csv()), &meta, stdout)?;
            }
        }
        Command::Oracle { law, n, out } => {
            let (joint, spec) = resolve_law(law)?;
            let exact = exact_conditional_law(&joint, &spec.at(*n)?)?;
            let text = csv_string(
                &["t", "probability"],
                exact.values.iter().zip(&exact.probs).map(|(&t, &p)| vec![t, p]),
            );
            emit(&out.out, &text, stdout)?;
        }
        Command::Figure { preset, lambda, ratios, grid, out } => {
            if preset != "occupancy" {
                return usage(format!("--preset: figures are defined for the occupancy preset, not '{preset}'"));
            }
            let job = FigureJob {
                lambda: *lambda,
                ratios: if ratios.is_empty() { DEFAULT_RATIOS.to_vec() } else { ratios.clone() },
                grid: parse_grid(grid)?,
                out_dir: out.clone(),
            };
            for o in figure_emit(&job)? {
                writeln!(stdout, "{}", o.csv.display()).map_err(|e| Failure::Numeric(e.into()))?;
            }
        }
        Command::Check { law, ratios } => {
            let (joint, spec) = resolve_law(law)?;
            let ratios = if ratios.is_empty() { vec![spec.ratio()] } else { ratios.clone() };
            let report = run_checks(&joint, &ratios)?;
            stdout.write_all(report.render().as_bytes()).map_err(|e| Failure::Numeric(e.into()))?;
            if !report.passed() {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

/// `summary.csv`, optional `samples.csv` and `metadata.json` in `out`, or the
/// summary alone on standard output.
fn write_run<M: Serialize>(
    out: &Option<PathBuf>,
    summary: &str,
    samples: Option<&str>,
    meta: &M,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let Some(dir) = out else {
        return emit(&None, summary, stdout);
    };
    std::fs::create_dir_all(dir).map_err(|e| Failure::Numeric(e.into()))?;
    write_atomic(&dir.join("summary.csv"), summary.as_bytes())?;
    if let Some(s) = samples {
        write_atomic(&dir.join("samples.csv"), s.as_bytes())?;
    }
    write_atomic(&dir.join("metadata.json"), to_json(meta).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(std::iter::once("conddev").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn local_limit_table() {
        let (code, out, _) = run_capture(&["locallimit", "--preset", "occupancy", "--lambda", "1", "--n", "100", "--k", "100"]);
        assert_eq!(code, 0);
        let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        let (exact, approx): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
        assert!((exact - 0.0398610).abs() < 5e-8);
        assert!((approx - 0.0398942).abs() < 5e-8);
        assert_eq!(row[4], "central");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_capture(&["rate"]).0, 2);
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        let (code, _, err) = run_capture(&["rate", "--preset", "hashing"]);
        assert_eq!(code, 2);
        assert!(err.contains("--preset"));
        let (code, _, err) = run_capture(&["rate", "--preset", "occupancy", "--grid", "0:1"]);
        assert_eq!(code, 2);
        assert!(err.contains("--grid"));
    }

    #[test]
    fn help_mentions_the_thread_variable() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains(THREADS_ENV));
    }

    #[test]
    fn numeric_failures_exit_three() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("span2.json");
        std::fs::write(&path, r#"{"kind": "finite-table", "rows": [[0, 0.5], [2, 0.5]]}"#).unwrap();
        let (code, _, err) = run_capture(&["rate", "--law", path.to_str().unwrap()]);
        assert_eq!(code, 3);
        assert!(err.contains("span"), "{err}");
        let (code, _, err) =
            run_capture(&["rate", "--preset", "bose-einstein", "--mark", "identity"]);
        assert_eq!(code, 3);
        assert!(err.contains("one-sided"), "{err}");
    }

    #[test]
    fn rate_csv() {
        let (code, out, _) = run_capture(&["rate", "--preset", "occupancy", "--grid", "0.2,0.5"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("y,rate\n0.2"));
        assert_eq!(out.lines().count(), 3);
    }

    #[test]
    fn law_flag_accepts_preset_names() {
        let (code, out, _) = run_capture(&["mdp", "--law", "occupancy"]);
        assert_eq!(code, 0, "{out}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["consistency"]["passed"].as_bool().unwrap());
    }
}
