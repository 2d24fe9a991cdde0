mod args;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use depmeasures::constructions::{
    clt_limit_corr, embellish, lemma7_grid, lemma7_profile, make_scored_base, orthant_prob, theorem6_corr,
    theorem6_witness_search, yy_pair, CltMethod, McSettings, ScoredBase,
};
use depmeasures::joint_pmf::JointPmfFile;
use depmeasures::sharpness_search::{search_max_rho, search_tensor_gap, SearchConfig};
use depmeasures::theorem_suite::{
    check_chain, check_cousin, check_cousin_multi, check_csaki_fischer, check_peyre_bound, check_two_atom_bound,
    fuzz, CheckResult, FuzzConfig,
};
use depmeasures::{full_report, JointPmf, MeasureOptions, RandomStyle};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use args::{CheckKind, Cli, Command, Format, MethodArg, ScoreArgs, SearchTarget};
use output::{Outcome, RunManifest};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] depmeasures::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(depmeasures::Error::ConvergenceFailure { .. }) => 4,
            CliError::Core(depmeasures::Error::Invariant(_)) => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("DEPMEASURES_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("DEPMEASURES_THREADS={raw:?} is not a thread count")))?;
    // 0 leaves the pool at its automatic size.
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<u8> {
    configure_threads()?;
    let g = &cli.global;
    if g.format == Format::Csv && !supports_csv(&cli.command) {
        return Err(CliError::Usage(format!(
            "--format csv is only available for `search` and `lemma7`, not `{}`",
            cli.command.name()
        )));
    }
    let mut manifest = RunManifest::start(cli.command.name(), parameters(&cli), seed_of(&cli.command), g.no_timestamps);
    let outcome = execute(&cli.command, g.normalize)?;
    manifest.finish(g.no_timestamps);
    let text = match g.format {
        Format::Json => output::render_json(&manifest, &outcome.result),
        Format::Csv => output::render_csv(&manifest, outcome.csv.as_ref().expect("csv support checked")),
    };
    match &g.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                // A closed pipe (e.g. `| head`) is not an error worth reporting.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(CliError::Io { path: "<stdout>".into(), source: e })
                }
                _ => {}
            }
        }
    }
    Ok(if outcome.failed { 3 } else { 0 })
}

fn supports_csv(c: &Command) -> bool {
    matches!(c, Command::Search(_) | Command::Lemma7(_))
}

fn seed_of(c: &Command) -> Option<u64> {
    match c {
        Command::Fuzz(a) => a.seed,
        Command::Theorem6(a) => a.seed,
        Command::WitnessSearch(a) => a.seed,
        Command::Search(a) => a.seed,
        _ => None,
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn parameters(cli: &Cli) -> Value {
    let mut p = match &cli.command {
        Command::Measures(a) => to_value(a),
        Command::Yy(a) => to_value(a),
        Command::Kron(a) => to_value(a),
        Command::Check(a) => to_value(a),
        Command::Fuzz(a) => to_value(a),
        Command::Embellish(a) => to_value(a),
        Command::Orthant(a) => to_value(a),
        Command::Theorem6(a) => to_value(a),
        Command::WitnessSearch(a) => to_value(a),
        Command::Lemma7(a) => to_value(a),
        Command::Search(a) => to_value(a),
    };
    if let Value::Object(map) = &mut p {
        map.insert("normalize".into(), Value::Bool(cli.global.normalize));
    }
    p
}

fn require_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    seed.ok_or_else(|| CliError::Usage(format!("--seed is required for `{what}`")))
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn input_error(path: &Path, message: impl ToString) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Parses a matrix file, or the `result` of an earlier run's output.
fn load_json(path: &Path) -> CliResult<Value> {
    let mut v: Value = serde_json::from_str(&read(path)?).map_err(|e| input_error(path, e))?;
    if v.get("matrix").is_none() {
        if let Some(inner) = v.get_mut("result").filter(|r| r.get("matrix").is_some()) {
            v = inner.take();
        }
    }
    Ok(v)
}

fn load_matrix(path: &Path, normalize: bool) -> CliResult<JointPmf> {
    let file: JointPmfFile = serde_json::from_value(load_json(path)?).map_err(|e| input_error(path, e))?;
    JointPmf::from_file(file, normalize).map_err(|e| input_error(path, e))
}

/// Base matrix plus scores, taking `g`/`h` from flags first and the file second.
fn load_scored(a: &ScoreArgs, normalize: bool) -> CliResult<ScoredBase> {
    let path = &a.base;
    let v = load_json(path)?;
    let file: JointPmfFile = serde_json::from_value(v.clone()).map_err(|e| input_error(path, e))?;
    let base = JointPmf::from_file(file, normalize).map_err(|e| input_error(path, e))?;
    let scores = |flag: &Option<Vec<f64>>, key: &str| -> CliResult<Vec<f64>> {
        if let Some(s) = flag {
            return Ok(s.clone());
        }
        v.get(key)
            .and_then(|x| serde_json::from_value(x.clone()).ok())
            .ok_or_else(|| CliError::Usage(format!("--{key} is required when {} has no \"{key}\" array", path.display())))
    };
    Ok(make_scored_base(&base, &scores(&a.g, "g")?, &scores(&a.h, "h")?)?)
}

fn parse_shape(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("--shape {s:?} is not of the form IxJ"));
    let (i, j) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((i.trim().parse().map_err(|_| bad())?, j.trim().parse().map_err(|_| bad())?))
}

fn checks_outcome(results: Vec<CheckResult>) -> Outcome {
    let failed = results.iter().any(|r| !r.pass);
    Outcome {
        result: to_value(&results),
        csv: None,
        failed,
    }
}

fn execute(cmd: &Command, normalize: bool) -> CliResult<Outcome> {
    Ok(match cmd {
        Command::Measures(a) => {
            let m = load_matrix(&a.input, normalize)?;
            Outcome::json(to_value(&full_report(&m, &MeasureOptions::new(a.mode.into()))?))
        }
        Command::Yy(a) => {
            let m = yy_pair(a.t)?;
            Outcome::json(to_value(&m))
        }
        Command::Kron(a) => {
            let m1 = load_matrix(&a.in1, normalize)?;
            let m2 = load_matrix(&a.in2, normalize)?;
            Outcome::json(to_value(&m1.kron(&m2)?))
        }
        Command::Check(a) => {
            let paths = a.inputs();
            match a.kind.arity() {
                Some(k) if paths.len() != k => {
                    return Err(CliError::Usage(format!(
                        "`check {}` takes {k} matrix input(s), got {}",
                        a.kind.name(),
                        paths.len()
                    )))
                }
                None if paths.len() < 2 => {
                    return Err(CliError::Usage(format!(
                        "`check {}` takes at least 2 matrix inputs, got {}",
                        a.kind.name(),
                        paths.len()
                    )))
                }
                _ => {}
            }
            let ms = paths
                .iter()
                .map(|p| load_matrix(p, normalize))
                .collect::<CliResult<Vec<_>>>()?;
            match a.kind {
                CheckKind::Chain => checks_outcome(check_chain(&ms[0])?),
                CheckKind::TwoAtom => checks_outcome(vec![check_two_atom_bound(&ms[0])?]),
                CheckKind::Peyre => checks_outcome(vec![check_peyre_bound(&ms[0])?]),
                CheckKind::CsakiFischer => checks_outcome(check_csaki_fischer(&ms[0], &ms[1])?.to_vec()),
                CheckKind::Cousin => {
                    let c = check_cousin(&ms[0], &ms[1])?;
                    Outcome {
                        failed: c.results().iter().any(|r| !r.pass),
                        result: to_value(&c),
                        csv: None,
                    }
                }
                CheckKind::CousinMulti => checks_outcome(vec![check_cousin_multi(&ms)?]),
            }
        }
        Command::Fuzz(a) => {
            let seed = require_seed(a.seed, "fuzz")?;
            let shapes = if a.shape.is_empty() {
                (2..=5).map(|k| (k, k)).collect()
            } else {
                a.shape.iter().map(|s| parse_shape(s)).collect::<CliResult<_>>()?
            };
            let styles = if a.style.is_empty() {
                vec![RandomStyle::Dense, RandomStyle::Sparse]
            } else {
                a.style
                    .iter()
                    .map(|s| s.parse::<RandomStyle>().map_err(|e| CliError::Usage(format!("--style: {e}"))))
                    .collect::<CliResult<_>>()?
            };
            let report = fuzz(&FuzzConfig {
                shapes,
                styles,
                count: a.count,
                seed,
            })?;
            Outcome {
                failed: !report.failures.is_empty(),
                result: to_value(&report),
                csv: None,
            }
        }
        Command::Embellish(a) => {
            let base = load_matrix(&a.base, normalize)?;
            let e = embellish(&base, a.t)?;
            Outcome {
                failed: !e.passed(),
                result: to_value(&e),
                csv: None,
            }
        }
        Command::Orthant(a) => Outcome::json(json!({
            "r": a.r,
            "orthant_prob": orthant_prob(a.r)?,
            "clt_limit_corr": clt_limit_corr(a.r)?,
        })),
        Command::Theorem6(a) => {
            let sb = load_scored(&a.scores, normalize)?;
            let (method, seed) = match a.method {
                MethodArg::Exact => (CltMethod::Exact, 0),
                MethodArg::Mc => (CltMethod::MonteCarlo, require_seed(a.seed, "theorem6 --method mc")?),
            };
            let est = theorem6_corr(&sb, a.n, method, a.samples, seed)?;
            Outcome::json(json!({
                "r": sb.r,
                "limit": clt_limit_corr(sb.r)?,
                "estimate": est,
            }))
        }
        Command::WitnessSearch(a) => {
            let seed = require_seed(a.seed, "witness-search")?;
            let sb = load_scored(&a.scores, normalize)?;
            let w = theorem6_witness_search(
                a.t,
                &sb,
                a.nmax,
                McSettings {
                    samples: a.samples,
                    seed,
                },
            )?;
            Outcome::json(json!({
                "t": a.t,
                "r": sb.r,
                "threshold": (std::f64::consts::FRAC_PI_2 * a.t).sin(),
                "witness": w,
            }))
        }
        Command::Lemma7(a) => {
            let profile = lemma7_profile(a.grid)?;
            let rows = lemma7_grid(a.grid)
                .into_iter()
                .map(|(t, f, f2)| vec![t.to_string(), f.to_string(), f2.to_string()])
                .collect();
            Outcome {
                result: to_value(&profile),
                csv: Some(output::Table {
                    header: vec!["t".into(), "f".into(), "f_second".into()],
                    rows,
                }),
                failed: false,
            }
        }
        Command::Search(a) => {
            let seed = require_seed(a.seed, "search")?;
            let shape = match &a.shape {
                Some(s) => parse_shape(s)?,
                None => SearchConfig::for_regime(a.two_atom).shape,
            };
            let cfg = SearchConfig {
                shape,
                tau_cap: a.tau_cap,
                two_atom: a.two_atom,
                budget: a.budget,
                restarts: a.restarts,
                seed,
                step_scale: a.step_scale,
            };
            let r = match a.target {
                SearchTarget::Rho => search_max_rho(&cfg)?,
                SearchTarget::TensorGap => search_tensor_gap(&cfg, a.nmax)?,
            };
            let rows = r
                .trace
                .iter()
                .map(|(it, v)| vec![it.to_string(), v.to_string()])
                .collect();
            Outcome {
                result: to_value(&r),
                csv: Some(output::Table {
                    header: vec!["iteration".into(), "objective".into()],
                    rows,
                }),
                failed: false,
            }
        }
    })
}
