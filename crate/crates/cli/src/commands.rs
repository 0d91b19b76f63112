//! Subcommand implementations. Each one resolves its configuration, runs on
//! a pool of the requested size, and writes a JSON report that embeds the
//! resolved configuration.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use cocycle_lab::barycentric::{run_barycentric, write_trace_csv, Triangle};
use cocycle_lab::butterfly::{encode_pgm, measure_slice, scan_butterfly, ButterflyConfig, RowMode};
use cocycle_lab::cocycle::{barycentric_generators, CocycleSpec, CRITICAL_COUPLING};
use cocycle_lab::exponents::{
    builtin_sl2_specs, furstenberg_check, spectrum_qr, top_exponent, FurstenbergOptions, FurstenbergVerdict,
};
use cocycle_lab::hyperbolicity::{
    cone_certify, energy_grid, energy_stability_radius, slice_verdicts, uniform_growth_test, PixelVerdict, SliceMethod,
    SliceOptions, DEFAULT_N_MAX, DEFAULT_PHASES, DEFAULT_THETA,
};
use cocycle_lab::matrix::{Mat2, MatD};
use cocycle_lab::parallel::with_threads;

use crate::args::{Alpha, Matrices, Reals, Resolutions};
use crate::config::{read_config, ConfigError, FileValues, Resolver, RunConfig};
use crate::{
    BarycentricArgs, ButterflyArgs, CertifyArgs, Command, Common, FurstenbergArgs, MeasureArgs, SliceArgs, SliceParams,
    SpecArgs, SpecCommand,
};

pub const THREADS_ENV: &str = "COCYCLE_LAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Lib(#[from] cocycle_lab::Error),

    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use cocycle_lab::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Lib(E::InvalidParameter(_) | E::UnsupportedBase(_) | E::DimensionMismatch { .. }) => 1,
            CliError::Lib(_) | CliError::Write { .. } => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

struct Setup {
    r: Resolver,
    threads: usize,
    out: Option<PathBuf>,
}

fn setup(common: &Common) -> Result<Setup> {
    let file = match &common.config {
        Some(p) => read_config(p)?,
        None => FileValues::new(),
    };
    let mut r = Resolver::new(file);
    let env = match std::env::var(THREADS_ENV) {
        Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| usage(format!("{THREADS_ENV}={s:?} is not a count")))?),
        Err(_) => None,
    };
    let threads = r.get_quiet("threads", common.threads)?.or(env).unwrap_or(0);
    let out = r.get_quiet("out", common.out.clone())?;
    Ok(Setup { r, threads, out })
}

fn reject_seed_steps(common: &Common) -> Result<()> {
    if common.seed.is_some() {
        return Err(ConfigError::UnusedFlag("seed").into());
    }
    if common.steps.is_some() {
        return Err(ConfigError::UnusedFlag("steps").into());
    }
    Ok(())
}

fn envelope(command: &str, cfg: &RunConfig, result: Value) -> String {
    let v = json!({ "command": command, "config": cfg.to_json(), "result": result });
    let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|source| CliError::Write { path: "stdout".into(), source })
        }
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Barycentric(a) => barycentric(a),
        Command::Exponent(a) => exponent(a, false),
        Command::Spectrum(a) => exponent(a, true),
        Command::Certify(a) => certify(a),
        Command::Slice(a) => slice(a),
        Command::Butterfly(a) => butterfly(a),
        Command::Furstenberg(a) => furstenberg(a),
        Command::Measure(a) => measure(a),
    }
}

fn barycentric(a: BarycentricArgs) -> Result<()> {
    let Setup { mut r, threads, out } = setup(&a.common)?;
    let steps = r.get("steps", a.common.steps, 10_000_000u64)?;
    let seed = r.get("seed", a.common.seed, 1u64)?;
    let shape = r.get("shape", a.shape, "equilateral".to_string())?;
    let tri = match shape.as_str() {
        "equilateral" => Triangle::equilateral(),
        "right-isosceles" => Triangle::right_isosceles(),
        other => return Err(usage(format!("unknown shape {other:?} (equilateral, right-isosceles)"))),
    };
    let trace: Option<PathBuf> = r.get_quiet("trace", a.trace)?;
    let every = match trace {
        Some(_) => Some(r.get("trace_every", a.trace_every, 1000u64)?),
        None if a.trace_every.is_some() => return Err(usage("--trace-every needs --trace")),
        None => None,
    };
    let cfg = r.finish()?;
    let run = with_threads(threads, || run_barycentric(&tri, steps, seed))??;
    if let (Some(path), Some(every)) = (&trace, every) {
        let mut buf: Vec<u8> = cfg.to_text().lines().map(|l| format!("# {l}\n")).collect::<String>().into_bytes();
        write_trace_csv(&mut buf, &tri, steps, seed, every)?;
        write_file(path, &buf)?;
    }
    emit(out.as_deref(), &envelope("barycentric", &cfg, to_value(&run)))
}

fn matrix_of(entries: &Reals) -> Result<MatD> {
    let d = (entries.0.len() as f64).sqrt().round() as usize;
    if d == 0 || d * d != entries.0.len() {
        return Err(usage(format!("a matrix needs d² entries, got {}", entries.0.len())));
    }
    let rows: Vec<Vec<f64>> = entries.0.chunks(d).map(<[f64]>::to_vec).collect();
    Ok(MatD::from_rows(&rows)?)
}

fn mat2_of(entries: &Reals) -> Result<Mat2> {
    match entries.0[..] {
        [a, b, c, d] => Ok(Mat2::new(a, b, c, d)),
        _ => Err(usage("expected 2×2 matrices")),
    }
}

fn uniform(k: usize) -> Reals {
    Reals(vec![1.0 / k as f64; k])
}

/// Resolve `--spec` and only the keys that family reads.
fn resolve_spec(r: &mut Resolver, a: &SpecArgs, default: &str) -> Result<CocycleSpec> {
    let name = r.get("spec", a.spec.clone(), default.to_string())?;
    let mut used: Vec<&str> = Vec::new();
    let spec = match name.as_str() {
        "toral" => {
            used.push("epsilon");
            CocycleSpec::ToralDerivative { epsilon: r.get("epsilon", a.epsilon, 0.0)? }
        }
        "schrodinger" => {
            used.extend(["energy", "coupling", "alpha"]);
            let energy = r.get("energy", a.energy, 0.0)?;
            let coupling = r.get("coupling", a.coupling, CRITICAL_COUPLING)?;
            let alpha = r.get("alpha", a.alpha, Alpha::Golden)?;
            CocycleSpec::Schrodinger { energy, coupling, alpha: alpha.value() }
        }
        "barycentric" => CocycleSpec::Barycentric,
        "constant" => {
            used.push("matrix");
            let m = r.get_opt("matrix", a.matrix.clone())?.ok_or_else(|| usage("`constant` needs --matrix"))?;
            CocycleSpec::constant(matrix_of(&m)?)?
        }
        "random" => {
            used.extend(["matrices", "probs"]);
            let ms: Matrices =
                r.get_opt("matrices", a.matrices.clone())?.ok_or_else(|| usage("`random` needs --matrices"))?;
            let probs = r.get("probs", a.probs.clone(), uniform(ms.0.len()))?;
            let mats = ms.0.iter().map(matrix_of).collect::<Result<Vec<_>>>()?;
            CocycleSpec::random_product(mats, probs.0)?
        }
        other => match builtin_sl2_specs().into_iter().find(|b| b.name == other) {
            Some(b) => b.spec,
            None => {
                let names: Vec<&str> = builtin_sl2_specs().iter().map(|b| b.name).collect();
                return Err(usage(format!(
                    "unknown spec {other:?}; expected toral, schrodinger, barycentric, constant, random or one of {}",
                    names.join(", ")
                )));
            }
        },
    };
    let given = [
        ("epsilon", a.epsilon.is_some()),
        ("energy", a.energy.is_some()),
        ("coupling", a.coupling.is_some()),
        ("alpha", a.alpha.is_some()),
        ("matrix", a.matrix.is_some()),
        ("matrices", a.matrices.is_some()),
        ("probs", a.probs.is_some()),
    ];
    if let Some((flag, _)) = given.iter().find(|(k, set)| *set && !used.contains(k)) {
        return Err(usage(format!("--{flag} does not apply to spec {name:?}")));
    }
    Ok(spec)
}

fn exponent(a: SpecCommand, qr: bool) -> Result<()> {
    let Setup { mut r, threads, out } = setup(&a.common)?;
    let spec = resolve_spec(&mut r, &a.spec, "toral")?;
    let steps = r.get("steps", a.common.steps, 1_000_000u64)?;
    let seed = r.get("seed", a.common.seed, 1u64)?;
    let cfg = r.finish()?;
    let report = with_threads(threads, || {
        let mut driver = spec.default_driver(seed)?;
        if qr {
            spectrum_qr(&spec, &mut driver, steps)
        } else {
            top_exponent(&spec, &mut driver, steps)
        }
    })??;
    let mut v = to_value(&report);
    v["family"] = spec.name().into();
    if qr {
        v["sum"] = report.weighted_sum().into();
    }
    emit(out.as_deref(), &envelope(if qr { "spectrum" } else { "exponent" }, &cfg, v))
}

fn certify(a: CertifyArgs) -> Result<()> {
    reject_seed_steps(&a.common)?;
    let Setup { mut r, threads, out } = setup(&a.common)?;
    let spec = resolve_spec(&mut r, &a.spec, "schrodinger")?;
    let method = r.get("method", a.method, "cone".to_string())?;
    let grid = r.get("grid", a.grid, 64usize)?;
    let n_max = r.get("n_max", a.n_max, 256usize)?;
    let theta = match method.as_str() {
        "cone" if a.theta.is_some() => return Err(usage("--theta applies to --method growth only")),
        "cone" => None,
        "growth" => Some(r.get("theta", a.theta, DEFAULT_THETA)?),
        other => return Err(usage(format!("unknown method {other:?} (cone, growth)"))),
    };
    let cfg = r.finish()?;
    let cert = with_threads(threads, || match theta {
        None => cone_certify(&spec, grid, n_max),
        Some(t) => uniform_growth_test(&spec, grid, n_max, t),
    })??;
    let mut v = to_value(&cert);
    if let CocycleSpec::Schrodinger { energy, coupling, .. } = spec {
        v["energy_stability_radius"] = to_value(&energy_stability_radius(&cert, energy, coupling));
    }
    emit(out.as_deref(), &envelope("certify", &cfg, v))
}

fn slice_options(r: &mut Resolver, p: &SliceParams) -> Result<SliceOptions> {
    Ok(SliceOptions {
        coupling: r.get("coupling", p.coupling, CRITICAL_COUPLING)?,
        n_max: r.get("n_max", p.n_max, DEFAULT_N_MAX)?,
        theta: r.get("theta", p.theta, DEFAULT_THETA)?,
        phases: r.get("phases", p.phases, DEFAULT_PHASES)?,
    })
}

fn verdict_char(v: PixelVerdict) -> char {
    match v {
        PixelVerdict::In => '#',
        PixelVerdict::Out => '.',
        PixelVerdict::Inconclusive => '?',
    }
}

fn slice(a: SliceArgs) -> Result<()> {
    reject_seed_steps(&a.common)?;
    let Setup { mut r, threads, out } = setup(&a.common)?;
    let alpha = r.get("alpha", a.alpha, Alpha::Golden)?;
    let default_method = if matches!(alpha, Alpha::Ratio(..)) { "oracle" } else { "growth" };
    let method = match r.get("method", a.method, default_method.to_string())?.as_str() {
        "oracle" => SliceMethod::Oracle,
        "growth" => SliceMethod::Growth,
        other => return Err(usage(format!("unknown method {other:?} (oracle, growth)"))),
    };
    let e_min = r.get("e_min", a.params.e_min, -4.0)?;
    let e_max = r.get("e_max", a.params.e_max, 4.0)?;
    let width = r.get("width", a.width, 512usize)?;
    let opts = slice_options(&mut r, &a.params)?;
    let cfg = r.finish()?;
    let freq = alpha.frequency()?;
    let energies = energy_grid(e_min, e_max, width);
    let verdicts = with_threads(threads, || slice_verdicts(freq, &energies, method, &opts))??;
    let row: String = verdicts.iter().map(|&v| verdict_char(v)).collect();
    let v = json!({
        "frequency": to_value(&freq),
        "method": to_value(&method),
        "in": verdicts.iter().filter(|v| v.in_spectrum()).count(),
        "row": row,
    });
    emit(out.as_deref(), &envelope("slice", &cfg, v))
}

fn butterfly(a: ButterflyArgs) -> Result<()> {
    reject_seed_steps(&a.common)?;
    let Setup { mut r, threads, out } = setup(&a.common)?;
    let out = out.ok_or_else(|| usage("butterfly needs --out FILE.pgm"))?;
    let d = ButterflyConfig::default();
    let width = r.get("width", a.width, d.width)?;
    let height = r.get("height", a.height, d.height)?;
    let e_min = r.get("e_min", a.params.e_min, d.e_min)?;
    let e_max = r.get("e_max", a.params.e_max, d.e_max)?;
    let q_max = r.get("q_max", a.q_max, d.q_max)?;
    let mode = match r.get("mode", a.mode, "farey".to_string())?.as_str() {
        "farey" => RowMode::Farey,
        "irrational" => RowMode::Irrational,
        other => return Err(usage(format!("unknown mode {other:?} (farey, irrational)"))),
    };
    let slice = slice_options(&mut r, &a.params)?;
    let cfg = r.finish()?;
    let bf = ButterflyConfig { width, height, e_min, e_max, q_max, mode, slice };
    let raster = with_threads(threads, || scan_butterfly(&bf))??;
    let comments = vec!["cocycle-lab butterfly".to_string(), cfg.to_text()];
    write_file(&out, &encode_pgm(&raster, &comments))?;
    let v = json!({
        "width": raster.width,
        "height": raster.height,
        "in": raster.count(PixelVerdict::In),
        "out": raster.count(PixelVerdict::Out),
        "inconclusive": raster.count(PixelVerdict::Inconclusive),
        "energy_symmetry": raster.energy_symmetry(),
        "frequency_symmetry": raster.frequency_symmetry(),
    });
    emit(None, &envelope("butterfly", &cfg, v))
}

fn conclusion(v: &FurstenbergVerdict) -> &'static str {
    if !v.noncompact {
        "compact"
    } else if !v.no_invariant_lines {
        "invariant-lines"
    } else {
        "hypotheses-hold"
    }
}

fn furstenberg(a: FurstenbergArgs) -> Result<()> {
    let Setup { mut r, threads, out } = setup(&a.common)?;
    let set = r.get("set", a.set, "barycentric".to_string())?;
    let matrices: Vec<Mat2> = match set.as_str() {
        "barycentric" => barycentric_generators().to_vec(),
        "so2" => vec![Mat2::rotation(1.0), Mat2::rotation(2f64.sqrt())],
        "positive" => vec![Mat2::new(2.0, 1.0, 1.0, 1.0), Mat2::new(1.0, 1.0, 1.0, 2.0)],
        "matrices" => {
            let ms: Matrices =
                r.get_opt("matrices", a.matrices.clone())?.ok_or_else(|| usage("set `matrices` needs --matrices"))?;
            ms.0.iter().map(mat2_of).collect::<Result<_>>()?
        }
        other => return Err(usage(format!("unknown set {other:?} (barycentric, so2, positive, matrices)"))),
    };
    if set != "matrices" && a.matrices.is_some() {
        return Err(usage("--matrices needs --set matrices"));
    }
    let probs = r.get("probs", a.probs, uniform(matrices.len()))?;
    let d = FurstenbergOptions::default();
    let opts = FurstenbergOptions {
        steps: r.get("steps", a.common.steps, d.steps)?,
        depth: r.get("depth", a.depth, d.depth)?,
        seed: r.get("seed", a.common.seed, d.seed)?,
        tolerance: r.get("tolerance", a.tolerance, d.tolerance)?,
    };
    let cfg = r.finish()?;
    let verdict = with_threads(threads, || furstenberg_check(&matrices, &probs.0, opts))??;
    let mut v = to_value(&verdict);
    v["conclusion"] = conclusion(&verdict).into();
    emit(out.as_deref(), &envelope("furstenberg", &cfg, v))
}

fn measure(a: MeasureArgs) -> Result<()> {
    reject_seed_steps(&a.common)?;
    if a.params.n_max.is_some() {
        return Err(usage("measure takes n_max values from --resolutions"));
    }
    let Setup { mut r, threads, out } = setup(&a.common)?;
    let alpha = r.get("alpha", a.alpha, Alpha::Golden)?;
    let e_min = r.get("e_min", a.params.e_min, -4.0)?;
    let e_max = r.get("e_max", a.params.e_max, 4.0)?;
    let res = r.get("resolutions", a.resolutions, Resolutions(vec![(2048, 64), (2048, 256), (2048, 1024)]))?;
    let opts = SliceOptions {
        coupling: r.get("coupling", a.params.coupling, CRITICAL_COUPLING)?,
        theta: r.get("theta", a.params.theta, DEFAULT_THETA)?,
        phases: r.get("phases", a.params.phases, DEFAULT_PHASES)?,
        ..SliceOptions::default()
    };
    let cfg = r.finish()?;
    let freq = alpha.frequency()?;
    let report = with_threads(threads, || measure_slice(freq, e_min, e_max, &res.0, &opts))??;
    emit(out.as_deref(), &envelope("measure", &cfg, to_value(&report)))
}
