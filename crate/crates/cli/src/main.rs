use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand};
use hatch_core::action::CompileTolerances;
use hatch_core::annotations::serialize_annotations;
use hatch_core::correspondence::CorrespondenceConfig;
use hatch_core::dataset::{
    build_supervision, load_manifest, synth_scene, teacher_annotations, write_bundle, write_scene,
    GenerationConfig, SynthSpec,
};
use hatch_core::rewards::batch::{score_lines, GroundTruthIndex, SummaryAccumulator};
use hatch_core::rewards::{PairAggregation, RewardConfig};
use hatch_core::selfcheck::{self, SelfCheckOptions};
use serde::{Deserialize, Serialize};

/// Supervision generation and reward scoring for multi-view spatial reasoning.
///
/// Settings come from, in increasing precedence: built-in defaults, the
/// `--config` file, command-line flags.
#[derive(Parser, Debug)]
#[command(name = "hatch", version)]
struct Cli {
    /// JSON file with optional `correspondence`, `compile`, `reward` and
    /// `stride` sections.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (0 = one per core). Never changes outputs.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// More diagnostics on standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a supervision bundle (correspondence matrices and teacher plans).
    Supervise {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Patches per image side.
        #[arg(long)]
        n: Option<usize>,
        /// Pixel stride for overlap estimation.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Print canonical teacher action annotations for a scene.
    TeacherActions {
        manifest: PathBuf,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score newline-delimited model outputs.
    Reward {
        /// Batch file; `-` or absent reads standard input.
        batch: Option<PathBuf>,
        /// Ground truths by id, for records without an inline one.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, value_parser = parse_aggregation)]
        aggregation: Option<PairAggregation>,
    },
    /// Run the seeded round-trip and bound properties.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Render a synthetic scene (manifest plus depth rasters).
    Synth {
        /// JSON scene spec; defaults apply to omitted fields.
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        views: Option<usize>,
    },
}

fn parse_aggregation(s: &str) -> std::result::Result<PairAggregation, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown aggregation {s:?} (mean, min, product)"))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    correspondence: Option<CorrespondenceConfig>,
    compile: Option<CompileTolerances>,
    reward: Option<RewardConfig>,
    stride: Option<usize>,
}

/// Marks failures that should exit with the validation code even when an I/O
/// error sits further down the chain.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Invalid(format!("config {}: {e}", path.display())).into())
}

fn emit<T: Serialize>(out: &mut impl Write, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct PairSummary {
    from: usize,
    to: usize,
    mean_s: f64,
    plan_len: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    degenerate: Vec<String>,
}

fn supervise(cfg: &FileConfig, manifest: &Path, out: &Path, n: Option<usize>, stride: Option<usize>) -> Result<()> {
    let mut gen = GenerationConfig::default();
    if let Some(c) = cfg.correspondence {
        gen.correspondence = c;
    }
    if let Some(c) = cfg.compile {
        gen.compile = c;
    }
    if let Some(s) = cfg.stride {
        gen.stride = s;
    }
    if let Some(n) = n {
        gen.correspondence.n = n;
    }
    if let Some(s) = stride {
        gen.stride = s;
    }
    gen.validate()?;
    if out.is_file() {
        bail!(Invalid(format!("output {} is an existing file", out.display())));
    }

    let scene = load_manifest(manifest)?;
    if scene.len() == 1 {
        log::warn!("{}: single-view scene has no pairs; bundle will be empty", manifest.display());
    }
    let bundle = build_supervision(&scene, &gen)?;
    write_bundle(&bundle, out)?;

    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    for (&(i, j), s) in &bundle.matrices {
        let degenerate = bundle
            .degenerate
            .iter()
            .filter(|d| (d.from, d.to) == (i, j))
            .map(|d| d.reason.clone())
            .collect::<Vec<_>>();
        for reason in &degenerate {
            log::warn!("pair {i}->{j}: {reason}");
        }
        emit(
            &mut w,
            &PairSummary {
                from: i,
                to: j,
                mean_s: s.mean_mass(),
                plan_len: bundle.teacher.get(i, j).map(|p| p.len()),
                degenerate,
            },
        )?;
    }
    w.flush()?;
    log::info!("wrote {} pairs to {}", bundle.matrices.len(), out.display());
    Ok(())
}

fn teacher(cfg: &FileConfig, manifest: &Path, out: Option<&Path>) -> Result<()> {
    let tol = cfg.compile.unwrap_or_default();
    let scene = load_manifest(manifest)?;
    let (plans, degenerate) = teacher_annotations(&scene, &tol)?;
    for d in &degenerate {
        log::warn!("pair {}->{} skipped: {}", d.from, d.to, d.reason);
    }
    let text = serialize_annotations(&plans);
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

const CHUNK_LINES: usize = 2048;

fn reward(cfg: &FileConfig, batch: Option<&Path>, gt: Option<&Path>, aggregation: Option<PairAggregation>) -> Result<()> {
    let mut rc = cfg.reward.clone().unwrap_or_default();
    if let Some(a) = aggregation {
        rc.aggregation = a;
    }
    rc.validate()?;
    let index = match gt {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(GroundTruthIndex::from_jsonl(&text)?)
        }
        None => None,
    };
    let mut input: Box<dyn BufRead> = match batch {
        Some(p) if p.as_os_str() != "-" => Box::new(io::BufReader::new(
            fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        _ => Box::new(io::stdin().lock()),
    };

    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let mut summary = SummaryAccumulator::default();
    let mut chunk: Vec<String> = Vec::with_capacity(CHUNK_LINES);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let read = input.read_until(b'\n', &mut buf).context("reading batch")?;
        if read > 0 {
            // undecodable bytes surface as a malformed record, not an abort
            chunk.push(String::from_utf8_lossy(&buf).into_owned());
        }
        if chunk.len() == CHUNK_LINES || (read == 0 && !chunk.is_empty()) {
            for rec in score_lines(&chunk, &rc, index.as_ref()) {
                if let Some(e) = &rec.error {
                    log::warn!("record {}: {e}", rec.id);
                }
                summary.add(&rec);
                emit(&mut w, &rec)?;
            }
            w.flush()?;
            chunk.clear();
        }
        if read == 0 {
            break;
        }
    }
    emit(&mut w, &serde_json::json!({ "summary": summary.finish() }))?;
    w.flush()?;
    Ok(())
}

fn run_selfcheck(seed: u64, trials: usize, inject_fault: bool) -> Result<bool> {
    if trials == 0 {
        log::warn!("0 trials requested; every property holds vacuously");
    }
    let results = selfcheck::run(&SelfCheckOptions {
        seed,
        trials,
        inject_fault,
    });
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    for r in &results {
        emit(&mut w, r)?;
        if !r.pass {
            log::error!("{} failed: max error {} > {}", r.property, r.max_error, r.tolerance);
        }
    }
    w.flush()?;
    Ok(results.iter().all(|r| r.pass))
}

fn synth(spec: Option<&Path>, seed: u64, out: &Path, views: Option<usize>) -> Result<()> {
    let mut s: SynthSpec = match spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| Invalid(format!("spec {}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(v) = views {
        s.views = v;
    }
    let scene = synth_scene(&s, seed)?;
    let manifest = write_scene(&scene.manifest, out)?;
    emit(
        &mut io::stdout().lock(),
        &serde_json::json!({ "manifest": manifest, "views": scene.manifest.len(), "seed": seed }),
    )
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<hatch_core::Error>() {
            return if e.is_io() { 2 } else { 1 };
        }
        if cause.is::<io::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .format_timestamp(None)
        .format_target(false)
        .init();

    let result = (|| -> Result<bool> {
        if cli.jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs)
                .build_global()
                .context("starting worker pool")?;
        }
        let cfg = load_config(cli.config.as_deref())?;
        match &cli.command {
            Command::Supervise { manifest, out, n, stride } => supervise(&cfg, manifest, out, *n, *stride)?,
            Command::TeacherActions { manifest, out } => teacher(&cfg, manifest, out.as_deref())?,
            Command::Reward { batch, gt, aggregation } => reward(&cfg, batch.as_deref(), gt.as_deref(), *aggregation)?,
            Command::Selfcheck { seed, trials, inject_fault } => return run_selfcheck(*seed, *trials, *inject_fault),
            Command::Synth { spec, seed, out, views } => synth(spec.as_deref(), *seed, out, *views)?,
        }
        Ok(true)
    })();

    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            // broken pipes are normal when a consumer stops reading early
            if e.chain().any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)) {
                return ExitCode::SUCCESS;
            }
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
