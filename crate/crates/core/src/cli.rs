//! `vlx` command line.
//!
//! Every command prints exactly one JSON document on stdout. Exit codes: 0 on
//! success, 1 when extraction fails, 2 on usage or configuration errors.
//! Diagnostics go to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::backend::Gateway;
use crate::config::{BackendConfig, TaskDefinition, ToolkitConfig, ENDPOINT_ENV};
use crate::error::Error;
use crate::extract::{ChoiceSet, Trial};
use crate::image::ImageBuffer;
use crate::patrol::{Clock, Patrol, Store};
use crate::recognition::{viewpoint_stats, Outcome};
use crate::record::{digest_parts, ResultRecord};
use crate::variation::QuestionTemplate;

#[derive(Debug, Parser)]
#[command(name = "vlx", version, about = "Robot-usable values from vision-language models")]
pub struct Cli {
    /// Toolkit config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Noise seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Append a result record to this JSONL file.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    /// Include raw per-trial answers in logged records.
    #[arg(long, global = true)]
    audit: bool,
    /// Pin the clock (RFC 3339), for reproducible output.
    #[arg(long, global = true)]
    now: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one extraction method.
    #[command(subcommand)]
    Extract(ExtractCmd),
    /// Run tasks declared in the config.
    #[command(subcommand)]
    Task(TaskCmd),
    /// Record and check waypoint baselines.
    #[command(subcommand)]
    Patrol(PatrolCmd),
    /// Inspect the configured backend.
    #[command(subcommand)]
    Backend(BackendCmd),
}

#[derive(Debug, Subcommand)]
enum ExtractCmd {
    /// Yes/no question over the query grid.
    Bvqa {
        #[arg(long)]
        image: PathBuf,
        /// Question with one `{art}` slot, e.g. "is {art} door open?".
        #[arg(long)]
        template: String,
    },
    /// Multiple-choice question; without --choice, returns the modal free-form answer.
    Mvqa {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        template: String,
        #[arg(long = "choice")]
        choices: Vec<String>,
    },
    /// Image-text retrieval over the choices.
    Itr {
        #[arg(long)]
        image: PathBuf,
        #[arg(long = "choice", required = true)]
        choices: Vec<String>,
        #[arg(long)]
        temperature: Option<f64>,
        /// Average over the configured noise variants.
        #[arg(long)]
        ensemble: bool,
    },
    /// Bounding box for a phrase.
    Vg {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        phrase: String,
    },
    /// Caption difference between two images.
    Dic {
        #[arg(long)]
        image_a: PathBuf,
        #[arg(long)]
        image_b: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum TaskCmd {
    /// Run a named task on one image or on several views.
    Run {
        name: String,
        #[arg(long, conflicts_with = "views", required_unless_present = "views")]
        image: Option<PathBuf>,
        /// One image per viewpoint; requires --expected.
        #[arg(long, num_args = 1.., requires = "expected")]
        views: Vec<PathBuf>,
        /// Correct label used to score each view.
        #[arg(long)]
        expected: Option<String>,
    },
    /// List task names.
    List,
}

#[derive(Debug, Args)]
struct StoreArgs {
    #[arg(long)]
    store: PathBuf,
}

#[derive(Debug, Subcommand)]
enum PatrolCmd {
    Record {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        waypoint: String,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value = "")]
        label: String,
    },
    Check {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        waypoint: String,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Compare this many noise variants of the image.
        #[arg(long)]
        ensemble: Option<usize>,
    },
    /// Check every stop of a route file: `[{"waypoint_id": ..., "image": ...}]`.
    Run {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        route: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        ensemble: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum BackendCmd {
    Ping,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Image(_) | Error::MalformedTemplate { .. } | Error::InvalidArgument(_) => {
                Failure::Usage(e.to_string())
            }
            e => Failure::Run(e),
        }
    }
}

type CmdResult = std::result::Result<Value, Failure>;

/// Ambient process state, injectable for tests.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub backend_endpoint: Option<String>,
}

impl Env {
    pub fn from_process() -> Self {
        Self {
            backend_endpoint: std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()),
        }
    }
}

struct Ctx {
    config: ToolkitConfig,
    clock: Clock,
    log: Option<PathBuf>,
    audit: bool,
}

impl Ctx {
    fn gateway(&self) -> Result<Gateway, Failure> {
        self.config.gateway().map_err(Failure::from)
    }

    fn log(&self, task: &str, inputs: &[&[u8]], result: &Value, trials: Vec<Trial>) -> Result<(), Failure> {
        let Some(path) = &self.log else { return Ok(()) };
        let mut parts: Vec<&[u8]> = inputs.to_vec();
        let seed = self.config.noise.seed.to_le_bytes();
        parts.push(&seed);
        let mut rec = ResultRecord::new(task, self.clock.now(), digest_parts(&parts), result.clone());
        if self.audit {
            rec = rec.with_raw_answers(trials);
        }
        rec.append_to(path).map_err(Failure::Run)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize to JSON")
}

fn load_image(path: &Path) -> Result<ImageBuffer, Failure> {
    ImageBuffer::open(path).map_err(Failure::from)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, env: &Env, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let (code, doc) = match execute(cli, env) {
        Ok(v) => (0, v),
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "vlx: {m}");
            (2, json!({"error": "usage", "message": m}))
        }
        Err(Failure::Run(e)) => {
            let _ = writeln!(err, "vlx: {e}");
            (1, json!({"error": e.code(), "message": e.to_string()}))
        }
    };
    let text = serde_json::to_string_pretty(&doc).expect("JSON value serializes");
    let _ = writeln!(out, "{text}");
    code
}

fn execute(cli: Cli, env: &Env) -> CmdResult {
    let clock = match &cli.now {
        Some(s) => Clock::Fixed(
            DateTime::parse_from_rfc3339(s)
                .map_err(|e| Failure::Usage(format!("--now: {e}")))?
                .with_timezone(&Utc),
        ),
        None => Clock::System,
    };
    let config = match &cli.config {
        Some(p) => ToolkitConfig::load(p)?,
        None => match &env.backend_endpoint {
            Some(e) => ToolkitConfig::with_backend(BackendConfig::http(e)),
            None => {
                return Err(Failure::Usage(format!(
                    "no --config given and {ENDPOINT_ENV} is not set"
                )))
            }
        },
    };
    let config = config
        .with_seed_override(cli.seed)
        .with_endpoint_override(env.backend_endpoint.as_deref())?;
    let ctx = Ctx {
        config,
        clock,
        log: cli.log,
        audit: cli.audit,
    };
    match cli.command {
        Command::Extract(c) => extract(&ctx, c),
        Command::Task(c) => task(&ctx, c),
        Command::Patrol(c) => patrol(&ctx, c),
        Command::Backend(BackendCmd::Ping) => {
            let gw = ctx.gateway()?;
            gw.ping()?;
            Ok(json!({
                "backend": gw.fingerprint(),
                "reachable": true,
                "capabilities": gw.capabilities(),
            }))
        }
    }
}

fn extract(ctx: &Ctx, cmd: ExtractCmd) -> CmdResult {
    let ex = ctx.config.extractor(ctx.gateway()?);
    let articles = ctx.config.articles.clone();
    let template = |t: &str| QuestionTemplate::with_articles(t, articles.clone());
    match cmd {
        ExtractCmd::Bvqa { image, template: t } => {
            let img = load_image(&image)?;
            let r = ex.run_bvqa(&img, &template(&t)?)?;
            let v = to_value(&r);
            ctx.log("extract.bvqa", &[img.content_hash().as_bytes(), t.as_bytes()], &v, r.trials)?;
            Ok(v)
        }
        ExtractCmd::Mvqa {
            image,
            template: t,
            choices,
        } => {
            let img = load_image(&image)?;
            let q = template(&t)?;
            let joined = choices.join("\n");
            let hash = img.content_hash();
            let refs: [&[u8]; 3] = [hash.as_bytes(), t.as_bytes(), joined.as_bytes()];
            if choices.is_empty() {
                let r = ex.run_mvqa_freeform(&img, &q)?;
                let v = to_value(&r);
                ctx.log("extract.mvqa", &refs, &v, r.trials)?;
                Ok(v)
            } else {
                let r = ex.run_mvqa(&img, &q, &ChoiceSet::new(&choices)?)?;
                let v = to_value(&r);
                ctx.log("extract.mvqa", &refs, &v, r.trials)?;
                Ok(v)
            }
        }
        ExtractCmd::Itr {
            image,
            choices,
            temperature,
            ensemble,
        } => {
            let img = load_image(&image)?;
            let ex = match temperature {
                Some(t) => ex.with_temperature(t),
                None => ex,
            };
            let set = ChoiceSet::new(&choices)?;
            let r = if ensemble {
                ex.run_itr_ensemble(&img, &set)?
            } else {
                ex.run_itr(&img, &set)?
            };
            let v = to_value(&r);
            let joined = choices.join("\n");
            ctx.log(
                "extract.itr",
                &[img.content_hash().as_bytes(), joined.as_bytes()],
                &v,
                Vec::new(),
            )?;
            Ok(v)
        }
        ExtractCmd::Vg { image, phrase } => {
            let img = load_image(&image)?;
            let b = ex.run_vg(&img, &phrase)?;
            let v = to_value(&b);
            ctx.log("extract.vg", &[img.content_hash().as_bytes(), phrase.as_bytes()], &v, Vec::new())?;
            Ok(v)
        }
        ExtractCmd::Dic {
            image_a,
            image_b,
            threshold,
        } => {
            let a = load_image(&image_a)?;
            let b = load_image(&image_b)?;
            let r = ex.run_dic(&a, &b, threshold.unwrap_or(ctx.config.dic_threshold))?;
            let v = to_value(&r);
            ctx.log(
                "extract.dic",
                &[a.content_hash().as_bytes(), b.content_hash().as_bytes()],
                &v,
                Vec::new(),
            )?;
            Ok(v)
        }
    }
}

fn trials_of(outcome: &Outcome) -> Vec<Trial> {
    match outcome {
        Outcome::Choice(c) => c.trials.clone(),
        Outcome::Binary(b) => b.trials.clone(),
        Outcome::Text(t) => t.trials.clone(),
        Outcome::Relation(r) => r.trials.clone(),
        Outcome::Distribution(_) | Outcome::Region(_) => Vec::new(),
    }
}

fn task(ctx: &Ctx, cmd: TaskCmd) -> CmdResult {
    let (name, image, views, expected) = match cmd {
        TaskCmd::List => {
            let tasks: serde_json::Map<String, Value> = ctx
                .config
                .tasks
                .iter()
                .map(|(k, v)| (k.clone(), to_value(v)))
                .collect();
            return Ok(Value::Object(tasks));
        }
        TaskCmd::Run {
            name,
            image,
            views,
            expected,
        } => (name, image, views, expected),
    };
    let def = ctx
        .config
        .tasks
        .get(&name)
        .ok_or_else(|| Failure::Usage(format!("unknown task `{name}`")))?;
    let rec = ctx.config.recognizer(ctx.gateway()?);
    let log_name = format!("task.{name}");

    if let Some(path) = image {
        let img = load_image(&path)?;
        let (v, trials) = match def {
            TaskDefinition::Single(t) => {
                let o = rec.run_task(&img, t)?;
                (json!({"task": name, "outcome": to_value(&o)}), trials_of(&o))
            }
            TaskDefinition::Chain(c) => {
                let r = rec.stepwise_refine(&img, c)?;
                let trials = r.steps.iter().flat_map(|s| trials_of(&s.outcome)).collect();
                (json!({"task": name, "refinement": to_value(&r)}), trials)
            }
        };
        ctx.log(&log_name, &[img.content_hash().as_bytes()], &v, trials)?;
        return Ok(v);
    }

    let TaskDefinition::Single(t) = def else {
        return Err(Failure::Usage("--views is only supported for single-step tasks".into()));
    };
    let expected = expected.expect("clap enforces --expected with --views");
    let mut per_view = Vec::new();
    let mut rates = Vec::new();
    let mut hashes = Vec::new();
    let mut trials = Vec::new();
    for path in &views {
        let img = load_image(path)?;
        let o = rec.run_task(&img, t)?;
        let rate = o.correct_rate(&expected).ok_or_else(|| {
            Failure::Usage(format!("`{expected}` cannot be scored against this task's outcome"))
        })?;
        rates.push(rate);
        hashes.push(img.content_hash());
        trials.extend(trials_of(&o));
        per_view.push(json!({
            "image": path.display().to_string(),
            "outcome": to_value(&o),
            "correct": o.label().map(|l| crate::text::normalized_string(&l))
                == Some(crate::text::normalized_string(&expected)),
            "correct_rate": rate,
        }));
    }
    let stats = viewpoint_stats(&rates)?;
    let v = json!({"task": name, "expected": expected, "views": per_view, "stats": to_value(&stats)});
    let mut inputs: Vec<&[u8]> = hashes.iter().map(|h| h.as_bytes()).collect();
    inputs.push(expected.as_bytes());
    ctx.log(&log_name, &inputs, &v, trials)?;
    Ok(v)
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteStop {
    waypoint_id: String,
    image: PathBuf,
}

fn patrol(ctx: &Ctx, cmd: PatrolCmd) -> CmdResult {
    let threshold_or = |t: Option<f64>| t.unwrap_or(ctx.config.dic_threshold);
    let make = |store: &Path, ensemble: Option<usize>| -> Result<Patrol, Failure> {
        let p = Patrol::new(ctx.gateway()?, Store::open(store)?).with_clock(ctx.clock);
        Ok(match ensemble {
            Some(0) => return Err(Failure::Usage("--ensemble must be at least 1".into())),
            Some(n) => p.with_ensemble(ctx.config.noise.clone().with_variants(n)),
            None => p,
        })
    };
    match cmd {
        PatrolCmd::Record {
            store,
            waypoint,
            image,
            label,
        } => {
            let img = load_image(&image)?;
            let wp = make(&store.store, None)?.record_baseline(&waypoint, &label, &img)?;
            let v = to_value(&wp);
            ctx.log("patrol.record", &[waypoint.as_bytes(), img.content_hash().as_bytes()], &v, Vec::new())?;
            Ok(v)
        }
        PatrolCmd::Check {
            store,
            waypoint,
            image,
            threshold,
            ensemble,
        } => {
            let img = load_image(&image)?;
            let r = make(&store.store, ensemble)?.check_waypoint(&waypoint, &img, threshold_or(threshold))?;
            let v = to_value(&r);
            ctx.log("patrol.check", &[waypoint.as_bytes(), img.content_hash().as_bytes()], &v, Vec::new())?;
            Ok(v)
        }
        PatrolCmd::Run {
            store,
            route,
            threshold,
            ensemble,
        } => {
            let text = std::fs::read_to_string(&route)
                .map_err(|e| Failure::Usage(format!("{}: {e}", route.display())))?;
            let stops: Vec<RouteStop> = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", route.display())))?;
            let base = route.parent().unwrap_or_else(|| Path::new("."));
            let mut legs = Vec::with_capacity(stops.len());
            for s in stops {
                legs.push((s.waypoint_id, load_image(&base.join(&s.image))?));
            }
            let entries = make(&store.store, ensemble)?.patrol(&legs, threshold_or(threshold))?;
            let v = to_value(&entries);
            let hashes: Vec<String> = legs.iter().map(|(id, i)| format!("{id}:{}", i.content_hash())).collect();
            let inputs: Vec<&[u8]> = hashes.iter().map(|h| h.as_bytes()).collect();
            ctx.log("patrol.run", &inputs, &v, Vec::new())?;
            Ok(v)
        }
    }
}
