mod config;
mod manifest;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use expforge_core::combine::{
    amalgam_search, blend_search, ce_search, composition_search, realize, Context, SearchOutcome,
};
use expforge_core::error::Error;
use expforge_core::game::learn_game;
use expforge_core::graph::{deserialize, serialize, Button, GameGraph, Provenance};
use expforge_core::heuristic::{build_references, Evaluator, KnowledgeBase};
use expforge_core::ingest::{load_spritesheet, load_trace};
use expforge_core::proto::{build_mapping, build_proto_graph};
use expforge_core::rng::substream;
use expforge_core::sim::{export_game, generate_level, replay_hashes, GameDefinition, GameSim};

use config::{FileConfig, Method, PipelineConfig, Tuning};
use manifest::{sha256_hex, Manifest, ManifestEntry};

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "expforge", version, about = "Learn game graphs from traces and recombine them into new games")]
struct Cli {
    /// Seed for every random choice. Falls back to the config file, then EXPFORGE_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Learn a game graph from a gameplay trace and its spritesheet
    Learn {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        sheet: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a proto graph from a spritesheet
    Proto {
        #[arg(long)]
        sheet: PathBuf,
        #[arg(long)]
        player: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map knowledge-base graphs onto a proto graph; writes proto.graph.json and mapping.json
    Map {
        #[arg(long)]
        sheet: PathBuf,
        #[arg(long)]
        player: String,
        #[arg(long = "kb", required = true, num_args = 1..)]
        kb: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine knowledge-base graphs into a new game and export it
    Generate {
        #[arg(long = "kb", num_args = 1..)]
        kb: Vec<PathBuf>,
        #[arg(long)]
        sheet: Option<PathBuf>,
        #[arg(long)]
        player: Option<String>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Knowledge-base manifest; defaults to OUT/kb-manifest.jsonl
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Score a graph against a knowledge base
    Evaluate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long = "kb", required = true, num_args = 1..)]
        kb: Vec<PathBuf>,
        /// Include the generated graphs recorded in this manifest
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay an input script against a game definition and print per-tick hashes
    Simulate {
        #[arg(long)]
        definition: PathBuf,
        /// JSON array of ticks, each an array of buttons
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a completable level for a graph and write its game definition
    Export {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Export the best attempt even if the agent cannot complete it
        #[arg(long)]
        allow_incomplete: bool,
    },
}

#[derive(Debug)]
struct Failure {
    stage: &'static str,
    message: String,
    code: u8,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure {
            stage: "config",
            message: message.into(),
            code: EXIT_CONFIG,
        }
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T, E: std::fmt::Display> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            stage,
            message: e.to_string(),
            code: EXIT_STAGE,
        })
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(false)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error [{}]: {}", f.stage, f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(Failure::config)?,
        None => FileConfig::default(),
    };
    // replaying a definition involves no randomness, so no seed is needed
    if let Cmd::Simulate { definition, inputs, out } = &cli.cmd {
        return cmd_simulate(definition, inputs, out.as_deref());
    }
    let cfg = PipelineConfig::resolve(&file, cli.seed, &cli.tuning).map_err(Failure::config)?;
    match cli.cmd {
        Cmd::Learn { trace, sheet, out } => cmd_learn(&cfg, &trace, &sheet, &out),
        Cmd::Proto { sheet, player, out } => cmd_proto(&cfg, &sheet, &player, &out),
        Cmd::Map { sheet, player, kb, out } => cmd_map(&cfg, &sheet, &player, &kb, &out),
        Cmd::Generate {
            kb,
            sheet,
            player,
            method,
            out,
            manifest,
        } => {
            let kb = if kb.is_empty() { file.kb.clone().unwrap_or_default() } else { kb };
            let sheet = sheet.or(file.sheet.clone()).ok_or_else(|| Failure::config("--sheet is required"))?;
            let player = player.or(file.player.clone()).ok_or_else(|| Failure::config("--player is required"))?;
            let method = method.or(file.method).unwrap_or(Method::Expand);
            let out = out.or(file.out.clone()).ok_or_else(|| Failure::config("--out is required"))?;
            let manifest = manifest
                .or(file.manifest.clone())
                .unwrap_or_else(|| out.join("kb-manifest.jsonl"));
            cmd_generate(&cfg, &kb, &sheet, &player, method, &out, &manifest)
        }
        Cmd::Evaluate {
            graph,
            kb,
            manifest,
            out,
        } => cmd_evaluate(&cfg, &graph, &kb, manifest.as_deref(), out.as_deref()),
        Cmd::Simulate { .. } => unreachable!("handled above"),
        Cmd::Export {
            graph,
            out,
            allow_incomplete,
        } => cmd_export(&cfg, &graph, &out, allow_incomplete),
    }
}

/// Stage name for a core error that escaped a multi-stage call.
fn stage_of(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } | Error::Parse { .. } | Error::Trace { .. } | Error::UnknownSprite(_) => "ingest",
        Error::DanglingSprite(_) | Error::InvalidGraph(_) => "graph",
        Error::LevelModel(_) => "level-model",
        Error::Realize(_) => "combine",
        Error::LevelGeneration { .. } => "generate",
        Error::Export(_) => "export",
        Error::KnowledgeBase(_) => "kb",
    }
}

fn core(e: Error) -> Failure {
    Failure {
        stage: stage_of(&e),
        message: e.to_string(),
        code: EXIT_STAGE,
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display())).stage("output")?;
    }
    std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display())).stage("output")
}

fn pretty(v: &impl serde::Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s.into_bytes()
}

fn load_graph(path: &Path) -> Result<GameGraph, Failure> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display())).stage("ingest")?;
    deserialize(&bytes).map_err(|e| format!("{}: {e}", path.display())).stage("ingest")
}

fn load_originals(paths: &[PathBuf]) -> Result<Vec<GameGraph>, Failure> {
    if paths.len() < 2 {
        return Err(Failure::config(format!(
            "at least two --kb graphs are needed, got {}",
            paths.len()
        )));
    }
    paths.iter().map(|p| load_graph(p)).collect()
}

fn cmd_learn(cfg: &PipelineConfig, trace: &Path, sheet: &Path, out: &Path) -> Result<(), Failure> {
    let trace = load_trace(trace).stage("ingest")?;
    let sheet = load_spritesheet(sheet).stage("ingest")?;
    let learned = learn_game(&trace, &sheet, &cfg.learn, &mut substream(cfg.seed, "learn")).map_err(core)?;
    write(out, &serialize(&learned.graph))
}

fn cmd_proto(cfg: &PipelineConfig, sheet: &Path, player: &str, out: &Path) -> Result<(), Failure> {
    let sheet = load_spritesheet(sheet).stage("ingest")?;
    let proto = build_proto_graph(&sheet, player, cfg.learn.cluster_threshold).stage("proto")?;
    write(out, &serialize(&proto))
}

fn cmd_map(cfg: &PipelineConfig, sheet: &Path, player: &str, kb: &[PathBuf], out: &Path) -> Result<(), Failure> {
    let kb: Vec<GameGraph> = kb.iter().map(|p| load_graph(p)).collect::<Result<_, _>>()?;
    let sheet = load_spritesheet(sheet).stage("ingest")?;
    let proto = build_proto_graph(&sheet, player, cfg.learn.cluster_threshold).stage("proto")?;
    let pm = build_mapping(&kb, &proto, &mut substream(cfg.seed, "map")).stage("map")?;
    write(&out.join("proto.graph.json"), &serialize(&pm.proto))?;
    write(&out.join("mapping.json"), &pretty(&pm.mapping))
}

fn run_method(
    cfg: &PipelineConfig,
    method: Method,
    ctx: &Context,
    id: &str,
    h: &(dyn Fn(&GameGraph) -> f64 + Sync),
) -> Result<SearchOutcome, Failure> {
    let mut rng = substream(cfg.seed, "search");
    match method {
        Method::Expand => ce_search(ctx, id, h, &cfg.search, &mut rng),
        Method::Amalgam => amalgam_search(ctx, id, h, cfg.caps, &mut rng),
        Method::Blend => blend_search(ctx, id, h, cfg.caps),
        Method::Composition => composition_search(ctx, id, h, cfg.caps, &mut rng),
    }
    .stage("combine")
}

fn provenance(method: Method) -> Provenance {
    match method {
        Method::Expand => Provenance::Expanded,
        Method::Amalgam => Provenance::Amalgam,
        Method::Blend => Provenance::Blend,
        Method::Composition => Provenance::Composition,
    }
}

fn cmd_generate(
    cfg: &PipelineConfig,
    kb: &[PathBuf],
    sheet: &Path,
    player: &str,
    method: Method,
    out: &Path,
    manifest_path: &Path,
) -> Result<(), Failure> {
    let originals = load_originals(kb)?;
    let mut manifest = Manifest::load(manifest_path).stage("manifest")?;
    let generated = manifest.graphs().stage("manifest")?;
    let sheet = load_spritesheet(sheet).stage("ingest")?;

    let proto = build_proto_graph(&sheet, player, cfg.learn.cluster_threshold).stage("proto")?;
    let pm = build_mapping(&originals, &proto, &mut substream(cfg.seed, "map")).stage("map")?;
    let ctx = Context::new(pm, &originals);

    let refs = build_references(&originals, cfg.seed).stage("heuristic")?;
    let kb = KnowledgeBase {
        originals,
        generated,
    };
    let evaluator = Evaluator::new(kb, refs).stage("heuristic")?;
    let id = format!("gen-{:03}", manifest.entries.len() + 1);
    let seed = cfg.seed;
    let h = |g: &GameGraph| evaluator.evaluate(g, seed).total;
    let outcome = run_method(cfg, method, &ctx, &id, &h)?;
    tracing::info!(
        method = method.name(),
        score = outcome.score,
        initial = outcome.initial_score,
        steps = outcome.steps,
        evaluations = outcome.evaluations,
        "search finished"
    );

    // Best candidate whose level the agent can complete.
    let mut chosen = None;
    for (rank, (_, ce)) in outcome.ranked.iter().enumerate() {
        let g = realize(&ctx, ce, &id, provenance(method)).stage("combine")?;
        let sim = match GameSim::from_graph(&g) {
            Ok(s) => s,
            Err(e) => {
                tracing::debug!(rank, error = %e, "candidate not simulable");
                continue;
            }
        };
        match generate_level(&sim, cfg.attempt_cap, &mut substream(seed, "generate")) {
            Ok(level) => {
                chosen = Some((rank, g, level));
                break;
            }
            Err(e) => tracing::info!(rank, error = %e, "candidate not completable"),
        }
    }
    let Some((rank, graph, level)) = chosen else {
        return Err(Failure {
            stage: "generate",
            message: format!("none of {} candidates yielded a completable level", outcome.ranked.len()),
            code: EXIT_STAGE,
        });
    };
    let definition = export_game(&graph, &level, seed).stage("export")?;
    let report = evaluator.evaluate(&graph, seed);

    let graph_bytes = serialize(&graph);
    let graph_file = format!("{id}.graph.json");
    write(&out.join(&graph_file), &graph_bytes)?;
    write(&out.join(format!("{id}.definition.json")), definition.to_json().as_bytes())?;
    let report_json = json!({
        "novelty": report.novelty,
        "surprise": report.surprise,
        "value": report.value,
        "total": report.total,
        "seed": report.seed,
        "id": id,
        "method": method.name(),
        "rank": rank,
        "steps": outcome.steps,
        "evaluations": outcome.evaluations,
        "initialScore": outcome.initial_score,
        "levelAttempts": level.attempts,
        "kb": {
            "originals": evaluator.kb.originals.iter().map(|g| &g.id).collect::<Vec<_>>(),
            "generated": evaluator.kb.generated.iter().map(|g| &g.id).collect::<Vec<_>>(),
        },
    });
    write(&out.join(format!("{id}.report.json")), &pretty(&report_json))?;

    let rel = relative_to(&out.join(&graph_file), manifest_path);
    manifest
        .append(ManifestEntry {
            id: id.clone(),
            path: rel,
            sha256: sha256_hex(&graph_bytes),
            method: method.name().into(),
            seed,
        })
        .stage("manifest")?;
    println!("{}", serde_json::to_string(&report_json).expect("report serializes"));
    Ok(())
}

/// `target` as a path relative to the manifest's directory when possible.
fn relative_to(target: &Path, manifest: &Path) -> String {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let t = abs(target);
    let dir = abs(manifest).parent().map(Path::to_path_buf).unwrap_or_default();
    t.strip_prefix(&dir).unwrap_or(&t).to_string_lossy().into_owned()
}

fn cmd_evaluate(
    cfg: &PipelineConfig,
    graph: &Path,
    kb: &[PathBuf],
    manifest: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let g = load_graph(graph)?;
    let originals = load_originals(kb)?;
    let generated = match manifest {
        Some(p) => Manifest::load(p).and_then(|m| m.graphs()).stage("manifest")?,
        None => Vec::new(),
    };
    let refs = build_references(&originals, cfg.seed).stage("heuristic")?;
    let ev = Evaluator::new(
        KnowledgeBase {
            originals,
            generated,
        },
        refs,
    )
    .stage("heuristic")?;
    let report = ev.evaluate(&g, cfg.seed);
    emit(out, &pretty(&report))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => write(p, bytes),
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn cmd_simulate(definition: &Path, inputs: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(definition)
        .map_err(|e| format!("{}: {e}", definition.display()))
        .stage("ingest")?;
    let def = GameDefinition::parse(&text).stage("ingest")?;
    let script = std::fs::read_to_string(inputs)
        .map_err(|e| format!("{}: {e}", inputs.display()))
        .stage("ingest")?;
    let ticks: Vec<BTreeSet<Button>> = serde_json::from_str(&script)
        .map_err(|e| format!("{}: {e}", inputs.display()))
        .stage("ingest")?;
    let hashes = replay_hashes(&def, &ticks);
    emit(out, &pretty(&hashes))
}

fn cmd_export(cfg: &PipelineConfig, graph: &Path, out: &Path, allow_incomplete: bool) -> Result<(), Failure> {
    let g = load_graph(graph)?;
    let sim = GameSim::from_graph(&g).stage("simulate")?;
    let level = match generate_level(&sim, cfg.attempt_cap, &mut substream(cfg.seed, "generate")) {
        Ok(l) => l,
        Err(Error::LevelGeneration { attempts, best }) if allow_incomplete => {
            tracing::warn!(attempts, "no completable level; exporting the best attempt");
            *best
        }
        Err(e) => return Err(core(e)),
    };
    let def = export_game(&g, &level, cfg.seed).map_err(core)?;
    write(out, def.to_json().as_bytes())
}
