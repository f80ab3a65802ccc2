use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use axum::http::StatusCode;
use clap::{Args, Parser, Subcommand};
use impact_core::analysis::{render_text, AnalysisConfig, SensitivityStrategy};
use impact_core::anecdote::{
    export_csv, export_jsonl, ingest, quality_report, quality_report_for_text, select_for_analysis,
    Lexicon, RecordFormat, SelectionPolicy, StudyProtocol,
};
use impact_core::session::{parse_rank_csv, tiers_to_rank_csv, ArmMap, SessionKind, SessionOptions};
use impact_core::sim::{load_grid, operating_characteristics, write_results_csv};
use impact_core::stats::{Alternative, MethodChoice};
use serde::Serialize;
use serde_json::json;

use crate::config::FileConfig;
use crate::error::ApiError;
use crate::ops;
use crate::server::{self, AppState, ArmSource};
use crate::store::Store;

const DEFAULT_STORE: &str = "impact-store";
const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Parser)]
#[command(name = "impact", version, about = "Blinded anecdote ranking studies: ingest, rank, analyze, simulate")]
pub struct Cli {
    /// Document store directory [default: ./impact-store]
    #[arg(long, global = true, env = "IMPACT_STORE")]
    store: Option<PathBuf>,
    /// Seed for card shuffles, sensitivity perturbations and simulations
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML configuration file
    #[arg(long, global = true, env = "IMPACT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an anecdote file (JSONL or CSV) and report visit findings
    Ingest {
        file: PathBuf,
        #[command(flatten)]
        selection: SelectionArgs,
        /// Write the canonical form (format from extension)
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Run the anecdote checklist. Takes a JSONL/CSV anecdote file, or any
    /// other file with one anecdote text per nonblank line
    Quality {
        file: PathBuf,
        #[arg(long)]
        lexicon_dir: Option<PathBuf>,
    },
    /// Ranking sessions
    #[command(subcommand)]
    Session(SessionCommand),
    /// Unblind a finalized session and run the rank-sum test
    Analyze {
        session_id: String,
        /// Arm assignments (JSON object or participant_id,group CSV)
        #[arg(long)]
        arm_map: PathBuf,
        #[arg(long)]
        analysis_id: Option<String>,
        #[command(flatten)]
        stats: StatsArgs,
        /// Print the JSON report instead of text
        #[arg(long)]
        json: bool,
    },
    /// Exploratory recomputation of a stored analysis under another ordering
    Whatif {
        analysis_id: String,
        /// card_id,tier_index CSV (tier 1 = most meaningful)
        ordering: PathBuf,
    },
    /// Re-analyze seeded perturbations of a closed session's ordering
    Sensitivity {
        session_id: String,
        #[arg(long)]
        arm_map: PathBuf,
        /// adjacent-swaps[:K], intra-group-exchange or full-reshuffle
        #[arg(long, default_value = "adjacent-swaps:1")]
        strategy: SensitivityStrategy,
        #[arg(long, default_value_t = 1000)]
        perturbations: usize,
        /// Include every perturbed p-value in the output
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        stats: StatsArgs,
    },
    /// Monte Carlo operating characteristics over a TOML grid; CSV out
    Simulate {
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service
    Serve {
        #[arg(long)]
        bind: Option<SocketAddr>,
        /// Arm assignments, read only when an analysis is requested
        #[arg(long)]
        arm_map: Option<PathBuf>,
        #[arg(long, env = "IMPACT_ARM_CREDENTIAL", hide_env_values = true)]
        arm_credential: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum SessionCommand {
    /// Open a session over each participant's selected anecdote
    New {
        file: PathBuf,
        #[command(flatten)]
        selection: SelectionArgs,
        /// Require a strict ordering
        #[arg(long)]
        no_ties: bool,
        /// Mark as an interim session
        #[arg(long)]
        interim: bool,
        #[arg(long)]
        actor: Option<String>,
        #[arg(long)]
        lexicon_dir: Option<PathBuf>,
    },
    /// Print the blinded card payload
    Export {
        session_id: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a card_id,tier_index CSV in presentation order
        #[arg(long)]
        rank_template: Option<PathBuf>,
    },
    /// Submit an ordering from a card_id,tier_index CSV
    ImportRanks {
        session_id: String,
        ranks: PathBuf,
        #[arg(long)]
        expected_version: Option<u64>,
        #[arg(long, default_value = "chair")]
        actor: String,
    },
    /// Lock the submitted ordering
    Finalize {
        session_id: String,
        #[arg(long)]
        chair: String,
        #[arg(long)]
        expected_version: Option<u64>,
    },
}

#[derive(Debug, Args)]
struct SelectionArgs {
    /// Analyze this study day rather than each participant's last blinded visit
    #[arg(long)]
    visit_day: Option<i64>,
    /// The protocol administers a global impression of change scale
    #[arg(long)]
    cgi_declared: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    method: Option<MethodChoice>,
    #[arg(long)]
    alternative: Option<Alternative>,
    /// Apply the continuity correction to the normal approximation
    #[arg(long)]
    continuity: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    exact_cap: Option<usize>,
}

struct Context {
    file: FileConfig,
    store_path: PathBuf,
    seed: u64,
}

impl Context {
    fn store(&self) -> Result<Store, ApiError> {
        Store::open(&self.store_path)
    }

    fn analysis_config(&self, args: &StatsArgs) -> AnalysisConfig {
        let mut config = self.file.analysis;
        if let Some(m) = args.method {
            config.stats.method = m;
        }
        if let Some(a) = args.alternative {
            config.stats.alternative = a;
        }
        if args.continuity {
            config.stats.continuity = true;
        }
        if let Some(a) = args.alpha {
            config.alpha = a;
        }
        if let Some(c) = args.exact_cap {
            config.stats.exact_cap = c;
        }
        config
    }

    fn protocol(&self, args: &SelectionArgs) -> StudyProtocol {
        StudyProtocol {
            cgi_declared: args.cgi_declared || self.file.session.cgi_declared,
        }
    }
}

fn policy(args: &SelectionArgs) -> SelectionPolicy {
    args.visit_day.map_or(SelectionPolicy::LastBlindedDay, SelectionPolicy::VisitDay)
}

fn lexicon(dir: Option<&Path>) -> Result<Lexicon, ApiError> {
    match dir {
        Some(d) => Ok(Lexicon::from_dir(d)?),
        None => Ok(Lexicon::shipped()),
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn read(path: &Path) -> Result<String, ApiError> {
    std::fs::read_to_string(path).map_err(|e| ApiError::io(path.display(), e))
}

fn write(path: &Path, contents: &[u8]) -> Result<(), ApiError> {
    std::fs::write(path, contents).map_err(|e| ApiError::io(path.display(), e))
}

/// Parse `args` and run the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), ApiError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = Context {
        store_path: cli
            .store
            .or_else(|| file.store.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_STORE)),
        seed: cli.seed.or(file.seed).unwrap_or(0),
        file,
    };

    match cli.command {
        Command::Ingest { file, selection, export } => {
            let dataset = ingest(&file)?;
            let chosen = select_for_analysis(&dataset, policy(&selection), &ctx.protocol(&selection))?;
            if let Some(out) = export {
                let text = match RecordFormat::from_path(&out) {
                    RecordFormat::Csv => export_csv(&dataset),
                    RecordFormat::Jsonl => export_jsonl(&dataset),
                };
                write(&out, text.as_bytes())?;
            }
            print_json(&json!({
                "participants": dataset.participants.len(),
                "anecdotes": dataset.anecdotes.len(),
                "selected": chosen.anecdotes.len(),
                "findings": chosen.findings,
            }));
            if chosen.has_errors() {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "visit-ordering",
                    "anecdotes were collected out of protocol order",
                ));
            }
            Ok(())
        }
        Command::Quality { file, lexicon_dir } => quality(&file, &lexicon(lexicon_dir.as_deref())?),
        Command::Session(cmd) => session(&ctx, cmd),
        Command::Analyze {
            session_id,
            arm_map,
            analysis_id,
            stats,
            json,
        } => {
            let arm_map = ArmMap::load(&arm_map)?;
            let config = ctx.analysis_config(&stats);
            let report = ops::run_analysis(&ctx.store()?, &session_id, &arm_map, &config, analysis_id, "statistician")?;
            if json {
                print_json(&report);
            } else {
                print!("{}", render_text(&report));
                println!("\nanalysis id: {}", report.analysis_id);
            }
            Ok(())
        }
        Command::Whatif { analysis_id, ordering } => {
            let tiers = parse_rank_csv(&read(&ordering)?)?;
            print_json(&ops::whatif(&ctx.store()?, &analysis_id, &tiers)?);
            Ok(())
        }
        Command::Sensitivity {
            session_id,
            arm_map,
            strategy,
            perturbations,
            full,
            stats,
        } => {
            let arm_map = ArmMap::load(&arm_map)?;
            let config = ctx.analysis_config(&stats);
            let mut result = ops::run_sensitivity(
                &ctx.store()?,
                &session_id,
                &arm_map,
                strategy,
                perturbations,
                ctx.seed,
                &config,
            )?;
            if !full {
                result.perturbed_p.clear();
            }
            print_json(&result);
            Ok(())
        }
        Command::Simulate { grid, out } => {
            let grid = load_grid(&grid, cli.seed.or(ctx.file.seed))?;
            let results = operating_characteristics(&grid)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|e| ApiError::io(path.display(), e))?;
                    write_results_csv(file, &results)?;
                }
                None => write_results_csv(std::io::stdout().lock(), &results)?,
            }
            Ok(())
        }
        Command::Serve {
            bind,
            arm_map,
            arm_credential,
        } => {
            let serve = &ctx.file.serve;
            let bind = match bind {
                Some(b) => b,
                None => serve
                    .bind
                    .as_deref()
                    .unwrap_or(DEFAULT_BIND)
                    .parse()
                    .map_err(|e| ApiError::bad_request(format!("bind address: {e}")))?,
            };
            let arms = ArmSource {
                path: arm_map.or_else(|| serve.arm_map.clone()),
                credential: arm_credential.or_else(|| serve.arm_credential.clone()),
            };
            let state = AppState::new(ctx.store()?, arms, Lexicon::shipped());
            let runtime = tokio::runtime::Runtime::new().map_err(|e| ApiError::io("runtime", e))?;
            runtime
                .block_on(server::serve(bind, state))
                .map_err(|e| ApiError::io(bind, e))
        }
    }
}

fn quality(file: &Path, lexicon: &Lexicon) -> Result<(), ApiError> {
    let is_records = matches!(
        file.extension().and_then(|e| e.to_str()),
        Some("jsonl" | "json" | "csv")
    );
    let mut reports = Vec::new();
    if is_records {
        for a in ingest(file)?.anecdotes {
            let report = quality_report(&a, lexicon)?;
            reports.push(json!({ "anecdote_id": a.anecdote_id, "text": a.text, "report": report }));
        }
    } else {
        for (i, line) in read(file)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let report = quality_report_for_text(line, lexicon)?;
            reports.push(json!({ "line": i + 1, "text": line, "report": report }));
        }
    }
    let failed = reports
        .iter()
        .filter(|r| r["report"]["overall_pass"] != json!(true))
        .count();
    print_json(&reports);
    if failed > 0 {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "quality-failed",
            format!("{failed} of {} anecdote(s) failed the checklist", reports.len()),
        ));
    }
    Ok(())
}

fn session(ctx: &Context, cmd: SessionCommand) -> Result<(), ApiError> {
    let store = ctx.store()?;
    match cmd {
        SessionCommand::New {
            file,
            selection,
            no_ties,
            interim,
            actor,
            lexicon_dir,
        } => {
            let settings = &ctx.file.session;
            let options = SessionOptions {
                allow_ties: !no_ties && settings.allow_ties.unwrap_or(true),
                seed: ctx.seed,
                actor: actor
                    .or_else(|| settings.actor.clone())
                    .unwrap_or_else(|| SessionOptions::default().actor),
                kind: if interim { SessionKind::Interim } else { SessionKind::Full },
            };
            let created = ops::create_session(
                &store,
                &ingest(&file)?,
                policy(&selection),
                &ctx.protocol(&selection),
                &options,
                &lexicon(lexicon_dir.as_deref())?,
            )?;
            print_json(&created);
        }
        SessionCommand::Export {
            session_id,
            out,
            rank_template,
        } => {
            let payload = ops::cards(&store, &session_id)?;
            if let Some(path) = rank_template {
                let tiers: Vec<_> = payload.cards.iter().map(|c| vec![c.card_id.clone()]).collect();
                write(&path, tiers_to_rank_csv(&tiers).as_bytes())?;
            }
            match out {
                Some(path) => write(&path, serde_json::to_string_pretty(&payload).expect("payload").as_bytes())?,
                None => print_json(&payload),
            }
        }
        SessionCommand::ImportRanks {
            session_id,
            ranks,
            expected_version,
            actor,
        } => {
            let tiers = parse_rank_csv(&read(&ranks)?)?;
            print_json(&ops::submit_ordering(&store, &session_id, tiers, &actor, expected_version)?);
        }
        SessionCommand::Finalize {
            session_id,
            chair,
            expected_version,
        } => print_json(&ops::finalize(&store, &session_id, &chair, expected_version)?),
    }
    std::io::stdout().flush().map_err(|e| ApiError::io("stdout", e))
}
