use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use kriq_core::planner::{Mode, PlanError};
use kriq_core::reasoner::Strategy;
use kriq_core::System;
use kriq_service::repl::{self, json, render, Format};
use kriq_service::{http, Session, SessionError};
use parking_lot::RwLock;

#[derive(Parser, Debug)]
#[command(name = "kriq", version, about = "Ask questions of canonicalized tables in plain English")]
struct Cli {
    /// Directory of CSV tables (defaults to the bundled sample).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Knowledge document (defaults to the bundled sample).
    #[arg(long, global = true)]
    knowledge: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate a deployment, then print a summary.
    Load { data_dir: PathBuf, knowledge_file: PathBuf },
    /// Answer one question.
    Query {
        text: String,
        /// Direct facts only, as a plain relational query would answer.
        #[arg(long)]
        baseline: bool,
        /// Treat the text as res goals, e.g. "res('Gene', Pk, 'GeneName', 'repA1')".
        #[arg(long)]
        goal: bool,
        /// Pin the goal evaluation to one strategy (direct-only, indirect, interpretive).
        #[arg(long, requires = "goal")]
        strategy: Option<Strategy>,
        /// Print the extracted intent and plan.
        #[arg(long)]
        dump_intent: bool,
        /// Print the rendered SQL.
        #[arg(long)]
        sql: bool,
        /// Print every row's derivation.
        #[arg(long)]
        explain: bool,
    },
    /// Interactive prompt.
    Repl,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn fail(e: &SessionError) -> ExitCode {
    eprintln!("error[{}]: {e}", e.name());
    ExitCode::from(2)
}

fn open(cli: &Cli) -> Result<Session, SessionError> {
    let bundled = System::bundled_dir();
    let data = cli.data_dir.clone().unwrap_or_else(|| bundled.join("tables"));
    let knowledge = cli.knowledge.clone().unwrap_or_else(|| bundled.join("knowledge.json"));
    let mut session = Session::new();
    session.load(&data, &knowledge)?;
    Ok(session)
}

fn sql_text(sql: &Result<String, PlanError>) -> String {
    match sql {
        Ok(s) => s.clone(),
        Err(PlanError::NotDirectlyRenderable {
            partial_sql: Some(p), ..
        }) => p.clone(),
        Err(e) => format!("-- {e}"),
    }
}

struct QueryFlags {
    baseline: bool,
    goal: bool,
    strategy: Option<Strategy>,
    dump_intent: bool,
    sql: bool,
    explain: bool,
}

fn query(cli: &Cli, text: &str, flags: QueryFlags) -> ExitCode {
    if text.trim().is_empty() {
        eprintln!("error[EmptyQuery]: the query text is empty");
        return ExitCode::from(1);
    }
    let mut session = match open(cli) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let mode = if flags.baseline { Mode::Baseline } else { Mode::Enhanced };
    let mut out = Vec::new();
    let (table, answer) = if flags.goal {
        match session.goal(text, flags.strategy, mode) {
            Ok(t) => (t, None),
            Err(e) => return fail(&e),
        }
    } else {
        match session.answer(text, mode) {
            Ok(a) => (a.table.clone(), Some(a)),
            Err(e) => return fail(&e),
        }
    };
    let resp = session.record(text, &table);
    if let Some(a) = &answer {
        if flags.dump_intent {
            out.push(json(&serde_json::json!({ "intent": a.intent, "plan": a.plan })));
        }
        if flags.sql {
            out.push(match cli.format {
                Format::Json => json(&serde_json::json!({ "sql": sql_text(&a.sql) })),
                Format::Text => sql_text(&a.sql),
            });
        }
    }
    out.push(render(&resp, cli.format));
    if flags.explain {
        for row in &resp.rows {
            let x = session.explain(&row.provenance_id).expect("recorded row");
            out.push(json(&x));
        }
    }
    println!("{}", out.join("\n\n"));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Load {
            data_dir,
            knowledge_file,
        } => {
            let mut session = Session::new();
            if let Err(e) = session.load(data_dir, knowledge_file) {
                return fail(&e);
            }
            let schema = session.schema().expect("loaded");
            match cli.format {
                Format::Json => println!("{}", json(&schema)),
                Format::Text => {
                    println!(
                        "loaded {} concepts, {} facts, tools: {}",
                        schema.knowledge.ontology.len(),
                        schema.facts,
                        schema.tools.join(", ")
                    );
                    for w in &schema.warnings {
                        println!("warning: {w}");
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Command::Query {
            text,
            baseline,
            goal,
            strategy,
            dump_intent,
            sql,
            explain,
        } => query(
            &cli,
            text,
            QueryFlags {
                baseline: *baseline,
                goal: *goal,
                strategy: *strategy,
                dump_intent: *dump_intent,
                sql: *sql,
                explain: *explain,
            },
        ),
        Command::Repl => {
            let mut session = match open(&cli) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            let stdin = io::stdin();
            match repl::run(&mut session, stdin.lock(), io::stdout(), cli.format) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error[Io]: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Serve { port, host } => {
            let session = match open(&cli) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            let addr: SocketAddr = match format!("{host}:{port}").parse() {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("error[Usage]: bad address: {e}");
                    return ExitCode::from(1);
                }
            };
            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            let shared = Arc::new(RwLock::new(session));
            let _ = io::stdout().flush();
            match runtime.block_on(http::serve(shared, addr)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error[Io]: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
