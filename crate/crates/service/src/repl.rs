//! Line-oriented REPL. A line is a sentence unless it starts with `:`.

use std::io::{BufRead, Write};
use std::path::Path;

use kriq_core::planner::{Mode, ResultTable};
use serde::Serialize;

use crate::{QueryResponse, Session, SessionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

pub fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

/// Renders a recorded query result.
pub fn render(resp: &QueryResponse, format: Format) -> String {
    match format {
        Format::Json => json(resp),
        Format::Text => {
            let table = ResultTable {
                columns: resp.columns.clone(),
                rows: resp.rows.clone(),
                mode: resp.mode,
                warnings: resp.warnings.clone(),
            };
            let mut out = table.to_text();
            for w in &resp.warnings {
                out.push_str(&format!("\nwarning: {w}"));
            }
            out
        }
    }
}

const HELP: &str = "\
<sentence>                 answer a question
:goal <atoms>              run raw res goals
:mode baseline|enhanced    switch answer mode
:sql <sentence>            show the rendered SQL
:intent <sentence>         show the extracted intent
:explain <provenance-id>   show a row's derivation
:load <data-dir> <file>    load tables and knowledge
:schema                    show the loaded knowledge
:history                   list answered queries
:quit                      leave";

fn step(session: &mut Session, line: &str, format: Format) -> Result<Option<String>, SessionError> {
    let (cmd, rest) = match line.strip_prefix(':') {
        Some(c) => c.split_once(' ').map(|(a, b)| (a, b.trim())).unwrap_or((c, "")),
        None => ("", line),
    };
    let mode = session.default_mode();
    let out = match cmd {
        "" => render(&session.query(rest, mode, false)?, format),
        "goal" => render(&session.query(rest, mode, true)?, format),
        "mode" => match rest {
            "baseline" => {
                session.mode = Some(Mode::Baseline);
                "mode: baseline".into()
            }
            "enhanced" => {
                session.mode = Some(Mode::Enhanced);
                "mode: enhanced".into()
            }
            other => format!("unknown mode `{other}`"),
        },
        "sql" => match session.answer(rest, mode)?.sql {
            Ok(sql) => sql,
            Err(e) => match e {
                kriq_core::planner::PlanError::NotDirectlyRenderable {
                    partial_sql: Some(p), ..
                } => p,
                other => format!("{}: {other}", other.name()),
            },
        },
        "intent" => json(&session.system()?.understand(rest).map_err(kriq_core::Error::from)?),
        "explain" => json(&session.explain(rest)?),
        "load" => {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(d), Some(k)) => {
                    let sys = session.load(Path::new(d), Path::new(k))?;
                    format!("loaded {} facts", sys.store().len())
                }
                _ => "usage: :load <data-dir> <knowledge-file>".into(),
            }
        }
        "schema" => json(&session.schema()?),
        "history" => match format {
            Format::Json => json(&session.history()),
            Format::Text => session
                .history()
                .iter()
                .map(|h| format!("{}  {:?}  {}", h.result_id, h.mode, h.text))
                .collect::<Vec<_>>()
                .join("\n"),
        },
        "help" => HELP.into(),
        "quit" | "q" | "exit" => return Ok(None),
        other => format!("unknown command `:{other}`; try :help"),
    };
    Ok(Some(out))
}

/// Runs until end of input or `:quit`. Errors are printed and the loop goes on.
pub fn run<R: BufRead, W: Write>(session: &mut Session, input: R, mut output: W, format: Format) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match step(session, line, format) {
            Ok(Some(text)) => writeln!(output, "{text}")?,
            Ok(None) => break,
            Err(e) => writeln!(output, "error[{}]: {e}", e.name())?,
        }
    }
    Ok(())
}
