//! The `psi` command line: serve, schema tools, ingestion checks and the
//! conformance harness.

pub mod conformance;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use psi_core::ingest::{ingest, IngestOptions};
use psi_core::schema::compiler::PredefinedFetcher;
use psi_core::schema::validator::validate_psi;
use psi_core::schema::{compile, ResolutionContext};
use psi_core::value::serialize_json_pretty;
use psi_core::{parse_json, Value};

use crate::conformance::Partner;

/// Schema root used when compiling outside a running service.
pub const DEFAULT_SCHEMA_ROOT: &str = "http://localhost:8080/schema";

#[derive(Debug, Parser)]
#[command(
    name = "psi",
    version,
    about = "Protocols and Structures for Inference"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a service from a JSON config file.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compile or validate PSI schema.
    #[command(subcommand)]
    Schema(SchemaCommand),
    /// Replay the Iris walkthrough against a running service.
    Conformance(ConformanceArgs),
    /// Check a relation manifest and its CSV without serving it.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        /// Dry run; currently the only mode.
        #[arg(long, required = true)]
        check: bool,
        /// Inline rich-valued files as data URIs.
        #[arg(long)]
        data_uri: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum SchemaCommand {
    /// Print the compiled JSON Schema.
    Compile {
        file: PathBuf,
        #[arg(long, default_value = DEFAULT_SCHEMA_ROOT)]
        schema_root: String,
    },
    /// Validate a JSON value; exits 1 listing violations when invalid.
    Validate {
        schema: PathBuf,
        value: PathBuf,
        #[arg(long, default_value = DEFAULT_SCHEMA_ROOT)]
        schema_root: String,
        /// Seconds to wait when resolving media types of http(s) values.
        #[arg(long, default_value_t = 3)]
        timeout: u64,
    },
}

#[derive(Debug, Args)]
pub struct ConformanceArgs {
    /// Entry URI of the service under test.
    pub entry: String,
    /// Entry URI of a running data-only service for the cross-relation step.
    #[arg(long, conflicts_with = "partner_config")]
    pub partner: Option<String>,
    /// Config to start the cross-relation partner in-process
    /// (default: data/flowers.json).
    #[arg(long)]
    pub partner_config: Option<PathBuf>,
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// The flowers config shipped with the repository, if it can be found.
fn default_partner_config() -> Option<PathBuf> {
    [
        PathBuf::from("data/flowers.json"),
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/flowers.json"),
    ]
    .into_iter()
    .find(|p| p.exists())
}

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Serve { config } => {
            let rt = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => return fail(err, e),
            };
            rt.block_on(psi_server::serve(&config))
                .map(|_| 0)
                .map_err(|e| e.to_string())
        }
        Command::Schema(SchemaCommand::Compile { file, schema_root }) => {
            schema_compile(&file, &schema_root, out)
        }
        Command::Schema(SchemaCommand::Validate {
            schema,
            value,
            schema_root,
            timeout,
        }) => schema_validate(&schema, &value, &schema_root, timeout, out),
        Command::Conformance(args) => {
            let partner = match (args.partner, args.partner_config) {
                (Some(uri), _) => Partner::Uri(uri),
                (None, Some(cfg)) => Partner::Config(cfg),
                (None, None) => default_partner_config().map_or(Partner::None, Partner::Config),
            };
            let report = conformance::run(&args.entry, &partner);
            let _ = writeln!(out, "{report}");
            Ok(if report.ok() { 0 } else { 1 })
        }
        Command::Ingest {
            manifest, data_uri, ..
        } => ingest_check(&manifest, data_uri, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => fail(err, e),
    }
}

fn fail(err: &mut dyn Write, e: impl std::fmt::Display) -> i32 {
    let _ = writeln!(err, "error: {e}");
    1
}

fn schema_compile(file: &Path, root: &str, out: &mut dyn Write) -> Result<i32, String> {
    let schema = read_json(file)?;
    let fetcher = PredefinedFetcher::new(root);
    let mut ctx = ResolutionContext::new(fetcher.root(), &fetcher);
    let compiled = compile(&schema, &mut ctx).map_err(|e| e.to_string())?;
    writeln!(out, "{}", serialize_json_pretty(compiled.as_value())).map_err(|e| e.to_string())?;
    Ok(0)
}

fn schema_validate(
    schema: &Path,
    value: &Path,
    root: &str,
    timeout: u64,
    out: &mut dyn Write,
) -> Result<i32, String> {
    let schema = read_json(schema)?;
    let value = read_json(value)?;
    let fetcher = PredefinedFetcher::new(root);
    let mut ctx = ResolutionContext::new(fetcher.root(), &fetcher);
    let resolver = psi_server::HttpResolver::new(Duration::from_secs(timeout));
    let outcome = validate_psi(&value, &schema, &mut ctx, &resolver).map_err(|e| e.to_string())?;
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(|e| e.to_string());
    if outcome.is_valid() {
        w(out, "valid".into())?;
        Ok(0)
    } else {
        for v in &outcome.violations {
            w(out, v.to_string())?;
        }
        Ok(1)
    }
}

fn ingest_check(manifest: &Path, data_uri: bool, out: &mut dyn Write) -> Result<i32, String> {
    let rel = ingest(
        manifest,
        IngestOptions {
            inline_rich: data_uri,
        },
    )
    .map_err(|e| e.to_string())?;
    let names: Vec<&str> = rel.attributes.iter().map(|a| a.name.as_str()).collect();
    writeln!(
        out,
        "{}: {} instances, {} columns, attributes [{}], default {}",
        rel.name,
        rel.rows.len(),
        rel.columns.len(),
        names.join(", "),
        rel.default_attribute
    )
    .map_err(|e| e.to_string())?;
    Ok(0)
}

/// Parses `argv` and runs it. Usage errors exit 2.
pub fn main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            code
        }
    }
}
