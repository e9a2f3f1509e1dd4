//! The `tabforge` command line.
//!
//! Exit status: 0 on success, 1 on a domain error (its code is printed to
//! stderr first), 2 on a usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::bpmn::{parse_bpmn, validate, Severity};
use crate::canonical::{self, Digest};
use crate::chain::{read_jsonl, replay, Identity, Receipt, Transaction};
use crate::defsm::{compile, DefsmPackage};
use crate::dmn::{parse_dmn_all, Value};
use crate::gateway::{parse_cid, ChainFiles, DirCas, Gateway, GatewayError, UreqClient};
use crate::monitor::Monitor;

/// Seed of the identity used when none is configured. Development only.
const DEV_SEED: [u8; 32] = *b"tabforge-development-identity-01";
const DEV_ACTOR: &str = "operator";

#[derive(Debug, Parser)]
#[command(name = "tabforge", version, about = "Compile BPMN+DMN models into monitor contracts and run them")]
struct Cli {
    /// Committed transaction log; genesis and receipts live beside it.
    #[arg(long, global = true, default_value = ".tabforge/chain.jsonl")]
    chain_log: PathBuf,
    /// Document store directory.
    #[arg(long, global = true, default_value = ".tabforge/cas")]
    cas_dir: PathBuf,
    /// Key file signing transactions and documents.
    #[arg(long, global = true, env = "TABFORGE_IDENTITY")]
    identity: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and compile a model into a package.
    Compile {
        bpmn: PathBuf,
        /// DMN files providing the referenced decisions.
        #[arg(long = "dmn")]
        dmn: Vec<PathBuf>,
        /// Write the package here and print its id; otherwise print the package.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Report structural violations, one per line.
    Validate { bpmn: PathBuf },
    /// Deploy a compiled package; prints the contract id.
    Deploy { package: PathBuf },
    /// Start an instance; prints its id.
    Start { contract: String },
    /// Enabled tasks of an instance, one per line.
    Tasks { instance: String },
    /// Instance state as JSON.
    Instance { instance: String },
    /// Complete a task; prints the transaction digest.
    Complete {
        instance: String,
        task: String,
        /// `name=literal`; literals are numbers, true/false/null, "text" or bare text.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, Value)>,
        /// Document file to store and attach.
        #[arg(long = "doc")]
        docs: Vec<PathBuf>,
        /// Already stored document to attach.
        #[arg(long = "doc-cid")]
        doc_cids: Vec<String>,
    },
    /// Events as JSON lines: one instance's, or the whole chain's.
    Events {
        instance: Option<String>,
        /// First block height to include.
        #[arg(long, default_value_t = 0)]
        from: u64,
    },
    /// Re-hash and re-verify an instance's documents.
    Audit { instance: String },
    /// Rebuild state from a log; prints the resulting state hash.
    Replay {
        #[arg(long)]
        log: Option<PathBuf>,
        /// Also compare every receipt and the block hash chain.
        #[arg(long)]
        verify: bool,
    },
    /// Print the current state hash.
    StateHash,
    /// Create a key file; prints the public key.
    Keygen {
        #[arg(long, default_value = DEV_ACTOR)]
        actor: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Serve the REST API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
    },
}

fn parse_param(s: &str) -> Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    if k.is_empty() {
        return Err("parameter name is empty".into());
    }
    Ok((k.to_string(), Value::parse_literal(v)))
}

type Outcome = Result<(), GatewayError>;

fn read(path: &Path) -> Result<Vec<u8>, GatewayError> {
    std::fs::read(path).map_err(|e| GatewayError::new("IoError", format!("{}: {e}", path.display())))
}

fn identity(cli: &Cli) -> Result<Identity, GatewayError> {
    match &cli.identity {
        Some(path) => {
            let text = String::from_utf8(read(path)?).map_err(|e| GatewayError::new("BadKeyFile", e.to_string()))?;
            Identity::from_key_file(&text).map_err(|e| GatewayError::new("BadKeyFile", e.to_string()))
        }
        None => Ok(Identity::from_seed(DEV_ACTOR, DEV_SEED)),
    }
}

fn open_gateway(cli: &Cli) -> Result<Gateway, GatewayError> {
    let id = identity(cli)?;
    let files = ChainFiles::beside(&cli.chain_log);
    let genesis = files.load_or_init_genesis(&id)?;
    let chain = files.open(genesis)?;
    let cas = DirCas::open(&cli.cas_dir)?;
    Ok(Gateway::new(chain, Arc::new(cas), id, Arc::new(UreqClient::default())).persist_to(files))
}

fn to_json_line<T: serde::Serialize>(v: &T) -> String {
    canonical::to_canonical_string(v).expect("value serializes")
}

fn compile_cmd(bpmn: &Path, dmn: &[PathBuf], output: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let model = parse_bpmn(read(bpmn)?).map_err(|e| GatewayError::new(e.code(), e.to_string()))?;
    let mut tables = Vec::new();
    for path in dmn {
        tables.extend(parse_dmn_all(&read(path)?).map_err(|e| GatewayError::new(e.code(), e.to_string()))?);
    }
    let pkg = compile(&model, &tables).map_err(|e| {
        let detail = match &e {
            crate::defsm::CompileError::ValidationFailed(vs) => {
                vs.iter().map(|v| format!("{} {}: {}", v.code, v.subject_id, v.message)).collect::<Vec<_>>().join("; ")
            }
            other => other.to_string(),
        };
        GatewayError::new(e.code(), detail)
    })?;
    match output {
        Some(path) => {
            std::fs::write(path, pkg.to_bytes()).map_err(|e| GatewayError::new("IoError", e.to_string()))?;
            let _ = writeln!(out, "{}", pkg.package_id);
        }
        None => {
            let _ = writeln!(out, "{}", String::from_utf8(pkg.to_bytes()).expect("json is utf-8"));
        }
    }
    Ok(())
}

fn validate_cmd(bpmn: &Path, out: &mut dyn Write) -> Outcome {
    let model = parse_bpmn(read(bpmn)?).map_err(|e| GatewayError::new(e.code(), e.to_string()))?;
    let violations = validate(&model);
    for v in &violations {
        let sev = match v.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        let _ = writeln!(out, "{sev} {} {}: {}", v.code, v.subject_id, v.message);
    }
    match violations.iter().find(|v| v.severity == Severity::Error) {
        Some(v) => Err(GatewayError::new("ValidationFailed", format!("first error: {}", v.code))),
        None => Ok(()),
    }
}

fn replay_cmd(cli: &Cli, log: Option<&Path>, verify: bool, out: &mut dyn Write) -> Outcome {
    let files = ChainFiles::beside(log.unwrap_or(&cli.chain_log));
    let genesis = files.load_or_init_genesis(&identity(cli)?)?;
    let txs: Vec<Transaction> = read_jsonl(&files.log)?;
    let chain = if verify {
        let receipts: Vec<Receipt> = read_jsonl(&files.receipts)?;
        let chain = replay(genesis, Arc::new(Monitor), &txs, Some(&receipts))?;
        if !chain.verify_hash_chain() {
            return Err(GatewayError::new("DivergenceDetected", "block hash chain does not verify"));
        }
        chain
    } else {
        replay(genesis, Arc::new(Monitor), &txs, None)?
    };
    let _ = writeln!(out, "{}", chain.state_hash());
    Ok(())
}

fn serve_cmd(cli: &Cli, bind: std::net::IpAddr, port: u16, out: &mut dyn Write) -> Outcome {
    let gw = Arc::new(open_gateway(cli)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| GatewayError::new("IoError", e.to_string()))?;
    rt.block_on(async {
        let handle = crate::gateway::serve(gw, SocketAddr::new(bind, port))
            .await
            .map_err(|e| GatewayError::new("IoError", e.to_string()))?;
        let _ = writeln!(out, "listening on http://{}", handle.addr);
        let _ = out.flush();
        handle.wait().await.map_err(|e| GatewayError::new("IoError", e.to_string()))
    })
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Outcome {
    match &cli.command {
        Command::Compile { bpmn, dmn, output } => compile_cmd(bpmn, dmn, output.as_deref(), out),
        Command::Validate { bpmn } => validate_cmd(bpmn, out),
        Command::Deploy { package } => {
            let pkg = DefsmPackage::from_bytes(&read(package)?).map_err(|e| GatewayError::new("MalformedPackage", e.to_string()))?;
            let id = open_gateway(cli)?.deploy(&pkg)?;
            let _ = writeln!(out, "{id}");
            Ok(())
        }
        Command::Start { contract } => {
            let id = open_gateway(cli)?.start(contract)?;
            let _ = writeln!(out, "{id}");
            Ok(())
        }
        Command::Tasks { instance } => {
            for t in open_gateway(cli)?.tasks(instance)? {
                let _ = writeln!(out, "{t}");
            }
            Ok(())
        }
        Command::Instance { instance } => {
            let inst = open_gateway(cli)?.instance(instance)?;
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&inst).expect("instance serializes"));
            Ok(())
        }
        Command::Complete { instance, task, params, docs, doc_cids } => {
            let gw = open_gateway(cli)?;
            let mut cids: Vec<Digest> = Vec::new();
            for path in docs {
                cids.push(gw.put_document(&read(path)?)?);
            }
            for c in doc_cids {
                cids.push(parse_cid(c)?);
            }
            let params: BTreeMap<String, Value> = params.iter().cloned().collect();
            let receipt = gw.complete(instance, task, params, &cids)?;
            let _ = writeln!(out, "{}", receipt.tx_digest);
            Ok(())
        }
        Command::Events { from, instance } => {
            let gw = open_gateway(cli)?;
            let events = match instance {
                Some(id) => gw.events(id, *from)?.0,
                None => gw.all_events().into_iter().filter(|e| e.height >= *from).collect(),
            };
            for e in events {
                let _ = writeln!(out, "{}", to_json_line(&e));
            }
            Ok(())
        }
        Command::Audit { instance } => {
            for a in open_gateway(cli)?.audit(instance)? {
                let _ = writeln!(out, "{} {} {:?}", a.cid, a.task, a.status);
            }
            Ok(())
        }
        Command::Replay { log, verify } => replay_cmd(cli, log.as_deref(), *verify, out),
        Command::StateHash => {
            let _ = writeln!(out, "{}", open_gateway(cli)?.state_hash());
            Ok(())
        }
        Command::Keygen { actor, output } => {
            let id = Identity::generate(actor);
            std::fs::write(output, id.to_key_file()).map_err(|e| GatewayError::new("IoError", e.to_string()))?;
            let _ = writeln!(out, "{}", crate::chain::Signer::public_key(&id));
            Ok(())
        }
        Command::Serve { port, bind } => serve_cmd(cli, *bind, *port, out),
    }
}

/// Parse `args` (program name first) and run, writing to the given streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}: {}", e.code, e.message);
            1
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}
