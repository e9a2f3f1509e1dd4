use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::ledger::{Chain, Genesis, Runtime};
use super::tx::{Receipt, Transaction};
use crate::canonical;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("divergence at tx {index}: expected {expected}, got {actual}")]
    DivergenceDetected { index: usize, expected: String, actual: String },
    #[error("{0} receipts recorded for {1} transactions")]
    ReceiptCountMismatch(usize, usize),
}

impl ReplayError {
    pub fn code(&self) -> &'static str {
        "DivergenceDetected"
    }
}

fn describe(r: &Receipt) -> String {
    canonical::to_canonical_string(r).expect("receipt serializes")
}

/// Rebuild a chain from genesis and a log of committed transactions. With
/// `expected`, every receipt must match exactly; without, every tx must commit.
pub fn replay(
    genesis: Genesis,
    runtime: Arc<dyn Runtime>,
    log: &[Transaction],
    expected: Option<&[Receipt]>,
) -> Result<Chain, ReplayError> {
    if let Some(exp) = expected {
        if exp.len() != log.len() {
            return Err(ReplayError::ReceiptCountMismatch(exp.len(), log.len()));
        }
    }
    let mut chain = Chain::new(genesis, runtime);
    for (index, tx) in log.iter().enumerate() {
        let receipt = chain.submit_tx(tx.clone());
        let diverged = match expected {
            Some(exp) => exp[index] != receipt,
            None => !receipt.is_committed(),
        };
        if diverged {
            return Err(ReplayError::DivergenceDetected {
                index,
                expected: expected.map(|e| describe(&e[index])).unwrap_or_else(|| "Committed".into()),
                actual: describe(&receipt),
            });
        }
    }
    Ok(chain)
}

/// Read JSON Lines; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(item);
    }
    Ok(out)
}

pub fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    for item in items {
        let line = canonical::to_canonical_string(item).map_err(io::Error::other)?;
        writeln!(file, "{line}")?;
    }
    file.flush()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    if path.exists() {
        fs::remove_file(path)?;
    }
    append_jsonl(path, items)
}
