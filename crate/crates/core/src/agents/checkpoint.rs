//! Portable checkpoint format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic     4 bytes  "TSCK"
//! version   u32      1
//! hlen      u32      length of the header in bytes
//! header    hlen     UTF-8 TOML: agent, seed, topology, [hyperparams]
//! nparams   u64      number of network parameters
//! params    nparams  f64, online network then target network
//! nentries  u64      number of Q-table rows
//! entries   nentries 16 bin bytes followed by 3 f64 action values
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::drl::DrlAgent;
use super::marl::MarlAgent;
use super::nn::{DuelingNetwork, Topology};
use super::tabular::{QTable, StateKey, TabularAgent};
use super::{Agent, AgentHyperparams};
use crate::env::{Action, FEATURES};
use crate::error::{Result, SimError};

const MAGIC: &[u8; 4] = b"TSCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub agent: String,
    pub seed: u64,
    pub topology: String,
    pub hyperparams: AgentHyperparams,
    pub params: Vec<f64>,
    pub table: Vec<(StateKey, [f64; 3])>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    agent: String,
    seed: u64,
    topology: String,
    hyperparams: AgentHyperparams,
}

fn bad(msg: impl Into<String>) -> SimError {
    SimError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = toml::to_string(&Header {
            agent: self.agent.clone(),
            seed: self.seed,
            topology: self.topology.clone(),
            hyperparams: self.hyperparams.clone(),
        })
        .map_err(|e| bad(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.extend_from_slice(&(self.table.len() as u64).to_le_bytes());
        for (key, q) in &self.table {
            out.extend_from_slice(key);
            for v in q {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if r.len() < n {
                return Err(bad("truncated checkpoint"));
            }
            let (head, rest) = r.split_at(n);
            r = rest;
            Ok(head)
        };
        if take(4)? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let header_text = std::str::from_utf8(take(hlen)?).map_err(|_| bad("header is not UTF-8"))?;
        let header: Header = toml::from_str(header_text).map_err(|e| bad(e.to_string()))?;
        let nparams = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let params = take(nparams.checked_mul(8).ok_or_else(|| bad("size overflow"))?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let nentries = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let row = FEATURES + 24;
        let table = take(nentries.checked_mul(row).ok_or_else(|| bad("size overflow"))?)?
            .chunks_exact(row)
            .map(|c| {
                let key: StateKey = c[..FEATURES].try_into().unwrap();
                let mut q = [0.0; 3];
                for (i, v) in q.iter_mut().enumerate() {
                    let at = FEATURES + 8 * i;
                    *v = f64::from_le_bytes(c[at..at + 8].try_into().unwrap());
                }
                (key, q)
            })
            .collect();
        Ok(Self {
            agent: header.agent,
            seed: header.seed,
            topology: header.topology,
            hyperparams: header.hyperparams,
            params,
            table,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Rebuilds an agent that reproduces the saved Q-values exactly.
    pub fn restore(&self) -> Result<Box<dyn Agent>> {
        let hp = self.hyperparams.clone();
        if self.agent == TabularAgent::NAME {
            let mut table = QTable::default();
            for (k, q) in &self.table {
                table.insert(*k, *q);
            }
            return Ok(Box::new(TabularAgent::restore(hp, self.seed, table)));
        }
        let topo = Topology::dueling(FEATURES, &hp.hidden_sizes, hp.head_hidden, Action::ALL.len());
        if topo.describe() != self.topology {
            return Err(bad(format!("topology {} does not match hyperparameters", self.topology)));
        }
        if !self.params.len().is_multiple_of(2) {
            return Err(bad("odd parameter count"));
        }
        let half = self.params.len() / 2;
        let online = DuelingNetwork::from_params(topo.clone(), self.params[..half].to_vec())?;
        let target = DuelingNetwork::from_params(topo, self.params[half..].to_vec())?;
        match self.agent.as_str() {
            DrlAgent::NAME => Ok(Box::new(DrlAgent::restore(hp, self.seed, online, target))),
            MarlAgent::NAME => Ok(Box::new(MarlAgent::restore(hp, self.seed, online, target))),
            other => Err(SimError::UnknownStrategy {
                kind: "agent",
                name: other.to_string(),
            }),
        }
    }
}
