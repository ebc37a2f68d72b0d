//! Binary parameter file.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size  | field                                   |
//! |--------|-------|-----------------------------------------|
//! | 0      | 4     | magic `b"NDRP"`                         |
//! | 4      | 2     | format version, u16 = 1                 |
//! | 6      | 1     | architecture, u8: 0 = FFNN, 1 = RNN     |
//! | 7      | 1     | reserved, 0                             |
//! | 8      | 4     | sensor count, u32                       |
//! | 12     | 4     | window columns, u32                     |
//! | 16     | 4     | output count, u32                       |
//! | 20     | 4     | hidden layer count L, u32               |
//! | 24     | 4·L   | hidden layer sizes, u32 each            |
//! | 24+4L  | 8     | weight count W, u64                     |
//! | 32+4L  | 8·W   | weights, f64 each, in flat-vector order |

use std::io::{Read, Write};
use std::path::Path;

use super::{Architecture, DecisionRuleParams};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"NDRP";
const VERSION: u16 = 1;

pub fn encode_params(p: &DecisionRuleParams) -> Vec<u8> {
    let hidden = p.arch.hidden_sizes();
    let mut out = Vec::with_capacity(32 + 4 * hidden.len() + 8 * p.weights.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match p.arch {
        Architecture::Ffnn { .. } => 0,
        Architecture::Rnn { .. } => 1,
    });
    out.push(0);
    for v in [p.n_sensors, p.n_cols, p.n_outputs, hidden.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for h in hidden {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&(p.weights.len() as u64).to_le_bytes());
    for w in &p.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(Error::ParamFormat("truncated file".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

pub fn decode_params(bytes: &[u8]) -> Result<DecisionRuleParams> {
    let mut c = Cursor(bytes);
    if c.take(4)? != MAGIC {
        return Err(Error::ParamFormat("bad magic".into()));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::ParamFormat(format!("unsupported version {version}")));
    }
    let arch_tag = c.take(2)?[0];
    let n_sensors = c.u32()?;
    let n_cols = c.u32()?;
    let n_outputs = c.u32()?;
    let n_hidden = c.u32()?;
    let hidden = (0..n_hidden).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    let arch = match (arch_tag, hidden.as_slice()) {
        (0, _) => Architecture::Ffnn { hidden },
        (1, [h]) => Architecture::Rnn { hidden: *h },
        (1, _) => return Err(Error::ParamFormat("RNN needs exactly one hidden layer".into())),
        (t, _) => return Err(Error::ParamFormat(format!("unknown architecture tag {t}"))),
    };
    let count = u64::from_le_bytes(c.take(8)?.try_into().expect("8 bytes")) as usize;
    let raw = c.take(count.checked_mul(8).ok_or_else(|| Error::ParamFormat("weight count overflow".into()))?)?;
    let weights = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    if !c.0.is_empty() {
        return Err(Error::ParamFormat("trailing bytes".into()));
    }
    let p = DecisionRuleParams {
        arch,
        n_sensors,
        n_cols,
        n_outputs,
        weights,
    };
    p.check().map_err(|e| Error::ParamFormat(e.to_string()))?;
    Ok(p)
}

pub fn write_params(p: &DecisionRuleParams, path: impl AsRef<Path>) -> Result<()> {
    crate::atomic_write(path.as_ref(), &encode_params(p))
}

pub fn read_params(path: impl AsRef<Path>) -> Result<DecisionRuleParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_params(&bytes)
}

/// Human-readable dump: one header line then one weight per line.
pub fn write_params_csv<W: Write>(p: &DecisionRuleParams, mut out: W) -> Result<()> {
    let hidden: Vec<String> = p.arch.hidden_sizes().iter().map(|h| h.to_string()).collect();
    writeln!(
        out,
        "# arch={} sensors={} cols={} outputs={} hidden={} count={}",
        p.arch.name(),
        p.n_sensors,
        p.n_cols,
        p.n_outputs,
        hidden.join("x"),
        p.weights.len()
    )?;
    for w in &p.weights {
        writeln!(out, "{w:e}")?;
    }
    Ok(())
}
