//! CSV artifacts: per-step signal, block list, norm series.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::io::report::fmt_sig7;
use crate::signal::{Block, SwitchingSignal};

fn write_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv write failed: {other:?}")),
    }
}

/// `t,index` for every step of the horizon.
pub fn write_signal<W: Write>(out: W, signal: &SwitchingSignal) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "index"]).map_err(write_err)?;
    for (t, index) in signal.indices().enumerate() {
        w.write_record([t.to_string(), index.to_string()])
            .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `index,dwell` per block.
pub fn write_blocks<W: Write>(out: W, blocks: &[Block]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "dwell"]).map_err(write_err)?;
    for b in blocks {
        w.write_record([b.index.to_string(), b.dwell.to_string()])
            .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,norm` rows.
pub fn write_norms<W: Write>(out: W, rows: impl IntoIterator<Item = (u64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "norm"]).map_err(write_err)?;
    for (t, n) in rows {
        w.write_record([t.to_string(), fmt_sig7(n)])
            .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Deserialize)]
struct BlockRow {
    index: usize,
    dwell: u32,
}

/// Reads an `index,dwell` block list as written by [`write_blocks`].
pub fn read_blocks<R: Read>(input: R) -> Result<Vec<Block>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    r.deserialize::<BlockRow>()
        .map(|row| {
            row.map(|b| Block::new(b.index, b.dwell))
                .map_err(|e| Error::Parse {
                    location: e
                        .position()
                        .map_or_else(|| "blocks".to_string(), |p| format!("line {}", p.line())),
                    message: match e.kind() {
                        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                        other => format!("{other:?}"),
                    },
                })
        })
        .collect()
}
