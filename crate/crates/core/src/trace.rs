//! Optional per-cycle event log, written as CSV with the columns
//! `cycle,slice_id,spe_id,event,value`.

use std::fmt;
use std::io::{self, Write};

use crate::precision::{AccWord, Precision};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// Live MAC; value is the accumulator after the cycle.
    Mac,
    /// Accumulator handed to the extraction logic at a tile boundary.
    Release,
    /// Value leaving on `c_data` (spe_id names its source SPE).
    Extract,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceKind::Mac => "mac",
            TraceKind::Release => "release",
            TraceKind::Extract => "extract",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub slice_id: usize,
    pub spe_row: u8,
    pub spe_col: u8,
    pub event: TraceKind,
    pub value: f64,
}

impl TraceEvent {
    pub fn spe(cycle: u64, slice_id: usize, row: usize, col: usize, event: TraceKind, p: Precision, acc: AccWord) -> Self {
        Self {
            cycle,
            slice_id,
            spe_row: row as u8,
            spe_col: col as u8,
            event,
            value: p.acc_to_f64(acc),
        }
    }

    /// SPE label as in the slice diagrams ("SPE12" is row 1, column 2).
    pub fn spe_id(&self) -> String {
        format!("SPE{}{}", self.spe_row, self.spe_col)
    }
}

pub fn write_csv<W: Write>(mut out: W, events: &[TraceEvent]) -> io::Result<()> {
    writeln!(out, "cycle,slice_id,spe_id,event,value")?;
    for e in events {
        writeln!(out, "{},{},{},{},{}", e.cycle, e.slice_id, e.spe_id(), e.event, e.value)?;
    }
    Ok(())
}
