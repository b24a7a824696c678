use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::kinematics::BendState;

/// One line of the trajectory log. Field order is part of the format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub tick: u64,
    pub t_s: f64,
    pub positions_mm: BTreeMap<u8, f64>,
    pub bends_deg: BendState,
    pub faults: Vec<u8>,
}

/// JSON-lines trajectory writer.
pub struct TrajectoryLog<W: Write> {
    out: W,
    records: u64,
}

impl<W: Write> TrajectoryLog<W> {
    pub fn new(out: W) -> Self {
        Self { out, records: 0 }
    }

    pub fn append(&mut self, record: &TrajectoryRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn into_inner(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
