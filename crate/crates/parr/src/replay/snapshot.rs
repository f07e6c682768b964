//! Replay snapshot format.
//!
//! Records are written oldest to newest. Layout (little-endian):
//!
//! ```text
//! magic          8 bytes  "PARRRPL\0"
//! version        u32      1
//! capacity       u64
//! count          u64
//! next_insertion u64      total pushes ever performed
//! omega          f64
//! floor_eps      f64
//! obs_width      u64      feature width shared by all observations
//! records        count times:
//!   insertion_index u64
//!   s               f64 * obs_width
//!   a               u64
//!   r               f64
//!   s_next          f64 * obs_width
//!   terminal        u8
//!   q_pred          f64
//!   novelty         f64
//!   target          f64
//!   priority        f64
//! ```

use std::io::{Read, Write};

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::wire;

use super::{Experience, PriorityConfig, ReplayBuffer, ReplayRecord};

const MAGIC: &[u8; 8] = b"PARRRPL\0";
const VERSION: u32 = 1;

pub fn dump_snapshot(w: &mut dyn Write, buf: &ReplayBuffer) -> Result<()> {
    w.write_all(MAGIC)?;
    wire::write_u32(w, VERSION)?;
    wire::write_u64(w, buf.capacity() as u64)?;
    wire::write_u64(w, buf.len() as u64)?;
    wire::write_u64(w, buf.pushes())?;
    let cfg = buf.priority_config();
    wire::write_f64(w, cfg.omega)?;
    wire::write_f64(w, cfg.floor_eps)?;

    let order = buf.iterate_oldest_to_newest();
    let width = order
        .first()
        .map(|&i| buf.records()[i].exp.s.width())
        .unwrap_or(0);
    wire::write_u64(w, width as u64)?;

    for &i in &order {
        let rec = &buf.records()[i];
        if rec.exp.s.width() != width || rec.exp.s_next.width() != width {
            return Err(Error::Contract(
                "replay holds observations of differing widths".into(),
            ));
        }
        wire::write_u64(w, rec.insertion_index)?;
        wire::write_f64_slice(w, &rec.exp.s.features)?;
        wire::write_u64(w, rec.exp.a as u64)?;
        wire::write_f64(w, rec.exp.r)?;
        wire::write_f64_slice(w, &rec.exp.s_next.features)?;
        wire::write_bool(w, rec.exp.terminal)?;
        wire::write_f64(w, rec.q_pred)?;
        wire::write_f64(w, rec.novelty)?;
        wire::write_f64(w, rec.target)?;
        wire::write_f64(w, rec.priority)?;
    }
    Ok(())
}

pub fn load_snapshot(r: &mut dyn Read) -> Result<ReplayBuffer> {
    wire::expect_magic(r, MAGIC)?;
    wire::expect_version(r, VERSION)?;
    let capacity = wire::read_u64(r)? as usize;
    let count = wire::read_u64(r)? as usize;
    let next_insertion = wire::read_u64(r)?;
    let cfg = PriorityConfig {
        omega: wire::read_f64(r)?,
        floor_eps: wire::read_f64(r)?,
    };
    let width = wire::read_u64(r)? as usize;

    let mut records = Vec::with_capacity(count);
    let mut prev_index: Option<u64> = None;
    for _ in 0..count {
        let insertion_index = wire::read_u64(r)?;
        if let Some(prev) = prev_index {
            if insertion_index <= prev {
                return Err(Error::Format(
                    "snapshot records are not in insertion order".into(),
                ));
            }
        }
        prev_index = Some(insertion_index);
        let s = Observation::new(wire::read_f64_vec(r, width)?);
        let a = wire::read_u64(r)? as usize;
        let reward = wire::read_f64(r)?;
        let s_next = Observation::new(wire::read_f64_vec(r, width)?);
        let terminal = wire::read_bool(r)?;
        let q_pred = wire::read_f64(r)?;
        let novelty = wire::read_f64(r)?;
        let target = wire::read_f64(r)?;
        let priority = wire::read_f64(r)?;
        records.push(ReplayRecord {
            exp: Experience {
                s,
                a,
                r: reward,
                s_next,
                terminal,
            },
            q_pred,
            novelty,
            target,
            priority,
            insertion_index,
        });
    }

    ReplayBuffer::from_parts(capacity, cfg, next_insertion, records)
}

/// Serializes a buffer to bytes; handy for byte-equality assertions.
pub fn snapshot_bytes(buf: &ReplayBuffer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    dump_snapshot(&mut out, buf)?;
    Ok(out)
}
