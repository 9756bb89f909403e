//! Binary Q-table files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field            | type                                   |
//! |------------------|----------------------------------------|
//! | magic            | `b"QTBL"`                              |
//! | version          | u32                                    |
//! | kind             | u8 logic tag                           |
//! | weights hash     | u64                                    |
//! | solver version   | u32                                    |
//! | axis count       | u32                                    |
//! | per axis         | name len u32, name, unit u8, kind u8, cut count u32, cuts f64 |
//! | action count     | u32                                    |
//! | stage count      | u32                                    |
//! | values           | f32, stage-major, vertex, action-minor |
//! | crc              | u32 CRC-32 of every preceding byte     |

use std::fs;
use std::path::Path;

use serde::Serialize;
use speedcas_core::grid::{Axis, AxisKind, DiscretizationGrid, Unit};
use speedcas_core::logic::{Advisory, LogicKind};
use speedcas_core::QTable;

use crate::error::{Error, Result, TableError};

pub const MAGIC: &[u8; 4] = b"QTBL";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(q: &QTable) -> Vec<u8> {
    let mut b = Vec::with_capacity(64 + q.values().len() * 4);
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    b.push(q.kind().tag());
    b.extend_from_slice(&q.weights_hash().to_le_bytes());
    b.extend_from_slice(&q.solver_version().to_le_bytes());
    let axes = q.grid().axes();
    b.extend_from_slice(&(axes.len() as u32).to_le_bytes());
    for a in axes {
        b.extend_from_slice(&(a.name().len() as u32).to_le_bytes());
        b.extend_from_slice(a.name().as_bytes());
        b.push(a.unit().tag());
        b.push(a.kind().tag());
        b.extend_from_slice(&(a.len() as u32).to_le_bytes());
        for c in a.cuts() {
            b.extend_from_slice(&c.to_le_bytes());
        }
    }
    b.extend_from_slice(&(q.actions().len() as u32).to_le_bytes());
    b.extend_from_slice(&(q.grid().stage_count() as u32).to_le_bytes());
    for v in q.values() {
        b.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    b
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> std::result::Result<&'a [u8], TableError> {
        let left = self.bytes.len() - self.pos;
        if n > left {
            return Err(corrupt(field, self.bytes.len(), format!("truncated: need {n} bytes, {left} left")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, field: &'static str) -> std::result::Result<u8, TableError> {
        Ok(self.take(1, field)?[0])
    }

    fn u32(&mut self, field: &'static str) -> std::result::Result<u32, TableError> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &'static str) -> std::result::Result<u64, TableError> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }
}

fn corrupt(field: &'static str, offset: usize, detail: impl Into<String>) -> TableError {
    TableError {
        field,
        offset: offset as u64,
        detail: detail.into(),
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<QTable, TableError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(corrupt("magic", 0, "expected QTBL"));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(corrupt("version", 4, format!("unsupported version {version}")));
    }
    let at = r.pos;
    let kind = LogicKind::from_tag(r.u8("kind")?).ok_or_else(|| corrupt("kind", at, "unknown logic tag"))?;
    let weights_hash = r.u64("weights hash")?;
    let solver_version = r.u32("solver version")?;
    let axes_at = r.pos;
    let n_axes = r.u32("axis count")? as usize;
    if n_axes == 0 || n_axes > speedcas_core::grid::MAX_AXES {
        return Err(corrupt("axis count", axes_at, format!("{n_axes} axes")));
    }
    let mut axes = Vec::with_capacity(n_axes);
    for _ in 0..n_axes {
        let at = r.pos;
        let len = r.u32("axis name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "axis name")?)
            .map_err(|_| corrupt("axis name", at + 4, "not UTF-8"))?
            .to_owned();
        let at = r.pos;
        let unit = Unit::from_tag(r.u8("axis unit")?).ok_or_else(|| corrupt("axis unit", at, "unknown unit tag"))?;
        let at = r.pos;
        let kind = AxisKind::from_tag(r.u8("axis kind")?).ok_or_else(|| corrupt("axis kind", at, "unknown kind tag"))?;
        let at = r.pos;
        let n = r.u32("cut count")? as usize;
        let raw = r.take(n.saturating_mul(8), "axis cuts")?;
        let cuts = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        axes.push(Axis::new(&name, unit, kind, cuts).map_err(|e| corrupt("axis cuts", at, e.to_string()))?);
    }
    let grid = DiscretizationGrid::new(axes).map_err(|e| corrupt("axes", axes_at, e.to_string()))?;
    let at = r.pos;
    let n_act = r.u32("action count")? as usize;
    let actions: Vec<Advisory> = kind
        .actions_for_count(n_act)
        .map_err(|e| corrupt("action count", at, e.to_string()))?;
    let at = r.pos;
    let stages = r.u32("stage count")? as usize;
    if stages != grid.stage_count() {
        return Err(corrupt(
            "stage count",
            at,
            format!("header says {stages}, grid has {}", grid.stage_count()),
        ));
    }
    let n = grid.vertex_count() * n_act;
    let values = r
        .take(n * 4, "values")?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let body = r.pos;
    let stored = r.u32("crc")?;
    if r.pos != bytes.len() {
        return Err(corrupt("crc", r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let actual = crc32fast::hash(&bytes[..body]);
    if stored != actual {
        return Err(corrupt(
            "crc",
            body,
            format!("stored {stored:08x}, computed {actual:08x}"),
        ));
    }
    QTable::new(kind, grid, actions, values, weights_hash, solver_version)
        .map_err(|e| corrupt("values", body, e.to_string()))
}

pub fn save(q: &QTable, path: &Path) -> Result<()> {
    fs::write(path, encode(q)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<QTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|source| Error::Table {
        path: path.to_owned(),
        source,
    })
}

#[derive(Serialize)]
struct Dump<'a> {
    kind: LogicKind,
    weights_hash: String,
    solver_version: u32,
    actions: &'a [Advisory],
    grid: &'a DiscretizationGrid,
    values: &'a [f32],
}

/// Human-readable JSON of a whole table.
pub fn dump_json(q: &QTable) -> String {
    let d = Dump {
        kind: q.kind(),
        weights_hash: format!("{:016x}", q.weights_hash()),
        solver_version: q.solver_version(),
        actions: q.actions(),
        grid: q.grid(),
        values: q.values(),
    };
    serde_json::to_string_pretty(&d).expect("table dump serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> QTable {
        let grid = DiscretizationGrid::new(vec![
            Axis::uniform("tau", Unit::Seconds, AxisKind::Stage, 0.0, 10.0, 2).unwrap(),
            Axis::uniform("r", Unit::Feet, AxisKind::Continuous, 0.0, 100.0, 3).unwrap(),
        ])
        .unwrap();
        let values = (0..24).map(|i| i as f32 * 0.25 - 3.0).collect();
        QTable::new(LogicKind::Speed, grid, LogicKind::Speed.actions(true), values, 0xfeed, 1).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let q = toy();
        let b = encode(&q);
        assert_eq!(decode(&b).unwrap(), q);
        assert_eq!(encode(&decode(&b).unwrap()), b);
    }

    #[test]
    fn flipped_value_byte_fails_crc() {
        let mut b = encode(&toy());
        let i = b.len() - 4 - 10;
        b[i] ^= 0x40;
        assert_eq!(decode(&b).unwrap_err().field, "crc");
    }

    #[test]
    fn truncation_reports_offset() {
        let b = encode(&toy());
        let values_start = b.len() - 4 - 24 * 4;
        let cut = values_start + 37;
        let e = decode(&b[..cut]).unwrap_err();
        assert_eq!(e.field, "values");
        assert_eq!(e.offset, cut as u64);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut b = encode(&toy());
        b[0] = b'X';
        assert_eq!(decode(&b).unwrap_err().field, "magic");
        let mut b = encode(&toy());
        b[4] = 9;
        assert_eq!(decode(&b).unwrap_err().field, "version");
    }
}
