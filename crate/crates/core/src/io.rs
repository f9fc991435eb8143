//! Binary grid file format.
//!
//! Little-endian layout:
//!
//! | field      | type        |
//! |------------|-------------|
//! | magic      | `b"SGRD"`   |
//! | version    | u16         |
//! | width      | u16         |
//! | height     | u16         |
//! | cell_size  | f32         |
//! | agent_col  | u16         |
//! | agent_row  | u16         |
//! | timestamp  | f64         |
//! | cells      | width·height class-id bytes, row-major |

use std::io::{Read, Write};
use std::path::Path;

use crate::class::SemanticClass;
use crate::error::{Error, Result};
use crate::grid::{GridGeometry, SemanticGrid};

pub const GRID_MAGIC: &[u8; 4] = b"SGRD";
pub const GRID_VERSION: u16 = 1;
pub const GRID_HEADER_LEN: usize = 26;

fn u16_field(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} exceeds u16")))
}

pub fn encode_grid(grid: &SemanticGrid) -> Result<Vec<u8>> {
    let g = &grid.geometry;
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + grid.cells.len());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&GRID_VERSION.to_le_bytes());
    out.extend_from_slice(&u16_field(g.width, "width")?.to_le_bytes());
    out.extend_from_slice(&u16_field(g.height, "height")?.to_le_bytes());
    out.extend_from_slice(&g.cell_size.to_le_bytes());
    out.extend_from_slice(&u16_field(g.agent_col, "agent column")?.to_le_bytes());
    out.extend_from_slice(&u16_field(g.agent_row, "agent row")?.to_le_bytes());
    out.extend_from_slice(&grid.timestamp.to_le_bytes());
    out.extend(grid.cells.iter().map(|c| c.id()));
    Ok(out)
}

pub fn decode_grid(bytes: &[u8]) -> Result<SemanticGrid> {
    if bytes.len() < GRID_HEADER_LEN {
        return Err(Error::SizeMismatch { expected: GRID_HEADER_LEN, found: bytes.len() });
    }
    if &bytes[0..4] != GRID_MAGIC {
        return Err(Error::CorruptHeader("bad magic".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let version = u16_at(4);
    if version != GRID_VERSION {
        return Err(Error::CorruptHeader(format!("unsupported version {version}")));
    }
    let width = u16_at(6) as usize;
    let height = u16_at(8) as usize;
    let cell_size = f32::from_le_bytes(bytes[10..14].try_into().unwrap());
    let agent_col = u16_at(14) as usize;
    let agent_row = u16_at(16) as usize;
    let timestamp = f64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let geometry = GridGeometry { width, height, cell_size, agent_col, agent_row };
    geometry.validate().map_err(|e| Error::CorruptHeader(e.to_string()))?;
    let expected = GRID_HEADER_LEN + width * height;
    if bytes.len() != expected {
        return Err(Error::SizeMismatch { expected, found: bytes.len() });
    }
    let cells = bytes[GRID_HEADER_LEN..]
        .iter()
        .map(|&b| SemanticClass::from_id(b).ok_or(Error::InvalidClass(b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SemanticGrid { geometry, cells, timestamp })
}

pub fn write_grid(grid: &SemanticGrid, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_grid(grid)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<SemanticGrid> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_grid(&bytes)
}
