//! State files: a JSON header next to a binary payload of row-major
//! little-endian `f64` values (orbitals concatenated, then the optional
//! density).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DensityField, Grid, OrbitalSet};
use crate::error::{Error, Result};

pub const STATE_FORMAT: &str = "ltlab-state";
pub const STATE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateHeader {
    pub format: String,
    pub version: u32,
    pub dimension: usize,
    pub box_corner: Vec<f64>,
    pub box_sides: Vec<f64>,
    pub grid_n: usize,
    pub occupations: Vec<f64>,
    pub family: String,
    pub seed: Option<u64>,
    pub num_orbitals: usize,
    pub has_density: bool,
    /// Payload file name, relative to the header.
    pub payload: String,
}

impl StateHeader {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.box_corner.clone(), self.box_sides.clone(), self.grid_n)
    }
}

/// Writes `<stem>.json` and `<stem>.bin` for the header at `header_path`.
pub fn write_state(
    header_path: &Path,
    state: &OrbitalSet,
    family: &str,
    seed: Option<u64>,
    include_density: bool,
) -> Result<()> {
    let payload_path = header_path.with_extension("bin");
    let payload_name = payload_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("bad state path {}", header_path.display())))?
        .to_string();
    let grid = state.grid();
    let header = StateHeader {
        format: STATE_FORMAT.into(),
        version: STATE_FORMAT_VERSION,
        dimension: grid.dimension(),
        box_corner: grid.corner.clone(),
        box_sides: grid.sides.clone(),
        grid_n: grid.n,
        occupations: state.occupations().to_vec(),
        family: family.into(),
        seed,
        num_orbitals: state.rank(),
        has_density: include_density,
        payload: payload_name,
    };

    let mut bytes = Vec::with_capacity(8 * grid.len() * (state.rank() + include_density as usize));
    for u in state.orbitals() {
        bytes.extend(u.iter().flat_map(|v| v.to_le_bytes()));
    }
    if include_density {
        bytes.extend(state.density().values().iter().flat_map(|v| v.to_le_bytes()));
    }
    fs::write(&payload_path, bytes)?;
    fs::write(header_path, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(())
}

pub struct LoadedState {
    pub header: StateHeader,
    pub state: OrbitalSet,
    pub stored_density: Option<DensityField>,
}

pub fn read_state(header_path: &Path) -> Result<LoadedState> {
    let format_error = |reason: String| Error::Format { path: header_path.to_path_buf(), reason };
    let header: StateHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    if header.format != STATE_FORMAT || header.version != STATE_FORMAT_VERSION {
        return Err(format_error(format!("unsupported format {} v{}", header.format, header.version)));
    }
    if header.occupations.len() != header.num_orbitals {
        return Err(format_error("occupation count does not match num_orbitals".into()));
    }
    let grid = header.grid()?;
    let payload_path: PathBuf = header_path.parent().unwrap_or(Path::new(".")).join(&header.payload);
    let bytes = fs::read(&payload_path)?;
    let cells = grid.len();
    let arrays = header.num_orbitals + header.has_density as usize;
    if bytes.len() != 8 * cells * arrays {
        return Err(format_error(format!("payload has {} bytes, expected {}", bytes.len(), 8 * cells * arrays)));
    }
    let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let orbitals: Vec<Vec<f64>> = (0..header.num_orbitals).map(|_| values.by_ref().take(cells).collect()).collect();
    let stored_density =
        if header.has_density { Some(DensityField::new(grid.clone(), values.collect())?) } else { None };
    let state = OrbitalSet::new(grid, orbitals, header.occupations.clone())?;
    Ok(LoadedState { header, state, stored_density })
}
