//! Binary field snapshots and versioned CSV tables.
//!
//! Snapshot layout, all little-endian:
//!
//! | offset | size | content |
//! |-------:|-----:|---------|
//! | 0 | 4 | magic `MSLB` |
//! | 4 | 4 | `u32` format version (1) |
//! | 8 | 4 | `u32` points per axis `n` |
//! | 12 | 1 | `u8` kind: 0 temperature only, 1 velocity, field and temperature |
//! | 13 | 3 | zero padding |
//! | 16 | 8 | `u64` trajectory id |
//! | 24 | 8 | `f64` time |
//! | 32 | 64 | `f64` ε, δ, ν, κ, λ, b₀ₓ, b₀ᵧ, b₀𝓏 |
//! | 96 | .. | coefficients |
//!
//! Coefficients are complex numbers stored as two `f64` (real, imaginary) in lattice
//! order `(i0·n + i1)·n + i2`, one block of `n³` per scalar field: `θ` for kind 0,
//! `U₁ U₂ U₃ B₁ B₂ B₃ Θ` for kind 1.
//!
//! CSV tables start with a `# mslab <schema> v<version>` line followed by a header row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FullState, LimitState, Observation, SystemState, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::spectral::{Grid, PhysParams, SpectralScalar, SpectralVector};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"MSLB";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const CSV_VERSION: u32 = 1;
const HEADER_LEN: usize = 96;

/// A single state with the parameters it was produced under.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub traj: u64,
    pub params: PhysParams,
    pub state: SystemState,
}

fn fields(state: &SystemState) -> Vec<&SpectralScalar> {
    match state {
        SystemState::Limit(s) => vec![&s.theta],
        SystemState::Full(s) => s.u.comps.iter().chain(s.b.comps.iter()).chain(std::iter::once(&s.theta)).collect(),
    }
}

pub fn encode_snapshot(snap: &Snapshot) -> Vec<u8> {
    let fs = fields(&snap.state);
    let grid = fs[0].grid();
    let mut out = Vec::with_capacity(HEADER_LEN + fs.len() * grid.len() * 16);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.push(matches!(snap.state, SystemState::Full(_)) as u8);
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&snap.traj.to_le_bytes());
    let p = &snap.params;
    for v in [snap.state.time(), p.eps, p.delta, p.nu, p.kappa, p.lambda, p.b0[0], p.b0[1], p.b0[2]] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for f in fs {
        for c in f.coeffs() {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    if bytes.len() < HEADER_LEN {
        return Err(bad("snapshot shorter than its header"));
    }
    if &bytes[0..4] != SNAPSHOT_MAGIC {
        return Err(bad("not a snapshot file (bad magic)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != SNAPSHOT_VERSION {
        return Err(bad(format!("unsupported snapshot version {version}")));
    }
    let n = u32_at(8) as usize;
    let kind = bytes[12];
    let traj = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let time = f64_at(24);
    let h: Vec<f64> = (0..8).map(|i| f64_at(32 + 8 * i)).collect();
    let params = PhysParams { eps: h[0], delta: h[1], nu: h[2], kappa: h[3], lambda: h[4], b0: [h[5], h[6], h[7]] };
    let grid: Arc<Grid> = Grid::new(n)?;
    let count = match kind {
        0 => 1,
        1 => 7,
        k => return Err(bad(format!("unknown snapshot kind {k}"))),
    };
    let need = HEADER_LEN + count * grid.len() * 16;
    if bytes.len() != need {
        return Err(bad(format!("snapshot has {} bytes, expected {need}", bytes.len())));
    }
    let mut fs = Vec::with_capacity(count);
    for f in 0..count {
        let base = HEADER_LEN + f * grid.len() * 16;
        let coeffs: Vec<Complex64> =
            (0..grid.len()).map(|i| Complex64::new(f64_at(base + 16 * i), f64_at(base + 16 * i + 8))).collect();
        fs.push(SpectralScalar::from_coeffs(&grid, coeffs)?);
    }
    let state = if kind == 0 {
        SystemState::Limit(LimitState { theta: fs.pop().unwrap(), time })
    } else {
        let theta = fs.pop().unwrap();
        let mut it = fs.into_iter();
        let mut next3 = || -> SpectralVector {
            SpectralVector::new([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
        };
        let u = next3();
        let b = next3();
        SystemState::Full(FullState { u, b, theta, time })
    };
    Ok(Snapshot { traj, params, state })
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode_snapshot(snap))?;
    f.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    })
}

/// Reads every `*.mslb` file of a directory, ordered by file name.
pub fn read_snapshot_dir(dir: &Path) -> Result<Vec<Snapshot>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mslb"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("no .mslb snapshots in {}", dir.display())));
    }
    paths.iter().map(|p| read_snapshot(p)).collect()
}

/// Writes a CSV table preceded by its schema line.
pub fn write_table<T: Serialize, W: Write>(out: W, schema: &str, rows: &[T]) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "# mslab {schema} v{CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| bad(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_file<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    write_table(File::create(path)?, schema, rows)
}

pub fn read_table<T: DeserializeOwned, R: Read>(input: R, schema: &str) -> Result<Vec<T>> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    let want = format!("# mslab {schema} v{CSV_VERSION}");
    if first.trim_end() != want {
        return Err(bad(format!("expected schema line `{want}`, found `{}`", first.trim_end())));
    }
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(|e| bad(e.to_string()))).collect()
}

pub fn read_table_file<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    read_table(File::open(path)?, schema).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub const TRAJECTORY_SCHEMA: &str = "trajectories";

/// One line of the trajectory table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub traj: u64,
    pub time: f64,
    pub theta_l2sq: f64,
    pub theta_h1sq: f64,
    pub theta_lp: f64,
    pub u_l2sq: f64,
    pub u_h1sq: f64,
    pub b_l2sq: f64,
    pub b_h1sq: f64,
    pub cum_theta_h1sq: f64,
    pub cum_u_h1sq: f64,
    pub cum_b_h1sq: f64,
    pub martingale: f64,
    pub quad_var: f64,
}

impl ObservationRow {
    pub fn new(traj: u64, o: &Observation) -> Self {
        ObservationRow {
            traj,
            time: o.time,
            theta_l2sq: o.theta_l2sq,
            theta_h1sq: o.theta_h1sq,
            theta_lp: o.theta_lp,
            u_l2sq: o.u_l2sq,
            u_h1sq: o.u_h1sq,
            b_l2sq: o.b_l2sq,
            b_h1sq: o.b_h1sq,
            cum_theta_h1sq: o.cum_theta_h1sq,
            cum_u_h1sq: o.cum_u_h1sq,
            cum_b_h1sq: o.cum_b_h1sq,
            martingale: o.martingale,
            quad_var: o.quad_var,
        }
    }

    pub fn observation(&self) -> Observation {
        Observation {
            time: self.time,
            theta_l2sq: self.theta_l2sq,
            theta_h1sq: self.theta_h1sq,
            theta_lp: self.theta_lp,
            u_l2sq: self.u_l2sq,
            u_h1sq: self.u_h1sq,
            b_l2sq: self.b_l2sq,
            b_h1sq: self.b_h1sq,
            cum_theta_h1sq: self.cum_theta_h1sq,
            cum_u_h1sq: self.cum_u_h1sq,
            cum_b_h1sq: self.cum_b_h1sq,
            martingale: self.martingale,
            quad_var: self.quad_var,
        }
    }
}

pub fn trajectory_rows(trajs: &[TrajectoryRecord]) -> Vec<ObservationRow> {
    trajs.iter().flat_map(|t| t.observations.iter().map(move |o| ObservationRow::new(t.traj, o))).collect()
}

/// Groups rows back into per-trajectory series, in order of first appearance.
pub fn group_rows(rows: &[ObservationRow]) -> Vec<(u64, Vec<Observation>)> {
    let mut out: Vec<(u64, Vec<Observation>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(t, _)| *t == r.traj) {
            Some((_, v)) => v.push(r.observation()),
            None => out.push((r.traj, vec![r.observation()])),
        }
    }
    out
}
