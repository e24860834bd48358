//! Binary grid snapshots (`.dogm`), correction grids (`.dogc`) and the text
//! particle dump. All binary values are little-endian.

use crate::belief::{CellBelief, State};
use crate::error::{DogmError, Result};
use crate::fusion::CorrectionCell;
use crate::geometry::Pose2;
use crate::grid::{Grid, GridSpec};
use crate::particles::Particle;
use crate::update::DogmFrame;
use std::fmt::Write as _;
use std::path::Path;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"DOGM";
pub const CORRECTION_MAGIC: &[u8; 4] = b"DOGC";
pub const FORMAT_VERSION: u16 = 1;

pub fn snapshot_file_name(frame_index: u64) -> String {
    format!("frame_{frame_index:06}.dogm")
}

pub fn correction_file_name(frame_index: u64) -> String {
    format!("frame_{frame_index:06}.dogc")
}

/// Decoded `.dogm` contents. Probabilities are stored as `f32`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub width: usize,
    pub height: usize,
    pub resolution: f32,
    pub ego_pose: Pose2,
    pub timestamp: f64,
    pub cells: Vec<[f32; 4]>,
}

impl Snapshot {
    /// Rebuilds a frame on the world-anchored lattice. Velocities are not
    /// stored and come back empty.
    pub fn to_frame(&self) -> Result<DogmFrame> {
        // shortest decimal that round-trips the stored f32, so 0.2 comes back as 0.2
        let resolution: f64 = self.resolution.to_string().parse().unwrap_or(f64::from(self.resolution));
        let spec = GridSpec::centered(self.width, self.height, resolution);
        spec.validate()?;
        let mut frame = DogmFrame::new(spec, self.ego_pose, self.timestamp);
        let cells = self
            .cells
            .iter()
            .map(|c| CellBelief::from_weights(c.map(f64::from)).unwrap_or(CellBelief::unknown()))
            .collect();
        frame.cells = Grid::from_vec(self.width, self.height, cells)?;
        Ok(frame)
    }
}

pub fn encode_snapshot(frame: &DogmFrame) -> Vec<u8> {
    let spec = &frame.spec;
    let mut out = Vec::with_capacity(50 + spec.cell_count() * 16);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.width_cells as u32).to_le_bytes());
    out.extend_from_slice(&(spec.height_cells as u32).to_le_bytes());
    out.extend_from_slice(&(spec.resolution as f32).to_le_bytes());
    for v in [frame.ego_pose.x, frame.ego_pose.y, frame.ego_pose.yaw, frame.timestamp] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for b in frame.cells.iter() {
        for p in b.probs() {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let mut r = Reader::new("DOGM", bytes);
    r.magic(SNAPSHOT_MAGIC)?;
    r.version()?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let resolution = r.f32()?;
    let ego_pose = Pose2::new(r.f64()?, r.f64()?, r.f64()?);
    let timestamp = r.f64()?;
    let n = r.cell_count(width, height, 16)?;
    let mut cells = Vec::with_capacity(n);
    for _ in 0..n {
        cells.push([r.f32()?, r.f32()?, r.f32()?, r.f32()?]);
    }
    r.finish()?;
    Ok(Snapshot {
        width,
        height,
        resolution,
        ego_pose,
        timestamp,
        cells,
    })
}

pub fn encode_correction(cells: &Grid<CorrectionCell>) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + cells.len() * 5);
    out.extend_from_slice(CORRECTION_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(cells.width() as u32).to_le_bytes());
    out.extend_from_slice(&(cells.height() as u32).to_le_bytes());
    for c in cells.iter() {
        out.push(c.state as u8);
        out.extend_from_slice(&c.confidence.to_le_bytes());
    }
    out
}

pub fn decode_correction(bytes: &[u8]) -> Result<Grid<CorrectionCell>> {
    let mut r = Reader::new("DOGC", bytes);
    r.magic(CORRECTION_MAGIC)?;
    r.version()?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let n = r.cell_count(width, height, 5)?;
    let mut cells = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.pos;
        let raw = r.u8()?;
        let state = State::from_u8(raw).ok_or_else(|| r.err_at(at, format!("state byte {raw} out of range")))?;
        let at = r.pos;
        let confidence = r.f32()?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(r.err_at(at, format!("confidence {confidence} outside [0, 1]")));
        }
        cells.push(CorrectionCell { state, confidence });
    }
    r.finish()?;
    Grid::from_vec(width, height, cells)
}

pub fn write_snapshot(path: &Path, frame: &DogmFrame) -> Result<()> {
    std::fs::write(path, encode_snapshot(frame))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    decode_snapshot(&std::fs::read(path)?)
}

pub fn write_correction(path: &Path, cells: &Grid<CorrectionCell>) -> Result<()> {
    std::fs::write(path, encode_correction(cells))?;
    Ok(())
}

/// One particle per line: `x y vx vy w age`.
pub fn format_particles(particles: &[Particle]) -> String {
    let mut s = String::with_capacity(particles.len() * 64);
    for p in particles {
        let _ = writeln!(s, "{} {} {} {} {} {}", p.pos.x, p.pos.y, p.vel.x, p.vel.y, p.weight, p.age);
    }
    s
}

struct Reader<'a> {
    format: &'static str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(format: &'static str, bytes: &'a [u8]) -> Self {
        Self { format, bytes, pos: 0 }
    }

    fn err_at(&self, offset: usize, reason: String) -> DogmError {
        DogmError::Format {
            format: self.format,
            offset,
            reason,
        }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(self.err_at(
                self.bytes.len(),
                format!("truncated: needed {N} bytes at offset {}", self.pos),
            ));
        }
        let mut a = [0u8; N];
        a.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(a)
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let m = self.take::<4>()?;
        if &m != expect {
            return Err(self.err_at(0, format!("bad magic {m:?}")));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let at = self.pos;
        let v = u16::from_le_bytes(self.take()?);
        if v != FORMAT_VERSION {
            return Err(self.err_at(at, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn cell_count(&self, width: usize, height: usize, cell_bytes: usize) -> Result<usize> {
        let n = width
            .checked_mul(height)
            .filter(|&n| n > 0)
            .ok_or_else(|| self.err_at(self.pos - 8, format!("invalid dimensions {width}x{height}")))?;
        let need = n.saturating_mul(cell_bytes);
        if self.bytes.len() - self.pos < need {
            let whole = (self.bytes.len() - self.pos) / cell_bytes;
            return Err(self.err_at(
                self.pos + whole * cell_bytes,
                format!("truncated: {n} cells declared, {whole} present"),
            ));
        }
        Ok(n)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.err_at(self.pos, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}
