//! Snapshot, history and time-series files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::History;
use crate::error::{Error, Result};
use crate::grid::PhaseSpaceGrid;
use crate::kinematics::LightSpeed;
use crate::vlasov::SimState;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"VML1";

/// The raw contents of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: PhaseSpaceGrid,
    pub c: LightSpeed,
    pub t: f64,
    /// One array per species, x-major with p2 fastest.
    pub f: Vec<Vec<f64>>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub b: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(state: &SimState, grid: &PhaseSpaceGrid, c: LightSpeed) -> Self {
        Self {
            grid: *grid,
            c,
            t: state.t,
            f: state.f.values.clone(),
            e1: state.fields.e1.clone(),
            e2: state.fields.e2.clone(),
            b: state.fields.b.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(4 + 16 + 40 + 8 * (self.f.len() * g.len() + 3 * g.x.n));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        for d in [self.f.len(), g.x.n, g.p1.n, g.p2.n] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let c = match self.c {
            LightSpeed::Finite(c) => c,
            LightSpeed::Infinite => f64::INFINITY,
        };
        for s in [c, self.t, g.x.half_width, g.p1.half_width, g.p2.half_width] {
            out.extend_from_slice(&s.to_le_bytes());
        }
        for arr in self.f.iter().chain([&self.e1, &self.e2, &self.b]) {
            for v in arr {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != SNAPSHOT_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}, expected VML1")));
        }
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let [ns, nx, np1, np2] = dims;
        let c = r.f64()?;
        let t = r.f64()?;
        let (xw, p1w, p2w) = (r.f64()?, r.f64()?, r.f64()?);
        let grid = PhaseSpaceGrid::new(nx, np1, np2, xw, p1w, p2w)
            .map_err(|e| Error::Format(format!("header describes an invalid grid: {e}")))?;
        let expected = 4 + 16 + 40 + 8 * (ns * grid.len() + 3 * nx);
        if bytes.len() != expected {
            return Err(Error::Format(format!("length {} does not match header (expected {expected})", bytes.len())));
        }
        let c = if c == f64::INFINITY { LightSpeed::Infinite } else { LightSpeed::finite(c)? };
        let f = (0..ns).map(|_| r.f64s(grid.len())).collect::<Result<Vec<_>>>()?;
        let e1 = r.f64s(nx)?;
        let e2 = r.f64s(nx)?;
        let b = r.f64s(nx)?;
        Ok(Self { grid, c, t, f, e1, e2, b })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Read a snapshot; with `expected`, fail unless its grid matches.
    pub fn read(path: &Path, expected: Option<&PhaseSpaceGrid>) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let snap = Self::from_bytes(&bytes)?;
        if let Some(g) = expected {
            g.ensure_same(&snap.grid)?;
        }
        Ok(snap)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format(format!("truncated at byte {} of {}", self.bytes.len(), end)));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(8 * n)?.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
    }
}

pub fn write_history(history: &History, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, history).map_err(|e| Error::Format(e.to_string()))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<History> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Write rows of numbers under a header. Values use the shortest
/// representation that round-trips.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let emit = || -> std::io::Result<()> {
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(c: LightSpeed) -> Snapshot {
        let grid = PhaseSpaceGrid::new(9, 8, 10, 3.0, 2.0, 2.5).unwrap();
        let f = (0..2)
            .map(|a| (0..grid.len()).map(|i| ((i * 7 + a) as f64).sin() * 1e-3 + 0.1 / 3.0).collect())
            .collect();
        let nx = grid.x.n;
        Snapshot {
            grid,
            c,
            t: 0.3,
            f,
            e1: (0..nx).map(|i| i as f64 / 7.0).collect(),
            e2: vec![-0.0; nx],
            b: (0..nx).map(|i| f64::EPSILON * i as f64).collect(),
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        for c in [LightSpeed::Finite(8.0), LightSpeed::Infinite] {
            let s = sample(c);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.vml");
            s.write(&path).unwrap();
            let back = Snapshot::read(&path, Some(&s.grid)).unwrap();
            assert_eq!(back.to_bytes(), s.to_bytes());
            assert_eq!(back.c, c);
        }
    }

    #[test]
    fn header_layout() {
        let b = sample(LightSpeed::Infinite).to_bytes();
        assert_eq!(&b[..4], b"VML1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 9);
        assert_eq!(f64::from_le_bytes(b[20..28].try_into().unwrap()), f64::INFINITY);
    }

    #[test]
    fn truncated_and_foreign_files_fail() {
        let b = sample(LightSpeed::Finite(4.0)).to_bytes();
        assert!(matches!(Snapshot::from_bytes(&b[..b.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(Snapshot::from_bytes(&b[..10]), Err(Error::Format(_))));
        let mut bad = b.clone();
        bad[3] = b'2';
        assert!(matches!(Snapshot::from_bytes(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn cross_resolution_load_fails() {
        let s = sample(LightSpeed::Finite(4.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.vml");
        s.write(&path).unwrap();
        let other = s.grid.refined_x();
        assert!(matches!(Snapshot::read(&path, Some(&other)), Err(Error::GridMismatch(_))));
    }
}
