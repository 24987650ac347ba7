//! MRF1 frame files and comma-separated ground-truth tracks.
//!
//! MRF1 layout, all little-endian:
//!
//! ```text
//! "MRF1" | version u32 | Q u32 | Mc u32 | Ms u32 | frames u32
//! f0 f64 | B f64 | Tc f64 | tx (x, y) f64 | rx_1..rx_Q (x, y) f64
//! payload: per frame, per receiver, Mc x Ms row-major (re, im) f64 pairs
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{binding_hash, LocationGrid, SceneGeometry, Vec2, WaveformConfig};
use crate::synth::Frame;

pub const FRAME_FILE_MAGIC: &[u8; 4] = b"MRF1";
pub const FRAME_FILE_VERSION: u32 = 1;

const FIXED_HEADER: usize = 4 + 5 * 4 + 3 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFileHeader {
    pub version: u32,
    pub receivers: u32,
    pub chirps: u32,
    pub samples: u32,
    pub frame_count: u32,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub chirp_duration_s: f64,
    pub tx: Vec2,
    pub rx: Vec<Vec2>,
}

impl FrameFileHeader {
    pub fn new(cfg: &WaveformConfig, geom: &SceneGeometry, frame_count: usize) -> Self {
        Self {
            version: FRAME_FILE_VERSION,
            receivers: geom.receivers() as u32,
            chirps: cfg.chirps() as u32,
            samples: cfg.samples() as u32,
            frame_count: frame_count as u32,
            carrier_hz: cfg.carrier_hz(),
            bandwidth_hz: cfg.bandwidth_hz(),
            chirp_duration_s: cfg.chirp_duration_s(),
            tx: geom.tx(),
            rx: geom.rx().to_vec(),
        }
    }

    /// Header size in bytes.
    pub fn encoded_len(&self) -> usize {
        FIXED_HEADER + (self.rx.len() + 1) * 16
    }

    /// Payload size in bytes implied by the header.
    pub fn payload_len(&self) -> u128 {
        self.frame_count as u128 * self.receivers as u128 * self.chirps as u128 * self.samples as u128 * 16
    }

    /// Waveform echoed by the header; the speed of light is not stored.
    pub fn waveform(&self, speed_of_light: f64) -> Result<WaveformConfig> {
        WaveformConfig::with_speed_of_light(
            self.carrier_hz,
            self.bandwidth_hz,
            self.chirp_duration_s,
            self.chirps as usize,
            self.samples as usize,
            speed_of_light,
        )
    }

    pub fn geometry(&self) -> Result<SceneGeometry> {
        SceneGeometry::new(self.tx, self.rx.clone())
    }

    /// Binding hash of this capture against a lattice, comparable with
    /// [`crate::interp::HopTable::hash`].
    pub fn binding_hash(&self, speed_of_light: f64, grid: &LocationGrid) -> Result<u64> {
        Ok(binding_hash(&self.waveform(speed_of_light)?, &self.geometry()?, grid))
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        if frame.receivers() != self.receivers as usize
            || frame.chirps() != self.chirps as usize
            || frame.samples() != self.samples as usize
        {
            return Err(Error::Shape(format!(
                "frame is Q={} x {} x {}, header declares Q={} x {} x {}",
                frame.receivers(),
                frame.chirps(),
                frame.samples(),
                self.receivers,
                self.chirps,
                self.samples
            )));
        }
        Ok(())
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(FRAME_FILE_MAGIC)?;
        for v in [
            self.version,
            self.receivers,
            self.chirps,
            self.samples,
            self.frame_count,
        ] {
            w.write_u32::<LittleEndian>(v)?;
        }
        for v in [self.carrier_hz, self.bandwidth_hz, self.chirp_duration_s] {
            w.write_f64::<LittleEndian>(v)?;
        }
        for p in std::iter::once(&self.tx).chain(&self.rx) {
            w.write_f64::<LittleEndian>(p.x)?;
            w.write_f64::<LittleEndian>(p.y)?;
        }
        Ok(())
    }

    fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FIXED_HEADER {
            return Err(Error::Format(format!(
                "frame file truncated: expected at least {FIXED_HEADER} header bytes, found {}",
                bytes.len()
            )));
        }
        if &bytes[..4] != FRAME_FILE_MAGIC {
            return Err(Error::Format(format!("bad frame file magic {:?}", &bytes[..4])));
        }
        let mut cur = &bytes[4..];
        let mut u = || cur.read_u32::<LittleEndian>().expect("length checked");
        let (version, receivers, chirps, samples, frame_count) = (u(), u(), u(), u(), u());
        if version != FRAME_FILE_VERSION {
            return Err(Error::Format(format!("unsupported frame file version {version}")));
        }
        let mut f = || cur.read_f64::<LittleEndian>().expect("length checked");
        let (carrier_hz, bandwidth_hz, chirp_duration_s) = (f(), f(), f());
        let points = receivers as usize + 1;
        let needed = FIXED_HEADER + points * 16;
        if bytes.len() < needed {
            return Err(Error::Format(format!(
                "frame file truncated: expected at least {needed} header bytes, found {}",
                bytes.len()
            )));
        }
        let mut pts = Vec::with_capacity(points);
        for _ in 0..points {
            let x = cur.read_f64::<LittleEndian>().expect("length checked");
            let y = cur.read_f64::<LittleEndian>().expect("length checked");
            pts.push(Vec2::new(x, y));
        }
        Ok(Self {
            version,
            receivers,
            chirps,
            samples,
            frame_count,
            carrier_hz,
            bandwidth_hz,
            chirp_duration_s,
            tx: pts[0],
            rx: pts[1..].to_vec(),
        })
    }
}

/// Writes `frames` after `header`. The header's frame count must match.
pub fn write_frames(path: impl AsRef<Path>, header: &FrameFileHeader, frames: &[Frame]) -> Result<()> {
    let path = path.as_ref();
    if header.frame_count as usize != frames.len() {
        return Err(Error::Shape(format!(
            "header declares {} frames, {} given",
            header.frame_count,
            frames.len()
        )));
    }
    if header.version != FRAME_FILE_VERSION {
        return Err(Error::Format(format!(
            "cannot write frame file version {}",
            header.version
        )));
    }
    for frame in frames {
        header.check_frame(frame)?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        header.write_to(&mut w)?;
        for frame in frames {
            for ch in frame.channels() {
                for z in ch.iter() {
                    w.write_f64::<LittleEndian>(z.re)?;
                    w.write_f64::<LittleEndian>(z.im)?;
                }
            }
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

/// Reads an MRF1 file. The payload length must match the header exactly.
pub fn read_frames(path: impl AsRef<Path>) -> Result<(FrameFileHeader, Vec<Frame>)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_frames(&bytes)
}

/// In-memory counterpart of [`read_frames`].
pub fn decode_frames(bytes: &[u8]) -> Result<(FrameFileHeader, Vec<Frame>)> {
    let header = FrameFileHeader::parse(bytes)?;
    let expected = header.encoded_len() as u128 + header.payload_len();
    if bytes.len() as u128 != expected {
        return Err(Error::Format(format!(
            "frame file length: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let (q, mc, ms) = (
        header.receivers as usize,
        header.chirps as usize,
        header.samples as usize,
    );
    let mut cur = &bytes[header.encoded_len()..];
    let mut frames = Vec::with_capacity(header.frame_count as usize);
    for _ in 0..header.frame_count {
        let mut channels = Vec::with_capacity(q);
        for _ in 0..q {
            let ch = Array2::from_shape_simple_fn((mc, ms), || {
                let re = cur.read_f64::<LittleEndian>().expect("length checked");
                let im = cur.read_f64::<LittleEndian>().expect("length checked");
                Complex64::new(re, im)
            });
            channels.push(ch);
        }
        if channels.is_empty() {
            return Err(Error::Format("frame file declares zero receivers".into()));
        }
        frames.push(Frame::new(channels)?);
    }
    Ok((header, frames))
}

/// One ground-truth sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub time_s: f64,
    pub position: Vec2,
    pub velocity: Vec2,
}

/// Parses `time,x0,x1,v0,v1` lines; blank lines and `#` comments are skipped.
pub fn parse_truth_track<R: BufRead>(reader: R) -> Result<Vec<TruthRecord>> {
    let mut out: Vec<TruthRecord> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 fields (time,x0,x1,v0,v1), found {}", fields.len()),
            });
        }
        let mut vals = [0.0; 5];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("invalid number {f:?}"),
                })?;
        }
        if let Some(prev) = out.last() {
            if vals[0] <= prev.time_s {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("time {} does not increase past {}", vals[0], prev.time_s),
                });
            }
        }
        out.push(TruthRecord {
            time_s: vals[0],
            position: Vec2::new(vals[1], vals[2]),
            velocity: Vec2::new(vals[3], vals[4]),
        });
    }
    Ok(out)
}

pub fn read_truth_track(path: impl AsRef<Path>) -> Result<Vec<TruthRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_truth_track(BufReader::new(file))
}

/// Writes a track with shortest round-trip decimal formatting.
pub fn write_truth_track(path: impl AsRef<Path>, track: &[TruthRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "# time,x0,x1,v0,v1")?;
        for t in track {
            writeln!(
                w,
                "{:?},{:?},{:?},{:?},{:?}",
                t.time_s, t.position.x, t.position.y, t.velocity.x, t.velocity.y
            )?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}
