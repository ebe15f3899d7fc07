//! Binary scene checkpoints.
//!
//! Layout: 8-byte magic, `u32` format version, `u64` payload length, the
//! payload, then the SHA-256 of everything before it. All integers and
//! floats are little-endian; floats are stored as raw IEEE-754 bits, so a
//! round trip is bitwise lossless.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::optim::{Instance, Moments, SceneState, LAYOUT_PARAMS};
use crate::scene::{GaussianGrads, InstanceGaussians, InstanceLayout, Learnable};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LSPLATCK";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 8;
const DIGEST: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch: file is truncated or corrupted")]
    Checksum,
    #[error("malformed checkpoint payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| CheckpointError::Malformed("unexpected end of payload".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn len(&mut self) -> Result<usize, CheckpointError> {
        let n = self.u64()?;
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(CheckpointError::Malformed(format!("length {n} exceeds payload")));
        }
        Ok(n as usize)
    }
    fn str(&mut self) -> Result<String, CheckpointError> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| CheckpointError::Malformed(e.to_string()))
    }
    fn f64s(&mut self, expected: usize) -> Result<Vec<f64>, CheckpointError> {
        let n = self.len()?;
        if n != expected {
            return Err(CheckpointError::Malformed(format!("array of {n} values, expected {expected}")));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn vec3(&mut self) -> Result<Vector3<f64>, CheckpointError> {
        Ok(Vector3::new(self.f64()?, self.f64()?, self.f64()?))
    }
}

fn write_groups(w: &mut Writer, groups: [&[f64]; 5]) {
    groups.iter().for_each(|g| w.f64s(g));
}

fn read_grads(r: &mut Reader<'_>, m: usize) -> Result<GaussianGrads, CheckpointError> {
    Ok(GaussianGrads {
        positions: r.f64s(3 * m)?,
        rotations: r.f64s(4 * m)?,
        scales_raw: r.f64s(3 * m)?,
        opacity_raw: r.f64s(m)?,
        colors_raw: r.f64s(3 * m)?,
    })
}

/// Serializes the complete optimizer state.
pub fn encode_checkpoint(state: &SceneState) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.str(&state.scene_prompt);
    w.u64(state.step as u64);
    w.u64(state.seed);
    w.u64(state.instances.len() as u64);
    for inst in &state.instances {
        let l = &inst.layout;
        w.str(&l.id);
        w.str(&l.prompt);
        l.center.iter().chain(l.extents.iter()).for_each(|v| w.f64(*v));
        w.f64(l.scale_factor);
        w.f64(l.yaw);
        w.f64(l.opacity_bias);
        for flag in [l.learnable.center, l.learnable.scale, l.learnable.yaw, l.learnable.opacity] {
            w.u8(flag as u8);
        }
        let g = &inst.gaussians;
        w.u64(g.len() as u64);
        write_groups(&mut w, [&g.positions, &g.rotations, &g.scales_raw, &g.opacity_raw, &g.colors_raw]);
        let m = &inst.moments;
        w.u64(m.t);
        write_groups(&mut w, m.first.groups());
        write_groups(&mut w, m.second.groups());
        m.layout_first.iter().chain(m.layout_second.iter()).for_each(|v| w.f64(*v));
    }
    let payload = w.0;

    let mut out = Vec::with_capacity(HEADER + payload.len() + DIGEST);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SceneState, CheckpointError> {
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < HEADER + DIGEST {
        return Err(CheckpointError::Checksum);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if len != (bytes.len() - HEADER - DIGEST) as u64 {
        return Err(CheckpointError::Checksum);
    }
    let body_end = bytes.len() - DIGEST;
    if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
        return Err(CheckpointError::Checksum);
    }
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }

    let mut r = Reader {
        buf: &bytes[HEADER..body_end],
        pos: 0,
    };
    let scene_prompt = r.str()?;
    let step = r.u64()? as usize;
    let seed = r.u64()?;
    let n = r.len()?;
    let mut instances = Vec::with_capacity(n);
    for _ in 0..n {
        let id = r.str()?;
        let prompt = r.str()?;
        let center = r.vec3()?;
        let extents = r.vec3()?;
        let scale_factor = r.f64()?;
        let yaw = r.f64()?;
        let opacity_bias = r.f64()?;
        let mut flags = [false; 4];
        for f in &mut flags {
            *f = r.u8()? != 0;
        }
        let layout = InstanceLayout {
            id,
            prompt,
            center,
            extents,
            scale_factor,
            yaw,
            learnable: Learnable {
                center: flags[0],
                scale: flags[1],
                yaw: flags[2],
                opacity: flags[3],
            },
            opacity_bias,
        };
        layout.validate().map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let m = r.len()?;
        let gaussians = InstanceGaussians {
            positions: r.f64s(3 * m)?,
            rotations: r.f64s(4 * m)?,
            scales_raw: r.f64s(3 * m)?,
            opacity_raw: r.f64s(m)?,
            colors_raw: r.f64s(3 * m)?,
        };
        let t = r.u64()?;
        let first = read_grads(&mut r, m)?;
        let second = read_grads(&mut r, m)?;
        let mut layout_first = [0.0; LAYOUT_PARAMS];
        let mut layout_second = [0.0; LAYOUT_PARAMS];
        for v in layout_first.iter_mut().chain(layout_second.iter_mut()) {
            *v = r.f64()?;
        }
        instances.push(Instance {
            layout,
            gaussians,
            moments: Moments {
                t,
                first,
                second,
                layout_first,
                layout_second,
            },
        });
    }
    if r.pos != r.buf.len() {
        return Err(CheckpointError::Malformed("trailing bytes after payload".into()));
    }
    Ok(SceneState {
        scene_prompt,
        instances,
        step,
        seed,
    })
}

/// Writes via a temporary sibling and a rename, so readers never observe a
/// partially written checkpoint.
pub fn save_checkpoint(state: &SceneState, path: &Path) -> Result<(), CheckpointError> {
    let bytes = encode_checkpoint(state);
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SceneState, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}
