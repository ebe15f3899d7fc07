//! Binary little-endian PLY in the common splat interchange layout. Owner
//! back-references are not representable and are dropped.

use crate::scene::{logit, sigmoid, SceneSnapshot};

/// Zeroth-order spherical-harmonic basis constant.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

const PROPERTIES: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
    "rot_3",
];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlyError {
    #[error("cannot export an empty scene")]
    Empty,
    #[error("unsupported PLY: {0}")]
    Unsupported(String),
}

/// Activated world-frame values read back from a PLY file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlyGaussians {
    pub positions: Vec<[f64; 3]>,
    pub colors: Vec<[f64; 3]>,
    pub opacities: Vec<f64>,
    pub scales: Vec<[f64; 3]>,
    /// Unit quaternions `(w, x, y, z)`.
    pub rotations: Vec<[f64; 4]>,
}

pub fn ply_header(count: usize) -> String {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\ncomment owners not stored\n");
    h.push_str(&format!("element vertex {count}\n"));
    for p in PROPERTIES {
        h.push_str(&format!("property float {p}\n"));
    }
    h.push_str("end_header\n");
    h
}

pub fn export_ply(snapshot: &SceneSnapshot) -> Result<Vec<u8>, PlyError> {
    if snapshot.is_empty() {
        return Err(PlyError::Empty);
    }
    let n = snapshot.len();
    let header = ply_header(n);
    let mut out = Vec::with_capacity(header.len() + n * PROPERTIES.len() * 4);
    out.extend_from_slice(header.as_bytes());
    for i in 0..n {
        let p = snapshot.world_positions[i];
        let c = snapshot.colors[i];
        let s = snapshot.world_log_scales[i];
        let q = snapshot.world_rotations[i];
        let row = [
            p.x,
            p.y,
            p.z,
            (c.x - 0.5) / SH_C0,
            (c.y - 0.5) / SH_C0,
            (c.z - 0.5) / SH_C0,
            logit(snapshot.opacities[i]),
            s.x,
            s.y,
            s.z,
            q[0],
            q[1],
            q[2],
            q[3],
        ];
        for v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn import_ply(bytes: &[u8]) -> Result<PlyGaussians, PlyError> {
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| PlyError::Unsupported("missing end_header".into()))?
        + marker.len();
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| PlyError::Unsupported("non-UTF-8 header".into()))?;
    let count: usize = header
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| PlyError::Unsupported("missing vertex count".into()))?;
    if header != ply_header(count) {
        return Err(PlyError::Unsupported("header does not match the splat layout".into()));
    }
    let body = &bytes[end..];
    if body.len() != count * PROPERTIES.len() * 4 {
        return Err(PlyError::Unsupported(format!("expected {count} vertices, body has {} bytes", body.len())));
    }
    let mut out = PlyGaussians::default();
    for rec in body.chunks_exact(PROPERTIES.len() * 4) {
        let v: Vec<f64> = rec.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect();
        out.positions.push([v[0], v[1], v[2]]);
        out.colors.push([0.5 + SH_C0 * v[3], 0.5 + SH_C0 * v[4], 0.5 + SH_C0 * v[5]]);
        out.opacities.push(sigmoid(v[6]));
        out.scales.push([v[7].exp(), v[8].exp(), v[9].exp()]);
        out.rotations.push([v[10], v[11], v[12], v[13]]);
    }
    Ok(out)
}
