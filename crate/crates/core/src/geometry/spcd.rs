//! SPCD point-cloud binary format.
//!
//! Layout: magic `SPCD`, u32 LE version (=1), u32 LE point count, u8
//! has_color flag, count x 3 f32 LE xyz, then (if flagged) count x 3 f32
//! LE rgb.

use std::io::{Read, Write};

use thiserror::Error;

use super::{PointCloud, Vec3};

pub const MAGIC: &[u8; 4] = b"SPCD";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SpcdError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes, not an SPCD file")]
    BadMagic,
    #[error("unsupported SPCD version {0}")]
    BadVersion(u32),
}

pub fn write_spcd<W: Write>(w: &mut W, cloud: &PointCloud) -> Result<(), SpcdError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(cloud.points.len() as u32).to_le_bytes())?;
    w.write_all(&[cloud.colors.is_some() as u8])?;
    for p in &cloud.points {
        for v in [p.x, p.y, p.z] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    if let Some(colors) = &cloud.colors {
        for c in colors {
            for v in c {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_spcd<R: Read>(r: &mut R) -> Result<PointCloud, SpcdError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SpcdError::BadMagic);
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(SpcdError::BadVersion(version));
    }
    r.read_exact(&mut buf4)?;
    let count = u32::from_le_bytes(buf4) as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;

    let read_f32 = |r: &mut R| -> Result<f32, SpcdError> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        Ok(f32::from_le_bytes(b))
    };

    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let x = read_f32(r)? as f64;
        let y = read_f32(r)? as f64;
        let z = read_f32(r)? as f64;
        points.push(Vec3::new(x, y, z));
    }
    let colors = if flag[0] != 0 {
        let mut cs = Vec::with_capacity(count);
        for _ in 0..count {
            cs.push([read_f32(r)?, read_f32(r)?, read_f32(r)?]);
        }
        Some(cs)
    } else {
        None
    };
    Ok(PointCloud { points, colors })
}
