//! Persistence: the binary operator container, CSV/PGM exports and content hashes.
//!
//! Operator container layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   b"BSKOPv01"
//! precision  u8        1 = complex64 (f32 pairs), 2 = complex128 (f64 pairs)
//! reserved   7 bytes   zero
//! rows       u64
//! cols       u64
//! elements   u64
//! blocks     u64
//! geom hash  u64
//! exc hash   u64
//! lambdas    blocks x f64
//! support    u64 length + JSON bytes
//! payload    rows x cols entries, row-major, (re, im) pairs
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::c64;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::forward::ForwardOperator;
use crate::geometry::SceneSupport;
use crate::linalg::CMat;

const MAGIC: &[u8; 8] = b"BSKOPv01";

/// First 8 bytes of the SHA-256 of the value's JSON encoding.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> u64 {
    let bytes = serde_json::to_vec(value).expect("value serializes to JSON");
    let digest = Sha256::digest(&bytes);
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Complex64,
    Complex128,
}

impl Precision {
    fn tag(self) -> u8 {
        match self {
            Precision::Complex64 => 1,
            Precision::Complex128 => 2,
        }
    }
}

pub fn write_operator(path: &Path, op: &ForwardOperator, precision: Precision) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[precision.tag(), 0, 0, 0, 0, 0, 0, 0])?;
    for v in [
        op.rows() as u64,
        op.cols() as u64,
        op.elements() as u64,
        op.blocks() as u64,
        op.geometry_hash(),
        op.excitation_hash(),
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for lambda in op.wavelengths() {
        w.write_all(&lambda.to_le_bytes())?;
    }
    let support = serde_json::to_vec(op.support())?;
    w.write_all(&(support.len() as u64).to_le_bytes())?;
    w.write_all(&support)?;
    let a = op.matrix();
    for i in 0..op.rows() {
        for j in 0..op.cols() {
            let z = a[(i, j)];
            match precision {
                Precision::Complex64 => {
                    w.write_all(&(z.re as f32).to_le_bytes())?;
                    w.write_all(&(z.im as f32).to_le_bytes())?;
                }
                Precision::Complex128 => {
                    w.write_all(&z.re.to_le_bytes())?;
                    w.write_all(&z.im.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

pub fn read_operator(path: &Path) -> Result<(ForwardOperator, Precision)> {
    let bad = |reason: &str| Error::Format {
        path: path.to_owned(),
        reason: reason.to_owned(),
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[..8] != MAGIC {
        return Err(bad("not an operator container"));
    }
    let precision = match head[8] {
        1 => Precision::Complex64,
        2 => Precision::Complex128,
        _ => return Err(bad("unknown precision tag")),
    };
    let rows = read_u64(&mut r)? as usize;
    let cols = read_u64(&mut r)? as usize;
    let elements = read_u64(&mut r)? as usize;
    let blocks = read_u64(&mut r)? as usize;
    let geometry_hash = read_u64(&mut r)?;
    let excitation_hash = read_u64(&mut r)?;
    if elements.checked_mul(blocks) != Some(rows) {
        return Err(bad("row count disagrees with elements x blocks"));
    }
    let wavelengths = (0..blocks)
        .map(|_| read_f64(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let support_len = read_u64(&mut r)? as usize;
    let mut support_bytes = vec![0u8; support_len];
    r.read_exact(&mut support_bytes)?;
    let support: SceneSupport = serde_json::from_slice(&support_bytes)?;
    let mut matrix = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            matrix[(i, j)] = match precision {
                Precision::Complex64 => {
                    c64::new(read_f32(&mut r)? as f64, read_f32(&mut r)? as f64)
                }
                Precision::Complex128 => c64::new(read_f64(&mut r)?, read_f64(&mut r)?),
            };
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after payload"));
    }
    let op = ForwardOperator::from_parts(
        matrix,
        elements,
        wavelengths,
        support,
        geometry_hash,
        excitation_hash,
    )?;
    Ok((op, precision))
}

/// One value per line with its index.
pub fn write_real_csv(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", header])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the value column written by [`write_real_csv`].
pub fn read_real_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v = rec
            .get(1)
            .ok_or_else(|| invalid("short CSV record"))?
            .parse::<f64>()
            .map_err(|e| invalid(format!("bad number in CSV: {e}")))?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_complex_csv(path: &Path, values: &[c64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "re", "im"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{:e}", v.re), format!("{:e}", v.im)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_complex_csv(path: &Path) -> Result<Vec<c64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| invalid("short CSV record"))?
                .parse::<f64>()
                .map_err(|e| invalid(format!("bad number in CSV: {e}")))
        };
        out.push(c64::new(parse(1)?, parse(2)?));
    }
    Ok(out)
}

/// Writes a table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// 8-bit binary PGM of a `rows x cols` row-major image, scaled so the largest absolute
/// value maps to 255 and negatives clip to 0.
pub fn write_pgm(path: &Path, values: &[f64], rows: usize, cols: usize) -> Result<()> {
    if values.len() != rows * cols {
        return Err(invalid(format!(
            "{} values cannot fill a {rows}x{cols} image",
            values.len()
        )));
    }
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bytes: Vec<u8> = values
        .iter()
        .map(|&v| {
            if peak == 0.0 {
                0
            } else {
                (255.0 * (v / peak).clamp(0.0, 1.0)).round() as u8
            }
        })
        .collect();
    let file = BufWriter::new(File::create(path)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&bytes, cols as u32, rows as u32, ExtendedColorType::L8)
        .map_err(|e| Error::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::build_operator;
    use crate::geometry::{
        make_array, make_excitation, AngularGrid, ArrayKind, RangeProfile, SceneKind, SpacingRule,
    };

    fn small_operator() -> ForwardOperator {
        let g = make_array(ArrayKind::Linear, &[5], 0.0375).unwrap();
        let e = make_excitation(0.075, 0.15, 3, SpacingRule::default()).unwrap();
        let s = SceneSupport::new(
            SceneKind::Slab,
            AngularGrid::new(&[6]).unwrap(),
            RangeProfile::Slab {
                r_min: 20.0,
                r_max: 20.15,
                samples: 2,
            },
        )
        .unwrap();
        build_operator(&g, &e, &s).unwrap()
    }

    #[test]
    fn container_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let op = small_operator();
        let p = dir.path().join("op.bin");
        write_operator(&p, &op, Precision::Complex128).unwrap();
        let (back, prec) = read_operator(&p).unwrap();
        assert_eq!(prec, Precision::Complex128);
        assert_eq!(back.matrix(), op.matrix());
        assert_eq!(back.support(), op.support());
        assert_eq!(back.wavelengths(), op.wavelengths());
        assert_eq!(back.geometry_hash(), op.geometry_hash());
        assert_eq!(back.excitation_hash(), op.excitation_hash());

        // Single precision: second round trip is bit-exact.
        let p32 = dir.path().join("op32.bin");
        write_operator(&p32, &op, Precision::Complex64).unwrap();
        let (once, _) = read_operator(&p32).unwrap();
        let p32b = dir.path().join("op32b.bin");
        write_operator(&p32b, &once, Precision::Complex64).unwrap();
        assert_eq!(std::fs::read(&p32).unwrap(), std::fs::read(&p32b).unwrap());
        let worst = (0..op.rows())
            .flat_map(|i| (0..op.cols()).map(move |j| (i, j)))
            .map(|(i, j)| (once.matrix()[(i, j)] - op.matrix()[(i, j)]).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6);
    }

    #[test]
    fn container_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.bin");
        std::fs::write(&p, b"not an operator at all").unwrap();
        assert!(matches!(read_operator(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn pgm_export_scales_to_peak() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.pgm");
        write_pgm(&p, &[0.0, 0.5, 1.0, -1.0], 2, 2).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 128, 255, 0]);
    }

    #[test]
    fn complex_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        let v = vec![c64::new(1.5, -2.0), c64::new(1e-17, 3.25)];
        write_complex_csv(&p, &v).unwrap();
        assert_eq!(read_complex_csv(&p).unwrap(), v);
    }

    #[test]
    fn hashes_track_content() {
        let a = make_array(ArrayKind::Linear, &[5], 0.01).unwrap();
        let b = make_array(ArrayKind::Linear, &[6], 0.01).unwrap();
        assert_eq!(content_hash(&a), content_hash(&a.clone()));
        assert_ne!(content_hash(&a), content_hash(&b));
    }
}
