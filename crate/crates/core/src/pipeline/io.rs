//! On-disk formats.
//!
//! GMAT: `b"GMAT"`, `u32` version (1), `u32` rows, `u32` cols, then
//! `rows × cols` little-endian `f64` in row-major order. Several GMAT records
//! may be concatenated in one file; multi-matrix files (points, Gram
//! tensors) start with a small header record.
//!
//! CSV matrices have no header and print every value with 17 significant
//! digits. Label files are `index,label` (predictions) or `group_id,label`
//! (dataset sidecars), each with a header line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{GlrrError, Result};
use crate::gram::GramTensor;
use crate::manifold::GrassmannPoint;

pub const GMAT_MAGIC: &[u8; 4] = b"GMAT";
pub const GMAT_VERSION: u32 = 1;

/// Serialize one matrix as a GMAT record.
pub fn write_gmat_to<W: Write>(out: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    let too_big = |_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "dimension exceeds u32");
    let rows = u32::try_from(m.nrows()).map_err(too_big)?;
    let cols = u32::try_from(m.ncols()).map_err(too_big)?;
    out.write_all(GMAT_MAGIC)?;
    out.write_all(&GMAT_VERSION.to_le_bytes())?;
    out.write_all(&rows.to_le_bytes())?;
    out.write_all(&cols.to_le_bytes())?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.write_all(&m[(r, c)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Read the next GMAT record; `Ok(None)` at a clean end of stream.
pub fn read_gmat_from<R: Read>(input: &mut R, path: &Path) -> Result<Option<DMatrix<f64>>> {
    let mut magic = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = input
            .read(&mut magic[filled..])
            .map_err(|e| GlrrError::io(path, e))?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(GlrrError::format(path, "truncated GMAT header"));
        }
        filled += n;
    }
    if &magic != GMAT_MAGIC {
        return Err(GlrrError::format(path, format!("bad magic {magic:?}")));
    }
    let truncated = |_| GlrrError::format(path, "truncated GMAT record");
    let version = read_u32(input).map_err(truncated)?;
    if version != GMAT_VERSION {
        return Err(GlrrError::format(path, format!("unsupported GMAT version {version}")));
    }
    let rows = read_u32(input).map_err(truncated)? as usize;
    let cols = read_u32(input).map_err(truncated)? as usize;
    let mut data = vec![0u8; rows * cols * 8];
    input.read_exact(&mut data).map_err(truncated)?;
    let values = data
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
    Ok(Some(DMatrix::from_row_iterator(rows, cols, values)))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| GlrrError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| GlrrError::io(path, e))
}

pub fn write_gmat(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_gmat_stream(path, std::iter::once(m))
}

pub fn write_gmat_stream<'a>(path: &Path, mats: impl IntoIterator<Item = &'a DMatrix<f64>>) -> Result<()> {
    let mut out = create(path)?;
    for m in mats {
        write_gmat_to(&mut out, m).map_err(|e| GlrrError::io(path, e))?;
    }
    out.flush().map_err(|e| GlrrError::io(path, e))
}

/// Every GMAT record in a file, in order.
pub fn read_gmat_stream(path: &Path) -> Result<Vec<DMatrix<f64>>> {
    let mut input = open(path)?;
    let mut out = Vec::new();
    while let Some(m) = read_gmat_from(&mut input, path)? {
        out.push(m);
    }
    Ok(out)
}

/// A file holding exactly one GMAT record.
pub fn read_gmat(path: &Path) -> Result<DMatrix<f64>> {
    let mut all = read_gmat_stream(path)?;
    match all.len() {
        1 => Ok(all.pop().expect("one record")),
        n => Err(GlrrError::format(path, format!("expected one matrix, found {n}"))),
    }
}

/// Points file: an `N × 2` header record (`index, label`, label `-1` when
/// unknown), then one `d × p` basis record per point.
pub fn write_points(path: &Path, points: &[GrassmannPoint], labels: Option<&[usize]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != points.len() {
            return Err(GlrrError::LengthMismatch(l.len(), points.len()));
        }
    }
    let header = DMatrix::from_fn(points.len(), 2, |i, c| match c {
        0 => i as f64,
        _ => labels.map_or(-1.0, |l| l[i] as f64),
    });
    write_gmat_stream(
        path,
        std::iter::once(&header).chain(points.iter().map(|p| p.basis())),
    )
}

pub fn read_points(path: &Path) -> Result<(Vec<GrassmannPoint>, Option<Vec<usize>>)> {
    let mut records = read_gmat_stream(path)?.into_iter();
    let header = records
        .next()
        .ok_or_else(|| GlrrError::format(path, "empty points file"))?;
    if header.ncols() != 2 {
        return Err(GlrrError::format(path, "points header must have two columns"));
    }
    let points: Vec<GrassmannPoint> = records
        .map(|m| GrassmannPoint::validate_stiefel(m, 1e-8))
        .collect::<Result<_>>()?;
    if points.len() != header.nrows() {
        return Err(GlrrError::format(
            path,
            format!("header lists {} points, found {}", header.nrows(), points.len()),
        ));
    }
    let labels = if header.column(1).iter().all(|&l| l >= 0.0) {
        Some(header.column(1).iter().map(|&l| l as usize).collect())
    } else {
        None
    };
    Ok((points, labels))
}

/// Gram tensor file: a `1 × 1` record holding `N`, then `N` slices.
pub fn write_gram(path: &Path, b: &GramTensor) -> Result<()> {
    let header = DMatrix::from_element(1, 1, b.n_points() as f64);
    write_gmat_stream(path, std::iter::once(&header).chain(b.slices()))
}

pub fn read_gram(path: &Path) -> Result<GramTensor> {
    let mut records = read_gmat_stream(path)?.into_iter();
    let header = records
        .next()
        .ok_or_else(|| GlrrError::format(path, "empty Gram file"))?;
    if header.shape() != (1, 1) {
        return Err(GlrrError::format(path, "Gram header must be 1x1"));
    }
    let slices: Vec<_> = records.collect();
    if slices.len() != header[(0, 0)] as usize {
        return Err(GlrrError::format(path, "slice count does not match header"));
    }
    GramTensor::from_slices(slices)
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| GlrrError::io(path, e);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let input = open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| GlrrError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| GlrrError::format(path, format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(GlrrError::format(path, format!("line {} has a different width", lineno + 1)));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(GlrrError::format(path, "empty matrix"));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

/// Two-column CSV with a header; returns `(key, label)` rows in file order.
pub fn read_key_label_csv(path: &Path) -> Result<Vec<(String, usize)>> {
    let input = open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| GlrrError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(key), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(GlrrError::format(path, format!("line {} must have two fields", lineno + 1)));
        };
        match label.parse::<usize>() {
            Ok(l) => out.push((key.to_string(), l)),
            Err(_) if lineno == 0 => continue, // header
            Err(e) => return Err(GlrrError::format(path, format!("line {}: {e}", lineno + 1))),
        }
    }
    Ok(out)
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| GlrrError::io(path, e);
    writeln!(out, "index,label").map_err(io)?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(out, "{i},{l}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Labels from an `index,label` (or `group_id,label`) file, in row order.
pub fn read_labels_csv(path: &Path) -> Result<Vec<usize>> {
    Ok(read_key_label_csv(path)?.into_iter().map(|(_, l)| l).collect())
}

pub fn write_group_labels_csv(path: &Path, rows: &[(String, usize)]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| GlrrError::io(path, e);
    writeln!(out, "group_id,label").map_err(io)?;
    for (id, l) in rows {
        writeln!(out, "{id},{l}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Raw `u8` images from an IDX3 file (`0x00000803`).
#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }
}

fn read_be_u32<R: Read>(input: &mut R, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    input
        .read_exact(&mut buf)
        .map_err(|_| GlrrError::format(path, "truncated IDX header"))?;
    Ok(u32::from_be_bytes(buf))
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let mut input = open(path)?;
    let magic = read_be_u32(&mut input, path)?;
    if magic != 0x0000_0803 {
        return Err(GlrrError::format(path, format!("bad IDX image magic {magic:#010x}")));
    }
    let count = read_be_u32(&mut input, path)? as usize;
    let rows = read_be_u32(&mut input, path)? as usize;
    let cols = read_be_u32(&mut input, path)? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    input
        .read_exact(&mut pixels)
        .map_err(|_| GlrrError::format(path, "truncated IDX image data"))?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

/// Raw `u8` labels from an IDX1 file (`0x00000801`).
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let mut input = open(path)?;
    let magic = read_be_u32(&mut input, path)?;
    if magic != 0x0000_0801 {
        return Err(GlrrError::format(path, format!("bad IDX label magic {magic:#010x}")));
    }
    let count = read_be_u32(&mut input, path)? as usize;
    let mut labels = vec![0u8; count];
    input
        .read_exact(&mut labels)
        .map_err(|_| GlrrError::format(path, "truncated IDX label data"))?;
    Ok(labels)
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| GlrrError::io(path, e);
    for v in [0x0000_0803u32, images.count as u32, images.rows as u32, images.cols as u32] {
        out.write_all(&v.to_be_bytes()).map_err(io)?;
    }
    out.write_all(&images.pixels).map_err(io)?;
    out.flush().map_err(io)
}
