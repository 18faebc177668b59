//! "SARC1" binary containers and CSV tables.
//!
//! Every file starts with the 5-byte magic `SARC1` and a one-byte kind tag,
//! followed by little-endian `u64` dimensions and interleaved `f64`
//! (re, im) values in row-major order.
//!
//! | tag | payload |
//! |-----|---------|
//! | 0   | data cube: `N_s`, `N_ω`, model byte, noise level, values, `s_j`, `ω_l` |
//! | 1-5 | model matrix of that kind: rows, cols, `n_s`, `n_ω`, values |
//! | 16  | plain complex matrix: rows, cols, values |
//! | 17  | MMV problem: doppler byte + speed, reference matrix, `D`, column scales |

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::model::{MatrixKind, MmvProblem, ModelMatrix};
use crate::simulator::{DataCube, DataModel};
use crate::solver::SolveResult;
use crate::{Error, Result, C64};

pub const MAGIC: &[u8; 5] = b"SARC1";
const TAG_CUBE: u8 = 0;
const TAG_MATRIX: u8 = 16;
const TAG_MMV: u8 = 17;

struct Writer(Vec<u8>);

impl Writer {
    fn new(tag: u8) -> Self {
        let mut v = MAGIC.to_vec();
        v.push(tag);
        Writer(v)
    }
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u64(&mut self, x: usize) {
        self.0.extend_from_slice(&(x as u64).to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn complex(&mut self, a: &Array2<C64>) {
        for z in a.iter() {
            self.f64(z.re);
            self.f64(z.im);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Result<(Self, u8)> {
        if buf.len() < 6 || &buf[..5] != MAGIC {
            return Err(Error::Format("missing SARC1 magic".into()));
        }
        Ok((Reader { buf, pos: 6 }, buf[5]))
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Format("dimension overflow".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        if n.checked_mul(8).is_none_or(|b| b > self.buf.len() - self.pos) {
            return Err(Error::Format("truncated file".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn complex(&mut self, rows: usize, cols: usize) -> Result<Array2<C64>> {
        let n = rows.checked_mul(cols).and_then(|n| n.checked_mul(2));
        let n = n.ok_or_else(|| Error::Format("dimension overflow".into()))?;
        let raw = self.reals(n)?;
        let vals: Vec<C64> = raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        Array2::from_shape_vec((rows, cols), vals).map_err(|e| Error::Format(e.to_string()))
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(())
    }
}

pub fn encode_cube(d: &DataCube) -> Vec<u8> {
    let mut w = Writer::new(TAG_CUBE);
    let (ns, nw) = d.values.dim();
    w.u64(ns);
    w.u64(nw);
    w.u8(match d.model {
        DataModel::StartStop => 0,
        DataModel::Doppler => 1,
    });
    w.f64(d.noise_level);
    w.complex(&d.values);
    d.slow_times.iter().for_each(|&s| w.f64(s));
    d.frequencies.iter().for_each(|&s| w.f64(s));
    w.0
}

pub fn decode_cube(buf: &[u8]) -> Result<DataCube> {
    let (mut r, tag) = Reader::new(buf)?;
    if tag != TAG_CUBE {
        return Err(Error::Format(format!("expected data cube, found tag {tag}")));
    }
    let ns = r.u64()?;
    let nw = r.u64()?;
    let model = match r.u8()? {
        0 => DataModel::StartStop,
        1 => DataModel::Doppler,
        m => return Err(Error::Format(format!("unknown data model {m}"))),
    };
    let noise_level = r.f64()?;
    let values = r.complex(ns, nw)?;
    let slow_times = r.reals(ns)?;
    let frequencies = r.reals(nw)?;
    r.finish()?;
    Ok(DataCube { values, slow_times, frequencies, model, noise_level, warnings: Vec::new() })
}

pub fn encode_matrix(a: &Array2<C64>) -> Vec<u8> {
    let mut w = Writer::new(TAG_MATRIX);
    w.u64(a.nrows());
    w.u64(a.ncols());
    w.complex(a);
    w.0
}

pub fn decode_matrix(buf: &[u8]) -> Result<Array2<C64>> {
    let (mut r, tag) = Reader::new(buf)?;
    if tag != TAG_MATRIX {
        return Err(Error::Format(format!("expected complex matrix, found tag {tag}")));
    }
    let (rows, cols) = (r.u64()?, r.u64()?);
    let a = r.complex(rows, cols)?;
    r.finish()?;
    Ok(a)
}

fn put_model(w: &mut Writer, m: &ModelMatrix) {
    w.u64(m.values.nrows());
    w.u64(m.values.ncols());
    w.u64(m.n_s);
    w.u64(m.n_omega);
    w.complex(&m.values);
}

fn get_model(r: &mut Reader, kind: MatrixKind) -> Result<ModelMatrix> {
    let (rows, cols, ns, nw) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    let values = r.complex(rows, cols)?;
    Ok(ModelMatrix::new(values, kind, ns, nw))
}

pub fn encode_model(m: &ModelMatrix) -> Vec<u8> {
    let mut w = Writer::new(m.kind.tag());
    put_model(&mut w, m);
    w.0
}

pub fn decode_model(buf: &[u8]) -> Result<ModelMatrix> {
    let (mut r, tag) = Reader::new(buf)?;
    let kind = MatrixKind::from_tag(tag).ok_or_else(|| Error::Format(format!("expected model matrix, found tag {tag}")))?;
    let m = get_model(&mut r, kind)?;
    r.finish()?;
    Ok(m)
}

pub fn encode_mmv(p: &MmvProblem) -> Vec<u8> {
    let mut w = Writer::new(TAG_MMV);
    w.u8(p.doppler.is_some() as u8);
    w.f64(p.doppler.unwrap_or(0.0));
    w.u8(p.a_ref.kind.tag());
    put_model(&mut w, &p.a_ref);
    w.u64(p.d.nrows());
    w.u64(p.d.ncols());
    w.complex(&p.d);
    p.column_scale.iter().for_each(|&s| w.f64(s));
    w.0
}

pub fn decode_mmv(buf: &[u8]) -> Result<MmvProblem> {
    let (mut r, tag) = Reader::new(buf)?;
    if tag != TAG_MMV {
        return Err(Error::Format(format!("expected MMV problem, found tag {tag}")));
    }
    let has = r.u8()?;
    let speed = r.f64()?;
    let kind = MatrixKind::from_tag(r.u8()?).ok_or_else(|| Error::Format("bad matrix kind".into()))?;
    let a_ref = get_model(&mut r, kind)?;
    let (rows, cols) = (r.u64()?, r.u64()?);
    let d = r.complex(rows, cols)?;
    let column_scale = r.reals(cols)?;
    r.finish()?;
    Ok(MmvProblem { a_ref, d, column_scale, doppler: (has == 1).then_some(speed) })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// `iteration,residual,j21` with one line per iteration (1-based).
pub fn history_csv(r: &SolveResult) -> String {
    let mut s = String::from("iteration,residual,j21\n");
    for (i, (res, j)) in r.residual_history.iter().zip(&r.j21_history).enumerate() {
        s.push_str(&format!("{},{:.12e},{:.12e}\n", i + 1, res, j));
    }
    s
}

/// Real vector as a one-column CSV with an index column.
pub fn vector_csv(header: &str, v: &[f64]) -> String {
    let mut s = format!("q,{header}\n");
    for (q, x) in v.iter().enumerate() {
        s.push_str(&format!("{q},{x:.12e}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let a = Array2::from_shape_fn((3, 2), |(i, j)| C64::new(i as f64, -(j as f64) * 0.5));
        assert_eq!(decode_matrix(&encode_matrix(&a)).unwrap(), a);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_matrix(b"SARC2\x10").is_err());
        let a = Array2::from_elem((2, 2), C64::new(1.0, 1.0));
        let mut b = encode_matrix(&a);
        b.pop();
        assert!(decode_matrix(&b).is_err());
        assert!(decode_cube(&encode_matrix(&a)).is_err());
    }
}
