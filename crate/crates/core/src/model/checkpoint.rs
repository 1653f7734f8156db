use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, Model, ModelConfig, ModelError};
use crate::linalg::DenseMatrix;

const MAGIC: &[u8; 8] = b"GFLOWCK1";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_matrix(out: &mut Vec<u8>, m: &DenseMatrix) {
    put_u64(out, m.rows() as u64);
    put_u64(out, m.cols() as u64);
    for &v in m.data() {
        put_f64(out, v);
    }
}

/// Little-endian binary: magic, configuration block, then every weight
/// matrix as `rows, cols, row-major values`. Bit-exact round trip.
pub fn write_checkpoint(model: &Model, mut w: impl Write) -> std::io::Result<()> {
    let c = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [c.depth, c.hidden_dim, c.in_dim, c.num_classes] {
        put_u64(&mut out, v as u64);
    }
    let (tag, slope) = match c.activation {
        Activation::Identity => (0u8, 0.0),
        Activation::Relu => (1, 0.0),
        Activation::LeakyRelu(s) => (2, s),
        Activation::Gelu => (3, 0.0),
    };
    out.push(tag);
    put_f64(&mut out, slope);
    out.push(c.residual as u8);
    out.push(c.lipschitz_c.is_some() as u8);
    put_f64(&mut out, c.lipschitz_c.unwrap_or(0.0));
    put_u64(&mut out, c.seed);
    for m in model.params() {
        put_matrix(&mut out, m);
    }
    w.write_all(&out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| ModelError::Checkpoint("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize, ModelError> {
        usize::try_from(self.u64()?).map_err(|_| ModelError::Checkpoint("size overflow".into()))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self) -> Result<DenseMatrix, ModelError> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let len = rows
            .checked_mul(cols)
            .filter(|&l| l.checked_mul(8).is_some_and(|b| b <= self.buf.len() - self.pos))
            .ok_or_else(|| ModelError::Checkpoint("matrix larger than file".into()))?;
        let data = (0..len).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        Ok(DenseMatrix::from_vec(rows, cols, data)?)
    }
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Model, ModelError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)
        .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(MAGIC.len())? != MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let depth = cur.usize()?;
    let hidden_dim = cur.usize()?;
    let in_dim = cur.usize()?;
    let num_classes = cur.usize()?;
    let tag = cur.u8()?;
    let slope = cur.f64()?;
    let activation = match tag {
        0 => Activation::Identity,
        1 => Activation::Relu,
        2 => Activation::LeakyRelu(slope),
        3 => Activation::Gelu,
        t => return Err(ModelError::Checkpoint(format!("unknown activation tag {t}"))),
    };
    let residual = cur.u8()? != 0;
    let has_c = cur.u8()? != 0;
    let c = cur.f64()?;
    let seed = cur.u64()?;
    let config = ModelConfig {
        depth,
        hidden_dim,
        in_dim,
        num_classes,
        activation,
        residual,
        lipschitz_c: has_c.then_some(c),
        seed,
    };
    config.validate()?;
    let input_proj = cur.matrix()?;
    let layers = (0..depth).map(|_| cur.matrix()).collect::<Result<Vec<_>, _>>()?;
    let readout = cur.matrix()?;
    if cur.pos != buf.len() {
        return Err(ModelError::Checkpoint("trailing bytes".into()));
    }
    Model::from_parts(config, input_proj, layers, readout)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), ModelError> {
    let f = fs::File::create(path).map_err(io_err(path))?;
    write_checkpoint(model, std::io::BufWriter::new(f)).map_err(io_err(path))
}

pub fn load_checkpoint(path: &Path) -> Result<Model, ModelError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    read_checkpoint(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for (act, res, c) in [
            (Activation::LeakyRelu(0.8), true, Some(2.5)),
            (Activation::Gelu, false, None),
        ] {
            let mut cfg = ModelConfig::new(3, 5, 4);
            cfg.hidden_dim = 6;
            cfg.activation = act;
            cfg.residual = res;
            cfg.lipschitz_c = c;
            cfg.seed = 77;
            let model = Model::new(cfg).unwrap();
            let mut bytes = Vec::new();
            write_checkpoint(&model, &mut bytes).unwrap();
            let back = read_checkpoint(bytes.as_slice()).unwrap();
            assert_eq!(back, model);
            for (a, b) in back.params().zip(model.params()) {
                assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let model = Model::new(ModelConfig::new(2, 3, 2)).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&model, &mut bytes).unwrap();
        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(read_checkpoint(extra.as_slice()).is_err());
    }
}
