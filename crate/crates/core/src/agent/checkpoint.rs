//! Versioned binary checkpoints: magic, format version, configuration hash,
//! network shape and little-endian parameters.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::network::{NetworkShape, Params, QNetwork};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"JNQN";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Digest of a canonical configuration description.
pub fn config_hash(description: &str) -> [u8; 32] {
    Sha256::digest(description.as_bytes()).into()
}

fn shape_fields(s: &NetworkShape) -> [usize; 7] {
    [
        s.inputs,
        s.cells,
        s.seq_len,
        s.projection,
        s.value_hidden,
        s.advantage_hidden,
        s.actions,
    ]
}

pub fn save_checkpoint(path: &Path, net: &QNetwork, hash: &[u8; 32]) -> Result<()> {
    let params = net.params.to_flat();
    let mut buf = Vec::with_capacity(4 + 4 + 32 + 8 * 8 + 8 * params.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(hash);
    for f in shape_fields(net.shape()) {
        buf.extend_from_slice(&(f as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for x in params {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Loads a checkpoint, refusing files written for another configuration.
pub fn load_checkpoint(path: &Path, expected_hash: &[u8; 32]) -> Result<QNetwork> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut r = Reader(&bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    if r.take(32)? != expected_hash {
        return Err(Error::Checkpoint("configuration hash mismatch".into()));
    }
    let mut f = [0usize; 7];
    for x in &mut f {
        *x = r.u64()? as usize;
    }
    let shape = NetworkShape {
        inputs: f[0],
        cells: f[1],
        seq_len: f[2],
        projection: f[3],
        value_hidden: f[4],
        advantage_hidden: f[5],
        actions: f[6],
    };
    let n = r.u64()? as usize;
    if n != shape.parameter_count() {
        return Err(Error::Checkpoint(
            "parameter count does not match the stored shape".into(),
        ));
    }
    let data = r.take(8 * n)?;
    if !r.0.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let flat: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    QNetwork::from_params(shape, Params::from_flat(&shape, &flat)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn net() -> QNetwork {
        let shape = NetworkShape {
            inputs: 3,
            cells: 2,
            seq_len: 2,
            projection: 4,
            value_hidden: 3,
            advantage_hidden: 3,
            actions: 2,
        };
        QNetwork::new(shape, &mut Rng::new(1))
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.bin");
        let n = net();
        let h = config_hash("a");
        save_checkpoint(&path, &n, &h).unwrap();
        assert_eq!(load_checkpoint(&path, &h).unwrap(), n);
    }

    #[test]
    fn mismatched_hash_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.bin");
        save_checkpoint(&path, &net(), &config_hash("a")).unwrap();
        assert!(matches!(
            load_checkpoint(&path, &config_hash("b")),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.bin");
        let h = config_hash("a");
        save_checkpoint(&path, &net(), &h).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_checkpoint(&path, &h).is_err());
    }
}
