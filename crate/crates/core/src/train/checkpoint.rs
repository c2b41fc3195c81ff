//! Binary checkpoint format.
//!
//! ```text
//! "CTRW"                       magic
//! u32                          format version
//! u32 + bytes                  spec descriptor, compact JSON, UTF-8
//! f64 × n                      weights, stage by stage in descriptor order
//! f64 × n                      momentum velocities, same layout
//! u32 epoch, u64 seed, f64 initial validation loss
//! u32 count, then per epoch:   u32 epoch, u8 phase, f64 lr,
//!                              f64 train loss, f64 validation loss, u32 skipped
//! u32                          CRC32 of every preceding byte
//! ```
//!
//! All integers and floats are little-endian. Array lengths are implied by
//! the descriptor.

use alloc::string::String;
use alloc::vec::Vec;

use super::{EpochRecord, Phase};
use crate::error::{Error, Result};
use crate::net::{NetworkSpec, WeightStore};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CTRW";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub weights: WeightStore,
    pub velocities: WeightStore,
    /// Completed epochs.
    pub epoch: u32,
    pub seed: u64,
    /// Mean validation loss before the first update (NaN if never measured).
    pub initial_validation_loss: f64,
    pub history: Vec<EpochRecord>,
}

impl Checkpoint {
    /// Freshly initialized weights and zero velocities.
    pub fn initial(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let weights = WeightStore::random(&spec, spec.seed)?;
        let velocities = WeightStore::zeros(&spec)?;
        Ok(Checkpoint { spec, weights, velocities, epoch: 0, seed, initial_validation_loss: f64::NAN, history: Vec::new() })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let json = serde_json::to_string(&self.spec).unwrap_or_default();
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(json.as_bytes());
        for v in self.weights.iter().chain(self.velocities.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.initial_validation_loss.to_le_bytes());
        out.extend_from_slice(&(self.history.len() as u32).to_le_bytes());
        for r in &self.history {
            out.extend_from_slice(&r.epoch.to_le_bytes());
            out.push(match r.phase {
                Phase::Main => 0,
                Phase::Post => 1,
            });
            out.extend_from_slice(&r.lr.to_le_bytes());
            out.extend_from_slice(&r.train_loss.to_le_bytes());
            out.extend_from_slice(&r.validation_loss.to_le_bytes());
            out.extend_from_slice(&r.skipped.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes([trailer[0], trailer[1], trailer[2], trailer[3]]);
        if crc32fast::hash(body) != stored {
            return Err(Error::Format("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(alloc::format!("unsupported version {version}")));
        }
        let json_len = r.u32()? as usize;
        let json = String::from_utf8(r.take(json_len)?.to_vec()).map_err(|_| Error::Format("descriptor is not UTF-8".into()))?;
        let spec = NetworkSpec::from_json(&json)?;
        let counts = spec.param_counts()?;
        let read_store = |r: &mut Reader<'_>| -> Result<WeightStore> {
            let layers = counts.iter().map(|&n| (0..n).map(|_| r.f64()).collect::<Result<Vec<f64>>>()).collect::<Result<Vec<_>>>()?;
            WeightStore::from_layers(&spec, layers)
        };
        let weights = read_store(&mut r)?;
        let velocities = read_store(&mut r)?;
        let epoch = r.u32()?;
        let seed = r.u64()?;
        let initial_validation_loss = r.f64()?;
        let n = r.u32()? as usize;
        let mut history = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let epoch = r.u32()?;
            let phase = match r.take(1)?[0] {
                0 => Phase::Main,
                1 => Phase::Post,
                p => return Err(Error::Format(alloc::format!("unknown phase tag {p}"))),
            };
            history.push(EpochRecord { epoch, phase, lr: r.f64()?, train_loss: r.f64()?, validation_loss: r.f64()?, skipped: r.u32()? });
        }
        if r.pos != body.len() {
            return Err(Error::Format("trailing bytes before checksum".into()));
        }
        Ok(Checkpoint { spec, weights, velocities, epoch, seed, initial_validation_loss, history })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::Format("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{AlphabetSpec, GaborBank, LayerSpec};
    use alloc::string::ToString;
    use alloc::vec;

    /// Smallest trainable network: one orientation, a 1-unit tanh layer and
    /// a single-symbol output. Only the tanh weight is non-zero.
    fn single_weight_spec() -> NetworkSpec {
        NetworkSpec {
            name: "one".into(),
            input_height: 1,
            gabor: GaborBank { orientations_deg: vec![0.0], wavelength: 2.0, sigma: 1.0, kernel_size: 1 },
            stages: vec![LayerSpec::Tanh { units: 1 }, LayerSpec::Collapse, LayerSpec::Softmax],
            alphabet: AlphabetSpec::Symbols(vec!["x".to_string()]),
            seed: 0,
        }
    }

    fn sample_checkpoint() -> Checkpoint {
        let spec = single_weight_spec();
        let mut cp = Checkpoint::initial(spec.clone(), 11).unwrap();
        cp.weights = WeightStore::from_layers(&spec, vec![vec![0.5, 0.0], vec![], vec![0.0; 4]]).unwrap();
        cp.epoch = 1;
        cp.initial_validation_loss = 2.0;
        cp.history.push(EpochRecord { epoch: 1, phase: Phase::Main, lr: 0.002, train_loss: 1.5, validation_loss: 1.25, skipped: 0 });
        cp
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let cp = sample_checkpoint();
        let bytes = cp.encode();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back.encode(), bytes);
        assert_eq!(back.weights, cp.weights);
        assert_eq!(back.history, cp.history);
    }

    #[test]
    fn golden_single_weight_file() {
        let bytes = sample_checkpoint().encode();
        let json = br#"{"name":"one","input_height":1,"gabor":{"orientations_deg":[0.0],"wavelength":2.0,"sigma":1.0,"kernel_size":1},"stages":[{"kind":"tanh","units":1},{"kind":"collapse"},{"kind":"softmax"}],"alphabet":["x"],"seed":0}"#;
        let mut expected = Vec::new();
        expected.extend_from_slice(b"CTRW");
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&(json.len() as u32).to_le_bytes());
        expected.extend_from_slice(json);
        for w in [0.5f64, 0.0, 0.0, 0.0, 0.0, 0.0] {
            expected.extend_from_slice(&w.to_le_bytes());
        }
        for _ in 0..6 {
            expected.extend_from_slice(&0.0f64.to_le_bytes());
        }
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&11u64.to_le_bytes());
        expected.extend_from_slice(&2.0f64.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.push(0);
        for v in [0.002f64, 1.5, 1.25] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        expected.extend_from_slice(&0u32.to_le_bytes());
        assert_eq!(&bytes[..bytes.len() - 4], &expected[..]);
        assert_eq!(bytes.len(), expected.len() + 4);
    }

    #[test]
    fn corruption_is_rejected() {
        let bytes = sample_checkpoint().encode();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(Checkpoint::decode(&bad), Err(Error::Format("bad magic bytes".into())));
        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 1] ^= 0xff;
        assert_eq!(Checkpoint::decode(&bad), Err(Error::Format("checksum mismatch".into())));
        let mut bad = bytes.clone();
        bad[40] ^= 0x01;
        assert!(Checkpoint::decode(&bad).is_err());
        assert!(Checkpoint::decode(&bytes[..10]).is_err());
    }
}
