//! Binary checkpoint format. All integers and floats are little-endian.
//!
//! ```text
//! magic            8 bytes  "S2SIMPCK"
//! version          u32      1
//! input_dim        u32
//! hidden_dim       u32
//! schedule         u8       0 paper-eq1, 1 endpoint, 2 flat
//! merge_mlp        u8       0 linear, 1 tanh MLP
//! topology         u8       0 bidirectional, 1 forward-only
//! reserved         u8       0
//! merge_hidden     u32      MLP width, 0 for linear
//! window           4 x u32  before, gap, after, stride
//! norm_columns     u32      then per column:
//!   name_len       u32
//!   name           name_len bytes of UTF-8
//!   mean           f64
//!   std            f64
//! param_count      u64
//! params           param_count x f64, in `ModelParams::tensors()` order
//! ```
//!
//! Nothing may follow the parameters.

use std::fs;
use std::path::Path;

use crate::data::{ColumnStats, NormStats, WindowSpec};
use crate::error::{Error, Result};

use super::params::{ModelConfig, ModelParams, Topology};
use super::schedule::ScheduleVariant;

pub const MAGIC: &[u8; 8] = b"S2SIMPCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub norm: NormStats,
    pub window: WindowSpec,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.params.config();
        let mut out = Vec::with_capacity(64 + 8 * self.params.num_params());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, cfg.input_dim as u32);
        put_u32(&mut out, cfg.hidden_dim as u32);
        out.push(cfg.schedule.code());
        out.push(u8::from(cfg.merge_hidden.is_some()));
        out.push(cfg.topology.code());
        out.push(0);
        put_u32(&mut out, cfg.merge_hidden.unwrap_or(0) as u32);
        for v in [
            self.window.before,
            self.window.gap,
            self.window.after,
            self.window.stride,
        ] {
            put_u32(&mut out, v as u32);
        }
        put_u32(&mut out, self.norm.columns.len() as u32);
        for c in &self.norm.columns {
            put_u32(&mut out, c.name.len() as u32);
            out.extend_from_slice(c.name.as_bytes());
            out.extend_from_slice(&c.mean.to_le_bytes());
            out.extend_from_slice(&c.std.to_le_bytes());
        }
        out.extend_from_slice(&(self.params.num_params() as u64).to_le_bytes());
        for (_, t) in self.params.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let input_dim = r.u32()? as usize;
        let hidden_dim = r.u32()? as usize;
        let schedule_code = r.u8()?;
        let schedule = ScheduleVariant::from_code(schedule_code)
            .ok_or_else(|| Error::Checkpoint(format!("unknown schedule code {schedule_code}")))?;
        let mlp = r.u8()?;
        let topology_code = r.u8()?;
        let topology = Topology::from_code(topology_code)
            .ok_or_else(|| Error::Checkpoint(format!("unknown topology code {topology_code}")))?;
        let _reserved = r.u8()?;
        let merge_width = r.u32()? as usize;
        let merge_hidden = match mlp {
            0 => None,
            1 => Some(merge_width),
            other => return Err(Error::Checkpoint(format!("bad merge flag {other}"))),
        };
        let window = WindowSpec::new(
            r.u32()? as usize,
            r.u32()? as usize,
            r.u32()? as usize,
            r.u32()? as usize,
        )
        .map_err(|e| Error::Checkpoint(e.to_string()))?;

        let n_norm = r.u32()? as usize;
        let mut columns = Vec::with_capacity(n_norm.min(1024));
        for _ in 0..n_norm {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Checkpoint("column name is not UTF-8".into()))?;
            let mean = r.f64()?;
            let std = r.f64()?;
            columns.push(ColumnStats { name, mean, std });
        }
        let norm = NormStats::new(columns).map_err(|e| Error::Checkpoint(e.to_string()))?;

        let config = ModelConfig {
            input_dim,
            hidden_dim,
            schedule,
            merge_hidden,
            topology,
        };
        let mut params = ModelParams::zeros(config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let count = r.u64()? as usize;
        if count != params.num_params() {
            return Err(Error::Checkpoint(format!(
                "header implies {} parameters but file declares {count}",
                params.num_params()
            )));
        }
        for (_, t) in params.tensors_mut() {
            for v in t.iter_mut() {
                *v = r.f64()?;
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after parameters",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint { params, norm, window })
    }

    /// Writes to a sibling temporary file first so a failed write never
    /// leaves a truncated checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("ckpt.partial");
        fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn sample(seed: u64, merge_hidden: Option<usize>, topology: Topology) -> Checkpoint {
        let config = ModelConfig {
            input_dim: 2,
            hidden_dim: 3,
            schedule: ScheduleVariant::Endpoint,
            merge_hidden,
            topology,
        };
        Checkpoint {
            params: ModelParams::init(config, &mut Rng::new(seed)).unwrap(),
            norm: NormStats::new(vec![
                ColumnStats {
                    name: "a".into(),
                    mean: 1.5,
                    std: 0.25,
                },
                ColumnStats {
                    name: "bé".into(),
                    mean: -3.0,
                    std: 7.0,
                },
            ])
            .unwrap(),
            window: WindowSpec::new(4, 2, 5, 1).unwrap(),
        }
    }

    #[test]
    fn header_layout() {
        let bytes = sample(0, None, Topology::Bidirectional).to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 3);
        assert_eq!(&bytes[20..24], &[1, 0, 0, 0]);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample(0, None, Topology::Bidirectional).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(Checkpoint::from_bytes(&bad)
            .unwrap_err()
            .to_string()
            .contains("version"));
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(Checkpoint::from_bytes(&long)
            .unwrap_err()
            .to_string()
            .contains("trailing"));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = sample(4, Some(5), Topology::ForwardOnly);
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        assert!(!path.with_extension("ckpt.partial").exists());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), mlp in any::<bool>(), fwd in any::<bool>()) {
            let topo = if fwd { Topology::ForwardOnly } else { Topology::Bidirectional };
            let ck = sample(seed, mlp.then_some(4), topo);
            let bytes = ck.to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
            let bits = |p: &ModelParams| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.params), bits(&ck.params));
        }
    }
}
