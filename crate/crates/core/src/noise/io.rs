//! Binary dump of noise blocks.
//!
//! Layout, all little-endian: magic `FBMN`, version `u16`, `n`, `m`, `N` as
//! `u64`, `H` as `f64`, seed `u64`, generator tag `u8`, then the samples as
//! `f64` in `(path, noise index, step, component)` order. The path count is
//! implied by the payload length.

use std::io::{Read, Write};

use super::{GeneratorTag, HurstParameter, NoiseBlock, TimeGrid};
use crate::error::{Error, Result};

pub const NOISE_MAGIC: &[u8; 4] = b"FBMN";
pub const NOISE_VERSION: u16 = 1;

pub fn write_noise_block<W: Write>(block: &NoiseBlock, mut out: W) -> Result<()> {
    out.write_all(NOISE_MAGIC)?;
    out.write_all(&NOISE_VERSION.to_le_bytes())?;
    for v in [block.dim(), block.noise_count(), block.steps()] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    out.write_all(&block.hurst().value().to_le_bytes())?;
    out.write_all(&block.seed().to_le_bytes())?;
    out.write_all(&[block.tag() as u8])?;
    for x in block.samples() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_array<const L: usize, R: Read>(input: &mut R) -> Result<[u8; L]> {
    let mut buf = [0u8; L];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(buf)
}

/// Reads a block written by [`write_noise_block`]; `grid` must have the stored step count.
pub fn read_noise_block<R: Read>(mut input: R, grid: &TimeGrid) -> Result<NoiseBlock> {
    if &read_array::<4, _>(&mut input)? != NOISE_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut input)?);
    if version != NOISE_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let m = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let steps = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let hurst = HurstParameter::new(f64::from_le_bytes(read_array(&mut input)?))
        .map_err(|e| Error::Format(e.to_string()))?;
    let seed = u64::from_le_bytes(read_array(&mut input)?);
    let [tag] = read_array::<1, _>(&mut input)?;
    let tag = GeneratorTag::from_u8(tag).ok_or_else(|| Error::Format(format!("unknown generator tag {tag}")))?;
    if steps != grid.steps() {
        return Err(Error::GridMismatch(format!(
            "file holds {steps} steps, grid has {}",
            grid.steps()
        )));
    }
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    if payload.len() % 8 != 0 {
        return Err(Error::Format("payload is not a whole number of f64 values".into()));
    }
    let samples: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let per_path = n * m * steps;
    if per_path == 0 || samples.len() % per_path != 0 {
        return Err(Error::Format(format!(
            "{} samples do not divide into paths of {per_path}",
            samples.len()
        )));
    }
    NoiseBlock::new(grid.clone(), hurst, samples.len() / per_path, m, n, samples, tag, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let grid = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        let block = NoiseBlock::new(
            grid,
            HurstParameter::new(0.75).unwrap(),
            1,
            1,
            1,
            vec![1.5, -2.0],
            GeneratorTag::RiemannOracle,
            0xdead_beef,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_noise_block(&block, &mut buf).unwrap();
        assert_eq!(&buf[0..4], b"FBMN");
        assert_eq!(&buf[4..6], &[1, 0]);
        assert_eq!(&buf[6..14], &1u64.to_le_bytes());
        assert_eq!(&buf[22..30], &2u64.to_le_bytes());
        assert_eq!(&buf[30..38], &0.75f64.to_le_bytes());
        assert_eq!(&buf[38..46], &0xdead_beefu64.to_le_bytes());
        assert_eq!(buf[46], 1);
        assert_eq!(&buf[47..55], &1.5f64.to_le_bytes());
        assert_eq!(buf.len(), 47 + 16);
    }

    #[test]
    fn rejects_corrupt_input() {
        let grid = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        assert!(matches!(read_noise_block(&b"XXXX"[..], &grid), Err(Error::Format(_))));
        assert!(matches!(read_noise_block(&b"FB"[..], &grid), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn roundtrip(paths in 0usize..3, m in 1usize..3, n in 1usize..3, steps in 1usize..4, seed: u64,
                     values in proptest::collection::vec(-1e3f64..1e3, 36)) {
            let grid = TimeGrid::uniform(0.0, 1.0, steps).unwrap();
            let len = paths * m * n * steps;
            let block = NoiseBlock::new(grid.clone(), HurstParameter::new(0.6).unwrap(), paths, m, n,
                values[..len].to_vec(), GeneratorTag::Aggregated, seed).unwrap();
            let mut buf = Vec::new();
            write_noise_block(&block, &mut buf).unwrap();
            let back = read_noise_block(&buf[..], &grid).unwrap();
            prop_assert_eq!(back.samples(), block.samples());
            prop_assert_eq!(back.seed(), seed);
            prop_assert_eq!((back.paths(), back.noise_count(), back.dim()), (paths, m, n));
        }
    }
}
