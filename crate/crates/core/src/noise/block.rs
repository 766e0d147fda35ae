use nalgebra::DVector;

use super::{HurstParameter, TimeGrid};
use crate::error::{Error, Result};

/// How a [`NoiseBlock`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum GeneratorTag {
    ExactCholesky = 0,
    RiemannOracle = 1,
    Aggregated = 2,
    /// Identically zero noise.
    Deterministic = 3,
}

impl GeneratorTag {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(GeneratorTag::ExactCholesky),
            1 => Some(GeneratorTag::RiemannOracle),
            2 => Some(GeneratorTag::Aggregated),
            3 => Some(GeneratorTag::Deterministic),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorTag::ExactCholesky => "exact-cholesky",
            GeneratorTag::RiemannOracle => "riemann-oracle",
            GeneratorTag::Aggregated => "aggregated",
            GeneratorTag::Deterministic => "deterministic",
        }
    }
}

/// Samples of the convolution increments `I_{i,k}` for a batch of paths.
///
/// Storage is row-major in `(path, noise index, step, component)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlock {
    grid: TimeGrid,
    hurst: HurstParameter,
    paths: usize,
    m: usize,
    n: usize,
    samples: Vec<f64>,
    tag: GeneratorTag,
    seed: u64,
    lineage: Option<u64>,
}

impl NoiseBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: TimeGrid,
        hurst: HurstParameter,
        paths: usize,
        m: usize,
        n: usize,
        samples: Vec<f64>,
        tag: GeneratorTag,
        seed: u64,
    ) -> Result<Self> {
        let expected = paths * m * grid.steps() * n;
        if samples.len() != expected {
            return Err(Error::invalid(format!(
                "noise block holds {} samples, shape requires {expected}",
                samples.len()
            )));
        }
        Ok(Self {
            grid,
            hurst,
            paths,
            m,
            n,
            samples,
            tag,
            seed,
            lineage: None,
        })
    }

    pub fn zeros(grid: TimeGrid, hurst: HurstParameter, m: usize, n: usize, paths: usize) -> Self {
        let len = paths * m * grid.steps() * n;
        Self {
            grid,
            hurst,
            paths,
            m,
            n,
            samples: vec![0.0; len],
            tag: GeneratorTag::Deterministic,
            seed: 0,
            lineage: None,
        }
    }

    pub(crate) fn with_lineage(mut self, root: u64) -> Self {
        self.lineage = Some(root);
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn noise_count(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn tag(&self) -> GeneratorTag {
        self.tag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn offset(&self, p: usize, i: usize, k: usize) -> usize {
        ((p * self.m + i) * self.steps() + k) * self.n
    }

    /// `I_{i,k}` for path `p`.
    pub fn increment(&self, p: usize, i: usize, k: usize) -> &[f64] {
        let o = self.offset(p, i, k);
        &self.samples[o..o + self.n]
    }

    /// All increments `(k, j)` of noise index `i` on path `p`, step-major.
    pub fn series(&self, p: usize, i: usize) -> &[f64] {
        let o = self.offset(p, i, 0);
        &self.samples[o..o + self.steps() * self.n]
    }

    /// `sum_i I_{i,k}` for path `p`.
    pub fn summed_increment(&self, p: usize, k: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for i in 0..self.m {
            for (o, x) in out.iter_mut().zip(self.increment(p, i, k)) {
                *o += x;
            }
        }
        out
    }

    /// Block with `m = 1` holding `sum_i I_{i,k}`.
    pub fn summed(&self) -> NoiseBlock {
        let steps = self.steps();
        let mut samples = Vec::with_capacity(self.paths * steps * self.n);
        for p in 0..self.paths {
            for k in 0..steps {
                samples.extend(self.summed_increment(p, k).iter());
            }
        }
        NoiseBlock {
            grid: self.grid.clone(),
            hurst: self.hurst,
            paths: self.paths,
            m: 1,
            n: self.n,
            samples,
            tag: self.tag,
            seed: self.seed,
            lineage: Some(self.root_checksum()),
        }
    }

    /// The single-path block for path `p`.
    pub fn path(&self, p: usize) -> Result<NoiseBlock> {
        if p >= self.paths {
            return Err(Error::invalid(format!("path {p} out of range ({} paths)", self.paths)));
        }
        let len = self.m * self.steps() * self.n;
        Ok(NoiseBlock {
            grid: self.grid.clone(),
            hurst: self.hurst,
            paths: 1,
            m: self.m,
            n: self.n,
            samples: self.samples[p * len..(p + 1) * len].to_vec(),
            tag: self.tag,
            seed: self.seed,
            lineage: self.lineage,
        })
    }

    /// FNV-1a over the shape and the sample bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut hash = Fnv::default();
        for v in [self.paths, self.m, self.steps(), self.n] {
            hash.write(v as u64);
        }
        for x in &self.samples {
            hash.write(x.to_bits());
        }
        hash.0
    }

    /// Checksum of the block this one was derived from (or of itself).
    pub fn root_checksum(&self) -> u64 {
        self.lineage.unwrap_or_else(|| self.checksum())
    }
}

pub(crate) struct Fnv(pub u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf29ce484222325)
    }
}

impl Fnv {
    pub fn write(&mut self, word: u64) {
        for b in word.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block() -> NoiseBlock {
        let grid = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
        let samples: Vec<f64> = (0..2 * 2 * 3 * 2).map(|x| x as f64).collect();
        NoiseBlock::new(grid, HurstParameter::new(0.7).unwrap(), 2, 2, 2, samples, GeneratorTag::ExactCholesky, 9)
            .unwrap()
    }

    #[test]
    fn indexing_is_row_major() {
        let b = block();
        assert_eq!(b.increment(0, 0, 0), &[0.0, 1.0]);
        assert_eq!(b.increment(0, 1, 0), &[6.0, 7.0]);
        assert_eq!(b.increment(1, 0, 2), &[16.0, 17.0]);
        assert_eq!(b.summed_increment(1, 2).as_slice(), &[16.0 + 22.0, 17.0 + 23.0]);
    }

    #[test]
    fn summed_keeps_lineage() {
        let b = block();
        let s = b.summed();
        assert_eq!(s.noise_count(), 1);
        assert_eq!(s.root_checksum(), b.checksum());
        assert_ne!(s.checksum(), b.checksum());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let grid = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
        let h = HurstParameter::new(0.7).unwrap();
        assert!(NoiseBlock::new(grid, h, 1, 1, 1, vec![0.0; 2], GeneratorTag::Aggregated, 0).is_err());
    }

    #[test]
    fn path_slice() {
        let b = block();
        let p1 = b.path(1).unwrap();
        assert_eq!(p1.paths(), 1);
        assert_eq!(p1.increment(0, 0, 2), b.increment(1, 0, 2));
        assert!(b.path(2).is_err());
    }
}
