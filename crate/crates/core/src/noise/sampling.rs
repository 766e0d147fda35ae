//! Gaussian samplers driven by counter-based per-(path, noise index) streams.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::covariance::{factor_with_jitter, CovarianceAssembly};
use super::{GeneratorTag, HurstParameter, NoiseBlock, TimeGrid};
use crate::error::{Error, Result};

const INDEX_BITS: u32 = 24;

/// Standard normal stream for one `(seed, path, noise index)` triple.
///
/// The master seed keys a ChaCha generator and `(path, index)` selects its
/// 64-bit stream, so any path can be generated independently of the others.
pub struct NormalStream {
    rng: ChaCha12Rng,
}

impl NormalStream {
    pub fn new(seed: u64, path: u64, index: u64) -> Self {
        assert!(index < (1 << INDEX_BITS), "noise index {index} exceeds 2^{INDEX_BITS}");
        assert!(path < (1 << (64 - INDEX_BITS)), "path {path} exceeds the stream space");
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream((path << INDEX_BITS) | index);
        Self { rng }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.rng.sample(StandardNormal);
        }
    }

    pub fn take(&mut self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        self.fill(&mut v);
        v
    }
}

/// `L z` for lower-triangular `L`, accumulated column by column.
pub(crate) fn lower_mul(factor: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let n = factor.nrows();
    let data = factor.as_slice();
    let mut out = vec![0.0; n];
    for (c, &zc) in z.iter().enumerate() {
        if zc == 0.0 {
            continue;
        }
        let col = &data[c * n + c..(c + 1) * n];
        for (o, l) in out[c..].iter_mut().zip(col) {
            *o += l * zc;
        }
    }
    out
}

/// Covariance of the fBm increments `B^H_{t_{k+1}} - B^H_{t_k}` on `grid`.
pub fn fbm_increment_covariance(grid: &TimeGrid, hurst: HurstParameter) -> DMatrix<f64> {
    let t = grid.points();
    let two_h = 2.0 * hurst.value();
    let p = |x: f64| x.abs().powf(two_h);
    let n = grid.steps();
    DMatrix::from_fn(n, n, |k, l| {
        0.5 * (p(t[k + 1] - t[l]) + p(t[k] - t[l + 1]) - p(t[k] - t[l]) - p(t[k + 1] - t[l + 1]))
    })
}

/// Exact fBm increments on a fixed grid via the Cholesky factor of their covariance.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: TimeGrid,
    hurst: HurstParameter,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl FbmSampler {
    pub fn new(grid: &TimeGrid, hurst: HurstParameter) -> Result<Self> {
        let gamma = fbm_increment_covariance(grid, hurst);
        let (factor, jitter) = factor_with_jitter(&gamma)?;
        Ok(Self {
            grid: grid.clone(),
            hurst,
            factor,
            jitter,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Increments `Delta B_{i,k}`, `k = 0..N`, for one path and noise index.
    pub fn increments(&self, seed: u64, path: usize, index: usize) -> Vec<f64> {
        let z = NormalStream::new(seed, path as u64, index as u64).take(self.grid.steps());
        lower_mul(&self.factor, &z)
    }
}

/// fBm increments indexed by `(path, noise index, step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmIncrements {
    pub grid: TimeGrid,
    pub hurst: HurstParameter,
    pub m: usize,
    pub paths: usize,
    pub seed: u64,
    data: Vec<f64>,
}

impl FbmIncrements {
    pub fn new(grid: TimeGrid, hurst: HurstParameter, m: usize, paths: usize, seed: u64, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * paths * grid.steps() {
            return Err(Error::invalid("fBm increment array has the wrong length"));
        }
        Ok(Self {
            grid,
            hurst,
            m,
            paths,
            seed,
            data,
        })
    }

    pub fn series(&self, path: usize, index: usize) -> &[f64] {
        let n = self.grid.steps();
        let o = (path * self.m + index) * n;
        &self.data[o..o + n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

pub fn sample_fbm_increments(
    grid: &TimeGrid,
    hurst: HurstParameter,
    m: usize,
    paths: usize,
    seed: u64,
) -> Result<FbmIncrements> {
    let sampler = FbmSampler::new(grid, hurst)?;
    let data: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            (0..m)
                .flat_map(|i| sampler.increments(seed, p, i))
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .concat();
    FbmIncrements::new(grid.clone(), hurst, m, paths, seed, data)
}

/// Exact sampler for `I_{i,k}` from one covariance assembly per noise index.
#[derive(Debug, Clone)]
pub struct ExactNoiseSampler {
    assemblies: Vec<CovarianceAssembly>,
}

impl ExactNoiseSampler {
    pub fn new(assemblies: Vec<CovarianceAssembly>) -> Result<Self> {
        let first = assemblies
            .first()
            .ok_or_else(|| Error::invalid("at least one covariance assembly is required"))?;
        if assemblies
            .iter()
            .any(|a| a.grid != first.grid || a.n != first.n || a.hurst != first.hurst)
        {
            return Err(Error::invalid("covariance assemblies disagree on grid, dimension or H"));
        }
        Ok(Self { assemblies })
    }

    pub fn noise_count(&self) -> usize {
        self.assemblies.len()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.assemblies[0].grid
    }

    pub fn dim(&self) -> usize {
        self.assemblies[0].n
    }

    /// Samples for one path, laid out `(i, k, j)`.
    pub fn sample_path(&self, seed: u64, path: usize) -> Vec<f64> {
        self.assemblies
            .iter()
            .enumerate()
            .flat_map(|(i, asm)| {
                let z = NormalStream::new(seed, path as u64, i as u64).take(asm.size());
                lower_mul(&asm.factor, &z)
            })
            .collect()
    }

    pub fn sample(&self, paths: usize, seed: u64) -> Result<NoiseBlock> {
        let samples: Vec<f64> = (0..paths)
            .into_par_iter()
            .map(|p| self.sample_path(seed, p))
            .collect::<Vec<_>>()
            .concat();
        NoiseBlock::new(
            self.grid().clone(),
            self.assemblies[0].hurst,
            paths,
            self.noise_count(),
            self.dim(),
            samples,
            GeneratorTag::ExactCholesky,
            seed,
        )
    }

    /// One-path block for path `p`.
    pub fn sample_single(&self, seed: u64, path: usize) -> Result<NoiseBlock> {
        NoiseBlock::new(
            self.grid().clone(),
            self.assemblies[0].hurst,
            1,
            self.noise_count(),
            self.dim(),
            self.sample_path(seed, path),
            GeneratorTag::ExactCholesky,
            seed,
        )
    }
}

/// `m` independent noise indices sharing one covariance (identical `b_i`).
pub fn sample_noise_exact(assembly: &CovarianceAssembly, m: usize, paths: usize, seed: u64) -> Result<NoiseBlock> {
    if m == 0 {
        return Err(Error::invalid("at least one noise index is required"));
    }
    ExactNoiseSampler::new(vec![assembly.clone(); m])?.sample(paths, seed)
}

/// One assembly per noise index.
pub fn sample_noise_exact_multi(assemblies: &[CovarianceAssembly], paths: usize, seed: u64) -> Result<NoiseBlock> {
    ExactNoiseSampler::new(assemblies.to_vec())?.sample(paths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfun::SquareMatrix;
    use crate::noise::{assemble_covariance, AssemblyOptions, NoiseCoefficient};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn h(v: f64) -> HurstParameter {
        HurstParameter::new(v).unwrap()
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a = NormalStream::new(7, 3, 1).take(16);
        let b = NormalStream::new(7, 3, 1).take(16);
        let c = NormalStream::new(7, 3, 2).take(16);
        let d = NormalStream::new(7, 4, 1).take(16);
        let e = NormalStream::new(8, 3, 1).take(16);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, e);
    }

    #[test]
    fn gamma_unit_steps() {
        let grid = TimeGrid::uniform(0.0, 2.0, 2).unwrap();
        let g = fbm_increment_covariance(&grid, h(0.9));
        assert_relative_eq!(g[(0, 1)], 0.7411011265922482, max_relative = 1e-14);
        assert_relative_eq!(g[(0, 0)], 1.0, max_relative = 1e-14);
        assert_eq!(g[(0, 1)], g[(1, 0)]);
    }

    #[test]
    fn gamma_is_psd_on_irregular_grid() {
        let grid = TimeGrid::new(vec![0.0, 0.01, 0.3, 0.31, 0.9, 2.0]).unwrap();
        let g = fbm_increment_covariance(&grid, h(0.6));
        assert_eq!(g, g.transpose());
        let eig = nalgebra::SymmetricEigen::new(g).eigenvalues;
        assert!(eig.min() > 0.0);
    }

    #[test]
    fn unit_fbm_variance() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let paths = 50_000;
        let inc = sample_fbm_increments(&grid, h(0.75), 1, paths, 11).unwrap();
        let var = inc.data().iter().map(|x| x * x).sum::<f64>() / paths as f64;
        // stderr of a variance estimate of a unit normal: sqrt(2 / paths)
        assert!((var - 1.0).abs() < 3.0 * (2.0 / paths as f64).sqrt(), "var {var}");
    }

    #[test]
    fn empty_block_for_zero_paths() {
        let grid = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        let b = NoiseCoefficient::constant(DVector::from_element(1, 1.0));
        let asm = assemble_covariance(&SquareMatrix::zeros(1), &b, &grid, h(0.7), AssemblyOptions::default()).unwrap();
        let block = sample_noise_exact(&asm, 2, 0, 1).unwrap();
        assert!(block.is_empty());
        assert_eq!(block.paths(), 0);
    }

    #[test]
    fn exact_sampling_is_deterministic() {
        let grid = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
        let b = NoiseCoefficient::constant(DVector::from_element(1, 1.0));
        let asm = assemble_covariance(&SquareMatrix::scalar(-1.0).unwrap(), &b, &grid, h(0.7), AssemblyOptions::default())
            .unwrap();
        let x = sample_noise_exact(&asm, 2, 5, 42).unwrap();
        let y = sample_noise_exact(&asm, 2, 5, 42).unwrap();
        assert_eq!(x.samples(), y.samples());
        let single = ExactNoiseSampler::new(vec![asm.clone(), asm]).unwrap().sample_single(42, 3).unwrap();
        assert_eq!(single.samples(), x.path(3).unwrap().samples());
    }
}
