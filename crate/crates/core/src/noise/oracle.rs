use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{FbmIncrements, GeneratorTag, NoiseBlock, NoiseCoefficient, TimeGrid};
use crate::error::{Error, Result};
use crate::matfun::{expm, SquareMatrix};

fn step_exponentials(a: &SquareMatrix, grid: &TimeGrid) -> Result<Vec<DMatrix<f64>>> {
    let mut cache: HashMap<u64, DMatrix<f64>> = HashMap::new();
    grid.step_sizes()
        .map(|h| {
            if let Some(e) = cache.get(&h.to_bits()) {
                return Ok(e.clone());
            }
            let e = expm(a, h)?.into_entries();
            cache.insert(h.to_bits(), e.clone());
            Ok(e)
        })
        .collect()
}

/// Left-point Riemann-Stieltjes sums of the convolution integrals on a grid.
///
/// Each step contributes `e^{A h_l} b_i(t_l) Delta B_{i,l}`; aggregating the
/// result onto a coarser grid yields the left-point sum over the coarse step.
#[derive(Debug, Clone)]
pub struct RiemannOracle {
    grid: TimeGrid,
    n: usize,
    /// `e^{A h_l} b_i(t_l)`, indexed `[i][l]`.
    weights: Vec<Vec<DVector<f64>>>,
}

impl RiemannOracle {
    pub fn new(a: &SquareMatrix, b: &[NoiseCoefficient], grid: &TimeGrid) -> Result<Self> {
        let n = a.dim();
        if let Some(bad) = b.iter().find(|bi| bi.dim() != n) {
            return Err(Error::invalid(format!(
                "noise coefficient has dimension {}, matrix has {n}",
                bad.dim()
            )));
        }
        let exps = step_exponentials(a, grid)?;
        let t = grid.points();
        let weights = b
            .iter()
            .map(|bi| {
                exps.iter()
                    .enumerate()
                    .map(|(l, e)| e * bi.eval(t[l]))
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            n,
            weights,
        })
    }

    pub fn noise_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Increments for one path, `(i, k, j)` layout; `increments[i]` is `Delta B_{i,.}`.
    pub fn apply_path(&self, increments: &[&[f64]]) -> Vec<f64> {
        let steps = self.grid.steps();
        let mut out = Vec::with_capacity(self.weights.len() * steps * self.n);
        for (w_i, db) in self.weights.iter().zip(increments) {
            for (w, &d) in w_i.iter().zip(db.iter()) {
                out.extend(w.iter().map(|x| x * d));
            }
        }
        out
    }
}

/// Riemann-oracle noise on `fine_grid` from fBm increments on the same grid.
pub fn conv_riemann_oracle(
    a: &SquareMatrix,
    b: &[NoiseCoefficient],
    fine_grid: &TimeGrid,
    increments: &FbmIncrements,
) -> Result<NoiseBlock> {
    if &increments.grid != fine_grid {
        return Err(Error::GridMismatch("fBm increments live on a different grid".into()));
    }
    if increments.m != b.len() {
        return Err(Error::invalid(format!(
            "{} noise coefficients for {} fBm components",
            b.len(),
            increments.m
        )));
    }
    let oracle = RiemannOracle::new(a, b, fine_grid)?;
    let mut samples = Vec::with_capacity(increments.paths * b.len() * fine_grid.steps() * a.dim());
    for p in 0..increments.paths {
        let series: Vec<&[f64]> = (0..b.len()).map(|i| increments.series(p, i)).collect();
        samples.extend(oracle.apply_path(&series));
    }
    NoiseBlock::new(
        fine_grid.clone(),
        increments.hurst,
        increments.paths,
        b.len(),
        a.dim(),
        samples,
        GeneratorTag::RiemannOracle,
        increments.seed,
    )
}

/// Exact transfer of fine-grid increments onto a nested coarse grid.
#[derive(Debug, Clone)]
pub struct Aggregator {
    fine: TimeGrid,
    coarse: TimeGrid,
    indices: Vec<usize>,
    exps: Vec<DMatrix<f64>>,
}

impl Aggregator {
    pub fn new(a: &SquareMatrix, fine: &TimeGrid, coarse: &TimeGrid) -> Result<Self> {
        let indices = fine.nested_indices(coarse)?;
        Ok(Self {
            fine: fine.clone(),
            coarse: coarse.clone(),
            indices,
            exps: step_exponentials(a, fine)?,
        })
    }

    pub fn coarse(&self) -> &TimeGrid {
        &self.coarse
    }

    /// `I^c_{i,k} = sum_{l in step k} e^{A(t_{k+1} - tau_{l+1})} I^f_{i,l}`, accumulated
    /// as `acc <- e^{A h_l} acc + I^f_l`.
    pub fn apply(&self, noise: &NoiseBlock) -> Result<NoiseBlock> {
        if noise.grid() != &self.fine {
            return Err(Error::GridMismatch("noise block is not on the aggregator's fine grid".into()));
        }
        let n = noise.dim();
        if self.exps.first().map(|e| e.nrows()) != Some(n) {
            return Err(Error::invalid("noise dimension does not match the matrix"));
        }
        let coarse_steps = self.coarse.steps();
        let mut samples = Vec::with_capacity(noise.paths() * noise.noise_count() * coarse_steps * n);
        let mut acc = DVector::zeros(n);
        let mut tmp = DVector::zeros(n);
        for p in 0..noise.paths() {
            for i in 0..noise.noise_count() {
                for k in 0..coarse_steps {
                    acc.fill(0.0);
                    for l in self.indices[k]..self.indices[k + 1] {
                        self.exps[l].mul_to(&acc, &mut tmp);
                        for ((a, t), x) in acc.iter_mut().zip(tmp.iter()).zip(noise.increment(p, i, l)) {
                            *a = t + x;
                        }
                    }
                    samples.extend(acc.iter());
                }
            }
        }
        Ok(NoiseBlock::new(
            self.coarse.clone(),
            noise.hurst(),
            noise.paths(),
            noise.noise_count(),
            n,
            samples,
            GeneratorTag::Aggregated,
            noise.seed(),
        )?
        .with_lineage(noise.root_checksum()))
    }
}

pub fn aggregate_to_coarse(noise: &NoiseBlock, a: &SquareMatrix, coarse_grid: &TimeGrid) -> Result<NoiseBlock> {
    Aggregator::new(a, noise.grid(), coarse_grid)?.apply(noise)
}
