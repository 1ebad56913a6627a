//! Binomial and Poisson point processes under a bounded density on R^d.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{config, input, Error, Result};
use crate::geometry::RegionSpec;
use crate::rng::{self, StreamRng};
use crate::stats::normal_cdf;

/// Probability density of the sampled points.
///
/// Piecewise-constant weights are normalized on construction so that the
/// cell-volume-weighted sum is one; the stored `weights` are density values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", try_from = "RawDensity")]
pub enum Density {
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    GaussianIsotropic {
        mean: Vec<f64>,
        sigma: f64,
    },
    PiecewiseConstantGrid {
        lo: Vec<f64>,
        hi: Vec<f64>,
        /// Cells per axis.
        shape: Vec<usize>,
        /// Row-major, last axis fastest.
        weights: Vec<f64>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawDensity {
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    GaussianIsotropic { mean: Vec<f64>, sigma: f64 },
    PiecewiseConstantGrid { lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>, weights: Vec<f64> },
}

impl TryFrom<RawDensity> for Density {
    type Error = Error;

    fn try_from(raw: RawDensity) -> Result<Self> {
        match raw {
            RawDensity::UniformBox { lo, hi } => Density::uniform_box(lo, hi),
            RawDensity::GaussianIsotropic { mean, sigma } => Density::gaussian(mean, sigma),
            RawDensity::PiecewiseConstantGrid { lo, hi, shape, weights } => {
                Density::piecewise_grid(lo, hi, shape, weights)
            }
        }
    }
}

fn check_box(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.is_empty() {
        return config("density dimension must be positive");
    }
    if lo.len() != hi.len() {
        return config(format!("box bounds have lengths {} and {}", lo.len(), hi.len()));
    }
    for (a, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        if !(l.is_finite() && h.is_finite() && l < h) {
            return config(format!("box axis {a}: need finite lo < hi, got [{l}, {h}]"));
        }
    }
    Ok(())
}

impl Density {
    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_box(&lo, &hi)?;
        Ok(Density::UniformBox { lo, hi })
    }

    /// Uniform density on `[0, 1]^d`.
    pub fn unit_cube(d: usize) -> Result<Self> {
        Density::uniform_box(vec![0.0; d], vec![1.0; d])
    }

    pub fn gaussian(mean: Vec<f64>, sigma: f64) -> Result<Self> {
        if mean.is_empty() {
            return config("density dimension must be positive");
        }
        if !(sigma.is_finite() && sigma > 0.0) || mean.iter().any(|m| !m.is_finite()) {
            return config(format!("gaussian needs finite mean and sigma > 0, got sigma={sigma}"));
        }
        Ok(Density::GaussianIsotropic { mean, sigma })
    }

    pub fn piecewise_grid(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        check_box(&lo, &hi)?;
        if shape.len() != lo.len() || shape.contains(&0) {
            return config("piecewise grid shape must have one positive entry per axis");
        }
        let cells: usize = shape.iter().product();
        if weights.len() != cells {
            return config(format!("piecewise grid has {cells} cells but {} weights", weights.len()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return config("piecewise grid weights must be finite and nonnegative");
        }
        let cell_vol: f64 = lo.iter().zip(&hi).zip(&shape).map(|((l, h), &s)| (h - l) / s as f64).product();
        let mass: f64 = weights.iter().sum::<f64>() * cell_vol;
        if mass <= 0.0 {
            return config("piecewise grid weights sum to zero");
        }
        let weights = weights.into_iter().map(|w| w / mass).collect();
        Ok(Density::PiecewiseConstantGrid { lo, hi, shape, weights })
    }

    pub fn dim(&self) -> usize {
        match self {
            Density::UniformBox { lo, .. } | Density::PiecewiseConstantGrid { lo, .. } => lo.len(),
            Density::GaussianIsotropic { mean, .. } => mean.len(),
        }
    }

    /// `‖f‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Density::UniformBox { lo, hi } => 1.0 / box_volume(lo, hi),
            Density::GaussianIsotropic { sigma, .. } => (2.0 * PI * sigma * sigma).powf(-(self.dim() as f64) / 2.0),
            Density::PiecewiseConstantGrid { weights, .. } => weights.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Pointwise value `f(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return input(format!("point has dimension {}, density has {}", x.len(), self.dim()));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Density::UniformBox { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| l <= v && v <= h);
                if inside {
                    1.0 / box_volume(lo, hi)
                } else {
                    0.0
                }
            }
            Density::GaussianIsotropic { mean, sigma } => {
                let s2 = sigma * sigma;
                let r2: f64 = x.iter().zip(mean).map(|(a, m)| (a - m) * (a - m)).sum();
                (2.0 * PI * s2).powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * s2)).exp()
            }
            Density::PiecewiseConstantGrid { lo, hi, shape, weights } => match grid_cell(lo, hi, shape, x) {
                Some(c) => weights[c],
                None => 0.0,
            },
        }
    }

    /// Exact `∫_A f(x)^m dx` for `m ≥ 1`.
    pub fn power_integral(&self, m: u32, region: &RegionSpec) -> Result<f64> {
        if m == 0 {
            return input("power_integral needs m >= 1");
        }
        region.check_dim(self.dim())?;
        let mf = f64::from(m);
        Ok(match self {
            Density::UniformBox { lo, hi } => {
                let c = 1.0 / box_volume(lo, hi);
                c.powi(m as i32) * region.measure_within(lo, hi)
            }
            Density::GaussianIsotropic { mean, sigma } => {
                let d = self.dim() as f64;
                let s = sigma / mf.sqrt();
                let scale = (2.0 * PI * sigma * sigma).powf(-d * (mf - 1.0) / 2.0) * mf.powf(-d / 2.0);
                let box_mass = |blo: &[f64], bhi: &[f64]| -> f64 {
                    mean.iter()
                        .zip(blo.iter().zip(bhi))
                        .map(|(mu, (l, h))| normal_cdf((h - mu) / s) - normal_cdf((l - mu) / s))
                        .product()
                };
                let mass = match region {
                    RegionSpec::All => 1.0,
                    RegionSpec::Box { lo, hi } => box_mass(lo, hi),
                    RegionSpec::BoxComplement { lo, hi } => 1.0 - box_mass(lo, hi),
                };
                scale * mass
            }
            Density::PiecewiseConstantGrid { lo, hi, shape, weights } => {
                let mut total = 0.0;
                let mut cell = vec![0usize; shape.len()];
                let mut clo = vec![0.0; shape.len()];
                let mut chi = vec![0.0; shape.len()];
                for &w in weights {
                    if w > 0.0 {
                        for a in 0..shape.len() {
                            let width = (hi[a] - lo[a]) / shape[a] as f64;
                            clo[a] = lo[a] + width * cell[a] as f64;
                            chi[a] = clo[a] + width;
                        }
                        total += w.powi(m as i32) * region.measure_within(&clo, &chi);
                    }
                    for a in (0..shape.len()).rev() {
                        cell[a] += 1;
                        if cell[a] < shape[a] {
                            break;
                        }
                        cell[a] = 0;
                    }
                }
                total
            }
        })
    }

    /// Draws one point into `out`.
    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, sampler: &mut Sampler, out: &mut Vec<f64>) {
        match self {
            Density::UniformBox { lo, hi } => {
                for (l, h) in lo.iter().zip(hi) {
                    out.push(l + (h - l) * rng.random::<f64>());
                }
            }
            Density::GaussianIsotropic { mean, sigma } => {
                for m in mean {
                    out.push(m + sigma * sampler.standard_normal(rng));
                }
            }
            Density::PiecewiseConstantGrid { lo, hi, shape, .. } => {
                let u: f64 = rng.random();
                let cdf = &sampler.cell_cdf;
                let total = *cdf.last().expect("grid has cells");
                let target = u * total;
                // first cell whose cumulative weight exceeds the target; never a zero-mass cell
                let mut c = cdf.partition_point(|&v| v <= target).min(cdf.len() - 1);
                let start = out.len();
                out.resize(start + shape.len(), 0.0);
                for a in (0..shape.len()).rev() {
                    let idx = c % shape[a];
                    c /= shape[a];
                    let width = (hi[a] - lo[a]) / shape[a] as f64;
                    out[start + a] = lo[a] + width * (idx as f64 + rng.random::<f64>());
                }
            }
        }
    }
}

/// Per-call sampling state: cached Box-Muller variate and grid CDF.
pub(crate) struct Sampler {
    spare_normal: Option<f64>,
    cell_cdf: Vec<f64>,
}

impl Sampler {
    pub(crate) fn new(density: &Density) -> Self {
        let cell_cdf = match density {
            Density::PiecewiseConstantGrid { weights, .. } => {
                let mut acc = 0.0;
                weights
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        Sampler { spare_normal: None, cell_cdf }
    }

    /// Box-Muller on the uniform stream.
    pub(crate) fn standard_normal<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let u2: f64 = rng.random();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare_normal = Some(radius * s);
        radius * c
    }
}

fn box_volume(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(hi).map(|(l, h)| h - l).product()
}

fn grid_cell(lo: &[f64], hi: &[f64], shape: &[usize], x: &[f64]) -> Option<usize> {
    let mut c = 0usize;
    for a in 0..shape.len() {
        if !(lo[a] <= x[a] && x[a] <= hi[a]) {
            return None;
        }
        let t = (x[a] - lo[a]) / (hi[a] - lo[a]) * shape[a] as f64;
        let idx = (t.floor() as usize).min(shape[a] - 1);
        c = c * shape[a] + idx;
    }
    Some(c)
}

/// How the number of points was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Binomial(u64),
    Poisson(f64),
}

/// Immutable set of `d`-dimensional points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl PointCloud {
    /// Builds a cloud from explicit points; used for hand-made instances.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(1, Vec::len);
        if dim == 0 {
            return input("points must have positive dimension");
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return input(format!("mixed point dimensions {} and {}", dim, p.len()));
            }
            coords.extend_from_slice(p);
        }
        Ok(PointCloud { dim, coords, provenance: Provenance::Binomial(points.len() as u64), seed: 0 })
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return input(format!("{} coordinates do not split into dimension {dim}", coords.len()));
        }
        let n = coords.len() / dim;
        Ok(PointCloud { dim, coords, provenance: Provenance::Binomial(n as u64), seed: 0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

fn draw_points(count: usize, density: &Density, rng: &mut StreamRng) -> Vec<f64> {
    let mut sampler = Sampler::new(density);
    let mut coords = Vec::with_capacity(count * density.dim());
    for _ in 0..count {
        density.sample_into(rng, &mut sampler, &mut coords);
    }
    coords
}

/// `n` i.i.d. draws from `density`.
pub fn sample_binomial(n: u64, density: &Density, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return input("binomial process needs n >= 1");
    }
    let mut rng = rng::stream(seed);
    let coords = draw_points(n as usize, density, &mut rng);
    Ok(PointCloud { dim: density.dim(), coords, provenance: Provenance::Binomial(n), seed })
}

/// Coupled Poisson process: `N ~ Poisson(lambda)` first, then `N` i.i.d. draws.
pub fn sample_poisson(lambda: f64, density: &Density, seed: u64) -> Result<PointCloud> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return input(format!("poisson intensity must be positive, got {lambda}"));
    }
    let mut rng = rng::stream(seed);
    let count = Poisson::new(lambda).map_err(|e| Error::Input(e.to_string()))?.sample(&mut rng) as usize;
    let coords = draw_points(count, density, &mut rng);
    Ok(PointCloud { dim: density.dim(), coords, provenance: Provenance::Poisson(lambda), seed })
}

/// `f(x)`; errors on dimension mismatch.
pub fn density_eval(density: &Density, x: &[f64]) -> Result<f64> {
    density.eval(x)
}
