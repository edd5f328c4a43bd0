//! Grids, discrete belief distributions and divergence measures.
//!
//! Every distribution in a round lives on one shared [`BinGrid`], so that
//! priors, social histograms, marginals and posteriors are directly
//! comparable bin by bin.

use crate::error::{Error, Result};

/// Absolute tolerance for "mass sums to one" checks.
pub const MASS_SUM_TOL: f64 = 1e-9;

/// Uniform discretization of the prediction axis.
///
/// Bin `i` covers `[lower + i*width, lower + (i+1)*width)`; the last bin is
/// closed on the right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    lower: f64,
    upper: f64,
    bin_count: usize,
}

impl BinGrid {
    pub fn new(lower: f64, upper: f64, bin_count: usize) -> Result<Self> {
        if bin_count < 2 {
            return Err(Error::DegenerateGrid(bin_count));
        }
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(Error::InvalidBounds { lower, upper });
        }
        Ok(BinGrid {
            lower,
            upper,
            bin_count,
        })
    }

    /// Builds a grid covering `points`, padded on both sides by
    /// `padding_fraction` of the observed range. A zero range falls back to a
    /// symmetric one-unit span around the single value.
    pub fn from_points(points: &[f64], bin_count: usize, padding_fraction: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::NoObservations);
        }
        if bin_count < 2 {
            return Err(Error::DegenerateGrid(bin_count));
        }
        if !padding_fraction.is_finite() || padding_fraction < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "padding fraction {padding_fraction} must be non-negative"
            )));
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &p in points {
            if !p.is_finite() {
                return Err(Error::InvalidConfig(format!("non-finite point {p}")));
            }
            min = min.min(p);
            max = max.max(p);
        }
        let range = max - min;
        if range == 0.0 {
            Self::new(min - 0.5, min + 0.5, bin_count)
        } else {
            Self::new(
                min - padding_fraction * range,
                max + padding_fraction * range,
                bin_count,
            )
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower) / self.bin_count as f64
    }

    pub fn center(&self, index: usize) -> f64 {
        self.lower + (index as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bin_count).map(|i| self.center(i)).collect()
    }

    /// Bin edges, `bin_count + 1` values from `lower` to `upper`.
    pub fn edges(&self) -> Vec<f64> {
        let w = self.width();
        let mut e: Vec<f64> = (0..self.bin_count).map(|i| self.lower + i as f64 * w).collect();
        e.push(self.upper);
        e
    }

    /// Index of the bin containing `x`, clamping values outside the grid to
    /// the nearest bin. `upper` itself maps to the last bin.
    pub fn bin_index(&self, x: f64) -> usize {
        let raw = ((x - self.lower) / self.width()).floor();
        if raw < 0.0 {
            0
        } else if raw >= self.bin_count as f64 {
            self.bin_count - 1
        } else {
            raw as usize
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Kernel used to turn a point estimate into a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// All mass in the bin containing the point.
    Delta,
    /// Gaussian bumps evaluated at bin centers, then normalized.
    Gaussian,
}

/// Kernel bandwidth; `Auto` resolves to one bin width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

impl Bandwidth {
    pub fn resolve(&self, grid: &BinGrid) -> Result<f64> {
        match *self {
            Bandwidth::Auto => Ok(grid.width()),
            Bandwidth::Fixed(b) => {
                if b > 0.0 && b.is_finite() {
                    Ok(b)
                } else {
                    Err(Error::InvalidBandwidth(b))
                }
            }
        }
    }
}

/// Shared settings for constructing grids and distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionConfig {
    pub bin_count: usize,
    pub padding_fraction: f64,
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
    pub smoothing: f64,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        DistributionConfig {
            bin_count: 50,
            padding_fraction: 0.05,
            kernel: Kernel::Gaussian,
            bandwidth: Bandwidth::Auto,
            smoothing: 1.0,
        }
    }
}

/// Probability mass over a [`BinGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefDistribution {
    grid: BinGrid,
    mass: Vec<f64>,
}

impl BeliefDistribution {
    /// Validates non-negativity, length and unit total mass.
    pub fn new(grid: BinGrid, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.bin_count() {
            return Err(Error::LengthMismatch(mass.len(), grid.bin_count()));
        }
        let mut sum = 0.0;
        for (i, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "mass {m} in bin {i} is negative or non-finite"
                )));
            }
            sum += m;
        }
        if (sum - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "mass sums to {sum}, expected 1"
            )));
        }
        Ok(BeliefDistribution { grid, mass })
    }

    /// Normalizes non-negative weights into a distribution. Errors with
    /// [`Error::EmptyPosteriorSupport`] when the total weight is zero.
    pub fn from_unnormalized(grid: BinGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.bin_count() {
            return Err(Error::LengthMismatch(weights.len(), grid.bin_count()));
        }
        let mut total = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "weight {w} in bin {i} is negative or non-finite"
                )));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::EmptyPosteriorSupport);
        }
        let mass = weights.into_iter().map(|w| w / total).collect();
        Ok(BeliefDistribution { grid, mass })
    }

    pub fn uniform(grid: BinGrid) -> Self {
        let p = 1.0 / grid.bin_count() as f64;
        BeliefDistribution {
            grid,
            mass: vec![p; grid.bin_count()],
        }
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Mass-weighted mean of the bin centers.
    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, &m)| m * self.grid.center(i))
            .sum()
    }

    /// Center of the bin with the largest mass; ties go to the lowest index.
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = i;
            }
        }
        self.grid.center(best)
    }

    /// Mixes in a uniform floor of `epsilon` per bin, keeping total mass one.
    /// Guarantees strictly positive mass everywhere for `epsilon > 0`.
    pub fn with_floor(&self, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "floor {epsilon} must be non-negative"
            )));
        }
        let n = self.mass.len() as f64;
        let mass = self
            .mass
            .iter()
            .map(|&m| (m + epsilon) / (1.0 + n * epsilon))
            .collect();
        Ok(BeliefDistribution {
            grid: self.grid,
            mass,
        })
    }
}

/// Raw peer-prediction counts per bin, as shown to a participant.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialHistogram {
    grid: BinGrid,
    counts: Vec<u64>,
}

impl SocialHistogram {
    pub fn new(grid: BinGrid, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != grid.bin_count() {
            return Err(Error::LengthMismatch(counts.len(), grid.bin_count()));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::EmptyHistogram);
        }
        Ok(SocialHistogram { grid, counts })
    }

    /// Bins raw values onto the grid, clamping out-of-range values into the
    /// nearest edge bin.
    pub fn from_values(grid: BinGrid, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyHistogram);
        }
        let mut counts = vec![0u64; grid.bin_count()];
        for &v in values {
            counts[grid.bin_index(v)] += 1;
        }
        Ok(SocialHistogram { grid, counts })
    }

    /// Assigns weighted counts located at arbitrary positions (for example
    /// bin centers of a foreign grid) onto this grid.
    pub fn from_weighted_positions(grid: BinGrid, positions: &[(f64, u64)]) -> Result<Self> {
        let mut counts = vec![0u64; grid.bin_count()];
        for &(pos, c) in positions {
            counts[grid.bin_index(pos)] += c;
        }
        Self::new(grid, counts)
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Count-weighted mean of bin centers.
    pub fn mean(&self) -> f64 {
        let total = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * self.grid.center(i))
            .sum::<f64>()
            / total
    }

    /// Count-weighted population standard deviation of bin centers.
    pub fn std_dev(&self) -> f64 {
        let total = self.total() as f64;
        let mean = self.mean();
        let var = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let d = self.grid.center(i) - mean;
                c as f64 * d * d
            })
            .sum::<f64>()
            / total;
        var.sqrt()
    }
}

/// Turns a point estimate into a distribution on `grid`.
///
/// The point must lie inside the grid or within one bandwidth of it; a delta
/// kernel clamps a just-outside point into the nearest bin.
pub fn point_to_distribution(
    point: f64,
    grid: BinGrid,
    kernel: Kernel,
    bandwidth: Bandwidth,
) -> Result<BeliefDistribution> {
    let bw = bandwidth.resolve(&grid)?;
    if !point.is_finite() || point < grid.lower() - bw || point > grid.upper() + bw {
        return Err(Error::PointOffGrid {
            point,
            lower: grid.lower(),
            upper: grid.upper(),
        });
    }
    match kernel {
        Kernel::Delta => {
            let mut mass = vec![0.0; grid.bin_count()];
            mass[grid.bin_index(point)] = 1.0;
            Ok(BeliefDistribution { grid, mass })
        }
        Kernel::Gaussian => {
            let weights = (0..grid.bin_count())
                .map(|i| {
                    let d = grid.center(i) - point;
                    (-d * d / (2.0 * bw * bw)).exp()
                })
                .collect();
            BeliefDistribution::from_unnormalized(grid, weights)
        }
    }
}

/// Laplace-smoothed distribution of a histogram:
/// `mass[i] = (counts[i] + smoothing) / (total + smoothing * bins)`.
pub fn histogram_to_distribution(
    hist: &SocialHistogram,
    smoothing: f64,
) -> Result<BeliefDistribution> {
    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "smoothing {smoothing} must be non-negative"
        )));
    }
    let bins = hist.grid().bin_count() as f64;
    let denom = hist.total() as f64 + smoothing * bins;
    let mass = hist
        .counts()
        .iter()
        .map(|&c| (c as f64 + smoothing) / denom)
        .collect();
    Ok(BeliefDistribution {
        grid: *hist.grid(),
        mass,
    })
}

/// Kullback-Leibler divergence `sum p_i ln(p_i / q_i)` in nats, with the
/// convention `0 * ln(0/q) = 0`. Requires a shared grid and `q > 0` wherever
/// `p > 0`.
pub fn kl_divergence(p: &BeliefDistribution, q: &BeliefDistribution) -> Result<f64> {
    if p.grid() != q.grid() {
        return Err(Error::GridMismatch);
    }
    let mut sum = 0.0;
    for (i, (&pi, &qi)) in p.mass().iter().zip(q.mass()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::UnsmoothedSupport(i));
        }
        sum += pi * (pi / qi).ln();
    }
    Ok(sum)
}

/// Square matrix of pairwise divergences; entry `(i, j)` is
/// `kl_divergence(dists[i], dists[j])`. Asymmetric in general, zero on the
/// diagonal.
pub fn kl_matrix(dists: &[BeliefDistribution]) -> Result<Vec<Vec<f64>>> {
    let n = dists.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out[i][j] = kl_divergence(&dists[i], &dists[j])?;
            }
        }
    }
    Ok(out)
}
