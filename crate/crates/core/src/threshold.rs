//! Metric thresholds for SNR-based early termination.
//!
//! If the all-zero codeword is sent over a BI-AWGN channel with noise
//! variance `sigma2`, each channel LLR is `Y ~ N(2/sigma2, 4/sigma2)` and the
//! path metric of the transmitted codeword is `sum_i min(0, Y_i)`. A metric
//! threshold is a low quantile of that sum.
//!
//! Each term `min(0, Y)` has a density on `(-inf, 0)` plus an atom at 0. The
//! law of the sum is computed exactly (up to discretization) by repeated
//! convolution of such mixed distributions; a CLT approximation is provided
//! for comparison.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Default grid step in LLR units.
pub const DEFAULT_GRID_STEP: f64 = 0.005;

/// Width of the base grid below zero, in LLR standard deviations.
pub const BASE_SPAN_SIGMAS: f64 = 12.0;

/// Tail mass that may be dropped from the far end of the grid after each
/// convolution.
const TAIL_EPSILON: f64 = 1e-18;

/// Below this many multiply-adds convolution is done directly.
const DIRECT_LIMIT: usize = 1 << 14;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// BI-AWGN noise level and the induced LLR statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelNoise {
    sigma2: f64,
}

impl ChannelNoise {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::arg(format!(
                "noise variance must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn llr_mean(&self) -> f64 {
        2.0 / self.sigma2
    }

    pub fn llr_var(&self) -> f64 {
        4.0 / self.sigma2
    }

    pub fn llr_std(&self) -> f64 {
        self.llr_var().sqrt()
    }

    fn llr_law(&self) -> Normal {
        Normal::new(self.llr_mean(), self.llr_std()).expect("finite positive parameters")
    }
}

/// Mean and variance of `min(0, Y)` for `Y ~ N(mu, s^2)`:
///
/// `E = mu Phi(a) - s phi(a)`, `E[X^2] = (mu^2 + s^2) Phi(a) - mu s phi(a)`,
/// with `a = -mu / s`.
pub fn truncated_moments(noise: &ChannelNoise) -> (f64, f64) {
    let mu = noise.llr_mean();
    let s = noise.llr_std();
    let a = -mu / s;
    let z = std_normal();
    let (cdf, pdf) = (z.cdf(a), z.pdf(a));
    let mean = mu * cdf - s * pdf;
    let second = (mu * mu + s * s) * cdf - mu * s * pdf;
    (mean, second - mean * mean)
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "probability must lie in (0, 1), got {p}"
        )))
    }
}

/// Quantile `p` of `N(n mu~, n sigma~^2)`, the normal approximation to the
/// all-zero-codeword metric of length `n`.
pub fn clt_threshold(n: usize, noise: &ChannelNoise, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("code length must be positive"));
    }
    check_probability(p)?;
    let (mean, var) = truncated_moments(noise);
    let n = n as f64;
    Ok(n * mean + std_normal().inverse_cdf(p) * (n * var).sqrt())
}

/// Result of inverting a mixed CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantile {
    pub value: f64,
    /// Set when `p` exceeds the continuous mass, so the quantile is the atom
    /// at zero.
    pub at_point_mass: bool,
}

/// Distribution on `(-inf, 0]`: piecewise-constant density over cells
/// `(-(j+1) step, -j step]`, `j = 0..len`, plus an exact atom at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDistribution {
    step: f64,
    /// Probability mass of each cell; cell 0 touches zero.
    cell_mass: Vec<f64>,
    mass_at_zero: f64,
}

impl MixedDistribution {
    pub fn new(step: f64, cell_mass: Vec<f64>, mass_at_zero: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::arg(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if !(0.0..=1.0).contains(&mass_at_zero) {
            return Err(Error::arg(format!(
                "atom mass {mass_at_zero} outside [0, 1]"
            )));
        }
        if cell_mass.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::arg("cell masses must be finite and nonnegative"));
        }
        Ok(Self {
            step,
            cell_mass,
            mass_at_zero,
        })
    }

    /// Unit atom at zero, the identity of [`convolve`](Self::convolve).
    pub fn point_mass_at_zero(step: f64) -> Result<Self> {
        Self::new(step, Vec::new(), 1.0)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn grid_start(&self) -> f64 {
        -(self.cell_mass.len() as f64) * self.step
    }

    pub fn cell_mass(&self) -> &[f64] {
        &self.cell_mass
    }

    /// Density value on cell `j`.
    pub fn density(&self, j: usize) -> f64 {
        self.cell_mass.get(j).map_or(0.0, |w| w / self.step)
    }

    pub fn mass_at_zero(&self) -> f64 {
        self.mass_at_zero
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_at_zero + self.continuous_mass()
    }

    fn continuous_mass(&self) -> f64 {
        self.cell_mass.iter().rev().sum()
    }

    pub fn mean(&self) -> f64 {
        self.cell_mass
            .iter()
            .enumerate()
            .map(|(j, w)| -w * (j as f64 + 0.5) * self.step)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let within = self.step * self.step / 12.0;
        let spread: f64 = self
            .cell_mass
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let d = -(j as f64 + 0.5) * self.step - mean;
                w * (d * d + within)
            })
            .sum();
        spread + self.mass_at_zero * mean * mean
    }

    /// `P(X <= z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z >= 0.0 {
            return 1.0;
        }
        let pos = -z / self.step;
        let j = pos.floor() as usize;
        if j >= self.cell_mass.len() {
            return 0.0;
        }
        let below: f64 = self.cell_mass[j + 1..].iter().rev().sum();
        // z lies in cell j; the part of the cell at or below z
        let frac = (j as f64 + 1.0) - pos;
        below + self.cell_mass[j] * frac
    }

    /// Smallest `z` with `P(X <= z) >= p`, linear within a cell.
    pub fn quantile(&self, p: f64) -> Result<Quantile> {
        check_probability(p)?;
        let mut below = 0.0;
        for (j, &w) in self.cell_mass.iter().enumerate().rev() {
            if below + w >= p && w > 0.0 {
                let value = -((j + 1) as f64) * self.step + self.step * (p - below) / w;
                return Ok(Quantile {
                    value: value.min(-(j as f64) * self.step),
                    at_point_mass: false,
                });
            }
            below += w;
        }
        Ok(Quantile {
            value: 0.0,
            at_point_mass: true,
        })
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`.
    ///
    /// Continuous-continuous terms are convolved cell by cell (the sum of two
    /// uniform cells is a triangle split evenly over two result cells),
    /// continuous-atom terms scale each density by the other atom, and the
    /// atoms multiply.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if (self.step - other.step).abs() > 1e-12 * self.step.max(other.step) {
            return Err(Error::arg(format!(
                "grid steps differ: {} vs {}",
                self.step, other.step
            )));
        }
        let (la, lb) = (self.cell_mass.len(), other.cell_mass.len());
        let len = la.max(lb).max(if la > 0 && lb > 0 { la + lb } else { 0 });
        let mut cells = vec![0.0; len];

        if la > 0 && lb > 0 {
            let raw = discrete_convolution(&self.cell_mass, &other.cell_mass);
            for (k, &v) in raw.iter().enumerate() {
                cells[k] += 0.5 * v;
                cells[k + 1] += 0.5 * v;
            }
        }
        for (c, &w) in cells.iter_mut().zip(&self.cell_mass) {
            *c += w * other.mass_at_zero;
        }
        for (c, &w) in cells.iter_mut().zip(&other.cell_mass) {
            *c += w * self.mass_at_zero;
        }

        let mut out = Self {
            step: self.step,
            cell_mass: cells,
            mass_at_zero: self.mass_at_zero * other.mass_at_zero,
        };
        out.trim_tail();
        Ok(out)
    }

    /// Law of the sum of `n` independent copies, by repeated doubling.
    pub fn n_fold(&self, n: usize) -> Result<Self> {
        match n {
            0 => Self::point_mass_at_zero(self.step),
            1 => Ok(self.clone()),
            _ => {
                let half = self.n_fold(n / 2)?;
                let doubled = half.convolve(&half)?;
                if n % 2 == 1 {
                    doubled.convolve(self)
                } else {
                    Ok(doubled)
                }
            }
        }
    }

    /// Drops negligible mass from the far end of the grid and rescales the
    /// continuous part so the total stays one.
    fn trim_tail(&mut self) {
        let before = self.continuous_mass();
        let mut dropped = 0.0;
        while let Some(&w) = self.cell_mass.last() {
            if dropped + w > TAIL_EPSILON {
                break;
            }
            dropped += w;
            self.cell_mass.pop();
        }
        for w in &mut self.cell_mass {
            *w = w.max(0.0);
        }
        let after = self.continuous_mass();
        if after > 0.0 {
            let scale = before / after;
            self.cell_mass.iter_mut().for_each(|w| *w *= scale);
        }
    }
}

fn discrete_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    if a.len().saturating_mul(b.len()) <= DIRECT_LIMIT {
        let mut out = vec![0.0; out_len];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let lift = |v: &[f64]| {
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (slot, &x) in buf.iter_mut().zip(v) {
            slot.re = x;
        }
        buf
    };
    let mut fa = lift(a);
    let mut fb = lift(b);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..out_len]
        .iter()
        .map(|c| (c.re * scale).max(0.0))
        .collect()
}

/// Law of `min(0, Y)`, `Y ~ N(2/sigma2, 4/sigma2)`, on a grid of `step`
/// reaching `span` below zero. `span` must cover at least
/// [`BASE_SPAN_SIGMAS`] LLR standard deviations.
pub fn truncated_base(noise: &ChannelNoise, step: f64, span: f64) -> Result<MixedDistribution> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::arg(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let needed = BASE_SPAN_SIGMAS * noise.llr_std();
    if !span.is_finite() || span < needed * (1.0 - 1e-12) {
        return Err(Error::arg(format!(
            "grid span {span} is shorter than {BASE_SPAN_SIGMAS} LLR standard deviations ({needed})"
        )));
    }
    let law = noise.llr_law();
    let cells = (span / step).ceil() as usize;
    let atom = law.sf(0.0);
    let mut upper = law.cdf(0.0);
    let mut mass = Vec::with_capacity(cells);
    for j in 0..cells {
        let lower = law.cdf(-((j + 1) as f64) * step);
        mass.push((upper - lower).max(0.0));
        upper = lower;
    }
    let mut dist = MixedDistribution::new(step, mass, atom)?;
    let cont = dist.continuous_mass();
    if cont > 0.0 {
        let scale = (1.0 - atom) / cont;
        dist.cell_mass.iter_mut().for_each(|w| *w *= scale);
    }
    dist.trim_tail();
    Ok(dist)
}

/// Base distribution with the default span.
pub fn default_base(noise: &ChannelNoise, step: f64) -> Result<MixedDistribution> {
    truncated_base(noise, step, BASE_SPAN_SIGMAS * noise.llr_std())
}

/// Quantile `p` of the exact all-zero-codeword metric of length `n`, from the
/// `n`-fold convolution of the truncated base on a grid of `step`.
pub fn precise_threshold(n: usize, noise: &ChannelNoise, p: f64, step: f64) -> Result<Quantile> {
    if n == 0 {
        return Err(Error::arg("code length must be positive"));
    }
    check_probability(p)?;
    default_base(noise, step)?.n_fold(n)?.quantile(p)
}
