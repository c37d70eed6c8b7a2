//! Dispersal and competition kernels.
//!
//! Three even probability densities on the line, their periodized
//! versions on a torus of length `L`, and grid discretizations used by
//! the deterministic solvers and the truncated hierarchy.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass allowed to fall outside the periodization window.
pub const PERIODIZATION_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Tophat,
    Laplace,
}

/// An even probability density on the real line.
///
/// `scale` is the standard deviation for `Gaussian`, the half-width for
/// `Tophat` and the decay length for `Laplace`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: KernelFamily,
    pub scale: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self { family, scale })
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self::new(KernelFamily::Gaussian, sigma).expect("positive sigma")
    }

    pub fn tophat(radius: f64) -> Self {
        Self::new(KernelFamily::Tophat, radius).expect("positive radius")
    }

    pub fn laplace(decay: f64) -> Self {
        Self::new(KernelFamily::Laplace, decay).expect("positive decay length")
    }

    /// Continuous density at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.family {
            KernelFamily::Gaussian => (-0.5 * (x / s).powi(2)).exp() / (s * (2.0 * PI).sqrt()),
            KernelFamily::Tophat => {
                if x.abs() <= s {
                    0.5 / s
                } else {
                    0.0
                }
            }
            KernelFamily::Laplace => 0.5 / s * (-x.abs() / s).exp(),
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.family {
            KernelFamily::Gaussian => 0.5 * statrs::function::erf::erfc(-x / (s * 2f64.sqrt())),
            KernelFamily::Tophat => ((x + s) / (2.0 * s)).clamp(0.0, 1.0),
            KernelFamily::Laplace => {
                if x < 0.0 {
                    0.5 * (x / s).exp()
                } else {
                    1.0 - 0.5 * (-x / s).exp()
                }
            }
        }
    }

    /// Mass outside `[-d, d]`.
    pub fn tail_mass(&self, d: f64) -> f64 {
        let s = self.scale;
        let d = d.max(0.0);
        match self.family {
            KernelFamily::Gaussian => statrs::function::erf::erfc(d / (s * 2f64.sqrt())),
            KernelFamily::Tophat => ((s - d) / s).max(0.0),
            KernelFamily::Laplace => (-d / s).exp(),
        }
    }

    /// Smallest radius whose two-sided tail mass is below `tail`.
    pub fn cutoff_radius(&self, tail: f64) -> f64 {
        let s = self.scale;
        match self.family {
            KernelFamily::Tophat => s,
            KernelFamily::Laplace => -s * tail.ln(),
            KernelFamily::Gaussian => {
                let (mut lo, mut hi) = (0.0, s);
                while self.tail_mass(hi) > tail {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.tail_mass(mid) > tail {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Density of the kernel wrapped onto a circle of length `length`.
    pub fn periodized(&self, x: f64, length: f64) -> f64 {
        let n_max = self.image_count(length);
        (-n_max..=n_max)
            .map(|n| self.eval(x + n as f64 * length))
            .sum()
    }

    fn image_count(&self, length: f64) -> i64 {
        (self.cutoff_radius(PERIODIZATION_TAIL) / length).ceil() as i64 + 1
    }

    /// Draws a displacement from the continuous density.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.scale;
        match self.family {
            KernelFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            }
            KernelFamily::Tophat => s * (2.0 * rng.random::<f64>() - 1.0),
            KernelFamily::Laplace => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    s * e
                } else {
                    -s * e
                }
            }
        }
    }
}

/// Kernel weights on a periodic grid, indexed by signed site offset.
///
/// Satisfies `h * sum(weights) == 1` up to rounding, and
/// `weights[i] == weights[(M - i) % M]` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    weights: Vec<f64>,
    length: f64,
}

impl DiscreteKernel {
    /// Periodized, renormalized grid samples of `kernel` on `sites` cells
    /// spanning `length`.
    ///
    /// Tophat kernels use cell averages so that cells cut by the support
    /// edge receive the fraction of mass they actually hold.
    pub fn discretize(kernel: &Kernel, length: f64, sites: usize) -> Result<Self> {
        check_grid(length, sites)?;
        if length <= 6.0 * kernel.scale {
            log::warn!(
                "domain length {length} is not large compared with kernel scale {}; periodization will be visible",
                kernel.scale
            );
        }
        let h = length / sites as f64;
        let n_max = kernel.image_count(length);
        let value_at = |offset: f64| -> f64 {
            (-n_max..=n_max)
                .map(|n| {
                    let x = offset + n as f64 * length;
                    match kernel.family {
                        KernelFamily::Tophat => {
                            (kernel.cdf(x + 0.5 * h) - kernel.cdf(x - 0.5 * h)) / h
                        }
                        _ => kernel.eval(x),
                    }
                })
                .sum()
        };
        let mut weights = vec![0.0; sites];
        for i in 0..=sites / 2 {
            let v = value_at(i as f64 * h);
            weights[i] = v;
            weights[(sites - i) % sites] = v;
        }
        let total = h * weights.iter().sum::<f64>();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { weights, length })
    }

    /// Unnormalized, unperiodized point samples `a(o h)` at signed offsets.
    pub fn point_samples(kernel: &Kernel, length: f64, sites: usize) -> Result<Self> {
        check_grid(length, sites)?;
        let h = length / sites as f64;
        let mut weights = vec![0.0; sites];
        for i in 0..=sites / 2 {
            let v = kernel.eval(i as f64 * h);
            weights[i] = v;
            weights[(sites - i) % sites] = v;
        }
        Ok(Self { weights, length })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sites(&self) -> usize {
        self.weights.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.weights.len() as f64
    }

    /// Weight between sites `x` and `y`.
    #[inline]
    pub fn between(&self, x: usize, y: usize) -> f64 {
        let m = self.weights.len();
        self.weights[(x + m - y) % m]
    }

    pub fn mass(&self) -> f64 {
        self.spacing() * self.weights.iter().sum::<f64>()
    }
}

pub(crate) fn check_grid(length: f64, sites: usize) -> Result<()> {
    if sites < 4 || !sites.is_multiple_of(2) {
        return Err(Error::BadGridSize(sites));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "domain length must be positive, got {length}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_values() {
        let lap = Kernel::laplace(1.0);
        assert!((lap.eval(1.0) - 0.5 * (-1f64).exp()).abs() < 1e-15);
        assert!((lap.eval(1.0) - 0.18394).abs() < 1e-5);
        assert_eq!(Kernel::tophat(2.0).eval(3.0), 0.0);
        let sigma = 1.7;
        let g = Kernel::gaussian(sigma);
        assert!((g.eval(0.0) - 1.0 / (sigma * (2.0 * PI).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn densities_are_even() {
        for k in [Kernel::gaussian(0.7), Kernel::tophat(1.3), Kernel::laplace(0.4)] {
            for x in [0.1, 0.5, 1.29, 2.0, 7.5] {
                assert_eq!(k.eval(x), k.eval(-x));
            }
        }
    }

    #[test]
    fn cdf_matches_tail_mass() {
        for k in [Kernel::gaussian(0.7), Kernel::tophat(1.3), Kernel::laplace(0.4)] {
            for d in [0.0, 0.3, 1.0, 2.5] {
                let outside = 1.0 - (k.cdf(d) - k.cdf(-d));
                assert!((outside - k.tail_mass(d)).abs() < 1e-14, "{k:?} d={d}");
            }
        }
    }

    #[test]
    fn tophat_grid_uses_half_cells_at_the_edge() {
        let d = DiscreteKernel::discretize(&Kernel::tophat(1.0), 16.0, 32).unwrap();
        let w = d.weights();
        // cells centred at 0 and +-0.5 lie inside the support, those at +-1 are cut in half
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!((w[1] - 0.5).abs() < 1e-15);
        assert!((w[31] - 0.5).abs() < 1e-15);
        assert!((w[2] - 0.25).abs() < 1e-15);
        assert!((w[30] - 0.25).abs() < 1e-15);
        assert!(w[3..30].iter().all(|&v| v == 0.0));
        assert!((d.mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_grid_is_normalized() {
        let d = DiscreteKernel::discretize(&Kernel::gaussian(1.0), 16.0, 64).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn odd_or_tiny_grids_are_rejected() {
        let k = Kernel::gaussian(1.0);
        assert!(matches!(DiscreteKernel::discretize(&k, 16.0, 31), Err(Error::BadGridSize(31))));
        assert!(matches!(DiscreteKernel::discretize(&k, 16.0, 2), Err(Error::BadGridSize(2))));
    }

    #[test]
    fn periodization_wraps_mass() {
        // a wide Laplace kernel on a short circle: periodized density integrates to one
        let k = Kernel::laplace(2.0);
        let length = 5.0;
        let n = 20_000;
        let h = length / n as f64;
        let mass: f64 = (0..n).map(|i| k.periodized((i as f64 + 0.5) * h, length) * h).sum();
        assert!((mass - 1.0).abs() < 1e-7);
    }

    #[test]
    fn tophat_samples_are_centred() {
        let r = 1.5;
        let k = Kernel::tophat(r);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| k.sample(&mut rng)).collect();
        assert!(draws.iter().all(|x| x.abs() <= r));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let tol = 3.0 * (r / 3f64.sqrt()) / (n as f64).sqrt();
        assert!(mean.abs() < tol, "mean {mean} tol {tol}");
    }

    #[test]
    fn laplace_sample_variance() {
        let b = 0.8;
        let k = Kernel::laplace(b);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| k.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / (2.0 * b * b) - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn gaussian_sample_variance() {
        let k = Kernel::gaussian(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let var = (0..n).map(|_| k.sample(&mut rng).powi(2)).sum::<f64>() / n as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.05);
    }

    #[test]
    fn sampling_is_deterministic() {
        for k in [Kernel::gaussian(1.0), Kernel::tophat(1.0), Kernel::laplace(1.0)] {
            let mut a = ChaCha8Rng::seed_from_u64(99);
            let mut b = ChaCha8Rng::seed_from_u64(99);
            for _ in 0..100 {
                assert_eq!(k.sample(&mut a).to_bits(), k.sample(&mut b).to_bits());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn kernel_strategy() -> impl Strategy<Value = Kernel> {
            (0usize..3, 0.05f64..3.0).prop_map(|(f, s)| match f {
                0 => Kernel::gaussian(s),
                1 => Kernel::tophat(s),
                _ => Kernel::laplace(s),
            })
        }

        proptest! {
            #[test]
            fn discretized_weights_are_even_nonnegative_unit_mass(
                k in kernel_strategy(),
                half in 2usize..64,
                length in 4.0f64..40.0,
            ) {
                let m = 2 * half;
                let d = DiscreteKernel::discretize(&k, length, m).unwrap();
                let w = d.weights();
                prop_assert!(w.iter().all(|&v| v >= 0.0));
                for i in 0..m {
                    prop_assert_eq!(w[i], w[(m - i) % m]);
                }
                prop_assert!((d.mass() - 1.0).abs() < 1e-12);
            }
        }
    }
}
