//! Density and pair-correlation estimates from simulated ensembles, and the
//! mean-field convergence sweep.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::ibm::{replicate_seed, run_ensemble, EnsembleResult};
use crate::params::ModelParams;
use crate::vlasov::{rk4_solve, VlasovSystem};

/// `eps`-rescaled mean particle density on uniform bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedDensity {
    pub length: f64,
    pub width: f64,
    pub values: Vec<f64>,
    pub replicates: usize,
}

impl BinnedDensity {
    pub fn bins(&self) -> usize {
        self.values.len()
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.width
    }

    pub fn integral(&self) -> f64 {
        self.width * self.values.iter().sum::<f64>()
    }

    /// Bin averages of a field whose cells nest inside the bins.
    pub fn from_field(field: &Field, bins: usize) -> Result<Self> {
        let per_bin = nesting(field, bins)?;
        let values = field
            .values()
            .chunks(per_bin)
            .map(|c| c.iter().sum::<f64>() / per_bin as f64)
            .collect();
        Ok(Self {
            length: field.length(),
            width: field.length() / bins as f64,
            values,
            replicates: 0,
        })
    }
}

fn nesting(field: &Field, bins: usize) -> Result<usize> {
    if bins == 0 || !field.sites().is_multiple_of(bins) {
        return Err(Error::IncompatibleBins(format!(
            "{} cells do not split evenly into {bins} bins",
            field.sites()
        )));
    }
    Ok(field.sites() / bins)
}

fn bin_counts(positions: &[f64], length: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    let width = length / bins as f64;
    for &x in positions {
        counts[((x / width) as usize).min(bins - 1)] += 1.0;
    }
    counts
}

fn check_bins(length: f64, bins: usize) -> Result<()> {
    if bins == 0 || length.is_nan() || length <= 0.0 {
        return Err(Error::IncompatibleBins(format!(
            "{bins} bins on length {length}"
        )));
    }
    Ok(())
}

/// `eps * count / (replicates * w)` per bin, pooled over replicates.
pub fn empirical_density(
    replicates: &[&[f64]],
    eps: f64,
    length: f64,
    bins: usize,
) -> Result<BinnedDensity> {
    check_bins(length, bins)?;
    let width = length / bins as f64;
    let mut values = vec![0.0; bins];
    for r in replicates {
        for (v, c) in values.iter_mut().zip(bin_counts(r, length, bins)) {
            *v += c;
        }
    }
    if !replicates.is_empty() {
        let scale = eps / (replicates.len() as f64 * width);
        values.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(BinnedDensity {
        length,
        width,
        values,
        replicates: replicates.len(),
    })
}

/// [`empirical_density`] of snapshot `s` of every replicate.
pub fn ensemble_density(ens: &EnsembleResult, s: usize, bins: usize) -> Result<BinnedDensity> {
    let snaps: Vec<&[f64]> = ens.at(s).map(|x| x.positions.as_slice()).collect();
    empirical_density(&snaps, ens.params.eps, ens.params.domain_length, bins)
}

/// Normalized pair density on separation bins `[k dr, (k + 1) dr)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCorrelationEstimate {
    pub width: f64,
    pub g: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicates: usize,
}

impl PairCorrelationEstimate {
    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.width
    }

    /// `max |g(r) - 1|` over bins lying entirely within `r <= r_max`.
    pub fn max_deviation(&self, r_max: f64) -> f64 {
        self.g
            .iter()
            .enumerate()
            .filter(|&(k, _)| (k + 1) as f64 * self.width <= r_max * (1.0 + 1e-12))
            .map(|(_, g)| (g - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Ordered pairs per separation bin, using sorted positions so only
/// pairs closer than `max_sep` are visited.
fn pair_counts(positions: &[f64], length: f64, bins: usize, max_sep: f64) -> Vec<f64> {
    let mut xs = positions.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let dr = max_sep / bins as f64;
    let mut counts = vec![0.0; bins];
    for i in 0..n {
        for step in 1..n {
            let j = i + step;
            let d = if j < n { xs[j] - xs[i] } else { xs[j - n] + length - xs[i] };
            if d >= max_sep {
                break;
            }
            counts[((d / dr) as usize).min(bins - 1)] += 2.0;
        }
    }
    counts
}

/// `int_lo^hi` of the triangle `max(0, w - |u - c|)`.
fn triangle_mass(c: f64, w: f64, lo: f64, hi: f64) -> f64 {
    let cumulative = |u: f64| {
        let z = u - c;
        if z <= -w {
            0.0
        } else if z <= 0.0 {
            0.5 * (z + w) * (z + w)
        } else if z <= w {
            w * w - 0.5 * (w - z) * (w - z)
        } else {
            w * w
        }
    };
    cumulative(hi) - cumulative(lo)
}

/// `int int rho(x) rho(y) 1{d(x, y) in [r1, r2)} dx dy` for a density that
/// is constant on bins, with `d` the distance on the circle.
fn factorized_pair_mass(rho: &BinnedDensity, r1: f64, r2: f64) -> f64 {
    let (w, l) = (rho.width, rho.length);
    let nb = rho.bins();
    let mut total = 0.0;
    for shift in 0..nb {
        let c = shift as f64 * w;
        let mut overlap = 0.0;
        for n in -2i32..=2 {
            let o = n as f64 * l;
            overlap += triangle_mass(c, w, o + r1, o + r2) + triangle_mass(c, w, o - r2, o - r1);
        }
        if overlap == 0.0 {
            continue;
        }
        let product: f64 = (0..nb).map(|a| rho.values[a] * rho.values[(a + shift) % nb]).sum();
        total += product * overlap;
    }
    total
}

/// Pair correlation of pooled replicates: the `eps^2`-rescaled ordered
/// pair density over the factorized product of the binned density.
pub fn pair_correlation(
    replicates: &[&[f64]],
    eps: f64,
    length: f64,
    density_bins: usize,
    separation_bins: usize,
    max_sep: f64,
) -> Result<PairCorrelationEstimate> {
    check_bins(length, density_bins)?;
    if separation_bins == 0 || !(max_sep > 0.0 && max_sep <= 0.5 * length) {
        return Err(Error::IncompatibleBins(format!(
            "separation range {max_sep} must lie in (0, {}]",
            0.5 * length
        )));
    }
    let reps = replicates.len();
    let dr = max_sep / separation_bins as f64;
    if reps == 0 {
        return Ok(PairCorrelationEstimate {
            width: dr,
            g: vec![0.0; separation_bins],
            stderr: vec![0.0; separation_bins],
            replicates: 0,
        });
    }
    let rho = empirical_density(replicates, eps, length, density_bins)?;
    let per_rep: Vec<Vec<f64>> = replicates
        .iter()
        .map(|r| pair_counts(r, length, separation_bins, max_sep))
        .collect();
    let mut g = vec![0.0; separation_bins];
    let mut stderr = vec![0.0; separation_bins];
    for k in 0..separation_bins {
        let denom = factorized_pair_mass(&rho, k as f64 * dr, (k + 1) as f64 * dr);
        let samples: Vec<f64> = per_rep.iter().map(|c| eps * eps * c[k]).collect();
        let (mean, se) = mean_and_stderr(&samples);
        if denom > 0.0 {
            g[k] = mean / denom;
            stderr[k] = se / denom;
        }
    }
    Ok(PairCorrelationEstimate {
        width: dr,
        g,
        stderr,
        replicates: reps,
    })
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `sqrt(sum_i w (a_i - b_i)^2)` with `b` averaged onto the bins of `a`.
pub fn l2_error(a: &BinnedDensity, b: &Field) -> Result<f64> {
    if a.length != b.length() {
        return Err(Error::IncompatibleBins(format!(
            "lengths {} and {} differ",
            a.length,
            b.length()
        )));
    }
    l2_between(a, &BinnedDensity::from_field(b, a.bins())?)
}

pub fn l2_between(a: &BinnedDensity, b: &BinnedDensity) -> Result<f64> {
    if a.bins() != b.bins() || a.length != b.length {
        return Err(Error::IncompatibleBins(format!(
            "{} bins on {} against {} bins on {}",
            a.bins(),
            a.length,
            b.bins(),
            b.length
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| a.width * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub t_end: f64,
    pub times: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub bins: usize,
    /// Step of the reference Runge–Kutta solution.
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub t: f64,
    pub l2_error: f64,
    pub stderr: f64,
}

/// For each `eps`: an ensemble, its binned density at every snapshot and
/// the `L2` distance to the Vlasov solution. The standard error follows
/// from the delta method applied to the per-replicate densities.
pub fn epsilon_sweep(params: &ModelParams, rho0: &Field, s: &SweepSettings) -> Result<Vec<SweepRow>> {
    let sys = VlasovSystem::on_grid(params, rho0.length(), rho0.sites())?;
    let reference = rk4_solve(&sys, rho0, s.t_end, s.dt)?;
    nesting(rho0, s.bins)?;
    let mut rows = Vec::with_capacity(s.eps_list.len() * s.times.len());
    for (k, &eps) in s.eps_list.iter().enumerate() {
        let p = params.with_eps(eps);
        let ens = run_ensemble(&p, rho0, s.t_end, &s.times, s.replicates, replicate_seed(s.seed, k as u64))?;
        for (i, &t) in s.times.iter().enumerate() {
            let a = ensemble_density(&ens, i, s.bins)?;
            let b = BinnedDensity::from_field(&reference.field_at(t), s.bins)?;
            let error = l2_between(&a, &b)?;
            let scale = eps / a.width;
            let z: Vec<f64> = ens
                .at(i)
                .map(|snap| {
                    bin_counts(&snap.positions, a.length, s.bins)
                        .iter()
                        .zip(a.values.iter().zip(&b.values))
                        .map(|(c, (am, bm))| a.width * (am - bm) * c * scale)
                        .sum()
                })
                .collect();
            let stderr = if error > 0.0 { mean_and_stderr(&z).1 / error } else { 0.0 };
            rows.push(SweepRow {
                eps,
                t,
                l2_error: error,
                stderr,
            });
        }
    }
    Ok(rows)
}
