//! Deterministic solvers for the nonlocal logistic (Vlasov) equation
//!
//! ```text
//! d rho / dt = kappa_plus (a_plus * rho) - kappa_minus rho (a_minus * rho) - m rho
//! ```
//!
//! on a periodic grid. Two independent routes are provided: Picard
//! iteration of the integrated linearized map, and classical RK4. The
//! linear comparison problem (competition switched off) is solved
//! exactly in Fourier space and dominates both.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::DiscreteKernel;
use crate::params::{validate_params, ModelParams};

/// Values below this are treated as genuine negativity by RK4.
pub const NEGATIVITY_FLOOR: f64 = -1e-10;

/// Circular convolution `(a * f)_i = h sum_j a(x_i - x_j) f_j` by FFT.
#[derive(Clone)]
pub struct Convolver {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Real Fourier symbol of the kernel (times `h`); real because the kernel is even.
    symbol: Vec<f64>,
    length: f64,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("sites", &self.symbol.len())
            .field("length", &self.length)
            .finish()
    }
}

impl Convolver {
    pub fn new(kernel: &DiscreteKernel) -> Self {
        let m = kernel.sites();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut buf: Vec<Complex<f64>> = kernel
            .weights()
            .iter()
            .map(|&w| Complex::new(w, 0.0))
            .collect();
        forward.process(&mut buf);
        let h = kernel.spacing();
        Self {
            forward,
            inverse,
            symbol: buf.iter().map(|c| c.re * h).collect(),
            length: kernel.length(),
        }
    }

    pub fn sites(&self) -> usize {
        self.symbol.len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Multiplier of Fourier mode `k`; mode 0 equals the kernel mass.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.apply_spectral(f, |_, s| s)
    }

    /// Applies the Fourier multiplier `g(k, symbol_k)`.
    pub fn apply_spectral(&self, f: &[f64], g: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let m = self.sites();
        assert_eq!(f.len(), m, "convolution input has the wrong length");
        let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            *c *= g(k, self.symbol[k]);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / m as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// Convolves a field with a kernel discretized on the same grid.
pub fn convolve(kernel: &DiscreteKernel, f: &Field) -> Result<Vec<f64>> {
    f.check_same_grid(kernel.sites(), kernel.length())?;
    Ok(Convolver::new(kernel).apply(f.values()))
}

/// Model constants together with FFT plans for both kernels on one grid.
#[derive(Debug, Clone)]
pub struct VlasovSystem {
    params: ModelParams,
    competition: Convolver,
    dispersal: Convolver,
}

impl VlasovSystem {
    /// Uses the grid stored in `params`.
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.check()?;
        let (a_minus, a_plus) = params.discrete_kernels()?;
        Ok(Self {
            params: params.clone(),
            competition: Convolver::new(&a_minus),
            dispersal: Convolver::new(&a_plus),
        })
    }

    pub fn on_grid(params: &ModelParams, length: f64, sites: usize) -> Result<Self> {
        Self::new(&params.with_grid(length, sites))
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn sites(&self) -> usize {
        self.params.grid_size
    }

    pub fn length(&self) -> f64 {
        self.params.domain_length
    }

    pub fn competition(&self) -> &Convolver {
        &self.competition
    }

    pub fn dispersal(&self) -> &Convolver {
        &self.dispersal
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        f.check_same_grid(self.sites(), self.length())
    }

    /// Pointwise `kappa_plus (a_plus * rho) - kappa_minus rho (a_minus * rho) - m rho`.
    pub fn rhs(&self, rho: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let born = self.dispersal.apply(rho);
        let crowd = self.competition.apply(rho);
        rho.iter()
            .zip(born.iter().zip(&crowd))
            .map(|(&r, (&b, &c))| p.kappa_plus * b - p.kappa_minus * r * c - p.m * r)
            .collect()
    }

    fn time_grid(t_end: f64, dt: f64) -> Result<(usize, f64)> {
        if !(t_end >= 0.0 && dt > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need t_end >= 0 and dt > 0, got {t_end} and {dt}"
            )));
        }
        let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
        let step = if steps == 0 { 0.0 } else { t_end / steps as f64 };
        Ok((steps, step))
    }
}

/// Time-indexed sequence of fields on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub length: f64,
}

impl Trajectory {
    fn constant(values: &[f64], times: Vec<f64>, length: f64) -> Self {
        let states = vec![values.to_vec(); times.len()];
        Self {
            times,
            states,
            length,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sites(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectories hold at least one node")
    }

    /// Index of the time node closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn state_at(&self, t: f64) -> &[f64] {
        &self.states[self.index_of(t)]
    }

    pub fn field_at(&self, t: f64) -> Field {
        Field::from_raw(self.state_at(t).to_vec(), self.length)
    }

    /// `max_t max_x |u_t(x) - w_t(x)|`.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.states
            .iter()
            .flatten()
            .zip(other.states.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.states.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.states.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One application of the integrated linearized map.
///
/// For an input trajectory `v` this returns `u` solving
/// `du/dt = kappa_plus (a_plus * v) - kappa_minus u (a_minus * v) - m u`,
/// `u_0 = rho0`, written in variation-of-constants form with every time
/// integral replaced by the trapezoidal rule on `v`'s grid.
pub fn phi_map(sys: &VlasovSystem, rho0: &Field, v: &Trajectory) -> Result<Trajectory> {
    sys.check_field(rho0)?;
    for (time_index, state) in v.states.iter().enumerate() {
        if state.len() != sys.sites() {
            return Err(Error::GridMismatch {
                expected: sys.sites(),
                expected_length: sys.length(),
                found: state.len(),
                found_length: v.length,
            });
        }
        if let Some((cell, &value)) = state.iter().enumerate().find(|(_, x)| **x < 0.0) {
            return Err(Error::NegativeInput {
                value,
                time_index,
                cell,
            });
        }
    }
    let p = sys.params();
    let m = sys.sites();
    let loss: Vec<Vec<f64>> = v
        .states
        .iter()
        .map(|s| {
            sys.competition
                .apply(s)
                .into_iter()
                .map(|c| p.m + p.kappa_minus * c)
                .collect()
        })
        .collect();
    let source: Vec<Vec<f64>> = v
        .states
        .iter()
        .map(|s| sys.dispersal.apply(s).into_iter().map(|b| p.kappa_plus * b).collect())
        .collect();

    let mut states = Vec::with_capacity(v.len());
    states.push(rho0.values().to_vec());
    for k in 0..v.len().saturating_sub(1) {
        let dt = v.times[k + 1] - v.times[k];
        let prev = &states[k];
        let next: Vec<f64> = (0..m)
            .map(|x| {
                let decay = (-0.5 * dt * (loss[k][x] + loss[k + 1][x])).exp();
                decay * (prev[x] + 0.5 * dt * source[k][x]) + 0.5 * dt * source[k + 1][x]
            })
            .collect();
        states.push(next);
    }
    Ok(Trajectory {
        times: v.times.clone(),
        states,
        length: v.length,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardSettings {
    pub t_end: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Run even when the mortality condition fails.
    pub allow_out_of_regime: bool,
    /// Restart the iteration on consecutive windows of this length.
    pub restart_every: Option<f64>,
}

impl PicardSettings {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            tol: 1e-8,
            max_iter: 200,
            allow_out_of_regime: false,
            restart_every: None,
        }
    }
}

/// Convergence record of a Picard run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardDiagnostics {
    /// `||v^(n+1) - v^(n)||_T` for each iteration.
    pub differences: Vec<f64>,
    /// Successive ratios of `differences` (within each restart window).
    pub ratios: Vec<f64>,
    /// Theoretical contraction ceiling `4 (kappa_plus + C kappa_minus) / m`.
    pub q: f64,
    pub iterations: usize,
    pub converged: bool,
    pub windows: usize,
}

impl PicardDiagnostics {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Fixed-point iteration `v <- phi_map(v)` started from the time-constant
/// extension of `rho0`.
pub fn picard_solve(
    sys: &VlasovSystem,
    rho0: &Field,
    settings: &PicardSettings,
) -> Result<(Trajectory, PicardDiagnostics)> {
    sys.check_field(rho0)?;
    let p = sys.params();
    let report = validate_params(p);
    if !report.bigmort_ok {
        if !settings.allow_out_of_regime {
            return Err(Error::OutOfRegime {
                q: report.contraction_q,
            });
        }
        log::warn!("mortality condition fails (q = {}); contraction not guaranteed", report.contraction_q);
    }
    if rho0.max() > p.c {
        log::warn!("initial density {} exceeds the cap C = {}", rho0.max(), p.c);
    }
    let (steps, dt) = VlasovSystem::time_grid(settings.t_end, settings.dt)?;
    let window_steps = match settings.restart_every {
        Some(w) if w > 0.0 && dt > 0.0 => ((w / dt) - 1e-9).ceil().max(1.0) as usize,
        _ => steps.max(1),
    };

    let mut diag = PicardDiagnostics {
        differences: Vec::new(),
        ratios: Vec::new(),
        q: report.contraction_q,
        iterations: 0,
        converged: true,
        windows: 0,
    };
    let mut times = vec![0.0];
    let mut states = vec![rho0.values().to_vec()];
    let mut start = 0;
    loop {
        let end = (start + window_steps).min(steps);
        let window_times: Vec<f64> = (start..=end).map(|k| k as f64 * dt).collect();
        let start_field = Field::from_raw(states.last().cloned().unwrap(), rho0.length());
        let mut v = Trajectory::constant(start_field.values(), window_times, rho0.length());
        let mut window_diffs: Vec<f64> = Vec::new();
        let mut converged = false;
        for _ in 0..settings.max_iter {
            let next = phi_map(sys, &start_field, &v)?;
            let d = next.sup_distance(&v);
            v = next;
            window_diffs.push(d);
            diag.iterations += 1;
            if d <= settings.tol {
                converged = true;
                break;
            }
        }
        diag.ratios.extend(
            window_diffs
                .windows(2)
                .filter(|w| w[0] > 0.0)
                .map(|w| w[1] / w[0]),
        );
        diag.differences.extend(window_diffs);
        diag.windows += 1;
        if !converged {
            diag.converged = false;
            return Err(Error::PicardNotConverged(Box::new(diag)));
        }
        times.extend_from_slice(&v.times[1..]);
        states.extend(v.states.into_iter().skip(1));
        if end >= steps {
            break;
        }
        start = end;
    }
    Ok((
        Trajectory {
            times,
            states,
            length: rho0.length(),
        },
        diag,
    ))
}

/// Classical fourth-order Runge–Kutta on the grid equations.
///
/// No clamping is applied: a value below [`NEGATIVITY_FLOOR`] aborts with
/// [`Error::Unstable`].
pub fn rk4_solve(sys: &VlasovSystem, rho0: &Field, t_end: f64, dt: f64) -> Result<Trajectory> {
    sys.check_field(rho0)?;
    let limit = 0.5 / sys.params().m;
    if dt > limit {
        return Err(Error::StepTooLarge { dt, limit });
    }
    let (steps, h) = VlasovSystem::time_grid(t_end, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut u = rho0.values().to_vec();
    times.push(0.0);
    states.push(u.clone());
    let axpy = |u: &[f64], k: &[f64], a: f64| -> Vec<f64> {
        u.iter().zip(k).map(|(x, y)| x + a * y).collect()
    };
    for step in 1..=steps {
        let k1 = sys.rhs(&u);
        let k2 = sys.rhs(&axpy(&u, &k1, 0.5 * h));
        let k3 = sys.rhs(&axpy(&u, &k2, 0.5 * h));
        let k4 = sys.rhs(&axpy(&u, &k3, h));
        for i in 0..u.len() {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * h;
        if let Some(&value) = u.iter().find(|v| **v < NEGATIVITY_FLOOR) {
            return Err(Error::Unstable { value, time: t });
        }
        times.push(t);
        states.push(u.clone());
    }
    Ok(Trajectory {
        times,
        states,
        length: rho0.length(),
    })
}

/// Exact solution of `dr/dt = kappa_plus (a_plus * r) - m r`, `r_0 = rho0`,
/// evaluated mode by mode in Fourier space on the same time grid as the
/// other solvers.
pub fn linear_upper_solve(sys: &VlasovSystem, rho0: &Field, t_end: f64, dt: f64) -> Result<Trajectory> {
    sys.check_field(rho0)?;
    let p = sys.params();
    let (steps, h) = VlasovSystem::time_grid(t_end, dt)?;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let states = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                rho0.values().to_vec()
            } else {
                sys.dispersal
                    .apply_spectral(rho0.values(), |_, s| ((p.kappa_plus * s - p.m) * t).exp())
            }
        })
        .collect();
    Ok(Trajectory {
        times,
        states,
        length: rho0.length(),
    })
}

/// Closed-form solution for spatially constant data,
/// `alpha rho0 e^{alpha t} / (alpha + kappa_minus rho0 (e^{alpha t} - 1))`
/// with `alpha = kappa_plus - m`.
pub fn riccati_reference(p: &ModelParams, rho_bar0: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    let alpha = p.kappa_plus - p.m;
    // (e^{alpha t} - 1) / alpha, continuous through alpha = 0
    let growth = if alpha * t == 0.0 {
        t
    } else {
        (alpha * t).exp_m1() / alpha
    };
    let denom = 1.0 + p.kappa_minus * rho_bar0 * growth;
    if denom <= 0.0 {
        return Err(Error::Pole(t));
    }
    Ok(rho_bar0 * (alpha * t).exp() / denom)
}

/// Pointwise right-hand side for a field on the grid stored in `p`.
pub fn vlasov_rhs(p: &ModelParams, rho: &Field) -> Result<Vec<f64>> {
    let sys = VlasovSystem::new(p)?;
    sys.check_field(rho)?;
    Ok(sys.rhs(rho.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;

    fn canonical() -> (ModelParams, VlasovSystem) {
        let p = ModelParams::canonical();
        let sys = VlasovSystem::new(&p).unwrap();
        (p, sys)
    }

    fn direct_convolution(kernel: &DiscreteKernel, f: &[f64]) -> Vec<f64> {
        let m = f.len();
        let h = kernel.spacing();
        (0..m)
            .map(|i| h * (0..m).map(|j| kernel.between(i, j) * f[j]).sum::<f64>())
            .collect()
    }

    #[test]
    fn constants_are_preserved_by_convolution() {
        let k = DiscreteKernel::discretize(&Kernel::laplace(0.7), 16.0, 64).unwrap();
        let f = Field::constant(3.5, 16.0, 64).unwrap();
        for v in convolve(&k, &f).unwrap() {
            assert!((v - 3.5).abs() < 1e-13);
        }
    }

    #[test]
    fn spectral_matches_direct_sum() {
        let k = DiscreteKernel::discretize(&Kernel::gaussian(1.0), 16.0, 64).unwrap();
        let f = Field::sinusoid(0.0, 1.0, 1, 16.0, 64);
        // sin takes negative values, so build the raw vector directly
        assert!(f.is_err());
        let vals: Vec<f64> = (0..64)
            .map(|i| (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / 64.0).sin())
            .collect();
        let spectral = Convolver::new(&k).apply(&vals);
        let direct = direct_convolution(&k, &vals);
        for (a, b) in spectral.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
        // the output is the input attenuated by the mode-1 symbol
        let s1 = Convolver::new(&k).symbol()[1];
        assert!(s1 < 1.0 && s1 > 0.0);
        for (a, v) in spectral.iter().zip(&vals) {
            assert!((a - s1 * v).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_input_returns_the_kernel_row() {
        let k = DiscreteKernel::discretize(&Kernel::tophat(1.3), 16.0, 32).unwrap();
        let h = k.spacing();
        let mut vals = vec![0.0; 32];
        vals[5] = 1.0 / h;
        let out = Convolver::new(&k).apply(&vals);
        for (i, v) in out.iter().enumerate() {
            assert!((v - k.between(i, 5)).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let k = DiscreteKernel::discretize(&Kernel::gaussian(1.0), 16.0, 64).unwrap();
        let f = Field::constant(1.0, 16.0, 32).unwrap();
        assert!(matches!(convolve(&k, &f), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn rhs_special_values() {
        let (p, sys) = canonical();
        assert!(sys.rhs(&[0.0; 64]).iter().all(|&v| v == 0.0));
        let rho_bar = 2.5;
        let expect = (p.kappa_plus - p.m) * rho_bar - p.kappa_minus * rho_bar * rho_bar;
        for v in sys.rhs(&[rho_bar; 64]) {
            assert!((v - expect).abs() < 1e-12);
        }
        let surv = ModelParams { m: 0.5, ..ModelParams::canonical() };
        let eq = (surv.kappa_plus - surv.m) / surv.kappa_minus;
        let f = Field::constant(eq, 16.0, 64).unwrap();
        for v in vlasov_rhs(&surv, &f).unwrap() {
            assert!(v.abs() < 1e-14);
        }
    }

    /// Scalar logistic ODE integrated by RK4 with a tiny step.
    fn scalar_logistic(p: &ModelParams, rho0: f64, t: f64) -> f64 {
        let n = 200_000;
        let h = t / n as f64;
        let f = |r: f64| (p.kappa_plus - p.m) * r - p.kappa_minus * r * r;
        let mut r = rho0;
        for _ in 0..n {
            let k1 = f(r);
            let k2 = f(r + 0.5 * h * k1);
            let k3 = f(r + 0.5 * h * k2);
            let k4 = f(r + h * k3);
            r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        r
    }

    #[test]
    fn riccati_matches_scalar_integration() {
        let p = ModelParams::canonical();
        let r = riccati_reference(&p, 8.0, 0.1).unwrap();
        assert!((r - 0.1348).abs() < 5e-5, "{r}");
        let oracle = scalar_logistic(&p, 8.0, 0.1);
        assert!((r / oracle - 1.0).abs() < 1e-11, "{r} vs {oracle}");
        assert_eq!(riccati_reference(&p, 8.0, 0.0).unwrap(), 8.0);
    }

    #[test]
    fn riccati_zero_growth_limit() {
        let p = ModelParams { m: 1.0, kappa_plus: 1.0, ..ModelParams::canonical() };
        for t in [0.1, 1.0, 3.0] {
            let expect = 2.0 / (1.0 + p.kappa_minus * 2.0 * t);
            assert!((riccati_reference(&p, 2.0, t).unwrap() - expect).abs() < 1e-15);
        }
        // continuity as alpha -> 0
        let near = ModelParams { m: 1.0 + 1e-9, ..p.clone() };
        assert!((riccati_reference(&near, 2.0, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn phi_of_zero_is_pure_decay() {
        let (p, sys) = canonical();
        let rho0 = Field::sinusoid(4.0, 2.0, 1, 16.0, 64).unwrap();
        let times: Vec<f64> = (0..=50).map(|k| k as f64 * 2e-3).collect();
        let zero = Trajectory::constant(&[0.0; 64], times, 16.0);
        let out = phi_map(&sys, &rho0, &zero).unwrap();
        assert_eq!(out.states[0], rho0.values());
        for (t, s) in out.times.iter().zip(&out.states) {
            for (v, r0) in s.iter().zip(rho0.values()) {
                assert!((v - (-p.m * t).exp() * r0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn phi_rejects_negative_input() {
        let (_, sys) = canonical();
        let rho0 = Field::constant(1.0, 16.0, 64).unwrap();
        let mut v = Trajectory::constant(&[1.0; 64], vec![0.0, 0.1], 16.0);
        v.states[1][3] = -0.5;
        assert!(matches!(
            phi_map(&sys, &rho0, &v),
            Err(Error::NegativeInput { time_index: 1, cell: 3, .. })
        ));
    }

    #[test]
    fn picard_constant_data_matches_closed_form() {
        let (p, sys) = canonical();
        let rho0 = Field::constant(8.0, 16.0, 64).unwrap();
        let (traj, diag) = picard_solve(&sys, &rho0, &PicardSettings::new(0.2, 1e-3)).unwrap();
        assert!(diag.converged);
        assert!(diag.max_ratio() <= diag.q + 0.05);
        for t in [0.05, 0.1, 0.2] {
            let exact = riccati_reference(&p, 8.0, t).unwrap();
            let got = traj.state_at(t)[17];
            assert!((got / exact - 1.0).abs() < 1e-4, "t={t}: {got} vs {exact}");
        }
        // feeding the fixed point back changes it only by the tolerance
        let again = phi_map(&sys, &rho0, &traj).unwrap();
        assert!(again.sup_distance(&traj) < 1e-7);
    }

    #[test]
    fn picard_on_zero_data_takes_one_iteration() {
        let (_, sys) = canonical();
        let rho0 = Field::constant(0.0, 16.0, 64).unwrap();
        let (traj, diag) = picard_solve(&sys, &rho0, &PicardSettings::new(0.1, 1e-3)).unwrap();
        assert_eq!(diag.iterations, 1);
        assert_eq!(traj.max_value(), 0.0);
    }

    #[test]
    fn picard_refuses_out_of_regime_unless_overridden() {
        let p = ModelParams { m: 0.5, ..ModelParams::canonical() };
        let sys = VlasovSystem::new(&p).unwrap();
        let rho0 = Field::constant(0.1, 16.0, 64).unwrap();
        let mut s = PicardSettings::new(0.5, 1e-2);
        assert!(matches!(picard_solve(&sys, &rho0, &s), Err(Error::OutOfRegime { .. })));
        s.allow_out_of_regime = true;
        assert!(picard_solve(&sys, &rho0, &s).is_ok());
    }

    #[test]
    fn picard_reports_non_convergence() {
        let (_, sys) = canonical();
        let rho0 = Field::constant(8.0, 16.0, 64).unwrap();
        let mut s = PicardSettings::new(0.2, 1e-3);
        s.max_iter = 2;
        match picard_solve(&sys, &rho0, &s) {
            Err(Error::PicardNotConverged(d)) => {
                assert_eq!(d.iterations, 2);
                assert!(!d.converged);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn picard_restart_windows_agree_with_single_window() {
        let (_, sys) = canonical();
        let rho0 = Field::sinusoid(4.0, 3.0, 2, 16.0, 64).unwrap();
        let whole = picard_solve(&sys, &rho0, &PicardSettings::new(0.2, 1e-3)).unwrap().0;
        let mut s = PicardSettings::new(0.2, 1e-3);
        s.restart_every = Some(0.05);
        let (pieces, diag) = picard_solve(&sys, &rho0, &s).unwrap();
        assert_eq!(diag.windows, 4);
        assert_eq!(pieces.len(), whole.len());
        assert!(pieces.sup_distance(&whole) < 1e-7);
    }

    #[test]
    fn rk4_constant_data_matches_closed_form() {
        let (p, sys) = canonical();
        let rho0 = Field::constant(8.0, 16.0, 64).unwrap();
        let traj = rk4_solve(&sys, &rho0, 0.2, 1e-4).unwrap();
        assert_eq!(traj.states[0], vec![8.0; 64]);
        for t in [0.05, 0.1, 0.2] {
            let exact = riccati_reference(&p, 8.0, t).unwrap();
            for &v in traj.state_at(t) {
                assert!((v / exact - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rk4_step_limit_and_instability() {
        let (_, sys) = canonical();
        let rho0 = Field::constant(1.0, 16.0, 64).unwrap();
        assert!(matches!(rk4_solve(&sys, &rho0, 1.0, 0.02), Err(Error::StepTooLarge { .. })));
        // a crowding rate far beyond the mortality-based step limit overshoots zero
        let crowded = ModelParams { kappa_minus: 1000.0, ..ModelParams::canonical() };
        let sys = VlasovSystem::new(&crowded).unwrap();
        let rho0 = Field::constant(8.0, 16.0, 64).unwrap();
        assert!(matches!(rk4_solve(&sys, &rho0, 0.1, 0.0125), Err(Error::Unstable { .. })));
    }

    #[test]
    fn survival_regime_reaches_the_equilibrium() {
        let p = ModelParams { m: 0.5, ..ModelParams::canonical() };
        let sys = VlasovSystem::new(&p).unwrap();
        let rho0 = Field::constant(0.1, 16.0, 64).unwrap();
        let traj = rk4_solve(&sys, &rho0, 80.0, 0.01).unwrap();
        for &v in traj.final_state() {
            assert!((v - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_solution_of_constant_data() {
        let (p, sys) = canonical();
        let rho0 = Field::constant(3.0, 16.0, 64).unwrap();
        let traj = linear_upper_solve(&sys, &rho0, 0.2, 1e-3).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = 3.0 * (-(p.m - p.kappa_plus) * t).exp();
            for &v in s {
                assert!((v - exact).abs() < 1e-13 * 3.0);
            }
        }
    }

    #[test]
    fn nonlinear_solution_stays_below_the_linear_one() {
        let (p, sys) = canonical();
        for (mode, amp) in [(1, 3.0), (2, 4.0), (3, 1.0)] {
            let rho0 = Field::sinusoid(4.0, amp, mode, 16.0, 64).unwrap();
            let nonlinear = rk4_solve(&sys, &rho0, 0.2, 1e-3).unwrap();
            let linear = linear_upper_solve(&sys, &rho0, 0.2, 1e-3).unwrap();
            for (a, b) in nonlinear.states.iter().flatten().zip(linear.states.iter().flatten()) {
                assert!(*a <= b + 1e-9);
                assert!(*a >= NEGATIVITY_FLOOR && *a <= p.c + 1e-10);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn convolution_does_not_increase_the_sup_norm(
                vals in prop::collection::vec(-5.0f64..5.0, 32),
                family in 0usize..3,
                scale in 0.1f64..3.0,
            ) {
                let k = match family {
                    0 => Kernel::gaussian(scale),
                    1 => Kernel::tophat(scale),
                    _ => Kernel::laplace(scale),
                };
                let d = DiscreteKernel::discretize(&k, 16.0, 32).unwrap();
                let out = Convolver::new(&d).apply(&vals);
                let sup_in = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let sup_out = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                prop_assert!(sup_out <= sup_in * (1.0 + 1e-12) + 1e-14);
            }
        }
    }
}
