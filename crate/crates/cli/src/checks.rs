//! Numerical checks of the truncated hierarchy operators, shared by the
//! `ops` subcommand and the acceptance suite.

use bdlp_core::config_space::pairing;
use bdlp_core::hierarchy::{BoundReport, ResolventTable};
use bdlp_core::{CorrelationFunction, Field, HierarchyOps, ModelParams, OperatorId, QuasiObservable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::TruncationSettings;
use crate::CliError;

pub const CHAOS_TOLERANCE: f64 = 1e-12;
pub const ADJOINT_TOLERANCE: f64 = 1e-10;
/// Accepted range of `delta_i(eps_last) / delta_i(eps_prev)` for a
/// tenfold decrease of `eps`.
pub const LINEAR_RATIO_RANGE: (f64, f64) = (0.05, 0.2);
pub const F_EPS_LAMBDAS: [f64; 3] = [0.5, 1.0, 10.0];
const CHAOS_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Check {
    All,
    Bounds,
    Resolvent,
    Chaos,
    Adjoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsCheck {
    pub relative: BoundReport,
    pub perturbation: BoundReport,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FEpsMax {
    pub lambda: f64,
    pub max: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventCheck {
    pub table: ResolventTable,
    pub last_ratios: [f64; 3],
    pub monotone: bool,
    pub ratios_in_range: bool,
    pub sup_bound: bool,
    pub f_eps: Vec<FEpsMax>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosCheck {
    pub samples: usize,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjointCheck {
    pub samples: usize,
    /// `|<<V G, k>> - <<G, V* k>>| / (||G||_C ||k||_K)`.
    pub max_scaled_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct OpsReport {
    pub sites: usize,
    pub max_level: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolvent: Option<ResolventCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chaos: Option<ChaosCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjoint: Option<AdjointCheck>,
    pub pass: bool,
}

fn core_err(e: bdlp_core::Error) -> CliError {
    CliError::Solver(e.to_string())
}

pub fn bounds_check(ops: &HierarchyOps, t: &TruncationSettings) -> Result<BoundsCheck, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let relative = ops.relative_bound_report(t.samples, &mut rng).map_err(core_err)?;
    let perturbation = ops
        .perturbation_report(t.lambda, t.samples, &mut rng)
        .map_err(core_err)?;
    Ok(BoundsCheck {
        pass: relative.pass && perturbation.pass,
        relative,
        perturbation,
    })
}

pub fn resolvent_check(ops: &HierarchyOps, t: &TruncationSettings) -> Result<ResolventCheck, CliError> {
    if t.eps_list.len() < 2 {
        return Err(CliError::Config("truncation.eps_list needs at least two values".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed.wrapping_add(1));
    let top = ops.space().max_level().saturating_sub(1);
    let g = QuasiObservable::random(ops.space(), 0, top, &mut rng);
    let table = ops
        .resolvent_convergence_report(&t.eps_list, t.lambda, &g)
        .map_err(core_err)?;
    let last_ratios = table.last_ratios();
    let (lo, hi) = LINEAR_RATIO_RANGE;
    let ratios_in_range = last_ratios.iter().all(|r| (lo..=hi).contains(r));
    let f_eps: Vec<FEpsMax> = F_EPS_LAMBDAS
        .iter()
        .map(|&lambda| {
            let max = ops.f_eps_max(lambda);
            FEpsMax {
                lambda,
                max,
                pass: max < 1.0 / lambda,
            }
        })
        .collect();
    let monotone = table.monotone();
    let sup_bound = table.sup_bound_holds();
    Ok(ResolventCheck {
        pass: monotone && ratios_in_range && sup_bound && f_eps.iter().all(|f| f.pass),
        table,
        last_ratios,
        monotone,
        ratios_in_range,
        sup_bound,
        f_eps,
    })
}

/// Random cellwise-uniform densities in `[0, C]`.
pub fn chaos_check(ops: &HierarchyOps, seed: u64) -> Result<ChaosCheck, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let space = ops.space();
    let cap = ops.params().c;
    let mut residuals = Vec::with_capacity(CHAOS_SAMPLES);
    for _ in 0..CHAOS_SAMPLES {
        let values = (0..space.sites()).map(|_| rng.random_range(0.0..=cap)).collect();
        let rho = Field::new(values, space.length()).map_err(core_err)?;
        residuals.push(ops.chaos_generator_check(&rho).map_err(core_err)?);
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(ChaosCheck {
        samples: CHAOS_SAMPLES,
        residuals,
        max_residual,
        tolerance: CHAOS_TOLERANCE,
        pass: max_residual <= CHAOS_TOLERANCE,
    })
}

/// Random pairs supported below the top level.
pub fn adjoint_check(ops: &HierarchyOps, samples: usize, seed: u64) -> Result<AdjointCheck, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let space = ops.space();
    let top = space.max_level().saturating_sub(1);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let g = QuasiObservable::random(space, 0, top, &mut rng);
        let k = CorrelationFunction::random(space, 0, top, &mut rng);
        let vg = ops.apply_component(OperatorId::V, &g).map_err(core_err)?;
        let vk = ops.apply_dual(OperatorId::VStar, &k).map_err(core_err)?;
        let lhs = pairing(&vg, &k).map_err(core_err)?;
        let rhs = pairing(&g, &vk).map_err(core_err)?;
        worst = worst.max((lhs - rhs).abs() / (g.lc_norm() * k.kc_norm()));
    }
    Ok(AdjointCheck {
        samples,
        max_scaled_residual: worst,
        tolerance: ADJOINT_TOLERANCE,
        pass: worst <= ADJOINT_TOLERANCE,
    })
}

pub fn run_checks(model: &ModelParams, t: &TruncationSettings, check: Check) -> Result<OpsReport, CliError> {
    let ops = HierarchyOps::new(model, t.sites, t.max_level).map_err(|e| CliError::Config(e.to_string()))?;
    let wants = |c: Check| check == Check::All || check == c;
    let mut report = OpsReport {
        sites: t.sites,
        max_level: t.max_level,
        ..OpsReport::default()
    };
    if wants(Check::Bounds) {
        report.bounds = Some(bounds_check(&ops, t)?);
    }
    if wants(Check::Resolvent) {
        report.resolvent = Some(resolvent_check(&ops, t)?);
    }
    if wants(Check::Chaos) {
        report.chaos = Some(chaos_check(&ops, t.seed)?);
    }
    if wants(Check::Adjoint) {
        report.adjoint = Some(adjoint_check(&ops, t.samples, t.seed)?);
    }
    report.pass = report.bounds.as_ref().is_none_or(|c| c.pass)
        && report.resolvent.as_ref().is_none_or(|c| c.pass)
        && report.chaos.as_ref().is_none_or(|c| c.pass)
        && report.adjoint.as_ref().is_none_or(|c| c.pass);
    Ok(report)
}
