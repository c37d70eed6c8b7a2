//! Subcommands as pure functions from a configuration to file contents.

use bdlp_core::error::Error as CoreError;
use bdlp_core::estimators::{ensemble_density, epsilon_sweep, pair_correlation, SweepSettings};
use bdlp_core::vlasov::{linear_upper_solve, picard_solve, rk4_solve, PicardSettings};
use bdlp_core::{run_ensemble, validate_params, ValidationReport, VlasovSystem};
use serde::Serialize;

use crate::checks::{run_checks, Check, OpsReport};
use crate::config::LoadedConfig;
use crate::output;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Picard,
    Rk4,
    Linear,
}

/// Command-line overrides of the ensemble settings.
#[derive(Debug, Clone, Default)]
pub struct IbmOverrides {
    pub seed: Option<u64>,
    pub eps_list: Option<Vec<f64>>,
    pub replicates: Option<usize>,
}

impl IbmOverrides {
    fn apply(&self, cfg: &mut LoadedConfig) {
        let ibm = &mut cfg.config.ibm;
        if let Some(s) = self.seed {
            ibm.seed = s;
        }
        if let Some(e) = &self.eps_list {
            ibm.eps_list = e.clone();
        }
        if let Some(r) = self.replicates {
            ibm.replicates = r;
        }
    }
}

/// A named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn solver_err(e: CoreError) -> CliError {
    match e {
        CoreError::PicardNotConverged(diag) => CliError::NotConverged(
            serde_json::to_string(&*diag).unwrap_or_else(|_| "unserializable diagnostics".into()),
        ),
        CoreError::OutOfRegime { q } => CliError::Config(format!(
            "mortality condition fails (q = {q}); pass --override-regime to run anyway"
        )),
        CoreError::InvalidParameter(_) | CoreError::BadGridSize(_) | CoreError::GridMismatch { .. } => {
            CliError::Config(e.to_string())
        }
        other => CliError::Solver(other.to_string()),
    }
}

pub fn validate(cfg: &LoadedConfig) -> (ValidationReport, String) {
    let report = validate_params(&cfg.config.model);
    let json = output::json_report(&report, &cfg.sha256);
    (report, json)
}

#[derive(Debug, Serialize)]
struct VlasovDiagnostics {
    method: Method,
    t_end: f64,
    dt: f64,
    nodes: usize,
    min_value: f64,
    max_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    picard: Option<bdlp_core::vlasov::PicardDiagnostics>,
}

/// Trajectory CSV and diagnostics JSON.
pub fn vlasov(cfg: &LoadedConfig, method: Method, override_regime: bool) -> Result<(String, String), CliError> {
    let c = &cfg.config;
    let rho0 = cfg.initial_field()?;
    let sys = VlasovSystem::new(&c.model).map_err(solver_err)?;
    let s = &c.solver;
    let (traj, picard) = match method {
        Method::Picard => {
            let settings = PicardSettings {
                t_end: s.t_end,
                dt: s.dt,
                tol: s.tol,
                max_iter: s.max_iter,
                allow_out_of_regime: override_regime,
                restart_every: s.restart_every,
            };
            let (t, d) = picard_solve(&sys, &rho0, &settings).map_err(solver_err)?;
            (t, Some(d))
        }
        Method::Rk4 => (rk4_solve(&sys, &rho0, s.t_end, s.dt).map_err(solver_err)?, None),
        Method::Linear => (linear_upper_solve(&sys, &rho0, s.t_end, s.dt).map_err(solver_err)?, None),
    };
    let diag = VlasovDiagnostics {
        method,
        t_end: s.t_end,
        dt: s.dt,
        nodes: traj.len(),
        min_value: traj.min_value(),
        max_value: traj.max_value(),
        picard,
    };
    Ok((
        output::trajectory_csv(&traj, &cfg.sha256),
        output::json_report(&diag, &cfg.sha256),
    ))
}

/// Snapshots (positions or binned counts), binned densities and pair
/// correlations for every `eps` in the list.
pub fn ibm(cfg: &LoadedConfig, overrides: &IbmOverrides, binned: bool) -> Result<Vec<Artifact>, CliError> {
    let mut cfg = cfg.clone();
    overrides.apply(&mut cfg);
    let c = &cfg.config;
    let i = &c.ibm;
    let rho0 = cfg.initial_field()?;
    let bins = i.bin_count();
    let mut ensembles = Vec::with_capacity(i.eps_list.len());
    let mut densities = Vec::new();
    let mut pairs = Vec::new();
    for (k, &eps) in i.eps_list.iter().enumerate() {
        let p = c.model.with_eps(eps);
        p.check().map_err(|e| CliError::Config(e.to_string()))?;
        let seed = bdlp_core::ibm::replicate_seed(i.seed, k as u64);
        let ens = run_ensemble(&p, &rho0, i.t_end, &i.snapshot_times, i.replicates, seed).map_err(solver_err)?;
        for (s, &t) in i.snapshot_times.iter().enumerate() {
            densities.push((eps, t, ensemble_density(&ens, s, bins).map_err(solver_err)?));
            let snaps: Vec<&[f64]> = ens.at(s).map(|x| x.positions.as_slice()).collect();
            let g = pair_correlation(&snaps, eps, p.domain_length, bins, i.separation_bins, i.max_separation)
                .map_err(solver_err)?;
            pairs.push((eps, t, g));
        }
        log::info!("eps = {eps}: {} replicates done", ens.len());
        ensembles.push(ens);
    }
    let snapshots = if binned {
        output::binned_counts_csv(&ensembles, bins, &cfg.sha256)
    } else {
        output::positions_csv(&ensembles, &cfg.sha256)
    };
    Ok(vec![
        Artifact {
            name: "snapshots.csv".into(),
            contents: snapshots,
        },
        Artifact {
            name: "density.csv".into(),
            contents: output::density_csv(&densities, &cfg.sha256),
        },
        Artifact {
            name: "pair_correlation.csv".into(),
            contents: output::pair_csv(&pairs, &cfg.sha256),
        },
    ])
}

/// Mean-field convergence table as CSV.
pub fn sweep(cfg: &LoadedConfig, overrides: &IbmOverrides) -> Result<String, CliError> {
    let mut cfg = cfg.clone();
    overrides.apply(&mut cfg);
    let c = &cfg.config;
    let i = &c.ibm;
    let rho0 = cfg.initial_field()?;
    let settings = SweepSettings {
        t_end: i.t_end,
        times: i.snapshot_times.clone(),
        eps_list: i.eps_list.clone(),
        replicates: i.replicates,
        seed: i.seed,
        bins: i.bin_count(),
        dt: i.reference_dt,
    };
    let rows = epsilon_sweep(&c.model, &rho0, &settings).map_err(solver_err)?;
    Ok(output::sweep_csv(&rows, &cfg.sha256))
}

/// Operator checks and their JSON report. With `strict`, a failed check
/// is an error.
pub fn ops(cfg: &LoadedConfig, check: Check, strict: bool) -> Result<(OpsReport, String), CliError> {
    let report = run_checks(&cfg.config.model, &cfg.config.truncation, check)?;
    let json = output::json_report(&report, &cfg.sha256);
    if strict && !report.pass {
        return Err(CliError::ChecksFailed(json));
    }
    Ok((report, json))
}
