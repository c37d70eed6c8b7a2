//! CSV and JSON rendering. Every file starts with a comment line carrying
//! the tool version and the SHA-256 of the configuration.

use std::fmt::Write as _;

use bdlp_core::estimators::{BinnedDensity, PairCorrelationEstimate, SweepRow};
use bdlp_core::{EnsembleResult, Trajectory};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn header(config_sha256: &str) -> String {
    format!("# bdlp {} config-sha256={config_sha256}\n", env!("CARGO_PKG_VERSION"))
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per time node: `t, rho_0, ..., rho_{M-1}`.
pub fn trajectory_csv(traj: &Trajectory, config_sha256: &str) -> String {
    let mut s = header(config_sha256);
    s.push('t');
    for i in 0..traj.sites() {
        write!(s, ",rho_{i}").unwrap();
    }
    s.push('\n');
    for (t, state) in traj.times.iter().zip(&traj.states) {
        s.push_str(&num(*t));
        for v in state {
            s.push(',');
            s.push_str(&num(*v));
        }
        s.push('\n');
    }
    s
}

/// `eps, replicate, t, x` with one row per particle.
pub fn positions_csv(ensembles: &[EnsembleResult], config_sha256: &str) -> String {
    let mut s = header(config_sha256);
    s.push_str("eps,replicate,t,x\n");
    for ens in ensembles {
        for (r, snaps) in ens.replicates.iter().enumerate() {
            for snap in snaps {
                for &x in &snap.positions {
                    writeln!(s, "{},{r},{},{}", num(ens.params.eps), num(snap.time), num(x)).unwrap();
                }
            }
        }
    }
    s
}

/// `eps, replicate, t, bin_center, count`.
pub fn binned_counts_csv(ensembles: &[EnsembleResult], bins: usize, config_sha256: &str) -> String {
    let mut s = header(config_sha256);
    s.push_str("eps,replicate,t,bin_center,count\n");
    for ens in ensembles {
        let width = ens.params.domain_length / bins as f64;
        for (r, snaps) in ens.replicates.iter().enumerate() {
            for snap in snaps {
                let mut counts = vec![0usize; bins];
                for &x in &snap.positions {
                    counts[((x / width) as usize).min(bins - 1)] += 1;
                }
                for (i, c) in counts.iter().enumerate() {
                    writeln!(
                        s,
                        "{},{r},{},{},{c}",
                        num(ens.params.eps),
                        num(snap.time),
                        num((i as f64 + 0.5) * width)
                    )
                    .unwrap();
                }
            }
        }
    }
    s
}

/// `eps, t, bin_center, density`.
pub fn density_csv(rows: &[(f64, f64, BinnedDensity)], config_sha256: &str) -> String {
    let mut s = header(config_sha256);
    s.push_str("eps,t,bin_center,density\n");
    for (eps, t, d) in rows {
        for (i, v) in d.values.iter().enumerate() {
            writeln!(s, "{},{},{},{}", num(*eps), num(*t), num(d.center(i)), num(*v)).unwrap();
        }
    }
    s
}

/// `eps, t, r, g, stderr`.
pub fn pair_csv(rows: &[(f64, f64, PairCorrelationEstimate)], config_sha256: &str) -> String {
    let mut s = header(config_sha256);
    s.push_str("eps,t,r,g,stderr\n");
    for (eps, t, g) in rows {
        for k in 0..g.g.len() {
            writeln!(
                s,
                "{},{},{},{},{}",
                num(*eps),
                num(*t),
                num(g.center(k)),
                num(g.g[k]),
                num(g.stderr[k])
            )
            .unwrap();
        }
    }
    s
}

/// `eps, t, l2_error, stderr`.
pub fn sweep_csv(rows: &[SweepRow], config_sha256: &str) -> String {
    let mut s = header(config_sha256);
    s.push_str("eps,t,l2_error,stderr\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", num(r.eps), num(r.t), num(r.l2_error), num(r.stderr)).unwrap();
    }
    s
}

/// Pretty JSON with the tool and config hash fields added at the top level.
pub fn json_report<T: serde::Serialize>(report: &T, config_sha256: &str) -> String {
    let mut value = serde_json::to_value(report).expect("serializable report");
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("tool".into(), format!("bdlp {}", env!("CARGO_PKG_VERSION")).into());
        map.insert("config_sha256".into(), config_sha256.into());
    }
    let mut s = serde_json::to_string_pretty(&value).expect("serializable report");
    s.push('\n');
    s
}
