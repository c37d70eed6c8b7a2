//! Model constants and the parameter conditions under which the
//! renormalized hierarchy generates a semigroup and the Picard map
//! contracts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_grid, DiscreteKernel, Kernel, KernelFamily};

/// Tail mass left outside the window on which the pointwise competition
/// condition is checked.
const COMPARISON_WINDOW_TAIL: f64 = 1e-6;
const COMPARISON_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Competition kernel.
    pub a_minus: Kernel,
    /// Dispersal kernel.
    pub a_plus: Kernel,
    /// Intrinsic mortality.
    pub m: f64,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    /// Weight of the quasi-observable norm; also the density cap.
    pub c: f64,
    pub eps: f64,
    pub domain_length: f64,
    pub grid_size: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ModelParams {
    /// The reference parameter set: `m = 40`, unit rates, `C = 8`, unit
    /// Gaussian kernels on a length-16 circle with 64 cells.
    pub fn canonical() -> Self {
        Self {
            a_minus: Kernel::gaussian(1.0),
            a_plus: Kernel::gaussian(1.0),
            m: 40.0,
            kappa_minus: 1.0,
            kappa_plus: 1.0,
            c: 8.0,
            eps: 1.0,
            domain_length: 16.0,
            grid_size: 64,
        }
    }

    /// Checks rates, scaling parameter and grid.
    pub fn check(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("c", self.c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("kappa_minus", self.kappa_minus),
            ("kappa_plus", self.kappa_plus),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 1], got {}",
                self.eps
            )));
        }
        for k in [&self.a_minus, &self.a_plus] {
            Kernel::new(k.family, k.scale)?;
        }
        check_grid(self.domain_length, self.grid_size)
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    pub fn with_grid(&self, domain_length: f64, grid_size: usize) -> Self {
        Self {
            domain_length,
            grid_size,
            ..self.clone()
        }
    }

    pub fn spacing(&self) -> f64 {
        self.domain_length / self.grid_size as f64
    }

    pub fn discrete_kernels(&self) -> Result<(DiscreteKernel, DiscreteKernel)> {
        Ok((
            DiscreteKernel::discretize(&self.a_minus, self.domain_length, self.grid_size)?,
            DiscreteKernel::discretize(&self.a_plus, self.domain_length, self.grid_size)?,
        ))
    }

    /// `4 (kappa_plus + C kappa_minus) / m`.
    pub fn contraction_constant(&self) -> f64 {
        4.0 * (self.kappa_plus + self.c * self.kappa_minus) / self.m
    }
}

/// Smallest weight for which the Picard contraction estimate closes.
pub fn c_lower_bound() -> f64 {
    4.0 / (16.0 * std::f64::consts::E - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub bigmort_ok: bool,
    /// `m - 4 (kappa_minus C + kappa_plus)`; must be strictly positive.
    pub bigmort_margin: f64,
    pub bigcomp_ok: bool,
    /// Minimum over the window of `C kappa_minus a_minus(x) - 4 kappa_plus a_plus(x)`.
    pub bigcomp_margin: f64,
    pub bigcomp_argmin: f64,
    pub c_lower_ok: bool,
    pub c_lower_bound: f64,
    pub contraction_q: f64,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.bigmort_ok && self.bigcomp_ok && self.c_lower_ok
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.bigmort_ok {
            out.push(format!(
                "mortality condition fails: m - 4(kappa_minus C + kappa_plus) = {}",
                self.bigmort_margin
            ));
        }
        if !self.bigcomp_ok {
            out.push(format!(
                "competition condition fails at x = {}: margin {}",
                self.bigcomp_argmin, self.bigcomp_margin
            ));
        }
        if !self.c_lower_ok {
            out.push(format!("C below {}", self.c_lower_bound));
        }
        out
    }
}

/// Evaluates the mortality, competition and weight conditions.
///
/// The competition condition is checked pointwise on the continuous
/// kernels over a symmetric window holding all but `1e-6` of each
/// kernel's mass. Both kernels are even, so only `x >= 0` is scanned.
pub fn validate_params(p: &ModelParams) -> ValidationReport {
    let bigmort_margin = p.m - 4.0 * (p.kappa_minus * p.c + p.kappa_plus);
    let window = p
        .a_minus
        .cutoff_radius(COMPARISON_WINDOW_TAIL)
        .max(p.a_plus.cutoff_radius(COMPARISON_WINDOW_TAIL));

    let margin = |x: f64| p.c * p.kappa_minus * p.a_minus.eval(x) - 4.0 * p.kappa_plus * p.a_plus.eval(x);
    let mut probes: Vec<f64> = (0..=COMPARISON_SAMPLES)
        .map(|i| window * i as f64 / COMPARISON_SAMPLES as f64)
        .collect();
    for k in [&p.a_minus, &p.a_plus] {
        if k.family == KernelFamily::Tophat && k.scale <= window {
            probes.push(k.scale);
            probes.push(k.scale.next_up());
        }
    }
    let (bigcomp_argmin, bigcomp_margin) = probes
        .into_iter()
        .map(|x| (x, margin(x)))
        .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });

    let c_lower = c_lower_bound();
    ValidationReport {
        bigmort_ok: bigmort_margin > 0.0,
        bigmort_margin,
        bigcomp_ok: bigcomp_margin >= 0.0,
        bigcomp_margin,
        bigcomp_argmin,
        c_lower_ok: p.c >= c_lower,
        c_lower_bound: c_lower,
        contraction_q: p.contraction_constant(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_set_satisfies_everything() {
        let r = validate_params(&ModelParams::canonical());
        assert!(r.bigmort_ok);
        assert_eq!(r.bigmort_margin, 4.0);
        assert!(r.bigcomp_ok);
        assert!(r.bigcomp_margin >= 0.0);
        assert!(r.c_lower_ok);
        assert!((r.contraction_q - 0.9).abs() < 1e-15);
        assert!(r.all_ok());
    }

    #[test]
    fn equal_kernels_with_small_c_fail() {
        let p = ModelParams {
            m: 8.0,
            c: 1.0,
            ..ModelParams::canonical()
        };
        let r = validate_params(&p);
        assert!(!r.bigmort_ok, "margin 0 must fail the strict inequality");
        assert_eq!(r.bigmort_margin, 0.0);
        assert!(!r.bigcomp_ok);
        // the worst point of (1 - 4) a(x) is the mode
        assert_eq!(r.bigcomp_argmin, 0.0);
        assert_eq!(r.warnings().len(), 2);
    }

    #[test]
    fn c_lower_bound_is_inclusive() {
        let p = ModelParams {
            c: 4.0 / (16.0 * std::f64::consts::E - 1.0),
            ..ModelParams::canonical()
        };
        assert!(validate_params(&p).c_lower_ok);
        let below = ModelParams {
            c: p.c.next_down(),
            ..p
        };
        assert!(!validate_params(&below).c_lower_ok);
    }

    #[test]
    fn wider_dispersal_tophat_breaks_competition_condition() {
        // a_plus reaches beyond a_minus: just past R_minus the margin is negative
        let p = ModelParams {
            a_minus: Kernel::tophat(1.0),
            a_plus: Kernel::tophat(1.2),
            ..ModelParams::canonical()
        };
        let r = validate_params(&p);
        assert!(!r.bigcomp_ok);
        assert!(r.bigcomp_argmin > 1.0 && r.bigcomp_argmin <= 1.2);
    }

    #[test]
    fn structural_checks() {
        assert!(ModelParams::canonical().check().is_ok());
        assert!(ModelParams { eps: 0.0, ..ModelParams::canonical() }.check().is_err());
        assert!(ModelParams { eps: 1.5, ..ModelParams::canonical() }.check().is_err());
        assert!(ModelParams { m: -1.0, ..ModelParams::canonical() }.check().is_err());
        assert!(ModelParams { grid_size: 15, ..ModelParams::canonical() }.check().is_err());
        assert!(ModelParams { kappa_minus: -0.1, ..ModelParams::canonical() }.check().is_err());
        let pure_death = ModelParams { kappa_minus: 0.0, kappa_plus: 0.0, ..ModelParams::canonical() };
        assert!(pure_death.check().is_ok());
    }

    #[test]
    fn contraction_constant_formula() {
        let p = ModelParams {
            m: 13.0,
            kappa_minus: 0.3,
            kappa_plus: 0.7,
            c: 2.5,
            ..ModelParams::canonical()
        };
        assert_eq!(validate_params(&p).contraction_q, 4.0 * (0.7 + 2.5 * 0.3) / 13.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn raising_mortality_never_breaks_the_mortality_condition(
                m in 0.1f64..100.0,
                bump in 0.0f64..50.0,
                km in 0.01f64..3.0,
                kp in 0.01f64..3.0,
                c in 0.1f64..10.0,
            ) {
                let p = ModelParams { m, kappa_minus: km, kappa_plus: kp, c, ..ModelParams::canonical() };
                let q = ModelParams { m: m + bump, ..p.clone() };
                let (rp, rq) = (validate_params(&p), validate_params(&q));
                prop_assert!(!rp.bigmort_ok || rq.bigmort_ok);
                prop_assert_eq!(rp.contraction_q < 1.0, rp.bigmort_ok);
                prop_assert_eq!(rp.contraction_q, 4.0 * (kp + c * km) / m);
            }
        }
    }
}
