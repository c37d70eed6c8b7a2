//! Renormalized hierarchy operators on the truncated configuration space.
//!
//! The rescaled generator, conjugated by the `eps^{|eta|}` scaling,
//! splits as `L_ren = A1 + A2 + eps (B1 + B2)`:
//!
//! ```text
//! (A1 G)(eta) = -m |eta| G(eta)
//! (A2 G)(eta) = -kappa_minus sum_{x in eta} sum_{y in eta\x} a_minus(x-y) G(eta\x)
//!               + kappa_plus sum_{y in eta} int a_plus(x-y) G(eta\y u x) dx
//! (B1 G)(eta) = -kappa_minus E(eta) G(eta)
//! (B2 G)(eta) =  kappa_plus sum_{y in eta} int a_plus(x-y) G(eta u x) dx
//! ```
//!
//! with `V = A1 + A2` the Vlasov limit. Integrals become `h * sum` over
//! grid sites and `G` vanishes on configurations with a repeated site.
//! The dual operators act on correlation functions through the pairing
//! `<<G, k>> = sum_n h^n sum_{|eta| = n} G k`.

use std::ops::{Add, Mul};
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::config_space::{
    energy, ConfigFn, ConfigSpace, CorrelationFunction, GridConfiguration, LpExponent,
    QuasiObservable,
};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::DiscreteKernel;
use crate::params::ModelParams;
use crate::vlasov::VlasovSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OperatorId {
    A1,
    A2,
    B1,
    B2,
    /// `A1 + A2`.
    V,
    /// `A1 + A2 + eps (B1 + B2)`.
    LRen,
    /// Dual of `V`.
    VStar,
    /// Dual of the rescaled (not renormalized) generator.
    LStar,
}

impl OperatorId {
    pub fn name(self) -> &'static str {
        match self {
            Self::A1 => "A1",
            Self::A2 => "A2",
            Self::B1 => "B1",
            Self::B2 => "B2",
            Self::V => "V",
            Self::LRen => "L_ren",
            Self::VStar => "V_star",
            Self::LStar => "L_star",
        }
    }

    fn needs_interior_support(self) -> bool {
        !matches!(self, Self::A1 | Self::B1)
    }
}

/// How an operator treats input on the top truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Reject inputs whose image would leave the truncation.
    Strict,
    /// Compute the compressed operator `P_N A P_N`.
    Project,
}

/// Ratio samples against a theoretical ceiling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub ceiling: f64,
    pub pass: bool,
    pub samples: usize,
}

impl BoundReport {
    pub fn from_ratios(ratios: Vec<f64>, ceiling: f64) -> Self {
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        Self {
            samples: ratios.len(),
            pass: max_ratio <= ceiling * (1.0 + 1e-9),
            max_ratio,
            ceiling,
            ratios,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventRow {
    pub eps: f64,
    /// `||R(eps) G - R(0) G||_C`.
    pub delta1: f64,
    /// `||eps B1 R(eps) G||_C`.
    pub delta2: f64,
    /// `||eps B2 R(eps) G||_C`.
    pub delta3: f64,
    /// `||R(eps) G||_C`.
    pub resolvent_norm: f64,
}

/// Resolvent differences for a decreasing list of `eps`, with
/// `R(eps) = (A1 + eps B1 - lambda)^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventTable {
    pub lambda: f64,
    pub rows: Vec<ResolventRow>,
    /// `||R(0) G||_C`.
    pub limit_norm: f64,
}

impl ResolventTable {
    fn column(&self, i: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| [r.delta1, r.delta2, r.delta3][i])
            .collect()
    }

    /// Every delta is nonincreasing along the (decreasing) `eps` list.
    pub fn monotone(&self) -> bool {
        (0..3).all(|i| self.column(i).windows(2).all(|w| w[1] <= w[0]))
    }

    /// `delta_i` at the last row divided by `delta_i` at the one before.
    pub fn last_ratios(&self) -> [f64; 3] {
        let n = self.rows.len();
        assert!(n >= 2, "need two rows for a ratio");
        let (a, b) = (&self.rows[n - 2], &self.rows[n - 1]);
        [b.delta1 / a.delta1, b.delta2 / a.delta2, b.delta3 / a.delta3]
    }

    /// `||R(eps) G|| <= ||R(0) G||` for every row.
    pub fn sup_bound_holds(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.resolvent_norm <= self.limit_norm * (1.0 + 1e-12))
    }
}

/// Result of the Neumann-series resolvent of `L_ren`.
#[derive(Debug, Clone)]
pub struct NeumannResolvent {
    pub value: QuasiObservable,
    pub terms: usize,
    /// Norm of the last series term, relative to the partial sum.
    pub tail: f64,
}

/// Operators of one model on one truncated configuration space.
#[derive(Debug, Clone)]
pub struct HierarchyOps {
    params: ModelParams,
    space: Arc<ConfigSpace>,
    a_minus: DiscreteKernel,
    a_plus: DiscreteKernel,
    energy_minus: QuasiObservable,
}

impl HierarchyOps {
    /// Grid of `sites` cells over the model's domain; `C` is the norm weight.
    pub fn new(params: &ModelParams, sites: usize, max_level: usize) -> Result<Self> {
        params.check()?;
        let space = ConfigSpace::new(sites, max_level, params.domain_length, params.c)?;
        let a_minus = DiscreteKernel::discretize(&params.a_minus, params.domain_length, sites)?;
        let a_plus = DiscreteKernel::discretize(&params.a_plus, params.domain_length, sites)?;
        let energy_minus = QuasiObservable::from_fn(&space, |eta| energy(&a_minus, eta.sites()));
        Ok(Self {
            params: params.clone(),
            space,
            a_minus,
            a_plus,
            energy_minus,
        })
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self {
            params: self.params.with_eps(eps),
            ..self.clone()
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn space(&self) -> &Arc<ConfigSpace> {
        &self.space
    }

    pub fn competition_kernel(&self) -> &DiscreteKernel {
        &self.a_minus
    }

    pub fn dispersal_kernel(&self) -> &DiscreteKernel {
        &self.a_plus
    }

    /// `E^{a_minus}(eta)` on the grid.
    pub fn energy(&self, eta: &GridConfiguration) -> f64 {
        self.energy_minus.get(eta)
    }

    fn check_space<K>(&self, f: &crate::config_space::Tabulated<K>) -> Result<()> {
        let s = f.space();
        if s.sites() != self.space.sites() || s.max_level() != self.space.max_level() {
            return Err(Error::GridMismatch {
                expected: self.space.sites(),
                expected_length: self.space.length(),
                found: s.sites(),
                found_length: s.length(),
            });
        }
        Ok(())
    }

    fn check_interior(&self, support: Option<usize>) -> Result<()> {
        let top = self.space.max_level();
        match support {
            Some(n) if n >= top => Err(Error::TruncationOverflow {
                size: top + 1,
                max_level: top,
            }),
            _ => Ok(()),
        }
    }

    /// Applies one of `A1, A2, B1, B2, V, L_ren` with strict truncation.
    pub fn apply_component(&self, id: OperatorId, g: &QuasiObservable) -> Result<QuasiObservable> {
        self.apply_component_with(id, g, Truncation::Strict)
    }

    pub fn apply_component_with(
        &self,
        id: OperatorId,
        g: &QuasiObservable,
        truncation: Truncation,
    ) -> Result<QuasiObservable> {
        if matches!(id, OperatorId::VStar | OperatorId::LStar) {
            return Err(Error::UnsupportedOperator(id.name()));
        }
        self.check_space(g)?;
        if truncation == Truncation::Strict && id.needs_interior_support() {
            self.check_interior(g.support_level())?;
        }
        let eps = self.params.eps;
        let mut buf = Vec::with_capacity(self.space.max_level() + 1);
        Ok(QuasiObservable::from_fn(&self.space, |eta| {
            let s = eta.sites();
            match id {
                OperatorId::A1 => self.a1_at(g, s),
                OperatorId::A2 => self.a2_at(g, s, &mut buf),
                OperatorId::B1 => self.b1_at(g, s),
                OperatorId::B2 => self.b2_at(g, s, &mut buf),
                OperatorId::V => self.a1_at(g, s) + self.a2_at(g, s, &mut buf),
                OperatorId::LRen => {
                    self.a1_at(g, s)
                        + self.a2_at(g, s, &mut buf)
                        + eps * (self.b1_at(g, s) + self.b2_at(g, s, &mut buf))
                }
                OperatorId::VStar | OperatorId::LStar => unreachable!(),
            }
        }))
    }

    fn a1_at(&self, g: &QuasiObservable, eta: &[usize]) -> f64 {
        -self.params.m * eta.len() as f64 * g.value_at(eta)
    }

    fn b1_at(&self, g: &QuasiObservable, eta: &[usize]) -> f64 {
        -self.params.kappa_minus * self.energy_minus.value_at(eta) * g.value_at(eta)
    }

    fn a2_at(&self, g: &QuasiObservable, eta: &[usize], buf: &mut Vec<usize>) -> f64 {
        let p = &self.params;
        let h = self.space.spacing();
        let mut crowd = 0.0;
        let mut spread = 0.0;
        for (i, &x) in eta.iter().enumerate() {
            let local: f64 = eta
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &y)| self.a_minus.between(x, y))
                .sum();
            if local != 0.0 {
                remove_index(buf, eta, i);
                crowd += local * g.value_at(buf);
            }
            for site in 0..self.space.sites() {
                let w = self.a_plus.between(site, x);
                if w == 0.0 {
                    continue;
                }
                if replace_index(buf, eta, i, site) {
                    spread += w * g.value_at(buf);
                }
            }
        }
        -p.kappa_minus * crowd + p.kappa_plus * h * spread
    }

    fn b2_at(&self, g: &QuasiObservable, eta: &[usize], buf: &mut Vec<usize>) -> f64 {
        if eta.len() >= self.space.max_level() {
            return 0.0;
        }
        let h = self.space.spacing();
        let mut total = 0.0;
        for site in 0..self.space.sites() {
            if !insert_site(buf, eta, site) {
                continue;
            }
            let gv = g.value_at(buf);
            if gv == 0.0 {
                continue;
            }
            let reach: f64 = eta.iter().map(|&y| self.a_plus.between(site, y)).sum();
            total += reach * gv;
        }
        self.params.kappa_plus * h * total
    }

    /// Applies `V_star` or `L_star` to a tabulated correlation function.
    ///
    /// `k` must vanish on the top level, since both duals read `k(eta u x)`.
    pub fn apply_dual(&self, id: OperatorId, k: &CorrelationFunction) -> Result<CorrelationFunction> {
        if !matches!(id, OperatorId::VStar | OperatorId::LStar) {
            return Err(Error::UnsupportedOperator(id.name()));
        }
        self.check_space(k)?;
        self.check_interior(k.support_level())?;
        let mut buf = Vec::with_capacity(self.space.max_level() + 1);
        Ok(CorrelationFunction::from_fn(&self.space, |eta| {
            self.dual_at(id, k, eta.sites(), &mut buf)
        }))
    }

    /// Evaluates a dual operator at one configuration for any function of
    /// (multi)sets, e.g. a Lebesgue–Poisson exponent.
    pub fn dual_at<F: ConfigFn + ?Sized>(
        &self,
        id: OperatorId,
        k: &F,
        eta: &[usize],
        buf: &mut Vec<usize>,
    ) -> f64 {
        self.dual_generic(id, &|s: &[usize]| k.eval_sorted(s), eta, buf)
    }

    /// [`Self::dual_at`] accumulated in double-double arithmetic.
    pub fn dual_at_extended<F: ConfigFn + ?Sized>(
        &self,
        id: OperatorId,
        k: &F,
        eta: &[usize],
        buf: &mut Vec<usize>,
    ) -> TwoFloat {
        self.dual_generic(id, &|s: &[usize]| k.eval_extended(s), eta, buf)
    }

    fn dual_generic<S: Scalar>(
        &self,
        id: OperatorId,
        k: &dyn Fn(&[usize]) -> S,
        eta: &[usize],
        buf: &mut Vec<usize>,
    ) -> S {
        let p = &self.params;
        let h = self.space.spacing();
        let n = eta.len() as f64;
        let sites = self.space.sites();
        let (crowd_rate, diag) = match id {
            OperatorId::VStar => (p.kappa_minus, p.m * n),
            OperatorId::LStar => (
                p.eps * p.kappa_minus,
                p.m * n + p.eps * p.kappa_minus * energy(&self.a_minus, eta),
            ),
            _ => panic!("{} is not a dual operator", id.name()),
        };
        let zero = S::from(0.0);
        let mut out = S::from(-diag) * k(eta);

        let mut crowd = zero;
        let mut spread = zero;
        for (i, &x) in eta.iter().enumerate() {
            for y in 0..sites {
                let wm = self.a_minus.between(x, y);
                if wm != 0.0 {
                    insert_multi(buf, eta, y);
                    crowd = crowd + S::from(wm) * k(buf);
                }
                let wp = self.a_plus.between(x, y);
                if wp != 0.0 {
                    replace_multi(buf, eta, i, y);
                    spread = spread + S::from(wp) * k(buf);
                }
            }
        }
        out = out + S::from(-crowd_rate * h) * crowd + S::from(p.kappa_plus * h) * spread;

        if id == OperatorId::LStar {
            let mut births = zero;
            for (i, &x) in eta.iter().enumerate() {
                let local: f64 = eta
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &y)| self.a_plus.between(x, y))
                    .sum();
                if local != 0.0 {
                    remove_index(buf, eta, i);
                    births = births + S::from(local) * k(buf);
                }
            }
            out = out + S::from(p.kappa_plus) * births;
        }
        out
    }

    /// `(A1 + eps B1 - lambda)^{-1} G = -G / (m|eta| + eps kappa_minus E(eta) + lambda)`.
    pub fn resolvent_a1(&self, lambda: f64, g: &QuasiObservable) -> Result<QuasiObservable> {
        check_lambda(lambda)?;
        self.check_space(g)?;
        let p = &self.params;
        let mut out = g.clone();
        for (n, (lv, en)) in out
            .levels_mut()
            .iter_mut()
            .zip(energy_levels(&self.energy_minus))
            .enumerate()
        {
            for (v, e) in lv.iter_mut().zip(en) {
                *v = -*v / (p.m * n as f64 + p.eps * p.kappa_minus * e + lambda);
            }
        }
        Ok(out)
    }

    /// `(A1 + eps B1 - lambda) G`, the inverse of [`Self::resolvent_a1`].
    pub fn shifted_a1(&self, lambda: f64, g: &QuasiObservable) -> QuasiObservable {
        let p = &self.params;
        let mut out = g.clone();
        for (n, (lv, en)) in out
            .levels_mut()
            .iter_mut()
            .zip(energy_levels(&self.energy_minus))
            .enumerate()
        {
            for (v, e) in lv.iter_mut().zip(en) {
                *v *= -(p.m * n as f64 + p.eps * p.kappa_minus * e + lambda);
            }
        }
        out
    }

    /// `eps kappa_minus E / ((m|eta| + eps kappa_minus E + lambda)(m|eta| + lambda))`.
    pub fn f_eps(&self, lambda: f64, eta: &GridConfiguration) -> f64 {
        let p = &self.params;
        let e = p.eps * p.kappa_minus * self.energy(eta);
        let base = p.m * eta.len() as f64 + lambda;
        e / ((base + e) * base)
    }

    /// Largest `f_eps` over every stored configuration.
    pub fn f_eps_max(&self, lambda: f64) -> f64 {
        self.space
            .all_configs()
            .map(|eta| self.f_eps(lambda, &eta))
            .fold(0.0, f64::max)
    }

    /// Samples `||A2 G||_C / ||A1 G||_C` over random `G` on levels
    /// `1..N-1`; the ceiling is `(kappa_minus C + kappa_plus) / m`.
    pub fn relative_bound_report<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<BoundReport> {
        let p = &self.params;
        let top = self.space.max_level().saturating_sub(1);
        let mut ratios = Vec::with_capacity(samples);
        for _ in 0..samples {
            let g = QuasiObservable::random(&self.space, 1, top, rng);
            ratios.push(self.relative_bound_ratio(&g)?);
        }
        Ok(BoundReport::from_ratios(
            ratios,
            (p.kappa_minus * p.c + p.kappa_plus) / p.m,
        ))
    }

    pub fn relative_bound_ratio(&self, g: &QuasiObservable) -> Result<f64> {
        let a2 = self.apply_component(OperatorId::A2, g)?;
        let a1 = self.apply_component(OperatorId::A1, g)?;
        Ok(a2.lc_norm() / a1.lc_norm())
    }

    /// Samples `||(A2 + eps B2)(A1 + eps B1 - lambda)^{-1} G||_C / ||G||_C`
    /// for the projected operators against the ceiling `1/2`. A passing
    /// report only means no violation was found among the samples.
    pub fn perturbation_report<R: Rng + ?Sized>(
        &self,
        lambda: f64,
        samples: usize,
        rng: &mut R,
    ) -> Result<BoundReport> {
        let mut ratios = Vec::with_capacity(samples);
        for _ in 0..samples {
            let g = QuasiObservable::random(&self.space, 0, self.space.max_level(), rng);
            let image = self.perturbation(lambda, &g)?;
            ratios.push(image.lc_norm() / g.lc_norm());
        }
        Ok(BoundReport::from_ratios(ratios, 0.5))
    }

    /// `(A2 + eps B2)(A1 + eps B1 - lambda)^{-1} G`, projected.
    fn perturbation(&self, lambda: f64, g: &QuasiObservable) -> Result<QuasiObservable> {
        let r = self.resolvent_a1(lambda, g)?;
        let a2 = self.apply_component_with(OperatorId::A2, &r, Truncation::Project)?;
        let b2 = self.apply_component_with(OperatorId::B2, &r, Truncation::Project)?;
        Ok(&a2 + &(&b2 * self.params.eps))
    }

    /// Resolvent of the projected `L_ren` by the Neumann series
    /// `R(eps) sum_j (-P)^j G`, `P = (A2 + eps B2) R(eps)`, stopped once a
    /// term falls below `tol` relative to the partial sum.
    pub fn resolvent_ren(
        &self,
        lambda: f64,
        g: &QuasiObservable,
        tol: f64,
        max_terms: usize,
    ) -> Result<NeumannResolvent> {
        let mut term = g.clone();
        let mut sum = g.clone();
        let mut terms = 1;
        let mut tail = 1.0;
        while terms < max_terms {
            term = &self.perturbation(lambda, &term)? * -1.0;
            sum = &sum + &term;
            terms += 1;
            let s = sum.lc_norm();
            tail = if s > 0.0 { term.lc_norm() / s } else { 0.0 };
            if tail <= tol {
                break;
            }
        }
        Ok(NeumannResolvent {
            value: self.resolvent_a1(lambda, &sum)?,
            terms,
            tail,
        })
    }

    /// Resolvent differences for each `eps` in `eps_list` (sorted
    /// decreasing internally).
    pub fn resolvent_convergence_report(
        &self,
        eps_list: &[f64],
        lambda: f64,
        g: &QuasiObservable,
    ) -> Result<ResolventTable> {
        check_lambda(lambda)?;
        let mut eps_sorted = eps_list.to_vec();
        eps_sorted.sort_by(|a, b| b.total_cmp(a));
        let limit = self.with_eps(0.0).resolvent_a1(lambda, g)?;
        let mut rows = Vec::with_capacity(eps_sorted.len());
        for eps in eps_sorted {
            let ops = self.with_eps(eps);
            let r = ops.resolvent_a1(lambda, g)?;
            let b1 = ops.apply_component(OperatorId::B1, &r)?;
            let b2 = ops.apply_component(OperatorId::B2, &r)?;
            rows.push(ResolventRow {
                eps,
                delta1: (&r - &limit).lc_norm(),
                delta2: eps * b1.lc_norm(),
                delta3: eps * b2.lc_norm(),
                resolvent_norm: r.lc_norm(),
            });
        }
        Ok(ResolventTable {
            lambda,
            rows,
            limit_norm: limit.lc_norm(),
        })
    }

    /// Largest `|(V* e(rho))(eta) - sum_{x in eta} v(rho)(x) e(rho, eta\x)|`
    /// over `|eta| <= N - 1`, where `v(rho)` is the Vlasov right-hand side
    /// built from the spectral convolutions on this grid.
    ///
    /// Terms reach `m N C^N` while the tolerance of interest is absolute,
    /// so both sides are accumulated in double-double arithmetic; only the
    /// convolutions themselves are plain `f64`.
    pub fn chaos_generator_check(&self, rho: &Field) -> Result<f64> {
        rho.check_same_grid(self.space.sites(), self.space.length())?;
        let p = &self.params;
        let sys = VlasovSystem::on_grid(p, self.space.length(), self.space.sites())?;
        let crowd = sys.competition().apply(rho.values());
        let spread = sys.dispersal().apply(rho.values());
        let velocity: Vec<TwoFloat> = rho
            .values()
            .iter()
            .zip(crowd.iter().zip(&spread))
            .map(|(&r, (&c, &s))| {
                TwoFloat::from(-p.m) * r - TwoFloat::from(p.kappa_minus) * r * c
                    + TwoFloat::from(p.kappa_plus) * s
            })
            .collect();
        let e = LpExponent(rho.values());
        let mut buf = Vec::with_capacity(self.space.max_level() + 1);
        let mut rest = Vec::with_capacity(self.space.max_level());
        let mut worst: f64 = 0.0;
        for n in 0..self.space.max_level() {
            for eta in self.space.configs(n) {
                let s = eta.sites();
                let lhs = self.dual_at_extended(OperatorId::VStar, &e, s, &mut buf);
                let mut rhs = TwoFloat::from(0.0);
                for (i, &x) in s.iter().enumerate() {
                    remove_index(&mut rest, s, i);
                    rhs += velocity[x] * e.eval_extended(&rest);
                }
                worst = worst.max(f64::from(lhs - rhs).abs());
            }
        }
        Ok(worst)
    }
}

/// Arithmetic shared by plain and double-double accumulation.
trait Scalar: Copy + From<f64> + Add<Output = Self> + Mul<Output = Self> {}

impl<S: Copy + From<f64> + Add<Output = S> + Mul<Output = S>> Scalar for S {}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "resolvent parameter must be positive, got {lambda}"
        )));
    }
    Ok(())
}

fn energy_levels(e: &QuasiObservable) -> impl Iterator<Item = &[f64]> {
    (0..=e.space().max_level()).map(move |n| e.level(n))
}

fn remove_index(buf: &mut Vec<usize>, eta: &[usize], i: usize) {
    buf.clear();
    buf.extend_from_slice(&eta[..i]);
    buf.extend_from_slice(&eta[i + 1..]);
}

/// `eta u {site}` if `site` is new; `false` for a repeated site.
fn insert_site(buf: &mut Vec<usize>, eta: &[usize], site: usize) -> bool {
    match eta.binary_search(&site) {
        Ok(_) => false,
        Err(pos) => {
            buf.clear();
            buf.extend_from_slice(&eta[..pos]);
            buf.push(site);
            buf.extend_from_slice(&eta[pos..]);
            true
        }
    }
}

/// `(eta \ eta[i]) u {site}`; `false` if that repeats a site.
fn replace_index(buf: &mut Vec<usize>, eta: &[usize], i: usize, site: usize) -> bool {
    replace_multi(buf, eta, i, site);
    !buf.windows(2).any(|w| w[0] == w[1])
}

fn insert_multi(buf: &mut Vec<usize>, eta: &[usize], site: usize) {
    let pos = eta.partition_point(|&s| s < site);
    buf.clear();
    buf.extend_from_slice(&eta[..pos]);
    buf.push(site);
    buf.extend_from_slice(&eta[pos..]);
}

fn replace_multi(buf: &mut Vec<usize>, eta: &[usize], i: usize, site: usize) {
    buf.clear();
    let mut placed = false;
    for (j, &s) in eta.iter().enumerate() {
        if j == i {
            continue;
        }
        if !placed && site <= s {
            buf.push(site);
            placed = true;
        }
        buf.push(s);
    }
    if !placed {
        buf.push(site);
    }
}
