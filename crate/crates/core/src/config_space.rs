//! Finite configurations on a periodic grid and functions of them.
//!
//! A configuration is a set of distinct grid sites; functions are
//! tabulated level by level (`|eta| = 0..=N`) in colexicographic order.
//! Every integral against the Lebesgue–Poisson measure becomes
//! `sum_n h^n sum_{|eta| = n} f(eta)` over sorted configurations, the
//! `1/n!` of the measure cancelling against the `n!` orderings of a set.

use std::fmt;
use std::marker::PhantomData;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use rand::Rng;
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::kernel::DiscreteKernel;

/// Sorted, strictly increasing grid site indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridConfiguration(Vec<usize>);

impl GridConfiguration {
    pub fn new(sites: Vec<usize>) -> Result<Self> {
        if sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfiguration(format!(
                "sites must be strictly increasing: {sites:?}"
            )));
        }
        Ok(Self(sites))
    }

    /// Sorts `sites`; repeated sites are rejected.
    pub fn from_unsorted(mut sites: Vec<usize>) -> Result<Self> {
        sites.sort_unstable();
        Self::new(sites)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.0.binary_search(&site).is_ok()
    }

    /// The configuration with `site` added, or `None` if already present.
    pub fn with(&self, site: usize) -> Option<Self> {
        match self.0.binary_search(&site) {
            Ok(_) => None,
            Err(pos) => {
                let mut v = self.0.clone();
                v.insert(pos, site);
                Some(Self(v))
            }
        }
    }

    pub fn without(&self, site: usize) -> Self {
        Self(self.0.iter().copied().filter(|&s| s != site).collect())
    }

    /// Shifts every site by `shift` modulo `sites`.
    pub fn translated(&self, shift: usize, sites: usize) -> Self {
        let mut v: Vec<usize> = self.0.iter().map(|&s| (s + shift) % sites).collect();
        v.sort_unstable();
        Self(v)
    }
}

impl fmt::Display for GridConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

/// Grid, truncation level and norm weight shared by tabulated functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    sites: usize,
    max_level: usize,
    length: f64,
    weight: f64,
    binom: Vec<Vec<usize>>,
}

impl ConfigSpace {
    pub fn new(sites: usize, max_level: usize, length: f64, weight: f64) -> Result<Arc<Self>> {
        if sites == 0 || max_level > sites {
            return Err(Error::InvalidParameter(format!(
                "truncation level {max_level} needs at least that many of {sites} sites"
            )));
        }
        if !(length > 0.0 && weight > 0.0) {
            return Err(Error::InvalidParameter(
                "length and weight must be positive".into(),
            ));
        }
        // binom[s][k] = C(s, k) for s <= sites, k <= max_level + 1
        let mut binom = vec![vec![0usize; max_level + 2]; sites + 1];
        for (s, row) in binom.iter_mut().enumerate() {
            row[0] = 1;
            for (k, v) in row.iter_mut().enumerate().skip(1) {
                *v = if k > s { 0 } else { binom_direct(s, k) };
            }
        }
        Ok(Arc::new(Self {
            sites,
            max_level,
            length,
            weight,
            binom,
        }))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.sites as f64
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.binom[self.sites][level]
    }

    pub fn total_size(&self) -> usize {
        (0..=self.max_level).map(|n| self.level_size(n)).sum()
    }

    /// Colexicographic rank of a strictly increasing site list.
    #[inline]
    pub fn rank(&self, sorted: &[usize]) -> usize {
        sorted
            .iter()
            .enumerate()
            .map(|(i, &s)| self.binom[s][i + 1])
            .sum()
    }

    pub fn unrank(&self, level: usize, mut index: usize) -> GridConfiguration {
        let mut out = vec![0; level];
        let mut upper = self.sites;
        for k in (1..=level).rev() {
            let mut s = upper - 1;
            while self.binom[s][k] > index {
                s -= 1;
            }
            out[k - 1] = s;
            index -= self.binom[s][k];
            upper = s;
        }
        GridConfiguration(out)
    }

    /// All configurations of one level, in storage order.
    pub fn configs(&self, level: usize) -> impl Iterator<Item = GridConfiguration> + '_ {
        (0..self.level_size(level)).map(move |i| self.unrank(level, i))
    }

    pub fn all_configs(&self) -> impl Iterator<Item = GridConfiguration> + '_ {
        (0..=self.max_level).flat_map(move |n| self.configs(n))
    }

    fn compatible(&self, other: &Self) -> bool {
        self.sites == other.sites
            && self.max_level == other.max_level
            && self.length == other.length
            && self.weight == other.weight
    }
}

fn binom_direct(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Evaluation on sorted site lists that may contain repeats.
///
/// Tabulated functions vanish on lists with repeats (diagonal
/// configurations carry no Lebesgue–Poisson mass); product-form
/// functions extend naturally to them.
pub trait ConfigFn {
    fn eval_sorted(&self, sites: &[usize]) -> f64;

    /// Double-double evaluation; exact products where the function allows.
    fn eval_extended(&self, sites: &[usize]) -> TwoFloat {
        TwoFloat::from(self.eval_sorted(sites))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quasi {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correlation {}

/// A function on configurations of at most `N` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated<K> {
    space: Arc<ConfigSpace>,
    levels: Vec<Vec<f64>>,
    kind: PhantomData<K>,
}

/// Element of the truncated weighted-L1 space of quasi-observables.
pub type QuasiObservable = Tabulated<Quasi>;
/// Element of the truncated weighted-sup space of correlation functions.
pub type CorrelationFunction = Tabulated<Correlation>;

impl<K> Tabulated<K> {
    pub fn zeros(space: &Arc<ConfigSpace>) -> Self {
        let levels = (0..=space.max_level())
            .map(|n| vec![0.0; space.level_size(n)])
            .collect();
        Self {
            space: Arc::clone(space),
            levels,
            kind: PhantomData,
        }
    }

    pub fn from_fn(space: &Arc<ConfigSpace>, mut f: impl FnMut(&GridConfiguration) -> f64) -> Self {
        let mut out = Self::zeros(space);
        for n in 0..=space.max_level() {
            for (i, eta) in space.configs(n).enumerate() {
                out.levels[n][i] = f(&eta);
            }
        }
        out
    }

    /// Indicator of a single configuration.
    pub fn indicator(space: &Arc<ConfigSpace>, eta: &GridConfiguration) -> Result<Self> {
        let mut out = Self::zeros(space);
        out.set(eta, 1.0)?;
        Ok(out)
    }

    /// Indicator of the whole level `n`.
    pub fn level_indicator(space: &Arc<ConfigSpace>, level: usize) -> Self {
        Self::from_fn(space, |eta| if eta.len() == level { 1.0 } else { 0.0 })
    }

    /// Independent uniform values in `[-1, 1]` on levels `lo..=hi`, zero elsewhere.
    pub fn random<R: Rng + ?Sized>(space: &Arc<ConfigSpace>, lo: usize, hi: usize, rng: &mut R) -> Self {
        let mut out = Self::zeros(space);
        for n in lo..=hi.min(space.max_level()) {
            for v in &mut out.levels[n] {
                *v = rng.random_range(-1.0..=1.0);
            }
        }
        out
    }

    pub fn space(&self) -> &Arc<ConfigSpace> {
        &self.space
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn get(&self, eta: &GridConfiguration) -> f64 {
        self.value_at(eta.sites())
    }

    /// Value at a strictly increasing site list; zero beyond the truncation.
    #[inline]
    pub fn value_at(&self, sorted: &[usize]) -> f64 {
        if sorted.len() > self.space.max_level() {
            0.0
        } else {
            self.levels[sorted.len()][self.space.rank(sorted)]
        }
    }

    pub fn set(&mut self, eta: &GridConfiguration, value: f64) -> Result<()> {
        let n = eta.len();
        if n > self.space.max_level() {
            return Err(Error::TruncationOverflow {
                size: n,
                max_level: self.space.max_level(),
            });
        }
        if eta.sites().iter().any(|&s| s >= self.space.sites()) {
            return Err(Error::InvalidConfiguration(format!(
                "{eta} has a site outside 0..{}",
                self.space.sites()
            )));
        }
        let r = self.space.rank(eta.sites());
        self.levels[n][r] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (GridConfiguration, f64)> + '_ {
        (0..=self.space.max_level()).flat_map(move |n| {
            self.levels[n]
                .iter()
                .enumerate()
                .map(move |(i, &v)| (self.space.unrank(n, i), v))
        })
    }

    /// Highest level carrying a nonzero value.
    pub fn support_level(&self) -> Option<usize> {
        (0..=self.space.max_level())
            .rev()
            .find(|&n| self.levels[n].iter().any(|&v| v != 0.0))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn map_levels(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(n, lv)| lv.iter().map(|&v| f(n, v)).collect())
            .collect();
        Self {
            space: Arc::clone(&self.space),
            levels,
            kind: PhantomData,
        }
    }

    pub(crate) fn levels_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.levels
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(
            self.space.compatible(&other.space),
            "functions live on different configuration spaces"
        );
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Self {
            space: Arc::clone(&self.space),
            levels,
            kind: PhantomData,
        }
    }

    /// Multiplies level `n` by `eps^n`.
    pub fn scale_reps(&self, eps: f64) -> Self {
        self.map_levels(|n, v| v * eps.powi(n as i32))
    }
}

impl<K> ConfigFn for Tabulated<K> {
    fn eval_sorted(&self, sites: &[usize]) -> f64 {
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return 0.0;
        }
        self.value_at(sites)
    }
}

impl<K> Add for &Tabulated<K> {
    type Output = Tabulated<K>;
    fn add(self, rhs: Self) -> Tabulated<K> {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<K> Sub for &Tabulated<K> {
    type Output = Tabulated<K>;
    fn sub(self, rhs: Self) -> Tabulated<K> {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<K> Mul<f64> for &Tabulated<K> {
    type Output = Tabulated<K>;
    fn mul(self, rhs: f64) -> Tabulated<K> {
        self.map_levels(|_, v| v * rhs)
    }
}

impl<K> Serialize for Tabulated<K> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let levels: Vec<Vec<(Vec<usize>, f64)>> = (0..=self.space.max_level())
            .map(|n| {
                self.levels[n]
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (self.space.unrank(n, i).0, v))
                    .collect()
            })
            .collect();
        let mut s = serializer.serialize_struct("Tabulated", 5)?;
        s.serialize_field("sites", &self.space.sites())?;
        s.serialize_field("max_level", &self.space.max_level())?;
        s.serialize_field("length", &self.space.length())?;
        s.serialize_field("weight", &self.space.weight())?;
        s.serialize_field("levels", &levels)?;
        s.end()
    }
}

impl QuasiObservable {
    /// `sum_n C^n h^n sum_{|eta| = n} |G(eta)|`.
    pub fn lc_norm(&self) -> f64 {
        let ch = self.space.weight() * self.space.spacing();
        self.levels
            .iter()
            .enumerate()
            .map(|(n, lv)| ch.powi(n as i32) * lv.iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }
}

impl CorrelationFunction {
    /// `max_eta |k(eta)| C^{-|eta|}`.
    pub fn kc_norm(&self) -> f64 {
        let c = self.space.weight();
        self.levels
            .iter()
            .enumerate()
            .map(|(n, lv)| c.powi(-(n as i32)) * lv.iter().fold(0.0, |a: f64, v| a.max(v.abs())))
            .fold(0.0, f64::max)
    }

    /// Tabulates `e(rho, eta) = prod_{x in eta} rho(x)`.
    pub fn lp_exponent(space: &Arc<ConfigSpace>, rho: &[f64]) -> Result<Self> {
        if rho.len() != space.sites() {
            return Err(Error::GridMismatch {
                expected: space.sites(),
                expected_length: space.length(),
                found: rho.len(),
                found_length: space.length(),
            });
        }
        Ok(Self::from_fn(space, |eta| lp_exponent(rho, eta.sites())))
    }
}

/// `sum_{x in eta} sum_{y in eta \ x} a(x - y)`, ordered pairs, periodic offsets.
pub fn energy(kernel: &DiscreteKernel, eta: &[usize]) -> f64 {
    let mut e = 0.0;
    for (i, &x) in eta.iter().enumerate() {
        for (j, &y) in eta.iter().enumerate() {
            if i != j {
                e += kernel.between(x, y);
            }
        }
    }
    e
}

/// `prod_{x in eta} rho(x)`; one on the empty configuration.
pub fn lp_exponent(rho: &[f64], eta: &[usize]) -> f64 {
    eta.iter().map(|&x| rho[x]).product()
}

/// Lebesgue–Poisson exponent as a lazily evaluated function; defined on
/// repeated sites as well.
#[derive(Debug, Clone, Copy)]
pub struct LpExponent<'a>(pub &'a [f64]);

impl ConfigFn for LpExponent<'_> {
    fn eval_sorted(&self, sites: &[usize]) -> f64 {
        lp_exponent(self.0, sites)
    }

    fn eval_extended(&self, sites: &[usize]) -> TwoFloat {
        sites
            .iter()
            .fold(TwoFloat::from(1.0), |acc, &x| acc * self.0[x])
    }
}

fn subset_sum<K>(g: &Tabulated<K>, gamma: &GridConfiguration, alternating: bool) -> Result<f64> {
    let n = gamma.len();
    let max_level = g.space().max_level();
    if n > max_level {
        return Err(Error::TruncationOverflow {
            size: n,
            max_level,
        });
    }
    let sites = gamma.sites();
    let mut buf = Vec::with_capacity(n);
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        buf.clear();
        buf.extend((0..n).filter(|&i| mask & (1 << i) != 0).map(|i| sites[i]));
        let v = g.value_at(&buf);
        if alternating && (n - buf.len()) % 2 == 1 {
            total -= v;
        } else {
            total += v;
        }
    }
    Ok(total)
}

/// `(K G)(gamma) = sum_{eta subset gamma} G(eta)`.
pub fn k_transform(g: &QuasiObservable, gamma: &GridConfiguration) -> Result<f64> {
    subset_sum(g, gamma, false)
}

/// `(K^{-1} F)(eta) = sum_{xi subset eta} (-1)^{|eta \ xi|} F(xi)`.
pub fn k_inverse(f: &QuasiObservable, eta: &GridConfiguration) -> Result<f64> {
    subset_sum(f, eta, true)
}

/// K-transform of every stored configuration.
pub fn k_transform_table(g: &QuasiObservable) -> QuasiObservable {
    QuasiObservable::from_fn(g.space(), |gamma| {
        subset_sum(g, gamma, false).expect("stored configurations fit")
    })
}

pub fn k_inverse_table(f: &QuasiObservable) -> QuasiObservable {
    QuasiObservable::from_fn(f.space(), |eta| {
        subset_sum(f, eta, true).expect("stored configurations fit")
    })
}

/// `sum_n h^n sum_{|eta| = n} G(eta) k(eta)`.
pub fn pairing(g: &QuasiObservable, k: &CorrelationFunction) -> Result<f64> {
    if !g.space.compatible(&k.space) {
        return Err(Error::GridMismatch {
            expected: g.space.sites(),
            expected_length: g.space.length(),
            found: k.space.sites(),
            found_length: k.space.length(),
        });
    }
    let h = g.space.spacing();
    Ok(g.levels
        .iter()
        .zip(&k.levels)
        .enumerate()
        .map(|(n, (a, b))| h.powi(n as i32) * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(m: usize, n: usize) -> Arc<ConfigSpace> {
        ConfigSpace::new(m, n, m as f64, 8.0).unwrap()
    }

    fn cfg(s: &[usize]) -> GridConfiguration {
        GridConfiguration::new(s.to_vec()).unwrap()
    }

    #[test]
    fn rank_unrank_roundtrip_and_sizes() {
        let sp = space(16, 3);
        assert_eq!(sp.total_size(), 1 + 16 + 120 + 560);
        for n in 0..=3 {
            for (i, eta) in sp.configs(n).enumerate() {
                assert_eq!(eta.len(), n);
                assert!(eta.sites().windows(2).all(|w| w[0] < w[1]));
                assert_eq!(sp.rank(eta.sites()), i);
            }
        }
    }

    #[test]
    fn configurations_reject_repeats() {
        assert!(GridConfiguration::new(vec![1, 1]).is_err());
        assert!(GridConfiguration::new(vec![3, 1]).is_err());
        assert!(GridConfiguration::from_unsorted(vec![3, 1, 3]).is_err());
        assert_eq!(GridConfiguration::from_unsorted(vec![3, 1]).unwrap(), cfg(&[1, 3]));
        assert_eq!(cfg(&[1, 4]).with(4), None);
        assert_eq!(cfg(&[1, 4]).with(2), Some(cfg(&[1, 2, 4])));
    }

    #[test]
    fn energy_of_a_unit_pair() {
        let lap = DiscreteKernel::point_samples(&Kernel::laplace(1.0), 16.0, 16).unwrap();
        let e = energy(&lap, &[0, 1]);
        assert!((e - (-1f64).exp()).abs() < 1e-15);
        assert!((e - 0.36788).abs() < 1e-5);
        assert_eq!(energy(&lap, &[]), 0.0);
        assert_eq!(energy(&lap, &[5]), 0.0);
    }

    #[test]
    fn energy_is_translation_invariant() {
        let k = DiscreteKernel::discretize(&Kernel::gaussian(1.3), 16.0, 16).unwrap();
        let eta = cfg(&[0, 5, 10]);
        let e0 = energy(&k, eta.sites());
        for shift in 1..16 {
            let moved = eta.translated(shift, 16);
            assert!((energy(&k, moved.sites()) - e0).abs() < 1e-15);
        }
    }

    #[test]
    fn lp_exponent_cases() {
        let mut rho = vec![2.0; 16];
        assert_eq!(lp_exponent(&rho, &[]), 1.0);
        assert_eq!(lp_exponent(&rho, &[1, 4, 9]), 8.0);
        rho[4] = 0.0;
        assert_eq!(lp_exponent(&rho, &[1, 4, 9]), 0.0);
    }

    #[test]
    fn k_transform_of_indicators() {
        let sp = space(16, 3);
        let empty = QuasiObservable::indicator(&sp, &GridConfiguration::empty()).unwrap();
        let singles = QuasiObservable::level_indicator(&sp, 1);
        for gamma in sp.all_configs() {
            assert_eq!(k_transform(&empty, &gamma).unwrap(), 1.0);
            assert_eq!(k_transform(&singles, &gamma).unwrap(), gamma.len() as f64);
        }
        let too_big = cfg(&[0, 1, 2, 3]);
        assert!(matches!(
            k_transform(&empty, &too_big),
            Err(Error::TruncationOverflow { size: 4, max_level: 3 })
        ));
    }

    #[test]
    fn k_inverse_of_simple_functions() {
        let sp = space(16, 3);
        let ones = QuasiObservable::from_fn(&sp, |_| 1.0);
        let counts = QuasiObservable::from_fn(&sp, |eta| eta.len() as f64);
        for eta in sp.all_configs() {
            let expect_ones = if eta.is_empty() { 1.0 } else { 0.0 };
            assert_eq!(k_inverse(&ones, &eta).unwrap(), expect_ones);
            let expect_counts = if eta.len() == 1 { 1.0 } else { 0.0 };
            assert_eq!(k_inverse(&counts, &eta).unwrap(), expect_counts);
        }
    }

    #[test]
    fn k_inverse_matches_three_point_expansion() {
        // brute-force inclusion-exclusion written out for |eta| = 3
        let sp = space(8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = QuasiObservable::random(&sp, 0, 3, &mut rng);
        let (a, b, c) = (1, 4, 6);
        let v = |s: &[usize]| f.get(&cfg(s));
        let expect = v(&[a, b, c]) - v(&[a, b]) - v(&[a, c]) - v(&[b, c]) + v(&[a]) + v(&[b]) + v(&[c])
            - v(&[]);
        assert!((k_inverse(&f, &cfg(&[a, b, c])).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn k_transform_roundtrip_exhaustive() {
        let sp = space(16, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..3 {
            let f = QuasiObservable::random(&sp, 0, 3, &mut rng);
            assert!(k_transform_table(&k_inverse_table(&f)).max_abs_diff(&f) < 1e-12);
            assert!(k_inverse_table(&k_transform_table(&f)).max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn k_transform_preserves_positivity() {
        let sp = space(12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let g = QuasiObservable::random(&sp, 0, 3, &mut rng).map_levels(|_, v| v.abs());
        assert!(k_transform_table(&g).iter().all(|(_, v)| v >= 0.0));
    }

    #[test]
    fn norms_of_indicators() {
        let sp = space(16, 3);
        let empty = QuasiObservable::indicator(&sp, &GridConfiguration::empty()).unwrap();
        assert_eq!(empty.lc_norm(), 1.0);
        let singles = QuasiObservable::level_indicator(&sp, 1);
        // M cells each weighted C h, i.e. C L
        assert!((singles.lc_norm() - 8.0 * 16.0).abs() < 1e-12);
    }

    #[test]
    fn kc_norm_cases() {
        let sp = space(16, 3);
        assert_eq!(CorrelationFunction::zeros(&sp).kc_norm(), 0.0);
        let cap = CorrelationFunction::lp_exponent(&sp, &[8.0; 16]).unwrap();
        assert!((cap.kc_norm() - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..=8.0)).collect();
        let k = CorrelationFunction::lp_exponent(&sp, &rho).unwrap();
        assert!(k.kc_norm() <= 1.0);
    }

    #[test]
    fn pairing_on_the_empty_configuration() {
        let sp = space(16, 3);
        let e = GridConfiguration::empty();
        let g = &QuasiObservable::indicator(&sp, &e).unwrap() * 3.0;
        let k = &CorrelationFunction::indicator(&sp, &e).unwrap() * -2.5;
        assert_eq!(pairing(&g, &k).unwrap(), -7.5);
    }

    #[test]
    fn pairing_is_bounded_by_the_norms() {
        let sp = space(16, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let g = QuasiObservable::random(&sp, 0, 3, &mut rng);
            let k = CorrelationFunction::random(&sp, 0, 3, &mut rng).map_levels(|n, v| v * 8f64.powi(n as i32));
            let lhs = pairing(&g, &k).unwrap().abs();
            assert!(lhs <= g.lc_norm() * k.kc_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn scaling_map_is_self_dual_and_invertible() {
        let sp = space(16, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let g = QuasiObservable::random(&sp, 0, 3, &mut rng);
        let k = CorrelationFunction::random(&sp, 0, 3, &mut rng);
        assert_eq!(g.scale_reps(1.0), g);
        for eps in [0.5, 0.1, 0.013] {
            let lhs = pairing(&g.scale_reps(eps), &k).unwrap();
            let rhs = pairing(&g, &k.scale_reps(eps)).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300));
            assert!(g.scale_reps(eps).scale_reps(1.0 / eps).max_abs_diff(&g) < 1e-12);
        }
    }

    #[test]
    fn tabulated_functions_vanish_on_repeats() {
        let sp = space(8, 3);
        let g = QuasiObservable::from_fn(&sp, |_| 1.0);
        assert_eq!(g.eval_sorted(&[2, 2]), 0.0);
        assert_eq!(g.eval_sorted(&[1, 2]), 1.0);
        assert_eq!(g.eval_sorted(&[0, 1, 2, 3]), 0.0);
        assert_eq!(LpExponent(&[3.0; 8]).eval_sorted(&[2, 2]), 9.0);
    }

    #[test]
    fn json_lists_nonzero_entries_by_level() {
        let sp = space(4, 2);
        let g = QuasiObservable::indicator(&sp, &cfg(&[1, 3])).unwrap();
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(v["levels"][2][0][0], serde_json::json!([1, 3]));
        assert_eq!(v["levels"][2][0][1], serde_json::json!(1.0));
        assert_eq!(v["levels"][0].as_array().unwrap().len(), 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn norm_axioms(seed in any::<u64>(), a in -3.0f64..3.0) {
                let sp = space(10, 3);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = QuasiObservable::random(&sp, 0, 3, &mut rng);
                let f = QuasiObservable::random(&sp, 0, 3, &mut rng);
                prop_assert!((&g + &f).lc_norm() <= (g.lc_norm() + f.lc_norm()) * (1.0 + 1e-12));
                prop_assert!(((&g * a).lc_norm() - a.abs() * g.lc_norm()).abs() <= 1e-10 * g.lc_norm());
                let k = CorrelationFunction::random(&sp, 0, 3, &mut rng);
                let l = CorrelationFunction::random(&sp, 0, 3, &mut rng);
                prop_assert!((&k + &l).kc_norm() <= k.kc_norm() + l.kc_norm() + 1e-15);
                prop_assert!(((&k * a).kc_norm() - a.abs() * k.kc_norm()).abs() <= 1e-12);
            }

            #[test]
            fn k_inverse_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
                let sp = space(8, 3);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f1 = QuasiObservable::random(&sp, 0, 3, &mut rng);
                let f2 = QuasiObservable::random(&sp, 0, 3, &mut rng);
                let combo = &(&f1 * a) + &(&f2 * b);
                let lhs = k_inverse_table(&combo);
                let rhs = &(&k_inverse_table(&f1) * a) + &(&k_inverse_table(&f2) * b);
                prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            }
        }
    }
}
