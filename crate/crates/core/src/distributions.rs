//! Categorical distributions over fixed value supports.
//!
//! A Monte Carlo estimate from `k` rollouts can only take the `k + 1` values
//! `0, 1/k, ..., 1`, so the natural support for both the ground-truth
//! Binomial law and the training posteriors is the equidistant grid with
//! `m = k + 1` locations.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on the total mass of a categorical distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Closed form used to place the support locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportKind {
    /// `z_i = (i-1)/(m-1)`, spanning `[0, 1]`.
    Equidistant,
    /// `z_i = 1 - cos(pi (i-1)/(m-1))`, spanning `[0, 2]` as printed.
    Cosine,
    /// The cosine grid halved so that it spans `[0, 1]`.
    CosineUnit,
    /// `z_i = -1 + 2(i-1)/(m-1)`, spanning `[-1, 1]`.
    SymmetricEquidistant,
}

impl SupportKind {
    pub fn name(self) -> &'static str {
        match self {
            SupportKind::Equidistant => "equidistant",
            SupportKind::Cosine => "cosine",
            SupportKind::CosineUnit => "cosine-unit",
            SupportKind::SymmetricEquidistant => "symmetric-equidistant",
        }
    }
}

impl std::str::FromStr for SupportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equidistant" => Ok(SupportKind::Equidistant),
            "cosine" => Ok(SupportKind::Cosine),
            "cosine-unit" => Ok(SupportKind::CosineUnit),
            "symmetric-equidistant" => Ok(SupportKind::SymmetricEquidistant),
            other => Err(Error::invalid(format!("unknown support kind `{other}`"))),
        }
    }
}

/// Ordered Dirac-delta locations of a categorical distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    kind: SupportKind,
    locations: Vec<f64>,
}

impl Support {
    pub fn kind(&self) -> SupportKind {
        self.kind
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.locations[0]
    }

    pub fn max(&self) -> f64 {
        self.locations[self.locations.len() - 1]
    }

    /// Checks the invariants of a support read from an untrusted source.
    pub fn validate(&self) -> Result<()> {
        if self.locations.len() < 2 {
            return Err(Error::invalid("support needs at least 2 locations"));
        }
        if self.locations.iter().any(|z| !z.is_finite()) {
            return Err(Error::invalid("support locations must be finite"));
        }
        if self.locations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("support locations must be strictly increasing"));
        }
        Ok(())
    }
}

/// Builds the `m`-location support of the given kind.
pub fn make_support(m: usize, kind: SupportKind) -> Result<Support> {
    if m < 2 {
        return Err(Error::invalid(format!("support size must be at least 2, got {m}")));
    }
    let last = (m - 1) as f64;
    let locations = (0..m)
        .map(|i| {
            let frac = i as f64 / last;
            match kind {
                SupportKind::Equidistant => frac,
                SupportKind::Cosine => 1.0 - (std::f64::consts::PI * frac).cos(),
                SupportKind::CosineUnit => 0.5 * (1.0 - (std::f64::consts::PI * frac).cos()),
                SupportKind::SymmetricEquidistant => -1.0 + 2.0 * i as f64 / last,
            }
        })
        .collect();
    Ok(Support { kind, locations })
}

/// A probability vector over a [`Support`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDistribution {
    support: Support,
    probs: Vec<f64>,
}

impl CategoricalDistribution {
    pub fn new(support: Support, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != support.len() {
            return Err(Error::invalid(format!(
                "probability vector has {} entries but support has {}",
                probs.len(),
                support.len()
            )));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(CategoricalDistribution { support, probs })
    }

    /// Point mass at location `index`.
    pub fn one_hot(support: Support, index: usize) -> Result<Self> {
        if index >= support.len() {
            return Err(Error::invalid(format!(
                "index {index} outside support of size {}",
                support.len()
            )));
        }
        let mut probs = vec![0.0; support.len()];
        probs[index] = 1.0;
        Ok(CategoricalDistribution { support, probs })
    }

    pub fn uniform(support: Support) -> Self {
        let m = support.len();
        CategoricalDistribution { support, probs: vec![1.0 / m as f64; m] }
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Index of the largest mass; ties go to the lowest index.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Mean of the distribution, `sum_i p_i z_i`.
pub fn expectation(dist: &CategoricalDistribution) -> f64 {
    dist.probs.iter().zip(dist.support.locations()).map(|(p, z)| p * z).sum()
}

/// `Bin(k, p)` laid out over the equidistant support of `k + 1` locations,
/// so that location `c/k` carries `P(C = c)`.
pub fn binomial_pmf(k: usize, p: f64) -> Result<CategoricalDistribution> {
    if k == 0 {
        return Err(Error::invalid("binomial needs k >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("success probability {p} outside [0, 1]")));
    }
    let support = make_support(k + 1, SupportKind::Equidistant)?;
    let q = 1.0 - p;
    let mut coef = 1.0_f64;
    let probs = (0..=k)
        .map(|c| {
            if c > 0 {
                coef = coef * (k - c + 1) as f64 / c as f64;
            }
            coef * p.powi(c as i32) * q.powi((k - c) as i32)
        })
        .collect();
    Ok(CategoricalDistribution { support, probs })
}

/// Shape of the posterior assigned to an observed count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorKind {
    /// All mass on the observed bin.
    OneHot,
    /// Truncated Gaussian with the Binomial variance `mu (1 - mu) / k`.
    GaussDynamic,
    /// Truncated Gaussian with a fixed standard deviation.
    GaussStatic,
}

/// A posterior family. `static_sigma` only matters for
/// [`PosteriorKind::GaussStatic`]; `None` selects `2 / (3k)`, which puts
/// three standard deviations on two bin widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSpec {
    pub kind: PosteriorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_sigma: Option<f64>,
}

impl PosteriorSpec {
    pub const ONE_HOT: PosteriorSpec = PosteriorSpec { kind: PosteriorKind::OneHot, static_sigma: None };
    pub const GAUSS_DYNAMIC: PosteriorSpec =
        PosteriorSpec { kind: PosteriorKind::GaussDynamic, static_sigma: None };
    pub const GAUSS_STATIC: PosteriorSpec =
        PosteriorSpec { kind: PosteriorKind::GaussStatic, static_sigma: None };

    pub fn gauss_static(sigma: f64) -> Result<Self> {
        let spec = PosteriorSpec { kind: PosteriorKind::GaussStatic, static_sigma: Some(sigma) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sigma) = self.static_sigma {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::invalid(format!("static sigma must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    /// Label used in reports: `one-hot`, `gauss-dynamic`, `gauss-static`
    /// or `gauss-static:<sigma>` for an explicit width.
    pub fn name(&self) -> String {
        match (self.kind, self.static_sigma) {
            (PosteriorKind::OneHot, _) => "one-hot".into(),
            (PosteriorKind::GaussDynamic, _) => "gauss-dynamic".into(),
            (PosteriorKind::GaussStatic, None) => "gauss-static".into(),
            (PosteriorKind::GaussStatic, Some(s)) => format!("gauss-static:{s}"),
        }
    }
}

impl std::str::FromStr for PosteriorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-hot" => Ok(PosteriorSpec::ONE_HOT),
            "gauss-dynamic" => Ok(PosteriorSpec::GAUSS_DYNAMIC),
            "gauss-static" => Ok(PosteriorSpec::GAUSS_STATIC),
            other => match other.strip_prefix("gauss-static:") {
                Some(sigma) => {
                    let sigma: f64 = sigma
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad static sigma in `{other}`")))?;
                    PosteriorSpec::gauss_static(sigma)
                }
                None => Err(Error::invalid(format!("unknown posterior `{other}`"))),
            },
        }
    }
}

/// Posterior over the equidistant `k + 1` support for `c` successes out of
/// `k` rollouts.
///
/// Gaussian posteriors assign each bin the normal mass between its edges,
/// where edges are midpoints of adjacent locations. The first and last bins
/// extend to infinity, so the tails beyond the support are absorbed by the
/// edge bins and the mean stays close to `c / k`. A zero standard deviation
/// (dynamic width at `c = 0` or `c = k`) yields the point mass.
pub fn make_posterior(spec: &PosteriorSpec, c: usize, k: usize) -> Result<CategoricalDistribution> {
    if k == 0 {
        return Err(Error::invalid("posterior needs k >= 1"));
    }
    if c > k {
        return Err(Error::invalid(format!("count {c} exceeds rollout count {k}")));
    }
    spec.validate()?;
    let support = make_support(k + 1, SupportKind::Equidistant)?;
    let mu = c as f64 / k as f64;
    let sigma = match spec.kind {
        PosteriorKind::OneHot => return CategoricalDistribution::one_hot(support, c),
        PosteriorKind::GaussDynamic => (mu * (1.0 - mu) / k as f64).sqrt(),
        PosteriorKind::GaussStatic => spec.static_sigma.unwrap_or(2.0 / (3.0 * k as f64)),
    };
    if sigma == 0.0 {
        return CategoricalDistribution::one_hot(support, c);
    }
    let probs = truncated_gaussian_bins(support.locations(), mu, sigma);
    Ok(CategoricalDistribution { support, probs })
}

fn truncated_gaussian_bins(locations: &[f64], mu: f64, sigma: f64) -> Vec<f64> {
    let m = locations.len();
    let mut masses: Vec<f64> = (0..m)
        .map(|j| {
            let lo = if j == 0 { f64::NEG_INFINITY } else { 0.5 * (locations[j - 1] + locations[j]) };
            let hi = if j + 1 == m { f64::INFINITY } else { 0.5 * (locations[j] + locations[j + 1]) };
            normal_mass((lo - mu) / sigma, (hi - mu) / sigma)
        })
        .collect();
    // The masses already sum to one; this only removes rounding drift.
    let total: f64 = masses.iter().sum();
    for p in &mut masses {
        *p /= total;
    }
    masses
}

/// Standard normal mass on `[a, b]`, taken from whichever tail keeps the
/// subtraction well conditioned.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else if b <= 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_sf(b)
    }
}

/// Standard normal CDF via the fdlibm `erfc` rational approximations, whose
/// absolute error is far below `1e-9` on the whole real line.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(x)`, accurate in relative terms for large `x`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn valid(d: &CategoricalDistribution) -> bool {
        d.probs().iter().all(|&p| p >= 0.0) && (d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }

    #[test]
    fn support_closed_forms() {
        let s = make_support(9, SupportKind::Equidistant).unwrap();
        let expected: Vec<f64> = (0..9).map(|i| i as f64 * 0.125).collect();
        assert_eq!(s.locations(), expected.as_slice());

        let s = make_support(3, SupportKind::SymmetricEquidistant).unwrap();
        assert_eq!(s.locations(), &[-1.0, 0.0, 1.0]);

        let s = make_support(3, SupportKind::Cosine).unwrap();
        assert_close(s.locations()[0], 0.0, 1e-15);
        assert_close(s.locations()[1], 1.0, 1e-15);
        assert_close(s.locations()[2], 2.0, 1e-15);

        let s = make_support(3, SupportKind::CosineUnit).unwrap();
        assert_close(s.max(), 1.0, 1e-15);
    }

    #[test]
    fn support_rejects_tiny_sizes() {
        for m in [0, 1] {
            assert!(matches!(make_support(m, SupportKind::Equidistant), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn binomial_examples() {
        let d = binomial_pmf(2, 0.5).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.5, 0.25]);

        let d = binomial_pmf(8, 0.0).unwrap();
        assert_eq!(d.probs()[0], 1.0);
        assert!(d.probs()[1..].iter().all(|&p| p == 0.0));

        let d = binomial_pmf(8, 0.5).unwrap();
        assert_close(d.probs()[4], 70.0 / 256.0, 1e-15);
        assert_close(expectation(&binomial_pmf(8, 0.3).unwrap()), 0.3, 1e-12);

        assert!(binomial_pmf(4, 1.5).is_err());
        assert!(binomial_pmf(4, -0.1).is_err());
    }

    #[test]
    fn binomial_mean_on_grid() {
        for k in [1, 2, 5, 8, 16, 64] {
            for i in 0..=10 {
                let p = i as f64 / 10.0;
                let d = binomial_pmf(k, p).unwrap();
                assert!(valid(&d));
                assert_close(expectation(&d), p, 1e-12);
            }
        }
    }

    #[test]
    fn posterior_examples() {
        let d = make_posterior(&PosteriorSpec::ONE_HOT, 3, 8).unwrap();
        assert_eq!(d.mode(), 3);
        assert_eq!(d.probs()[3], 1.0);
        assert_eq!(d.support().locations()[3], 0.375);

        let d = make_posterior(&PosteriorSpec::GAUSS_DYNAMIC, 0, 8).unwrap();
        assert_eq!(d.probs()[0], 1.0);
        let d = make_posterior(&PosteriorSpec::GAUSS_DYNAMIC, 8, 8).unwrap();
        assert_eq!(d.probs()[8], 1.0);

        assert!(make_posterior(&PosteriorSpec::ONE_HOT, 9, 8).is_err());
        assert!(PosteriorSpec::gauss_static(0.0).is_err());
    }

    /// Midpoint-rule integration of the normal density over each bin, an
    /// oracle independent of the erfc path. Outer bins run out to 12 sigma.
    fn quadrature_bins(k: usize, mu: f64, sigma: f64) -> Vec<f64> {
        let m = k + 1;
        let width = 1.0 / k as f64;
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let density = |x: f64| norm * (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp();
        (0..m)
            .map(|j| {
                let lo = if j == 0 { mu - 12.0 * sigma } else { (j as f64 - 0.5) * width };
                let hi = if j + 1 == m { mu + 12.0 * sigma } else { (j as f64 + 0.5) * width };
                let n = 20_000;
                let h = (hi - lo) / n as f64;
                (0..n).map(|i| density(lo + (i as f64 + 0.5) * h) * h).sum()
            })
            .collect()
    }

    #[test]
    fn gauss_dynamic_matches_quadrature() {
        let d = make_posterior(&PosteriorSpec::GAUSS_DYNAMIC, 4, 8).unwrap();
        let sigma = (0.25f64 / 8.0).sqrt();
        assert_close(sigma, 0.176_776_695, 1e-9);
        let oracle = quadrature_bins(8, 0.5, sigma);
        for (a, b) in d.probs().iter().zip(&oracle) {
            assert_close(*a, *b, 1e-9);
        }
        assert_eq!(d.mode(), 4);
        assert_close(expectation(&d), 0.5, 1e-12);

        let d = make_posterior(&PosteriorSpec::GAUSS_STATIC, 2, 8).unwrap();
        let oracle = quadrature_bins(8, 0.25, 2.0 / 24.0);
        for (a, b) in d.probs().iter().zip(&oracle) {
            assert_close(*a, *b, 1e-9);
        }
    }

    #[test]
    fn gauss_dynamic_symmetric_at_half() {
        for k in [2, 4, 8, 16, 32] {
            let d = make_posterior(&PosteriorSpec::GAUSS_DYNAMIC, k / 2, k).unwrap();
            let p = d.probs();
            for j in 0..p.len() {
                assert_close(p[j], p[p.len() - 1 - j], 1e-12);
            }
            assert_close(expectation(&d), 0.5, 1e-12);
        }
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!(std_normal_cdf(8.0) >= 1.0 - 1e-9);
        // Reference value of Phi(1) to 15 digits.
        assert_close(std_normal_cdf(1.0), 0.841_344_746_068_543, 1e-12);
        assert_close(std_normal_cdf(-1.96), 0.024_997_895_148_220_4, 1e-12);
    }

    #[test]
    fn normal_cdf_against_statrs() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        let mut x = -12.0;
        while x <= 12.0 {
            assert_close(std_normal_cdf(x), n.cdf(x), 1e-9);
            x += 0.01;
        }
    }

    proptest! {
        #[test]
        fn normal_cdf_monotone(a in -40.0f64..40.0, b in -40.0f64..40.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(std_normal_cdf(lo) <= std_normal_cdf(hi));
        }

        #[test]
        fn posteriors_are_distributions(k in 1usize..=32, c_frac in 0.0f64..=1.0, kind in 0u8..3) {
            let c = (c_frac * k as f64).round() as usize;
            let spec = [PosteriorSpec::ONE_HOT, PosteriorSpec::GAUSS_DYNAMIC, PosteriorSpec::GAUSS_STATIC][kind as usize];
            let d = make_posterior(&spec, c, k).unwrap();
            prop_assert!(valid(&d));
            prop_assert_eq!(d.probs().len(), k + 1);
        }

        #[test]
        fn gauss_dynamic_interior_counts_have_full_support(k in 2usize..=32, c_frac in 0.0f64..1.0) {
            let c = 1 + (c_frac * (k - 1) as f64) as usize;
            prop_assume!(c < k);
            let d = make_posterior(&PosteriorSpec::GAUSS_DYNAMIC, c, k).unwrap();
            prop_assert!(d.probs().iter().all(|&p| p > 0.0));
        }

        #[test]
        fn supports_strictly_increasing(m in 2usize..200, kind in 0u8..4) {
            let kind = [SupportKind::Equidistant, SupportKind::Cosine, SupportKind::CosineUnit,
                        SupportKind::SymmetricEquidistant][kind as usize];
            let s = make_support(m, kind).unwrap();
            prop_assert!(s.validate().is_ok());
        }

        #[test]
        fn binomial_is_distribution(k in 1usize..=64, p in 0.0f64..=1.0) {
            let d = binomial_pmf(k, p).unwrap();
            prop_assert!(valid(&d));
            prop_assert!((expectation(&d) - p).abs() <= 1e-12);
        }
    }
}
