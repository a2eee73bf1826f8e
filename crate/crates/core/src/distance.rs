//! Distances between categorical distributions and the statistics-based
//! distance between a posterior family and the Binomial ground truth.
//!
//! For a posterior family `post` and ground truth `q = Bin(k, p)`, the
//! statistics-based distance is `E_{c ~ q}[ d(post(. | c), q) ]`. It is
//! evaluated exactly by enumerating the `k + 1` outcomes.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{binomial_pmf, make_posterior, CategoricalDistribution, PosteriorSpec};
use crate::fmt::sig_digits;
use crate::{Error, Result};

/// Ground metric plugged into the statistics-based distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Wasserstein,
    Kl,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wasserstein" => Ok(Metric::Wasserstein),
            "kl" => Ok(Metric::Kl),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

fn check_shared_support(a: &CategoricalDistribution, b: &CategoricalDistribution) -> Result<()> {
    if a.support().locations() != b.support().locations() {
        return Err(Error::invalid("distributions do not share a support"));
    }
    Ok(())
}

/// 1-Wasserstein distance on a shared one-dimensional support: the area
/// between the two CDFs, `sum_j |F_a(j) - F_b(j)| (z_{j+1} - z_j)`.
///
/// On the equidistant `k + 1` grid the ground cost between bins `i` and `j`
/// is `|i - j| / k`.
pub fn wasserstein1(a: &CategoricalDistribution, b: &CategoricalDistribution) -> Result<f64> {
    check_shared_support(a, b)?;
    let z = a.support().locations();
    let (mut cum_a, mut cum_b, mut total) = (0.0, 0.0, 0.0);
    for j in 0..z.len() - 1 {
        cum_a += a.probs()[j];
        cum_b += b.probs()[j];
        total += (cum_a - cum_b).abs() * (z[j + 1] - z[j]);
    }
    Ok(total)
}

/// `KL(a || b)` in nats with `0 log(0/x) = 0`.
///
/// Returns `f64::INFINITY` when `a` puts mass where `b` has none; a support
/// mismatch is an error.
pub fn kl_divergence(a: &CategoricalDistribution, b: &CategoricalDistribution) -> Result<f64> {
    check_shared_support(a, b)?;
    let mut total = 0.0;
    for (&pa, &pb) in a.probs().iter().zip(b.probs()) {
        if pa == 0.0 {
            continue;
        }
        if pb == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pa * (pa / pb).ln();
    }
    Ok(total.max(0.0))
}

pub fn metric_distance(metric: Metric, a: &CategoricalDistribution, b: &CategoricalDistribution) -> Result<f64> {
    match metric {
        Metric::Wasserstein => wasserstein1(a, b),
        Metric::Kl => kl_divergence(a, b),
    }
}

/// Exact statistics-based distance between the posterior family `spec` and
/// `Bin(k, p)`. KL violations of absolute continuity propagate as infinity.
pub fn statistics_distance(spec: &PosteriorSpec, k: usize, p: f64, metric: Metric) -> Result<f64> {
    let truth = binomial_pmf(k, p)?;
    let mut total = 0.0;
    for (c, &weight) in truth.probs().iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let posterior = make_posterior(spec, c, k)?;
        total += weight * metric_distance(metric, &posterior, &truth)?;
    }
    Ok(total)
}

/// One point of a distance sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub spec: String,
    pub distance: f64,
}

/// Grid `0, step, 2 step, ...` below 1, closed with `p = 1`.
pub fn sweep_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::invalid(format!("grid step must lie in (0, 1), got {step}")));
    }
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let p = i as f64 * step;
        if p >= 1.0 - 1e-9 {
            break;
        }
        grid.push(p);
        i += 1;
    }
    grid.push(1.0);
    Ok(grid)
}

/// Statistics distance of every spec at every grid point, ordered by spec
/// then ascending `p`.
pub fn distance_sweep(specs: &[PosteriorSpec], k: usize, step: f64, metric: Metric) -> Result<Vec<SweepRow>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let grid = sweep_grid(step)?;
    let jobs: Vec<(&PosteriorSpec, f64)> = specs.iter().flat_map(|s| grid.iter().map(move |&p| (s, p))).collect();
    jobs.into_par_iter()
        .map(|(spec, p)| {
            Ok(SweepRow { p, spec: spec.name(), distance: statistics_distance(spec, k, p, metric)? })
        })
        .collect()
}

/// Writes `spec,p,distance` rows: `p` with 6 decimals, the distance with 9
/// significant digits.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "spec,p,distance")?;
    for row in rows {
        writeln!(out, "{},{:.6},{}", row.spec, row.p, sig_digits(row.distance, 9))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{make_support, SupportKind};
    use proptest::prelude::*;

    fn dist(probs: &[f64]) -> CategoricalDistribution {
        let s = make_support(probs.len(), SupportKind::Equidistant).unwrap();
        CategoricalDistribution::new(s, probs.to_vec()).unwrap()
    }

    #[test]
    fn wasserstein_examples() {
        let a = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);

        let s = make_support(9, SupportKind::Equidistant).unwrap();
        let lo = CategoricalDistribution::one_hot(s.clone(), 0).unwrap();
        let hi = CategoricalDistribution::one_hot(s, 8).unwrap();
        assert!((wasserstein1(&lo, &hi).unwrap() - 1.0).abs() < 1e-15);

        let w = wasserstein1(&dist(&[0.5, 0.0, 0.5]), &dist(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(w, 0.5);
    }

    #[test]
    fn mismatched_supports_rejected() {
        let a = dist(&[0.5, 0.5]);
        let b = dist(&[0.2, 0.3, 0.5]);
        assert!(matches!(wasserstein1(&a, &b), Err(Error::InvalidArgument(_))));
        let sym = make_support(2, SupportKind::SymmetricEquidistant).unwrap();
        let c = CategoricalDistribution::new(sym, vec![0.5, 0.5]).unwrap();
        assert!(kl_divergence(&a, &c).is_err());
    }

    #[test]
    fn kl_examples() {
        let a = dist(&[0.3, 0.7]);
        assert_eq!(kl_divergence(&a, &a).unwrap(), 0.0);
        let kl = kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.5, 0.5])).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn statistics_distance_examples() {
        let d = statistics_distance(&PosteriorSpec::ONE_HOT, 2, 0.5, Metric::Wasserstein).unwrap();
        assert!((d - 0.375).abs() < 1e-15);
        assert_eq!(statistics_distance(&PosteriorSpec::ONE_HOT, 8, 0.0, Metric::Wasserstein).unwrap(), 0.0);
        assert_eq!(statistics_distance(&PosteriorSpec::GAUSS_DYNAMIC, 8, 0.0, Metric::Wasserstein).unwrap(), 0.0);
        // KL(one-hot at c || q) = -ln q_c, so the expectation is the entropy of q.
        let q = binomial_pmf(8, 0.3).unwrap();
        let entropy: f64 = -q.probs().iter().map(|p| p * p.ln()).sum::<f64>();
        let kl = statistics_distance(&PosteriorSpec::ONE_HOT, 8, 0.3, Metric::Kl).unwrap();
        assert!((kl - entropy).abs() < 1e-12);
        // A fixed-width Gaussian spills mass where the point-mass truth has none.
        assert_eq!(statistics_distance(&PosteriorSpec::GAUSS_STATIC, 8, 0.0, Metric::Kl).unwrap(), f64::INFINITY);
    }

    #[test]
    fn sweep_shapes() {
        let rows = distance_sweep(&[PosteriorSpec::ONE_HOT], 8, 0.5, Metric::Wasserstein).unwrap();
        assert_eq!(rows.iter().map(|r| r.p).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        assert_eq!(rows[0].distance, 0.0);
        assert!(rows[1].distance > 0.0);
        assert!(rows[2].distance.abs() < 1e-15);

        let rows = distance_sweep(&[PosteriorSpec::ONE_HOT, PosteriorSpec::GAUSS_DYNAMIC], 8, 0.25, Metric::Wasserstein)
            .unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows[..5].iter().all(|r| r.spec == "one-hot"));
        assert!(rows[2].distance > rows[7].distance);

        assert_eq!(sweep_grid(0.05).unwrap().len(), 21);
        assert_eq!(sweep_grid(0.3).unwrap(), vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert!(sweep_grid(1.0).is_err());
    }

    #[test]
    fn sweep_csv_format() {
        let rows = vec![SweepRow { p: 0.5, spec: "one-hot".into(), distance: 0.375 }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "spec,p,distance\none-hot,0.500000,0.375\n");
    }

    #[test]
    fn reflection_symmetry() {
        for spec in [PosteriorSpec::ONE_HOT, PosteriorSpec::GAUSS_DYNAMIC] {
            for i in 0..=20 {
                let p = i as f64 / 20.0;
                let a = statistics_distance(&spec, 8, p, Metric::Wasserstein).unwrap();
                let b = statistics_distance(&spec, 8, 1.0 - p, Metric::Wasserstein).unwrap();
                assert!((a - b).abs() < 1e-12, "{p}: {a} vs {b}");
            }
        }
    }

    fn arb_dist(m: usize) -> impl Strategy<Value = CategoricalDistribution> {
        prop::collection::vec(0.0f64..1.0, m).prop_filter_map("zero mass", move |w| {
            let total: f64 = w.iter().sum();
            (total > 1e-6).then(|| dist(&w.iter().map(|x| x / total).collect::<Vec<_>>()))
        })
    }

    proptest! {
        #[test]
        fn wasserstein_is_a_metric(a in arb_dist(9), b in arb_dist(9), c in arb_dist(9)) {
            let ab = wasserstein1(&a, &b).unwrap();
            let ba = wasserstein1(&b, &a).unwrap();
            let ac = wasserstein1(&a, &c).unwrap();
            let cb = wasserstein1(&c, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(wasserstein1(&a, &a).unwrap() <= 1e-12);
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn kl_nonnegative(a in arb_dist(5), b in arb_dist(5)) {
            prop_assert!(kl_divergence(&a, &b).unwrap() >= 0.0);
        }
    }
}
