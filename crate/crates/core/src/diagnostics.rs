//! Post-run efficiency metrics.
//!
//! ESS uses Geyer's initial monotone sequence estimator on each chain
//! separately; per-chain values are summed. Autocorrelations are computed via
//! FFT with the biased (`1/N`) normalisation.

use rand::Rng;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::RunRecord;

/// Minimum series length accepted by [`ess_geyer`].
pub const MIN_ESS_LEN: usize = 10;

/// Sample autocorrelations at lags `0..=max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    pub values: Vec<f64>,
    /// Set when the series has zero variance; `values` is then `[1, 0, 0, ...]`.
    pub degenerate: bool,
}

/// `min(N-1, 10·√N)`.
pub fn default_max_lag(n: usize) -> usize {
    let by_root = (10.0 * (n as f64).sqrt()) as usize;
    by_root.min(n.saturating_sub(1))
}

/// Biased sample autocorrelations of `series` at lags `0..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Autocorrelation> {
    let n = series.len();
    if max_lag < 1 || n <= max_lag {
        return Err(Error::InvalidParameter(format!(
            "autocorrelation needs 1 <= max_lag < len (max_lag {max_lag}, len {n})"
        )));
    }
    let acov = autocovariance(series);
    if !(acov[0] > 0.0) {
        let mut values = vec![0.0; max_lag + 1];
        values[0] = 1.0;
        return Ok(Autocorrelation {
            values,
            degenerate: true,
        });
    }
    Ok(Autocorrelation {
        values: acov[..=max_lag].iter().map(|c| c / acov[0]).collect(),
        degenerate: false,
    })
}

/// Biased autocovariances at every lag, via zero-padded FFT.
fn autocovariance(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    buf[..n].iter().map(|c| c.re * scale).collect()
}

/// Effective sample size by Geyer's initial monotone sequence estimator.
///
/// Returns `N` (with a warning) for a zero-variance series. The integrated
/// autocorrelation time is floored at `1/log10(N)`.
pub fn ess_geyer(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_ESS_LEN {
        return Err(Error::SeriesTooShort {
            needed: MIN_ESS_LEN,
            got: n,
        });
    }
    let acov = autocovariance(series);
    if !(acov[0] > 0.0) {
        log::warn!("degenerate series of length {n}; reporting ESS = N");
        return Ok(n as f64);
    }
    let rho = |k: usize| acov[k] / acov[0];
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / (n as f64).log10());
    Ok(n as f64 / tau)
}

/// Mean squared successive difference, pooled over chains.
pub fn esjd(chains: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for c in chains {
        for w in c.windows(2) {
            total += (w[1] - w[0]).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::SeriesTooShort { needed: 2, got: 1 });
    }
    Ok(total / count as f64)
}

/// Efficiency summary of a run's sampling phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    /// Target coordinates the ESS values refer to.
    pub coords: Vec<usize>,
    /// ESS of each squared centred coordinate, summed over chains.
    pub ess: Vec<f64>,
    pub min_ess: f64,
    /// Coordinate attaining `min_ess`.
    pub min_coord: usize,
    pub ess_per_grad: f64,
    pub ess_per_iter: f64,
    /// Chain-averaged autocorrelation of the worst squared coordinate.
    pub autocorr_curve: Vec<f64>,
    /// Draws per chain.
    pub n_draws: usize,
    pub chains: usize,
    pub gradient_evals: u64,
}

const CURVE_LAGS: usize = 50;

/// ESS of `(x_j - mean_j)²` for every stored coordinate.
///
/// The mean is pooled over all draws; ESS is computed per chain, summed, and
/// capped at twice the number of draws.
pub fn min_ess_squared_coords(record: &RunRecord) -> Result<EssReport> {
    let draws = &record.draws;
    let (k, n) = (draws.chains, draws.iterations);
    if n < MIN_ESS_LEN {
        return Err(Error::SeriesTooShort {
            needed: MIN_ESS_LEN,
            got: n,
        });
    }
    let cap = 2.0 * (k * n) as f64;
    let squared = |slot: usize| -> Vec<Vec<f64>> {
        let m = (0..k)
            .flat_map(|c| (0..n).map(move |t| (c, t)))
            .map(|(c, t)| draws.get(c, t, slot))
            .sum::<f64>()
            / (k * n) as f64;
        (0..k)
            .map(|c| {
                draws
                    .series(c, slot)
                    .iter()
                    .map(|x| (x - m).powi(2))
                    .collect()
            })
            .collect()
    };
    let ess = (0..draws.coords.len())
        .into_par_iter()
        .map(|slot| {
            let total = squared(slot)
                .iter()
                .map(|s| ess_geyer(s))
                .sum::<Result<f64>>()?;
            Ok(total.min(cap))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (min_slot, min_ess) = ess
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });

    let lags = CURVE_LAGS.min(n - 1);
    let mut curve = vec![0.0; lags + 1];
    for s in squared(min_slot) {
        for (c, r) in curve.iter_mut().zip(autocorrelation(&s, lags)?.values) {
            *c += r / k as f64;
        }
    }
    let evals = record.gradient_evals_sampling;
    Ok(EssReport {
        coords: draws.coords.clone(),
        min_coord: draws.coords[min_slot],
        ess_per_grad: min_ess / evals as f64,
        ess_per_iter: min_ess / (k * n) as f64,
        ess,
        min_ess,
        autocorr_curve: curve,
        n_draws: n,
        chains: k,
        gradient_evals: evals,
    })
}

/// Empirical percentile `p ∈ [0, 100]` with linear interpolation between order statistics.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "percentile {p} of {} values",
            values.len()
        )));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// Bootstrap standard error of `statistic` over `resamples` resamples with replacement.
pub fn bootstrap_sem<R, F>(
    values: &[f64],
    resamples: usize,
    rng: &mut R,
    statistic: F,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> Result<f64>,
{
    if values.len() < 2 || resamples < 2 {
        return Err(Error::InvalidParameter(
            "bootstrap needs at least two values and two resamples".into(),
        ));
    }
    let mut buf = vec![0.0; values.len()];
    let stats = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[rng.random_range(0..values.len())];
            }
            statistic(&buf)
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = stats.iter().sum::<f64>() / resamples as f64;
    let var = stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{run, RunConfig};
    use crate::target::{make_target, TargetSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = (1.0 - phi * phi).sqrt();
        let mut x: f64 = rng.sample(StandardNormal);
        (0..n)
            .map(|_| {
                x = phi * x + sd * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    fn naive_acf(x: &[f64], lag: usize) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let c = |k: usize| {
            (0..x.len() - k)
                .map(|i| (x[i] - m) * (x[i + k] - m))
                .sum::<f64>()
                / n
        };
        c(lag) / c(0)
    }

    #[test]
    fn fft_matches_direct_sum() {
        let x = ar1(0.6, 257, 1);
        let a = autocorrelation(&x, 20).unwrap();
        assert_eq!(a.values[0], 1.0);
        for k in 0..=20 {
            assert!((a.values[k] - naive_acf(&x, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_series_is_degenerate() {
        let a = autocorrelation(&[3.0; 20], 5).unwrap();
        assert!(a.degenerate);
        assert_eq!(a.values, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(ess_geyer(&[3.0; 20]).unwrap(), 20.0);
    }

    #[test]
    fn bad_lags_and_short_series() {
        assert!(autocorrelation(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(autocorrelation(&[1.0, 2.0, 3.0], 0).is_err());
        assert!(matches!(
            ess_geyer(&[1.0; 9]),
            Err(Error::SeriesTooShort { needed: 10, got: 9 })
        ));
    }

    #[test]
    fn white_noise_lag_one() {
        let n = 100_000;
        let x = ar1(0.0, n, 2);
        let a = autocorrelation(&x, 1).unwrap();
        assert!(a.values[1].abs() < 3.0 / (n as f64).sqrt());
        let r = ess_geyer(&x).unwrap() / n as f64;
        assert!((0.8..=1.2).contains(&r), "{r}");
    }

    #[test]
    fn ar1_lags() {
        let n = 100_000;
        let x = ar1(0.9, n, 3);
        let a = autocorrelation(&x, 5).unwrap();
        for k in 1..=5 {
            let r = 0.9f64.powi(k as i32);
            // Bartlett variance for AR(1): ((1+φ²)(1-φ^{2k})/(1-φ²) - 2kφ^{2k}) / N
            let p2 = 0.81f64;
            let var = ((1.0 + p2) * (1.0 - p2.powi(k as i32)) / (1.0 - p2)
                - 2.0 * k as f64 * p2.powi(k as i32))
                / n as f64;
            assert!((a.values[k] - r).abs() < 3.0 * var.sqrt(), "lag {k}");
        }
    }

    #[test]
    fn ar1_ess() {
        let n = 100_000;
        for (phi, tol) in [(0.5, 0.10), (-0.5, 0.15)] {
            let want = (1.0 - phi) / (1.0 + phi);
            let got = ess_geyer(&ar1(phi, n, 4)).unwrap() / n as f64;
            assert!((got / want - 1.0).abs() < tol, "{phi}: {got}");
        }
    }

    proptest! {
        #[test]
        fn ess_is_affine_invariant(seed in 0u64..1000, a in -50.0f64..50.0, b in -100.0f64..100.0, k in -4i32..4) {
            prop_assume!(a.abs() > 1e-3);
            let x = ar1(0.3, 200, seed);
            let base = ess_geyer(&x).unwrap();
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((ess_geyer(&y).unwrap() / base - 1.0).abs() < 1e-9);
            let s = 2f64.powi(k);
            let z: Vec<f64> = x.iter().map(|v| s * v).collect();
            prop_assert_eq!(ess_geyer(&z).unwrap(), base);
        }

        #[test]
        fn lag_zero_is_one(seed in 0u64..1000, n in 12usize..300) {
            let x = ar1(0.7, n, seed);
            prop_assert_eq!(autocorrelation(&x, n / 2).unwrap().values[0], 1.0);
        }
    }

    #[test]
    fn esjd_values() {
        assert_eq!(esjd(&[vec![2.0; 10], vec![-1.0; 5]]).unwrap(), 0.0);
        assert_eq!(esjd(&[vec![0.0, 1.0, 3.0]]).unwrap(), 2.5);
        assert!(esjd(&[vec![1.0]]).is_err());

        let n = 100_000;
        let x = ar1(0.0, n, 5);
        let d: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        // successive squared differences overlap, so inflate the naive SE
        let se = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / d.len() as f64 / d.len() as f64)
            .sqrt();
        assert!((esjd(&[x]).unwrap() - 2.0).abs() < 3.0 * 1.5 * se);
    }

    #[test]
    fn esjd_tracks_lag_one_autocorrelation() {
        let n = 100_000;
        for phi in [0.2, 0.6, 0.9] {
            let x = ar1(phi, n, 6);
            let m = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
            let lhs = esjd(std::slice::from_ref(&x)).unwrap() / (2.0 * var);
            let rhs = 1.0 - autocorrelation(&x, 1).unwrap().values[1];
            assert!((lhs - rhs).abs() < 1e-3, "{phi}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn percentile_interpolates() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 5.0);
        assert_eq!(percentile(&v, 50.0).unwrap(), 3.0);
        assert!((percentile(&v, 10.0).unwrap() - 1.4).abs() < 1e-15);
        assert!((percentile(&[1.0, 2.0, 3.0], 10.0).unwrap() - 1.2).abs() < 1e-15);
        assert!(percentile(&[], 10.0).is_err());
    }

    #[test]
    fn bootstrap_sem_of_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let sem = bootstrap_sem(&v, 2000, &mut rng, |s| {
            Ok(s.iter().sum::<f64>() / s.len() as f64)
        })
        .unwrap();
        let want = 1.0 / 200f64.sqrt();
        assert!((sem / want - 1.0).abs() < 0.2, "{sem}");
    }

    fn frozen(spec: TargetSpec, chains: usize, step: f64, length: f64) -> RunRecord {
        let t = make_target(&spec).unwrap();
        let cfg = RunConfig {
            chains,
            n_adapt: 0,
            n_clip: 0,
            n_postadapt_warmup: 200,
            n_sample: 1000,
            initial_step: Some(step),
            initial_length: Some(length),
            damping: Some(1.0),
            seed: 11,
            ..RunConfig::default()
        };
        run(&t, &cfg).unwrap()
    }

    #[test]
    fn report_definitions() {
        let r = frozen(TargetSpec::StandardGaussian { dim: 4 }, 4, 0.4, 1.6);
        let rep = min_ess_squared_coords(&r).unwrap();
        assert_eq!(rep.ess_per_iter, rep.min_ess / (4.0 * 1000.0));
        assert_eq!(
            rep.ess_per_grad,
            rep.min_ess / r.gradient_evals_sampling as f64
        );
        assert_eq!(
            rep.ess.iter().copied().fold(f64::INFINITY, f64::min),
            rep.min_ess
        );
        assert!(rep.ess.iter().all(|e| *e > 0.0 && *e <= 8000.0));
        let max = rep.ess.iter().copied().fold(0.0, f64::max);
        assert!(max / rep.min_ess < 2.0, "{:?}", rep.ess);
        assert_eq!(rep.autocorr_curve.len(), 51);
        assert_eq!(rep.autocorr_curve[0], 1.0);
    }

    #[test]
    fn slowest_direction_has_smallest_ess() {
        let t = make_target(&TargetSpec::DiagGaussian {
            variances: vec![1.0, 4.0, 9.0, 16.0],
        })
        .unwrap();
        let cfg = RunConfig {
            chains: 4,
            n_adapt: 0,
            n_clip: 0,
            n_postadapt_warmup: 500,
            n_sample: 10_000,
            initial_step: Some(0.5),
            initial_length: Some(0.5),
            damping: Some(1.0),
            seed: 12,
            ..RunConfig::default()
        };
        let rep = min_ess_squared_coords(&run(&t, &cfg).unwrap()).unwrap();
        assert_eq!(rep.min_coord, 3, "{:?}", rep.ess);
        assert!(rep.ess[0] > 4.0 * rep.ess[3], "{:?}", rep.ess);
    }

    #[test]
    fn permutation_equivariance() {
        let mut r = frozen(TargetSpec::StandardGaussian { dim: 3 }, 2, 0.5, 1.0);
        let base = min_ess_squared_coords(&r).unwrap();
        let (k, n) = (r.draws.chains, r.draws.iterations);
        let perm = [2usize, 0, 1];
        let old = r.draws.clone();
        for c in 0..k {
            for t in 0..n {
                for (slot, &p) in perm.iter().enumerate() {
                    r.draws.values[(c * n + t) * 3 + slot] = old.get(c, t, p);
                }
            }
        }
        r.draws.coords = perm.to_vec();
        let permuted = min_ess_squared_coords(&r).unwrap();
        for (slot, &p) in perm.iter().enumerate() {
            assert_eq!(permuted.ess[slot], base.ess[p]);
        }
        assert_eq!(permuted.min_ess, base.min_ess);
        assert_eq!(permuted.min_coord, base.min_coord);
    }
}
