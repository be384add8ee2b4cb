use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hrv::features::{HrvFeatures, N_FEATURES};

pub const MIN_BASELINE_WINDOWS: usize = 3;
pub const DEFAULT_BASELINE_S: f64 = 300.0;

/// Per-user min/max of every feature over the resting baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
    pub baseline_duration_s: f64,
}

pub fn fit_baseline(
    windows: &[HrvFeatures],
    baseline_duration_s: f64,
) -> Result<NormalizationParams> {
    if windows.len() < MIN_BASELINE_WINDOWS {
        return Err(Error::InsufficientData(format!(
            "baseline has {} windows, need {MIN_BASELINE_WINDOWS}",
            windows.len()
        )));
    }
    let mut min = [f64::INFINITY; N_FEATURES];
    let mut max = [f64::NEG_INFINITY; N_FEATURES];
    for w in windows {
        for (i, v) in w.to_vector().into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    Ok(NormalizationParams {
        min,
        max,
        baseline_duration_s,
    })
}

/// MinMax scaling against the baseline, unclamped. A feature with an empty
/// baseline range maps to 0.5.
pub fn normalize(f: &HrvFeatures, p: &NormalizationParams) -> [f64; N_FEATURES] {
    let mut out = f.to_vector();
    for (i, x) in out.iter_mut().enumerate() {
        let range = p.max[i] - p.min[i];
        *x = if range > 0.0 {
            (*x - p.min[i]) / range
        } else {
            0.5
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(sdnn: f64) -> HrvFeatures {
        let mut v = [1.0; N_FEATURES];
        v[2] = sdnn;
        from_vec(v)
    }

    fn from_vec(v: [f64; N_FEATURES]) -> HrvFeatures {
        HrvFeatures {
            mean_rr: v[0],
            median_rr: v[1],
            sdnn: v[2],
            rmssd: v[3],
            sdsd: v[4],
            nn50: v[5],
            pnn50: v[6],
            nn20: v[7],
            pnn20: v[8],
            mean_hr: v[9],
            vlf_power: v[10],
            lf_power: v[11],
            hf_power: v[12],
            total_power: v[13],
            lf_norm: v[14],
            hf_norm: v[15],
            lf_hf_ratio: v[16],
            peak_hf_freq: v[17],
            sd1: v[18],
            sd2: v[19],
            sd1_sd2_ratio: v[20],
            ellipse_area: v[21],
            degenerate_spectrum: false,
        }
    }

    #[test]
    fn baseline_min_max() {
        let p = fit_baseline(&[feat(40.0), feat(60.0), feat(50.0)], 300.0).unwrap();
        assert_eq!((p.min[2], p.max[2]), (40.0, 60.0));
        assert_eq!((p.min[0], p.max[0]), (1.0, 1.0));
        assert!(fit_baseline(&[feat(1.0), feat(2.0)], 300.0).is_err());
    }

    #[test]
    fn normalization_endpoints_and_extrapolation() {
        let p = fit_baseline(&[feat(40.0), feat(60.0), feat(50.0)], 300.0).unwrap();
        assert_eq!(normalize(&feat(40.0), &p)[2], 0.0);
        assert_eq!(normalize(&feat(60.0), &p)[2], 1.0);
        assert_eq!(normalize(&feat(80.0), &p)[2], 2.0);
        // degenerate range
        assert_eq!(normalize(&feat(123.0), &p)[0], 0.5);
    }

    #[test]
    fn matches_brute_force_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let windows: Vec<HrvFeatures> = (0..12)
            .map(|_| {
                let mut v = [0.0; N_FEATURES];
                v.iter_mut()
                    .for_each(|x| *x = rng.random_range(-50.0..50.0));
                from_vec(v)
            })
            .collect();
        let p = fit_baseline(&windows, 300.0).unwrap();
        for i in 0..N_FEATURES {
            let col: Vec<f64> = windows.iter().map(|w| w.to_vector()[i]).collect();
            let mut lo = col[0];
            let mut hi = col[0];
            for &c in &col {
                if c < lo {
                    lo = c;
                }
                if c > hi {
                    hi = c;
                }
            }
            assert_eq!((p.min[i], p.max[i]), (lo, hi));
        }
    }
}
