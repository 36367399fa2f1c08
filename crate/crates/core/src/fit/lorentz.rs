//! Multi-Lorentzian peak fitting for magnitude spectra.
//!
//! The model is a flat baseline plus `k` Lorentzians in peak-height form.
//! Internally each amplitude is parameterized as `s^2` so the fit cannot
//! produce a negative peak, and each width enters as `|w|`; the reported
//! covariance is transformed back to the physical (center, hwhm,
//! amplitude) coordinates.

use nalgebra::DMatrix;

use super::engine::{solve_damped_lsq, FitOptions};
use super::{FitError, LorentzianPeak};
use crate::records::SpectrumRecord;

/// One fitted peak with one-sigma uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEstimate {
    pub center: f64,
    pub center_sigma: f64,
    pub hwhm: f64,
    pub hwhm_sigma: f64,
    pub amplitude: f64,
    pub amplitude_sigma: f64,
}

impl PeakEstimate {
    pub fn peak(&self) -> LorentzianPeak {
        LorentzianPeak {
            center: self.center,
            hwhm: self.hwhm,
            amplitude: self.amplitude,
        }
    }
}

/// Result of a baseline + k Lorentzian fit, peaks sorted by ascending
/// center. `covariance` is in physical coordinates and follows the
/// ordering `[baseline, (center, hwhm, amplitude) x k]` after the sort.
#[derive(Debug, Clone)]
pub struct LorentzianFit {
    pub baseline: f64,
    pub baseline_sigma: f64,
    pub peaks: Vec<PeakEstimate>,
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn smooth5(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Topographic prominence of the maximum at `i`: height above the higher
/// of the two key saddles, where each saddle is the minimum between the
/// peak and the nearest strictly higher point (or the record edge).
fn prominence(y: &[f64], i: usize) -> f64 {
    let h = y[i];
    let mut left = h;
    for j in (0..i).rev() {
        left = left.min(y[j]);
        if y[j] > h {
            break;
        }
    }
    let mut right = h;
    for v in &y[i + 1..] {
        right = right.min(*v);
        if *v > h {
            break;
        }
    }
    h - left.max(right)
}

/// Seeds up to `k` peaks from the data: smoothed local maxima ranked by
/// prominence, widths from the half-prominence crossing distance.
fn auto_seed(x: &[f64], y: &[f64], k: usize) -> Result<Vec<LorentzianPeak>, FitError> {
    let base = median(y);
    let smooth = smooth5(y);
    let mut candidates: Vec<(f64, usize)> = (1..smooth.len() - 1)
        .filter(|&i| smooth[i] > smooth[i - 1] && smooth[i] > smooth[i + 1])
        .map(|i| (prominence(&smooth, i), i))
        .collect();
    if candidates.len() < k {
        return Err(FitError::Initialization(format!(
            "found {} candidate peaks, need {}",
            candidates.len(),
            k
        )));
    }
    // Highest prominence first; ties resolved toward the lower center so
    // seeding is deterministic.
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let bin = if x.len() > 1 {
        (x[x.len() - 1] - x[0]).abs() / (x.len() - 1) as f64
    } else {
        1.0
    };
    let peaks = candidates[..k]
        .iter()
        .map(|&(prom, i)| {
            let half = smooth[i] - 0.5 * prom;
            let mut lo = i;
            while lo > 0 && smooth[lo] > half {
                lo -= 1;
            }
            let mut hi = i;
            while hi + 1 < smooth.len() && smooth[hi] > half {
                hi += 1;
            }
            let hwhm = (0.5 * (x[hi] - x[lo]).abs()).max(bin);
            LorentzianPeak {
                center: x[i],
                hwhm,
                amplitude: (y[i] - base).max(1e-3 * prom.max(f64::MIN_POSITIVE)),
            }
        })
        .collect();
    Ok(peaks)
}

/// Fits `baseline + sum of k Lorentzians` to a spectrum.
///
/// With `init = None` the peaks are seeded from the `k` most prominent
/// smoothed local maxima; pass explicit seeds when the peaks overlap too
/// strongly for that to work. Peaks are returned sorted by ascending
/// center regardless of seeding order, with the covariance permuted to
/// match. Residuals are unweighted; with the default
/// `scale_covariance = true` the uncertainties are calibrated to the
/// observed scatter.
pub fn fit_lorentzians(
    spectrum: &SpectrumRecord,
    k: usize,
    init: Option<&[LorentzianPeak]>,
    opts: &FitOptions,
) -> Result<LorentzianFit, FitError> {
    if k == 0 {
        return Err(FitError::EmptyParams);
    }
    let x = &spectrum.x;
    let y = &spectrum.y;
    let n_params = 1 + 3 * k;
    if x.len() < n_params + 1 {
        return Err(FitError::TooFewPoints {
            needed: n_params + 1,
            got: x.len(),
        });
    }
    let seeds = match init {
        Some(p) => {
            if p.len() != k {
                return Err(FitError::Initialization(format!(
                    "got {} seed peaks for a {}-peak fit",
                    p.len(),
                    k
                )));
            }
            p.to_vec()
        }
        None => auto_seed(x, y, k)?,
    };

    let mut p0 = Vec::with_capacity(n_params);
    p0.push(median(y));
    for s in &seeds {
        if !(s.hwhm.is_finite() && s.center.is_finite() && s.amplitude.is_finite()) {
            return Err(FitError::NonFinite {
                context: "seed peak",
            });
        }
        p0.push(s.center);
        p0.push(s.hwhm.abs().max(f64::MIN_POSITIVE.sqrt()));
        p0.push(s.amplitude.max(0.0).sqrt());
    }

    let xs = x.clone();
    let ys = y.clone();
    let model = move |p: &[f64]| -> Vec<f64> {
        let b = p[0];
        xs.iter()
            .zip(&ys)
            .map(|(&xi, &yi)| {
                let mut m = b;
                for j in 0..k {
                    let (c, w, s) = (p[1 + 3 * j], p[2 + 3 * j], p[3 + 3 * j]);
                    let d = xi - c;
                    let w2 = w * w;
                    m += s * s * w2 / (d * d + w2);
                }
                yi - m
            })
            .collect()
    };
    let fit = solve_damped_lsq(model, &p0, opts)?;

    // Transform covariance to physical coordinates. The map is diagonal:
    // baseline and centers unchanged, hwhm = |w|, amplitude = s^2.
    let mut g = vec![1.0; n_params];
    for j in 0..k {
        g[2 + 3 * j] = fit.params[2 + 3 * j].signum();
        g[3 + 3 * j] = 2.0 * fit.params[3 + 3 * j];
    }
    let mut cov = fit.covariance.clone();
    for i in 0..n_params {
        for j in 0..n_params {
            cov[(i, j)] *= g[i] * g[j];
        }
    }

    // Sort peaks by center and permute the covariance to match.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| fit.params[1 + 3 * a].total_cmp(&fit.params[1 + 3 * b]));
    let mut perm = vec![0usize; n_params];
    for (new_j, &old_j) in order.iter().enumerate() {
        for f in 0..3 {
            perm[1 + 3 * new_j + f] = 1 + 3 * old_j + f;
        }
    }
    let cov_sorted = DMatrix::from_fn(n_params, n_params, |i, j| cov[(perm[i], perm[j])]);

    let peaks = order
        .iter()
        .enumerate()
        .map(|(new_j, &old_j)| {
            let base = 1 + 3 * old_j;
            let sbase = 1 + 3 * new_j;
            PeakEstimate {
                center: fit.params[base],
                center_sigma: cov_sorted[(sbase, sbase)].max(0.0).sqrt(),
                hwhm: fit.params[base + 1].abs(),
                hwhm_sigma: cov_sorted[(sbase + 1, sbase + 1)].max(0.0).sqrt(),
                amplitude: fit.params[base + 2] * fit.params[base + 2],
                amplitude_sigma: cov_sorted[(sbase + 2, sbase + 2)].max(0.0).sqrt(),
            }
        })
        .collect();

    Ok(LorentzianFit {
        baseline: fit.params[0],
        baseline_sigma: cov_sorted[(0, 0)].max(0.0).sqrt(),
        peaks,
        covariance: cov_sorted,
        chi2: fit.chi2,
        reduced_chi2: fit.reduced_chi2,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}
