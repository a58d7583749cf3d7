//! Decay-lemma certification, exponential rate fitting and tail
//! integrability checks for the classification of runs.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("samples must have uniform cadence")]
    NonUniformCadence,
    #[error("horizon {0} too short, need more than {1}")]
    ShortHorizon(f64, f64),
    #[error("exponent halves must sum to 1 exactly; got {0}/{1}")]
    BadExponents(i64, i64),
    #[error("not enough positive samples in the fit window ({0})")]
    TooFewSamples(usize),
}

/// Hypothesis data of the decay lemma: the inequality
/// W'(t) <= -2 lambda W(t) + lambda prod_j W(t-2j)^{nu_j/2} for t >= k1,
/// with nonnegative exponents satisfying (1/2) sum nu_j = 1 exactly.
#[derive(Debug, Clone)]
pub struct DecayHypothesis {
    pub lambda: f64,
    /// exponent halves nu_j / 2 as exact rationals (numerator, denominator)
    pub nu_halves: Vec<(i64, i64)>,
    /// bound on sup W
    pub k0: f64,
    /// onset time, at least 2N
    pub k1: f64,
}

impl DecayHypothesis {
    pub fn new(lambda: f64, nu_halves: Vec<(i64, i64)>, k0: f64, k1: f64) -> Result<Self, AnalysisError> {
        // exact rational sum check: sum nu_j / 2 = 1
        let (mut num, mut den) = (0i64, 1i64);
        for &(p, q) in &nu_halves {
            assert!(q > 0 && p >= 0, "exponents must be nonnegative");
            num = num * q + p * den;
            den *= q;
            let g = gcd(num.abs().max(1), den);
            num /= g;
            den /= g;
        }
        if num != den {
            return Err(AnalysisError::BadExponents(num, den));
        }
        let n = nu_halves.len() as f64 - 1.0;
        assert!(k1 >= 2.0 * n, "onset must be at least 2N");
        Ok(DecayHypothesis { lambda, nu_halves, k0, k1 })
    }

    fn halves_f64(&self) -> Vec<f64> {
        self.nu_halves.iter().map(|&(p, q)| p as f64 / q as f64).collect()
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Outcome of auditing a sampled series against the decay lemma.
#[derive(Debug, Clone, Serialize)]
pub enum DecayVerdict {
    /// hypothesis satisfied everywhere and the fitted envelope C e^{-kappa t}
    /// dominates every sample
    Certified { c: f64, kappa: f64 },
    /// first sample time where the inequality fails beyond the tolerance band
    HypothesisViolated { t: f64, gap: f64 },
    Inconclusive { reason: String },
}

/// Rate reported for an identically-zero series, which decays faster than
/// any fit can resolve.
pub const ZERO_SERIES_KAPPA: f64 = 1.0;

/// Check the difference-differential hypothesis at every sample past the
/// onset (centered differences, tolerance band 1e-8 + 2% relative), then fit
/// and verify a dominating exponential envelope.
pub fn decay_lemma_audit(
    times: &[f64],
    w: &[f64],
    hyp: &DecayHypothesis,
) -> Result<DecayVerdict, AnalysisError> {
    if times.len() < 4 {
        return Err(AnalysisError::ShortHorizon(0.0, hyp.k1 + 10.0));
    }
    let dt = times[1] - times[0];
    for pair in times.windows(2) {
        if ((pair[1] - pair[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(AnalysisError::NonUniformCadence);
        }
    }
    let horizon = times[times.len() - 1];
    if horizon <= hyp.k1 + 10.0 {
        return Err(AnalysisError::ShortHorizon(horizon, hyp.k1 + 10.0));
    }

    let wmax = w.iter().cloned().fold(0.0f64, f64::max);
    if wmax <= 0.0 {
        return Ok(DecayVerdict::Certified { c: 0.0, kappa: ZERO_SERIES_KAPPA });
    }

    let halves = hyp.halves_f64();
    let lag_steps = (2.0 / dt).round() as usize;
    let n_lag = halves.len() - 1;

    for i in 1..times.len() - 1 {
        let t = times[i];
        if t < hyp.k1 || i < n_lag * lag_steps {
            continue;
        }
        let wdot = (w[i + 1] - w[i - 1]) / (2.0 * dt);
        let mut product = 1.0;
        for (j, half) in halves.iter().enumerate() {
            product *= w[i - j * lag_steps].max(0.0).powf(*half);
        }
        let rhs = -2.0 * hyp.lambda * w[i] + hyp.lambda * product;
        let band = 1e-8 + 0.02 * rhs.abs().max(w[i] * hyp.lambda);
        if wdot > rhs + band {
            return Ok(DecayVerdict::HypothesisViolated { t, gap: wdot - rhs });
        }
    }

    // Tail fit on the trailing half of the above-floor window, then envelope
    // domination over all samples.
    let floor = 1e-12 * wmax;
    let end = w.iter().rposition(|&v| v > floor).map_or(w.len(), |i| i + 1);
    match fit_exponential(&times[..end], &w[..end], 0.5) {
        Ok(fit) => {
            if fit.kappa <= 0.0 {
                return Ok(DecayVerdict::Inconclusive {
                    reason: format!("tail fit is non-decaying (kappa = {:.3e})", fit.kappa),
                });
            }
            let mut c = 0.0f64;
            for (t, v) in times.iter().zip(w) {
                c = c.max(v * (fit.kappa * t).exp());
            }
            Ok(DecayVerdict::Certified { c, kappa: fit.kappa })
        }
        Err(_) => Ok(DecayVerdict::Inconclusive {
            reason: "tail fit failed (nonpositive samples)".to_string(),
        }),
    }
}

/// Least-squares exponential fit on the trailing window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpFit {
    pub kappa: f64,
    pub stderr: f64,
    pub r_squared: f64,
}

/// Fit w ~ C e^{-kappa t} by linear regression on log w over the trailing
/// `window_fraction` of the samples. Nonpositive samples shrink the window
/// from the left; fewer than 20 surviving samples is an error.
pub fn fit_exponential(
    times: &[f64],
    w: &[f64],
    window_fraction: f64,
) -> Result<ExpFit, AnalysisError> {
    let n = times.len();
    let start = ((1.0 - window_fraction) * n as f64) as usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in start..n {
        if w[i] > 0.0 {
            xs.push(times[i]);
            ys.push(w[i].ln());
        }
    }
    if xs.len() < 20 {
        return Err(AnalysisError::TooFewSamples(xs.len()));
    }
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let syy: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = ybar + slope * (x - xbar);
            (y - pred) * (y - pred)
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let stderr = if xs.len() > 2 {
        (ss_res / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(ExpFit { kappa: -slope, stderr, r_squared })
}

/// Tail integrability of int_0^inf series^p dt: trapezoid over the observed
/// horizon plus an extrapolated tail from the fitted decay. Exponentially
/// decaying tails are always finite; power-law tails t^{-alpha} are finite
/// iff p alpha > 1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Integrability {
    pub finite: bool,
    pub value: f64,
    pub observed: f64,
    pub tail: f64,
}

pub fn integrability_check(times: &[f64], series: &[f64], p: f64) -> Integrability {
    assert!(p >= 1.0, "p >= 1 required");
    let mut observed = 0.0;
    for i in 1..times.len() {
        let a = series[i - 1].abs().powf(p);
        let b = series[i].abs().powf(p);
        observed += 0.5 * (times[i] - times[i - 1]) * (a + b);
    }
    let t_end = *times.last().unwrap();
    let w_end = series.last().unwrap().abs();

    if w_end == 0.0 {
        return Integrability { finite: true, value: observed, observed, tail: 0.0 };
    }

    // Fit the tail both ways on the trailing half and keep the model with
    // the smaller residual: log w linear in t (exponential) or in log t
    // (power law). Slow power laws look weakly exponential over any finite
    // window, so model selection is the discriminator here.
    let n = times.len();
    let start = n / 2;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for i in start..n {
        if series[i].abs() > 0.0 && times[i] > 0.0 {
            ts.push(times[i]);
            ys.push(series[i].abs().ln());
        }
    }
    if ts.len() < 10 {
        return Integrability { finite: false, value: f64::INFINITY, observed, tail: f64::INFINITY };
    }
    let exp_fit = linfit(&ts, &ys);
    let logts: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let pow_fit = linfit(&logts, &ys);
    let kappa = -exp_fit.0;
    let alpha = -pow_fit.0;
    let window = ts[ts.len() - 1] - ts[0];
    let exp_ok = exp_fit.1 <= pow_fit.1 && kappa * window > 0.5;
    if exp_ok {
        let tail = w_end.powf(p) / (p * kappa);
        return Integrability { finite: true, value: observed + tail, observed, tail };
    }
    if alpha > 0.0 && p * alpha > 1.0 {
        let tail = w_end.powf(p) * t_end / (p * alpha - 1.0);
        Integrability { finite: true, value: observed + tail, observed, tail }
    } else {
        Integrability { finite: false, value: f64::INFINITY, observed, tail: f64::INFINITY }
    }
}

/// Slope and residual sum of squares of the least-squares line.
fn linfit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let pred = ybar + slope * (x - xbar);
            (y - pred) * (y - pred)
        })
        .sum();
    (slope, ss_res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(horizon: f64, dt: f64, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let n = (horizon / dt).round() as usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let w = times.iter().map(|&t| f(t)).collect();
        (times, w)
    }

    #[test]
    fn certifies_pure_exponential() {
        // W = e^{-t}, lambda = 1, N = 1, nu = (1, 1): the product term is
        // e^{-t+1} so the inequality -e^{-t} <= -2e^{-t} + e^{-t+1} holds
        let (times, w) = sample(30.0, 0.05, |t| (-t).exp());
        let hyp = DecayHypothesis::new(1.0, vec![(1, 2), (1, 2)], 1.0, 2.0).unwrap();
        match decay_lemma_audit(&times, &w, &hyp).unwrap() {
            DecayVerdict::Certified { c, kappa } => {
                assert!((kappa - 1.0).abs() < 1e-6, "kappa {kappa}");
                assert!(c >= 1.0 - 1e-9 && c < 1.1, "envelope constant {c}");
            }
            other => panic!("expected Certified, got {other:?}"),
        }
    }

    #[test]
    fn rejects_polynomial_decay() {
        // W = 1/(1+t) cannot satisfy the inequality for large t
        let (times, w) = sample(60.0, 0.05, |t| 1.0 / (1.0 + t));
        let hyp = DecayHypothesis::new(1.0, vec![(1, 2), (1, 2)], 1.0, 2.0).unwrap();
        match decay_lemma_audit(&times, &w, &hyp).unwrap() {
            DecayVerdict::HypothesisViolated { t, gap } => {
                assert!(t > 2.0 && gap > 0.0);
            }
            other => panic!("expected HypothesisViolated, got {other:?}"),
        }
    }

    #[test]
    fn zero_series_certifies() {
        let (times, w) = sample(30.0, 0.05, |_| 0.0);
        let hyp = DecayHypothesis::new(1.0, vec![(1, 2), (1, 2)], 1.0, 2.0).unwrap();
        match decay_lemma_audit(&times, &w, &hyp).unwrap() {
            DecayVerdict::Certified { c, kappa } => {
                assert_eq!(c, 0.0);
                assert!(kappa >= ZERO_SERIES_KAPPA);
            }
            other => panic!("expected Certified, got {other:?}"),
        }
    }

    #[test]
    fn certification_is_monotone_under_scaling() {
        // scaling a certified series by a in (0, 1] stays certified with the
        // same rate
        let (times, w) = sample(30.0, 0.05, |t| (-t).exp());
        let hyp = DecayHypothesis::new(1.0, vec![(1, 2), (1, 2)], 1.0, 2.0).unwrap();
        let kappa0 = match decay_lemma_audit(&times, &w, &hyp).unwrap() {
            DecayVerdict::Certified { kappa, .. } => kappa,
            other => panic!("{other:?}"),
        };
        for a in [0.5, 0.1, 0.01] {
            let ws: Vec<f64> = w.iter().map(|v| a * v).collect();
            match decay_lemma_audit(&times, &ws, &hyp).unwrap() {
                DecayVerdict::Certified { kappa, .. } => {
                    assert!((kappa - kappa0).abs() < 1e-9);
                }
                other => panic!("scaled series not certified: {other:?}"),
            }
        }
    }

    #[test]
    fn exponent_sum_checked_exactly() {
        assert!(DecayHypothesis::new(1.0, vec![(1, 2), (1, 3)], 1.0, 2.0).is_err());
        assert!(DecayHypothesis::new(1.0, vec![(1, 2), (1, 3), (1, 6)], 1.0, 4.0).is_ok());
    }

    #[test]
    fn fit_exponential_exact_and_noisy() {
        let (times, w) = sample(20.0, 0.05, |t| 2.0 * (-3.0 * t).exp());
        let fit = fit_exponential(&times, &w, 0.5).unwrap();
        assert!((fit.kappa - 3.0).abs() < 1e-10);
        assert!(fit.stderr < 1e-10);
        assert!(fit.r_squared > 1.0 - 1e-12);

        let (times, w) = sample(20.0, 0.05, |_| 0.7);
        let fit = fit_exponential(&times, &w, 0.5).unwrap();
        assert!(fit.kappa.abs() < 1e-12);

        let (times, w) = sample(40.0, 0.05, |t| (-t).exp() * (2.0 + t.sin()));
        let fit = fit_exponential(&times, &w, 0.5).unwrap();
        assert!((fit.kappa - 1.0).abs() < 0.05, "kappa {}", fit.kappa);
    }

    #[test]
    fn integrability_examples() {
        let (times, w) = sample(25.0, 0.05, |t| (-t).exp());
        let r = integrability_check(&times, &w, 1.0);
        assert!(r.finite);
        assert!((r.value - 1.0).abs() < 1e-3, "integral {}", r.value);

        let (times, w) = sample(60.0, 0.05, |t| 1.0 / (1.0 + t));
        let r1 = integrability_check(&times, &w, 1.0);
        assert!(!r1.finite);
        let r3 = integrability_check(&times, &w, 3.0);
        assert!(r3.finite);
        // int (1+t)^{-3} = 1/2
        assert!((r3.value - 0.5).abs() < 0.05, "p=3 integral {}", r3.value);
    }
}
