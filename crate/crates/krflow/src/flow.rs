//! Time integration of the modified Kahler-Ricci flow as a potential flow.
//!
//! The centered potential evolves by psi_dot = log h + psi + theta + f0 minus
//! its background mean; the dropped mean feeds a scalar constant channel
//! whose critical initial value is fixed by the Y_X tail integral. The
//! channel is reconstructed per sample from state quantities rather than
//! integrated as an ODE: the forward ODE amplifies noise like e^t, while the
//! reconstruction stays conditioned.

use crate::functionals::{self, residual_norms, y_x};
use crate::geometry::{
    sup_norm, x_norm_sq, Background, BackgroundId, GeomError, MetricState, VectorField,
};
use crate::linalg::LinalgError;
use crate::potentials::{mean_theta_u, modified_potential};
use crate::spectral::project_holomorphic;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Eigen(#[from] LinalgError),
    #[error("initial data is degenerate: {0}")]
    BadInitialData(String),
    #[error("trace has {0} samples; at least {1} required")]
    TooFewSamples(usize, usize),
}

/// Named initial perturbation families, built on the affine map of the
/// momentum interval to [-1, 1] and scaled by the configured amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationFamily {
    None,
    Mode2,
    Mode3,
    Bump,
    Slide,
    Random,
}

impl PerturbationFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(Self::None),
            "mode2" => Some(Self::Mode2),
            "mode3" => Some(Self::Mode3),
            "bump" => Some(Self::Bump),
            "slide" => Some(Self::Slide),
            "random" => Some(Self::Random),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Mode2 => "mode2",
            Self::Mode3 => "mode3",
            Self::Bump => "bump",
            Self::Slide => "slide",
            Self::Random => "random",
        }
    }
}

/// Run configuration; see the config-file keys of the same names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowConfig {
    pub background: BackgroundId,
    pub c: f64,
    pub family: PerturbationFamily,
    pub amplitude: f64,
    pub grid: usize,
    pub t_max: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub safety: f64,
    pub sample_dt: f64,
    pub snapshot_dt: f64,
    pub seed: u64,
    /// sup-norm blow-up threshold classifying divergence without overflow
    pub guard: f64,
}

impl FlowConfig {
    pub fn new(background: BackgroundId) -> Self {
        FlowConfig {
            background,
            c: 0.0,
            family: PerturbationFamily::None,
            amplitude: 0.0,
            grid: 129,
            t_max: 10.0,
            dt_init: 1e-3,
            dt_min: 1e-10,
            safety: 0.9,
            sample_dt: 0.05,
            snapshot_dt: 1.0,
            seed: 42,
            guard: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    ReachedHorizon,
    Degenerate { t: f64 },
    DivergenceGuard { t: f64 },
}

impl Termination {
    pub fn exit_code(&self) -> i32 {
        match self {
            Termination::ReachedHorizon => 0,
            Termination::Degenerate { .. } => 2,
            Termination::DivergenceGuard { .. } => 3,
        }
    }
}

/// Per-sample diagnostics record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagRecord {
    pub t: f64,
    pub y_x: f64,
    pub b: f64,
    pub mu_x: f64,
    pub f_x: f64,
    pub res_c0: f64,
    pub res_l2: f64,
    pub grad_u_c0: f64,
    pub lap_u_c0: f64,
    pub phidot_c0: f64,
    pub x2_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub lambda: f64,
    pub lambda_x: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    // auxiliary series beyond the CSV columns
    pub a_w: f64,
    pub futaki_projection: f64,
    pub w_norm_theta_sq: f64,
    pub u_minus_b_c0: f64,
    pub mean_theta_u: f64,
    pub kappa_f: f64,
    pub u_max: f64,
    pub u_min: f64,
    pub psi_max: f64,
    pub psi_min: f64,
    pub lap_theta_c0: f64,
    pub channel_a: f64,
}

/// Full record of one run: uniform samples, periodic state snapshots and the
/// termination reason.
#[derive(Debug)]
pub struct FlowTrace {
    pub config: FlowConfig,
    pub background: Arc<Background>,
    pub x: VectorField,
    pub times: Vec<f64>,
    pub records: Vec<DiagRecord>,
    pub snapshots: Vec<MetricState>,
    pub snapshot_times: Vec<f64>,
    pub termination: Termination,
    /// path-quadrature Mabuchi energy of the initial state
    pub mu0: f64,
}

impl FlowTrace {
    pub fn series(&self, f: impl Fn(&DiagRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Build the configured initial perturbation, centered and validity-checked.
pub fn initial_psi(bg: &Arc<Background>, config: &FlowConfig) -> Result<Vec<f64>, FlowError> {
    let g = &bg.grid;
    let mid = 0.5 * (g.tau_a + g.tau_b);
    let half = 0.5 * (g.tau_b - g.tau_a);
    let xi: Vec<f64> = g.nodes.iter().map(|t| (t - mid) / half).collect();
    let shape: Vec<f64> = match config.family {
        PerturbationFamily::None => vec![0.0; g.len()],
        PerturbationFamily::Mode2 => xi.iter().map(|x| (3.0 * x * x - 1.0) / 2.0).collect(),
        PerturbationFamily::Mode3 => xi.iter().map(|x| (5.0 * x * x * x - 3.0 * x) / 2.0).collect(),
        PerturbationFamily::Bump => xi.iter().map(|x| (-4.0 * x * x).exp()).collect(),
        PerturbationFamily::Slide => xi.clone(),
        PerturbationFamily::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let legendre = |k: usize, x: f64| match k {
                2 => (3.0 * x * x - 1.0) / 2.0,
                3 => (5.0 * x * x * x - 3.0 * x) / 2.0,
                4 => (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0,
                _ => (63.0 * x.powi(5) - 70.0 * x.powi(3) + 15.0 * x) / 8.0,
            };
            let raw: Vec<f64> = xi
                .iter()
                .map(|&x| (2..=5).map(|k| coeffs[k - 2] * legendre(k, x)).sum())
                .collect();
            let norm = sup_norm(&raw).max(1e-12);
            raw.iter().map(|v| v / norm).collect()
        }
    };
    let mut psi: Vec<f64> = shape.iter().map(|v| config.amplitude * v).collect();
    bg.center(&mut psi);
    MetricState::new(bg.clone(), psi.clone(), 0.0)
        .map_err(|e| FlowError::BadInitialData(e.to_string()))?;
    Ok(psi)
}

/// Light volume data of a trial potential: (tau~, D, h); used inside the
/// stepper where curvature is not needed.
fn volume_data(bg: &Background, psi: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let g = &bg.grid;
    let dpsi = g.deriv(psi);
    let fp: Vec<f64> = bg.phi0.iter().zip(&dpsi).map(|(p, d)| p * d).collect();
    let tau_cur: Vec<f64> = g.nodes.iter().zip(&fp).map(|(t, v)| t + v).collect();
    let dfp = g.deriv(&fp);
    let stretch: Vec<f64> = dfp.iter().map(|d| 1.0 + d).collect();
    let h: Vec<f64> = if bg.dim == 1 {
        stretch.clone()
    } else {
        stretch
            .iter()
            .zip(tau_cur.iter().zip(g.nodes.iter()))
            .map(|(d, (xc, x0))| d * xc / x0)
            .collect()
    };
    for (&hv, &dv) in h.iter().zip(&stretch) {
        if !(hv > 0.0 && dv > 0.0) || !hv.is_finite() {
            return None;
        }
    }
    Some((tau_cur, stretch, h))
}

/// Centered flow right-hand side: log h + psi + theta + f0 minus its
/// background mean. Returns None when the trial potential leaves the cone.
fn rhs_centered(bg: &Background, x: &VectorField, psi: &[f64]) -> Option<Vec<f64>> {
    let (tau_cur, _stretch, h) = volume_data(bg, psi)?;
    let cs = x.c * bg.gen_slope;
    // theta normalization: kappa = log(V / int e^{cs tau~} h m)
    let mass = bg.grid.integrate(
        &tau_cur
            .iter()
            .zip(h.iter().zip(&bg.dh_weight))
            .map(|(tc, (hv, m))| (cs * tc).exp() * hv * m)
            .collect::<Vec<_>>(),
    );
    if !(mass > 0.0) || !mass.is_finite() {
        return None;
    }
    let kappa = (bg.volume / mass).ln();
    let mut field: Vec<f64> = (0..psi.len())
        .map(|i| h[i].ln() + psi[i] + cs * tau_cur[i] + kappa + bg.f0[i])
        .collect();
    let mean = bg.mean_m(&field);
    for v in field.iter_mut() {
        *v -= mean;
    }
    Some(field)
}

enum StepOutcome {
    Accepted(Vec<f64>),
    Rejected,
}

/// Spectral-radius estimate of the flow Jacobian at psi by power iteration
/// on finite differences, the standard device of stabilized explicit
/// steppers. The iteration vector is threaded through calls as a warm start.
fn jacobian_radius(bg: &Background, x: &VectorField, psi: &[f64], dir: &mut Vec<f64>) -> Option<f64> {
    let n = psi.len();
    if dir.len() != n {
        // deterministic rough seed with broad spectral content
        *dir = (0..n)
            .map(|i| ((i as f64 * 12.9898).sin() * 43758.5453).fract() - 0.5)
            .collect();
    }
    let k0 = rhs_centered(bg, x, psi)?;
    let eps = 1e-7 * (1.0 + sup_norm(psi));
    let mut lam = 0.0;
    for _ in 0..4 {
        let nrm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Some(1.0);
        }
        let probe: Vec<f64> = (0..n).map(|i| psi[i] + eps * dir[i] / nrm).collect();
        let kp = rhs_centered(bg, x, &probe)?;
        let w: Vec<f64> = (0..n).map(|i| (kp[i] - k0[i]) / eps).collect();
        lam = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        *dir = w;
    }
    Some(lam.max(1.0))
}

/// One classical RK4 step of the centered potential, with the additive
/// constant projected out at every stage. Rejects on cone exit or
/// non-finite output; stability is enforced by the caller through the
/// Jacobian-radius cap on dt.
fn rk4_step(bg: &Background, x: &VectorField, psi: &[f64], dt: f64) -> StepOutcome {
    let n = psi.len();
    let k1 = match rhs_centered(bg, x, psi) {
        Some(k) => k,
        None => return StepOutcome::Rejected,
    };
    let y2: Vec<f64> = (0..n).map(|i| psi[i] + 0.5 * dt * k1[i]).collect();
    let k2 = match rhs_centered(bg, x, &y2) {
        Some(k) => k,
        None => return StepOutcome::Rejected,
    };
    let y3: Vec<f64> = (0..n).map(|i| psi[i] + 0.5 * dt * k2[i]).collect();
    let k3 = match rhs_centered(bg, x, &y3) {
        Some(k) => k,
        None => return StepOutcome::Rejected,
    };
    let y4: Vec<f64> = (0..n).map(|i| psi[i] + dt * k3[i]).collect();
    let k4 = match rhs_centered(bg, x, &y4) {
        Some(k) => k,
        None => return StepOutcome::Rejected,
    };
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = psi[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if !out[i].is_finite() {
            return StepOutcome::Rejected;
        }
    }
    // the new state must itself be valid
    if volume_data(bg, &out).is_none() {
        return StepOutcome::Rejected;
    }
    StepOutcome::Accepted(out)
}

/// Public single-step interface: advance a state by dt.
pub fn step(s: &MetricState, x: &VectorField, dt: f64) -> Result<MetricState, FlowError> {
    match rk4_step(&s.background, x, &s.psi, dt) {
        StepOutcome::Accepted(mut psi) => {
            s.background.center(&mut psi);
            Ok(MetricState::new(s.background.clone(), psi, s.t + dt)?)
        }
        StepOutcome::Rejected => Err(FlowError::Geom(GeomError::DegenerateMetric {
            min: 0.0,
            at: f64::NAN,
        })),
    }
}

/// Flow right-hand side of a state as a field (centered form plus the
/// dropped mean, i.e. the full log h + psi + theta + f0).
pub fn rhs(s: &MetricState, x: &VectorField) -> Result<(Vec<f64>, f64), FlowError> {
    let centered = rhs_centered(&s.background, x, &s.psi).ok_or(FlowError::Geom(
        GeomError::DegenerateMetric { min: 0.0, at: f64::NAN },
    ))?;
    // reconstruct the mean from uncentered ingredients for reporting
    let bundle = modified_potential(s, x);
    let q: Vec<f64> = bundle.u.iter().map(|v| v - bundle.kappa_f).collect();
    let mean = s.background.mean_m(&q);
    Ok((centered, mean))
}

fn diagnose(s: &MetricState, x: &VectorField) -> Result<DiagRecord, FlowError> {
    let bundle = modified_potential(s, x);
    let (res_c0, res_l2) = residual_norms(s, x);
    let y = y_x(s, x, &bundle);
    let f_x = functionals::futaki(s, x, &bundle);
    let gn = crate::geometry::grad_norm_sq(s, &bundle.u);
    let grad_u_c0 = sup_norm(&gn).sqrt();
    let lap_u = crate::geometry::laplacian(s, &bundle.u);
    let lap_u_c0 = sup_norm(&lap_u);
    let div = crate::geometry::divergence_x(s, x);
    let lap_theta_c0 = sup_norm(&div);
    let x2 = x_norm_sq(s, x);
    let x2_max = x2.iter().cloned().fold(0.0f64, f64::max);
    let h_min = s.h.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_max = s.h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spec = project_holomorphic(s, x, &bundle)?;
    let theta_min = bundle.theta.iter().cloned().fold(f64::INFINITY, f64::min);
    let theta_max = bundle.theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ub: Vec<f64> = bundle.u.iter().map(|v| v - bundle.b).collect();
    let mtu = mean_theta_u(s, &bundle);
    Ok(DiagRecord {
        t: s.t,
        y_x: y,
        b: bundle.b,
        mu_x: 0.0,
        f_x,
        res_c0,
        res_l2,
        grad_u_c0,
        lap_u_c0,
        phidot_c0: 0.0,
        x2_max,
        h_min,
        h_max,
        lambda: spec.lambda,
        lambda_x: spec.lambda_x,
        theta_min,
        theta_max,
        a_w: spec.a_w,
        futaki_projection: spec.futaki_projection,
        w_norm_theta_sq: spec.w_norm_theta_sq,
        u_minus_b_c0: sup_norm(&ub),
        mean_theta_u: mtu,
        kappa_f: bundle.kappa_f,
        u_max: bundle.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        u_min: bundle.u.iter().cloned().fold(f64::INFINITY, f64::min),
        psi_max: s.psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        psi_min: s.psi.iter().cloned().fold(f64::INFINITY, f64::min),
        lap_theta_c0,
        channel_a: 0.0,
    })
}

/// Integrate a configured run and return its trace.
pub fn run(config: &FlowConfig) -> Result<FlowTrace, FlowError> {
    let bg = Background::build(config.background, config.grid)?;
    let x = VectorField::new(config.c);
    let psi0 = initial_psi(&bg, config)?;
    run_from(bg, x, psi0, config)
}

/// Integrate from an explicit initial potential (used for soliton restarts
/// and perturbed-soliton experiments).
pub fn run_from(
    bg: Arc<Background>,
    x: VectorField,
    mut psi: Vec<f64>,
    config: &FlowConfig,
) -> Result<FlowTrace, FlowError> {
    bg.center(&mut psi);
    let state0 = MetricState::new(bg.clone(), psi.clone(), 0.0)
        .map_err(|e| FlowError::BadInitialData(e.to_string()))?;
    let mu0 = functionals::mabuchi_energy_path(&state0, &x, 24)?;

    let mut times = Vec::new();
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut snapshot_times = Vec::new();

    let mut t = 0.0f64;
    let mut dt = config.dt_init.min(config.sample_dt);
    let mut consec = 0usize;
    let mut sample_idx = 0usize;
    let mut termination = Termination::ReachedHorizon;
    let mut probe_dir: Vec<f64> = Vec::new();
    let mut dt_stab = f64::INFINITY;

    let record_sample =
        |t: f64, psi: &[f64], times: &mut Vec<f64>, records: &mut Vec<DiagRecord>,
         snapshots: &mut Vec<MetricState>, snapshot_times: &mut Vec<f64>|
         -> Result<(), FlowError> {
            let s = MetricState::new(bg.clone(), psi.to_vec(), t)?;
            records.push(diagnose(&s, &x)?);
            times.push(t);
            let snap_every = (config.snapshot_dt / config.sample_dt).round().max(1.0) as usize;
            let k = (t / config.sample_dt).round() as usize;
            if k % snap_every == 0 {
                snapshot_times.push(t);
                snapshots.push(s);
            }
            Ok(())
        };

    record_sample(0.0, &psi, &mut times, &mut records, &mut snapshots, &mut snapshot_times)?;

    'main: while t < config.t_max - 1e-12 {
        // refresh the stability cap once per sample window
        if let Some(radius) = jacobian_radius(&bg, &x, &psi, &mut probe_dir) {
            dt_stab = 2.78 * config.safety / (1.1 * radius);
        }
        let next_sample = ((sample_idx + 1) as f64) * config.sample_dt;
        let target = next_sample.min(config.t_max);
        loop {
            let remaining = target - t;
            if remaining < 1e-12 {
                break;
            }
            let dt_eff = dt.min(dt_stab).min(remaining);
            match rk4_step(&bg, &x, &psi, dt_eff) {
                StepOutcome::Accepted(mut new_psi) => {
                    bg.center(&mut new_psi);
                    psi = new_psi;
                    t = if dt_eff == remaining { target } else { t + dt_eff };
                    consec += 1;
                    if consec >= 10 {
                        dt = (dt * 1.2).min(config.sample_dt);
                        consec = 0;
                    }
                }
                StepOutcome::Rejected => {
                    dt = dt_eff * 0.5;
                    consec = 0;
                    if let Some(radius) = jacobian_radius(&bg, &x, &psi, &mut probe_dir) {
                        dt_stab = 2.78 * config.safety / (1.1 * radius);
                    }
                    if dt < config.dt_min {
                        termination = Termination::Degenerate { t };
                        break 'main;
                    }
                }
            }
        }
        sample_idx = (t / config.sample_dt).round() as usize;
        record_sample(t, &psi, &mut times, &mut records, &mut snapshots, &mut snapshot_times)?;
        if sup_norm(&psi) > config.guard {
            termination = Termination::DivergenceGuard { t };
            break;
        }
    }

    let mut trace = FlowTrace {
        config: config.clone(),
        background: bg,
        x,
        times,
        records,
        snapshots,
        snapshot_times,
        termination,
        mu0,
    };
    finalize_trace(&mut trace);
    Ok(trace)
}

/// Fill the post-run columns: the Mabuchi energy from the Y_X series, the
/// constant channel and the phidot sup norms.
fn finalize_trace(trace: &mut FlowTrace) {
    let v = trace.background.volume;
    let y = trace.series(|r| r.y_x);
    let mu = functionals::mabuchi_energy_flow(&trace.times, &y, trace.mu0, v);
    let channel = channel_series(trace, None);
    for i in 0..trace.records.len() {
        let r = &mut trace.records[i];
        r.mu_x = mu[i];
        r.channel_a = channel[i];
        let hi = r.u_max - r.kappa_f + channel[i];
        let lo = r.u_min - r.kappa_f + channel[i];
        r.phidot_c0 = hi.abs().max(lo.abs());
    }
}

/// The additive constant channel A(t) of the potential, reconstructed
/// pointwise from the Y_X tail integral and the state means:
/// A(t) = e^t S(t) - (1/V) int u e^theta omega^n + kappa_f + (c0 - c0*) e^t,
/// with S(t) the suffix integral of e^{-s} Y_X / V. Passing None for c0 uses
/// the critical value computed from this trace.
pub fn channel_series(trace: &FlowTrace, c0_override: Option<f64>) -> Vec<f64> {
    let n = trace.times.len();
    let v = trace.background.volume;
    // suffix trapezoid of e^{-s} Y / V
    let mut suffix = vec![0.0f64; n];
    for i in (0..n.saturating_sub(1)).rev() {
        let a = (-trace.times[i]).exp() * trace.records[i].y_x / v;
        let b = (-trace.times[i + 1]).exp() * trace.records[i + 1].y_x / v;
        suffix[i] = suffix[i + 1] + 0.5 * (trace.times[i + 1] - trace.times[i]) * (a + b);
    }
    let c0_star = suffix[0] - trace.records[0].mean_theta_u;
    let shift = c0_override.map_or(0.0, |c| c - c0_star);
    (0..n)
        .map(|i| {
            let et = trace.times[i].exp();
            et * suffix[i] - trace.records[i].mean_theta_u + trace.records[i].kappa_f + shift * et
        })
        .collect()
}

/// The normalization constant of the potential flow with its reported
/// truncation bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct C0Result {
    pub c0: f64,
    /// e^{-T} sup_{t <= T} Y_X, the unresolved tail of the defining integral
    pub truncation_bound: f64,
    /// Simpson cross-quadrature of the same integral
    pub c0_simpson: f64,
}

/// c0 = (1/V) int_0^T e^{-t} Y_X dt - (1/V) int u0 e^{theta_0} omega_0^n.
pub fn compute_c0(trace: &FlowTrace) -> Result<C0Result, FlowError> {
    let n = trace.times.len();
    if n < 10 {
        return Err(FlowError::TooFewSamples(n, 10));
    }
    let v = trace.background.volume;
    let integrand: Vec<f64> = (0..n)
        .map(|i| (-trace.times[i]).exp() * trace.records[i].y_x / v)
        .collect();
    let mut trapz = 0.0;
    for i in 1..n {
        trapz += 0.5 * (trace.times[i] - trace.times[i - 1]) * (integrand[i] + integrand[i - 1]);
    }
    // Simpson on the uniform grid (trailing interval by trapezoid when the
    // sample count is even)
    let mut simpson = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let h = trace.times[i + 1] - trace.times[i];
        simpson += h / 3.0 * (integrand[i] + 4.0 * integrand[i + 1] + integrand[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        simpson += 0.5 * (trace.times[i + 1] - trace.times[i]) * (integrand[i] + integrand[i + 1]);
    }
    let ymax = trace.records.iter().map(|r| r.y_x).fold(0.0f64, f64::max);
    let horizon = trace.horizon();
    Ok(C0Result {
        c0: trapz - trace.records[0].mean_theta_u,
        truncation_bound: (-horizon).exp() * ymax / v,
        c0_simpson: simpson - trace.records[0].mean_theta_u,
    })
}

/// Sup norms of the reconstructed potential phi(t) = psi(t) + A(t) with the
/// channel seeded by the given c0.
pub fn normalized_phi(trace: &FlowTrace, c0: f64) -> Vec<(f64, f64)> {
    let channel = channel_series(trace, Some(c0));
    trace
        .times
        .iter()
        .zip(trace.records.iter().zip(&channel))
        .map(|(&t, (r, &a))| {
            let hi = (r.psi_max + a).abs();
            let lo = (r.psi_min + a).abs();
            (t, hi.max(lo))
        })
        .collect()
}

/// Finite-difference residuals of the three evolution identities on a triple
/// of consecutive snapshots (uniform spacing): (i) the scalar identity for
/// v = -phidot, (ii) the |grad v|^2 identity, (iii) the (Delta + X) v
/// identity. Each residual is the sup norm over interior evaluation.
pub fn evolution_identity_residuals(
    prev: &MetricState,
    mid: &MetricState,
    next: &MetricState,
    x: &VectorField,
) -> (f64, f64, f64) {
    let dt = mid.t - prev.t;
    debug_assert!((next.t - mid.t - dt).abs() < 1e-9);
    let q = |s: &MetricState| -> Vec<f64> {
        let bundle = modified_potential(s, x);
        bundle.u.iter().map(|v| v - bundle.kappa_f).collect()
    };
    let q_prev = q(prev);
    let q_mid = q(mid);
    let q_next = q(next);

    // (i) d/dt v = (Delta + X) v + v with v = -q - A: the A-channel cancels
    // against its own ODE, leaving -dq/dt + (Delta+X) q + q - mean_m(q) = 0.
    let dq_dt: Vec<f64> = (0..q_mid.len())
        .map(|i| (q_next[i] - q_prev[i]) / (2.0 * dt))
        .collect();
    let lap_q = crate::geometry::laplacian(mid, &q_mid);
    let xq = crate::geometry::apply_x(mid, &q_mid, x);
    let mean_q = mid.background.mean_m(&q_mid);
    let r1_field: Vec<f64> = (0..q_mid.len())
        .map(|i| -dq_dt[i] + lap_q[i] + xq[i] + q_mid[i] - mean_q)
        .collect();

    // (ii) d/dt |grad v|^2 = (Delta+X)|grad v|^2 - |nabla nabla v|^2
    //      - |nabla nabla-bar v|^2 + |grad v|^2
    let gv = |s: &MetricState, qf: &[f64]| crate::geometry::grad_norm_sq(s, qf);
    let g_prev = gv(prev, &q_prev);
    let g_mid = gv(mid, &q_mid);
    let g_next = gv(next, &q_next);
    let dg_dt: Vec<f64> = (0..g_mid.len())
        .map(|i| (g_next[i] - g_prev[i]) / (2.0 * dt))
        .collect();
    let lap_g = crate::geometry::laplacian(mid, &g_mid);
    let xg = crate::geometry::apply_x(mid, &g_mid, x);
    let (hess_mixed, hess_anti) = hessian_densities(mid, &q_mid);
    let r2_field: Vec<f64> = (0..g_mid.len())
        .map(|i| dg_dt[i] - (lap_g[i] + xg[i] - hess_anti[i] - hess_mixed[i] + g_mid[i]))
        .collect();

    // (iii) d/dt (Delta+X) v = (Delta+X)^2 v + (Delta+X) v + |nabla nabla-bar v|^2
    let lv = |s: &MetricState, qf: &[f64]| -> Vec<f64> {
        let l = crate::geometry::laplacian(s, qf);
        let xa = crate::geometry::apply_x(s, qf, x);
        l.iter().zip(&xa).map(|(a, b)| -(a + b)).collect()
    };
    let l_prev = lv(prev, &q_prev);
    let l_mid = lv(mid, &q_mid);
    let l_next = lv(next, &q_next);
    let dl_dt: Vec<f64> = (0..l_mid.len())
        .map(|i| (l_next[i] - l_prev[i]) / (2.0 * dt))
        .collect();
    let lap_l = crate::geometry::laplacian(mid, &l_mid);
    let xl = crate::geometry::apply_x(mid, &l_mid, x);
    let r3_field: Vec<f64> = (0..l_mid.len())
        .map(|i| dl_dt[i] - (lap_l[i] + xl[i] + l_mid[i] + hess_mixed[i]))
        .collect();

    (sup_norm(&r1_field), sup_norm(&r2_field), sup_norm(&r3_field))
}

/// Pointwise densities |nabla nabla-bar v|^2 and |nabla nabla v|^2 of an
/// invariant function in the reduced coordinates.
fn hessian_densities(s: &MetricState, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let bg = &s.background;
    let n1 = (bg.dim - 1) as f64;
    let prof = s.profile_cur();
    let fx = s.ddx(f);
    let phi_fx: Vec<f64> = prof.iter().zip(&fx).map(|(p, d)| p * d).collect();
    let d_phi_fx = s.ddx(&phi_fx);
    let fxx = s.ddx(&fx);
    let mixed: Vec<f64> = (0..s.len())
        .map(|i| {
            let base = if bg.dim > 1 {
                let r = phi_fx[i] / s.tau_cur[i];
                n1 * r * r
            } else {
                0.0
            };
            d_phi_fx[i] * d_phi_fx[i] + base
        })
        .collect();
    let anti: Vec<f64> = (0..s.len())
        .map(|i| {
            let v = prof[i] * fxx[i];
            v * v
        })
        .collect();
    (mixed, anti)
}

/// h-evolution consistency: along the flow, d/dt h = -h (R - n - div X) up to
/// the constant channel; returns the sup residual of the centered forms.
pub fn h_evolution_residual(prev: &MetricState, mid: &MetricState, next: &MetricState, x: &VectorField) -> f64 {
    let dt = mid.t - prev.t;
    let dh_dt: Vec<f64> = (0..mid.len())
        .map(|i| (next.h[i] - prev.h[i]) / (2.0 * dt))
        .collect();
    let res = functionals::residual_field(mid, x);
    // log-derivative form avoids the channel: d/dt log h = -(R - n - divX)
    let field: Vec<f64> = (0..mid.len())
        .map(|i| dh_dt[i] / mid.h[i] + res[i])
        .collect();
    sup_norm(&field)
}
