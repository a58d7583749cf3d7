//! Symmetry-reduced Fano backgrounds and the geometric operators acting on
//! metric states.
//!
//! A metric in the invariant Kahler class is a relative potential psi on the
//! fixed background momentum grid. Writing tau for the background momentum,
//! the current momentum map is tau~ = tau + phi0 psi_tau, the fiber stretch is
//! D = d tau~/d tau, and every operator of the current metric reduces to a 1D
//! differential expression through the current profile phi~ = phi0 * D.

use crate::grid::{self, GridError, Interp, MomentumGrid};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("degenerate metric: volume ratio reaches {min:.3e} at tau = {at:.6}")]
    DegenerateMetric { min: f64, at: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundId {
    Cp1,
    F1,
}

impl BackgroundId {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cp1" => Some(BackgroundId::Cp1),
            "f1" => Some(BackgroundId::F1),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BackgroundId::Cp1 => "cp1",
            BackgroundId::F1 => "f1",
        }
    }
}

/// The holomorphic vector field X = c W, W the canonical invariant generator
/// of the background.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VectorField {
    pub c: f64,
}

impl VectorField {
    pub fn new(c: f64) -> Self {
        VectorField { c }
    }

    pub fn zero() -> Self {
        VectorField { c: 0.0 }
    }
}

/// A symmetry-reduced Fano background.
///
/// The Duistermaat-Heckman weight has the monomial form m(tau) =
/// m_coeff * tau^(n-1), which covers both model geometries; gen_slope is the
/// sign sigma in the unnormalized Hamiltonian of the canonical generator,
/// theta_0 = sigma * tau + const.
#[derive(Debug)]
pub struct Background {
    pub id: BackgroundId,
    pub dim: usize,
    pub volume: f64,
    pub grid: MomentumGrid,
    pub fine: MomentumGrid,
    pub interp: Interp,
    pub phi0: Vec<f64>,
    pub dh_weight: Vec<f64>,
    pub m_coeff: f64,
    pub ricci0: Vec<f64>,
    pub f0: Vec<f64>,
    pub slope_a: f64,
    pub slope_b: f64,
    pub gen_slope: f64,
}

impl Background {
    /// CP^1 with the Fubini-Study background: tau in [0, 2],
    /// phi0 = tau(2-tau)/2, m = pi, V = 2 pi, f0 = 0.
    pub fn cp1(n_nodes: usize) -> Result<Arc<Background>, GeomError> {
        let g = grid::build_grid(0.0, 2.0, n_nodes)?;
        let fine = grid::build_grid(0.0, 2.0, 2 * n_nodes + 9)?;
        let interp = g.interp_matrix_to(&fine);
        let phi0: Vec<f64> = g.nodes.iter().map(|t| t * (2.0 - t) / 2.0).collect();
        let dh_weight = vec![PI; g.len()];
        let ricci0 = vec![1.0; g.len()];
        let f0 = vec![0.0; g.len()];
        Ok(Arc::new(Background {
            id: BackgroundId::Cp1,
            dim: 1,
            volume: 2.0 * PI,
            grid: g,
            fine,
            interp,
            phi0,
            dh_weight,
            m_coeff: PI,
            ricci0,
            f0,
            slope_a: 1.0,
            slope_b: -1.0,
            gen_slope: 1.0,
        }))
    }

    /// One-point blow-up of CP^2 (U(2)-invariant Calabi ansatz): tau in [1, 3],
    /// m(tau) = 2 pi^2 tau, V = 8 pi^2, background profile (tau-1)(3-tau)/2.
    ///
    /// The background Ricci potential solves Delta_0 f0 = n - R0 by double
    /// quadrature and is then normalized against the volume. The canonical
    /// generator is oriented toward the exceptional curve so the soliton
    /// coefficient comes out positive.
    pub fn f1(n_nodes: usize) -> Result<Arc<Background>, GeomError> {
        let g = grid::build_grid(1.0, 3.0, n_nodes)?;
        let fine = grid::build_grid(1.0, 3.0, 2 * n_nodes + 9)?;
        let interp = g.interp_matrix_to(&fine);
        let m_coeff = 2.0 * PI * PI;
        let phi0: Vec<f64> = g.nodes.iter().map(|t| (t - 1.0) * (3.0 - t) / 2.0).collect();
        let dh_weight: Vec<f64> = g.nodes.iter().map(|t| m_coeff * t).collect();
        let volume = 8.0 * PI * PI;

        // R0 = (2 - (tau phi0)'') / tau from the profile
        let taup: Vec<f64> = g.nodes.iter().zip(&phi0).map(|(t, p)| t * p).collect();
        let d2 = g.deriv(&g.deriv(&taup));
        let ricci0: Vec<f64> = g
            .nodes
            .iter()
            .zip(&d2)
            .map(|(t, dd)| (2.0 - dd) / t)
            .collect();

        // (m phi0 f0')' = m (n - R0); first quadrature with the regular
        // endpoint limits, second quadrature, then volume normalization.
        let n = 2.0;
        let rhs: Vec<f64> = dh_weight
            .iter()
            .zip(&ricci0)
            .map(|(m, r)| m * (n - r))
            .collect();
        let psi_cum = g.cumulative_integral(&rhs);
        let len = g.len();
        let mut df0 = vec![0.0; len];
        for i in 0..len {
            let mp = dh_weight[i] * phi0[i];
            if i == 0 {
                df0[i] = (n - ricci0[0]) / 1.0; // slope_a = +1
            } else if i == len - 1 {
                df0[i] = (n - ricci0[len - 1]) / -1.0; // slope_b = -1
            } else {
                df0[i] = psi_cum[i] / mp;
            }
        }
        let mut f0 = g.cumulative_integral(&df0);
        // normalize: int e^{-f0} m dtau = V (quadrature failure here would
        // mean the derivation constants are inconsistent)
        let mass: f64 = g.integrate(
            &f0.iter()
                .zip(&dh_weight)
                .map(|(f, m)| (-f).exp() * m)
                .collect::<Vec<_>>(),
        );
        assert!(
            mass.is_finite() && mass > 0.0,
            "background normalization quadrature failed"
        );
        let kappa = (mass / volume).ln();
        for f in f0.iter_mut() {
            *f += kappa;
        }

        Ok(Arc::new(Background {
            id: BackgroundId::F1,
            dim: 2,
            volume,
            grid: g,
            fine,
            interp,
            phi0,
            dh_weight,
            m_coeff,
            ricci0,
            f0,
            slope_a: 1.0,
            slope_b: -1.0,
            gen_slope: -1.0,
        }))
    }

    pub fn build(id: BackgroundId, n_nodes: usize) -> Result<Arc<Background>, GeomError> {
        match id {
            BackgroundId::Cp1 => Background::cp1(n_nodes),
            BackgroundId::F1 => Background::f1(n_nodes),
        }
    }

    /// DH weight m(x) evaluated at arbitrary momentum values.
    pub fn dh_at(&self, x: f64) -> f64 {
        if self.dim == 1 {
            self.m_coeff
        } else {
            self.m_coeff * x
        }
    }

    /// Center a field to zero mean against the background measure m dtau.
    pub fn center(&self, f: &mut [f64]) {
        let mean = self.mean_m(f);
        for v in f.iter_mut() {
            *v -= mean;
        }
    }

    /// Mean of a field against the background measure m dtau.
    pub fn mean_m(&self, f: &[f64]) -> f64 {
        self.grid.integrate(
            &f.iter()
                .zip(&self.dh_weight)
                .map(|(v, m)| v * m)
                .collect::<Vec<_>>(),
        ) / self.volume
    }
}

/// Integration weight for `integrate`: plain omega^n or a supplied nodal
/// weight field such as e^theta or e^{-f}.
#[derive(Clone, Copy)]
pub enum Weight<'a> {
    Plain,
    Field(&'a [f64]),
}

/// A metric in the invariant Kahler class: the centered relative potential
/// plus cached derived fields of the current metric.
#[derive(Debug, Clone)]
pub struct MetricState {
    pub background: Arc<Background>,
    pub psi: Vec<f64>,
    pub t: f64,
    pub psi_tau: Vec<f64>,
    /// current momentum map tau~ = tau + phi0 psi_tau
    pub tau_cur: Vec<f64>,
    /// fiber stretch D = d tau~ / d tau (positive on valid states)
    pub stretch: Vec<f64>,
    /// volume ratio h = omega^n / omega_0^n = D m(tau~)/m(tau)
    pub h: Vec<f64>,
    /// scalar curvature of the current metric
    pub ricci: Vec<f64>,
}

impl MetricState {
    pub fn new(background: Arc<Background>, psi: Vec<f64>, t: f64) -> Result<Self, GeomError> {
        let g = &background.grid;
        let psi_tau = g.deriv(&psi);
        let fp: Vec<f64> = background
            .phi0
            .iter()
            .zip(&psi_tau)
            .map(|(p, d)| p * d)
            .collect();
        let tau_cur: Vec<f64> = g.nodes.iter().zip(&fp).map(|(t, v)| t + v).collect();
        let dfp = g.deriv(&fp);
        let stretch: Vec<f64> = dfp.iter().map(|d| 1.0 + d).collect();
        let h: Vec<f64> = if background.dim == 1 {
            stretch.clone()
        } else {
            stretch
                .iter()
                .zip(&tau_cur)
                .zip(g.nodes.iter())
                .map(|((d, xc), x0)| d * xc / x0)
                .collect()
        };
        // Kahler condition: the flow must not leave the cone
        let mut min = f64::INFINITY;
        let mut at = 0.0;
        for (i, (&hv, &dv)) in h.iter().zip(&stretch).enumerate() {
            let worst = hv.min(dv);
            if worst < min {
                min = worst;
                at = g.nodes[i];
            }
        }
        if !(min > 0.0) || !min.is_finite() {
            return Err(GeomError::DegenerateMetric { min, at });
        }

        let ricci = Self::curvature(&background, &tau_cur, &stretch, &h);
        Ok(MetricState { background, psi, t, psi_tau, tau_cur, stretch, h, ricci })
    }

    pub fn background_state(background: Arc<Background>) -> Self {
        let n = background.grid.len();
        MetricState::new(background, vec![0.0; n], 0.0).expect("background state is valid")
    }

    fn curvature(bg: &Background, tau_cur: &[f64], stretch: &[f64], h: &[f64]) -> Vec<f64> {
        let g = &bg.grid;
        if bg.dim == 1 {
            // R = (1 - (phi0 (log h)_tau)_tau) / h
            let logh: Vec<f64> = h.iter().map(|v| v.ln()).collect();
            let dlogh = g.deriv(&logh);
            let inner: Vec<f64> = bg.phi0.iter().zip(&dlogh).map(|(p, d)| p * d).collect();
            let outer = g.deriv(&inner);
            h.iter().zip(&outer).map(|(hv, o)| (1.0 - o) / hv).collect()
        } else {
            // R = (2 - d^2(x phi)/dx^2) / x in current coordinates
            let xphi: Vec<f64> = tau_cur
                .iter()
                .zip(bg.phi0.iter().zip(stretch))
                .map(|(x, (p, d))| x * p * d)
                .collect();
            let d1: Vec<f64> = g
                .deriv(&xphi)
                .iter()
                .zip(stretch)
                .map(|(v, d)| v / d)
                .collect();
            let d2: Vec<f64> = g
                .deriv(&d1)
                .iter()
                .zip(stretch)
                .map(|(v, d)| v / d)
                .collect();
            tau_cur.iter().zip(&d2).map(|(x, dd)| (2.0 - dd) / x).collect()
        }
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.background.grid
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Current momentum profile phi~ = phi0 D at the grid nodes.
    pub fn profile_cur(&self) -> Vec<f64> {
        self.background
            .phi0
            .iter()
            .zip(&self.stretch)
            .map(|(p, d)| p * d)
            .collect()
    }

    /// Derivative with respect to the current momentum coordinate.
    pub fn ddx(&self, f: &[f64]) -> Vec<f64> {
        self.grid()
            .deriv(f)
            .iter()
            .zip(&self.stretch)
            .map(|(v, d)| v / d)
            .collect()
    }
}

/// Volume ratio field h of the current metric.
pub fn volume_ratio(s: &MetricState) -> &[f64] {
    &s.h
}

/// Scalar curvature field of the current metric.
pub fn scalar_curvature(s: &MetricState) -> &[f64] {
    &s.ricci
}

/// Laplacian of an invariant function with respect to the current metric:
/// (m(tau~) phi0 eta_tau)_tau / (m(tau) h).
pub fn laplacian(s: &MetricState, eta: &[f64]) -> Vec<f64> {
    let bg = &s.background;
    let g = &bg.grid;
    let deta = g.deriv(eta);
    let inner: Vec<f64> = s
        .tau_cur
        .iter()
        .zip(bg.phi0.iter().zip(&deta))
        .map(|(x, (p, d))| bg.dh_at(*x) * p * d)
        .collect();
    g.deriv(&inner)
        .iter()
        .zip(bg.dh_weight.iter().zip(&s.h))
        .map(|(v, (m, h))| v / (m * h))
        .collect()
}

/// Squared gradient |grad eta|^2 = phi0 eta_tau^2 / D of the current metric.
pub fn grad_norm_sq(s: &MetricState, eta: &[f64]) -> Vec<f64> {
    let deta = s.grid().deriv(eta);
    s.background
        .phi0
        .iter()
        .zip(deta.iter().zip(&s.stretch))
        .map(|(p, (d, st))| p * d * d / st)
        .collect()
}

/// Directional derivative X eta = c sigma phi0 eta_tau; metric-independent.
pub fn apply_x(s: &MetricState, eta: &[f64], x: &VectorField) -> Vec<f64> {
    let cs = x.c * s.background.gen_slope;
    let deta = s.grid().deriv(eta);
    s.background
        .phi0
        .iter()
        .zip(&deta)
        .map(|(p, d)| cs * p * d)
        .collect()
}

/// Pointwise |X|^2 with respect to the current metric: c^2 phi~.
pub fn x_norm_sq(s: &MetricState, x: &VectorField) -> Vec<f64> {
    let c2 = x.c * x.c;
    s.profile_cur().iter().map(|p| c2 * p).collect()
}

/// Divergence of X with respect to the current metric, computed as
/// Delta theta with theta = c sigma tau~ (the Hamiltonian identity).
pub fn divergence_x(s: &MetricState, x: &VectorField) -> Vec<f64> {
    let cs = x.c * s.background.gen_slope;
    let theta_un: Vec<f64> = s.tau_cur.iter().map(|v| cs * v).collect();
    laplacian(s, &theta_un)
}

/// Second, independent route to the divergence through the chart expansion
/// nabla_j X^j = dX + X log det g; used to audit the Hamiltonian identity.
pub fn divergence_x_direct(s: &MetricState, x: &VectorField) -> Vec<f64> {
    let bg = &s.background;
    let cs = x.c * bg.gen_slope;
    let prof = s.profile_cur();
    let dprof = bg.grid.deriv(&prof);
    let n1 = (bg.dim - 1) as f64;
    (0..s.len())
        .map(|i| {
            let base = if bg.dim > 1 { n1 * prof[i] / s.tau_cur[i] } else { 0.0 };
            cs * (base + dprof[i] / s.stretch[i])
        })
        .collect()
}

/// Integral over the manifold: int eta * weight * omega^n via h m quadrature.
pub fn integrate(s: &MetricState, eta: &[f64], weight: Weight<'_>) -> f64 {
    let bg = &s.background;
    let f: Vec<f64> = match weight {
        Weight::Plain => eta
            .iter()
            .zip(s.h.iter().zip(&bg.dh_weight))
            .map(|(e, (h, m))| e * h * m)
            .collect(),
        Weight::Field(w) => eta
            .iter()
            .zip(w)
            .zip(s.h.iter().zip(&bg.dh_weight))
            .map(|((e, wv), (h, m))| e * wv * h * m)
            .collect(),
    };
    bg.grid.integrate(&f)
}

pub fn sup_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
