//! Hamiltonian, Ricci potential and modified Ricci potential with their
//! volume normalizations.
//!
//! theta = theta_0 + X psi + kappa_theta with int e^theta omega^n = V;
//! f = f0 + psi + log h + kappa_f with int e^{-f} omega^n = V; u = f + theta.
//! Both normalization constants have closed forms because they enter as pure
//! exponential prefactors.

use crate::geometry::{integrate, MetricState, VectorField, Weight};

/// Potentials of a state together with the constants used to normalize them.
#[derive(Debug, Clone)]
pub struct PotentialBundle {
    pub theta: Vec<f64>,
    pub f: Vec<f64>,
    pub u: Vec<f64>,
    pub b: f64,
    pub kappa_theta: f64,
    pub kappa_f: f64,
}

impl PotentialBundle {
    pub fn exp_theta(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.exp()).collect()
    }

    pub fn exp_minus_f(&self) -> Vec<f64> {
        self.f.iter().map(|f| (-f).exp()).collect()
    }
}

/// Hamiltonian of X with the volume normalization. By the Hamiltonian update
/// rule theta = theta_0 + X psi, i.e. c sigma times the current momentum map,
/// plus the constant fixing int e^theta omega^n = V.
pub fn hamiltonian_theta(s: &MetricState, x: &VectorField) -> Vec<f64> {
    let cs = x.c * s.background.gen_slope;
    let unnorm: Vec<f64> = s.tau_cur.iter().map(|v| cs * v).collect();
    normalize_theta(s, unnorm)
}

fn normalize_theta(s: &MetricState, mut unnorm: Vec<f64>) -> Vec<f64> {
    let e: Vec<f64> = unnorm.iter().map(|v| v.exp()).collect();
    let mass = integrate(s, &e, Weight::Plain);
    let kappa = (s.background.volume / mass).ln();
    for v in unnorm.iter_mut() {
        *v += kappa;
    }
    unnorm
}

/// Independent route to theta: solve d theta / d tau = c sigma D from the
/// defining equation of the Hamiltonian, then normalize. Used to audit the
/// update-rule route.
pub fn hamiltonian_theta_direct(s: &MetricState, x: &VectorField) -> Vec<f64> {
    let cs = x.c * s.background.gen_slope;
    let rhs: Vec<f64> = s.stretch.iter().map(|d| cs * d).collect();
    let unnorm = s.grid().cumulative_integral(&rhs);
    normalize_theta(s, unnorm)
}

/// Ricci potential f = f0 + psi + log h + kappa_f of the current metric.
///
/// The closed-form potential identity replaces a Poisson solve; the trace
/// identity Delta f = n - R remains available as a cross-check.
pub fn ricci_potential(s: &MetricState) -> (Vec<f64>, f64) {
    let bg = &s.background;
    let mut f: Vec<f64> = (0..s.len())
        .map(|i| bg.f0[i] + s.psi[i] + s.h[i].ln())
        .collect();
    // int e^{-f} h m = int e^{-(f0+psi)} m: independent of h
    let weighted: Vec<f64> = (0..s.len())
        .map(|i| (-(bg.f0[i] + s.psi[i])).exp() * bg.dh_weight[i])
        .collect();
    let mass = bg.grid.integrate(&weighted);
    let kappa = (mass / bg.volume).ln();
    for v in f.iter_mut() {
        *v += kappa;
    }
    (f, kappa)
}

/// Full potential bundle: theta, f, u = f + theta and the average b.
pub fn modified_potential(s: &MetricState, x: &VectorField) -> PotentialBundle {
    let theta = hamiltonian_theta(s, x);
    let (f, kappa_f) = ricci_potential(s);
    let u: Vec<f64> = f.iter().zip(&theta).map(|(a, b)| a + b).collect();
    let kappa_theta = {
        let cs = x.c * s.background.gen_slope;
        theta[0] - cs * s.tau_cur[0]
    };
    let mut bundle = PotentialBundle { theta, f, u, b: 0.0, kappa_theta, kappa_f };
    bundle.b = average_b(s, &bundle);
    bundle
}

/// b = (1/V) int u e^{-f} omega^n.
pub fn average_b(s: &MetricState, bundle: &PotentialBundle) -> f64 {
    let emf = bundle.exp_minus_f();
    integrate(s, &bundle.u, Weight::Field(&emf)) / s.background.volume
}

/// Mean of u against the e^theta weight, (1/V) int u e^theta omega^n;
/// the scalar entering the constant-channel reconstruction.
pub fn mean_theta_u(s: &MetricState, bundle: &PotentialBundle) -> f64 {
    let et = bundle.exp_theta();
    integrate(s, &bundle.u, Weight::Field(&et)) / s.background.volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_x, divergence_x, grad_norm_sq, laplacian, sup_norm, Background, x_norm_sq};
    use crate::grid::build_grid;

    #[test]
    fn theta_vanishes_for_zero_field() {
        let bg = Background::cp1(65).unwrap();
        let s = MetricState::background_state(bg);
        let th = hamiltonian_theta(&s, &VectorField::zero());
        assert!(sup_norm(&th) < 1e-14);
    }

    #[test]
    fn theta_normalization_against_bisection_oracle() {
        // FS, c = 1: theta = tau - kappa with int_0^2 e^{tau-kappa} dtau = 2,
        // i.e. kappa = ln((e^2 - 1)/2).
        let bg = Background::cp1(97).unwrap();
        let s = MetricState::background_state(bg.clone());
        let x = VectorField::new(1.0);
        let th = hamiltonian_theta(&s, &x);
        let kappa = ((2f64.exp() - 1.0) / 2.0).ln();
        for (i, &t) in bg.grid.nodes.iter().enumerate() {
            assert!((th[i] - (t - kappa)).abs() < 1e-10);
        }
        // definitional: int e^theta = V
        let et: Vec<f64> = th.iter().map(|v| v.exp()).collect();
        assert!((integrate(&s, &et, Weight::Plain) - bg.volume).abs() < 1e-9 * bg.volume);
    }

    #[test]
    fn theta_dual_path_agreement() {
        let bg = Background::cp1(81).unwrap();
        let psi: Vec<f64> = bg.grid.nodes.iter().map(|t| 0.07 * (1.3 * t).sin()).collect();
        let s = MetricState::new(bg, psi, 0.0).unwrap();
        let x = VectorField::new(0.6);
        let a = hamiltonian_theta(&s, &x);
        let b = hamiltonian_theta_direct(&s, &x);
        let diff = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0f64, f64::max);
        assert!(diff < 1e-8, "dual theta paths differ by {diff}");
    }

    #[test]
    fn ricci_potential_fs_is_zero_and_shift_invariant() {
        let bg = Background::cp1(65).unwrap();
        let s = MetricState::background_state(bg.clone());
        let (f, _) = ricci_potential(&s);
        assert!(sup_norm(&f) < 1e-12);
        // adding a constant to psi leaves f unchanged
        let psi: Vec<f64> = bg.grid.nodes.iter().map(|t| 0.05 * t * (2.0 - t)).collect();
        let s1 = MetricState::new(bg.clone(), psi.clone(), 0.0).unwrap();
        let psi2: Vec<f64> = psi.iter().map(|v| v + 0.37).collect();
        let s2 = MetricState::new(bg, psi2, 0.0).unwrap();
        let (f1, _) = ricci_potential(&s1);
        let (f2, _) = ricci_potential(&s2);
        let diff = f1.iter().zip(&f2).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn ricci_potential_trace_identity() {
        // Delta_g f = n - R pointwise, the traced defining equation
        let bg = Background::cp1(97).unwrap();
        let psi: Vec<f64> = bg.grid.nodes.iter().map(|t| 0.06 * (t * 1.1).cos() * t).collect();
        let s = MetricState::new(bg.clone(), psi, 0.0).unwrap();
        let (f, _) = ricci_potential(&s);
        let lap_f = laplacian(&s, &f);
        for i in 0..s.len() {
            let rhs = 1.0 - s.ricci[i];
            assert!((lap_f[i] - rhs).abs() < 1e-6, "trace identity at node {i}");
        }
    }

    #[test]
    fn bundle_invariants_and_u_identity() {
        let bg = Background::cp1(97).unwrap();
        let psi: Vec<f64> = bg.grid.nodes.iter().map(|t| 0.08 * (0.9 * t).sin() * (2.0 - t)).collect();
        let s = MetricState::new(bg.clone(), psi, 0.0).unwrap();
        let x = VectorField::new(0.4);
        let bundle = modified_potential(&s, &x);
        // u = f + theta pointwise exactly
        for i in 0..s.len() {
            assert_eq!(bundle.u[i], bundle.f[i] + bundle.theta[i]);
        }
        // normalizations
        let et = bundle.exp_theta();
        let emf = bundle.exp_minus_f();
        let ones = vec![1.0; s.len()];
        assert!((integrate(&s, &ones, Weight::Field(&et)) - bg.volume).abs() < 1e-9 * bg.volume);
        assert!((integrate(&s, &ones, Weight::Field(&emf)) - bg.volume).abs() < 1e-9 * bg.volume);
        // R - n - div X = -(Delta + X) u + X u = -Delta u pointwise
        let lap_u = laplacian(&s, &bundle.u);
        let div = divergence_x(&s, &x);
        for i in 0..s.len() {
            let lhs = s.ricci[i] - 1.0 - div[i];
            assert!((lhs + lap_u[i]).abs() < 1e-6, "residual identity at node {i}");
        }
    }

    #[test]
    fn average_b_constant_cases() {
        let bg = Background::cp1(65).unwrap();
        let s = MetricState::background_state(bg.clone());
        let bundle = modified_potential(&s, &VectorField::zero());
        assert!(bundle.b.abs() < 1e-12);
        // u = const kappa integrates to kappa
        let fake = PotentialBundle {
            theta: vec![0.0; s.len()],
            f: vec![0.0; s.len()],
            u: vec![0.7; s.len()],
            b: 0.0,
            kappa_theta: 0.0,
            kappa_f: 0.0,
        };
        assert!((average_b(&s, &fake) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn average_b_grid_refinement() {
        let b_at = |n: usize| {
            let bg = Background::cp1(n).unwrap();
            let mut psi: Vec<f64> = bg.grid.nodes.iter().map(|t| 0.1 * (t - 1.0).powi(2)).collect();
            bg.center(&mut psi);
            let s = MetricState::new(bg, psi, 0.0).unwrap();
            modified_potential(&s, &VectorField::new(0.3)).b
        };
        assert!((b_at(65) - b_at(129)).abs() < 1e-8);
    }

    #[test]
    fn grad_theta_matches_x_norm() {
        // |grad theta|_C0 = |X|_C0 within 1e-7 on any state
        let bg = Background::cp1(97).unwrap();
        let psi: Vec<f64> = bg.grid.nodes.iter().map(|t| 0.05 * (1.7 * t).sin()).collect();
        let s = MetricState::new(bg, psi, 0.0).unwrap();
        let x = VectorField::new(0.8);
        let th = hamiltonian_theta(&s, &x);
        let gt = grad_norm_sq(&s, &th);
        let xn = x_norm_sq(&s, &x);
        let diff = gt.iter().zip(&xn).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        assert!(diff < 1e-7);
    }

    #[test]
    fn weighted_divergence_identity() {
        // int (Delta eta + X eta) e^theta omega^n = 0
        let bg = Background::cp1(97).unwrap();
        let psi: Vec<f64> = bg.grid.nodes.iter().map(|t| 0.04 * t * (2.0 - t) * (t - 0.3)).collect();
        let s = MetricState::new(bg.clone(), psi, 0.0).unwrap();
        let x = VectorField::new(0.5);
        let bundle = modified_potential(&s, &x);
        let eta: Vec<f64> = bg.grid.nodes.iter().map(|t| (2.3 * t).cos() + 0.2 * t * t).collect();
        let lap = laplacian(&s, &eta);
        let xe = apply_x(&s, &eta, &x);
        let sum: Vec<f64> = lap.iter().zip(&xe).map(|(a, b)| a + b).collect();
        let et = bundle.exp_theta();
        assert!(integrate(&s, &sum, Weight::Field(&et)).abs() < 1e-7);
    }

    #[test]
    fn poincare_inequality_weighted() {
        // (1/V) int eta^2 e^{-f} <= (1/V) int |grad eta|^2 e^{-f} for eta with
        // zero e^{-f}-mean
        let bg = Background::cp1(97).unwrap();
        let psi: Vec<f64> = bg.grid.nodes.iter().map(|t| 0.06 * (1.2 * t).sin()).collect();
        let s = MetricState::new(bg.clone(), psi, 0.0).unwrap();
        let bundle = modified_potential(&s, &VectorField::new(0.2));
        let emf = bundle.exp_minus_f();
        for k in 0..4 {
            let mut eta: Vec<f64> = bg
                .grid
                .nodes
                .iter()
                .map(|t| ((k as f64 + 1.1) * t).sin() + 0.3 * t)
                .collect();
            let mean = integrate(&s, &eta, Weight::Field(&emf)) / bg.volume;
            for v in eta.iter_mut() {
                *v -= mean;
            }
            let lhs = integrate(
                &s,
                &eta.iter().map(|v| v * v).collect::<Vec<_>>(),
                Weight::Field(&emf),
            ) / bg.volume;
            let gn = grad_norm_sq(&s, &eta);
            let rhs = integrate(&s, &gn, Weight::Field(&emf)) / bg.volume;
            assert!(lhs <= rhs + 1e-7, "poincare violated: {lhs} > {rhs}");
        }
    }

    #[test]
    fn theta_image_invariance_along_states() {
        // min/max of theta/c sit at the momentum interval endpoints shifted
        // by the normalization constant
        let bg = Background::cp1(81).unwrap();
        let x = VectorField::new(0.7);
        let mut ranges = Vec::new();
        for amp in [0.0, 0.04, 0.08] {
            let mut psi: Vec<f64> = bg.grid.nodes.iter().map(|t| amp * (t * 1.4).sin()).collect();
            bg.center(&mut psi);
            let s = MetricState::new(bg.clone(), psi, 0.0).unwrap();
            let th = hamiltonian_theta(&s, &x);
            let scaled: Vec<f64> = th.iter().map(|v| v / x.c).collect();
            let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            ranges.push(hi - lo);
        }
        for r in &ranges {
            assert!((r - 2.0).abs() < 1e-6, "theta image width {r}");
        }
    }

    #[test]
    fn f1_koiso_direction_sanity() {
        // on the F1 background the Futaki-type pairing of W with u0 = f0 is
        // positive for the chosen generator orientation
        let bg = Background::f1(97).unwrap();
        let s = MetricState::background_state(bg.clone());
        let bundle = modified_potential(&s, &VectorField::zero());
        let wu = apply_x(&s, &bundle.u, &VectorField::new(1.0));
        let fut = -integrate(&s, &wu, Weight::Plain);
        // frozen quadrature oracle: -int W f0 omega^2 = 2 pi^2 * 2/3
        let exact = 2.0 * std::f64::consts::PI.powi(2) * (2.0 / 3.0);
        assert!((fut - exact).abs() < 1e-8 * exact, "{fut} vs {exact}");
    }

    #[test]
    fn theta_normalization_fine_grid_consistency() {
        // normalization constant agrees across grid resolutions; theta at the
        // left endpoint (tau = 0) is exactly kappa for c = 1 on CP1
        let kappa_at = |n: usize| {
            let bg = Background::cp1(n).unwrap();
            let s = MetricState::background_state(bg);
            hamiltonian_theta(&s, &VectorField::new(1.0))[0]
        };
        assert!((kappa_at(65) - kappa_at(129)).abs() < 1e-10);
    }
}
