//! Scalar functionals and identity residuals of the flow: the weighted
//! Dirichlet energy Y_X, the modified Mabuchi energy along two routes, the
//! modified Futaki invariant, curvature residual norms and the
//! Bochner-Kodaira identity residual.

use crate::geometry::{
    apply_x, divergence_x, grad_norm_sq, integrate, laplacian, sup_norm, GeomError, MetricState,
    VectorField, Weight,
};
use crate::grid::gauss_legendre_01;
use crate::potentials::{modified_potential, PotentialBundle};

/// Y_X = int |grad u|^2 e^theta omega^n, the central decay quantity.
pub fn y_x(s: &MetricState, _x: &VectorField, bundle: &PotentialBundle) -> f64 {
    let gn = grad_norm_sq(s, &bundle.u);
    let et = bundle.exp_theta();
    integrate(s, &gn, Weight::Field(&et))
}

/// Sup and L^2(omega^n) norms of R - n - div X.
pub fn residual_norms(s: &MetricState, x: &VectorField) -> (f64, f64) {
    let field = residual_field(s, x);
    let c0 = sup_norm(&field);
    let sq: Vec<f64> = field.iter().map(|v| v * v).collect();
    let l2 = integrate(s, &sq, Weight::Plain).sqrt();
    (c0, l2)
}

/// The soliton residual field R - n - div X of the current metric.
pub fn residual_field(s: &MetricState, x: &VectorField) -> Vec<f64> {
    let n = s.background.dim as f64;
    let div = divergence_x(s, x);
    s.ricci
        .iter()
        .zip(&div)
        .map(|(r, d)| r - n - d)
        .collect()
}

/// Modified Futaki invariant paired with the canonical generator W:
/// F_X(W) = -int (W u) e^theta omega^n.
pub fn futaki(s: &MetricState, _x: &VectorField, bundle: &PotentialBundle) -> f64 {
    let wu = apply_x(s, &bundle.u, &VectorField::new(1.0));
    let et = bundle.exp_theta();
    -integrate(s, &wu, Weight::Field(&et))
}

/// Max pairwise spread of F_X(W) across a list of states; the invariant is
/// metric-independent so the spread is pure discretization error.
pub fn futaki_invariance_residual(states: &[MetricState], x: &VectorField) -> f64 {
    let vals: Vec<f64> = states
        .iter()
        .map(|s| futaki(s, x, &modified_potential(s, x)))
        .collect();
    let mut worst = 0.0f64;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            worst = worst.max((vals[i] - vals[j]).abs());
        }
    }
    worst
}

/// Modified Mabuchi energy of the state reached by the straight path
/// a -> a * psi, integrated with Gauss-Legendre in the path parameter.
///
/// mu_X(psi) = -(1/V) int_0^1 int psi (R - n - div X - X u) e^theta omega^n da
pub fn mabuchi_energy_path(
    s: &MetricState,
    x: &VectorField,
    gl_points: usize,
) -> Result<f64, GeomError> {
    let bg = &s.background;
    let (nodes, weights) = gauss_legendre_01(gl_points);
    let mut total = 0.0;
    for (&a, &w) in nodes.iter().zip(&weights) {
        let psi_a: Vec<f64> = s.psi.iter().map(|v| a * v).collect();
        let sa = MetricState::new(bg.clone(), psi_a, s.t)?;
        let bundle = modified_potential(&sa, x);
        let div = divergence_x(&sa, x);
        let xu = apply_x(&sa, &bundle.u, x);
        let n = bg.dim as f64;
        let integrand: Vec<f64> = (0..sa.len())
            .map(|i| s.psi[i] * (sa.ricci[i] - n - div[i] - xu[i]))
            .collect();
        let et = bundle.exp_theta();
        total += w * integrate(&sa, &integrand, Weight::Field(&et));
    }
    Ok(-total / bg.volume)
}

/// Modified Mabuchi energy along a run from the sampled Y_X series:
/// mu(t) = mu(0) - (1/V) int_0^t Y_X ds by the trapezoid rule.
pub fn mabuchi_energy_flow(times: &[f64], y_series: &[f64], mu0: f64, volume: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            let dt = times[i] - times[i - 1];
            acc += 0.5 * dt * (y_series[i] + y_series[i - 1]);
        }
        out.push(mu0 - acc / volume);
    }
    out
}

/// Bochner-Kodaira identity residual in the invariant-sector reduction.
///
/// The four densities against the momentum variable x (current coordinates,
/// profile phi): |nabla nabla-bar u|^2 = ((phi u_x)_x)^2 + (n-1)(phi u_x/x)^2,
/// |nabla-bar nabla-bar u|^2 = phi^2 u_xx^2, the Ricci term
/// -(log(x^{n-1} phi))'' u_x^2 in the cylinder variable, and the X-term
/// theta'' u_x^2.
pub fn bochner_residual(s: &MetricState, x: &VectorField, bundle: &PotentialBundle) -> f64 {
    let bg = &s.background;
    let n1 = (bg.dim - 1) as f64;
    let prof = s.profile_cur();
    let ux = s.ddx(&bundle.u);
    let phi_ux: Vec<f64> = prof.iter().zip(&ux).map(|(p, d)| p * d).collect();
    let d_phi_ux = s.ddx(&phi_ux);
    let uxx = s.ddx(&ux);

    let et = bundle.exp_theta();

    // |nabla nabla-bar u|^2 density
    let hess_mixed: Vec<f64> = (0..s.len())
        .map(|i| {
            let base = if bg.dim > 1 {
                let r = phi_ux[i] / s.tau_cur[i];
                n1 * r * r
            } else {
                0.0
            };
            d_phi_ux[i] * d_phi_ux[i] + base
        })
        .collect();
    let lhs = integrate(s, &hess_mixed, Weight::Field(&et));

    // |nabla-bar nabla-bar u|^2 density
    let hess_anti: Vec<f64> = (0..s.len())
        .map(|i| {
            let v = prof[i] * uxx[i];
            v * v
        })
        .collect();
    let term_anti = integrate(s, &hess_anti, Weight::Field(&et));

    // Ricci term: -Q''(rho) u_x^2 with Q = log(x^{n-1} phi) and
    // Q'' = phi (phi Q_x)_x in the cylinder variable. phi Q_x =
    // (n-1) phi / x + phi_x stays regular through the boundary degeneracy.
    let phix = s.ddx(&prof);
    let phi_qx: Vec<f64> = (0..s.len())
        .map(|i| {
            let base = if bg.dim > 1 { n1 * prof[i] / s.tau_cur[i] } else { 0.0 };
            base + phix[i]
        })
        .collect();
    let d_phi_qx = s.ddx(&phi_qx);
    let ricci_density: Vec<f64> = (0..s.len())
        .map(|i| -prof[i] * d_phi_qx[i] * ux[i] * ux[i])
        .collect();
    let term_ricci = integrate(s, &ricci_density, Weight::Field(&et));

    // X term: theta''(rho) u_x^2 = c sigma phi phi_x u_x^2
    let cs = x.c * bg.gen_slope;
    let x_density: Vec<f64> = (0..s.len())
        .map(|i| cs * prof[i] * phix[i] * ux[i] * ux[i])
        .collect();
    let term_x = integrate(s, &x_density, Weight::Field(&et));

    (lhs - term_anti - term_ricci + term_x).abs()
}

/// Ratio |u - b|_C0^{n+1} / (|grad u|_L2 |grad u|_C0^n) from the L2/C0
/// Poincare inequality; returns 0 when the gradient is negligible.
pub fn poincare_ratio(s: &MetricState, bundle: &PotentialBundle) -> f64 {
    let n = s.background.dim as f64;
    let gn = grad_norm_sq(s, &bundle.u);
    let grad_c0 = sup_norm(&gn).sqrt();
    let grad_l2 = integrate(s, &gn, Weight::Plain).sqrt();
    if grad_l2 < 1e-14 || grad_c0 < 1e-14 {
        return 0.0;
    }
    let ub: Vec<f64> = bundle.u.iter().map(|v| v - bundle.b).collect();
    sup_norm(&ub).powf(n + 1.0) / (grad_l2 * grad_c0.powf(n))
}

/// Smoothing-lemma sample pairs along a run: for each t0 with t0 + 2 inside
/// the horizon, (t0, |u-b|_C0(t0), |grad u|_C0(t0+2) + |Delta u|_C0(t0+2)).
pub fn smoothing_check(
    times: &[f64],
    u_minus_b_c0: &[f64],
    grad_u_c0: &[f64],
    lap_u_c0: &[f64],
    stride: usize,
) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    if times.len() < 2 {
        return out;
    }
    let dt = times[1] - times[0];
    let lag = (2.0 / dt).round() as usize;
    let mut i = 0;
    while i + lag < times.len() {
        out.push((
            times[i],
            u_minus_b_c0[i],
            grad_u_c0[i + lag] + lap_u_c0[i + lag],
        ));
        i += stride.max(1);
    }
    out
}

/// L2-route consistency: int (R-n-divX)^2 omega^n computed from curvature
/// fields equals int (Delta u)^2 omega^n from the potential field.
pub fn residual_l2_identity_gap(s: &MetricState, x: &VectorField, bundle: &PotentialBundle) -> f64 {
    let field = residual_field(s, x);
    let sq: Vec<f64> = field.iter().map(|v| v * v).collect();
    let lhs = integrate(s, &sq, Weight::Plain);
    let lap_u = laplacian(s, &bundle.u);
    let sq2: Vec<f64> = lap_u.iter().map(|v| v * v).collect();
    let rhs = integrate(s, &sq2, Weight::Plain);
    (lhs - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Background;
    use std::f64::consts::PI;

    fn perturbed_cp1(n: usize, amp: f64) -> MetricState {
        let bg = Background::cp1(n).unwrap();
        let mut psi: Vec<f64> = bg
            .grid
            .nodes
            .iter()
            .map(|t| amp * (3.0 * (t - 1.0) * (t - 1.0) - 1.0) / 2.0)
            .collect();
        bg.center(&mut psi);
        MetricState::new(bg, psi, 0.0).unwrap()
    }

    #[test]
    fn y_x_zero_and_quadratic_scaling() {
        let bg = Background::cp1(65).unwrap();
        let s0 = MetricState::background_state(bg);
        let x = VectorField::zero();
        let b0 = modified_potential(&s0, &x);
        assert!(y_x(&s0, &x, &b0) < 1e-20);

        // Y0 = O(eps^2) for psi = eps (tau-1)^2 style perturbations
        let y_at = |eps: f64| {
            let s = perturbed_cp1(65, eps);
            let b = modified_potential(&s, &x);
            y_x(&s, &x, &b)
        };
        let y1 = y_at(0.02);
        let y2 = y_at(0.01);
        assert!(y1 > 0.0);
        let ratio = y1 / y2;
        assert!((ratio - 4.0).abs() < 0.4, "quadratic scaling ratio {ratio}");
    }

    #[test]
    fn residual_norms_fs_with_c() {
        // FS with c = 0.3: res_C0 = max |0.3 (1 - tau)| = 0.3,
        // and res_L2 <= sqrt(V) res_C0 always
        let bg = Background::cp1(97).unwrap();
        let s = MetricState::background_state(bg.clone());
        let x = VectorField::new(0.3);
        let (c0, l2) = residual_norms(&s, &x);
        assert!((c0 - 0.3).abs() < 1e-9);
        assert!(l2 <= bg.volume.sqrt() * c0 + 1e-12);
        // frozen value: int (0.3(1-tau))^2 pi dtau = 0.09 * pi * 2/3
        let exact = (0.09 * PI * 2.0 / 3.0f64).sqrt();
        assert!((l2 - exact).abs() < 1e-9);
    }

    #[test]
    fn residual_l2_identity() {
        let s = perturbed_cp1(97, 0.05);
        let x = VectorField::new(0.4);
        let bundle = modified_potential(&s, &x);
        assert!(residual_l2_identity_gap(&s, &x, &bundle) < 1e-6);
    }

    #[test]
    fn futaki_fs_oracle() {
        // classical Futaki of CP1 vanishes at FS
        let bg = Background::cp1(97).unwrap();
        let s = MetricState::background_state(bg.clone());
        let x0 = VectorField::zero();
        let b0 = modified_potential(&s, &x0);
        assert!(futaki(&s, &x0, &b0).abs() < 1e-9);

        // c = 0.5: F = -pi c int phi0 e^{c(tau-kappa)} dtau < 0, checked
        // against a dense Simpson quadrature oracle
        let x = VectorField::new(0.5);
        let b = modified_potential(&s, &x);
        let f = futaki(&s, &x, &b);
        assert!(f < 0.0);
        let kappa = {
            // int_0^2 e^{0.5(tau-kappa)} dtau = 2
            let raw = (2.0 * (0.5f64 * 2.0).exp() - 2.0) / (0.5 * 2.0);
            (raw / 2.0).ln() / 0.5
        };
        let mut simpson = 0.0;
        let m = 2000;
        let h = 2.0 / m as f64;
        for i in 0..=m {
            let t = i as f64 * h;
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            simpson += w * (t * (2.0 - t) / 2.0) * (0.5 * (t - kappa)).exp();
        }
        simpson *= h / 3.0;
        let oracle = -PI * 0.5 * simpson;
        assert!((f - oracle).abs() < 1e-8, "futaki {f} vs oracle {oracle}");
    }

    #[test]
    fn futaki_invariance_and_refinement() {
        let x = VectorField::new(0.5);
        let spread_at = |n: usize| {
            let bg = Background::cp1(n).unwrap();
            let states: Vec<MetricState> = [0.0, 0.04, 0.08, -0.05]
                .iter()
                .map(|&amp| {
                    let mut psi: Vec<f64> = bg
                        .grid
                        .nodes
                        .iter()
                        .map(|t| amp * ((1.3 * t).sin() + 0.5 * t * t))
                        .collect();
                    bg.center(&mut psi);
                    MetricState::new(bg.clone(), psi, 0.0).unwrap()
                })
                .collect();
            futaki_invariance_residual(&states, &x)
        };
        let s33 = spread_at(33);
        let s66 = spread_at(66);
        assert!(s66 < 1e-6, "invariance residual {s66}");
        assert!(s66 < s33 / 4.0 || s66 < 1e-12, "{s33} -> {s66}");
    }

    #[test]
    fn mabuchi_zero_cases() {
        let bg = Background::cp1(65).unwrap();
        let s0 = MetricState::background_state(bg.clone());
        let x = VectorField::new(0.3);
        assert!(mabuchi_energy_path(&s0, &x, 24).unwrap().abs() < 1e-12);
        // psi = const: the integrand has zero mean by the weighted
        // divergence identity
        let s_const = MetricState::new(bg, vec![0.25; s0.len()], 0.0).unwrap();
        assert!(mabuchi_energy_path(&s_const, &x, 24).unwrap().abs() < 1e-9);
    }

    #[test]
    fn bochner_identity_on_fs_test_field() {
        // FS, c=0, u = tau - 1: both Hessian terms evaluate in closed form,
        // lhs = int (Delta u)^2 = 2 pi / 3 and the Ricci term equals it
        let bg = Background::cp1(97).unwrap();
        let s = MetricState::background_state(bg.clone());
        let x = VectorField::zero();
        let u: Vec<f64> = bg.grid.nodes.iter().map(|t| t - 1.0).collect();
        let fake = PotentialBundle {
            theta: vec![0.0; s.len()],
            f: u.clone(),
            u,
            b: 0.0,
            kappa_theta: 0.0,
            kappa_f: 0.0,
        };
        // identity residual vanishes
        assert!(bochner_residual(&s, &x, &fake) < 1e-9);
        // and the mixed-Hessian side equals the frozen closed form
        let prof = s.profile_cur();
        let ux = s.ddx(&fake.u);
        let phi_ux: Vec<f64> = prof.iter().zip(&ux).map(|(p, d)| p * d).collect();
        let d = s.ddx(&phi_ux);
        let dens: Vec<f64> = d.iter().map(|v| v * v).collect();
        let lhs = integrate(&s, &dens, Weight::Plain);
        assert!((lhs - 2.0 * PI / 3.0).abs() < 1e-9);
    }

    #[test]
    fn bochner_residual_small_and_shrinks_under_refinement() {
        let res_at = |n: usize| {
            let bg = Background::cp1(n).unwrap();
            let mut psi: Vec<f64> = bg
                .grid
                .nodes
                .iter()
                .map(|t| 0.06 * (1.1 * t).sin() * (2.0 - t))
                .collect();
            bg.center(&mut psi);
            let s = MetricState::new(bg, psi, 0.0).unwrap();
            let x = VectorField::new(0.4);
            let bundle = modified_potential(&s, &x);
            bochner_residual(&s, &x, &bundle)
        };
        let r1 = res_at(33);
        let r2 = res_at(66);
        assert!(r2 < 1e-6, "bochner residual {r2}");
        assert!(r2 < r1 / 4.0 || r2 < 1e-12, "{r1} -> {r2}");
    }

    #[test]
    fn bochner_residual_f1() {
        // the n = 2 invariant-sector reduction must also satisfy the identity
        let res_at = |n: usize| {
            let bg = Background::f1(n).unwrap();
            let mut psi: Vec<f64> = bg
                .grid
                .nodes
                .iter()
                .map(|t| 0.05 * ((t - 2.0) * 1.7).sin())
                .collect();
            bg.center(&mut psi);
            let s = MetricState::new(bg, psi, 0.0).unwrap();
            let x = VectorField::new(0.3);
            let bundle = modified_potential(&s, &x);
            bochner_residual(&s, &x, &bundle)
        };
        let r1 = res_at(41);
        let r2 = res_at(82);
        assert!(r2 < 1e-6, "bochner residual n=2: {r2}");
        assert!(r2 < r1 / 4.0 || r2 < 1e-12, "{r1} -> {r2}");
    }

    #[test]
    fn poincare_ratio_properties() {
        let s = perturbed_cp1(81, 0.08);
        let x = VectorField::new(0.2);
        let bundle = modified_potential(&s, &x);
        let r = poincare_ratio(&s, &bundle);
        assert!(r > 0.0 && r.is_finite());
        // scale invariance under u -> a u (homogeneity degree n+1 both sides)
        let mut scaled = bundle.clone();
        for v in scaled.u.iter_mut() {
            *v *= 3.0;
        }
        scaled.b *= 3.0;
        let r3 = poincare_ratio(&s, &scaled);
        assert!((r3 - r).abs() < 1e-10 * r.max(1.0));
        // constant u gives 0
        let s0 = MetricState::background_state(Background::cp1(65).unwrap());
        let fake = PotentialBundle {
            theta: vec![0.0; s0.len()],
            f: vec![0.0; s0.len()],
            u: vec![0.4; s0.len()],
            b: 0.4,
            kappa_theta: 0.0,
            kappa_f: 0.0,
        };
        assert_eq!(poincare_ratio(&s0, &fake), 0.0);
    }

    #[test]
    fn smoothing_pairs_shape() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let ub: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let gu: Vec<f64> = times.iter().map(|t| 0.5 * (-t).exp()).collect();
        let lu: Vec<f64> = times.iter().map(|t| 0.7 * (-t).exp()).collect();
        let pairs = smoothing_check(&times, &ub, &gu, &lu, 10);
        assert!(!pairs.is_empty());
        for (t0, input, output) in &pairs {
            // exact exponential: output = 1.2 e^{-2} * input
            let expected = 1.2 * (-2.0f64).exp() * input;
            assert!((output - expected).abs() < 1e-12, "at {t0}");
        }
    }
}
