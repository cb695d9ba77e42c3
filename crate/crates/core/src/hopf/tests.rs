use super::*;
use crate::model::{presets, velocity_rates};
use std::f64::consts::PI;

fn two_pair(designated_last: bool) -> PlatoonConfig {
    let mut cfg = presets::bando_bifurcation(3.0);
    cfg.n = 2;
    let (other, tc) = (cfg.tau[0], cfg.tau[2]);
    cfg.tau = if designated_last {
        vec![other, tc]
    } else {
        vec![tc, other]
    };
    cfg
}

fn parts(cfg: &PlatoonConfig) -> (HopfSetup, TaylorCoefficients, EigvecData, AdjointData) {
    let s = HopfSetup::new(cfg, None).unwrap();
    let t = taylor_coefficients(cfg, &s.equilibrium, s.kappa_cr).unwrap();
    let e = eigenvector_q(&s);
    let p = adjoint_eigenvector_p(&s, &e).unwrap();
    (s, t, e, p)
}

#[test]
fn taylor_coefficient_structure() {
    let cfg = presets::bando_bifurcation(2.0);
    let eq = cfg.equilibrium().unwrap();
    let t = taylor_coefficients(&cfg, &eq, 1.0).unwrap();
    assert_eq!(t.zeta[0], [0.0; 3]);
    // y* = ym is the inflection point of the Bando OVF
    assert!(t.omega[0][1].abs() < 1e-15);
    assert!(t.omega.iter().all(|o| o[0] < 0.0));

    let cfg = presets::underwood_bifurcation(2.0);
    let eq = cfg.equilibrium().unwrap();
    let t = taylor_coefficients(&cfg, &eq, 1.3).unwrap();
    let h = 1e-5;
    let fd = (cfg.ovf.value(2.0 + h).unwrap() - cfg.ovf.value(2.0 - h).unwrap()) / (2.0 * h);
    assert!((t.omega[1][0] + 1.3 * cfg.a * fd).abs() < 1e-6);
    assert_eq!(t.zeta[1][0], -t.omega[1][0]);
}

#[test]
fn eigenvector_solves_the_characteristic_system() {
    for cfg in [
        presets::bando_bifurcation(1.0),
        presets::underwood_bifurcation(3.0),
        two_pair(false),
    ] {
        let (s, _, e, _) = parts(&cfg);
        assert!(e.residual < 1e-12, "{}", e.residual);
        assert_eq!(e.q0[s.pair], C::new(1.0, 0.0));
        assert!(e.delta_m[s.pair].norm() < 1e-12);
        for j in 0..s.pair {
            assert_eq!(e.q0[j], C::new(0.0, 0.0));
        }
    }
}

#[test]
fn two_pair_expansion() {
    // Pair 1 critical: v_1 = 1, y_1 = κ/(iω), and the follower solves
    // (iω + κa e_2) v_2 + κd e_2 y_2 = κd e_1 y_1 with iω y_2 = κ v_2.
    let cfg = two_pair(false);
    let (s, _, e, _) = parts(&cfg);
    let (k, w, a, d) = (s.kappa_cr, s.omega0, s.a, s.d);
    let lam = I * w;
    let (e1, e2) = ((-lam * s.taus[0]).exp(), (-lam * s.taus[1]).exp());
    let y1 = k / lam;
    let m = nalgebra::Matrix2::new(lam + k * a * e2, k * d * e2, -C::from(k), lam);
    let rhs = nalgebra::Vector2::new(k * d * e1 * y1, C::new(0.0, 0.0));
    let sol = m.lu().solve(&rhs).unwrap();
    assert!((e.q0[1] - sol[0]).norm() < 1e-12);
    assert!((e.q0[3] - sol[1]).norm() < 1e-12);
    assert!((e.q0[2] - y1).norm() < 1e-14);
}

#[test]
fn adjoint_normalisation_by_quadrature() {
    for cfg in [
        presets::bando_bifurcation(2.0),
        presets::underwood_bifurcation(1.0),
        presets::hopf_onset(1.0),
    ] {
        let (s, _, e, p) = parts(&cfg);
        assert!(p.residual < 1e-12);
        assert_eq!(p.p0_unnormalized[s.pair], C::new(1.0, 0.0));
        assert!((p.pairing - 1.0).norm() < 1e-8, "{}", p.pairing);
        assert!(p.conjugate_pairing.norm() < 1e-8, "{}", p.conjugate_pairing);
        // independent check of the closed-form pairing at a different node count
        let w = s.omega0;
        let mut direct = C::new(0.0, 0.0);
        let pbar: Vec<C> = p.p0.iter().map(|z| z.conj()).collect();
        for (pb, q) in pbar.iter().zip(&e.q0) {
            direct += pb * q;
        }
        for (k, a) in s.mats.iter().enumerate().skip(1) {
            let tk = s.taus[k - 1];
            let f = |xi: f64| {
                let mut acc = C::new(0.0, 0.0);
                for r in 0..a.nrows() {
                    for c in 0..a.ncols() {
                        acc += pbar[r] * a[(r, c)] * e.q0[c] * (I * w * xi).exp();
                    }
                }
                acc * (-I * w * (xi + tk)).exp()
            };
            // trapezoid on a fine grid
            let m = 4000;
            let h = tk / m as f64;
            let mut acc = (f(-tk) + f(0.0)) * 0.5;
            for j in 1..m {
                acc += f(-tk + j as f64 * h);
            }
            direct += acc * h;
        }
        assert!((direct - 1.0).norm() < 1e-6, "{direct}");
    }
}

#[test]
fn forcing_vanishes_on_headway_rows() {
    let cfg = presets::bando_bifurcation(3.0);
    let nf = normal_form(&cfg, None, TaylorConvention::Factorial).unwrap();
    let n = cfg.n;
    for f in [
        &nf.forcing.f20,
        &nf.forcing.f11,
        &nf.forcing.f02,
        &nf.forcing.f21,
    ] {
        assert!(f[n..].iter().all(|z| *z == C::new(0.0, 0.0)));
    }
}

/// Brute-force oracle: evaluate the full nonlinear right-hand side on the
/// ansatz `x_t(θ) = 2 Re(z q(θ))` around the circle `z = ε e^{iφ}` and
/// extract the Fourier coefficients of `p̄(0) · (f - linear part)`.
fn brute_force_g(cfg: &PlatoonConfig) -> (C, C, C) {
    let (s, _, e, p) = parts(cfg);
    let n = cfg.n;
    let eq = s.equilibrium;
    let kcfg = cfg.with_kappa(s.kappa_cr);
    let eps = 1e-3;
    let m = 64;
    let (mut c0, mut c2, mut cm2) = (C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0));
    for j in 0..m {
        let phi = 2.0 * PI * j as f64 / m as f64;
        let z = C::from_polar(eps, phi);
        let mut v_del = vec![0.0; n];
        let mut u_del = vec![0.0; n];
        for i in 0..n {
            let shift = (-I * s.omega0 * cfg.tau[i]).exp();
            v_del[i] = 2.0 * (z * e.q0[i] * shift).re;
            u_del[i] = 2.0 * (z * e.q0[n + i] * shift).re;
        }
        let y_del: Vec<f64> = u_del.iter().map(|u| eq.y_star + u).collect();
        let mut rate = vec![0.0; n];
        velocity_rates(
            &kcfg.ovf,
            kcfg.a,
            kcfg.kappa,
            0.0,
            kcfg.x0_dot_eq,
            &v_del,
            &y_del,
            &mut rate,
        );
        let mut g = C::new(0.0, 0.0);
        for i in 0..n {
            let prev = if i == 0 { 0.0 } else { u_del[i - 1] };
            let lin = s.kappa_cr * (-s.a * v_del[i] - s.d * u_del[i] + s.d * prev);
            g += p.p0[i].conj() * (rate[i] - lin);
        }
        c0 += g;
        c2 += g * (-I * 2.0 * phi).exp();
        cm2 += g * (I * 2.0 * phi).exp();
    }
    let scale = 1.0 / (m as f64 * eps * eps);
    // g = g20 z²/2 + g11 |z|² + g02 z̄²/2 + O(ε³)
    (c2 * scale * 2.0, c0 * scale, cm2 * scale * 2.0)
}

#[test]
fn g_coefficients_match_brute_force_expansion() {
    for cfg in [
        two_pair(false),
        two_pair(true),
        presets::underwood_bifurcation(1.0),
    ] {
        let nf = normal_form(&cfg, None, TaylorConvention::Factorial).unwrap();
        let (g20, g11, g02) = brute_force_g(&cfg);
        let tol = 1e-4 * nf.g20.norm().max(nf.g11.norm()) + 1e-9;
        assert!((g20 - nf.g20).norm() < tol, "g20 {g20} vs {}", nf.g20);
        assert!((g11 - nf.g11).norm() < tol, "g11 {g11} vs {}", nf.g11);
        assert!((g02 - nf.g02).norm() < tol, "g02 {g02} vs {}", nf.g02);
    }
}

#[test]
fn w20_satisfies_its_operator_equation() {
    for cfg in [
        presets::bando_bifurcation(1.0),
        presets::underwood_bifurcation(3.0),
    ] {
        let (s, t, e, p) = parts(&cfg);
        let f = forcing(&s, &t, &e, None, TaylorConvention::Factorial);
        let g = g_coefficients(&p, &f, false);
        let w = w_vectors(&s, &f, &g).unwrap();
        let tau = s.taus.iter().copied().fold(0.0, f64::max);
        for theta in [0.0, -tau / 2.0] {
            let r = w20_residual(&s, &e, &g, &w, &f, theta);
            assert!(r < 1e-6, "θ = {theta}: {r}");
        }
        // f vanishes on velocity rows: Δ(0) maps headways into them only
        assert!(w.f[..s.n].iter().all(|z| z.norm() < 1e-14));
    }
}

#[test]
fn linear_nonlinearity_gives_trivial_normal_form() {
    let cfg = presets::bando_bifurcation(2.0);
    let (s, mut t, e, p) = parts(&cfg);
    for o in t.omega.iter_mut() {
        o[1] = 0.0;
        o[2] = 0.0;
    }
    let f = forcing(&s, &t, &e, None, TaylorConvention::Factorial);
    let g = g_coefficients(&p, &f, false);
    let w = w_vectors(&s, &f, &g).unwrap();
    assert!(w.e.iter().all(|z| z.norm() == 0.0));
    assert!(w.w20.coef_q.norm() == 0.0 && w.w20.coef_qbar.norm() == 0.0);
    let full = forcing(
        &s,
        &t,
        &e,
        Some((&w.w20, &w.w11)),
        TaylorConvention::Factorial,
    );
    assert!(g_coefficients(&p, &full, true).g21.unwrap().norm() == 0.0);
}

#[test]
fn result_identities_and_classification() {
    for cfg in [
        presets::bando_bifurcation(1.0),
        presets::bando_bifurcation(2.0),
        presets::bando_bifurcation(3.0),
        presets::underwood_bifurcation(1.0),
        presets::underwood_bifurcation(2.0),
        presets::underwood_bifurcation(3.0),
    ] {
        let nf = normal_form(&cfg, None, TaylorConvention::Factorial).unwrap();
        assert_eq!(nf.beta2, 2.0 * nf.c1_0.re);
        assert_eq!(nf.mu2, -nf.c1_0.re / nf.alpha_prime_0);
        assert!(nf.alpha_prime_0 > 0.0);
        assert!((nf.kappa_cr - 1.0).abs() < 1e-12);
        assert_eq!(nf.supercritical, Some(true));
        assert_eq!(nf.orbitally_stable, Some(true));
        assert!(nf.assumptions.ok());
        let json = serde_json::to_value(&nf).unwrap();
        assert!(json["c1_0"]["re"].is_number());
    }
}

#[test]
fn reference_values() {
    // Independent single-pair computation (null vectors by SVD).
    let cases = [
        (presets::bando_bifurcation(2.0), -0.00664, 0.779),
        (presets::underwood_bifurcation(1.0), -0.0783, 0.624),
        (presets::hopf_onset(1.0), -0.01099, 0.882),
    ];
    for (cfg, re_c1, alpha) in cases {
        let nf = normal_form(&cfg, None, TaylorConvention::Factorial).unwrap();
        assert!(
            (nf.c1_0.re - re_c1).abs() < 0.01 * re_c1.abs(),
            "{}",
            nf.c1_0.re
        );
        assert!(
            (nf.alpha_prime_0 - alpha).abs() < 0.005,
            "{}",
            nf.alpha_prime_0
        );
    }
}

#[test]
fn invariant_under_permuting_equal_delays() {
    let mut cfg = presets::bando_bifurcation(2.0);
    let base = normal_form(&cfg, Some(3), TaylorConvention::Factorial).unwrap();
    cfg.tau.swap(0, 1);
    let swapped = normal_form(&cfg, Some(3), TaylorConvention::Factorial).unwrap();
    assert!((base.c1_0 - swapped.c1_0).norm() < 1e-14);
    // moving the bifurcating pair elsewhere leaves c₁ unchanged too
    cfg.tau.swap(2, 3);
    let moved = normal_form(&cfg, Some(4), TaylorConvention::Factorial).unwrap();
    assert!((base.c1_0 - moved.c1_0).norm() < 1e-12 * base.c1_0.norm());
}

#[test]
fn resonant_pairs_are_rejected() {
    // two pairs with the same critical delay are simultaneously critical
    let mut cfg = presets::bando_bifurcation(2.0);
    cfg.tau[0] = cfg.tau[2];
    match normal_form(&cfg, Some(3), TaylorConvention::Factorial) {
        Err(MovmError::AssumptionViolation(r)) => assert!(r.min_delta_m < ASSUMPTION_TOL),
        other => panic!("expected an assumption violation, got {other:?}"),
    }
}

#[test]
fn conventions_differ() {
    let cfg = presets::underwood_bifurcation(2.0);
    let a = normal_form(&cfg, None, TaylorConvention::Factorial).unwrap();
    let b = normal_form(&cfg, None, TaylorConvention::AsPrinted).unwrap();
    assert!((a.c1_0 - b.c1_0).norm() > 1e-6);
    assert_eq!(a.alpha_prime_0, b.alpha_prime_0);
}
