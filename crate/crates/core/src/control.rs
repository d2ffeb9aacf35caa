//! Optimal feedback controller, controlled state and figures of merit.
//!
//! The feedback force is −C·y, so the loop transfer from record to position
//! is K_ctrl = R_xx C/(1 + R_xx C) and the closed-loop response is
//! R_eff = R_xx/(1 + R_xx C).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conditioning::{
    conditional_covariance_general, conditional_covariance_markovian, initial_value, single_sided,
    whitened_projections, GaussianState, WienerFilterPair,
};
use crate::error::{Error, Result};
use crate::plant::{ab_params, output_rational, purity_mu, response, AbParams, SystemModel};
use crate::ratfun::{combine, RationalFunction, CANCEL_TOL, CLUSTER_CANCEL_TOL};

/// Tolerance of the consistency identities asserted by [`metrics`].
pub const IDENTITY_TOL: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Closed-form optimal controller C = C_0(Ω − C_1)/(Ω − C_2) of the
/// Markovian model and its closed-loop poles Ω_1..Ω_3 and zero Ω_4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovianController {
    pub c0: f64,
    pub c1: Complex64,
    pub c2: Complex64,
    pub poles: [Complex64; 3],
    pub zero: Complex64,
}

impl MarkovianController {
    pub fn kernel(&self) -> RationalFunction {
        RationalFunction::from_zpk(real(self.c0), vec![self.c1], vec![self.c2])
    }

    /// R_eff = −(Ω − Ω_4)/[(Ω − Ω_1)(Ω − Ω_2)(Ω − Ω_3)].
    pub fn r_eff(&self) -> RationalFunction {
        RationalFunction::from_zpk(real(-1.0), vec![self.zero], self.poles.to_vec())
    }

    /// K_ctrl = C·R_eff = −C_0(Ω − C_1)/[(Ω − Ω_1)(Ω − Ω_2)(Ω − Ω_3)].
    pub fn k_ctrl(&self) -> RationalFunction {
        RationalFunction::from_zpk(real(-self.c0), vec![self.c1], self.poles.to_vec())
    }
}

pub fn markovian_controller(ab: &AbParams) -> Result<MarkovianController> {
    let (a, b) = (ab.a_hom(), ab.b_hom());
    if b - a <= 1e-14 * b {
        return Err(Error::Degenerate(
            "A = B: the closed loop has infinite Q_eff; perturb S_ZF to obtain a finite controller"
                .into(),
        ));
    }
    let w2 = ab.omega_p * ab.omega_p;
    let re = ((b + a) / 2.0).sqrt();
    let im = ((b - a) / 2.0).sqrt();
    let o1 = Complex64::new(re, -im);
    let o2 = Complex64::new(-re, -im);
    let o3 = Complex64::new(0.0, -b.sqrt());
    let o4 = Complex64::new(0.0, -(b.sqrt() + (2.0 * (b - a)).sqrt()));
    let denom = w2 + o4 * o3;
    Ok(MarkovianController {
        c0: -denom.re,
        c1: (o3 * o3 * o3 + o4 * w2) / denom,
        c2: o4,
        poles: [o1, o2, o3],
        zero: o4,
    })
}

/// K_ctrl = (1/φ_+)[G_x(Ω) − G_x(0⁺)/(ρ − iΩ)], with G_x(0⁺) the value of
/// the impulse response at t = 0⁺.
pub fn synthesize_optimal(
    g_x: &RationalFunction,
    rho: f64,
    phi: &RationalFunction,
) -> Result<RationalFunction> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("ρ = {rho} must be positive")));
    }
    let g0 = initial_value(g_x)?;
    // G0/(ρ − iΩ) = iG0/(Ω + iρ)
    let lag = RationalFunction::from_zpk(I * g0, vec![], vec![Complex64::new(0.0, -rho)]);
    let bracket = combine(&[g_x, &lag.neg()])?;
    let k = bracket.div(phi)?.reduced();
    if !k.is_zero() && k.relative_degree() < 2 {
        return Err(Error::SynthesisConsistency(format!(
            "Ω·K_ctrl does not vanish at infinity (relative degree {})",
            k.relative_degree()
        )));
    }
    if !k.is_zero() && !k.is_causal() {
        return Err(Error::SynthesisConsistency("K_ctrl has a pole in the upper half-plane".into()));
    }
    Ok(k)
}

/// C = K/(R_xx(1 − K)) for unit measurement gain.
pub fn feedback_kernel(k_ctrl: &RationalFunction, r_xx: &RationalFunction) -> Result<RationalFunction> {
    if k_ctrl.is_zero() {
        return Ok(RationalFunction::zero());
    }
    let one_minus = k_ctrl.neg().add_const(real(1.0))?;
    if one_minus.is_zero() {
        return Err(Error::AlgebraConsistency("1 − K_ctrl vanishes identically".into()));
    }
    let c = k_ctrl.div(&r_xx.mul(&one_minus))?;
    Ok(c.reduced_with_floor(CANCEL_TOL, CLUSTER_CANCEL_TOL * c.scale()))
}

/// K_ctrl = R C/(1 + R C).
pub fn loop_transfer(c: &RationalFunction, r_xx: &RationalFunction) -> Result<RationalFunction> {
    let rc = r_xx.mul(c);
    rc.div(&rc.add_const(real(1.0))?).map(|k| k.reduced())
}

/// R_eff = R/(1 + R C).
pub fn closed_loop_response(c: &RationalFunction, r_xx: &RationalFunction) -> Result<RationalFunction> {
    let rc = r_xx.mul(c);
    r_xx.div(&rc.add_const(real(1.0))?).map(|k| k.reduced())
}

/// Optimally controlled state from the conditional one:
/// U = √(V_xx V_pp) + V_xp, V_xx = U/ρ, V_pp = Uρ, V_xp = 0.
pub fn controlled_covariance(cond: &GaussianState) -> (GaussianState, f64) {
    let u = (cond.v_xx * cond.v_pp).sqrt() + cond.v_xp;
    let rho = cond.omega_star();
    (
        GaussianState {
            v_xx: u / rho,
            v_pp: u * rho,
            v_xp: 0.0,
        },
        u,
    )
}

/// U_ctrl/(ħ/2) = μ(√(1 − A/B) + √2)/√(1 + A/B).
pub fn u_ctrl_closed(ab: &AbParams, mu: f64) -> f64 {
    let r = ab.ratio();
    mu * ((1.0 - r).max(0.0).sqrt() + 2f64.sqrt()) / (1.0 + r).sqrt()
}

/// N_eff of the optimally controlled state straight from the noise model.
pub fn controlled_n_eff(model: &SystemModel) -> Result<f64> {
    let ab = ab_params(model)?;
    let mu = purity_mu(&model.noise)?;
    Ok(0.5 * u_ctrl_closed(&ab, mu) - 0.5)
}

/// V^ctrl = V^c + ∫|K − K_x|²S_yy, V_pp similarly with −iΩK − K_p.
/// The integrands are formed as |(K − K_a)φ_+|² so that the marginal
/// oscillator poles in S_yy cancel algebraically.
pub fn controlled_covariance_integral(
    k_ctrl: &RationalFunction,
    filters: &WienerFilterPair,
    phi: &RationalFunction,
    cond: &GaussianState,
) -> Result<GaussianState> {
    let k_p_ctrl = k_ctrl.mul(&RationalFunction::omega().scale_by(-I));
    let cancel = |f: RationalFunction| f.reduced_with_floor(CANCEL_TOL, CLUSTER_CANCEL_TOL * f.scale());
    let e_x = cancel(combine(&[k_ctrl, &filters.k_x.neg()])?.mul(phi));
    let e_p = cancel(combine(&[&k_p_ctrl, &filters.k_p.neg()])?.mul(phi));
    let improper = |e: Error| match e {
        Error::Divergent { power } => Error::ImproperController(format!(
            "controlled-variance integrand decays only as Ω^{power}"
        )),
        other => other,
    };
    let dxx = single_sided(&e_x.abs_sqr()).map_err(improper)?;
    let dpp = single_sided(&e_p.abs_sqr()).map_err(improper)?;
    let dxp = single_sided(&e_x.mul(&e_p.para_conj())).map_err(improper)?;
    Ok(GaussianState {
        v_xx: cond.v_xx + dxx,
        v_pp: cond.v_pp + dpp,
        v_xp: cond.v_xp + dxp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SqueezeClass {
    PositionSqueezed,
    MomentumSqueezed,
    None,
}

impl SqueezeClass {
    pub fn label(&self) -> &'static str {
        match self {
            Self::PositionSqueezed => "position-squeezed",
            Self::MomentumSqueezed => "momentum-squeezed",
            Self::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlMetrics {
    pub u_ctrl: f64,
    pub n_eff: f64,
    pub q_eff: f64,
    pub eta2: f64,
    pub omega_star: f64,
    pub entropy: f64,
    pub squeeze_class: SqueezeClass,
}

/// N_eff and the trap frequency in which the state is thermal.
pub fn occupation(state: &GaussianState) -> (f64, f64) {
    (state.n_eff(), state.omega_star())
}

/// Von Neumann entropy (N + 1)ln(N + 1) − N ln N, in nats.
pub fn entropy(n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    (n + 1.0) * (n + 1.0).ln() - n * n.ln()
}

pub fn squeeze_class(omega_star: f64, omega_p: f64) -> SqueezeClass {
    if (omega_star - omega_p).abs() <= 1e-9 * omega_star.max(omega_p) {
        SqueezeClass::None
    } else if omega_star > omega_p {
        SqueezeClass::PositionSqueezed
    } else {
        SqueezeClass::MomentumSqueezed
    }
}

/// Figures of merit of the optimally controlled state. Fails if
/// U/(ħ/2) = η² + √2μ/√(1 + A/B) or N_eff ≥ η²/2 is violated.
pub fn metrics(ab: &AbParams, mu: f64, controlled: &GaussianState) -> Result<ControlMetrics> {
    let u = controlled.purity();
    let q_eff = ab.q_eff();
    let eta2 = mu / (2.0 * q_eff);
    let (n_eff, omega_star) = occupation(controlled);
    let bound = eta2 + 2f64.sqrt() * mu / (1.0 + ab.ratio()).sqrt();
    if (2.0 * u - bound).abs() > IDENTITY_TOL * bound {
        return Err(Error::InternalConsistency(format!(
            "U/(ħ/2) = {} but η² + √2μ/√(1+A/B) = {bound}",
            2.0 * u
        )));
    }
    if n_eff < eta2 / 2.0 - IDENTITY_TOL {
        return Err(Error::InternalConsistency(format!(
            "N_eff = {n_eff} below η²/2 = {}",
            eta2 / 2.0
        )));
    }
    Ok(ControlMetrics {
        u_ctrl: u,
        n_eff,
        q_eff,
        eta2,
        omega_star,
        entropy: entropy(n_eff),
        squeeze_class: squeeze_class(omega_star, ab.omega_p),
    })
}

/// Q_eff·S_x(Ω)/S_SQL(Ω) with S_SQL = 2ħ/(mΩ²).
pub fn semiclassical_estimate(q_eff: f64, s_x: f64, omega: f64) -> f64 {
    q_eff * s_x * omega * omega / 2.0
}

/// Optimal controller with the closed-loop data it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSynthesis {
    pub k_ctrl: RationalFunction,
    pub c_kernel: RationalFunction,
    pub r_eff: RationalFunction,
    pub poles: Vec<Complex64>,
    pub zeros: Vec<Complex64>,
    pub conditional: GaussianState,
    pub controlled: GaussianState,
    pub rho: f64,
}

/// Closed-form synthesis for the Markovian model.
pub fn synthesize_markovian(model: &SystemModel) -> Result<(ControllerSynthesis, MarkovianController)> {
    let ab = ab_params(model)?;
    let mu = purity_mu(&model.noise)?;
    let ctrl = markovian_controller(&ab)?;
    let conditional = conditional_covariance_markovian(&ab, mu)?;
    let (controlled, _) = controlled_covariance(&conditional);
    Ok((
        ControllerSynthesis {
            k_ctrl: ctrl.k_ctrl(),
            c_kernel: ctrl.kernel(),
            r_eff: ctrl.r_eff(),
            poles: ctrl.poles.to_vec(),
            zeros: vec![ctrl.zero],
            conditional,
            controlled,
            rho: conditional.omega_star(),
        },
        ctrl,
    ))
}

/// Frequency-domain synthesis: spectral factorization, causal projection,
/// K_ctrl from the optimal formula and C recovered by inverting the loop.
/// Marginal oscillator poles are moved off the axis by the damping floor.
pub fn synthesize_frequency(model: &SystemModel) -> Result<ControllerSynthesis> {
    let reg = model.regularized();
    let conditional = conditional_covariance_general(&reg)?;
    let rho = conditional.omega_star();
    let (phi, g_x, _) = whitened_projections(&reg)?;
    let k_ctrl = synthesize_optimal(&g_x, rho, &phi)?;
    let r_xx = response(&reg.osc);
    let c_kernel = feedback_kernel(&k_ctrl, &r_xx)?;
    let r_eff = closed_loop_response(&c_kernel, &r_xx)?;
    let (controlled, _) = controlled_covariance(&conditional);
    Ok(ControllerSynthesis {
        poles: r_eff.poles().to_vec(),
        zeros: r_eff.zeros().to_vec(),
        k_ctrl,
        c_kernel,
        r_eff,
        conditional,
        controlled,
        rho,
    })
}

/// First-order kernel coefficients (C_0, C_1, C_2) of a reduced C.
pub fn first_order_coefficients(c: &RationalFunction) -> Result<(Complex64, Complex64, Complex64)> {
    let c = c.reduced();
    if c.zeros().len() != 1 || c.poles().len() != 1 {
        return Err(Error::AlgebraConsistency(format!(
            "feedback kernel has {} zeros and {} poles after cancellation, expected 1 and 1",
            c.zeros().len(),
            c.poles().len()
        )));
    }
    Ok((c.gain(), c.zeros()[0], c.poles()[0]))
}

/// Integral route to the controlled covariance with the conditional state,
/// filters and whitening filter of the regularized model precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralRoute {
    pub r_xx: RationalFunction,
    pub filters: WienerFilterPair,
    pub phi: RationalFunction,
    pub conditional: GaussianState,
}

impl IntegralRoute {
    pub fn new(model: &SystemModel) -> Result<Self> {
        let reg = model.regularized();
        let kf = crate::conditioning::kalman_filter(&reg)?;
        let (phi, _, _) = whitened_projections(&reg)?;
        Ok(Self {
            r_xx: response(&reg.osc),
            filters: kf.filters()?,
            phi,
            conditional: kf.state(),
        })
    }

    pub fn for_loop_transfer(&self, k_ctrl: &RationalFunction) -> Result<GaussianState> {
        controlled_covariance_integral(k_ctrl, &self.filters, &self.phi, &self.conditional)
    }

    pub fn for_kernel(&self, c: &RationalFunction) -> Result<GaussianState> {
        self.for_loop_transfer(&loop_transfer(c, &self.r_xx)?)
    }
}

/// Controlled covariance of `k_ctrl` through the integral route.
pub fn integral_route(model: &SystemModel, k_ctrl: &RationalFunction) -> Result<GaussianState> {
    IntegralRoute::new(model)?.for_loop_transfer(k_ctrl)
}

/// Controlled purity for the kernel C through the integral route.
pub fn purity_for_kernel(model: &SystemModel, c: &RationalFunction) -> Result<f64> {
    Ok(IntegralRoute::new(model)?.for_kernel(c)?.purity())
}

/// Full analysis of a Markovian model.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub model: SystemModel,
    pub mu: f64,
    pub ab: AbParams,
    pub conditional: GaussianState,
    pub controlled: GaussianState,
    pub u_c: f64,
    pub metrics: ControlMetrics,
    pub controller: MarkovianController,
    pub semiclassical: f64,
}

pub fn analyze(model: &SystemModel) -> Result<Analysis> {
    let (synth, controller) = synthesize_markovian(model)?;
    let ab = ab_params(model)?;
    let mu = purity_mu(&model.noise)?;
    let m = metrics(&ab, mu, &synth.controlled)?;
    let w = controller.poles[0].norm();
    let s_x = output_rational(model)?.eval_real(w).re;
    Ok(Analysis {
        model: *model,
        mu,
        ab,
        conditional: synth.conditional,
        controlled: synth.controlled,
        u_c: synth.conditional.purity(),
        metrics: m,
        controller,
        semiclassical: semiclassical_estimate(m.q_eff, s_x, w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{MarkovianNoise, Oscillator};

    fn fixture() -> SystemModel {
        SystemModel::new(
            Oscillator::new(1.0, 0.0).unwrap(),
            MarkovianNoise::new(1.0, 1.0, 0.0).unwrap(),
        )
        .unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn fixture_poles_and_zero() {
        let ctrl = markovian_controller(&ab_params(&fixture()).unwrap()).unwrap();
        assert!(close(ctrl.poles[0], Complex64::new(1.098_684_113_467_81, -0.45508986056222733), 1e-14));
        assert!(close(ctrl.poles[2], Complex64::new(0.0, -1.189_207_115_002_721), 1e-14));
        assert!(close(ctrl.zero, Complex64::new(0.0, -2.099386836127176), 1e-14));
        assert!((ctrl.poles[0].norm() - 1.189_207_115_002_721).abs() < 1e-14);
        assert!(ctrl.c1.re.abs() < 1e-15 && ctrl.c2.re == 0.0);
    }

    #[test]
    fn closed_form_kernel_closes_the_loop() {
        let m = fixture();
        let ctrl = markovian_controller(&ab_params(&m).unwrap()).unwrap();
        let r = response(&m.osc);
        let r_eff = closed_loop_response(&ctrl.kernel(), &r).unwrap();
        let k = loop_transfer(&ctrl.kernel(), &r).unwrap();
        for w in [0.0, 0.3, 1.7, 4.0] {
            assert!((r_eff.eval_real(w) - ctrl.r_eff().eval_real(w)).norm() < 1e-12);
            assert!((k.eval_real(w) - ctrl.k_ctrl().eval_real(w)).norm() < 1e-12);
        }
    }

    #[test]
    fn fixture_controlled_state() {
        let (s, _) = synthesize_markovian(&fixture()).unwrap();
        let u = s.controlled.purity();
        assert!((u - 0.7483028813327446).abs() < 1e-13);
        assert!((s.controlled.v_xx - 0.6292452104367307).abs() < 1e-13);
        assert!((s.controlled.v_pp - 0.8898871106579367).abs() < 1e-13);
        let ab = ab_params(&fixture()).unwrap();
        assert!((u_ctrl_closed(&ab, 1.0) - 1.4966057626654892).abs() < 1e-13);
    }

    #[test]
    fn fixture_metrics() {
        let a = analyze(&fixture()).unwrap();
        assert!((a.metrics.n_eff - 0.24830288133274458).abs() < 1e-13);
        assert!((a.metrics.q_eff - 1.2071067811865475).abs() < 1e-14);
        assert!((a.metrics.eta2 - 0.41421356237309503).abs() < 1e-14);
        assert!((a.metrics.omega_star - 1.189_207_115_002_721).abs() < 1e-13);
        assert_eq!(a.metrics.squeeze_class, SqueezeClass::PositionSqueezed);
        assert!(a.semiclassical.is_finite() && a.semiclassical > 0.0);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(0.0), 0.0);
        assert!((entropy(1.0) - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn uncorrelated_conditional_state_stays_pure() {
        let cond = GaussianState {
            v_xx: 0.5,
            v_pp: 0.5,
            v_xp: 0.0,
        };
        let (ctrl, u) = controlled_covariance(&cond);
        assert_eq!(u, 0.5);
        assert_eq!(ctrl, cond);
    }

    #[test]
    fn frequency_synthesis_matches_closed_form() {
        let m = fixture();
        let s = synthesize_frequency(&m).unwrap();
        let (_, ctrl) = synthesize_markovian(&m).unwrap();
        let (c0, c1, c2) = first_order_coefficients(&s.c_kernel).unwrap();
        assert!(close(c0, real(ctrl.c0), 1e-8), "{c0} vs {}", ctrl.c0);
        assert!(close(c1, ctrl.c1, 1e-8), "{c1} vs {}", ctrl.c1);
        assert!(close(c2, ctrl.c2, 1e-8), "{c2} vs {}", ctrl.c2);
        assert_eq!(s.poles.len(), 3);
        for p in ctrl.poles {
            assert!(s.poles.iter().any(|q| close(*q, p, 1e-8)), "missing pole {p}");
        }
    }

    #[test]
    fn integral_route_matches_fixture() {
        let m = fixture();
        let (s, _) = synthesize_markovian(&m).unwrap();
        let v = integral_route(&m, &s.k_ctrl).unwrap();
        assert!((v.v_xx - 0.6292452104367307).abs() < 1e-6, "{v:?}");
        assert!((v.v_pp - 0.8898871106579367).abs() < 1e-6, "{v:?}");
        assert!(v.v_xp.abs() < 1e-6);
    }

    #[test]
    fn perturbed_controller_is_worse() {
        let m = fixture();
        let (_, ctrl) = synthesize_markovian(&m).unwrap();
        let u_opt = purity_for_kernel(&m, &ctrl.kernel()).unwrap();
        let bent = RationalFunction::from_zpk(real(ctrl.c0), vec![ctrl.c1 * 1.1], vec![ctrl.c2]);
        let u_bent = purity_for_kernel(&m, &bent).unwrap();
        assert!(u_bent > u_opt + 1e-6, "{u_bent} vs {u_opt}");
    }

    #[test]
    fn filter_alone_is_improper() {
        let m = fixture();
        let reg = m.regularized();
        let kf = crate::conditioning::kalman_filter(&reg).unwrap();
        let filters = kf.filters().unwrap();
        let (phi, _, _) = whitened_projections(&reg).unwrap();
        let r = controlled_covariance_integral(&filters.k_x, &filters, &phi, &kf.state());
        assert!(matches!(r, Err(Error::ImproperController(_))), "{r:?}");
    }

    #[test]
    fn degenerate_a_equals_b() {
        let ab = AbParams::from_dimensionless(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(markovian_controller(&ab), Err(Error::Degenerate(_))));
    }

    #[test]
    fn free_mass_frequency_route() {
        let m = SystemModel::new(Oscillator::free_mass(), MarkovianNoise::new(1.0, 2.0, 0.3).unwrap()).unwrap();
        let (s, ctrl) = synthesize_markovian(&m).unwrap();
        let f = synthesize_frequency(&m).unwrap();
        let (c0, c1, c2) = first_order_coefficients(&f.c_kernel).unwrap();
        assert!((c0.re - ctrl.c0).abs() < 1e-8 * ctrl.c0.abs());
        assert!((c1 - ctrl.c1).norm() < 1e-8 * ctrl.c1.norm());
        assert!((c2 - ctrl.c2).norm() < 1e-8 * ctrl.c2.norm());
        let u = integral_route(&m, &f.k_ctrl).unwrap().purity();
        assert!((u - s.controlled.purity()).abs() < 1e-8, "{u}");
    }
}
