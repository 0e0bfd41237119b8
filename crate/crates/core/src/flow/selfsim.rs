//! Self-similar solution `g(t) = c(t) ψ_t*g`, `φ(t) = φ∘ψ_t` generated by
//! the warped soliton, with `ψ_t` integrated numerically from
//! `∂_t ψ_t = X(ψ_t)/c(t)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::catalog::SolitonData;
use crate::error::{Error, Result};
use crate::field::{Field, MetricField, OneForm, OracleKind, SmoothMap};
use crate::jet::Jet;
use crate::tensor::{lie_derivative_metric, pullback_metric_field, pullback_oneform_field, LocalGeometry};
use crate::verifier::tensor_norm;

use super::rhs::{flow_rhs, map_rhs, warped_parameters};

/// Largest RK4 step used for `ψ_t`.
pub const PSI_STEP: f64 = 1e-4;

/// Values of the reduced ansatz `A dx1² + B e^{2x1} Σ dx_i²` and the map at
/// one node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeValues {
    pub a: f64,
    pub b: f64,
    pub phi: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SelfSimilarOracle {
    pub data: SolitonData,
    pub m: usize,
    pub lambda: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl SelfSimilarOracle {
    pub fn c(&self, t: f64) -> f64 {
        1.0 - 2.0 * self.lambda * t
    }

    pub fn check_window(&self, t: f64) -> Result<()> {
        let c = self.c(t);
        if c > 0.0 && c.is_finite() {
            Ok(())
        } else {
            Err(Error::Window(format!("c(t) = 1 − 2λt = {c} ≤ 0 at t = {t}")))
        }
    }

    /// `X(y)` for the warped soliton field, on jets.
    fn x_field(&self, y: &[Jet]) -> Vec<Jet> {
        let mut out: Vec<Jet> = y.iter().map(|c| *c * (2.0 * self.lambda)).collect();
        out[0] = Jet::constant(self.m as f64 - self.lambda - 1.0);
        out
    }

    /// `ψ_t` applied to jets, by classical RK4 from `ψ_0 = id`.
    pub fn psi_jets(&self, t: f64, x: &[Jet]) -> Result<Vec<Jet>> {
        self.check_window(t)?;
        let steps = (t.abs() / PSI_STEP).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut y = x.to_vec();
        let axpy = |y: &[Jet], k: &[Jet], s: f64| -> Vec<Jet> {
            y.iter().zip(k).map(|(a, b)| *a + *b * s).collect()
        };
        for i in 0..steps {
            let t0 = i as f64 * h;
            let f = |s: f64, y: &[Jet]| -> Vec<Jet> {
                let inv_c = 1.0 / self.c(s);
                self.x_field(y).into_iter().map(|v| v * inv_c).collect()
            };
            let k1 = f(t0, &y);
            let k2 = f(t0 + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
            let k3 = f(t0 + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
            let k4 = f(t0 + h, &axpy(&y, &k3, h));
            for j in 0..y.len() {
                y[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (h / 6.0);
            }
        }
        Ok(y)
    }

    pub fn psi(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.psi_jets(t, &Jet::seed(x))?.iter().map(|j| j.v).collect())
    }

    pub fn psi_map(&self, t: f64) -> Result<SmoothMap> {
        self.check_window(t)?;
        let me = self.clone();
        let m = self.m;
        Ok(SmoothMap::new(Field::from_jets(m, m, 2, OracleKind::Composite, move |p, _| {
            me.psi_jets(t, &Jet::seed(p))
        })))
    }

    /// `g(t) = c(t) ψ_t*g`.
    pub fn metric(&self, t: f64) -> Result<MetricField> {
        let pulled = pullback_metric_field(&self.psi_map(t)?, self.data.metric())?;
        Ok(scaled_metric(&pulled, self.c(t)))
    }

    /// `φ(t) = φ∘ψ_t`.
    pub fn map(&self, t: f64) -> Result<SmoothMap> {
        let hm = self.data.harmonic.as_ref().expect("warped data carries a map");
        hm.map.compose(&self.psi_map(t)?)
    }

    /// `ω(t) = φ(t)*ω_N`.
    pub fn omega(&self, t: f64) -> Result<OneForm> {
        let hm = self.data.harmonic.as_ref().expect("warped data carries a map");
        pullback_oneform_field(&self.map(t)?, &hm.omega_target)
    }

    pub fn target_metric(&self) -> &MetricField {
        &self.data.harmonic.as_ref().expect("warped data carries a map").target.metric
    }

    /// Reduced values at `x1` (other coordinates zero).
    pub fn node(&self, t: f64, x1: f64) -> Result<NodeValues> {
        let mut p = vec![0.0; self.m];
        p[0] = x1;
        let y = self.psi_jets(t, &Jet::seed(&p))?;
        let c = self.c(t);
        // ψ^1 depends on x1 only and ψ^i = k(t) x_i
        let k = if self.m > 1 { y[1].d[1] } else { 1.0 };
        let a = c * y[0].d[0] * y[0].d[0];
        let b = c * k * k * (2.0 * (y[0].v - x1)).exp();
        let e = (-self.lambda * y[0].v).exp();
        let phi = self.a.iter().zip(&self.b).map(|(av, bv)| e * bv + av).collect();
        Ok(NodeValues { a, b, phi })
    }

    /// The closed forms as printed in the source: `ψ^1`, `ψ^i`, `B(t)` and
    /// `φ(t)`.
    pub fn printed(&self, t: f64) -> Result<PrintedForms> {
        self.check_window(t)?;
        let (l, m) = (self.lambda, self.m as f64);
        let c = self.c(t);
        Ok(PrintedForms {
            t,
            c,
            psi1_shift: (l - m + 1.0) / (2.0 * l) * c.ln(),
            psi_i_factor: 1.0 - c.ln(),
            b: c.powf((2.0 * l - m + 1.0) / l) * (1.0 - c.ln()).powi(2),
            phi_factor: c.powf((m - l - 1.0) / 2.0),
        })
    }

    /// `B(t) = c^{(1−m)/λ}` and `ψ^i = x_i / c`, the closed forms that follow
    /// from the flow ODE.
    pub fn derived_b(&self, t: f64) -> f64 {
        self.c(t).powf((1.0 - self.m as f64) / self.lambda)
    }

    /// The printed metric `c dx1² + B_printed e^{2x1} Σ dx_i²`.
    pub fn printed_metric(&self, t: f64) -> Result<MetricField> {
        let pf = self.printed(t)?;
        let m = self.m;
        Ok(MetricField::diagonal(m, move |x| {
            let w = (x[0] * 2.0).exp() * pf.b;
            let mut d = vec![w; m];
            d[0] = Jet::constant(pf.c);
            d
        }))
    }

    pub fn printed_map(&self, t: f64) -> Result<SmoothMap> {
        let pf = self.printed(t)?;
        let (a, b, l, m) = (self.a.clone(), self.b.clone(), self.lambda, self.m);
        Ok(SmoothMap::analytic(m, a.len(), move |x| {
            let e = (x[0] * -l).exp() * pf.phi_factor;
            a.iter().zip(&b).map(|(av, bv)| e * *bv + *av).collect()
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrintedForms {
    pub t: f64,
    pub c: f64,
    pub psi1_shift: f64,
    pub psi_i_factor: f64,
    pub b: f64,
    pub phi_factor: f64,
}

/// `s · g`.
pub fn scaled_metric(g: &MetricField, s: f64) -> MetricField {
    let g = g.clone();
    let (m, order, kind) = (g.dim(), g.0.order(), g.kind());
    MetricField::new(Field::from_jets(m, m * m, order, kind, move |p, order| {
        Ok(g.jets(p, order)?.into_iter().map(|j| j * s).collect())
    }))
    .expect("same component count")
}

/// Builds the self-similar oracle for warped soliton data.
pub fn build_self_similar(d: &SolitonData, t: f64) -> Result<SelfSimilarOracle> {
    if d.harmonic.is_none() {
        return Err(Error::MissingField(format!("{} has no harmonic map data", d.label)));
    }
    let (m, lambda, a, b) = warped_parameters(d)?;
    let o = SelfSimilarOracle {
        data: d.clone(),
        m,
        lambda,
        a,
        b,
    };
    o.check_window(t)?;
    Ok(o)
}

/// Metric and map residuals of a candidate solution at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowGap {
    pub t: f64,
    pub dt: f64,
    /// `|∂_t g − (−2Ric + 2θω⊗ω)|_g`.
    pub metric: f64,
    /// `|∂_t φ − τ(φ)| / max(1, |τ(φ)|)`.
    pub map: f64,
}

/// A time-dependent candidate solution.
pub trait Candidate {
    fn metric(&self, t: f64) -> Result<MetricField>;
    fn map(&self, t: f64) -> Result<SmoothMap>;
    fn omega(&self, t: f64) -> Result<OneForm>;
    fn theta(&self) -> f64;
    fn target_metric(&self) -> &MetricField;
}

impl Candidate for SelfSimilarOracle {
    fn metric(&self, t: f64) -> Result<MetricField> {
        SelfSimilarOracle::metric(self, t)
    }
    fn map(&self, t: f64) -> Result<SmoothMap> {
        SelfSimilarOracle::map(self, t)
    }
    fn omega(&self, t: f64) -> Result<OneForm> {
        SelfSimilarOracle::omega(self, t)
    }
    fn theta(&self) -> f64 {
        self.data.theta
    }
    fn target_metric(&self) -> &MetricField {
        SelfSimilarOracle::target_metric(self)
    }
}

/// The closed forms as printed, wrapped as a candidate solution.
pub struct PrintedCandidate<'a>(pub &'a SelfSimilarOracle);

impl Candidate for PrintedCandidate<'_> {
    fn metric(&self, t: f64) -> Result<MetricField> {
        self.0.printed_metric(t)
    }
    fn map(&self, t: f64) -> Result<SmoothMap> {
        self.0.printed_map(t)
    }
    fn omega(&self, t: f64) -> Result<OneForm> {
        let hm = self.0.data.harmonic.as_ref().expect("warped data carries a map");
        pullback_oneform_field(&self.0.printed_map(t)?, &hm.omega_target)
    }
    fn theta(&self) -> f64 {
        self.0.data.theta
    }
    fn target_metric(&self) -> &MetricField {
        self.0.target_metric()
    }
}

/// Central difference in time minus the flow right-hand side, at `(t, p)`.
pub fn flow_residual_of_solution<C: Candidate>(o: &C, t: f64, p: &[f64], dt: f64) -> Result<FlowGap> {
    let g = o.metric(t)?;
    let gp = o.metric(t + dt)?.matrix(p)?;
    let gm = o.metric(t - dt)?.matrix(p)?;
    let dg = (gp - gm) / (2.0 * dt);
    let rhs = flow_rhs(&g, &o.omega(t)?, o.theta(), p)?;
    let geo = LocalGeometry::first_order(&g, p)?;
    let metric = tensor_norm(&geo, &(dg - rhs));
    let fp = DVector::from_vec(o.map(t + dt)?.apply(p)?);
    let fm = DVector::from_vec(o.map(t - dt)?.apply(p)?);
    let tau = map_rhs(&o.map(t)?, &g, o.target_metric(), p)?;
    let map = ((fp - fm) / (2.0 * dt) - &tau).norm() / tau.norm().max(1.0);
    Ok(FlowGap { t, dt, metric, map })
}

/// `∂_t g(0)` by central differences against `−2λg + L_X g`.
pub fn initial_velocity_gap(o: &SelfSimilarOracle, p: &[f64], dt: f64) -> Result<f64> {
    let gp = o.metric(dt)?.matrix(p)?;
    let gm = o.metric(-dt)?.matrix(p)?;
    let fd: DMatrix<f64> = (gp - gm) / (2.0 * dt);
    let g = o.data.metric();
    let algebra = g.matrix(p)? * (-2.0 * o.lambda) + lie_derivative_metric(&o.data.vector_field(), g, p)?;
    let geo = LocalGeometry::first_order(g, p)?;
    Ok(tensor_norm(&geo, &(fd - algebra)))
}

/// Observed order `log2(e(Δt)/e(Δt/2))` from a sequence of errors at halving
/// steps; one entry per consecutive pair.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::warped_soliton;

    fn oracle() -> SelfSimilarOracle {
        build_self_similar(&warped_soliton(2, -2.0, &[1.0], &[1.0]).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn identity_at_time_zero() {
        let o = oracle();
        let p = [0.4, -0.7];
        assert_eq!(o.psi(0.0, &p).unwrap(), p.to_vec());
        let g0 = o.metric(0.0).unwrap().matrix(&p).unwrap();
        assert!((g0 - o.data.metric().matrix(&p).unwrap()).amax() < 1e-14);
    }

    #[test]
    fn reduced_values_at_c_equal_four() {
        let o = oracle();
        let n = o.node(0.75, 0.3).unwrap();
        assert!((n.a - 4.0).abs() < 1e-10);
        assert!((n.b - 2.0).abs() < 1e-10);
        assert!((o.derived_b(0.75) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn window_is_enforced() {
        let d = warped_soliton(2, -2.0, &[1.0], &[1.0]).unwrap();
        assert!(matches!(build_self_similar(&d, -0.3), Err(Error::Window(_))));
    }
}
