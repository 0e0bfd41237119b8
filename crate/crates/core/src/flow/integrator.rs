//! Method-of-lines RK4 for the flow reduced to `A(x1), B(x1), φ(x1)`.
//!
//! The ansatz is `g = A dx1² + B e^{2w x1} Σ_{i≥2} dx_i²` with a fixed warp
//! rate `w`. Ricci and tension at a node come from [`LocalGeometry`] built on
//! the full metric at `(x1, 0, …, 0)`. Boundary nodes are pinned to a known
//! solution at every stage.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor::LocalGeometry;

use super::selfsim::{NodeValues, SelfSimilarOracle};

/// Default parabolic safety factor.
pub const DEFAULT_SIGMA: f64 = 0.2;

/// Dirichlet data for the two end nodes.
pub trait Boundary: Sync {
    fn node(&self, t: f64, x1: f64) -> Result<NodeValues>;
}

impl Boundary for SelfSimilarOracle {
    fn node(&self, t: f64, x1: f64) -> Result<NodeValues> {
        SelfSimilarOracle::node(self, t, x1)
    }
}

/// The same values at every time and place.
pub struct ConstantBoundary(pub NodeValues);

impl Boundary for ConstantBoundary {
    fn node(&self, _t: f64, _x1: f64) -> Result<NodeValues> {
        Ok(self.0.clone())
    }
}

/// Fixed data of the reduced problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedParams {
    pub m: usize,
    pub n: usize,
    /// Warp rate `w` in `e^{2w x1}`; 1 for the warped soliton, 0 for flat data.
    pub warp: f64,
    pub theta: f64,
    /// Coefficient `k` in `ω_N = k Σ dy_γ/(y_γ − a_γ)`; zero disables `ω`.
    pub omega_coef: f64,
    /// Puncture `a` of the target.
    pub puncture: Vec<f64>,
}

impl ReducedParams {
    /// Parameters for the warped soliton family.
    pub fn warped(o: &SelfSimilarOracle) -> Self {
        let n = o.a.len();
        Self {
            m: o.m,
            n,
            warp: 1.0,
            theta: o.data.theta,
            omega_coef: -1.0 / (n as f64 * o.data.theta * o.lambda),
            puncture: o.a.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowState {
    pub t: f64,
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `phi[node][γ]`.
    pub phi: Vec<Vec<f64>>,
    pub params: ReducedParams,
}

/// Uniform grid on `[-L, L]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub nodes: usize,
    pub half_width: f64,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.nodes < 7 {
            return Err(Error::param(format!("grid needs N ≥ 7 nodes, got {}", self.nodes)));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::param("grid half-width L > 0 violated"));
        }
        let h = 2.0 * self.half_width / (self.nodes - 1) as f64;
        Ok((0..self.nodes).map(|k| -self.half_width + k as f64 * h).collect())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }
}

impl FlowState {
    pub fn from_boundary(b: &dyn Boundary, params: ReducedParams, grid: GridSpec, t: f64) -> Result<Self> {
        let x = grid.points()?;
        let vals: Vec<NodeValues> = x.iter().map(|x1| b.node(t, *x1)).collect::<Result<_>>()?;
        Ok(Self {
            t,
            a: vals.iter().map(|v| v.a).collect(),
            b: vals.iter().map(|v| v.b).collect(),
            phi: vals.into_iter().map(|v| v.phi).collect(),
            x,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.len() * (2 + self.params.n));
        y.extend(&self.a);
        y.extend(&self.b);
        for g in 0..self.params.n {
            y.extend(self.phi.iter().map(|p| p[g]));
        }
        y
    }

    fn unpack(&self, t: f64, y: &[f64]) -> Self {
        let nn = self.len();
        let mut s = self.clone();
        s.t = t;
        s.a.copy_from_slice(&y[..nn]);
        s.b.copy_from_slice(&y[nn..2 * nn]);
        for (k, p) in s.phi.iter_mut().enumerate() {
            for (g, v) in p.iter_mut().enumerate() {
                *v = y[(2 + g) * nn + k];
            }
        }
        s
    }

    /// Positivity and target-domain check with a state dump on failure.
    pub fn check(&self) -> Result<()> {
        for k in 0..self.len() {
            let bad = if !(self.a[k] > 0.0) || !self.a[k].is_finite() {
                Some("A ≤ 0 or non-finite")
            } else if !(self.b[k] > 0.0) || !self.b[k].is_finite() {
                Some("B ≤ 0 or non-finite")
            } else if self.phi[k]
                .iter()
                .zip(&self.params.puncture)
                .any(|(p, a)| !(p > a) || !p.is_finite())
            {
                Some("φ left the punctured target")
            } else {
                None
            };
            if let Some(reason) = bad {
                let lo = k.saturating_sub(2);
                let hi = (k + 3).min(self.len());
                let dump = serde_json::json!({
                    "node": k,
                    "x": &self.x[lo..hi],
                    "A": &self.a[lo..hi],
                    "B": &self.b[lo..hi],
                    "phi": &self.phi[lo..hi],
                });
                return Err(Error::InvariantBreach {
                    t: self.t,
                    reason: format!("{reason} at node {k} (x1 = {})", self.x[k]),
                    dump: dump.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Largest relative deviation from `reference` over all nodes and
    /// components.
    pub fn relative_error(&self, reference: &dyn Boundary) -> Result<f64> {
        let mut err = 0.0f64;
        for k in 0..self.len() {
            let r = reference.node(self.t, self.x[k])?;
            err = err.max(((self.a[k] - r.a) / r.a).abs());
            err = err.max(((self.b[k] - r.b) / r.b).abs());
            for (p, q) in self.phi[k].iter().zip(&r.phi) {
                err = err.max(((p - q) / q).abs());
            }
        }
        Ok(err)
    }
}

/// First and second derivatives on a uniform grid: fourth-order central in
/// the interior, second-order central next to the ends, second-order
/// one-sided at the ends.
pub fn grid_derivatives(f: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for k in 0..n {
        if k >= 2 && k + 2 < n {
            d1[k] = (-f[k + 2] + 8.0 * f[k + 1] - 8.0 * f[k - 1] + f[k - 2]) / (12.0 * h);
            d2[k] = (-f[k + 2] + 16.0 * f[k + 1] - 30.0 * f[k] + 16.0 * f[k - 1] - f[k - 2]) / (12.0 * h * h);
        } else if k >= 1 && k + 1 < n {
            d1[k] = (f[k + 1] - f[k - 1]) / (2.0 * h);
            d2[k] = (f[k + 1] - 2.0 * f[k] + f[k - 1]) / (h * h);
        } else if k == 0 {
            d1[k] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
            d2[k] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h);
        } else {
            d1[k] = (3.0 * f[k] - 4.0 * f[k - 1] + f[k - 2]) / (2.0 * h);
            d2[k] = (2.0 * f[k] - 5.0 * f[k - 1] + 4.0 * f[k - 2] - f[k - 3]) / (h * h);
        }
    }
    (d1, d2)
}

fn x1_jet(v: f64, d: f64, dd: f64) -> Jet {
    let mut j = Jet::constant(v);
    j.d[0] = d;
    j.h[0][0] = dd;
    j
}

/// Diagonal metric jets of the ansatz at `x1` from `(A, A', A'')` and
/// `(B, B', B'')`.
pub fn ansatz_jets(m: usize, warp: f64, x1: f64, a: [f64; 3], b: [f64; 3]) -> Vec<Jet> {
    let e = (2.0 * warp * x1).exp();
    let fiber = x1_jet(
        b[0] * e,
        (b[1] + 2.0 * warp * b[0]) * e,
        (b[2] + 4.0 * warp * b[1] + 4.0 * warp * warp * b[0]) * e,
    );
    let mut out = vec![Jet::constant(0.0); m * m];
    out[0] = x1_jet(a[0], a[1], a[2]);
    for i in 1..m {
        out[i * m + i] = fiber;
    }
    out
}

/// Reference geometry at a node, for the gauge-fixed flow.
pub fn reference_geometry(params: &ReducedParams, x1: f64, a: f64, b: f64) -> Result<LocalGeometry> {
    let mut p = vec![0.0; params.m];
    p[0] = x1;
    let jets = ansatz_jets(params.m, params.warp, x1, [a, 0.0, 0.0], [b, 0.0, 0.0]);
    LocalGeometry::from_jets(params.m, &p, &jets, 2)
}

/// Time derivatives at one node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeRhs {
    pub a: f64,
    pub b: f64,
    pub phi: Vec<f64>,
    /// `Z^1` and `∂_1 Z^1` (zero without a reference metric).
    pub z: f64,
    pub dz: f64,
}

/// Reduced right-hand side at `x1`; with `reference` the DeTurck gauge terms
/// `−L_Z g` and `−dφ(Z)` are included.
pub fn node_rhs(
    params: &ReducedParams,
    x1: f64,
    a: [f64; 3],
    b: [f64; 3],
    phi: &[[f64; 3]],
    reference: Option<&LocalGeometry>,
) -> Result<NodeRhs> {
    let m = params.m;
    let mut p = vec![0.0; m];
    p[0] = x1;
    let jets = ansatz_jets(m, params.warp, x1, a, b);
    let geo = LocalGeometry::from_jets(m, &p, &jets, 2)?;
    let mut rhs = geo.ricci()? * -2.0;
    let omega1: f64 = params.omega_coef
        * phi
            .iter()
            .zip(&params.puncture)
            .map(|(f, av)| f[1] / (f[0] - av))
            .sum::<f64>();
    rhs[(0, 0)] += 2.0 * params.theta * omega1 * omega1;
    let (mut z, mut dz) = (0.0, 0.0);
    if let Some(rf) = reference {
        let zj = geo.deturck_jets(rf)?;
        rhs -= geo.lie_derivative(&zj);
        z = zj[0].v;
        dz = zj[0].d[0];
    }
    let phi_jets: Vec<Jet> = phi.iter().map(|f| x1_jet(f[0], f[1], f[2])).collect();
    let tau = geo.tension(&phi_jets, None);
    let b_rate = if m > 1 {
        rhs[(1, 1)] * (-2.0 * params.warp * x1).exp()
    } else {
        0.0
    };
    Ok(NodeRhs {
        a: rhs[(0, 0)],
        b: b_rate,
        phi: phi.iter().zip(tau.iter()).map(|(f, t)| t - f[1] * z).collect(),
        z,
        dz,
    })
}

/// Right-hand side over the whole grid, including the end nodes (one-sided
/// derivatives there).
pub fn grid_rhs(state: &FlowState, reference: Option<&[LocalGeometry]>) -> Result<Vec<NodeRhs>> {
    let h = state.spacing();
    let n = state.params.n;
    let (a1, a2) = grid_derivatives(&state.a, h);
    let (b1, b2) = grid_derivatives(&state.b, h);
    let phis: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..n)
        .map(|g| {
            let f: Vec<f64> = state.phi.iter().map(|p| p[g]).collect();
            let (d1, d2) = grid_derivatives(&f, h);
            (f, d1, d2)
        })
        .collect();
    (0..state.len())
        .into_par_iter()
        .map(|k| {
            let phi: Vec<[f64; 3]> = phis.iter().map(|(f, d1, d2)| [f[k], d1[k], d2[k]]).collect();
            node_rhs(
                &state.params,
                state.x[k],
                [state.a[k], a1[k], a2[k]],
                [state.b[k], b1[k], b2[k]],
                &phi,
                reference.map(|r| &r[k]),
            )
        })
        .collect()
}

/// Largest relative rate `|∂_t u|/|u|` over interior nodes (`φ − a` for the
/// map components).
pub fn max_relative_rate(state: &FlowState, rhs: &[NodeRhs]) -> f64 {
    let mut r = 0.0f64;
    for k in 1..state.len() - 1 {
        r = r.max((rhs[k].a / state.a[k]).abs());
        r = r.max((rhs[k].b / state.b[k]).abs());
        for (g, v) in rhs[k].phi.iter().enumerate() {
            let base = (state.phi[k][g] - state.params.puncture[g]).abs();
            r = r.max((v / base).abs());
        }
    }
    r
}

/// `σ h² min(A) / max(1, max relative rate)`.
pub fn stability_bound(state: &FlowState, sigma: f64) -> Result<f64> {
    let rhs = grid_rhs(state, None)?;
    let min_a = state.a.iter().cloned().fold(f64::INFINITY, f64::min);
    let h = state.spacing();
    Ok(sigma * h * h * min_a / max_relative_rate(state, &rhs).max(1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegratorOptions {
    /// Fixed step; `None` picks the stability bound, shortened so that a
    /// whole number of steps reaches the end time.
    pub dt: Option<f64>,
    pub sigma: f64,
    /// Keep every k-th state (0 keeps only the first and last).
    pub snapshot_every: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            dt: None,
            sigma: DEFAULT_SIGMA,
            snapshot_every: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    pub dt: f64,
    pub steps: usize,
    pub stability_bound: f64,
}

impl Trajectory {
    pub fn last(&self) -> &FlowState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    /// CSV with columns `t,node,A,B,phi_1..phi_n`.
    pub fn to_csv(&self) -> String {
        let n = self.snapshots.first().map_or(0, |s| s.params.n);
        let mut out = String::from("t,node,A,B");
        for g in 1..=n {
            out.push_str(&format!(",phi_{g}"));
        }
        out.push('\n');
        for s in &self.snapshots {
            for k in 0..s.len() {
                out.push_str(&format!("{},{},{},{}", s.t, k, s.a[k], s.b[k]));
                for v in &s.phi[k] {
                    out.push_str(&format!(",{v}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

pub(crate) fn choose_step(t_end: f64, bound: f64, opts: &IntegratorOptions) -> Result<(f64, usize)> {
    if t_end < 0.0 || !t_end.is_finite() {
        return Err(Error::param(format!("end time T ≥ 0 violated (T = {t_end})")));
    }
    if t_end == 0.0 {
        return Ok((0.0, 0));
    }
    let dt = match opts.dt {
        Some(dt) if dt > bound => {
            return Err(Error::param(format!(
                "dt = {dt} exceeds the stability bound {bound:.3e} (σ = {})",
                opts.sigma
            )))
        }
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => return Err(Error::param(format!("dt > 0 violated (dt = {dt})"))),
        None => bound,
    };
    let steps = (t_end / dt).ceil() as usize;
    Ok((t_end / steps as f64, steps))
}

/// Classical RK4 on a flat state vector. `pin` overwrites Dirichlet entries
/// for a given time, and `rhs` returns the full time derivative.
pub(crate) fn rk4<P, R, C, S>(
    y0: Vec<f64>,
    t0: f64,
    dt: f64,
    steps: usize,
    pin: P,
    rhs: R,
    check: C,
    mut snapshot: S,
) -> Result<Vec<f64>>
where
    P: Fn(f64, &mut [f64]) -> Result<()>,
    R: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    C: Fn(f64, &[f64]) -> Result<()>,
    S: FnMut(usize, f64, &[f64]),
{
    let mut y = y0;
    let stage = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for step in 0..steps {
        let t = t0 + step as f64 * dt;
        pin(t, &mut y)?;
        let k1 = rhs(t, &y)?;
        let mut y2 = stage(&y, &k1, 0.5 * dt);
        pin(t + 0.5 * dt, &mut y2)?;
        let k2 = rhs(t + 0.5 * dt, &y2)?;
        let mut y3 = stage(&y, &k2, 0.5 * dt);
        pin(t + 0.5 * dt, &mut y3)?;
        let k3 = rhs(t + 0.5 * dt, &y3)?;
        let mut y4 = stage(&y, &k3, dt);
        pin(t + dt, &mut y4)?;
        let k4 = rhs(t + dt, &y4)?;
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t1 = if step + 1 == steps { t0 + steps as f64 * dt } else { t + dt };
        pin(t1, &mut y)?;
        check(t1, &y)?;
        snapshot(step + 1, t1, &y);
    }
    Ok(y)
}

/// Pins the end nodes of the packed `(A, B, φ)` layout.
pub(crate) fn pin_ends(state: &FlowState, boundary: &dyn Boundary, t: f64, y: &mut [f64]) -> Result<()> {
    let nn = state.len();
    for k in [0, nn - 1] {
        let v = boundary.node(t, state.x[k])?;
        y[k] = v.a;
        y[nn + k] = v.b;
        for (g, p) in v.phi.iter().enumerate() {
            y[(2 + g) * nn + k] = *p;
        }
    }
    Ok(())
}

pub(crate) fn pack_rhs(nn: usize, n: usize, rhs: &[NodeRhs]) -> Vec<f64> {
    let mut out = vec![0.0; nn * (2 + n)];
    for k in 1..nn - 1 {
        out[k] = rhs[k].a;
        out[nn + k] = rhs[k].b;
        for g in 0..n {
            out[(2 + g) * nn + k] = rhs[k].phi[g];
        }
    }
    out
}

/// Integrates the reduced flow from `s0` to `s0.t + t_span`.
pub fn integrate_flow_1d(
    s0: &FlowState,
    t_span: f64,
    boundary: &dyn Boundary,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    s0.check()?;
    let bound = stability_bound(s0, opts.sigma)?;
    let (dt, steps) = choose_step(t_span, bound, opts)?;
    let nn = s0.len();
    let n = s0.params.n;
    let mut snapshots = vec![s0.clone()];
    let every = opts.snapshot_every;
    let y = rk4(
        s0.pack(),
        s0.t,
        dt,
        steps,
        |t, y| pin_ends(s0, boundary, t, y),
        |t, y| Ok(pack_rhs(nn, n, &grid_rhs(&s0.unpack(t, y), None)?)),
        |t, y| s0.unpack(t, y).check(),
        |step, t, y| {
            if every > 0 && step % every == 0 && step != steps {
                snapshots.push(s0.unpack(t, y));
            }
        },
    )?;
    if steps > 0 {
        snapshots.push(s0.unpack(s0.t + steps as f64 * dt, &y));
    }
    Ok(Trajectory {
        snapshots,
        dt,
        steps,
        stability_bound: bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_stencils_are_exact_on_low_degree_polynomials() {
        let h = 0.1;
        let f: Vec<f64> = (0..9).map(|k| (k as f64 * h).powi(2) * 3.0 + k as f64 * h).collect();
        let (d1, d2) = grid_derivatives(&f, h);
        for k in 0..9 {
            let x = k as f64 * h;
            assert!((d1[k] - (6.0 * x + 1.0)).abs() < 1e-10, "k={k}");
            assert!((d2[k] - 6.0).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn flat_state_is_stationary() {
        let params = ReducedParams {
            m: 2,
            n: 1,
            warp: 0.0,
            theta: 1.0,
            omega_coef: 0.0,
            puncture: vec![0.0],
        };
        let v = NodeValues {
            a: 1.0,
            b: 1.0,
            phi: vec![2.0],
        };
        let bc = ConstantBoundary(v);
        let grid = GridSpec {
            nodes: 21,
            half_width: 2.0,
        };
        let s0 = FlowState::from_boundary(&bc, params, grid, 0.0).unwrap();
        let traj = integrate_flow_1d(&s0, 0.001, &bc, &IntegratorOptions::default()).unwrap();
        let s = traj.last();
        assert!(traj.steps > 0);
        for k in 0..s.len() {
            assert_eq!(s.a[k], 1.0);
            assert_eq!(s.b[k], 1.0);
            assert_eq!(s.phi[k][0], 2.0);
        }
    }

    #[test]
    fn breach_reports_state() {
        let params = ReducedParams {
            m: 2,
            n: 1,
            warp: 0.0,
            theta: 1.0,
            omega_coef: 0.0,
            puncture: vec![5.0],
        };
        let bc = ConstantBoundary(NodeValues {
            a: 1.0,
            b: 1.0,
            phi: vec![2.0],
        });
        let grid = GridSpec {
            nodes: 11,
            half_width: 1.0,
        };
        let s0 = FlowState::from_boundary(&bc, params, grid, 0.0).unwrap();
        match s0.check() {
            Err(Error::InvariantBreach { dump, .. }) => assert!(dump.contains("phi")),
            other => panic!("expected breach, got {other:?}"),
        }
    }
}
