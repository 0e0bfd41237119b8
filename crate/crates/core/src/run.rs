//! Drivers behind the command-line subcommands. Each turns a [`RunConfig`]
//! into a list of records.

use serde::Serialize;

use crate::catalog::{build, height_function, round_sphere, warped_soliton, ObataParams, Pole};
use crate::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::flow::integrator::{grid_rhs, reference_geometry};
use crate::flow::{
    build_self_similar, deturck_correspondence, flow_residual_of_solution, initial_velocity_gap, integrate_flow_1d,
    observed_orders, ConstantBoundary, FlowState, GridSpec, IntegratorOptions, NodeValues, PrintedCandidate,
    ReducedParams, SelfSimilarOracle, Trajectory,
};
use crate::quadrature::{sphere_volume, QuadratureRule};
use crate::report::{RecordKind, ReportEnvelope, ResidualReport};
use crate::verifier::{
    bochner_stokes_check, eigen_check_function, eigen_equality_check, integral_identity_check, verify_suite,
    SphereFunction, SuiteOptions,
};

/// Quadrature orders of the convergence table.
pub const CONVERGENCE_ORDERS: [usize; 4] = [4, 8, 16, 32];
/// Gaps below this are treated as round-off when judging monotonicity.
pub const ROUNDOFF_FLOOR: f64 = 1e-10;

/// Everything a run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<ResidualReport>,
    pub trajectory: Option<Trajectory>,
}

impl RunOutput {
    pub fn envelope(&self, config: &RunConfig) -> ReportEnvelope {
        let echo = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        ReportEnvelope::new(echo, self.records.clone())
    }
}

pub fn suite_options(c: &RunConfig) -> SuiteOptions {
    SuiteOptions {
        samples: c.samples,
        seed: c.seed,
        tolerances: c.tolerances,
    }
}

/// Runs the configured command.
pub fn run(c: &RunConfig) -> Result<RunOutput> {
    c.validate()?;
    match c.command {
        Some(Command::Verify) => Ok(RunOutput {
            records: verify_records(c)?,
            trajectory: None,
        }),
        Some(Command::Identities) => Ok(RunOutput {
            records: identities_records(c)?,
            trajectory: None,
        }),
        Some(Command::Flow) => flow_records(c),
        None => Err(Error::Config("no command given".into())),
    }
}

pub fn verify_records(c: &RunConfig) -> Result<Vec<ResidualReport>> {
    let name = c
        .geometry
        .as_deref()
        .ok_or_else(|| Error::Config("verify needs a geometry name".into()))?;
    let built = build(name, &c.params)?;
    verify_suite(&built, &suite_options(c))
}

fn monotone(gaps: &[f64]) -> bool {
    gaps.windows(2)
        .all(|w| w[1] <= w[0] || w[1] <= ROUNDOFF_FLOOR)
}

fn unit_vector(m: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; m + 1];
    for (i, x) in entries {
        v[*i] = *x;
    }
    v
}

/// Obata parameter sets used by the identity run: the polar case, `v ≠ w`
/// with `c1 ≠ 0`, and a third oblique set.
pub fn obata_parameter_sets(m: usize) -> Result<Vec<ObataParams>> {
    Ok(vec![
        ObataParams::polar(m, 1.0, 0.0, 0.0)?,
        ObataParams::new(
            m,
            0.5,
            0.3,
            0.2,
            unit_vector(m, &[(m, 1.0)]),
            unit_vector(m, &[(0, 1.0), (m, 1.0)]),
        )?,
        ObataParams::new(
            m,
            2.0,
            -0.7,
            1.0,
            unit_vector(m, &[(0, 0.6), (1, -0.3), (m, 0.5)]),
            unit_vector(m, &[(1, 1.0)]),
        )?,
    ])
}

#[derive(Serialize)]
struct ConvergenceRow {
    order: usize,
    relative_gap: f64,
}

fn orders_up_to(order: usize) -> Vec<usize> {
    let mut v: Vec<usize> = CONVERGENCE_ORDERS.iter().copied().filter(|o| *o <= order).collect();
    if !v.contains(&order) {
        v.push(order);
    }
    v
}

/// Quadrature calibration, integral identities, Bochner–Stokes and the
/// eigenvalue equality case on the unit sphere.
pub fn identities_records(c: &RunConfig) -> Result<Vec<ResidualReport>> {
    let m = c.m;
    let tol = c.tolerances;
    let q = QuadratureRule::sphere(m, c.quadrature_order)?;
    let sphere = format!("S^{m}(order={})", c.quadrature_order);
    let mut out = Vec::new();

    let vol = sphere_volume(m);
    let v = unit_vector(m, &[(m, 1.0)]);
    let h_v = SphereFunction::from_fn(|pole| height_function(m, 1.0, pole, &v));
    let moment = q.integrate(|n| Ok(h_v.get(n.pole).value(&n.coords)?.powi(2)))?;
    out.push(
        ResidualReport::new(
            &sphere,
            "quadrature-calibration",
            RecordKind::Integral,
            vec![
                (q.total_weight() / vol - 1.0).abs(),
                (moment / (vol / (m as f64 + 1.0)) - 1.0).abs(),
            ],
            1e-8,
        )
        .with("volume", vol)
        .with("integrals", ["volume", "h_v^2 against Vol/(m+1)"]),
    );

    // the first set doubles as the convergence table; the Obata integrands
    // are polynomial on the sphere, so a non-polynomial function is
    // tabulated alongside
    let sets = obata_parameter_sets(m)?;
    let v_exp = v.clone();
    let u_exp = SphereFunction::from_fn(|pole| height_function(m, 1.0, pole, &v_exp).map(|j| j.exp()));
    let mut ident_rows = Vec::new();
    let mut exp_rows = Vec::new();
    let mut first = None;
    for k in orders_up_to(c.quadrature_order) {
        let qk = if k == c.quadrature_order { q.clone() } else { QuadratureRule::sphere(m, k)? };
        let r = integral_identity_check(&sets[0].soliton(Pole::South)?, &qk)?;
        let gap = r.gradient.as_ref().map_or(r.general.relative_gap, |g| {
            g.relative_gap.max(r.general.relative_gap)
        });
        ident_rows.push(ConvergenceRow {
            order: k,
            relative_gap: gap,
        });
        exp_rows.push(ConvergenceRow {
            order: k,
            relative_gap: bochner_stokes_check(&u_exp, &qk)?.relative_gap,
        });
        if k == c.quadrature_order {
            first = Some(r);
        }
    }
    for (i, p) in sets.iter().enumerate() {
        let d = p.soliton(Pole::South)?;
        let r = match (i, first.take()) {
            (0, Some(r)) => r,
            _ => integral_identity_check(&d, &q)?,
        };
        let mut gaps = vec![r.general.relative_gap];
        if let Some(g) = &r.gradient {
            gaps.push(g.relative_gap);
        }
        out.push(
            ResidualReport::new(&d.label, "integral-identity", RecordKind::Integral, gaps, tol.integral)
                .with("set", i)
                .with("identity", &r),
        );
    }
    for (check, rows) in [
        ("integral-identity-convergence", &ident_rows),
        ("bochner-stokes-convergence-exp", &exp_rows),
    ] {
        let gaps: Vec<f64> = rows.iter().map(|r| r.relative_gap).collect();
        let mono = monotone(&gaps);
        out.push(
            ResidualReport::new(&sphere, check, RecordKind::Integral, gaps.clone(), 1.0)
                .with("table", rows)
                .with("roundoff_floor", ROUNDOFF_FLOOR)
                .with("monotone", mono)
                .with_verdict(mono, "gaps non-increasing in the order, or below the round-off floor"),
        );
    }

    let w = unit_vector(m, &[(0, 1.0)]);
    let h_w = SphereFunction::from_fn(|pole| height_function(m, 1.0, pole, &w));
    let sum = SphereFunction::from_fn(|pole| h_v.get(pole).zip(h_w.get(pole), |a, b| a + b));
    let constant = SphereFunction::from_fn(|_| crate::field::ScalarField::constant(m, 1.5));
    for (name, u) in [("h_v", &h_v), ("h_v + h_w", &sum), ("constant", &constant)] {
        let g = bochner_stokes_check(u, &q)?;
        out.push(
            ResidualReport::new(
                format!("{sphere}, u = {name}"),
                "bochner-stokes",
                RecordKind::Integral,
                vec![g.relative_gap],
                tol.integral,
            )
            .with("gap", &g),
        );
    }

    let geo = round_sphere(m, 1.0, Pole::South)?;
    let points = geo.sample(c.samples, c.seed);
    for p in [ObataParams::polar(m, 1.0, 0.0, 0.0)?, ObataParams::polar(m, 1.0, 0.5, 0.0)?] {
        let d = p.soliton(Pole::South)?;
        let e = eigen_equality_check(&d, &points, tol.pointwise)?;
        out.extend(e.reports(&d.label, tol.pointwise));
    }
    let base = ObataParams::polar(m, 1.0, 0.0, 0.0)?;
    let hw = height_function(m, 1.0, Pole::South, &w);
    let perturbed = base.xi(Pole::South).zip(&hw, |x, h| x + h.sq() * 0.1);
    let e = eigen_check_function(&perturbed, 0.0, &geo.metric, &points, tol.pointwise)?;
    let label = format!("unit S^{m}, ξ + 0.1 h_w²");
    out.extend(e.reports(&label, tol.pointwise));
    out.push(
        ResidualReport::new(&label, "eigen-negative-control", RecordKind::Pointwise, vec![], 0.0)
            .with("is_eigenfunction", e.is_eigenfunction)
            .with("max_eigen_residual", crate::report::summarize(&e.eigen_residuals).0)
            .with_verdict(!e.is_eigenfunction, "perturbed ξ must be flagged as non-eigenfunction"),
    );
    Ok(out)
}

/// The warped soliton and its self-similar oracle for a flow config.
pub fn flow_oracle(c: &RunConfig) -> Result<SelfSimilarOracle> {
    let m = c.m;
    let lambda = c.flow.lambda.unwrap_or(-(m as f64));
    let n = c.flow.a.as_ref().or(c.flow.b.as_ref()).map_or(1, |v| v.len());
    let a = c.flow.a.clone().unwrap_or_else(|| vec![1.0; n]);
    let b = c.flow.b.clone().unwrap_or_else(|| vec![1.0; n]);
    let d = warped_soliton(m, lambda, &a, &b)?;
    build_self_similar(&d, 0.0)
}

fn sample_points(o: &SelfSimilarOracle, count: usize, seed: u64) -> Vec<Vec<f64>> {
    o.data.geometry.sample(count, seed)
}

/// Oracle and printed-form residuals, then optionally the reduced integrator
/// and the gauge-fixed correspondence.
pub fn flow_records(c: &RunConfig) -> Result<RunOutput> {
    let o = flow_oracle(c)?;
    let f = &c.flow;
    let tol = c.tolerances;
    let label = o.data.label.clone();
    let mut out = Vec::new();
    let points = sample_points(&o, c.samples.min(5), c.seed);
    let t_res = f.residual_t;
    o.check_window(t_res)?;
    o.check_window(t_res + f.residual_dt)?;
    o.check_window(t_res - f.residual_dt)?;

    let times = [0.05, 0.1, 0.25];
    let mut psi1 = Vec::new();
    let mut psi_i = Vec::new();
    let mut bgap = Vec::new();
    for &t in &times {
        let pf = o.printed(t)?;
        for p in &points {
            let y = o.psi(t, p)?;
            psi1.push(y[0] - (p[0] + pf.psi1_shift));
            for i in 1..o.m {
                psi_i.push(y[i] - pf.psi_i_factor * p[i]);
            }
        }
        bgap.push(pf.b - o.derived_b(t));
    }
    out.push(
        ResidualReport::new(&label, "psi1-printed-vs-oracle", RecordKind::Pointwise, psi1, tol.pointwise)
            .with("times", times),
    );
    let psi_i_max = crate::report::summarize(&psi_i).0;
    out.push(
        ResidualReport::new(&label, "psi-i-printed-vs-oracle", RecordKind::Finding, psi_i, 0.0)
            .with("times", times)
            .with("printed_agrees", psi_i_max <= tol.pointwise),
    );
    out.push(
        ResidualReport::new(&label, "b-printed-vs-derived", RecordKind::Finding, bgap, 0.0)
            .with("times", times)
            .with("derived", "B(t) = c^{(1-m)/λ}"),
    );

    let v0: Vec<f64> = points
        .iter()
        .map(|p| initial_velocity_gap(&o, p, 1e-4))
        .collect::<Result<_>>()?;
    out.push(ResidualReport::new(&label, "initial-velocity", RecordKind::Pointwise, v0, 1e-6));

    let dts = [f.residual_dt, f.residual_dt / 2.0, f.residual_dt / 4.0];
    let mut per_dt = Vec::new();
    for &dt in &dts {
        let gaps: Vec<f64> = points
            .iter()
            .map(|p| flow_residual_of_solution(&o, t_res, p, dt).map(|g| g.metric.max(g.map)))
            .collect::<Result<_>>()?;
        per_dt.push(gaps);
    }
    let maxima: Vec<f64> = per_dt.iter().map(|g| crate::report::summarize(g).0).collect();
    let orders = observed_orders(&maxima);
    let order_ok = orders.iter().all(|q| (q - 2.0).abs() <= 0.2);
    let rec = ResidualReport::new(
        &label,
        "flow-residual-oracle",
        RecordKind::Pointwise,
        per_dt[0].clone(),
        tol.pointwise_fd,
    );
    let pass = rec.pass && order_ok;
    out.push(
        rec.with("t", t_res)
            .with("dt", dts)
            .with("max_per_dt", &maxima)
            .with("observed_orders", &orders)
            .with_verdict(pass, "max ≤ tolerance at the first dt and observed orders within 2 ± 0.2"),
    );

    let printed = PrintedCandidate(&o);
    let mut metric_gaps = Vec::new();
    let mut map_gaps = Vec::new();
    for p in &points {
        let g = flow_residual_of_solution(&printed, t_res, p, f.residual_dt)?;
        metric_gaps.push(g.metric);
        map_gaps.push(g.map);
    }
    let pmax = crate::report::summarize(&metric_gaps).0.max(crate::report::summarize(&map_gaps).0);
    let mut rec = ResidualReport::new(&label, "flow-residual-printed", RecordKind::Finding, metric_gaps.clone(), tol.pointwise_fd)
        .with("t", t_res)
        .with("dt", f.residual_dt)
        .with("map_gaps", &map_gaps)
        .with("printed_satisfies_flow", pmax <= tol.pointwise_fd)
        .with("discrepancy", pmax > tol.pointwise_fd);
    if f.printed_forms {
        let forms: Vec<_> = times.iter().map(|t| o.printed(*t)).collect::<Result<_>>()?;
        let derived: Vec<(f64, f64)> = times.iter().map(|t| (1.0 / o.c(*t), o.derived_b(*t))).collect();
        rec = rec
            .with("as_printed", forms)
            .with("derived_psi_i_factor_and_b", derived);
    }
    out.push(rec);

    let mut trajectory = None;
    if f.integrate || f.deturck {
        let grid = GridSpec {
            nodes: c.grid.nodes,
            half_width: c.grid.half_width,
        };
        let opts = IntegratorOptions {
            dt: c.grid.dt,
            sigma: c.grid.sigma,
            snapshot_every: c.grid.snapshot_every,
        };
        let s0 = FlowState::from_boundary(&o, ReducedParams::warped(&o), grid, 0.0)?;
        if f.integrate {
            let tr = integrate_flow_1d(&s0, c.grid.t_end, &o, &opts)?;
            let err = tr.last().relative_error(&o)?;
            out.push(
                ResidualReport::new(&label, "integrator-vs-oracle", RecordKind::Flow, vec![err], f.integrator_tolerance)
                    .with("grid", grid)
                    .with("t_end", c.grid.t_end)
                    .with("dt", tr.dt)
                    .with("steps", tr.steps)
                    .with("stability_bound", tr.stability_bound)
                    .with("sigma", opts.sigma),
            );
            out.push(zero_rhs_control(&o, grid, c.grid.t_end, &opts)?);
            trajectory = Some(tr);
        }
        if f.deturck {
            let refs = s0
                .x
                .iter()
                .enumerate()
                .map(|(k, x)| reference_geometry(&s0.params, *x, s0.a[k], s0.b[k]))
                .collect::<Result<Vec<_>>>()?;
            let plain = grid_rhs(&s0, None)?;
            let gauged = grid_rhs(&s0, Some(&refs))?;
            let diffs: Vec<f64> = plain
                .iter()
                .zip(&gauged)
                .skip(1)
                .take(s0.len() - 2)
                .map(|(p, g)| {
                    let mut d = (p.a - g.a).abs().max((p.b - g.b).abs());
                    for (u, v) in p.phi.iter().zip(&g.phi) {
                        d = d.max((u - v).abs());
                    }
                    d
                })
                .collect();
            out.push(
                ResidualReport::new(&label, "deturck-initial-rhs", RecordKind::Flow, diffs, 1e-10)
                    .with("reference", "initial metric"),
            );
            let t_d = if c.grid.t_end == 0.0 { 0.0 } else { f.deturck_t };
            let cmp = deturck_correspondence(&o, &s0, t_d, &opts)?;
            out.push(
                ResidualReport::new(&label, "deturck-correspondence", RecordKind::Flow, vec![cmp.gap], f.deturck_tolerance)
                    .with("comparison", &cmp),
            );
        }
    }
    Ok(RunOutput {
        records: out,
        trajectory,
    })
}

/// Flat data with `ω = 0` must stay put to round-off.
fn zero_rhs_control(o: &SelfSimilarOracle, grid: GridSpec, t_end: f64, opts: &IntegratorOptions) -> Result<ResidualReport> {
    let n = o.a.len();
    let params = ReducedParams {
        m: o.m,
        n,
        warp: 0.0,
        theta: o.data.theta,
        omega_coef: 0.0,
        puncture: o.a.clone(),
    };
    let bc = ConstantBoundary(NodeValues {
        a: 1.0,
        b: 1.0,
        phi: o.a.iter().map(|a| a + 1.0).collect(),
    });
    let s0 = FlowState::from_boundary(&bc, params, grid, 0.0)?;
    let free = IntegratorOptions {
        dt: None,
        ..opts.clone()
    };
    let tr = integrate_flow_1d(&s0, t_end, &bc, &free)?;
    let s = tr.last();
    let mut dev = Vec::with_capacity(s.len());
    for k in 0..s.len() {
        let mut d = (s.a[k] - 1.0).abs().max((s.b[k] - 1.0).abs());
        for (p, q) in s.phi[k].iter().zip(&s0.phi[k]) {
            d = d.max((p - q).abs());
        }
        dev.push(d);
    }
    Ok(
        ResidualReport::new("flat reduced data, ω = 0", "zero-rhs-control", RecordKind::Flow, dev, 1e-12)
            .with("steps", tr.steps),
    )
}
