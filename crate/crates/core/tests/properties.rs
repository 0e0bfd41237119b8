use nalgebra::DVector;
use proptest::prelude::*;
use ricci_lab::catalog::{build, Built, Params, CATALOG};
use ricci_lab::field::{Field, FdSteps, MetricField, SmoothMap};
use ricci_lab::flow::deturck_field;
use ricci_lab::jet::Jet;
use ricci_lab::tensor::{pullback_metric, pullback_metric_field, LocalGeometry};
use ricci_lab::verifier::{bianchi_residual, trace_consistency_gap};

/// `g_ij = δ_ij (2 + sin(a_i·x)) + e_ij sin(x_i x_j + b_ij)`, diagonally
/// dominant for `|e_ij| ≤ 0.2` and `m ≤ 4`.
fn wobbly_metric(m: usize, a: Vec<f64>, e: Vec<f64>, b: Vec<f64>) -> MetricField {
    MetricField::analytic(m, move |x| {
        let mut out = vec![Jet::constant(0.0); m * m];
        for i in 0..m {
            for j in i..m {
                let k = i * m + j;
                let mut v = (x[i] * x[j] + b[k]).sin() * e[k];
                if i == j {
                    let phase: Jet = (0..m).map(|l| x[l] * a[(i * m + l) % a.len()]).sum();
                    v = v + phase.sin() + 2.0;
                }
                out[i * m + j] = v;
                out[j * m + i] = v;
            }
        }
        out
    })
}

fn metric_strategy() -> impl Strategy<Value = (MetricField, Vec<f64>)> {
    (2usize..=4).prop_flat_map(|m| {
        (
            Just(m),
            prop::collection::vec(-1.5f64..1.5, m * m),
            prop::collection::vec(-0.2f64..0.2, m * m),
            prop::collection::vec(-3.0f64..3.0, m * m),
            prop::collection::vec(-1.0f64..1.0, m),
        )
            .prop_map(|(m, a, e, b, p)| (wobbly_metric(m, a, e, b), p))
    })
}

/// `x ↦ x + s·sin(c·x + d)` componentwise, a diffeomorphism for `|s|·|c| < 1`.
fn wobble_map(m: usize, s: f64, c: Vec<f64>, d: Vec<f64>) -> SmoothMap {
    SmoothMap::analytic(m, m, move |x| {
        (0..m)
            .map(|k| {
                let arg: Jet = (0..m).map(|l| x[l] * c[(k * m + l) % c.len()]).sum();
                x[k] + (arg + d[k]).sin() * s
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn christoffel_symbols_are_symmetric((g, p) in metric_strategy()) {
        let geo = LocalGeometry::new(&g, &p).unwrap();
        let c = geo.christoffel();
        let m = g.dim();
        for l in 0..m {
            for i in 0..m {
                for j in 0..m {
                    prop_assert_eq!(c.get(l, i, j), c.get(l, j, i));
                }
            }
        }
    }

    #[test]
    fn ricci_is_symmetric((g, p) in metric_strategy()) {
        let ric = LocalGeometry::new(&g, &p).unwrap().ricci().unwrap();
        prop_assert!((&ric - ric.transpose()).amax() <= 1e-10);
    }

    #[test]
    fn contracted_bianchi_identity((g, p) in metric_strategy()) {
        let r = bianchi_residual(&g, &p).unwrap();
        prop_assert!(r <= 1e-6, "residual {r}");
    }

    #[test]
    fn sharp_inverts_flat((g, p) in metric_strategy(), v in prop::collection::vec(-5.0f64..5.0, 4)) {
        let geo = LocalGeometry::first_order(&g, &p).unwrap();
        let v = DVector::from_column_slice(&v[..g.dim()]);
        let back = geo.sharp(&geo.flat(&v));
        prop_assert!((back - &v).amax() <= 1e-12 * v.amax().max(1.0));
    }

    #[test]
    fn pullback_is_functorial(
        (g, p) in metric_strategy(),
        s1 in -0.1f64..0.1,
        s2 in -0.1f64..0.1,
        c in prop::collection::vec(-1.0f64..1.0, 16),
        d in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let m = g.dim();
        let psi = wobble_map(m, s1, c.clone(), d.clone());
        let chi = wobble_map(m, s2, c.iter().rev().cloned().collect(), d.iter().rev().cloned().collect());
        let composed = pullback_metric(&psi.compose(&chi).unwrap(), &g, &p).unwrap();
        let nested = pullback_metric(&chi, &pullback_metric_field(&psi, &g).unwrap(), &p).unwrap();
        prop_assert!((&composed - &nested).amax() <= 1e-10);
    }

    #[test]
    fn identity_gauge_field_vanishes(idx in 0usize..CATALOG.len(), seed in 0u64..1000) {
        let built = build(CATALOG[idx], &Params::new()).unwrap();
        let geo = built.geometry();
        for p in geo.sample(5, seed) {
            let z = deturck_field(&geo.metric, &geo.metric, &p).unwrap();
            prop_assert_eq!(z.amax(), 0.0);
        }
    }

    #[test]
    fn trace_identity_is_the_trace_of_the_soliton_residual(idx in 0usize..CATALOG.len(), seed in 0u64..1000) {
        if let Built::Soliton(d) = build(CATALOG[idx], &Params::new()).unwrap() {
            for p in d.geometry.sample(10, seed) {
                prop_assert!(trace_consistency_gap(&d, &p).unwrap() <= 1e-12);
            }
        }
    }
}

#[test]
fn finite_difference_fallback_is_second_order() {
    let m = 3;
    let analytic = wobbly_metric(m, vec![0.7, -0.4, 1.1], vec![0.1; 9], vec![0.3; 9]);
    let reference = analytic.clone();
    let p = [0.2, -0.5, 0.4];
    let err = |h: f64| {
        let a = analytic.clone();
        let sampled = MetricField::new(Field::sampled(m, m * m, FdSteps { first: h, second: 2.0 * h }, move |x| {
            a.matrix(x).unwrap().as_slice().to_vec()
        }))
        .unwrap();
        let fd = sampled.jets(&p, 2).unwrap();
        let ex = reference.jets(&p, 2).unwrap();
        let (mut e1, mut e2) = (0.0f64, 0.0f64);
        for (u, v) in fd.iter().zip(&ex) {
            for k in 0..m {
                e1 = e1.max((u.d[k] - v.d[k]).abs());
                for l in 0..m {
                    e2 = e2.max((u.h[k][l] - v.h[k][l]).abs());
                }
            }
        }
        (e1, e2)
    };
    let (a1, a2) = err(2e-2);
    let (b1, b2) = err(1e-2);
    for ratio in [a1 / b1, a2 / b2] {
        assert!((ratio - 4.0).abs() <= 1.0, "error ratio {ratio}");
    }
}
