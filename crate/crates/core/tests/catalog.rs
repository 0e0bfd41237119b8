use nalgebra::DVector;
use ricci_lab::catalog::*;
use ricci_lab::tensor::{gradient, hessian_scalar, ricci, LocalGeometry};
use ricci_lab::verifier::{soliton_residual, tensor_norm};

#[test]
fn berger_reeb_field_has_unit_length() {
    for (k, t) in [(9.0, 2.0), (16.0, 3.0), (4.0, 2.0), (4.0, 1.0)] {
        let g = berger_sphere(k, t).unwrap();
        let e3 = g.vector("E3").unwrap();
        for p in g.sample(100, 1) {
            let v = e3.vector(&p).unwrap();
            let n2 = (v.transpose() * g.metric.matrix(&p).unwrap() * &v)[(0, 0)];
            assert!((n2.sqrt() - 1.0).abs() <= 1e-10, "κ={k} τ={t}: |E3| = {}", n2.sqrt());
        }
    }
}

#[test]
fn berger_soliton_identity() {
    for (k, t) in [(9.0, 2.0), (16.0, 3.0), (4.0, 2.0)] {
        let d = berger_soliton(k, t).unwrap();
        assert_eq!(d.theta, 4.0 * t * t - k);
        for p in d.geometry.sample(100, 0) {
            let geo = LocalGeometry::first_order(d.metric(), &p).unwrap();
            let r = tensor_norm(&geo, &soliton_residual(&d, &p).unwrap());
            assert!(r <= 1e-8, "κ={k} τ={t}: {r}");
        }
    }
}

#[test]
fn berger_soliton_requires_positive_theta() {
    assert!(matches!(berger_soliton(9.0, 1.0), Err(ricci_lab::Error::Parameter(_))));
    assert!(berger_soliton(4.0, 1.0).is_err());
}

#[test]
fn hyperbolic_warped_is_einstein() {
    for m in 2..=4 {
        let g = hyperbolic_warped(m).unwrap();
        for p in g.sample(30, 2) {
            let r = ricci(&g.metric, &p).unwrap() + g.metric.matrix(&p).unwrap() * (m as f64 - 1.0);
            assert!(r.amax() <= 1e-8, "m={m}");
        }
    }
}

#[test]
fn round_sphere_curvature_and_height_hessian() {
    for m in 2..=4 {
        for pole in [Pole::South, Pole::North] {
            let g = round_sphere(m, 1.0, pole).unwrap();
            let mut v = vec![0.3; m + 1];
            v[0] = -0.5;
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            let v: Vec<f64> = v.iter().map(|c| c / n).collect();
            let h = height_function(m, 1.0, pole, &v);
            for p in g.sample(30, 4) {
                let gm = g.metric.matrix(&p).unwrap();
                let ric = ricci(&g.metric, &p).unwrap() - &gm * (m as f64 - 1.0);
                assert!(ric.amax() <= 1e-8);
                let hess = hessian_scalar(&h, &g.metric, &p).unwrap() + &gm * h.value(&p).unwrap();
                assert!(hess.amax() <= 1e-8);
            }
        }
    }
}

#[test]
fn round_sphere_of_radius_two() {
    let g = round_sphere(3, 2.0, Pole::South).unwrap();
    for p in g.sample(10, 0) {
        let r = ricci(&g.metric, &p).unwrap() - g.metric.matrix(&p).unwrap() * 0.5;
        assert!(r.amax() <= 1e-8);
    }
}

#[test]
fn witness_is_euclidean_gradient_but_not_warped_closed() {
    let g = non_gradient_witness(2, -2.0).unwrap();
    let u = g.scalar("u").unwrap();
    let x = g.vector("X").unwrap();
    let flat = g.metric_named("euclidean").unwrap();
    for p in g.sample(50, 5) {
        let du = gradient(u, flat, &p).unwrap();
        assert!((du - x.vector(&p).unwrap()).amax() <= 1e-10);
    }
    let dxf = exterior_derivative_oneform(g.one_form("X_flat").unwrap(), &[0.0, 1.0]).unwrap();
    assert!(dxf.amax() >= 1e-3);
}

#[test]
fn punctured_target_form_matches_its_formula() {
    let g = punctured_euclidean(&[1.0, 2.0], 1.0, -2.0).unwrap();
    let w = g.one_form("omega_N").unwrap();
    let y = [1.7, 2.5];
    let c = w.covector(&y).unwrap();
    let k = -1.0 / (2.0 * 1.0 * -2.0);
    let expect = DVector::from_vec(vec![k / (1.7 - 1.0), k / (2.5 - 2.0)]);
    assert!((c - expect).amax() <= 1e-14);
}

#[test]
fn build_is_deterministic_and_validates() {
    let a = build("berger", &Params::new()).unwrap();
    let b = build("berger", &Params::new()).unwrap();
    assert_eq!(a.geometry().sample(20, 7), b.geometry().sample(20, 7));
    assert_ne!(a.geometry().sample(20, 7), a.geometry().sample(20, 8));
    let err = build("warped-soliton", &[("lambda".to_string(), ParamValue::Scalar(0.5))].into_iter().collect());
    assert!(matches!(err, Err(ricci_lab::Error::Parameter(_))));
}
