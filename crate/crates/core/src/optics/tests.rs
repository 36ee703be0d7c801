use super::scattering::{radiation_pressure, scattering_rate};
use super::*;
use crate::testing::{disk, rod, sphere, Points};
use std::f64::consts::PI;

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}

#[test]
fn polarization_basis_conventions() {
    let (e1, e2) = polarization_basis(&Vec3::z());
    assert_eq!((e1, e2), (Vec3::x(), Vec3::y()));
    let (e1, e2) = polarization_basis(&-Vec3::z());
    assert_eq!((e1, e2), (-Vec3::x(), Vec3::y()));
    let mut pts = Points::new(3);
    for _ in 0..200 {
        let n = pts.unit();
        let (e1, e2) = polarization_basis(&n);
        assert!((e1.cross(&e2) - n).norm() < 1e-12);
        let id = e1 * e1.transpose() + e2 * e2.transpose() + n * n.transpose();
        assert!((id - nalgebra::Matrix3::identity()).norm() < 1e-12);
    }
}

#[test]
fn potential_trivial_points() {
    let s = rod();
    let v = dimensionless_potential(&s, &Vec3::zeros(), &Vec3::x());
    assert!((v - 1.0).abs() < 1e-15);
    let node = Vec3::new(0.0, 0.0, PI / (2.0 * s.k()));
    assert!(dimensionless_potential(&s, &node, &Vec3::x()).abs() < 1e-15);
    assert_eq!(potential(&s, &Vec3::zeros(), &Vec3::x(), 0.0), 0.0);
    let g = conservative_force(&s, &Vec3::zeros(), &Vec3::x(), 1e3);
    assert!(g.force.norm() < 1e-30 && g.torque.norm() < 1e-30);
    assert!(potential(&s, &Vec3::zeros(), &Vec3::x(), 1.0) < 0.0);
}

#[test]
fn sphere_potential_closed_form() {
    let s = sphere();
    let mut pts = Points::new(5);
    for _ in 0..50 {
        let r = pts.position(s.waist(), s.cavity.wavelength);
        let f2 = (-2.0 * (r.x * r.x + r.y * r.y) / (s.waist() * s.waist())).exp();
        let expected = f2 * (s.k() * r.z).cos().powi(2) * s.relative.perpendicular;
        let v = dimensionless_potential(&s, &r, &pts.unit());
        assert!(close(v, expected, 1e-13, 1e-16));
    }
}

#[test]
fn potential_bounds_and_symmetries() {
    let mut pts = Points::new(7);
    for s in [rod(), disk()] {
        let rel = s.relative;
        let lo = rel.perpendicular.min(rel.parallel());
        let hi = rel.perpendicular.max(rel.parallel());
        for _ in 0..300 {
            let r = pts.position(s.waist(), s.cavity.wavelength);
            let m = pts.unit();
            let bracket = polarization_vector(&s, &m).x;
            assert!(bracket >= lo - 1e-15 && bracket <= hi + 1e-15);
            let v = dimensionless_potential(&s, &r, &m);
            assert!((-1e-15..=1.0 + 1e-15).contains(&v));
            let flipped = Vec3::new(r.x, r.y, -r.z);
            assert!(close(v, dimensionless_potential(&s, &flipped, &m), 1e-12, 1e-15));
            assert!(close(v, dimensionless_potential(&s, &r, &-m), 1e-12, 1e-15));
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut pts = Points::new(11);
    for s in [rod(), disk(), sphere()] {
        for _ in 0..100 {
            let r = pts.position(s.waist(), s.cavity.wavelength);
            let m = pts.unit();
            let g = potential_with_gradient(&s, &r, &m);
            assert!(close(g.value, dimensionless_potential(&s, &r, &m), 1e-14, 1e-16));
            let scale_r = g.grad_r.norm().max(s.k() * 1e-3);
            for c in 0..3 {
                let h = if c == 2 { 1e-4 / s.k() } else { 1e-4 * s.waist() };
                let mut rp = r;
                let mut rm = r;
                rp[c] += h;
                rm[c] -= h;
                let fd = (dimensionless_potential(&s, &rp, &m) - dimensionless_potential(&s, &rm, &m)) / (2.0 * h);
                assert!((fd - g.grad_r[c]).abs() < 1e-6 * scale_r, "{:?} r[{c}]", s.kind());
            }
            // rotate m about two tangent axes
            let t1 = crate::rotor::any_perpendicular(&m);
            let t2 = m.cross(&t1);
            let scale_m = g.grad_m.norm().max(1e-3);
            for t in [t1, t2] {
                let h: f64 = 1e-5;
                let mp = (m * h.cos() + t * h.sin()).normalize();
                let mm = (m * h.cos() - t * h.sin()).normalize();
                let fd = (dimensionless_potential(&s, &r, &mp) - dimensionless_potential(&s, &r, &mm)) / (2.0 * h);
                assert!((fd - g.grad_m.dot(&t)).abs() < 1e-6 * scale_m, "{:?} tangent", s.kind());
            }
            assert!(g.grad_m.dot(&m).abs() < 1e-12);
        }
    }
}

#[test]
fn torque_vanishes_at_alignment() {
    let s = rod();
    let g = conservative_force(&s, &Vec3::zeros(), &Vec3::x(), 1e4);
    assert!(g.torque.norm() < 1e-40);
    let tilted = Vec3::new(1.0, 0.1, 0.05).normalize();
    let g = conservative_force(&s, &Vec3::zeros(), &tilted, 1e4);
    assert!(g.torque.dot(&tilted).abs() < 1e-10 * g.torque.norm());
    // restoring: the torque turns m back toward e_x
    assert!(tilted.cross(&Vec3::x()).dot(&g.torque) > 0.0);
}

#[test]
fn amplitude_point_particle_limit() {
    let base = sphere();
    let mut pts = Points::new(13);
    let n = pts.unit();
    let (e1, _) = polarization_basis(&n);
    let reference = amplitude_for(&base, &n, &e1, &Vec3::zeros(), &Vec3::z()).norm();
    for i in 0..40 {
        let z = i as f64 * 0.05 / base.k();
        let a = amplitude_for(&base, &n, &e1, &Vec3::new(0.0, 0.0, z), &Vec3::z()).norm();
        assert!((a - reference * (base.k() * z).cos().abs()).abs() < 1e-8 * reference);
    }
    let far = Vec3::new(40.0 * base.waist(), 0.0, 0.0);
    assert!(scattering_amplitude(&rod(), &n, 1, &far, &Vec3::x()).norm() < 1e-300);
}

#[test]
fn amplitude_derivatives_match_finite_differences() {
    let mut pts = Points::new(17);
    for s in [rod(), disk()] {
        for _ in 0..20 {
            let r = pts.position(s.waist(), s.cavity.wavelength);
            let m = pts.unit();
            let n = pts.unit();
            let (e1, e2) = polarization_basis(&n);
            for eps in [e1, e2] {
                let d = amplitude_with_derivatives(&s, &n, &eps, &r, &m);
                let scale = d.grad_r.iter().map(|c| c.norm()).fold(0.0, f64::max);
                for c in 0..3 {
                    let h = if c == 2 { 1e-5 / s.k() } else { 1e-5 * s.waist() };
                    let mut rp = r;
                    let mut rm = r;
                    rp[c] += h;
                    rm[c] -= h;
                    let fd = (amplitude_for(&s, &n, &eps, &rp, &m) - amplitude_for(&s, &n, &eps, &rm, &m)) / (2.0 * h);
                    assert!((fd - d.grad_r[c]).norm() < 1e-7 * scale, "r[{c}]");
                }
                let t = crate::rotor::any_perpendicular(&m);
                let h: f64 = 1e-6;
                let mp = (m * h.cos() + t * h.sin()).normalize();
                let mm = (m * h.cos() - t * h.sin()).normalize();
                let fd = (amplitude_for(&s, &n, &eps, &r, &mp) - amplitude_for(&s, &n, &eps, &r, &mm)) / (2.0 * h);
                let mscale = d.grad_m.iter().map(|c| c.norm()).fold(1e-3, f64::max);
                assert!((fd - d.along_m(&t)).norm() < 1e-7 * mscale);
            }
        }
    }
}

/// Brute-force angular sums straight from the amplitude and its derivatives.
fn brute_force(s: &System, r: &Vec3, m: &Vec3, degree: usize) -> ScatteringSums {
    let q = SphereQuadrature::new(degree).unwrap();
    let mut out = ScatteringSums::default();
    for node in &q.nodes {
        for eps in node.polarizations {
            let d = amplitude_with_derivatives(s, &node.n, &eps, r, m);
            out.rate += node.weight * d.value.norm_sqr();
            for c in 0..3 {
                out.force[c] += node.weight * (d.value.conj() * d.grad_r[c]).im;
            }
            let im_grad = Vec3::new(
                (d.value.conj() * d.grad_m[0]).im,
                (d.value.conj() * d.grad_m[1]).im,
                (d.value.conj() * d.grad_m[2]).im,
            );
            out.torque += m.cross(&im_grad) * node.weight;
        }
    }
    out
}

fn sums_close(a: &ScatteringSums, b: &ScatteringSums, rel: f64, force_scale: f64) {
    assert!(close(a.rate, b.rate, rel, 1e-300), "rate {} vs {}", a.rate, b.rate);
    assert!((a.force - b.force).norm() <= rel * force_scale, "force {:?} vs {:?}", a.force, b.force);
    assert!((a.torque - b.torque).norm() <= rel, "torque {:?} vs {:?}", a.torque, b.torque);
}

#[test]
fn kernels_agree_with_brute_force() {
    let mut pts = Points::new(19);
    for s in [rod(), disk(), sphere()] {
        let fast = ScatteringKernel::for_system(&s, DEFAULT_QUADRATURE_DEGREE).unwrap();
        let prod = ScatteringKernel::product(DEFAULT_QUADRATURE_DEGREE).unwrap();
        for _ in 0..10 {
            let r = pts.position(s.waist(), s.cavity.wavelength);
            let m = pts.unit();
            let reference = brute_force(&s, &r, &m, DEFAULT_QUADRATURE_DEGREE);
            sums_close(&prod.evaluate(&s, &r, &m, true), &reference, 1e-10, s.k());
            sums_close(&fast.evaluate(&s, &r, &m, true), &reference, 1e-10, s.k());
        }
    }
}

#[test]
fn point_particle_rate_is_gamma0() {
    let s = sphere();
    let sums = brute_force(&s, &Vec3::zeros(), &Vec3::z(), 30);
    let c = s.relative.perpendicular;
    assert!((sums.rate - c * c).abs() < 1e-13);
    let est = scattering_rate(&s, &Vec3::zeros(), &Vec3::z(), 30).unwrap();
    assert!(est.converged);
    assert!((est.gamma_sc / (s.coupling.gamma0 * c * c) - 1.0).abs() < 1e-13);
}

#[test]
fn rate_periodicity_and_convergence() {
    let s = rod();
    let mut pts = Points::new(23);
    for _ in 0..10 {
        let r = pts.position(s.waist(), s.cavity.wavelength);
        let m = pts.unit();
        let a = scattering_rate(&s, &r, &m, 30).unwrap();
        assert!(a.converged, "relative change {}", a.relative_change);
        assert!(a.gamma_sc >= 0.0);
        let shifted = r + Vec3::z() * (PI / s.k());
        let b = scattering_rate(&s, &shifted, &m, 30).unwrap();
        assert!(close(a.gamma_sc, b.gamma_sc, 1e-10, 0.0));
    }
    let far = Vec3::new(40.0 * s.waist(), 0.0, 0.0);
    assert_eq!(scattering_rate(&s, &far, &Vec3::x(), 30).unwrap().gamma_sc, 0.0);
    assert!(scattering_rate(&s, &Vec3::zeros(), &Vec3::x(), 12).is_err());
}

#[test]
fn radiation_pressure_special_cases() {
    let s = sphere();
    let mut pts = Points::new(29);
    let scale = s.hbar_u0().abs() * 1e4 * s.k();
    for _ in 0..10 {
        let r = pts.position(s.waist(), s.cavity.wavelength);
        let f = radiation_pressure(&s, &r, &pts.unit(), 1e4, 30).unwrap();
        assert!(f.force.norm() < 1e-12 * scale && f.torque.norm() < 1e-12 * scale / s.k());
    }
    let rod = rod();
    let scale = rod.hbar_u0().abs() * 1e4 * rod.k();
    let f = radiation_pressure(&rod, &Vec3::zeros(), &Vec3::x(), 1e4, 30).unwrap();
    assert!(f.force.norm() < 1e-10 * scale);
    assert!(f.torque.norm() < 1e-10 * scale / rod.k());
    let zero = radiation_pressure(&rod, &Vec3::new(1e-7, 0.0, 2e-7), &Vec3::y(), 0.0, 30).unwrap();
    assert_eq!(zero.force, Vec3::zeros());
    // torque stays perpendicular to m
    let m = Vec3::new(0.6, 0.3, 0.5).normalize();
    let f = radiation_pressure(&rod, &Vec3::new(0.0, 0.0, 1e-7), &m, 1e4, 30).unwrap();
    assert!(f.torque.dot(&m).abs() < 1e-10 * f.torque.norm().max(1e-300));
}

#[test]
fn detector_power_bookkeeping() {
    let s = rod();
    let r = Vec3::new(3e-7, -1e-7, 1.1e-7);
    let m = Vec3::new(0.8, 0.3, 0.2).normalize();
    let photons = 2.5e5;
    let dist = 0.05;
    let q = SphereQuadrature::new(30).unwrap();
    let power: f64 = q
        .nodes
        .iter()
        .map(|node| node.weight * detector_intensity(&s, &node.n, dist, &r, &m, photons).unwrap().total)
        .sum::<f64>()
        * 4.0
        * PI
        * dist
        * dist;
    let gamma = scattering_rate(&s, &r, &m, 30).unwrap().gamma_sc;
    let expected = crate::constants::HBAR * s.coupling.pump_frequency * photons * gamma;
    assert!(close(power, expected, 1e-10, 0.0));

    let near = detector_intensity(&s, &Vec3::y(), dist, &r, &m, photons).unwrap();
    let far = detector_intensity(&s, &Vec3::y(), 2.0 * dist, &r, &m, photons).unwrap();
    assert!(close(near.total, 4.0 * far.total, 1e-14, 0.0));
    assert!(!near.near_field_warning);
    assert!(detector_intensity(&s, &Vec3::y(), 1e-6, &r, &m, photons).unwrap().near_field_warning);
    assert!(detector_intensity(&s, &Vec3::y(), 0.0, &r, &m, photons).is_err());

    let along = detector_intensity(&s, &Vec3::x(), dist, &Vec3::zeros(), &Vec3::x(), photons).unwrap();
    let across = detector_intensity(&s, &Vec3::y(), dist, &Vec3::zeros(), &Vec3::x(), photons).unwrap();
    assert!(along.total < across.total);
}
