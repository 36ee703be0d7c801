//! Quadrature rules on `[-1, 1]` and on the unit sphere.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Vec3;

use super::polarization_basis;

/// Gauss–Legendre rule on `[-1, 1]`, exact for polynomials of degree `2n-1`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One node of a [`SphereQuadrature`], with its polarization basis cached.
#[derive(Clone, Copy, Debug)]
pub struct SphereNode {
    pub n: Vec3,
    pub weight: f64,
    pub polarizations: [Vec3; 2],
}

/// Product rule for `∫ d²n/4π`: Gauss–Legendre in `cos θ` times the
/// trapezoid rule in `φ`. Weights sum to one.
///
/// A rule of degree `d` uses `d × 2d` nodes and integrates spherical
/// harmonics up to order `2d - 1` exactly.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub degree: usize,
    pub nodes: Vec<SphereNode>,
}

pub const DEFAULT_QUADRATURE_DEGREE: usize = 30;

impl SphereQuadrature {
    pub fn new(degree: usize) -> Result<Self> {
        if !(6..=50).contains(&degree) {
            return Err(Error::QuadratureDegree(degree));
        }
        let gl = GaussLegendre::new(degree);
        let n_phi = 2 * degree;
        let mut nodes = Vec::with_capacity(degree * n_phi);
        for (&ct, &wt) in gl.nodes.iter().zip(&gl.weights) {
            let st = (1.0 - ct * ct).sqrt();
            for j in 0..n_phi {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                let n = Vec3::new(st * phi.cos(), st * phi.sin(), ct);
                let (e1, e2) = polarization_basis(&n);
                nodes.push(SphereNode {
                    n,
                    weight: 0.5 * wt / n_phi as f64,
                    polarizations: [e1, e2],
                });
            }
        }
        Ok(Self { degree, nodes })
    }

    pub fn integrate(&self, f: impl Fn(&Vec3) -> f64) -> f64 {
        self.nodes.iter().map(|node| node.weight * f(&node.n)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_polynomials() {
        let gl = GaussLegendre::new(12);
        assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for p in 0..24 {
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            let got = gl.integrate(|x| x.powi(p));
            assert!((got - exact).abs() < 1e-14, "x^{p}: {got} vs {exact}");
        }
    }

    #[test]
    fn unsupported_degrees() {
        assert!(SphereQuadrature::new(5).is_err());
        assert!(SphereQuadrature::new(51).is_err());
        assert!(SphereQuadrature::new(6).is_ok());
    }

    #[test]
    fn constant_and_low_moments() {
        let q = SphereQuadrature::new(DEFAULT_QUADRATURE_DEGREE).unwrap();
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((q.integrate(|n| n.z * n.z) - 1.0 / 3.0).abs() < 1e-14);
        assert!((q.integrate(|n| n.x * n.x) - 1.0 / 3.0).abs() < 1e-14);
        assert!((q.integrate(|n| n.z * n.z * n.x * n.x) - 1.0 / 15.0).abs() < 1e-12);
        assert!((q.integrate(|n| n.z * n.z * (1.0 - n.x * n.x)) - 4.0 / 15.0).abs() < 1e-12);
    }

    /// `⟨n_x^a n_y^b n_z^c⟩` over the sphere, zero unless all exponents are
    /// even, else `(a-1)!!(b-1)!!(c-1)!! / (a+b+c+1)!!`.
    fn monomial_average(a: u32, b: u32, c: u32) -> f64 {
        if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
            return 0.0;
        }
        let dfact = |k: i64| -> f64 {
            let mut r = 1.0;
            let mut j = k;
            while j > 1 {
                r *= j as f64;
                j -= 2;
            }
            r
        };
        dfact(a as i64 - 1) * dfact(b as i64 - 1) * dfact(c as i64 - 1)
            / dfact((a + b + c) as i64 + 1)
    }

    #[test]
    fn monomials_up_to_degree_thirty() {
        let q = SphereQuadrature::new(DEFAULT_QUADRATURE_DEGREE).unwrap();
        for a in 0..=10u32 {
            for b in 0..=10u32 {
                for c in 0..=10u32 {
                    if a + b + c > 30 {
                        continue;
                    }
                    let got = q.integrate(|n| n.x.powi(a as i32) * n.y.powi(b as i32) * n.z.powi(c as i32));
                    let exact = monomial_average(a, b, c);
                    assert!((got - exact).abs() < 1e-12, "({a},{b},{c}): {got} vs {exact}");
                }
            }
        }
    }
}
