//! Truncated Taylor jets in the three spacetime variables `(t, x1, x2)`.
//!
//! A jet stores the Taylor coefficients up to total order four at a fixed
//! point. Products and exponentials are exact up to that order, which gives
//! exact derivatives of closed-form fields without finite differences.

use crate::C64;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

pub const ORDER: usize = 4;
pub const SIZE: usize = 35;

struct Tables {
    exps: Vec<[usize; 3]>,
    index: [[[usize; ORDER + 1]; ORDER + 1]; ORDER + 1],
    products: Vec<(usize, usize, usize)>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut exps = Vec::with_capacity(SIZE);
        for deg in 0..=ORDER {
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    exps.push([a, b, deg - a - b]);
                }
            }
        }
        let mut index = [[[usize::MAX; ORDER + 1]; ORDER + 1]; ORDER + 1];
        for (i, e) in exps.iter().enumerate() {
            index[e[0]][e[1]][e[2]] = i;
        }
        let mut products = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                let s = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                if s[0] + s[1] + s[2] <= ORDER {
                    products.push((i, j, index[s[0]][s[1]][s[2]]));
                }
            }
        }
        Tables { exps, index, products }
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Taylor coefficients of a function of `(t, x1, x2)` around a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [C64; SIZE]);

impl Jet {
    pub fn zero() -> Self {
        Jet([C64::new(0.0, 0.0); SIZE])
    }

    pub fn constant(v: C64) -> Self {
        let mut j = Jet::zero();
        j.0[0] = v;
        j
    }

    /// The coordinate `axis` around the base value `at`.
    pub fn variable(axis: usize, at: f64) -> Self {
        let mut j = Jet::constant(C64::new(at, 0.0));
        let mut e = [0; 3];
        e[axis] = 1;
        j.0[tables().index[e[0]][e[1]][e[2]]] = C64::new(1.0, 0.0);
        j
    }

    pub fn coeff(&self, e: [usize; 3]) -> C64 {
        self.0[tables().index[e[0]][e[1]][e[2]]]
    }

    /// Partial derivative `d_t^a d_1^b d_2^c` at the base point.
    pub fn derivative(&self, e: [usize; 3]) -> C64 {
        self.coeff(e) * (factorial(e[0]) * factorial(e[1]) * factorial(e[2]))
    }

    pub fn value(&self) -> C64 {
        self.0[0]
    }

    pub fn scale(&self, c: C64) -> Jet {
        let mut out = *self;
        for v in out.0.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn re(&self) -> Jet {
        let mut out = *self;
        for v in out.0.iter_mut() {
            *v = C64::new(v.re, 0.0);
        }
        out
    }

    /// Jet of the derivative along `axis`; its top-order coefficients are
    /// lost, so it is exact only up to order three.
    pub fn diff(&self, axis: usize) -> Jet {
        let t = tables();
        let mut out = Jet::zero();
        for (i, e) in t.exps.iter().enumerate() {
            let mut up = *e;
            up[axis] += 1;
            if up[0] + up[1] + up[2] <= ORDER {
                out.0[i] = self.0[t.index[up[0]][up[1]][up[2]]] * up[axis] as f64;
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let base = self.0[0].exp();
        let mut q = *self;
        q.0[0] = C64::new(0.0, 0.0);
        let mut term = Jet::constant(C64::new(1.0, 0.0));
        let mut sum = term;
        for n in 1..=ORDER {
            term = (term * q).scale(C64::new(1.0 / n as f64, 0.0));
            sum = sum + term;
        }
        sum.scale(base)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::zero();
        for &(i, j, k) in &tables().products {
            out.0[k] += self.0[i] * rhs.0[j];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_jet(p: [f64; 3]) -> [Jet; 3] {
        [Jet::variable(0, p[0]), Jet::variable(1, p[1]), Jet::variable(2, p[2])]
    }

    #[test]
    fn monomial_count() {
        assert_eq!(tables().exps.len(), SIZE);
    }

    #[test]
    fn polynomial_derivatives() {
        let [t, x, y] = point_jet([0.5, -1.0, 2.0]);
        // f = t^2 x y^2
        let f = t * t * x * y * y;
        assert!((f.value().re - 0.25 * -1.0 * 4.0).abs() < 1e-15);
        assert!((f.derivative([1, 0, 0]).re - 2.0 * 0.5 * -1.0 * 4.0).abs() < 1e-14);
        assert!((f.derivative([2, 1, 1]).re - 2.0 * 2.0 * 2.0).abs() < 1e-14);
        assert_eq!(f.derivative([0, 0, 3]).re, 0.0);
    }

    #[test]
    fn exponential_matches_closed_form() {
        let [t, x, _] = point_jet([0.3, 0.7, 0.0]);
        let arg = (t * x).scale(C64::new(0.0, 1.0)) - x * x;
        let f = arg.exp();
        // d_x of exp(i t x - x^2) = (i t - 2x) f
        let val = C64::new(-0.49, 0.21).exp();
        assert!((f.value() - val).norm() < 1e-15);
        assert!((f.derivative([0, 1, 0]) - C64::new(-1.4, 0.3) * val).norm() < 1e-14);
        // second derivative: ((i t - 2x)^2 - 2) f
        let k = C64::new(-1.4, 0.3);
        assert!((f.derivative([0, 2, 0]) - (k * k - 2.0) * val).norm() < 1e-13);
    }

    #[test]
    fn diff_commutes_with_coefficients() {
        let [t, x, y] = point_jet([0.1, 0.2, 0.3]);
        let f = (t * x + y * y * x).exp();
        let d = f.diff(1);
        assert!((d.derivative([1, 0, 1]) - f.derivative([1, 1, 1])).norm() < 1e-13);
    }
}
