//! Marchenko-Pastur law with ratio `c`: Stieltjes transforms, density, CDF and
//! integrals.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::sampling::Statistic;
use crate::scalar::{cabs, csqrt, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchenkoPastur<T: Scalar> {
    c: T,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

impl<T: Scalar> MarchenkoPastur<T> {
    pub fn new(c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::Domain(format!(
                "ratio c must be positive and finite, got {}",
                c.to_f64()
            )));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> T {
        self.c
    }

    /// `((1 - sqrt c)^2, (1 + sqrt c)^2)`.
    pub fn edges(&self) -> (T, T) {
        let s = self.c.sqrt();
        ((T::one() - s).powi(2), (T::one() + s).powi(2))
    }

    pub fn atom_mass(&self) -> T {
        (T::one() - T::one() / self.c).max(T::zero())
    }

    fn roots(&self, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        let a = z * self.c;
        let b = z + Complex::new(self.c - T::one(), T::zero());
        let disc = csqrt(b * b - a * T::lit(4.0));
        let plus = b + disc;
        let minus = b - disc;
        let q = if plus.norm_sqr() >= minus.norm_sqr() {
            plus
        } else {
            minus
        } * T::lit(-0.5);
        (q / a, Complex::<T>::one() / q)
    }

    fn polish(&self, z: Complex<T>, t: Complex<T>) -> Complex<T> {
        let b = z + Complex::new(self.c - T::one(), T::zero());
        let f = z * self.c * t * t + b * t + Complex::one();
        let df = z * self.c * t * T::lit(2.0) + b;
        if df.is_zero() {
            t
        } else {
            t - f / df
        }
    }

    /// Solution of `t = 1 / (-z + 1 / (1 + c t))` in the upper half plane.
    pub fn stieltjes_t(&self, z: Complex<T>) -> Result<Complex<T>> {
        if !(z.im > T::zero()) {
            return Err(Error::Domain("Stieltjes transform needs Im z > 0".into()));
        }
        let (r1, r2) = self.roots(z);
        let scale = cabs(r1).max(cabs(r2));
        let gap = (r1.im - r2.im).abs();
        let t = if gap > T::lit(1e-9) * scale {
            if r1.im > r2.im {
                r1
            } else {
                r2
            }
        } else {
            self.homotopy(z)
        };
        Ok(self.polish(z, t))
    }

    /// Follows the branch from `Re z + 0.1 i` down to `z`.
    fn homotopy(&self, z: Complex<T>) -> Complex<T> {
        let top = T::lit(0.1).max(z.im);
        let steps = 200;
        let mut prev = {
            let (r1, r2) = self.roots(Complex::new(z.re, top));
            if r1.im > r2.im {
                r1
            } else {
                r2
            }
        };
        let ratio = (z.im / top).ln() / T::lit(steps as f64);
        for s in 1..=steps {
            let y = top * (ratio * T::lit(s as f64)).exp();
            let (r1, r2) = self.roots(Complex::new(z.re, y));
            prev = if cabs(r1 - prev) <= cabs(r2 - prev) {
                r1
            } else {
                r2
            };
        }
        prev
    }

    /// `c t - (1 - c) / z`.
    pub fn stieltjes_t_tilde(&self, z: Complex<T>) -> Result<Complex<T>> {
        let t = self.stieltjes_t(z)?;
        Ok(t * self.c - Complex::new(T::one() - self.c, T::zero()) / z)
    }

    /// `-1 / (z (1 + c t))`, algebraically equal to [`Self::stieltjes_t_tilde`].
    pub fn stieltjes_t_tilde_alt(&self, z: Complex<T>) -> Result<Complex<T>> {
        let t = self.stieltjes_t(z)?;
        Ok(-Complex::<T>::one() / (z * (t * self.c + T::one())))
    }

    /// `c (z t t~)^2`; its modulus stays below one off the real axis.
    pub fn u(&self, z: Complex<T>) -> Result<Complex<T>> {
        let p = z * self.stieltjes_t(z)? * self.stieltjes_t_tilde(z)?;
        Ok(p * p * self.c)
    }

    /// Relative residual of the defining equation.
    pub fn residual(&self, z: Complex<T>, t: Complex<T>) -> T {
        let rhs = Complex::<T>::one() / (-z + Complex::<T>::one() / (t * self.c + T::one()));
        cabs(t - rhs) / cabs(t)
    }

    /// Density of the absolutely continuous part.
    pub fn density_at(&self, lambda: T) -> T {
        let (lo, hi) = self.edges();
        if lambda <= lo || lambda >= hi || lambda <= T::zero() {
            return T::zero();
        }
        ((hi - lambda) * (lambda - lo)).sqrt() / (T::two_pi() * self.c * lambda)
    }

    pub fn density(&self, grid: &[T]) -> Vec<T> {
        grid.iter().map(|&x| self.density_at(x)).collect()
    }

    /// `int_lo^{lambda(theta_max)} f dmu_ac` with `lambda = lo + (hi - lo) sin^2 theta`.
    fn quad(&self, theta_max: T, f: &dyn Fn(T) -> Complex<T>) -> Complex<T> {
        let (lo, hi) = self.edges();
        let width = hi - lo;
        let kernel = |theta: T| {
            let (s, c) = (theta.sin(), theta.cos());
            let lambda = lo + width * s * s;
            let w = width * width * s * s * c * c / (T::pi() * self.c * lambda);
            f(lambda) * w
        };
        let rule = |n: usize| {
            let (x, w) = gauss_legendre(n);
            let half = theta_max * T::lit(0.5);
            x.iter()
                .zip(&w)
                .fold(Complex::zero(), |acc: Complex<T>, (xi, wi)| {
                    acc + kernel(half * (T::one() + T::lit(*xi))) * (half * T::lit(*wi))
                })
        };
        let mut n = 32;
        let mut prev = rule(n);
        while n < 2048 {
            n *= 2;
            let next = rule(n);
            if cabs(next - prev) <= T::lit(1e-14) * (T::one() + cabs(next)) {
                return next;
            }
            prev = next;
        }
        prev
    }

    /// `int f dmu` including the atom at zero.
    pub fn integrate_complex(&self, f: &dyn Fn(T) -> Complex<T>) -> Complex<T> {
        let ac = self.quad(T::frac_pi_2(), f);
        let atom = self.atom_mass();
        if atom > T::zero() {
            ac + f(T::zero()) * atom
        } else {
            ac
        }
    }

    pub fn integrate(&self, f: &dyn Fn(T) -> T) -> T {
        self.integrate_complex(&|x| Complex::new(f(x), T::zero()))
            .re
    }

    /// Closed forms where available, quadrature otherwise.
    pub fn integrate_statistic(&self, stat: Statistic) -> Result<T> {
        match stat {
            Statistic::SqDev => Ok(self.c),
            Statistic::Mean => Ok(T::one()),
            Statistic::LogDet => {
                if self.atom_mass() > T::zero() || self.c == T::one() {
                    Err(Error::Domain("log integral diverges for c >= 1".into()))
                } else {
                    Ok(self.integrate(&|x| x.ln()))
                }
            }
        }
    }

    pub fn cdf(&self, x: T) -> T {
        let atom = if x >= T::zero() {
            self.atom_mass()
        } else {
            T::zero()
        };
        let (lo, hi) = self.edges();
        if x <= lo {
            return atom;
        }
        let ac_total = T::one() - self.atom_mass();
        if x >= hi {
            return atom + ac_total;
        }
        let theta = ((x - lo) / (hi - lo)).sqrt().asin();
        (atom + self.quad(theta, &|_| Complex::one()).re).min(T::one())
    }
}
