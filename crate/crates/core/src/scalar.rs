use nalgebra::RealField;
use num_complex::Complex;
use rustfft::FftPlanner;

/// Real floating-point type the numerical kernels are generic over.
pub trait Scalar: RealField + Copy + Default + 'static {
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self;

    fn to_f64(self) -> f64;

    /// Machine epsilon of the type.
    fn eps() -> Self;

    /// Unnormalized in-place DFT. The forward transform uses `exp(-2 pi i jk/n)`.
    fn fft(buf: &mut [Complex<Self>], inverse: bool);
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn eps() -> Self {
                <$t>::EPSILON
            }

            fn fft(buf: &mut [Complex<Self>], inverse: bool) {
                let mut planner = FftPlanner::<$t>::new();
                let plan = if inverse {
                    planner.plan_fft_inverse(buf.len())
                } else {
                    planner.plan_fft_forward(buf.len())
                };
                plan.process(buf);
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// `exp(i theta)`.
#[inline]
pub fn cis<T: Scalar>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

#[inline]
pub fn cx<T: Scalar>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

#[inline]
pub fn real<T: Scalar>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

#[inline]
pub fn cabs<T: Scalar>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Principal square root.
pub fn csqrt<T: Scalar>(z: Complex<T>) -> Complex<T> {
    let r = cabs(z);
    let half = T::lit(0.5);
    let re = ((r + z.re) * half).max(T::zero()).sqrt();
    let im = ((r - z.re) * half).max(T::zero()).sqrt();
    Complex::new(re, if z.im < T::zero() { -im } else { im })
}

pub fn to_c64<T: Scalar>(z: Complex<T>) -> Complex<f64> {
    Complex::new(z.re.to_f64(), z.im.to_f64())
}

pub fn from_c64<T: Scalar>(z: Complex<f64>) -> Complex<T> {
    Complex::new(T::lit(z.re), T::lit(z.im))
}
