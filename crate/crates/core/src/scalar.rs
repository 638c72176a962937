use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point type the min-plus and cycle-mean kernels are generic over.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
