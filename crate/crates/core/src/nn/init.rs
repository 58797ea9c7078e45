use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamId, ParamStore};
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// He (fan-in) normal initialisation for kernels that feed a ReLU, LeCun
/// normal for linear ones (shortcut, upsampling, output head), zeros for
/// biases. One seeded stream is
/// consumed in parameter registration order.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn kernel<T: Scalar>(
        &mut self,
        store: &mut ParamStore<T>,
        name: String,
        shape: [usize; 4],
        fan_in: usize,
    ) -> Result<ParamId> {
        self.normal(store, name, shape, (2.0 / fan_in as f64).sqrt())
    }

    /// `std = sqrt(1 / fan_in)`.
    pub fn linear_kernel<T: Scalar>(
        &mut self,
        store: &mut ParamStore<T>,
        name: String,
        shape: [usize; 4],
        fan_in: usize,
    ) -> Result<ParamId> {
        self.normal(store, name, shape, (1.0 / fan_in as f64).sqrt())
    }

    fn normal<T: Scalar>(&mut self, store: &mut ParamStore<T>, name: String, shape: [usize; 4], std: f64) -> Result<ParamId> {
        store.register(name, Tensor::randn(shape.to_vec(), std, &mut self.rng))
    }

    pub fn bias<T: Scalar>(&mut self, store: &mut ParamStore<T>, name: String, channels: usize) -> Result<ParamId> {
        store.register(name, Tensor::zeros(vec![channels]))
    }
}
