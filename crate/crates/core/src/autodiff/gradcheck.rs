//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamStore, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Tensors with more elements than this are checked on a random subset
    /// of this many elements.
    pub max_elements: usize,
    /// Denominator floor of the relative error, so that gradients that are
    /// zero up to rounding do not blow it up.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            max_elements: 256,
            abs_floor: 1e-7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub numel: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

impl std::fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<40} {:>8} {:>8} {:>12} {:>12}", "parameter", "checked", "numel", "max_abs", "max_rel")?;
        for p in &self.params {
            writeln!(
                f,
                "{:<40} {:>8} {:>8} {:>12.3e} {:>12.3e}",
                p.name, p.checked, p.numel, p.max_abs_err, p.max_rel_err
            )?;
        }
        write!(
            f,
            "max_rel_err = {:.3e} (tolerance {:.1e}): {}",
            self.max_rel_err,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare the gradients that `builder` produces through [`Tape::backward`]
/// with central finite differences of the loss it returns.
pub fn gradcheck<F>(store: &mut ParamStore<f64>, builder: F, opts: &GradcheckOptions) -> Result<GradcheckReport>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = builder(&mut tape, store)?;
        let v = tape.value(loss);
        if !v.is_scalar() {
            return Err(Error::NotScalar { shape: v.shape().to_vec() });
        }
        Ok(v.data()[0])
    };

    let first = eval(store)?;
    let second = eval(store)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    store.zero_grad();
    {
        let mut tape = Tape::new();
        let loss = builder(&mut tape, store)?;
        tape.backward(loss, store)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    let mut params = Vec::with_capacity(ids.len());
    for id in ids {
        let numel = store.value(id).len();
        let mut elems: Vec<usize> = if numel > opts.max_elements {
            sample(&mut rng, numel, opts.max_elements).into_vec()
        } else {
            (0..numel).collect()
        };
        elems.sort_unstable();

        let mut check = ParamCheck {
            name: store.get(id).name.clone(),
            checked: elems.len(),
            numel,
            max_abs_err: 0.0,
            max_rel_err: 0.0,
        };
        for &e in &elems {
            let orig = store.value(id).data()[e];
            store.value_mut(id)[e] = orig + opts.step;
            let plus = eval(store)?;
            store.value_mut(id)[e] = orig - opts.step;
            let minus = eval(store)?;
            store.value_mut(id)[e] = orig;

            let numeric = (plus - minus) / (2.0 * opts.step);
            let analytic = store.grad(id).data()[e];
            check.max_abs_err = check.max_abs_err.max((analytic - numeric).abs());
            check.max_rel_err = check.max_rel_err.max(relative_error(analytic, numeric, opts.abs_floor));
        }
        params.push(check);
    }
    store.zero_grad();

    let max_rel_err = params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max);
    Ok(GradcheckReport {
        max_rel_err,
        tolerance: opts.tolerance,
        params,
    })
}
