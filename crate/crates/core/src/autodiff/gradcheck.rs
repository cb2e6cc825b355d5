use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::array::NdArray;
use super::optim::Parameter;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Something with parameters and a scalar loss that can be rebuilt on a
/// fresh tape. Models bind their input and target into the implementation.
pub trait Objective {
    fn parameters(&self) -> &[Parameter];
    fn parameters_mut(&mut self) -> &mut [Parameter];
    fn build_loss(&self, tape: &mut Tape) -> Result<Var>;

    fn loss_value(&self) -> Result<f64> {
        let mut tape = Tape::new();
        let loss = self.build_loss(&mut tape)?;
        Ok(tape.value(loss).data()[0])
    }
}

/// Absolute floor on the denominator so coordinates with a vanishing
/// gradient do not blow up the relative error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// (parameter, flat index, analytic, numeric) at the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(RELATIVE_ERROR_FLOOR)
}

/// Gradients of the objective's loss, one array per parameter.
pub fn analytic_gradients<O: Objective + ?Sized>(obj: &O) -> Result<Vec<NdArray>> {
    let mut scratch: Vec<Parameter> = obj
        .parameters()
        .iter()
        .map(|p| Parameter::new(p.value.clone()))
        .collect();
    let mut tape = Tape::new();
    let loss = obj.build_loss(&mut tape)?;
    tape.backward(loss)?.accumulate_into(&mut scratch);
    Ok(scratch.into_iter().map(|p| p.grad).collect())
}

/// Central finite differences over a random subsample of at least
/// `min(samples, total)` parameter coordinates, compared to the tape's
/// gradients.
pub fn grad_check<O: Objective + ?Sized>(
    obj: &mut O,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let analytic = analytic_gradients(obj)?;
    compare_gradients(obj, &analytic, h, samples, seed)
}

/// Like [`grad_check`] but against caller-supplied gradients.
pub fn compare_gradients<O: Objective + ?Sized>(
    obj: &mut O,
    analytic: &[NdArray],
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(h > 0.0 && h <= 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must lie in (0, 1e-3], got {h}"
        )));
    }
    let coords: Vec<(usize, usize)> = obj
        .parameters()
        .iter()
        .enumerate()
        .flat_map(|(p, param)| (0..param.len()).map(move |i| (p, i)))
        .collect();
    let chosen: Vec<(usize, usize)> = if coords.len() <= samples {
        coords
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = index::sample(&mut rng, coords.len(), samples).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|k| coords[k]).collect()
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: chosen.len(),
        worst: None,
    };
    for (p, i) in chosen {
        let original = obj.parameters()[p].value.data()[i];
        obj.parameters_mut()[p].value.data_mut()[i] = original + h;
        let plus = obj.loss_value()?;
        obj.parameters_mut()[p].value.data_mut()[i] = original - h;
        let minus = obj.loss_value()?;
        obj.parameters_mut()[p].value.data_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[p].data()[i];
        let err = relative_error(a, numeric);
        if report.worst.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some((p, i, a, numeric));
        }
    }
    Ok(report)
}
