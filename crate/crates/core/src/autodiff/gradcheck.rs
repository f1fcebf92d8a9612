//! Central finite-difference checks against the tape's analytic gradients.

use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Relative error used throughout: `|analytic - numeric| / max(1, |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

/// Max relative error between the analytic gradient of a scalar function
/// `f(x)` and central differences with step `h`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let input = tape.variable(x.clone());
    let out = f(&mut tape, input)?;
    let analytic = tape.grad(out, &[input])?.remove(0);

    let eval = |probe: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let input = tape.variable(probe.clone());
        let out = f(&mut tape, input)?;
        Ok(tape.value(out).item())
    };

    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for k in 0..x.len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + h;
        let plus = eval(&probe)?;
        probe.data_mut()[k] = orig - h;
        let minus = eval(&probe)?;
        probe.data_mut()[k] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max(relative_error(analytic.data()[k], numeric));
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub coordinates: usize,
}

/// Finite-difference check over every scalar of every parameter in `store`.
///
/// `f` builds the scalar loss on a fresh tape. Gradients already held in
/// `store` are left untouched.
pub fn grad_check_params<F>(store: &mut ParamStore, f: F, h: f64) -> Result<ParamCheck>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut scratch = store.clone();
    scratch.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, &scratch)?;
    tape.backward(loss, &mut scratch)?;
    let analytic: Vec<Tensor> = scratch.iter().map(|p| p.grad.clone()).collect();

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = f(&mut tape, s)?;
        Ok(tape.value(loss).item())
    };

    let mut report = ParamCheck {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        coordinates: 0,
    };
    let ids: Vec<_> = scratch.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for k in 0..scratch.get(id).tensor.len() {
            let orig = scratch.get(id).tensor.data()[k];
            scratch.get_mut(id).tensor.data_mut()[k] = orig + h;
            let plus = eval(&scratch)?;
            scratch.get_mut(id).tensor.data_mut()[k] = orig - h;
            let minus = eval(&scratch)?;
            scratch.get_mut(id).tensor.data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic[pi].data()[k], numeric);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst_param = scratch.get(id).name.clone();
                report.worst_index = k;
            }
        }
    }
    Ok(report)
}
