//! Tape gradients against central finite differences.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Denominator floor of the relative error, so components whose true value is
/// near zero are compared on an absolute scale instead.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// One-sided slopes that disagree by more than this fraction mark a kink.
const KINK_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct InputCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Flat indices skipped because `f` is not differentiable there.
    pub excluded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub inputs: Vec<InputCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.inputs.iter().map(|c| c.max_rel_err).fold(0.0, f64::max)
    }

    pub fn excluded_count(&self) -> usize {
        self.inputs.iter().map(|c| c.excluded.len()).sum()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err() <= tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

fn eval<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
    let out = f(&mut tape, &vars)?;
    let v = tape.value(out);
    if v.numel() != 1 {
        return Err(Error::usage(format!("grad_check: f must be scalar, got {}", v.shape())));
    }
    Ok(v.data()[0])
}

/// Compares every input element's tape gradient with
/// `(f(x+h) - f(x-h)) / 2h`.
///
/// `f` must rebuild its graph deterministically on each call (seed any
/// randomness inside it).
pub fn grad_check<F>(f: F, inputs: &[Tensor], step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if step.is_nan() || step <= 0.0 {
        return Err(Error::usage(format!("grad_check: step {step} must be positive")));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| {
            tape.grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.numel()])
        })
        .collect();
    drop(tape);

    let base = eval(&f, inputs)?;
    let mut probe: Vec<Tensor> = inputs.to_vec();
    let mut report = Vec::with_capacity(inputs.len());
    for (i, grads) in analytic.iter().enumerate() {
        let mut check = InputCheck {
            max_rel_err: 0.0,
            checked: 0,
            excluded: Vec::new(),
        };
        for (j, &a) in grads.iter().enumerate() {
            let x0 = inputs[i].data()[j];
            probe[i].data_mut()[j] = x0 + step;
            let plus = eval(&f, &probe)?;
            probe[i].data_mut()[j] = x0 - step;
            let minus = eval(&f, &probe)?;
            probe[i].data_mut()[j] = x0;
            let fwd = (plus - base) / step;
            let bwd = (base - minus) / step;
            if (fwd - bwd).abs() > KINK_TOL * fwd.abs().max(bwd.abs()).max(1.0) {
                check.excluded.push(j);
                continue;
            }
            let numeric = (plus - minus) / (2.0 * step);
            check.max_rel_err = check.max_rel_err.max(relative_error(a, numeric));
            check.checked += 1;
        }
        report.push(check);
    }
    Ok(GradCheckReport { inputs: report })
}
