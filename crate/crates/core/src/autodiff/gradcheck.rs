use super::array::Array;
use super::graph::{Graph, Tensor};
use crate::error::{Error, Result};

/// Magnitudes below this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-8;

/// Outcome of [`grad_check`].
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error per input, in input order.
    pub max_rel_error: Vec<f64>,
    /// Largest absolute error per input.
    pub max_abs_error: Vec<f64>,
    pub tolerance: f64,
    /// [`Graph::kink_margin`] at the base point.
    pub kink_margin: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.max_rel_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() < self.tolerance
    }

    /// True when the base point lies at least `clearance` from every
    /// non-smooth switch point, so central differences are valid there.
    pub fn smooth_within(&self, clearance: f64) -> bool {
        self.kink_margin > clearance
    }
}

/// Relative error `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

fn evaluate<F>(f: &F, inputs: &[Array]) -> (Graph, Vec<Tensor>, Tensor)
where
    F: Fn(&mut Graph, &[Tensor]) -> Tensor,
{
    let mut g = Graph::new();
    let ts: Vec<Tensor> = inputs.iter().map(|a| g.input(a.clone())).collect();
    let out = f(&mut g, &ts);
    (g, ts, out)
}

/// Compares reverse-mode gradients of the scalar function `f` with central
/// differences `(f(x + h) - f(x - h)) / 2h`, element by element.
///
/// `f` is evaluated twice at the base point first; any bitwise difference
/// aborts the check with [`Error::NonDeterministic`].
pub fn grad_check<F>(f: F, inputs: &[Array], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Tensor]) -> Tensor,
{
    let (mut g, ts, out) = evaluate(&f, inputs);
    if g.value(out).len() != 1 {
        return Err(Error::Contract(format!(
            "grad_check needs a scalar function, got shape {:?}",
            g.shape(out)
        )));
    }
    let base = g.scalar(out);
    let kink_margin = g.kink_margin();
    let (g2, _, out2) = evaluate(&f, inputs);
    if g2.scalar(out2).to_bits() != base.to_bits() {
        return Err(Error::NonDeterministic(format!(
            "repeated evaluation gave {} then {}",
            base,
            g2.scalar(out2)
        )));
    }
    g.backward(out);
    let analytic: Vec<Array> = ts.iter().map(|t| g.grad(*t)).collect();

    let mut probe = inputs.to_vec();
    let mut max_rel = Vec::with_capacity(inputs.len());
    let mut max_abs = Vec::with_capacity(inputs.len());
    for (i, grad) in analytic.iter().enumerate() {
        let (mut worst_rel, mut worst_abs) = (0.0f64, 0.0f64);
        for j in 0..inputs[i].len() {
            let x = inputs[i].data()[j];
            probe[i].data_mut()[j] = x + h;
            let (ga, _, oa) = evaluate(&f, &probe);
            probe[i].data_mut()[j] = x - h;
            let (gb, _, ob) = evaluate(&f, &probe);
            probe[i].data_mut()[j] = x;
            let numeric = (ga.scalar(oa) - gb.scalar(ob)) / (2.0 * h);
            let a = grad.data()[j];
            worst_rel = worst_rel.max(relative_error(a, numeric));
            worst_abs = worst_abs.max((a - numeric).abs());
        }
        max_rel.push(worst_rel);
        max_abs.push(worst_abs);
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        tolerance: tol,
        kink_margin,
    })
}
