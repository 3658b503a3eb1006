use crate::error::{Error, Result};
use crate::numkit::{Matrix, Tape, Var};

/// Gradients below this magnitude are compared absolutely rather than relatively.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Central finite differences of a scalar-valued tape function at `point`.
pub fn finite_difference<F>(f: &F, point: &Matrix<f64>, epsilon: f64) -> Result<Matrix<f64>>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let eval = |x: Matrix<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.constant(x);
        let out = f(&mut tape, v)?;
        scalar(&tape, out)
    };
    let mut grad = Matrix::zeros(point.rows(), point.cols());
    for k in 0..point.len() {
        let mut plus = point.clone();
        plus.as_mut_slice()[k] += epsilon;
        let mut minus = point.clone();
        minus.as_mut_slice()[k] -= epsilon;
        grad.as_mut_slice()[k] = (eval(plus)? - eval(minus)?) / (2.0 * epsilon);
    }
    Ok(grad)
}

/// Reverse-mode gradient of `f` at `point`.
pub fn analytic_gradient<F>(f: &F, point: &Matrix<f64>) -> Result<Matrix<f64>>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let out = f(&mut tape, x)?;
    tape.backward(out)?;
    Ok(tape
        .grad(x)
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(point.rows(), point.cols())))
}

/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Largest entrywise [`relative_error`] between the reverse-mode gradient
/// and central finite differences, in double precision.
///
/// `f` must be deterministic: it is re-evaluated twice per coordinate.
pub fn grad_check<F>(f: F, point: &Matrix<f64>, epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let analytic = analytic_gradient(&f, point)?;
    let numeric = finite_difference(&f, point, epsilon)?;
    Ok(analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

fn scalar(tape: &Tape<f64>, v: Var) -> Result<f64> {
    let m = tape.value(v);
    if m.shape() != (1, 1) {
        return Err(Error::shape(format!(
            "gradient check needs a scalar function, got {:?}",
            m.shape()
        )));
    }
    Ok(m.get(0, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let f = |t: &mut Tape<f64>, x: Var| {
            let sq = t.mul(x, x)?;
            Ok(t.sum(sq))
        };
        let p = Matrix::filled(1, 1, 3.0);
        let fd = finite_difference(&f, &p, 1e-3).unwrap();
        assert!((fd.get(0, 0) - 6.0).abs() < 1e-6);
        assert_eq!(analytic_gradient(&f, &p).unwrap().get(0, 0), 6.0);
        assert!(grad_check(f, &p, 1e-3).unwrap() < 1e-6);
    }

    #[test]
    fn non_scalar_function_is_rejected() {
        let f = |_: &mut Tape<f64>, x: Var| Ok(x);
        assert!(grad_check(f, &Matrix::zeros(2, 2), 1e-4).is_err());
    }
}
