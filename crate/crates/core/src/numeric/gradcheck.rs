use super::Real;
use crate::error::{Error, Result};

/// Default central-difference step.
pub const DEFAULT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)`.
    pub max_rel_error: f64,
    /// Index of the parameter attaining the maximum, if any.
    pub worst_index: Option<usize>,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares the analytic gradient returned by `objective` against central
/// differences `(L(p + eps) - L(p - eps)) / (2 eps)`, one parameter at a time.
///
/// `objective` maps a flat parameter vector to `(loss, gradient)`.
pub fn grad_check<T, F>(params: &[T], eps: f64, mut objective: F) -> Result<GradCheckReport>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    if eps <= 0.0 {
        return Err(Error::config(format!("finite-difference step {eps} must be positive")));
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        analytic: 0.0,
        numeric: 0.0,
    };
    if params.is_empty() {
        return Ok(report);
    }

    let (loss, analytic) = objective(params)?;
    check_finite(loss, "base point")?;
    if analytic.len() != params.len() {
        return Err(Error::shape("analytic gradient", params.len(), analytic.len()));
    }

    let step = T::lit(eps);
    let mut probe = params.to_vec();
    for i in 0..params.len() {
        probe[i] = params[i] + step;
        let (plus, _) = objective(&probe)?;
        probe[i] = params[i] - step;
        let (minus, _) = objective(&probe)?;
        probe[i] = params[i];
        check_finite(plus, "positive probe")?;
        check_finite(minus, "negative probe")?;

        let numeric = (plus.as_f64() - minus.as_f64()) / (2.0 * eps);
        let a = analytic[i].as_f64();
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        let rel = (a - numeric).abs() / denom;
        if rel > report.max_rel_error || report.worst_index.is_none() {
            report = GradCheckReport {
                max_rel_error: rel.max(report.max_rel_error),
                worst_index: Some(i),
                analytic: a,
                numeric,
            };
        }
    }
    Ok(report)
}

fn check_finite<T: Real>(loss: T, at: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("loss is {loss} at {at}")))
    }
}
