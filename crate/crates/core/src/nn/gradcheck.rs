use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Index of the parameter with the largest error.
    pub worst_index: usize,
    pub n_params: usize,
}

/// Finite-difference formula used by [`grad_check_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// `(f(x + h) - f(x - h)) / 2h`, error O(h^2).
    #[default]
    Central,
    /// `(-f(x + 2h) + 8 f(x + h) - 8 f(x - h) + f(x - 2h)) / 12h`, error O(h^4).
    FivePoint,
}

/// Compare analytic gradients with central differences
/// `(f(theta + eps e_i) - f(theta - eps e_i)) / 2 eps`.
///
/// The per-parameter error is `|a - n| / max(1e-8, |a| + |n|)`.
pub fn grad_check<F>(theta: &[f64], analytic: &[f64], eps: f64, loss: F) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    grad_check_with(theta, analytic, eps, Stencil::Central, loss)
}

pub fn grad_check_with<F>(theta: &[f64], analytic: &[f64], eps: f64, stencil: Stencil, mut loss: F) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(theta.len(), analytic.len(), "one analytic gradient per parameter");
    let mut probe = theta.to_vec();
    let mut at = |i: usize, step: f64, probe: &mut Vec<f64>| {
        probe[i] = theta[i] + step;
        let v = loss(probe);
        probe[i] = theta[i];
        v
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        n_params: theta.len(),
    };
    for (i, &a) in analytic.iter().enumerate().take(theta.len()) {
        let numeric = match stencil {
            Stencil::Central => (at(i, eps, &mut probe) - at(i, -eps, &mut probe)) / (2.0 * eps),
            Stencil::FivePoint => {
                let (p2, p1) = (at(i, 2.0 * eps, &mut probe), at(i, eps, &mut probe));
                let (m1, m2) = (at(i, -eps, &mut probe), at(i, -2.0 * eps, &mut probe));
                // differences first, so equal values cancel exactly
                (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps)
            }
        };
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    report
}
