use std::fmt;

use crate::params::Parameterized;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Maximum allowed relative error.
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so entries whose true
    /// gradient is ~0 are judged on absolute error.
    pub floor: f64,
    /// Check at most this many evenly spaced entries per tensor.
    pub max_entries: Option<usize>,
    /// Retry entries that fail the central difference with second-order
    /// one-sided stencils on `[θ, θ+h]` and `[θ-h, θ]`, then with central
    /// differences at `h/10` and `h/100`; the entry passes if any estimate
    /// agrees. A kink of a piecewise-linear activation inside `(θ-h, θ+h)`
    /// spoils the central difference but not an estimate that avoids it.
    pub kink_fallback: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-5, tolerance: 1e-4, floor: 1e-6, max_entries: None, kink_fallback: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    /// Entries accepted by a fallback estimate after failing the central one.
    pub kinked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Entries accepted through the kink fallback.
    pub fn kinked(&self) -> usize {
        self.tensors.iter().map(|t| t.kinked).sum()
    }

    pub fn failures(&self) -> Vec<&TensorCheck> {
        self.tensors.iter().filter(|t| !(t.max_rel_err <= self.tolerance)).collect()
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failures = self.failures();
        if failures.is_empty() {
            return write!(f, "grad check passed: max rel err {:.3e} over {} tensors", self.max_rel_err(), self.tensors.len());
        }
        write!(f, "grad check failed (tolerance {:.1e}):", self.tolerance)?;
        for t in failures {
            write!(
                f,
                " {}[{}] analytic {:.6e} numeric {:.6e} rel err {:.3e};",
                t.name, t.worst_index, t.worst_analytic, t.worst_numeric, t.max_rel_err
            )?;
        }
        Ok(())
    }
}

/// Compares `analytic` against central differences of `loss` around `model`.
/// `analytic` must share `model`'s parameter layout.
pub fn grad_check<M, F>(model: &M, analytic: &M, mut loss: F, opts: GradCheckOptions) -> GradCheckReport
where
    M: Parameterized + Clone,
    F: FnMut(&M) -> f64,
{
    let mut probe = model.clone();
    let grads: Vec<(String, Vec<f64>)> =
        analytic.params().into_iter().map(|(n, t)| (n, t.data().to_vec())).collect();
    let mut tensors = Vec::with_capacity(grads.len());
    for (ti, (name, grad)) in grads.iter().enumerate() {
        let len = grad.len();
        let indices: Vec<usize> = match opts.max_entries {
            Some(k) if k < len => (0..k).map(|i| i * len / k).collect(),
            _ => (0..len).collect(),
        };
        let mut check = TensorCheck {
            name: name.clone(),
            checked: indices.len(),
            max_rel_err: 0.0,
            max_abs_err: 0.0,
            worst_index: 0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
            kinked: 0,
        };
        for &j in &indices {
            let orig = probe.params()[ti].1.data()[j];
            probe.params_mut()[ti].1.data_mut()[j] = orig + opts.h;
            let up = loss(&probe);
            probe.params_mut()[ti].1.data_mut()[j] = orig - opts.h;
            let down = loss(&probe);
            probe.params_mut()[ti].1.data_mut()[j] = orig;
            let a = grad[j];
            let err = |numeric: f64| {
                let abs = (a - numeric).abs();
                let rel = abs / a.abs().max(numeric.abs()).max(opts.floor);
                (if rel.is_nan() { f64::INFINITY } else { rel }, abs)
            };
            let mut numeric = (up - down) / (2.0 * opts.h);
            let (mut rel, mut abs) = err(numeric);
            if opts.kink_fallback && !(rel <= opts.tolerance) {
                let mut at = |delta: f64| {
                    probe.params_mut()[ti].1.data_mut()[j] = orig + delta;
                    let v = loss(&probe);
                    probe.params_mut()[ti].1.data_mut()[j] = orig;
                    v
                };
                let centre = at(0.0);
                let (half_up, half_down) = (at(0.5 * opts.h), at(-0.5 * opts.h));
                let mut estimates = vec![
                    (4.0 * half_up - 3.0 * centre - up) / opts.h,
                    (3.0 * centre - 4.0 * half_down + down) / opts.h,
                ];
                for step in [opts.h / 10.0, opts.h / 100.0] {
                    estimates.push((at(step) - at(-step)) / (2.0 * step));
                }
                if let Some(n) = estimates.into_iter().find(|&n| err(n).0 <= opts.tolerance) {
                    check.kinked += 1;
                    numeric = n;
                    (rel, abs) = err(n);
                }
            }
            if abs > check.max_abs_err {
                check.max_abs_err = abs;
            }
            if rel > check.max_rel_err || j == indices[0] {
                check.max_rel_err = rel;
                check.worst_index = j;
                check.worst_analytic = a;
                check.worst_numeric = numeric;
            }
        }
        tensors.push(check);
    }
    GradCheckReport { tensors, tolerance: opts.tolerance }
}
