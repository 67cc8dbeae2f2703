use rand::Rng;

use super::ParamStore;

/// Gradients smaller than this in magnitude are compared absolutely.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_relative_error: f64,
    /// `(parameter name, flat index, analytic, numeric)` of the worst probe.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Compares tape gradients with central differences on randomly chosen coordinates.
///
/// `objective` must zero the gradients, run forward and backward, and return the
/// loss; it has to be deterministic (no dropout). Values are restored afterwards
/// and the store is left holding the analytic gradients.
pub fn grad_check<F, R>(
    store: &mut ParamStore,
    mut objective: F,
    probes: usize,
    h: f64,
    rng: &mut R,
) -> GradCheckReport
where
    F: FnMut(&mut ParamStore) -> f64,
    R: Rng + ?Sized,
{
    objective(store);
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.gradient.data().to_vec()).collect();
    let total = store.num_values();
    let mut report = GradCheckReport {
        probes: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    if total == 0 {
        return report;
    }

    for _ in 0..probes {
        let (pi, idx) = locate(store, rng.random_range(0..total));
        let id = super::ParamId(pi);
        let original = store.value(id).data()[idx];

        store.get_mut(id).value.data_mut()[idx] = original + h;
        let plus = objective(store);
        store.get_mut(id).value.data_mut()[idx] = original - h;
        let minus = objective(store);
        store.get_mut(id).value.data_mut()[idx] = original;

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[pi][idx];
        let err = relative_error(a, numeric);
        report.probes += 1;
        if report.worst.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some((store.get(id).name.clone(), idx, a, numeric));
        }
    }

    for (p, g) in store.iter_mut().zip(analytic) {
        p.gradient.data_mut().copy_from_slice(&g);
    }
    report
}

fn locate(store: &ParamStore, mut flat: usize) -> (usize, usize) {
    for (i, p) in store.iter().enumerate() {
        let n = p.value.data().len();
        if flat < n {
            return (i, flat);
        }
        flat -= n;
    }
    unreachable!("flat index beyond parameter count")
}
