use super::{Matrix, ParamStore};

/// Adam moments for every parameter of one store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Matrix>,
    pub second_moment: Vec<Matrix>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect::<Vec<_>>()
        };
        AdamState {
            first_moment: zeros(),
            second_moment: zeros(),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Weight decay is coupled: `weight_decay * value`
/// is added to the gradient before the moments are updated. Frozen rows are left
/// untouched. All gradients are zeroed afterwards.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, lr: f64, weight_decay: f64) {
    assert_eq!(store.len(), state.first_moment.len(), "optimizer state does not match store");
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    for ((p, m), v) in store
        .iter_mut()
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        let cols = p.value.cols();
        for r in 0..p.value.rows() {
            if p.is_row_frozen(r) {
                continue;
            }
            let span = r * cols..(r + 1) * cols;
            let values = &mut p.value.data_mut()[span.clone()];
            let grads = &p.gradient.data()[span.clone()];
            let ms = &mut m.data_mut()[span.clone()];
            let vs = &mut v.data_mut()[span];
            for i in 0..cols {
                let g = grads[i] + weight_decay * values[i];
                ms[i] = b1 * ms[i] + (1.0 - b1) * g;
                vs[i] = b2 * vs[i] + (1.0 - b2) * g * g;
                let m_hat = ms[i] / c1;
                let v_hat = vs[i] / c2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
            }
        }
    }
    store.zero_grad();
}
