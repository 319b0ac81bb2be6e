use ndarray::{Array1, ArrayView1};

use super::{shape_err, sigmoid, GruError, GruLayerParams, Real};

/// Intermediate values of one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCache<T> {
    pub reset: Array1<T>,
    pub update: Array1<T>,
    pub candidate: Array1<T>,
}

/// One GRU step on a single vector:
///
/// ```text
/// r  = sigmoid(W_rh h + W_rx x + b_r)
/// c  = tanh(W_hh (r * h) + W_hx x + b_h)
/// z  = sigmoid(W_zh h + W_zx x + b_z)
/// h' = z * h + (1 - z) * c
/// ```
pub fn gru_cell_forward<T: Real>(
    x: ArrayView1<T>,
    h_prev: ArrayView1<T>,
    params: &GruLayerParams<T>,
) -> Result<(Array1<T>, CellCache<T>), GruError> {
    if !params.shapes_consistent() {
        return Err(shape_err("consistent layer parameters", "inconsistent tensors"));
    }
    if x.len() != params.input() {
        return Err(shape_err(format!("input of {}", params.input()), x.len()));
    }
    if h_prev.len() != params.hidden() {
        return Err(shape_err(format!("hidden of {}", params.hidden()), h_prev.len()));
    }
    let reset = (params.w_rh.dot(&h_prev) + params.w_rx.dot(&x) + &params.b_r).mapv(sigmoid);
    let gated = &reset * &h_prev;
    let candidate = (params.w_hh.dot(&gated) + params.w_hx.dot(&x) + &params.b_h).mapv(T::tanh);
    let update = (params.w_zh.dot(&h_prev) + params.w_zx.dot(&x) + &params.b_z).mapv(sigmoid);
    let h_new = &update * &h_prev + (update.mapv(|z| T::one() - z) * &candidate);
    Ok((
        h_new,
        CellCache {
            reset,
            update,
            candidate,
        },
    ))
}
