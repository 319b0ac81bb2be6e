use super::{cast, Params, Real, TrainConfig};

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Params<T>,
    pub v: Params<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(like: &Params<T>) -> Self {
        let mut m = like.clone();
        m.fill_zero();
        Self {
            v: m.clone(),
            m,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. With `grad_clip` set, the gradient is
/// rescaled to that global L2 norm first when it exceeds it.
pub fn adam_step<T: Real>(params: &mut Params<T>, grads: &Params<T>, state: &mut AdamState<T>, config: &TrainConfig) {
    state.step += 1;
    let b1: T = cast(config.beta1);
    let b2: T = cast(config.beta2);
    let eps: T = cast(config.epsilon);
    let lr: T = cast(config.learning_rate);
    let one = T::one();
    let t = state.step as i32;
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let clip = match config.grad_clip {
        Some(max) => {
            let norm = grads.squared_norm().sqrt();
            let max: T = cast(max);
            if norm > max {
                max / norm
            } else {
                one
            }
        }
        None => one,
    };
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
        for i in 0..p.len() {
            let gi = g[i] * clip;
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            p[i] = p[i] - lr * mh / (vh.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Params<f64> {
        // One 1x1 GRU layer gives scalar tensors to poke at.
        Params::zeros(1, &[1], &[2])
    }

    #[test]
    fn first_step_is_lr_sign() {
        let cfg = TrainConfig::default();
        let mut p = pair();
        let mut g = pair();
        g.layers[0].w_rh[[0, 0]] = 0.3;
        g.layers[0].w_rx[[0, 0]] = 3.0;
        g.layers[0].b_r[0] = -0.3;
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &cfg);
        let expected = 0.01 * 0.3 / (0.3 + 1e-8);
        assert!((p.layers[0].w_rh[[0, 0]] + expected).abs() < 1e-12);
        assert!((p.layers[0].w_rx[[0, 0]].abs() - p.layers[0].w_rh[[0, 0]].abs()).abs() < 1e-6);
        assert!((p.layers[0].b_r[0] - expected).abs() < 1e-12);
        assert_eq!(p.layers[0].w_zh[[0, 0]], 0.0);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = TrainConfig::default();
        let mut p = Params::<f64>::init_uniform(4, &[3], &[2], 1);
        let before = p.clone();
        let g = Params::zeros(4, &[3], &[2]);
        let mut st = AdamState::new(&p);
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut st, &cfg);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn clipping_bounds_norm() {
        let cfg = TrainConfig {
            grad_clip: Some(1.0),
            ..TrainConfig::default()
        };
        let mut p = pair();
        let mut g = pair();
        g.layers[0].w_rh[[0, 0]] = 100.0;
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &cfg);
        assert!((st.m.layers[0].w_rh[[0, 0]] - 0.1).abs() < 1e-12);
    }
}
