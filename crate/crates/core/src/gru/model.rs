use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::{cast, shape_err, sigmoid, GruError, Params, Real};
use crate::dsp::{GruInputWindow, DOPPLER_BINS, TIME_STEPS};
use crate::radar::Activity;

const PEAK_EPS: f64 = 1e-12;
/// Floor of the log-compressed input, relative to the window peak.
const LOG_FLOOR: f64 = 1e-6;

/// Per-window input scaling applied before the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `x / (max |x| + eps)`.
    #[default]
    Peak,
    /// Peak scaling followed by `1 + log10(y + 1e-6) / 6`, mapping a 60 dB
    /// range onto `[0, 1]`.
    LogPeak,
    None,
}

impl Normalization {
    pub fn apply<T: Real>(self, data: &[f32], out: &mut [T]) {
        let peak = data.iter().fold(0f64, |m, &v| m.max((v as f64).abs()));
        let scale = 1.0 / (peak + PEAK_EPS);
        for (o, &v) in out.iter_mut().zip(data) {
            let v = v as f64;
            *o = cast(match self {
                Normalization::Peak => v * scale,
                Normalization::LogPeak => (1.0 + (v.abs() * scale + LOG_FLOOR).log10() / 6.0).max(0.0),
                Normalization::None => v,
            });
        }
    }
}

/// Network shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub time_steps: usize,
    /// Hidden size of each GRU layer, bottom first.
    pub layer_dims: Vec<usize>,
    /// Output width of each dense layer; the last equals the class count.
    pub fc_dims: Vec<usize>,
    pub class_names: Vec<String>,
}

impl ModelSpec {
    /// Seven GRU layers of 128 units, a 64-unit ReLU layer and a 6-way output.
    pub fn full() -> Self {
        Self::with_layers(&[128; 7], &Activity::ALL)
    }

    /// `layers` GRU layers of `hidden` units over the given classes.
    pub fn reduced(layers: usize, hidden: usize, classes: &[Activity]) -> Self {
        Self::with_layers(&vec![hidden; layers], classes)
    }

    fn with_layers(layer_dims: &[usize], classes: &[Activity]) -> Self {
        Self {
            input_dim: DOPPLER_BINS,
            time_steps: TIME_STEPS,
            layer_dims: layer_dims.to_vec(),
            fc_dims: vec![64, classes.len()],
            class_names: classes.iter().map(|a| a.name().to_string()).collect(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn validate(&self) -> Result<(), GruError> {
        let bad = |m: &str| Err(GruError::InvalidConfig(m.to_string()));
        if self.input_dim == 0 || self.time_steps == 0 {
            return bad("input_dim and time_steps must be positive");
        }
        if self.layer_dims.is_empty() || self.layer_dims.contains(&0) {
            return bad("need at least one GRU layer, all hidden sizes positive");
        }
        if self.fc_dims.is_empty() || self.fc_dims.contains(&0) {
            return bad("need at least one dense layer, all widths positive");
        }
        if self.class_names.len() < 2 {
            return bad("need at least two classes");
        }
        if self.fc_dims.last() != Some(&self.class_names.len()) {
            return bad("last dense layer width must equal the class count");
        }
        Ok(())
    }
}

/// GRU classifier: stacked GRU layers, the top layer's final hidden state
/// through ReLU dense layers, a linear output layer and softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct GruModel<T> {
    pub spec: ModelSpec,
    pub normalization: Normalization,
    pub seed: u64,
    pub params: Params<T>,
}

/// Activations kept from a batched forward pass for [`GruModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    batch: usize,
    steps: usize,
    layers: Vec<LayerCache<T>>,
    fc_inputs: Vec<Array2<T>>,
    fc_pre: Vec<Array2<T>>,
    /// Softmax output, one row per example.
    pub probs: Array2<T>,
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    /// `(steps * batch) x D`, rows grouped by step.
    input: Array2<T>,
    /// `((steps + 1) * batch) x H`, starting with the zero state.
    hidden: Array2<T>,
    reset: Array2<T>,
    update: Array2<T>,
    candidate: Array2<T>,
}

impl<T> ForwardCache<T> {
    /// Hidden states of GRU layer `layer` as `(steps + 1, batch, H)`,
    /// including the zero initial state.
    pub fn hidden_states(&self, layer: usize) -> ArrayView3<'_, T> {
        let h = &self.layers[layer].hidden;
        h.view()
            .into_shape_with_order((self.steps + 1, self.batch, h.ncols()))
            .expect("contiguous hidden states")
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }
}

/// `-ln(max(p[label], 1e-12))`.
pub fn cross_entropy<T: Real>(probs: &[T], label: usize) -> Result<T, GruError> {
    let p = probs.get(label).ok_or(GruError::BadLabel {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.max(cast(1e-12)).ln())
}

fn argmax<T: Real>(row: impl IntoIterator<Item = T>) -> (usize, T) {
    let mut best = (0, T::neg_infinity());
    for (i, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

impl<T: Real> GruModel<T> {
    /// Fresh model with uniform fan-in scaled weights and zero biases.
    pub fn new(spec: ModelSpec, normalization: Normalization, seed: u64) -> Result<Self, GruError> {
        spec.validate()?;
        let params = Params::init_uniform(spec.input_dim, &spec.layer_dims, &spec.fc_dims, seed);
        Ok(Self {
            spec,
            normalization,
            seed,
            params,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    /// Checks that `params` matches `spec`.
    pub fn check_shapes(&self) -> Result<(), GruError> {
        let expected = Params::<T>::zeros(self.spec.input_dim, &self.spec.layer_dims, &self.spec.fc_dims);
        let same = expected.layers.len() == self.params.layers.len()
            && expected.fc.len() == self.params.fc.len()
            && expected
                .tensors()
                .iter()
                .zip(self.params.tensors())
                .all(|(a, b)| a.len() == b.len())
            && self.params.layers.iter().all(|l| l.shapes_consistent())
            && expected
                .layers
                .iter()
                .zip(&self.params.layers)
                .all(|(a, b)| a.w_rx.dim() == b.w_rx.dim())
            && expected
                .fc
                .iter()
                .zip(&self.params.fc)
                .all(|(a, b)| a.w.dim() == b.w.dim());
        if same {
            Ok(())
        } else {
            Err(shape_err("parameters matching the model spec", "different tensor shapes"))
        }
    }

    /// Normalized `(time_steps, input_dim)` input for a raw window.
    pub fn prepare(&self, data: &[f32]) -> Result<Array2<T>, GruError> {
        let (t, d) = (self.spec.time_steps, self.spec.input_dim);
        if data.len() != t * d {
            return Err(shape_err(format!("{t} x {d} window"), format!("{} values", data.len())));
        }
        let mut out = Array2::zeros((t, d));
        self.normalization.apply(data, out.as_slice_mut().unwrap());
        Ok(out)
    }

    /// Forward pass over `(steps, batch, input_dim)` already-normalized input.
    pub fn forward_batch(&self, x: ArrayView3<T>) -> Result<(Array2<T>, ForwardCache<T>), GruError> {
        let (steps, batch, d) = x.dim();
        if d != self.spec.input_dim || steps == 0 || batch == 0 {
            return Err(shape_err(
                format!("(steps, batch, {})", self.spec.input_dim),
                format!("({steps}, {batch}, {d})"),
            ));
        }
        let mut input = x
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((steps * batch, d))
            .expect("standard layout");
        let mut layers = Vec::with_capacity(self.params.layers.len());
        for p in &self.params.layers {
            let cache = layer_forward(p, input, steps, batch);
            input = cache.hidden.slice(s![batch.., ..]).to_owned();
            layers.push(cache);
        }
        let top = &layers.last().unwrap().hidden;
        let mut a = top.slice(s![steps * batch.., ..]).to_owned();
        let mut fc_inputs = Vec::with_capacity(self.params.fc.len());
        let mut fc_pre = Vec::with_capacity(self.params.fc.len());
        let last = self.params.fc.len() - 1;
        for (k, f) in self.params.fc.iter().enumerate() {
            let pre = a.dot(&f.w.t()) + &f.b;
            fc_inputs.push(a);
            a = if k < last { pre.mapv(|v| v.max(T::zero())) } else { pre.clone() };
            fc_pre.push(pre);
        }
        let probs = softmax_rows(a);
        Ok((
            probs.clone(),
            ForwardCache {
                batch,
                steps,
                layers,
                fc_inputs,
                fc_pre,
                probs,
            },
        ))
    }

    /// Class probabilities for one window, after input normalization.
    pub fn forward(&self, window: &GruInputWindow) -> Result<(Vec<T>, ForwardCache<T>), GruError> {
        self.forward_raw(&window.data)
    }

    pub fn forward_raw(&self, data: &[f32]) -> Result<(Vec<T>, ForwardCache<T>), GruError> {
        let x = self.prepare(data)?;
        let x = x.insert_axis(Axis(1));
        let (probs, cache) = self.forward_batch(x.view())?;
        Ok((probs.row(0).to_vec(), cache))
    }

    /// Mean cross-entropy over the batch and its gradient for every parameter.
    pub fn backward(&self, cache: &ForwardCache<T>, labels: &[usize]) -> Result<(Params<T>, T), GruError> {
        let batch = cache.batch;
        let classes = self.num_classes();
        if labels.len() != batch {
            return Err(shape_err(format!("{batch} labels"), labels.len()));
        }
        let inv_b: T = T::one() / cast(batch as f64);
        let mut loss = T::zero();
        let mut d = cache.probs.clone();
        for (i, &y) in labels.iter().enumerate() {
            if y >= classes {
                return Err(GruError::BadLabel { label: y, classes });
            }
            loss = loss + cross_entropy(cache.probs.row(i).as_slice().unwrap(), y)?;
            d[[i, y]] = d[[i, y]] - T::one();
        }
        d.mapv_inplace(|v| v * inv_b);
        let mut grads = Params::zeros(self.spec.input_dim, &self.spec.layer_dims, &self.spec.fc_dims);

        let last = self.params.fc.len() - 1;
        for k in (0..=last).rev() {
            if k < last {
                Zip::from(&mut d)
                    .and(&cache.fc_pre[k])
                    .for_each(|g, &p| {
                        if p <= T::zero() {
                            *g = T::zero()
                        }
                    });
            }
            grads.fc[k].w = d.t().dot(&cache.fc_inputs[k]);
            grads.fc[k].b = d.sum_axis(Axis(0));
            d = d.dot(&self.params.fc[k].w);
        }

        let steps = cache.steps;
        let mut d_out: Option<Array2<T>> = None;
        for l in (0..self.params.layers.len()).rev() {
            let p = &self.params.layers[l];
            let c = &cache.layers[l];
            let h = p.hidden();
            let mut dh_next = if l == self.params.layers.len() - 1 {
                d.clone()
            } else {
                Array2::zeros((batch, h))
            };
            let mut da_r = Array2::<T>::zeros((steps * batch, h));
            let mut da_z = Array2::<T>::zeros((steps * batch, h));
            let mut da_c = Array2::<T>::zeros((steps * batch, h));
            for t in (0..steps).rev() {
                let rows = s![t * batch..(t + 1) * batch, ..];
                let mut dh = dh_next;
                if let Some(dout) = &d_out {
                    Zip::from(&mut dh).and(dout.slice(rows)).for_each(|a, &b| *a = *a + b);
                }
                let hp = c.hidden.slice(rows);
                let r = c.reset.slice(rows);
                let z = c.update.slice(rows);
                let cand = c.candidate.slice(rows);
                let one = T::one();
                Zip::from(da_c.slice_mut(rows))
                    .and(da_z.slice_mut(rows))
                    .and(&dh)
                    .and(&z)
                    .and(&cand)
                    .and(&hp)
                    .for_each(|ac, az, &g, &z, &cv, &hv| {
                        *ac = g * (one - z) * (one - cv * cv);
                        *az = g * (hv - cv) * z * (one - z);
                    });
                let drh = da_c.slice(rows).dot(&p.w_hh);
                Zip::from(da_r.slice_mut(rows))
                    .and(&drh)
                    .and(&hp)
                    .and(&r)
                    .for_each(|ar, &g, &hv, &rv| *ar = g * hv * rv * (one - rv));
                let mut next = &dh * &z + &drh * &r;
                general_mat_mul(one, &da_z.slice(rows), &p.w_zh, one, &mut next);
                general_mat_mul(one, &da_r.slice(rows), &p.w_rh, one, &mut next);
                dh_next = next;
            }
            let hp_all = c.hidden.slice(s![..steps * batch, ..]);
            let rh_all = &c.reset * &hp_all;
            let g = &mut grads.layers[l];
            g.w_hh = da_c.t().dot(&rh_all);
            g.w_zh = da_z.t().dot(&hp_all);
            g.w_rh = da_r.t().dot(&hp_all);
            g.w_rx = da_r.t().dot(&c.input);
            g.w_zx = da_z.t().dot(&c.input);
            g.w_hx = da_c.t().dot(&c.input);
            g.b_r = da_r.sum_axis(Axis(0));
            g.b_z = da_z.sum_axis(Axis(0));
            g.b_h = da_c.sum_axis(Axis(0));
            d_out = if l > 0 {
                let mut dx = da_r.dot(&p.w_rx);
                general_mat_mul(T::one(), &da_z, &p.w_zx, T::one(), &mut dx);
                general_mat_mul(T::one(), &da_c, &p.w_hx, T::one(), &mut dx);
                Some(dx)
            } else {
                None
            };
        }
        Ok((grads, loss * inv_b))
    }

    /// Most probable class and its probability. Ties go to the lower index.
    pub fn predict(&self, window: &GruInputWindow) -> Result<(usize, T), GruError> {
        let (probs, _) = self.forward(window)?;
        Ok(argmax(probs))
    }

    /// Batched prediction over raw windows.
    pub fn predict_many(&self, windows: &[&[f32]]) -> Result<Vec<(usize, T)>, GruError> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.batch_input(windows)?;
        let (probs, _) = self.forward_batch(x.view())?;
        Ok(probs.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
    }

    /// Normalizes raw windows into a `(steps, batch, input_dim)` tensor.
    pub fn batch_input(&self, windows: &[&[f32]]) -> Result<Array3<T>, GruError> {
        let (t, d) = (self.spec.time_steps, self.spec.input_dim);
        let mut x = Array3::zeros((t, windows.len(), d));
        let mut buf = vec![T::zero(); t * d];
        for (b, w) in windows.iter().enumerate() {
            if w.len() != t * d {
                return Err(shape_err(format!("{t} x {d} window"), format!("{} values", w.len())));
            }
            self.normalization.apply(w, &mut buf);
            for step in 0..t {
                x.slice_mut(s![step, b, ..])
                    .assign(&ArrayView2::from_shape((t, d), &buf).unwrap().row(step));
            }
        }
        Ok(x)
    }

    pub fn class_name(&self, index: usize) -> Option<&str> {
        self.spec.class_names.get(index).map(String::as_str)
    }

    /// Same model with parameters converted to another float type.
    pub fn cast<U: Real>(&self) -> GruModel<U> {
        GruModel {
            spec: self.spec.clone(),
            normalization: self.normalization,
            seed: self.seed,
            params: self.params.cast(),
        }
    }
}

fn layer_forward<T: Real>(p: &super::GruLayerParams<T>, input: Array2<T>, steps: usize, batch: usize) -> LayerCache<T> {
    let one = T::one();
    let mut reset = input.dot(&p.w_rx.t()) + &p.b_r;
    let mut update = input.dot(&p.w_zx.t()) + &p.b_z;
    let mut candidate = input.dot(&p.w_hx.t()) + &p.b_h;
    let mut hidden = Array2::zeros(((steps + 1) * batch, p.hidden()));
    for t in 0..steps {
        let rows = s![t * batch..(t + 1) * batch, ..];
        let (prev, mut next) = hidden.view_mut().split_at(Axis(0), (t + 1) * batch);
        let hp = prev.slice(s![t * batch.., ..]);
        let mut r = reset.slice_mut(rows);
        general_mat_mul(one, &hp, &p.w_rh.t(), one, &mut r);
        r.mapv_inplace(sigmoid);
        let mut z = update.slice_mut(rows);
        general_mat_mul(one, &hp, &p.w_zh.t(), one, &mut z);
        z.mapv_inplace(sigmoid);
        let rh = &r * &hp;
        let mut c = candidate.slice_mut(rows);
        general_mat_mul(one, &rh, &p.w_hh.t(), one, &mut c);
        c.mapv_inplace(T::tanh);
        Zip::from(next.slice_mut(s![..batch, ..]))
            .and(&hp)
            .and(&z)
            .and(&c)
            .for_each(|hn, &h, &zv, &cv| *hn = zv * h + (one - zv) * cv);
    }
    LayerCache {
        input,
        hidden,
        reset,
        update,
        candidate,
    }
}

fn softmax_rows<T: Real>(mut a: Array2<T>) -> Array2<T> {
    for mut row in a.rows_mut() {
        let m = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(classes: &[Activity]) -> GruModel<f64> {
        let spec = ModelSpec {
            input_dim: 12,
            time_steps: 5,
            layer_dims: vec![8, 8],
            fc_dims: vec![7, classes.len()],
            class_names: classes.iter().map(|a| a.name().into()).collect(),
        };
        GruModel::new(spec, Normalization::None, 11).unwrap()
    }

    #[test]
    fn full_spec_shape() {
        let s = ModelSpec::full();
        s.validate().unwrap();
        assert_eq!(s.layer_dims.len(), 7);
        assert_eq!(*s.fc_dims.last().unwrap(), 6);
    }

    #[test]
    fn cross_entropy_cases() {
        let u = [1.0f64 / 6.0; 6];
        assert!((cross_entropy(&u, 3).unwrap() - 1.791759).abs() < 1e-6);
        let mut one = [0.0f64; 6];
        one[2] = 1.0;
        assert_eq!(cross_entropy(&one, 2).unwrap(), 0.0);
        assert!((cross_entropy(&one, 0).unwrap() - 27.631).abs() < 1e-3);
        assert!(matches!(cross_entropy(&u, 6), Err(GruError::BadLabel { .. })));
    }

    #[test]
    fn zero_output_layer_is_uniform_and_ties_to_zero() {
        let mut m = tiny(&Activity::ALL);
        let f = m.params.fc.last_mut().unwrap();
        f.w.fill(0.0);
        f.b.fill(0.0);
        let data = vec![0.3f32; 60];
        let (p, _) = m.forward_raw(&data).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-12));
        let w = GruInputWindow {
            data,
            start_time_ms: 0,
            label: None,
            subject_id: None,
            session_id: None,
        };
        assert_eq!(m.predict(&w).unwrap().0, 0);
    }

    #[test]
    fn favoured_bias_wins() {
        let mut m = tiny(&Activity::ALL);
        let f = m.params.fc.last_mut().unwrap();
        f.w.fill(0.0);
        f.b[5] = 10.0;
        let (label, conf) = argmax(m.forward_raw(&[0.1f32; 60]).unwrap().0);
        assert_eq!(label, 5);
        assert!(conf > 0.99);
    }

    #[test]
    fn zero_input_zero_params_zero_states() {
        let mut m = tiny(&Activity::ALL);
        m.params.fill_zero();
        let (p, cache) = m.forward_raw(&[0.0f32; 60]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-12));
        for l in 0..2 {
            assert!(cache.hidden_states(l).iter().all(|&h| h == 0.0));
        }
        let (g, _) = m.backward(&cache, &[4]).unwrap();
        for l in &g.layers {
            assert!(l.w_rx.iter().chain(&l.w_zx).chain(&l.w_hx).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn wrong_window_size_is_error() {
        let m = tiny(&Activity::ALL);
        assert!(matches!(m.forward_raw(&[0.0; 59]), Err(GruError::ShapeMismatch { .. })));
    }

    #[test]
    fn batch_rows_match_single_forward() {
        let m = tiny(&Activity::ALL);
        let a: Vec<f32> = (0..60).map(|i| (i as f32 * 0.37).sin().abs()).collect();
        let b: Vec<f32> = (0..60).map(|i| (i as f32 * 0.11).cos().abs()).collect();
        let x = m.batch_input(&[&a, &b]).unwrap();
        let (probs, _) = m.forward_batch(x.view()).unwrap();
        for (row, w) in probs.rows().into_iter().zip([&a, &b]) {
            let single = m.forward_raw(w).unwrap().0;
            for (p, q) in row.iter().zip(&single) {
                assert!((p - q).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn peak_normalization_is_scale_invariant() {
        let mut a = vec![0f64; 4];
        let mut b = vec![0f64; 4];
        Normalization::Peak.apply(&[1.0, 2.0, 4.0, 0.5], &mut a);
        Normalization::Peak.apply(&[10.0, 20.0, 40.0, 5.0], &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!((a[2] - 1.0).abs() < 1e-9);
        let mut c = vec![0f64; 2];
        Normalization::LogPeak.apply(&[0.0, 8.0], &mut c);
        assert_eq!(c[0], 0.0);
        assert!((c[1] - 1.0).abs() < 1e-6);
    }
}
