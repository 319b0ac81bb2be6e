use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Real;

/// Weights of one GRU layer with hidden size `H` and input size `D`.
///
/// `w_*h` are `H x H`, `w_*x` are `H x D`, biases are length `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerParams<T> {
    pub w_rh: Array2<T>,
    pub w_rx: Array2<T>,
    pub b_r: Array1<T>,
    pub w_zh: Array2<T>,
    pub w_zx: Array2<T>,
    pub b_z: Array1<T>,
    pub w_hh: Array2<T>,
    pub w_hx: Array2<T>,
    pub b_h: Array1<T>,
}

impl<T: Real> GruLayerParams<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let m = |r, c| Array2::zeros((r, c));
        let v = |n| Array1::zeros(n);
        Self {
            w_rh: m(hidden, hidden),
            w_rx: m(hidden, input),
            b_r: v(hidden),
            w_zh: m(hidden, hidden),
            w_zx: m(hidden, input),
            b_z: v(hidden),
            w_hh: m(hidden, hidden),
            w_hx: m(hidden, input),
            b_h: v(hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_r.len()
    }

    pub fn input(&self) -> usize {
        self.w_rx.ncols()
    }

    /// True when every matrix and bias agrees with `hidden` and `input`.
    pub fn shapes_consistent(&self) -> bool {
        let (h, d) = (self.hidden(), self.input());
        [&self.w_rh, &self.w_zh, &self.w_hh].iter().all(|w| w.dim() == (h, h))
            && [&self.w_rx, &self.w_zx, &self.w_hx].iter().all(|w| w.dim() == (h, d))
            && [&self.b_r, &self.b_z, &self.b_h].iter().all(|b| b.len() == h)
    }

    fn tensors(&self) -> [&[T]; 9] {
        [
            slice(&self.w_rh),
            slice(&self.w_rx),
            self.b_r.as_slice().unwrap(),
            slice(&self.w_zh),
            slice(&self.w_zx),
            self.b_z.as_slice().unwrap(),
            slice(&self.w_hh),
            slice(&self.w_hx),
            self.b_h.as_slice().unwrap(),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [T]; 9] {
        [
            self.w_rh.as_slice_mut().unwrap(),
            self.w_rx.as_slice_mut().unwrap(),
            self.b_r.as_slice_mut().unwrap(),
            self.w_zh.as_slice_mut().unwrap(),
            self.w_zx.as_slice_mut().unwrap(),
            self.b_z.as_slice_mut().unwrap(),
            self.w_hh.as_slice_mut().unwrap(),
            self.w_hx.as_slice_mut().unwrap(),
            self.b_h.as_slice_mut().unwrap(),
        ]
    }
}

fn slice<T>(a: &Array2<T>) -> &[T] {
    a.as_slice().expect("parameters are kept in standard layout")
}

/// Fully-connected layer `y = W x + b`, `W` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn zeros(out: usize, input: usize) -> Self {
        Self {
            w: Array2::zeros((out, input)),
            b: Array1::zeros(out),
        }
    }
}

/// Every trainable tensor of the network. Also used for gradients and the
/// Adam moments, which share the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub layers: Vec<GruLayerParams<T>>,
    pub fc: Vec<DenseLayer<T>>,
}

impl<T: Real> Params<T> {
    /// Zero tensors for GRU hidden sizes `layer_dims` over `input_dim`
    /// inputs, followed by dense layers of widths `fc_dims`.
    pub fn zeros(input_dim: usize, layer_dims: &[usize], fc_dims: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(layer_dims.len());
        let mut d = input_dim;
        for &h in layer_dims {
            layers.push(GruLayerParams::zeros(h, d));
            d = h;
        }
        let mut fc = Vec::with_capacity(fc_dims.len());
        for &o in fc_dims {
            fc.push(DenseLayer::zeros(o, d));
            d = o;
        }
        Self { layers, fc }
    }

    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights, zero biases, drawn in the
    /// serialization order.
    pub fn init_uniform(input_dim: usize, layer_dims: &[usize], fc_dims: &[usize], seed: u64) -> Self {
        let mut p = Self::zeros(input_dim, layer_dims, fc_dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut Array2<T>| {
            let bound = 1.0 / (w.ncols() as f64).sqrt();
            w.iter_mut()
                .for_each(|x| *x = T::from_f64(rng.random_range(-bound..bound)).unwrap());
        };
        for l in &mut p.layers {
            for w in [&mut l.w_rh, &mut l.w_rx, &mut l.w_zh, &mut l.w_zx, &mut l.w_hh, &mut l.w_hx] {
                fill(w);
            }
        }
        for f in &mut p.fc {
            fill(&mut f.w);
        }
        p
    }

    /// Tensors in serialization order: per GRU layer `W_rh, W_rx, b_r, W_zh,
    /// W_zx, b_z, W_hh, W_hx, b_h`, then per dense layer `W, b`.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.tensors());
        }
        for f in &self.fc {
            out.push(slice(&f.w));
            out.push(f.b.as_slice().unwrap());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        for f in &mut self.fc {
            out.push(f.w.as_slice_mut().unwrap());
            out.push(f.b.as_slice_mut().unwrap());
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (ti, t) in self.tensors().iter().enumerate() {
            if index < t.len() {
                return (ti, index);
            }
            index -= t.len();
        }
        panic!("parameter index out of range");
    }

    pub fn get_flat(&self, index: usize) -> T {
        let (t, i) = self.locate(index);
        self.tensors()[t][i]
    }

    pub fn set_flat(&mut self, index: usize, value: T) {
        let (t, i) = self.locate(index);
        self.tensors_mut()[t][i] = value;
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn squared_norm(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(T::zero(), |acc, &x| acc + x * x)
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = *x * factor);
        }
    }

    /// Converts every value to another float type.
    pub fn cast<U: Real>(&self) -> Params<U> {
        let dims_in = self.layers.first().map(|l| l.input()).unwrap_or(0);
        let layer_dims: Vec<usize> = self.layers.iter().map(|l| l.hidden()).collect();
        let fc_dims: Vec<usize> = self.fc.iter().map(|f| f.b.len()).collect();
        let mut out = Params::<U>::zeros(dims_in, &layer_dims, &fc_dims);
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = U::from_f64(s.to_f64().unwrap()).unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_counts() {
        let p = Params::<f64>::zeros(12, &[8, 8], &[5, 6]);
        assert!(p.layers.iter().all(|l| l.shapes_consistent()));
        let gru = 3 * (8 * 8 + 8 * 12 + 8) + 3 * (8 * 8 + 8 * 8 + 8);
        let fc = 5 * 8 + 5 + 6 * 5 + 6;
        assert_eq!(p.num_params(), gru + fc);
    }

    #[test]
    fn init_bounds_and_determinism() {
        let a = Params::<f64>::init_uniform(256, &[16], &[6], 3);
        let b = Params::<f64>::init_uniform(256, &[16], &[6], 3);
        assert_eq!(a, b);
        let bound = 1.0 / 256f64.sqrt();
        assert!(a.layers[0].w_rx.iter().all(|x| x.abs() <= bound));
        assert!(a.layers[0].b_z.iter().all(|&x| x == 0.0));
        assert_ne!(a, Params::<f64>::init_uniform(256, &[16], &[6], 4));
    }

    #[test]
    fn flat_access_round_trips() {
        let mut p = Params::<f64>::zeros(3, &[2], &[2]);
        let n = p.num_params();
        for i in 0..n {
            p.set_flat(i, i as f64);
        }
        for i in 0..n {
            assert_eq!(p.get_flat(i), i as f64);
        }
        // First tensor is W_rh of layer 0.
        assert_eq!(p.layers[0].w_rh[[1, 1]], 3.0);
    }
}
