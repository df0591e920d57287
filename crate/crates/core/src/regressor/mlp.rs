use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected layer, `w` is `outputs × inputs` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            w: vec![0.0; inputs * outputs],
            b: vec![0.0; outputs],
        }
    }

    /// Weights and biases uniform in `±1 / sqrt(fan_in)`.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = 1.0 / (inputs as f64).sqrt();
        let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-limit..limit)).collect() };
        let w = draw(inputs * outputs);
        let b = draw(outputs);
        Self { inputs, outputs, w, b }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .chunks_exact(self.inputs)
            .zip(&self.b)
            .map(|(row, b)| row.iter().zip(x).fold(*b, |acc, (w, x)| acc + w * x))
            .collect()
    }
}

/// Dense layers with rectified-linear activations between them and a linear
/// final layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer inputs and hidden pre-activations recorded by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct MlpTrace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    /// `sizes` lists every width including input and output.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_size()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpTrace) {
        let mut trace = MlpTrace {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len().saturating_sub(1)),
        };
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&h);
            trace.inputs.push(h);
            if k == last {
                h = z;
            } else {
                h = z.iter().map(|&v| v.max(0.0)).collect();
                trace.pre.push(z);
            }
        }
        (h, trace)
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).0
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, trace: &MlpTrace, d_out: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let mut delta = d_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grads.layers[k];
            let input = &trace.inputs[k];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.b[o] += d;
                let row = &mut g.w[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            let mut d_in = vec![0.0; layer.inputs];
            for (row, &d) in layer.w.chunks_exact(layer.inputs).zip(&delta) {
                if d == 0.0 {
                    continue;
                }
                for (di, w) in d_in.iter_mut().zip(row) {
                    *di += d * w;
                }
            }
            if k > 0 {
                for (di, &z) in d_in.iter_mut().zip(&trace.pre[k - 1]) {
                    if z <= 0.0 {
                        *di = 0.0;
                    }
                }
            }
            delta = d_in;
        }
        delta
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> + '_ {
        self.layers.iter().flat_map(|l| [&l.w, &l.b])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> + '_ {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b])
    }

    pub fn add_assign(&mut self, other: &Mlp) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }
}
