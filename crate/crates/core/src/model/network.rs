//! Evidence networks: an affine map (optionally preceded by one `tanh`
//! hidden layer) followed by softplus, so evidence is non-negative and the
//! concentration is `alpha = softplus(logits) + 1`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer, `weights` stored `inputs x outputs` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `[-s, s]`, `s = sqrt(6 / (fan_in + fan_out))`; zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let s = (6.0 / (inputs + outputs) as f64).sqrt();
        let dist = Uniform::new_inclusive(-s, s).expect("finite bounds");
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| dist.sample(rng)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (xi, row) in x.iter().zip(self.weights.chunks_exact(self.outputs)) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` (this layer's segment) and
    /// returns the gradient with respect to the input.
    fn backward(&self, x: &[f64], grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (gw, gb) = grad.split_at_mut(self.weights.len());
        let mut grad_in = vec![0.0; self.inputs];
        for (i, (xi, row)) in x.iter().zip(self.weights.chunks_exact(self.outputs)).enumerate() {
            let gw_row = &mut gw[i * self.outputs..(i + 1) * self.outputs];
            let mut acc = 0.0;
            for ((g, w), go) in gw_row.iter_mut().zip(row).zip(grad_out) {
                *g += xi * go;
                acc += w * go;
            }
            grad_in[i] = acc;
        }
        for (g, go) in gb.iter_mut().zip(grad_out) {
            *g += go;
        }
        grad_in
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.bias);
    }

    fn read_params(&mut self, src: &[f64]) -> usize {
        let nw = self.weights.len();
        let nb = self.bias.len();
        self.weights.copy_from_slice(&src[..nw]);
        self.bias.copy_from_slice(&src[nw..nw + nb]);
        nw + nb
    }
}

/// Intermediate values kept by a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ViewActivations {
    hidden: Option<Vec<f64>>,
    logits: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewNetwork {
    hidden: Option<Dense>,
    output: Dense,
}

impl ViewNetwork {
    pub fn zeros(inputs: usize, hidden: Option<usize>, classes: usize) -> Self {
        match hidden {
            Some(h) => Self {
                hidden: Some(Dense::zeros(inputs, h)),
                output: Dense::zeros(h, classes),
            },
            None => Self {
                hidden: None,
                output: Dense::zeros(inputs, classes),
            },
        }
    }

    pub fn glorot<R: Rng + ?Sized>(inputs: usize, hidden: Option<usize>, classes: usize, rng: &mut R) -> Self {
        match hidden {
            Some(h) => Self {
                hidden: Some(Dense::glorot(inputs, h, rng)),
                output: Dense::glorot(h, classes, rng),
            },
            None => Self {
                hidden: None,
                output: Dense::glorot(inputs, classes, rng),
            },
        }
    }

    pub fn inputs(&self) -> usize {
        self.hidden.as_ref().unwrap_or(&self.output).inputs
    }

    pub fn hidden_units(&self) -> Option<usize> {
        self.hidden.as_ref().map(|h| h.outputs)
    }

    pub fn classes(&self) -> usize {
        self.output.outputs
    }

    pub fn param_count(&self) -> usize {
        self.hidden.as_ref().map_or(0, Dense::param_count) + self.output.param_count()
    }

    pub fn forward(&self, x: &[f64]) -> Result<ViewActivations> {
        if x.len() != self.inputs() {
            return Err(Error::Shape(format!(
                "network expects {} features, got {}",
                self.inputs(),
                x.len()
            )));
        }
        let hidden = self
            .hidden
            .as_ref()
            .map(|h| h.forward(x).into_iter().map(f64::tanh).collect::<Vec<_>>());
        let logits = self.output.forward(hidden.as_deref().unwrap_or(x));
        let alpha = logits.iter().map(|&z| softplus(z) + 1.0).collect();
        Ok(ViewActivations {
            hidden,
            logits,
            alpha,
        })
    }

    /// Backpropagates `dL/dalpha` into `grad`, laid out like [`Self::write_params`].
    pub fn backward(&self, x: &[f64], acts: &ViewActivations, grad_alpha: &[f64], grad: &mut [f64]) {
        let grad_logits: Vec<f64> = grad_alpha
            .iter()
            .zip(&acts.logits)
            .map(|(g, &z)| g * sigmoid(z))
            .collect();
        match (&self.hidden, &acts.hidden) {
            (Some(layer), Some(h)) => {
                let (gh, go) = grad.split_at_mut(layer.param_count());
                let grad_h = self.output.backward(h, &grad_logits, go);
                let grad_pre: Vec<f64> = grad_h.iter().zip(h).map(|(g, t)| g * (1.0 - t * t)).collect();
                layer.backward(x, &grad_pre, gh);
            }
            _ => {
                self.output.backward(x, &grad_logits, grad);
            }
        }
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        if let Some(h) = &self.hidden {
            h.write_params(out);
        }
        self.output.write_params(out);
    }

    pub fn read_params(&mut self, src: &[f64]) -> usize {
        let mut used = 0;
        if let Some(h) = &mut self.hidden {
            used += h.read_params(src);
        }
        used + self.output.read_params(&src[used..])
    }
}

/// Layer sizes of a multi-view model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub classes: usize,
    pub view_dims: Vec<usize>,
    pub hidden: Option<usize>,
    pub pseudo_view: bool,
}

/// One evidence network per view plus an optional pseudo-view network over
/// the concatenated features.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewModel {
    classes: usize,
    views: Vec<ViewNetwork>,
    pseudo: Option<ViewNetwork>,
}

impl MultiViewModel {
    pub fn from_parts(classes: usize, views: Vec<ViewNetwork>, pseudo: Option<ViewNetwork>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Shape(format!("need at least 2 classes, got {classes}")));
        }
        if views.is_empty() {
            return Err(Error::Shape("model needs at least one view network".into()));
        }
        if views.iter().chain(&pseudo).any(|v| v.classes() != classes) {
            return Err(Error::Shape("network output width differs from class count".into()));
        }
        if let Some(p) = &pseudo {
            let total: usize = views.iter().map(ViewNetwork::inputs).sum();
            if p.inputs() != total {
                return Err(Error::Shape(format!(
                    "pseudo-view network takes {} inputs, views provide {total}",
                    p.inputs()
                )));
            }
        }
        Ok(Self {
            classes,
            views,
            pseudo,
        })
    }

    pub fn zeros(arch: &Architecture) -> Result<Self> {
        let views = arch
            .view_dims
            .iter()
            .map(|&d| ViewNetwork::zeros(d, arch.hidden, arch.classes))
            .collect();
        let pseudo = arch
            .pseudo_view
            .then(|| ViewNetwork::zeros(arch.view_dims.iter().sum(), arch.hidden, arch.classes));
        Self::from_parts(arch.classes, views, pseudo)
    }

    pub fn init<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        let views = arch
            .view_dims
            .iter()
            .map(|&d| ViewNetwork::glorot(d, arch.hidden, arch.classes, rng))
            .collect();
        let pseudo = arch
            .pseudo_view
            .then(|| ViewNetwork::glorot(arch.view_dims.iter().sum(), arch.hidden, arch.classes, rng));
        Self::from_parts(arch.classes, views, pseudo)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn views(&self) -> &[ViewNetwork] {
        &self.views
    }

    pub fn pseudo(&self) -> Option<&ViewNetwork> {
        self.pseudo.as_ref()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            classes: self.classes,
            view_dims: self.views.iter().map(ViewNetwork::inputs).collect(),
            hidden: self.views[0].hidden_units(),
            pseudo_view: self.pseudo.is_some(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.views.iter().chain(&self.pseudo).map(ViewNetwork::param_count).sum()
    }

    /// Offsets of each network's segment in the flat parameter vector; the
    /// pseudo-view network, when present, comes last.
    pub fn segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.views
            .iter()
            .chain(&self.pseudo)
            .map(|v| {
                let r = start..start + v.param_count();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for v in self.views.iter().chain(&self.pseudo) {
            v.write_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "model has {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut used = 0;
        for v in self.views.iter_mut().chain(&mut self.pseudo) {
            used += v.read_params(&params[used..]);
        }
        Ok(())
    }
}
