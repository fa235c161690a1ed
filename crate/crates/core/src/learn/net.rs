use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::descriptors::{point_descriptors, DESCRIPTOR_DIM};
use crate::correspondence::FeatureMatrix;
use crate::geom::PointCloud;
use crate::{Error, Result};

/// First line of every checkpoint file.
pub const CHECKPOINT_FORMAT: &str = "corrmatch-featurenet v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    /// Neighbourhood size for the point descriptors.
    pub knn_k: usize,
    pub hidden: [usize; 2],
    pub embedding_dim: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            knn_k: 8,
            hidden: [64, 64],
            embedding_dim: 32,
        }
    }
}

/// Fully connected layer `z = W a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    fn zeros_like(&self) -> Self {
        Dense {
            weight: DMatrix::zeros(self.weight.nrows(), self.weight.ncols()),
            bias: DVector::zeros(self.bias.len()),
        }
    }
}

/// Per-point MLP on standardized descriptors: tanh hidden layers, linear
/// output. The same network embeds source and target clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNet {
    pub knn_k: usize,
    /// Descriptor standardization `(d − shift) ∘ scale`; not trained.
    pub input_shift: DVector<f64>,
    pub input_scale: DVector<f64>,
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass for backprop.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    /// `activations[0]` is the standardized input, the last entry the output.
    pub activations: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("nonempty")
    }
}

impl FeatureNet {
    /// Glorot-uniform weights, zero biases, identity standardization.
    pub fn new<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Self {
        let dims = [
            DESCRIPTOR_DIM,
            config.hidden[0],
            config.hidden[1],
            config.embedding_dim,
        ];
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    weight: DMatrix::from_fn(fan_out, fan_in, |_, _| {
                        limit * (2.0 * rng.random::<f64>() - 1.0)
                    }),
                    bias: DVector::zeros(fan_out),
                }
            })
            .collect();
        Self {
            knn_k: config.knn_k,
            input_shift: DVector::zeros(DESCRIPTOR_DIM),
            input_scale: DVector::from_element(DESCRIPTOR_DIM, 1.0),
            layers,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.nrows())
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.ncols())
    }

    /// Sets the standardization to the per-row mean and standard deviation
    /// of the given descriptor matrices.
    pub fn fit_input_normalization<'a>(
        &mut self,
        descriptors: impl IntoIterator<Item = &'a DMatrix<f64>>,
    ) {
        let mut sum = DVector::zeros(DESCRIPTOR_DIM);
        let mut sq = DVector::zeros(DESCRIPTOR_DIM);
        let mut count = 0usize;
        for d in descriptors {
            for col in d.column_iter() {
                sum += col;
                sq += col.component_mul(&col);
                count += 1;
            }
        }
        if count == 0 {
            return;
        }
        let mean = sum / count as f64;
        let var = sq / count as f64 - mean.component_mul(&mean);
        self.input_shift = mean;
        self.input_scale = var.map(|v| {
            let sd = v.max(0.0).sqrt();
            if sd > 1e-12 {
                1.0 / sd
            } else {
                1.0
            }
        });
    }

    fn check_shapes(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::ShapeMismatch("network has no layers".into()));
        }
        if self.input_dim() != DESCRIPTOR_DIM
            || self.input_shift.len() != DESCRIPTOR_DIM
            || self.input_scale.len() != DESCRIPTOR_DIM
        {
            return Err(Error::ShapeMismatch(format!(
                "network input is {}, descriptors are {DESCRIPTOR_DIM}",
                self.input_dim()
            )));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].weight.nrows() != pair[1].weight.ncols() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} output does not feed layer {}",
                    i + 1
                )));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.weight.nrows() {
                return Err(Error::ShapeMismatch(format!("layer {i} bias length")));
            }
        }
        Ok(())
    }

    pub(crate) fn forward(&self, descriptors: &DMatrix<f64>) -> Result<ForwardCache> {
        if descriptors.nrows() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "descriptor rows {} vs network input {}",
                descriptors.nrows(),
                self.input_dim()
            )));
        }
        let mut input = descriptors.clone();
        for (r, mut row) in input.row_iter_mut().enumerate() {
            let (shift, scale) = (self.input_shift[r], self.input_scale[r]);
            row.apply(|v| *v = (*v - shift) * scale);
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weight * activations.last().expect("input pushed");
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            if i < last {
                z.apply(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Parameter gradients given `∂L/∂output`.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_out: &DMatrix<f64>) -> Vec<Dense> {
        let mut grads: Vec<Dense> = self.layers.iter().map(Dense::zeros_like).collect();
        let last = self.layers.len() - 1;
        let mut delta = d_out.clone();
        for i in (0..self.layers.len()).rev() {
            if i < last {
                let a = &cache.activations[i + 1];
                delta.zip_apply(a, |d, a| *d *= 1.0 - a * a);
            }
            let input = &cache.activations[i];
            grads[i].weight = &delta * input.transpose();
            grads[i].bias = delta.column_sum();
            if i > 0 {
                delta = self.layers[i].weight.tr_mul(&delta);
            }
        }
        grads
    }

    /// Embeds precomputed descriptors.
    pub fn embed(&self, descriptors: &DMatrix<f64>) -> Result<FeatureMatrix> {
        FeatureMatrix::new(self.forward(descriptors)?.output().clone())
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// All trainable parameters, layer by layer, weights (column-major) then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_params()
            )));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = it.next().expect("length checked");
            }
            for b in l.bias.iter_mut() {
                *b = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Text checkpoint: a format line, `knn_k`, then each tensor as a
    /// `tensor <name> <rows> <cols>` header followed by one line of
    /// row-major values.
    pub fn to_checkpoint_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_FORMAT}");
        let _ = writeln!(out, "knn_k {}", self.knn_k);
        let mut tensor = |name: &str, m: &DMatrix<f64>| {
            let _ = writeln!(out, "tensor {name} {} {}", m.nrows(), m.ncols());
            let row_major: Vec<String> = m.transpose().iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row_major.join(" "));
        };
        tensor(
            "input_shift",
            &DMatrix::from_column_slice(self.input_shift.len(), 1, self.input_shift.as_slice()),
        );
        tensor(
            "input_scale",
            &DMatrix::from_column_slice(self.input_scale.len(), 1, self.input_scale.as_slice()),
        );
        for (i, l) in self.layers.iter().enumerate() {
            tensor(&format!("layer{i}.weight"), &l.weight);
            tensor(
                &format!("layer{i}.bias"),
                &DMatrix::from_column_slice(l.bias.len(), 1, l.bias.as_slice()),
            );
        }
        out
    }

    pub fn from_checkpoint_str(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == CHECKPOINT_FORMAT => {}
            Some((i, l)) => return Err(err(i + 1, format!("unsupported checkpoint format {l:?}"))),
            None => return Err(err(0, "empty checkpoint".into())),
        }
        let knn_k = match lines.next() {
            Some((i, l)) => {
                let mut f = l.split_whitespace();
                match (f.next(), f.next().map(str::parse::<usize>)) {
                    (Some("knn_k"), Some(Ok(k))) => k,
                    _ => return Err(err(i + 1, format!("expected `knn_k <n>`, got {l:?}"))),
                }
            }
            None => return Err(err(0, "missing knn_k".into())),
        };

        let mut tensors: Vec<(String, DMatrix<f64>)> = Vec::new();
        while let Some((i, header)) = lines.next() {
            let f: Vec<&str> = header.split_whitespace().collect();
            let (name, rows, cols) = match f.as_slice() {
                ["tensor", name, r, c] => match (r.parse::<usize>(), c.parse::<usize>()) {
                    (Ok(r), Ok(c)) => (name.to_string(), r, c),
                    _ => return Err(err(i + 1, "bad tensor dimensions".into())),
                },
                _ => {
                    return Err(err(
                        i + 1,
                        format!("expected tensor header, got {header:?}"),
                    ))
                }
            };
            let (j, body) = lines
                .next()
                .ok_or_else(|| err(i + 1, format!("tensor {name} has no values")))?;
            let values: Vec<f64> = body
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| err(j + 1, format!("{v:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != rows * cols {
                return Err(err(
                    j + 1,
                    format!("tensor {name}: {} values for {rows}×{cols}", values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(err(j + 1, format!("tensor {name} has non-finite values")));
            }
            tensors.push((name, DMatrix::from_row_slice(rows, cols, &values)));
        }

        let take =
            |tensors: &mut Vec<(String, DMatrix<f64>)>, name: &str| -> Result<DMatrix<f64>> {
                let pos = tensors
                    .iter()
                    .position(|(n, _)| n == name)
                    .ok_or_else(|| err(0, format!("missing tensor {name}")))?;
                Ok(tensors.remove(pos).1)
            };
        let as_vec = |m: DMatrix<f64>| DVector::from_column_slice(m.as_slice());
        let input_shift = as_vec(take(&mut tensors, "input_shift")?);
        let input_scale = as_vec(take(&mut tensors, "input_scale")?);
        let mut layers = Vec::new();
        for i in 0.. {
            let name = format!("layer{i}.weight");
            if !tensors.iter().any(|(n, _)| *n == name) {
                break;
            }
            let weight = take(&mut tensors, &name)?;
            let bias = as_vec(take(&mut tensors, &format!("layer{i}.bias"))?);
            layers.push(Dense { weight, bias });
        }
        if let Some((name, _)) = tensors.first() {
            return Err(err(0, format!("unexpected tensor {name}")));
        }
        let net = FeatureNet {
            knn_k,
            input_shift,
            input_scale,
            layers,
        };
        net.check_shapes()?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&text, path)
    }
}

/// Per-point features of a cloud: descriptors followed by the network.
pub fn featurize(net: &FeatureNet, x: &PointCloud) -> Result<FeatureMatrix> {
    net.check_shapes()?;
    let d = point_descriptors(x, net.knn_k)?;
    net.embed(&d)
}
