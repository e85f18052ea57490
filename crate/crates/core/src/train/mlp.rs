//! Per-point multilayer perceptron with hand-written backpropagation.
//!
//! All parameters live in one flat vector so optimizer and gradient
//! surgery work on plain slices. Layer order: hidden layers, map head,
//! grasp head. Each layer stores its weights row-major (out × in) followed
//! by its bias.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{GraspnessMaps, MapRole};
use crate::train::losses::{sigmoid, RefinerPrediction};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Map-head logit columns.
pub const OBJECTNESS: usize = 0;
pub const PARALLEL: usize = 1;
pub const VACUUM: usize = 2;
pub const MAP_OUTPUTS: usize = 3;

/// Sizes of the grasp-head output blocks, stored in this order:
/// view scores, angle logits, depth logits, width, score logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadLayout {
    pub views: usize,
    pub angles: usize,
    pub depths: usize,
    pub scores: usize,
}

impl HeadLayout {
    pub fn width(&self) -> usize {
        self.views + self.angles + self.depths + 1 + self.scores
    }

    fn angle_start(&self) -> usize {
        self.views
    }

    fn depth_start(&self) -> usize {
        self.angle_start() + self.angles
    }

    fn width_index(&self) -> usize {
        self.depth_start() + self.depths
    }

    fn score_start(&self) -> usize {
        self.width_index() + 1
    }

    /// Borrow one output row as a prediction. `width_offset` is added to
    /// the raw width output.
    pub fn split<'a>(&self, row: &'a [f64], width_offset: f64) -> RefinerPrediction<'a> {
        RefinerPrediction {
            view: &row[..self.angle_start()],
            angle: &row[self.angle_start()..self.depth_start()],
            depth: &row[self.depth_start()..self.width_index()],
            width: row[self.width_index()] + width_offset,
            score: &row[self.score_start()..],
        }
    }

    /// Inverse of [`HeadLayout::split`] for gradients.
    pub fn join(&self, view: &[f64], angle: &[f64], depth: &[f64], width: f64, score: &[f64]) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.width());
        row.extend_from_slice(view);
        row.extend_from_slice(angle);
        row.extend_from_slice(depth);
        row.push(width);
        row.extend_from_slice(score);
        debug_assert_eq!(row.len(), self.width());
        row
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Shape {
    rows: usize,
    cols: usize,
    offset: usize,
}

impl Shape {
    fn len(&self) -> usize {
        self.rows * self.cols + self.rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    hidden: Vec<usize>,
    layout: HeadLayout,
    shapes: Vec<Shape>,
    params: Vec<f64>,
    /// Input standardization applied by the `predict_*` methods.
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Added to the raw width output; the head regresses the residual.
    pub width_offset: f64,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Input followed by every hidden activation.
    pub activations: Vec<Array2<f64>>,
    pub map_logits: Array2<f64>,
}

impl Forward {
    pub fn features(&self) -> &Array2<f64> {
        self.activations.last().expect("input is always stored")
    }

    pub fn logits(&self, column: usize) -> Vec<f64> {
        self.map_logits.column(column).to_vec()
    }
}

impl MlpModel {
    /// Zero-initialized model.
    pub fn zeros(input_dim: usize, hidden: &[usize], layout: HeadLayout) -> Self {
        let mut shapes = Vec::new();
        let mut offset = 0;
        let mut fan_in = input_dim;
        for &rows in hidden {
            let s = Shape { rows, cols: fan_in, offset };
            offset += s.len();
            shapes.push(s);
            fan_in = rows;
        }
        // both heads read the last hidden layer
        for rows in [MAP_OUTPUTS, layout.width()] {
            let s = Shape { rows, cols: fan_in, offset };
            offset += s.len();
            shapes.push(s);
        }
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            layout,
            shapes,
            params: vec![0.0; offset],
            feature_mean: vec![0.0; input_dim],
            feature_std: vec![1.0; input_dim],
            width_offset: 0.0,
        }
    }

    /// Hidden layers get uniform He initialization, heads start at zero.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], layout: HeadLayout, rng: &mut R) -> Self {
        let mut m = Self::zeros(input_dim, hidden, layout);
        for k in 0..hidden.len() {
            let s = m.shapes[k];
            let bound = (6.0 / s.cols as f64).sqrt();
            for w in &mut m.params[s.offset..s.offset + s.rows * s.cols] {
                *w = rng.random_range(-bound..bound);
            }
        }
        m
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn layout(&self) -> HeadLayout {
        self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn layer(&self, k: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let s = self.shapes[k];
        let w = &self.params[s.offset..s.offset + s.rows * s.cols];
        let b = &self.params[s.offset + s.rows * s.cols..s.offset + s.len()];
        (
            ArrayView2::from_shape((s.rows, s.cols), w).expect("layer shape"),
            ArrayView1::from(b),
        )
    }

    /// Set one layer's weights (out × in) and bias.
    pub fn set_layer(&mut self, k: usize, weights: &Array2<f64>, bias: &[f64]) -> Result<()> {
        let s = *self
            .shapes
            .get(k)
            .ok_or(Error::IndexOutOfRange { index: k, len: self.shapes.len() })?;
        if weights.dim() != (s.rows, s.cols) || bias.len() != s.rows {
            return Err(Error::InvalidConfig(format!("layer {k} expects {}x{} weights", s.rows, s.cols)));
        }
        for (dst, src) in self.params[s.offset..].iter_mut().zip(weights.iter().chain(bias)) {
            *dst = *src;
        }
        Ok(())
    }

    /// Overwrite the map-head biases (objectness, parallel, vacuum).
    pub fn set_map_bias(&mut self, bias: [f64; MAP_OUTPUTS]) {
        let s = self.shapes[self.hidden.len()];
        let start = s.offset + s.rows * s.cols;
        self.params[start..start + MAP_OUTPUTS].copy_from_slice(&bias);
    }

    /// Overwrite the grasp-head biases; `bias` is one row in the layout's order.
    pub fn set_refiner_bias(&mut self, bias: &[f64]) -> Result<()> {
        let s = self.shapes[self.hidden.len() + 1];
        if bias.len() != s.rows {
            return Err(Error::LengthMismatch { what: "refiner bias", got: bias.len(), expected: s.rows });
        }
        let start = s.offset + s.rows * s.cols;
        self.params[start..start + s.rows].copy_from_slice(bias);
        Ok(())
    }

    fn check_width(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::LengthMismatch { what: "feature width", got: x.ncols(), expected: self.input_dim });
        }
        Ok(())
    }

    pub fn standardize(&self, raw: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_width(raw)?;
        let mean = Array1::from(self.feature_mean.clone());
        let std = Array1::from(self.feature_std.clone());
        Ok((raw - &mean) / &std)
    }

    /// Hidden layers and map head on already standardized inputs.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Forward> {
        self.check_width(x)?;
        let mut activations = vec![x.clone()];
        for k in 0..self.hidden.len() {
            let (w, b) = self.layer(k);
            let z = activations[k].dot(&w.t()) + &b;
            activations.push(z.mapv(|v| v.max(0.0)));
        }
        let (w, b) = self.layer(self.hidden.len());
        let map_logits = activations.last().expect("input").dot(&w.t()) + &b;
        Ok(Forward { activations, map_logits })
    }

    /// Grasp-head outputs for selected rows of a forward pass.
    pub fn refiner_outputs(&self, fwd: &Forward, rows: &[usize]) -> Array2<f64> {
        let h = fwd.features().select(Axis(0), rows);
        let (w, b) = self.layer(self.hidden.len() + 1);
        h.dot(&w.t()) + &b
    }

    /// Parameter gradient given upstream gradients on the map logits
    /// (N × 3) and on the grasp-head outputs of `rows` (M × layout width).
    pub fn backward(&self, fwd: &Forward, d_maps: &Array2<f64>, rows: &[usize], d_refiner: &Array2<f64>) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let depth = self.hidden.len();
        let h = fwd.features();

        let (wm, _) = self.layer(depth);
        let mut d_h = d_maps.dot(&wm);
        self.accumulate(&mut grad, depth, d_maps, h);

        if !rows.is_empty() {
            let (wr, _) = self.layer(depth + 1);
            let h_sel = h.select(Axis(0), rows);
            self.accumulate(&mut grad, depth + 1, d_refiner, &h_sel);
            let d_sel = d_refiner.dot(&wr);
            for (r, &i) in rows.iter().enumerate() {
                let mut row = d_h.row_mut(i);
                row += &d_sel.row(r);
            }
        }

        for k in (0..depth).rev() {
            let out = &fwd.activations[k + 1];
            let d_z = ndarray::Zip::from(&d_h).and(out).map_collect(|&d, &a| if a > 0.0 { d } else { 0.0 });
            self.accumulate(&mut grad, k, &d_z, &fwd.activations[k]);
            if k > 0 {
                d_h = d_z.dot(&self.layer(k).0);
            }
        }
        grad
    }

    fn accumulate(&self, grad: &mut [f64], k: usize, d_out: &Array2<f64>, input: &Array2<f64>) {
        let s = self.shapes[k];
        let dw = d_out.t().dot(input);
        let db = d_out.sum_axis(Axis(0));
        let dst = &mut grad[s.offset..s.offset + s.len()];
        for (g, v) in dst.iter_mut().zip(dw.iter().chain(db.iter())) {
            *g += v;
        }
    }

    /// Sigmoid maps for raw (unstandardized) features.
    pub fn predict_maps(&self, raw: &Array2<f64>) -> Result<GraspnessMaps> {
        let fwd = self.forward(&self.standardize(raw)?)?;
        let col = |c: usize| fwd.map_logits.column(c).iter().map(|&z| sigmoid(z)).collect();
        Ok(GraspnessMaps {
            objectness: col(OBJECTNESS),
            parallel: col(PARALLEL),
            vacuum: col(VACUUM),
            role: MapRole::Prediction,
        })
    }

    /// Raw grasp-head rows for selected points of raw features.
    pub fn predict_refiner(&self, raw: &Array2<f64>, rows: &[usize]) -> Result<Array2<f64>> {
        let fwd = self.forward(&self.standardize(raw)?)?;
        Ok(self.refiner_outputs(&fwd, rows))
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let layers = (0..self.shapes.len())
            .map(|k| {
                let (w, b) = self.layer(k);
                LayerRecord {
                    rows: w.nrows(),
                    cols: w.ncols(),
                    weights: w.iter().copied().collect(),
                    bias: b.to_vec(),
                }
            })
            .collect();
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            input_dim: self.input_dim,
            hidden: self.hidden.clone(),
            layout: self.layout,
            feature_mean: self.feature_mean.clone(),
            feature_std: self.feature_std.clone(),
            width_offset: self.width_offset,
            layers,
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        if c.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::schema(
                "schema_version",
                format!("expected {CHECKPOINT_SCHEMA_VERSION}, found {}", c.schema_version),
            ));
        }
        let mut m = Self::zeros(c.input_dim, &c.hidden, c.layout);
        if c.layers.len() != m.shapes.len() {
            return Err(Error::schema("layers", format!("expected {} layers, found {}", m.shapes.len(), c.layers.len())));
        }
        for (k, l) in c.layers.iter().enumerate() {
            let w = Array2::from_shape_vec((l.rows, l.cols), l.weights.clone())
                .map_err(|e| Error::schema(format!("layers[{k}].weights"), e.to_string()))?;
            m.set_layer(k, &w, &l.bias)
                .map_err(|e| Error::schema(format!("layers[{k}]"), e.to_string()))?;
        }
        if c.feature_mean.len() != c.input_dim || c.feature_std.len() != c.input_dim {
            return Err(Error::schema("feature_mean", "length differs from input_dim"));
        }
        if c.feature_std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::schema("feature_std", "entries must be positive"));
        }
        m.feature_mean = c.feature_mean.clone();
        m.feature_std = c.feature_std.clone();
        m.width_offset = c.width_offset;
        if !m.is_finite() {
            return Err(Error::schema("layers", "non-finite parameter"));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_checkpoint())?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::from_checkpoint(&c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows × cols` values.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub layout: HeadLayout,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub width_offset: f64,
    pub layers: Vec<LayerRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAYOUT: HeadLayout = HeadLayout { views: 3, angles: 2, depths: 2, scores: 2 };

    #[test]
    fn zero_model_outputs_one_half() {
        let m = MlpModel::zeros(4, &[5, 3], LAYOUT);
        let maps = m.predict_maps(&Array2::from_elem((6, 4), 0.7)).unwrap();
        assert!(maps.objectness.iter().chain(&maps.parallel).chain(&maps.vacuum).all(|&p| p == 0.5));
        assert!(m.predict_maps(&Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn single_layer_by_hand() {
        let mut m = MlpModel::zeros(2, &[], LAYOUT);
        m.set_layer(0, &array![[1.0, 2.0], [0.5, -1.0], [0.0, 3.0]], &[0.1, 0.0, -0.2]).unwrap();
        let fwd = m.forward(&array![[2.0, -1.0]]).unwrap();
        assert_eq!(fwd.map_logits.row(0).to_vec(), vec![0.1, 2.0, -3.2]);
    }

    #[test]
    fn batching_is_transparent() {
        let m = MlpModel::new(3, &[8, 4], LAYOUT, &mut ChaCha8Rng::seed_from_u64(1));
        let mut m = m;
        let n = m.param_count();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in m.params_mut() {
            *p += rng.random_range(-0.5..0.5);
        }
        assert_eq!(n, (8 * 3 + 8) + (4 * 8 + 4) + (3 * 4 + 3) + (LAYOUT.width() * 4 + LAYOUT.width()));
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let all = m.forward(&x).unwrap().map_logits;
        for i in 0..5 {
            let one = m.forward(&x.slice(s![i..i + 1, ..]).to_owned()).unwrap().map_logits;
            for c in 0..MAP_OUTPUTS {
                assert!((one[[0, c]] - all[[i, c]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut m = MlpModel::new(3, &[4], LAYOUT, &mut ChaCha8Rng::seed_from_u64(3));
        m.feature_mean = vec![0.1, 0.2, 1.0 / 3.0];
        m.feature_std = vec![1.5, 0.7, 2.0];
        m.width_offset = 0.041;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        assert_eq!(MlpModel::load(&path).unwrap(), m);

        let mut c = m.to_checkpoint();
        c.schema_version = 99;
        assert!(matches!(MlpModel::from_checkpoint(&c), Err(Error::Schema { .. })));
        let mut c = m.to_checkpoint();
        c.layers[0].weights.pop();
        assert!(matches!(MlpModel::from_checkpoint(&c), Err(Error::Schema { field, .. }) if field == "layers[0].weights"));
    }

    #[test]
    fn layout_split_and_join() {
        let row: Vec<f64> = (0..LAYOUT.width()).map(|i| i as f64).collect();
        let p = LAYOUT.split(&row, 0.5);
        assert_eq!(p.view, &[0.0, 1.0, 2.0]);
        assert_eq!(p.angle, &[3.0, 4.0]);
        assert_eq!(p.depth, &[5.0, 6.0]);
        assert_eq!(p.width, 7.5);
        assert_eq!(p.score, &[8.0, 9.0]);
        assert_eq!(LAYOUT.join(p.view, p.angle, p.depth, 7.0, p.score), row);
    }
}
