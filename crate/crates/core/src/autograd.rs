//! A small reverse-mode tape over dense `f64` matrices.
//!
//! Every value on the tape is an `Array2<f64>`; vectors are `1×n` rows or
//! `n×1` columns. A [`Graph`] is built per forward pass, parameters are bound
//! into it by name from a [`ParamStore`], and [`Graph::backward`] returns the
//! gradient of a scalar node with respect to every bound parameter.

use std::collections::BTreeMap;

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

/// Named parameter tensors, ordered by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    tensors: BTreeMap<String, Array2<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) {
        self.tensors.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array2<f64>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array2<f64>)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    /// Uniform `±1/sqrt(fan_in)` weight of shape `fan_in × fan_out`.
    pub fn init_linear<R: Rng>(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..bound));
        self.insert(name, w);
    }

    pub fn init_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        self.insert(name, Array2::zeros((rows, cols)));
    }
}

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var, Var),
    AddRowBias(Var, Var),
    AddColBias(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Sqrt(Var),
    Abs(Var),
    Transpose(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    MeanRows(Var),
    MeanCols(Var),
    Sum(Var),
    BroadcastCols(Var),
    SoftmaxRows(Var),
    RowL2Normalize(Var, f64),
    Im2Col(Var, ConvGeometry),
}

/// Non-overlapping or strided patch extraction over a `(H·W) × C` token map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width - self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.channels
    }
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

pub struct Graph<'p> {
    params: Option<&'p ParamStore>,
    nodes: Vec<Node>,
    bound: BTreeMap<String, Var>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Graph {
            params: None,
            nodes: Vec::new(),
            bound: BTreeMap::new(),
        }
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params: Some(params),
            ..Default::default()
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant leaf; gradients reach it but are not reported.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn row(&mut self, values: &[f64]) -> Var {
        let a = Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape");
        self.constant(a)
    }

    pub fn column(&mut self, values: &[f64]) -> Var {
        let a = Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column shape");
        self.constant(a)
    }

    /// Binds the named parameter; repeated calls return the same node.
    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(v) = self.bound.get(name) {
            return Ok(*v);
        }
        let value = self
            .params
            .and_then(|p| p.get(name))
            .ok_or_else(|| Error::Config(format!("missing parameter {name}")))?
            .clone();
        let v = self.push(value, Op::Leaf);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a) * k;
        self.push(value, Op::Scale(a, k))
    }

    /// `a + b` with `b` a `1×1` node broadcast over `a`.
    pub fn add_scalar(&mut self, a: Var, b: Var) -> Var {
        let k = self.scalar(b);
        let value = self.value(a) + k;
        self.push(value, Op::AddScalar(a, b))
    }

    /// `a (m×n) + bias (1×n)` broadcast over rows.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Var {
        let value = self.value(a) + self.value(bias);
        self.push(value, Op::AddRowBias(a, bias))
    }

    /// `a (m×n) + bias (m×1)` broadcast over columns.
    pub fn add_col_bias(&mut self, a: Var, bias: Var) -> Var {
        let value = self.value(a) + self.value(bias);
        self.push(value, Op::AddColBias(a, bias))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    /// `sqrt(max(a, 0))`, with a zero subgradient at 0.
    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0).sqrt());
        self.push(value, Op::Sqrt(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::abs);
        self.push(value, Op::Abs(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        self.push(value, Op::Transpose(a))
    }

    /// Stacks vertically; all parts share a column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let views: Vec<_> = parts.iter().map(|v| self.value(*v).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::Shape(format!("concat_rows: {e}")))?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    /// Stacks horizontally; all parts share a row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let views: Vec<_> = parts.iter().map(|v| self.value(*v).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| Error::Shape(format!("concat_cols: {e}")))?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Mean over rows: `m×n → 1×n`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let value = self.value(a).mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0));
        self.push(value, Op::MeanRows(a))
    }

    /// Mean over columns: `m×n → m×1`.
    pub fn mean_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).mean_axis(Axis(1)).expect("non-empty").insert_axis(Axis(1));
        self.push(value, Op::MeanCols(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    /// Repeats an `m×1` column `n` times: `m×1 → m×n`.
    pub fn broadcast_cols(&mut self, a: Var, n: usize) -> Var {
        let col = self.value(a);
        let value = Array2::from_shape_fn((col.nrows(), n), |(i, _)| col[[i, 0]]);
        self.push(value, Op::BroadcastCols(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - max).exp());
            let z = row.sum();
            row.mapv_inplace(|x| x / z);
        }
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Each row divided by `sqrt(‖row‖² + eps²)`.
    pub fn row_l2_normalize(&mut self, a: Var, eps: f64) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let r = (row.dot(&row) + eps * eps).sqrt();
            row.mapv_inplace(|x| x / r);
        }
        self.push(value, Op::RowL2Normalize(a, eps))
    }

    /// Extracts `kernel×kernel` patches from a `(H·W) × C` token map.
    pub fn im2col(&mut self, a: Var, geom: ConvGeometry) -> Result<Var> {
        let input = self.value(a);
        if input.dim() != (geom.height * geom.width, geom.channels)
            || geom.kernel > geom.height
            || geom.kernel > geom.width
            || geom.stride == 0
        {
            return Err(Error::Shape(format!(
                "im2col: input {:?} incompatible with {geom:?}",
                input.dim()
            )));
        }
        let (oh, ow) = (geom.out_height(), geom.out_width());
        let mut out = Array2::zeros((oh * ow, geom.patch_len()));
        for oy in 0..oh {
            for ox in 0..ow {
                let mut dst = out.row_mut(oy * ow + ox);
                for ky in 0..geom.kernel {
                    for kx in 0..geom.kernel {
                        let src = (oy * geom.stride + ky) * geom.width + ox * geom.stride + kx;
                        let off = (ky * geom.kernel + kx) * geom.channels;
                        dst.slice_mut(s![off..off + geom.channels])
                            .assign(&input.row(src));
                    }
                }
            }
        }
        Ok(self.push(out, Op::Im2Col(a, geom)))
    }

    /// Reverse sweep from the scalar node `root`.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Array2::ones(self.nodes[root.0].value.dim()));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let acc = |grads: &mut Vec<Option<Array2<f64>>>, v: Var, d: Array2<f64>| {
                match &mut grads[v.0] {
                    Some(existing) => *existing += &d,
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, -&g);
                }
                Op::Mul(a, b) => {
                    let da = &g * self.value(*b);
                    let db = &g * self.value(*a);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Scale(a, k) => acc(&mut grads, *a, &g * *k),
                Op::AddScalar(a, b) => {
                    acc(&mut grads, *b, Array2::from_elem((1, 1), g.sum()));
                    acc(&mut grads, *a, g.clone());
                }
                Op::AddRowBias(a, b) => {
                    acc(&mut grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g.clone());
                }
                Op::AddColBias(a, b) => {
                    acc(&mut grads, *b, g.sum_axis(Axis(1)).insert_axis(Axis(1)));
                    acc(&mut grads, *a, g.clone());
                }
                Op::Tanh(a) => {
                    let d = Zip::from(&g).and(&node.value).map_collect(|g, y| g * (1.0 - y * y));
                    acc(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = Zip::from(&g).and(&node.value).map_collect(|g, y| g * y * (1.0 - y));
                    acc(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let d = Zip::from(&g)
                        .and(self.value(*a))
                        .map_collect(|g, x| if *x > 0.0 { *g } else { 0.0 });
                    acc(&mut grads, *a, d);
                }
                Op::Sqrt(a) => {
                    let d = Zip::from(&g)
                        .and(&node.value)
                        .map_collect(|g, y| if *y > 0.0 { g / (2.0 * y) } else { 0.0 });
                    acc(&mut grads, *a, d);
                }
                Op::Abs(a) => {
                    let d = Zip::from(&g).and(self.value(*a)).map_collect(|g, x| {
                        if *x > 0.0 {
                            *g
                        } else if *x < 0.0 {
                            -g
                        } else {
                            0.0
                        }
                    });
                    acc(&mut grads, *a, d);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.t().to_owned()),
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let rows = self.value(*p).nrows();
                        acc(&mut grads, *p, g.slice(s![start..start + rows, ..]).to_owned());
                        start += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let cols = self.value(*p).ncols();
                        acc(&mut grads, *p, g.slice(s![.., start..start + cols]).to_owned());
                        start += cols;
                    }
                }
                Op::MeanRows(a) => {
                    let (m, n) = self.shape(*a);
                    let d = Array2::from_shape_fn((m, n), |(_, j)| g[[0, j]] / m as f64);
                    acc(&mut grads, *a, d);
                }
                Op::MeanCols(a) => {
                    let (m, n) = self.shape(*a);
                    let d = Array2::from_shape_fn((m, n), |(i, _)| g[[i, 0]] / n as f64);
                    acc(&mut grads, *a, d);
                }
                Op::Sum(a) => {
                    let d = Array2::from_elem(self.shape(*a), g[[0, 0]]);
                    acc(&mut grads, *a, d);
                }
                Op::BroadcastCols(a) => {
                    acc(&mut grads, *a, g.sum_axis(Axis(1)).insert_axis(Axis(1)));
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = &g * y;
                    for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                        let dot = drow.sum();
                        Zip::from(&mut drow).and(&yrow).for_each(|d, y| *d -= y * dot);
                    }
                    acc(&mut grads, *a, d);
                }
                Op::RowL2Normalize(a, eps) => {
                    let x = self.value(*a);
                    let mut d = Array2::zeros(x.dim());
                    for ((mut drow, xrow), grow) in d.rows_mut().into_iter().zip(x.rows()).zip(g.rows()) {
                        let r = (xrow.dot(&xrow) + eps * eps).sqrt();
                        let gx = grow.dot(&xrow);
                        Zip::from(&mut drow)
                            .and(&xrow)
                            .and(&grow)
                            .for_each(|d, x, g| *d = g / r - x * gx / (r * r * r));
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Im2Col(a, geom) => {
                    let mut d = Array2::zeros((geom.height * geom.width, geom.channels));
                    let ow = geom.out_width();
                    for oy in 0..geom.out_height() {
                        for ox in 0..ow {
                            let src_row = g.row(oy * ow + ox);
                            for ky in 0..geom.kernel {
                                for kx in 0..geom.kernel {
                                    let dst = (oy * geom.stride + ky) * geom.width
                                        + ox * geom.stride
                                        + kx;
                                    let off = (ky * geom.kernel + kx) * geom.channels;
                                    let mut drow = d.row_mut(dst);
                                    drow += &src_row.slice(s![off..off + geom.channels]);
                                }
                            }
                        }
                    }
                    acc(&mut grads, *a, d);
                }
            }
            grads[idx] = Some(g);
        }

        let params = self
            .bound
            .iter()
            .map(|(name, v)| {
                let g = grads[v.0]
                    .clone()
                    .unwrap_or_else(|| Array2::zeros(self.nodes[v.0].value.dim()));
                (name.clone(), g)
            })
            .collect();
        Gradients { params, nodes: grads }
    }
}

/// Result of a reverse sweep.
pub struct Gradients {
    params: BTreeMap<String, Array2<f64>>,
    nodes: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient for a bound parameter; zero if the parameter did not
    /// influence the root.
    pub fn param(&self, name: &str) -> Option<&Array2<f64>> {
        self.params.get(name)
    }

    pub fn params(&self) -> &BTreeMap<String, Array2<f64>> {
        &self.params
    }

    pub fn into_params(self) -> BTreeMap<String, Array2<f64>> {
        self.params
    }

    /// Gradient at any node, `None` if unreachable from the root.
    pub fn node(&self, v: Var) -> Option<&Array2<f64>> {
        self.nodes.get(v.0).and_then(|g| g.as_ref())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
