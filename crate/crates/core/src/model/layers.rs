use ndarray::{concatenate, Array2, ArrayView2, Axis, NdFloat, Zip};

use crate::error::{Error, Result};

use super::params::{Head, ModelParams};

pub(crate) fn relu<T: NdFloat>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

/// `x W + b` with `b` broadcast over rows.
pub(crate) fn affine<T: NdFloat>(
    op: &'static str,
    x: ArrayView2<'_, T>,
    w: &Array2<T>,
    b: &Array2<T>,
) -> Result<Array2<T>> {
    if x.ncols() != w.nrows() {
        return Err(Error::dims(op, format!("{} input columns", w.nrows()), format!("{} columns", x.ncols())));
    }
    let mut z = x.dot(w);
    z += b;
    Ok(z)
}

/// Ego embeddings `ReLU(XW' + b')`.
pub fn ego_embed<T: NdFloat>(x: ArrayView2<'_, T>, params: &ModelParams<T>) -> Result<Array2<T>> {
    let z = affine("ego_embed", x, &params.ego_weight().value, &params.ego_bias().value)?;
    Ok(z.mapv(relu))
}

/// Column blocks `[H⁽⁰⁾ | H⁽ᴷ⁾ | H*]`.
pub fn concat_embeddings<T: NdFloat>(
    h0: ArrayView2<'_, T>,
    hk: ArrayView2<'_, T>,
    h_star: ArrayView2<'_, T>,
) -> Result<Array2<T>> {
    for other in [&hk, &h_star] {
        if other.dim() != h0.dim() {
            return Err(Error::dims("concat_embeddings", format!("{:?}", h0.dim()), format!("{:?}", other.dim())));
        }
    }
    Ok(concatenate(Axis(1), &[h0, hk, h_star]).expect("conforming blocks"))
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax_rows<T: NdFloat>(logits: ArrayView2<'_, T>) -> Array2<T> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Intermediate values of a prediction head.
#[derive(Debug, Clone)]
pub struct HeadOutput<T> {
    /// Pre-activation: `H ⊙ w` or `HW''' + b'''`.
    pub pre: Array2<T>,
    pub hidden: Array2<T>,
    pub logits: Array2<T>,
}

pub fn head_forward<T: NdFloat>(hcat: ArrayView2<'_, T>, params: &ModelParams<T>) -> Result<HeadOutput<T>> {
    let width = 3 * params.hidden_dim();
    if hcat.ncols() != width {
        return Err(Error::dims("predict", format!("{width} columns"), format!("{} columns", hcat.ncols())));
    }
    let pre = match params.mix() {
        None => &hcat * &params.scale().value,
        Some((w, b)) => affine("predict_mlp", hcat, &w.value, &b.value)?,
    };
    let hidden = pre.mapv(relu);
    let logits = affine("predict", hidden.view(), &params.out_weight().value, &params.out_bias().value)?;
    Ok(HeadOutput { pre, hidden, logits })
}

fn predict_with<T: NdFloat>(hcat: ArrayView2<'_, T>, params: &ModelParams<T>, head: Head) -> Result<Array2<T>> {
    if params.head() != head {
        return Err(Error::InvalidParameter(format!(
            "parameters were built for the {} head, not {head}",
            params.head()
        )));
    }
    Ok(softmax_rows(head_forward(hcat, params)?.logits.view()))
}

/// `Softmax(ReLU(H ⊙ w)W'' + b'')`.
pub fn predict_hadamard<T: NdFloat>(hcat: ArrayView2<'_, T>, params: &ModelParams<T>) -> Result<Array2<T>> {
    predict_with(hcat, params, Head::Hadamard)
}

/// `Softmax(ReLU(HW''' + b''')W'' + b'')`.
pub fn predict_mlp<T: NdFloat>(hcat: ArrayView2<'_, T>, params: &ModelParams<T>) -> Result<Array2<T>> {
    predict_with(hcat, params, Head::Mlp)
}

pub(crate) fn check_labels(op: &'static str, n: usize, classes: usize, labels: &[usize], mask_len: usize) -> Result<()> {
    if labels.len() != n || mask_len != n {
        return Err(Error::dims(op, format!("{n} labels and mask entries"), format!("{} labels, {mask_len} mask entries", labels.len())));
    }
    if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::InvalidParameter(format!("label {l} of node {i} outside 0..{classes}")));
    }
    Ok(())
}

/// Cross-entropy `−Σ_u ln Y[u, label_u]` summed over masked nodes.
pub fn ce_loss<T: NdFloat>(y: ArrayView2<'_, T>, labels: &[usize], mask: &[bool]) -> Result<f64> {
    check_labels("ce_loss", y.nrows(), y.ncols(), labels, mask.len())?;
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyTrainingMask);
    }
    Ok(mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(u, _)| -y[[u, labels[u]]].to_f64().expect("finite probability").ln())
        .sum())
}

/// Cross-entropy from logits via log-sum-exp, weighted per node.
pub fn ce_loss_from_logits<T: NdFloat>(logits: ArrayView2<'_, T>, labels: &[usize], weights: &[f64]) -> Result<f64> {
    check_labels("ce_loss", logits.nrows(), logits.ncols(), labels, weights.len())?;
    if !weights.iter().any(|&w| w != 0.0) {
        return Err(Error::EmptyTrainingMask);
    }
    let mut total = 0.0;
    for (u, row) in logits.rows().into_iter().enumerate() {
        if weights[u] == 0.0 {
            continue;
        }
        let row: Vec<f64> = row.iter().map(|v| v.to_f64().expect("float")).collect();
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += weights[u] * (lse - row[labels[u]]);
    }
    Ok(total)
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn predict_labels<T: NdFloat>(y: ArrayView2<'_, T>) -> Vec<usize> {
    y.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction of masked nodes whose argmax prediction equals the label.
pub fn accuracy<T: NdFloat>(y: ArrayView2<'_, T>, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if labels.len() != y.nrows() || mask.len() != y.nrows() {
        return Err(Error::dims("accuracy", y.nrows(), format!("{} labels, {} mask entries", labels.len(), mask.len())));
    }
    let total = mask.iter().filter(|&&m| m).count();
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    let predicted = predict_labels(y);
    let correct = (0..labels.len()).filter(|&u| mask[u] && predicted[u] == labels[u]).count();
    Ok(correct as f64 / total as f64)
}

/// `Σ_rows`, kept as a `1 × cols` matrix.
pub(crate) fn column_sums<T: NdFloat>(m: &Array2<T>) -> Array2<T> {
    m.sum_axis(Axis(0)).insert_axis(Axis(0))
}

/// `grad ⊙ [pre > 0]`.
pub(crate) fn relu_backward<T: NdFloat>(grad: &Array2<T>, pre: &Array2<T>) -> Array2<T> {
    Zip::from(grad)
        .and(pre)
        .map_collect(|&g, &p| if p > T::zero() { g } else { T::zero() })
}
