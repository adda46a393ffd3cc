//! Relation of every point to the keypoints of its own domain, and the guiding
//! matrix that compares those relations across domains.
//!
//! A point's relation is a softmax over its (negated) distances to the
//! keypoints, with temperature `rho * max(C)`; dividing by the largest
//! intra-domain cost makes the scores insensitive to the scale of the data.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{CostMatrix, GuidingMatrix};
use crate::error::{Error, Result};

/// Dissimilarity between two relation vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Divergence {
    /// Jensen-Shannon divergence (natural log).
    #[default]
    Js,
    /// `KL(source || target)`.
    KlSt,
    /// `KL(target || source)`.
    KlTs,
    L1,
    L2,
    /// Raw keypoint distances compared with L2 (ablation without softmax).
    RawDist,
}

impl Divergence {
    pub fn name(self) -> &'static str {
        match self {
            Divergence::Js => "js",
            Divergence::KlSt => "kl-st",
            Divergence::KlTs => "kl-ts",
            Divergence::L1 => "l1",
            Divergence::L2 => "l2",
            Divergence::RawDist => "raw",
        }
    }

    /// Relation mode this divergence expects.
    pub fn relation_mode(self) -> RelationMode {
        match self {
            Divergence::RawDist => RelationMode::RawDist,
            _ => RelationMode::Softmax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationMode {
    Softmax,
    RawDist,
}

impl RelationMode {
    fn name(self) -> &'static str {
        match self {
            RelationMode::Softmax => "softmax",
            RelationMode::RawDist => "raw-dist",
        }
    }
}

/// One row per point, one column per keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationMatrix {
    values: Array2<f64>,
    mode: RelationMode,
}

impl RelationMatrix {
    /// Wraps precomputed rows; simplex membership is checked when the rows are
    /// consumed by [`guiding_matrix`].
    pub fn from_values(values: Array2<f64>, mode: RelationMode) -> Self {
        Self { values, mode }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn mode(&self) -> RelationMode {
        self.mode
    }

    pub fn keypoint_count(&self) -> usize {
        self.values.ncols()
    }
}

pub fn relation_scores(
    intra_cost: &CostMatrix,
    keypoint_indices: &[usize],
    rho: f64,
    mode: RelationMode,
) -> Result<RelationMatrix> {
    let (n, c) = intra_cost.dim();
    if n != c {
        return Err(Error::ShapeMismatch(format!(
            "intra-domain cost must be square, got {n}x{c}"
        )));
    }
    if keypoint_indices.is_empty() {
        return Err(Error::EmptyKeypoints);
    }
    if let Some(&index) = keypoint_indices.iter().find(|&&k| k >= n) {
        return Err(Error::IndexOutOfBounds {
            side: "keypoint",
            index,
            len: n,
        });
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameters(format!("rho must be > 0, got {rho}")));
    }
    let cost = intra_cost.values();
    let max_cost = intra_cost.max();
    let u = keypoint_indices.len();
    let mut values = Array2::zeros((n, u));
    match mode {
        RelationMode::Softmax => {
            // all points coincide: fall back to tau = rho, giving uniform rows
            let tau = if max_cost > 0.0 { rho * max_cost } else { rho };
            for (k, mut row) in values.outer_iter_mut().enumerate() {
                let shift = keypoint_indices
                    .iter()
                    .map(|&i| cost[[k, i]])
                    .fold(f64::INFINITY, f64::min);
                let mut total = 0.0;
                for (slot, &i) in row.iter_mut().zip(keypoint_indices) {
                    *slot = (-(cost[[k, i]] - shift) / tau).exp();
                    total += *slot;
                }
                row.mapv_inplace(|v| v / total);
            }
        }
        RelationMode::RawDist => {
            let scale = if max_cost > 0.0 { max_cost } else { 1.0 };
            for (k, mut row) in values.outer_iter_mut().enumerate() {
                for (slot, &i) in row.iter_mut().zip(keypoint_indices) {
                    *slot = cost[[k, i]] / scale;
                }
            }
        }
    }
    Ok(RelationMatrix { values, mode })
}

/// `G[k, l] = d(Rs[k], Rt[l])`.
pub fn guiding_matrix(
    rs: &RelationMatrix,
    rt: &RelationMatrix,
    divergence: Divergence,
) -> Result<GuidingMatrix> {
    if rs.keypoint_count() != rt.keypoint_count() {
        return Err(Error::ShapeMismatch(format!(
            "relation matrices over {} and {} keypoints",
            rs.keypoint_count(),
            rt.keypoint_count()
        )));
    }
    if rs.mode != rt.mode {
        return Err(Error::IncompatibleMode {
            divergence: divergence.name(),
            mode: "mixed",
        });
    }
    let mode = rs.mode;
    let compatible = match mode {
        RelationMode::Softmax => divergence != Divergence::RawDist,
        RelationMode::RawDist => matches!(divergence, Divergence::RawDist | Divergence::L2),
    };
    if !compatible {
        return Err(Error::IncompatibleMode {
            divergence: divergence.name(),
            mode: mode.name(),
        });
    }
    if mode == RelationMode::Softmax {
        check_simplex_rows(rs.values())?;
        check_simplex_rows(rt.values())?;
    }
    let (m, n) = (rs.values.nrows(), rt.values.nrows());
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let x = rs.values.row(k);
            (0..n)
                .map(|l| divergence_value(divergence, x, rt.values.row(l)))
                .collect()
        })
        .collect();
    let mut g = Array2::zeros((m, n));
    for (k, row) in rows.into_iter().enumerate() {
        for (l, v) in row.into_iter().enumerate() {
            g[[k, l]] = v;
        }
    }
    CostMatrix::new(g)
}

fn check_simplex_rows(values: ArrayView2<f64>) -> Result<()> {
    for (k, row) in values.outer_iter().enumerate() {
        let sum: f64 = row.sum();
        if row.iter().any(|&v| !v.is_finite() || v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NonSimplexRow(k));
        }
    }
    Ok(())
}

const KL_FLOOR: f64 = 1e-300;

fn kl(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let v: f64 = x
        .iter()
        .zip(y.iter())
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b.max(KL_FLOOR)).ln())
        .sum();
    v.max(0.0)
}

fn js(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        let m = 0.5 * (a + b);
        let term = |v: f64| if v > 0.0 { 0.5 * v * (v / m).ln() } else { 0.0 };
        // summed pairwise so that swapping arguments is bit-exact
        acc += term(a) + term(b);
    }
    acc.clamp(0.0, std::f64::consts::LN_2)
}

/// Dissimilarity of two relation vectors; always finite and nonnegative.
pub fn divergence_value(divergence: Divergence, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    match divergence {
        Divergence::Js => js(x, y),
        Divergence::KlSt => kl(x, y),
        Divergence::KlTs => kl(y, x),
        Divergence::L1 => x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()).sum(),
        Divergence::L2 | Divergence::RawDist => x
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
    }
}

/// Relation scores on both sides followed by the guiding matrix.
pub fn guiding_from_intra(
    source_intra: &CostMatrix,
    target_intra: &CostMatrix,
    source_keypoints: &[usize],
    target_keypoints: &[usize],
    rho: f64,
    divergence: Divergence,
) -> Result<GuidingMatrix> {
    let mode = divergence.relation_mode();
    let rs = relation_scores(source_intra, source_keypoints, rho, mode)?;
    let rt = relation_scores(target_intra, target_keypoints, rho, mode)?;
    guiding_matrix(&rs, &rt, divergence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_keypoint_rows_are_one() {
        let c = CostMatrix::intra(array![[0.0, 2.0, 5.0], [2.0, 0.0, 1.0], [5.0, 1.0, 0.0]]).unwrap();
        let r = relation_scores(&c, &[1], 0.1, RelationMode::Softmax).unwrap();
        assert!(r.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn equidistant_point_is_uniform() {
        let c = CostMatrix::intra(array![[0.0, 2.0, 1.0], [2.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        let r = relation_scores(&c, &[0, 1], 0.1, RelationMode::Softmax).unwrap();
        assert_eq!(r.values().row(2).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn hand_computed_softmax() {
        // distances (0, 1) to the two keypoints, max cost 1, rho 0.1
        let c = CostMatrix::intra(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let r = relation_scores(&c, &[0, 1], 0.1, RelationMode::Softmax).unwrap();
        let e = (-10.0f64).exp();
        assert!((r.values()[[0, 0]] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((r.values()[[0, 1]] - e / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn empty_keypoints_rejected() {
        let c = CostMatrix::intra(array![[0.0]]).unwrap();
        assert_eq!(
            relation_scores(&c, &[], 0.1, RelationMode::Softmax).unwrap_err(),
            Error::EmptyKeypoints
        );
    }

    #[test]
    fn zero_cost_falls_back_to_uniform() {
        let c = CostMatrix::intra(Array2::zeros((3, 3))).unwrap();
        let r = relation_scores(&c, &[0, 2], 0.1, RelationMode::Softmax).unwrap();
        assert!(r.values().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn raw_rows_are_max_normalized() {
        let c = CostMatrix::intra(array![[0.0, 4.0, 2.0], [4.0, 0.0, 1.0], [2.0, 1.0, 0.0]]).unwrap();
        let r = relation_scores(&c, &[0, 1], 0.1, RelationMode::RawDist).unwrap();
        assert_eq!(r.values().row(2).to_vec(), vec![0.5, 0.25]);
    }

    #[test]
    fn disjoint_js_is_ln2() {
        let rs = RelationMatrix::from_values(array![[1.0, 0.0]], RelationMode::Softmax);
        let rt = RelationMatrix::from_values(array![[0.0, 1.0]], RelationMode::Softmax);
        let g = guiding_matrix(&rs, &rt, Divergence::Js).unwrap();
        assert!((g.values()[[0, 0]] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_give_zero() {
        let rs = RelationMatrix::from_values(array![[0.2, 0.3, 0.5]], RelationMode::Softmax);
        for d in [Divergence::Js, Divergence::KlSt, Divergence::KlTs, Divergence::L1, Divergence::L2] {
            let g = guiding_matrix(&rs, &rs, d).unwrap();
            assert_eq!(g.values()[[0, 0]], 0.0, "{d:?}");
        }
    }

    #[test]
    fn kl_handles_zero_denominator() {
        let x = array![0.5, 0.5];
        let y = array![1.0, 0.0];
        let v = divergence_value(Divergence::KlSt, x.view(), y.view());
        assert!(v.is_finite() && v > 0.0);
        assert_eq!(divergence_value(Divergence::KlTs, x.view(), y.view()), 2f64.ln());
    }

    #[test]
    fn mode_compatibility() {
        let soft = RelationMatrix::from_values(array![[1.0]], RelationMode::Softmax);
        let raw = RelationMatrix::from_values(array![[0.3]], RelationMode::RawDist);
        assert!(matches!(
            guiding_matrix(&soft, &soft, Divergence::RawDist),
            Err(Error::IncompatibleMode { .. })
        ));
        assert!(matches!(
            guiding_matrix(&raw, &raw, Divergence::Js),
            Err(Error::IncompatibleMode { .. })
        ));
        assert!(guiding_matrix(&raw, &raw, Divergence::L2).is_ok());
        let bad = RelationMatrix::from_values(array![[0.7, 0.7]], RelationMode::Softmax);
        assert_eq!(
            guiding_matrix(&bad, &bad, Divergence::Js).unwrap_err(),
            Error::NonSimplexRow(0)
        );
    }
}
