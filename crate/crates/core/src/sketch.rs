//! Repeated-block-diagonal sketching operators.
//!
//! A sketch holds one real `l x M` block `phi` that is applied to every wavelength
//! block (`z_k = phi y_k`), or, for the per-wavelength variant, one block per
//! wavelength. The full `K l x K M` matrix is never formed outside of tests.

use faer::{c64, Mat, MatRef};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::forward::{ForwardOperator, MeasurementSet};
use crate::geometry::{ArrayGeometry, ArrayKind};
use crate::linalg::{self, CMat};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchKind {
    /// Shared block with i.i.d. standard normal entries.
    Gaussian,
    /// Shared block with i.i.d. +-1 entries. Experimental.
    Rademacher,
    /// Shared selection of randomly chosen elements.
    SubsampleRandom,
    /// Shared selection of border and central elements.
    SubsampleEdgeCenter,
    /// Independent Gaussian block per wavelength.
    PerWavelength,
    /// `phi = I`; full data.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPattern {
    Random,
    EdgeCenter,
}

/// Default share of an edge+center mask spent on the central elements.
pub const DEFAULT_CENTER_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SketchOperator {
    kind: SketchKind,
    rows: usize,
    elements: usize,
    repeats: usize,
    phi: Vec<Mat<f64>>,
    seed: u64,
    selected: Option<Vec<usize>>,
    center_fraction: Option<f64>,
}

fn check_dims(l: usize, m: usize, k: usize) -> Result<()> {
    if m == 0 || k == 0 {
        return Err(invalid(
            "sketch needs at least one element and one wavelength",
        ));
    }
    if l == 0 || l > m {
        return Err(invalid(format!(
            "sketch rows must satisfy 1 <= l <= M, got l={l}, M={m}"
        )));
    }
    Ok(())
}

/// `l` Gaussian aperture codes shared by all `k` wavelengths.
pub fn gaussian_code(l: usize, m: usize, k: usize, seed: u64) -> Result<SketchOperator> {
    check_dims(l, m, k)?;
    let mut rng = rng::seeded(seed, rng::STREAM_SKETCH);
    Ok(SketchOperator {
        kind: SketchKind::Gaussian,
        rows: l,
        elements: m,
        repeats: k,
        phi: vec![linalg::gaussian_matrix(l, m, &mut rng)],
        seed,
        selected: None,
        center_fraction: None,
    })
}

/// Independent Gaussian codes for every wavelength (narrowband acquisition model).
pub fn per_wavelength_code(l: usize, m: usize, k: usize, seed: u64) -> Result<SketchOperator> {
    check_dims(l, m, k)?;
    let mut rng = rng::seeded(seed, rng::STREAM_SKETCH);
    let phi = (0..k)
        .map(|_| linalg::gaussian_matrix(l, m, &mut rng))
        .collect();
    Ok(SketchOperator {
        kind: SketchKind::PerWavelength,
        rows: l,
        elements: m,
        repeats: k,
        phi,
        seed,
        selected: None,
        center_fraction: None,
    })
}

/// Shared +-1 codes. Not part of the analyzed acquisition model.
pub fn rademacher_code(l: usize, m: usize, k: usize, seed: u64) -> Result<SketchOperator> {
    check_dims(l, m, k)?;
    let mut rng = rng::seeded(seed, rng::STREAM_SKETCH);
    let mut phi = Mat::<f64>::zeros(l, m);
    for i in 0..l {
        for j in 0..m {
            phi[(i, j)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
    }
    Ok(SketchOperator {
        kind: SketchKind::Rademacher,
        rows: l,
        elements: m,
        repeats: k,
        phi: vec![phi],
        seed,
        selected: None,
        center_fraction: None,
    })
}

pub fn identity(m: usize, k: usize) -> Result<SketchOperator> {
    check_dims(m, m, k)?;
    Ok(SketchOperator {
        kind: SketchKind::Identity,
        rows: m,
        elements: m,
        repeats: k,
        phi: vec![Mat::<f64>::identity(m, m)],
        seed: 0,
        selected: None,
        center_fraction: None,
    })
}

fn selection_matrix(selected: &[usize], m: usize) -> Mat<f64> {
    let mut phi = Mat::<f64>::zeros(selected.len(), m);
    for (i, &e) in selected.iter().enumerate() {
        phi[(i, e)] = 1.0;
    }
    phi
}

/// Binary subsampling mask choosing `count` distinct elements of `geometry`, shared by
/// `k` wavelengths.
pub fn subsample_mask(
    count: usize,
    geometry: &ArrayGeometry,
    pattern: MaskPattern,
    k: usize,
    seed: u64,
) -> Result<SketchOperator> {
    subsample_mask_with_split(count, geometry, pattern, k, seed, DEFAULT_CENTER_FRACTION)
}

pub fn subsample_mask_with_split(
    count: usize,
    geometry: &ArrayGeometry,
    pattern: MaskPattern,
    k: usize,
    seed: u64,
    center_fraction: f64,
) -> Result<SketchOperator> {
    let m = geometry.element_count();
    check_dims(count, m, k)?;
    if !(0.0..=1.0).contains(&center_fraction) {
        return Err(invalid(format!(
            "center fraction must lie in [0, 1], got {center_fraction}"
        )));
    }
    let mut rng = rng::seeded(seed, rng::STREAM_SKETCH);
    let (kind, selected, fraction) = match pattern {
        MaskPattern::Random => {
            let mut sel = index::sample(&mut rng, m, count).into_vec();
            sel.sort_unstable();
            (SketchKind::SubsampleRandom, sel, None)
        }
        MaskPattern::EdgeCenter => (
            SketchKind::SubsampleEdgeCenter,
            edge_center_selection(count, geometry, center_fraction, &mut rng),
            Some(center_fraction),
        ),
    };
    Ok(SketchOperator {
        kind,
        rows: count,
        elements: m,
        repeats: k,
        phi: vec![selection_matrix(&selected, m)],
        seed,
        selected: Some(selected),
        center_fraction: fraction,
    })
}

/// Border elements in walking order: clockwise around the ring for planar arrays, the
/// two ends working inward for linear arrays.
pub fn border_order(geometry: &ArrayGeometry) -> Vec<usize> {
    match geometry.kind() {
        ArrayKind::Linear => {
            let m = geometry.element_count();
            let mut out = Vec::with_capacity(m);
            let (mut lo, mut hi) = (0usize, m - 1);
            while lo <= hi {
                out.push(lo);
                if hi != lo {
                    out.push(hi);
                }
                lo += 1;
                if hi == 0 {
                    break;
                }
                hi -= 1;
            }
            out.truncate(2.min(m));
            out
        }
        ArrayKind::Planar => {
            let (n1, n2) = (geometry.counts()[0], geometry.counts()[1]);
            let at = |i: usize, j: usize| i * n2 + j;
            if n1 == 1 || n2 == 1 {
                return (0..n1 * n2).collect();
            }
            let mut ring = Vec::with_capacity(2 * (n1 + n2) - 4);
            ring.extend((0..n2).map(|j| at(0, j)));
            ring.extend((1..n1).map(|i| at(i, n2 - 1)));
            ring.extend((0..n2 - 1).rev().map(|j| at(n1 - 1, j)));
            ring.extend((1..n1 - 1).rev().map(|i| at(i, 0)));
            ring
        }
    }
}

/// Elements sorted by distance from the array center, ties broken by index.
pub fn center_order(geometry: &ArrayGeometry) -> Vec<usize> {
    let pos = geometry.positions();
    let mut idx: Vec<usize> = (0..pos.len()).collect();
    let dist = |e: usize| pos[e][0].hypot(pos[e][1]);
    idx.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    idx
}

fn edge_center_selection<R: Rng>(
    count: usize,
    geometry: &ArrayGeometry,
    center_fraction: f64,
    rng: &mut R,
) -> Vec<usize> {
    let m = geometry.element_count();
    let n_center = ((count as f64) * center_fraction).floor() as usize;
    let n_border = count - n_center;
    let mut taken = vec![false; m];
    let mut out = Vec::with_capacity(count);

    let ring = border_order(geometry);
    let picks = n_border.min(ring.len());
    for i in 0..picks {
        let e = ring[i * ring.len() / picks];
        if !taken[e] {
            taken[e] = true;
            out.push(e);
        }
    }
    let mut placed_center = 0;
    for e in center_order(geometry) {
        if placed_center == n_center {
            break;
        }
        if !taken[e] {
            taken[e] = true;
            out.push(e);
            placed_center += 1;
        }
    }
    // Whatever the two rules could not place is filled at random.
    let rest: Vec<usize> = (0..m).filter(|&e| !taken[e]).collect();
    let missing = count - out.len();
    if missing > 0 {
        for i in index::sample(rng, rest.len(), missing) {
            out.push(rest[i]);
        }
    }
    out.sort_unstable();
    out
}

impl SketchOperator {
    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    /// Codes per wavelength (`l`).
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn selected(&self) -> Option<&[usize]> {
        self.selected.as_deref()
    }

    /// Block applied at wavelength index `k`.
    pub fn block(&self, k: usize) -> MatRef<'_, f64> {
        if self.phi.len() == 1 {
            self.phi[0].as_ref()
        } else {
            self.phi[k].as_ref()
        }
    }

    fn check_target(&self, rows: usize) -> Result<()> {
        if rows != self.elements * self.repeats {
            return Err(invalid(format!(
                "sketch expects {} x {} = {} rows, target has {rows}",
                self.repeats,
                self.elements,
                self.elements * self.repeats
            )));
        }
        Ok(())
    }

    /// `z = Phi y` computed block by block.
    pub fn apply_vector(&self, y: &[c64]) -> Result<Vec<c64>> {
        self.check_target(y.len())?;
        let mut z = Vec::with_capacity(self.rows * self.repeats);
        for k in 0..self.repeats {
            let phi = self.block(k);
            let yk = &y[k * self.elements..(k + 1) * self.elements];
            for i in 0..self.rows {
                let mut acc = c64::new(0.0, 0.0);
                for (j, v) in yk.iter().enumerate() {
                    acc += v * phi[(i, j)];
                }
                z.push(acc);
            }
        }
        Ok(z)
    }

    pub fn apply_measurements(&self, ms: &MeasurementSet) -> Result<Vec<c64>> {
        if ms.elements != self.elements || ms.blocks != self.repeats {
            return Err(invalid(format!(
                "measurements are {} x {}, sketch expects {} x {}",
                ms.blocks, ms.elements, self.repeats, self.elements
            )));
        }
        self.apply_vector(&ms.y)
    }

    /// `Phi A` for any matrix with `K M` rows, computed block by block.
    pub fn apply_matrix(&self, a: MatRef<'_, c64>) -> Result<CMat> {
        self.check_target(a.nrows())?;
        let mut out = CMat::zeros(self.rows * self.repeats, a.ncols());
        for k in 0..self.repeats {
            let phi = linalg::to_complex(self.block(k));
            let ak = a.get(k * self.elements..(k + 1) * self.elements, ..);
            out.get_mut(k * self.rows..(k + 1) * self.rows, ..)
                .copy_from(&phi * ak);
        }
        Ok(out)
    }

    pub fn apply_operator(&self, op: &ForwardOperator) -> Result<CMat> {
        if op.elements() != self.elements || op.blocks() != self.repeats {
            return Err(invalid(format!(
                "operator is {} x {} blocks, sketch expects {} x {}",
                op.blocks(),
                op.elements(),
                self.repeats,
                self.elements
            )));
        }
        self.apply_matrix(op.matrix())
    }

    /// Explicit block-diagonal matrix. Only sensible for small sizes.
    pub fn dense(&self) -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(self.rows * self.repeats, self.elements * self.repeats);
        for k in 0..self.repeats {
            out.get_mut(
                k * self.rows..(k + 1) * self.rows,
                k * self.elements..(k + 1) * self.elements,
            )
            .copy_from(self.block(k));
        }
        out
    }

    pub fn record(&self) -> SketchRecord {
        SketchRecord {
            kind: self.kind,
            rows: self.rows,
            elements: self.elements,
            repeats: self.repeats,
            seed: self.seed,
            selected: self.selected.clone(),
            center_fraction: self.center_fraction,
        }
    }
}

/// Serializable description of a sketch. Gaussian, Rademacher and per-wavelength codes
/// are regenerated from their seed; masks carry their selected elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchRecord {
    pub kind: SketchKind,
    pub rows: usize,
    pub elements: usize,
    pub repeats: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_fraction: Option<f64>,
}

impl SketchRecord {
    pub fn replay(&self) -> Result<SketchOperator> {
        match self.kind {
            SketchKind::Gaussian => {
                gaussian_code(self.rows, self.elements, self.repeats, self.seed)
            }
            SketchKind::Rademacher => {
                rademacher_code(self.rows, self.elements, self.repeats, self.seed)
            }
            SketchKind::PerWavelength => {
                per_wavelength_code(self.rows, self.elements, self.repeats, self.seed)
            }
            SketchKind::Identity => identity(self.elements, self.repeats),
            SketchKind::SubsampleRandom | SketchKind::SubsampleEdgeCenter => {
                let selected = self
                    .selected
                    .clone()
                    .ok_or_else(|| invalid("mask record is missing its selected elements"))?;
                check_dims(selected.len(), self.elements, self.repeats)?;
                let mut seen = vec![false; self.elements];
                for &e in &selected {
                    if e >= self.elements || std::mem::replace(&mut seen[e], true) {
                        return Err(invalid("mask selection must be distinct in-range elements"));
                    }
                }
                Ok(SketchOperator {
                    kind: self.kind,
                    rows: selected.len(),
                    elements: self.elements,
                    repeats: self.repeats,
                    phi: vec![selection_matrix(&selected, self.elements)],
                    seed: self.seed,
                    selected: Some(selected),
                    center_fraction: self.center_fraction,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_array;
    use proptest::prelude::*;

    fn cvec(v: &[f64]) -> Vec<c64> {
        v.iter().map(|&x| c64::new(x, 0.0)).collect()
    }

    #[test]
    fn hand_multiplied_blocks() {
        // K = 2, M = 2, phi = [1 1], y = (1, 2, 3, 5) -> z = (3, 8).
        let rec = SketchRecord {
            kind: SketchKind::SubsampleRandom,
            rows: 1,
            elements: 2,
            repeats: 2,
            seed: 0,
            selected: Some(vec![0]),
            center_fraction: None,
        };
        let mut s = rec.replay().unwrap();
        s.phi = vec![Mat::from_fn(1, 2, |_, _| 1.0)];
        let z = s.apply_vector(&cvec(&[1.0, 2.0, 3.0, 5.0])).unwrap();
        assert_eq!(z, cvec(&[3.0, 8.0]));
    }

    #[test]
    fn identity_and_zero() {
        let s = identity(3, 2).unwrap();
        let y = cvec(&[1.0, -2.0, 3.0, 4.0, 0.5, 6.0]);
        assert_eq!(s.apply_vector(&y).unwrap(), y);
        let g = gaussian_code(2, 3, 2, 9).unwrap();
        assert!(g
            .apply_vector(&[c64::new(0.0, 0.0); 6])
            .unwrap()
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn gaussian_is_deterministic_and_full_rank() {
        let a = gaussian_code(12, 12, 3, 77).unwrap();
        let b = gaussian_code(12, 12, 3, 77).unwrap();
        assert_eq!(a, b);
        let c = gaussian_code(12, 12, 3, 78).unwrap();
        assert_ne!(a, c);
        let sv = linalg::singular_values(linalg::to_complex(a.block(0)).as_ref()).unwrap();
        assert_eq!(linalg::numerical_rank(&sv, 1e-10), 12);
    }

    #[test]
    fn eighty_generic_beams_shape() {
        let s = gaussian_code(80, 1600, 15, 1).unwrap();
        assert_eq!((s.rows(), s.elements(), s.repeats()), (80, 1600, 15));
        assert_eq!(s.block(0).shape(), (80, 1600));
        assert!(gaussian_code(1601, 1600, 15, 1).is_err());
    }

    #[test]
    fn per_wavelength_blocks_differ() {
        let s = per_wavelength_code(3, 5, 4, 2).unwrap();
        assert_ne!(s.block(0), s.block(1));
        assert_eq!(s.record().replay().unwrap(), s);
    }

    #[test]
    fn rademacher_entries() {
        let s = rademacher_code(4, 9, 2, 5).unwrap();
        let b = s.block(0);
        for i in 0..4 {
            for j in 0..9 {
                assert!(b[(i, j)] == 1.0 || b[(i, j)] == -1.0);
            }
        }
    }

    #[test]
    fn full_random_mask_is_a_permutation() {
        let g = make_array(ArrayKind::Planar, &[4, 4], 0.01).unwrap();
        let s = subsample_mask(16, &g, MaskPattern::Random, 3, 4).unwrap();
        assert_eq!(
            s.selected().unwrap(),
            (0..16).collect::<Vec<_>>().as_slice()
        );
        assert!(subsample_mask(17, &g, MaskPattern::Random, 3, 4).is_err());
    }

    #[test]
    fn edge_center_on_4x4_by_enumeration() {
        let g = make_array(ArrayKind::Planar, &[4, 4], 0.01).unwrap();
        let s = subsample_mask(4, &g, MaskPattern::EdgeCenter, 1, 0).unwrap();
        // Independent enumeration of the border ring and the central 2x2 square.
        let mut border = Vec::new();
        let mut center = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if i == 0 || i == 3 || j == 0 || j == 3 {
                    border.push(i * 4 + j);
                } else {
                    center.push(i * 4 + j);
                }
            }
        }
        let sel = s.selected().unwrap();
        assert_eq!(sel.len(), 4);
        assert_eq!(sel.iter().filter(|e| border.contains(e)).count(), 2);
        assert_eq!(sel.iter().filter(|e| center.contains(e)).count(), 2);
        // Opposite corners of the ring, first two of the tied central elements.
        assert_eq!(sel, &[0, 5, 6, 15]);
    }

    #[test]
    fn edge_center_split_is_configurable() {
        let g = make_array(ArrayKind::Planar, &[8, 8], 0.01).unwrap();
        let ring = border_order(&g);
        assert_eq!(ring.len(), 28);
        let s = subsample_mask_with_split(10, &g, MaskPattern::EdgeCenter, 2, 3, 0.2).unwrap();
        let sel = s.selected().unwrap();
        assert_eq!(sel.iter().filter(|e| ring.contains(e)).count(), 8);
        // More border picks than the ring holds spill over at random.
        let s = subsample_mask_with_split(40, &g, MaskPattern::EdgeCenter, 2, 3, 0.0).unwrap();
        let sel = s.selected().unwrap();
        assert_eq!(sel.len(), 40);
        assert!(ring.iter().all(|e| sel.contains(e)));
    }

    #[test]
    fn linear_edge_center() {
        let g = make_array(ArrayKind::Linear, &[9], 0.01).unwrap();
        let s = subsample_mask(4, &g, MaskPattern::EdgeCenter, 1, 0).unwrap();
        assert_eq!(s.selected().unwrap(), &[0, 3, 4, 8]);
    }

    #[test]
    fn records_replay() {
        let g = make_array(ArrayKind::Planar, &[5, 5], 0.01).unwrap();
        for s in [
            gaussian_code(4, 25, 3, 11).unwrap(),
            rademacher_code(4, 25, 3, 11).unwrap(),
            subsample_mask(6, &g, MaskPattern::Random, 3, 11).unwrap(),
            subsample_mask(6, &g, MaskPattern::EdgeCenter, 3, 11).unwrap(),
            identity(25, 3).unwrap(),
        ] {
            let json = serde_json::to_string(&s.record()).unwrap();
            let back: SketchRecord = serde_json::from_str(&json).unwrap();
            assert_eq!(back.replay().unwrap(), s);
        }
        let mut rec = subsample_mask(3, &g, MaskPattern::Random, 1, 0)
            .unwrap()
            .record();
        rec.selected = Some(vec![1, 1, 2]);
        assert!(rec.replay().is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = gaussian_code(2, 4, 3, 0).unwrap();
        assert!(s.apply_vector(&[c64::new(1.0, 0.0); 8]).is_err());
        assert!(s.apply_matrix(CMat::zeros(11, 2).as_ref()).is_err());
    }

    proptest! {
        #[test]
        fn blockwise_matches_dense(l in 1usize..5, extra in 0usize..4, k in 1usize..4, seed in 0u64..500, per in any::<bool>()) {
            let m = l + extra;
            let s = if per { per_wavelength_code(l, m, k, seed).unwrap() } else { gaussian_code(l, m, k, seed).unwrap() };
            let mut rng = rng::seeded(seed, 99);
            let a = linalg::gaussian_matrix(k * m, 3, &mut rng);
            let y: Vec<c64> = (0..k * m).map(|i| c64::new(a[(i, 0)], a[(i, 1)])).collect();
            let dense = linalg::to_complex(s.dense().as_ref());
            let want = linalg::mat_vec(dense.as_ref(), &y);
            let got = s.apply_vector(&y).unwrap();
            prop_assert!(linalg::norm(&linalg::sub(&got, &want)) <= 1e-12 * (1.0 + linalg::norm(&want)));

            // Sketching then multiplying equals sketching the product.
            let am = linalg::to_complex(a.as_ref());
            let x = vec![c64::new(0.3, -1.0), c64::new(2.0, 0.5), c64::new(-0.7, 0.0)];
            let lhs = linalg::mat_vec(s.apply_matrix(am.as_ref()).unwrap().as_ref(), &x);
            let rhs = s.apply_vector(&linalg::mat_vec(am.as_ref(), &x)).unwrap();
            prop_assert!(linalg::norm(&linalg::sub(&lhs, &rhs)) <= 1e-12 * (1.0 + linalg::norm(&rhs)));
        }
    }
}
