use mesh4d_core::{
    mask_discrepancy, render_color, render_silhouette, CameraIntrinsics, CameraPose, ColorImage,
    Mesh, SilhouetteMask, TextureAtlas,
};

use crate::error::{PipelineError, Result};

use super::SearchConfig;

/// Segmented reference frame the pose search aligns against.
#[derive(Debug, Clone)]
pub struct ReferenceFrame {
    pub silhouette: SilhouetteMask,
    pub image: Option<ColorImage>,
}

impl ReferenceFrame {
    pub fn new(silhouette: SilhouetteMask, image: Option<ColorImage>) -> Result<Self> {
        if silhouette.is_empty_mask() {
            return Err(PipelineError::InvalidConfig(
                "reference silhouette is empty (no object present)".into(),
            ));
        }
        Ok(ReferenceFrame { silhouette, image })
    }
}

/// What a scorer gets to look at for one candidate pose.
pub struct RenderedView<'a> {
    pub silhouette: &'a SilhouetteMask,
    pub color: Option<&'a ColorImage>,
}

/// Pluggable similarity term (lower is better). The built-in mask scorer is
/// self-contained; an external perceptual scorer can be swapped in without
/// touching the search code.
pub trait SimilarityScorer: Sync {
    fn similarity(&self, view: &RenderedView, reference: &ReferenceFrame) -> f64;
    /// Whether candidate views must be rendered in color for this scorer.
    fn needs_color(&self) -> bool {
        false
    }
}

/// (1 − IoU) of silhouettes plus mean-squared mask error.
pub struct MaskScorer;

impl SimilarityScorer for MaskScorer {
    fn similarity(&self, view: &RenderedView, reference: &ReferenceFrame) -> f64 {
        let stats = mask_discrepancy(view.silhouette, &reference.silhouette)
            .expect("scorer called with matching dimensions");
        (1.0 - stats.iou) + stats.mse
    }
}

/// Weighted candidate score: similarity plus the foreground-mask-area term.
pub fn score_candidate(
    mesh: &Mesh,
    pose: &CameraPose,
    reference: &ReferenceFrame,
    intr: &CameraIntrinsics,
    cfg: &SearchConfig,
) -> Result<f64> {
    score_candidate_with(mesh, None, pose, reference, intr, cfg, &MaskScorer)
}

pub fn score_candidate_with(
    mesh: &Mesh,
    texture: Option<&TextureAtlas>,
    pose: &CameraPose,
    reference: &ReferenceFrame,
    intr: &CameraIntrinsics,
    cfg: &SearchConfig,
    scorer: &dyn SimilarityScorer,
) -> Result<f64> {
    let silhouette = render_silhouette(mesh, pose, intr)?;
    let color = match (scorer.needs_color(), texture) {
        (true, Some(tex)) => Some(render_color(mesh, tex, pose, intr)?),
        _ => None,
    };
    let view = RenderedView {
        silhouette: &silhouette,
        color: color.as_ref(),
    };
    let similarity = scorer.similarity(&view, reference);
    let area = mask_discrepancy(&silhouette, &reference.silhouette)?.area_diff;
    Ok(cfg.weight_similarity * similarity + cfg.weight_mask_area * area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mesh4d_core::render_silhouette;
    use nalgebra::Point3;

    fn tetra() -> Mesh {
        Mesh::new(
            vec![
                Point3::new(0.0, 0.3, 0.0),
                Point3::new(-0.25, -0.2, 0.15),
                Point3::new(0.25, -0.2, 0.1),
                Point3::new(0.0, 0.0, -0.3),
            ],
            vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn exact_match_scores_zero() {
        let mesh = tetra();
        let intr = CameraIntrinsics::default_256();
        let pose = CameraPose::new(0.4, 0.1, 2.0, Point3::origin()).unwrap();
        let sil = render_silhouette(&mesh, &pose, &intr).unwrap();
        let reference = ReferenceFrame::new(sil, None).unwrap();
        let cfg = SearchConfig::default();
        let score = score_candidate(&mesh, &pose, &reference, &intr, &cfg).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn out_of_frame_scores_closed_form() {
        // Empty render vs non-empty reference: IoU = 0, mask MSE and the
        // area term both equal area(ref)/(w·h).
        let mesh = tetra();
        let intr = CameraIntrinsics::default_256();
        let good = CameraPose::new(0.4, 0.1, 2.0, Point3::origin()).unwrap();
        let sil = render_silhouette(&mesh, &good, &intr).unwrap();
        let area_frac = sil.area() / (256.0 * 256.0);
        let reference = ReferenceFrame::new(sil, None).unwrap();
        // Camera at (-5.1,0,0) looking toward -X: the object sits behind it.
        let away = CameraPose::new(0.0, 0.0, 4.9, Point3::new(-10.0, 0.0, 0.0)).unwrap();
        let cfg = SearchConfig::default();
        let score = score_candidate(&mesh, &away, &reference, &intr, &cfg).unwrap();
        let expected = cfg.weight_similarity * (1.0 + area_frac) + cfg.weight_mask_area * area_frac;
        assert!(
            (score - expected).abs() < 1e-12,
            "score {score} vs closed form {expected}"
        );
    }

    #[test]
    fn weighted_sum_reproduced_on_fixed_mask_pairs() {
        // Hand-computed weighted sums on three fixed mask pairs.
        let cfg = SearchConfig::default();
        let mk = |bits: &[(usize, f32)], w: usize| {
            let mut m = SilhouetteMask::zeros(w, w);
            for &(i, v) in bits {
                m.data[i] = v;
            }
            m
        };
        let cases: Vec<(SilhouetteMask, SilhouetteMask)> = vec![
            (mk(&[(0, 1.0), (1, 1.0)], 4), mk(&[(0, 1.0)], 4)),
            (mk(&[(5, 1.0)], 4), mk(&[(5, 1.0), (6, 1.0), (7, 1.0)], 4)),
            (mk(&[(0, 1.0), (15, 1.0)], 4), mk(&[(3, 1.0), (12, 1.0)], 4)),
        ];
        for (render, reference_mask) in cases {
            let stats = mask_discrepancy(&render, &reference_mask).unwrap();
            let expected = cfg.weight_similarity * ((1.0 - stats.iou) + stats.mse)
                + cfg.weight_mask_area * stats.area_diff;
            let reference = ReferenceFrame::new(reference_mask, None).unwrap();
            let view = RenderedView {
                silhouette: &render,
                color: None,
            };
            let sim = MaskScorer.similarity(&view, &reference);
            let area = mask_discrepancy(&render, &reference.silhouette)
                .unwrap()
                .area_diff;
            let score = cfg.weight_similarity * sim + cfg.weight_mask_area * area;
            assert!((score - expected).abs() < 1e-12);
        }
    }
}
