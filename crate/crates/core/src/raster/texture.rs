use crate::error::{GeometryError, Result};

/// Texture map with a per-texel coverage flag.
///
/// Texels are row-major with (0,0) at the top-left; UVs address the image the
/// same way (u right, v down), so `sample_bilinear(0.0, 0.0)` reads the
/// top-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureAtlas {
    pub width: usize,
    pub height: usize,
    /// RGB in [0,1]³, row-major.
    pub rgb: Vec<[f32; 3]>,
    pub valid_mask: Vec<bool>,
}

impl TextureAtlas {
    pub fn new_filled(width: usize, height: usize, color: [f32; 3]) -> Result<Self> {
        let atlas = TextureAtlas {
            width,
            height,
            rgb: vec![color; width * height],
            valid_mask: vec![true; width * height],
        };
        atlas.validate()?;
        Ok(atlas)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidTexture("zero resolution".into()));
        }
        if !self.width.is_power_of_two() || !self.height.is_power_of_two() {
            return Err(GeometryError::InvalidTexture(format!(
                "dimensions must be powers of two, got {}x{}",
                self.width, self.height
            )));
        }
        if self.rgb.len() != self.width * self.height
            || self.valid_mask.len() != self.width * self.height
        {
            return Err(GeometryError::InvalidTexture("buffer size mismatch".into()));
        }
        if self
            .rgb
            .iter()
            .any(|c| c.iter().any(|&v| !(0.0..=1.0).contains(&v)))
        {
            return Err(GeometryError::InvalidTexture("color out of [0,1]".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn texel(&self, x: usize, y: usize) -> [f32; 3] {
        self.rgb[y * self.width + x]
    }

    /// Bilinear footprint of a UV coordinate: four (texel index, weight)
    /// pairs with clamp-to-edge addressing and weights summing to 1.
    #[inline]
    pub fn bilinear_taps(&self, u: f64, v: f64) -> [(usize, f64); 4] {
        let fx = u * self.width as f64 - 0.5;
        let fy = v * self.height as f64 - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let clamp_x = |x: f64| (x.max(0.0) as usize).min(self.width - 1);
        let clamp_y = |y: f64| (y.max(0.0) as usize).min(self.height - 1);
        let (x0i, x1i) = (clamp_x(x0), clamp_x(x0 + 1.0));
        let (y0i, y1i) = (clamp_y(y0), clamp_y(y0 + 1.0));
        [
            (y0i * self.width + x0i, (1.0 - tx) * (1.0 - ty)),
            (y0i * self.width + x1i, tx * (1.0 - ty)),
            (y1i * self.width + x0i, (1.0 - tx) * ty),
            (y1i * self.width + x1i, tx * ty),
        ]
    }

    #[inline]
    pub fn sample_bilinear(&self, u: f64, v: f64) -> [f32; 3] {
        let taps = self.bilinear_taps(u, v);
        let mut out = [0.0f64; 3];
        for (idx, w) in taps {
            for k in 0..3 {
                out[k] += self.rgb[idx][k] as f64 * w;
            }
        }
        [out[0] as f32, out[1] as f32, out[2] as f32]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        let a = TextureAtlas {
            width: 3,
            height: 4,
            rgb: vec![[0.0; 3]; 12],
            valid_mask: vec![true; 12],
        };
        assert!(a.validate().is_err());
    }

    #[test]
    fn bilinear_at_texel_center_is_exact() {
        let mut a = TextureAtlas::new_filled(4, 4, [0.0; 3]).unwrap();
        a.rgb[2 * 4 + 1] = [0.25, 0.5, 0.75];
        let u = (1.0 + 0.5) / 4.0;
        let v = (2.0 + 0.5) / 4.0;
        assert_eq!(a.sample_bilinear(u, v), [0.25, 0.5, 0.75]);
    }

    #[test]
    fn bilinear_weights_sum_to_one() {
        let a = TextureAtlas::new_filled(8, 8, [1.0; 3]).unwrap();
        for &(u, v) in &[(0.0, 0.0), (0.999, 0.999), (0.37, 0.62), (0.5, 0.01)] {
            let s: f64 = a.bilinear_taps(u, v).iter().map(|t| t.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
