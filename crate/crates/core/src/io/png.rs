use std::path::Path;

use image::{GrayImage, ImageReader, RgbImage, RgbaImage};

use crate::error::{GeometryError, Result};
use crate::raster::{ColorImage, SilhouetteMask, TextureAtlas};

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn from_u8(v: u8) -> f32 {
    v as f32 / 255.0
}

pub fn save_mask_png(mask: &SilhouetteMask, path: &Path) -> Result<()> {
    let img = GrayImage::from_fn(mask.width as u32, mask.height as u32, |x, y| {
        image::Luma([to_u8(mask.data[y as usize * mask.width + x as usize])])
    });
    img.save(path)
        .map_err(|e| GeometryError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

pub fn load_mask_png(path: &Path) -> Result<SilhouetteMask> {
    let img = ImageReader::open(path)?
        .decode()
        .map_err(|e| GeometryError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(SilhouetteMask {
        width: w,
        height: h,
        data: img.into_raw().into_iter().map(from_u8).collect(),
    })
}

pub fn save_color_png(img: &ColorImage, path: &Path) -> Result<()> {
    let out = RgbaImage::from_fn(img.width as u32, img.height as u32, |x, y| {
        let px = img.data[y as usize * img.width + x as usize];
        image::Rgba([to_u8(px[0]), to_u8(px[1]), to_u8(px[2]), to_u8(px[3])])
    });
    out.save(path).map_err(|e| GeometryError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_color_png(path: &Path) -> Result<ColorImage> {
    let img = ImageReader::open(path)?
        .decode()
        .map_err(|e| GeometryError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .into_rgba8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| [from_u8(p[0]), from_u8(p[1]), from_u8(p[2]), from_u8(p[3])])
        .collect();
    Ok(ColorImage {
        width: w,
        height: h,
        data,
    })
}

pub fn save_atlas_png(atlas: &TextureAtlas, path: &Path) -> Result<()> {
    let out = RgbImage::from_fn(atlas.width as u32, atlas.height as u32, |x, y| {
        let px = atlas.rgb[y as usize * atlas.width + x as usize];
        image::Rgb([to_u8(px[0]), to_u8(px[1]), to_u8(px[2])])
    });
    out.save(path).map_err(|e| GeometryError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn save_atlas_valid_png(atlas: &TextureAtlas, path: &Path) -> Result<()> {
    let out = GrayImage::from_fn(atlas.width as u32, atlas.height as u32, |x, y| {
        let v = atlas.valid_mask[y as usize * atlas.width + x as usize];
        image::Luma([if v { 255 } else { 0 }])
    });
    out.save(path).map_err(|e| GeometryError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_atlas_png(path: &Path) -> Result<TextureAtlas> {
    let img = ImageReader::open(path)?
        .decode()
        .map_err(|e| GeometryError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rgb: Vec<[f32; 3]> = img
        .pixels()
        .map(|p| [from_u8(p[0]), from_u8(p[1]), from_u8(p[2])])
        .collect();
    let atlas = TextureAtlas {
        width: w,
        height: h,
        valid_mask: vec![true; rgb.len()],
        rgb,
    };
    atlas.validate()?;
    Ok(atlas)
}
