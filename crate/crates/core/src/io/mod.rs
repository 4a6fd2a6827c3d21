pub mod obj;
pub mod ply;
pub mod png;

pub use obj::{load_obj, save_obj};
pub use ply::{
    load_cloud_ply, load_mesh_ply, save_cloud_ply, save_mesh_ply, save_mesh_ply_with_format,
};
pub use png::{
    load_atlas_png, load_color_png, load_mask_png, save_atlas_png, save_atlas_valid_png,
    save_color_png, save_mask_png,
};
