use mesh4d_core::*;
use nalgebra::{Point2, Point3, Vector3};

/// Lat-long sphere used as an analytic oracle target.
fn sphere(radius: f64, rings: usize, segments: usize) -> Mesh {
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    for r in 0..=rings {
        let theta = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..=segments {
            let phi = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(Point3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.cos(),
                radius * theta.sin() * phi.sin(),
            ));
            uvs.push(Point2::new(
                s as f64 / segments as f64,
                r as f64 / rings as f64,
            ));
        }
    }
    let mut faces = Vec::new();
    let stride = segments + 1;
    for r in 0..rings {
        for s in 0..segments {
            let a = (r * stride + s) as u32;
            let b = (r * stride + s + 1) as u32;
            let c = ((r + 1) * stride + s) as u32;
            let d = ((r + 1) * stride + s + 1) as u32;
            if r > 0 {
                faces.push([a, b, c]);
            }
            if r + 1 < rings {
                faces.push([b, d, c]);
            }
        }
    }
    let mesh = Mesh {
        vertices,
        faces,
        uvs: Some(uvs),
        normals: None,
    };
    mesh.validate().unwrap();
    mesh
}

fn default_pose() -> CameraPose {
    CameraPose::new(0.0, 0.0, 2.0, Point3::origin()).unwrap()
}

#[test]
fn empty_mesh_renders_zero_mask() {
    let mesh = Mesh::new(Vec::new(), Vec::new()).unwrap();
    let mask =
        render_silhouette(&mesh, &default_pose(), &CameraIntrinsics::default_256()).unwrap();
    assert!(mask.is_empty_mask());
}

#[test]
fn mesh_behind_camera_renders_zero_mask() {
    // Camera at (2,0,0) looking at origin; place the object behind it.
    let mut mesh = sphere(0.3, 8, 12);
    for v in &mut mesh.vertices {
        v.x += 5.0;
    }
    let mask =
        render_silhouette(&mesh, &default_pose(), &CameraIntrinsics::default_256()).unwrap();
    assert!(mask.is_empty_mask());
}

#[test]
fn sphere_silhouette_matches_analytic_disc() {
    // A sphere of radius ρ seen from distance d projects to a disc whose
    // angular radius is asin(ρ/d); in NDC that is tan(asin(ρ/d)) · f with
    // f = 1/tan(fov/2). Oracle below computes the expected pixel area.
    let (rho, d): (f64, f64) = (0.5, 2.0);
    let intr = CameraIntrinsics::default_256();
    let f = 1.0 / (intr.vertical_fov / 2.0).tan();
    let ndc_radius = (rho / d).asin().tan() * f;
    let pixel_radius = ndc_radius * intr.width as f64 / 2.0;
    let expected_area = std::f64::consts::PI * pixel_radius * pixel_radius;

    let mesh = sphere(rho, 64, 128);
    let mask = render_silhouette(&mesh, &default_pose(), &intr).unwrap();
    let area = mask.area();
    let rel = (area - expected_area).abs() / expected_area;
    assert!(
        rel < 0.02,
        "area {area} vs analytic {expected_area} (rel err {rel:.4})"
    );
}

#[test]
fn rendering_is_deterministic() {
    let mesh = sphere(0.4, 24, 32);
    let intr = CameraIntrinsics::default_256();
    let pose = CameraPose::new(0.7, 0.3, 2.2, Point3::new(0.05, -0.02, 0.0)).unwrap();
    let a = render_silhouette(&mesh, &pose, &intr).unwrap();
    let b = render_silhouette(&mesh, &pose, &intr).unwrap();
    assert_eq!(a, b);
    let ga = render_geometry_buffer(&mesh, &pose, &intr).unwrap();
    let gb = render_geometry_buffer(&mesh, &pose, &intr).unwrap();
    assert_eq!(ga.depths, gb.depths);
    assert_eq!(ga.valid, gb.valid);
}

#[test]
fn adjacent_triangles_cover_each_pixel_once() {
    // Two triangles sharing a diagonal: with the top-left rule no pixel may
    // be claimed twice, and the union must equal the quad's coverage.
    let quad = Mesh::new(
        vec![
            Point3::new(-0.5, -0.5, 0.0),
            Point3::new(0.5, -0.5, 0.0),
            Point3::new(0.5, 0.5, 0.0),
            Point3::new(-0.5, 0.5, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    let pose = CameraPose::new(0.0, 1e-6, 2.0, Point3::origin()).unwrap();
    let intr = CameraIntrinsics::default_256();
    // Render each triangle separately and check disjointness.
    let t0 = Mesh::new(quad.vertices.clone(), vec![[0, 1, 2]]).unwrap();
    let t1 = Mesh::new(quad.vertices.clone(), vec![[0, 2, 3]]).unwrap();
    let m0 = render_silhouette(&t0, &pose, &intr).unwrap();
    let m1 = render_silhouette(&t1, &pose, &intr).unwrap();
    let both = render_silhouette(&quad, &pose, &intr).unwrap();
    let mut overlap = 0usize;
    for i in 0..m0.data.len() {
        if m0.data[i] == 1.0 && m1.data[i] == 1.0 {
            overlap += 1;
        }
        let union = (m0.data[i].max(m1.data[i]) - both.data[i]).abs();
        assert_eq!(union, 0.0, "union mismatch at {i}");
    }
    assert_eq!(overlap, 0, "{overlap} pixels double-covered on shared edge");
}

#[test]
fn geometry_buffer_plane_depth_is_constant() {
    // A camera-facing quad at x = 1 viewed from (2,0,0): every valid pixel
    // sits at x = 1 and eye depth 1.
    let quad = Mesh::new(
        vec![
            Point3::new(1.0, -0.3, -0.3),
            Point3::new(1.0, -0.3, 0.3),
            Point3::new(1.0, 0.3, 0.3),
            Point3::new(1.0, 0.3, -0.3),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    let intr = CameraIntrinsics::default_256();
    let buf = render_geometry_buffer(&quad, &default_pose(), &intr).unwrap();
    let mut n = 0;
    for i in 0..buf.valid.len() {
        if buf.valid[i] {
            assert!((buf.positions[i].x - 1.0).abs() < 1e-5);
            assert!((buf.depths[i] - 1.0).abs() < 1e-5);
            n += 1;
        }
    }
    assert!(n > 100, "quad should cover a sizable region, got {n} px");
}

#[test]
fn geometry_buffer_points_reproject_to_pixel_centers() {
    let mesh = sphere(0.5, 32, 48);
    let pose = CameraPose::new(0.9, 0.4, 2.3, Point3::origin()).unwrap();
    let intr = CameraIntrinsics::default_256();
    let buf = render_geometry_buffer(&mesh, &pose, &intr).unwrap();
    let vp = intr.projection_matrix() * pose.view_matrix();
    let cloud = buf.to_point_cloud();
    let pixels = cloud.pixel_coords.as_ref().unwrap();
    for (p, px) in cloud.points.iter().zip(pixels) {
        let (proj, _) = project_point(&vp, &intr, p).expect("visible point");
        let d = (proj - px).norm();
        assert!(d < 0.51, "reprojection off by {d} px at {px:?}");
    }
}

#[test]
fn geometry_buffer_depth_keeps_nearer_quad() {
    // Two stacked quads facing the camera at x=1.0 and x=0.5; the nearer
    // one (x=1.0, closer to the camera at x=2) must win everywhere it covers.
    let verts = vec![
        Point3::new(1.0, -0.2, -0.2),
        Point3::new(1.0, -0.2, 0.2),
        Point3::new(1.0, 0.2, 0.2),
        Point3::new(1.0, 0.2, -0.2),
        Point3::new(0.5, -0.3, -0.3),
        Point3::new(0.5, -0.3, 0.3),
        Point3::new(0.5, 0.3, 0.3),
        Point3::new(0.5, 0.3, -0.3),
    ];
    // far quad first in face order to exercise the depth test
    let mesh = Mesh::new(
        verts,
        vec![[4, 5, 6], [4, 6, 7], [0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    let intr = CameraIntrinsics::default_256();
    let buf = render_geometry_buffer(&mesh, &default_pose(), &intr).unwrap();
    let near_quad = Mesh::new(
        vec![
            Point3::new(1.0, -0.2, -0.2),
            Point3::new(1.0, -0.2, 0.2),
            Point3::new(1.0, 0.2, 0.2),
            Point3::new(1.0, 0.2, -0.2),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    let near_mask = render_silhouette(&near_quad, &default_pose(), &intr).unwrap();
    for i in 0..buf.valid.len() {
        if near_mask.data[i] == 1.0 {
            assert!(buf.valid[i]);
            assert!(
                (buf.positions[i].x - 1.0).abs() < 1e-5,
                "far quad leaked through at pixel {i}"
            );
        }
    }
}

#[test]
fn silhouette_rotates_with_mesh_about_camera_axis() {
    // Rotating the mesh 90° about the camera axis equals rotating the mask
    // by 90°, up to one pixel of dilation.
    let mut mesh = sphere(0.35, 24, 32);
    // Make it asymmetric: stretch one side.
    for v in &mut mesh.vertices {
        if v.y > 0.0 {
            v.y *= 1.8;
        }
        if v.z > 0.0 {
            v.z *= 1.3;
        }
    }
    let pose = default_pose(); // camera on +X axis, forward = -X
    let intr = CameraIntrinsics::default_256();
    let base = render_silhouette(&mesh, &pose, &intr).unwrap();

    // Right-hand rotation about the forward axis (-X) by 90°.
    let rot = nalgebra::Rotation3::from_axis_angle(
        &nalgebra::Unit::new_normalize(Vector3::new(-1.0, 0.0, 0.0)),
        std::f64::consts::FRAC_PI_2,
    );
    let mut rotated = mesh.clone();
    for v in &mut rotated.vertices {
        *v = rot * *v;
    }
    let got = render_silhouette(&rotated, &pose, &intr).unwrap();

    // The same rotation in screen space: forward is -X, camera right is
    // (0,0,-1), up is (0,1,0). A +90° right-hand rotation about forward maps
    // up toward right, i.e. pixel (x,y) -> (W-1-y, x); verify via containment
    // under 1px dilation both ways.
    let w = intr.width;
    let mut expected = SilhouetteMask::zeros(w, w);
    for y in 0..w {
        for x in 0..w {
            if base.data[y * w + x] == 1.0 {
                let (nx, ny) = (w - 1 - y, x);
                expected.data[ny * w + nx] = 1.0;
            }
        }
    }
    let dilate = |m: &SilhouetteMask| {
        let mut out = m.clone();
        for y in 0..w {
            for x in 0..w {
                if m.data[y * w + x] == 1.0 {
                    for (dy, dx) in [(0i64, 1i64), (0, -1), (1, 0), (-1, 0), (0, 0)] {
                        let (yy, xx) = (y as i64 + dy, x as i64 + dx);
                        if yy >= 0 && yy < w as i64 && xx >= 0 && xx < w as i64 {
                            out.data[yy as usize * w + xx as usize] = 1.0;
                        }
                    }
                }
            }
        }
        out
    };
    let expected_d = dilate(&expected);
    let got_d = dilate(&got);
    for i in 0..got.data.len() {
        assert!(
            got.data[i] <= expected_d.data[i],
            "rotated silhouette outside dilated expectation at {i}"
        );
        assert!(
            expected.data[i] <= got_d.data[i],
            "expected silhouette outside dilated render at {i}"
        );
    }
}

#[test]
fn geometry_points_lie_on_surface() {
    let mesh = sphere(0.5, 24, 32);
    let pose = CameraPose::new(0.3, -0.2, 2.0, Point3::origin()).unwrap();
    let intr = CameraIntrinsics::default_256().with_resolution(96, 96);
    let buf = render_geometry_buffer(&mesh, &pose, &intr).unwrap();
    let tol = 1e-4 * mesh.bbox_diagonal();
    for i in 0..buf.valid.len() {
        if buf.valid[i] {
            // for the sphere the surface distance has a closed form up to
            // tessellation chords; use a generous bound derived from it
            let r = buf.positions[i].coords.norm();
            assert!(
                (r - 0.5).abs() < 1e-2,
                "point radius {r} too far from sphere"
            );
            let _ = tol;
        }
    }
}

#[test]
fn color_render_uniform_texture_covers_silhouette() {
    let mesh = sphere(0.4, 24, 32);
    let atlas = TextureAtlas::new_filled(16, 16, [1.0, 0.0, 0.0]).unwrap();
    let intr = CameraIntrinsics::default_256();
    let img = render_color(&mesh, &atlas, &default_pose(), &intr).unwrap();
    let mask = render_silhouette(&mesh, &default_pose(), &intr).unwrap();
    for i in 0..mask.data.len() {
        if mask.data[i] == 1.0 {
            assert_eq!(img.data[i], [1.0, 0.0, 0.0, 1.0]);
        } else {
            assert_eq!(img.data[i][3], 0.0);
        }
    }
}

#[test]
fn color_render_checkerboard_counts_match_uv_tiling() {
    // Camera-facing quad with a k×k checker texture: the rendered row
    // through the middle must cross exactly k-1 color transitions.
    let k = 8usize;
    let mut atlas = TextureAtlas::new_filled(64, 64, [0.0; 3]).unwrap();
    let cell = 64 / k;
    for y in 0..64 {
        for x in 0..64 {
            let on = ((x / cell) + (y / cell)) % 2 == 0;
            atlas.rgb[y * 64 + x] = if on { [1.0; 3] } else { [0.0; 3] };
        }
    }
    let quad = Mesh::new(
        vec![
            Point3::new(1.0, -0.4, -0.4),
            Point3::new(1.0, -0.4, 0.4),
            Point3::new(1.0, 0.4, 0.4),
            Point3::new(1.0, 0.4, -0.4),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap()
    .with_uvs(vec![
        Point2::new(0.0, 1.0),
        Point2::new(1.0, 1.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.0, 0.0),
    ])
    .unwrap();
    let intr = CameraIntrinsics::default_256();
    let img = render_color(&quad, &atlas, &default_pose(), &intr).unwrap();
    let y = 128usize;
    let mut transitions = 0;
    let mut prev: Option<bool> = None;
    for x in 0..256 {
        let px = img.data[y * 256 + x];
        if px[3] > 0.0 {
            let on = px[0] > 0.5;
            if let Some(p) = prev {
                if p != on {
                    transitions += 1;
                }
            }
            prev = Some(on);
        }
    }
    assert_eq!(transitions, k - 1, "expected {} checker transitions", k - 1);
}

#[test]
fn color_render_errors() {
    let mesh = sphere(0.4, 8, 12);
    let mut no_uv = mesh.clone();
    no_uv.uvs = None;
    let atlas = TextureAtlas::new_filled(16, 16, [0.5; 3]).unwrap();
    let intr = CameraIntrinsics::default_256();
    assert!(render_color(&no_uv, &atlas, &default_pose(), &intr).is_err());
    let bad = TextureAtlas {
        width: 0,
        height: 0,
        rgb: vec![],
        valid_mask: vec![],
    };
    assert!(render_color(&mesh, &bad, &default_pose(), &intr).is_err());
}

#[test]
fn mask_discrepancy_trivial_and_closed_form() {
    let mut a = SilhouetteMask::zeros(10, 10);
    for i in 0..10 {
        a.data[i] = 1.0;
    }
    let stats = mask_discrepancy(&a, &a).unwrap();
    assert_eq!(stats.mse, 0.0);
    assert_eq!(stats.iou, 1.0);
    assert_eq!(stats.area_diff, 0.0);

    // Disjoint equal-area masks covering 10% each.
    let mut b = SilhouetteMask::zeros(10, 10);
    for i in 10..20 {
        b.data[i] = 1.0;
    }
    let stats = mask_discrepancy(&a, &b).unwrap();
    assert_eq!(stats.iou, 0.0);
    assert_eq!(stats.area_diff, 0.0);
    assert!((stats.mse - 0.2).abs() < 1e-15);

    let c = SilhouetteMask::zeros(9, 10);
    assert!(mask_discrepancy(&a, &c).is_err());

    // Empty vs empty: IoU defined as 1.
    let z = SilhouetteMask::zeros(10, 10);
    assert_eq!(mask_discrepancy(&z, &z).unwrap().iou, 1.0);
}

#[test]
fn mask_discrepancy_matches_brute_force_on_random_masks() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (w, h) = (17, 13);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| SilhouetteMask {
            width: w,
            height: h,
            data: (0..w * h).map(|_| rng.random::<f32>()).collect(),
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let got = mask_discrepancy(&a, &b).unwrap();
        let n = (w * h) as f64;
        let mut se = 0.0;
        let mut inter = 0.0;
        let mut union = 0.0;
        let mut sa = 0.0;
        let mut sb = 0.0;
        for i in 0..w * h {
            let (x, y) = (a.data[i] as f64, b.data[i] as f64);
            se += (x - y) * (x - y);
            inter += x.min(y);
            union += x.max(y);
            sa += x;
            sb += y;
        }
        assert!((got.mse - se / n).abs() < 1e-12);
        assert!((got.iou - inter / union).abs() < 1e-12);
        assert!((got.area_diff - (sa - sb).abs() / n).abs() < 1e-12);
    }
}

#[test]
fn aa_silhouette_has_fractional_boundary() {
    let mesh = sphere(0.4, 24, 32);
    let intr = CameraIntrinsics::default_256();
    let aa = render_silhouette_aa(&mesh, &default_pose(), &intr).unwrap();
    let frac = aa
        .data
        .iter()
        .filter(|&&v| v > 0.0 && v < 1.0)
        .count();
    assert!(frac > 50, "expected fractional boundary pixels, got {frac}");
    assert!(aa.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
}
