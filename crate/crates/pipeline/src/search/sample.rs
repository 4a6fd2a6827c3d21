use mesh4d_core::CameraPose;
use nalgebra::Point3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SearchConfig;

pub const PITCH_LIMIT: f64 = std::f64::consts::FRAC_PI_2 - 1e-6;

/// Draw `cfg.initial_samples` camera poses: yaw uniform, pitch equal-area
/// (arcsin of a uniform variable), radius by the square-root rule so density
/// follows the sphere surface area, lookat uniform per axis.
pub fn sample_pose_candidates(cfg: &SearchConfig, seed: u64) -> Vec<CameraPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [r_min, r_max] = cfg.radius_range;
    let [l_min, l_max] = cfg.lookat_range;
    (0..cfg.initial_samples)
        .map(|_| {
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            let u: f64 = rng.random_range(-1.0..1.0);
            let pitch = u.asin().clamp(-PITCH_LIMIT, PITCH_LIMIT);
            let r2 = rng.random_range(r_min * r_min..r_max * r_max);
            let radius = r2.sqrt();
            let lookat = Point3::new(
                rng.random_range(l_min..=l_max),
                rng.random_range(l_min..=l_max),
                rng.random_range(l_min..=l_max),
            );
            CameraPose {
                yaw,
                pitch,
                radius,
                lookat,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_respects_ranges() {
        let cfg = SearchConfig {
            initial_samples: 1,
            swarm_size: 2,
            ..SearchConfig::default()
        };
        // swarm_size <= initial_samples not required for plain sampling
        let poses = sample_pose_candidates(&cfg, 3);
        assert_eq!(poses.len(), 1);
        let p = poses[0];
        assert!(p.yaw >= 0.0 && p.yaw < std::f64::consts::TAU);
        assert!(p.pitch.abs() <= PITCH_LIMIT);
        assert!(p.radius >= 1.0 && p.radius <= 5.0);
        for k in 0..3 {
            assert!(p.lookat[k] >= -1.0 && p.lookat[k] <= 1.0);
        }
        p.validate().unwrap();
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SearchConfig::default();
        let a = sample_pose_candidates(&cfg, 9);
        let b = sample_pose_candidates(&cfg, 9);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.yaw, y.yaw);
            assert_eq!(x.pitch, y.pitch);
            assert_eq!(x.radius, y.radius);
            assert_eq!(x.lookat, y.lookat);
        }
    }

    #[test]
    fn pitch_follows_equal_area_cdf() {
        let cfg = SearchConfig {
            initial_samples: 100_000,
            ..SearchConfig::default()
        };
        let poses = sample_pose_candidates(&cfg, 17);
        // F(pitch) = (sin(pitch)+1)/2; check a few quantiles within 1%.
        for q in [-0.8f64, -0.4, 0.0, 0.3, 0.5236, 0.9] {
            let expected = (q.sin() + 1.0) / 2.0;
            let got = poses.iter().filter(|p| p.pitch <= q).count() as f64
                / poses.len() as f64;
            assert!(
                (got - expected).abs() < 0.01,
                "pitch CDF at {q}: got {got}, analytic {expected}"
            );
        }
    }

    #[test]
    fn radius_follows_sqrt_cdf() {
        let cfg = SearchConfig {
            initial_samples: 100_000,
            ..SearchConfig::default()
        };
        let poses = sample_pose_candidates(&cfg, 23);
        // F(r) = (r² − 1) / (25 − 1) on [1, 5]
        for r in [1.5f64, 2.0, 3.0, 4.0, 4.8] {
            let expected = (r * r - 1.0) / 24.0;
            let got = poses.iter().filter(|p| p.radius <= r).count() as f64
                / poses.len() as f64;
            assert!(
                (got - expected).abs() < 0.01,
                "radius CDF at {r}: got {got}, analytic {expected}"
            );
        }
    }
}
