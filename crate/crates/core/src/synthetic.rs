//! Desk-scale phantoms with nested ellipsoid "tumors", plus deliberately
//! naive oracles used to cross-check the metric implementations.

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::volume::{LabelMap, Volume};

/// Ellipsoid geometry of a generated phantom.
#[derive(Debug, Clone)]
pub struct PhantomGeometry {
    pub center: [f64; 3],
    /// Per-axis radii of the WT, TC and ET ellipsoids (outer to inner).
    pub radii: [[f64; 3]; 3],
}

/// A synthetic case with known ground truth.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: Volume,
    pub labels: LabelMap,
    pub seed: u64,
    pub geometry: PhantomGeometry,
}

const NOISE_SIGMA: f64 = 0.1;
// Radii as fractions of each half-dimension; strictly nested.
const RADIUS_FRACTIONS: [f64; 3] = [0.78, 0.5, 0.26];

/// Generate a phantom: Gaussian background noise plus three strictly nested
/// ellipsoids mapped to labels 2 (outer), 1 (middle) and 4 (inner), with
/// region intensities separated well beyond the noise level.
///
/// Pure in `(seed, dims)`.
pub fn make_phantom(seed: u64, dims: [usize; 3]) -> Result<Phantom> {
    make_phantom_with_noise(seed, seed, dims)
}

/// Like [`make_phantom`] but with the noise decoupled from the geometry:
/// the same `seed` with different `noise_seed`s yields identically labelled
/// cases that differ only in their intensity noise, mimicking multiple
/// acquisitions of one subject.
pub fn make_phantom_with_noise(seed: u64, noise_seed: u64, dims: [usize; 3]) -> Result<Phantom> {
    if dims.iter().any(|&d| d < 8) {
        return Err(Error::Config(format!(
            "phantom dims {dims:?} too small; each axis must be >= 8"
        )));
    }
    let center = [
        (dims[0] as f64 - 1.0) / 2.0,
        (dims[1] as f64 - 1.0) / 2.0,
        (dims[2] as f64 - 1.0) / 2.0,
    ];
    let radii: Vec<[f64; 3]> = RADIUS_FRACTIONS
        .iter()
        .map(|f| {
            [
                f * dims[0] as f64 / 2.0,
                f * dims[1] as f64 / 2.0,
                f * dims[2] as f64 / 2.0,
            ]
        })
        .collect();

    let inside = |r: &[f64; 3], x: usize, y: usize, z: usize| {
        let dx = (x as f64 - center[0]) / r[0];
        let dy = (y as f64 - center[1]) / r[1];
        let dz = (z as f64 - center[2]) / r[2];
        dx * dx + dy * dy + dz * dz <= 1.0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");

    let mut intensities = Array3::<f32>::zeros((dims[0], dims[1], dims[2]));
    let mut labels = Array3::<u8>::zeros((dims[0], dims[1], dims[2]));
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                // innermost wins
                let (label, shift) = if inside(&radii[2], x, y, z) {
                    (4u8, 3.0)
                } else if inside(&radii[1], x, y, z) {
                    (1, 2.0)
                } else if inside(&radii[0], x, y, z) {
                    (2, 1.0)
                } else {
                    (0, 0.0)
                };
                labels[[x, y, z]] = label;
                intensities[[x, y, z]] = (shift + noise.sample(&mut rng)) as f32;
            }
        }
    }

    Ok(Phantom {
        volume: Volume::new(intensities, None),
        labels: LabelMap::new(labels)?,
        seed,
        geometry: PhantomGeometry {
            center,
            radii: [radii[0], radii[1], radii[2]],
        },
    })
}

/// Hard Dice by explicit triple-loop voxel counting.
///
/// Independent oracle: shares no code with the metrics module. Both-empty
/// pairs score 1.0, one-empty pairs 0.0.
pub fn oracle_dice(a: &Array3<u8>, b: &Array3<u8>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            context: "oracle_dice",
            expected: a.shape().to_vec(),
            actual: b.shape().to_vec(),
        });
    }
    let (nx, ny, nz) = a.dim();
    let mut count_a = 0u64;
    let mut count_b = 0u64;
    let mut overlap = 0u64;
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let va = a[[x, y, z]] != 0;
                let vb = b[[x, y, z]] != 0;
                if va {
                    count_a += 1;
                }
                if vb {
                    count_b += 1;
                }
                if va && vb {
                    overlap += 1;
                }
            }
        }
    }
    if count_a == 0 && count_b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap as f64 / (count_a + count_b) as f64)
}
