use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hermitian::{CMatrix, C64};
use crate::error::{invalid, Result};

/// Handle for a reproducible random stream.
///
/// The pair `(seed, stream_id)` fully determines the sample sequence; Monte
/// Carlo loops use one stream per sample index so results never depend on
/// which worker drew which sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededRng {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Same seed, different stream.
    pub fn stream(&self, stream_id: u64) -> Self {
        Self { seed: self.seed, stream_id }
    }

    /// Independent child namespace keyed by a label, so that different
    /// consumers of one master seed never share streams.
    pub fn fork(&self, label: &str) -> Self {
        let mut h = splitmix64(self.seed) ^ splitmix64(self.stream_id.wrapping_add(0x5851_F42D_4C95_7F2D));
        for b in label.bytes() {
            h = splitmix64(h ^ u64::from(b));
        }
        Self { seed: h, stream_id: 0 }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut r = ChaCha20Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }
}

/// Matrix of i.i.d. circularly-symmetric complex Gaussian entries with the
/// given per-entry variance. Zero variance yields the zero matrix.
pub fn sample_gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    if !(variance.is_finite() && variance >= 0.0) {
        return invalid(format!("gaussian matrix variance must be nonnegative, got {variance}"));
    }
    let s = (variance / 2.0).sqrt();
    Ok(CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    }))
}

/// Haar-distributed `rows x cols` matrix with orthonormal rows (`Q Q^H = I`).
pub fn haar_semiunitary<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<CMatrix> {
    if rows == 0 || cols < rows {
        return invalid(format!("haar_semiunitary needs 1 <= rows <= cols, got {rows}x{cols}"));
    }
    let g = sample_gaussian_matrix(cols, rows, 1.0, rng)?;
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..rows {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..cols {
            q[(i, j)] *= phase;
        }
    }
    Ok(q.adjoint())
}
