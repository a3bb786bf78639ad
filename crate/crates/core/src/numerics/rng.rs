//! Reproducible random streams keyed by `(master_seed, stream_id)`.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::matrix::CMatrix;
use crate::error::{Error, Result};

/// A single-consumer random stream. Two streams built from the same
/// `(master_seed, stream_id)` produce identical sequences.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    /// Stream for a given work item and purpose, independent of the order
    /// in which work items are processed.
    pub fn for_purpose(master_seed: u64, key: u64, purpose: &str) -> Self {
        Self::new(master_seed, stream_id(key, purpose))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derives an independent child stream, e.g. one per sub-task.
    pub fn fork(&self, key: u64, purpose: &str) -> Self {
        Self::new(
            self.master_seed,
            splitmix64(self.stream_id ^ stream_id(key, purpose)),
        )
    }

    /// Uniform phase factor `exp(iθ)`, θ ~ U[0, 2π).
    pub fn unit_phase(&mut self) -> Complex64 {
        let theta: f64 = self.inner.random::<f64>() * std::f64::consts::TAU;
        Complex64::from_polar(1.0, theta)
    }

    /// One CN(0, variance) sample.
    pub fn cgauss(&mut self, variance: f64) -> Complex64 {
        let s = (variance / 2.0).sqrt();
        let re: f64 = self.inner.sample(StandardNormal);
        let im: f64 = self.inner.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Stream id for a `(key, purpose)` pair.
pub fn stream_id(key: u64, purpose: &str) -> u64 {
    splitmix64(splitmix64(key) ^ fnv1a(purpose))
}

/// Matrix of i.i.d. CN(0, variance) entries.
pub fn sample_cgauss(
    rng: &mut RngStream,
    rows: usize,
    cols: usize,
    variance: f64,
) -> Result<CMatrix> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "variance must be finite and non-negative, got {variance}"
        )));
    }
    let mut m = CMatrix::zeros(rows, cols);
    if variance == 0.0 {
        return Ok(m);
    }
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = rng.cgauss(variance);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_is_zero() {
        let mut rng = RngStream::new(1, 2);
        let m = sample_cgauss(&mut rng, 3, 4, 0.0).unwrap();
        assert!(m.as_slice().iter().all(|z| z.norm() == 0.0));
        assert!(matches!(
            sample_cgauss(&mut rng, 1, 1, -1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn same_stream_same_samples() {
        let a = sample_cgauss(&mut RngStream::new(7, 99), 5, 5, 1.0).unwrap();
        let b = sample_cgauss(&mut RngStream::new(7, 99), 5, 5, 1.0).unwrap();
        assert_eq!(a, b);
        let c = sample_cgauss(&mut RngStream::new(7, 100), 5, 5, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn moments_of_a_million_draws() {
        let n = 1_000_000;
        let m = sample_cgauss(&mut RngStream::new(3, 4), 1000, 1000, 1.0).unwrap();
        let power: f64 = m.as_slice().iter().map(Complex64::norm_sqr).sum::<f64>() / n as f64;
        assert!((0.99..=1.01).contains(&power), "power {power}");
        // each quadrature carries half the power; var of re² estimator is 2·(1/2)²
        let re: f64 = m.as_slice().iter().map(|z| z.re * z.re).sum::<f64>() / n as f64;
        let im: f64 = m.as_slice().iter().map(|z| z.im * z.im).sum::<f64>() / n as f64;
        let sd = (2.0 * 0.25 / n as f64).sqrt();
        assert!((re - 0.5).abs() < 3.0 * sd, "re {re}");
        assert!((im - 0.5).abs() < 3.0 * sd, "im {im}");
    }

    #[test]
    fn purpose_tags_separate_streams() {
        assert_ne!(stream_id(0, "channel"), stream_id(0, "noise"));
        assert_ne!(stream_id(0, "channel"), stream_id(1, "channel"));
        assert_eq!(stream_id(5, "x"), stream_id(5, "x"));
    }
}
