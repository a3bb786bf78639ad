//! Cascaded-channel estimators (ON/OFF, DFT-based LS, three-phase error
//! model), the superimposed-channel LS estimator and their error laws.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::{superimpose_stack, ChannelRealization, RcVector};
use crate::error::{Error, Result};
use crate::numerics::{dft_matrix, solve_hermitian_pd, CMatrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimationMethod {
    OnOff,
    ThreePhase,
    Dft,
    /// Superimposed-channel estimation used by the training protocol.
    Superimposed,
}

impl EstimationMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::OnOff => "onoff",
            Self::ThreePhase => "three-phase",
            Self::Dft => "dft",
            Self::Superimposed => "training",
        }
    }
}

impl fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onoff" => Ok(Self::OnOff),
            "three-phase" => Ok(Self::ThreePhase),
            "dft" => Ok(Self::Dft),
            "training" | "superimposed" => Ok(Self::Superimposed),
            _ => Err(Error::Unknown {
                kind: "estimation method",
                name: s.to_string(),
            }),
        }
    }
}

/// Pilot sequences of the `K` users.
#[derive(Clone, Debug)]
pub struct PilotConfig {
    pub users: usize,
    /// Average pilot power α, mW.
    pub power_mw: f64,
    /// `K x P` pilot matrix with unit-modulus entries.
    pub x: CMatrix,
    pub groups: usize,
    pub slots_per_group: usize,
}

impl PilotConfig {
    /// Checks `X Xᴴ = K I`.
    pub fn check_orthogonal(&self) -> Result<()> {
        let k = self.users;
        if self.x.rows() != k {
            return Err(Error::InvalidPilot(format!(
                "pilot matrix has {} rows for {k} users",
                self.x.rows()
            )));
        }
        let gram = &self.x * &self.x.adjoint();
        let err = gram.max_abs_diff(&CMatrix::identity(k).scale_real(self.x.cols() as f64));
        if self.x.cols() != k || err > 1e-9 * k as f64 {
            return Err(Error::InvalidPilot(format!(
                "pilot rows are not orthogonal with X Xᴴ = K I (deviation {err:.3e})"
            )));
        }
        Ok(())
    }
}

/// K-point DFT pilots: unit modulus, `X Xᴴ = K I`, one slot per group.
pub fn orthogonal_pilots(users: usize, power_mw: f64) -> Result<PilotConfig> {
    if users == 0 {
        return Err(Error::InvalidDimension("at least one user required".into()));
    }
    Ok(PilotConfig {
        users,
        power_mw,
        x: dft_matrix(users)?,
        groups: users,
        slots_per_group: 1,
    })
}

/// `G = √α (X ⊗ Fᴴ)` with `F` the `(N+1)`-point DFT matrix.
pub fn dft_training_matrix(n_elements: usize, pilots: &PilotConfig) -> Result<CMatrix> {
    let (k, p) = pilots.x.shape();
    if k != pilots.users || p != k {
        return Err(Error::InvalidPilot(format!(
            "DFT training needs a square K x K pilot matrix, got {k}x{p}"
        )));
    }
    let gram = &pilots.x * &pilots.x.adjoint();
    if crate::numerics::cholesky(&gram).is_err() {
        return Err(Error::SingularTraining(
            "pilot matrix is rank deficient".into(),
        ));
    }
    let f = dft_matrix(n_elements + 1)?;
    Ok(pilots
        .x
        .kron(&f.adjoint())
        .scale_real(pilots.power_mw.sqrt()))
}

/// Uplink stacks `[H_1 ... H_K]`, `M x K(N+1)`.
pub fn stacked_channels(ch: &ChannelRealization) -> Result<CMatrix> {
    let blocks: Vec<&CMatrix> = ch.cascaded_all().iter().collect();
    CMatrix::hconcat(&blocks)
}

/// `Y = H G + Z` with per-entry noise power `σ_z²`.
pub fn simulate_uplink_cascaded(
    ch: &ChannelRealization,
    g: &CMatrix,
    noise_mw: f64,
    rng: &mut RngStream,
) -> Result<CMatrix> {
    let h = stacked_channels(ch)?;
    let mut y = h.try_mul(g)?;
    if noise_mw > 0.0 {
        let z = crate::numerics::sample_cgauss(rng, y.rows(), y.cols(), noise_mw)?;
        y = &y + &z;
    } else if noise_mw < 0.0 {
        return Err(Error::InvalidArgument(
            "noise power must be non-negative".into(),
        ));
    }
    Ok(y)
}

/// Estimated uplink stacks, one `M x (N+1)` matrix per user.
#[derive(Clone, Debug)]
pub struct CascadedEstimate {
    pub stacks: Vec<CMatrix>,
    pub method: EstimationMethod,
    pub pilot_slots: usize,
}

impl CascadedEstimate {
    pub fn num_users(&self) -> usize {
        self.stacks.len()
    }

    pub fn num_elements(&self) -> usize {
        self.stacks[0].cols() - 1
    }

    pub fn direct(&self, k: usize) -> Vec<Complex64> {
        self.stacks[k].column(0)
    }

    pub fn reflected(&self, k: usize, n: usize) -> Vec<Complex64> {
        self.stacks[k].column(n + 1)
    }

    /// Estimated superimposed channel of user `k` under `phi`.
    pub fn effective(&self, phi: &RcVector, k: usize) -> Result<Vec<Complex64>> {
        superimpose_stack(&self.stacks[k], phi)
    }
}

/// Precomputed LS projector `Gᴴ (G Gᴴ)⁻¹` for a fixed training matrix.
#[derive(Clone, Debug)]
pub struct LsEstimator {
    g: CMatrix,
    projector: CMatrix,
    users: usize,
}

impl LsEstimator {
    pub fn new(g: CMatrix, users: usize) -> Result<Self> {
        if users == 0 || !g.rows().is_multiple_of(users) {
            return Err(Error::InvalidDimension(format!(
                "{} training rows cannot be split across {users} users",
                g.rows()
            )));
        }
        let gram = &g * &g.adjoint();
        // (G Gᴴ)⁻¹ G, then adjoint gives Gᴴ (G Gᴴ)⁻¹ since the Gram is Hermitian
        let left = solve_hermitian_pd(&gram, &g).map_err(|e| match e {
            Error::NumericFailure(msg) => Error::SingularTraining(msg),
            other => other,
        })?;
        Ok(Self {
            projector: left.adjoint(),
            g,
            users,
        })
    }

    pub fn training_matrix(&self) -> &CMatrix {
        &self.g
    }

    /// Pilot slots consumed, i.e. the number of columns of `G`.
    pub fn pilot_slots(&self) -> usize {
        self.g.cols()
    }

    pub fn estimate(&self, y: &CMatrix, method: EstimationMethod) -> Result<CascadedEstimate> {
        let h = y.try_mul(&self.projector)?;
        let per_user = h.cols() / self.users;
        Ok(CascadedEstimate {
            stacks: (0..self.users)
                .map(|k| h.columns(k * per_user, per_user))
                .collect(),
            method,
            pilot_slots: self.pilot_slots(),
        })
    }
}

/// `Ĥ = Y Gᴴ (G Gᴴ)⁻¹`, split into per-user stacks.
pub fn ls_cascaded(y: &CMatrix, g: &CMatrix, users: usize) -> Result<CascadedEstimate> {
    LsEstimator::new(g.clone(), users)?.estimate(y, EstimationMethod::Dft)
}

/// Single-user ON/OFF estimation: slot 0 with every element off, then one
/// slot per element with only that element on (φ = 1).
pub fn onoff_estimate_single_user(
    ch: &ChannelRealization,
    noise_mw: f64,
    pilot_power_mw: f64,
    rng: &mut RngStream,
) -> Result<CascadedEstimate> {
    if ch.num_users() != 1 {
        return Err(Error::Unsupported(
            "explicit ON/OFF estimation is single-user; use inject_errors for K > 1".into(),
        ));
    }
    if !(pilot_power_mw > 0.0) || !(noise_mw >= 0.0) {
        return Err(Error::InvalidArgument(
            "pilot power must be positive".into(),
        ));
    }
    let h = ch.cascaded(0);
    let (m, cols) = h.shape();
    let amp = pilot_power_mw.sqrt();
    let mut est = CMatrix::zeros(m, cols);
    let observe = |rng: &mut RngStream, clean: Complex64| {
        let y = clean * amp + rng.cgauss(noise_mw);
        y / amp
    };
    for a in 0..m {
        est[(a, 0)] = observe(rng, h[(a, 0)]);
    }
    for n in 1..cols {
        for a in 0..m {
            let y = observe(rng, h[(a, 0)] + h[(a, n)]);
            est[(a, n)] = y - est[(a, 0)];
        }
    }
    Ok(CascadedEstimate {
        stacks: vec![est],
        method: EstimationMethod::OnOff,
        pilot_slots: cols,
    })
}

/// Error powers of an estimator; `base` is σ² = σ_z²/α.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorStats {
    pub sigma_d2: f64,
    pub sigma_r2: f64,
    pub sigma_q2: f64,
    pub base: f64,
    /// Pilot symbols: `N+1` for cascaded estimation, `K` per training period.
    pub pilots: usize,
}

impl ErrorStats {
    pub fn zero() -> Self {
        Self {
            sigma_d2: 0.0,
            sigma_r2: 0.0,
            sigma_q2: 0.0,
            base: 0.0,
            pilots: 0,
        }
    }
}

pub fn mse_stats(
    method: EstimationMethod,
    n_elements: usize,
    users: usize,
    sigma2: f64,
) -> Result<ErrorStats> {
    if n_elements == 0 {
        return Err(Error::InvalidArgument(
            "at least one RIS element required".into(),
        ));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "σ² must be non-negative, got {sigma2}"
        )));
    }
    let n = n_elements as f64;
    let cascaded = |d: f64, r: f64| ErrorStats {
        sigma_d2: d,
        sigma_r2: r,
        sigma_q2: 0.0,
        base: sigma2,
        pilots: n_elements + 1,
    };
    Ok(match method {
        EstimationMethod::OnOff => cascaded(sigma2, 2.0 * sigma2),
        EstimationMethod::ThreePhase => cascaded(sigma2, 2.0 * sigma2 / n),
        EstimationMethod::Dft => cascaded(sigma2 / (n + 1.0), sigma2 / (n + 1.0)),
        EstimationMethod::Superimposed => {
            if users == 0 {
                return Err(Error::InvalidArgument("at least one user required".into()));
            }
            ErrorStats {
                sigma_d2: 0.0,
                sigma_r2: 0.0,
                sigma_q2: sigma2 / users as f64,
                base: sigma2,
                pilots: users,
            }
        }
    })
}

/// True cascaded channels plus independent CN(0, σ_d²) / CN(0, σ_r²) errors.
pub fn inject_cascaded_errors(
    ch: &ChannelRealization,
    stats: &ErrorStats,
    method: EstimationMethod,
    rng: &mut RngStream,
) -> CascadedEstimate {
    let stacks = ch
        .cascaded_all()
        .iter()
        .map(|h| {
            let mut e = h.clone();
            for a in 0..h.rows() {
                if stats.sigma_d2 > 0.0 {
                    e[(a, 0)] += rng.cgauss(stats.sigma_d2);
                }
                if stats.sigma_r2 > 0.0 {
                    for n in 1..h.cols() {
                        e[(a, n)] += rng.cgauss(stats.sigma_r2);
                    }
                }
            }
            e
        })
        .collect();
    CascadedEstimate {
        stacks,
        method,
        pilot_slots: stats.pilots,
    }
}

/// LS estimate of the superimposed channels of one training period.
#[derive(Clone, Debug)]
pub struct SuperimposedEstimate {
    /// `M x K`, column `k` estimates `h_q,k`.
    pub h: CMatrix,
    pub pilot_slots: usize,
}

impl SuperimposedEstimate {
    pub fn channels(&self) -> Vec<Vec<Complex64>> {
        (0..self.h.cols()).map(|k| self.h.column(k)).collect()
    }
}

/// True superimposed channels plus independent CN(0, σ_Q²) errors.
pub fn inject_superimposed_errors(
    h_true: &CMatrix,
    sigma_q2: f64,
    rng: &mut RngStream,
) -> SuperimposedEstimate {
    let mut h = h_true.clone();
    if sigma_q2 > 0.0 {
        for r in 0..h.rows() {
            for c in 0..h.cols() {
                h[(r, c)] += rng.cgauss(sigma_q2);
            }
        }
    }
    SuperimposedEstimate {
        pilot_slots: h.cols(),
        h,
    }
}

/// Simulates one training period, `Y = √α H_q X + Z`, and returns
/// `Ĥ_q = Y Xᴴ / (K √α)`.
pub fn estimate_superimposed(
    ch: &ChannelRealization,
    phi: &RcVector,
    pilots: &PilotConfig,
    noise_mw: f64,
    rng: &mut RngStream,
) -> Result<SuperimposedEstimate> {
    pilots.check_orthogonal()?;
    if pilots.users != ch.num_users() {
        return Err(Error::InvalidDimension(format!(
            "{} pilot sequences for {} users",
            pilots.users,
            ch.num_users()
        )));
    }
    let hq = ch.superimposed_matrix(phi)?;
    let amp = pilots.power_mw.sqrt();
    let mut y = hq.try_mul(&pilots.x)?.scale_real(amp);
    if noise_mw > 0.0 {
        let z = crate::numerics::sample_cgauss(rng, y.rows(), y.cols(), noise_mw)?;
        y = &y + &z;
    }
    let k = pilots.users as f64;
    Ok(SuperimposedEstimate {
        h: y.try_mul(&pilots.x.adjoint())?.scale_real(1.0 / (k * amp)),
        pilot_slots: pilots.x.cols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample_cgauss;

    fn random_channel(rng: &mut RngStream, m: usize, n: usize, k: usize) -> ChannelRealization {
        let stacks = (0..k)
            .map(|_| sample_cgauss(rng, m, n + 1, 1.0).unwrap())
            .collect();
        ChannelRealization::from_cascaded(stacks).unwrap()
    }

    #[test]
    fn pilots_are_orthogonal_unit_modulus() {
        assert_eq!(
            orthogonal_pilots(1, 1.0).unwrap().x.as_slice(),
            &[Complex64::new(1.0, 0.0)]
        );
        let p = orthogonal_pilots(4, 1.0).unwrap();
        p.check_orthogonal().unwrap();
        let p3 = orthogonal_pilots(3, 1.0).unwrap();
        assert!(p3
            .x
            .as_slice()
            .iter()
            .all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn training_matrix_gram() {
        let alpha = 0.7;
        let g = dft_training_matrix(1, &orthogonal_pilots(1, alpha).unwrap()).unwrap();
        let gram = &g * &g.adjoint();
        assert!(gram.max_abs_diff(&CMatrix::identity(2).scale_real(2.0 * alpha)) < 1e-12);
        let g = dft_training_matrix(3, &orthogonal_pilots(2, alpha).unwrap()).unwrap();
        assert_eq!(g.shape(), (8, 8));
        let gram = &g * &g.adjoint();
        assert!(gram.max_abs_diff(&CMatrix::identity(8).scale_real(alpha * 8.0)) < 1e-10);
    }

    #[test]
    fn singular_pilots_rejected() {
        let mut p = orthogonal_pilots(2, 1.0).unwrap();
        p.x = CMatrix::from_fn(2, 2, |_, _| Complex64::new(1.0, 0.0));
        assert!(matches!(
            dft_training_matrix(2, &p),
            Err(Error::SingularTraining(_))
        ));
        assert!(matches!(
            estimate_superimposed(
                &random_channel(&mut RngStream::new(0, 0), 1, 1, 2),
                &RcVector::ones(1),
                &p,
                0.0,
                &mut RngStream::new(0, 1)
            ),
            Err(Error::InvalidPilot(_))
        ));
    }

    #[test]
    fn noiseless_estimators_are_exact() {
        let mut rng = RngStream::new(1, 1);
        let ch = random_channel(&mut rng, 3, 4, 2);
        let pilots = orthogonal_pilots(2, 0.5).unwrap();
        let g = dft_training_matrix(4, &pilots).unwrap();
        let y = simulate_uplink_cascaded(&ch, &g, 0.0, &mut rng).unwrap();
        assert_eq!(y, &stacked_channels(&ch).unwrap() * &g);
        let est = ls_cascaded(&y, &g, 2).unwrap();
        for k in 0..2 {
            assert!(est.stacks[k].max_abs_diff(ch.cascaded(k)) < 1e-10);
        }

        let ch1 = random_channel(&mut rng, 2, 3, 1);
        let est = onoff_estimate_single_user(&ch1, 0.0, 2.0, &mut rng).unwrap();
        assert!(est.stacks[0].max_abs_diff(ch1.cascaded(0)) < 1e-12);
        assert_eq!(est.pilot_slots, 4);

        let phi = RcVector::random(4, &mut rng);
        let sup = estimate_superimposed(&ch, &phi, &pilots, 0.0, &mut rng).unwrap();
        assert!(sup.h.max_abs_diff(&ch.superimposed_matrix(&phi).unwrap()) < 1e-12);
        assert_eq!(sup.pilot_slots, 2);

        let stats = ErrorStats::zero();
        let inj = inject_cascaded_errors(&ch, &stats, EstimationMethod::ThreePhase, &mut rng);
        assert_eq!(inj.stacks[1], *ch.cascaded(1));
    }

    #[test]
    fn onoff_needs_single_user_and_uses_n_plus_one_slots() {
        let mut rng = RngStream::new(2, 2);
        let ch = random_channel(&mut rng, 1, 1, 2);
        assert!(matches!(
            onoff_estimate_single_user(&ch, 1.0, 1.0, &mut rng),
            Err(Error::Unsupported(_))
        ));
        let ch = random_channel(&mut rng, 1, 1, 1);
        assert_eq!(
            onoff_estimate_single_user(&ch, 1.0, 1.0, &mut rng)
                .unwrap()
                .pilot_slots,
            2
        );
    }

    #[test]
    fn mse_table() {
        let s = mse_stats(EstimationMethod::Dft, 9, 1, 1.0).unwrap();
        assert_eq!((s.sigma_d2, s.sigma_r2, s.pilots), (0.1, 0.1, 10));
        let s = mse_stats(EstimationMethod::ThreePhase, 4, 1, 1.0).unwrap();
        assert_eq!(s.sigma_r2, 0.5);
        let s = mse_stats(EstimationMethod::Superimposed, 4, 2, 1.0).unwrap();
        assert_eq!(s.sigma_q2, 0.5);
        let s = mse_stats(EstimationMethod::OnOff, 4, 1, 3.0).unwrap();
        assert_eq!((s.sigma_d2, s.sigma_r2), (3.0, 6.0));
        assert!(mse_stats(EstimationMethod::Dft, 0, 1, 1.0).is_err());
        for n in 1..50 {
            let on = mse_stats(EstimationMethod::OnOff, n, 1, 1.0)
                .unwrap()
                .sigma_r2;
            let tp = mse_stats(EstimationMethod::ThreePhase, n, 1, 1.0)
                .unwrap()
                .sigma_r2;
            let df = mse_stats(EstimationMethod::Dft, n, 1, 1.0)
                .unwrap()
                .sigma_r2;
            assert!(df <= tp && tp <= on);
            if n >= 2 {
                assert!(df < tp && tp < on);
            }
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            EstimationMethod::OnOff,
            EstimationMethod::ThreePhase,
            EstimationMethod::Dft,
            EstimationMethod::Superimposed,
        ] {
            assert_eq!(m.name().parse::<EstimationMethod>().unwrap(), m);
        }
        assert!("mmse".parse::<EstimationMethod>().is_err());
    }

    #[test]
    fn injected_errors_have_requested_power_and_are_uncorrelated() {
        let draws = 100_000;
        let mut rng = RngStream::new(3, 3);
        let ch = ChannelRealization::from_cascaded(vec![CMatrix::zeros(1, 3)]).unwrap();
        let stats = ErrorStats {
            sigma_d2: 1.0,
            sigma_r2: 2.0,
            ..ErrorStats::zero()
        };
        let (mut pd, mut pr, mut cross) = (0.0, 0.0, Complex64::new(0.0, 0.0));
        for _ in 0..draws {
            let e = inject_cascaded_errors(&ch, &stats, EstimationMethod::OnOff, &mut rng);
            let s = &e.stacks[0];
            pd += s[(0, 0)].norm_sqr();
            pr += s[(0, 1)].norm_sqr();
            cross += s[(0, 1)] * s[(0, 2)].conj();
        }
        let n = draws as f64;
        assert!((pd / n - 1.0).abs() < 0.02);
        assert!((pr / n / 2.0 - 1.0).abs() < 0.02);
        assert!((cross / n).norm() / 2.0 < 0.01);
    }
}
