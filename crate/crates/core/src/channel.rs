//! Scenario geometry, Rician fading links and the cascaded/superimposed
//! channel forms.
//!
//! Channels are stored in uplink orientation: the cascaded stack of user `k`
//! is the `M x (N+1)` matrix `H_k = [h_d, h_r,1, ..., h_r,N]` and the
//! superimposed channel under `φ` is `H_k [1, φᴴ]ᵀ`. The downlink gain seen
//! by the user is the conjugate transpose of that vector.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, RngStream};

pub type Point = [f64; 3];

/// Reference path loss at 1 m (−20 dB).
pub const DEFAULT_C0: f64 = 0.01;

const RC_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub bs_antennas: usize,
    pub bs_center: Point,
    pub ris_center: Point,
    pub ris_nx: usize,
    pub ris_nz: usize,
    /// Element spacing in wavelengths, shared by the BS ULA and the RIS URA.
    pub element_spacing: f64,
    pub user_positions: Vec<Point>,
}

impl ArrayGeometry {
    pub fn num_elements(&self) -> usize {
        self.ris_nx * self.ris_nz
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs_antennas == 0 {
            return Err(Error::InvalidGeometry(
                "BS needs at least one antenna".into(),
            ));
        }
        if !(self.element_spacing > 0.0) {
            return Err(Error::InvalidGeometry(
                "element spacing must be positive".into(),
            ));
        }
        if !(distance(self.bs_center, self.ris_center) > 0.0) {
            return Err(Error::InvalidGeometry("BS and RIS centers coincide".into()));
        }
        if self.user_positions.is_empty() {
            return Err(Error::InvalidGeometry("scenario has no users".into()));
        }
        Ok(())
    }

    /// BS antenna offsets (in wavelengths) along the x axis.
    fn bs_offsets(&self) -> Vec<Point> {
        let m = self.bs_antennas;
        (0..m)
            .map(|i| {
                [
                    (i as f64 - (m as f64 - 1.0) / 2.0) * self.element_spacing,
                    0.0,
                    0.0,
                ]
            })
            .collect()
    }

    /// RIS element offsets in the x-z plane, row-major over (x, z).
    fn ris_offsets(&self) -> Vec<Point> {
        let (nx, nz) = (self.ris_nx, self.ris_nz);
        let mut out = Vec::with_capacity(nx * nz);
        for ix in 0..nx {
            for iz in 0..nz {
                out.push([
                    (ix as f64 - (nx as f64 - 1.0) / 2.0) * self.element_spacing,
                    0.0,
                    (iz as f64 - (nz as f64 - 1.0) / 2.0) * self.element_spacing,
                ]);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub c0: f64,
    pub exponent: f64,
    /// Rician factor (linear); `f64::INFINITY` means pure LoS.
    pub rician_beta: f64,
}

impl LinkParams {
    pub fn new(exponent: f64, rician_beta: f64) -> Self {
        Self {
            c0: DEFAULT_C0,
            exponent,
            rician_beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0) || !self.c0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "c0 must be positive, got {}",
                self.c0
            )));
        }
        if !(self.exponent >= 0.0) || !self.exponent.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "path-loss exponent must be non-negative, got {}",
                self.exponent
            )));
        }
        if !(self.rician_beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Rician factor must be non-negative, got {}",
                self.rician_beta
            )));
        }
        Ok(())
    }
}

/// Which pair of nodes a link connects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    BsRis,
    RisUser(usize),
    BsUser(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub geometry: ArrayGeometry,
    pub bs_ris: LinkParams,
    pub ris_user: Vec<LinkParams>,
    pub bs_user: Vec<LinkParams>,
    /// Noise power at the BS, mW.
    pub noise_bs_mw: f64,
    /// Noise power at each user, mW.
    pub noise_user_mw: f64,
    /// Average pilot power, mW.
    pub pilot_power_mw: f64,
    /// Linear SINR targets, one per user.
    pub sinr_targets: Vec<f64>,
    /// Coherence interval in symbols.
    pub tau_co: usize,
}

impl ScenarioConfig {
    pub fn num_users(&self) -> usize {
        self.geometry.num_users()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let k = self.num_users();
        if self.ris_user.len() != k || self.bs_user.len() != k || self.sinr_targets.len() != k {
            return Err(Error::InvalidDimension(format!(
                "{k} users but {} RIS-user links, {} BS-user links and {} SINR targets",
                self.ris_user.len(),
                self.bs_user.len(),
                self.sinr_targets.len()
            )));
        }
        self.bs_ris.validate()?;
        for p in self.ris_user.iter().chain(&self.bs_user) {
            p.validate()?;
        }
        for (name, v) in [
            ("BS noise power", self.noise_bs_mw),
            ("user noise power", self.noise_user_mw),
            ("pilot power", self.pilot_power_mw),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self
            .sinr_targets
            .iter()
            .any(|&g| !(g > 0.0) || !g.is_finite())
        {
            return Err(Error::InvalidArgument(
                "SINR targets must be positive".into(),
            ));
        }
        if self.tau_co == 0 {
            return Err(Error::InvalidArgument(
                "coherence interval must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Effective estimation noise σ² = σ_z²/α.
    pub fn base_error_power(&self) -> f64 {
        self.noise_bs_mw / self.pilot_power_mw
    }
}

/// Unit-modulus RIS reflection coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct RcVector {
    phi: Vec<Complex64>,
}

impl RcVector {
    pub fn new(phi: Vec<Complex64>) -> Result<Self> {
        for (index, z) in phi.iter().enumerate() {
            let modulus = z.norm();
            if !((modulus - 1.0).abs() <= RC_TOLERANCE) {
                return Err(Error::InvalidRc { index, modulus });
            }
        }
        Ok(Self { phi })
    }

    pub fn ones(n: usize) -> Self {
        Self {
            phi: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    pub fn from_phases(theta: &[f64]) -> Self {
        Self {
            phi: theta
                .iter()
                .map(|&t| Complex64::from_polar(1.0, t))
                .collect(),
        }
    }

    pub fn random(n: usize, rng: &mut RngStream) -> Self {
        Self {
            phi: (0..n).map(|_| rng.unit_phase()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.phi
    }

    pub fn phases(&self) -> Vec<f64> {
        self.phi.iter().map(|z| z.arg()).collect()
    }

    /// Replaces element `n` by `exp(iθ)`.
    pub fn set_phase(&mut self, n: usize, theta: f64) {
        self.phi[n] = Complex64::from_polar(1.0, theta);
    }
}

/// One draw of every link in a scenario.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    /// BS→RIS, `N x M`.
    pub u: CMatrix,
    /// RIS→user, `K x N`, row `k` is `v_kᴴ`.
    pub v: CMatrix,
    /// BS→user, `K x M`, row `k` is `h_d,kᴴ`.
    pub h_d: CMatrix,
    cascaded: Vec<CMatrix>,
}

impl ChannelRealization {
    /// Builds the realization and its cascaded stacks from the three links.
    pub fn from_links(u: CMatrix, v: CMatrix, h_d: CMatrix) -> Result<Self> {
        let (n, m) = u.shape();
        let k = h_d.rows();
        if h_d.cols() != m || v.shape() != (k, n) {
            return Err(Error::InvalidDimension(format!(
                "U is {n}x{m}, v is {}x{}, h_d is {}x{}",
                v.rows(),
                v.cols(),
                h_d.rows(),
                h_d.cols()
            )));
        }
        let cascaded = (0..k)
            .map(|user| {
                CMatrix::from_fn(m, n + 1, |a, col| {
                    if col == 0 {
                        h_d[(user, a)].conj()
                    } else {
                        (v[(user, col - 1)] * u[(col - 1, a)]).conj()
                    }
                })
            })
            .collect();
        Ok(Self {
            u,
            v,
            h_d,
            cascaded,
        })
    }

    /// Builds a realization directly from per-user uplink stacks. The link
    /// matrices are left empty-shaped placeholders in this case.
    pub fn from_cascaded(cascaded: Vec<CMatrix>) -> Result<Self> {
        let (m, cols) = cascaded
            .first()
            .map(CMatrix::shape)
            .ok_or_else(|| Error::InvalidDimension("no users".into()))?;
        if cols == 0 || cascaded.iter().any(|h| h.shape() != (m, cols)) {
            return Err(Error::InvalidDimension(
                "inconsistent cascaded stacks".into(),
            ));
        }
        let k = cascaded.len();
        let h_d = CMatrix::from_fn(k, m, |user, a| cascaded[user][(a, 0)].conj());
        Ok(Self {
            u: CMatrix::zeros(0, m),
            v: CMatrix::zeros(k, 0),
            h_d,
            cascaded,
        })
    }

    pub fn num_users(&self) -> usize {
        self.cascaded.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.cascaded[0].rows()
    }

    pub fn num_elements(&self) -> usize {
        self.cascaded[0].cols() - 1
    }

    /// Uplink stack `H_k` (`M x (N+1)`).
    pub fn cascaded(&self, k: usize) -> &CMatrix {
        &self.cascaded[k]
    }

    pub fn cascaded_all(&self) -> &[CMatrix] {
        &self.cascaded
    }

    /// Uplink direct channel `h_d,k`.
    pub fn direct(&self, k: usize) -> Vec<Complex64> {
        self.cascaded[k].column(0)
    }

    /// Uplink reflected channel `h_r,k,n`, `n` zero-based.
    pub fn reflected(&self, k: usize, n: usize) -> Vec<Complex64> {
        self.cascaded[k].column(n + 1)
    }

    pub fn superimpose(&self, phi: &RcVector, k: usize) -> Result<Vec<Complex64>> {
        superimpose_stack(&self.cascaded[k], phi)
    }

    /// `M x K` matrix whose columns are the superimposed channels.
    pub fn superimposed_matrix(&self, phi: &RcVector) -> Result<CMatrix> {
        let cols = (0..self.num_users())
            .map(|k| self.superimpose(phi, k))
            .collect::<Result<Vec<_>>>()?;
        CMatrix::from_columns(&cols)
    }

    /// All superimposed channels as column vectors.
    pub fn superimposed_all(&self, phi: &RcVector) -> Result<Vec<Vec<Complex64>>> {
        (0..self.num_users())
            .map(|k| self.superimpose(phi, k))
            .collect()
    }
}

/// `H [1, φᴴ]ᵀ` for an `M x (N+1)` stack `H`.
pub fn superimpose_stack(stack: &CMatrix, phi: &RcVector) -> Result<Vec<Complex64>> {
    let n = stack.cols().saturating_sub(1);
    if phi.len() != n {
        return Err(Error::InvalidDimension(format!(
            "{} reflection coefficients for {n} elements",
            phi.len()
        )));
    }
    for (index, z) in phi.as_slice().iter().enumerate() {
        let modulus = z.norm();
        if !((modulus - 1.0).abs() <= RC_TOLERANCE) {
            return Err(Error::InvalidRc { index, modulus });
        }
    }
    let mut out = stack.column(0);
    for (col, f) in phi.as_slice().iter().enumerate() {
        let w = f.conj();
        for (a, o) in out.iter_mut().enumerate() {
            *o += w * stack[(a, col + 1)];
        }
    }
    Ok(out)
}

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Large-scale gain `c0·d^(−α)`; valid for `d ≥ 1` m.
pub fn path_loss(d: f64, params: &LinkParams) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::InvalidGeometry(format!(
            "link length {d} m is below the 1 m reference distance"
        )));
    }
    Ok(params.c0 * d.powf(-params.exponent))
}

fn link_endpoints(
    geometry: &ArrayGeometry,
    link: Link,
) -> Result<(Point, Point, Vec<Point>, Vec<Point>)> {
    let user = |k: usize| {
        geometry
            .user_positions
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no user with index {k}")))
    };
    let single = vec![[0.0; 3]];
    // (transmitter, receiver, tx offsets, rx offsets), downlink orientation
    Ok(match link {
        Link::BsRis => (
            geometry.bs_center,
            geometry.ris_center,
            geometry.bs_offsets(),
            geometry.ris_offsets(),
        ),
        Link::RisUser(k) => (
            geometry.ris_center,
            user(k)?,
            geometry.ris_offsets(),
            single,
        ),
        Link::BsUser(k) => (geometry.bs_center, user(k)?, geometry.bs_offsets(), single),
    })
}

/// Link length in meters.
pub fn link_distance(geometry: &ArrayGeometry, link: Link) -> Result<f64> {
    let (tx, rx, _, _) = link_endpoints(geometry, link)?;
    Ok(distance(tx, rx))
}

/// Far-field LoS response, `receivers x transmitters` in downlink
/// orientation, normalized so entry `(0, 0)` is 1.
pub fn los_matrix(geometry: &ArrayGeometry, link: Link) -> Result<CMatrix> {
    let (tx, rx, tx_off, rx_off) = link_endpoints(geometry, link)?;
    let d = distance(tx, rx);
    if !(d > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "coincident endpoints for {link:?}"
        )));
    }
    let dir = [
        (rx[0] - tx[0]) / d,
        (rx[1] - tx[1]) / d,
        (rx[2] - tx[2]) / d,
    ];
    let proj = |p: &Point| p[0] * dir[0] + p[1] * dir[1] + p[2] * dir[2];
    let rx_proj: Vec<f64> = rx_off.iter().map(proj).collect();
    let tx_proj: Vec<f64> = tx_off.iter().map(proj).collect();
    let (r0, t0) = (rx_proj[0], tx_proj[0]);
    Ok(CMatrix::from_fn(rx_proj.len(), tx_proj.len(), |r, t| {
        Complex64::from_polar(1.0, -TAU * ((rx_proj[r] - r0) - (tx_proj[t] - t0)))
    }))
}

fn sample_link(
    geometry: &ArrayGeometry,
    link: Link,
    params: &LinkParams,
    rng: &mut RngStream,
) -> Result<CMatrix> {
    let d = link_distance(geometry, link)?;
    let scale = path_loss(d, params)?.sqrt();
    let beta = params.rician_beta;
    let los = los_matrix(geometry, link)?;
    if beta.is_infinite() {
        return Ok(los.scale_real(scale));
    }
    let w_los = (beta / (beta + 1.0)).sqrt();
    let w_nlos = (1.0 / (beta + 1.0)).sqrt();
    let mut out = CMatrix::zeros(los.rows(), los.cols());
    for r in 0..los.rows() {
        for c in 0..los.cols() {
            out[(r, c)] = (los[(r, c)] * w_los + rng.cgauss(1.0) * w_nlos) * scale;
        }
    }
    Ok(out)
}

/// Draws every link of the scenario per the Rician model.
pub fn sample_channels(
    scenario: &ScenarioConfig,
    rng: &mut RngStream,
) -> Result<ChannelRealization> {
    scenario.validate()?;
    let g = &scenario.geometry;
    let (m, n, k) = (g.bs_antennas, g.num_elements(), g.num_users());
    let u = if n > 0 {
        sample_link(g, Link::BsRis, &scenario.bs_ris, rng)?
    } else {
        CMatrix::zeros(0, m)
    };
    let mut v = CMatrix::zeros(k, n);
    let mut h_d = CMatrix::zeros(k, m);
    for user in 0..k {
        if n > 0 {
            let row = sample_link(g, Link::RisUser(user), &scenario.ris_user[user], rng)?;
            for e in 0..n {
                v[(user, e)] = row[(0, e)];
            }
        }
        let row = sample_link(g, Link::BsUser(user), &scenario.bs_user[user], rng)?;
        for a in 0..m {
            h_d[(user, a)] = row[(0, a)];
        }
    }
    ChannelRealization::from_links(u, v, h_d)
}
