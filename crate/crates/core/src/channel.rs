//! Geometric Rayleigh channel model and the derived cascaded/composite forms.
//!
//! Every link entry is `√(G0 d^-c) g` with `g ~ CN(0, 1)`. The IRS→AP matrix
//! is physically shared by all users and is generated once.

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::config::{Position, SystemConfig};
use crate::numerics::{standard_cgauss, CMatrix, CVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive (got {0} m)")]
    NonPositiveDistance(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("user index {0} out of range")]
    UnknownUser(usize),
}

/// Large-scale power gain `G0 · d^(-c)`.
pub fn pathloss_gain(reference_gain: f64, distance: f64, exponent: f64) -> Result<f64, ChannelError> {
    if !(distance > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance));
    }
    Ok(reference_gain * distance.powf(-exponent))
}

pub fn distance(a: Position, b: Position) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// `h_{B,U,k}`, length N.
    pub direct: Vec<CVector>,
    /// `h_{I,U,k}`, length M.
    pub ue_irs: Vec<CVector>,
    /// IRS→AP, M×N.
    pub irs_ap: CMatrix,
    /// `diag(h_{I,U,k}ᴴ) H_{B,I}`, M×N.
    pub cascade: Vec<CMatrix>,
    /// Cascade stacked over `h_{B,U,k}ᴴ`, (M+1)×N.
    pub composite: Vec<CMatrix>,
    /// Users ordered by non-decreasing identity-phase gain.
    pub sic_order: Vec<usize>,
    sic_position: Vec<usize>,
}

impl ChannelRealization {
    pub fn from_links(direct: Vec<CVector>, ue_irs: Vec<CVector>, irs_ap: CMatrix) -> Result<Self, ChannelError> {
        let k = direct.len();
        if ue_irs.len() != k {
            return Err(ChannelError::Dimension { expected: k, got: ue_irs.len() });
        }
        let (m, n) = irs_ap.shape();
        for h in &direct {
            if h.len() != n {
                return Err(ChannelError::Dimension { expected: n, got: h.len() });
            }
        }
        for h in &ue_irs {
            if h.len() != m {
                return Err(ChannelError::Dimension { expected: m, got: h.len() });
            }
        }

        let cascade: Vec<CMatrix> =
            ue_irs.iter().map(|h| CMatrix::from_fn(m, n, |i, j| h[i].conj() * irs_ap[(i, j)])).collect();
        let composite: Vec<CMatrix> = cascade
            .iter()
            .zip(&direct)
            .map(|(c, h)| CMatrix::from_fn(m + 1, n, |i, j| if i < m { c[(i, j)] } else { h[j].conj() }))
            .collect();

        let mut real =
            Self { direct, ue_irs, irs_ap, cascade, composite, sic_order: Vec::new(), sic_position: Vec::new() };
        real.sic_order = sic_order(&real);
        real.sic_position = vec![0; k];
        for (pos, &user) in real.sic_order.iter().enumerate() {
            real.sic_position[user] = pos;
        }
        Ok(real)
    }

    pub fn users(&self) -> usize {
        self.direct.len()
    }

    pub fn antennas(&self) -> usize {
        self.irs_ap.ncols()
    }

    pub fn elements(&self) -> usize {
        self.irs_ap.nrows()
    }

    /// Zero-based decoding position of `user`.
    pub fn sic_position(&self, user: usize) -> usize {
        self.sic_position[user]
    }

    /// Same direct links with the reflected path removed (M = 0).
    pub fn without_irs(&self) -> Self {
        let n = self.antennas();
        Self::from_links(self.direct.clone(), vec![CVector::zeros(0); self.users()], CMatrix::zeros(0, n))
            .expect("dimensions are inherited from a valid realization")
    }

    /// `h̄_k = H̄_kᴴ w̄`, so that `w̄ᴴ H̄_k m = h̄_kᴴ m`.
    pub fn effective_channel(&self, user: usize, irs: &CVector) -> CVector {
        self.composite[user].adjoint() * irs
    }

    /// `w̄ᴴ H̄_k m`.
    pub fn composite_gain(&self, user: usize, irs: &CVector, beam: &CVector) -> Result<Complex64, ChannelError> {
        if user >= self.users() {
            return Err(ChannelError::UnknownUser(user));
        }
        let h = &self.composite[user];
        if irs.len() != h.nrows() {
            return Err(ChannelError::Dimension { expected: h.nrows(), got: irs.len() });
        }
        if beam.len() != h.ncols() {
            return Err(ChannelError::Dimension { expected: h.ncols(), got: beam.len() });
        }
        Ok(irs.dotc(&(h * beam)))
    }
}

/// Users sorted by `‖h_{B,U,k}ᴴ + h_{I,U,k}ᴴ H_{B,I}‖₂` (phase matrix taken
/// as identity), ascending, ties by user index.
pub fn sic_order(real: &ChannelRealization) -> Vec<usize> {
    let m = real.elements();
    let ones = CVector::from_element(m + 1, Complex64::new(1.0, 0.0));
    let gains: Vec<f64> = (0..real.users()).map(|k| real.effective_channel(k, &ones).norm()).collect();
    let mut order: Vec<usize> = (0..real.users()).collect();
    order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]).then(a.cmp(&b)));
    order
}

pub struct LinkDistances {
    pub direct: Vec<f64>,
    pub ue_irs: Vec<f64>,
    pub irs_ap: f64,
}

/// Link lengths, with the configured UE→IRS offset added to every IRS link.
pub fn link_distances(cfg: &SystemConfig) -> LinkDistances {
    LinkDistances {
        direct: cfg.ue_positions.iter().map(|&u| distance(u, cfg.ap_position)).collect(),
        ue_irs: cfg.ue_positions.iter().map(|&u| distance(u, cfg.irs_position) + cfg.ue_irs_offset_m).collect(),
        irs_ap: distance(cfg.irs_position, cfg.ap_position),
    }
}

/// Draws one block-fading realization.
///
/// Fading is drawn in a fixed order (direct links, UE→IRS links, IRS→AP)
/// before any pathloss is applied, so realizations from the same stream
/// differ across geometries only through their large-scale gains.
pub fn generate_channels<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<ChannelRealization, ChannelError> {
    let (n, m, k) = (cfg.ap_antennas, cfg.irs_elements, cfg.users());
    let d = link_distances(cfg);

    let amp = |dist: f64, c: f64| pathloss_gain(cfg.reference_gain, dist, c).map(f64::sqrt);
    let direct_amp: Vec<f64> = d.direct.iter().map(|&x| amp(x, cfg.exponent_direct)).collect::<Result<_, _>>()?;
    let ue_irs_amp: Vec<f64> = d.ue_irs.iter().map(|&x| amp(x, cfg.exponent_ue_irs)).collect::<Result<_, _>>()?;
    let irs_ap_amp = amp(d.irs_ap, cfg.exponent_irs_ap)?;

    let direct: Vec<CVector> =
        (0..k).map(|u| CVector::from_fn(n, |_, _| standard_cgauss(rng) * direct_amp[u])).collect();
    let ue_irs: Vec<CVector> =
        (0..k).map(|u| CVector::from_fn(m, |_, _| standard_cgauss(rng) * ue_irs_amp[u])).collect();
    let irs_ap = CMatrix::from_fn(m, n, |_, _| standard_cgauss(rng) * irs_ap_amp);

    ChannelRealization::from_links(direct, ue_irs, irs_ap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{standard_cgauss_vec, stream_rng, Stream};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_cfg(n: usize, m: usize) -> SystemConfig {
        SystemConfig { ap_antennas: n, irs_elements: m, ..SystemConfig::default() }
    }

    #[test]
    fn pathloss_reference_and_decade() {
        assert_relative_eq!(pathloss_gain(1e-3, 1.0, 3.7).unwrap(), 1e-3, max_relative = 1e-15);
        assert_relative_eq!(pathloss_gain(1e-3, 10.0, 2.0).unwrap(), 1e-5, max_relative = 1e-15);
        assert!(pathloss_gain(1e-3, 0.0, 2.0).is_err());
        assert!(pathloss_gain(1e-3, -1.0, 2.0).is_err());
    }

    #[test]
    fn pathloss_from_reference_geometry() {
        let cfg = SystemConfig::default();
        let d = distance(cfg.ue_positions[1], cfg.irs_position);
        assert_relative_eq!(d, 89f64.sqrt(), max_relative = 1e-15);
        let g = pathloss_gain(cfg.reference_gain, d, cfg.exponent_ue_irs).unwrap();
        assert_relative_eq!(g, 1e-3 / 89.0, max_relative = 1e-12);
        assert_relative_eq!(g, 1.1236e-5, max_relative = 1e-4);
    }

    #[test]
    fn direct_link_power_matches_pathloss() {
        let cfg = small_cfg(1, 1);
        let mut rng = stream_rng(3, Stream::Fading);
        let expected =
            pathloss_gain(cfg.reference_gain, distance(cfg.ue_positions[0], cfg.ap_position), cfg.exponent_direct)
                .unwrap();
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            acc += generate_channels(&cfg, &mut rng).unwrap().direct[0][0].norm_sqr();
        }
        let mean = acc / draws as f64;
        assert!((mean / expected - 1.0).abs() < 0.05, "{mean} vs {expected}");
    }

    #[test]
    fn same_seed_same_realization() {
        let cfg = SystemConfig::default();
        let a = generate_channels(&cfg, &mut stream_rng(11, Stream::Fading)).unwrap();
        let b = generate_channels(&cfg, &mut stream_rng(11, Stream::Fading)).unwrap();
        assert_eq!(a.irs_ap, b.irs_ap);
        assert_eq!(a.direct, b.direct);
        assert_eq!(a.ue_irs, b.ue_irs);
        assert_eq!(a.sic_order, b.sic_order);
    }

    #[test]
    fn scalar_cascade() {
        let cfg = small_cfg(1, 1);
        let real = generate_channels(&cfg, &mut stream_rng(2, Stream::Fading)).unwrap();
        for k in 0..2 {
            let want = real.ue_irs[k][0].conj() * real.irs_ap[(0, 0)];
            assert_eq!(real.cascade[k][(0, 0)], want);
            assert_eq!(real.composite[k][(1, 0)], real.direct[k][0].conj());
        }
    }

    #[test]
    fn cascade_identity_entrywise() {
        let real = generate_channels(&SystemConfig::default(), &mut stream_rng(4, Stream::Fading)).unwrap();
        let (m, n) = real.irs_ap.shape();
        for k in 0..real.users() {
            let diag = CMatrix::from_diagonal(&real.ue_irs[k].map(|z| z.conj()));
            let want = &diag * &real.irs_ap;
            assert!((&want - &real.cascade[k]).norm() <= 1e-15 * want.norm());
            for i in 0..m {
                for j in 0..n {
                    assert_eq!(real.composite[k][(i, j)], real.cascade[k][(i, j)]);
                }
            }
        }
    }

    #[test]
    fn coincident_positions_fail() {
        let mut cfg = SystemConfig::default();
        cfg.ue_positions[0] = cfg.irs_position;
        assert!(matches!(
            generate_channels(&cfg, &mut stream_rng(0, Stream::Fading)),
            Err(ChannelError::NonPositiveDistance(_))
        ));
    }

    fn realization_with_direct_gains(gains: &[f64]) -> ChannelRealization {
        let direct = gains.iter().map(|&g| CVector::from_vec(vec![c(g, 0.0)])).collect();
        ChannelRealization::from_links(direct, vec![CVector::zeros(0); gains.len()], CMatrix::zeros(0, 1)).unwrap()
    }

    #[test]
    fn sic_two_users_and_ties() {
        assert_eq!(realization_with_direct_gains(&[0.3, 0.7]).sic_order, vec![0, 1]);
        assert_eq!(realization_with_direct_gains(&[0.7, 0.3]).sic_order, vec![1, 0]);
        assert_eq!(realization_with_direct_gains(&[0.5, 0.5, 0.5]).sic_order, vec![0, 1, 2]);
    }

    #[test]
    fn sic_order_matches_sort_oracle() {
        let cfg = SystemConfig {
            ue_positions: vec![[5.0, 75.0, 5.0], [5.0, 50.0, 10.0], [3.0, 60.0, 1.0]],
            ..SystemConfig::default()
        };
        for seed in 0..20 {
            let real = generate_channels(&cfg, &mut stream_rng(seed, Stream::Fading)).unwrap();
            // Explicit row-vector form h_directᴴ + h_ue_irsᴴ H_irs_ap.
            let gains: Vec<f64> = (0..3)
                .map(|k| {
                    let row = real.direct[k].adjoint() + real.ue_irs[k].adjoint() * &real.irs_ap;
                    row.norm()
                })
                .collect();
            let mut oracle: Vec<usize> = (0..3).collect();
            oracle.sort_by(|&a, &b| gains[a].partial_cmp(&gains[b]).unwrap());
            assert_eq!(real.sic_order, oracle);
            for (pos, &u) in real.sic_order.iter().enumerate() {
                assert_eq!(real.sic_position(u), pos);
            }
        }
    }

    #[test]
    fn no_irs_reduces_to_direct() {
        let real = generate_channels(&SystemConfig::default(), &mut stream_rng(8, Stream::Fading)).unwrap();
        let bare = real.without_irs();
        let mut rng = stream_rng(1, Stream::Init);
        let m = standard_cgauss_vec(4, &mut rng);
        let one = CVector::from_element(1, c(1.0, 0.0));
        for k in 0..2 {
            let g = bare.composite_gain(k, &one, &m).unwrap();
            let want = real.direct[k].dotc(&m);
            assert!((g - want).norm() < 1e-18);
        }
    }

    #[test]
    fn composite_gain_matches_phase_matrix_form() {
        let cfg = small_cfg(3, 5);
        let mut rng = stream_rng(21, Stream::Init);
        for seed in 0..10 {
            let real = generate_channels(&cfg, &mut stream_rng(seed, Stream::Fading)).unwrap();
            let theta: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
            // w̄ᴴ = [e^{jθ}, 1].
            let mut irs =
                CVector::from_fn(6, |i, _| if i < 5 { Complex64::from_polar(1.0, -theta[i]) } else { c(1.0, 0.0) });
            let m = standard_cgauss_vec(3, &mut rng);
            for k in 0..2 {
                let hm = &real.irs_ap * &m;
                let mut want = real.direct[k].dotc(&m);
                for i in 0..5 {
                    want += Complex64::from_polar(1.0, theta[i]) * real.ue_irs[k][i].conj() * hm[i];
                }
                let g = real.composite_gain(k, &irs, &m).unwrap();
                assert!((g - want).norm() <= 1e-12 * want.norm());
            }
            // Global phase rotation leaves the magnitude unchanged.
            let before = real.composite_gain(0, &irs, &m).unwrap().norm();
            irs *= Complex64::from_polar(1.0, 0.7);
            let after = real.composite_gain(0, &irs, &m).unwrap().norm();
            assert_relative_eq!(before, after, max_relative = 1e-12);
        }
    }

    #[test]
    fn identity_phase_gain_equals_ordering_gain() {
        let real = generate_channels(&SystemConfig::default(), &mut stream_rng(5, Stream::Fading)).unwrap();
        let ones = CVector::from_element(17, c(1.0, 0.0));
        for k in 0..2 {
            let h = real.effective_channel(k, &ones);
            let m = &h / c(h.norm(), 0.0);
            let g = real.composite_gain(k, &ones, &m).unwrap();
            assert_relative_eq!(g.norm(), h.norm(), max_relative = 1e-12);
        }
    }

    #[test]
    fn dimension_errors() {
        let real = generate_channels(&small_cfg(2, 3), &mut stream_rng(0, Stream::Fading)).unwrap();
        let bad = CVector::zeros(2);
        assert!(real.composite_gain(0, &bad, &CVector::zeros(2)).is_err());
        assert!(real.composite_gain(0, &CVector::zeros(4), &CVector::zeros(3)).is_err());
        assert!(real.composite_gain(5, &CVector::zeros(4), &CVector::zeros(2)).is_err());
    }

    #[test]
    fn offset_only_weakens_irs_links() {
        let base = SystemConfig::default();
        let moved = SystemConfig { ue_irs_offset_m: 10.0, ..base.clone() };
        let a = generate_channels(&base, &mut stream_rng(6, Stream::Fading)).unwrap();
        let b = generate_channels(&moved, &mut stream_rng(6, Stream::Fading)).unwrap();
        assert_eq!(a.direct, b.direct);
        assert_eq!(a.irs_ap, b.irs_ap);
        for k in 0..2 {
            let ratio = b.ue_irs[k].norm() / a.ue_irs[k].norm();
            let d = link_distances(&base).ue_irs[k];
            assert_relative_eq!(ratio, d / (d + 10.0), max_relative = 1e-12);
        }
    }
}
