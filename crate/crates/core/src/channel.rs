//! One-ring multipath channel model for the active users.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Result};

/// Circularly-symmetric complex Gaussian sample with total variance `var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let scale = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Base-station antennas.
    pub antennas: usize,
    /// Propagation paths per user.
    pub paths: usize,
    /// Maximum angular spread around the cluster center, degrees.
    pub delta_deg: f64,
    /// Cyclic prefix length in symbols.
    pub cp_len: f64,
    /// Bandwidth in Hz.
    pub bandwidth: f64,
    /// Antenna spacing over wavelength.
    pub spacing_ratio: f64,
}

impl ChannelParams {
    pub fn with_antennas(antennas: usize) -> Self {
        Self {
            antennas,
            paths: 16,
            delta_deg: 15.0,
            cp_len: 64.0,
            bandwidth: 1.4e6,
            spacing_ratio: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::Config("antennas must be >= 1".into()));
        }
        if self.paths == 0 {
            return Err(Error::Config("paths must be >= 1".into()));
        }
        if !(0.0..90.0).contains(&self.delta_deg) {
            return Err(Error::Config(format!(
                "delta_deg must lie in [0, 90), got {}",
                self.delta_deg
            )));
        }
        if !(self.spacing_ratio > 0.0) {
            return Err(Error::Config("spacing_ratio must be > 0".into()));
        }
        if !(self.cp_len >= 0.0 && self.bandwidth > 0.0) {
            return Err(Error::Config("cp_len >= 0 and bandwidth > 0 required".into()));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::with_antennas(64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    /// Physical angle of arrival, radians.
    pub angle: f64,
    /// Tap delay, seconds.
    pub tap_delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRealization {
    pub pilot_index: usize,
    pub frame_delay: usize,
    pub center_angle: f64,
    pub paths: Vec<Path>,
    pub channel: DVector<Complex64>,
}

/// ULA steering vector, entry `m` is `exp(-i 2 pi m (d/lambda) sin(angle))`.
pub fn array_response(angle: f64, antennas: usize, spacing_ratio: f64) -> DVector<Complex64> {
    let step = -2.0 * PI * spacing_ratio * angle.sin();
    DVector::from_fn(antennas, |m, _| Complex64::from_polar(1.0, step * m as f64))
}

/// Sum of the paths' steering vectors weighted by gain and the per-path
/// phase `exp(i pi tau B)`.
pub fn compose_channel(paths: &[Path], params: &ChannelParams) -> DVector<Complex64> {
    let mut h = DVector::zeros(params.antennas);
    for p in paths {
        let phase = Complex64::from_polar(1.0, PI * p.tap_delay * params.bandwidth);
        h += array_response(p.angle, params.antennas, params.spacing_ratio) * (p.gain * phase);
    }
    h
}

/// Samples one active user: pilot and frame delay uniform, a cluster center
/// uniform in `(-pi/2 + delta, pi/2 - delta)`, and `paths` rays spread
/// uniformly within `+-delta` of the center with CN(0, 1) gains.
pub fn draw_user<R: Rng + ?Sized>(
    params: &ChannelParams,
    n_p: usize,
    t_m: usize,
    rng: &mut R,
) -> UserRealization {
    let delta = params.delta_deg.to_radians();
    let pilot_index = rng.gen_range(0..n_p);
    let frame_delay = rng.gen_range(0..=t_m);
    let half = FRAC_PI_2 - delta;
    let center_angle = if half > 0.0 {
        rng.gen_range(-half..half)
    } else {
        0.0
    };
    let max_tap = params.cp_len / params.bandwidth;
    let paths: Vec<Path> = (0..params.paths)
        .map(|_| {
            let gain = complex_normal(rng, 1.0);
            let angle = if delta > 0.0 {
                center_angle + rng.gen_range(-delta..=delta)
            } else {
                center_angle
            };
            let tap_delay = if max_tap > 0.0 {
                rng.gen_range(0.0..max_tap)
            } else {
                0.0
            };
            Path {
                gain,
                angle,
                tap_delay,
            }
        })
        .collect();
    let channel = compose_channel(&paths, params);
    UserRealization {
        pilot_index,
        frame_delay,
        center_angle,
        paths,
        channel,
    }
}

/// `k` independent users. Pilot/delay collisions are allowed.
pub fn sample_actives<R: Rng + ?Sized>(
    k: usize,
    params: &ChannelParams,
    n_p: usize,
    t_m: usize,
    rng: &mut R,
) -> Result<Vec<UserRealization>> {
    if k == 0 {
        return Err(Error::Config("number of active users must be >= 1".into()));
    }
    if n_p == 0 {
        return Err(Error::Config("pilot pool is empty".into()));
    }
    params.validate()?;
    Ok((0..k).map(|_| draw_user(params, n_p, t_m, rng)).collect())
}

/// One line per user: `pilot delay center_angle re0 im0 re1 im1 ...`.
pub fn dump_users(users: &[UserRealization]) -> String {
    let mut out = String::from("# pilot delay center_angle_rad channel(re im)...\n");
    for u in users {
        write!(out, "{} {} {:.17e}", u.pilot_index, u.frame_delay, u.center_angle).unwrap();
        for z in u.channel.iter() {
            write!(out, " {:.17e} {:.17e}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    out
}
